/*
Copyright 2026 The softhand Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! Soft robot hand modeling and grasp synthesis.
//!
//! Tendon-driven soft hands are treated as quasi-rigid kinematic trees:
//! creases in the printed fingers behave like revolute joints, so a URDF with
//! revolute and fixed joints captures the reachable poses. On top of that
//! model the crate provides
//!
//! * [`model`]: URDF parsing, serialization and design edits,
//! * [`kinematics`]: forward kinematics and point Jacobians,
//! * [`coupling`]: the linear tendon coupling `M θ_I − θ_D = 0` and its fit,
//! * [`objective`]: the contact-alignment energy and its gradient,
//! * [`solver`]: an SQP solver for bound- and equality-constrained problems
//!   and the constraint cascade built on it,
//! * [`grasp`]: grasp synthesis that wires the pieces together.

pub mod coupling;
pub mod grasp;
pub mod kinematics;
pub mod mesh;
pub mod model;
pub mod objective;
pub mod solver;
pub mod transform;

pub use transform::RigidTransform;

#[cfg(test)]
mod test_fixtures;
