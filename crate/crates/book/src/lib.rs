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

//! The guide under `book/src`, one module per chapter, so that
//! `cargo test --doc` runs every snippet.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/hand-models.md")]
pub mod hand_models {}
#[doc = include_str!("../../../book/src/coupling.md")]
pub mod coupling {}
#[doc = include_str!("../../../book/src/grasp-objective.md")]
pub mod grasp_objective {}
#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}
#[doc = include_str!("../../../book/src/design-studies.md")]
pub mod design_studies {}
#[doc = include_str!("../../../book/src/studio.md")]
pub mod studio {}
