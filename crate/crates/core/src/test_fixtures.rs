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
//! Small models shared by unit tests.

use crate::coupling::CouplingModel;
use crate::mesh::TriMesh;
use crate::model::{ContactPatch, HandModel, Joint, Link, PatchOwner};
use crate::transform::RigidTransform;
use nalgebra::Vector3;

pub(crate) fn tetra() -> TriMesh {
    TriMesh::new(
        vec![[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.0, 0.1]],
        vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
    )
    .unwrap()
}

/// Three-joint finger with a three-point pad on the tip and a one-point
/// patch on the proximal link.
pub(crate) fn finger() -> HandModel {
    let links = ["palm", "l1", "l2", "tip"].map(Link::new).to_vec();
    let joints = vec![
        Joint::revolute("j1", "palm", "l1", RigidTransform::from_xyz_rpy([0.0, 0.0, 0.02], [0.0; 3]), Vector3::z(), [-1.0, 1.0]),
        Joint::revolute("j2", "l1", "l2", RigidTransform::from_xyz_rpy([0.0, 0.0, 0.05], [0.1, 0.0, 0.0]), Vector3::x(), [0.0, 1.5]),
        Joint::revolute("j3", "l2", "tip", RigidTransform::from_xyz_rpy([0.0, 0.0, 0.03], [0.0; 3]), Vector3::x(), [0.0, 1.5]),
    ];
    let n = Vector3::new(0.0, -1.0, 0.0);
    let pad = ContactPatch::new(
        "pad",
        PatchOwner::Link("tip".into()),
        vec![Vector3::new(0.0, -0.008, 0.01), Vector3::new(0.005, -0.008, 0.015), Vector3::new(-0.004, -0.008, 0.02)],
        Some(vec![n, n, n]),
        "",
    )
    .unwrap();
    let side = ContactPatch::new("side", PatchOwner::Link("l1".into()), vec![Vector3::new(0.01, 0.0, 0.02)], None, "").unwrap();
    HandModel::from_parts("finger", links, joints, vec![pad, side]).unwrap()
}

/// `j3 = 0.7 j2`.
pub(crate) fn coupling() -> CouplingModel {
    CouplingModel::new(vec!["j1".into(), "j2".into()], vec!["j3".into()], vec![(0, 1, 0.7)]).unwrap()
}
