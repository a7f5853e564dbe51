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

//! Random kinematic trees and an independent homogeneous-matrix oracle.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::Rng;
use softhand::kinematics::JointAngles;
use softhand::model::{HandModel, Joint, Link};
use softhand::RigidTransform;

/// Raw joint data kept next to the model so the oracle never reads the
/// model's own transforms.
#[derive(Debug, Clone)]
pub struct RawJoint {
    pub name: String,
    pub parent: String,
    pub child: String,
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
    pub axis: Option<[f64; 3]>,
}

pub struct RandomTree {
    pub model: HandModel,
    pub joints: Vec<RawJoint>,
}

/// A tree with `n` joints (about one in five fixed). `serial` makes every
/// joint hang off the previous link; otherwise parents are drawn at random.
pub fn random_tree(rng: &mut impl Rng, n: usize, serial: bool) -> RandomTree {
    let mut links = vec![Link::new("l0")];
    let mut joints = Vec::new();
    let mut raw = Vec::new();
    for k in 0..n {
        let parent = if serial { k } else { rng.random_range(0..=k) };
        let (parent, child) = (format!("l{parent}"), format!("l{}", k + 1));
        let xyz = [0; 3].map(|_| rng.random_range(-0.05..0.05));
        let rpy = [0; 3].map(|_| rng.random_range(-PI..PI));
        let origin = RigidTransform::from_xyz_rpy(xyz, rpy);
        let name = format!("j{k}");
        links.push(Link::new(&child));
        if rng.random_bool(0.2) {
            joints.push(Joint::fixed(&name, &parent, &child, origin));
            raw.push(RawJoint { name, parent, child, xyz, rpy, axis: None });
        } else {
            let a = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
            joints.push(Joint::revolute(&name, &parent, &child, origin, a, [-PI, PI]));
            raw.push(RawJoint { name, parent, child, xyz, rpy, axis: Some([a.x, a.y, a.z]) });
        }
    }
    let model = HandModel::from_parts("random", links, joints, Vec::new()).expect("random tree is valid");
    RandomTree { model, joints: raw }
}

pub fn random_angles(model: &HandModel, rng: &mut impl Rng) -> JointAngles {
    model.revolute_joints().map(|j| (j.name.clone(), rng.random_range(-PI..PI))).collect()
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rodrigues' formula for a unit axis.
pub fn rodrigues(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
    let [x, y, z] = axis;
    let k = Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

pub fn homogeneous(r: Matrix3<f64>, t: [f64; 3]) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m[(0, 3)] = t[0];
    m[(1, 3)] = t[1];
    m[(2, 3)] = t[2];
    m
}

/// URDF origin: translation, then fixed-axis roll, pitch, yaw.
pub fn origin_matrix(xyz: [f64; 3], rpy: [f64; 3]) -> Matrix4<f64> {
    homogeneous(rot_z(rpy[2]) * rot_y(rpy[1]) * rot_x(rpy[0]), xyz)
}

/// Link world matrices by repeated passes over the raw joint list, so the
/// oracle shares no traversal code with the library.
pub fn oracle_poses(
    root: &str,
    joints: &[RawJoint],
    angles: &BTreeMap<String, f64>,
    base: Matrix4<f64>,
) -> BTreeMap<String, Matrix4<f64>> {
    let mut poses = BTreeMap::from([(root.to_string(), base)]);
    while poses.len() <= joints.len() {
        for j in joints {
            if poses.contains_key(&j.child) {
                continue;
            }
            let Some(parent) = poses.get(&j.parent).copied() else { continue };
            let mut m = parent * origin_matrix(j.xyz, j.rpy);
            if let Some(axis) = j.axis {
                m *= homogeneous(rodrigues(axis, angles[&j.name]), [0.0; 3]);
            }
            poses.insert(j.child.clone(), m);
        }
    }
    poses
}

pub fn angle_map(angles: &JointAngles) -> BTreeMap<String, f64> {
    angles.iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Largest componentwise difference between two matrices.
pub fn max_diff(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (a - b).amax()
}
