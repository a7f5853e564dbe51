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
//! Procedurally generated hand, objects and tasks for examples, tests and the
//! desk-scale design study.
//!
//! The hand has four fingers with three crease joints each and a thumb on a
//! fixed mount with abduction, opposition and three crease joints. Seven
//! tendons drive it: one per finger, plus three for the thumb. Every finger's
//! middle and distal joints follow its proximal joint.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use softhand::coupling::CouplingModel;
use softhand::kinematics::link_poses;
use softhand::mesh::TriMesh;
use softhand::model::{ContactPatch, Geometry, HandModel, Joint, Link, PatchOwner};
use softhand::objective::{joint_vector, GraspTask, GraspVariables};
use softhand::RigidTransform;

use crate::JointEdit;

/// Finger name, lateral offset on the palm (m) and length scale.
const FINGERS: [(&str, f64, f64); 4] =
    [("index", 0.027, 1.0), ("middle", 0.009, 1.06), ("ring", -0.009, 0.97), ("little", -0.027, 0.82)];
const SEGMENTS: [f64; 3] = [0.045, 0.028, 0.022];
const THUMB_SEGMENTS: [f64; 3] = [0.040, 0.032, 0.025];
const PALM_LENGTH: f64 = 0.09;
/// Coupling slopes of the middle and distal joints.
pub const SLOPES: [f64; 2] = [0.8, 0.6];
const FLEX_LIMITS: [f64; 2] = [0.0, 1.6];
const THUMB_BASE_LIMITS: [f64; 2] = [-0.6, 0.6];

/// Names of the five fingertip pad patches, thumb last.
pub const TIP_PADS: [&str; 5] = ["index_tip", "middle_tip", "ring_tip", "little_tip", "thumb_tip"];

fn segment(name: &str, length: f64, radius: f64) -> Link {
    Link::new(name).with_visual(
        RigidTransform::from_translation(Vector3::new(0.0, 0.0, length / 2.0)),
        Geometry::Cylinder { radius, length },
    )
}

/// Pad on the palmar (−y) side of a distal segment, normals facing out.
fn tip_pad(id: &str, link: &str, length: f64) -> ContactPatch {
    let n = Vector3::new(0.0, -1.0, 0.0);
    let points = [(-0.004, 0.35), (0.004, 0.35), (-0.004, 0.75), (0.004, 0.75)]
        .iter()
        .map(|&(x, f)| Vector3::new(x, -0.0085, f * length))
        .collect();
    ContactPatch::new(id, PatchOwner::Link(link.into()), points, Some(vec![n; 4]), "fingertip")
        .expect("valid pad")
}

/// The seven-tendon test hand with fingertip pads.
pub fn procedural_hand() -> HandModel {
    let mut links = vec![Link::new("palm").with_visual(
        RigidTransform::from_translation(Vector3::new(0.0, 0.0, PALM_LENGTH / 2.0)),
        Geometry::Box { size: [0.075, 0.02, PALM_LENGTH] },
    )];
    let mut joints = Vec::new();
    let mut patches = Vec::new();
    let seg_names = ["proximal", "middle", "distal"];
    for (finger, x, scale) in FINGERS {
        let mut parent = "palm".to_string();
        let mut offset = Vector3::new(x, 0.0, PALM_LENGTH);
        for (k, len) in SEGMENTS.iter().enumerate() {
            let len = len * scale;
            let child = format!("{finger}_{}", seg_names[k]);
            links.push(segment(&child, len, 0.0085));
            joints.push(Joint::revolute(
                format!("{finger}_j{}", k + 1),
                parent.clone(),
                child.clone(),
                RigidTransform::from_translation(offset),
                Vector3::x(),
                FLEX_LIMITS,
            ));
            parent = child;
            offset = Vector3::new(0.0, 0.0, len);
        }
        patches.push(tip_pad(&format!("{finger}_tip"), &parent, SEGMENTS[2] * scale));
    }

    links.push(Link::new("thumb_base"));
    links.push(Link::new("thumb_abduct"));
    links.push(Link::new("thumb_rotator"));
    joints.push(Joint::fixed(
        "thumb_mount",
        "palm",
        "thumb_base",
        RigidTransform::from_xyz_rpy([0.045, -0.006, 0.022], [0.0, 0.85, 0.0]),
    ));
    joints.push(Joint::revolute(
        "thumb_abd",
        "thumb_base",
        "thumb_abduct",
        RigidTransform::identity(),
        Vector3::y(),
        THUMB_BASE_LIMITS,
    ));
    joints.push(Joint::revolute(
        "thumb_opp",
        "thumb_abduct",
        "thumb_rotator",
        RigidTransform::identity(),
        Vector3::z(),
        THUMB_BASE_LIMITS,
    ));
    let mut parent = "thumb_rotator".to_string();
    let mut offset = Vector3::zeros();
    for (k, len) in THUMB_SEGMENTS.iter().enumerate() {
        let child = format!("thumb_{}", seg_names[k]);
        links.push(segment(&child, *len, 0.0095));
        joints.push(Joint::revolute(
            format!("thumb_j{}", k + 1),
            parent.clone(),
            child.clone(),
            RigidTransform::from_translation(offset),
            Vector3::x(),
            FLEX_LIMITS,
        ));
        parent = child;
        offset = Vector3::new(0.0, 0.0, *len);
    }
    patches.push(tip_pad("thumb_tip", &parent, THUMB_SEGMENTS[2]));
    HandModel::from_parts("procedural_hand", links, joints, patches).expect("procedural hand is valid")
}

/// Seven independent joints, ten dependent ones.
pub fn procedural_coupling() -> CouplingModel {
    let mut independent: Vec<String> = FINGERS.iter().map(|(f, _, _)| format!("{f}_j1")).collect();
    independent.extend(["thumb_abd", "thumb_opp", "thumb_j1"].map(String::from));
    let mut dependent = Vec::new();
    let mut triplets = Vec::new();
    let drivers = FINGERS.iter().enumerate().map(|(c, (f, _, _))| (*f, c)).chain([("thumb", 6)]);
    for (finger, col) in drivers {
        for (k, slope) in SLOPES.iter().enumerate() {
            triplets.push((dependent.len(), col, *slope));
            dependent.push(format!("{finger}_j{}", k + 2));
        }
    }
    CouplingModel::new(independent, dependent, triplets).expect("procedural coupling is valid")
}

/// Thumb design variants: an explicit identity edit plus three relocations
/// of the thumb mount.
pub fn thumb_variants() -> Vec<(String, Vec<JointEdit>)> {
    let edit = |delta| vec![JointEdit { joint: "thumb_mount".into(), delta }];
    vec![
        ("identity".into(), edit(RigidTransform::identity())),
        ("opposed".into(), edit(RigidTransform::from_axis_angle(&Vector3::z(), 0.35))),
        ("angled".into(), edit(RigidTransform::from_axis_angle(&Vector3::x(), -0.3))),
        ("lowered".into(), edit(RigidTransform::from_translation(Vector3::new(0.0, -0.004, -0.015)))),
    ]
}

/// Surface of revolution about z through `profile` (radius, height) points.
pub fn lathe(profile: &[(f64, f64)], segments: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity(profile.len() * segments);
    for &(r, z) in profile {
        for s in 0..segments {
            let a = TAU * s as f64 / segments as f64;
            vertices.push([r * a.cos(), r * a.sin(), z]);
        }
    }
    let mut triangles = Vec::new();
    let idx = |i: usize, s: usize| (i * segments + s % segments) as u32;
    for i in 0..profile.len() - 1 {
        for s in 0..segments {
            triangles.push([idx(i, s), idx(i, s + 1), idx(i + 1, s + 1)]);
            triangles.push([idx(i, s), idx(i + 1, s + 1), idx(i + 1, s)]);
        }
    }
    TriMesh::new(vertices, triangles).expect("lathe mesh is valid")
}

/// Axis-aligned cuboid centered at the origin, each face split into an
/// `n × n` grid.
pub fn cuboid(size: [f64; 3], n: usize) -> TriMesh {
    let mut mesh = TriMesh::default();
    let h = size.map(|s| s / 2.0);
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut vertices = Vec::new();
            for i in 0..=n {
                for j in 0..=n {
                    let mut p = [0.0; 3];
                    p[axis] = sign * h[axis];
                    p[u] = -h[u] + size[u] * i as f64 / n as f64;
                    p[v] = -h[v] + size[v] * j as f64 / n as f64;
                    vertices.push(p);
                }
            }
            let id = |i: usize, j: usize| (i * (n + 1) + j) as u32;
            let mut triangles = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    if sign > 0.0 {
                        triangles.push([a, b, c]);
                        triangles.push([a, c, d]);
                    } else {
                        triangles.push([a, c, b]);
                        triangles.push([a, d, c]);
                    }
                }
            }
            mesh.merge(&TriMesh { vertices, triangles });
        }
    }
    mesh
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyObject {
    Bowl,
    Box,
    Lemon,
    WineGlass,
}

impl StudyObject {
    pub const ALL: [StudyObject; 4] = [StudyObject::Bowl, StudyObject::Box, StudyObject::Lemon, StudyObject::WineGlass];

    pub fn name(self) -> &'static str {
        match self {
            StudyObject::Bowl => "bowl",
            StudyObject::Box => "box",
            StudyObject::Lemon => "lemon",
            StudyObject::WineGlass => "wine_glass",
        }
    }

    /// Object-frame mesh in meters, symmetry axis along z.
    pub fn mesh(self) -> TriMesh {
        match self {
            StudyObject::Box => cuboid([0.05, 0.05, 0.075], 10),
            StudyObject::Lemon => {
                let profile: Vec<(f64, f64)> = (0..=24)
                    .map(|i| {
                        let t = PI * i as f64 / 24.0;
                        // slightly pointed ellipsoid
                        let r = 0.03 * t.sin() * (1.0 - 0.08 * (2.0 * t).cos().abs().powi(4));
                        (r, -0.04 * t.cos())
                    })
                    .collect();
                lathe(&profile, 32)
            }
            StudyObject::Bowl => {
                // outer hemisphere, torus rim, inner hemisphere
                let (outer, inner, rim) = (0.065, 0.06, 0.0025);
                let mut profile = Vec::new();
                for i in 0..=16 {
                    let t = FRAC_PI_2 * i as f64 / 16.0;
                    profile.push((outer * t.sin(), -outer * t.cos()));
                }
                for i in 1..8 {
                    let t = PI * i as f64 / 8.0;
                    profile.push((outer - rim + rim * t.cos(), rim * t.sin()));
                }
                for i in (0..=16).rev() {
                    let t = FRAC_PI_2 * i as f64 / 16.0;
                    profile.push((inner * t.sin(), -inner * t.cos()));
                }
                lathe(&profile, 40)
            }
            StudyObject::WineGlass => {
                let mut profile = vec![(0.0, 0.0), (0.034, 0.0), (0.034, 0.003), (0.005, 0.006), (0.004, 0.07)];
                for i in 0..=12 {
                    let t = FRAC_PI_2 * i as f64 / 12.0;
                    profile.push((0.004 + 0.036 * t.sin(), 0.07 + 0.045 * (1.0 - t.cos())));
                }
                profile.extend([(0.04, 0.13), (0.036, 0.16), (0.034, 0.16), (0.037, 0.13), (0.0, 0.09)]);
                lathe(&profile, 32)
            }
        }
    }

    /// Object-frame point placed at the grasp center.
    fn grasp_anchor(self) -> Vector3<f64> {
        match self {
            StudyObject::WineGlass => Vector3::new(0.0, 0.0, 0.115),
            _ => Vector3::zeros(),
        }
    }

    /// Object orientation in the palm frame.
    fn attitude(self) -> RigidTransform {
        match self {
            // opening toward the palm
            StudyObject::Bowl => RigidTransform::from_axis_angle(&Vector3::x(), -FRAC_PI_2),
            _ => RigidTransform::identity(),
        }
    }
}

/// Independent angles of the nominal half-closed hand, in coupling order.
pub fn nominal_theta(coupling: &CouplingModel) -> Vec<f64> {
    coupling
        .independent()
        .iter()
        .map(|name| match name.as_str() {
            "thumb_abd" => 0.0,
            "thumb_opp" => 0.2,
            "thumb_j1" => 0.5,
            _ => 0.55,
        })
        .collect()
}

/// World centers of the five fingertip pads.
pub fn pad_centers(model: &HandModel, coupling: &CouplingModel, theta_i: &[f64], wrist: &RigidTransform) -> Vec<Vector3<f64>> {
    let joints = joint_vector(model, coupling, theta_i).expect("coupling covers the hand");
    let poses = link_poses(model, &joints, wrist);
    TIP_PADS
        .iter()
        .map(|id| {
            let pad = model.patch(id).expect("pad exists");
            let link = pad.owner.link().expect("hand patch");
            let pose = poses[model.link_index(link).expect("link exists")];
            pad.points.iter().map(|p| pose.transform_point(p)).sum::<Vector3<f64>>() / pad.points.len() as f64
        })
        .collect()
}

/// Grasp task for `object`: the object sits at the pads' centroid in the
/// nominal pose and each pad is paired with the `k` mesh vertices around the
/// surface point nearest to it.
pub fn object_task(model: &HandModel, coupling: &CouplingModel, object: StudyObject) -> GraspTask {
    let centers = pad_centers(model, coupling, &nominal_theta(coupling), &RigidTransform::identity());
    let centroid = centers.iter().sum::<Vector3<f64>>() / centers.len() as f64;
    let attitude = object.attitude();
    let anchor = attitude.transform_vector(&object.grasp_anchor());
    let pose = RigidTransform::new(centroid - anchor, *attitude.rotation());
    let mesh = object.mesh();
    let normals = mesh.vertex_normals();
    let inv = pose.inverse();
    let k = 6;
    let mut patches = Vec::new();
    let mut pairs = Vec::new();
    for (pad, center) in TIP_PADS.iter().zip(&centers) {
        let local = inv.transform_point(center);
        let nearest = |p: &Vector3<f64>| {
            let mut idx: Vec<usize> = (0..mesh.vertices.len()).collect();
            idx.sort_by(|&a, &b| {
                (mesh.vertex(a) - p).norm_squared().total_cmp(&(mesh.vertex(b) - p).norm_squared()).then(a.cmp(&b))
            });
            idx
        };
        let seed = nearest(&local)[0];
        let chosen: Vec<usize> = nearest(&mesh.vertex(seed)).into_iter().take(k).collect();
        let points = chosen.iter().map(|&i| mesh.vertex(i)).collect();
        let ns = chosen
            .iter()
            .map(|&i| {
                let n = normals[i];
                if n.norm() > 0.0 { n.normalize() } else { Vector3::z() }
            })
            .collect();
        let id = format!("{}_{}", object.name(), pad.trim_end_matches("_tip"));
        patches.push(ContactPatch::new(&id, PatchOwner::Object, points, Some(ns), object.name()).expect("valid patch"));
        pairs.push((pad.to_string(), id));
    }
    GraspTask {
        name: object.name().into(),
        object_mesh: mesh,
        object_pose: pose,
        patches,
        pairs,
        normal_weight: 0.0,
    }
}

/// Start for object tasks: a nearly open hand at the reference wrist.
pub fn open_hand(coupling: &CouplingModel) -> GraspVariables {
    let theta = coupling.independent().iter().map(|n| if n.starts_with("thumb_") && n != "thumb_j1" { 0.0 } else { 0.15 }).collect();
    GraspVariables::new(RigidTransform::identity(), theta)
}

/// Task whose object patches are the hand's own pad points at `theta_i` and
/// `wrist`, plus optional isotropic noise of standard deviation `noise`
/// (m). With zero noise a zero-energy solution exists by construction.
pub fn constructed_task(
    model: &HandModel,
    coupling: &CouplingModel,
    theta_i: &[f64],
    wrist: &RigidTransform,
    noise: f64,
    rng: &mut impl Rng,
    name: &str,
) -> GraspTask {
    let joints = joint_vector(model, coupling, theta_i).expect("coupling covers the hand");
    let poses = link_poses(model, &joints, wrist);
    let object_pose = RigidTransform::from_xyz_rpy([0.0, -0.05, 0.12], [0.3, -0.2, 0.1]);
    let inv = object_pose.inverse();
    let mut patches = Vec::new();
    let mut pairs = Vec::new();
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise level");
    for pad in TIP_PADS {
        let patch = model.patch(pad).expect("pad exists");
        let pose = poses[model.link_index(patch.owner.link().expect("hand patch")).expect("link")];
        let points = patch
            .points
            .iter()
            .map(|p| {
                let jitter = Vector3::from_fn(|_, _| normal.sample(rng));
                inv.transform_point(&(pose.transform_point(p) + jitter))
            })
            .collect();
        let id = format!("target_{}", pad.trim_end_matches("_tip"));
        patches.push(ContactPatch::new(&id, PatchOwner::Object, points, None, "target").expect("valid patch"));
        pairs.push((pad.to_string(), id));
    }
    GraspTask {
        name: name.into(),
        object_mesh: StudyObject::Lemon.mesh(),
        object_pose,
        patches,
        pairs,
        normal_weight: 0.0,
    }
}

/// Uniform random independent angles inside a comfortable part of the
/// joint ranges.
pub fn random_theta(coupling: &CouplingModel, rng: &mut impl Rng) -> Vec<f64> {
    coupling
        .independent()
        .iter()
        .map(|n| match n.as_str() {
            "thumb_abd" | "thumb_opp" => rng.random_range(-0.4..0.4),
            _ => rng.random_range(0.1..1.2),
        })
        .collect()
}
