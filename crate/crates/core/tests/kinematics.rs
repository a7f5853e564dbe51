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

mod common;

use std::collections::BTreeMap;

use common::*;
use nalgebra::{Matrix4, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softhand::kinematics::{forward_kinematics, KinematicsError, patch_world_points, point_jacobian, JointAngles};
use softhand::model::{ContactPatch, PatchOwner};
use softhand::RigidTransform;

fn random_base(rng: &mut impl Rng) -> (RigidTransform, Matrix4<f64>) {
    let xyz = [0; 3].map(|_| rng.random_range(-0.3..0.3));
    let rpy = [0; 3].map(|_| rng.random_range(-3.0..3.0));
    (RigidTransform::from_xyz_rpy(xyz, rpy), origin_matrix(xyz, rpy))
}

#[test]
fn fk_matches_matrix_oracle_on_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let n = rng.random_range(1..=8);
        let tree = random_tree(&mut rng, n, case % 2 == 0);
        let angles = random_angles(&tree.model, &mut rng);
        let (base, base_m) = random_base(&mut rng);
        let poses = forward_kinematics(&tree.model, &angles, &base).unwrap();
        let oracle = oracle_poses("l0", &tree.joints, &angle_map(&angles), base_m);
        assert_eq!(poses.len(), oracle.len());
        for (link, m) in &oracle {
            let got = poses.get(link).unwrap();
            let d = max_diff(&got.to_homogeneous(), m);
            assert!(d <= 1e-9, "case {case} link {link}: {d:e}");
            assert!((got.rotation().quaternion().norm() - 1.0).abs() <= 1e-9);
        }
        assert_eq!(poses.get("l0"), Some(&base));
    }
}

#[test]
fn quarter_turn_maps_x_to_y() {
    let tree = {
        use softhand::model::{HandModel, Joint, Link};
        HandModel::from_parts(
            "q",
            vec![Link::new("a"), Link::new("b")],
            vec![Joint::revolute("j", "a", "b", RigidTransform::identity(), Vector3::z(), [-2.0, 2.0])],
            Vec::new(),
        )
        .unwrap()
    };
    let angles: JointAngles = [("j", std::f64::consts::FRAC_PI_2)].into_iter().collect();
    let poses = forward_kinematics(&tree, &angles, &RigidTransform::identity()).unwrap();
    let p = poses.get("b").unwrap().transform_point(&Vector3::x());
    assert!((p - Vector3::y()).amax() < 1e-15);
}

#[test]
fn missing_angle_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tree = random_tree(&mut rng, 8, true);
    let first = tree.model.revolute_joints().next().expect("some revolute joint").name.clone();
    let mut angles = random_angles(&tree.model, &mut rng);
    angles = angles.iter().filter(|(k, _)| *k != first).map(|(k, v)| (k.to_string(), v)).collect();
    let err = forward_kinematics(&tree.model, &angles, &RigidTransform::identity()).unwrap_err();
    assert!(matches!(err, KinematicsError::MissingAngle(ref j) if *j == first), "{err}");
}

#[test]
fn off_path_joints_do_not_move_a_subtree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let tree = random_tree(&mut rng, 8, false);
        let angles = random_angles(&tree.model, &mut rng);
        let before = forward_kinematics(&tree.model, &angles, &RigidTransform::identity()).unwrap();
        let target = tree.model.links()[rng.random_range(0..tree.model.links().len())].name.clone();
        let path: Vec<String> = tree
            .model
            .joint_path(tree.model.link_index(&target).unwrap())
            .into_iter()
            .map(|j| tree.model.joints()[j].name.clone())
            .collect();
        let mut moved = angles.clone();
        for (name, v) in angles.iter() {
            if !path.iter().any(|p| p == name) {
                moved.set(name, v + 0.7);
            }
        }
        let after = forward_kinematics(&tree.model, &moved, &RigidTransform::identity()).unwrap();
        assert_eq!(before.get(&target), after.get(&target));
    }
}

#[test]
fn point_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let h = 1e-6;
    for _ in 0..100 {
        let tree = random_tree(&mut rng, 6, false);
        let angles = random_angles(&tree.model, &mut rng);
        let (base, _) = random_base(&mut rng);
        let link = tree.model.links().last().unwrap().name.clone();
        let local = Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
        let jac = point_jacobian(&tree.model, &angles, &base, &link, &local).unwrap();
        let world = |a: &JointAngles| {
            forward_kinematics(&tree.model, a, &base).unwrap().get(&link).unwrap().transform_point(&local)
        };
        for joint in tree.model.revolute_joints() {
            let v = angles.get(&joint.name).unwrap();
            let (mut plus, mut minus) = (angles.clone(), angles.clone());
            plus.set(&joint.name, v + h);
            minus.set(&joint.name, v - h);
            let fd = (world(&plus) - world(&minus)) / (2.0 * h);
            let col = jac.column(&joint.name).unwrap_or_else(Vector3::zeros);
            let rel = (col - fd).amax() / fd.amax().max(1e-8);
            assert!(rel <= 1e-5 || (col - fd).amax() <= 1e-10, "{}: {col} vs {fd}", joint.name);
        }
    }
}

#[test]
fn patch_points_follow_their_owner() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tree = random_tree(&mut rng, 5, true);
    let angles = random_angles(&tree.model, &mut rng);
    let (base, base_m) = random_base(&mut rng);
    let pts = vec![Vector3::new(0.01, 0.0, 0.0), Vector3::new(0.0, -0.02, 0.03)];
    let patch = ContactPatch::new("p", PatchOwner::Link("l5".into()), pts.clone(), None, "").unwrap();
    let poses = forward_kinematics(&tree.model, &angles, &base).unwrap();
    let world = patch_world_points(&poses, &patch).unwrap();
    let oracle = oracle_poses("l0", &tree.joints, &angle_map(&angles), base_m)["l5"];
    for (w, p) in world.iter().zip(&pts) {
        let expect = oracle * p.push(1.0);
        assert!((w - expect.xyz()).amax() <= 1e-12);
    }
    let shifted = poses.clone().with_object_pose(RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0)));
    let object = ContactPatch::new("o", PatchOwner::Object, pts.clone(), None, "").unwrap();
    let moved = patch_world_points(&shifted, &object).unwrap();
    assert_eq!(moved[0], pts[0] + Vector3::new(1.0, 2.0, 3.0));
    assert!(patch_world_points(&poses, &object).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fk_is_equivariant_under_base_motion(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, n, false);
        let angles = random_angles(&tree.model, &mut rng);
        let (base, _) = random_base(&mut rng);
        let (t, _) = random_base(&mut rng);
        let a = forward_kinematics(&tree.model, &angles, &t.compose(&base)).unwrap();
        let b = forward_kinematics(&tree.model, &angles, &base).unwrap();
        for (link, pose) in b.iter() {
            let expect = t.compose(pose);
            prop_assert!(a.get(link).unwrap().approx_eq(&expect, 1e-9));
        }
    }

    #[test]
    fn zero_angles_compose_origins(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, 6, true);
        let zeros = JointAngles::zeros(&tree.model);
        let poses = forward_kinematics(&tree.model, &zeros, &RigidTransform::identity()).unwrap();
        let zero_map: BTreeMap<String, f64> = angle_map(&zeros);
        let oracle = oracle_poses("l0", &tree.joints, &zero_map, Matrix4::identity());
        for (link, m) in oracle {
            prop_assert!(max_diff(&poses.get(&link).unwrap().to_homogeneous(), &m) <= 1e-12);
        }
    }
}
