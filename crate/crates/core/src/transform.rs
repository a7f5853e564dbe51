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
//! Rigid transforms in the w-x-y-z quaternion convention plus the few SO(3)
//! helpers the grasp objective needs.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Point3, Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Largest tolerated deviation of a quaternion norm from one before it is
/// renormalized. Kept far below the 1e-9 model invariant so that composing
/// with an exact identity leaves the bits untouched.
const RENORMALIZE_THRESHOLD: f64 = 1e-12;

/// A proper rigid motion: rotation followed by translation.
///
/// `a.compose(&b)` (or `&a * &b`) maps a point through `b` first, then `a`,
/// matching the usual homogeneous-matrix product `A · B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransform", into = "RawTransform")]
pub struct RigidTransform {
    translation: Vector3<f64>,
    rotation: UnitQuaternion<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTransform {
    translation: [f64; 3],
    /// w, x, y, z
    rotation: [f64; 4],
}

impl From<RigidTransform> for RawTransform {
    fn from(t: RigidTransform) -> Self {
        let q = t.rotation.quaternion();
        RawTransform {
            translation: [t.translation.x, t.translation.y, t.translation.z],
            rotation: [q.w, q.i, q.j, q.k],
        }
    }
}

impl TryFrom<RawTransform> for RigidTransform {
    type Error = String;

    fn try_from(raw: RawTransform) -> Result<Self, Self::Error> {
        let [w, x, y, z] = raw.rotation;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(format!("rotation quaternion {:?} cannot be normalized", raw.rotation));
        }
        let t = Vector3::from(raw.translation);
        if t.iter().any(|v| !v.is_finite()) {
            return Err("non-finite translation".to_string());
        }
        Ok(RigidTransform::new(t, unit_from_raw(q)))
    }
}

fn unit_from_raw(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    if (q.norm() - 1.0).abs() <= RENORMALIZE_THRESHOLD {
        UnitQuaternion::new_unchecked(q)
    } else {
        UnitQuaternion::new_normalize(q)
    }
}

fn tidy(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    unit_from_raw(q.into_inner())
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self { translation, rotation: tidy(rotation) }
    }

    pub fn identity() -> Self {
        Self { translation: Vector3::zeros(), rotation: UnitQuaternion::identity() }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self { translation, rotation: UnitQuaternion::identity() }
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), rotation)
    }

    /// Pure rotation of `angle` radians about `axis` (normalized here).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        Self::from_rotation(UnitQuaternion::from_axis_angle(&Unit::new_normalize(*axis), angle))
    }

    /// URDF `<origin xyz rpy>` convention: fixed-axis roll about x, then pitch
    /// about y, then yaw about z.
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            Vector3::from(xyz),
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
        )
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    /// Roll, pitch, yaw such that `from_xyz_rpy(t, rpy)` reproduces this rotation.
    pub fn rpy(&self) -> [f64; 3] {
        let (r, p, y) = self.rotation.euler_angles();
        [r, p, y]
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            translation: self.translation + self.rotation * other.translation,
            rotation: tidy(self.rotation * other.rotation),
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform { translation: -(inv * self.translation), rotation: inv }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn to_isometry(&self) -> nalgebra::Isometry3<f64> {
        nalgebra::Isometry3::from_parts(self.translation.into(), self.rotation)
    }

    pub fn transform_point3(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.transform_point(&p.coords))
    }

    /// Translation distance and rotation angle both within `tol`. Quaternion
    /// sign is irrelevant.
    pub fn approx_eq(&self, other: &RigidTransform, tol: f64) -> bool {
        (self.translation - other.translation).amax() <= tol
            && rotation_distance(&self.rotation, &other.rotation) <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&RigidTransform::identity(), tol)
    }
}

impl Mul<&RigidTransform> for &RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: &RigidTransform) -> RigidTransform {
        self.compose(rhs)
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

/// Angle of the relative rotation, accurate near zero (unlike `acos` of the
/// scalar part).
pub fn rotation_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let rel = a.inverse() * b;
    let q = rel.quaternion();
    2.0 * q.imag().norm().atan2(q.w.abs())
}

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Exponential map from a rotation vector to a unit quaternion.
pub fn exp_so3(r: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*r)
}

/// Left Jacobian of SO(3): `exp(r + δ) ≈ exp(J_l(r) δ) · exp(r)`.
pub fn left_jacobian_so3(r: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = r.norm_squared();
    let k = skew(r);
    let k2 = k * k;
    if theta2 < 1e-10 {
        // series to second order; the dropped terms are O(θ³)
        Matrix3::identity() + 0.5 * k + k2 / 6.0
    } else {
        let theta = theta2.sqrt();
        Matrix3::identity()
            + (1.0 - theta.cos()) / theta2 * k
            + (theta - theta.sin()) / (theta2 * theta) * k2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn quarter_turn_about_z() {
        let t = RigidTransform::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        let p = t.transform_point(&Vector3::x());
        assert!((p - Vector3::y()).amax() < 1e-15);
    }

    #[test]
    fn compose_matches_homogeneous_product() {
        let a = RigidTransform::from_xyz_rpy([0.1, -0.2, 0.3], [0.3, -0.7, 1.1]);
        let b = RigidTransform::from_xyz_rpy([-0.5, 0.05, 0.2], [-1.2, 0.4, 2.9]);
        let lhs = a.compose(&b).to_homogeneous();
        let rhs = a.to_homogeneous() * b.to_homogeneous();
        assert!((lhs - rhs).amax() < 1e-14);
    }

    #[test]
    fn identity_composition_is_bit_exact() {
        let a = RigidTransform::from_xyz_rpy([0.1, -0.2, 0.3], [0.3, -0.7, 1.1]);
        assert_eq!(RigidTransform::identity().compose(&a), a);
    }

    #[test]
    fn rotation_distance_resolves_tiny_angles() {
        let a = UnitQuaternion::from_euler_angles(0.2, 0.1, -0.3);
        let b = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 1e-11) * a;
        let d = rotation_distance(&a, &b);
        assert!((d - 1e-11).abs() < 1e-15, "{d}");
    }

    #[test]
    fn rpy_round_trip() {
        let rpy = [0.4, -1.1, 2.5];
        let t = RigidTransform::from_xyz_rpy([0.0; 3], rpy);
        let back = RigidTransform::from_xyz_rpy([0.0; 3], t.rpy());
        assert!(t.approx_eq(&back, 1e-12));
    }

    #[test]
    fn json_uses_wxyz_order() {
        let t = RigidTransform::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        let json = serde_json::to_value(t).unwrap();
        let rot = json["rotation"].as_array().unwrap();
        assert!((rot[0].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((rot[3].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let back: RigidTransform = serde_json::from_value(json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn zero_quaternion_is_rejected() {
        let err = serde_json::from_str::<RigidTransform>(
            r#"{"translation":[0,0,0],"rotation":[0,0,0,0]}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn left_jacobian_matches_finite_difference() {
        let r = Vector3::new(0.3, -0.8, 0.5);
        let v = Vector3::new(0.2, 0.1, -0.4);
        let jl = left_jacobian_so3(&r);
        let base = exp_so3(&r) * v;
        let h = 1e-6;
        for i in 0..3 {
            let mut dr = Vector3::zeros();
            dr[i] = h;
            let fd = (exp_so3(&(r + dr)) * v - exp_so3(&(r - dr)) * v) / (2.0 * h);
            // d/dr (exp(r) v) = -[exp(r) v]x J_l
            let analytic = -skew(&base) * jl.column(i);
            assert!((fd - analytic).amax() < 1e-8, "column {i}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn transform() -> impl Strategy<Value = RigidTransform> {
            (prop::array::uniform3(-1.0..1.0f64), prop::array::uniform3(-3.0..3.0f64))
                .prop_map(|(xyz, rpy)| RigidTransform::from_xyz_rpy(xyz, rpy))
        }

        proptest! {
            #[test]
            fn composition_is_associative(a in transform(), b in transform(), c in transform()) {
                let l = a.compose(&b).compose(&c);
                let r = a.compose(&b.compose(&c));
                prop_assert!(l.approx_eq(&r, 1e-12));
            }

            #[test]
            fn composition_stays_unit(a in transform(), b in transform()) {
                let mut t = a;
                for _ in 0..1000 {
                    t = t.compose(&b);
                }
                prop_assert!((t.rotation().quaternion().norm() - 1.0).abs() < 1e-9);
            }

            #[test]
            fn inverse_cancels(a in transform()) {
                prop_assert!(a.compose(&a.inverse()).is_identity(1e-12));
            }
        }
    }
}
