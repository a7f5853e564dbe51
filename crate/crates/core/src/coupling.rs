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
//! Tendon coupling between joints.
//!
//! Contracting a tendon flexes every joint of a finger in proportion, so the
//! dependent joint angles follow the independent ones linearly:
//!
//! ```text
//! M θ_I − θ_D = 0
//! ```
//!
//! `M` is sparse with one block per finger. [`fit_coupling`] recovers the
//! per-finger weights from recorded flexion trajectories with a
//! zero-intercept least-squares fit.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::JointAngles;
use crate::model::HandModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("expected {expected} independent angles, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no angle for coupled joint {0}")]
    MissingAngle(String),
    #[error("finger {0} has fewer than two samples")]
    InsufficientData(String),
    #[error("finger {0} has zero proximal flexion in every sample")]
    DegenerateData(String),
    #[error("invalid coupling model: {0}")]
    Invalid(String),
    #[error("coupling does not match the model: {0}")]
    ModelMismatch(String),
    #[error("trajectory CSV row {row}: {message}")]
    Csv { row: usize, message: String },
}

impl CouplingError {
    pub fn kind(&self) -> &'static str {
        match self {
            CouplingError::DimensionMismatch { .. } => "DimensionMismatch",
            CouplingError::MissingAngle(_) => "MissingAngle",
            CouplingError::InsufficientData(_) => "InsufficientData",
            CouplingError::DegenerateData(_) => "DegenerateData",
            CouplingError::Invalid(_) => "InvalidCoupling",
            CouplingError::ModelMismatch(_) => "ModelMismatch",
            CouplingError::Csv { .. } => "CsvSchema",
        }
    }
}

/// Partition of the revolute joints into independent controls and dependent
/// joints, with the sparse weight matrix stored as `(row, col, value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoupling", into = "RawCoupling")]
pub struct CouplingModel {
    independent: Vec<String>,
    dependent: Vec<String>,
    triplets: Vec<(usize, usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawCoupling {
    independent: Vec<String>,
    dependent: Vec<String>,
    triplets: Vec<(usize, usize, f64)>,
}

impl From<CouplingModel> for RawCoupling {
    fn from(c: CouplingModel) -> Self {
        RawCoupling { independent: c.independent, dependent: c.dependent, triplets: c.triplets }
    }
}

impl TryFrom<RawCoupling> for CouplingModel {
    type Error = CouplingError;

    fn try_from(raw: RawCoupling) -> Result<Self, CouplingError> {
        CouplingModel::new(raw.independent, raw.dependent, raw.triplets)
    }
}

impl CouplingModel {
    pub fn new(
        independent: Vec<String>,
        dependent: Vec<String>,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self, CouplingError> {
        let mut seen = BTreeSet::new();
        for name in independent.iter().chain(&dependent) {
            if !seen.insert(name) {
                return Err(CouplingError::Invalid(format!("joint {name} listed twice")));
            }
        }
        let mut has_entry = vec![false; dependent.len()];
        for &(r, c, v) in &triplets {
            if r >= dependent.len() || c >= independent.len() {
                return Err(CouplingError::Invalid(format!(
                    "entry ({r}, {c}) outside a {}x{} matrix",
                    dependent.len(),
                    independent.len()
                )));
            }
            if !v.is_finite() {
                return Err(CouplingError::Invalid(format!("entry ({r}, {c}) is not finite")));
            }
            has_entry[r] = true;
        }
        if let Some(r) = has_entry.iter().position(|h| !h) {
            return Err(CouplingError::Invalid(format!(
                "dependent joint {} has no weight",
                dependent[r]
            )));
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if triplets.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(CouplingError::Invalid("duplicate matrix entry".into()));
        }
        Ok(Self { independent, dependent, triplets })
    }

    /// Every listed joint independent; no constraint rows.
    pub fn all_independent(joints: Vec<String>) -> Result<Self, CouplingError> {
        Self::new(joints, Vec::new(), Vec::new())
    }

    pub fn independent(&self) -> &[String] {
        &self.independent
    }

    pub fn dependent(&self) -> &[String] {
        &self.dependent
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn rows(&self) -> usize {
        self.dependent.len()
    }

    pub fn cols(&self) -> usize {
        self.independent.len()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.cols());
        for &(r, c, v) in &self.triplets {
            m[(r, c)] = v;
        }
        m
    }

    /// `M θ_I`, computed from the sparse entries.
    pub fn dependent_values(&self, theta_i: &[f64]) -> Result<DVector<f64>, CouplingError> {
        if theta_i.len() != self.cols() {
            return Err(CouplingError::DimensionMismatch {
                expected: self.cols(),
                got: theta_i.len(),
            });
        }
        let mut out = DVector::zeros(self.rows());
        for &(r, c, v) in &self.triplets {
            out[r] += v * theta_i[c];
        }
        Ok(out)
    }

    /// Full joint assignment: independent joints take `theta_i`, dependent
    /// joints take `M θ_I`. No limit clamping.
    pub fn expand_angles(&self, theta_i: &[f64]) -> Result<JointAngles, CouplingError> {
        let dependent = self.dependent_values(theta_i)?;
        Ok(self
            .independent
            .iter()
            .cloned()
            .zip(theta_i.iter().copied())
            .chain(self.dependent.iter().cloned().zip(dependent.iter().copied()))
            .collect())
    }

    /// `M θ_I − θ_D`, ordered like [`CouplingModel::dependent`].
    pub fn constraint_residual(&self, angles: &JointAngles) -> Result<DVector<f64>, CouplingError> {
        let lookup = |name: &String| {
            angles.get(name).ok_or_else(|| CouplingError::MissingAngle(name.clone()))
        };
        let theta_i: Vec<f64> = self.independent.iter().map(lookup).collect::<Result<_, _>>()?;
        let mut r = self.dependent_values(&theta_i)?;
        for (row, name) in self.dependent.iter().enumerate() {
            r[row] -= lookup(name)?;
        }
        Ok(r)
    }

    /// Checks that independent ∪ dependent is exactly the revolute joints of
    /// `model`.
    pub fn validate_against(&self, model: &HandModel) -> Result<(), CouplingError> {
        let revolute: BTreeSet<&str> = model.revolute_joints().map(|j| j.name.as_str()).collect();
        for name in self.independent.iter().chain(&self.dependent) {
            if !revolute.contains(name.as_str()) {
                return Err(CouplingError::ModelMismatch(format!(
                    "{name} is not a revolute joint of the model"
                )));
            }
        }
        let covered = self.independent.len() + self.dependent.len();
        if covered != revolute.len() {
            let listed: BTreeSet<&str> =
                self.independent.iter().chain(&self.dependent).map(String::as_str).collect();
            let missing: Vec<&str> = revolute.difference(&listed).copied().collect();
            return Err(CouplingError::ModelMismatch(format!(
                "joints not covered: {}",
                missing.join(", ")
            )));
        }
        Ok(())
    }

    /// Adds every uncovered revolute joint of `model` as an extra independent
    /// control (no weights). Returns the completed coupling and the joints
    /// that were added.
    pub fn completed_for(&self, model: &HandModel) -> Result<(Self, Vec<String>), CouplingError> {
        let listed: BTreeSet<&str> =
            self.independent.iter().chain(&self.dependent).map(String::as_str).collect();
        let added: Vec<String> = model
            .revolute_joints()
            .filter(|j| !listed.contains(j.name.as_str()))
            .map(|j| j.name.clone())
            .collect();
        let mut independent = self.independent.clone();
        independent.extend(added.iter().cloned());
        let completed = Self::new(independent, self.dependent.clone(), self.triplets.clone())?;
        completed.validate_against(model)?;
        Ok((completed, added))
    }

    /// Constraint rows grouped per finger: rows sharing an independent column
    /// end up together. Groups keep the order of their first row, except that
    /// groups touching a joint named like `*thumb*` go last.
    pub fn finger_row_groups(&self) -> Vec<Vec<usize>> {
        // union-find over rows, joined through shared columns
        let mut parent: Vec<usize> = (0..self.rows()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut col_owner: BTreeMap<usize, usize> = BTreeMap::new();
        for &(r, c, _) in &self.triplets {
            match col_owner.get(&c) {
                Some(&other) => {
                    let (a, b) = (find(&mut parent, r), find(&mut parent, other));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    col_owner.insert(c, r);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for r in 0..self.rows() {
            let root = find(&mut parent, r);
            groups.entry(root).or_default().push(r);
        }
        let is_thumb = |rows: &Vec<usize>| {
            rows.iter().any(|&r| {
                let mentions = |s: &str| s.to_ascii_lowercase().contains("thumb");
                mentions(&self.dependent[r])
                    || self
                        .triplets
                        .iter()
                        .filter(|t| t.0 == r)
                        .any(|t| mentions(&self.independent[t.1]))
            })
        };
        let (thumb, mut rest): (Vec<_>, Vec<_>) = groups.into_values().partition(is_thumb);
        rest.extend(thumb);
        rest
    }
}

/// One recorded sample of a finger's three flexion angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub motion_id: String,
    pub finger: String,
    pub theta1_rad: f64,
    pub theta2_rad: f64,
    pub theta3_rad: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointTrajectoryDataset {
    pub samples: Vec<TrajectorySample>,
    pub source: String,
}

impl JointTrajectoryDataset {
    /// Reads `motion_id,finger,theta1_rad,theta2_rad,theta3_rad` rows. Row
    /// numbers in errors count the header as row 1.
    pub fn from_csv<R: Read>(reader: R, source: impl Into<String>) -> Result<Self, CouplingError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let expected = ["motion_id", "finger", "theta1_rad", "theta2_rad", "theta3_rad"];
        match rdr.headers() {
            Ok(h) if h.is_empty() => {}
            Ok(h) if h.iter().eq(expected) => {}
            Ok(h) => {
                return Err(CouplingError::Csv {
                    row: 1,
                    message: format!("header {:?}, expected {}", h, expected.join(",")),
                })
            }
            Err(e) => return Err(CouplingError::Csv { row: 1, message: e.to_string() }),
        }
        let mut samples = Vec::new();
        for (i, record) in rdr.deserialize::<TrajectorySample>().enumerate() {
            let row = i + 2;
            let sample = record.map_err(|e| CouplingError::Csv { row, message: e.to_string() })?;
            if ![sample.theta1_rad, sample.theta2_rad, sample.theta3_rad].iter().all(|v| v.is_finite())
            {
                return Err(CouplingError::Csv { row, message: "non-finite angle".into() });
            }
            samples.push(sample);
        }
        Ok(Self { samples, source: source.into() })
    }
}

/// How fitted fingers map onto joint names.
///
/// `joint_template` is expanded with `{finger}` and `{k}` (1 = proximal,
/// 2 = intermediate, 3 = distal). The proximal joint is always the
/// independent control; `extra_independent` lists further independent joints
/// (e.g. thumb abduction) that carry no weights.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentChoice {
    pub joint_template: String,
    pub extra_independent: Vec<String>,
}

impl Default for IndependentChoice {
    fn default() -> Self {
        Self { joint_template: "{finger}_j{k}".into(), extra_independent: Vec::new() }
    }
}

impl IndependentChoice {
    pub fn joint_name(&self, finger: &str, k: usize) -> String {
        self.joint_template.replace("{finger}", finger).replace("{k}", &k.to_string())
    }
}

/// Per-finger fit result: weights for the intermediate and distal joints and
/// the RMS residual of each, in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerFit {
    pub finger: String,
    pub samples: usize,
    pub m2: f64,
    pub m3: f64,
    pub rms2: f64,
    pub rms3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFit {
    pub model: CouplingModel,
    pub fingers: Vec<FingerFit>,
}

/// Zero-intercept least squares `m = Σ θ₁ θ_k / Σ θ₁²`, per finger. Fingers
/// are processed in ascending name order; all samples weigh the same.
pub fn fit_coupling(
    dataset: &JointTrajectoryDataset,
    choice: &IndependentChoice,
) -> Result<CouplingFit, CouplingError> {
    let mut by_finger: BTreeMap<&str, Vec<&TrajectorySample>> = BTreeMap::new();
    for s in &dataset.samples {
        by_finger.entry(s.finger.as_str()).or_default().push(s);
    }
    if by_finger.is_empty() {
        return Err(CouplingError::InsufficientData("(no samples)".into()));
    }
    let mut independent = Vec::new();
    let mut dependent = Vec::new();
    let mut triplets = Vec::new();
    let mut fingers = Vec::new();
    for (col, (finger, samples)) in by_finger.iter().enumerate() {
        if samples.len() < 2 {
            return Err(CouplingError::InsufficientData(finger.to_string()));
        }
        let sxx: f64 = samples.iter().map(|s| s.theta1_rad * s.theta1_rad).sum();
        if sxx == 0.0 {
            return Err(CouplingError::DegenerateData(finger.to_string()));
        }
        let slope = |f: fn(&TrajectorySample) -> f64| {
            samples.iter().map(|s| s.theta1_rad * f(s)).sum::<f64>() / sxx
        };
        let m2 = slope(|s| s.theta2_rad);
        let m3 = slope(|s| s.theta3_rad);
        let rms = |m: f64, f: fn(&TrajectorySample) -> f64| {
            (samples.iter().map(|s| (f(s) - m * s.theta1_rad).powi(2)).sum::<f64>()
                / samples.len() as f64)
                .sqrt()
        };
        fingers.push(FingerFit {
            finger: finger.to_string(),
            samples: samples.len(),
            m2,
            m3,
            rms2: rms(m2, |s| s.theta2_rad),
            rms3: rms(m3, |s| s.theta3_rad),
        });
        independent.push(choice.joint_name(finger, 1));
        let row = dependent.len();
        dependent.push(choice.joint_name(finger, 2));
        dependent.push(choice.joint_name(finger, 3));
        triplets.push((row, col, m2));
        triplets.push((row + 1, col, m3));
    }
    independent.extend(choice.extra_independent.iter().cloned());
    let model = CouplingModel::new(independent, dependent, triplets)?;
    Ok(CouplingFit { model, fingers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(finger: &str, t: [f64; 3]) -> TrajectorySample {
        TrajectorySample {
            motion_id: "m0".into(),
            finger: finger.into(),
            theta1_rad: t[0],
            theta2_rad: t[1],
            theta3_rad: t[2],
        }
    }

    fn two_by_one() -> CouplingModel {
        CouplingModel::new(
            vec!["p".into()],
            vec!["i".into(), "d".into()],
            vec![(0, 0, 0.7), (1, 0, 0.5)],
        )
        .unwrap()
    }

    #[test]
    fn expands_by_direct_multiplication() {
        let c = two_by_one();
        let a = c.expand_angles(&[1.0]).unwrap();
        assert_eq!(a.get("i"), Some(0.7));
        assert_eq!(a.get("d"), Some(0.5));
        let z = c.expand_angles(&[0.0]).unwrap();
        assert_eq!(z.get("i"), Some(0.0));
        assert_eq!(z.get("d"), Some(0.0));
        assert_eq!(
            c.expand_angles(&[1.0, 2.0]).unwrap_err(),
            CouplingError::DimensionMismatch { expected: 1, got: 2 }
        );
    }

    #[test]
    fn sparse_expansion_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let independent: Vec<String> = (0..7).map(|i| format!("i{i}")).collect();
        let dependent: Vec<String> = (0..14).map(|i| format!("d{i}")).collect();
        let mut triplets = Vec::new();
        for r in 0..14 {
            triplets.push((r, r % 7, rng.random_range(-1.0..1.0)));
            if r % 3 == 0 {
                triplets.push((r, (r + 3) % 7, rng.random_range(-1.0..1.0)));
            }
        }
        let c = CouplingModel::new(independent, dependent.clone(), triplets).unwrap();
        let theta: Vec<f64> = (0..7).map(|_| rng.random_range(-1.5..1.5)).collect();
        let expanded = c.expand_angles(&theta).unwrap();
        // dense oracle
        let dense = c.dense() * DVector::from_column_slice(&theta);
        for (r, name) in dependent.iter().enumerate() {
            assert!((expanded.get(name).unwrap() - dense[r]).abs() <= 1e-12);
        }
    }

    #[test]
    fn residual_cases() {
        let ident =
            CouplingModel::new(vec!["a".into()], vec!["b".into()], vec![(0, 0, 1.0)]).unwrap();
        let a: JointAngles = [("a", 0.3), ("b", 0.3)].into_iter().collect();
        assert_eq!(ident.constraint_residual(&a).unwrap()[0], 0.0);

        let c = two_by_one();
        let mut angles = c.expand_angles(&[0.9]).unwrap();
        assert!(c.constraint_residual(&angles).unwrap().amax() <= 1e-12);
        angles.set("d", angles.get("d").unwrap() + 0.01);
        let r = c.constraint_residual(&angles).unwrap();
        assert!(r[0].abs() <= 1e-12);
        assert!((r[1] + 0.01).abs() <= 1e-12);
        let partial: JointAngles = [("p", 0.1)].into_iter().collect();
        assert_eq!(
            c.constraint_residual(&partial).unwrap_err(),
            CouplingError::MissingAngle("i".into())
        );
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(CouplingModel::new(vec!["a".into()], vec!["a".into()], vec![(0, 0, 1.0)]).is_err());
        assert!(CouplingModel::new(vec!["a".into()], vec!["b".into()], vec![]).is_err());
        assert!(CouplingModel::new(vec!["a".into()], vec!["b".into()], vec![(0, 1, 1.0)]).is_err());
        assert!(
            CouplingModel::new(vec!["a".into()], vec!["b".into()], vec![(0, 0, f64::NAN)]).is_err()
        );
    }

    #[test]
    fn json_schema() {
        let c = two_by_one();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["triplets"][0], serde_json::json!([0, 0, 0.7]));
        let back: CouplingModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
        let bad = r#"{"independent":["a"],"dependent":["b"],"triplets":[[3,0,1.0]]}"#;
        assert!(serde_json::from_str::<CouplingModel>(bad).is_err());
    }

    #[test]
    fn exact_line_recovers_slope() {
        let data = JointTrajectoryDataset {
            samples: vec![
                sample("index", [0.0, 0.0, 0.0]),
                sample("index", [0.5, 0.4, 0.3]),
                sample("index", [1.0, 0.8, 0.6]),
            ],
            source: "test".into(),
        };
        let fit = fit_coupling(&data, &IndependentChoice::default()).unwrap();
        assert_eq!(fit.fingers[0].m2, 0.8);
        assert!((fit.fingers[0].m3 - 0.6).abs() <= 1e-15);
        assert_eq!(fit.model.independent(), ["index_j1"]);
        assert_eq!(fit.model.dependent(), ["index_j2", "index_j3"]);
    }

    #[test]
    fn degenerate_and_insufficient_data() {
        let zero = JointTrajectoryDataset {
            samples: vec![sample("f", [0.0, 0.1, 0.2]), sample("f", [0.0, 0.3, 0.1])],
            source: String::new(),
        };
        assert_eq!(
            fit_coupling(&zero, &IndependentChoice::default()).unwrap_err(),
            CouplingError::DegenerateData("f".into())
        );
        let single = JointTrajectoryDataset {
            samples: vec![sample("f", [0.5, 0.1, 0.2])],
            source: String::new(),
        };
        assert_eq!(
            fit_coupling(&single, &IndependentChoice::default()).unwrap_err(),
            CouplingError::InsufficientData("f".into())
        );
        let empty = JointTrajectoryDataset::default();
        assert_eq!(
            fit_coupling(&empty, &IndependentChoice::default()).unwrap_err().kind(),
            "InsufficientData"
        );
    }

    #[test]
    fn csv_schema_and_row_numbers() {
        let ok = "motion_id,finger,theta1_rad,theta2_rad,theta3_rad\nm1,index,0.5,0.4,0.3\n";
        let d = JointTrajectoryDataset::from_csv(ok.as_bytes(), "x").unwrap();
        assert_eq!(d.samples.len(), 1);
        let bad_header = "motion,finger,a,b,c\n";
        assert_eq!(
            JointTrajectoryDataset::from_csv(bad_header.as_bytes(), "x").unwrap_err().kind(),
            "CsvSchema"
        );
        let bad_row = "motion_id,finger,theta1_rad,theta2_rad,theta3_rad\nm1,index,0.5,0.4,0.3\nm1,index,abc,0.4,0.3\n";
        assert!(matches!(
            JointTrajectoryDataset::from_csv(bad_row.as_bytes(), "x"),
            Err(CouplingError::Csv { row: 3, .. })
        ));
        let empty = JointTrajectoryDataset::from_csv("".as_bytes(), "x").unwrap();
        assert!(empty.samples.is_empty());
    }

    #[test]
    fn finger_groups_put_thumb_last() {
        let c = CouplingModel::new(
            vec!["thumb_j1".into(), "index_j1".into()],
            vec!["thumb_j2".into(), "thumb_j3".into(), "index_j2".into(), "index_j3".into()],
            vec![(0, 0, 0.5), (1, 0, 0.5), (2, 1, 0.8), (3, 1, 0.6)],
        )
        .unwrap();
        assert_eq!(c.finger_row_groups(), vec![vec![2, 3], vec![0, 1]]);
    }

    #[test]
    fn synthetic_noise_recovery_is_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = rand_distr::Normal::new(0.0, 0.01).unwrap();
        let mut samples = Vec::new();
        for _ in 0..200 {
            let t1: f64 = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
            samples.push(sample(
                "index",
                [t1, 0.8 * t1 + rng.sample(noise), 0.6 * t1 + rng.sample(noise)],
            ));
        }
        let data = JointTrajectoryDataset { samples, source: String::new() };
        let fit = fit_coupling(&data, &IndependentChoice::default()).unwrap();
        // independent oracle: normal equation evaluated directly
        let (num, den) = data.samples.iter().fold((0.0, 0.0), |(n, d), s| {
            (n + s.theta1_rad * s.theta2_rad, d + s.theta1_rad.powi(2))
        });
        assert!((fit.fingers[0].m2 - num / den).abs() < 1e-12);
        assert!((fit.fingers[0].m2 - 0.8).abs() < 0.02);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn expand_then_residual_vanishes(
                theta in prop::collection::vec(-2.0..2.0f64, 3),
                weights in prop::collection::vec(-1.5..1.5f64, 6),
            ) {
                let triplets = (0..6).map(|r| (r, r % 3, weights[r])).collect();
                let c = CouplingModel::new(
                    (0..3).map(|i| format!("i{i}")).collect(),
                    (0..6).map(|i| format!("d{i}")).collect(),
                    triplets,
                ).unwrap();
                let angles = c.expand_angles(&theta).unwrap();
                prop_assert!(c.constraint_residual(&angles).unwrap().amax() <= 1e-12);
            }

            #[test]
            fn fit_is_scale_equivariant(
                pts in prop::collection::vec((0.05..1.5f64, -1.0..1.0f64, -1.0..1.0f64), 2..30),
                scale in 0.01..100.0f64,
            ) {
                let mk = |c: f64| JointTrajectoryDataset {
                    samples: pts.iter().map(|&(a, b, d)| sample("f", [c * a, c * b, c * d])).collect(),
                    source: String::new(),
                };
                let base = fit_coupling(&mk(1.0), &IndependentChoice::default()).unwrap();
                let scaled = fit_coupling(&mk(scale), &IndependentChoice::default()).unwrap();
                prop_assert!((base.fingers[0].m2 - scaled.fingers[0].m2).abs() <= 1e-12);
                prop_assert!((base.fingers[0].m3 - scaled.fingers[0].m3).abs() <= 1e-12);
            }

            #[test]
            fn noiseless_fit_is_exact(
                m2 in -1.0..1.5f64,
                m3 in -1.0..1.5f64,
                t1 in prop::collection::vec(0.01..1.5f64, 2..50),
            ) {
                let data = JointTrajectoryDataset {
                    samples: t1.iter().map(|&t| sample("f", [t, m2 * t, m3 * t])).collect(),
                    source: String::new(),
                };
                let fit = fit_coupling(&data, &IndependentChoice::default()).unwrap();
                prop_assert!((fit.fingers[0].m2 - m2).abs() <= 1e-12);
                prop_assert!((fit.fingers[0].m3 - m3).abs() <= 1e-12);
            }

            #[test]
            fn partition_covers_each_joint_once(fingers in prop::collection::btree_set("[a-e]{1,3}", 1..6)) {
                let samples = fingers.iter().flat_map(|f| {
                    [sample(f, [0.2, 0.1, 0.05]), sample(f, [0.4, 0.2, 0.1])]
                }).collect();
                let fit = fit_coupling(
                    &JointTrajectoryDataset { samples, source: String::new() },
                    &IndependentChoice::default(),
                ).unwrap();
                let all: Vec<&String> = fit.model.independent().iter().chain(fit.model.dependent()).collect();
                let unique: BTreeSet<&&String> = all.iter().collect();
                prop_assert_eq!(all.len(), unique.len());
                prop_assert_eq!(all.len(), fingers.len() * 3);
            }
        }
    }
}
