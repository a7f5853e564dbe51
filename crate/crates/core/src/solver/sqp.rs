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
//! Sequential quadratic programming for smooth objectives under linear
//! equalities and box bounds.

use super::qp::{solve_qp, QpFailure, QpSolution};
use super::{SolveOptions, SolveStatus, SolverError};
use nalgebra::{DMatrix, DVector};

type Objective<'a> = Box<dyn Fn(&DVector<f64>) -> f64 + 'a>;
type Gradient<'a> = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + 'a>;

/// Smooth problem `min f(x)` subject to `A x = b` and `lower ≤ x ≤ upper`.
pub struct NlpProblem<'a> {
    dimension: usize,
    objective: Objective<'a>,
    gradient: Gradient<'a>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    eq_matrix: DMatrix<f64>,
    eq_rhs: DVector<f64>,
    initial_hessian: Option<DMatrix<f64>>,
}

impl<'a> NlpProblem<'a> {
    /// Unbounded, unconstrained problem.
    pub fn new(
        dimension: usize,
        objective: impl Fn(&DVector<f64>) -> f64 + 'a,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + 'a,
    ) -> Self {
        NlpProblem {
            dimension,
            objective: Box::new(objective),
            gradient: Box::new(gradient),
            lower: DVector::from_element(dimension, f64::NEG_INFINITY),
            upper: DVector::from_element(dimension, f64::INFINITY),
            eq_matrix: DMatrix::zeros(0, dimension),
            eq_rhs: DVector::zeros(0),
            initial_hessian: None,
        }
    }

    /// Starting Hessian approximation, e.g. a Gauss–Newton matrix for
    /// least-squares objectives. It must be symmetric positive semidefinite;
    /// a small ridge is added. Defaults to a scaled identity.
    pub fn with_initial_hessian(mut self, h: DMatrix<f64>) -> Self {
        self.initial_hessian = Some(h);
        self
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.eq_matrix = a;
        self.eq_rhs = b;
        self
    }

    /// Same objective and bounds, no equality rows.
    pub fn without_equalities(mut self) -> Self {
        self.eq_matrix = DMatrix::zeros(0, self.dimension);
        self.eq_rhs = DVector::zeros(0);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn eq_matrix(&self) -> &DMatrix<f64> {
        &self.eq_matrix
    }

    pub fn eq_rhs(&self) -> &DVector<f64> {
        &self.eq_rhs
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        (self.objective)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }

    /// `‖A x − b‖∞`.
    pub fn constraint_violation(&self, x: &DVector<f64>) -> f64 {
        if self.eq_matrix.nrows() == 0 {
            return 0.0;
        }
        (&self.eq_matrix * x - &self.eq_rhs).amax()
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n = self.dimension;
        if self.lower.len() != n || self.upper.len() != n {
            return Err(SolverError::DimensionMismatch(format!(
                "bounds have length {}/{} for dimension {n}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        if let Some(h) = &self.initial_hessian {
            if h.nrows() != n || h.ncols() != n || h.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::DimensionMismatch(format!(
                    "initial Hessian is {}x{} for dimension {n}",
                    h.nrows(),
                    h.ncols()
                )));
            }
        }
        if self.eq_matrix.ncols() != n || self.eq_matrix.nrows() != self.eq_rhs.len() {
            return Err(SolverError::DimensionMismatch(format!(
                "equality matrix is {}x{} with {} right-hand sides for dimension {n}",
                self.eq_matrix.nrows(),
                self.eq_matrix.ncols(),
                self.eq_rhs.len()
            )));
        }
        for i in 0..n {
            if self.lower[i].is_nan() || self.upper[i].is_nan() || self.lower[i] > self.upper[i] {
                return Err(SolverError::InvalidBounds { index: i, lower: self.lower[i], upper: self.upper[i] });
            }
        }
        let rank = equality_rank(&self.eq_matrix);
        if rank < self.eq_matrix.nrows() {
            return Err(SolverError::RankDeficientConstraints { rows: self.eq_matrix.nrows(), rank });
        }
        Ok(())
    }
}

fn equality_rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * max).count()
}

/// Result of one SQP run.
#[derive(Debug, Clone)]
pub struct SqpOutcome {
    pub x: DVector<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub constraint_violation: f64,
    /// Projected-gradient KKT residual at `x`.
    pub kkt_residual: f64,
    /// Objective after every accepted iterate, starting with `x0`.
    pub history: Vec<f64>,
}

/// Projected-gradient stationarity measure.
///
/// Coordinates sitting on a bound are removed; the remaining gradient is
/// projected onto the null space of the equality rows restricted to the free
/// coordinates. Multiplier signs at active bounds are not examined here; the
/// QP subproblem keeps them dual feasible.
pub fn kkt_residual(
    x: &DVector<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> f64 {
    let n = x.len();
    let at_bound = |i: usize| {
        (lower[i].is_finite() && x[i] <= lower[i] + 1e-9 * (1.0 + lower[i].abs()))
            || (upper[i].is_finite() && x[i] >= upper[i] - 1e-9 * (1.0 + upper[i].abs()))
    };
    let free: Vec<usize> = (0..n).filter(|&i| !at_bound(i)).collect();
    if free.is_empty() {
        return 0.0;
    }
    let g_f = DVector::from_fn(free.len(), |r, _| g[free[r]]);
    if a.nrows() == 0 {
        return g_f.amax();
    }
    let at_f = DMatrix::from_fn(free.len(), a.nrows(), |r, s| a[(s, free[r])]);
    let lambda = at_f
        .clone()
        .svd(true, true)
        .solve(&g_f, 1e-10)
        .unwrap_or_else(|_| DVector::zeros(a.nrows()));
    (&g_f - &at_f * &lambda).amax()
}

fn clamp(x: &mut DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> bool {
    let mut moved = false;
    for i in 0..x.len() {
        let c = x[i].clamp(lower[i], upper[i]);
        if c != x[i] {
            moved = true;
            x[i] = c;
        }
    }
    moved
}

fn regularized_qp(
    b_mat: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    r: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Result<QpSolution, QpFailure> {
    match solve_qp(b_mat, g, a, r, lo, hi) {
        Err(QpFailure::Numerical) => {}
        other => return other,
    }
    let scale = b_mat.diagonal().amax().max(1.0);
    let mut tau = 1e-10;
    while tau <= 1e-4 * (1.0 + 1e-9) {
        let h = b_mat + DMatrix::identity(b_mat.nrows(), b_mat.nrows()) * (tau * scale);
        match solve_qp(&h, g, a, r, lo, hi) {
            Err(QpFailure::Numerical) => tau *= 10.0,
            other => return other,
        }
    }
    Err(QpFailure::Numerical)
}

/// Damped BFGS update (Powell) keeping `b` positive definite.
fn bfgs_update(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>, first: bool) {
    let ss = s.norm_squared();
    if ss == 0.0 {
        return;
    }
    let sy = s.dot(y);
    if first && sy > 0.0 {
        let scale = y.norm_squared() / sy;
        *b = DMatrix::identity(s.len(), s.len()) * scale;
    }
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if sbs <= 0.0 || !sbs.is_finite() {
        return;
    }
    let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
    let r = y * theta + &bs * (1.0 - theta);
    let sr = s.dot(&r);
    if sr <= 1e-16 * ss || !sr.is_finite() {
        return;
    }
    *b += &r * r.transpose() / sr - &bs * bs.transpose() / sbs;
    // keep symmetric against rounding drift
    let sym = (&*b + b.transpose()) * 0.5;
    *b = sym;
}

/// Minimizes `problem` from `x0` with an SQP method.
///
/// `x0` outside the bounds is clamped with a warning. Errors are reserved for
/// malformed problems; solver trouble is reported through the status.
pub fn sqp_solve(problem: &NlpProblem, x0: &DVector<f64>, options: &SolveOptions) -> Result<SqpOutcome, SolverError> {
    options.validate()?;
    problem.validate()?;
    if x0.len() != problem.dimension {
        return Err(SolverError::DimensionMismatch(format!(
            "x0 has length {} for dimension {}",
            x0.len(),
            problem.dimension
        )));
    }
    let (lo, hi) = (&problem.lower, &problem.upper);
    let a = &problem.eq_matrix;
    let n = problem.dimension;

    let mut x = x0.clone();
    if clamp(&mut x, lo, hi) {
        log::warn!("initial point outside the bounds; clamped");
    }
    let mut f = problem.objective(&x);
    let mut g = problem.gradient(&x);
    let mut history = vec![f];
    let outcome = |x: DVector<f64>, status, iterations, f: f64, g: &DVector<f64>, history: Vec<f64>| SqpOutcome {
        constraint_violation: problem.constraint_violation(&x),
        kkt_residual: kkt_residual(&x, g, a, lo, hi),
        x,
        status,
        iterations,
        objective: f,
        history,
    };
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Ok(outcome(x, SolveStatus::NumericalFailure, 0, f, &g, history));
    }

    let (mut hess, mut first_update) = match &problem.initial_hessian {
        Some(h) => {
            let scale = (h.trace() / n.max(1) as f64).max(f64::MIN_POSITIVE);
            let sym = (h + h.transpose()) * 0.5;
            (sym + DMatrix::identity(n, n) * (1e-6 * scale), false)
        }
        None => (DMatrix::identity(n, n), true),
    };
    let mut mu = 0.0f64;
    let mut last_change = f64::INFINITY;
    let mut failed_searches = 0;

    for iter in 0..options.max_iterations {
        let residual = &problem.eq_rhs - a * &x;
        let violation = if residual.is_empty() { 0.0 } else { residual.amax() };
        let qp = match regularized_qp(&hess, &g, a, &residual, &(lo - &x), &(hi - &x)) {
            Ok(qp) => qp,
            Err(QpFailure::Infeasible) => {
                return Ok(outcome(x, SolveStatus::Infeasible, iter, f, &g, history));
            }
            Err(QpFailure::Numerical) => {
                return Ok(outcome(x, SolveStatus::NumericalFailure, iter, f, &g, history));
            }
        };
        let d = qp.d.clone();

        let feasible = violation <= options.tol_constraint;
        let kkt_ok = kkt_residual(&x, &g, a, lo, hi) <= options.kkt_tolerance * (1.0 + f.abs());
        let step_small = d.amax() <= options.tol_step * (1.0 + x.amax());
        let change_small = last_change <= options.tol_objective * f.abs().max(f64::MIN_POSITIVE);
        if feasible && kkt_ok && (step_small || change_small) {
            return Ok(outcome(x, SolveStatus::Converged, iter, f, &g, history));
        }

        // l1 merit penalty from the multiplier estimate
        let lam_max = qp.eq_multipliers.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if mu < 1.1 * lam_max {
            mu = 2.0 * lam_max;
        }
        let merit = |f: f64, x: &DVector<f64>| {
            if a.nrows() == 0 {
                f
            } else {
                f + mu * (&problem.eq_rhs - a * x).abs().sum()
            }
        };
        let phi0 = merit(f, &x);
        let slope = g.dot(&d) - mu * residual.abs().sum();

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1e-12 {
            let mut xt = &x + &d * alpha;
            if alpha == 1.0 {
                for (i, side) in qp.active_bounds.iter().enumerate() {
                    match side {
                        Some(true) => xt[i] = lo[i],
                        Some(false) => xt[i] = hi[i],
                        None => {}
                    }
                }
            }
            clamp(&mut xt, lo, hi);
            let ft = problem.objective(&xt);
            if ft.is_finite() && merit(ft, &xt) <= phi0 + 1e-4 * alpha * slope.min(0.0) {
                accepted = Some((xt, ft));
                break;
            }
            alpha *= 0.5;
        }

        let Some((x_new, f_new)) = accepted else {
            if feasible && kkt_ok {
                return Ok(outcome(x, SolveStatus::Converged, iter, f, &g, history));
            }
            failed_searches += 1;
            if failed_searches >= 2 {
                log::debug!("line search failed twice at iteration {iter}");
                return Ok(outcome(x, SolveStatus::NumericalFailure, iter, f, &g, history));
            }
            hess = DMatrix::identity(n, n) * hess.diagonal().amax().max(1.0);
            first_update = false;
            continue;
        };
        failed_searches = 0;
        let g_new = problem.gradient(&x_new);
        if g_new.iter().any(|v| !v.is_finite()) {
            return Ok(outcome(x, SolveStatus::NumericalFailure, iter, f, &g, history));
        }
        let s = &x_new - &x;
        let y = &g_new - &g;
        bfgs_update(&mut hess, &s, &y, first_update);
        first_update = false;
        last_change = (f - f_new).abs();
        x = x_new;
        f = f_new;
        g = g_new;
        history.push(f);
    }

    let violation = problem.constraint_violation(&x);
    let kkt_ok = kkt_residual(&x, &g, a, lo, hi) <= options.kkt_tolerance * (1.0 + f.abs());
    let status = if violation <= options.tol_constraint
        && kkt_ok
        && last_change <= options.tol_objective * f.abs().max(f64::MIN_POSITIVE)
    {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    Ok(outcome(x, status, options.max_iterations, f, &g, history))
}

/// Same as [`sqp_solve`] with the equality rows dropped; bounds are kept.
pub fn unconstrained_stage_solve(
    problem: NlpProblem,
    x0: &DVector<f64>,
    options: &SolveOptions,
) -> Result<SqpOutcome, SolverError> {
    sqp_solve(&problem.without_equalities(), x0, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paraboloid<'a>() -> NlpProblem<'a> {
        NlpProblem::new(
            2,
            |x| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2),
            |x| DVector::from_vec(vec![2.0 * (x[0] - 1.0), 2.0 * (x[1] - 2.0)]),
        )
    }

    #[test]
    fn equality_constrained_paraboloid() {
        let p = paraboloid()
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), DVector::zeros(1));
        let out = sqp_solve(&p, &DVector::zeros(2), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert!((out.x[0] - 1.5).abs() < 1e-8 && (out.x[1] - 1.5).abs() < 1e-8, "{}", out.x);
        assert!((out.objective - 0.5).abs() < 1e-8);
    }

    #[test]
    fn without_equality_reaches_free_minimum() {
        let p = paraboloid()
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), DVector::zeros(1));
        let out = unconstrained_stage_solve(p, &DVector::zeros(2), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn active_lower_bound() {
        let p = NlpProblem::new(1, |x| x[0] * x[0], |x| DVector::from_vec(vec![2.0 * x[0]]))
            .with_bounds(DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0]));
        let out = sqp_solve(&p, &DVector::from_vec(vec![1.7]), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert_eq!(out.x[0], 1.0);
    }

    #[test]
    fn start_outside_bounds_is_clamped() {
        let p = NlpProblem::new(1, |x| x[0] * x[0], |x| DVector::from_vec(vec![2.0 * x[0]]))
            .with_bounds(DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0]));
        let out = sqp_solve(&p, &DVector::from_vec(vec![40.0]), &SolveOptions::default()).unwrap();
        assert_eq!(out.history[0], 4.0);
        assert_eq!(out.x[0], 1.0);
    }

    #[test]
    fn dependent_rows_are_rejected() {
        let p = paraboloid().with_equalities(
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 2.0, -2.0]),
            DVector::zeros(2),
        );
        let err = sqp_solve(&p, &DVector::zeros(2), &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, SolverError::RankDeficientConstraints { rows: 2, rank: 1 }));
    }

    #[test]
    fn incompatible_constraints_report_infeasible() {
        let p = paraboloid()
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_vec(vec![10.0]))
            .with_bounds(DVector::zeros(2), DVector::from_element(2, 1.0));
        let out = sqp_solve(&p, &DVector::zeros(2), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn non_finite_objective_is_a_numerical_failure() {
        let p = NlpProblem::new(1, |_| f64::NAN, |_| DVector::zeros(1));
        let out = sqp_solve(&p, &DVector::zeros(1), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::NumericalFailure);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let rosen = NlpProblem::new(
            2,
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            |x| {
                DVector::from_vec(vec![
                    -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                    200.0 * (x[1] - x[0] * x[0]),
                ])
            },
        );
        let opts = SolveOptions { max_iterations: 3, ..SolveOptions::default() };
        let out = sqp_solve(&rosen, &DVector::from_vec(vec![-1.2, 1.0]), &opts).unwrap();
        assert_eq!(out.status, SolveStatus::MaxIterations);
        assert_eq!(out.iterations, 3);
    }

    #[test]
    fn kkt_residual_projection() {
        let a = DMatrix::zeros(0, 1);
        let lo = DVector::from_vec(vec![0.0]);
        let hi = DVector::from_vec(vec![1.0]);
        // bound-active coordinates are removed
        assert_eq!(kkt_residual(&DVector::from_vec(vec![0.0]), &DVector::from_vec(vec![3.0]), &a, &lo, &hi), 0.0);
        assert_eq!(kkt_residual(&DVector::from_vec(vec![0.5]), &DVector::from_vec(vec![-3.0]), &a, &lo, &hi), 3.0);
        // free gradient along the equality normal is projected away
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let lo = DVector::from_element(2, -1.0);
        let hi = DVector::from_element(2, 1.0);
        let r = kkt_residual(&DVector::zeros(2), &DVector::from_vec(vec![2.0, 2.0]), &a, &lo, &hi);
        assert!(r < 1e-15);
    }
}
