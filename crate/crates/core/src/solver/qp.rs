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
//! Dense convex QP with linear equalities and box bounds.
//!
//! ```text
//! minimize    ½ dᵀ H d + cᵀ d
//! subject to  A d = b,   lower ≤ d ≤ upper
//! ```
//!
//! Dual active-set method in the style of Goldfarb and Idnani: start from the
//! equality-constrained minimizer and repeatedly add the most violated bound,
//! dropping active bounds whose multipliers would turn negative. Every step
//! re-solves the KKT system of the current active set, which is cheap at the
//! sizes a hand model produces (a few dozen variables).

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum QpFailure {
    /// The constraints admit no point.
    Infeasible,
    /// A KKT system could not be solved or the active set kept cycling.
    Numerical,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub d: DVector<f64>,
    pub eq_multipliers: DVector<f64>,
    /// Positive for an active lower bound, negative for an active upper bound.
    #[cfg_attr(not(test), allow(dead_code))]
    pub bound_multipliers: DVector<f64>,
    /// Per coordinate: `Some(true)` lower bound active, `Some(false)` upper.
    pub active_bounds: Vec<Option<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Con {
    Eq(usize),
    Lower(usize),
    Upper(usize),
}

struct Reduced<'a> {
    h: DMatrix<f64>,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    lower: &'a [f64],
    upper: &'a [f64],
}

impl Reduced<'_> {
    fn normal(&self, con: Con) -> DVector<f64> {
        match con {
            Con::Eq(i) => self.a.row(i).transpose(),
            Con::Lower(k) => {
                let mut n = DVector::zeros(self.h.nrows());
                n[k] = 1.0;
                n
            }
            Con::Upper(k) => {
                let mut n = DVector::zeros(self.h.nrows());
                n[k] = -1.0;
                n
            }
        }
    }

    /// Constraint value minus right-hand side; nonnegative when satisfied.
    fn slack(&self, con: Con, d: &DVector<f64>) -> f64 {
        match con {
            Con::Eq(i) => self.a.row(i).dot(&d.transpose()) - self.b[i],
            Con::Lower(k) => d[k] - self.lower[k],
            Con::Upper(k) => self.upper[k] - d[k],
        }
    }

    /// Solves `[H N; Nᵀ 0] [z; w] = [top; bottom]` for the active normals N.
    fn kkt_solve(
        &self,
        active: &[Con],
        top: &DVector<f64>,
        bottom: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = self.h.nrows();
        let q = active.len();
        let mut k = DMatrix::zeros(n + q, n + q);
        k.view_mut((0, 0), (n, n)).copy_from(&self.h);
        for (j, &con) in active.iter().enumerate() {
            let normal = self.normal(con);
            k.view_mut((0, n + j), (n, 1)).copy_from(&normal);
            k.view_mut((n + j, 0), (1, n)).copy_from(&normal.transpose());
        }
        let mut rhs = DVector::zeros(n + q);
        rhs.rows_mut(0, n).copy_from(top);
        rhs.rows_mut(n, q).copy_from(bottom);
        let sol = k.lu().solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((sol.rows(0, n).into_owned(), sol.rows(n, q).into_owned()))
    }
}

pub(crate) fn solve_qp(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<QpSolution, QpFailure> {
    let n = h.nrows();
    if (0..n).any(|i| lower[i] > upper[i]) {
        return Err(QpFailure::Infeasible);
    }
    // coordinates pinned by their bounds are eliminated up front
    let fixed: Vec<bool> = (0..n).map(|i| upper[i] - lower[i] <= 0.0).collect();
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let pinned: Vec<usize> = (0..n).filter(|&i| fixed[i]).collect();
    let mut d_full = DVector::zeros(n);
    for &i in &pinned {
        d_full[i] = lower[i];
    }
    let nf = free.len();
    let h_ff = DMatrix::from_fn(nf, nf, |r, s| h[(free[r], free[s])]);
    let mut c_f = DVector::from_fn(nf, |r, _| c[free[r]]);
    let mut b_r = b.clone();
    for &i in &pinned {
        for r in 0..nf {
            c_f[r] += h[(free[r], i)] * d_full[i];
        }
        for row in 0..a.nrows() {
            b_r[row] -= a[(row, i)] * d_full[i];
        }
    }
    let a_f = DMatrix::from_fn(a.nrows(), nf, |r, s| a[(r, free[s])]);
    let lower_f: Vec<f64> = free.iter().map(|&i| lower[i]).collect();
    let upper_f: Vec<f64> = free.iter().map(|&i| upper[i]).collect();

    if nf == 0 {
        if b_r.amax() > 1e-9 * (1.0 + b.amax()) {
            return Err(QpFailure::Infeasible);
        }
        return Ok(finish(h, c, a, b, d_full, &free, &[], &DVector::zeros(0), lower, upper));
    }

    let qp = Reduced { h: h_ff, c: c_f, a: a_f, b: b_r, lower: &lower_f, upper: &upper_f };
    let (d, active, u) = dual_active_set(&qp)?;
    for (r, &i) in free.iter().enumerate() {
        d_full[i] = d[r];
    }
    Ok(finish(h, c, a, b, d_full, &free, &active, &u, lower, upper))
}

fn dual_active_set(qp: &Reduced) -> Result<(DVector<f64>, Vec<Con>, DVector<f64>), QpFailure> {
    let n = qp.h.nrows();
    let m = qp.a.nrows();
    let mut active: Vec<Con> = (0..m).map(Con::Eq).collect();
    // equality-constrained minimizer: H d + c = N u, Nᵀ d = b
    let (mut d, w) = qp.kkt_solve(&active, &(-&qp.c), &qp.b).ok_or(QpFailure::Numerical)?;
    let mut u: Vec<f64> = (-w).iter().copied().collect();

    let trace = qp.h.trace().abs().max(f64::MIN_POSITIVE);
    let max_iter = 50 * (n + m) + 100;
    let mut iter = 0;
    loop {
        // most violated inactive bound
        let mut worst: Option<(Con, f64)> = None;
        for k in 0..n {
            for con in [Con::Lower(k), Con::Upper(k)] {
                let rhs = match con {
                    Con::Lower(k) => qp.lower[k],
                    Con::Upper(k) => qp.upper[k],
                    Con::Eq(_) => unreachable!(),
                };
                if !rhs.is_finite() || active.contains(&con) {
                    continue;
                }
                let s = qp.slack(con, &d);
                let tol = 1e-12 * (1.0 + rhs.abs());
                if s < -tol && worst.is_none_or(|(_, w)| s < w) {
                    worst = Some((con, s));
                }
            }
        }
        let Some((p, _)) = worst else {
            return Ok((d, active, DVector::from_vec(u)));
        };
        let n_p = qp.normal(p);
        let mut u_p = 0.0;
        loop {
            iter += 1;
            if iter > max_iter {
                return Err(QpFailure::Numerical);
            }
            let (z, w) = qp
                .kkt_solve(&active, &n_p, &DVector::zeros(active.len()))
                .ok_or(QpFailure::Numerical)?;
            let r = -w;
            // largest dual step keeping active bound multipliers nonnegative
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (i, con) in active.iter().enumerate() {
                if matches!(con, Con::Eq(_)) || r[i] >= 0.0 {
                    continue;
                }
                let ratio = u[i] / -r[i];
                if ratio < t1 {
                    t1 = ratio;
                    drop = Some(i);
                }
            }
            let zn = z.dot(&n_p);
            if zn <= 1e-11 * n_p.norm_squared() / trace {
                // n_p is spanned by the active normals: only a dual step is possible
                let Some(k) = drop else {
                    return Err(QpFailure::Infeasible);
                };
                for (ui, ri) in u.iter_mut().zip(r.iter()) {
                    *ui += t1 * ri;
                }
                u_p += t1;
                active.remove(k);
                u.remove(k);
                continue;
            }
            let t2 = -qp.slack(p, &d) / zn;
            let t = t1.min(t2);
            d += t * &z;
            for (ui, ri) in u.iter_mut().zip(r.iter()) {
                *ui += t * ri;
            }
            u_p += t;
            if t2 <= t1 {
                active.push(p);
                u.push(u_p);
                break;
            }
            let k = drop.expect("t1 finite");
            active.remove(k);
            u.remove(k);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    d: DVector<f64>,
    free: &[usize],
    active: &[Con],
    u: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> QpSolution {
    let n = h.nrows();
    let mut eq = DVector::zeros(b.len());
    let mut bound = DVector::zeros(n);
    let mut active_bounds = vec![None; n];
    for (j, con) in active.iter().enumerate() {
        match *con {
            Con::Eq(i) => eq[i] = u[j],
            Con::Lower(k) => {
                bound[free[k]] = u[j];
                active_bounds[free[k]] = Some(true);
            }
            Con::Upper(k) => {
                bound[free[k]] = -u[j];
                active_bounds[free[k]] = Some(false);
            }
        }
    }
    // pinned coordinates: multiplier from stationarity
    let stationarity = h * &d + c - a.transpose() * &eq;
    let free_set: std::collections::BTreeSet<usize> = free.iter().copied().collect();
    for i in (0..n).filter(|i| !free_set.contains(i)) {
        bound[i] = stationarity[i];
        active_bounds[i] = Some(stationarity[i] >= 0.0);
        debug_assert!(lower[i] == upper[i]);
    }
    QpSolution { d, eq_multipliers: eq, bound_multipliers: bound, active_bounds }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inf(n: usize) -> (DVector<f64>, DVector<f64>) {
        (DVector::from_element(n, f64::NEG_INFINITY), DVector::from_element(n, f64::INFINITY))
    }

    #[test]
    fn unconstrained_minimum() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let c = DVector::from_vec(vec![-2.0, -8.0]);
        let (lo, hi) = inf(2);
        let s = solve_qp(&h, &c, &DMatrix::zeros(0, 2), &DVector::zeros(0), &lo, &hi).unwrap();
        assert!((s.d - DVector::from_vec(vec![1.0, 2.0])).amax() < 1e-14);
    }

    #[test]
    fn equality_and_active_bound() {
        // min (x-1)² + (y-2)², x - y = 0, x ≤ 1.2
        let h = DMatrix::identity(2, 2) * 2.0;
        let c = DVector::from_vec(vec![-2.0, -4.0]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![0.0]);
        let (lo, mut hi) = inf(2);
        let s = solve_qp(&h, &c, &a, &b, &lo, &hi).unwrap();
        assert!((s.d - DVector::from_vec(vec![1.5, 1.5])).amax() < 1e-14);
        hi[0] = 1.2;
        let s = solve_qp(&h, &c, &a, &b, &lo, &hi).unwrap();
        assert!((&s.d - DVector::from_vec(vec![1.2, 1.2])).amax() < 1e-14);
        assert_eq!(s.active_bounds[0], Some(false));
        // stationarity: H d + c = Aᵀ λ + ν
        let st = &h * &s.d + &c - a.transpose() * &s.eq_multipliers - &s.bound_multipliers;
        assert!(st.amax() < 1e-12);
        assert!(s.bound_multipliers[0] < 0.0);
    }

    #[test]
    fn drops_bounds_that_stop_binding() {
        // min ½|d - (3, -3)|², d ≥ 0 on both coordinates plus d0 + d1 = 1
        let h = DMatrix::identity(2, 2);
        let c = DVector::from_vec(vec![-3.0, 3.0]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0]);
        let lo = DVector::zeros(2);
        let hi = DVector::from_element(2, f64::INFINITY);
        let s = solve_qp(&h, &c, &a, &b, &lo, &hi).unwrap();
        assert!((s.d - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-14);
    }

    #[test]
    fn detects_infeasibility() {
        let h = DMatrix::identity(2, 2);
        let c = DVector::zeros(2);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![5.0]);
        let lo = DVector::zeros(2);
        let hi = DVector::from_element(2, 1.0);
        assert_eq!(solve_qp(&h, &c, &a, &b, &lo, &hi).unwrap_err(), QpFailure::Infeasible);
    }

    #[test]
    fn pinned_coordinates_are_eliminated() {
        let h = DMatrix::identity(3, 3);
        let c = DVector::from_vec(vec![-1.0, -1.0, -1.0]);
        let a = DMatrix::from_row_slice(1, 3, &[1.0, -1.0, 0.0]);
        let b = DVector::zeros(1);
        let lo = DVector::from_vec(vec![0.25, f64::NEG_INFINITY, f64::NEG_INFINITY]);
        let hi = DVector::from_vec(vec![0.25, f64::INFINITY, f64::INFINITY]);
        let s = solve_qp(&h, &c, &a, &b, &lo, &hi).unwrap();
        assert!((s.d - DVector::from_vec(vec![0.25, 0.25, 1.0])).amax() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        // brute-force check against projected-gradient iterations on random
        // box QPs (no equalities): the KKT conditions must hold
        proptest! {
            #[test]
            fn box_qp_satisfies_kkt(
                diag in prop::collection::vec(0.1..5.0f64, 4),
                off in prop::collection::vec(-0.5..0.5f64, 4),
                c in prop::collection::vec(-3.0..3.0f64, 4),
                width in prop::collection::vec(0.1..2.0f64, 4),
            ) {
                let l = DMatrix::from_fn(4, 4, |i, j| if i == j { diag[i] } else if i > j { off[i] * off[j] } else { 0.0 });
                let h = &l * l.transpose() + DMatrix::identity(4, 4) * 0.05;
                let c = DVector::from_vec(c);
                let lo = DVector::from_iterator(4, width.iter().map(|w| -w));
                let hi = DVector::from_vec(width.clone());
                let s = solve_qp(&h, &c, &DMatrix::zeros(0, 4), &DVector::zeros(0), &lo, &hi).unwrap();
                let g = &h * &s.d + &c;
                for i in 0..4 {
                    prop_assert!(s.d[i] >= lo[i] - 1e-12 && s.d[i] <= hi[i] + 1e-12);
                    let at_lo = (s.d[i] - lo[i]).abs() < 1e-10;
                    let at_hi = (s.d[i] - hi[i]).abs() < 1e-10;
                    if !at_lo && !at_hi {
                        prop_assert!(g[i].abs() < 1e-9, "free coordinate {} gradient {}", i, g[i]);
                    } else if at_lo {
                        prop_assert!(g[i] >= -1e-9);
                    } else {
                        prop_assert!(g[i] <= 1e-9);
                    }
                }
            }
        }
    }
}
