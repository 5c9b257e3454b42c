//! Solver for the cone-constrained quadratic program
//! `min x^T P x  s.t.  ||A x||_2 <= b^T x - c`
//! with dual multiplier recovery and KKT diagnostics.
//!
//! For positive definite `P` and `c > 0` the constraint is active at any
//! optimum (a zero multiplier would force `x = 0`, which is infeasible), so
//! the solver parameterizes the stationarity system by a scalar `nu > 0`:
//! `x(nu) = nu s (P + nu A^T A)^{-1} b` and finds the root of
//! `phi(nu) = nu ||A y(nu)|| - 1` by bracketed bisection. When no root
//! exists the optimum lies on the subspace `{A x = 0, b^T x = c}`, which is
//! handled by an equality-constrained quadratic solve.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::lift::{LiftedMatrix, LiftedVector};

/// Default KKT residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Cap on linear-solve evaluations per solve.
pub const MAX_ITERATIONS: usize = 200;
/// Eigenvalue floor below which `P` gets the `+1e-12 I` loading.
pub const MIN_EIG_FLOOR: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("tolerance must lie in (0, 1e-2], got {0}")]
    InvalidTolerance(f64),
    #[error("P must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("P is not symmetric: max deviation {0:.3e}")]
    NotSymmetric(f64),
    #[error("dimension mismatch: P is {n}x{n}, A has {a_cols} columns, b has {b_len} entries")]
    DimensionMismatch { n: usize, a_cols: usize, b_len: usize },
    #[error("matrix is numerically singular (min eigenvalue {0:.3e})")]
    SingularMatrix(f64),
    #[error("steering quadratic form a^T R^{{-1}} a = {0:.3e} is not positive")]
    DegenerateSteering(f64),
    #[error("multiplier must be nonnegative, got {0}")]
    NegativeMultiplier(f64),
}

/// `min x^T P x  s.t.  ||A x||_2 <= b^T x - c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeProblem {
    p: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl ConeProblem {
    pub fn new(
        p: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: f64,
    ) -> Result<Self, ConeError> {
        if p.nrows() != p.ncols() || p.nrows() == 0 {
            return Err(ConeError::NotSquare {
                rows: p.nrows(),
                cols: p.ncols(),
            });
        }
        let n = p.nrows();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                dev = dev.max((p[(i, j)] - p[(j, i)]).abs());
            }
        }
        if dev > SYMMETRY_TOL {
            return Err(ConeError::NotSymmetric(dev));
        }
        if a.ncols() != n || b.len() != n {
            return Err(ConeError::DimensionMismatch {
                n,
                a_cols: a.ncols(),
                b_len: b.len(),
            });
        }
        Ok(Self { p, a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.p * x)[(0, 0)]
    }

    /// `||A x|| - (b^T x - c)`; feasible iff nonpositive.
    pub fn constraint_violation(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x).norm() - (self.b.dot(x) - self.c)
    }

    /// Returns `Some(eps)` when `A` is exactly `eps * I`.
    fn scaled_identity_a(&self) -> Option<f64> {
        let n = self.dim();
        if self.a.nrows() != n {
            return None;
        }
        let eps = self.a[(0, 0)];
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { eps } else { 0.0 };
                if self.a[(i, j)] != expect {
                    return None;
                }
            }
        }
        Some(eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

/// Feasibility, stationarity, and complementarity residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    /// `max(0, ||Ax|| - b^T x + c)`.
    pub primal_feas: f64,
    /// Norm of the Lagrangian gradient, minimized over subgradients of
    /// `||Ax||` when `Ax = 0`.
    pub stationarity: f64,
    /// `|mu (b^T x - c - ||Ax||)|`.
    pub comp_slack: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal_feas.max(self.stationarity).max(self.comp_slack)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x_opt: DVector<f64>,
    pub objective: f64,
    /// Lagrange multiplier of the cone constraint.
    pub multiplier: f64,
    pub status: SolveStatus,
    pub kkt: KktResiduals,
    pub iterations: usize,
    /// True when `P` received the `+1e-12 I` loading.
    pub regularized: bool,
}

fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    m.clone().lu().solve(rhs)
}

/// Residuals of the KKT system at `(x, multiplier)`.
///
/// At `Ax = 0` the subgradient of `||Ax||` is `{A^T g : ||g|| <= 1}`; the
/// stationarity residual minimizes over that set.
pub fn kkt_residuals(
    problem: &ConeProblem,
    x: &DVector<f64>,
    multiplier: f64,
) -> Result<KktResiduals, ConeError> {
    if multiplier < 0.0 {
        return Err(ConeError::NegativeMultiplier(multiplier));
    }
    let ax = &problem.a * x;
    let ax_norm = ax.norm();
    let slack = problem.b.dot(x) - problem.c - ax_norm;
    let primal_feas = (-slack).max(0.0);
    let comp_slack = (multiplier * slack).abs();

    let a_scale = problem.a.norm();
    let grad_objective = (&problem.p * x) * 2.0;
    let stationarity = if ax_norm > 1e-12 * (1.0 + a_scale * x.norm()) {
        let g = &ax / ax_norm;
        (grad_objective + (problem.a.transpose() * g - &problem.b) * multiplier).norm()
    } else {
        let v = grad_objective - &problem.b * multiplier;
        min_residual_over_subgradients(&problem.a, &v, multiplier)
    };
    Ok(KktResiduals {
        primal_feas,
        stationarity,
        comp_slack,
    })
}

/// min over ||g|| <= 1 of ||v + mu A^T g||.
fn min_residual_over_subgradients(a: &DMatrix<f64>, v: &DVector<f64>, mu: f64) -> f64 {
    if mu == 0.0 || a.norm() == 0.0 {
        return v.norm();
    }
    let svd = a.clone().svd(true, true);
    let v_t = svd.v_t.as_ref().expect("v requested");
    let coeffs = v_t * v;
    let sigma_tol = svd.singular_values.max() * 1e-14;
    let fixed_sq = (v.norm_squared() - coeffs.norm_squared()).max(0.0);

    let mut active: Vec<(f64, f64)> = Vec::new(); // (mu*sigma_i, c_i)
    let mut dead_sq = 0.0;
    for (i, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma > sigma_tol {
            active.push((mu * sigma, coeffs[i]));
        } else {
            dead_sq += coeffs[i] * coeffs[i];
        }
    }
    if active.is_empty() {
        return v.norm();
    }
    let h_norm_sq = |tau: f64| -> f64 {
        active
            .iter()
            .map(|&(ms, c)| {
                let h = -c * ms / (ms * ms + tau);
                h * h
            })
            .sum()
    };
    let residual_sq = |tau: f64| -> f64 {
        active
            .iter()
            .map(|&(ms, c)| {
                let h = -c * ms / (ms * ms + tau);
                let r = c + ms * h;
                r * r
            })
            .sum::<f64>()
            + fixed_sq
            + dead_sq
    };
    if h_norm_sq(0.0) <= 1.0 {
        return residual_sq(0.0).sqrt();
    }
    // Secular equation ||h(tau)|| = 1, h decreasing in tau.
    let mut hi = 1.0;
    while h_norm_sq(hi) > 1.0 {
        hi *= 4.0;
        if hi > 1e300 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h_norm_sq(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    residual_sq(0.5 * (lo + hi)).sqrt()
}

/// MVDR weights `R^{-1} a / (a^T R^{-1} a)`; requires `R` positive definite.
pub fn mvdr_closed_form(r: &LiftedMatrix, a: &LiftedVector) -> Result<LiftedVector, ConeError> {
    let min_eig = r.min_eigenvalue();
    if !(min_eig > MIN_EIG_FLOOR) {
        return Err(ConeError::SingularMatrix(min_eig));
    }
    let chol = r
        .data()
        .clone()
        .cholesky()
        .ok_or(ConeError::SingularMatrix(min_eig))?;
    let y = chol.solve(a.data());
    let denom = a.data().dot(&y);
    if !(denom > 0.0) {
        return Err(ConeError::DegenerateSteering(denom));
    }
    Ok(LiftedVector::from_vector(y / denom).expect("dimension preserved"))
}

struct Workspace<'a> {
    problem: &'a ConeProblem,
    p_solve: DMatrix<f64>,
    regularized: bool,
    evals: usize,
}

impl<'a> Workspace<'a> {
    fn report(&self, x: DVector<f64>, multiplier: f64, status: SolveStatus, tol: f64) -> SolveReport {
        let kkt = kkt_residuals(self.problem, &x, multiplier).expect("multiplier nonnegative");
        let status = match status {
            SolveStatus::Optimal if kkt.max() > tol => SolveStatus::NumericalFailure,
            other => other,
        };
        SolveReport {
            objective: self.problem.objective(&x),
            x_opt: x,
            multiplier,
            status,
            kkt,
            iterations: self.evals,
        regularized: self.regularized,
        }
    }

    fn non_optimal(&self, status: SolveStatus) -> SolveReport {
        let x = DVector::zeros(self.problem.dim());
        let kkt = kkt_residuals(self.problem, &x, 0.0).expect("zero multiplier");
        SolveReport {
            x_opt: x,
            objective: 0.0,
            multiplier: 0.0,
            status,
            kkt,
            iterations: self.evals,
            regularized: self.regularized,
        }
    }

    /// `phi(nu) = nu ||A y(nu)|| - 1` with `y(nu) = (P + nu A^T A)^{-1} b`.
    fn eval_phi(&mut self, ata: &DMatrix<f64>, nu: f64) -> Option<(f64, DVector<f64>)> {
        self.evals += 1;
        let m = &self.p_solve + ata * nu;
        let y = solve_spd(&m, &self.problem.b)?;
        let phi = nu * (&self.problem.a * &y).norm() - 1.0;
        Some((phi, y))
    }

    /// Minimizes the objective over `{b^T x = c, A x = 0}`, recovering the
    /// cone multiplier from the least-squares dual of the stacked system.
    /// Returns `None` when the subspace is empty.
    fn solve_on_subspace(&mut self) -> Option<(DVector<f64>, f64)> {
        self.evals += 1;
        let n = self.problem.dim();
        let m_rows = self.problem.a.nrows();
        let rows = (1 + m_rows).max(n);
        let mut constraints = DMatrix::zeros(rows, n);
        constraints.row_mut(0).copy_from(&self.problem.b.transpose());
        for i in 0..m_rows {
            constraints.row_mut(1 + i).copy_from(&self.problem.a.row(i));
        }
        let mut rhs = DVector::zeros(rows);
        rhs[0] = self.problem.c;

        let svd = constraints.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        let sigma_tol = sigma_max * 1e-12 + 1e-300;
        let x0 = svd
            .solve(&rhs, sigma_tol)
            .ok()?
            .column(0)
            .clone_owned();
        let residual = (&constraints * &x0 - &rhs).norm();
        if residual > 1e-9 * (1.0 + rhs.norm()) {
            return None;
        }

        let v = svd.v_t.as_ref().expect("v requested").transpose();
        let null_cols: Vec<usize> = (0..n)
            .filter(|&i| svd.singular_values[i] <= sigma_tol)
            .collect();
        let x = if null_cols.is_empty() {
            x0
        } else {
            let z = v.select_columns(&null_cols);
            let h = z.transpose() * &self.p_solve * &z;
            let g = z.transpose() * (&self.p_solve * &x0);
            let t = solve_spd(&h, &(-g))?;
            x0 + z * t
        };

        // Min-norm dual of C^T y = 2 P x; its first entry is the cone multiplier.
        let grad = (self.problem.p() * &x) * 2.0;
        let u = svd.u.as_ref().expect("u requested");
        let coeffs = v.transpose() * &grad;
        let mut z = DVector::zeros(svd.singular_values.len());
        for i in 0..z.len() {
            if svd.singular_values[i] > sigma_tol {
                z[i] = coeffs[i] / svd.singular_values[i];
            }
        }
        let dual = u * z;
        Some((x, dual[0].max(0.0)))
    }
}

/// Solves the cone program to KKT residuals below `tol`.
///
/// Infeasibility is decided analytically when `A = eps I` (feasible iff
/// `eps < ||b||` for `c > 0`) and by bounded-multiplier divergence plus an
/// empty equality subspace otherwise.
pub fn solve_cone(problem: &ConeProblem, tol: f64) -> Result<SolveReport, ConeError> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(ConeError::InvalidTolerance(tol));
    }
    let n = problem.dim();
    let min_eig = min_eigenvalue_sym(&problem.p);
    let regularized = min_eig < MIN_EIG_FLOOR;
    let p_solve = if regularized {
        let mut p = problem.p.clone();
        for i in 0..n {
            p[(i, i)] += MIN_EIG_FLOOR;
        }
        p
    } else {
        problem.p.clone()
    };
    let mut ws = Workspace {
        problem,
        p_solve,
        regularized,
        evals: 0,
    };

    // c <= 0: x = 0 is feasible and globally optimal for PSD P.
    if problem.c <= 0.0 {
        return Ok(ws.report(DVector::zeros(n), 0.0, SolveStatus::Optimal, tol));
    }

    let b_norm = problem.b.norm();
    if b_norm == 0.0 {
        return Ok(ws.non_optimal(SolveStatus::Infeasible));
    }
    if let Some(eps) = problem.scaled_identity_a() {
        if eps > 0.0 && eps >= b_norm {
            return Ok(ws.non_optimal(SolveStatus::Infeasible));
        }
    }

    let a_norm = problem.a.norm();
    if a_norm == 0.0 {
        return match ws.solve_on_subspace() {
            Some((x, mu)) => Ok(ws.report(x, mu, SolveStatus::Optimal, tol)),
            None => Ok(ws.non_optimal(SolveStatus::Infeasible)),
        };
    }

    let ata = problem.a.transpose() * &problem.a;
    let nu_seed = ((ws.p_solve.trace() + 1e-300) / (ata.trace() + 1e-300)).clamp(1e-30, 1e30);

    let Some((phi_seed, _)) = ws.eval_phi(&ata, nu_seed) else {
        return Ok(ws.non_optimal(SolveStatus::NumericalFailure));
    };
    let (mut lo, mut hi);
    if phi_seed >= 0.0 {
        hi = nu_seed;
        lo = nu_seed;
        loop {
            lo /= 4.0;
            match ws.eval_phi(&ata, lo) {
                Some((phi, _)) if phi < 0.0 => break,
                Some(_) => {}
                None => return Ok(ws.non_optimal(SolveStatus::NumericalFailure)),
            }
            if lo < 1e-280 || ws.evals >= MAX_ITERATIONS {
                return Ok(ws.non_optimal(SolveStatus::NumericalFailure));
            }
        }
    } else {
        lo = nu_seed;
        hi = nu_seed;
        loop {
            hi *= 4.0;
            match ws.eval_phi(&ata, hi) {
                Some((phi, _)) if phi > 0.0 => break,
                Some(_) => {}
                None => return Ok(ws.non_optimal(SolveStatus::NumericalFailure)),
            }
            if hi > nu_seed * 1e20 || ws.evals >= MAX_ITERATIONS {
                // Bounded-multiplier divergence: the optimum, if any, lies on
                // the A x = 0 subspace.
                return match ws.solve_on_subspace() {
                    Some((x, mu)) => Ok(ws.report(x, mu, SolveStatus::Optimal, tol)),
                    None => Ok(ws.non_optimal(SolveStatus::Infeasible)),
                };
            }
        }
    }

    let mut nu = (lo * hi).sqrt();
    let mut y_final = None;
    while ws.evals < MAX_ITERATIONS {
        nu = (lo * hi).sqrt();
        match ws.eval_phi(&ata, nu) {
            Some((phi, y)) => {
                if phi < 0.0 {
                    lo = nu;
                } else {
                    hi = nu;
                }
                y_final = Some(y);
            }
            None => return Ok(ws.non_optimal(SolveStatus::NumericalFailure)),
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let Some(y) = y_final else {
        return Ok(ws.non_optimal(SolveStatus::NumericalFailure));
    };
    let denom = nu * problem.b.dot(&y) - 1.0;
    if !(denom > 0.0) {
        return Ok(ws.non_optimal(SolveStatus::NumericalFailure));
    }
    let s = problem.c / denom;
    let x = &y * (nu * s);
    let multiplier = 2.0 * nu * s;
    Ok(ws.report(x, multiplier, SolveStatus::Optimal, tol))
}

fn min_eigenvalue_sym(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
