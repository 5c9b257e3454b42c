//! Beamformer designs: the MVDR/SMI baseline, the two distributionally
//! robust cone designs (Euclidean and quadratic transport costs), diagonal
//! loading for covariance uncertainty, their joint combination, and the
//! chance-constraint radius calibration.
//!
//! All designs minimize `w^T R w` (optionally diagonally loaded) over the
//! lifted real weights subject to a robustified distortionless-response
//! constraint, and expose the dual multiplier of the distributional
//! constraint alongside the raw solver report.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chi2::{chi2_quantile, Chi2Error};
use crate::cone::{
    kkt_residuals, mvdr_closed_form, solve_cone, ConeError, ConeProblem, SolveReport, SolveStatus,
    DEFAULT_TOL, MIN_EIG_FLOOR,
};
use crate::lift::{LiftedMatrix, LiftedVector, C64};
use crate::scenario::SteeringSampleSet;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error(
        "radius {radius} is not strictly below the feasibility bound {bound}; \
         the distortionless constraint admits no weights (requires {requirement})"
    )]
    InfeasibleRadius {
        radius: f64,
        bound: f64,
        requirement: String,
    },
    #[error("radius must be {expected}, got {got}")]
    InvalidRadius { expected: &'static str, got: f64 },
    #[error("steering mean must be nonzero")]
    ZeroSteeringMean,
    #[error("weight vector must be nonzero")]
    ZeroWeights,
    #[error("matrix is not symmetric positive definite (min eigenvalue {0:.3e})")]
    NotSpd(f64),
    #[error("dimension mismatch: covariance is {cov}x{cov}, steering has {steering} entries")]
    DimensionMismatch { cov: usize, steering: usize },
    #[error("solver returned status {0:?}")]
    SolverFailure(SolveStatus),
    #[error("certificate is only defined for the distributionally robust designs, got {0:?}")]
    UnsupportedMethod(Method),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Chi2(#[from] Chi2Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MvdrSmi,
    WdroNorm,
    WdroMahalanobis,
    DiagLoad,
    WdroJoint,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::MvdrSmi => "mvdr_smi",
            Method::WdroNorm => "wdro_norm",
            Method::WdroMahalanobis => "wdro_mahalanobis",
            Method::DiagLoad => "diag_load",
            Method::WdroJoint => "wdro_joint",
        }
    }
}

/// Ground transport cost on lifted vectors (or flattened matrices).
#[derive(Debug, Clone, PartialEq)]
pub enum TransportCost {
    /// `||x - y||_2`.
    EuclideanNorm,
    /// `(x - y)^T L (x - y) / 2` with symmetric positive definite `L`.
    Mahalanobis(DMatrix<f64>),
    /// `||X - Y||_F` on matrices flattened column-major.
    Frobenius,
}

/// Transport-distance ball of the given radius around a nominal
/// distribution; the order is fixed at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinBall {
    pub radius: f64,
    pub cost: TransportCost,
}

impl WassersteinBall {
    pub fn new(radius: f64, cost: TransportCost) -> Result<Self, DesignError> {
        if !(radius >= 0.0) {
            return Err(DesignError::InvalidRadius {
                expected: "nonnegative",
                got: radius,
            });
        }
        if let TransportCost::Mahalanobis(l) = &cost {
            validate_spd(l)?;
        }
        Ok(Self { radius, cost })
    }
}

/// A solved beamformer: method tag, parameters, lifted and complex weights,
/// the dual multiplier of the distributional constraint, and the raw solver
/// report.
#[derive(Debug, Clone)]
pub struct BeamformerDesign {
    pub method: Method,
    pub weights_lifted: LiftedVector,
    pub weights_complex: DVector<C64>,
    /// Dual multiplier of the distributional constraint. For the robust
    /// designs this is the certificate variable recovered from the active
    /// constraint; for MVDR it is the equality-constraint multiplier and for
    /// diagonal loading the squared-norm dual of the covariance ball.
    pub multiplier: f64,
    pub report: SolveReport,
    pub epsilon: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    /// Quadratic-cost weighting, kept so the certificate can be re-derived.
    pub lambda_mat: Option<DMatrix<f64>>,
}

impl BeamformerDesign {
    pub fn objective(&self) -> f64 {
        self.report.objective
    }

    /// `w_r^T a_r`, the achieved response toward the steering mean.
    pub fn response(&self, a_bar: &LiftedVector) -> f64 {
        self.weights_lifted.dot(a_bar)
    }
}

fn validate_spd(m: &DMatrix<f64>) -> Result<f64, DesignError> {
    if m.nrows() != m.ncols() {
        return Err(DesignError::DimensionMismatch {
            cov: m.nrows(),
            steering: m.ncols(),
        });
    }
    let min_eig = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min_eig > MIN_EIG_FLOOR) {
        return Err(DesignError::NotSpd(min_eig));
    }
    Ok(min_eig)
}

/// Applies the `+1e-12 I` loading when the smallest eigenvalue sits below
/// the floor, mirroring the solver policy. Returns the possibly loaded
/// matrix and whether loading happened.
fn regularize(r: &LiftedMatrix) -> (LiftedMatrix, bool) {
    if r.min_eigenvalue() < MIN_EIG_FLOOR {
        (r.loaded(MIN_EIG_FLOOR), true)
    } else {
        (r.clone(), false)
    }
}

fn check_dims(r: &LiftedMatrix, a: &LiftedVector) -> Result<(), DesignError> {
    if r.dim() != a.dim() {
        return Err(DesignError::DimensionMismatch {
            cov: r.dim(),
            steering: a.dim(),
        });
    }
    Ok(())
}

/// Shared closed-form path for the equality-constrained designs; builds a
/// report against the cone problem with `A = 0`.
fn equality_design(
    r: &LiftedMatrix,
    a_bar: &LiftedVector,
    method: Method,
) -> Result<BeamformerDesign, DesignError> {
    check_dims(r, a_bar)?;
    if a_bar.norm() == 0.0 {
        return Err(DesignError::ZeroSteeringMean);
    }
    let (r_solve, regularized) = regularize(r);
    let weights = mvdr_closed_form(&r_solve, a_bar)?;
    let objective = r_solve.quad_form(&weights);
    let cone_multiplier = 2.0 * objective;
    let n = r.dim();
    let problem = ConeProblem::new(
        r_solve.data().clone(),
        DMatrix::zeros(n, n),
        a_bar.data().clone(),
        1.0,
    )?;
    let kkt = kkt_residuals(&problem, weights.data(), cone_multiplier)?;
    let status = if kkt.max() <= DEFAULT_TOL {
        SolveStatus::Optimal
    } else {
        SolveStatus::NumericalFailure
    };
    if status != SolveStatus::Optimal {
        return Err(DesignError::SolverFailure(status));
    }
    let report = SolveReport {
        x_opt: weights.data().clone(),
        objective,
        multiplier: cone_multiplier,
        status,
        kkt,
        iterations: 1,
        regularized,
    };
    let multiplier = match method {
        Method::DiagLoad => weights.norm() * weights.norm(),
        Method::WdroNorm | Method::WdroJoint => weights.norm(),
        _ => cone_multiplier,
    };
    Ok(BeamformerDesign {
        method,
        weights_complex: weights.to_complex(),
        weights_lifted: weights,
        multiplier,
        report,
        epsilon: None,
        rho: None,
        beta: None,
        lambda_mat: None,
    })
}

/// Sample-matrix-inversion MVDR: `w = R^{-1} a / (a^T R^{-1} a)`.
pub fn design_mvdr_smi(
    r: &LiftedMatrix,
    a_bar: &LiftedVector,
) -> Result<BeamformerDesign, DesignError> {
    equality_design(r, a_bar, Method::MvdrSmi)
}

/// Diagonal loading: MVDR on `R + rho I`, the closed-form solution of the
/// covariance-uncertainty robustification of the output power.
pub fn design_diag_load(
    r: &LiftedMatrix,
    a_bar: &LiftedVector,
    rho: f64,
) -> Result<BeamformerDesign, DesignError> {
    if !(rho >= 0.0) {
        return Err(DesignError::InvalidRadius {
            expected: "nonnegative",
            got: rho,
        });
    }
    let mut design = equality_design(&r.loaded(rho), a_bar, Method::DiagLoad)?;
    design.rho = Some(rho);
    Ok(design)
}

fn solve_robust(
    p: &LiftedMatrix,
    a_mat: DMatrix<f64>,
    a_bar: &LiftedVector,
) -> Result<(LiftedVector, SolveReport), DesignError> {
    let problem = ConeProblem::new(
        p.data().clone(),
        a_mat,
        a_bar.data().clone(),
        1.0,
    )?;
    let report = solve_cone(&problem, DEFAULT_TOL)?;
    if report.status != SolveStatus::Optimal {
        return Err(DesignError::SolverFailure(report.status));
    }
    let weights = LiftedVector::from_vector(report.x_opt.clone()).expect("even dimension");
    Ok((weights, report))
}

/// Euclidean-cost robust design:
/// `min w^T R w  s.t.  eps ||w|| <= w^T a_bar - 1`.
///
/// Feasible exactly when `eps < ||a_bar||`; `eps = 0` reduces to MVDR.
pub fn design_wdro_norm(
    r: &LiftedMatrix,
    samples: &SteeringSampleSet,
    epsilon: f64,
) -> Result<BeamformerDesign, DesignError> {
    if !(epsilon >= 0.0) {
        return Err(DesignError::InvalidRadius {
            expected: "nonnegative",
            got: epsilon,
        });
    }
    let a_bar = samples.mean();
    check_dims(r, a_bar)?;
    let a_norm = a_bar.norm();
    if a_norm == 0.0 {
        return Err(DesignError::ZeroSteeringMean);
    }
    if epsilon == 0.0 {
        let mut design = equality_design(r, a_bar, Method::WdroNorm)?;
        design.epsilon = Some(0.0);
        return Ok(design);
    }
    if epsilon >= a_norm {
        return Err(DesignError::InfeasibleRadius {
            radius: epsilon,
            bound: a_norm,
            requirement: format!("radius < ||steering mean|| = {a_norm}"),
        });
    }
    let n = r.dim();
    let a_mat: DMatrix<f64> = DMatrix::identity(n, n) * epsilon;
    let (weights, report) = solve_robust(r, a_mat, a_bar)?;
    // Dual multiplier of the distributional constraint read off the active
    // cone constraint; equals ||w|| when the solve converged.
    let multiplier = (weights.dot(a_bar) - 1.0) / epsilon;
    Ok(BeamformerDesign {
        method: Method::WdroNorm,
        weights_complex: weights.to_complex(),
        weights_lifted: weights,
        multiplier,
        report,
        epsilon: Some(epsilon),
        rho: None,
        beta: None,
        lambda_mat: None,
    })
}

/// Quadratic-cost robust design:
/// `min w^T R w  s.t.  sqrt(2 eps) ||G^{-1} w|| <= w^T a_bar - 1`,
/// with `G` the SPD square root of `lambda_mat`.
///
/// Feasible exactly when `2 eps < a_bar^T lambda_mat a_bar` (Cauchy-Schwarz
/// analog of the Euclidean feasibility bound).
pub fn design_wdro_mahalanobis(
    r: &LiftedMatrix,
    samples: &SteeringSampleSet,
    epsilon: f64,
    lambda_mat: &DMatrix<f64>,
) -> Result<BeamformerDesign, DesignError> {
    if !(epsilon > 0.0) {
        return Err(DesignError::InvalidRadius {
            expected: "positive",
            got: epsilon,
        });
    }
    let a_bar = samples.mean();
    check_dims(r, a_bar)?;
    if a_bar.norm() == 0.0 {
        return Err(DesignError::ZeroSteeringMean);
    }
    validate_spd(lambda_mat)?;
    if lambda_mat.nrows() != r.dim() {
        return Err(DesignError::DimensionMismatch {
            cov: r.dim(),
            steering: lambda_mat.nrows(),
        });
    }
    let quad = (a_bar.data().transpose() * lambda_mat * a_bar.data())[(0, 0)];
    if 2.0 * epsilon >= quad {
        return Err(DesignError::InfeasibleRadius {
            radius: epsilon,
            bound: 0.5 * quad,
            requirement: format!("2 * radius < a_bar^T L a_bar = {quad}"),
        });
    }
    let gamma_inv = spd_inverse_sqrt(lambda_mat);
    let a_mat = gamma_inv * (2.0 * epsilon).sqrt();
    let (weights, report) = solve_robust(r, a_mat, a_bar)?;
    let multiplier = (weights.dot(a_bar) - 1.0) / (2.0 * epsilon);
    Ok(BeamformerDesign {
        method: Method::WdroMahalanobis,
        weights_complex: weights.to_complex(),
        weights_lifted: weights,
        multiplier,
        report,
        epsilon: Some(epsilon),
        rho: None,
        beta: None,
        lambda_mat: Some(lambda_mat.clone()),
    })
}

/// Joint design: diagonal loading in the objective, Euclidean robust
/// constraint on the steering mean.
pub fn design_wdro_joint(
    r: &LiftedMatrix,
    samples: &SteeringSampleSet,
    epsilon: f64,
    rho: f64,
) -> Result<BeamformerDesign, DesignError> {
    if !(rho >= 0.0) {
        return Err(DesignError::InvalidRadius {
            expected: "nonnegative",
            got: rho,
        });
    }
    let loaded = r.loaded(rho);
    let mut design = design_wdro_norm(&loaded, samples, epsilon)?;
    design.method = Method::WdroJoint;
    design.rho = Some(rho);
    Ok(design)
}

/// Closed-form minimizer of the quadratic-cost dual in the scalar dual
/// variable: `sqrt(w^T L^{-1} w / (2 eps))`.
pub fn lambda_star(
    w: &LiftedVector,
    lambda_mat: &DMatrix<f64>,
    epsilon: f64,
) -> Result<f64, DesignError> {
    if !(epsilon > 0.0) {
        return Err(DesignError::InvalidRadius {
            expected: "positive",
            got: epsilon,
        });
    }
    if w.norm() == 0.0 {
        return Err(DesignError::ZeroWeights);
    }
    validate_spd(lambda_mat)?;
    let chol = lambda_mat
        .clone()
        .cholesky()
        .ok_or(DesignError::NotSpd(f64::NAN))?;
    let solved = chol.solve(w.data());
    let quad = w.data().dot(&solved);
    Ok((quad / (2.0 * epsilon)).sqrt())
}

/// Radius calibration from a coverage level: half the `beta`-quantile of the
/// chi-squared distribution with `2 n_sensors` degrees of freedom.
pub fn epsilon_from_beta(n_sensors: usize, beta: f64) -> Result<f64, DesignError> {
    Ok(0.5 * chi2_quantile(2 * n_sensors, beta)?)
}

/// Certificate of robustness: the dual variable bounding the worst-case
/// expectation increase over the uncertainty ball. `||w||_2` for the
/// Euclidean cost and [`lambda_star`] for the quadratic cost.
pub fn certificate_of_robustness(design: &BeamformerDesign) -> Result<f64, DesignError> {
    match design.method {
        Method::WdroNorm | Method::WdroJoint => Ok(design.weights_lifted.norm()),
        Method::WdroMahalanobis => {
            let lambda_mat = design
                .lambda_mat
                .as_ref()
                .expect("quadratic design carries its weighting");
            let epsilon = design.epsilon.expect("quadratic design carries its radius");
            lambda_star(&design.weights_lifted, lambda_mat, epsilon)
        }
        other => Err(DesignError::UnsupportedMethod(other)),
    }
}

/// SPD inverse square root via symmetric eigendecomposition.
fn spd_inverse_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let col = eig.eigenvectors.column(k);
        let scale = 1.0 / eig.eigenvalues[k].sqrt();
        out += (&col * col.transpose()) * scale;
    }
    out
}

/// Serializable snapshot of a design for the file interfaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignRecord {
    pub method: String,
    pub epsilon: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub status: String,
    pub weights_re: Vec<f64>,
    pub weights_im: Vec<f64>,
    pub multiplier: Option<f64>,
    pub objective: Option<f64>,
    pub certificate: Option<f64>,
    /// Achieved response `w_r^T a_bar` toward the steering mean.
    pub response: Option<f64>,
    pub message: Option<String>,
}

impl DesignRecord {
    /// Record for a successfully solved design.
    pub fn solved(design: &BeamformerDesign, a_bar: &LiftedVector) -> Self {
        let certificate = certificate_of_robustness(design).ok();
        DesignRecord {
            method: design.method.label().to_string(),
            epsilon: design.epsilon,
            rho: design.rho,
            beta: design.beta,
            status: "optimal".to_string(),
            weights_re: design.weights_complex.iter().map(|z| z.re).collect(),
            weights_im: design.weights_complex.iter().map(|z| z.im).collect(),
            multiplier: Some(design.multiplier),
            objective: Some(design.report.objective),
            certificate,
            response: Some(design.response(a_bar)),
            message: None,
        }
    }

    /// Record for a design whose radius failed the feasibility bound.
    pub fn infeasible_radius(method: Method, epsilon: Option<f64>, rho: Option<f64>, beta: Option<f64>, message: String) -> Self {
        DesignRecord {
            method: method.label().to_string(),
            epsilon,
            rho,
            beta,
            status: "infeasible_radius".to_string(),
            weights_re: Vec::new(),
            weights_im: Vec::new(),
            multiplier: None,
            objective: None,
            certificate: None,
            response: None,
            message: Some(message),
        }
    }
}
