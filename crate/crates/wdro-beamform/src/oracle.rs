//! Brute-force verification oracles: explicit worst-case distributions that
//! attain the dual values used by the robust designs, exact discrete
//! 1-Wasserstein distances, expectation-bound checks, and chance-constraint
//! Monte Carlo.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::designs::{
    design_wdro_mahalanobis, epsilon_from_beta, DesignError, TransportCost,
};
use crate::exec::{map_indexed, Parallelism};
use crate::lift::{lift_vector, LiftedMatrix, LiftedVector};
use crate::ot;
use crate::scenario::{steering_vector, ArrayGeometry, SteeringSampleSet};

/// Draws per RNG substream in Monte Carlo loops; partitioning the trial
/// range at block boundaries is what makes results independent of the
/// execution order.
pub const MC_BLOCK: usize = 4096;

const SIMPLEX_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("distribution must contain at least one atom")]
    EmptyDistribution,
    #[error("weights must be nonnegative and sum to one (deviation {0:.3e})")]
    BadWeights(f64),
    #[error("atom dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("weight vector must be nonzero")]
    ZeroWeights,
    #[error("matrix atom is not PSD (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("radius must be {expected}, got {got}")]
    InvalidRadius { expected: &'static str, got: f64 },
    #[error(
        "trial distribution lies outside the ball: distance {distance:.6e} > radius {radius:.6e}"
    )]
    OutsideBall { distance: f64, radius: f64 },
    #[error("Monte Carlo needs at least 10000 trials, got {0}")]
    TooFewTrials(usize),
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// Finitely supported distribution on real vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self, OracleError> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(OracleError::EmptyDistribution);
        }
        let dim = atoms[0].len();
        for a in &atoms {
            if a.len() != dim {
                return Err(OracleError::DimensionMismatch {
                    left: dim,
                    right: a.len(),
                });
            }
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(OracleError::BadWeights(f64::NAN));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(OracleError::BadWeights((total - 1.0).abs()));
        }
        Ok(Self { atoms, weights })
    }

    pub fn uniform(atoms: Vec<DVector<f64>>) -> Result<Self, OracleError> {
        let m = atoms.len();
        if m == 0 {
            return Err(OracleError::EmptyDistribution);
        }
        Self::new(atoms, vec![1.0 / m as f64; m])
    }

    pub fn dirac(atom: DVector<f64>) -> Self {
        Self {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    pub fn from_sample_set(samples: &SteeringSampleSet) -> Self {
        let atoms = samples.samples().iter().map(|s| s.data().clone()).collect();
        Self::uniform(atoms).expect("sample sets are nonempty")
    }

    pub fn atoms(&self) -> &[DVector<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            acc += a * w;
        }
        acc
    }

    /// `E[w^T a]` under the distribution.
    pub fn expectation_linear(&self, w: &DVector<f64>) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, &p)| p * w.dot(a))
            .sum()
    }

    fn is_uniform(&self) -> bool {
        let target = 1.0 / self.len() as f64;
        self.weights.iter().all(|&w| (w - target).abs() <= SIMPLEX_TOL)
    }
}

/// Finitely supported distribution on symmetric PSD matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDistribution {
    atoms: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
}

impl MatrixDistribution {
    pub fn new(atoms: Vec<DMatrix<f64>>, weights: Vec<f64>) -> Result<Self, OracleError> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(OracleError::EmptyDistribution);
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(OracleError::BadWeights(f64::NAN));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(OracleError::BadWeights((total - 1.0).abs()));
        }
        for a in &atoms {
            let min_eig = a
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if min_eig < -PSD_TOL {
                return Err(OracleError::NotPsd(min_eig));
            }
        }
        Ok(Self { atoms, weights })
    }

    pub fn atoms(&self) -> &[DMatrix<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[w^T R w]` under the distribution.
    pub fn expectation_quadratic(&self, w: &DVector<f64>) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(r, &p)| p * (w.transpose() * r * w)[(0, 0)])
            .sum()
    }
}

/// Outcome of one oracle comparison `lhs <= rhs` up to a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub description: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

impl OracleVerdict {
    pub fn check(description: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        OracleVerdict {
            description: description.into(),
            lhs,
            rhs,
            slack,
            passed: slack >= -tolerance,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("verdicts serialize")
    }
}

pub fn all_passed(verdicts: &[OracleVerdict]) -> bool {
    verdicts.iter().all(|v| v.passed)
}

/// Worst-case distribution for the linear objective under the Euclidean
/// transport cost: every atom shifts by `-eps w / ||w||`.
///
/// Returns the shifted distribution and its expected objective
/// `E[-w^T a] = eps ||w|| - w^T a_bar`; the shift's transport cost is
/// exactly `eps`, so the dual value is attained.
pub fn worst_case_shift_norm(
    samples: &SteeringSampleSet,
    w: &LiftedVector,
    epsilon: f64,
) -> Result<(DiscreteDistribution, f64), OracleError> {
    if !(epsilon >= 0.0) {
        return Err(OracleError::InvalidRadius {
            expected: "nonnegative",
            got: epsilon,
        });
    }
    let w_norm = w.norm();
    if w_norm == 0.0 {
        return Err(OracleError::ZeroWeights);
    }
    if samples.mean().dim() != w.dim() {
        return Err(OracleError::DimensionMismatch {
            left: samples.mean().dim(),
            right: w.dim(),
        });
    }
    let shift = w.data() * (-epsilon / w_norm);
    let atoms: Vec<DVector<f64>> = samples
        .samples()
        .iter()
        .map(|a| a.data() + &shift)
        .collect();
    let dist = DiscreteDistribution::uniform(atoms)?;
    let value = -dist.expectation_linear(w.data());
    Ok((dist, value))
}

/// Worst-case distribution under the quadratic transport cost
/// `(x-y)^T L (x-y) / 2`: every atom shifts by `-t L^{-1} w` with
/// `t = sqrt(2 eps / (w^T L^{-1} w))`.
///
/// The per-atom transport cost is exactly `eps` and the expected objective
/// equals `sqrt(2 eps) ||G^{-1} w|| - w^T a_bar`.
pub fn worst_case_shift_mahalanobis(
    samples: &SteeringSampleSet,
    w: &LiftedVector,
    epsilon: f64,
    lambda_mat: &DMatrix<f64>,
) -> Result<(DiscreteDistribution, f64), OracleError> {
    if !(epsilon > 0.0) {
        return Err(OracleError::InvalidRadius {
            expected: "positive",
            got: epsilon,
        });
    }
    if w.norm() == 0.0 {
        return Err(OracleError::ZeroWeights);
    }
    let chol = lambda_mat.clone().cholesky().ok_or(OracleError::NotSpd)?;
    let linv_w = chol.solve(w.data());
    let quad = w.data().dot(&linv_w);
    let t = (2.0 * epsilon / quad).sqrt();
    let shift = &linv_w * (-t);
    let atoms: Vec<DVector<f64>> = samples
        .samples()
        .iter()
        .map(|a| a.data() + &shift)
        .collect();
    let dist = DiscreteDistribution::uniform(atoms)?;
    let value = -dist.expectation_linear(w.data());
    Ok((dist, value))
}

/// Worst-case covariance under the Frobenius cost: the point distribution at
/// `R + rho w w^T / ||w||^2`, whose perturbation has Frobenius norm exactly
/// `rho`; the value is `w^T R w + rho ||w||^2`.
pub fn worst_case_inc_shift(
    r_hat: &LiftedMatrix,
    w: &LiftedVector,
    rho: f64,
) -> Result<(MatrixDistribution, f64), OracleError> {
    if !(rho >= 0.0) {
        return Err(OracleError::InvalidRadius {
            expected: "nonnegative",
            got: rho,
        });
    }
    let w_norm_sq = w.norm() * w.norm();
    if w_norm_sq == 0.0 {
        return Err(OracleError::ZeroWeights);
    }
    let bump = (w.data() * w.data().transpose()) * (rho / w_norm_sq);
    let atom = r_hat.data() + bump;
    let value = r_hat.quad_form(w) + rho * w_norm_sq;
    let dist = MatrixDistribution::new(vec![atom], vec![1.0])?;
    Ok((dist, value))
}

/// Exact 1-Wasserstein distance between discrete distributions: an
/// assignment problem for equal-size uniform supports, a transportation
/// simplex otherwise.
pub fn wasserstein1_discrete(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    cost: &TransportCost,
) -> Result<f64, OracleError> {
    if p.dim() != q.dim() {
        return Err(OracleError::DimensionMismatch {
            left: p.dim(),
            right: q.dim(),
        });
    }
    // Zero-weight atoms carry no mass and would only pad the problem.
    let (p_atoms, p_weights): (Vec<&DVector<f64>>, Vec<f64>) = p
        .atoms()
        .iter()
        .zip(p.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(a, &w)| (a, w))
        .unzip();
    let (q_atoms, q_weights): (Vec<&DVector<f64>>, Vec<f64>) = q
        .atoms()
        .iter()
        .zip(q.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(a, &w)| (a, w))
        .unzip();
    if p_atoms.is_empty() || q_atoms.is_empty() {
        return Err(OracleError::EmptyDistribution);
    }
    let cost_matrix = DMatrix::from_fn(p_atoms.len(), q_atoms.len(), |i, j| {
        ot::pairwise_cost(cost, p_atoms[i], q_atoms[j])
    });
    if p_atoms.len() == q_atoms.len() && p.is_uniform() && q.is_uniform() {
        let (_, total) = ot::min_cost_assignment(&cost_matrix);
        Ok(total / p_atoms.len() as f64)
    } else {
        Ok(ot::transport_simplex(&p_weights, &q_weights, &cost_matrix).cost)
    }
}

/// Checks the Lipschitz expectation bound `E_trial[-w^T a] <= eps ||w|| -
/// w^T a_bar` for a trial distribution inside the Euclidean ball, re-measuring
/// the transport distance first.
pub fn kantorovich_check(
    w: &LiftedVector,
    nominal: &SteeringSampleSet,
    trial: &DiscreteDistribution,
    epsilon: f64,
) -> Result<OracleVerdict, OracleError> {
    if w.norm() == 0.0 {
        return Err(OracleError::ZeroWeights);
    }
    let nominal_dist = DiscreteDistribution::from_sample_set(nominal);
    let distance = wasserstein1_discrete(trial, &nominal_dist, &TransportCost::EuclideanNorm)?;
    if distance > epsilon + 1e-9 {
        return Err(OracleError::OutsideBall {
            distance,
            radius: epsilon,
        });
    }
    let lhs = -trial.expectation_linear(w.data());
    let rhs = epsilon * w.norm() - w.dot(nominal.mean());
    Ok(OracleVerdict::check(
        format!("expectation bound at radius {epsilon:.6e} (measured distance {distance:.6e})"),
        lhs,
        rhs,
        1e-8,
    ))
}

/// Checks the mean-mismatch bound `||a_actual - a_bar|| <= eps` implied by a
/// transport distance of at most `eps` between the underlying distributions.
pub fn mismatch_bound_check(
    a_actual: &LiftedVector,
    samples: &SteeringSampleSet,
    epsilon: f64,
) -> OracleVerdict {
    let lhs = (a_actual.data() - samples.mean().data()).norm();
    OracleVerdict::check(
        format!("mean mismatch within radius {epsilon:.6e}"),
        lhs,
        epsilon,
        1e-10,
    )
}

/// Empirical `P(w^T a >= 1)` under `a ~ Gaussian(mean, cov)` with `trials`
/// draws; reproducible per seed, with one RNG substream per block of
/// [`MC_BLOCK`] draws so any partitioning over blocks gives identical output.
pub fn chance_probability_mc(
    w: &LiftedVector,
    mean: &LiftedVector,
    cov: &DMatrix<f64>,
    trials: usize,
    seed: u64,
) -> Result<f64, OracleError> {
    chance_probability_mc_with(Parallelism::Auto, w, mean, cov, trials, seed)
}

/// [`chance_probability_mc`] with an explicit execution mode.
pub fn chance_probability_mc_with(
    mode: Parallelism,
    w: &LiftedVector,
    mean: &LiftedVector,
    cov: &DMatrix<f64>,
    trials: usize,
    seed: u64,
) -> Result<f64, OracleError> {
    if trials < 10_000 {
        return Err(OracleError::TooFewTrials(trials));
    }
    if cov.nrows() != mean.dim() || cov.ncols() != mean.dim() {
        return Err(OracleError::DimensionMismatch {
            left: cov.nrows(),
            right: mean.dim(),
        });
    }
    let chol = cov.clone().cholesky().ok_or(OracleError::NotSpd)?;
    let factor = chol.l();
    let dim = mean.dim();
    let blocks = trials.div_ceil(MC_BLOCK);
    let hits: Vec<usize> = map_indexed(mode, blocks, |block| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block as u64);
        let lo = block * MC_BLOCK;
        let hi = ((block + 1) * MC_BLOCK).min(trials);
        let mut count = 0usize;
        for _ in lo..hi {
            let g = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let a = mean.data() + &factor * g;
            if w.data().dot(&a) >= 1.0 {
                count += 1;
            }
        }
        count
    });
    Ok(hits.iter().sum::<usize>() as f64 / trials as f64)
}

/// Random distribution inside the Euclidean ball of radius `epsilon` around
/// the empirical distribution: shifts every atom along a random direction
/// with magnitudes scaled so the identity-coupling cost is at most
/// `epsilon`.
pub fn random_in_ball(
    samples: &SteeringSampleSet,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> DiscreteDistribution {
    let dim = samples.mean().dim();
    let m = samples.len();
    let mut shifts: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut magnitudes = Vec::with_capacity(m);
    for _ in 0..m {
        let dir = random_unit(rng, dim);
        let mag: f64 = rng.random_range(0.0..1.0);
        magnitudes.push(mag);
        shifts.push(dir * mag);
    }
    let mean_mag: f64 = magnitudes.iter().sum::<f64>() / m as f64;
    let budget = epsilon * rng.random_range(0.0..1.0);
    let scale = if mean_mag > 0.0 { budget / mean_mag } else { 0.0 };
    let atoms: Vec<DVector<f64>> = samples
        .samples()
        .iter()
        .zip(&shifts)
        .map(|(a, s)| a.data() + s * scale)
        .collect();
    DiscreteDistribution::uniform(atoms).expect("sample sets are nonempty")
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

// ---------------------------------------------------------------------------
// Verification suites
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    Fast,
    Full,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub parallelism: Parallelism,
    /// Multiplies every additive pass tolerance. The harness failure-path
    /// tests shrink it to force verdict failures; leave at 1.0 otherwise.
    pub tolerance_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            parallelism: Parallelism::Auto,
            tolerance_scale: 1.0,
        }
    }
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &g * g.transpose() + DMatrix::identity(n, n) * (0.3 + rng.random_range(0.0..1.0))
}

fn random_sample_set(rng: &mut ChaCha8Rng, dim: usize, m: usize) -> SteeringSampleSet {
    let samples: Vec<LiftedVector> = (0..m)
        .map(|_| {
            LiftedVector::from_vector(DVector::from_fn(dim, |_, _| rng.random_range(-1.5..1.5)))
                .expect("even dim")
        })
        .collect();
    SteeringSampleSet::new(samples).expect("nonempty")
}

fn random_lifted(rng: &mut ChaCha8Rng, dim: usize) -> LiftedVector {
    LiftedVector::from_vector(DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)))
        .expect("even dim")
}

/// Runs the oracle suites and returns one verdict per check.
///
/// `Fast` covers the attainment identities, transport-budget re-measures,
/// dominance probes, expectation-bound spot checks, mean-mismatch trials,
/// and distance metric axioms. `Full` enlarges the dominance probe count and
/// adds the chance-constraint Monte Carlo calibration.
pub fn run_verification(level: VerifyLevel, opts: &VerifyOptions) -> Vec<OracleVerdict> {
    let mut verdicts = Vec::new();
    let ts = opts.tolerance_scale;

    attainment_suite(opts, ts, &mut verdicts);
    transport_budget_suite(opts, ts, &mut verdicts);
    let (instances, probes) = match level {
        VerifyLevel::Fast => (10, 200),
        VerifyLevel::Full => (20, 1000),
    };
    dominance_suite(opts, ts, instances, probes, &mut verdicts);
    expectation_bound_suite(opts, ts, &mut verdicts);
    mismatch_suite(opts, ts, &mut verdicts);
    metric_axiom_suite(opts, ts, &mut verdicts);
    if level == VerifyLevel::Full {
        verdicts.push(chance_calibration_verdict(opts, 100_000));
    }
    verdicts
}

fn attainment_suite(opts: &VerifyOptions, ts: f64, out: &mut Vec<OracleVerdict>) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(1);
    for i in 0..100 {
        let dim = 2 * rng.random_range(1..5);
        let m = rng.random_range(1..8);
        let samples = random_sample_set(&mut rng, dim, m);
        let w = random_lifted(&mut rng, dim);
        if w.norm() < 1e-3 {
            continue;
        }
        let eps = rng.random_range(0.0..2.0);

        let (_, value) = worst_case_shift_norm(&samples, &w, eps).expect("valid inputs");
        let dual = eps * w.norm() - w.dot(samples.mean());
        out.push(OracleVerdict::check(
            format!("norm shift attains dual value #{i}"),
            (value - dual).abs(),
            1e-10 * ts,
            0.0,
        ));

        let lambda = random_spd(&mut rng, dim);
        let eps_q = rng.random_range(0.05..1.5);
        let (_, value) =
            worst_case_shift_mahalanobis(&samples, &w, eps_q, &lambda).expect("valid inputs");
        let chol = lambda.clone().cholesky().unwrap();
        let quad = w.data().dot(&chol.solve(w.data()));
        let dual = (2.0 * eps_q * quad).sqrt() - w.dot(samples.mean());
        out.push(OracleVerdict::check(
            format!("quadratic shift attains dual value #{i}"),
            (value - dual).abs(),
            1e-10 * ts,
            0.0,
        ));

        let r = LiftedMatrix::from_matrix(random_spd(&mut rng, dim)).expect("symmetric");
        let rho = rng.random_range(0.0..2.0);
        let (dist, value) = worst_case_inc_shift(&r, &w, rho).expect("valid inputs");
        let dual = r.quad_form(&w) + rho * w.norm() * w.norm();
        out.push(OracleVerdict::check(
            format!("covariance shift attains dual value #{i}"),
            (value - dual).abs(),
            1e-10 * ts * (1.0 + dual.abs()),
            0.0,
        ));
        // The attained expectation agrees with the reported value.
        let expect = dist.expectation_quadratic(w.data());
        out.push(OracleVerdict::check(
            format!("covariance shift expectation consistent #{i}"),
            (expect - value).abs(),
            1e-10 * ts * (1.0 + value.abs()),
            0.0,
        ));
    }
}

fn transport_budget_suite(opts: &VerifyOptions, ts: f64, out: &mut Vec<OracleVerdict>) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(2);
    for i in 0..20 {
        let dim = 2 * rng.random_range(1..4);
        let m = rng.random_range(1..6);
        let samples = random_sample_set(&mut rng, dim, m);
        let nominal = DiscreteDistribution::from_sample_set(&samples);
        let w = random_lifted(&mut rng, dim);
        if w.norm() < 1e-3 {
            continue;
        }

        let eps = rng.random_range(0.1..2.0);
        let (shifted, _) = worst_case_shift_norm(&samples, &w, eps).expect("valid");
        let measured =
            wasserstein1_discrete(&shifted, &nominal, &TransportCost::EuclideanNorm).expect("ok");
        out.push(OracleVerdict::check(
            format!("norm shift transport budget #{i}"),
            (measured - eps).abs(),
            1e-10 * ts * (1.0 + eps),
            0.0,
        ));

        let lambda = random_spd(&mut rng, dim);
        let eps_q = rng.random_range(0.1..1.0);
        let (shifted, _) =
            worst_case_shift_mahalanobis(&samples, &w, eps_q, &lambda).expect("valid");
        let measured = wasserstein1_discrete(
            &shifted,
            &nominal,
            &TransportCost::Mahalanobis(lambda.clone()),
        )
        .expect("ok");
        out.push(OracleVerdict::check(
            format!("quadratic shift transport budget #{i}"),
            (measured - eps_q).abs(),
            1e-10 * ts * (1.0 + eps_q),
            0.0,
        ));

        let r = LiftedMatrix::from_matrix(random_spd(&mut rng, dim)).expect("symmetric");
        let rho = rng.random_range(0.1..2.0);
        let (dist, _) = worst_case_inc_shift(&r, &w, rho).expect("valid");
        let moved = (dist.atoms()[0].clone() - r.data()).norm();
        out.push(OracleVerdict::check(
            format!("covariance shift Frobenius budget #{i}"),
            (moved - rho).abs(),
            1e-10 * ts * (1.0 + rho),
            0.0,
        ));
        // PSD preservation: the rank-one bump cannot lower the spectrum.
        let shifted_min = dist.atoms()[0]
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .min();
        let base_min = r.min_eigenvalue();
        out.push(OracleVerdict::check(
            format!("covariance shift stays PSD #{i}"),
            base_min,
            shifted_min,
            1e-10 * ts,
        ));
    }
}

fn dominance_suite(
    opts: &VerifyOptions,
    ts: f64,
    instances: usize,
    probes: usize,
    out: &mut Vec<OracleVerdict>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(3);
    let setups: Vec<(SteeringSampleSet, LiftedVector, f64, u64)> = (0..instances)
        .map(|_| {
            let dim = 2 * rng.random_range(1..5);
            let m = rng.random_range(1..9);
            let samples = random_sample_set(&mut rng, dim, m);
            let mut w = random_lifted(&mut rng, dim);
            while w.norm() < 1e-3 {
                w = random_lifted(&mut rng, dim);
            }
            let eps = rng.random_range(0.05..2.0);
            (samples, w, eps, rng.random::<u64>())
        })
        .collect();
    let worst: Vec<f64> = map_indexed(opts.parallelism, setups.len(), |k| {
        let (samples, w, eps, probe_seed) = &setups[k];
        let mut rng = ChaCha8Rng::seed_from_u64(*probe_seed);
        let dual = *eps * w.norm() - w.dot(samples.mean());
        let mut max_violation = f64::NEG_INFINITY;
        for _ in 0..probes {
            let trial = random_in_ball(samples, *eps, &mut rng);
            let value = -trial.expectation_linear(w.data());
            max_violation = max_violation.max(value - dual);
        }
        max_violation
    });
    for (k, &violation) in worst.iter().enumerate() {
        out.push(OracleVerdict::check(
            format!("no in-ball distribution beats the dual value #{k} ({probes} probes)"),
            violation,
            1e-8 * ts,
            0.0,
        ));
    }
}

fn expectation_bound_suite(opts: &VerifyOptions, ts: f64, out: &mut Vec<OracleVerdict>) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(4);
    for i in 0..10 {
        let dim = 2 * rng.random_range(1..4);
        let m = rng.random_range(1..6);
        let samples = random_sample_set(&mut rng, dim, m);
        let mut w = random_lifted(&mut rng, dim);
        while w.norm() < 1e-3 {
            w = random_lifted(&mut rng, dim);
        }
        let eps = rng.random_range(0.1..1.5);

        // The attaining shift must sit on the bound (zero slack).
        let (worst, _) = worst_case_shift_norm(&samples, &w, eps).expect("valid");
        let verdict = kantorovich_check(&w, &samples, &worst, eps).expect("inside ball");
        out.push(OracleVerdict::check(
            format!("bound tight at the attaining distribution #{i}"),
            verdict.slack.abs(),
            1e-10 * ts * (1.0 + eps * w.norm()),
            0.0,
        ));

        // The nominal itself has slack exactly eps ||w||.
        let nominal = DiscreteDistribution::from_sample_set(&samples);
        let verdict = kantorovich_check(&w, &samples, &nominal, eps).expect("inside ball");
        out.push(OracleVerdict::check(
            format!("nominal slack equals radius times norm #{i}"),
            (verdict.slack - eps * w.norm()).abs(),
            1e-10 * ts * (1.0 + eps * w.norm()),
            0.0,
        ));
    }
}

fn mismatch_suite(opts: &VerifyOptions, ts: f64, out: &mut Vec<OracleVerdict>) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(5);
    for i in 0..10 {
        let dim = 2 * rng.random_range(1..4);
        let m = rng.random_range(1..6);
        let samples = random_sample_set(&mut rng, dim, m);
        let eps = rng.random_range(0.1..1.5);

        // Shifting the whole empirical distribution by a vector of norm eps
        // moves the mean by exactly eps: slack 0.
        let dir = random_unit(&mut rng, dim);
        let shifted_mean =
            LiftedVector::from_vector(samples.mean().data() + dir * eps).expect("even dim");
        let verdict = mismatch_bound_check(&shifted_mean, &samples, eps);
        out.push(OracleVerdict::check(
            format!("boundary shift saturates the mean bound #{i}"),
            verdict.slack.abs(),
            1e-10 * ts * (1.0 + eps),
            0.0,
        ));

        // Random in-ball distributions always satisfy the bound.
        let mut all_pass = true;
        for _ in 0..50 {
            let trial = random_in_ball(&samples, eps, &mut rng);
            let mean = LiftedVector::from_vector(trial.mean()).expect("even dim");
            all_pass &= mismatch_bound_check(&mean, &samples, eps).passed;
        }
        out.push(OracleVerdict::check(
            format!("in-ball means stay within the bound #{i} (50 trials)"),
            if all_pass { 0.0 } else { 1.0 },
            0.5,
            0.0,
        ));
    }
}

fn metric_axiom_suite(opts: &VerifyOptions, ts: f64, out: &mut Vec<OracleVerdict>) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(6);
    let euclid = TransportCost::EuclideanNorm;
    for i in 0..25 {
        let dim = 2 * rng.random_range(1..3);
        let mp = rng.random_range(1..5);
        let mq = rng.random_range(1..5);
        let mr = rng.random_range(1..5);
        let p = DiscreteDistribution::from_sample_set(&random_sample_set(&mut rng, dim, mp));
        let q = DiscreteDistribution::from_sample_set(&random_sample_set(&mut rng, dim, mq));
        let r = DiscreteDistribution::from_sample_set(&random_sample_set(&mut rng, dim, mr));

        let d_pp = wasserstein1_discrete(&p, &p, &euclid).expect("ok");
        out.push(OracleVerdict::check(
            format!("zero self-distance #{i}"),
            d_pp,
            1e-12 * ts,
            0.0,
        ));
        let d_pq = wasserstein1_discrete(&p, &q, &euclid).expect("ok");
        let d_qp = wasserstein1_discrete(&q, &p, &euclid).expect("ok");
        out.push(OracleVerdict::check(
            format!("symmetry #{i}"),
            (d_pq - d_qp).abs(),
            1e-9 * ts,
            0.0,
        ));
        let d_qr = wasserstein1_discrete(&q, &r, &euclid).expect("ok");
        let d_pr = wasserstein1_discrete(&p, &r, &euclid).expect("ok");
        out.push(OracleVerdict::check(
            format!("triangle inequality #{i}"),
            d_pr,
            d_pq + d_qr,
            1e-9 * ts,
        ));
    }
}

/// Full-level chance-constraint calibration: Gaussian steering samples,
/// quadratic weighting set to the inverse covariance, radius from the
/// chi-squared quantile at coverage 0.9, and a Monte Carlo check that the
/// response probability clears 0.89.
pub fn chance_calibration_verdict(opts: &VerifyOptions, trials: usize) -> OracleVerdict {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(7);
    let n_sensors = 3;
    let dim = 2 * n_sensors;
    let geometry = ArrayGeometry::half_wavelength(n_sensors).expect("valid geometry");
    let mean = lift_vector(&steering_vector(&geometry, 12.0).expect("valid angle"));

    let cov = random_spd(&mut rng, dim) * 0.004;
    let m_samples = 2000;
    let chol = cov.clone().cholesky().expect("SPD");
    let factor = chol.l();
    let samples: Vec<LiftedVector> = (0..m_samples)
        .map(|_| {
            let g = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            LiftedVector::from_vector(mean.data() + &factor * g).expect("even dim")
        })
        .collect();
    let sample_set = SteeringSampleSet::new(samples).expect("nonempty");

    let lambda = chol.inverse();
    let lambda = (&lambda + lambda.transpose()).scale(0.5);
    let epsilon = epsilon_from_beta(n_sensors, 0.9).expect("valid beta");
    let r_hat = LiftedMatrix::from_matrix(random_spd(&mut rng, dim)).expect("symmetric");
    let design = design_wdro_mahalanobis(&r_hat, &sample_set, epsilon, &lambda)
        .expect("calibrated radius is feasible");

    let probability = chance_probability_mc_with(
        opts.parallelism,
        &design.weights_lifted,
        &mean,
        &cov,
        trials,
        opts.seed ^ 0x9e3779b97f4a7c15,
    )
    .expect("valid Monte Carlo inputs");
    OracleVerdict::check(
        format!("chance-constraint calibration at coverage 0.9 ({trials} draws)"),
        0.89,
        probability,
        0.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn sample_set_from(rows: &[&[f64]]) -> SteeringSampleSet {
        SteeringSampleSet::new(
            rows.iter()
                .map(|r| LiftedVector::from_slice(r).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn norm_shift_single_atom_example() {
        let samples = sample_set_from(&[&[2.0, 0.0]]);
        let w = LiftedVector::from_slice(&[1.0, 0.0]).unwrap();
        let (dist, value) = worst_case_shift_norm(&samples, &w, 1.0).unwrap();
        assert_abs_diff_eq!(dist.atoms()[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dist.atoms()[0][1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(value, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn norm_shift_zero_radius_is_nominal() {
        let samples = sample_set_from(&[&[2.0, 0.0], &[0.0, 2.0]]);
        let w = LiftedVector::from_slice(&[1.0, 1.0]).unwrap();
        let (dist, value) = worst_case_shift_norm(&samples, &w, 0.0).unwrap();
        assert_eq!(dist.atoms()[0], *samples.samples()[0].data());
        assert_abs_diff_eq!(value, -w.dot(samples.mean()), epsilon = 1e-15);
    }

    #[test]
    fn norm_shift_rejects_zero_weights() {
        let samples = sample_set_from(&[&[2.0, 0.0]]);
        let w = LiftedVector::from_slice(&[0.0, 0.0]).unwrap();
        assert!(matches!(
            worst_case_shift_norm(&samples, &w, 1.0),
            Err(OracleError::ZeroWeights)
        ));
    }

    #[test]
    fn mahalanobis_shift_identity_matches_norm_case() {
        let samples = sample_set_from(&[&[2.0, 0.0]]);
        let w = LiftedVector::from_slice(&[1.0, 0.0]).unwrap();
        let id = DMatrix::identity(2, 2);
        let (dist, value) = worst_case_shift_mahalanobis(&samples, &w, 0.5, &id).unwrap();
        assert_abs_diff_eq!(dist.atoms()[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(value, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn mahalanobis_shift_scaled_weighting() {
        // L = 4I, eps = 0.125: ||G^{-1} w|| = 0.5, value = sqrt(2*0.125)*0.5 - 2.
        let samples = sample_set_from(&[&[2.0, 0.0]]);
        let w = LiftedVector::from_slice(&[1.0, 0.0]).unwrap();
        let l = DMatrix::identity(2, 2) * 4.0;
        let (_, value) = worst_case_shift_mahalanobis(&samples, &w, 0.125, &l).unwrap();
        let expected = (2.0_f64 * 0.125).sqrt() * 0.5 - 2.0;
        assert_abs_diff_eq!(value, expected, epsilon = 1e-12);
    }

    #[test]
    fn inc_shift_example() {
        let r = LiftedMatrix::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let w = LiftedVector::from_slice(&[1.0, 0.0]).unwrap();
        let (dist, value) = worst_case_inc_shift(&r, &w, 0.5).unwrap();
        assert_abs_diff_eq!(value, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(dist.atoms()[0][(0, 0)], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(dist.atoms()[0][(1, 1)], 1.0, epsilon = 1e-15);

        let (dist0, value0) = worst_case_inc_shift(&r, &w, 0.0).unwrap();
        assert_eq!(dist0.atoms()[0], *r.data());
        assert_abs_diff_eq!(value0, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn wasserstein_identity_and_single_atoms() {
        let p = DiscreteDistribution::uniform(vec![
            DVector::from_column_slice(&[0.0, 0.0]),
            DVector::from_column_slice(&[1.0, 0.0]),
        ])
        .unwrap();
        assert_abs_diff_eq!(
            wasserstein1_discrete(&p, &p, &TransportCost::EuclideanNorm).unwrap(),
            0.0,
            epsilon = 1e-15
        );

        let d0 = DiscreteDistribution::dirac(DVector::from_column_slice(&[0.0, 0.0]));
        let d1 = DiscreteDistribution::dirac(DVector::from_column_slice(&[3.0, 4.0]));
        assert_abs_diff_eq!(
            wasserstein1_discrete(&d0, &d1, &TransportCost::EuclideanNorm).unwrap(),
            5.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn wasserstein_two_atom_assignment() {
        let p = DiscreteDistribution::uniform(vec![
            DVector::from_column_slice(&[0.0, 0.0]),
            DVector::from_column_slice(&[1.0, 0.0]),
        ])
        .unwrap();
        let q = DiscreteDistribution::uniform(vec![
            DVector::from_column_slice(&[0.0, 1.0]),
            DVector::from_column_slice(&[1.0, 1.0]),
        ])
        .unwrap();
        assert_abs_diff_eq!(
            wasserstein1_discrete(&p, &q, &TransportCost::EuclideanNorm).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn wasserstein_rejects_dimension_mismatch() {
        let p = DiscreteDistribution::dirac(DVector::from_column_slice(&[0.0, 0.0]));
        let q = DiscreteDistribution::dirac(DVector::from_column_slice(&[0.0, 0.0, 0.0]));
        assert!(matches!(
            wasserstein1_discrete(&p, &q, &TransportCost::EuclideanNorm),
            Err(OracleError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kantorovich_check_worst_case_is_tight() {
        let samples = sample_set_from(&[&[2.0, 0.0], &[1.5, 0.5]]);
        let w = LiftedVector::from_slice(&[0.8, -0.3]).unwrap();
        let eps = 0.7;
        let (worst, _) = worst_case_shift_norm(&samples, &w, eps).unwrap();
        let verdict = kantorovich_check(&w, &samples, &worst, eps).unwrap();
        assert!(verdict.passed);
        assert_abs_diff_eq!(verdict.slack, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn kantorovich_check_nominal_slack() {
        let samples = sample_set_from(&[&[2.0, 0.0], &[1.5, 0.5]]);
        let w = LiftedVector::from_slice(&[0.8, -0.3]).unwrap();
        let eps = 0.7;
        let nominal = DiscreteDistribution::from_sample_set(&samples);
        let verdict = kantorovich_check(&w, &samples, &nominal, eps).unwrap();
        assert!(verdict.passed);
        assert_relative_eq!(verdict.slack, eps * w.norm(), max_relative = 1e-12);
    }

    #[test]
    fn kantorovich_check_rejects_outside_ball() {
        let samples = sample_set_from(&[&[2.0, 0.0]]);
        let w = LiftedVector::from_slice(&[1.0, 0.0]).unwrap();
        let far = DiscreteDistribution::dirac(DVector::from_column_slice(&[10.0, 0.0]));
        match kantorovich_check(&w, &samples, &far, 0.5) {
            Err(OracleError::OutsideBall { distance, radius }) => {
                assert_relative_eq!(distance, 8.0, max_relative = 1e-12);
                assert_eq!(radius, 0.5);
            }
            other => panic!("expected OutsideBall, got {other:?}"),
        }
    }

    #[test]
    fn mismatch_bound_examples() {
        let samples = sample_set_from(&[&[2.0, 0.0], &[0.0, 2.0]]);
        let eps = 0.9;
        // P = empirical: slack = eps.
        let verdict = mismatch_bound_check(samples.mean(), &samples, eps);
        assert!(verdict.passed);
        assert_relative_eq!(verdict.slack, eps, max_relative = 1e-12);

        // Mean shifted by a norm-eps vector: slack 0.
        let shifted = LiftedVector::from_vector(
            samples.mean().data() + DVector::from_column_slice(&[eps, 0.0]),
        )
        .unwrap();
        let verdict = mismatch_bound_check(&shifted, &samples, eps);
        assert!(verdict.passed);
        assert_abs_diff_eq!(verdict.slack, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn chance_probability_half_at_mean_boundary() {
        // w^T mean = 1 exactly: the Gaussian is symmetric about its mean, so
        // the probability is 1/2.
        let mean = LiftedVector::from_slice(&[0.5, 0.5]).unwrap();
        let w = LiftedVector::from_slice(&[1.0, 1.0]).unwrap();
        let cov = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.4]);
        let p = chance_probability_mc(&w, &mean, &cov, 100_000, 7).unwrap();
        assert!((p - 0.5).abs() < 0.01, "probability {p}");
    }

    #[test]
    fn chance_probability_saturates_for_large_margin() {
        let mean = LiftedVector::from_slice(&[100.0, 0.0]).unwrap();
        let w = LiftedVector::from_slice(&[1.0, 0.0]).unwrap();
        let cov = DMatrix::identity(2, 2);
        let p = chance_probability_mc(&w, &mean, &cov, 10_000, 7).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn chance_probability_mode_independent() {
        let mean = LiftedVector::from_slice(&[0.6, 0.6]).unwrap();
        let w = LiftedVector::from_slice(&[1.0, 0.2]).unwrap();
        let cov = DMatrix::identity(2, 2) * 0.2;
        let seq =
            chance_probability_mc_with(Parallelism::Sequential, &w, &mean, &cov, 50_000, 11)
                .unwrap();
        let par = chance_probability_mc_with(Parallelism::Auto, &w, &mean, &cov, 50_000, 11)
            .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn chance_probability_rejects_small_runs() {
        let mean = LiftedVector::from_slice(&[0.0, 0.0]).unwrap();
        let w = LiftedVector::from_slice(&[1.0, 0.0]).unwrap();
        let cov = DMatrix::identity(2, 2);
        assert!(matches!(
            chance_probability_mc(&w, &mean, &cov, 100, 7),
            Err(OracleError::TooFewTrials(100))
        ));
    }

    #[test]
    fn random_in_ball_respects_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let samples = sample_set_from(&[&[2.0, 0.0], &[0.0, 2.0], &[1.0, 1.0]]);
        let nominal = DiscreteDistribution::from_sample_set(&samples);
        for _ in 0..50 {
            let eps = rng.random_range(0.05..1.5);
            let trial = random_in_ball(&samples, eps, &mut rng);
            let d =
                wasserstein1_discrete(&trial, &nominal, &TransportCost::EuclideanNorm).unwrap();
            assert!(d <= eps + 1e-9, "distance {d} exceeds budget {eps}");
        }
    }

    #[test]
    fn fast_verification_passes() {
        let verdicts = run_verification(VerifyLevel::Fast, &VerifyOptions::default());
        for v in &verdicts {
            assert!(v.passed, "failed: {}", v.to_json_line());
        }
        assert!(all_passed(&verdicts));
    }

    #[test]
    fn corrupted_tolerances_fail_verification() {
        let opts = VerifyOptions {
            tolerance_scale: 1e-30,
            ..VerifyOptions::default()
        };
        let verdicts = run_verification(VerifyLevel::Fast, &opts);
        assert!(!all_passed(&verdicts));
    }

    #[test]
    fn verdict_json_field_order() {
        let v = OracleVerdict::check("demo", 1.0, 2.0, 0.0);
        let line = v.to_json_line();
        assert!(line.starts_with("{\"description\":\"demo\",\"lhs\":1.0,\"rhs\":2.0,"));
        let parsed: OracleVerdict = serde_json::from_str(&line).unwrap();
        assert_eq!(parsed, v);
    }

    #[test]
    fn distribution_validation() {
        assert!(DiscreteDistribution::uniform(vec![]).is_err());
        let atoms = vec![DVector::from_column_slice(&[1.0, 0.0])];
        assert!(DiscreteDistribution::new(atoms.clone(), vec![0.5]).is_err());
        assert!(DiscreteDistribution::new(atoms, vec![1.0]).is_ok());
        let neg = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            MatrixDistribution::new(vec![neg], vec![1.0]),
            Err(OracleError::NotPsd(_))
        ));
    }
}
