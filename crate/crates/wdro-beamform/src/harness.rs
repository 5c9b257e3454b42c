//! Batch experiment engine: designs all configured beamformers on simulated
//! scenario data and evaluates their output SINR against the analytically
//! constructed interference-plus-noise covariance, optionally sweeping one
//! experiment variable over a grid.
//!
//! Trials are independent work items with per-trial RNG streams derived from
//! the experiment seed, so sweeps parallelize over trials and aggregate in
//! index order; results do not depend on the execution schedule.

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::designs::{
    design_diag_load, design_mvdr_smi, design_wdro_joint, design_wdro_mahalanobis,
    design_wdro_norm, epsilon_from_beta, BeamformerDesign, DesignError, DesignRecord,
};
use crate::exec::{map_indexed, Parallelism};
use crate::lift::{lift_matrix, lift_vector, LiftError, LiftedMatrix, LiftedVector, C64};
use crate::scenario::{
    generate_snapshots, generate_steering_samples, sample_covariance, sinr, steering_vector,
    ArrayGeometry, PerturbationModel, Scenario, ScenarioError, SourceSpec, SteeringSampleSet,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("experiment needs at least one trial")]
    NoTrials,
    #[error("experiment needs at least one method")]
    NoMethods,
    #[error("sweep grid must be nonempty")]
    EmptyGrid,
    #[error("snapshot count and steering sample count must be at least 1")]
    EmptyCounts,
    #[error("mismatched direction {0} deg leaves the (-90, 90) domain")]
    MismatchOutOfRange(f64),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Lift(#[from] LiftError),
}

/// How a method's steering-uncertainty radius is chosen per trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    Fixed(f64),
    /// Chance-constraint calibration: half the chi-squared quantile at the
    /// given coverage with `2 N` degrees of freedom.
    FromBeta(f64),
    /// The lifted steering difference induced by the experiment's mismatch:
    /// `||a_r(presumed + mismatch) - a_r(presumed)||`.
    MismatchBound,
}

/// Quadratic-cost weighting policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaPolicy {
    Identity,
    /// Inverse of the lifted sample covariance (loaded when near-singular).
    InverseSampleCovariance,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    MvdrSmi,
    WdroNorm { epsilon: EpsilonRule },
    WdroMahalanobis { epsilon: EpsilonRule, lambda: LambdaPolicy },
    DiagLoad { rho: f64 },
    WdroJoint { epsilon: EpsilonRule, rho: f64 },
}

impl MethodSpec {
    pub fn label(&self) -> &'static str {
        match self {
            MethodSpec::MvdrSmi => "mvdr_smi",
            MethodSpec::WdroNorm { .. } => "wdro_norm",
            MethodSpec::WdroMahalanobis { .. } => "wdro_mahalanobis",
            MethodSpec::DiagLoad { .. } => "diag_load",
            MethodSpec::WdroJoint { .. } => "wdro_joint",
        }
    }
}

/// One experiment: scenario, method list, data sizes, trial count, and the
/// steering mismatch applied between the presumed and actual directions.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub scenario: Scenario,
    pub methods: Vec<MethodSpec>,
    pub snapshots: usize,
    pub steering_samples: usize,
    pub trials: usize,
    /// Actual desired direction = presumed + this offset (degrees).
    pub mismatch_deg: f64,
    pub seed: u64,
}

impl ExperimentSetup {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::NoTrials);
        }
        if self.methods.is_empty() {
            return Err(HarnessError::NoMethods);
        }
        if self.snapshots == 0 || self.steering_samples == 0 {
            return Err(HarnessError::EmptyCounts);
        }
        Ok(())
    }

    fn seeded_scenario(&self) -> Scenario {
        let mut s = self.scenario.clone();
        s.seed = self.seed;
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SnrDb,
    Snapshots,
    Epsilon,
    MismatchDeg,
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Snapshots => "snapshots",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::MismatchDeg => "mismatch_deg",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

/// Per-method outcome of one trial.
#[derive(Debug, Clone)]
pub enum TrialOutcome {
    Design { sinr_db: f64, objective: f64 },
    InfeasibleRadius { message: String },
}

#[derive(Debug, Clone)]
pub struct TrialEvaluation {
    pub method: &'static str,
    pub outcome: TrialOutcome,
}

/// One aggregated sweep row per (axis value, method).
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis_value: f64,
    pub method: String,
    pub mean_sinr_db: f64,
    pub std_sinr_db: f64,
    pub mean_objective: f64,
    pub infeasible_count: usize,
}

/// Toolkit default scenario: a 10-element half-wavelength array, desired
/// source at broadside with 10 dB SNR, one interferer at 30 degrees with
/// 30 dB INR, unit noise.
pub fn reference_scenario(seed: u64) -> Scenario {
    Scenario::new(
        ArrayGeometry::half_wavelength(10).expect("valid geometry"),
        SourceSpec::desired(0.0, 10.0).expect("valid source"),
        vec![SourceSpec::interferer(30.0, 1000.0).expect("valid source")],
        1.0,
        PerturbationModel::None,
        seed,
    )
    .expect("valid scenario")
}

/// Analytic interference-plus-noise covariance: interferer steering outer
/// products plus the noise floor. The desired source is excluded.
pub fn true_inc_matrix(scenario: &Scenario) -> Result<DMatrix<C64>, ScenarioError> {
    let n = scenario.geometry.n_sensors();
    let mut r = DMatrix::from_diagonal_element(n, n, Complex::new(scenario.noise_power, 0.0));
    for source in &scenario.interferers {
        let a = steering_vector(&scenario.geometry, source.doa_deg)?;
        r += (&a * a.adjoint()) * Complex::new(source.power, 0.0);
    }
    Ok(r)
}

/// Best achievable output ratio `sigma_s^2 a^H R_in^{-1} a` at the actual
/// steering vector (the classical upper bound every design is compared to).
pub fn optimal_sinr(scenario: &Scenario, actual_doa_deg: f64) -> Result<f64, HarnessError> {
    let r_in = true_inc_matrix(scenario)?;
    let a = steering_vector(&scenario.geometry, actual_doa_deg)?;
    let r_lifted = lift_matrix(&r_in)?;
    let a_lifted = lift_vector(&a);
    let chol = r_lifted
        .data()
        .clone()
        .cholesky()
        .expect("interference covariance is positive definite");
    let quad = a_lifted.data().dot(&chol.solve(a_lifted.data()));
    Ok(scenario.desired.power * quad)
}

/// Lifted steering difference caused by a direction offset; the natural
/// radius choice when robustifying against a known mismatch scale.
pub fn mismatch_bound_epsilon(
    geometry: &ArrayGeometry,
    presumed_doa_deg: f64,
    mismatch_deg: f64,
) -> Result<f64, ScenarioError> {
    let presumed = lift_vector(&steering_vector(geometry, presumed_doa_deg)?);
    let shifted = lift_vector(&steering_vector(geometry, presumed_doa_deg + mismatch_deg)?);
    Ok((shifted.data() - presumed.data()).norm())
}

fn inverse_spd(m: &LiftedMatrix) -> DMatrix<f64> {
    let base = if m.min_eigenvalue() < crate::cone::MIN_EIG_FLOOR {
        m.loaded(crate::cone::MIN_EIG_FLOOR)
    } else {
        m.clone()
    };
    let inv = base
        .data()
        .clone()
        .cholesky()
        .expect("loaded covariance is positive definite")
        .inverse();
    (&inv + inv.transpose()).scale(0.5)
}

fn resolve_epsilon(
    rule: &EpsilonRule,
    scenario: &Scenario,
    mismatch_deg: f64,
) -> Result<(f64, Option<f64>), HarnessError> {
    match *rule {
        EpsilonRule::Fixed(eps) => Ok((eps, None)),
        EpsilonRule::FromBeta(beta) => {
            let eps = epsilon_from_beta(scenario.geometry.n_sensors(), beta)?;
            Ok((eps, Some(beta)))
        }
        EpsilonRule::MismatchBound => {
            let eps =
                mismatch_bound_epsilon(&scenario.geometry, scenario.desired.doa_deg, mismatch_deg)?;
            Ok((eps, None))
        }
    }
}

fn build_design(
    spec: &MethodSpec,
    r: &LiftedMatrix,
    samples: &SteeringSampleSet,
    scenario: &Scenario,
    mismatch_deg: f64,
) -> Result<BeamformerDesign, HarnessError> {
    let design = match spec {
        MethodSpec::MvdrSmi => design_mvdr_smi(r, samples.mean())?,
        MethodSpec::WdroNorm { epsilon } => {
            let (eps, beta) = resolve_epsilon(epsilon, scenario, mismatch_deg)?;
            let mut d = design_wdro_norm(r, samples, eps)?;
            d.beta = beta;
            d
        }
        MethodSpec::WdroMahalanobis { epsilon, lambda } => {
            let (eps, beta) = resolve_epsilon(epsilon, scenario, mismatch_deg)?;
            let lambda_mat = match lambda {
                LambdaPolicy::Identity => DMatrix::identity(r.dim(), r.dim()),
                LambdaPolicy::InverseSampleCovariance => inverse_spd(r),
            };
            let mut d = design_wdro_mahalanobis(r, samples, eps, &lambda_mat)?;
            d.beta = beta;
            d
        }
        MethodSpec::DiagLoad { rho } => design_diag_load(r, samples.mean(), *rho)?,
        MethodSpec::WdroJoint { epsilon, rho } => {
            let (eps, beta) = resolve_epsilon(epsilon, scenario, mismatch_deg)?;
            let mut d = design_wdro_joint(r, samples, eps, *rho)?;
            d.beta = beta;
            d
        }
    };
    Ok(design)
}

struct TrialInputs {
    scenario: Scenario,
    snapshots: usize,
    mismatch_deg: f64,
    methods: Vec<MethodSpec>,
}

fn apply_axis(setup: &ExperimentSetup, sweep: Option<(SweepAxis, f64)>) -> TrialInputs {
    let mut scenario = setup.seeded_scenario();
    let mut snapshots = setup.snapshots;
    let mut mismatch = setup.mismatch_deg;
    let mut methods = setup.methods.clone();
    if let Some((axis, value)) = sweep {
        match axis {
            SweepAxis::SnrDb => {
                scenario.desired.power = scenario.noise_power * 10f64.powf(value / 10.0);
            }
            SweepAxis::Snapshots => {
                snapshots = (value.round() as usize).max(1);
            }
            SweepAxis::MismatchDeg => {
                mismatch = value;
            }
            SweepAxis::Epsilon => {
                for spec in &mut methods {
                    match spec {
                        MethodSpec::WdroNorm { epsilon }
                        | MethodSpec::WdroMahalanobis { epsilon, .. }
                        | MethodSpec::WdroJoint { epsilon, .. } => {
                            *epsilon = EpsilonRule::Fixed(value);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    TrialInputs {
        scenario,
        snapshots,
        mismatch_deg: mismatch,
        methods,
    }
}

/// Runs one trial: simulate snapshots at the actual direction, design every
/// method from the presumed-direction sample set, and score each design's
/// true-covariance SINR.
pub fn evaluate_trial(
    setup: &ExperimentSetup,
    sweep: Option<(SweepAxis, f64)>,
    stream_base: u64,
) -> Result<Vec<TrialEvaluation>, HarnessError> {
    let inputs = apply_axis(setup, sweep);
    let scenario = &inputs.scenario;
    let actual_doa = scenario.desired.doa_deg + inputs.mismatch_deg;
    if !(actual_doa.abs() < 90.0) {
        return Err(HarnessError::MismatchOutOfRange(actual_doa));
    }
    let actual_scenario = scenario.with_desired_doa(actual_doa)?;

    let batch = generate_snapshots(&actual_scenario, inputs.snapshots, stream_base * 2)?;
    let r_hat = lift_matrix(&sample_covariance(&batch))?;
    let samples = generate_steering_samples(scenario, setup.steering_samples, stream_base * 2 + 1)?;

    let a_actual = steering_vector(&scenario.geometry, actual_doa)?;
    let r_in = true_inc_matrix(&actual_scenario)?;
    let sigma_s2 = scenario.desired.power;

    let mut evaluations = Vec::with_capacity(inputs.methods.len());
    for spec in &inputs.methods {
        let outcome = match build_design(spec, &r_hat, &samples, scenario, inputs.mismatch_deg) {
            Ok(design) => {
                let ratio = sinr(&design.weights_complex, &a_actual, sigma_s2, &r_in)?;
                TrialOutcome::Design {
                    sinr_db: 10.0 * ratio.log10(),
                    objective: design.report.objective,
                }
            }
            Err(HarnessError::Design(DesignError::InfeasibleRadius {
                radius,
                bound,
                requirement,
            })) => TrialOutcome::InfeasibleRadius {
                message: format!(
                    "radius {radius} not strictly below bound {bound} ({requirement})"
                ),
            },
            Err(other) => return Err(other),
        };
        evaluations.push(TrialEvaluation {
            method: spec.label(),
            outcome,
        });
    }
    Ok(evaluations)
}

/// Runs the sweep with [`Parallelism::Auto`].
pub fn run_sweep(setup: &ExperimentSetup, sweep: &SweepSpec) -> Result<Vec<SweepRow>, HarnessError> {
    run_sweep_with(Parallelism::Auto, setup, sweep)
}

/// Runs every (grid point, trial) cell, then aggregates per (grid point,
/// method): mean and sample standard deviation of per-trial SINR in dB over
/// feasible designs, mean objective, and the infeasible count. Infeasible
/// trials are excluded from the means.
pub fn run_sweep_with(
    mode: Parallelism,
    setup: &ExperimentSetup,
    sweep: &SweepSpec,
) -> Result<Vec<SweepRow>, HarnessError> {
    setup.validate()?;
    if sweep.grid.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    let trials = setup.trials;
    let cells = sweep.grid.len() * trials;
    let results: Vec<Result<Vec<TrialEvaluation>, HarnessError>> =
        map_indexed(mode, cells, |idx| {
            let axis_idx = idx / trials;
            let trial = idx % trials;
            evaluate_trial(
                setup,
                Some((sweep.axis, sweep.grid[axis_idx])),
                (axis_idx * trials + trial) as u64,
            )
        });
    let mut per_cell = Vec::with_capacity(cells);
    for r in results {
        per_cell.push(r?);
    }

    let mut rows = Vec::with_capacity(sweep.grid.len() * setup.methods.len());
    for (axis_idx, &axis_value) in sweep.grid.iter().enumerate() {
        for (m_idx, spec) in setup.methods.iter().enumerate() {
            let mut sinrs = Vec::with_capacity(trials);
            let mut objectives = Vec::with_capacity(trials);
            let mut infeasible = 0usize;
            for trial in 0..trials {
                match &per_cell[axis_idx * trials + trial][m_idx].outcome {
                    TrialOutcome::Design { sinr_db, objective } => {
                        sinrs.push(*sinr_db);
                        objectives.push(*objective);
                    }
                    TrialOutcome::InfeasibleRadius { .. } => infeasible += 1,
                }
            }
            rows.push(SweepRow {
                axis_value,
                method: spec.label().to_string(),
                mean_sinr_db: mean(&sinrs),
                std_sinr_db: sample_std(&sinrs),
                mean_objective: mean(&objectives),
                infeasible_count: infeasible,
            });
        }
    }
    Ok(rows)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// Output of a single design run: one record per method plus the steering
/// context needed to interpret them.
#[derive(Debug, Clone)]
pub struct DesignRun {
    pub records: Vec<DesignRecord>,
    pub steering_mean: LiftedVector,
}

/// Designs every configured method once on freshly simulated data
/// (trial stream 0, no sweep axis).
pub fn run_design(setup: &ExperimentSetup) -> Result<DesignRun, HarnessError> {
    setup.validate()?;
    let inputs = apply_axis(setup, None);
    let scenario = &inputs.scenario;
    let actual_doa = scenario.desired.doa_deg + inputs.mismatch_deg;
    if !(actual_doa.abs() < 90.0) {
        return Err(HarnessError::MismatchOutOfRange(actual_doa));
    }
    let actual_scenario = scenario.with_desired_doa(actual_doa)?;
    let batch = generate_snapshots(&actual_scenario, inputs.snapshots, 0)?;
    let r_hat = lift_matrix(&sample_covariance(&batch))?;
    let samples = generate_steering_samples(scenario, setup.steering_samples, 1)?;

    let mut records = Vec::with_capacity(inputs.methods.len());
    for spec in &inputs.methods {
        match build_design(spec, &r_hat, &samples, scenario, inputs.mismatch_deg) {
            Ok(design) => records.push(DesignRecord::solved(&design, samples.mean())),
            Err(HarnessError::Design(DesignError::InfeasibleRadius {
                radius,
                bound,
                requirement,
            })) => {
                let (eps, beta) = match spec {
                    MethodSpec::WdroNorm { epsilon }
                    | MethodSpec::WdroMahalanobis { epsilon, .. }
                    | MethodSpec::WdroJoint { epsilon, .. } => {
                        let (e, b) = resolve_epsilon(epsilon, scenario, inputs.mismatch_deg)?;
                        (Some(e), b)
                    }
                    _ => (None, None),
                };
                let rho = match spec {
                    MethodSpec::DiagLoad { rho } => Some(*rho),
                    MethodSpec::WdroJoint { rho, .. } => Some(*rho),
                    _ => None,
                };
                let method = match spec {
                    MethodSpec::MvdrSmi => crate::designs::Method::MvdrSmi,
                    MethodSpec::WdroNorm { .. } => crate::designs::Method::WdroNorm,
                    MethodSpec::WdroMahalanobis { .. } => crate::designs::Method::WdroMahalanobis,
                    MethodSpec::DiagLoad { .. } => crate::designs::Method::DiagLoad,
                    MethodSpec::WdroJoint { .. } => crate::designs::Method::WdroJoint,
                };
                records.push(DesignRecord::infeasible_radius(
                    method,
                    eps,
                    rho,
                    beta,
                    format!("radius {radius} not strictly below bound {bound} ({requirement})"),
                ));
            }
            Err(other) => return Err(other),
        }
    }
    Ok(DesignRun {
        records,
        steering_mean: samples.mean().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_setup(trials: usize) -> ExperimentSetup {
        let scenario = Scenario::new(
            ArrayGeometry::half_wavelength(4).unwrap(),
            SourceSpec::desired(0.0, 10.0).unwrap(),
            vec![SourceSpec::interferer(40.0, 100.0).unwrap()],
            1.0,
            PerturbationModel::None,
            0,
        )
        .unwrap();
        ExperimentSetup {
            scenario,
            methods: vec![
                MethodSpec::MvdrSmi,
                MethodSpec::WdroNorm {
                    epsilon: EpsilonRule::Fixed(0.4),
                },
            ],
            snapshots: 64,
            steering_samples: 16,
            trials,
            mismatch_deg: 0.0,
            seed: 3,
        }
    }

    #[test]
    fn mvdr_approaches_optimal_sinr_with_many_snapshots() {
        let mut setup = small_setup(20);
        setup.snapshots = 5000;
        setup.methods = vec![MethodSpec::MvdrSmi];
        let sweep = SweepSpec {
            axis: SweepAxis::MismatchDeg,
            grid: vec![0.0],
        };
        let rows = run_sweep(&setup, &sweep).unwrap();
        let optimal_db = 10.0 * optimal_sinr(&setup.scenario, 0.0).unwrap().log10();
        assert!(
            (rows[0].mean_sinr_db - optimal_db).abs() < 0.5,
            "mean {} dB vs optimal {} dB",
            rows[0].mean_sinr_db,
            optimal_db
        );
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let setup = small_setup(4);
        let sweep = SweepSpec {
            axis: SweepAxis::SnrDb,
            grid: vec![0.0, 10.0],
        };
        let rows1 = run_sweep(&setup, &sweep).unwrap();
        let rows2 = run_sweep_with(Parallelism::Sequential, &setup, &sweep).unwrap();
        assert_eq!(rows1.len(), 4);
        for (a, b) in rows1.iter().zip(&rows2) {
            assert_eq!(a.axis_value, b.axis_value);
            assert_eq!(a.method, b.method);
            assert_eq!(a.mean_sinr_db.to_bits(), b.mean_sinr_db.to_bits());
            assert_eq!(a.std_sinr_db.to_bits(), b.std_sinr_db.to_bits());
            assert_eq!(a.mean_objective.to_bits(), b.mean_objective.to_bits());
            assert_eq!(a.infeasible_count, b.infeasible_count);
        }
    }

    #[test]
    fn single_cell_sweep_single_row_per_method() {
        let mut setup = small_setup(1);
        setup.methods = vec![MethodSpec::MvdrSmi];
        let sweep = SweepSpec {
            axis: SweepAxis::Snapshots,
            grid: vec![32.0],
        };
        let rows = run_sweep(&setup, &sweep).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].std_sinr_db, 0.0);
        assert_eq!(rows[0].infeasible_count, 0);
    }

    #[test]
    fn oversized_radius_counts_as_infeasible() {
        let mut setup = small_setup(3);
        // ||a_bar|| = 2 for N = 4 sensors; radius 5 exceeds it.
        setup.methods = vec![MethodSpec::WdroNorm {
            epsilon: EpsilonRule::Fixed(5.0),
        }];
        let sweep = SweepSpec {
            axis: SweepAxis::MismatchDeg,
            grid: vec![0.0],
        };
        let rows = run_sweep(&setup, &sweep).unwrap();
        assert_eq!(rows[0].infeasible_count, 3);
        assert!(rows[0].mean_sinr_db.is_nan());
    }

    #[test]
    fn epsilon_axis_overrides_method_radii() {
        let mut setup = small_setup(2);
        setup.methods = vec![MethodSpec::WdroNorm {
            epsilon: EpsilonRule::Fixed(0.1),
        }];
        let sweep = SweepSpec {
            axis: SweepAxis::Epsilon,
            grid: vec![5.0],
        };
        let rows = run_sweep(&setup, &sweep).unwrap();
        // Overridden to an infeasible value despite the small fixed radius.
        assert_eq!(rows[0].infeasible_count, 2);
    }

    #[test]
    fn mismatch_bound_epsilon_is_small_for_small_offsets() {
        let geom = ArrayGeometry::half_wavelength(10).unwrap();
        let eps0 = mismatch_bound_epsilon(&geom, 0.0, 0.0).unwrap();
        assert_eq!(eps0, 0.0);
        let eps2 = mismatch_bound_epsilon(&geom, 0.0, 2.0).unwrap();
        assert!(eps2 > 0.0 && eps2 < 10.0_f64.sqrt(), "eps {}", eps2);
    }

    #[test]
    fn design_run_produces_records_and_unit_response() {
        let setup = small_setup(1);
        let run = run_design(&setup).unwrap();
        assert_eq!(run.records.len(), 2);
        let mvdr = &run.records[0];
        assert_eq!(mvdr.method, "mvdr_smi");
        assert_eq!(mvdr.status, "optimal");
        assert_relative_eq!(mvdr.response.unwrap(), 1.0, epsilon = 1e-8);
        assert_eq!(mvdr.weights_re.len(), 4);
    }

    #[test]
    fn lambda_policy_inverse_covariance_works() {
        // With the inverse sample covariance as weighting, feasibility needs
        // 2 eps < a_bar^T R^{-1} a_bar, roughly ||a||^2 over the signal
        // eigenvalue (about 0.1 here), so pick a small radius.
        let mut setup = small_setup(1);
        setup.methods = vec![MethodSpec::WdroMahalanobis {
            epsilon: EpsilonRule::Fixed(0.02),
            lambda: LambdaPolicy::InverseSampleCovariance,
        }];
        let run = run_design(&setup).unwrap();
        assert_eq!(run.records[0].status, "optimal");
    }

    #[test]
    fn from_beta_rule_records_beta() {
        let mut setup = small_setup(1);
        // Small beta keeps the radius feasible for N = 4 (quantile near 0).
        setup.methods = vec![MethodSpec::WdroNorm {
            epsilon: EpsilonRule::FromBeta(1e-6),
        }];
        let run = run_design(&setup).unwrap();
        assert_eq!(run.records[0].status, "optimal");
        assert_eq!(run.records[0].beta, Some(1e-6));
        assert!(run.records[0].epsilon.unwrap() > 0.0);
    }

    #[test]
    fn validation_errors() {
        let mut setup = small_setup(0);
        assert!(matches!(setup.validate(), Err(HarnessError::NoTrials)));
        setup.trials = 1;
        setup.methods.clear();
        assert!(matches!(setup.validate(), Err(HarnessError::NoMethods)));
        let setup = small_setup(1);
        let sweep = SweepSpec {
            axis: SweepAxis::SnrDb,
            grid: vec![],
        };
        assert!(matches!(
            run_sweep(&setup, &sweep),
            Err(HarnessError::EmptyGrid)
        ));
    }
}
