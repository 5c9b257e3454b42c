//! Narrowband array signal model: uniform linear array geometry, snapshot
//! generation, sample covariance, SINR, beampattern, and steering-vector
//! sample sets.
//!
//! All generators are pure given an explicit seed/stream pair, so concurrent
//! callers with distinct streams draw independent, reproducible data.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use thiserror::Error;

use crate::lift::{lift_vector, LiftedVector, C64};

/// Beampattern floor in dB; exact nulls are clamped here.
pub const PATTERN_FLOOR_DB: f64 = -120.0;

/// DOA jitter keeps perturbed angles inside the open (-90, 90) domain.
const DOA_CLAMP_DEG: f64 = 89.999;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("direction of arrival must satisfy |doa| < 90 deg, got {0}")]
    DoaOutOfRange(f64),
    #[error("array needs at least one sensor")]
    EmptyArray,
    #[error("element spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("source power must be nonnegative, got {0}")]
    NegativePower(f64),
    #[error("noise power must be positive, got {0}")]
    BadNoisePower(f64),
    #[error("perturbation scale must be nonnegative, got {0}")]
    NegativeScale(f64),
    #[error("desired source must have kind `desired` and interferers kind `interferer`")]
    SourceKindMismatch,
    #[error("snapshot count must be at least 1")]
    EmptyBatch,
    #[error("steering sample count must be at least 1")]
    EmptySampleSet,
    #[error("weight vector must be nonzero")]
    ZeroWeights,
    #[error("interference-plus-noise quadratic form is not positive: {0}")]
    NotPositiveDefinite(f64),
    #[error("evaluation grid must be nonempty")]
    EmptyGrid,
    #[error("steering samples have inconsistent dimensions")]
    DimensionMismatch,
}

/// Uniform linear array: `N` sensors spaced in carrier wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    n_sensors: usize,
    spacing_wavelengths: f64,
}

impl ArrayGeometry {
    pub const DEFAULT_SPACING: f64 = 0.5;

    pub fn new(n_sensors: usize, spacing_wavelengths: f64) -> Result<Self, ScenarioError> {
        if n_sensors == 0 {
            return Err(ScenarioError::EmptyArray);
        }
        if !(spacing_wavelengths > 0.0) {
            return Err(ScenarioError::BadSpacing(spacing_wavelengths));
        }
        Ok(Self {
            n_sensors,
            spacing_wavelengths,
        })
    }

    /// Half-wavelength array with `n_sensors` elements.
    pub fn half_wavelength(n_sensors: usize) -> Result<Self, ScenarioError> {
        Self::new(n_sensors, Self::DEFAULT_SPACING)
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn spacing_wavelengths(&self) -> f64 {
        self.spacing_wavelengths
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Desired,
    Interferer,
}

/// A point source: direction of arrival in degrees and linear power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub doa_deg: f64,
    pub power: f64,
    pub kind: SourceKind,
}

impl SourceSpec {
    pub fn new(doa_deg: f64, power: f64, kind: SourceKind) -> Result<Self, ScenarioError> {
        if !(doa_deg.abs() < 90.0) {
            return Err(ScenarioError::DoaOutOfRange(doa_deg));
        }
        if !(power >= 0.0) {
            return Err(ScenarioError::NegativePower(power));
        }
        Ok(Self {
            doa_deg,
            power,
            kind,
        })
    }

    pub fn desired(doa_deg: f64, power: f64) -> Result<Self, ScenarioError> {
        Self::new(doa_deg, power, SourceKind::Desired)
    }

    pub fn interferer(doa_deg: f64, power: f64) -> Result<Self, ScenarioError> {
        Self::new(doa_deg, power, SourceKind::Interferer)
    }
}

/// How steering-vector samples deviate from the presumed response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationModel {
    /// Every sample equals the presumed steering vector.
    None,
    /// Independent Gaussian noise with the given standard deviation on each
    /// real and imaginary component.
    GaussianAdditive { scale: f64 },
    /// Gaussian jitter (degrees) on the direction of arrival.
    DoaJitter { scale: f64 },
}

impl PerturbationModel {
    fn validate(&self) -> Result<(), ScenarioError> {
        match *self {
            PerturbationModel::None => Ok(()),
            PerturbationModel::GaussianAdditive { scale } | PerturbationModel::DoaJitter { scale } => {
                if scale >= 0.0 {
                    Ok(())
                } else {
                    Err(ScenarioError::NegativeScale(scale))
                }
            }
        }
    }
}

/// One desired source, any number of interferers, white noise, and a
/// perturbation model for steering-vector samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub desired: SourceSpec,
    pub interferers: Vec<SourceSpec>,
    pub noise_power: f64,
    pub steering_perturbation: PerturbationModel,
    pub seed: u64,
}

impl Scenario {
    pub fn new(
        geometry: ArrayGeometry,
        desired: SourceSpec,
        interferers: Vec<SourceSpec>,
        noise_power: f64,
        steering_perturbation: PerturbationModel,
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        if desired.kind != SourceKind::Desired
            || interferers.iter().any(|s| s.kind != SourceKind::Interferer)
        {
            return Err(ScenarioError::SourceKindMismatch);
        }
        if !(noise_power > 0.0) {
            return Err(ScenarioError::BadNoisePower(noise_power));
        }
        steering_perturbation.validate()?;
        Ok(Self {
            geometry,
            desired,
            interferers,
            noise_power,
            steering_perturbation,
            seed,
        })
    }

    /// Copy with the desired source steered to a different true direction.
    pub fn with_desired_doa(&self, doa_deg: f64) -> Result<Self, ScenarioError> {
        let mut out = self.clone();
        out.desired = SourceSpec::desired(doa_deg, self.desired.power)?;
        Ok(out)
    }
}

/// Complex N x T matrix of array snapshots, one column per time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch {
    samples: DMatrix<C64>,
}

impl SnapshotBatch {
    pub fn samples(&self) -> &DMatrix<C64> {
        &self.samples
    }

    pub fn t_count(&self) -> usize {
        self.samples.ncols()
    }

    pub fn n_sensors(&self) -> usize {
        self.samples.nrows()
    }

    /// Writes the batch as CSV with columns `t,sensor_index,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,sensor_index,re,im")?;
        for t in 0..self.t_count() {
            for s in 0..self.n_sensors() {
                let z = self.samples[(s, t)];
                writeln!(out, "{},{},{},{}", t, s, z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// Array response for a plane wave from `doa_deg`; phase reference at
/// element 0, element n carries phase `2 pi * spacing * n * sin(doa)`.
pub fn steering_vector(
    geometry: &ArrayGeometry,
    doa_deg: f64,
) -> Result<DVector<C64>, ScenarioError> {
    if !(doa_deg.abs() < 90.0) {
        return Err(ScenarioError::DoaOutOfRange(doa_deg));
    }
    let sin_theta = (doa_deg * PI / 180.0).sin();
    let phase_step = 2.0 * PI * geometry.spacing_wavelengths() * sin_theta;
    Ok(DVector::from_fn(geometry.n_sensors(), |n, _| {
        Complex::from_polar(1.0, phase_step * n as f64)
    }))
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Zero-mean circular complex Gaussian with E|z|^2 = 1.
fn standard_circular(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im).scale(std::f64::consts::FRAC_1_SQRT_2)
}

/// Draws `t_count` snapshots `x(t) = s(t) a_d + sum_k i_k(t) a_k + n(t)` with
/// i.i.d. circular complex Gaussian signal, interference, and noise.
///
/// Bit-reproducible for a fixed `(scenario.seed, stream)` pair.
pub fn generate_snapshots(
    scenario: &Scenario,
    t_count: usize,
    stream: u64,
) -> Result<SnapshotBatch, ScenarioError> {
    if t_count == 0 {
        return Err(ScenarioError::EmptyBatch);
    }
    let n = scenario.geometry.n_sensors();
    let a_desired = steering_vector(&scenario.geometry, scenario.desired.doa_deg)?;
    let a_interferers: Vec<DVector<C64>> = scenario
        .interferers
        .iter()
        .map(|s| steering_vector(&scenario.geometry, s.doa_deg))
        .collect::<Result<_, _>>()?;

    let mut rng = rng_for(scenario.seed, stream);
    let sigma_s = scenario.desired.power.sqrt();
    let sigma_i: Vec<f64> = scenario.interferers.iter().map(|s| s.power.sqrt()).collect();
    let sigma_n = scenario.noise_power.sqrt();

    let mut samples = DMatrix::zeros(n, t_count);
    for t in 0..t_count {
        let mut col = &a_desired * (standard_circular(&mut rng) * sigma_s);
        for (a_k, sig_k) in a_interferers.iter().zip(&sigma_i) {
            col += a_k * (standard_circular(&mut rng) * *sig_k);
        }
        for s in 0..n {
            col[s] += standard_circular(&mut rng) * sigma_n;
        }
        samples.set_column(t, &col);
    }
    Ok(SnapshotBatch { samples })
}

/// Sample covariance `(1/T) sum_t x(t) x(t)^H`, symmetrized to be exactly
/// Hermitian in floating point.
pub fn sample_covariance(batch: &SnapshotBatch) -> DMatrix<C64> {
    let t = batch.t_count() as f64;
    let x = batch.samples();
    let r = x * x.adjoint() / Complex::new(t, 0.0);
    (&r + r.adjoint()).scale(0.5)
}

/// Output ratio `sigma_s^2 |w^H a|^2 / (w^H R_in w)`; invariant under
/// nonzero complex scaling of `w`.
pub fn sinr(
    w: &DVector<C64>,
    a_actual: &DVector<C64>,
    sigma_s2: f64,
    r_in_true: &DMatrix<C64>,
) -> Result<f64, ScenarioError> {
    if w.norm() == 0.0 {
        return Err(ScenarioError::ZeroWeights);
    }
    let numerator = sigma_s2 * w.dotc(a_actual).norm_sqr();
    let denominator = w.dotc(&(r_in_true * w)).re;
    if !(denominator > 0.0) {
        return Err(ScenarioError::NotPositiveDefinite(denominator));
    }
    Ok(numerator / denominator)
}

/// Lifted steering-vector samples with their cached empirical mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringSampleSet {
    samples: Vec<LiftedVector>,
    mean: LiftedVector,
}

impl SteeringSampleSet {
    pub fn new(samples: Vec<LiftedVector>) -> Result<Self, ScenarioError> {
        let first = samples.first().ok_or(ScenarioError::EmptySampleSet)?;
        let dim = first.dim();
        if samples.iter().any(|s| s.dim() != dim) {
            return Err(ScenarioError::DimensionMismatch);
        }
        let mut acc = DVector::zeros(dim);
        for s in &samples {
            acc += s.data();
        }
        acc /= samples.len() as f64;
        let mean = LiftedVector::from_vector(acc).expect("even length by construction");
        Ok(Self { samples, mean })
    }

    /// Singleton set whose mean is the sample itself.
    pub fn from_mean(mean: LiftedVector) -> Self {
        Self {
            samples: vec![mean.clone()],
            mean,
        }
    }

    pub fn samples(&self) -> &[LiftedVector] {
        &self.samples
    }

    pub fn mean(&self) -> &LiftedVector {
        &self.mean
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Draws `m_count` perturbed steering vectors in complex space, lifts them,
/// and caches the empirical mean.
pub fn generate_steering_samples(
    scenario: &Scenario,
    m_count: usize,
    stream: u64,
) -> Result<SteeringSampleSet, ScenarioError> {
    if m_count == 0 {
        return Err(ScenarioError::EmptySampleSet);
    }
    scenario.steering_perturbation.validate()?;
    let base = steering_vector(&scenario.geometry, scenario.desired.doa_deg)?;
    let mut rng = rng_for(scenario.seed, stream);
    let mut samples = Vec::with_capacity(m_count);
    for _ in 0..m_count {
        let sample = match scenario.steering_perturbation {
            PerturbationModel::None => base.clone(),
            PerturbationModel::GaussianAdditive { scale } => DVector::from_fn(base.len(), |k, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                base[k] + Complex::new(re * scale, im * scale)
            }),
            PerturbationModel::DoaJitter { scale } => {
                let jitter: f64 = rng.sample(StandardNormal);
                let doa = (scenario.desired.doa_deg + scale * jitter)
                    .clamp(-DOA_CLAMP_DEG, DOA_CLAMP_DEG);
                steering_vector(&scenario.geometry, doa)?
            }
        };
        samples.push(lift_vector(&sample));
    }
    SteeringSampleSet::new(samples)
}

/// Normalized power pattern `20 log10 |w^H a(theta)|` over the grid, with the
/// peak at 0 dB and nulls clamped at [`PATTERN_FLOOR_DB`].
pub fn beampattern(
    w: &DVector<C64>,
    geometry: &ArrayGeometry,
    grid_deg: &[f64],
) -> Result<Vec<(f64, f64)>, ScenarioError> {
    if grid_deg.is_empty() {
        return Err(ScenarioError::EmptyGrid);
    }
    if w.norm() == 0.0 {
        return Err(ScenarioError::ZeroWeights);
    }
    let magnitudes: Vec<f64> = grid_deg
        .iter()
        .map(|&theta| Ok(w.dotc(&steering_vector(geometry, theta)?).norm()))
        .collect::<Result<_, ScenarioError>>()?;
    let peak = magnitudes.iter().copied().fold(0.0_f64, f64::max);
    Ok(grid_deg
        .iter()
        .zip(&magnitudes)
        .map(|(&theta, &mag)| {
            let db = if mag > 0.0 && peak > 0.0 {
                (20.0 * (mag / peak).log10()).max(PATTERN_FLOOR_DB)
            } else {
                PATTERN_FLOOR_DB
            };
            (theta, db)
        })
        .collect())
}
