//! Experiment configuration: a TOML document with nested tables mapping
//! directly onto the harness types. See `docs/example_experiment.toml` for an
//! annotated example.

use std::path::PathBuf;

use serde::Deserialize;
use wdro_beamform::harness::{
    EpsilonRule, ExperimentSetup, LambdaPolicy, MethodSpec, SweepAxis, SweepSpec,
};
use wdro_beamform::scenario::{
    ArrayGeometry, PerturbationModel, Scenario, SourceSpec,
};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    snapshots: usize,
    steering_samples: usize,
    trials: usize,
    #[serde(default)]
    mismatch_deg: f64,
    output_dir: Option<PathBuf>,
    scenario: RawScenario,
    methods: Vec<RawMethod>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    noise_power: f64,
    geometry: RawGeometry,
    desired: RawSource,
    #[serde(default)]
    interferers: Vec<RawSource>,
    perturbation: Option<RawPerturbation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    n_sensors: usize,
    spacing_wavelengths: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    doa_deg: f64,
    power: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerturbation {
    kind: String,
    scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    name: String,
    epsilon: Option<f64>,
    beta: Option<f64>,
    epsilon_rule: Option<String>,
    rho: Option<f64>,
    lambda: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: String,
    grid: Vec<f64>,
}

/// Fully parsed experiment: harness setup, optional sweep, output directory.
#[derive(Debug)]
pub struct Experiment {
    pub setup: ExperimentSetup,
    pub sweep: Option<SweepSpec>,
    pub output_dir: Option<PathBuf>,
}

pub fn parse(text: &str) -> Result<Experiment, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| err(e.to_string()))?;

    let geometry = ArrayGeometry::new(
        raw.scenario.geometry.n_sensors,
        raw.scenario
            .geometry
            .spacing_wavelengths
            .unwrap_or(ArrayGeometry::DEFAULT_SPACING),
    )
    .map_err(|e| err(e.to_string()))?;
    let desired = SourceSpec::desired(raw.scenario.desired.doa_deg, raw.scenario.desired.power)
        .map_err(|e| err(e.to_string()))?;
    let interferers = raw
        .scenario
        .interferers
        .iter()
        .map(|s| SourceSpec::interferer(s.doa_deg, s.power))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| err(e.to_string()))?;
    let perturbation = match &raw.scenario.perturbation {
        None => PerturbationModel::None,
        Some(p) => match p.kind.as_str() {
            "none" => PerturbationModel::None,
            "gaussian_additive" => PerturbationModel::GaussianAdditive {
                scale: p
                    .scale
                    .ok_or_else(|| err("perturbation kind `gaussian_additive` needs `scale`"))?,
            },
            "doa_jitter" => PerturbationModel::DoaJitter {
                scale: p
                    .scale
                    .ok_or_else(|| err("perturbation kind `doa_jitter` needs `scale`"))?,
            },
            other => {
                return Err(err(format!(
                    "unknown perturbation kind `{other}` (expected none | gaussian_additive | doa_jitter)"
                )))
            }
        },
    };
    let scenario = Scenario::new(
        geometry,
        desired,
        interferers,
        raw.scenario.noise_power,
        perturbation,
        raw.seed,
    )
    .map_err(|e| err(e.to_string()))?;

    let methods = raw
        .methods
        .iter()
        .map(parse_method)
        .collect::<Result<Vec<_>, _>>()?;

    let sweep = raw
        .sweep
        .as_ref()
        .map(|s| {
            let axis = match s.variable.as_str() {
                "snr_db" => SweepAxis::SnrDb,
                "snapshots" => SweepAxis::Snapshots,
                "epsilon" => SweepAxis::Epsilon,
                "mismatch_deg" => SweepAxis::MismatchDeg,
                other => {
                    return Err(err(format!(
                        "unknown sweep variable `{other}` (expected snr_db | snapshots | epsilon | mismatch_deg)"
                    )))
                }
            };
            if s.grid.is_empty() {
                return Err(err("sweep grid must be nonempty"));
            }
            Ok(SweepSpec {
                axis,
                grid: s.grid.clone(),
            })
        })
        .transpose()?;

    let setup = ExperimentSetup {
        scenario,
        methods,
        snapshots: raw.snapshots,
        steering_samples: raw.steering_samples,
        trials: raw.trials,
        mismatch_deg: raw.mismatch_deg,
        seed: raw.seed,
    };
    setup.validate().map_err(|e| err(e.to_string()))?;
    Ok(Experiment {
        setup,
        sweep,
        output_dir: raw.output_dir,
    })
}

fn parse_epsilon_rule(m: &RawMethod) -> Result<EpsilonRule, ConfigError> {
    let given = [
        m.epsilon.is_some(),
        m.beta.is_some(),
        m.epsilon_rule.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if given != 1 {
        return Err(err(format!(
            "method `{}` needs exactly one of `epsilon`, `beta`, or `epsilon_rule`",
            m.name
        )));
    }
    if let Some(eps) = m.epsilon {
        return Ok(EpsilonRule::Fixed(eps));
    }
    if let Some(beta) = m.beta {
        return Ok(EpsilonRule::FromBeta(beta));
    }
    match m.epsilon_rule.as_deref() {
        Some("mismatch_bound") => Ok(EpsilonRule::MismatchBound),
        Some(other) => Err(err(format!(
            "unknown epsilon_rule `{other}` (expected mismatch_bound)"
        ))),
        None => unreachable!("counted above"),
    }
}

fn parse_lambda(m: &RawMethod) -> Result<LambdaPolicy, ConfigError> {
    match m.lambda.as_deref() {
        None | Some("inverse_sample_covariance") => Ok(LambdaPolicy::InverseSampleCovariance),
        Some("identity") => Ok(LambdaPolicy::Identity),
        Some(other) => Err(err(format!(
            "unknown lambda policy `{other}` (expected identity | inverse_sample_covariance)"
        ))),
    }
}

fn parse_method(m: &RawMethod) -> Result<MethodSpec, ConfigError> {
    match m.name.as_str() {
        "mvdr_smi" => Ok(MethodSpec::MvdrSmi),
        "wdro_norm" => Ok(MethodSpec::WdroNorm {
            epsilon: parse_epsilon_rule(m)?,
        }),
        "wdro_mahalanobis" => Ok(MethodSpec::WdroMahalanobis {
            epsilon: parse_epsilon_rule(m)?,
            lambda: parse_lambda(m)?,
        }),
        "diag_load" => Ok(MethodSpec::DiagLoad {
            rho: m
                .rho
                .ok_or_else(|| err("method `diag_load` needs `rho`"))?,
        }),
        "wdro_joint" => Ok(MethodSpec::WdroJoint {
            epsilon: parse_epsilon_rule(m)?,
            rho: m
                .rho
                .ok_or_else(|| err("method `wdro_joint` needs `rho`"))?,
        }),
        other => Err(err(format!(
            "unknown method `{other}` (expected mvdr_smi | wdro_norm | wdro_mahalanobis | diag_load | wdro_joint)"
        ))),
    }
}
