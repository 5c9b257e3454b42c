//! Batch CLI for the robust beamforming toolkit.
//!
//! Subcommands: `design` (solve every configured beamformer once and write
//! a JSON document), `sweep` (Monte Carlo sweep over one variable, CSV and
//! optional SVG), `verify` (run the brute-force oracle suites, JSON-lines
//! report, exit 1 on any failure), and `beampattern` (evaluate patterns for
//! a design file).
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/config error.

mod config;
mod output;
mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{Complex, DVector};

use wdro_beamform::harness::{run_design, run_sweep};
use wdro_beamform::lift::C64;
use wdro_beamform::oracle::{all_passed, run_verification, VerifyLevel, VerifyOptions};
use wdro_beamform::scenario::{beampattern, ArrayGeometry};

use crate::config::Experiment;
use crate::output::{beampattern_csv, design_file_json, sweep_csv, DesignFile, GeometryRecord};

#[derive(Parser)]
#[command(name = "wdro", version, about = "Robust adaptive beamforming toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design every configured beamformer once; writes design.json
    Design {
        /// Experiment configuration (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's output_dir, then ".")
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo sweep over the configured axis; writes sweep.csv
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also render sweep.svg
        #[arg(long)]
        svg: bool,
    },
    /// Run the oracle verification suites; exit 1 on any failed verdict
    Verify {
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write verify.jsonl into this directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate beampatterns for every solved design in a design file
    Beampattern {
        /// design.json produced by the design command
        #[arg(long)]
        design: PathBuf,
        /// Angle grid as start:stop:step in degrees
        #[arg(long, default_value = "-89.5:89.5:0.5", allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render beampattern.svg
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Fast,
    Full,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Design { config, out, seed } => cmd_design(&config, out, seed),
        Command::Sweep {
            config,
            out,
            seed,
            svg,
        } => cmd_sweep(&config, out, seed, svg),
        Command::Verify { level, seed, out } => cmd_verify(level, seed, out),
        Command::Beampattern {
            design,
            grid,
            out,
            svg,
        } => cmd_beampattern(&design, &grid, out, svg),
    }
}

fn load_experiment(path: &Path, seed: Option<u64>) -> Result<Experiment, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut experiment = config::parse(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = seed {
        experiment.setup.seed = seed;
        experiment.setup.scenario.seed = seed;
    }
    Ok(experiment)
}

fn resolve_out_dir(cli_out: Option<PathBuf>, config_out: &Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| config_out.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(path)
}

fn cmd_design(
    config_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<ExitCode, String> {
    let experiment = load_experiment(config_path, seed)?;
    let out_dir = resolve_out_dir(out, &experiment.output_dir);
    let run = run_design(&experiment.setup).map_err(|e| e.to_string())?;
    let file = DesignFile {
        seed: experiment.setup.seed,
        geometry: GeometryRecord {
            n_sensors: experiment.setup.scenario.geometry.n_sensors(),
            spacing_wavelengths: experiment.setup.scenario.geometry.spacing_wavelengths(),
        },
        mismatch_deg: experiment.setup.mismatch_deg,
        designs: run.records,
    };
    write_file(&out_dir, "design.json", &design_file_json(&file))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    config_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    render_svg: bool,
) -> Result<ExitCode, String> {
    let experiment = load_experiment(config_path, seed)?;
    let sweep = experiment
        .sweep
        .as_ref()
        .ok_or("config has no [sweep] section")?;
    let out_dir = resolve_out_dir(out, &experiment.output_dir);
    let rows = run_sweep(&experiment.setup, sweep).map_err(|e| e.to_string())?;
    write_file(&out_dir, "sweep.csv", &sweep_csv(&rows))?;
    if render_svg {
        let mut by_method: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for row in &rows {
            by_method
                .entry(row.method.clone())
                .or_default()
                .push((row.axis_value, row.mean_sinr_db));
        }
        let series: Vec<svg::Series> = by_method
            .into_iter()
            .map(|(label, points)| svg::Series { label, points })
            .collect();
        let chart = svg::line_chart(
            "mean output SINR",
            sweep.axis.label(),
            "mean SINR (dB)",
            &series,
        );
        write_file(&out_dir, "sweep.svg", &chart)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(level: Level, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExitCode, String> {
    let opts = VerifyOptions {
        seed: seed.unwrap_or(0),
        ..VerifyOptions::default()
    };
    let level = match level {
        Level::Fast => VerifyLevel::Fast,
        Level::Full => VerifyLevel::Full,
    };
    let verdicts = run_verification(level, &opts);
    let mut lines = String::new();
    for v in &verdicts {
        lines.push_str(&v.to_json_line());
        lines.push('\n');
    }
    print!("{lines}");
    if let Some(dir) = out {
        write_file(&dir, "verify.jsonl", &lines)?;
    }
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    eprintln!("{} verdicts, {} failed", verdicts.len(), failed);
    if all_passed(&verdicts) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid spec `{spec}` is not start:stop:step"));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| format!("bad grid start `{}`", parts[0]))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| format!("bad grid stop `{}`", parts[1]))?;
    let step: f64 = parts[2]
        .parse()
        .map_err(|_| format!("bad grid step `{}`", parts[2]))?;
    if !(step > 0.0) {
        return Err(format!("grid step must be positive, got {step}"));
    }
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let x = start + step * k as f64;
        if x > stop + 1e-9 {
            break;
        }
        grid.push(x);
        k += 1;
        if k > 2_000_000 {
            return Err("grid has more than 2e6 points".to_string());
        }
    }
    if grid.is_empty() {
        return Err(format!("grid spec `{spec}` produces no angles"));
    }
    Ok(grid)
}

fn cmd_beampattern(
    design_path: &Path,
    grid_spec: &str,
    out: Option<PathBuf>,
    render_svg: bool,
) -> Result<ExitCode, String> {
    let text = fs::read_to_string(design_path)
        .map_err(|e| format!("cannot read design file {}: {e}", design_path.display()))?;
    let file: DesignFile =
        serde_json::from_str(&text).map_err(|e| format!("bad design file: {e}"))?;
    let grid = parse_grid(grid_spec)?;
    let geometry = ArrayGeometry::new(file.geometry.n_sensors, file.geometry.spacing_wavelengths)
        .map_err(|e| e.to_string())?;
    let out_dir = out.unwrap_or_else(|| PathBuf::from("."));

    let mut series = Vec::new();
    for record in &file.designs {
        if record.status != "optimal" {
            eprintln!("skipping {} ({})", record.method, record.status);
            continue;
        }
        let weights: DVector<C64> = DVector::from_iterator(
            record.weights_re.len(),
            record
                .weights_re
                .iter()
                .zip(&record.weights_im)
                .map(|(&re, &im)| Complex::new(re, im)),
        );
        let pattern =
            beampattern(&weights, &geometry, &grid).map_err(|e| e.to_string())?;
        write_file(
            &out_dir,
            &format!("beampattern_{}.csv", record.method),
            &beampattern_csv(&pattern),
        )?;
        series.push(svg::Series {
            label: record.method.clone(),
            points: pattern,
        });
    }
    if render_svg {
        let chart = svg::line_chart("beampattern", "angle (deg)", "power (dB)", &series);
        write_file(&out_dir, "beampattern.svg", &chart)?;
    }
    Ok(ExitCode::SUCCESS)
}
