//! End-to-end tests of the `wdro` binary: exit codes, file schemas, and
//! byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use nalgebra::Complex;
use wdro_beamform::scenario::{steering_vector, ArrayGeometry};

const CONFIG: &str = r#"
seed = 42
snapshots = 128
steering_samples = 16
trials = 2

[scenario]
noise_power = 1.0

[scenario.geometry]
n_sensors = 4

[scenario.desired]
doa_deg = 0.0
power = 10.0

[[scenario.interferers]]
doa_deg = 40.0
power = 100.0

[[methods]]
name = "mvdr_smi"

[[methods]]
name = "wdro_norm"
epsilon = 0.4

[sweep]
variable = "snr_db"
grid = [0.0, 10.0]
"#;

fn wdro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wdro"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn design_is_reproducible_and_distortionless() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");

    for out in [&out_a, &out_b] {
        let result = wdro(&["design", "--config", &config, "--out", &out.to_string_lossy()]);
        assert!(result.status.success(), "{result:?}");
    }
    let bytes_a = fs::read(out_a.join("design.json")).unwrap();
    let bytes_b = fs::read(out_b.join("design.json")).unwrap();
    assert_eq!(bytes_a, bytes_b, "same config and seed must give identical bytes");

    let parsed: serde_json::Value = serde_json::from_slice(&bytes_a).unwrap();
    let designs = parsed["designs"].as_array().unwrap();
    assert_eq!(designs.len(), 2);
    let mvdr = &designs[0];
    assert_eq!(mvdr["method"], "mvdr_smi");
    assert_eq!(mvdr["status"], "optimal");
    let response = mvdr["response"].as_f64().unwrap();
    assert!(
        (response - 1.0).abs() <= 1e-8,
        "distortionless response violated: {response}"
    );

    // A different seed changes the data, hence the bytes.
    let out_c = dir.path().join("c");
    let result = wdro(&[
        "design",
        "--config",
        &config,
        "--out",
        &out_c.to_string_lossy(),
        "--seed",
        "43",
    ]);
    assert!(result.status.success());
    let bytes_c = fs::read(out_c.join("design.json")).unwrap();
    assert_ne!(bytes_a, bytes_c);
}

#[test]
fn infeasible_radius_is_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    // ||a_bar|| = 2 for 4 sensors; radius 10 is infeasible.
    let config_text = CONFIG.replace("epsilon = 0.4", "epsilon = 10.0");
    let config = write_config(dir.path(), &config_text);
    let out = dir.path().join("out");
    let result = wdro(&["design", "--config", &config, "--out", &out.to_string_lossy()]);
    assert!(result.status.success(), "infeasible radius must not be fatal");
    let parsed: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("design.json")).unwrap()).unwrap();
    let robust = &parsed["designs"][1];
    assert_eq!(robust["status"], "infeasible_radius");
    assert!(robust["message"].as_str().unwrap().contains("bound"));
}

#[test]
fn sweep_schema_and_svg_leaves_csv_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let plain = dir.path().join("plain");
    let with_svg = dir.path().join("svg");

    let result = wdro(&["sweep", "--config", &config, "--out", &plain.to_string_lossy()]);
    assert!(result.status.success(), "{result:?}");
    let csv = fs::read_to_string(plain.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("axis,method,mean_sinr_db,std_sinr_db,mean_objective,infeasible_count")
    );
    // 2 grid points x 2 methods.
    assert_eq!(lines.count(), 4);
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').count(), 6, "bad row {line}");
    }

    let result = wdro(&[
        "sweep",
        "--config",
        &config,
        "--out",
        &with_svg.to_string_lossy(),
        "--svg",
    ]);
    assert!(result.status.success());
    let csv_svg = fs::read_to_string(with_svg.join("sweep.csv")).unwrap();
    assert_eq!(csv, csv_svg, "svg rendering must not alter the CSV");
    let svg = fs::read_to_string(with_svg.join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("mvdr_smi"));
}

#[test]
fn sweep_without_sweep_section_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = CONFIG.split("[sweep]").next().unwrap().to_string();
    let config = write_config(dir.path(), &config_text);
    let result = wdro(&["sweep", "--config", &config]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn verify_fast_passes_with_json_lines() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let result = wdro(&["verify", "--level", "fast", "--out", &out.to_string_lossy()]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");
    let stdout = String::from_utf8(result.stdout).unwrap();
    let mut count = 0;
    for line in stdout.lines() {
        let v: serde_json::Value = serde_json::from_str(line).expect("JSON line");
        for key in ["description", "lhs", "rhs", "slack", "passed"] {
            assert!(v.get(key).is_some(), "missing key {key} in {line}");
        }
        assert_eq!(v["passed"], true);
        count += 1;
    }
    assert!(count > 100, "expected a substantial verdict list, got {count}");
    let file_lines = fs::read_to_string(out.join("verify.jsonl")).unwrap();
    assert_eq!(file_lines.lines().count(), count);
    assert!(
        start.elapsed().as_secs_f64() < 10.0,
        "fast level should finish quickly"
    );
}

#[test]
fn config_errors_exit_two() {
    let result = wdro(&["design", "--config", "/nonexistent/config.toml"]);
    assert_eq!(result.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "not valid toml [");
    let result = wdro(&["design", "--config", &config]);
    assert_eq!(result.status.code(), Some(2));

    let config = write_config(dir.path(), &CONFIG.replace("mvdr_smi", "no_such_method"));
    let result = wdro(&["design", "--config", &config]);
    assert_eq!(result.status.code(), Some(2));

    let result = wdro(&["no-such-subcommand"]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn beampattern_conventional_peaks_at_look_direction() {
    let dir = tempfile::tempdir().unwrap();
    let n = 8usize;
    let look = 20.0;
    let geometry = ArrayGeometry::half_wavelength(n).unwrap();
    let a = steering_vector(&geometry, look).unwrap();
    let weights: Vec<Complex<f64>> = a.iter().map(|z| z / n as f64).collect();
    let design = serde_json::json!({
        "seed": 0,
        "geometry": {"n_sensors": n, "spacing_wavelengths": 0.5},
        "mismatch_deg": 0.0,
        "designs": [{
            "method": "conventional",
            "epsilon": null, "rho": null, "beta": null,
            "status": "optimal",
            "weights_re": weights.iter().map(|z| z.re).collect::<Vec<_>>(),
            "weights_im": weights.iter().map(|z| z.im).collect::<Vec<_>>(),
            "multiplier": null, "objective": null, "certificate": null,
            "response": null, "message": null
        }]
    });
    let design_path = dir.path().join("design.json");
    fs::write(&design_path, serde_json::to_string_pretty(&design).unwrap()).unwrap();

    let out = dir.path().join("patterns");
    let result = wdro(&[
        "beampattern",
        "--design",
        &design_path.to_string_lossy(),
        "--grid",
        "-80:80:0.5",
        "--out",
        &out.to_string_lossy(),
        "--svg",
    ]);
    assert!(result.status.success(), "{result:?}");
    let csv = fs::read_to_string(out.join("beampattern_conventional.csv")).unwrap();
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for line in csv.lines().skip(1) {
        let mut parts = line.split(',');
        let angle: f64 = parts.next().unwrap().parse().unwrap();
        let power: f64 = parts.next().unwrap().parse().unwrap();
        if power > best.1 {
            best = (angle, power);
        }
    }
    assert_eq!(best.0, look, "peak must sit at the look direction");
    assert!(best.1.abs() < 1e-9, "peak must be normalized to 0 dB");
    assert!(out.join("beampattern.svg").exists());
}

#[test]
fn beampattern_nulls_strong_interferer() {
    let dir = tempfile::tempdir().unwrap();
    // Long-data MVDR with a 30 dB interferer at 30 degrees.
    let config_text = r#"
seed = 9
snapshots = 2000
steering_samples = 8
trials = 1

[scenario]
noise_power = 1.0

[scenario.geometry]
n_sensors = 10

[scenario.desired]
doa_deg = 0.0
power = 10.0

[[scenario.interferers]]
doa_deg = 30.0
power = 1000.0

[[methods]]
name = "mvdr_smi"
"#;
    let config = write_config(dir.path(), config_text);
    let out = dir.path().join("out");
    let result = wdro(&["design", "--config", &config, "--out", &out.to_string_lossy()]);
    assert!(result.status.success());
    let result = wdro(&[
        "beampattern",
        "--design",
        &out.join("design.json").to_string_lossy(),
        "--grid",
        "-89.5:89.5:0.5",
        "--out",
        &out.to_string_lossy(),
    ]);
    assert!(result.status.success());
    let csv = fs::read_to_string(out.join("beampattern_mvdr_smi.csv")).unwrap();
    let at_interferer: f64 = csv
        .lines()
        .skip(1)
        .find_map(|line| {
            let mut parts = line.split(',');
            let angle: f64 = parts.next().unwrap().parse().unwrap();
            (angle == 30.0).then(|| parts.next().unwrap().parse().unwrap())
        })
        .expect("grid contains 30 deg");
    assert!(
        at_interferer <= -30.0,
        "interferer direction should be nulled, got {at_interferer} dB"
    );
}

#[test]
fn beampattern_bad_inputs_exit_two() {
    let result = wdro(&["beampattern", "--design", "/nonexistent/design.json"]);
    assert_eq!(result.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let design_path = dir.path().join("design.json");
    fs::write(
        &design_path,
        serde_json::json!({
            "seed": 0,
            "geometry": {"n_sensors": 2, "spacing_wavelengths": 0.5},
            "mismatch_deg": 0.0,
            "designs": []
        })
        .to_string(),
    )
    .unwrap();
    // start > stop: empty grid.
    let result = wdro(&[
        "beampattern",
        "--design",
        &design_path.to_string_lossy(),
        "--grid",
        "10:0:1",
    ]);
    assert_eq!(result.status.code(), Some(2));
}
