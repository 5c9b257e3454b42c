//! File formats produced by the commands: the design JSON document, the
//! sweep CSV, and beampattern CSVs. All writers are deterministic so that
//! identical configs and seeds reproduce identical bytes.

use serde::{Deserialize, Serialize};
use wdro_beamform::designs::DesignRecord;
use wdro_beamform::harness::SweepRow;

/// Top-level design document: geometry context plus one record per method.
#[derive(Debug, Serialize, Deserialize)]
pub struct DesignFile {
    pub seed: u64,
    pub geometry: GeometryRecord,
    pub mismatch_deg: f64,
    pub designs: Vec<DesignRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GeometryRecord {
    pub n_sensors: usize,
    pub spacing_wavelengths: f64,
}

pub fn design_file_json(file: &DesignFile) -> String {
    let mut text = serde_json::to_string_pretty(file).expect("design files serialize");
    text.push('\n');
    text
}

pub const SWEEP_HEADER: &str = "axis,method,mean_sinr_db,std_sinr_db,mean_objective,infeasible_count";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.axis_value,
            row.method,
            row.mean_sinr_db,
            row.std_sinr_db,
            row.mean_objective,
            row.infeasible_count
        ));
    }
    out
}

pub const BEAMPATTERN_HEADER: &str = "angle_deg,power_db";

pub fn beampattern_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from(BEAMPATTERN_HEADER);
    out.push('\n');
    for &(angle, power) in points {
        out.push_str(&format!("{},{}\n", angle, power));
    }
    out
}
