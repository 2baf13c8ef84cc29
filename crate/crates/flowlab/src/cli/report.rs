//! Machine-readable experiment reports and trajectory CSV artifacts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::integrate::Trajectory;

use super::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// One checked claim: its tolerance, the measured value, and the verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub expected: f64,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Assertion {
    /// |measured - expected| <= tolerance.
    pub fn close(name: &str, expected: f64, measured: f64, tolerance: f64) -> Self {
        Assertion {
            name: name.into(),
            expected,
            measured,
            tolerance,
            passed: (measured - expected).abs() <= tolerance,
        }
    }

    /// measured <= bound.
    pub fn at_most(name: &str, bound: f64, measured: f64) -> Self {
        Assertion {
            name: name.into(),
            expected: bound,
            measured,
            tolerance: 0.0,
            passed: measured <= bound,
        }
    }

    /// measured >= bound.
    pub fn at_least(name: &str, bound: f64, measured: f64) -> Self {
        Assertion {
            name: name.into(),
            expected: bound,
            measured,
            tolerance: 0.0,
            passed: measured >= bound,
        }
    }

    /// A boolean verdict encoded as 1.0 / 0.0.
    pub fn truth(name: &str, holds: bool) -> Self {
        Assertion {
            name: name.into(),
            expected: 1.0,
            measured: if holds { 1.0 } else { 0.0 },
            tolerance: 0.0,
            passed: holds,
        }
    }
}

/// The report.json artifact; key order is stable across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment_id: String,
    pub config: ExperimentConfig,
    pub assertions: Vec<Assertion>,
    /// Free-form per-analysis measurements (insertion-ordered keys).
    pub details: Value,
    /// "pass" or "fail".
    pub status: String,
    pub wall_ms: u128,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Write bytes atomically: temp file in the target directory + rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_report(path: &Path, report: &Report) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write_atomic(path, &json)
}

/// Trajectory CSV: header `t,V,ut_norm,a_1,...,a_n`, every float with 17
/// significant digits for a lossless round trip.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, |s| s.len());
    let mut out = String::from("t,V,ut_norm");
    for k in 1..=n {
        out.push_str(&format!(",a_{k}"));
    }
    out.push('\n');
    for i in 0..traj.len() {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}",
            traj.times[i], traj.lyapunov_values[i], traj.ut_norms[i]
        ));
        for v in traj.states[i].coeffs.iter() {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}
