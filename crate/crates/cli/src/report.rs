//! Machine-readable reports.

use std::collections::BTreeMap;
use std::time::Duration;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub type Tolerances = BTreeMap<&'static str, f64>;

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    /// Arguments after the program name, without `--json PATH`.
    pub command: Vec<String>,
    pub version: String,
    /// SHA-256 over the input file bytes and the command echo.
    pub input_digest: String,
    pub result: Value,
    pub tolerances: Tolerances,
    /// The only field that varies between identical runs.
    pub wall_time_ms: f64,
}

impl Report {
    pub fn new(command: Vec<String>, input: &[u8], result: Value, tolerances: Tolerances, wall: Duration) -> Self {
        let mut h = Sha256::new();
        h.update(input);
        for a in &command {
            h.update([0u8]);
            h.update(a.as_bytes());
        }
        Report {
            command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_digest: hex::encode(h.finalize()),
            result,
            tolerances,
            wall_time_ms: wall.as_secs_f64() * 1e3,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are finite or null")
    }
}

/// `argv` without the program name and any `--json PATH` / `--json=PATH`.
pub fn echo(argv: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--json" {
            it.next();
        } else if !a.starts_with("--json=") {
            out.push(a.clone());
        }
    }
    out
}

pub fn matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
