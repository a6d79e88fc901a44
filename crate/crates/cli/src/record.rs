//! Run records and output writing.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use stabcert::rng::derive_seed;
use stabcert::stats::{bootstrap_mean, Bootstrap, BOOTSTRAP_RESAMPLES};

use crate::failure::{Failure, Outcome};
use crate::items::hex_digest;

/// Evaluations observed on the model against the count the run should need,
/// when that count has a closed form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Evaluations {
    pub counted: u64,
    pub analytic: Option<u64>,
}

/// A bootstrapped mean of one per-item quantity.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub bootstrap: Bootstrap,
}

#[derive(Debug, Serialize)]
pub struct RunRecord<T> {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
    pub items: Vec<T>,
    pub summary: Vec<SummaryRow>,
    pub evaluations: Evaluations,
}

/// `sha256` over the command, its serialized flags and the input digest.
pub fn config_hash(command: &str, config: &serde_json::Value, input_sha256: Option<&str>) -> String {
    let key = serde_json::json!({
        "command": command,
        "config": config,
        "input_sha256": input_sha256,
    });
    hex_digest(key.to_string().as_bytes())
}

impl<T: Serialize> RunRecord<T> {
    pub fn new<C: Serialize>(
        command: &'static str,
        config: &C,
        input_sha256: Option<String>,
        items: Vec<T>,
        summary: Vec<SummaryRow>,
        evaluations: Evaluations,
    ) -> Outcome<Self> {
        let config = serde_json::to_value(config)?;
        Ok(RunRecord {
            command,
            config_hash: config_hash(command, &config, input_sha256.as_deref()),
            config,
            input_sha256,
            items,
            summary,
            evaluations,
        })
    }

    /// Fails when the model was called a different number of times than the
    /// run's analytic count.
    pub fn check_accounting(&self) -> Outcome<()> {
        match self.evaluations {
            Evaluations {
                counted,
                analytic: Some(expected),
            } if counted != expected => Err(Failure::Invariant(format!(
                "{counted} model evaluations, expected {expected}"
            ))),
            _ => Ok(()),
        }
    }
}

/// 95% percentile bootstrap of the mean with 1000 resamples.
pub fn summarize(label: impl Into<String>, values: &[f64], seed: u64, key: u64) -> SummaryRow {
    SummaryRow {
        label: label.into(),
        bootstrap: bootstrap_mean(values, BOOTSTRAP_RESAMPLES, 0.95, derive_seed(seed, key)),
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Outcome<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn csv_bytes<R: Serialize>(rows: &[R]) -> Outcome<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Failure::Io(e.to_string()))
}

/// Writes to `out`, or stdout when absent.
pub fn emit(bytes: &[u8], out: Option<&Path>) -> Outcome<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
