//! JSON-lines input items.

use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use stabcert::attribution::rank_descending;
use stabcert::{binarize_top_fraction, Attribution, InputVector};

use crate::failure::{Failure, Outcome};

fn default_fraction() -> f64 {
    0.25
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub x: Vec<f64>,
    /// Attribution scores, one per feature.
    pub scores: Vec<f64>,
    #[serde(default = "default_fraction")]
    pub top_fraction: f64,
    /// Competing attributions for ranking-stability runs.
    #[serde(default)]
    pub pool: Vec<Vec<f64>>,
}

/// An item with its attribution binarized.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub x: InputVector,
    pub attribution: Attribution,
    pub pool: Vec<Vec<usize>>,
}

pub struct Input {
    pub items: Vec<Prepared>,
    pub sha256: String,
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_items(text: &str) -> Outcome<Vec<Item>> {
    let items: Vec<Item> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Failure::Io(format!("input line {}: {e}", i + 1))))
        .collect::<Outcome<_>>()?;
    if items.is_empty() {
        return Err(Failure::config("input has no items"));
    }
    Ok(items)
}

fn prepare(index: usize, item: Item) -> Outcome<Prepared> {
    let at = |msg: String| Failure::config(format!("item {index}: {msg}"));
    let n = item.x.len();
    if n == 0 {
        return Err(at("x is empty".into()));
    }
    if item.scores.len() != n {
        return Err(at(format!("{} scores for {n} features", item.scores.len())));
    }
    if item.x.iter().any(|v| !v.is_finite()) {
        return Err(at("x has a non-finite value".into()));
    }
    let attribution = binarize_top_fraction(&item.scores, item.top_fraction).map_err(|e| at(e.to_string()))?;
    let mut pool = vec![attribution.ranking.clone()];
    for (j, scores) in item.pool.iter().enumerate() {
        if scores.len() != n {
            return Err(at(format!("pool member {j} has {} scores for {n} features", scores.len())));
        }
        pool.push(rank_descending(scores).map_err(|e| at(e.to_string()))?);
    }
    Ok(Prepared {
        x: InputVector(item.x),
        attribution,
        pool,
    })
}

/// Reads and validates every item; all items must share one feature count.
pub fn read_input(path: &Path) -> Outcome<Input> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let items = parse_items(text)?
        .into_iter()
        .enumerate()
        .map(|(i, item)| prepare(i, item))
        .collect::<Outcome<Vec<_>>>()?;
    let n = items[0].x.len();
    if let Some(i) = items.iter().position(|p| p.x.len() != n) {
        return Err(Failure::config(format!("item {i} has {} features, item 0 has {n}", items[i].x.len())));
    }
    Ok(Input {
        items,
        sha256: hex_digest(&bytes),
    })
}
