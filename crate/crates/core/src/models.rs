//! Builtin deterministic classifiers.
//!
//! Builtins read a feature as present when its value is nonzero, so masking
//! `x ⊙ α` with an all-nonzero `x` exposes `α` directly.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{check_input, InputVector, Model, ModelOutput};
use crate::rng::substream;
use crate::spectral::{DenseBooleanFunction, MAX_VARS};

fn pattern_index(x: &InputVector) -> usize {
    x.values()
        .iter()
        .enumerate()
        .fold(0usize, |acc, (i, v)| if *v != 0.0 { acc | (1 << i) } else { acc })
}

/// Class 1 iff every feature in `features` is present; outputs `[1-g, g]`.
#[derive(Debug, Clone)]
pub struct Conjunction {
    n: usize,
    features: Vec<usize>,
}

impl Conjunction {
    pub fn new(n: usize, features: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = features.iter().find(|&&i| i >= n) {
            return Err(Error::arg(format!("feature {bad} out of range for n = {n}")));
        }
        Ok(Conjunction { n, features })
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }
}

impl Model for Conjunction {
    fn n_features(&self) -> usize {
        self.n
    }
    fn n_outputs(&self) -> usize {
        2
    }
    fn probabilities(&self) -> bool {
        true
    }
    fn evaluate(&self, x: &InputVector) -> Result<ModelOutput> {
        check_input(self, x)?;
        let on = self.features.iter().all(|&i| x.values()[i] != 0.0);
        let g = if on { 1.0 } else { 0.0 };
        Ok(ModelOutput(vec![1.0 - g, g]))
    }
}

/// Logistic vote over the present features of `features`:
/// `P(class 1) = σ(scale · (count - threshold + 1/2))`.
#[derive(Debug, Clone)]
pub struct MajorityThreshold {
    n: usize,
    features: Vec<usize>,
    threshold: usize,
    scale: f64,
}

impl MajorityThreshold {
    pub fn new(n: usize, features: Vec<usize>, threshold: usize, scale: f64) -> Result<Self> {
        if let Some(&bad) = features.iter().find(|&&i| i >= n) {
            return Err(Error::arg(format!("feature {bad} out of range for n = {n}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::arg("scale must be positive"));
        }
        Ok(MajorityThreshold {
            n,
            features,
            threshold,
            scale,
        })
    }

    /// Majority over all features: class 1 once more than half are present.
    pub fn majority(n: usize) -> Self {
        MajorityThreshold {
            n,
            features: (0..n).collect(),
            threshold: n / 2 + 1,
            scale: 4.0,
        }
    }
}

impl Model for MajorityThreshold {
    fn n_features(&self) -> usize {
        self.n
    }
    fn n_outputs(&self) -> usize {
        2
    }
    fn probabilities(&self) -> bool {
        true
    }
    fn evaluate(&self, x: &InputVector) -> Result<ModelOutput> {
        check_input(self, x)?;
        let count = self.features.iter().filter(|&&i| x.values()[i] != 0.0).count() as f64;
        let z = self.scale * (count - self.threshold as f64 + 0.5);
        let p = 1.0 / (1.0 + (-z).exp());
        Ok(ModelOutput(vec![1.0 - p, p]))
    }
}

/// An arbitrary table of outputs indexed by the presence pattern.
#[derive(Debug, Clone)]
pub struct LookupTable {
    n: usize,
    m: usize,
    rows: Vec<Vec<f64>>,
    probabilities: bool,
}

impl LookupTable {
    pub fn new(n: usize, rows: Vec<Vec<f64>>, probabilities: bool) -> Result<Self> {
        if n > MAX_VARS {
            return Err(Error::Resource {
                what: "lookup table".into(),
                size: format!("2^{n}"),
                cap: 1 << MAX_VARS,
            });
        }
        if rows.len() != 1 << n {
            return Err(Error::Dimension {
                expected: 1 << n,
                got: rows.len(),
            });
        }
        let m = rows.first().map_or(0, Vec::len);
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::arg("lookup rows must share a nonzero width"));
        }
        for row in &rows {
            if probabilities {
                ModelOutput::probabilities(row.clone())?;
            } else {
                ModelOutput::new(row.clone())?;
            }
        }
        Ok(LookupTable {
            n,
            m,
            rows,
            probabilities,
        })
    }

    /// Random probability rows over `m` classes, reproducible from `seed`.
    pub fn random(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m < 2 {
            return Err(Error::arg("a random classifier needs at least two classes"));
        }
        if n > MAX_VARS {
            return Err(Error::Resource {
                what: "lookup table".into(),
                size: format!("2^{n}"),
                cap: 1 << MAX_VARS,
            });
        }
        let mut rng = substream(seed, 0);
        let rows = (0..1usize << n)
            .map(|_| {
                let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-3).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / total).collect()
            })
            .collect();
        LookupTable::new(n, rows, true)
    }

    /// A single-output model reading its score from a Boolean function table.
    pub fn scalar(h: &DenseBooleanFunction) -> Self {
        LookupTable {
            n: h.n(),
            m: 1,
            rows: h.table().iter().map(|&v| vec![v]).collect(),
            probabilities: false,
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl Model for LookupTable {
    fn n_features(&self) -> usize {
        self.n
    }
    fn n_outputs(&self) -> usize {
        self.m
    }
    fn probabilities(&self) -> bool {
        self.probabilities
    }
    fn evaluate(&self, x: &InputVector) -> Result<ModelOutput> {
        check_input(self, x)?;
        Ok(ModelOutput(self.rows[pattern_index(x)].clone()))
    }
}

/// Always returns the same scores.
#[derive(Debug, Clone)]
pub struct Constant {
    n: usize,
    scores: Vec<f64>,
}

impl Constant {
    pub fn new(n: usize, scores: Vec<f64>) -> Result<Self> {
        ModelOutput::new(scores.clone())?;
        Ok(Constant { n, scores })
    }
}

impl Model for Constant {
    fn n_features(&self) -> usize {
        self.n
    }
    fn n_outputs(&self) -> usize {
        self.scores.len()
    }
    fn evaluate(&self, x: &InputVector) -> Result<ModelOutput> {
        check_input(self, x)?;
        Ok(ModelOutput(self.scores.clone()))
    }
}
