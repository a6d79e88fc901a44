//! The evaluation boundary: inputs, outputs, the prediction-equivalence
//! relation, and the [`Model`] trait every classifier is reached through.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputVector(pub Vec<f64>);

impl InputVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Bits set where the feature value is nonzero.
    pub fn support(&self) -> Mask {
        let bits: Vec<bool> = self.0.iter().map(|v| *v != 0.0).collect();
        Mask::from_bools(&bits)
    }
}

impl From<Vec<f64>> for InputVector {
    fn from(v: Vec<f64>) -> Self {
        InputVector(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelOutput(pub Vec<f64>);

impl ModelOutput {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::arg("model output must have at least one score"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Model("model output contains a non-finite score".into()));
        }
        Ok(ModelOutput(scores))
    }

    /// Validates that the scores form a probability vector.
    pub fn probabilities(scores: Vec<f64>) -> Result<Self> {
        let out = ModelOutput::new(scores)?;
        if out.0.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Model("probability outside [0, 1]".into()));
        }
        let total: f64 = out.0.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Model(format!("probabilities sum to {total}, not 1")));
        }
        Ok(out)
    }

    pub fn scores(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest score; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.0.iter().enumerate().skip(1) {
            if s > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// The two largest scores, largest first.
    pub fn top_two(&self) -> Result<(f64, f64)> {
        if self.0.len() < 2 {
            return Err(Error::arg("need at least two classes"));
        }
        let mut first = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for &s in &self.0 {
            if s > first {
                second = first;
                first = s;
            } else if s > second {
                second = s;
            }
        }
        Ok((first, second))
    }
}

/// When two model outputs count as the same prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionRelation {
    /// Same top class, ties resolved to the lowest index.
    #[default]
    ArgmaxEqual,
    /// `|a_0 - b_0| <= gamma` for single-score models.
    ScalarGap { gamma: f64 },
}

impl PredictionRelation {
    pub const DEFAULT_GAMMA: f64 = 0.5;

    pub fn scalar_gap(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::arg(format!("gamma must be finite and non-negative, got {gamma}")));
        }
        Ok(PredictionRelation::ScalarGap { gamma })
    }

    /// Checks the relation is usable with `m` output scores.
    pub fn validate(&self, m: usize) -> Result<()> {
        match *self {
            PredictionRelation::ArgmaxEqual if m < 2 => {
                Err(Error::arg("argmax equality needs at least two classes"))
            }
            PredictionRelation::ScalarGap { .. } if m != 1 => Err(Error::Dimension {
                expected: 1,
                got: m,
            }),
            PredictionRelation::ScalarGap { gamma } if !gamma.is_finite() || gamma < 0.0 => {
                Err(Error::arg("gamma must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }

    /// The natural relation for a model with `m` outputs.
    pub fn for_outputs(m: usize) -> Self {
        if m == 1 {
            PredictionRelation::ScalarGap {
                gamma: Self::DEFAULT_GAMMA,
            }
        } else {
            PredictionRelation::ArgmaxEqual
        }
    }
}

/// `x ⊙ α`: features outside the mask are replaced with zero.
pub fn apply_mask(x: &InputVector, mask: &Mask) -> Result<InputVector> {
    if x.len() != mask.len() {
        return Err(Error::Dimension {
            expected: mask.len(),
            got: x.len(),
        });
    }
    Ok(InputVector(
        x.0.iter()
            .enumerate()
            .map(|(i, &v)| if mask.get(i) { v } else { 0.0 })
            .collect(),
    ))
}

pub fn predicts_same(a: &ModelOutput, b: &ModelOutput, rel: PredictionRelation) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    rel.validate(a.len())?;
    Ok(match rel {
        PredictionRelation::ArgmaxEqual => a.argmax() == b.argmax(),
        PredictionRelation::ScalarGap { gamma } => (a.0[0] - b.0[0]).abs() <= gamma,
    })
}

/// Half the gap between the two largest scores.
pub fn decision_gap(out: &ModelOutput) -> Result<f64> {
    let (p1, p2) = out.top_two()?;
    Ok((p1 - p2) / 2.0)
}

/// Whether a model may be evaluated from several threads at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Concurrency {
    Parallel,
    Serial,
}

/// A black-box classifier `f: R^n -> R^m`.
///
/// Builtin models are deterministic: identical inputs give identical outputs.
pub trait Model: Send + Sync {
    fn n_features(&self) -> usize;

    fn n_outputs(&self) -> usize;

    /// Whether outputs are probability vectors.
    fn probabilities(&self) -> bool {
        false
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Parallel
    }

    fn evaluate(&self, input: &InputVector) -> Result<ModelOutput>;

    /// Evaluates a batch; outputs are in input order. Serial adapters can
    /// override this to pipeline requests.
    fn evaluate_batch(&self, inputs: &[InputVector]) -> Result<Vec<ModelOutput>> {
        inputs
            .iter()
            .enumerate()
            .map(|(i, x)| self.evaluate(x).map_err(|e| e.at_sample(i)))
            .collect()
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn n_outputs(&self) -> usize {
        (**self).n_outputs()
    }
    fn probabilities(&self) -> bool {
        (**self).probabilities()
    }
    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
    fn evaluate(&self, input: &InputVector) -> Result<ModelOutput> {
        (**self).evaluate(input)
    }
    fn evaluate_batch(&self, inputs: &[InputVector]) -> Result<Vec<ModelOutput>> {
        (**self).evaluate_batch(inputs)
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn n_outputs(&self) -> usize {
        (**self).n_outputs()
    }
    fn probabilities(&self) -> bool {
        (**self).probabilities()
    }
    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
    fn evaluate(&self, input: &InputVector) -> Result<ModelOutput> {
        (**self).evaluate(input)
    }
    fn evaluate_batch(&self, inputs: &[InputVector]) -> Result<Vec<ModelOutput>> {
        (**self).evaluate_batch(inputs)
    }
}

pub(crate) fn check_input<M: Model + ?Sized>(model: &M, x: &InputVector) -> Result<()> {
    if x.len() != model.n_features() {
        return Err(Error::Dimension {
            expected: model.n_features(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `f(x ⊙ α)`.
pub fn evaluate_masked<M: Model + ?Sized>(model: &M, x: &InputVector, mask: &Mask) -> Result<ModelOutput> {
    check_input(model, x)?;
    model.evaluate(&apply_mask(x, mask)?)
}

/// Evaluates every input, fanning out across threads when the model allows
/// it. Output order always matches input order.
pub fn evaluate_all<M: Model + ?Sized>(model: &M, inputs: &[InputVector]) -> Result<Vec<ModelOutput>> {
    match model.concurrency() {
        Concurrency::Parallel => inputs
            .par_iter()
            .enumerate()
            .map(|(i, x)| model.evaluate(x).map_err(|e| e.at_sample(i)))
            .collect(),
        Concurrency::Serial => model.evaluate_batch(inputs),
    }
}

/// Wraps a model and counts evaluations.
pub struct CountingModel<M> {
    inner: M,
    count: AtomicU64,
}

impl<M: Model> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        CountingModel {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn evaluations(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: Model> Model for CountingModel<M> {
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }
    fn n_outputs(&self) -> usize {
        self.inner.n_outputs()
    }
    fn probabilities(&self) -> bool {
        self.inner.probabilities()
    }
    fn concurrency(&self) -> Concurrency {
        self.inner.concurrency()
    }
    fn evaluate(&self, input: &InputVector) -> Result<ModelOutput> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(input)
    }
    fn evaluate_batch(&self, inputs: &[InputVector]) -> Result<Vec<ModelOutput>> {
        self.count.fetch_add(inputs.len() as u64, Ordering::Relaxed);
        self.inner.evaluate_batch(inputs)
    }
}
