//! Random masking `M_λ f(x) = E_{z ~ Bern(λ)^n} f(x ⊙ z)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::model::{apply_mask, check_input, evaluate_all, Concurrency, InputVector, Model, ModelOutput};
use crate::rng::{derive_seed, hash_f64s, substream};
use crate::spectral::{check_unit_interval, DenseBooleanFunction, MAX_VARS};
use crate::stats::pairwise_sum;

/// Monte-Carlo width used for stability experiments.
pub const STABILITY_SAMPLES: usize = 32;
/// Monte-Carlo width used for accuracy experiments.
pub const ACCURACY_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingMode {
    MonteCarlo,
    /// Weighted sum over every keep-pattern of the input's support.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub lambda: f64,
    pub samples: usize,
    pub seed: u64,
    pub mode: SmoothingMode,
    /// Largest support size summed over in exact mode.
    #[serde(default = "default_cap")]
    pub exact_cap: usize,
}

fn default_cap() -> usize {
    MAX_VARS
}

impl SmoothingConfig {
    pub fn monte_carlo(lambda: f64, samples: usize, seed: u64) -> Result<Self> {
        let c = SmoothingConfig {
            lambda,
            samples,
            seed,
            mode: SmoothingMode::MonteCarlo,
            exact_cap: MAX_VARS,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn exact(lambda: f64) -> Result<Self> {
        let c = SmoothingConfig {
            lambda,
            samples: 1,
            seed: 0,
            mode: SmoothingMode::Exact,
            exact_cap: MAX_VARS,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_interval("lambda", self.lambda)?;
        if self.samples == 0 {
            return Err(Error::arg("smoothing needs at least one sample"));
        }
        if self.exact_cap > 63 {
            return Err(Error::arg("exact cap must be below 64"));
        }
        Ok(())
    }

    /// Inner evaluations made by one smoothed evaluation of `x`.
    pub fn evaluations_per_call(&self, x: &InputVector) -> u64 {
        if self.lambda == 1.0 || self.lambda == 0.0 {
            return 1;
        }
        match self.mode {
            SmoothingMode::MonteCarlo => self.samples as u64,
            SmoothingMode::Exact => 1u64 << x.support().count_ones(),
        }
    }
}

/// `M_λ f(x_masked)`. Monte-Carlo draws come from `rng`; exact mode ignores it.
///
/// `λ = 1` returns `f(x_masked)` and `λ = 0` returns `f(0)`, each with a
/// single evaluation.
pub fn smooth_eval<M: Model + ?Sized, R: Rng + ?Sized>(
    model: &M,
    x_masked: &InputVector,
    config: &SmoothingConfig,
    rng: &mut R,
) -> Result<ModelOutput> {
    config.validate()?;
    check_input(model, x_masked)?;
    let n = x_masked.len();
    let lambda = config.lambda;
    if lambda == 1.0 {
        return model.evaluate(x_masked);
    }
    if lambda == 0.0 {
        return model.evaluate(&InputVector(vec![0.0; n]));
    }
    let (inputs, weights): (Vec<InputVector>, Option<Vec<f64>>) = match config.mode {
        SmoothingMode::MonteCarlo => {
            let mut inputs = Vec::with_capacity(config.samples);
            for _ in 0..config.samples {
                let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(lambda)).collect();
                let z = Mask::from_bools(&bits);
                inputs.push(apply_mask(x_masked, &z)?);
            }
            (inputs, None)
        }
        SmoothingMode::Exact => {
            let support: Vec<usize> = x_masked.support().iter_ones().collect();
            let s = support.len();
            if s > config.exact_cap {
                return Err(Error::Resource {
                    what: "exact smoothing".into(),
                    size: format!("2^{s} keep patterns"),
                    cap: 1u64 << config.exact_cap,
                });
            }
            let mut inputs = Vec::with_capacity(1 << s);
            let mut weights = Vec::with_capacity(1 << s);
            for bits in 0..1u64 << s {
                let kept = bits.count_ones() as i32;
                weights.push(lambda.powi(kept) * (1.0 - lambda).powi(s as i32 - kept));
                let z = Mask::from_indices(n, support.iter().enumerate().filter(|(j, _)| bits >> j & 1 == 1).map(|(_, &i)| i))?;
                inputs.push(apply_mask(x_masked, &z)?);
            }
            (inputs, Some(weights))
        }
    };
    let outputs = evaluate_all(model, &inputs)?;
    let m = outputs.first().map(|o| o.len()).unwrap_or(0);
    let count = outputs.len() as f64;
    let means = (0..m)
        .map(|j| {
            let terms: Vec<f64> = match &weights {
                Some(w) => outputs.iter().zip(w).map(|(o, w)| w * o.0[j]).collect(),
                None => outputs.iter().map(|o| o.0[j]).collect(),
            };
            let total = pairwise_sum(&terms);
            if weights.is_some() {
                total
            } else {
                total / count
            }
        })
        .collect();
    ModelOutput::new(means)
}

/// Lipschitz hard-stability radius of a smoothed output: `(p1 - p2) / (2λ)`
/// and its floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MusRadius {
    pub r_real: f64,
    pub r_int: usize,
}

pub fn mus_hard_radius(smoothed: &ModelOutput, lambda: f64) -> Result<MusRadius> {
    check_unit_interval("lambda", lambda)?;
    if lambda == 0.0 {
        return Err(Error::arg("the certificate is undefined at lambda = 0"));
    }
    if smoothed.len() < 2 {
        return Err(Error::arg("the certificate needs at least two classes"));
    }
    if smoothed.0.iter().any(|p| !(-1e-12..=1.0 + 1e-12).contains(p)) {
        return Err(Error::arg("smoothed scores must lie in [0, 1]"));
    }
    let (p1, p2) = smoothed.top_two()?;
    let r_real = ((p1 - p2) / (2.0 * lambda)).max(0.0);
    Ok(MusRadius {
        r_real,
        r_int: r_real.floor() as usize,
    })
}

/// `M_λ f` as a model. Each input gets its own Monte-Carlo stream, seeded
/// from the configured seed and a hash of the input, so repeated
/// evaluations agree.
#[derive(Debug, Clone)]
pub struct SmoothedModel<M> {
    inner: M,
    config: SmoothingConfig,
}

pub fn wrap_smoothed<M: Model>(model: M, config: SmoothingConfig) -> Result<SmoothedModel<M>> {
    config.validate()?;
    Ok(SmoothedModel { inner: model, config })
}

impl<M> SmoothedModel<M> {
    pub fn config(&self) -> &SmoothingConfig {
        &self.config
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: Model> Model for SmoothedModel<M> {
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

    fn evaluate(&self, x: &InputVector) -> Result<ModelOutput> {
        let mut rng = substream(derive_seed(self.config.seed, hash_f64s(&x.0)), 0);
        smooth_eval(&self.inner, x, &self.config, &mut rng)
    }
}

/// Exact `M_λ h` for a tabulated function:
/// `M_λ h(α) = Σ_{β ⊆ α} λ^{|β|} (1-λ)^{|α|-|β|} h(β)`, summed directly over
/// submasks (`O(3^n)`).
pub fn smooth_function_exact(h: &DenseBooleanFunction, lambda: f64) -> Result<DenseBooleanFunction> {
    check_unit_interval("lambda", lambda)?;
    let n = h.n();
    let lp: Vec<f64> = (0..=n).map(|k| lambda.powi(k as i32)).collect();
    let kp: Vec<f64> = (0..=n).map(|k| (1.0 - lambda).powi(k as i32)).collect();
    DenseBooleanFunction::from_fn(n, |alpha| {
        let size = alpha.count_ones() as usize;
        let mut total = 0.0;
        let mut beta = alpha;
        loop {
            let kept = beta.count_ones() as usize;
            total += lp[kept] * kp[size - kept] * h.at(beta);
            if beta == 0 {
                break;
            }
            beta = (beta - 1) & alpha;
        }
        total
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Conjunction, LookupTable};

    #[test]
    fn config_validation() {
        assert!(SmoothingConfig::monte_carlo(1.2, 8, 0).is_err());
        assert!(SmoothingConfig::monte_carlo(0.5, 0, 0).is_err());
        assert!(SmoothingConfig::exact(0.5).is_ok());
    }

    #[test]
    fn identity_and_zero_limits() {
        let model = LookupTable::random(6, 3, 4).unwrap();
        let x = InputVector(vec![1.0, 2.0, 0.0, -1.0, 3.0, 1.0]);
        let mut rng = substream(0, 0);
        for mode in [SmoothingConfig::monte_carlo(1.0, 16, 1).unwrap(), SmoothingConfig::exact(1.0).unwrap()] {
            assert_eq!(smooth_eval(&model, &x, &mode, &mut rng).unwrap(), model.evaluate(&x).unwrap());
        }
        let zero = SmoothingConfig::exact(0.0).unwrap();
        assert_eq!(
            smooth_eval(&model, &x, &zero, &mut rng).unwrap(),
            model.evaluate(&InputVector(vec![0.0; 6])).unwrap()
        );
    }

    #[test]
    fn smoothed_conjunction_is_lambda_squared() {
        let model = Conjunction::new(2, vec![0, 1]).unwrap();
        let x = InputVector(vec![1.0, 1.0]);
        for lambda in [0.25, 0.5, 0.9] {
            let out = smooth_eval(&model, &x, &SmoothingConfig::exact(lambda).unwrap(), &mut substream(0, 0)).unwrap();
            assert!((out.0[1] - lambda * lambda).abs() < 1e-15);
        }
        let h = DenseBooleanFunction::new(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = smooth_function_exact(&h, 0.3).unwrap();
        assert!((s.at(3) - 0.09).abs() < 1e-15);
        assert_eq!(s.at(1), 0.0);
    }

    #[test]
    fn radius_examples() {
        let r = mus_hard_radius(&ModelOutput(vec![0.9, 0.1]), 0.5).unwrap();
        assert!((r.r_real - 0.8).abs() < 1e-12);
        assert_eq!(r.r_int, 0);
        let r = mus_hard_radius(&ModelOutput(vec![1.0, 0.0]), 0.25).unwrap();
        assert_eq!((r.r_real, r.r_int), (2.0, 2));
        let r = mus_hard_radius(&ModelOutput(vec![0.5, 0.5]), 0.3).unwrap();
        assert_eq!(r.r_int, 0);
        assert!(mus_hard_radius(&ModelOutput(vec![0.5, 0.5]), 0.0).is_err());
        assert!(mus_hard_radius(&ModelOutput(vec![1.0]), 0.5).is_err());
    }

    #[test]
    fn wrapper_is_reproducible_and_normalized() {
        let model = LookupTable::random(8, 3, 9).unwrap();
        let smoothed = wrap_smoothed(&model, SmoothingConfig::monte_carlo(0.6, 32, 5).unwrap()).unwrap();
        let x = InputVector((0..8).map(|i| i as f64 + 1.0).collect());
        let a = smoothed.evaluate(&x).unwrap();
        assert_eq!(a, smoothed.evaluate(&x).unwrap());
        assert!((a.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(smoothed.probabilities());
    }

    #[test]
    fn exact_cap_applies_to_support() {
        let model = LookupTable::random(4, 2, 1).unwrap();
        let mut cfg = SmoothingConfig::exact(0.5).unwrap();
        cfg.exact_cap = 2;
        let x = InputVector(vec![1.0, 1.0, 0.0, 0.0]);
        assert!(smooth_eval(&model, &x, &cfg, &mut substream(0, 0)).is_ok());
        let x = InputVector(vec![1.0, 1.0, 1.0, 0.0]);
        assert!(matches!(smooth_eval(&model, &x, &cfg, &mut substream(0, 0)), Err(Error::Resource { .. })));
    }
}
