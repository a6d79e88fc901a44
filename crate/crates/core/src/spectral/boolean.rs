use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::model::{apply_mask, check_input, evaluate_all, InputVector, Model};
use crate::rng::substream;

/// Default largest `n` for dense tables (2^20 doubles, 8 MiB).
pub const MAX_VARS: usize = 20;

pub(crate) fn check_vars(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::Resource {
            what: "dense Boolean table".into(),
            size: format!("2^{n}"),
            cap: 1u64 << cap,
        });
    }
    Ok(())
}

/// A real-valued function on `{0,1}^n`, stored as a table indexed by the
/// mask integer (bit `i` is coordinate `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBooleanFunction {
    n: usize,
    table: Vec<f64>,
}

impl DenseBooleanFunction {
    pub fn new(n: usize, table: Vec<f64>) -> Result<Self> {
        Self::with_cap(n, table, MAX_VARS)
    }

    pub fn with_cap(n: usize, table: Vec<f64>, cap: usize) -> Result<Self> {
        check_vars(n, cap)?;
        if table.len() != 1 << n {
            return Err(Error::Dimension {
                expected: 1 << n,
                got: table.len(),
            });
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("table entries must be finite"));
        }
        Ok(DenseBooleanFunction { n, table })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        check_vars(n, MAX_VARS)?;
        Self::new(n, (0..1usize << n).map(f).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::from_fn(n, |_| c)
    }

    /// Uniform `[0, 1)` entries.
    pub fn random_unit(n: usize, seed: u64) -> Result<Self> {
        check_vars(n, MAX_VARS)?;
        let mut rng = substream(seed, 0);
        Self::new(n, (0..1usize << n).map(|_| rng.random::<f64>()).collect())
    }

    /// Tabulates `α ↦ f(x ⊙ α)[class]` over all `2^n` masks.
    pub fn from_model<M: Model + ?Sized>(model: &M, x: &InputVector, class: usize) -> Result<Self> {
        check_input(model, x)?;
        let n = x.len();
        check_vars(n, MAX_VARS)?;
        if class >= model.n_outputs() {
            return Err(Error::arg(format!("class {class} out of range")));
        }
        let inputs = (0..1u64 << n)
            .map(|i| apply_mask(x, &Mask::from_index(n, i)))
            .collect::<Result<Vec<_>>>()?;
        let outputs = evaluate_all(model, &inputs)?;
        Self::new(n, outputs.into_iter().map(|o| o.0[class]).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn into_table(self) -> Vec<f64> {
        self.table
    }

    #[inline]
    pub fn at(&self, index: usize) -> f64 {
        self.table[index]
    }

    pub fn eval(&self, alpha: &Mask) -> f64 {
        self.table[alpha.to_index().expect("mask wider than 64 bits") as usize]
    }

    /// `E_{α ~ Bern(q)^n}[g(h(α))]`.
    pub fn expect_under(&self, q: f64, g: impl Fn(f64) -> f64) -> f64 {
        let weights = bernoulli_weights(self.n, q);
        self.table
            .iter()
            .enumerate()
            .map(|(i, &v)| weights[i.count_ones() as usize] * g(v))
            .sum()
    }

    pub fn mean_under(&self, q: f64) -> f64 {
        self.expect_under(q, |v| v)
    }

    pub fn variance_under(&self, q: f64) -> f64 {
        let mu = self.mean_under(q);
        self.expect_under(q, |v| (v - mu) * (v - mu))
    }

    pub fn max_abs_diff(&self, other: &DenseBooleanFunction) -> f64 {
        assert_eq!(self.n, other.n);
        self.table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `w[k] = q^k (1-q)^{n-k}`, the probability of one specific mask with `k`
/// ones under `Bern(q)^n`.
pub fn bernoulli_weights(n: usize, q: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| q.powi(k as i32) * (1.0 - q).powi((n - k) as i32))
        .collect()
}
