use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::prefix_mask;
use crate::bise::indicator::{BooleanOracle, TableIndicator, INDICATOR_CONSTRUCTION};
use crate::bise::influence::{exact_influence, influence_estimate};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::rng::derive_seed;
use crate::stats::{mean, spearman, variance};

pub const DEFAULT_STEP: usize = 4;
pub const DEFAULT_M: usize = 100;
pub const OPTIMAL_M_GRID: [usize; 8] = [1, 50, 100, 300, 500, 1000, 5000, 9000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiseMode {
    /// Scores the top-`k` sets.
    Insertion,
    /// Scores the complements of the top-`k` sets.
    Deletion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiseBounds {
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub m: usize,
    /// Per-point Hoeffding half-width.
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiseScore {
    pub mode: BiseMode,
    pub step: usize,
    pub ks: Vec<usize>,
    /// `φ_k = Inf(S_k)/2`, each in `[0, 1]`.
    pub values: Vec<f64>,
    /// Mean of `values`.
    pub auc: f64,
    /// Samples per influence estimate; `None` for exact scores.
    pub m: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BiseBounds>,
    pub indicator: &'static str,
}

impl BiseScore {
    /// Plug-in standard error of the AUC: the curve points are independent
    /// binomial frequencies.
    pub fn standard_error(&self) -> f64 {
        match self.m {
            None => 0.0,
            Some(m) => {
                let var: f64 = self.values.iter().map(|p| p * (1.0 - p) / m as f64).sum();
                var.sqrt() / self.values.len() as f64
            }
        }
    }

    /// CSV with header `k,phi,lower,upper`; bound columns are empty when no
    /// bounds are attached.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,phi,lower,upper\n");
        for (k, phi) in self.ks.iter().zip(&self.values) {
            match self.bounds {
                Some(b) => {
                    let _ = writeln!(
                        out,
                        "{k},{phi},{},{}",
                        (phi - b.half_width).max(0.0),
                        (phi + b.half_width).min(1.0)
                    );
                }
                None => {
                    let _ = writeln!(out, "{k},{phi},,");
                }
            }
        }
        out
    }
}

/// Curve sizes `step, 2 step, ...`, ending at `n` even when `n` is not a
/// multiple of `step`.
pub fn curve_sizes(n: usize, step: usize) -> Result<Vec<usize>> {
    if step == 0 {
        return Err(Error::arg("step must be at least 1"));
    }
    if n == 0 {
        return Err(Error::arg("no features to score"));
    }
    let mut ks: Vec<usize> = (1..=n / step).map(|i| i * step).collect();
    if ks.last() != Some(&n) {
        ks.push(n);
    }
    Ok(ks)
}

fn curve_sets(ranking: &[usize], mode: BiseMode, ks: &[usize]) -> Vec<Mask> {
    ks.iter()
        .map(|&k| {
            let top = prefix_mask(ranking, k);
            match mode {
                BiseMode::Insertion => top,
                BiseMode::Deletion => top.not(),
            }
        })
        .collect()
}

fn check_ranking(n: usize, ranking: &[usize]) -> Result<()> {
    if ranking.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: ranking.len(),
        });
    }
    let mut seen = vec![false; n];
    for &i in ranking {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::arg("ranking is not a permutation of the features"));
        }
    }
    Ok(())
}

/// Sampled BISE curve. The estimate at size `k` uses seed
/// `derive_seed(seed, k)`, so different attributions scored with the same
/// seed share random numbers.
pub fn bise<G: BooleanOracle + ?Sized>(
    g: &G,
    ranking: &[usize],
    mode: BiseMode,
    step: usize,
    m: usize,
    seed: u64,
) -> Result<BiseScore> {
    check_ranking(g.n(), ranking)?;
    let ks = curve_sizes(g.n(), step)?;
    let sets = curve_sets(ranking, mode, &ks);
    let point = |(s, &k): (&Mask, &usize)| influence_estimate(g, s, m, derive_seed(seed, k as u64)).map(|e| e.phi());
    let values = if g.parallel() {
        sets.par_iter().zip(&ks).map(point).collect::<Result<Vec<_>>>()?
    } else {
        sets.iter().zip(&ks).map(point).collect::<Result<Vec<_>>>()?
    };
    Ok(BiseScore {
        mode,
        step,
        auc: mean(&values),
        ks,
        values,
        m: Some(m),
        seed,
        bounds: None,
        indicator: INDICATOR_CONSTRUCTION,
    })
}

pub fn insertion_bise<G: BooleanOracle + ?Sized>(g: &G, ranking: &[usize], step: usize, m: usize, seed: u64) -> Result<BiseScore> {
    bise(g, ranking, BiseMode::Insertion, step, m, seed)
}

pub fn deletion_bise<G: BooleanOracle + ?Sized>(g: &G, ranking: &[usize], step: usize, m: usize, seed: u64) -> Result<BiseScore> {
    bise(g, ranking, BiseMode::Deletion, step, m, seed)
}

/// BISE curve with exact influences.
pub fn exact_bise(g: &TableIndicator, ranking: &[usize], mode: BiseMode, step: usize) -> Result<BiseScore> {
    check_ranking(g.n(), ranking)?;
    let ks = curve_sizes(g.n(), step)?;
    let values = curve_sets(ranking, mode, &ks)
        .iter()
        .map(|s| exact_influence(g, s).map(|inf| inf / 2.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(BiseScore {
        mode,
        step,
        auc: mean(&values),
        ks,
        values,
        m: None,
        seed: 0,
        bounds: None,
        indicator: INDICATOR_CONSTRUCTION,
    })
}

/// Simultaneous confidence bounds on the AUC.
///
/// Each `φ_k` is a mean of `m` Bernoulli flips, so a union bound over the
/// `K` curve points with two-sided Hoeffding gives half-width
/// `w = sqrt(ln(2K/δ) / (2m))`. With probability at least `1 - δ` the true
/// AUC lies in `[mean(max(0, φ_k - w)), mean(min(1, φ_k + w))]`. `ε` is
/// recorded with the bounds but does not enter the width.
pub fn bise_bounds(score: &BiseScore, epsilon: f64, delta: f64, m: usize) -> Result<BiseBounds> {
    if !(epsilon > 0.0 && delta > 0.0 && delta < 1.0) || m == 0 {
        return Err(Error::arg("bound parameters must be positive with delta < 1"));
    }
    let k = score.values.len() as f64;
    let w = ((2.0 * k / delta).ln() / (2.0 * m as f64)).sqrt();
    let lower: Vec<f64> = score.values.iter().map(|p| (p - w).max(0.0)).collect();
    let upper: Vec<f64> = score.values.iter().map(|p| (p + w).min(1.0)).collect();
    Ok(BiseBounds {
        lower: mean(&lower),
        upper: mean(&upper),
        epsilon,
        delta,
        m,
        half_width: w,
    })
}

/// Attaches bounds computed from the score's own sample count.
pub fn with_bounds(mut score: BiseScore, epsilon: f64, delta: f64) -> Result<BiseScore> {
    let m = score
        .m
        .ok_or_else(|| Error::arg("exact scores carry no sampling error"))?;
    score.bounds = Some(bise_bounds(&score, epsilon, delta, m)?);
    Ok(score)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalMRow {
    pub m: usize,
    pub mean: f64,
    /// Sample variance of the AUC across repeats.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalMReport {
    pub mode: BiseMode,
    pub repeats: usize,
    pub exact: bool,
    pub rows: Vec<OptimalMRow>,
    /// Spearman correlation between `m` and the variance; `NaN` when the
    /// variances are all equal.
    pub spearman: f64,
}

/// Repeats the BISE score at each `m` and reports the spread. With `exact`
/// set, the exhaustive influence replaces sampling (all variances are 0).
#[allow(clippy::too_many_arguments)]
pub fn optimal_m_report(
    g: &TableIndicator,
    ranking: &[usize],
    mode: BiseMode,
    step: usize,
    grid: &[usize],
    repeats: usize,
    exact: bool,
    seed: u64,
) -> Result<OptimalMReport> {
    if repeats < 2 {
        return Err(Error::arg("need at least two repeats"));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &m in grid {
        let aucs = (0..repeats)
            .map(|rep| {
                if exact {
                    exact_bise(g, ranking, mode, step).map(|s| s.auc)
                } else {
                    bise(g, ranking, mode, step, m, derive_seed(seed, rep as u64)).map(|s| s.auc)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(OptimalMRow {
            m,
            mean: mean(&aucs),
            variance: variance(&aucs),
        });
    }
    let ms: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let vs: Vec<f64> = rows.iter().map(|r| r.variance).collect();
    Ok(OptimalMReport {
        mode,
        repeats,
        exact,
        spearman: spearman(&ms, &vs),
        rows,
    })
}
