use serde::{Deserialize, Serialize};

use crate::bise::classic::{classic_curve, ClassicMetric};
use crate::bise::indicator::derive_indicator;
use crate::bise::score::{bise, BiseMode};
use crate::error::{Error, Result};
use crate::model::{InputVector, Model, PredictionRelation};
use crate::perturb::{perturb_ranking, RankingPerturbation};
use crate::rng::{derive_seed, substream};
use crate::stats::{bootstrap_mean, mean, BOOTSTRAP_RESAMPLES};

/// A scalar quality score for a feature ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RankMetric {
    /// Sampled BISE; the same seed is used for every ranking scored.
    Bise {
        mode: BiseMode,
        step: usize,
        m: usize,
        seed: u64,
        relation: PredictionRelation,
    },
    Classic { metric: ClassicMetric, step: usize },
}

impl RankMetric {
    pub fn score<M: Model + ?Sized>(&self, model: &M, x: &InputVector, ranking: &[usize]) -> Result<f64> {
        match *self {
            RankMetric::Bise {
                mode,
                step,
                m,
                seed,
                relation,
            } => {
                let g = derive_indicator(model, x, relation)?;
                Ok(bise(&g, ranking, mode, step, m, seed)?.auc)
            }
            RankMetric::Classic { metric, step } => Ok(classic_curve(metric, model, x, ranking, step)?.auc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankStability {
    pub perturbation: RankingPerturbation,
    pub pool_size: usize,
    pub trials: usize,
    pub base_scores: Vec<f64>,
    /// Mean absolute rank-position shift per trial, as a percentage of the
    /// pool size.
    pub per_trial: Vec<f64>,
    pub mean_percent: f64,
    /// Bootstrap standard deviation of the mean.
    pub sd: f64,
}

/// Position of each pool member when sorted by descending score; ties keep
/// pool order.
fn positions(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut pos = vec![0; scores.len()];
    for (p, &j) in order.iter().enumerate() {
        pos[j] = p;
    }
    pos
}

/// Scores every ranking in `pool`, then in each trial perturbs every
/// ranking, re-scores, and measures how far the induced order of the pool
/// moves. Trial `t` perturbs member `j` with stream `(derive_seed(seed, t), j)`.
pub fn ranking_stability<M: Model + ?Sized>(
    metric: &RankMetric,
    model: &M,
    x: &InputVector,
    pool: &[Vec<usize>],
    perturbation: RankingPerturbation,
    trials: usize,
    seed: u64,
) -> Result<RankStability> {
    if trials == 0 {
        return Err(Error::arg("need at least one trial"));
    }
    if pool.is_empty() {
        return Err(Error::arg("ranking pool is empty"));
    }
    perturbation.validate(x.len())?;
    let base_scores = pool
        .iter()
        .map(|r| metric.score(model, x, r))
        .collect::<Result<Vec<_>>>()?;
    let base_pos = positions(&base_scores);
    let mut per_trial = Vec::with_capacity(trials);
    for t in 0..trials {
        let trial_seed = derive_seed(seed, t as u64);
        let scores = pool
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let perturbed = perturb_ranking(r, perturbation, &mut substream(trial_seed, j as u64))?;
                metric.score(model, x, &perturbed)
            })
            .collect::<Result<Vec<_>>>()?;
        let pos = positions(&scores);
        let shifts: Vec<f64> = pos
            .iter()
            .zip(&base_pos)
            .map(|(a, b)| a.abs_diff(*b) as f64)
            .collect();
        per_trial.push(100.0 * mean(&shifts) / pool.len() as f64);
    }
    let boot = bootstrap_mean(&per_trial, BOOTSTRAP_RESAMPLES, 0.95, derive_seed(seed, u64::MAX));
    Ok(RankStability {
        perturbation,
        pool_size: pool.len(),
        trials,
        base_scores,
        mean_percent: boot.mean,
        sd: boot.sd,
        per_trial,
    })
}
