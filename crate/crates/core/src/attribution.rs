//! Binarized feature attributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;

/// Attribution scores with their ranking and top-`k` mask.
///
/// The ranking orders features by descending score; equal scores are ordered
/// by ascending feature index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub scores: Vec<f64>,
    pub ranking: Vec<usize>,
    pub k: usize,
    pub mask: Mask,
}

impl Attribution {
    pub fn top_k(scores: Vec<f64>, k: usize) -> Result<Self> {
        let ranking = rank_descending(&scores)?;
        if k > scores.len() {
            return Err(Error::arg(format!("k = {k} exceeds {} features", scores.len())));
        }
        let mask = prefix_mask(&ranking, k);
        Ok(Attribution {
            scores,
            ranking,
            k,
            mask,
        })
    }

    pub fn n(&self) -> usize {
        self.scores.len()
    }
}

/// Feature indices sorted by descending score, ties by ascending index.
pub fn rank_descending(scores: &[f64]) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::arg("attribution scores are empty"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::arg("attribution scores contain NaN"));
    }
    let mut ranking: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps ascending index order within ties
    ranking.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    Ok(ranking)
}

/// Mask keeping the first `k` features of `ranking`.
pub fn prefix_mask(ranking: &[usize], k: usize) -> Mask {
    let mut mask = Mask::zeros(ranking.len());
    for &i in &ranking[..k] {
        mask.set(i, true);
    }
    mask
}

/// Number of features kept for a top-fraction selection: `max(1, floor(fraction * n))`.
pub fn top_fraction_count(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::arg(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    // the small slack absorbs products like 0.57 * 100 = 56.999...
    let k = (fraction * n as f64 + 1e-9).floor() as usize;
    Ok(k.clamp(1, n.max(1)))
}

/// Keeps the highest-scoring `max(1, floor(fraction * n))` features.
pub fn binarize_top_fraction(scores: &[f64], fraction: f64) -> Result<Attribution> {
    if scores.is_empty() {
        return Err(Error::arg("attribution scores are empty"));
    }
    let k = top_fraction_count(scores.len(), fraction)?;
    Attribution::top_k(scores.to_vec(), k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_max() {
        let a = binarize_top_fraction(&[0.9, 0.1, 0.5, 0.4], 0.25).unwrap();
        assert_eq!(a.k, 1);
        assert_eq!(a.mask.to_string(), "1000");
        assert_eq!(a.ranking, vec![0, 2, 3, 1]);
    }

    #[test]
    fn ties_take_lowest_indices() {
        let a = binarize_top_fraction(&[0.2; 4], 0.5).unwrap();
        assert_eq!(a.k, 2);
        assert_eq!(a.mask.to_string(), "1100");
        assert_eq!(a.ranking, vec![0, 1, 2, 3]);
    }

    #[test]
    fn image_patch_grid() {
        let scores: Vec<f64> = (0..196).map(|i| ((i * 37) % 101) as f64).collect();
        let a = binarize_top_fraction(&scores, 0.25).unwrap();
        assert_eq!(a.k, 49);
        assert_eq!(a.mask.count_ones(), 49);
    }

    #[test]
    fn errors() {
        assert!(binarize_top_fraction(&[], 0.5).is_err());
        assert!(binarize_top_fraction(&[1.0], 0.0).is_err());
        assert!(binarize_top_fraction(&[1.0], 1.5).is_err());
        assert!(binarize_top_fraction(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn popcount_matches_documented_k() {
        for n in 1..=64usize {
            let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64).collect();
            for &f in &[0.125, 0.25, 0.375, 0.5] {
                let a = binarize_top_fraction(&scores, f).unwrap();
                let expected = ((f * n as f64).floor() as usize).max(1);
                assert_eq!(a.k, expected, "n={n} f={f}");
                assert_eq!(a.mask.count_ones(), expected);
                let mut sorted = a.ranking.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
