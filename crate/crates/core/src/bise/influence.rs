use rand::Rng;
use serde::Serialize;

use crate::bise::indicator::{BooleanOracle, TableIndicator};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::rng::substream;

/// Sampled set influence `Inf_g(S) = 2 P[g(z) != g(z')]`, where `z` is
/// uniform and `z'` re-draws the coordinates in `S`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceEstimate {
    pub set: Mask,
    pub inf_hat: f64,
    pub flips: usize,
    pub m: usize,
    pub seed: u64,
}

impl InfluenceEstimate {
    /// `Inf/2`, the flip frequency, in `[0, 1]`.
    pub fn phi(&self) -> f64 {
        self.inf_hat / 2.0
    }
}

fn draw_pair(n: usize, set: &Mask, seed: u64, index: u64) -> (Mask, Mask) {
    let mut rng = substream(seed, index);
    let z: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let mut z2 = z.clone();
    for i in set.iter_ones() {
        z2[i] = rng.random_bool(0.5);
    }
    (Mask::from_bools(&z), Mask::from_bools(&z2))
}

/// Pair `i` uses its own stream `(seed, i)`, so estimates are reproducible
/// and prefix-consistent in `m`.
pub fn influence_estimate<G: BooleanOracle + ?Sized>(g: &G, set: &Mask, m: usize, seed: u64) -> Result<InfluenceEstimate> {
    if m == 0 {
        return Err(Error::arg("influence needs at least one sample pair"));
    }
    if set.len() != g.n() {
        return Err(Error::Dimension {
            expected: g.n(),
            got: set.len(),
        });
    }
    let flips = if set.count_ones() == 0 {
        0
    } else {
        let mut masks = Vec::with_capacity(2 * m);
        for i in 0..m {
            let (z, z2) = draw_pair(g.n(), set, seed, i as u64);
            masks.push(z);
            masks.push(z2);
        }
        let values = g.eval_batch(&masks)?;
        values.chunks_exact(2).filter(|p| p[0] != p[1]).count()
    };
    Ok(InfluenceEstimate {
        set: set.clone(),
        inf_hat: 2.0 * flips as f64 / m as f64,
        flips,
        m,
        seed,
    })
}

/// Exact `Inf_g(S)` by enumeration. For each assignment of the coordinates
/// outside `S`, with `c` of the `2^{|S|}` completions true, the flip
/// probability is `2 c (2^{|S|} - c) / 4^{|S|}`.
pub fn exact_influence(g: &TableIndicator, set: &Mask) -> Result<f64> {
    let n = g.n();
    if set.len() != n {
        return Err(Error::Dimension { expected: n, got: set.len() });
    }
    let s = set.to_index().expect("dense tables are narrow") as usize;
    let outside = ((1usize << n) - 1) & !s;
    let width = (1u64 << set.count_ones()) as f64;
    let mut total = 0.0;
    let mut o = 0usize;
    loop {
        let mut ones = 0u64;
        let mut u = 0usize;
        loop {
            ones += g.at(o | u) as u64;
            if u == s {
                break;
            }
            u = u.wrapping_sub(s) & s;
        }
        let c = ones as f64;
        total += 2.0 * c * (width - c) / (width * width);
        if o == outside {
            break;
        }
        o = o.wrapping_sub(outside) & outside;
    }
    let outside_count = (1u64 << (n - set.count_ones())) as f64;
    Ok(2.0 * total / outside_count)
}
