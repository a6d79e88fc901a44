//! Additive perturbations of an explanation mask, and local shuffles of a
//! feature ranking.
//!
//! The additive set `Δ_r(α)` holds every mask that keeps all of `α` plus at
//! most `r` of its `d = n - |α|` free slots, so `|Δ_r| = Σ_{i≤r} C(d, i)`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::rng::gumbel;

/// Default limit on the number of items an exhaustive routine may visit.
pub const DEFAULT_ENUM_CAP: u64 = 1 << 22;

/// Environment variable overriding [`DEFAULT_ENUM_CAP`].
pub const ENUM_CAP_ENV: &str = "STABCERT_ENUM_CAP";

/// The enumeration cap, honoring `STABCERT_ENUM_CAP` when it parses.
pub fn enumeration_cap() -> u64 {
    std::env::var(ENUM_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUM_CAP)
}

fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `|Δ_r|` for `n` features of which `a` are kept: `Σ_{i=0}^{min(r, n-a)} C(n-a, i)`.
pub fn delta_size(n: usize, a: usize, r: usize) -> Result<BigUint> {
    if a > n {
        return Err(Error::arg(format!("mask size {a} exceeds feature count {n}")));
    }
    let d = n - a;
    Ok((0..=r.min(d)).map(|i| binomial(d, i)).sum())
}

/// `Δ_r(α)` with the radius clamped to the number of free slots.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpace {
    base: Mask,
    requested_radius: usize,
    radius: usize,
    free: Vec<usize>,
}

impl PerturbationSpace {
    pub fn new(base: Mask, radius: usize) -> Self {
        let free: Vec<usize> = base.iter_zeros().collect();
        PerturbationSpace {
            requested_radius: radius,
            radius: radius.min(free.len()),
            base,
            free,
        }
    }

    pub fn base(&self) -> &Mask {
        &self.base
    }

    /// Radius actually used, `min(r, d)`.
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn requested_radius(&self) -> usize {
        self.requested_radius
    }

    pub fn is_clamped(&self) -> bool {
        self.radius != self.requested_radius
    }

    pub fn free_slots(&self) -> &[usize] {
        &self.free
    }

    /// Number of free slots, `d = n - |α|`.
    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn size(&self) -> BigUint {
        (0..=self.radius).map(|i| binomial(self.free.len(), i)).sum()
    }

    /// Number of members that add exactly `k` features.
    pub fn layer_size(&self, k: usize) -> BigUint {
        if k > self.radius {
            BigUint::zero()
        } else {
            binomial(self.free.len(), k)
        }
    }

    /// `ln C(d, k)` for `k = 0..=r`, accumulated term by term.
    pub fn log_layer_weights(&self) -> Vec<f64> {
        let d = self.free.len() as f64;
        let mut out = Vec::with_capacity(self.radius + 1);
        let mut acc = 0.0;
        out.push(acc);
        for k in 1..=self.radius {
            acc += (d - k as f64 + 1.0).ln() - (k as f64).ln();
            out.push(acc);
        }
        out
    }

    /// Draws a member of `Δ_r(α)` uniformly at random.
    ///
    /// The perturbation size `k` is drawn with weight `C(d, k)` by Gumbel-max
    /// over the log weights, then `k` free slots are chosen uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Mask {
        let k = self.sample_size(rng);
        self.sample_with_size(k, rng)
    }

    fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.radius == 0 {
            return 0;
        }
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (k, w) in self.log_layer_weights().into_iter().enumerate() {
            let score = w + gumbel(rng);
            if score > best_score {
                best_score = score;
                best = k;
            }
        }
        best
    }

    /// Adds exactly `k` uniformly chosen free slots to the base mask.
    pub fn sample_with_size<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Mask {
        assert!(k <= self.free.len(), "cannot add {k} of {} free slots", self.free.len());
        let mut out = self.base.clone();
        if k == 0 {
            return out;
        }
        // partial Fisher-Yates over the free-slot list
        let mut slots = self.free.clone();
        for i in 0..k {
            let j = rng.random_range(i..slots.len());
            slots.swap(i, j);
            out.set(slots[i], true);
        }
        out
    }

    /// Every member, ordered by perturbation size and then lexicographically
    /// by the chosen free-slot positions.
    pub fn enumerate(&self, cap: u64) -> Result<Enumeration<'_>> {
        let size = self.size();
        if size > BigUint::from(cap) {
            return Err(Error::Resource {
                what: "enumerating the perturbation set".into(),
                size: size.to_string(),
                cap,
            });
        }
        Ok(Enumeration {
            space: self,
            k: 0,
            combo: Vec::new(),
            done: false,
            remaining: size.to_usize().unwrap_or(usize::MAX),
        })
    }
}

/// Iterator over `Δ_r(α)`; see [`PerturbationSpace::enumerate`].
pub struct Enumeration<'a> {
    space: &'a PerturbationSpace,
    k: usize,
    combo: Vec<usize>,
    done: bool,
    remaining: usize,
}

impl Enumeration<'_> {
    fn advance(&mut self) {
        let d = self.space.free.len();
        let k = self.k;
        // next k-combination of 0..d in lexicographic order
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.combo[i] < d - k + i {
                self.combo[i] += 1;
                for j in i + 1..k {
                    self.combo[j] = self.combo[j - 1] + 1;
                }
                return;
            }
        }
        self.k += 1;
        if self.k > self.space.radius {
            self.done = true;
        } else {
            self.combo = (0..self.k).collect();
        }
    }
}

impl Iterator for Enumeration<'_> {
    type Item = Mask;

    fn next(&mut self) -> Option<Mask> {
        if self.done {
            return None;
        }
        let mut m = self.space.base.clone();
        for &c in &self.combo {
            m.set(self.space.free[c], true);
        }
        self.advance();
        self.remaining = self.remaining.saturating_sub(1);
        Some(m)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

/// A local shuffle of a feature ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "size", rename_all = "snake_case")]
pub enum RankingPerturbation {
    /// Uniformly shuffle one contiguous window of `size` positions, placed
    /// uniformly at random.
    Window(usize),
    /// Swap `size` disjoint, uniformly chosen pairs of positions.
    Swap(usize),
}

impl RankingPerturbation {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            RankingPerturbation::Window(0) => Err(Error::arg("window size must be at least 1")),
            RankingPerturbation::Window(sz) if sz > n => {
                Err(Error::arg(format!("window size {sz} exceeds ranking length {n}")))
            }
            RankingPerturbation::Swap(sz) if 2 * sz > n => {
                Err(Error::arg(format!("{sz} disjoint swaps need {} positions, have {n}", 2 * sz)))
            }
            _ => Ok(()),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, RankingPerturbation::Window(1) | RankingPerturbation::Swap(0))
    }
}

pub fn perturb_ranking<R: Rng + ?Sized>(
    ranking: &[usize],
    perturbation: RankingPerturbation,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = ranking.len();
    perturbation.validate(n)?;
    let mut out = ranking.to_vec();
    match perturbation {
        RankingPerturbation::Window(sz) => {
            let start = rng.random_range(0..=n - sz);
            let window = &mut out[start..start + sz];
            for i in (1..window.len()).rev() {
                let j = rng.random_range(0..=i);
                window.swap(i, j);
            }
        }
        RankingPerturbation::Swap(sz) => {
            let mut positions: Vec<usize> = (0..n).collect();
            for i in 0..2 * sz {
                let j = rng.random_range(i..n);
                positions.swap(i, j);
            }
            for pair in positions[..2 * sz].chunks_exact(2) {
                out.swap(pair[0], pair[1]);
            }
        }
    }
    Ok(out)
}
