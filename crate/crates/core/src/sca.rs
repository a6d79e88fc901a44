//! Sampling-based stability certification.
//!
//! The stability rate `τ_r` is the probability that a uniform member of
//! `Δ_r(α)` keeps the prediction of `f(x ⊙ α)`. It is estimated by the
//! fraction of `N` i.i.d. uniform draws that do. Hoeffding's inequality
//! sizes `N` for a two-sided soft certificate; for a hard certificate, a run
//! with no disagreement among `N ≥ ln δ / ln(1-ε)` draws rules out
//! `τ_r < 1 - ε` at confidence `1 - δ`.
//!
//! Draw `i` always comes from random stream `(seed, i)`, so reports are
//! identical no matter how evaluation is spread across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::model::{
    apply_mask, check_input, evaluate_all, predicts_same, InputVector, Model, ModelOutput,
    PredictionRelation,
};
use crate::perturb::{enumeration_cap, PerturbationSpace};
use crate::rng::{derive_seed, substream, StreamRng};

/// Error tolerance `ε` and failure probability `δ`, both in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub epsilon: f64,
    pub delta: f64,
}

impl Tolerance {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        for (name, v) in [("epsilon", epsilon), ("delta", delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::arg(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(Tolerance { epsilon, delta })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            epsilon: 0.1,
            delta: 0.1,
        }
    }
}

/// `ceil(ln(2/δ) / (2ε²))`.
pub fn soft_sample_size(epsilon: f64, delta: f64) -> Result<usize> {
    let t = Tolerance::new(epsilon, delta)?;
    Ok(((2.0 / t.delta).ln() / (2.0 * t.epsilon * t.epsilon)).ceil() as usize)
}

/// `ceil(ln δ / ln(1-ε))`.
pub fn hard_sample_size(epsilon: f64, delta: f64) -> Result<usize> {
    let t = Tolerance::new(epsilon, delta)?;
    Ok((t.delta.ln() / (1.0 - t.epsilon).ln()).ceil().max(1.0) as usize)
}

/// Per-size draws for the min-over-sizes estimator, `ceil(ln(r/δ) / (2ε²))`.
pub fn per_k_sample_size(epsilon: f64, delta: f64, radius: usize) -> Result<usize> {
    let t = Tolerance::new(epsilon, delta)?;
    if radius == 0 {
        return Ok(0);
    }
    let n = (radius as f64 / t.delta).ln() / (2.0 * t.epsilon * t.epsilon);
    Ok(n.ceil().max(1.0) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Soft,
    Hard,
    PerKSoft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotCertified,
    EstimateOnly,
}

/// Estimate for the perturbations adding exactly `k` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEstimate {
    pub k: usize,
    pub samples: usize,
    pub stable: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub kind: CertificateKind,
    pub radius: usize,
    pub effective_radius: usize,
    pub tau_hat: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Perturbed evaluations made (excluding the reference `f(x ⊙ α)`).
    pub samples: usize,
    /// Draws that kept the prediction; for the per-size estimator, those of
    /// the minimizing size.
    pub stable: usize,
    pub seed: u64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_k: Vec<LayerEstimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn reference<M: Model + ?Sized>(
    model: &M,
    x: &InputVector,
    alpha: &Mask,
    rel: PredictionRelation,
) -> Result<ModelOutput> {
    check_input(model, x)?;
    if alpha.len() != x.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: alpha.len(),
        });
    }
    rel.validate(model.n_outputs())?;
    model.evaluate(&apply_mask(x, alpha)?)
}

/// Counts how many masks keep the reference prediction.
fn count_stable<M: Model + ?Sized>(
    model: &M,
    x: &InputVector,
    masks: &[Mask],
    base: &ModelOutput,
    rel: PredictionRelation,
) -> Result<usize> {
    let inputs = masks
        .iter()
        .map(|m| apply_mask(x, m))
        .collect::<Result<Vec<_>>>()?;
    let outputs = evaluate_all(model, &inputs)?;
    let mut stable = 0;
    for (i, out) in outputs.iter().enumerate() {
        if predicts_same(out, base, rel).map_err(|e| e.at_sample(i))? {
            stable += 1;
        }
    }
    Ok(stable)
}

fn draw_masks(count: usize, seed: u64, draw: impl Fn(&mut StreamRng) -> Mask) -> Vec<Mask> {
    (0..count)
        .map(|i| draw(&mut substream(seed, i as u64)))
        .collect()
}

fn clamp_note(space: &PerturbationSpace) -> Vec<String> {
    if space.is_clamped() {
        vec![format!(
            "radius {} exceeds the {} free slots; clamped to {}",
            space.requested_radius(),
            space.free_count(),
            space.radius()
        )]
    } else {
        Vec::new()
    }
}

/// Soft-stability estimate with `N = soft_sample_size(ε, δ)` uniform draws
/// from `Δ_r(α)`. With probability at least `1 - δ`, `|τ̂_r - τ_r| ≤ ε`.
pub fn estimate_stability<M: Model + ?Sized>(
    model: &M,
    x: &InputVector,
    alpha: &Mask,
    radius: usize,
    rel: PredictionRelation,
    tol: Tolerance,
    seed: u64,
) -> Result<CertificateReport> {
    let n = soft_sample_size(tol.epsilon, tol.delta)?;
    uniform_run(model, x, alpha, radius, rel, tol, seed, n, CertificateKind::Soft)
}

/// Hard-stability screen with `N = hard_sample_size(ε, δ)` draws. Certified
/// iff every draw keeps the prediction; then, with probability at least
/// `1 - δ`, a uniform member of `Δ_r(α)` breaks the prediction with
/// probability at most `ε`.
pub fn certify_hard<M: Model + ?Sized>(
    model: &M,
    x: &InputVector,
    alpha: &Mask,
    radius: usize,
    rel: PredictionRelation,
    tol: Tolerance,
    seed: u64,
) -> Result<CertificateReport> {
    let n = hard_sample_size(tol.epsilon, tol.delta)?;
    uniform_run(model, x, alpha, radius, rel, tol, seed, n, CertificateKind::Hard)
}

#[allow(clippy::too_many_arguments)]
fn uniform_run<M: Model + ?Sized>(
    model: &M,
    x: &InputVector,
    alpha: &Mask,
    radius: usize,
    rel: PredictionRelation,
    tol: Tolerance,
    seed: u64,
    samples: usize,
    kind: CertificateKind,
) -> Result<CertificateReport> {
    let base = reference(model, x, alpha, rel)?;
    let space = PerturbationSpace::new(alpha.clone(), radius);
    let masks = draw_masks(samples, seed, |rng| space.sample(rng));
    let stable = count_stable(model, x, &masks, &base, rel)?;
    let tau_hat = stable as f64 / samples as f64;
    let verdict = match kind {
        CertificateKind::Hard if stable == samples => Verdict::Certified,
        CertificateKind::Hard => Verdict::NotCertified,
        _ => Verdict::EstimateOnly,
    };
    Ok(CertificateReport {
        kind,
        radius,
        effective_radius: space.radius(),
        tau_hat,
        epsilon: tol.epsilon,
        delta: tol.delta,
        samples,
        stable,
        seed,
        verdict,
        per_k: Vec::new(),
        notes: clamp_note(&space),
    })
}

/// The conservative estimator `min_k μ̂_k`, where `μ̂_k` is the stability
/// of perturbations adding exactly `k` features, `k = 1..=r`.
///
/// Each size gets `ceil(ln(r/δ) / (2ε²))` draws, so by a union bound the
/// minimum satisfies `τ ≥ τ̂ - ε` with probability at least `1 - δ`.
pub fn estimate_stability_per_k<M: Model + ?Sized>(
    model: &M,
    x: &InputVector,
    alpha: &Mask,
    radius: usize,
    rel: PredictionRelation,
    tol: Tolerance,
    seed: u64,
) -> Result<CertificateReport> {
    let base = reference(model, x, alpha, rel)?;
    let space = PerturbationSpace::new(alpha.clone(), radius);
    let per_size = per_k_sample_size(tol.epsilon, tol.delta, radius)?;
    let mut notes = Vec::new();
    if radius > space.radius() {
        notes.push(format!(
            "sizes {}..={} exceed the {} free slots and were skipped",
            space.radius() + 1,
            radius,
            space.free_count()
        ));
    }
    let mut per_k = Vec::with_capacity(space.radius());
    for k in 1..=space.radius() {
        let layer_seed = derive_seed(seed, k as u64);
        let masks = draw_masks(per_size, layer_seed, |rng| space.sample_with_size(k, rng));
        let stable = count_stable(model, x, &masks, &base, rel)?;
        per_k.push(LayerEstimate {
            k,
            samples: per_size,
            stable,
            mean: stable as f64 / per_size as f64,
        });
    }
    let (tau_hat, stable) = per_k
        .iter()
        .fold((1.0, per_size), |(best, st), l| if l.mean < best { (l.mean, l.stable) } else { (best, st) });
    Ok(CertificateReport {
        kind: CertificateKind::PerKSoft,
        radius,
        effective_radius: space.radius(),
        tau_hat,
        epsilon: tol.epsilon,
        delta: tol.delta,
        samples: per_size * per_k.len(),
        stable: if per_k.is_empty() { 0 } else { stable },
        seed,
        verdict: Verdict::EstimateOnly,
        per_k,
        notes,
    })
}

const EXACT_CHUNK: usize = 4096;

/// Exact `τ_r` by evaluating every member of `Δ_r(α)`.
pub fn exact_stability<M: Model + ?Sized>(
    model: &M,
    x: &InputVector,
    alpha: &Mask,
    radius: usize,
    rel: PredictionRelation,
) -> Result<f64> {
    let layers = exact_stability_by_size_with_cap(model, x, alpha, radius, rel, enumeration_cap())?;
    let (stable, total) = layers
        .iter()
        .fold((0usize, 0usize), |(s, t), l| (s + l.stable, t + l.samples));
    Ok(stable as f64 / total as f64)
}

/// Exact stability of each perturbation size `k = 0..=r`, by enumeration.
pub fn exact_stability_by_size<M: Model + ?Sized>(
    model: &M,
    x: &InputVector,
    alpha: &Mask,
    radius: usize,
    rel: PredictionRelation,
) -> Result<Vec<LayerEstimate>> {
    exact_stability_by_size_with_cap(model, x, alpha, radius, rel, enumeration_cap())
}

pub fn exact_stability_by_size_with_cap<M: Model + ?Sized>(
    model: &M,
    x: &InputVector,
    alpha: &Mask,
    radius: usize,
    rel: PredictionRelation,
    cap: u64,
) -> Result<Vec<LayerEstimate>> {
    let base = reference(model, x, alpha, rel)?;
    let space = PerturbationSpace::new(alpha.clone(), radius);
    let base_count = alpha.count_ones();
    let mut layers: Vec<LayerEstimate> = (0..=space.radius())
        .map(|k| LayerEstimate {
            k,
            samples: 0,
            stable: 0,
            mean: 0.0,
        })
        .collect();
    let mut members = space.enumerate(cap)?;
    loop {
        let chunk: Vec<Mask> = members.by_ref().take(EXACT_CHUNK).collect();
        if chunk.is_empty() {
            break;
        }
        let inputs = chunk
            .iter()
            .map(|m| apply_mask(x, m))
            .collect::<Result<Vec<_>>>()?;
        let outputs = evaluate_all(model, &inputs)?;
        for (mask, out) in chunk.iter().zip(&outputs) {
            let layer = &mut layers[mask.count_ones() - base_count];
            layer.samples += 1;
            if predicts_same(out, &base, rel)? {
                layer.stable += 1;
            }
        }
    }
    for l in &mut layers {
        l.mean = l.stable as f64 / l.samples as f64;
    }
    Ok(layers)
}

/// One soft report per radius. Radius `r` draws from stream
/// `derive_seed(seed, r)`; the curve is not smoothed or forced monotone.
pub fn stability_curve<M: Model + ?Sized>(
    model: &M,
    x: &InputVector,
    alpha: &Mask,
    radii: &[usize],
    rel: PredictionRelation,
    tol: Tolerance,
    seed: u64,
) -> Result<Vec<CertificateReport>> {
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("radii must be strictly increasing"));
    }
    radii
        .iter()
        .map(|&r| estimate_stability(model, x, alpha, r, rel, tol, derive_seed(seed, r as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Conjunction, Constant, LookupTable};

    #[test]
    fn sample_sizes() {
        assert_eq!(soft_sample_size(0.1, 0.1).unwrap(), 150);
        assert_eq!(soft_sample_size(0.05, 0.1).unwrap(), 600);
        assert_eq!(soft_sample_size(0.1, 0.2).unwrap(), 116);
        assert_eq!(hard_sample_size(0.1, 0.1).unwrap(), 22);
        assert_eq!(hard_sample_size(0.5, 0.5).unwrap(), 1);
        assert_eq!(hard_sample_size(0.01, 0.05).unwrap(), 299);
        assert_eq!(per_k_sample_size(0.1, 0.1, 1).unwrap(), 116);
        for (e, d) in [(0.0, 0.1), (0.1, 1.0), (-0.1, 0.5), (0.5, f64::NAN)] {
            assert!(soft_sample_size(e, d).is_err());
            assert!(hard_sample_size(e, d).is_err());
        }
    }

    fn ones(n: usize) -> InputVector {
        InputVector(vec![1.0; n])
    }

    #[test]
    fn constant_model_is_fully_stable() {
        let f = Constant::new(8, vec![0.3, 0.7]).unwrap();
        let alpha = Mask::from_indices(8, [0, 1]).unwrap();
        for r in [0, 2, 6, 20] {
            let rep = estimate_stability(&f, &ones(8), &alpha, r, PredictionRelation::ArgmaxEqual, Tolerance::default(), 1).unwrap();
            assert_eq!(rep.tau_hat, 1.0);
            assert_eq!(rep.samples, 150);
            let hard = certify_hard(&f, &ones(8), &alpha, r, PredictionRelation::ArgmaxEqual, Tolerance::default(), 1).unwrap();
            assert_eq!(hard.verdict, Verdict::Certified);
        }
    }

    #[test]
    fn zero_radius_is_stable() {
        let f = LookupTable::random(6, 2, 3).unwrap();
        let alpha = Mask::from_indices(6, [2]).unwrap();
        let rep = estimate_stability(&f, &ones(6), &alpha, 0, PredictionRelation::ArgmaxEqual, Tolerance::default(), 9).unwrap();
        assert_eq!(rep.tau_hat, 1.0);
        assert_eq!(exact_stability(&f, &ones(6), &alpha, 0, PredictionRelation::ArgmaxEqual).unwrap(), 1.0);
    }

    #[test]
    fn clamped_radius_is_reported() {
        let f = Constant::new(4, vec![1.0, 0.0]).unwrap();
        let alpha: Mask = "1100".parse().unwrap();
        let rep = estimate_stability(&f, &ones(4), &alpha, 5, PredictionRelation::ArgmaxEqual, Tolerance::default(), 0).unwrap();
        assert_eq!(rep.radius, 5);
        assert_eq!(rep.effective_radius, 2);
        assert_eq!(rep.notes.len(), 1);
    }

    #[test]
    fn one_flipping_slot() {
        // adding slot 4 flips; four free slots, radius one: 1 of 5 members flips
        let f = Conjunction::new(6, vec![0, 4]).unwrap();
        let alpha = Mask::from_indices(6, [0, 1]).unwrap();
        let tau = exact_stability(&f, &ones(6), &alpha, 1, PredictionRelation::ArgmaxEqual).unwrap();
        assert!((tau - 0.8).abs() < 1e-15);
    }

    #[test]
    fn exact_is_order_independent() {
        let f = LookupTable::random(9, 3, 17).unwrap();
        let x = ones(9);
        let alpha = Mask::from_indices(9, [1, 5]).unwrap();
        let space = PerturbationSpace::new(alpha.clone(), 7);
        let base = f.evaluate(&apply_mask(&x, &alpha).unwrap()).unwrap();
        let mut members: Vec<Mask> = space.enumerate(1 << 20).unwrap().collect();
        let asc = count_stable(&f, &x, &members, &base, PredictionRelation::ArgmaxEqual).unwrap();
        members.reverse();
        let desc = count_stable(&f, &x, &members, &base, PredictionRelation::ArgmaxEqual).unwrap();
        assert_eq!(asc, desc);
        let tau = exact_stability(&f, &x, &alpha, 7, PredictionRelation::ArgmaxEqual).unwrap();
        assert_eq!(tau.to_bits(), (asc as f64 / members.len() as f64).to_bits());
    }

    #[test]
    fn reports_are_deterministic() {
        let f = LookupTable::random(10, 2, 5).unwrap();
        let alpha = Mask::from_indices(10, [0, 3, 7]).unwrap();
        let run = || {
            serde_json::to_string(
                &estimate_stability(&f, &ones(10), &alpha, 3, PredictionRelation::ArgmaxEqual, Tolerance::default(), 77).unwrap(),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn per_k_reduces_to_single_size_at_radius_one() {
        let f = LookupTable::random(8, 2, 8).unwrap();
        let alpha = Mask::from_indices(8, [0, 1, 2]).unwrap();
        let rep = estimate_stability_per_k(&f, &ones(8), &alpha, 1, PredictionRelation::ArgmaxEqual, Tolerance::default(), 4).unwrap();
        assert_eq!(rep.per_k.len(), 1);
        assert_eq!(rep.per_k[0].k, 1);
        assert_eq!(rep.samples, per_k_sample_size(0.1, 0.1, 1).unwrap());
        assert_eq!(rep.tau_hat, rep.per_k[0].mean);
    }

    #[test]
    fn per_k_skips_unreachable_sizes() {
        let f = Constant::new(4, vec![0.1, 0.9]).unwrap();
        let alpha: Mask = "1110".parse().unwrap();
        let rep = estimate_stability_per_k(&f, &ones(4), &alpha, 3, PredictionRelation::ArgmaxEqual, Tolerance::default(), 4).unwrap();
        assert_eq!(rep.per_k.len(), 1);
        assert_eq!(rep.tau_hat, 1.0);
        assert!(!rep.notes.is_empty());
    }

    #[test]
    fn curve_requires_increasing_radii() {
        let f = Constant::new(4, vec![0.1, 0.9]).unwrap();
        let alpha: Mask = "1000".parse().unwrap();
        assert!(stability_curve(&f, &ones(4), &alpha, &[1, 1], PredictionRelation::ArgmaxEqual, Tolerance::default(), 0).is_err());
        let curve = stability_curve(&f, &ones(4), &alpha, &[0, 1, 2, 3], PredictionRelation::ArgmaxEqual, Tolerance::default(), 0).unwrap();
        assert!(curve.iter().all(|r| r.tau_hat == 1.0));
    }

    #[test]
    fn errors_carry_the_sample_index() {
        struct Failing;
        impl Model for Failing {
            fn n_features(&self) -> usize { 3 }
            fn n_outputs(&self) -> usize { 2 }
            fn evaluate(&self, x: &InputVector) -> Result<ModelOutput> {
                if x.values()[2] != 0.0 { Err(Error::Model("boom".into())) } else { Ok(ModelOutput(vec![1.0, 0.0])) }
            }
        }
        let alpha: Mask = "100".parse().unwrap();
        let err = exact_stability(&Failing, &ones(3), &alpha, 2, PredictionRelation::ArgmaxEqual).unwrap_err();
        assert!(matches!(err, Error::Sample { .. }), "{err}");
    }
}
