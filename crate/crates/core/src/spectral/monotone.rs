use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::perturb::enumeration_cap;
use crate::spectral::boolean::DenseBooleanFunction;
use crate::spectral::fourier::check_unit;
use crate::spectral::transform::{scale_by_degree, subset_differences, subset_sums};

/// Coefficients `~h(T)` in the inclusion basis `1_T(α) = 1[T ⊆ α]`, so that
/// `h(α) = Σ_{T ⊆ α} ~h(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneSpectrum {
    n: usize,
    coeffs: Vec<f64>,
}

impl MonotoneSpectrum {
    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        let f = DenseBooleanFunction::new(n, coeffs)?;
        Ok(MonotoneSpectrum {
            n,
            coeffs: f.into_table(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, subset: usize) -> f64 {
        self.coeffs[subset]
    }

    pub fn to_csv(&self) -> String {
        crate::spectral::fourier::spectrum_csv(&self.coeffs)
    }
}

pub fn monotone_transform(h: &DenseBooleanFunction) -> MonotoneSpectrum {
    let mut coeffs = h.table().to_vec();
    subset_differences(&mut coeffs);
    MonotoneSpectrum { n: h.n(), coeffs }
}

pub fn inverse_monotone(spec: &MonotoneSpectrum) -> DenseBooleanFunction {
    let mut table = spec.coeffs.clone();
    subset_sums(&mut table);
    DenseBooleanFunction::new(spec.n, table).expect("transform preserves shape")
}

/// Spectrum of `M_λ h`: each `~h(T)` is multiplied by `λ^{|T|}`.
pub fn smooth_monotone(spec: &MonotoneSpectrum, lambda: f64) -> Result<MonotoneSpectrum> {
    check_unit("lambda", lambda)?;
    let mut coeffs = spec.coeffs.clone();
    scale_by_degree(&mut coeffs, lambda);
    Ok(MonotoneSpectrum { n: spec.n, coeffs })
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k.min(n - k)).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn base_index(spec_n: usize, alpha: &Mask) -> Result<usize> {
    if alpha.len() != spec_n {
        return Err(Error::Dimension {
            expected: spec_n,
            got: alpha.len(),
        });
    }
    Ok(alpha.to_index().expect("n is at most the dense cap") as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityBound {
    pub radius: usize,
    pub gamma: f64,
    /// Expected coefficient mass reachable from a uniform member of `Δ_r(α)`.
    pub q: f64,
    /// `max(0, 1 - q/γ)`.
    pub bound: f64,
    /// `q > γ`, so the raw bound was negative.
    pub vacuous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothedStabilityBound {
    pub lambda: f64,
    pub base: StabilityBound,
    pub smoothed: StabilityBound,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::arg(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// Lower bound on the soft stability rate `τ_r` of `h` at `α` under the
/// scalar relation `|h(β) - h(α)| <= γ`.
///
/// For `β ⊇ α`, `h(β) - h(α) = Σ ~h(T)` over the `T ⊆ β` with `T ⊄ α`,
/// i.e. exactly those `T` whose outside part `U = T \ α` is non-empty and
/// contained in `β \ α`. Taking expectations over `β ~ Δ_r(α)` gives
/// `E|h(β) - h(α)| <= Q = Σ_T |~h(T)| w(|U|)` with
/// `w(k) = Σ_{j=k}^{r} C(d-k, j-k) / |Δ_r|`, and Markov's inequality gives
/// `τ_r >= 1 - Q/γ`. When every `T` is either inside `α` or disjoint from
/// it, this is the sum over `T ⊆ [n] \ α` with `1 <= |T| <= r`.
pub fn stability_lower_bound(spec: &MonotoneSpectrum, alpha: &Mask, radius: usize, gamma: f64) -> Result<StabilityBound> {
    check_gamma(gamma)?;
    if radius == 0 {
        return Err(Error::arg("radius must be at least 1"));
    }
    let a = base_index(spec.n, alpha)?;
    let d = spec.n - alpha.count_ones();
    let r = radius.min(d);
    let total: f64 = (0..=r).map(|i| binomial_f64(d, i)).sum();
    let weights: Vec<f64> = (0..=r)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                (k..=r).map(|j| binomial_f64(d - k, j - k)).sum::<f64>() / total
            }
        })
        .collect();
    let q: f64 = spec
        .coeffs
        .iter()
        .enumerate()
        .filter_map(|(t, c)| {
            let outside = (t & !a).count_ones() as usize;
            (outside >= 1 && outside <= r).then(|| c.abs() * weights[outside])
        })
        .sum();
    let raw = 1.0 - q / gamma;
    Ok(StabilityBound {
        radius,
        gamma,
        q,
        bound: raw.max(0.0),
        vacuous: raw < 0.0,
    })
}

/// The same bound for `M_λ h`, computed on the `λ^{|T|}`-scaled spectrum.
/// Every contributing `T` has `|T| >= 1`, so `Q_smoothed <= λ Q`.
pub fn smoothed_stability_bound(
    spec: &MonotoneSpectrum,
    alpha: &Mask,
    radius: usize,
    gamma: f64,
    lambda: f64,
) -> Result<SmoothedStabilityBound> {
    let base = stability_lower_bound(spec, alpha, radius, gamma)?;
    let smoothed = stability_lower_bound(&smooth_monotone(spec, lambda)?, alpha, radius, gamma)?;
    Ok(SmoothedStabilityBound {
        lambda,
        base,
        smoothed,
    })
}

/// Largest `r` such that `|Σ_{T ⊆ β, T ⊄ α} ~h(T)| <= γ` for every `β ⊇ α`
/// with `|β \ α| <= r`. Returns `d = n - |α|` when no superset violates.
///
/// The sum for each `β` is taken directly over its submasks, so the work is
/// `Σ_{β ⊇ α} 2^{|β|}`; this is checked against the enumeration cap.
pub fn hard_radius_monotone(spec: &MonotoneSpectrum, alpha: &Mask, gamma: f64) -> Result<usize> {
    hard_radius_monotone_with_cap(spec, alpha, gamma, enumeration_cap())
}

pub fn hard_radius_monotone_with_cap(spec: &MonotoneSpectrum, alpha: &Mask, gamma: f64, cap: u64) -> Result<usize> {
    check_gamma(gamma)?;
    let a = base_index(spec.n, alpha)?;
    let na = alpha.count_ones() as u32;
    let d = spec.n as u32 - na;
    // Σ_{β ⊇ α} 2^{|β|} = 2^{|α|} 3^d
    let work = 3f64.powi(d as i32) * 2f64.powi(na as i32);
    if work > cap as f64 {
        return Err(Error::Resource {
            what: "superset enumeration".into(),
            size: format!("{work:.0} terms"),
            cap,
        });
    }
    let full = (1usize << spec.n) - 1;
    let free = full & !a;
    let mut first_violation: Option<usize> = None;
    // iterate over the subsets of the free slots
    let mut u = 0usize;
    loop {
        let size = u.count_ones() as usize;
        if first_violation.is_none_or(|v| size < v) {
            let beta = a | u;
            let mut diff = 0.0;
            let mut t = beta;
            loop {
                if t & !a != 0 {
                    diff += spec.coeffs[t];
                }
                if t == 0 {
                    break;
                }
                t = (t - 1) & beta;
            }
            if diff.abs() > gamma {
                first_violation = Some(size);
            }
        }
        if u == free {
            break;
        }
        u = (u.wrapping_sub(free)) & free;
    }
    Ok(match first_violation {
        Some(k) => k - 1,
        None => d as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn and2() -> DenseBooleanFunction {
        DenseBooleanFunction::new(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn and_is_single_indicator() {
        let spec = monotone_transform(&and2());
        assert_eq!(spec.coeffs(), &[0.0, 0.0, 0.0, 1.0]);
        let s = smooth_monotone(&spec, 0.3).unwrap();
        assert!((s.coeff(3) - 0.09).abs() < 1e-15);
    }

    #[test]
    fn empty_coefficient_is_value_at_zero() {
        let h = DenseBooleanFunction::random_unit(10, 6).unwrap();
        let spec = monotone_transform(&h);
        assert_eq!(spec.coeff(0), h.at(0));
        assert!(inverse_monotone(&spec).max_abs_diff(&h) < 1e-12);
        assert_eq!(smooth_monotone(&spec, 1.0).unwrap(), spec);
        assert_eq!(smooth_monotone(&spec, 0.4).unwrap().coeff(0), spec.coeff(0));
    }

    #[test]
    fn constant_function_bounds() {
        let h = DenseBooleanFunction::constant(6, 0.3).unwrap();
        let spec = monotone_transform(&h);
        let alpha = Mask::from_index(6, 0b11);
        let b = stability_lower_bound(&spec, &alpha, 2, 0.4).unwrap();
        assert_eq!((b.q, b.bound, b.vacuous), (0.0, 1.0, false));
        assert_eq!(hard_radius_monotone(&spec, &alpha, 0.4).unwrap(), 4);
    }

    #[test]
    fn high_degree_mass_is_invisible_to_small_radius() {
        let mut coeffs = vec![0.0; 64];
        coeffs[0b111100] = 20.0;
        let spec = MonotoneSpectrum::new(6, coeffs).unwrap();
        let alpha = Mask::from_index(6, 0b11);
        assert_eq!(stability_lower_bound(&spec, &alpha, 3, 0.4).unwrap().q, 0.0);
        assert!(stability_lower_bound(&spec, &alpha, 4, 0.4).unwrap().vacuous);
    }

    #[test]
    fn single_large_coefficient_kills_hard_radius() {
        let mut coeffs = vec![0.0; 64];
        coeffs[0b100] = 0.8;
        let spec = MonotoneSpectrum::new(6, coeffs).unwrap();
        let alpha = Mask::from_index(6, 0b11);
        assert_eq!(hard_radius_monotone(&spec, &alpha, 0.4).unwrap(), 0);
        assert!(hard_radius_monotone_with_cap(&spec, &alpha, 0.4, 10).is_err());
    }

    #[test]
    fn smoothed_bound_limits() {
        let h = DenseBooleanFunction::random_unit(8, 2).unwrap();
        let spec = monotone_transform(&h);
        let alpha = Mask::from_index(8, 0b1001);
        let one = smoothed_stability_bound(&spec, &alpha, 2, 0.5, 1.0).unwrap();
        assert_eq!(one.base.q, one.smoothed.q);
        let zero = smoothed_stability_bound(&spec, &alpha, 2, 0.5, 0.0).unwrap();
        assert_eq!((zero.smoothed.q, zero.smoothed.bound), (0.0, 1.0));
        let mid = smoothed_stability_bound(&spec, &alpha, 2, 0.5, 0.7).unwrap();
        assert!(mid.smoothed.q <= 0.7 * mid.base.q + 1e-12);
    }
}
