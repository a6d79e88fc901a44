use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::spectral::boolean::DenseBooleanFunction;
use crate::spectral::transform::{scale_by_degree, walsh_hadamard, weighted_superset_sums};

use rand::Rng;

pub(crate) fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::arg(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Coefficients in the parity basis `χ_S(α) = Π_{i∈S} (-1)^{α_i}`, indexed by
/// subset bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct StdSpectrum {
    n: usize,
    coeffs: Vec<f64>,
}

impl StdSpectrum {
    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        // reuse the table validation
        let f = DenseBooleanFunction::new(n, coeffs)?;
        Ok(StdSpectrum {
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

    /// `Σ_S ĥ(S)²`, equal to `E_{α~U}[h(α)²]`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Mean `|ĥ(S)|` for each degree `|S| = 0..=n`.
    pub fn degree_profile(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n + 1];
        let mut counts = vec![0usize; self.n + 1];
        for (s, c) in self.coeffs.iter().enumerate() {
            let k = s.count_ones() as usize;
            sums[k] += c.abs();
            counts[k] += 1;
        }
        sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect()
    }

    /// CSV with header `subset_bitmask,degree,coefficient`.
    pub fn to_csv(&self) -> String {
        spectrum_csv(&self.coeffs)
    }
}

pub(crate) fn spectrum_csv(coeffs: &[f64]) -> String {
    let mut out = String::from("subset_bitmask,degree,coefficient\n");
    for (s, c) in coeffs.iter().enumerate() {
        let _ = writeln!(out, "{s},{},{c:e}", s.count_ones());
    }
    out
}

pub fn fourier_transform(h: &DenseBooleanFunction) -> StdSpectrum {
    let mut coeffs = h.table().to_vec();
    walsh_hadamard(&mut coeffs);
    let scale = 1.0 / coeffs.len() as f64;
    coeffs.iter_mut().for_each(|c| *c *= scale);
    StdSpectrum { n: h.n(), coeffs }
}

pub fn inverse_fourier(spec: &StdSpectrum) -> DenseBooleanFunction {
    let mut table = spec.coeffs.clone();
    walsh_hadamard(&mut table);
    DenseBooleanFunction::new(spec.n, table).expect("transform preserves shape")
}

/// Spectrum of `M_λ h` from the spectrum of `h`.
pub fn smooth_std(spec: &StdSpectrum, lambda: f64) -> Result<StdSpectrum> {
    check_unit("lambda", lambda)?;
    let mut coeffs = spec.coeffs.clone();
    weighted_superset_sums(&mut coeffs, lambda);
    Ok(StdSpectrum { n: spec.n, coeffs })
}

/// `Σ_{|S| ≥ k} |ĥ(S)|`.
pub fn tail_mass(spec: &StdSpectrum, k: usize) -> f64 {
    spec.coeffs
        .iter()
        .enumerate()
        .filter(|(s, _)| s.count_ones() as usize >= k)
        .map(|(_, c)| c.abs())
        .sum()
}

/// `P[Bin(n, λ) ≥ k]` by direct summation of the pmf.
pub fn tail_bound(n: usize, k: usize, lambda: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let mut binom = 1.0f64;
    let mut total = 0.0;
    for j in 0..=n {
        if j >= k {
            total += binom * lambda.powi(j as i32) * (1.0 - lambda).powi((n - j) as i32);
        }
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    total.min(1.0)
}

/// The random-flipping operator `T_ρ`, which keeps each bit with probability
/// `(1+ρ)/2` and flips it otherwise. Acts on parities as `χ_S ↦ ρ^{|S|} χ_S`.
pub fn flip_operator(h: &DenseBooleanFunction, rho: f64) -> Result<DenseBooleanFunction> {
    check_unit("rho", rho)?;
    let mut spec = fourier_transform(h);
    scale_by_degree(&mut spec.coeffs, rho);
    Ok(inverse_fourier(&spec))
}

/// Per-degree mean `|coefficient|` of a spectrum after masking and after
/// flipping, for one parameter value.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OperatorProfile {
    pub parameter: f64,
    pub masking: Vec<f64>,
    pub flipping: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MaskingVsFlippingReport {
    pub n: usize,
    pub original: Vec<f64>,
    pub rows: Vec<OperatorProfile>,
    /// Every degree's flipping profile is non-increasing as the parameter falls.
    pub flipping_monotone: bool,
    /// Same for masking; typically false, since masking moves mass to low degrees.
    pub masking_monotone: bool,
}

pub fn masking_vs_flipping_report(spec: &StdSpectrum, grid: &[f64]) -> Result<MaskingVsFlippingReport> {
    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        check_unit("grid value", t)?;
        let masked = smooth_std(spec, t)?;
        let mut flipped = spec.coeffs.clone();
        scale_by_degree(&mut flipped, t);
        rows.push(OperatorProfile {
            parameter: t,
            masking: masked.degree_profile(),
            flipping: StdSpectrum { n: spec.n, coeffs: flipped }.degree_profile(),
        });
    }
    let mut order: Vec<&OperatorProfile> = rows.iter().collect();
    order.sort_by(|a, b| b.parameter.total_cmp(&a.parameter));
    let monotone = |pick: fn(&OperatorProfile) -> &Vec<f64>| {
        order.windows(2).all(|w| {
            pick(w[0])
                .iter()
                .zip(pick(w[1]))
                .all(|(hi, lo)| *lo <= *hi + 1e-12)
        })
    };
    let flipping_monotone = monotone(|p| &p.flipping);
    let masking_monotone = monotone(|p| &p.masking);
    Ok(MaskingVsFlippingReport {
        n: spec.n,
        original: spec.degree_profile(),
        rows,
        flipping_monotone,
        masking_monotone,
    })
}

/// A spectrum with i.i.d. uniform `[-1, 1]` coefficients.
pub fn random_spectrum(n: usize, seed: u64) -> Result<StdSpectrum> {
    crate::spectral::boolean::check_vars(n, crate::spectral::MAX_VARS)?;
    let mut rng = substream(seed, 1);
    let len = 1usize << n;
    StdSpectrum::new(n, (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn and2() -> DenseBooleanFunction {
        DenseBooleanFunction::new(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn and_coefficients() {
        let spec = fourier_transform(&and2());
        let want = [0.25, -0.25, -0.25, 0.25];
        for (c, w) in spec.coeffs().iter().zip(want) {
            assert!((c - w).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_has_only_empty_coefficient() {
        let spec = fourier_transform(&DenseBooleanFunction::constant(5, 3.0).unwrap());
        assert!((spec.coeff(0) - 3.0).abs() < 1e-15);
        assert!(spec.coeffs()[1..].iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn round_trip_and_parseval() {
        let h = DenseBooleanFunction::random_unit(8, 11).unwrap();
        let spec = fourier_transform(&h);
        assert!(inverse_fourier(&spec).max_abs_diff(&h) < 1e-12);
        let mean_sq = h.expect_under(0.5, |v| v * v);
        assert!((spec.energy() - mean_sq).abs() < 1e-9);
    }

    #[test]
    fn smoothed_and_is_scaled_and() {
        // M_λ AND = λ² AND, so every coefficient scales by λ²
        for lambda in [0.0, 0.25, 0.5, 1.0] {
            let s = smooth_std(&fourier_transform(&and2()), lambda).unwrap();
            let l2 = lambda * lambda / 4.0;
            let want = [l2, -l2, -l2, l2];
            for (c, w) in s.coeffs().iter().zip(want) {
                assert!((c - w).abs() < 1e-15, "λ={lambda}: {c} vs {w}");
            }
        }
    }

    #[test]
    fn smoothing_preserves_coefficient_sum() {
        let spec = fourier_transform(&DenseBooleanFunction::random_unit(7, 2).unwrap());
        let s = smooth_std(&spec, 0.37).unwrap();
        let a: f64 = spec.coeffs().iter().sum();
        let b: f64 = s.coeffs().iter().sum();
        assert!((a - b).abs() < 1e-12);
        assert_eq!(smooth_std(&spec, 1.0).unwrap(), spec);
        assert!(smooth_std(&spec, 1.5).is_err());
    }

    #[test]
    fn binomial_tail() {
        assert_eq!(tail_bound(5, 0, 0.3), 1.0);
        assert_eq!(tail_bound(5, 6, 0.3), 0.0);
        assert!((tail_bound(3, 2, 0.5) - 0.5).abs() < 1e-15);
        assert!((tail_bound(4, 4, 0.5) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn flipping_scales_by_degree() {
        let h = DenseBooleanFunction::random_unit(8, 5).unwrap();
        assert!(flip_operator(&h, 1.0).unwrap().max_abs_diff(&h) < 1e-12);
        let rho = 0.6;
        let before = fourier_transform(&h);
        let after = fourier_transform(&flip_operator(&h, rho).unwrap());
        for s in 0..256usize {
            let want = rho.powi(s.count_ones() as i32) * before.coeff(s);
            assert!((after.coeff(s) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn masking_versus_flipping_profiles() {
        let spec = random_spectrum(8, 4).unwrap();
        let r = masking_vs_flipping_report(&spec, &[1.0, 0.75, 0.5, 0.25]).unwrap();
        assert!(r.flipping_monotone);
        assert!(!r.masking_monotone);
        assert_eq!(r.rows.len(), 4);
    }

    #[test]
    fn csv_layout() {
        let csv = fourier_transform(&and2()).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "subset_bitmask,degree,coefficient");
        assert!(lines[4].starts_with("3,2,"));
    }
}
