use serde::Serialize;

use crate::error::{Error, Result};
use crate::smoothing::smooth_function_exact;
use crate::spectral::boolean::{bernoulli_weights, DenseBooleanFunction};
use crate::spectral::fourier::check_unit;
use crate::spectral::transform::{pbiased_forward, pbiased_inverse};

fn check_bias(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::arg(format!("bias p must lie in (0, 1), got {p}")));
    }
    Ok((p - p * p).sqrt())
}

fn check_pair(p: f64, lambda: f64) -> Result<()> {
    check_bias(p)?;
    check_unit("lambda", lambda)?;
    if p > lambda {
        return Err(Error::arg(format!("need p <= lambda, got p={p}, lambda={lambda}")));
    }
    Ok(())
}

/// Coefficients in the orthonormal basis of `Bern(p)^n`,
/// `χ_S^p(α) = Π_{i∈S} (p - α_i) / sqrt(p - p²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PBiasedSpectrum {
    n: usize,
    p: f64,
    coeffs: Vec<f64>,
}

impl PBiasedSpectrum {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `Σ_S c_S²`, equal to `E_{Bern(p)}[h²]`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn to_csv(&self) -> String {
        crate::spectral::fourier::spectrum_csv(&self.coeffs)
    }
}

pub fn pbiased_transform(h: &DenseBooleanFunction, p: f64) -> Result<PBiasedSpectrum> {
    check_bias(p)?;
    let mut coeffs = h.table().to_vec();
    pbiased_forward(&mut coeffs, p);
    Ok(PBiasedSpectrum { n: h.n(), p, coeffs })
}

pub fn inverse_pbiased(spec: &PBiasedSpectrum) -> DenseBooleanFunction {
    let mut table = spec.coeffs.clone();
    pbiased_inverse(&mut table, spec.p);
    DenseBooleanFunction::new(spec.n, table).expect("transform preserves shape")
}

/// Tabulates `χ_S^p`.
pub fn basis_function(n: usize, p: f64, subset: usize) -> Result<DenseBooleanFunction> {
    let sigma = check_bias(p)?;
    DenseBooleanFunction::from_fn(n, |alpha| {
        (0..n)
            .filter(|i| subset >> i & 1 == 1)
            .map(|i| (p - (alpha >> i & 1) as f64) / sigma)
            .product()
    })
}

/// Largest `|E_{Bern(p)}[χ_S^p χ_T^p] - 1[S = T]|` over all pairs, by direct
/// summation.
pub fn orthonormality_error(n: usize, p: f64) -> Result<f64> {
    let basis = (0..1usize << n)
        .map(|s| basis_function(n, p, s))
        .collect::<Result<Vec<_>>>()?;
    let w = bernoulli_weights(n, p);
    let mut worst = 0.0f64;
    for (s, a) in basis.iter().enumerate() {
        for (t, b) in basis.iter().enumerate().skip(s) {
            let inner: f64 = (0..1usize << n)
                .map(|alpha| w[alpha.count_ones() as usize] * a.at(alpha) * b.at(alpha))
                .sum();
            let want = if s == t { 1.0 } else { 0.0 };
            worst = worst.max((inner - want).abs());
        }
    }
    Ok(worst)
}

/// `sqrt((λ - p) / (1 - p))`, the per-coordinate contraction factor.
pub fn change_of_basis_factor(p: f64, lambda: f64) -> f64 {
    ((lambda - p) / (1.0 - p)).max(0.0).sqrt()
}

/// `((λ-p)/(1-p))^{|S|/2} χ_S^{p/λ}`, written as `Π_{i∈S} λ (p/λ - α_i) / σ_p`
/// so that it stays defined at `p = λ`, where `χ^{1}` degenerates.
fn rescaled_target(n: usize, p: f64, lambda: f64, subset: usize) -> DenseBooleanFunction {
    let sigma = (p - p * p).sqrt();
    let q = p / lambda;
    DenseBooleanFunction::from_fn(n, |alpha| {
        (0..n)
            .filter(|i| subset >> i & 1 == 1)
            .map(|i| lambda * (q - (alpha >> i & 1) as f64) / sigma)
            .product()
    })
    .expect("n already validated")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeOfBasisReport {
    pub n: usize,
    pub p: f64,
    pub lambda: f64,
    /// Worst pointwise gap in `M_λ χ_S^p = c^{|S|} χ_S^{p/λ}` over all `S`.
    pub basis_error: f64,
    /// Worst pointwise gap between `M_λ h` and its expansion through the
    /// rescaled `p/λ` basis.
    pub function_error: f64,
    pub ok: bool,
}

/// Verifies the change of basis under smoothing: each `χ_S^p` is mapped to
/// a rescaled `χ_S^{p/λ}`, and consequently `M_λ h` has coefficients
/// `c^{|S|} ĥ_p(S)` in the `p/λ` basis. Both sides are evaluated on all
/// `2^n` inputs, with `M_λ` computed by direct Bernoulli summation.
pub fn change_of_basis_check(spec: &PBiasedSpectrum, lambda: f64) -> Result<ChangeOfBasisReport> {
    let (n, p) = (spec.n, spec.p);
    check_pair(p, lambda)?;
    let targets: Vec<DenseBooleanFunction> = (0..1usize << n)
        .map(|s| rescaled_target(n, p, lambda, s))
        .collect();
    let mut basis_error = 0.0f64;
    for (s, target) in targets.iter().enumerate() {
        let smoothed = smooth_function_exact(&basis_function(n, p, s)?, lambda)?;
        basis_error = basis_error.max(smoothed.max_abs_diff(target));
    }
    let smoothed_h = smooth_function_exact(&inverse_pbiased(spec), lambda)?;
    let expanded = DenseBooleanFunction::from_fn(n, |alpha| {
        spec.coeffs
            .iter()
            .zip(&targets)
            .map(|(c, t)| c * t.at(alpha))
            .sum()
    })?;
    let function_error = smoothed_h.max_abs_diff(&expanded);
    Ok(ChangeOfBasisReport {
        n,
        p,
        lambda,
        basis_error,
        function_error,
        ok: basis_error <= 1e-9 && function_error <= 1e-9,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReduction {
    /// `Var_{Bern(p/λ)}[M_λ h]`.
    pub lhs: f64,
    /// `((λ-p)/(1-p)) Var_{Bern(p)}[h]`.
    pub rhs: f64,
    pub ok: bool,
    /// `E_{Bern(p/λ)}[(M_λ h')²]` for the centred `h' = h - E_{Bern(p)}[h]`.
    pub second_moment_lhs: f64,
    /// `((λ-p)/(1-p)) E_{Bern(p)}[h'²]`.
    pub second_moment_rhs: f64,
    pub second_moment_ok: bool,
}

/// Exact check that smoothing shrinks variance by the change-of-basis
/// factor, with both sides computed by enumeration.
pub fn variance_reduction_check(h: &DenseBooleanFunction, p: f64, lambda: f64) -> Result<VarianceReduction> {
    check_pair(p, lambda)?;
    let q = p / lambda;
    let factor = (lambda - p) / (1.0 - p);
    let smoothed = smooth_function_exact(h, lambda)?;
    let lhs = smoothed.variance_under(q);
    let rhs = factor * h.variance_under(p);

    let mu = h.mean_under(p);
    let centred = DenseBooleanFunction::from_fn(h.n(), |a| h.at(a) - mu)?;
    let centred_smoothed = smooth_function_exact(&centred, lambda)?;
    let second_moment_lhs = centred_smoothed.expect_under(q, |v| v * v);
    let second_moment_rhs = factor * centred.expect_under(p, |v| v * v);
    Ok(VarianceReduction {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-9,
        second_moment_lhs,
        second_moment_rhs,
        second_moment_ok: second_moment_lhs <= second_moment_rhs + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::fourier::fourier_transform;

    #[test]
    fn bias_validation() {
        let h = DenseBooleanFunction::random_unit(3, 1).unwrap();
        assert!(pbiased_transform(&h, 0.0).is_err());
        assert!(pbiased_transform(&h, 1.0).is_err());
        assert!(variance_reduction_check(&h, 0.6, 0.5).is_err());
    }

    #[test]
    fn half_bias_is_parity_basis() {
        for s in 0..16usize {
            let chi = basis_function(4, 0.5, s).unwrap();
            for a in 0..16usize {
                let parity = if (a & s).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                assert!((chi.at(a) - parity).abs() < 1e-15);
            }
        }
        let h = DenseBooleanFunction::random_unit(6, 9).unwrap();
        let a = pbiased_transform(&h, 0.5).unwrap();
        let b = fourier_transform(&h);
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn orthonormal_basis() {
        for p in [0.1, 0.3, 0.5, 0.8] {
            assert!(orthonormality_error(6, p).unwrap() < 1e-9);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let h = DenseBooleanFunction::random_unit(8, 3).unwrap();
        let spec = pbiased_transform(&h, 0.27).unwrap();
        assert!(inverse_pbiased(&spec).max_abs_diff(&h) < 1e-12);
        assert!((spec.energy() - h.expect_under(0.27, |v| v * v)).abs() < 1e-9);
    }

    #[test]
    fn change_of_basis_small_case() {
        let h = DenseBooleanFunction::random_unit(6, 8).unwrap();
        let spec = pbiased_transform(&h, 0.2).unwrap();
        let report = change_of_basis_check(&spec, 0.5).unwrap();
        assert!(report.ok, "{report:?}");
        // single basis element S = {1, 3}
        let subset = 0b1010;
        let lhs = smooth_function_exact(&basis_function(6, 0.2, subset).unwrap(), 0.5).unwrap();
        let c = change_of_basis_factor(0.2, 0.5);
        let rhs = basis_function(6, 0.4, subset).unwrap();
        for a in 0..64 {
            assert!((lhs.at(a) - c * c * rhs.at(a)).abs() < 1e-12);
        }
    }

    #[test]
    fn change_of_basis_at_equal_bias() {
        let spec = pbiased_transform(&DenseBooleanFunction::random_unit(5, 4).unwrap(), 0.4).unwrap();
        assert!(change_of_basis_check(&spec, 0.4).unwrap().ok);
        assert!(change_of_basis_check(&spec, 1.0).unwrap().ok);
    }

    #[test]
    fn variance_reduction_examples() {
        let c = DenseBooleanFunction::constant(5, 1.7).unwrap();
        let v = variance_reduction_check(&c, 0.3, 0.6).unwrap();
        assert!(v.lhs.abs() < 1e-12 && v.rhs.abs() < 1e-12);
        let h = DenseBooleanFunction::random_unit(8, 21).unwrap();
        let v = variance_reduction_check(&h, 0.3, 1.0).unwrap();
        assert!((v.lhs - v.rhs).abs() < 1e-12);
        let v = variance_reduction_check(&h, 0.3, 0.6).unwrap();
        assert!(v.ok && v.second_moment_ok);
    }
}
