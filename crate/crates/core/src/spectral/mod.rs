//! Exact analysis of functions on `{0,1}^n` in the parity, p-biased and
//! inclusion (monotone) bases, with the smoothing operator in each.

mod boolean;
mod fourier;
mod monotone;
mod pbiased;
pub mod transform;

pub use boolean::{bernoulli_weights, DenseBooleanFunction, MAX_VARS};
pub use fourier::{
    flip_operator, fourier_transform, inverse_fourier, masking_vs_flipping_report, random_spectrum, smooth_std,
    tail_bound, tail_mass, MaskingVsFlippingReport, OperatorProfile, StdSpectrum,
};
pub use monotone::{
    hard_radius_monotone, hard_radius_monotone_with_cap, inverse_monotone, monotone_transform, smooth_monotone,
    smoothed_stability_bound, stability_lower_bound, MonotoneSpectrum, SmoothedStabilityBound, StabilityBound,
};
pub use pbiased::{
    basis_function, change_of_basis_check, change_of_basis_factor, inverse_pbiased, orthonormality_error,
    pbiased_transform, variance_reduction_check, ChangeOfBasisReport, PBiasedSpectrum, VarianceReduction,
};
pub(crate) use fourier::check_unit as check_unit_interval;

pub(crate) fn check_dense_vars(n: usize) -> crate::error::Result<()> {
    boolean::check_vars(n, MAX_VARS)
}
