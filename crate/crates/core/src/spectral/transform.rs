//! In-place `O(n 2^n)` kernels over tables indexed by subset bitmask.
//!
//! Every transform here is a tensor power of a 2×2 map applied one
//! coordinate at a time: for each bit, pairs `(t[S], t[S | bit])` with the bit
//! clear in `S` are rewritten together.

fn sweep(xs: &mut [f64], mut butterfly: impl FnMut(&mut f64, &mut f64)) {
    assert!(xs.len().is_power_of_two(), "table length must be a power of two");
    let mut half = 1;
    while half < xs.len() {
        for block in xs.chunks_exact_mut(half * 2) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi) {
                butterfly(a, b);
            }
        }
        half *= 2;
    }
}

/// Unnormalized Walsh–Hadamard transform, `(a, b) -> (a + b, a - b)`.
pub fn walsh_hadamard(xs: &mut [f64]) {
    sweep(xs, |a, b| {
        let (x, y) = (*a, *b);
        *a = x + y;
        *b = x - y;
    });
}

/// Zeta transform: `t[S] <- Σ_{T ⊆ S} t[T]`.
pub fn subset_sums(xs: &mut [f64]) {
    sweep(xs, |a, b| *b += *a);
}

/// Möbius transform, the inverse of [`subset_sums`]:
/// `t[S] <- Σ_{T ⊆ S} (-1)^{|S - T|} t[T]`.
pub fn subset_differences(xs: &mut [f64]) {
    sweep(xs, |a, b| *b -= *a);
}

/// `t[T] <- λ^{|T|} Σ_{S ⊇ T} (1-λ)^{|S - T|} t[S]`.
pub fn weighted_superset_sums(xs: &mut [f64], lambda: f64) {
    let keep = 1.0 - lambda;
    sweep(xs, |a, b| {
        *a += keep * *b;
        *b *= lambda;
    });
}

/// Scales `t[S]` by `factor^{|S|}`.
pub fn scale_by_degree(xs: &mut [f64], factor: f64) {
    let n = xs.len().trailing_zeros() as usize;
    let powers: Vec<f64> = (0..=n).map(|k| factor.powi(k as i32)).collect();
    for (s, v) in xs.iter_mut().enumerate() {
        *v *= powers[s.count_ones() as usize];
    }
}

/// Forward p-biased transform: `t[S] <- E_{α ~ Bern(p)^n}[t(α) χ_S^p(α)]`
/// with `χ_S^p(α) = Π_{i∈S} (p - α_i) / sqrt(p - p²)`.
pub fn pbiased_forward(xs: &mut [f64], p: f64) {
    let sigma = (p - p * p).sqrt();
    sweep(xs, |a, b| {
        let (x0, x1) = (*a, *b);
        *a = (1.0 - p) * x0 + p * x1;
        *b = sigma * (x0 - x1);
    });
}

/// Inverse of [`pbiased_forward`].
pub fn pbiased_inverse(xs: &mut [f64], p: f64) {
    let sigma = (p - p * p).sqrt();
    sweep(xs, |a, b| {
        let (c0, c1) = (*a, *b);
        *a = c0 + c1 * p / sigma;
        *b = c0 + c1 * (p - 1.0) / sigma;
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_mobius_on_three_bits() {
        let orig = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let mut t = orig.clone();
        subset_sums(&mut t);
        // index 0b111 collects everything, 0b101 collects {0, 1, 4, 5}
        assert_eq!(t[7], 36.0);
        assert_eq!(t[5], 1.0 + 2.0 + 5.0 + 6.0);
        subset_differences(&mut t);
        assert_eq!(t, orig);
    }

    #[test]
    fn hadamard_twice_scales_by_length() {
        let orig = vec![0.5, -1.0, 2.0, 0.25];
        let mut t = orig.clone();
        walsh_hadamard(&mut t);
        walsh_hadamard(&mut t);
        for (a, b) in t.iter().zip(&orig) {
            assert!((a - 4.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_superset_matches_direct_sum() {
        let n = 4;
        let orig: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let lambda = 0.3;
        let mut fast = orig.clone();
        weighted_superset_sums(&mut fast, lambda);
        for t in 0..(1usize << n) {
            let mut acc = 0.0;
            for s in 0..(1usize << n) {
                if s & t == t {
                    acc += (1.0 - lambda).powi((s & !t).count_ones() as i32) * orig[s];
                }
            }
            acc *= lambda.powi(t.count_ones() as i32);
            assert!((fast[t] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn pbiased_round_trip() {
        let orig: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        for p in [0.1, 0.5, 0.83] {
            let mut t = orig.clone();
            pbiased_forward(&mut t, p);
            pbiased_inverse(&mut t, p);
            for (a, b) in t.iter().zip(&orig) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
