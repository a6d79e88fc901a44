use stabcert::mask::Mask;
use stabcert::model::{InputVector, Model, PredictionRelation};
use stabcert::models::LookupTable;
use stabcert::rng::substream;
use stabcert::sca::exact_stability;
use stabcert::smoothing::*;
use stabcert::spectral::DenseBooleanFunction;

fn ones(n: usize) -> InputVector {
    InputVector(vec![1.0; n])
}

/// `M_λ f_c(x ⊙ α)` for every mask and class, by direct summation.
fn smoothed_tables(model: &LookupTable, lambda: f64) -> Vec<DenseBooleanFunction> {
    let n = model.n_features();
    (0..model.n_outputs())
        .map(|c| {
            let h = DenseBooleanFunction::from_model(model, &ones(n), c).unwrap();
            smooth_function_exact(&h, lambda).unwrap()
        })
        .collect()
}

fn argmax_at(tables: &[DenseBooleanFunction], alpha: usize) -> usize {
    let mut best = 0;
    for (c, t) in tables.iter().enumerate() {
        if t.at(alpha) > tables[best].at(alpha) {
            best = c;
        }
    }
    best
}

#[test]
fn smoothed_outputs_are_lambda_lipschitz() {
    let n = 9;
    for seed in 0..4u64 {
        let model = LookupTable::random(n, 3, seed).unwrap();
        for lambda in [0.25, 0.5, 0.9] {
            for t in smoothed_tables(&model, lambda) {
                for a in 0..1usize << n {
                    for b in a + 1..1usize << n {
                        let dist = (a ^ b).count_ones() as f64;
                        assert!((t.at(a) - t.at(b)).abs() <= lambda * dist + 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn exact_mode_matches_table_smoothing() {
    let n = 8;
    let model = LookupTable::random(n, 3, 21).unwrap();
    let tables = smoothed_tables(&model, 0.6);
    let config = SmoothingConfig::exact(0.6).unwrap();
    for alpha in [0u64, 1, 77, 200, 255] {
        let x = stabcert::apply_mask(&ones(n), &Mask::from_index(n, alpha)).unwrap();
        let out = smooth_eval(&model, &x, &config, &mut substream(0, 0)).unwrap();
        for (c, t) in tables.iter().enumerate() {
            assert!((out.0[c] - t.at(alpha as usize)).abs() < 1e-12);
        }
    }
}

#[test]
fn certified_radius_is_sound() {
    let n = 10;
    for seed in 0..20u64 {
        let model = LookupTable::random(n, 2, 50 + seed).unwrap();
        for lambda in [0.25, 0.5, 0.75] {
            let tables = smoothed_tables(&model, lambda);
            for alpha in [0usize, 0b1, 0b1000010001, 0b11100] {
                let out = stabcert::ModelOutput(tables.iter().map(|t| t.at(alpha)).collect());
                let r = mus_hard_radius(&out, lambda).unwrap().r_int;
                let base = argmax_at(&tables, alpha);
                for beta in 0..1usize << n {
                    if beta & alpha == alpha && ((beta & !alpha).count_ones() as usize) <= r {
                        assert_eq!(argmax_at(&tables, beta), base, "seed {seed} λ {lambda} α {alpha:b} β {beta:b}");
                    }
                }
            }
        }
    }
}

#[test]
fn monte_carlo_converges_to_exact() {
    let n = 10;
    let model = LookupTable::random(n, 3, 3).unwrap();
    let x = stabcert::apply_mask(&ones(n), &Mask::from_index(n, 0b1011011101)).unwrap();
    let exact = smooth_eval(&model, &x, &SmoothingConfig::exact(0.5).unwrap(), &mut substream(0, 0)).unwrap();
    let runs = 40;
    let close = (0..runs)
        .filter(|&seed| {
            let cfg = SmoothingConfig::monte_carlo(0.5, 4096, seed).unwrap();
            let mc = smooth_eval(&model, &x, &cfg, &mut substream(seed, 0)).unwrap();
            mc.0.iter().zip(&exact.0).all(|(a, b)| (a - b).abs() <= 0.02)
        })
        .count();
    assert!(close as f64 >= 0.95 * runs as f64, "{close}/{runs}");
}

#[test]
fn identity_wrapper_equals_inner() {
    let n = 10;
    let model = LookupTable::random(n, 3, 4).unwrap();
    let wrapped = wrap_smoothed(&model, SmoothingConfig::monte_carlo(1.0, 32, 0).unwrap()).unwrap();
    let mut rng = substream(9, 9);
    for _ in 0..100 {
        use rand::Rng;
        let x = InputVector((0..n).map(|_| if rng.random_bool(0.5) { rng.random::<f64>() + 0.1 } else { 0.0 }).collect());
        assert_eq!(wrapped.evaluate(&x).unwrap(), model.evaluate(&x).unwrap());
    }
}

#[test]
fn wrapper_stability_matches_smoothed_tables() {
    let n = 10;
    let model = LookupTable::random(n, 2, 17).unwrap();
    let lambda = 0.8;
    let wrapped = wrap_smoothed(&model, SmoothingConfig::exact(lambda).unwrap()).unwrap();
    let tables = smoothed_tables(&model, lambda);
    let alpha = Mask::from_indices(n, [0, 3, 5]).unwrap();
    let a = alpha.to_index().unwrap() as usize;
    let r = 2;
    let tau = exact_stability(&wrapped, &ones(n), &alpha, r, PredictionRelation::ArgmaxEqual).unwrap();
    let base = argmax_at(&tables, a);
    let (mut stable, mut total) = (0, 0);
    for beta in 0..1usize << n {
        if beta & a == a && (beta & !a).count_ones() <= r as u32 {
            total += 1;
            stable += (argmax_at(&tables, beta) == base) as usize;
        }
    }
    assert!((tau - stable as f64 / total as f64).abs() < 1e-12);
}

#[test]
fn evaluation_count_matches_configuration() {
    let n = 8;
    let model = stabcert::CountingModel::new(LookupTable::random(n, 2, 1).unwrap());
    let cfg = SmoothingConfig::monte_carlo(0.5, 64, 2).unwrap();
    let wrapped = wrap_smoothed(&model, cfg).unwrap();
    let x = ones(n);
    wrapped.evaluate(&x).unwrap();
    assert_eq!(model.evaluations(), 64);
    assert_eq!(cfg.evaluations_per_call(&x), 64);
}
