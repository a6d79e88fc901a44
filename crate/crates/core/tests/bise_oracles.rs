use proptest::prelude::*;
use rand::Rng;
use stabcert::bise::*;
use stabcert::mask::Mask;
use stabcert::model::{InputVector, PredictionRelation};
use stabcert::models::LookupTable;
use stabcert::rng::substream;

fn random_g(n: usize, seed: u64) -> TableIndicator {
    let mut rng = substream(seed, 5);
    let bias = rng.random_range(0.2..0.8);
    TableIndicator::new(n, (0..1usize << n).map(|_| rng.random_bool(bias)).collect()).unwrap()
}

fn random_ranking(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = substream(seed, 6);
    let mut r: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        r.swap(i, rng.random_range(0..=i));
    }
    r
}

#[test]
fn sampled_scores_agree_with_enumeration() {
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let g = random_g(8, seed);
        let ranking = random_ranking(8, seed);
        for mode in [BiseMode::Insertion, BiseMode::Deletion] {
            let exact = exact_bise(&g, &ranking, mode, 1).unwrap();
            let sampled = bise(&g, &ranking, mode, 1, 2000, seed).unwrap();
            let se = {
                let var: f64 = exact.values.iter().map(|p| p * (1.0 - p) / 2000.0).sum();
                var.sqrt() / exact.values.len() as f64
            };
            let z = if se == 0.0 { 0.0 } else { (sampled.auc - exact.auc).abs() / se };
            worst = worst.max(z);
            assert!((sampled.auc - exact.auc).abs() <= 3.0 * se + 1e-12, "seed {seed} {mode:?}: z = {z}");
        }
    }
    assert!(worst > 0.0);
}

#[test]
fn model_indicator_matches_its_table() {
    let model = LookupTable::random(8, 3, 4).unwrap();
    let x = InputVector(vec![1.0; 8]);
    let g = derive_indicator(&model, &x, PredictionRelation::ArgmaxEqual).unwrap();
    let table = g.tabulate().unwrap();
    let ranking = random_ranking(8, 1);
    let a = insertion_bise(&g, &ranking, 2, 300, 7).unwrap();
    let b = insertion_bise(&table, &ranking, 2, 300, 7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bounds_cover_the_exact_score() {
    let delta = 0.1;
    let g = random_g(7, 12);
    let ranking = random_ranking(7, 12);
    let exact = exact_bise(&g, &ranking, BiseMode::Insertion, 1).unwrap();
    let runs = 300;
    let covered = (0..runs)
        .filter(|&seed| {
            let s = insertion_bise(&g, &ranking, 1, 200, 10_000 + seed).unwrap();
            let b = bise_bounds(&s, 0.1, delta, 200).unwrap();
            b.lower <= exact.auc && exact.auc <= b.upper
        })
        .count();
    assert!(covered as f64 >= (1.0 - delta) * runs as f64, "{covered}/{runs}");
}

#[test]
fn variance_falls_as_samples_grow() {
    let g = random_g(8, 3);
    let ranking = random_ranking(8, 3);
    let r = optimal_m_report(&g, &ranking, BiseMode::Insertion, 2, &OPTIMAL_M_GRID, 8, false, 4).unwrap();
    assert_eq!(r.rows.iter().map(|r| r.m).collect::<Vec<_>>(), OPTIMAL_M_GRID.to_vec());
    assert!(r.spearman <= 0.0, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scores_stay_in_unit_interval(seed in any::<u64>(), step in 1usize..5, m in 1usize..64) {
        let g = random_g(6, seed);
        let ranking = random_ranking(6, seed);
        for mode in [BiseMode::Insertion, BiseMode::Deletion] {
            let s = with_bounds(bise(&g, &ranking, mode, step, m, seed).unwrap(), 0.1, 0.2).unwrap();
            prop_assert!(s.values.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((0.0..=1.0).contains(&s.auc));
            let b = s.bounds.unwrap();
            prop_assert!(0.0 <= b.lower && b.lower <= s.auc && s.auc <= b.upper && b.upper <= 1.0);
        }
    }

    #[test]
    fn influence_is_symmetric_under_complementing_g(seed in any::<u64>(), s in 0u64..64) {
        let g = random_g(6, seed);
        let flipped = TableIndicator::new(6, g.table().iter().map(|b| !b).collect()).unwrap();
        let set = Mask::from_index(6, s);
        prop_assert_eq!(exact_influence(&g, &set).unwrap(), exact_influence(&flipped, &set).unwrap());
        let a = influence_estimate(&g, &set, 50, seed).unwrap();
        let b = influence_estimate(&flipped, &set, 50, seed).unwrap();
        prop_assert_eq!(a.flips, b.flips);
    }
}
