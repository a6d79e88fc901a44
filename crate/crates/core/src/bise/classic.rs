use serde::{Deserialize, Serialize};

use crate::attribution::prefix_mask;
use crate::bise::score::curve_sizes;
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::model::{apply_mask, check_input, evaluate_all, InputVector, Model};
use crate::stats::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicMetric {
    /// Score of the original class with only the top-`k` features kept.
    Insertion,
    /// Score of the original class with the top-`k` features removed.
    Deletion,
    /// Whether the prediction survives removing the `k` most relevant features.
    Morf,
    /// Whether the prediction survives removing the `k` least relevant features.
    Lerf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicCurve {
    pub metric: ClassicMetric,
    pub class: usize,
    pub ks: Vec<usize>,
    pub values: Vec<f64>,
    pub auc: f64,
}

pub(crate) fn curve_mask(metric: ClassicMetric, ranking: &[usize], k: usize) -> Mask {
    let n = ranking.len();
    match metric {
        ClassicMetric::Insertion => prefix_mask(ranking, k),
        ClassicMetric::Deletion | ClassicMetric::Morf => prefix_mask(ranking, k).not(),
        ClassicMetric::Lerf => prefix_mask(ranking, n - k),
    }
}

pub fn classic_curve<M: Model + ?Sized>(
    metric: ClassicMetric,
    model: &M,
    x: &InputVector,
    ranking: &[usize],
    step: usize,
) -> Result<ClassicCurve> {
    check_input(model, x)?;
    if ranking.len() != x.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: ranking.len(),
        });
    }
    let class = model.evaluate(x)?.argmax();
    let ks = curve_sizes(x.len(), step)?;
    let inputs = ks
        .iter()
        .map(|&k| apply_mask(x, &curve_mask(metric, ranking, k)))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = evaluate_all(model, &inputs)?
        .iter()
        .map(|out| match metric {
            ClassicMetric::Insertion | ClassicMetric::Deletion => out.0[class],
            ClassicMetric::Morf | ClassicMetric::Lerf => (out.argmax() == class) as u8 as f64,
        })
        .collect();
    Ok(ClassicCurve {
        metric,
        class,
        auc: mean(&values),
        ks,
        values,
    })
}

pub fn insertion_test<M: Model + ?Sized>(model: &M, x: &InputVector, ranking: &[usize], step: usize) -> Result<ClassicCurve> {
    classic_curve(ClassicMetric::Insertion, model, x, ranking, step)
}

pub fn deletion_test<M: Model + ?Sized>(model: &M, x: &InputVector, ranking: &[usize], step: usize) -> Result<ClassicCurve> {
    classic_curve(ClassicMetric::Deletion, model, x, ranking, step)
}

pub fn morf<M: Model + ?Sized>(model: &M, x: &InputVector, ranking: &[usize], step: usize) -> Result<ClassicCurve> {
    classic_curve(ClassicMetric::Morf, model, x, ranking, step)
}

pub fn lerf<M: Model + ?Sized>(model: &M, x: &InputVector, ranking: &[usize], step: usize) -> Result<ClassicCurve> {
    classic_curve(ClassicMetric::Lerf, model, x, ranking, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Conjunction, Constant, LookupTable};

    #[test]
    fn constant_model_is_flat() {
        let model = Constant::new(5, vec![0.3, 0.7]).unwrap();
        let x = InputVector(vec![1.0; 5]);
        let ranking: Vec<usize> = (0..5).collect();
        for metric in [ClassicMetric::Insertion, ClassicMetric::Deletion] {
            let c = classic_curve(metric, &model, &x, &ranking, 1).unwrap();
            assert!(c.values.iter().all(|&v| v == 0.7));
            assert_eq!(c.auc, 0.7);
        }
        assert_eq!(morf(&model, &x, &ranking, 1).unwrap().auc, 1.0);
    }

    #[test]
    fn single_feature_model_peaks_at_first_insertion() {
        let model = Conjunction::new(6, vec![4]).unwrap();
        let x = InputVector(vec![1.0; 6]);
        let ranking = vec![4, 0, 1, 2, 3, 5];
        let c = insertion_test(&model, &x, &ranking, 1).unwrap();
        assert_eq!(c.values[0], 1.0);
        assert!(c.values.iter().all(|&v| v == 1.0));
        let d = deletion_test(&model, &x, &ranking, 1).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_direct_masking() {
        let model = LookupTable::random(10, 3, 12).unwrap();
        let x = InputVector(vec![1.0; 10]);
        let ranking = vec![9, 2, 4, 0, 7, 1, 3, 8, 6, 5];
        let class = model.evaluate(&x).unwrap().argmax();
        for metric in [ClassicMetric::Insertion, ClassicMetric::Deletion, ClassicMetric::Morf, ClassicMetric::Lerf] {
            let c = classic_curve(metric, &model, &x, &ranking, 3).unwrap();
            assert_eq!(c.ks, vec![3, 6, 9, 10]);
            let mut total = 0.0;
            for &k in &c.ks {
                let keep: Vec<bool> = (0..10)
                    .map(|i| {
                        let pos = ranking.iter().position(|&r| r == i).unwrap();
                        match metric {
                            ClassicMetric::Insertion => pos < k,
                            ClassicMetric::Deletion | ClassicMetric::Morf => pos >= k,
                            ClassicMetric::Lerf => pos < 10 - k,
                        }
                    })
                    .collect();
                let out = model.evaluate(&apply_mask(&x, &Mask::from_bools(&keep)).unwrap()).unwrap();
                total += match metric {
                    ClassicMetric::Insertion | ClassicMetric::Deletion => out.0[class],
                    _ => (out.argmax() == class) as u8 as f64,
                };
            }
            assert!((c.auc - total / 4.0).abs() < 1e-12);
        }
    }
}
