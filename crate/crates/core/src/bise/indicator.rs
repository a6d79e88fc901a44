use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::model::{apply_mask, Concurrency, check_input, evaluate_all, predicts_same, InputVector, Model, ModelOutput, PredictionRelation};

/// Description attached to every BISE report: how the Boolean function being
/// scored is derived from the classifier.
pub const INDICATOR_CONSTRUCTION: &str = "g(alpha) = 1 iff f(x * alpha) predicts the same as f(x) under the configured relation";

/// A Boolean function over feature masks.
pub trait BooleanOracle: Sync {
    fn n(&self) -> usize;

    fn eval_batch(&self, masks: &[Mask]) -> Result<Vec<bool>>;

    /// Whether batches may be evaluated from several threads at once.
    fn parallel(&self) -> bool {
        true
    }

    fn eval(&self, mask: &Mask) -> Result<bool> {
        Ok(self.eval_batch(std::slice::from_ref(mask))?[0])
    }
}

/// `g(α) = 1[f(x ⊙ α) ~ f(x)]` for a fixed input.
pub struct ModelIndicator<'a, M: ?Sized> {
    model: &'a M,
    x: InputVector,
    reference: ModelOutput,
    rel: PredictionRelation,
}

pub fn derive_indicator<'a, M: Model + ?Sized>(
    model: &'a M,
    x: &InputVector,
    rel: PredictionRelation,
) -> Result<ModelIndicator<'a, M>> {
    check_input(model, x)?;
    rel.validate(model.n_outputs())?;
    let reference = model.evaluate(x)?;
    Ok(ModelIndicator {
        model,
        x: x.clone(),
        reference,
        rel,
    })
}

impl<M: Model + ?Sized> ModelIndicator<'_, M> {
    pub fn reference(&self) -> &ModelOutput {
        &self.reference
    }

    /// Evaluates `g` on all `2^n` masks.
    pub fn tabulate(&self) -> Result<TableIndicator> {
        let n = self.n();
        crate::spectral::check_dense_vars(n)?;
        let masks: Vec<Mask> = (0..1u64 << n).map(|i| Mask::from_index(n, i)).collect();
        TableIndicator::new(n, self.eval_batch(&masks)?)
    }
}

impl<M: Model + ?Sized> BooleanOracle for ModelIndicator<'_, M> {
    fn n(&self) -> usize {
        self.x.len()
    }

    fn parallel(&self) -> bool {
        self.model.concurrency() == Concurrency::Parallel
    }

    fn eval_batch(&self, masks: &[Mask]) -> Result<Vec<bool>> {
        let inputs = masks
            .iter()
            .map(|m| apply_mask(&self.x, m))
            .collect::<Result<Vec<_>>>()?;
        evaluate_all(self.model, &inputs)?
            .iter()
            .map(|out| predicts_same(out, &self.reference, self.rel))
            .collect()
    }
}

/// A tabulated Boolean function, indexed by mask integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableIndicator {
    n: usize,
    table: Vec<bool>,
}

impl TableIndicator {
    pub fn new(n: usize, table: Vec<bool>) -> Result<Self> {
        crate::spectral::check_dense_vars(n)?;
        if table.len() != 1 << n {
            return Err(Error::Dimension {
                expected: 1 << n,
                got: table.len(),
            });
        }
        Ok(TableIndicator { n, table })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Result<Self> {
        crate::spectral::check_dense_vars(n)?;
        Self::new(n, (0..1usize << n).map(f).collect())
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    #[inline]
    pub fn at(&self, index: usize) -> bool {
        self.table[index]
    }
}

impl BooleanOracle for TableIndicator {
    fn n(&self) -> usize {
        self.n
    }

    fn eval_batch(&self, masks: &[Mask]) -> Result<Vec<bool>> {
        masks
            .iter()
            .map(|m| {
                if m.len() != self.n {
                    return Err(Error::Dimension {
                        expected: self.n,
                        got: m.len(),
                    });
                }
                Ok(self.table[m.to_index().expect("dense tables are narrow") as usize])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Constant, LookupTable};

    #[test]
    fn full_mask_reproduces_prediction() {
        let model = LookupTable::random(6, 3, 2).unwrap();
        let x = InputVector(vec![1.0; 6]);
        let g = derive_indicator(&model, &x, PredictionRelation::ArgmaxEqual).unwrap();
        assert!(g.eval(&Mask::ones(6)).unwrap());
    }

    #[test]
    fn constant_model_gives_constant_indicator() {
        let model = Constant::new(5, vec![0.2, 0.8]).unwrap();
        let g = derive_indicator(&model, &InputVector(vec![1.0; 5]), PredictionRelation::ArgmaxEqual).unwrap();
        assert!(g.tabulate().unwrap().table().iter().all(|&b| b));
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let model = LookupTable::random(10, 3, 7).unwrap();
        let x = InputVector((0..10).map(|i| 1.0 + i as f64).collect());
        let g = derive_indicator(&model, &x, PredictionRelation::ArgmaxEqual).unwrap();
        let table = g.tabulate().unwrap();
        let base = model.evaluate(&x).unwrap().argmax();
        for i in 0..1u64 << 10 {
            let out = model.evaluate(&apply_mask(&x, &Mask::from_index(10, i)).unwrap()).unwrap();
            assert_eq!(table.at(i as usize), out.argmax() == base);
        }
    }
}
