//! Model selection from the `--model` flag.

use stabcert::external::ExternalModel;
use stabcert::models::{Conjunction, LookupTable, MajorityThreshold};
use stabcert::{Model, PredictionRelation};

use crate::args::ModelArgs;
use crate::failure::{Failure, Outcome};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Conjunction of the listed features, `{0, 1}` by default.
    And(Option<Vec<usize>>),
    /// Logistic vote over all features with an optional count threshold.
    Majority(Option<usize>),
    /// Random two-class lookup table from a seed.
    Table(u64),
    External(String),
}

fn parse_list(s: &str) -> Outcome<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Failure::config(format!("bad feature index {t:?}"))))
        .collect()
}

pub fn parse_model(spec: &str) -> Outcome<ModelSpec> {
    let (head, tail) = match spec.split_once(':') {
        Some((h, t)) => (h, Some(t)),
        None => (spec, None),
    };
    match (head, tail) {
        ("external", Some(cmd)) if !cmd.trim().is_empty() => Ok(ModelSpec::External(cmd.to_string())),
        ("external", _) => Err(Failure::config("external model needs a command: external:<cmd>")),
        ("and", None) => Ok(ModelSpec::And(None)),
        ("and", Some(list)) => Ok(ModelSpec::And(Some(parse_list(list)?))),
        ("majority", None) => Ok(ModelSpec::Majority(None)),
        ("majority", Some(t)) => t
            .parse()
            .map(|t| ModelSpec::Majority(Some(t)))
            .map_err(|_| Failure::config(format!("bad majority threshold {t:?}"))),
        ("table", None) => Ok(ModelSpec::Table(0)),
        ("table", Some(s)) => s
            .parse()
            .map(ModelSpec::Table)
            .map_err(|_| Failure::config(format!("bad table seed {s:?}"))),
        _ => Err(Failure::config(format!(
            "unknown model {spec:?}; expected and, majority, table or external:<cmd>"
        ))),
    }
}

/// Builds the model. Builtins need a feature count; an external model reports
/// its own, which must agree with `n` when both are known.
pub fn build_model(spec: &ModelSpec, n: Option<usize>) -> Outcome<Box<dyn Model>> {
    if let ModelSpec::External(cmd) = spec {
        let model = ExternalModel::spawn(cmd)?;
        if let Some(n) = n {
            if model.n_features() != n {
                return Err(Failure::config(format!(
                    "external model has {} features, input has {n}",
                    model.n_features()
                )));
            }
        }
        return Ok(Box::new(model));
    }
    let n = n.ok_or_else(|| Failure::config("builtin models need --n or an input file"))?;
    if n == 0 {
        return Err(Failure::config("feature count must be positive"));
    }
    Ok(match spec {
        ModelSpec::And(features) => {
            let features = features.clone().unwrap_or_else(|| (0..n.min(2)).collect());
            Box::new(Conjunction::new(n, features)?)
        }
        ModelSpec::Majority(None) => Box::new(MajorityThreshold::majority(n)),
        ModelSpec::Majority(Some(t)) => Box::new(MajorityThreshold::new(n, (0..n).collect(), *t, 4.0)?),
        ModelSpec::Table(seed) => Box::new(LookupTable::random(n, 2, *seed)?),
        ModelSpec::External(_) => unreachable!(),
    })
}

/// Argmax agreement for classifiers, the scalar gap for single-score models.
pub fn relation(model: &dyn Model, args: &ModelArgs) -> Outcome<PredictionRelation> {
    let rel = match (model.n_outputs(), args.gamma) {
        (1, Some(g)) => PredictionRelation::scalar_gap(g)?,
        (1, None) => PredictionRelation::for_outputs(1),
        (_, Some(_)) => return Err(Failure::config("--gamma applies only to single-output models")),
        (m, None) => PredictionRelation::for_outputs(m),
    };
    rel.validate(model.n_outputs())?;
    Ok(rel)
}
