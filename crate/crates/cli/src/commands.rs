//! One function per subcommand. Each validates its flags, loads items,
//! builds the model, runs the library operation per item and writes the
//! record.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use stabcert::bise::{
    curve_sizes, derive_indicator, exact_bise, insertion_bise, deletion_bise, ranking_stability, with_bounds,
    BiseMode, BiseScore, ClassicMetric, RankMetric, RankStability,
};
use stabcert::perturb::{PerturbationSpace, RankingPerturbation};
use stabcert::rng::derive_seed;
use stabcert::sca::{
    certify_hard, estimate_stability, estimate_stability_per_k, exact_stability, hard_sample_size,
    per_k_sample_size, soft_sample_size, stability_curve, CertificateReport, Tolerance,
};
use stabcert::smoothing::{mus_hard_radius, smooth_function_exact, wrap_smoothed, MusRadius, SmoothingConfig, SmoothingMode};
use stabcert::spectral::{
    change_of_basis_check, fourier_transform, inverse_fourier, monotone_transform, pbiased_transform,
    smooth_monotone, smooth_std, tail_bound, tail_mass, variance_reduction_check, DenseBooleanFunction,
};
use stabcert::{apply_mask, Concurrency, CountingModel, InputVector, Mask, Model, PredictionRelation};

use crate::args::{
    Basis, BiseArgs, CertifyArgs, CurveArgs, Estimator, Format, MetricArg, ModelArgs, OutputArgs, RankstabArgs,
    ServeArgs, SmoothArgs, SpectrumArgs, ToleranceArgs,
};
use crate::builtin::{build_model, parse_model, relation, ModelSpec};
use crate::failure::{Failure, Outcome};
use crate::items::{read_input, Input, Prepared};
use crate::record::{csv_bytes, emit, json_bytes, summarize, Evaluations, RunRecord, SummaryRow};

type Counted = CountingModel<Box<dyn Model>>;

struct Setup {
    input: Input,
    model: Counted,
    rel: PredictionRelation,
}

fn tolerance(t: &ToleranceArgs) -> Outcome<Tolerance> {
    Ok(Tolerance::new(t.epsilon, t.delta)?)
}

/// Loads the items, then builds the model sized to them.
fn setup(model: &ModelArgs, path: &std::path::Path) -> Outcome<Setup> {
    let spec = parse_model(&model.model)?;
    let input = read_input(path)?;
    let n = input.items[0].x.len();
    if let Some(flag) = model.n {
        if flag != n {
            return Err(Failure::config(format!("--n {flag} disagrees with the input's {n} features")));
        }
    }
    let built = build_model(&spec, Some(n))?;
    let rel = relation(built.as_ref(), model)?;
    Ok(Setup {
        input,
        model: CountingModel::new(built),
        rel,
    })
}

/// Runs `f` on every item, in parallel when the model allows it. Results
/// stay in item order.
fn map_items<T, F>(model: &Counted, items: &[Prepared], f: F) -> Outcome<Vec<T>>
where
    T: Send,
    F: Fn(usize, &Prepared) -> Outcome<T> + Sync,
{
    match model.concurrency() {
        Concurrency::Parallel => items.par_iter().enumerate().map(|(i, p)| f(i, p)).collect(),
        Concurrency::Serial => items.iter().enumerate().map(|(i, p)| f(i, p)).collect(),
    }
}

fn item_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

fn exact_count(alpha: &Mask, radius: usize) -> Outcome<u64> {
    let size = PerturbationSpace::new(alpha.clone(), radius).size();
    u64::try_from(&size)
        .map(|s| s + 1)
        .map_err(|_| Failure::config(format!("perturbation set of size {size} is too large to enumerate")))
}

/// Writes the record or its CSV rows, reports timing on stderr, then checks
/// evaluation accounting.
fn finish<T: Serialize, R: Serialize>(
    record: &RunRecord<T>,
    rows: &[R],
    output: &OutputArgs,
    started: Instant,
) -> Outcome<()> {
    let bytes = match output.format {
        Format::Json => json_bytes(record)?,
        Format::Csv => csv_bytes(rows)?,
    };
    emit(&bytes, output.out.as_deref())?;
    eprintln!(
        "{}: {} evaluations in {:.3}s",
        record.command,
        record.evaluations.counted,
        started.elapsed().as_secs_f64()
    );
    record.check_accounting()
}

#[derive(Debug, Serialize)]
pub struct CertifyRow {
    #[serde(flatten)]
    pub report: CertificateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_tau: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct CertifyItem {
    pub index: usize,
    pub kept: usize,
    pub mask: Mask,
    pub rows: Vec<CertifyRow>,
}

#[derive(Debug, Serialize)]
struct CertifyCsv {
    item: usize,
    radius: usize,
    effective_radius: usize,
    kind: String,
    tau_hat: f64,
    samples: usize,
    stable: usize,
    verdict: String,
    exact_tau: Option<f64>,
}

fn snake(value: impl Serialize) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn certify_csv(items: &[CertifyItem]) -> Vec<CertifyCsv> {
    items
        .iter()
        .flat_map(|it| {
            it.rows.iter().map(move |r| CertifyCsv {
                item: it.index,
                radius: r.report.radius,
                effective_radius: r.report.effective_radius,
                kind: snake(r.report.kind),
                tau_hat: r.report.tau_hat,
                samples: r.report.samples,
                stable: r.report.stable,
                verdict: snake(r.report.verdict),
                exact_tau: r.exact_tau,
            })
        })
        .collect()
}

/// Per-radius bootstraps of `τ̂`, and of the exact rate when present.
fn radius_summary(items: &[CertifyItem], radii: &[usize], seed: u64) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for (j, &r) in radii.iter().enumerate() {
        let taus: Vec<f64> = items.iter().map(|it| it.rows[j].report.tau_hat).collect();
        out.push(summarize(format!("tau_hat r={r}"), &taus, seed, 2 * j as u64));
        let exact: Vec<f64> = items.iter().filter_map(|it| it.rows[j].exact_tau).collect();
        if !exact.is_empty() {
            out.push(summarize(format!("exact_tau r={r}"), &exact, seed, 2 * j as u64 + 1));
        }
    }
    out
}

const SUMMARY_KEY: u64 = u64::MAX - 1;

fn check_radii(radii: &[usize], strictly_increasing: bool) -> Outcome<()> {
    if radii.is_empty() {
        return Err(Failure::config("need at least one radius"));
    }
    if strictly_increasing && radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Failure::config("radii must be strictly increasing"));
    }
    Ok(())
}

pub fn certify(args: &CertifyArgs) -> Outcome<()> {
    let started = Instant::now();
    let tol = tolerance(&args.tolerance)?;
    check_radii(&args.radii, false)?;
    let Setup { input, model, rel } = setup(&args.model, &args.input)?;
    let seed = args.output.seed;
    let per_run = |r: usize, d: usize| -> Outcome<u64> {
        Ok(1 + match args.estimator {
            Estimator::Soft => soft_sample_size(tol.epsilon, tol.delta)? as u64,
            Estimator::Hard => hard_sample_size(tol.epsilon, tol.delta)? as u64,
            Estimator::PerK => (per_k_sample_size(tol.epsilon, tol.delta, r)? * r.min(d)) as u64,
        })
    };
    let items = map_items(&model, &input.items, |i, p| {
        let alpha = &p.attribution.mask;
        let s = item_seed(seed, i);
        let rows = args
            .radii
            .iter()
            .map(|&r| {
                let rs = derive_seed(s, r as u64);
                let report = match args.estimator {
                    Estimator::Soft => estimate_stability(&model, &p.x, alpha, r, rel, tol, rs),
                    Estimator::Hard => certify_hard(&model, &p.x, alpha, r, rel, tol, rs),
                    Estimator::PerK => estimate_stability_per_k(&model, &p.x, alpha, r, rel, tol, rs),
                }?;
                let exact_tau = if args.exact {
                    Some(exact_stability(&model, &p.x, alpha, r, rel)?)
                } else {
                    None
                };
                Ok(CertifyRow { report, exact_tau })
            })
            .collect::<Outcome<Vec<_>>>()?;
        Ok(CertifyItem {
            index: i,
            kept: alpha.count_ones(),
            mask: alpha.clone(),
            rows,
        })
    })?;
    let mut analytic = 0;
    for p in &input.items {
        let alpha = &p.attribution.mask;
        let d = alpha.len() - alpha.count_ones();
        for &r in &args.radii {
            analytic += per_run(r, d)?;
            if args.exact {
                analytic += exact_count(alpha, r)?;
            }
        }
    }
    let summary = radius_summary(&items, &args.radii, derive_seed(seed, SUMMARY_KEY));
    let evaluations = Evaluations {
        counted: model.evaluations(),
        analytic: Some(analytic),
    };
    let rows = certify_csv(&items);
    let record = RunRecord::new("certify", args, Some(input.sha256), items, summary, evaluations)?;
    finish(&record, &rows, &args.output, started)
}

#[derive(Debug, Serialize)]
struct CurveCsv {
    item: usize,
    radius: usize,
    effective_radius: usize,
    tau_hat: f64,
    exact_tau: Option<f64>,
}

pub fn curve(args: &CurveArgs) -> Outcome<()> {
    let started = Instant::now();
    let tol = tolerance(&args.tolerance)?;
    check_radii(&args.radii, true)?;
    let Setup { input, model, rel } = setup(&args.model, &args.input)?;
    let seed = args.output.seed;
    let items = map_items(&model, &input.items, |i, p| {
        let alpha = &p.attribution.mask;
        let reports = stability_curve(&model, &p.x, alpha, &args.radii, rel, tol, item_seed(seed, i))?;
        let rows = reports
            .into_iter()
            .map(|report| {
                let exact_tau = if args.exact {
                    Some(exact_stability(&model, &p.x, alpha, report.radius, rel)?)
                } else {
                    None
                };
                Ok(CertifyRow { report, exact_tau })
            })
            .collect::<Outcome<Vec<_>>>()?;
        Ok(CertifyItem {
            index: i,
            kept: alpha.count_ones(),
            mask: alpha.clone(),
            rows,
        })
    })?;
    let per_radius = 1 + soft_sample_size(tol.epsilon, tol.delta)? as u64;
    let mut analytic = 0;
    for p in &input.items {
        for &r in &args.radii {
            analytic += per_radius;
            if args.exact {
                analytic += exact_count(&p.attribution.mask, r)?;
            }
        }
    }
    let rows: Vec<CurveCsv> = items
        .iter()
        .flat_map(|it| {
            it.rows.iter().map(move |r| CurveCsv {
                item: it.index,
                radius: r.report.radius,
                effective_radius: r.report.effective_radius,
                tau_hat: r.report.tau_hat,
                exact_tau: r.exact_tau,
            })
        })
        .collect();
    let summary = radius_summary(&items, &args.radii, derive_seed(seed, SUMMARY_KEY));
    let evaluations = Evaluations {
        counted: model.evaluations(),
        analytic: Some(analytic),
    };
    let record = RunRecord::new("curve", args, Some(input.sha256), items, summary, evaluations)?;
    finish(&record, &rows, &args.output, started)
}

#[derive(Debug, Serialize)]
pub struct SmoothLevel {
    pub lambda: f64,
    /// MuS radius at `x ⊙ α`; rigorous only for exact smoothing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mus_radius: Option<MusRadius>,
    /// `certified` under exact smoothing, `heuristic` under Monte-Carlo.
    pub mus_kind: &'static str,
    pub reports: Vec<CertificateReport>,
}

#[derive(Debug, Serialize)]
pub struct SmoothItem {
    pub index: usize,
    pub kept: usize,
    pub levels: Vec<SmoothLevel>,
}

#[derive(Debug, Serialize)]
struct SmoothCsv {
    item: usize,
    lambda: f64,
    radius: usize,
    tau_hat: f64,
    mus_r_real: Option<f64>,
    mus_r_int: Option<usize>,
    mus_kind: &'static str,
}

fn radius_kind(cfg: &SmoothingConfig) -> &'static str {
    // λ = 1 evaluates the model itself, so its radius is exact in either mode
    if cfg.mode == SmoothingMode::Exact || cfg.lambda == 1.0 {
        "certified"
    } else {
        "heuristic"
    }
}

fn smoothing_config(lambda: f64, args: &SmoothArgs) -> Outcome<SmoothingConfig> {
    Ok(if args.exact {
        SmoothingConfig::exact(lambda)?
    } else {
        SmoothingConfig::monte_carlo(lambda, args.mc_samples, args.output.seed)?
    })
}

pub fn smooth(args: &SmoothArgs) -> Outcome<()> {
    let started = Instant::now();
    let tol = tolerance(&args.tolerance)?;
    check_radii(&args.radii, false)?;
    if args.lambda.is_empty() {
        return Err(Failure::config("need at least one lambda"));
    }
    if let Some(l) = args.lambda.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
        return Err(Failure::config(format!("lambda must lie in (0, 1], got {l}")));
    }
    let configs = args
        .lambda
        .iter()
        .map(|&l| smoothing_config(l, args))
        .collect::<Outcome<Vec<_>>>()?;
    let Setup { input, model, rel } = setup(&args.model, &args.input)?;
    let seed = args.output.seed;
    let items = map_items(&model, &input.items, |i, p| {
        let alpha = &p.attribution.mask;
        let s = item_seed(seed, i);
        let levels = configs
            .iter()
            .map(|cfg| {
                let smoothed = wrap_smoothed(&model, *cfg)?;
                let reports = args
                    .radii
                    .iter()
                    .map(|&r| estimate_stability(&smoothed, &p.x, alpha, r, rel, tol, derive_seed(s, r as u64)))
                    .collect::<stabcert::Result<Vec<_>>>()?;
                let mus_radius = if model.n_outputs() >= 2 {
                    let out = smoothed.evaluate(&apply_mask(&p.x, alpha)?)?;
                    Some(mus_hard_radius(&out, cfg.lambda)?)
                } else {
                    None
                };
                Ok(SmoothLevel {
                    lambda: cfg.lambda,
                    mus_radius,
                    mus_kind: radius_kind(cfg),
                    reports,
                })
            })
            .collect::<Outcome<Vec<_>>>()?;
        Ok(SmoothItem {
            index: i,
            kept: alpha.count_ones(),
            levels,
        })
    })?;
    // Exact smoothing costs depend on each sampled input's support, so only
    // Monte-Carlo runs have a closed-form count.
    let analytic = if args.exact {
        None
    } else {
        let calls = args.radii.len() as u64 * (1 + soft_sample_size(tol.epsilon, tol.delta)? as u64)
            + (model.n_outputs() >= 2) as u64;
        let per_item: u64 = configs
            .iter()
            .map(|c| calls * if c.lambda == 1.0 { 1 } else { c.samples as u64 })
            .sum();
        Some(per_item * input.items.len() as u64)
    };
    let mut rows = Vec::new();
    for it in &items {
        for lvl in &it.levels {
            for r in &lvl.reports {
                rows.push(SmoothCsv {
                    item: it.index,
                    lambda: lvl.lambda,
                    radius: r.radius,
                    tau_hat: r.tau_hat,
                    mus_r_real: lvl.mus_radius.map(|m| m.r_real),
                    mus_r_int: lvl.mus_radius.map(|m| m.r_int),
                    mus_kind: lvl.mus_kind,
                });
            }
        }
    }
    let sseed = derive_seed(seed, SUMMARY_KEY);
    let mut summary = Vec::new();
    for (a, cfg) in configs.iter().enumerate() {
        for (b, &r) in args.radii.iter().enumerate() {
            let taus: Vec<f64> = items.iter().map(|it| it.levels[a].reports[b].tau_hat).collect();
            let key = (a * args.radii.len() + b) as u64;
            summary.push(summarize(format!("tau_hat lambda={} r={r}", cfg.lambda), &taus, sseed, key));
        }
    }
    let evaluations = Evaluations {
        counted: model.evaluations(),
        analytic,
    };
    let config = SmoothConfig {
        args,
        mode: if args.exact {
            SmoothingMode::Exact
        } else {
            SmoothingMode::MonteCarlo
        },
    };
    let record = RunRecord::new("smooth", &config, Some(input.sha256), items, summary, evaluations)?;
    finish(&record, &rows, &args.output, started)
}

#[derive(Serialize)]
struct SmoothConfig<'a> {
    #[serde(flatten)]
    args: &'a SmoothArgs,
    mode: SmoothingMode,
}

#[derive(Debug, Serialize)]
pub struct BiseItem {
    pub index: usize,
    pub ranking: Vec<usize>,
    pub insertion: BiseScore,
    pub deletion: BiseScore,
}

#[derive(Debug, Serialize)]
struct BiseCsv {
    item: usize,
    mode: String,
    k: usize,
    phi: f64,
    lower: Option<f64>,
    upper: Option<f64>,
}

fn bise_csv(index: usize, score: &BiseScore) -> Vec<BiseCsv> {
    score
        .ks
        .iter()
        .zip(&score.values)
        .map(|(&k, &phi)| BiseCsv {
            item: index,
            mode: snake(score.mode),
            k,
            phi,
            lower: score.bounds.map(|b| (phi - b.half_width).max(0.0)),
            upper: score.bounds.map(|b| (phi + b.half_width).min(1.0)),
        })
        .collect()
}

/// Evaluations for one sampled BISE curve: pairs of `2m` calls for every
/// nonempty set on the curve.
fn bise_evaluations(n: usize, step: usize, m: usize, mode: BiseMode) -> Outcome<u64> {
    let ks = curve_sizes(n, step)?;
    let nonempty = match mode {
        BiseMode::Insertion => ks.len(),
        BiseMode::Deletion => ks.iter().filter(|&&k| k < n).count(),
    };
    Ok((2 * m * nonempty) as u64)
}

pub fn bise(args: &BiseArgs) -> Outcome<()> {
    let started = Instant::now();
    tolerance(&args.tolerance)?;
    if args.step == 0 || args.m == 0 {
        return Err(Failure::config("--step and --m must be at least 1"));
    }
    let Setup { input, model, rel } = setup(&args.model, &args.input)?;
    let n = input.items[0].x.len();
    let seed = args.output.seed;
    let (eps, delta) = (args.tolerance.epsilon, args.tolerance.delta);
    let items = map_items(&model, &input.items, |i, p| {
        let g = derive_indicator(&model, &p.x, rel)?;
        let ranking = &p.attribution.ranking;
        let (insertion, deletion) = if args.exact {
            let table = g.tabulate()?;
            (
                exact_bise(&table, ranking, BiseMode::Insertion, args.step)?,
                exact_bise(&table, ranking, BiseMode::Deletion, args.step)?,
            )
        } else {
            let s = item_seed(seed, i);
            (
                with_bounds(insertion_bise(&g, ranking, args.step, args.m, s)?, eps, delta)?,
                with_bounds(deletion_bise(&g, ranking, args.step, args.m, s)?, eps, delta)?,
            )
        };
        Ok(BiseItem {
            index: i,
            ranking: ranking.clone(),
            insertion,
            deletion,
        })
    })?;
    let per_item = 1 + if args.exact {
        1u64 << n
    } else {
        bise_evaluations(n, args.step, args.m, BiseMode::Insertion)?
            + bise_evaluations(n, args.step, args.m, BiseMode::Deletion)?
    };
    let rows: Vec<BiseCsv> = items
        .iter()
        .flat_map(|it| {
            let mut rows = bise_csv(it.index, &it.insertion);
            rows.extend(bise_csv(it.index, &it.deletion));
            rows
        })
        .collect();
    let sseed = derive_seed(seed, SUMMARY_KEY);
    let ins: Vec<f64> = items.iter().map(|it| it.insertion.auc).collect();
    let del: Vec<f64> = items.iter().map(|it| it.deletion.auc).collect();
    let summary = vec![
        summarize("insertion auc", &ins, sseed, 0),
        summarize("deletion auc", &del, sseed, 1),
    ];
    let evaluations = Evaluations {
        counted: model.evaluations(),
        analytic: Some(per_item * input.items.len() as u64),
    };
    let record = RunRecord::new("bise", args, Some(input.sha256), items, summary, evaluations)?;
    finish(&record, &rows, &args.output, started)
}

pub fn parse_perturbation(s: &str) -> Outcome<RankingPerturbation> {
    let bad = || Failure::config(format!("bad perturbation {s:?}; expected window:<size> or swap:<pairs>"));
    let (kind, size) = s.split_once(':').ok_or_else(bad)?;
    let size: usize = size.parse().map_err(|_| bad())?;
    match kind {
        "window" => Ok(RankingPerturbation::Window(size)),
        "swap" => Ok(RankingPerturbation::Swap(size)),
        _ => Err(bad()),
    }
}

#[derive(Debug, Serialize)]
pub struct RankstabItem {
    pub index: usize,
    #[serde(flatten)]
    pub stability: RankStability,
}

#[derive(Debug, Serialize)]
struct RankstabCsv {
    item: usize,
    pool_size: usize,
    trials: usize,
    mean_percent: f64,
    sd: f64,
}

fn rank_metric(args: &RankstabArgs, seed: u64, rel: PredictionRelation) -> RankMetric {
    let sampled = |mode| RankMetric::Bise {
        mode,
        step: args.step,
        m: args.m,
        seed,
        relation: rel,
    };
    let classic = |metric| RankMetric::Classic { metric, step: args.step };
    match args.metric {
        MetricArg::InsertionBise => sampled(BiseMode::Insertion),
        MetricArg::DeletionBise => sampled(BiseMode::Deletion),
        MetricArg::Insertion => classic(ClassicMetric::Insertion),
        MetricArg::Deletion => classic(ClassicMetric::Deletion),
        MetricArg::Morf => classic(ClassicMetric::Morf),
        MetricArg::Lerf => classic(ClassicMetric::Lerf),
    }
}

/// Evaluations for scoring one ranking once.
fn score_evaluations(metric: &RankMetric, n: usize) -> Outcome<u64> {
    Ok(match *metric {
        RankMetric::Bise { mode, step, m, .. } => 1 + bise_evaluations(n, step, m, mode)?,
        RankMetric::Classic { step, .. } => 1 + curve_sizes(n, step)?.len() as u64,
    })
}

pub fn rankstab(args: &RankstabArgs) -> Outcome<()> {
    let started = Instant::now();
    let perturbation = parse_perturbation(&args.perturbation)?;
    if args.trials == 0 || args.step == 0 || args.m == 0 {
        return Err(Failure::config("--trials, --step and --m must be at least 1"));
    }
    let Setup { input, model, rel } = setup(&args.model, &args.input)?;
    let n = input.items[0].x.len();
    perturbation.validate(n)?;
    let seed = args.output.seed;
    let items = map_items(&model, &input.items, |i, p| {
        let s = item_seed(seed, i);
        let metric = rank_metric(args, s, rel);
        let stability = ranking_stability(&metric, &model, &p.x, &p.pool, perturbation, args.trials, s)?;
        Ok(RankstabItem { index: i, stability })
    })?;
    let per_score = score_evaluations(&rank_metric(args, 0, rel), n)?;
    let analytic: u64 = input
        .items
        .iter()
        .map(|p| per_score * (p.pool.len() * (1 + args.trials)) as u64)
        .sum();
    let rows: Vec<RankstabCsv> = items
        .iter()
        .map(|it| RankstabCsv {
            item: it.index,
            pool_size: it.stability.pool_size,
            trials: it.stability.trials,
            mean_percent: it.stability.mean_percent,
            sd: it.stability.sd,
        })
        .collect();
    let percents: Vec<f64> = items.iter().map(|it| it.stability.mean_percent).collect();
    let summary = vec![summarize("mean_percent", &percents, derive_seed(seed, SUMMARY_KEY), 0)];
    let evaluations = Evaluations {
        counted: model.evaluations(),
        analytic: Some(analytic),
    };
    let config = RankstabConfig { args, perturbation };
    let record = RunRecord::new("rankstab", &config, Some(input.sha256), items, summary, evaluations)?;
    finish(&record, &rows, &args.output, started)
}

#[derive(Serialize)]
struct RankstabConfig<'a> {
    #[serde(flatten)]
    args: &'a RankstabArgs,
    perturbation: RankingPerturbation,
}

/// A named identity check with its worst observed error.
#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub lambda: f64,
    pub error: f64,
    pub ok: bool,
}

#[derive(Debug, Serialize)]
pub struct SmoothedSpectrum {
    pub lambda: f64,
    pub fourier: Vec<f64>,
    pub monotone: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub class: usize,
    pub x: Vec<f64>,
    pub p: f64,
    pub fourier: Vec<f64>,
    pub monotone: Vec<f64>,
    pub pbiased: Vec<f64>,
    pub smoothed: Vec<SmoothedSpectrum>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Serialize)]
struct SpectrumCsv {
    subset_bitmask: usize,
    degree: u32,
    coefficient: f64,
}

const CHECK_TOL: f64 = 1e-9;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn spectrum_checks(h: &DenseBooleanFunction, p: f64, lambda: f64) -> Outcome<(SmoothedSpectrum, Vec<Check>)> {
    let n = h.n();
    let scale = h.table().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = CHECK_TOL * scale;
    let fourier = fourier_transform(h);
    let monotone = monotone_transform(h);
    let direct = smooth_function_exact(h, lambda)?;
    let smoothed_fourier = smooth_std(&fourier, lambda)?;
    let smoothed_monotone = smooth_monotone(&monotone, lambda)?;
    let mut checks = Vec::new();
    let err = inverse_fourier(&smoothed_fourier).max_abs_diff(&direct);
    checks.push(Check {
        name: "fourier_operator",
        lambda,
        error: err,
        ok: err <= tol,
    });
    let err = max_diff(smoothed_monotone.coeffs(), monotone_transform(&direct).coeffs());
    checks.push(Check {
        name: "monotone_contraction",
        lambda,
        error: err * 2f64.powi(-(n as i32)),
        ok: err * 2f64.powi(-(n as i32)) <= tol,
    });
    // worst excess of a smoothed tail over its bound
    let excess = (0..=n)
        .map(|k| tail_mass(&smoothed_fourier, k) - tail_bound(n, k, lambda) * tail_mass(&fourier, k))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check {
        name: "tail_mass",
        lambda,
        error: excess.max(0.0),
        ok: excess <= tol,
    });
    if p <= lambda {
        let cob = change_of_basis_check(&pbiased_transform(h, p)?, lambda)?;
        checks.push(Check {
            name: "change_of_basis",
            lambda,
            error: cob.function_error.max(cob.basis_error),
            ok: cob.ok,
        });
        let vr = variance_reduction_check(h, p, lambda)?;
        checks.push(Check {
            name: "variance_reduction",
            lambda,
            error: (vr.lhs - vr.rhs).max(0.0),
            ok: vr.ok && vr.second_moment_ok,
        });
    }
    let level = SmoothedSpectrum {
        lambda,
        fourier: smoothed_fourier.coeffs().to_vec(),
        monotone: smoothed_monotone.coeffs().to_vec(),
    };
    Ok((level, checks))
}

fn spectrum_csv(coeffs: &[f64]) -> Vec<SpectrumCsv> {
    coeffs
        .iter()
        .enumerate()
        .map(|(s, &c)| SpectrumCsv {
            subset_bitmask: s,
            degree: s.count_ones(),
            coefficient: c,
        })
        .collect()
}

pub fn spectrum(args: &SpectrumArgs) -> Outcome<()> {
    let started = Instant::now();
    if args.lambda.is_empty() {
        return Err(Failure::config("need at least one lambda"));
    }
    if let Some(l) = args.lambda.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Failure::config(format!("lambda must lie in [0, 1], got {l}")));
    }
    let smallest = args.lambda.iter().copied().fold(1.0, f64::min);
    let p = args.p.unwrap_or(if smallest > 0.0 && smallest < 1.0 { smallest } else { 0.5 });
    if !(p > 0.0 && p < 1.0) {
        return Err(Failure::config(format!("p must lie in (0, 1), got {p}")));
    }
    let spec = parse_model(&args.model.model)?;
    let input = args.input.as_deref().map(read_input).transpose()?;
    let x = match &input {
        Some(input) => input.items[0].x.clone(),
        None => {
            let n = match (&spec, args.model.n) {
                (_, Some(n)) => n,
                (ModelSpec::External(_), None) => 0,
                (_, None) => 2,
            };
            InputVector(vec![1.0; n])
        }
    };
    let n_hint = if x.is_empty() { None } else { Some(x.len()) };
    if let (Some(flag), Some(n)) = (args.model.n, n_hint) {
        if flag != n {
            return Err(Failure::config(format!("--n {flag} disagrees with the input's {n} features")));
        }
    }
    let model = CountingModel::new(build_model(&spec, n_hint)?);
    let x = if x.is_empty() {
        InputVector(vec![1.0; model.n_features()])
    } else {
        x
    };
    let n = x.len();
    if args.class >= model.n_outputs() {
        return Err(Failure::config(format!(
            "class {} out of range for {} outputs",
            args.class,
            model.n_outputs()
        )));
    }
    let h = DenseBooleanFunction::from_model(&model, &x, args.class)?;
    let fourier = fourier_transform(&h);
    let monotone = monotone_transform(&h);
    let pbiased = pbiased_transform(&h, p)?;
    let mut smoothed = Vec::new();
    let mut checks = Vec::new();
    for &lambda in &args.lambda {
        let (level, c) = spectrum_checks(&h, p, lambda)?;
        smoothed.push(level);
        checks.extend(c);
    }
    let rows = spectrum_csv(match args.basis {
        Basis::Std => fourier.coeffs(),
        Basis::Monotone => monotone.coeffs(),
        Basis::Pbiased => pbiased.coeffs(),
    });
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.ok)
        .map(|c| format!("{} at lambda {} (error {:e})", c.name, c.lambda, c.error))
        .collect();
    let report = SpectrumReport {
        n,
        class: args.class,
        x: x.0,
        p,
        fourier: fourier.coeffs().to_vec(),
        monotone: monotone.coeffs().to_vec(),
        pbiased: pbiased.coeffs().to_vec(),
        smoothed,
        checks,
    };
    let evaluations = Evaluations {
        counted: model.evaluations(),
        analytic: Some(1u64 << n),
    };
    let config = SpectrumConfig { args, p };
    let input_sha = input.map(|i| i.sha256);
    let record = RunRecord::new("spectrum", &config, input_sha, vec![report], Vec::new(), evaluations)?;
    finish(&record, &rows, &args.output, started)?;
    if !failed.is_empty() {
        return Err(Failure::Invariant(failed.join("; ")));
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumConfig<'a> {
    #[serde(flatten)]
    args: &'a SpectrumArgs,
    p: f64,
}

pub fn serve(args: &ServeArgs) -> Outcome<()> {
    let spec = parse_model(&args.model.model)?;
    if matches!(spec, ModelSpec::External(_)) {
        return Err(Failure::config("serve runs builtin models only"));
    }
    let model = build_model(&spec, args.model.n)?;
    let stdin = std::io::stdin();
    stabcert::external::serve(&model, stdin.lock(), std::io::stdout().lock())?;
    Ok(())
}
