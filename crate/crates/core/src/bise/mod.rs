//! Influence-based insertion and deletion scores for feature rankings,
//! classic insertion/deletion baselines, and ranking-robustness experiments.

mod classic;
mod indicator;
mod influence;
mod rankstab;
mod score;

pub use classic::{classic_curve, deletion_test, insertion_test, lerf, morf, ClassicCurve, ClassicMetric};
pub use indicator::{derive_indicator, BooleanOracle, ModelIndicator, TableIndicator, INDICATOR_CONSTRUCTION};
pub use influence::{exact_influence, influence_estimate, InfluenceEstimate};
pub use rankstab::{ranking_stability, RankMetric, RankStability};
pub use score::{
    bise, bise_bounds, curve_sizes, deletion_bise, exact_bise, insertion_bise, optimal_m_report, with_bounds,
    BiseBounds, BiseMode, BiseScore, OptimalMReport, OptimalMRow, DEFAULT_M, DEFAULT_STEP, OPTIMAL_M_GRID,
};
