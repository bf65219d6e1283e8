//! Strict edge-map evaluation: tolerance-radius pixel correspondence and
//! ODS / OIS / AP over a threshold sweep.

pub mod eval;
pub mod matching;

pub use eval::{
    average_precision, default_thresholds, evaluate, evaluate_dataset, pr_at_thresholds, threshold,
    EvalConfig, EvalItem, EvalReport, PrCurve, PrPoint, Tolerance,
};
pub use matching::{correspond, optimal_pairs, MatchCounts, Matching};
