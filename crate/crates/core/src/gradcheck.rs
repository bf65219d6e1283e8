//! Central finite-difference verification of the analytic loss gradients.
//!
//! The numerical side only ever evaluates forward values. For
//! [`GradMode::DetachedWeights`] the prediction-dependent weights are frozen
//! at the evaluation point and the frozen forward is recomputed here from
//! scratch, so the check does not share code with the analytic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{compute_pred_weights, GradMode, LossConfig, LossKind, Normalization};
use crate::map::{BinaryMap, SoftMap};

/// Denominator floor of the per-element relative error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let plus = f(&probe);
            probe[i] = orig - step;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// `max_i |a_i - n_i| / max(|a_i|, |n_i|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

fn ce(p: f64, y: u8, eps: f64) -> f64 {
    let p = p.clamp(eps, 1.0 - eps);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

fn weighted_ce(values: &[f64], gt: &BinaryMap, weights: &[f64], cfg: &LossConfig) -> f64 {
    let sum: f64 = values
        .iter()
        .zip(gt.values())
        .zip(weights)
        .map(|((&p, &y), &w)| w * ce(p, y, cfg.clamp_eps))
        .sum();
    match cfg.normalization {
        Normalization::PaperSum => sum,
        Normalization::PerPixelMean => sum / values.len() as f64,
    }
}

/// Forward value whose derivative the analytic gradient of `kind` under
/// `cfg.grad_mode` should match, as a function of the raw pixel values.
pub fn reference_forward<'a>(
    kind: LossKind,
    at: &SoftMap,
    gt: &'a BinaryMap,
    cfg: &'a LossConfig,
) -> impl Fn(&[f64]) -> f64 + 'a {
    let (h, w) = at.dims();
    let frozen = compute_pred_weights(at, cfg).weights;
    move |values: &[f64]| {
        let label = || {
            let pred = SoftMap::new(h, w, values.to_vec()).expect("probe stays in range");
            kind_value(LossKind::Wbce, &pred, gt, cfg)
        };
        let pred_term = || match cfg.grad_mode {
            GradMode::FullGradient => {
                let pred = SoftMap::new(h, w, values.to_vec()).expect("probe stays in range");
                kind_value(LossKind::Pred, &pred, gt, cfg)
            }
            GradMode::DetachedWeights => weighted_ce(values, gt, &frozen, cfg),
        };
        match kind {
            LossKind::Wbce => label(),
            LossKind::Pred => pred_term(),
            LossKind::Swbce => {
                let b = cfg.balance_b;
                (label() + b * pred_term()) / (1.0 + b)
            }
        }
    }
}

fn kind_value(kind: LossKind, pred: &SoftMap, gt: &BinaryMap, cfg: &LossConfig) -> f64 {
    kind.evaluate(pred, gt, cfg).expect("validated inputs").value
}

/// Random prediction in `[lo, hi]` and random ground truth with roughly
/// `edge_fraction` set pixels (at least one edge and one non-edge pixel).
pub fn random_instance(
    rng: &mut impl Rng,
    height: usize,
    width: usize,
    lo: f64,
    hi: f64,
    edge_fraction: f64,
) -> (SoftMap, BinaryMap) {
    let n = height * width;
    let values = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    let mut gt: Vec<u8> = (0..n)
        .map(|_| u8::from(rng.random_bool(edge_fraction)))
        .collect();
    gt[0] = 1;
    gt[n - 1] = 0;
    (
        SoftMap::new(height, width, values).expect("in range"),
        BinaryMap::new(height, width, gt).expect("binary"),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckRow {
    pub loss: LossKind,
    pub grad_mode: GradMode,
    pub trials: usize,
    pub worst_relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub trials: usize,
    pub size: usize,
    pub tolerance: f64,
    pub step: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 20,
            size: 8,
            tolerance: 1e-4,
            step: 1e-5,
        }
    }
}

/// Checks every loss in both gradient modes on `trials` random instances
/// with predictions in `[0.01, 0.99]`. A row passes when its worst relative
/// error is strictly below the tolerance.
pub fn run(cfg: &GradcheckConfig) -> Result<Vec<GradcheckRow>> {
    if cfg.trials == 0 || cfg.size == 0 {
        return Err(Error::InvalidConfig("gradcheck needs at least one trial and a non-empty map".into()));
    }
    if !(cfg.step > 0.0 && cfg.step < 0.005) {
        return Err(Error::InvalidConfig(format!("finite-difference step {} outside (0, 0.005)", cfg.step)));
    }
    if cfg.tolerance.is_nan() || cfg.tolerance < 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance must be nonnegative, got {}", cfg.tolerance)));
    }
    let mut rows = Vec::new();
    for kind in LossKind::ALL {
        for mode in [GradMode::DetachedWeights, GradMode::FullGradient] {
            let loss_cfg = LossConfig {
                grad_mode: mode,
                ..LossConfig::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.trials {
                let (pred, gt) = random_instance(&mut rng, cfg.size, cfg.size, 0.01, 0.99, 0.2);
                let analytic = kind.evaluate(&pred, &gt, &loss_cfg)?.gradient;
                let forward = reference_forward(kind, &pred, &gt, &loss_cfg);
                let numeric = central_difference(forward, pred.values(), cfg.step);
                worst = worst.max(max_relative_error(&analytic, &numeric, RELATIVE_ERROR_FLOOR));
            }
            rows.push(GradcheckRow {
                loss: kind,
                grad_mode: mode,
                trials: cfg.trials,
                worst_relative_error: worst,
                passed: worst < cfg.tolerance,
            });
        }
    }
    Ok(rows)
}
