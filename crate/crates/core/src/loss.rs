//! Label-weighted cross-entropy (WBCE), the prediction-weighted
//! cross-entropy, and their symmetrized combination (SWBCE).
//!
//! Every loss is reported with its exact gradient with respect to the raw
//! prediction values. Predictions only enter the logarithms after clamping
//! to `[clamp_eps, 1 - clamp_eps]`; the prediction-derived weights use the
//! raw values, so all-zero and all-one predictions give exactly zero
//! prediction-weighted loss.
//!
//! All reductions are sequential in row-major pixel order, so results do
//! not depend on the thread count of the caller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{BinaryMap, SoftMap};

/// How gradients treat the prediction-dependent weights of the
/// prediction-weighted loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    /// Weights and the predicted-mass sums are treated as constants.
    #[default]
    DetachedWeights,
    /// Differentiates through the weights as well. Every pixel's weight
    /// depends on the total predicted mass, which adds one shared term to
    /// every pixel's gradient.
    FullGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Plain sum over pixels.
    #[default]
    PaperSum,
    /// Sum divided by the pixel count.
    PerPixelMean,
}

impl std::str::FromStr for GradMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detached" | "detached_weights" => Ok(GradMode::DetachedWeights),
            "full" | "full_gradient" => Ok(GradMode::FullGradient),
            other => Err(Error::InvalidConfig(format!("unknown gradient mode '{other}'"))),
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" | "paper_sum" => Ok(Normalization::PaperSum),
            "mean" | "per_pixel_mean" => Ok(Normalization::PerPixelMean),
            other => Err(Error::InvalidConfig(format!("unknown normalization '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Non-edge weight multiplier of the label-weighted loss.
    pub lambda_label: f64,
    /// Predicted-edge weight multiplier of the prediction-weighted loss.
    pub lambda_pred: f64,
    /// Mixing weight of the prediction-weighted term in SWBCE.
    pub balance_b: f64,
    pub clamp_eps: f64,
    pub grad_mode: GradMode,
    pub normalization: Normalization,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_label: 1.1,
            lambda_pred: 1.1,
            balance_b: 1.0,
            clamp_eps: 1e-7,
            grad_mode: GradMode::DetachedWeights,
            normalization: Normalization::PaperSum,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_label > 0.0 && self.lambda_label.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_label must be positive, got {}",
                self.lambda_label
            )));
        }
        if !(self.lambda_pred > 0.0 && self.lambda_pred.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_pred must be positive, got {}",
                self.lambda_pred
            )));
        }
        if !(self.balance_b >= 0.0 && self.balance_b.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "balance b must be a nonnegative finite number, got {}",
                self.balance_b
            )));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "clamp_eps must lie in (0, 0.5), got {}",
                self.clamp_eps
            )));
        }
        Ok(())
    }
}

/// Which loss to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Label-weighted cross-entropy.
    Wbce,
    /// Prediction-weighted cross-entropy on its own.
    Pred,
    /// Symmetrized combination of the two.
    Swbce,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Wbce, LossKind::Pred, LossKind::Swbce];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Wbce => "wbce",
            LossKind::Pred => "pred",
            LossKind::Swbce => "swbce",
        }
    }

    pub fn evaluate(self, pred: &SoftMap, gt: &BinaryMap, cfg: &LossConfig) -> Result<LossResult> {
        match self {
            LossKind::Wbce => label_loss(pred, gt, cfg),
            LossKind::Pred => pred_loss(pred, gt, cfg),
            LossKind::Swbce => swbce_loss(pred, gt, cfg),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wbce" => Ok(LossKind::Wbce),
            "pred" => Ok(LossKind::Pred),
            "swbce" => Ok(LossKind::Swbce),
            other => Err(Error::InvalidConfig(format!("unknown loss '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// dL/dŷ per pixel, row-major, same shape as the prediction.
    pub gradient: Vec<f64>,
    pub height: usize,
    pub width: usize,
}

/// Weights of the label-weighted loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelWeights {
    /// Fraction of non-edge pixels in the ground truth.
    pub alpha: f64,
    pub weights: Vec<f64>,
}

/// Weights of the prediction-weighted loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PredWeights {
    /// Total predicted edge mass.
    pub i_pos: f64,
    /// Pixel count minus `i_pos`.
    pub i_neg: f64,
    pub weights: Vec<f64>,
}

/// Both weight sides for one prediction/ground-truth pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMaps {
    pub label: LabelWeights,
    pub pred: PredWeights,
}

impl WeightMaps {
    pub fn compute(pred: &SoftMap, gt: &BinaryMap, cfg: &LossConfig) -> Result<Self> {
        Error::check_dims(gt.dims(), pred.dims())?;
        Ok(Self {
            label: compute_label_weights(gt, cfg),
            pred: compute_pred_weights(pred, cfg),
        })
    }
}

/// Edge pixels get `alpha = |Y-|/|Y|`, non-edge pixels `lambda_label * (1 - alpha)`.
pub fn compute_label_weights(gt: &BinaryMap, cfg: &LossConfig) -> LabelWeights {
    let total = gt.len() as f64;
    let negatives = (gt.len() - gt.count_ones()) as f64;
    let alpha = negatives / total;
    let pos_w = alpha;
    let neg_w = cfg.lambda_label * (1.0 - alpha);
    let weights = gt
        .values()
        .iter()
        .map(|&y| if y == 1 { pos_w } else { neg_w })
        .collect();
    LabelWeights { alpha, weights }
}

/// `w_i = ŷ_i * I_N / n + (1 - ŷ_i) * lambda_pred * I_P / n` with
/// `I_P = Σ ŷ` and `I_N = n - I_P`.
pub fn compute_pred_weights(pred: &SoftMap, cfg: &LossConfig) -> PredWeights {
    let n = pred.len() as f64;
    let i_pos: f64 = pred.values().iter().sum();
    let i_neg = n - i_pos;
    let on_edge = i_neg / n;
    let off_edge = cfg.lambda_pred * i_pos / n;
    let weights = pred
        .values()
        .iter()
        .map(|&p| p * on_edge + (1.0 - p) * off_edge)
        .collect();
    PredWeights {
        i_pos,
        i_neg,
        weights,
    }
}

/// Per-pixel cross-entropy `-[y ln ŷ + (1-y) ln(1-ŷ)]` at the clamped
/// prediction, together with its derivative with respect to the raw
/// prediction (zero where the clamp is active).
fn cross_entropy(p: f64, y: u8, eps: f64) -> (f64, f64) {
    let inside = p >= eps && p <= 1.0 - eps;
    let pc = p.clamp(eps, 1.0 - eps);
    if y == 1 {
        (-pc.ln(), if inside { -1.0 / pc } else { 0.0 })
    } else {
        (-(1.0 - pc).ln(), if inside { 1.0 / (1.0 - pc) } else { 0.0 })
    }
}

fn normalize(mut value: f64, gradient: &mut [f64], norm: Normalization) -> f64 {
    if norm == Normalization::PerPixelMean {
        let n = gradient.len() as f64;
        value /= n;
        gradient.iter_mut().for_each(|g| *g /= n);
    }
    value
}

fn finish(value: f64, mut gradient: Vec<f64>, pred: &SoftMap, cfg: &LossConfig) -> LossResult {
    let value = normalize(value, &mut gradient, cfg.normalization);
    LossResult {
        value,
        gradient,
        height: pred.height(),
        width: pred.width(),
    }
}

/// Label-weighted cross-entropy (WBCE). Weights depend on the ground truth
/// only, so both gradient modes agree.
pub fn label_loss(pred: &SoftMap, gt: &BinaryMap, cfg: &LossConfig) -> Result<LossResult> {
    check_inputs(pred, gt, cfg)?;
    let (value, gradient) = label_sum(pred, gt, cfg);
    Ok(finish(value, gradient, pred, cfg))
}

/// Prediction-weighted cross-entropy.
pub fn pred_loss(pred: &SoftMap, gt: &BinaryMap, cfg: &LossConfig) -> Result<LossResult> {
    check_inputs(pred, gt, cfg)?;
    let (value, gradient) = pred_sum(pred, gt, cfg);
    Ok(finish(value, gradient, pred, cfg))
}

/// `(L_label + b * L_pred) / (1 + b)`.
pub fn swbce_loss(pred: &SoftMap, gt: &BinaryMap, cfg: &LossConfig) -> Result<LossResult> {
    check_inputs(pred, gt, cfg)?;
    let (label, label_grad) = label_sum(pred, gt, cfg);
    let (predw, pred_grad) = pred_sum(pred, gt, cfg);
    let b = cfg.balance_b;
    let denom = 1.0 + b;
    let value = (label + b * predw) / denom;
    let gradient = label_grad
        .iter()
        .zip(&pred_grad)
        .map(|(&gl, &gp)| (gl + b * gp) / denom)
        .collect();
    Ok(finish(value, gradient, pred, cfg))
}

fn check_inputs(pred: &SoftMap, gt: &BinaryMap, cfg: &LossConfig) -> Result<()> {
    cfg.validate()?;
    Error::check_dims(gt.dims(), pred.dims())
}

fn label_sum(pred: &SoftMap, gt: &BinaryMap, cfg: &LossConfig) -> (f64, Vec<f64>) {
    let weights = compute_label_weights(gt, cfg);
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(pred.len());
    for ((&p, &y), &w) in pred.values().iter().zip(gt.values()).zip(&weights.weights) {
        let (ce, dce) = cross_entropy(p, y, cfg.clamp_eps);
        value += w * ce;
        gradient.push(w * dce);
    }
    (value, gradient)
}

fn pred_sum(pred: &SoftMap, gt: &BinaryMap, cfg: &LossConfig) -> (f64, Vec<f64>) {
    let weights = compute_pred_weights(pred, cfg);
    let n = pred.len() as f64;
    let lambda = cfg.lambda_pred;

    let mut value = 0.0;
    let mut ce_terms = Vec::with_capacity(pred.len());
    let mut gradient = Vec::with_capacity(pred.len());
    for ((&p, &y), &w) in pred.values().iter().zip(gt.values()).zip(&weights.weights) {
        let (ce, dce) = cross_entropy(p, y, cfg.clamp_eps);
        value += w * ce;
        ce_terms.push(ce);
        gradient.push(w * dce);
    }

    if cfg.grad_mode == GradMode::FullGradient {
        // dw_i/dŷ_j = δ_ij (I_N - λ I_P)/n + ((1 - ŷ_i) λ - ŷ_i)/n
        let own = (weights.i_neg - lambda * weights.i_pos) / n;
        let shared: f64 = pred
            .values()
            .iter()
            .zip(&ce_terms)
            .map(|(&p, &ce)| ce * ((1.0 - p) * lambda - p))
            .sum::<f64>()
            / n;
        for (g, &ce) in gradient.iter_mut().zip(&ce_terms) {
            *g += ce * own + shared;
        }
    }
    (value, gradient)
}

/// Deep-supervision style combination of SWBCE over several output levels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLevelLoss {
    /// Unweighted SWBCE per level.
    pub levels: Vec<LossResult>,
    /// `Σ_k w_k * levels[k].value`.
    pub total: f64,
}

impl MultiLevelLoss {
    /// Gradient of `total` with respect to level `k`'s prediction.
    pub fn weighted_gradient(&self, k: usize, level_weights: &[f64]) -> Vec<f64> {
        self.levels[k]
            .gradient
            .iter()
            .map(|g| g * level_weights[k])
            .collect()
    }
}

pub fn multi_level_loss(
    preds: &[SoftMap],
    gt: &BinaryMap,
    level_weights: &[f64],
    cfg: &LossConfig,
) -> Result<MultiLevelLoss> {
    if preds.is_empty() {
        return Err(Error::EmptyLevelList);
    }
    if level_weights.len() != preds.len() {
        return Err(Error::InvalidConfig(format!(
            "{} level weights for {} levels",
            level_weights.len(),
            preds.len()
        )));
    }
    if let Some(w) = level_weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidConfig(format!(
            "level weights must be nonnegative, got {w}"
        )));
    }
    let levels = preds
        .iter()
        .map(|p| swbce_loss(p, gt, cfg))
        .collect::<Result<Vec<_>>>()?;
    let total = levels
        .iter()
        .zip(level_weights)
        .fold(0.0, |acc, (l, w)| acc + w * l.value);
    Ok(MultiLevelLoss { levels, total })
}
