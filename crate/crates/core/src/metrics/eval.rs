//! Threshold sweeps and ODS / OIS / AP aggregation.
//!
//! * ODS: best F over thresholds, from counts summed over all images.
//! * OIS: F from counts summed at each image's own best-F threshold.
//! * AP: trapezoidal area under the dataset precision-recall points,
//!   sorted by recall with duplicate recalls collapsed to their maximum
//!   precision. The curve is anchored at recall 0 with the precision of its
//!   lowest-recall point, so a perfect detector scores 1.
//!
//! Ties between thresholds resolve to the lowest threshold. Predictions are
//! matched as thresholded, without thinning.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::{correspond, f_measure, MatchCounts, Matching};
use crate::error::{Error, Result};
use crate::map::{BinaryMap, SoftMap};
use crate::pgm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    /// Fixed radius in pixels.
    Pixels(f64),
    /// Fraction of the image diagonal.
    DiagonalRatio(f64),
}

impl Tolerance {
    pub fn resolve(self, height: usize, width: usize) -> f64 {
        match self {
            Tolerance::Pixels(px) => px,
            Tolerance::DiagonalRatio(r) => {
                let (h, w) = (height as f64, width as f64);
                r * (h * h + w * w).sqrt()
            }
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::Pixels(1.0)
    }
}

/// `0.01, 0.02, ..., 0.99`.
pub fn default_thresholds() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub tolerance: Tolerance,
    pub thresholds: Vec<f64>,
    pub matching: Matching,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tolerance: Tolerance::default(),
            thresholds: default_thresholds(),
            matching: Matching::OptimalAssignment,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        match self.tolerance {
            Tolerance::Pixels(px) if !(px >= 0.0 && px.is_finite()) => {
                return Err(Error::InvalidConfig(format!(
                    "pixel tolerance must be >= 0, got {px}"
                )))
            }
            Tolerance::DiagonalRatio(r) if !(r > 0.0 && r.is_finite()) => {
                return Err(Error::InvalidConfig(format!(
                    "diagonal ratio must be > 0, got {r}"
                )))
            }
            _ => {}
        }
        if self.thresholds.is_empty() {
            return Err(Error::InvalidConfig("no thresholds".into()));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::InvalidConfig("thresholds must lie in (0, 1)".into()));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "thresholds must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Pixel is set iff `value >= t`.
pub fn threshold(pred: &SoftMap, t: f64) -> BinaryMap {
    let values = pred.values().iter().map(|&v| u8::from(v >= t)).collect();
    BinaryMap::new(pred.height(), pred.width(), values).expect("binary by construction")
}

/// Match counts at every configured threshold.
pub fn pr_at_thresholds(pred: &SoftMap, gt: &BinaryMap, cfg: &EvalConfig) -> Result<Vec<MatchCounts>> {
    cfg.validate()?;
    Error::check_dims(gt.dims(), pred.dims())?;
    let tol = cfg.tolerance.resolve(gt.height(), gt.width());
    cfg.thresholds
        .iter()
        .map(|&t| correspond(&threshold(pred, t), gt, tol, cfg.matching))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub counts: MatchCounts,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl PrPoint {
    pub fn new(threshold: f64, counts: MatchCounts) -> Self {
        let precision = counts.precision();
        let recall = counts.recall();
        Self {
            threshold,
            counts,
            precision,
            recall,
            f_measure: f_measure(precision, recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveScope {
    Dataset,
    Image(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub scope: CurveScope,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    /// Index of the best-F point, lowest threshold on ties.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if p.f_measure > self.points[best].f_measure {
                best = i;
            }
        }
        best
    }

    /// `threshold,tp,fp,fn,precision,recall,f` with LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,tp,fp,fn,precision,recall,f\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:.6},{},{},{},{:.6},{:.6},{:.6}",
                p.threshold, p.counts.tp, p.counts.fp, p.counts.fn_, p.precision, p.recall, p.f_measure
            );
        }
        out
    }
}

/// Trapezoidal area under precision-recall points (see module docs).
pub fn average_precision(points: &[PrPoint]) -> f64 {
    let mut by_recall: BTreeMap<u64, f64> = BTreeMap::new();
    for p in points {
        let slot = by_recall.entry(p.recall.to_bits()).or_insert(p.precision);
        *slot = slot.max(p.precision);
    }
    // Nonnegative f64 bit patterns sort like the values themselves.
    let curve: Vec<(f64, f64)> = by_recall
        .into_iter()
        .map(|(r, p)| (f64::from_bits(r), p))
        .collect();
    let Some(&(r0, p0)) = curve.first() else {
        return 0.0;
    };
    let mut area = r0 * p0;
    for w in curve.windows(2) {
        let ((ra, pa), (rb, pb)) = (w[0], w[1]);
        area += (rb - ra) * (pa + pb) / 2.0;
    }
    area
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub id: String,
    pub best_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ods: f64,
    pub ois: f64,
    pub ap: f64,
    pub ods_threshold: f64,
    pub ods_precision: f64,
    pub ods_recall: f64,
    pub tolerance: Tolerance,
    pub matching: Matching,
    pub thinning: String,
    pub per_image: Vec<ImageResult>,
    #[serde(skip)]
    pub curve: Option<PrCurve>,
    #[serde(skip)]
    pub image_curves: Vec<PrCurve>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn dataset_curve(&self) -> &PrCurve {
        self.curve.as_ref().expect("evaluation always fills the dataset curve")
    }
}

/// A named prediction/ground-truth pair.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub id: String,
    pub pred: SoftMap,
    pub gt: BinaryMap,
}

pub fn evaluate(items: &[EvalItem], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let per_image: Vec<Vec<MatchCounts>> = items
        .par_iter()
        .map(|it| pr_at_thresholds(&it.pred, &it.gt, cfg))
        .collect::<Result<_>>()?;

    let image_curves: Vec<PrCurve> = items
        .iter()
        .zip(&per_image)
        .map(|(it, counts)| PrCurve {
            scope: CurveScope::Image(it.id.clone()),
            points: cfg
                .thresholds
                .iter()
                .zip(counts)
                .map(|(&t, &c)| PrPoint::new(t, c))
                .collect(),
        })
        .collect();

    let dataset_points: Vec<PrPoint> = cfg
        .thresholds
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut total = MatchCounts::default();
            for counts in &per_image {
                total += counts[k];
            }
            PrPoint::new(t, total)
        })
        .collect();
    let curve = PrCurve {
        scope: CurveScope::Dataset,
        points: dataset_points,
    };
    let best = curve.best_index();
    let ods_point = curve.points[best];

    let mut ois_total = MatchCounts::default();
    let mut results = Vec::with_capacity(items.len());
    for c in &image_curves {
        let b = c.best_index();
        let p = c.points[b];
        ois_total += p.counts;
        results.push(ImageResult {
            id: match &c.scope {
                CurveScope::Image(id) => id.clone(),
                CurveScope::Dataset => unreachable!(),
            },
            best_threshold: p.threshold,
            precision: p.precision,
            recall: p.recall,
            f_measure: p.f_measure,
        });
    }

    Ok(EvalReport {
        ods: ods_point.f_measure,
        ois: ois_total.f_measure(),
        ap: average_precision(&curve.points),
        ods_threshold: ods_point.threshold,
        ods_precision: ods_point.precision,
        ods_recall: ods_point.recall,
        tolerance: cfg.tolerance,
        matching: cfg.matching,
        thinning: "none".into(),
        per_image: results,
        curve: Some(curve),
        image_curves,
    })
}

fn pgm_stems(dir: &Path) -> Result<BTreeMap<String, std::path::PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "pgm") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

/// Pairs `*.pgm` files in `pred_dir` and `gt_dir` by stem and evaluates
/// them. Ground truth is binarized at 0.5.
pub fn evaluate_dataset(pred_dir: &Path, gt_dir: &Path, cfg: &EvalConfig) -> Result<EvalReport> {
    let preds = pgm_stems(pred_dir)?;
    let gts = pgm_stems(gt_dir)?;
    if let Some(stem) = gts.keys().find(|k| !preds.contains_key(*k)) {
        return Err(Error::MissingPair {
            stem: stem.clone(),
            dir: pred_dir.to_path_buf(),
        });
    }
    if let Some(stem) = preds.keys().find(|k| !gts.contains_key(*k)) {
        return Err(Error::MissingPair {
            stem: stem.clone(),
            dir: gt_dir.to_path_buf(),
        });
    }
    let items = gts
        .iter()
        .map(|(stem, gt_path)| {
            Ok(EvalItem {
                id: stem.clone(),
                pred: pgm::read_soft(&preds[stem])?,
                gt: pgm::read_binary(gt_path, 0.5)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate(&items, cfg)
}
