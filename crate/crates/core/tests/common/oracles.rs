//! Independent reference implementations used to check the library.
//! Nothing here calls into the library's matching or aggregation code.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive search over one-to-one matchings between `pred` and `gt`
/// pixel lists within `tol`, memoized on (prediction index, used-gt mask).
/// Returns (max match count, min total distance among maximum matchings).
/// Needs `gt.len() <= 20`.
pub fn exhaustive_matching(pred: &[(usize, usize)], gt: &[(usize, usize)], tol: f64) -> (usize, f64) {
    assert!(gt.len() <= 20);
    fn go(
        i: usize,
        used: u32,
        pred: &[(usize, usize)],
        gt: &[(usize, usize)],
        tol: f64,
        memo: &mut HashMap<(usize, u32), (usize, f64)>,
    ) -> (usize, f64) {
        if i == pred.len() {
            return (0, 0.0);
        }
        if let Some(&v) = memo.get(&(i, used)) {
            return v;
        }
        let mut best = go(i + 1, used, pred, gt, tol, memo);
        for (j, g) in gt.iter().enumerate() {
            if used & (1 << j) != 0 {
                continue;
            }
            let dr = pred[i].0 as f64 - g.0 as f64;
            let dc = pred[i].1 as f64 - g.1 as f64;
            let d = (dr * dr + dc * dc).sqrt();
            if d > tol + 1e-12 {
                continue;
            }
            let (n, c) = go(i + 1, used | (1 << j), pred, gt, tol, memo);
            let cand = (n + 1, c + d);
            if cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1 - 1e-12) {
                best = cand;
            }
        }
        memo.insert((i, used), best);
        best
    }
    go(0, 0, pred, gt, tol, &mut HashMap::new())
}

pub fn positives(values: &[u8], width: usize) -> Vec<(usize, usize)> {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == 1)
        .map(|(i, _)| (i / width, i % width))
        .collect()
}

/// (tp, fp, fn) by exhaustive matching.
pub fn brute_counts(pred: &[u8], gt: &[u8], width: usize, tol: f64) -> (usize, usize, usize) {
    let p = positives(pred, width);
    let g = positives(gt, width);
    let (tp, _) = exhaustive_matching(&p, &g, tol);
    (tp, p.len() - tp, g.len() - tp)
}

pub struct BruteReport {
    pub ods: f64,
    pub ois: f64,
    pub ap: f64,
}

fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Brute-force ODS / OIS / AP for soft predictions `(values, gt, width)`.
pub fn brute_evaluate(images: &[(Vec<f64>, Vec<u8>, usize)], thresholds: &[f64], tol: f64) -> BruteReport {
    let counts: Vec<Vec<(usize, usize, usize)>> = images
        .iter()
        .map(|(pred, gt, w)| {
            thresholds
                .iter()
                .map(|&t| {
                    let bin: Vec<u8> = pred.iter().map(|&v| if v >= t { 1 } else { 0 }).collect();
                    brute_counts(&bin, gt, *w, tol)
                })
                .collect()
        })
        .collect();

    let mut ods = 0.0f64;
    let mut pr_points = Vec::new();
    for k in 0..thresholds.len() {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for c in &counts {
            tp += c[k].0;
            fp += c[k].1;
            fn_ += c[k].2;
        }
        let (p, r, f) = prf(tp, fp, fn_);
        ods = ods.max(f);
        pr_points.push((r, p));
    }

    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for c in &counts {
        let mut best = 0;
        for k in 0..c.len() {
            if prf(c[k].0, c[k].1, c[k].2).2 > prf(c[best].0, c[best].1, c[best].2).2 {
                best = k;
            }
        }
        tp += c[best].0;
        fp += c[best].1;
        fn_ += c[best].2;
    }
    let ois = prf(tp, fp, fn_).2;

    pr_points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut curve: Vec<(f64, f64)> = Vec::new();
    for (r, p) in pr_points {
        match curve.last_mut() {
            Some(last) if last.0 == r => last.1 = last.1.max(p),
            _ => curve.push((r, p)),
        }
    }
    let mut ap = curve[0].0 * curve[0].1;
    for i in 1..curve.len() {
        ap += (curve[i].0 - curve[i - 1].0) * (curve[i].1 + curve[i - 1].1) / 2.0;
    }
    BruteReport { ods, ois, ap }
}

/// Plain-loop label-weighted loss (sum over pixels).
pub fn scalar_label(pred: &[f64], gt: &[u8], lambda: f64) -> f64 {
    let n = gt.len() as f64;
    let neg = gt.iter().filter(|&&y| y == 0).count() as f64;
    let alpha = neg / n;
    let mut total = 0.0;
    for (&p, &y) in pred.iter().zip(gt) {
        let y = f64::from(y);
        let w = if y == 1.0 { alpha } else { lambda * (1.0 - alpha) };
        total -= w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    }
    total
}

/// Plain-loop prediction-weighted loss (sum over pixels).
pub fn scalar_pred(pred: &[f64], gt: &[u8], lambda_hat: f64) -> f64 {
    let n = pred.len() as f64;
    let ip: f64 = pred.iter().sum();
    let in_ = n - ip;
    let mut total = 0.0;
    for (&p, &y) in pred.iter().zip(gt) {
        let y = f64::from(y);
        let w = p * in_ / n + (1.0 - p) * lambda_hat * ip / n;
        total -= w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    }
    total
}

/// Three small images whose predictions never have more than 12 positives
/// at any threshold, so the exhaustive matcher stays cheap.
pub fn fixture_set() -> Vec<(Vec<f64>, Vec<u8>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    (0..3)
        .map(|_| {
            let (h, w) = (6, 7);
            let mut gt = vec![0u8; h * w];
            for _ in 0..8 {
                gt[rng.random_range(0..h * w)] = 1;
            }
            let mut pred = vec![0.0; h * w];
            for _ in 0..12 {
                pred[rng.random_range(0..h * w)] = (rng.random_range(1..=99) as f64) / 100.0;
            }
            (pred, gt, w)
        })
        .collect()
}

/// A plausible soft detector output for `edges`: strong on edges, weaker
/// one pixel off, sparse clutter elsewhere. Each call draws its own
/// contrast so images disagree on their best threshold.
pub fn synthetic_prediction(rng: &mut impl Rng, edges: &[u8], height: usize, width: usize) -> Vec<f64> {
    let contrast: f64 = rng.random_range(0.3..1.0);
    let clutter: f64 = rng.random_range(0.0..0.6);
    let near = |r: usize, c: usize| {
        (r.saturating_sub(1)..(r + 2).min(height))
            .any(|rr| (c.saturating_sub(1)..(c + 2).min(width)).any(|cc| edges[rr * width + cc] == 1))
    };
    (0..height * width)
        .map(|i| {
            let (r, c) = (i / width, i % width);
            let u: f64 = rng.random();
            let v = if edges[i] == 1 {
                contrast * (0.5 + 0.5 * u)
            } else if near(r, c) {
                contrast * 0.6 * u
            } else if rng.random_bool(0.1) {
                clutter * u
            } else {
                0.05 * u
            };
            v.clamp(0.0, 1.0)
        })
        .collect()
}
