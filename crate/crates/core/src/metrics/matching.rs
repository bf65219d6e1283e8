//! One-to-one correspondence between predicted and ground-truth edge
//! pixels within a Euclidean tolerance radius.
//!
//! Candidate pairs are every (prediction, ground truth) pair at distance
//! `<= tol`. [`Matching::OptimalAssignment`] finds a maximum-cardinality
//! matching of that bipartite graph; counts only depend on the cardinality,
//! so they come from Hopcroft-Karp. [`optimal_pairs`] additionally
//! minimizes the total distance among maximum matchings and is used when
//! the pairs themselves are wanted.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::BinaryMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    #[default]
    OptimalAssignment,
    /// Globally closest-first greedy assignment. Never finds more matches
    /// than the optimal assignment.
    GreedyNearest,
}

impl std::str::FromStr for Matching {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" | "optimal_assignment" => Ok(Matching::OptimalAssignment),
            "greedy" | "greedy_nearest" => Ok(Matching::GreedyNearest),
            other => Err(Error::InvalidConfig(format!("unknown matching '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MatchCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall, 0 when both are 0.
    pub fn f_measure(&self) -> f64 {
        f_measure(self.precision(), self.recall())
    }
}

impl std::ops::AddAssign for MatchCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Integer offsets `(dr, dc)` with `dr² + dc² <= tol²`.
pub fn disk_offsets(tol: f64) -> Vec<(isize, isize, f64)> {
    let reach = tol.floor() as isize;
    let mut out = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let d2 = (dr * dr + dc * dc) as f64;
            if d2 <= tol * tol {
                out.push((dr, dc, d2.sqrt()));
            }
        }
    }
    out
}

/// Bipartite candidate graph: `adj[i]` lists `(gt index, distance)` for
/// predicted positive `i`, in offset order.
struct Candidates {
    adj: Vec<Vec<(usize, f64)>>,
    n_gt: usize,
}

fn candidates(pred: &BinaryMap, gt: &BinaryMap, tol: f64) -> Candidates {
    let (h, w) = gt.dims();
    let mut gt_index = vec![usize::MAX; h * w];
    let mut n_gt = 0;
    for (i, &v) in gt.values().iter().enumerate() {
        if v == 1 {
            gt_index[i] = n_gt;
            n_gt += 1;
        }
    }
    let offsets = disk_offsets(tol);
    let adj = pred
        .positives()
        .into_iter()
        .map(|(r, c)| {
            offsets
                .iter()
                .filter_map(|&(dr, dc, d)| {
                    let rr = r as isize + dr;
                    let cc = c as isize + dc;
                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        return None;
                    }
                    let j = gt_index[rr as usize * w + cc as usize];
                    (j != usize::MAX).then_some((j, d))
                })
                .collect()
        })
        .collect();
    Candidates { adj, n_gt }
}

const NONE: usize = usize::MAX;

/// Maximum-cardinality matching size (Hopcroft-Karp, iterative DFS).
fn hopcroft_karp(adj: &[Vec<(usize, f64)>], n_right: usize) -> usize {
    let n_left = adj.len();
    let mut match_l = vec![NONE; n_left];
    let mut match_r = vec![NONE; n_right];
    let mut dist = vec![usize::MAX; n_left];
    let mut it = vec![0usize; n_left];
    let mut matched = 0;

    loop {
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if match_l[u] == NONE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                let w = match_r[v];
                if w == NONE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return matched;
        }

        it.iter_mut().for_each(|x| *x = 0);
        for root in 0..n_left {
            if match_l[root] != NONE || dist[root] != 0 {
                continue;
            }
            let mut stack = vec![root];
            let mut via: Vec<usize> = Vec::new();
            while let Some(&u) = stack.last() {
                if it[u] < adj[u].len() {
                    let v = adj[u][it[u]].0;
                    it[u] += 1;
                    let w = match_r[v];
                    if w == NONE {
                        via.push(v);
                        for (&l, &r) in stack.iter().zip(&via) {
                            match_l[l] = r;
                            match_r[r] = l;
                        }
                        matched += 1;
                        break;
                    } else if dist[w] != usize::MAX && dist[w] == dist[u] + 1 {
                        via.push(v);
                        stack.push(w);
                    }
                } else {
                    dist[u] = usize::MAX;
                    stack.pop();
                    via.pop();
                }
            }
        }
    }
}

fn greedy(adj: &[Vec<(usize, f64)>], n_right: usize) -> usize {
    let mut pairs: Vec<(f64, usize, usize)> = adj
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&(j, d)| (d, i, j)))
        .collect();
    pairs.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let mut used_l = vec![false; adj.len()];
    let mut used_r = vec![false; n_right];
    let mut matched = 0;
    for (_, i, j) in pairs {
        if !used_l[i] && !used_r[j] {
            used_l[i] = true;
            used_r[j] = true;
            matched += 1;
        }
    }
    matched
}

fn check(pred: &BinaryMap, gt: &BinaryMap, tol: f64) -> Result<()> {
    Error::check_dims(gt.dims(), pred.dims())?;
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be a nonnegative finite number of pixels, got {tol}"
        )));
    }
    Ok(())
}

pub fn correspond(pred: &BinaryMap, gt: &BinaryMap, tol: f64, matching: Matching) -> Result<MatchCounts> {
    check(pred, gt, tol)?;
    let g = candidates(pred, gt, tol);
    let tp = match matching {
        Matching::OptimalAssignment => hopcroft_karp(&g.adj, g.n_gt),
        Matching::GreedyNearest => greedy(&g.adj, g.n_gt),
    };
    Ok(MatchCounts {
        tp,
        fp: g.adj.len() - tp,
        fn_: g.n_gt - tp,
    })
}

/// A matched `(prediction pixel, ground-truth pixel)` pair, as (row, col).
pub type PixelPair = ((usize, usize), (usize, usize));

/// Maximum-cardinality matching with minimum total distance among all
/// maximum matchings.
///
/// Successive shortest augmenting paths with Johnson potentials; every
/// augmentation adds one match at the least possible extra cost.
pub fn optimal_pairs(
    pred: &BinaryMap,
    gt: &BinaryMap,
    tol: f64,
) -> Result<Vec<PixelPair>> {
    check(pred, gt, tol)?;
    let g = candidates(pred, gt, tol);
    let (n_l, n_r) = (g.adj.len(), g.n_gt);
    let mut match_l = vec![NONE; n_l];
    let mut match_r = vec![NONE; n_r];
    // Potentials: left vertices 0..n_l, right vertices n_l..n_l+n_r.
    let mut pot = vec![0.0f64; n_l + n_r];

    loop {
        // Dijkstra from all free left vertices over reduced costs.
        let mut dist = vec![f64::INFINITY; n_l + n_r];
        let mut prev_left = vec![NONE; n_r];
        let mut heap = BinaryHeap::new();
        for u in 0..n_l {
            if match_l[u] == NONE {
                dist[u] = 0.0;
                heap.push((Reverse(OrdF64(0.0)), u));
            }
        }
        while let Some((Reverse(OrdF64(d)), x)) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            if x < n_l {
                for &(v, cost) in &g.adj[x] {
                    if match_l[x] == v {
                        continue;
                    }
                    let y = n_l + v;
                    let nd = d + cost + pot[x] - pot[y];
                    if nd < dist[y] {
                        dist[y] = nd;
                        prev_left[v] = x;
                        heap.push((Reverse(OrdF64(nd)), y));
                    }
                }
            } else {
                let v = x - n_l;
                let u = match_r[v];
                if u != NONE {
                    let cost = g.adj[u]
                        .iter()
                        .find(|&&(vv, _)| vv == v)
                        .map(|&(_, c)| c)
                        .expect("matched pair is a candidate");
                    let nd = d - cost + pot[x] - pot[u];
                    if nd < dist[u] {
                        dist[u] = nd;
                        heap.push((Reverse(OrdF64(nd)), u));
                    }
                }
            }
        }
        let target = (0..n_r)
            .filter(|&v| match_r[v] == NONE && dist[n_l + v].is_finite())
            .min_by(|&a, &b| {
                (dist[n_l + a] + pot[n_l + a])
                    .partial_cmp(&(dist[n_l + b] + pot[n_l + b]))
                    .expect("finite")
            });
        let Some(mut v) = target else { break };
        for (p, d) in pot.iter_mut().zip(&dist) {
            if d.is_finite() {
                *p += d;
            }
        }
        loop {
            let u = prev_left[v];
            let next = match_l[u];
            match_l[u] = v;
            match_r[v] = u;
            if next == NONE {
                break;
            }
            v = next;
        }
    }

    let pred_pos = pred.positives();
    let gt_pos = gt.positives();
    Ok(match_l
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != NONE)
        .map(|(u, &v)| (pred_pos[u], gt_pos[v]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_for_unit_tolerance_are_the_plus_shape() {
        let mut o: Vec<_> = disk_offsets(1.0).into_iter().map(|(r, c, _)| (r, c)).collect();
        o.sort();
        assert_eq!(o, vec![(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]);
        assert_eq!(disk_offsets(0.0).len(), 1);
        assert_eq!(disk_offsets(1.5).len(), 9);
    }

    #[test]
    fn shifted_line() {
        let mut gt = vec![0u8; 5 * 4];
        let mut pred = vec![0u8; 5 * 4];
        for r in 0..5 {
            gt[r * 4 + 1] = 1;
            pred[r * 4 + 2] = 1;
        }
        let gt = BinaryMap::new(5, 4, gt).unwrap();
        let pred = BinaryMap::new(5, 4, pred).unwrap();
        let at1 = correspond(&pred, &gt, 1.0, Matching::OptimalAssignment).unwrap();
        assert_eq!(at1, MatchCounts { tp: 5, fp: 0, fn_: 0 });
        let at_half = correspond(&pred, &gt, 0.5, Matching::OptimalAssignment).unwrap();
        assert_eq!(at_half, MatchCounts { tp: 0, fp: 5, fn_: 5 });
    }

    #[test]
    fn competing_predictions() {
        let gt = BinaryMap::from_rows(&[&[0, 1, 0]]).unwrap();
        let pred = BinaryMap::from_rows(&[&[1, 0, 1]]).unwrap();
        for m in [Matching::OptimalAssignment, Matching::GreedyNearest] {
            assert_eq!(
                correspond(&pred, &gt, 1.0, m).unwrap(),
                MatchCounts { tp: 1, fp: 1, fn_: 0 }
            );
        }
    }

    #[test]
    fn greedy_can_be_suboptimal() {
        // The exact overlap at (0,0) is taken first and strands (1,0).
        let pred = BinaryMap::from_rows(&[&[1, 0], &[1, 0]]).unwrap();
        let gt = BinaryMap::from_rows(&[&[1, 1], &[0, 0]]).unwrap();
        let opt = correspond(&pred, &gt, 1.0, Matching::OptimalAssignment).unwrap();
        let gr = correspond(&pred, &gt, 1.0, Matching::GreedyNearest).unwrap();
        assert_eq!(opt.tp, 2);
        assert_eq!(gr.tp, 1);
    }

    #[test]
    fn optimal_pairs_prefer_shorter_total_distance() {
        // Both predictions can reach both gt pixels; the zero-distance
        // assignment must win.
        let pred = BinaryMap::from_rows(&[&[1, 1]]).unwrap();
        let gt = BinaryMap::from_rows(&[&[1, 1]]).unwrap();
        let pairs = optimal_pairs(&pred, &gt, 1.0).unwrap();
        assert_eq!(pairs, vec![((0, 0), (0, 0)), ((0, 1), (0, 1))]);
    }

    #[test]
    fn rejects_bad_tolerance_and_shapes() {
        let a = BinaryMap::zeros(2, 2).unwrap();
        let b = BinaryMap::zeros(2, 3).unwrap();
        assert!(correspond(&a, &a, -1.0, Matching::OptimalAssignment).is_err());
        assert!(correspond(&a, &a, f64::NAN, Matching::OptimalAssignment).is_err());
        assert!(matches!(
            correspond(&a, &b, 1.0, Matching::OptimalAssignment),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
