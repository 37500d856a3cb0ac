//! Least-squares regression trees used as gradient-boosting stages.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::MIN_GAIN;
use crate::Matrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Expand every node down to `max_depth`.
    #[default]
    LevelWise,
    /// Repeatedly split the leaf with the largest loss reduction until
    /// `max_leaves` leaves exist.
    LeafWise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegNode {
    Internal { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegNode>,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                RegNode::Internal { feature, threshold, left, right } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
                RegNode::Leaf { value } => return *value,
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, RegNode::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RegTreeParams {
    pub growth: Growth,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Per-feature row orders shared by every tree fit on the same matrix.
#[derive(Debug, Clone, Default)]
pub struct Presorted {
    orders: Vec<Vec<usize>>,
    mark: Vec<bool>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let orders = (0..x.cols())
            .map(|f| {
                let mut o: Vec<usize> = (0..x.rows()).collect();
                o.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
                o
            })
            .collect();
        Presorted { orders, mark: vec![false; x.rows()] }
    }
}

/// Largest reduction in squared error of `target` over `samples`.
fn find_split(x: &Matrix, target: &[f64], samples: &[usize], min_leaf: usize, pre: &mut Presorted) -> Option<Split> {
    let n = samples.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: f64 = samples.iter().map(|&i| target[i]).sum();
    let base = total * total / n as f64;
    let mut best: Option<Split> = None;
    // scanning a global order is cheaper than sorting once the node is large
    let use_presorted = !pre.orders.is_empty() && n * 16 > x.rows();
    if use_presorted {
        for &i in samples {
            pre.mark[i] = true;
        }
    }
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for f in 0..x.cols() {
        order.clear();
        if use_presorted {
            order.extend(pre.orders[f].iter().filter(|&&i| pre.mark[i]).map(|&i| (x[(i, f)], i)));
        } else {
            order.extend(samples.iter().map(|&i| (x[(i, f)], i)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        let mut left = 0.0;
        for t in 0..n - 1 {
            let (v, i) = order[t];
            left += target[i];
            let next = order[t + 1].0;
            let nl = t + 1;
            if v >= next || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let right = total - left;
            let gain = left * left / nl as f64 + right * right / (n - nl) as f64 - base;
            let floor = best.map_or(MIN_GAIN, |b| b.gain + MIN_GAIN);
            if gain > floor {
                let mut threshold = 0.5 * (v + next);
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Split { feature: f, threshold, gain });
            }
        }
    }
    if use_presorted {
        for &i in samples {
            pre.mark[i] = false;
        }
    }
    best
}

struct Candidate {
    gain: f64,
    node: usize,
    seq: usize,
    split: Split,
    samples: Vec<usize>,
    depth: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    /// Largest gain first; earlier-created leaves win ties.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.total_cmp(&other.gain).then(other.seq.cmp(&self.seq))
    }
}

/// Fit a tree to `target`; `leaf_value` turns a leaf's samples into its output.
pub fn fit<F>(
    x: &Matrix,
    target: &[f64],
    samples: Vec<usize>,
    params: &RegTreeParams,
    pre: &mut Presorted,
    mut leaf_value: F,
) -> RegressionTree
where
    F: FnMut(&[usize]) -> f64,
{
    let mut nodes = vec![RegNode::Leaf { value: 0.0 }];
    let mut finished: Vec<(usize, Vec<usize>)> = Vec::new();
    match params.growth {
        Growth::LevelWise => {
            let mut stack = vec![(0usize, samples, 0usize)];
            while let Some((id, s, depth)) = stack.pop() {
                let split = if depth < params.max_depth { find_split(x, target, &s, params.min_samples_leaf, pre) } else { None };
                match split {
                    Some(sp) => {
                        let (l, r): (Vec<usize>, Vec<usize>) = s.iter().partition(|&&i| x[(i, sp.feature)] <= sp.threshold);
                        let (li, ri) = (nodes.len(), nodes.len() + 1);
                        nodes.push(RegNode::Leaf { value: 0.0 });
                        nodes.push(RegNode::Leaf { value: 0.0 });
                        nodes[id] = RegNode::Internal { feature: sp.feature, threshold: sp.threshold, left: li, right: ri };
                        stack.push((ri, r, depth + 1));
                        stack.push((li, l, depth + 1));
                    }
                    None => finished.push((id, s)),
                }
            }
        }
        Growth::LeafWise => {
            let mut heap = BinaryHeap::new();
            let mut seq = 0;
            let mut push = |heap: &mut BinaryHeap<Candidate>,
                            pre: &mut Presorted,
                            node: usize,
                            s: Vec<usize>,
                            depth: usize,
                            finished: &mut Vec<(usize, Vec<usize>)>| {
                let split = if depth < params.max_depth { find_split(x, target, &s, params.min_samples_leaf, pre) } else { None };
                match split {
                    Some(sp) => {
                        heap.push(Candidate { gain: sp.gain, node, seq, split: sp, samples: s, depth });
                        seq += 1;
                    }
                    None => finished.push((node, s)),
                }
            };
            push(&mut heap, pre, 0, samples, 0, &mut finished);
            let mut leaves = 1;
            while leaves < params.max_leaves.max(1) {
                let Some(c) = heap.pop() else { break };
                let sp = c.split;
                let (l, r): (Vec<usize>, Vec<usize>) = c.samples.iter().partition(|&&i| x[(i, sp.feature)] <= sp.threshold);
                let (li, ri) = (nodes.len(), nodes.len() + 1);
                nodes.push(RegNode::Leaf { value: 0.0 });
                nodes.push(RegNode::Leaf { value: 0.0 });
                nodes[c.node] = RegNode::Internal { feature: sp.feature, threshold: sp.threshold, left: li, right: ri };
                leaves += 1;
                push(&mut heap, pre, li, l, c.depth + 1, &mut finished);
                push(&mut heap, pre, ri, r, c.depth + 1, &mut finished);
            }
            finished.extend(heap.into_iter().map(|c| (c.node, c.samples)));
        }
    }
    finished.sort_by_key(|(id, _)| *id);
    for (id, s) in finished {
        nodes[id] = RegNode::Leaf { value: leaf_value(&s) };
    }
    RegressionTree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_is_recovered() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]]).unwrap();
        let t = [1.0, 1.0, 1.0, -2.0, -2.0, -2.0];
        let params = RegTreeParams { growth: Growth::LevelWise, max_depth: 1, max_leaves: 2, min_samples_leaf: 1 };
        let mean = |s: &[usize]| s.iter().map(|&i| t[i]).sum::<f64>() / s.len() as f64;
        let tree = fit(&x, &t, (0..6).collect(), &params, &mut Presorted::new(&x), mean);
        assert_eq!(tree.predict_row(&[1.5]), 1.0);
        assert_eq!(tree.predict_row(&[2.6]), -2.0);
    }

    #[test]
    fn leaf_budget_is_respected() {
        let rows: Vec<[f64; 1]> = (0..32).map(|i| [i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let t: Vec<f64> = (0..32).map(|i| ((i * 7) % 5) as f64).collect();
        let mean = |s: &[usize]| s.iter().map(|&i| t[i]).sum::<f64>() / s.len() as f64;
        for leaves in [1, 2, 5, 8] {
            let params = RegTreeParams { growth: Growth::LeafWise, max_depth: usize::MAX, max_leaves: leaves, min_samples_leaf: 1 };
            assert_eq!(fit(&x, &t, (0..32).collect(), &params, &mut Presorted::default(), mean).n_leaves(), leaves);
        }
        let params = RegTreeParams { growth: Growth::LevelWise, max_depth: 3, max_leaves: 0, min_samples_leaf: 1 };
        assert!(fit(&x, &t, (0..32).collect(), &params, &mut Presorted::default(), mean).n_leaves() <= 8);
    }
}
