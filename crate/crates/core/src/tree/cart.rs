//! CART classification trees with exhaustive or randomized threshold search.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{impurity, Criterion, MaxFeatures, MIN_GAIN};
use crate::learners::{check_dims, check_training, ClassIndex};
use crate::rng::{self, Rng};
use crate::{math, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Midpoints between consecutive distinct values.
    #[default]
    Best,
    /// One uniform threshold in `[min, max)` per feature.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeHyper {
    #[serde(default)]
    pub criterion: Criterion,
    /// `None` grows until the other stop rules fire.
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "two")]
    pub min_samples_split: usize,
    #[serde(default = "one")]
    pub min_samples_leaf: usize,
    #[serde(default)]
    pub max_features: MaxFeatures,
    #[serde(default)]
    pub split_mode: SplitMode,
}

pub(crate) fn two() -> usize {
    2
}

pub(crate) fn one() -> usize {
    1
}

impl Default for TreeHyper {
    fn default() -> Self {
        TreeHyper {
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            split_mode: SplitMode::Best,
        }
    }
}

impl TreeHyper {
    pub fn stump() -> Self {
        TreeHyper { max_depth: Some(1), ..TreeHyper::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 || self.min_samples_leaf < 1 {
            return Err(Error::InvalidParameter("min_samples_split >= 2 and min_samples_leaf >= 1 required".into()));
        }
        if !self.max_features.is_valid() {
            return Err(Error::InvalidParameter("max_features fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Training samples per class reaching this leaf.
        counts: Vec<usize>,
        /// Summed sample weight per class.
        weights: Vec<f64>,
        /// Column index into the model's classes.
        prediction: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub classes: Vec<u32>,
    pub n_features: usize,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    /// Arena; the root is node 0.
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Borrowed training data for one tree.
pub(crate) struct Grower<'a> {
    pub x: &'a Matrix,
    pub y: &'a [usize],
    pub weights: Option<&'a [f64]>,
    pub n_classes: usize,
    pub hyper: &'a TreeHyper,
}

impl Grower<'_> {
    fn w(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    fn histogram(&self, samples: &[usize]) -> Vec<f64> {
        let mut h = vec![0.0; self.n_classes];
        for &i in samples {
            h[self.y[i]] += self.w(i);
        }
        h
    }

    fn split_gain(&self, parent: &[f64], left: &[f64]) -> f64 {
        let right: Vec<f64> = parent.iter().zip(left).map(|(p, l)| p - l).collect();
        let (wp, wl, wr) = (parent.iter().sum::<f64>(), left.iter().sum::<f64>(), right.iter().sum::<f64>());
        let c = self.hyper.criterion;
        impurity(parent, c) - (wl * impurity(left, c) + wr * impurity(&right, c)) / wp
    }

    /// Best split over `features`, scanning features then thresholds in
    /// ascending order; a later candidate must beat the incumbent by more than
    /// `MIN_GAIN`.
    pub fn find_split(&self, samples: &[usize], features: &[usize], rng: &mut Rng) -> Option<SplitCandidate> {
        let parent = self.histogram(samples);
        let min_leaf = self.hyper.min_samples_leaf;
        let n = samples.len();
        let mut best: Option<SplitCandidate> = None;
        let mut consider = |cand: SplitCandidate| {
            let floor = best.map_or(MIN_GAIN, |b| b.gain + MIN_GAIN);
            if cand.gain > floor {
                best = Some(cand);
            }
        };
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
        for &f in features {
            order.clear();
            order.extend(samples.iter().map(|&i| (self.x[(i, f)], i)));
            match self.hyper.split_mode {
                SplitMode::Best => {
                    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let mut left = vec![0.0; self.n_classes];
                    for t in 0..n - 1 {
                        let (v, i) = order[t];
                        left[self.y[i]] += self.w(i);
                        let next = order[t + 1].0;
                        if v >= next || t + 1 < min_leaf || n - t - 1 < min_leaf {
                            continue;
                        }
                        let mut threshold = 0.5 * (v + next);
                        if threshold >= next {
                            threshold = v;
                        }
                        let gain = self.split_gain(&parent, &left);
                        consider(SplitCandidate { feature: f, threshold, gain });
                    }
                }
                SplitMode::Random => {
                    let lo = order.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
                    let hi = order.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
                    let u: f64 = rng.random();
                    if hi <= lo {
                        continue;
                    }
                    let mut threshold = lo + u * (hi - lo);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    let mut left = vec![0.0; self.n_classes];
                    let mut n_left = 0;
                    for &(v, i) in &order {
                        if v <= threshold {
                            left[self.y[i]] += self.w(i);
                            n_left += 1;
                        }
                    }
                    if n_left < min_leaf || n - n_left < min_leaf {
                        continue;
                    }
                    let gain = self.split_gain(&parent, &left);
                    consider(SplitCandidate { feature: f, threshold, gain });
                }
            }
        }
        best
    }

    fn leaf(&self, samples: &[usize]) -> Node {
        let mut counts = vec![0usize; self.n_classes];
        for &i in samples {
            counts[self.y[i]] += 1;
        }
        let weights = self.histogram(samples);
        let prediction = math::argmax(&weights);
        Node::Leaf { counts, weights, prediction }
    }

    fn sample_features(&self, rng: &mut Rng) -> Vec<usize> {
        let m = self.x.cols();
        let k = self.hyper.max_features.resolve(m);
        if k >= m {
            return (0..m).collect();
        }
        let mut all: Vec<usize> = (0..m).collect();
        for i in 0..k {
            let j = rng.random_range(i..m);
            all.swap(i, j);
        }
        all.truncate(k);
        all.sort_unstable();
        all
    }

    /// Grow a tree over `samples` (duplicates allowed, as in a bootstrap).
    pub fn grow(&self, samples: Vec<usize>, rng: &mut Rng) -> Vec<Node> {
        let mut nodes = vec![self.leaf(&samples)];
        let mut stack = vec![(0usize, samples, 0usize)];
        while let Some((id, samples, depth)) = stack.pop() {
            let pure = {
                let h = self.histogram(&samples);
                h.iter().filter(|&&v| v > 0.0).count() <= 1
            };
            if pure || samples.len() < self.hyper.min_samples_split || self.hyper.max_depth.is_some_and(|d| depth >= d) {
                continue;
            }
            let features = self.sample_features(rng);
            let Some(split) = self.find_split(&samples, &features, rng) else {
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) =
                samples.iter().partition(|&&i| self.x[(i, split.feature)] <= split.threshold);
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(self.leaf(&left));
            nodes.push(self.leaf(&right));
            nodes[id] = Node::Internal { feature: split.feature, threshold: split.threshold, left: l, right: r };
            stack.push((r, right, depth + 1));
            stack.push((l, left, depth + 1));
        }
        nodes
    }
}

/// Exhaustive best split of `samples` over every feature with unit weights.
pub fn best_split(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    samples: &[usize],
    criterion: Criterion,
) -> Option<SplitCandidate> {
    if samples.len() < 2 {
        return None;
    }
    let hyper = TreeHyper { criterion, ..TreeHyper::default() };
    let grower = Grower { x, y, weights: None, n_classes, hyper: &hyper };
    let features: Vec<usize> = (0..x.cols()).collect();
    grower.find_split(samples, &features, &mut rng::seeded(0))
}

pub fn build_tree(x: &Matrix, y: &[u32], hyper: &TreeHyper, seed: u64) -> Result<DecisionTreeModel> {
    check_training(x, y)?;
    let index = ClassIndex::fit(y)?;
    let targets = index.encode(y)?;
    build_tree_indexed(x, &targets, index.classes, None, (0..x.rows()).collect(), hyper, seed)
}

/// Tree over pre-encoded targets; ensembles use this to share one class list.
pub(crate) fn build_tree_indexed(
    x: &Matrix,
    y: &[usize],
    classes: Vec<u32>,
    weights: Option<&[f64]>,
    samples: Vec<usize>,
    hyper: &TreeHyper,
    seed: u64,
) -> Result<DecisionTreeModel> {
    hyper.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    let grower = Grower { x, y, weights, n_classes: classes.len(), hyper };
    let nodes = grower.grow(samples, &mut rng::seeded(seed));
    Ok(DecisionTreeModel { classes, n_features: x.cols(), criterion: hyper.criterion, max_depth: hyper.max_depth, nodes })
}

impl DecisionTreeModel {
    /// Index of the leaf reached by `x`.
    pub fn apply(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Internal { feature, threshold, left, right } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => return id,
            }
        }
    }

    /// Class column predicted for one row.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        match &self.nodes[self.apply(x)] {
            Node::Leaf { prediction, .. } => *prediction,
            Node::Internal { .. } => unreachable!("apply always ends at a leaf"),
        }
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_dims(self.n_features, x)?;
        let mut out = Matrix::zeros(x.rows(), self.classes.len());
        for i in 0..x.rows() {
            if let Node::Leaf { weights, counts, .. } = &self.nodes[self.apply(x.row(i))] {
                let total: f64 = weights.iter().sum();
                let row = out.row_mut(i);
                if total > 0.0 {
                    for (o, w) in row.iter_mut().zip(weights) {
                        *o = w / total;
                    }
                } else {
                    let n: usize = counts.iter().sum();
                    for (o, &c) in row.iter_mut().zip(counts) {
                        *o = c as f64 / n as f64;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            max = max.max(d);
            if let Node::Internal { left, right, .. } = &self.nodes[id] {
                stack.push((*left, d + 1));
                stack.push((*right, d + 1));
            }
        }
        max
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    fn feature_name(names: Option<&[String]>, f: usize) -> String {
        names.and_then(|n| n.get(f).cloned()).unwrap_or_else(|| format!("feature_{f}"))
    }

    /// Indented rule listing, one line per branch and leaf.
    pub fn export_text(&self, names: Option<&[String]>) -> String {
        let mut out = String::new();
        self.text_node(0, 0, names, &mut out);
        out
    }

    fn text_node(&self, id: usize, depth: usize, names: Option<&[String]>, out: &mut String) {
        let indent = "|   ".repeat(depth);
        match &self.nodes[id] {
            Node::Internal { feature, threshold, left, right } => {
                let name = Self::feature_name(names, *feature);
                let _ = writeln!(out, "{indent}|--- {name} <= {threshold:.4}");
                self.text_node(*left, depth + 1, names, out);
                let _ = writeln!(out, "{indent}|--- {name} >  {threshold:.4}");
                self.text_node(*right, depth + 1, names, out);
            }
            Node::Leaf { counts, prediction, .. } => {
                let n: usize = counts.iter().sum();
                let _ = writeln!(out, "{indent}|--- class: {} (samples = {n})", self.classes[*prediction]);
            }
        }
    }

    /// Graphviz `digraph` with one node per tree node.
    pub fn export_dot(&self, names: Option<&[String]>) -> String {
        let mut out = String::from("digraph Tree {\nnode [shape=box, fontname=\"helvetica\"];\n");
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Internal { feature, threshold, left, right } => {
                    let name = Self::feature_name(names, *feature);
                    let _ = writeln!(out, "{id} [label=\"{name} <= {threshold:.4}\"];");
                    let _ = writeln!(out, "{id} -> {left} [label=\"True\"];");
                    let _ = writeln!(out, "{id} -> {right} [label=\"False\"];");
                }
                Node::Leaf { counts, prediction, .. } => {
                    let n: usize = counts.iter().sum();
                    let value: Vec<String> = counts.iter().map(|c| format!("{c}")).collect();
                    let _ = writeln!(
                        out,
                        "{id} [label=\"samples = {n}\\nvalue = [{}]\\nclass = {}\"];",
                        value.join(", "),
                        self.classes[*prediction]
                    );
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Classifier;
    use proptest::prelude::*;

    /// Every (feature, threshold) pair evaluated by direct counting, in the
    /// same scan order and with the same tie tolerance.
    fn oracle(x: &Matrix, y: &[usize], k: usize, criterion: Criterion) -> Option<SplitCandidate> {
        let n = x.rows();
        let mut parent = vec![0.0; k];
        for &c in y {
            parent[c] += 1.0;
        }
        let mut best: Option<SplitCandidate> = None;
        for f in 0..x.cols() {
            let mut vals: Vec<f64> = (0..n).map(|i| x[(i, f)]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let mut l = vec![0.0; k];
                let mut r = vec![0.0; k];
                for i in 0..n {
                    if x[(i, f)] <= t {
                        l[y[i]] += 1.0;
                    } else {
                        r[y[i]] += 1.0;
                    }
                }
                let (nl, nr) = (l.iter().sum::<f64>(), r.iter().sum::<f64>());
                let gain = impurity(&parent, criterion)
                    - (nl / n as f64) * impurity(&l, criterion)
                    - (nr / n as f64) * impurity(&r, criterion);
                let floor = best.map_or(MIN_GAIN, |b| b.gain + MIN_GAIN);
                if gain > floor {
                    best = Some(SplitCandidate { feature: f, threshold: t, gain });
                }
            }
        }
        best
    }

    #[test]
    fn one_dimensional_midpoint() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [8.0], [9.0]]).unwrap();
        let y = [0, 0, 1, 1];
        let s = best_split(&x, &y, 2, &[0, 1, 2, 3], Criterion::Gini).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 5.0);
        assert!((s.gain - 0.5).abs() < 1e-15);
        let stump = build_tree(&x, &[1, 1, 2, 2], &TreeHyper::stump(), 0).unwrap();
        assert_eq!(stump.predict(&x).unwrap(), [1, 1, 2, 2]);
    }

    #[test]
    fn constant_features_do_not_split() {
        let x = Matrix::from_rows(&[[3.0, 1.0], [3.0, 1.0], [3.0, 1.0]]).unwrap();
        assert!(best_split(&x, &[0, 1, 0], 2, &[0, 1, 2], Criterion::Gini).is_none());
        let tree = build_tree(&x, &[1, 2, 1], &TreeHyper::default(), 0).unwrap();
        assert_eq!(tree.nodes.len(), 1);
    }

    #[test]
    fn pure_input_is_a_single_leaf() {
        let x = Matrix::from_rows(&[[1.0], [5.0], [-2.0]]).unwrap();
        let tree = build_tree(&x, &[4, 4, 4], &TreeHyper::default(), 0).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.predict(&Matrix::from_rows(&[[100.0]]).unwrap()).unwrap(), [4]);
    }

    #[test]
    fn memorizes_distinct_points() {
        let mut r = rng::seeded(2);
        let rows: Vec<[f64; 2]> = (0..60).map(|_| [r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
        let y: Vec<u32> = (0..60).map(|_| r.random_range(1..4)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let tree = build_tree(&x, &y, &TreeHyper::default(), 0).unwrap();
        assert_eq!(tree.predict(&x).unwrap(), y);
        let shallow = build_tree(&x, &y, &TreeHyper { max_depth: Some(3), ..TreeHyper::default() }, 0).unwrap();
        assert!(shallow.depth() <= 3);
        let p = tree.predict_proba(&x).unwrap();
        assert!(p.iter_rows().all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn random_mode_varies_with_seed_and_replays() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]]).unwrap();
        let y = [1, 1, 1, 2, 2, 2];
        let hyper = TreeHyper { split_mode: SplitMode::Random, ..TreeHyper::default() };
        let a = build_tree(&x, &y, &hyper, 1).unwrap();
        assert_eq!(a, build_tree(&x, &y, &hyper, 1).unwrap());
        let differs = (2..10).any(|s| build_tree(&x, &y, &hyper, s).unwrap() != a);
        assert!(differs);
        assert_eq!(a.predict(&x).unwrap(), y);
    }

    #[test]
    fn exports_mention_every_node() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [8.0], [9.0]]).unwrap();
        let tree = build_tree(&x, &[1, 1, 2, 2], &TreeHyper::default(), 0).unwrap();
        let names = [String::from("INTRATE")];
        let text = tree.export_text(Some(&names));
        assert_eq!(text, "|--- INTRATE <= 5.0000\n|   |--- class: 1 (samples = 2)\n|--- INTRATE >  5.0000\n|   |--- class: 2 (samples = 2)\n");
        let dot = tree.export_dot(None);
        assert!(dot.starts_with("digraph Tree {"));
        assert!(dot.contains("0 -> 1") && dot.contains("0 -> 2"));
    }

    proptest! {
        #[test]
        fn split_matches_exhaustive_oracle(
            n in 2usize..50,
            m in 1usize..4,
            k in 2usize..4,
            seed in any::<u64>(),
            entropy in any::<bool>(),
        ) {
            let mut r = rng::seeded(seed);
            let mut x = Matrix::zeros(n, m);
            for i in 0..n {
                for j in 0..m {
                    x[(i, j)] = r.random_range(0..6) as f64 * 0.5;
                }
            }
            let y: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
            let c = if entropy { Criterion::Entropy } else { Criterion::Gini };
            let samples: Vec<usize> = (0..n).collect();
            let got = best_split(&x, &y, k, &samples, c);
            let want = oracle(&x, &y, k, c);
            match (got, want) {
                (None, None) => {}
                (Some(g), Some(w)) => {
                    prop_assert_eq!(g.feature, w.feature);
                    prop_assert!((g.threshold - w.threshold).abs() <= 1e-12);
                    prop_assert!((g.gain - w.gain).abs() <= 1e-12);
                }
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }

        #[test]
        fn every_input_reaches_a_leaf(seed in any::<u64>(), q in proptest::collection::vec(-10.0f64..10.0, 2)) {
            let mut r = rng::seeded(seed);
            let rows: Vec<[f64; 2]> = (0..30).map(|_| [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)]).collect();
            let y: Vec<u32> = (0..30).map(|_| r.random_range(1..4)).collect();
            let tree = build_tree(&Matrix::from_rows(&rows).unwrap(), &y, &TreeHyper::default(), seed).unwrap();
            let leaf = tree.apply(&q);
            let is_leaf = matches!(tree.nodes[leaf], Node::Leaf { .. });
            prop_assert!(is_leaf);
        }
    }
}
