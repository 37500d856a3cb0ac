//! Class rebalancing: SMOTE, ADASYN, SMOTE + Tomek-link cleaning and SMOTE + ENN.
//!
//! Every class smaller than the majority is oversampled up to the majority
//! count. Synthetic rows interpolate between a class member and one of its
//! same-class nearest neighbours.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::neighbors::NeighborIndex;
use crate::rng::{self, Rng};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentVariant {
    #[default]
    None,
    Smote,
    Adasyn,
    SmoteTomek,
    SmoteEnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSpec {
    #[serde(default)]
    pub variant: AugmentVariant,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default = "default_enn_k")]
    pub enn_k: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

fn default_enn_k() -> usize {
    3
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            variant: AugmentVariant::None,
            k_neighbors: default_k(),
            enn_k: default_enn_k(),
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn with_variant(variant: AugmentVariant, seed: u64) -> Self {
        AugmentSpec {
            variant,
            seed,
            ..AugmentSpec::default()
        }
    }
}

/// Where an output row came from; indices refer to the input rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    Original(usize),
    Synthetic {
        source: usize,
        neighbor: usize,
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub x: Matrix,
    pub y: Vec<u32>,
    pub origin: Vec<Origin>,
    pub warnings: Vec<String>,
}

impl Augmented {
    fn identity(x: &Matrix, y: &[u32]) -> Self {
        Augmented {
            x: x.clone(),
            y: y.to_vec(),
            origin: (0..y.len()).map(Origin::Original).collect(),
            warnings: Vec::new(),
        }
    }

    pub fn n_synthetic(&self) -> usize {
        self.origin
            .iter()
            .filter(|o| matches!(o, Origin::Synthetic { .. }))
            .count()
    }
}

/// `source + delta · (neighbor − source)`.
pub fn interpolate(source: &[f64], neighbor: &[f64], delta: f64) -> Vec<f64> {
    source
        .iter()
        .zip(neighbor)
        .map(|(s, n)| s + delta * (n - s))
        .collect()
}

pub fn class_counts(y: &[u32]) -> BTreeMap<u32, usize> {
    let mut counts = BTreeMap::new();
    for &l in y {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
}

fn check_inputs(x: &Matrix, y: &[u32], spec: &AugmentSpec) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if spec.k_neighbors < 1 || spec.enn_k < 1 {
        return Err(Error::InvalidParameter("neighbour counts must be at least 1".into()));
    }
    Ok(())
}

pub fn augment(x: &Matrix, y: &[u32], spec: &AugmentSpec) -> Result<Augmented> {
    match spec.variant {
        AugmentVariant::None => {
            check_inputs(x, y, spec)?;
            Ok(Augmented::identity(x, y))
        }
        AugmentVariant::Smote => smote(x, y, spec),
        AugmentVariant::Adasyn => adasyn(x, y, spec),
        AugmentVariant::SmoteTomek => smote_tomek(x, y, spec),
        AugmentVariant::SmoteEnn => smote_enn(x, y, spec),
    }
}

/// Same-class neighbour lists for a class, in input-row indices.
struct ClassNeighbors {
    members: Vec<usize>,
    lists: Vec<Vec<usize>>,
}

impl ClassNeighbors {
    fn new(x: &Matrix, members: Vec<usize>, k: usize) -> Self {
        let sub = x.select_rows(&members);
        let index = NeighborIndex::new(&sub);
        let k = k.min(members.len().saturating_sub(1));
        let lists = (0..members.len())
            .map(|i| {
                index
                    .query_point(i, k)
                    .into_iter()
                    .map(|(j, _)| members[j])
                    .collect()
            })
            .collect();
        ClassNeighbors { members, lists }
    }

    /// One synthetic row from member `slot`. Singleton classes duplicate.
    fn generate(&self, x: &Matrix, slot: usize, rng: &mut Rng, out: &mut Augmented, label: u32) {
        let source = self.members[slot];
        let list = &self.lists[slot];
        let (neighbor, delta) = if list.is_empty() {
            (source, 0.0)
        } else {
            (list[rng.random_range(0..list.len())], rng.random::<f64>())
        };
        let point = interpolate(x.row(source), x.row(neighbor), delta);
        out.x.push_row(&point).expect("row width matches");
        out.y.push(label);
        out.origin.push(Origin::Synthetic {
            source,
            neighbor,
            delta,
        });
    }
}

fn members_of(y: &[u32], label: u32) -> Vec<usize> {
    y.iter()
        .enumerate()
        .filter(|(_, &l)| l == label)
        .map(|(i, _)| i)
        .collect()
}

pub fn smote(x: &Matrix, y: &[u32], spec: &AugmentSpec) -> Result<Augmented> {
    check_inputs(x, y, spec)?;
    let counts = class_counts(y);
    let mut out = Augmented::identity(x, y);
    if counts.len() < 2 {
        out.warnings.push("single class present; nothing to balance".into());
        return Ok(out);
    }
    let majority = counts.values().copied().max().unwrap_or(0);
    let mut rng = rng::seeded(spec.seed);
    for (&label, &n) in &counts {
        if n == majority {
            continue;
        }
        let nb = ClassNeighbors::new(x, members_of(y, label), spec.k_neighbors);
        if n == 1 {
            out.warnings.push(format!("class {label} has one member; oversampled by duplication"));
        }
        for _ in 0..majority - n {
            let slot = rng.random_range(0..n);
            nb.generate(x, slot, &mut rng, &mut out, label);
        }
    }
    Ok(out)
}

/// Shares `total` units across `weights` proportionally; remainders go to the
/// largest fractional parts, ties to the lower index.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let ideal: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut quotas: Vec<usize> = ideal.iter().map(|&v| crate::math::floor(v) as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - quotas[a] as f64;
        let rb = ideal[b] - quotas[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        quotas[i] += 1;
    }
    quotas
}

pub fn adasyn(x: &Matrix, y: &[u32], spec: &AugmentSpec) -> Result<Augmented> {
    check_inputs(x, y, spec)?;
    let counts = class_counts(y);
    let mut out = Augmented::identity(x, y);
    if counts.len() < 2 {
        out.warnings.push("single class present; nothing to balance".into());
        return Ok(out);
    }
    let majority = counts.values().copied().max().unwrap_or(0);
    let all = NeighborIndex::new(x);
    let k_density = spec.k_neighbors.min(y.len() - 1);
    let mut rng = rng::seeded(spec.seed);
    for (&label, &n) in &counts {
        if n == majority {
            continue;
        }
        let members = members_of(y, label);
        let ratios: Vec<f64> = members
            .iter()
            .map(|&i| {
                let nbrs = all.query_point(i, k_density);
                let other = nbrs.iter().filter(|(j, _)| y[*j] != label).count();
                other as f64 / k_density as f64
            })
            .collect();
        let need = majority - n;
        let quotas = if ratios.iter().all(|&r| r == 0.0) {
            out.warnings.push(format!(
                "class {label}: no member has other-class neighbours; using uniform quotas"
            ));
            largest_remainder(&vec![1.0; n], need)
        } else {
            largest_remainder(&ratios, need)
        };
        let nb = ClassNeighbors::new(x, members, spec.k_neighbors);
        for (slot, &q) in quotas.iter().enumerate() {
            for _ in 0..q {
                nb.generate(x, slot, &mut rng, &mut out, label);
            }
        }
    }
    Ok(out)
}

/// Mutual nearest-neighbour pairs `(i, j)`, `i < j`, with different labels.
pub fn tomek_links(index: &NeighborIndex<'_>, y: &[u32]) -> Vec<(usize, usize)> {
    let n = index.len();
    if n < 2 {
        return Vec::new();
    }
    let nn: Vec<usize> = (0..n).map(|i| index.query_point(i, 1)[0].0).collect();
    (0..n)
        .filter_map(|i| {
            let j = nn[i];
            (i < j && nn[j] == i && y[i] != y[j]).then_some((i, j))
        })
        .collect()
}

/// Drops flagged rows, keeping the last flagged member of any class that would vanish.
fn remove_guarded(aug: Augmented, mut remove: Vec<bool>) -> Augmented {
    let mut warnings = aug.warnings;
    for (&label, _) in class_counts(&aug.y).iter() {
        let members = members_of(&aug.y, label);
        if members.iter().all(|&i| remove[i]) {
            let keep = *members.last().expect("class has members");
            remove[keep] = false;
            warnings.push(format!("class {label} would be emptied by cleaning; kept one member"));
        }
    }
    let kept: Vec<usize> = (0..aug.y.len()).filter(|&i| !remove[i]).collect();
    Augmented {
        x: aug.x.select_rows(&kept),
        y: kept.iter().map(|&i| aug.y[i]).collect(),
        origin: kept.iter().map(|&i| aug.origin[i]).collect(),
        warnings,
    }
}

pub fn smote_tomek(x: &Matrix, y: &[u32], spec: &AugmentSpec) -> Result<Augmented> {
    let aug = smote(x, y, spec)?;
    let links = tomek_links(&NeighborIndex::new(&aug.x), &aug.y);
    let mut remove = vec![false; aug.y.len()];
    for (i, j) in links {
        remove[i] = true;
        remove[j] = true;
    }
    Ok(remove_guarded(aug, remove))
}

/// Label chosen by a k-NN vote for a point labelled `own`; ties favour `own`,
/// then the smallest code.
fn enn_vote(neighbor_labels: impl Iterator<Item = u32>, own: u32) -> u32 {
    let votes = class_counts(&neighbor_labels.collect::<Vec<_>>());
    let best = votes.values().copied().max().unwrap_or(0);
    if votes.get(&own).copied().unwrap_or(0) == best {
        return own;
    }
    votes
        .iter()
        .find(|(_, &v)| v == best)
        .map(|(&l, _)| l)
        .unwrap_or(own)
}

pub fn smote_enn(x: &Matrix, y: &[u32], spec: &AugmentSpec) -> Result<Augmented> {
    let aug = smote(x, y, spec)?;
    let index = NeighborIndex::new(&aug.x);
    let remove = (0..aug.y.len())
        .map(|i| {
            let nbrs = index.query_point(i, spec.enn_k);
            enn_vote(nbrs.iter().map(|(j, _)| aug.y[*j]), aug.y[i]) != aug.y[i]
        })
        .collect();
    Ok(remove_guarded(aug, remove))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(variant: AugmentVariant) -> AugmentSpec {
        AugmentSpec::with_variant(variant, 11)
    }

    #[test]
    fn interpolation_endpoints() {
        let s = [0.0, 0.0];
        let n = [2.0, 2.0];
        assert_eq!(interpolate(&s, &n, 0.0), vec![0.0, 0.0]);
        assert_eq!(interpolate(&s, &n, 1.0), vec![2.0, 2.0]);
        assert_eq!(interpolate(&s, &n, 0.5), vec![1.0, 1.0]);
    }

    fn imbalanced() -> (Matrix, Vec<u32>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            rows.push([i as f64 * 0.1, 0.0]);
            y.push(1);
        }
        for i in 0..5 {
            rows.push([5.0 + i as f64 * 0.1, 5.0]);
            y.push(2);
        }
        rows.push([9.0, 9.0]);
        y.push(3);
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn smote_balances_and_keeps_originals() {
        let (x, y) = imbalanced();
        let out = smote(&x, &y, &spec(AugmentVariant::Smote)).unwrap();
        assert!(class_counts(&out.y).values().all(|&c| c == 20));
        for i in 0..y.len() {
            assert_eq!(out.x.row(i), x.row(i));
            assert_eq!(out.origin[i], Origin::Original(i));
        }
        // singleton class duplicates its only member
        for (k, o) in out.origin.iter().enumerate() {
            if out.y[k] == 3 {
                assert_eq!(out.x.row(k), &[9.0, 9.0]);
            }
            if let Origin::Synthetic { source, neighbor, .. } = o {
                assert_eq!(y[*source], out.y[k]);
                assert_eq!(y[*neighbor], out.y[k]);
            }
        }
        assert_eq!(out, smote(&x, &y, &spec(AugmentVariant::Smote)).unwrap());
    }

    #[test]
    fn single_class_is_identity_with_warning() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let out = smote(&x, &[1, 1], &spec(AugmentVariant::Smote)).unwrap();
        assert_eq!(out.y, vec![1, 1]);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn largest_remainder_quotas() {
        assert_eq!(largest_remainder(&[1.0, 0.0], 4), vec![4, 0]);
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[0.5, 0.25, 0.25], 3).iter().sum::<usize>(), 3);
    }

    #[test]
    fn adasyn_interior_point_gets_no_quota() {
        // minority points: one deep inside its own cluster, one next to the majority
        let mut rows = vec![[0.0, 0.0], [0.1, 0.0], [0.2, 0.0], [0.3, 0.0], [0.4, 0.0], [0.5, 0.0]];
        let mut y = vec![1u32; 6];
        rows.push([10.0, 0.0]);
        rows.push([10.1, 0.0]);
        rows.push([0.25, 0.05]);
        y.extend([2, 2, 2]);
        let x = Matrix::from_rows(&rows).unwrap();
        let s = AugmentSpec { k_neighbors: 1, ..spec(AugmentVariant::Adasyn) };
        let out = adasyn(&x, &y, &s).unwrap();
        assert!(class_counts(&out.y).values().all(|&c| c == 6));
        // r = (0, 0, 1) for minority rows 6..9: all three synthetics come from row 8
        assert_eq!(out.n_synthetic(), 3);
        for o in &out.origin[9..] {
            match o {
                Origin::Synthetic { source, .. } => assert_eq!(*source, 8),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn adasyn_balanced_input_is_identity() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let y = [1, 2, 1, 2];
        let out = adasyn(&x, &y, &spec(AugmentVariant::Adasyn)).unwrap();
        assert_eq!(out.x, x);
        assert_eq!(out.y, y.to_vec());
    }

    #[test]
    fn adasyn_uniform_fallback() {
        // minority class far away: every r_i is zero
        let mut rows: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        let mut y = vec![1u32; 10];
        for i in 0..3 {
            rows.push([100.0 + i as f64]);
            y.push(2);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let s = AugmentSpec { k_neighbors: 2, ..spec(AugmentVariant::Adasyn) };
        let out = adasyn(&x, &y, &s).unwrap();
        assert!(!out.warnings.is_empty());
        assert_eq!(class_counts(&out.y)[&2], 10);
    }

    #[test]
    fn tomek_small_cases() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert_eq!(tomek_links(&NeighborIndex::new(&x), &[1, 2]), vec![(0, 1)]);

        let x = Matrix::from_rows(&[[0.0], [1.0], [10.0]]).unwrap();
        assert_eq!(tomek_links(&NeighborIndex::new(&x), &[1, 2, 2]), vec![(0, 1)]);

        let x = Matrix::from_rows(&[[0.0], [0.5], [50.0], [50.5]]).unwrap();
        assert!(tomek_links(&NeighborIndex::new(&x), &[1, 1, 2, 2]).is_empty());
    }

    #[test]
    fn smote_tomek_removes_overlap_pair() {
        // one class-2 point sits on top of the class-1 cluster
        let mut rows: Vec<[f64; 2]> = (0..6).map(|i| [i as f64, 0.0]).collect();
        let mut y = vec![1u32; 6];
        rows.extend([[20.0, 20.0], [21.0, 20.0], [2.4, 0.1]]);
        y.extend([2, 2, 2]);
        let x = Matrix::from_rows(&rows).unwrap();
        let s = spec(AugmentVariant::SmoteTomek);
        let smoted = smote(&x, &y, &s).unwrap();
        let links = tomek_links(&NeighborIndex::new(&smoted.x), &smoted.y);
        assert!(!links.is_empty());
        let out = smote_tomek(&x, &y, &s).unwrap();
        for (i, j) in links {
            for k in [i, j] {
                let row = smoted.x.row(k);
                assert!(!(0..out.y.len()).any(|r| out.x.row(r) == row && out.origin[r] == smoted.origin[k]));
            }
        }
    }

    #[test]
    fn separated_balanced_data_untouched_by_cleaning() {
        let x = Matrix::from_rows(&[[0.0], [0.5], [1.0], [50.0], [50.5], [51.0]]).unwrap();
        let y = [1, 1, 1, 2, 2, 2];
        for v in [AugmentVariant::SmoteTomek, AugmentVariant::SmoteEnn] {
            let out = augment(&x, &y, &spec(v)).unwrap();
            assert_eq!(out.x, x);
            assert_eq!(out.y, y.to_vec());
        }
    }

    #[test]
    fn enn_removes_intruder() {
        let mut rows: Vec<[f64; 2]> = (0..8).map(|i| [(i % 4) as f64, (i / 4) as f64]).collect();
        let mut y = vec![1u32; 8];
        rows.push([1.5, 0.5]);
        y.push(2);
        for i in 0..8 {
            rows.push([30.0 + (i % 4) as f64, (i / 4) as f64]);
            y.push(2);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let out = smote_enn(&x, &y, &spec(AugmentVariant::SmoteEnn)).unwrap();
        // 3-NN vote oracle: the intruder's neighbours are all class 1
        let idx = NeighborIndex::new(&x);
        let votes: Vec<u32> = idx.query_point(8, 3).iter().map(|(j, _)| y[*j]).collect();
        assert_eq!(votes, vec![1, 1, 1]);
        assert!(!(0..out.y.len()).any(|r| out.x.row(r) == [1.5, 0.5]));
        assert!(out.origin.contains(&Origin::Original(0)));
    }

    #[test]
    fn guard_keeps_last_member() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [0.2], [0.15]]).unwrap();
        let y = vec![1, 1, 1, 2];
        let aug = Augmented::identity(&x, &y);
        let out = remove_guarded(aug, vec![false, false, false, true]);
        assert_eq!(out.y, vec![1, 1, 1, 2]);
        assert_eq!(out.warnings.len(), 1);
    }

    fn brute_tomek(x: &Matrix, y: &[u32]) -> Vec<(usize, usize)> {
        let n = x.rows();
        let nn: Vec<usize> = (0..n)
            .map(|i| {
                let mut best = usize::MAX;
                let mut bd = f64::INFINITY;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d < bd {
                        bd = d;
                        best = j;
                    }
                }
                best
            })
            .collect();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if nn[i] == j && nn[j] == i && y[i] != y[j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        let ap: Vec<f64> = a.iter().zip(p).map(|(x, y)| y - x).collect();
        let len2: f64 = ab.iter().map(|v| v * v).sum();
        let t = if len2 == 0.0 { 0.0 } else { (ab.iter().zip(&ap).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0) };
        ap.iter().zip(&ab).map(|(v, u)| (v - t * u).powi(2)).sum::<f64>().sqrt()
    }

    fn random_problem(n: usize, seed: u64) -> (Matrix, Vec<u32>) {
        let mut rng = rng::seeded(seed);
        let mut x = Matrix::zeros(n, 2);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            x[(i, 0)] = rng.random_range(-3.0..3.0);
            x[(i, 1)] = rng.random_range(-3.0..3.0);
            let u: f64 = rng.random();
            y.push(if u < 0.7 { 1 } else if u < 0.9 { 2 } else { 3 });
        }
        (x, y)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn oversampling_contracts(n in 4usize..120, seed in any::<u64>()) {
            let (x, y) = random_problem(n, seed);
            for v in [AugmentVariant::Smote, AugmentVariant::Adasyn] {
                let out = augment(&x, &y, &AugmentSpec::with_variant(v, seed)).unwrap();
                let counts = class_counts(&out.y);
                let max = counts.values().max().unwrap();
                let min = counts.values().min().unwrap();
                prop_assert_eq!(max, min);
                for (k, o) in out.origin.iter().enumerate() {
                    if let Origin::Synthetic { source, neighbor, .. } = *o {
                        prop_assert_eq!(y[source], out.y[k]);
                        prop_assert_eq!(y[neighbor], out.y[k]);
                        prop_assert!(segment_distance(out.x.row(k), x.row(source), x.row(neighbor)) < 1e-9);
                    }
                }
                prop_assert_eq!(&out, &augment(&x, &y, &AugmentSpec::with_variant(v, seed)).unwrap());
            }
        }

        #[test]
        fn tomek_matches_brute_force(n in 2usize..150, seed in any::<u64>()) {
            let (x, y) = random_problem(n, seed);
            prop_assert_eq!(tomek_links(&NeighborIndex::new(&x), &y), brute_tomek(&x, &y));
        }
    }
}
