//! Tabular datasets, row-type partitioning, class-label policy and stratified splits.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Stored as days since 1970-01-01.
    Date,
    Identifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    #[default]
    Feature,
    RowType,
    Target,
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub role: ColumnRole,
}

impl ColumnSpec {
    pub fn new(name: &str, kind: ColumnKind, role: ColumnRole) -> Self {
        ColumnSpec {
            name: name.into(),
            kind,
            role,
        }
    }

    pub fn feature(name: &str, kind: ColumnKind) -> Self {
        Self::new(name, kind, ColumnRole::Feature)
    }
}

/// Checks the schema invariants. The target column is optional so that
/// unlabeled data can be routed for prediction.
pub fn validate_schema(schema: &[ColumnSpec], require_target: bool) -> Result<()> {
    let count = |role| schema.iter().filter(|c| c.role == role).count();
    if count(ColumnRole::RowType) != 1 {
        return Err(Error::Schema(format!(
            "expected exactly one row_type column, found {}",
            count(ColumnRole::RowType)
        )));
    }
    let targets = count(ColumnRole::Target);
    if targets > 1 || (require_target && targets == 0) {
        return Err(Error::Schema(format!(
            "expected exactly one target column, found {targets}"
        )));
    }
    for c in schema {
        if c.kind == ColumnKind::Identifier && c.role == ColumnRole::Feature {
            return Err(Error::Schema(format!(
                "identifier column `{}` cannot be a feature",
                c.name
            )));
        }
    }
    for (i, c) in schema.iter().enumerate() {
        if schema[..i].iter().any(|o| o.name == c.name) {
            return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Text(String),
    /// Days since 1970-01-01.
    Date(i32),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    /// Numeric view: numbers as-is, dates as day counts, text parsed if possible.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(*x),
            Cell::Date(d) => Some(*d as f64),
            Cell::Text(s) => s.trim().parse().ok(),
            Cell::Missing => None,
        }
    }

    /// Text view used for categories and row types.
    pub fn as_text(&self) -> Option<String> {
        match self {
            Cell::Number(x) if *x == libm::trunc(*x) && x.is_finite() => {
                Some(format!("{}", *x as i64))
            }
            Cell::Number(x) => Some(format!("{x}")),
            Cell::Text(s) => Some(s.clone()),
            Cell::Date(d) => Some(format!("{d}")),
            Cell::Missing => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowType(String);

impl RowType {
    pub fn new(id: &str) -> Result<Self> {
        if id.is_empty() {
            return Err(Error::InvalidParameter("row type id must be nonempty".into()));
        }
        Ok(RowType(id.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RowType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Vec<ColumnSpec>,
    rows: Vec<Vec<Cell>>,
}

impl Dataset {
    /// Validates the schema (target optional) and row widths; at least one row is required.
    pub fn new(schema: Vec<ColumnSpec>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        validate_schema(&schema, false)?;
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != schema.len() {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has {} cells, schema has {} columns",
                    r.len(),
                    schema.len()
                )));
            }
        }
        Ok(Dataset { schema, rows })
    }

    pub fn schema(&self) -> &[ColumnSpec] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    fn role_index(&self, role: ColumnRole) -> Option<usize> {
        self.schema.iter().position(|c| c.role == role)
    }

    pub fn row_type_column(&self) -> usize {
        self.role_index(ColumnRole::RowType)
            .expect("schema validated with one row_type column")
    }

    pub fn target_column(&self) -> Option<usize> {
        self.role_index(ColumnRole::Target)
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = (usize, &ColumnSpec)> {
        self.schema
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == ColumnRole::Feature)
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.rows[row][col]
    }

    pub fn column_cells(&self, col: usize) -> impl Iterator<Item = &Cell> {
        self.rows.iter().map(move |r| &r[col])
    }

    /// Row type of every row, failing on the first missing cell.
    pub fn row_types(&self) -> Result<Vec<RowType>> {
        let col = self.row_type_column();
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| match r[col].as_text() {
                Some(s) if !s.is_empty() => Ok(RowType(s)),
                _ => Err(Error::MissingRowType { row: i }),
            })
            .collect()
    }

    /// Class codes from the target column. Codes are positive integers.
    pub fn labels(&self) -> Result<Vec<u32>> {
        let col = self
            .target_column()
            .ok_or_else(|| Error::Schema("dataset has no target column".into()))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let v = r[col].as_f64().ok_or_else(|| Error::InvalidTarget {
                    row: i,
                    reason: "missing or non-numeric".into(),
                })?;
                if v < 1.0 || v != libm::trunc(v) || v > u32::MAX as f64 {
                    return Err(Error::InvalidTarget {
                        row: i,
                        reason: format!("{v} is not a positive integer code"),
                    });
                }
                Ok(v as u32)
            })
            .collect()
    }

    /// Subset of rows in the given order. May be empty.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Removes the named columns; unknown names are an error.
    pub fn drop_columns(&self, names: &[String]) -> Result<Dataset> {
        let mut drop = Vec::with_capacity(names.len());
        for n in names {
            drop.push(
                self.column_index(n)
                    .ok_or_else(|| Error::UnknownColumn(n.clone()))?,
            );
        }
        let keep: Vec<usize> = (0..self.schema.len()).filter(|i| !drop.contains(i)).collect();
        let schema: Vec<ColumnSpec> = keep.iter().map(|&i| self.schema[i].clone()).collect();
        validate_schema(&schema, false)?;
        Ok(Dataset {
            schema,
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        })
    }
}

/// Row indices of each row type, in source order.
pub fn partition_indices(d: &Dataset) -> Result<BTreeMap<RowType, Vec<usize>>> {
    let mut out: BTreeMap<RowType, Vec<usize>> = BTreeMap::new();
    for (i, t) in d.row_types()?.into_iter().enumerate() {
        out.entry(t).or_default().push(i);
    }
    Ok(out)
}

/// Splits a dataset into one dataset per row type. Source order is preserved.
pub fn partition_by_row_type(d: &Dataset) -> Result<BTreeMap<RowType, Dataset>> {
    Ok(partition_indices(d)?
        .into_iter()
        .map(|(t, idx)| (t, d.select_rows(&idx)))
        .collect())
}

/// Conditional class merges: `source → destination` applies when the source
/// class is present with fewer than `min_class_count` rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelPolicy {
    #[serde(default)]
    pub merges: Vec<(u32, u32)>,
    #[serde(default = "default_min_class_count")]
    pub min_class_count: usize,
}

fn default_min_class_count() -> usize {
    5
}

impl Default for LabelPolicy {
    fn default() -> Self {
        LabelPolicy {
            merges: Vec::new(),
            min_class_count: default_min_class_count(),
        }
    }
}

impl LabelPolicy {
    pub fn validate(&self) -> Result<()> {
        for &(src, dst) in &self.merges {
            if src == dst {
                return Err(Error::LabelPolicy(format!("class {src} merges into itself")));
            }
            // follow the chain from dst; reaching src again is a cycle
            let mut cur = dst;
            for _ in 0..=self.merges.len() {
                match self.merges.iter().find(|(s, _)| *s == cur) {
                    Some(&(_, next)) if next == src => {
                        return Err(Error::LabelPolicy(format!(
                            "merge graph has a cycle through class {src}"
                        )))
                    }
                    Some(&(_, next)) => cur = next,
                    None => break,
                }
            }
        }
        for (i, &(src, _)) in self.merges.iter().enumerate() {
            if self.merges[..i].iter().any(|&(s, _)| s == src) {
                return Err(Error::LabelPolicy(format!("class {src} merged twice")));
            }
        }
        Ok(())
    }

    /// Decides the merges for a set of original labels and returns the code map.
    pub fn fit(&self, labels: &[u32]) -> Result<ClassCodeMap> {
        self.validate()?;
        if labels.is_empty() {
            return Err(Error::LabelPolicy("merge would leave zero classes".into()));
        }
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &l in labels {
            *counts.entry(l).or_default() += 1;
        }
        let mut merges: BTreeMap<u32, u32> = BTreeMap::new();
        for &(src, dst) in &self.merges {
            let n = counts.get(&src).copied().unwrap_or(0);
            if n > 0 && n < self.min_class_count {
                counts.remove(&src);
                *counts.entry(dst).or_default() += n;
                merges.insert(src, dst);
            }
        }
        // resolve chains so each source points at a surviving class
        let resolved: BTreeMap<u32, u32> = merges
            .keys()
            .map(|&src| {
                let mut cur = src;
                while let Some(&next) = merges.get(&cur) {
                    cur = next;
                }
                (src, cur)
            })
            .collect();
        Ok(ClassCodeMap {
            merges: resolved,
            codes: counts.keys().copied().collect(),
            names: BTreeMap::new(),
        })
    }
}

/// Maps original class codes to contiguous internal codes `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCodeMap {
    /// Original code → surviving original code.
    pub merges: BTreeMap<u32, u32>,
    /// Surviving original codes, ascending; internal code `k` is `codes[k - 1]`.
    pub codes: Vec<u32>,
    /// Optional display names keyed by original code.
    #[serde(default)]
    pub names: BTreeMap<u32, String>,
}

impl ClassCodeMap {
    pub fn identity(labels: &[u32]) -> Self {
        let mut codes: Vec<u32> = labels.to_vec();
        codes.sort_unstable();
        codes.dedup();
        ClassCodeMap {
            merges: BTreeMap::new(),
            codes,
            names: BTreeMap::new(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.codes.len()
    }

    /// Internal codes `1..=K`.
    pub fn internal_codes(&self) -> Vec<u32> {
        (1..=self.codes.len() as u32).collect()
    }

    pub fn encode(&self, original: u32) -> Option<u32> {
        let surviving = self.merges.get(&original).copied().unwrap_or(original);
        self.codes
            .iter()
            .position(|&c| c == surviving)
            .map(|p| p as u32 + 1)
    }

    pub fn encode_all(&self, labels: &[u32]) -> Result<Vec<u32>> {
        labels
            .iter()
            .map(|&l| self.encode(l).ok_or(Error::UnknownLabel(l)))
            .collect()
    }

    pub fn decode(&self, internal: u32) -> u32 {
        self.codes[internal as usize - 1]
    }

    pub fn name(&self, internal: u32) -> String {
        let code = self.decode(internal);
        self.names
            .get(&code)
            .cloned()
            .unwrap_or_else(|| code.to_string())
    }
}

/// Per-row-type numeric data `(X_r, y_r)` with internal class codes.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedPartition {
    pub row_type: RowType,
    pub features: Matrix,
    /// Internal class codes `1..=K`.
    pub targets: Vec<u32>,
    pub feature_names: Vec<String>,
    pub code_map: ClassCodeMap,
}

impl TypedPartition {
    /// Builds a partition from original class codes with an identity code map.
    pub fn new(
        row_type: RowType,
        features: Matrix,
        original_labels: &[u32],
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::Empty);
        }
        if features.rows() != original_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                got: original_labels.len(),
            });
        }
        let code_map = ClassCodeMap::identity(original_labels);
        let targets = code_map.encode_all(original_labels)?;
        Ok(TypedPartition {
            row_type,
            features,
            targets,
            feature_names,
            code_map,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn original_labels(&self) -> Vec<u32> {
        self.targets.iter().map(|&t| self.code_map.decode(t)).collect()
    }

    fn select(&self, indices: &[usize]) -> TypedPartition {
        TypedPartition {
            row_type: self.row_type.clone(),
            features: self.features.select_rows(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            code_map: self.code_map.clone(),
        }
    }
}

/// Applies the merge policy and re-indexes the surviving classes contiguously.
pub fn apply_label_policy(p: &TypedPartition, policy: &LabelPolicy) -> Result<TypedPartition> {
    let originals = p.original_labels();
    let fresh = policy.fit(&originals)?;
    let mut merges = p.code_map.merges.clone();
    for target in merges.values_mut() {
        if let Some(&next) = fresh.merges.get(target) {
            *target = next;
        }
    }
    for (&src, &dst) in &fresh.merges {
        merges.insert(src, dst);
    }
    let code_map = ClassCodeMap {
        merges,
        codes: fresh.codes,
        names: p.code_map.names.clone(),
    };
    let targets = code_map.encode_all(&originals)?;
    Ok(TypedPartition {
        row_type: p.row_type.clone(),
        features: p.features.clone(),
        targets,
        feature_names: p.feature_names.clone(),
        code_map,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub stratified: bool,
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_true() -> bool {
    true
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: default_test_fraction(),
            seed: 0,
            stratified: true,
        }
    }
}

/// Train/test row indices, each ascending.
///
/// Stratified splits size the test set as `round(N·fraction)` and share it
/// across classes by largest remainder, so each class proportion in the test
/// set is within one row of exact. Classes with two or more rows are then
/// nudged to appear on both sides.
pub fn stratified_split_indices(labels: &[u32], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::Split(format!(
            "test_fraction {} is outside (0, 1)",
            spec.test_fraction
        )));
    }
    if n < 2 {
        return Err(Error::Split(format!("need at least 2 rows, got {n}")));
    }
    let test_size = crate::math::round(n as f64 * spec.test_fraction) as usize;
    if test_size == 0 {
        return Err(Error::Split("test fraction yields an empty test split".into()));
    }
    if test_size >= n {
        return Err(Error::Split("test fraction yields an empty train split".into()));
    }
    let mut rng = rng::seeded(spec.seed);
    let mut test: Vec<usize> = if spec.stratified {
        let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            by_class.entry(l).or_default().push(i);
        }
        let sizes: Vec<usize> = by_class.values().map(Vec::len).collect();
        let alloc = stratified_allocation(&sizes, test_size, n);
        let mut out = Vec::with_capacity(test_size);
        for (members, take) in by_class.into_values().zip(alloc) {
            let mut members = members;
            members.shuffle(&mut rng);
            out.extend_from_slice(&members[..take]);
        }
        out
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all.truncate(test_size);
        all
    };
    test.sort_unstable();
    let mut is_test = alloc::vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((train, test))
}

fn stratified_allocation(sizes: &[usize], test_size: usize, n: usize) -> Vec<usize> {
    let ideal: Vec<f64> = sizes
        .iter()
        .map(|&s| s as f64 * test_size as f64 / n as f64)
        .collect();
    let mut alloc: Vec<usize> = ideal.iter().map(|&v| crate::math::floor(v) as usize).collect();
    let mut remaining = test_size - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - alloc[a] as f64;
        let rb = ideal[b] - alloc[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &c in &order {
        if remaining == 0 {
            break;
        }
        alloc[c] += 1;
        remaining -= 1;
    }
    let surplus = |alloc: &[usize], c: usize| alloc[c] as f64 - ideal[c];
    for c in 0..sizes.len() {
        if sizes[c] < 2 {
            continue;
        }
        if alloc[c] == 0 {
            // move one test row from the class holding the largest surplus
            let donor = (0..sizes.len())
                .filter(|&d| d != c && alloc[d] > usize::from(sizes[d] >= 2))
                .max_by(|&a, &b| {
                    surplus(&alloc, a)
                        .partial_cmp(&surplus(&alloc, b))
                        .unwrap_or(core::cmp::Ordering::Equal)
                        .then(b.cmp(&a))
                });
            if let Some(d) = donor {
                alloc[d] -= 1;
                alloc[c] = 1;
            }
        } else if alloc[c] == sizes[c] {
            let receiver = (0..sizes.len())
                .filter(|&d| d != c && alloc[d] + usize::from(sizes[d] >= 2) < sizes[d])
                .min_by(|&a, &b| {
                    surplus(&alloc, a)
                        .partial_cmp(&surplus(&alloc, b))
                        .unwrap_or(core::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                });
            if let Some(r) = receiver {
                alloc[r] += 1;
                alloc[c] -= 1;
            }
        }
    }
    alloc
}

pub fn stratified_split(
    p: &TypedPartition,
    spec: &SplitSpec,
) -> Result<(TypedPartition, TypedPartition)> {
    let (train, test) = stratified_split_indices(&p.targets, spec)?;
    Ok((p.select(&train), p.select(&test)))
}
