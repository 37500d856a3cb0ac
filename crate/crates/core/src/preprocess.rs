//! Per-row-type preparation: missing-value reporting, thresholded and
//! explicit column drops, imputation, one-hot encoding and z-scoring.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Cell, ColumnKind, ColumnRole, Dataset, RowType};
use crate::math;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingEntry {
    pub column: String,
    pub total_missing: usize,
    pub pct_missing: f64,
}

/// Missing-value counts per column, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingReport {
    pub n_rows: usize,
    pub entries: Vec<MissingEntry>,
}

impl MissingReport {
    /// Entries by descending percentage; equal percentages keep schema order.
    pub fn sorted(&self) -> Vec<&MissingEntry> {
        let mut v: Vec<&MissingEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| b.total_missing.cmp(&a.total_missing));
        v
    }

    pub fn get(&self, column: &str) -> Option<&MissingEntry> {
        self.entries.iter().find(|e| e.column == column)
    }
}

pub fn missing_value_report(d: &Dataset) -> MissingReport {
    let n = d.n_rows();
    let entries = d
        .schema()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let total = d.column_cells(j).filter(|c| c.is_missing()).count();
            MissingEntry {
                column: c.name.clone(),
                total_missing: total,
                pct_missing: if n == 0 { 0.0 } else { 100.0 * total as f64 / n as f64 },
            }
        })
        .collect();
    MissingReport { n_rows: n, entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericImputation {
    #[default]
    Median,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessPlan {
    /// Feature columns with strictly more missing values than this percentage are dropped.
    #[serde(default = "default_threshold")]
    pub drop_missing_threshold_pct: f64,
    /// Columns that do not apply to this row type.
    #[serde(default)]
    pub drop_columns: Vec<String>,
    #[serde(default)]
    pub numeric_imputation: NumericImputation,
    #[serde(default = "default_max_cardinality")]
    pub max_cardinality: usize,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Optional `(lower, upper)` quantiles for winsorizing numeric columns.
    #[serde(default)]
    pub winsorize: Option<(f64, f64)>,
}

fn default_threshold() -> f64 {
    70.0
}

fn default_max_cardinality() -> usize {
    64
}

fn default_true() -> bool {
    true
}

impl Default for PreprocessPlan {
    fn default() -> Self {
        PreprocessPlan {
            drop_missing_threshold_pct: default_threshold(),
            drop_columns: Vec::new(),
            numeric_imputation: NumericImputation::Median,
            max_cardinality: default_max_cardinality(),
            standardize: true,
            winsorize: None,
        }
    }
}

impl PreprocessPlan {
    pub fn validate(&self) -> Result<()> {
        let t = self.drop_missing_threshold_pct;
        if !(t > 0.0 && t <= 100.0) {
            return Err(Error::InvalidParameter(format!(
                "drop_missing_threshold_pct {t} is outside (0, 100]"
            )));
        }
        if self.max_cardinality < 2 {
            return Err(Error::InvalidParameter("max_cardinality must be at least 2".into()));
        }
        if let Some((lo, hi)) = self.winsorize {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "winsorize quantiles ({lo}, {hi}) are not ordered within [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Drops feature columns whose missing percentage exceeds the plan threshold.
/// Returns the reduced dataset and the dropped column names.
pub fn drop_high_missing(d: &Dataset, plan: &PreprocessPlan) -> Result<(Dataset, Vec<String>)> {
    plan.validate()?;
    let report = missing_value_report(d);
    let dropped: Vec<String> = d
        .feature_columns()
        .filter(|(j, _)| report.entries[*j].pct_missing > plan.drop_missing_threshold_pct)
        .map(|(_, c)| c.name.clone())
        .collect();
    let out = d.drop_columns(&dropped)?;
    if out.feature_columns().next().is_none() {
        return Err(Error::AllFeaturesDropped);
    }
    Ok((out, dropped))
}

/// Removes columns that do not apply to `row_type`.
pub fn drop_inapplicable(d: &Dataset, row_type: &RowType, drop_columns: &[String]) -> Result<Dataset> {
    d.drop_columns(drop_columns).map_err(|e| match e {
        Error::UnknownColumn(_) => e.in_row_type(row_type.as_str()),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnTransform {
    Numeric {
        column: String,
        fill: f64,
        clip: Option<(f64, f64)>,
    },
    Categorical {
        column: String,
        fill: String,
        vocabulary: Vec<String>,
    },
}

impl ColumnTransform {
    pub fn column(&self) -> &str {
        match self {
            ColumnTransform::Numeric { column, .. } | ColumnTransform::Categorical { column, .. } => {
                column
            }
        }
    }

    fn width(&self) -> usize {
        match self {
            ColumnTransform::Numeric { .. } => 1,
            ColumnTransform::Categorical { vocabulary, .. } => vocabulary.len(),
        }
    }

    /// Raw (unscaled) encoded values for one cell.
    fn encode(&self, cell: &Cell, out: &mut Vec<f64>) -> Result<()> {
        match self {
            ColumnTransform::Numeric { column, fill, clip } => {
                let v = match cell {
                    Cell::Missing => *fill,
                    c => c.as_f64().ok_or_else(|| Error::InvalidCell {
                        column: column.clone(),
                        reason: format!("non-numeric value {c:?}"),
                    })?,
                };
                if !v.is_finite() {
                    return Err(Error::NonFinite);
                }
                out.push(match clip {
                    Some((lo, hi)) => v.clamp(*lo, *hi),
                    None => v,
                });
            }
            ColumnTransform::Categorical {
                fill, vocabulary, ..
            } => {
                let s = cell.as_text().unwrap_or_else(|| fill.clone());
                out.extend(vocabulary.iter().map(|v| if *v == s { 1.0 } else { 0.0 }));
            }
        }
        Ok(())
    }
}

/// Learned per-type transform. Immutable after fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPreprocessor {
    pub columns: Vec<ColumnTransform>,
    /// Encoded feature indices kept after dropping constants.
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub feature_names: Vec<String>,
    pub dropped_constant: Vec<String>,
    pub standardize: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = math::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit_preprocessor(d: &Dataset, plan: &PreprocessPlan) -> Result<FittedPreprocessor> {
    plan.validate()?;
    let mut columns = Vec::new();
    for (j, spec) in d.feature_columns() {
        match spec.kind {
            ColumnKind::Numeric | ColumnKind::Date => {
                let mut values = Vec::new();
                for c in d.column_cells(j) {
                    if c.is_missing() {
                        continue;
                    }
                    let v = c.as_f64().ok_or_else(|| Error::InvalidCell {
                        column: spec.name.clone(),
                        reason: format!("non-numeric value {c:?}"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::NonFinite);
                    }
                    values.push(v);
                }
                let fill = if values.is_empty() {
                    0.0
                } else {
                    match plan.numeric_imputation {
                        NumericImputation::Median => median(&mut values.clone()),
                        NumericImputation::Mean => values.iter().sum::<f64>() / values.len() as f64,
                    }
                };
                let clip = match plan.winsorize {
                    Some((lo, hi)) if !values.is_empty() => {
                        let missing = d.n_rows() - values.len();
                        values.extend(core::iter::repeat(fill).take(missing));
                        values.sort_by(f64::total_cmp);
                        Some((quantile(&values, lo), quantile(&values, hi)))
                    }
                    _ => None,
                };
                columns.push(ColumnTransform::Numeric {
                    column: spec.name.clone(),
                    fill,
                    clip,
                });
            }
            ColumnKind::Categorical => {
                let mut freq: BTreeMap<String, usize> = BTreeMap::new();
                for c in d.column_cells(j) {
                    if let Some(s) = c.as_text() {
                        *freq.entry(s).or_default() += 1;
                    }
                }
                if freq.len() > plan.max_cardinality {
                    return Err(Error::Cardinality {
                        column: spec.name.clone(),
                        cardinality: freq.len(),
                        max: plan.max_cardinality,
                    });
                }
                // mode; BTreeMap order makes ties resolve to the smallest category
                let fill = freq
                    .iter()
                    .fold(None::<(&String, usize)>, |best, (k, &n)| match best {
                        Some((_, bn)) if bn >= n => best,
                        _ => Some((k, n)),
                    })
                    .map(|(k, _)| k.clone())
                    .unwrap_or_default();
                columns.push(ColumnTransform::Categorical {
                    column: spec.name.clone(),
                    fill,
                    vocabulary: freq.into_keys().collect(),
                });
            }
            ColumnKind::Identifier => {}
        }
    }
    if columns.is_empty() {
        return Err(Error::AllFeaturesDropped);
    }
    let names: Vec<String> = columns
        .iter()
        .flat_map(|c| match c {
            ColumnTransform::Numeric { column, .. } => alloc::vec![column.clone()],
            ColumnTransform::Categorical {
                column, vocabulary, ..
            } => vocabulary.iter().map(|v| format!("{column}={v}")).collect(),
        })
        .collect();
    let raw = encode_raw(&columns, d)?;
    let n = raw.rows() as f64;
    let mut kept = Vec::new();
    let mut mean = Vec::new();
    let mut std = Vec::new();
    let mut dropped_constant = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let col = raw.column(j);
        let mu = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        let sd = math::sqrt(var);
        let scale = col.iter().fold(0.0f64, |m, v| m.max(math::abs(*v))).max(1.0);
        if sd <= 1e-12 * scale {
            dropped_constant.push(name.clone());
        } else {
            kept.push(j);
            mean.push(mu);
            std.push(sd);
        }
    }
    if kept.is_empty() {
        return Err(Error::AllFeaturesDropped);
    }
    Ok(FittedPreprocessor {
        feature_names: kept.iter().map(|&j| names[j].clone()).collect(),
        columns,
        kept,
        mean,
        std,
        dropped_constant,
        standardize: plan.standardize,
    })
}

fn encode_raw(columns: &[ColumnTransform], d: &Dataset) -> Result<Matrix> {
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            let j = d
                .column_index(c.column())
                .ok_or_else(|| Error::UnknownColumn(c.column().into()))?;
            if d.schema()[j].role != ColumnRole::Feature {
                return Err(Error::Schema(format!(
                    "column `{}` is not a feature in this dataset",
                    c.column()
                )));
            }
            Ok(j)
        })
        .collect::<Result<_>>()?;
    let width = columns.iter().map(ColumnTransform::width).sum();
    let mut m = Matrix::with_cols(width);
    let mut buf = Vec::with_capacity(width);
    for r in d.rows() {
        buf.clear();
        for (c, &j) in columns.iter().zip(&idx) {
            c.encode(&r[j], &mut buf)?;
        }
        m.push_row(&buf)?;
    }
    Ok(m)
}

impl FittedPreprocessor {
    pub fn n_features(&self) -> usize {
        self.kept.len()
    }

    /// Input columns consumed by this preprocessor.
    pub fn input_columns(&self) -> BTreeSet<&str> {
        self.columns.iter().map(ColumnTransform::column).collect()
    }

    pub fn transform(&self, d: &Dataset) -> Result<Matrix> {
        let raw = encode_raw(&self.columns, d)?;
        let mut out = Matrix::zeros(raw.rows(), self.kept.len());
        for i in 0..raw.rows() {
            let src = raw.row(i);
            let dst = out.row_mut(i);
            for (k, &j) in self.kept.iter().enumerate() {
                dst[k] = if self.standardize {
                    (src[j] - self.mean[k]) / self.std[k]
                } else {
                    src[j]
                };
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnSpec;
    use alloc::vec;
    use proptest::prelude::*;

    fn ds(cols: Vec<ColumnSpec>, rows: Vec<Vec<Cell>>) -> Dataset {
        let mut schema = vec![ColumnSpec::new("T", ColumnKind::Categorical, ColumnRole::RowType)];
        schema.extend(cols);
        let rows = rows
            .into_iter()
            .map(|r| {
                let mut v = vec![Cell::Text("a".into())];
                v.extend(r);
                v
            })
            .collect();
        Dataset::new(schema, rows).unwrap()
    }

    fn num(x: f64) -> Cell {
        Cell::Number(x)
    }

    fn text(s: &str) -> Cell {
        Cell::Text(s.into())
    }

    #[test]
    fn report_counts_missing() {
        let d = ds(
            vec![
                ColumnSpec::feature("A", ColumnKind::Numeric),
                ColumnSpec::feature("B", ColumnKind::Numeric),
            ],
            vec![
                vec![num(1.0), Cell::Missing],
                vec![num(2.0), Cell::Missing],
                vec![num(3.0), num(1.0)],
                vec![num(4.0), Cell::Missing],
            ],
        );
        let r = missing_value_report(&d);
        assert_eq!(r.get("A").unwrap().total_missing, 0);
        assert_eq!(r.get("A").unwrap().pct_missing, 0.0);
        assert_eq!(r.get("B").unwrap().total_missing, 3);
        assert_eq!(r.get("B").unwrap().pct_missing, 75.0);
        assert_eq!(r.sorted()[0].column, "B");
    }

    fn with_missing(n: usize, missing: usize) -> Vec<Cell> {
        (0..n)
            .map(|i| if i < missing { Cell::Missing } else { num(i as f64) })
            .collect()
    }

    #[test]
    fn exactly_threshold_is_kept() {
        // 7 of 10 missing is 70.0%: kept under the strict rule
        let a = with_missing(10, 7);
        let b = with_missing(10, 8);
        let c = with_missing(10, 0);
        let rows = (0..10).map(|i| vec![a[i].clone(), b[i].clone(), c[i].clone()]).collect();
        let d = ds(
            vec![
                ColumnSpec::feature("A", ColumnKind::Numeric),
                ColumnSpec::feature("B", ColumnKind::Numeric),
                ColumnSpec::feature("C", ColumnKind::Numeric),
            ],
            rows,
        );
        let (out, dropped) = drop_high_missing(&d, &PreprocessPlan::default()).unwrap();
        assert_eq!(dropped, vec![String::from("B")]);
        assert!(out.column_index("A").is_some());
        let vacuous = PreprocessPlan {
            drop_missing_threshold_pct: 100.0,
            ..PreprocessPlan::default()
        };
        assert!(drop_high_missing(&d, &vacuous).unwrap().1.is_empty());
    }

    #[test]
    fn dropping_everything_is_an_error() {
        let d = ds(
            vec![ColumnSpec::feature("A", ColumnKind::Numeric)],
            vec![vec![Cell::Missing], vec![Cell::Missing]],
        );
        assert_eq!(
            drop_high_missing(&d, &PreprocessPlan::default()).unwrap_err(),
            Error::AllFeaturesDropped
        );
    }

    #[test]
    fn inapplicable_columns_removed() {
        let d = ds(
            vec![
                ColumnSpec::feature("DRYLAND", ColumnKind::Numeric),
                ColumnSpec::feature("WETLAND", ColumnKind::Numeric),
                ColumnSpec::feature("LIMITAMT", ColumnKind::Numeric),
            ],
            vec![vec![num(1.0), num(2.0), num(3.0)]],
        );
        let t = RowType::new("personal").unwrap();
        let out = drop_inapplicable(&d, &t, &["DRYLAND".into(), "WETLAND".into()]).unwrap();
        assert_eq!(out.schema().len(), 2);
        assert_eq!(drop_inapplicable(&d, &t, &[]).unwrap(), d);
        assert!(drop_inapplicable(&d, &t, &["NOPE".into()]).is_err());
    }

    #[test]
    fn median_imputation_fills_two() {
        let d = ds(
            vec![
                ColumnSpec::feature("A", ColumnKind::Numeric),
                ColumnSpec::feature("B", ColumnKind::Numeric),
            ],
            vec![
                vec![num(1.0), num(0.0)],
                vec![Cell::Missing, num(1.0)],
                vec![num(3.0), num(0.0)],
            ],
        );
        let fp = fit_preprocessor(&d, &PreprocessPlan::default()).unwrap();
        // median oracle over the observed values {1, 3}
        let mut observed = vec![3.0, 1.0];
        observed.sort_by(f64::total_cmp);
        let oracle = (observed[0] + observed[1]) / 2.0;
        match &fp.columns[0] {
            ColumnTransform::Numeric { fill, .. } => assert_eq!(*fill, oracle),
            other => panic!("unexpected {other:?}"),
        }
        let plain = PreprocessPlan {
            standardize: false,
            ..PreprocessPlan::default()
        };
        let x = fit_preprocessor(&d, &plain).unwrap().transform(&d).unwrap();
        assert_eq!(x.column(0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn categorical_vocabulary_and_unseen() {
        let d = ds(
            vec![ColumnSpec::feature("C", ColumnKind::Categorical)],
            vec![vec![text("a")], vec![text("b")], vec![text("a")]],
        );
        let plain = PreprocessPlan {
            standardize: false,
            ..PreprocessPlan::default()
        };
        let fp = fit_preprocessor(&d, &plain).unwrap();
        assert_eq!(fp.feature_names, vec![String::from("C=a"), String::from("C=b")]);
        let probe = ds(
            vec![ColumnSpec::feature("C", ColumnKind::Categorical)],
            vec![vec![text("z")]],
        );
        assert_eq!(fp.transform(&probe).unwrap().row(0), &[0.0, 0.0]);

        // scaled variant: the unseen row equals the encoding of an all-zero block
        let fp = fit_preprocessor(&d, &PreprocessPlan::default()).unwrap();
        let z = fp.transform(&probe).unwrap();
        for k in 0..2 {
            assert_eq!(z[(0, k)], (0.0 - fp.mean[k]) / fp.std[k]);
        }
    }

    #[test]
    fn cardinality_limit_names_column() {
        let rows = (0..5).map(|i| vec![text(&format!("v{i}"))]).collect();
        let d = ds(vec![ColumnSpec::feature("SECTORCD", ColumnKind::Categorical)], rows);
        let plan = PreprocessPlan {
            max_cardinality: 4,
            ..PreprocessPlan::default()
        };
        match fit_preprocessor(&d, &plan) {
            Err(Error::Cardinality { column, .. }) => assert_eq!(column, "SECTORCD"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_column_dropped() {
        let d = ds(
            vec![
                ColumnSpec::feature("K", ColumnKind::Numeric),
                ColumnSpec::feature("V", ColumnKind::Numeric),
            ],
            vec![
                vec![num(5.0), num(1.0)],
                vec![num(5.0), num(2.0)],
                vec![num(5.0), num(3.0)],
            ],
        );
        let fp = fit_preprocessor(&d, &PreprocessPlan::default()).unwrap();
        assert_eq!(fp.dropped_constant, vec![String::from("K")]);
        assert_eq!(fp.feature_names, vec![String::from("V")]);
    }

    #[test]
    fn z_score_arithmetic() {
        let fp = FittedPreprocessor {
            columns: vec![ColumnTransform::Numeric {
                column: "A".into(),
                fill: 0.0,
                clip: None,
            }],
            kept: vec![0],
            mean: vec![5.0],
            std: vec![2.0],
            feature_names: vec!["A".into()],
            dropped_constant: vec![],
            standardize: true,
        };
        let d = ds(vec![ColumnSpec::feature("A", ColumnKind::Numeric)], vec![vec![num(7.0)]]);
        assert_eq!(fp.transform(&d).unwrap()[(0, 0)], (7.0 - 5.0) / 2.0);
    }

    #[test]
    fn schema_mismatch_on_transform() {
        let d = ds(
            vec![ColumnSpec::feature("A", ColumnKind::Numeric)],
            vec![vec![num(1.0)], vec![num(2.0)]],
        );
        let fp = fit_preprocessor(&d, &PreprocessPlan::default()).unwrap();
        let other = ds(
            vec![ColumnSpec::feature("B", ColumnKind::Numeric)],
            vec![vec![num(1.0)]],
        );
        assert!(matches!(fp.transform(&other), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn dates_are_day_counts() {
        let d = ds(
            vec![ColumnSpec::feature("D", ColumnKind::Date)],
            vec![vec![Cell::Date(0)], vec![Cell::Date(10)], vec![Cell::Missing]],
        );
        let plain = PreprocessPlan {
            standardize: false,
            ..PreprocessPlan::default()
        };
        let x = fit_preprocessor(&d, &plain).unwrap().transform(&d).unwrap();
        assert_eq!(x.column(0), vec![0.0, 10.0, 5.0]);
    }

    #[test]
    fn winsorize_clips_extremes() {
        let rows = (0..11)
            .map(|i| vec![num(if i == 10 { 1000.0 } else { i as f64 })])
            .collect();
        let d = ds(vec![ColumnSpec::feature("A", ColumnKind::Numeric)], rows);
        let plan = PreprocessPlan {
            standardize: false,
            winsorize: Some((0.0, 0.9)),
            ..PreprocessPlan::default()
        };
        let x = fit_preprocessor(&d, &plan).unwrap().transform(&d).unwrap();
        assert_eq!(x[(10, 0)], 9.0);
    }

    fn random_dataset(values: &[(f64, Option<u8>)]) -> Dataset {
        ds(
            vec![
                ColumnSpec::feature("N", ColumnKind::Numeric),
                ColumnSpec::feature("C", ColumnKind::Categorical),
            ],
            values
                .iter()
                .map(|(x, c)| {
                    vec![
                        if *x > 50.0 { Cell::Missing } else { num(*x) },
                        match c {
                            Some(c) => text(&format!("k{c}")),
                            None => Cell::Missing,
                        },
                    ]
                })
                .collect(),
        )
    }

    proptest! {
        #[test]
        fn transform_is_finite_and_standardized(
            values in proptest::collection::vec((-60.0f64..60.0, proptest::option::of(0u8..4)), 3..60)
        ) {
            let d = random_dataset(&values);
            if let Ok(fp) = fit_preprocessor(&d, &PreprocessPlan::default()) {
                let x = fp.transform(&d).unwrap();
                prop_assert!(x.is_finite());
                for j in 0..x.cols() {
                    let col = x.column(j);
                    let n = col.len() as f64;
                    let mu = col.iter().sum::<f64>() / n;
                    let sd = (col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n).sqrt();
                    prop_assert!(mu.abs() < 1e-9);
                    prop_assert!((sd - 1.0).abs() < 1e-9);
                }
                let again = fit_preprocessor(&d, &PreprocessPlan::default()).unwrap();
                prop_assert_eq!(again, fp);
            }
        }

        #[test]
        fn higher_threshold_drops_fewer(
            missing in proptest::collection::vec(0usize..=20, 1..6),
            t1 in 1.0f64..100.0,
            t2 in 1.0f64..100.0,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let cols: Vec<ColumnSpec> = (0..missing.len())
                .map(|j| ColumnSpec::feature(&format!("F{j}"), ColumnKind::Numeric))
                .chain(core::iter::once(ColumnSpec::feature("FULL", ColumnKind::Numeric)))
                .collect();
            let rows = (0..20)
                .map(|i| {
                    missing
                        .iter()
                        .map(|&m| if i < m { Cell::Missing } else { num(i as f64) })
                        .chain(core::iter::once(num(i as f64)))
                        .collect()
                })
                .collect();
            let d = ds(cols, rows);
            let run = |t: f64| {
                let plan = PreprocessPlan { drop_missing_threshold_pct: t, ..PreprocessPlan::default() };
                drop_high_missing(&d, &plan).unwrap()
            };
            let (kept_lo, dropped_lo) = run(lo);
            let (_, dropped_hi) = run(hi);
            prop_assert!(dropped_hi.iter().all(|c| dropped_lo.contains(c)));
            let mut all: Vec<String> = kept_lo.feature_columns().map(|(_, c)| c.name.clone()).collect();
            all.extend(dropped_lo);
            all.sort();
            let mut input: Vec<String> = d.feature_columns().map(|(_, c)| c.name.clone()).collect();
            input.sort();
            prop_assert_eq!(all, input);
        }
    }
}
