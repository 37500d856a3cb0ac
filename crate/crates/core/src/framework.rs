//! Per-row-type pipelines: training, routed prediction, grid search and
//! monitoring.
//!
//! Every row type found in the data gets its own preprocessor, optional PCA,
//! class rebalancing and classifier. Seeds fan out from one master seed by
//! row-type id, so a type's pipeline does not depend on which other types
//! exist or on the order they are trained in.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::augmentation::{augment, AugmentSpec};
use crate::dataset::{stratified_split_indices, Cell, ClassCodeMap, Dataset, LabelPolicy, RowType, SplitSpec, TypedPartition};
use crate::decomposition::{fit_pca, select_components, ComponentPolicy, PcaModel};
use crate::learners::{self, Classifier, ModelSpec, TrainedModel};
use crate::metrics::{build_report, evaluate, Evaluation, Metric, MetricsReport};
use crate::preprocess::{drop_high_missing, drop_inapplicable, fit_preprocessor, FittedPreprocessor, PreprocessPlan};
use crate::rng;
use crate::{Error, Matrix, Result};

/// Name of the fallback section in `row_types`.
pub const DEFAULT_SECTION: &str = "default";

/// Grid axis that tunes the number of PCA components instead of a model field.
pub const PCA_AXIS: &str = "pca_components";

/// Pipeline settings for one row type.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeConfig {
    #[serde(default)]
    pub preprocess: PreprocessPlan,
    /// PCA is skipped when absent.
    #[serde(default)]
    pub pca: Option<ComponentPolicy>,
    #[serde(default)]
    pub augment: AugmentSpec,
    #[serde(default)]
    pub model: ModelSpec,
    /// Grid search on the training split before the final fit.
    #[serde(default)]
    pub tuning: Option<TuningSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub label_policy: LabelPolicy,
    /// Display names for original class codes.
    #[serde(default)]
    pub class_names: BTreeMap<u32, String>,
    /// Sections keyed by row-type id. A named section replaces `default`
    /// entirely; fields are not merged.
    #[serde(default = "default_sections")]
    pub row_types: BTreeMap<String, TypeConfig>,
}

fn default_sections() -> BTreeMap<String, TypeConfig> {
    let mut m = BTreeMap::new();
    m.insert(DEFAULT_SECTION.into(), TypeConfig::default());
    m
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            split: SplitSpec::default(),
            label_policy: LabelPolicy::default(),
            class_names: BTreeMap::new(),
            row_types: default_sections(),
        }
    }
}

impl PipelineConfig {
    /// Config with a single default section.
    pub fn uniform(section: TypeConfig) -> Self {
        let mut c = PipelineConfig::default();
        c.row_types.insert(DEFAULT_SECTION.into(), section);
        c
    }

    pub fn for_type(&self, r: &RowType) -> Result<&TypeConfig> {
        self.row_types
            .get(r.as_str())
            .or_else(|| self.row_types.get(DEFAULT_SECTION))
            .ok_or_else(|| Error::InvalidParameter(format!("no config section for row type `{r}` and no default")))
    }

    pub fn validate(&self) -> Result<()> {
        self.label_policy.validate()?;
        for (name, section) in &self.row_types {
            let ctx = |e: Error| e.in_row_type(name);
            section.preprocess.validate().map_err(ctx)?;
            section.model.validate().map_err(ctx)?;
            if let Some(t) = &section.tuning {
                t.validate().map_err(ctx)?;
            }
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical JSON form.
    pub fn fingerprint(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        rng::fnv1a(&bytes)
    }

    /// Per-type seed derived from the master seed and the row-type id.
    pub fn type_seed(&self, r: &RowType) -> u64 {
        rng::derive_seed(self.seed, r.as_str())
    }
}

/// Everything needed to score rows of one type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeEntry {
    pub preprocessor: FittedPreprocessor,
    pub pca: Option<PcaModel>,
    pub model: TrainedModel,
    pub code_map: ClassCodeMap,
    pub model_name: String,
}

impl TypeEntry {
    /// Model input matrix for rows of this type.
    pub fn transform(&self, d: &Dataset) -> Result<Matrix> {
        let x = self.preprocessor.transform(d)?;
        match &self.pca {
            Some(p) => p.project(&x),
            None => Ok(x),
        }
    }

    /// Names of the model's input features.
    pub fn feature_names(&self) -> Vec<String> {
        match &self.pca {
            Some(p) => (1..=p.n_kept).map(|i| format!("PC{i}")).collect(),
            None => self.preprocessor.feature_names.clone(),
        }
    }

    /// Class scores with one column per internal code `1..=K`. Classes the
    /// model never saw score 0.
    pub fn scores(&self, x: &Matrix) -> Result<Matrix> {
        align_scores(&self.model, x, self.code_map.n_classes())
    }

    /// Predicted internal codes.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u32>> {
        self.model.predict(x)
    }
}

fn align_scores(model: &TrainedModel, x: &Matrix, k: usize) -> Result<Matrix> {
    let p = model.predict_proba(x)?;
    let classes = model.classes();
    if classes.len() == k {
        return Ok(p);
    }
    let mut out = Matrix::zeros(p.rows(), k);
    for i in 0..p.rows() {
        for (c, &code) in classes.iter().enumerate() {
            out[(i, code as usize - 1)] = p[(i, c)];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtdpaModel {
    pub registry: BTreeMap<RowType, TypeEntry>,
    pub config_fingerprint: u64,
    /// Seconds since the Unix epoch; set by the caller.
    pub created_unix: i64,
}

impl RtdpaModel {
    /// FNV-1a hash of the registry's canonical JSON form.
    pub fn fingerprint(&self) -> u64 {
        let bytes = serde_json::to_vec(&self.registry).expect("registry serializes");
        rng::fnv1a(&bytes)
    }

    pub fn entry(&self, r: &RowType) -> Result<&TypeEntry> {
        self.registry
            .get(r)
            .ok_or_else(|| Error::UnknownRowType(r.as_str().into()))
    }
}

/// Source-row indices consumed by each stage of one type's pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub preprocess: Vec<usize>,
    pub pca: Vec<usize>,
    pub tuning: Vec<usize>,
    pub augment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeDiagnostics {
    pub stages: StageIndices,
    pub dropped_columns: Vec<String>,
    pub n_synthetic: usize,
    pub test: Evaluation,
    pub tuning: Option<GridResult>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: RtdpaModel,
    pub reports: BTreeMap<RowType, MetricsReport>,
    pub diagnostics: BTreeMap<RowType, TypeDiagnostics>,
    /// Row types whose pipeline failed.
    pub failures: BTreeMap<RowType, Error>,
}

/// Seconds from an arbitrary origin, used to time model fits.
pub type Clock<'a> = &'a dyn Fn() -> f64;

/// Trains one pipeline per row type. A failing type is recorded in
/// `failures`; the call fails only when no type succeeds.
pub fn train_all(d: &Dataset, config: &PipelineConfig, clock: Option<Clock<'_>>) -> Result<TrainOutcome> {
    config.validate()?;
    if d.target_column().is_none() {
        return Err(Error::Schema("training data needs a target column".into()));
    }
    let parts = crate::dataset::partition_indices(d)?;
    for r in parts.keys() {
        config.for_type(r)?;
    }
    let mut registry = BTreeMap::new();
    let mut reports = BTreeMap::new();
    let mut diagnostics = BTreeMap::new();
    let mut failures = BTreeMap::new();
    for (r, rows) in parts {
        match train_type(d, &r, &rows, config, clock) {
            Ok((entry, report, diag)) => {
                registry.insert(r.clone(), entry);
                reports.insert(r.clone(), report);
                diagnostics.insert(r, diag);
            }
            Err(e) => {
                failures.insert(r.clone(), e.in_row_type(r.as_str()));
            }
        }
    }
    if registry.is_empty() {
        return Err(failures
            .into_values()
            .next()
            .unwrap_or_else(|| Error::InsufficientData("no row types".into())));
    }
    Ok(TrainOutcome {
        model: RtdpaModel { registry, config_fingerprint: config.fingerprint(), created_unix: 0 },
        reports,
        diagnostics,
        failures,
    })
}

fn train_type(
    d: &Dataset,
    r: &RowType,
    rows: &[usize],
    config: &PipelineConfig,
    clock: Option<Clock<'_>>,
) -> Result<(TypeEntry, MetricsReport, TypeDiagnostics)> {
    let section = config.for_type(r)?;
    let type_seed = config.type_seed(r);
    let sub = d.select_rows(rows);
    let originals = sub.labels()?;
    let mut code_map = config.label_policy.fit(&originals)?;
    code_map.names = config.class_names.clone();
    let targets = code_map.encode_all(&originals)?;

    let split = SplitSpec { seed: config.split.seed ^ rng::derive_seed(type_seed, "split"), ..config.split };
    let (train, test) = stratified_split_indices(&targets, &split)?;
    let to_source = |idx: &[usize]| -> Vec<usize> { idx.iter().map(|&i| rows[i]).collect() };

    let sub = drop_inapplicable(&sub, r, &section.preprocess.drop_columns)?;
    let train_d = sub.select_rows(&train);
    let test_d = sub.select_rows(&test);
    let (train_d, dropped_columns) = drop_high_missing(&train_d, &section.preprocess)?;
    let preprocessor = fit_preprocessor(&train_d, &section.preprocess)?;
    let x_train = preprocessor.transform(&train_d)?;
    let x_test = preprocessor.transform(&test_d)?;
    let y_train: Vec<u32> = train.iter().map(|&i| targets[i]).collect();
    let y_test: Vec<u32> = test.iter().map(|&i| targets[i]).collect();

    let mut warnings = Vec::new();
    let mut model_spec = section.model.clone();
    let mut pca_policy = section.pca;
    let mut stages = StageIndices {
        train: to_source(&train),
        test: to_source(&test),
        preprocess: to_source(&train),
        ..StageIndices::default()
    };
    let tuning = match &section.tuning {
        Some(spec) => {
            let part = TypedPartition {
                row_type: r.clone(),
                features: x_train.clone(),
                targets: y_train.clone(),
                feature_names: preprocessor.feature_names.clone(),
                code_map: code_map.clone(),
            };
            let result = grid_search(&part, &section.model, spec, rng::derive_seed(type_seed, "tuning"))?;
            model_spec = result.best_spec.clone();
            if let Some(choice) = result.best_pca {
                pca_policy = choice.map(ComponentPolicy::FixedCount);
            }
            warnings.extend(result.warnings.iter().cloned());
            stages.tuning = to_source(&train);
            Some(result)
        }
        None => None,
    };

    let (pca, x_train, x_test) = match pca_policy {
        Some(policy) => {
            let full = fit_pca(&x_train)?;
            let p = select_components(&full, policy)?;
            stages.pca = to_source(&train);
            let (a, b) = (p.project(&x_train)?, p.project(&x_test)?);
            (Some(p), a, b)
        }
        None => (None, x_train, x_test),
    };

    let aug_spec = AugmentSpec { seed: section.augment.seed ^ rng::derive_seed(type_seed, "augment"), ..section.augment };
    let aug = augment(&x_train, &y_train, &aug_spec)?;
    stages.augment = to_source(&train);
    warnings.extend(aug.warnings.iter().cloned());

    let start = clock.map(|c| c());
    let model = learners::train(&model_spec, &aug.x, &aug.y, rng::derive_seed(type_seed, "model"))?;
    let elapsed = match (clock, start) {
        (Some(c), Some(s)) => Some(c() - s),
        _ => None,
    };
    warnings.extend(model.warnings());

    let train_pred = model.predict(&x_train)?;
    let train_accuracy =
        train_pred.iter().zip(&y_train).filter(|(a, b)| a == b).count() as f64 / y_train.len() as f64;
    let scores = align_scores(&model, &x_test, code_map.n_classes())?;
    let pred = model.predict(&x_test)?;
    let eval = evaluate(&y_test, &pred, &scores, &code_map.internal_codes())?;
    let model_name = model_spec.display_name();
    let report = build_report(&model_name, r.as_str(), train_accuracy, &eval, elapsed);
    let entry = TypeEntry { preprocessor, pca, model, code_map, model_name };
    let diag = TypeDiagnostics {
        stages,
        dropped_columns,
        n_synthetic: aug.n_synthetic(),
        test: eval,
        tuning,
        warnings,
    };
    Ok((entry, report, diag))
}

/// What to do with rows whose type has no model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    #[default]
    FailFast,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RoutedRow {
    Routed {
        row_type: RowType,
        /// Original class code.
        label: u32,
        /// Original class codes in score order.
        classes: Vec<u32>,
        scores: Vec<f64>,
    },
    Unrouted {
        row_type: Option<String>,
        reason: String,
    },
}

impl RoutedRow {
    pub fn label(&self) -> Option<u32> {
        match self {
            RoutedRow::Routed { label, .. } => Some(*label),
            RoutedRow::Unrouted { .. } => None,
        }
    }
}

fn row_type_of(d: &Dataset, i: usize) -> Option<String> {
    match d.cell(i, d.row_type_column()) {
        Cell::Missing => None,
        c => c.as_text().filter(|s| !s.is_empty()),
    }
}

/// Scores every row with its type's model. Output order matches input order.
pub fn route_predict(m: &RtdpaModel, rows: &Dataset, policy: UnknownPolicy) -> Result<Vec<RoutedRow>> {
    let mut out: Vec<Option<RoutedRow>> = vec![None; rows.n_rows()];
    let mut groups: BTreeMap<RowType, Vec<usize>> = BTreeMap::new();
    for i in 0..rows.n_rows() {
        let unrouted = match row_type_of(rows, i) {
            None => Some((None, Error::MissingRowType { row: i })),
            Some(t) => {
                let r = RowType::new(&t)?;
                if m.registry.contains_key(&r) {
                    groups.entry(r).or_default().push(i);
                    None
                } else {
                    Some((Some(t.clone()), Error::UnknownRowType(t)))
                }
            }
        };
        if let Some((row_type, err)) = unrouted {
            if policy == UnknownPolicy::FailFast {
                return Err(err);
            }
            out[i] = Some(RoutedRow::Unrouted { row_type, reason: err.to_string() });
        }
    }
    for (r, idx) in groups {
        let entry = &m.registry[&r];
        let x = entry.transform(&rows.select_rows(&idx)).map_err(|e| e.in_row_type(r.as_str()))?;
        let scores = entry.scores(&x)?;
        let pred = entry.predict(&x)?;
        let classes: Vec<u32> = entry.code_map.codes.clone();
        for (k, &i) in idx.iter().enumerate() {
            out[i] = Some(RoutedRow::Routed {
                row_type: r.clone(),
                label: entry.code_map.decode(pred[k]),
                classes: classes.clone(),
                scores: scores.row(k).to_vec(),
            });
        }
    }
    Ok(out.into_iter().map(|o| o.expect("every row is routed or recorded")).collect())
}

/// One hyperparameter axis: a model field (or [`PCA_AXIS`]) and its candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub param: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    pub grid: Vec<GridAxis>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_metric")]
    pub metric: Metric,
}

fn default_folds() -> usize {
    5
}

fn default_metric() -> Metric {
    Metric::F1
}

impl TuningSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.grid.iter().any(|a| a.values.is_empty()) {
            return Err(Error::InvalidParameter("tuning grid must have at least one value per axis".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidParameter("cv_folds must be >= 2".into()));
        }
        if matches!(self.metric, Metric::RunningTime | Metric::TrainAccuracy) {
            return Err(Error::InvalidParameter(format!("{} cannot select a model", self.metric.label())));
        }
        let mut seen = BTreeSet::new();
        for a in &self.grid {
            if !seen.insert(a.param.as_str()) {
                return Err(Error::InvalidParameter(format!("grid axis `{}` listed twice", a.param)));
            }
        }
        Ok(())
    }

    /// Grid points in listing order, first axis slowest.
    pub fn points(&self) -> Vec<Vec<(String, Value)>> {
        let mut out = vec![Vec::new()];
        for axis in &self.grid {
            let mut next = Vec::with_capacity(out.len() * axis.values.len());
            for prefix in &out {
                for v in &axis.values {
                    let mut p: Vec<(String, Value)> = prefix.clone();
                    p.push((axis.param.clone(), v.clone()));
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub params: Vec<(String, Value)>,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    /// Axes whose value differs from the base spec.
    pub n_overrides: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_index: usize,
    pub best_spec: ModelSpec,
    /// `Some(None)` selects no PCA, `Some(Some(k))` keeps `k` components.
    pub best_pca: Option<Option<usize>>,
    pub table: Vec<CvRow>,
    pub warnings: Vec<String>,
}

/// Applies grid values to a base spec through its JSON form, so unknown
/// field names are rejected exactly as in a config file.
pub fn patch_spec(base: &ModelSpec, params: &[(String, Value)]) -> Result<(ModelSpec, Option<Option<usize>>, usize)> {
    let mut json = serde_json::to_value(base).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let obj = json.as_object_mut().expect("model spec is a JSON object");
    let mut pca = None;
    let mut overrides = 0;
    for (name, value) in params {
        if name == PCA_AXIS {
            pca = Some(match value {
                Value::Null => None,
                v => Some(v.as_u64().filter(|&k| k >= 1).ok_or_else(|| {
                    Error::InvalidParameter(format!("{PCA_AXIS} must be a positive integer or null, got {v}"))
                })? as usize),
            });
            overrides += usize::from(value != &Value::Null);
            continue;
        }
        if name == "family" {
            return Err(Error::InvalidParameter("the model family cannot be a grid axis".into()));
        }
        if obj.get(name) != Some(value) {
            overrides += 1;
        }
        obj.insert(name.clone(), value.clone());
    }
    let spec: ModelSpec = serde_json::from_value(json).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    spec.validate()?;
    Ok((spec, pca, overrides))
}

/// Fold number of each row. Rows of each class are shuffled and dealt
/// round-robin, continuing the rotation across classes so fold sizes differ
/// by at most one.
pub fn stratified_folds(labels: &[u32], k: usize, seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut r = rng::seeded(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for (_, mut members) in by_class {
        members.shuffle(&mut r);
        for i in members {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

/// Stratified k-fold cross-validation over every grid point, using only the
/// rows of `p`. The best mean score wins; ties go to the point with the
/// fewest values that differ from `base`, then to the first listed.
pub fn grid_search(p: &TypedPartition, base: &ModelSpec, spec: &TuningSpec, seed: u64) -> Result<GridResult> {
    spec.validate()?;
    let n = p.n_rows();
    if n < spec.cv_folds {
        return Err(Error::InsufficientData(format!("{n} rows for {} folds", spec.cv_folds)));
    }
    let folds = stratified_folds(&p.targets, spec.cv_folds, seed);
    let classes = p.code_map.internal_codes();
    let mut warnings = Vec::new();
    for f in 0..spec.cv_folds {
        let present: BTreeSet<u32> = (0..n).filter(|&i| folds[i] != f).map(|i| p.targets[i]).collect();
        if present.len() < BTreeSet::from_iter(p.targets.iter().copied()).len() {
            warnings.push(format!("fold {f}: a class is missing from the training folds"));
        }
    }
    let points = spec.points();
    let mut table = Vec::with_capacity(points.len());
    let mut patched = Vec::with_capacity(points.len());
    for (pi, params) in points.into_iter().enumerate() {
        let (model_spec, pca, n_overrides) = patch_spec(base, &params)?;
        let mut fold_scores = Vec::with_capacity(spec.cv_folds);
        for f in 0..spec.cv_folds {
            let tr: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let te: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let mut x_tr = p.features.select_rows(&tr);
            let mut x_te = p.features.select_rows(&te);
            if let Some(Some(k)) = pca {
                let fitted = select_components(&fit_pca(&x_tr)?, ComponentPolicy::FixedCount(k))?;
                x_tr = fitted.project(&x_tr)?;
                x_te = fitted.project(&x_te)?;
            }
            let y_tr: Vec<u32> = tr.iter().map(|&i| p.targets[i]).collect();
            let y_te: Vec<u32> = te.iter().map(|&i| p.targets[i]).collect();
            let fold_seed = rng::derive_indexed(rng::derive_indexed(seed, pi as u64), f as u64);
            let model = learners::train(&model_spec, &x_tr, &y_tr, fold_seed)?;
            let scores = align_scores(&model, &x_te, classes.len())?;
            let pred = model.predict(&x_te)?;
            let eval = evaluate(&y_te, &pred, &scores, &classes)?;
            match spec.metric.of_evaluation(&eval) {
                Some(v) => fold_scores.push(v),
                None => warnings.push(format!("point {pi}, fold {f}: {} undefined", spec.metric.label())),
            }
        }
        let mean = if fold_scores.is_empty() {
            f64::NAN
        } else {
            fold_scores.iter().sum::<f64>() / fold_scores.len() as f64
        };
        table.push(CvRow { params, fold_scores, mean, n_overrides });
        patched.push((model_spec, pca));
    }
    let mut best: Option<usize> = None;
    for (i, row) in table.iter().enumerate() {
        if row.mean.is_nan() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let incumbent = &table[b];
                row.mean > incumbent.mean || (row.mean == incumbent.mean && row.n_overrides < incumbent.n_overrides)
            }
        };
        if better {
            best = Some(i);
        }
    }
    let best_index = best.ok_or_else(|| Error::InsufficientData("no grid point produced a score".into()))?;
    let (best_spec, best_pca) = patched.swap_remove(best_index);
    Ok(GridResult { best_index, best_spec, best_pca, table, warnings })
}

/// Reference scores and allowed drops per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorBaseline {
    pub reports: BTreeMap<RowType, MetricsReport>,
    pub thresholds: BTreeMap<Metric, f64>,
}

impl MonitorBaseline {
    /// Baseline with the same threshold for every test-set metric.
    pub fn uniform(reports: BTreeMap<RowType, MetricsReport>, threshold: f64) -> Self {
        let thresholds = Metric::ALL
            .into_iter()
            .filter(|m| monitored(*m))
            .map(|m| (m, threshold))
            .collect();
        MonitorBaseline { reports, thresholds }
    }

    pub fn validate(&self) -> Result<()> {
        for (m, &t) in &self.thresholds {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter(format!("threshold for {} must be >= 0", m.label())));
            }
        }
        Ok(())
    }
}

fn monitored(m: Metric) -> bool {
    !matches!(m, Metric::TrainAccuracy | Metric::RunningTime)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFlag {
    pub metric: Metric,
    pub baseline: f64,
    pub current: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TypeDrift {
    NoData,
    Evaluated {
        n_rows: usize,
        evaluation: Evaluation,
        flags: Vec<DriftFlag>,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub types: BTreeMap<RowType, TypeDrift>,
    /// Fresh rows whose type has no model.
    pub unregistered_rows: usize,
}

impl DriftReport {
    pub fn n_flags(&self) -> usize {
        self.types
            .values()
            .map(|t| match t {
                TypeDrift::Evaluated { flags, .. } => flags.len(),
                _ => 0,
            })
            .sum()
    }
}

/// Scores fresh labeled rows per type and flags every metric that fell
/// below `baseline − threshold`. Never retrains.
pub fn monitor(m: &RtdpaModel, baseline: &MonitorBaseline, fresh: &Dataset) -> Result<DriftReport> {
    baseline.validate()?;
    if fresh.target_column().is_none() {
        return Err(Error::Schema("monitoring data needs a target column".into()));
    }
    let mut groups: BTreeMap<RowType, Vec<usize>> = BTreeMap::new();
    let mut unregistered_rows = 0;
    for i in 0..fresh.n_rows() {
        match row_type_of(fresh, i) {
            Some(t) => {
                let r = RowType::new(&t)?;
                if m.registry.contains_key(&r) {
                    groups.entry(r).or_default().push(i);
                } else {
                    unregistered_rows += 1;
                }
            }
            None => unregistered_rows += 1,
        }
    }
    let mut types = BTreeMap::new();
    for (r, entry) in &m.registry {
        let status = match groups.get(r) {
            None => TypeDrift::NoData,
            Some(idx) => match score_fresh(entry, &fresh.select_rows(idx)) {
                Ok(evaluation) => {
                    let flags = drift_flags(baseline.reports.get(r), &baseline.thresholds, &evaluation);
                    TypeDrift::Evaluated { n_rows: idx.len(), evaluation, flags }
                }
                Err(e) => TypeDrift::Failed { reason: e.to_string() },
            },
        };
        types.insert(r.clone(), status);
    }
    Ok(DriftReport { types, unregistered_rows })
}

fn score_fresh(entry: &TypeEntry, d: &Dataset) -> Result<Evaluation> {
    let y = entry.code_map.encode_all(&d.labels()?)?;
    let x = entry.transform(d)?;
    let scores = entry.scores(&x)?;
    let pred = entry.predict(&x)?;
    evaluate(&y, &pred, &scores, &entry.code_map.internal_codes())
}

fn drift_flags(report: Option<&MetricsReport>, thresholds: &BTreeMap<Metric, f64>, e: &Evaluation) -> Vec<DriftFlag> {
    let Some(report) = report else { return Vec::new() };
    let mut flags = Vec::new();
    for (&metric, &threshold) in thresholds {
        if !monitored(metric) {
            continue;
        }
        let (Some(baseline), Some(current)) = (metric.of(report), metric.of_evaluation(e)) else { continue };
        if current < baseline - threshold {
            flags.push(DriftFlag { metric, baseline, current, threshold });
        }
    }
    flags
}
