//! Command-line surface. Every command returns the text it prints so the
//! same code paths are testable without a process boundary.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rtdpa_core::dataset::{partition_indices, Cell, ColumnKind, Dataset, RowType};
use rtdpa_core::framework::{self, MonitorBaseline, PipelineConfig, RoutedRow, TypeDrift, UnknownPolicy};
use rtdpa_core::learners::TrainedModel;
use rtdpa_core::metrics::{build_report, evaluate, MetricsReport};
use rtdpa_core::preprocess::missing_value_report;
use serde::Serialize;

use crate::error::{AppError, AppResult};
use crate::io::{self, Schema};
use crate::model_file::{self, ModelFile};
use crate::report;
use crate::synth::{self, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "rtdpa", version, about = "Row-type dependent predictive analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Class counts per row type and missing-value tables.
    Inspect(InspectArgs),
    /// Train one pipeline per row type and write a model file.
    Train(TrainArgs),
    /// Score labeled data with one or more model files.
    Evaluate(EvaluateArgs),
    /// Route rows to their type's model and write predictions as CSV.
    Predict(PredictArgs),
    /// Write the synthetic row-typed benchmark with its schema, config and ground truth.
    GenSynth(GenSynthArgs),
    /// Compare fresh labeled data against the scores stored at training time.
    Monitor(MonitorArgs),
    /// Print the decision tree trained for a row type.
    ExportTree(ExportTreeArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Pipeline config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub json: bool,
    /// Leave running times out of the report.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Model file; repeat to compare several.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit rows of unknown type with status `unrouted` instead of failing.
    #[arg(long)]
    pub skip_unknown: bool,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// CSV path; schema, config and sidecar files are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator spec as JSON; the built-in two-type spec when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rows per row type.
    #[arg(long)]
    pub rows: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Allowed drop below the stored score for every metric.
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeFormat {
    Text,
    Dot,
}

#[derive(Debug, Args)]
pub struct ExportTreeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub row_type: String,
    #[arg(long, value_enum, default_value_t = TreeFormat::Text)]
    pub format: TreeFormat,
}

pub fn run(cli: Cli) -> AppResult<String> {
    match cli.command {
        Command::Inspect(a) => cmd_inspect(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::GenSynth(a) => cmd_gen_synth(&a),
        Command::Monitor(a) => cmd_monitor(&a),
        Command::ExportTree(a) => cmd_export_tree(&a),
    }
}

fn load_labeled(a: &DataArgs) -> AppResult<(Schema, Dataset)> {
    let schema = io::load_schema(&a.schema)?;
    let d = io::load_csv(&a.data, &schema)?;
    Ok((schema, d))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

#[derive(Debug, Serialize)]
struct InspectJson {
    n_rows: usize,
    class_counts: BTreeMap<String, BTreeMap<u32, usize>>,
    missing: BTreeMap<String, rtdpa_core::preprocess::MissingReport>,
}

pub fn cmd_inspect(a: &InspectArgs) -> AppResult<String> {
    let schema = io::load_schema(&a.input.schema)?;
    let d = io::load_csv_unlabeled(&a.input.data, &schema)?;
    let parts = partition_indices(&d)?;
    let labels = d.target_column().map(|_| d.labels()).transpose()?;
    let mut class_counts = BTreeMap::new();
    let mut missing = BTreeMap::new();
    for (r, idx) in &parts {
        let mut counts = BTreeMap::new();
        if let Some(labels) = &labels {
            for &i in idx {
                *counts.entry(labels[i]).or_insert(0) += 1;
            }
        }
        class_counts.insert(r.to_string(), counts);
        missing.insert(r.to_string(), missing_value_report(&d.select_rows(idx)));
    }
    if a.json {
        return Ok(to_json(&InspectJson { n_rows: d.n_rows(), class_counts, missing }));
    }
    let mut out = format!("Rows: {}\n\nClass Counts by Row Type\n", d.n_rows());
    out.push_str(&report::render_class_counts(&class_counts, &schema.class_names));
    for (r, m) in &missing {
        out.push('\n');
        out.push_str(&report::render_missing(r, m));
    }
    Ok(out)
}

fn load_config(path: Option<&Path>, schema: &Schema) -> AppResult<PipelineConfig> {
    let mut config = match path {
        Some(p) => {
            let c: PipelineConfig = io::read_json(p)?;
            c.validate().map_err(|e| AppError::parse(p, e))?;
            c
        }
        None => PipelineConfig::default(),
    };
    if config.class_names.is_empty() {
        config.class_names = schema.class_names.clone();
    }
    Ok(config)
}

pub fn cmd_train(a: &TrainArgs) -> AppResult<String> {
    let (schema, d) = load_labeled(&a.input)?;
    let mut config = load_config(a.config.as_deref(), &schema)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let start = Instant::now();
    let clock = move || start.elapsed().as_secs_f64();
    let outcome = framework::train_all(&d, &config, if a.no_timing { None } else { Some(&clock) })?;
    for (r, diag) in &outcome.diagnostics {
        for w in &diag.warnings {
            log::warn!("{r}: {w}");
        }
        if !diag.dropped_columns.is_empty() {
            log::info!("{r}: dropped {}", diag.dropped_columns.join(", "));
        }
    }
    let mut model = outcome.model;
    model.created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|t| t.as_secs() as i64)
        .unwrap_or(0);
    let file = ModelFile { model, reports: outcome.reports.clone() };
    model_file::save(&file, &a.out)?;
    let reports: Vec<MetricsReport> = outcome.reports.into_values().collect();
    let mut out = if a.json { report::json_lines(&reports) } else { report::render_reports(&reports) };
    for (r, e) in &outcome.failures {
        log::error!("{r}: {e}");
        if !a.json {
            out.push_str(&format!("row type `{r}` failed: {e}\n"));
        }
    }
    Ok(out)
}

/// Metrics of every model on the rows of each of its row types. Train
/// accuracy and running time come from the stored training reports.
pub fn evaluate_models(models: &[(String, ModelFile)], d: &Dataset) -> AppResult<Vec<MetricsReport>> {
    if d.target_column().is_none() {
        return Err(AppError::Input("evaluation data needs a target column".into()));
    }
    let parts = partition_indices(d)?;
    let mut reports = Vec::new();
    for (r, idx) in &parts {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (source, mf) in models {
            let Some(entry) = mf.model.registry.get(r) else {
                log::warn!("{source}: no model for row type `{r}`");
                continue;
            };
            let rows = d.select_rows(idx);
            let y = entry.code_map.encode_all(&rows.labels()?)?;
            let x = entry.transform(&rows)?;
            let eval = evaluate(&y, &entry.predict(&x)?, &entry.scores(&x)?, &entry.code_map.internal_codes())?;
            let stored = mf.reports.get(r);
            let n = seen.entry(entry.model_name.clone()).or_insert(0);
            *n += 1;
            let name = if *n == 1 { entry.model_name.clone() } else { format!("{} #{n}", entry.model_name) };
            reports.push(build_report(
                &name,
                r.as_str(),
                stored.map_or(f64::NAN, |s| s.train_accuracy),
                &eval,
                stored.and_then(|s| s.running_time_seconds),
            ));
        }
    }
    Ok(reports)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> AppResult<String> {
    let (_, d) = load_labeled(&a.input)?;
    let models = a
        .model
        .iter()
        .map(|p| Ok((p.display().to_string(), model_file::load(p)?)))
        .collect::<AppResult<Vec<_>>>()?;
    let reports = evaluate_models(&models, &d)?;
    if reports.is_empty() {
        return Err(AppError::Input("no row type in the data has a model".into()));
    }
    Ok(if a.json { report::json_lines(&reports) } else { report::render_reports(&reports) })
}

/// Identifier of each row: the first identifier column, else the 1-based row number.
fn row_ids(d: &Dataset) -> Vec<String> {
    let id_col = d.schema().iter().position(|c| c.kind == ColumnKind::Identifier);
    (0..d.n_rows())
        .map(|i| match id_col.map(|j| d.cell(i, j)) {
            Some(c @ (Cell::Text(_) | Cell::Number(_))) => io::cell_text(c, ""),
            _ => (i + 1).to_string(),
        })
        .collect()
}

pub fn predictions_csv(m: &ModelFile, d: &Dataset, policy: UnknownPolicy) -> AppResult<Vec<u8>> {
    let routed = framework::route_predict(&m.model, d, policy)?;
    let codes: BTreeSet<u32> = m.model.registry.values().flat_map(|e| e.code_map.codes.iter().copied()).collect();
    let codes: Vec<u32> = codes.into_iter().collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row_id".to_string(), "row_type".into(), "status".into(), "predicted".into()];
    header.extend(codes.iter().map(|c| format!("p_{c}")));
    let csv_err = |e: csv::Error| AppError::Internal(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (id, row) in row_ids(d).into_iter().zip(&routed) {
        let mut rec = vec![id];
        match row {
            RoutedRow::Routed { row_type, label, classes, scores } => {
                rec.extend([row_type.to_string(), "routed".into(), label.to_string()]);
                for c in &codes {
                    let p = classes.iter().position(|k| k == c).map_or(0.0, |j| scores[j]);
                    rec.push(format!("{p}"));
                }
            }
            RoutedRow::Unrouted { row_type, .. } => {
                rec.extend([row_type.clone().unwrap_or_default(), "unrouted".into(), String::new()]);
                rec.extend(codes.iter().map(|_| String::new()));
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| AppError::Internal(e.to_string()))
}

pub fn cmd_predict(a: &PredictArgs) -> AppResult<String> {
    let schema = io::load_schema(&a.input.schema)?;
    let d = io::load_csv_unlabeled(&a.input.data, &schema)?;
    let m = model_file::load(&a.model)?;
    let policy = if a.skip_unknown { UnknownPolicy::Skip } else { UnknownPolicy::FailFast };
    let bytes = predictions_csv(&m, &d, policy)?;
    match &a.out {
        Some(p) => {
            io::write_bytes(p, &bytes)?;
            Ok(format!("wrote {} predictions to {}\n", d.n_rows(), p.display()))
        }
        None => String::from_utf8(bytes).map_err(|e| AppError::Internal(e.to_string())),
    }
}

/// `<stem>.<suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn cmd_gen_synth(a: &GenSynthArgs) -> AppResult<String> {
    let mut spec: SynthSpec = match &a.spec {
        Some(p) => io::read_json(p)?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(n) = a.rows {
        for t in &mut spec.types {
            t.n_rows = n;
        }
    }
    let (d, sidecar) = synth::generate(&spec).map_err(AppError::Input)?;
    let schema = synth::schema();
    let mut csv_bytes = Vec::new();
    io::write_csv(&d, &schema.date_format, &mut csv_bytes).map_err(|e| AppError::Internal(e.to_string()))?;
    io::write_bytes(&a.out, &csv_bytes)?;
    io::write_bytes(&sibling(&a.out, "schema.json"), to_json(&schema).as_bytes())?;
    let config = synth::pipeline_config(&spec, Default::default(), spec.seed);
    io::write_bytes(&sibling(&a.out, "config.json"), to_json(&config).as_bytes())?;
    io::write_bytes(&sibling(&a.out, "sidecar.json"), (serde_json::to_string(&sidecar).expect("serializable") + "\n").as_bytes())?;
    let mut out = format!("wrote {} rows to {}\n", d.n_rows(), a.out.display());
    for (name, t) in &sidecar.types {
        out.push_str(&format!(
            "{name}: {} rows, Bayes accuracy {:.4}, Bayes macro precision {:.4}\n",
            t.n_rows, t.bayes_accuracy, t.bayes_macro_precision
        ));
    }
    Ok(out)
}

pub fn cmd_monitor(a: &MonitorArgs) -> AppResult<String> {
    let (_, d) = load_labeled(&a.input)?;
    let m = model_file::load(&a.model)?;
    let baseline = MonitorBaseline::uniform(m.reports.clone(), a.threshold);
    let drift = framework::monitor(&m.model, &baseline, &d)?;
    if a.json {
        return Ok(to_json(&drift));
    }
    let mut out = String::new();
    for (r, status) in &drift.types {
        match status {
            TypeDrift::NoData => out.push_str(&format!("{r}: no data\n")),
            TypeDrift::Failed { reason } => out.push_str(&format!("{r}: failed ({reason})\n")),
            TypeDrift::Evaluated { n_rows, flags, .. } => {
                out.push_str(&format!("{r}: {n_rows} rows, {} flags\n", flags.len()));
                for f in flags {
                    out.push_str(&format!(
                        "  {} dropped to {:.4} (baseline {:.4}, threshold {:.4})\n",
                        f.metric.label(),
                        f.current,
                        f.baseline,
                        f.threshold
                    ));
                }
            }
        }
    }
    if drift.unregistered_rows > 0 {
        out.push_str(&format!("{} rows have no registered row type\n", drift.unregistered_rows));
    }
    Ok(out)
}

pub fn cmd_export_tree(a: &ExportTreeArgs) -> AppResult<String> {
    let m = model_file::load(&a.model)?;
    let r = RowType::new(&a.row_type)?;
    let entry = m.model.entry(&r)?;
    let TrainedModel::DecisionTree(tree) = &entry.model else {
        return Err(AppError::Input(format!("row type `{r}` uses {}, not a decision tree", entry.model_name)));
    };
    let names = entry.feature_names();
    Ok(match a.format {
        TreeFormat::Text => tree.export_text(Some(&names)),
        TreeFormat::Dot => tree.export_dot(Some(&names)),
    })
}
