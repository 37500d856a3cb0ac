//! Synthetic row-typed benchmark.
//!
//! Each row type draws its label from its own pair of signal features among
//! `F1..F4`, with class means mirrored between types. The features another
//! type uses as signal are filled from that type's class mixture but carry no
//! information here, so a model that ignores the row type sees two
//! contradicting rules.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rtdpa_core::augmentation::largest_remainder;
use rtdpa_core::dataset::{Cell, ColumnKind, ColumnRole, ColumnSpec, Dataset};
use rtdpa_core::framework::{PipelineConfig, TypeConfig, DEFAULT_SECTION};
use rtdpa_core::metrics::{accuracy, confusion_matrix, precision_recall_f1};
use rtdpa_core::rng::{self, Rng};
use serde::{Deserialize, Serialize};

use crate::io::Schema;

pub const SIGNAL_COLUMNS: [&str; 4] = ["F1", "F2", "F3", "F4"];
const MAX_CLASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Labels drawn first, features from a Gaussian around the class mean.
    #[default]
    Gaussian,
    /// Features drawn from the mixture, label set to the nearest class mean.
    NearestMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthType {
    pub name: String,
    pub n_rows: usize,
    /// Class proportions for codes `1..=K`.
    pub proportions: Vec<f64>,
    /// Indices into `F1..F4` of the two features that carry the label.
    pub signal: [usize; 2],
    /// `+1` or `-1`; mirrors the class means.
    pub sign: f64,
    /// Whether the land columns apply to this type.
    #[serde(default)]
    pub has_land: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub types: Vec<SynthType>,
    /// Distance between the majority mean and each minority mean, in units of `spread`.
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "one")]
    pub spread: f64,
    /// Probability that a label is replaced by a uniformly chosen other class.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub labels: LabelRule,
    #[serde(default)]
    pub seed: u64,
}

fn default_separation() -> f64 {
    6.0
}

fn one() -> f64 {
    1.0
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            types: vec![
                SynthType {
                    name: "agriculture".into(),
                    n_rows: 5000,
                    proportions: vec![0.85, 0.04, 0.08, 0.03],
                    signal: [0, 1],
                    sign: 1.0,
                    has_land: true,
                },
                SynthType {
                    name: "personal".into(),
                    n_rows: 5000,
                    proportions: vec![0.86, 0.05, 0.05, 0.04],
                    signal: [2, 3],
                    sign: -1.0,
                    has_land: false,
                },
            ],
            separation: default_separation(),
            spread: 1.0,
            noise: 0.0,
            labels: LabelRule::Gaussian,
            seed: 0,
        }
    }
}

pub fn class_names() -> BTreeMap<u32, String> {
    ["Standard", "Sub standard", "Doubtful", "Loss", "Other"]
        .iter()
        .enumerate()
        .map(|(i, n)| (i as u32 + 1, n.to_string()))
        .collect()
}

impl SynthSpec {
    pub fn with_rows(n_rows: usize, seed: u64) -> Self {
        let mut s = SynthSpec { seed, ..SynthSpec::default() };
        for t in &mut s.types {
            t.n_rows = n_rows;
        }
        s
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.types.len() < 2 {
            return Err("at least two row types are required".into());
        }
        if !(self.separation > 0.0 && self.spread > 0.0) {
            return Err("separation and spread must be positive".into());
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(format!("noise {} is outside [0, 1)", self.noise));
        }
        for (i, t) in self.types.iter().enumerate() {
            let k = t.proportions.len();
            if !(2..=MAX_CLASSES).contains(&k) {
                return Err(format!("type `{}`: between 2 and {MAX_CLASSES} classes are supported", t.name));
            }
            if t.proportions.iter().any(|&p| !(p > 0.0)) || (t.proportions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(format!("type `{}`: proportions must be positive and sum to 1", t.name));
            }
            if t.signal[0] == t.signal[1] || t.signal.iter().any(|&f| f >= SIGNAL_COLUMNS.len()) {
                return Err(format!("type `{}`: signal must name two distinct features of F1..F4", t.name));
            }
            if t.sign.abs() != 1.0 {
                return Err(format!("type `{}`: sign must be 1 or -1", t.name));
            }
            if t.name.is_empty() || t.n_rows == 0 {
                return Err("row types need a name and at least one row".into());
            }
            for u in &self.types[..i] {
                if u.name == t.name {
                    return Err(format!("row type `{}` listed twice", t.name));
                }
                if u.signal == t.signal && u.sign == t.sign {
                    return Err(format!("types `{}` and `{}` share the same decision rule", u.name, t.name));
                }
            }
        }
        Ok(())
    }

    /// Class mean in the type's signal plane.
    fn mean(&self, t: &SynthType, class: usize) -> [f64; 2] {
        let s = self.separation * self.spread * t.sign;
        match class {
            0 => [0.0, 0.0],
            1 => [s, 0.0],
            2 => [0.0, s],
            3 => [-s, 0.0],
            _ => [0.0, -s],
        }
    }

    fn draw_point(&self, t: &SynthType, class: usize, r: &mut Rng) -> [f64; 2] {
        let m = self.mean(t, class);
        let a: f64 = r.sample(StandardNormal);
        let b: f64 = r.sample(StandardNormal);
        [m[0] + self.spread * a, m[1] + self.spread * b]
    }

    /// Bayes-optimal class for a point in the type's signal plane.
    pub fn bayes_class(&self, t: &SynthType, z: [f64; 2]) -> usize {
        let score = |c: usize| {
            let m = self.mean(t, c);
            let d2 = (z[0] - m[0]).powi(2) + (z[1] - m[1]).powi(2);
            match self.labels {
                LabelRule::Gaussian => t.proportions[c].ln() - d2 / (2.0 * self.spread * self.spread),
                LabelRule::NearestMean => -d2,
            }
        };
        (0..t.proportions.len())
            .max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a)))
            .expect("at least two classes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeTruth {
    pub n_rows: usize,
    pub class_counts: BTreeMap<u32, usize>,
    pub bayes_accuracy: f64,
    pub bayes_macro_precision: f64,
}

/// Ground truth written next to the generated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub spec: SynthSpec,
    pub types: BTreeMap<String, TypeTruth>,
    /// Bayes-optimal class code of each row, in file order.
    pub bayes_labels: Vec<u32>,
}

pub fn schema() -> Schema {
    let mut columns = vec![
        ColumnSpec::new("ID", ColumnKind::Identifier, ColumnRole::Ignored),
        ColumnSpec::new("LOANTYPE", ColumnKind::Categorical, ColumnRole::RowType),
    ];
    columns.extend(SIGNAL_COLUMNS.iter().map(|n| ColumnSpec::feature(n, ColumnKind::Numeric)));
    columns.extend([
        ColumnSpec::feature("SECTOR", ColumnKind::Categorical),
        ColumnSpec::feature("DRYLAND", ColumnKind::Numeric),
        ColumnSpec::feature("WETLAND", ColumnKind::Numeric),
        ColumnSpec::feature("OPENDT", ColumnKind::Date),
        ColumnSpec::feature("REVIEWDT", ColumnKind::Date),
        ColumnSpec::new("IRAC", ColumnKind::Numeric, ColumnRole::Target),
    ]);
    let mut s = Schema::new(columns);
    s.class_names = class_names();
    s
}

/// Pipeline config for the generated data: land columns removed for types
/// without land, everything else from `section`.
pub fn pipeline_config(spec: &SynthSpec, section: TypeConfig, seed: u64) -> PipelineConfig {
    let mut c = PipelineConfig::uniform(section.clone());
    c.seed = seed;
    c.class_names = class_names();
    for t in spec.types.iter().filter(|t| !t.has_land) {
        let mut s = section.clone();
        s.preprocess.drop_columns = vec!["DRYLAND".into(), "WETLAND".into()];
        c.row_types.insert(t.name.clone(), s);
    }
    c.row_types.entry(DEFAULT_SECTION.into()).or_insert(section);
    c
}

const SECTORS: [&str; 3] = ["AGR", "TRD", "SRV"];
const OPEN_FROM: i32 = 14610; // 2010-01-01
const REVIEW_MISSING: f64 = 0.9;

pub fn generate(spec: &SynthSpec) -> Result<(Dataset, Sidecar), String> {
    spec.validate()?;
    let mut rows: Vec<(Vec<Cell>, u32)> = Vec::new();
    for t in &spec.types {
        let mut r = rng::seeded(rng::derive_seed(spec.seed, &t.name));
        let k = t.proportions.len();
        let counts = largest_remainder(&t.proportions, t.n_rows);
        let mut classes: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        classes.shuffle(&mut r);
        for drawn in classes {
            let mut features = [0.0; 4];
            // decoys: another type's signal at a uniformly chosen class, independent of the label
            for u in spec.types.iter().filter(|u| u.signal != t.signal) {
                let decoy = r.random_range(0..u.proportions.len());
                let z = spec.draw_point(u, decoy, &mut r);
                features[u.signal[0]] = z[0];
                features[u.signal[1]] = z[1];
            }
            let (class, z) = match spec.labels {
                LabelRule::Gaussian => (drawn, spec.draw_point(t, drawn, &mut r)),
                LabelRule::NearestMean => {
                    let z = spec.draw_point(t, drawn, &mut r);
                    (spec.bayes_class(t, z), z)
                }
            };
            features[t.signal[0]] = z[0];
            features[t.signal[1]] = z[1];
            let mut label = class;
            if spec.noise > 0.0 && r.random::<f64>() < spec.noise {
                let shift = r.random_range(1..k);
                label = (class + shift) % k;
            }
            let bayes = spec.bayes_class(t, z) as u32 + 1;
            let mut cells = vec![Cell::Missing, Cell::Text(t.name.clone())];
            cells.extend(features.iter().map(|&v| Cell::Number(round6(v))));
            cells.push(Cell::Text(SECTORS[r.random_range(0..SECTORS.len())].into()));
            for _ in 0..2 {
                cells.push(if t.has_land { Cell::Number(round6(r.random_range(0.0..10.0))) } else { Cell::Missing });
            }
            let open = OPEN_FROM + r.random_range(0..3650);
            cells.push(Cell::Date(open));
            let reviewed = r.random::<f64>() >= REVIEW_MISSING;
            cells.push(if reviewed { Cell::Date(open + r.random_range(30..720)) } else { Cell::Missing });
            cells.push(Cell::Number((label + 1) as f64));
            rows.push((cells, bayes));
        }
    }
    let mut r = rng::seeded(rng::derive_seed(spec.seed, "interleave"));
    rows.shuffle(&mut r);
    let mut bayes_labels = Vec::with_capacity(rows.len());
    let mut data = Vec::with_capacity(rows.len());
    for (i, (mut cells, bayes)) in rows.into_iter().enumerate() {
        cells[0] = Cell::Text(format!("R{:06}", i + 1));
        data.push(cells);
        bayes_labels.push(bayes);
    }
    let d = Dataset::new(schema().columns, data).map_err(|e| e.to_string())?;
    let types = truth(spec, &d, &bayes_labels)?;
    Ok((d, Sidecar { spec: spec.clone(), types, bayes_labels }))
}

/// Rounds to six decimals so the CSV text is short and reads back exactly.
fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn truth(spec: &SynthSpec, d: &Dataset, bayes: &[u32]) -> Result<BTreeMap<String, TypeTruth>, String> {
    let labels = d.labels().map_err(|e| e.to_string())?;
    let types = d.row_types().map_err(|e| e.to_string())?;
    let mut out = BTreeMap::new();
    for t in &spec.types {
        let idx: Vec<usize> = (0..d.n_rows()).filter(|&i| types[i].as_str() == t.name).collect();
        let y: Vec<u32> = idx.iter().map(|&i| labels[i]).collect();
        let b: Vec<u32> = idx.iter().map(|&i| bayes[i]).collect();
        let classes: Vec<u32> = (1..=t.proportions.len() as u32).collect();
        let cm = confusion_matrix(&y, &b, &classes).map_err(|e| e.to_string())?;
        let mut class_counts = BTreeMap::new();
        for &l in &y {
            *class_counts.entry(l).or_insert(0) += 1;
        }
        out.insert(
            t.name.clone(),
            TypeTruth {
                n_rows: idx.len(),
                class_counts,
                bayes_accuracy: accuracy(&cm).map_err(|e| e.to_string())?,
                bayes_macro_precision: precision_recall_f1(&cm).precision,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_shape() {
        let (d, side) = generate(&SynthSpec::with_rows(2000, 3)).unwrap();
        assert_eq!(d.n_rows(), 4000);
        assert_eq!(side.types.len(), 2);
        for (name, t) in &side.types {
            assert_eq!(t.class_counts.len(), 4, "{name}");
            let majority = t.class_counts[&1] as f64 / t.n_rows as f64;
            assert!((majority - 0.855).abs() < 0.01);
            assert!(t.bayes_macro_precision >= 0.97, "{name}: {}", t.bayes_macro_precision);
        }
        assert_eq!(side.types["agriculture"].class_counts[&2], 80);
    }

    #[test]
    fn noiseless_rule_is_bayes_exact() {
        let spec = SynthSpec { labels: LabelRule::NearestMean, ..SynthSpec::with_rows(500, 1) };
        let (_, side) = generate(&spec).unwrap();
        assert!(side.types.values().all(|t| t.bayes_accuracy == 1.0));
        let noisy = SynthSpec { noise: 0.2, ..spec };
        let (_, side) = generate(&noisy).unwrap();
        assert!(side.types.values().all(|t| t.bayes_accuracy < 0.9));
    }

    #[test]
    fn fixed_seed_fixed_bytes() {
        let spec = SynthSpec::with_rows(300, 9);
        let bytes = |s: &SynthSpec| {
            let mut buf = Vec::new();
            crate::io::write_csv(&generate(s).unwrap().0, "%Y-%m-%d", &mut buf).unwrap();
            buf
        };
        assert_eq!(bytes(&spec), bytes(&spec));
        assert_ne!(bytes(&spec), bytes(&SynthSpec::with_rows(300, 10)));
    }

    #[test]
    fn shared_rules_are_rejected() {
        let mut spec = SynthSpec::default();
        spec.types[1].signal = [0, 1];
        spec.types[1].sign = 1.0;
        assert!(spec.validate().is_err());
        spec.types[1].sign = -1.0;
        assert!(spec.validate().is_ok());
        spec.types[0].proportions = vec![0.5, 0.4];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn written_data_reads_back() {
        let (d, _) = generate(&SynthSpec::with_rows(50, 2)).unwrap();
        let mut buf = Vec::new();
        crate::io::write_csv(&d, "%Y-%m-%d", &mut buf).unwrap();
        let back = crate::io::parse_csv(buf.as_slice(), &schema(), std::path::Path::new("s.csv")).unwrap();
        assert_eq!(back, d);
    }
}
