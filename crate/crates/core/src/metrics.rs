//! Multiclass evaluation: confusion matrix, accuracy, macro precision /
//! recall / F1, one-vs-rest ROC AUC and Cohen's kappa.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// Rows are true classes, columns predicted classes, both in `classes` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<u32>,
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion_matrix(y_true: &[u32], y_pred: &[u32], classes: &[u32]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    let pos = |l: u32| classes.iter().position(|&c| c == l).ok_or(Error::UnknownLabel(l));
    let k = classes.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[pos(t)?][pos(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

impl ConfusionMatrix {
    pub fn from_counts(classes: Vec<u32>, counts: Vec<Vec<u64>>) -> Self {
        ConfusionMatrix { classes, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty);
    }
    Ok(cm.trace() as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Macro-averaged scores. Undefined per-class ratios (0/0) count as 0 and are
/// listed in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassScores>,
    pub undefined: Vec<u32>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn precision_recall_f1(cm: &ConfusionMatrix) -> PrecisionRecallF1 {
    let k = cm.classes.len();
    let mut per_class = Vec::with_capacity(k);
    let mut undefined = Vec::new();
    for c in 0..k {
        let tp = cm.counts[c][c];
        let p = ratio(tp, cm.col_sum(c));
        let r = ratio(tp, cm.row_sum(c));
        if p.is_none() || r.is_none() {
            undefined.push(cm.classes[c]);
        }
        let (p, r) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        per_class.push(ClassScores {
            class: cm.classes[c],
            precision: p,
            recall: r,
            f1,
        });
    }
    let mean = |f: fn(&ClassScores) -> f64| {
        if k == 0 {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / k as f64
        }
    };
    PrecisionRecallF1 {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
        per_class,
        undefined,
    }
}

/// Binary AUC of `scores` for `positive` labels via average ranks (ties get half credit).
/// `None` when either side is empty.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of doubled ranks keeps tie averages integral
    let mut rank2_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 average to (i + j + 2) / 2
        let doubled = (i + j + 2) as u64;
        for &idx in &order[i..=j] {
            if positive[idx] {
                rank2_sum += doubled;
            }
        }
        i = j + 1;
    }
    let n_pos = n_pos as u64;
    // 2U = 2·Σrank − n_pos(n_pos + 1)
    let u2 = rank2_sum - n_pos * (n_pos + 1);
    Some(u2 as f64 / (2 * n_pos * n_neg as u64) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocAuc {
    pub macro_auc: f64,
    /// Per class: `None` when the class had no positives or no negatives.
    pub per_class: Vec<(u32, Option<f64>)>,
}

/// One-vs-rest ROC AUC, macro-averaged over classes that can be scored.
/// Column `c` of `scores` belongs to `classes[c]`.
pub fn roc_auc_ovr_macro(y_true: &[u32], scores: &Matrix, classes: &[u32]) -> Result<RocAuc> {
    if scores.rows() != y_true.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: scores.rows(),
        });
    }
    if scores.cols() != classes.len() {
        return Err(Error::DimensionMismatch {
            expected: classes.len(),
            got: scores.cols(),
        });
    }
    for row in scores.iter_rows() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(alloc::format!(
                "score rows must sum to 1, found {s}"
            )));
        }
    }
    for &l in y_true {
        if !classes.contains(&l) {
            return Err(Error::UnknownLabel(l));
        }
    }
    let per_class: Vec<(u32, Option<f64>)> = classes
        .iter()
        .enumerate()
        .map(|(c, &label)| {
            let positive: Vec<bool> = y_true.iter().map(|&l| l == label).collect();
            (label, binary_auc(&scores.column(c), &positive))
        })
        .collect();
    let scored: Vec<f64> = per_class.iter().filter_map(|(_, a)| *a).collect();
    if scored.is_empty() {
        return Err(Error::NoScorableClass);
    }
    Ok(RocAuc {
        macro_auc: scored.iter().sum::<f64>() / scored.len() as f64,
        per_class,
    })
}

pub fn cohens_kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty);
    }
    let n = total as f64;
    let p_o = cm.trace() as f64 / n;
    let p_e: f64 = (0..cm.classes.len())
        .map(|c| cm.row_sum(c) as f64 * cm.col_sum(c) as f64)
        .sum::<f64>()
        / (n * n);
    if p_e >= 1.0 {
        return Ok(if p_o >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Test-set scores shared by training reports and monitoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: Option<f64>,
    pub cohens_kappa: f64,
    pub undefined_classes: Vec<u32>,
}

pub fn evaluate(y_true: &[u32], y_pred: &[u32], scores: &Matrix, classes: &[u32]) -> Result<Evaluation> {
    let cm = confusion_matrix(y_true, y_pred, classes)?;
    let prf = precision_recall_f1(&cm);
    let roc_auc = match roc_auc_ovr_macro(y_true, scores, classes) {
        Ok(a) => Some(a.macro_auc),
        Err(Error::NoScorableClass) => None,
        Err(e) => return Err(e),
    };
    Ok(Evaluation {
        accuracy: accuracy(&cm)?,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        roc_auc,
        cohens_kappa: cohens_kappa(&cm)?,
        undefined_classes: prf.undefined,
        confusion: cm,
    })
}

/// One row of a model-performance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classifier: String,
    pub row_type: String,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: Option<f64>,
    pub cohens_kappa: f64,
    /// Wall-clock seconds of the training call; `None` when timing is suppressed.
    pub running_time_seconds: Option<f64>,
}

pub fn build_report(
    classifier: &str,
    row_type: &str,
    train_accuracy: f64,
    test: &Evaluation,
    running_time_seconds: Option<f64>,
) -> MetricsReport {
    MetricsReport {
        classifier: classifier.into(),
        row_type: row_type.into(),
        train_accuracy,
        test_accuracy: test.accuracy,
        precision: test.precision,
        recall: test.recall,
        f1: test.f1,
        roc_auc: test.roc_auc,
        cohens_kappa: test.cohens_kappa,
        running_time_seconds,
    }
}

/// Metrics that can be ranked across reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TrainAccuracy,
    TestAccuracy,
    Precision,
    Recall,
    F1,
    RocAuc,
    CohensKappa,
    RunningTime,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::TrainAccuracy,
        Metric::TestAccuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::F1,
        Metric::RocAuc,
        Metric::CohensKappa,
        Metric::RunningTime,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::TrainAccuracy => "Train Accuracy",
            Metric::TestAccuracy => "Test Accuracy",
            Metric::Precision => "Precision",
            Metric::Recall => "Recall",
            Metric::F1 => "F1 Score",
            Metric::RocAuc => "ROC AUC",
            Metric::CohensKappa => "Cohen's Kappa",
            Metric::RunningTime => "Running Time",
        }
    }

    /// Running time is better when smaller; everything else when larger.
    pub fn higher_is_better(self) -> bool {
        self != Metric::RunningTime
    }

    pub fn of(self, r: &MetricsReport) -> Option<f64> {
        match self {
            Metric::TrainAccuracy => Some(r.train_accuracy),
            Metric::TestAccuracy => Some(r.test_accuracy),
            Metric::Precision => Some(r.precision),
            Metric::Recall => Some(r.recall),
            Metric::F1 => Some(r.f1),
            Metric::RocAuc => r.roc_auc,
            Metric::CohensKappa => Some(r.cohens_kappa),
            Metric::RunningTime => r.running_time_seconds,
        }
    }

    pub fn of_evaluation(self, e: &Evaluation) -> Option<f64> {
        match self {
            Metric::TestAccuracy | Metric::TrainAccuracy => Some(e.accuracy),
            Metric::Precision => Some(e.precision),
            Metric::Recall => Some(e.recall),
            Metric::F1 => Some(e.f1),
            Metric::RocAuc => e.roc_auc,
            Metric::CohensKappa => Some(e.cohens_kappa),
            Metric::RunningTime => None,
        }
    }
}

/// Index of the best report for `metric`; the first listed wins ties.
pub fn best_by(reports: &[MetricsReport], metric: Metric) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in reports.iter().enumerate() {
        let Some(v) = metric.of(r) else { continue };
        let better = match best {
            None => true,
            Some((_, b)) if metric.higher_is_better() => v > b,
            Some((_, b)) => v < b,
        };
        if better {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn cm2(a: u64, b: u64, c: u64, d: u64) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(vec![1, 2], vec![vec![a, b], vec![c, d]])
    }

    #[test]
    fn confusion_hand_count() {
        let cm = confusion_matrix(&[1, 1, 2], &[1, 2, 2], &[1, 2]).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
        let perfect = confusion_matrix(&[1, 2, 3], &[1, 2, 3], &[1, 2, 3, 4]).unwrap();
        assert_eq!(perfect.counts[3], vec![0, 0, 0, 0]);
        assert!((0..3).all(|i| perfect.counts[i][i] == 1));
        assert_eq!(
            confusion_matrix(&[1], &[5], &[1, 2]).unwrap_err(),
            Error::UnknownLabel(5)
        );
    }

    #[test]
    fn accuracy_cases() {
        let cm = confusion_matrix(&[1, 1, 2, 2], &[1, 1, 2, 1], &[1, 2]).unwrap();
        assert_eq!(accuracy(&cm).unwrap(), 3.0 / 4.0);
        assert!(accuracy(&cm2(0, 0, 0, 0)).is_err());
    }

    #[test]
    fn uniform_random_accuracy_near_quarter() {
        let mut r = rng::seeded(5);
        let n = 20_000;
        let t: Vec<u32> = (0..n).map(|i| (i % 4) as u32 + 1).collect();
        let p: Vec<u32> = (0..n).map(|_| r.random_range(1..=4)).collect();
        let cm = confusion_matrix(&t, &p, &[1, 2, 3, 4]).unwrap();
        assert!((accuracy(&cm).unwrap() - 0.25).abs() < 0.03);
    }

    #[test]
    fn per_class_fixture() {
        let prf = precision_recall_f1(&cm2(45, 5, 10, 40));
        let p = [45.0 / 55.0, 40.0 / 45.0];
        let r = [0.9, 0.8];
        let f: Vec<f64> = (0..2).map(|i| 2.0 * p[i] * r[i] / (p[i] + r[i])).collect();
        assert!((prf.precision - (p[0] + p[1]) / 2.0).abs() < 1e-12);
        assert!((prf.recall - 0.85).abs() < 1e-12);
        assert!((prf.f1 - (f[0] + f[1]) / 2.0).abs() < 1e-12);
        assert!(prf.undefined.is_empty());
    }

    #[test]
    fn absent_class_contributes_zero() {
        let cm = confusion_matrix(&[1, 2], &[1, 2], &[1, 2, 3]).unwrap();
        let prf = precision_recall_f1(&cm);
        assert_eq!(prf.per_class[2].f1, 0.0);
        assert_eq!(prf.undefined, vec![3]);
        assert!((prf.precision - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn auc_fixtures() {
        let pos = [true, false, true, false];
        assert_eq!(binary_auc(&[0.9, 0.8, 0.4, 0.3], &pos), Some(0.75));
        assert_eq!(binary_auc(&[0.5; 4], &pos), Some(0.5));
        assert_eq!(binary_auc(&[0.9, 0.1, 0.8, 0.2], &pos), Some(1.0));
        assert_eq!(binary_auc(&[0.9, 0.1], &[true, true]), None);
    }

    #[test]
    fn ovr_auc_skips_absent_class() {
        let scores = Matrix::from_rows(&[[0.8, 0.1, 0.1], [0.2, 0.7, 0.1], [0.6, 0.3, 0.1]]).unwrap();
        let auc = roc_auc_ovr_macro(&[1, 2, 1], &scores, &[1, 2, 3]).unwrap();
        assert_eq!(auc.per_class[2].1, None);
        assert_eq!(auc.macro_auc, 1.0);
        let bad = Matrix::from_rows(&[[0.5, 0.1, 0.1]]).unwrap();
        assert!(roc_auc_ovr_macro(&[1], &bad, &[1, 2, 3]).is_err());
        let one = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(roc_auc_ovr_macro(&[1], &one, &[1, 2, 3]).unwrap_err(), Error::NoScorableClass);
    }

    #[test]
    fn kappa_fixtures() {
        let cm = cm2(45, 5, 10, 40);
        // marginal-product oracle: p_o = 0.85, p_e = (50·55 + 50·45) / 100² = 0.5
        let p_o = 85.0 / 100.0;
        let p_e = (50.0 * 55.0 + 50.0 * 45.0) / 10_000.0;
        assert!((cohens_kappa(&cm).unwrap() - (p_o - p_e) / (1.0 - p_e)).abs() < 1e-12);
        assert!((cohens_kappa(&cm).unwrap() - 0.70).abs() < 1e-9);
        assert_eq!(cohens_kappa(&cm2(10, 0, 0, 10)).unwrap(), 1.0);
        assert_eq!(cohens_kappa(&cm2(25, 25, 25, 25)).unwrap(), 0.0);
        assert_eq!(cohens_kappa(&cm2(10, 0, 0, 0)).unwrap(), 1.0);
    }

    #[test]
    fn best_estimator_selection() {
        let mk = |name: &str, acc: f64, t: f64| MetricsReport {
            classifier: name.into(),
            row_type: "p".into(),
            train_accuracy: 1.0,
            test_accuracy: acc,
            precision: acc,
            recall: acc,
            f1: acc,
            roc_auc: None,
            cohens_kappa: acc,
            running_time_seconds: Some(t),
        };
        let rs = vec![mk("a", 0.9, 3.0), mk("b", 0.95, 5.0), mk("c", 0.95, 1.0)];
        assert_eq!(best_by(&rs, Metric::TestAccuracy), Some(1));
        assert_eq!(best_by(&rs, Metric::RunningTime), Some(2));
        assert_eq!(best_by(&rs, Metric::TrainAccuracy), Some(0));
        assert_eq!(best_by(&rs, Metric::RocAuc), None);
    }

    fn pair_count_auc(scores: &[f64], pos: &[bool]) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if pos[i] && !pos[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        (den > 0.0).then(|| num / den)
    }

    proptest! {
        #[test]
        fn auc_equals_pair_counting(
            data in proptest::collection::vec((0u8..20, any::<bool>()), 2..300)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 20.0).collect();
            let pos: Vec<bool> = data.iter().map(|(_, p)| *p).collect();
            prop_assert_eq!(binary_auc(&scores, &pos), pair_count_auc(&scores, &pos));
            if let Some(a) = binary_auc(&scores, &pos) {
                let rev: Vec<f64> = scores.iter().map(|s| -s).collect();
                prop_assert!((binary_auc(&rev, &pos).unwrap() - (1.0 - a)).abs() < 1e-12);
            }
        }

        #[test]
        fn relabeling_and_permutation_invariance(
            pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..100)
        ) {
            let t: Vec<u32> = pairs.iter().map(|p| p.0 as u32 + 1).collect();
            let p: Vec<u32> = pairs.iter().map(|p| p.1 as u32 + 1).collect();
            let cm = confusion_matrix(&t, &p, &[1, 2, 3]).unwrap();
            let perm = |l: u32| [3u32, 1, 2][l as usize - 1];
            let t2: Vec<u32> = t.iter().map(|&l| perm(l)).collect();
            let p2: Vec<u32> = p.iter().map(|&l| perm(l)).collect();
            let cm2 = confusion_matrix(&t2, &p2, &[1, 2, 3]).unwrap();
            prop_assert!((precision_recall_f1(&cm).f1 - precision_recall_f1(&cm2).f1).abs() < 1e-12);
            prop_assert_eq!(accuracy(&cm).unwrap(), accuracy(&cm2).unwrap());
            let k = cohens_kappa(&cm).unwrap();
            prop_assert!((-1.0..=1.0).contains(&k));
            let off_diag: u64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| cm.counts[i][j]).sum();
            let p_e_lt_1 = {
                let n = cm.total() as f64;
                let pe: f64 = (0..3).map(|c| cm.row_sum(c) as f64 * cm.col_sum(c) as f64).sum::<f64>() / (n * n);
                pe < 1.0
            };
            if p_e_lt_1 {
                prop_assert_eq!(k == 1.0, off_diag == 0);
            }
        }
    }
}
