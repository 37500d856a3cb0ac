//! CART trees and the ensembles built from them.

pub mod boosting;
pub mod cart;
pub mod forest;
pub mod regression;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;

/// Gains at or below this are treated as no improvement.
pub const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

/// Impurity of a (possibly weighted) class histogram. An empty histogram has
/// impurity 0.
pub fn impurity(counts: &[f64], criterion: Criterion) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                p * math::log2(p)
            })
            .sum::<f64>(),
    }
}

/// How many features each node may inspect.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    All,
    /// `max(1, round(√m))`
    Sqrt,
    /// `max(1, ceil(f·m))` for `f` in (0, 1]
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(self, m: usize) -> usize {
        let k = match self {
            MaxFeatures::All => m,
            MaxFeatures::Sqrt => math::round(math::sqrt(m as f64)) as usize,
            MaxFeatures::Fraction(f) => {
                let v = f * m as f64;
                let fl = math::floor(v);
                if v > fl { fl as usize + 1 } else { fl as usize }
            }
        };
        k.clamp(1, m.max(1))
    }

    pub fn is_valid(self) -> bool {
        match self {
            MaxFeatures::Fraction(f) => f > 0.0 && f <= 1.0,
            _ => true,
        }
    }
}

/// Most frequent label; ties go to the smallest code.
pub fn majority_vote(labels: &[u32]) -> Option<u32> {
    let mut sorted: Vec<u32> = labels.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(u32, usize)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if best.is_none_or(|(_, n)| j - i > n) {
            best = Some((sorted[i], j - i));
        }
        i = j;
    }
    best.map(|(c, _)| c)
}
