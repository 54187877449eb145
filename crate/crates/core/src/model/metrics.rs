//! Per-class precision/recall/F1 from a confusion matrix.
//!
//! Rows are true classes, columns predicted classes. A zero denominator
//! yields 0 for that metric and the class is listed in `zero_division`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Shape("confusion matrix is empty".into()));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Shape(format!(
                "confusion matrix row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        Ok(Self { counts: rows })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    /// Adds another shard's counts.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    #[serde(rename = "f1-score")]
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageMetrics {
    pub precision: f64,
    pub recall: f64,
    #[serde(rename = "f1-score")]
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    #[serde(rename = "macro avg")]
    pub macro_avg: AverageMetrics,
    #[serde(rename = "weighted avg")]
    pub weighted_avg: AverageMetrics,
    pub total: u64,
    pub confusion_matrix: ConfusionMatrix,
    /// Labels of classes where precision or recall had a zero denominator.
    pub zero_division: Vec<String>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Rounds to `decimals` places, ties to even.
pub fn round_half_even(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round_ties_even() / scale
}

pub fn metrics_from_confusion(matrix: &ConfusionMatrix) -> Result<MetricsReport> {
    metrics_with_labels(matrix, &crate::dataset::numbered_classes(matrix.classes()))
}

pub fn metrics_with_labels(matrix: &ConfusionMatrix, labels: &[String]) -> Result<MetricsReport> {
    let n = matrix.classes();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} classes", labels.len())));
    }
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Data("confusion matrix has no samples".into()));
    }
    let rows = matrix.rows();
    let mut classes = Vec::with_capacity(n);
    let mut zero_division = Vec::new();
    for c in 0..n {
        let tp = rows[c][c];
        let row_sum: u64 = rows[c].iter().sum();
        let col_sum: u64 = rows.iter().map(|r| r[c]).sum();
        let precision = ratio(tp, col_sum);
        let recall = ratio(tp, row_sum);
        if precision.is_none() || recall.is_none() {
            zero_division.push(labels[c].clone());
        }
        let (p, r) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
        classes.push(ClassMetrics {
            label: labels[c].clone(),
            precision: p,
            recall: r,
            f1: f1(p, r),
            support: row_sum,
        });
    }

    let k = n as f64;
    let macro_avg = AverageMetrics {
        precision: classes.iter().map(|m| m.precision).sum::<f64>() / k,
        recall: classes.iter().map(|m| m.recall).sum::<f64>() / k,
        f1: classes.iter().map(|m| m.f1).sum::<f64>() / k,
        support: total,
    };
    let w = |f: fn(&ClassMetrics) -> f64| -> f64 {
        classes.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
    };
    let weighted_avg = AverageMetrics {
        precision: w(|m| m.precision),
        recall: w(|m| m.recall),
        f1: w(|m| m.f1),
        support: total,
    };
    Ok(MetricsReport {
        accuracy: matrix.trace() as f64 / total as f64,
        classes,
        macro_avg,
        weighted_avg,
        total,
        confusion_matrix: matrix.clone(),
        zero_division,
    })
}

impl MetricsReport {
    /// Copy with every metric rounded to three decimals (ties to even).
    pub fn rounded(&self) -> MetricsReport {
        let r = |x: f64| round_half_even(x, 3);
        let mut out = self.clone();
        for c in &mut out.classes {
            c.precision = r(c.precision);
            c.recall = r(c.recall);
            c.f1 = r(c.f1);
        }
        for a in [&mut out.macro_avg, &mut out.weighted_avg] {
            a.precision = r(a.precision);
            a.recall = r(a.recall);
            a.f1 = r(a.f1);
        }
        out.accuracy = r(out.accuracy);
        out
    }

    pub fn macro_f1(&self) -> f64 {
        self.macro_avg.f1
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .classes
            .iter()
            .map(|c| c.label.len())
            .chain(["weighted avg".len()])
            .max()
            .unwrap_or(12);
        writeln!(
            f,
            "{:>width$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "", "precision", "recall", "f1-score", "support"
        )?;
        writeln!(f)?;
        for c in &self.classes {
            writeln!(
                f,
                "{:>width$}  {:>9.3}  {:>9.3}  {:>9.3}  {:>9}",
                c.label,
                round_half_even(c.precision, 3),
                round_half_even(c.recall, 3),
                round_half_even(c.f1, 3),
                c.support
            )?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "{:>width$}  {:>9}  {:>9}  {:>9.3}  {:>9}",
            "accuracy",
            "",
            "",
            round_half_even(self.accuracy, 3),
            self.total
        )?;
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            writeln!(
                f,
                "{:>width$}  {:>9.3}  {:>9.3}  {:>9.3}  {:>9}",
                name,
                round_half_even(a.precision, 3),
                round_half_even(a.recall, 3),
                round_half_even(a.f1, 3),
                a.support
            )?;
        }
        Ok(())
    }
}
