//! Accuracy metrics for incremental sessions.
//!
//! All accuracies are class-wise (macro) averages and are kept as fractions;
//! conversion to percentages happens only when a report is written.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::protocol::SessionResult;

/// Per-class `(correct, total)` counts over the given classes.
fn per_class_counts(result: &SessionResult, classes: &[usize]) -> Result<Vec<(u64, u64)>> {
    let mut counts: BTreeMap<usize, (u64, u64)> = classes.iter().map(|&c| (c, (0, 0))).collect();
    for &(t, p) in &result.pairs {
        if let Some(e) = counts.get_mut(&t) {
            e.1 += 1;
            if t == p {
                e.0 += 1;
            }
        }
    }
    classes
        .iter()
        .map(|c| match counts[c] {
            (_, 0) => Err(Error::MissingClass(*c)),
            v => Ok(v),
        })
        .collect()
}

/// Mean per-class accuracy over `classes`.
pub fn group_accuracy(result: &SessionResult, classes: &[usize]) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let counts = per_class_counts(result, classes)?;
    Ok(counts.iter().map(|&(ok, n)| ok as f64 / n as f64).sum::<f64>() / counts.len() as f64)
}

pub fn average_accuracy(result: &SessionResult) -> Result<f64> {
    group_accuracy(result, &result.seen_classes)
}

/// `2ab / (a + b)`, and 0 when both are 0.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

fn incremental_classes(result: &SessionResult, base: &BTreeSet<usize>) -> Vec<usize> {
    result
        .seen_classes
        .iter()
        .copied()
        .filter(|c| !base.contains(c))
        .collect()
}

/// Returns `(A_b, A_i)`.
pub fn group_accuracies(result: &SessionResult, base_classes: &BTreeSet<usize>) -> Result<(f64, f64)> {
    let inc = incremental_classes(result, base_classes);
    if inc.is_empty() {
        return Err(Error::NoIncrementalClasses);
    }
    let base: Vec<usize> = result
        .seen_classes
        .iter()
        .copied()
        .filter(|c| base_classes.contains(c))
        .collect();
    Ok((group_accuracy(result, &base)?, group_accuracy(result, &inc)?))
}

/// Harmonic mean of base-class and incremental-class accuracy.
pub fn harmonic_accuracy(result: &SessionResult, base_classes: &BTreeSet<usize>) -> Result<f64> {
    let (b, i) = group_accuracies(result, base_classes)?;
    Ok(harmonic_mean(b, i))
}

/// First-session average accuracy minus last-session average accuracy.
pub fn performance_drop(per_session_avg: &[f64]) -> Result<f64> {
    match per_session_avg {
        [first, .., last] => Ok(first - last),
        _ => Err(Error::TooFewSessions(per_session_avg.len())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<usize>,
    /// `counts[t][p]`: samples of `labels[t]` predicted as `labels[p]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Dense CSV grid; the header row and first column hold class ids.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for l in &self.labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            let _ = write!(out, "{l}");
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion_matrix(result: &SessionResult, label_space: &[usize]) -> Result<ConfusionMatrix> {
    let index: BTreeMap<usize, usize> = label_space.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let n = label_space.len();
    let mut counts = vec![vec![0u64; n]; n];
    for &(t, p) in &result.pairs {
        let ti = *index.get(&t).ok_or(Error::UnknownLabel(t))?;
        let pi = *index.get(&p).ok_or(Error::UnknownLabel(p))?;
        counts[ti][pi] += 1;
    }
    Ok(ConfusionMatrix {
        labels: label_space.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionMetrics {
    pub index: usize,
    pub classes: usize,
    pub samples: usize,
    pub average: f64,
    pub base: f64,
    /// `None` for the base session.
    pub incremental: Option<f64>,
    pub harmonic: Option<f64>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub sessions: Vec<SessionMetrics>,
    /// `None` with fewer than two sessions.
    pub performance_drop: Option<f64>,
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

pub const REPORT_HEADER: &str = "session,classes,samples,avg_acc,base_acc,inc_acc,harmonic_acc";

impl MetricsReport {
    pub fn from_results(results: &[SessionResult]) -> Result<Self> {
        let mut sessions = Vec::with_capacity(results.len());
        for r in results {
            let base: BTreeSet<usize> = r.base_classes.iter().copied().collect();
            let base_seen: Vec<usize> = r.seen_classes.iter().copied().filter(|c| base.contains(c)).collect();
            let (incremental, harmonic) = match group_accuracies(r, &base) {
                Ok((b, i)) => (Some(i), Some(harmonic_mean(b, i))),
                Err(Error::NoIncrementalClasses) => (None, None),
                Err(e) => return Err(e),
            };
            sessions.push(SessionMetrics {
                index: r.index,
                classes: r.seen_classes.len(),
                samples: r.pairs.len(),
                average: average_accuracy(r)?,
                base: group_accuracy(r, &base_seen)?,
                incremental,
                harmonic,
                confusion: confusion_matrix(r, &r.seen_classes)?,
            });
        }
        let avgs: Vec<f64> = sessions.iter().map(|s| s.average).collect();
        Ok(Self {
            sessions,
            performance_drop: performance_drop(&avgs).ok(),
        })
    }

    pub fn final_harmonic(&self) -> Option<f64> {
        self.sessions.last().and_then(|s| s.harmonic)
    }

    /// One row per session with accuracies in percent; the last line is
    /// `PD,<value>` (or `PD,-`).
    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), pct);
        for s in &self.sessions {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.index,
                s.classes,
                s.samples,
                pct(s.average),
                pct(s.base),
                opt(s.incremental),
                opt(s.harmonic)
            );
        }
        let _ = writeln!(out, "PD,{}", opt(self.performance_drop));
        out
    }
}
