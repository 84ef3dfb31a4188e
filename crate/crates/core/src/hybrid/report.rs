use std::fmt;

use serde::Serialize;

use super::train::EpochMetrics;
use crate::error::{Error, Result};

/// Final-epoch differences of run `a` relative to run `b`. Loss entries are
/// relative reductions in percent; accuracy entries are percentage points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub train_loss_pct: f64,
    pub val_loss_pct: f64,
    pub train_acc_pts: f64,
    pub val_acc_pts: f64,
}

fn relative_reduction(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b - a) / b.abs() * 100.0
    }
}

pub fn compare_runs(a: &[EpochMetrics], b: &[EpochMetrics]) -> Result<Comparison> {
    if a.len() != b.len() {
        return Err(Error::config(format!(
            "runs have {} and {} epochs",
            a.len(),
            b.len()
        )));
    }
    let (Some(x), Some(y)) = (a.last(), b.last()) else {
        return Err(Error::config("cannot compare empty runs"));
    };
    Ok(Comparison {
        train_loss_pct: relative_reduction(x.train_loss, y.train_loss),
        val_loss_pct: relative_reduction(x.val_loss, y.val_loss),
        train_acc_pts: (x.train_acc - y.train_acc) * 100.0,
        val_acc_pts: (x.val_acc - y.val_acc) * 100.0,
    })
}

/// At most two decimals, trailing zeros dropped, at least one decimal kept.
pub fn format_percent(v: f64) -> String {
    let s = format!("{:.2}", v.abs());
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

fn phrase(v: f64, good: &str, bad: &str, what: &str) -> String {
    let word = if v < 0.0 && format_percent(v) != "0.0" { bad } else { good };
    format!("{}% {word} {what}", format_percent(v))
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, {}, {}",
            phrase(self.train_loss_pct, "lower", "higher", "training loss"),
            phrase(self.val_loss_pct, "lower", "higher", "validation loss"),
            phrase(self.train_acc_pts, "higher", "lower", "training accuracy"),
            phrase(self.val_acc_pts, "higher", "lower", "validation accuracy"),
        )
    }
}

/// Paired comparison over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub runs: usize,
    /// Seeds where `a` is no worse: train loss, val loss, train acc, val acc.
    pub wins: [usize; 4],
    pub mean: Comparison,
    pub per_seed: Vec<Comparison>,
}

pub fn summarize_seeds(pairs: &[(Vec<EpochMetrics>, Vec<EpochMetrics>)]) -> Result<SeedSummary> {
    if pairs.is_empty() {
        return Err(Error::config("no runs to summarise"));
    }
    let per_seed = pairs
        .iter()
        .map(|(a, b)| compare_runs(a, b))
        .collect::<Result<Vec<_>>>()?;
    let mut wins = [0; 4];
    for (a, b) in pairs {
        let (x, y) = (a.last().expect("checked"), b.last().expect("checked"));
        wins[0] += (x.train_loss <= y.train_loss) as usize;
        wins[1] += (x.val_loss <= y.val_loss) as usize;
        wins[2] += (x.train_acc >= y.train_acc) as usize;
        wins[3] += (x.val_acc >= y.val_acc) as usize;
    }
    let n = per_seed.len() as f64;
    let mean = |f: fn(&Comparison) -> f64| per_seed.iter().map(f).sum::<f64>() / n;
    Ok(SeedSummary {
        runs: pairs.len(),
        wins,
        mean: Comparison {
            train_loss_pct: mean(|c| c.train_loss_pct),
            val_loss_pct: mean(|c| c.val_loss_pct),
            train_acc_pts: mean(|c| c.train_acc_pts),
            val_acc_pts: mean(|c| c.val_acc_pts),
        },
        per_seed,
    })
}
