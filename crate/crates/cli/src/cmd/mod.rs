pub mod berry;
pub mod clt;
pub mod convolve;
pub mod fourth;
pub mod inf;
pub mod models;
pub mod moments;
pub mod partitions;
pub mod wigner;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;

use ncprob::harness::BoundKind;

use crate::error::CliResult;
use crate::report::Row;

/// Evaluates sweep cells in parallel, keeping their order.
pub fn sweep<T: Sync>(cells: &[T], f: impl Fn(&T) -> CliResult<Vec<Row>> + Sync + Send) -> CliResult<Vec<Row>> {
    let parts: Vec<Vec<Row>> = cells.par_iter().map(f).collect::<CliResult<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Boolean, monotone or both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindChoice {
    Boolean,
    Monotone,
    Both,
}

impl KindChoice {
    pub fn kinds(self) -> Vec<BoundKind> {
        match self {
            Self::Boolean => vec![BoundKind::Boolean],
            Self::Monotone => vec![BoundKind::Monotone],
            Self::Both => vec![BoundKind::Boolean, BoundKind::Monotone],
        }
    }
}

pub fn kind_name(kind: BoundKind) -> &'static str {
    match kind {
        BoundKind::Boolean => "boolean",
        BoundKind::Monotone => "monotone",
        BoundKind::Infinitesimal => "infinitesimal",
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 || pts.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let num: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(num / den)
}
