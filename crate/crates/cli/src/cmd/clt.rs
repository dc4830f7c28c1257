use ncprob::harness::{clt_gap, levy_rate};
use serde::Serialize;
use serde_json::json;

use super::{kind_name, log_log_slope, sweep, KindChoice};
use crate::error::CliResult;
use crate::parse::{Cplx, Law};
use crate::report::{Outcome, Row};

/// Scalar Boolean and monotone central limit sweeps.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    #[arg(long, value_enum, default_value = "both")]
    pub kind: KindChoice,
    /// Finitely supported summand law; centered before use.
    #[arg(long, default_value = "bernoulli:1")]
    pub summand: Law,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "i,2i,1+i", allow_hyphen_values = true)]
    pub z: Vec<Cplx>,
    /// Also optimize the Lévy-distance estimate for each `n`.
    #[arg(long)]
    pub levy: bool,
}

pub fn run(a: &Args) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let nu = a.summand.atomic()?;
    let mean = nu.moment(1);
    let nu = ncprob::transform::AtomicMeasure::new(nu.atoms().iter().map(|&(t, w)| (t - mean, w)))?;
    let mut cells = Vec::new();
    for kind in a.kind.kinds() {
        for &n in &a.n {
            cells.push((kind, n));
        }
    }
    out.rows = sweep(&cells, |&(kind, n)| {
        a.z.iter()
            .map(|z| Ok(Row::new(kind_name(kind), n, z.0, clt_gap(kind, &nu, n, z.0)?)))
            .collect()
    })?;
    let mut slopes = Vec::new();
    for kind in a.kind.kinds() {
        for z in &a.z {
            let pts: Vec<(f64, f64)> = out
                .rows
                .iter()
                .filter(|r| r.kind == kind_name(kind) && r.z_re == z.0.re && r.z_im == z.0.im)
                .map(|r| (r.n as f64, r.lhs))
                .collect();
            slopes.push(json!({"kind": kind_name(kind), "z": z, "slope": log_log_slope(&pts)}));
        }
    }
    out.note("slopes", slopes);
    if a.levy {
        let mut levy = Vec::new();
        for &(kind, n) in &cells {
            let r = levy_rate(kind, &nu, n)?;
            levy.push(json!({"kind": kind_name(kind), "n": n, "estimate": r.estimate, "eps": r.eps, "rate_bound": r.rate_bound}));
        }
        out.note("levy", levy);
    }
    Ok(out)
}
