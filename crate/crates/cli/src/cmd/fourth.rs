use ncprob::harness::fourth_moment_gap;
use ncprob::transform::AtomicMeasure;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::parse::{Cplx, Law};
use crate::report::{Outcome, Row};

/// Distance of monotone sums to the arcsine law, against the fourth
/// monotone cumulant.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Summand law, standardized to mean 0 and variance 1.
    #[arg(long, default_value = "bernoulli:1")]
    pub summand: Law,
    #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2i", allow_hyphen_values = true)]
    pub z: Vec<Cplx>,
}

pub fn run(a: &Args) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let nu = a.summand.atomic()?;
    let mean = nu.moment(1);
    let var = nu.moment(2) - mean * mean;
    if !(var > 0.0) {
        return Err(CliError::Usage("the summand must have positive variance".into()));
    }
    let s = var.sqrt();
    let nu = AtomicMeasure::new(nu.atoms().iter().map(|&(t, w)| ((t - mean) / s, w)))?;
    let mut h4 = Vec::new();
    for (i, z) in a.z.iter().enumerate() {
        let mut prev = f64::INFINITY;
        let mut decreasing = true;
        for &n in &a.n {
            let g = fourth_moment_gap(&nu, n, z.0)?;
            decreasing &= g.lhs < prev;
            prev = g.lhs;
            if i == 0 {
                h4.push((n, g.h4));
            }
            out.rows.push(Row::new("fourth-moment", n, z.0, ncprob::harness::Gap { lhs: g.lhs, rhs: g.rhs }));
        }
        out.note(&format!("decreasing_at_{z}"), decreasing);
    }
    out.note("h4", h4);
    Ok(out)
}
