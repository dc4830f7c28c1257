use ncprob::harness::{family_gap, lindeberg_expectations, random_family_pair, telescoping_residual, BoundKind, Gap};
use ncprob::linalg::{op_norm, scalar};
use serde::Serialize;

use super::{kind_name, sweep, KindChoice};
use crate::error::CliResult;
use crate::parse::Cplx;
use crate::report::{Outcome, Row};

/// Telescoping is checked with full resolvents only up to this dimension.
const TELESCOPE_DIM: usize = 160;

/// Lindeberg replacement on random operator-valued families.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    #[arg(long, value_enum, default_value = "both")]
    pub kind: KindChoice,
    #[arg(long, value_delimiter = ',', default_value = "2,4")]
    pub n: Vec<usize>,
    /// Matrix size of the amalgamation algebra `M_d`.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Scalar points `z`, used as `b = z·1_d`.
    #[arg(long, value_delimiter = ',', default_value = "i,2i", allow_hyphen_values = true)]
    pub z: Vec<Cplx>,
    /// Unitaries in the net for the suprema over the unit ball.
    #[arg(long, default_value_t = 50)]
    pub net: usize,
    /// Pass threshold for the telescoping residual.
    #[arg(long, default_value_t = 1e-12)]
    pub telescoping_tol: f64,
    /// Pass threshold for `‖E[Aᵢ]‖` and `‖E[Bᵢ]‖`.
    #[arg(long, default_value_t = 1e-10)]
    pub vanishing_tol: f64,
}

pub fn run(a: &Args, seed: u64) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let cells: Vec<(BoundKind, usize)> =
        a.kind.kinds().into_iter().flat_map(|k| a.n.iter().map(move |&n| (k, n))).collect();
    out.rows = sweep(&cells, |&(kind, n)| {
        let pair = random_family_pair(kind, n, a.d, seed)?;
        let (m, xs, ys) = (&pair.model, &pair.xs, &pair.ys);
        let name = kind_name(kind);
        let mut rows = Vec::new();
        for z in &a.z {
            let b = scalar(a.d, z.0);
            rows.push(Row::new(name, n, z.0, family_gap(kind, &pair, &b, a.net, seed)?));
            let mut vanish = 0.0f64;
            for i in 1..=n {
                let (ea, eb) = lindeberg_expectations(m, xs, ys, &b, i)?;
                vanish = vanish.max(op_norm(&ea)).max(op_norm(&eb));
            }
            rows.push(Row::new(format!("{name}-vanishing"), n, z.0, Gap { lhs: vanish, rhs: a.vanishing_tol }));
            if m.space.total_dim() <= TELESCOPE_DIM {
                let res = telescoping_residual(m, xs, ys, &b)?;
                rows.push(Row::new(format!("{name}-telescoping"), n, z.0, Gap { lhs: res, rhs: a.telescoping_tol }));
            }
        }
        Ok(rows)
    })?;
    out.note("telescoping_max_dim", TELESCOPE_DIM);
    Ok(out)
}
