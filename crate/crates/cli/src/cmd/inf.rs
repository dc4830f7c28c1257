use std::path::PathBuf;

use clap::ValueEnum;
use ncprob::cumulant::Independence;
use ncprob::infinitesimal::{
    inf_bound_gap, inf_clt_gap, inf_comparison_gap, lift_equivalence_residual, random_inf_families, tilde_norm_ratio,
    InfModel, InfModelJson, InfVariance,
};
use ncprob::linalg::{rng, scalar};
use ncprob::harness::Gap;
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::parse::Cplx;
use crate::report::{Outcome, Row};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InfKind {
    Free,
    Boolean,
    Monotone,
    All,
}

impl InfKind {
    fn kinds(self) -> Vec<Independence> {
        match self {
            Self::Free => vec![Independence::Free],
            Self::Boolean => vec![Independence::Boolean],
            Self::Monotone => vec![Independence::Monotone],
            Self::All => vec![Independence::Free, Independence::Boolean, Independence::Monotone],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    /// Word rules against lifted independence, and the norm of `Ẽ` on lifts.
    Lift,
    /// Lindeberg bound for random families and matching Bernoullis.
    Bound,
    /// Central limit gap for one summand.
    Clt,
    /// Comparison of two infinitesimal Bernoulli laws.
    Comparison,
}

/// Infinitesimal (`E`, `E′`) experiments on lifted `2×2` upper-triangular
/// algebras.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    #[arg(long, value_enum, default_value = "all")]
    pub kind: InfKind,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lift,bound,clt,comparison")]
    pub check: Vec<Check>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    pub n: Vec<usize>,
    /// Scalar points `z`, used as `b = z·1_d`.
    #[arg(long, value_delimiter = ',', default_value = "3i", allow_hyphen_values = true)]
    pub z: Vec<Cplx>,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// CLT summand as model JSON (default: a random centered element).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Write the CLT summand used to this file.
    #[arg(long)]
    pub dump_model: Option<PathBuf>,
    /// Random variance pairs for the comparison check.
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
    /// Random words for the lift check.
    #[arg(long, default_value_t = 200)]
    pub words: usize,
    /// Random lifts for the `Ẽ` norm check.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 50)]
    pub net: usize,
    /// Longest word in the lift check.
    #[arg(long, default_value_t = 4)]
    pub max_len: usize,
    /// Pass threshold for the relative lift residual.
    #[arg(long, default_value_t = 1e-10)]
    pub lift_tol: f64,
}

fn name(kind: Independence) -> &'static str {
    match kind {
        Independence::Free => "free",
        Independence::Boolean => "boolean",
        Independence::Monotone => "monotone",
    }
}

struct Run<'a> {
    out: &'a mut Outcome,
    skipped: Vec<serde_json::Value>,
}

impl Run<'_> {
    /// Records a row, turning unsupported combinations into skip notes.
    fn push(&mut self, kind: String, n: usize, z: Cplx, gap: ncprob::Result<Gap>) -> CliResult<()> {
        match gap {
            Ok(g) => self.out.rows.push(Row::new(kind, n, z.0, g)),
            Err(ncprob::Error::Unsupported(why)) => {
                self.skipped.push(json!({"kind": kind, "n": n, "z": z, "reason": why}));
            }
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }
}

fn summand(a: &Args, seed: u64) -> CliResult<InfModel> {
    match &a.model {
        Some(path) => {
            let j: InfModelJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            Ok(InfModel::from_json(&j)?)
        }
        None => Ok(InfModel::random_centered(&mut rng(seed), a.d, a.d * a.d + 2, 0.8, 0.5)?),
    }
}

pub fn run(a: &Args, seed: u64) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let mut run = Run { out: &mut out, skipped: Vec::new() };
    let origin = Cplx(ncprob::linalg::c(0.0, 0.0));
    for check in &a.check {
        match check {
            Check::Lift => {
                for kind in a.kind.kinds() {
                    let res = lift_equivalence_residual(kind, a.d, a.words, a.max_len, seed)
                        .map(|r| Gap { lhs: r, rhs: a.lift_tol });
                    run.push(format!("{}-lift", name(kind)), a.words, origin, res)?;
                }
                let m = InfModel::random_centered(&mut rng(seed), a.d, a.d * a.d + 2, 0.8, 0.5)?;
                let ratio = tilde_norm_ratio(&m.pair, a.samples, seed).map(|r| Gap { lhs: r, rhs: 3.0 });
                run.push("tilde-norm".into(), a.samples, origin, ratio)?;
            }
            Check::Bound => {
                for kind in a.kind.kinds() {
                    for &n in &a.n {
                        let (xs, ys) = random_inf_families(n, a.d, seed)?;
                        for z in &a.z {
                            let gap = inf_bound_gap(kind, &xs, &ys, &scalar(a.d, z.0));
                            run.push(format!("{}-bound", name(kind)), n, *z, gap)?;
                        }
                    }
                }
            }
            Check::Clt => {
                let s = summand(a, seed)?;
                if let Some(path) = &a.dump_model {
                    std::fs::write(path, serde_json::to_string_pretty(&s.to_json())? + "\n")?;
                }
                for kind in a.kind.kinds() {
                    for &n in &a.n {
                        for z in &a.z {
                            let gap = inf_clt_gap(kind, &s, n, &scalar(s.d(), z.0));
                            run.push(format!("{}-clt", name(kind)), n, *z, gap)?;
                        }
                    }
                }
            }
            Check::Comparison => {
                let mut r = rng(seed);
                for k in 0..a.pairs {
                    let v0 = InfVariance::random(&mut r, a.d, 2)?;
                    let v1 = InfVariance::random(&mut r, a.d, 2)?;
                    for z in &a.z {
                        let gap = inf_comparison_gap(&v0, &v1, &scalar(a.d, z.0), a.net, seed + k as u64);
                        run.push("comparison".into(), k, *z, gap)?;
                    }
                }
            }
        }
    }
    if a.check.is_empty() {
        return Err(CliError::Usage("no checks selected".into()));
    }
    let skipped = std::mem::take(&mut run.skipped);
    out.note("skipped", skipped);
    Ok(out)
}
