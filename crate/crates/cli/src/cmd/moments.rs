use std::fmt::Display;
use std::str::FromStr;

use clap::ValueEnum;
use ncprob::cumulant::{scalar, Independence};
use num_rational::Ratio;
use num_traits::{FromPrimitive, Num};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::parse::Law;
use crate::report::{Outcome, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindSel {
    Free,
    Boolean,
    Monotone,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Moments,
    Cumulants,
}

/// Moment and cumulant tables of one scalar sequence.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Cumulant kind; `all` prints the three cumulant sequences of the moments.
    #[arg(long, value_enum, default_value = "all")]
    pub kind: KindSel,
    /// Whether `--values` are moments or cumulants.
    #[arg(long, value_enum, default_value = "moments")]
    pub from: Source,
    /// Values for orders 1, 2, …; missing orders up to `--order` are zero.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Vec<String>,
    /// Take the moments of a law instead of `--values`.
    #[arg(long, conflicts_with = "values")]
    pub law: Option<Law>,
    /// Highest order (default: number of values, or 8 for a law).
    #[arg(long)]
    pub order: Option<usize>,
    /// Exact rational arithmetic; values are integers or fractions `p/q`.
    #[arg(long)]
    pub exact: bool,
}

fn kinds(sel: KindSel) -> Vec<Independence> {
    match sel {
        KindSel::Free => vec![Independence::Free],
        KindSel::Boolean => vec![Independence::Boolean],
        KindSel::Monotone => vec![Independence::Monotone],
        KindSel::All => vec![Independence::Free, Independence::Boolean, Independence::Monotone],
    }
}

fn sequence<T>(values: &[String], order: usize) -> CliResult<Vec<T>>
where
    T: FromStr + Num + Clone,
{
    let mut seq = vec![T::one()];
    for k in 1..=order {
        match values.get(k - 1) {
            Some(v) => seq.push(v.parse::<T>().map_err(|_| CliError::Usage(format!("`{v}` is not a valid value")))?),
            None => seq.push(T::zero()),
        }
    }
    Ok(seq)
}

fn table<T: Num + Clone + FromPrimitive + Display>(a: &Args, seq: &[T], order: usize) -> CliResult<Table> {
    let ks = kinds(a.kind);
    match a.from {
        Source::Moments => {
            let mut header = vec!["order".to_string(), "moment".to_string()];
            header.extend(ks.iter().map(|k| format!("{}_cumulant", k.name())));
            let columns = ks
                .iter()
                .map(|&k| scalar::cumulants(k, seq, order))
                .collect::<Result<Vec<_>, _>>()?;
            let records = (1..=order)
                .map(|n| {
                    let mut r = vec![n.to_string(), seq[n].to_string()];
                    r.extend(columns.iter().map(|c| c[n].to_string()));
                    r
                })
                .collect();
            Ok(Table {
                header: Some(header),
                records,
            })
        }
        Source::Cumulants => {
            let [kind] = ks[..] else {
                return Err(CliError::Usage("--from cumulants needs a single --kind".into()));
            };
            let mut t = Table::with_header(&["order", "cumulant", "moment"]);
            for n in 1..=order {
                t.push(vec![n.to_string(), seq[n].to_string(), scalar::moment(kind, seq, n)?.to_string()]);
            }
            Ok(t)
        }
    }
}

pub fn run(a: &Args) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let t = if let Some(law) = &a.law {
        if a.exact || a.from == Source::Cumulants {
            return Err(CliError::Usage("--law gives floating-point moments; drop --exact and --from cumulants".into()));
        }
        let order = a.order.unwrap_or(8);
        table(a, &law.moments(order)?, order)?
    } else {
        if a.values.is_empty() {
            return Err(CliError::Usage("give --values or --law".into()));
        }
        let order = a.order.unwrap_or(a.values.len());
        if a.exact {
            table(a, &sequence::<Ratio<i128>>(&a.values, order)?, order)?
        } else {
            table(a, &sequence::<f64>(&a.values, order)?, order)?
        }
    };
    out.note("orders", t.records.len());
    out.table = Some(t);
    Ok(out)
}
