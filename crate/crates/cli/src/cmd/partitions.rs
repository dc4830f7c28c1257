use ncprob::partition::{count, enumerate, PartitionClass};
use serde::Serialize;

use crate::error::CliResult;
use crate::report::{Outcome, Table};

/// Enumerate or count a partition lattice.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Size of the ground set.
    #[arg(long)]
    pub n: usize,
    /// `noncrossing`, `interval` or `noncrossing-pair`.
    #[arg(long, default_value = "noncrossing")]
    pub class: PartitionClass,
    /// Print only the number of partitions.
    #[arg(long)]
    pub count: bool,
    /// Add the tree factorial τ(π)! of the nesting forest.
    #[arg(long)]
    pub tau: bool,
}

pub fn run(a: &Args) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    if a.count {
        let k = count(a.n, a.class)?;
        out.note("count", k);
        out.table = Some(Table {
            header: None,
            records: vec![vec![k.to_string()]],
        });
        return Ok(out);
    }
    let mut table = Table::with_header(if a.tau { &["index", "blocks", "tau_factorial"] } else { &["index", "blocks"] });
    for (i, pi) in enumerate(a.n, a.class)?.enumerate() {
        let mut record = vec![i.to_string(), pi.to_string()];
        if a.tau {
            record.push(pi.tau_factorial()?.to_string());
        }
        table.push(record);
    }
    out.note("count", table.records.len());
    out.table = Some(table);
    Ok(out)
}
