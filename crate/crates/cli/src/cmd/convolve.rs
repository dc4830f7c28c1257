use std::path::PathBuf;
use std::str::FromStr;

use ncprob::transform::{moments_from_transform, ChainOp, MeasureJson, SpectralMeasure, TransformChain};
use serde::{Serialize, Serializer};
use serde_json::json;

use crate::error::CliResult;
use crate::parse::{Cplx, Grid, Law};
use crate::report::{num, Outcome, Table};

/// One convolution step, written `monotone=LAW` or `boolean=LAW`.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub op: ChainOp,
    pub law: Law,
    spec: String,
}

impl FromStr for Step {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (op, law) = s.split_once('=').ok_or_else(|| format!("step `{s}` must be monotone=LAW or boolean=LAW"))?;
        let op = match op {
            "monotone" => ChainOp::MonotoneCompose,
            "boolean" => ChainOp::BooleanAdd,
            other => return Err(format!("unknown convolution `{other}`")),
        };
        Ok(Step {
            op,
            law: law.parse()?,
            spec: s.to_string(),
        })
    }
}

impl Serialize for Step {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.spec)
    }
}

/// Boolean and monotone convolution chains.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Starting law.
    #[arg(long)]
    pub base: Law,
    /// Steps applied in order: `monotone=LAW` takes current ▷ LAW, `boolean=LAW` takes current ⊎ LAW.
    #[arg(long, value_delimiter = ',')]
    pub step: Vec<Step>,
    /// Density grid `lo:hi:count` (default: the support radius plus a margin, 801 points).
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Height ε of the Stieltjes inversion −Im G(t + iε)/π.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Write the resulting measure as JSON (sampled on the grid unless atomic).
    #[arg(long)]
    pub measure_out: Option<PathBuf>,
    /// Points at which the Cauchy transform is reported in the summary.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Vec<Cplx>,
}

pub fn run(a: &Args) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let mut chain = TransformChain::new(a.base.measure()?);
    for s in &a.step {
        chain = chain.push(s.op, s.law.measure()?);
    }
    for z in &a.z {
        // validates that every intermediate F stays above z
        chain.f_value(z.0)?;
    }
    let mu = chain.into_measure();
    let grid = match &a.grid {
        Some(g) => g.clone(),
        None => {
            let r = mu.support_radius().unwrap_or(4.0) + 0.5;
            Grid { lo: -r, hi: r, count: 801 }
        }
    };
    let ts = grid.points();
    let density = mu.stieltjes_invert(a.eps, &ts)?;
    let mass: f64 = ts.windows(2).zip(density.windows(2)).map(|(t, d)| 0.5 * (d[0] + d[1]) * (t[1] - t[0])).sum();
    let mut table = Table::with_header(&["t", "density"]);
    for (t, d) in ts.iter().zip(&density) {
        table.push(vec![num(*t), num(*d)]);
    }
    out.note("grid", &grid);
    out.note("eps", a.eps);
    out.note("mass_on_grid", mass);
    if let Ok(m) = moments_from_transform(&mu, 4) {
        out.note("moments", &m);
    }
    let values = a
        .z
        .iter()
        .map(|z| Ok(json!({"z": z, "g": Cplx(mu.cauchy(z.0)?)})))
        .collect::<CliResult<Vec<_>>>()?;
    out.note("cauchy", values);
    if let Some(path) = &a.measure_out {
        let json = match &mu {
            SpectralMeasure::Atomic(_) => mu.to_json()?,
            _ => MeasureJson::Sampled {
                grid: ts.clone(),
                density: density.iter().map(|d| d / mass).collect(),
            },
        };
        std::fs::write(path, serde_json::to_string_pretty(&json)? + "\n")?;
    }
    out.table = Some(table);
    Ok(out)
}
