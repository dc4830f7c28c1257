use clap::ValueEnum;
use ncprob::linalg::Mat;
use ncprob::model::{boolean_star_family, eta_circular, monotone_product_family, Factor, Weighting};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::parse::Law;
use crate::report::{num, Outcome, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    /// Boolean star product of the factors.
    Star,
    /// Monotone product, factors in increasing order.
    Monotone,
    /// The η-circular element, dumped through its real part A + A*.
    Circular,
}

/// Build an operator model and dump a spectral law.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    #[arg(long = "type", value_enum, default_value = "star")]
    pub model: ModelType,
    /// Scalar factors: any finitely supported law (centered before use) or `perturbed:V:G`.
    #[arg(long, value_delimiter = ',', default_value = "bernoulli:1,bernoulli:1")]
    pub factors: Vec<String>,
    /// Amplify every factor to `M_d`-valued `1_d ⊗ x`.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Element whose law is dumped (default: the sum of all elements).
    #[arg(long)]
    pub element: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha_tilde: f64,
}

fn factor(spec: &str, d: usize) -> CliResult<Factor> {
    let f = if let Some(rest) = spec.strip_prefix("perturbed:") {
        let (v, g) = rest
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("factor `{spec}` must be perturbed:V:G")))?;
        let parse = |s: &str| s.parse::<f64>().map_err(|_| CliError::Usage(format!("factor `{spec}`: `{s}` is not a number")));
        Factor::perturbed_bernoulli(parse(v)?, parse(g)?)
    } else if let Some(v) = spec.strip_prefix("bernoulli:") {
        Factor::bernoulli(v.parse().map_err(|_| CliError::Usage(format!("factor `{spec}`: bad variance")))?)
    } else {
        let law: Law = spec.parse().map_err(CliError::Usage)?;
        Factor::atomic(&law.atomic()?, true)
    };
    if d == 1 {
        Ok(f)
    } else {
        Ok(f.amplified(d)?)
    }
}

pub fn run(a: &Args) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let model = match a.model {
        ModelType::Circular => eta_circular(a.alpha, a.alpha_tilde)?,
        kind => {
            let factors = a.factors.iter().map(|s| factor(s, a.d)).collect::<CliResult<Vec<_>>>()?;
            if kind == ModelType::Star {
                boolean_star_family(&factors)?
            } else {
                monotone_product_family(&factors)?
            }
        }
    };
    let x: Mat = match a.element {
        Some(k) if k >= model.elements.len() => {
            return Err(CliError::Usage(format!("model has {} elements", model.elements.len())));
        }
        Some(k) => model.element(k).clone(),
        None => model.sum(0..model.elements.len()),
    };
    let x = if a.model == ModelType::Circular { &x + x.adjoint() } else { x };
    let weight = if model.d() == 1 { Weighting::State } else { Weighting::Trace };
    let law = model.spectral_distribution(&x, weight)?;
    let mut table = Table::with_header(&["location", "weight"]);
    for &(t, w) in law.atoms() {
        table.push(vec![num(t), num(w)]);
    }
    out.note("dim", model.space.total_dim());
    out.note("elements", model.elements.len());
    out.note("moments", (0..=4).map(|k| law.moment(k)).collect::<Vec<_>>());
    let second = model.expect(&(&x * &x))?;
    out.note("second_moment_trace", (second.trace() / model.d() as f64).re);
    out.table = Some(table);
    Ok(out)
}
