use std::path::PathBuf;

use clap::ValueEnum;
use ncprob::harness::wigner_gap;
use ncprob::model::{
    bernoulli_matrix_law, build_boolean_wigner, distance_limit_cdf, identical_limit_cdf, lambda_profile, EntryKind,
    VarianceProfile, Weighting,
};
use ncprob::transform::{levy_distance_cdf, ClosedFormCdf};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::parse::Cplx;
use crate::report::{num, Outcome, Row, Table};

/// Largest `n` for which `A_n` is built as an explicit operator model.
const MODEL_N: usize = 12;

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
enum Family {
    Identical { sigma: f64, alpha: f64, alpha_tilde: f64 },
    Distance {},
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum ProfileFile {
    Family(Family),
    Full(VarianceProfile),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    /// The matrix Bernoulli `B_n`, through its closed-form law.
    B,
    /// The Boolean Wigner matrix `A_n` itself (small `n` only).
    A,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Entries {
    Circular,
    Perturbed,
}

/// Boolean Wigner matrices with a variance profile.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Profile JSON: a full `{n, sigma, alpha, alpha_tilde}` profile or a
    /// `{"family": "identical" | "distance", ...}` description.
    #[arg(long)]
    pub profile: PathBuf,
    /// Matrix size for family profiles.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value = "b")]
    pub matrix: Which,
    /// Points for the Cauchy-transform gap rows.
    #[arg(long, value_delimiter = ',', default_value = "i,2i", allow_hyphen_values = true)]
    pub z: Vec<Cplx>,
    #[arg(long, value_enum, default_value = "circular")]
    pub entries: Entries,
    /// Size of the `γ E₁₁` perturbation for `--entries perturbed`.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
}

pub fn run(a: &Args) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let file: ProfileFile = serde_json::from_str(&std::fs::read_to_string(&a.profile)?)?;
    let need_n = || a.n.ok_or_else(|| CliError::Usage("family profiles need --n".into()));
    type Limit = (Box<dyn Fn(f64) -> f64>, [f64; 2]);
    let (profile, limit): (VarianceProfile, Option<Limit>) = match file {
        ProfileFile::Full(p) => (p, None),
        ProfileFile::Family(Family::Identical { sigma, alpha, alpha_tilde }) => (
            VarianceProfile::identical(need_n()?, sigma, alpha, alpha_tilde)?,
            Some((
                Box::new(identical_limit_cdf(sigma, alpha, alpha_tilde)),
                [(sigma + alpha_tilde).sqrt(), (sigma + alpha).sqrt()],
            )),
        ),
        ProfileFile::Family(Family::Distance {}) => (
            VarianceProfile::distance(need_n()?)?,
            Some((Box::new(distance_limit_cdf()), [0.5, 0.5f64.sqrt()])),
        ),
    };
    if let Some(n) = a.n {
        if n != profile.n() {
            return Err(CliError::Usage(format!("--n {n} does not match the profile size {}", profile.n())));
        }
    }
    let n = profile.n();
    let lambda = lambda_profile(&profile);
    let b_law = bernoulli_matrix_law(&lambda)?;
    let law = match a.matrix {
        Which::B => b_law.clone(),
        Which::A => {
            if n > MODEL_N {
                return Err(CliError::Usage(format!("--matrix a needs n ≤ {MODEL_N}")));
            }
            let m = build_boolean_wigner(&profile, entry_kind(a))?;
            m.model.spectral_distribution(m.matrix(), Weighting::Trace)?
        }
    };
    let mut table = Table::with_header(&["location", "weight"]);
    for &(t, w) in law.atoms() {
        table.push(vec![num(t), num(w)]);
    }
    out.note("n", n);
    out.note("lambda", &lambda);
    if let Some((f, [lo, hi])) = limit {
        let cdf = ClosedFormCdf::new(f, vec![-hi, -lo, lo, hi]);
        out.note("levy_to_limit", levy_distance_cdf(&b_law, &cdf));
    }
    if n <= MODEL_N {
        for z in &a.z {
            out.rows.push(Row::new("wigner", n, z.0, wigner_gap(&profile, entry_kind(a), z.0)?));
        }
    } else {
        out.note("gap_rows", format!("skipped: the operator model is only built for n ≤ {MODEL_N}"));
    }
    out.table = Some(table);
    Ok(out)
}

fn entry_kind(a: &Args) -> EntryKind {
    match a.entries {
        Entries::Circular => EntryKind::Circular,
        Entries::Perturbed => EntryKind::Perturbed { gamma: a.gamma },
    }
}
