//! Parsers for flag values: complex numbers, laws and grids.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ncprob::linalg::{c, C64};
use ncprob::transform::{arcsine, semicircle, two_point, AtomicMeasure, MeasureJson, SpectralMeasure};
use serde::{Serialize, Serializer};

use crate::error::CliError;

/// A complex number written `a+bi`, `a-bi`, `bi` or `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cplx(pub C64);

impl FromStr for Cplx {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("`{s}` is not a complex number of the form a+bi");
        let t: String = s.chars().filter(|ch| !ch.is_whitespace()).collect();
        if t.is_empty() {
            return Err(bad());
        }
        let num = |p: &str| -> Result<f64, String> {
            match p {
                "" | "+" => Ok(1.0),
                "-" => Ok(-1.0),
                _ => p.parse::<f64>().map_err(|_| bad()),
            }
        };
        let Some(body) = t.strip_suffix('i') else {
            return Ok(Cplx(c(t.parse().map_err(|_| bad())?, 0.0)));
        };
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        match split {
            Some(k) => {
                let re = body[..k].parse::<f64>().map_err(|_| bad())?;
                Ok(Cplx(c(re, num(&body[k..])?)))
            }
            None => Ok(Cplx(c(0.0, num(body)?))),
        }
    }
}

impl fmt::Display for Cplx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let z = self.0;
        let sign = if z.im.is_sign_negative() { '-' } else { '+' };
        write!(f, "{}{}{}i", z.re, sign, z.im.abs())
    }
}

impl Serialize for Cplx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A one-dimensional law given on the command line.
///
/// Accepted forms: `bernoulli:V`, `two-point:P`, `dirac:A`, `semicircle:V`,
/// `arcsine:V`, `atoms:T/W;T/W;…`, or a path to a measure JSON file.
#[derive(Clone, Debug, PartialEq)]
pub struct Law {
    pub spec: String,
}

impl FromStr for Law {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let law = Law { spec: s.to_string() };
        law.parsed().map_err(|e| e.to_string())?;
        Ok(law)
    }
}

impl Serialize for Law {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Parsed {
    Atomic(AtomicMeasure),
    Semicircle(f64),
    Arcsine(f64),
    File(String),
}

fn number(spec: &str, value: &str) -> Result<f64, CliError> {
    value
        .parse::<f64>()
        .map_err(|_| CliError::Usage(format!("law `{spec}`: `{value}` is not a number")))
}

fn nonnegative(spec: &str, value: &str) -> Result<f64, CliError> {
    let v = number(spec, value)?;
    if v < 0.0 {
        return Err(CliError::Usage(format!("law `{spec}`: variance must be nonnegative")));
    }
    Ok(v)
}

impl Law {
    fn parsed(&self) -> Result<Parsed, CliError> {
        let spec = self.spec.as_str();
        // bare names take unit variance
        let split = match spec {
            "bernoulli" | "semicircle" | "arcsine" => Some((spec, "1")),
            _ => spec.split_once(':'),
        };
        let Some((name, value)) = split else {
            return Ok(Parsed::File(spec.to_string()));
        };
        Ok(match name {
            "bernoulli" => Parsed::Atomic(AtomicMeasure::bernoulli(nonnegative(spec, value)?)),
            "two-point" => Parsed::Atomic(two_point(number(spec, value)?)?),
            "dirac" => Parsed::Atomic(AtomicMeasure::dirac(number(spec, value)?)),
            "semicircle" => Parsed::Semicircle(nonnegative(spec, value)?),
            "arcsine" => Parsed::Arcsine(nonnegative(spec, value)?),
            "atoms" => {
                let atoms = value
                    .split(';')
                    .map(|pair| {
                        let (t, w) = pair
                            .split_once('/')
                            .ok_or_else(|| CliError::Usage(format!("law `{spec}`: atoms are written t/w")))?;
                        Ok((number(spec, t)?, number(spec, w)?))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                Parsed::Atomic(AtomicMeasure::new(atoms)?)
            }
            _ if Path::new(spec).exists() => Parsed::File(spec.to_string()),
            _ => return Err(CliError::Usage(format!("unknown law `{spec}`"))),
        })
    }

    pub fn measure(&self) -> Result<SpectralMeasure, CliError> {
        Ok(match self.parsed()? {
            Parsed::Atomic(m) => m.into(),
            Parsed::Semicircle(v) => semicircle(v),
            Parsed::Arcsine(v) => arcsine(v),
            Parsed::File(path) => read_measure(&path)?,
        })
    }

    /// The law as a finitely supported measure, when it is one.
    pub fn atomic(&self) -> Result<AtomicMeasure, CliError> {
        match self.measure()? {
            SpectralMeasure::Atomic(m) => Ok(m),
            _ => Err(CliError::Usage(format!("law `{}` is not finitely supported", self.spec))),
        }
    }

    /// Moments `m_0..=m_order`, in closed form for the named laws.
    pub fn moments(&self, order: usize) -> Result<Vec<f64>, CliError> {
        let even = |v: f64, coeff: &dyn Fn(usize) -> f64| -> Vec<f64> {
            (0..=order)
                .map(|k| if k % 2 == 1 { 0.0 } else { coeff(k / 2) * v.powi((k / 2) as i32) })
                .collect()
        };
        Ok(match self.parsed()? {
            Parsed::Atomic(m) => (0..=order).map(|k| m.moment(k as i32)).collect(),
            Parsed::Semicircle(v) => even(v, &|k| binomial(2 * k, k) / (k + 1) as f64),
            Parsed::Arcsine(v) => even(v, &|k| binomial(2 * k, k) / 2f64.powi(k as i32)),
            Parsed::File(path) => match read_measure(&path)? {
                SpectralMeasure::Atomic(m) => (0..=order).map(|k| m.moment(k as i32)).collect(),
                other => ncprob::transform::moments_from_transform(&other, order)?,
            },
        })
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

pub fn read_measure(path: &str) -> Result<SpectralMeasure, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read measure `{path}`: {e}")))?;
    let json: MeasureJson = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("measure `{path}`: {e}")))?;
    Ok(SpectralMeasure::try_from(json)?)
}

/// An evenly spaced grid written `lo:hi:count`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || format!("`{s}` is not a grid lo:hi:count");
        let [lo, hi, count] = parts[..] else { return Err(bad()) };
        let grid = Grid {
            lo: lo.parse().map_err(|_| bad())?,
            hi: hi.parse().map_err(|_| bad())?,
            count: count.parse().map_err(|_| bad())?,
        };
        if !(grid.lo < grid.hi) || grid.count < 2 {
            return Err(format!("grid `{s}` needs lo < hi and at least two points"));
        }
        Ok(grid)
    }
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.lo + step * k as f64).collect()
    }
}
