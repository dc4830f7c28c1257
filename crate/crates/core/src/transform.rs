//! Scalar Cauchy and reciprocal Cauchy transforms, Boolean and monotone
//! convolution, Stieltjes inversion and distances between laws on `ℝ`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::Mul;
use std::sync::{Arc, RwLock};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, C64};
use crate::quad::{integrate_line, QuadOptions};

/// A finitely supported probability measure, atoms sorted by location.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    /// Validates weights (nonnegative, total 1 ± 1e-12), drops zero weights
    /// and merges coincident locations.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::with_merge(atoms, 0.0)
    }

    /// As [`AtomicMeasure::new`], merging atoms closer than `tol`.
    pub fn with_merge(atoms: impl IntoIterator<Item = (f64, f64)>, tol: f64) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if atoms.iter().any(|&(t, w)| !t.is_finite() || !w.is_finite() || w < 0.0) {
            return Err(invalid("atoms need finite locations and nonnegative weights"));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("atom weights sum to {total}, not 1")));
        }
        atoms.retain(|a| a.1 > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (t, w) in atoms {
            match merged.last_mut() {
                Some(last) if t - last.0 <= tol => {
                    last.0 = (last.0 * last.1 + t * w) / (last.1 + w);
                    last.1 += w;
                }
                _ => merged.push((t, w)),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn dirac(a: f64) -> Self {
        Self { atoms: vec![(a, 1.0)] }
    }

    /// Symmetric two-point law `½(δ_{-√v} + δ_{√v})`.
    pub fn bernoulli(variance: f64) -> Self {
        let s = variance.sqrt();
        if s == 0.0 {
            return Self::dirac(0.0);
        }
        Self {
            atoms: vec![(-s, 0.5), (s, 0.5)],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|&(t, w)| w * t.powi(k)).sum()
    }

    pub fn support_radius(&self) -> f64 {
        self.atoms.iter().map(|a| a.0.abs()).fold(0.0, f64::max)
    }

    /// Law of `s·x`.
    pub fn dilate(&self, s: f64) -> Self {
        let mut atoms: Vec<(f64, f64)> = self.atoms.iter().map(|&(t, w)| (s * t, w)).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { atoms }
    }

    /// `∫ (z − t)^{-1} dμ(t)` for any `z` off the atoms.
    pub fn cauchy_any(&self, z: C64) -> C64 {
        self.atoms.iter().map(|&(t, w)| c(w, 0.0) / (z - t)).sum()
    }
}

/// A density sampled on an increasing grid, integrated by the trapezoid rule.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledDensity {
    grid: Vec<f64>,
    density: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SampledDensity {
    pub fn new(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != density.len() {
            return Err(invalid("sampled density needs matching grid and values (at least two)"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid must be strictly increasing"));
        }
        if density.iter().any(|&r| r < 0.0 || !r.is_finite()) {
            return Err(invalid("density values must be finite and nonnegative"));
        }
        let mut cumulative = vec![0.0; grid.len()];
        for j in 1..grid.len() {
            cumulative[j] = cumulative[j - 1] + 0.5 * (density[j] + density[j - 1]) * (grid[j] - grid[j - 1]);
        }
        let total = *cumulative.last().unwrap();
        if (total - 1.0).abs() > 1e-6 {
            return Err(invalid(format!("density integrates to {total}, not 1")));
        }
        Ok(Self {
            grid,
            density,
            cumulative,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    fn weights(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.grid.len();
        (0..n).map(move |j| {
            let left = if j > 0 { self.grid[j] - self.grid[j - 1] } else { 0.0 };
            let right = if j + 1 < n { self.grid[j + 1] - self.grid[j] } else { 0.0 };
            (self.grid[j], 0.5 * (left + right) * self.density[j])
        })
    }

    fn cdf(&self, t: f64) -> f64 {
        let g = &self.grid;
        if t <= g[0] {
            return 0.0;
        }
        if t >= *g.last().unwrap() {
            return 1.0;
        }
        let j = g.partition_point(|&x| x <= t) - 1;
        let h = t - g[j];
        let slope = (self.density[j + 1] - self.density[j]) / (g[j + 1] - g[j]);
        (self.cumulative[j] + self.density[j] * h + 0.5 * slope * h * h).min(1.0)
    }
}

type CauchyFn = dyn Fn(C64) -> C64 + Send + Sync;

/// A law known only through its Cauchy transform on `ℂ⁺`.
#[derive(Clone)]
pub struct TransformMeasure {
    g: Arc<CauchyFn>,
    radius: Option<f64>,
    label: String,
    cache: Option<Arc<RwLock<HashMap<(u64, u64), C64>>>>,
}

impl std::fmt::Debug for TransformMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformMeasure")
            .field("label", &self.label)
            .field("radius", &self.radius)
            .finish()
    }
}

impl TransformMeasure {
    /// `g` must be the Cauchy transform of a probability measure on `ℂ⁺`;
    /// `radius` is a known bound on the support, if any.
    pub fn new(label: impl Into<String>, radius: Option<f64>, g: impl Fn(C64) -> C64 + Send + Sync + 'static) -> Self {
        Self {
            g: Arc::new(g),
            radius,
            label: label.into(),
            cache: None,
        }
    }

    /// Memoizes evaluations keyed by the exact bits of `z`.
    pub fn cached(mut self) -> Self {
        self.cache = Some(Arc::new(RwLock::new(HashMap::new())));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn eval(&self, z: C64) -> C64 {
        let Some(cache) = &self.cache else {
            return (self.g)(z);
        };
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(v) = cache.read().expect("cache lock").get(&key) {
            return *v;
        }
        let v = (self.g)(z);
        cache.write().expect("cache lock").insert(key, v);
        v
    }
}

/// A probability measure on `ℝ` in one of three representations.
#[derive(Clone, Debug)]
pub enum SpectralMeasure {
    Atomic(AtomicMeasure),
    Sampled(SampledDensity),
    Transform(TransformMeasure),
}

impl From<AtomicMeasure> for SpectralMeasure {
    fn from(m: AtomicMeasure) -> Self {
        Self::Atomic(m)
    }
}

/// JSON form of a measure: `{"kind":"atomic","atoms":[[t,w],…]}` or
/// `{"kind":"sampled","grid":[…],"density":[…]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureJson {
    Atomic { atoms: Vec<[f64; 2]> },
    Sampled { grid: Vec<f64>, density: Vec<f64> },
}

impl TryFrom<MeasureJson> for SpectralMeasure {
    type Error = Error;

    fn try_from(j: MeasureJson) -> Result<Self> {
        match j {
            MeasureJson::Atomic { atoms } => Ok(Self::Atomic(AtomicMeasure::new(atoms.into_iter().map(|[t, w]| (t, w)))?)),
            MeasureJson::Sampled { grid, density } => Ok(Self::Sampled(SampledDensity::new(grid, density)?)),
        }
    }
}

fn require_upper(z: C64) -> Result<()> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("transform evaluated at {z}, which is not in the upper half-plane")))
    }
}

fn require_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("height ε = {eps} must be positive")))
    }
}

impl SpectralMeasure {
    /// JSON form; transform-defined laws have none (sample them first).
    pub fn to_json(&self) -> Result<MeasureJson> {
        match self {
            Self::Atomic(m) => Ok(MeasureJson::Atomic {
                atoms: m.atoms.iter().map(|&(t, w)| [t, w]).collect(),
            }),
            Self::Sampled(s) => Ok(MeasureJson::Sampled {
                grid: s.grid.clone(),
                density: s.density.clone(),
            }),
            Self::Transform(_) => Err(Error::Unsupported(
                "transform-defined measures have no JSON form; sample with `stieltjes_invert`".into(),
            )),
        }
    }

    /// Cauchy transform `G(z)` for `Im z > 0`.
    pub fn cauchy(&self, z: C64) -> Result<C64> {
        require_upper(z)?;
        Ok(self.cauchy_unchecked(z))
    }

    /// Cauchy transform off the real axis, using `G(z̄) = conj G(z)`.
    pub(crate) fn cauchy_unchecked(&self, z: C64) -> C64 {
        if z.im < 0.0 {
            return self.cauchy_unchecked(z.conj()).conj();
        }
        match self {
            Self::Atomic(m) => m.cauchy_any(z),
            Self::Sampled(s) => s.weights().map(|(t, w)| c(w, 0.0) / (z - t)).sum(),
            Self::Transform(t) => t.eval(z),
        }
    }

    /// Reciprocal Cauchy transform `F = 1/G`.
    pub fn f_transform(&self, z: C64) -> Result<C64> {
        Ok(self.cauchy(z)?.inv())
    }

    /// A bound on the support radius when one is known.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Self::Atomic(m) => Some(m.support_radius()),
            Self::Sampled(s) => Some(s.grid[0].abs().max(s.grid.last().unwrap().abs())),
            Self::Transform(t) => t.radius,
        }
    }

    /// Law of `s·x`: `G(z) = G_x(z/s)/s`.
    pub fn dilate(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(invalid("dilation factor must be positive"));
        }
        Ok(match self {
            Self::Atomic(m) => Self::Atomic(m.dilate(s)),
            other => {
                let inner = other.clone();
                Self::Transform(TransformMeasure::new(
                    format!("dil({s})"),
                    other.support_radius().map(|r| r * s),
                    move |z| inner.cauchy_unchecked(z / s) / s,
                ))
            }
        })
    }

    /// Density `−(1/π) Im G(t + iε)` on `grid`.
    pub fn stieltjes_invert(&self, eps: f64, grid: &[f64]) -> Result<Vec<f64>> {
        require_epsilon(eps)?;
        Ok(grid
            .iter()
            .map(|&t| (-self.cauchy_unchecked(c(t, eps)).im / PI).max(0.0))
            .collect())
    }
}

/// Monotone convolution `μ ▷ ν`, the law of `x + y` for `x ≺ y`:
/// `F_{μ▷ν} = F_μ ∘ F_ν`. The left operand belongs to the smaller algebra.
pub fn monotone_convolve(mu: &SpectralMeasure, nu: &SpectralMeasure) -> SpectralMeasure {
    let (m, n) = (mu.clone(), nu.clone());
    let radius = mu.support_radius().zip(nu.support_radius()).map(|(a, b)| a + b);
    SpectralMeasure::Transform(TransformMeasure::new("monotone", radius, move |z| {
        let w = n.cauchy_unchecked(z).inv();
        m.cauchy_unchecked(w)
    }))
}

/// Boolean convolution `μ ⊎ ν`: `F = F_μ + F_ν − z`.
pub fn boolean_convolve(mu: &SpectralMeasure, nu: &SpectralMeasure) -> SpectralMeasure {
    let (m, n) = (mu.clone(), nu.clone());
    let radius = mu.support_radius().zip(nu.support_radius()).map(|(a, b)| a + b);
    SpectralMeasure::Transform(TransformMeasure::new("boolean", radius, move |z| {
        (m.cauchy_unchecked(z).inv() + n.cauchy_unchecked(z).inv() - z).inv()
    }))
}

/// One step of a [`TransformChain`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainOp {
    /// `current ▷ operand`.
    MonotoneCompose,
    /// `current ⊎ operand`.
    BooleanAdd,
}

/// A base law followed by convolution steps, evaluated through `F`.
#[derive(Clone, Debug)]
pub struct TransformChain {
    pub base: SpectralMeasure,
    pub ops: Vec<(ChainOp, SpectralMeasure)>,
}

impl TransformChain {
    pub fn new(base: SpectralMeasure) -> Self {
        Self { base, ops: Vec::new() }
    }

    pub fn push(mut self, op: ChainOp, operand: SpectralMeasure) -> Self {
        self.ops.push((op, operand));
        self
    }

    /// `F` of the chain at `z`, checking that every intermediate `F` value
    /// stays at least as high as `z`.
    pub fn f_value(&self, z: C64) -> Result<C64> {
        require_upper(z)?;
        // Build the composite as nested closures: the k-th prefix law.
        let mut current = self.base.clone();
        for (op, operand) in &self.ops {
            let f_op = operand.f_transform(z)?;
            if f_op.im < z.im * (1.0 - 1e-12) {
                return Err(Error::Numerical(format!("F left the half-plane above z at {z}")));
            }
            current = match op {
                ChainOp::MonotoneCompose => monotone_convolve(&current, operand),
                ChainOp::BooleanAdd => boolean_convolve(&current, operand),
            };
        }
        current.f_transform(z)
    }

    pub fn into_measure(self) -> SpectralMeasure {
        self.ops.into_iter().fold(self.base, |acc, (op, operand)| match op {
            ChainOp::MonotoneCompose => monotone_convolve(&acc, &operand),
            ChainOp::BooleanAdd => boolean_convolve(&acc, &operand),
        })
    }
}

/// `√(z² − c)` with the branch asymptotic to `z`, which maps `ℂ⁺` to `ℂ⁺`.
fn sqrt_branch(z: C64, c0: f64) -> C64 {
    let w = (z * z - c0).sqrt();
    if w.im < 0.0 || (w.im == 0.0 && (w.re * z.re) < 0.0) {
        -w
    } else {
        w
    }
}

/// Semicircle law of variance `v`: `G = (z − √(z² − 4v))/(2v)`.
pub fn semicircle(v: f64) -> SpectralMeasure {
    SpectralMeasure::Transform(TransformMeasure::new(format!("semicircle({v})"), Some(2.0 * v.sqrt()), move |z| {
        if v == 0.0 {
            z.inv()
        } else {
            (z - sqrt_branch(z, 4.0 * v)) / (2.0 * v)
        }
    }))
}

/// Arcsine law of variance `v` on `(−√(2v), √(2v))`: `G = 1/√(z² − 2v)`.
pub fn arcsine(v: f64) -> SpectralMeasure {
    SpectralMeasure::Transform(TransformMeasure::new(format!("arcsine({v})"), Some((2.0 * v).sqrt()), move |z| {
        sqrt_branch(z, 2.0 * v).inv()
    }))
}

/// `m_0..=m_max` from the Cauchy-integral coefficients of `G` on a circle.
pub fn moments_from_transform(mu: &SpectralMeasure, max_order: usize) -> Result<Vec<f64>> {
    let proxy = second_moment_proxy(mu).max(0.0).sqrt();
    let radius = 2.0 + 2.0 * proxy.max(mu.support_radius().unwrap_or(0.0));
    let a = circle_moments(mu, max_order, radius);
    let b = circle_moments(mu, max_order, 1.5 * radius);
    let discrepancy = a
        .iter()
        .zip(&b)
        .enumerate()
        .map(|(k, (x, y))| (x - y).abs() / (1e-11 * (1.5 * radius).powi(k as i32 + 1) + 1e-8 * x.abs()))
        .fold(0.0, f64::max);
    if discrepancy > 1.0 || (a[0] - 1.0).abs() > 1e-8 {
        return Err(Error::Radius {
            radius,
            discrepancy: a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        });
    }
    Ok(a)
}

/// Estimates `m_2` from `Im G(iy) = −1/y + m_2/y³ + O(y^{-5})` at two heights.
fn second_moment_proxy(mu: &SpectralMeasure) -> f64 {
    let a = |y: f64| y.powi(3) * (mu.cauchy_unchecked(c(0.0, y)).im + 1.0 / y);
    let (y1, y2) = (1e3, 2e3);
    (4.0 * a(y2) - a(y1)) / 3.0
}

fn circle_moments(mu: &SpectralMeasure, max_order: usize, radius: f64) -> Vec<f64> {
    const NODES: usize = 1024;
    let mut sums = vec![C64::new(0.0, 0.0); max_order + 1];
    for j in 0..NODES / 2 {
        let theta = (j as f64 + 0.5) * 2.0 * PI / NODES as f64;
        let z = C64::from_polar(radius, theta);
        let g = mu.cauchy_unchecked(z);
        for (k, s) in sums.iter_mut().enumerate() {
            let zk = z.powu(k as u32 + 1);
            // The conjugate node contributes the complex conjugate.
            *s += 2.0 * (zk * g).re;
        }
    }
    sums.iter().map(|s| s.re / NODES as f64).collect()
}

/// Truncated power series in `u = 1/z`, coefficients `c[0..=order]`.
/// Cauchy product of two truncated power series.
pub fn series_mul<T: Copy + Zero + Mul<Output = T>>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().min(b.len());
    (0..n)
        .map(|k| (0..=k).fold(T::zero(), |acc, j| acc + a[j] * b[k - j]))
        .collect()
}

/// Moments `m_0..=m_order` of `μ₁ ▷ μ₂ ▷ ⋯ ▷ μ_k` from the moments of each
/// law, through the moment series `g(u) = Σ m_k u^k` and the composition
/// rule `g_{μ▷ν}(u) = g_ν(u) · g_μ(u g_ν(u))`.
pub fn monotone_convolution_moments<T: Copy + Zero + Mul<Output = T>>(laws: &[Vec<T>], order: usize) -> Result<Vec<T>> {
    let width = order + 1;
    if laws.is_empty() || laws.iter().any(|m| m.len() < width) {
        return Err(invalid(format!("every law needs moments m_0..=m_{order}")));
    }
    let mut acc: Vec<T> = laws.last().unwrap()[..width].to_vec();
    for mu in laws[..laws.len() - 1].iter().rev() {
        // s = u·g_acc(u)
        let mut s = vec![T::zero(); width];
        s[1..].copy_from_slice(&acc[..width - 1]);
        // Horner: g_μ(s) = m_0 + s(m_1 + s(m_2 + ⋯))
        let mut inner = vec![T::zero(); width];
        for &m in mu[..width].iter().rev() {
            inner = series_mul(&inner, &s);
            inner[0] = inner[0] + m;
        }
        acc = series_mul(&acc, &inner);
    }
    Ok(acc)
}

/// Centered two-point law of variance 1 with mass `p` at `√((1−p)/p)`.
pub fn two_point(p: f64) -> Result<AtomicMeasure> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("two-point weight must lie in (0, 1)"));
    }
    AtomicMeasure::new([(((1.0 - p) / p).sqrt(), p), (-(p / (1.0 - p)).sqrt(), 1.0 - p)])
}

/// Access to a cumulative distribution function.
pub trait Cdf {
    fn cdf(&self, t: f64) -> f64;
    fn cdf_left(&self, t: f64) -> f64;
    /// Points where the CDF jumps or changes slope.
    fn breakpoints(&self) -> Vec<f64>;
}

impl Cdf for AtomicMeasure {
    fn cdf(&self, t: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.0 <= t);
        self.atoms[..k].iter().map(|a| a.1).sum::<f64>().min(1.0)
    }
    fn cdf_left(&self, t: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.0 < t);
        self.atoms[..k].iter().map(|a| a.1).sum::<f64>().min(1.0)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.0).collect()
    }
}

impl Cdf for SampledDensity {
    fn cdf(&self, t: f64) -> f64 {
        SampledDensity::cdf(self, t)
    }
    fn cdf_left(&self, t: f64) -> f64 {
        SampledDensity::cdf(self, t)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.grid.clone()
    }
}

/// A continuous CDF given in closed form.
pub struct ClosedFormCdf<F> {
    f: F,
    knots: Vec<f64>,
}

impl<F: Fn(f64) -> f64> ClosedFormCdf<F> {
    /// `knots` are points where the density is singular or the support ends.
    pub fn new(f: F, knots: Vec<f64>) -> Self {
        Self { f, knots }
    }
}

impl<F: Fn(f64) -> f64> Cdf for ClosedFormCdf<F> {
    fn cdf(&self, t: f64) -> f64 {
        (self.f)(t)
    }
    fn cdf_left(&self, t: f64) -> f64 {
        (self.f)(t)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.knots.clone()
    }
}

/// Largest violation of the Lévy band condition at width `eps`.
fn band_violation(mu: &dyn Cdf, nu: &dyn Cdf, eps: f64) -> f64 {
    let bm = mu.breakpoints();
    let bn = nu.breakpoints();
    let mut worst = f64::NEG_INFINITY;
    // F_μ(t − ε) − ε ≤ F_ν(t)
    for t in bm.iter().map(|a| a + eps).chain(bn.iter().copied()) {
        worst = worst.max(mu.cdf(t - eps) - eps - nu.cdf(t));
        worst = worst.max(mu.cdf_left(t - eps) - eps - nu.cdf_left(t));
    }
    // F_ν(t) ≤ F_μ(t + ε) + ε
    for t in bm.iter().map(|a| a - eps).chain(bn.iter().copied()) {
        worst = worst.max(nu.cdf(t) - mu.cdf(t + eps) - eps);
        worst = worst.max(nu.cdf_left(t) - mu.cdf_left(t + eps) - eps);
    }
    worst
}

/// Lévy distance between two laws given through their CDFs, by bisection
/// to `1e-9`, resolving ties toward the larger width.
pub fn levy_distance_cdf(mu: &dyn Cdf, nu: &dyn Cdf) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    if band_violation(mu, nu, 0.0) <= 1e-14 {
        return 0.0;
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if band_violation(mu, nu, mid) <= 1e-14 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn atomic(m: &SpectralMeasure) -> Result<&AtomicMeasure> {
    match m {
        SpectralMeasure::Atomic(a) => Ok(a),
        _ => Err(Error::Unsupported("this distance needs atomic measures".into())),
    }
}

/// Lévy distance of two atomic measures.
pub fn levy_distance(mu: &SpectralMeasure, nu: &SpectralMeasure) -> Result<f64> {
    Ok(levy_distance_cdf(atomic(mu)?, atomic(nu)?))
}

/// `sup_t |F_μ(t) − F_ν(t)|` for laws given through their CDFs.
pub fn kolmogorov_distance_cdf(mu: &dyn Cdf, nu: &dyn Cdf) -> f64 {
    mu.breakpoints()
        .into_iter()
        .chain(nu.breakpoints())
        .map(|t| (mu.cdf(t) - nu.cdf(t)).abs().max((mu.cdf_left(t) - nu.cdf_left(t)).abs()))
        .fold(0.0, f64::max)
}

/// Kolmogorov distance of two atomic measures.
pub fn kolmogorov_distance(mu: &SpectralMeasure, nu: &SpectralMeasure) -> Result<f64> {
    Ok(kolmogorov_distance_cdf(atomic(mu)?, atomic(nu)?))
}

fn line_breaks(m: &SpectralMeasure) -> Vec<f64> {
    match m {
        SpectralMeasure::Atomic(a) => a.breakpoints(),
        SpectralMeasure::Sampled(s) => vec![s.grid[0], *s.grid.last().unwrap()],
        SpectralMeasure::Transform(t) => t.radius.map(|r| vec![-r, 0.0, r]).unwrap_or_default(),
    }
}

fn line_scale(mu: &SpectralMeasure, nu: &SpectralMeasure) -> f64 {
    1.0f64
        .max(mu.support_radius().unwrap_or(1.0))
        .max(nu.support_radius().unwrap_or(1.0))
}

/// `2√(ε/π) + (1/π)∫ |Im G_μ(t+iε) − Im G_ν(t+iε)| dt`, an upper bound on
/// the Lévy distance. The integral runs over all of `ℝ` through a rational
/// substitution, so no tail cutoff is needed.
pub fn levy_bound_from_cauchy(mu: &SpectralMeasure, nu: &SpectralMeasure, eps: f64, opts: QuadOptions) -> Result<f64> {
    require_epsilon(eps)?;
    let mut breaks = line_breaks(mu);
    breaks.extend(line_breaks(nu));
    let integral = integrate_line(
        |t| {
            let z = c(t, eps);
            (mu.cauchy_unchecked(z).im - nu.cauchy_unchecked(z).im).abs()
        },
        0.0,
        line_scale(mu, nu),
        &breaks,
        opts,
    )?;
    Ok(2.0 * (eps / PI).sqrt() + integral / PI)
}

/// `‖G(z)‖²_{L²} = Σ w_k / |z − t_k|²` for an atomic law.
pub fn resolvent_l2_norm_sq(mu: &AtomicMeasure, z: C64) -> f64 {
    mu.atoms.iter().map(|&(t, w)| w / (z - t).norm_sqr()).sum()
}

/// `∫ ‖G(t + iε)‖²_{L²} dt`, which equals `π/ε` for every probability law.
pub fn resolvent_l2_integral(mu: &AtomicMeasure, eps: f64) -> Result<f64> {
    require_epsilon(eps)?;
    integrate_line(
        |t| resolvent_l2_norm_sq(mu, c(t, eps)),
        0.0,
        1.0f64.max(mu.support_radius()),
        &mu.breakpoints(),
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_panels: 50_000,
        },
    )
}
