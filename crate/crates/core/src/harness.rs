//! Both sides of the Berry–Esseen type bounds: Lindeberg replacement terms,
//! CLT and comparison gaps, fourth-moment and Wigner matrix estimates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, eye, hermitian_eigen, is_hermitian, inv_imag_norm, inverse, kron, op_norm, scalar, sup_over_unitaries, unit, vacuum_frame, zeros, Mat, C64};
use crate::linalg::{random_hermitian, random_unitary};
use crate::model::{boolean_star_family, build_boolean_wigner, monotone_product_family, EntryKind, Factor, OperatorModel, VarianceProfile};
use rand::Rng;
use crate::quad::QuadOptions;
use crate::transform::{arcsine, levy_bound_from_cauchy, monotone_convolution_moments, AtomicMeasure, SpectralMeasure, TransformMeasure};

/// Default size of the unitary net used for suprema over the unit ball.
pub const DEFAULT_NET: usize = 200;

/// Which CLT a bound belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Boolean,
    Monotone,
    Infinitesimal,
}

impl BoundKind {
    /// Ratio `α₄(target)/α₂²` of the limit element.
    fn kappa(self) -> f64 {
        match self {
            Self::Monotone => 1.5,
            _ => 1.0,
        }
    }
}

/// `α₂ = max ‖E[x²]‖`, `α₄ = max sup_{‖b‖=1} ‖E[x b* x² b x]‖` and
/// `α̃₄ = max ‖E[x⁴]‖` over a family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentFunctionals {
    pub alpha2: f64,
    pub alpha4: f64,
    pub alpha4_tilde: f64,
}

impl MomentFunctionals {
    /// The functionals of `x/s` given those of `x`.
    pub fn scaled(self, s: f64) -> Self {
        Self {
            alpha2: self.alpha2 / s.powi(2),
            alpha4: self.alpha4 / s.powi(4),
            alpha4_tilde: self.alpha4_tilde / s.powi(4),
        }
    }

    /// Scalar functionals from the moments of a centered law.
    pub fn of_measure(mu: &AtomicMeasure) -> Result<Self> {
        check_centered_measure(mu)?;
        let m4 = mu.moment(4);
        Ok(Self {
            alpha2: mu.moment(2),
            alpha4: m4,
            alpha4_tilde: m4,
        })
    }
}

fn check_centered_measure(mu: &AtomicMeasure) -> Result<()> {
    let m1 = mu.moment(1);
    if m1.abs() > 1e-10 {
        return Err(invalid(format!("summand is not centered (mean {m1:e})")));
    }
    Ok(())
}

/// Computes the functionals of the selected elements of a model.
pub fn moment_functionals(model: &OperatorModel, family: &[usize], net: usize, seed: u64) -> Result<MomentFunctionals> {
    let d = model.d();
    let mut out = MomentFunctionals::default();
    for &k in family {
        let x = model.element(k);
        let mean = model.expect(x)?;
        if op_norm(&mean) > 1e-10 {
            return Err(invalid(format!("element {k} is not centered (‖E[x]‖ = {:e})", op_norm(&mean))));
        }
        if !is_hermitian(x, 1e-12) {
            return Err(invalid(format!("element {k} is not self-adjoint")));
        }
        let ones = vec![eye(d); 3];
        out.alpha2 = out.alpha2.max(op_norm(&model.space.expect_word(&[x, x], &ones[..1])));
        out.alpha4_tilde = out.alpha4_tilde.max(op_norm(&model.space.expect_word(&[x, x, x, x], &ones)));
        // E[x b* x² b x] = Y*Y with Y = x (b ⊗ 1) x Ξ = Σ_{a,k} b_ak U_ak,
        // so each net point costs O(d⁴ D) after d² products.
        let dim = model.space.dim();
        let v = x * vacuum_frame(d, model.space.state());
        let u: Vec<Mat> = (0..d * d)
            .map(|ak| x.columns((ak / d) * dim, dim) * v.rows((ak % d) * dim, dim))
            .collect();
        let word = |b: &Mat| {
            let mut y = Mat::zeros(d * dim, d);
            for (ak, m) in u.iter().enumerate() {
                y += m * b[(ak / d, ak % d)];
            }
            op_norm(&y).powi(2)
        };
        out.alpha4 = out.alpha4.max(sup_over_unitaries(d, net, seed ^ k as u64, word));
    }
    Ok(out)
}

/// Inputs to [`bound_rhs`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundInputs {
    /// Functionals of the two families (Boolean and monotone bounds).
    Moments { x: MomentFunctionals, y: MomentFunctionals },
    /// Largest norms in each family (infinitesimal bound).
    Norms { x_max: f64, y_max: f64 },
}

/// Right-hand side of the Lindeberg bound for `N` pairs of summands:
/// `‖(Im b)⁻¹‖⁴ √α₂(x) (√α₄(x) + √α₄(y)) N` or
/// `2N ‖(Im b)⁻¹‖⁴ (max‖xᵢ‖³ + max‖yᵢ‖³)`.
pub fn bound_rhs(kind: BoundKind, inputs: &BoundInputs, b: &Mat, n: usize) -> Result<f64> {
    let r4 = inv_imag_norm(b)?.powi(4);
    let nf = n as f64;
    match (kind, inputs) {
        (BoundKind::Boolean | BoundKind::Monotone, BoundInputs::Moments { x, y }) => {
            Ok(r4 * x.alpha2.sqrt() * (x.alpha4.sqrt() + y.alpha4.sqrt()) * nf)
        }
        (BoundKind::Infinitesimal, BoundInputs::Norms { x_max, y_max }) => Ok(2.0 * nf * r4 * (x_max.powi(3) + y_max.powi(3))),
        _ => Err(invalid("bound kind and inputs do not match")),
    }
}

/// The three replacement terms at step `i` (1-based):
/// `A = G⁰xG⁰ − G⁰yG⁰`, `B = G⁰(xG⁰)² − G⁰(yG⁰)²`,
/// `C = G_{zᵢ}(xG⁰)³ − G_{zᵢ₋₁}(yG⁰)³` with `G⁰ = G_{zᵢ⁰}(b)`.
#[derive(Clone, Debug)]
pub struct LindebergTerms {
    pub i: usize,
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
}

impl LindebergTerms {
    pub fn sum(&self) -> Mat {
        &self.a + &self.b + &self.c
    }
}

/// `zᵢ = Σ_{j≤i} xⱼ + Σ_{j>i} yⱼ` as a matrix.
fn hybrid(model: &OperatorModel, xs: &[usize], ys: &[usize], i: usize, skip: bool) -> Mat {
    let upto = if skip { i - 1 } else { i };
    model.sum(xs[..upto].iter().chain(&ys[i..]).copied())
}

fn check_families(xs: &[usize], ys: &[usize]) -> Result<()> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(invalid("the two families need the same positive length"));
    }
    Ok(())
}

pub fn lindeberg_terms(model: &OperatorModel, xs: &[usize], ys: &[usize], b: &Mat, i: usize) -> Result<LindebergTerms> {
    check_families(xs, ys)?;
    if i == 0 || i > xs.len() {
        return Err(invalid(format!("step {i} outside 1..={}", xs.len())));
    }
    let g0 = model.resolvent(&hybrid(model, xs, ys, i, true), b)?;
    let gi = model.resolvent(&hybrid(model, xs, ys, i, false), b)?;
    let gprev = model.resolvent(&hybrid(model, xs, ys, i - 1, false), b)?;
    let xg = model.element(xs[i - 1]) * &g0;
    let yg = model.element(ys[i - 1]) * &g0;
    let (xg2, yg2) = (&xg * &xg, &yg * &yg);
    Ok(LindebergTerms {
        i,
        a: &g0 * (&xg - &yg),
        b: &g0 * (&xg2 - &yg2),
        c: gi * (&xg2 * &xg) - gprev * (&yg2 * &yg),
    })
}

/// `(E[Aᵢ], E[Bᵢ])` through one factorization of `b ⊗ 1 − zᵢ⁰` applied to
/// the vacuum block column, without forming any resolvent.
pub fn lindeberg_expectations(model: &OperatorModel, xs: &[usize], ys: &[usize], b: &Mat, i: usize) -> Result<(Mat, Mat)> {
    check_families(xs, ys)?;
    if i == 0 || i > xs.len() {
        return Err(invalid(format!("step {i} outside 1..={}", xs.len())));
    }
    let lu = (model.space.amplify(b) - hybrid(model, xs, ys, i, true)).lu();
    let solve = |v: &Mat| lu.solve(v).ok_or_else(|| Error::Numerical("resolvent system is singular".into()));
    let frame = vacuum_frame(model.d(), model.space.state());
    let r = solve(&frame)?;
    let (x, y) = (model.element(xs[i - 1]), model.element(ys[i - 1]));
    let (gx, gy) = (solve(&(x * &r))?, solve(&(y * &r))?);
    let (gxx, gyy) = (solve(&(x * &gx))?, solve(&(y * &gy))?);
    let e = |m: Mat| frame.adjoint() * m;
    Ok((e(gx - gy), e(gxx - gyy)))
}

/// `‖Σᵢ (Aᵢ + Bᵢ + Cᵢ) − (G_{z_N} − G_{z_0})‖`.
pub fn telescoping_residual(model: &OperatorModel, xs: &[usize], ys: &[usize], b: &Mat) -> Result<f64> {
    check_families(xs, ys)?;
    let n = xs.len();
    let mut total = zeros(model.space.total_dim());
    for i in 1..=n {
        total += lindeberg_terms(model, xs, ys, b, i)?.sum();
    }
    let gn = model.resolvent(&model.sum(xs.iter().copied()), b)?;
    let g0 = model.resolvent(&model.sum(ys.iter().copied()), b)?;
    Ok(op_norm(&(total - (gn - g0))))
}

/// Residual of `x⁻¹ − y⁻¹ = Σ_{k=1}^m y⁻¹[(y−x)y⁻¹]^k + x⁻¹[(y−x)y⁻¹]^{m+1}`.
pub fn taylor_residual(x: &Mat, y: &Mat, m: usize) -> Result<f64> {
    let (xi, yi) = (inverse(x)?, inverse(y)?);
    let step = (y - x) * &yi;
    let mut power = step.clone();
    let mut rhs = zeros(x.nrows());
    for _ in 0..m {
        rhs += &yi * &power;
        power = &power * &step;
    }
    rhs += &xi * power;
    Ok(op_norm(&(xi - yi - rhs)))
}

/// For `u` Boolean independent from `x`, with `G = G_u(b)`: the residuals of
/// `E[GxG] = E[G]E[x]E[G]` and `E[GxGxG] = E[G]E[x b⁻¹ x]E[G]`.
pub fn boolean_resolvent_identities(model: &OperatorModel, u: &[usize], x: usize, b: &Mat) -> Result<(f64, f64)> {
    let g = model.resolvent(&model.sum(u.iter().copied()), b)?;
    let xm = model.element(x);
    let eg = model.expect(&g)?;
    let first = model.expect(&(&g * xm * &g))? - &eg * model.expect(xm)? * &eg;
    let binv = model.space.amplify(&inverse(b)?);
    let second = model.expect(&(&g * xm * &g * xm * &g))? - &eg * model.expect(&(xm * binv * xm))? * &eg;
    Ok((op_norm(&first), op_norm(&second)))
}

/// For `x ≺ w ≺ y` in one monotone model, the residual of
/// `E[G_{x+y}(b₁) w G_{x+y}(b₂)] = E[G_x(E[G_y(b₁)]⁻¹) E[w] G_x(E[G_y(b₂)]⁻¹)]`.
pub fn monotone_subordination_check(model: &OperatorModel, x: &Mat, y: &Mat, w: &Mat, b1: &Mat, b2: &Mat) -> Result<f64> {
    let s = x + y;
    let lhs = model.expect(&(model.resolvent(&s, b1)? * w * model.resolvent(&s, b2)?))?;
    let omega = |b: &Mat| -> Result<Mat> { inverse(&model.cauchy(y, b)?) };
    let (o1, o2) = (omega(b1)?, omega(b2)?);
    let ew = model.space.amplify(&model.expect(w)?);
    let rhs = model.expect(&(model.resolvent(x, &o1)? * ew * model.resolvent(x, &o2)?))?;
    Ok(op_norm(&(lhs - rhs)))
}

/// A completely positive map `η(b) = Σ K_r* b K_r` on `M_d`.
#[derive(Clone, Debug)]
pub struct KrausMap {
    kraus: Vec<Mat>,
}

impl KrausMap {
    pub fn new(kraus: Vec<Mat>) -> Result<Self> {
        let d = kraus.first().map(|k| k.nrows()).ok_or_else(|| invalid("need at least one Kraus operator"))?;
        if kraus.iter().any(|k| k.nrows() != d || k.ncols() != d) {
            return Err(invalid("Kraus operators must share one square shape"));
        }
        Ok(Self { kraus })
    }

    /// Scalar map `b ↦ v b`.
    pub fn scalar(v: f64) -> Result<Self> {
        if v < 0.0 {
            return Err(invalid("variance must be nonnegative"));
        }
        Self::new(vec![scalar(1, c(v.sqrt(), 0.0))])
    }

    /// Kraus form of a map given by its action, through the Choi matrix.
    /// Fails if the map is not completely positive.
    pub fn from_map(d: usize, eta: impl Fn(&Mat) -> Mat) -> Result<Self> {
        let mut choi = zeros(d * d);
        for i in 0..d {
            for j in 0..d {
                choi += kron(&unit(d, i, j), &eta(&unit(d, i, j)));
            }
        }
        let (vals, vecs) = hermitian_eigen(&choi);
        let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if vals.iter().any(|&v| v < -1e-10 * top.max(1.0)) || op_norm(&(&choi - choi.adjoint())) > 1e-10 * top.max(1.0) {
            return Err(invalid("map is not completely positive"));
        }
        let kraus: Vec<Mat> = vals
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 1e-14 * top.max(1e-300))
            .map(|(r, &v)| Mat::from_fn(d, d, |i, a| (vecs[(i * d + a, r)] * v.sqrt()).conj()))
            .collect();
        if kraus.is_empty() {
            return Self::new(vec![zeros(d)]);
        }
        Self::new(kraus)
    }

    pub fn d(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn kraus(&self) -> &[Mat] {
        &self.kraus
    }

    pub fn apply(&self, b: &Mat) -> Mat {
        self.kraus.iter().fold(zeros(self.d()), |acc, k| acc + k.adjoint() * b * k)
    }

    /// `id_k ⊗ η` on `M_k(M_d)`.
    pub fn amplified(&self, k: usize) -> Self {
        Self {
            kraus: self.kraus.iter().map(|m| kron(&eye(k), m)).collect(),
        }
    }

    /// `s·η`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            kraus: self.kraus.iter().map(|m| m * c(s.sqrt(), 0.0)).collect(),
        }
    }
}

/// `‖η₁ − η₀‖` estimated as a supremum over unitaries.
pub fn map_distance(eta0: &KrausMap, eta1: &KrausMap, net: usize, seed: u64) -> Result<f64> {
    if eta0.d() != eta1.d() {
        return Err(invalid("maps act on different algebras"));
    }
    Ok(sup_over_unitaries(eta0.d(), net, seed, |u| op_norm(&(eta1.apply(u) - eta0.apply(u)))))
}

/// Cauchy transform of the operator-valued Bernoulli element,
/// `G(b) = (b − η(b⁻¹))⁻¹`.
pub fn ov_bernoulli_cauchy(eta: &KrausMap, b: &Mat) -> Result<Mat> {
    inverse(&(b - eta.apply(&inverse(b)?)))
}

/// Number of RK4 steps per unit time in [`arcsine_flow`].
pub const FLOW_STEPS: usize = 400;

/// Solves `F′ = −η(F⁻¹)`, `F(0) = b` up to time `t`; `F(1)⁻¹` is the Cauchy
/// transform of the operator-valued arcsine element of variance `η`.
pub fn arcsine_flow(eta: &KrausMap, b: &Mat, t: f64, steps: usize) -> Result<Mat> {
    let rhs = |f: &Mat| -> Result<Mat> { Ok(-eta.apply(&inverse(f)?)) };
    let h = c(t / steps.max(1) as f64, 0.0);
    let mut f = b.clone();
    for _ in 0..steps.max(1) {
        let k1 = rhs(&f)?;
        let k2 = rhs(&(&f + &k1 * (h * 0.5)))?;
        let k3 = rhs(&(&f + &k2 * (h * 0.5)))?;
        let k4 = rhs(&(&f + &k3 * h))?;
        f += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * (h / 6.0);
    }
    Ok(f)
}

/// Cauchy transform of the operator-valued arcsine element.
pub fn ov_arcsine_cauchy(eta: &KrausMap, b: &Mat) -> Result<Mat> {
    inverse(&arcsine_flow(eta, b, 1.0, FLOW_STEPS)?)
}

/// Cauchy transform at `b` of `dil_{n^{-1/2}}(ν_{η₁} ▷ ⋯ ▷ ν_{η_n})`.
pub fn generalized_arcsine_cauchy(etas: &[KrausMap], b: &Mat) -> Result<Mat> {
    let n = etas.len().max(1) as f64;
    let steps = (FLOW_STEPS as f64 / n).ceil() as usize;
    let mut f = b.clone();
    for eta in etas.iter().rev() {
        f = arcsine_flow(eta, &f, 1.0 / n, steps)?;
    }
    inverse(&f)
}

/// One row of a bound comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub lhs: f64,
    pub rhs: f64,
}

impl Gap {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    Ok(())
}

fn require_upper(z: C64) -> Result<()> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("{z} is not in the upper half-plane")));
    }
    Ok(())
}

/// Law of `X_n = (x₁ + ⋯ + x_n)/√n` for independent copies of `ν`.
pub fn clt_sum_measure(kind: BoundKind, nu: &AtomicMeasure, n: usize) -> Result<SpectralMeasure> {
    check_n(n)?;
    let y = nu.dilate(1.0 / (n as f64).sqrt());
    let radius = Some((n as f64).sqrt() * nu.support_radius());
    let g: Box<dyn Fn(C64) -> C64 + Send + Sync> = match kind {
        BoundKind::Boolean => {
            let nf = n as f64;
            Box::new(move |z| (z + (y.cauchy_any(z).inv() - z) * nf).inv())
        }
        BoundKind::Monotone => Box::new(move |z| {
            let mut w = z;
            for _ in 0..n {
                w = y.cauchy_any(w).inv();
            }
            w.inv()
        }),
        BoundKind::Infinitesimal => return Err(invalid("no scalar CLT sum for the infinitesimal kind")),
    };
    Ok(SpectralMeasure::Transform(TransformMeasure::new(format!("{kind:?} sum"), radius, g)))
}

/// The scalar CLT limit of variance `v`: Bernoulli or arcsine.
pub fn clt_target(kind: BoundKind, v: f64) -> Result<SpectralMeasure> {
    match kind {
        BoundKind::Boolean => Ok(AtomicMeasure::bernoulli(v).into()),
        BoundKind::Monotone => Ok(arcsine(v)),
        BoundKind::Infinitesimal => Err(invalid("no scalar CLT target for the infinitesimal kind")),
    }
}

/// Scalar CLT gap `|G_{X_n}(z) − G_target(z)|` against
/// `n^{-1/2} Im(z)^{-4} √α₂ (√α₄ + √(κα₂²))`.
pub fn clt_gap(kind: BoundKind, nu: &AtomicMeasure, n: usize, z: C64) -> Result<Gap> {
    require_upper(z)?;
    let f = MomentFunctionals::of_measure(nu)?;
    let sum = clt_sum_measure(kind, nu, n)?;
    let target = clt_target(kind, f.alpha2)?;
    let lhs = (sum.cauchy(z)? - target.cauchy(z)?).norm();
    let rhs = clt_rhs(kind, f, n, &scalar(1, z))?;
    Ok(Gap { lhs, rhs })
}

/// The CLT bound through [`bound_rhs`], with the target's `α₄` in closed
/// form and summands scaled by `1/√n`.
pub fn clt_rhs(kind: BoundKind, f: MomentFunctionals, n: usize, b: &Mat) -> Result<f64> {
    check_n(n)?;
    let s = (n as f64).sqrt();
    let x = f.scaled(s);
    let target_alpha4 = kind.kappa() * f.alpha2 * f.alpha2;
    let y = MomentFunctionals {
        alpha2: f.alpha2,
        alpha4: target_alpha4,
        alpha4_tilde: target_alpha4,
    }
    .scaled(s);
    bound_rhs(kind, &BoundInputs::Moments { x, y }, b, n)
}

/// Operator-valued CLT gap on a model: `X_n` is the sum of the selected
/// elements (each already scaled), compared with the Bernoulli element of
/// covariance `Σ E[xⱼ b xⱼ]` or the generalized arcsine element.
pub fn clt_gap_model(kind: BoundKind, model: &OperatorModel, family: &[usize], b: &Mat, net: usize, seed: u64) -> Result<Gap> {
    let n = family.len();
    check_n(n)?;
    let d = model.d();
    let etas = family
        .iter()
        .map(|&k| {
            let x = model.element(k);
            KrausMap::from_map(d, |m| model.expect(&(x * model.space.amplify(m) * x)).expect("sized"))
        })
        .collect::<Result<Vec<_>>>()?;
    let lhs_model = model.cauchy(&model.sum(family.iter().copied()), b)?;
    let target = match kind {
        BoundKind::Boolean => {
            let total = KrausMap::new(etas.iter().flat_map(|e| e.kraus().to_vec()).collect())?;
            ov_bernoulli_cauchy(&total, b)?
        }
        BoundKind::Monotone => {
            let nf = n as f64;
            generalized_arcsine_cauchy(&etas.iter().map(|e| e.scaled(nf)).collect::<Vec<_>>(), b)?
        }
        BoundKind::Infinitesimal => return Err(invalid("use the infinitesimal module for this kind")),
    };
    let x = moment_functionals(model, family, net, seed)?;
    let k4 = kind.kappa() * x.alpha2 * x.alpha2;
    let y = MomentFunctionals {
        alpha2: x.alpha2,
        alpha4: k4,
        alpha4_tilde: k4,
    };
    Ok(Gap {
        lhs: op_norm(&(lhs_model - target)),
        rhs: bound_rhs(kind, &BoundInputs::Moments { x, y }, b, n)?,
    })
}

/// Result of [`levy_rate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevyRate {
    /// Optimized Cauchy-transform bound on the Lévy distance.
    pub estimate: f64,
    /// The minimizing `ε`.
    pub eps: f64,
    /// `(α₂(α̃₄ + κα₂²))^{1/14} n^{-1/14}`, up to an unknown constant.
    pub rate_bound: f64,
}

/// Minimizes `2√(ε/π) + (1/π)∫|Im ΔG(t+iε)| dt` over `ln ε ∈ [−6, 0]` by
/// golden-section search.
pub fn levy_rate(kind: BoundKind, nu: &AtomicMeasure, n: usize) -> Result<LevyRate> {
    let f = MomentFunctionals::of_measure(nu)?;
    let sum = clt_sum_measure(kind, nu, n)?;
    let target = clt_target(kind, f.alpha2)?;
    let opts = QuadOptions {
        abs_tol: 1e-7,
        rel_tol: 1e-6,
        max_panels: 40_000,
    };
    let eval = |log_eps: f64| levy_bound_from_cauchy(&sum, &target, log_eps.exp(), opts);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (-6.0f64, 0.0f64);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (eval(a)?, eval(b)?);
    for _ in 0..40 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = eval(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = eval(b)?;
        }
        if hi - lo < 1e-4 {
            break;
        }
    }
    let (log_eps, estimate) = [(lo, eval(lo)?), (a, fa), (b, fb), (hi, eval(hi)?)]
        .into_iter()
        .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    let rate_bound = (f.alpha2 * (f.alpha4_tilde + kind.kappa() * f.alpha2 * f.alpha2)).powf(1.0 / 14.0) * (n as f64).powf(-1.0 / 14.0);
    Ok(LevyRate {
        estimate,
        eps: log_eps.exp(),
        rate_bound,
    })
}

/// Which limit element a comparison concerns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    Bernoulli,
    Arcsine,
}

/// `‖G_{1_k⊗X₁}(b) − G_{1_k⊗X₀}(b)‖` against `k ‖(Im b)⁻¹‖³ ‖η₁ − η₀‖`
/// for `b ∈ M_k(M_d)`.
pub fn comparison_gap(kind: Comparison, eta0: &KrausMap, eta1: &KrausMap, b: &Mat, k: usize, net: usize, seed: u64) -> Result<Gap> {
    if !(1..=3).contains(&k) {
        return Err(invalid("amplification must be 1, 2 or 3"));
    }
    if b.nrows() != k * eta0.d() {
        return Err(invalid(format!("b must be {0}×{0}", k * eta0.d())));
    }
    let (a0, a1) = (eta0.amplified(k), eta1.amplified(k));
    let g = |eta: &KrausMap| match kind {
        Comparison::Bernoulli => ov_bernoulli_cauchy(eta, b),
        Comparison::Arcsine => ov_arcsine_cauchy(eta, b),
    };
    let lhs = op_norm(&(g(&a1)? - g(&a0)?));
    let rhs = k as f64 * inv_imag_norm(b)?.powi(3) * map_distance(eta0, eta1, net, seed)?;
    Ok(Gap { lhs, rhs })
}

/// Result of [`fourth_moment_gap`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourthMomentGap {
    /// Fourth monotone cumulant of `Y`.
    pub h4: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// For `Y = ν_n ▷ ⋯ ▷ ν_n` (`n` copies of `ν` dilated by `n^{-1/2}`),
/// `|G_Y(z) − G_A(z)|` against `Im(z)^{-4} √m₂ √|h₄(Y)|`, with `A` the
/// standard arcsine law.
pub fn fourth_moment_gap(nu: &AtomicMeasure, n: usize, z: C64) -> Result<FourthMomentGap> {
    require_upper(z)?;
    check_n(n)?;
    check_centered_measure(nu)?;
    let m2 = nu.moment(2);
    if (m2 - 1.0).abs() > 1e-10 {
        return Err(invalid(format!("summand must have unit variance, got {m2}")));
    }
    let y = nu.dilate(1.0 / (n as f64).sqrt());
    let single: Vec<f64> = (0..=4).map(|k| y.moment(k)).collect();
    let m = monotone_convolution_moments(&vec![single; n], 4)?;
    let [_, h2, _, h4] = crate::cumulant::monotone_h_closed_form([m[1], m[2], m[3], m[4]]);
    let sum = clt_sum_measure(BoundKind::Monotone, nu, n)?;
    let lhs = (sum.cauchy(z)? - arcsine(1.0).cauchy(z)?).norm();
    let rhs = z.im.powi(-4) * h2.sqrt() * h4.abs().sqrt();
    Ok(FourthMomentGap { h4, lhs, rhs })
}

/// Largest entry norm `max_{j≤i} ‖a_ij‖` of a Boolean Wigner matrix.
fn max_entry_norm(m: &crate::model::MatrixModel) -> f64 {
    m.entries
        .iter()
        .flatten()
        .flatten()
        .map(op_norm)
        .fold(0.0, f64::max)
}

/// `|tr⊗φ G_{A_n}(z) − tr⊗φ G_{B_n}(z)|` against
/// `16 Im(z)^{-4} max‖a_ij‖³ n^{-1/2}`, where `B_n` has η-circular entries.
pub fn wigner_gap(profile: &VarianceProfile, kind: EntryKind, z: C64) -> Result<Gap> {
    require_upper(z)?;
    let a = build_boolean_wigner(profile, kind)?;
    let b = build_boolean_wigner(profile, EntryKind::Circular)?;
    let lhs = (a.trace_cauchy(z)? - b.trace_cauchy(z)?).norm();
    let n = profile.n() as f64;
    let rhs = 16.0 * z.im.powi(-4) * max_entry_norm(&a).powi(3) / n.sqrt();
    Ok(Gap { lhs, rhs })
}

/// A centered `M_d`-valued element on `ℂ^d ⊗ ℂ²`: a Kraus-type Bernoulli
/// with one random Kraus operator plus a random Hermitian block on the
/// excited leg, all scaled by `s`.
pub fn random_kraus_factor(rng: &mut impl Rng, d: usize, s: f64) -> Factor {
    let k = random_unitary(rng, d) * c(0.6, 0.0);
    let mut f = Factor::kraus_bernoulli(&[k]).expect("square Kraus operator");
    let h = random_hermitian(rng, d) * c(0.3, 0.0);
    f.elements[0] += kron(&h, &unit(2, 1, 1));
    f.elements[0] *= c(s, 0.0);
    f
}

/// The Bernoulli factor with the same first and second moments as the
/// first element of `f`.
pub fn matching_bernoulli_factor(f: &Factor) -> Result<Factor> {
    let model = boolean_star_family(std::slice::from_ref(f))?;
    let x = model.element(0).clone();
    let eta = KrausMap::from_map(f.b_dim, |m| model.expect(&(&x * model.space.amplify(m) * &x)).expect("sized"))?;
    Factor::kraus_bernoulli(eta.kraus())
}

/// Two families realized in one joint model.
#[derive(Clone, Debug)]
pub struct FamilyPair {
    pub model: OperatorModel,
    pub xs: Vec<usize>,
    pub ys: Vec<usize>,
}

/// `N` random summands `xᵢ` (scaled by `N^{-1/2}`) and their matching
/// Bernoullis `yᵢ`, Boolean independent or monotone in the order
/// `x₁ ≺ ⋯ ≺ x_N ≺ y₁ ≺ ⋯ ≺ y_N`.
pub fn random_family_pair(kind: BoundKind, n: usize, d: usize, seed: u64) -> Result<FamilyPair> {
    check_n(n)?;
    let mut r = crate::linalg::rng(seed);
    let s = 1.0 / (n as f64).sqrt();
    let xs: Vec<Factor> = (0..n).map(|_| random_kraus_factor(&mut r, d, s)).collect();
    let mut all = xs.clone();
    for f in &xs {
        all.push(matching_bernoulli_factor(f)?);
    }
    let model = match kind {
        BoundKind::Boolean => boolean_star_family(&all)?,
        BoundKind::Monotone => monotone_product_family(&all)?,
        BoundKind::Infinitesimal => return Err(invalid("use the infinitesimal module for lifted families")),
    };
    Ok(FamilyPair {
        model,
        xs: (0..n).collect(),
        ys: (n..2 * n).collect(),
    })
}

/// `‖E[G_{Σxᵢ}(b)] − E[G_{Σyᵢ}(b)]‖` against the Lindeberg bound with
/// `N = |xs|` and the functionals of both families.
pub fn family_gap(kind: BoundKind, pair: &FamilyPair, b: &Mat, net: usize, seed: u64) -> Result<Gap> {
    check_families(&pair.xs, &pair.ys)?;
    let m = &pair.model;
    let gx = m.cauchy(&m.sum(pair.xs.iter().copied()), b)?;
    let gy = m.cauchy(&m.sum(pair.ys.iter().copied()), b)?;
    let x = moment_functionals(m, &pair.xs, net, seed)?;
    let y = moment_functionals(m, &pair.ys, net, seed)?;
    Ok(Gap {
        lhs: op_norm(&(gx - gy)),
        rhs: bound_rhs(kind, &BoundInputs::Moments { x, y }, b, pair.xs.len())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_psd, random_upper, rng};
    use crate::transform::two_point;

    fn perturbed_kraus_factor(rng: &mut impl rand::Rng, d: usize) -> Factor {
        random_kraus_factor(rng, d, 1.0)
    }

    fn matching_bernoulli(f: &Factor) -> Factor {
        matching_bernoulli_factor(f).unwrap()
    }

    #[test]
    fn family_gaps_hold_on_joint_models() {
        for (kind, cells) in [
            (BoundKind::Boolean, &[(2usize, 1usize), (8, 1), (16, 2)][..]),
            (BoundKind::Monotone, &[(2, 2), (4, 1)][..]),
        ] {
            for &(n, d) in cells {
                {
                    let pair = random_family_pair(kind, n, d, 40 + n as u64).unwrap();
                    let mut r = rng(n as u64);
                    for b in [scalar(d, c(0.0, 1.0)), random_upper(&mut r, d, 0.5)] {
                        let g = family_gap(kind, &pair, &b, 40, 0).unwrap();
                        assert!(g.holds() && g.lhs > 0.0, "{kind:?} n={n} d={d}: {g:?}");
                    }
                    if kind == BoundKind::Boolean {
                        assert!(telescoping_residual(&pair.model, &pair.xs, &pair.ys, &scalar(d, c(0.0, 1.0))).unwrap() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn kraus_roundtrip_and_cp_probe() {
        let mut r = rng(3);
        let ks = vec![random_unitary(&mut r, 2), random_hermitian(&mut r, 2)];
        let eta = KrausMap::new(ks).unwrap();
        let back = KrausMap::from_map(2, |b| eta.apply(b)).unwrap();
        for _ in 0..5 {
            let b = random_hermitian(&mut r, 2);
            assert!(op_norm(&(eta.apply(&b) - back.apply(&b))) < 1e-12);
        }
        assert!(KrausMap::from_map(2, |b| b.transpose()).is_err());
    }

    #[test]
    fn functionals_examples() {
        for n in [2usize, 5] {
            let s = 1.0 / (n as f64).sqrt();
            let factors: Vec<Factor> = (0..n).map(|_| Factor::bernoulli(s * s)).collect();
            let model = boolean_star_family(&factors).unwrap();
            let f = moment_functionals(&model, &(0..n).collect::<Vec<_>>(), 50, 1).unwrap();
            assert!((f.alpha2 - 1.0 / n as f64).abs() < 1e-14);
            assert!((f.alpha4_tilde - 1.0 / (n * n) as f64).abs() < 1e-14);
            assert!((f.alpha4 - f.alpha4_tilde).abs() < 1e-14);
        }
        let zero = Factor::new(1, Factor::bernoulli(1.0).vacuum, vec![zeros(2)]).unwrap();
        let model = boolean_star_family(&[zero]).unwrap();
        assert_eq!(moment_functionals(&model, &[0], 10, 0).unwrap(), MomentFunctionals::default());
        let shifted = Factor::atomic(&AtomicMeasure::new([(1.0, 0.5), (3.0, 0.5)]).unwrap(), false);
        assert!(moment_functionals(&boolean_star_family(&[shifted]).unwrap(), &[0], 10, 0).is_err());
    }

    #[test]
    fn functionals_invariant_on_ov_families() {
        let mut r = rng(11);
        let factors: Vec<Factor> = (0..3).map(|_| perturbed_kraus_factor(&mut r, 2)).collect();
        let model = boolean_star_family(&factors).unwrap();
        let f = moment_functionals(&model, &[0, 1, 2], DEFAULT_NET, 5).unwrap();
        assert!(f.alpha4_tilde >= f.alpha2 * f.alpha2 - 1e-12);
        assert!(f.alpha4 >= f.alpha4_tilde - 1e-12);
    }

    #[test]
    fn bound_rhs_examples() {
        let b = scalar(1, c(0.0, 2.0));
        for n in [1usize, 4, 9] {
            let nf = n as f64;
            let x = MomentFunctionals {
                alpha2: 1.0 / nf,
                alpha4: 1.0 / (nf * nf),
                alpha4_tilde: 1.0 / (nf * nf),
            };
            let v = bound_rhs(BoundKind::Boolean, &BoundInputs::Moments { x, y: x }, &b, n).unwrap();
            assert!((v - 0.125 / nf.sqrt()).abs() < 1e-15);
            let b4 = scalar(1, c(0.0, 4.0));
            let w = bound_rhs(BoundKind::Boolean, &BoundInputs::Moments { x, y: x }, &b4, n).unwrap();
            assert!((v / w - 16.0).abs() < 1e-12);
        }
        let zero = BoundInputs::Moments {
            x: MomentFunctionals::default(),
            y: MomentFunctionals::default(),
        };
        assert_eq!(bound_rhs(BoundKind::Monotone, &zero, &b, 3).unwrap(), 0.0);
        let norms = BoundInputs::Norms { x_max: 1.0, y_max: 0.0 };
        assert!((bound_rhs(BoundKind::Infinitesimal, &norms, &b, 2).unwrap() - 0.25).abs() < 1e-15);
        assert!(bound_rhs(BoundKind::Boolean, &norms, &b, 2).is_err());
    }

    #[test]
    fn taylor_identity() {
        let mut r = rng(4);
        for _ in 0..20 {
            let x = random_upper(&mut r, 4, 0.5);
            let y = random_upper(&mut r, 4, 0.5);
            for m in 1..=3 {
                assert!(taylor_residual(&x, &y, m).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn telescoping_holds_without_independence() {
        let mut r = rng(8);
        let space_model = {
            let f = Factor::new(1, Factor::bernoulli(1.0).vacuum, (0..6).map(|_| zeros(2)).collect()).unwrap();
            boolean_star_family(&[f]).unwrap()
        };
        for _ in 0..10 {
            let mut model = space_model.clone();
            for e in &mut model.elements {
                e.matrix = random_hermitian(&mut r, 2);
            }
            let b = random_upper(&mut r, 1, 0.5);
            assert!(telescoping_residual(&model, &[0, 1, 2], &[3, 4, 5], &b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn identical_families_give_zero_terms() {
        let model = boolean_star_family(&[Factor::bernoulli(1.0), Factor::bernoulli(0.5)]).unwrap();
        let b = scalar(1, c(0.3, 1.0));
        let t = lindeberg_terms(&model, &[0, 1], &[0, 1], &b, 2).unwrap();
        assert_eq!(op_norm(&t.a) + op_norm(&t.b) + op_norm(&t.c), 0.0);
    }

    fn vanishing_check(monotone: bool, seed: u64) {
        let mut r = rng(seed);
        let n = 4;
        let scale = c(0.5, 0.0);
        let mut xs: Vec<Factor> = (0..n).map(|_| perturbed_kraus_factor(&mut r, 2)).collect();
        for f in &mut xs {
            f.elements[0] *= scale;
        }
        let ys: Vec<Factor> = xs.iter().map(matching_bernoulli).collect();
        let all: Vec<Factor> = xs.iter().chain(&ys).cloned().collect();
        let model = if monotone {
            monotone_product_family(&all).unwrap()
        } else {
            boolean_star_family(&all).unwrap()
        };
        let xi: Vec<usize> = (0..n).collect();
        let yi: Vec<usize> = (n..2 * n).collect();
        for _ in 0..3 {
            let b = random_upper(&mut r, 2, 0.5);
            if !monotone {
                assert!(telescoping_residual(&model, &xi, &yi, &b).unwrap() < 1e-12);
                let t = lindeberg_terms(&model, &xi, &yi, &b, 2).unwrap();
                let (ea, eb) = lindeberg_expectations(&model, &xi, &yi, &b, 2).unwrap();
                assert!(op_norm(&(model.expect(&t.a).unwrap() - ea)) < 1e-13);
                assert!(op_norm(&(model.expect(&t.b).unwrap() - eb)) < 1e-13);
            }
            for i in 1..=n {
                let (ea, eb) = lindeberg_expectations(&model, &xi, &yi, &b, i).unwrap();
                let (ea, eb) = (op_norm(&ea), op_norm(&eb));
                assert!(ea < 1e-10 && eb < 1e-10, "monotone={monotone} i={i}: {ea:e} {eb:e}");
            }
        }
    }

    #[test]
    fn boolean_first_and_second_order_terms_vanish() {
        vanishing_check(false, 21);
    }

    #[test]
    fn monotone_first_and_second_order_terms_vanish() {
        vanishing_check(true, 22);
    }

    #[test]
    fn boolean_resolvent_factorizations() {
        let mut r = rng(5);
        let factors: Vec<Factor> = (0..3).map(|_| perturbed_kraus_factor(&mut r, 2)).collect();
        let model = boolean_star_family(&factors).unwrap();
        for _ in 0..5 {
            let b = random_upper(&mut r, 2, 0.4);
            let (a, bb) = boolean_resolvent_identities(&model, &[0, 1], 2, &b).unwrap();
            assert!(a < 1e-9 && bb < 1e-9, "{a:e} {bb:e}");
        }
    }

    fn random_monotone_triple(r: &mut impl rand::Rng) -> OperatorModel {
        let x = perturbed_kraus_factor(r, 2);
        let y = perturbed_kraus_factor(r, 2);
        let w = Factor::new(2, Factor::bernoulli(1.0).vacuum, vec![kron(&random_hermitian(r, 2), &eye(2)) + kron(&random_psd(r, 2), &unit(2, 1, 0))]).unwrap();
        monotone_product_family(&[x, w, y]).unwrap()
    }

    #[test]
    fn subordination_with_middle_algebra() {
        let mut r = rng(6);
        for _ in 0..20 {
            let model = random_monotone_triple(&mut r);
            let b1 = random_upper(&mut r, 2, 0.5);
            let b2 = b1.adjoint();
            let res = monotone_subordination_check(&model, model.element(0), model.element(2), model.element(1), &b1, &b2).unwrap();
            assert!(res < 1e-9, "{res:e}");
        }
    }

    #[test]
    fn subordination_trivial_cases() {
        let model = monotone_product_family(&[Factor::bernoulli(1.0), Factor::bernoulli(2.0)]).unwrap();
        let b1 = scalar(1, c(0.0, 2.0));
        let b2 = b1.adjoint();
        let x = model.element(0);
        let zero = zeros(4);
        let w = model.element(1) * model.element(1);
        assert!(monotone_subordination_check(&model, x, &zero, &w, &b1, &b2).unwrap() < 1e-14);
        let y = model.element(1);
        let direct = model.cauchy(&(x + y), &b1).unwrap();
        let subordinated = model.cauchy(x, &inverse(&model.cauchy(y, &b1).unwrap()).unwrap()).unwrap();
        assert!(op_norm(&(direct - subordinated)) < 1e-14);
        let ww = x * x;
        let res = monotone_subordination_check(&model, x, y, &ww, &b1, &b2).unwrap();
        assert!(res < 1e-10, "{res:e}");
        // the unit is not an element of a middle algebra
        let res = monotone_subordination_check(&model, x, y, &eye(4), &b1, &b2).unwrap();
        assert!(res > 1e-3);
    }

    #[test]
    fn bernoulli_and_arcsine_transforms() {
        let eta = KrausMap::scalar(1.0).unwrap();
        let z = c(0.3, 0.8);
        let g = ov_bernoulli_cauchy(&eta, &scalar(1, z)).unwrap()[(0, 0)];
        assert!((g - AtomicMeasure::bernoulli(1.0).cauchy_any(z)).norm() < 1e-14);
        let g = ov_arcsine_cauchy(&eta, &scalar(1, z)).unwrap()[(0, 0)];
        assert!((g - arcsine(1.0).cauchy(z).unwrap()).norm() < 1e-9);
        // generalized arcsine with identical variances is the arcsine itself
        let etas = vec![eta.clone(); 4];
        let g4 = generalized_arcsine_cauchy(&etas, &scalar(1, z)).unwrap()[(0, 0)];
        assert!((g4 - arcsine(1.0).cauchy(z).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn ov_bernoulli_matches_model() {
        let mut r = rng(9);
        let eta = KrausMap::new(vec![random_hermitian(&mut r, 2), random_unitary(&mut r, 2) * c(0.5, 0.0)]).unwrap();
        let model = boolean_star_family(&[Factor::kraus_bernoulli(eta.kraus()).unwrap()]).unwrap();
        let b = random_upper(&mut r, 2, 0.3);
        let diff = op_norm(&(model.cauchy(model.element(0), &b).unwrap() - ov_bernoulli_cauchy(&eta, &b).unwrap()));
        assert!(diff < 1e-12);
    }

    #[test]
    fn comparison_examples() {
        let z = scalar(1, c(0.0, 2.0));
        let (e1, e2) = (KrausMap::scalar(1.0).unwrap(), KrausMap::scalar(2.0).unwrap());
        let g = comparison_gap(Comparison::Bernoulli, &e1, &e2, &z, 1, 64, 0).unwrap();
        assert!((g.lhs - 1.0 / 15.0).abs() < 1e-12);
        assert!((g.rhs - 0.125).abs() < 1e-12);
        let a = comparison_gap(Comparison::Arcsine, &e1, &e2, &z, 1, 64, 0).unwrap();
        let exact = (arcsine(2.0).cauchy(c(0.0, 2.0)).unwrap() - arcsine(1.0).cauchy(c(0.0, 2.0)).unwrap()).norm();
        assert!((a.lhs - exact).abs() < 1e-9 && a.holds());
        let same = comparison_gap(Comparison::Bernoulli, &e1, &e1, &z, 1, 64, 0).unwrap();
        assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
    }

    #[test]
    fn amplified_comparison_on_random_pairs() {
        let mut r = rng(10);
        for _ in 0..5 {
            let e0 = KrausMap::new(vec![random_hermitian(&mut r, 2) * c(0.7, 0.0)]).unwrap();
            let e1 = KrausMap::new(vec![random_hermitian(&mut r, 2) * c(0.7, 0.0), random_unitary(&mut r, 2) * c(0.3, 0.0)]).unwrap();
            let b = random_upper(&mut r, 4, 0.5);
            for kind in [Comparison::Bernoulli, Comparison::Arcsine] {
                let g = comparison_gap(kind, &e0, &e1, &b, 2, 100, 1).unwrap();
                assert!(g.holds(), "{kind:?}: {g:?}");
            }
        }
    }

    #[test]
    fn boolean_bernoulli_clt_is_exact() {
        let nu = AtomicMeasure::bernoulli(1.0);
        for n in [1usize, 3, 16] {
            let g = clt_gap(BoundKind::Boolean, &nu, n, c(0.2, 1.0)).unwrap();
            assert!(g.lhs < 1e-14 && g.rhs > 0.0);
        }
    }

    #[test]
    fn clt_sweep_and_slope() {
        let nus = [AtomicMeasure::bernoulli(1.0), two_point(0.3).unwrap()];
        for nu in &nus {
            for kind in [BoundKind::Boolean, BoundKind::Monotone] {
                for n in [2usize, 4, 8, 16, 32] {
                    for z in [c(0.0, 1.0), c(0.0, 2.0), c(1.0, 1.0)] {
                        assert!(clt_gap(kind, nu, n, z).unwrap().holds());
                    }
                }
            }
        }
        let pts: Vec<(f64, f64)> = [2usize, 4, 8, 16, 32]
            .iter()
            .map(|&n| {
                let g = clt_gap(BoundKind::Monotone, &nus[0], n, c(0.0, 2.0)).unwrap();
                ((n as f64).ln(), g.lhs.ln())
            })
            .collect();
        let slope = log_log_slope(&pts);
        assert!((-1.2..=-0.4).contains(&slope), "{slope}");
    }

    fn log_log_slope(pts: &[(f64, f64)]) -> f64 {
        let k = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / k, a.1 + p.1 / k));
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        num / den
    }

    #[test]
    fn scalar_and_model_routes_agree() {
        let n = 4;
        let s = 1.0 / (n as f64).sqrt();
        let nu = two_point(0.3).unwrap();
        let factors: Vec<Factor> = (0..n).map(|_| Factor::atomic(&nu.dilate(s), true)).collect();
        let b = scalar(1, c(0.0, 1.5));
        for kind in [BoundKind::Boolean, BoundKind::Monotone] {
            let model = match kind {
                BoundKind::Boolean => boolean_star_family(&factors).unwrap(),
                _ => monotone_product_family(&factors).unwrap(),
            };
            let ov = clt_gap_model(kind, &model, &(0..n).collect::<Vec<_>>(), &b, 50, 0).unwrap();
            let sc = clt_gap(kind, &nu, n, c(0.0, 1.5)).unwrap();
            assert!((ov.lhs - sc.lhs).abs() < 1e-9, "{kind:?}: {ov:?} {sc:?}");
            assert!((ov.rhs - sc.rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn ov_clt_on_models() {
        let mut r = rng(12);
        let n = 4;
        let mut factors: Vec<Factor> = (0..n).map(|_| perturbed_kraus_factor(&mut r, 2)).collect();
        for f in &mut factors {
            f.elements[0] *= c(0.5, 0.0);
        }
        let b = random_upper(&mut r, 2, 0.5);
        for kind in [BoundKind::Boolean, BoundKind::Monotone] {
            let model = match kind {
                BoundKind::Boolean => boolean_star_family(&factors).unwrap(),
                _ => monotone_product_family(&factors).unwrap(),
            };
            let g = clt_gap_model(kind, &model, &(0..n).collect::<Vec<_>>(), &b, 100, 0).unwrap();
            assert!(g.holds(), "{kind:?}: {g:?}");
        }
    }

    #[test]
    fn levy_rates() {
        let nu = AtomicMeasure::bernoulli(1.0);
        let boolean = levy_rate(BoundKind::Boolean, &nu, 8).unwrap();
        assert!((boolean.estimate - 2.0 * ((-6f64).exp() / std::f64::consts::PI).sqrt()).abs() < 1e-6);
        let est: Vec<f64> = [8usize, 16, 32, 64]
            .iter()
            .map(|&n| levy_rate(BoundKind::Monotone, &nu, n).unwrap().estimate)
            .collect();
        assert!(est.windows(2).all(|w| w[1] < w[0]), "{est:?}");
    }

    #[test]
    fn fourth_moment_examples() {
        let nu = AtomicMeasure::bernoulli(1.0);
        let mut last = f64::INFINITY;
        for n in [4usize, 16, 64] {
            let g = fourth_moment_gap(&nu, n, c(0.0, 2.0)).unwrap();
            assert!((g.h4 + 0.5 / n as f64).abs() < 1e-10, "{}", g.h4);
            assert!(g.lhs < last && g.lhs <= g.rhs, "{g:?}");
            last = g.lhs;
        }
        assert!(fourth_moment_gap(&AtomicMeasure::bernoulli(2.0), 4, c(0.0, 1.0)).is_err());
    }

    #[test]
    fn wigner_examples() {
        let profile = VarianceProfile::from_fn(4, |_| 1.0, |_, _| 1.5, |_, _| 0.5).unwrap();
        let same = wigner_gap(&profile, EntryKind::Circular, c(0.0, 1.0)).unwrap();
        assert!(same.lhs < 1e-14);
        for n in [2usize, 4] {
            let p = VarianceProfile::from_fn(n, |_| 1.0, |_, _| 1.5, |_, _| 0.5).unwrap();
            for z in [c(0.0, 1.0), c(0.0, 2.0)] {
                let g = wigner_gap(&p, EntryKind::Perturbed { gamma: 0.7 }, z).unwrap();
                assert!(g.holds() && g.lhs > 0.0, "{g:?}");
            }
        }
    }
}
