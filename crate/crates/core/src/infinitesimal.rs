//! Infinitesimal operator-valued probability: pairs `(E, E′)`, upper
//! triangular lifts `[[x, x′], [0, x]]`, the word rules for `E′` under the
//! three infinitesimal independences, infinitesimal limit elements and the
//! corresponding bound checks.
//!
//! A pair lives on an [`OperatorSpace`] and is given by a tangent vector
//! `η ⊥ ξ`: `E′[a] = Ξ* a H + H* a Ξ` with `Ξ = 1 ⊗ ξ`, `H = 1 ⊗ η`. This
//! is the derivative of the vector states along `ξ + tη` and is automatically
//! self-adjoint, `B`-bimodular and zero on `B`.

use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cumulant::{limit_moments, Independence, OvFunctional};
use crate::error::{invalid, Error, Result};
use crate::harness::{map_distance, Gap, KrausMap};
use crate::independence::{mixed_moment, TaggedWord};
use crate::linalg::{c, eye, inv_imag_norm, inverse, kron, op_norm, random_hermitian, random_unit_vector, sup_over_unitaries, unit, vacuum_frame, zeros, Mat, Vector, C64};
use crate::model::{boolean_star_family, monotone_product_family, Factor, OperatorSpace};
use crate::partition::{enumerate, PartitionClass};
use crate::transform::monotone_convolution_moments;

/// Largest word length accepted by [`inf_limit_moments`].
pub const MAX_INF_ORDER: usize = 10;

/// Longest moment series used by the scalar series route.
pub const MAX_SERIES_ORDER: usize = 400;

/// A dual number `re + ε·eps` with `ε² = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub const fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }
}

impl From<f64> for Dual {
    fn from(re: f64) -> Self {
        Self::new(re, 0.0)
    }
}

impl Add for Dual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl Sub for Dual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl Neg for Dual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl Zero for Dual {
    fn zero() -> Self {
        Self::new(0.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.eps == 0.0
    }
}

impl One for Dual {
    fn one() -> Self {
        Self::new(1.0, 0.0)
    }
}

/// An element `x` together with its infinitesimal part `x′`.
#[derive(Clone, Debug, PartialEq)]
pub struct InfElement {
    pub x: Mat,
    pub x_prime: Mat,
}

impl InfElement {
    pub fn new(x: Mat, x_prime: Mat) -> Result<Self> {
        if !x.is_square() || x.shape() != x_prime.shape() {
            return Err(invalid("x and x′ must be square matrices of one size"));
        }
        Ok(Self { x, x_prime })
    }

    /// `(x, 0)`.
    pub fn plain(x: Mat) -> Self {
        let n = x.nrows();
        Self { x, x_prime: zeros(n) }
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn lift(&self) -> Mat {
        block_lift(&self.x, &self.x_prime)
    }

    pub fn from_lift(a: &Mat) -> Result<Self> {
        let (x, x_prime) = lift_blocks(a)?;
        Ok(Self { x, x_prime })
    }

    /// `‖x‖ + ‖x′‖`.
    pub fn lift_norm(&self) -> f64 {
        op_norm(&self.x) + op_norm(&self.x_prime)
    }

    /// `(x y, x y′ + x′ y)`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(invalid("elements act on different spaces"));
        }
        Ok(Self {
            x: &self.x * &other.x,
            x_prime: &self.x * &other.x_prime + &self.x_prime * &other.x,
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            x: self.x.adjoint(),
            x_prime: self.x_prime.adjoint(),
        }
    }

    pub fn is_self_adjoint(&self) -> bool {
        let tol = 1e-12 * self.lift_norm().max(1.0);
        op_norm(&(&self.x - self.x.adjoint())) <= tol && op_norm(&(&self.x_prime - self.x_prime.adjoint())) <= tol
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            x: &self.x * c(s, 0.0),
            x_prime: &self.x_prime * c(s, 0.0),
        }
    }
}

/// `[[x, x′], [0, x]]`.
pub fn lift(e: &InfElement) -> Mat {
    e.lift()
}

/// `[[a, a′], [0, a]]`.
pub fn block_lift(a: &Mat, a_prime: &Mat) -> Mat {
    let n = a.nrows();
    let mut m = Mat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(a_prime);
    m.view_mut((n, n), (n, n)).copy_from(a);
    m
}

/// `diag(b, b)`.
pub fn diag_lift(b: &Mat) -> Mat {
    block_lift(b, &zeros(b.nrows()))
}

/// The blocks `(a, a′)` of an upper-triangular lift.
pub fn lift_blocks(m: &Mat) -> Result<(Mat, Mat)> {
    if !m.is_square() || m.nrows() % 2 != 0 {
        return Err(invalid("a lift is a square matrix of even size"));
    }
    let n = m.nrows() / 2;
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.norm()));
    let tol = 1e-10 * scale;
    let lower = m.view((n, 0), (n, n)).iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
    let diag = (m.view((0, 0), (n, n)) - m.view((n, n), (n, n))).iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
    if lower > tol || diag > tol {
        return Err(invalid("matrix is not of the form [[a, a′], [0, a]]"));
    }
    Ok(lift_blocks_unchecked(m))
}

fn lift_blocks_unchecked(m: &Mat) -> (Mat, Mat) {
    let n = m.nrows() / 2;
    (m.view((0, 0), (n, n)).into_owned(), m.view((0, n), (n, n)).into_owned())
}

/// `(E, E′)` on an operator space, with `E′` generated by a tangent vector.
#[derive(Clone, Debug)]
pub struct InfFunctionalPair {
    space: OperatorSpace,
    tangent: Vector,
}

impl InfFunctionalPair {
    /// Requires `⟨ξ, η⟩ = 0` and `‖η‖ ≤ 1`; the latter gives `‖E′‖ ≤ 2`.
    pub fn new(space: OperatorSpace, tangent: Vector) -> Result<Self> {
        if tangent.len() != space.dim() {
            return Err(invalid(format!("tangent has length {}, space has {}", tangent.len(), space.dim())));
        }
        if space.state().dotc(&tangent).norm() > 1e-12 {
            return Err(invalid("tangent vector must be orthogonal to the state vector"));
        }
        if tangent.norm() > 1.0 + 1e-12 {
            return Err(invalid("tangent vector must have norm at most one"));
        }
        Ok(Self { space, tangent })
    }

    /// The pair with `E′ = 0`.
    pub fn flat(space: OperatorSpace) -> Self {
        let tangent = Vector::zeros(space.dim());
        Self { space, tangent }
    }

    pub fn space(&self) -> &OperatorSpace {
        &self.space
    }

    pub fn tangent(&self) -> &Vector {
        &self.tangent
    }

    pub fn d(&self) -> usize {
        self.space.b_dim()
    }

    fn frames(&self) -> (Mat, Mat) {
        let d = self.d();
        (vacuum_frame(d, self.space.state()), vacuum_frame(d, &self.tangent))
    }

    fn check_operator(&self, a: &Mat) -> Result<()> {
        let n = self.space.total_dim();
        if a.nrows() != n || a.ncols() != n {
            return Err(invalid(format!("operator must be {n}×{n}")));
        }
        Ok(())
    }

    pub fn expect(&self, a: &Mat) -> Result<Mat> {
        self.space.expect(a)
    }

    pub fn e_prime(&self, a: &Mat) -> Result<Mat> {
        self.check_operator(a)?;
        let (xi, h) = self.frames();
        Ok(xi.adjoint() * a * &h + h.adjoint() * a * &xi)
    }

    /// `Ẽ[[a, a′], [0, a]] = [[E a, E′a + E a′], [0, E a]]`.
    pub fn tilde_e(&self, lifted: &Mat) -> Result<Mat> {
        let (a, a_prime) = lift_blocks(lifted)?;
        self.check_operator(&a)?;
        let ea = self.expect(&a)?;
        let top = self.e_prime(&a)? + self.expect(&a_prime)?;
        Ok(block_lift(&ea, &top))
    }

    /// `1 ⊗ (ηξ* − ξη*)`, the generator rotating `ξ` towards `η`.
    pub fn rotation(&self) -> Mat {
        let xi = self.space.state();
        let k = &self.tangent * xi.adjoint() - xi * self.tangent.adjoint();
        kron(&eye(self.d()), &k)
    }

    /// `x′ + [x, K]`: the infinitesimal part that carries the same
    /// infinitesimal moments under the flat pair.
    pub fn effective_prime(&self, e: &InfElement) -> Mat {
        let k = self.rotation();
        &e.x_prime + &e.x * &k - &k * &e.x
    }

    /// `E[x₁ b₁ ⋯ x_n]` and the `(1,2)` block of `Ẽ` on the word of lifts
    /// with coefficients `diag(b_k, b_k)`.
    fn word_values(&self, es: &[&InfElement], inner: &[Mat]) -> (Mat, Mat) {
        let d = self.d();
        let (xi, h) = self.frames();
        let n = xi.nrows();
        let mut bot = Mat::zeros(n, 2 * d);
        bot.view_mut((0, 0), (n, d)).copy_from(&xi);
        bot.view_mut((0, d), (n, d)).copy_from(&h);
        let mut top = Mat::zeros(n, d);
        for (k, e) in es.iter().enumerate().rev() {
            top = &e.x * top + &e.x_prime * bot.columns(0, d);
            bot = &e.x * bot;
            if k > 0 {
                top = self.space.apply_coefficient(&inner[k - 1], &top);
                bot = self.space.apply_coefficient(&inner[k - 1], &bot);
            }
        }
        let w_xi = bot.columns(0, d);
        let w_h = bot.columns(d, d);
        let e = xi.adjoint() * w_xi;
        let ep = xi.adjoint() * w_h + h.adjoint() * w_xi + xi.adjoint() * top;
        (e, ep)
    }

    /// `(E[G_x(b)], E′[G_x(b)] + E[G x′ G])` by linear solves.
    pub fn inf_cauchy(&self, e: &InfElement, b: &Mat) -> Result<(Mat, Mat)> {
        self.check_operator(&e.x)?;
        if b.nrows() != self.d() || b.ncols() != self.d() {
            return Err(invalid(format!("coefficient must be {0}×{0}", self.d())));
        }
        let (xi, h) = self.frames();
        let a = self.space.amplify(b) - &e.x;
        let singular = || Error::Numerical("resolvent system is singular".into());
        let lu = a.clone().lu();
        let y = lu.solve(&xi).ok_or_else(singular)?;
        let z = lu.solve(&h).ok_or_else(singular)?;
        let w = a.adjoint().lu().solve(&xi).ok_or_else(singular)?;
        let g = xi.adjoint() * &y;
        let dg = xi.adjoint() * z + h.adjoint() * &y + w.adjoint() * &e.x_prime * &y;
        Ok((g, dg))
    }

    /// Same values read off `Ẽ[(diag(b, b) − [[x, x′], [0, x]])⁻¹]`.
    pub fn inf_cauchy_lifted(&self, e: &InfElement, b: &Mat) -> Result<(Mat, Mat)> {
        self.check_operator(&e.x)?;
        let big = diag_lift(&self.space.amplify(b)) - e.lift();
        let r = inverse(&big)?;
        lift_blocks(&self.tilde_e(&r)?)
    }

    fn lifted_space(&self) -> Result<OperatorSpace> {
        OperatorSpace::new(self.space.state().clone(), 2 * self.d())
    }
}

/// Single-algebra moment functionals `E` and `E′` on words.
pub trait InfFunctional {
    fn dim(&self) -> usize;
    /// `E[x_{l_1} b_1 ⋯ x_{l_n}]`.
    fn moment(&self, letters: &[usize], inner: &[Mat]) -> Result<Mat>;
    /// The infinitesimal moment: the `(1,2)` block of `Ẽ` on the word of
    /// lifts with diagonal coefficients.
    fn inf_moment(&self, letters: &[usize], inner: &[Mat]) -> Result<Mat>;
}

/// Elements on one space with a pair `(E, E′)`. Labels group elements
/// into algebras.
#[derive(Clone, Debug)]
pub struct InfModel {
    pub pair: InfFunctionalPair,
    pub elements: Vec<InfElement>,
    pub labels: Vec<usize>,
}

/// A complex number as `[re, im]`.
type ComplexJson = [f64; 2];

fn vector_json(v: &Vector) -> Vec<ComplexJson> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn matrix_json(m: &Mat) -> Vec<Vec<ComplexJson>> {
    m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn matrix_from_json(rows: &[Vec<ComplexJson>]) -> Result<Mat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(invalid("matrices must be square"));
    }
    Ok(Mat::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

/// JSON form of an [`InfElement`]: the two matrices as rows of `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfElementJson {
    pub x: Vec<Vec<ComplexJson>>,
    pub x_prime: Vec<Vec<ComplexJson>>,
}

impl From<&InfElement> for InfElementJson {
    fn from(e: &InfElement) -> Self {
        Self {
            x: matrix_json(&e.x),
            x_prime: matrix_json(&e.x_prime),
        }
    }
}

impl TryFrom<&InfElementJson> for InfElement {
    type Error = Error;
    fn try_from(j: &InfElementJson) -> Result<Self> {
        InfElement::new(matrix_from_json(&j.x)?, matrix_from_json(&j.x_prime)?)
    }
}

/// JSON form of an [`InfModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfModelJson {
    pub b_dim: usize,
    pub state: Vec<ComplexJson>,
    pub tangent: Vec<ComplexJson>,
    pub elements: Vec<InfElementJson>,
    #[serde(default)]
    pub labels: Option<Vec<usize>>,
}

impl From<&InfModel> for InfModelJson {
    fn from(m: &InfModel) -> Self {
        Self {
            b_dim: m.d(),
            state: vector_json(m.pair.space().state()),
            tangent: vector_json(m.pair.tangent()),
            elements: m.elements.iter().map(InfElementJson::from).collect(),
            labels: Some(m.labels.clone()),
        }
    }
}

impl TryFrom<&InfModelJson> for InfModel {
    type Error = Error;
    fn try_from(j: &InfModelJson) -> Result<Self> {
        let vector = |v: &[ComplexJson]| Vector::from_iterator(v.len(), v.iter().map(|z| c(z[0], z[1])));
        let space = OperatorSpace::new(vector(&j.state), j.b_dim)?;
        let pair = InfFunctionalPair::new(space, vector(&j.tangent))?;
        let elements = j.elements.iter().map(InfElement::try_from).collect::<Result<Vec<_>>>()?;
        let mut model = InfModel::new(pair, elements)?;
        if let Some(labels) = &j.labels {
            if labels.len() != model.elements.len() {
                return Err(invalid("one label per element"));
            }
            model.labels = labels.clone();
        }
        Ok(model)
    }
}

impl InfModel {
    pub fn to_json(&self) -> InfModelJson {
        self.into()
    }

    pub fn from_json(j: &InfModelJson) -> Result<Self> {
        j.try_into()
    }
}

/// `n` random centered summands scaled by `1/(2√n)`, each paired with the
/// infinitesimal Bernoulli of the same second moments. The first two
/// summands live on spaces large enough to carry a tangent vector.
pub fn random_inf_families(n: usize, d: usize, seed: u64) -> Result<(Vec<InfModel>, Vec<InfModel>)> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let mut r = crate::linalg::rng(seed);
    let s = 1.0 / (2.0 * (n as f64).sqrt());
    let mut xs = Vec::with_capacity(n);
    for k in 0..n {
        let dim = if k < 2 { d * d + 2 } else { 2 };
        xs.push(InfModel::random_centered(&mut r, d, dim, 0.8, 0.5)?.scaled(s));
    }
    let ys = xs.iter().map(|x| x.matching_bernoulli(0)).collect::<Result<Vec<_>>>()?;
    Ok((xs, ys))
}

impl InfModel {
    /// A single algebra generated by `elements`.
    pub fn new(pair: InfFunctionalPair, elements: Vec<InfElement>) -> Result<Self> {
        let n = pair.space().total_dim();
        if elements.is_empty() {
            return Err(invalid("need at least one element"));
        }
        if elements.iter().any(|e| e.dim() != n) {
            return Err(invalid(format!("elements must be {n}×{n}")));
        }
        let labels = vec![0; elements.len()];
        Ok(Self { pair, elements, labels })
    }

    pub fn d(&self) -> usize {
        self.pair.d()
    }

    /// A random self-adjoint element on `ℂ^d ⊗ ℂ^dim` with `E[x] = 0`,
    /// `E′[x] = 0` and `E[x′] = 0`. The tangent has norm `tangent_norm`
    /// whenever the space leaves room for one.
    pub fn random_centered(rng: &mut impl Rng, d: usize, dim: usize, tangent_norm: f64, prime_scale: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tangent_norm) {
            return Err(invalid("tangent norm must lie in [0, 1]"));
        }
        let xi = random_unit_vector(rng, dim);
        let space = OperatorSpace::new(xi.clone(), d)?;
        let h = random_hermitian(rng, d * dim);
        let x = &h - space.amplify(&space.expect(&h)?);
        let hp = random_hermitian(rng, d * dim) * c(prime_scale, 0.0);
        let x_prime = &hp - space.amplify(&space.expect(&hp)?);
        // η ⊥ ξ and η ⊥ u_ab, where ⟨u_ab, η⟩ is the (a, b) entry of Ξ* x H.
        let mut avoid = vec![xi.clone()];
        for a in 0..d {
            for b in 0..d {
                avoid.push(Vector::from_fn(dim, |s, _| {
                    (0..dim).map(|r| xi[r] * x[(a * dim + r, b * dim + s)].conj()).sum()
                }));
            }
        }
        let basis = orthonormalize(&avoid);
        let mut eta = random_unit_vector(rng, dim);
        for q in &basis {
            let p = q.dotc(&eta);
            eta -= q * p;
        }
        let tangent = if basis.len() < dim && eta.norm() > 1e-8 {
            let n = eta.norm();
            eta * c(tangent_norm / n, 0.0)
        } else {
            Vector::zeros(dim)
        };
        let pair = InfFunctionalPair::new(space, tangent)?;
        Self::new(pair, vec![InfElement::new(x, x_prime)?])
    }

    /// Infinitesimal Bernoulli element `Σ K_r*⊗E_{0r} + K_r⊗E_{r0}` with
    /// infinitesimal part built the same way from `L_r`; its variance is
    /// `η(b) = Σ K*bK`, `η′(b) = Σ K*bL + L*bK`.
    pub fn bernoulli(kraus: &[Mat], primes: &[Mat]) -> Result<Self> {
        if kraus.len() != primes.len() {
            return Err(invalid("need one infinitesimal Kraus operator per Kraus operator"));
        }
        let x = Factor::kraus_bernoulli(kraus)?;
        let xp = Factor::kraus_bernoulli(primes)?;
        let space = OperatorSpace::new(x.vacuum.clone(), x.b_dim)?;
        let e = InfElement::new(x.elements[0].clone(), xp.elements[0].clone())?;
        Self::new(InfFunctionalPair::flat(space), vec![e])
    }

    /// An infinitesimal Bernoulli element with the given variance data.
    /// `η′` must be expressible as `Σ K*bL + L*bK` over the Kraus operators
    /// of `η`, which holds whenever the Choi matrix of `η` is invertible.
    pub fn realize(v: &InfVariance) -> Result<Self> {
        let d = v.d();
        let kraus = v.eta.kraus();
        let w = Mat::from_fn(d * d, kraus.len(), |row, r| kraus[r][(row / d, row % d)].conj());
        let h = v.eta_prime.choi();
        let gram = w.adjoint() * &w;
        let gram_inv = inverse(&gram)?;
        let p = &w * &gram_inv * w.adjoint();
        let q = eye(d * d) - &p;
        let outside = op_norm(&(&q * &h * &q));
        if outside > 1e-9 * op_norm(&h).max(1.0) {
            return Err(invalid("η′ is not supported on the Kraus range of η"));
        }
        let lam = (&h - &p * &h * &p * c(0.5, 0.0)) * &w * gram_inv;
        let primes: Vec<Mat> = (0..kraus.len())
            .map(|r| Mat::from_fn(d, d, |i, a| lam[(i * d + a, r)].conj()))
            .collect();
        Self::bernoulli(kraus, &primes)
    }

    /// Infinitesimal Bernoulli element with the same `(η, η′)` as element `k`.
    pub fn matching_bernoulli(&self, k: usize) -> Result<Self> {
        Self::realize(&self.second_moments(k)?)
    }

    /// `(η, η′)` with `η(b) = E[x b x]` and `η′(b)` its infinitesimal part.
    pub fn second_moments(&self, k: usize) -> Result<InfVariance> {
        self.check_letter(k)?;
        let d = self.d();
        let eta = LinearMap::try_from_fn(d, |b| self.moment(&[k, k], std::slice::from_ref(b)))?;
        let eta = KrausMap::from_map(d, |b| eta.apply(b))?;
        let eta_prime = LinearMap::try_from_fn(d, |b| self.inf_moment(&[k, k], std::slice::from_ref(b)))?;
        InfVariance::new(eta, eta_prime)
    }

    /// The model with every element multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            pair: self.pair.clone(),
            elements: self.elements.iter().map(|e| e.scaled(s)).collect(),
            labels: self.labels.clone(),
        }
    }

    fn check_letter(&self, k: usize) -> Result<()> {
        if k >= self.elements.len() {
            return Err(invalid(format!("no element {k}")));
        }
        Ok(())
    }

    fn check_word(&self, letters: &[usize], inner: &[Mat]) -> Result<()> {
        if letters.is_empty() || inner.len() + 1 != letters.len() {
            return Err(invalid("a word needs one inner coefficient between consecutive letters"));
        }
        letters.iter().try_for_each(|&l| self.check_letter(l))
    }

    /// The algebra with the given label, as a functional on its own letters.
    pub fn algebra(&self, label: usize) -> AlgebraView<'_> {
        AlgebraView {
            model: self,
            members: (0..self.elements.len()).filter(|&k| self.labels[k] == label).collect(),
        }
    }

    /// `Ẽ` applied to the explicit product of lifts, with lift-shaped
    /// coefficients `inner` of size `2d`.
    pub fn tilde_word(&self, letters: &[usize], inner: &[Mat]) -> Result<Mat> {
        self.check_word(letters, inner)?;
        let lifted = self.pair.lifted_space()?;
        let mut acc = self.elements[letters[0]].lift();
        for (k, &l) in letters.iter().enumerate().skip(1) {
            acc = acc * lifted.amplify(&inner[k - 1]) * self.elements[l].lift();
        }
        self.pair.tilde_e(&acc)
    }

    /// `(G, ∂G)` of the sum of the selected elements.
    pub fn inf_cauchy(&self, which: &[usize], b: &Mat) -> Result<(Mat, Mat)> {
        let n = self.pair.space().total_dim();
        let mut sum = InfElement::plain(zeros(n));
        for &k in which {
            self.check_letter(k)?;
            sum.x += &self.elements[k].x;
            sum.x_prime += &self.elements[k].x_prime;
        }
        self.pair.inf_cauchy(&sum, b)
    }
}

impl InfFunctional for InfModel {
    fn dim(&self) -> usize {
        self.d()
    }

    fn moment(&self, letters: &[usize], inner: &[Mat]) -> Result<Mat> {
        self.check_word(letters, inner)?;
        let xs: Vec<&Mat> = letters.iter().map(|&l| &self.elements[l].x).collect();
        Ok(self.pair.space().expect_word(&xs, inner))
    }

    fn inf_moment(&self, letters: &[usize], inner: &[Mat]) -> Result<Mat> {
        self.check_word(letters, inner)?;
        let es: Vec<&InfElement> = letters.iter().map(|&l| &self.elements[l]).collect();
        Ok(self.pair.word_values(&es, inner).1)
    }
}

/// One algebra of a joint model; letter `k` is its `k`-th member.
pub struct AlgebraView<'a> {
    model: &'a InfModel,
    members: Vec<usize>,
}

impl AlgebraView<'_> {
    fn map(&self, letters: &[usize]) -> Result<Vec<usize>> {
        letters
            .iter()
            .map(|&l| self.members.get(l).copied().ok_or_else(|| invalid(format!("algebra has no letter {l}"))))
            .collect()
    }
}

impl InfFunctional for AlgebraView<'_> {
    fn dim(&self) -> usize {
        self.model.d()
    }
    fn moment(&self, letters: &[usize], inner: &[Mat]) -> Result<Mat> {
        self.model.moment(&self.map(letters)?, inner)
    }
    fn inf_moment(&self, letters: &[usize], inner: &[Mat]) -> Result<Mat> {
        self.model.inf_moment(&self.map(letters)?, inner)
    }
}

/// The `B̃`-valued functional of a single-algebra pair, extended to
/// lift-shaped coefficients by bimodularity.
///
/// # Panics
/// `eval` panics if the underlying functional rejects the word.
pub struct Lifted<'a>(pub &'a dyn InfFunctional);

impl OvFunctional for Lifted<'_> {
    fn dim(&self) -> usize {
        2 * self.0.dim()
    }

    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        let blocks: Vec<(Mat, Mat)> = inner.iter().map(lift_blocks_unchecked).collect();
        let plain: Vec<Mat> = blocks.iter().map(|b| b.0.clone()).collect();
        let e = self.0.moment(letters, &plain).expect("lifted word");
        let mut ep = self.0.inf_moment(letters, &plain).expect("lifted word");
        for (k, (_, bp)) in blocks.iter().enumerate() {
            if bp.iter().all(|v| *v == C64::new(0.0, 0.0)) {
                continue;
            }
            let mut args = plain.clone();
            args[k] = bp.clone();
            ep += self.0.moment(letters, &args).expect("lifted word");
        }
        block_lift(&e, &ep)
    }
}

/// `Ẽ` of a model on explicit products of lifts.
///
/// # Panics
/// `eval` panics on malformed words.
pub struct LiftedModel<'a>(pub &'a InfModel);

impl OvFunctional for LiftedModel<'_> {
    fn dim(&self) -> usize {
        2 * self.0.d()
    }
    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        self.0.tilde_word(letters, inner).expect("lifted word")
    }
}

struct MomentView<'a>(&'a dyn InfFunctional);

impl OvFunctional for MomentView<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        self.0.moment(letters, inner).expect("validated word")
    }
}

/// Joint model of Boolean or monotone independent algebras, one per input
/// model (in `≺` order for the monotone kind). The joint pair is flat: each
/// algebra's tangent is moved into its elements as `x′ + [x, K]`.
pub fn inf_product(kind: Independence, algebras: &[InfModel]) -> Result<InfModel> {
    let factors: Vec<Factor> = algebras
        .iter()
        .map(|a| {
            let mut elements: Vec<Mat> = a.elements.iter().map(|e| e.x.clone()).collect();
            elements.extend(a.elements.iter().map(|e| a.pair.effective_prime(e)));
            Factor::new(a.d(), a.pair.space().state().clone(), elements)
        })
        .collect::<Result<_>>()?;
    let model = match kind {
        Independence::Boolean => boolean_star_family(&factors)?,
        Independence::Monotone => monotone_product_family(&factors)?,
        Independence::Free => {
            return Err(Error::Unsupported(
                "free products have no finite-dimensional model; use the series route".into(),
            ))
        }
    };
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    let mut offset = 0;
    for (label, a) in algebras.iter().enumerate() {
        let m = a.elements.len();
        for k in 0..m {
            elements.push(InfElement::new(
                model.elements[offset + k].matrix.clone(),
                model.elements[offset + m + k].matrix.clone(),
            )?);
            labels.push(label);
        }
        offset += 2 * m;
    }
    Ok(InfModel {
        pair: InfFunctionalPair::flat(model.space),
        elements,
        labels,
    })
}

#[derive(Clone, Debug)]
struct Run {
    alg: usize,
    letters: Vec<usize>,
    inner: Vec<Mat>,
}

/// `left · R_0 s_0 R_1 ⋯ R_{m-1} · right` with adjacent runs from different
/// algebras.
#[derive(Clone, Debug)]
struct RunWord {
    left: Mat,
    runs: Vec<Run>,
    seps: Vec<Mat>,
    right: Mat,
}

impl RunWord {
    fn from_word(d: usize, w: &TaggedWord) -> Self {
        let mut runs: Vec<Run> = Vec::new();
        let mut seps = Vec::new();
        for (k, &(alg, el)) in w.letters.iter().enumerate() {
            match runs.last_mut() {
                Some(run) if run.alg == alg => {
                    run.inner.push(w.inner[k - 1].clone());
                    run.letters.push(el);
                }
                _ => {
                    if k > 0 {
                        seps.push(w.inner[k - 1].clone());
                    }
                    runs.push(Run {
                        alg,
                        letters: vec![el],
                        inner: Vec::new(),
                    });
                }
            }
        }
        Self {
            left: w.left.clone().unwrap_or_else(|| eye(d)),
            runs,
            seps,
            right: w.right.clone().unwrap_or_else(|| eye(d)),
        }
    }

    fn to_tagged(&self) -> TaggedWord {
        let mut letters = Vec::new();
        let mut inner = Vec::new();
        for (k, run) in self.runs.iter().enumerate() {
            if k > 0 {
                inner.push(self.seps[k - 1].clone());
            }
            for (j, &l) in run.letters.iter().enumerate() {
                if j > 0 {
                    inner.push(run.inner[j - 1].clone());
                }
                letters.push((run.alg, l));
            }
        }
        TaggedWord::new(letters, inner).with_outer(self.left.clone(), self.right.clone())
    }

    /// The word with run `j` replaced by the coefficient `beta`.
    fn replace(&self, j: usize, beta: &Mat) -> Self {
        let m = self.runs.len();
        let mut out = self.clone();
        if m == 1 {
            out.left = &self.left * beta;
            out.runs.clear();
            out.seps.clear();
        } else if j == 0 {
            out.left = &self.left * beta * &self.seps[0];
            out.runs.remove(0);
            out.seps.remove(0);
        } else if j == m - 1 {
            out.right = &self.seps[m - 2] * beta * &self.right;
            out.runs.pop();
            out.seps.pop();
        } else {
            let merged = &self.seps[j - 1] * beta * &self.seps[j];
            if self.runs[j - 1].alg == self.runs[j + 1].alg {
                let next = self.runs[j + 1].clone();
                let prev = &mut out.runs[j - 1];
                prev.inner.push(merged);
                prev.inner.extend(next.inner);
                prev.letters.extend(next.letters);
                out.runs.drain(j..=j + 1);
                out.seps.drain(j - 1..=j);
            } else {
                out.runs.remove(j);
                out.seps.remove(j);
                out.seps[j - 1] = merged;
            }
        }
        out
    }
}

fn run_value(algs: &[&dyn InfFunctional], run: &Run) -> Result<(Mat, Mat)> {
    let f = algs[run.alg];
    Ok((f.moment(&run.letters, &run.inner)?, f.inf_moment(&run.letters, &run.inner)?))
}

fn e_value(kind: Independence, rw: &RunWord, algs: &[&dyn InfFunctional]) -> Result<Mat> {
    if rw.runs.is_empty() {
        return Ok(&rw.left * &rw.right);
    }
    let views: Vec<MomentView> = algs.iter().map(|f| MomentView(*f)).collect();
    let refs: Vec<&dyn OvFunctional> = views.iter().map(|v| v as &dyn OvFunctional).collect();
    mixed_moment(kind, &rw.to_tagged(), &refs)
}

fn eprime_runs(kind: Independence, rw: &RunWord, algs: &[&dyn InfFunctional]) -> Result<Mat> {
    let d = rw.left.nrows();
    let m = rw.runs.len();
    if m == 0 {
        return Ok(zeros(d));
    }
    if m == 1 {
        let (_, ep) = run_value(algs, &rw.runs[0])?;
        return Ok(&rw.left * ep * &rw.right);
    }
    match kind {
        Independence::Boolean => {
            let values: Vec<(Mat, Mat)> = rw.runs.iter().map(|r| run_value(algs, r)).collect::<Result<_>>()?;
            let mut total = zeros(d);
            for j in 0..m {
                let mut acc = rw.left.clone();
                for (k, (e, ep)) in values.iter().enumerate() {
                    if k > 0 {
                        acc *= &rw.seps[k - 1];
                    }
                    acc *= if k == j { ep } else { e };
                }
                total += acc * &rw.right;
            }
            Ok(total)
        }
        Independence::Free => {
            let mut total = zeros(d);
            for (j, run) in rw.runs.iter().enumerate() {
                let (e, ep) = run_value(algs, run)?;
                if op_norm(&e) > 1e-9 {
                    return Err(invalid("the free rule needs centered letters; center the word first"));
                }
                total += e_value(Independence::Free, &rw.replace(j, &ep), algs)?;
            }
            Ok(total)
        }
        Independence::Monotone => {
            let j = (0..m)
                .find(|&k| {
                    let a = rw.runs[k].alg;
                    (k == 0 || rw.runs[k - 1].alg < a) && (k + 1 == m || rw.runs[k + 1].alg < a)
                })
                .expect("a maximal algebra index is a local maximum");
            let (e, ep) = run_value(algs, &rw.runs[j])?;
            Ok(eprime_runs(kind, &rw.replace(j, &e), algs)? + e_value(kind, &rw.replace(j, &ep), algs)?)
        }
    }
}

/// `E′` of a word over infinitesimally independent algebras, from the
/// single-algebra pairs through the Leibniz-type rules: Boolean
/// `Σ_j E[x₁]⋯E′[x_j]⋯E[x_n]`; free `Σ_j E[x₁⋯E′[x_j]⋯x_n]` (centered
/// letters only); monotone `E′[⋯E[x_j]⋯] + E[⋯E′[x_j]⋯]` at a peak `j`.
pub fn eprime_word(kind: Independence, word: &TaggedWord, algebras: &[&dyn InfFunctional]) -> Result<Mat> {
    let d = algebras.first().map(|f| f.dim()).ok_or_else(|| invalid("need at least one algebra"))?;
    if algebras.iter().any(|f| f.dim() != d) {
        return Err(invalid("algebras disagree on the coefficient dimension"));
    }
    if word.letters.is_empty() || word.inner.len() + 1 != word.letters.len() {
        return Err(invalid("a word needs one inner coefficient between consecutive letters"));
    }
    if word.letters.iter().any(|&(a, _)| a >= algebras.len()) {
        return Err(invalid("word uses an unknown algebra"));
    }
    eprime_runs(kind, &RunWord::from_word(d, word), algebras)
}

/// A linear map on `M_d`, stored by its values on matrix units.
#[derive(Clone, Debug)]
pub struct LinearMap {
    d: usize,
    images: Vec<Mat>,
}

impl LinearMap {
    pub fn from_fn(d: usize, f: impl Fn(&Mat) -> Mat) -> Self {
        let images = (0..d * d).map(|k| f(&unit(d, k / d, k % d))).collect();
        Self { d, images }
    }

    pub fn try_from_fn(d: usize, mut f: impl FnMut(&Mat) -> Result<Mat>) -> Result<Self> {
        let images = (0..d * d).map(|k| f(&unit(d, k / d, k % d))).collect::<Result<_>>()?;
        Ok(Self { d, images })
    }

    pub fn zero(d: usize) -> Self {
        Self::from_fn(d, |_| zeros(d))
    }

    /// `b ↦ Σ L_r* b K_r + K_r* b L_r`.
    pub fn from_kraus_pair(kraus: &[Mat], primes: &[Mat]) -> Result<Self> {
        let d = kraus.first().map(|k| k.nrows()).ok_or_else(|| invalid("need at least one Kraus operator"))?;
        if kraus.len() != primes.len() || kraus.iter().chain(primes).any(|m| m.nrows() != d || m.ncols() != d) {
            return Err(invalid("Kraus pairs must share one square shape"));
        }
        Ok(Self::from_fn(d, |b| {
            kraus
                .iter()
                .zip(primes)
                .fold(zeros(d), |acc, (k, l)| acc + l.adjoint() * b * k + k.adjoint() * b * l)
        }))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn apply(&self, b: &Mat) -> Mat {
        let d = self.d;
        let mut out = zeros(d);
        for (k, img) in self.images.iter().enumerate() {
            let v = b[(k / d, k % d)];
            if v != C64::new(0.0, 0.0) {
                out += img * v;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(invalid("maps act on different algebras"));
        }
        Ok(Self {
            d: self.d,
            images: self.images.iter().zip(&other.images).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            d: self.d,
            images: self.images.iter().map(|m| m * c(s, 0.0)).collect(),
        }
    }

    /// `φ(b*) = φ(b)*`.
    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        let d = self.d;
        (0..d).all(|i| (0..d).all(|j| op_norm(&(&self.images[j * d + i] - self.images[i * d + j].adjoint())) <= tol))
    }

    /// `Σ E_ij ⊗ φ(E_ij)`.
    pub fn choi(&self) -> Mat {
        let d = self.d;
        (0..d * d).fold(zeros(d * d), |acc, k| acc + kron(&unit(d, k / d, k % d), &self.images[k]))
    }

    /// `sup_{‖b‖ ≤ 1} ‖φ(b) − ψ(b)‖` over a unitary net.
    pub fn distance(&self, other: &Self, net: usize, seed: u64) -> Result<f64> {
        if self.d != other.d {
            return Err(invalid("maps act on different algebras"));
        }
        Ok(sup_over_unitaries(self.d, net, seed, |u| op_norm(&(self.apply(u) - other.apply(u)))))
    }
}

/// Infinitesimal variance `(η, η′)`.
#[derive(Clone, Debug)]
pub struct InfVariance {
    pub eta: KrausMap,
    pub eta_prime: LinearMap,
}

impl InfVariance {
    pub fn new(eta: KrausMap, eta_prime: LinearMap) -> Result<Self> {
        if eta.d() != eta_prime.d() {
            return Err(invalid("η and η′ act on different algebras"));
        }
        let scale = (0..eta_prime.d * eta_prime.d).fold(1.0f64, |acc, k| acc.max(op_norm(&eta_prime.images[k])));
        if !eta_prime.is_self_adjoint(1e-10 * scale) {
            return Err(invalid("η′ must be self-adjoint"));
        }
        Ok(Self { eta, eta_prime })
    }

    /// Scalar data `(v, s)`.
    pub fn scalar(v: f64, s: f64) -> Result<Self> {
        Self::new(KrausMap::scalar(v)?, LinearMap::from_fn(1, |b| b * c(s, 0.0)))
    }

    /// `(η, η′)` from Kraus pairs: `η = Σ K*·K`, `η′ = Σ K*·L + L*·K`.
    pub fn from_kraus_pair(kraus: &[Mat], primes: &[Mat]) -> Result<Self> {
        Self::new(KrausMap::new(kraus.to_vec())?, LinearMap::from_kraus_pair(kraus, primes)?)
    }

    pub fn d(&self) -> usize {
        self.eta.d()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            eta: self.eta.scaled(s),
            eta_prime: self.eta_prime.scaled(s),
        }
    }

    /// `η̃[[b, b′], [0, b]] = [[η(b), η′(b) + η(b′)], [0, η(b)]]`.
    pub fn apply_lifted(&self, lifted: &Mat) -> Mat {
        let (b, bp) = lift_blocks_unchecked(lifted);
        let e = self.eta.apply(&b);
        block_lift(&e, &(self.eta_prime.apply(&b) + self.eta.apply(&bp)))
    }
}

/// `(η₁ + η₂, η′₁ + η′₂)`.
pub fn inf_variance_add(v1: &InfVariance, v2: &InfVariance) -> Result<InfVariance> {
    if v1.d() != v2.d() {
        return Err(invalid("variances act on different algebras"));
    }
    let kraus: Vec<Mat> = v1.eta.kraus().iter().chain(v2.eta.kraus()).cloned().collect();
    InfVariance::new(KrausMap::new(kraus)?, v1.eta_prime.add(&v2.eta_prime)?)
}

/// Value of the nested pairing on letters `lo..hi`, with the block opened
/// at `marked` evaluated by `η′`.
fn pairing_value(partner: &[usize], inner: &[Mat], lo: usize, hi: usize, v: &InfVariance, marked: Option<usize>) -> Mat {
    let p = partner[lo];
    let mid = if p == lo + 1 {
        inner[lo].clone()
    } else {
        &inner[lo] * pairing_value(partner, inner, lo + 1, p, v, marked) * &inner[p - 1]
    };
    let head = if marked == Some(lo) { v.eta_prime.apply(&mid) } else { v.eta.apply(&mid) };
    if p + 1 == hi {
        head
    } else {
        head * &inner[p] * pairing_value(partner, inner, p + 1, hi, v, marked)
    }
}

/// `E[b₀ x b₁ ⋯ x b_k]` and `E′[b₀ x b₁ ⋯ x b_k]` for the infinitesimal
/// semicircular (free), Bernoulli (Boolean) or arcsine (monotone) element
/// with variance `(η, η′)`. The infinitesimal value sums, over the pairings
/// of the limit law, all ways of evaluating one block by `η′`.
pub fn inf_limit_moments(kind: Independence, v: &InfVariance, args: &[Mat]) -> Result<(Mat, Mat)> {
    let d = v.d();
    let k = args.len().checked_sub(1).ok_or_else(|| invalid("need at least b_0"))?;
    if k > MAX_INF_ORDER {
        return Err(Error::SizeLimit {
            what: "infinitesimal moment order",
            got: k,
            max: MAX_INF_ORDER,
        });
    }
    if args.iter().any(|b| b.nrows() != d || b.ncols() != d) {
        return Err(invalid(format!("coefficients must be {d}×{d}")));
    }
    let e = limit_moments(kind, d, &|b: &Mat| v.eta.apply(b), args)?;
    if k == 0 || k % 2 == 1 {
        return Ok((e, zeros(d)));
    }
    let inner = &args[1..k];
    let pairings: Vec<(Vec<usize>, f64)> = match kind {
        Independence::Boolean => {
            let partner = (0..k).map(|i| i ^ 1).collect();
            vec![(partner, 1.0)]
        }
        Independence::Free | Independence::Monotone => enumerate(k, PartitionClass::NoncrossingPair)?
            .map(|pi| {
                let mut partner = vec![0; k];
                for b in pi.blocks() {
                    partner[b[0] - 1] = b[1] - 1;
                    partner[b[1] - 1] = b[0] - 1;
                }
                (partner, kind.weight(&pi))
            })
            .collect(),
    };
    let mut total = zeros(d);
    for (partner, w) in &pairings {
        for open in (0..k).filter(|&i| partner[i] > i) {
            total += pairing_value(partner, inner, 0, k, v, Some(open)) * c(*w, 0.0);
        }
    }
    Ok((e, &args[0] * total * &args[k]))
}

/// The infinitesimal limit element as a single-letter functional.
pub struct InfLimit {
    pub kind: Independence,
    pub variance: InfVariance,
}

impl InfLimit {
    fn args(&self, inner: &[Mat]) -> Vec<Mat> {
        let d = self.variance.d();
        let mut args = vec![eye(d)];
        args.extend(inner.iter().cloned());
        args.push(eye(d));
        args
    }
}

impl InfFunctional for InfLimit {
    fn dim(&self) -> usize {
        self.variance.d()
    }
    fn moment(&self, letters: &[usize], inner: &[Mat]) -> Result<Mat> {
        if inner.len() + 1 != letters.len() {
            return Err(invalid("a word needs one inner coefficient between consecutive letters"));
        }
        Ok(inf_limit_moments(self.kind, &self.variance, &self.args(inner))?.0)
    }
    fn inf_moment(&self, letters: &[usize], inner: &[Mat]) -> Result<Mat> {
        if inner.len() + 1 != letters.len() {
            return Err(invalid("a word needs one inner coefficient between consecutive letters"));
        }
        Ok(inf_limit_moments(self.kind, &self.variance, &self.args(inner))?.1)
    }
}

/// `G(b) = (b − η(b⁻¹))⁻¹` and `∂G(b) = G η′(b⁻¹) G` of the infinitesimal
/// Bernoulli element.
pub fn inf_bernoulli_cauchy(v: &InfVariance, b: &Mat) -> Result<(Mat, Mat)> {
    let binv = inverse(b)?;
    let g = inverse(&(b - v.eta.apply(&binv)))?;
    let dg = &g * v.eta_prime.apply(&binv) * &g;
    Ok((g, dg))
}

/// How sums of infinitesimally independent elements are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InfRoute {
    /// Joint Boolean star or monotone tensor model.
    Model,
    /// Scalar moment series over dual numbers (`d = 1`, any kind).
    Series,
    /// Scalar reciprocal Cauchy transforms over dual numbers: sums of
    /// `F − z` (Boolean) or compositions of `F` (monotone), `d = 1`.
    Transform,
}

/// Scalar moments `m_k + ε m′_k`, `k ≤ order`, of element `k` of a model
/// over `ℂ`.
pub fn scalar_inf_moments(model: &InfModel, k: usize, order: usize) -> Result<Vec<Dual>> {
    model.check_letter(k)?;
    if model.d() != 1 {
        return Err(invalid("scalar moments need d = 1"));
    }
    let e = &model.elements[k];
    let xi = Mat::from_column_slice(model.pair.space().dim(), 1, model.pair.space().state().as_slice());
    let h = Mat::from_column_slice(xi.nrows(), 1, model.pair.tangent().as_slice());
    let mut bot_xi = xi.clone();
    let mut bot_h = h.clone();
    let mut top = Mat::zeros(xi.nrows(), 1);
    let mut out = Vec::with_capacity(order + 1);
    for _ in 0..=order {
        let m = (xi.adjoint() * &bot_xi)[(0, 0)].re;
        let dm = (xi.adjoint() * &top + xi.adjoint() * &bot_h + h.adjoint() * &bot_xi)[(0, 0)].re;
        out.push(Dual::new(m, dm));
        top = &e.x * top + &e.x_prime * &bot_xi;
        bot_xi = &e.x * bot_xi;
        bot_h = &e.x * bot_h;
    }
    Ok(out)
}

fn series_inverse(a: &[Dual]) -> Vec<Dual> {
    // a_0 = 1
    let mut inv = vec![Dual::zero(); a.len()];
    inv[0] = Dual::one();
    for n in 1..a.len() {
        inv[n] = -(1..=n).fold(Dual::zero(), |acc, k| acc + a[k] * inv[n - k]);
    }
    inv
}

/// Free moment-cumulant recursion `m_n = Σ_s κ_s [u^{n−s}] M(u)^s`,
/// run forwards (cumulants to moments) or backwards.
fn free_transform(input: &[Dual], forward: bool) -> Vec<Dual> {
    let k_max = input.len() - 1;
    let (mut m, mut kappa) = if forward {
        (vec![Dual::zero(); k_max + 1], input.to_vec())
    } else {
        (input.to_vec(), vec![Dual::zero(); k_max + 1])
    };
    m[0] = Dual::one();
    // pw[s][j] = [u^j] M(u)^s
    let mut pw = vec![vec![Dual::zero(); k_max + 1]; k_max + 1];
    pw[0][0] = Dual::one();
    for n in 1..=k_max {
        let mut rest = Dual::zero();
        for s in 1..n {
            let j = n - s;
            pw[s][j] = (0..=j).fold(Dual::zero(), |acc, i| acc + m[i] * pw[s - 1][j - i]);
            rest = rest + kappa[s] * pw[s][j];
        }
        pw[n][0] = Dual::one();
        if forward {
            m[n] = kappa[n] + rest;
        } else {
            kappa[n] = m[n] - rest;
        }
    }
    if forward {
        m
    } else {
        kappa
    }
}

/// Moments of the sum of infinitesimally independent scalar elements from
/// their dual-number moments. Monotone order is `laws[0] ≺ laws[1] ≺ ⋯`.
pub fn inf_convolution_moments(kind: Independence, laws: &[Vec<Dual>], order: usize) -> Result<Vec<Dual>> {
    let width = order + 1;
    if laws.is_empty() || laws.iter().any(|m| m.len() < width || (m[0].re - 1.0).abs() > 1e-12 || m[0].eps.abs() > 1e-12) {
        return Err(invalid(format!("every law needs normalized moments m_0..=m_{order}")));
    }
    let laws: Vec<Vec<Dual>> = laws.iter().map(|m| m[..width].to_vec()).collect();
    Ok(match kind {
        Independence::Monotone => monotone_convolution_moments(&laws, order)?,
        Independence::Boolean => {
            // M = 1/(1 − β), β = Σ (1 − 1/M_i)
            let mut beta = vec![Dual::zero(); width];
            for m in &laws {
                let inv = series_inverse(m);
                for k in 1..width {
                    beta[k] = beta[k] - inv[k];
                }
            }
            let one_minus: Vec<Dual> = (0..width).map(|k| if k == 0 { Dual::one() } else { -beta[k] }).collect();
            series_inverse(&one_minus)
        }
        Independence::Free => {
            let mut kappa = vec![Dual::zero(); width];
            let mut last: Option<(&Vec<Dual>, Vec<Dual>)> = None;
            for m in &laws {
                let k_m = match &last {
                    Some((prev, k)) if *prev == m => k.clone(),
                    _ => free_transform(m, false),
                };
                for (acc, k) in kappa.iter_mut().zip(&k_m) {
                    *acc = *acc + *k;
                }
                last = Some((m, k_m));
            }
            free_transform(&kappa, true)
        }
    })
}

/// Scalar moments of the infinitesimal limit element with data `(v, s)`.
pub fn limit_law_inf_moments(kind: Independence, v: f64, s: f64, order: usize) -> Vec<Dual> {
    let mut out = vec![Dual::zero(); order + 1];
    let mut coef = 1.0;
    for k in 0..=order / 2 {
        let re = coef * v.powi(k as i32);
        let eps = if k == 0 { 0.0 } else { coef * k as f64 * v.powi(k as i32 - 1) * s };
        out[2 * k] = Dual::new(re, eps);
        let kf = k as f64;
        coef *= match kind {
            Independence::Boolean => 1.0,
            Independence::Free => 2.0 * (2.0 * kf + 1.0) / (kf + 2.0),
            Independence::Monotone => (2.0 * kf + 1.0) / (kf + 1.0),
        };
    }
    out
}

/// `(Σ m_k z^{-k-1}, Σ m′_k z^{-k-1})`.
pub fn series_cauchy(m: &[Dual], z: C64) -> (C64, C64) {
    let w = z.inv();
    let (mut g, mut dg) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for t in m.iter().rev() {
        g = g * w + t.re;
        dg = dg * w + t.eps;
    }
    (g * w, dg * w)
}

/// [`series_cauchy`] after checking that the last terms are negligible.
pub fn series_cauchy_checked(m: &[Dual], z: C64) -> Result<(C64, C64)> {
    let (g, dg) = series_cauchy(m, z);
    let k0 = m.len() - m.len().div_ceil(10).max(2).min(m.len());
    let tail = m
        .iter()
        .enumerate()
        .skip(k0)
        .map(|(k, t)| (t.re.abs() + t.eps.abs()) / z.norm().powi(k as i32 + 1))
        .fold(0.0f64, f64::max);
    if !(tail <= 1e-14 * (1.0 + g.norm() + dg.norm())) || !g.is_finite() || !dg.is_finite() {
        return Err(Error::Domain(format!(
            "moment series has not converged at z = {z}; move z further from the support"
        )));
    }
    Ok((g, dg))
}

/// Series length giving ~1e-16 truncation error for support radius `r`.
fn series_order(radius: f64, z: C64) -> usize {
    let q = radius / z.norm();
    let n = if q == 0.0 { 8.0 } else { 43.0 / -q.ln() + 8.0 };
    if q < 1.0 && n <= MAX_SERIES_ORDER as f64 {
        n.ceil() as usize
    } else {
        MAX_SERIES_ORDER
    }
}

fn scalar_z(b: &Mat) -> Result<C64> {
    if b.nrows() != 1 || b.ncols() != 1 {
        return Err(Error::Unsupported("this route needs scalar coefficients (d = 1)".into()));
    }
    if !(b[(0, 0)].im > 0.0) {
        return Err(Error::Domain(format!("{} is not in the upper half-plane", b[(0, 0)])));
    }
    Ok(b[(0, 0)])
}

/// Spectral data of a scalar element for exact transform evaluation.
struct ScalarSpectrum {
    lambda: Vec<f64>,
    xi: Vec<C64>,
    eta: Vec<C64>,
    xp: Mat,
}

impl ScalarSpectrum {
    fn new(model: &InfModel) -> Result<Self> {
        if model.d() != 1 || model.elements.len() != 1 {
            return Err(invalid("scalar transforms need one element over ℂ"));
        }
        let e = &model.elements[0];
        let (lambda, v) = crate::linalg::hermitian_eigen(&e.x);
        let rot = |u: &Vector| (v.adjoint() * u).iter().copied().collect::<Vec<_>>();
        Ok(Self {
            lambda,
            xi: rot(model.pair.space().state()),
            eta: rot(model.pair.tangent()),
            xp: v.adjoint() * &e.x_prime * &v,
        })
    }

    /// `(G(z), G′(z), ∂G(z))`.
    fn eval(&self, z: C64) -> (C64, C64, C64) {
        let r: Vec<C64> = self.lambda.iter().map(|&l| (z - l).inv()).collect();
        let (mut g, mut dz, mut dg) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for p in 0..r.len() {
            let w = self.xi[p].norm_sqr();
            g += r[p] * w;
            dz -= r[p] * r[p] * w;
            dg += r[p] * (self.xi[p].conj() * self.eta[p] + self.eta[p].conj() * self.xi[p]);
            for q in 0..r.len() {
                dg += self.xi[p].conj() * self.xp[(p, q)] * self.xi[q] * r[p] * r[q];
            }
        }
        (g, dz, dg)
    }

    /// `(F(z), F′(z), ∂F(z))` with `F = 1/G`.
    fn eval_f(&self, z: C64) -> (C64, C64, C64) {
        let (g, dz, dg) = self.eval(z);
        let g2 = g * g;
        (g.inv(), -dz / g2, -dg / g2)
    }
}

/// `(G, ∂G)` of the sum of one infinitesimally independent element from
/// each model.
pub fn inf_sum_cauchy(kind: Independence, family: &[InfModel], b: &Mat, route: InfRoute) -> Result<(Mat, Mat)> {
    if family.is_empty() {
        return Err(invalid("need at least one summand"));
    }
    if family.iter().any(|m| m.elements.len() != 1) {
        return Err(invalid("each summand model must hold exactly one element"));
    }
    let scalar = |g: C64, dg: C64| (Mat::from_element(1, 1, g), Mat::from_element(1, 1, dg));
    match route {
        InfRoute::Model => {
            let joint = inf_product(kind, family)?;
            let all: Vec<usize> = (0..joint.elements.len()).collect();
            joint.inf_cauchy(&all, b)
        }
        InfRoute::Series => {
            let z = scalar_z(b)?;
            let radius: f64 = family.iter().map(|m| op_norm(&m.elements[0].x)).sum();
            let order = series_order(radius, z);
            let mut laws: Vec<Vec<Dual>> = Vec::with_capacity(family.len());
            for m in family {
                laws.push(scalar_inf_moments(m, 0, order)?);
            }
            let (g, dg) = series_cauchy_checked(&inf_convolution_moments(kind, &laws, order)?, z)?;
            Ok(scalar(g, dg))
        }
        InfRoute::Transform => {
            let z = scalar_z(b)?;
            let spectra: Vec<ScalarSpectrum> = family.iter().map(ScalarSpectrum::new).collect::<Result<_>>()?;
            let (f, df) = match kind {
                Independence::Boolean => spectra.iter().fold((z, C64::new(0.0, 0.0)), |(f, df), s| {
                    let (fj, _, dfj) = s.eval_f(z);
                    (f + fj - z, df + dfj)
                }),
                // F = F₁ ∘ ⋯ ∘ F_N, innermost F_N
                Independence::Monotone => spectra.iter().rev().fold((z, C64::new(0.0, 0.0)), |(h, dh), s| {
                    let (fj, fz, dfj) = s.eval_f(h);
                    (fj, dfj + fz * dh)
                }),
                Independence::Free => {
                    return Err(Error::Unsupported("free sums use the series route".into()));
                }
            };
            Ok(scalar(f.inv(), -df / (f * f)))
        }
    }
}

fn sqrt_branch(z: C64, a: f64) -> C64 {
    // √(z − a)√(z + a) ~ z at infinity, analytic off [−a, a]
    (z - a).sqrt() * (z + a).sqrt()
}

/// `(G, ∂G)` of the scalar infinitesimal semicircular (free), Bernoulli
/// (Boolean) or arcsine (monotone) element with data `(v, s)`.
pub fn scalar_limit_cauchy(kind: Independence, v: f64, s: f64, z: C64) -> Result<(C64, C64)> {
    if !(v > 0.0) {
        return Err(invalid("variance must be positive"));
    }
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("{z} is not in the upper half-plane")));
    }
    Ok(match kind {
        Independence::Boolean => {
            let g = (z - v / z).inv();
            (g, g * g * s / z)
        }
        Independence::Free => {
            let w = sqrt_branch(z, 2.0 * v.sqrt());
            let g = (z - w) / (2.0 * v);
            (g, s * g * g / (z - 2.0 * v * g))
        }
        Independence::Monotone => {
            let g = sqrt_branch(z, (2.0 * v).sqrt()).inv();
            (g, s * g * g * g)
        }
    })
}

fn check_centered(m: &InfModel) -> Result<()> {
    let e = &m.elements[0];
    if !e.is_self_adjoint() {
        return Err(invalid("summands must be self-adjoint"));
    }
    let tol = 1e-10 * e.lift_norm().max(1.0);
    if op_norm(&m.moment(&[0], &[])?) > tol || op_norm(&m.inf_moment(&[0], &[])?) > tol {
        return Err(invalid("summands must be centered under E and E′"));
    }
    Ok(())
}

fn check_assumption(xs: &[InfModel], ys: &[InfModel]) -> Result<()> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(invalid("families must be nonempty and of equal length"));
    }
    let d = xs[0].d();
    for (x, y) in xs.iter().zip(ys) {
        if x.elements.len() != 1 || y.elements.len() != 1 || x.d() != d || y.d() != d {
            return Err(invalid("each member is a one-element model over M_d"));
        }
        check_centered(x)?;
        check_centered(y)?;
        let scale = x.elements[0].lift_norm().max(y.elements[0].lift_norm()).max(1.0).powi(2);
        for k in 0..d * d {
            let e = [unit(d, k / d, k % d)];
            let gap = op_norm(&(x.moment(&[0, 0], &e)? - y.moment(&[0, 0], &e)?));
            let gap_p = op_norm(&(x.inf_moment(&[0, 0], &e)? - y.inf_moment(&[0, 0], &e)?));
            if gap.max(gap_p) > 1e-9 * scale {
                return Err(invalid("families must share E and E′ second moments"));
            }
        }
    }
    Ok(())
}

/// `‖E′[G_{Σx}(b)] − E′[G_{Σy}(b)]‖` against
/// `2N‖(Im b)⁻¹‖⁴(maxᵢ‖xᵢ‖³ + maxᵢ‖yᵢ‖³)` with lift norms.
pub fn inf_bound_gap(kind: Independence, xs: &[InfModel], ys: &[InfModel], b: &Mat) -> Result<Gap> {
    let route = if kind == Independence::Free { InfRoute::Series } else { InfRoute::Model };
    inf_bound_gap_via(kind, xs, ys, b, route)
}

/// [`inf_bound_gap`] with an explicit evaluation route.
pub fn inf_bound_gap_via(kind: Independence, xs: &[InfModel], ys: &[InfModel], b: &Mat, route: InfRoute) -> Result<Gap> {
    check_assumption(xs, ys)?;
    let r = inv_imag_norm(b)?;
    let (_, dx) = inf_sum_cauchy(kind, xs, b, route)?;
    let (_, dy) = inf_sum_cauchy(kind, ys, b, route)?;
    let cube = |f: &[InfModel]| f.iter().map(|m| m.elements[0].lift_norm().powi(3)).fold(0.0, f64::max);
    Ok(Gap {
        lhs: op_norm(&(dx - dy)),
        rhs: 2.0 * xs.len() as f64 * r.powi(4) * (cube(xs) + cube(ys)),
    })
}

/// Infinitesimal CLT gap for `n` independent copies of `summand` scaled by
/// `1/√n`, against the infinitesimal Bernoulli (Boolean), semicircular
/// (free) or arcsine (monotone) element with the same variance. The bound is
/// `(2/√n)‖(Im b)⁻¹‖⁴(‖x‖³ + c‖E[x²]‖^{3/2})` with `c = 1` for the Boolean
/// kind and `c = 8` otherwise. Scalar summands use the transform route
/// (series for the free kind); operator-valued ones need the Boolean kind.
pub fn inf_clt_gap(kind: Independence, summand: &InfModel, n: usize, b: &Mat) -> Result<Gap> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if summand.elements.len() != 1 {
        return Err(invalid("the summand model must hold exactly one element"));
    }
    check_centered(summand)?;
    let r = inv_imag_norm(b)?;
    let family = vec![summand.scaled(1.0 / (n as f64).sqrt()); n];
    let v = summand.second_moments(0)?;
    let lhs = if kind == Independence::Boolean && summand.d() > 1 {
        let (_, ds) = inf_sum_cauchy(kind, &family, b, InfRoute::Model)?;
        let (_, dt) = inf_bernoulli_cauchy(&v, b)?;
        op_norm(&(ds - dt))
    } else {
        let z = scalar_z(b)?;
        let route = if kind == Independence::Free { InfRoute::Series } else { InfRoute::Transform };
        let (_, ds) = inf_sum_cauchy(kind, &family, b, route)?;
        let var = v.eta.apply(&eye(1))[(0, 0)].re;
        let s = v.eta_prime.apply(&eye(1))[(0, 0)].re;
        let (_, dt) = scalar_limit_cauchy(kind, var, s, z)?;
        (ds[(0, 0)] - dt).norm()
    };
    let c8 = if kind == Independence::Boolean { 1.0 } else { 8.0 };
    let second = op_norm(&summand.moment(&[0, 0], &[eye(summand.d())])?);
    Ok(Gap {
        lhs,
        rhs: 2.0 / (n as f64).sqrt() * r.powi(4) * (summand.elements[0].lift_norm().powi(3) + c8 * second.powf(1.5)),
    })
}

/// `‖∂G₀(b) − ∂G₁(b)‖` for two infinitesimal Bernoulli elements against
/// `9‖(Im b)⁻¹‖³(‖η₀ − η₁‖ + ‖η′₀ − η′₁‖)`.
pub fn inf_comparison_gap(v0: &InfVariance, v1: &InfVariance, b: &Mat, net: usize, seed: u64) -> Result<Gap> {
    let r = inv_imag_norm(b)?;
    let (_, d0) = inf_bernoulli_cauchy(v0, b)?;
    let (_, d1) = inf_bernoulli_cauchy(v1, b)?;
    let dist = map_distance(&v0.eta, &v1.eta, net, seed)? + v0.eta_prime.distance(&v1.eta_prime, net, seed)?;
    Ok(Gap {
        lhs: op_norm(&(d0 - d1)),
        rhs: 9.0 * r.powi(3) * dist,
    })
}

/// Orthonormal basis of the span of `vs` (Gram–Schmidt, dropping
/// dependent vectors).
fn orthonormalize(vs: &[Vector]) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let p = q.dotc(&w);
                w -= q * p;
            }
        }
        let n = w.norm();
        if n > 1e-10 * v.norm().max(1e-300) && n > 1e-14 {
            basis.push(w / c(n, 0.0));
        }
    }
    basis
}

/// Largest relative disagreement between the three descriptions of a
/// random two-algebra product over `words` random words of length up to
/// `max_len`: the word rule for `E′`, the lifted product of `(E, E′)` and
/// the joint lift (Boolean and monotone). For the free kind, whose joint
/// pair has no operator model here, the word rule on alternating centered
/// words is compared with the lifted free product.
pub fn lift_equivalence_residual(kind: Independence, d: usize, words: usize, max_len: usize, seed: u64) -> Result<f64> {
    let mut r = crate::linalg::rng(seed);
    let room = d * d + 2;
    let algebra = |dim: usize, r: &mut rand_chacha::ChaCha8Rng| -> Result<InfModel> {
        let mut a = InfModel::random_centered(r, d, dim, 0.8, 0.6)?;
        let h = random_hermitian(r, d * dim) * c(0.5, 0.0);
        let x = if kind == Independence::Free {
            &h - a.pair.space().amplify(&a.pair.expect(&h)?)
        } else {
            h
        };
        let xp = random_hermitian(r, d * dim) * c(0.5, 0.0);
        a.elements.push(InfElement::new(x, xp)?);
        a.labels.push(0);
        Ok(a.scaled(0.5))
    };
    let a = algebra(room + 1, &mut r)?;
    let b = algebra(room, &mut r)?;
    let joint = match kind {
        Independence::Free => None,
        _ => Some(inf_product(kind, &[a.clone(), b.clone()])?),
    };
    let mut worst = 0.0f64;
    for k in 0..words {
        let len = 1 + k % max_len.max(1);
        let first = r.random_range(0..2);
        let letters: Vec<(usize, usize)> = (0..len)
            .map(|j| match kind {
                Independence::Free => ((first + j) % 2, r.random_range(0..2)),
                _ => (r.random_range(0..2), r.random_range(0..2)),
            })
            .collect();
        let inner: Vec<Mat> = (1..len).map(|_| crate::linalg::random_complex(&mut r, d, d)).collect();
        let word = TaggedWord::new(letters.clone(), inner.clone());
        let lifted_word = TaggedWord::new(letters.clone(), inner.iter().map(diag_lift).collect());
        let rule = eprime_word(kind, &word, &[&a, &b])?;
        let lifted = mixed_moment(kind, &lifted_word, &[&Lifted(&a), &Lifted(&b)])?;
        let rel = |m: &Mat, reference: &Mat| op_norm(&(m - reference)) / op_norm(reference).max(1.0);
        match &joint {
            Some(joint) => {
                let globals: Vec<usize> = letters.iter().map(|&(alg, e)| alg * 2 + e).collect();
                let t = joint.tilde_word(&globals, &lifted_word.inner)?;
                let (_, tp) = lift_blocks(&t)?;
                worst = worst.max(rel(&rule, &tp)).max(rel(&lifted, &t));
            }
            None => worst = worst.max(rel(&rule, &lift_blocks(&lifted)?.1)),
        }
    }
    Ok(worst)
}

/// Largest ratio `‖Ẽ[A]‖ / ‖A‖` over `samples` random lifts, with the lift
/// norm `‖a‖ + ‖a′‖`.
pub fn tilde_norm_ratio(pair: &InfFunctionalPair, samples: usize, seed: u64) -> Result<f64> {
    let mut r = crate::linalg::rng(seed);
    let n = pair.space().total_dim();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let e = InfElement::new(crate::linalg::random_complex(&mut r, n, n), crate::linalg::random_complex(&mut r, n, n))?;
        let (ea, eap) = lift_blocks(&pair.tilde_e(&e.lift())?)?;
        worst = worst.max((op_norm(&ea) + op_norm(&eap)) / e.lift_norm());
    }
    Ok(worst)
}

impl InfVariance {
    /// `(η, η′)` from `rank` random Kraus pairs with entries of size about
    /// 0.6 and 0.3.
    pub fn random(rng: &mut impl Rng, d: usize, rank: usize) -> Result<Self> {
        let k: Vec<Mat> = (0..rank).map(|_| crate::linalg::random_complex(rng, d, d) * c(0.6, 0.0)).collect();
        let l: Vec<Mat> = (0..rank).map(|_| crate::linalg::random_complex(rng, d, d) * c(0.3, 0.0)).collect();
        Self::from_kraus_pair(&k, &l)
    }
}
