//! Finite-dimensional operator models: Boolean star products, monotone
//! tensor products, η-circular elements and matrices with Boolean entries.
//!
//! Every model lives on `ℂ^d ⊗ ℂ^D` with the coefficient algebra acting as
//! `b ⊗ 1` and conditional expectation `E = id_d ⊗ ⟨ξ, · ξ⟩`.

use serde::{Deserialize, Serialize};

use crate::cumulant::OvFunctional;
use crate::error::{invalid, Error, Result};
use crate::linalg::{c, contract, eye, hermitian_eigen, is_hermitian, kron, op_norm, unit, vacuum_frame, zeros, Mat, Vector, C64};
use crate::transform::AtomicMeasure;

/// Largest total dimension `d·D` of a model.
pub const MAX_DIM: usize = 4096;

fn check_dim(what: &'static str, got: usize) -> Result<()> {
    if got > MAX_DIM {
        Err(Error::SizeLimit { what, got, max: MAX_DIM })
    } else {
        Ok(())
    }
}

/// The Hilbert space `ℂ^d ⊗ ℂ^D` with its state vector `ξ ∈ ℂ^D`.
#[derive(Clone, Debug)]
pub struct OperatorSpace {
    dim: usize,
    state: Vector,
    b_dim: usize,
}

impl OperatorSpace {
    pub fn new(state: Vector, b_dim: usize) -> Result<Self> {
        if state.is_empty() || b_dim == 0 {
            return Err(invalid("spaces need positive dimensions"));
        }
        if (state.norm() - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("state vector has norm {}", state.norm())));
        }
        check_dim("model dimension", state.len() * b_dim)?;
        Ok(Self {
            dim: state.len(),
            state,
            b_dim,
        })
    }

    /// `ℂ^d ⊗ ℂ^D` with `ξ = e₀`.
    pub fn with_vacuum(dim: usize, b_dim: usize) -> Result<Self> {
        let mut state = Vector::zeros(dim.max(1));
        state[0] = c(1.0, 0.0);
        Self::new(state, b_dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn b_dim(&self) -> usize {
        self.b_dim
    }

    pub fn state(&self) -> &Vector {
        &self.state
    }

    pub fn total_dim(&self) -> usize {
        self.dim * self.b_dim
    }

    /// `b ⊗ 1_D`.
    pub fn amplify(&self, b: &Mat) -> Mat {
        kron(b, &eye(self.dim))
    }

    fn check_operator(&self, x: &Mat) -> Result<()> {
        let n = self.total_dim();
        if x.nrows() != n || x.ncols() != n {
            return Err(invalid(format!("operator is {}×{}, space has dimension {n}", x.nrows(), x.ncols())));
        }
        Ok(())
    }

    fn check_coefficient(&self, b: &Mat) -> Result<()> {
        if b.nrows() != self.b_dim || b.ncols() != self.b_dim {
            return Err(invalid(format!("coefficient must be {0}×{0}", self.b_dim)));
        }
        Ok(())
    }

    /// `E[x] = (id_d ⊗ ⟨ξ, · ξ⟩)(x)`.
    pub fn expect(&self, x: &Mat) -> Result<Mat> {
        self.check_operator(x)?;
        Ok(contract(x, self.b_dim, &self.state))
    }

    /// `(b ⊗ 1) v` for a block column `v` with `d·D` rows.
    pub(crate) fn apply_coefficient(&self, b: &Mat, v: &Mat) -> Mat {
        let dim = self.dim;
        Mat::from_fn(v.nrows(), v.ncols(), |row, col| {
            let (a, j) = (row / dim, row % dim);
            (0..self.b_dim).map(|k| b[(a, k)] * v[(k * dim + j, col)]).sum()
        })
    }

    /// `E[x₁ b₁ x₂ ⋯ b_{n-1} x_n]`, applying the word to `1 ⊗ ξ` column by
    /// column instead of forming the product.
    pub fn expect_word(&self, xs: &[&Mat], inner: &[Mat]) -> Mat {
        let frame = vacuum_frame(self.b_dim, &self.state);
        let mut v = frame.clone();
        for (k, x) in xs.iter().enumerate().rev() {
            v = *x * v;
            if k > 0 {
                v = self.apply_coefficient(&inner[k - 1], &v);
            }
        }
        frame.adjoint() * v
    }

    /// `G_x(b) = (b ⊗ 1 − x)^{-1}`.
    pub fn resolvent(&self, x: &Mat, b: &Mat) -> Result<Mat> {
        self.check_operator(x)?;
        self.check_coefficient(b)?;
        (self.amplify(b) - x)
            .try_inverse()
            .ok_or_else(|| Error::Numerical("resolvent system is singular".into()))
    }

    /// `E[G_x(b)]` through one linear solve.
    pub fn cauchy(&self, x: &Mat, b: &Mat) -> Result<Mat> {
        self.check_operator(x)?;
        self.check_coefficient(b)?;
        let frame = vacuum_frame(self.b_dim, &self.state);
        let y = (self.amplify(b) - x)
            .lu()
            .solve(&frame)
            .ok_or_else(|| Error::Numerical("resolvent system is singular".into()))?;
        Ok(frame.adjoint() * y)
    }
}

/// An operator on a model space, tagged by the algebra it belongs to.
#[derive(Clone, Debug)]
pub struct OvElement {
    pub matrix: Mat,
    pub label: usize,
}

impl OvElement {
    pub fn norm(&self) -> f64 {
        op_norm(&self.matrix)
    }

    pub fn is_self_adjoint(&self) -> bool {
        is_hermitian(&self.matrix, 1e-12)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            label: self.label,
        }
    }
}

/// One factor of a product construction: operators on `ℂ^d ⊗ ℂ^D` with
/// state vector `ξ ∈ ℂ^D`.
#[derive(Clone, Debug)]
pub struct Factor {
    pub b_dim: usize,
    pub vacuum: Vector,
    pub elements: Vec<Mat>,
}

impl Factor {
    pub fn new(b_dim: usize, vacuum: Vector, elements: Vec<Mat>) -> Result<Self> {
        OperatorSpace::new(vacuum.clone(), b_dim)?;
        let n = b_dim * vacuum.len();
        if elements.iter().any(|x| x.nrows() != n || x.ncols() != n) {
            return Err(invalid(format!("factor elements must be {n}×{n}")));
        }
        Ok(Self { b_dim, vacuum, elements })
    }

    pub fn dim(&self) -> usize {
        self.vacuum.len()
    }

    /// Multiplication by `t` on `L²(μ)`, optionally centered.
    pub fn atomic(mu: &AtomicMeasure, center: bool) -> Self {
        let shift = if center { mu.moment(1) } else { 0.0 };
        let atoms = mu.atoms();
        let x = Mat::from_diagonal(&Vector::from_iterator(atoms.len(), atoms.iter().map(|a| c(a.0 - shift, 0.0))));
        let vacuum = Vector::from_iterator(atoms.len(), atoms.iter().map(|a| c(a.1.sqrt(), 0.0)));
        Self {
            b_dim: 1,
            vacuum,
            elements: vec![x],
        }
    }

    /// Symmetric Bernoulli of the given variance, `√v (E₀₁ + E₁₀)` on `ℂ²`.
    pub fn bernoulli(variance: f64) -> Self {
        let s = c(variance.sqrt(), 0.0);
        Self {
            b_dim: 1,
            vacuum: e0(2),
            elements: vec![(unit(2, 0, 1) + unit(2, 1, 0)) * s],
        }
    }

    /// `M_d`-valued Bernoulli with `η(b) = Σ K_r* b K_r`.
    pub fn kraus_bernoulli(kraus: &[Mat]) -> Result<Self> {
        let d = kraus.first().map(|k| k.nrows()).ok_or_else(|| invalid("need at least one Kraus operator"))?;
        if kraus.iter().any(|k| k.nrows() != d || k.ncols() != d) {
            return Err(invalid("Kraus operators must share one square shape"));
        }
        let dim = kraus.len() + 1;
        let mut x = zeros(d * dim);
        for (r, k) in kraus.iter().enumerate() {
            x += kron(&k.adjoint(), &unit(dim, 0, r + 1)) + kron(k, &unit(dim, r + 1, 0));
        }
        Factor::new(d, e0(dim), vec![x])
    }

    /// The element with `E[A A*] = α`, `E[A* A] = α̃` and vanishing Boolean
    /// cumulants beyond order two, plus an optional `γ E₁₁` perturbation
    /// that changes higher moments while keeping first and second ones.
    pub fn circular(alpha: f64, alpha_tilde: f64, gamma: f64) -> Self {
        let a = unit(3, 0, 1) * c(alpha.sqrt(), 0.0) + unit(3, 2, 0) * c(alpha_tilde.sqrt(), 0.0) + unit(3, 1, 1) * c(gamma, 0.0);
        Self {
            b_dim: 1,
            vacuum: e0(3),
            elements: vec![a],
        }
    }

    /// Self-adjoint centered element of variance `v` with `γ E₁₁` added,
    /// so its fourth moment is `v² + γ² v`.
    pub fn perturbed_bernoulli(variance: f64, gamma: f64) -> Self {
        let mut f = Self::bernoulli(variance);
        f.elements[0] += unit(2, 1, 1) * c(gamma, 0.0);
        f
    }

    /// Tensor the factor with the coefficient algebra: `x ↦ 1_d ⊗ x`.
    pub fn amplified(&self, d: usize) -> Result<Self> {
        if self.b_dim != 1 {
            return Err(invalid("only scalar factors can be amplified"));
        }
        Self::new(d, self.vacuum.clone(), self.elements.iter().map(|x| kron(&eye(d), x)).collect())
    }
}

fn e0(n: usize) -> Vector {
    let mut v = Vector::zeros(n);
    v[0] = c(1.0, 0.0);
    v
}

/// A unitary `Q` with `Q e₀ = ξ`.
fn frame_with_first(xi: &Vector) -> Mat {
    let n = xi.len();
    if (xi[0] - 1.0).norm() < 1e-15 {
        return eye(n);
    }
    let mut m = Mat::zeros(n, n + 1);
    m.set_column(0, xi);
    for k in 0..n {
        m[(k, k + 1)] = c(1.0, 0.0);
    }
    let mut q = m.qr().q();
    let first = q.column(0).dotc(xi);
    let phase = first / first.norm();
    let col = q.column(0) * phase;
    q.set_column(0, &col);
    q
}

/// A family of operators on one space, possibly from several algebras.
#[derive(Clone, Debug)]
pub struct OperatorModel {
    pub space: OperatorSpace,
    pub elements: Vec<OvElement>,
}

impl OperatorModel {
    pub fn d(&self) -> usize {
        self.space.b_dim
    }

    pub fn element(&self, k: usize) -> &Mat {
        &self.elements[k].matrix
    }

    /// Sum of the selected elements.
    pub fn sum(&self, which: impl IntoIterator<Item = usize>) -> Mat {
        which
            .into_iter()
            .fold(zeros(self.space.total_dim()), |acc, k| acc + &self.elements[k].matrix)
    }

    pub fn expect(&self, x: &Mat) -> Result<Mat> {
        self.space.expect(x)
    }

    pub fn resolvent(&self, x: &Mat, b: &Mat) -> Result<Mat> {
        self.space.resolvent(x, b)
    }

    pub fn cauchy(&self, x: &Mat, b: &Mat) -> Result<Mat> {
        self.space.cauchy(x, b)
    }

    /// Indices of the elements carrying the given label.
    pub fn algebra(&self, label: usize) -> Vec<usize> {
        (0..self.elements.len()).filter(|&k| self.elements[k].label == label).collect()
    }

    /// Spectral measure of a self-adjoint operator on the model space.
    pub fn spectral_distribution(&self, x: &Mat, weight: Weighting) -> Result<AtomicMeasure> {
        spectral_distribution(&self.space, x, weight)
    }
}

impl OvFunctional for OperatorModel {
    fn dim(&self) -> usize {
        self.space.b_dim
    }

    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        let xs: Vec<&Mat> = letters.iter().map(|&l| &self.elements[l].matrix).collect();
        self.space.expect_word(&xs, inner)
    }
}

/// Which state weights the eigenvectors in [`spectral_distribution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// The vector state of `ξ` (scalar models only).
    State,
    /// `tr_d ⊗ φ`.
    Trace,
}

/// Eigen-decomposes `x` and weights each eigenvector by the chosen state,
/// merging atoms closer than `1e-10`.
pub fn spectral_distribution(space: &OperatorSpace, x: &Mat, weight: Weighting) -> Result<AtomicMeasure> {
    space.check_operator(x)?;
    if !is_hermitian(x, 1e-10) {
        return Err(invalid("spectral distribution needs a self-adjoint operator"));
    }
    if weight == Weighting::State && space.b_dim != 1 {
        return Err(invalid("the vector state is defined for scalar models; use the trace weighting"));
    }
    let (values, vectors) = hermitian_eigen(x);
    let frame = vacuum_frame(space.b_dim, &space.state);
    let overlaps = frame.adjoint() * &vectors;
    let d = space.b_dim as f64;
    let mut atoms: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .map(|(k, &t)| (t, overlaps.column(k).norm_squared() / d))
        .filter(|a| a.1 > 1e-14)
        .collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    for a in &mut atoms {
        a.1 /= total;
    }
    AtomicMeasure::with_merge(atoms, 1e-10)
}

/// Boolean product of the factors: on `ℂ^d ⊗ (ℂ e₀ ⊕ ⨁ᵢ Hᵢ°)` each
/// factor acts on `e₀` and its own block only. Element labels are factor
/// indices.
pub fn boolean_star_family(factors: &[Factor]) -> Result<OperatorModel> {
    let d = common_b_dim(factors)?;
    let dim = 1 + factors.iter().map(|f| f.dim() - 1).sum::<usize>();
    check_dim("star product dimension", d * dim)?;
    let space = OperatorSpace::with_vacuum(dim, d)?;
    let mut elements = Vec::new();
    let mut offset = 1;
    for (label, f) in factors.iter().enumerate() {
        let q = kron(&eye(d), &frame_with_first(&f.vacuum));
        let local = f.dim();
        let place = |r: usize| if r == 0 { 0 } else { offset + r - 1 };
        for x in &f.elements {
            let y = q.adjoint() * x * &q;
            let mut m = zeros(d * dim);
            for row in 0..d * local {
                for col in 0..d * local {
                    let v = y[(row, col)];
                    if v != C64::new(0.0, 0.0) {
                        let (a, r) = (row / local, row % local);
                        let (b, k) = (col / local, col % local);
                        m[(a * dim + place(r), b * dim + place(k))] = v;
                    }
                }
            }
            elements.push(OvElement { matrix: m, label });
        }
        offset += local - 1;
    }
    Ok(OperatorModel { space, elements })
}

/// Monotone product `A₁ ≺ ⋯ ≺ A_m` on `ℂ^d ⊗ H₁ ⊗ ⋯ ⊗ H_m`: element of
/// factor `k` acts as `1 ⊗ ⋯ ⊗ x ⊗ P ⊗ ⋯ ⊗ P` with `P = ξξ*`.
pub fn monotone_product_family(factors: &[Factor]) -> Result<OperatorModel> {
    let d = common_b_dim(factors)?;
    let dims: Vec<usize> = factors.iter().map(|f| f.dim()).collect();
    let total = dims.iter().try_fold(d, |acc, &k| acc.checked_mul(k)).unwrap_or(usize::MAX);
    check_dim("monotone product dimension", total)?;
    let dim = total / d;
    let state = factors
        .iter()
        .fold(Vector::from_element(1, c(1.0, 0.0)), |acc, f| acc.kronecker(&f.vacuum));
    let space = OperatorSpace::new(state, d)?;
    let mut elements = Vec::new();
    for (k, f) in factors.iter().enumerate() {
        let before: usize = dims[..k].iter().product();
        let after: usize = dims[k + 1..].iter().product();
        let tail = factors[k + 1..]
            .iter()
            .fold(Vector::from_element(1, c(1.0, 0.0)), |acc, g| acc.kronecker(&g.vacuum));
        let p = &tail * tail.adjoint();
        let local = dims[k];
        for x in &f.elements {
            let mut m = zeros(total);
            for row in 0..d * local {
                for col in 0..d * local {
                    let v = x[(row, col)];
                    if v == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let (a, r) = (row / local, row % local);
                    let (b, s) = (col / local, col % local);
                    for u in 0..before {
                        for (t1, t2) in (0..after).flat_map(|i| (0..after).map(move |j| (i, j))) {
                            let w = p[(t1, t2)];
                            if w == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let gr = a * dim + (u * local + r) * after + t1;
                            let gc = b * dim + (u * local + s) * after + t2;
                            m[(gr, gc)] += v * w;
                        }
                    }
                }
            }
            elements.push(OvElement { matrix: m, label: k });
        }
    }
    Ok(OperatorModel { space, elements })
}

fn common_b_dim(factors: &[Factor]) -> Result<usize> {
    let d = factors.first().map(|f| f.b_dim).ok_or_else(|| invalid("need at least one factor"))?;
    if factors.iter().any(|f| f.b_dim != d) {
        return Err(invalid("factors disagree on the coefficient dimension"));
    }
    if factors.iter().any(|f| f.elements.is_empty()) {
        return Err(invalid("every factor needs at least one element"));
    }
    Ok(d)
}

/// The η-circular element with `φ[AA*] = α`, `φ[A*A] = α̃` on `ℂ³`.
pub fn eta_circular(alpha: f64, alpha_tilde: f64) -> Result<OperatorModel> {
    if !(alpha > 0.0 && alpha_tilde > 0.0) {
        return Err(invalid("η-circular variances must be positive"));
    }
    boolean_star_family(&[Factor::circular(alpha, alpha_tilde, 0.0)])
}

/// Entrywise second-moment data of a matrix with Boolean entries.
/// `alpha[i][j]`, `alpha_tilde[i][j]` are stored for `j < i` (0-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileJson", into = "ProfileJson")]
pub struct VarianceProfile {
    n: usize,
    sigma: Vec<f64>,
    alpha: Vec<Vec<f64>>,
    alpha_tilde: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ProfileJson {
    n: usize,
    sigma: Vec<f64>,
    alpha: Vec<Vec<f64>>,
    alpha_tilde: Vec<Vec<f64>>,
}

impl TryFrom<ProfileJson> for VarianceProfile {
    type Error = Error;
    fn try_from(j: ProfileJson) -> Result<Self> {
        VarianceProfile::new(j.sigma, j.alpha, j.alpha_tilde)
    }
}

impl From<VarianceProfile> for ProfileJson {
    fn from(p: VarianceProfile) -> Self {
        ProfileJson {
            n: p.n,
            sigma: p.sigma,
            alpha: p.alpha,
            alpha_tilde: p.alpha_tilde,
        }
    }
}

impl VarianceProfile {
    /// Rows of `alpha` may have length `i` (strictly lower part) or `n`
    /// (full rows, upper part ignored).
    pub fn new(sigma: Vec<f64>, alpha: Vec<Vec<f64>>, alpha_tilde: Vec<Vec<f64>>) -> Result<Self> {
        let n = sigma.len();
        if n == 0 {
            return Err(invalid("profile needs n ≥ 1"));
        }
        let trim = |rows: Vec<Vec<f64>>, name: &str| -> Result<Vec<Vec<f64>>> {
            if rows.len() != n {
                return Err(invalid(format!("`{name}` needs {n} rows")));
            }
            rows.into_iter()
                .enumerate()
                .map(|(i, row)| {
                    if row.len() != i && row.len() != n {
                        return Err(invalid(format!("row {i} of `{name}` must have length {i} or {n}")));
                    }
                    Ok(row[..i].to_vec())
                })
                .collect()
        };
        let alpha = trim(alpha, "alpha")?;
        let alpha_tilde = trim(alpha_tilde, "alpha_tilde")?;
        let all = sigma.iter().chain(alpha.iter().flatten()).chain(alpha_tilde.iter().flatten());
        if all.clone().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(invalid("profile entries must be finite and nonnegative"));
        }
        Ok(Self {
            n,
            sigma,
            alpha,
            alpha_tilde,
        })
    }

    pub fn from_fn(n: usize, sigma: impl Fn(usize) -> f64, alpha: impl Fn(usize, usize) -> f64, alpha_tilde: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(
            (0..n).map(&sigma).collect(),
            (0..n).map(|i| (0..i).map(|j| alpha(i, j)).collect()).collect(),
            (0..n).map(|i| (0..i).map(|j| alpha_tilde(i, j)).collect()).collect(),
        )
    }

    /// Identically distributed entries with `σᵢ = nσ`, `α_ij = α`,
    /// `α̃_ij = α̃`. With the `1/√n` entry normalization this gives
    /// `λᵢ = σ + (i−1)α/n + (n−i)α̃/n`.
    pub fn identical(n: usize, sigma: f64, alpha: f64, alpha_tilde: f64) -> Result<Self> {
        let nf = n as f64;
        Self::from_fn(n, |_| nf * sigma, |_, _| alpha, |_, _| alpha_tilde)
    }

    /// `σ = 0`, `α_ij = α̃_ij = |i − j|/n`, giving `λᵢ = n^{-2} Σ_k |k − i|`.
    pub fn distance(n: usize) -> Result<Self> {
        let nf = n as f64;
        let f = move |i: usize, j: usize| (i as f64 - j as f64).abs() / nf;
        Self::from_fn(n, |_| 0.0, f, f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigma[i]
    }

    /// `α_ij` for `j < i`.
    pub fn alpha(&self, i: usize, j: usize) -> f64 {
        self.alpha[i][j]
    }

    /// `α̃_ij` for `j < i`.
    pub fn alpha_tilde(&self, i: usize, j: usize) -> f64 {
        self.alpha_tilde[i][j]
    }

    /// `η_n(1)` read off the displayed diagonal formula without the `1/n`
    /// from the entry normalization.
    pub fn lambda_unnormalized(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let below: f64 = (0..i).map(|k| self.alpha(i, k)).sum();
                let above: f64 = (i + 1..self.n).map(|k| self.alpha_tilde(k, i)).sum();
                self.sigma[i] + below + above
            })
            .collect()
    }
}

/// Diagonal of `η_n(1) = (id_n ⊗ φ)[B_n B_n]`:
/// `λᵢ = (1/n)(σᵢ + Σ_{k<i} α_ik + Σ_{k>i} α̃_ki)`.
pub fn lambda_profile(p: &VarianceProfile) -> Vec<f64> {
    let nf = p.n as f64;
    p.lambda_unnormalized().into_iter().map(|v| v / nf).collect()
}

/// The atomic law `(1/2n) Σ (δ_{√λᵢ} + δ_{−√λᵢ})`.
pub fn bernoulli_matrix_law(lambda: &[f64]) -> Result<AtomicMeasure> {
    let w = 0.5 / lambda.len() as f64;
    AtomicMeasure::with_merge(lambda.iter().flat_map(|&l| [(-l.sqrt(), w), (l.sqrt(), w)]), 1e-12)
}

/// Entry distributions of a Boolean Wigner matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EntryKind {
    /// Bernoulli diagonal and η-circular off-diagonal entries.
    Circular,
    /// As `Circular` with a `γ E₁₁` term in every nonzero entry; first and
    /// second moments are unchanged.
    Perturbed { gamma: f64 },
}

/// A matrix with Boolean independent entries on one shared star space,
/// with `e_ii = E_ii/(2√n)` and `e_ij = E_ij/√n` for `j < i`.
#[derive(Clone, Debug)]
pub struct MatrixModel {
    pub model: OperatorModel,
    /// Entry operators `a_ij` on the star space, for `j ≤ i` (`None` for
    /// zero entries), indexed `entries[i][j]`.
    pub entries: Vec<Vec<Option<Mat>>>,
    pub entry_space: OperatorSpace,
}

impl MatrixModel {
    /// The matrix itself as an operator on `ℂ^n ⊗ ℂ^D`.
    pub fn matrix(&self) -> &Mat {
        self.model.element(0)
    }

    pub fn n(&self) -> usize {
        self.model.d()
    }

    /// `(i, j)` entry of the matrix as an operator on the star space.
    pub fn entry(&self, i: usize, j: usize) -> Mat {
        let n = self.n() as f64;
        let dim = self.entry_space.dim();
        let scaled = |m: &Mat| m * c(1.0 / n.sqrt(), 0.0);
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.entries[i][i].as_ref().map(scaled),
            std::cmp::Ordering::Greater => self.entries[i][j].as_ref().map(scaled),
            std::cmp::Ordering::Less => self.entries[j][i].as_ref().map(|m| scaled(&m.adjoint())),
        }
        .unwrap_or_else(|| zeros(dim))
    }

    /// `tr_n ⊗ φ [G(z)]`.
    pub fn trace_cauchy(&self, z: C64) -> Result<C64> {
        let n = self.n();
        let g = self.model.cauchy(self.matrix(), &Mat::from_diagonal_element(n, n, z))?;
        Ok(g.trace() / n as f64)
    }
}

/// Builds the matrix Bernoulli `B_n` of the profile.
pub fn build_matrix_bernoulli(profile: &VarianceProfile) -> Result<MatrixModel> {
    build_matrix(profile, EntryKind::Circular)
}

/// Builds the Boolean Wigner matrix `A_n` of the profile.
pub fn build_boolean_wigner(profile: &VarianceProfile, kind: EntryKind) -> Result<MatrixModel> {
    build_matrix(profile, kind)
}

fn build_matrix(p: &VarianceProfile, kind: EntryKind) -> Result<MatrixModel> {
    let n = p.n;
    let gamma = match kind {
        EntryKind::Circular => 0.0,
        EntryKind::Perturbed { gamma } => gamma,
    };
    let mut factors = Vec::new();
    let mut slots = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let f = if i == j {
                (p.sigma[i] > 0.0).then(|| {
                    if gamma == 0.0 {
                        Factor::bernoulli(p.sigma[i])
                    } else {
                        Factor::perturbed_bernoulli(p.sigma[i], gamma)
                    }
                })
            } else {
                let (a, at) = (p.alpha(i, j), p.alpha_tilde(i, j));
                (a > 0.0 || at > 0.0).then(|| Factor::circular(a, at, gamma))
            };
            if let Some(f) = f {
                slots[i][j] = Some(factors.len());
                factors.push(f);
            }
        }
    }
    let star_dim = 1 + factors.iter().map(|f| f.dim() - 1).sum::<usize>();
    check_dim("matrix model dimension", n * star_dim)?;
    let entries_model = if factors.is_empty() {
        OperatorModel {
            space: OperatorSpace::with_vacuum(1, 1)?,
            elements: Vec::new(),
        }
    } else {
        boolean_star_family(&factors)?
    };
    let entry_space = entries_model.space.clone();
    let dim = entry_space.dim();
    let entries: Vec<Vec<Option<Mat>>> = slots
        .iter()
        .map(|row| row.iter().map(|s| s.map(|k| entries_model.element(k).clone())).collect())
        .collect();
    let scale = c(1.0 / (n as f64).sqrt(), 0.0);
    let mut big = zeros(n * dim);
    for i in 0..n {
        for j in 0..=i {
            let Some(a) = &entries[i][j] else { continue };
            if i == j {
                // e_ii ⊗ a + e_ii* ⊗ a* with a self-adjoint
                big += kron(&unit(n, i, i), a) * scale;
            } else {
                big += (kron(&unit(n, i, j), a) + kron(&unit(n, j, i), &a.adjoint())) * scale;
            }
        }
    }
    let space = OperatorSpace::new(entry_space.state().clone(), n)?;
    Ok(MatrixModel {
        model: OperatorModel {
            space,
            elements: vec![OvElement { matrix: big, label: 0 }],
        },
        entries,
        entry_space,
    })
}

/// CDF of the limit law with density `|t|/(α − α̃)` on
/// `√(σ+α̃) < |t| < √(σ+α)`.
pub fn identical_limit_cdf(sigma: f64, alpha: f64, alpha_tilde: f64) -> impl Fn(f64) -> f64 + Clone {
    let (lo, hi) = (sigma + alpha_tilde, sigma + alpha);
    move |t: f64| {
        let half = |s: f64| (s * s).clamp(lo, hi) - lo;
        let v = if hi > lo {
            half(t.abs()) / (2.0 * (hi - lo))
        } else if t.abs() >= hi.sqrt() {
            0.5
        } else {
            0.0
        };
        if t >= 0.0 {
            0.5 + v
        } else {
            0.5 - v
        }
    }
}

/// CDF of the limit law with density `2|t|/√(4t² − 1)` on
/// `1/2 < |t| < √(1/2)`.
pub fn distance_limit_cdf() -> impl Fn(f64) -> f64 + Clone {
    |t: f64| {
        let s = t.abs().clamp(0.5, 0.5f64.sqrt());
        let v = 0.5 * (4.0 * s * s - 1.0).max(0.0).sqrt();
        if t >= 0.0 {
            0.5 + v
        } else {
            0.5 - v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::{cumulants_from_moments, Independence};
    use crate::independence::{mixed_moment, TaggedWord};
    use crate::linalg::{random_hermitian, random_psd, random_upper, rng, I};
    use crate::transform::{levy_distance_cdf, ClosedFormCdf};

    fn one() -> Mat {
        eye(1)
    }

    fn scalar_moment(m: &OperatorModel, letters: &[usize]) -> C64 {
        m.eval(letters, &vec![one(); letters.len().saturating_sub(1)])[(0, 0)]
    }

    #[test]
    fn star_bernoulli_examples() {
        let m = boolean_star_family(&[Factor::bernoulli(1.0), Factor::bernoulli(1.0)]).unwrap();
        assert_eq!(m.space.dim(), 3);
        assert_eq!(m.element(0), &(unit(3, 0, 1) + unit(3, 1, 0)));
        assert!(scalar_moment(&m, &[0, 1, 0, 1]).norm() < 1e-15);
        assert!((scalar_moment(&m, &[0, 0]) - 1.0).norm() < 1e-15);
        let s = m.sum([0, 1]);
        let m4 = m.expect(&(&s * &s * &s * &s)).unwrap()[(0, 0)];
        assert!((m4 - 4.0).norm() < 1e-14);
        assert!(boolean_star_family(&[]).is_err());
    }

    /// Checks the defining factorization over all words of length ≤ 6 with
    /// random inner coefficients against the word-rule evaluator.
    fn check_factorization(kind: Independence, model: &OperatorModel, algebras: usize, seed: u64) -> f64 {
        let d = model.d();
        let mut r = rng(seed);
        let per: Vec<Vec<usize>> = (0..algebras).map(|a| model.algebra(a)).collect();
        let locals: Vec<OperatorModel> = per
            .iter()
            .map(|idx| OperatorModel {
                space: model.space.clone(),
                elements: idx.iter().map(|&k| model.elements[k].clone()).collect(),
            })
            .collect();
        let funcs: Vec<&dyn OvFunctional> = locals.iter().map(|m| m as &dyn OvFunctional).collect();
        let mut worst: f64 = 0.0;
        for len in 1..=6usize {
            for code in 0..algebras.pow(len as u32) {
                let mut letters = Vec::new();
                let mut cc = code;
                for _ in 0..len {
                    let a = cc % algebras;
                    cc /= algebras;
                    let e = (cc + letters.len()) % per[a].len();
                    letters.push((a, e));
                }
                let inner: Vec<Mat> = (1..len).map(|_| random_hermitian(&mut r, d)).collect();
                let global: Vec<usize> = letters.iter().map(|&(a, e)| per[a][e]).collect();
                let direct = model.eval(&global, &inner);
                let rule = mixed_moment(kind, &TaggedWord::new(letters, inner), &funcs).unwrap();
                worst = worst.max(op_norm(&(direct - rule)));
            }
        }
        worst
    }

    #[test]
    fn star_family_is_boolean_independent() {
        let mu = AtomicMeasure::new([(-1.0, 0.3), (0.5, 0.5), (2.0, 0.2)]).unwrap();
        let mut r = rng(3);
        let k1 = vec![random_hermitian(&mut r, 2), random_psd(&mut r, 2)];
        let atomic = Factor::atomic(&mu, false).amplified(2).unwrap();
        let mut two = atomic.clone();
        let x2 = &two.elements[0] * &two.elements[0];
        two.elements.push(x2);
        let factors = vec![two, Factor::kraus_bernoulli(&k1).unwrap(), Factor::bernoulli(0.7).amplified(2).unwrap()];
        let m = boolean_star_family(&factors).unwrap();
        assert!(check_factorization(Independence::Boolean, &m, 3, 9) < 1e-10);
    }

    #[test]
    fn monotone_family_conditions() {
        let mu = AtomicMeasure::new([(-1.0, 0.5), (0.3, 0.25), (1.1, 0.25)]).unwrap();
        let mut r = rng(5);
        let kraus = vec![random_hermitian(&mut r, 2)];
        let factors = vec![
            Factor::atomic(&mu, false).amplified(2).unwrap(),
            Factor::kraus_bernoulli(&kraus).unwrap(),
            Factor::perturbed_bernoulli(0.6, 0.4).amplified(2).unwrap(),
        ];
        let m = monotone_product_family(&factors).unwrap();
        assert!(check_factorization(Independence::Monotone, &m, 3, 11) < 1e-10);
    }

    #[test]
    fn monotone_bernoulli_pair() {
        let m = monotone_product_family(&[Factor::bernoulli(1.0), Factor::bernoulli(1.0)]).unwrap();
        assert!(scalar_moment(&m, &[0, 1, 0]).norm() < 1e-15);
        let s = m.sum([0, 1]);
        let mu = m.spectral_distribution(&s, Weighting::State).unwrap();
        for (k, e) in [1.0, 0.0, 2.0, 0.0, 5.0].iter().enumerate() {
            assert!((mu.moment(k as i32) - e).abs() < 1e-12);
        }
        let huge = vec![Factor::atomic(&AtomicMeasure::new((0..20).map(|k| (k as f64, 0.05))).unwrap(), true); 3];
        assert!(matches!(monotone_product_family(&huge), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn eta_circular_properties() {
        let (a, at) = (2.0, 0.5);
        let m = eta_circular(a, at).unwrap();
        let x = m.element(0).clone();
        let xs = x.adjoint();
        let st = OperatorModel {
            space: m.space.clone(),
            elements: vec![OvElement { matrix: x.clone(), label: 0 }, OvElement { matrix: xs.clone(), label: 0 }],
        };
        assert!((scalar_moment(&st, &[0, 1]) - a).norm() < 1e-14);
        assert!((scalar_moment(&st, &[1, 0]) - at).norm() < 1e-14);
        assert!(scalar_moment(&st, &[0, 0]).norm() < 1e-15 && scalar_moment(&st, &[1, 1]).norm() < 1e-15);
        assert!((op_norm(&x) - a.sqrt().max(at.sqrt())).abs() < 1e-12);
        for len in [4, 6] {
            for start in [0, 1] {
                let letters: Vec<usize> = (0..len).map(|k| (k + start) % 2).collect();
                let beta = cumulants_from_moments(Independence::Boolean, &st, &letters, &vec![one(); len - 1]).unwrap();
                assert!(op_norm(&beta) < 1e-13);
            }
        }
        assert!((op_norm(eta_circular(1.0, 1.0).unwrap().element(0)) - 1.0).abs() < 1e-12);
        assert!(eta_circular(0.0, 1.0).is_err());
    }

    #[test]
    fn resolvent_examples() {
        let m = boolean_star_family(&[Factor::bernoulli(1.0)]).unwrap();
        let z = c(0.0, 2.0);
        let g = m.cauchy(m.element(0), &Mat::from_element(1, 1, z)).unwrap()[(0, 0)];
        assert!((g - c(0.0, 2.0) / -5.0).norm() < 1e-14);
        let zero = zeros(2);
        let g0 = m.resolvent(&zero, &Mat::from_element(1, 1, z)).unwrap();
        assert!((g0 - eye(2) * z.inv()).camax() < 1e-15);
        let mut r = rng(1);
        for _ in 0..50 {
            let x = random_hermitian(&mut r, 4);
            let sp = OperatorSpace::with_vacuum(4, 1).unwrap();
            let b = random_upper(&mut r, 1, 0.05);
            let g = sp.resolvent(&x, &b).unwrap();
            assert!(op_norm(&g) <= 1.0 / b[(0, 0)].im * (1.0 + 1e-10));
            let e = sp.cauchy(&x, &b).unwrap();
            assert!((sp.expect(&g).unwrap() - e).camax() < 1e-12);
        }
    }

    #[test]
    fn conditional_expectation_properties() {
        let mut r = rng(2);
        let sp = OperatorSpace::new(crate::linalg::random_unit_vector(&mut r, 3), 2).unwrap();
        let b = random_hermitian(&mut r, 2);
        assert!((sp.expect(&sp.amplify(&b)).unwrap() - &b).camax() < 1e-14);
        let x = crate::linalg::random_complex(&mut r, 6, 6);
        let (b1, b2) = (random_hermitian(&mut r, 2), random_hermitian(&mut r, 2));
        let lhs = sp.expect(&(sp.amplify(&b1) * &x * sp.amplify(&b2))).unwrap();
        assert!((lhs - &b1 * sp.expect(&x).unwrap() * &b2).camax() < 1e-12);
        for _ in 0..20 {
            let p = random_psd(&mut r, 6);
            let (vals, _) = hermitian_eigen(&sp.expect(&p).unwrap());
            assert!(vals[0] >= -1e-12);
        }
    }

    #[test]
    fn inverse_bounded_by_imaginary_part() {
        let mut r = rng(8);
        for _ in 0..100 {
            let b = random_upper(&mut r, 3, 0.01);
            let inv = crate::linalg::inverse(&b).unwrap();
            assert!(op_norm(&inv) <= crate::linalg::inv_imag_norm(&b).unwrap() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn profile_json_and_lambda_examples() {
        let p = VarianceProfile::identical(5, 0.3, 2.0, 0.5).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<VarianceProfile>(&s).unwrap(), p);
        for (i, l) in lambda_profile(&p).iter().enumerate() {
            let i1 = (i + 1) as f64;
            assert!((l - (0.3 + (i1 - 1.0) * 2.0 / 5.0 + (5.0 - i1) * 0.5 / 5.0)).abs() < 1e-14);
        }
        // The example's own scaling read through the unnormalized display.
        let literal = VarianceProfile::from_fn(5, |_| 0.3, |_, _| 2.0 / 5.0, |_, _| 0.5 / 5.0).unwrap();
        for (x, y) in literal.lambda_unnormalized().iter().zip(lambda_profile(&p)) {
            assert!((x - y).abs() < 1e-14);
        }
        let n = 6;
        let q = VarianceProfile::distance(n).unwrap();
        for (i, l) in lambda_profile(&q).iter().enumerate() {
            let i1 = (i + 1) as f64;
            let nf = n as f64;
            let expected = (nf - i1 + 1.0) * (nf - i1) / (2.0 * nf * nf) + i1 * (i1 - 1.0) / (2.0 * nf * nf);
            assert!((l - expected).abs() < 1e-14);
        }
        let single = VarianceProfile::new(vec![2.0], vec![vec![]], vec![vec![]]).unwrap();
        assert_eq!(lambda_profile(&single), vec![2.0]);
        assert!(VarianceProfile::new(vec![-1.0], vec![vec![]], vec![vec![]]).is_err());
        let bad = r#"{"n":2,"sigma":[1,1],"alpha":[[],[1,2,3]],"alpha_tilde":[[],[1]]}"#;
        assert!(serde_json::from_str::<VarianceProfile>(bad).is_err());
    }

    #[test]
    fn matrix_bernoulli_oracle_and_spectrum() {
        let p = VarianceProfile::from_fn(2, |_| 0.0, |_, _| 1.0, |_, _| 1.0).unwrap();
        let bn = build_matrix_bernoulli(&p).unwrap();
        let eta1 = bn.model.expect(&(bn.matrix() * bn.matrix())).unwrap();
        let lam = lambda_profile(&p);
        for i in 0..2 {
            assert!((eta1[(i, i)] - lam[i]).norm() < 1e-14);
        }
        assert!((eta1[(0, 1)]).norm() < 1e-14);
        let one = build_matrix_bernoulli(&VarianceProfile::new(vec![1.0], vec![vec![]], vec![vec![]]).unwrap()).unwrap();
        let mu = one.model.spectral_distribution(one.matrix(), Weighting::Trace).unwrap();
        assert_eq!(mu.atoms().len(), 2);
        assert!((mu.atoms()[0].0 + 1.0).abs() < 1e-12 && (mu.atoms()[1].0 - 1.0).abs() < 1e-12);

        let mut r = rng(4);
        let sig: Vec<f64> = (0..4).map(|_| r.random_range(0.0..2.0)).collect();
        let q = VarianceProfile::from_fn(4, |i| sig[i], |i, j| ((i + 2 * j) % 3) as f64 * 0.4, |i, j| 0.2 + (i * j) as f64 * 0.1).unwrap();
        let bq = build_matrix_bernoulli(&q).unwrap();
        let mu = bq.model.spectral_distribution(bq.matrix(), Weighting::Trace).unwrap();
        let expected = bernoulli_matrix_law(&lambda_profile(&q)).unwrap();
        assert_eq!(mu.atoms().len(), expected.atoms().len());
        for (a, e) in mu.atoms().iter().zip(expected.atoms()) {
            assert!((a.0 - e.0).abs() < 1e-8 && (a.1 - e.1).abs() < 1e-8);
        }
        // φ[B^{2k}] = φ[η(1)^k] under tr ⊗ φ
        let eta1 = bq.model.expect(&(bq.matrix() * bq.matrix())).unwrap();
        let mut pow_b = eye(bq.matrix().nrows());
        let mut pow_eta = eye(4);
        for _ in 1..=4 {
            pow_b = pow_b * bq.matrix() * bq.matrix();
            pow_eta *= &eta1;
            let lhs = bq.model.expect(&pow_b).unwrap().trace() / 4.0;
            let rhs = pow_eta.trace() / 4.0;
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
        }
    }

    use rand::Rng;

    #[test]
    fn matrix_cumulants_from_entries() {
        let p = VarianceProfile::from_fn(3, |i| 0.5 + i as f64, |i, j| 0.3 * (i + j) as f64, |i, _| 0.2 * i as f64).unwrap();
        let a = build_boolean_wigner(&p, EntryKind::Perturbed { gamma: 0.7 }).unwrap();
        let n = 3;
        let entries = OperatorModel {
            space: a.entry_space.clone(),
            elements: (0..n * n)
                .map(|k| OvElement {
                    matrix: a.entry(k / n, k % n),
                    label: 0,
                })
                .collect(),
        };
        for m in 1..=4usize {
            let ov = cumulants_from_moments(Independence::Boolean, &a.model, &vec![0; m], &vec![eye(n); m - 1]).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let mut total = C64::new(0.0, 0.0);
                    for mid in 0..n.pow(m as u32 - 1) {
                        let mut path = vec![i];
                        let mut cc = mid;
                        for _ in 1..m {
                            path.push(cc % n);
                            cc /= n;
                        }
                        path.push(j);
                        let letters: Vec<usize> = path.windows(2).map(|w| w[0] * n + w[1]).collect();
                        total += cumulants_from_moments(Independence::Boolean, &entries, &letters, &vec![one(); m - 1]).unwrap()[(0, 0)];
                    }
                    assert!((ov[(i, j)] - total).norm() < 1e-10, "m={m} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn wigner_matches_bernoulli_through_order_three() {
        let p = VarianceProfile::identical(3, 1.0, 1.5, 0.5).unwrap();
        let a = build_boolean_wigner(&p, EntryKind::Circular).unwrap();
        let b = build_matrix_bernoulli(&p).unwrap();
        let mut pa = eye(a.matrix().nrows());
        let mut pb = eye(b.matrix().nrows());
        for _ in 0..4 {
            pa *= a.matrix();
            pb *= b.matrix();
            assert!((a.model.expect(&pa).unwrap() - b.model.expect(&pb).unwrap()).camax() < 1e-12);
        }
        let zero = VarianceProfile::from_fn(3, |_| 0.0, |_, _| 0.0, |_, _| 0.0).unwrap();
        let z = build_boolean_wigner(&zero, EntryKind::Perturbed { gamma: 1.0 }).unwrap();
        assert_eq!(z.matrix().camax(), 0.0);
        let g = z.trace_cauchy(I).unwrap();
        assert!((g - I.inv()).norm() < 1e-15);
    }

    #[test]
    fn example_limit_cdfs() {
        let f = identical_limit_cdf(0.0, 2.0, 1.0);
        assert_eq!(f(0.0), 0.5);
        assert!((f(2f64.sqrt()) - 1.0).abs() < 1e-15 && f(-2.0) == 0.0);
        let g = distance_limit_cdf();
        assert!((g(0.5f64.sqrt()) - 1.0).abs() < 1e-15 && (g(0.5) - 0.5).abs() < 1e-15);
        let n = 60;
        let law = bernoulli_matrix_law(&lambda_profile(&VarianceProfile::identical(n, 0.0, 2.0, 1.0).unwrap())).unwrap();
        let cdf = ClosedFormCdf::new(f, vec![-2f64.sqrt(), -1.0, 1.0, 2f64.sqrt()]);
        assert!(levy_distance_cdf(&law, &cdf) < 0.06);
    }
}
