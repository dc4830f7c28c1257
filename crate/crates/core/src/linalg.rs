//! Dense complex linear algebra helpers shared by every module.
//!
//! The coefficient algebra `B` is always the full matrix algebra `M_d(C)`,
//! represented as a [`Mat`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type Vector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Deterministic generator used for every seeded construction.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(d: usize) -> Mat {
    Mat::identity(d, d)
}

pub fn zeros(d: usize) -> Mat {
    Mat::zeros(d, d)
}

/// `z` times the identity of size `d`.
pub fn scalar(d: usize, z: C64) -> Mat {
    Mat::from_diagonal_element(d, d, z)
}

/// Operator norm (largest singular value).
pub fn op_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn is_hermitian(m: &Mat, tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).camax() <= tol * (1.0 + m.camax())
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular matrix in inversion".into()))
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let hermitian = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = hermitian.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Mat::from_fn(m.nrows(), m.ncols(), |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// `(b - b*) / 2i`.
pub fn imag_part(b: &Mat) -> Mat {
    (b - b.adjoint()) * c(0.0, -0.5)
}

/// `(b + b*) / 2`.
pub fn real_part(b: &Mat) -> Mat {
    (b + b.adjoint()) * c(0.5, 0.0)
}

/// `‖(Im b)^{-1}‖`, failing unless `Im b` is positive definite.
pub fn inv_imag_norm(b: &Mat) -> Result<f64> {
    let (values, _) = hermitian_eigen(&imag_part(b));
    let lowest = values.first().copied().unwrap_or(0.0);
    if lowest <= 0.0 {
        return Err(Error::Domain(format!(
            "imaginary part is not positive definite (smallest eigenvalue {lowest:e})"
        )));
    }
    Ok(1.0 / lowest)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Matrix with a single unit entry at `(r, k)`.
pub fn unit(n: usize, r: usize, k: usize) -> Mat {
    let mut m = zeros(n);
    m[(r, k)] = c(1.0, 0.0);
    m
}

/// `b ⊗ 1_dim` in the ordering `C^d ⊗ C^dim`.
pub fn amplify(b: &Mat, dim: usize) -> Mat {
    kron(b, &eye(dim))
}

/// Contracts the second tensor leg of a `C^d ⊗ C^dim` operator against a
/// unit vector: `(id_d ⊗ ⟨ξ, · ξ⟩)(x)`.
pub fn contract(x: &Mat, d: usize, xi: &Vector) -> Mat {
    let dim = xi.len();
    debug_assert_eq!(x.nrows(), d * dim);
    Mat::from_fn(d, d, |a, b| {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..dim {
            let row = a * dim + j;
            let cj = xi[j].conj();
            if cj == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..dim {
                acc += cj * x[(row, b * dim + k)] * xi[k];
            }
        }
        acc
    })
}

/// The isometry `C^d → C^d ⊗ C^dim`, `v ↦ v ⊗ ξ`.
pub fn vacuum_frame(d: usize, xi: &Vector) -> Mat {
    let dim = xi.len();
    Mat::from_fn(d * dim, d, |r, a| if r / dim == a { xi[r % dim] } else { C64::new(0.0, 0.0) })
}

fn uniform(rng: &mut impl Rng) -> f64 {
    rng.random_range(-1.0..1.0)
}

pub fn random_complex(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| c(uniform(rng), uniform(rng)))
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> Mat {
    let a = random_complex(rng, n, n);
    (&a + a.adjoint()) * c(0.5, 0.0)
}

/// Random positive semidefinite matrix `a a*`.
pub fn random_psd(rng: &mut impl Rng, n: usize) -> Mat {
    let a = random_complex(rng, n, n);
    &a * a.adjoint()
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> Mat {
    random_complex(rng, n, n).qr().q()
}

pub fn random_unit_vector(rng: &mut impl Rng, n: usize) -> Vector {
    let v = Vector::from_fn(n, |_, _| c(uniform(rng), uniform(rng)));
    let norm = v.norm();
    v / c(norm, 0.0)
}

/// Random `b` with `Im b ≥ floor · 1`.
pub fn random_upper(rng: &mut impl Rng, d: usize, floor: f64) -> Mat {
    let re = random_hermitian(rng, d);
    let im = random_psd(rng, d) * c(0.5, 0.0) + scalar(d, c(floor, 0.0));
    re + im * I
}

/// Cayley transform of a Hermitian matrix: a unitary close to the identity.
fn cayley(h: &Mat) -> Result<Mat> {
    let d = h.nrows();
    let half = h * c(0.0, 0.5);
    Ok((eye(d) + &half) * inverse(&(eye(d) - half))?)
}

/// Estimates `sup_{‖b‖=1} f(b)` over `M_d` for functions whose supremum is
/// attained on unitaries (convex functions of `b`), using a seeded net of
/// random unitaries followed by random local polishing.
pub fn sup_over_unitaries(d: usize, net: usize, seed: u64, f: impl Fn(&Mat) -> f64) -> f64 {
    if d == 1 {
        // Unit scalars: f(e^{iθ}) is sampled finely.
        return (0..net.max(64))
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / net.max(64) as f64;
                f(&scalar(1, C64::from_polar(1.0, theta)))
            })
            .fold(f(&eye(1)), f64::max);
    }
    let mut rng = rng(seed);
    let mut candidates: Vec<(f64, Mat)> = (0..net)
        .map(|k| {
            let u = if k == 0 { eye(d) } else { random_unitary(&mut rng, d) };
            (f(&u), u)
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = candidates[0].0;
    for (value, start) in candidates.into_iter().take(5) {
        let mut current = (value, start);
        let mut step = 0.5;
        for _ in 0..60 {
            let h = random_hermitian(&mut rng, d) * c(step, 0.0);
            let Ok(rot) = cayley(&h) else { continue };
            let trial = &current.1 * rot;
            let v = f(&trial);
            if v > current.0 {
                current = (v, trial);
            } else {
                step *= 0.85;
            }
        }
        best = best.max(current.0);
    }
    best
}
