//! Operator-valued moment and cumulant maps over `B = M_d(C)`.
//!
//! A multilinear family is evaluated on words `x_{l_1} b_1 x_{l_2} … b_{n-1} x_{l_n}`:
//! the letters `l_j` name elements, the `b_j` are the interleaved
//! coefficients. Nested partition evaluations `f_π` follow the usual
//! recursion: an interval block is evaluated first and its value is
//! multiplied into the surrounding coefficients.

use std::collections::BTreeMap;

use num_traits::{FromPrimitive, Num};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, eye, op_norm, random_complex, rng, zeros, Mat};
use crate::partition::{enumerate, Partition, PartitionClass};

/// Highest moment order accepted by the moment-cumulant formulas.
pub const MAX_ORDER: usize = 12;

/// The three notions of independence with amalgamation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Independence {
    Free,
    Boolean,
    Monotone,
}

impl Independence {
    /// Lattice summed over by the moment-cumulant formula.
    pub fn lattice(self) -> PartitionClass {
        match self {
            Self::Boolean => PartitionClass::Interval,
            Self::Free | Self::Monotone => PartitionClass::Noncrossing,
        }
    }

    /// Weight of `π` in the moment-cumulant formula.
    pub fn weight(self, pi: &Partition) -> f64 {
        match self {
            Self::Monotone => 1.0 / pi.tau_factorial().expect("lattice is non-crossing") as f64,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Free => "free",
            Self::Boolean => "boolean",
            Self::Monotone => "monotone",
        }
    }
}

impl std::str::FromStr for Independence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Self::Free),
            "boolean" => Ok(Self::Boolean),
            "monotone" => Ok(Self::Monotone),
            other => Err(invalid(format!("unknown independence `{other}`"))),
        }
    }
}

/// A family of `B`-valued multilinear maps `(x_{l_1} b_1, …, x_{l_n}) ↦ B`.
pub trait OvFunctional {
    /// Size `d` of the coefficient algebra `M_d`.
    fn dim(&self) -> usize;

    /// Value on the word with letters `letters` and inner coefficients
    /// `inner` (`inner.len() == letters.len() - 1`).
    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat;
}

impl<T: OvFunctional + ?Sized> OvFunctional for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        (**self).eval(letters, inner)
    }
}

/// Letters of a one-variable word of the given order.
pub fn single(order: usize) -> Vec<usize> {
    vec![0; order]
}

/// A functional defined by a closure.
pub struct FnFunctional<F> {
    d: usize,
    f: F,
}

impl<F: Fn(&[usize], &[Mat]) -> Mat> FnFunctional<F> {
    pub fn new(d: usize, f: F) -> Self {
        Self { d, f }
    }
}

impl<F: Fn(&[usize], &[Mat]) -> Mat> OvFunctional for FnFunctional<F> {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        (self.f)(letters, inner)
    }
}

/// Cumulant data with only a second-order term: `f_2(x b, x) = η(b)`.
pub struct PairingData<'a> {
    d: usize,
    eta: &'a dyn Fn(&Mat) -> Mat,
}

impl<'a> PairingData<'a> {
    pub fn new(d: usize, eta: &'a dyn Fn(&Mat) -> Mat) -> Self {
        Self { d, eta }
    }
}

impl OvFunctional for PairingData<'_> {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        if letters.len() == 2 {
            (self.eta)(&inner[0])
        } else {
            zeros(self.d)
        }
    }
}

/// Scalar one-variable moments `E[x b_1 x ⋯ x] = m_n b_1 ⋯ b_{n-1}`.
#[derive(Clone, Debug)]
pub struct ScalarSequence {
    /// `values[n]` is the order-`n` value; index 0 is ignored.
    pub values: Vec<f64>,
}

impl OvFunctional for ScalarSequence {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        let m = self.values.get(letters.len()).copied().unwrap_or(0.0);
        let prod = inner.iter().fold(c(m, 0.0), |acc, b| acc * b[(0, 0)]);
        Mat::from_element(1, 1, prod)
    }
}

/// Random multilinear family `Σ_t A^t_0 b_1 A^t_1 ⋯ b_{n-1} A^t_{n-1}`, with
/// coefficients depending on order, position and letter. Used as generic
/// cumulant data in tests and demonstrations.
#[derive(Clone, Debug)]
pub struct PolynomialFamily {
    d: usize,
    letters: usize,
    /// `coeffs[order][term][position][letter]`.
    coeffs: Vec<Vec<Vec<Vec<Mat>>>>,
}

impl PolynomialFamily {
    pub fn random(d: usize, max_order: usize, letters: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        let terms = 2;
        let coeffs = (0..=max_order)
            .map(|order| {
                (0..terms)
                    .map(|_| {
                        (0..order)
                            .map(|_| {
                                (0..letters)
                                    .map(|_| random_complex(&mut r, d, d) * c(r.random_range(0.3..1.0), 0.0))
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { d, letters, coeffs }
    }

    pub fn letter_count(&self) -> usize {
        self.letters
    }
}

impl OvFunctional for PolynomialFamily {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        let n = letters.len();
        let Some(terms) = self.coeffs.get(n) else {
            return zeros(self.d);
        };
        let mut total = zeros(self.d);
        for term in terms {
            let mut acc = term[0][letters[0]].clone();
            for j in 1..n {
                acc = acc * &inner[j - 1] * &term[j][letters[j]];
            }
            total += acc;
        }
        total
    }
}

fn check_word(letters: &[usize], inner: &[Mat], d: usize) -> Result<()> {
    if letters.is_empty() {
        return Err(invalid("word must contain at least one letter"));
    }
    if inner.len() + 1 != letters.len() {
        return Err(invalid(format!(
            "{} letters need {} inner arguments, got {}",
            letters.len(),
            letters.len() - 1,
            inner.len()
        )));
    }
    if inner.iter().any(|b| b.nrows() != d || b.ncols() != d) {
        return Err(invalid(format!("inner arguments must be {d}×{d}")));
    }
    Ok(())
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::SizeLimit {
            what: "moment order",
            got: order,
            max: MAX_ORDER,
        });
    }
    Ok(())
}

/// Evaluates `f_π` on `x_{l_1} b_1 ⋯ x_{l_n}`, always reducing the leftmost
/// interval block first.
pub fn evaluate_f_pi(f: &dyn OvFunctional, pi: &Partition, letters: &[usize], inner: &[Mat]) -> Result<Mat> {
    evaluate_f_pi_with(f, pi, letters, inner, |_| 0)
}

/// As [`evaluate_f_pi`], with `pick` choosing which of the currently
/// available interval blocks (listed left to right) is reduced next.
pub fn evaluate_f_pi_with(
    f: &dyn OvFunctional,
    pi: &Partition,
    letters: &[usize],
    inner: &[Mat],
    mut pick: impl FnMut(usize) -> usize,
) -> Result<Mat> {
    if pi.n() != letters.len() {
        return Err(invalid("partition size differs from word length"));
    }
    check_word(letters, inner, f.dim())?;
    if !pi.is_noncrossing() {
        return Err(invalid("f_π requires a non-crossing partition"));
    }
    Ok(reduce(f, pi.labels(), letters, inner, &mut pick))
}

fn reduce(
    f: &dyn OvFunctional,
    labels: &[u8],
    letters: &[usize],
    inner: &[Mat],
    pick: &mut dyn FnMut(usize) -> usize,
) -> Mat {
    let d = f.dim();
    let mut items: Vec<usize> = (0..letters.len()).collect();
    let mut seps: Vec<Mat> = inner.to_vec();
    let mut left = eye(d);
    let mut right = eye(d);
    loop {
        // (first, last) positions of every interval block in the current word.
        let mut spans: BTreeMap<u8, (usize, usize, usize)> = BTreeMap::new();
        for (pos, &item) in items.iter().enumerate() {
            let e = spans.entry(labels[item]).or_insert((pos, pos, 0));
            e.1 = pos;
            e.2 += 1;
        }
        let mut intervals: Vec<(usize, usize)> = spans
            .values()
            .filter(|&&(s, e, count)| e - s + 1 == count)
            .map(|&(s, e, _)| (s, e))
            .collect();
        intervals.sort_unstable();
        let (s, e) = intervals[pick(intervals.len()) % intervals.len()];
        let block_letters: Vec<usize> = items[s..=e].iter().map(|&p| letters[p]).collect();
        let value = f.eval(&block_letters, &seps[s..e]);
        let last = items.len() - 1;
        match (s == 0, e == last) {
            (true, true) => return left * value * right,
            (true, false) => {
                left = left * value * &seps[e];
                items.drain(0..=e);
                seps.drain(0..=e);
            }
            (false, true) => {
                right = &seps[s - 1] * value * right;
                items.drain(s..);
                seps.drain(s - 1..);
            }
            (false, false) => {
                let merged = &seps[s - 1] * value * &seps[e];
                seps.splice(s - 1..=e, std::iter::once(merged));
                items.drain(s..=e);
            }
        }
    }
}

/// `Σ_π w(π) κ_π` over the lattice of `kind`.
pub fn moments_from_cumulants(
    kind: Independence,
    cumulants: &dyn OvFunctional,
    letters: &[usize],
    inner: &[Mat],
) -> Result<Mat> {
    check_word(letters, inner, cumulants.dim())?;
    check_order(letters.len())?;
    let mut total = zeros(cumulants.dim());
    for pi in enumerate(letters.len(), kind.lattice())? {
        let w = kind.weight(&pi);
        total += reduce(cumulants, pi.labels(), letters, inner, &mut |_| 0) * c(w, 0.0);
    }
    Ok(total)
}

/// Inverts the moment-cumulant formula: `κ_n = E_n − Σ_{π ≠ 1_n} w(π) κ_π`,
/// with lower-order cumulants computed recursively.
pub fn cumulants_from_moments(
    kind: Independence,
    moments: &dyn OvFunctional,
    letters: &[usize],
    inner: &[Mat],
) -> Result<Mat> {
    check_word(letters, inner, moments.dim())?;
    check_order(letters.len())?;
    Ok(CumulantsOf { kind, moments }.eval(letters, inner))
}

/// Moments generated by cumulant data, as a functional.
pub struct MomentsOf<'a> {
    pub kind: Independence,
    pub cumulants: &'a dyn OvFunctional,
}

impl OvFunctional for MomentsOf<'_> {
    fn dim(&self) -> usize {
        self.cumulants.dim()
    }
    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        moments_from_cumulants(self.kind, self.cumulants, letters, inner).expect("validated word")
    }
}

/// Cumulants of a moment functional, as a functional.
pub struct CumulantsOf<'a> {
    pub kind: Independence,
    pub moments: &'a dyn OvFunctional,
}

impl OvFunctional for CumulantsOf<'_> {
    fn dim(&self) -> usize {
        self.moments.dim()
    }
    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        let n = letters.len();
        let mut value = self.moments.eval(letters, inner);
        if n == 1 {
            return value;
        }
        for pi in enumerate(n, self.kind.lattice()).expect("order validated") {
            if pi.is_full() {
                continue;
            }
            let w = self.kind.weight(&pi);
            value -= reduce(self, pi.labels(), letters, inner, &mut |_| 0) * c(w, 0.0);
        }
        value
    }
}

/// Moments of the central limit elements with variance `η`:
/// semicircular (free), Bernoulli (Boolean) and arcsine (monotone).
/// `args = [b_0, …, b_k]` gives the value of `E[b_0 x b_1 x ⋯ x b_k]`.
pub fn limit_moments(kind: Independence, d: usize, eta: &dyn Fn(&Mat) -> Mat, args: &[Mat]) -> Result<Mat> {
    let k = args.len().checked_sub(1).ok_or_else(|| invalid("need at least b_0"))?;
    check_order(k)?;
    if k == 0 {
        return Ok(args[0].clone());
    }
    if k % 2 == 1 {
        return Ok(zeros(d));
    }
    let inner = &args[1..k];
    let core = match kind {
        Independence::Boolean => {
            // b_0 η(b_1) b_2 η(b_3) ⋯ η(b_{k-1}) b_k
            let mut acc = eye(d);
            for j in (0..inner.len()).step_by(2) {
                acc = acc * eta(&inner[j]);
                if j + 1 < inner.len() {
                    acc = acc * &inner[j + 1];
                }
            }
            acc
        }
        Independence::Free | Independence::Monotone => {
            let data = PairingData::new(d, eta);
            let letters = single(k);
            let mut total = zeros(d);
            for pi in enumerate(k, PartitionClass::NoncrossingPair)? {
                total += reduce(&data, pi.labels(), &letters, inner, &mut |_| 0) * c(kind.weight(&pi), 0.0);
            }
            total
        }
    };
    Ok(&args[0] * core * &args[k])
}

/// The closed forms of the first four monotone cumulants in terms of moments.
pub fn monotone_h_closed_form<T>(m: [T; 4]) -> [T; 4]
where
    T: Num + Clone + FromPrimitive,
{
    let q = |p: i64, r: i64| T::from_i64(p).unwrap() / T::from_i64(r).unwrap();
    let [m1, m2, m3, m4] = m;
    let h1 = m1.clone();
    let h2 = m2.clone() - m1.clone() * m1.clone();
    let m1_3 = m1.clone() * m1.clone() * m1.clone();
    let h3 = m3.clone() - q(5, 2) * m2.clone() * m1.clone() + q(3, 2) * m1_3.clone();
    let h4 = m4 - q(3, 2) * m2.clone() * m2.clone() - q(3, 1) * m3 * m1.clone()
        + q(37, 6) * m2 * m1.clone() * m1.clone()
        - q(8, 3) * m1_3 * m1;
    [h1, h2, h3, h4]
}

/// Fourth monotone cumulant of a centered element from its moment
/// functional: `E[xb₁xb₂xb₃x] − E[xb₁x] b₂ E[xb₃x] − ½ E[x b₁ E[xb₂x] b₃ x]`.
pub fn ov_h4(moments: &dyn OvFunctional, b1: &Mat, b2: &Mat, b3: &Mat) -> Result<Mat> {
    let mean = moments.eval(&[0], &[]);
    if op_norm(&mean) > 1e-10 {
        return Err(invalid(format!("element is not centered (‖E[x]‖ = {:e})", op_norm(&mean))));
    }
    let e4 = moments.eval(&[0; 4], &[b1.clone(), b2.clone(), b3.clone()]);
    let e2 = |b: &Mat| moments.eval(&[0; 2], std::slice::from_ref(b));
    let nested = b1 * e2(b2) * b3;
    Ok(e4 - e2(b1) * b2 * e2(b3) - moments.eval(&[0; 2], &[nested]) * c(0.5, 0.0))
}

/// Scalar single-variable moment-cumulant formulas over any number field,
/// used with exact rationals to pin normalizations.
pub mod scalar {
    use super::*;

    fn weight<T: Num + Clone + FromPrimitive>(kind: Independence, pi: &Partition) -> T {
        match kind {
            Independence::Monotone => T::one() / T::from_u64(pi.tau_factorial().unwrap()).unwrap(),
            _ => T::one(),
        }
    }

    fn product<T: Num + Clone>(pi: &Partition, cumulants: &[T]) -> T {
        pi.blocks()
            .iter()
            .fold(T::one(), |acc, b| acc * cumulants.get(b.len()).cloned().unwrap_or_else(T::zero))
    }

    /// `m_n = Σ_π w(π) Π_V c_{|V|}`; `cumulants[k]` is `c_k` (index 0 ignored).
    pub fn moment<T: Num + Clone + FromPrimitive>(kind: Independence, cumulants: &[T], n: usize) -> Result<T> {
        check_order(n)?;
        let mut total = T::zero();
        for pi in enumerate(n, kind.lattice())? {
            total = total + weight::<T>(kind, &pi) * product(&pi, cumulants);
        }
        Ok(total)
    }

    /// Cumulants `c_0..=c_n` of a moment sequence (`moments[k] = m_k`).
    pub fn cumulants<T: Num + Clone + FromPrimitive>(kind: Independence, moments: &[T], n: usize) -> Result<Vec<T>> {
        check_order(n)?;
        let mut out = vec![T::zero(); n + 1];
        for k in 1..=n {
            let mut value = moments.get(k).cloned().unwrap_or_else(T::zero);
            for pi in enumerate(k, kind.lattice())? {
                if !pi.is_full() {
                    value = value - weight::<T>(kind, &pi) * product(&pi, &out);
                }
            }
            out[k] = value;
        }
        Ok(out)
    }
}
