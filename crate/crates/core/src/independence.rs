//! Mixed moments of independent algebras computed from the single-algebra
//! functionals alone.
//!
//! A word is cut into maximal runs of letters from one algebra. Boolean
//! words factor run by run; monotone words repeatedly replace a run whose
//! algebra is a local maximum by its expectation; free words use the
//! centering recursion `0 = E[Π(x_j − E x_j)]` expanded over subsets.

use crate::cumulant::{cumulants_from_moments, Independence, OvFunctional};
use crate::error::{invalid, Error, Result};
use crate::linalg::{eye, op_norm, Mat};

/// A word `b_0 x_1 b_1 x_2 ⋯ b_{n-1} x_n b_n` whose letters are
/// `(algebra, element)` pairs.
#[derive(Clone, Debug)]
pub struct TaggedWord {
    pub letters: Vec<(usize, usize)>,
    pub inner: Vec<Mat>,
    pub left: Option<Mat>,
    pub right: Option<Mat>,
}

impl TaggedWord {
    pub fn new(letters: Vec<(usize, usize)>, inner: Vec<Mat>) -> Self {
        Self {
            letters,
            inner,
            left: None,
            right: None,
        }
    }

    /// Word with all inner coefficients equal to the identity of `M_d`.
    pub fn plain(letters: Vec<(usize, usize)>, d: usize) -> Self {
        let n = letters.len().saturating_sub(1);
        Self::new(letters, vec![eye(d); n])
    }

    pub fn with_outer(mut self, left: Mat, right: Mat) -> Self {
        self.left = Some(left);
        self.right = Some(right);
        self
    }
}

#[derive(Clone, Debug)]
struct Run {
    alg: usize,
    letters: Vec<usize>,
    inner: Vec<Mat>,
}

/// `left · R_0 s_0 R_1 ⋯ s_{m-2} R_{m-1} · right` with adjacent runs from
/// different algebras.
#[derive(Clone, Debug)]
struct Reduced {
    left: Mat,
    runs: Vec<Run>,
    seps: Vec<Mat>,
    right: Mat,
}

enum Tok {
    M(Mat),
    R(Run),
}

fn normalize(d: usize, toks: Vec<Tok>) -> Reduced {
    let mut left: Option<Mat> = None;
    let mut runs: Vec<Run> = Vec::new();
    let mut seps: Vec<Mat> = Vec::new();
    let mut pending = eye(d);
    for tok in toks {
        match tok {
            Tok::M(m) => pending = pending * m,
            Tok::R(run) => {
                let gap = std::mem::replace(&mut pending, eye(d));
                match runs.last_mut() {
                    None => {
                        left = Some(gap);
                        runs.push(run);
                    }
                    Some(last) if last.alg == run.alg => {
                        last.inner.push(gap);
                        last.inner.extend(run.inner);
                        last.letters.extend(run.letters);
                    }
                    Some(_) => {
                        seps.push(gap);
                        runs.push(run);
                    }
                }
            }
        }
    }
    match left {
        Some(left) => Reduced {
            left,
            runs,
            seps,
            right: pending,
        },
        None => Reduced {
            left: pending,
            runs,
            seps,
            right: eye(d),
        },
    }
}

impl Reduced {
    fn from_word(d: usize, word: &TaggedWord) -> Self {
        let mut toks = Vec::with_capacity(2 * word.letters.len() + 1);
        toks.push(Tok::M(word.left.clone().unwrap_or_else(|| eye(d))));
        for (j, &(alg, elem)) in word.letters.iter().enumerate() {
            if j > 0 {
                toks.push(Tok::M(word.inner[j - 1].clone()));
            }
            toks.push(Tok::R(Run {
                alg,
                letters: vec![elem],
                inner: Vec::new(),
            }));
        }
        toks.push(Tok::M(word.right.clone().unwrap_or_else(|| eye(d))));
        normalize(d, toks)
    }

    /// Rebuilds the word with the runs selected by `replace` swapped for
    /// the given matrices.
    fn substitute(&self, d: usize, replace: &[Option<Mat>]) -> Self {
        let mut toks = vec![Tok::M(self.left.clone())];
        for (k, run) in self.runs.iter().enumerate() {
            if k > 0 {
                toks.push(Tok::M(self.seps[k - 1].clone()));
            }
            match &replace[k] {
                Some(v) => toks.push(Tok::M(v.clone())),
                None => toks.push(Tok::R(run.clone())),
            }
        }
        toks.push(Tok::M(self.right.clone()));
        normalize(d, toks)
    }
}

fn run_value(algebras: &[&dyn OvFunctional], run: &Run) -> Mat {
    algebras[run.alg].eval(&run.letters, &run.inner)
}

fn validate(word: &TaggedWord, algebras: &[&dyn OvFunctional]) -> Result<usize> {
    if word.letters.is_empty() {
        return Err(invalid("word must contain at least one letter"));
    }
    if algebras.is_empty() {
        return Err(invalid("no algebras supplied"));
    }
    let d = algebras[0].dim();
    if algebras.iter().any(|a| a.dim() != d) {
        return Err(invalid("algebras disagree on the coefficient dimension"));
    }
    if word.inner.len() + 1 != word.letters.len() {
        return Err(invalid("separator count must be one less than the letter count"));
    }
    if let Some(&(alg, _)) = word.letters.iter().find(|(a, _)| *a >= algebras.len()) {
        return Err(invalid(format!("algebra index {alg} has no functional")));
    }
    Ok(d)
}

/// Expectation of a word over independent algebras. For the monotone kind
/// algebra `i` precedes algebra `j` in the order `≺` iff `i < j`.
pub fn mixed_moment(kind: Independence, word: &TaggedWord, algebras: &[&dyn OvFunctional]) -> Result<Mat> {
    let d = validate(word, algebras)?;
    let reduced = Reduced::from_word(d, word);
    Ok(match kind {
        Independence::Boolean => boolean(algebras, &reduced),
        Independence::Monotone => monotone(d, algebras, reduced),
        Independence::Free => free(d, algebras, &reduced),
    })
}

fn boolean(algebras: &[&dyn OvFunctional], r: &Reduced) -> Mat {
    let mut acc = r.left.clone();
    for (k, run) in r.runs.iter().enumerate() {
        if k > 0 {
            acc *= &r.seps[k - 1];
        }
        acc *= run_value(algebras, run);
    }
    acc * &r.right
}

fn monotone(d: usize, algebras: &[&dyn OvFunctional], mut r: Reduced) -> Mat {
    loop {
        match r.runs.len() {
            0 => return &r.left * &r.right,
            1 => return &r.left * run_value(algebras, &r.runs[0]) * &r.right,
            m => {
                let peak = (0..m)
                    .find(|&k| {
                        let a = r.runs[k].alg;
                        (k == 0 || r.runs[k - 1].alg < a) && (k + 1 == m || r.runs[k + 1].alg < a)
                    })
                    .expect("a maximal algebra index is always a local maximum");
                let mut replace = vec![None; m];
                replace[peak] = Some(run_value(algebras, &r.runs[peak]));
                r = r.substitute(d, &replace);
            }
        }
    }
}

fn free(d: usize, algebras: &[&dyn OvFunctional], r: &Reduced) -> Mat {
    let m = r.runs.len();
    match m {
        0 => return &r.left * &r.right,
        1 => return &r.left * run_value(algebras, &r.runs[0]) * &r.right,
        _ => {}
    }
    let values: Vec<Mat> = r.runs.iter().map(|run| run_value(algebras, run)).collect();
    let mut total = Mat::zeros(d, d);
    for mask in 1u32..(1 << m) {
        let replace: Vec<Option<Mat>> = (0..m)
            .map(|k| (mask >> k & 1 == 1).then(|| values[k].clone()))
            .collect();
        let term = free(d, algebras, &r.substitute(d, &replace));
        // E[word] = −Σ_{T≠∅} (−1)^{|T|} E[word with T replaced by means]
        if mask.count_ones() % 2 == 1 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

/// Joint moment functional of several independent algebras. Letter `k`
/// of an evaluated word stands for `table[k] = (algebra, element)`.
pub struct JointFunctional<'a> {
    pub kind: Independence,
    pub algebras: Vec<&'a dyn OvFunctional>,
    pub table: Vec<(usize, usize)>,
}

impl OvFunctional for JointFunctional<'_> {
    fn dim(&self) -> usize {
        self.algebras[0].dim()
    }

    fn eval(&self, letters: &[usize], inner: &[Mat]) -> Mat {
        let word = TaggedWord::new(letters.iter().map(|&l| self.table[l]).collect(), inner.to_vec());
        mixed_moment(self.kind, &word, &self.algebras).expect("joint word validated on construction")
    }
}

/// Mixed cumulant of a tagged word, from mixed moments.
pub fn mixed_cumulant(kind: Independence, word: &TaggedWord, algebras: &[&dyn OvFunctional]) -> Result<Mat> {
    validate(word, algebras)?;
    let mut table: Vec<(usize, usize)> = Vec::new();
    let letters: Vec<usize> = word
        .letters
        .iter()
        .map(|l| match table.iter().position(|t| t == l) {
            Some(p) => p,
            None => {
                table.push(*l);
                table.len() - 1
            }
        })
        .collect();
    let joint = JointFunctional {
        kind,
        algebras: algebras.to_vec(),
        table,
    };
    cumulants_from_moments(kind, &joint, &letters, &word.inner)
}

/// Whether the mixed free or Boolean cumulant of `word` vanishes to `tol`.
pub fn check_vanishing_mixed(
    kind: Independence,
    word: &TaggedWord,
    algebras: &[&dyn OvFunctional],
    tol: f64,
) -> Result<bool> {
    if kind == Independence::Monotone {
        return Err(Error::Unsupported(
            "mixed monotone cumulants do not characterize monotone independence".into(),
        ));
    }
    Ok(op_norm(&mixed_cumulant(kind, word, algebras)?) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::{limit_moments, ScalarSequence};
    use crate::linalg::c;

    fn bernoulli() -> ScalarSequence {
        ScalarSequence {
            values: (0..=12).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect(),
        }
    }

    fn semicircle() -> ScalarSequence {
        let eta = |b: &Mat| b.clone();
        ScalarSequence {
            values: (0..=12)
                .map(|k| limit_moments(Independence::Free, 1, &eta, &vec![eye(1); k + 1]).unwrap()[(0, 0)].re)
                .collect(),
        }
    }

    fn word(letters: &[usize]) -> TaggedWord {
        TaggedWord::plain(letters.iter().map(|&a| (a, 0)).collect(), 1)
    }

    #[test]
    fn boolean_centered_middle_vanishes() {
        let x = ScalarSequence { values: vec![1.0, 0.7, 2.0] };
        let y = bernoulli();
        let algs: [&dyn OvFunctional; 2] = [&x, &y];
        let v = mixed_moment(Independence::Boolean, &word(&[0, 1, 0]), &algs).unwrap();
        assert_eq!(v[(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn monotone_pair_fourth_moment_is_five() {
        let b = bernoulli();
        let algs: [&dyn OvFunctional; 2] = [&b, &b];
        let mut total = 0.0;
        for w in 0..16u32 {
            let letters: Vec<usize> = (0..4).map(|k| (w >> k & 1) as usize).collect();
            total += mixed_moment(Independence::Monotone, &word(&letters), &algs).unwrap()[(0, 0)].re;
        }
        assert!((total - 5.0).abs() < 1e-14);
    }

    #[test]
    fn free_semicirculars() {
        let s = semicircle();
        let algs: [&dyn OvFunctional; 2] = [&s, &s];
        let alt = mixed_moment(Independence::Free, &word(&[0, 1, 0, 1]), &algs).unwrap();
        assert!(alt[(0, 0)].norm() < 1e-14);
        let nested = mixed_moment(Independence::Free, &word(&[0, 1, 1, 0]), &algs).unwrap();
        assert!((nested[(0, 0)].re - 1.0).abs() < 1e-14);
        // (s₁ + s₂)/√2 is semicircular: m₄ = 2.
        let mut total = 0.0;
        for w in 0..16u32 {
            let letters: Vec<usize> = (0..4).map(|k| (w >> k & 1) as usize).collect();
            total += mixed_moment(Independence::Free, &word(&letters), &algs).unwrap()[(0, 0)].re;
        }
        assert!((total / 4.0 - 2.0).abs() < 1e-13);
        assert!(check_vanishing_mixed(Independence::Free, &word(&[0, 1, 0, 1]), &algs, 1e-10).unwrap());
    }

    #[test]
    fn vanishing_checks() {
        let b = bernoulli();
        let algs: [&dyn OvFunctional; 2] = [&b, &b];
        assert!(check_vanishing_mixed(Independence::Boolean, &word(&[0, 1]), &algs, 1e-10).unwrap());
        assert!(!check_vanishing_mixed(Independence::Boolean, &word(&[0, 0]), &algs, 1e-10).unwrap());
        assert!(check_vanishing_mixed(Independence::Monotone, &word(&[0, 1]), &algs, 1e-10).is_err());
        assert!(mixed_moment(Independence::Boolean, &word(&[]), &algs).is_err());
    }
}
