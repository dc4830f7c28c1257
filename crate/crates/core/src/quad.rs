//! Adaptive Gauss–Kronrod (7/15) quadrature, including integrals over the
//! whole real line through the substitution `t = c + L·s/(1 − s²)`.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and limits for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            rel_tol: 1e-9,
            max_panels: 20_000,
        }
    }
}

fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * half, ((k - g) * half).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over `[a, b]` split first at `breaks`, bisecting the
/// panel with the largest error estimate until the tolerance is met.
/// The final sum runs over panels in left-to-right order.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], opts: QuadOptions) -> Result<f64> {
    let mut points: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| a < x && x < b))
        .chain(std::iter::once(b))
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut heap: BinaryHeap<Panel> = points
        .windows(2)
        .map(|w| {
            let (value, err) = kronrod(&f, w[0], w[1]);
            Panel { a: w[0], b: w[1], value, err }
        })
        .collect();
    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let err: f64 = heap.iter().map(|p| p.err).sum();
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            let mut panels = heap.into_vec();
            panels.sort_by(|x, y| x.a.total_cmp(&y.a));
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::Numerical(format!(
                "quadrature did not converge: estimate {total:e}, error {err:e} after {} panels",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err) = kronrod(&f, lo, hi);
            heap.push(Panel { a: lo, b: hi, value, err });
        }
    }
}

/// Integrates `f` over the real line. `center` and `scale` position the
/// substitution `t = center + scale·s/(1 − s²)`; `breaks` are points of `ℝ`
/// where `f` varies rapidly.
pub fn integrate_line(f: impl Fn(f64) -> f64, center: f64, scale: f64, breaks: &[f64], opts: QuadOptions) -> Result<f64> {
    let to_s = |t: f64| {
        let u = (t - center) / scale;
        if u == 0.0 {
            0.0
        } else {
            2.0 * u / (1.0 + (1.0 + 4.0 * u * u).sqrt())
        }
    };
    let mapped: Vec<f64> = breaks.iter().map(|&t| to_s(t)).collect();
    let g = |s: f64| {
        let q = 1.0 - s * s;
        if q <= 0.0 {
            return 0.0;
        }
        let t = center + scale * s / q;
        let jac = scale * (1.0 + s * s) / (q * q);
        let v = f(t) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, -1.0, 1.0, &mapped, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, &[], QuadOptions::default()).unwrap();
        assert!((v - (64.0 / 6.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn lorentzian_over_line() {
        for eps in [1.0, 0.1, 1e-3] {
            let v = integrate_line(
                |t| eps / ((t - 0.3) * (t - 0.3) + eps * eps),
                0.0,
                1.0,
                &[0.3],
                QuadOptions::default(),
            )
            .unwrap();
            assert!((v - std::f64::consts::PI).abs() < 1e-7, "eps={eps}: {v}");
        }
    }
}
