//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits nonzero if any check fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ncprob::cumulant::{
    cumulants_from_moments, limit_moments, moments_from_cumulants, scalar, CumulantsOf, Independence,
    MomentsOf, OvFunctional, PolynomialFamily, ScalarSequence,
};
use ncprob::harness::{
    clt_gap, comparison_gap, fourth_moment_gap, lindeberg_expectations, monotone_subordination_check,
    random_family_pair, random_kraus_factor, telescoping_residual, wigner_gap, BoundKind, Comparison, KrausMap,
};
use ncprob::independence::{mixed_moment, TaggedWord};
use ncprob::infinitesimal::{
    inf_bound_gap, inf_comparison_gap, lift_equivalence_residual, random_inf_families, tilde_norm_ratio, InfModel,
    InfVariance,
};
use ncprob::linalg::{c, eye, kron, op_norm, random_complex, random_hermitian, random_psd, random_upper, rng, unit, Mat};
use ncprob::model::{
    bernoulli_matrix_law, build_matrix_bernoulli, distance_limit_cdf, identical_limit_cdf, lambda_profile,
    monotone_product_family, EntryKind, Factor, VarianceProfile, Weighting,
};
use ncprob::partition::{count, PartitionClass};
use ncprob::transform::{
    levy_distance_cdf, moments_from_transform, monotone_convolve, resolvent_l2_integral, two_point, AtomicMeasure,
    ClosedFormCdf, SpectralMeasure,
};
use num_rational::Ratio;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn catalan(n: usize) -> usize {
    (0..n).fold(1usize, |acc, k| acc * 2 * (2 * k + 1) / (k + 2))
}

fn partition_counts() -> Check {
    for (n, want) in [1usize, 2, 5, 14, 42, 132].iter().enumerate() {
        let n = n + 1;
        ensure(count(n, PartitionClass::Noncrossing).unwrap() == *want, format!("|NC({n})|"))?;
        ensure(count(n, PartitionClass::Interval).unwrap() == 1 << (n - 1), format!("|I({n})|"))?;
    }
    for m in 1..=6 {
        ensure(count(2 * m, PartitionClass::NoncrossingPair).unwrap() == catalan(m), format!("|NC2({})|", 2 * m))?;
    }
    Ok("NC(1..6) = 1,2,5,14,42,132; I(n) = 2^(n-1); NC2(2m) = Catalan(m)".into())
}

fn cumulant_roundtrips() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        for d in [1usize, 2] {
            let fam = PolynomialFamily::random(d, 6, 2, seed);
            let mut r = rng(1000 + seed);
            let inner: Vec<Mat> = (0..5).map(|_| random_complex(&mut r, d, d)).collect();
            for kind in [Independence::Free, Independence::Boolean, Independence::Monotone] {
                let moments = MomentsOf { kind, cumulants: &fam };
                let cumulants = CumulantsOf { kind, moments: &fam };
                for order in 1..=6 {
                    let letters: Vec<usize> = (0..order).map(|k| ((seed as usize + k) * 7 / 3) % 2).collect();
                    let word_inner = &inner[..order - 1];
                    let back = cumulants_from_moments(kind, &moments, &letters, word_inner).unwrap();
                    let scale = op_norm(&fam.eval(&letters, word_inner)).max(1.0);
                    worst = worst.max((back - fam.eval(&letters, word_inner)).camax() / scale);
                    let forth = moments_from_cumulants(kind, &cumulants, &letters, word_inner).unwrap();
                    worst = worst.max((forth - fam.eval(&letters, word_inner)).camax() / scale);
                }
            }
        }
    }
    ensure(worst <= 1e-10, format!("residual {worst:.2e}"))?;
    Ok(format!("max relative residual {worst:.2e}"))
}

fn arcsine_and_bernoulli_moments() -> Check {
    let h = vec![Ratio::<i64>::from_integer(0), Ratio::from_integer(0), Ratio::from_integer(1)];
    let m4 = scalar::moment(Independence::Monotone, &h, 4).unwrap();
    ensure(m4 == Ratio::new(3, 2), format!("monotone m4 = {m4}"))?;
    // Bernoulli even moments follow the η(1) chain
    let mut r = rng(3);
    let k1 = random_complex(&mut r, 2, 2);
    let k2 = random_complex(&mut r, 2, 2);
    let eta = move |b: &Mat| k1.adjoint() * b * &k1 + k2.adjoint() * b * &k2;
    let eta1 = eta(&eye(2));
    let mut worst = 0.0f64;
    for k in 1..=6 {
        let args = vec![eye(2); 2 * k + 1];
        let m = limit_moments(Independence::Boolean, 2, &eta, &args).unwrap();
        let chain = (1..k).fold(eta1.clone(), |acc, _| acc * &eta1);
        worst = worst.max((m - &chain).camax() / chain.camax());
    }
    ensure(worst <= 1e-13, format!("Bernoulli chain residual {worst:.2e}"))?;
    Ok(format!("m4 = {m4} in exact arithmetic; Bernoulli m_2k = η(1)^k to {worst:.1e}"))
}

fn monotone_pair_sum() -> Check {
    let bern = ScalarSequence { values: vec![1.0, 0.0, 1.0, 0.0, 1.0] };
    let algs: [&dyn OvFunctional; 2] = [&bern, &bern];
    let mut oracle = 0.0;
    for w in 0..16u32 {
        let letters: Vec<(usize, usize)> = (0..4).map(|k| ((w >> k & 1) as usize, 0)).collect();
        oracle += mixed_moment(Independence::Monotone, &TaggedWord::plain(letters, 1), &algs).unwrap()[(0, 0)].re;
    }
    let m = monotone_product_family(&[Factor::bernoulli(1.0), Factor::bernoulli(1.0)]).unwrap();
    let s = m.sum([0, 1]);
    let model = m.spectral_distribution(&s, Weighting::State).unwrap().moment(4);
    let b = SpectralMeasure::from(AtomicMeasure::bernoulli(1.0));
    let transform = moments_from_transform(&monotone_convolve(&b, &b), 4).unwrap()[4];
    for (name, v) in [("word oracle", oracle), ("operator model", model), ("transform", transform)] {
        ensure((v - 5.0).abs() <= 1e-8, format!("{name} gives {v}"))?;
    }
    Ok(format!("word {oracle:.12}, model {model:.12}, transform {transform:.12}"))
}

fn lindeberg_identity() -> Check {
    let mut telescoping = 0.0f64;
    let mut r = rng(5);
    for trial in 0..50u64 {
        let kind = if trial % 2 == 0 { BoundKind::Boolean } else { BoundKind::Monotone };
        let n = 2 + (trial as usize % 3);
        let pair = random_family_pair(kind, n, 1, trial).unwrap();
        let b = random_upper(&mut r, 1, 0.5);
        telescoping = telescoping.max(telescoping_residual(&pair.model, &pair.xs, &pair.ys, &b).unwrap());
    }
    ensure(telescoping <= 1e-12, format!("telescoping residual {telescoping:.2e}"))?;
    let mut vanish = 0.0f64;
    for kind in [BoundKind::Boolean, BoundKind::Monotone] {
        let pair = random_family_pair(kind, 4, 2, 77).unwrap();
        let b = random_upper(&mut r, 2, 0.5);
        for i in 1..=4 {
            let (ea, eb) = lindeberg_expectations(&pair.model, &pair.xs, &pair.ys, &b, i).unwrap();
            vanish = vanish.max(op_norm(&ea)).max(op_norm(&eb));
        }
    }
    ensure(vanish <= 1e-10, format!("E[A], E[B] of size {vanish:.2e}"))?;
    Ok(format!("telescoping {telescoping:.1e} over 50 pairs; E[A_i], E[B_i] ≤ {vanish:.1e} at N = 4, d = 2"))
}

fn subordination() -> Check {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = random_kraus_factor(&mut r, 2, 1.0);
        let y = random_kraus_factor(&mut r, 2, 1.0);
        let w = kron(&random_hermitian(&mut r, 2), &eye(2)) + kron(&random_psd(&mut r, 2), &unit(2, 1, 0));
        let w = Factor::new(2, Factor::bernoulli(1.0).vacuum, vec![w]).unwrap();
        let model = monotone_product_family(&[x, w, y]).unwrap();
        let b1 = random_upper(&mut r, 2, 0.5);
        let b2 = b1.adjoint();
        let res =
            monotone_subordination_check(&model, model.element(0), model.element(2), model.element(1), &b1, &b2).unwrap();
        worst = worst.max(res);
    }
    ensure(worst <= 1e-9, format!("residual {worst:.2e}"))?;
    Ok(format!("max residual {worst:.1e} over 20 triples"))
}

fn log_log_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}

fn clt_sweep() -> Check {
    let nus = [AtomicMeasure::bernoulli(1.0), two_point(0.3).unwrap()];
    let mut rows = 0;
    for nu in &nus {
        for kind in [BoundKind::Boolean, BoundKind::Monotone] {
            for n in [2usize, 4, 8, 16, 32] {
                for z in [c(0.0, 1.0), c(0.0, 2.0), c(1.0, 1.0)] {
                    let g = clt_gap(kind, nu, n, z).unwrap();
                    ensure(g.holds(), format!("{kind:?} n={n} z={z}: {g:?}"))?;
                    rows += 1;
                }
            }
        }
    }
    let pts: Vec<(f64, f64)> = [2usize, 4, 8, 16, 32]
        .iter()
        .map(|&n| ((n as f64).ln(), clt_gap(BoundKind::Monotone, &nus[0], n, c(0.0, 2.0)).unwrap().lhs.ln()))
        .collect();
    let slope = log_log_slope(&pts);
    ensure((-1.2..=-0.4).contains(&slope), format!("slope {slope}"))?;
    Ok(format!("{rows} rows, no violations; monotone slope {slope:.3}"))
}

fn comparison() -> Check {
    let z = ncprob::linalg::scalar(1, c(0.0, 2.0));
    let (e1, e2) = (KrausMap::scalar(1.0).unwrap(), KrausMap::scalar(2.0).unwrap());
    let g = comparison_gap(Comparison::Bernoulli, &e1, &e2, &z, 1, 64, 0).unwrap();
    ensure((g.lhs - 1.0 / 15.0).abs() <= 1e-12 && (g.rhs - 0.125).abs() <= 1e-12, format!("{g:?}"))?;
    let mut r = rng(10);
    for _ in 0..10 {
        let e0 = KrausMap::new(vec![random_hermitian(&mut r, 2) * c(0.7, 0.0)]).unwrap();
        let e1 = KrausMap::new(vec![
            random_hermitian(&mut r, 2) * c(0.7, 0.0),
            ncprob::linalg::random_unitary(&mut r, 2) * c(0.3, 0.0),
        ])
        .unwrap();
        let b = random_upper(&mut r, 4, 0.5);
        for kind in [Comparison::Bernoulli, Comparison::Arcsine] {
            let g = comparison_gap(kind, &e0, &e1, &b, 2, 100, 1).unwrap();
            ensure(g.holds(), format!("{kind:?}: {g:?}"))?;
        }
    }
    Ok(format!("lhs {:.15} = 1/15, rhs {:.15} = 1/8; k = 2 holds on 10 pairs", g.lhs, g.rhs))
}

fn matrix_bernoulli_laws() -> Check {
    let mut r = rng(4);
    use rand::Rng;
    let sig: Vec<f64> = (0..4).map(|_| r.random_range(0.0..2.0)).collect();
    let q = VarianceProfile::from_fn(4, |i| sig[i], |i, j| ((i + 2 * j) % 3) as f64 * 0.4, |i, j| 0.2 + (i * j) as f64 * 0.1)
        .unwrap();
    let bq = build_matrix_bernoulli(&q).unwrap();
    let mu = bq.model.spectral_distribution(bq.matrix(), Weighting::Trace).unwrap();
    let expected = bernoulli_matrix_law(&lambda_profile(&q)).unwrap();
    ensure(mu.atoms().len() == expected.atoms().len(), "atom count")?;
    for (a, e) in mu.atoms().iter().zip(expected.atoms()) {
        ensure((a.0 - e.0).abs() <= 1e-8 && (a.1 - e.1).abs() <= 1e-8, format!("atom {a:?} vs {e:?}"))?;
    }
    let (n, sigma, alpha, at) = (5usize, 0.3, 2.0, 0.5);
    let p = VarianceProfile::identical(n, sigma, alpha, at).unwrap();
    for (i, l) in lambda_profile(&p).iter().enumerate() {
        let want = sigma + i as f64 * alpha / n as f64 + (n - 1 - i) as f64 * at / n as f64;
        ensure((l - want).abs() <= 1e-14, format!("λ_{} = {l}, want {want}", i + 1))?;
    }
    let n = 200;
    let law = bernoulli_matrix_law(&lambda_profile(&VarianceProfile::identical(n, 0.0, 2.0, 1.0).unwrap())).unwrap();
    let cdf = ClosedFormCdf::new(identical_limit_cdf(0.0, 2.0, 1.0), vec![-2f64.sqrt(), -1.0, 1.0, 2f64.sqrt()]);
    let d1 = levy_distance_cdf(&law, &cdf);
    let law = bernoulli_matrix_law(&lambda_profile(&VarianceProfile::distance(n).unwrap())).unwrap();
    let h = 0.5f64.sqrt();
    let cdf = ClosedFormCdf::new(distance_limit_cdf(), vec![-h, -0.5, 0.5, h]);
    let d2 = levy_distance_cdf(&law, &cdf);
    ensure(d1 <= 0.05 && d2 <= 0.05, format!("Lévy distances {d1:.4}, {d2:.4}"))?;
    Ok(format!("atoms ±√λ to 1e-8; λ formula exact; n = 200 Lévy distances {d1:.4} and {d2:.4}"))
}

fn wigner_gaps() -> Check {
    let mut worst_ratio = 0.0f64;
    for n in [2usize, 4, 8] {
        let p = VarianceProfile::from_fn(n, |_| 1.0, |_, _| 1.5, |_, _| 0.5).unwrap();
        for z in [c(0.0, 1.0), c(0.0, 2.0)] {
            let g = wigner_gap(&p, EntryKind::Perturbed { gamma: 0.7 }, z).unwrap();
            ensure(g.holds(), format!("n={n} z={z}: {g:?}"))?;
            worst_ratio = worst_ratio.max(g.lhs / g.rhs);
        }
    }
    Ok(format!("6 rows, no violations; max lhs/rhs {worst_ratio:.2e}"))
}

fn fourth_moment() -> Check {
    let nu = AtomicMeasure::bernoulli(1.0);
    let mut last = f64::INFINITY;
    let mut report = Vec::new();
    for n in [4usize, 16, 64] {
        let g = fourth_moment_gap(&nu, n, c(0.0, 2.0)).unwrap();
        ensure((g.h4 + 0.5 / n as f64).abs() <= 1e-10, format!("h4 = {} at n = {n}", g.h4))?;
        ensure(g.lhs < last && g.lhs <= g.rhs, format!("n = {n}: {g:?}"))?;
        last = g.lhs;
        report.push(format!("{:.2e}", g.lhs));
    }
    Ok(format!("h4 = -1/(2n); lhs {} decreasing and below rhs", report.join(" > ")))
}

fn infinitesimal() -> Check {
    let mut lift = 0.0f64;
    for kind in [Independence::Free, Independence::Boolean, Independence::Monotone] {
        for d in [1usize, 2] {
            lift = lift.max(lift_equivalence_residual(kind, d, 100, 4, 11 + d as u64).unwrap());
        }
    }
    ensure(lift <= 1e-10, format!("lift residual {lift:.2e}"))?;
    let mut bound_rows = 0;
    for n in [2usize, 4, 8] {
        let (xs, ys) = random_inf_families(n, 1, 40 + n as u64).unwrap();
        for (kind, z) in [
            (Independence::Boolean, c(0.0, 2.0)),
            (Independence::Monotone, c(0.0, 2.0)),
            (Independence::Free, c(0.0, 3.0)),
        ] {
            let g = inf_bound_gap(kind, &xs, &ys, &ncprob::linalg::scalar(1, z)).unwrap();
            ensure(g.holds(), format!("{kind:?} N={n}: {g:?}"))?;
            bound_rows += 1;
        }
    }
    let mut r = rng(17);
    for trial in 0..10u64 {
        let v0 = InfVariance::random(&mut r, 2, 2).unwrap();
        let v1 = InfVariance::random(&mut r, 2, 2).unwrap();
        let b = random_upper(&mut r, 2, 0.5 + 0.1 * trial as f64);
        let g = inf_comparison_gap(&v0, &v1, &b, 60, trial).unwrap();
        ensure(g.holds(), format!("comparison pair {trial}: {g:?}"))?;
    }
    let m = InfModel::random_centered(&mut r, 2, 6, 0.8, 0.5).unwrap();
    let ratio = tilde_norm_ratio(&m.pair, 100, 3).unwrap();
    ensure(ratio <= 3.0, format!("‖Ẽ[A]‖/‖A‖ = {ratio}"))?;
    Ok(format!(
        "lift residual {lift:.1e}; {bound_rows} bound rows hold; 10 comparison pairs hold; max ‖Ẽ[A]‖/‖A‖ {ratio:.3}"
    ))
}

fn l2_identity() -> Check {
    let measures = [
        AtomicMeasure::dirac(0.0),
        AtomicMeasure::bernoulli(1.0),
        two_point(0.2).unwrap(),
        AtomicMeasure::new([(-1.0, 0.5), (0.0, 0.2), (3.0, 0.3)]).unwrap(),
        AtomicMeasure::new((0..10).map(|k| (k as f64 * 0.7 - 3.0, 0.1))).unwrap(),
    ];
    let mut worst = 0.0f64;
    for mu in &measures {
        for eps in [0.1, 1.0] {
            let v = resolvent_l2_integral(mu, eps).unwrap();
            worst = worst.max((v * eps / PI - 1.0).abs());
        }
    }
    ensure(worst <= 1e-3, format!("relative error {worst:.2e}"))?;
    Ok(format!("max relative error {worst:.1e} over 5 laws, ε ∈ {{0.1, 1}}"))
}

fn main() {
    type Entry = (&'static str, fn() -> Check, Option<Duration>);
    let checks: [Entry; 13] = [
        ("partition counts", partition_counts, Some(Duration::from_secs(1))),
        ("moment-cumulant roundtrips", cumulant_roundtrips, Some(Duration::from_secs(10))),
        ("arcsine and Bernoulli moments", arcsine_and_bernoulli_moments, None),
        ("monotone pair fourth moment", monotone_pair_sum, None),
        ("Lindeberg telescoping and vanishing terms", lindeberg_identity, None),
        ("monotone subordination", subordination, None),
        ("scalar CLT bounds", clt_sweep, None),
        ("Bernoulli and arcsine comparison", comparison, None),
        ("matrix Bernoulli spectra", matrix_bernoulli_laws, Some(Duration::from_secs(60))),
        ("Boolean Wigner gaps", wigner_gaps, None),
        ("fourth-moment gap", fourth_moment, None),
        ("infinitesimal checks", infinitesimal, None),
        ("resolvent L2 identity", l2_identity, None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if took > *b => Err(format!("took {took:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{took:.2?}]", i + 1);
            }
        }
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
