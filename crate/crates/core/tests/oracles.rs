//! Independent oracles for derived reference values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varexp::estimates::{check_hypotheses, coercivity_report, CheckConfig, CheckStatus};
use varexp::modular::{embedding_check, inclusion_check, luxemburg_norm, modular};
use varexp::pn::{pn_inclusion, PnIndex};
use varexp::problem::{Coefficients, Nonlinearity, ProblemSpec};
use varexp::transform::{derivative_terms, log_inequality_constants, phi1_inverse, reduce_problem};
use varexp::{
    beta_fields, critical_exponents, derived_fields, mu_fields, partition, Exponent, ExponentField,
    Grid, GridFunction, Region,
};

/// Root of `t + t² = 1` by plain bisection, mapped to `λ = t^{-1/2}`.
fn piecewise_norm_oracle() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + mid * mid > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (0.5 * (lo + hi)).powf(-0.5)
}

#[test]
fn piecewise_exponent_norm_matches_bisection_oracle() {
    let oracle = piecewise_norm_oracle();
    assert!((oracle - 1.27202).abs() < 1e-5);
    assert!((oracle - ((5f64.sqrt() - 1.0) / 2.0).powf(-0.5)).abs() < 1e-14);
    // An even node count puts x = 1 at a cell midpoint, so each exponent
    // region carries trapezoid weight exactly 1.
    let g = Grid::<f64>::interval(0.0, 2.0, 1000, 3).unwrap();
    let p = ExponentField::from_fn(&g, |x, _| if x < 1.0 { 2.0 } else { 4.0 });
    let n = luxemburg_norm(&GridFunction::constant(&g, 1.0), &p).unwrap();
    assert!((n - oracle).abs() < 1e-8, "{n} vs {oracle}");
}

#[test]
fn partition_matches_brute_force() {
    let g = Grid::<f64>::interval(0.0, 1.0, 101, 3).unwrap();
    let alpha = ExponentField::from_fn(&g, |x, _| 1.5 + 2.0 * x);
    let crit = critical_exponents::<f64>(2.0, 3).unwrap();
    assert!((crit.p_tilde - 6.0).abs() < 1e-14);
    let part = partition(
        &alpha,
        &ExponentField::constant(&g, 2.0),
        0.1,
        &ExponentField::constant(&g, crit.p_tilde),
    )
    .unwrap();
    for k in 0..g.len() {
        let a = 1.5 + 2.0 * (k as f64 / 100.0);
        let expect = if a < 1.9 {
            Region::Omega1
        } else if a < 6.0 {
            Region::Omega2
        } else {
            Region::Omega3
        };
        assert_eq!(part.region(k), expect, "node {k}");
    }
    assert!(part.is_empty(Region::Omega3));
}

#[test]
fn mu1_at_midpoint_matches_direct_evaluation() {
    // Nodes 0.25 + k/16 include x = 0.5.
    let g = Grid::<f64>::interval(0.25, 1.0, 13, 3).unwrap();
    let p = ExponentField::from_fn(&g, |x, _| 2.0 + x);
    let xi = p.clone();
    let xi1 = ExponentField::constant(&g, 2.0);
    let d = derived_fields(&p, 2.0, &xi, 3).unwrap();
    let part = partition(&xi, &p, 0.05, &d.p_tilde).unwrap();
    let mu = mu_fields(&part, &p, &xi, &xi1, &d, 2.0).unwrap();
    let node = 4;
    assert!((g.coords(node)[0] - 0.5).abs() < 1e-15);
    assert_eq!(part.region(node), Region::Omega2);
    let x: f64 = 0.5;
    let gamma = ((2.0 + x) - 2.0) / (2.0 - 1.0);
    let direct = ((2.0 + x) + gamma) / ((2.0 + x) - 2.0);
    assert!((direct - 6.0).abs() < 1e-14);
    assert!((mu.mu1.finite_at(node).unwrap() - direct).abs() < 1e-12);
}

/// `sup_t f(t)` over a log-spaced grid on `(0, 1e6]`.
fn dense_sup(f: impl Fn(f64) -> f64) -> f64 {
    let n = 2_000_000;
    (0..=n)
        .map(|i| 10f64.powf(-12.0 + 18.0 * i as f64 / n as f64))
        .map(f)
        .fold(0.0, f64::max)
}

#[test]
fn log_constants_match_dense_maximisation() {
    let g = Grid::<f64>::interval(0.0, 1.0, 11, 3).unwrap();
    let c = log_inequality_constants(&ExponentField::constant(&g, 2.0), 2.0, 0.5, 1.0).unwrap();
    let e = std::f64::consts::E;
    assert!((c.m1 - (4.0 / e).powi(2)).abs() < 1e-14);
    assert!((c.m1 - 2.16536).abs() < 1e-5);
    assert!((c.m2 - 0.13534).abs() < 1e-5);
    // |ln t|^β ≤ M1 t^ε for t ≥ 1 and t^ζ |ln t|^β ≤ M2 for t ≤ 1.
    let m1 = dense_sup(|t| if t >= 1.0 { t.ln().abs().powi(2) / t.powf(0.5) } else { 0.0 });
    let m2 = dense_sup(|t| if t <= 1.0 { t.powi(2) * t.ln().powi(2) } else { 0.0 });
    assert!((m1 - c.m1).abs() < 1e-8 * c.m1, "{m1} vs {}", c.m1);
    assert!((m2 - c.m2).abs() < 1e-8 * c.m2, "{m2} vs {}", c.m2);
}

#[test]
fn singular_coefficient_modular_matches_closed_form() {
    // p0 = 6, n = 10 keep every node in Ω1, where β = p0 α*/(p0 - α) is 3
    // for α = 2 and 4 for α = 4.
    let setup = |n: usize| {
        let g = Grid::<f64>::interval(0.0, 1.0, n, 10).unwrap();
        let alpha = ExponentField::from_fn(&g, |x, _| if x < 0.5 { 2.0 } else { 4.0 });
        let crit = critical_exponents::<f64>(6.0, 10).unwrap();
        let part = partition(
            &alpha,
            &ExponentField::constant(&g, 6.0),
            0.05,
            &ExponentField::constant(&g, crit.p_tilde),
        )
        .unwrap();
        assert_eq!(part.count(Region::Omega1), n);
        let beta = beta_fields(&part, &alpha, 6.0, crit.p_tilde).unwrap().beta;
        for k in 0..n {
            let expect = if g.coords(k)[0] < 0.5 { 3.0 } else { 4.0 };
            assert!((beta.finite_at(k).unwrap() - expect).abs() < 1e-13);
        }
        // The sample at the singularity is not representable; it is set to 0.
        let c0 = GridFunction::from_fn(&g, |x: f64, _| if x == 0.0 { 0.0 } else { x.powf(-0.25) });
        (g, beta, c0)
    };

    // Away from the singularity: closed form on [1/4, 1/2) and [1/2, 1].
    let closed = 4.0 * (0.5f64.powf(0.25) - 0.25f64.powf(0.25)) + 2f64.ln();
    let (g, beta, c0) = setup(4097);
    let mask: Vec<bool> = (0..g.len()).map(|k| g.coords(k)[0] >= 0.25).collect();
    let m = modular(&c0, &beta.restricted(&mask)).unwrap();
    assert!((m - closed).abs() < 2e-3 * closed, "{m} vs {closed}");

    // Whole interval: the trapezoid error of x^{-3/4} at 0 decays like h^{1/4}.
    let closed = 4.0 * 0.5f64.powf(0.25) + 2f64.ln();
    let errors: Vec<f64> = [1025, 4097, 16385]
        .into_iter()
        .map(|n| {
            let (_, beta, c0) = setup(n);
            (modular(&c0, &beta).unwrap() - closed).abs()
        })
        .collect();
    for w in errors.windows(2) {
        let rate = w[1] / w[0];
        assert!((rate - 0.25f64.powf(0.25)).abs() < 0.05, "{errors:?}");
    }
}

fn random_dirichlet(g: &Grid<f64>, rng: &mut ChaCha8Rng) -> GridFunction<f64> {
    let modes: Vec<(f64, f64)> = (1..=4).map(|k| (k as f64, rng.gen_range(-1.0..1.0))).collect();
    let amp = 10f64.powf(rng.gen_range(-1.0..1.0));
    GridFunction::from_fn_dirichlet(g, |x, _| {
        amp * modes
            .iter()
            .map(|(k, a)| a * (std::f64::consts::PI * k * x).sin())
            .sum::<f64>()
    })
}

#[test]
fn omega3_coercivity_matches_independent_quadrature() {
    let n = 129;
    let g = Grid::<f64>::interval(0.0, 1.0, n, 4).unwrap();
    let c = Nonlinearity::parse(&g, "abs(tau)^(alpha-2)*tau", vec![("alpha".into(), vec![4.0; n])]).unwrap();
    let mut k: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
    k[0] = vec![1.0; n];
    k[4] = vec![1.0; n];
    let spec = ProblemSpec::reduced(&g, 2.0, ExponentField::constant(&g, 4.0), GridFunction::zeros(&g))
        .with_nonlinearity(c, Coefficients::new(k).unwrap());
    let report = check_hypotheses(&spec, &CheckConfig::default()).unwrap();
    assert!(report.pass(), "{:?}", report.failed());
    let h = 1.0 / (n - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let u = random_dirichlet(&g, &mut rng);
        let v = u.values();
        let mut grad2 = 0.0;
        let mut quartic = 0.0;
        for i in 0..n {
            let d = if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            };
            let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
            grad2 += w * d * d;
            quartic += w * v[i].powi(4);
        }
        let r = coercivity_report(&u, &spec, [0.1; 3]).unwrap();
        let lhs = grad2 + quartic;
        assert!((r.lhs - lhs).abs() <= 1e-12 * lhs, "{} vs {lhs}", r.lhs);
        assert!((r.bound - lhs).abs() <= 1e-12 * lhs);
        assert_eq!(r.k, 0.0);
        assert!(r.holds);
    }
}

#[test]
fn coercivity_trivial_cases() {
    let g = Grid::<f64>::interval(0.0, 1.0, 65, 3).unwrap();
    let spec = ProblemSpec::reduced(&g, 3.0, ExponentField::constant(&g, 1.5), GridFunction::zeros(&g));
    let u = GridFunction::from_fn_dirichlet(&g, |x, _| x * (1.0 - x));
    let r = coercivity_report(&u, &spec, [0.1; 3]).unwrap();
    assert_eq!(r.bound, r.energy);
    assert_eq!(r.lhs, r.energy);
    let c = Nonlinearity::parse(&g, "-c0*abs(tau)^(alpha-2)*tau + 1", vec![
        ("c0".into(), vec![2.0; 65]),
        ("alpha".into(), vec![1.5; 65]),
    ])
    .unwrap();
    let mut k: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; 65]);
    k[0] = vec![2.0; 65];
    k[1] = vec![1.0; 65];
    let spec = spec.with_nonlinearity(c, Coefficients::new(k).unwrap());
    let r = coercivity_report(&GridFunction::zeros(&g), &spec, [0.1; 3]).unwrap();
    assert_eq!(r.lhs, 0.0);
    assert!(r.k > 0.0 && r.bound == -r.k);
    assert!(r.holds);
}

#[test]
fn exponent_derivative_converges_at_second_order() {
    let exact = |x: f64| (1.0 + 2.0 * x) * (x + x * x).exp();
    let mut errs = Vec::new();
    for n in [65, 129, 257, 513] {
        let g = Grid::<f64>::interval(0.0, 1.0, n, 3).unwrap();
        let rho = ExponentField::from_fn(&g, |x, _| 2.0 + x);
        let u = GridFunction::from_fn(&g, |x, _| x.exp());
        let total = derivative_terms(&u, &rho).unwrap().total().unwrap();
        let e = (0..n)
            .map(|k| (total[0][k] - exact(g.coords(k)[0])).abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() <= 0.3, "order {order} from {errs:?}");
    }
}

#[test]
fn reduced_nonlinearity_matches_brute_force_composition() {
    let n = 101;
    let g = Grid::<f64>::interval(0.0, 1.0, n, 3).unwrap();
    let p = ExponentField::from_fn(&g, |x, _| 2.0 + x / 2.0);
    let xi = ExponentField::constant(&g, 2.0);
    let a = Nonlinearity::parse(&g, "abs(tau)^(xi-2)*tau", vec![("xi".into(), vec![2.0; n])]).unwrap();
    let mut k: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
    k[0] = vec![1.0; n];
    let mut spec = ProblemSpec::main(&g, p, xi, GridFunction::zeros(&g))
        .with_nonlinearity(a.clone(), Coefficients::new(k).unwrap());
    spec.p1 = Some(2.0);
    let red = reduce_problem(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let node = rng.gen_range(0..n);
        let v: f64 = rng.gen_range(-5.0..5.0);
        let x = g.coords(node)[0];
        let gamma = x / 2.0;
        let u = v.signum() * v.abs().powf(1.0 / (gamma + 1.0));
        let b = red.spec.nonlinearity.eval(node, v);
        assert!((b - u).abs() <= 1e-13 * (1.0 + u.abs()), "node {node}, v {v}: {b} vs {u}");
        let mut single = vec![0.0; n];
        single[node] = v;
        let via = phi1_inverse(&GridFunction::new(g.clone(), single).unwrap(), &red.derived.gamma).unwrap();
        assert!((a.eval(node, via[node]) - b).abs() <= 1e-13 * (1.0 + b.abs()));
    }
}

#[test]
fn misdeclared_growth_exponent_fails_at_large_tau() {
    let n = 33;
    let g = Grid::<f64>::interval(0.0, 1.0, n, 4).unwrap();
    let c = Nonlinearity::parse(&g, "tau^3", vec![]).unwrap();
    let mut k: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
    k[0] = vec![1.0; n];
    k[4] = vec![1.0; n];
    let spec = ProblemSpec::reduced(&g, 2.0, ExponentField::constant(&g, 3.0), GridFunction::zeros(&g))
        .with_nonlinearity(c, Coefficients::new(k).unwrap());
    let r = check_hypotheses(&spec, &CheckConfig::default()).unwrap();
    let e = r.entry("growth").unwrap();
    assert_eq!(e.status, CheckStatus::Fail);
    assert!(e.witness.unwrap().tau.unwrap().abs() > 1.0);
    assert!(e.margin.unwrap() < 0.0);
}

#[test]
fn inclusion_and_embedding_brute_force() {
    let g = Grid::<f64>::interval(0.0, 1.0, 101, 4).unwrap();
    let p1 = ExponentField::from_fn(&g, |x, _| 2.0 + x);
    let r = inclusion_check(&p1, &ExponentField::constant(&g, 2.5)).unwrap();
    assert!(!r.holds);
    let brute: Vec<usize> = (0..101).filter(|&k| 2.5 > 2.0 + k as f64 / 100.0).collect();
    assert_eq!(r.witness, brute.first().copied());
    assert!(g.coords(r.witness.unwrap())[0] < 0.5);

    let e = embedding_check(1, &p1, &ExponentField::constant(&g, 4.0), 4).unwrap();
    assert!(!e.holds);
    for k in 0..101 {
        let p = 2.0 + k as f64 / 100.0;
        let ok = p < 4.0 && 4.0 < 4.0 * p / (4.0 - p);
        assert_eq!(matches!(e.margin[k], Some(m) if m > 0.0), ok, "node {k}");
        assert_eq!(ok, k != 0);
    }
    assert_eq!(e.witness, Some(0));

    let idx = |a, b| PnIndex::new(a, b).unwrap();
    assert!(pn_inclusion(idx(2.0, 2.0), idx(1.0, 1.0)));
    assert!(!pn_inclusion(idx(1.0, 1.0), idx(2.0, 2.0)));
}

#[test]
fn infinite_exponent_node_in_mu_is_undefined_off_region() {
    let g = Grid::<f64>::interval(0.25, 1.0, 13, 3).unwrap();
    let p = ExponentField::from_fn(&g, |x, _| 2.0 + x);
    let xi = p.clone();
    let d = derived_fields(&p, 2.0, &xi, 3).unwrap();
    let part = partition(&xi, &p, 0.05, &d.p_tilde).unwrap();
    let mu = mu_fields(&part, &p, &xi, &ExponentField::constant(&g, 2.0), &d, 2.0).unwrap();
    for k in 0..g.len() {
        assert_eq!(part.region(k), Region::Omega2);
        assert!(matches!(mu.mu3.get(k), Exponent::Undefined));
    }
}
