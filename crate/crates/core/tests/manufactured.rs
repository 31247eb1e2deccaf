use std::f64::consts::PI;

use varexp::discrete::manufacture_source;
use varexp::estimates::weak_residual;
use varexp::problem::{Coefficients, Nonlinearity, ProblemSpec};
use varexp::solver::{refinement_study, solve_main, solve_reduced, SolverConfig};
use varexp::transform::{phi1, reduce_problem};
use varexp::{ExponentField, Grid, GridFunction};

fn sin_case(g: &Grid<f64>) -> varexp::Result<ProblemSpec<f64>> {
    let h = GridFunction::from_fn(g, |x, _| -PI * PI * (2.0 * PI * x).cos());
    Ok(ProblemSpec::reduced(g, 3.0, ExponentField::constant(g, 1.5), h))
}

#[test]
fn degenerate_sin_case_converges_at_second_order_in_w() {
    let base = Grid::<f64>::interval(0.0, 1.0, 65, 3).unwrap();
    let cfg = SolverConfig::default();
    let table = refinement_study(&base, &[65, 129, 257, 513], sin_case, |x, _| (PI * x).sin(), &cfg).unwrap();
    for r in &table.rows {
        assert!(r.iterations <= 15);
    }
    assert!(table.all_converged());
    assert!(table.monotone);
    let q = table.final_order_w().unwrap();
    assert!((q - 2.0).abs() <= 0.3, "order {q}");
}

fn variable_exponent_case(n: usize) -> ProblemSpec<f64> {
    let g = Grid::<f64>::interval(0.0, 1.0, n, 3).unwrap();
    let p = ExponentField::from_fn(&g, |x, _| 2.0 + x / 2.0);
    let xi = ExponentField::constant(&g, 2.0);
    let a = Nonlinearity::parse(&g, "abs(tau)^(xi-2)*tau", vec![("xi".into(), vec![2.0; n])]).unwrap();
    let mut c = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    c[0] = vec![1.0; n];
    let mut spec = ProblemSpec::main(&g, p, xi, GridFunction::zeros(&g))
        .with_nonlinearity(a, Coefficients::new(c).unwrap());
    spec.p1 = Some(2.0);
    let u_star = GridFunction::from_fn(&g, |x, _| x * (1.0 - x));
    spec.source = manufacture_source(&spec, &u_star).unwrap();
    spec
}

#[test]
fn variable_exponent_case_recovers_manufactured_solution() {
    let spec = variable_exponent_case(129);
    let cfg = SolverConfig { force: true, ..SolverConfig::default() };
    let r = solve_main(&spec, &cfg).unwrap();
    let u_star = GridFunction::from_fn(&spec.grid, |x, _| x * (1.0 - x));
    let err = r.u.sub(&u_star).unwrap().max_abs();
    // p = ξ = 2 at x = 0 leaves no room for 2 <= ξ1 < p there.
    assert_eq!(r.hypotheses.failed()[0], "xi1_range");
    assert!(r.converged());
    assert!(err <= 1e-8);
    let red = reduce_problem(&spec).unwrap();
    let direct = solve_reduced(&red.spec, &cfg).unwrap();
    let v = phi1(&r.u, &red.derived.gamma).unwrap();
    let d = v.sub(&direct.u).unwrap().max_abs();
    assert!(d <= 1e-9);
    let wr = weak_residual(&r.u, &spec, None).unwrap();
    assert!(wr.max <= 1e-8 * r.data_scale);
}

#[test]
fn solved_instance_satisfies_log_bound() {
    let spec = variable_exponent_case(65);
    let cfg = SolverConfig { force: true, ..SolverConfig::default() };
    let r = solve_main(&spec, &cfg).unwrap();
    assert!(r.membership.finite());
    let lb = r.membership.log_bound.unwrap();
    assert!(lb.holds, "{} > {}", lb.lhs, lb.rhs);
    assert!(r.membership.get("log_term").unwrap().is_finite());
}

#[test]
fn solve_refuses_failed_hypotheses_without_force() {
    let spec = variable_exponent_case(33);
    let e = solve_main(&spec, &SolverConfig::default()).unwrap_err();
    assert!(matches!(e, varexp::Error::Hypotheses(ref ids) if ids.contains(&"xi1_range".to_string())));
}

#[test]
fn poisson_refinement_is_second_order() {
    let base = Grid::<f64>::interval(0.0, 1.0, 17, 3).unwrap();
    let exact = |x: f64, _| (PI * x).sin() * x.exp();
    let build = |g: &Grid<f64>| {
        // -u'' for u = e^x sin(πx).
        let h = GridFunction::from_fn(g, |x: f64, _| {
            let (s, c) = ((PI * x).sin(), (PI * x).cos());
            -x.exp() * ((1.0 - PI * PI) * s + 2.0 * PI * c)
        });
        Ok(ProblemSpec::reduced(g, 2.0, ExponentField::constant(g, 1.5), h))
    };
    let t = refinement_study(&base, &[17, 33, 65, 129], build, exact, &SolverConfig::default()).unwrap();
    assert!(t.monotone && t.all_converged());
    for q in &t.order_w {
        assert!((q.unwrap() - 2.0).abs() <= 0.2, "{:?}", t.order_w);
    }
}

#[test]
fn zero_manufactured_solution_has_zero_errors() {
    let base = Grid::<f64>::interval(0.0, 1.0, 17, 3).unwrap();
    let build = |g: &Grid<f64>| Ok(ProblemSpec::reduced(g, 3.0, ExponentField::constant(g, 1.5), GridFunction::zeros(g)));
    let t = refinement_study(&base, &[17, 33], build, |_, _| 0.0, &SolverConfig::default()).unwrap();
    assert!(t.rows.iter().all(|r| r.error_u == 0.0 && r.error_w == 0.0));
    assert_eq!(t.order_w, vec![None]);
}

#[test]
fn constant_exponent_main_matches_reduced() {
    let g = Grid::<f64>::interval(0.0, 1.0, 65, 3).unwrap();
    let h = GridFunction::from_fn(&g, |x: f64, _| 1.0 + x);
    let main = ProblemSpec::main(&g, ExponentField::constant(&g, 3.0), ExponentField::constant(&g, 1.5), h.clone());
    let reduced = ProblemSpec {
        leading_factor: 2.0,
        ..ProblemSpec::reduced(&g, 3.0, ExponentField::constant(&g, 1.5), h)
    };
    let cfg = SolverConfig::default();
    let a = solve_main(&main, &cfg).unwrap();
    let b = solve_reduced(&reduced, &cfg).unwrap();
    assert_eq!(a.u.values(), b.u.values());
}
