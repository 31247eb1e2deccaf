use varexp::modular::luxemburg_norm;
use varexp::{solve_reduced, ExponentFieldF32, GridF32, GridFunctionF32, ProblemSpecF32, SolverConfigF32};

#[test]
fn norms_and_solver_run_in_f32() {
    let g = GridF32::interval(0.0, 1.0, 33, 3).unwrap();
    let p = ExponentFieldF32::constant(&g, 2.0);
    let n = luxemburg_norm(&GridFunctionF32::constant(&g, 3.0), &p).unwrap();
    assert!((n - 3.0).abs() < 1e-5);

    let h = GridFunctionF32::constant(&g, 2.0);
    let spec = ProblemSpecF32::reduced(&g, 2.0, ExponentFieldF32::constant(&g, 1.5), h);
    let cfg = SolverConfigF32::default();
    assert!(cfg.tol >= 64.0 * f32::EPSILON);
    let r = solve_reduced(&spec, &cfg).unwrap();
    assert!(r.converged());
    // -u'' = 2 gives u = x(1 - x), which the stencil reproduces exactly.
    for k in 0..g.len() {
        let x = g.coords(k)[0];
        assert!((r.u[k] - x * (1.0 - x)).abs() < 1e-5);
    }
}
