use lobatto_bvp::{solve_bvp, FnProblem, SolverOptions};
use proptest::prelude::*;

/// y'' = c y with y(0) = a, y(1) = b.
fn closed_form(c: f64, a: f64, b: f64, t: f64) -> f64 {
    let k = c.sqrt();
    (a * (k * (1.0 - t)).sinh() + b * (k * t).sinh()) / k.sinh()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn converged_solutions_respect_tol_and_mesh(
        c in 0.1f64..9.0,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        intervals in 2usize..12,
        tol in prop::sample::select(vec![1e-4, 1e-6, 1e-8]),
    ) {
        let problem = FnProblem::new(
            2,
            move |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = c * y[0];
            },
            move |ya: &[f64], yb: &[f64], r: &mut [f64]| {
                r[0] = ya[0] - a;
                r[1] = yb[0] - b;
            },
        );
        let mesh: Vec<f64> = (0..=intervals).map(|i| i as f64 / intervals as f64).collect();
        let opts = SolverOptions { tol, max_nodes: Some(5000), ..Default::default() };
        let sol = solve_bvp(&problem, &mesh, &vec![0.0; 2 * mesh.len()], &opts).unwrap();
        prop_assert!(sol.converged());
        prop_assert!(sol.max_residual() <= tol);
        prop_assert!(sol.bc_residual <= tol);

        let nodes = sol.mesh();
        prop_assert_eq!(nodes[0], 0.0);
        prop_assert_eq!(*nodes.last().unwrap(), 1.0);
        prop_assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        for t in &mesh {
            prop_assert!(nodes.contains(t));
        }

        let scale = 1.0 + a.abs().max(b.abs());
        for k in 0..=50 {
            let t = k as f64 / 50.0;
            let err = (sol.evaluate(t).unwrap()[0] - closed_form(c, a, b, t)).abs();
            prop_assert!(err <= 10.0 * tol * scale, "t = {t}: error {err:e}");
        }
    }
}
