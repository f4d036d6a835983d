use std::f64::consts::{E, FRAC_PI_2};

use lobatto_bvp::{
    estimate_residual, solve_bvp, BvpError, BvpProblem, FnProblem, SolverOptions, Status,
};

fn uniform(a: f64, b: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|i| a + (b - a) * i as f64 / intervals as f64)
        .collect()
}

fn sin_problem() -> impl BvpProblem {
    FnProblem::new(
        2,
        |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        },
        |ya: &[f64], yb: &[f64], r: &mut [f64]| {
            r[0] = ya[0];
            r[1] = yb[0] - 1.0;
        },
    )
}

fn bratu(lambda: f64) -> impl BvpProblem {
    FnProblem::new(
        2,
        move |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -lambda * y[0].exp();
        },
        |ya: &[f64], yb: &[f64], r: &mut [f64]| {
            r[0] = ya[0];
            r[1] = yb[0];
        },
    )
}

/// Fixed-step RK4 shooting for Bratu: returns y(t) sampled at `ts` for slope `s`.
fn shoot_bratu(lambda: f64, s: f64, steps: usize, ts: &[f64]) -> (f64, Vec<f64>) {
    let f = |y: [f64; 2]| [y[1], -lambda * y[0].exp()];
    let h = 1.0 / steps as f64;
    let mut y = [0.0, s];
    let mut out = Vec::new();
    let mut k = 0;
    for i in 0..=steps {
        let t = i as f64 * h;
        while k < ts.len() && (ts[k] - t).abs() < 1e-12 {
            out.push(y[0]);
            k += 1;
        }
        if i == steps {
            break;
        }
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    (y[0], out)
}

/// Lower-branch Bratu solution at `ts` by bisection on the initial slope.
fn bratu_oracle(ts: &[f64]) -> Vec<f64> {
    let (mut lo, mut hi) = (0.0, 2.0);
    assert!(shoot_bratu(1.0, lo, 4000, &[]).0 < 0.0);
    assert!(shoot_bratu(1.0, hi, 4000, &[]).0 > 0.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if shoot_bratu(1.0, mid, 4000, &[]).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    shoot_bratu(1.0, 0.5 * (lo + hi), 4000, ts).1
}

/// Options that keep the mesh fixed: the node cap equals the initial size.
fn fixed_mesh(nodes: usize) -> SolverOptions {
    SolverOptions {
        tol: 1e-12,
        max_nodes: Some(nodes),
        ..SolverOptions::default()
    }
}

#[test]
fn exponential_growth_as_bvp() {
    let problem = FnProblem::new(
        1,
        |_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0],
        |ya: &[f64], _yb: &[f64], r: &mut [f64]| r[0] = ya[0] - 1.0,
    );
    let mesh = uniform(0.0, 1.0, 5);
    let sol = solve_bvp(
        &problem,
        &mesh,
        &vec![0.0; mesh.len()],
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!(sol.status, Status::Converged);
    assert!((sol.evaluate(1.0).unwrap()[0] - E).abs() <= 1e-6);
}

#[test]
fn harmonic_oscillator_matches_sine() {
    let problem = sin_problem();
    let mesh = uniform(0.0, FRAC_PI_2, 8);
    let guess = vec![0.0; mesh.len() * 2];
    let sol = solve_bvp(&problem, &mesh, &guess, &SolverOptions::default()).unwrap();
    assert!(sol.converged());
    let max_err = (0..=200)
        .map(|k| {
            let t = FRAC_PI_2 * k as f64 / 200.0;
            (sol.evaluate(t).unwrap()[0] - t.sin()).abs()
        })
        .fold(0.0, f64::max);
    assert!(max_err <= 1e-6, "max error {max_err}");
}

#[test]
fn bratu_midpoint_matches_shooting_oracle() {
    let reference = bratu_oracle(&[0.5])[0];
    // Frozen from the oracle above; agrees with the closed form
    // 2 ln cosh(θ/4), θ = √2 cosh(θ/4), of the lower branch.
    assert!((reference - 0.140_539_214_400).abs() < 1e-10, "{reference}");
    let problem = bratu(1.0);
    let mesh = uniform(0.0, 1.0, 10);
    let guess = vec![0.0; mesh.len() * 2];
    let sol = solve_bvp(&problem, &mesh, &guess, &SolverOptions::default()).unwrap();
    assert!(sol.converged());
    assert!((sol.evaluate(0.5).unwrap()[0] - reference).abs() <= 1e-6);
}

#[test]
fn evaluate_reproduces_nodes_and_rejects_outside_points() {
    let problem = sin_problem();
    let mesh = uniform(0.0, FRAC_PI_2, 8);
    let sol = solve_bvp(&problem, &mesh, &vec![0.0; 18], &SolverOptions::default()).unwrap();
    for (i, &t) in sol.mesh().iter().enumerate() {
        assert_eq!(sol.evaluate(t).unwrap(), sol.state(i).to_vec());
    }
    let ts: Vec<f64> = (0..50).map(|k| 0.03 * k as f64).collect();
    let many = sol.evaluate_many(&ts).unwrap();
    for (t, v) in ts.iter().zip(&many) {
        assert_eq!(&sol.evaluate(*t).unwrap(), v);
    }
    assert!(matches!(
        sol.evaluate(2.0),
        Err(BvpError::OutOfRange { .. })
    ));
    assert!(matches!(
        sol.evaluate(-1e-9),
        Err(BvpError::OutOfRange { .. })
    ));
}

#[test]
fn interpolant_midpoint_error_is_fourth_order() {
    let problem = sin_problem();
    let mid_err = |intervals: usize| {
        let mesh = uniform(0.0, FRAC_PI_2, intervals);
        let sol = solve_bvp(
            &problem,
            &mesh,
            &vec![0.0; mesh.len() * 2],
            &fixed_mesh(mesh.len()),
        )
        .unwrap();
        mesh.windows(2)
            .map(|w| {
                let t = 0.5 * (w[0] + w[1]);
                (sol.evaluate(t).unwrap()[0] - t.sin()).abs()
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (mid_err(8), mid_err(16));
    let rate = (e1 / e2).log2();
    assert!((3.5..=4.5).contains(&rate), "rate {rate}");
    // Hermite bound h^4/384 max|y''''| plus the nodal error.
    let h = FRAC_PI_2 / 8.0;
    assert!(e1 <= h.powi(4) / 384.0 * 2.0, "{e1}");
}

#[test]
fn cubic_solution_has_zero_defect() {
    // y = t^3 - t, y' = 3 t^2 - 1 is reproduced exactly by the cubic interpolant.
    let problem = FnProblem::new(
        1,
        |t, _y: &[f64], dy: &mut [f64]| dy[0] = 3.0 * t * t - 1.0,
        |ya: &[f64], _yb: &[f64], r: &mut [f64]| r[0] = ya[0],
    );
    let mesh = uniform(0.0, 2.0, 6);
    let sol = solve_bvp(&problem, &mesh, &vec![0.0; 7], &SolverOptions::default()).unwrap();
    let res = estimate_residual(&sol, &problem);
    assert!(res.iter().all(|&r| r <= 1e-12), "{res:?}");
    assert!((sol.evaluate(1.5).unwrap()[0] - (1.5f64.powi(3) - 1.5)).abs() < 1e-12);
}

#[test]
fn residual_drops_under_mesh_halving() {
    // The defect of a C¹ cubic collocation solution is third order in h, so
    // halving every interval reduces it by about 2^3.
    let problem = bratu(1.0);
    let max_res = |intervals: usize| {
        let mesh = uniform(0.0, 1.0, intervals);
        let sol = solve_bvp(
            &problem,
            &mesh,
            &vec![0.0; mesh.len() * 2],
            &fixed_mesh(mesh.len()),
        )
        .unwrap();
        estimate_residual(&sol, &problem)
            .into_iter()
            .fold(0.0, f64::max)
    };
    let ratio = max_res(8) / max_res(16);
    assert!((6.0..=10.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn corrupted_node_gives_localized_residual_spike() {
    let problem = sin_problem();
    let mesh = uniform(0.0, FRAC_PI_2, 16);
    let mut sol = solve_bvp(&problem, &mesh, &vec![0.0; 34], &SolverOptions::default()).unwrap();
    let clean = estimate_residual(&sol, &problem);
    let mut y = sol.states().to_vec();
    let k = 8;
    y[k * 2] += 1e-3;
    let mesh = sol.mesh().to_vec();
    // Rebuild a solution object with the corrupted node through a zero-iteration solve.
    sol = solve_bvp(
        &problem,
        &mesh,
        &y,
        &SolverOptions {
            max_nodes: Some(mesh.len()),
            newton: lobatto_bvp::NewtonOptions {
                max_iterations: 0,
                ..Default::default()
            },
            ..Default::default()
        },
    )
    .unwrap();
    let dirty = estimate_residual(&sol, &problem);
    let spike = dirty[k - 1].min(dirty[k]);
    let elsewhere = dirty
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k - 1 && *i != k)
        .map(|(_, r)| *r)
        .fold(0.0, f64::max);
    assert!(spike > 100.0 * clean.iter().cloned().fold(0.0, f64::max));
    assert!(elsewhere <= 2.0 * clean.iter().cloned().fold(0.0, f64::max) + 1e-14);
}

#[test]
fn converged_status_implies_residuals_within_tol() {
    let problem = bratu(1.0);
    for tol in [1e-3, 1e-6, 1e-8] {
        let mesh = uniform(0.0, 1.0, 3);
        let opts = SolverOptions {
            tol,
            max_nodes: Some(5000),
            ..Default::default()
        };
        let sol = solve_bvp(&problem, &mesh, &vec![0.0; 8], &opts).unwrap();
        assert!(sol.converged());
        assert!(sol.max_residual() <= tol);
        assert!(sol.bc_residual <= tol);
    }
}

#[test]
fn warm_start_reconverges_immediately() {
    let problem = bratu(1.0);
    let mesh = uniform(0.0, 1.0, 5);
    let opts = SolverOptions::default();
    let sol = solve_bvp(&problem, &mesh, &vec![0.0; 12], &opts).unwrap();
    assert!(sol.converged());
    let again = solve_bvp(&problem, sol.mesh(), sol.states(), &opts).unwrap();
    assert!(again.converged());
    assert!(again.newton_iterations <= 2);
    assert_eq!(again.nodes(), sol.nodes());
}

#[test]
fn linear_problem_takes_one_newton_iteration() {
    let problem = sin_problem();
    let mesh = uniform(0.0, FRAC_PI_2, 40);
    let sol = solve_bvp(&problem, &mesh, &vec![0.3; 82], &SolverOptions::default()).unwrap();
    assert!(sol.converged());
    assert_eq!(sol.newton_iterations, 1);
    assert_eq!(sol.history.len(), 1);
    assert_eq!(sol.history[0].damping, 1.0);
}

#[test]
fn node_cap_is_reported() {
    let problem = bratu(1.0);
    let mesh = uniform(0.0, 1.0, 3);
    let opts = SolverOptions {
        tol: 1e-10,
        max_nodes: Some(6),
        ..Default::default()
    };
    let sol = solve_bvp(&problem, &mesh, &vec![0.0; 8], &opts).unwrap();
    assert_eq!(sol.status, Status::MaxNodesExceeded);
}

#[test]
fn input_validation() {
    let problem = sin_problem();
    let opts = SolverOptions::default();
    assert!(matches!(
        solve_bvp(&problem, &[0.0], &[0.0, 0.0], &opts),
        Err(BvpError::InvalidMesh(_))
    ));
    assert!(matches!(
        solve_bvp(&problem, &[0.0, 1.0, 1.0], &[0.0; 6], &opts),
        Err(BvpError::InvalidMesh(_))
    ));
    assert!(matches!(
        solve_bvp(&problem, &[0.0, 1.0], &[0.0; 3], &opts),
        Err(BvpError::GuessShape { .. })
    ));
    assert!(matches!(
        solve_bvp(&problem, &[0.0, 1.0], &[f64::NAN, 0.0, 0.0, 0.0], &opts),
        Err(BvpError::NonFinite { .. })
    ));
    let bad_newton = SolverOptions {
        newton: lobatto_bvp::NewtonOptions {
            tol: Some(0.0),
            ..Default::default()
        },
        ..Default::default()
    };
    assert!(matches!(
        solve_bvp(&problem, &[0.0, 1.0], &[0.0; 4], &bad_newton),
        Err(BvpError::InvalidProblem(_))
    ));
}

#[test]
fn tighter_newton_threshold_converges_further_on_the_same_mesh() {
    let problem = bratu(1.0);
    let mesh = uniform(0.0, 1.0, 40);
    let guess = vec![0.0; mesh.len() * 2];
    let loose = SolverOptions {
        tol: 1e-3,
        ..SolverOptions::default()
    };
    let mut tight = loose;
    tight.newton.tol = Some(1e-12);
    let a = solve_bvp(&problem, &mesh, &guess, &loose).unwrap();
    let b = solve_bvp(&problem, &mesh, &guess, &tight).unwrap();
    assert!(a.converged() && b.converged());
    assert_eq!(a.nodes(), b.nodes());
    assert!(b.newton_iterations > a.newton_iterations);
    // A further solve from the tight answer barely moves it.
    let c = solve_bvp(&problem, &mesh, b.states(), &tight).unwrap();
    let moved = c
        .states()
        .iter()
        .zip(b.states())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(moved <= 1e-12, "{moved}");
}

#[test]
fn periodic_boundary_conditions() {
    // y'' + y = cos(2t) with periodic conditions on [0, 2π]: y = -cos(2t)/3.
    let tau = 2.0 * std::f64::consts::PI;
    let problem = FnProblem::new(
        2,
        |t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0] + (2.0 * t).cos();
        },
        |ya: &[f64], yb: &[f64], r: &mut [f64]| {
            r[0] = ya[0] - yb[0];
            r[1] = ya[1] - yb[1];
        },
    );
    let mesh = uniform(0.0, tau, 40);
    let sol = solve_bvp(&problem, &mesh, &vec![0.0; 82], &SolverOptions::default()).unwrap();
    assert!(sol.converged());
    for k in 0..=20 {
        let t = tau * k as f64 / 20.0;
        assert!((sol.evaluate(t).unwrap()[0] + (2.0 * t).cos() / 3.0).abs() < 1e-6);
    }
}
