use log::{debug, info};

use crate::abd::{self, IntervalBlocks};
use crate::problem::{fd_bc_jacobian, fd_rhs_jacobian, BvpProblem};
use crate::solution::{BvpSolution, IterationRecord, Status};
use crate::BvpError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Step-length reduction factor while backtracking.
    pub backtrack: f64,
    /// Smallest damping factor tried before giving up.
    pub min_step: f64,
    /// Stopping threshold on the scaled midpoint defect and the boundary
    /// residuals. `None` means `0.05 * tol`.
    pub tol: Option<f64>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 12,
            backtrack: 0.5,
            min_step: 1e-10,
            tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target for the normalized rms collocation residual on every interval.
    pub tol: f64,
    /// Node cap; `None` means 20 times the initial node count.
    pub max_nodes: Option<usize>,
    pub newton: NewtonOptions,
    pub verbose: bool,
}

impl SolverOptions {
    fn newton_target(&self) -> f64 {
        self.newton.tol.unwrap_or(0.05 * self.tol)
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_nodes: None,
            newton: NewtonOptions::default(),
            verbose: false,
        }
    }
}

// 5-point Lobatto rule on [-1, 1]; the endpoints are collocation points with zero defect.
const LOBATTO_INNER: f64 = 0.654_653_670_707_977_1; // sqrt(3/7)
const W_CENTER: f64 = 32.0 / 45.0;
const W_INNER: f64 = 49.0 / 90.0;

/// Nodal slopes, midpoint data and residuals for one iterate.
struct Collocation {
    f: Vec<f64>,
    ymid: Vec<f64>,
    fmid: Vec<f64>,
    col: Vec<f64>,
    bc: Vec<f64>,
}

impl Collocation {
    fn evaluate<P: BvpProblem + ?Sized>(problem: &P, mesh: &[f64], y: &[f64]) -> Self {
        let n = problem.dim();
        let nodes = mesh.len();
        let mut f = vec![0.0; nodes * n];
        for i in 0..nodes {
            problem.rhs(mesh[i], &y[i * n..(i + 1) * n], &mut f[i * n..(i + 1) * n]);
        }
        let intervals = nodes - 1;
        let mut ymid = vec![0.0; intervals * n];
        let mut fmid = vec![0.0; intervals * n];
        let mut col = vec![0.0; intervals * n];
        for i in 0..intervals {
            let h = mesh[i + 1] - mesh[i];
            let (y0, y1) = (&y[i * n..(i + 1) * n], &y[(i + 1) * n..(i + 2) * n]);
            let (f0, f1) = (&f[i * n..(i + 1) * n], &f[(i + 1) * n..(i + 2) * n]);
            let ym = &mut ymid[i * n..(i + 1) * n];
            for k in 0..n {
                ym[k] = 0.5 * (y0[k] + y1[k]) - 0.125 * h * (f1[k] - f0[k]);
            }
            problem.rhs(mesh[i] + 0.5 * h, ym, &mut fmid[i * n..(i + 1) * n]);
            let fm = &fmid[i * n..(i + 1) * n];
            for k in 0..n {
                col[i * n + k] = y1[k] - y0[k] - h / 6.0 * (f0[k] + f1[k] + 4.0 * fm[k]);
            }
        }
        let mut bc = vec![0.0; n];
        problem.bc(&y[..n], &y[(nodes - 1) * n..], &mut bc);
        Self {
            f,
            ymid,
            fmid,
            col,
            bc,
        }
    }

    /// Residual 2-norm with collocation rows scaled to ODE-defect units.
    fn merit(&self, mesh: &[f64], n: usize) -> f64 {
        let mut s: f64 = self.bc.iter().map(|v| v * v).sum();
        for (i, chunk) in self.col.chunks(n).enumerate() {
            let h = mesh[i + 1] - mesh[i];
            s += chunk.iter().map(|v| (v / h) * (v / h)).sum::<f64>();
        }
        s.sqrt()
    }

    fn finite(&self) -> bool {
        self.col
            .iter()
            .chain(&self.bc)
            .chain(&self.f)
            .all(|v| v.is_finite())
    }

    /// Newton stopping test: midpoint defect and boundary residuals below `target`.
    fn within(&self, mesh: &[f64], n: usize, target: f64) -> bool {
        if self.bc.iter().any(|v| v.abs() > target) {
            return false;
        }
        for (i, chunk) in self.col.chunks(n).enumerate() {
            let h = mesh[i + 1] - mesh[i];
            let ym = &self.ymid[i * n..(i + 1) * n];
            for k in 0..n {
                if 1.5 * chunk[k].abs() / h > target * (1.0 + ym[k].abs()) {
                    return false;
                }
            }
        }
        true
    }
}

enum NewtonOutcome {
    Converged,
    Stalled,
    Failed,
}

fn node_jacobian<P: BvpProblem + ?Sized>(
    problem: &P,
    t: f64,
    y: &[f64],
    f: &[f64],
    jac: &mut [f64],
) {
    if !problem.rhs_jacobian(t, y, jac) {
        fd_rhs_jacobian(problem, t, y, f, jac);
    }
}

/// Solve the linearized collocation system `J Δ = -F` at the current iterate.
fn newton_direction<P: BvpProblem + ?Sized>(
    problem: &P,
    mesh: &[f64],
    y: &[f64],
    col: &Collocation,
) -> Result<Vec<f64>, abd::AbdError> {
    let n = problem.dim();
    let nodes = mesh.len();
    let mut ja = vec![0.0; n * n];
    let mut jb = vec![0.0; n * n];
    let (ya, yb) = (&y[..n], &y[(nodes - 1) * n..]);
    if !problem.bc_jacobian(ya, yb, &mut ja, &mut jb) {
        fd_bc_jacobian(problem, ya, yb, &col.bc, &mut ja, &mut jb);
    }
    let rbc: Vec<f64> = col.bc.iter().map(|v| -v).collect();

    let mut j_left = vec![0.0; n * n];
    let mut j_right = vec![0.0; n * n];
    let mut j_mid = vec![0.0; n * n];
    // [J_m J_i | J_m J_{i+1}] as one n × 2n product.
    let mut pair = vec![0.0; n * 2 * n];
    let mut prod = vec![0.0; n * 2 * n];
    node_jacobian(problem, mesh[0], ya, &col.f[..n], &mut j_left);

    abd::solve(
        n,
        nodes - 1,
        &ja,
        &jb,
        &rbc,
        |i, blk: IntervalBlocks<'_>| {
            let h = mesh[i + 1] - mesh[i];
            let y1 = &y[(i + 1) * n..(i + 2) * n];
            node_jacobian(
                problem,
                mesh[i + 1],
                y1,
                &col.f[(i + 1) * n..(i + 2) * n],
                &mut j_right,
            );
            let ym = &col.ymid[i * n..(i + 1) * n];
            node_jacobian(
                problem,
                mesh[i] + 0.5 * h,
                ym,
                &col.fmid[i * n..(i + 1) * n],
                &mut j_mid,
            );
            for r in 0..n {
                pair[r * 2 * n..r * 2 * n + n].copy_from_slice(&j_left[r * n..(r + 1) * n]);
                pair[r * 2 * n + n..(r + 1) * 2 * n].copy_from_slice(&j_right[r * n..(r + 1) * n]);
            }
            // SAFETY: distinct, correctly sized row-major buffers.
            unsafe {
                matrixmultiply::dgemm(
                    n,
                    n,
                    2 * n,
                    1.0,
                    j_mid.as_ptr(),
                    n as isize,
                    1,
                    pair.as_ptr(),
                    2 * n as isize,
                    1,
                    0.0,
                    prod.as_mut_ptr(),
                    2 * n as isize,
                    1,
                );
            }
            let (c1, c2, c3) = (h / 6.0, h / 3.0, h * h / 12.0);
            for r in 0..n {
                for c in 0..n {
                    let jm = j_mid[r * n + c];
                    let eye = if r == c { 1.0 } else { 0.0 };
                    blk.left[r * n + c] =
                        -eye - c1 * j_left[r * n + c] - c2 * jm - c3 * prod[r * 2 * n + c];
                    blk.right[r * n + c] =
                        eye - c1 * j_right[r * n + c] - c2 * jm + c3 * prod[r * 2 * n + n + c];
                }
                blk.rhs[r] = -col.col[i * n + r];
            }
            std::mem::swap(&mut j_left, &mut j_right);
        },
    )
}

fn newton_solve<P: BvpProblem + ?Sized>(
    problem: &P,
    mesh: &[f64],
    y: &mut Vec<f64>,
    options: &SolverOptions,
    history: &mut Vec<IterationRecord>,
    iterations: &mut usize,
) -> NewtonOutcome {
    let n = problem.dim();
    let col = Collocation::evaluate(problem, mesh, y);
    if !col.finite() {
        return NewtonOutcome::Failed;
    }
    if col.within(mesh, n, options.newton_target()) {
        return NewtonOutcome::Converged;
    }
    let mut log = |alpha: f64, merit: f64| {
        *iterations += 1;
        let record = IterationRecord {
            iteration: *iterations,
            residual_norm: merit,
            damping: alpha,
            nodes: mesh.len(),
        };
        if options.verbose {
            info!(
                "iter {} residual {:.3e} damping {} nodes {}",
                record.iteration, record.residual_norm, record.damping, record.nodes
            );
        }
        history.push(record);
    };
    residual_damped(problem, mesh, y, col, options, &mut log)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn residual_damped<P: BvpProblem + ?Sized>(
    problem: &P,
    mesh: &[f64],
    y: &mut Vec<f64>,
    mut col: Collocation,
    options: &SolverOptions,
    log: &mut dyn FnMut(f64, f64),
) -> NewtonOutcome {
    let n = problem.dim();
    let mut merit = col.merit(mesh, n);
    let floor = 1e-13 * (y.len() as f64).sqrt();
    for _ in 0..options.newton.max_iterations {
        let step = match newton_direction(problem, mesh, y, &col) {
            Ok(s) => s,
            Err(e) => {
                debug!("newton: {e}");
                return NewtonOutcome::Failed;
            }
        };
        let mut alpha = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, d)| a + alpha * d).collect();
            let tcol = Collocation::evaluate(problem, mesh, &trial);
            let tmerit = tcol.merit(mesh, n);
            if tcol.finite() && (tmerit <= (1.0 - 1e-4 * alpha) * merit || tmerit <= floor) {
                break Some((trial, tcol, tmerit));
            }
            alpha *= options.newton.backtrack;
            if alpha < options.newton.min_step {
                break None;
            }
        };
        let Some((trial, tcol, tmerit)) = accepted else {
            debug!(
                "newton: no descent down to damping {}",
                options.newton.min_step
            );
            return NewtonOutcome::Failed;
        };
        log(alpha, tmerit);
        let (ymax, dmax) = (max_abs(&trial), max_abs(&step));
        *y = trial;
        col = tcol;
        merit = tmerit;
        if col.within(mesh, n, options.newton_target())
            || (alpha == 1.0 && dmax <= 1e-13 * (1.0 + ymax))
        {
            return NewtonOutcome::Converged;
        }
    }
    NewtonOutcome::Stalled
}

/// Per-interval normalized rms residual of the interpolant's ODE defect.
///
/// The defect `S'(t) − f(t, S(t))` is divided componentwise by `1 + |S(t)|` and
/// integrated with the 5-point Lobatto rule; the rule's endpoints are nodes,
/// where the defect vanishes by construction.
pub fn estimate_residual<P: BvpProblem + ?Sized>(solution: &BvpSolution, problem: &P) -> Vec<f64> {
    let n = solution.dim();
    let mesh = solution.mesh();
    let mut s = vec![0.0; n];
    let mut f = vec![0.0; n];
    (0..mesh.len() - 1)
        .map(|i| {
            let h = mesh[i + 1] - mesh[i];
            let mid = mesh[i] + 0.5 * h;
            let mut acc = 0.0;
            for (offset, w) in [
                (-LOBATTO_INNER, W_INNER),
                (0.0, W_CENTER),
                (LOBATTO_INNER, W_INNER),
            ] {
                let t = mid + 0.5 * h * offset;
                solution
                    .evaluate_into(t, &mut s)
                    .expect("point inside interval");
                let ds = solution.derivative(t).expect("point inside interval");
                problem.rhs(t, &s, &mut f);
                let r2: f64 = (0..n)
                    .map(|k| {
                        let r = (ds[k] - f[k]) / (1.0 + s[k].abs());
                        r * r
                    })
                    .sum();
                acc += w * r2;
            }
            (0.5 * acc).sqrt()
        })
        .collect()
}

/// New mesh: intervals above `tol` are split in two (three when above `100·tol`);
/// neighbours of intervals above `10·tol` are split in two.
fn refine(mesh: &[f64], residuals: &[f64], tol: f64) -> Vec<f64> {
    let m = residuals.len();
    let mut pieces = vec![1usize; m];
    for i in 0..m {
        let r = residuals[i];
        if r > tol {
            pieces[i] = pieces[i].max(if r > 100.0 * tol { 3 } else { 2 });
        }
        if r > 10.0 * tol {
            if i > 0 {
                pieces[i - 1] = pieces[i - 1].max(2);
            }
            if i + 1 < m {
                pieces[i + 1] = pieces[i + 1].max(2);
            }
        }
    }
    let mut out = Vec::with_capacity(mesh.len() + m);
    for i in 0..m {
        let h = mesh[i + 1] - mesh[i];
        out.push(mesh[i]);
        for k in 1..pieces[i] {
            out.push(mesh[i] + h * k as f64 / pieces[i] as f64);
        }
    }
    out.push(mesh[m]);
    out
}

fn build_solution<P: BvpProblem + ?Sized>(problem: &P, mesh: Vec<f64>, y: Vec<f64>) -> BvpSolution {
    let n = problem.dim();
    let mut yp = vec![0.0; y.len()];
    for i in 0..mesh.len() {
        problem.rhs(mesh[i], &y[i * n..(i + 1) * n], &mut yp[i * n..(i + 1) * n]);
    }
    let mut bc = vec![0.0; n];
    problem.bc(&y[..n], &y[y.len() - n..], &mut bc);
    BvpSolution {
        n,
        mesh,
        y,
        yp,
        rms_residuals: Vec::new(),
        bc_residual: bc.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        newton_iterations: 0,
        status: Status::NewtonFailed,
        history: Vec::new(),
    }
}

/// Solve a two-point BVP by 3-stage Lobatto IIIA collocation (C¹ cubic per
/// interval, order 4) with damped Newton and residual-driven mesh refinement.
///
/// `guess` is row-major `mesh.len() × n`. Input errors are returned as `Err`;
/// solver failures are reported in [`BvpSolution::status`] together with the
/// best iterate, which can be reused as a warm start.
pub fn solve_bvp<P: BvpProblem + ?Sized>(
    problem: &P,
    mesh: &[f64],
    guess: &[f64],
    options: &SolverOptions,
) -> Result<BvpSolution, BvpError> {
    let n = problem.dim();
    if n == 0 {
        return Err(BvpError::InvalidProblem(
            "state dimension must be positive".into(),
        ));
    }
    if !(options.tol > 0.0) {
        return Err(BvpError::InvalidProblem("tol must be positive".into()));
    }
    if options.newton.tol.is_some_and(|t| !(t > 0.0)) {
        return Err(BvpError::InvalidProblem(
            "newton tol must be positive".into(),
        ));
    }
    if mesh.len() < 2 {
        return Err(BvpError::InvalidMesh(
            "mesh needs at least two nodes".into(),
        ));
    }
    if mesh.iter().any(|t| !t.is_finite()) || mesh.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BvpError::InvalidMesh(
            "mesh must be finite and strictly increasing".into(),
        ));
    }
    if guess.len() != mesh.len() * n {
        return Err(BvpError::GuessShape {
            expected: mesh.len() * n,
            got: guess.len(),
        });
    }
    let mut f = vec![0.0; n];
    for (i, chunk) in guess.chunks(n).enumerate() {
        problem.rhs(mesh[i], chunk, &mut f);
        if chunk.iter().chain(&f).any(|v| !v.is_finite()) {
            return Err(BvpError::NonFinite { t: mesh[i] });
        }
    }
    let max_nodes = options.max_nodes.unwrap_or(20 * mesh.len());

    let mut mesh = mesh.to_vec();
    let mut y = guess.to_vec();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let outcome = newton_solve(
            problem,
            &mesh,
            &mut y,
            options,
            &mut history,
            &mut iterations,
        );
        let mut sol = build_solution(problem, mesh.clone(), y.clone());
        sol.newton_iterations = iterations;
        if let NewtonOutcome::Failed = outcome {
            sol.rms_residuals = estimate_residual(&sol, problem);
            sol.history = history;
            sol.status = Status::NewtonFailed;
            return Ok(sol);
        }
        sol.rms_residuals = estimate_residual(&sol, problem);
        let worst = sol.max_residual();
        debug!(
            "round: nodes {} max residual {:.3e} bc {:.3e}",
            mesh.len(),
            worst,
            sol.bc_residual
        );
        if worst <= options.tol {
            sol.history = history;
            sol.status = if sol.bc_residual <= options.tol {
                Status::Converged
            } else {
                Status::NewtonFailed
            };
            return Ok(sol);
        }
        let new_mesh = refine(&mesh, &sol.rms_residuals, options.tol);
        if new_mesh.len() > max_nodes {
            sol.history = history;
            sol.status = Status::MaxNodesExceeded;
            return Ok(sol);
        }
        let mut new_y = vec![0.0; new_mesh.len() * n];
        for (i, &t) in new_mesh.iter().enumerate() {
            sol.evaluate_into(t, &mut new_y[i * n..(i + 1) * n])
                .expect("refined node inside interval");
        }
        mesh = new_mesh;
        y = new_y;
    }
}
