/// A first-order two-point boundary value problem `y' = f(t, y)`, `bc(y(a), y(b)) = 0`.
///
/// The interval `[a, b]` is taken from the mesh handed to the solver.
/// Implementations must be pure: the solver may call them in any order.
pub trait BvpProblem {
    /// State dimension `n`.
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Boundary residuals, exactly `n` of them.
    fn bc(&self, ya: &[f64], yb: &[f64], res: &mut [f64]);

    /// Row-major `n×n` Jacobian of `rhs` w.r.t. `y`. Return `false` to let the
    /// solver fall back to forward differences.
    fn rhs_jacobian(&self, _t: f64, _y: &[f64], _jac: &mut [f64]) -> bool {
        false
    }

    /// Row-major `n×n` Jacobians of `bc` w.r.t. `ya` and `yb`.
    fn bc_jacobian(&self, _ya: &[f64], _yb: &[f64], _ja: &mut [f64], _jb: &mut [f64]) -> bool {
        false
    }
}

/// Closure-backed problem without analytic Jacobians.
pub struct FnProblem<F, B> {
    n: usize,
    rhs: F,
    bc: B,
}

impl<F, B> FnProblem<F, B>
where
    F: Fn(f64, &[f64], &mut [f64]),
    B: Fn(&[f64], &[f64], &mut [f64]),
{
    pub fn new(n: usize, rhs: F, bc: B) -> Self {
        Self { n, rhs, bc }
    }
}

impl<F, B> BvpProblem for FnProblem<F, B>
where
    F: Fn(f64, &[f64], &mut [f64]),
    B: Fn(&[f64], &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.n
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.rhs)(t, y, dy)
    }

    fn bc(&self, ya: &[f64], yb: &[f64], res: &mut [f64]) {
        (self.bc)(ya, yb, res)
    }
}

/// Forward-difference Jacobian of `rhs`, step `1e-7·(1+|y_j|)`.
pub(crate) fn fd_rhs_jacobian<P: BvpProblem + ?Sized>(
    problem: &P,
    t: f64,
    y: &[f64],
    f0: &[f64],
    jac: &mut [f64],
) {
    let n = y.len();
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n];
    for j in 0..n {
        let h = 1e-7 * (1.0 + y[j].abs());
        yp[j] = y[j] + h;
        let h = yp[j] - y[j];
        problem.rhs(t, &yp, &mut fp);
        for r in 0..n {
            jac[r * n + j] = (fp[r] - f0[r]) / h;
        }
        yp[j] = y[j];
    }
}

pub(crate) fn fd_bc_jacobian<P: BvpProblem + ?Sized>(
    problem: &P,
    ya: &[f64],
    yb: &[f64],
    r0: &[f64],
    ja: &mut [f64],
    jb: &mut [f64],
) {
    let n = ya.len();
    let mut rp = vec![0.0; n];
    let mut yp = ya.to_vec();
    for j in 0..n {
        let h = 1e-7 * (1.0 + ya[j].abs());
        yp[j] = ya[j] + h;
        let h = yp[j] - ya[j];
        problem.bc(&yp, yb, &mut rp);
        for r in 0..n {
            ja[r * n + j] = (rp[r] - r0[r]) / h;
        }
        yp[j] = ya[j];
    }
    let mut yp = yb.to_vec();
    for j in 0..n {
        let h = 1e-7 * (1.0 + yb[j].abs());
        yp[j] = yb[j] + h;
        let h = yp[j] - yb[j];
        problem.bc(ya, &yp, &mut rp);
        for r in 0..n {
            jb[r * n + j] = (rp[r] - r0[r]) / h;
        }
        yp[j] = yb[j];
    }
}
