use crate::BvpError;

/// Outcome of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxNodesExceeded,
    NewtonFailed,
}

/// One line of the Newton iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Scaled residual 2-norm after the step.
    pub residual_norm: f64,
    /// Accepted damping factor.
    pub damping: f64,
    pub nodes: usize,
}

/// Collocation solution: nodal states with their slopes, forming a C¹
/// piecewise-cubic Hermite interpolant.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub(crate) n: usize,
    pub(crate) mesh: Vec<f64>,
    /// Row-major `nodes × n`.
    pub(crate) y: Vec<f64>,
    pub(crate) yp: Vec<f64>,
    pub rms_residuals: Vec<f64>,
    pub bc_residual: f64,
    pub newton_iterations: usize,
    pub status: Status,
    pub history: Vec<IterationRecord>,
}

impl BvpSolution {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn nodes(&self) -> usize {
        self.mesh.len()
    }

    /// Nodal state at mesh index `i`.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.y[i * self.n..(i + 1) * self.n]
    }

    /// Nodal slope `f(t_i, y_i)`.
    pub fn slope(&self, i: usize) -> &[f64] {
        &self.yp[i * self.n..(i + 1) * self.n]
    }

    /// All nodal states, row-major `nodes × n`.
    pub fn states(&self) -> &[f64] {
        &self.y
    }

    pub fn max_residual(&self) -> f64 {
        self.rms_residuals.iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    fn locate(&self, t: f64) -> Result<usize, BvpError> {
        let a = self.mesh[0];
        let b = *self.mesh.last().unwrap();
        if !(t >= a && t <= b) {
            return Err(BvpError::OutOfRange { t, a, b });
        }
        // Index of the interval [t_i, t_{i+1}] with t_i <= t, clamped to the last one.
        let i = match self.mesh.binary_search_by(|m| m.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        Ok(i.min(self.mesh.len() - 2))
    }

    /// Interpolant value at `t`, written into `out`.
    pub fn evaluate_into(&self, t: f64, out: &mut [f64]) -> Result<(), BvpError> {
        let i = self.locate(t)?;
        if t == self.mesh[i] {
            out.copy_from_slice(self.state(i));
            return Ok(());
        }
        let h = self.mesh[i + 1] - self.mesh[i];
        let s = (t - self.mesh[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let (y0, y1) = (self.state(i), self.state(i + 1));
        let (f0, f1) = (self.slope(i), self.slope(i + 1));
        for k in 0..self.n {
            out[k] = h00 * y0[k] + h01 * y1[k] + h * (h10 * f0[k] + h11 * f1[k]);
        }
        Ok(())
    }

    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>, BvpError> {
        let mut out = vec![0.0; self.n];
        self.evaluate_into(t, &mut out)?;
        Ok(out)
    }

    /// Interpolant derivative at `t`.
    pub fn derivative(&self, t: f64) -> Result<Vec<f64>, BvpError> {
        let i = self.locate(t)?;
        let h = self.mesh[i + 1] - self.mesh[i];
        let s = (t - self.mesh[i]) / h;
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let (y0, y1) = (self.state(i), self.state(i + 1));
        let (f0, f1) = (self.slope(i), self.slope(i + 1));
        Ok((0..self.n)
            .map(|k| d00 * y0[k] + d01 * y1[k] + d10 * f0[k] + d11 * f1[k])
            .collect())
    }

    /// Pointwise evaluation at each of `ts`.
    pub fn evaluate_many(&self, ts: &[f64]) -> Result<Vec<Vec<f64>>, BvpError> {
        ts.iter().map(|&t| self.evaluate(t)).collect()
    }
}
