//! Bloch-space propagation of the evolution operator, first integrals, terminal
//! cost, and a direct unitary propagator used as an independent oracle.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::basis::StructureConstants;
use crate::error::{Error, Result};
use crate::model::{GateTarget, HamiltonianModel, HamiltonianSpec};
use crate::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// How control values are interpolated between mesh nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// One value per interval, held on `[t_i, t_{i+1})`.
    PiecewiseConstant,
    /// C¹ cubic Hermite through nodal values, slopes by 3-point differences.
    CubicHermite,
}

/// Control values `ν_l(t)` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory {
    mesh: Vec<f64>,
    /// `values[l]` holds channel `l`: one entry per node (cubic) or per interval
    /// (piecewise constant).
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
    interpolation: Interpolation,
}

fn check_mesh(mesh: &[f64]) -> Result<()> {
    if mesh.len() < 2 {
        return Err(Error::Controls("mesh needs at least two nodes".into()));
    }
    if mesh[0] != 0.0 {
        return Err(Error::Controls(format!(
            "mesh starts at {} instead of 0",
            mesh[0]
        )));
    }
    if mesh.iter().any(|t| !t.is_finite()) || mesh.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Controls(
            "mesh must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn fd_slopes(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        let s = (f[1] - f[0]) / (x[1] - x[0]);
        return vec![s, s];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        d[i] = -h1 / (h0 * (h0 + h1)) * f[i - 1]
            + (h1 - h0) / (h0 * h1) * f[i]
            + h0 / (h1 * (h0 + h1)) * f[i + 1];
    }
    let (h0, h1) = (x[1] - x[0], x[2] - x[1]);
    d[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * f[0] + (h0 + h1) / (h0 * h1) * f[1]
        - h0 / (h1 * (h0 + h1)) * f[2];
    let (h0, h1) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    d[n - 1] = h1 / (h0 * (h0 + h1)) * f[n - 3] - (h0 + h1) / (h0 * h1) * f[n - 2]
        + (2.0 * h1 + h0) / (h1 * (h0 + h1)) * f[n - 1];
    d
}

impl ControlTrajectory {
    /// `values[l][i]` is channel `l` on interval `i`.
    pub fn piecewise_constant(mesh: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_mesh(&mesh)?;
        for v in &values {
            if v.len() != mesh.len() - 1 {
                return Err(Error::Controls(format!(
                    "{} values for {} intervals",
                    v.len(),
                    mesh.len() - 1
                )));
            }
        }
        Self::finish(mesh, values, Vec::new(), Interpolation::PiecewiseConstant)
    }

    /// `values[l][i]` is channel `l` at node `i`.
    pub fn cubic(mesh: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_mesh(&mesh)?;
        for v in &values {
            if v.len() != mesh.len() {
                return Err(Error::Controls(format!(
                    "{} values for {} nodes",
                    v.len(),
                    mesh.len()
                )));
            }
        }
        let slopes = values.iter().map(|v| fd_slopes(&mesh, v)).collect();
        Self::finish(mesh, values, slopes, Interpolation::CubicHermite)
    }

    /// All channels identically zero on `[0, horizon]`.
    pub fn zero(n_controls: usize, horizon: f64) -> Result<Self> {
        Self::piecewise_constant(vec![0.0, horizon], vec![vec![0.0]; n_controls])
    }

    fn finish(
        mesh: Vec<f64>,
        values: Vec<Vec<f64>>,
        slopes: Vec<Vec<f64>>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Controls("non-finite control value".into()));
        }
        Ok(Self {
            mesh,
            values,
            slopes,
            interpolation,
        })
    }

    pub fn n_controls(&self) -> usize {
        self.values.len()
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn horizon(&self) -> f64 {
        *self.mesh.last().unwrap()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    fn interval(&self, t: f64) -> usize {
        let i = self.mesh.partition_point(|&m| m <= t);
        i.saturating_sub(1).min(self.mesh.len() - 2)
    }

    /// Values at `t`; piecewise-constant controls take the right-continuous value.
    pub fn evaluate(&self, t: f64, out: &mut [f64]) {
        self.evaluate_in(t, self.interval(t), out)
    }

    fn evaluate_in(&self, t: f64, i: usize, out: &mut [f64]) {
        match self.interpolation {
            Interpolation::PiecewiseConstant => {
                for (o, v) in out.iter_mut().zip(&self.values) {
                    *o = v[i];
                }
            }
            Interpolation::CubicHermite => {
                let h = self.mesh[i + 1] - self.mesh[i];
                let s = (t - self.mesh[i]) / h;
                let (s2, s3) = (s * s, s * s * s);
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                for ((o, v), d) in out.iter_mut().zip(&self.values).zip(&self.slopes) {
                    *o = h00 * v[i] + h01 * v[i + 1] + h * (h10 * d[i] + h11 * d[i + 1]);
                }
            }
        }
    }

    /// Value used inside the step `[lo, hi]`, which never straddles a
    /// breakpoint of a piecewise-constant trajectory.
    fn evaluate_step(&self, t: f64, lo: f64, hi: f64, out: &mut [f64]) {
        self.evaluate_in(t, self.interval(0.5 * (lo + hi)), out)
    }
}

/// Real structure of the left-multiplication map `X ↦ H X` in Bloch
/// coordinates: for `z = (u⁰, u)`, `i dz/dt = M z` with `M` Hermitian.
pub fn generator_matrix(h0: f64, h: &[f64], sc: &StructureConstants) -> CMatrix {
    let n = sc.len();
    let scale = (sc.dim() as f64 / 2.0).sqrt();
    let mut m = CMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = Complex64::new(h0, 0.0);
    for j in 0..n {
        m[(0, j + 1)] = Complex64::new(h[j], 0.0);
        m[(j + 1, 0)] = Complex64::new(h[j], 0.0);
        m[(j + 1, j + 1)] = Complex64::new(h0, 0.0);
    }
    for &(k, mm, l, c) in sc.coupling() {
        if h[k] != 0.0 {
            m[(l + 1, mm + 1)] += c * (scale * h[k]);
        }
    }
    m
}

/// Dense Bloch generators of the free field and of each control channel.
#[derive(Debug, Clone)]
pub struct BlochGenerators {
    dim: usize,
    free: CMatrix,
    channels: Vec<CMatrix>,
}

impl BlochGenerators {
    pub fn new(model: &HamiltonianModel, sc: &StructureConstants) -> Result<Self> {
        if model.dim != sc.dim() {
            return Err(Error::DimensionMismatch {
                expected: sc.dim(),
                got: model.dim,
            });
        }
        Ok(Self {
            dim: model.dim,
            free: generator_matrix(model.free_scalar, &model.free_vector, sc),
            channels: model
                .channels
                .iter()
                .map(|c| generator_matrix(c.scalar, &c.vector, sc))
                .collect(),
        })
    }

    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// State length `d²` (scalar plus Bloch vector).
    pub fn state_len(&self) -> usize {
        self.dim * self.dim
    }

    pub fn n_controls(&self) -> usize {
        self.channels.len()
    }

    pub fn free(&self) -> &CMatrix {
        &self.free
    }

    pub fn channel(&self, l: usize) -> &CMatrix {
        &self.channels[l]
    }

    /// `M(ν) = M_free + Σ ν_l M_l`.
    pub fn assemble(&self, nu: &[f64]) -> CMatrix {
        let mut m = self.free.clone();
        for (g, &v) in self.channels.iter().zip(nu) {
            if v != 0.0 {
                m.zip_apply(g, |a, b| *a += b * v);
            }
        }
        m
    }
}

/// `y = M x` for a column-major dense matrix.
pub(crate) fn matvec(m: &CMatrix, x: &[Complex64], y: &mut [Complex64]) {
    let n = m.nrows();
    y.fill(ZERO);
    for (col, &xc) in x.iter().enumerate() {
        if xc == ZERO {
            continue;
        }
        let column = &m.as_slice()[col * n..(col + 1) * n];
        for (yi, &a) in y.iter_mut().zip(column) {
            *yi += a * xc;
        }
    }
}

/// Right-hand side of the Bloch equations, written out with the sparse
/// structure constants. `z = (u⁰, u)`.
pub fn bloch_rhs(
    z: &[Complex64],
    h0: f64,
    h: &[f64],
    sc: &StructureConstants,
    dz: &mut [Complex64],
) -> Result<()> {
    let n = sc.len();
    for len in [z.len(), dz.len()] {
        if len != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: len,
            });
        }
    }
    if h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.len(),
        });
    }
    let scale = (sc.dim() as f64 / 2.0).sqrt();
    let (u0, u) = (z[0], &z[1..]);
    let hu: Complex64 = h.iter().zip(u).map(|(a, b)| b * *a).sum();
    dz[0] = -I * (u0 * h0 + hu);
    let mut acc = vec![ZERO; n];
    for &(k, m, l, c) in sc.coupling() {
        acc[l] += c * h[k] * u[m];
    }
    for j in 0..n {
        dz[j + 1] = -I * (u[j] * h0 + u0 * h[j] + acc[j] * scale);
    }
    Ok(())
}

/// Step control for the propagators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    /// Accept once doubling the step count changes the final state by less
    /// than this (max-abs).
    pub tol: f64,
    /// Substeps per grid interval in the first pass.
    pub initial_substeps: usize,
    pub max_doublings: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            initial_substeps: 1,
            max_doublings: 20,
        }
    }
}

/// States at the nodes of a time grid. `states[i][0]` is `u⁰(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    /// Substeps per grid interval used for the accepted pass.
    pub substeps: usize,
}

impl BlochTrajectory {
    pub fn u0(&self, i: usize) -> Complex64 {
        self.states[i][0]
    }

    pub fn u(&self, i: usize) -> &[Complex64] {
        &self.states[i][1..]
    }

    pub fn last(&self) -> &[Complex64] {
        self.states.last().unwrap()
    }
}

fn check_grid(grid: &[f64], controls: &ControlTrajectory) -> Result<()> {
    check_mesh(grid)?;
    let (gt, ct) = (*grid.last().unwrap(), controls.horizon());
    if (gt - ct).abs() > 1e-12 * ct.max(1.0) {
        return Err(Error::Controls(format!(
            "grid ends at {gt} but controls end at {ct}"
        )));
    }
    Ok(())
}

/// Grid refined by the breakpoints of piecewise-constant controls, with the
/// positions of the original nodes.
fn merged_grid(grid: &[f64], controls: &ControlTrajectory) -> (Vec<f64>, Vec<usize>) {
    let mut all: Vec<f64> = grid.to_vec();
    if controls.interpolation == Interpolation::PiecewiseConstant {
        all.extend_from_slice(&controls.mesh[1..controls.mesh.len() - 1]);
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
    }
    let marks = grid
        .iter()
        .map(|&t| {
            all.iter()
                .position(|&a| (a - t).abs() <= 1e-14 * t.abs().max(1.0))
                .expect("grid node kept")
        })
        .collect();
    (all, marks)
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Repeats `pass(substeps)` with doubled step counts until the final states of
/// consecutive passes agree to `opts.tol`.
fn with_step_doubling<T, F>(
    opts: &PropagationOptions,
    mut pass: F,
    last: fn(&T) -> Vec<Complex64>,
) -> Result<(T, usize)>
where
    F: FnMut(usize) -> Result<T>,
{
    let mut substeps = opts.initial_substeps.max(1);
    let mut prev = pass(substeps)?;
    for _ in 0..opts.max_doublings {
        substeps *= 2;
        let next = pass(substeps)?;
        let change = max_diff(&last(&prev), &last(&next));
        prev = next;
        if change < opts.tol {
            return Ok((prev, substeps));
        }
    }
    log::warn!(
        "step doubling stopped at {substeps} substeps per interval before reaching {:.1e}",
        opts.tol
    );
    Ok((prev, substeps))
}

/// Classical RK4 integration of `i dz/dt = M(ν(t)) z` from `z(0) = (1, 0, …)`.
pub fn propagate_bloch(
    gens: &BlochGenerators,
    controls: &ControlTrajectory,
    grid: &[f64],
    opts: &PropagationOptions,
) -> Result<BlochTrajectory> {
    let mut z0 = vec![ZERO; gens.state_len()];
    z0[0] = Complex64::new(1.0, 0.0);
    propagate_bloch_from(gens, controls, grid, &z0, opts)
}

/// RK4 propagation from an arbitrary initial state.
pub fn propagate_bloch_from(
    gens: &BlochGenerators,
    controls: &ControlTrajectory,
    grid: &[f64],
    z0: &[Complex64],
    opts: &PropagationOptions,
) -> Result<BlochTrajectory> {
    check_grid(grid, controls)?;
    if controls.n_controls() != gens.n_controls() {
        return Err(Error::DimensionMismatch {
            expected: gens.n_controls(),
            got: controls.n_controls(),
        });
    }
    if z0.len() != gens.state_len() {
        return Err(Error::DimensionMismatch {
            expected: gens.state_len(),
            got: z0.len(),
        });
    }
    let (nodes, marks) = merged_grid(grid, controls);
    let (states, substeps) = with_step_doubling(
        opts,
        |sub| rk4_pass(gens, controls, &nodes, z0, sub),
        |s: &Vec<Vec<Complex64>>| s.last().unwrap().clone(),
    )?;
    Ok(BlochTrajectory {
        times: grid.to_vec(),
        states: marks.iter().map(|&i| states[i].clone()).collect(),
        substeps,
    })
}

fn rk4_pass(
    gens: &BlochGenerators,
    controls: &ControlTrajectory,
    nodes: &[f64],
    z0: &[Complex64],
    substeps: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let n = z0.len();
    let mut nu = vec![0.0; gens.n_controls()];
    let mut z = z0.to_vec();
    let mut out = Vec::with_capacity(nodes.len());
    out.push(z.clone());
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let mut tmp = vec![ZERO; n];
    let mut rhs = |t: f64, lo: f64, hi: f64, x: &[Complex64], dx: &mut [Complex64]| {
        controls.evaluate_step(t, lo, hi, &mut nu);
        let m = gens.assemble(&nu);
        matvec(&m, x, dx);
        for v in dx.iter_mut() {
            *v *= -I;
        }
    };
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / substeps as f64;
        for s in 0..substeps {
            let t = a + s as f64 * h;
            let (lo, hi) = (t, t + h);
            rhs(t, lo, hi, &z, &mut k1);
            for i in 0..n {
                tmp[i] = z[i] + k1[i] * (0.5 * h);
            }
            rhs(t + 0.5 * h, lo, hi, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = z[i] + k2[i] * (0.5 * h);
            }
            rhs(t + 0.5 * h, lo, hi, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = z[i] + k3[i] * h;
            }
            rhs(t + h, lo, hi, &tmp, &mut k4);
            for i in 0..n {
                z[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
            if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Divergence { t: t + h });
            }
        }
        out.push(z.clone());
    }
    Ok(out)
}

/// Exponential integrator used by the unitary oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleScheme {
    /// `U ← exp(-i H(t+h/2) h) U`, second order.
    Midpoint,
    /// Fourth-order commutator-free product of two exponentials with the
    /// Hamiltonian sampled at the two Gauss points.
    #[default]
    CommutatorFree4,
}

/// `exp(-i H τ)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, tau: f64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let phases = eig
        .eigenvalues
        .map(|lam| Complex64::from_polar(1.0, -lam * tau));
    let mut vd = v.clone();
    for (j, mut col) in vd.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    vd * v.adjoint()
}

/// Propagator of the dense Hamiltonian `H_free + Σ ν_l H_l` from the identity,
/// built only from the Pauli/matrix spec (no Bloch coordinates involved).
pub fn propagate_unitary_oracle(
    spec: &HamiltonianSpec,
    controls: &ControlTrajectory,
    grid: &[f64],
    scheme: OracleScheme,
    opts: &PropagationOptions,
) -> Result<Vec<CMatrix>> {
    check_grid(grid, controls)?;
    let free = spec.free_operator()?;
    let chans = spec.channel_operators()?;
    if chans.len() != controls.n_controls() {
        return Err(Error::DimensionMismatch {
            expected: chans.len(),
            got: controls.n_controls(),
        });
    }
    let (nodes, marks) = merged_grid(grid, controls);
    let (us, _) = with_step_doubling(
        opts,
        |sub| oracle_pass(&free, &chans, controls, &nodes, scheme, sub),
        |s: &Vec<CMatrix>| s.last().unwrap().as_slice().to_vec(),
    )?;
    Ok(marks.iter().map(|&i| us[i].clone()).collect())
}

fn oracle_pass(
    free: &CMatrix,
    chans: &[CMatrix],
    controls: &ControlTrajectory,
    nodes: &[f64],
    scheme: OracleScheme,
    substeps: usize,
) -> Result<Vec<CMatrix>> {
    let d = free.nrows();
    let mut nu = vec![0.0; chans.len()];
    let mut hamiltonian = |t: f64, lo: f64, hi: f64| {
        controls.evaluate_step(t, lo, hi, &mut nu);
        let mut h = free.clone();
        for (c, &v) in chans.iter().zip(&nu) {
            h += c * Complex64::new(v, 0.0);
        }
        h
    };
    let sqrt3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - sqrt3 / 6.0, 0.5 + sqrt3 / 6.0);
    let (a1, a2) = (0.25 + sqrt3 / 6.0, 0.25 - sqrt3 / 6.0);
    let mut u = CMatrix::identity(d, d);
    let mut out = Vec::with_capacity(nodes.len());
    out.push(u.clone());
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / substeps as f64;
        for s in 0..substeps {
            let t = a + s as f64 * h;
            let step = match scheme {
                OracleScheme::Midpoint => expm_hermitian(&hamiltonian(t + 0.5 * h, t, t + h), h),
                OracleScheme::CommutatorFree4 => {
                    let h1 = hamiltonian(t + c1 * h, t, t + h);
                    let h2 = hamiltonian(t + c2 * h, t, t + h);
                    let first = expm_hermitian(
                        &(&h1 * Complex64::new(a1, 0.0) + &h2 * Complex64::new(a2, 0.0)),
                        h,
                    );
                    let second = expm_hermitian(
                        &(&h1 * Complex64::new(a2, 0.0) + &h2 * Complex64::new(a1, 0.0)),
                        h,
                    );
                    second * first
                }
            };
            u = step * u;
            if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Divergence { t: t + h });
            }
        }
        out.push(u.clone());
    }
    Ok(out)
}

/// Deviations from the two unitarity relations of a single state `z = (u⁰, u)`:
/// `||u⁰|² + ‖u‖² - 1|` and the largest component of
/// `u⁰ ū_j + ū⁰ u_j + √(d/2) Σ_{k,m} (g_kmj + i f_kmj) u_k ū_m`.
pub fn first_integral_deviation(z: &[Complex64], sc: &StructureConstants) -> (f64, f64) {
    let n = sc.len();
    let scale = (sc.dim() as f64 / 2.0).sqrt();
    let (u0, u) = (z[0], &z[1..]);
    let norm = z.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let mut rel: Vec<Complex64> = (0..n)
        .map(|j| u0 * u[j].conj() + u0.conj() * u[j])
        .collect();
    for &(k, m, l, c) in sc.coupling() {
        rel[l] += c * u[k] * u[m].conj() * scale;
    }
    let comp = rel.iter().fold(0.0, |a: f64, v| a.max(v.norm()));
    ((norm - 1.0).abs(), comp)
}

/// Maximum first-integral deviations over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FirstIntegralReport {
    pub norm: f64,
    pub components: f64,
}

impl FirstIntegralReport {
    pub fn max(&self) -> f64 {
        self.norm.max(self.components)
    }
}

pub fn first_integrals<'a, I>(states: I, sc: &StructureConstants) -> FirstIntegralReport
where
    I: IntoIterator<Item = &'a [Complex64]>,
{
    states
        .into_iter()
        .fold(FirstIntegralReport::default(), |acc, z| {
            let (n, c) = first_integral_deviation(z, sc);
            FirstIntegralReport {
                norm: acc.norm.max(n),
                components: acc.components.max(c),
            }
        })
}

/// Convenience over a [`BlochTrajectory`].
pub fn trajectory_first_integrals(
    traj: &BlochTrajectory,
    sc: &StructureConstants,
) -> FirstIntegralReport {
    first_integrals(traj.states.iter().map(Vec::as_slice), sc)
}

/// `½ (|u⁰ - g⁰|² + ‖u - g‖²)` for the state `z = (u⁰, u)`.
pub fn terminal_cost(z: &[Complex64], target: &GateTarget) -> f64 {
    let g = target.state();
    0.5 * z
        .iter()
        .zip(&g)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
}

/// `(1/2d) ‖U - e^{iα} U_gate‖²_F`, computed without Bloch coordinates.
pub fn operator_terminal_cost(u: &CMatrix, target: &GateTarget) -> f64 {
    let d = u.nrows() as f64;
    (u - target.phased_unitary()).norm_squared() / (2.0 * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::model::{compile_gate_target, compile_hamiltonian, preset_experiment, preset_gate};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubit() -> (HamiltonianSpec, HamiltonianModel, StructureConstants) {
        let spec = preset_experiment("not").unwrap().hamiltonian;
        let b = build_basis(2).unwrap();
        let sc = StructureConstants::compute(&b);
        let model = compile_hamiltonian(&spec, &b, None).unwrap();
        (spec, model, sc)
    }

    #[test]
    fn rhs_hand_value() {
        let sc = StructureConstants::compute(&build_basis(2).unwrap());
        let w = 3.0;
        let z = [c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)];
        let mut dz = [c(0., 0.); 4];
        bloch_rhs(&z, 0.0, &[0.0, 0.0, w / 2.0], &sc, &mut dz).unwrap();
        assert_eq!(dz, [c(0., 0.), c(0., 0.), c(0., 0.), c(0., -w / 2.0)]);
        bloch_rhs(&[c(0.3, 0.1); 4], 0.0, &[0.0; 3], &sc, &mut dz).unwrap();
        assert!(dz.iter().all(|v| *v == c(0., 0.)));
        assert!(bloch_rhs(&z[..3], 0.0, &[0.0; 3], &sc, &mut dz).is_err());
    }

    #[test]
    fn rhs_matches_dense_product() {
        let b = build_basis(4).unwrap();
        let sc = StructureConstants::compute(&b);
        let h: Vec<f64> = (0..15).map(|j| ((j * 7 % 11) as f64 - 5.0) / 4.0).collect();
        let h0 = 0.3;
        let z: Vec<Complex64> = (0..16)
            .map(|j| c((j as f64 * 0.37).sin(), (j as f64 * 0.91).cos()))
            .collect();
        let mut dz = vec![c(0., 0.); 16];
        bloch_rhs(&z, h0, &h, &sc, &mut dz).unwrap();
        let hm = b
            .reconstruct(&crate::basis::BlochDecomposition {
                scalar: c(h0, 0.),
                vector: h.iter().map(|&v| c(v, 0.)).collect(),
            })
            .unwrap();
        let x = b
            .reconstruct(&crate::basis::BlochDecomposition::from_state(&z))
            .unwrap();
        let oracle = b.decompose(&(hm * x * c(0., -1.))).unwrap().to_state();
        for (a, o) in dz.iter().zip(&oracle) {
            assert!((a - o).norm() < 1e-12);
        }
        let m = generator_matrix(h0, &h, &sc);
        assert!((&m - m.adjoint()).norm() < 1e-13);
        let mut mz = vec![c(0., 0.); 16];
        matvec(&m, &z, &mut mz);
        for (a, o) in mz.iter().zip(&oracle) {
            assert!((a * c(0., -1.) - o).norm() < 1e-12);
        }
    }

    #[test]
    fn free_precession_closed_form() {
        let b = build_basis(2).unwrap();
        let sc = StructureConstants::compute(&b);
        let w = 2.0;
        let model = HamiltonianModel {
            dim: 2,
            free_scalar: 0.0,
            free_vector: vec![0.0, 0.0, w / 2.0],
            channels: vec![],
        };
        let gens = BlochGenerators::new(&model, &sc).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let ctl = ControlTrajectory::zero(0, 3.0).unwrap();
        let traj = propagate_bloch(&gens, &ctl, &grid, &PropagationOptions::default()).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            assert!((traj.u0(i) - c((w * t / 2.0).cos(), 0.)).norm() < 1e-9);
            let u = traj.u(i);
            assert!(u[0].norm() < 1e-12 && u[1].norm() < 1e-12);
            assert!((u[2] - c(0., -(w * t / 2.0).sin())).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_field_is_stationary() {
        let sc = StructureConstants::compute(&build_basis(4).unwrap());
        let model = HamiltonianModel {
            dim: 4,
            free_scalar: 0.0,
            free_vector: vec![0.0; 15],
            channels: vec![],
        };
        let gens = BlochGenerators::new(&model, &sc).unwrap();
        let ctl = ControlTrajectory::zero(0, 1.0).unwrap();
        let traj = propagate_bloch(
            &gens,
            &ctl,
            &[0.0, 0.5, 1.0],
            &PropagationOptions::default(),
        )
        .unwrap();
        for z in &traj.states {
            assert_eq!(z[0], c(1., 0.));
            assert!(z[1..].iter().all(|v| *v == c(0., 0.)));
        }
        let rep = trajectory_first_integrals(&traj, &sc);
        assert_eq!(rep.norm, 0.0);
        assert_eq!(rep.components, 0.0);
    }

    #[test]
    fn oracle_closed_form_and_identity() {
        let (spec, _, _) = qubit();
        let ctl = ControlTrajectory::zero(1, 1.3).unwrap();
        for scheme in [OracleScheme::Midpoint, OracleScheme::CommutatorFree4] {
            let us = propagate_unitary_oracle(
                &spec,
                &ctl,
                &[0.0, 1.3],
                scheme,
                &PropagationOptions::default(),
            )
            .unwrap();
            // H = σ₃ + σ₂ (ω = 2, α = 1) has H² = 2I.
            let r = 2f64.sqrt();
            let (cs, sn) = ((1.3 * r).cos(), (1.3 * r).sin() / r);
            let h = spec.free_operator().unwrap();
            let expected = CMatrix::identity(2, 2) * c(cs, 0.) - h * c(0., sn);
            assert!((&us[1] - expected).norm() < 1e-9, "{scheme:?}");
        }
        let mut zero = spec.clone();
        zero.free_terms.clear();
        let us = propagate_unitary_oracle(
            &zero,
            &ctl,
            &[0.0, 1.3],
            OracleScheme::default(),
            &PropagationOptions::default(),
        )
        .unwrap();
        assert!((&us[1] - CMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn bloch_agrees_with_oracle_under_controls() {
        let (spec, model, sc) = qubit();
        let b = build_basis(2).unwrap();
        let gens = BlochGenerators::new(&model, &sc).unwrap();
        let mesh: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let vals = vec![mesh.iter().map(|t| (3.0 * t).sin() * 2.0).collect()];
        let ctl = ControlTrajectory::cubic(mesh.clone(), vals).unwrap();
        let opts = PropagationOptions::default();
        let traj = propagate_bloch(&gens, &ctl, &mesh, &opts).unwrap();
        let us =
            propagate_unitary_oracle(&spec, &ctl, &mesh, OracleScheme::default(), &opts).unwrap();
        for (z, u) in traj.states.iter().zip(&us) {
            let dec = b.decompose(u).unwrap().to_state();
            assert!(max_diff(z, &dec) < 1e-8);
        }
        assert!(trajectory_first_integrals(&traj, &sc).max() < 1e-10);
    }

    #[test]
    fn piecewise_constant_breakpoints_are_respected() {
        let (spec, model, sc) = qubit();
        let b = build_basis(2).unwrap();
        let gens = BlochGenerators::new(&model, &sc).unwrap();
        let ctl = ControlTrajectory::piecewise_constant(vec![0.0, 0.3, 1.0], vec![vec![1.5, -0.7]])
            .unwrap();
        let opts = PropagationOptions::default();
        let traj = propagate_bloch(&gens, &ctl, &[0.0, 1.0], &opts).unwrap();
        // Exact: product of two constant-Hamiltonian exponentials.
        let h = |v: f64| {
            spec.free_operator().unwrap() + spec.channel_operators().unwrap()[0].clone() * c(v, 0.)
        };
        let u = expm_hermitian(&h(-0.7), 0.7) * expm_hermitian(&h(1.5), 0.3);
        let dec = b.decompose(&u).unwrap().to_state();
        assert!(max_diff(traj.last(), &dec) < 1e-9);
        let us = propagate_unitary_oracle(&spec, &ctl, &[0.0, 1.0], OracleScheme::Midpoint, &opts)
            .unwrap();
        assert!((&us[1] - u).norm() < 1e-12);
    }

    #[test]
    fn corrupted_trajectory_is_detected() {
        let (_, model, sc) = qubit();
        let gens = BlochGenerators::new(&model, &sc).unwrap();
        let ctl = ControlTrajectory::zero(1, 1.0).unwrap();
        let traj =
            propagate_bloch(&gens, &ctl, &[0.0, 1.0], &PropagationOptions::default()).unwrap();
        let z = traj.last();
        let unorm: f64 = z[1..].iter().map(|v| v.norm_sqr()).sum();
        let bad: Vec<Complex64> = std::iter::once(z[0])
            .chain(z[1..].iter().map(|v| v * 1.1))
            .collect();
        let (n, _) = first_integral_deviation(&bad, &sc);
        assert!((n - 0.21 * unorm).abs() < 1e-9);
    }

    #[test]
    fn terminal_cost_identities() {
        let b = build_basis(2).unwrap();
        let (u, a) = preset_gate("h").unwrap();
        let target = compile_gate_target(&u, a, &b).unwrap();
        let g = target.state();
        assert_eq!(terminal_cost(&g, &target), 0.0);
        let flipped: Vec<Complex64> = g.iter().map(|v| -v).collect();
        assert!((terminal_cost(&flipped, &target) - 2.0).abs() < 1e-12);
        let w = expm_hermitian(
            &preset_experiment("h")
                .unwrap()
                .hamiltonian
                .free_operator()
                .unwrap(),
            0.4,
        );
        let z = b.decompose(&w).unwrap().to_state();
        let overlap: Complex64 = g.iter().zip(&z).map(|(x, y)| x.conj() * y).sum();
        let cost = terminal_cost(&z, &target);
        assert!((cost - (1.0 - overlap.re)).abs() < 1e-12);
        assert!((cost - operator_terminal_cost(&w, &target)).abs() < 1e-12);
    }

    #[test]
    fn control_validation() {
        assert!(ControlTrajectory::cubic(vec![0.0, 1.0], vec![vec![1.0]]).is_err());
        assert!(ControlTrajectory::cubic(vec![0.1, 1.0], vec![vec![1.0, 1.0]]).is_err());
        assert!(ControlTrajectory::cubic(vec![0.0, 1.0, 0.5], vec![vec![1.0; 3]]).is_err());
        assert!(
            ControlTrajectory::piecewise_constant(vec![0.0, 1.0], vec![vec![f64::NAN]]).is_err()
        );
    }

    #[test]
    fn cubic_reproduces_quadratics() {
        let mesh = vec![0.0, 0.2, 0.5, 0.6, 1.0];
        let f = |t: f64| 1.0 - 2.0 * t + 3.0 * t * t;
        let ctl =
            ControlTrajectory::cubic(mesh.clone(), vec![mesh.iter().map(|&t| f(t)).collect()])
                .unwrap();
        let mut out = [0.0];
        for t in [0.0, 0.1, 0.33, 0.55, 0.9, 1.0] {
            ctl.evaluate(t, &mut out);
            assert!((out[0] - f(t)).abs() < 1e-12);
        }
    }
}
