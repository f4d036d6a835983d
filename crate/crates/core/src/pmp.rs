//! Extremal boundary value problem of the quadratic-cost gate problem.
//!
//! With `z = (u⁰, u)` the state and `q = (p⁰, p)` the costate, both obey
//! `i dz/dt = M(ν) z`, `i dq/dt = M(ν) q`, where `M(ν)` is the Bloch generator
//! of `H(ν)`. Stationarity in the controls is linear and gives the feedback
//! `ν_l = -Im⟨q, M_l z⟩ / (ε w_l)`, so the extremal system is a plain ODE
//! boundary value problem with `z(0) = (1, 0, …)` and `q(T) = -g`.
//!
//! # Real encoding
//!
//! With `D = d²` the state is stored as `4D` reals:
//! `[Re u⁰, Im u⁰, Re u₁ … Re u_{D-1}, Im u₁ … Im u_{D-1}]` followed by the
//! same layout for the costate.

use lobatto_bvp::BvpProblem;
use num_complex::Complex64;

use crate::basis::StructureConstants;
use crate::dynamics::{bloch_rhs, matvec, BlochGenerators};
use crate::error::{Error, Result};
use crate::model::{GateTarget, HamiltonianModel, TerminalCostate};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Position of `Re z_j` in a block of `2D` reals.
#[inline]
pub fn re_index(j: usize, len: usize) -> usize {
    let _ = len;
    if j == 0 {
        0
    } else {
        1 + j
    }
}

/// Position of `Im z_j` in a block of `2D` reals.
#[inline]
pub fn im_index(j: usize, len: usize) -> usize {
    if j == 0 {
        1
    } else {
        len + j
    }
}

pub fn encode_block(z: &[Complex64], out: &mut [f64]) {
    let n = z.len();
    for (j, v) in z.iter().enumerate() {
        out[re_index(j, n)] = v.re;
        out[im_index(j, n)] = v.im;
    }
}

pub fn decode_block(y: &[f64], out: &mut [Complex64]) {
    let n = out.len();
    for (j, v) in out.iter_mut().enumerate() {
        *v = Complex64::new(y[re_index(j, n)], y[im_index(j, n)]);
    }
}

/// State and costate at one instant, each of length `d²` (scalar first).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalState {
    pub state: Vec<Complex64>,
    pub costate: Vec<Complex64>,
}

impl ExtremalState {
    pub fn new(state: Vec<Complex64>, costate: Vec<Complex64>) -> Result<Self> {
        if state.len() != costate.len() {
            return Err(Error::DimensionMismatch {
                expected: state.len(),
                got: costate.len(),
            });
        }
        Ok(Self { state, costate })
    }

    pub fn encode(&self) -> Vec<f64> {
        let n = self.state.len();
        let mut y = vec![0.0; 4 * n];
        encode_block(&self.state, &mut y[..2 * n]);
        encode_block(&self.costate, &mut y[2 * n..]);
        y
    }

    /// Inverse of [`encode`](Self::encode) for Hilbert dimension `d`.
    pub fn decode(y: &[f64], d: usize) -> Result<Self> {
        let n = d * d;
        if y.len() != 4 * n {
            return Err(Error::DimensionMismatch {
                expected: 4 * n,
                got: y.len(),
            });
        }
        let mut state = vec![ZERO; n];
        let mut costate = vec![ZERO; n];
        decode_block(&y[..2 * n], &mut state);
        decode_block(&y[2 * n..], &mut costate);
        Ok(Self { state, costate })
    }
}

fn check_feedback_params(model: &HamiltonianModel, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::SingularFeedback(format!("epsilon = {epsilon}")));
    }
    if let Some(c) = model.channels.iter().find(|c| !(c.weight > 0.0)) {
        return Err(Error::SingularFeedback(format!(
            "channel {:?} has weight {}",
            c.label, c.weight
        )));
    }
    Ok(())
}

/// Per-channel bracket of the stationarity condition,
/// `h⁰_l Im(p̄⁰u⁰ + p̄·u) + h_l·Im(p̄⁰u + u⁰p̄) + √(d/2) Im Σ (g+if)_kmj h_l^k u^m p̄^j`.
fn stationarity_brackets(
    st: &ExtremalState,
    model: &HamiltonianModel,
    sc: &StructureConstants,
) -> Vec<f64> {
    let scale = (sc.dim() as f64 / 2.0).sqrt();
    let (u0, u) = (st.state[0], &st.state[1..]);
    let (p0, p) = (st.costate[0], &st.costate[1..]);
    let overlap: Complex64 = p0.conj() * u0
        + p.iter()
            .zip(u)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>();
    model
        .channels
        .iter()
        .map(|ch| {
            let mut mixed = 0.0;
            for j in 0..u.len() {
                mixed += ch.vector[j] * (p0.conj() * u[j] + u0 * p[j].conj()).im;
            }
            let mut triple = ZERO;
            for &(k, m, l, c) in sc.coupling() {
                let hk = ch.vector[k];
                if hk != 0.0 {
                    triple += c * hk * u[m] * p[l].conj();
                }
            }
            ch.scalar * overlap.im + mixed + scale * triple.im
        })
        .collect()
}

/// Closed-form root of the stationarity condition,
/// `ν_l = -bracket_l / (ε w_l)`.
pub fn control_feedback(
    st: &ExtremalState,
    model: &HamiltonianModel,
    epsilon: f64,
    sc: &StructureConstants,
) -> Result<Vec<f64>> {
    check_feedback_params(model, epsilon)?;
    Ok(stationarity_brackets(st, model, sc)
        .into_iter()
        .zip(&model.channels)
        .map(|(b, ch)| -b / (epsilon * ch.weight))
        .collect())
}

/// `ε ν_l w_l + bracket_l` for every channel; zero at the feedback.
pub fn stationarity_residual(
    st: &ExtremalState,
    nu: &[f64],
    model: &HamiltonianModel,
    epsilon: f64,
    sc: &StructureConstants,
) -> Vec<f64> {
    stationarity_brackets(st, model, sc)
        .into_iter()
        .zip(&model.channels)
        .zip(nu)
        .map(|((b, ch), v)| epsilon * v * ch.weight + b)
        .collect()
}

/// Right-hand side of the extremal system evaluated with the sparse
/// structure constants. It does not depend on `t`.
pub fn extremal_rhs(
    _t: f64,
    y: &[f64],
    model: &HamiltonianModel,
    epsilon: f64,
    sc: &StructureConstants,
) -> Result<Vec<f64>> {
    let st = ExtremalState::decode(y, sc.dim())?;
    let nu = control_feedback(&st, model, epsilon, sc)?;
    let (h0, h) = model.field(&nu);
    let n = st.state.len();
    let mut du = vec![ZERO; n];
    let mut dp = vec![ZERO; n];
    bloch_rhs(&st.state, h0, &h, sc, &mut du)?;
    bloch_rhs(&st.costate, h0, &h, sc, &mut dp)?;
    Ok(ExtremalState::new(du, dp)?.encode())
}

fn terminal_costate(target: &GateTarget, mode: TerminalCostate) -> Vec<Complex64> {
    target
        .state()
        .into_iter()
        .map(|g| match mode {
            TerminalCostate::Plain => -g,
            TerminalCostate::Conjugated => -g.conj(),
        })
        .collect()
}

/// `[z(0) - (1, 0, …), q(T) + g]` in the real encoding.
pub fn boundary_residual(
    y0: &[f64],
    y_t: &[f64],
    target: &GateTarget,
    mode: TerminalCostate,
) -> Vec<f64> {
    let n = target.dim * target.dim;
    let mut res = vec![0.0; 4 * n];
    res[..2 * n].copy_from_slice(&y0[..2 * n]);
    res[0] -= 1.0;
    let mut q = vec![0.0; 2 * n];
    encode_block(&terminal_costate(target, mode), &mut q);
    for i in 0..2 * n {
        res[2 * n + i] = y_t[2 * n + i] - q[i];
    }
    res
}

/// Value of the Pontryagin function with its four terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PontryaginValue {
    pub value: f64,
    /// `ε Σ_l w_l ν_l²`
    pub running: f64,
    /// `2 Im(p̄⁰ [h⁰u⁰ + h·u])`
    pub scalar_part: f64,
    /// `2 Im(p̄·[h⁰u + u⁰h])`
    pub vector_part: f64,
    /// `√(2d) Im Σ (g+if)_kmj h^k u^m p̄^j`
    pub structure_part: f64,
}

pub fn pontryagin_hamiltonian(
    st: &ExtremalState,
    nu: &[f64],
    model: &HamiltonianModel,
    epsilon: f64,
    sc: &StructureConstants,
) -> PontryaginValue {
    let (h0, h) = model.field(nu);
    let (u0, u) = (st.state[0], &st.state[1..]);
    let (p0, p) = (st.costate[0], &st.costate[1..]);
    let running = epsilon
        * model
            .channels
            .iter()
            .zip(nu)
            .map(|(c, v)| c.weight * v * v)
            .sum::<f64>();
    let hu: Complex64 = h.iter().zip(u).map(|(a, b)| b * *a).sum();
    let scalar_part = 2.0 * (p0.conj() * (u0 * h0 + hu)).im;
    let vector_part = 2.0
        * p.iter()
            .zip(u)
            .zip(&h)
            .map(|((pj, uj), hj)| pj.conj() * (uj * h0 + u0 * *hj))
            .sum::<Complex64>()
            .im;
    let mut triple = ZERO;
    for &(k, m, l, c) in sc.coupling() {
        if h[k] != 0.0 {
            triple += c * h[k] * u[m] * p[l].conj();
        }
    }
    let structure_part = (2.0 * sc.dim() as f64).sqrt() * triple.im;
    PontryaginValue {
        value: running + scalar_part + vector_part + structure_part,
        running,
        scalar_part,
        vector_part,
        structure_part,
    }
}

/// The extremal system as a [`BvpProblem`], evaluated with dense generators
/// and an analytic Jacobian.
#[derive(Debug, Clone)]
pub struct ExtremalSystem {
    gens: BlochGenerators,
    /// `1 / (ε w_l)`
    gains: Vec<f64>,
    weights: Vec<f64>,
    epsilon: f64,
    terminal: Vec<Complex64>,
}

struct Eval {
    u: Vec<Complex64>,
    p: Vec<Complex64>,
    q: Vec<Vec<Complex64>>,
    r: Vec<Vec<Complex64>>,
    nu: Vec<f64>,
}

impl ExtremalSystem {
    pub fn new(
        gens: BlochGenerators,
        model: &HamiltonianModel,
        target: &GateTarget,
        epsilon: f64,
        mode: TerminalCostate,
    ) -> Result<Self> {
        check_feedback_params(model, epsilon)?;
        if target.dim != gens.dim() {
            return Err(Error::DimensionMismatch {
                expected: gens.dim(),
                got: target.dim,
            });
        }
        Ok(Self {
            gains: model
                .channels
                .iter()
                .map(|c| 1.0 / (epsilon * c.weight))
                .collect(),
            weights: model.weights(),
            epsilon,
            terminal: terminal_costate(target, mode),
            gens,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn generators(&self) -> &BlochGenerators {
        &self.gens
    }

    /// Number of complex components per block, `d²`.
    pub fn block_len(&self) -> usize {
        self.gens.state_len()
    }

    fn eval(&self, y: &[f64]) -> Eval {
        let n = self.block_len();
        let mut u = vec![ZERO; n];
        let mut p = vec![ZERO; n];
        decode_block(&y[..2 * n], &mut u);
        decode_block(&y[2 * n..], &mut p);
        let s = self.gens.n_controls();
        let mut q = vec![vec![ZERO; n]; s];
        let mut r = vec![vec![ZERO; n]; s];
        let mut nu = vec![0.0; s];
        for l in 0..s {
            matvec(self.gens.channel(l), &u, &mut q[l]);
            matvec(self.gens.channel(l), &p, &mut r[l]);
            let inner: Complex64 = p.iter().zip(&q[l]).map(|(a, b)| a.conj() * b).sum();
            nu[l] = -self.gains[l] * inner.im;
        }
        Eval { u, p, q, r, nu }
    }

    /// Feedback controls at an encoded point.
    pub fn controls(&self, y: &[f64]) -> Vec<f64> {
        self.eval(y).nu
    }

    /// `ε Σ w_l ν_l² + 2 Im⟨q, M(ν) z⟩` at the feedback controls.
    pub fn hamiltonian(&self, y: &[f64]) -> f64 {
        let e = self.eval(y);
        let m = self.gens.assemble(&e.nu);
        let mut mu = vec![ZERO; e.u.len()];
        matvec(&m, &e.u, &mut mu);
        let inner: Complex64 = e.p.iter().zip(&mu).map(|(a, b)| a.conj() * b).sum();
        let running: f64 = self.weights.iter().zip(&e.nu).map(|(w, v)| w * v * v).sum();
        self.epsilon * running + 2.0 * inner.im
    }
}

impl BvpProblem for ExtremalSystem {
    fn dim(&self) -> usize {
        4 * self.block_len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.block_len();
        let e = self.eval(y);
        let mut mu = vec![ZERO; n];
        let mut mp = vec![ZERO; n];
        matvec(self.gens.free(), &e.u, &mut mu);
        matvec(self.gens.free(), &e.p, &mut mp);
        for l in 0..e.nu.len() {
            let v = e.nu[l];
            for j in 0..n {
                mu[j] += e.q[l][j] * v;
                mp[j] += e.r[l][j] * v;
            }
        }
        for v in mu.iter_mut().chain(mp.iter_mut()) {
            *v *= -I;
        }
        encode_block(&mu, &mut dy[..2 * n]);
        encode_block(&mp, &mut dy[2 * n..]);
    }

    fn bc(&self, ya: &[f64], yb: &[f64], res: &mut [f64]) {
        let n = self.block_len();
        res[..2 * n].copy_from_slice(&ya[..2 * n]);
        res[0] -= 1.0;
        let mut q = vec![0.0; 2 * n];
        encode_block(&self.terminal, &mut q);
        for i in 0..2 * n {
            res[2 * n + i] = yb[2 * n + i] - q[i];
        }
    }

    fn rhs_jacobian(&self, _t: f64, y: &[f64], jac: &mut [f64]) -> bool {
        let n = self.block_len();
        let dim = 4 * n;
        let e = self.eval(y);
        let m = self.gens.assemble(&e.nu);
        jac.fill(0.0);
        // d/dt z = -i M z: with M = A + iB, Re' = B x + A y, Im' = -A x + B y.
        for off in [0, 2 * n] {
            for a in 0..n {
                let (ra, ia) = (off + re_index(a, n), off + im_index(a, n));
                for b in 0..n {
                    let mab = m[(a, b)];
                    if mab == ZERO {
                        continue;
                    }
                    let (rb, ib) = (off + re_index(b, n), off + im_index(b, n));
                    jac[ra * dim + rb] = mab.im;
                    jac[ra * dim + ib] = mab.re;
                    jac[ia * dim + rb] = -mab.re;
                    jac[ia * dim + ib] = mab.im;
                }
            }
        }
        // Feedback: outer products of dF/dν_l and dν_l/dy.
        let mut col = vec![0.0; dim];
        let mut grad = vec![0.0; dim];
        for l in 0..e.nu.len() {
            let c = self.gains[l];
            let mq: Vec<Complex64> = e.q[l].iter().map(|v| -I * v).collect();
            let mr: Vec<Complex64> = e.r[l].iter().map(|v| -I * v).collect();
            encode_block(&mq, &mut col[..2 * n]);
            encode_block(&mr, &mut col[2 * n..]);
            for b in 0..n {
                grad[re_index(b, n)] = c * e.r[l][b].im;
                grad[im_index(b, n)] = -c * e.r[l][b].re;
                grad[2 * n + re_index(b, n)] = -c * e.q[l][b].im;
                grad[2 * n + im_index(b, n)] = c * e.q[l][b].re;
            }
            for (i, &ci) in col.iter().enumerate() {
                if ci == 0.0 {
                    continue;
                }
                let row = &mut jac[i * dim..(i + 1) * dim];
                for (rj, &gj) in row.iter_mut().zip(&grad) {
                    *rj += ci * gj;
                }
            }
        }
        true
    }

    fn bc_jacobian(&self, _ya: &[f64], _yb: &[f64], ja: &mut [f64], jb: &mut [f64]) -> bool {
        let dim = 4 * self.block_len();
        ja.fill(0.0);
        jb.fill(0.0);
        for i in 0..dim / 2 {
            ja[i * dim + i] = 1.0;
            let k = dim / 2 + i;
            jb[k * dim + k] = 1.0;
        }
        true
    }
}

/// Total cost and its gradient with respect to piecewise-constant controls.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradient {
    pub cost: f64,
    pub terminal: f64,
    pub running: f64,
    /// `gradient[l][k]`: derivative with respect to channel `l` on interval `k`.
    pub gradient: Vec<Vec<f64>>,
}

/// Cost `½‖z(T) - g‖² + (ε/2) ∫ Σ w_l ν_l²` for controls held constant on the
/// intervals of `mesh`, and its gradient from forward state and backward
/// costate sweeps:
/// `∂J/∂ν_{l,k} = ε w_l ν_{l,k} Δ_k + ∫_k Im⟨q, M_l z⟩ dt`, with `q(T) = -g`.
/// Each interval is integrated with `substeps` (even) classical RK4 steps and
/// the integral is taken by Simpson's rule on the same nodes.
pub fn cost_gradient(
    gens: &BlochGenerators,
    model: &HamiltonianModel,
    target: &GateTarget,
    epsilon: f64,
    mesh: &[f64],
    values: &[Vec<f64>],
    substeps: usize,
) -> Result<CostGradient> {
    let s = gens.n_controls();
    let k_count = mesh.len().saturating_sub(1);
    if values.len() != s || values.iter().any(|v| v.len() != k_count) || k_count == 0 {
        return Err(Error::Controls(
            "values must be channels × intervals".into(),
        ));
    }
    let substeps = substeps.max(2) & !1;
    let n = gens.state_len();
    let nu_at = |k: usize| -> Vec<f64> { values.iter().map(|v| v[k]).collect() };
    let step = |m: &crate::CMatrix, z: &[Complex64], h: f64| -> Vec<Complex64> {
        let f = |x: &[Complex64]| {
            let mut y = vec![ZERO; n];
            matvec(m, x, &mut y);
            y.iter().map(|v| -I * v).collect::<Vec<_>>()
        };
        let k1 = f(z);
        let t: Vec<_> = z.iter().zip(&k1).map(|(a, b)| a + b * (0.5 * h)).collect();
        let k2 = f(&t);
        let t: Vec<_> = z.iter().zip(&k2).map(|(a, b)| a + b * (0.5 * h)).collect();
        let k3 = f(&t);
        let t: Vec<_> = z.iter().zip(&k3).map(|(a, b)| a + b * h).collect();
        let k4 = f(&t);
        (0..n)
            .map(|i| z[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
            .collect()
    };
    // Forward sweep, keeping every substep node.
    let mut forward: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(k_count);
    let mut z = vec![ZERO; n];
    z[0] = Complex64::new(1.0, 0.0);
    let mats: Vec<_> = (0..k_count).map(|k| gens.assemble(&nu_at(k))).collect();
    for k in 0..k_count {
        let h = (mesh[k + 1] - mesh[k]) / substeps as f64;
        let mut nodes = vec![z.clone()];
        for _ in 0..substeps {
            z = step(&mats[k], &z, h);
            nodes.push(z.clone());
        }
        forward.push(nodes);
    }
    let terminal = 0.5
        * z.iter()
            .zip(target.state())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>();
    // Backward sweep of the costate from -g.
    let mut q: Vec<Complex64> = target.state().iter().map(|g| -g).collect();
    let mut gradient = vec![vec![0.0; k_count]; s];
    let mut running = 0.0;
    for k in (0..k_count).rev() {
        let dt = mesh[k + 1] - mesh[k];
        let h = dt / substeps as f64;
        let mut back = vec![q.clone()];
        for _ in 0..substeps {
            q = step(&mats[k], &q, -h);
            back.push(q.clone());
        }
        back.reverse();
        for l in 0..s {
            let mut integral = 0.0;
            let mut mz = vec![ZERO; n];
            for (i, (zi, qi)) in forward[k].iter().zip(&back).enumerate() {
                matvec(gens.channel(l), zi, &mut mz);
                let val = qi
                    .iter()
                    .zip(&mz)
                    .map(|(a, b)| a.conj() * b)
                    .sum::<Complex64>()
                    .im;
                let w = if i == 0 || i == substeps {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                integral += w * val;
            }
            integral *= h / 3.0;
            let v = values[l][k];
            let w = model.channels[l].weight;
            gradient[l][k] = epsilon * w * v * dt + integral;
            running += 0.5 * epsilon * w * v * v * dt;
        }
    }
    Ok(CostGradient {
        cost: terminal + running,
        terminal,
        running,
        gradient,
    })
}
