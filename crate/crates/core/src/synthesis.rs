//! Gate synthesis: initial guess, ε-continuation, horizon selection and
//! verification of the extremals against independent propagation.

use std::path::Path;
use std::time::{Duration, Instant};

use lobatto_bvp::{solve_bvp, BvpProblem, BvpSolution, SolverOptions, Status};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{BlochDecomposition, OperatorBasis, StructureConstants};
use crate::dynamics::{
    first_integrals, operator_terminal_cost, propagate_unitary_oracle, terminal_cost,
    BlochGenerators, ControlTrajectory, FirstIntegralReport, OracleScheme, PropagationOptions,
};
use crate::error::{Error, Result};
use crate::model::{
    compile_gate_target, compile_hamiltonian, unitarity_defect, ExperimentConfig, GateTarget,
    HamiltonianModel,
};
use crate::pmp::{
    control_feedback, pontryagin_hamiltonian, stationarity_residual, ExtremalState, ExtremalSystem,
};

/// Subintervals per mesh interval of the grid used for verification and export.
pub const FINE_GRID_FACTOR: usize = 4;

/// Loosest solver tolerance whose Newton stopping level is kept.
const NEWTON_TOL_CEILING: f64 = 1e-6;

/// A config with its basis, structure constants and compiled operators.
#[derive(Debug, Clone)]
pub struct CompiledExperiment {
    pub config: ExperimentConfig,
    pub basis: OperatorBasis,
    pub constants: StructureConstants,
    pub model: HamiltonianModel,
    pub target: GateTarget,
    pub generators: BlochGenerators,
}

impl CompiledExperiment {
    /// Validates and compiles `config`. Structure constants are read from or
    /// written to `cache_dir` when given.
    pub fn new(config: ExperimentConfig, cache_dir: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let d = config.hamiltonian.dim();
        let basis = OperatorBasis::new(d)?;
        let constants = StructureConstants::cached(&basis, cache_dir)?;
        let model =
            compile_hamiltonian(&config.hamiltonian, &basis, config.cost.weights.as_deref())?;
        let (gate, phase) = config.gate.resolve(d)?;
        let target = compile_gate_target(&gate, phase, &basis)?;
        let generators = BlochGenerators::new(&model, &constants)?;
        Ok(Self {
            config,
            basis,
            constants,
            model,
            target,
            generators,
        })
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn horizon(&self) -> f64 {
        self.config.cost.horizon
    }

    pub fn system(&self, epsilon: f64) -> Result<ExtremalSystem> {
        ExtremalSystem::new(
            self.generators.clone(),
            &self.model,
            &self.target,
            epsilon,
            self.config.solver.terminal_costate,
        )
    }

    /// The configured tolerance drives mesh refinement; Newton always
    /// converges at least as far as it would at the default tolerance, so a
    /// loose preset does not leave iteration error in the first integrals.
    fn solver_options(&self) -> SolverOptions {
        let tol = self.config.solver.tol;
        let mut opts = SolverOptions {
            tol,
            max_nodes: self.config.solver.max_nodes,
            ..Default::default()
        };
        opts.newton.tol = Some(0.05 * tol.min(NEWTON_TOL_CEILING));
        opts
    }
}

pub fn uniform_mesh(nodes: usize, horizon: f64) -> Vec<f64> {
    let k = nodes.max(2) - 1;
    (0..=k).map(|i| horizon * i as f64 / k as f64).collect()
}

/// Mesh with every interval bisected.
pub fn bisect_mesh(mesh: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * mesh.len() - 1);
    for w in mesh.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*mesh.last().unwrap());
    out
}

/// Mesh with every interval split into `factor` equal parts.
pub fn subdivide_mesh(mesh: &[f64], factor: usize) -> Vec<f64> {
    let factor = factor.max(1);
    let mut out = Vec::with_capacity(factor * (mesh.len() - 1) + 1);
    for w in mesh.windows(2) {
        for j in 0..factor {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / factor as f64);
        }
    }
    out.push(*mesh.last().unwrap());
    out
}

/// Nodal guess on `mesh` (row-major, `4d²` per node) from the uncontrolled
/// flow: the state forward from the identity and the costate backward from
/// its terminal value. Both boundary conditions hold exactly.
pub fn initial_guess(exp: &CompiledExperiment, mesh: &[f64]) -> Result<Vec<f64>> {
    let sys = exp.system(1.0)?;
    let n = sys.block_len();
    let horizon = *mesh.last().unwrap();
    let eig = SymmetricEigen::new(exp.generators.free().clone());
    let v = &eig.eigenvectors;
    let vh = v.adjoint();
    let mut z0 = nalgebra::DVector::<Complex64>::zeros(n);
    z0[0] = Complex64::new(1.0, 0.0);
    // Costate terminal value: the boundary residual vanishes at y_T = 0 plus
    // the pinned value, so read it back from the residual itself.
    let zero = vec![0.0; sys.dim()];
    let mut start = vec![0.0; sys.dim()];
    start[0] = 1.0;
    let mut res = vec![0.0; sys.dim()];
    sys.bc(&start, &zero, &mut res);
    let q_t: Vec<f64> = res[2 * n..].iter().map(|r| -r).collect();
    let mut q_c = vec![Complex64::new(0.0, 0.0); n];
    crate::pmp::decode_block(&q_t, &mut q_c);
    let w0 = &vh * z0;
    let w_t = &vh * nalgebra::DVector::from_vec(q_c);
    let mut out = Vec::with_capacity(mesh.len() * 4 * n);
    let mut y = vec![0.0; 4 * n];
    for &t in mesh {
        let phase = |lam: f64, s: f64| Complex64::from_polar(1.0, -lam * s);
        let a = nalgebra::DVector::from_iterator(
            n,
            (0..n).map(|j| w0[j] * phase(eig.eigenvalues[j], t)),
        );
        let b = nalgebra::DVector::from_iterator(
            n,
            (0..n).map(|j| w_t[j] * phase(eig.eigenvalues[j], t - horizon)),
        );
        let u = v * a;
        let p = v * b;
        if u.iter()
            .chain(p.iter())
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::Divergence { t });
        }
        crate::pmp::encode_block(u.as_slice(), &mut y[..2 * n]);
        crate::pmp::encode_block(p.as_slice(), &mut y[2 * n..]);
        out.extend_from_slice(&y);
    }
    Ok(out)
}

/// Thresholds applied to a [`VerificationReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationThresholds {
    pub first_integrals: f64,
    /// Relative to `1 + cost`.
    pub oracle_gap: f64,
    pub oracle_state_gap: f64,
    /// Relative to `1 + |H(0)|`.
    pub hamiltonian_drift: f64,
    pub stationarity: f64,
    pub costate_norm: f64,
    pub unitarity: f64,
}

impl Default for VerificationThresholds {
    fn default() -> Self {
        Self {
            first_integrals: 1e-5,
            oracle_gap: 1e-3,
            oracle_state_gap: 1e-4,
            hamiltonian_drift: 1e-2,
            stationarity: 1e-9,
            costate_norm: 1e-6,
            unitarity: 1e-6,
        }
    }
}

/// Consistency of one stage with its defining equations and with direct
/// propagation of the recovered controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub first_integral_norm: f64,
    pub first_integral_components: f64,
    pub bloch_terminal_cost: f64,
    pub oracle_terminal_cost: f64,
    /// `|oracle - Bloch|` terminal cost.
    pub oracle_gap: f64,
    /// Largest componentwise distance between the oracle's Bloch coordinates
    /// and the stored state over the grid.
    pub oracle_state_gap: f64,
    pub hamiltonian_initial: f64,
    pub hamiltonian_drift: f64,
    pub stationarity: f64,
    pub costate_norm_drift: f64,
    pub unitarity_defect: f64,
}

impl VerificationReport {
    /// Names of the thresholds that are exceeded, with their values.
    pub fn failures(&self, th: &VerificationThresholds) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, value: f64, limit: f64| {
            if !(value <= limit) {
                out.push(format!("{name} = {value:.3e} exceeds {limit:.3e}"));
            }
        };
        check(
            "first_integrals",
            self.first_integral_norm.max(self.first_integral_components),
            th.first_integrals,
        );
        check(
            "oracle_gap",
            self.oracle_gap,
            th.oracle_gap * (1.0 + self.bloch_terminal_cost),
        );
        check(
            "oracle_state_gap",
            self.oracle_state_gap,
            th.oracle_state_gap,
        );
        check(
            "hamiltonian_drift",
            self.hamiltonian_drift,
            th.hamiltonian_drift * (1.0 + self.hamiltonian_initial.abs()),
        );
        check("stationarity", self.stationarity, th.stationarity);
        check("costate_norm", self.costate_norm_drift, th.costate_norm);
        check("unitarity", self.unitarity_defect, th.unitarity);
        out
    }

    pub fn passes(&self, th: &VerificationThresholds) -> bool {
        self.failures(th).is_empty()
    }
}

/// Controls and extremal states sampled on a grid; the exported form of a stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSamples {
    pub times: Vec<f64>,
    /// `controls[l][i]`
    pub controls: Vec<Vec<f64>>,
    pub states: Vec<ExtremalState>,
}

impl StageSamples {
    /// Samples the interpolant of `solution` on `grid`, with controls recovered
    /// from the feedback law.
    pub fn from_solution(
        exp: &CompiledExperiment,
        epsilon: f64,
        solution: &BvpSolution,
        grid: &[f64],
    ) -> Result<Self> {
        let s = exp.model.n_controls();
        let mut controls = vec![Vec::with_capacity(grid.len()); s];
        let mut states = Vec::with_capacity(grid.len());
        for &t in grid {
            let y = solution.evaluate(t)?;
            let st = ExtremalState::decode(&y, exp.dim())?;
            let nu = control_feedback(&st, &exp.model, epsilon, &exp.constants)?;
            for (c, v) in controls.iter_mut().zip(nu) {
                c.push(v);
            }
            states.push(st);
        }
        Ok(Self {
            times: grid.to_vec(),
            controls,
            states,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn controls_at(&self, i: usize) -> Vec<f64> {
        self.controls.iter().map(|c| c[i]).collect()
    }

    /// `½‖z(t) - g‖²` at every sample.
    pub fn running_terminal(&self, target: &GateTarget) -> Vec<f64> {
        self.states
            .iter()
            .map(|st| terminal_cost(&st.state, target))
            .collect()
    }

    /// `(ε/2) ∫ Σ w_l ν_l²` by the trapezoidal rule.
    pub fn integral_cost(&self, model: &HamiltonianModel, epsilon: f64) -> f64 {
        let energy = |i: usize| -> f64 {
            model
                .channels
                .iter()
                .zip(&self.controls)
                .map(|(ch, c)| ch.weight * c[i] * c[i])
                .sum()
        };
        let mut total = 0.0;
        for i in 1..self.len() {
            total += 0.5 * (energy(i - 1) + energy(i)) * (self.times[i] - self.times[i - 1]);
        }
        0.5 * epsilon * total
    }
}

/// Oracle propagators over a sample grid together with the report.
#[derive(Debug, Clone)]
pub struct Verification {
    pub report: VerificationReport,
    /// `(1/2d)‖U(t) - e^{iα}G‖²` of the oracle at every sample.
    pub oracle_running: Vec<f64>,
}

/// Checks samples against the extremal conditions and re-propagates the
/// sampled controls with the dense unitary oracle.
pub fn verify_samples(
    exp: &CompiledExperiment,
    epsilon: f64,
    samples: &StageSamples,
) -> Result<Verification> {
    if samples.len() < 2 {
        return Err(Error::Controls("need at least two samples".into()));
    }
    let sc = &exp.constants;
    let fi: FirstIntegralReport =
        first_integrals(samples.states.iter().map(|s| s.state.as_slice()), sc);
    let mut stationarity: f64 = 0.0;
    let mut hamiltonians = Vec::with_capacity(samples.len());
    for (i, st) in samples.states.iter().enumerate() {
        let nu = samples.controls_at(i);
        let res = stationarity_residual(st, &nu, &exp.model, epsilon, sc);
        stationarity = res.iter().fold(stationarity, |m, r| m.max(r.abs()));
        hamiltonians.push(pontryagin_hamiltonian(st, &nu, &exp.model, epsilon, sc).value);
    }
    let h0 = hamiltonians[0];
    let drift = hamiltonians
        .iter()
        .fold(0.0f64, |m, h| m.max((h - h0).abs()));
    let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let last = samples.states.last().unwrap();
    let q_ref = norm(&last.costate);
    let costate_drift = samples
        .states
        .iter()
        .fold(0.0f64, |m, st| m.max((norm(&st.costate) - q_ref).abs()));

    let controls = ControlTrajectory::cubic(samples.times.clone(), samples.controls.clone())?;
    let us = propagate_unitary_oracle(
        &exp.config.hamiltonian,
        &controls,
        &samples.times,
        OracleScheme::default(),
        &PropagationOptions::default(),
    )?;
    let mut state_gap: f64 = 0.0;
    let mut oracle_running = Vec::with_capacity(us.len());
    for (u, st) in us.iter().zip(&samples.states) {
        let z = exp.basis.decompose(u)?.to_state();
        state_gap = z
            .iter()
            .zip(&st.state)
            .fold(state_gap, |m, (a, b)| m.max((a - b).norm()));
        oracle_running.push(operator_terminal_cost(u, &exp.target));
    }
    let bloch_cost = terminal_cost(&last.state, &exp.target);
    let oracle_cost = *oracle_running.last().unwrap();
    let u_t = exp
        .basis
        .reconstruct(&BlochDecomposition::from_state(&last.state))?;
    Ok(Verification {
        report: VerificationReport {
            first_integral_norm: fi.norm,
            first_integral_components: fi.components,
            bloch_terminal_cost: bloch_cost,
            oracle_terminal_cost: oracle_cost,
            oracle_gap: (oracle_cost - bloch_cost).abs(),
            oracle_state_gap: state_gap,
            hamiltonian_initial: h0,
            hamiltonian_drift: drift,
            stationarity,
            costate_norm_drift: costate_drift,
            unitarity_defect: unitarity_defect(&u_t),
        },
        oracle_running,
    })
}

/// One ε stage of a continuation run.
#[derive(Debug, Clone)]
pub struct StageResult {
    pub epsilon: f64,
    pub solution: BvpSolution,
    pub initial_nodes: usize,
    /// Whether the stage needed the doubled-mesh retry.
    pub retried: bool,
    /// ε values solved on the way to this stage, in order.
    pub intermediate: Vec<f64>,
    /// BVP solves spent on the stage, including rejected warm starts.
    pub solves: usize,
    /// Newton iterations over all of those solves.
    pub newton_iterations: usize,
    pub terminal_cost: f64,
    pub integral_cost: f64,
    pub elapsed: Duration,
}

impl StageResult {
    pub fn converged(&self) -> bool {
        self.solution.status == Status::Converged
    }

    pub fn samples(&self, exp: &CompiledExperiment) -> Result<StageSamples> {
        let grid = subdivide_mesh(self.solution.mesh(), FINE_GRID_FACTOR);
        StageSamples::from_solution(exp, self.epsilon, &self.solution, &grid)
    }

    pub fn verify(&self, exp: &CompiledExperiment) -> Result<Verification> {
        verify_samples(exp, self.epsilon, &self.samples(exp)?)
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisRun {
    pub experiment: CompiledExperiment,
    pub stages: Vec<StageResult>,
    /// Index of the stage that failed after its retry; later stages are not run.
    pub failed_stage: Option<usize>,
    pub elapsed: Duration,
}

impl SynthesisRun {
    pub fn succeeded(&self) -> bool {
        self.failed_stage.is_none()
            && self.stages.len() == self.experiment.config.cost.epsilon_schedule.len()
    }

    pub fn final_stage(&self) -> Option<&StageResult> {
        self.stages.last()
    }

    /// `(ε, terminal cost)` for every stage in schedule order.
    pub fn terminal_costs(&self) -> Vec<(f64, f64)> {
        self.stages
            .iter()
            .map(|s| (s.epsilon, s.terminal_cost))
            .collect()
    }
}

fn stage_costs(exp: &CompiledExperiment, epsilon: f64, sol: &BvpSolution) -> Result<(f64, f64)> {
    let y_t = sol.state(sol.nodes() - 1);
    let st = ExtremalState::decode(y_t, exp.dim())?;
    let grid = subdivide_mesh(sol.mesh(), FINE_GRID_FACTOR);
    let samples = StageSamples::from_solution(exp, epsilon, sol, &grid)?;
    Ok((
        terminal_cost(&st.state, &exp.target),
        samples.integral_cost(&exp.model, epsilon),
    ))
}

/// Smallest ratio between consecutive ε values the continuation will insert.
const MIN_EPSILON_RATIO: f64 = 1.01;
/// Cap on BVP solves spent on a single schedule stage.
const MAX_SOLVES_PER_STAGE: usize = 64;

fn damped(sol: &BvpSolution) -> bool {
    sol.history.iter().any(|r| r.damping < 1.0)
}

/// Solves the extremal BVP at every ε of the schedule, warm-starting each
/// stage from the previous solution on its mesh.
///
/// A warm start is only trusted when Newton converges with full steps; if
/// the iteration needs damping, the step in ε is halved in log scale and the
/// stage is approached through intermediate values, which keeps the
/// continuation on one branch of extremals. Each accepted intermediate solve
/// lets the next step grow by half again in log scale. A solve that does not converge
/// once ε cannot be split further is retried on a bisected mesh; if that also
/// fails the run stops at that stage.
pub fn continuation_solve(exp: CompiledExperiment) -> Result<SynthesisRun> {
    let start = Instant::now();
    let options = exp.solver_options();
    let mut mesh = uniform_mesh(exp.config.solver.mesh, exp.horizon());
    let mut guess = initial_guess(&exp, &mesh)?;
    let mut current: Option<f64> = None;
    let mut stages = Vec::new();
    let mut failed_stage = None;
    let schedule = exp.config.cost.epsilon_schedule.clone();
    for (k, &epsilon) in schedule.iter().enumerate() {
        let t0 = Instant::now();
        let initial_nodes = mesh.len();
        let mut intermediate = Vec::new();
        let mut solves = 0;
        let mut newton_total = 0;
        let mut retried = false;
        // Ratio between consecutive ε values; starts with the whole step.
        let mut step = current.map_or(1.0, |prev| prev / epsilon);
        let outcome = loop {
            let next = current.map_or(epsilon, |prev| (prev / step).max(epsilon));
            let sys = exp.system(next)?;
            let splittable = current.is_some()
                && step.sqrt() >= MIN_EPSILON_RATIO
                && solves + 1 < MAX_SOLVES_PER_STAGE;
            // While ε can still be split, only full Newton steps are allowed so
            // a poor warm start is rejected after one iteration.
            let mut trial = options;
            if splittable {
                trial.newton.min_step = 1.0;
            }
            let t_solve = Instant::now();
            let mut sol = solve_bvp(&sys, &mesh, &guess, &trial)?;
            solves += 1;
            log::debug!(
                "solve ε = {next:e}: {:?} in {} iterations, {} -> {} nodes, damped {}, {:.2?}",
                sol.status,
                sol.newton_iterations,
                mesh.len(),
                sol.nodes(),
                damped(&sol),
                t_solve.elapsed()
            );
            newton_total += sol.newton_iterations;
            if splittable && (!sol.converged() || damped(&sol)) {
                step = step.sqrt();
                log::debug!("ε = {next:e} rejected; step ratio now {step:.4}");
                continue;
            }
            if !sol.converged() {
                log::warn!(
                    "ε = {next:e} ended {:?}; retrying on a bisected mesh",
                    sol.status
                );
                retried = true;
                let fine = bisect_mesh(&mesh);
                let fine_guess = resample_nodes(&mesh, &guess, sys.dim(), &fine);
                let mut opts = options;
                opts.max_nodes = Some(
                    options
                        .max_nodes
                        .unwrap_or(20 * mesh.len())
                        .max(2 * fine.len()),
                );
                sol = solve_bvp(&sys, &fine, &fine_guess, &opts)?;
                newton_total += sol.newton_iterations;
            }
            if !sol.converged() {
                break sol;
            }
            mesh = sol.mesh().to_vec();
            guess = sol.states().to_vec();
            current = Some(next);
            if next == epsilon {
                break sol;
            }
            intermediate.push(next);
            step *= step.sqrt();
        };
        let (terminal, integral) = stage_costs(&exp, epsilon, &outcome)?;
        let ok = outcome.converged();
        log::info!(
            "stage ε = {epsilon:e}: {:?}, terminal cost {terminal:.4e}, {} nodes, {} solves",
            outcome.status,
            outcome.nodes(),
            solves
        );
        stages.push(StageResult {
            epsilon,
            initial_nodes,
            retried,
            intermediate,
            solves,
            newton_iterations: newton_total,
            terminal_cost: terminal,
            integral_cost: integral,
            elapsed: t0.elapsed(),
            solution: outcome,
        });
        if !ok {
            failed_stage = Some(k);
            break;
        }
    }
    Ok(SynthesisRun {
        experiment: exp,
        stages,
        failed_stage,
        elapsed: start.elapsed(),
    })
}

/// Piecewise-linear transfer of nodal values to a finer mesh.
fn resample_nodes(mesh: &[f64], values: &[f64], n: usize, fine: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(fine.len() * n);
    let mut i = 0;
    for &t in fine {
        while i + 2 < mesh.len() && t > mesh[i + 1] {
            i += 1;
        }
        let (a, b) = (mesh[i], mesh[i + 1]);
        let w = ((t - a) / (b - a)).clamp(0.0, 1.0);
        for c in 0..n {
            out.push((1.0 - w) * values[i * n + c] + w * values[(i + 1) * n + c]);
        }
    }
    out
}

/// Outcome of [`select_horizon`].
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSelection {
    pub horizon: f64,
    /// Horizons tried, starting with `t_max`.
    pub tried: Vec<f64>,
    /// False when the running terminal cost had no interior minimum.
    pub interior_minimum: bool,
}

/// Shrinks the gate time to the minimizer of the running terminal cost of the
/// last continuation stage, repeating until the change is below 1% or five
/// solves have been made.
pub fn select_horizon(
    config: &ExperimentConfig,
    t_max: f64,
    cache_dir: Option<&Path>,
) -> Result<HorizonSelection> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Config(format!("T_max = {t_max} must be positive")));
    }
    let mut horizon = t_max;
    let mut tried = Vec::new();
    for _ in 0..5 {
        tried.push(horizon);
        let mut cfg = config.clone();
        cfg.cost.horizon = horizon;
        let run = continuation_solve(CompiledExperiment::new(cfg, cache_dir)?)?;
        let stage = run
            .stages
            .iter()
            .rev()
            .find(|s| s.converged())
            .ok_or_else(|| Error::Config(format!("no stage converged at T = {horizon}")))?;
        let samples = stage.samples(&run.experiment)?;
        let running = samples.running_terminal(&run.experiment.target);
        let (i_min, v_min) =
            running
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
                );
        let last = running.len() - 1;
        if i_min == 0 || i_min == last || !(v_min < running[last]) {
            log::warn!(
                "running terminal cost has no interior minimum at T = {horizon}; keeping it"
            );
            return Ok(HorizonSelection {
                horizon,
                tried,
                interior_minimum: false,
            });
        }
        let next = samples.times[i_min];
        let converged = (next - horizon).abs() < 0.01 * next;
        horizon = next;
        if converged {
            break;
        }
    }
    Ok(HorizonSelection {
        horizon,
        tried,
        interior_minimum: true,
    })
}
