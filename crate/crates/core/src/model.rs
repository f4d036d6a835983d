//! Controlled Hamiltonians, gate targets and the shipped experiment presets.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{BlochDecomposition, OperatorBasis};
use crate::error::{Error, Result};
use crate::CMatrix;

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

/// A weighted tensor product of Pauli factors, e.g. `ZI` with coefficient `ω₁/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliTerm {
    pub pauli: String,
    pub coeff: f64,
}

impl PauliTerm {
    pub fn new(pauli: &str, coeff: f64) -> Self {
        Self {
            pauli: pauli.to_string(),
            coeff,
        }
    }
}

/// Dense complex matrix given as real and (optional) imaginary row lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixSpec {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect())
                .collect::<Vec<Vec<f64>>>()
        };
        let im = rows(|z| z.im);
        let has_im = im.iter().flatten().any(|&v| v != 0.0);
        Self {
            re: rows(|z| z.re),
            im: has_im.then_some(im),
        }
    }

    pub fn to_matrix(&self, d: usize) -> Result<CMatrix> {
        let bad = |what: &str| Error::Config(format!("matrix {what} must be {d}x{d}"));
        if self.re.len() != d || self.re.iter().any(|r| r.len() != d) {
            return Err(bad("real part"));
        }
        if let Some(im) = &self.im {
            if im.len() != d || im.iter().any(|r| r.len() != d) {
                return Err(bad("imaginary part"));
            }
        }
        let m = CMatrix::from_fn(d, d, |r, c| {
            let im = self.im.as_ref().map_or(0.0, |im| im[r][c]);
            Complex64::new(self.re[r][c], im)
        });
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Config("matrix entries must be finite".into()));
        }
        Ok(m)
    }
}

/// One control channel: a label and its generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<PauliTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSpec>,
}

/// Free Hamiltonian plus control channels, as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub n_qubits: usize,
    #[serde(default)]
    pub free_terms: Vec<PauliTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_matrix: Option<MatrixSpec>,
    pub channels: Vec<ChannelSpec>,
}

fn pauli_factor(ch: char) -> Option<[Complex64; 4]> {
    let (o, l, i) = (
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
    );
    Some(match ch {
        'I' => [l, o, o, l],
        'X' => [o, l, l, o],
        'Y' => [o, -i, i, o],
        'Z' => [l, o, o, -l],
        _ => return None,
    })
}

/// Kronecker product of Pauli factors named by `s` (leftmost factor is the
/// first qubit), scaled by `coeff`.
pub fn parse_pauli_string(s: &str, coeff: f64) -> Result<CMatrix> {
    let err = |reason: String| Error::PauliParse {
        input: s.to_string(),
        reason,
    };
    if s.is_empty() {
        return Err(err("empty string".into()));
    }
    if !coeff.is_finite() {
        return Err(err(format!("coefficient {coeff} is not finite")));
    }
    let mut out = CMatrix::from_element(1, 1, Complex64::new(coeff, 0.0));
    for (pos, ch) in s.chars().enumerate() {
        let f = pauli_factor(ch).ok_or_else(|| {
            err(format!(
                "unexpected {ch:?} at position {pos}, expected I/X/Y/Z"
            ))
        })?;
        out = out.kronecker(&CMatrix::from_row_slice(2, 2, &f));
    }
    Ok(out)
}

fn sum_terms(terms: &[PauliTerm], n_qubits: usize) -> Result<CMatrix> {
    let d = 1usize << n_qubits;
    let mut h = CMatrix::zeros(d, d);
    for t in terms {
        if t.pauli.chars().count() != n_qubits {
            return Err(Error::PauliParse {
                input: t.pauli.clone(),
                reason: format!("length must equal n_qubits = {n_qubits}"),
            });
        }
        h += parse_pauli_string(&t.pauli, t.coeff)?;
    }
    Ok(h)
}

impl HamiltonianSpec {
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    fn check_qubits(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > 8 {
            return Err(Error::Config(format!(
                "n_qubits = {} outside 1..=8",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Dense free Hamiltonian.
    pub fn free_operator(&self) -> Result<CMatrix> {
        self.check_qubits()?;
        let mut h = sum_terms(&self.free_terms, self.n_qubits)?;
        if let Some(m) = &self.free_matrix {
            h += m.to_matrix(self.dim())?;
        }
        Ok(h)
    }

    /// Dense generators of the control channels, in order.
    pub fn channel_operators(&self) -> Result<Vec<CMatrix>> {
        self.check_qubits()?;
        self.channels
            .iter()
            .map(|ch| {
                if ch.terms.is_empty() && ch.matrix.is_none() {
                    return Err(Error::Config(format!(
                        "channel {:?} has neither terms nor matrix",
                        ch.label
                    )));
                }
                let mut h = sum_terms(&ch.terms, self.n_qubits)?;
                if let Some(m) = &ch.matrix {
                    h += m.to_matrix(self.dim())?;
                }
                Ok(h)
            })
            .collect()
    }
}

/// Bloch image of one control channel with its running-cost weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlChannel {
    pub label: String,
    pub scalar: f64,
    pub vector: Vec<f64>,
    pub weight: f64,
}

/// Compiled Hamiltonian `H(t) = H_free + Σ_l ν_l(t) H_l` in Bloch form.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianModel {
    pub dim: usize,
    pub free_scalar: f64,
    pub free_vector: Vec<f64>,
    pub channels: Vec<ControlChannel>,
}

impl HamiltonianModel {
    pub fn n_controls(&self) -> usize {
        self.channels.len()
    }

    /// Scalar part and vector of `H` for control values `nu`.
    pub fn field(&self, nu: &[f64]) -> (f64, Vec<f64>) {
        let mut h0 = self.free_scalar;
        let mut h = self.free_vector.clone();
        for (ch, &v) in self.channels.iter().zip(nu) {
            h0 += v * ch.scalar;
            for (a, b) in h.iter_mut().zip(&ch.vector) {
                *a += v * b;
            }
        }
        (h0, h)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.weight).collect()
    }
}

fn hermitian_deviation(h: &CMatrix) -> f64 {
    (h - h.adjoint()).iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn real_image(basis: &OperatorBasis, h: &CMatrix, label: &str) -> Result<(f64, Vec<f64>)> {
    let scale = h.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
    let dev = hermitian_deviation(h);
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian {
            label: label.to_string(),
            deviation: dev,
        });
    }
    let dec = basis.decompose(h)?;
    Ok((dec.scalar.re, dec.vector.iter().map(|z| z.re).collect()))
}

/// Compiles a spec into Bloch form. `weights` overrides the default
/// `w_l = (h⁰_l)² + ‖h_l‖²`.
pub fn compile_hamiltonian(
    spec: &HamiltonianSpec,
    basis: &OperatorBasis,
    weights: Option<&[f64]>,
) -> Result<HamiltonianModel> {
    let d = spec.dim();
    if basis.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: d,
        });
    }
    let s = spec.channels.len();
    if s == 0 || s > d * d {
        return Err(Error::Config(format!(
            "need between 1 and {} control channels, got {s}",
            d * d
        )));
    }
    if let Some(w) = weights {
        if w.len() != s {
            return Err(Error::Config(format!(
                "{} weights given for {s} channels",
                w.len()
            )));
        }
        if let Some(bad) = w.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Config(format!("weight {bad} must be positive")));
        }
    }
    let (free_scalar, free_vector) = real_image(basis, &spec.free_operator()?, "free")?;
    let mut channels = Vec::with_capacity(s);
    for (l, (ch, op)) in spec
        .channels
        .iter()
        .zip(spec.channel_operators()?)
        .enumerate()
    {
        let (scalar, vector) = real_image(basis, &op, &ch.label)?;
        let auto = scalar * scalar + vector.iter().map(|v| v * v).sum::<f64>();
        let weight = weights.map_or(auto, |w| w[l]);
        if !(weight > 0.0) {
            return Err(Error::Config(format!("channel {:?} is zero", ch.label)));
        }
        channels.push(ControlChannel {
            label: ch.label.clone(),
            scalar,
            vector,
            weight,
        });
    }
    check_independence(&channels)?;
    Ok(HamiltonianModel {
        dim: d,
        free_scalar,
        free_vector,
        channels,
    })
}

/// Rejects channels whose Bloch images are linearly dependent, naming the
/// channels that take part in a vanishing combination.
fn check_independence(channels: &[ControlChannel]) -> Result<()> {
    let s = channels.len();
    let rows = channels[0].vector.len() + 1;
    let a = DMatrix::from_fn(rows, s, |r, c| {
        if r == 0 {
            channels[c].scalar
        } else {
            channels[c].vector[r - 1]
        }
    });
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let mut involved = vec![false; s];
    let mut dependent = false;
    for (i, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= RANK_TOL * smax.max(1.0) {
            dependent = true;
            for c in 0..s {
                if v_t[(i, c)].abs() > 1e-8 {
                    involved[c] = true;
                }
            }
        }
    }
    if dependent {
        let labels = channels
            .iter()
            .zip(&involved)
            .filter(|(_, &on)| on)
            .map(|(c, _)| c.label.clone())
            .collect();
        return Err(Error::DependentChannels(labels));
    }
    Ok(())
}

/// Target gate with its global phase correction, in Bloch form.
#[derive(Debug, Clone, PartialEq)]
pub struct GateTarget {
    pub dim: usize,
    pub unitary: CMatrix,
    pub phase: f64,
    pub scalar: Complex64,
    pub vector: Vec<Complex64>,
}

impl GateTarget {
    /// Scalar followed by vector.
    pub fn state(&self) -> Vec<Complex64> {
        let mut z = vec![self.scalar];
        z.extend_from_slice(&self.vector);
        z
    }

    /// `e^{iα} U`.
    pub fn phased_unitary(&self) -> CMatrix {
        &self.unitary * Complex64::from_polar(1.0, self.phase)
    }
}

/// Largest entry of `U†U - I`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n))
        .iter()
        .fold(0.0, |a, z| a.max(z.norm()))
}

/// Bloch data of `e^{iα} U`. The phase is applied to the decomposition of `U`.
pub fn compile_gate_target(u: &CMatrix, phase: f64, basis: &OperatorBasis) -> Result<GateTarget> {
    let dec = basis.decompose(u)?;
    let deviation = unitarity_defect(u);
    if deviation > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    if !phase.is_finite() {
        return Err(Error::Config(format!("phase {phase} is not finite")));
    }
    let BlochDecomposition { scalar, vector } = dec.scaled(Complex64::from_polar(1.0, phase));
    Ok(GateTarget {
        dim: basis.dim(),
        unitary: u.clone(),
        phase,
        scalar,
        vector,
    })
}

/// Gates with a built-in definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GatePreset {
    Not,
    Hadamard,
    S,
    T,
    Cnot,
    Cz,
    Toffoli,
}

impl GatePreset {
    pub const ALL: [GatePreset; 7] = [
        GatePreset::Not,
        GatePreset::Hadamard,
        GatePreset::S,
        GatePreset::T,
        GatePreset::Cnot,
        GatePreset::Cz,
        GatePreset::Toffoli,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GatePreset::Not => "not",
            GatePreset::Hadamard => "h",
            GatePreset::S => "s",
            GatePreset::T => "t",
            GatePreset::Cnot => "cnot",
            GatePreset::Cz => "cz",
            GatePreset::Toffoli => "toffoli",
        }
    }

    pub fn n_qubits(self) -> usize {
        match self {
            GatePreset::Not | GatePreset::Hadamard | GatePreset::S | GatePreset::T => 1,
            GatePreset::Cnot | GatePreset::Cz => 2,
            GatePreset::Toffoli => 3,
        }
    }

    /// Phase `α` that makes `det(e^{iα} U) = 1` on one qubit, and the phases
    /// used for the multi-qubit gates.
    pub fn phase(self) -> f64 {
        match self {
            GatePreset::Not | GatePreset::Hadamard => FRAC_PI_2,
            GatePreset::S => -FRAC_PI_4,
            GatePreset::T => -FRAC_PI_8,
            GatePreset::Cnot | GatePreset::Cz => FRAC_PI_4,
            GatePreset::Toffoli => FRAC_PI_8,
        }
    }

    pub fn unitary(self) -> CMatrix {
        let z = |re: f64, im: f64| Complex64::new(re, im);
        match self {
            GatePreset::Not => {
                CMatrix::from_row_slice(2, 2, &[z(0., 0.), z(1., 0.), z(1., 0.), z(0., 0.)])
            }
            GatePreset::Hadamard => {
                let h = FRAC_1_SQRT_2;
                CMatrix::from_row_slice(2, 2, &[z(h, 0.), z(h, 0.), z(h, 0.), z(-h, 0.)])
            }
            GatePreset::S => {
                CMatrix::from_row_slice(2, 2, &[z(1., 0.), z(0., 0.), z(0., 0.), z(0., 1.)])
            }
            GatePreset::T => CMatrix::from_row_slice(
                2,
                2,
                &[
                    z(1., 0.),
                    z(0., 0.),
                    z(0., 0.),
                    Complex64::from_polar(1.0, FRAC_PI_4),
                ],
            ),
            GatePreset::Cnot => permutation(&[0, 1, 3, 2]),
            GatePreset::Cz => {
                let mut m = CMatrix::identity(4, 4);
                m[(3, 3)] = z(-1., 0.);
                m
            }
            GatePreset::Toffoli => permutation(&[0, 1, 2, 3, 4, 5, 7, 6]),
        }
    }
}

fn permutation(images: &[usize]) -> CMatrix {
    let n = images.len();
    let mut m = CMatrix::zeros(n, n);
    for (col, &row) in images.iter().enumerate() {
        m[(row, col)] = Complex64::new(1.0, 0.0);
    }
    m
}

impl fmt::Display for GatePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GatePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        GatePreset::ALL
            .into_iter()
            .find(|g| g.name() == lower || (lower == "ccnot" && *g == GatePreset::Toffoli))
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Unitary and recommended phase of a named gate.
pub fn preset_gate(name: &str) -> Result<(CMatrix, f64)> {
    let g: GatePreset = name.parse()?;
    Ok((g.unitary(), g.phase()))
}

/// Target gate: either a preset name or an explicit matrix, plus a phase.
/// Without an explicit phase a preset uses its recommended one and a matrix
/// uses zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
}

impl GateSpec {
    pub fn resolve(&self, d: usize) -> Result<(CMatrix, f64)> {
        let (u, default_phase) = match (&self.preset, &self.matrix) {
            (Some(name), None) => preset_gate(name)?,
            (None, Some(m)) => (m.to_matrix(d)?, 0.0),
            _ => {
                return Err(Error::Config(
                    "gate needs exactly one of `preset` or `matrix`".into(),
                ))
            }
        };
        if u.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: u.nrows(),
            });
        }
        Ok((u, self.phase.unwrap_or(default_phase)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    /// Control-cost weights, strictly decreasing.
    pub epsilon_schedule: Vec<f64>,
    /// Gate time.
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Per-channel weights replacing the default squared operator norms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Which terminal value the costate is pinned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalCostate {
    /// `p(T) = -g`
    #[default]
    Plain,
    /// `p(T) = -conj(g)`, kept only as an experiment toggle.
    Conjugated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Initial number of uniformly spaced mesh nodes.
    #[serde(default = "default_mesh")]
    pub mesh: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub terminal_costate: TerminalCostate,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

fn default_mesh() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-6
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            mesh: default_mesh(),
            tol: default_tol(),
            max_nodes: None,
            terminal_costate: TerminalCostate::Plain,
        }
    }
}

/// Everything needed for one synthesis run. The JSON form keeps the
/// Hamiltonian fields at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ConfigFile", into = "ConfigFile")]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub hamiltonian: HamiltonianSpec,
    pub gate: GateSpec,
    pub cost: CostSpec,
    pub solver: SolverSpec,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    n_qubits: usize,
    #[serde(default)]
    free_terms: Vec<PauliTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    free_matrix: Option<MatrixSpec>,
    channels: Vec<ChannelSpec>,
    gate: GateSpec,
    cost: CostSpec,
    #[serde(default)]
    solver: SolverSpec,
}

impl From<ConfigFile> for ExperimentConfig {
    fn from(f: ConfigFile) -> Self {
        Self {
            name: f.name,
            hamiltonian: HamiltonianSpec {
                n_qubits: f.n_qubits,
                free_terms: f.free_terms,
                free_matrix: f.free_matrix,
                channels: f.channels,
            },
            gate: f.gate,
            cost: f.cost,
            solver: f.solver,
        }
    }
}

impl From<ExperimentConfig> for ConfigFile {
    fn from(c: ExperimentConfig) -> Self {
        Self {
            name: c.name,
            n_qubits: c.hamiltonian.n_qubits,
            free_terms: c.hamiltonian.free_terms,
            free_matrix: c.hamiltonian.free_matrix,
            channels: c.hamiltonian.channels,
            gate: c.gate,
            cost: c.cost,
            solver: c.solver,
        }
    }
}

pub const DEFAULT_SCHEDULE: [f64; 4] = [5.0, 0.5, 0.05, 0.005];

impl ExperimentConfig {
    /// Checks the invariants that do not need the basis.
    pub fn validate(&self) -> Result<()> {
        let sched = &self.cost.epsilon_schedule;
        if sched.is_empty() {
            return Err(Error::Config("epsilon_schedule is empty".into()));
        }
        if let Some(e) = sched.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Config(format!("epsilon {e} must be positive")));
        }
        if sched.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(
                "epsilon_schedule must be strictly decreasing".into(),
            ));
        }
        let t = self.cost.horizon;
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Config(format!("T = {t} must be positive")));
        }
        if self.solver.mesh < 2 {
            return Err(Error::Config("solver.mesh needs at least 2 nodes".into()));
        }
        if !(self.solver.tol.is_finite() && self.solver.tol > 0.0) {
            return Err(Error::Config("solver.tol must be positive".into()));
        }
        if let Some(max) = self.solver.max_nodes {
            if max < self.solver.mesh {
                return Err(Error::Config("solver.max_nodes below solver.mesh".into()));
            }
        }
        self.hamiltonian.check_qubits()?;
        Ok(())
    }

    /// Parses and validates a JSON config. Errors carry the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn horizon(&self) -> f64 {
        self.cost.horizon
    }
}

fn one_qubit_system() -> HamiltonianSpec {
    // ω = 2, α = 1
    HamiltonianSpec {
        n_qubits: 1,
        free_terms: vec![PauliTerm::new("Z", 1.0), PauliTerm::new("Y", 1.0)],
        free_matrix: None,
        channels: vec![channel("x", "X")],
    }
}

fn channel(label: &str, pauli: &str) -> ChannelSpec {
    ChannelSpec {
        label: label.to_string(),
        terms: vec![PauliTerm::new(pauli, 1.0)],
        matrix: None,
    }
}

/// Two-qubit system with frequencies `ω₁, ω₂`, local term `α`, couplings `β₁`
/// (YY) and `β₂` (ZZ), controlled by XI, YI and IX.
pub fn two_qubit_system(w1: f64, w2: f64, alpha: f64, b1: f64, b2: f64) -> HamiltonianSpec {
    HamiltonianSpec {
        n_qubits: 2,
        free_terms: vec![
            PauliTerm::new("ZI", w1 / 2.0),
            PauliTerm::new("IZ", w2 / 2.0),
            PauliTerm::new("IY", alpha),
            PauliTerm::new("YY", b1),
            PauliTerm::new("ZZ", b2),
        ],
        free_matrix: None,
        channels: vec![
            channel("xi", "XI"),
            channel("yi", "YI"),
            channel("ix", "IX"),
        ],
    }
}

fn three_qubit_system() -> HamiltonianSpec {
    let (w1, w2, w3) = (1.0, 2.0, 3.0);
    HamiltonianSpec {
        n_qubits: 3,
        free_terms: vec![
            PauliTerm::new("ZII", w1 / 2.0),
            PauliTerm::new("IZI", w2 / 2.0),
            PauliTerm::new("IIZ", w3 / 2.0),
            PauliTerm::new("YYI", 1.0),
            PauliTerm::new("ZZI", 3.0),
            PauliTerm::new("IYY", 5.0),
            PauliTerm::new("IZZ", 1.5),
        ],
        free_matrix: None,
        channels: vec![
            channel("xii", "XII"),
            channel("ixi", "IXI"),
            channel("yii", "YII"),
            channel("iiy", "IIY"),
        ],
    }
}

/// Full configuration of a shipped experiment.
pub fn preset_experiment(name: &str) -> Result<ExperimentConfig> {
    let gate: GatePreset = name.parse()?;
    let (hamiltonian, horizon, mesh) = match gate {
        GatePreset::Not | GatePreset::Hadamard => (one_qubit_system(), 1.0, 500),
        GatePreset::S => (one_qubit_system(), 0.6, 500),
        GatePreset::T => (one_qubit_system(), 0.3, 500),
        GatePreset::Cz => (two_qubit_system(2.0, 2.0, 1.0, 0.5, 0.75), 9.8, 250),
        GatePreset::Cnot => (two_qubit_system(3.0, 4.0, 1.0, 1.25, 1.25), 4.75, 250),
        GatePreset::Toffoli => (three_qubit_system(), 7.44, 100),
    };
    // At 1e-6 the three-qubit mesh grows past 2000 nodes; 1e-4 keeps it
    // under 800 with first integrals still near 5e-7.
    let tol = if matches!(gate, GatePreset::Toffoli) {
        1e-4
    } else {
        default_tol()
    };
    Ok(ExperimentConfig {
        name: Some(gate.name().to_string()),
        hamiltonian,
        gate: GateSpec {
            preset: Some(gate.name().to_string()),
            matrix: None,
            phase: Some(gate.phase()),
        },
        cost: CostSpec {
            epsilon_schedule: DEFAULT_SCHEDULE.to_vec(),
            horizon,
            weights: None,
        },
        solver: SolverSpec {
            mesh,
            tol,
            ..SolverSpec::default()
        },
    })
}
