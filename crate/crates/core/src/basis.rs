//! Generalized Gell-Mann operators, Bloch decomposition and SU(d) structure
//! constants.
//!
//! # Component ordering
//!
//! Component indices run over `1..=d²-1`. Off-diagonal operators come first,
//! grouped by level pair `(m, k)` with `m < k` in lexicographic order; for each
//! pair the symmetric operator precedes the antisymmetric one. The `d - 1`
//! diagonal operators close the list. For `d = 4`:
//!
//! | index | operator   | index | operator   | index | operator |
//! |-------|------------|-------|------------|-------|----------|
//! | 1     | sym(1,2)   | 6     | asym(1,4)  | 11    | sym(3,4) |
//! | 2     | asym(1,2)  | 7     | sym(2,3)   | 12    | asym(3,4)|
//! | 3     | sym(1,3)   | 8     | asym(2,3)  | 13    | diag(1)  |
//! | 4     | asym(1,3)  | 9     | sym(2,4)   | 14    | diag(2)  |
//! | 5     | sym(1,4)   | 10    | asym(2,4)  | 15    | diag(3)  |
//!
//! For `d = 2` this is the Pauli triple `σ₁, σ₂, σ₃`. The ordering is tagged
//! `interleaved-v1` in every file written by this crate.
//!
//! In-memory vectors are zero-based: slot `j - 1` holds component `j`.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::CMatrix;

/// Tag stored with every serialized artifact that depends on the ordering.
pub const ORDERING_TAG: &str = "interleaved-v1";

/// Structure constants below this magnitude are stored as exact zeros.
pub const DEDUP_THRESHOLD: f64 = 1e-14;

const CACHE_VERSION: u32 = 1;

/// Family and levels of a Gell-Mann operator. Levels are one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    /// `|m⟩⟨k| + |k⟩⟨m|`
    Symmetric { m: usize, k: usize },
    /// `-i|m⟩⟨k| + i|k⟩⟨m|`
    Antisymmetric { m: usize, k: usize },
    /// `√(2/(l(l+1))) (Σ_{j≤l} |j⟩⟨j| - l|l+1⟩⟨l+1|)`
    Diagonal { l: usize },
}

/// Component index (one-based) of an operator in the interleaved ordering.
pub fn basis_index(kind: OperatorKind, d: usize) -> Result<usize> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    match kind {
        OperatorKind::Symmetric { m, k } | OperatorKind::Antisymmetric { m, k } => {
            if !(1 <= m && m < k && k <= d) {
                return Err(Error::IndexOutOfRange(format!(
                    "level pair ({m},{k}) for d = {d}"
                )));
            }
            let pair = (m - 1) * d - (m - 1) * m / 2 + (k - m - 1);
            let offset = usize::from(matches!(kind, OperatorKind::Antisymmetric { .. }));
            Ok(2 * pair + 1 + offset)
        }
        OperatorKind::Diagonal { l } => {
            if !(1..d).contains(&l) {
                return Err(Error::IndexOutOfRange(format!(
                    "diagonal level {l} for d = {d}"
                )));
            }
            Ok(d * (d - 1) + l)
        }
    }
}

/// Inverse of [`basis_index`].
pub fn operator_kind(index: usize, d: usize) -> Result<OperatorKind> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if index == 0 || index > d * d - 1 {
        return Err(Error::IndexOutOfRange(format!(
            "component {index} for d = {d}"
        )));
    }
    let off_diagonal = d * (d - 1);
    if index > off_diagonal {
        return Ok(OperatorKind::Diagonal {
            l: index - off_diagonal,
        });
    }
    let pair = (index - 1) / 2;
    let symmetric = (index - 1) % 2 == 0;
    let mut remaining = pair;
    for m in 1..d {
        let row = d - m;
        if remaining < row {
            let k = m + 1 + remaining;
            return Ok(if symmetric {
                OperatorKind::Symmetric { m, k }
            } else {
                OperatorKind::Antisymmetric { m, k }
            });
        }
        remaining -= row;
    }
    unreachable!("index {index} within the off-diagonal range")
}

/// One basis operator stored as `(row, col, value)` triplets, zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisOperator {
    dim: usize,
    kind: OperatorKind,
    entries: Vec<(usize, usize, Complex64)>,
}

impl BasisOperator {
    fn new(kind: OperatorKind, d: usize) -> Self {
        let i = Complex64::i();
        let entries = match kind {
            OperatorKind::Symmetric { m, k } => vec![
                (m - 1, k - 1, Complex64::new(1.0, 0.0)),
                (k - 1, m - 1, Complex64::new(1.0, 0.0)),
            ],
            OperatorKind::Antisymmetric { m, k } => vec![(m - 1, k - 1, -i), (k - 1, m - 1, i)],
            OperatorKind::Diagonal { l } => {
                let scale = (2.0 / (l * (l + 1)) as f64).sqrt();
                let mut e: Vec<_> = (0..l).map(|j| (j, j, Complex64::new(scale, 0.0))).collect();
                e.push((l, l, Complex64::new(-(l as f64) * scale, 0.0)));
                e
            }
        };
        Self {
            dim: d,
            kind,
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    /// `tr[Υ X]`.
    pub fn trace_product(&self, x: &CMatrix) -> Complex64 {
        self.entries.iter().map(|&(r, c, v)| v * x[(c, r)]).sum()
    }
}

/// The `d² - 1` generalized Gell-Mann operators in interleaved order.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis {
    dim: usize,
    ops: Vec<BasisOperator>,
}

/// Scalar part and generalized Bloch vector of an operator:
/// `X = x⁰ I + √(d/2) Σ_j x_j Υ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochDecomposition {
    pub scalar: Complex64,
    pub vector: Vec<Complex64>,
}

impl BlochDecomposition {
    /// `|x⁰|² + ‖x‖²`, equal to `tr[X†X]/d`.
    pub fn norm_sqr(&self) -> f64 {
        self.scalar.norm_sqr() + self.vector.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Scalar followed by the vector, the layout used by the dynamics.
    pub fn to_state(&self) -> Vec<Complex64> {
        let mut z = Vec::with_capacity(self.vector.len() + 1);
        z.push(self.scalar);
        z.extend_from_slice(&self.vector);
        z
    }

    pub fn from_state(z: &[Complex64]) -> Self {
        Self {
            scalar: z[0],
            vector: z[1..].to_vec(),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            scalar: self.scalar * c,
            vector: self.vector.iter().map(|v| v * c).collect(),
        }
    }
}

/// Builds the basis for dimension `d ≥ 2`.
pub fn build_basis(d: usize) -> Result<OperatorBasis> {
    OperatorBasis::new(d)
}

impl OperatorBasis {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let ops = (1..d * d)
            .map(|index| operator_kind(index, d).map(|kind| BasisOperator::new(kind, d)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: d, ops })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of operators, `d² - 1`.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn operators(&self) -> &[BasisOperator] {
        &self.ops
    }

    /// Operator with one-based component index `index`.
    pub fn operator(&self, index: usize) -> Result<&BasisOperator> {
        index
            .checked_sub(1)
            .and_then(|i| self.ops.get(i))
            .ok_or_else(|| {
                Error::IndexOutOfRange(format!("component {index} for d = {}", self.dim))
            })
    }

    pub fn index_of(&self, kind: OperatorKind) -> Result<usize> {
        basis_index(kind, self.dim)
    }

    fn check_square(&self, x: &CMatrix) -> Result<()> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: if x.nrows() != self.dim {
                    x.nrows()
                } else {
                    x.ncols()
                },
            });
        }
        Ok(())
    }

    /// `x⁰ = tr[X]/d`, `x_k = tr[Υ_k X]/√(2d)`.
    pub fn decompose(&self, x: &CMatrix) -> Result<BlochDecomposition> {
        self.check_square(x)?;
        let d = self.dim as f64;
        let norm = (2.0 * d).sqrt();
        Ok(BlochDecomposition {
            scalar: x.trace() / d,
            vector: self
                .ops
                .iter()
                .map(|op| op.trace_product(x) / norm)
                .collect(),
        })
    }

    /// `X = x⁰ I + √(d/2) Σ_j x_j Υ_j`.
    pub fn reconstruct(&self, dec: &BlochDecomposition) -> Result<CMatrix> {
        if dec.vector.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: dec.vector.len(),
            });
        }
        let scale = (self.dim as f64 / 2.0).sqrt();
        let mut x = CMatrix::identity(self.dim, self.dim) * dec.scalar;
        for (op, &c) in self.ops.iter().zip(&dec.vector) {
            for &(r, col, v) in &op.entries {
                x[(r, col)] += v * c * scale;
            }
        }
        Ok(x)
    }
}

/// Free-function form of [`OperatorBasis::decompose`].
pub fn decompose(x: &CMatrix, basis: &OperatorBasis) -> Result<BlochDecomposition> {
    basis.decompose(x)
}

/// Free-function form of [`OperatorBasis::reconstruct`].
pub fn reconstruct(dec: &BlochDecomposition, basis: &OperatorBasis) -> Result<CMatrix> {
    basis.reconstruct(dec)
}

/// One stored tensor entry; `k`, `m`, `l` are one-based component indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub k: usize,
    pub m: usize,
    pub l: usize,
    pub value: f64,
}

/// Sparse symmetric (`g`) and antisymmetric (`f`) structure constants,
/// `Υ_k Υ_m = (2/d) δ_km I + Σ_l (g_kml + i f_kml) Υ_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    g: Vec<Triplet>,
    f: Vec<Triplet>,
    /// Zero-based `(k, m, l, g + i f)`, sorted by `(k, m, l)`.
    coupling: Vec<(usize, usize, usize, Complex64)>,
    /// `coupling[offsets[k n + m]..offsets[k n + m + 1]]` holds pair `(k, m)`.
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    d: usize,
    ordering: String,
    g: Vec<(usize, usize, usize, f64)>,
    f: Vec<(usize, usize, usize, f64)>,
}

/// Free-function form of [`StructureConstants::compute`].
pub fn structure_constants(basis: &OperatorBasis) -> StructureConstants {
    StructureConstants::compute(basis)
}

impl StructureConstants {
    /// Evaluates `g_kml = ¼ tr[{Υ_k,Υ_m} Υ_l]` and `f_kml = (1/4i) tr[[Υ_k,Υ_m] Υ_l]`.
    pub fn compute(basis: &OperatorBasis) -> Self {
        let n = basis.len();
        let dense: Vec<CMatrix> = basis.ops.iter().map(BasisOperator::to_dense).collect();
        let mut g = Vec::new();
        let mut f = Vec::new();
        for k in 0..n {
            for m in 0..n {
                let km = &dense[k] * &dense[m];
                let mk = &dense[m] * &dense[k];
                let anti = &km + &mk;
                let comm = &km - &mk;
                for (l, op) in basis.ops.iter().enumerate() {
                    let gv = op.trace_product(&anti) / 4.0;
                    let fv = op.trace_product(&comm) / Complex64::new(0.0, 4.0);
                    debug_assert!(gv.im.abs() <= 1e-12 && fv.im.abs() <= 1e-12);
                    if gv.re.abs() >= DEDUP_THRESHOLD {
                        g.push(Triplet {
                            k: k + 1,
                            m: m + 1,
                            l: l + 1,
                            value: gv.re,
                        });
                    }
                    if fv.re.abs() >= DEDUP_THRESHOLD {
                        f.push(Triplet {
                            k: k + 1,
                            m: m + 1,
                            l: l + 1,
                            value: fv.re,
                        });
                    }
                }
            }
        }
        Self::from_triplets(basis.dim, g, f)
    }

    fn from_triplets(dim: usize, g: Vec<Triplet>, f: Vec<Triplet>) -> Self {
        let n = dim * dim - 1;
        let mut coupling: Vec<(usize, usize, usize, Complex64)> = Vec::new();
        for t in &g {
            coupling.push((t.k - 1, t.m - 1, t.l - 1, Complex64::new(t.value, 0.0)));
        }
        for t in &f {
            coupling.push((t.k - 1, t.m - 1, t.l - 1, Complex64::new(0.0, t.value)));
        }
        coupling.sort_by_key(|&(k, m, l, _)| (k, m, l));
        coupling.dedup_by(|b, a| {
            if (a.0, a.1, a.2) == (b.0, b.1, b.2) {
                a.3 += b.3;
                true
            } else {
                false
            }
        });
        let mut offsets = vec![0; n * n + 1];
        for &(k, m, _, _) in &coupling {
            offsets[k * n + m + 1] += 1;
        }
        for i in 0..n * n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            dim,
            g,
            f,
            coupling,
            offsets,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of Bloch components, `d² - 1`.
    pub fn len(&self) -> usize {
        self.dim * self.dim - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn g(&self) -> &[Triplet] {
        &self.g
    }

    pub fn f(&self) -> &[Triplet] {
        &self.f
    }

    /// Zero-based `(k, m, l, g_kml + i f_kml)` over all nonzero entries.
    pub fn coupling(&self) -> &[(usize, usize, usize, Complex64)] {
        &self.coupling
    }

    /// Entries of [`coupling`](Self::coupling) for a zero-based pair `(k, m)`.
    pub fn pair(&self, k: usize, m: usize) -> &[(usize, usize, usize, Complex64)] {
        let n = self.len();
        &self.coupling[self.offsets[k * n + m]..self.offsets[k * n + m + 1]]
    }

    /// Lookup of `g_kml` by one-based indices.
    pub fn g_value(&self, k: usize, m: usize, l: usize) -> f64 {
        self.lookup(k, m, l).re
    }

    /// Lookup of `f_kml` by one-based indices.
    pub fn f_value(&self, k: usize, m: usize, l: usize) -> f64 {
        self.lookup(k, m, l).im
    }

    fn lookup(&self, k: usize, m: usize, l: usize) -> Complex64 {
        let n = self.len();
        if k == 0 || m == 0 || l == 0 || k > n || m > n || l > n {
            return Complex64::new(0.0, 0.0);
        }
        self.pair(k - 1, m - 1)
            .iter()
            .find(|e| e.2 == l - 1)
            .map_or(Complex64::new(0.0, 0.0), |e| e.3)
    }

    /// Expansion of `Υ_k Υ_m` (one-based) as a Bloch decomposition:
    /// scalar `(2/d) δ_km`, vector `g_km· + i f_km·`.
    pub fn product_expand(&self, k: usize, m: usize) -> Result<BlochDecomposition> {
        let n = self.len();
        if k == 0 || m == 0 || k > n || m > n {
            return Err(Error::IndexOutOfRange(format!(
                "pair ({k},{m}) for d = {}",
                self.dim
            )));
        }
        let mut vector = vec![Complex64::new(0.0, 0.0); n];
        for &(_, _, l, c) in self.pair(k - 1, m - 1) {
            vector[l] = c;
        }
        let scalar = if k == m {
            Complex64::new(2.0 / self.dim as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        Ok(BlochDecomposition { scalar, vector })
    }

    pub fn to_json(&self) -> String {
        let file = CacheFile {
            version: CACHE_VERSION,
            d: self.dim,
            ordering: ORDERING_TAG.to_string(),
            g: self.g.iter().map(|t| (t.k, t.m, t.l, t.value)).collect(),
            f: self.f.iter().map(|t| (t.k, t.m, t.l, t.value)).collect(),
        };
        serde_json::to_string(&file).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let file: CacheFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.version != CACHE_VERSION {
            return Err(format!("unsupported cache version {}", file.version));
        }
        if file.ordering != ORDERING_TAG {
            return Err(format!("unexpected ordering tag {:?}", file.ordering));
        }
        if file.d < 2 {
            return Err(format!("invalid dimension {}", file.d));
        }
        let n = file.d * file.d - 1;
        let convert = |rows: Vec<(usize, usize, usize, f64)>| {
            rows.into_iter()
                .map(|(k, m, l, value)| {
                    let ok = [k, m, l].iter().all(|&i| (1..=n).contains(&i));
                    if !ok || !value.is_finite() {
                        return Err(format!("bad entry ({k},{m},{l},{value})"));
                    }
                    Ok(Triplet { k, m, l, value })
                })
                .collect::<std::result::Result<Vec<_>, String>>()
        };
        let g = convert(file.g)?;
        let f = convert(file.f)?;
        Ok(Self::from_triplets(file.d, g, f))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        // Write then rename so concurrent readers never see a partial file.
        let tmp = path.with_extension(format!("json.{}.tmp", std::process::id()));
        fs::write(&tmp, self.to_json()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|msg| Error::format(path, msg))
    }

    /// Cache file name for dimension `d` inside a cache directory.
    pub fn cache_path(dir: &Path, d: usize) -> PathBuf {
        dir.join(format!("su{d}-{ORDERING_TAG}.json"))
    }

    /// Loads the constants from `dir` if a valid cache file exists, otherwise
    /// computes them and writes the cache. Without a directory this is
    /// [`StructureConstants::compute`].
    pub fn cached(basis: &OperatorBasis, dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Ok(Self::compute(basis));
        };
        let path = Self::cache_path(dir, basis.dim());
        if path.exists() {
            match Self::load(&path) {
                Ok(sc) if sc.dim == basis.dim() => return Ok(sc),
                Ok(_) => log::warn!("{}: dimension mismatch, recomputing", path.display()),
                Err(e) => log::warn!("ignoring unreadable cache: {e}"),
            }
        }
        let sc = Self::compute(basis);
        sc.save(&path)?;
        Ok(sc)
    }
}
