//! Truncated Fock basis for two bosonic modes and a three-level system,
//! plus the elementary operators acting on it.
//!
//! Tensor order is fixed as (mode a) ⊗ (mode b) ⊗ (qutrit). The linear index of
//! `|n_a, n_b, ℓ⟩` is `ℓ + 3·(n_b + (cutoff_b + 1)·n_a)` with `g = 0, e = 1, f = 2`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Qutrit level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    G,
    E,
    F,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G, Level::E, Level::F];

    pub fn ordinal(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
            Level::F => 2,
        }
    }

    pub fn from_ordinal(k: usize) -> Option<Level> {
        Level::ALL.get(k).copied()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Level::G => "g",
            Level::E => "e",
            Level::F => "f",
        };
        f.write_str(s)
    }
}

/// Bare product state `|n_a, n_b, level⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub n_a: usize,
    pub n_b: usize,
    pub level: Level,
}

impl BasisState {
    pub const fn new(n_a: usize, n_b: usize, level: Level) -> Self {
        BasisState { n_a, n_b, level }
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{}>", self.n_a, self.n_b, self.level)
    }
}

/// Photon-number cutoffs of the two modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    cutoff_a: usize,
    cutoff_b: usize,
}

/// Checked constructor taking signed cutoffs, so that negative input from
/// configuration files is reported instead of wrapping.
pub fn build_basis(cutoff_a: i64, cutoff_b: i64) -> Result<BasisSpec> {
    if cutoff_a < 0 || cutoff_b < 0 {
        return Err(Error::InvalidBasis(format!(
            "cutoffs must be non-negative, got ({cutoff_a}, {cutoff_b})"
        )));
    }
    Ok(BasisSpec::new(cutoff_a as usize, cutoff_b as usize))
}

impl BasisSpec {
    pub const fn new(cutoff_a: usize, cutoff_b: usize) -> Self {
        BasisSpec { cutoff_a, cutoff_b }
    }

    /// Default truncation for an experiment populating Fock states up to `n_max`.
    pub const fn for_photon_number(n_max: usize) -> Self {
        BasisSpec::new(n_max + 4, n_max + 4)
    }

    pub fn cutoff_a(&self) -> usize {
        self.cutoff_a
    }

    pub fn cutoff_b(&self) -> usize {
        self.cutoff_b
    }

    pub fn dim(&self) -> usize {
        3 * (self.cutoff_a + 1) * (self.cutoff_b + 1)
    }

    pub fn contains(&self, s: BasisState) -> bool {
        s.n_a <= self.cutoff_a && s.n_b <= self.cutoff_b
    }

    /// Linear index of a basis state.
    pub fn index(&self, s: BasisState) -> Result<usize> {
        if !self.contains(s) {
            return Err(Error::OutOfBasis(s.to_string()));
        }
        Ok(self.index_unchecked(s))
    }

    pub(crate) fn index_unchecked(&self, s: BasisState) -> usize {
        s.level.ordinal() + 3 * (s.n_b + (self.cutoff_b + 1) * s.n_a)
    }

    /// Basis state at a linear index. Panics if `index >= dim`.
    pub fn state(&self, index: usize) -> BasisState {
        assert!(index < self.dim(), "index {index} out of range");
        let level = Level::from_ordinal(index % 3).expect("ordinal < 3");
        let rest = index / 3;
        let n_b = rest % (self.cutoff_b + 1);
        let n_a = rest / (self.cutoff_b + 1);
        BasisState { n_a, n_b, level }
    }

    /// All basis states in index order.
    pub fn states(&self) -> impl Iterator<Item = BasisState> + '_ {
        (0..self.dim()).map(move |i| self.state(i))
    }

    /// Normalised unit vector for a bare state.
    pub fn ket(&self, s: BasisState) -> Result<StateVector> {
        let mut v = DVector::zeros(self.dim());
        v[self.index(s)?] = Complex64::new(1.0, 0.0);
        Ok(StateVector(v))
    }

    /// Normalised superposition `Σ c_k |s_k⟩ / ‖·‖`.
    pub fn superposition(&self, terms: &[(Complex64, BasisState)]) -> Result<StateVector> {
        let mut v = DVector::zeros(self.dim());
        for &(c, s) in terms {
            v[self.index(s)?] += c;
        }
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::InvalidTarget("superposition has zero norm".into()));
        }
        Ok(StateVector(v / Complex64::new(n, 0.0)))
    }

    /// Equal-weight NOON target `(|N,0,g⟩ + |0,N,g⟩)/√2`.
    pub fn noon(&self, n: usize) -> Result<StateVector> {
        if n == 0 {
            return Err(Error::InvalidTarget("NOON photon number must be ≥ 1".into()));
        }
        let one = Complex64::new(1.0, 0.0);
        self.superposition(&[
            (one, BasisState::new(n, 0, Level::G)),
            (one, BasisState::new(0, n, Level::G)),
        ])
    }
}

/// Bosonic mode selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    A,
    B,
}

/// Ladder operator kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LadderKind {
    Annihilate,
    Create,
    Number,
}

/// Qutrit transition pair `jk`, `j` being the higher level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QutritPair {
    Eg,
    Fg,
    Fe,
}

impl QutritPair {
    pub const ALL: [QutritPair; 3] = [QutritPair::Eg, QutritPair::Fg, QutritPair::Fe];

    /// `(upper, lower)` levels of the pair.
    pub fn levels(self) -> (Level, Level) {
        match self {
            QutritPair::Eg => (Level::E, Level::G),
            QutritPair::Fg => (Level::F, Level::G),
            QutritPair::Fe => (Level::F, Level::E),
        }
    }
}

impl fmt::Display for QutritPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QutritPair::Eg => "eg",
            QutritPair::Fg => "fg",
            QutritPair::Fe => "fe",
        };
        f.write_str(s)
    }
}

/// Qutrit operator kind on a transition pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QutritOpKind {
    /// `|j⟩⟨k| + |k⟩⟨j|`
    SigmaX,
    /// `|j⟩⟨j| − |k⟩⟨k|`
    SigmaZ,
    /// `|k⟩⟨j|`
    Lower,
    /// `|j⟩⟨j|`
    ProjectUpper,
}

/// 3×3 matrix of a qutrit operator, indexed by level ordinal.
pub fn qutrit_matrix(pair: QutritPair, kind: QutritOpKind) -> [[f64; 3]; 3] {
    let (j, k) = pair.levels();
    let (j, k) = (j.ordinal(), k.ordinal());
    let mut m = [[0.0; 3]; 3];
    match kind {
        QutritOpKind::SigmaX => {
            m[j][k] = 1.0;
            m[k][j] = 1.0;
        }
        QutritOpKind::SigmaZ => {
            m[j][j] = 1.0;
            m[k][k] = -1.0;
        }
        QutritOpKind::Lower => m[k][j] = 1.0,
        QutritOpKind::ProjectUpper => m[j][j] = 1.0,
    }
    m
}

/// Operator on the truncated space.
///
/// Every operator of this model (ladder operators, Pauli-like qutrit operators,
/// projectors and the Hamiltonian) has real matrix elements in the bare basis,
/// so entries are stored as `f64`; states and density matrices are complex.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix(DMatrix<f64>);

impl OperatorMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(OperatorMatrix(m))
    }

    pub fn zeros(dim: usize) -> Self {
        OperatorMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        OperatorMatrix(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Matrix element between two bare states.
    pub fn element(&self, spec: &BasisSpec, bra: BasisState, ket: BasisState) -> Result<f64> {
        self.check_dim(spec.dim())?;
        Ok(self.0[(spec.index(bra)?, spec.index(ket)?)])
    }

    /// Conjugate transpose (a transpose for real storage).
    pub fn adjoint(&self) -> Self {
        OperatorMatrix(self.0.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        OperatorMatrix(&self.0 * s)
    }

    /// `max |A_ij − A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Whether every off-diagonal entry vanishes.
    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)] == 0.0))
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_dim(psi.dim())?;
        let re = &self.0 * psi.0.map(|c| c.re);
        let im = &self.0 * psi.0.map(|c| c.im);
        Ok(StateVector(DVector::from_fn(re.len(), |i, _| {
            Complex64::new(re[i], im[i])
        })))
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 * &rhs.0)
    }
}

/// Pure state on the truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(pub(crate) DVector<Complex64>);

impl StateVector {
    pub fn from_vector(v: DVector<Complex64>) -> Self {
        StateVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn vector(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<Complex64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        StateVector(&self.0 / Complex64::new(n, 0.0))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn amplitude(&self, spec: &BasisSpec, s: BasisState) -> Result<Complex64> {
        Ok(self.0[spec.index(s)?])
    }
}

fn ladder_element(kind: LadderKind, n_out: usize, n_in: usize) -> f64 {
    match kind {
        LadderKind::Annihilate if n_out + 1 == n_in => (n_in as f64).sqrt(),
        LadderKind::Create if n_in + 1 == n_out => (n_out as f64).sqrt(),
        LadderKind::Number if n_in == n_out => n_in as f64,
        _ => 0.0,
    }
}

/// `a`, `a†`, `a†a` (or the mode-b analogues) on the full space.
pub fn mode_operator(spec: &BasisSpec, mode: Mode, kind: LadderKind) -> OperatorMatrix {
    let dim = spec.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for s in spec.states() {
        let col = spec.index_unchecked(s);
        let n_in = match mode {
            Mode::A => s.n_a,
            Mode::B => s.n_b,
        };
        let candidates = [n_in.wrapping_sub(1), n_in, n_in + 1];
        for n_out in candidates {
            let (cut, out) = match mode {
                Mode::A => (spec.cutoff_a, BasisState { n_a: n_out, ..s }),
                Mode::B => (spec.cutoff_b, BasisState { n_b: n_out, ..s }),
            };
            if n_out > cut {
                continue;
            }
            let v = ladder_element(kind, n_out, n_in);
            if v != 0.0 {
                m[(spec.index_unchecked(out), col)] = v;
            }
        }
    }
    OperatorMatrix(m)
}

/// Qutrit operator embedded as identity on both photon factors.
pub fn qutrit_operator(spec: &BasisSpec, pair: QutritPair, kind: QutritOpKind) -> OperatorMatrix {
    embed_qutrit(spec, &qutrit_matrix(pair, kind))
}

/// Embeds a 3×3 qutrit matrix as `1_a ⊗ 1_b ⊗ q`.
pub fn embed_qutrit(spec: &BasisSpec, q: &[[f64; 3]; 3]) -> OperatorMatrix {
    let dim = spec.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for block in 0..dim / 3 {
        for (r, row) in q.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m[(3 * block + r, 3 * block + c)] = v;
                }
            }
        }
    }
    OperatorMatrix(m)
}
