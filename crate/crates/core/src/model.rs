//! System Hamiltonian `H = H₀ + V (+ crosstalk)` in units of `ω_a` with `ħ = 1`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{qutrit_matrix, BasisSpec, BasisState, Level, OperatorMatrix, QutritOpKind, QutritPair};

/// Model frequencies and couplings, all in units of `ω_a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_eg: f64,
    pub omega_fg: f64,
    pub g_a: f64,
    pub g_b: f64,
    /// Mixing angle between transverse (`σ_x`) and longitudinal (`σ_z`) coupling.
    pub theta: f64,
    /// Direct resonator–resonator coupling.
    pub g_ab: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            omega_a: 1.0,
            omega_b: 1.7,
            omega_eg: 2.0,
            omega_fg: 3.4,
            g_a: 0.05,
            g_b: 0.05,
            theta: std::f64::consts::FRAC_PI_6,
            g_ab: 0.0,
        }
    }
}

impl SystemParams {
    /// Checks the hard invariants. Level ordering `ω_fg ≥ ω_eg` is only
    /// warned about, since sweeps legitimately pass through it.
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega_a,
            self.omega_b,
            self.omega_eg,
            self.omega_fg,
            self.g_a,
            self.g_b,
            self.theta,
            self.g_ab,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if self.omega_a <= 0.0 || self.omega_b <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "mode frequencies must be positive (omega_a = {}, omega_b = {})",
                self.omega_a, self.omega_b
            )));
        }
        if self.omega_eg < 0.0 {
            return Err(Error::InvalidParams(format!(
                "omega_eg must be non-negative, got {}",
                self.omega_eg
            )));
        }
        if self.g_a < 0.0 || self.g_b < 0.0 || self.g_ab < 0.0 {
            return Err(Error::InvalidParams(format!(
                "couplings must be non-negative (g_a = {}, g_b = {}, g_ab = {})",
                self.g_a, self.g_b, self.g_ab
            )));
        }
        if self.omega_fg < self.omega_eg {
            log::warn!(
                "level ordering inverted: omega_fg = {} < omega_eg = {}",
                self.omega_fg,
                self.omega_eg
            );
        }
        Ok(())
    }

    /// Bare qutrit energy of a level.
    pub fn level_energy(&self, level: Level) -> f64 {
        match level {
            Level::G => 0.0,
            Level::E => self.omega_eg,
            Level::F => self.omega_fg,
        }
    }

    /// Bare energy of a product state.
    pub fn bare_energy(&self, s: BasisState) -> f64 {
        s.n_a as f64 * self.omega_a + s.n_b as f64 * self.omega_b + self.level_energy(s.level)
    }
}

/// Per-transition couplings `g^a_{jk}`, `g^b_{jk}` indexed as `[eg, fg, fe]`.
///
/// The main API uses equal couplings on the three transitions; this type is
/// the general form accepted by [`build_v_general`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionCouplings {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl TransitionCouplings {
    pub fn uniform(g_a: f64, g_b: f64) -> Self {
        TransitionCouplings {
            a: [g_a; 3],
            b: [g_b; 3],
        }
    }
}

/// `H₀ = ω_a a†a + ω_b b†b + ω_eg|e⟩⟨e| + ω_fg|f⟩⟨f|`.
pub fn build_h0(params: &SystemParams, spec: &BasisSpec) -> OperatorMatrix {
    let dim = spec.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for (i, s) in spec.states().enumerate() {
        m[(i, i)] = params.bare_energy(s);
    }
    OperatorMatrix::from_matrix(m).expect("square")
}

/// Qutrit factor `Σ_{jk} g_{jk}(cosθ σ_x^{jk} + sinθ σ_z^{jk})`, symmetric by construction.
fn qutrit_coupling(theta: f64, g: &[f64; 3]) -> [[f64; 3]; 3] {
    let (s, c) = theta.sin_cos();
    let mut q = [[0.0; 3]; 3];
    for (pair, &gk) in QutritPair::ALL.iter().zip(g) {
        let sx = qutrit_matrix(*pair, QutritOpKind::SigmaX);
        let sz = qutrit_matrix(*pair, QutritOpKind::SigmaZ);
        for r in 0..3 {
            for col in 0..3 {
                q[r][col] += gk * (c * sx[r][col] + s * sz[r][col]);
            }
        }
    }
    q
}

/// Interaction with per-transition couplings:
/// `V = (a + a†) ⊗ Q_a + (b + b†) ⊗ Q_b`.
pub fn build_v_general(theta: f64, couplings: &TransitionCouplings, spec: &BasisSpec) -> OperatorMatrix {
    let qa = qutrit_coupling(theta, &couplings.a);
    let qb = qutrit_coupling(theta, &couplings.b);
    let dim = spec.dim();
    let mut m = DMatrix::zeros(dim, dim);
    // Each unordered pair of photon configurations is visited once and both
    // (i, j) and (j, i) receive the same product, so H is exactly symmetric.
    for s in spec.states().filter(|s| s.level == Level::G) {
        if s.n_a < spec.cutoff_a() {
            let t = BasisState { n_a: s.n_a + 1, ..s };
            fill_block(&mut m, spec, s, t, ((s.n_a + 1) as f64).sqrt(), &qa);
        }
        if s.n_b < spec.cutoff_b() {
            let t = BasisState { n_b: s.n_b + 1, ..s };
            fill_block(&mut m, spec, s, t, ((s.n_b + 1) as f64).sqrt(), &qb);
        }
    }
    OperatorMatrix::from_matrix(m).expect("square")
}

fn fill_block(m: &mut DMatrix<f64>, spec: &BasisSpec, lo: BasisState, hi: BasisState, amp: f64, q: &[[f64; 3]; 3]) {
    let i0 = spec.index_unchecked(lo);
    let j0 = spec.index_unchecked(hi);
    for (r, row) in q.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v != 0.0 {
                // ⟨hi, r| V |lo, c⟩ and its mirror; q is symmetric so q[r][c] = q[c][r].
                let x = amp * v;
                m[(j0 + r, i0 + c)] = x;
                m[(i0 + c, j0 + r)] = x;
            }
        }
    }
}

/// `V = [g_a(a+a†) + g_b(b+b†)] Σ_{jk}(cosθ σ_x^{jk} + sinθ σ_z^{jk})`.
pub fn build_v(params: &SystemParams, spec: &BasisSpec) -> OperatorMatrix {
    build_v_general(
        params.theta,
        &TransitionCouplings::uniform(params.g_a, params.g_b),
        spec,
    )
}

/// `g_ab (a + a†)(b + b†)`.
pub fn build_crosstalk(params: &SystemParams, spec: &BasisSpec) -> OperatorMatrix {
    let dim = spec.dim();
    let mut m = DMatrix::zeros(dim, dim);
    if params.g_ab != 0.0 {
        for s in spec.states() {
            let i = spec.index_unchecked(s);
            for (da, db) in [(1i64, 1i64), (1, -1)] {
                let na = s.n_a as i64 + da;
                let nb = s.n_b as i64 + db;
                if na < 0 || nb < 0 || na as usize > spec.cutoff_a() || nb as usize > spec.cutoff_b() {
                    continue;
                }
                let t = BasisState::new(na as usize, nb as usize, s.level);
                let amp_a = (na.max(s.n_a as i64) as f64).sqrt();
                let amp_b = (nb.max(s.n_b as i64) as f64).sqrt();
                let x = params.g_ab * amp_a * amp_b;
                let j = spec.index_unchecked(t);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
    }
    OperatorMatrix::from_matrix(m).expect("square")
}

/// Full Hamiltonian `H₀ + V`, plus the crosstalk term when requested.
pub fn build_full(params: &SystemParams, spec: &BasisSpec, include_crosstalk: bool) -> OperatorMatrix {
    let mut h = build_h0(params, spec).into_matrix();
    h += build_v(params, spec).matrix();
    if include_crosstalk {
        h += build_crosstalk(params, spec).matrix();
    }
    OperatorMatrix::from_matrix(h).expect("square")
}
