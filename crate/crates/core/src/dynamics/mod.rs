//! Time evolution: exact unitary propagation, dressed-basis master equation,
//! qutrit pulses, populations and fidelities.

mod lindblad;
pub mod ode;
mod pulse;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{
    mode_operator, qutrit_operator, BasisSpec, BasisState, LadderKind, Level, Mode, OperatorMatrix, QutritOpKind,
    QutritPair, StateVector,
};
use crate::spectrum::{diagonalize, dress_in_eigenbasis, Eigensystem};

pub use lindblad::{evolve_lindblad_eigen, LindbladBackend, LindbladOptions, LindbladStats};
pub use pulse::{apply_pulse, PulseDirection, PulseEnvironment, PulseMode, PulseSpec};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Mixed state on the truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(pub(crate) DMatrix<Complex64>);

impl DensityMatrix {
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(DensityMatrix(m))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &StateVector) -> Self {
        let v = psi.vector();
        DensityMatrix(v * v.adjoint())
    }

    /// `1/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|c| c.re).sum()
    }

    /// `max |ρ_ij − ρ_ji*|`.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn purity(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(herm);
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `⟨u|ρ|v⟩`.
    pub fn matrix_element(&self, u: &StateVector, v: &StateVector) -> Complex64 {
        u.vector().dotc(&(&self.0 * v.vector()))
    }
}

/// Pure or mixed state.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(p) => p.dim(),
            State::Mixed(r) => r.dim(),
        }
    }

    /// `⟨u|ρ|v⟩`, with `ρ = |ψ⟩⟨ψ|` for pure states.
    pub fn matrix_element(&self, u: &StateVector, v: &StateVector) -> Complex64 {
        match self {
            State::Pure(p) => u.inner(p) * p.inner(v),
            State::Mixed(r) => r.matrix_element(u, v),
        }
    }

    /// `ρ_{ij}` between bare basis indices.
    fn element(&self, i: usize, j: usize) -> Complex64 {
        match self {
            State::Pure(p) => p.vector()[i] * p.vector()[j].conj(),
            State::Mixed(r) => r.0[(i, j)],
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            State::Pure(p) => DensityMatrix::from_pure(p),
            State::Mixed(r) => r.clone(),
        }
    }
}

/// `⟨t|ρ|t⟩` for each target.
pub fn populations(state: &State, targets: &[StateVector]) -> Result<Vec<f64>> {
    targets
        .iter()
        .map(|t| {
            if t.dim() != state.dim() {
                return Err(Error::DimensionMismatch {
                    expected: state.dim(),
                    found: t.dim(),
                });
            }
            Ok(state.matrix_element(t, t).re)
        })
        .collect()
}

/// `√⟨φ|ρ|φ⟩`.
pub fn state_fidelity(rho: &DensityMatrix, target: &StateVector) -> f64 {
    state_overlap(rho, target).max(0.0).sqrt()
}

/// `⟨φ|ρ|φ⟩`.
pub fn state_overlap(rho: &DensityMatrix, target: &StateVector) -> f64 {
    rho.matrix_element(target, target).re
}

/// How the relative phase between the two NOON branches is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PhaseAlignment {
    /// Target `(|N,0,g⟩ + |0,N,g⟩)/√2` exactly as written.
    Exact,
    /// Target `(|N,0,g⟩ + e^{iφ}|0,N,g⟩)/√2` with `φ` chosen to maximise the
    /// overlap; `φ` is removable by a local phase shift of one mode.
    #[default]
    BranchOptimized,
}

/// Overlap `⟨φ|ρ|φ⟩` of a state with the NOON target of `n` photons.
pub fn noon_overlap(state: &State, spec: &BasisSpec, n: usize, alignment: PhaseAlignment) -> Result<f64> {
    let (ia, ib) = noon_indices(spec, n)?;
    if state.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: state.dim(),
        });
    }
    Ok(branch_overlap(
        state.element(ia, ia).re,
        state.element(ib, ib).re,
        state.element(ia, ib),
        alignment,
    ))
}

fn noon_indices(spec: &BasisSpec, n: usize) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(Error::InvalidTarget("NOON photon number must be ≥ 1".into()));
    }
    Ok((
        spec.index(BasisState::new(n, 0, Level::G))?,
        spec.index(BasisState::new(0, n, Level::G))?,
    ))
}

fn branch_overlap(paa: f64, pbb: f64, pab: Complex64, alignment: PhaseAlignment) -> f64 {
    let coherence = match alignment {
        PhaseAlignment::Exact => pab.re,
        PhaseAlignment::BranchOptimized => pab.norm(),
    };
    0.5 * (paa + pbb) + coherence
}

/// Quantities recorded along a trajectory.
#[derive(Clone, Debug, Default)]
pub struct Observables {
    /// Population targets, recorded as `⟨t|ρ|t⟩`.
    pub targets: Vec<StateVector>,
    /// NOON photon number whose overlap is recorded.
    pub noon: Option<usize>,
    pub alignment: PhaseAlignment,
}

/// Sampled populations and fidelities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `populations[k][j]`: target `j` at sample `k`.
    pub populations: Vec<Vec<f64>>,
    /// Trace (or squared norm) of the full state at each sample.
    pub trace: Vec<f64>,
    /// NOON overlap `⟨φ|ρ|φ⟩` at each sample, when requested.
    pub noon_overlap: Option<Vec<f64>>,
}

impl Trajectory {
    /// `√⟨φ|ρ|φ⟩` at each sample.
    pub fn noon_fidelity(&self) -> Option<Vec<f64>> {
        self.noon_overlap
            .as_ref()
            .map(|v| v.iter().map(|x| x.max(0.0).sqrt()).collect())
    }

    /// Appends another trajectory, offsetting its times.
    pub fn extend_shifted(&mut self, other: &Trajectory, t0: f64) {
        self.times.extend(other.times.iter().map(|t| t + t0));
        self.populations.extend(other.populations.iter().cloned());
        self.trace.extend(other.trace.iter().copied());
        if let Some(o) = &other.noon_overlap {
            self.noon_overlap.get_or_insert_with(Vec::new).extend(o.iter().copied());
        }
    }

    fn record(&mut self, t: f64, state: &State, obs: &Observables, spec: Option<&BasisSpec>) -> Result<()> {
        self.times.push(t);
        self.populations.push(populations(state, &obs.targets)?);
        self.trace.push(match state {
            State::Pure(p) => p.norm().powi(2),
            State::Mixed(r) => r.trace(),
        });
        if let Some(n) = obs.noon {
            let spec = spec.ok_or_else(|| Error::InvalidTarget("NOON overlap needs a basis".into()))?;
            let v = noon_overlap(state, spec, n, obs.alignment)?;
            self.noon_overlap.get_or_insert_with(Vec::new).push(v);
        }
        Ok(())
    }
}

/// Uniform sample times `0, …, t_final`; a single sample means the end point only.
pub fn sample_times(t_final: f64, n_samples: usize) -> Vec<f64> {
    match n_samples {
        0 => Vec::new(),
        1 => vec![t_final],
        n => (0..n).map(|k| t_final * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Real matrix times complex vector.
pub(crate) fn real_mat_vec(m: &DMatrix<f64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    let re = m * v.map(|c| c.re);
    let im = m * v.map(|c| c.im);
    DVector::from_fn(re.len(), |i, _| Complex64::new(re[i], im[i]))
}

/// Real-transpose times complex vector, `mᵀ v`.
pub(crate) fn real_tr_mat_vec(m: &DMatrix<f64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    let re = m.tr_mul(&v.map(|c| c.re));
    let im = m.tr_mul(&v.map(|c| c.im));
    DVector::from_fn(re.len(), |i, _| Complex64::new(re[i], im[i]))
}

/// `Uᵀ ρ U` for real `U` and complex `ρ`.
pub(crate) fn congruence_to_eigen(u: &DMatrix<f64>, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let re = u.tr_mul(&(rho.map(|c| c.re) * u));
    let im = u.tr_mul(&(rho.map(|c| c.im) * u));
    DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
}

/// `U ρ Uᵀ` for real `U` and complex `ρ`.
pub(crate) fn congruence_to_bare(u: &DMatrix<f64>, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let re = u * rho.map(|c| c.re) * u.transpose();
    let im = u * rho.map(|c| c.im) * u.transpose();
    DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
}

/// Exact propagation `ψ(t) = U e^{−iEt} Uᵀ ψ₀` from an eigensystem.
pub fn propagate_pure(es: &Eigensystem, psi0: &StateVector, t: f64) -> StateVector {
    let c = real_tr_mat_vec(es.vectors(), psi0.vector());
    let phased = DVector::from_fn(c.len(), |m, _| c[m] * Complex64::from_polar(1.0, -es.energy(m) * t));
    StateVector::from_vector(real_mat_vec(es.vectors(), &phased))
}

fn check_normalized(psi: &StateVector) -> Result<()> {
    if (psi.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidTarget(format!(
            "initial state must be normalised, norm = {}",
            psi.norm()
        )));
    }
    Ok(())
}

/// Closed-system evolution sampled at `n_samples` uniform times in `[0, t_final]`.
/// Returns the trajectory and the final state.
pub fn evolve_unitary(
    h: &OperatorMatrix,
    psi0: &StateVector,
    t_final: f64,
    n_samples: usize,
    observables: &Observables,
    spec: Option<&BasisSpec>,
) -> Result<(Trajectory, StateVector)> {
    h.check_dim(psi0.dim())?;
    check_normalized(psi0)?;
    let es = diagonalize(h)?;
    evolve_unitary_eigen(&es, psi0, t_final, n_samples, observables, spec)
}

/// [`evolve_unitary`] with a precomputed eigensystem.
pub fn evolve_unitary_eigen(
    es: &Eigensystem,
    psi0: &StateVector,
    t_final: f64,
    n_samples: usize,
    observables: &Observables,
    spec: Option<&BasisSpec>,
) -> Result<(Trajectory, StateVector)> {
    let mut traj = Trajectory::default();
    for t in sample_times(t_final, n_samples) {
        let psi = propagate_pure(es, psi0, t);
        traj.record(t, &State::Pure(psi), observables, spec)?;
    }
    Ok((traj, propagate_pure(es, psi0, t_final)))
}

/// Non-negative decay and dephasing rates in units of `ω_a`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DecoherenceRates {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub gamma_eg: f64,
    pub gamma_fg: f64,
    pub gamma_fe: f64,
    pub gamma_e: f64,
    pub gamma_f: f64,
}

/// A dissipation channel and its bare system operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    KappaA,
    KappaB,
    GammaEg,
    GammaFg,
    GammaFe,
    GammaE,
    GammaF,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::KappaA,
        Channel::KappaB,
        Channel::GammaEg,
        Channel::GammaFg,
        Channel::GammaFe,
        Channel::GammaE,
        Channel::GammaF,
    ];

    /// `a`, `b`, `σ⁻_{eg}`, `σ⁻_{fg}`, `σ⁻_{fe}`, `|e⟩⟨e|`, `|f⟩⟨f|`.
    pub fn bare_operator(self, spec: &BasisSpec) -> OperatorMatrix {
        match self {
            Channel::KappaA => mode_operator(spec, Mode::A, LadderKind::Annihilate),
            Channel::KappaB => mode_operator(spec, Mode::B, LadderKind::Annihilate),
            Channel::GammaEg => qutrit_operator(spec, QutritPair::Eg, QutritOpKind::Lower),
            Channel::GammaFg => qutrit_operator(spec, QutritPair::Fg, QutritOpKind::Lower),
            Channel::GammaFe => qutrit_operator(spec, QutritPair::Fe, QutritOpKind::Lower),
            Channel::GammaE => qutrit_operator(spec, QutritPair::Eg, QutritOpKind::ProjectUpper),
            Channel::GammaF => qutrit_operator(spec, QutritPair::Fg, QutritOpKind::ProjectUpper),
        }
    }
}

impl DecoherenceRates {
    /// Every channel at the same rate.
    pub fn uniform(gamma: f64) -> Self {
        DecoherenceRates {
            kappa_a: gamma,
            kappa_b: gamma,
            gamma_eg: gamma,
            gamma_fg: gamma,
            gamma_fe: gamma,
            gamma_e: gamma,
            gamma_f: gamma,
        }
    }

    pub fn rate(&self, c: Channel) -> f64 {
        match c {
            Channel::KappaA => self.kappa_a,
            Channel::KappaB => self.kappa_b,
            Channel::GammaEg => self.gamma_eg,
            Channel::GammaFg => self.gamma_fg,
            Channel::GammaFe => self.gamma_fe,
            Channel::GammaE => self.gamma_e,
            Channel::GammaF => self.gamma_f,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in Channel::ALL {
            let r = self.rate(c);
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidRates(format!("{c:?} = {r}")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        Channel::ALL.iter().all(|&c| self.rate(c) == 0.0)
    }
}

/// Dressed collapse operators in the eigenbasis, paired with their rates.
/// Channels with zero rate are omitted.
pub fn dressed_channels(es: &Eigensystem, spec: &BasisSpec, rates: &DecoherenceRates) -> Vec<(DMatrix<f64>, f64)> {
    Channel::ALL
        .iter()
        .filter(|&&c| rates.rate(c) > 0.0)
        .map(|&c| (dress_in_eigenbasis(es, &c.bare_operator(spec), None), rates.rate(c)))
        .collect()
}

/// Master-equation evolution with dressed collapse operators given in the
/// bare basis (as produced by [`crate::spectrum::dress_operator`]).
/// Returns the trajectory, the final state and integrator statistics.
pub fn evolve_lindblad(
    h: &OperatorMatrix,
    dressed_ops: &[(OperatorMatrix, f64)],
    rho0: &DensityMatrix,
    t_final: f64,
    n_samples: usize,
    observables: &Observables,
    spec: Option<&BasisSpec>,
    options: &LindbladOptions,
) -> Result<(Trajectory, DensityMatrix, LindbladStats)> {
    h.check_dim(rho0.dim())?;
    for (op, rate) in dressed_ops {
        op.check_dim(rho0.dim())?;
        if !(*rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidRates(format!("rate {rate}")));
        }
    }
    let es = diagonalize(h)?;
    let channels: Vec<(DMatrix<f64>, f64)> = dressed_ops
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(op, r)| {
            let mut o = es.to_eigenbasis(op.matrix());
            // Remove round-off below the diagonal; the operators are strictly
            // upper triangular in the energy-ordered eigenbasis.
            for m in 0..o.nrows() {
                for n in 0..=m {
                    o[(m, n)] = 0.0;
                }
            }
            (o, *r)
        })
        .collect();
    let mut rho = congruence_to_eigen(es.vectors(), rho0.matrix());
    let mut traj = Trajectory::default();
    let stats = evolve_lindblad_eigen(
        &es,
        &channels,
        &mut rho,
        t_final,
        &sample_times(t_final, n_samples),
        options,
        &mut |t, rho_eig| {
            let bare = DensityMatrix(congruence_to_bare(es.vectors(), rho_eig));
            traj.record(t, &State::Mixed(bare), observables, spec)
        },
    )?;
    Ok((traj, DensityMatrix(congruence_to_bare(es.vectors(), &rho)), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_full, build_h0, SystemParams};
    use crate::perturb::{effective_coupling, effective_resonance, ResonanceKind};
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn fidelity_examples() {
        let spec = BasisSpec::new(2, 2);
        let phi = spec.noon(2).unwrap();
        let rho = DensityMatrix::from_pure(&phi);
        assert!((state_fidelity(&rho, &phi) - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(spec.dim());
        assert!((state_fidelity(&mixed, &phi) - (1.0 / spec.dim() as f64).sqrt()).abs() < 1e-15);
        // A relative branch phase costs nothing under branch optimisation only.
        let twisted = spec
            .superposition(&[
                (c(1.0), BasisState::new(2, 0, Level::G)),
                (Complex64::new(0.0, 1.0), BasisState::new(0, 2, Level::G)),
            ])
            .unwrap();
        let st = State::Pure(twisted);
        assert!((noon_overlap(&st, &spec, 2, PhaseAlignment::BranchOptimized).unwrap() - 1.0).abs() < 1e-15);
        assert!((noon_overlap(&st, &spec, 2, PhaseAlignment::Exact).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn populations_examples() {
        let spec = BasisSpec::new(2, 2);
        let a = spec.ket(BasisState::new(1, 0, Level::E)).unwrap();
        let b = spec.ket(BasisState::new(0, 1, Level::E)).unwrap();
        let p = populations(&State::Pure(a.clone()), &[a.clone(), b]).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn diagonal_hamiltonian_keeps_populations() {
        let spec = BasisSpec::new(3, 3);
        let h = build_h0(&SystemParams::default(), &spec);
        let s = spec.ket(BasisState::new(1, 2, Level::F)).unwrap();
        let obs = Observables {
            targets: vec![s.clone()],
            ..Observables::default()
        };
        let (traj, _) = evolve_unitary(&h, &s, 100.0, 11, &obs, None).unwrap();
        for p in &traj.populations {
            assert!((p[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unitary_propagator_is_unitary() {
        let spec = BasisSpec::new(4, 4);
        let es = diagonalize(&build_full(&SystemParams::default(), &spec, false)).unwrap();
        let u = es.vectors();
        let t = 377.0;
        let phase = DMatrix::from_fn(spec.dim(), spec.dim(), |i, j| {
            if i == j {
                Complex64::from_polar(1.0, -es.energy(i) * t)
            } else {
                ZERO
            }
        });
        let uc = u.map(c);
        let prop = &uc * phase * uc.transpose();
        let err = (prop.adjoint() * &prop - DMatrix::identity(spec.dim(), spec.dim()))
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(err < 1e-9);
    }

    #[test]
    fn two_photon_rabi_peak_time() {
        let p0 = SystemParams::default();
        let spec = BasisSpec::for_photon_number(2);
        let res = effective_resonance(&p0, ResonanceKind::two_photon_a(0), false).unwrap();
        let p = SystemParams {
            omega_eg: res.resonant_spacing,
            ..p0
        };
        let h = build_full(&p, &spec, false);
        let psi0 = spec.ket(BasisState::new(0, 0, Level::E)).unwrap();
        let target = spec.ket(BasisState::new(2, 0, Level::G)).unwrap();
        let g = effective_coupling(&p0, ResonanceKind::two_photon_a(0)).unwrap();
        let half = PI / (2.0 * g.abs());
        let obs = Observables {
            targets: vec![target],
            ..Observables::default()
        };
        let (traj, _) = evolve_unitary(&h, &psi0, 2.0 * half, 801, &obs, None).unwrap();
        let (k, pmax) = traj
            .populations
            .iter()
            .enumerate()
            .map(|(k, p)| (k, p[0]))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert!(pmax > 0.95);
        assert!((traj.times[k] - half).abs() / half < 0.03, "peak at {}", traj.times[k]);
        for n in &traj.trace {
            assert!((n - 1.0).abs() < 1e-9);
        }
    }
}
