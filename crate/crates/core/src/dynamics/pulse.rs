//! Resonant microwave π pulses on one qutrit transition.
//!
//! The ideal pulse on the pair `(g, k)` with phase `φ` is
//! `U(φ) = −i(e^{−iφ}|k⟩⟨g| + e^{iφ}|g⟩⟨k|)`, identity on the third level
//! and on both photon factors. Up pulses use `φ = −π/2` (so `|g⟩ → |k⟩`
//! with unit amplitude), down pulses `φ = +π/2` (`|k⟩ → |g⟩`); the
//! `phase` field of [`PulseSpec`] is added on top. An up pulse followed by a
//! down pulse is the identity.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::ode::{Dopri5, OdeOptions};
use super::{real_mat_vec, DensityMatrix, State};
use crate::error::{Error, Result};
use crate::hilbert::{BasisSpec, Level, QutritPair, StateVector};
use crate::model::{build_full, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PulseMode {
    /// Ideal rotation applied in zero time.
    #[default]
    Instantaneous,
    /// Lab-frame drive `Ω(e^{−i(ω_d t+φ)}|k⟩⟨g| + h.c.)` added to the full
    /// Hamiltonian for `τ = π/(2Ω)`.
    FiniteDuration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseDirection {
    Up,
    Down,
}

impl PulseDirection {
    pub fn base_phase(self) -> f64 {
        match self {
            PulseDirection::Up => -FRAC_PI_2,
            PulseDirection::Down => FRAC_PI_2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSpec {
    /// `Eg` or `Fg`.
    pub pair: QutritPair,
    /// Offset added to the direction's base phase (radians).
    pub phase: f64,
    /// Drive amplitude `Ω` in units of `ω_a`.
    pub rabi_frequency: f64,
    pub mode: PulseMode,
}

impl PulseSpec {
    pub fn instantaneous(pair: QutritPair, rabi_frequency: f64) -> Self {
        PulseSpec {
            pair,
            phase: 0.0,
            rabi_frequency,
            mode: PulseMode::Instantaneous,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pair == QutritPair::Fe {
            return Err(Error::InvalidPulse("pulses act on the eg or fg transition".into()));
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidPulse(format!("phase {}", self.phase)));
        }
        let ok = match self.mode {
            PulseMode::FiniteDuration => self.rabi_frequency > 0.0 && self.rabi_frequency.is_finite(),
            PulseMode::Instantaneous => self.rabi_frequency >= 0.0 && !self.rabi_frequency.is_nan(),
        };
        if !ok {
            return Err(Error::InvalidPulse(format!("Rabi frequency {}", self.rabi_frequency)));
        }
        Ok(())
    }

    /// `τ = π/(2Ω)`; zero when `Ω` is zero or infinite.
    pub fn duration(&self) -> f64 {
        if self.rabi_frequency > 0.0 && self.rabi_frequency.is_finite() {
            FRAC_PI_2 / self.rabi_frequency
        } else {
            0.0
        }
    }

    fn upper_ordinal(&self) -> usize {
        self.pair.levels().0.ordinal()
    }
}

/// System the finite-duration drive acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseEnvironment {
    pub spec: BasisSpec,
    pub params: SystemParams,
    pub include_crosstalk: bool,
    /// Drive carrier; defaults to the programmed level spacing of the pair.
    pub drive_frequency: Option<f64>,
}

/// Applies a pulse to a pure or mixed state. Finite-duration pulses need the
/// environment; instantaneous ones ignore it.
pub fn apply_pulse(
    state: &State,
    pulse: &PulseSpec,
    direction: PulseDirection,
    env: Option<&PulseEnvironment>,
) -> Result<State> {
    pulse.validate()?;
    if !state.dim().is_multiple_of(3) {
        return Err(Error::DimensionMismatch {
            expected: 3 * (state.dim() / 3 + 1),
            found: state.dim(),
        });
    }
    let phi = direction.base_phase() + pulse.phase;
    match pulse.mode {
        PulseMode::Instantaneous => Ok(match state {
            State::Pure(p) => State::Pure(StateVector::from_vector(ideal_on_vector(p.vector(), pulse, phi))),
            State::Mixed(r) => State::Mixed(DensityMatrix(ideal_on_density(r.matrix(), pulse, phi))),
        }),
        PulseMode::FiniteDuration => {
            let env = env.ok_or_else(|| Error::InvalidPulse("finite pulses need the system Hamiltonian".into()))?;
            if env.spec.dim() != state.dim() {
                return Err(Error::DimensionMismatch {
                    expected: env.spec.dim(),
                    found: state.dim(),
                });
            }
            let drive = Drive::new(env, pulse, phi)?;
            match state {
                State::Pure(p) => Ok(State::Pure(StateVector::from_vector(drive.propagate(p.vector())?))),
                State::Mixed(r) => {
                    let eig = nalgebra::SymmetricEigen::new(r.matrix().clone());
                    let mut out = DMatrix::<Complex64>::zeros(r.dim(), r.dim());
                    for (i, &w) in eig.eigenvalues.iter().enumerate() {
                        if w.abs() < 1e-12 {
                            continue;
                        }
                        let v = drive.propagate(&eig.eigenvectors.column(i).into_owned())?;
                        out += &v * v.adjoint() * Complex64::new(w, 0.0);
                    }
                    Ok(State::Mixed(DensityMatrix(out)))
                }
            }
        }
    }
}

fn ideal_on_vector(v: &DVector<Complex64>, pulse: &PulseSpec, phi: f64) -> DVector<Complex64> {
    let k = pulse.upper_ordinal();
    let to_upper = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, -phi);
    let to_lower = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, phi);
    let mut out = v.clone();
    for block in 0..v.len() / 3 {
        let ig = 3 * block + Level::G.ordinal();
        let ik = 3 * block + k;
        out[ik] = to_upper * v[ig];
        out[ig] = to_lower * v[ik];
    }
    out
}

fn ideal_on_density(r: &DMatrix<Complex64>, pulse: &PulseSpec, phi: f64) -> DMatrix<Complex64> {
    // U ρ U† = U (U ρ†)† with ρ Hermitian.
    let mut half = DMatrix::zeros(r.nrows(), r.ncols());
    for c in 0..r.ncols() {
        half.set_column(c, &ideal_on_vector(&r.column(c).into_owned(), pulse, phi));
    }
    let half_adj = half.adjoint();
    let mut out = DMatrix::zeros(r.nrows(), r.ncols());
    for c in 0..r.ncols() {
        out.set_column(c, &ideal_on_vector(&half_adj.column(c).into_owned(), pulse, phi));
    }
    out.adjoint()
}

struct Drive {
    h: DMatrix<f64>,
    upper: usize,
    omega: f64,
    carrier: f64,
    phi: f64,
    tau: f64,
}

impl Drive {
    fn new(env: &PulseEnvironment, pulse: &PulseSpec, phi: f64) -> Result<Self> {
        env.params.validate()?;
        let spacing = match pulse.pair {
            QutritPair::Eg => env.params.omega_eg,
            _ => env.params.omega_fg,
        };
        Ok(Drive {
            h: build_full(&env.params, &env.spec, env.include_crosstalk).into_matrix(),
            upper: pulse.upper_ordinal(),
            omega: pulse.rabi_frequency,
            carrier: env.drive_frequency.unwrap_or(spacing),
            phi,
            tau: pulse.duration(),
        })
    }

    fn propagate(&self, psi0: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let mut y: Vec<Complex64> = psi0.iter().copied().collect();
        let n = y.len();
        let mut ode = Dopri5::new(
            n,
            OdeOptions {
                rtol: 1e-10,
                atol: 1e-12,
                ..OdeOptions::default()
            },
        );
        let minus_i = Complex64::new(0.0, -1.0);
        let mut f = |t: f64, yv: &[Complex64], dy: &mut [Complex64]| {
            let v = DVector::from_column_slice(yv);
            let hv = real_mat_vec(&self.h, &v);
            // Ω e^{−i(ω_d t+φ)} raises, its conjugate lowers.
            let up = Complex64::from_polar(self.omega, -(self.carrier * t + self.phi));
            for i in 0..n {
                dy[i] = minus_i * hv[i];
            }
            for block in 0..n / 3 {
                let ig = 3 * block;
                let ik = ig + self.upper;
                dy[ik] += minus_i * up * yv[ig];
                dy[ig] += minus_i * up.conj() * yv[ik];
            }
        };
        let mut t = 0.0;
        ode.advance(&mut f, &mut t, &mut y, self.tau)?;
        Ok(DVector::from_vec(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::BasisState;

    fn spec() -> BasisSpec {
        BasisSpec::new(3, 3)
    }

    fn max_norm<'a>(m: impl IntoIterator<Item = &'a Complex64>) -> f64 {
        m.into_iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    #[test]
    fn up_pulse_moves_ground_to_excited() {
        let s = spec();
        let psi = s.ket(BasisState::new(2, 0, Level::G)).unwrap();
        let p = PulseSpec::instantaneous(QutritPair::Eg, 0.075);
        let out = apply_pulse(&State::Pure(psi), &p, PulseDirection::Up, None).unwrap();
        let State::Pure(v) = out else { panic!() };
        let amp = v.amplitude(&s, BasisState::new(2, 0, Level::E)).unwrap();
        assert!((amp - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn up_then_down_is_identity() {
        let s = spec();
        let psi = s
            .superposition(&[
                (Complex64::new(0.6, 0.0), BasisState::new(1, 2, Level::G)),
                (Complex64::new(0.0, 0.48), BasisState::new(0, 1, Level::F)),
                (Complex64::new(0.64, 0.0), BasisState::new(3, 0, Level::E)),
            ])
            .unwrap();
        for pair in [QutritPair::Eg, QutritPair::Fg] {
            let p = PulseSpec {
                phase: 0.3,
                ..PulseSpec::instantaneous(pair, 0.075)
            };
            let up = apply_pulse(&State::Pure(psi.clone()), &p, PulseDirection::Up, None).unwrap();
            let back = apply_pulse(&up, &p, PulseDirection::Down, None).unwrap();
            let State::Pure(v) = back else { panic!() };
            assert!(max_norm(&(v.vector() - psi.vector())) < 1e-15);
        }
    }

    #[test]
    fn mixed_and_pure_pulses_agree() {
        let s = spec();
        let psi = s
            .superposition(&[
                (Complex64::new(1.0, 0.0), BasisState::new(0, 0, Level::E)),
                (Complex64::new(1.0, 0.0), BasisState::new(0, 0, Level::F)),
            ])
            .unwrap();
        let p = PulseSpec::instantaneous(QutritPair::Fg, 0.075);
        let State::Pure(v) = apply_pulse(&State::Pure(psi.clone()), &p, PulseDirection::Down, None).unwrap() else {
            panic!()
        };
        let State::Mixed(r) = apply_pulse(
            &State::Mixed(DensityMatrix::from_pure(&psi)),
            &p,
            PulseDirection::Down,
            None,
        )
        .unwrap() else {
            panic!()
        };
        assert!(max_norm(&(r.matrix() - DensityMatrix::from_pure(&v).matrix())) < 1e-15);
    }

    #[test]
    fn invalid_pulses_rejected() {
        let s = spec();
        let psi = State::Pure(s.ket(BasisState::new(0, 0, Level::G)).unwrap());
        let fe = PulseSpec::instantaneous(QutritPair::Fe, 0.1);
        assert!(apply_pulse(&psi, &fe, PulseDirection::Up, None).is_err());
        let finite = PulseSpec {
            mode: PulseMode::FiniteDuration,
            ..PulseSpec::instantaneous(QutritPair::Eg, 0.0)
        };
        assert!(apply_pulse(&psi, &finite, PulseDirection::Up, None).is_err());
        let no_env = PulseSpec {
            mode: PulseMode::FiniteDuration,
            ..PulseSpec::instantaneous(QutritPair::Eg, 0.1)
        };
        assert!(apply_pulse(&psi, &no_env, PulseDirection::Up, None).is_err());
    }
}
