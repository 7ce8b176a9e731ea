//! Perturbative effective couplings and resonance shifts for two- and
//! three-photon resonances, and a brute-force path-sum engine over the bare
//! basis that serves as an independent check of the closed forms.
//!
//! The closed forms are leading order in the couplings. Each one is evaluated
//! with the swept spacing at its bare resonance (`ω_eg = 2ω_a`, `ω_fg = 2ω_b`,
//! `3ω_a`, `3ω_b`) and the remaining frequencies as given. Three-photon
//! expressions are for purely transverse coupling (`θ = 0`).

use std::f64::consts::SQRT_2;
use std::fmt;

use crate::error::{Error, Result};
use crate::hilbert::{BasisSpec, BasisState, OperatorMatrix};
use crate::model::SystemParams;

/// Denominators smaller than this are treated as resonant.
pub const DENOMINATOR_TOL: f64 = 1e-12;

/// Which multiphoton process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResonanceTag {
    /// `|n,0,e⟩ ↔ |n+2,0,g⟩` with `ω_eg ≈ 2ω_a`.
    TwoPhotonA,
    /// `|0,n,f⟩ ↔ |0,n+2,g⟩` with `ω_fg ≈ 2ω_b`.
    TwoPhotonB,
    /// `|0,0,e⟩ ↔ |3,0,g⟩` with `ω_eg ≈ 3ω_a`.
    ThreePhotonA,
    /// `|0,0,f⟩ ↔ |0,3,g⟩` with `ω_fg ≈ 3ω_b`.
    ThreePhotonB,
}

impl fmt::Display for ResonanceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ResonanceTag::TwoPhotonA => "two_photon_a",
            ResonanceTag::TwoPhotonB => "two_photon_b",
            ResonanceTag::ThreePhotonA => "three_photon_a",
            ResonanceTag::ThreePhotonB => "three_photon_b",
        };
        f.write_str(s)
    }
}

/// Resonance descriptor: process plus starting photon number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ResonanceKind {
    pub tag: ResonanceTag,
    pub n_offset: usize,
}

impl ResonanceKind {
    pub const fn new(tag: ResonanceTag, n_offset: usize) -> Self {
        ResonanceKind { tag, n_offset }
    }

    pub const fn two_photon_a(n: usize) -> Self {
        Self::new(ResonanceTag::TwoPhotonA, n)
    }

    pub const fn two_photon_b(n: usize) -> Self {
        Self::new(ResonanceTag::TwoPhotonB, n)
    }

    pub const fn three_photon_a() -> Self {
        Self::new(ResonanceTag::ThreePhotonA, 0)
    }

    pub const fn three_photon_b() -> Self {
        Self::new(ResonanceTag::ThreePhotonB, 0)
    }

    /// Number of photons exchanged.
    pub fn order(&self) -> usize {
        match self.tag {
            ResonanceTag::TwoPhotonA | ResonanceTag::TwoPhotonB => 2,
            ResonanceTag::ThreePhotonA | ResonanceTag::ThreePhotonB => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order() == 3 && self.n_offset != 0 {
            return Err(Error::UnsupportedResonance(format!(
                "{} requires n_offset = 0, got {}",
                self.tag, self.n_offset
            )));
        }
        Ok(())
    }

    /// The two bare states the resonance couples (excited qutrit first).
    pub fn states(&self) -> (BasisState, BasisState) {
        use crate::hilbert::Level::{E, F, G};
        let n = self.n_offset;
        let k = self.order();
        match self.tag {
            ResonanceTag::TwoPhotonA | ResonanceTag::ThreePhotonA => {
                (BasisState::new(n, 0, E), BasisState::new(n + k, 0, G))
            }
            ResonanceTag::TwoPhotonB | ResonanceTag::ThreePhotonB => {
                (BasisState::new(0, n, F), BasisState::new(0, n + k, G))
            }
        }
    }

    /// The qutrit spacing tuned to reach the resonance.
    pub fn uses_omega_eg(&self) -> bool {
        matches!(self.tag, ResonanceTag::TwoPhotonA | ResonanceTag::ThreePhotonA)
    }

    /// Bare-resonance value of the tuned spacing, `k·ω_mode`.
    pub fn bare_spacing(&self, params: &SystemParams) -> f64 {
        let w = if self.uses_omega_eg() {
            params.omega_a
        } else {
            params.omega_b
        };
        self.order() as f64 * w
    }

    /// `params` with the tuned spacing set to its bare resonance.
    pub fn at_bare_resonance(&self, params: &SystemParams) -> SystemParams {
        let x = self.bare_spacing(params);
        if self.uses_omega_eg() {
            SystemParams { omega_eg: x, ..*params }
        } else {
            SystemParams { omega_fg: x, ..*params }
        }
    }
}

/// Closed-form effective two-level description of a resonance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveResonance {
    pub kind: ResonanceKind,
    pub coupling: f64,
    pub shift: f64,
    /// Spacing to program: `k·ω_mode + shift`.
    pub resonant_spacing: f64,
}

fn inv(d: f64, what: &str) -> Result<f64> {
    if d.abs() < DENOMINATOR_TOL || !d.is_finite() {
        log::debug!("resonant denominator {what} = {d:e}");
        return Err(Error::SmallDenominator { value: d });
    }
    Ok(1.0 / d)
}

fn require_transverse(params: &SystemParams, kind: &ResonanceKind) -> Result<()> {
    if kind.order() == 3 && params.theta != 0.0 {
        return Err(Error::UnsupportedResonance(format!(
            "{} closed forms hold for theta = 0 only, got {}",
            kind.tag, params.theta
        )));
    }
    Ok(())
}

/// `√[(n+1)(n+2)/2]`, the photon-number enhancement of two-photon couplings.
pub fn n_scaling(n: usize) -> f64 {
    (((n + 1) * (n + 2)) as f64 / 2.0).sqrt()
}

/// Signed effective coupling `g_eff(n)`, `g'_eff(n)`, `g_effs` or `g'_effs`.
pub fn effective_coupling(params: &SystemParams, kind: ResonanceKind) -> Result<f64> {
    kind.validate()?;
    require_transverse(params, &kind)?;
    let p = params;
    let (s2, c2) = ((2.0 * p.theta).sin(), p.theta.cos().powi(2));
    let g = match kind.tag {
        ResonanceTag::TwoPhotonA => {
            let base = -SQRT_2
                * p.g_a.powi(2)
                * (s2 * inv(p.omega_a, "omega_a")? + c2 * inv(p.omega_fg - p.omega_a, "omega_fg - omega_a")?);
            n_scaling(kind.n_offset) * base
        }
        ResonanceTag::TwoPhotonB => {
            let base = -SQRT_2
                * p.g_b.powi(2)
                * (2.0 * s2 * inv(p.omega_b, "omega_b")? + c2 * inv(p.omega_eg - p.omega_b, "omega_eg - omega_b")?);
            n_scaling(kind.n_offset) * base
        }
        ResonanceTag::ThreePhotonA => {
            let (wa, wf) = (p.omega_a, p.omega_fg);
            -(6f64.sqrt() * p.g_a.powi(3) / (2.0 * wa))
                * (inv(2.0 * wa, "2 omega_a")? - inv(wf - 2.0 * wa, "omega_fg - 2 omega_a")?
                    + inv(wf - wa, "omega_fg - omega_a")?)
        }
        ResonanceTag::ThreePhotonB => {
            let (wb, we) = (p.omega_b, p.omega_eg);
            -(6f64.sqrt() * p.g_b.powi(3) / (2.0 * wb))
                * (inv(2.0 * wb, "2 omega_b")? - inv(we - 2.0 * wb, "omega_eg - 2 omega_b")?
                    + inv(we - wb, "omega_eg - omega_b")?)
        }
    };
    Ok(g)
}

/// Second-order self-energies of the resonant bare states, each at bare resonance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SelfEnergy {
    /// `|0,0,e⟩` with `ω_eg = 2ω_a`.
    E1,
    /// `|2,0,g⟩`.
    E2,
    /// `|0,0,f⟩` with `ω_fg = 2ω_b`.
    E3,
    /// `|0,2,g⟩`.
    E4,
    /// `|0,0,e⟩` with `ω_eg = 3ω_a`, `θ = 0`.
    S1,
    /// `|3,0,g⟩`, `θ = 0`.
    S2,
    /// `|0,0,f⟩` with `ω_fg = 3ω_b`, `θ = 0`.
    S3,
    /// `|0,3,g⟩`, `θ = 0`.
    S4,
}

impl SelfEnergy {
    pub const ALL: [SelfEnergy; 8] = [
        SelfEnergy::E1,
        SelfEnergy::E2,
        SelfEnergy::E3,
        SelfEnergy::E4,
        SelfEnergy::S1,
        SelfEnergy::S2,
        SelfEnergy::S3,
        SelfEnergy::S4,
    ];

    /// The resonance whose bare point the self-energy is evaluated at.
    pub fn resonance(self) -> ResonanceKind {
        match self {
            SelfEnergy::E1 | SelfEnergy::E2 => ResonanceKind::two_photon_a(0),
            SelfEnergy::E3 | SelfEnergy::E4 => ResonanceKind::two_photon_b(0),
            SelfEnergy::S1 | SelfEnergy::S2 => ResonanceKind::three_photon_a(),
            SelfEnergy::S3 | SelfEnergy::S4 => ResonanceKind::three_photon_b(),
        }
    }

    /// The bare state being shifted.
    pub fn state(self) -> BasisState {
        let (excited, ground) = self.resonance().states();
        match self {
            SelfEnergy::E1 | SelfEnergy::E3 | SelfEnergy::S1 | SelfEnergy::S3 => excited,
            _ => ground,
        }
    }
}

/// Closed-form second-order self-energy.
pub fn self_energy(params: &SystemParams, which: SelfEnergy) -> Result<f64> {
    let p = params;
    let (wa, wb, we, wf) = (p.omega_a, p.omega_b, p.omega_eg, p.omega_fg);
    let (ga2, gb2) = (p.g_a.powi(2), p.g_b.powi(2));
    let c = p.theta.cos().powi(2);
    let s = p.theta.sin().powi(2);
    if which.resonance().order() == 3 {
        require_transverse(p, &which.resonance())?;
    }
    let long = -4.0 * ga2 * s * inv(wa, "omega_a")? - 4.0 * gb2 * s * inv(wb, "omega_b")?;
    let v = match which {
        SelfEnergy::E1 => {
            ga2 * c * (inv(wa, "omega_a")? - inv(wf - wa, "omega_fg - omega_a")?)
                + gb2
                    * c
                    * (inv(2.0 * wa - wb, "2 omega_a - omega_b")?
                        - inv(wf + wb - 2.0 * wa, "omega_fg + omega_b - 2 omega_a")?)
        }
        SelfEnergy::E2 => {
            -ga2 * c
                * (3.0 * inv(wa, "omega_a")?
                    + 2.0 * inv(wf - wa, "omega_fg - omega_a")?
                    + 3.0 * inv(wf + wa, "omega_fg + omega_a")?)
                - gb2 * c * (inv(2.0 * wa + wb, "2 omega_a + omega_b")? + inv(wf + wb, "omega_fg + omega_b")?)
                + long
        }
        SelfEnergy::E3 => {
            ga2 * c
                * (inv(2.0 * wb - wa - we, "2 omega_b - omega_a - omega_eg")?
                    + inv(2.0 * wb - wa, "2 omega_b - omega_a")?)
                + gb2 * c * (inv(wb - we, "omega_b - omega_eg")? + inv(wb, "omega_b")?)
                + long
        }
        SelfEnergy::E4 => {
            -ga2 * c * (inv(we + wa, "omega_eg + omega_a")? + inv(2.0 * wb + wa, "2 omega_b + omega_a")?)
                - gb2
                    * c
                    * (3.0 * inv(wb, "omega_b")?
                        + 2.0 * inv(we - wb, "omega_eg - omega_b")?
                        + 3.0 * inv(we + wb, "omega_eg + omega_b")?)
                + long
        }
        SelfEnergy::S1 => {
            ga2 * (inv(2.0 * wa, "2 omega_a")? + inv(2.0 * wa - wf, "2 omega_a - omega_fg")?)
                + gb2
                    * (inv(3.0 * wa - wb, "3 omega_a - omega_b")?
                        + inv(3.0 * wa - wb - wf, "3 omega_a - omega_b - omega_fg")?)
        }
        SelfEnergy::S2 => {
            -ga2 * (5.0 * inv(2.0 * wa, "2 omega_a")?
                + 3.0 * inv(wf - wa, "omega_fg - omega_a")?
                + 4.0 * inv(wf + wa, "omega_fg + omega_a")?)
                - gb2 * (inv(3.0 * wa + wb, "3 omega_a + omega_b")? + inv(wb + wf, "omega_b + omega_fg")?)
        }
        SelfEnergy::S3 => {
            ga2 * (inv(3.0 * wb - wa - we, "3 omega_b - omega_a - omega_eg")?
                + inv(3.0 * wb - wa, "3 omega_b - omega_a")?)
                + gb2 * (inv(2.0 * wb - we, "2 omega_b - omega_eg")? + inv(2.0 * wb, "2 omega_b")?)
        }
        SelfEnergy::S4 => {
            -ga2 * (inv(3.0 * wb + wa, "3 omega_b + omega_a")? + inv(wa + we, "omega_a + omega_eg")?)
                - gb2
                    * (5.0 * inv(2.0 * wb, "2 omega_b")?
                        + 3.0 * inv(we - wb, "omega_eg - omega_b")?
                        + 4.0 * inv(we + wb, "omega_eg + omega_b")?)
        }
    };
    Ok(v)
}

/// Crosstalk correction added to the two-photon shifts when a direct
/// resonator coupling `g_ab` is present.
pub fn crosstalk_correction(params: &SystemParams, tag: ResonanceTag) -> Result<f64> {
    let p = params;
    let g2 = 2.0 * p.g_ab.powi(2);
    if g2 == 0.0 {
        return Ok(0.0);
    }
    let sum = inv(p.omega_a + p.omega_b, "omega_a + omega_b")?;
    match tag {
        ResonanceTag::TwoPhotonA => Ok(g2 * (inv(p.omega_a - p.omega_b, "omega_a - omega_b")? - sum)),
        ResonanceTag::TwoPhotonB => Ok(g2 * (inv(p.omega_b - p.omega_a, "omega_b - omega_a")? - sum)),
        _ => Err(Error::UnsupportedResonance(format!(
            "no crosstalk correction is available for {tag}"
        ))),
    }
}

/// Resonance shift `δ_n`, `Δ_n`, `δ_s` or `Δ_s`, optionally including the
/// crosstalk correction.
pub fn resonance_shift(params: &SystemParams, kind: ResonanceKind, with_crosstalk: bool) -> Result<f64> {
    kind.validate()?;
    require_transverse(params, &kind)?;
    if with_crosstalk && kind.order() == 3 {
        return Err(Error::UnsupportedResonance(format!(
            "no crosstalk correction is available for {}",
            kind.tag
        )));
    }
    let p = params;
    let (wa, wb, we, wf) = (p.omega_a, p.omega_b, p.omega_eg, p.omega_fg);
    let (ga2, gb2) = (p.g_a.powi(2), p.g_b.powi(2));
    let c = p.theta.cos().powi(2);
    let s = p.theta.sin().powi(2);
    let n = kind.n_offset as f64;
    let shift = match kind.tag {
        ResonanceTag::TwoPhotonA => {
            let delta = -ga2
                * c
                * (4.0 * inv(wa, "omega_a")?
                    + inv(wf - wa, "omega_fg - omega_a")?
                    + 3.0 * inv(wf + wa, "omega_fg + omega_a")?)
                - gb2
                    * c
                    * (inv(2.0 * wa + wb, "2 omega_a + omega_b")?
                        + inv(wf + wb, "omega_fg + omega_b")?
                        + inv(2.0 * wa - wb, "2 omega_a - omega_b")?
                        - inv(wf + wb - 2.0 * wa, "omega_fg + omega_b - 2 omega_a")?)
                - 4.0 * ga2 * s * inv(wa, "omega_a")?
                - 4.0 * gb2 * s * inv(wb, "omega_b")?;
            let dn = if n == 0.0 {
                0.0
            } else {
                n * ga2
                    * c
                    * (8.0 * inv(3.0 * wa, "3 omega_a")? + inv(wf + wa, "omega_fg + omega_a")?
                        - inv(wf - 3.0 * wa, "omega_fg - 3 omega_a")?)
            };
            delta - dn
        }
        ResonanceTag::TwoPhotonB => {
            let big = -gb2
                * c
                * (4.0 * inv(wb, "omega_b")?
                    + inv(we - wb, "omega_eg - omega_b")?
                    + 3.0 * inv(we + wb, "omega_eg + omega_b")?)
                - ga2
                    * c
                    * (inv(we + wa, "omega_eg + omega_a")?
                        + inv(2.0 * wb + wa, "2 omega_b + omega_a")?
                        + inv(2.0 * wb - wa, "2 omega_b - omega_a")?
                        + inv(2.0 * wb - wa - we, "2 omega_b - omega_a - omega_eg")?);
            let dn = if n == 0.0 {
                0.0
            } else {
                n * gb2
                    * c
                    * (8.0 * inv(3.0 * wb, "3 omega_b")? + inv(we + wb, "omega_eg + omega_b")?
                        - inv(we - 3.0 * wb, "omega_eg - 3 omega_b")?)
            };
            big - dn
        }
        ResonanceTag::ThreePhotonA => {
            -ga2 * (3.0 * inv(wa, "omega_a")?
                + 3.0 * inv(wf - wa, "omega_fg - omega_a")?
                + 4.0 * inv(wf + wa, "omega_fg + omega_a")?
                + inv(2.0 * wa - wf, "2 omega_a - omega_fg")?)
                - gb2
                    * (inv(3.0 * wa + wb, "3 omega_a + omega_b")?
                        + inv(wb + wf, "omega_b + omega_fg")?
                        + inv(3.0 * wa - wb, "3 omega_a - omega_b")?
                        + inv(3.0 * wa - wb - wf, "3 omega_a - omega_b - omega_fg")?)
        }
        ResonanceTag::ThreePhotonB => {
            -ga2 * (inv(3.0 * wb + wa, "3 omega_b + omega_a")?
                + inv(wa + we, "omega_a + omega_eg")?
                + inv(3.0 * wb - wa - we, "3 omega_b - omega_a - omega_eg")?
                + inv(3.0 * wb - wa, "3 omega_b - omega_a")?)
                - gb2
                    * (inv(2.0 * wb - we, "2 omega_b - omega_eg")?
                        + 3.0 * inv(wb, "omega_b")?
                        + 3.0 * inv(we - wb, "omega_eg - omega_b")?
                        + 4.0 * inv(we + wb, "omega_eg + omega_b")?)
        }
    };
    let extra = if with_crosstalk {
        crosstalk_correction(p, kind.tag)?
    } else {
        0.0
    };
    Ok(shift + extra)
}

/// Coupling, shift and the spacing to program for a resonance.
pub fn effective_resonance(
    params: &SystemParams,
    kind: ResonanceKind,
    with_crosstalk: bool,
) -> Result<EffectiveResonance> {
    let coupling = effective_coupling(params, kind)?;
    let shift = resonance_shift(params, kind, with_crosstalk)?;
    Ok(EffectiveResonance {
        kind,
        coupling,
        shift,
        resonant_spacing: kind.bare_spacing(params) + shift,
    })
}

/// One contribution to a perturbative path sum.
#[derive(Clone, Debug, PartialEq)]
pub struct PathTerm {
    pub intermediates: Vec<BasisState>,
    pub amplitude: f64,
}

/// Total of a path sum and its individual nonzero paths.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSum {
    pub value: f64,
    pub paths: Vec<PathTerm>,
}

fn check_inputs(h0: &OperatorMatrix, v: &OperatorMatrix, spec: &BasisSpec) -> Result<()> {
    h0.check_dim(spec.dim())?;
    v.check_dim(spec.dim())?;
    if !h0.is_diagonal() {
        return Err(Error::InvalidParams("h0 must be diagonal in the bare basis".into()));
    }
    Ok(())
}

fn denominator(w_i: f64, w_n: f64, spec: &BasisSpec, n: usize) -> Result<f64> {
    let d = w_i - w_n;
    if d.abs() < DENOMINATOR_TOL {
        log::debug!("degenerate intermediate state {}", spec.state(n));
        return Err(Error::SmallDenominator { value: d });
    }
    Ok(d)
}

/// `Σ_{n≠i,j} V_jn V_ni / (ω_i − ω_n)` over the whole truncated basis.
///
/// With `i = j` this is the second-order energy shift of `i`.
pub fn path_sum_second_order(
    h0: &OperatorMatrix,
    v: &OperatorMatrix,
    spec: &BasisSpec,
    i: BasisState,
    j: BasisState,
) -> Result<PathSum> {
    check_inputs(h0, v, spec)?;
    let (ii, jj) = (spec.index(i)?, spec.index(j)?);
    let w_i = h0.get(ii, ii);
    let mut value = 0.0;
    let mut paths = Vec::new();
    for n in 0..spec.dim() {
        if n == ii || n == jj {
            continue;
        }
        let num = v.get(jj, n) * v.get(n, ii);
        if num == 0.0 {
            continue;
        }
        let amp = num / denominator(w_i, h0.get(n, n), spec, n)?;
        value += amp;
        paths.push(PathTerm {
            intermediates: vec![spec.state(n)],
            amplitude: amp,
        });
    }
    Ok(PathSum { value, paths })
}

/// `Σ_{n,m≠i,j} V_jn V_nm V_mi / [(ω_i − ω_n)(ω_i − ω_m)]` over the whole
/// truncated basis. Each path is listed as `[m, n]` in the order visited from `i`.
pub fn path_sum_third_order(
    h0: &OperatorMatrix,
    v: &OperatorMatrix,
    spec: &BasisSpec,
    i: BasisState,
    j: BasisState,
) -> Result<PathSum> {
    check_inputs(h0, v, spec)?;
    let (ii, jj) = (spec.index(i)?, spec.index(j)?);
    let w_i = h0.get(ii, ii);
    let dim = spec.dim();
    let first: Vec<usize> = (0..dim)
        .filter(|&m| m != ii && m != jj && v.get(m, ii) != 0.0)
        .collect();
    let mut value = 0.0;
    let mut paths = Vec::new();
    for n in 0..dim {
        if n == ii || n == jj || v.get(jj, n) == 0.0 {
            continue;
        }
        for &m in &first {
            let num = v.get(jj, n) * v.get(n, m) * v.get(m, ii);
            if num == 0.0 {
                continue;
            }
            let den = denominator(w_i, h0.get(n, n), spec, n)? * denominator(w_i, h0.get(m, m), spec, m)?;
            let amp = num / den;
            value += amp;
            paths.push(PathTerm {
                intermediates: vec![spec.state(m), spec.state(n)],
                amplitude: amp,
            });
        }
    }
    Ok(PathSum { value, paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Level::{E, F, G};
    use crate::model::{build_h0, build_v};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

    fn fig2() -> SystemParams {
        SystemParams::default()
    }

    fn fig4() -> SystemParams {
        SystemParams {
            omega_b: 2.2,
            omega_eg: 3.0,
            omega_fg: 6.6,
            g_a: 0.1,
            g_b: 0.1,
            theta: 0.0,
            ..SystemParams::default()
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn rabi_periods() {
        let g = effective_coupling(&fig2(), ResonanceKind::two_photon_a(0)).unwrap();
        assert!((g + 4.1667e-3).abs() < 1e-7);
        assert!((PI / g.abs() - 754.0).abs() < 1.0);
        let gs = effective_coupling(&fig4(), ResonanceKind::three_photon_a()).unwrap();
        assert!((gs.abs() - 5.648e-4).abs() < 1e-7);
        assert!((PI / gs.abs() - 5562.0).abs() < 5.0);
    }

    #[test]
    fn trivial_limits() {
        let zero = SystemParams {
            g_a: 0.0,
            g_b: 0.0,
            ..fig2()
        };
        for kind in [ResonanceKind::two_photon_a(3), ResonanceKind::two_photon_b(1)] {
            assert_eq!(effective_coupling(&zero, kind).unwrap(), 0.0);
            assert_eq!(resonance_shift(&zero, kind, false).unwrap(), 0.0);
        }
        let z4 = SystemParams {
            g_a: 0.0,
            g_b: 0.0,
            ..fig4()
        };
        assert_eq!(effective_coupling(&z4, ResonanceKind::three_photon_b()).unwrap(), 0.0);
        let perp = SystemParams {
            theta: FRAC_PI_2,
            ..fig2()
        };
        let g = effective_coupling(&perp, ResonanceKind::two_photon_a(0)).unwrap();
        assert!(g.abs() < 1e-18);
    }

    #[test]
    fn kind_validation() {
        assert!(effective_coupling(&fig4(), ResonanceKind::new(ResonanceTag::ThreePhotonA, 1)).is_err());
        assert!(resonance_shift(&fig4(), ResonanceKind::three_photon_a(), true).is_err());
        let tilted = SystemParams {
            theta: FRAC_PI_6,
            ..fig4()
        };
        assert!(effective_coupling(&tilted, ResonanceKind::three_photon_a()).is_err());
        let bad = SystemParams {
            omega_fg: 1.0,
            ..fig2()
        };
        assert!(matches!(
            effective_coupling(&bad, ResonanceKind::two_photon_a(0)),
            Err(Error::SmallDenominator { .. })
        ));
    }

    #[test]
    fn n_scaling_is_exact() {
        for n in 0..=10 {
            for kind in [ResonanceKind::two_photon_a(n), ResonanceKind::two_photon_b(n)] {
                let base = ResonanceKind { n_offset: 0, ..kind };
                let r = effective_coupling(&fig2(), kind).unwrap() / effective_coupling(&fig2(), base).unwrap();
                assert!(rel(r, n_scaling(n)) < 1e-15);
            }
        }
    }

    #[test]
    fn shifts_are_self_energy_differences() {
        let p = fig2();
        let a = ResonanceKind::two_photon_a(0).at_bare_resonance(&p);
        let d = self_energy(&a, SelfEnergy::E2).unwrap() - self_energy(&a, SelfEnergy::E1).unwrap();
        assert!(rel(d, resonance_shift(&p, ResonanceKind::two_photon_a(0), false).unwrap()) < 1e-12);
        let b = ResonanceKind::two_photon_b(0).at_bare_resonance(&p);
        let d = self_energy(&b, SelfEnergy::E4).unwrap() - self_energy(&b, SelfEnergy::E3).unwrap();
        assert!(rel(d, resonance_shift(&p, ResonanceKind::two_photon_b(0), false).unwrap()) < 1e-12);
        let q = fig4();
        let d = self_energy(&q, SelfEnergy::S2).unwrap() - self_energy(&q, SelfEnergy::S1).unwrap();
        assert!(rel(d, resonance_shift(&q, ResonanceKind::three_photon_a(), false).unwrap()) < 1e-12);
        let q = ResonanceKind::three_photon_b().at_bare_resonance(&fig4());
        let d = self_energy(&q, SelfEnergy::S4).unwrap() - self_energy(&q, SelfEnergy::S3).unwrap();
        assert!(rel(d, resonance_shift(&q, ResonanceKind::three_photon_b(), false).unwrap()) < 1e-12);
    }

    #[test]
    fn self_energies_match_path_sums() {
        let spec = BasisSpec::new(6, 6);
        for which in SelfEnergy::ALL {
            let base = if which.resonance().order() == 3 { fig4() } else { fig2() };
            let p = which.resonance().at_bare_resonance(&base);
            let (h0, v) = (build_h0(&p, &spec), build_v(&p, &spec));
            let s = path_sum_second_order(&h0, &v, &spec, which.state(), which.state()).unwrap();
            let e = self_energy(&p, which).unwrap();
            assert!(
                rel(s.value, e) < 1e-10,
                "{which:?}: path sum {} vs closed form {e}",
                s.value
            );
        }
    }

    #[test]
    fn sign_flipped_denominator_forms_agree() {
        let p = fig2();
        let (wa, wb, wf) = (p.omega_a, p.omega_b, p.omega_fg);
        assert!(rel(1.0 / (2.0 * wa - wb - wf), -1.0 / (wf + wb - 2.0 * wa)) < 1e-15);
    }

    #[test]
    fn shift_signs_for_figure_parameters() {
        assert!(resonance_shift(&fig2(), ResonanceKind::two_photon_a(0), false).unwrap() < 0.0);
        assert!(resonance_shift(&fig2(), ResonanceKind::two_photon_b(0), false).unwrap() < 0.0);
        assert!(resonance_shift(&fig4(), ResonanceKind::three_photon_a(), false).unwrap() < 0.0);
        assert!(resonance_shift(&fig4(), ResonanceKind::three_photon_b(), false).unwrap() < 0.0);
    }

    #[test]
    fn crosstalk_correction_values() {
        let p = SystemParams { g_ab: 0.015, ..fig2() };
        let base = resonance_shift(&p, ResonanceKind::two_photon_a(2), false).unwrap();
        let with = resonance_shift(&p, ResonanceKind::two_photon_a(2), true).unwrap();
        let expect = 2.0 * 0.015f64.powi(2) * (1.0 / (1.0 - 1.7) - 1.0 / 2.7);
        assert!((with - base - expect).abs() < 1e-16);
        let base = resonance_shift(&p, ResonanceKind::two_photon_b(0), false).unwrap();
        let with = resonance_shift(&p, ResonanceKind::two_photon_b(0), true).unwrap();
        let expect = 2.0 * 0.015f64.powi(2) * (1.0 / 0.7 - 1.0 / 2.7);
        assert!((with - base - expect).abs() < 1e-16);
    }

    #[test]
    fn resonant_spacing_identity() {
        let r = effective_resonance(&fig2(), ResonanceKind::two_photon_b(2), false).unwrap();
        assert_eq!(r.resonant_spacing, 2.0 * 1.7 + r.shift);
    }

    #[test]
    fn second_order_path_inventory() {
        let spec = BasisSpec::new(6, 6);
        let p = ResonanceKind::two_photon_a(0).at_bare_resonance(&fig2());
        let (h0, v) = (build_h0(&p, &spec), build_v(&p, &spec));
        let s = path_sum_second_order(&h0, &v, &spec, BasisState::new(0, 0, E), BasisState::new(2, 0, G)).unwrap();
        let mut via: Vec<_> = s.paths.iter().map(|t| t.intermediates[0]).collect();
        via.sort_by_key(|b| (b.n_a, b.n_b, b.level));
        assert_eq!(via, vec![BasisState::new(1, 0, G), BasisState::new(1, 0, F)]);
        let g = effective_coupling(&fig2(), ResonanceKind::two_photon_a(0)).unwrap();
        assert!(rel(s.value, g) < 1e-12);

        let zero = SystemParams {
            g_a: 0.0,
            g_b: 0.0,
            ..p
        };
        let s = path_sum_second_order(
            &h0,
            &build_v(&zero, &spec),
            &spec,
            BasisState::new(0, 0, E),
            BasisState::new(2, 0, G),
        )
        .unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.paths.is_empty());
    }

    #[test]
    fn third_order_path_inventory() {
        let spec = BasisSpec::new(6, 6);
        let p = fig4();
        let (h0, v) = (build_h0(&p, &spec), build_v(&p, &spec));
        let s = path_sum_third_order(&h0, &v, &spec, BasisState::new(0, 0, E), BasisState::new(3, 0, G)).unwrap();
        assert_eq!(s.paths.len(), 3);
        let g = effective_coupling(&p, ResonanceKind::three_photon_a()).unwrap();
        assert!(rel(s.value, g) < 1e-12);

        let spec = BasisSpec::new(5, 5);
        let (h0, v) = (build_h0(&p, &spec), build_v(&p, &spec));
        let e = BasisState::new(0, 0, E);
        let s = path_sum_third_order(&h0, &v, &spec, e, e).unwrap();
        assert!(s.paths.is_empty());
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn degenerate_intermediate_is_reported() {
        let spec = BasisSpec::new(3, 3);
        let p = SystemParams {
            omega_eg: 1.0,
            ..fig2()
        };
        let (h0, v) = (build_h0(&p, &spec), build_v(&p, &spec));
        let r = path_sum_second_order(&h0, &v, &spec, BasisState::new(0, 0, E), BasisState::new(0, 0, E));
        assert!(matches!(r, Err(Error::SmallDenominator { .. })));
    }
}
