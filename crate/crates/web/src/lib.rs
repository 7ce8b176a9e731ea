//! Browser demo over `noon-core`: the two-photon avoided crossing, Rabi
//! transfer into a two-photon NOON state and closed-form effective couplings.
//! Every export returns a flat row-major `Float64Array`; row widths are given
//! on each function.

use std::f64::consts::PI;

use noon_core::dynamics::{evolve_unitary, Observables, PhaseAlignment};
use noon_core::hilbert::{BasisSpec, BasisState, Level};
use noon_core::model::{build_full, SystemParams};
use noon_core::perturb::{effective_coupling, resonance_shift, ResonanceKind};
use noon_core::protocol::matched_gb;
use noon_core::spectrum::{track_branches, Sweep, SweepAxis};
use noon_core::Result;
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

/// Mode-b frequency of the demo, in units of `ω_a`.
pub const OMEGA_B: f64 = 1.7;

fn demo_params(g_a: f64, g_b: f64, theta: f64) -> SystemParams {
    SystemParams {
        omega_b: OMEGA_B,
        omega_fg: 2.0 * OMEGA_B,
        g_a,
        g_b,
        theta,
        ..SystemParams::default()
    }
}

fn check_coupling(name: &str, g: f64) -> Result<()> {
    if !(0.0..=0.2).contains(&g) {
        return Err(noon_core::Error::InvalidParams(format!(
            "{name} must lie in [0, 0.2], got {g}"
        )));
    }
    Ok(())
}

/// Dressed branches of `|0,0,e⟩` and `|2,0,g⟩` while `ω_eg` sweeps across
/// `2ω_a`. Rows: `[ω_eg, E(0,0,e), E(2,0,g)]`.
pub fn level_scan(g_a: f64, g_b: f64, theta: f64, points: usize) -> Result<Vec<f64>> {
    check_coupling("g_a", g_a)?;
    check_coupling("g_b", g_b)?;
    let p = demo_params(g_a, g_b, theta);
    let kind = ResonanceKind::two_photon_a(0);
    let centre = kind.bare_spacing(&p);
    let half = 0.05f64.max(0.5 * g_a);
    let sweep = Sweep {
        points: points.max(3),
        ..Sweep::new(SweepAxis::OmegaEg, centre - half, centre + half)
    };
    let branches = track_branches(&p, &BasisSpec::for_photon_number(2), &sweep, kind.states(), false)?;
    let mut out = Vec::with_capacity(3 * branches.values.len());
    for k in 0..branches.values.len() {
        out.extend([branches.values[k], branches.first[k], branches.second[k]]);
    }
    Ok(out)
}

/// Evolution from `(|0,0,e⟩ + |0,0,f⟩)/√2` over one period `π/|g_eff|` with
/// matched `g_b` and both spacings on their shifted resonances.
/// Rows: `[t, P(2,0,g), P(0,2,g), NOON overlap]`.
pub fn rabi_transfer(g_a: f64, theta: f64, samples: usize) -> Result<Vec<f64>> {
    check_coupling("g_a", g_a)?;
    if g_a == 0.0 {
        return Err(noon_core::Error::InvalidParams(
            "g_a must be positive for a finite period".into(),
        ));
    }
    let mut p = demo_params(g_a, 0.0, theta);
    p.g_b = matched_gb(&p)?;
    let (ka, kb) = (ResonanceKind::two_photon_a(0), ResonanceKind::two_photon_b(0));
    let base = p;
    p.omega_eg = ka.bare_spacing(&base) + resonance_shift(&base, ka, false)?;
    p.omega_fg = kb.bare_spacing(&base) + resonance_shift(&base, kb, false)?;
    let t_final = PI / effective_coupling(&ka.at_bare_resonance(&base), ka)?.abs();
    let spec = BasisSpec::for_photon_number(2);
    let one = Complex64::new(1.0, 0.0);
    let state = |n_a, n_b, level| BasisState { n_a, n_b, level };
    let psi0 = spec.superposition(&[(one, state(0, 0, Level::E)), (one, state(0, 0, Level::F))])?;
    let obs = Observables {
        targets: vec![
            spec.superposition(&[(one, state(2, 0, Level::G))])?,
            spec.superposition(&[(one, state(0, 2, Level::G))])?,
        ],
        noon: Some(2),
        alignment: PhaseAlignment::BranchOptimized,
    };
    let (traj, _) = evolve_unitary(
        &build_full(&p, &spec, false),
        &psi0,
        t_final,
        samples.max(2),
        &obs,
        Some(&spec),
    )?;
    let noon = traj.noon_overlap.unwrap_or_default();
    let mut out = Vec::with_capacity(4 * traj.times.len());
    for (k, t) in traj.times.iter().enumerate() {
        out.extend([*t, traj.populations[k][0], traj.populations[k][1], noon[k]]);
    }
    Ok(out)
}

/// Closed-form `|g_eff|` and resonance shift at bare resonance as the
/// coupling of the resonance's own mode runs from 0 to `g_max`, the other
/// coupling held at `g_other`. `resonance` is one of `two_photon_a`,
/// `two_photon_b`, `three_photon_a`, `three_photon_b`; three-photon forms use
/// `θ = 0`. Rows: `[g, |g_eff|, shift]`.
pub fn coupling_curve(resonance: &str, g_max: f64, g_other: f64, points: usize) -> Result<Vec<f64>> {
    check_coupling("g_max", g_max)?;
    check_coupling("g_other", g_other)?;
    let kind = match resonance {
        "two_photon_a" => ResonanceKind::two_photon_a(0),
        "two_photon_b" => ResonanceKind::two_photon_b(0),
        "three_photon_a" => ResonanceKind::three_photon_a(),
        "three_photon_b" => ResonanceKind::three_photon_b(),
        other => {
            return Err(noon_core::Error::InvalidParams(format!("unknown resonance `{other}`")));
        }
    };
    let theta = if kind.order() == 3 { 0.0 } else { PI / 6.0 };
    let points = points.max(2);
    let mut out = Vec::with_capacity(3 * points);
    for k in 0..points {
        let g = g_max * k as f64 / (points - 1) as f64;
        let p = if kind.uses_omega_eg() {
            demo_params(g, g_other, theta)
        } else {
            demo_params(g_other, g, theta)
        };
        let p = kind.at_bare_resonance(&p);
        out.extend([
            g,
            effective_coupling(&p, kind)?.abs(),
            resonance_shift(&p, kind, false)?,
        ]);
    }
    Ok(out)
}

fn js(r: Result<Vec<f64>>) -> std::result::Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = levelScan)]
pub fn level_scan_js(g_a: f64, g_b: f64, theta: f64, points: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(level_scan(g_a, g_b, theta, points))
}

#[wasm_bindgen(js_name = rabiTransfer)]
pub fn rabi_transfer_js(g_a: f64, theta: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(rabi_transfer(g_a, theta, samples))
}

#[wasm_bindgen(js_name = couplingCurve)]
pub fn coupling_curve_js(
    resonance: &str,
    g_max: f64,
    g_other: f64,
    points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(coupling_curve(resonance, g_max, g_other, points))
}
