//! NOON-state preparation schedule: part A builds photons in mode a on the
//! `e` branch, part B in mode b on the `f` branch, and a final step closes
//! both branches at once.
//!
//! During part A mode b is moved away from resonance by retuning its
//! frequency (and mode a during part B). Idle qutrit spacings sit at their
//! `n = 0` resonances. Step durations use couplings at the nominal spacings
//! `ω_eg = 2ω_a`, `ω_fg = 2ω_b`; resonance shifts use the actual frequencies
//! of each step.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::{
    apply_pulse, congruence_to_bare, congruence_to_eigen, dressed_channels, evolve_lindblad_eigen, noon_overlap,
    propagate_pure, sample_times, DecoherenceRates, DensityMatrix, LindbladOptions, LindbladStats, PhaseAlignment,
    PulseDirection, PulseEnvironment, PulseMode, PulseSpec, State, Trajectory,
};
use crate::error::{Error, Result};
use crate::hilbert::{BasisSpec, BasisState, Level, QutritPair, StateVector};
use crate::model::{build_full, SystemParams};
use crate::perturb::{effective_coupling, resonance_shift, ResonanceKind};
use crate::spectrum::{diagonalize, resonance_window, tune_double_resonance, Eigensystem};

/// `g_b` giving `|g'_eff| = |g_eff|` at `n = 0`, everything else as in `params`.
pub fn matched_gb(params: &SystemParams) -> Result<f64> {
    if params.g_a == 0.0 {
        return Ok(0.0);
    }
    let ga = effective_coupling(params, ResonanceKind::two_photon_a(0))?;
    let unit_b = effective_coupling(&SystemParams { g_b: 1.0, ..*params }, ResonanceKind::two_photon_b(0))?;
    let ratio = ga / unit_b;
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Protocol(format!(
            "couplings cannot be matched: bracket ratio {ratio} is not positive"
        )));
    }
    Ok(ratio.sqrt())
}

/// `params` with the spacings at their bare two-photon values.
pub fn nominal_spacings(params: &SystemParams) -> SystemParams {
    SystemParams {
        omega_eg: 2.0 * params.omega_a,
        omega_fg: 2.0 * params.omega_b,
        ..*params
    }
}

/// `params` with the spacings at their bare three-photon values.
pub fn three_photon_spacings(params: &SystemParams) -> SystemParams {
    SystemParams {
        omega_eg: 3.0 * params.omega_a,
        omega_fg: 3.0 * params.omega_b,
        ..*params
    }
}

/// `g_b` giving `|g'_effs| = |g_effs|` at the bare three-photon spacings.
pub fn matched_gb_three_photon(params: &SystemParams) -> Result<f64> {
    let p = three_photon_spacings(params);
    if p.g_a == 0.0 {
        return Ok(0.0);
    }
    let ga = effective_coupling(&p, ResonanceKind::three_photon_a())?;
    let unit_b = effective_coupling(&SystemParams { g_b: 1.0, ..p }, ResonanceKind::three_photon_b())?;
    let ratio = (ga / unit_b).abs();
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Protocol(format!(
            "three-photon couplings cannot be matched: ratio {ratio}"
        )));
    }
    Ok(ratio.cbrt())
}

/// One-step three-photon NOON schedule. Both spacings are placed at the
/// numerically located crossings in `spec` (the closed-form shifts are not
/// accurate on the scale of `g_effs`), and the step lasts `π/(2|g_effs|)`
/// with `g_effs` at the bare spacings.
pub fn plan_three_photon(params: &SystemParams, spec: &BasisSpec) -> Result<ProtocolPlan> {
    params.validate()?;
    let a = ResonanceKind::three_photon_a();
    let b = ResonanceKind::three_photon_b();
    let bare = three_photon_spacings(params);
    let window = resonance_window(&bare, a).max(resonance_window(&bare, b));
    let tuned = tune_double_resonance(&bare, spec, a, b, window)?;
    let duration = PI / (2.0 * effective_coupling(&bare, a)?.abs());
    let options = PlanOptions::default();
    Ok(ProtocolPlan {
        target_n: 3,
        branch: Branch::ThreePhoton,
        steps: vec![resonant("S".into(), tuned, vec![a, b], duration)],
        total_time: duration,
        base: *params,
        options,
    })
}

/// Schedule branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    EvenMatched,
    EvenUnmatched,
    Odd,
    /// Single simultaneous three-photon step.
    ThreePhoton,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::EvenMatched => "even_matched",
            Branch::EvenUnmatched => "even_unmatched",
            Branch::Odd => "odd",
            Branch::ThreePhoton => "three_photon",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanOptions {
    /// Use the unmatched even schedule even when the couplings match.
    pub force_unmatched: bool,
    /// Program the crosstalk-corrected two-photon shifts.
    pub with_crosstalk_shifts: bool,
    /// Frequency offset applied to the mode that sits out a part.
    pub decouple_detuning: f64,
    pub rabi_eg: f64,
    pub rabi_fg: f64,
    /// Relative tolerance of the matched-coupling test.
    pub matched_tol: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            force_unmatched: false,
            with_crosstalk_shifts: false,
            decouple_detuning: 5.0,
            // 300 MHz at ω_a/2π = 4 GHz.
            rabi_eg: 0.075,
            rabi_fg: 0.075,
            matched_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepKind {
    /// Free evolution under the full Hamiltonian at `params`. `resonances`
    /// lists the processes the spacings are programmed for; it is empty for
    /// the single-photon odd final step.
    Resonant {
        params: SystemParams,
        resonances: Vec<ResonanceKind>,
    },
    /// Microwave pulse applied while the system sits at `params`.
    Pulse {
        pulse: PulseSpec,
        direction: PulseDirection,
        params: SystemParams,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolStep {
    pub label: String,
    pub kind: StepKind,
    pub duration: f64,
}

impl ProtocolStep {
    pub fn params(&self) -> &SystemParams {
        match &self.kind {
            StepKind::Resonant { params, .. } | StepKind::Pulse { params, .. } => params,
        }
    }

    pub fn is_pulse(&self) -> bool {
        matches!(self.kind, StepKind::Pulse { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolPlan {
    pub target_n: usize,
    pub branch: Branch,
    pub steps: Vec<ProtocolStep>,
    /// Sum of step durations.
    pub total_time: f64,
    /// Parameters the plan was compiled from.
    pub base: SystemParams,
    pub options: PlanOptions,
}

impl ProtocolPlan {
    pub fn resonant_steps(&self) -> usize {
        self.steps.iter().filter(|s| !s.is_pulse()).count()
    }

    pub fn pulses(&self) -> usize {
        self.steps.iter().filter(|s| s.is_pulse()).count()
    }

    /// Basis large enough for the target with four spare photons per mode.
    pub fn basis(&self) -> BasisSpec {
        BasisSpec::for_photon_number(self.target_n)
    }
}

/// Sum of step durations.
pub fn protocol_duration(plan: &ProtocolPlan) -> f64 {
    plan.steps.iter().map(|s| s.duration).sum()
}

/// Total time from the closed-form expression of the plan's branch:
/// `T_A + T_B + t_N` with pulse times `(N−1)(τ_eg + τ_fg)` for the matched and
/// odd branches, and `Σ_{j≤N}[t_j + t'_j] + Nτ_fg + (N−1)τ_eg` for the
/// unmatched one.
pub fn closed_form_duration(plan: &ProtocolPlan) -> Result<f64> {
    let p = nominal_spacings(&plan.base);
    let o = &plan.options;
    let tau_eg = PulseSpec::instantaneous(QutritPair::Eg, o.rabi_eg).duration();
    let tau_fg = PulseSpec::instantaneous(QutritPair::Fg, o.rabi_fg).duration();
    let n_big = half_count(plan.target_n);
    let ga = |n: usize| effective_coupling(&p, ResonanceKind::two_photon_a(n)).map(f64::abs);
    let gb = |n: usize| effective_coupling(&p, ResonanceKind::two_photon_b(n)).map(f64::abs);
    let pulses = (n_big - 1) as f64 * (tau_eg + tau_fg);
    Ok(match plan.branch {
        Branch::EvenMatched => {
            let mut t = pulses + PI / (2.0 * ga(2 * n_big - 2)?);
            for j in 1..n_big {
                t += PI / ga(2 * j - 2)?;
            }
            t
        }
        Branch::EvenUnmatched => {
            let mut t = n_big as f64 * tau_fg + (n_big - 1) as f64 * tau_eg;
            for j in 1..=n_big {
                t += PI / (2.0 * ga(2 * j - 2)?) + PI / (2.0 * gb(2 * j - 2)?);
            }
            t
        }
        Branch::Odd => {
            let mut t = pulses + PI / (2.0 * ((2 * n_big - 1) as f64).sqrt() * p.g_a * p.theta.cos());
            for j in 1..n_big {
                t += PI / (2.0 * ga(2 * j - 2)?) + PI / (2.0 * gb(2 * j - 2)?);
            }
            t
        }
        Branch::ThreePhoton => {
            PI / (2.0 * effective_coupling(&three_photon_spacings(&plan.base), ResonanceKind::three_photon_a())?.abs())
        }
    })
}

/// `N` such that the target is `2N` (even) or `2N − 1` (odd).
fn half_count(target_n: usize) -> usize {
    target_n.div_ceil(2)
}

fn resonant(label: String, params: SystemParams, resonances: Vec<ResonanceKind>, duration: f64) -> ProtocolStep {
    ProtocolStep {
        label,
        kind: StepKind::Resonant { params, resonances },
        duration,
    }
}

fn pulse_step(label: &str, pulse: PulseSpec, direction: PulseDirection, params: SystemParams) -> ProtocolStep {
    ProtocolStep {
        label: label.to_string(),
        duration: pulse.duration(),
        kind: StepKind::Pulse {
            pulse,
            direction,
            params,
        },
    }
}

/// Compiles the preparation schedule for a NOON state of `target_n` photons.
pub fn plan_noon(target_n: usize, params: &SystemParams, options: &PlanOptions) -> Result<ProtocolPlan> {
    if target_n == 0 {
        return Err(Error::InvalidTarget("target photon number must be ≥ 1".into()));
    }
    params.validate()?;
    let o = options;
    if !(o.decouple_detuning.is_finite() && o.decouple_detuning >= 0.0) {
        return Err(Error::Protocol(format!("decouple detuning {}", o.decouple_detuning)));
    }
    let even = target_n.is_multiple_of(2);
    let n_big = half_count(target_n);
    let nominal = nominal_spacings(params);
    let xt = o.with_crosstalk_shifts;
    let ga_abs = |n: usize| effective_coupling(&nominal, ResonanceKind::two_photon_a(n)).map(f64::abs);
    let gb_abs = |n: usize| effective_coupling(&nominal, ResonanceKind::two_photon_b(n)).map(f64::abs);

    let branch = if !even {
        if params.theta.cos().abs() < 1e-12 {
            return Err(Error::Protocol("odd targets need cos θ ≠ 0".into()));
        }
        Branch::Odd
    } else {
        let (a, b) = (ga_abs(0)?, gb_abs(0)?);
        let matched = (a - b).abs() <= o.matched_tol * a.max(b);
        if o.force_unmatched {
            Branch::EvenUnmatched
        } else if matched {
            Branch::EvenMatched
        } else {
            return Err(Error::Protocol(format!(
                "|g_eff| = {a} and |g'_eff| = {b} differ; set g_b = matched_gb or force the unmatched schedule"
            )));
        }
    };

    let pulse_eg = PulseSpec::instantaneous(QutritPair::Eg, o.rabi_eg);
    let pulse_fg = PulseSpec::instantaneous(QutritPair::Fg, o.rabi_fg);
    pulse_eg.validate()?;
    pulse_fg.validate()?;

    // Idle spacings: each at its n = 0 resonance with the other spacing nominal.
    let wfg_idle = 2.0 * params.omega_b + resonance_shift(&nominal, ResonanceKind::two_photon_b(0), false)?;
    let weg_idle = 2.0 * params.omega_a + resonance_shift(&nominal, ResonanceKind::two_photon_a(0), false)?;

    let step_a = |j: usize| -> Result<ProtocolStep> {
        let n = 2 * j - 2;
        let kind = ResonanceKind::two_photon_a(n);
        let mut p = SystemParams {
            omega_b: params.omega_b + o.decouple_detuning,
            omega_fg: wfg_idle,
            ..*params
        };
        p.omega_eg = 2.0 * p.omega_a + resonance_shift(&p, kind, xt)?;
        Ok(resonant(format!("A{j}"), p, vec![kind], PI / (2.0 * ga_abs(n)?)))
    };
    let step_b = |k: usize| -> Result<ProtocolStep> {
        let n = 2 * k - 2;
        let kind = ResonanceKind::two_photon_b(n);
        let mut p = SystemParams {
            omega_a: params.omega_a + o.decouple_detuning,
            omega_eg: weg_idle,
            ..*params
        };
        p.omega_fg = 2.0 * p.omega_b + resonance_shift(&p, kind, xt)?;
        Ok(resonant(format!("B{k}"), p, vec![kind], PI / (2.0 * gb_abs(n)?)))
    };

    let mut steps = Vec::new();
    let a_steps = if branch == Branch::EvenUnmatched {
        n_big
    } else {
        n_big - 1
    };
    for j in 1..=a_steps {
        let s = step_a(j)?;
        let p = *s.params();
        steps.push(s);
        steps.push(pulse_step(&format!("A{j} pulse"), pulse_eg, PulseDirection::Up, p));
    }
    for k in 1..n_big {
        let s = step_b(k)?;
        let p = *s.params();
        steps.push(s);
        steps.push(pulse_step(&format!("B{k} pulse"), pulse_fg, PulseDirection::Up, p));
    }
    match branch {
        Branch::EvenMatched => {
            let n = 2 * n_big - 2;
            let (ka, kb) = (ResonanceKind::two_photon_a(n), ResonanceKind::two_photon_b(n));
            let p = SystemParams {
                omega_eg: 2.0 * params.omega_a + resonance_shift(&nominal, ka, xt)?,
                omega_fg: 2.0 * params.omega_b + resonance_shift(&nominal, kb, xt)?,
                ..*params
            };
            steps.push(resonant("final".into(), p, vec![ka, kb], PI / (2.0 * ga_abs(n)?)));
        }
        Branch::EvenUnmatched => {
            let last_b = step_b(n_big)?;
            steps.push(pulse_step(
                "return pulse",
                pulse_eg,
                PulseDirection::Down,
                *last_b.params(),
            ));
            steps.push(ProtocolStep {
                label: "final".into(),
                ..last_b
            });
        }
        Branch::Odd => {
            let p = SystemParams {
                omega_eg: params.omega_a,
                omega_fg: params.omega_b,
                g_b: params.g_a,
                ..*params
            };
            let t = PI / (2.0 * ((2 * n_big - 1) as f64).sqrt() * params.g_a * params.theta.cos().abs());
            steps.push(resonant("final".into(), p, Vec::new(), t));
        }
        Branch::ThreePhoton => unreachable!("plan_noon builds two-photon schedules only"),
    }
    let mut plan = ProtocolPlan {
        target_n,
        branch,
        steps,
        total_time: 0.0,
        base: *params,
        options: *options,
    };
    plan.total_time = protocol_duration(&plan);
    Ok(plan)
}

impl fmt::Display for ProtocolPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "target_n = {}, branch = {}, steps = {}, resonant = {}, pulses = {}",
            self.target_n,
            self.branch,
            self.steps.len(),
            self.resonant_steps(),
            self.pulses()
        )?;
        for (i, s) in self.steps.iter().enumerate() {
            let p = s.params();
            match &s.kind {
                StepKind::Resonant { resonances, .. } => {
                    let what = if resonances.is_empty() {
                        "single_photon".to_string()
                    } else {
                        resonances
                            .iter()
                            .map(|r| format!("{}(n={})", r.tag, r.n_offset))
                            .collect::<Vec<_>>()
                            .join("+")
                    };
                    writeln!(
                        f,
                        "{:>3}  {:<12} evolve  {what}  omega_a={:.10} omega_b={:.10} omega_eg={:.10} omega_fg={:.10} g_b={:.10}  t={:.6}",
                        i + 1,
                        s.label,
                        p.omega_a,
                        p.omega_b,
                        p.omega_eg,
                        p.omega_fg,
                        p.g_b,
                        s.duration
                    )?;
                }
                StepKind::Pulse { pulse, direction, .. } => {
                    let dir = match direction {
                        PulseDirection::Up => "up",
                        PulseDirection::Down => "down",
                    };
                    let pair = match pulse.pair {
                        QutritPair::Eg => "eg",
                        QutritPair::Fg => "fg",
                        QutritPair::Fe => "fe",
                    };
                    writeln!(
                        f,
                        "{:>3}  {:<12} pulse   {pair} {dir}  phase={:.6}  rabi={:.6}  t={:.6}",
                        i + 1,
                        s.label,
                        direction.base_phase() + pulse.phase,
                        pulse.rabi_frequency,
                        s.duration
                    )?;
                }
            }
        }
        write!(f, "total_time = {:.6}", self.total_time)
    }
}

/// Execution settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ExecuteOptions {
    /// `None` (or all zero) runs the closed-system schedule on a pure state.
    pub rates: Option<DecoherenceRates>,
    pub pulse_mode: PulseMode,
    pub lindblad: LindbladOptions,
    /// Trajectory samples per resonant step (end point included).
    pub samples_per_step: usize,
    pub include_crosstalk: bool,
    /// Pure dephasing time inserted before each resonant step to model the
    /// frequency adjustment; zero by default.
    pub retune_idle_time: f64,
    /// Explicit basis; defaults to the plan's basis.
    pub basis: Option<BasisSpec>,
}

impl Default for ExecuteOptions {
    fn default() -> Self {
        ExecuteOptions {
            rates: None,
            pulse_mode: PulseMode::Instantaneous,
            lindblad: LindbladOptions::default(),
            samples_per_step: 0,
            include_crosstalk: true,
            retune_idle_time: 0.0,
            basis: None,
        }
    }
}

/// Outcome of a schedule execution.
#[derive(Clone, Debug)]
pub struct ExecutionResult {
    pub final_state: State,
    /// `⟨φ|ρ|φ⟩` with the relative branch phase optimised.
    pub overlap: f64,
    /// `√overlap`.
    pub fidelity: f64,
    /// `⟨φ|ρ|φ⟩` against the target with zero relative phase.
    pub overlap_exact: f64,
    /// Population of qutrit level `g` at the end.
    pub ground_population: f64,
    /// Sum of executed step durations.
    pub elapsed: f64,
    pub trajectory: Trajectory,
    pub stats: LindbladStats,
}

/// `(|0,0,e⟩ + |0,0,f⟩)/√2`.
pub fn initial_state(spec: &BasisSpec) -> Result<StateVector> {
    let h = Complex64::new(1.0, 0.0);
    spec.superposition(&[
        (h, BasisState::new(0, 0, Level::E)),
        (h, BasisState::new(0, 0, Level::F)),
    ])
}

/// Runs the plan from `(|00e⟩+|00f⟩)/√2`. The crosstalk term enters the
/// Hamiltonian whenever `g_ab > 0` and `include_crosstalk` is set.
pub fn execute_plan(plan: &ProtocolPlan, options: &ExecuteOptions) -> Result<ExecutionResult> {
    let spec = options.basis.unwrap_or_else(|| plan.basis());
    if spec.cutoff_a() < plan.target_n || spec.cutoff_b() < plan.target_n {
        return Err(Error::InvalidTarget(format!(
            "basis cutoffs ({}, {}) cannot hold {} photons",
            spec.cutoff_a(),
            spec.cutoff_b(),
            plan.target_n
        )));
    }
    let rates = options.rates.filter(|r| !r.is_zero());
    if let Some(r) = &rates {
        r.validate()?;
    }
    let psi0 = initial_state(&spec)?;
    let mut state = match rates {
        None => State::Pure(psi0),
        Some(_) => State::Mixed(DensityMatrix::from_pure(&psi0)),
    };
    let mut traj = Trajectory::default();
    let mut stats = LindbladStats::default();
    let mut elapsed = 0.0;
    let target = plan.target_n;
    let record = |traj: &mut Trajectory, t: f64, st: &State| -> Result<()> {
        traj.times.push(t);
        traj.trace.push(trace_of(st));
        traj.populations.push(Vec::new());
        let v = noon_overlap(st, &spec, target, PhaseAlignment::BranchOptimized)?;
        traj.noon_overlap.get_or_insert_with(Vec::new).push(v);
        Ok(())
    };
    if options.samples_per_step > 0 {
        record(&mut traj, 0.0, &state)?;
    }
    for step in &plan.steps {
        match &step.kind {
            StepKind::Pulse {
                pulse,
                direction,
                params,
            } => {
                let pulse = PulseSpec {
                    mode: options.pulse_mode,
                    ..*pulse
                };
                let env = PulseEnvironment {
                    spec,
                    params: *params,
                    include_crosstalk: options.include_crosstalk,
                    drive_frequency: None,
                };
                state = apply_pulse(&state, &pulse, *direction, Some(&env))?;
            }
            StepKind::Resonant { params, .. } => {
                if options.retune_idle_time > 0.0 {
                    if let (State::Mixed(r), Some(rates)) = (&mut state, &rates) {
                        idle_dephasing(r, rates, options.retune_idle_time);
                    }
                }
                let h = build_full(params, &spec, options.include_crosstalk && params.g_ab > 0.0);
                let es = diagonalize(&h)?;
                let samples = sample_times(step.duration, options.samples_per_step);
                match (&mut state, &rates) {
                    (State::Pure(psi), _) => {
                        for &t in &samples {
                            let st = State::Pure(propagate_pure(&es, psi, t));
                            record(&mut traj, elapsed + t, &st)?;
                        }
                        *psi = propagate_pure(&es, psi, step.duration);
                    }
                    (State::Mixed(r), Some(rates)) => {
                        let s = evolve_mixed(&es, &spec, rates, r, step.duration, &samples, options, |t, st| {
                            record(&mut traj, elapsed + t, st)
                        })?;
                        log::debug!(
                            "{}: kept {} of {}, {} terms, {} evaluations, lost trace {:.2e}",
                            step.label,
                            s.kept,
                            spec.dim(),
                            s.terms,
                            s.evaluations,
                            s.lost_trace
                        );
                        stats.accumulate(&s);
                    }
                    (State::Mixed(_), None) => unreachable!("mixed states only arise with rates"),
                }
            }
        }
        elapsed += step.duration;
    }
    stats.lost_trace = 1.0 - trace_of(&state);
    let overlap = noon_overlap(&state, &spec, target, PhaseAlignment::BranchOptimized)?;
    let overlap_exact = noon_overlap(&state, &spec, target, PhaseAlignment::Exact)?;
    let ground_population = (0..spec.dim())
        .filter(|&i| i % 3 == Level::G.ordinal())
        .map(|i| match &state {
            State::Pure(p) => p.vector()[i].norm_sqr(),
            State::Mixed(r) => r.matrix()[(i, i)].re,
        })
        .sum();
    Ok(ExecutionResult {
        final_state: state,
        overlap,
        fidelity: overlap.max(0.0).sqrt(),
        overlap_exact,
        ground_population,
        elapsed,
        trajectory: traj,
        stats,
    })
}

fn trace_of(st: &State) -> f64 {
    match st {
        State::Pure(p) => p.norm().powi(2),
        State::Mixed(r) => r.trace(),
    }
}

fn evolve_mixed(
    es: &Eigensystem,
    spec: &BasisSpec,
    rates: &DecoherenceRates,
    rho: &mut DensityMatrix,
    duration: f64,
    samples: &[f64],
    options: &ExecuteOptions,
    mut observe: impl FnMut(f64, &State) -> Result<()>,
) -> Result<LindbladStats> {
    let channels = dressed_channels(es, spec, rates);
    let mut r_eig = congruence_to_eigen(es.vectors(), rho.matrix());
    let stats = evolve_lindblad_eigen(
        es,
        &channels,
        &mut r_eig,
        duration,
        samples,
        &options.lindblad,
        &mut |t, m: &DMatrix<Complex64>| {
            let bare = DensityMatrix(congruence_to_bare(es.vectors(), m));
            observe(t, &State::Mixed(bare))
        },
    )?;
    *rho = DensityMatrix(congruence_to_bare(es.vectors(), &r_eig));
    Ok(stats)
}

/// Bare-basis pure dephasing `γ_e D[|e⟩⟨e|] + γ_f D[|f⟩⟨f|]` for time `t`.
fn idle_dephasing(rho: &mut DensityMatrix, rates: &DecoherenceRates, t: f64) {
    let weight = |i: usize| -> (f64, f64) {
        match i % 3 {
            1 => (1.0, 0.0),
            2 => (0.0, 1.0),
            _ => (0.0, 0.0),
        }
    };
    let n = rho.dim();
    for c in 0..n {
        for r in 0..n {
            let (er, fr) = weight(r);
            let (ec, fc) = weight(c);
            let decay = 0.5 * (rates.gamma_e * (er - ec).powi(2) + rates.gamma_f * (fr - fc).powi(2));
            rho.0[(r, c)] *= (-decay * t).exp();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phys() -> SystemParams {
        let p = SystemParams {
            g_a: 0.03,
            ..SystemParams::default()
        };
        SystemParams {
            g_b: matched_gb(&nominal_spacings(&p)).unwrap(),
            ..p
        }
    }

    #[test]
    fn matched_gb_trivial_cases() {
        let p = SystemParams {
            g_a: 0.0,
            ..SystemParams::default()
        };
        assert_eq!(matched_gb(&p).unwrap(), 0.0);
        // θ = 0 and ω_eg − ω_b = ω_fg − ω_a make the brackets equal.
        let sym = SystemParams {
            theta: 0.0,
            omega_eg: 2.0,
            omega_fg: 1.3,
            ..SystemParams::default()
        };
        assert!((matched_gb(&sym).unwrap() - sym.g_a).abs() < 1e-15);
    }

    #[test]
    fn matched_gb_physical_value() {
        let gb = phys().g_b;
        assert!((gb * 4000.0 - 69.4).abs() < 0.2, "g_b = {} MHz", gb * 4000.0);
    }

    #[test]
    fn plan_counts() {
        let p = phys();
        let o = PlanOptions::default();
        for n in 1..=7 {
            let plan = plan_noon(n, &p, &o).unwrap();
            let big = n.div_ceil(2);
            assert_eq!(plan.pulses(), 2 * (big - 1));
            assert_eq!(plan.resonant_steps(), 2 * big - 1);
            assert_eq!(plan.branch, if n % 2 == 0 { Branch::EvenMatched } else { Branch::Odd });
            assert_eq!(plan.total_time, protocol_duration(&plan));
            let cf = closed_form_duration(&plan).unwrap();
            assert!(
                (plan.total_time - cf).abs() <= 1e-9 * cf,
                "{n}: {} vs {cf}",
                plan.total_time
            );
        }
    }

    #[test]
    fn two_photon_target_is_single_step() {
        let p = phys();
        let plan = plan_noon(2, &p, &PlanOptions::default()).unwrap();
        assert_eq!(plan.steps.len(), 1);
        let g = effective_coupling(&nominal_spacings(&p), ResonanceKind::two_photon_a(0)).unwrap();
        assert!((plan.total_time - PI / (2.0 * g.abs())).abs() < 1e-9);
    }

    #[test]
    fn odd_final_step() {
        let p = phys();
        let plan = plan_noon(3, &p, &PlanOptions::default()).unwrap();
        let last = plan.steps.last().unwrap();
        let lp = last.params();
        assert_eq!((lp.omega_eg, lp.omega_fg, lp.g_b), (p.omega_a, p.omega_b, p.g_a));
        let expect = PI / (2.0 * 3f64.sqrt() * p.g_a * p.theta.cos());
        assert!((last.duration - expect).abs() < 1e-12);
        let transverse = plan_noon(3, &SystemParams { theta: PI / 2.0, ..p }, &PlanOptions::default());
        assert!(transverse.is_err());
    }

    #[test]
    fn unmatched_requires_flag() {
        let p = SystemParams {
            g_a: 0.03,
            g_b: 0.03,
            ..SystemParams::default()
        };
        assert!(matches!(
            plan_noon(4, &p, &PlanOptions::default()),
            Err(Error::Protocol(_))
        ));
        let o = PlanOptions {
            force_unmatched: true,
            ..PlanOptions::default()
        };
        let plan = plan_noon(4, &p, &o).unwrap();
        assert_eq!(plan.branch, Branch::EvenUnmatched);
        // Narrated schedule: N up pulses on eg, N − 1 on fg, one return pulse.
        assert_eq!(plan.pulses(), 4);
        let tau = PI / (2.0 * 0.075);
        let cf = closed_form_duration(&plan).unwrap();
        assert!((plan.total_time - cf - tau).abs() < 1e-9);
    }

    #[test]
    fn programmed_spacings_match_shifts() {
        let p = phys();
        let plan = plan_noon(6, &p, &PlanOptions::default()).unwrap();
        for s in &plan.steps {
            if let StepKind::Resonant { params, resonances } = &s.kind {
                for r in resonances {
                    let spacing = if r.uses_omega_eg() {
                        params.omega_eg
                    } else {
                        params.omega_fg
                    };
                    let probe = if s.label == "final" {
                        nominal_spacings(params)
                    } else {
                        *params
                    };
                    let expect = r.bare_spacing(params) + resonance_shift(&probe, *r, false).unwrap();
                    assert!((spacing - expect).abs() < 1e-15, "{}", s.label);
                }
            }
        }
    }

    #[test]
    fn closed_system_two_photon_target() {
        let p = SystemParams {
            g_b: matched_gb(&nominal_spacings(&SystemParams::default())).unwrap(),
            ..SystemParams::default()
        };
        let plan = plan_noon(2, &p, &PlanOptions::default()).unwrap();
        let res = execute_plan(&plan, &ExecuteOptions::default()).unwrap();
        assert!(res.overlap > 0.95, "overlap {}", res.overlap);
        assert!(res.ground_population > 0.95);
        assert_eq!(res.elapsed, plan.total_time);
    }
}
