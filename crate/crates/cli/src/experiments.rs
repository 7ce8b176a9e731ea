//! Experiment drivers. Each returns its tables and a list of resolved
//! quantities for the manifest; point evaluations fan out over the worker
//! pool and are collected in input order.

use std::f64::consts::PI;

use noon_core::dynamics::{
    evolve_lindblad, evolve_unitary, Channel, DecoherenceRates, DensityMatrix, Observables, PhaseAlignment,
    PulseDirection, PulseMode,
};
use noon_core::hilbert::{BasisSpec, BasisState, StateVector};
use noon_core::model::{build_full, build_h0, build_v, SystemParams};
use noon_core::perturb::{
    effective_coupling, path_sum_second_order, path_sum_third_order, resonance_shift, self_energy, ResonanceKind,
    SelfEnergy,
};
use noon_core::protocol::{
    closed_form_duration, execute_plan, matched_gb, matched_gb_three_photon, plan_noon, plan_three_photon,
    ExecuteOptions, ExecutionResult, PlanOptions, ProtocolPlan, StepKind,
};
use noon_core::spectrum::{
    diagonalize, dress_operator, find_avoided_crossing, locate_resonance, resonance_window, track_branches,
    tune_double_resonance, Sweep, SweepAxis,
};
use num_complex::Complex64;

use crate::config::{
    format_superposition, CouplingB, DecoherenceSettings, GridAxis, GridSettings, PathSumSettings, ProtocolSettings,
    RabiSettings, Route, RunConfig, ScanSettings, Settings, ShiftModel, Spacing,
};
use crate::output::{format_value, Cell, Table};
use crate::parallel::Pool;
use crate::RunError;

/// Tables keyed by file suffix (`""` for the main table) and manifest lines.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub tables: Vec<(String, Table)>,
    pub summary: Vec<(String, String)>,
}

impl Outcome {
    fn note(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.summary.push((key.into(), value.into()));
    }

    fn note_num(&mut self, key: impl Into<String>, x: f64) {
        self.note(key, format_value(x));
    }

    fn note_params(&mut self, prefix: &str, p: &SystemParams) {
        for (k, v) in [
            ("omega_b", p.omega_b),
            ("omega_eg", p.omega_eg),
            ("omega_fg", p.omega_fg),
            ("g_a", p.g_a),
            ("g_b", p.g_b),
            ("theta", p.theta),
            ("g_ab", p.g_ab),
        ] {
            self.note_num(format!("{prefix}.{k}"), v);
        }
    }
}

pub fn run(cfg: &RunConfig, pool: &Pool) -> Result<Outcome, RunError> {
    match &cfg.settings {
        Settings::Scan(s) => scan(cfg, s, pool),
        Settings::CrossingGrid(s) => crossing_grid(cfg, s, pool),
        Settings::Rabi(s) => rabi(cfg, s),
        Settings::Decoherence(s) => decoherence(cfg, s, pool),
        Settings::Protocol(s) => protocol(cfg, s, pool),
        Settings::PathSum(s) => pathsum(cfg, s),
    }
}

/// Work the run would do, without doing the expensive parts.
pub fn plan(cfg: &RunConfig) -> Result<Vec<String>, RunError> {
    let mut lines = Vec::new();
    match &cfg.settings {
        Settings::Scan(s) => {
            let spec = cfg.basis.unwrap_or(default_basis(s.kind));
            lines.push(format!(
                "{} diagonalisations of dimension {} over [{}, {}]",
                s.points,
                spec.dim(),
                format_value(s.lo),
                format_value(s.hi)
            ));
        }
        Settings::CrossingGrid(s) => {
            let spec = cfg.basis.unwrap_or(default_basis(s.kind));
            lines.push(format!(
                "{} crossing searches for {} (n = {}) varying {}, dimension {}",
                s.values.len(),
                s.kind.tag,
                s.kind.n_offset,
                s.axis.name(),
                spec.dim()
            ));
        }
        Settings::Rabi(s) => {
            let spec = cfg.basis.unwrap_or_else(|| rabi_basis(s));
            let solver = if damped(&s.rates) { "master equation" } else { "unitary" };
            lines.push(format!(
                "{solver} evolution from {} with {} samples, dimension {}",
                format_superposition(&s.initial),
                s.samples,
                spec.dim()
            ));
        }
        Settings::Decoherence(s) => {
            lines.push(format!(
                "{} master-equation runs of the {} schedule for N = {}",
                s.gammas.len(),
                s.route.name(),
                s.target
            ));
            if s.route == Route::TwoPhoton {
                let plan = plan_noon(s.target, &noon_params(cfg, s.target)?, &PlanOptions::default())?;
                lines.extend(plan.to_string().lines().map(str::to_string));
            } else {
                lines.push("three-photon spacings are tuned numerically at run time".into());
            }
        }
        Settings::Protocol(s) => {
            for &n in &s.targets {
                for &m in &s.shifts {
                    let plan = plan_noon(n, &noon_params(cfg, n)?, &plan_options(s, m))?;
                    lines.push(format!("# target {n}, {} shifts", m.name()));
                    lines.extend(plan.to_string().lines().map(str::to_string));
                }
            }
        }
        Settings::PathSum(s) => {
            for k in &s.resonances {
                lines.push(format!("path sums for {} (n = {})", k.tag, k.n_offset));
            }
        }
    }
    Ok(lines)
}

fn default_basis(kind: ResonanceKind) -> BasisSpec {
    BasisSpec::for_photon_number(kind.n_offset + kind.order())
}

fn damped(rates: &Option<DecoherenceRates>) -> bool {
    rates.map(|r| !r.is_zero()).unwrap_or(false)
}

/// Static parameters for a resonance of order `order`: `auto` spacings at
/// `order·ω_mode` and `matched` g_b from the closed forms.
fn static_params(cfg: &RunConfig, order: usize) -> Result<SystemParams, RunError> {
    let k = order as f64;
    let p = cfg.params.resolve(k, k * cfg.params.omega_b, cfg.params.g_a);
    let g_b = match cfg.params.g_b {
        CouplingB::Value(x) => x,
        CouplingB::Matched if order == 3 => matched_gb_three_photon(&p)?,
        CouplingB::Matched => matched_gb(&p)?,
    };
    Ok(SystemParams { g_b, ..p })
}

/// Base parameters of an `n`-photon schedule: `matched` means matched g_b
/// for even targets and `g_b = g_a` for odd ones.
fn noon_params(cfg: &RunConfig, n: usize) -> Result<SystemParams, RunError> {
    let p = cfg.params.resolve(2.0, 2.0 * cfg.params.omega_b, cfg.params.g_a);
    let g_b = match cfg.params.g_b {
        CouplingB::Value(x) => x,
        CouplingB::Matched if n % 2 == 1 => p.g_a,
        CouplingB::Matched => matched_gb(&p)?,
    };
    Ok(SystemParams { g_b, ..p })
}

fn axis_name(kind: ResonanceKind) -> &'static str {
    if kind.uses_omega_eg() {
        "omega_eg"
    } else {
        "omega_fg"
    }
}

fn scan(cfg: &RunConfig, s: &ScanSettings, pool: &Pool) -> Result<Outcome, RunError> {
    let p = static_params(cfg, s.kind.order())?;
    let spec = cfg.basis.unwrap_or(default_basis(s.kind));
    let axis = if s.kind.uses_omega_eg() {
        SweepAxis::OmegaEg
    } else {
        SweepAxis::OmegaFg
    };
    let sweep = Sweep {
        points: s.points,
        ..Sweep::new(axis, s.lo, s.hi)
    };
    let branches = track_branches(&p, &spec, &sweep, s.kind.states(), s.crosstalk)?;
    let levels = s.levels.min(spec.dim());
    let spectra = pool.map(&branches.values, |&x| -> Result<Vec<f64>, RunError> {
        let es = diagonalize(&build_full(&axis.apply(&p, x), &spec, s.crosstalk))?;
        Ok(es.energies().iter().take(levels).copied().collect())
    });
    let (excited, ground) = s.kind.states();
    let mut header = vec![axis_name(s.kind).to_string()];
    if cfg.units.is_some() {
        header.push(format!("{}_ghz", axis_name(s.kind)));
    }
    header.push(format!("branch_{}", crate::config::format_state(&excited)));
    header.push(format!("branch_{}", crate::config::format_state(&ground)));
    header.push("gap".into());
    header.extend((0..levels).map(|k| format!("e{k}")));
    let mut table = Table::new(header);
    for (k, spectrum) in spectra.into_iter().enumerate() {
        let x = branches.values[k];
        let mut row = vec![Cell::Num(x)];
        if let Some(u) = cfg.units {
            row.push(Cell::Num(u.to_ghz(x)));
        }
        row.push(branches.first[k].into());
        row.push(branches.second[k].into());
        row.push((branches.first[k] - branches.second[k]).abs().into());
        row.extend(spectrum?.into_iter().map(Cell::Num));
        table.push(row);
    }
    let mut out = Outcome::default();
    out.note_params("resolved", &p);
    out.note("resolved.basis", format!("{},{}", spec.cutoff_a(), spec.cutoff_b()));
    match find_avoided_crossing(&p, &spec, &Sweep::new(axis, s.lo, s.hi), s.kind.states()) {
        Ok(c) => {
            out.note_num("crossing.location", c.location);
            out.note_num("crossing.gap", c.gap);
        }
        Err(e) => out.note("crossing", format!("none ({e})")),
    }
    if let Ok(g) = effective_coupling(&s.kind.at_bare_resonance(&p), s.kind) {
        out.note_num("closed_form.gap", 2.0 * g.abs());
    }
    if let Ok(d) = resonance_shift(&s.kind.at_bare_resonance(&p), s.kind, false) {
        out.note_num("closed_form.location", s.kind.bare_spacing(&p) + d);
    }
    out.tables.push((String::new(), table));
    Ok(out)
}

/// One crossing-grid point.
struct GridPoint {
    closed_coupling: f64,
    half_gap: f64,
    closed_shift: f64,
    shift: f64,
    location: f64,
}

fn crossing_grid(cfg: &RunConfig, s: &GridSettings, pool: &Pool) -> Result<Outcome, RunError> {
    let kind = s.kind;
    let spec = cfg.basis.unwrap_or(default_basis(kind));
    let base = static_params(cfg, kind.order())?;
    let point = |&g: &f64| -> Result<GridPoint, RunError> {
        let mut p = match s.axis {
            GridAxis::GA => SystemParams { g_a: g, ..base },
            GridAxis::GB => SystemParams { g_b: g, ..base },
        };
        if s.axis == GridAxis::GA && cfg.params.g_b == CouplingB::Matched {
            p.g_b = if kind.order() == 3 {
                matched_gb_three_photon(&p)?
            } else {
                matched_gb(&p)?
            };
        }
        let bare = kind.at_bare_resonance(&p);
        let closed_coupling = effective_coupling(&bare, kind)?;
        let closed_shift = resonance_shift(&bare, kind, false)?;
        let window = s.half_window.unwrap_or_else(|| resonance_window(&bare, kind));
        let c = locate_resonance(&bare, &spec, kind, window)?;
        Ok(GridPoint {
            closed_coupling,
            half_gap: 0.5 * c.gap,
            closed_shift,
            shift: c.location - kind.bare_spacing(&p),
            location: c.location,
        })
    };
    let points = pool.map(&s.values, point);
    let g = s.axis.name();
    let mut header = vec![g.to_string()];
    if cfg.units.is_some() {
        header.push(format!("{g}_mhz"));
    }
    header.extend(
        [
            "closed_coupling",
            "numeric_half_gap",
            "coupling_rel_err",
            "closed_shift",
            "numeric_shift",
            "shift_rel_err",
            axis_name(kind),
        ]
        .map(String::from),
    );
    let mut table = Table::new(header);
    let mut worst = (0.0f64, 0.0f64);
    for (&x, pt) in s.values.iter().zip(points) {
        let pt = pt?;
        let cerr = pt.half_gap / pt.closed_coupling.abs() - 1.0;
        let serr = pt.shift / pt.closed_shift - 1.0;
        worst = (worst.0.max(cerr.abs()), worst.1.max(serr.abs()));
        let mut row = vec![Cell::Num(x)];
        if let Some(u) = cfg.units {
            row.push(Cell::Num(u.to_mhz(x)));
        }
        row.extend(
            [
                pt.closed_coupling,
                pt.half_gap,
                cerr,
                pt.closed_shift,
                pt.shift,
                serr,
                pt.location,
            ]
            .map(Cell::Num),
        );
        table.push(row);
    }
    let mut out = Outcome::default();
    out.note_params("resolved", &base);
    out.note("resolved.basis", format!("{},{}", spec.cutoff_a(), spec.cutoff_b()));
    out.note_num("max_abs.coupling_rel_err", worst.0);
    out.note_num("max_abs.shift_rel_err", worst.1);
    out.tables.push((String::new(), table));
    Ok(out)
}

fn rabi_basis(s: &RabiSettings) -> BasisSpec {
    let route = match s.route {
        Route::TwoPhoton => s.n + 2,
        Route::ThreePhoton => 3,
    };
    let states = s.initial.iter().chain(s.track.iter().flatten());
    let n = states
        .map(|b| b.n_a.max(b.n_b))
        .fold(route.max(s.noon.unwrap_or(0)), usize::max);
    BasisSpec::for_photon_number(n)
}

fn superposition(spec: &BasisSpec, states: &[BasisState]) -> Result<StateVector, RunError> {
    let one = Complex64::new(1.0, 0.0);
    let terms: Vec<_> = states.iter().map(|s| (one, *s)).collect();
    Ok(spec.superposition(&terms)?)
}

fn rabi(cfg: &RunConfig, s: &RabiSettings) -> Result<Outcome, RunError> {
    let spec = cfg.basis.unwrap_or_else(|| rabi_basis(s));
    let (kind_a, kind_b) = match s.route {
        Route::TwoPhoton => (ResonanceKind::two_photon_a(s.n), ResonanceKind::two_photon_b(s.n)),
        Route::ThreePhoton => (ResonanceKind::three_photon_a(), ResonanceKind::three_photon_b()),
    };
    let order = kind_a.order();
    let base = static_params(cfg, order)?;
    let auto = (
        cfg.params.omega_eg == Spacing::Auto,
        cfg.params.omega_fg == Spacing::Auto,
    );
    let crosstalk = base.g_ab > 0.0;
    let mut p = base;
    match s.route {
        Route::TwoPhoton => {
            if auto.0 {
                p.omega_eg = kind_a.bare_spacing(&base) + resonance_shift(&base, kind_a, crosstalk)?;
            }
            if auto.1 {
                p.omega_fg = kind_b.bare_spacing(&base) + resonance_shift(&base, kind_b, crosstalk)?;
            }
        }
        Route::ThreePhoton => {
            if auto.0 || auto.1 {
                let window = resonance_window(&base, kind_a).max(resonance_window(&base, kind_b));
                let tuned = tune_double_resonance(&base, &spec, kind_a, kind_b, window)?;
                if auto.0 {
                    p.omega_eg = tuned.omega_eg;
                }
                if auto.1 {
                    p.omega_fg = tuned.omega_fg;
                }
            }
        }
    }
    let g_eff = effective_coupling(&kind_a.at_bare_resonance(&base), kind_a)?;
    let t_final = s.t_final.unwrap_or(PI / g_eff.abs());
    let psi0 = superposition(&spec, &s.initial)?;
    let targets = s
        .track
        .iter()
        .map(|t| superposition(&spec, t))
        .collect::<Result<Vec<_>, _>>()?;
    let obs = Observables {
        targets,
        noon: s.noon,
        alignment: PhaseAlignment::BranchOptimized,
    };
    let h = build_full(&p, &spec, crosstalk);
    let traj = match s.rates.filter(|r| !r.is_zero()) {
        None => evolve_unitary(&h, &psi0, t_final, s.samples, &obs, Some(&spec))?.0,
        Some(rates) => {
            rates.validate()?;
            let es = diagonalize(&h)?;
            let ops = Channel::ALL
                .iter()
                .filter(|c| rates.rate(**c) > 0.0)
                .map(|&c| Ok((dress_operator(&es, &c.bare_operator(&spec), None)?, rates.rate(c))))
                .collect::<Result<Vec<_>, noon_core::Error>>()?;
            let rho0 = DensityMatrix::from_pure(&psi0);
            evolve_lindblad(
                &h,
                &ops,
                &rho0,
                t_final,
                s.samples,
                &obs,
                Some(&spec),
                &cfg.solver.lindblad,
            )?
            .0
        }
    };
    let mut header = vec!["t".to_string()];
    if cfg.units.is_some() {
        header.push("t_us".into());
    }
    header.extend(s.track.iter().map(|t| format!("pop_{}", format_superposition(t))));
    if let Some(n) = s.noon {
        header.push(format!("noon{n}_overlap"));
    }
    header.push("trace".into());
    let mut table = Table::new(header);
    let mut peaks = vec![0.0f64; s.track.len()];
    for (k, &t) in traj.times.iter().enumerate() {
        let mut row = vec![Cell::Num(t)];
        if let Some(u) = cfg.units {
            row.push(Cell::Num(u.time_to_us(t)));
        }
        for (j, &v) in traj.populations[k].iter().enumerate() {
            peaks[j] = peaks[j].max(v);
            row.push(Cell::Num(v));
        }
        if let Some(f) = &traj.noon_overlap {
            row.push(Cell::Num(f[k]));
        }
        row.push(Cell::Num(traj.trace[k]));
        table.push(row);
    }
    let mut out = Outcome::default();
    out.note_params("resolved", &p);
    out.note("resolved.basis", format!("{},{}", spec.cutoff_a(), spec.cutoff_b()));
    out.note_num("resolved.g_eff", g_eff);
    out.note_num("resolved.t_final", t_final);
    for (t, v) in s.track.iter().zip(peaks) {
        out.note_num(format!("peak.{}", format_superposition(t)), v);
    }
    if let Some(f) = traj.noon_overlap.as_ref().and_then(|f| f.last()) {
        out.note_num("final.noon_overlap", *f);
    }
    out.tables.push((String::new(), table));
    Ok(out)
}

fn execution_cells(r: &ExecutionResult) -> Vec<Cell> {
    [
        r.overlap,
        r.fidelity,
        r.overlap_exact,
        r.ground_population,
        r.stats.lost_trace,
    ]
    .map(Cell::Num)
    .to_vec()
}

const EXECUTION_COLUMNS: [&str; 5] = [
    "overlap",
    "fidelity",
    "overlap_exact",
    "ground_population",
    "lost_trace",
];

fn decoherence(cfg: &RunConfig, s: &DecoherenceSettings, pool: &Pool) -> Result<Outcome, RunError> {
    let (plan, spec) = match s.route {
        Route::TwoPhoton => {
            let plan = plan_noon(s.target, &noon_params(cfg, s.target)?, &PlanOptions::default())?;
            let spec = cfg.basis.unwrap_or_else(|| plan.basis());
            (plan, spec)
        }
        Route::ThreePhoton => {
            let p = static_params(cfg, 3)?;
            let spec = cfg.basis.unwrap_or(BasisSpec::new(6, 6));
            (plan_three_photon(&p, &spec)?, spec)
        }
    };
    let results = pool.map(&s.gammas, |&gamma| -> Result<ExecutionResult, RunError> {
        let options = ExecuteOptions {
            rates: Some(DecoherenceRates::uniform(gamma)),
            lindblad: cfg.solver.lindblad,
            basis: Some(spec),
            ..ExecuteOptions::default()
        };
        Ok(execute_plan(&plan, &options)?)
    });
    let mut header = vec!["gamma".to_string()];
    if cfg.units.is_some() {
        header.push("gamma_per_us".into());
    }
    header.extend(EXECUTION_COLUMNS.map(String::from));
    let mut table = Table::new(header);
    for (&gamma, r) in s.gammas.iter().zip(results) {
        let r = r?;
        let mut row = vec![Cell::Num(gamma)];
        if let Some(u) = cfg.units {
            row.push(Cell::Num(u.to_per_us(gamma)));
        }
        row.extend(execution_cells(&r));
        table.push(row);
    }
    let mut out = Outcome::default();
    note_plan(&mut out, &plan, &spec);
    out.tables.push((String::new(), table));
    out.tables
        .push(("schedule".into(), schedule_table(&[(s.route.name(), &plan)])));
    Ok(out)
}

fn note_plan(out: &mut Outcome, plan: &ProtocolPlan, spec: &BasisSpec) {
    out.note_params("resolved", &plan.base);
    out.note("resolved.basis", format!("{},{}", spec.cutoff_a(), spec.cutoff_b()));
    out.note("plan.branch", plan.branch.to_string());
    out.note("plan.steps", plan.steps.len().to_string());
    out.note_num("plan.total_time", plan.total_time);
}

fn schedule_table(plans: &[(&str, &ProtocolPlan)]) -> Table {
    let mut t = Table::new([
        "target_n", "shifts", "step", "label", "kind", "duration", "omega_a", "omega_b", "omega_eg", "omega_fg", "g_b",
    ]);
    for (shifts, plan) in plans {
        for (i, step) in plan.steps.iter().enumerate() {
            let p = step.params();
            let kind = match &step.kind {
                StepKind::Resonant { resonances, .. } if resonances.is_empty() => "evolve:single_photon".to_string(),
                StepKind::Resonant { resonances, .. } => {
                    let r: Vec<String> = resonances
                        .iter()
                        .map(|r| format!("{}({})", r.tag, r.n_offset))
                        .collect();
                    format!("evolve:{}", r.join("+"))
                }
                StepKind::Pulse { pulse, direction, .. } => format!(
                    "pulse:{:?}:{}",
                    pulse.pair,
                    match direction {
                        PulseDirection::Up => "up",
                        PulseDirection::Down => "down",
                    }
                )
                .to_lowercase(),
            };
            let mut row = vec![
                Cell::from(plan.target_n),
                Cell::from(*shifts),
                Cell::from(i + 1),
                Cell::from(step.label.as_str()),
                Cell::from(kind),
            ];
            row.extend([step.duration, p.omega_a, p.omega_b, p.omega_eg, p.omega_fg, p.g_b].map(Cell::Num));
            t.push(row);
        }
    }
    t
}

fn plan_options(s: &ProtocolSettings, m: ShiftModel) -> PlanOptions {
    PlanOptions {
        force_unmatched: s.force_unmatched,
        with_crosstalk_shifts: m == ShiftModel::Crosstalk,
        decouple_detuning: s.decouple_detuning,
        rabi_eg: s.rabi_eg,
        rabi_fg: s.rabi_fg,
        ..PlanOptions::default()
    }
}

fn protocol(cfg: &RunConfig, s: &ProtocolSettings, pool: &Pool) -> Result<Outcome, RunError> {
    let mut jobs = Vec::new();
    for &n in &s.targets {
        for &m in &s.shifts {
            jobs.push((n, m, plan_noon(n, &noon_params(cfg, n)?, &plan_options(s, m))?));
        }
    }
    let results = pool.map(&jobs, |(_, _, plan)| -> Result<(ExecutionResult, f64), RunError> {
        let options = ExecuteOptions {
            rates: s.rates,
            pulse_mode: s.pulse_mode,
            lindblad: cfg.solver.lindblad,
            samples_per_step: s.samples_per_step,
            include_crosstalk: s.include_crosstalk,
            retune_idle_time: s.retune_idle_time,
            basis: cfg.basis,
        };
        Ok((execute_plan(plan, &options)?, closed_form_duration(plan)?))
    });
    let mut header: Vec<String> = [
        "target_n",
        "shifts",
        "branch",
        "resonant_steps",
        "pulses",
        "g_b",
        "total_time",
    ]
    .map(String::from)
    .to_vec();
    if cfg.units.is_some() {
        header.push("total_time_us".into());
    }
    header.push("closed_form_time".into());
    header.extend(EXECUTION_COLUMNS.map(String::from));
    let mut table = Table::new(header);
    let mut traj_header = vec!["target_n".to_string(), "shifts".into(), "t".into()];
    if cfg.units.is_some() {
        traj_header.push("t_us".into());
    }
    traj_header.extend(["noon_overlap".to_string(), "trace".into()]);
    let mut traj_table = Table::new(traj_header);
    for ((n, m, plan), r) in jobs.iter().zip(results) {
        let (r, closed) = r?;
        let mut row = vec![
            Cell::from(*n),
            Cell::from(m.name()),
            Cell::from(plan.branch.to_string()),
            Cell::from(plan.resonant_steps()),
            Cell::from(plan.pulses()),
            Cell::Num(plan.base.g_b),
            Cell::Num(plan.total_time),
        ];
        if let Some(u) = cfg.units {
            row.push(Cell::Num(u.time_to_us(plan.total_time)));
        }
        row.push(Cell::Num(closed));
        row.extend(execution_cells(&r));
        table.push(row);
        let overlaps = r.trajectory.noon_overlap.clone().unwrap_or_default();
        for (k, &t) in r.trajectory.times.iter().enumerate() {
            let mut row = vec![Cell::from(*n), Cell::from(m.name()), Cell::Num(t)];
            if let Some(u) = cfg.units {
                row.push(Cell::Num(u.time_to_us(t)));
            }
            row.push(Cell::Num(overlaps[k]));
            row.push(Cell::Num(r.trajectory.trace[k]));
            traj_table.push(row);
        }
    }
    let mut out = Outcome::default();
    out.note(
        "pulse_mode",
        match s.pulse_mode {
            PulseMode::Instantaneous => "instantaneous",
            PulseMode::FiniteDuration => "finite",
        },
    );
    out.tables.push((String::new(), table));
    let named: Vec<(&str, &ProtocolPlan)> = jobs.iter().map(|(_, m, p)| (m.name(), p)).collect();
    out.tables.push(("schedule".into(), schedule_table(&named)));
    if s.samples_per_step > 0 {
        out.tables.push(("trajectory".into(), traj_table));
    }
    Ok(out)
}

fn pathsum(cfg: &RunConfig, s: &PathSumSettings) -> Result<Outcome, RunError> {
    let mut table = Table::new([
        "quantity",
        "resonance",
        "n",
        "state",
        "closed_form",
        "path_sum",
        "abs_diff",
        "paths",
    ]);
    let mut worst = 0.0f64;
    for &kind in &s.resonances {
        let p = kind.at_bare_resonance(&static_params(cfg, kind.order())?);
        let spec = cfg.basis.unwrap_or(default_basis(kind));
        let (h0, v) = (build_h0(&p, &spec), build_v(&p, &spec));
        let (excited, ground) = kind.states();
        let paths = if kind.order() == 2 {
            path_sum_second_order(&h0, &v, &spec, excited, ground)?
        } else {
            path_sum_third_order(&h0, &v, &spec, excited, ground)?
        };
        let closed = effective_coupling(&p, kind)?;
        let mut rows = vec![("coupling", excited, closed, paths.value, paths.paths.len())];
        if kind.n_offset == 0 {
            for which in SelfEnergy::ALL.into_iter().filter(|w| w.resonance() == kind) {
                let state = which.state();
                let diag = path_sum_second_order(&h0, &v, &spec, state, state)?;
                rows.push((
                    "self_energy",
                    state,
                    self_energy(&p, which)?,
                    diag.value,
                    diag.paths.len(),
                ));
            }
        }
        for (what, state, c, ps, count) in rows {
            worst = worst.max((c - ps).abs());
            table.push(vec![
                Cell::from(what),
                Cell::from(kind.tag.to_string()),
                Cell::from(kind.n_offset),
                Cell::from(crate::config::format_state(&state)),
                Cell::Num(c),
                Cell::Num(ps),
                Cell::Num((c - ps).abs()),
                Cell::from(count),
            ]);
        }
    }
    let mut out = Outcome::default();
    out.note_num("max_abs_diff", worst);
    out.tables.push((String::new(), table));
    Ok(out)
}
