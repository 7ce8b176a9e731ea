//! Run configuration: `key = value` lines grouped under `[section]` headers,
//! `#` comments. Every key is checked; unknown keys and sections are errors.
//!
//! Parameters come either from `[params]` in units of `ω_a` or from
//! `[physical]` in GHz/MHz with the reference `omega_a_ghz`; the two blocks
//! are exclusive and unit-suffixed keys are rejected in dimensionless mode.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use noon_core::dynamics::{DecoherenceRates, LindbladBackend, LindbladOptions, PulseMode};
use noon_core::hilbert::{BasisSpec, BasisState, Level};
use noon_core::model::SystemParams;
use noon_core::perturb::{ResonanceKind, ResonanceTag};

use crate::units::PhysicalScale;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: [{section}] {key}: {message}")]
    Value {
        line: usize,
        section: String,
        key: String,
        message: String,
    },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("missing key `{key}` in [{section}]")]
    Missing { section: String, key: String },
    #[error("{0}")]
    Invalid(String),
}

impl ConfigError {
    /// Fields of the machine-readable error record.
    pub fn record(&self) -> Vec<(&'static str, String)> {
        let mut r = vec![(
            "kind",
            match self {
                ConfigError::Io { .. } => "io",
                ConfigError::Syntax { .. } => "syntax",
                ConfigError::Value { .. } => "value",
                ConfigError::UnknownKey { .. } => "unknown_key",
                ConfigError::UnknownSection { .. } => "unknown_section",
                ConfigError::Missing { .. } => "missing_key",
                ConfigError::Invalid(_) => "invalid",
            }
            .to_string(),
        )];
        match self {
            ConfigError::Syntax { line, .. } => r.push(("line", line.to_string())),
            ConfigError::Value { line, section, key, .. } | ConfigError::UnknownKey { line, section, key } => {
                r.push(("line", line.to_string()));
                r.push(("section", section.clone()));
                r.push(("key", key.clone()));
            }
            ConfigError::UnknownSection { line, section } => {
                r.push(("line", line.to_string()));
                r.push(("section", section.clone()));
            }
            ConfigError::Missing { section, key } => {
                r.push(("section", section.clone()));
                r.push(("key", key.clone()));
            }
            _ => {}
        }
        r
    }
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Clone, Debug, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Parsed but uninterpreted file. The unnamed top-level section is `""`.
#[derive(Clone, Debug, Default)]
pub struct Document {
    sections: BTreeMap<String, Section>,
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_lowercase() || ch == '_')
        && c.all(|ch| ch.is_ascii_lowercase() || ch.is_ascii_digit() || ch == '_')
}

impl Document {
    pub fn parse(text: &str) -> Result<Document> {
        let mut doc = Document::default();
        doc.sections.insert(String::new(), Section::default());
        let mut current = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax {
                        line,
                        message: format!("unterminated section header `{body}`"),
                    })?
                    .trim();
                if !is_ident(name) {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("invalid section name `{name}`"),
                    });
                }
                if doc.sections.contains_key(name) {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("duplicate section [{name}]"),
                    });
                }
                doc.sections.insert(
                    name.to_string(),
                    Section {
                        line,
                        entries: BTreeMap::new(),
                    },
                );
                current = name.to_string();
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value` or `[section]`, found `{body}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !is_ident(key) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("invalid key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("empty value for `{key}`"),
                });
            }
            let section = doc.sections.get_mut(&current).expect("current section exists");
            if section.entries.contains_key(key) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            section.entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(doc)
    }

    fn has(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    /// Takes a section out for reading; absent sections read as empty.
    fn take(&mut self, name: &str) -> Reader {
        let s = self.sections.remove(name).unwrap_or_default();
        Reader {
            name: name.to_string(),
            line: s.line,
            entries: s.entries,
            seen: BTreeMap::new(),
        }
    }

    /// Fails on the first section nobody took.
    fn finish(self) -> Result<()> {
        match self.sections.into_iter().next() {
            None => Ok(()),
            Some((section, s)) => {
                if let Some((key, e)) = s.entries.into_iter().next() {
                    if section.is_empty() {
                        return Err(ConfigError::UnknownKey {
                            line: e.line,
                            section: "top".into(),
                            key,
                        });
                    }
                }
                Err(ConfigError::UnknownSection { line: s.line, section })
            }
        }
    }
}

/// Consuming accessor over one section.
struct Reader {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
    /// Lines of consumed keys, for checks made after reading.
    seen: BTreeMap<String, usize>,
}

impl Reader {
    fn label(&self) -> String {
        if self.name.is_empty() {
            "top".into()
        } else {
            self.name.clone()
        }
    }

    fn value_error(&self, key: &str, line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            line,
            section: self.label(),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::Missing {
            section: self.label(),
            key: key.to_string(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<Entry> {
        let e = self.entries.remove(key)?;
        self.seen.insert(key.to_string(), e.line);
        Some(e)
    }

    /// Line of a consumed key or of its unit-suffixed spelling.
    fn line_of(&self, key: &str) -> usize {
        self.seen
            .iter()
            .find(|(k, _)| *k == key || k.strip_prefix(key).is_some_and(|s| s.starts_with('_')))
            .map(|(_, l)| *l)
            .unwrap_or(self.line)
    }

    fn parse_with<T>(&mut self, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).map_err(|m| self.value_error(key, e.line, m)),
        }
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, parse_f64)
    }

    fn non_negative(&mut self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, |s| {
            let x = parse_f64(s)?;
            if x < 0.0 {
                return Err(format!("must be non-negative, got {x}"));
            }
            Ok(x)
        })
    }

    fn positive(&mut self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, |s| {
            let x = parse_f64(s)?;
            if x <= 0.0 {
                return Err(format!("must be positive, got {x}"));
            }
            Ok(x)
        })
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, |s| {
            s.parse::<usize>()
                .map_err(|_| format!("expected a non-negative integer, found `{s}`"))
        })
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        self.parse_with(key, |s| match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("expected true or false, found `{s}`")),
        })
    }

    fn text(&mut self, key: &str) -> Option<String> {
        self.raw(key).map(|e| e.value)
    }

    fn list<T>(&mut self, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<Vec<T>>> {
        self.parse_with(key, |s| {
            let items = s
                .split(',')
                .map(str::trim)
                .map(&f)
                .collect::<std::result::Result<Vec<T>, String>>()?;
            if items.is_empty() {
                return Err("empty list".into());
            }
            Ok(items)
        })
    }

    /// Either of two spellings of the same quantity, at most one present.
    fn either(&self, a: &str, b: &str) -> Result<()> {
        if let (Some(_), Some(e)) = (self.entries.get(a), self.entries.get(b)) {
            return Err(self.value_error(b, e.line, format!("conflicts with `{a}`")));
        }
        Ok(())
    }

    /// Rejects keys carrying a physical unit suffix.
    fn forbid_units(&self) -> Result<()> {
        for (k, e) in &self.entries {
            if UNIT_SUFFIXES.iter().any(|s| k.ends_with(s)) {
                return Err(self.value_error(k, e.line, "unit-suffixed keys need a [physical] block with omega_a_ghz"));
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, e)) => Err(ConfigError::UnknownKey {
                line: e.line,
                section: if self.name.is_empty() { "top".into() } else { self.name },
                key,
            }),
        }
    }
}

/// `_per_us` is covered by `_us`.
const UNIT_SUFFIXES: [&str; 3] = ["_ghz", "_mhz", "_us"];

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("expected a number, found `{s}`"))?;
    if !x.is_finite() {
        return Err(format!("expected a finite number, found `{s}`"));
    }
    Ok(x)
}

/// `n_a:n_b:level`, for example `2:0:g`.
pub fn parse_state(s: &str) -> std::result::Result<BasisState, String> {
    let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
    let bad = || format!("expected a state `n_a:n_b:level`, found `{s}`");
    if parts.len() != 3 {
        return Err(bad());
    }
    let n_a = parts[0].parse().map_err(|_| bad())?;
    let n_b = parts[1].parse().map_err(|_| bad())?;
    let level = match parts[2] {
        "g" => Level::G,
        "e" => Level::E,
        "f" => Level::F,
        _ => return Err(bad()),
    };
    Ok(BasisState::new(n_a, n_b, level))
}

pub fn format_state(s: &BasisState) -> String {
    format!("{}:{}:{}", s.n_a, s.n_b, s.level)
}

/// Equal superposition of states joined by `+`.
pub fn parse_superposition(s: &str) -> std::result::Result<Vec<BasisState>, String> {
    let states = s
        .split('+')
        .map(parse_state)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    for (i, a) in states.iter().enumerate() {
        if states[..i].contains(a) {
            return Err(format!("state {} repeated in `{s}`", format_state(a)));
        }
    }
    Ok(states)
}

pub fn format_superposition(states: &[BasisState]) -> String {
    states.iter().map(format_state).collect::<Vec<_>>().join("+")
}

fn parse_tag(s: &str) -> std::result::Result<ResonanceTag, String> {
    Ok(match s {
        "two_photon_a" => ResonanceTag::TwoPhotonA,
        "two_photon_b" => ResonanceTag::TwoPhotonB,
        "three_photon_a" => ResonanceTag::ThreePhotonA,
        "three_photon_b" => ResonanceTag::ThreePhotonB,
        _ => {
            return Err(format!(
                "unknown resonance `{s}` (two_photon_a, two_photon_b, three_photon_a, three_photon_b)"
            ))
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    /// Eigenvalues and tracked branches across a spacing sweep.
    ScanCrossing,
    /// Numerical half-gap against the closed-form coupling over a grid.
    CouplingVsG,
    /// Numerical crossing offset against the closed-form shift over a grid.
    ShiftVsG,
    /// Closed-system (or damped) evolution from a chosen initial state.
    Rabi,
    /// NOON overlap against a uniform decoherence rate.
    DecoherenceSweep,
    /// NOON preparation schedules.
    Protocol,
    /// NOON schedules with both shift models, targets 2 to 6 by default.
    Table1,
    /// Closed forms against brute-force path sums.
    PathsumReport,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::ScanCrossing,
        Experiment::CouplingVsG,
        Experiment::ShiftVsG,
        Experiment::Rabi,
        Experiment::DecoherenceSweep,
        Experiment::Protocol,
        Experiment::Table1,
        Experiment::PathsumReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ScanCrossing => "scan_crossing",
            Experiment::CouplingVsG => "coupling_vs_g",
            Experiment::ShiftVsG => "shift_vs_g",
            Experiment::Rabi => "rabi",
            Experiment::DecoherenceSweep => "decoherence_sweep",
            Experiment::Protocol => "protocol",
            Experiment::Table1 => "table1",
            Experiment::PathsumReport => "pathsum_report",
        }
    }

    fn parse(s: &str) -> std::result::Result<Experiment, String> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment `{s}` ({})", names.join(", "))
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A qutrit spacing: a number or `auto` (chosen by the experiment).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Spacing {
    Auto,
    Value(f64),
}

/// `g_b`: a number or `matched`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CouplingB {
    Matched,
    Value(f64),
}

/// Model parameters in units of `ω_a` before experiment-specific resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamSpec {
    pub omega_b: f64,
    pub omega_eg: Spacing,
    pub omega_fg: Spacing,
    pub g_a: f64,
    pub g_b: CouplingB,
    pub theta: f64,
    pub g_ab: f64,
}

impl ParamSpec {
    /// Parameters with explicit values where given and the fallbacks otherwise.
    pub fn resolve(&self, omega_eg: f64, omega_fg: f64, g_b: f64) -> SystemParams {
        SystemParams {
            omega_a: 1.0,
            omega_b: self.omega_b,
            omega_eg: match self.omega_eg {
                Spacing::Value(x) => x,
                Spacing::Auto => omega_eg,
            },
            omega_fg: match self.omega_fg {
                Spacing::Value(x) => x,
                Spacing::Auto => omega_fg,
            },
            g_a: self.g_a,
            g_b: match self.g_b {
                CouplingB::Value(x) => x,
                CouplingB::Matched => g_b,
            },
            theta: self.theta,
            g_ab: self.g_ab,
        }
    }
}

/// Scale for reporting; `None` in dimensionless mode.
pub type Units = Option<PhysicalScale>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub lindblad: LindbladOptions,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanSettings {
    pub kind: ResonanceKind,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub levels: usize,
    pub crosstalk: bool,
}

/// Which coupling a crossing grid varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAxis {
    GA,
    GB,
}

impl GridAxis {
    pub fn name(self) -> &'static str {
        match self {
            GridAxis::GA => "g_a",
            GridAxis::GB => "g_b",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSettings {
    pub kind: ResonanceKind,
    pub axis: GridAxis,
    pub values: Vec<f64>,
    /// Search half-width; `None` uses the closed-form estimate per point.
    pub half_window: Option<f64>,
}

/// Resonance family used to program the spacings of a dynamics run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    TwoPhoton,
    ThreePhoton,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::TwoPhoton => "two_photon",
            Route::ThreePhoton => "three_photon",
        }
    }

    fn parse(s: &str) -> std::result::Result<Route, String> {
        match s {
            "two_photon" => Ok(Route::TwoPhoton),
            "three_photon" => Ok(Route::ThreePhoton),
            _ => Err(format!("unknown route `{s}` (two_photon, three_photon)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RabiSettings {
    pub route: Route,
    /// Photon offset of the two-photon resonances used for `auto` spacings.
    pub n: usize,
    pub initial: Vec<BasisState>,
    pub track: Vec<Vec<BasisState>>,
    pub noon: Option<usize>,
    /// `None` means one full period `π/|g_eff|` of the mode-a resonance.
    pub t_final: Option<f64>,
    pub samples: usize,
    pub rates: Option<DecoherenceRates>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceSettings {
    pub route: Route,
    pub target: usize,
    pub gammas: Vec<f64>,
}

/// Which resonance shifts a schedule programs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftModel {
    Plain,
    Crosstalk,
}

impl ShiftModel {
    pub fn name(self) -> &'static str {
        match self {
            ShiftModel::Plain => "plain",
            ShiftModel::Crosstalk => "crosstalk",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSettings {
    pub targets: Vec<usize>,
    pub shifts: Vec<ShiftModel>,
    pub force_unmatched: bool,
    pub decouple_detuning: f64,
    pub rabi_eg: f64,
    pub rabi_fg: f64,
    pub pulse_mode: PulseMode,
    pub samples_per_step: usize,
    pub retune_idle_time: f64,
    pub include_crosstalk: bool,
    pub rates: Option<DecoherenceRates>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSumSettings {
    pub resonances: Vec<ResonanceKind>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Settings {
    Scan(ScanSettings),
    CrossingGrid(GridSettings),
    Rabi(RabiSettings),
    Decoherence(DecoherenceSettings),
    Protocol(ProtocolSettings),
    PathSum(PathSumSettings),
}

/// Fully validated run description with defaults materialised.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub name: String,
    pub output_dir: String,
    pub units: Units,
    pub params: ParamSpec,
    /// `None` selects the experiment's default truncation.
    pub basis: Option<BasisSpec>,
    pub solver: SolverSettings,
    pub settings: Settings,
}

/// Unit context used while reading a section.
#[derive(Clone, Copy)]
struct Ctx {
    units: Units,
}

impl Ctx {
    /// A frequency given as `key` (dimensionless) or `key_ghz`.
    fn freq(&self, r: &mut Reader, key: &str) -> Result<Option<f64>> {
        self.scaled(r, key, "_ghz", |s, x| s.from_ghz(x))
    }

    /// A coupling or drive given as `key` or `key_mhz`.
    fn coupling(&self, r: &mut Reader, key: &str) -> Result<Option<f64>> {
        self.scaled(r, key, "_mhz", |s, x| s.from_mhz(x))
    }

    /// A duration given as `key` or `key_us`.
    fn time(&self, r: &mut Reader, key: &str) -> Result<Option<f64>> {
        self.scaled(r, key, "_us", |s, x| s.time_from_us(x))
    }

    fn scaled(
        &self,
        r: &mut Reader,
        key: &str,
        suffix: &str,
        conv: impl Fn(&PhysicalScale, f64) -> f64,
    ) -> Result<Option<f64>> {
        let unit_key = format!("{key}{suffix}");
        match self.units {
            None => r.f64(key),
            Some(s) => {
                if let Some(e) = r.entries.get(key) {
                    return Err(r.value_error(key, e.line, format!("physical mode expects `{unit_key}`")));
                }
                Ok(r.f64(&unit_key)?.map(|x| conv(&s, x)))
            }
        }
    }

    fn scaled_list(
        &self,
        r: &mut Reader,
        key: &str,
        suffix: &str,
        conv: impl Fn(&PhysicalScale, f64) -> f64,
    ) -> Result<Option<Vec<f64>>> {
        let unit_key = format!("{key}{suffix}");
        match self.units {
            None => r.list(key, parse_f64),
            Some(s) => {
                if let Some(e) = r.entries.get(key) {
                    return Err(r.value_error(key, e.line, format!("physical mode expects `{unit_key}`")));
                }
                Ok(r.list(&unit_key, parse_f64)?
                    .map(|v| v.into_iter().map(|x| conv(&s, x)).collect()))
            }
        }
    }
}

fn check_non_negative(r: &Reader, key: &str, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(r.value_error(key, r.line_of(key), format!("must be non-negative, got {x}")));
    }
    Ok(x)
}

fn read_spacing(ctx: Ctx, r: &mut Reader, key: &str) -> Result<Spacing> {
    let unit_key = format!("{key}_ghz");
    let k = if ctx.units.is_some() { unit_key.as_str() } else { key };
    if r.entries.get(k).map(|e| e.value.as_str()) == Some("auto") {
        r.raw(k);
        return Ok(Spacing::Auto);
    }
    Ok(ctx.freq(r, key)?.map(Spacing::Value).unwrap_or(Spacing::Auto))
}

fn read_params(ctx: Ctx, r: &mut Reader) -> Result<ParamSpec> {
    if ctx.units.is_none() {
        r.forbid_units()?;
    }
    let omega_b = ctx
        .freq(r, "omega_b")?
        .ok_or_else(|| r.missing(if ctx.units.is_some() { "omega_b_ghz" } else { "omega_b" }))?;
    let omega_eg = read_spacing(ctx, r, "omega_eg")?;
    let omega_fg = read_spacing(ctx, r, "omega_fg")?;
    let g_a = ctx.coupling(r, "g_a")?.unwrap_or(0.03);
    let gb_key = if ctx.units.is_some() { "g_b_mhz" } else { "g_b" };
    let g_b = if r.entries.get(gb_key).map(|e| e.value.as_str()) == Some("matched") {
        r.raw(gb_key);
        CouplingB::Matched
    } else {
        ctx.coupling(r, "g_b")?
            .map(CouplingB::Value)
            .unwrap_or(CouplingB::Matched)
    };
    r.either("theta", "theta_deg")?;
    let theta = match (r.f64("theta")?, r.f64("theta_deg")?) {
        (Some(t), _) => t,
        (_, Some(d)) => d.to_radians(),
        _ => std::f64::consts::FRAC_PI_6,
    };
    let gab_key = if ctx.units.is_some() { "g_ab_mhz" } else { "g_ab" };
    r.either(gab_key, "g_ab_ratio")?;
    let g_ab = match r.non_negative("g_ab_ratio")? {
        Some(k) => k * g_a,
        None => ctx.coupling(r, "g_ab")?.unwrap_or(0.0),
    };
    for (key, x) in [("g_a", g_a), ("g_ab", g_ab)] {
        check_non_negative(r, key, x)?;
    }
    if let CouplingB::Value(x) = g_b {
        check_non_negative(r, "g_b", x)?;
    }
    if omega_b <= 0.0 {
        return Err(r.value_error("omega_b", r.line_of("omega_b"), "mode frequency must be positive"));
    }
    Ok(ParamSpec {
        omega_b,
        omega_eg,
        omega_fg,
        g_a,
        g_b,
        theta,
        g_ab,
    })
}

fn read_rates(ctx: Ctx, r: &mut Reader) -> Result<Option<DecoherenceRates>> {
    if r.entries.is_empty() {
        return Ok(None);
    }
    if ctx.units.is_none() {
        r.forbid_units()?;
    }
    let base = match ctx.units {
        None => r.non_negative("gamma")?.unwrap_or(0.0),
        Some(s) => r.non_negative("gamma_per_us")?.map(|x| s.from_per_us(x)).unwrap_or(0.0),
    };
    let mut rates = DecoherenceRates::uniform(base);
    let fields: [(&str, &mut f64); 7] = [
        ("kappa_a", &mut rates.kappa_a),
        ("kappa_b", &mut rates.kappa_b),
        ("gamma_eg", &mut rates.gamma_eg),
        ("gamma_fg", &mut rates.gamma_fg),
        ("gamma_fe", &mut rates.gamma_fe),
        ("gamma_e", &mut rates.gamma_e),
        ("gamma_f", &mut rates.gamma_f),
    ];
    for (key, slot) in fields {
        let v = match ctx.units {
            None => r.non_negative(key)?,
            Some(s) => {
                // Lifetimes in μs; rate = 1/T.
                let t_key = format!("{key}_us");
                r.either(&t_key, &format!("{key}_per_us"))?;
                match r.positive(&t_key)? {
                    Some(t) => Some(s.from_per_us(1.0 / t)),
                    None => r.non_negative(&format!("{key}_per_us"))?.map(|x| s.from_per_us(x)),
                }
            }
        };
        if let Some(v) = v {
            *slot = v;
        }
    }
    Ok(Some(rates))
}

fn read_solver(r: &mut Reader) -> Result<SolverSettings> {
    let mut lindblad = LindbladOptions::default();
    let cutoff = r.positive("secular_cutoff")?;
    let backend = r.parse_with("backend", |s| match s {
        "secular" | "dense" => Ok(s.to_string()),
        _ => Err(format!("unknown backend `{s}` (secular, dense)")),
    })?;
    lindblad.backend = match backend.as_deref() {
        Some("dense") => {
            if cutoff.is_some() {
                return Err(r.value_error(
                    "secular_cutoff",
                    r.line_of("secular_cutoff"),
                    "only meaningful with backend = secular",
                ));
            }
            LindbladBackend::Dense
        }
        _ => LindbladBackend::Secular {
            cutoff: cutoff.unwrap_or(0.05),
        },
    };
    if let Some(x) = r.positive("rtol")? {
        lindblad.rtol = x;
    }
    if let Some(x) = r.positive("atol")? {
        lindblad.atol = x;
    }
    Ok(SolverSettings { lindblad })
}

fn read_kind(r: &mut Reader) -> Result<ResonanceKind> {
    let tag = r
        .parse_with("resonance", parse_tag)?
        .ok_or_else(|| r.missing("resonance"))?;
    let n = r.usize("n")?.unwrap_or(0);
    let kind = ResonanceKind::new(tag, n);
    kind.validate()
        .map_err(|e| r.value_error("n", r.line_of("n"), e.to_string()))?;
    Ok(kind)
}

fn values_or_range(
    ctx: Ctx,
    r: &mut Reader,
    key: &str,
    suffix: &str,
    conv: fn(&PhysicalScale, f64) -> f64,
) -> Result<Vec<f64>> {
    let list = ctx.scaled_list(r, key, suffix, conv)?;
    let lo = ctx.scaled(r, "lo", suffix, conv)?;
    let hi = ctx.scaled(r, "hi", suffix, conv)?;
    let points = r.usize("points")?;
    match (list, lo, hi) {
        (Some(v), None, None) => {
            if points.is_some() {
                return Err(r.value_error("points", r.line_of("points"), format!("conflicts with `{key}`")));
            }
            Ok(v)
        }
        (None, Some(lo), Some(hi)) => {
            let n = points.unwrap_or(11);
            if n < 2 || hi <= lo {
                return Err(r.value_error(
                    "points",
                    r.line_of("points"),
                    "range needs lo < hi and at least 2 points",
                ));
            }
            Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
        }
        (Some(_), _, _) => Err(r.value_error(key, r.line_of(key), "give either a list or lo/hi, not both")),
        _ => Err(r.missing(key)),
    }
}

fn read_scan(ctx: Ctx, r: &mut Reader, params: &ParamSpec) -> Result<ScanSettings> {
    let kind = read_kind(r)?;
    let lo = ctx.freq(r, "lo")?;
    let hi = ctx.freq(r, "hi")?;
    let half = ctx.freq(r, "half_window")?;
    let bare = kind.order() as f64 * if kind.uses_omega_eg() { 1.0 } else { params.omega_b };
    let (lo, hi) = match (lo, hi, half) {
        (Some(lo), Some(hi), None) => (lo, hi),
        (None, None, h) => {
            let h = h.unwrap_or(0.1);
            (bare - h, bare + h)
        }
        _ => {
            return Err(r.value_error(
                "half_window",
                r.line,
                "give either lo and hi, or half_window around the bare spacing",
            ))
        }
    };
    if !(hi > lo) {
        return Err(r.value_error("hi", r.line_of("hi"), format!("empty window [{lo}, {hi}]")));
    }
    Ok(ScanSettings {
        kind,
        lo,
        hi,
        points: r.usize("points")?.unwrap_or(401).max(2),
        levels: r.usize("levels")?.unwrap_or(8),
        crosstalk: r.bool("crosstalk")?.unwrap_or(false),
    })
}

fn read_grid(ctx: Ctx, r: &mut Reader) -> Result<GridSettings> {
    let kind = read_kind(r)?;
    let axis = r
        .parse_with("vary", |s| match s {
            "g_a" => Ok(GridAxis::GA),
            "g_b" => Ok(GridAxis::GB),
            _ => Err(format!("expected g_a or g_b, found `{s}`")),
        })?
        .unwrap_or(if kind.uses_omega_eg() {
            GridAxis::GA
        } else {
            GridAxis::GB
        });
    let values = values_or_range(ctx, r, "values", "_mhz", |s, x| s.from_mhz(x))?;
    if let Some(x) = values.iter().find(|x| !(**x > 0.0)) {
        return Err(r.value_error(
            "values",
            r.line_of("values"),
            format!("couplings must be positive, got {x}"),
        ));
    }
    Ok(GridSettings {
        kind,
        axis,
        values,
        half_window: ctx.freq(r, "half_window")?,
    })
}

fn read_route(r: &mut Reader) -> Result<Route> {
    Ok(r.parse_with("route", Route::parse)?.unwrap_or(Route::TwoPhoton))
}

fn read_rabi(ctx: Ctx, r: &mut Reader, rates: Option<DecoherenceRates>) -> Result<RabiSettings> {
    let route = read_route(r)?;
    let n = r.usize("n")?.unwrap_or(0);
    if route == Route::ThreePhoton && n != 0 {
        return Err(r.value_error("n", r.line_of("n"), "three-photon route has no photon offset"));
    }
    let initial = r
        .parse_with("initial", parse_superposition)?
        .ok_or_else(|| r.missing("initial"))?;
    let track = r
        .list("track", parse_superposition)?
        .unwrap_or_else(|| initial.iter().map(|s| vec![*s]).collect());
    let noon = r.usize("noon")?;
    if noon == Some(0) {
        return Err(r.value_error("noon", r.line_of("noon"), "NOON photon number must be at least 1"));
    }
    let t_final = ctx.time(r, "t_final")?;
    if let Some(t) = t_final {
        check_non_negative(r, "t_final", t)?;
    }
    Ok(RabiSettings {
        route,
        n,
        initial,
        track,
        noon,
        t_final,
        samples: r.usize("samples")?.unwrap_or(401),
        rates,
    })
}

fn read_decoherence(ctx: Ctx, r: &mut Reader) -> Result<DecoherenceSettings> {
    let route = read_route(r)?;
    let target = r.usize("target")?.unwrap_or(match route {
        Route::TwoPhoton => 2,
        Route::ThreePhoton => 3,
    });
    if route == Route::ThreePhoton && target != 3 {
        return Err(r.value_error("target", r.line_of("target"), "three-photon route prepares N = 3"));
    }
    if target == 0 {
        return Err(r.value_error("target", r.line_of("target"), "target must be at least 1"));
    }
    let gammas = ctx
        .scaled_list(r, "gammas", "_per_us", |s, x| s.from_per_us(x))?
        .ok_or_else(|| r.missing(if ctx.units.is_some() { "gammas_per_us" } else { "gammas" }))?;
    if let Some(x) = gammas.iter().find(|x| **x < 0.0) {
        return Err(r.value_error(
            "gammas",
            r.line_of("gammas"),
            format!("rates must be non-negative, got {x}"),
        ));
    }
    Ok(DecoherenceSettings { route, target, gammas })
}

fn read_protocol(ctx: Ctx, r: &mut Reader, rates: Option<DecoherenceRates>, table: bool) -> Result<ProtocolSettings> {
    let targets = r
        .list("targets", |s| {
            s.parse::<usize>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| format!("expected a photon number ≥ 1, found `{s}`"))
        })?
        .unwrap_or_else(|| if table { (2..=6).collect() } else { vec![2] });
    let shifts = r
        .list("shifts", |s| match s {
            "plain" => Ok(ShiftModel::Plain),
            "crosstalk" => Ok(ShiftModel::Crosstalk),
            _ => Err(format!("expected plain or crosstalk, found `{s}`")),
        })?
        .unwrap_or_else(|| {
            if table {
                vec![ShiftModel::Plain, ShiftModel::Crosstalk]
            } else {
                vec![ShiftModel::Plain]
            }
        });
    let pulse_mode = r
        .parse_with("pulse_mode", |s| match s {
            "instantaneous" => Ok(PulseMode::Instantaneous),
            "finite" => Ok(PulseMode::FiniteDuration),
            _ => Err(format!("expected instantaneous or finite, found `{s}`")),
        })?
        .unwrap_or(PulseMode::Instantaneous);
    let defaults = noon_core::protocol::PlanOptions::default();
    let detuning = ctx.freq(r, "decouple_detuning")?.unwrap_or(defaults.decouple_detuning);
    check_non_negative(r, "decouple_detuning", detuning)?;
    let rabi_eg = ctx.coupling(r, "rabi_eg")?.unwrap_or(defaults.rabi_eg);
    let rabi_fg = ctx.coupling(r, "rabi_fg")?.unwrap_or(defaults.rabi_fg);
    check_non_negative(r, "rabi_eg", rabi_eg)?;
    check_non_negative(r, "rabi_fg", rabi_fg)?;
    let idle = ctx.time(r, "retune_idle")?.unwrap_or(0.0);
    check_non_negative(r, "retune_idle", idle)?;
    Ok(ProtocolSettings {
        targets,
        shifts,
        force_unmatched: r.bool("force_unmatched")?.unwrap_or(false),
        decouple_detuning: detuning,
        rabi_eg,
        rabi_fg,
        pulse_mode,
        samples_per_step: r.usize("samples_per_step")?.unwrap_or(0),
        retune_idle_time: idle,
        include_crosstalk: r.bool("include_crosstalk")?.unwrap_or(true),
        rates,
    })
}

fn read_pathsum(r: &mut Reader) -> Result<PathSumSettings> {
    let tags = r
        .list("resonances", parse_tag)?
        .unwrap_or_else(|| vec![ResonanceTag::TwoPhotonA, ResonanceTag::TwoPhotonB]);
    let n = r.usize("n")?.unwrap_or(0);
    let resonances = tags
        .into_iter()
        .map(|t| {
            let order_two = matches!(t, ResonanceTag::TwoPhotonA | ResonanceTag::TwoPhotonB);
            ResonanceKind::new(t, if order_two { n } else { 0 })
        })
        .collect();
    Ok(PathSumSettings { resonances })
}

fn read_basis(r: &mut Reader) -> Result<Option<BasisSpec>> {
    let a = r.usize("cutoff_a")?;
    let b = r.usize("cutoff_b")?;
    match (a, b) {
        (None, None) => Ok(None),
        (Some(a), Some(b)) => Ok(Some(BasisSpec::new(a, b))),
        (Some(_), None) => Err(r.missing("cutoff_b")),
        (None, Some(_)) => Err(r.missing("cutoff_a")),
    }
}

/// Sections each experiment accepts besides the parameter blocks.
fn sections_for(e: Experiment) -> &'static [&'static str] {
    match e {
        Experiment::ScanCrossing => &["basis", "scan"],
        Experiment::CouplingVsG | Experiment::ShiftVsG => &["basis", "grid"],
        Experiment::Rabi => &["basis", "rabi", "rates", "solver"],
        Experiment::DecoherenceSweep => &["basis", "sweep", "solver"],
        Experiment::Protocol | Experiment::Table1 => &["basis", "protocol", "rates", "solver"],
        Experiment::PathsumReport => &["basis", "report"],
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        RunConfig::parse(&text, stem)
    }

    /// Parses and validates; `default_name` is used when `name` is absent.
    pub fn parse(text: &str, default_name: &str) -> Result<RunConfig> {
        let mut doc = Document::parse(text)?;
        let mut top = doc.take("");
        let experiment = top
            .parse_with("experiment", Experiment::parse)?
            .ok_or_else(|| top.missing("experiment"))?;
        let name = top.text("name").unwrap_or_else(|| default_name.to_string());
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(ConfigError::Invalid(format!(
                "run name `{name}` must be non-empty and use only letters, digits, `_` and `-`"
            )));
        }
        let output_dir = top.text("output_dir").unwrap_or_else(|| "out".to_string());
        top.finish()?;

        for s in doc.sections.keys().filter(|s| !s.is_empty()) {
            let known = ["params", "physical"].contains(&s.as_str()) || sections_for(experiment).contains(&s.as_str());
            if !known {
                return Err(ConfigError::UnknownSection {
                    line: doc.sections[s].line,
                    section: s.clone(),
                });
            }
        }
        let (ctx, mut pr) = match (doc.has("params"), doc.has("physical")) {
            (true, true) => {
                return Err(ConfigError::Invalid(
                    "[params] and [physical] are exclusive; give one parameter block".into(),
                ))
            }
            (false, false) => {
                return Err(ConfigError::Invalid(
                    "missing parameter block [params] or [physical]".into(),
                ))
            }
            (true, false) => (Ctx { units: None }, doc.take("params")),
            (false, true) => {
                let mut r = doc.take("physical");
                let f = r.f64("omega_a_ghz")?.ok_or_else(|| {
                    ConfigError::Invalid("[physical] requires the reference frequency omega_a_ghz".into())
                })?;
                let scale =
                    PhysicalScale::new(f).map_err(|m| r.value_error("omega_a_ghz", r.line_of("omega_a_ghz"), m))?;
                (Ctx { units: Some(scale) }, r)
            }
        };
        let params = read_params(ctx, &mut pr)?;
        pr.finish()?;

        let mut br = doc.take("basis");
        let basis = read_basis(&mut br)?;
        br.finish()?;
        let mut sr = doc.take("solver");
        let solver = read_solver(&mut sr)?;
        sr.finish()?;
        let mut rr = doc.take("rates");
        let rates = read_rates(ctx, &mut rr)?;
        rr.finish()?;

        let settings = match experiment {
            Experiment::ScanCrossing => {
                let mut r = doc.take("scan");
                let s = read_scan(ctx, &mut r, &params)?;
                r.finish()?;
                Settings::Scan(s)
            }
            Experiment::CouplingVsG | Experiment::ShiftVsG => {
                let mut r = doc.take("grid");
                let s = read_grid(ctx, &mut r)?;
                r.finish()?;
                Settings::CrossingGrid(s)
            }
            Experiment::Rabi => {
                let mut r = doc.take("rabi");
                let s = read_rabi(ctx, &mut r, rates)?;
                r.finish()?;
                Settings::Rabi(s)
            }
            Experiment::DecoherenceSweep => {
                let mut r = doc.take("sweep");
                let s = read_decoherence(ctx, &mut r)?;
                r.finish()?;
                Settings::Decoherence(s)
            }
            Experiment::Protocol | Experiment::Table1 => {
                let mut r = doc.take("protocol");
                let s = read_protocol(ctx, &mut r, rates, experiment == Experiment::Table1)?;
                r.finish()?;
                Settings::Protocol(s)
            }
            Experiment::PathsumReport => {
                let mut r = doc.take("report");
                let s = read_pathsum(&mut r)?;
                r.finish()?;
                Settings::PathSum(s)
            }
        };
        doc.finish()?;
        let cfg = RunConfig {
            experiment,
            name,
            output_dir,
            units: ctx.units,
            params,
            basis,
            solver,
            settings,
        };
        cfg.check_invariants()?;
        Ok(cfg)
    }

    /// Cross-field invariants that no single key can check.
    fn check_invariants(&self) -> Result<()> {
        let p = &self.params;
        let three = |k: &ResonanceKind| k.order() == 3;
        let needs_transverse = match &self.settings {
            Settings::Scan(_) => false,
            Settings::CrossingGrid(s) => three(&s.kind),
            Settings::Rabi(s) => s.route == Route::ThreePhoton,
            Settings::Decoherence(s) => s.route == Route::ThreePhoton,
            Settings::Protocol(_) => false,
            Settings::PathSum(s) => s.resonances.iter().any(three),
        };
        if needs_transverse && p.theta != 0.0 {
            return Err(ConfigError::Invalid(format!(
                "three-photon closed forms require theta = 0, got {}",
                p.theta
            )));
        }
        let programs_spacings = matches!(self.settings, Settings::Decoherence(_) | Settings::Protocol(_));
        if programs_spacings && (p.omega_eg != Spacing::Auto || p.omega_fg != Spacing::Auto) {
            return Err(ConfigError::Invalid(
                "schedules program the qutrit spacings; omega_eg and omega_fg must be auto".into(),
            ));
        }
        if let Settings::Protocol(s) = &self.settings {
            if let (Some(b), Some(&n)) = (self.basis, s.targets.iter().max()) {
                if b.cutoff_a() < n || b.cutoff_b() < n {
                    return Err(ConfigError::Invalid(format!(
                        "basis cutoffs ({}, {}) cannot hold the {n}-photon target",
                        b.cutoff_a(),
                        b.cutoff_b()
                    )));
                }
            }
        }
        if let Settings::Rabi(s) = &self.settings {
            if let Some(b) = self.basis {
                for st in s.initial.iter().chain(s.track.iter().flatten()) {
                    if !b.contains(*st) {
                        return Err(ConfigError::Invalid(format!(
                            "state {} lies outside the basis ({}, {})",
                            format_state(st),
                            b.cutoff_a(),
                            b.cutoff_b()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Every setting with its resolved value, for the manifest.
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        let f = crate::output::format_value;
        put("experiment", self.experiment.to_string());
        put("name", self.name.clone());
        put("output_dir", self.output_dir.clone());
        match self.units {
            None => put("units", "dimensionless".into()),
            Some(s) => {
                put("units", "physical".into());
                put("omega_a_ghz", f(s.omega_a_ghz()));
            }
        }
        let p = &self.params;
        put("params.omega_a", "1".into());
        put("params.omega_b", f(p.omega_b));
        let spacing = |s: Spacing| match s {
            Spacing::Auto => "auto".to_string(),
            Spacing::Value(x) => f(x),
        };
        put("params.omega_eg", spacing(p.omega_eg));
        put("params.omega_fg", spacing(p.omega_fg));
        put("params.g_a", f(p.g_a));
        put(
            "params.g_b",
            match p.g_b {
                CouplingB::Matched => "matched".into(),
                CouplingB::Value(x) => f(x),
            },
        );
        put("params.theta", f(p.theta));
        put("params.g_ab", f(p.g_ab));
        match self.basis {
            None => put("basis", "default".into()),
            Some(b) => {
                put("basis.cutoff_a", b.cutoff_a().to_string());
                put("basis.cutoff_b", b.cutoff_b().to_string());
            }
        }
        let uses_solver = sections_for(self.experiment).contains(&"solver");
        if uses_solver {
            let l = &self.solver.lindblad;
            match l.backend {
                LindbladBackend::Dense => put("solver.backend", "dense".into()),
                LindbladBackend::Secular { cutoff } => {
                    put("solver.backend", "secular".into());
                    put("solver.secular_cutoff", f(cutoff));
                }
            }
            put("solver.rtol", f(l.rtol));
            put("solver.atol", f(l.atol));
            put("solver.element_tol", f(l.element_tol));
            put("solver.link_tol", f(l.link_tol));
            put("solver.pop_tol", f(l.pop_tol));
        }
        let put_rates = |out: &mut Vec<(String, String)>, r: &Option<DecoherenceRates>| match r {
            None => out.push(("rates".into(), "none".into())),
            Some(r) => {
                for (k, v) in [
                    ("kappa_a", r.kappa_a),
                    ("kappa_b", r.kappa_b),
                    ("gamma_eg", r.gamma_eg),
                    ("gamma_fg", r.gamma_fg),
                    ("gamma_fe", r.gamma_fe),
                    ("gamma_e", r.gamma_e),
                    ("gamma_f", r.gamma_f),
                ] {
                    out.push((format!("rates.{k}"), f(v)));
                }
            }
        };
        let join = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(",");
        match &self.settings {
            Settings::Scan(s) => {
                out.push(("scan.resonance".into(), s.kind.tag.to_string()));
                out.push(("scan.n".into(), s.kind.n_offset.to_string()));
                out.push(("scan.lo".into(), f(s.lo)));
                out.push(("scan.hi".into(), f(s.hi)));
                out.push(("scan.points".into(), s.points.to_string()));
                out.push(("scan.levels".into(), s.levels.to_string()));
                out.push(("scan.crosstalk".into(), s.crosstalk.to_string()));
            }
            Settings::CrossingGrid(s) => {
                out.push(("grid.resonance".into(), s.kind.tag.to_string()));
                out.push(("grid.n".into(), s.kind.n_offset.to_string()));
                out.push(("grid.vary".into(), s.axis.name().into()));
                out.push(("grid.values".into(), join(&s.values)));
                out.push((
                    "grid.half_window".into(),
                    s.half_window.map(f).unwrap_or_else(|| "auto".into()),
                ));
            }
            Settings::Rabi(s) => {
                out.push(("rabi.route".into(), s.route.name().into()));
                out.push(("rabi.n".into(), s.n.to_string()));
                out.push(("rabi.initial".into(), format_superposition(&s.initial)));
                let track: Vec<String> = s.track.iter().map(|t| format_superposition(t)).collect();
                out.push(("rabi.track".into(), track.join(",")));
                out.push((
                    "rabi.noon".into(),
                    s.noon.map(|n| n.to_string()).unwrap_or_else(|| "none".into()),
                ));
                out.push((
                    "rabi.t_final".into(),
                    s.t_final.map(f).unwrap_or_else(|| "period".into()),
                ));
                out.push(("rabi.samples".into(), s.samples.to_string()));
                put_rates(&mut out, &s.rates);
            }
            Settings::Decoherence(s) => {
                out.push(("sweep.route".into(), s.route.name().into()));
                out.push(("sweep.target".into(), s.target.to_string()));
                out.push(("sweep.gammas".into(), join(&s.gammas)));
            }
            Settings::Protocol(s) => {
                let t: Vec<String> = s.targets.iter().map(|n| n.to_string()).collect();
                out.push(("protocol.targets".into(), t.join(",")));
                let sh: Vec<&str> = s.shifts.iter().map(|m| m.name()).collect();
                out.push(("protocol.shifts".into(), sh.join(",")));
                out.push(("protocol.force_unmatched".into(), s.force_unmatched.to_string()));
                out.push(("protocol.decouple_detuning".into(), f(s.decouple_detuning)));
                out.push(("protocol.rabi_eg".into(), f(s.rabi_eg)));
                out.push(("protocol.rabi_fg".into(), f(s.rabi_fg)));
                out.push((
                    "protocol.pulse_mode".into(),
                    match s.pulse_mode {
                        PulseMode::Instantaneous => "instantaneous",
                        PulseMode::FiniteDuration => "finite",
                    }
                    .into(),
                ));
                out.push(("protocol.samples_per_step".into(), s.samples_per_step.to_string()));
                out.push(("protocol.retune_idle".into(), f(s.retune_idle_time)));
                out.push(("protocol.include_crosstalk".into(), s.include_crosstalk.to_string()));
                put_rates(&mut out, &s.rates);
            }
            Settings::PathSum(s) => {
                let r: Vec<String> = s.resonances.iter().map(|k| k.tag.to_string()).collect();
                out.push(("report.resonances".into(), r.join(",")));
                out.push((
                    "report.n".into(),
                    s.resonances.first().map(|k| k.n_offset).unwrap_or(0).to_string(),
                ));
            }
        }
        out
    }
}
