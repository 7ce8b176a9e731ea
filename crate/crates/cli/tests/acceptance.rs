//! Acceptance run: evaluates every criterion against the fixture corpus and
//! prints one `PASS` or `FAIL` line per criterion. The process exits non-zero
//! when any criterion fails. `NOON_THREADS` parallelises the fixture runs.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use noon_cli::config::RunConfig;
use noon_cli::experiments::{self, Outcome};
use noon_cli::output::{Cell, Table};
use noon_cli::parallel::Pool;
use noon_cli::units::PhysicalScale;
use noon_core::protocol::{matched_gb, nominal_spacings};

const PROPERTY_CASES: u32 = 128;

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.cfg"))
}

/// Runs fixtures in process, once each.
struct Runs {
    pool: Pool,
    cache: BTreeMap<String, Outcome>,
}

impl Runs {
    fn get(&mut self, name: &str) -> Result<&Outcome, String> {
        if !self.cache.contains_key(name) {
            let cfg = RunConfig::from_path(&fixture_path(name)).map_err(|e| format!("{name}: {e}"))?;
            let started = Instant::now();
            let out = experiments::run(&cfg, &self.pool).map_err(|e| format!("{name}: {e}"))?;
            eprintln!("  ran {name} in {:.1} s", started.elapsed().as_secs_f64());
            self.cache.insert(name.to_string(), out);
        }
        Ok(&self.cache[name])
    }

    fn table(&mut self, name: &str, suffix: &str) -> Result<Table, String> {
        let out = self.get(name)?;
        out.tables
            .iter()
            .find(|(s, _)| s == suffix)
            .map(|(_, t)| t.clone())
            .ok_or_else(|| format!("{name}: no `{suffix}` table"))
    }

    fn summary(&mut self, name: &str, key: &str) -> Result<f64, String> {
        let out = self.get(name)?;
        let v = out
            .summary
            .iter()
            .find(|(k, _)| k == key)
            .ok_or_else(|| format!("{name}: no `{key}` in summary"))?;
        v.1.parse()
            .map_err(|_| format!("{name}: `{key}` = {} is not numeric", v.1))
    }
}

fn column_index(t: &Table, name: &str) -> Result<usize, String> {
    t.header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| format!("no column `{name}` in {:?}", t.header))
}

fn num(t: &Table, name: &str) -> Result<Vec<f64>, String> {
    let i = column_index(t, name)?;
    t.rows
        .iter()
        .map(|r| match &r[i] {
            Cell::Num(x) => Ok(*x),
            Cell::Int(n) => Ok(*n as f64),
            Cell::Text(s) => Err(format!("`{name}` holds text `{s}`")),
        })
        .collect()
}

fn text(t: &Table, name: &str) -> Result<Vec<String>, String> {
    let i = column_index(t, name)?;
    Ok(t.rows.iter().map(|r| r[i].render()).collect())
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

/// Collects sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    pass: bool,
    notes: Vec<String>,
    started: bool,
}

impl Checks {
    fn check(&mut self, ok: bool, note: String) {
        if !self.started {
            self.pass = true;
            self.started = true;
        }
        self.pass &= ok;
        self.notes.push(if ok { note } else { format!("{note} [x]") });
    }

    fn verdict(self) -> Verdict {
        Verdict::new(self.started && self.pass, self.notes.join("; "))
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Largest |column| over rows whose axis value is at most `limit`, and the
/// number of such rows.
fn worst_upto(t: &Table, axis: &str, column: &str, limit: f64) -> Result<(f64, usize), String> {
    let xs = num(t, axis)?;
    let ys = num(t, column)?;
    let mut worst = 0.0f64;
    let mut count = 0;
    for (x, y) in xs.iter().zip(&ys) {
        if *x <= limit + 1e-12 {
            worst = worst.max(y.abs());
            count += 1;
        }
    }
    Ok((worst, count))
}

/// Value of `column` in the row whose `key` column is closest to `at`.
fn value_at(t: &Table, key: &str, at: f64, column: &str) -> Result<f64, String> {
    let xs = num(t, key)?;
    let ys = num(t, column)?;
    xs.iter()
        .zip(&ys)
        .min_by(|a, b| (a.0 - at).abs().total_cmp(&(b.0 - at).abs()))
        .map(|(_, y)| *y)
        .ok_or_else(|| format!("empty `{key}` column"))
}

fn two_photon_coupling(runs: &mut Runs) -> Result<Verdict, String> {
    let mut c = Checks::default();
    let t_r = PI / runs.summary("fig2", "resolved.g_eff")?.abs();
    c.check(within(t_r, 754.0, 1.0), format!("pi/|g_eff| = {t_r:.3}"));
    let grid = runs.table("fig1b", "")?;
    let (worst, n) = worst_upto(&grid, "g_a", "coupling_rel_err", 0.095)?;
    c.check(n >= 10, format!("{n} grid points with g_a <= 0.095"));
    c.check(worst <= 0.05, format!("max half-gap deviation {:.2}%", 100.0 * worst));
    Ok(c.verdict())
}

fn three_photon_coupling(runs: &mut Runs) -> Result<Verdict, String> {
    let mut c = Checks::default();
    let t_r = PI / runs.summary("fig4", "resolved.g_eff")?.abs();
    c.check(within(t_r, 5562.0, 5.0), format!("pi/|g_effs| = {t_r:.2}"));
    for (name, axis, limit) in [("fig3b", "g_a", 0.14), ("fig3d", "g_b", 0.13)] {
        let grid = runs.table(name, "")?;
        let (worst, n) = worst_upto(&grid, axis, "coupling_rel_err", limit)?;
        let rel = num(&grid, "coupling_rel_err")?;
        let axis_values = num(&grid, axis)?;
        let first_bad = axis_values
            .iter()
            .zip(&rel)
            .find(|(_, r)| r.abs() > 0.05)
            .map(|(x, _)| format!(", first above 5% at {axis} = {x}"))
            .unwrap_or_default();
        c.check(
            worst <= 0.05,
            format!(
                "{axis} <= {limit}: max deviation {:.2}% over {n} points{first_bad}",
                100.0 * worst
            ),
        );
    }
    Ok(c.verdict())
}

fn oracle_equivalence(runs: &mut Runs) -> Result<Verdict, String> {
    let mut c = Checks::default();
    for name in ["pathsum", "pathsum3"] {
        let t = runs.table(name, "")?;
        let closed = num(&t, "closed_form")?;
        let summed = num(&t, "path_sum")?;
        let worst = closed
            .iter()
            .zip(&summed)
            .map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        c.check(
            worst <= 1e-10 && !closed.is_empty(),
            format!("{name}: {} rows, max relative difference {worst:.1e}", closed.len()),
        );
        let quantity = text(&t, "quantity")?;
        let resonance = text(&t, "resonance")?;
        let paths = num(&t, "paths")?;
        for ((q, r), p) in quantity.iter().zip(&resonance).zip(&paths) {
            if q != "coupling" {
                continue;
            }
            let expected = match r.as_str() {
                "two_photon_a" => Some(2.0),
                "three_photon_a" | "three_photon_b" => Some(3.0),
                _ => None,
            };
            match expected {
                Some(e) => c.check(*p == e, format!("{r}: {p} coupling paths")),
                None => c.notes.push(format!("{r}: {p} coupling paths")),
            }
        }
    }
    Ok(c.verdict())
}

fn shift_validation(runs: &mut Runs) -> Result<Verdict, String> {
    let mut c = Checks::default();
    for (name, axis, limit) in [
        ("fig9a", "g_a", 0.1),
        ("fig9b", "g_b", 0.1),
        ("fig10a", "g_a", 0.14),
        ("fig10b", "g_b", 0.14),
    ] {
        let t = runs.table(name, "")?;
        let (worst, n) = worst_upto(&t, axis, "shift_rel_err", limit)?;
        c.check(
            worst <= 0.10 && n > 0,
            format!("{name}: max shift deviation {:.2}% over {n} points", 100.0 * worst),
        );
    }
    Ok(c.verdict())
}

/// The branches carry different bare energies, so the target superposition
/// is scored with its relative phase optimised (the `noon<N>_overlap` column).
fn rabi_transfer(runs: &mut Runs) -> Result<Verdict, String> {
    let mut c = Checks::default();
    for (name, column, floor) in [("fig2_noon", "noon2_overlap", 0.95), ("fig4", "noon3_overlap", 0.93)] {
        let half = runs.summary(name, "resolved.t_final")? / 2.0;
        let t = runs.table(name, "")?;
        let pop = value_at(&t, "t", half, column)?;
        c.check(
            pop >= floor,
            format!("{name}: population {pop:.4} at T_R/2 = {half:.1}"),
        );
    }
    Ok(c.verdict())
}

fn decoherence(runs: &mut Runs) -> Result<Verdict, String> {
    let mut c = Checks::default();
    let t = runs.table("fig5a", "")?;
    let f = |g: f64| value_at(&t, "gamma", g, "overlap");
    let (f0, f5, f4, f3) = (f(0.0)?, f(1e-5)?, f(1e-4)?, f(1e-3)?);
    c.check(within(f0, 0.97, 0.01), format!("N=2 gamma=0: {f0:.4}"));
    c.check(within(f5, 0.96, 0.02), format!("N=2 gamma=1e-5: {f5:.4}"));
    c.check(f4 > 0.80, format!("N=2 gamma=1e-4: {f4:.4}"));
    c.check(f3 < 0.50, format!("N=2 gamma=1e-3: {f3:.4}"));
    let t = runs.table("fig5b", "")?;
    let gammas = num(&t, "gamma")?;
    let overlaps = num(&t, "overlap")?;
    let low: Vec<f64> = gammas
        .iter()
        .zip(&overlaps)
        .filter(|(g, _)| **g <= 1e-6)
        .map(|(_, f)| *f)
        .collect();
    let low_min = low.iter().copied().fold(f64::INFINITY, f64::min);
    c.check(
        !low.is_empty() && low_min > 0.95,
        format!("N=3 gamma<=1e-6: min {low_min:.4} over {} rates", low.len()),
    );
    let f = |g: f64| value_at(&t, "gamma", g, "overlap");
    let (g5, g4) = (f(1e-5)?, f(1e-4)?);
    c.check(within(g5, 0.82, 0.03), format!("N=3 gamma=1e-5: {g5:.4}"));
    c.check(g4 < 0.50, format!("N=3 gamma=1e-4: {g4:.4}"));
    Ok(c.verdict())
}

/// Overlap per target for one shift model, in percent.
fn protocol_row(t: &Table, shifts: &str) -> Result<BTreeMap<usize, f64>, String> {
    let targets = num(t, "target_n")?;
    let models = text(t, "shifts")?;
    let overlaps = num(t, "overlap")?;
    Ok(targets
        .iter()
        .zip(&models)
        .zip(&overlaps)
        .filter(|((_, m), _)| *m == shifts)
        .map(|((n, _), f)| (*n as usize, 100.0 * f))
        .collect())
}

fn crosstalk_protocol(runs: &mut Runs) -> Result<Verdict, String> {
    let mut c = Checks::default();
    let expect = |row: &BTreeMap<usize, f64>, values: [f64; 5], tol: f64, label: &str, c: &mut Checks| {
        for (n, target) in (2..=6).zip(values) {
            match row.get(&n) {
                Some(f) => c.check(within(*f, target, tol), format!("{label} N={n}: {f:.1}% vs {target}%")),
                None => c.check(false, format!("{label} N={n}: missing")),
            }
        }
    };
    let fig6 = protocol_row(&runs.table("fig6", "")?, "plain")?;
    expect(&fig6, [96.7, 85.3, 88.4, 73.5, 80.1], 2.0, "g_ab=0.1g_a", &mut c);
    let table1 = runs.table("table1", "")?;
    let plain = protocol_row(&table1, "plain")?;
    let modified = protocol_row(&table1, "crosstalk")?;
    expect(&plain, [92.2, 82.7, 81.6, 70.8, 70.0], 3.0, "plain shifts", &mut c);
    expect(
        &modified,
        [96.5, 84.2, 86.6, 72.8, 75.7],
        3.0,
        "modified shifts",
        &mut c,
    );
    for n in 2..=6 {
        if let (Some(p), Some(m)) = (plain.get(&n), modified.get(&n)) {
            c.check(m >= p, format!("N={n}: modified {m:.1}% vs plain {p:.1}%"));
        }
    }
    Ok(c.verdict())
}

fn matched_coupling() -> Result<Verdict, String> {
    let cfg = RunConfig::from_path(&fixture_path("fig6")).map_err(|e| e.to_string())?;
    let scale = cfg.units.unwrap_or(PhysicalScale::new(4.0)?);
    let p = nominal_spacings(&cfg.params.resolve(2.0, 2.0 * cfg.params.omega_b, cfg.params.g_a));
    let g_b = matched_gb(&p).map_err(|e| e.to_string())?;
    let mhz = scale.to_mhz(g_b);
    Ok(Verdict::new(
        within(mhz, 69.4, 0.2),
        format!("matched g_b = {mhz:.3} MHz at g_a = {:.1} MHz", scale.to_mhz(p.g_a)),
    ))
}

fn property_suites() -> Result<Verdict, String> {
    let mut c = Checks::default();
    let mut failures = Vec::new();
    for (name, check) in support::ALL {
        if let Err(e) = check(PROPERTY_CASES) {
            failures.push(format!("{name}: {e}"));
        }
    }
    c.check(
        failures.is_empty(),
        format!("{} suites x {PROPERTY_CASES} cases", support::ALL.len()),
    );
    c.notes.extend(failures);
    Ok(c.verdict())
}

/// Runs the binary twice per fixture, sequentially and with worker threads,
/// and compares every CSV byte for byte.
fn determinism() -> Result<Verdict, String> {
    let mut c = Checks::default();
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixtures = ["pathsum", "pathsum3", "fig1a", "fig1b", "fig2_noon", "fig5a", "noon2"];
    let mut compared = 0;
    for name in fixtures {
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "3"].iter().enumerate() {
            let dir = root.path().join(format!("{name}_{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_noon"))
                .arg("run")
                .arg(fixture_path(name))
                .arg("--output-dir")
                .arg(&dir)
                .env("NOON_THREADS", threads)
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{name}: {}", String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(csv_files(&dir)?);
        }
        let same = outputs[0] == outputs[1] && !outputs[0].is_empty();
        compared += outputs[0].len();
        c.check(same, format!("{name}: {} csv", outputs[0].len()));
    }
    c.notes.push(format!("{compared} files identical across runs"));
    Ok(c.verdict())
}

fn csv_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let bytes = fs::read(&path).map_err(|e| e.to_string())?;
            files.push((path.file_name().unwrap().to_string_lossy().into_owned(), bytes));
        }
    }
    files.sort();
    Ok(files)
}

fn main() {
    let pool = match Pool::from_env() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let mut runs = Runs {
        pool,
        cache: BTreeMap::new(),
    };
    type Criterion = (&'static str, fn(&mut Runs) -> Result<Verdict, String>);
    let criteria: [Criterion; 10] = [
        ("two-photon effective coupling", two_photon_coupling),
        ("three-photon effective coupling", three_photon_coupling),
        ("path-sum oracle equivalence", oracle_equivalence),
        ("resonance shifts", shift_validation),
        ("Rabi transfer", rabi_transfer),
        ("decoherence fidelities", decoherence),
        ("crosstalk protocol fidelities", crosstalk_protocol),
        ("matched coupling", |_| matched_coupling()),
        ("property suites", |_| property_suites()),
        ("determinism", |_| determinism()),
    ];
    let mut failed = 0;
    for (k, (title, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let verdict = check(&mut runs).unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        if !verdict.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {title}: {} ({:.0} s)",
            if verdict.pass { "PASS" } else { "FAIL" },
            k + 1,
            verdict.detail,
            started.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
