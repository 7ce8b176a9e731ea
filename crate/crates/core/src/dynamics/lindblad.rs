//! Dressed-basis master equation in the interaction picture of the full
//! Hamiltonian.
//!
//! With `ρ̃_mn = e^{i(E_m−E_n)t} ρ_mn` the coherent part drops out and only
//! the dissipator remains, with every operator element picking up the phase
//! of its transition frequency. Eigenstates that are neither populated nor
//! reachable by a decay link from a populated state carry only phases and are
//! left out of the integration.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ode::{Dopri5, OdeOptions};
use super::ZERO;
use crate::error::{Error, Result};
use crate::spectrum::Eigensystem;

/// Treatment of the rotating terms in the dissipator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LindbladBackend {
    /// Keep every term with its exact phase.
    Dense,
    /// Drop cross terms between transition frequencies that fall in
    /// different clusters, where clusters are runs of frequencies with gaps
    /// no wider than `cutoff`.
    Secular { cutoff: f64 },
}

impl Default for LindbladBackend {
    fn default() -> Self {
        LindbladBackend::Secular { cutoff: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LindbladOptions {
    pub backend: LindbladBackend,
    pub rtol: f64,
    pub atol: f64,
    /// Operator elements below this magnitude are dropped.
    pub element_tol: f64,
    /// Decay links at least this strong pull their destination into the
    /// integrated subspace; weaker links leak trace out of it.
    pub link_tol: f64,
    /// Eigenstates populated above this seed the integrated subspace.
    pub pop_tol: f64,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        LindbladOptions {
            backend: LindbladBackend::default(),
            rtol: 1e-8,
            atol: 1e-10,
            element_tol: 1e-6,
            link_tol: 1e-3,
            pop_tol: 1e-10,
        }
    }
}

/// Integrator and subspace statistics of one evolution.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LindbladStats {
    /// Number of eigenstates integrated.
    pub kept: usize,
    /// Jump-operator elements (secular backend) or operator elements (dense).
    pub terms: usize,
    pub evaluations: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// `1 − tr ρ` at the end of the evolution.
    pub lost_trace: f64,
}

impl LindbladStats {
    pub fn accumulate(&mut self, other: &LindbladStats) {
        self.kept = self.kept.max(other.kept);
        self.terms = self.terms.max(other.terms);
        self.evaluations += other.evaluations;
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.lost_trace = other.lost_trace;
    }
}

/// Eigenstates integrated explicitly: populated states and everything they
/// decay into through links of at least `link_tol`.
fn kept_states(rho: &DMatrix<Complex64>, channels: &[(DMatrix<f64>, f64)], opts: &LindbladOptions) -> Vec<usize> {
    let dim = rho.nrows();
    let mut kept = vec![false; dim];
    let mut stack: Vec<usize> = (0..dim).filter(|&m| rho[(m, m)].re > opts.pop_tol).collect();
    for &m in &stack {
        kept[m] = true;
    }
    while let Some(m) = stack.pop() {
        for (o, _) in channels {
            for j in 0..m {
                if !kept[j] && o[(j, m)].abs() >= opts.link_tol {
                    kept[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    (0..dim).filter(|&m| kept[m]).collect()
}

/// One element `c·|j⟩⟨m|` of a secular jump operator, in local indices.
#[derive(Clone, Copy, Debug)]
struct Entry {
    /// Position of `j` in the operator's row list.
    slot: usize,
    j: usize,
    m: usize,
    /// Index into the shared element list, which carries the phase.
    elem: usize,
    coeff: f64,
}

/// Sparse jump operator of one channel restricted to one frequency cluster,
/// with `√γ` folded into the coefficients.
#[derive(Clone, Debug)]
struct JumpOp {
    rows: Vec<usize>,
    entries: Vec<Entry>,
}

enum Generator {
    Secular {
        /// Operator elements `(j, m)` in local indices.
        elements: Vec<(usize, usize)>,
        ops: Vec<JumpOp>,
        /// Nonzero entries of the masked decay matrix `Γ`.
        gamma: Vec<(usize, usize, f64)>,
    },
    Dense {
        ops: Vec<(DMatrix<f64>, f64)>,
        gamma: DMatrix<f64>,
    },
}

fn build_generator(
    energies: &[f64],
    kept: &[usize],
    channels: &[(DMatrix<f64>, f64)],
    opts: &LindbladOptions,
) -> Generator {
    let k = kept.len();
    let dim = channels.first().map_or(0, |(o, _)| o.nrows());
    let thr = |x: f64| if x.abs() > opts.element_tol { x } else { 0.0 };
    // Γ_mn = Σ_k γ_k Σ_j O_k[j,m] O_k[j,n] with j running over the whole
    // space, so decay into states outside the kept set removes trace.
    let mut gamma = DMatrix::<f64>::zeros(k, k);
    for (o, rate) in channels {
        let cols = DMatrix::from_fn(dim, k, |j, c| thr(o[(j, kept[c])]));
        gamma += cols.tr_mul(&cols) * *rate;
    }
    let local_ops: Vec<(DMatrix<f64>, f64)> = channels
        .iter()
        .map(|(o, rate)| (DMatrix::from_fn(k, k, |r, c| thr(o[(kept[r], kept[c])])), *rate))
        .collect();
    match opts.backend {
        LindbladBackend::Dense => Generator::Dense { ops: local_ops, gamma },
        LindbladBackend::Secular { cutoff } => {
            // Transition frequencies of every element (j, m) with m kept are
            // grouped into clusters separated by gaps wider than `cutoff`.
            // Cross terms survive only inside a cluster, so each cluster
            // acts as one jump operator and the generator stays of Lindblad
            // form.
            let mut freqs: Vec<f64> = Vec::new();
            for (o, _) in channels {
                for &m in kept {
                    for j in 0..m {
                        if thr(o[(j, m)]) != 0.0 {
                            freqs.push(energies[j] - energies[m]);
                        }
                    }
                }
            }
            freqs.sort_by(f64::total_cmp);
            freqs.dedup();
            let mut starts = Vec::new();
            for (p, w) in freqs.iter().enumerate() {
                if p == 0 || w - freqs[p - 1] > cutoff {
                    starts.push(*w);
                }
            }
            let cluster = |w: f64| starts.partition_point(|&s| s <= w);

            let mut gmasked = DMatrix::<f64>::zeros(k, k);
            for (o, rate) in channels {
                for j in 0..dim {
                    let col: Vec<(usize, f64, usize)> = (0..k)
                        .filter_map(|c| {
                            let x = thr(o[(j, kept[c])]);
                            (x != 0.0).then(|| (c, x, cluster(energies[j] - energies[kept[c]])))
                        })
                        .collect();
                    for &(m, xm, cm) in &col {
                        for &(n, xn, cn) in &col {
                            if cm == cn {
                                gmasked[(m, n)] += rate * xm * xn;
                            }
                        }
                    }
                }
            }

            let mut index: HashMap<(usize, usize), usize> = HashMap::new();
            let mut elements = Vec::new();
            for (o, _) in &local_ops {
                for c in 0..k {
                    for r in 0..c {
                        if o[(r, c)] != 0.0 {
                            index.entry((r, c)).or_insert_with(|| {
                                elements.push((r, c));
                                elements.len() - 1
                            });
                        }
                    }
                }
            }
            // Each channel splits into one jump operator per cluster; a
            // cluster's operator is applied as a whole, `L ρ̃ L†`, which
            // carries exactly the cross terms allowed inside the cluster.
            let mut ops = Vec::new();
            for (o, rate) in &local_ops {
                let mut by_cluster: BTreeMap<usize, JumpOp> = BTreeMap::new();
                for (e, &(j, m)) in elements.iter().enumerate() {
                    let x = o[(j, m)];
                    if x == 0.0 {
                        continue;
                    }
                    let op = by_cluster
                        .entry(cluster(energies[kept[j]] - energies[kept[m]]))
                        .or_insert_with(|| JumpOp {
                            rows: Vec::new(),
                            entries: Vec::new(),
                        });
                    let slot = match op.rows.iter().position(|&r| r == j) {
                        Some(s) => s,
                        None => {
                            op.rows.push(j);
                            op.rows.len() - 1
                        }
                    };
                    op.entries.push(Entry {
                        slot,
                        j,
                        m,
                        elem: e,
                        coeff: rate.sqrt() * x,
                    });
                }
                ops.extend(by_cluster.into_values());
            }
            let mut gsparse = Vec::new();
            for c in 0..k {
                for r in 0..k {
                    if gmasked[(r, c)] != 0.0 {
                        gsparse.push((r, c, gmasked[(r, c)]));
                    }
                }
            }
            Generator::Secular {
                elements,
                ops,
                gamma: gsparse,
            }
        }
    }
}

/// Buffers reused across right-hand-side evaluations.
#[derive(Default)]
struct Scratch {
    phases: Vec<Complex64>,
    rows: Vec<Complex64>,
}

impl Generator {
    fn terms(&self) -> usize {
        match self {
            Generator::Secular { ops, .. } => ops.iter().map(|op| op.entries.len()).sum(),
            Generator::Dense { ops, .. } => ops.iter().map(|(o, _)| o.iter().filter(|x| **x != 0.0).count()).sum(),
        }
    }

    /// `dρ̃/dt` at time `t`; `p_m = e^{iE_m t}` over the kept states.
    fn rhs(&self, p: &[Complex64], rho: &[Complex64], out: &mut [Complex64], scratch: &mut Scratch) {
        let k = p.len();
        out.iter_mut().for_each(|z| *z = ZERO);
        let at = |r: usize, c: usize| r + k * c;
        match self {
            Generator::Secular { elements, ops, gamma } => {
                let Scratch { phases, rows } = scratch;
                phases.clear();
                phases.extend(elements.iter().map(|&(j, m)| p[j] * p[m].conj()));
                for op in ops {
                    // rows[slot·k + c] = (L̃ ρ̃)[rows_slot, c]
                    rows.clear();
                    rows.resize(op.rows.len() * k, ZERO);
                    for en in &op.entries {
                        let w = phases[en.elem] * en.coeff;
                        let dst = &mut rows[en.slot * k..(en.slot + 1) * k];
                        for (c, d) in dst.iter_mut().enumerate() {
                            *d += w * rho[at(en.m, c)];
                        }
                    }
                    // (L̃ ρ̃ L̃†)[r, j] = Σ (L̃ ρ̃)[r, m] conj(L̃[j, m])
                    for en in &op.entries {
                        let w = (phases[en.elem] * en.coeff).conj();
                        for (slot, &r) in op.rows.iter().enumerate() {
                            out[at(r, en.j)] += rows[slot * k + en.m] * w;
                        }
                    }
                }
                for &(m, n, g) in gamma {
                    let z = p[m] * p[n].conj() * (0.5 * g);
                    // −½ Γ̃ ρ̃: row m gains Γ̃_mn ρ̃_{n,·}.
                    for c in 0..k {
                        out[at(m, c)] -= z * rho[at(n, c)];
                    }
                    // −½ ρ̃ Γ̃: column n gains ρ̃_{·,m} Γ̃_mn.
                    for r in 0..k {
                        out[at(r, n)] -= rho[at(r, m)] * z;
                    }
                }
            }
            Generator::Dense { ops, gamma } => {
                let r = DMatrix::from_column_slice(k, k, rho);
                let ph = DMatrix::from_fn(k, k, |m, n| p[m] * p[n].conj());
                let gt = DMatrix::from_fn(k, k, |m, n| ph[(m, n)] * gamma[(m, n)]);
                let mut acc = (&gt * &r + &r * &gt) * Complex64::new(-0.5, 0.0);
                for (o, rate) in ops {
                    let ot = DMatrix::from_fn(k, k, |m, n| ph[(m, n)] * o[(m, n)]);
                    acc += &ot * &r * ot.adjoint() * Complex64::new(*rate, 0.0);
                }
                out.copy_from_slice(acc.as_slice());
            }
        }
    }
}

/// Schrödinger-picture eigenbasis matrix from the frozen full matrix and the
/// integrated block.
fn assemble(
    full: &DMatrix<Complex64>,
    kept: &[usize],
    local: &[Complex64],
    energies: &[f64],
    t: f64,
) -> DMatrix<Complex64> {
    let k = kept.len();
    let mut rho = full.clone();
    for (c, &fc) in kept.iter().enumerate() {
        for (r, &fr) in kept.iter().enumerate() {
            rho[(fr, fc)] = local[r + k * c];
        }
    }
    let q: Vec<Complex64> = energies.iter().map(|e| Complex64::from_polar(1.0, -e * t)).collect();
    for c in 0..rho.ncols() {
        for r in 0..rho.nrows() {
            rho[(r, c)] *= q[r] * q[c].conj();
        }
    }
    rho
}

/// Evolves an eigenbasis density matrix for `t_final` under the full
/// Hamiltonian of `es` and the dressed channels `(O, γ)`, where each `O` is
/// strictly upper triangular in the energy-ordered eigenbasis.
/// `observe` is called at each time in `samples` (which must lie in
/// `[0, t_final]` and be non-decreasing) with the eigenbasis density matrix.
pub fn evolve_lindblad_eigen(
    es: &Eigensystem,
    channels: &[(DMatrix<f64>, f64)],
    rho: &mut DMatrix<Complex64>,
    t_final: f64,
    samples: &[f64],
    options: &LindbladOptions,
    observe: &mut dyn FnMut(f64, &DMatrix<Complex64>) -> Result<()>,
) -> Result<LindbladStats> {
    let dim = es.dim();
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho.nrows(),
        });
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::Integration(format!("invalid duration {t_final}")));
    }
    if samples.windows(2).any(|w| w[1] < w[0]) || samples.iter().any(|&s| s < 0.0 || s > t_final) {
        return Err(Error::Integration(
            "sample times must be sorted within [0, t_final]".into(),
        ));
    }
    for (o, rate) in channels {
        if o.nrows() != dim || o.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: o.nrows(),
            });
        }
        if !(*rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidRates(format!("rate {rate}")));
        }
    }
    let energies: Vec<f64> = es.energies().iter().copied().collect();
    let active: Vec<(DMatrix<f64>, f64)> = channels.iter().filter(|(_, r)| *r > 0.0).cloned().collect();
    let kept = if active.is_empty() {
        Vec::new()
    } else {
        kept_states(rho, &active, options)
    };
    let k = kept.len();
    let generator = build_generator(&energies, &kept, &active, options);
    let kept_e: Vec<f64> = kept.iter().map(|&m| energies[m]).collect();
    let mut y: Vec<Complex64> = Vec::with_capacity(k * k);
    for &c in &kept {
        for &r in &kept {
            y.push(rho[(r, c)]);
        }
    }
    let frozen = rho.clone();
    let mut ode = Dopri5::new(
        k * k,
        OdeOptions {
            rtol: options.rtol,
            atol: options.atol,
            ..OdeOptions::default()
        },
    );
    let mut p = vec![ZERO; k];
    let mut scratch = Scratch::default();
    let mut f = |t: f64, yv: &[Complex64], dy: &mut [Complex64]| {
        for (pm, e) in p.iter_mut().zip(&kept_e) {
            *pm = Complex64::from_polar(1.0, e * t);
        }
        generator.rhs(&p, yv, dy, &mut scratch);
    };
    let mut t = 0.0;
    for &s in samples {
        if k > 0 {
            ode.advance(&mut f, &mut t, &mut y, s)?;
        }
        t = s;
        observe(s, &assemble(&frozen, &kept, &y, &energies, s))?;
    }
    if k > 0 {
        ode.advance(&mut f, &mut t, &mut y, t_final)?;
    }
    *rho = assemble(&frozen, &kept, &y, &energies, t_final);
    let trace: f64 = rho.diagonal().iter().map(|z| z.re).sum();
    Ok(LindbladStats {
        kept: k,
        terms: generator.terms(),
        evaluations: ode.evaluations,
        accepted: ode.accepted,
        rejected: ode.rejected,
        lost_trace: 1.0 - trace,
    })
}
