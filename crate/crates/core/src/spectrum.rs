//! Exact spectra, eigenstate identification, avoided-crossing search and
//! dressed lowering operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hilbert::{BasisSpec, BasisState, OperatorMatrix};
use crate::model::{build_full, SystemParams};
use crate::perturb::{effective_coupling, resonance_shift, ResonanceKind};

/// Tolerance on `max |H_ij − H_ji|` accepted by [`diagonalize`].
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Energy splitting below which two eigenvalues are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Full eigendecomposition with energies in ascending order.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// Column `n` is the eigenvector of `energies[n]`.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn energy(&self, n: usize) -> f64 {
        self.energies[n]
    }

    /// `max_n ‖H v_n − E_n v_n‖₂`.
    pub fn max_residual(&self, h: &OperatorMatrix) -> f64 {
        let hv = h.matrix() * &self.vectors;
        (0..self.dim())
            .map(|n| (hv.column(n) - self.vectors.column(n) * self.energies[n]).norm())
            .fold(0.0, f64::max)
    }

    /// `Σ_n E_n v_n v_nᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.vectors[(i, j)] * self.energies[j]);
        scaled * self.vectors.transpose()
    }

    /// Expresses a bare-basis operator in the eigenbasis: `Uᵀ O U`.
    pub fn to_eigenbasis(&self, op: &DMatrix<f64>) -> DMatrix<f64> {
        self.vectors.transpose() * op * &self.vectors
    }

    /// Expresses an eigenbasis operator in the bare basis: `U O Uᵀ`.
    pub fn to_bare(&self, op: &DMatrix<f64>) -> DMatrix<f64> {
        &self.vectors * op * self.vectors.transpose()
    }
}

/// Cyclic Jacobi sweeps on `VᵀHV` until its off-diagonal part is at
/// rounding level. Returns the diagonal and the rotated basis.
fn jacobi_polish(h: &DMatrix<f64>, mut v: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = h.nrows();
    let mut a = v.transpose() * h * &v;
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;
    for _ in 0..12 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol {
                    continue;
                }
                rotated = true;
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    ((0..n).map(|k| a[(k, k)]).collect(), v)
}

/// Diagonalises a real symmetric Hamiltonian.
///
/// The implicit QR result is polished with Jacobi rotations, since it can
/// leave residuals near 1e−7 when levels nearly cross.
///
/// Eigenvectors are sign-fixed so that their largest-magnitude component is
/// positive, which keeps results reproducible across runs.
pub fn diagonalize(h: &OperatorMatrix) -> Result<Eigensystem> {
    let asym = h.max_asymmetry();
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    if h.matrix().iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("non-finite matrix entry".into()));
    }
    let n = h.dim();
    let eig = SymmetricEigen::new(h.matrix().clone());
    let (values, basis) = jacobi_polish(h.matrix(), eig.eigenvectors);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let energies = DVector::from_iterator(n, order.iter().map(|&k| values[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = basis.column(src);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(dst, &(col * sign));
    }
    Ok(Eigensystem { energies, vectors })
}

/// Result of identifying a bare state among the eigenstates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocatedState {
    pub index: usize,
    /// `|⟨target|E_index⟩|`.
    pub overlap: f64,
    /// Set when the two best overlaps differ by less than 0.05, so the
    /// identification is not meaningful (typically at an avoided crossing).
    pub ambiguous: bool,
}

/// Eigenstate with maximal overlap onto a bare state.
pub fn locate_state(es: &Eigensystem, spec: &BasisSpec, target: BasisState) -> Result<LocatedState> {
    if spec.dim() != es.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: es.dim(),
        });
    }
    let row = spec.index(target)?;
    let mut best = (0usize, -1.0f64);
    let mut second = -1.0f64;
    for n in 0..es.dim() {
        let o = es.vectors[(row, n)].abs();
        if o > best.1 {
            second = best.1;
            best = (n, o);
        } else if o > second {
            second = o;
        }
    }
    Ok(LocatedState {
        index: best.0,
        overlap: best.1,
        ambiguous: best.1 - second.max(0.0) < 0.05,
    })
}

/// Which qutrit spacing a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    OmegaEg,
    OmegaFg,
}

impl SweepAxis {
    pub fn apply(self, params: &SystemParams, value: f64) -> SystemParams {
        match self {
            SweepAxis::OmegaEg => SystemParams {
                omega_eg: value,
                ..*params
            },
            SweepAxis::OmegaFg => SystemParams {
                omega_fg: value,
                ..*params
            },
        }
    }
}

/// Uniform sweep of one spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub lo: f64,
    pub hi: f64,
    /// Coarse-scan resolution; at least 400 is used regardless.
    pub points: usize,
}

impl Sweep {
    pub const MIN_POINTS: usize = 400;

    pub fn new(axis: SweepAxis, lo: f64, hi: f64) -> Self {
        Sweep {
            axis,
            lo,
            hi,
            points: Self::MIN_POINTS + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo >= self.hi {
            return Err(Error::InvalidSweep(format!(
                "need lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.points < 2 {
            return Err(Error::InvalidSweep("need at least two points".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Located avoided crossing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingResult {
    /// Swept spacing at the minimum gap.
    pub location: f64,
    /// Minimum splitting, the numerical `2|g_eff|`.
    pub gap: f64,
    /// Eigen-indices (ascending) of the two branches at the crossing.
    pub branch_indices: (usize, usize),
    /// `overlaps[k][l] = |⟨bare_l|branch_k⟩|`.
    pub overlaps: [[f64; 2]; 2],
}

/// Energies of two adiabatically tracked branches across a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchScan {
    pub values: Vec<f64>,
    /// Branch that starts on the first bare state of the pair.
    pub first: Vec<f64>,
    /// Branch that starts on the second bare state of the pair.
    pub second: Vec<f64>,
}

impl BranchScan {
    pub fn gaps(&self) -> Vec<f64> {
        self.first
            .iter()
            .zip(&self.second)
            .map(|(a, b)| (a - b).abs())
            .collect()
    }
}

fn column_overlap(es: &Eigensystem, prev: &DVector<f64>, n: usize) -> f64 {
    es.vectors.column(n).dot(prev).abs()
}

/// Follows the eigenstates that start on `pair.0` and `pair.1` through the
/// sweep by maximal overlap with the previous point's eigenvectors.
pub fn track_branches(
    params: &SystemParams,
    spec: &BasisSpec,
    sweep: &Sweep,
    pair: (BasisState, BasisState),
    include_crosstalk: bool,
) -> Result<BranchScan> {
    sweep.validate()?;
    let values = sweep.values();
    let mut first = Vec::with_capacity(values.len());
    let mut second = Vec::with_capacity(values.len());
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    for &x in &values {
        let p = sweep.axis.apply(params, x);
        let es = diagonalize(&build_full(&p, spec, include_crosstalk))?;
        let (i, j) = match &prev {
            None => {
                let a = locate_state(&es, spec, pair.0)?.index;
                let rb = spec.index(pair.1)?;
                let b = (0..es.dim())
                    .filter(|&n| n != a)
                    .max_by(|&m, &n| es.vectors[(rb, m)].abs().total_cmp(&es.vectors[(rb, n)].abs()))
                    .ok_or_else(|| Error::InvalidSweep("basis too small to track two branches".into()))?;
                (a, b)
            }
            Some((va, vb)) => {
                let best = |v: &DVector<f64>, skip: Option<usize>| {
                    (0..es.dim())
                        .filter(|&n| Some(n) != skip)
                        .max_by(|&m, &n| column_overlap(&es, v, m).total_cmp(&column_overlap(&es, v, n)))
                        .expect("dim ≥ 2")
                };
                let a = best(va, None);
                let b = best(vb, None);
                if a != b {
                    (a, b)
                } else if column_overlap(&es, va, a) >= column_overlap(&es, vb, b) {
                    (a, best(vb, Some(a)))
                } else {
                    (best(va, Some(b)), b)
                }
            }
        };
        first.push(es.energy(i));
        second.push(es.energy(j));
        prev = Some((es.vectors.column(i).into_owned(), es.vectors.column(j).into_owned()));
    }
    Ok(BranchScan { values, first, second })
}

/// The two eigenstates carrying the largest weight in `span{pair}`,
/// returned in ascending index order. Ties resolve to the lower index.
fn crossing_pair(es: &Eigensystem, rows: (usize, usize)) -> (usize, usize) {
    let weight = |n: usize| es.vectors[(rows.0, n)].powi(2) + es.vectors[(rows.1, n)].powi(2);
    let mut best = [(usize::MAX, -1.0f64); 2];
    for n in 0..es.dim() {
        let w = weight(n);
        if w > best[0].1 {
            best[1] = best[0];
            best[0] = (n, w);
        } else if w > best[1].1 {
            best[1] = (n, w);
        }
    }
    let (i, j) = (best[0].0, best[1].0);
    (i.min(j), i.max(j))
}

fn gap_at(
    params: &SystemParams,
    spec: &BasisSpec,
    axis: SweepAxis,
    rows: (usize, usize),
    x: f64,
) -> Result<(f64, Eigensystem, (usize, usize))> {
    let es = diagonalize(&build_full(&axis.apply(params, x), spec, false))?;
    let (i, j) = crossing_pair(&es, rows);
    Ok(((es.energy(j) - es.energy(i)).abs(), es, (i, j)))
}

/// Locates the avoided crossing between the branches of `pair` within the
/// sweep window: a coarse scan with branch tracking brackets the minimum gap,
/// then golden-section search refines it to 1e-9 in the swept spacing.
pub fn find_avoided_crossing(
    params: &SystemParams,
    spec: &BasisSpec,
    sweep: &Sweep,
    pair: (BasisState, BasisState),
) -> Result<CrossingResult> {
    let sweep = Sweep {
        points: sweep.points.max(Sweep::MIN_POINTS),
        ..*sweep
    };
    let scan = track_branches(params, spec, &sweep, pair, false)?;
    let gaps = scan.gaps();
    let k = gaps
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("non-empty sweep");
    if k == 0 || k + 1 == gaps.len() {
        return Err(Error::NoCrossing {
            lo: sweep.lo,
            hi: sweep.hi,
        });
    }
    let rows = (spec.index(pair.0)?, spec.index(pair.1)?);
    let (mut a, mut b) = (scan.values[k - 1], scan.values[k + 1]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = gap_at(params, spec, sweep.axis, rows, c)?.0;
    let mut fd = gap_at(params, spec, sweep.axis, rows, d)?.0;
    while (b - a).abs() > 1e-9 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = gap_at(params, spec, sweep.axis, rows, c)?.0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = gap_at(params, spec, sweep.axis, rows, d)?.0;
        }
    }
    let location = 0.5 * (a + b);
    let (gap, es, (i, j)) = gap_at(params, spec, sweep.axis, rows, location)?;
    let ov = |n: usize, r: usize| es.vectors[(r, n)].abs();
    Ok(CrossingResult {
        location,
        gap,
        branch_indices: (i, j),
        overlaps: [[ov(i, rows.0), ov(i, rows.1)], [ov(j, rows.0), ov(j, rows.1)]],
    })
}

/// Locates the avoided crossing of a resonance in a window of half-width
/// `half_window` around its closed-form spacing (the bare spacing when no
/// closed form applies).
pub fn locate_resonance(
    params: &SystemParams,
    spec: &BasisSpec,
    kind: ResonanceKind,
    half_window: f64,
) -> Result<CrossingResult> {
    let center = kind.bare_spacing(params) + resonance_shift(params, kind, false).unwrap_or(0.0);
    let axis = if kind.uses_omega_eg() {
        SweepAxis::OmegaEg
    } else {
        SweepAxis::OmegaFg
    };
    let sweep = Sweep::new(axis, center - half_window, center + half_window);
    find_avoided_crossing(params, spec, &sweep, kind.states())
}

/// Default search half-width for `locate_resonance`: half the closed-form
/// shift plus three closed-form half-gaps, so the window brackets the crossing
/// without reaching neighbouring resonances.
pub fn resonance_window(params: &SystemParams, kind: ResonanceKind) -> f64 {
    let shift = resonance_shift(params, kind, false).unwrap_or(0.0).abs();
    let g = effective_coupling(params, kind).unwrap_or(0.0).abs();
    (0.5 * shift + 3.0 * g).max(1e-4)
}

/// Programs both spacings at their numerically located crossings for the
/// simultaneous resonances `kind_a` (on `ω_eg`) and `kind_b` (on `ω_fg`).
/// Each search holds the other spacing at its current value; two passes make
/// the pair self-consistent.
pub fn tune_double_resonance(
    params: &SystemParams,
    spec: &BasisSpec,
    kind_a: ResonanceKind,
    kind_b: ResonanceKind,
    half_window: f64,
) -> Result<SystemParams> {
    if !kind_a.uses_omega_eg() || kind_b.uses_omega_eg() {
        return Err(Error::InvalidParams("need one ω_eg and one ω_fg resonance".into()));
    }
    let mut p = SystemParams {
        omega_eg: kind_a.bare_spacing(params) + resonance_shift(params, kind_a, false).unwrap_or(0.0),
        omega_fg: kind_b.bare_spacing(params) + resonance_shift(params, kind_b, false).unwrap_or(0.0),
        ..*params
    };
    for _ in 0..2 {
        p.omega_eg = locate_resonance(&p, spec, kind_a, half_window)?.location;
        p.omega_fg = locate_resonance(&p, spec, kind_b, half_window)?.location;
    }
    Ok(p)
}

/// Dressed operator in the energy-ordered eigenbasis:
/// `O_mn = ⟨E_m|(o + o†)|E_n⟩` for `E_n > E_m`, zero otherwise.
/// Eigenstates above `energy_cap` are excluded.
pub fn dress_in_eigenbasis(es: &Eigensystem, bare: &OperatorMatrix, energy_cap: Option<f64>) -> DMatrix<f64> {
    let x = bare.matrix() + bare.matrix().transpose();
    let mut o = es.to_eigenbasis(&x);
    let cap = energy_cap.unwrap_or(f64::INFINITY);
    let e = &es.energies;
    for m in 0..es.dim() {
        for n in 0..es.dim() {
            let keep = e[n] - e[m] > DEGENERACY_TOL && e[n] <= cap && e[m] <= cap;
            if !keep {
                o[(m, n)] = 0.0;
            }
        }
    }
    o
}

/// Dressed lowering operator expressed back in the bare basis.
pub fn dress_operator(es: &Eigensystem, bare: &OperatorMatrix, energy_cap: Option<f64>) -> Result<OperatorMatrix> {
    bare.check_dim(es.dim())?;
    OperatorMatrix::from_matrix(es.to_bare(&dress_in_eigenbasis(es, bare, energy_cap)))
}
