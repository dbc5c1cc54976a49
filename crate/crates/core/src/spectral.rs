//! Locating zeros of transfer-matrix entries.
//!
//! * Real zeros of `M22` are spectral singularities (lasing thresholds for
//!   optical media); real zeros of `M11` are CPA points. A complex condition
//!   on one real `k` is generically codimension two, so both searches run
//!   over `(k, θ)` for a one-parameter [`Family`].
//! * Complex zeros of `M22` are resonances (`Im k < 0`) or bound states
//!   (positive imaginary axis); they are found with the argument principle.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::contour::{find_zeros, ContourOptions, Rect};
use crate::error::{Error, Result};
use crate::newton::{solve2, NewtonOptions};
use crate::potentials::{Potential, Structure};
use crate::transfer::{amplitudes, unitarity_defect, Amplitudes, Scatterer, TransferMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SingularityKind {
    LasingSs,
    Cpa,
    Resonance,
    BoundState,
    VirtualState,
}

impl SingularityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SingularityKind::LasingSs => "lasing-SS",
            SingularityKind::Cpa => "CPA",
            SingularityKind::Resonance => "resonance",
            SingularityKind::BoundState => "bound-state",
            SingularityKind::VirtualState => "virtual-state",
        }
    }
}

impl std::fmt::Display for SingularityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityReport {
    pub k_star: Complex64,
    pub tuned_parameter: Option<(String, f64)>,
    /// `|M22|` (or `|M11|` for CPA) re-evaluated at the reported point.
    pub residual: f64,
    pub kind: SingularityKind,
    /// Zero count of a cluster that could not be separated (complex search).
    pub multiplicity: usize,
    /// The root lies on a curve of zeros rather than being isolated in `(k, θ)`.
    pub degenerate: bool,
}

/// One row of a `k` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub k: f64,
    pub m: TransferMatrix,
    /// `None` where `M22` vanishes (amplitudes diverge).
    pub amplitudes: Option<Amplitudes>,
    pub unitarity: Option<(f64, f64)>,
}

impl ScanRow {
    pub fn is_singular(&self) -> bool {
        self.amplitudes.is_none()
    }
}

fn check_grid(k_grid: &[f64]) -> Result<()> {
    if let Some(k) = k_grid.iter().find(|k| !(**k > 0.0)) {
        return Err(Error::NonPositiveWavenumber(*k));
    }
    if k_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("k grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Transfer matrix, amplitudes and unitarity defects on every grid point.
pub fn scan(source: &impl Scatterer, k_grid: &[f64]) -> Result<Vec<ScanRow>> {
    check_grid(k_grid)?;
    k_grid
        .par_iter()
        .map(|&k| {
            let m = source.transfer_matrix(k)?;
            let a = amplitudes(&m).ok();
            Ok(ScanRow {
                k,
                m,
                amplitudes: a,
                unitarity: a.as_ref().map(unitarity_defect),
            })
        })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

type Builder<'a> = Box<dyn Fn(f64) -> Result<Structure> + Send + Sync + 'a>;

/// A structure depending on one real parameter `θ`.
pub struct Family<'a> {
    name: String,
    build: Builder<'a>,
}

impl std::fmt::Debug for Family<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Family").field("name", &self.name).finish()
    }
}

impl<'a> Family<'a> {
    pub fn new(name: impl Into<String>, build: impl Fn(f64) -> Result<Structure> + Send + Sync + 'a) -> Self {
        Self {
            name: name.into(),
            build: Box::new(build),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn at(&self, theta: f64) -> Result<Structure> {
        (self.build)(theta)
    }

    /// `θ` replaces `Im n` of every medium layer.
    pub fn kappa(base: Structure) -> Self {
        Self::new("kappa", move |t| Ok(base.with_kappa(t)))
    }

    /// `θ` replaces `Re n` of every medium layer.
    pub fn eta(base: Structure) -> Self {
        Self::new("eta", move |t| base.with_eta(t))
    }

    /// `θ` scales every delta strength.
    pub fn delta_scale(base: Structure) -> Self {
        Self::new("alpha", move |t| Ok(base.with_delta_scale(t)))
    }

    /// `θ` scales layered and sampled potential profiles.
    pub fn profile_scale(name: impl Into<String>, base: Structure) -> Self {
        Self::new(name, move |t| Ok(base.with_profile_scale(t)))
    }

    /// Family of potentials `θ · v` for a fixed potential `v`.
    pub fn scaled_potential(name: impl Into<String>, p: Potential) -> Self {
        Self::new(name, move |t| Structure::from_potential(p.scaled(Complex64::new(t, 0.0))))
    }

    pub fn parity_transform(self) -> Self {
        let build = self.build;
        Self::new(self.name, move |t| Ok(build(t)?.parity_transform()))
    }

    pub fn time_reverse(self) -> Self {
        let build = self.build;
        Self::new(self.name, move |t| Ok(build(t)?.time_reverse()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Residual bound `|M22|` (or `|M11|`) for an accepted root.
    pub tol: f64,
    pub k_points: usize,
    pub theta_points: usize,
    /// At most this many coarse minima are refined, deepest first.
    pub max_seeds: usize,
    pub max_iter: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            k_points: 400,
            theta_points: 400,
            max_seeds: 256,
            max_iter: 60,
        }
    }
}

/// A seed whose refinement did not reach the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Unconverged {
    pub k: f64,
    pub theta: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchOutcome {
    pub roots: Vec<SingularityReport>,
    pub unconverged: Vec<Unconverged>,
}

#[derive(Clone, Copy)]
enum Entry {
    M11,
    M22,
}

impl Entry {
    fn of(self, m: &TransferMatrix) -> Complex64 {
        match self {
            Entry::M11 => m.m11,
            Entry::M22 => m.m22,
        }
    }
}

/// Real spectral singularities: zeros of `M22` over `(k, θ)`.
pub fn find_ss(family: &Family, k_window: (f64, f64), theta_window: (f64, f64), opts: &SearchOptions) -> Result<SearchOutcome> {
    search_real(family, Entry::M22, SingularityKind::LasingSs, k_window, theta_window, opts)
}

/// CPA points: zeros of `M11` over `(k, θ)`.
pub fn find_cpa(family: &Family, k_window: (f64, f64), theta_window: (f64, f64), opts: &SearchOptions) -> Result<SearchOutcome> {
    search_real(family, Entry::M11, SingularityKind::Cpa, k_window, theta_window, opts)
}

fn check_window(name: &str, w: (f64, f64)) -> Result<()> {
    if !(w.0 < w.1) || !w.0.is_finite() || !w.1.is_finite() {
        return Err(Error::InvalidArgument(format!("empty {name} window {w:?}")));
    }
    Ok(())
}

fn search_real(
    family: &Family,
    entry: Entry,
    kind: SingularityKind,
    kw: (f64, f64),
    tw: (f64, f64),
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    check_window("k", kw)?;
    check_window("parameter", tw)?;
    if !(kw.0 > 0.0) {
        return Err(Error::NonPositiveWavenumber(kw.0));
    }
    if !(opts.tol > 0.0) || opts.k_points < 2 || opts.theta_points < 2 {
        return Err(Error::InvalidArgument("tolerance and grid sizes must be positive".into()));
    }
    let ks = linspace(kw.0, kw.1, opts.k_points);
    let ts = linspace(tw.0, tw.1, opts.theta_points);
    let eval = |k: f64, t: f64| -> Result<Complex64> { Ok(entry.of(&family.at(t)?.transfer_matrix(k)?)) };

    // coarse |entry| on the grid, row-major in θ
    let values: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let s = family.at(t)?;
            ks.iter().map(|&k| Ok(entry.of(&s.transfer_matrix(k)?).norm())).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .concat();

    let nk = ks.len();
    let nt = ts.len();
    let at = |i: usize, j: usize| values[j * nk + i];
    let mut seeds: Vec<(f64, usize, usize)> = Vec::new();
    for j in 0..nt {
        for i in 0..nk {
            let v = at(i, j);
            let mut is_min = true;
            'nb: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= nk as i64 || jj >= nt as i64 {
                        continue;
                    }
                    let w = at(ii as usize, jj as usize);
                    // ties go to the first grid point in row-major order
                    let earlier = (dj, di) < (0, 0);
                    if w < v || (earlier && w == v) {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                seeds.push((v, i, j));
            }
        }
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
    seeds.truncate(opts.max_seeds);

    let dk = (kw.1 - kw.0) / (nk - 1) as f64;
    let dt = (tw.1 - tw.0) / (nt - 1) as f64;
    let newton = NewtonOptions {
        max_iter: opts.max_iter,
        tol: opts.tol,
        polish: 4,
        fd_step: 1e-7,
        fd_floor: [1e-7 * (kw.1 - kw.0), 1e-7 * (tw.1 - tw.0)],
    };
    let refined: Vec<_> = seeds
        .par_iter()
        .map(|&(_, i, j)| {
            let f = |x: [f64; 2]| {
                if !(x[0] > 0.0) {
                    return None;
                }
                eval(x[0], x[1]).ok().map(|z| [z.re, z.im])
            };
            (ks[i], ts[j], solve2(f, [ks[i], ts[j]], &newton))
        })
        .collect();

    let mut out = SearchOutcome::default();
    let mut found: Vec<(f64, f64, bool)> = Vec::new();
    for (k0, t0, r) in refined {
        if !r.converged {
            out.unconverged.push(Unconverged {
                k: k0,
                theta: t0,
                residual: r.residual,
                iterations: r.iterations,
            });
            continue;
        }
        let [k, t] = r.x;
        let inside = k >= kw.0 - 0.5 * dk && k <= kw.1 + 0.5 * dk && t >= tw.0 - 0.5 * dt && t <= tw.1 + 0.5 * dt;
        if inside {
            found.push((k, t, r.rank < 2));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut kept: Vec<(f64, f64, bool)> = Vec::new();
    for cand in found {
        // isolated roots merge when they agree to solver precision; points on a
        // curve of zeros are thinned to about one per coarse cell
        let (sk, st) = if cand.2 { (2.0 * dk, 2.0 * dt) } else { (1e-6 * dk.max(cand.0.abs() * 1e-3), 1e-6 * dt.max(cand.1.abs() * 1e-3)) };
        let dup = kept
            .iter()
            .any(|q| q.2 == cand.2 && (q.0 - cand.0).abs() < sk && (q.1 - cand.1).abs() < st);
        if !dup {
            kept.push(cand);
        }
    }

    for (k, t, degenerate) in kept {
        let residual = eval(k, t)?.norm();
        if residual < opts.tol {
            out.roots.push(SingularityReport {
                k_star: Complex64::new(k, 0.0),
                tuned_parameter: Some((family.name().to_string(), t)),
                residual,
                kind,
                multiplicity: 1,
                degenerate,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceOptions {
    pub tol: f64,
    /// A root with `|Im k|` (or `|Re k|`) below `axis_tol · max(|k|, 1)` lies on that axis.
    pub axis_tol: f64,
    pub contour: ContourOptions,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            axis_tol: 1e-8,
            contour: ContourOptions::default(),
        }
    }
}

/// Sorts a complex zero of `M22` into its physical class.
///
/// A zero on the negative real axis is a CPA point at `|k|`, since
/// `M22(-k) = M11(k)`; the report then carries the positive wavenumber.
pub fn classify(k: Complex64, axis_tol: f64) -> (SingularityKind, Complex64) {
    let scale = k.norm().max(1.0);
    if k.im.abs() <= axis_tol * scale {
        let kr = Complex64::new(k.re, 0.0);
        if k.re > 0.0 {
            (SingularityKind::LasingSs, kr)
        } else {
            (SingularityKind::Cpa, -kr)
        }
    } else if k.re.abs() <= axis_tol * scale {
        let ki = Complex64::new(0.0, k.im);
        if k.im > 0.0 {
            (SingularityKind::BoundState, ki)
        } else {
            (SingularityKind::VirtualState, ki)
        }
    } else if k.im < 0.0 {
        (SingularityKind::Resonance, k)
    } else {
        // upper half-plane off the axis: a normalizable state with complex energy
        (SingularityKind::BoundState, k)
    }
}

/// Complex zeros of `M22` inside `rect`, classified by position.
pub fn find_resonances(p: &impl Scatterer, rect: &Rect, opts: &ResonanceOptions) -> Result<Vec<SingularityReport>> {
    if rect.contains_origin() {
        return Err(Error::WavenumberAtOrigin(Complex64::new(0.0, 0.0)));
    }
    let f = |k: Complex64| -> Result<Complex64> { Ok(p.transfer_matrix_at(k)?.m22) };
    let mut copts = opts.contour;
    copts.newton.tol = copts.newton.tol.min(opts.tol);
    let zeros = find_zeros(&f, rect, &copts)?;
    let mut out = Vec::with_capacity(zeros.len());
    for z in zeros {
        let (kind, k_star) = classify(z.z, opts.axis_tol);
        let residual = if kind == SingularityKind::Cpa {
            p.transfer_matrix_at(k_star)?.m11.norm()
        } else {
            p.transfer_matrix_at(k_star)?.m22.norm()
        };
        out.push(SingularityReport {
            k_star,
            tuned_parameter: None,
            residual,
            kind,
            multiplicity: z.multiplicity,
            degenerate: false,
        });
    }
    Ok(out)
}
