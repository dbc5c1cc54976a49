//! Finite-dimensional pseudo-Hermitian linear algebra.
//!
//! For a diagonalizable `H` with eigenvectors `ψ_n`, the vectors
//! `φ_n` with `⟨ψ_m|φ_n⟩ = δ_mn` are eigenvectors of `H†`; the metric
//! `η₊ = Σ |φ_n⟩⟨φ_n|` then satisfies `H†η₊ = η₊H` whenever the spectrum is
//! real, and `ρ = √η₊` maps `H` to the Hermitian `ρHρ⁻¹`. The metric is
//! only fixed up to the normalization of each `ψ_n`; see
//! [`BiorthSystem::rescale`].

use std::path::Path;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigenvector matrices with condition number above this are treated as defective.
pub const DEFECTIVE_CONDITION: f64 = 1e10;
/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-8;

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn condition_number(m: &CMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn check_square(h: &CMatrix) -> Result<usize> {
    if h.nrows() != h.ncols() || h.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "expected a non-empty square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if h.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok(h.nrows())
}

/// Eigenvalues from the complex Schur form, sorted by real then imaginary part.
pub fn eigenvalues(h: &CMatrix) -> Result<Vec<Complex64>> {
    check_square(h)?;
    let schur = Schur::try_new(h.clone(), f64::EPSILON, 10_000).ok_or(Error::NoConvergence {
        iterations: 10_000,
        residual: f64::NAN,
    })?;
    let (_, t) = schur.unpack();
    let mut ev: Vec<Complex64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    sort_complex(&mut ev);
    Ok(ev)
}

fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Groups sorted eigenvalues closer than `tol` (single linkage); returns (mean, count).
fn clusters(ev: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let n = ev.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(l: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while l[r] != r {
            r = l[r];
        }
        l[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (ev[i] - ev[j]).norm() <= tol {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut out: Vec<(usize, Complex64, usize)> = Vec::new();
    for (i, &e) in ev.iter().enumerate().take(n) {
        let r = root(&mut label, i);
        match out.iter_mut().find(|c| c.0 == r) {
            Some(c) => {
                c.1 += e;
                c.2 += 1;
            }
            None => out.push((r, e, 1)),
        }
    }
    out.into_iter().map(|(_, s, c)| (s / c as f64, c)).collect()
}

/// Orthonormal basis of the numerical null space of `a`, with its dimension
/// counted at singular-value threshold `thr`.
fn null_space(a: &CMatrix, thr: f64) -> (usize, Vec<CVector>) {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    // singular values come sorted in decreasing order
    let dim = svd.singular_values.iter().filter(|&&s| s <= thr).count();
    let basis = (0..n).rev().map(|i| v_t.row(i).adjoint()).collect();
    (dim, basis)
}

/// Rotates `v` so its first significant component is real and positive.
fn fix_phase(v: &mut CVector) {
    let big = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8 * big).copied() {
        let p = z.conj() / z.norm();
        *v *= p;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiorthSystem {
    eigenvalues: Vec<Complex64>,
    /// Columns are `ψ_n`.
    right: CMatrix,
    /// Columns are `φ_n`.
    left: CMatrix,
}

impl BiorthSystem {
    /// Builds the system from given right eigenvectors (columns of `psi`);
    /// the `φ_n` are the columns of `(Ψ⁻¹)†`.
    pub fn from_right_eigenvectors(eigenvalues: Vec<Complex64>, psi: CMatrix) -> Result<Self> {
        let n = check_square(&psi)?;
        if eigenvalues.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues for {n} eigenvectors",
                eigenvalues.len()
            )));
        }
        let condition = condition_number(&psi);
        if !(condition <= DEFECTIVE_CONDITION) {
            return Err(Error::Defective { condition });
        }
        let inv = psi.clone().try_inverse().ok_or(Error::Defective { condition })?;
        Ok(Self {
            eigenvalues,
            right: psi,
            left: inv.adjoint(),
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn right(&self) -> &CMatrix {
        &self.right
    }

    pub fn left(&self) -> &CMatrix {
        &self.left
    }

    pub fn psi(&self, n: usize) -> CVector {
        self.right.column(n).into_owned()
    }

    pub fn phi(&self, n: usize) -> CVector {
        self.left.column(n).into_owned()
    }

    /// `ψ_n → N_n ψ_n`, `φ_n → φ_n / N_n*`; biorthonormality is preserved.
    pub fn rescale(&self, factors: &[Complex64]) -> Result<Self> {
        if factors.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} factors for {} eigenvectors",
                factors.len(),
                self.dim()
            )));
        }
        if factors.iter().any(|f| f.norm() == 0.0) {
            return Err(Error::InvalidArgument("normalization factors must be nonzero".into()));
        }
        let mut out = self.clone();
        for (j, f) in factors.iter().enumerate() {
            out.right.column_mut(j).scale_mut_c(*f);
            out.left.column_mut(j).scale_mut_c(ONE / f.conj());
        }
        Ok(out)
    }

    /// `max |⟨ψ_m|φ_n⟩ - δ_mn|`.
    pub fn biorthonormality_defect(&self) -> f64 {
        let g = self.right.adjoint() * &self.left;
        (g - CMatrix::identity(self.dim(), self.dim())).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |Σ ψ_n φ_n† - I|`.
    pub fn completeness_defect(&self) -> f64 {
        let g = &self.right * self.left.adjoint();
        (g - CMatrix::identity(self.dim(), self.dim())).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

trait ScaleC {
    fn scale_mut_c(&mut self, f: Complex64);
}

impl<S: nalgebra::StorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>> ScaleC for nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S> {
    fn scale_mut_c(&mut self, f: Complex64) {
        for z in self.iter_mut() {
            *z *= f;
        }
    }
}

/// Biorthonormal eigensystem of `h`. Eigenvalues closer than `tol` form one
/// cluster whose eigenvectors span the numerical null space of `h - λI`;
/// the right eigenvectors have unit norm.
pub fn biorth(h: &CMatrix, tol: f64) -> Result<BiorthSystem> {
    let n = check_square(h)?;
    let ev = eigenvalues(h)?;
    let scale = op_norm(h).max(f64::MIN_POSITIVE);
    let thr = RANK_TOL * scale;
    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<CVector> = Vec::with_capacity(n);
    for (lambda, mult) in clusters(&ev, tol) {
        let shifted = h - CMatrix::identity(n, n) * lambda;
        let (dim, basis) = null_space(&shifted, thr);
        if dim < mult {
            return Err(Error::Defective { condition: f64::INFINITY });
        }
        for mut v in basis.into_iter().take(mult) {
            fix_phase(&mut v);
            values.push(lambda);
            vectors.push(v);
        }
    }
    let psi = CMatrix::from_columns(&vectors);
    BiorthSystem::from_right_eigenvectors(values, psi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricOperator {
    pub eta: CMatrix,
    /// Positive square root of `eta`.
    pub rho: CMatrix,
    /// Eigenvalues of `eta`, ascending.
    pub eta_eigenvalues: Vec<f64>,
}

impl MetricOperator {
    /// `‖η₊‖·‖η₊⁻¹‖`.
    pub fn condition(&self) -> f64 {
        let lo = self.eta_eigenvalues[0];
        let hi = *self.eta_eigenvalues.last().unwrap();
        hi / lo
    }

    /// Metric from a given positive Hermitian matrix.
    pub fn from_matrix(eta: CMatrix) -> Result<Self> {
        let n = check_square(&eta)?;
        let herm = (&eta + eta.adjoint()) * Complex64::new(0.5, 0.0);
        let es = SymmetricEigen::new(herm);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| es.eigenvalues[a].total_cmp(&es.eigenvalues[b]));
        let vals: Vec<f64> = order.iter().map(|&i| es.eigenvalues[i]).collect();
        if !(vals[0] > 0.0) {
            return Err(Error::NotPositive { min_eigenvalue: vals[0] });
        }
        let v = &es.eigenvectors;
        let sqrt_d = CMatrix::from_diagonal(&DVector::from_iterator(
            n,
            es.eigenvalues.iter().map(|&d| Complex64::new(d.sqrt(), 0.0)),
        ));
        let rho = v * sqrt_d * v.adjoint();
        Ok(Self {
            eta,
            rho,
            eta_eigenvalues: vals,
        })
    }

    /// `ρ⁻¹` from the spectral decomposition.
    pub fn rho_inverse(&self) -> CMatrix {
        let n = self.eta.nrows();
        let herm = (&self.eta + self.eta.adjoint()) * Complex64::new(0.5, 0.0);
        let es = SymmetricEigen::new(herm);
        let d = CMatrix::from_diagonal(&DVector::from_iterator(
            n,
            es.eigenvalues.iter().map(|&d| Complex64::new(1.0 / d.sqrt(), 0.0)),
        ));
        &es.eigenvectors * d * es.eigenvectors.adjoint()
    }
}

/// `η₊ = Σ |φ_n⟩⟨φ_n|` of a system with real spectrum.
pub fn metric(sys: &BiorthSystem, tol: f64) -> Result<MetricOperator> {
    if let Some(e) = sys.eigenvalues().iter().find(|e| e.im.abs() > tol) {
        return Err(Error::ComplexSpectrum { eigenvalue: *e });
    }
    let eta = sys.left() * sys.left().adjoint();
    MetricOperator::from_matrix(eta)
}

/// `‖H†η₊ - η₊H‖₂`.
pub fn intertwine_residual(h: &CMatrix, mo: &MetricOperator) -> Result<f64> {
    if h.shape() != mo.eta.shape() {
        return Err(Error::DimensionMismatch(format!(
            "H is {:?}, metric is {:?}",
            h.shape(),
            mo.eta.shape()
        )));
    }
    Ok(op_norm(&(h.adjoint() * &mo.eta - &mo.eta * h)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hermitized {
    /// `ρHρ⁻¹`.
    pub h: CMatrix,
    /// `‖h - h†‖₂`.
    pub hermiticity_defect: f64,
    /// Condition number of `ρ`.
    pub condition: f64,
    /// Set when `condition` exceeds the caller's threshold; `h` is then unreliable.
    pub ill_conditioned: bool,
}

/// Default condition-number threshold of `ρ` above which [`hermitize`] flags its result.
pub const RHO_CONDITION_LIMIT: f64 = 1e6;

pub fn hermitize(h: &CMatrix, mo: &MetricOperator, condition_limit: f64) -> Result<Hermitized> {
    if h.shape() != mo.eta.shape() {
        return Err(Error::DimensionMismatch(format!(
            "H is {:?}, metric is {:?}",
            h.shape(),
            mo.eta.shape()
        )));
    }
    let out = &mo.rho * h * mo.rho_inverse();
    let condition = mo.condition().sqrt();
    Ok(Hermitized {
        hermiticity_defect: op_norm(&(&out - out.adjoint())),
        h: out,
        condition,
        ill_conditioned: !(condition <= condition_limit),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceptionalPoint {
    pub t: f64,
    /// Sum over eigenvalue clusters of algebraic minus geometric multiplicity.
    pub defect: usize,
    /// Smallest eigenvalue separation at `t`.
    pub separation: f64,
    pub eigenvalue: Complex64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExceptionalScan {
    pub exceptional: Vec<ExceptionalPoint>,
    /// Parameter values where eigenvalues coincide but `H` stays diagonalizable.
    pub degeneracies: Vec<ExceptionalPoint>,
}

fn min_separation(ev: &[Complex64]) -> (f64, Complex64) {
    let mut best = (f64::INFINITY, ZERO);
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            let d = (ev[i] - ev[j]).norm();
            if d < best.0 {
                best = (d, 0.5 * (ev[i] + ev[j]));
            }
        }
    }
    best
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// Exceptional points of `H(t)` along `t_grid`: local minima of the
/// smallest eigenvalue separation are refined by golden-section search, and
/// where eigenvalues coincide within `tol` the geometric multiplicity decides
/// between an exceptional point and a plain degeneracy.
pub fn exceptional_scan<F>(family: F, t_grid: &[f64], tol: f64) -> Result<ExceptionalScan>
where
    F: Fn(f64) -> CMatrix + Sync,
{
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("parameter grid must have at least two increasing points".into()));
    }
    let sep = |t: f64| -> Result<(f64, Complex64)> { Ok(min_separation(&eigenvalues(&family(t))?)) };
    let seps: Vec<f64> = t_grid.par_iter().map(|&t| sep(t).map(|s| s.0)).collect::<Result<_>>()?;

    let n = t_grid.len();
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let left = if i > 0 { seps[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < n { seps[i + 1] } else { f64::INFINITY };
        if seps[i] <= left && seps[i] <= right && seps[i].is_finite() {
            brackets.push((t_grid[i.saturating_sub(1)], t_grid[(i + 1).min(n - 1)]));
        }
    }
    // a dip hidden inside one cell
    let mids: Vec<(usize, f64)> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let m = 0.5 * (t_grid[i] + t_grid[i + 1]);
            sep(m).map(|s| (i, s.0))
        })
        .collect::<Result<_>>()?;
    for (i, s) in mids {
        if s < seps[i] && s < seps[i + 1] {
            brackets.push((t_grid[i], t_grid[i + 1]));
        }
    }

    let refined: Vec<Option<ExceptionalPoint>> = brackets
        .par_iter()
        .map(|&(a, b)| {
            let t = golden_min(|t| sep(t).map(|s| s.0).unwrap_or(f64::INFINITY), a, b);
            // prefer an exact grid point when it is at least as good
            let t = [a, b, t]
                .into_iter()
                .min_by(|x, y| {
                    let sx = sep(*x).map(|s| s.0).unwrap_or(f64::INFINITY);
                    let sy = sep(*y).map(|s| s.0).unwrap_or(f64::INFINITY);
                    sx.total_cmp(&sy)
                })
                .unwrap();
            let h = family(t);
            let ev = eigenvalues(&h)?;
            let (s, centre) = min_separation(&ev);
            if !(s < tol) {
                return Ok(None);
            }
            let dim = h.nrows();
            let thr = (RANK_TOL * op_norm(&h)).max(10.0 * s);
            let mut defect = 0;
            for (lambda, mult) in clusters(&ev, tol.max(2.0 * s)) {
                if mult > 1 {
                    let (geo, _) = null_space(&(&h - CMatrix::identity(dim, dim) * lambda), thr);
                    defect += mult.saturating_sub(geo);
                }
            }
            Ok(Some(ExceptionalPoint {
                t,
                defect,
                separation: s,
                eigenvalue: centre,
            }))
        })
        .collect::<Result<_>>()?;

    let mut points: Vec<ExceptionalPoint> = refined.into_iter().flatten().collect();
    points.sort_by(|a, b| a.t.total_cmp(&b.t));
    let spacing = t_grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    points.dedup_by(|b, a| (b.t - a.t).abs() < 0.5 * spacing);

    let mut out = ExceptionalScan::default();
    for p in points {
        if p.defect > 0 {
            out.exceptional.push(p);
        } else {
            out.degeneracies.push(p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntilinearVerdict {
    /// `‖UH* - HU‖₂`, zero when `X = U∘K` commutes with `H`.
    pub commutator_residual: f64,
    pub symmetric: bool,
    /// Every eigenvector can be chosen `X`-invariant.
    pub exact: bool,
    pub eigenvalues: Vec<Complex64>,
    /// Columns are `X`-invariant eigenvectors when `exact`, otherwise empty.
    pub invariant_eigenvectors: Option<CMatrix>,
    pub max_imag: f64,
}

fn apply_x(u: &CMatrix, v: &CVector) -> CVector {
    u * v.map(|z| z.conj())
}

/// Tests `H` for the antilinear symmetry `X = U∘K` (`K` = complex conjugation)
/// and whether it is exact.
pub fn antilinear_check(h: &CMatrix, u: &CMatrix, tol: f64) -> Result<AntilinearVerdict> {
    let n = check_square(h)?;
    if u.shape() != h.shape() {
        return Err(Error::DimensionMismatch(format!("U is {:?}, H is {:?}", u.shape(), h.shape())));
    }
    let involution = op_norm(&(u * u.map(|z| z.conj()) - CMatrix::identity(n, n)));
    if involution > tol {
        return Err(Error::NotInvolution { residual: involution });
    }
    let commutator_residual = op_norm(&(u * h.map(|z| z.conj()) - h * u));
    let symmetric = commutator_residual <= tol * op_norm(h).max(1.0);
    let ev = eigenvalues(h)?;
    let max_imag = ev.iter().map(|e| e.im.abs()).fold(0.0, f64::max);

    let mut invariant = None;
    if symmetric {
        if let Ok(sys) = biorth(h, tol) {
            invariant = invariant_basis(&sys, u, tol);
        }
    }
    Ok(AntilinearVerdict {
        commutator_residual,
        symmetric,
        exact: invariant.is_some(),
        eigenvalues: ev,
        invariant_eigenvectors: invariant,
        max_imag,
    })
}

/// `X`-invariant eigenvectors, one eigenvalue cluster at a time; `None` if
/// some eigenspace has no invariant basis.
fn invariant_basis(sys: &BiorthSystem, u: &CMatrix, tol: f64) -> Option<CMatrix> {
    let n = sys.dim();
    let ev = sys.eigenvalues();
    let mut cols: Vec<CVector> = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && (ev[j] - ev[i]).norm() <= tol {
            j += 1;
        }
        let space: Vec<CVector> = (i..j).map(|c| sys.psi(c)).collect();
        if space.len() == 1 {
            let v = &space[0];
            let xv = apply_x(u, v);
            // Xψ = εψ with |ε| = 1; then e^{iα/2}ψ is invariant for ε = e^{iα}
            let eps = v.dotc(&xv) / v.dotc(v);
            if (&xv - v * eps).norm() > tol * v.norm() {
                return None;
            }
            let mut w = v * Complex64::from_polar(1.0, 0.5 * eps.arg());
            w /= Complex64::new(w.norm(), 0.0);
            cols.push(w);
        } else {
            let mut basis: Vec<CVector> = Vec::new();
            for v in &space {
                let xv = apply_x(u, v);
                for cand in [v + &xv, (v - &xv) * Complex64::new(0.0, 1.0)] {
                    let mut w = cand;
                    for b in &basis {
                        let p = b.dotc(&w);
                        w -= b * p;
                    }
                    // Gram-Schmidt with real coefficients keeps X-invariance
                    let nw = w.norm();
                    if nw > 1e-6 {
                        basis.push(w / Complex64::new(nw, 0.0));
                    }
                }
            }
            if basis.len() < space.len() {
                return None;
            }
            for b in basis.into_iter().take(space.len()) {
                if (apply_x(u, &b) - &b).norm() > tol.sqrt() {
                    return None;
                }
                cols.push(b);
            }
        }
        i = j;
    }
    Some(CMatrix::from_columns(&cols))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityDemo {
    /// `⟨φ, Xψ⟩_η - ⟨Xφ, ψ⟩_η` on the grid.
    pub lhs: Complex64,
    /// `2 sinh κ ∫ x φ(x)* ψ(-x) dx` on the grid.
    pub rhs: Complex64,
    /// Extreme eigenvalues of `η₊ = cosh κ I - sinh κ P`.
    pub eta_min: f64,
    pub eta_max: f64,
}

/// Parity metric `η₊ = cosh κ I - sinh κ P` on a grid symmetric about the
/// origin, with trapezoidal weights; compares both sides of the position
/// operator's non-Hermiticity identity.
pub fn parity_metric_demo(kappa: f64, grid: &[f64], phi: &[Complex64], psi: &[Complex64]) -> Result<ParityDemo> {
    let n = grid.len();
    if n < 2 || phi.len() != n || psi.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "grid has {n} points, functions have {} and {}",
            phi.len(),
            psi.len()
        )));
    }
    let scale = grid.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if (0..n).any(|j| (grid[j] + grid[n - 1 - j]).abs() > 1e-12 * scale) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::AsymmetricGrid);
    }
    let w: Vec<f64> = (0..n)
        .map(|j| {
            let lo = if j > 0 { grid[j - 1] } else { grid[j] };
            let hi = if j + 1 < n { grid[j + 1] } else { grid[j] };
            0.5 * (hi - lo)
        })
        .collect();
    let (ch, sh) = (kappa.cosh(), kappa.sinh());
    let eta_apply = |f: &[Complex64]| -> Vec<Complex64> { (0..n).map(|j| f[j] * ch - f[n - 1 - j] * sh).collect() };
    let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        let eb = eta_apply(b);
        (0..n).map(|j| a[j].conj() * eb[j] * w[j]).sum()
    };
    let x_psi: Vec<Complex64> = (0..n).map(|j| psi[j] * grid[j]).collect();
    let x_phi: Vec<Complex64> = (0..n).map(|j| phi[j] * grid[j]).collect();
    let lhs = inner(phi, &x_psi) - inner(&x_phi, psi);
    let rhs: Complex64 = (0..n).map(|j| phi[j].conj() * psi[n - 1 - j] * grid[j] * w[j]).sum::<Complex64>() * (2.0 * sh);

    // P has eigenvalues ±1 (−1 only when n ≥ 2), so η₊ has cosh κ ∓ sinh κ
    let eta = DMatrix::from_fn(n, n, |i, j| {
        let mut v = 0.0;
        if i == j {
            v += ch;
        }
        if i + j == n - 1 {
            v -= sh;
        }
        v
    });
    let vals = SymmetricEigen::new(eta).eigenvalues;
    Ok(ParityDemo {
        lhs,
        rhs,
        eta_min: vals.min(),
        eta_max: vals.max(),
    })
}

/// Matrix polynomial `H(t) = Σ t^j M_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFamily {
    pub terms: Vec<CMatrix>,
}

impl MatrixFamily {
    pub fn new(terms: Vec<CMatrix>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("matrix family needs at least one term".into()))?;
        check_square(first)?;
        if terms.iter().any(|m| m.shape() != first.shape()) {
            return Err(Error::DimensionMismatch("family terms differ in shape".into()));
        }
        Ok(Self { terms })
    }

    pub fn dim(&self) -> usize {
        self.terms[0].nrows()
    }

    pub fn at(&self, t: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        let mut p = 1.0;
        for m in &self.terms {
            out += m * Complex64::new(p, 0.0);
            p *= t;
        }
        out
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn matrix_from_json(v: &serde_json::Value) -> std::result::Result<CMatrix, String> {
    let rows = v.as_array().ok_or("matrix must be an array of rows")?;
    let mut data: Vec<Vec<Complex64>> = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| format!("row {i} is not an array"))?;
        let mut out = Vec::with_capacity(row.len());
        for (j, e) in row.iter().enumerate() {
            let pair = e.as_array().filter(|p| p.len() == 2).ok_or_else(|| format!("entry ({i},{j}) is not a [re, im] pair"))?;
            let re = pair[0].as_f64().ok_or_else(|| format!("entry ({i},{j}) has a non-numeric real part"))?;
            let im = pair[1].as_f64().ok_or_else(|| format!("entry ({i},{j}) has a non-numeric imaginary part"))?;
            out.push(Complex64::new(re, im));
        }
        data.push(out);
    }
    let n = data.len();
    if n == 0 || data.iter().any(|r| r.len() != n) {
        return Err("matrix must be square and non-empty".into());
    }
    Ok(CMatrix::from_fn(n, n, |i, j| data[i][j]))
}

/// JSON form: rows of `[re, im]` pairs.
pub fn matrix_to_json(m: &CMatrix) -> serde_json::Value {
    serde_json::Value::Array(
        (0..m.nrows())
            .map(|i| {
                serde_json::Value::Array(
                    (0..m.ncols())
                        .map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im]))
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Reads a single matrix or a polynomial family.
///
/// JSON input is either a matrix (rows of `[re, im]` pairs) or
/// `{"terms": [M0, M1, ...]}`. Text input has one row per line as
/// `re im re im ...`, `#` comments, and `---` between polynomial terms.
pub fn parse_matrix_family(text: &str) -> Result<MatrixFamily> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))?;
        let terms = match &v {
            serde_json::Value::Object(o) => {
                let t = o.get("terms").and_then(|t| t.as_array()).ok_or_else(|| parse_err(1, "object input needs a \"terms\" array"))?;
                t.iter()
                    .enumerate()
                    .map(|(j, m)| matrix_from_json(m).map_err(|e| parse_err(1, format!("term {j}: {e}"))))
                    .collect::<Result<Vec<_>>>()?
            }
            other => vec![matrix_from_json(other).map_err(|e| parse_err(1, e))?],
        };
        return MatrixFamily::new(terms).map_err(|e| parse_err(1, e.to_string()));
    }

    let mut terms = Vec::new();
    let mut rows: Vec<(usize, Vec<Complex64>)> = Vec::new();
    let finish = |rows: &mut Vec<(usize, Vec<Complex64>)>, terms: &mut Vec<CMatrix>, line: usize| -> Result<()> {
        if rows.is_empty() {
            return Err(parse_err(line, "empty matrix block"));
        }
        let n = rows.len();
        if let Some((l, r)) = rows.iter().find(|(_, r)| r.len() != n) {
            return Err(parse_err(*l, format!("row has {} entries, expected {n} for a square matrix", r.len())));
        }
        terms.push(CMatrix::from_fn(n, n, |i, j| rows[i].1[j]));
        rows.clear();
        Ok(())
    };
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content == "---" {
            finish(&mut rows, &mut terms, line)?;
            continue;
        }
        let nums = content
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(line, format!("cannot parse {t:?} as a number"))))
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() % 2 != 0 {
            return Err(parse_err(line, "rows hold re/im pairs; found an odd count"));
        }
        rows.push((line, nums.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()));
    }
    finish(&mut rows, &mut terms, last_line.max(1))?;
    MatrixFamily::new(terms).map_err(|e| parse_err(1, e.to_string()))
}

pub fn load_matrix_family(path: impl AsRef<Path>) -> Result<MatrixFamily> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(0, format!("cannot read {}: {e}", path.display())))?;
    parse_matrix_family(&text)
}

/// Text form: one row per line, `re im` pairs.
pub fn format_matrix_text(m: &CMatrix) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?} {:?}", m[(i, j)].re, m[(i, j)].im)).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real(rows: &[&[f64]]) -> CMatrix {
        let n = rows.len();
        CMatrix::from_fn(n, n, |i, j| c(rows[i][j], 0.0))
    }

    fn two_level(x: f64) -> CMatrix {
        real(&[&[0.0, 1.0], &[x * x, 0.0]])
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_gives_standard_basis() {
        let sys = biorth(&real(&[&[1.0, 0.0], &[0.0, 2.0]]), 1e-10).unwrap();
        assert_eq!(sys.eigenvalues(), &[c(1.0, 0.0), c(2.0, 0.0)]);
        assert!(max_abs(&(sys.right() - CMatrix::identity(2, 2))) < 1e-14);
        assert!(max_abs(&(sys.left() - CMatrix::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn two_level_default_normalization() {
        let sys = biorth(&two_level(2.0), 1e-10).unwrap();
        assert!((sys.eigenvalues()[0] - c(-2.0, 0.0)).norm() < 1e-12);
        assert!((sys.eigenvalues()[1] - c(2.0, 0.0)).norm() < 1e-12);
        assert!(sys.biorthonormality_defect() < 1e-12);
        assert!(sys.completeness_defect() < 1e-12);
        // unit-norm ψ correspond to |N_n|² = 2/5, hence a₊ = 5/2 and a₋ = 0
        let mo = metric(&sys, 1e-10).unwrap();
        let expected = real(&[&[2.5, 0.0], &[0.0, 2.5 / 4.0]]);
        assert!(max_abs(&(&mo.eta - expected)) < 1e-12);
    }

    #[test]
    fn defective_at_origin() {
        assert!(matches!(biorth(&two_level(0.0), 1e-10), Err(Error::Defective { .. })));
    }

    #[test]
    fn rescale_preserves_biorthonormality() {
        let sys = biorth(&two_level(2.0), 1e-10).unwrap();
        let r = sys.rescale(&[c(0.3, 2.0), c(-1.0, 0.5)]).unwrap();
        assert!(r.biorthonormality_defect() < 1e-12);
        assert!(sys.rescale(&[c(0.0, 0.0), ONE]).is_err());
    }

    #[test]
    fn hermitian_metric_is_identity() {
        let h = CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                c(i as f64, 0.0)
            } else if i < j {
                c(0.5, 0.2 * (i + j) as f64)
            } else {
                c(0.5, -0.2 * (i + j) as f64)
            }
        });
        let mo = metric(&biorth(&h, 1e-10).unwrap(), 1e-10).unwrap();
        assert!(max_abs(&(&mo.eta - CMatrix::identity(3, 3))) < 1e-10);
        let herm = hermitize(&h, &mo, RHO_CONDITION_LIMIT).unwrap();
        assert!(max_abs(&(&herm.h - &h)) < 1e-10);
    }

    #[test]
    fn intertwining_with_identity_metric() {
        let mo = MetricOperator::from_matrix(CMatrix::identity(2, 2)).unwrap();
        let r = intertwine_residual(&two_level(2.0), &mo).unwrap();
        // H† - H = [[0, 3], [-3, 0]]
        assert!((r - 3.0).abs() < 1e-12);
        let h = real(&[&[1.0, 2.0], &[2.0, -1.0]]);
        assert!(intertwine_residual(&h, &mo).unwrap() < 1e-15);
    }

    #[test]
    fn metric_rejects_complex_spectrum() {
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 2.0), ONE, ONE, c(0.0, -2.0)]);
        let sys = biorth(&h, 1e-10).unwrap();
        assert!(matches!(metric(&sys, 1e-10), Err(Error::ComplexSpectrum { .. })));
    }

    #[test]
    fn metric_conditioning_blows_up_near_origin() {
        let conds: Vec<f64> = [1.0, 0.1, 0.01, 0.001]
            .iter()
            .map(|&x| metric(&biorth(&two_level(x), 1e-12).unwrap(), 1e-10).unwrap().condition())
            .collect();
        assert!(conds.windows(2).all(|w| w[1] > 10.0 * w[0]));
        let mo = metric(&biorth(&two_level(1e-7), 1e-12).unwrap(), 1e-10).unwrap();
        assert!(hermitize(&two_level(1e-7), &mo, RHO_CONDITION_LIMIT).unwrap().ill_conditioned);
    }

    #[test]
    fn ep_of_two_level_family() {
        let grid: Vec<f64> = (0..41).map(|i| -1.0 + 0.05 * i as f64 + 0.003).collect();
        let scan = exceptional_scan(two_level, &grid, 1e-6).unwrap();
        assert_eq!(scan.exceptional.len(), 1);
        assert!(scan.exceptional[0].t.abs() < 0.05);
        assert_eq!(scan.exceptional[0].defect, 1);
        assert!(scan.degeneracies.is_empty());
    }

    #[test]
    fn crossing_is_a_degeneracy_not_an_ep() {
        let grid: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        let scan = exceptional_scan(|t| real(&[&[t, 0.0], &[0.0, -t]]), &grid, 1e-6).unwrap();
        assert!(scan.exceptional.is_empty());
        assert_eq!(scan.degeneracies.len(), 1);
        assert!(scan.degeneracies[0].t.abs() < 1e-12);
    }

    #[test]
    fn hermitian_family_has_no_ep() {
        let grid: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        let scan = exceptional_scan(|t| real(&[&[t, 0.3], &[0.3, -t]]), &grid, 1e-6).unwrap();
        assert!(scan.exceptional.is_empty() && scan.degeneracies.is_empty());
    }

    #[test]
    fn antilinear_plain_conjugation() {
        let v = antilinear_check(&real(&[&[1.0, 2.0], &[2.0, 3.0]]), &CMatrix::identity(2, 2), 1e-9).unwrap();
        assert!(v.symmetric && v.exact && v.max_imag < 1e-12);
        let v = antilinear_check(&two_level(2.0), &CMatrix::identity(2, 2), 1e-9).unwrap();
        assert!(v.exact);
        assert!((v.eigenvalues[0] - c(-2.0, 0.0)).norm() < 1e-12);
        let x = v.invariant_eigenvectors.unwrap();
        for j in 0..2 {
            let col = x.column(j).into_owned();
            assert!((col.map(|z| z.conj()) - &col).norm() < 1e-9);
        }
    }

    #[test]
    fn antilinear_broken_symmetry() {
        let sigma1 = real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 2.0), ONE, ONE, c(0.0, -2.0)]);
        let v = antilinear_check(&h, &sigma1, 1e-9).unwrap();
        assert!(v.symmetric && !v.exact);
        assert!(v.max_imag > 1.0);
        // with coupling above the gain/loss contrast the symmetry is exact
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.5), ONE, ONE, c(0.0, -0.5)]);
        let v = antilinear_check(&h, &sigma1, 1e-9).unwrap();
        assert!(v.symmetric && v.exact && v.max_imag < 1e-9);
    }

    #[test]
    fn antilinear_non_symmetric_and_bad_u() {
        let sigma1 = real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), ONE, ONE, c(0.0, 1.0)]);
        let v = antilinear_check(&h, &sigma1, 1e-9).unwrap();
        assert!(!v.symmetric && !v.exact);
        let u = CMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), ZERO, ZERO, ONE]);
        assert!(matches!(antilinear_check(&h, &(u * Complex64::new(2.0, 0.0)), 1e-9), Err(Error::NotInvolution { .. })));
    }

    #[test]
    fn antilinear_degenerate_eigenspace() {
        let v = antilinear_check(&CMatrix::identity(3, 3), &CMatrix::identity(3, 3), 1e-9).unwrap();
        assert!(v.exact);
        assert_eq!(v.invariant_eigenvectors.unwrap().ncols(), 3);
    }

    #[test]
    fn parity_demo_identity() {
        let grid: Vec<f64> = (0..201).map(|i| -5.0 + 0.05 * i as f64).collect();
        let phi: Vec<Complex64> = grid.iter().map(|x| c((-x * x).exp(), 0.0)).collect();
        let psi: Vec<Complex64> = grid.iter().map(|x| c(x * (-x * x).exp(), 0.0)).collect();
        let d = parity_metric_demo(0.0, &grid, &phi, &psi).unwrap();
        assert!(d.lhs.norm() < 1e-15);
        let kappa = 0.7;
        let d = parity_metric_demo(kappa, &grid, &phi, &psi).unwrap();
        assert!((d.lhs - d.rhs).norm() < 1e-13);
        let exact = 2.0 * kappa.sinh() * (-0.25 * (std::f64::consts::PI / 2.0).sqrt());
        assert!((d.lhs.re - exact).abs() < 1e-6);
        assert!((d.eta_min - (-kappa).exp()).abs() < 1e-12);
        assert!((d.eta_max - kappa.exp()).abs() < 1e-12);
        let bad: Vec<f64> = (0..5).map(|i| i as f64).collect();
        assert_eq!(parity_metric_demo(1.0, &bad, &phi[..5], &psi[..5]), Err(Error::AsymmetricGrid));
    }

    #[test]
    fn matrix_io_round_trip() {
        let h = CMatrix::from_row_slice(2, 2, &[c(0.1, -2.0), ONE, c(4.0, 0.0), c(0.0, 1e-3)]);
        let json = matrix_to_json(&h).to_string();
        assert_eq!(parse_matrix_family(&json).unwrap().terms, vec![h.clone()]);
        let text = format_matrix_text(&h);
        assert_eq!(parse_matrix_family(&text).unwrap().terms, vec![h.clone()]);

        let fam = parse_matrix_family("0 0 1 0\n0 0 0 0\n---\n0 0 0 0\n0 0 0 0\n---\n0 0 0 0\n1 0 0 0\n").unwrap();
        assert_eq!(fam.at(2.0), two_level(2.0));
        let fam = parse_matrix_family(r#"{"terms": [[[[0,0],[1,0]],[[0,0],[0,0]]], [[[0,0],[0,0]],[[0,0],[0,0]]], [[[0,0],[0,0]],[[1,0],[0,0]]]]}"#).unwrap();
        assert_eq!(fam.at(3.0), two_level(3.0));
    }

    #[test]
    fn matrix_parse_errors() {
        assert!(matches!(parse_matrix_family("0 0 1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_matrix_family("# c\n0 0 1 0\n0 0\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_matrix_family("0 x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_matrix_family("[[[0, 0]], [1]]"), Err(Error::Parse { .. })));
    }
}
