//! Transfer matrices, scattering amplitudes and Jost solutions.
//!
//! Every solution of `ψ'' = (v(x) - k²)ψ` behaves as `A± e^{ikx} + B± e^{-ikx}`
//! to the right (+) and left (-) of the support of `v`. The transfer matrix
//! maps `(A-, B-)` to `(A+, B+)`. It is assembled by propagating the state
//! `(ψ, ψ')` across the support:
//!
//! * constant layers use the exact propagator
//!   `[[cos wℓ, sin(wℓ)/w], [-w sin wℓ, cos wℓ]]` with `w² = k² - v`, which is
//!   even in `w` so no square-root branch has to be chosen;
//! * a delta `z δ(x - x₀)` keeps `ψ` continuous and kicks `ψ'` by `z ψ(x₀)`;
//! * sampled profiles are integrated with fixed-step RK4 on the
//!   linearly-interpolated samples.
//!
//! The wavenumber may be complex; this is how `spectral` continues `M22`
//! into the complex plane.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potentials::{Medium, Potential, SampledGrid, Structure};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default bound on `|det M - 1|`.
pub const DET_TOLERANCE: f64 = 1e-9;

/// `|M22|` at or below this is treated as a spectral singularity by [`amplitudes`].
pub const SINGULAR_M22: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
    pub k: Complex64,
}

impl TransferMatrix {
    pub fn identity(k: Complex64) -> Self {
        Self::from_rows([[ONE, ZERO], [ZERO, ONE]], k)
    }

    pub fn from_rows(m: [[Complex64; 2]; 2], k: Complex64) -> Self {
        Self {
            m11: m[0][0],
            m12: m[0][1],
            m21: m[1][0],
            m22: m[1][1],
            k,
        }
    }

    pub fn rows(&self) -> [[Complex64; 2]; 2] {
        [[self.m11, self.m12], [self.m21, self.m22]]
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn det_defect(&self) -> f64 {
        (self.det() - ONE).norm()
    }

    /// Inverse, assuming unit determinant.
    pub fn inverse(&self) -> Self {
        Self::from_rows([[self.m22, -self.m12], [-self.m21, self.m11]], self.k)
    }

    /// `σ₁ M σ₁`: swaps both diagonal and off-diagonal entries.
    pub fn sigma1_conjugated(&self) -> Self {
        Self::from_rows([[self.m22, self.m21], [self.m12, self.m11]], self.k)
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self::from_rows(
            [[self.m11.conj(), self.m12.conj()], [self.m21.conj(), self.m22.conj()]],
            self.k,
        )
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.m11 - other.m11,
            self.m12 - other.m12,
            self.m21 - other.m21,
            self.m22 - other.m22,
        ]
        .iter()
        .map(|d| d.norm())
        .fold(0.0, f64::max)
    }

    /// Matrix product `self · rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &Self) -> Self {
        let a = self.rows();
        let b = rhs.rows();
        Self::from_rows(mat_mul(&a, &b), self.k)
    }
}

/// Reflection and transmission amplitudes in the Jost normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub rl: Complex64,
    pub rr: Complex64,
    pub t: Complex64,
}

/// Inverts `M11 = T - RˡRʳ/T, M12 = Rʳ/T, M21 = -Rˡ/T, M22 = 1/T`.
pub fn amplitudes(m: &TransferMatrix) -> Result<Amplitudes> {
    let scale = m.m11.norm().max(m.m12.norm()).max(m.m21.norm()).max(1.0);
    if m.m22.norm() <= SINGULAR_M22 * scale {
        return Err(Error::SpectralSingularity {
            k: m.k,
            m22_abs: m.m22.norm(),
        });
    }
    Ok(Amplitudes {
        t: ONE / m.m22,
        rr: m.m12 / m.m22,
        rl: -m.m21 / m.m22,
    })
}

/// `(|Rˡ|² + |T|² - 1, |Rʳ|² + |T|² - 1)`.
pub fn unitarity_defect(a: &Amplitudes) -> (f64, f64) {
    let t2 = a.t.norm_sqr();
    (a.rl.norm_sqr() + t2 - 1.0, a.rr.norm_sqr() + t2 - 1.0)
}

/// Knobs for RK4 integration of sampled profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rk4Options {
    /// RK4 steps per local wavelength `2π/√|k² - v|`.
    pub steps_per_wavelength: f64,
    /// Sample spacing coarser than `λ_local / min_samples_per_wavelength` is rejected.
    pub min_samples_per_wavelength: f64,
    /// Optional absolute cap on the step.
    pub max_step: Option<f64>,
}

impl Default for Rk4Options {
    fn default() -> Self {
        Self {
            steps_per_wavelength: 800.0,
            min_samples_per_wavelength: 20.0,
            max_step: None,
        }
    }
}

/// Anything with a transfer matrix at complex wavenumber.
pub trait Scatterer: Sync {
    /// Wavenumber-resolved profile used for propagation.
    fn profile(&self, k: Complex64, opts: &Rk4Options) -> Result<Profile<'_>>;

    fn transfer_matrix_at(&self, k: Complex64) -> Result<TransferMatrix> {
        Ok(self.profile(k, &Rk4Options::default())?.transfer_matrix())
    }

    /// Transfer matrix at a real, positive wavenumber.
    fn transfer_matrix(&self, k: f64) -> Result<TransferMatrix> {
        if !(k > 0.0) {
            return Err(Error::NonPositiveWavenumber(k));
        }
        self.transfer_matrix_at(Complex64::new(k, 0.0))
    }
}

impl<T: Scatterer + ?Sized> Scatterer for &T {
    fn profile(&self, k: Complex64, opts: &Rk4Options) -> Result<Profile<'_>> {
        (**self).profile(k, opts)
    }
}

impl Scatterer for Potential {
    fn profile(&self, k: Complex64, opts: &Rk4Options) -> Result<Profile<'_>> {
        self.validate()?;
        let mut b = ProfileBuilder::new(k, *opts)?;
        b.add_potential(self)?;
        Ok(b.finish())
    }
}

impl Scatterer for Medium {
    fn profile(&self, k: Complex64, opts: &Rk4Options) -> Result<Profile<'_>> {
        let mut b = ProfileBuilder::new(k, *opts)?;
        b.add_medium(self);
        Ok(b.finish())
    }
}

impl Scatterer for Structure {
    fn profile(&self, k: Complex64, opts: &Rk4Options) -> Result<Profile<'_>> {
        let mut b = ProfileBuilder::new(k, *opts)?;
        b.add_medium(self.medium());
        for p in self.potentials() {
            b.add_potential(p)?;
        }
        Ok(b.finish())
    }
}

/// Transfer matrix of `p` at real `k > 0`.
pub fn transfer_matrix(p: &impl Scatterer, k: f64) -> Result<TransferMatrix> {
    p.transfer_matrix(k)
}

#[derive(Debug, Clone)]
enum Piece<'a> {
    Uniform {
        left: f64,
        right: f64,
        w2: Complex64,
    },
    Sampled {
        grid: &'a SampledGrid,
        step: f64,
    },
}

impl Piece<'_> {
    fn bounds(&self) -> (f64, f64) {
        match self {
            Piece::Uniform { left, right, .. } => (*left, *right),
            Piece::Sampled { grid, .. } => (grid.left(), grid.right()),
        }
    }
}

/// A scatterer resolved at one wavenumber: ordered extended pieces plus
/// point kicks. Propagates `(ψ, ψ')` between arbitrary positions.
///
/// A state at a delta position `x₀` is the right limit `(ψ(x₀), ψ'(x₀⁺))`.
#[derive(Debug, Clone)]
pub struct Profile<'a> {
    k: Complex64,
    k2: Complex64,
    pieces: Vec<Piece<'a>>,
    jumps: Vec<(f64, Complex64)>,
}

struct ProfileBuilder<'a> {
    profile: Profile<'a>,
    opts: Rk4Options,
}

impl<'a> ProfileBuilder<'a> {
    fn new(k: Complex64, opts: Rk4Options) -> Result<Self> {
        if !(k.re.is_finite() && k.im.is_finite()) || k.norm() < 1e-300 {
            return Err(Error::WavenumberAtOrigin(k));
        }
        Ok(Self {
            profile: Profile {
                k,
                k2: k * k,
                pieces: Vec::new(),
                jumps: Vec::new(),
            },
            opts,
        })
    }

    fn add_medium(&mut self, m: &Medium) {
        let k2 = self.profile.k2;
        self.profile
            .pieces
            .extend(m.layers().iter().map(|l| Piece::Uniform {
                left: l.left,
                right: l.right,
                w2: k2 * l.index * l.index,
            }));
    }

    fn add_potential(&mut self, p: &'a Potential) -> Result<()> {
        let k2 = self.profile.k2;
        match p {
            Potential::PiecewiseConstant(layers) => {
                self.profile
                    .pieces
                    .extend(layers.iter().map(|l| Piece::Uniform {
                        left: l.left,
                        right: l.right,
                        w2: k2 - l.value,
                    }))
            }
            Potential::DeltaComb(deltas) => self
                .profile
                .jumps
                .extend(deltas.iter().map(|d| (d.position, d.strength))),
            Potential::Sampled(grid) => {
                let max_q = grid
                    .values()
                    .iter()
                    .map(|v| (k2 - v).norm())
                    .fold(k2.norm(), f64::max);
                let dx = grid.dx();
                let mut step = dx;
                if max_q > 0.0 {
                    let wavelength = 2.0 * std::f64::consts::PI / max_q.sqrt();
                    if dx > wavelength / self.opts.min_samples_per_wavelength {
                        return Err(Error::GridTooCoarse {
                            dx,
                            wavelength,
                            min_samples: self.opts.min_samples_per_wavelength,
                        });
                    }
                    step = step.min(wavelength / self.opts.steps_per_wavelength);
                }
                if let Some(cap) = self.opts.max_step {
                    step = step.min(cap);
                }
                self.profile.pieces.push(Piece::Sampled { grid, step });
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Profile<'a> {
        self.profile
            .pieces
            .sort_by(|a, b| a.bounds().0.total_cmp(&b.bounds().0));
        self.profile.jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.profile
    }
}

type State = [Complex64; 2];
type Mat2 = [[Complex64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn mat_vec(a: &Mat2, s: &State) -> State {
    [
        a[0][0] * s[0] + a[0][1] * s[1],
        a[1][0] * s[0] + a[1][1] * s[1],
    ]
}

/// Exact propagator of `ψ'' = -w²ψ` over signed length `len`.
fn uniform_propagator(w2: Complex64, len: f64) -> Mat2 {
    let z = w2 * len * len;
    let (c, s) = if z.norm() < 1e-8 {
        (
            ONE - z / 2.0 + z * z / 24.0,
            (ONE - z / 6.0 + z * z / 120.0) * len,
        )
    } else {
        let w = w2.sqrt();
        ((w * len).cos(), (w * len).sin() / w)
    };
    [[c, s], [-w2 * s, c]]
}

impl Profile<'_> {
    pub fn k(&self) -> Complex64 {
        self.k
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.pieces {
            let (a, b) = p.bounds();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        for (x, _) in &self.jumps {
            lo = lo.min(*x);
            hi = hi.max(*x);
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Plane-wave basis at `x`: columns are `e^{ikx}` and `e^{-ikx}` as `(ψ, ψ')`.
    fn plane_wave_basis(&self, x: f64) -> Mat2 {
        let ep = (I * self.k * x).exp();
        let em = (-I * self.k * x).exp();
        let ik = I * self.k;
        [[ep, em], [ik * ep, -ik * em]]
    }

    /// Coefficients `(A, B)` of `A e^{ikx} + B e^{-ikx}` matching state `s` at `x`.
    pub fn plane_wave_coefficients(&self, s: &State, x: f64) -> [Complex64; 2] {
        let ep = (I * self.k * x).exp();
        let em = (-I * self.k * x).exp();
        let d = s[1] / (I * self.k);
        [(s[0] + d) * 0.5 / ep, (s[0] - d) * 0.5 / em]
    }

    /// State of `A e^{ikx} + B e^{-ikx}` at `x`.
    pub fn plane_wave_state(&self, coeffs: [Complex64; 2], x: f64) -> State {
        mat_vec(&self.plane_wave_basis(x), &coeffs)
    }

    fn piece_at(&self, x: f64) -> Option<&Piece<'_>> {
        self.pieces.iter().find(|p| {
            let (a, b) = p.bounds();
            a <= x && x <= b
        })
    }

    /// Propagates across `[from, to]`, which contains no piece boundary or delta in its interior.
    fn propagate_smooth(&self, s: State, from: f64, to: f64) -> State {
        if from == to {
            return s;
        }
        match self.piece_at(0.5 * (from + to)) {
            None => mat_vec(&uniform_propagator(self.k2, to - from), &s),
            Some(Piece::Uniform { w2, .. }) => mat_vec(&uniform_propagator(*w2, to - from), &s),
            Some(Piece::Sampled { grid, step }) => self.rk4_sampled(grid, *step, s, from, to),
        }
    }

    fn rk4_sampled(&self, grid: &SampledGrid, step: f64, mut s: State, from: f64, to: f64) -> State {
        // walk cell by cell so the interpolant is linear inside every step
        let dx = grid.dx();
        let node = |j: i64| grid.left() + j as f64 * dx;
        let forward = to > from;
        let mut x = from;
        while x != to {
            let next = if forward {
                let mut j = ((x - grid.left()) / dx).floor() as i64 + 1;
                while node(j) <= x {
                    j += 1;
                }
                while j > 0 && node(j - 1) > x {
                    j -= 1;
                }
                node(j).min(to)
            } else {
                let mut j = ((x - grid.left()) / dx).ceil() as i64 - 1;
                while node(j) >= x {
                    j -= 1;
                }
                while node(j + 1) < x {
                    j += 1;
                }
                node(j).max(to)
            };
            let n = ((next - x).abs() / step).ceil().max(1.0) as usize;
            let h = (next - x) / n as f64;
            for j in 0..n {
                let x0 = x + j as f64 * h;
                s = self.rk4_step(grid, s, x0, h);
            }
            x = next;
        }
        s
    }

    fn rk4_step(&self, grid: &SampledGrid, s: State, x: f64, h: f64) -> State {
        let f = |x: f64, y: &State| -> State { [y[1], (grid.value_at(x) - self.k2) * y[0]] };
        let add = |y: &State, d: &State, c: f64| -> State { [y[0] + d[0] * c, y[1] + d[1] * c] };
        let k1 = f(x, &s);
        let k2 = f(x + 0.5 * h, &add(&s, &k1, 0.5 * h));
        let k3 = f(x + 0.5 * h, &add(&s, &k2, 0.5 * h));
        let k4 = f(x + h, &add(&s, &k3, h));
        [
            s[0] + (k1[0] + (k2[0] + k3[0]) * 2.0 + k4[0]) * (h / 6.0),
            s[1] + (k1[1] + (k2[1] + k3[1]) * 2.0 + k4[1]) * (h / 6.0),
        ]
    }

    /// Propagates `(ψ, ψ')` from `from` to `to` in either direction.
    pub fn propagate(&self, mut s: State, from: f64, to: f64) -> State {
        if from == to {
            return s;
        }
        let forward = to > from;
        let inside = |x: f64| {
            if forward {
                from < x && x < to
            } else {
                to < x && x < from
            }
        };
        let mut stops: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| {
                let (a, b) = p.bounds();
                [a, b]
            })
            .chain(self.jumps.iter().map(|j| j.0))
            .filter(|&x| inside(x))
            .collect();
        stops.push(to);
        if forward {
            stops.sort_by(f64::total_cmp);
        } else {
            stops.sort_by(|a, b| b.total_cmp(a));
        }
        stops.dedup();

        let mut x = from;
        // leaving a delta at the start of a leftward sweep undoes its kick
        if !forward {
            s = self.kick(s, from, -1.0);
        }
        for stop in stops {
            s = self.propagate_smooth(s, x, stop);
            if forward {
                s = self.kick(s, stop, 1.0);
            } else if stop != to {
                s = self.kick(s, stop, -1.0);
            }
            x = stop;
        }
        s
    }

    fn kick(&self, mut s: State, x: f64, sign: f64) -> State {
        for (_, z) in self.jumps.iter().filter(|j| j.0 == x) {
            s[1] += *z * s[0] * sign;
        }
        s
    }

    /// Fundamental matrix of `(ψ, ψ')` from `from` to `to`.
    pub fn propagator(&self, from: f64, to: f64) -> Mat2 {
        let c0 = self.propagate([ONE, ZERO], from, to);
        let c1 = self.propagate([ZERO, ONE], from, to);
        [[c0[0], c1[0]], [c0[1], c1[1]]]
    }

    /// Left and right reference points strictly outside the support.
    fn outer_points(&self) -> Option<(f64, f64)> {
        self.support().map(|(a, b)| (a - 1.0, b))
    }

    pub fn transfer_matrix(&self) -> TransferMatrix {
        let Some((a, b)) = self.outer_points() else {
            return TransferMatrix::identity(self.k);
        };
        self.transfer_between(a, b)
    }

    fn transfer_between(&self, a: f64, b: f64) -> TransferMatrix {
        let p = self.propagator(a, b);
        let wa = self.plane_wave_basis(a);
        let wb = self.plane_wave_basis(b);
        let det = wb[0][0] * wb[1][1] - wb[0][1] * wb[1][0];
        let wb_inv = [
            [wb[1][1] / det, -wb[0][1] / det],
            [-wb[1][0] / det, wb[0][0] / det],
        ];
        TransferMatrix::from_rows(mat_mul(&wb_inv, &mat_mul(&p, &wa)), self.k)
    }

    /// Transfer matrix obtained by integrating from right to left and inverting.
    pub fn transfer_matrix_reversed(&self) -> TransferMatrix {
        let Some((a, b)) = self.outer_points() else {
            return TransferMatrix::identity(self.k);
        };
        let p = self.propagator(b, a);
        let wa = self.plane_wave_basis(a);
        let wb = self.plane_wave_basis(b);
        let det = wa[0][0] * wa[1][1] - wa[0][1] * wa[1][0];
        let wa_inv = [
            [wa[1][1] / det, -wa[0][1] / det],
            [-wa[1][0] / det, wa[0][0] / det],
        ];
        let n = TransferMatrix::from_rows(mat_mul(&wa_inv, &mat_mul(&p, &wb)), self.k);
        let d = n.det();
        TransferMatrix::from_rows(
            [[n.m22 / d, -n.m12 / d], [-n.m21 / d, n.m11 / d]],
            self.k,
        )
    }
}

/// `T` from a left-to-right integration and from an independent
/// right-to-left integration.
pub fn transmission_both_ways(p: &impl Scatterer, k: f64) -> Result<(Complex64, Complex64)> {
    if !(k > 0.0) {
        return Err(Error::NonPositiveWavenumber(k));
    }
    let profile = p.profile(Complex64::new(k, 0.0), &Rk4Options::default())?;
    let forward = profile.transfer_matrix();
    let backward = profile.transfer_matrix_reversed();
    Ok((ONE / forward.m22, ONE / backward.m22))
}

/// Jost solutions `ψ_{k±}` sampled on a grid as `(ψ, ψ')` pairs.
#[derive(Debug, Clone)]
pub struct JostSolutions {
    pub k: Complex64,
    pub x: Vec<f64>,
    /// `ψ_{k+}`, equal to `e^{ikx}` right of the support.
    pub plus: Vec<[Complex64; 2]>,
    /// `ψ_{k-}`, equal to `e^{-ikx}` left of the support.
    pub minus: Vec<[Complex64; 2]>,
    pub transfer: TransferMatrix,
}

impl JostSolutions {
    /// `W[ψ_{k-}, ψ_{k+}] = ψ₋ψ₊' - ψ₋'ψ₊`, equal to `2ik M22` everywhere.
    pub fn wronskian(&self, i: usize) -> Complex64 {
        let p = self.plus[i];
        let m = self.minus[i];
        m[0] * p[1] - m[1] * p[0]
    }
}

pub fn jost_solutions(p: &impl Scatterer, k: f64, grid: &[f64]) -> Result<JostSolutions> {
    jost_solutions_with(p, k, grid, &Rk4Options::default())
}

pub fn jost_solutions_with(
    p: &impl Scatterer,
    k: f64,
    grid: &[f64],
    opts: &Rk4Options,
) -> Result<JostSolutions> {
    if !(k > 0.0) {
        return Err(Error::NonPositiveWavenumber(k));
    }
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "Jost grid must be non-empty and strictly increasing".into(),
        ));
    }
    let kc = Complex64::new(k, 0.0);
    let profile = p.profile(kc, opts)?;
    let transfer = profile.transfer_matrix();
    let (lo, hi) = profile
        .support()
        .unwrap_or((grid[0], grid[grid.len() - 1]));

    let n = grid.len();
    let mut plus = vec![[ZERO; 2]; n];
    let start = hi.max(grid[n - 1]);
    let mut s = profile.plane_wave_state([ONE, ZERO], start);
    let mut x = start;
    for i in (0..n).rev() {
        s = profile.propagate(s, x, grid[i]);
        x = grid[i];
        plus[i] = s;
    }

    let mut minus = vec![[ZERO; 2]; n];
    let start = lo.min(grid[0]) - 1.0;
    let mut s = profile.plane_wave_state([ZERO, ONE], start);
    let mut x = start;
    for i in 0..n {
        s = profile.propagate(s, x, grid[i]);
        x = grid[i];
        minus[i] = s;
    }

    Ok(JostSolutions {
        k: kc,
        x: grid.to_vec(),
        plus,
        minus,
        transfer,
    })
}
