//! Homogeneous slab lasers.
//!
//! A slab of index `n = η + iκ` and length `L` in vacuum has a spectral
//! singularity where `e^{-2inkL} = ℛ(n)` with reflectivity
//! `ℛ = ((n-1)/(n+1))²`. Splitting modulus and phase gives the threshold
//! gain `g_th = ln(1/|ℛ|²)/(2L)` and the mode comb `k_m ≈ (2πm - arg ℛ)/(2ηL)`.
//!
//! Above threshold a Kerr term `σ|ψ|²` added to `n²` inside the slab makes
//! the purely outgoing problem solvable at a finite output intensity; the
//! solver below finds that intensity by shooting.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::newton::{solve2, NewtonOptions};
use crate::potentials::{Medium, MediumLayer};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabSpec {
    pub eta: f64,
    pub kappa: f64,
    pub length: f64,
    /// Kerr coefficient.
    pub sigma: f64,
}

impl SlabSpec {
    pub fn new(eta: f64, kappa: f64, length: f64, sigma: f64) -> Result<Self> {
        if !(eta > 0.0) || !(length > 0.0) || !(sigma >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "slab needs eta > 0, L > 0, sigma >= 0 (got eta={eta}, L={length}, sigma={sigma})"
            )));
        }
        Ok(Self { eta, kappa, length, sigma })
    }

    pub fn index(&self) -> Complex64 {
        Complex64::new(self.eta, self.kappa)
    }

    pub fn medium(&self) -> Result<Medium> {
        Medium::slab(0.0, self.length, self.index())
    }
}

/// `((n - 1)/(n + 1))²`.
pub fn reflectivity(n: Complex64) -> Result<Complex64> {
    if (n + 1.0).norm() == 0.0 {
        return Err(Error::InvalidMedium("reflectivity undefined at n = -1".into()));
    }
    let r = (n - 1.0) / (n + 1.0);
    Ok(r * r)
}

/// `e^{-2inkL} - ℛ(n)`; zero exactly at a slab spectral singularity.
pub fn ss_residual(n: Complex64, k: f64, length: f64) -> Result<Complex64> {
    if !(k > 0.0) {
        return Err(Error::NonPositiveWavenumber(k));
    }
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("slab length must be positive, got {length}")));
    }
    Ok((-2.0 * I * n * k * length).exp() - reflectivity(n)?)
}

/// Threshold gain of a slab with real index `η`.
pub fn threshold_gain(eta: f64, length: f64) -> Result<f64> {
    if !(eta > 0.0) || !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("need eta > 0 and L > 0 (got {eta}, {length})")));
    }
    threshold_gain_complex(Complex64::new(eta, 0.0), length)
}

/// `ln(1/|ℛ(n)|²)/(2L)` with the reflectivity of a complex index.
pub fn threshold_gain_complex(n: Complex64, length: f64) -> Result<f64> {
    let r = reflectivity(n)?.norm();
    if r == 0.0 {
        return Err(Error::InfiniteThreshold { eta: n.re });
    }
    Ok(-(r * r).ln() / (2.0 * length))
}

/// `g = -4πκ/λ`.
pub fn gain_coefficient(kappa: f64, wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(Error::InvalidArgument(format!("wavelength must be positive, got {wavelength}")));
    }
    Ok(-4.0 * PI * kappa / wavelength)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LasingMode {
    /// Mode number in `k_m ≈ (2πm - arg ℛ)/(2ηL)`.
    pub index: i64,
    pub k: f64,
    pub kappa: f64,
    /// `|ss_residual|` at the refined point.
    pub residual: f64,
    /// Leading-order `(k, κ)` the refinement started from.
    pub seed: (f64, f64),
}

impl LasingMode {
    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }

    /// Gain coefficient of the mode, `-2κk`.
    pub fn gain(&self) -> f64 {
        -2.0 * self.kappa * self.k
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeSearch {
    pub modes: Vec<LasingMode>,
    /// `(mode number, seed k, final residual)` of seeds that did not converge.
    pub failures: Vec<(i64, f64, f64)>,
}

/// Refined lasing modes `(k_m, κ_m)` of a slab with real part `η` in a `k` window.
pub fn lasing_modes(eta: f64, length: f64, k_window: (f64, f64)) -> Result<ModeSearch> {
    if !(k_window.0 < k_window.1) || !(k_window.0 > 0.0) {
        return Err(Error::InvalidArgument(format!("empty or non-positive k window {k_window:?}")));
    }
    if !(eta > 0.0) || !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("need eta > 0 and L > 0 (got {eta}, {length})")));
    }
    if eta == 1.0 {
        return Ok(ModeSearch::default());
    }
    let r0 = reflectivity(Complex64::new(eta, 0.0))?;
    let (mod_r, arg_r) = (r0.norm(), r0.arg());
    let m_of = |k: f64| (2.0 * eta * length * k + arg_r) / (2.0 * PI);
    // one extra mode on each side: refinement can move a mode across the edge
    let m_lo = m_of(k_window.0).ceil() as i64 - 1;
    let m_hi = m_of(k_window.1).floor() as i64 + 1;

    let newton = NewtonOptions {
        max_iter: 80,
        tol: 1e-12,
        polish: 4,
        fd_step: 1e-8,
        fd_floor: [1e-9, 1e-10],
    };
    let results: Vec<_> = (m_lo.max(1)..=m_hi)
        .into_par_iter()
        .map(|m| {
            let k0 = (2.0 * PI * m as f64 - arg_r) / (2.0 * eta * length);
            let kappa0 = mod_r.ln() / (2.0 * k0 * length);
            let f = |x: [f64; 2]| {
                ss_residual(Complex64::new(eta, x[1]), x[0], length)
                    .ok()
                    .map(|z| [z.re, z.im])
            };
            (m, k0, kappa0, solve2(f, [k0, kappa0], &newton))
        })
        .collect();

    let mut out = ModeSearch::default();
    for (m, k0, kappa0, r) in results {
        if !(k0 > 0.0) {
            continue;
        }
        if !r.converged {
            if k_window.0 <= k0 && k0 <= k_window.1 {
                out.failures.push((m, k0, r.residual));
            }
            continue;
        }
        let [k, kappa] = r.x;
        if k_window.0 <= k && k <= k_window.1 {
            out.modes.push(LasingMode {
                index: m,
                k,
                kappa,
                residual: ss_residual(Complex64::new(eta, kappa), k, length)?.norm(),
                seed: (k0, kappa0),
            });
        }
    }
    Ok(out)
}

/// Slab of total length `L` centred at the origin: index `η + iκ` on the
/// left half and `η - iκ` on the right half.
pub fn pt_bilayer_medium(eta: f64, kappa: f64, length: f64) -> Result<Medium> {
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("bilayer length must be positive, got {length}")));
    }
    let h = 0.5 * length;
    Medium::new(vec![
        MediumLayer { left: -h, right: 0.0, index: Complex64::new(eta, kappa) },
        MediumLayer { left: 0.0, right: h, index: Complex64::new(eta, -kappa) },
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearOptions {
    /// Residual bound on the incoming amplitude at the left face.
    pub tol: f64,
    /// `|I|` below this counts as zero output (threshold).
    pub intensity_tol: f64,
    /// RK4 steps per wavelength inside the slab.
    pub steps_per_wavelength: f64,
    pub min_steps: usize,
    pub max_iter: usize,
    /// Gain continuation steps used when the direct Newton solve fails.
    pub continuation_steps: usize,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            intensity_tol: 1e-6,
            steps_per_wavelength: 800.0,
            min_steps: 2000,
            max_iter: 80,
            continuation_steps: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearSolution {
    /// Output intensity `|A|²` of the outgoing wave `A e^{ikx}` right of the slab.
    pub intensity: f64,
    pub k: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonlinearOutcome {
    Emitting(NonlinearSolution),
    /// The only outgoing solution needs negative intensity: the slab is below threshold.
    NoSolution { signed_intensity: f64, k: f64 },
}

impl NonlinearOutcome {
    pub fn intensity(&self) -> Option<f64> {
        match self {
            NonlinearOutcome::Emitting(s) => Some(s.intensity),
            NonlinearOutcome::NoSolution { .. } => None,
        }
    }
}

/// Incoming-wave amplitude at the left face of the slab `[0, L]` for the
/// solution that is `e^{ikx}` right of the slab, with `σ|ψ|²` replaced by
/// `σ I |u|²` (`I` may be negative during continuation).
fn incoming_amplitude(n: Complex64, sigma: f64, intensity: f64, k: f64, length: f64, opts: &NonlinearOptions) -> Complex64 {
    let k2 = k * k;
    let n2 = n * n;
    let si = sigma * intensity;
    let wavelength = 2.0 * PI / (k * n.norm().max(1.0));
    let steps = ((length / wavelength) * opts.steps_per_wavelength).ceil().max(opts.min_steps as f64) as usize;
    let h = -length / steps as f64;
    let rhs = |u: Complex64, v: Complex64| -> (Complex64, Complex64) { (v, -(n2 + si * u.norm_sqr()) * k2 * u) };
    let ikl = I * k * length;
    let mut u = ikl.exp();
    let mut v = I * k * u;
    for _ in 0..steps {
        let (a1, b1) = rhs(u, v);
        let (a2, b2) = rhs(u + a1 * (0.5 * h), v + b1 * (0.5 * h));
        let (a3, b3) = rhs(u + a2 * (0.5 * h), v + b2 * (0.5 * h));
        let (a4, b4) = rhs(u + a3 * h, v + b3 * h);
        u += (a1 + (a2 + a3) * 2.0 + a4) * (h / 6.0);
        v += (b1 + (b2 + b3) * 2.0 + b4) * (h / 6.0);
    }
    (u + v / (I * k)) * 0.5
}

fn check_nonlinear(s: &SlabSpec, seed: &LasingMode) -> Result<()> {
    if !(s.sigma > 0.0) {
        return Err(Error::InvalidArgument("nonlinear solve needs sigma > 0".into()));
    }
    if !(seed.k > 0.0) {
        return Err(Error::NonPositiveWavenumber(seed.k));
    }
    Ok(())
}

fn newton_opts(opts: &NonlinearOptions) -> NewtonOptions {
    NewtonOptions {
        max_iter: opts.max_iter,
        tol: opts.tol,
        polish: 3,
        fd_step: 1e-7,
        fd_floor: [1e-5, 1e-8],
    }
}

/// Purely outgoing solution of the Kerr slab `s` near the linear mode `seed`.
///
/// Unknowns are the output intensity `I` and the wavenumber `k`; the
/// incoming amplitude at the left face is driven to zero.
pub fn nonlinear_outgoing_solve(s: &SlabSpec, seed: &LasingMode, opts: &NonlinearOptions) -> Result<NonlinearOutcome> {
    check_nonlinear(s, seed)?;
    let newton = newton_opts(opts);
    let solve_at = |kappa: f64, start: [f64; 2]| {
        let n = Complex64::new(s.eta, kappa);
        let f = |x: [f64; 2]| {
            if !(x[1] > 0.0) {
                return None;
            }
            let c = incoming_amplitude(n, s.sigma, x[0], x[1], s.length, opts);
            c.is_finite().then_some([c.re, c.im])
        };
        solve2(f, start, &newton)
    };

    let mut r = solve_at(s.kappa, [0.0, seed.k]);
    if !r.converged {
        // walk the gain from the mode's own threshold to the requested value
        let mut start = [0.0, seed.k];
        let steps = opts.continuation_steps.max(1);
        for j in 1..=steps {
            let kappa = seed.kappa + (s.kappa - seed.kappa) * j as f64 / steps as f64;
            r = solve_at(kappa, start);
            if !r.converged {
                break;
            }
            start = r.x;
        }
    }
    if !r.converged {
        return Err(Error::NoConvergence {
            iterations: r.iterations,
            residual: r.residual,
        });
    }
    let [intensity, k] = r.x;
    if intensity < -opts.intensity_tol {
        return Ok(NonlinearOutcome::NoSolution { signed_intensity: intensity, k });
    }
    Ok(NonlinearOutcome::Emitting(NonlinearSolution {
        intensity: if intensity.abs() <= opts.intensity_tol { 0.0 } else { intensity },
        k,
        residual: r.residual,
        iterations: r.iterations,
    }))
}

/// Wavenumber and gain `(k, κ)` of the outgoing solution with prescribed
/// output intensity. At `σ I → 0` this reduces to the linear mode.
pub fn solve_at_intensity(s: &SlabSpec, seed: &LasingMode, intensity: f64, opts: &NonlinearOptions) -> Result<(f64, f64)> {
    check_nonlinear(s, seed)?;
    let f = |x: [f64; 2]| {
        if !(x[0] > 0.0) {
            return None;
        }
        let c = incoming_amplitude(Complex64::new(s.eta, x[1]), s.sigma, intensity, x[0], s.length, opts);
        c.is_finite().then_some([c.re, c.im])
    };
    let newton = NewtonOptions {
        fd_floor: [1e-8, 1e-9],
        ..newton_opts(opts)
    };
    let r = solve2(f, [seed.k, seed.kappa], &newton);
    if !r.converged {
        return Err(Error::NoConvergence {
            iterations: r.iterations,
            residual: r.residual,
        });
    }
    Ok((r.x[0], r.x[1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPoint {
    pub g: f64,
    pub kappa: f64,
    pub intensity: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityCurve {
    pub points: Vec<IntensityPoint>,
    /// Threshold gain `-2κ_m k_m` of the seed mode.
    pub g_th: f64,
    /// Least-squares fit `I ≈ slope · g + intercept_i`.
    pub slope: f64,
    pub intercept_i: f64,
    /// Gain where the fitted line crosses `I = 0`.
    pub g_th_fit: f64,
    pub r_squared: f64,
}

/// `(slope, intercept, R²)` of the least-squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Output intensity over gains `g`, given as multiples of the seed mode's
/// threshold gain. The slab's own `κ` is ignored; each point uses `κ = -g/(2k_m)`.
pub fn intensity_curve(s: &SlabSpec, seed: &LasingMode, g_rel: &[f64], opts: &NonlinearOptions) -> Result<IntensityCurve> {
    check_nonlinear(s, seed)?;
    if g_rel.len() < 2 {
        return Err(Error::InvalidArgument("intensity curve needs at least two gain values".into()));
    }
    if let Some(g) = g_rel.iter().find(|g| !(**g > 1.0 && **g <= 1.2)) {
        return Err(Error::InvalidArgument(format!(
            "gain {g} g_th is outside (g_th, 1.2 g_th]"
        )));
    }
    let mut g_sorted = g_rel.to_vec();
    g_sorted.sort_by(f64::total_cmp);
    let g_th = seed.gain();
    let points = g_sorted
        .par_iter()
        .map(|&rel| {
            let g = rel * g_th;
            let kappa = -g / (2.0 * seed.k);
            let spec = SlabSpec { kappa, ..*s };
            match nonlinear_outgoing_solve(&spec, seed, opts)? {
                NonlinearOutcome::Emitting(sol) => Ok(IntensityPoint { g, kappa, intensity: sol.intensity, k: sol.k }),
                NonlinearOutcome::NoSolution { signed_intensity, .. } => Err(Error::NoConvergence {
                    iterations: 0,
                    residual: signed_intensity.abs(),
                }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let gs: Vec<f64> = points.iter().map(|p| p.g).collect();
    let is: Vec<f64> = points.iter().map(|p| p.intensity).collect();
    let (slope, intercept_i, r_squared) = linear_fit(&gs, &is);
    Ok(IntensityCurve {
        points,
        g_th,
        slope,
        intercept_i,
        g_th_fit: -intercept_i / slope,
        r_squared,
    })
}
