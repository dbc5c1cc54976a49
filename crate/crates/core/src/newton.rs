//! Small Newton solvers shared by the root finders.
//!
//! `solve2` is a damped Gauss–Newton iteration for `F: ℝ² → ℝ²` with a
//! central-difference Jacobian. The step uses the SVD pseudo-inverse, so
//! a rank-one Jacobian still makes progress: the iteration then moves to
//! the nearest point of a curve of zeros rather than stalling.
//! `solve_complex` is the analytic counterpart for `f: ℂ → ℂ`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Converged once `|F| <= tol`.
    pub tol: f64,
    /// Extra iterations after convergence, kept only while they reduce `|F|`.
    pub polish: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Absolute floor for the finite-difference step, per coordinate.
    pub fd_floor: [f64; 2],
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 60,
            tol: 1e-8,
            polish: 4,
            fd_step: 1e-6,
            fd_floor: [1e-6, 1e-6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonResult {
    pub x: [f64; 2],
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Numerical rank of the Jacobian at the final point.
    pub rank: usize,
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn jacobian<F>(f: &F, x: [f64; 2], opts: &NewtonOptions) -> Option<Matrix2<f64>>
where
    F: Fn([f64; 2]) -> Option<[f64; 2]>,
{
    let mut j = Matrix2::zeros();
    for c in 0..2 {
        let h = (opts.fd_step * x[c].abs()).max(opts.fd_floor[c]);
        let mut xp = x;
        let mut xm = x;
        xp[c] += h;
        xm[c] -= h;
        let fp = f(xp)?;
        let fm = f(xm)?;
        j[(0, c)] = (fp[0] - fm[0]) / (2.0 * h);
        j[(1, c)] = (fp[1] - fm[1]) / (2.0 * h);
    }
    Some(j)
}

fn rank_of(j: &Matrix2<f64>) -> usize {
    let sv = j.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > 1e-6 * smax).count()
    }
}

/// Damped Gauss–Newton for `F(x) = 0`. `f` returns `None` where it cannot
/// be evaluated; such trial points are treated as failed steps.
pub fn solve2<F>(f: F, x0: [f64; 2], opts: &NewtonOptions) -> NewtonResult
where
    F: Fn([f64; 2]) -> Option<[f64; 2]>,
{
    let mut x = x0;
    let Some(mut fx) = f(x) else {
        return NewtonResult {
            x,
            residual: f64::INFINITY,
            iterations: 0,
            converged: false,
            rank: 0,
        };
    };
    let mut res = norm2(fx);
    let mut converged_at = None;
    let mut it = 0;
    while it < opts.max_iter {
        if res <= opts.tol && converged_at.is_none() {
            converged_at = Some(it);
        }
        if let Some(c) = converged_at {
            if it >= c + opts.polish || res == 0.0 {
                break;
            }
        }
        it += 1;
        let Some(j) = jacobian(&f, x, opts) else { break };
        let svd = j.svd(true, true);
        let Ok(pinv) = svd.pseudo_inverse(1e-10 * svd.singular_values.max()) else {
            break;
        };
        let step = -(pinv * Vector2::new(fx[0], fx[1]));
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = [x[0] + lambda * step[0], x[1] + lambda * step[1]];
            if let Some(ft) = f(trial) {
                let rt = norm2(ft);
                if rt < res {
                    x = trial;
                    fx = ft;
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    // measured at the final point: a seed may sit exactly on the root
    let rank = jacobian(&f, x, opts).map_or(0, |j| rank_of(&j));
    NewtonResult {
        x,
        residual: res,
        iterations: it,
        converged: res <= opts.tol,
        rank,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexNewtonResult {
    pub z: Complex64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped Newton for analytic `f(z) = 0` with a central-difference derivative.
pub fn solve_complex<F>(f: F, z0: Complex64, opts: &NewtonOptions) -> ComplexNewtonResult
where
    F: Fn(Complex64) -> Option<Complex64>,
{
    let mut z = z0;
    let Some(mut fz) = f(z) else {
        return ComplexNewtonResult {
            z,
            residual: f64::INFINITY,
            iterations: 0,
            converged: false,
        };
    };
    let mut res = fz.norm();
    let mut converged_at = None;
    let mut it = 0;
    while it < opts.max_iter {
        if res <= opts.tol && converged_at.is_none() {
            converged_at = Some(it);
        }
        if let Some(c) = converged_at {
            if it >= c + opts.polish || res == 0.0 {
                break;
            }
        }
        it += 1;
        let h = (opts.fd_step * z.norm()).max(opts.fd_floor[0]);
        let (Some(fp), Some(fm)) = (f(z + h), f(z - h)) else { break };
        let d = (fp - fm) / (2.0 * h);
        if d.norm() == 0.0 || !d.is_finite() {
            break;
        }
        let step = -fz / d;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = z + step * lambda;
            if let Some(ft) = f(trial) {
                if ft.norm() < res {
                    z = trial;
                    fz = ft;
                    res = ft.norm();
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    ComplexNewtonResult {
        z,
        residual: res,
        iterations: it,
        converged: res <= opts.tol,
    }
}
