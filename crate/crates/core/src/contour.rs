//! Zeros of analytic functions inside rectangles, by the argument principle.
//!
//! The winding number of `f` along the boundary counts zeros with
//! multiplicity. Boxes with one zero are handed to Newton; boxes with more
//! are split (off-centre, so a split line rarely passes through a zero) until
//! either each holds a single zero or the box is smaller than the cluster
//! radius, in which case the zeros are reported as one root of the observed
//! multiplicity.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::newton::{solve_complex, NewtonOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Rect {
    pub fn new(re: (f64, f64), im: (f64, f64)) -> Result<Self> {
        if !(re.0 < re.1 && im.0 < im.1) || ![re.0, re.1, im.0, im.1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "degenerate rectangle re={re:?} im={im:?}"
            )));
        }
        Ok(Self { re, im })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.re.0 <= z.re && z.re <= self.re.1 && self.im.0 <= z.im && z.im <= self.im.1
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(Complex64::new(0.0, 0.0))
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re.0 + self.re.1), 0.5 * (self.im.0 + self.im.1))
    }

    pub fn size(&self) -> f64 {
        (self.re.1 - self.re.0).max(self.im.1 - self.im.0)
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re.0, self.im.0),
            Complex64::new(self.re.1, self.im.0),
            Complex64::new(self.re.1, self.im.1),
            Complex64::new(self.re.0, self.im.1),
        ]
    }

    fn split(&self, s: f64) -> [Rect; 4] {
        let xm = self.re.0 + s * (self.re.1 - self.re.0);
        let ym = self.im.0 + s * (self.im.1 - self.im.0);
        [
            Rect { re: (self.re.0, xm), im: (self.im.0, ym) },
            Rect { re: (xm, self.re.1), im: (self.im.0, ym) },
            Rect { re: (self.re.0, xm), im: (ym, self.im.1) },
            Rect { re: (xm, self.re.1), im: (ym, self.im.1) },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourOptions {
    pub samples_per_edge: usize,
    /// Largest phase change accepted between neighbouring boundary samples.
    pub max_phase_step: f64,
    /// Maximum bisection depth of a boundary segment.
    pub max_depth: usize,
    /// Boxes smaller than this with winding ≥ 2 are reported as one multiple root.
    pub cluster_radius: f64,
    pub newton: NewtonOptions,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            samples_per_edge: 32,
            max_phase_step: PI / 4.0,
            max_depth: 30,
            cluster_radius: 1e-7,
            newton: NewtonOptions {
                tol: 1e-12,
                fd_floor: [1e-7, 1e-7],
                ..NewtonOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourRoot {
    pub z: Complex64,
    pub residual: f64,
    pub multiplicity: usize,
}

const SPLITS: [f64; 4] = [0.4871, 0.5317, 0.4623, 0.5561];

fn phase_along<F>(f: &F, a: Complex64, fa: Complex64, b: Complex64, fb: Complex64, depth: usize, opts: &ContourOptions) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let d = (fb / fa).arg();
    if d.abs() <= opts.max_phase_step {
        return Ok(d);
    }
    if depth >= opts.max_depth {
        return Err(Error::ZeroOnContour(0.5 * (a + b)));
    }
    let m = 0.5 * (a + b);
    let fm = eval(f, m)?;
    Ok(phase_along(f, a, fa, m, fm, depth + 1, opts)? + phase_along(f, m, fm, b, fb, depth + 1, opts)?)
}

fn eval<F>(f: &F, z: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let v = f(z)?;
    if v.norm() == 0.0 || !v.is_finite() {
        return Err(Error::ZeroOnContour(z));
    }
    Ok(v)
}

/// Number of zeros (with multiplicity) of `f` inside `rect`.
pub fn winding_number<F>(f: &F, rect: &Rect, opts: &ContourOptions) -> Result<i64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let corners = rect.corners();
    let n = opts.samples_per_edge.max(2);
    let mut total = 0.0;
    let mut prev_z = corners[0];
    let mut prev_f = eval(f, prev_z)?;
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        for j in 1..=n {
            let z = a + (b - a) * (j as f64 / n as f64);
            let fz = eval(f, z)?;
            total += phase_along(f, prev_z, prev_f, z, fz, 0, opts)?;
            prev_z = z;
            prev_f = fz;
        }
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// All zeros of `f` inside `rect`, sorted by real then imaginary part.
pub fn find_zeros<F>(f: &F, rect: &Rect, opts: &ContourOptions) -> Result<Vec<ContourRoot>>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let w = winding_number(f, rect, opts)?;
    if w < 0 {
        return Err(Error::WindingMismatch { winding: w, found: 0 });
    }
    let mut roots = Vec::new();
    search(f, rect, w, opts, &mut roots)?;
    let found: usize = roots.iter().map(|r| r.multiplicity).sum();
    if found as i64 != w {
        return Err(Error::WindingMismatch { winding: w, found });
    }
    roots.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
    Ok(roots)
}

fn search<F>(f: &F, rect: &Rect, w: i64, opts: &ContourOptions, out: &mut Vec<ContourRoot>) -> Result<()>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if w <= 0 {
        return Ok(());
    }
    let g = |z: Complex64| f(z).ok();
    if w == 1 {
        let r = solve_complex(g, rect.center(), &opts.newton);
        if r.converged && rect.contains(r.z) {
            out.push(ContourRoot { z: r.z, residual: r.residual, multiplicity: 1 });
            return Ok(());
        }
    }
    if rect.size() < opts.cluster_radius {
        let r = solve_complex(g, rect.center(), &opts.newton);
        let (z, residual) = if rect.contains(r.z) {
            (r.z, r.residual)
        } else {
            (rect.center(), f(rect.center())?.norm())
        };
        out.push(ContourRoot { z, residual, multiplicity: w as usize });
        return Ok(());
    }
    let mut last_err = None;
    for s in SPLITS {
        let subs = rect.split(s);
        let counts: Result<Vec<i64>> = subs.iter().map(|r| winding_number(f, r, opts)).collect();
        match counts {
            Ok(c) if c.iter().sum::<i64>() == w && c.iter().all(|&v| v >= 0) => {
                for (r, cw) in subs.iter().zip(c) {
                    search(f, r, cw, opts, out)?;
                }
                return Ok(());
            }
            Ok(c) => {
                last_err = Some(Error::WindingMismatch {
                    winding: w,
                    found: c.iter().filter(|&&v| v > 0).map(|&v| v as usize).sum(),
                })
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(Error::WindingMismatch { winding: w, found: 0 }))
}
