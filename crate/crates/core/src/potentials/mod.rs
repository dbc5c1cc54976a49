//! One-dimensional scattering potentials and layered optical media.
//!
//! A [`Potential`] is independent of the wavenumber and enters the
//! Schrödinger equation `-ψ'' + v(x)ψ = k²ψ` directly. A [`Medium`] is a
//! layered refractive-index profile `n(x)` that becomes the potential
//! `v(x) = k²(1 - n(x)²)` once a wavenumber is fixed. Both vanish identically
//! outside their support.

mod file;

pub use file::{load_structure, parse_structure};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Constant potential on `[left, right]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub left: f64,
    pub right: f64,
    pub value: Complex64,
}

/// Point interaction `strength * δ(x - position)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta {
    pub position: f64,
    pub strength: Complex64,
}

/// Potential sampled on a uniform grid spanning `[left, right]`, linearly
/// interpolated between samples and zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid {
    left: f64,
    right: f64,
    values: Vec<Complex64>,
}

impl SampledGrid {
    pub fn new(left: f64, right: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidPotential(
                "sampled potential needs at least two samples".into(),
            ));
        }
        if !(left.is_finite() && right.is_finite()) || left >= right {
            return Err(Error::InvalidPotential(format!(
                "sampled support [{left}, {right}] is not a finite interval"
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidPotential("non-finite sample value".into()));
        }
        Ok(Self {
            left,
            right,
            values,
        })
    }

    /// Grid starting at `x0` with spacing `dx`.
    pub fn from_spacing(x0: f64, dx: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::InvalidPotential(format!("spacing {dx} must be positive")));
        }
        let n = values.len().saturating_sub(1) as f64;
        Self::new(x0, x0 + n * dx, values)
    }

    /// Samples `f` at `n` uniformly spaced points of `[left, right]`.
    pub fn from_fn(left: f64, right: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidPotential(
                "sampled potential needs at least two samples".into(),
            ));
        }
        let dx = (right - left) / (n - 1) as f64;
        let values = (0..n).map(|j| f(left + j as f64 * dx)).collect();
        Self::new(left, right, values)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn dx(&self) -> f64 {
        (self.right - self.left) / (self.values.len() - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.values.len() {
            self.right
        } else {
            self.left + j as f64 * self.dx()
        }
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, x: f64) -> Complex64 {
        if x < self.left || x > self.right {
            return Complex64::new(0.0, 0.0);
        }
        let n = self.values.len();
        let s = (x - self.left) / self.dx();
        let j = (s.floor() as usize).min(n - 2);
        let t = s - j as f64;
        self.values[j] * (1.0 - t) + self.values[j + 1] * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    PiecewiseConstant(Vec<Layer>),
    DeltaComb(Vec<Delta>),
    Sampled(SampledGrid),
}

impl Potential {
    pub fn zero() -> Self {
        Potential::PiecewiseConstant(Vec::new())
    }

    pub fn piecewise(layers: Vec<Layer>) -> Result<Self> {
        let p = Potential::PiecewiseConstant(layers);
        p.validate()?;
        Ok(p)
    }

    pub fn deltas(deltas: Vec<Delta>) -> Result<Self> {
        let p = Potential::DeltaComb(deltas);
        p.validate()?;
        Ok(p)
    }

    /// `strength * δ(x - position)`.
    pub fn delta(position: f64, strength: Complex64) -> Self {
        Potential::DeltaComb(vec![Delta { position, strength }])
    }

    /// Constant `value` on `[left, right]`.
    pub fn barrier(left: f64, right: f64, value: Complex64) -> Result<Self> {
        Self::piecewise(vec![Layer { left, right, value }])
    }

    /// `-iζ` on `[-1, 0]` and `+iζ` on `(0, 1]`.
    pub fn pt_barrier(zeta: f64) -> Self {
        Potential::PiecewiseConstant(vec![
            Layer {
                left: -1.0,
                right: 0.0,
                value: Complex64::new(0.0, -zeta),
            },
            Layer {
                left: 0.0,
                right: 1.0,
                value: Complex64::new(0.0, zeta),
            },
        ])
    }

    /// `z_minus δ(x + a) + z_plus δ(x - a)`.
    pub fn double_delta(z_minus: Complex64, z_plus: Complex64, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidPotential(format!("half-separation {a} must be positive")));
        }
        Self::deltas(vec![
            Delta {
                position: -a,
                strength: z_minus,
            },
            Delta {
                position: a,
                strength: z_plus,
            },
        ])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::PiecewiseConstant(layers) => validate_intervals(
                layers.iter().map(|l| (l.left, l.right)),
                Error::InvalidPotential,
            )
            .and_then(|_| {
                if layers.iter().any(|l| !(l.value.re.is_finite() && l.value.im.is_finite())) {
                    Err(Error::InvalidPotential("non-finite layer value".into()))
                } else {
                    Ok(())
                }
            }),
            Potential::DeltaComb(deltas) => {
                for d in deltas {
                    if !d.position.is_finite() || !(d.strength.re.is_finite() && d.strength.im.is_finite()) {
                        return Err(Error::InvalidPotential("non-finite delta".into()));
                    }
                }
                for pair in deltas.windows(2) {
                    if pair[1].position <= pair[0].position {
                        return Err(Error::InvalidPotential(format!(
                            "delta positions must be strictly increasing ({} then {})",
                            pair[0].position, pair[1].position
                        )));
                    }
                }
                Ok(())
            }
            Potential::Sampled(grid) => {
                SampledGrid::new(grid.left, grid.right, grid.values.clone()).map(|_| ())
            }
        }
    }

    /// `None` for the zero potential.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Potential::PiecewiseConstant(layers) => {
                Some((layers.first()?.left, layers.last()?.right))
            }
            Potential::DeltaComb(deltas) => {
                Some((deltas.first()?.position, deltas.last()?.position))
            }
            Potential::Sampled(grid) => Some((grid.left, grid.right)),
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Potential::PiecewiseConstant(layers) => layers.iter().all(|l| l.value.im == 0.0),
            Potential::DeltaComb(deltas) => deltas.iter().all(|d| d.strength.im == 0.0),
            Potential::Sampled(grid) => grid.values.iter().all(|v| v.im == 0.0),
        }
    }

    /// `∫(1+|x|)|v(x)| dx`; `Σ(1+|x_j|)|z_j|` for a delta comb.
    pub fn moment_norm(&self) -> f64 {
        match self {
            Potential::PiecewiseConstant(layers) => layers
                .iter()
                .map(|l| l.value.norm() * ((l.right - l.left) + abs_moment(l.left, l.right)))
                .sum(),
            Potential::DeltaComb(deltas) => deltas
                .iter()
                .map(|d| (1.0 + d.position.abs()) * d.strength.norm())
                .sum(),
            Potential::Sampled(grid) => {
                let n = grid.values.len();
                let dx = grid.dx();
                (0..n)
                    .map(|j| {
                        let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
                        w * (1.0 + grid.x(j).abs()) * grid.values[j].norm()
                    })
                    .sum::<f64>()
                    * dx
            }
        }
    }

    /// `v(x) -> v(x)*`.
    pub fn time_reverse(&self) -> Self {
        match self {
            Potential::PiecewiseConstant(layers) => Potential::PiecewiseConstant(
                layers
                    .iter()
                    .map(|l| Layer {
                        value: l.value.conj(),
                        ..*l
                    })
                    .collect(),
            ),
            Potential::DeltaComb(deltas) => Potential::DeltaComb(
                deltas
                    .iter()
                    .map(|d| Delta {
                        strength: d.strength.conj(),
                        ..*d
                    })
                    .collect(),
            ),
            Potential::Sampled(grid) => Potential::Sampled(SampledGrid {
                values: grid.values.iter().map(|v| v.conj()).collect(),
                ..grid.clone()
            }),
        }
    }

    /// `v(x) -> v(-x)`.
    pub fn parity_transform(&self) -> Self {
        match self {
            Potential::PiecewiseConstant(layers) => Potential::PiecewiseConstant(
                layers
                    .iter()
                    .rev()
                    .map(|l| Layer {
                        left: -l.right,
                        right: -l.left,
                        value: l.value,
                    })
                    .collect(),
            ),
            Potential::DeltaComb(deltas) => Potential::DeltaComb(
                deltas
                    .iter()
                    .rev()
                    .map(|d| Delta {
                        position: -d.position,
                        strength: d.strength,
                    })
                    .collect(),
            ),
            Potential::Sampled(grid) => Potential::Sampled(SampledGrid {
                left: -grid.right,
                right: -grid.left,
                values: grid.values.iter().rev().copied().collect(),
            }),
        }
    }

    /// Multiplies every value (or delta strength) by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        match self {
            Potential::PiecewiseConstant(layers) => Potential::PiecewiseConstant(
                layers
                    .iter()
                    .map(|l| Layer {
                        value: l.value * factor,
                        ..*l
                    })
                    .collect(),
            ),
            Potential::DeltaComb(deltas) => Potential::DeltaComb(
                deltas
                    .iter()
                    .map(|d| Delta {
                        strength: d.strength * factor,
                        ..*d
                    })
                    .collect(),
            ),
            Potential::Sampled(grid) => Potential::Sampled(SampledGrid {
                values: grid.values.iter().map(|v| v * factor).collect(),
                ..grid.clone()
            }),
        }
    }
}

/// `∫_a^b |x| dx`.
fn abs_moment(a: f64, b: f64) -> f64 {
    let antiderivative = |x: f64| 0.5 * x * x.abs();
    antiderivative(b) - antiderivative(a)
}

fn validate_intervals(
    intervals: impl Iterator<Item = (f64, f64)>,
    err: fn(String) -> Error,
) -> Result<()> {
    let mut prev_right = f64::NEG_INFINITY;
    for (left, right) in intervals {
        if !(left.is_finite() && right.is_finite()) {
            return Err(err(format!("interval [{left}, {right}] is not finite")));
        }
        if left >= right {
            return Err(err(format!("interval [{left}, {right}] is empty or reversed")));
        }
        if left < prev_right {
            return Err(err(format!(
                "interval starting at {left} overlaps or precedes the one ending at {prev_right}"
            )));
        }
        prev_right = right;
    }
    Ok(())
}

/// Layer of refractive index `index = η + iκ` on `[left, right]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumLayer {
    pub left: f64,
    pub right: f64,
    pub index: Complex64,
}

/// Layered refractive-index profile, vacuum (`n = 1`) outside the layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Medium {
    layers: Vec<MediumLayer>,
}

impl Medium {
    pub fn new(layers: Vec<MediumLayer>) -> Result<Self> {
        validate_intervals(layers.iter().map(|l| (l.left, l.right)), Error::InvalidMedium)?;
        for l in &layers {
            if !(l.index.re > 0.0) || !l.index.im.is_finite() {
                return Err(Error::InvalidMedium(format!(
                    "refractive index {} on [{}, {}] must have positive real part",
                    l.index, l.left, l.right
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn vacuum() -> Self {
        Self::default()
    }

    /// Homogeneous slab of index `index` on `[left, right]`.
    pub fn slab(left: f64, right: f64, index: Complex64) -> Result<Self> {
        Self::new(vec![MediumLayer { left, right, index }])
    }

    pub fn layers(&self) -> &[MediumLayer] {
        &self.layers
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        Some((self.layers.first()?.left, self.layers.last()?.right))
    }

    pub fn time_reverse(&self) -> Self {
        self.map_index(|n| n.conj())
    }

    pub fn parity_transform(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .rev()
                .map(|l| MediumLayer {
                    left: -l.right,
                    right: -l.left,
                    index: l.index,
                })
                .collect(),
        }
    }

    /// Same geometry with `Im n = kappa` in every layer.
    pub fn with_kappa(&self, kappa: f64) -> Self {
        self.map_index(|n| Complex64::new(n.re, kappa))
    }

    /// Same geometry with `Re n = eta` in every layer.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(
            self.layers
                .iter()
                .map(|l| MediumLayer {
                    index: Complex64::new(eta, l.index.im),
                    ..*l
                })
                .collect(),
        )
    }

    fn map_index(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| MediumLayer {
                    index: f(l.index),
                    ..*l
                })
                .collect(),
        }
    }

    /// The optical potential `k²(1 - n²)` at a positive wavenumber.
    pub fn to_potential(&self, k: f64) -> Result<Potential> {
        if !(k > 0.0) {
            return Err(Error::NonPositiveWavenumber(k));
        }
        let k2 = k * k;
        let one = Complex64::new(1.0, 0.0);
        Ok(Potential::PiecewiseConstant(
            self.layers
                .iter()
                .filter(|l| l.index != one)
                .map(|l| Layer {
                    left: l.left,
                    right: l.right,
                    value: k2 * (one - l.index * l.index),
                })
                .collect(),
        ))
    }
}

/// Optical potential of a medium at wavenumber `k`.
pub fn from_medium(medium: &Medium, k: f64) -> Result<Potential> {
    medium.to_potential(k)
}

pub fn moment_norm(p: &Potential) -> f64 {
    p.moment_norm()
}

pub fn time_reverse(p: &Potential) -> Potential {
    p.time_reverse()
}

pub fn parity_transform(p: &Potential) -> Potential {
    p.parity_transform()
}

/// A medium together with wavenumber-independent potentials (deltas,
/// sampled profiles, constant layers). Extended parts may touch but not
/// overlap; deltas may sit anywhere.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Structure {
    medium: Medium,
    potentials: Vec<Potential>,
}

impl Structure {
    pub fn new(medium: Medium, potentials: Vec<Potential>) -> Result<Self> {
        for p in &potentials {
            p.validate()?;
        }
        let mut extended: Vec<(f64, f64)> = medium.layers.iter().map(|l| (l.left, l.right)).collect();
        for p in &potentials {
            match p {
                Potential::PiecewiseConstant(layers) => {
                    extended.extend(layers.iter().map(|l| (l.left, l.right)))
                }
                Potential::Sampled(g) => extended.push((g.left, g.right)),
                Potential::DeltaComb(_) => {}
            }
        }
        extended.sort_by(|a, b| a.0.total_cmp(&b.0));
        validate_intervals(extended.into_iter(), Error::InvalidPotential)?;
        Ok(Self { medium, potentials })
    }

    pub fn from_medium(medium: Medium) -> Self {
        Self {
            medium,
            potentials: Vec::new(),
        }
    }

    pub fn from_potential(p: Potential) -> Result<Self> {
        Self::new(Medium::vacuum(), vec![p])
    }

    pub fn medium(&self) -> &Medium {
        &self.medium
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.potentials
    }

    pub fn is_empty(&self) -> bool {
        self.support().is_none()
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.medium
            .support()
            .into_iter()
            .chain(self.potentials.iter().filter_map(|p| p.support()))
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    pub fn time_reverse(&self) -> Self {
        Self {
            medium: self.medium.time_reverse(),
            potentials: self.potentials.iter().map(|p| p.time_reverse()).collect(),
        }
    }

    pub fn parity_transform(&self) -> Self {
        Self {
            medium: self.medium.parity_transform(),
            potentials: self.potentials.iter().map(|p| p.parity_transform()).collect(),
        }
    }

    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self {
            medium: self.medium.with_kappa(kappa),
            potentials: self.potentials.clone(),
        }
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Ok(Self {
            medium: self.medium.with_eta(eta)?,
            potentials: self.potentials.clone(),
        })
    }

    /// Multiplies every delta strength by `factor`.
    pub fn with_delta_scale(&self, factor: f64) -> Self {
        self.map_potentials(|p| matches!(p, Potential::DeltaComb(_)), factor)
    }

    /// Multiplies every sampled and constant-layer potential by `factor`.
    pub fn with_profile_scale(&self, factor: f64) -> Self {
        self.map_potentials(|p| !matches!(p, Potential::DeltaComb(_)), factor)
    }

    fn map_potentials(&self, select: impl Fn(&Potential) -> bool, factor: f64) -> Self {
        let f = Complex64::new(factor, 0.0);
        Self {
            medium: self.medium.clone(),
            potentials: self
                .potentials
                .iter()
                .map(|p| if select(p) { p.scaled(f) } else { p.clone() })
                .collect(),
        }
    }
}
