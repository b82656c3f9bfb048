//! Periodic grids, sampled fields and analytic test profiles.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{slot, FftNd};

/// Uniform periodic grid on the box `[-L/2, L/2)^n`.
///
/// Sample `i` along an axis sits at `-L/2 + i h`, so the origin is a sample
/// point and each sample is the center of a cell of side `h = L/N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct Grid {
    pub dim: usize,
    pub points: usize,
    pub length: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    n: usize,
    #[serde(rename = "N")]
    points: usize,
    #[serde(rename = "L")]
    length: f64,
}

impl TryFrom<RawGrid> for Grid {
    type Error = Error;
    fn try_from(raw: RawGrid) -> Result<Grid> {
        Grid::new(raw.n, raw.points, raw.length)
    }
}

impl From<Grid> for RawGrid {
    fn from(g: Grid) -> RawGrid {
        RawGrid {
            n: g.dim,
            points: g.points,
            length: g.length,
        }
    }
}

impl Grid {
    pub fn new(dim: usize, points: usize, length: f64) -> Result<Grid> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Grid(format!("dimension {dim} not in 1..=3")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::Grid(format!(
                "points per axis must be a power of two >= 8, got {points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Grid(format!("box length must be positive, got {length}")));
        }
        Ok(Grid {
            dim,
            points,
            length,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Measure of one cell, `h^n`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of cells, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Spacing of the frequency lattice, `2π/L`.
    pub fn frequency_step(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rest = idx;
        for a in (0..self.dim).rev() {
            out[a] = rest % self.points;
            rest /= self.points;
        }
        out
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter()
            .take(self.dim)
            .fold(0, |acc, &i| acc * self.points + i)
    }

    /// Physical coordinates of sample `idx`; unused axes are zero.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let mi = self.multi_index(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = -0.5 * self.length + mi[a] as f64 * h;
        }
        x
    }

    /// Signed frequency indices `m` of FFT slot `idx`, each in `[-N/2, N/2)`.
    pub fn frequency_index(&self, idx: usize) -> [i64; 3] {
        let mi = self.multi_index(idx);
        let mut m = [0; 3];
        for a in 0..self.dim {
            m[a] = crate::fft::signed_index(mi[a], self.points);
        }
        m
    }

    /// Physical wavevector `2πm/L` of FFT slot `idx`.
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let m = self.frequency_index(idx);
        let s = self.frequency_step();
        [m[0] as f64 * s, m[1] as f64 * s, m[2] as f64 * s]
    }

    /// Wavevector with Nyquist components zeroed, used for odd multipliers
    /// such as derivatives so that real fields stay real.
    pub fn odd_wavevector(&self, idx: usize) -> [f64; 3] {
        let m = self.frequency_index(idx);
        let s = self.frequency_step();
        let half = (self.points / 2) as i64;
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            if m[a] != -half {
                k[a] = m[a] as f64 * s;
            }
        }
        k
    }

    pub fn same_as(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Samples of a scalar or vector field, stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
}

impl SampledField {
    pub fn zeros(grid: Grid, components: usize) -> SampledField {
        SampledField {
            grid,
            components,
            values: vec![0.0; components * grid.len()],
        }
    }

    pub fn scalar(grid: Grid, values: Vec<f64>) -> Result<SampledField> {
        SampledField::new(grid, 1, values)
    }

    pub fn new(grid: Grid, components: usize, values: Vec<f64>) -> Result<SampledField> {
        if components != 1 && components != grid.dim {
            return Err(Error::Profile(format!(
                "a field on a {}-d grid has 1 or {} components, got {components}",
                grid.dim, grid.dim
            )));
        }
        if values.len() != components * grid.len() {
            return Err(Error::Profile(format!(
                "expected {} values, got {}",
                components * grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Profile(format!("non-finite sample at index {i}")));
        }
        Ok(SampledField {
            grid,
            components,
            values,
        })
    }

    /// Builds a vector field from one scalar array per component.
    pub fn from_components(grid: Grid, comps: Vec<Vec<f64>>) -> Result<SampledField> {
        let c = comps.len();
        let values = comps.into_iter().flatten().collect();
        SampledField::new(grid, c, values)
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> SampledField {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        SampledField {
            grid,
            components: 1,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn is_scalar(&self) -> bool {
        self.components == 1
    }

    /// Pointwise absolute value, or Euclidean magnitude for vector fields.
    pub fn magnitude(&self) -> Vec<f64> {
        if self.components == 1 {
            return self.values.iter().map(|v| v.abs()).collect();
        }
        let n = self.grid.len();
        (0..n)
            .map(|i| {
                (0..self.components)
                    .map(|c| self.values[c * n + i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SampledField {
        SampledField {
            grid: self.grid,
            components: self.components,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> SampledField {
        self.map(|v| c * v)
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.components)
            .map(|c| self.component(c).iter().sum::<f64>() / self.grid.len() as f64)
            .collect()
    }

    /// The field with each component's mean removed.
    pub fn without_mean(&self) -> SampledField {
        let means = self.mean();
        let n = self.grid.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v - means[i / n])
            .collect();
        SampledField {
            grid: self.grid,
            components: self.components,
            values,
        }
    }

    pub fn sub(&self, other: &SampledField) -> Result<SampledField> {
        self.grid.same_as(&other.grid)?;
        if self.components != other.components {
            return Err(Error::GridMismatch("component counts differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(SampledField {
            grid: self.grid,
            components: self.components,
            values,
        })
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(self, p)
    }
}

/// Lebesgue norm `(Σ h^n |f|^p)^{1/p}`, or `max |f|` for `p = ∞`.
pub fn lp_norm(field: &SampledField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("lp_norm needs p >= 1, got {p}")));
    }
    Ok(lp_of_values(&field.magnitude(), field.grid.cell_measure(), p))
}

pub(crate) fn lp_of_values(mag: &[f64], cell: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return mag.iter().fold(0.0, |m, &v| m.max(v));
    }
    let peak = mag.iter().fold(0.0f64, |m, &v| m.max(v));
    if peak == 0.0 {
        return 0.0;
    }
    // Scale by the peak to keep large p from overflowing.
    let s: f64 = mag.iter().map(|&v| (v / peak).powf(p)).sum();
    peak * (s * cell).powf(1.0 / p)
}

/// Volume of the unit ball in dimension `n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => PI.powf(n as f64 / 2.0) / gamma_half_int(n + 2),
    }
}

// Γ(k/2) for positive integer k.
fn gamma_half_int(k: usize) -> f64 {
    match k {
        1 => PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half_int(k - 2),
    }
}

fn one() -> f64 {
    1.0
}

/// Analytic test functions with exact continuum descriptions.
///
/// Serialized as `{"family": ..., "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum AnalyticProfile {
    Zero,
    /// `A exp(-|x|²/w²)`.
    Gaussian {
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `A exp(1 - 1/(1 - |x|²/R²))` inside the ball of radius `R`.
    Bump {
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    BallIndicator {
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `A max(|x|, core)^{-exponent}` on `|x| <= truncation`.
    ///
    /// Without `core` the profile is capped at its value one cell away from
    /// the origin.
    PowerLaw {
        exponent: f64,
        #[serde(default)]
        truncation: Option<f64>,
        #[serde(default)]
        core: Option<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `A cos(k·x)`.
    PureMode {
        wavevector: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Random trigonometric sum over modes `spacing·m` with
    /// `shell[0] <= |spacing·m| <= shell[1]`, optionally windowed by
    /// `exp(-|x|²/envelope²)`.
    BandLimitedRandom {
        shell: [f64; 2],
        seed: u64,
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default)]
        envelope: Option<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

/// A profile together with an optional grid, as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    #[serde(flatten)]
    pub profile: AnalyticProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Profile(format!("{name} must be positive, got {v}")))
    }
}

// Lattice index of a physical frequency, or None if it is off the lattice.
fn lattice_index(k: f64, step: f64) -> Option<i64> {
    let r = k / step;
    let m = r.round();
    if (r - m).abs() <= 1e-9 * r.abs().max(1.0) {
        Some(m as i64)
    } else {
        None
    }
}

impl AnalyticProfile {
    pub fn family(&self) -> &'static str {
        match self {
            AnalyticProfile::Zero => "zero",
            AnalyticProfile::Gaussian { .. } => "gaussian",
            AnalyticProfile::Bump { .. } => "bump",
            AnalyticProfile::BallIndicator { .. } => "ball_indicator",
            AnalyticProfile::PowerLaw { .. } => "power_law",
            AnalyticProfile::PureMode { .. } => "pure_mode",
            AnalyticProfile::BandLimitedRandom { .. } => "band_limited_random",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnalyticProfile::Zero => Ok(()),
            AnalyticProfile::Gaussian { width, .. } => positive("width", *width),
            AnalyticProfile::Bump { radius, .. } | AnalyticProfile::BallIndicator { radius, .. } => {
                positive("radius", *radius)
            }
            AnalyticProfile::PowerLaw {
                exponent,
                truncation,
                core,
                ..
            } => {
                if !exponent.is_finite() {
                    return Err(Error::Profile("exponent must be finite".into()));
                }
                if let Some(r) = truncation {
                    positive("truncation", *r)?;
                }
                if let Some(c) = core {
                    positive("core", *c)?;
                }
                Ok(())
            }
            AnalyticProfile::PureMode { wavevector, .. } => {
                if wavevector.iter().all(|k| k.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Profile("wavevector must be finite".into()))
                }
            }
            AnalyticProfile::BandLimitedRandom {
                shell,
                spacing,
                envelope,
                ..
            } => {
                positive("spacing", *spacing)?;
                if !(shell[0] >= 0.0 && shell[1] >= shell[0] && shell[1].is_finite()) {
                    return Err(Error::Profile(format!("bad shell {shell:?}")));
                }
                if let Some(w) = envelope {
                    positive("envelope", *w)?;
                }
                Ok(())
            }
        }
    }

    /// Profile of `x ↦ u(λx)`.
    pub fn dilate(&self, lambda: f64) -> Result<AnalyticProfile> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain(format!("dilation factor must be positive, got {lambda}")));
        }
        Ok(match self.clone() {
            AnalyticProfile::Zero => AnalyticProfile::Zero,
            AnalyticProfile::Gaussian { width, amplitude } => AnalyticProfile::Gaussian {
                width: width / lambda,
                amplitude,
            },
            AnalyticProfile::Bump { radius, amplitude } => AnalyticProfile::Bump {
                radius: radius / lambda,
                amplitude,
            },
            AnalyticProfile::BallIndicator { radius, amplitude } => {
                AnalyticProfile::BallIndicator {
                    radius: radius / lambda,
                    amplitude,
                }
            }
            AnalyticProfile::PowerLaw {
                exponent,
                truncation,
                core,
                amplitude,
            } => AnalyticProfile::PowerLaw {
                exponent,
                truncation: truncation.map(|r| r / lambda),
                core: core.map(|c| c / lambda),
                amplitude: amplitude * lambda.powf(-exponent),
            },
            AnalyticProfile::PureMode {
                wavevector,
                amplitude,
            } => AnalyticProfile::PureMode {
                wavevector: wavevector.iter().map(|k| k * lambda).collect(),
                amplitude,
            },
            AnalyticProfile::BandLimitedRandom {
                shell,
                seed,
                spacing,
                envelope,
                amplitude,
            } => AnalyticProfile::BandLimitedRandom {
                shell: [shell[0] * lambda, shell[1] * lambda],
                seed,
                spacing: spacing * lambda,
                envelope: envelope.map(|w| w / lambda),
                amplitude,
            },
        })
    }

    /// Evaluates the profile at the cell centers of `grid`.
    pub fn sample(&self, grid: &Grid) -> Result<SampledField> {
        self.validate()?;
        let n = grid.dim;
        let norm = |x: [f64; 3]| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        match self {
            AnalyticProfile::Zero => Ok(SampledField::zeros(*grid, 1)),
            AnalyticProfile::Gaussian { width, amplitude } => Ok(SampledField::from_fn(
                *grid,
                |x| amplitude * (-(norm(x) / width).powi(2)).exp(),
            )),
            AnalyticProfile::Bump { radius, amplitude } => Ok(SampledField::from_fn(*grid, |x| {
                let r2 = (norm(x) / radius).powi(2);
                if r2 < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            })),
            AnalyticProfile::BallIndicator { radius, amplitude } => {
                Ok(SampledField::from_fn(*grid, |x| {
                    if norm(x) <= *radius {
                        *amplitude
                    } else {
                        0.0
                    }
                }))
            }
            AnalyticProfile::PowerLaw {
                exponent,
                truncation,
                core,
                amplitude,
            } => {
                match truncation {
                    Some(r) if *r > 0.5 * grid.length * (1.0 + 1e-12) => {
                        return Err(Error::Profile(format!(
                            "truncation {r} exceeds half the box side {}",
                            0.5 * grid.length
                        )));
                    }
                    None if *exponent >= n as f64 => {
                        return Err(Error::Profile(format!(
                            "|x|^-{exponent} is not integrable in dimension {n} without truncation"
                        )));
                    }
                    _ => {}
                }
                let c = core.unwrap_or_else(|| grid.spacing());
                let rmax = truncation.unwrap_or(f64::INFINITY);
                Ok(SampledField::from_fn(*grid, |x| {
                    let r = norm(x);
                    if r <= rmax {
                        amplitude * r.max(c).powf(-exponent)
                    } else {
                        0.0
                    }
                }))
            }
            AnalyticProfile::PureMode {
                wavevector,
                amplitude,
            } => {
                if wavevector.len() != n {
                    return Err(Error::Profile(format!(
                        "wavevector has {} components on a {n}-d grid",
                        wavevector.len()
                    )));
                }
                let mut m = [0i64; 3];
                for (a, k) in wavevector.iter().enumerate() {
                    m[a] = self.on_lattice(*k, grid)?;
                }
                Ok(place_modes(grid, &[(m, *amplitude, 0.0)]))
            }
            AnalyticProfile::BandLimitedRandom {
                shell,
                seed,
                spacing,
                envelope,
                amplitude,
            } => {
                let modes = shell_modes(n, *shell, *spacing);
                if modes.is_empty() {
                    return Err(Error::Profile(format!(
                        "no lattice modes of spacing {spacing} in shell {shell:?}"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let scale = amplitude / (modes.len() as f64).sqrt();
                let coeffs: Vec<([i64; 3], f64, f64)> = modes
                    .into_iter()
                    .map(|m| {
                        let a: f64 = rng.gen_range(-1.0..1.0);
                        let b: f64 = rng.gen_range(-1.0..1.0);
                        (m, scale * a, scale * b)
                    })
                    .collect();
                match envelope {
                    None => {
                        let ratio = self.on_lattice(*spacing, grid)?;
                        let placed: Vec<_> = coeffs
                            .iter()
                            .map(|(m, a, b)| ([m[0] * ratio, m[1] * ratio, m[2] * ratio], *a, *b))
                            .collect();
                        for (m, _, _) in &placed {
                            if m.iter().any(|&c| c.unsigned_abs() as usize >= grid.points / 2) {
                                return Err(Error::Profile(format!(
                                    "mode {m:?} reaches the Nyquist frequency"
                                )));
                            }
                        }
                        Ok(place_modes(grid, &placed))
                    }
                    Some(w) => Ok(SampledField::from_fn(*grid, |x| {
                        let s: f64 = coeffs
                            .iter()
                            .map(|(m, a, b)| {
                                let ph = spacing
                                    * (m[0] as f64 * x[0] + m[1] as f64 * x[1] + m[2] as f64 * x[2]);
                                a * ph.cos() + b * ph.sin()
                            })
                            .sum();
                        s * (-(norm(x) / w).powi(2)).exp()
                    })),
                }
            }
        }
    }

    fn on_lattice(&self, k: f64, grid: &Grid) -> Result<i64> {
        let m = lattice_index(k, grid.frequency_step()).ok_or_else(|| {
            Error::Profile(format!(
                "frequency {k} is off the lattice 2π/{}·Z",
                grid.length
            ))
        })?;
        if m.unsigned_abs() as usize >= grid.points / 2 {
            return Err(Error::Profile(format!(
                "frequency {k} is at or beyond the Nyquist frequency"
            )));
        }
        Ok(m)
    }

    /// Continuum distribution function `|{|u| > α}|` on ℝⁿ, when known.
    pub fn distribution(&self, n: usize, alpha: f64) -> Option<f64> {
        let w = unit_ball_volume(n);
        let nf = n as f64;
        match self {
            AnalyticProfile::Zero => Some(0.0),
            AnalyticProfile::Gaussian { width, amplitude } => {
                let a = amplitude.abs();
                if alpha >= a {
                    Some(0.0)
                } else if alpha <= 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some(w * (width * width * (a / alpha).ln()).powf(nf / 2.0))
                }
            }
            AnalyticProfile::BallIndicator { radius, amplitude } => {
                Some(if alpha < amplitude.abs() {
                    w * radius.powf(nf)
                } else {
                    0.0
                })
            }
            AnalyticProfile::PowerLaw {
                exponent,
                truncation,
                core,
                amplitude,
            } if *exponent > 0.0 => {
                let a = amplitude.abs();
                let c = core.unwrap_or(0.0);
                let rmax = truncation.unwrap_or(f64::INFINITY);
                if c > 0.0 && alpha >= a * c.powf(-exponent) {
                    return Some(0.0);
                }
                if alpha <= 0.0 {
                    return Some(w * rmax.powf(nf));
                }
                let rho = (a / alpha).powf(1.0 / exponent).min(rmax);
                Some(w * rho.powf(nf))
            }
            _ => None,
        }
    }

    /// Continuum decreasing rearrangement `u*(t)` on ℝⁿ, when known.
    pub fn rearrangement(&self, n: usize, t: f64) -> Option<f64> {
        let w = unit_ball_volume(n);
        let nf = n as f64;
        match self {
            AnalyticProfile::Zero => Some(0.0),
            AnalyticProfile::Gaussian { width, amplitude } => {
                Some(amplitude.abs() * (-(t / w).powf(2.0 / nf) / (width * width)).exp())
            }
            AnalyticProfile::BallIndicator { radius, amplitude } => {
                Some(if t < w * radius.powf(nf) {
                    amplitude.abs()
                } else {
                    0.0
                })
            }
            AnalyticProfile::PowerLaw {
                exponent,
                truncation,
                core,
                amplitude,
            } if *exponent > 0.0 => {
                let rmax = truncation.unwrap_or(f64::INFINITY);
                if t >= w * rmax.powf(nf) {
                    return Some(0.0);
                }
                let r = (t / w).powf(1.0 / nf).max(core.unwrap_or(0.0));
                Some(amplitude.abs() * r.powf(-exponent))
            }
            _ => None,
        }
    }
}

// Integer modes m with shell[0] <= spacing|m| <= shell[1], one per ±m pair.
fn shell_modes(n: usize, shell: [f64; 2], spacing: f64) -> Vec<[i64; 3]> {
    let r = (shell[1] / spacing).floor() as i64;
    let mut out = Vec::new();
    let range = |a: usize| if a < n { -r..=r } else { 0..=0 };
    for m0 in range(0) {
        for m1 in range(1) {
            for m2 in range(2) {
                let m = [m0, m1, m2];
                let first = m.iter().find(|&&c| c != 0);
                if !matches!(first, Some(&c) if c > 0) {
                    continue;
                }
                let k = spacing * ((m0 * m0 + m1 * m1 + m2 * m2) as f64).sqrt();
                if k >= shell[0] - 1e-12 && k <= shell[1] + 1e-12 {
                    out.push(m);
                }
            }
        }
    }
    out
}

// Synthesizes Σ a cos(k·x) + b sin(k·x) over lattice indices by one inverse FFT.
fn place_modes(grid: &Grid, modes: &[([i64; 3], f64, f64)]) -> SampledField {
    let total = grid.len();
    let mut spec = vec![Complex64::default(); total];
    let nn = grid.points;
    let idx = |m: &[i64; 3]| {
        let mut s = [0usize; 3];
        for a in 0..grid.dim {
            s[a] = slot(m[a], nn);
        }
        grid.flat_index(&s)
    };
    for (m, a, b) in modes {
        // Samples start at -L/2, which multiplies mode m by (-1)^{Σm}.
        let sign = if m.iter().sum::<i64>().rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        let c = Complex64::new(*a, -*b) * (0.5 * sign * total as f64);
        let neg = [-m[0], -m[1], -m[2]];
        if neg == *m {
            spec[idx(m)] += Complex64::new(*a, 0.0) * (sign * total as f64);
            continue;
        }
        spec[idx(m)] += c;
        spec[idx(&neg)] += c.conj();
    }
    FftNd::new(grid).inverse(&mut spec);
    SampledField {
        grid: *grid,
        components: 1,
        values: spec.iter().map(|z| z.re).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integral(f: &SampledField) -> f64 {
        f.values().iter().sum::<f64>() * f.grid().cell_measure()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0, 64, 1.0).is_err());
        assert!(Grid::new(4, 64, 1.0).is_err());
        assert!(Grid::new(2, 4, 1.0).is_err());
        assert!(Grid::new(2, 48, 1.0).is_err());
        assert!(Grid::new(2, 64, 0.0).is_err());
        let g = Grid::new(3, 16, 2.0).unwrap();
        assert_eq!(g.spacing() * 16.0, 2.0);
        assert!((g.cell_measure() * g.len() as f64 - g.volume()).abs() < 1e-12);
    }

    #[test]
    fn grid_json_roundtrip() {
        let g = Grid::new(2, 32, 6.0).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"n":2,"N":32,"L":6.0}"#);
        assert_eq!(serde_json::from_str::<Grid>(&s).unwrap(), g);
        assert!(serde_json::from_str::<Grid>(r#"{"n":2,"N":30,"L":6.0}"#).is_err());
    }

    #[test]
    fn zero_profile_samples_to_zeros() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let f = AnalyticProfile::Zero.sample(&g).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ball_volume_riemann_sum() {
        let g = Grid::new(3, 64, 8.0).unwrap();
        let f = AnalyticProfile::BallIndicator {
            radius: 1.0,
            amplitude: 1.0,
        }
        .sample(&g)
        .unwrap();
        let vol = integral(&f);
        assert!((vol / (4.0 * PI / 3.0) - 1.0).abs() < 0.02, "{vol}");
    }

    #[test]
    fn pure_mode_is_cosine_with_one_coefficient_pair() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let p = AnalyticProfile::PureMode {
            wavevector: vec![5.0, 0.0, 0.0],
            amplitude: 1.0,
        };
        let f = p.sample(&g).unwrap();
        for i in 0..g.len() {
            let x = g.coords(i);
            assert!((f.values()[i] - (5.0 * x[0]).cos()).abs() < 1e-12);
        }
        let mut spec = crate::fft::to_complex(f.values());
        FftNd::new(&g).forward(&mut spec);
        let nonzero: Vec<_> = (0..g.len()).filter(|&i| spec[i].norm() > 1e-8).collect();
        assert_eq!(nonzero.len(), 2);
        for i in nonzero {
            assert_eq!(g.frequency_index(i)[0].abs(), 5);
        }
    }

    #[test]
    fn off_lattice_wavevector_rejected() {
        let g = Grid::new(1, 16, 2.0 * PI).unwrap();
        let p = AnalyticProfile::PureMode {
            wavevector: vec![2.5],
            amplitude: 1.0,
        };
        assert!(matches!(p.sample(&g), Err(Error::Profile(_))));
    }

    #[test]
    fn nonintegrable_power_law_rejected() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let p = AnalyticProfile::PowerLaw {
            exponent: 2.0,
            truncation: None,
            core: None,
            amplitude: 1.0,
        };
        assert!(p.sample(&g).is_err());
        let too_wide = AnalyticProfile::PowerLaw {
            exponent: 1.0,
            truncation: Some(3.0),
            core: None,
            amplitude: 1.0,
        };
        assert!(too_wide.sample(&g).is_err());
    }

    #[test]
    fn dilation_examples() {
        let b = AnalyticProfile::BallIndicator {
            radius: 1.0,
            amplitude: 1.0,
        };
        assert_eq!(b.dilate(1.0).unwrap(), b);
        assert_eq!(
            b.dilate(2.0).unwrap(),
            AnalyticProfile::BallIndicator {
                radius: 0.5,
                amplitude: 1.0
            }
        );
        let g = AnalyticProfile::Gaussian {
            width: 1.0,
            amplitude: 1.0,
        };
        assert_eq!(
            g.dilate(0.5).unwrap(),
            AnalyticProfile::Gaussian {
                width: 2.0,
                amplitude: 1.0
            }
        );
        assert!(g.dilate(0.0).is_err());
    }

    #[test]
    fn dilation_matches_pointwise_composition() {
        let grid = Grid::new(2, 32, 8.0).unwrap();
        let lam = 1.7;
        let profiles = [
            AnalyticProfile::Bump {
                radius: 2.0,
                amplitude: 1.5,
            },
            AnalyticProfile::PowerLaw {
                exponent: 0.7,
                truncation: Some(3.0),
                core: Some(0.3),
                amplitude: 1.0,
            },
            AnalyticProfile::BandLimitedRandom {
                shell: [1.0, 3.0],
                seed: 3,
                spacing: 0.5,
                envelope: Some(2.0),
                amplitude: 1.0,
            },
        ];
        for p in profiles {
            let d = p.dilate(lam).unwrap().sample(&grid).unwrap();
            // Evaluate the original profile at λx on a grid scaled by λ.
            let big = Grid::new(2, 32, 8.0 * lam).unwrap();
            let u = p.sample(&big).unwrap();
            for (a, b) in d.values().iter().zip(u.values()) {
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{} {a} {b}", p.family());
            }
        }
    }

    #[test]
    fn gaussian_l2_norm() {
        let g = Grid::new(3, 64, 16.0).unwrap();
        let f = AnalyticProfile::Gaussian {
            width: 1.0,
            amplitude: 1.0,
        }
        .sample(&g)
        .unwrap();
        let exact = (PI / 2.0).powf(0.75);
        assert!((lp_norm(&f, 2.0).unwrap() / exact - 1.0).abs() < 0.02);
    }

    #[test]
    fn lp_norm_rejects_small_p_and_handles_indicator() {
        let g = Grid::new(1, 16, 4.0).unwrap();
        let f = SampledField::from_fn(g, |x| if x[0] >= 0.0 && x[0] < 1.0 { 1.0 } else { 0.0 });
        assert!(lp_norm(&f, 0.5).is_err());
        for p in [1.0, 2.0, 3.5] {
            assert!((lp_norm(&f, p).unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(lp_norm(&SampledField::zeros(g, 1), 2.0).unwrap(), 0.0);
    }

    #[test]
    fn band_limited_spectrum_stays_in_shell() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let p = AnalyticProfile::BandLimitedRandom {
            shell: [4.0, 7.0],
            seed: 11,
            spacing: 1.0,
            envelope: None,
            amplitude: 1.0,
        };
        let f = p.sample(&g).unwrap();
        let mut spec = crate::fft::to_complex(f.values());
        FftNd::new(&g).forward(&mut spec);
        for i in 0..g.len() {
            let k = g.wavevector(i);
            let r = (k[0] * k[0] + k[1] * k[1]).sqrt();
            if spec[i].norm() > 1e-8 {
                assert!((4.0 - 1e-9..=7.0 + 1e-9).contains(&r));
            }
        }
        assert_eq!(f, p.sample(&g).unwrap());
    }

    #[test]
    fn profile_json_shape() {
        let s = r#"{"family":"power_law","params":{"exponent":1.0,"truncation":2.0},"grid":{"n":3,"N":32,"L":4.0}}"#;
        let spec: ProfileSpec = serde_json::from_str(s).unwrap();
        assert_eq!(spec.grid.unwrap().dim, 3);
        assert!(matches!(spec.profile, AnalyticProfile::PowerLaw { amplitude, .. } if amplitude == 1.0));
        let back: ProfileSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn continuum_oracles_are_mutually_inverse() {
        let p = AnalyticProfile::PowerLaw {
            exponent: 1.0,
            truncation: None,
            core: None,
            amplitude: 1.0,
        };
        for t in [0.1, 1.0, 7.0] {
            let v = p.rearrangement(3, t).unwrap();
            assert!((p.distribution(3, v).unwrap() / t - 1.0).abs() < 1e-12);
        }
        let g = AnalyticProfile::Gaussian {
            width: 1.0,
            amplitude: 1.0,
        };
        for t in [0.1, 1.0, 7.0] {
            let v = g.rearrangement(3, t).unwrap();
            assert!((g.distribution(3, v).unwrap() / t - 1.0).abs() < 1e-12);
        }
    }
}
