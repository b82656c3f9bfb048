//! Fourier multipliers, the dyadic partition of unity, Littlewood-Paley
//! blocks and Bernstein-type measurements.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{to_complex, FftNd};
use crate::field::{lp_norm, Grid, SampledField};
use crate::rearrange::{LayerProfile, Variant};

/// Unnormalized forward transform of one scalar array.
pub(crate) fn forward(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut spec = to_complex(values);
    FftNd::new(grid).forward(&mut spec);
    spec
}

pub(crate) fn inverse_real(grid: &Grid, mut spec: Vec<Complex64>) -> Vec<f64> {
    FftNd::new(grid).inverse(&mut spec);
    spec.into_iter().map(|z| z.re).collect()
}

fn knorm(k: [f64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
}

/// Applies a per-mode multiplier to every component of `u`.
pub(crate) fn apply_multiplier(u: &SampledField, mult: &[Complex64]) -> SampledField {
    apply_to_spectra(u.grid(), &spectra(u), mult)
}

/// Forward transforms of every component.
pub(crate) fn spectra(u: &SampledField) -> Vec<Vec<Complex64>> {
    (0..u.components()).map(|c| forward(u.grid(), u.component(c))).collect()
}

pub(crate) fn apply_to_spectra(grid: &Grid, specs: &[Vec<Complex64>], mult: &[Complex64]) -> SampledField {
    let comps = specs
        .iter()
        .map(|spec| {
            let prod = spec.iter().zip(mult).map(|(z, m)| z * m).collect();
            inverse_real(grid, prod)
        })
        .collect();
    SampledField::from_components(*grid, comps).expect("multiplier output has the input shape")
}

pub(crate) fn radial_multiplier(grid: &Grid, f: impl Fn(f64) -> f64) -> Vec<Complex64> {
    (0..grid.len())
        .map(|i| Complex64::new(f(knorm(grid.wavevector(i))), 0.0))
        .collect()
}

/// `Λ^s u`, the multiplier `|ξ|^s` with the zero mode set to zero.
pub fn fractional_laplacian(u: &SampledField, s: f64) -> Result<SampledField> {
    fractional_laplacian_flagged(u, s).map(|(f, _)| f)
}

/// As [`fractional_laplacian`], also reporting whether a negative power
/// discarded a non-negligible mean.
pub fn fractional_laplacian_flagged(u: &SampledField, s: f64) -> Result<(SampledField, bool)> {
    let n = u.grid().dim as f64;
    if !s.is_finite() || s <= -n {
        return Err(Error::Domain(format!(
            "Λ^s needs -{n} < s < ∞, got {s}"
        )));
    }
    let mult = radial_multiplier(u.grid(), |r| if r == 0.0 { 0.0 } else { r.powf(s) });
    let out = apply_multiplier(u, &mult);
    let peak = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mean_lost = s < 0.0 && u.mean().iter().any(|m| m.abs() > 1e-8 * peak.max(f64::MIN_POSITIVE));
    Ok((out, mean_lost))
}

/// `∂^α u` by the multiplier `(iξ)^α`, Nyquist components zeroed.
pub fn derivative(u: &SampledField, alpha: &[usize]) -> Result<SampledField> {
    let grid = u.grid();
    if alpha.len() != grid.dim {
        return Err(Error::Domain(format!(
            "multi-index has {} entries on a {}-d grid",
            alpha.len(),
            grid.dim
        )));
    }
    let mult: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let k = grid.odd_wavevector(i);
            alpha
                .iter()
                .enumerate()
                .fold(Complex64::new(1.0, 0.0), |acc, (a, &e)| {
                    acc * Complex64::new(0.0, k[a]).powu(e as u32)
                })
        })
        .collect();
    Ok(apply_multiplier(u, &mult))
}

/// All multi-indices of total order `k` in dimension `n`.
pub fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![k]];
    }
    (0..=k)
        .rev()
        .flat_map(|first| {
            multi_indices(n - 1, k - first).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// Gradient of a scalar field as an `n`-component field.
pub fn gradient(u: &SampledField) -> Result<SampledField> {
    let n = u.grid().dim;
    let comps = (0..n)
        .map(|a| {
            let mut alpha = vec![0; n];
            alpha[a] = 1;
            derivative(u, &alpha).map(|f| f.into_values())
        })
        .collect::<Result<Vec<_>>>()?;
    SampledField::from_components(*u.grid(), comps)
}

/// Periodic convolution `Σ_y f(x-y) g(y) h^n`.
pub fn convolve(f: &SampledField, g: &SampledField) -> Result<SampledField> {
    f.grid().same_as(g.grid())?;
    if !f.is_scalar() || !g.is_scalar() {
        return Err(Error::Domain("convolution takes scalar fields".into()));
    }
    let grid = *f.grid();
    let a = forward(&grid, f.values());
    let b = forward(&grid, g.values());
    let w = grid.cell_measure();
    // Samples start at -L/2, so the index-space product is shifted by half
    // a period along each axis; the factor (-1)^{Σm} undoes it.
    let prod = a
        .iter()
        .zip(&b)
        .enumerate()
        .map(|(i, (x, y))| {
            let m = grid.frequency_index(i);
            let sign = if (m[0] + m[1] + m[2]).rem_euclid(2) == 0 { w } else { -w };
            x * y * sign
        })
        .collect();
    SampledField::scalar(grid, inverse_real(&grid, prod))
}

/// `L^n Σ_{m≠0} |û_m / N^n|²`, which equals `‖u - mean‖₂²`.
pub fn parseval_energy(u: &SampledField) -> f64 {
    let grid = u.grid();
    let total = grid.len() as f64;
    (0..u.components())
        .map(|c| {
            forward(grid, u.component(c))
                .iter()
                .skip(1)
                .map(|z| (z / total).norm_sqr())
                .sum::<f64>()
        })
        .sum::<f64>()
        * grid.volume()
}

// Smooth step: 0 for x <= 0, 1 for x >= 1.
fn smooth_step(x: f64) -> f64 {
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = psi(x);
    let b = psi(1.0 - x);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Radial cutoffs of the dyadic partition of unity.
///
/// `ϱ = 1` on `|ξ| <= 1` and `0` on `|ξ| >= 4/3`; `φ(ξ) = ϱ(ξ/2) - ϱ(ξ)`
/// lives on `1 < |ξ| < 8/3` and equals one on `[4/3, 2]`.
pub struct DyadicPartition;

impl DyadicPartition {
    pub const SHELL_INNER: f64 = 0.75;
    pub const SHELL_OUTER: f64 = 8.0 / 3.0;
    pub const BALL_RADIUS: f64 = 4.0 / 3.0;

    pub fn rho(r: f64) -> f64 {
        1.0 - smooth_step(3.0 * (r - 1.0))
    }

    pub fn phi(r: f64) -> f64 {
        Self::rho(0.5 * r) - Self::rho(r)
    }

    /// Indices `j` for which some nonzero lattice frequency meets the
    /// support of `φ(2^{-j}·)`.
    pub fn homogeneous_range(grid: &Grid) -> (i32, i32) {
        let (lo, hi) = lattice_extent(grid);
        let radii = lattice_radii(grid);
        let mut jmin = lo.log2().floor() as i32 - 3;
        while !shell_meets(&radii, jmin) {
            jmin += 1;
        }
        let mut jmax = hi.log2().ceil() as i32 + 1;
        while !shell_meets(&radii, jmax) {
            jmax -= 1;
        }
        (jmin, jmax)
    }

    /// Largest nonhomogeneous index needed for `S_{J+1} = 1` on the lattice.
    pub fn nonhomogeneous_top(grid: &Grid) -> i32 {
        let (_, hi) = lattice_extent(grid);
        (hi.log2().ceil() as i32 - 1).max(-1)
    }

    /// Largest deviations from `ϱ + Σ_{j≥0} φ_j = 1` and `Σ_j φ_j = 1` over the
    /// lattice of `grid`.
    pub fn identity_errors(grid: &Grid) -> (f64, f64) {
        let (jmin, jmax) = Self::homogeneous_range(grid);
        let top = Self::nonhomogeneous_top(grid);
        let mut nonhom = 0.0f64;
        let mut hom = 0.0f64;
        for i in 0..grid.len() {
            let r = knorm(grid.wavevector(i));
            let s: f64 = Self::rho(r) + (0..=top).map(|j| Self::phi(r / 2f64.powi(j))).sum::<f64>();
            nonhom = nonhom.max((s - 1.0).abs());
            if r > 0.0 {
                let s: f64 = (jmin..=jmax).map(|j| Self::phi(r / 2f64.powi(j))).sum();
                hom = hom.max((s - 1.0).abs());
            }
        }
        (nonhom, hom)
    }
}

fn lattice_extent(grid: &Grid) -> (f64, f64) {
    let lo = grid.frequency_step();
    let hi = (grid.dim as f64).sqrt() * std::f64::consts::PI / grid.spacing();
    (lo, hi)
}

/// Distinct nonzero wavevector lengths on the lattice, ascending. Lengths only
/// depend on `|m_a|`, and every `|m_a| <= N/2` occurs.
fn lattice_radii(grid: &Grid) -> Vec<f64> {
    let half = (grid.points / 2) as i64;
    let step = grid.frequency_step();
    let mut seen = std::collections::BTreeMap::new();
    let count = (half + 1).pow(grid.dim as u32);
    for c in 0..count {
        let mut m = [0i64; 3];
        let mut rest = c;
        for slot in m.iter_mut().take(grid.dim) {
            *slot = rest % (half + 1);
            rest /= half + 1;
        }
        let sq = m[0] * m[0] + m[1] * m[1] + m[2] * m[2];
        if sq > 0 {
            seen.entry(sq).or_insert_with(|| {
                knorm([m[0] as f64 * step, m[1] as f64 * step, m[2] as f64 * step])
            });
        }
    }
    seen.into_values().collect()
}

fn shell_meets(radii: &[f64], j: i32) -> bool {
    let s = 2f64.powi(j);
    let start = radii.partition_point(|&r| r < s);
    radii[start..]
        .iter()
        .take_while(|&&r| r <= s * 8.0 / 3.0)
        .any(|&r| DyadicPartition::phi(r / s) > 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionMode {
    /// Blocks `Δ̇_j = φ(2^{-j}D)` over every resolvable `j ∈ ℤ`.
    Homogeneous,
    /// `Δ_{-1} = ϱ(D)` and `Δ_j = φ(2^{-j}D)` for `j >= 0`.
    Nonhomogeneous,
}

#[derive(Clone, Debug)]
pub struct DyadicBlock {
    pub j: i32,
    pub field: SampledField,
}

#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    pub mode: DecompositionMode,
    pub blocks: Vec<DyadicBlock>,
    /// Per-component mean, which homogeneous blocks do not carry.
    pub mean: Vec<f64>,
    /// `L²` norm of `u` minus the reconstruction.
    pub residual: f64,
    /// The `j` interval the lattice resolves.
    pub j_range: (i32, i32),
}

/// The multiplier of block `j`.
pub fn block_multiplier(grid: &Grid, j: i32, mode: DecompositionMode) -> Vec<Complex64> {
    if mode == DecompositionMode::Nonhomogeneous && j == -1 {
        return radial_multiplier(grid, DyadicPartition::rho);
    }
    if mode == DecompositionMode::Nonhomogeneous && j < -1 {
        return vec![Complex64::default(); grid.len()];
    }
    let s = 2f64.powi(j);
    radial_multiplier(grid, |r| DyadicPartition::phi(r / s))
}

/// One Littlewood-Paley block of `u`.
pub fn block(u: &SampledField, j: i32, mode: DecompositionMode) -> SampledField {
    apply_multiplier(u, &block_multiplier(u.grid(), j, mode))
}

/// `S_Q u = ϱ(2^{-Q}D) u`, the nonhomogeneous low-pass filter.
pub fn low_pass(u: &SampledField, q: i32) -> SampledField {
    let s = 2f64.powi(q);
    apply_multiplier(u, &radial_multiplier(u.grid(), |r| DyadicPartition::rho(r / s)))
}

pub fn decompose(u: &SampledField, mode: DecompositionMode) -> DyadicDecomposition {
    let grid = *u.grid();
    let j_range = match mode {
        DecompositionMode::Homogeneous => DyadicPartition::homogeneous_range(&grid),
        DecompositionMode::Nonhomogeneous => (-1, DyadicPartition::nonhomogeneous_top(&grid)),
    };
    let specs = spectra(u);
    let blocks: Vec<DyadicBlock> = (j_range.0..=j_range.1)
        .into_par_iter()
        .map(|j| DyadicBlock {
            j,
            field: apply_to_spectra(&grid, &specs, &block_multiplier(&grid, j, mode)),
        })
        .collect();
    let mean = match mode {
        DecompositionMode::Homogeneous => u.mean(),
        DecompositionMode::Nonhomogeneous => vec![0.0; u.components()],
    };
    let len = grid.len();
    let mut recon: Vec<f64> = (0..u.values().len()).map(|i| mean[i / len]).collect();
    for b in &blocks {
        for (r, v) in recon.iter_mut().zip(b.field.values()) {
            *r += v;
        }
    }
    let diff: Vec<f64> = recon.iter().zip(u.values()).map(|(a, b)| a - b).collect();
    let residual = crate::field::lp_of_values(
        &diff.iter().map(|v| v.abs()).collect::<Vec<_>>(),
        grid.cell_measure(),
        2.0,
    );
    DyadicDecomposition {
        mode,
        blocks,
        mean,
        residual,
        j_range,
    }
}

impl DyadicDecomposition {
    pub fn block(&self, j: i32) -> Option<&SampledField> {
        self.blocks.iter().find(|b| b.j == j).map(|b| &b.field)
    }

    /// Per-block `L²` norms.
    pub fn energies(&self) -> Vec<(i32, f64)> {
        self.blocks
            .iter()
            .map(|b| (b.j, lp_norm(&b.field, 2.0).unwrap_or(0.0)))
            .collect()
    }

    /// Per-block `L²` norms as a text table.
    pub fn energy_table(&self) -> String {
        let mut out = String::from("j\tl2\n");
        for (j, e) in self.energies() {
            out.push_str(&format!("{j}\t{e}\n"));
        }
        out
    }

    /// `Σ_{k <= j-1}` of the blocks (plus the mean in homogeneous mode).
    pub fn partial_sum(&self, j: i32) -> SampledField {
        let first = &self.blocks[0].field;
        let len = first.grid().len();
        let mut acc: Vec<f64> = (0..first.values().len()).map(|i| self.mean[i / len]).collect();
        for b in self.blocks.iter().filter(|b| b.j < j) {
            for (a, v) in acc.iter_mut().zip(b.field.values()) {
                *a += v;
            }
        }
        SampledField::new(*first.grid(), first.components(), acc).expect("same shape")
    }
}

/// Which Bernstein-type inequality to measure, with its norm indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BernsteinKind {
    /// `sup ‖∂^α u‖_∞ <= C λ^{k+n/p} ‖u‖_{p,∞}`, spectrum in `λB`.
    BallSup { p: f64 },
    /// `sup ‖∂^α u‖_{q,1} <= C λ^{k+n(1/p-1/q)} ‖u‖_{p,∞}`, spectrum in `λB`.
    BallSmoothing { p: f64, q: f64 },
    /// `sup ‖∂^α u‖_{q,l} <= C λ^k ‖u‖_{q,l}`, spectrum in `λB`.
    SameExponent { q: f64, l: f64 },
    /// Both directions of the previous bound, spectrum in the shell `λC`.
    ShellTwoSided { q: f64, l: f64 },
}

/// Geometry of the spectral support premise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinGeometry {
    pub ball_radius: f64,
    pub shell: [f64; 2],
}

impl Default for BernsteinGeometry {
    fn default() -> Self {
        BernsteinGeometry {
            ball_radius: 1.0,
            shell: [DyadicPartition::SHELL_INNER, DyadicPartition::SHELL_OUTER],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    /// `sup_{|α|=k} ‖∂^α u‖` in the left-hand norm.
    pub derivative_norm: f64,
    /// `‖u‖` in the right-hand norm.
    pub base_norm: f64,
    /// The power of `λ` on the right-hand side.
    pub lambda_power: f64,
    /// `derivative_norm / base_norm`.
    pub raw_ratio: f64,
    /// `derivative_norm / (λ^power base_norm)`.
    pub ratio: f64,
    /// `λ^k base_norm / derivative_norm`, shell kind only.
    pub reverse_ratio: Option<f64>,
}

fn lorentz_of(field: &SampledField, p: f64, q: f64) -> Result<f64> {
    let prof = LayerProfile::from_values(&field.magnitude(), field.grid().cell_measure());
    prof.lorentz_norm(p, q, Variant::Plain)
}

/// Measures the constants of a Bernstein-type inequality on `u`.
pub fn bernstein_check(
    u: &SampledField,
    order: usize,
    lambda: f64,
    kind: BernsteinKind,
    geometry: BernsteinGeometry,
) -> Result<BernsteinReport> {
    if !u.is_scalar() {
        return Err(Error::Domain("Bernstein checks take scalar fields".into()));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("λ must be positive, got {lambda}")));
    }
    let grid = *u.grid();
    let n = grid.dim as f64;
    let (lo, hi) = match kind {
        BernsteinKind::ShellTwoSided { .. } => (lambda * geometry.shell[0], lambda * geometry.shell[1]),
        _ => (0.0, lambda * geometry.ball_radius),
    };
    let spec = forward(&grid, u.values());
    let peak = spec.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut offending = Vec::new();
    for (i, z) in spec.iter().enumerate() {
        if z.norm() > 1e-10 * peak {
            let r = knorm(grid.wavevector(i));
            if r > hi * (1.0 + 1e-12) || r < lo * (1.0 - 1e-12) {
                let m = grid.frequency_index(i);
                offending.push(m[..grid.dim].to_vec());
            }
        }
    }
    if !offending.is_empty() {
        offending.truncate(32);
        return Err(Error::Support { modes: offending });
    }
    let k = order as f64;
    let (lhs_norm, rhs_norm, power): (Box<dyn Fn(&SampledField) -> Result<f64>>, Box<dyn Fn(&SampledField) -> Result<f64>>, f64) =
        match kind {
            BernsteinKind::BallSup { p } => {
                if p <= 1.0 {
                    return Err(Error::Domain(format!("needs 1 < p <= ∞, got {p}")));
                }
                let pw = if p.is_infinite() { k } else { k + n / p };
                (
                    Box::new(|f| lp_norm(f, f64::INFINITY)),
                    Box::new(move |f| lorentz_of(f, p, f64::INFINITY)),
                    pw,
                )
            }
            BernsteinKind::BallSmoothing { p, q } => {
                if !(1.0 < p && p < q && q.is_finite()) {
                    return Err(Error::Domain(format!("needs 1 < p < q < ∞, got p={p}, q={q}")));
                }
                (
                    Box::new(move |f| lorentz_of(f, q, 1.0)),
                    Box::new(move |f| lorentz_of(f, p, f64::INFINITY)),
                    k + n * (1.0 / p - 1.0 / q),
                )
            }
            BernsteinKind::SameExponent { q, l } | BernsteinKind::ShellTwoSided { q, l } => {
                if !(q > 1.0 && q.is_finite() && l > 0.0) {
                    return Err(Error::Domain(format!("needs 1 < q < ∞ and l > 0, got q={q}, l={l}")));
                }
                (
                    Box::new(move |f| lorentz_of(f, q, l)),
                    Box::new(move |f| lorentz_of(f, q, l)),
                    k,
                )
            }
        };
    let mut derivative_norm = 0.0f64;
    for alpha in multi_indices(grid.dim, order) {
        let d = derivative(u, &alpha)?;
        derivative_norm = derivative_norm.max(lhs_norm(&d)?);
    }
    let base_norm = rhs_norm(u)?;
    let scale = lambda.powf(power);
    let reverse_ratio = match kind {
        BernsteinKind::ShellTwoSided { .. } => Some(lambda.powf(k) * base_norm / derivative_norm),
        _ => None,
    };
    Ok(BernsteinReport {
        derivative_norm,
        base_norm,
        lambda_power: power,
        raw_ratio: derivative_norm / base_norm,
        ratio: derivative_norm / (scale * base_norm),
        reverse_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticProfile;
    use std::f64::consts::PI;

    fn mode(grid: &Grid, k: Vec<f64>) -> SampledField {
        AnalyticProfile::PureMode {
            wavevector: k,
            amplitude: 1.0,
        }
        .sample(grid)
        .unwrap()
    }

    fn random(grid: &Grid, shell: [f64; 2], seed: u64) -> SampledField {
        AnalyticProfile::BandLimitedRandom {
            shell,
            seed,
            spacing: grid.frequency_step(),
            envelope: None,
            amplitude: 1.0,
        }
        .sample(grid)
        .unwrap()
    }

    fn max_diff(a: &SampledField, b: &SampledField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn fractional_laplacian_of_mode() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let u = mode(&g, vec![3.0, 4.0]);
        let out = fractional_laplacian(&u, 0.7).unwrap();
        assert!(max_diff(&out, &u.scale(5f64.powf(0.7))) < 1e-12);
        let zero = fractional_laplacian(&u.map(|v| v + 2.0), 0.0).unwrap();
        assert!(max_diff(&zero, &u) < 1e-12);
        assert!(fractional_laplacian(&u, -2.0).is_err());
        let (_, flag) = fractional_laplacian_flagged(&u.map(|v| v + 2.0), -0.5).unwrap();
        assert!(flag);
    }

    #[test]
    fn multiplier_composition() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let u = random(&g, [1.0, 10.0], 4);
        let a = fractional_laplacian(&fractional_laplacian(&u, 0.6).unwrap(), 1.1).unwrap();
        let b = fractional_laplacian(&u, 1.7).unwrap();
        let scale = b.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_diff(&a, &b) < 1e-12 * scale);
    }

    #[test]
    fn derivative_of_mode() {
        let g = Grid::new(1, 16, 2.0 * PI).unwrap();
        let u = mode(&g, vec![3.0]);
        let d = derivative(&u, &[1]).unwrap();
        for i in 0..g.len() {
            let x = g.coords(i)[0];
            assert!((d.values()[i] + 3.0 * (3.0 * x).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(multi_indices(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(multi_indices(3, 1).len(), 3);
        assert_eq!(multi_indices(3, 2).len(), 6);
    }

    #[test]
    fn convolution_examples() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let u = random(&g, [1.0, 5.0], 1);
        let cell = g.cell_measure();
        let mut delta = vec![0.0; g.len()];
        delta[g.flat_index(&[8, 8])] = 1.0 / cell;
        let d = SampledField::scalar(g, delta).unwrap();
        assert!(max_diff(&convolve(&u, &d).unwrap(), &u) < 1e-12);

        let mut a = vec![0.0; g.len()];
        let mut b = vec![0.0; g.len()];
        a[g.flat_index(&[1, 2])] = 1.0;
        b[g.flat_index(&[3, 0])] = 1.0;
        let c = convolve(
            &SampledField::scalar(g, a).unwrap(),
            &SampledField::scalar(g, b).unwrap(),
        )
        .unwrap();
        for i in 0..g.len() {
            let expect = if i == g.flat_index(&[12, 10]) { cell } else { 0.0 };
            assert!((c.values()[i] - expect).abs() < 1e-14);
        }
        let other = Grid::new(2, 32, 4.0).unwrap();
        assert!(convolve(&u, &SampledField::zeros(other, 1)).is_err());
    }

    #[test]
    fn gaussian_convolution_identity() {
        // e^{-|x|²} * e^{-|x|²} = (π/2)^{n/2} e^{-|x|²/2}.
        let g = Grid::new(2, 64, 16.0).unwrap();
        let u = AnalyticProfile::Gaussian {
            width: 1.0,
            amplitude: 1.0,
        }
        .sample(&g)
        .unwrap();
        let c = convolve(&u, &u).unwrap();
        let exact = AnalyticProfile::Gaussian {
            width: 2f64.sqrt(),
            amplitude: PI / 2.0,
        }
        .sample(&g)
        .unwrap();
        assert!(max_diff(&c, &exact) < 0.02 * PI / 2.0);
    }

    #[test]
    fn partition_identities_hold_on_lattice() {
        for (n, pts, l) in [(1, 64, 2.0 * PI), (2, 64, 16.0), (3, 16, 3.0)] {
            let g = Grid::new(n, pts, l).unwrap();
            let (a, b) = DyadicPartition::identity_errors(&g);
            assert!(a < 1e-10 && b < 1e-10, "{a} {b}");
        }
        assert_eq!(DyadicPartition::rho(1.0), 1.0);
        assert_eq!(DyadicPartition::rho(4.0 / 3.0), 0.0);
        assert_eq!(DyadicPartition::phi(1.5), 1.0);
        assert_eq!(DyadicPartition::phi(0.9), 0.0);
        assert_eq!(DyadicPartition::phi(8.0 / 3.0), 0.0);
    }

    #[test]
    fn single_mode_in_shell_core_hits_one_block() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        // |k| = 6 sits where φ(2^{-2}·) = 1.
        let u = mode(&g, vec![6.0, 0.0]);
        let d = decompose(&u, DecompositionMode::Homogeneous);
        for b in &d.blocks {
            let e = lp_norm(&b.field, 2.0).unwrap();
            if b.j == 2 {
                assert!((e - lp_norm(&u, 2.0).unwrap()).abs() < 1e-10);
            } else {
                assert!(e < 1e-12, "block {} has energy {e}", b.j);
            }
        }
    }

    #[test]
    fn constant_field_has_no_homogeneous_blocks() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let u = SampledField::from_fn(g, |_| 3.0);
        let d = decompose(&u, DecompositionMode::Homogeneous);
        assert!(d.blocks.iter().all(|b| lp_norm(&b.field, 2.0).unwrap() < 1e-12));
        assert!(d.residual < 1e-12);
    }

    #[test]
    fn decomposition_reconstructs() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let u = random(&g, [1.0, 30.0], 9).map(|v| v + 0.3);
        for mode in [DecompositionMode::Homogeneous, DecompositionMode::Nonhomogeneous] {
            let d = decompose(&u, mode);
            assert!(d.residual < 1e-10, "{mode:?} {}", d.residual);
            let top = d.j_range.1 + 1;
            assert!(max_diff(&d.partial_sum(top), &u) < 1e-10);
        }
    }

    #[test]
    fn far_blocks_are_orthogonal_and_commute_with_lambda() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let u = random(&g, [1.0, 30.0], 2);
        let d = decompose(&u, DecompositionMode::Homogeneous);
        for a in &d.blocks {
            for b in &d.blocks {
                if (a.j - b.j).abs() >= 2 {
                    let ip: f64 = a.field.values().iter().zip(b.field.values()).map(|(x, y)| x * y).sum();
                    assert!(ip.abs() < 1e-10);
                }
            }
            let lhs = fractional_laplacian(&a.field, 0.8).unwrap();
            let rhs = block(&fractional_laplacian(&u, 0.8).unwrap(), a.j, DecompositionMode::Homogeneous);
            assert!(lp_norm(&lhs.sub(&rhs).unwrap(), 2.0).unwrap() < 1e-12);
        }
    }

    #[test]
    fn parseval() {
        let g = Grid::new(3, 16, 3.0).unwrap();
        let u = SampledField::from_fn(g, |x| (x[0] * 2.0).sin() + x[1] * x[2] + 0.5);
        let a = lp_norm(&u.without_mean(), 2.0).unwrap().powi(2);
        assert!((parseval_energy(&u) - a).abs() < 1e-12 * a);
    }

    #[test]
    fn bernstein_same_exponent_on_mode() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let u = mode(&g, vec![5.0, 0.0, 0.0]);
        let r = bernstein_check(
            &u,
            1,
            5.0,
            BernsteinKind::SameExponent { q: 2.0, l: 2.0 },
            BernsteinGeometry::default(),
        )
        .unwrap();
        assert!((r.raw_ratio - 5.0).abs() < 1e-12);
        assert!((r.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bernstein_rejects_support_violation() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let u = mode(&g, vec![5.0, 0.0]);
        let err = bernstein_check(
            &u,
            1,
            2.0,
            BernsteinKind::SameExponent { q: 2.0, l: 2.0 },
            BernsteinGeometry::default(),
        )
        .unwrap_err();
        match err {
            Error::Support { modes } => assert!(modes.contains(&vec![5, 0]) && modes.contains(&vec![-5, 0])),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bernstein_shell_two_sided_on_mode() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let u = mode(&g, vec![3.0, 0.0]);
        let r = bernstein_check(
            &u,
            1,
            2.0,
            BernsteinKind::ShellTwoSided { q: 2.0, l: 2.0 },
            BernsteinGeometry::default(),
        )
        .unwrap();
        let rev = r.reverse_ratio.unwrap();
        assert!((r.ratio * rev - 1.0).abs() < 1e-12);
        assert!((r.ratio - 1.5).abs() < 1e-12);
    }
}
