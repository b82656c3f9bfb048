//! Energy-flux diagnostics for incompressible velocity fields on the periodic
//! cube: Leray projection, the filtered flux `Π_Q`, its dyadic bound, the
//! block interpolation step and the time-space norms of the energy-equality
//! criteria evaluated on snapshot trajectories.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{lp_norm, AnalyticProfile, Grid, SampledField};
use crate::inequalities::{exponent_map, Assignment, ExponentRelation};
use crate::rearrange::{time_lorentz_norm, LayerProfile, Variant};
use crate::spectral::{
    decompose, forward, fractional_laplacian, gradient, inverse_real, spectra, DecompositionMode, DyadicPartition,
};

/// Largest spectral divergence left by [`leray_project`].
pub const DIV_TOLERANCE: f64 = 1e-10;

/// Divergence accepted by [`VelocityField::new`], relative to `max |k||v̂(k)|`.
pub const SOLENOIDAL_LIMIT: f64 = 1e-8;

fn check_shape(w: &SampledField) -> Result<()> {
    if w.grid().dim != 3 || w.components() != 3 {
        return Err(Error::Domain(format!(
            "velocity fields have 3 components on a 3-d grid, got {} on a {}-d grid",
            w.components(),
            w.grid().dim
        )));
    }
    Ok(())
}

/// Modes touching the Nyquist plane have no real-symmetric projection and
/// are dropped.
fn interior(grid: &Grid, i: usize) -> bool {
    let half = -((grid.points / 2) as i64);
    let m = grid.frequency_index(i);
    m.iter().take(3).all(|&c| c != half)
}

/// `(max |k·v̂(k)|, max |k||v̂(k)|)`, both per Fourier coefficient.
fn divergence_stats(grid: &Grid, specs: &[Vec<Complex64>]) -> (f64, f64) {
    let len = grid.len() as f64;
    let mut div = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..grid.len() {
        let k = grid.odd_wavevector(i);
        let z: Complex64 = (0..3).map(|a| specs[a][i] * k[a]).sum();
        let amp = (0..3).map(|a| specs[a][i].norm_sqr()).sum::<f64>().sqrt();
        let kk = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        div = div.max(z.norm() / len);
        scale = scale.max(kk * amp / len);
    }
    (div, scale)
}

/// A divergence-free three-component field on a 3-d grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    field: SampledField,
    divergence: f64,
}

impl VelocityField {
    /// Wraps `field` after checking it is divergence-free.
    pub fn new(field: SampledField) -> Result<VelocityField> {
        check_shape(&field)?;
        let (divergence, scale) = divergence_stats(field.grid(), &spectra(&field));
        if divergence > DIV_TOLERANCE && divergence > SOLENOIDAL_LIMIT * scale {
            return Err(Error::Domain(format!(
                "field is not divergence-free: max |k·v̂| = {divergence:.3e} against scale {scale:.3e}"
            )));
        }
        Ok(VelocityField { field, divergence })
    }

    pub fn field(&self) -> &SampledField {
        &self.field
    }

    pub fn into_field(self) -> SampledField {
        self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    /// Largest Fourier coefficient of `div v`.
    pub fn divergence(&self) -> f64 {
        self.divergence
    }

    pub fn scale(&self, c: f64) -> VelocityField {
        VelocityField {
            field: self.field.scale(c),
            divergence: self.divergence * c.abs(),
        }
    }
}

/// `v̂(k) = (I − kkᵀ/|k|²) ŵ(k)`; the zero mode and Nyquist planes are zeroed.
pub fn leray_project(w: &SampledField) -> Result<VelocityField> {
    check_shape(w)?;
    let grid = *w.grid();
    let specs = spectra(w);
    let mut out = vec![vec![Complex64::default(); grid.len()]; 3];
    for i in 1..grid.len() {
        if !interior(&grid, i) {
            continue;
        }
        let k = grid.wavevector(i);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let dot: Complex64 = (0..3).map(|a| specs[a][i] * k[a]).sum();
        for a in 0..3 {
            out[a][i] = specs[a][i] - dot * (k[a] / k2);
        }
    }
    let (divergence, _) = divergence_stats(&grid, &out);
    let comps = out.into_iter().map(|s| inverse_real(&grid, s)).collect();
    Ok(VelocityField {
        field: SampledField::from_components(grid, comps)?,
        divergence,
    })
}

fn kept_by_two_thirds(grid: &Grid, i: usize) -> bool {
    let n = grid.points as i64;
    let m = grid.frequency_index(i);
    m.iter().take(grid.dim).all(|&c| 3 * c.abs() < n)
}

/// Two-thirds rule: keeps modes with `3|m_a| < N` on every axis.
pub fn dealias(v: &SampledField) -> SampledField {
    let grid = *v.grid();
    let comps = spectra(v)
        .into_iter()
        .map(|mut s| {
            for (i, z) in s.iter_mut().enumerate() {
                if !kept_by_two_thirds(&grid, i) {
                    *z = Complex64::default();
                }
            }
            inverse_real(&grid, s)
        })
        .collect();
    SampledField::from_components(grid, comps).expect("same shape")
}

/// `Σ_k 2^k n_k³ 2^{−2|k−Q|/3}` over `(k, n_k)` pairs.
pub fn dyadic_bound_from_norms(norms: &[(i32, f64)], q: i32) -> f64 {
    norms
        .iter()
        .map(|&(k, n)| 2f64.powi(k) * n.powi(3) * 2f64.powf(-2.0 * (k - q).abs() as f64 / 3.0))
        .sum()
}

/// Flux and dyadic bound at one filter index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxRow {
    pub q: i32,
    pub flux: f64,
    pub bound: f64,
}

/// Shared spectral data for evaluating `Π_Q` and its bound at many `Q`.
/// Everything is computed from the two-thirds dealiased field.
#[derive(Clone, Debug)]
pub struct FluxAnalysis {
    grid: Grid,
    velocity: Vec<Vec<Complex64>>,
    /// Spectra of `v_i v_j`, indexed `3i + j`.
    products: Vec<Vec<Complex64>>,
    blocks: Vec<(i32, f64)>,
    l2: f64,
}

impl FluxAnalysis {
    pub fn new(v: &VelocityField) -> FluxAnalysis {
        let grid = *v.grid();
        let u = dealias(v.field());
        let velocity = spectra(&u);
        let pairs: Vec<(usize, usize)> = (0..3).flat_map(|i| (i..3).map(move |j| (i, j))).collect();
        let computed: Vec<((usize, usize), Vec<Complex64>)> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let prod: Vec<f64> = u.component(i).iter().zip(u.component(j)).map(|(a, b)| a * b).collect();
                ((i, j), forward(&grid, &prod))
            })
            .collect();
        let mut products = vec![Vec::new(); 9];
        for ((i, j), s) in computed {
            products[3 * j + i] = s.clone();
            products[3 * i + j] = s;
        }
        let dec = decompose(&u, DecompositionMode::Nonhomogeneous);
        let blocks = dec
            .blocks
            .iter()
            .map(|b| (b.j, lp_norm(&b.field, 3.0).expect("p = 3 is valid")))
            .collect();
        let l2 = lp_norm(&u, 2.0).expect("p = 2 is valid");
        FluxAnalysis {
            grid,
            velocity,
            products,
            blocks,
            l2,
        }
    }

    /// `Σ_ij ∫ F(v_i v_j) ∂_i F v_j dx` for the radial filter `F = w(|D|)`.
    fn pairing(&self, w: impl Fn(f64) -> f64) -> f64 {
        let len = self.grid.len();
        let norm = self.grid.volume() / (len as f64 * len as f64);
        let mut acc = 0.0;
        for idx in 0..len {
            let k = self.grid.odd_wavevector(idx);
            let kk = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            if kk == 0.0 {
                continue;
            }
            let f = w(kk);
            if f == 0.0 {
                continue;
            }
            let mut s = Complex64::default();
            for i in 0..3 {
                if k[i] == 0.0 {
                    continue;
                }
                for j in 0..3 {
                    // P_ij · conj(i k_i V_j)
                    s += self.products[3 * i + j][idx] * Complex64::new(0.0, -k[i]) * self.velocity[j][idx].conj();
                }
            }
            acc += f * f * s.re;
        }
        acc * norm
    }

    /// `Π_Q = ∫ Tr(S_Q(v⊗v)·∇S_Q v) dx` with `S_Q = ϱ(2^{−Q}D)`.
    pub fn flux(&self, q: i32) -> f64 {
        let s = 2f64.powi(q);
        self.pairing(|r| DyadicPartition::rho(r / s))
    }

    /// `∫ v·(v·∇)v dx`, which vanishes for divergence-free `v`.
    pub fn advection_integral(&self) -> f64 {
        self.pairing(|_| 1.0)
    }

    pub fn dyadic_bound(&self, q: i32) -> f64 {
        dyadic_bound_from_norms(&self.blocks, q)
    }

    /// `(k, ‖Δ_k v‖_{L³})` over the nonhomogeneous blocks.
    pub fn block_norms(&self) -> &[(i32, f64)] {
        &self.blocks
    }

    /// `‖v‖_{L²}` of the dealiased field.
    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn table(&self, qs: &[i32]) -> Vec<FluxRow> {
        qs.iter()
            .map(|&q| FluxRow {
                q,
                flux: self.flux(q),
                bound: self.dyadic_bound(q),
            })
            .collect()
    }
}

pub fn flux(v: &VelocityField, q: i32) -> f64 {
    FluxAnalysis::new(v).flux(q)
}

pub fn dyadic_flux_bound(v: &VelocityField, q: i32) -> f64 {
    FluxAnalysis::new(v).dyadic_bound(q)
}

pub fn advection_integral(v: &VelocityField) -> f64 {
    FluxAnalysis::new(v).advection_integral()
}

/// Smallest `C` with `|Π_Q| ≤ C·bound` over the rows with a positive bound.
pub fn fit_constant(rows: &[FluxRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.bound > 0.0)
        .map(|r| r.flux.abs() / r.bound)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))
}

/// Exponents `((2q−6)/(3(q−2)), q/(3(q−2)))` of
/// `‖Δ_k v‖₃ ≤ C‖Δ_k v‖₂^a ‖v‖_{q,∞}^b`.
pub fn interpolation_exponents(q: f64) -> Result<(f64, f64)> {
    if q.is_nan() || q <= 3.0 {
        return Err(Error::Domain(format!("block interpolation needs q > 3, got {q}")));
    }
    if q.is_infinite() {
        return Ok((2.0 / 3.0, 1.0 / 3.0));
    }
    let d = 3.0 * (q - 2.0);
    Ok(((2.0 * q - 6.0) / d, q / d))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockInterpolation {
    pub q: f64,
    pub exponents: (f64, f64),
    /// `(k, ratio)` for every block carrying energy.
    pub blocks: Vec<(i32, f64)>,
    pub max_ratio: f64,
    pub min_ratio: f64,
}

/// Blocks with `L²` norm below this fraction of `‖v‖₂` are skipped.
const BLOCK_FLOOR: f64 = 1e-10;

/// Ratios `‖Δ_k v‖₃ / (‖Δ_k v‖₂^a ‖v‖_{q,∞}^b)` over nonhomogeneous blocks.
pub fn block_interpolation_check(v: &VelocityField, q: f64) -> Result<BlockInterpolation> {
    let (a, b) = interpolation_exponents(q)?;
    let u = v.field();
    let weak = LayerProfile::from_values(&u.magnitude(), u.grid().cell_measure()).lorentz_norm(
        q,
        f64::INFINITY,
        Variant::Plain,
    )?;
    let total = lp_norm(u, 2.0)?;
    let dec = decompose(u, DecompositionMode::Nonhomogeneous);
    let mut blocks = Vec::new();
    for blk in &dec.blocks {
        let l2 = lp_norm(&blk.field, 2.0)?;
        if l2 <= BLOCK_FLOOR * total {
            continue;
        }
        let l3 = lp_norm(&blk.field, 3.0)?;
        blocks.push((blk.j, l3 / (l2.powf(a) * weak.powf(b))));
    }
    let max_ratio = blocks.iter().map(|x| x.1).fold(0.0, f64::max);
    let min_ratio = blocks.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    Ok(BlockInterpolation {
        q,
        exponents: (a, b),
        blocks,
        max_ratio,
        min_ratio: if min_ratio.is_finite() { min_ratio } else { 0.0 },
    })
}

/// One velocity snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub velocity: VelocityField,
}

/// Time-space norm of one energy-equality criterion along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: u8,
    #[serde(with = "exponent_map")]
    pub params: Assignment,
    /// Lorentz indices `(p, second index)` of the time norm.
    pub time_indices: (f64, f64),
    /// `(time, spatial norm)` per snapshot.
    pub spatial: Vec<(f64, f64)>,
    pub value: f64,
    pub finite: bool,
}

/// Completes `p` from the criterion's scaling relation and checks the
/// index window. Criterion 1 fixes `p = q = 4`.
pub fn criterion_params(criterion: u8, params: &Assignment) -> Result<Assignment> {
    let mut a = params.clone();
    let mut failed = Vec::new();
    if criterion == 1 {
        for k in ["p", "q"] {
            match a.get(k) {
                Some(&v) if v != 4.0 => failed.push(format!("{k} = 4")),
                _ => {
                    a.insert(k.into(), 4.0);
                }
            }
        }
        return if failed.is_empty() { Ok(a) } else { Err(Error::Inadmissible(failed)) };
    }
    let rel = ExponentRelation::energy_criterion(criterion)?;
    if a.contains_key("p") {
        if !rel.holds(&a, 1e-9)? {
            failed.push(format!("relation {} violated", relation_text(criterion)));
        }
    } else {
        a = rel.solve(&a)?;
    }
    let g = |k: &str| a.get(k).copied().unwrap_or(f64::NAN);
    let (p, q, s) = (g("p"), g("q"), g("s"));
    let mut need = |ok: bool, clause: &str| {
        if !ok {
            failed.push(clause.to_string());
        }
    };
    need(p > 0.0 && p.is_finite(), "0 < p < inf");
    match criterion {
        2 => need(q > 4.0, "q > 4"),
        3 => need(3.0 < q && q < 4.0, "3 < q < 4"),
        4 => need(1.5 < q && q < 1.8, "3/2 < q < 9/5"),
        _ => {
            need(s > 1.0, "s > 1");
            need(q > 1.0, "q > 1");
            need(1.0 / s < p && p < 3.0, "1/s < p < 3");
        }
    }
    if failed.is_empty() {
        Ok(a)
    } else {
        Err(Error::Inadmissible(failed))
    }
}

fn relation_text(criterion: u8) -> &'static str {
    match criterion {
        2 => "2/p + 2/q = 1",
        3 => "1/p + 3/q = 1",
        4 => "1/p + 3/q = 2",
        _ => "1/p + 6/(5q) = 2s/5 + 3/5",
    }
}

fn spatial_norm(criterion: u8, v: &VelocityField, a: &Assignment) -> Result<f64> {
    let q = a["q"];
    let weak = |mag: &[f64], cell: f64| LayerProfile::from_values(mag, cell).lorentz_norm(q, f64::INFINITY, Variant::Plain);
    let u = v.field();
    let cell = u.grid().cell_measure();
    match criterion {
        4 => {
            // Frobenius magnitude of the 3×3 gradient.
            let mut sq = vec![0.0; u.grid().len()];
            for c in 0..3 {
                let g = gradient(&SampledField::scalar(*u.grid(), u.component(c).to_vec())?)?;
                for (acc, m) in sq.iter_mut().zip(g.magnitude()) {
                    *acc += m * m;
                }
            }
            let mag: Vec<f64> = sq.into_iter().map(f64::sqrt).collect();
            weak(&mag, cell)
        }
        5 => weak(&fractional_laplacian(u, a["s"])?.magnitude(), cell),
        _ => weak(&u.magnitude(), cell),
    }
}

/// Spatial norm per snapshot, then the time Lorentz norm over `[t₀, horizon]`
/// with each snapshot held until the next one.
pub fn criterion_norms(trajectory: &[Snapshot], criterion: u8, params: &Assignment, horizon: f64) -> Result<CriterionReport> {
    if !(1..=5).contains(&criterion) {
        return Err(Error::Domain(format!("criteria are numbered 1 to 5, got {criterion}")));
    }
    if trajectory.is_empty() {
        return Err(Error::Domain("trajectory has no snapshots".into()));
    }
    for w in trajectory.windows(2) {
        if w[1].time <= w[0].time {
            return Err(Error::Domain("snapshot times must increase strictly".into()));
        }
    }
    let last = trajectory[trajectory.len() - 1].time;
    if !(horizon > last) {
        return Err(Error::Domain(format!("horizon {horizon} must exceed the last snapshot time {last}")));
    }
    let a = criterion_params(criterion, params)?;
    let spatial = trajectory
        .par_iter()
        .map(|s| Ok((s.time, spatial_norm(criterion, &s.velocity, &a)?)))
        .collect::<Result<Vec<_>>>()?;
    let series: Vec<(f64, f64)> = spatial
        .iter()
        .enumerate()
        .map(|(i, &(t, x))| {
            let end = trajectory.get(i + 1).map_or(horizon, |s| s.time);
            (end - t, x)
        })
        .collect();
    let p = a["p"];
    let time_indices = if criterion == 2 { (p, f64::INFINITY) } else { (p, p) };
    let value = time_lorentz_norm(&series, time_indices.0, time_indices.1)?;
    Ok(CriterionReport {
        criterion,
        params: a,
        time_indices,
        spatial,
        value,
        finite: value.is_finite(),
    })
}

/// `e^{−rate·t} v₀` at each time.
pub fn decaying_trajectory(v0: &VelocityField, times: &[f64], rate: f64) -> Vec<Snapshot> {
    times
        .iter()
        .map(|&t| Snapshot {
            time: t,
            velocity: v0.scale((-rate * t).exp()),
        })
        .collect()
}

const HEADER_BYTES: usize = 24;

/// Writes `{u32 n, u32 N, f64 L, f64 time}` then component-major samples,
/// all little-endian.
pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let grid = snap.velocity.grid();
    let vals = snap.velocity.field().values();
    let mut buf = Vec::with_capacity(HEADER_BYTES + 8 * vals.len());
    buf.extend_from_slice(&(grid.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.points as u32).to_le_bytes());
    buf.extend_from_slice(&grid.length.to_le_bytes());
    buf.extend_from_slice(&snap.time.to_le_bytes());
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Reads one snapshot file as `(time, raw field)`.
pub fn read_snapshot(path: &Path) -> Result<(f64, SampledField)> {
    let bytes = fs::read(path)?;
    let bad = |msg: String| Error::Parse(format!("{}: {msg}", path.display()));
    if bytes.len() < HEADER_BYTES {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let (n, points, length, time) = (u32_at(0) as usize, u32_at(4) as usize, f64_at(8), f64_at(16));
    if n != 3 {
        return Err(bad(format!("snapshots live on 3-d grids, header says n = {n}")));
    }
    let grid = Grid::new(n, points, length).map_err(|e| bad(e.to_string()))?;
    let count = 3 * grid.len();
    if bytes.len() != HEADER_BYTES + 8 * count {
        return Err(bad(format!("expected {} sample bytes, found {}", 8 * count, bytes.len() - HEADER_BYTES)));
    }
    if !time.is_finite() {
        return Err(bad("non-finite time".into()));
    }
    let values = bytes[HEADER_BYTES..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((time, SampledField::new(grid, 3, values).map_err(|e| bad(e.to_string()))?))
}

/// Loads every `*.snap` file in `dir`, ordered by time. With `project`, each
/// field is Leray-projected; otherwise it must already be divergence-free.
pub fn load_trajectory(dir: &Path, project: bool) -> Result<Vec<Snapshot>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "snap"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Io(format!("no .snap files in {}", dir.display())));
    }
    let mut snaps = paths
        .par_iter()
        .map(|p| {
            let (time, field) = read_snapshot(p)?;
            let velocity = if project { leray_project(&field)? } else { VelocityField::new(field)? };
            Ok(Snapshot { time, velocity })
        })
        .collect::<Result<Vec<_>>>()?;
    snaps.sort_by(|a, b| a.time.total_cmp(&b.time));
    if snaps.windows(2).any(|w| w[0].time == w[1].time) {
        return Err(Error::Parse(format!("duplicate snapshot times in {}", dir.display())));
    }
    Ok(snaps)
}

fn check_periodic(grid: &Grid) -> Result<()> {
    let periods = grid.length / (2.0 * std::f64::consts::PI);
    if grid.dim != 3 || (periods - periods.round()).abs() > 1e-9 || periods.round() < 1.0 {
        return Err(Error::Profile(format!(
            "Taylor-Green needs a 3-d box whose side is a multiple of 2π, got n={} L={}",
            grid.dim, grid.length
        )));
    }
    Ok(())
}

/// Taylor-Green field `(sin x cos y cos z, −cos x sin y cos z, 0)` moved by
/// one explicit step of size `step` along `−P[(u·∇)u]`. The step seeds the
/// `|k| = 2` shells, so `Π_Q` is nonzero for small `Q`.
pub fn taylor_green(grid: &Grid, step: f64) -> Result<VelocityField> {
    check_periodic(grid)?;
    let comps = vec![
        SampledField::from_fn(*grid, |x| x[0].sin() * x[1].cos() * x[2].cos()).into_values(),
        SampledField::from_fn(*grid, |x| -x[0].cos() * x[1].sin() * x[2].cos()).into_values(),
        vec![0.0; grid.len()],
    ];
    let u = SampledField::from_components(*grid, comps)?;
    if step == 0.0 {
        return leray_project(&u);
    }
    let nonlinear = advection(&u)?;
    let p = leray_project(&nonlinear)?;
    let moved: Vec<f64> = u.values().iter().zip(p.field().values()).map(|(a, b)| a - step * b).collect();
    leray_project(&SampledField::new(*grid, 3, moved)?)
}

/// `(u·∇)u` computed pseudo-spectrally without dealiasing.
pub fn advection(u: &SampledField) -> Result<SampledField> {
    check_shape(u)?;
    let grid = *u.grid();
    let mut out = vec![0.0; 3 * grid.len()];
    for a in 0..3 {
        let g = gradient(&SampledField::scalar(grid, u.component(a).to_vec())?)?;
        for b in 0..3 {
            let ub = u.component(b);
            let d = g.component(b);
            for i in 0..grid.len() {
                out[a * grid.len() + i] += ub[i] * d[i];
            }
        }
    }
    SampledField::new(grid, 3, out)
}

/// Leray projection of three independent band-limited random components on
/// the grid lattice.
pub fn random_solenoidal(grid: &Grid, shell: [f64; 2], seed: u64) -> Result<VelocityField> {
    let comps = (0..3u64)
        .map(|c| {
            AnalyticProfile::BandLimitedRandom {
                shell,
                seed: seed.wrapping_mul(3).wrapping_add(c),
                spacing: grid.frequency_step(),
                envelope: None,
                amplitude: 1.0,
            }
            .sample(grid)
            .map(|f| f.into_values())
        })
        .collect::<Result<Vec<_>>>()?;
    leray_project(&SampledField::from_components(*grid, comps)?)
}
