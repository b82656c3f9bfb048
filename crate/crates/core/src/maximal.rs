//! Discrete centered Hardy-Littlewood maximal function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, SampledField};
use crate::rearrange::{LayerProfile, Variant};
use crate::spectral::fractional_laplacian;

/// Radii `h·2^m`, `m = 0..=levels`, with balls `{|offset|·h < r}`.
///
/// The smallest ball is the cell itself, so `Mf >= |f|` holds exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalConfig {
    pub levels: u32,
}

impl MaximalConfig {
    /// All radii up to half the box side.
    pub fn for_grid(grid: &Grid) -> MaximalConfig {
        MaximalConfig {
            levels: (grid.points / 2).trailing_zeros(),
        }
    }

    pub fn radii(&self, grid: &Grid) -> Vec<f64> {
        (0..=self.levels)
            .map(|m| grid.spacing() * 2f64.powi(m as i32))
            .collect()
    }
}

// A ball as rows along the last axis: (offsets on the other axes, half width).
struct BallRows {
    rows: Vec<([i64; 2], i64)>,
    count: f64,
}

fn ball_rows(dim: usize, radius_cells: i64) -> BallRows {
    let r2 = radius_cells * radius_cells;
    let span = |used: bool| if used { -radius_cells..=radius_cells } else { 0..=0 };
    let mut rows = Vec::new();
    let mut count = 0i64;
    for a in span(dim >= 3) {
        for b in span(dim >= 2) {
            let rest = r2 - a * a - b * b;
            if rest <= 0 {
                continue;
            }
            // Largest w with w² < rest.
            let mut w = ((rest as f64).sqrt().floor()) as i64;
            while w * w >= rest {
                w -= 1;
            }
            while (w + 1) * (w + 1) < rest {
                w += 1;
            }
            rows.push(([a, b], w));
            count += 2 * w + 1;
        }
    }
    BallRows {
        rows,
        count: count as f64,
    }
}

/// `Mf(x) = max_r |B_r|^{-1} Σ_{B_r(x)} |f|` with periodic wrap.
///
/// Vector fields are reduced to their pointwise magnitude first.
pub fn maximal_function(field: &SampledField, cfg: &MaximalConfig) -> SampledField {
    let grid = *field.grid();
    let mag = field.magnitude();
    let n = grid.points;
    let dim = grid.dim;
    let lines = grid.len() / n;
    // Periodic prefix sums along the last axis.
    let mut prefix = vec![0.0; lines * (n + 1)];
    for l in 0..lines {
        let p = &mut prefix[l * (n + 1)..(l + 1) * (n + 1)];
        for i in 0..n {
            p[i + 1] = p[i] + mag[l * n + i];
        }
    }
    let balls: Vec<BallRows> = (1..=cfg.levels)
        .map(|m| ball_rows(dim, 1i64 << m))
        .collect();
    let ni = n as i64;
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let mi = grid.multi_index(idx);
            let c = mi[dim - 1] as i64;
            let mut best = mag[idx];
            for ball in &balls {
                let mut sum = 0.0;
                for (outer, w) in &ball.rows {
                    let line = match dim {
                        1 => 0,
                        2 => (mi[0] as i64 + outer[1]).rem_euclid(ni) as usize,
                        _ => {
                            let i0 = (mi[0] as i64 + outer[0]).rem_euclid(ni) as usize;
                            let i1 = (mi[1] as i64 + outer[1]).rem_euclid(ni) as usize;
                            i0 * n + i1
                        }
                    };
                    let p = &prefix[line * (n + 1)..(line + 1) * (n + 1)];
                    let (a, b) = (c - w, c + w);
                    sum += if a < 0 {
                        p[n] - p[(ni + a) as usize] + p[(b + 1) as usize]
                    } else if b >= ni {
                        p[n] - p[a as usize] + p[(b + 1 - ni) as usize]
                    } else {
                        p[(b + 1) as usize] - p[a as usize]
                    };
                }
                best = best.max(sum / ball.count);
            }
            best
        })
        .collect();
    SampledField::scalar(grid, out).expect("finite input gives finite averages")
}

/// Values of the Lorentz norm-equivalence chain for one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub plain: f64,
    /// `None` where the starred norm is undefined (`q < 1`).
    pub star: Option<f64>,
    pub maximal: f64,
    pub star_over_plain: Option<f64>,
    pub maximal_over_star: Option<f64>,
    pub maximal_over_plain: f64,
    /// `‖f‖ <= ‖f‖*` and `‖f‖ <= ‖Mf‖`, the orderings that hold with constant one.
    pub orderings_hold: bool,
    /// Set for `q < 1`, where the chain is outside the lemma's hypotheses.
    pub informational: bool,
}

pub fn equivalence_chain(field: &SampledField, p: f64, q: f64, cfg: &MaximalConfig) -> Result<ChainReport> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::Domain(format!("the chain needs p > 1, got {p}")));
    }
    if q.is_nan() || q <= 0.0 {
        return Err(Error::Domain(format!("the chain needs q > 0, got {q}")));
    }
    let cell = field.grid().cell_measure();
    let prof = LayerProfile::from_values(&field.magnitude(), cell);
    let mf = maximal_function(field, cfg);
    let mprof = LayerProfile::from_values(mf.values(), cell);
    let plain = prof.lorentz_norm(p, q, Variant::Plain)?;
    let maximal = mprof.lorentz_norm(p, q, Variant::Plain)?;
    let informational = q < 1.0;
    let star = if informational {
        None
    } else {
        Some(prof.lorentz_norm(p, q, Variant::Star)?)
    };
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let tol = 1e-12;
    let orderings_hold = plain <= maximal * (1.0 + tol) + tol
        && star.is_none_or(|s| plain <= s * (1.0 + tol) + tol);
    Ok(ChainReport {
        plain,
        star,
        maximal,
        star_over_plain: star.map(|s| div(s, plain)),
        maximal_over_star: star.map(|s| div(maximal, s)),
        maximal_over_plain: div(maximal, plain),
        orderings_hold,
        informational,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    /// Largest cellwise ratio; the empirical constant.
    pub max_ratio: f64,
    /// Cells skipped because both sides vanish.
    pub skipped: usize,
}

/// Largest cellwise value of `|Λ^σu| / ((Mu)^{1-σ/s} (MΛ^s u)^{σ/s})`.
///
/// `u` is taken modulo its mean, which the homogeneous operators ignore.
pub fn pointwise_interpolation_check(
    u: &SampledField,
    sigma: f64,
    s: f64,
    cfg: &MaximalConfig,
) -> Result<PointwiseReport> {
    if !u.is_scalar() {
        return Err(Error::Domain("the pointwise check takes a scalar field".into()));
    }
    if !(sigma > 0.0 && sigma < s && s.is_finite()) {
        return Err(Error::Domain(format!("needs 0 < σ < s, got σ={sigma}, s={s}")));
    }
    let u0 = u.without_mean();
    let lhs = fractional_laplacian(&u0, sigma)?;
    let mu = maximal_function(&u0, cfg);
    let mls = maximal_function(&fractional_laplacian(&u0, s)?, cfg);
    let theta = sigma / s;
    let peak = lhs.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut max_ratio = 0.0f64;
    let mut skipped = 0;
    for i in 0..u.grid().len() {
        let num = lhs.values()[i].abs();
        let den = mu.values()[i].powf(1.0 - theta) * mls.values()[i].powf(theta);
        // Cells where both sides sit at roundoff level carry no information.
        if den == 0.0 && num <= 1e-13 * peak {
            skipped += 1;
            continue;
        }
        max_ratio = max_ratio.max(num / den);
    }
    Ok(PointwiseReport { max_ratio, skipped })
}
