//! Distribution functions, decreasing rearrangements and Lorentz norms.
//!
//! A sampled field is a simple function, so its rearrangement is an exact
//! step function and every norm below is a finite sum over its steps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SampledField;

/// Step representation of `f*`: `f*(t) = levels[k]` on
/// `[cum_measures[k-1], cum_measures[k])`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    levels: Vec<f64>,
    cum_measures: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `(∫ (t^{1/p} f*(t))^q dt/t)^{1/q}`.
    Plain,
    /// Same with `f**` in place of `f*`.
    Star,
}

/// A norm value, flagged when the space is trivial (`p = ∞`, `q < ∞`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEval {
    pub value: f64,
    pub trivial_space: bool,
}

// Gauss-Legendre nodes and weights on [-1, 1], 10 points.
const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..5 {
        s += GL_W[i] * (f(c - h * GL_X[i]) + f(c + h * GL_X[i]));
    }
    s * h
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v <= 0.0 {
        Err(Error::Domain(format!("{name} must lie in (0, ∞], got {v}")))
    } else {
        Ok(())
    }
}

impl LayerProfile {
    /// Builds the profile of the magnitudes `mag`, each carrying measure `cell`.
    pub fn from_values(mag: &[f64], cell: f64) -> LayerProfile {
        let mut v: Vec<f64> = mag.iter().map(|x| x.abs()).filter(|&x| x > 0.0).collect();
        v.par_sort_unstable_by(|a, b| b.total_cmp(a));
        let mut levels = Vec::new();
        let mut cum_measures = Vec::new();
        let mut count = 0usize;
        for (i, &x) in v.iter().enumerate() {
            count += 1;
            if i + 1 == v.len() || v[i + 1] != x {
                levels.push(x);
                cum_measures.push(count as f64 * cell);
            }
        }
        LayerProfile {
            levels,
            cum_measures,
        }
    }

    /// Builds the profile of a simple function given as (measure, value) pieces.
    pub fn from_pieces(pieces: &[(f64, f64)]) -> Result<LayerProfile> {
        for &(d, v) in pieces {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Domain(format!("piece measure must be positive, got {d}")));
            }
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!("piece value must be nonnegative, got {v}")));
            }
        }
        let mut p: Vec<(f64, f64)> = pieces.iter().copied().filter(|&(_, v)| v > 0.0).collect();
        p.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut levels: Vec<f64> = Vec::new();
        let mut cum_measures: Vec<f64> = Vec::new();
        let mut total = 0.0;
        for (d, v) in p {
            total += d;
            if levels.last() == Some(&v) {
                *cum_measures.last_mut().unwrap() = total;
            } else {
                levels.push(v);
                cum_measures.push(total);
            }
        }
        Ok(LayerProfile {
            levels,
            cum_measures,
        })
    }

    /// Validates and wraps explicit level/measure columns.
    pub fn from_columns(levels: Vec<f64>, cum_measures: Vec<f64>) -> Result<LayerProfile> {
        if levels.len() != cum_measures.len() {
            return Err(Error::Parse("level and measure columns differ in length".into()));
        }
        let decreasing = levels.windows(2).all(|w| w[0] > w[1]);
        let increasing = cum_measures.windows(2).all(|w| w[0] < w[1]);
        let finite = levels.iter().chain(&cum_measures).all(|v| v.is_finite());
        if !(decreasing && increasing && finite)
            || levels.last().is_some_and(|&v| v <= 0.0)
            || cum_measures.first().is_some_and(|&t| t <= 0.0)
        {
            return Err(Error::Parse("columns are not a valid layer profile".into()));
        }
        Ok(LayerProfile {
            levels,
            cum_measures,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn cum_measures(&self) -> &[f64] {
        &self.cum_measures
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Measure of the support.
    pub fn total_measure(&self) -> f64 {
        self.cum_measures.last().copied().unwrap_or(0.0)
    }

    pub fn sup(&self) -> f64 {
        self.levels.first().copied().unwrap_or(0.0)
    }

    /// `f_*(α) = |{|f| > α}|`.
    pub fn distribution(&self, alpha: f64) -> f64 {
        // Levels are decreasing; count those strictly above alpha.
        let k = self.levels.partition_point(|&v| v > alpha);
        if k == 0 {
            0.0
        } else {
            self.cum_measures[k - 1]
        }
    }

    /// `f*(t)`.
    pub fn rearrangement(&self, t: f64) -> f64 {
        let k = self.cum_measures.partition_point(|&m| m <= t);
        self.levels.get(k).copied().unwrap_or(0.0)
    }

    // Running integrals F(t_k) = ∫_0^{t_k} f*.
    fn partial_integrals(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut prev = 0.0;
        self.levels
            .iter()
            .zip(&self.cum_measures)
            .map(|(&v, &t)| {
                acc += v * (t - prev);
                prev = t;
                acc
            })
            .collect()
    }

    /// `f**(t) = (1/t) ∫_0^t f*`.
    pub fn double_star(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::Domain(format!("f** needs t > 0, got {t}")));
        }
        let k = self.cum_measures.partition_point(|&m| m <= t);
        let f = self.partial_integrals();
        let (base, start) = if k == 0 {
            (0.0, 0.0)
        } else {
            (f[k - 1], self.cum_measures[k - 1])
        };
        let v = self.levels.get(k).copied().unwrap_or(0.0);
        Ok((base + v * (t - start)) / t)
    }

    /// Lorentz quasi-norm, flagged when `p = ∞` and `q < ∞`.
    pub fn lorentz(&self, p: f64, q: f64, variant: Variant) -> Result<NormEval> {
        check_exponent("p", p)?;
        check_exponent("q", q)?;
        if variant == Variant::Star && (p <= 1.0 || (q.is_finite() && q < 1.0)) {
            return Err(Error::Domain(format!(
                "the starred norm needs p > 1 and q >= 1, got p={p}, q={q}"
            )));
        }
        if p.is_infinite() && q.is_finite() {
            return Ok(NormEval {
                value: 0.0,
                trivial_space: true,
            });
        }
        let value = if self.is_empty() {
            0.0
        } else {
            match variant {
                Variant::Plain => self.plain(p, q),
                Variant::Star => self.star(p, q),
            }
        };
        Ok(NormEval {
            value,
            trivial_space: false,
        })
    }

    /// Convenience wrapper returning the bare value.
    pub fn lorentz_norm(&self, p: f64, q: f64, variant: Variant) -> Result<f64> {
        self.lorentz(p, q, variant).map(|e| e.value)
    }

    fn plain(&self, p: f64, q: f64) -> f64 {
        let top = self.levels[0];
        if q.is_infinite() {
            if p.is_infinite() {
                return top;
            }
            return self
                .levels
                .iter()
                .zip(&self.cum_measures)
                .map(|(&v, &t)| t.powf(1.0 / p) * v)
                .fold(0.0, f64::max);
        }
        let e = q / p;
        let mut prev = 0.0f64;
        let mut s = 0.0;
        for (&v, &t) in self.levels.iter().zip(&self.cum_measures) {
            let tq = t.powf(e);
            let diff = if e == 1.0 { t - prev } else { tq - prev.powf(e) };
            s += (v / top).powf(q) * diff;
            prev = t;
        }
        top * (s / e).powf(1.0 / q)
    }

    fn star(&self, p: f64, q: f64) -> f64 {
        let top = self.levels[0];
        let f = self.partial_integrals();
        let t = &self.cum_measures;
        let m = t.len();
        if q.is_infinite() {
            if p.is_infinite() {
                return top;
            }
            // t^{1/p} f**(t) has no interior maximum on a step and decreases
            // past the support, so the sup is attained at a breakpoint.
            return (0..m)
                .map(|k| t[k].powf(1.0 / p - 1.0) * f[k])
                .fold(0.0, f64::max);
        }
        let a = q / p - q - 1.0;
        let mut s = (p / q) * t[0].powf(q / p);
        for k in 1..m {
            let (t0, t1) = (t[k - 1], t[k]);
            let v = self.levels[k] / top;
            let base = f[k - 1] / top - v * t0;
            let integrand = |x: f64| x.powf(a) * (base + v * x).powf(q);
            let mut lo = t0;
            while lo < t1 {
                let hi = (2.0 * lo).min(t1);
                s += gauss_legendre(lo, hi, integrand);
                lo = hi;
            }
        }
        let fm = f[m - 1] / top;
        s += fm.powf(q) * t[m - 1].powf(q / p - q) / (q - q / p);
        top * s.powf(1.0 / q)
    }

    /// Two-column text table: `level<TAB>cumulative_measure`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("level\tcumulative_measure\n");
        for (v, t) in self.levels.iter().zip(&self.cum_measures) {
            out.push_str(&format!("{v}\t{t}\n"));
        }
        out
    }

    pub fn from_table(text: &str) -> Result<LayerProfile> {
        let mut levels = Vec::new();
        let mut cum = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("level")) {
                continue;
            }
            let mut cols = line.split_whitespace();
            let parse = |c: Option<&str>| -> Result<f64> {
                c.ok_or_else(|| Error::Parse(format!("line {}: missing column", i + 1)))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
            };
            levels.push(parse(cols.next())?);
            cum.push(parse(cols.next())?);
        }
        LayerProfile::from_columns(levels, cum)
    }
}

/// `f_*(α)` of a sampled field (magnitude for vector fields).
pub fn distribution_function(field: &SampledField, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Domain(format!("α must be nonnegative, got {alpha}")));
    }
    let count = field.magnitude().iter().filter(|&&v| v > alpha).count();
    Ok(count as f64 * field.grid().cell_measure())
}

pub fn decreasing_rearrangement(field: &SampledField) -> LayerProfile {
    LayerProfile::from_values(&field.magnitude(), field.grid().cell_measure())
}

/// `‖f‖_{L^{p,q}}` of a sampled field.
pub fn lorentz_norm(field: &SampledField, p: f64, q: f64, variant: Variant) -> Result<f64> {
    decreasing_rearrangement(field).lorentz_norm(p, q, variant)
}

/// Lorentz norm in time of a piecewise-constant series of (duration, value).
pub fn time_lorentz_norm(series: &[(f64, f64)], p: f64, q: f64) -> Result<f64> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    if series.is_empty() {
        return Ok(0.0);
    }
    LayerProfile::from_pieces(series)?.lorentz_norm(p, q, Variant::Plain)
}
