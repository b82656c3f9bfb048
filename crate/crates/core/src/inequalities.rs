//! Inequality registry and verification engine: exponent relations,
//! admissibility, ratio sweeps under dilation, the dyadic balancing of two
//! competing terms, the low/high frequency split and the exclusion-line
//! probe.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{lp_norm, AnalyticProfile, Grid, SampledField};
use crate::rearrange::{LayerProfile, Variant};
use crate::spaces::{besov_lorentz_norm, triebel_lorentz_norm, BlockProfiles, SpaceParams};
use crate::spectral::{convolve, decompose, fractional_laplacian, gradient, DecompositionMode, DyadicDecomposition};

/// A full or partial assignment of exponent names to values.
pub type Assignment = BTreeMap<String, f64>;

/// Points closer than this to the exclusion line count as on it.
pub const EXCLUSION_TOLERANCE: f64 = 1e-9;

const RELATION_TOLERANCE: f64 = 1e-9;

/// Serde for assignments: `∞` travels as the string `"inf"`, and strings of
/// the form `"a/b"` are accepted as input.
pub mod exponent_map {
    use super::Assignment;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn parse(s: &str) -> Option<f64> {
        let t = s.trim();
        match t {
            "inf" | "+inf" | "infinity" | "∞" => return Some(f64::INFINITY),
            _ => {}
        }
        if let Some((a, b)) = t.split_once('/') {
            let a: f64 = a.trim().parse().ok()?;
            let b: f64 = b.trim().parse().ok()?;
            return Some(a / b);
        }
        t.parse().ok()
    }

    pub fn serialize<S: Serializer>(map: &Assignment, ser: S) -> Result<S::Ok, S::Error> {
        let raw: BTreeMap<&String, Raw> = map
            .iter()
            .map(|(k, &v)| {
                let r = if v.is_infinite() {
                    Raw::Text(if v > 0.0 { "inf".into() } else { "-inf".into() })
                } else {
                    Raw::Num(v)
                };
                (k, r)
            })
            .collect();
        raw.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Assignment, D::Error> {
        let raw = BTreeMap::<String, Raw>::deserialize(de)?;
        raw.into_iter()
            .map(|(k, v)| {
                let x = match v {
                    Raw::Num(x) => x,
                    Raw::Text(s) => parse(&s).ok_or_else(|| D::Error::custom(format!("bad exponent `{s}` for {k}")))?,
                };
                Ok((k, x))
            })
            .collect()
    }
}

/// One monomial `coef · Π vars`; a variable written `1/x` stands for the
/// reciprocal of `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    #[serde(default)]
    pub vars: Vec<String>,
}

/// A multilinear relation `Σ terms = 0` among exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentRelation {
    #[serde(default)]
    pub name: String,
    pub terms: Vec<Term>,
}

fn base_name(v: &str) -> (&str, bool) {
    match v.strip_prefix("1/") {
        Some(b) => (b, true),
        None => (v, false),
    }
}

fn recip(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

impl ExponentRelation {
    pub fn new(name: &str, terms: &[(f64, &[&str])]) -> ExponentRelation {
        ExponentRelation {
            name: name.into(),
            terms: terms
                .iter()
                .map(|(c, vs)| Term {
                    coef: *c,
                    vars: vs.iter().map(|v| v.to_string()).collect(),
                })
                .collect(),
        }
    }

    /// `n/p − σ = θ n/q + (1−θ)(n/r − s)`.
    pub fn gagliardo_nirenberg() -> ExponentRelation {
        Self::new(
            "gagliardo_nirenberg",
            &[
                (1.0, &["n", "1/p"]),
                (-1.0, &["sigma"]),
                (-1.0, &["theta", "n", "1/q"]),
                (-1.0, &["n", "1/r"]),
                (1.0, &["theta", "n", "1/r"]),
                (1.0, &["s"]),
                (-1.0, &["theta", "s"]),
            ],
        )
    }

    /// `s = n/r`.
    pub fn critical() -> ExponentRelation {
        Self::new("critical", &[(1.0, &["s"]), (-1.0, &["n", "1/r"])])
    }

    /// `0 = θ n/p + (1−θ)(n/r − s)`.
    pub fn supercritical() -> ExponentRelation {
        Self::new(
            "supercritical",
            &[
                (1.0, &["theta", "n", "1/p"]),
                (1.0, &["n", "1/r"]),
                (-1.0, &["s"]),
                (-1.0, &["theta", "n", "1/r"]),
                (1.0, &["theta", "s"]),
            ],
        )
    }

    /// `n/p = n/r − s`.
    pub fn sobolev() -> ExponentRelation {
        Self::new("sobolev", &[(1.0, &["n", "1/p"]), (-1.0, &["n", "1/r"]), (1.0, &["s"])])
    }

    /// `1/pstar = 1/p − 1/n`.
    pub fn sobolev_gradient() -> ExponentRelation {
        Self::new(
            "sobolev_gradient",
            &[(1.0, &["1/pstar"]), (-1.0, &["1/p"]), (1.0, &["1/n"])],
        )
    }

    /// `1/lhs = (1 − σ/s)/a + σ/(s b)`.
    pub fn pointwise_interpolation(lhs: &str, a: &str, b: &str) -> ExponentRelation {
        let (l, ia, ib) = (format!("1/{lhs}"), format!("1/{a}"), format!("1/{b}"));
        ExponentRelation {
            name: format!("pointwise_interpolation_{lhs}"),
            terms: vec![
                Term { coef: 1.0, vars: vec![l] },
                Term { coef: -1.0, vars: vec![ia.clone()] },
                Term { coef: 1.0, vars: vec!["sigma".into(), "1/s".into(), ia] },
                Term { coef: -1.0, vars: vec!["sigma".into(), "1/s".into(), ib] },
            ],
        }
    }

    /// `1/p = α/q + (1−α)/r`.
    pub fn interpolation() -> ExponentRelation {
        Self::new(
            "interpolation",
            &[
                (1.0, &["1/p"]),
                (-1.0, &["alpha", "1/q"]),
                (-1.0, &["1/r"]),
                (1.0, &["alpha", "1/r"]),
            ],
        )
    }

    /// `1/x = 1/a + 1/b`.
    pub fn harmonic(x: &str, a: &str, b: &str) -> ExponentRelation {
        ExponentRelation {
            name: format!("harmonic_{x}"),
            terms: vec![
                Term { coef: 1.0, vars: vec![format!("1/{x}")] },
                Term { coef: -1.0, vars: vec![format!("1/{a}")] },
                Term { coef: -1.0, vars: vec![format!("1/{b}")] },
            ],
        }
    }

    /// `1/x + 1 = 1/a + 1/b`.
    pub fn young(x: &str, a: &str, b: &str) -> ExponentRelation {
        ExponentRelation {
            name: format!("young_{x}"),
            terms: vec![
                Term { coef: 1.0, vars: vec![format!("1/{x}")] },
                Term { coef: 1.0, vars: vec![] },
                Term { coef: -1.0, vars: vec![format!("1/{a}")] },
                Term { coef: -1.0, vars: vec![format!("1/{b}")] },
            ],
        }
    }

    /// Scaling relation of energy-equality criterion `k` (2 to 5) between the
    /// time exponent `p`, the space exponent `q` and, for `k = 5`, `s`.
    pub fn energy_criterion(k: u8) -> Result<ExponentRelation> {
        let rel = match k {
            2 => Self::new("criterion_2", &[(2.0, &["1/p"]), (2.0, &["1/q"]), (-1.0, &[])]),
            3 => Self::new("criterion_3", &[(1.0, &["1/p"]), (3.0, &["1/q"]), (-1.0, &[])]),
            4 => Self::new("criterion_4", &[(1.0, &["1/p"]), (3.0, &["1/q"]), (-2.0, &[])]),
            5 => Self::new(
                "criterion_5",
                &[(1.0, &["1/p"]), (1.2, &["1/q"]), (-0.4, &["s"]), (-0.6, &[])],
            ),
            _ => return Err(Error::Relation(format!("no scaling relation for criterion {k}"))),
        };
        Ok(rel)
    }

    /// Base variable names appearing in the relation.
    pub fn variables(&self) -> BTreeSet<String> {
        self.terms
            .iter()
            .flat_map(|t| t.vars.iter().map(|v| base_name(v).0.to_string()))
            .collect()
    }

    fn term_value(t: &Term, get: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
        let mut v = t.coef;
        for f in &t.vars {
            let (b, inv) = base_name(f);
            let x = get(b)?;
            v *= if inv { recip(x) } else { x };
        }
        Some(v)
    }

    /// `Σ terms` and `Σ |terms|` under a complete assignment.
    pub fn residual(&self, a: &Assignment) -> Result<(f64, f64)> {
        let mut sum = 0.0;
        let mut scale = 0.0;
        for t in &self.terms {
            let v = Self::term_value(t, &|k| a.get(k).copied()).ok_or_else(|| {
                Error::Relation(format!("relation {} needs values for {:?}", self.name, t.vars))
            })?;
            sum += v;
            scale += v.abs();
        }
        Ok((sum, scale))
    }

    pub fn holds(&self, a: &Assignment, tol: f64) -> Result<bool> {
        let (r, scale) = self.residual(a)?;
        Ok(r.abs() <= tol * scale.max(1.0))
    }

    /// Solves for the single variable of the relation missing from `known`.
    pub fn solve(&self, known: &Assignment) -> Result<Assignment> {
        let unknown: Vec<String> = self.variables().into_iter().filter(|v| !known.contains_key(v)).collect();
        let x = match unknown.as_slice() {
            [] => {
                return Err(Error::Relation(format!(
                    "relation {} is over-determined: every variable is assigned",
                    self.name
                )))
            }
            [x] => x.clone(),
            _ => {
                return Err(Error::Relation(format!(
                    "relation {} is under-determined: unknowns {}",
                    self.name,
                    unknown.join(", ")
                )))
            }
        };
        let mut forms = BTreeSet::new();
        for t in &self.terms {
            let hits: Vec<bool> = t.vars.iter().map(|v| base_name(v)).filter(|(b, _)| *b == x).map(|(_, i)| i).collect();
            if hits.len() > 1 {
                return Err(Error::Relation(format!("{x} enters relation {} nonlinearly", self.name)));
            }
            forms.extend(hits);
        }
        if forms.len() > 1 {
            return Err(Error::Relation(format!(
                "{x} enters relation {} both directly and as a reciprocal",
                self.name
            )));
        }
        let reciprocal = forms.contains(&true);
        // Residual as an affine function of the coordinate y (x or 1/x).
        let eval = |y: f64| -> f64 {
            self.terms
                .iter()
                .map(|t| {
                    let mut v = t.coef;
                    for f in &t.vars {
                        let (b, inv) = base_name(f);
                        v *= if b == x {
                            y
                        } else {
                            let k = known[b];
                            if inv {
                                recip(k)
                            } else {
                                k
                            }
                        };
                    }
                    v
                })
                .sum()
        };
        let b = eval(0.0);
        let a = eval(1.0) - b;
        let scale: f64 = self
            .terms
            .iter()
            .filter_map(|t| Self::term_value(t, &|k| if k == x { Some(1.0) } else { known.get(k).copied() }))
            .map(f64::abs)
            .sum::<f64>()
            .max(1.0);
        if a.abs() <= 1e-14 * scale {
            return Err(Error::Relation(format!(
                "{x} has zero coefficient in relation {}; no solution",
                self.name
            )));
        }
        let y = -b / a;
        let value = if reciprocal {
            if y == 0.0 {
                f64::INFINITY
            } else {
                1.0 / y
            }
        } else {
            y
        };
        let mut out = known.clone();
        out.insert(x, value);
        Ok(out)
    }
}

/// Solves `relation` for its one unassigned variable.
pub fn solve_exponents(relation: &ExponentRelation, known: &Assignment) -> Result<Assignment> {
    relation.solve(known)
}

/// Inequality families the engine knows how to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    /// `‖Λ^σu‖_{p,1} ≤ C‖u‖^θ_{q,∞}‖Λ^s u‖^{1−θ}_{r,∞}`.
    Gnl,
    /// `‖u‖_{Ḃ^σ_{p,1,1}} ≤ C‖u‖^θ_{Ḃ^0_{q,∞,∞}}‖u‖^{1−θ}_{Ḃ^s_{r,∞,∞}}`.
    GnBesov,
    /// `‖u‖_{q,l} ≤ C‖u‖^{p/q}_{p,∞}‖Λ^{n/r}u‖^{1−p/q}_{r,∞}`.
    OzawaSobolev,
    /// As above with `Ḟ^{n/r}_{r,∞,∞}` on the right.
    OzawaTriebel,
    /// As above with `Ḃ^{n/r}_{r,∞,∞}` on the right.
    OzawaBesov,
    /// `‖f‖_{p,p₁} ≤ K‖f‖^α_{q,∞}‖f‖^{1−α}_{r,∞}` with explicit `K`.
    InterpChar,
    /// `‖fg‖_{r,s} ≤ C‖f‖_{r₁,s₁}‖g‖_{r₂,s₂}`.
    Holder,
    /// `‖f*g‖_{r,s} ≤ C‖f‖_{p,s₁}‖g‖_{q,s₂}`.
    YoungOneil,
    /// `‖f*g‖_{p,s} ≤ C‖f‖_{q,l}‖g‖_{L^r}`, `l ≤ s`.
    YoungGen,
    /// `‖f‖_{m,r} ≤ K(Ω)‖f‖_{M,q}` for `f` supported in `Ω`.
    InclusionBounded,
    /// `‖f‖_{np/(n−p),p} ≤ C‖∇f‖_p`.
    SobolevGradient,
    /// `‖u‖_{p,p₁} ≤ C‖Λ^s u‖_{r,p₁}`, `n/p = n/r − s`.
    SobolevLorentz,
    /// `‖u‖_{q,l} ≤ C‖u‖^{p/q}_{p,∞}‖u‖^{1−p/q}_{Ḃ^s_{r,∞,∞}}`, `s = n/r`.
    Lemma31Critical,
    /// `‖u‖_∞ ≤ C‖u‖^θ_{p,∞}‖u‖^{1−θ}_{Ḃ^s_{r,∞,∞}}`, `s > n/r`.
    Lemma31Supercritical,
    /// `‖Λ^σu‖_{p,p₁} ≤ C‖u‖^{1−σ/s}_{q,q₁}‖Λ^s u‖^{σ/s}_{r,r₁}`.
    Prop32,
    /// The `Gnl` ratio evaluated on the exclusion line.
    Counterexample,
}

impl CaseKind {
    fn relations(self) -> Vec<ExponentRelation> {
        use CaseKind::*;
        match self {
            Gnl | GnBesov | Counterexample => vec![ExponentRelation::gagliardo_nirenberg()],
            OzawaSobolev | OzawaTriebel | OzawaBesov | Lemma31Critical => vec![ExponentRelation::critical()],
            Lemma31Supercritical => vec![ExponentRelation::supercritical()],
            SobolevLorentz => vec![ExponentRelation::sobolev()],
            SobolevGradient => vec![ExponentRelation::sobolev_gradient()],
            Prop32 => vec![
                ExponentRelation::pointwise_interpolation("p", "q", "r"),
                ExponentRelation::pointwise_interpolation("p1", "q1", "r1"),
            ],
            InterpChar => vec![ExponentRelation::interpolation()],
            Holder => vec![ExponentRelation::harmonic("r", "r1", "r2"), ExponentRelation::harmonic("s", "s1", "s2")],
            YoungOneil => vec![ExponentRelation::young("r", "p", "q"), ExponentRelation::harmonic("s", "s1", "s2")],
            YoungGen => vec![ExponentRelation::young("p", "q", "r")],
            InclusionBounded => vec![],
        }
    }

    /// Whether the case compares two independent fields.
    pub fn is_bilinear(self) -> bool {
        matches!(self, CaseKind::Holder | CaseKind::YoungOneil | CaseKind::YoungGen)
    }
}

/// One registered inequality instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCase {
    pub id: String,
    pub kind: CaseKind,
    #[serde(with = "exponent_map")]
    pub params: Assignment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    /// Name of the profile family swept by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Truncation radii for counterexample probes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truncations: Vec<f64>,
    /// Core radius of the probe's power law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

pub const DEFAULT_GRID: (usize, usize, f64) = (2, 512, 64.0);

impl InequalityCase {
    pub fn grid(&self) -> Grid {
        self.grid.unwrap_or_else(|| {
            let n = self.params.get("n").map(|&n| n as usize).unwrap_or(DEFAULT_GRID.0);
            Grid::new(n, DEFAULT_GRID.1, DEFAULT_GRID.2).expect("default grid is valid")
        })
    }

    /// Parameters with `n` filled from the grid and every derivable exponent
    /// solved from the case's relations.
    pub fn resolved(&self) -> Result<Assignment> {
        let mut a = self.params.clone();
        let n = self.grid().dim as f64;
        match a.get("n") {
            Some(&v) if (v - n).abs() > 0.0 => {
                return Err(Error::Relation(format!("case {} has n={v} but its grid has n={n}", self.id)))
            }
            _ => {
                a.insert("n".into(), n);
            }
        }
        let mut pending = self.kind.relations();
        loop {
            let before = pending.len();
            let mut rest = Vec::new();
            for rel in pending {
                let missing = rel.variables().iter().filter(|v| !a.contains_key(*v)).count();
                match missing {
                    0 => {}
                    1 => a = rel.solve(&a)?,
                    _ => rest.push(rel),
                }
            }
            pending = rest;
            if pending.is_empty() {
                return Ok(a);
            }
            if pending.len() == before {
                let names: Vec<String> = pending
                    .iter()
                    .map(|r| {
                        let vs: Vec<String> = r.variables().into_iter().filter(|v| !a.contains_key(v)).collect();
                        format!("{} ({})", r.name, vs.join(", "))
                    })
                    .collect();
                return Err(Error::Relation(format!("under-determined: {}", names.join("; "))));
            }
        }
    }
}

/// Admissibility verdict with the failed clauses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub reasons: Vec<String>,
}

struct Clauses<'a> {
    a: &'a Assignment,
    failed: Vec<String>,
}

impl Clauses<'_> {
    fn get(&mut self, k: &str) -> f64 {
        match self.a.get(k) {
            Some(&v) => v,
            None => {
                self.failed.push(format!("missing parameter {k}"));
                f64::NAN
            }
        }
    }

    fn require(&mut self, ok: bool, clause: impl Into<String>) {
        if !ok {
            self.failed.push(clause.into());
        }
    }

    fn relation(&mut self, rel: &ExponentRelation, clause: &str) {
        match rel.holds(self.a, RELATION_TOLERANCE) {
            Ok(true) => {}
            Ok(false) => self.failed.push(format!("relation {clause} violated")),
            Err(e) => self.failed.push(e.to_string()),
        }
    }
}

/// Signed distance `(s − n/r) − (σ − n/p)` to the exclusion line.
pub fn exclusion_offset(a: &Assignment) -> f64 {
    let g = |k: &str| a.get(k).copied().unwrap_or(f64::NAN);
    (g("s") - g("n") * recip(g("r"))) - (g("sigma") - g("n") * recip(g("p")))
}

/// Checks every index range, window and relation of `kind` on `params`.
pub fn admissible(kind: CaseKind, params: &Assignment) -> Admissibility {
    use CaseKind::*;
    let inf = f64::INFINITY;
    let mut c = Clauses {
        a: params,
        failed: Vec::new(),
    };
    match kind {
        Gnl | GnBesov | Counterexample => {
            let (sigma, s, q, r, theta, p) = (c.get("sigma"), c.get("s"), c.get("q"), c.get("r"), c.get("theta"), c.get("p"));
            c.require(0.0 <= sigma && sigma < s, "0 <= sigma < s");
            c.require(1.0 < q && q <= inf, "1 < q <= inf");
            c.require(1.0 < r && r <= inf, "1 < r <= inf");
            c.require(0.0 < theta && theta < 1.0 - sigma / s, "0 < theta < 1 - sigma/s");
            c.require(p > 0.0, "p > 0");
            c.relation(&ExponentRelation::gagliardo_nirenberg(), "n/p - sigma = theta n/q + (1-theta)(n/r - s)");
            let off = exclusion_offset(params).abs() < EXCLUSION_TOLERANCE;
            if kind == Counterexample {
                c.require(off, "s - n/r = sigma - n/p (probe must sit on the exclusion line)");
            } else {
                c.require(!off, "s - n/r != sigma - n/p");
            }
        }
        OzawaSobolev | OzawaTriebel | OzawaBesov | Lemma31Critical => {
            let (p, q, r, l) = (c.get("p"), c.get("q"), c.get("r"), c.get("l"));
            c.require(1.0 < p && p < inf, "1 < p < inf");
            c.require(1.0 < q && q < inf, "1 < q < inf");
            c.require(p < q, "p < q");
            c.require(1.0 < r && r < inf, "1 < r < inf");
            c.require((1.0..=inf).contains(&l), "1 <= l <= inf");
            c.relation(&ExponentRelation::critical(), "s = n/r");
        }
        Lemma31Supercritical => {
            let (p, r, s, theta, n) = (c.get("p"), c.get("r"), c.get("s"), c.get("theta"), c.get("n"));
            c.require(1.0 < p && p <= inf, "1 < p <= inf");
            c.require(1.0 < r && r <= inf, "1 < r <= inf");
            c.require(s > n * recip(r), "s > n/r");
            c.require(0.0 < theta && theta <= 1.0, "0 < theta <= 1");
            c.relation(&ExponentRelation::supercritical(), "0 = theta n/p + (1-theta)(n/r - s)");
        }
        SobolevLorentz => {
            let (r, s, p1, n) = (c.get("r"), c.get("s"), c.get("p1"), c.get("n"));
            c.require(1.0 < r && r < inf, "1 < r < inf");
            c.require(0.0 <= s && s < n / r, "0 <= s < n/r");
            c.require(0.0 < p1 && p1 <= inf, "0 < p1 <= inf");
            c.relation(&ExponentRelation::sobolev(), "n/p = n/r - s");
        }
        SobolevGradient => {
            let (p, n) = (c.get("p"), c.get("n"));
            c.require(1.0 <= p && p < n, "1 <= p < n");
            c.relation(&ExponentRelation::sobolev_gradient(), "pstar = np/(n-p)");
        }
        Prop32 => {
            let (q, r, q1, r1, sigma, s) = (c.get("q"), c.get("r"), c.get("q1"), c.get("r1"), c.get("sigma"), c.get("s"));
            c.require(1.0 < q && q <= inf, "1 < q <= inf");
            c.require(1.0 < r && r <= inf, "1 < r <= inf");
            c.require((1.0..=inf).contains(&q1), "1 <= q1 <= inf");
            c.require((1.0..=inf).contains(&r1), "1 <= r1 <= inf");
            c.require(0.0 < sigma && sigma < s && s < inf, "0 < sigma < s < inf");
            c.relation(
                &ExponentRelation::pointwise_interpolation("p", "q", "r"),
                "1/p = (1-sigma/s)/q + sigma/(s r)",
            );
            c.relation(
                &ExponentRelation::pointwise_interpolation("p1", "q1", "r1"),
                "1/p1 = (1-sigma/s)/q1 + sigma/(s r1)",
            );
        }
        InterpChar => {
            let (p, q, r, p1, alpha) = (c.get("p"), c.get("q"), c.get("r"), c.get("p1"), c.get("alpha"));
            c.require(0.0 < alpha && alpha < 1.0, "0 < alpha < 1");
            c.require(0.0 < q && q < p && p < r && r <= inf, "0 < q < p < r <= inf");
            c.require(0.0 < p1 && p1 <= inf, "0 < p1 <= inf");
            c.relation(&ExponentRelation::interpolation(), "1/p = alpha/q + (1-alpha)/r");
        }
        Holder => {
            for k in ["r1", "r2", "s1", "s2"] {
                let v = c.get(k);
                c.require(0.0 < v && v <= inf, format!("0 < {k} <= inf"));
            }
            let (r, s) = (c.get("r"), c.get("s"));
            c.require(r > 0.0 && s > 0.0, "r, s > 0");
            c.relation(&ExponentRelation::harmonic("r", "r1", "r2"), "1/r = 1/r1 + 1/r2");
            let rhs = recip(c.get("s1")) + recip(c.get("s2"));
            c.require(recip(s) <= rhs * (1.0 + RELATION_TOLERANCE), "1/s <= 1/s1 + 1/s2");
        }
        YoungOneil => {
            for k in ["p", "q", "r"] {
                let v = c.get(k);
                c.require(1.0 < v && v < inf, format!("1 < {k} < inf"));
            }
            for k in ["s1", "s2"] {
                let v = c.get(k);
                c.require(0.0 < v && v <= inf, format!("0 < {k} <= inf"));
            }
            c.relation(&ExponentRelation::young("r", "p", "q"), "1/p + 1/q = 1/r + 1");
            c.relation(&ExponentRelation::harmonic("s", "s1", "s2"), "1/s = 1/s1 + 1/s2");
        }
        YoungGen => {
            let (l, s, r, p, q) = (c.get("l"), c.get("s"), c.get("r"), c.get("p"), c.get("q"));
            c.require(0.0 < l && l <= s && s <= inf, "0 < l <= s <= inf");
            c.require((1.0..inf).contains(&r), "1 <= r < inf");
            c.require(1.0 < p && p < inf, "1 < p < inf");
            c.require(1.0 < q && q < inf, "1 < q < inf");
            c.relation(&ExponentRelation::young("p", "q", "r"), "1/p + 1 = 1/q + 1/r");
        }
        InclusionBounded => {
            let (m, mm, r, q) = (c.get("m"), c.get("M"), c.get("r"), c.get("q"));
            c.require(1.0 <= m && m < mm && mm <= inf, "1 <= m < M <= inf");
            c.require((1.0..=inf).contains(&r), "1 <= r <= inf");
            c.require((1.0..=inf).contains(&q), "1 <= q <= inf");
        }
    }
    Admissibility {
        admissible: c.failed.is_empty(),
        reasons: c.failed,
    }
}

/// Left side, right-side factors with their powers, and the quotient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEval {
    pub lhs: f64,
    /// `(value, power)` per right-hand factor.
    pub rhs: Vec<(f64, f64)>,
    pub ratio: f64,
    /// Explicit constant of the inequality, when it has one.
    pub constant: Option<f64>,
    /// Right side vanished while the left did not.
    pub diverging: bool,
}

fn lor(f: &SampledField, p: f64, q: f64) -> Result<f64> {
    LayerProfile::from_values(&f.magnitude(), f.grid().cell_measure()).lorentz_norm(p, q, Variant::Plain)
}

// Λ^0 is the identity on ℝⁿ; on the torus it would also strip the mean.
fn lam(u: &SampledField, s: f64) -> Result<SampledField> {
    if s == 0.0 {
        Ok(u.clone())
    } else {
        fractional_laplacian(u, s)
    }
}

fn besov(u: &SampledField, s: f64, p: f64, q: f64, r: f64) -> Result<f64> {
    besov_lorentz_norm(u, SpaceParams::new(s, p, q, r)).map(|b| b.value)
}

fn support_measure(u: &SampledField) -> f64 {
    u.magnitude().iter().filter(|&&m| m > 0.0).count() as f64 * u.grid().cell_measure()
}

fn pow_recip(base: f64, e: f64) -> f64 {
    // base^{1/e} with 1/∞ = 0.
    base.powf(recip(e))
}

/// `[(r−q)p²/((r−p)(p−q)p₁)]^{1/p₁}`.
pub fn interpolation_constant(p: f64, q: f64, r: f64, p1: f64) -> f64 {
    let rr = if r.is_infinite() { 1.0 } else { (r - q) / (r - p) };
    pow_recip(rr * p * p / ((p - q) * p1), p1)
}

/// `(1/m)^{(r−1)/r}(q/M)^{1/q}|Ω|^{1/m−1/M}/(1/m−1/M)`.
pub fn inclusion_constant(m: f64, big_m: f64, r: f64, q: f64, omega: f64) -> f64 {
    let d = 1.0 / m - recip(big_m);
    let a = (1.0 / m).powf(1.0 - recip(r));
    let b = if q.is_infinite() { 1.0 } else { (q * recip(big_m)).powf(1.0 / q) };
    a * b * omega.powf(d) / d
}

/// Quotient of the two sides of `kind` on `f` (and `g` for two-field
/// cases). Admissibility is not checked here.
pub fn ratio_of(kind: CaseKind, a: &Assignment, f: &SampledField, g: &SampledField) -> Result<RatioEval> {
    use CaseKind::*;
    let peak = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::Domain("the ratio is undefined on the zero field".into()));
    }
    let v = |k: &str| -> Result<f64> {
        a.get(k)
            .copied()
            .ok_or_else(|| Error::Relation(format!("missing parameter {k}")))
    };
    let inf = f64::INFINITY;
    let mut constant = None;
    let (lhs, rhs): (f64, Vec<(f64, f64)>) = match kind {
        Gnl | Counterexample => {
            let (sigma, s, p, q, r, th) = (v("sigma")?, v("s")?, v("p")?, v("q")?, v("r")?, v("theta")?);
            (
                lor(&lam(f, sigma)?, p, 1.0)?,
                vec![(lor(f, q, inf)?, th), (lor(&lam(f, s)?, r, inf)?, 1.0 - th)],
            )
        }
        GnBesov => {
            let (sigma, s, p, q, r, th) = (v("sigma")?, v("s")?, v("p")?, v("q")?, v("r")?, v("theta")?);
            let bp = BlockProfiles::of(f);
            let b = |s, p, q, r| bp.besov(SpaceParams::new(s, p, q, r)).map(|n| n.value);
            (
                b(sigma, p, 1.0, 1.0)?,
                vec![(b(0.0, q, inf, inf)?, th), (b(s, r, inf, inf)?, 1.0 - th)],
            )
        }
        OzawaSobolev | OzawaTriebel | OzawaBesov | Lemma31Critical => {
            let (p, q, r, l, n) = (v("p")?, v("q")?, v("r")?, v("l")?, v("n")?);
            let s = a.get("s").copied().unwrap_or(n / r);
            let high = match kind {
                OzawaSobolev => lor(&lam(f, s)?, r, inf)?,
                OzawaTriebel => triebel_lorentz_norm(f, SpaceParams::new(s, r, inf, inf))?.value,
                _ => besov(f, s, r, inf, inf)?,
            };
            (lor(f, q, l)?, vec![(lor(f, p, inf)?, p / q), (high, 1.0 - p / q)])
        }
        Lemma31Supercritical => {
            let (p, r, s, th) = (v("p")?, v("r")?, v("s")?, v("theta")?);
            (
                lor(f, inf, inf)?,
                vec![(lor(f, p, inf)?, th), (besov(f, s, r, inf, inf)?, 1.0 - th)],
            )
        }
        SobolevLorentz => {
            let (p, r, s, p1) = (v("p")?, v("r")?, v("s")?, v("p1")?);
            (lor(f, p, p1)?, vec![(lor(&lam(f, s)?, r, p1)?, 1.0)])
        }
        SobolevGradient => {
            let (p, ps) = (v("p")?, v("pstar")?);
            (lor(f, ps, p)?, vec![(lp_norm(&gradient(f)?, p)?, 1.0)])
        }
        Prop32 => {
            let (sigma, s) = (v("sigma")?, v("s")?);
            let (p, p1, q, q1, r, r1) = (v("p")?, v("p1")?, v("q")?, v("q1")?, v("r")?, v("r1")?);
            (
                lor(&lam(f, sigma)?, p, p1)?,
                vec![(lor(f, q, q1)?, 1.0 - sigma / s), (lor(&lam(f, s)?, r, r1)?, sigma / s)],
            )
        }
        InterpChar => {
            let (p, q, r, p1, al) = (v("p")?, v("q")?, v("r")?, v("p1")?, v("alpha")?);
            constant = Some(interpolation_constant(p, q, r, p1));
            (lor(f, p, p1)?, vec![(lor(f, q, inf)?, al), (lor(f, r, inf)?, 1.0 - al)])
        }
        Holder => {
            let (r, s, r1, s1, r2, s2) = (v("r")?, v("s")?, v("r1")?, v("s1")?, v("r2")?, v("s2")?);
            let prod: Vec<f64> = f.magnitude().iter().zip(g.magnitude()).map(|(x, y)| x * y).collect();
            let fg = SampledField::scalar(*f.grid(), prod)?;
            (lor(&fg, r, s)?, vec![(lor(f, r1, s1)?, 1.0), (lor(g, r2, s2)?, 1.0)])
        }
        YoungOneil => {
            let (p, q, r, s, s1, s2) = (v("p")?, v("q")?, v("r")?, v("s")?, v("s1")?, v("s2")?);
            (lor(&convolve(f, g)?, r, s)?, vec![(lor(f, p, s1)?, 1.0), (lor(g, q, s2)?, 1.0)])
        }
        YoungGen => {
            let (p, q, r, s, l) = (v("p")?, v("q")?, v("r")?, v("s")?, v("l")?);
            (lor(&convolve(f, g)?, p, s)?, vec![(lor(f, q, l)?, 1.0), (lp_norm(g, r)?, 1.0)])
        }
        InclusionBounded => {
            let (m, mm, r, q) = (v("m")?, v("M")?, v("r")?, v("q")?);
            constant = Some(inclusion_constant(m, mm, r, q, support_measure(f)));
            (lor(f, m, r)?, vec![(lor(f, mm, q)?, 1.0)])
        }
    };
    let denom: f64 = rhs.iter().map(|(x, pw)| x.powf(*pw)).product();
    let (ratio, diverging) = if denom > 0.0 {
        (lhs / denom, false)
    } else if lhs > 0.0 {
        (f64::INFINITY, true)
    } else {
        (0.0, false)
    };
    Ok(RatioEval {
        lhs,
        rhs,
        ratio,
        constant,
        diverging,
    })
}

/// [`ratio_of`] with the case's resolved parameters and `g = u`.
pub fn ratio(case: &InequalityCase, u: &SampledField) -> Result<RatioEval> {
    ratio_of(case.kind, &case.resolved()?, u, u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    Diverging,
    Inadmissible,
}

/// One `(profile, λ)` evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub profile: String,
    pub lambda: f64,
    pub ratio: f64,
    pub lhs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub case: String,
    #[serde(with = "exponent_map")]
    pub params: Assignment,
    pub ratios: Vec<SweepPoint>,
    #[serde(rename = "maxRatio")]
    pub max_ratio: f64,
    /// `max |ratio(u_λ)/ratio(u) − 1|` over profiles and dilations.
    pub drift: f64,
    pub verdict: Verdict,
    pub tolerance: f64,
    /// Failed admissibility clauses, when the verdict is inadmissible.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<String>,
}

/// Default drift tolerance: 5% up to two dimensions, 10% in three.
pub fn default_drift_tolerance(n: usize) -> f64 {
    if n <= 2 {
        0.05
    } else {
        0.10
    }
}

/// A named profile in a sweep family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub name: String,
    pub profile: AnalyticProfile,
}

/// Built-in profile families.
pub fn family_preset(name: &str) -> Result<Vec<FamilyMember>> {
    let m = |name: &str, profile| FamilyMember {
        name: name.into(),
        profile,
    };
    let gaussian = AnalyticProfile::Gaussian {
        width: 3.0,
        amplitude: 1.0,
    };
    let bump = AnalyticProfile::Bump {
        radius: 6.0,
        amplitude: 1.0,
    };
    let band = AnalyticProfile::BandLimitedRandom {
        shell: [0.5, 1.0],
        seed: 11,
        spacing: 0.25,
        envelope: Some(5.0),
        amplitude: 1.0,
    };
    Ok(match name {
        "gaussian" => vec![m("gaussian", gaussian)],
        "gaussian-sweep" | "smooth" => vec![m("gaussian", gaussian), m("bump", bump), m("band_limited", band)],
        "indicator" => vec![m(
            "ball_indicator",
            AnalyticProfile::BallIndicator {
                radius: 4.0,
                amplitude: 1.0,
            },
        )],
        _ => return Err(Error::Domain(format!("unknown profile family `{name}`"))),
    })
}

/// Ratios of `case` over `family × dilations`. The drift reference is
/// `λ = 1` when present, otherwise the first dilation.
pub fn sweep(
    case: &InequalityCase,
    family: &[FamilyMember],
    dilations: &[f64],
    grid: &Grid,
    tolerance: f64,
) -> Result<VerificationReport> {
    let params = match case.resolved() {
        Ok(p) => p,
        Err(e) => {
            return Ok(inadmissible_report(case, case.params.clone(), vec![e.to_string()], tolerance));
        }
    };
    let adm = admissible(case.kind, &params);
    if !adm.admissible || family.is_empty() || dilations.is_empty() {
        let mut reasons = adm.reasons;
        if family.is_empty() || dilations.is_empty() {
            reasons.push("empty sweep".into());
        }
        return Ok(inadmissible_report(case, params, reasons, tolerance));
    }
    let jobs: Vec<(usize, f64)> = (0..family.len())
        .flat_map(|i| dilations.iter().map(move |&l| (i, l)))
        .collect();
    let points: Vec<SweepPoint> = jobs
        .par_iter()
        .map(|&(i, l)| {
            let u = family[i].profile.dilate(l)?.sample(grid)?;
            let e = ratio_of(case.kind, &params, &u, &u)?;
            Ok(SweepPoint {
                profile: family[i].name.clone(),
                lambda: l,
                ratio: e.ratio,
                lhs: e.lhs,
                constant: e.constant,
            })
        })
        .collect::<Result<_>>()?;
    let reference = if dilations.contains(&1.0) { 1.0 } else { dilations[0] };
    // Cases with an explicit constant (bounded domains) are compared through
    // ratio / C, since C itself may move with the support.
    let normalized = |p: &SweepPoint| p.ratio / p.constant.unwrap_or(1.0);
    let mut drift = 0.0f64;
    for m in family {
        let pts: Vec<&SweepPoint> = points.iter().filter(|p| p.profile == m.name).collect();
        let base = pts.iter().find(|p| p.lambda == reference).map(|p| normalized(p)).unwrap_or(f64::NAN);
        for p in pts {
            drift = drift.max((normalized(p) / base - 1.0).abs());
        }
    }
    let max_ratio = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let within_constant = points
        .iter()
        .all(|p| p.constant.map_or(true, |c| p.ratio <= c * (1.0 + tolerance)));
    let bounded = max_ratio.is_finite() && drift.is_finite() && drift <= tolerance && within_constant;
    Ok(VerificationReport {
        case: case.id.clone(),
        params,
        ratios: points,
        max_ratio,
        drift,
        verdict: if bounded { Verdict::Bounded } else { Verdict::Diverging },
        tolerance,
        excluded: Vec::new(),
    })
}

fn inadmissible_report(case: &InequalityCase, params: Assignment, reasons: Vec<String>, tolerance: f64) -> VerificationReport {
    VerificationReport {
        case: case.id.clone(),
        params,
        ratios: Vec::new(),
        max_ratio: 0.0,
        drift: 0.0,
        verdict: Verdict::Inadmissible,
        tolerance,
        excluded: reasons,
    }
}

/// The integer `j₀` minimizing `2^{ja}A + 2^{−jb}B`, with that value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    pub j0: i32,
    pub bound: f64,
}

/// Balances a growing and a decaying dyadic term. Of the two integers
/// around the continuous minimizer, the smaller value wins, ties going to
/// the lower `j`.
pub fn balance_j0(a: f64, b: f64, big_a: f64, big_b: f64) -> Result<Balance> {
    for (name, v) in [("a", a), ("b", b), ("A", big_a), ("B", big_b)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let f = |j: i32| 2f64.powf(j as f64 * a) * big_a + 2f64.powf(-(j as f64) * b) * big_b;
    let star = (b * big_b / (a * big_a)).log2() / (a + b);
    let lo = star.floor() as i32;
    let (flo, fhi) = (f(lo), f(lo + 1));
    Ok(if flo <= fhi {
        Balance { j0: lo, bound: flo }
    } else {
        Balance { j0: lo + 1, bound: fhi }
    })
}

/// Both sides of the low/high split at the balanced `j₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub j0: i32,
    /// `‖Ṡ_{j₀}u‖_{q,l}` (the low-pass part keeps the mean).
    pub low: f64,
    /// `Σ_{j≥j₀}‖Δ̇_j u‖_{q,l}`.
    pub high: f64,
    /// `‖u‖_{q,l}`.
    pub norm: f64,
    /// `q/(q−1)·(low + high)`.
    pub bound: f64,
    pub holds: bool,
    /// Balanced value of the two model terms.
    pub model: Balance,
    pub j_range: (i32, i32),
}

/// Low/high frequency split of `‖u‖_{q,l}` in the critical case `s = n/r`.
pub fn two_term_split(u: &SampledField, params: &Assignment) -> Result<SplitReport> {
    let get = |k: &str| {
        params
            .get(k)
            .copied()
            .ok_or_else(|| Error::Relation(format!("missing parameter {k}")))
    };
    let n = u.grid().dim as f64;
    let (p, q, r, l) = (get("p")?, get("q")?, get("r")?, get("l")?);
    let s = params.get("s").copied().unwrap_or(n / r);
    if (s - n / r).abs() > EXCLUSION_TOLERANCE {
        return Err(Error::Domain(format!(
            "the split applies to the critical case s = n/r = {}, got s = {s}",
            n / r
        )));
    }
    let mut full = params.clone();
    full.insert("n".into(), n);
    full.insert("s".into(), s);
    let adm = admissible(CaseKind::Lemma31Critical, &full);
    if !adm.admissible {
        return Err(Error::Inadmissible(adm.reasons));
    }
    let inf = f64::INFINITY;
    let weak = lor(u, p, inf)?;
    let bes = besov(u, s, r, inf, inf)?;
    // 1/q = (1−α)/p + α/(q+r).
    let alpha = (1.0 / p - 1.0 / q) / (1.0 / p - 1.0 / (q + r));
    let model = balance_j0(
        n * (1.0 / p - 1.0 / q),
        n * alpha / (q + r),
        weak,
        weak.powf(1.0 - alpha) * bes.powf(alpha),
    )?;
    let dec = decompose(u, DecompositionMode::Homogeneous);
    let (low, high) = split_terms(&dec, model.j0, q, l)?;
    let norm = lor(u, q, l)?;
    let bound = q / (q - 1.0) * (low + high);
    Ok(SplitReport {
        j0: model.j0,
        low,
        high,
        norm,
        bound,
        holds: norm <= bound * (1.0 + 1e-12),
        model,
        j_range: dec.j_range,
    })
}

/// `(‖Ṡ_{j₀}u‖_{q,l}, Σ_{j≥j₀}‖Δ̇_j u‖_{q,l})` for a homogeneous decomposition.
pub fn split_terms(dec: &DyadicDecomposition, j0: i32, q: f64, l: f64) -> Result<(f64, f64)> {
    let low = lor(&dec.partial_sum(j0), q, l)?;
    let high = dec
        .blocks
        .iter()
        .filter(|b| b.j >= j0)
        .map(|b| lor(&b.field, q, l))
        .sum::<Result<f64>>()?;
    Ok((low, high))
}

/// GNL ratios of truncated power laws `|x|^{s−n/r}` at growing radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub case: String,
    #[serde(with = "exponent_map")]
    pub params: Assignment,
    /// `(R, ratio)`.
    pub points: Vec<(f64, f64)>,
    /// Strict growth in `R`; absent with fewer than two radii.
    pub strictly_increasing: Option<bool>,
    /// `ratio(R_last) / ratio(R_first)`.
    pub growth: Option<f64>,
    pub verdict: Option<Verdict>,
}

/// GNL ratios of `|x|^{s−n/r}` truncated at each radius, on any
/// parameter set satisfying everything but the exclusion clause.
pub fn truncation_ratios(params: &Assignment, grid: &Grid, truncations: &[f64], core: f64) -> Result<Vec<(f64, f64)>> {
    let (s, r) = (params["s"], params["r"]);
    let exponent = grid.dim as f64 / r - s;
    truncations
        .par_iter()
        .map(|&big_r| {
            let u = AnalyticProfile::PowerLaw {
                exponent,
                truncation: Some(big_r),
                core: Some(core),
                amplitude: 1.0,
            }
            .sample(grid)?;
            Ok((big_r, ratio_of(CaseKind::Gnl, params, &u, &u)?.ratio))
        })
        .collect()
}

/// Counterexample probe on the exclusion line: ratios must grow with `R`.
pub fn counterexample_probe(case: &InequalityCase) -> Result<ProbeReport> {
    let params = case.resolved()?;
    let adm = admissible(CaseKind::Counterexample, &params);
    if !adm.admissible {
        return Err(Error::Inadmissible(adm.reasons));
    }
    let grid = case.grid();
    let core = case.core.unwrap_or_else(|| grid.spacing());
    let points = truncation_ratios(&params, &grid, &case.truncations, core)?;
    let (strictly_increasing, growth, verdict) = if points.len() >= 2 {
        let inc = points.windows(2).all(|w| w[1].1 > w[0].1);
        let growth = points.last().unwrap().1 / points[0].1;
        (
            Some(inc),
            Some(growth),
            Some(if inc { Verdict::Diverging } else { Verdict::Bounded }),
        )
    } else {
        (None, None, None)
    };
    Ok(ProbeReport {
        case: case.id.clone(),
        params,
        points,
        strictly_increasing,
        growth,
        verdict,
    })
}

/// The case registry, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub cases: Vec<InequalityCase>,
}

const BUILTIN_CASES: &str = include_str!("../data/cases.json");

impl Registry {
    pub fn builtin() -> Registry {
        Registry::from_json(BUILTIN_CASES).expect("built-in registry parses")
    }

    pub fn from_json(text: &str) -> Result<Registry> {
        let reg: Registry = serde_json::from_str(text)?;
        let mut seen = BTreeSet::new();
        for c in &reg.cases {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Parse(format!("duplicate case id `{}`", c.id)));
            }
        }
        Ok(reg)
    }

    pub fn get(&self, id: &str) -> Result<&InequalityCase> {
        self.cases
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::UnknownCase(id.into()))
    }

    pub fn ids(&self) -> Vec<&str> {
        self.cases.iter().map(|c| c.id.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assign(pairs: &[(&str, f64)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn sampled(p: AnalyticProfile, grid: &Grid) -> SampledField {
        p.sample(grid).unwrap()
    }

    fn ball(grid: &Grid, radius: f64) -> SampledField {
        sampled(AnalyticProfile::BallIndicator { radius, amplitude: 1.0 }, grid)
    }

    #[test]
    fn solves_classical_three_dimensional_case() {
        let known = assign(&[("n", 3.0), ("sigma", 0.0), ("s", 1.0), ("r", 2.0), ("q", 2.0), ("theta", 0.25)]);
        let a = solve_exponents(&ExponentRelation::gagliardo_nirenberg(), &known).unwrap();
        assert!((a["p"] - 4.0).abs() < 1e-12);
        let (res, _) = ExponentRelation::gagliardo_nirenberg().residual(&a).unwrap();
        assert!(res.abs() <= 1e-12);
    }

    #[test]
    fn solves_energy_criterion_five() {
        let rel5 = ExponentRelation::energy_criterion(5).unwrap();
        let a = rel5.solve(&assign(&[("s", 2.0), ("q", 2.0)])).unwrap();
        let p = a["p"];
        assert!((p - 1.25).abs() < 1e-12, "p = {p}");
        assert!(1.0 / 2.0 < p && p < 3.0);
        assert!(ExponentRelation::energy_criterion(1).is_err());
    }

    #[test]
    fn theta_one_collapses_to_p_equal_q() {
        let known = assign(&[("n", 2.0), ("sigma", 0.0), ("s", 1.3), ("r", 3.0), ("q", 5.0), ("theta", 1.0)]);
        let a = ExponentRelation::gagliardo_nirenberg().solve(&known).unwrap();
        assert!((a["p"] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn solve_rejects_bad_inputs() {
        let gn = ExponentRelation::gagliardo_nirenberg();
        let full = assign(&[("n", 3.0), ("sigma", 0.0), ("s", 1.0), ("r", 2.0), ("q", 2.0), ("theta", 0.25), ("p", 4.0)]);
        assert!(gn.solve(&full).is_err());
        let two = assign(&[("n", 3.0), ("sigma", 0.0), ("s", 1.0), ("r", 2.0)]);
        assert!(gn.solve(&two).is_err());
        // θ multiplies (n/r − s − n/q), which vanishes here.
        let zero = assign(&[("n", 2.0), ("sigma", 0.0), ("s", 0.5), ("r", 2.0), ("q", 4.0), ("p", 3.0)]);
        assert!(gn.solve(&zero).is_err());
    }

    #[test]
    fn reciprocal_unknown_can_be_infinite() {
        // r = r1 forces 1/r2 = 0.
        let h = ExponentRelation::harmonic("r", "r1", "r2");
        let a = h.solve(&assign(&[("r", 2.0), ("r1", 2.0)])).unwrap();
        assert!(a["r2"].is_infinite());
    }

    #[test]
    fn admissibility_examples() {
        let base = assign(&[("n", 3.0), ("sigma", 0.0), ("s", 1.0), ("r", 2.0), ("q", 2.0), ("theta", 0.25), ("p", 4.0)]);
        let ok = admissible(CaseKind::Gnl, &base);
        assert!(ok.admissible, "{:?}", ok.reasons);

        // p = 6 puts σ − n/p = s − n/r; θ then solves to 0 as well.
        let mut line = base.clone();
        line.insert("p".into(), 6.0);
        line.insert("theta".into(), 0.0);
        let bad = admissible(CaseKind::Gnl, &line);
        assert!(!bad.admissible);
        assert!(bad.reasons.iter().any(|r| r.contains("s - n/r != sigma - n/p")), "{:?}", bad.reasons);
        assert!(exclusion_offset(&line).abs() < EXCLUSION_TOLERANCE);

        let mut edge = assign(&[("n", 2.0), ("sigma", 0.5), ("s", 1.0), ("r", 2.0), ("q", 2.0), ("theta", 0.5)]);
        edge = ExponentRelation::gagliardo_nirenberg().solve(&edge).unwrap();
        let e = admissible(CaseKind::Gnl, &edge);
        assert!(!e.admissible);
        assert_eq!(e.reasons, vec!["0 < theta < 1 - sigma/s".to_string()]);
    }

    #[test]
    fn admissibility_lists_each_failed_clause() {
        let a = assign(&[("n", 2.0), ("sigma", 0.0), ("s", 1.0), ("r", 0.5), ("q", 0.9), ("theta", 0.5), ("p", 1.0)]);
        let r = admissible(CaseKind::Gnl, &a);
        assert!(r.reasons.iter().any(|c| c.starts_with("1 < q")));
        assert!(r.reasons.iter().any(|c| c.starts_with("1 < r")));
        let missing = admissible(CaseKind::InterpChar, &assign(&[("p", 2.0)]));
        assert!(missing.reasons.iter().any(|c| c == "missing parameter q"));
    }

    #[test]
    fn every_builtin_case_resolves_and_is_classified() {
        let reg = Registry::builtin();
        for c in &reg.cases {
            let a = c.resolved().unwrap_or_else(|e| panic!("{}: {e}", c.id));
            let adm = admissible(c.kind, &a);
            assert!(adm.admissible, "{}: {:?}", c.id, adm.reasons);
        }
    }

    #[test]
    fn interpolation_powers_sum_to_one() {
        let reg = Registry::builtin();
        let g = Grid::new(2, 64, 16.0).unwrap();
        let u = sampled(AnalyticProfile::Gaussian { width: 2.0, amplitude: 1.0 }, &g);
        for c in &reg.cases {
            if c.kind.is_bilinear() || matches!(c.kind, CaseKind::SobolevLorentz | CaseKind::SobolevGradient | CaseKind::InclusionBounded) {
                continue;
            }
            let e = ratio_of(c.kind, &c.resolved().unwrap(), &u, &u).unwrap();
            let total: f64 = e.rhs.iter().map(|r| r.1).sum();
            assert!((total - 1.0).abs() < 1e-12, "{}: {total}", c.id);
        }
    }

    #[test]
    fn interp_char_on_indicator_is_closed_form() {
        let g = Grid::new(2, 128, 16.0).unwrap();
        let f = ball(&g, 3.0);
        let reg = Registry::builtin();
        let a = reg.get("Interp-Char").unwrap().resolved().unwrap();
        let e = ratio_of(CaseKind::InterpChar, &a, &f, &f).unwrap();
        // Indicator norms: ‖χ_E‖_{p,p₁} = (p/p₁)^{1/p₁}|E|^{1/p}, weak norms |E|^{1/q}.
        let expect = (a["p"] / a["p1"]).powf(1.0 / a["p1"]);
        assert!(rel(e.ratio, expect) < 1e-12, "{} vs {expect}", e.ratio);
        assert!(e.ratio <= e.constant.unwrap());
    }

    #[test]
    fn holder_on_indicators_is_closed_form() {
        let g = Grid::new(2, 64, 16.0).unwrap();
        let f = ball(&g, 4.0);
        let a = assign(&[("r", 2.0), ("s", 2.0), ("r1", 3.0), ("s1", 2.0), ("r2", 6.0), ("s2", 4.0)]);
        assert!(admissible(CaseKind::Holder, &a).admissible);
        let e = ratio_of(CaseKind::Holder, &a, &f, &f).unwrap();
        let k = |r: f64, s: f64| (r / s).powf(1.0 / s);
        let expect = k(2.0, 2.0) / (k(3.0, 2.0) * k(6.0, 4.0));
        assert!(rel(e.ratio, expect) < 1e-12, "{} vs {expect}", e.ratio);
    }

    #[test]
    fn inclusion_on_indicators_matches_constant_formula() {
        let g = Grid::new(2, 64, 16.0).unwrap();
        for radius in [1.5, 3.0, 6.0] {
            let f = ball(&g, radius);
            let omega = f.values().iter().filter(|&&v| v != 0.0).count() as f64 * g.cell_measure();
            for (m, big_m, r, q) in [(2.0, 4.0, 2.0, 1.0), (1.5, 3.0, 1.0, 2.0), (1.0, f64::INFINITY, 3.0, f64::INFINITY)] {
                let a = assign(&[("m", m), ("M", big_m), ("r", r), ("q", q)]);
                let e = ratio_of(CaseKind::InclusionBounded, &a, &f, &f).unwrap();
                let lhs = (m / r).powf(1.0 / r) * omega.powf(1.0 / m);
                let rhs = if q.is_infinite() { 1.0 } else { (big_m / q).powf(1.0 / q) } * omega.powf(recip(big_m));
                assert!(rel(e.ratio, lhs / rhs) < 1e-12);
                let c = e.constant.unwrap();
                assert!(rel(c, inclusion_constant(m, big_m, r, q, omega)) < 1e-15);
                assert!(e.ratio <= c, "ratio {} above constant {c}", e.ratio);
            }
        }
    }

    #[test]
    fn endpoint_collapse_gives_ratio_one() {
        // s = 0 makes both sides the same Lorentz norm.
        let g = Grid::new(2, 64, 16.0).unwrap();
        let u = sampled(AnalyticProfile::Gaussian { width: 2.0, amplitude: 1.0 }, &g);
        let a = assign(&[("n", 2.0), ("r", 3.0), ("s", 0.0), ("p", 3.0), ("p1", 2.0)]);
        let e = ratio_of(CaseKind::SobolevLorentz, &a, &u, &u).unwrap();
        assert!((e.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_rejects_zero_field_and_flags_vanishing_rhs() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let z = SampledField::zeros(g, 1);
        let a = Registry::builtin().get("Holder").unwrap().resolved().unwrap();
        assert!(ratio_of(CaseKind::Holder, &a, &z, &z).is_err());
        // L^{∞,2} is trivial, so the right side vanishes.
        let f = ball(&g, 2.0);
        let mut b = a.clone();
        b.insert("s1".into(), 2.0);
        b.insert("r1".into(), f64::INFINITY);
        let e = ratio_of(CaseKind::Holder, &b, &f, &f).unwrap();
        assert!(e.diverging && e.ratio.is_infinite());
    }

    #[test]
    fn gnl_ratio_on_gaussian_is_finite() {
        let c = Registry::builtin().get("GNL-1.7-3d").unwrap().clone();
        let a = c.resolved().unwrap();
        assert!((a["p"] - 4.0).abs() < 1e-12);
        let g = Grid::new(3, 32, 16.0).unwrap();
        let u = sampled(AnalyticProfile::Gaussian { width: 2.0, amplitude: 1.0 }, &g);
        let e = ratio(&c, &u).unwrap();
        assert!(e.ratio.is_finite() && e.ratio > 0.0);
    }

    #[test]
    fn perturbed_relation_drifts_more_over_wider_dilation_range() {
        let c = Registry::builtin().get("GNL-1.7").unwrap().clone();
        let mut a = c.resolved().unwrap();
        let p = a["p"] + 0.5;
        a.insert("p".into(), p);
        let g = c.grid();
        let gauss = AnalyticProfile::Gaussian { width: 3.0, amplitude: 1.0 };
        let at = |l: f64| ratio_of(CaseKind::Gnl, &a, &gauss.dilate(l).unwrap().sample(&g).unwrap(), &gauss.sample(&g).unwrap());
        let base = at(1.0).unwrap().ratio;
        let mut drifts = Vec::new();
        for l in [1.5, 2.0, 3.0] {
            let d = [l, 1.0 / l]
                .iter()
                .map(|&x| (at(x).unwrap().ratio / base - 1.0).abs())
                .fold(0.0, f64::max);
            drifts.push(d);
        }
        assert!(drifts.windows(2).all(|w| w[1] > w[0]), "{drifts:?}");
        // Power counting: λ^{n(1/p_exact − 1/p)} from the left side alone.
        let exact = c.resolved().unwrap()["p"];
        let predicted = 3f64.powf(2.0 * (1.0 / exact - 1.0 / p)) - 1.0;
        assert!(drifts[2] > 0.5 * predicted, "{drifts:?} vs {predicted}");
    }

    #[test]
    fn sweep_on_inadmissible_or_empty_input() {
        let reg = Registry::builtin();
        let mut c = reg.get("CE-excluded-line").unwrap().clone();
        c.kind = CaseKind::Gnl;
        let g = Grid::new(2, 32, 8.0).unwrap();
        let fam = family_preset("gaussian").unwrap();
        let r = sweep(&c, &fam, &[0.5, 1.0, 2.0], &g, 0.05).unwrap();
        assert_eq!(r.verdict, Verdict::Inadmissible);
        assert!(!r.excluded.is_empty());
        let ok = reg.get("Holder").unwrap();
        let r = sweep(ok, &[], &[1.0], &g, 0.05).unwrap();
        assert_eq!(r.verdict, Verdict::Inadmissible);
    }

    #[test]
    fn holder_sweep_is_exactly_one() {
        let c = Registry::builtin().get("Holder").unwrap().clone();
        let g = Grid::new(2, 64, 32.0).unwrap();
        let r = sweep(&c, &family_preset("gaussian-sweep").unwrap(), &[0.5, 1.0, 2.0], &g, 0.05).unwrap();
        assert_eq!(r.verdict, Verdict::Bounded);
        assert!((r.max_ratio - 1.0).abs() < 1e-12);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("maxRatio").is_some());
    }

    #[test]
    fn balance_examples() {
        assert_eq!(balance_j0(1.0, 1.0, 3.0, 3.0).unwrap().j0, 0);
        let b = balance_j0(1.0, 1.0, 1.0, 16.0).unwrap();
        assert_eq!(b, Balance { j0: 2, bound: 8.0 });
        assert!(balance_j0(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(balance_j0(1.0, 1.0, -1.0, 1.0).is_err());
        // Exact tie between j = 0 and j = 1 goes to the lower index.
        let t = balance_j0(1.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(t.j0, 0);
    }

    proptest! {
        #[test]
        fn balance_is_locally_optimal(
            a in 0.05..4.0f64,
            b in 0.05..4.0f64,
            la in -20.0..20.0f64,
            lb in -20.0..20.0f64,
        ) {
            let (big_a, big_b) = (2f64.powf(la), 2f64.powf(lb));
            let bal = balance_j0(a, b, big_a, big_b).unwrap();
            let f = |j: i32| 2f64.powf(j as f64 * a) * big_a + 2f64.powf(-(j as f64) * b) * big_b;
            prop_assert!(bal.bound <= f(bal.j0 - 1) * (1.0 + 1e-12));
            prop_assert!(bal.bound <= f(bal.j0 + 1) * (1.0 + 1e-12));
            let cont = (a + b) * (big_a / b).powf(b / (a + b)) * (big_b / a).powf(a / (a + b));
            prop_assert!(bal.bound >= cont * (1.0 - 1e-12));
            prop_assert!(bal.bound <= cont * 2f64.powf(a.max(b)));
        }

        #[test]
        fn relation_round_trips(
            n in 1usize..=3,
            sigma in 0.0..1.0f64,
            ds in 0.1..2.0f64,
            q in 1.1..10.0f64,
            r in 1.1..10.0f64,
            t in 0.05..0.95f64,
        ) {
            let s = sigma + ds;
            let theta = t * (1.0 - sigma / s);
            let gn = ExponentRelation::gagliardo_nirenberg();
            let known = assign(&[("n", n as f64), ("sigma", sigma), ("s", s), ("q", q), ("r", r), ("theta", theta)]);
            let full = gn.solve(&known).unwrap();
            prop_assume!(full["p"] > 0.0 && full["p"].is_finite());
            prop_assume!(admissible(CaseKind::Gnl, &full).admissible);
            for v in gn.variables() {
                let mut partial = full.clone();
                partial.remove(&v);
                // Skip variables whose coefficient vanishes at this point.
                let Ok(back) = gn.solve(&partial) else { continue };
                prop_assert!((back[&v] - full[&v]).abs() <= 1e-12 * full[&v].abs().max(1.0),
                    "{v}: {} vs {}", back[&v], full[&v]);
            }
        }
    }

    #[test]
    fn split_terms_vanish_on_the_far_side() {
        let g = Grid::new(2, 64, 2.0 * std::f64::consts::PI).unwrap();
        // |k| = 6 lies in the core of block 2 only.
        let u = sampled(AnalyticProfile::PureMode { wavevector: vec![6.0, 0.0], amplitude: 1.0 }, &g);
        let dec = decompose(&u, DecompositionMode::Homogeneous);
        let (low, high) = split_terms(&dec, 1, 4.0, 4.0).unwrap();
        assert!(low < 1e-10 && high > 0.1);
        let (low, high) = split_terms(&dec, 4, 4.0, 4.0).unwrap();
        assert!(high < 1e-10 && low > 0.1);
    }

    #[test]
    fn two_term_split_on_gaussian() {
        let g = Grid::new(2, 128, 32.0).unwrap();
        let u = sampled(AnalyticProfile::Gaussian { width: 2.0, amplitude: 1.0 }, &g);
        let a = assign(&[("p", 2.0), ("q", 4.0), ("r", 2.0), ("l", 4.0)]);
        let rep = two_term_split(&u, &a).unwrap();
        assert!(rep.holds, "{rep:?}");
        assert!(rep.j0 >= rep.j_range.0 - 1 && rep.j0 <= rep.j_range.1 + 1);
        let mut off = a.clone();
        off.insert("s".into(), 0.5);
        assert!(two_term_split(&u, &off).is_err());
    }

    #[test]
    fn probe_single_radius_has_no_verdict() {
        let mut c = Registry::builtin().get("CE-excluded-line").unwrap().clone();
        c.grid = Some(Grid::new(2, 64, 16.0).unwrap());
        c.truncations = vec![2.0];
        let rep = counterexample_probe(&c).unwrap();
        assert_eq!(rep.points.len(), 1);
        assert!(rep.verdict.is_none() && rep.growth.is_none());
        let off = Registry::builtin().get("CE-contrast").unwrap().clone();
        let mut off = off;
        off.kind = CaseKind::Counterexample;
        assert!(counterexample_probe(&off).is_err());
    }

    #[test]
    fn registry_parsing() {
        let reg = Registry::builtin();
        assert!(matches!(reg.get("nope"), Err(Error::UnknownCase(_))));
        for id in ["GNL-1.7", "GN-Besov-1.13", "Holder", "Young-ONeil", "Young-Gen-2.2", "Interp-Char", "Inclusion-Bounded", "Sobolev-Lorentz-3.1", "Lemma3.1-critical", "Lemma3.1-supercritical", "Ozawa-1.15", "Ozawa-1.16", "Ozawa-1.17"] {
            assert!(reg.get(id).is_ok(), "{id}");
        }
        let text = r#"{"cases": [
            {"id": "a", "kind": "young_gen", "params": {"q": "4/3", "r": "4/3", "l": 2, "s": "inf"}},
            {"id": "a", "kind": "holder", "params": {}}
        ]}"#;
        assert!(matches!(Registry::from_json(text), Err(Error::Parse(_))));
        let one = Registry::from_json(&text.replace(r#""id": "a", "kind": "holder""#, r#""id": "b", "kind": "holder""#)).unwrap();
        let c = one.get("a").unwrap();
        assert!((c.params["q"] - 4.0 / 3.0).abs() < 1e-15);
        assert!(c.params["s"].is_infinite());
        let back = serde_json::to_string(c).unwrap();
        assert!(back.contains(r#""s":"inf""#));
        let again: InequalityCase = serde_json::from_str(&back).unwrap();
        assert_eq!(&again, c);
        assert!(Registry::from_json(r#"{"cases": [{"id": "x", "kind": "nope", "params": {}}]}"#).is_err());
    }
}
