//! Command-line front end: norms of analytic profiles, registered
//! verifications, flux tables and report merging. Output is JSON lines: a
//! header carrying the timestamp and runtime, then records, then a summary.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::field::{lp_norm, AnalyticProfile, Grid, ProfileSpec};
use crate::inequalities::{
    admissible, counterexample_probe, default_drift_tolerance, exponent_map, family_preset, sweep,
    truncation_ratios, Assignment, CaseKind, FamilyMember, InequalityCase, Registry, Verdict,
};
use crate::nse::{self, FluxAnalysis};
use crate::rearrange::{decreasing_rearrangement, Variant};
use crate::spaces::{besov_lorentz_norm, sobolev_lorentz_norm, triebel_lorentz_norm, SpaceParams};

pub const DEFAULT_SEED: u64 = 11;
pub const DEFAULT_DILATIONS: [f64; 3] = [0.5, 1.0, 2.0];

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INADMISSIBLE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "lorentzkit", version, about = "Lorentz norms, Littlewood-Paley analysis and inequality verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Norm of one profile: `norm lorentz p=2 q=inf --profile ball_indicator:radius=1`.
    Norm {
        /// lorentz | lp | besov | triebel | sobolev
        kind: String,
        /// Indices as NAME=VALUE.
        params: Vec<String>,
    },
    /// Run registered verification cases (all of them without --case).
    Verify,
    /// Energy flux table of a divergence-free field.
    Flux {
        /// taylor-green | random
        #[arg(long, default_value = "random")]
        field: String,
        /// Frequency shell of the random field.
        #[arg(long, default_value = "1,8")]
        shell: String,
        /// Filter indices Q.
        #[arg(long, default_value = "0,1,2,3,4,5,6")]
        qs: String,
        /// Lebesgue index of the block interpolation check.
        #[arg(long, default_value = "6")]
        interp: String,
        /// Read the velocity from a snapshot file instead.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Merge report files into one table.
    Report { paths: Vec<PathBuf> },
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// `n,N,L`; `L` accepts forms such as `2pi` or `4/3`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    #[arg(long = "case", global = true)]
    pub cases: Vec<String>,
    /// Profile as JSON or `family:key=value,...` (lists separated by `;`).
    #[arg(long, global = true)]
    pub profile: Option<String>,
    #[arg(long, global = true)]
    pub dilations: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tolerance override `NAME=VALUE`; names: drift, growth, contrast.
    #[arg(long = "tol", global = true)]
    pub tols: Vec<String>,
    #[arg(long, global = true)]
    pub truncations: Option<String>,
    /// Profile family for sweeps.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Override a case parameter, `NAME=VALUE`.
    #[arg(long = "param", global = true)]
    pub params: Vec<String>,
    /// JSON file with the same keys as the flags; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Keys accepted in a config file.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    grid: Option<Value>,
    #[serde(default, alias = "case")]
    cases: Vec<String>,
    profile: Option<Value>,
    dilations: Option<Vec<Value>>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default, alias = "tol")]
    tols: BTreeMap<String, Value>,
    truncations: Option<Vec<Value>>,
    preset: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Sweep drift; `None` means the dimension default.
    pub drift: Option<f64>,
    /// Minimum `ratio(R_last)/ratio(R_first)` for a counterexample probe.
    pub growth: f64,
    /// Maximum spread of ratios for an admissible truncation probe.
    pub contrast: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            drift: None,
            growth: 1.5,
            contrast: 2.0,
        }
    }
}

/// Validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub grid: Option<Grid>,
    pub cases: Vec<String>,
    pub profile: Option<ProfileSpec>,
    pub dilations: Vec<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub truncations: Option<Vec<f64>>,
    pub preset: Option<String>,
    pub params: Assignment,
}

fn number(s: &str) -> Result<f64> {
    exponent_map::parse(s).ok_or_else(|| Error::Parse(format!("not a number: `{s}`")))
}

fn value_number(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse(format!("bad number {n}"))),
        Value::String(s) => number(s),
        _ => Err(Error::Parse(format!("expected a number, got {v}"))),
    }
}

fn number_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(number).collect()
}

/// A length such as `64`, `2pi`, `pi/2` or `4/3`.
pub fn parse_length(s: &str) -> Result<f64> {
    let t = s.trim().to_lowercase();
    let (head, tail) = match t.split_once('/') {
        Some((a, b)) => (a.to_string(), Some(number(b)?)),
        None => (t.clone(), None),
    };
    let head = head.trim();
    let base = if let Some(k) = head.strip_suffix("pi").or_else(|| head.strip_suffix('π')) {
        let k = k.trim().trim_end_matches('*');
        (if k.is_empty() { 1.0 } else { number(k)? }) * std::f64::consts::PI
    } else {
        number(head)?
    };
    Ok(tail.map_or(base, |d| base / d))
}

pub fn parse_grid(s: &str) -> Result<Grid> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("grid must be `n,N,L`, got `{s}`")));
    }
    let n = parts[0].trim().parse().map_err(|_| Error::Parse(format!("bad dimension `{}`", parts[0])))?;
    let points = parts[1].trim().parse().map_err(|_| Error::Parse(format!("bad point count `{}`", parts[1])))?;
    Grid::new(n, points, parse_length(parts[2])?)
}

fn short_value(v: &str) -> Result<Value> {
    if v.contains(';') {
        return v.split(';').map(short_value).collect::<Result<Vec<_>>>().map(Value::Array);
    }
    let x = number(v)?;
    Ok(if x.fract() == 0.0 && x.abs() < 9.0e15 {
        json!(x as i64)
    } else {
        json!(x)
    })
}

/// Profile from JSON or from the short form `family:key=value,...`.
/// A band-limited profile without a seed takes `seed`.
pub fn parse_profile(s: &str, seed: u64) -> Result<ProfileSpec> {
    let t = s.trim();
    let mut spec: Value = if t.starts_with('{') {
        serde_json::from_str(t)?
    } else {
        let (family, rest) = t.split_once(':').unwrap_or((t, ""));
        let mut params = Map::new();
        for kv in rest.split(',').filter(|kv| !kv.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("profile parameter `{kv}` is not key=value")))?;
            params.insert(k.trim().to_string(), short_value(v)?);
        }
        if params.is_empty() {
            json!({"family": family.trim()})
        } else {
            json!({"family": family.trim(), "params": params})
        }
    };
    if spec["family"] == "band_limited_random" {
        if let Some(p) = spec.get_mut("params").and_then(Value::as_object_mut) {
            p.entry("seed").or_insert(json!(seed));
        }
    }
    let spec: ProfileSpec = serde_json::from_value(spec).map_err(|e| Error::Profile(e.to_string()))?;
    spec.profile.validate()?;
    Ok(spec)
}

fn key_value(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("expected NAME=VALUE, got `{s}`")))?;
    Ok((k.trim().to_string(), number(v)?))
}

fn set_tolerance(t: &mut Tolerances, name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        return Err(Error::Domain(format!("tolerance {name} must be nonnegative, got {v}")));
    }
    match name {
        "drift" => t.drift = Some(v),
        "growth" => t.growth = v,
        "contrast" => t.contrast = v,
        _ => return Err(Error::Parse(format!("unknown tolerance `{name}` (drift, growth, contrast)"))),
    }
    Ok(())
}

impl RunConfig {
    /// Merges flags over the optional config file and validates everything.
    pub fn from_flags(flags: &Flags) -> Result<RunConfig> {
        let file: ConfigFile = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let seed = flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let grid = match (&flags.grid, &file.grid) {
            (Some(g), _) => Some(parse_grid(g)?),
            (None, Some(Value::String(g))) => Some(parse_grid(g)?),
            (None, Some(g)) => Some(serde_json::from_value(g.clone()).map_err(|e| Error::Grid(e.to_string()))?),
            (None, None) => None,
        };
        let profile = match (&flags.profile, &file.profile) {
            (Some(p), _) => Some(parse_profile(p, seed)?),
            (None, Some(Value::String(p))) => Some(parse_profile(p, seed)?),
            (None, Some(p)) => Some(parse_profile(&p.to_string(), seed)?),
            (None, None) => None,
        };
        let dilations = match (&flags.dilations, &file.dilations) {
            (Some(d), _) => number_list(d)?,
            (None, Some(d)) => d.iter().map(value_number).collect::<Result<_>>()?,
            (None, None) => DEFAULT_DILATIONS.to_vec(),
        };
        if dilations.is_empty() || dilations.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::Domain(format!("dilations must be positive and finite, got {dilations:?}")));
        }
        let truncations = match (&flags.truncations, &file.truncations) {
            (Some(t), _) => Some(number_list(t)?),
            (None, Some(t)) => Some(t.iter().map(value_number).collect::<Result<_>>()?),
            (None, None) => None,
        };
        if let Some(t) = &truncations {
            if t.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
                return Err(Error::Domain(format!("truncation radii must be positive, got {t:?}")));
            }
        }
        let mut tolerances = Tolerances::default();
        for (k, v) in &file.tols {
            set_tolerance(&mut tolerances, k, value_number(v)?)?;
        }
        for s in &flags.tols {
            let (k, v) = key_value(s)?;
            set_tolerance(&mut tolerances, &k, v)?;
        }
        let mut params = Assignment::new();
        for (k, v) in &file.params {
            params.insert(k.clone(), value_number(v)?);
        }
        for s in &flags.params {
            let (k, v) = key_value(s)?;
            params.insert(k, v);
        }
        let preset = flags.preset.clone().or(file.preset);
        if let Some(p) = &preset {
            family_preset(p)?;
        }
        let cases = if flags.cases.is_empty() { file.cases } else { flags.cases.clone() };
        let registry = Registry::builtin();
        for id in &cases {
            registry.get(id)?;
        }
        Ok(RunConfig {
            grid,
            cases,
            profile,
            dilations,
            seed,
            out: flags.out.clone().or(file.out),
            tolerances,
            truncations,
            preset,
            params,
        })
    }
}

/// Command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Inadmissible(_) => EXIT_INADMISSIBLE,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Records of one command plus the exit code it settles on.
pub struct Output {
    pub records: Vec<Value>,
    pub code: i32,
    /// Diagnostics for stderr.
    pub notes: Vec<String>,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report records serialize")
}

fn tagged<T: Serialize>(kind: &str, x: &T) -> Value {
    let mut v = to_value(x);
    if let Value::Object(m) = &mut v {
        m.insert("type".into(), json!(kind));
    }
    v
}

#[derive(Serialize)]
struct ParamMap<'a>(#[serde(with = "exponent_map")] &'a Assignment);

// ---------------------------------------------------------------------------
// norm

fn norm_params(kind: &str, tokens: &[String]) -> Result<(Assignment, Variant)> {
    let allowed: &[&str] = match kind {
        "lorentz" => &["p", "q", "variant"],
        "lp" => &["p"],
        "besov" | "triebel" => &["s", "p", "q", "r"],
        "sobolev" => &["s", "p", "p1"],
        _ => {
            return Err(Error::Parse(format!(
                "unknown norm `{kind}` (lorentz, lp, besov, triebel, sobolev)"
            )))
        }
    };
    let mut a = Assignment::new();
    let mut variant = Variant::Plain;
    for t in tokens {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected NAME=VALUE, got `{t}`")))?;
        if !allowed.contains(&k) {
            return Err(Error::Parse(format!("`{k}` is not a parameter of the {kind} norm ({})", allowed.join(", "))));
        }
        if k == "variant" {
            variant = match v {
                "plain" => Variant::Plain,
                "star" => Variant::Star,
                _ => return Err(Error::Parse(format!("variant must be plain or star, got `{v}`"))),
            };
        } else {
            a.insert(k.into(), number(v)?);
        }
    }
    let need = |a: &Assignment, k: &str| {
        a.get(k)
            .copied()
            .ok_or_else(|| Error::Parse(format!("the {kind} norm needs `{k}`")))
    };
    let p = need(&a, "p")?;
    match kind {
        "lorentz" => {
            a.entry("q".into()).or_insert(p);
        }
        "besov" | "triebel" => {
            need(&a, "s")?;
            need(&a, "r")?;
            a.entry("q".into()).or_insert(p);
        }
        "sobolev" => {
            need(&a, "s")?;
            a.entry("p1".into()).or_insert(p);
        }
        _ => {}
    }
    Ok((a, variant))
}

pub fn run_norm(cfg: &RunConfig, kind: &str, tokens: &[String]) -> std::result::Result<Output, Failure> {
    let (params, variant) = norm_params(kind, tokens)?;
    let spec = cfg
        .profile
        .clone()
        .ok_or_else(|| Error::Parse("norm needs --profile".into()))?;
    let grid = cfg
        .grid
        .or(spec.grid)
        .ok_or_else(|| Error::Parse("norm needs --grid (or a grid inside the profile)".into()))?;
    let u = spec.profile.sample(&grid)?;
    let mut record = json!({
        "type": "norm",
        "norm": kind,
        "params": to_value(&ParamMap(&params)),
        "profile": to_value(&spec.profile),
        "grid": to_value(&grid),
    });
    let p = params["p"];
    let (value, extra) = match kind {
        "lorentz" => {
            let e = decreasing_rearrangement(&u).lorentz(p, params["q"], variant)?;
            record["variant"] = to_value(&variant);
            (e.value, json!({"trivialSpace": e.trivial_space}))
        }
        "lp" => (lp_norm(&u, p)?, Value::Null),
        "besov" | "triebel" => {
            let sp = SpaceParams::new(params["s"], p, params["q"], params["r"]);
            let e = if kind == "besov" {
                besov_lorentz_norm(&u, sp)?
            } else {
                triebel_lorentz_norm(&u, sp)?
            };
            (
                e.value,
                json!({"jRange": e.j_range, "edgeFraction": e.edge_fraction, "truncated": e.truncated, "trivialSpace": e.trivial_space}),
            )
        }
        "sobolev" => (sobolev_lorentz_norm(&u, params["s"], p, params["p1"])?, Value::Null),
        _ => unreachable!("norm kind validated"),
    };
    record["value"] = json!(value);
    if !extra.is_null() {
        record["flags"] = extra;
    }
    Ok(Output {
        records: vec![record],
        code: EXIT_OK,
        notes: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// verify

/// Per-case summary row; this is what `report` merges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub case: String,
    pub kind: CaseKind,
    #[serde(with = "exponent_map")]
    pub params: Assignment,
    #[serde(rename = "maxRatio")]
    pub max_ratio: f64,
    /// Sweep drift; absent for truncation probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    /// `ratio(R_last)/ratio(R_first)` for truncation probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
    pub verdict: Verdict,
    pub expected: Verdict,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<String>,
}

fn seeded_family(name: &str, seed: u64) -> Result<Vec<FamilyMember>> {
    let mut family = family_preset(name)?;
    for m in &mut family {
        if let AnalyticProfile::BandLimitedRandom { seed: s, .. } = &mut m.profile {
            *s = seed;
        }
    }
    Ok(family)
}

fn case_with_overrides(case: &InequalityCase, cfg: &RunConfig) -> InequalityCase {
    let mut c = case.clone();
    for (k, &v) in &cfg.params {
        c.params.insert(k.clone(), v);
    }
    if let Some(g) = cfg.grid {
        c.grid = Some(g);
        c.params.insert("n".into(), g.dim as f64);
    }
    if let Some(t) = &cfg.truncations {
        c.truncations = t.clone();
    }
    c
}

fn probe_case(case: &InequalityCase, cfg: &RunConfig, records: &mut Vec<Value>) -> Result<CaseRow> {
    let (params, points, expected) = if case.kind == CaseKind::Counterexample {
        let rep = counterexample_probe(case)?;
        (rep.params, rep.points, Verdict::Diverging)
    } else {
        let params = case.resolved()?;
        let adm = admissible(case.kind, &params);
        if !adm.admissible {
            return Err(Error::Inadmissible(adm.reasons));
        }
        let grid = case.grid();
        let core = case.core.unwrap_or_else(|| grid.spacing());
        let points = truncation_ratios(&params, &grid, &case.truncations, core)?;
        (params, points, Verdict::Bounded)
    };
    if points.len() < 2 {
        return Err(Error::Domain(format!("case {} needs at least two truncation radii", case.id)));
    }
    for &(big_r, ratio) in &points {
        records.push(json!({"type": "probe", "case": case.id, "R": big_r, "ratio": ratio}));
    }
    let ratios: Vec<f64> = points.iter().map(|p| p.1).collect();
    let growth = ratios[ratios.len() - 1] / ratios[0];
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let verdict = if expected == Verdict::Diverging {
        let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
        if increasing && growth >= cfg.tolerances.growth {
            Verdict::Diverging
        } else {
            Verdict::Bounded
        }
    } else {
        let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        if max_ratio.is_finite() && max_ratio <= cfg.tolerances.contrast * min_ratio {
            Verdict::Bounded
        } else {
            Verdict::Diverging
        }
    };
    Ok(CaseRow {
        case: case.id.clone(),
        kind: case.kind,
        params,
        max_ratio,
        drift: None,
        growth: Some(growth),
        verdict,
        expected,
        passed: verdict == expected,
        excluded: Vec::new(),
    })
}

fn sweep_case(case: &InequalityCase, cfg: &RunConfig, records: &mut Vec<Value>) -> Result<CaseRow> {
    let family_name = cfg
        .preset
        .clone()
        .or_else(|| case.family.clone())
        .ok_or_else(|| Error::Domain(format!("case {} has no profile family; pass --preset", case.id)))?;
    let family = seeded_family(&family_name, cfg.seed)?;
    let grid = case.grid();
    let tol = cfg.tolerances.drift.unwrap_or_else(|| default_drift_tolerance(grid.dim));
    let rep = sweep(case, &family, &cfg.dilations, &grid, tol)?;
    for p in &rep.ratios {
        let mut v = tagged("point", p);
        v["case"] = json!(case.id);
        records.push(v);
    }
    Ok(CaseRow {
        case: rep.case,
        kind: case.kind,
        params: rep.params,
        max_ratio: rep.max_ratio,
        drift: Some(rep.drift),
        growth: None,
        verdict: rep.verdict,
        expected: Verdict::Bounded,
        passed: rep.verdict == Verdict::Bounded,
        excluded: rep.excluded,
    })
}

fn uses_probe(case: &InequalityCase, cfg: &RunConfig) -> bool {
    case.kind == CaseKind::Counterexample || (!case.truncations.is_empty() && case.family.is_none() && cfg.preset.is_none())
}

pub fn run_verify(cfg: &RunConfig) -> std::result::Result<Output, Failure> {
    let registry = Registry::builtin();
    let ids: Vec<String> = if cfg.cases.is_empty() {
        registry.ids().into_iter().map(String::from).collect()
    } else {
        cfg.cases.clone()
    };
    let mut records = Vec::new();
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    for id in &ids {
        let case = case_with_overrides(registry.get(id)?, cfg);
        let row = if uses_probe(&case, cfg) {
            match probe_case(&case, cfg, &mut records) {
                Ok(r) => r,
                Err(Error::Inadmissible(reasons)) => CaseRow {
                    case: case.id.clone(),
                    kind: case.kind,
                    params: case.params.clone(),
                    max_ratio: 0.0,
                    drift: None,
                    growth: None,
                    verdict: Verdict::Inadmissible,
                    expected: if case.kind == CaseKind::Counterexample { Verdict::Diverging } else { Verdict::Bounded },
                    passed: false,
                    excluded: reasons,
                },
                Err(e) => return Err(e.into()),
            }
        } else {
            sweep_case(&case, cfg, &mut records)?
        };
        if row.verdict == Verdict::Inadmissible {
            notes.push(format!("{}: inadmissible: {}", row.case, row.excluded.join("; ")));
        } else if !row.passed {
            notes.push(format!("{}: verdict {:?}, expected {:?}", row.case, row.verdict, row.expected));
        }
        records.push(tagged("case", &row));
        rows.push(row);
    }
    let inadmissible = rows.iter().filter(|r| r.verdict == Verdict::Inadmissible).count();
    let passed = rows.iter().filter(|r| r.passed).count();
    records.push(json!({
        "type": "summary",
        "cases": rows.len(),
        "passed": passed,
        "failed": rows.len() - passed - inadmissible,
        "inadmissible": inadmissible,
    }));
    let code = if inadmissible > 0 {
        EXIT_INADMISSIBLE
    } else if passed < rows.len() {
        EXIT_FAILED
    } else {
        EXIT_OK
    };
    Ok(Output { records, code, notes })
}

// ---------------------------------------------------------------------------
// flux

pub struct FluxOptions<'a> {
    pub field: &'a str,
    pub shell: &'a str,
    pub qs: &'a str,
    pub interp: &'a str,
    pub snapshot: Option<&'a Path>,
}

pub fn run_flux(cfg: &RunConfig, opts: &FluxOptions) -> std::result::Result<Output, Failure> {
    let qs: Vec<i32> = opts
        .qs
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad filter index `{t}`"))))
        .collect::<Result<_>>()?;
    let interp_q = number(opts.interp)?;
    let (v, source) = match opts.snapshot {
        Some(path) => {
            let (time, f) = nse::read_snapshot(path)?;
            (nse::leray_project(&f)?, json!({"snapshot": path.display().to_string(), "time": time}))
        }
        None => {
            let grid = match cfg.grid {
                Some(g) => g,
                None => Grid::new(3, 32, 2.0 * std::f64::consts::PI)?,
            };
            match opts.field {
                "taylor-green" => {
                    let step = cfg.params.get("step").copied().unwrap_or(0.1);
                    (nse::taylor_green(&grid, step)?, json!({"field": "taylor-green", "step": step}))
                }
                "random" => {
                    let shell = number_list(opts.shell)?;
                    if shell.len() != 2 {
                        return Err(Error::Parse(format!("shell must be `a,b`, got `{}`", opts.shell)).into());
                    }
                    (
                        nse::random_solenoidal(&grid, [shell[0], shell[1]], cfg.seed)?,
                        json!({"field": "random", "shell": shell, "seed": cfg.seed}),
                    )
                }
                other => return Err(Error::Parse(format!("unknown field `{other}` (taylor-green, random)")).into()),
            }
        }
    };
    let analysis = FluxAnalysis::new(&v);
    let l2 = analysis.l2();
    let rows = analysis.table(&qs);
    let mut records: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut rec = tagged("flux", r);
            rec["normalized"] = json!(r.flux / l2.powi(3));
            rec
        })
        .collect();
    let interp = nse::block_interpolation_check(&v, interp_q)?;
    records.push(json!({
        "type": "summary",
        "source": source,
        "grid": to_value(v.grid()),
        "l2": l2,
        "advection": analysis.advection_integral(),
        "cFit": nse::fit_constant(&rows),
        "interpolation": to_value(&interp),
    }));
    Ok(Output {
        records,
        code: EXIT_OK,
        notes: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// report

pub fn run_report(paths: &[PathBuf]) -> std::result::Result<Output, Failure> {
    if paths.is_empty() {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "report needs at least one input file".into(),
        });
    }
    let mut merged: BTreeMap<String, CaseRow> = BTreeMap::new();
    let mut malformed = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path).map_err(|e| Failure {
            code: EXIT_USAGE,
            message: format!("{}: {e}", path.display()),
        })?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let at = format!("{}:{}", path.display(), i + 1);
            let v: Value = match serde_json::from_str(line) {
                Ok(v) => v,
                Err(e) => {
                    malformed.push(format!("{at}: {e}"));
                    continue;
                }
            };
            match v.get("type").and_then(Value::as_str) {
                Some("case") => match serde_json::from_value::<CaseRow>(v) {
                    Ok(row) => {
                        let keep = merged.get(&row.case).map_or(true, |old| row.max_ratio > old.max_ratio);
                        if keep {
                            merged.insert(row.case.clone(), row);
                        }
                    }
                    Err(e) => malformed.push(format!("{at}: {e}")),
                },
                Some(_) => {}
                None => malformed.push(format!("{at}: record has no type")),
            }
        }
    }
    let passed = merged.values().filter(|r| r.passed).count();
    let mut records: Vec<Value> = merged.values().map(|r| tagged("case", r)).collect();
    records.push(json!({
        "type": "summary",
        "cases": merged.len(),
        "passed": passed,
        "malformed": malformed.len(),
    }));
    let code = if malformed.is_empty() { EXIT_OK } else { EXIT_FAILED };
    Ok(Output {
        records,
        code,
        notes: malformed.into_iter().map(|m| format!("malformed record skipped: {m}")).collect(),
    })
}

// ---------------------------------------------------------------------------

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Norm { .. } => "norm",
        Command::Verify => "verify",
        Command::Flux { .. } => "flux",
        Command::Report { .. } => "report",
    }
}

fn dispatch(cli: &Cli) -> std::result::Result<(Output, Option<PathBuf>), Failure> {
    if let Command::Report { paths } = &cli.command {
        return Ok((run_report(paths)?, cli.flags.out.clone()));
    }
    let cfg = RunConfig::from_flags(&cli.flags)?;
    let out = match &cli.command {
        Command::Norm { kind, params } => run_norm(&cfg, kind, params)?,
        Command::Verify => run_verify(&cfg)?,
        Command::Flux {
            field,
            shell,
            qs,
            interp,
            snapshot,
        } => run_flux(
            &cfg,
            &FluxOptions {
                field,
                shell,
                qs,
                interp,
                snapshot: snapshot.as_deref(),
            },
        )?,
        Command::Report { .. } => unreachable!("handled above"),
    };
    Ok((out, cfg.out))
}

/// Runs the tool on `args` (including the program name) and returns the
/// exit code. Records go to `--out` or `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let start = Instant::now();
    let (output, out_path) = match dispatch(&cli) {
        Ok(x) => x,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            return f.code;
        }
    };
    for n in &output.notes {
        let _ = writeln!(stderr, "{n}");
    }
    let header = json!({
        "type": "header",
        "tool": "lorentzkit",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command_name(&cli.command),
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "runtimeSeconds": start.elapsed().as_secs_f64(),
    });
    let mut text = String::new();
    for r in std::iter::once(&header).chain(&output.records) {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    let written = match &out_path {
        Some(p) => std::fs::write(p, text.as_bytes()),
        None => stdout.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write output: {e}");
        return EXIT_USAGE;
    }
    output.code
}
