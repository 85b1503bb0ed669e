//! Experiment configuration, execution and report files.
//!
//! A configuration is a sectioned `key = value` text:
//!
//! ```text
//! [space]
//! kind = torus            # torus | interval | seq
//! dim = 1
//!
//! [generators]
//! double = affine 2       # one generator per line, in order
//! triple = affine 3
//!
//! [walk]
//! seed = 7                # mandatory
//!
//! [grid]
//! epsilons = 0.05 0.02 0.01
//! ```
//!
//! The full key list is in the README. Every problem in a file is reported,
//! each with its line number.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::entropy::{
    cover_entropy, glw_entropy_at_scale, katok_entropy, local_entropy_at_points, shapira_entropy,
    substream, walk_entropy_at_scale, CountCache, CurveEntry, CurveMode, Discretization,
    EntropyCurve, GlwParams, MeasureRef, MeasureSample, WalkParams,
};
use crate::error::{Error, Result};
use crate::mdim::{
    fit_point, mdim_from_curve, scale_cover, verify_thm_a, verify_thm_b, verify_thm_c,
    verify_thm_d, verify_thm_e, verify_thm_f, ComparatorReport, MdimEstimate, MeasureParams,
    ScaledSystem, Tolerances, Verdict,
};
use crate::measure::{g_homogeneity_check, G_RATIOS};
use crate::packing::{CoverSpec, FinModel};
use crate::semigroup::{GeneratorMap, RandomWalk, SemigroupSystem};
use crate::space::{Point, SpaceDescriptor};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One problem in a configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line, or 0 when the problem is a missing key.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// All problems found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", render_errors(.0))]
pub struct ConfigErrors(pub Vec<ConfigError>);

fn render_errors(errors: &[ConfigError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Estimator {
    Walk,
    Glw,
    Local,
    Katok,
    Cover,
    Shapira,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Walk => "walk",
            Estimator::Glw => "glw",
            Estimator::Local => "local",
            Estimator::Katok => "katok",
            Estimator::Cover => "cover",
            Estimator::Shapira => "shapira",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "walk" => Estimator::Walk,
            "glw" => Estimator::Glw,
            "local" => Estimator::Local,
            "katok" => Estimator::Katok,
            "cover" => Estimator::Cover,
            "shapira" => Estimator::Shapira,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Theorem {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Theorem {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "A" | "a" => Theorem::A,
            "B" | "b" => Theorem::B,
            "C" | "c" => Theorem::C,
            "D" | "d" => Theorem::D,
            "E" | "e" => Theorem::E,
            "F" | "f" => Theorem::F,
            _ => return None,
        })
    }
}

/// A candidate measure.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    /// Equal weights on each word's lattice model (or a uniform grid where a
    /// single sample is needed).
    Uniform,
    Atom(Vec<f64>),
    /// Empirical measure of a walk orbit of the given length from a point.
    Orbit {
        len: usize,
        start: Vec<f64>,
    },
    /// Seeded pseudo-uniform sample.
    Sample(usize),
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        match self {
            MeasureSpec::Uniform => write!(f, "uniform"),
            MeasureSpec::Atom(c) => write!(f, "atom {}", join(c)),
            MeasureSpec::Orbit { len, start } => write!(f, "orbit {len} {}", join(start)),
            MeasureSpec::Sample(m) => write!(f, "sample {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiscretizationSpec {
    Packing,
    Adaptive(f64),
    /// Shared net of the given spacing.
    Fixed(f64),
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub system: ScaledSystem,
    pub walk: RandomWalk,
    pub seed: u64,
    pub epsilons: Vec<f64>,
    pub n_min: usize,
    pub n_max: usize,
    pub tail: usize,
    pub glw_n_min: usize,
    pub glw_n_max: usize,
    pub word_budget: u64,
    pub group_budget: u128,
    pub max_points: usize,
    pub discretization: DiscretizationSpec,
    pub cover_cap: usize,
    pub measure_points: usize,
    pub cache: bool,
    pub candidates: Vec<MeasureSpec>,
    pub deltas: Vec<f64>,
    pub x_samples: usize,
    pub radii: Vec<f64>,
    pub homogeneity_threshold: f64,
    pub measure_n_min: usize,
    pub measure_n_max: usize,
    pub estimators: Vec<Estimator>,
    pub theorems: Vec<Theorem>,
    pub cover_spacing: f64,
    pub cover_radius: f64,
    pub thmc_n: Vec<usize>,
    pub s_grid: Vec<f64>,
    pub tolerances: Tolerances,
    pub output_dir: Option<PathBuf>,
    /// The configuration text as given.
    pub source: String,
}

struct Entry {
    line: usize,
    value: String,
}

type Section = BTreeMap<String, Entry>;

const SECTIONS: [(&str, &[&str]); 8] = [
    (
        "space",
        &[
            "kind",
            "dim",
            "lo",
            "hi",
            "base",
            "base_dim",
            "base_lo",
            "base_hi",
            "truncation",
            "rho",
        ],
    ),
    ("generators", &[]),
    ("walk", &["probabilities", "seed"]),
    (
        "grid",
        &[
            "epsilons",
            "n_min",
            "n_max",
            "tail",
            "glw_n_min",
            "glw_n_max",
        ],
    ),
    (
        "budgets",
        &[
            "word_budget",
            "group_budget",
            "max_points",
            "discretization",
            "oversample",
            "mesh",
            "cover_cap",
            "measure_points",
            "cache",
        ],
    ),
    (
        "measures",
        &[
            "candidates",
            "deltas",
            "x_samples",
            "radii",
            "homogeneity_threshold",
            "n_min",
            "n_max",
        ],
    ),
    (
        "comparators",
        &[
            "estimators",
            "theorems",
            "cover_spacing",
            "cover_radius",
            "thmc_n",
            "s_grid",
            "relative",
            "absolute",
            "slope",
            "equality",
        ],
    ),
    ("output", &["dir"]),
];

struct Parser {
    sections: BTreeMap<String, Section>,
    generators: Vec<(usize, String, String)>,
    errors: Vec<ConfigError>,
}

impl Parser {
    fn err(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            message: message.into(),
        });
    }

    fn scan(text: &str) -> Parser {
        let mut p = Parser {
            sections: BTreeMap::new(),
            generators: Vec::new(),
            errors: Vec::new(),
        };
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    p.err(line, format!("malformed section header `{content}`"));
                    current = None;
                    continue;
                };
                let name = name.trim().to_string();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    p.err(line, format!("unknown section [{name}]"));
                    current = None;
                    continue;
                }
                if p.sections.contains_key(&name) {
                    p.err(line, format!("section [{name}] appears twice"));
                }
                p.sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                p.err(line, format!("expected `key = value`, got `{content}`"));
                continue;
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let Some(section) = current.clone() else {
                p.err(line, format!("key `{key}` outside any section"));
                continue;
            };
            if section == "generators" {
                if p.generators.iter().any(|(_, k, _)| *k == key) {
                    p.err(line, format!("generator `{key}` defined twice"));
                } else {
                    p.generators.push((line, key, value));
                }
                continue;
            }
            let allowed = SECTIONS
                .iter()
                .find(|(s, _)| *s == section)
                .expect("known")
                .1;
            if !allowed.contains(&key.as_str()) {
                p.err(line, format!("unknown key `{key}` in [{section}]"));
                continue;
            }
            let sec = p.sections.get_mut(&section).expect("created");
            if sec.contains_key(&key) {
                p.errors.push(ConfigError {
                    line,
                    message: format!("key `{key}` set twice in [{section}]"),
                });
                continue;
            }
            sec.insert(key, Entry { line, value });
        }
        p
    }

    fn raw(&self, section: &str, key: &str) -> Option<(usize, String)> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(|e| (e.line, e.value.clone()))
    }

    fn get<T: std::str::FromStr>(&mut self, section: &str, key: &str, default: T) -> T {
        match self.raw(section, key) {
            None => default,
            Some((line, v)) => match v.parse() {
                Ok(x) => x,
                Err(_) => {
                    self.err(line, format!("`{key}`: cannot parse `{v}`"));
                    default
                }
            },
        }
    }

    fn list<T: std::str::FromStr>(
        &mut self,
        section: &str,
        key: &str,
        default: Vec<T>,
    ) -> (usize, Vec<T>) {
        match self.raw(section, key) {
            None => (0, default),
            Some((line, v)) => {
                let mut out = Vec::new();
                for tok in v
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                {
                    match tok.parse() {
                        Ok(x) => out.push(x),
                        Err(_) => {
                            self.err(line, format!("`{key}`: cannot parse `{tok}`"));
                            return (line, default);
                        }
                    }
                }
                (line, out)
            }
        }
    }

    fn positive<T: PartialOrd + Default + fmt::Display + std::str::FromStr + Copy>(
        &mut self,
        section: &str,
        key: &str,
        default: T,
    ) -> T {
        let v = self.get(section, key, default);
        if v <= T::default() {
            let line = self.raw(section, key).map(|r| r.0).unwrap_or(0);
            self.err(line, format!("`{key}` must be positive, got {v}"));
        }
        v
    }
}

fn parse_generator(value: &str) -> std::result::Result<GeneratorMap, String> {
    let mut toks = value.split_whitespace();
    let kind = toks.next().ok_or("empty generator")?;
    let nums: Vec<f64> = toks
        .map(|t| t.parse::<f64>().map_err(|_| format!("cannot parse `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    let arity = |lo: usize, hi: usize| {
        if nums.len() < lo || nums.len() > hi {
            Err(format!(
                "`{kind}` takes {lo} to {hi} numbers, got {}",
                nums.len()
            ))
        } else {
            Ok(())
        }
    };
    match kind {
        "affine" => {
            arity(1, 2)?;
            let k = nums[0];
            if k < 1.0 || k.fract() != 0.0 || k > u32::MAX as f64 {
                return Err(format!("affine slope must be a positive integer, got {k}"));
            }
            Ok(GeneratorMap::AffineMod1 {
                slope: k as u32,
                offset: nums.get(1).copied().unwrap_or(0.0),
            })
        }
        "rotation" => {
            if nums.is_empty() {
                return Err("rotation needs at least one angle".into());
            }
            Ok(GeneratorMap::Rotation { angles: nums })
        }
        "tent" => {
            arity(1, 1)?;
            Ok(GeneratorMap::Tent { slope: nums[0] })
        }
        "shift" => {
            arity(0, 0)?;
            Ok(GeneratorMap::Shift)
        }
        "identity" => {
            arity(0, 0)?;
            Ok(GeneratorMap::Identity)
        }
        other => Err(format!("unknown generator kind `{other}`")),
    }
}

fn parse_measure(spec: &str) -> std::result::Result<MeasureSpec, String> {
    let mut toks = spec.split_whitespace();
    let kind = toks.next().ok_or("empty measure")?;
    let nums: Vec<f64> = toks
        .map(|t| t.parse::<f64>().map_err(|_| format!("cannot parse `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    match kind {
        "uniform" if nums.is_empty() => Ok(MeasureSpec::Uniform),
        "atom" if !nums.is_empty() => Ok(MeasureSpec::Atom(nums)),
        "orbit" if nums.len() >= 2 && nums[0] >= 1.0 && nums[0].fract() == 0.0 => {
            Ok(MeasureSpec::Orbit {
                len: nums[0] as usize,
                start: nums[1..].to_vec(),
            })
        }
        "sample" if nums.len() == 1 && nums[0] >= 1.0 && nums[0].fract() == 0.0 => {
            Ok(MeasureSpec::Sample(nums[0] as usize))
        }
        _ => Err(format!(
            "cannot read measure `{spec}` (uniform | atom x.. | orbit len x.. | sample m)"
        )),
    }
}

fn parse_base(p: &mut Parser, prefix: &str, kind: &str, line: usize) -> Option<SpaceDescriptor> {
    let key = |k: &str| format!("{prefix}{k}");
    let made = match kind {
        "torus" => {
            let d = p.get("space", &key("dim"), 1usize);
            SpaceDescriptor::torus(d)
        }
        "interval" => {
            let a = p.get("space", &key("lo"), 0.0);
            let b = p.get("space", &key("hi"), 1.0);
            SpaceDescriptor::interval(a, b)
        }
        other => {
            p.err(line, format!("unknown space kind `{other}`"));
            return None;
        }
    };
    match made {
        Ok(s) => Some(s),
        Err(e) => {
            p.err(line, e.to_string());
            None
        }
    }
}

/// Parses and validates a configuration, collecting every problem.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, ConfigErrors> {
    let mut p = Parser::scan(text);

    // space
    let (kind_line, kind) = p.raw("space", "kind").unwrap_or((0, "torus".into()));
    let mut truncation_auto = None;
    let space = if kind == "seq" {
        let (bl, base_kind) = p
            .raw("space", "base")
            .unwrap_or((kind_line, "interval".into()));
        let base = parse_base(&mut p, "base_", &base_kind, bl);
        let rho: f64 = p.get("space", "rho", 0.5);
        let (tl, trunc) = p
            .raw("space", "truncation")
            .unwrap_or((kind_line, "auto".into()));
        match (base, trunc.as_str()) {
            (Some(b), "auto") => {
                if !(rho > 0.0 && rho < 1.0) {
                    p.err(kind_line, format!("rho must lie in (0,1), got {rho}"));
                }
                truncation_auto = Some((b.clone(), rho));
                SpaceDescriptor::seq(b, 1, rho.clamp(1e-6, 0.999_999)).ok()
            }
            (Some(b), t) => match t.parse::<usize>() {
                Ok(k) => match SpaceDescriptor::seq(b, k, rho) {
                    Ok(s) => Some(s),
                    Err(e) => {
                        p.err(tl, e.to_string());
                        None
                    }
                },
                Err(_) => {
                    p.err(
                        tl,
                        format!("truncation must be `auto` or a count, got `{t}`"),
                    );
                    None
                }
            },
            (None, _) => None,
        }
    } else {
        parse_base(&mut p, "", &kind, kind_line)
    };

    // generators
    let mut generators = Vec::new();
    let mut names = Vec::new();
    let gen_lines = std::mem::take(&mut p.generators);
    for (line, name, value) in &gen_lines {
        match parse_generator(value) {
            Ok(g) => {
                if let Some(sp) = &space {
                    if let Err(e) = SemigroupSystem::new(sp.clone(), vec![g.clone()]) {
                        p.err(*line, format!("generator `{name}`: {e}"));
                    }
                }
                generators.push(g);
                names.push(name.clone());
            }
            Err(e) => p.err(*line, format!("generator `{name}`: {e}")),
        }
    }
    if gen_lines.is_empty() {
        p.err(0, "[generators] must list at least one generator");
    }

    // walk
    let seed = match p.raw("walk", "seed") {
        None => {
            p.err(0, "missing required key `seed` in [walk]");
            0
        }
        Some(_) => p.get("walk", "seed", 0u64),
    };
    let (pl, probs) = p.list::<f64>("walk", "probabilities", Vec::new());
    let walk = if probs.is_empty() {
        RandomWalk::symmetric(generators.len().max(1))
    } else {
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            p.err(pl, format!("probabilities must sum to 1 (sum = {sum})"));
        }
        if probs.len() != gen_lines.len() {
            p.err(
                pl,
                format!(
                    "{} probabilities for {} generators",
                    probs.len(),
                    gen_lines.len()
                ),
            );
        }
        RandomWalk::new(probs.clone()).unwrap_or_else(|e| {
            if (sum - 1.0).abs() <= 1e-9 {
                p.err(pl, e.to_string());
            }
            RandomWalk::symmetric(generators.len().max(1))
        })
    };

    // grid
    let (el, epsilons) = p.list::<f64>("grid", "epsilons", vec![0.1, 0.05, 0.025]);
    if epsilons.is_empty() {
        p.err(el, "epsilon grid `epsilons` is empty");
    } else if epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        p.err(el, "epsilon grid `epsilons` must lie inside (0,1)");
    } else if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        p.err(el, "epsilon grid `epsilons` must be strictly decreasing");
    }
    let n_min = p.get("grid", "n_min", 1usize);
    let n_max = p.get("grid", "n_max", 4usize);
    let tail = p.get("grid", "tail", 3usize);
    if n_min > n_max {
        let line = p.raw("grid", "n_min").map(|r| r.0).unwrap_or(0);
        p.err(line, format!("n_min {n_min} exceeds n_max {n_max}"));
    }
    if tail < 2 {
        let line = p.raw("grid", "tail").map(|r| r.0).unwrap_or(0);
        p.err(line, "tail must be at least 2");
    }
    let glw_n_min = p.get("grid", "glw_n_min", 0usize);
    let glw_n_max = p.get("grid", "glw_n_max", 3usize);
    if glw_n_min > glw_n_max {
        let line = p.raw("grid", "glw_n_min").map(|r| r.0).unwrap_or(0);
        p.err(line, "glw_n_min exceeds glw_n_max");
    }

    // budgets
    let word_budget = p.positive("budgets", "word_budget", 4096u64);
    let group_budget = p.positive("budgets", "group_budget", 1u128 << 16);
    let max_points = p.positive("budgets", "max_points", 4_000_000usize);
    let cover_cap = p.positive("budgets", "cover_cap", 100_000usize);
    let measure_points = p.positive("budgets", "measure_points", 2000usize);
    let (dl, disc) = p
        .raw("budgets", "discretization")
        .unwrap_or((0, "packing".into()));
    let discretization = match disc.as_str() {
        "packing" => DiscretizationSpec::Packing,
        "adaptive" => DiscretizationSpec::Adaptive(p.positive("budgets", "oversample", 2.5)),
        "fixed" => match p.raw("budgets", "mesh") {
            Some(_) => DiscretizationSpec::Fixed(p.positive("budgets", "mesh", 0.01)),
            None => {
                p.err(dl, "discretization `fixed` needs `mesh`");
                DiscretizationSpec::Packing
            }
        },
        other => {
            p.err(
                dl,
                format!("unknown discretization `{other}` (packing | adaptive | fixed)"),
            );
            DiscretizationSpec::Packing
        }
    };
    let (cl, cache) = p.raw("budgets", "cache").unwrap_or((0, "on".into()));
    let cache = match cache.as_str() {
        "on" | "true" => true,
        "off" | "false" => false,
        other => {
            p.err(cl, format!("cache must be on or off, got `{other}`"));
            true
        }
    };

    // measures
    let mut candidates = Vec::new();
    match p.raw("measures", "candidates") {
        None => candidates.push(MeasureSpec::Uniform),
        Some((line, v)) => {
            for spec in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                match parse_measure(spec) {
                    Ok(m) => candidates.push(m),
                    Err(e) => p.err(line, e),
                }
            }
        }
    }
    if truncation_auto.is_some() && candidates.iter().any(|c| *c != MeasureSpec::Uniform) {
        let line = p.raw("measures", "candidates").map(|r| r.0).unwrap_or(0);
        p.err(
            line,
            "with `truncation = auto` only the `uniform` candidate is available",
        );
    }
    let (dl, deltas) = p.list::<f64>("measures", "deltas", vec![0.1]);
    if deltas.is_empty()
        || deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0))
        || deltas.windows(2).any(|w| w[1] >= w[0])
    {
        p.err(dl, "`deltas` must be strictly decreasing inside (0,1)");
    }
    let x_samples = p.positive("measures", "x_samples", 20usize);
    let (rl, radii) = p.list::<f64>("measures", "radii", vec![0.5, 0.25, 0.1]);
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        p.err(rl, "`radii` must be positive");
    }
    let homogeneity_threshold = p.positive("measures", "homogeneity_threshold", 1.5);
    let measure_n_min = p.get("measures", "n_min", 1usize);
    let measure_n_max = p.get("measures", "n_max", 4usize);
    if measure_n_min > measure_n_max {
        let line = p.raw("measures", "n_min").map(|r| r.0).unwrap_or(0);
        p.err(line, "measure n_min exceeds n_max");
    }

    // comparators
    let mut estimators = Vec::new();
    let (esl, names_e) = p.list::<String>("comparators", "estimators", vec!["walk".into()]);
    for e in &names_e {
        match Estimator::parse(e) {
            Some(x) if !estimators.contains(&x) => estimators.push(x),
            Some(_) => {}
            None => p.err(esl, format!("unknown estimator `{e}`")),
        }
    }
    let mut theorems = Vec::new();
    let (tl, names_t) = p.list::<String>("comparators", "theorems", Vec::new());
    for t in &names_t {
        match Theorem::parse(t) {
            Some(x) if !theorems.contains(&x) => theorems.push(x),
            Some(_) => {}
            None => p.err(tl, format!("unknown theorem `{t}` (A to F)")),
        }
    }
    theorems.sort();
    let cover_spacing = p.positive("comparators", "cover_spacing", 0.125);
    let cover_radius = p.positive("comparators", "cover_radius", 0.1);
    let (nl, thmc_n) = p.list::<usize>("comparators", "thmc_n", vec![1, 2, 3, 4]);
    if thmc_n.len() < 2 || thmc_n.windows(2).any(|w| w[1] <= w[0]) {
        p.err(nl, "`thmc_n` needs at least two increasing lengths");
    }
    let (_, s_grid) = p.list::<f64>("comparators", "s_grid", vec![0.0]);
    let d = Tolerances::default();
    let tolerances = Tolerances {
        relative: p.get("comparators", "relative", d.relative),
        absolute: p.get("comparators", "absolute", d.absolute),
        slope: p.get("comparators", "slope", d.slope),
        equality: p.get("comparators", "equality", d.equality),
        count: d.count,
    };

    let output_dir = p.raw("output", "dir").map(|(_, v)| PathBuf::from(v));

    // the system itself
    let system = match (&space, p.errors.is_empty()) {
        (Some(sp), true) => {
            let built = match &truncation_auto {
                Some((base, rho)) => Ok(ScaledSystem::Truncated {
                    base: base.clone(),
                    rho: *rho,
                    extra: n_max + 3,
                    generators: generators.clone(),
                }),
                None => SemigroupSystem::with_names(sp.clone(), generators.clone(), names.clone())
                    .map(ScaledSystem::Fixed),
            };
            match built {
                Ok(s) => Some(s),
                Err(e) => {
                    p.err(0, e.to_string());
                    None
                }
            }
        }
        _ => None,
    };

    if !p.errors.is_empty() {
        p.errors.sort_by_key(|e| e.line);
        return Err(ConfigErrors(p.errors));
    }
    Ok(ExperimentConfig {
        system: system.expect("validated"),
        walk,
        seed,
        epsilons,
        n_min,
        n_max,
        tail,
        glw_n_min,
        glw_n_max,
        word_budget,
        group_budget,
        max_points,
        discretization,
        cover_cap,
        measure_points,
        cache,
        candidates,
        deltas,
        x_samples,
        radii,
        homogeneity_threshold,
        measure_n_min,
        measure_n_max,
        estimators,
        theorems,
        cover_spacing,
        cover_radius,
        thmc_n,
        s_grid,
        tolerances,
        output_dir,
        source: text.to_string(),
    })
}

/// Counters kept for diagnostics; not written to the report files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub elapsed: Duration,
    pub cache_entries: usize,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub version: String,
    pub config_echo: String,
    pub seed: u64,
    pub curves: Vec<EntropyCurve>,
    pub mdims: Vec<MdimEstimate>,
    pub comparators: Vec<ComparatorReport>,
    /// `(task, message)` for every estimator or comparator that failed.
    pub failures: Vec<(String, String)>,
    pub stats: RunStats,
}

impl RunReport {
    pub fn empty() -> Self {
        RunReport {
            version: VERSION.to_string(),
            config_echo: String::new(),
            seed: 0,
            curves: Vec::new(),
            mdims: Vec::new(),
            comparators: Vec::new(),
            failures: Vec::new(),
            stats: RunStats::default(),
        }
    }

    /// True when every comparator passed or gave no verdict and nothing failed.
    pub fn success(&self) -> bool {
        self.failures.is_empty()
            && self
                .comparators
                .iter()
                .all(|c| c.verdict() != Verdict::Fail)
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    params: WalkParams,
    glw: GlwParams,
}

impl Context<'_> {
    fn finest(&self) -> f64 {
        *self.cfg.epsilons.last().expect("nonempty grid")
    }

    fn fixed_system(&self) -> Result<SemigroupSystem> {
        self.cfg.system.at(self.finest())
    }

    fn x_points(&self) -> Result<Vec<Point>> {
        let sys = self.fixed_system()?;
        sys.space()
            .sample_points(self.cfg.x_samples, substream(self.cfg.seed, 0x78))
    }

    fn measure(
        &self,
        system: &SemigroupSystem,
        spec: &MeasureSpec,
        index: usize,
    ) -> Result<MeasureSample> {
        let space = system.space();
        let seed = substream(self.cfg.seed, 0x6d00u64.wrapping_add(index as u64));
        match spec {
            MeasureSpec::Uniform => {
                let d = space.dim() as f64;
                let spacing = (1.0 / self.cfg.measure_points as f64).powf(1.0 / d);
                MeasureSample::uniform_grid(space, spacing, self.cfg.max_points)
            }
            MeasureSpec::Atom(c) => {
                MeasureSample::point_mass(space, fit_point(system, &Point::new(c.clone())))
            }
            MeasureSpec::Orbit { len, start } => {
                let x0 = fit_point(system, &Point::new(start.clone()));
                MeasureSample::orbit_empirical(system, &self.cfg.walk, &x0, *len, seed)
            }
            MeasureSpec::Sample(m) => MeasureSample::sampled(space, *m, seed),
        }
    }

    fn samples(&self, system: &SemigroupSystem) -> Result<Vec<Option<MeasureSample>>> {
        self.cfg
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| match c {
                MeasureSpec::Uniform => Ok(None),
                other => self.measure(system, other, i).map(Some),
            })
            .collect()
    }
}

fn measure_refs<'a>(
    cfg: &ExperimentConfig,
    samples: &'a [Option<MeasureSample>],
) -> Vec<(String, MeasureRef<'a>)> {
    cfg.candidates
        .iter()
        .zip(samples)
        .map(|(spec, s)| {
            let r = match s {
                Some(s) => MeasureRef::Sample(s),
                None => MeasureRef::Lattice,
            };
            (spec.to_string(), r)
        })
        .collect()
}

fn build_params(cfg: &ExperimentConfig) -> Result<(WalkParams, GlwParams)> {
    let disc = match &cfg.discretization {
        DiscretizationSpec::Packing => Discretization::Packing {
            max_points: cfg.max_points,
        },
        DiscretizationSpec::Adaptive(os) => Discretization::Adaptive {
            oversample: *os,
            max_points: cfg.max_points,
        },
        DiscretizationSpec::Fixed(mesh) => {
            let sys = cfg.system.at(*cfg.epsilons.last().expect("grid"))?;
            Discretization::Fixed(FinModel::net(sys.space(), *mesh, cfg.max_points)?)
        }
    };
    let params = WalkParams {
        n_min: cfg.n_min,
        n_max: cfg.n_max,
        tail: cfg.tail,
        word_budget: cfg.word_budget,
        seed: cfg.seed,
        discretization: disc.clone(),
        cover_discretization: crate::entropy::fine_discretization(),
        cache: cfg.cache.then(|| Arc::new(CountCache::new())),
    };
    let glw = GlwParams {
        n_min: cfg.glw_n_min,
        n_max: cfg.glw_n_max,
        tail: cfg.tail,
        group_budget: cfg.group_budget,
        discretization: disc,
    };
    Ok((params, glw))
}

fn per_scale<F>(cfg: &ExperimentConfig, name: &str, mode: CurveMode, f: F) -> Result<EntropyCurve>
where
    F: Fn(&SemigroupSystem, f64) -> Result<CurveEntry>,
{
    let mut curve = EntropyCurve::new(name, mode);
    for &e in &cfg.epsilons {
        let sys = cfg.system.at(e)?;
        curve.push(f(&sys, e)?)?;
    }
    Ok(curve)
}

fn run_estimator(ctx: &Context<'_>, est: Estimator) -> Result<Vec<EntropyCurve>> {
    let cfg = ctx.cfg;
    let walk = &cfg.walk;
    let params = &ctx.params;
    Ok(match est {
        Estimator::Walk => vec![per_scale(cfg, "walk", CurveMode::Walk, |s, e| {
            walk_entropy_at_scale(s, walk, e, params)
        })?],
        Estimator::Glw => vec![per_scale(cfg, "glw", CurveMode::Glw, |s, e| {
            glw_entropy_at_scale(s, e, &ctx.glw)
        })?],
        Estimator::Local => {
            let xs = ctx.x_points()?;
            vec![per_scale(cfg, "local", CurveMode::Walk, |s, e| {
                let pts: Vec<Point> = xs.iter().map(|x| fit_point(s, x)).collect();
                let locals = local_entropy_at_points(s, walk, &pts, e, &cfg.radii, params)?;
                let best = locals
                    .into_iter()
                    .max_by(|a, b| a.value.total_cmp(&b.value))
                    .expect("points");
                let value = best.value;
                Ok(best
                    .per_radius
                    .into_iter()
                    .map(|(_, c)| c)
                    .find(|c| c.growth_rate == value)
                    .expect("value attained"))
            })?]
        }
        Estimator::Katok => {
            let delta = cfg.deltas[0];
            let mut out = Vec::new();
            for (i, spec) in cfg.candidates.iter().enumerate() {
                let name = format!("katok[{spec};{delta}]");
                out.push(per_scale(cfg, &name, CurveMode::Walk, |s, e| {
                    let sample = match spec {
                        MeasureSpec::Uniform => None,
                        other => Some(ctx.measure(s, other, i)?),
                    };
                    let nu = sample
                        .as_ref()
                        .map(MeasureRef::Sample)
                        .unwrap_or(MeasureRef::Lattice);
                    Ok(katok_entropy(s, walk, nu, e, delta, params)?.curve)
                })?);
            }
            out
        }
        Estimator::Cover => vec![per_scale(cfg, "cover", CurveMode::Walk, |s, e| {
            let cover = scale_cover(s.space(), e, cfg.cover_cap)?;
            let mut c = cover_entropy(s, walk, &cover, params)?;
            c.epsilon = e;
            Ok(c)
        })?],
        Estimator::Shapira => {
            let mut out = Vec::new();
            for (i, spec) in cfg.candidates.iter().enumerate() {
                let name = format!("shapira[{spec}]");
                out.push(per_scale(cfg, &name, CurveMode::Walk, |s, e| {
                    let cover = scale_cover(s.space(), e, cfg.cover_cap)?;
                    let sample = match spec {
                        MeasureSpec::Uniform => None,
                        other => Some(ctx.measure(s, other, i)?),
                    };
                    let nu = sample
                        .as_ref()
                        .map(MeasureRef::Sample)
                        .unwrap_or(MeasureRef::Lattice);
                    let sh = shapira_entropy(s, walk, &cover, nu, &cfg.deltas, params)?;
                    let mut c = sh.per_delta.last().expect("deltas").1.clone();
                    c.epsilon = e;
                    Ok(c)
                })?);
            }
            out
        }
    })
}

fn run_theorem(ctx: &Context<'_>, thm: Theorem) -> Result<ComparatorReport> {
    let cfg = ctx.cfg;
    let tol = &cfg.tolerances;
    let params = &ctx.params;
    match thm {
        Theorem::A => verify_thm_a(
            &cfg.system,
            &cfg.walk,
            &cfg.epsilons,
            &ctx.x_points()?,
            &cfg.radii,
            params,
            tol,
        ),
        Theorem::B | Theorem::D => {
            let sys = ctx.fixed_system()?;
            let samples = ctx.samples(&sys)?;
            let refs = measure_refs(cfg, &samples);
            if thm == Theorem::B {
                verify_thm_b(
                    &cfg.system,
                    &cfg.walk,
                    &refs,
                    &cfg.epsilons,
                    &cfg.deltas,
                    params,
                    tol,
                )
            } else {
                verify_thm_d(
                    &cfg.system,
                    &cfg.walk,
                    &refs,
                    &cfg.epsilons,
                    &cfg.deltas,
                    params,
                    cfg.cover_cap,
                    tol,
                )
            }
        }
        Theorem::C => {
            let sys = ctx.fixed_system()?;
            let cover = CoverSpec::from_net(
                sys.space(),
                cfg.cover_spacing,
                cfg.cover_radius,
                cfg.cover_cap,
            )?;
            verify_thm_c(
                &sys,
                &cover,
                &cfg.thmc_n,
                cfg.word_budget,
                &params.cover_discretization,
                tol,
            )
        }
        Theorem::E | Theorem::F => {
            let sys = ctx.fixed_system()?;
            let nu = ctx.measure(&sys, &MeasureSpec::Uniform, usize::MAX)?;
            let xs = ctx.x_points()?;
            let mp = MeasureParams {
                n_min: cfg.measure_n_min,
                n_max: cfg.measure_n_max,
                tail: cfg.tail,
                group_budget: cfg.group_budget,
            };
            if thm == Theorem::E {
                verify_thm_e(
                    &sys,
                    &nu,
                    &cfg.epsilons,
                    &xs,
                    &cfg.s_grid,
                    &mp,
                    &ctx.glw,
                    tol,
                )
            } else {
                let step = (nu.len() / 10).max(1);
                let support: Vec<usize> = (0..nu.len()).step_by(step).collect();
                let hom = g_homogeneity_check(
                    &sys,
                    &nu,
                    &cfg.epsilons,
                    cfg.measure_n_max,
                    &G_RATIOS,
                    &support,
                    cfg.homogeneity_threshold,
                    cfg.group_budget,
                )?;
                let s = cfg.s_grid.first().copied().unwrap_or(0.0);
                verify_thm_f(&sys, &nu, &cfg.epsilons, &xs, &hom, s, &mp, &ctx.glw, tol)
            }
        }
    }
}

/// Runs the selected estimators and comparators. Failures are recorded in
/// the report and the remaining tasks still run.
pub fn run_experiment(cfg: &ExperimentConfig) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport::empty();
    report.config_echo = cfg.source.clone();
    report.seed = cfg.seed;
    let (params, glw) = match build_params(cfg) {
        Ok(p) => p,
        Err(e) => {
            report.failures.push(("setup".into(), e.to_string()));
            return report;
        }
    };
    let ctx = Context { cfg, params, glw };
    for &est in &cfg.estimators {
        match run_estimator(&ctx, est) {
            Ok(curves) => {
                for c in curves {
                    match mdim_from_curve(&c) {
                        Ok(m) => report.mdims.push(m),
                        Err(e) => report
                            .failures
                            .push((format!("mdim {}", c.estimator), e.to_string())),
                    }
                    report.curves.push(c);
                }
            }
            Err(e) => report
                .failures
                .push((format!("estimator {}", est.name()), e.to_string())),
        }
    }
    for &thm in &cfg.theorems {
        match run_theorem(&ctx, thm) {
            Ok(r) => report.comparators.push(r),
            Err(e) => report
                .failures
                .push((format!("theorem {thm:?}"), e.to_string())),
        }
    }
    if let Some(cache) = &ctx.params.cache {
        report.stats.cache_entries = cache.len();
        report.stats.cache_hits = cache.hits();
        report.stats.cache_misses = cache.misses();
    }
    report.stats.elapsed = start.elapsed();
    report
}

/// [`run_experiment`] on a dedicated pool of `workers` threads.
pub fn run_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    Ok(pool.install(|| run_experiment(cfg)))
}

/// Nine significant digits, fixed notation where it stays readable.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..10).contains(&mag) {
        let decimals = (8 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const CURVES_HEADER: &str = "estimator,epsilon,n,log_count,growth_rate,residual,stderr";
pub const MDIM_HEADER: &str = "estimator,slope,raw_slope,residual,ratio_sup,ratio_inf,scales";
pub const COMPARATORS_HEADER: &str =
    "theorem,row,epsilon,left,right,gap,tolerance,check,gating,verdict";

pub fn curves_csv(report: &RunReport) -> String {
    let mut out = format!("{CURVES_HEADER}\n");
    let all =
        report
            .curves
            .iter()
            .map(|c| (String::new(), c))
            .chain(report.comparators.iter().flat_map(|r| {
                r.curves
                    .iter()
                    .map(move |c| (format!("thm{}/", r.theorem), c))
            }));
    for (prefix, c) in all {
        for (name, e, n, lc, g, res, se) in c.csv_rows() {
            let _ = writeln!(
                out,
                "{},{},{n},{},{},{},{}",
                csv_field(&format!("{prefix}{name}")),
                fmt_sig(e),
                fmt_sig(lc),
                fmt_sig(g),
                fmt_sig(res),
                fmt_sig(se)
            );
        }
    }
    out
}

pub fn mdim_csv(report: &RunReport) -> String {
    let mut out = format!("{MDIM_HEADER}\n");
    let all =
        report
            .mdims
            .iter()
            .map(|m| (String::new(), m))
            .chain(report.comparators.iter().flat_map(|r| {
                r.estimates
                    .iter()
                    .map(move |m| (format!("thm{}/", r.theorem), m))
            }));
    for (prefix, m) in all {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&format!("{prefix}{}", m.estimator)),
            fmt_sig(m.slope),
            fmt_sig(m.raw_slope),
            fmt_sig(m.residual),
            fmt_sig(m.upper),
            fmt_sig(m.lower),
            m.grid.len()
        );
    }
    out
}

pub fn comparators_csv(report: &RunReport) -> String {
    let mut out = format!("{COMPARATORS_HEADER}\n");
    for r in &report.comparators {
        for row in &r.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.theorem,
                csv_field(&row.label),
                row.epsilon.map(fmt_sig).unwrap_or_default(),
                fmt_sig(row.left),
                fmt_sig(row.right),
                fmt_sig(row.gap()),
                fmt_sig(row.tolerance),
                row.check.label(),
                row.gating,
                row.verdict.label()
            );
        }
    }
    out
}

pub fn summary_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "semimdim {}", report.version);
    let _ = writeln!(out, "seed {}", report.seed);
    let _ = writeln!(out);
    if !report.mdims.is_empty() {
        let _ = writeln!(out, "metric mean dimension (regression slope):");
        for m in &report.mdims {
            let _ = writeln!(out, "  {:<32} {}", m.estimator, fmt_sig(m.slope));
        }
        let _ = writeln!(out);
    }
    if !report.comparators.is_empty() {
        let _ = writeln!(out, "comparators:");
        for r in &report.comparators {
            let gating = r.rows.iter().filter(|x| x.gating).count();
            let failed = r
                .rows
                .iter()
                .filter(|x| x.gating && x.verdict == Verdict::Fail)
                .count();
            let _ = writeln!(
                out,
                "  theorem {}: {} ({} gating rows, {} failed)",
                r.theorem,
                r.verdict().label(),
                gating,
                failed
            );
            for n in &r.notes {
                let _ = writeln!(out, "    note: {n}");
            }
        }
        let _ = writeln!(out);
    }
    if !report.failures.is_empty() {
        let _ = writeln!(out, "failures:");
        for (task, msg) in &report.failures {
            let _ = writeln!(out, "  {task}: {msg}");
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "config:");
    for line in report.config_echo.lines() {
        let _ = writeln!(out, "  {line}");
    }
    out
}

/// Writes `curves.csv`, `mdim.csv`, `comparators.csv` and `summary.txt`.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |p: &Path, e: std::io::Error| Error::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let files = [
        ("curves.csv", curves_csv(report)),
        ("mdim.csv", mdim_csv(report)),
        ("comparators.csv", comparators_csv(report)),
        ("summary.txt", summary_text(report)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
