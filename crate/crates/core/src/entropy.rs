//! Scale-indexed entropies of a semigroup action: the walk-averaged
//! separated-set growth `h(eps)`, GLW entropy, the local entropy function,
//! Katok entropy, cover and Shapira entropies, and skew-product cover counts.
//!
//! Every estimator computes a count per word and length, averages it over
//! the random walk (exactly below the word budget, by Monte Carlo above it)
//! and fits the growth rate of the log-average over a tail window of `n`.

use std::borrow::Cow;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fit::fit_line;
use crate::packing::{
    ball_system, greedy_spanning, maximal_separated, min_subcover, min_subcover_mass, CoverSpec,
    FinModel, GroupProximity, Neighbours, ProductLattice, Proximity, SetSystem, SpanRule,
    WordProximity,
};
use crate::semigroup::{word_count, RandomWalk, SemigroupSystem, Word};
use crate::space::{packing_levels, Point};

/// How finite models of `X` are produced.
#[derive(Debug, Clone)]
pub enum Discretization {
    /// One shared model; its mesh must be at most a quarter of the scale.
    Fixed(FinModel),
    /// A lattice per word, fine enough that every coordinate step moves the
    /// orbit by at most `scale / oversample` along the word.
    Adaptive { oversample: f64, max_points: usize },
    /// A lattice per word whose coordinate steps each move some orbit point
    /// by just over the scale, with as many levels as that allows. When the
    /// system certifies coordinatewise separation the lattice is kept
    /// implicit and its points are pairwise separated.
    Packing { max_points: usize },
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization::Packing {
            max_points: 4_000_000,
        }
    }
}

/// Default discretization for cover-based estimators.
pub fn fine_discretization() -> Discretization {
    Discretization::Adaptive {
        oversample: 2.5,
        max_points: 4_000_000,
    }
}

/// The model of `X` used for one word (or one group depth).
#[derive(Debug, Clone)]
pub enum WordModel<'a> {
    Explicit(Cow<'a, FinModel>),
    /// Packing lattice whose points are pairwise separated at the scale.
    Certified(ProductLattice),
}

impl<'a> WordModel<'a> {
    /// Number of points.
    pub fn size(&self) -> f64 {
        match self {
            WordModel::Explicit(m) => m.len() as f64,
            WordModel::Certified(l) => l.size(),
        }
    }

    pub fn into_explicit(self, cap: usize) -> Result<Cow<'a, FinModel>> {
        match self {
            WordModel::Explicit(m) => Ok(m),
            WordModel::Certified(l) => Ok(Cow::Owned(l.to_model(cap)?)),
        }
    }
}

impl Discretization {
    /// Identifies the discretization in cache keys; shared fixed models are not cached.
    fn cache_tag(&self) -> Option<String> {
        match self {
            Discretization::Fixed(_) => None,
            Discretization::Adaptive {
                oversample,
                max_points,
            } => Some(format!("adaptive:{}:{max_points}", oversample.to_bits())),
            Discretization::Packing { max_points } => Some(format!("packing:{max_points}")),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Discretization::Adaptive {
                oversample,
                max_points,
            } => {
                if !(*oversample > 0.0) || !oversample.is_finite() {
                    return Err(invalid("oversample", "must be positive"));
                }
                if *max_points == 0 {
                    return Err(invalid("max_points", "must be positive"));
                }
            }
            Discretization::Packing { max_points } if *max_points == 0 => {
                return Err(invalid("max_points", "must be positive"));
            }
            _ => {}
        }
        Ok(())
    }

    fn cap(&self) -> usize {
        match self {
            Discretization::Fixed(m) => m.len(),
            Discretization::Adaptive { max_points, .. }
            | Discretization::Packing { max_points } => *max_points,
        }
    }

    /// Model resolving `d_w` at `scale`.
    pub fn model_for_word<'a>(
        &'a self,
        system: &SemigroupSystem,
        word: &Word,
        scale: f64,
    ) -> Result<WordModel<'a>> {
        match self {
            Discretization::Fixed(m) => {
                fixed_mesh_ok(m, scale)?;
                Ok(WordModel::Explicit(Cow::Borrowed(m)))
            }
            Discretization::Adaptive {
                oversample,
                max_points,
            } => {
                let lip = system.coordinate_lipschitz(word);
                let spacing: Vec<f64> = lip.iter().map(|l| scale / (oversample * l)).collect();
                Ok(WordModel::Explicit(Cow::Owned(FinModel::lattice(
                    system.space(),
                    &spacing,
                    *max_points,
                )?)))
            }
            Discretization::Packing { max_points } => {
                let lip = system.coordinate_lipschitz(word);
                let levels = packing_levels(&system.space().axes(), &lip, scale);
                let lattice = ProductLattice::new(system.space(), levels);
                if system.separation_certified() {
                    Ok(WordModel::Certified(lattice))
                } else {
                    Ok(WordModel::Explicit(Cow::Owned(
                        lattice.to_model(*max_points)?,
                    )))
                }
            }
        }
    }

    /// Materialised model for estimators that need explicit points.
    pub fn explicit_for_word<'a>(
        &'a self,
        system: &SemigroupSystem,
        word: &Word,
        scale: f64,
    ) -> Result<Cow<'a, FinModel>> {
        self.model_for_word(system, word, scale)?
            .into_explicit(self.cap())
    }

    /// Model resolving the group metric of depth `n` at `scale`.
    pub fn model_for_group<'a>(
        &'a self,
        system: &SemigroupSystem,
        n: usize,
        scale: f64,
    ) -> Result<WordModel<'a>> {
        let space = system.space();
        let fastest = (0..system.p())
            .max_by(|&a, &b| {
                let la = system.generators()[a].lipschitz(space);
                let lb = system.generators()[b].lipschitz(space);
                la.total_cmp(&lb).then(b.cmp(&a))
            })
            .unwrap_or(0);
        self.model_for_word(system, &Word::from_indices(&vec![fastest; n]), scale)
    }
}

fn fixed_mesh_ok(model: &FinModel, scale: f64) -> Result<()> {
    let mesh = model.mesh().unwrap_or_else(|| model.estimate_mesh(256, 0));
    let limit = scale / 4.0;
    if mesh > limit * (1.0 + 1e-12) {
        return Err(Error::MeshTooCoarse {
            mesh,
            epsilon: scale,
            limit,
        });
    }
    Ok(())
}

/// Range of word lengths, fitting window and integration budget.
#[derive(Debug, Clone)]
pub struct WalkParams {
    pub n_min: usize,
    pub n_max: usize,
    /// Number of largest `n` used by the growth-rate fit.
    pub tail: usize,
    /// Words enumerated exactly while `p^n` stays below this; otherwise the
    /// number of Monte Carlo draws.
    pub word_budget: u64,
    pub seed: u64,
    /// Models for separated and spanning counts.
    pub discretization: Discretization,
    /// Models for cover refinements.
    pub cover_discretization: Discretization,
    /// Shared memo of whole-model separated counts.
    pub cache: Option<Arc<CountCache>>,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            n_min: 1,
            n_max: 4,
            tail: 3,
            word_budget: 4096,
            seed: 0,
            discretization: Discretization::default(),
            cover_discretization: fine_discretization(),
            cache: None,
        }
    }
}

impl WalkParams {
    pub fn with_n(mut self, n_min: usize, n_max: usize) -> Self {
        self.n_min = n_min;
        self.n_max = n_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_min > self.n_max {
            return Err(invalid("n_range", "n_min must not exceed n_max"));
        }
        if self.tail < 2 || self.n_max + 1 - self.n_min < 2 {
            return Err(Error::DegenerateFit(format!(
                "tail window needs at least 2 lengths (n in [{}, {}], tail {})",
                self.n_min, self.n_max, self.tail
            )));
        }
        if self.word_budget == 0 {
            return Err(invalid("word_budget", "must be positive"));
        }
        self.discretization.check()?;
        self.cover_discretization.check()
    }

    fn lengths(&self) -> Vec<usize> {
        (self.n_min..=self.n_max).collect()
    }

    /// `s(w, n, eps)` on the word model, through the cache when one is set.
    fn whole_count(
        &self,
        system: &SemigroupSystem,
        word: &Word,
        model: &WordModel<'_>,
        epsilon: f64,
    ) -> Result<f64> {
        match (&self.cache, self.discretization.cache_tag()) {
            (Some(cache), Some(tag)) => {
                let key = CountKey {
                    system: system.fingerprint(),
                    word: word.indices().map(|g| g as u16).collect(),
                    epsilon: epsilon.to_bits(),
                    discretization: tag,
                };
                cache.get_or_compute(key, || word_separated_count(system, word, model, epsilon))
            }
            _ => word_separated_count(system, word, model, epsilon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CountKey {
    system: u64,
    word: Vec<u16>,
    epsilon: u64,
    discretization: String,
}

/// Memo of separated counts keyed by system, word, scale and discretization.
/// Readers run concurrently; inserts are serialized. Counts are deterministic,
/// so a race that computes one key twice stores the same value.
#[derive(Debug, Default)]
pub struct CountCache {
    map: RwLock<HashMap<CountKey, f64>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl CountCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    fn get_or_compute<F: FnOnce() -> Result<f64>>(&self, key: CountKey, f: F) -> Result<f64> {
        if let Some(&v) = self.map.read().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = f()?;
        self.map.write().insert(key, v);
        Ok(v)
    }
}

/// Which family of estimators produced a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveMode {
    /// Counts averaged over the random walk.
    Walk,
    /// Counts under separation by any element of length `<= n`.
    Glw,
}

/// `log` of an averaged count at one word length.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    pub log_count: f64,
    /// Standard error of the average on the log scale; zero when exact.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveEntry {
    pub epsilon: f64,
    pub points: Vec<CurvePoint>,
    /// Fitted slope, clamped at zero.
    pub growth_rate: f64,
    pub raw_slope: f64,
    pub residual: f64,
    /// Lengths used by the fit.
    pub window: (usize, usize),
}

impl CurveEntry {
    pub fn log_count(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|p| p.n == n).map(|p| p.log_count)
    }
}

/// Growth rates across a grid of scales for one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyCurve {
    pub estimator: String,
    pub mode: CurveMode,
    pub entries: Vec<CurveEntry>,
}

impl EntropyCurve {
    pub fn new(estimator: impl Into<String>, mode: CurveMode) -> Self {
        EntropyCurve {
            estimator: estimator.into(),
            mode,
            entries: Vec::new(),
        }
    }

    /// Appends an entry; scales must strictly decrease.
    pub fn push(&mut self, entry: CurveEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.epsilon >= last.epsilon {
                return Err(invalid(
                    "epsilon",
                    "scales must strictly decrease along a curve",
                ));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn rates(&self) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .map(|e| (e.epsilon, e.growth_rate))
            .collect()
    }

    /// Rows `(estimator, epsilon, n, log_count, growth_rate, residual, stderr)`.
    pub fn csv_rows(&self) -> Vec<(String, f64, usize, f64, f64, f64, f64)> {
        self.entries
            .iter()
            .flat_map(|e| {
                e.points.iter().map(move |p| {
                    (
                        self.estimator.clone(),
                        e.epsilon,
                        p.n,
                        p.log_count,
                        e.growth_rate,
                        e.residual,
                        p.stderr,
                    )
                })
            })
            .collect()
    }
}

/// Fits the growth rate of `log A_n` over the last `tail` lengths.
pub fn fit_growth(epsilon: f64, points: Vec<CurvePoint>, tail: usize) -> Result<CurveEntry> {
    let k = tail.min(points.len());
    if k < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 lengths in the tail window, have {k}"
        )));
    }
    let window = &points[points.len() - k..];
    let xy: Vec<(f64, f64)> = window.iter().map(|p| (p.n as f64, p.log_count)).collect();
    let fit = fit_line(&xy)?;
    Ok(CurveEntry {
        epsilon,
        window: (window[0].n, window[k - 1].n),
        growth_rate: fit.slope.max(0.0),
        raw_slope: fit.slope,
        residual: fit.residual,
        points,
    })
}

/// Average of `f` over the words of length `n` under `walk`, with its
/// standard error. Exact when `p^n <= budget`.
pub fn integrate_words<F>(
    walk: &RandomWalk,
    n: usize,
    budget: u64,
    seed: u64,
    f: F,
) -> Result<(f64, f64)>
where
    F: Fn(&Word) -> Result<f64> + Sync,
{
    let avg = integrate_vec(walk, n, budget, seed, |w| Ok(vec![f(w)?]))?;
    Ok(avg.means[0])
}

/// Walk averages of a vector of per-word values.
#[derive(Debug, Clone)]
pub struct WordAverages {
    /// `(mean, standard error)` per component.
    pub means: Vec<(f64, f64)>,
    /// Raw values per evaluated word, in canonical word order.
    pub values: Vec<Vec<f64>>,
}

/// Averages every component of `f` over the words of length `n`, exactly
/// when `p^n <= budget`, else over `budget` seeded draws. Words are
/// evaluated in parallel and summed in canonical order.
pub fn integrate_vec<F>(
    walk: &RandomWalk,
    n: usize,
    budget: u64,
    seed: u64,
    f: F,
) -> Result<WordAverages>
where
    F: Fn(&Word) -> Result<Vec<f64>> + Sync,
{
    let p = walk.len();
    let total = word_count(p, n);
    let exact = total <= budget as u128;
    let words: Vec<(Word, f64)> = if exact {
        (0..total as u64)
            .map(|i| Word::nth_of_length(p, n, i))
            .map(|w| {
                let wt = walk.weight(&w);
                (w, wt)
            })
            .filter(|(_, wt)| *wt > 0.0)
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, n as u64));
        let k = budget as f64;
        (0..budget)
            .map(|_| (walk.sample_with(n, &mut rng), 1.0 / k))
            .collect()
    };
    let vals: Vec<Result<Vec<f64>>> = words.par_iter().map(|(w, _)| f(w)).collect();
    let values: Vec<Vec<f64>> = vals.into_iter().collect::<Result<_>>()?;
    let dims = values.first().map_or(0, Vec::len);
    let means = (0..dims)
        .map(|c| {
            let mean: f64 = words
                .iter()
                .zip(&values)
                .map(|((_, wt), v)| wt * v[c])
                .sum();
            if exact || values.len() < 2 {
                return (mean, 0.0);
            }
            let k = values.len() as f64;
            let var = values.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (mean, (var / k).sqrt())
        })
        .collect();
    Ok(WordAverages { means, values })
}

/// Deterministic seed derivation for named substreams.
pub fn substream(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn to_point(n: usize, mean: f64, stderr: f64) -> Result<CurvePoint> {
    if !(mean > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "average count at n = {n} is {mean}"
        )));
    }
    Ok(CurvePoint {
        n,
        log_count: mean.ln(),
        stderr: stderr / mean,
    })
}

/// Runs `count(word)` for every length and fits the growth rate.
fn walk_curve<F>(
    walk: &RandomWalk,
    epsilon: f64,
    params: &WalkParams,
    count: F,
) -> Result<CurveEntry>
where
    F: Fn(&Word) -> Result<f64> + Sync,
{
    params.validate()?;
    let mut pts = Vec::new();
    for n in params.lengths() {
        let (mean, se) = integrate_words(walk, n, params.word_budget, params.seed, &count)?;
        pts.push(to_point(n, mean, se)?);
    }
    fit_growth(epsilon, pts, params.tail)
}

fn check_walk(system: &SemigroupSystem, walk: &RandomWalk) -> Result<()> {
    if walk.len() != system.p() {
        return Err(invalid(
            "walk",
            format!("{} probabilities for {} generators", walk.len(), system.p()),
        ));
    }
    Ok(())
}

fn check_scale(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    Ok(())
}

/// Greedy `(w, n, eps)`-separated count on a model.
pub fn separated_count(
    system: &SemigroupSystem,
    word: &Word,
    model: &FinModel,
    epsilon: f64,
) -> Result<usize> {
    let prox = WordProximity {
        system,
        word,
        model,
    };
    Ok(maximal_separated(&prox, epsilon)?.len())
}

/// `s(w, n, eps)` on a word model: the model size when it is certified
/// separated, else a greedy maximal separated count.
pub fn word_separated_count(
    system: &SemigroupSystem,
    word: &Word,
    model: &WordModel<'_>,
    epsilon: f64,
) -> Result<f64> {
    match model {
        WordModel::Certified(l) => Ok(l.size()),
        WordModel::Explicit(m) => Ok(separated_count(system, word, m, epsilon)? as f64),
    }
}

/// `h(X, S, P, eps)`: growth rate of the walk average of `s(w, n, eps)`.
pub fn walk_entropy_at_scale(
    system: &SemigroupSystem,
    walk: &RandomWalk,
    epsilon: f64,
    params: &WalkParams,
) -> Result<CurveEntry> {
    check_walk(system, walk)?;
    check_scale(epsilon)?;
    walk_curve(walk, epsilon, params, |w| {
        let model = params.discretization.model_for_word(system, w, epsilon)?;
        params.whole_count(system, w, &model, epsilon)
    })
}

/// Parameters of the GLW estimator.
#[derive(Debug, Clone)]
pub struct GlwParams {
    pub n_min: usize,
    pub n_max: usize,
    pub tail: usize,
    /// Cap on the number of group elements of length `<= n`.
    pub group_budget: u128,
    pub discretization: Discretization,
}

impl Default for GlwParams {
    fn default() -> Self {
        GlwParams {
            n_min: 0,
            n_max: 3,
            tail: 3,
            group_budget: 1 << 16,
            discretization: Discretization::default(),
        }
    }
}

/// GLW separated count at depth `n` on a model.
pub fn glw_count(
    system: &SemigroupSystem,
    n: usize,
    model: &FinModel,
    epsilon: f64,
) -> Result<usize> {
    let prox = GroupProximity {
        system,
        depth: n,
        model,
    };
    Ok(maximal_separated(&prox, epsilon)?.len())
}

/// `h_GLW(S, eps)`: growth rate of the separated count when any element of
/// length `<= n` may witness the separation.
pub fn glw_entropy_at_scale(
    system: &SemigroupSystem,
    epsilon: f64,
    params: &GlwParams,
) -> Result<CurveEntry> {
    check_scale(epsilon)?;
    params.discretization.check()?;
    system.check_group_budget(params.n_max, params.group_budget)?;
    let lengths: Vec<usize> = (params.n_min..=params.n_max).collect();
    if lengths.len() < 2 {
        return Err(Error::DegenerateFit("GLW needs at least 2 lengths".into()));
    }
    let counts: Vec<Result<f64>> = lengths
        .par_iter()
        .map(
            |&n| match params.discretization.model_for_group(system, n, epsilon)? {
                WordModel::Certified(l) => Ok(l.size()),
                WordModel::Explicit(m) => Ok(glw_count(system, n, &m, epsilon)? as f64),
            },
        )
        .collect();
    let mut pts = Vec::new();
    for (n, c) in lengths.iter().zip(counts) {
        pts.push(to_point(*n, c?, 0.0)?);
    }
    fit_growth(epsilon, pts, params.tail)
}

/// Indices of model points in the closed ball `B(x, r)`.
fn ball_indices(model: &FinModel, x: &[f64], r: f64) -> Vec<usize> {
    (0..model.len())
        .filter(|&i| model.space().dist(model.point(i), x) <= r)
        .collect()
}

/// Uniform draws used to count certified lattice points inside a ball.
pub const BALL_SAMPLES: usize = 1 << 17;

/// Counts for the local entropy function at one word: the spanning estimate
/// of each ball `K_r` (or `None` if the ball holds no model point) and the
/// separated count of the whole model.
///
/// On an explicit model the spanning estimate of `K_r` is the smallest of
/// three valid spanning sets: the greedy spanning set of `K_r`, a maximal
/// separated subset of `K_r` and a maximal separated subset of the whole
/// model. On a certified lattice every point of `K_r` is needed, so the
/// estimate is the number of lattice points in the ball.
pub fn local_counts(
    system: &SemigroupSystem,
    word: &Word,
    model: &WordModel<'_>,
    x: &[f64],
    radii: &[f64],
    epsilon: f64,
    seed: u64,
) -> Result<(Vec<Option<f64>>, f64)> {
    let whole = word_separated_count(system, word, model, epsilon)?;
    Ok((
        ball_counts(system, word, model, x, radii, epsilon, seed, whole)?,
        whole,
    ))
}

#[allow(clippy::too_many_arguments)]
fn ball_counts(
    system: &SemigroupSystem,
    word: &Word,
    model: &WordModel<'_>,
    x: &[f64],
    radii: &[f64],
    epsilon: f64,
    seed: u64,
    whole: f64,
) -> Result<Vec<Option<f64>>> {
    let mut out = Vec::with_capacity(radii.len());
    for (j, &r) in radii.iter().enumerate() {
        match model {
            WordModel::Certified(l) => {
                let (c, _) = l.count_within(x, r, BALL_SAMPLES, substream(seed, j as u64));
                out.push((c > 0.0).then_some(c.min(whole)));
            }
            WordModel::Explicit(m) => {
                let idx = ball_indices(m, x, r);
                if idx.is_empty() {
                    out.push(None);
                    continue;
                }
                if whole >= m.len() as f64 {
                    // the model is itself separated: each point of K_r needs its own ball
                    out.push(Some(idx.len() as f64));
                    continue;
                }
                let k = m.subset(&idx);
                let prox = WordProximity {
                    system,
                    word,
                    model: &k,
                };
                let span = greedy_spanning(&prox, epsilon, SpanRule::Closed)?.len();
                let sep = maximal_separated(&prox, epsilon)?.len();
                out.push(Some((span.min(sep) as f64).min(whole)));
            }
        }
    }
    Ok(out)
}

/// Stable tag of a word for seed derivation.
pub(crate) fn word_tag(word: &Word) -> u64 {
    word.indices()
        .fold(0xcbf2_9ce4_8422_2325u64 ^ word.len() as u64, |h, g| {
            (h ^ (g as u64 + 1)).wrapping_mul(0x100_0000_01b3)
        })
}

/// Result of the local entropy function at one point and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEntropy {
    /// Minimum growth rate over the usable radii.
    pub value: f64,
    /// Curve per radius that held model points at every length.
    pub per_radius: Vec<(f64, CurveEntry)>,
    pub skipped: Vec<f64>,
    /// Whole-space curve computed from the same models.
    pub whole: CurveEntry,
}

/// `h_d(x, eps)`: the minimum over a radius schedule of the growth rate of
/// spanning counts of `B(x, r)`.
pub fn local_entropy(
    system: &SemigroupSystem,
    walk: &RandomWalk,
    x: &Point,
    epsilon: f64,
    radii: &[f64],
    params: &WalkParams,
) -> Result<LocalEntropy> {
    let mut v = local_entropy_at_points(
        system,
        walk,
        std::slice::from_ref(x),
        epsilon,
        radii,
        params,
    )?;
    Ok(v.pop().expect("one point"))
}

/// [`local_entropy`] at several points, sharing the word models and the
/// whole-model counts. The ball seeds depend on the point's position in `xs`.
pub fn local_entropy_at_points(
    system: &SemigroupSystem,
    walk: &RandomWalk,
    xs: &[Point],
    epsilon: f64,
    radii: &[f64],
    params: &WalkParams,
) -> Result<Vec<LocalEntropy>> {
    check_walk(system, walk)?;
    check_scale(epsilon)?;
    params.validate()?;
    if xs.is_empty() {
        return Err(invalid("points", "need at least one point"));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("radii", "need a nonempty list of positive radii"));
    }
    let mut centers = Vec::with_capacity(xs.len());
    for x in xs {
        system.space().check(x)?;
        let mut xc = x.coords.clone();
        system.space().reduce(&mut xc);
        centers.push(xc);
    }
    let k = radii.len();
    // per length: walk averages laid out as [x0 radii.., x1 radii.., .., whole]
    let mut per_n: Vec<(usize, WordAverages)> = Vec::new();
    for n in params.lengths() {
        let avg = integrate_vec(walk, n, params.word_budget, params.seed, |w| {
            let model = params.discretization.model_for_word(system, w, epsilon)?;
            let whole = params.whole_count(system, w, &model, epsilon)?;
            let per_center = centers
                .par_iter()
                .enumerate()
                .map(|(ix, xc)| {
                    let seed = substream(substream(params.seed, word_tag(w)), ix as u64);
                    ball_counts(system, w, &model, xc, radii, epsilon, seed, whole)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut v: Vec<f64> = per_center
                .iter()
                .flat_map(|balls| balls.iter().map(|c| c.unwrap_or(f64::NAN)))
                .collect();
            v.push(whole);
            Ok(v)
        })?;
        per_n.push((n, avg));
    }
    let whole_at = centers.len() * k;
    let whole_pts = per_n
        .iter()
        .map(|(n, a)| to_point(*n, a.means[whole_at].0, a.means[whole_at].1))
        .collect::<Result<Vec<_>>>()?;
    let whole = fit_growth(epsilon, whole_pts, params.tail)?;
    let mut out = Vec::with_capacity(centers.len());
    for ix in 0..centers.len() {
        let mut per_radius = Vec::new();
        let mut skipped = Vec::new();
        for (j, &r) in radii.iter().enumerate() {
            let col = ix * k + j;
            if per_n.iter().any(|(_, a)| a.means[col].0.is_nan()) {
                skipped.push(r);
                continue;
            }
            let pts = per_n
                .iter()
                .map(|(n, a)| to_point(*n, a.means[col].0, a.means[col].1))
                .collect::<Result<Vec<_>>>()?;
            per_radius.push((r, fit_growth(epsilon, pts, params.tail)?));
        }
        if per_radius.is_empty() {
            return Err(invalid(
                "radii",
                "every ball around x is empty of model points",
            ));
        }
        let value = per_radius
            .iter()
            .map(|(_, e)| e.growth_rate)
            .fold(f64::INFINITY, f64::min);
        out.push(LocalEntropy {
            value,
            per_radius,
            skipped,
            whole: whole.clone(),
        });
    }
    Ok(out)
}

/// Where a measure's mass lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    UniformGrid,
    Sampler,
    OrbitEmpirical,
    Atoms,
    Density,
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::UniformGrid => "uniform-grid",
            Provenance::Sampler => "sampler",
            Provenance::OrbitEmpirical => "orbit-empirical",
            Provenance::Atoms => "atoms",
            Provenance::Density => "density",
        }
    }
}

/// A probability measure given by weighted points.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSample {
    model: FinModel,
    pub provenance: Provenance,
}

impl MeasureSample {
    /// Points with positive weights summing to one.
    pub fn new(
        space: &crate::space::SpaceDescriptor,
        points: &[Point],
        weights: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("weights", "measure weights must be positive"));
        }
        let model = FinModel::from_points(space, points)?.with_weights(weights)?;
        Ok(MeasureSample { model, provenance })
    }

    pub fn atoms(
        space: &crate::space::SpaceDescriptor,
        points: &[Point],
        weights: Vec<f64>,
    ) -> Result<Self> {
        Self::new(space, points, weights, Provenance::Atoms)
    }

    pub fn point_mass(space: &crate::space::SpaceDescriptor, x: Point) -> Result<Self> {
        Self::atoms(space, &[x], vec![1.0])
    }

    /// Equal weights on a lattice of the given spacing.
    pub fn uniform_grid(
        space: &crate::space::SpaceDescriptor,
        spacing: f64,
        cap: usize,
    ) -> Result<Self> {
        let axes = space.axes();
        let model =
            FinModel::lattice(space, &vec![spacing; axes.len()], cap)?.with_uniform_weights();
        Ok(MeasureSample {
            model,
            provenance: Provenance::UniformGrid,
        })
    }

    /// `m` equally weighted seeded samples of the uniform distribution.
    pub fn sampled(space: &crate::space::SpaceDescriptor, m: usize, seed: u64) -> Result<Self> {
        let model = FinModel::sampled(space, m, seed)?.with_uniform_weights();
        Ok(MeasureSample {
            model,
            provenance: Provenance::Sampler,
        })
    }

    /// Weights proportional to `density` at the cell midpoints of an
    /// `m`-cell partition of a one-dimensional space.
    pub fn density_1d(
        space: &crate::space::SpaceDescriptor,
        m: usize,
        density: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let axes = space.axes();
        if axes.len() != 1 || m == 0 {
            return Err(invalid(
                "density",
                "needs a one-dimensional space and m >= 1",
            ));
        }
        let ax = axes[0];
        let pts: Vec<Point> = (0..m)
            .map(|i| Point::scalar(ax.lo + ax.range() * (i as f64 + 0.5) / m as f64))
            .collect();
        let raw: Vec<f64> = pts.iter().map(|p| density(p.coords[0]).max(0.0)).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("density", "density has no mass"));
        }
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let keep: Vec<usize> = (0..m).filter(|&i| weights[i] > 0.0).collect();
        let pts: Vec<Point> = keep.iter().map(|&i| pts[i].clone()).collect();
        let w: Vec<f64> = keep.iter().map(|&i| weights[i]).collect();
        let s: f64 = w.iter().sum();
        Self::new(
            space,
            &pts,
            w.iter().map(|x| x / s).collect(),
            Provenance::Density,
        )
    }

    /// Empirical measure of one walk orbit of length `len` started at `x0`.
    pub fn orbit_empirical(
        system: &SemigroupSystem,
        walk: &RandomWalk,
        x0: &Point,
        len: usize,
        seed: u64,
    ) -> Result<Self> {
        if len == 0 {
            return Err(invalid("len", "orbit length must be positive"));
        }
        let word = walk.sample(len - 1, seed);
        let orbit = system.apply_word(&word, x0)?;
        let w = vec![1.0 / orbit.len() as f64; orbit.len()];
        let model = FinModel::from_points(system.space(), &orbit)?.with_weights(w)?;
        Ok(MeasureSample {
            model,
            provenance: Provenance::OrbitEmpirical,
        })
    }

    pub fn model(&self) -> &FinModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        self.model.weights().expect("measure samples carry weights")
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.model.point(i)
    }
}

/// The measure used by the measure-dependent estimators.
#[derive(Debug, Clone, Copy)]
pub enum MeasureRef<'a> {
    /// Equal weights on each word's lattice model (a discretised volume).
    Lattice,
    Sample(&'a MeasureSample),
}

impl MeasureRef<'_> {
    pub fn label(&self) -> String {
        match self {
            MeasureRef::Lattice => "uniform".into(),
            MeasureRef::Sample(s) => s.provenance.tag().into(),
        }
    }
}

/// Greedy Katok deletion: drops points with the fewest `eps`-neighbours under
/// `d_w` first (ties: lowest index) while the removed weight stays `< delta`.
/// Returns the surviving indices.
pub fn katok_survivors(
    prox: &dyn Proximity,
    weights: &[f64],
    epsilon: f64,
    delta: f64,
) -> Vec<usize> {
    let m = prox.len();
    let nb = Neighbours::new(prox, epsilon);
    let degree: Vec<usize> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut c = 0;
            nb.for_each(i, |j| {
                if prox.within(i, j, epsilon) {
                    c += 1;
                }
            });
            c
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| degree[a].cmp(&degree[b]).then(a.cmp(&b)));
    let mut removed = vec![false; m];
    let mut mass = 0.0;
    for i in order {
        if mass + weights[i] < delta {
            mass += weights[i];
            removed[i] = true;
        } else {
            break;
        }
    }
    (0..m).filter(|&i| !removed[i]).collect()
}

/// `(s_nu(w, n, eps, delta), s(w, n, eps))` for one word.
///
/// `s_nu` is the separated count on the surviving support, capped by the
/// whole-model count (the whole space always has measure `> 1 - delta`).
pub fn katok_counts(
    system: &SemigroupSystem,
    word: &Word,
    model: &WordModel<'_>,
    nu: MeasureRef<'_>,
    epsilon: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    let whole = word_separated_count(system, word, model, epsilon)?;
    Ok((
        katok_count_with(system, word, model, nu, epsilon, delta, whole)?,
        whole,
    ))
}

fn katok_count_with(
    system: &SemigroupSystem,
    word: &Word,
    model: &WordModel<'_>,
    nu: MeasureRef<'_>,
    epsilon: f64,
    delta: f64,
    whole: f64,
) -> Result<f64> {
    let support: Cow<FinModel> = match (nu, model) {
        (MeasureRef::Lattice, WordModel::Certified(_)) => {
            // every point has the same degree; the lowest indices go first
            let removed = (delta * whole).ceil() - 1.0;
            return Ok(whole - removed.max(0.0));
        }
        (MeasureRef::Lattice, WordModel::Explicit(m)) => {
            Cow::Owned(m.as_ref().clone().with_uniform_weights())
        }
        (MeasureRef::Sample(s), _) => Cow::Borrowed(s.model()),
    };
    let weights = support.weights().expect("weighted").to_vec();
    let prox = WordProximity {
        system,
        word,
        model: &support,
    };
    let keep = katok_survivors(&prox, &weights, epsilon, delta);
    let e = support.subset(&keep);
    let on_e = separated_count(system, word, &e, epsilon)? as f64;
    Ok(on_e.min(whole))
}

/// Katok entropy together with the count-level domination check.
#[derive(Debug, Clone, PartialEq)]
pub struct KatokEntropy {
    pub curve: CurveEntry,
    pub action: CurveEntry,
    /// `s_nu <= s` held for every computed `(w, n)`.
    pub dominated: bool,
}

/// `h_nu^K(eps, delta)`.
pub fn katok_entropy(
    system: &SemigroupSystem,
    walk: &RandomWalk,
    nu: MeasureRef<'_>,
    epsilon: f64,
    delta: f64,
    params: &WalkParams,
) -> Result<KatokEntropy> {
    check_walk(system, walk)?;
    check_scale(epsilon)?;
    params.validate()?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0,1), got {delta}")));
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut dominated = true;
    for n in params.lengths() {
        let avg = integrate_vec(walk, n, params.word_budget, params.seed, |w| {
            let model = params.discretization.model_for_word(system, w, epsilon)?;
            let b = params.whole_count(system, w, &model, epsilon)?;
            let a = katok_count_with(system, w, &model, nu, epsilon, delta, b)?;
            Ok(vec![a, b])
        })?;
        dominated &= avg.values.iter().all(|v| v[0] <= v[1]);
        left.push(to_point(n, avg.means[0].0, avg.means[0].1)?);
        right.push(to_point(n, avg.means[1].0, avg.means[1].1)?);
    }
    Ok(KatokEntropy {
        curve: fit_growth(epsilon, left, params.tail)?,
        action: fit_growth(epsilon, right, params.tail)?,
        dominated,
    })
}

/// Refined cover `U(w, n)` restricted to the model, as membership lists.
///
/// Element `(i_0, ..., i_{n-1})` holds the points `z` with `f_w^k z` in
/// `U_{i_k}` for `k < n` (`n = 0` is read as the base cover). Elements are
/// listed in lexicographic order of their index tuples.
pub fn refined_cover(
    system: &SemigroupSystem,
    word: &Word,
    n: usize,
    cover: &CoverSpec,
    model: &FinModel,
) -> Result<SetSystem> {
    let tuples = refined_tuples(system, word, n, cover, model)?;
    let mut by_tuple: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for (i, list) in tuples.into_iter().enumerate() {
        for t in list {
            by_tuple.entry(t).or_default().push(i);
        }
    }
    let mut keys: Vec<Vec<u32>> = by_tuple.keys().cloned().collect();
    keys.sort();
    let lists: Vec<Vec<usize>> = keys
        .iter()
        .map(|k| by_tuple.remove(k).expect("key"))
        .collect();
    SetSystem::from_lists(model.len(), &lists)
}

/// Index tuples of the refined elements containing each model point.
fn refined_tuples(
    system: &SemigroupSystem,
    word: &Word,
    n: usize,
    cover: &CoverSpec,
    model: &FinModel,
) -> Result<Vec<Vec<Vec<u32>>>> {
    let steps = n.max(1);
    if word.len() + 1 < steps {
        return Err(invalid(
            "word",
            format!("length {} too short for n = {n}", word.len()),
        ));
    }
    let space = system.space();
    let letters: Vec<usize> = word.indices().collect();
    let per_point: Vec<Result<Vec<Vec<u32>>>> = (0..model.len())
        .into_par_iter()
        .map(|i| {
            let mut x = model.point(i).to_vec();
            let mut tuples: Vec<Vec<u32>> = vec![Vec::with_capacity(steps)];
            for k in 0..steps {
                if k > 0 {
                    system.step(letters[k - 1], &mut x);
                }
                let hit = cover.containing(space, &x);
                if hit.is_empty() {
                    return Err(Error::NotACover { point: i });
                }
                let mut next = Vec::with_capacity(tuples.len() * hit.len());
                for t in &tuples {
                    for &h in &hit {
                        let mut t2 = t.clone();
                        t2.push(h as u32);
                        next.push(t2);
                    }
                }
                tuples = next;
            }
            Ok(tuples)
        })
        .collect();
    per_point.into_iter().collect()
}

/// Smallest cover radius: the resolution needed by cover-based estimators.
fn cover_scale(cover: &CoverSpec) -> Result<f64> {
    let r = cover
        .balls
        .iter()
        .map(|b| b.1)
        .fold(f64::INFINITY, f64::min);
    if cover.is_empty() || !(r > 0.0) {
        return Err(invalid(
            "cover",
            "cover needs at least one ball of positive radius",
        ));
    }
    Ok(r)
}

/// `N(U, w, n)` on a model.
pub fn cover_count(
    system: &SemigroupSystem,
    word: &Word,
    n: usize,
    cover: &CoverSpec,
    model: &FinModel,
) -> Result<usize> {
    min_subcover(&refined_cover(system, word, n, cover, model)?)
}

/// `h_top(U, S, P)`: growth rate of the walk average of `N(U, w, n)`.
pub fn cover_entropy(
    system: &SemigroupSystem,
    walk: &RandomWalk,
    cover: &CoverSpec,
    params: &WalkParams,
) -> Result<CurveEntry> {
    check_walk(system, walk)?;
    let scale = cover_scale(cover)?;
    walk_curve(walk, cover.diam(), params, |w| {
        let model = params
            .cover_discretization
            .explicit_for_word(system, w, scale)?;
        Ok(cover_count(system, w, w.len(), cover, &model)? as f64)
    })
}

/// Shapira entropy per mass defect.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapiraEntropy {
    pub per_delta: Vec<(f64, CurveEntry)>,
    /// Growth rate at the smallest defect.
    pub value: f64,
    /// Growth rates never decrease as the defect shrinks.
    pub monotone: bool,
    /// `N_nu(U, w, n, delta) <= N(U, w, n)` for every computed case.
    pub dominated: bool,
    pub full_cover: CurveEntry,
}

/// `h_nu^S(U, S, P)` over a decreasing schedule of mass defects.
pub fn shapira_entropy(
    system: &SemigroupSystem,
    walk: &RandomWalk,
    cover: &CoverSpec,
    nu: MeasureRef<'_>,
    deltas: &[f64],
    params: &WalkParams,
) -> Result<ShapiraEntropy> {
    check_walk(system, walk)?;
    params.validate()?;
    let scale = cover_scale(cover)?;
    if deltas.is_empty()
        || deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0))
        || deltas.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(invalid(
            "deltas",
            "need a strictly decreasing schedule in (0,1)",
        ));
    }
    let k = deltas.len();
    let mut per: Vec<Vec<CurvePoint>> = vec![Vec::new(); k];
    let mut full = Vec::new();
    let mut dominated = true;
    for n in params.lengths() {
        let avg = integrate_vec(walk, n, params.word_budget, params.seed, |w| {
            let lattice;
            let support: &FinModel = match nu {
                MeasureRef::Lattice => {
                    lattice = params
                        .cover_discretization
                        .explicit_for_word(system, w, scale)?
                        .into_owned()
                        .with_uniform_weights();
                    &lattice
                }
                MeasureRef::Sample(s) => s.model(),
            };
            let sets = refined_cover(system, w, w.len(), cover, support)?;
            let weights = support.weights().expect("weighted");
            let whole = min_subcover(&sets)?;
            let mut v = deltas
                .iter()
                .map(|&d| Ok(min_subcover_mass(&sets, weights, d)?.min(whole) as f64))
                .collect::<Result<Vec<_>>>()?;
            v.push(whole as f64);
            Ok(v)
        })?;
        dominated &= avg.values.iter().all(|v| v[..k].iter().all(|&c| c <= v[k]));
        for (j, acc) in per.iter_mut().enumerate() {
            let (m, se) = avg.means[j];
            // a zero count means the empty family already suffices
            acc.push(CurvePoint {
                n,
                log_count: m.max(1.0).ln(),
                stderr: se / m.max(1.0),
            });
        }
        full.push(to_point(n, avg.means[k].0, avg.means[k].1)?);
    }
    let mut per_delta = Vec::with_capacity(k);
    for (d, pts) in deltas.iter().zip(per) {
        per_delta.push((*d, fit_growth(*d, pts, params.tail)?));
    }
    let monotone = per_delta
        .windows(2)
        .all(|w| w[1].1.growth_rate >= w[0].1.growth_rate - 1e-12);
    Ok(ShapiraEntropy {
        value: per_delta.last().map(|(_, e)| e.growth_rate).unwrap_or(0.0),
        per_delta,
        monotone,
        dominated,
        full_cover: fit_growth(cover.diam(), full, params.tail)?,
    })
}

/// Cover counts of the skew product against the per-word counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewCount {
    pub n: usize,
    pub per_word: Vec<(Word, usize)>,
    /// `sum_w N(U, w, n)` over all words of length `n`.
    pub total: u64,
    /// `N(U~, T_G, n)` computed on the product model.
    pub skew: u64,
}

/// Computes `N(U~, T_G, n)` on the product of all length-`n` cylinders with
/// per-word models, and independently `sum_w N(U, w, n)`.
pub fn skew_cover_count(
    system: &SemigroupSystem,
    cover: &CoverSpec,
    n: usize,
    word_budget: u64,
    discretization: &Discretization,
) -> Result<SkewCount> {
    let p = system.p();
    let words_needed = word_count(p, n);
    if words_needed > word_budget as u128 {
        return Err(Error::BudgetExceeded {
            depth: n,
            required: words_needed,
            budget: word_budget as u128,
        });
    }
    discretization.check()?;
    let scale = cover_scale(cover)?;
    let words: Vec<Word> = (0..words_needed as u64)
        .map(|i| Word::nth_of_length(p, n, i))
        .collect();
    let models: Vec<FinModel> = words
        .par_iter()
        .map(|w| {
            Ok(discretization
                .explicit_for_word(system, w, scale)?
                .into_owned())
        })
        .collect::<Result<_>>()?;

    let per_word: Vec<usize> = words
        .par_iter()
        .zip(&models)
        .map(|(w, m)| cover_count(system, w, n, cover, m))
        .collect::<Result<_>>()?;
    let total = per_word.iter().map(|&c| c as u64).sum();

    // product side: points (w, z); the element ([i_0..i_{n-1}], (j_0..j_{n-1}))
    // holds (w, z) iff w = i and f_w^k z lies in U_{j_k}
    let mut offsets = Vec::with_capacity(models.len());
    let mut total_points = 0usize;
    for m in &models {
        offsets.push(total_points);
        total_points += m.len();
    }
    let mut by_key: HashMap<(Vec<u16>, Vec<u32>), Vec<usize>> = HashMap::new();
    for (wi, (w, m)) in words.iter().zip(&models).enumerate() {
        let cyl: Vec<u16> = w.indices().map(|g| g as u16).collect();
        for (i, list) in refined_tuples(system, w, n, cover, m)?
            .into_iter()
            .enumerate()
        {
            for t in list {
                by_key
                    .entry((cyl.clone(), t))
                    .or_default()
                    .push(offsets[wi] + i);
            }
        }
    }
    let mut keys: Vec<(Vec<u16>, Vec<u32>)> = by_key.keys().cloned().collect();
    keys.sort();
    let lists: Vec<Vec<usize>> = keys
        .iter()
        .map(|k| by_key.remove(k).expect("key"))
        .collect();
    let product = SetSystem::from_lists(total_points, &lists)?;
    let skew = min_subcover(&product)? as u64;
    Ok(SkewCount {
        n,
        per_word: words.into_iter().zip(per_word).collect(),
        total,
        skew,
    })
}

/// Neighbour counts within `eps` under the space metric, weighted: the
/// `nu`-mass of each closed ball `B(z_i, eps)` over the sample points.
pub fn ball_masses(sample: &MeasureSample, centers: &[usize], radius: f64, open: bool) -> Vec<f64> {
    let m = sample.model();
    let w = sample.weights();
    centers
        .par_iter()
        .map(|&c| {
            (0..m.len())
                .filter(|&j| {
                    let d = m.space().dist(m.point(c), m.point(j));
                    if open {
                        d < radius
                    } else {
                        d <= radius
                    }
                })
                .map(|j| w[j])
                .sum()
        })
        .collect()
}

/// Balls of every model point, for callers that reuse them.
pub fn word_balls(
    system: &SemigroupSystem,
    word: &Word,
    model: &FinModel,
    epsilon: f64,
) -> SetSystem {
    ball_system(
        &WordProximity {
            system,
            word,
            model,
        },
        epsilon,
        false,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::GeneratorMap;
    use crate::space::SpaceDescriptor;

    fn times(k: u32) -> GeneratorMap {
        GeneratorMap::AffineMod1 {
            slope: k,
            offset: 0.0,
        }
    }

    fn circle_system(gens: Vec<GeneratorMap>) -> SemigroupSystem {
        SemigroupSystem::new(SpaceDescriptor::torus(1).unwrap(), gens).unwrap()
    }

    #[test]
    fn doubling_separated_count_matches_arc_count() {
        // s(1^n, n, eps) = ceil(2^n / eps) - 1 on the circle
        let sys = circle_system(vec![times(2)]);
        let disc = Discretization::default();
        for eps in [0.05, 0.01, 0.03] {
            for n in 0..6 {
                let w = Word::from_indices(&vec![0; n]);
                let model = disc.model_for_word(&sys, &w, eps).unwrap();
                assert!(matches!(model, WordModel::Explicit(_)));
                let s = word_separated_count(&sys, &w, &model, eps).unwrap();
                let oracle = ((1u64 << n) as f64 / eps).ceil() - 1.0;
                assert_eq!(s, oracle, "n={n} eps={eps}");
            }
        }
    }

    #[test]
    fn fine_lattice_counts_scale_with_the_orbit() {
        let sys = circle_system(vec![times(2)]);
        let disc = fine_discretization();
        let mut prev: Option<f64> = None;
        for n in 2..6 {
            let w = Word::from_indices(&vec![0; n]);
            let model = disc.explicit_for_word(&sys, &w, 0.02).unwrap();
            let s = separated_count(&sys, &w, &model, 0.02).unwrap() as f64;
            let oracle = ((1u64 << n) as f64 / 0.02).ceil() - 1.0;
            assert!(s <= oracle && s >= 0.5 * oracle);
            if let Some(p) = prev {
                assert!((s / p - 2.0).abs() < 0.05, "ratio {}", s / p);
            }
            prev = Some(s);
        }
    }

    #[test]
    fn certified_lattice_is_pairwise_separated() {
        let space =
            SpaceDescriptor::seq(SpaceDescriptor::interval(0.0, 1.0).unwrap(), 5, 0.5).unwrap();
        let sys = SemigroupSystem::new(space, vec![GeneratorMap::Shift]).unwrap();
        let disc = Discretization::default();
        for (n, eps) in [(0, 0.2), (1, 0.2), (2, 0.25), (1, 0.1)] {
            let w = Word::from_indices(&vec![0; n]);
            let model = disc.model_for_word(&sys, &w, eps).unwrap();
            let WordModel::Certified(l) = &model else {
                panic!("shift lattices are certified")
            };
            let explicit = l.to_model(100_000).unwrap();
            assert_eq!(
                separated_count(&sys, &w, &explicit, eps).unwrap() as f64,
                l.size()
            );
        }
    }

    #[test]
    fn identity_has_zero_entropy() {
        let sys = circle_system(vec![GeneratorMap::Identity]);
        let walk = RandomWalk::symmetric(1);
        let e =
            walk_entropy_at_scale(&sys, &walk, 0.1, &WalkParams::default().with_n(1, 4)).unwrap();
        assert!(e.growth_rate.abs() < 1e-12);
        let counts: Vec<f64> = e.points.iter().map(|p| p.log_count).collect();
        assert!(counts.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn doubling_walk_entropy_near_log2() {
        let sys = circle_system(vec![times(2)]);
        let walk = RandomWalk::symmetric(1);
        let e =
            walk_entropy_at_scale(&sys, &walk, 0.01, &WalkParams::default().with_n(2, 6)).unwrap();
        assert!(
            (e.growth_rate - 2f64.ln()).abs() < 0.1 * 2f64.ln(),
            "{}",
            e.growth_rate
        );
    }

    #[test]
    fn fixed_model_mesh_is_checked() {
        let sys = circle_system(vec![times(2)]);
        let coarse = FinModel::net(sys.space(), 0.1, 1000).unwrap();
        let params = WalkParams {
            discretization: Discretization::Fixed(coarse),
            ..WalkParams::default()
        };
        let err =
            walk_entropy_at_scale(&sys, &RandomWalk::symmetric(1), 0.05, &params).unwrap_err();
        assert!(matches!(err, Error::MeshTooCoarse { .. }));
    }

    #[test]
    fn monte_carlo_path_reports_stderr() {
        let sys = circle_system(vec![times(2), times(3)]);
        let walk = RandomWalk::symmetric(2);
        let params = WalkParams {
            word_budget: 3,
            seed: 9,
            ..WalkParams::default().with_n(1, 3)
        };
        let e = walk_entropy_at_scale(&sys, &walk, 0.1, &params).unwrap();
        assert_eq!(e.points[0].stderr, 0.0);
        assert!(e.points[2].stderr > 0.0);
        let again = walk_entropy_at_scale(&sys, &walk, 0.1, &params).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn glw_single_generator_matches_walk() {
        let sys = circle_system(vec![times(2)]);
        let disc = Discretization::default();
        for n in 0..4 {
            let w = Word::from_indices(&vec![0; n]);
            let m = disc.explicit_for_word(&sys, &w, 0.05).unwrap();
            assert_eq!(
                glw_count(&sys, n, &m, 0.05).unwrap(),
                separated_count(&sys, &w, &m, 0.05).unwrap()
            );
        }
    }

    #[test]
    fn glw_dominates_every_word_on_a_shared_model() {
        let sys = circle_system(vec![times(2), times(3)]);
        let model = FinModel::net(sys.space(), 0.002, 10_000).unwrap();
        for n in 0..3 {
            let g = glw_count(&sys, n, &model, 0.05).unwrap();
            for i in 0..word_count(2, n) as u64 {
                let w = Word::nth_of_length(2, n, i);
                assert!(g >= separated_count(&sys, &w, &model, 0.05).unwrap());
            }
        }
    }

    #[test]
    fn rotations_have_zero_glw_entropy() {
        let sys = circle_system(vec![
            GeneratorMap::Rotation { angles: vec![0.1] },
            GeneratorMap::Rotation { angles: vec![-0.1] },
        ]);
        let e = glw_entropy_at_scale(&sys, 0.05, &GlwParams::default()).unwrap();
        assert!(e.growth_rate < 1e-9);
    }

    #[test]
    fn katok_point_mass_and_small_delta() {
        let sys = circle_system(vec![times(2)]);
        let w = Word::from_indices(&[0, 0, 0]);
        let disc = Discretization::default();
        let model = disc.model_for_word(&sys, &w, 0.05).unwrap();
        let atom = MeasureSample::point_mass(sys.space(), Point::scalar(0.3)).unwrap();
        let (a, b) = katok_counts(&sys, &w, &model, MeasureRef::Sample(&atom), 0.05, 0.1).unwrap();
        assert_eq!(a, 1.0);
        assert!(b > 1.0);
        let tiny = 0.1 / model.size();
        let (a, b) = katok_counts(&sys, &w, &model, MeasureRef::Lattice, 0.05, tiny).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cover_counts_grow_and_one_set_gives_one() {
        let sys = circle_system(vec![times(2), times(3)]);
        let whole = CoverSpec::whole(sys.space());
        let disc = fine_discretization();
        let w = Word::from_indices(&[0, 1, 1]);
        let m = disc.explicit_for_word(&sys, &w, 0.1).unwrap();
        assert_eq!(cover_count(&sys, &w, 3, &whole, &m).unwrap(), 1);

        let arcs = CoverSpec::from_net(sys.space(), 0.125, 0.1, 100).unwrap();
        let m = disc.explicit_for_word(&sys, &w, 0.1).unwrap();
        let mut last = 0;
        for n in 0..=3 {
            let c = cover_count(&sys, &w, n, &arcs, &m).unwrap();
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn skew_identity_small_cases() {
        let sys = circle_system(vec![times(2), times(3)]);
        let arcs = CoverSpec::from_net(sys.space(), 0.125, 0.1, 100).unwrap();
        let disc = fine_discretization();
        for n in 0..=3 {
            let s = skew_cover_count(&sys, &arcs, n, 1 << 10, &disc).unwrap();
            assert_eq!(s.total, s.skew, "n = {n}");
        }
        let one = circle_system(vec![times(2)]);
        let s = skew_cover_count(&one, &arcs, 2, 16, &disc).unwrap();
        assert_eq!(s.per_word.len(), 1);
        assert_eq!(s.total, s.per_word[0].1 as u64);
    }
}
