//! Generator maps, words, orbit segments, dynamical metrics and balls,
//! Bernoulli random walks and the skew product over the walk.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};
use crate::space::{wrap_unit, Point, SpaceDescriptor};

pub(crate) type Scratch = SmallVec<[f64; 32]>;

/// A continuous self-map of one of the supported spaces.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorMap {
    /// `x -> k x + c (mod 1)` coordinatewise on a torus.
    AffineMod1 {
        slope: u32,
        offset: f64,
    },
    /// Translation by one angle per coordinate (a single angle is broadcast).
    Rotation {
        angles: Vec<f64>,
    },
    /// Tent map of slope `s` in `(0, 2]` on an interval.
    Tent {
        slope: f64,
    },
    /// Left shift on a truncated sequence space; the vacated block is the base anchor.
    Shift,
    Identity,
}

impl GeneratorMap {
    pub fn kind_name(&self) -> &'static str {
        match self {
            GeneratorMap::AffineMod1 { .. } => "affine",
            GeneratorMap::Rotation { .. } => "rotation",
            GeneratorMap::Tent { .. } => "tent",
            GeneratorMap::Shift => "shift",
            GeneratorMap::Identity => "identity",
        }
    }

    fn check(&self, index: usize, space: &SpaceDescriptor) -> Result<()> {
        let ok = match (self, space) {
            (GeneratorMap::AffineMod1 { slope, offset }, SpaceDescriptor::Torus { .. }) => {
                *slope >= 1 && offset.is_finite()
            }
            (GeneratorMap::Rotation { angles }, SpaceDescriptor::Torus { dim }) => {
                (angles.len() == 1 || angles.len() == *dim) && angles.iter().all(|a| a.is_finite())
            }
            (GeneratorMap::Tent { slope }, SpaceDescriptor::Interval { .. }) => {
                *slope > 0.0 && *slope <= 2.0
            }
            (GeneratorMap::Shift, SpaceDescriptor::SeqSpace { .. }) => true,
            (GeneratorMap::Identity, _) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::IncompatibleGenerator {
                generator: index + 1,
                kind: format!("{self:?}"),
                space: space.to_string(),
            })
        }
    }

    /// Applies the map to a conforming coordinate buffer.
    #[inline]
    pub fn apply_in_place(&self, space: &SpaceDescriptor, x: &mut [f64]) {
        match self {
            GeneratorMap::AffineMod1 { slope, offset } => {
                let k = *slope as f64;
                x.iter_mut().for_each(|c| *c = wrap_unit(k * *c + offset));
            }
            GeneratorMap::Rotation { angles } => {
                if angles.len() == 1 {
                    x.iter_mut().for_each(|c| *c = wrap_unit(*c + angles[0]));
                } else {
                    x.iter_mut()
                        .zip(angles)
                        .for_each(|(c, a)| *c = wrap_unit(*c + a));
                }
            }
            GeneratorMap::Tent { slope } => {
                if let SpaceDescriptor::Interval { a, b } = space {
                    let u = (x[0] - a) / (b - a);
                    let t = slope * u.min(1.0 - u);
                    x[0] = (a + t * (b - a)).clamp(*a, *b);
                }
            }
            GeneratorMap::Shift => {
                if let SpaceDescriptor::SeqSpace { base, .. } = space {
                    let bd = base.dim();
                    let len = x.len();
                    x.copy_within(bd.., 0);
                    x[len - bd..].copy_from_slice(&base.anchor());
                }
            }
            GeneratorMap::Identity => {}
        }
    }

    /// Upper Lipschitz constant with respect to the space metric.
    pub fn lipschitz(&self, space: &SpaceDescriptor) -> f64 {
        match self {
            GeneratorMap::AffineMod1 { slope, .. } => *slope as f64,
            GeneratorMap::Tent { slope } => *slope,
            GeneratorMap::Shift => match space {
                SpaceDescriptor::SeqSpace { rho, .. } => 1.0 / rho,
                _ => 1.0,
            },
            GeneratorMap::Rotation { .. } | GeneratorMap::Identity => 1.0,
        }
    }

    pub fn is_isometry(&self) -> bool {
        matches!(self, GeneratorMap::Rotation { .. } | GeneratorMap::Identity)
    }
}

/// A finite word of generator indices, stored zero-based.
///
/// Distinct letter sequences are distinct words even when they induce the
/// same map.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    letters: Vec<u16>,
}

impl Word {
    pub fn empty() -> Self {
        Word::default()
    }

    /// Builds a word from zero-based generator indices.
    pub fn from_indices(indices: &[usize]) -> Self {
        Word {
            letters: indices.iter().map(|&i| i as u16).collect(),
        }
    }

    /// Builds a word from one-based letters `1..=p`.
    pub fn from_letters(letters: &[usize]) -> Result<Self> {
        if let Some(&bad) = letters.iter().find(|&&l| l == 0) {
            return Err(Error::LetterOutOfRange {
                index: bad,
                count: 0,
            });
        }
        Ok(Word {
            letters: letters.iter().map(|&l| (l - 1) as u16).collect(),
        })
    }

    /// The `idx`-th word of length `n` over `p` letters in lexicographic order.
    pub fn nth_of_length(p: usize, n: usize, mut idx: u64) -> Self {
        let mut letters = vec![0u16; n];
        for slot in letters.iter_mut().rev() {
            *slot = (idx % p as u64) as u16;
            idx /= p as u64;
        }
        Word { letters }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.letters.iter().map(|&l| l as usize)
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word {
            letters: self.letters[..n].to_vec(),
        }
    }

    pub fn push(&mut self, index: usize) {
        self.letters.push(index as u16);
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", l + 1)?;
        }
        write!(f, ")")
    }
}

/// Number of words of length `n` over `p` letters, saturating.
pub fn word_count(p: usize, n: usize) -> u128 {
    (p as u128).saturating_pow(n as u32)
}

/// All words of length `n` in lexicographic order.
pub fn words_of_length(p: usize, n: usize) -> impl Iterator<Item = Word> {
    let total = word_count(p, n) as u64;
    (0..total).map(move |i| Word::nth_of_length(p, n, i))
}

/// `p + p^2 + ... + p^n`, saturating.
pub fn group_word_count(p: usize, n: usize) -> u128 {
    (1..=n).fold(0u128, |acc, j| acc.saturating_add(word_count(p, j)))
}

/// Bernoulli measure on generator sequences with i.i.d. letter probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalk {
    probs: Vec<f64>,
}

impl RandomWalk {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("walk", "empty probability vector"));
        }
        if probs.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(invalid("walk", "probabilities must be finite and >= 0"));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "walk",
                format!("probabilities must sum to 1 (sum = {s})"),
            ));
        }
        Ok(RandomWalk { probs })
    }

    /// The symmetric walk `(1/p, ..., 1/p)`.
    pub fn symmetric(p: usize) -> Self {
        RandomWalk {
            probs: vec![1.0 / p as f64; p],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Cylinder weight of a word: the product of its letter probabilities.
    pub fn weight(&self, word: &Word) -> f64 {
        word.indices().map(|i| self.probs[i]).product()
    }

    /// Draws a word of length `n`; deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Word {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: rand::Rng>(&self, n: usize, rng: &mut R) -> Word {
        // `new` guarantees a positive total, so the index is constructible
        let dist = WeightedIndex::new(&self.probs).expect("validated probability vector");
        let idx: Vec<usize> = (0..n).map(|_| dist.sample(rng)).collect();
        Word::from_indices(&idx)
    }
}

/// A finitely generated free semigroup acting on a compact space.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupSystem {
    space: SpaceDescriptor,
    generators: Vec<GeneratorMap>,
    names: Vec<String>,
}

impl SemigroupSystem {
    pub fn new(space: SpaceDescriptor, generators: Vec<GeneratorMap>) -> Result<Self> {
        let names = (1..=generators.len()).map(|i| format!("g{i}")).collect();
        Self::with_names(space, generators, names)
    }

    pub fn with_names(
        space: SpaceDescriptor,
        generators: Vec<GeneratorMap>,
        names: Vec<String>,
    ) -> Result<Self> {
        space.validate()?;
        if generators.is_empty() {
            return Err(invalid("generators", "need at least one generator"));
        }
        if names.len() != generators.len() {
            return Err(invalid("generators", "one name per generator"));
        }
        for (i, g) in generators.iter().enumerate() {
            g.check(i, &space)?;
        }
        Ok(SemigroupSystem {
            space,
            generators,
            names,
        })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn generators(&self) -> &[GeneratorMap] {
        &self.generators
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of generators `p`.
    pub fn p(&self) -> usize {
        self.generators.len()
    }

    /// Stable hash of the system, used as an orbit cache key.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        format!("{:?}|{:?}", self.space, self.generators).hash(&mut h);
        h.finish()
    }

    pub fn check_word(&self, word: &Word) -> Result<()> {
        match word.indices().find(|&i| i >= self.p()) {
            Some(i) => Err(Error::LetterOutOfRange {
                index: i + 1,
                count: self.p(),
            }),
            None => Ok(()),
        }
    }

    fn check_point(&self, x: &Point) -> Result<Vec<f64>> {
        self.space.check(x)?;
        let mut c = x.coords.clone();
        self.space.reduce(&mut c);
        Ok(c)
    }

    #[inline]
    pub(crate) fn step(&self, g: usize, x: &mut [f64]) {
        self.generators[g].apply_in_place(&self.space, x);
    }

    /// Orbit segment `x, g_{w1} x, ..., f_w^n x`.
    pub fn apply_word(&self, word: &Word, x: &Point) -> Result<Vec<Point>> {
        self.check_word(word)?;
        let mut cur = self.check_point(x)?;
        let mut out = Vec::with_capacity(word.len() + 1);
        out.push(Point::new(cur.clone()));
        for g in word.indices() {
            self.step(g, &mut cur);
            out.push(Point::new(cur.clone()));
        }
        Ok(out)
    }

    /// Endpoint `f_w^n x` written into `x`.
    pub(crate) fn endpoint_in_place(&self, word: &Word, x: &mut [f64]) {
        for g in word.indices() {
            self.step(g, x);
        }
    }

    /// `max_j d(g_j x, g_j y)` along the prefixes of `word`.
    pub fn dynamical_distance(&self, word: &Word, x: &Point, y: &Point) -> Result<f64> {
        self.check_word(word)?;
        let xs = self.check_point(x)?;
        let ys = self.check_point(y)?;
        Ok(self.dyn_dist_raw(word, &xs, &ys))
    }

    pub(crate) fn dyn_dist_raw(&self, word: &Word, x: &[f64], y: &[f64]) -> f64 {
        let mut a: Scratch = SmallVec::from_slice(x);
        let mut b: Scratch = SmallVec::from_slice(y);
        let mut best = self.space.dist(&a, &b);
        for g in word.indices() {
            self.step(g, &mut a);
            self.step(g, &mut b);
            best = best.max(self.space.dist(&a, &b));
        }
        best
    }

    /// True iff every prefix keeps `x` and `y` within `r` (non-strict); exits early.
    pub(crate) fn dyn_within_raw(&self, word: &Word, x: &[f64], y: &[f64], r: f64) -> bool {
        if self.space.dist(x, y) > r {
            return false;
        }
        let mut a: Scratch = SmallVec::from_slice(x);
        let mut b: Scratch = SmallVec::from_slice(y);
        for g in word.indices() {
            self.step(g, &mut a);
            self.step(g, &mut b);
            if self.space.dist(&a, &b) > r {
                return false;
            }
        }
        true
    }

    /// Whether some concatenation of length `<= n` pushes `x`, `y` apart:
    /// `d(gx, gy) > r` (or `>= r` when `strict_ball`). Depth-first with early exit.
    pub(crate) fn group_separates_raw(
        &self,
        x: &[f64],
        y: &[f64],
        n: usize,
        r: f64,
        strict_ball: bool,
    ) -> bool {
        let apart = |d: f64| if strict_ball { d >= r } else { d > r };
        if apart(self.space.dist(x, y)) {
            return true;
        }
        if n == 0 {
            return false;
        }
        let mut stack: Vec<(usize, Scratch, Scratch)> =
            vec![(0, SmallVec::from_slice(x), SmallVec::from_slice(y))];
        while let Some((depth, a, b)) = stack.pop() {
            for g in (0..self.p()).rev() {
                let mut a2 = a.clone();
                let mut b2 = b.clone();
                self.step(g, &mut a2);
                self.step(g, &mut b2);
                if apart(self.space.dist(&a2, &b2)) {
                    return true;
                }
                if depth + 1 < n {
                    stack.push((depth + 1, a2, b2));
                }
            }
        }
        false
    }

    /// Largest `d(gx, gy)` over all concatenations of length `<= n`.
    pub(crate) fn group_distance_raw(&self, x: &[f64], y: &[f64], n: usize) -> f64 {
        let mut best = self.space.dist(x, y);
        let mut stack: Vec<(usize, Scratch, Scratch)> =
            vec![(0, SmallVec::from_slice(x), SmallVec::from_slice(y))];
        while let Some((depth, a, b)) = stack.pop() {
            if depth == n {
                continue;
            }
            for g in 0..self.p() {
                let mut a2 = a.clone();
                let mut b2 = b.clone();
                self.step(g, &mut a2);
                self.step(g, &mut b2);
                best = best.max(self.space.dist(&a2, &b2));
                stack.push((depth + 1, a2, b2));
            }
        }
        best
    }

    pub fn check_group_budget(&self, n: usize, budget: u128) -> Result<()> {
        for j in 1..=n {
            let required = group_word_count(self.p(), j);
            if required > budget {
                return Err(Error::BudgetExceeded {
                    depth: j,
                    required,
                    budget,
                });
            }
        }
        Ok(())
    }

    /// Membership of `y` in the dynamical group ball `B_n^G(x, eps)`:
    /// `d(gx, gy) < eps` for every concatenation `g` of length at most `n`.
    pub fn group_ball_contains(
        &self,
        x: &Point,
        y: &Point,
        epsilon: f64,
        n: usize,
        budget: u128,
    ) -> Result<bool> {
        self.check_group_budget(n, budget)?;
        let xs = self.check_point(x)?;
        let ys = self.check_point(y)?;
        Ok(!self.group_separates_raw(&xs, &ys, n, epsilon, true))
    }

    /// One step of the skew product iterated `n` times:
    /// `(w, x) -> (sigma^n w, f_w^n x)`.
    pub fn skew_apply(&self, prefix: &Word, x: &Point, n: usize) -> Result<(Word, Point)> {
        if prefix.len() < n {
            return Err(invalid(
                "prefix",
                format!("length {} shorter than n = {n}", prefix.len()),
            ));
        }
        self.check_word(prefix)?;
        let mut cur = self.check_point(x)?;
        let head = prefix.prefix(n);
        self.endpoint_in_place(&head, &mut cur);
        let rest = Word {
            letters: prefix.letters[n..].to_vec(),
        };
        Ok((rest, Point::new(cur)))
    }

    /// Per-coordinate Lipschitz bounds `L_c` with
    /// `d_w(x, y) <= sum_c L_c |x_c - y_c|` along every prefix of `word`.
    pub fn coordinate_lipschitz(&self, word: &Word) -> Vec<f64> {
        let axes = self.space.axes();
        match &self.space {
            SpaceDescriptor::SeqSpace { base, rho, .. } => {
                let bd = base.dim();
                let shifts = word
                    .indices()
                    .filter(|&g| matches!(self.generators[g], GeneratorMap::Shift))
                    .count();
                axes.iter()
                    .enumerate()
                    .map(|(c, ax)| {
                        let block = c / bd + 1;
                        // the block sits at position block - j after j shifts
                        let pos = block.saturating_sub(shifts).max(1);
                        let orig = rho.powi(block as i32);
                        ax.weight / orig * rho.powi(pos as i32)
                    })
                    .collect()
            }
            _ => {
                let mut lip: f64 = 1.0;
                let mut best: f64 = 1.0;
                for g in word.indices() {
                    lip *= self.generators[g].lipschitz(&self.space);
                    best = best.max(lip);
                }
                axes.iter().map(|ax| ax.weight * best).collect()
            }
        }
    }

    /// Whether `d_w(x, y) >= L_c(w) * gap_c(x, y)` holds for every word and
    /// coordinate, with `L_c` from [`coordinate_lipschitz`](Self::coordinate_lipschitz).
    /// True for shifts on sequence spaces and for isometries.
    pub fn separation_certified(&self) -> bool {
        match &self.space {
            SpaceDescriptor::SeqSpace { .. } => self
                .generators
                .iter()
                .all(|g| matches!(g, GeneratorMap::Shift | GeneratorMap::Identity)),
            _ => self.is_isometric(),
        }
    }

    /// Largest Lipschitz bound over all concatenations of length `<= n`.
    pub fn group_lipschitz(&self, n: usize) -> f64 {
        let worst = self
            .generators
            .iter()
            .map(|g| g.lipschitz(&self.space))
            .fold(1.0, f64::max);
        worst.powi(n as i32)
    }

    pub fn is_isometric(&self) -> bool {
        self.generators.iter().all(GeneratorMap::is_isometry)
    }

    /// Whether every generator has its inverse (or is the identity) in the list.
    /// Only rotations and the identity are recognised as invertible.
    pub fn is_inverse_closed(&self) -> bool {
        self.generators.iter().all(|g| match g {
            GeneratorMap::Identity => true,
            GeneratorMap::Rotation { angles } => self.generators.iter().any(|h| match h {
                GeneratorMap::Rotation { angles: other } => {
                    other.len() == angles.len()
                        && angles
                            .iter()
                            .zip(other)
                            .all(|(a, b)| crate::space::circle_gap(*a, -*b) < 1e-12)
                }
                _ => false,
            }),
            _ => false,
        })
    }
}
