//! Packing and covering kernels: greedy maximal separated sets, greedy
//! spanning sets, greedy minimal subcovers (full and up to a mass defect),
//! and an exact branch-and-bound solver for small instances.
//!
//! All greedy passes visit points and sets in index order and break ties
//! by the lowest index, so outputs are reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::screen::{KdTree, Screen};
use crate::semigroup::{SemigroupSystem, Word};
use crate::space::{lattice_levels, lattice_product, Point, SpaceDescriptor};

/// Finite stand-in for a compact set: a list of points, optionally weighted.
#[derive(Debug, Clone, PartialEq)]
pub struct FinModel {
    space: SpaceDescriptor,
    dim: usize,
    coords: Vec<f64>,
    weights: Option<Vec<f64>>,
    mesh: Option<f64>,
}

impl FinModel {
    pub fn from_points(space: &SpaceDescriptor, points: &[Point]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyModel);
        }
        let dim = space.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            space.check(p)?;
            let mut c = p.coords.clone();
            space.reduce(&mut c);
            coords.extend(c);
        }
        Ok(FinModel {
            space: space.clone(),
            dim,
            coords,
            weights: None,
            mesh: None,
        })
    }

    /// Uniform lattice net of the whole space (see [`SpaceDescriptor::cover_net`]).
    pub fn net(space: &SpaceDescriptor, spacing: f64, cap: usize) -> Result<Self> {
        let pts = space.cover_net(spacing, cap)?;
        let mut m = FinModel::from_points(space, &pts)?;
        m.mesh = Some(spacing);
        Ok(m)
    }

    /// Product lattice whose spacing along coordinate `c` is at most `spacing[c]`.
    /// The recorded mesh is the covering radius in the space metric.
    pub fn lattice(space: &SpaceDescriptor, spacing: &[f64], cap: usize) -> Result<Self> {
        let axes = space.axes();
        if spacing.len() != axes.len() {
            return Err(Error::DimensionMismatch {
                expected: axes.len(),
                got: spacing.len(),
            });
        }
        let levels = lattice_levels(&axes, spacing);
        let coords = lattice_product(&levels, cap)?;
        let mesh = axes
            .iter()
            .zip(&levels)
            .map(|(ax, l)| {
                let gap = if l.len() == 1 {
                    ax.range()
                } else if ax.periodic {
                    ax.range() / l.len() as f64
                } else {
                    ax.range() / (l.len() - 1) as f64
                };
                ax.weight * gap / 2.0
            })
            .sum();
        Ok(FinModel {
            space: space.clone(),
            dim: axes.len(),
            coords,
            weights: None,
            mesh: Some(mesh),
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(invalid("weights", "one weight per point"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights", "weights must be finite and >= 0"));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "weights",
                format!("weights must sum to 1 (sum = {s})"),
            ));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn with_uniform_weights(self) -> Self {
        let m = self.len();
        let w = vec![1.0 / m as f64; m];
        FinModel {
            weights: Some(w),
            ..self
        }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_point(&self, i: usize) -> Point {
        Point::new(self.point(i).to_vec())
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.len() as f64,
        }
    }

    /// Declared covering radius, when the model was built as a lattice.
    pub fn mesh(&self) -> Option<f64> {
        self.mesh
    }

    /// Covering radius estimated from `probes` seeded sample points.
    pub fn estimate_mesh(&self, probes: usize, seed: u64) -> f64 {
        let sp = &self.space;
        let pts = sp.sample_points(probes.max(1), seed).unwrap_or_default();
        pts.iter()
            .map(|p| {
                (0..self.len())
                    .map(|i| sp.dist(&p.coords, self.point(i)))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Sub-model of the listed points; weights are kept unnormalised.
    pub fn subset(&self, indices: &[usize]) -> FinModel {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        FinModel {
            space: self.space.clone(),
            dim: self.dim,
            coords,
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
            mesh: None,
        }
    }

    /// Seeded pseudo-uniform model.
    pub fn sampled(space: &SpaceDescriptor, m: usize, seed: u64) -> Result<Self> {
        let pts = space.sample_points(m, seed)?;
        FinModel::from_points(space, &pts)
    }

    /// Screening keys built from the point coordinates scaled by `weights[c]`.
    pub(crate) fn coordinate_screen(&self, weights: &[f64]) -> Screen {
        let axes = self.space.axes();
        let mut keys = Vec::with_capacity(self.coords.len());
        for i in 0..self.len() {
            keys.extend(self.point(i).iter().zip(weights).map(|(c, w)| c * w));
        }
        Screen {
            dims: self.dim,
            keys,
            periods: axes
                .iter()
                .zip(weights)
                .map(|(ax, w)| ax.periodic.then_some(ax.range() * w))
                .collect(),
        }
    }
}

/// A product lattice kept implicit: points are decoded from their index
/// (last axis fastest, as in [`FinModel::lattice`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLattice {
    space: SpaceDescriptor,
    levels: Vec<Vec<f64>>,
}

impl ProductLattice {
    pub(crate) fn new(space: &SpaceDescriptor, levels: Vec<Vec<f64>>) -> Self {
        ProductLattice {
            space: space.clone(),
            levels,
        }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Number of points, as a float (it may exceed every integer type in use).
    pub fn size(&self) -> f64 {
        self.levels.iter().map(|l| l.len() as f64).product()
    }

    fn size_u128(&self) -> u128 {
        self.levels
            .iter()
            .fold(1u128, |a, l| a.saturating_mul(l.len() as u128))
    }

    pub fn point_into(&self, mut idx: u128, out: &mut [f64]) {
        for (c, l) in self.levels.iter().enumerate().rev() {
            let q = l.len() as u128;
            out[c] = l[(idx % q) as usize];
            idx /= q;
        }
    }

    /// Materialises the lattice as a model.
    pub fn to_model(&self, cap: usize) -> Result<FinModel> {
        let coords = lattice_product(&self.levels, cap)?;
        Ok(FinModel {
            space: self.space.clone(),
            dim: self.levels.len(),
            coords,
            weights: None,
            mesh: None,
        })
    }

    /// Number of lattice points in the closed ball `B(x, r)`: exact when the
    /// lattice has at most `samples` points, otherwise estimated from
    /// `samples` uniform draws. Returns `(count, standard error)`.
    pub fn count_within(&self, x: &[f64], r: f64, samples: usize, seed: u64) -> (f64, f64) {
        let d = self.levels.len();
        let mut buf = vec![0.0; d];
        let total = self.size_u128();
        if total <= samples as u128 {
            let mut hits = 0u64;
            for i in 0..total {
                self.point_into(i, &mut buf);
                if self.space.dist(&buf, x) <= r {
                    hits += 1;
                }
            }
            return (hits as f64, 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = 0u64;
        for _ in 0..samples {
            for (c, l) in self.levels.iter().enumerate() {
                buf[c] = l[rng.random_range(0..l.len())];
            }
            if self.space.dist(&buf, x) <= r {
                hits += 1;
            }
        }
        let f = hits as f64 / samples as f64;
        let se = (f * (1.0 - f) / samples as f64).sqrt();
        (f * self.size(), se * self.size())
    }
}

/// Pairwise distance provider over the points of a finite model.
pub trait Proximity: Sync {
    fn len(&self) -> usize;

    fn distance(&self, i: usize, j: usize) -> f64;

    /// `distance(i, j) <= r`; implementations may stop early.
    fn within(&self, i: usize, j: usize, r: f64) -> bool {
        self.distance(i, j) <= r
    }

    /// `distance(i, j) < r`.
    fn within_strict(&self, i: usize, j: usize, r: f64) -> bool {
        self.distance(i, j) < r
    }

    /// Optional screening keys (see [`Screen`]).
    fn screen(&self) -> Option<Screen> {
        None
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Explicit symmetric distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProximity {
    m: usize,
    d: Vec<f64>,
}

impl MatrixProximity {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::EmptyModel);
        }
        let mut d = Vec::with_capacity(m * m);
        for r in &rows {
            if r.len() != m {
                return Err(invalid("matrix", "distance matrix must be square"));
            }
            d.extend_from_slice(r);
        }
        for i in 0..m {
            for j in 0..m {
                let v = d[i * m + j];
                if !(v >= 0.0) || v != d[j * m + i] {
                    return Err(invalid(
                        "matrix",
                        format!("entry ({i},{j}) must be nonnegative and symmetric"),
                    ));
                }
            }
        }
        Ok(MatrixProximity { m, d })
    }

    pub fn from_proximity(p: &dyn Proximity) -> Self {
        let m = p.len();
        let mut d = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                d[i * m + j] = p.distance(i, j);
            }
        }
        MatrixProximity { m, d }
    }
}

impl Proximity for MatrixProximity {
    fn len(&self) -> usize {
        self.m
    }
    fn distance(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.m + j]
    }
}

/// The plain space metric on a model.
pub struct SpaceProximity<'a> {
    pub model: &'a FinModel,
}

impl Proximity for SpaceProximity<'_> {
    fn len(&self) -> usize {
        self.model.len()
    }
    fn distance(&self, i: usize, j: usize) -> f64 {
        self.model
            .space()
            .dist(self.model.point(i), self.model.point(j))
    }
    fn screen(&self) -> Option<Screen> {
        let w: Vec<f64> = self.model.space().axes().iter().map(|a| a.weight).collect();
        Some(self.model.coordinate_screen(&w))
    }
}

/// The dynamical metric `d_w` of a fixed word on a model.
pub struct WordProximity<'a> {
    pub system: &'a SemigroupSystem,
    pub word: &'a Word,
    pub model: &'a FinModel,
}

impl Proximity for WordProximity<'_> {
    fn len(&self) -> usize {
        self.model.len()
    }
    fn distance(&self, i: usize, j: usize) -> f64 {
        self.system
            .dyn_dist_raw(self.word, self.model.point(i), self.model.point(j))
    }
    fn within(&self, i: usize, j: usize, r: f64) -> bool {
        self.system
            .dyn_within_raw(self.word, self.model.point(i), self.model.point(j), r)
    }
    fn screen(&self) -> Option<Screen> {
        Some(orbit_screen(self.system, self.word, self.model))
    }
}

/// The group metric `max_{|g| <= n} d(g x, g y)` on a model.
pub struct GroupProximity<'a> {
    pub system: &'a SemigroupSystem,
    pub depth: usize,
    pub model: &'a FinModel,
}

impl Proximity for GroupProximity<'_> {
    fn len(&self) -> usize {
        self.model.len()
    }
    fn distance(&self, i: usize, j: usize) -> f64 {
        self.system
            .group_distance_raw(self.model.point(i), self.model.point(j), self.depth)
    }
    fn within(&self, i: usize, j: usize, r: f64) -> bool {
        !self.system.group_separates_raw(
            self.model.point(i),
            self.model.point(j),
            self.depth,
            r,
            false,
        )
    }
    fn within_strict(&self, i: usize, j: usize, r: f64) -> bool {
        !self.system.group_separates_raw(
            self.model.point(i),
            self.model.point(j),
            self.depth,
            r,
            true,
        )
    }
    fn screen(&self) -> Option<Screen> {
        // every prefix of the most expanding power is a group element
        let fastest = (0..self.system.p())
            .max_by(|&a, &b| {
                let la = self.system.generators()[a].lipschitz(self.system.space());
                let lb = self.system.generators()[b].lipschitz(self.system.space());
                la.total_cmp(&lb).then(b.cmp(&a))
            })
            .unwrap_or(0);
        let word = Word::from_indices(&vec![fastest; self.depth]);
        Some(orbit_screen(self.system, &word, self.model))
    }
}

/// Keys valid for any metric dominating `d_w`: start coordinates scaled by
/// the exact per-coordinate weights they reach along the word (sequence
/// spaces), or start and end coordinates (tori and intervals).
fn orbit_screen(system: &SemigroupSystem, word: &Word, model: &FinModel) -> Screen {
    let space = system.space();
    match space {
        SpaceDescriptor::SeqSpace { .. } => {
            let only_shift_like = system.generators().iter().all(|g| {
                matches!(
                    g,
                    crate::semigroup::GeneratorMap::Shift
                        | crate::semigroup::GeneratorMap::Identity
                )
            });
            let w = if only_shift_like {
                system.coordinate_lipschitz(word)
            } else {
                space.axes().iter().map(|a| a.weight).collect()
            };
            model.coordinate_screen(&w)
        }
        _ => {
            let axes = space.axes();
            let d = model.dim();
            let m = model.len();
            let mut keys = Vec::with_capacity(2 * d * m);
            let mut buf = vec![0.0; d];
            for i in 0..m {
                let p = model.point(i);
                keys.extend(p.iter().zip(&axes).map(|(c, a)| c * a.weight));
                buf.copy_from_slice(p);
                system.endpoint_in_place(word, &mut buf);
                keys.extend(buf.iter().zip(&axes).map(|(c, a)| c * a.weight));
            }
            let periods: Vec<Option<f64>> = axes
                .iter()
                .map(|a| a.periodic.then_some(a.range() * a.weight))
                .collect();
            Screen {
                dims: 2 * d,
                keys,
                periods: periods.iter().chain(periods.iter()).cloned().collect(),
            }
        }
    }
}

/// Maximum number of key dimensions handed to the kd-tree.
const MAX_SCREEN_DIMS: usize = 12;

/// Neighbourhood enumerator: a kd-tree when keys exist, else a full scan.
pub(crate) struct Neighbours {
    tree: Option<KdTree>,
    radius: f64,
    len: usize,
}

impl Neighbours {
    pub(crate) fn new(p: &dyn Proximity, radius: f64) -> Self {
        let tree = p.screen().map(|s| {
            let s = s.informative(radius, MAX_SCREEN_DIMS);
            KdTree::build(s)
        });
        Neighbours {
            tree,
            radius,
            len: p.len(),
        }
    }

    /// Calls `f` on a superset of `{j : d(i, j) <= radius}`.
    pub(crate) fn for_each<F: FnMut(usize)>(&self, i: usize, mut f: F) {
        match &self.tree {
            Some(t) if t.screen().dims > 0 => t.for_each_near(i, self.radius, f),
            _ => (0..self.len).for_each(&mut f),
        }
    }

    pub(crate) fn is_indexed(&self) -> bool {
        matches!(&self.tree, Some(t) if t.screen().dims > 0)
    }
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    Ok(())
}

/// Greedy maximal `epsilon`-separated subset (pairwise distance `> epsilon`),
/// scanning points in index order.
pub fn maximal_separated(p: &dyn Proximity, epsilon: f64) -> Result<Vec<usize>> {
    check_eps(epsilon)?;
    let m = p.len();
    if m == 0 {
        return Err(Error::EmptyModel);
    }
    let nb = Neighbours::new(p, epsilon);
    let mut selected = vec![false; m];
    let mut out: Vec<usize> = Vec::new();
    for i in 0..m {
        let mut conflict = false;
        if nb.is_indexed() {
            nb.for_each(i, |j| {
                if !conflict && selected[j] && p.within(i, j, epsilon) {
                    conflict = true;
                }
            });
        } else {
            conflict = out.iter().any(|&j| p.within(i, j, epsilon));
        }
        if !conflict {
            selected[i] = true;
            out.push(i);
        }
    }
    Ok(out)
}

/// Compressed family of point sets (sets of indices into `0..points`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SetSystem {
    points: usize,
    offsets: Vec<usize>,
    members: Vec<u32>,
}

impl SetSystem {
    pub fn new(points: usize) -> Self {
        SetSystem {
            points,
            offsets: vec![0],
            members: Vec::new(),
        }
    }

    pub fn from_lists(points: usize, lists: &[Vec<usize>]) -> Result<Self> {
        let mut s = SetSystem::new(points);
        for l in lists {
            s.push_set(l.iter().copied())?;
        }
        Ok(s)
    }

    pub fn push_set<I: IntoIterator<Item = usize>>(&mut self, members: I) -> Result<()> {
        for j in members {
            if j >= self.points {
                return Err(invalid("set", format!("member {j} out of range")));
            }
            self.members.push(j as u32);
        }
        self.offsets.push(self.members.len());
        Ok(())
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn sets(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn set(&self, k: usize) -> &[u32] {
        &self.members[self.offsets[k]..self.offsets[k + 1]]
    }

    /// First point covered by no set, if any.
    pub fn uncovered(&self) -> Option<usize> {
        let mut hit = vec![false; self.points];
        self.members.iter().for_each(|&j| hit[j as usize] = true);
        hit.iter().position(|h| !h)
    }
}

#[derive(PartialEq)]
struct Gain {
    value: f64,
    set: usize,
}

impl Eq for Gain {}

impl Ord for Gain {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.set.cmp(&self.set))
    }
}

impl PartialOrd for Gain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy greedy set cover. Picks the set of largest gain (ties: lowest index)
/// until `stop(uncovered_mass)` holds or no set adds anything.
fn greedy_cover<W: Fn(usize) -> f64>(
    sets: &SetSystem,
    weight: W,
    stop: impl Fn(f64) -> bool,
    initial: f64,
) -> Vec<usize> {
    let mut covered = vec![false; sets.points()];
    let gain = |k: usize, covered: &[bool]| -> f64 {
        sets.set(k)
            .iter()
            .filter(|&&j| !covered[j as usize])
            .map(|&j| weight(j as usize))
            .sum()
    };
    let mut heap: BinaryHeap<Gain> = (0..sets.sets())
        .map(|k| Gain {
            value: gain(k, &covered),
            set: k,
        })
        .filter(|g| g.value > 0.0)
        .collect();
    let mut remaining = initial;
    let mut chosen = Vec::new();
    while !stop(remaining) {
        let Some(top) = heap.pop() else { break };
        let fresh = gain(top.set, &covered);
        if fresh <= 0.0 {
            continue;
        }
        if fresh == top.value {
            for &j in sets.set(top.set) {
                if !covered[j as usize] {
                    covered[j as usize] = true;
                    remaining -= weight(j as usize);
                }
            }
            chosen.push(top.set);
        } else {
            heap.push(Gain {
                value: fresh,
                set: top.set,
            });
        }
    }
    chosen
}

/// Balls `{j : d(i, j) <= eps}` (or `< eps` when `strict`) around every point.
pub fn ball_system(p: &dyn Proximity, epsilon: f64, strict: bool) -> SetSystem {
    let m = p.len();
    let nb = Neighbours::new(p, epsilon);
    let lists: Vec<Vec<u32>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut l = Vec::new();
            nb.for_each(i, |j| {
                let inside = if strict {
                    p.within_strict(i, j, epsilon)
                } else {
                    p.within(i, j, epsilon)
                };
                if inside {
                    l.push(j as u32);
                }
            });
            l.sort_unstable();
            l
        })
        .collect();
    let mut s = SetSystem::new(m);
    for l in lists {
        s.members.extend(l);
        s.offsets.push(s.members.len());
    }
    s
}

/// Comparison used for spanning sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpanRule {
    /// `d <= eps`
    #[default]
    Closed,
    /// `d < eps`
    Open,
}

/// Greedy spanning set: repeatedly takes the `eps`-ball covering the most
/// uncovered points (ties: lowest index) until every point is covered.
pub fn greedy_spanning(p: &dyn Proximity, epsilon: f64, rule: SpanRule) -> Result<Vec<usize>> {
    check_eps(epsilon)?;
    if p.is_empty() {
        return Err(Error::EmptyModel);
    }
    let balls = ball_system(p, epsilon, rule == SpanRule::Open);
    let m = p.len() as f64;
    Ok(greedy_cover(&balls, |_| 1.0, |r| r <= 0.5, m))
}

/// Greedy size of a subcover of `sets` covering every point.
pub fn min_subcover(sets: &SetSystem) -> Result<usize> {
    Ok(min_subcover_sets(sets)?.len())
}

/// Greedy subcover, returning the chosen set indices in pick order.
pub fn min_subcover_sets(sets: &SetSystem) -> Result<Vec<usize>> {
    if let Some(point) = sets.uncovered() {
        return Err(Error::NotACover { point });
    }
    let m = sets.points() as f64;
    Ok(greedy_cover(sets, |_| 1.0, |r| r <= 0.5, m))
}

/// Greedy number of sets covering everything except mass `< delta`.
///
/// The greedy pass ranks sets by covered mass. When the family is a full
/// cover, the cardinality-greedy full subcover is also admissible and the
/// smaller of the two counts is returned.
pub fn min_subcover_mass(sets: &SetSystem, weights: &[f64], delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0,1), got {delta}")));
    }
    if weights.len() != sets.points() {
        return Err(invalid("weights", "one weight per point"));
    }
    let mut reachable = vec![false; sets.points()];
    sets.members
        .iter()
        .for_each(|&j| reachable[j as usize] = true);
    let lost: f64 = weights
        .iter()
        .zip(&reachable)
        .filter(|(_, r)| !**r)
        .map(|(w, _)| w)
        .sum();
    if lost >= delta {
        let point = reachable.iter().position(|r| !r).unwrap_or(0);
        return Err(Error::NotACover { point });
    }
    let total: f64 = weights.iter().sum();
    let by_mass = greedy_cover(sets, |j| weights[j], |r| r < delta, total).len();
    if lost == 0.0 && sets.uncovered().is_none() {
        Ok(by_mass.min(min_subcover(sets)?))
    } else {
        Ok(by_mass)
    }
}

/// What the exact solver optimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Maximum cardinality of a set with pairwise distance `> eps`.
    Separated,
    /// Minimum cardinality of a set whose `eps`-balls cover the model.
    Spanning,
    /// Minimum number of sets of a family covering the model.
    Subcover,
}

/// Default hard cap on exact-search instance size.
pub const ORACLE_CAP: usize = 20;

fn check_cap(m: usize, cap: usize) -> Result<()> {
    if m > cap || m > 63 {
        return Err(Error::OracleCapExceeded { size: m, cap });
    }
    Ok(())
}

/// Exact maximum separated cardinality by branch and bound.
pub fn exact_separated(p: &dyn Proximity, epsilon: f64, cap: usize) -> Result<usize> {
    check_eps(epsilon)?;
    let m = p.len();
    check_cap(m, cap)?;
    if m == 0 {
        return Err(Error::EmptyModel);
    }
    let conflict: Vec<u64> = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| i != j && p.distance(i, j) <= epsilon)
                .fold(0u64, |mask, j| mask | 1 << j)
        })
        .collect();
    let mut best = 0;
    max_independent(&conflict, (1u64 << m) - 1, 0, &mut best);
    Ok(best)
}

fn max_independent(conflict: &[u64], cand: u64, size: usize, best: &mut usize) {
    if cand == 0 {
        *best = (*best).max(size);
        return;
    }
    if size + cand.count_ones() as usize <= *best {
        return;
    }
    let v = cand.trailing_zeros() as usize;
    let rest = cand & !(1u64 << v);
    max_independent(conflict, rest & !conflict[v], size + 1, best);
    max_independent(conflict, rest, size, best);
}

/// Exact minimum spanning cardinality by branch and bound.
pub fn exact_spanning(
    p: &dyn Proximity,
    epsilon: f64,
    rule: SpanRule,
    cap: usize,
) -> Result<usize> {
    check_eps(epsilon)?;
    let m = p.len();
    check_cap(m, cap)?;
    if m == 0 {
        return Err(Error::EmptyModel);
    }
    let sets: Vec<u64> = (0..m)
        .map(|i| {
            (0..m).fold(0u64, |acc, j| {
                let d = p.distance(i, j);
                let inside = match rule {
                    SpanRule::Closed => d <= epsilon,
                    SpanRule::Open => d < epsilon,
                };
                if inside {
                    acc | (1 << j)
                } else {
                    acc
                }
            })
        })
        .collect();
    Ok(exact_cover(&sets, (1u64 << m) - 1).expect("balls contain their centers"))
}

/// Exact minimum subcover by branch and bound.
pub fn exact_subcover(sets: &SetSystem, cap: usize) -> Result<usize> {
    let m = sets.points();
    check_cap(m, cap)?;
    if let Some(point) = sets.uncovered() {
        return Err(Error::NotACover { point });
    }
    let masks: Vec<u64> = (0..sets.sets())
        .map(|k| sets.set(k).iter().fold(0u64, |a, &j| a | (1 << j)))
        .collect();
    Ok(exact_cover(&masks, (1u64 << m) - 1).unwrap_or(0))
}

fn exact_cover(sets: &[u64], universe: u64) -> Option<usize> {
    fn go(sets: &[u64], left: u64, used: usize, best: &mut usize) {
        if left == 0 {
            *best = (*best).min(used);
            return;
        }
        if used + 1 >= *best {
            return;
        }
        let v = left.trailing_zeros();
        for &s in sets {
            if s & (1u64 << v) != 0 {
                go(sets, left & !s, used + 1, best);
            }
        }
    }
    let mut best = usize::MAX;
    go(sets, universe, 0, &mut best);
    (best != usize::MAX).then_some(best)
}

/// Exact optimum for a small instance in the requested mode.
pub fn exact_small_oracle(
    p: &dyn Proximity,
    epsilon: f64,
    mode: OracleMode,
    cover: Option<&SetSystem>,
    cap: usize,
) -> Result<usize> {
    match mode {
        OracleMode::Separated => exact_separated(p, epsilon, cap),
        OracleMode::Spanning => exact_spanning(p, epsilon, SpanRule::Closed, cap),
        OracleMode::Subcover => {
            let sets = cover.ok_or_else(|| invalid("cover", "subcover mode needs a family"))?;
            exact_subcover(sets, cap)
        }
    }
}

/// A finite family of open balls used as a cover.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverSpec {
    pub balls: Vec<(Point, f64)>,
}

impl CoverSpec {
    /// Balls of a common radius centered at a [`SpaceDescriptor::cover_net`].
    pub fn from_net(
        space: &SpaceDescriptor,
        spacing: f64,
        radius: f64,
        cap: usize,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid("radius", "must be positive"));
        }
        Ok(CoverSpec {
            balls: space
                .cover_net(spacing, cap)?
                .into_iter()
                .map(|c| (c, radius))
                .collect(),
        })
    }

    /// One ball containing the whole space.
    pub fn whole(space: &SpaceDescriptor) -> Self {
        let center = Point::new(space.anchor());
        CoverSpec {
            balls: vec![(center, 2.0 * space.diameter() + 1.0)],
        }
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn diam(&self) -> f64 {
        2.0 * self.balls.iter().map(|b| b.1).fold(0.0, f64::max)
    }

    /// Indices of the balls containing `x` (open balls).
    pub fn containing(&self, space: &SpaceDescriptor, x: &[f64]) -> Vec<usize> {
        self.balls
            .iter()
            .enumerate()
            .filter(|(_, (c, r))| space.dist(&c.coords, x) < *r)
            .map(|(k, _)| k)
            .collect()
    }

    /// Membership lists of the model points, validated to cover the model.
    pub fn membership(&self, model: &FinModel) -> Result<SetSystem> {
        let mut lists = vec![Vec::new(); self.len()];
        for i in 0..model.len() {
            let hit = self.containing(model.space(), model.point(i));
            if hit.is_empty() {
                return Err(Error::NotACover { point: i });
            }
            for k in hit {
                lists[k].push(i);
            }
        }
        SetSystem::from_lists(model.len(), &lists)
    }
}

/// A self-contained exact-search instance with a plain-text format:
///
/// ```text
/// mode separated          # separated | spanning | subcover
/// epsilon 0.15            # separated / spanning
/// points 3
/// 0 0.1 0.2               # distance matrix rows (separated / spanning)
/// 0.1 0 0.1
/// 0.2 0.1 0
/// ```
///
/// In subcover mode the matrix is replaced by `sets <k>` and `k` lines of
/// member indices.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleInstance {
    pub mode: OracleMode,
    pub epsilon: f64,
    pub matrix: Option<MatrixProximity>,
    pub sets: Option<SetSystem>,
    pub points: usize,
}

impl OracleInstance {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let mut mode = None;
        let mut epsilon = None;
        let mut points = None;
        let mut matrix = None;
        let mut sets = None;
        while let Some(line) = lines.next() {
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or("");
            let val = it.next().unwrap_or("");
            match key {
                "mode" => {
                    mode = Some(match val {
                        "separated" => OracleMode::Separated,
                        "spanning" => OracleMode::Spanning,
                        "subcover" => OracleMode::Subcover,
                        other => return Err(invalid("mode", format!("unknown mode `{other}`"))),
                    })
                }
                "epsilon" => {
                    epsilon = Some(
                        val.parse::<f64>()
                            .map_err(|_| invalid("epsilon", format!("not a number: `{val}`")))?,
                    )
                }
                "points" => {
                    let m: usize = val
                        .parse()
                        .map_err(|_| invalid("points", format!("not a count: `{val}`")))?;
                    points = Some(m);
                    if mode != Some(OracleMode::Subcover) {
                        let mut rows = Vec::with_capacity(m);
                        for r in 0..m {
                            let row = lines
                                .next()
                                .ok_or_else(|| invalid("matrix", format!("missing row {r}")))?;
                            let vals: std::result::Result<Vec<f64>, _> =
                                row.split_whitespace().map(str::parse::<f64>).collect();
                            rows.push(vals.map_err(|_| invalid("matrix", format!("bad row {r}")))?);
                        }
                        matrix = Some(MatrixProximity::new(rows)?);
                    }
                }
                "sets" => {
                    let m = points.ok_or_else(|| invalid("sets", "`points` must come first"))?;
                    let k: usize = val
                        .parse()
                        .map_err(|_| invalid("sets", format!("not a count: `{val}`")))?;
                    let mut s = SetSystem::new(m);
                    for r in 0..k {
                        let row = lines
                            .next()
                            .ok_or_else(|| invalid("sets", format!("missing set {r}")))?;
                        let vals: std::result::Result<Vec<usize>, _> =
                            row.split_whitespace().map(str::parse::<usize>).collect();
                        s.push_set(vals.map_err(|_| invalid("sets", format!("bad set {r}")))?)?;
                    }
                    sets = Some(s);
                }
                other => return Err(invalid("instance", format!("unknown key `{other}`"))),
            }
        }
        let mode = mode.ok_or_else(|| invalid("mode", "missing"))?;
        let points = points.ok_or_else(|| invalid("points", "missing"))?;
        if mode == OracleMode::Subcover && sets.is_none() {
            return Err(invalid("sets", "subcover mode needs `sets`"));
        }
        if mode != OracleMode::Subcover && epsilon.is_none() {
            return Err(invalid("epsilon", "missing"));
        }
        Ok(OracleInstance {
            mode,
            epsilon: epsilon.unwrap_or(1.0),
            matrix,
            sets,
            points,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mode = match self.mode {
            OracleMode::Separated => "separated",
            OracleMode::Spanning => "spanning",
            OracleMode::Subcover => "subcover",
        };
        let _ = writeln!(s, "mode {mode}");
        if self.mode != OracleMode::Subcover {
            let _ = writeln!(s, "epsilon {}", self.epsilon);
        }
        let _ = writeln!(s, "points {}", self.points);
        if let Some(mat) = &self.matrix {
            for i in 0..mat.len() {
                let row: Vec<String> = (0..mat.len())
                    .map(|j| format!("{}", mat.distance(i, j)))
                    .collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        if let Some(sets) = &self.sets {
            let _ = writeln!(s, "sets {}", sets.sets());
            for k in 0..sets.sets() {
                let row: Vec<String> = sets.set(k).iter().map(|j| j.to_string()).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s
    }

    pub fn solve(&self, cap: usize) -> Result<usize> {
        match self.mode {
            OracleMode::Subcover => exact_subcover(self.sets.as_ref().expect("parsed"), cap),
            mode => {
                let mat = self
                    .matrix
                    .as_ref()
                    .ok_or_else(|| invalid("matrix", "missing distance matrix"))?;
                exact_small_oracle(mat, self.epsilon, mode, None, cap)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice11() -> FinModel {
        let space = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let pts: Vec<Point> = (0..=10).map(|i| Point::scalar(i as f64 / 10.0)).collect();
        FinModel::from_points(&space, &pts).unwrap()
    }

    #[test]
    fn separated_examples() {
        let m = lattice11();
        let p = SpaceProximity { model: &m };
        assert_eq!(maximal_separated(&p, 2.0).unwrap().len(), 1);
        let s = maximal_separated(&p, 0.15).unwrap();
        assert_eq!(s, vec![0, 2, 4, 6, 8, 10]);
        assert_eq!(exact_separated(&p, 0.15, ORACLE_CAP).unwrap(), 6);

        let space = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let twins =
            FinModel::from_points(&space, &[Point::scalar(0.3), Point::scalar(0.3)]).unwrap();
        let q = SpaceProximity { model: &twins };
        assert_eq!(maximal_separated(&q, 1e-9).unwrap(), vec![0]);
        assert!(maximal_separated(&q, 0.0).is_err());
    }

    #[test]
    fn spanning_examples() {
        let m = lattice11();
        let p = SpaceProximity { model: &m };
        let r = greedy_spanning(&p, 0.15, SpanRule::Closed).unwrap();
        assert_eq!(r.len(), 4);
        assert_eq!(
            exact_spanning(&p, 0.15, SpanRule::Closed, ORACLE_CAP).unwrap(),
            4
        );
        // valid for any larger radius
        for eps in [0.15, 0.2, 0.5] {
            for i in 0..m.len() {
                assert!(r.iter().any(|&c| p.distance(i, c) <= eps));
            }
        }
        let space = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let one = FinModel::from_points(&space, &[Point::scalar(0.4)]).unwrap();
        assert_eq!(
            greedy_spanning(&SpaceProximity { model: &one }, 0.1, SpanRule::Closed).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn subcover_examples() {
        let m = lattice11();
        let whole = SetSystem::from_lists(11, &[(0..11).collect(), vec![1, 2]]).unwrap();
        assert_eq!(min_subcover(&whole).unwrap(), 1);

        let disjoint =
            SetSystem::from_lists(11, &[vec![0, 1, 2], vec![], vec![3, 4], (5..11).collect()])
                .unwrap();
        assert_eq!(min_subcover(&disjoint).unwrap(), 3);

        let cover = CoverSpec {
            balls: (0..11).map(|i| (m.to_point(i), 0.15)).collect(),
        };
        let sets = cover.membership(&m).unwrap();
        assert_eq!(min_subcover(&sets).unwrap(), 4);
        assert_eq!(exact_subcover(&sets, ORACLE_CAP).unwrap(), 4);

        let holes = SetSystem::from_lists(3, &[vec![0], vec![2]]).unwrap();
        assert_eq!(min_subcover(&holes), Err(Error::NotACover { point: 1 }));
    }

    #[test]
    fn subcover_mass_examples() {
        let mut lists = vec![(0..9).collect::<Vec<_>>()];
        lists.extend((0..10).map(|i| vec![i]));
        let sets = SetSystem::from_lists(10, &lists).unwrap();
        let w = vec![0.1; 10];
        assert_eq!(min_subcover_mass(&sets, &w, 0.15).unwrap(), 1);
        assert!(min_subcover_mass(&sets, &w, 0.99).unwrap() <= 1);
        assert_eq!(
            min_subcover_mass(&sets, &w, 0.01).unwrap(),
            min_subcover(&sets).unwrap()
        );
        // a non-cover is fine when the lost mass is below delta
        let partial = SetSystem::from_lists(10, &[(0..9).collect()]).unwrap();
        assert_eq!(min_subcover_mass(&partial, &w, 0.15).unwrap(), 1);
        assert!(min_subcover_mass(&partial, &w, 0.05).is_err());
    }

    #[test]
    fn oracle_cap_and_trivial_instances() {
        let space = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let big = FinModel::sampled(&space, 21, 1).unwrap();
        let p = SpaceProximity { model: &big };
        assert!(matches!(
            exact_separated(&p, 0.1, ORACLE_CAP),
            Err(Error::OracleCapExceeded { size: 21, cap: 20 })
        ));
        let one = FinModel::sampled(&space, 1, 1).unwrap();
        let q = SpaceProximity { model: &one };
        let sets = SetSystem::from_lists(1, &[vec![0]]).unwrap();
        for mode in [
            OracleMode::Separated,
            OracleMode::Spanning,
            OracleMode::Subcover,
        ] {
            assert_eq!(
                exact_small_oracle(&q, 0.1, mode, Some(&sets), ORACLE_CAP).unwrap(),
                1
            );
        }
    }

    #[test]
    fn instance_text_round_trip() {
        let m = lattice11();
        let inst = OracleInstance {
            mode: OracleMode::Separated,
            epsilon: 0.15,
            matrix: Some(MatrixProximity::from_proximity(&SpaceProximity {
                model: &m,
            })),
            sets: None,
            points: 11,
        };
        let back = OracleInstance::parse(&inst.to_text()).unwrap();
        assert_eq!(back.solve(ORACLE_CAP).unwrap(), 6);

        let text = "mode subcover\npoints 4\nsets 3\n0 1\n1 2 3\n3\n";
        assert_eq!(
            OracleInstance::parse(text)
                .unwrap()
                .solve(ORACLE_CAP)
                .unwrap(),
            2
        );
        assert!(OracleInstance::parse("mode nope\n").is_err());
    }

    #[test]
    fn kd_screened_greedy_equals_unscreened() {
        let space = SpaceDescriptor::torus(2).unwrap();
        let model = FinModel::sampled(&space, 3000, 5).unwrap();
        let p = SpaceProximity { model: &model };
        let mat = MatrixProximity::from_proximity(&p);
        for eps in [0.02, 0.07, 0.3] {
            assert_eq!(
                maximal_separated(&p, eps).unwrap(),
                maximal_separated(&mat, eps).unwrap()
            );
        }
        let small = FinModel::sampled(&space, 400, 6).unwrap();
        let ps = SpaceProximity { model: &small };
        let ms = MatrixProximity::from_proximity(&ps);
        assert_eq!(
            greedy_spanning(&ps, 0.08, SpanRule::Closed).unwrap(),
            greedy_spanning(&ms, 0.08, SpanRule::Closed).unwrap()
        );
    }
}
