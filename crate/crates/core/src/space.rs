//! Compact metric spaces with computable distances, deterministic samplers
//! and lattice nets.
//!
//! Three families are supported: a closed interval, the flat torus `(R/Z)^d`
//! with the sum-of-circle-distances metric, and a truncated sequence space
//! `base^K` with metric `sum_{i=1..K} rho^i d_base(x_i, y_i)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// A point of a [`SpaceDescriptor`]; the coordinate count is fixed by the space.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn scalar(x: f64) -> Self {
        Point { coords: vec![x] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceDescriptor {
    Interval {
        a: f64,
        b: f64,
    },
    Torus {
        dim: usize,
    },
    SeqSpace {
        base: Box<SpaceDescriptor>,
        truncation: usize,
        rho: f64,
    },
}

/// One scalar coordinate of a space, as seen by the lattice builders and the
/// screening index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
    /// `weight * |x_c - y_c|` (periodic if the axis is) never exceeds `d(x, y)`.
    pub weight: f64,
}

impl Axis {
    pub fn range(&self) -> f64 {
        self.hi - self.lo
    }

    /// Coordinate difference measured along the axis (circle distance if periodic).
    pub fn gap(&self, u: f64, v: f64) -> f64 {
        let d = (u - v).abs();
        if self.periodic {
            let p = self.range();
            let r = d % p;
            r.min(p - r)
        } else {
            d
        }
    }
}

#[inline]
pub(crate) fn circle_gap(u: f64, v: f64) -> f64 {
    let r = (u - v).abs().fract();
    r.min(1.0 - r)
}

#[inline]
pub(crate) fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl SpaceDescriptor {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let s = SpaceDescriptor::Interval { a, b };
        s.validate()?;
        Ok(s)
    }

    pub fn torus(dim: usize) -> Result<Self> {
        let s = SpaceDescriptor::Torus { dim };
        s.validate()?;
        Ok(s)
    }

    pub fn seq(base: SpaceDescriptor, truncation: usize, rho: f64) -> Result<Self> {
        let s = SpaceDescriptor::SeqSpace {
            base: Box::new(base),
            truncation,
            rho,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceDescriptor::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(invalid("interval", format!("need a < b, got [{a}, {b}]")));
                }
            }
            SpaceDescriptor::Torus { dim } => {
                if *dim == 0 {
                    return Err(invalid("torus", "dimension must be >= 1"));
                }
            }
            SpaceDescriptor::SeqSpace {
                base,
                truncation,
                rho,
            } => {
                base.validate()?;
                if *truncation == 0 {
                    return Err(invalid("seq", "truncation K must be >= 1"));
                }
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(invalid("seq", format!("rho must lie in (0,1), got {rho}")));
                }
            }
        }
        Ok(())
    }

    /// Number of scalar coordinates of a point.
    pub fn dim(&self) -> usize {
        match self {
            SpaceDescriptor::Interval { .. } => 1,
            SpaceDescriptor::Torus { dim } => *dim,
            SpaceDescriptor::SeqSpace {
                base, truncation, ..
            } => base.dim() * truncation,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            SpaceDescriptor::Interval { a, b } => b - a,
            SpaceDescriptor::Torus { dim } => *dim as f64 * 0.5,
            SpaceDescriptor::SeqSpace {
                base,
                truncation,
                rho,
            } => base.diameter() * rho * (1.0 - rho.powi(*truncation as i32)) / (1.0 - rho),
        }
    }

    /// Flattened per-coordinate axes, with the metric weight of each coordinate.
    pub fn axes(&self) -> Vec<Axis> {
        match self {
            SpaceDescriptor::Interval { a, b } => vec![Axis {
                lo: *a,
                hi: *b,
                periodic: false,
                weight: 1.0,
            }],
            SpaceDescriptor::Torus { dim } => vec![
                Axis {
                    lo: 0.0,
                    hi: 1.0,
                    periodic: true,
                    weight: 1.0,
                };
                *dim
            ],
            SpaceDescriptor::SeqSpace {
                base,
                truncation,
                rho,
            } => {
                let inner = base.axes();
                let mut out = Vec::with_capacity(inner.len() * truncation);
                let mut w = 1.0;
                for _ in 0..*truncation {
                    w *= rho;
                    out.extend(inner.iter().map(|ax| Axis {
                        weight: ax.weight * w,
                        ..*ax
                    }));
                }
                out
            }
        }
    }

    /// A fixed reference point: the left end of an interval, the origin of a
    /// torus, and the constant sequence at the base anchor.
    pub fn anchor(&self) -> Vec<f64> {
        match self {
            SpaceDescriptor::Interval { a, .. } => vec![*a],
            SpaceDescriptor::Torus { dim } => vec![0.0; *dim],
            SpaceDescriptor::SeqSpace {
                base, truncation, ..
            } => base.anchor().repeat(*truncation),
        }
    }

    /// Distance on raw coordinate slices; callers guarantee conformance.
    #[inline]
    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            SpaceDescriptor::Interval { .. } => (x[0] - y[0]).abs(),
            SpaceDescriptor::Torus { .. } => x.iter().zip(y).map(|(u, v)| circle_gap(*u, *v)).sum(),
            SpaceDescriptor::SeqSpace { base, rho, .. } => {
                let bd = base.dim();
                let mut w = 1.0;
                let mut total = 0.0;
                for (bx, by) in x.chunks_exact(bd).zip(y.chunks_exact(bd)) {
                    w *= rho;
                    total += w * base.dist(bx, by);
                }
                total
            }
        }
    }

    /// Validated distance between two points.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        let mut xr = x.coords.clone();
        let mut yr = y.coords.clone();
        self.reduce(&mut xr);
        self.reduce(&mut yr);
        Ok(self.dist(&xr, &yr))
    }

    pub fn check(&self, x: &Point) -> Result<()> {
        if x.coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.coords.len(),
            });
        }
        if x.coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("point", "non-finite coordinate"));
        }
        Ok(())
    }

    /// Reduces coordinates into the fundamental domain (torus coordinates mod 1).
    pub fn reduce(&self, x: &mut [f64]) {
        match self {
            SpaceDescriptor::Interval { .. } => {}
            SpaceDescriptor::Torus { .. } => x.iter_mut().for_each(|c| *c = wrap_unit(*c)),
            SpaceDescriptor::SeqSpace { base, .. } => {
                let bd = base.dim();
                x.chunks_exact_mut(bd).for_each(|b| base.reduce(b));
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self.axes().iter().zip(x).all(|(ax, &c)| {
                if ax.periodic {
                    (ax.lo..ax.hi).contains(&c)
                } else {
                    c >= ax.lo && c <= ax.hi
                }
            })
    }

    /// Regular lattice whose centers are within `epsilon` of every point.
    ///
    /// Per-axis spacing is `min(eps, 2 eps / (C w_c))` for `C` coordinates of
    /// metric weight `w_c`; an axis collapses to its midpoint when one center
    /// already covers it.
    pub fn cover_net(&self, epsilon: f64, cap: usize) -> Result<Vec<Point>> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(invalid(
                "epsilon",
                format!("must be positive, got {epsilon}"),
            ));
        }
        let axes = self.axes();
        let c = axes.len() as f64;
        let spacings: Vec<f64> = axes
            .iter()
            .map(|ax| epsilon.min(2.0 * epsilon / (c * ax.weight)))
            .collect();
        let levels = lattice_levels(&axes, &spacings);
        let flat = lattice_product(&levels, cap)?;
        let d = axes.len();
        Ok(flat
            .chunks_exact(d)
            .map(|p| Point::new(p.to_vec()))
            .collect())
    }

    /// `m` pseudo-uniform points, byte-identical for equal seeds.
    pub fn sample_points(&self, m: usize, seed: u64) -> Result<Vec<Point>> {
        if m == 0 {
            return Err(invalid("m", "sample size must be >= 1"));
        }
        let axes = self.axes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..m)
            .map(|_| {
                Point::new(
                    axes.iter()
                        .map(|ax| {
                            let u: f64 = rng.random();
                            if ax.periodic {
                                wrap_unit(u) * ax.range() + ax.lo
                            } else {
                                ax.lo + u * ax.range()
                            }
                        })
                        .collect(),
                )
            })
            .collect())
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceDescriptor::Interval { a, b } => write!(f, "Interval({a},{b})"),
            SpaceDescriptor::Torus { dim } => write!(f, "Torus({dim})"),
            SpaceDescriptor::SeqSpace {
                base,
                truncation,
                rho,
            } => write!(f, "SeqSpace({base},K={truncation},rho={rho})"),
        }
    }
}

/// Per-axis lattice levels with spacing at most `spacing[c]`.
pub(crate) fn lattice_levels(axes: &[Axis], spacing: &[f64]) -> Vec<Vec<f64>> {
    axes.iter()
        .zip(spacing)
        .map(|(ax, &s)| {
            let r = ax.range();
            if ax.periodic {
                let q = if s >= r { 1 } else { (r / s).ceil() as usize };
                (0..q).map(|k| ax.lo + r * k as f64 / q as f64).collect()
            } else if s >= r {
                vec![0.5 * (ax.lo + ax.hi)]
            } else {
                let q = (r / s).ceil() as usize + 1;
                (0..q)
                    .map(|k| {
                        if k + 1 == q {
                            ax.hi
                        } else {
                            ax.lo + r * k as f64 / (q - 1) as f64
                        }
                    })
                    .collect()
            }
        })
        .collect()
}

/// Per-axis levels whose neighbours are more than `scale / weight[c]` apart
/// (measured around the circle on periodic axes), with as many levels as
/// that allows.
pub(crate) fn packing_levels(axes: &[Axis], weight: &[f64], scale: f64) -> Vec<Vec<f64>> {
    axes.iter()
        .zip(weight)
        .map(|(ax, &w)| {
            let r = ax.range();
            // shrink slightly so an exact ratio never yields spacing == scale
            let x = w * r / (scale * (1.0 + 1e-9));
            if ax.periodic {
                let q = if x > 1.0 {
                    (x.ceil() as usize - 1).max(1)
                } else {
                    1
                };
                (0..q).map(|k| ax.lo + r * k as f64 / q as f64).collect()
            } else {
                let q = (x.ceil() as usize).max(1);
                if q == 1 {
                    vec![0.5 * (ax.lo + ax.hi)]
                } else {
                    (0..q)
                        .map(|k| {
                            if k + 1 == q {
                                ax.hi
                            } else {
                                ax.lo + r * k as f64 / (q - 1) as f64
                            }
                        })
                        .collect()
                }
            }
        })
        .collect()
}

/// Lexicographic product of per-axis levels, flattened; the last axis varies fastest.
pub(crate) fn lattice_product(levels: &[Vec<f64>], cap: usize) -> Result<Vec<f64>> {
    let mut required: u128 = 1;
    for l in levels {
        required = required.saturating_mul(l.len() as u128);
    }
    if required > cap as u128 {
        return Err(Error::NetTooLarge { required, cap });
    }
    let d = levels.len();
    let total = required as usize;
    let mut out = Vec::with_capacity(total * d);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        out.extend(idx.iter().enumerate().map(|(c, &k)| levels[c][k]));
        for c in (0..d).rev() {
            idx[c] += 1;
            if idx[c] < levels[c].len() {
                break;
            }
            idx[c] = 0;
        }
    }
    Ok(out)
}
