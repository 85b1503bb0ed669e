//! Box dimensions of sets and measures, homogeneity diagnostics for
//! measures (plain and along group balls) and local measure entropies.

use rayon::prelude::*;

use crate::entropy::MeasureSample;
use crate::error::{invalid, Error, Result};
use crate::fit::fit_line;
use crate::packing::{maximal_separated, FinModel, Neighbours, Proximity, SpaceProximity};
use crate::semigroup::SemigroupSystem;
use crate::space::Point;

/// `log N(eps)` against `-log eps`, with the fitted slope.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionCurve {
    /// `(eps, N(eps))` in grid order.
    pub counts: Vec<(f64, usize)>,
    pub slope: f64,
    pub residual: f64,
}

fn check_grid(grid: &[f64], min_len: usize) -> Result<()> {
    if grid.len() < min_len {
        return Err(invalid(
            "epsilon grid",
            format!("need at least {min_len} scales"),
        ));
    }
    if grid.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(invalid("epsilon grid", "scales must lie in (0,1)"));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("epsilon grid", "scales must strictly decrease"));
    }
    Ok(())
}

fn dimension_fit(counts: Vec<(f64, usize)>) -> Result<DimensionCurve> {
    let xy: Vec<(f64, f64)> = counts
        .iter()
        .map(|&(e, n)| (-e.ln(), (n as f64).ln()))
        .collect();
    let fit = fit_line(&xy)?;
    Ok(DimensionCurve {
        counts,
        slope: fit.slope,
        residual: fit.residual,
    })
}

/// Upper box dimension surrogate: slope of the maximal separated count.
/// A model with a declared mesh stands for the set it discretizes and the
/// mesh must be at most a quarter of the finest scale; a model without one
/// is taken to be the (finite) set itself.
pub fn box_dimension_set(model: &FinModel, grid: &[f64]) -> Result<DimensionCurve> {
    check_grid(grid, 3)?;
    let finest = grid[grid.len() - 1];
    let mesh = model.mesh().unwrap_or(0.0);
    if mesh > finest / 4.0 * (1.0 + 1e-12) {
        return Err(Error::MeshTooCoarse {
            mesh,
            epsilon: finest,
            limit: finest / 4.0,
        });
    }
    let prox = SpaceProximity { model };
    let counts = grid
        .iter()
        .map(|&e| Ok((e, maximal_separated(&prox, e)?.len())))
        .collect::<Result<Vec<_>>>()?;
    dimension_fit(counts)
}

/// `nu(B(z_i, r))` for every sample point (closed balls).
fn local_masses(nu: &MeasureSample, r: f64) -> Vec<f64> {
    let prox = SpaceProximity { model: nu.model() };
    let nb = Neighbours::new(&prox, r);
    let w = nu.weights();
    (0..nu.len())
        .into_par_iter()
        .map(|i| {
            let mut mass = 0.0;
            nb.for_each(i, |j| {
                if prox.within(i, j, r) {
                    mass += w[j];
                }
            });
            mass
        })
        .collect()
}

/// Upper box dimension of a measure: at each scale the points of lowest
/// local mass are discarded while the discarded weight stays `<= delta`,
/// then the survivors are counted as a set.
pub fn box_dimension_measure(
    nu: &MeasureSample,
    delta: f64,
    grid: &[f64],
) -> Result<DimensionCurve> {
    check_grid(grid, 3)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0,1), got {delta}")));
    }
    let w = nu.weights();
    let mut counts = Vec::with_capacity(grid.len());
    for &e in grid {
        let mass = local_masses(nu, e);
        let mut order: Vec<usize> = (0..nu.len()).collect();
        order.sort_by(|&a, &b| mass[a].total_cmp(&mass[b]).then(a.cmp(&b)));
        let mut dropped = 0.0;
        let mut gone = vec![false; nu.len()];
        for i in order {
            if dropped + w[i] <= delta {
                dropped += w[i];
                gone[i] = true;
            } else {
                break;
            }
        }
        let keep: Vec<usize> = (0..nu.len()).filter(|&i| !gone[i]).collect();
        if keep.is_empty() {
            return Err(invalid("delta", "every point was discarded"));
        }
        let survivors = nu.model().subset(&keep);
        let n = maximal_separated(&SpaceProximity { model: &survivors }, e)?.len();
        counts.push((e, n));
    }
    dimension_fit(counts)
}

/// Per-scale homogeneity constants.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityRow {
    pub epsilon: f64,
    /// `max nu(B(y1, 2 eps)) / nu(B(y2, eps))` over ordered support pairs.
    pub constant: f64,
    /// `max nu(B(y, 2 eps)) / nu(B(y, eps))`.
    pub doubling: f64,
    /// Pair attaining the constant (indices into the sample).
    pub witness: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityReport {
    pub rows: Vec<HomogeneityRow>,
    pub threshold: f64,
    /// Largest constant over the grid.
    pub sup: f64,
    pub pass: bool,
}

/// `nu` mass of the open ball `B(x, r)`.
pub fn ball_mass(nu: &MeasureSample, x: &[f64], r: f64) -> f64 {
    let m = nu.model();
    let w = nu.weights();
    (0..m.len())
        .filter(|&j| m.space().dist(m.point(j), x) < r)
        .map(|j| w[j])
        .sum()
}

/// Homogeneity diagnostic over a grid, using the listed support points.
pub fn homogeneity_check(
    nu: &MeasureSample,
    grid: &[f64],
    support: &[usize],
    threshold: f64,
) -> Result<HomogeneityReport> {
    check_grid(grid, 1)?;
    if support.is_empty() || support.iter().any(|&i| i >= nu.len()) {
        return Err(invalid("support", "need sample indices of the support"));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &e in grid {
        let masses: Vec<(f64, f64)> = support
            .par_iter()
            .map(|&i| {
                let y = nu.point(i);
                (ball_mass(nu, y, 2.0 * e), ball_mass(nu, y, e))
            })
            .collect();
        let mut constant = 0.0;
        let mut witness = (support[0], support[0]);
        for (a, (big, _)) in support.iter().zip(&masses) {
            for (b, (_, small)) in support.iter().zip(&masses) {
                let ratio = if *small > 0.0 {
                    big / small
                } else {
                    f64::INFINITY
                };
                if ratio > constant {
                    constant = ratio;
                    witness = (*a, *b);
                }
            }
        }
        let doubling = masses
            .iter()
            .map(|(big, small)| {
                if *small > 0.0 {
                    big / small
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        rows.push(HomogeneityRow {
            epsilon: e,
            constant,
            doubling,
            witness,
        });
    }
    let sup = rows.iter().map(|r| r.constant).fold(0.0, f64::max);
    Ok(HomogeneityReport {
        rows,
        threshold,
        sup,
        pass: sup <= threshold,
    })
}

/// `nu(B_n^G(x, r))` with the open group ball.
pub fn group_ball_mass(
    system: &SemigroupSystem,
    nu: &MeasureSample,
    x: &[f64],
    r: f64,
    n: usize,
) -> f64 {
    let w = nu.weights();
    (0..nu.len())
        .into_par_iter()
        .map(|j| {
            if system.group_separates_raw(x, nu.point(j), n, r, true) {
                0.0
            } else {
                w[j]
            }
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Group-ball homogeneity at one scale and radius ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct GHomogeneityRow {
    pub epsilon: f64,
    pub ratio: f64,
    /// `max nu(B_n^G(x, ratio * eps)) / nu(B_n^G(y, eps))` over pairs and `n`.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GHomogeneityReport {
    pub rows: Vec<GHomogeneityRow>,
    pub threshold: f64,
    /// Best `(ratio, constant)` per scale.
    pub best: Vec<(f64, f64, f64)>,
    /// Every scale has some ratio within the threshold.
    pub pass: bool,
    /// One fixed ratio works at every scale.
    pub strong: bool,
    pub strong_ratio: Option<f64>,
    /// The measure is a single atom; the check says nothing.
    pub degenerate: bool,
}

/// Default radius ratios tried for `delta(eps) = ratio * eps`.
pub const G_RATIOS: [f64; 3] = [0.5, 0.25, 0.125];

/// G-homogeneity diagnostic over `n <= n_max`.
#[allow(clippy::too_many_arguments)]
pub fn g_homogeneity_check(
    system: &SemigroupSystem,
    nu: &MeasureSample,
    grid: &[f64],
    n_max: usize,
    ratios: &[f64],
    support: &[usize],
    threshold: f64,
    budget: u128,
) -> Result<GHomogeneityReport> {
    check_grid(grid, 1)?;
    system.check_group_budget(n_max, budget)?;
    if ratios.is_empty() || ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(invalid("ratios", "need ratios in (0,1)"));
    }
    if support.is_empty() || support.iter().any(|&i| i >= nu.len()) {
        return Err(invalid("support", "need sample indices of the support"));
    }
    let mut rows = Vec::new();
    let mut best = Vec::new();
    for &e in grid {
        let mut per_ratio = Vec::new();
        for &rho in ratios {
            let mut constant: f64 = 0.0;
            for n in 0..=n_max {
                let small: Vec<f64> = support
                    .iter()
                    .map(|&i| group_ball_mass(system, nu, nu.point(i), rho * e, n))
                    .collect();
                let big: Vec<f64> = support
                    .iter()
                    .map(|&i| group_ball_mass(system, nu, nu.point(i), e, n))
                    .collect();
                let top = small.iter().cloned().fold(0.0, f64::max);
                let bottom = big.iter().cloned().fold(f64::INFINITY, f64::min);
                let c = if bottom > 0.0 {
                    top / bottom
                } else {
                    f64::INFINITY
                };
                constant = constant.max(c);
            }
            rows.push(GHomogeneityRow {
                epsilon: e,
                ratio: rho,
                constant,
            });
            per_ratio.push((rho, constant));
        }
        let (rho, c) = per_ratio
            .iter()
            .cloned()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)))
            .expect("ratios nonempty");
        best.push((e, rho, c));
    }
    let pass = best.iter().all(|b| b.2 <= threshold);
    let strong_ratio = ratios.iter().cloned().find(|&rho| {
        rows.iter()
            .filter(|r| r.ratio == rho)
            .all(|r| r.constant <= threshold)
    });
    Ok(GHomogeneityReport {
        rows,
        threshold,
        best,
        pass,
        strong: strong_ratio.is_some(),
        strong_ratio,
        degenerate: nu.len() == 1,
    })
}

/// Which one-sided limit a local measure entropy stands in for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMode {
    /// Largest decrement rate over the tail window (limsup).
    Upper,
    /// Smallest decrement rate over the tail window (liminf).
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMeasureEntropy {
    pub value: f64,
    /// `(n, nu(B_n^G(x, eps)))` up to the first zero mass.
    pub masses: Vec<(usize, f64)>,
    /// First `n` with zero mass, if any.
    pub truncated_at: Option<usize>,
    /// Least-squares rate over the tail window.
    pub fitted: f64,
}

/// Rate at which `-log nu(B_n^G(x, eps))` grows with `n`.
#[allow(clippy::too_many_arguments)]
pub fn local_measure_entropy(
    system: &SemigroupSystem,
    nu: &MeasureSample,
    x: &Point,
    epsilon: f64,
    n_range: (usize, usize),
    tail: usize,
    budget: u128,
    mode: LimitMode,
) -> Result<LocalMeasureEntropy> {
    let (n_min, n_max) = n_range;
    if n_min > n_max {
        return Err(invalid("n_range", "n_min must not exceed n_max"));
    }
    system.check_group_budget(n_max, budget)?;
    system.space().check(x)?;
    let mut xc = x.coords.clone();
    system.space().reduce(&mut xc);
    let mut masses = Vec::new();
    let mut truncated_at = None;
    for n in n_min..=n_max {
        let m = group_ball_mass(system, nu, &xc, epsilon, n);
        if m <= 0.0 {
            truncated_at = Some(n);
            break;
        }
        masses.push((n, m));
    }
    let k = tail.min(masses.len());
    if k < 2 {
        return Err(Error::DegenerateFit(format!(
            "{} positive ball masses before truncation",
            masses.len()
        )));
    }
    let window = &masses[masses.len() - k..];
    let xy: Vec<(f64, f64)> = window.iter().map(|&(n, m)| (n as f64, -m.ln())).collect();
    let fitted = fit_line(&xy)?.slope;
    let steps = window.windows(2).map(|p| {
        let (n0, m0) = p[0];
        let (n1, m1) = p[1];
        (m0.ln() - m1.ln()) / (n1 - n0) as f64
    });
    let value = match mode {
        LimitMode::Upper => steps.fold(f64::NEG_INFINITY, f64::max),
        LimitMode::Lower => steps.fold(f64::INFINITY, f64::min),
    };
    Ok(LocalMeasureEntropy {
        value: value.max(0.0),
        masses,
        truncated_at,
        fitted,
    })
}

/// Measure metric mean dimension at `x`: slope of the local measure
/// entropy against `-log eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureMdim {
    pub rates: Vec<(f64, f64)>,
    pub slope: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn measure_mdim(
    system: &SemigroupSystem,
    nu: &MeasureSample,
    x: &Point,
    grid: &[f64],
    n_range: (usize, usize),
    tail: usize,
    budget: u128,
    mode: LimitMode,
) -> Result<MeasureMdim> {
    check_grid(grid, 2)?;
    let rates = grid
        .iter()
        .map(|&e| {
            Ok((
                e,
                local_measure_entropy(system, nu, x, e, n_range, tail, budget, mode)?.value,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let xy: Vec<(f64, f64)> = rates.iter().map(|&(e, h)| (-e.ln(), h)).collect();
    Ok(MeasureMdim {
        slope: fit_line(&xy)?.slope,
        rates,
    })
}
