//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Every reference value below is computed here from closed forms (arc
//! counts, product slopes, interval masses) or by brute force, never by the
//! library routine under test.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semimdim_core::entropy::{walk_entropy_at_scale, MeasureRef, MeasureSample, WalkParams};
use semimdim_core::harness::{
    comparators_csv, curves_csv, mdim_csv, parse_config, run_with_workers, RunReport,
};
use semimdim_core::mdim::{
    mdim_from_curve, verify_thm_a, verify_thm_b, verify_thm_c, verify_thm_f, ComparatorReport,
    MeasureParams, ScaledSystem, Tolerances, Verdict,
};
use semimdim_core::measure::{
    g_homogeneity_check, homogeneity_check, measure_mdim, LimitMode, G_RATIOS,
};
use semimdim_core::packing::{
    exact_separated, exact_spanning, exact_subcover, min_subcover_sets, SpaceProximity,
};
use semimdim_core::{
    greedy_spanning, maximal_separated, CoverSpec, EntropyCurve, FinModel, GeneratorMap, GlwParams,
    MatrixProximity, Point, Proximity, RandomWalk, SemigroupSystem, SetSystem, SpaceDescriptor,
    SpanRule,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lift<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Plain least-squares slope, kept separate from the library fit.
fn ols_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xy.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    num / den
}

fn circle() -> SpaceDescriptor {
    SpaceDescriptor::torus(1).unwrap()
}

fn times(k: u32) -> GeneratorMap {
    GeneratorMap::AffineMod1 {
        slope: k,
        offset: 0.0,
    }
}

fn doubling() -> SemigroupSystem {
    SemigroupSystem::new(circle(), vec![times(2)]).unwrap()
}

fn doubling_tripling() -> SemigroupSystem {
    SemigroupSystem::new(circle(), vec![times(2), times(3)]).unwrap()
}

fn shift_family() -> ScaledSystem {
    ScaledSystem::Truncated {
        base: SpaceDescriptor::interval(0.0, 1.0).unwrap(),
        rho: 0.5,
        extra: 8,
        generators: vec![GeneratorMap::Shift],
    }
}

const DOUBLING_GRID: [f64; 4] = [0.05, 0.02, 0.01, 0.005];
const PAIR_GRID: [f64; 3] = [0.05, 0.02, 0.01];
const SHIFT_GRID: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn doubling_params() -> WalkParams {
    WalkParams::default().with_n(4, 8)
}

fn pair_params() -> WalkParams {
    WalkParams::default().with_n(2, 6)
}

fn shift_params() -> WalkParams {
    WalkParams::default().with_n(1, 5)
}

/// Maximal number of points on a circle of circumference `len` with
/// pairwise gaps strictly larger than `eps`.
fn circle_packing(len: f64, eps: f64) -> f64 {
    (len / eps).ceil() - 1.0
}

/// A random model of 2 to 12 points on the interval, the circle or the
/// 2-torus, cycling through the three spaces.
fn random_instance(rng: &mut ChaCha8Rng, case: usize) -> FinModel {
    let space = match case % 3 {
        0 => SpaceDescriptor::interval(0.0, 1.0).unwrap(),
        1 => SpaceDescriptor::torus(1).unwrap(),
        _ => SpaceDescriptor::torus(2).unwrap(),
    };
    let m = rng.random_range(2..=12);
    let pts: Vec<Point> = (0..m)
        .map(|_| Point::new((0..space.dim()).map(|_| rng.random::<f64>()).collect()))
        .collect();
    FinModel::from_points(&space, &pts).unwrap()
}

/// Distance matrix computed here from coordinates, bypassing the library
/// metric: absolute difference, circle gap, or sum of circle gaps.
fn matrix_of(model: &FinModel) -> MatrixProximity {
    let periodic = !matches!(model.space(), SpaceDescriptor::Interval { .. });
    let gap = |u: f64, v: f64| {
        let d = (u - v).abs();
        if periodic {
            d.min(1.0 - d)
        } else {
            d
        }
    };
    let rows = (0..model.len())
        .map(|i| {
            (0..model.len())
                .map(|j| {
                    model
                        .point(i)
                        .iter()
                        .zip(model.point(j))
                        .map(|(u, v)| gap(*u, *v))
                        .sum()
                })
                .collect()
        })
        .collect();
    MatrixProximity::new(rows).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst_span = 0.0f64;
    let mut worst_sep_1d = f64::INFINITY;
    let mut worst_sep_2d = f64::INFINITY;
    let instances = 90;
    for case in 0..instances {
        let model = random_instance(&mut rng, case);
        let p = SpaceProximity { model: &model };
        let m = p.len();
        let eps = rng.random_range(0.05..0.5);
        let tag = || format!("instance {case} (m = {m}, eps = {eps:.3})");

        let sep = lift(maximal_separated(&p, eps))?;
        for (a, &i) in sep.iter().enumerate() {
            for &j in &sep[a + 1..] {
                ensure(p.distance(i, j) > eps, || {
                    format!("{}: greedy set not separated", tag())
                })?;
            }
        }
        for i in 0..m {
            ensure(
                sep.contains(&i) || sep.iter().any(|&j| p.distance(i, j) <= eps),
                || format!("{}: greedy separated set is not maximal at {i}", tag()),
            )?;
        }
        let span = lift(greedy_spanning(&p, eps, SpanRule::Closed))?;
        for i in 0..m {
            ensure(span.iter().any(|&j| p.distance(i, j) <= eps), || {
                format!("{}: greedy spanning set misses {i}", tag())
            })?;
        }
        // Balls of radius eps around a random third of the points plus
        // singletons, so a cover always exists.
        let mut sets = SetSystem::new(m);
        for c in 0..m {
            if rng.random_bool(0.35) {
                lift(sets.push_set((0..m).filter(|&j| p.distance(c, j) < eps)))?;
            }
            lift(sets.push_set([c]))?;
        }
        let chosen = lift(min_subcover_sets(&sets))?;
        for i in 0..m {
            ensure(
                chosen.iter().any(|&k| sets.set(k).contains(&(i as u32))),
                || format!("{}: greedy subcover misses {i}", tag()),
            )?;
        }

        let opt_sep = lift(exact_separated(&p, eps, 16))?;
        let opt_span = lift(exact_spanning(&p, eps, SpanRule::Closed, 16))?;
        let opt_span_half = lift(exact_spanning(&p, eps / 2.0, SpanRule::Closed, 16))?;
        let opt_cover = lift(exact_subcover(&sets, 16))?;
        ensure(opt_cover <= chosen.len(), || {
            format!("{}: exact subcover above greedy", tag())
        })?;
        ensure(opt_span <= opt_sep && opt_sep <= opt_span_half, || {
            format!(
                "{}: sandwich {opt_span} <= {opt_sep} <= {opt_span_half} broken",
                tag()
            )
        })?;
        let span_ratio = span.len() as f64 / opt_span as f64;
        let sep_ratio = sep.len() as f64 / opt_sep as f64;
        ensure(span_ratio <= 1.5, || {
            format!("{}: greedy spanning ratio {span_ratio}", tag())
        })?;
        worst_span = worst_span.max(span_ratio);
        // In one dimension a point has at most two eps-separated neighbours
        // within eps, so any maximal set keeps at least half the optimum.
        // On the 2-torus several can fit and the bound is only empirical.
        ensure(sep_ratio >= 0.5, || {
            format!("{}: greedy separated ratio {sep_ratio}", tag())
        })?;
        if model.dim() == 1 {
            worst_sep_1d = worst_sep_1d.min(sep_ratio);
        } else {
            worst_sep_2d = worst_sep_2d.min(sep_ratio);
        }

        let mat = matrix_of(&model);
        for i in 0..m {
            for j in 0..m {
                ensure(
                    (mat.distance(i, j) - p.distance(i, j)).abs() < 1e-12,
                    || format!("{}: metric mismatch", tag()),
                )?;
            }
        }

        // Brute force on the smallest instances, independent of the oracle.
        if m <= 8 {
            let best = (0u32..1 << m)
                .filter(|mask| {
                    (0..m).all(|i| {
                        (i + 1..m).all(|j| {
                            mask & (1 << i) == 0 || mask & (1 << j) == 0 || mat.distance(i, j) > eps
                        })
                    })
                })
                .map(|mask| mask.count_ones() as usize)
                .max()
                .unwrap();
            ensure(best == opt_sep, || {
                format!("{}: brute force {best} vs oracle {opt_sep}", tag())
            })?;
        }
    }
    Ok(format!(
        "{instances} instances, worst greedy spanning/optimum {worst_span:.3}, worst greedy separated/optimum {worst_sep_1d:.3} in 1-d, {worst_sep_2d:.3} on the 2-torus"
    ))
}

fn criterion_2() -> Outcome {
    let sys = doubling();
    let params = doubling_params();
    let walk = RandomWalk::symmetric(1);
    let log2 = 2f64.ln();
    let mut curve = EntropyCurve::new("walk", semimdim_core::CurveMode::Walk);
    let mut detail = Vec::new();
    for &eps in &DOUBLING_GRID {
        let entry = lift(walk_entropy_at_scale(&sys, &walk, eps, &params))?;
        for pt in &entry.points {
            let oracle = circle_packing((1u64 << pt.n) as f64, eps).ln();
            ensure((pt.log_count - oracle).abs() < 1e-12, || {
                format!(
                    "eps {eps}, n {}: log count {} vs arc count {oracle}",
                    pt.n, pt.log_count
                )
            })?;
        }
        let h = entry.growth_rate;
        ensure((h - log2).abs() <= 0.1 * log2, || {
            format!("eps {eps}: h = {h} not within 10% of log 2")
        })?;
        detail.push(format!("{h:.4}"));
        lift(curve.push(entry))?;
    }
    let m = lift(mdim_from_curve(&curve))?;
    ensure(m.slope <= 0.1, || format!("mdim slope {}", m.slope))?;
    Ok(format!(
        "h = [{}], mdim slope {:.4}",
        detail.join(", "),
        m.slope
    ))
}

fn criterion_3() -> Outcome {
    let sys = doubling_tripling();
    let params = pair_params();
    let walk = RandomWalk::symmetric(2);
    let eps = 0.01;
    let entry = lift(walk_entropy_at_scale(&sys, &walk, eps, &params))?;
    // Average of the arc count over all 2^n words, each weighted 2^-n.
    let mut oracle = Vec::new();
    for n in params.n_min..=params.n_max {
        let mut avg = 0.0;
        for mask in 0u32..1 << n {
            let stretch: f64 = (0..n)
                .map(|k| if mask & (1 << k) == 0 { 2.0 } else { 3.0 })
                .product();
            avg += circle_packing(stretch, eps) / (1u64 << n) as f64;
        }
        oracle.push((n as f64, avg.ln()));
    }
    for (pt, (_, o)) in entry.points.iter().zip(&oracle) {
        ensure((pt.log_count - o).abs() < 1e-9, || {
            format!("n {}: {} vs averaged arc count {o}", pt.n, pt.log_count)
        })?;
    }
    let tail = &oracle[oracle.len() - params.tail..];
    let oracle_rate = ols_slope(tail);
    let target = 2.5f64.ln();
    let h = entry.growth_rate;
    ensure((h - target).abs() <= 0.1 * target, || {
        format!("rate {h} not within 10% of log(5/2)")
    })?;
    ensure((h - oracle_rate).abs() < 1e-9, || {
        format!("rate {h} vs oracle fit {oracle_rate}")
    })?;
    Ok(format!(
        "rate {h:.4}, averaged arc oracle {oracle_rate:.4}, log(5/2) = {target:.4}"
    ))
}

/// Levels gained per shift step: the coordinate entering the window has
/// weight 1/2, and `k` values in [0,1] with gaps above `2 eps` fit exactly
/// when `(k - 1) 2 eps < 1`.
fn shift_grid_count(eps: f64) -> f64 {
    (1.0 / (2.0 * eps)).ceil()
}

fn criterion_4() -> Outcome {
    let family = shift_family();
    let params = shift_params();
    let walk = RandomWalk::symmetric(1);
    let mut curve = EntropyCurve::new("walk", semimdim_core::CurveMode::Walk);
    let mut oracle = Vec::new();
    let mut detail = Vec::new();
    for &eps in &SHIFT_GRID {
        let sys = lift(family.at(eps))?;
        let entry = lift(walk_entropy_at_scale(&sys, &walk, eps, &params))?;
        let expect = shift_grid_count(eps).ln();
        ensure((entry.growth_rate - expect).abs() < 0.02, || {
            format!(
                "eps {eps}: h = {} vs grid count log {}",
                entry.growth_rate, expect
            )
        })?;
        detail.push(format!("{:.4}", entry.growth_rate));
        oracle.push((-eps.ln(), expect));
        lift(curve.push(entry))?;
    }
    let m = lift(mdim_from_curve(&curve))?;
    let oracle_slope = ols_slope(&oracle);
    ensure((m.slope - 1.0).abs() <= 0.15, || {
        format!("mdim slope {} not within 0.15 of 1", m.slope)
    })?;
    ensure((m.slope - oracle_slope).abs() <= 0.02, || {
        format!("mdim slope {} vs grid oracle {oracle_slope}", m.slope)
    })?;
    Ok(format!(
        "h = [{}], mdim slope {:.4}, grid oracle {oracle_slope:.4}",
        detail.join(", "),
        m.slope
    ))
}

fn criterion_5() -> Outcome {
    let sys = doubling_tripling();
    let cover = lift(CoverSpec::from_net(sys.space(), 0.125, 0.1, 1000))?;
    ensure(cover.len() == 8, || {
        format!("expected 8 balls, got {}", cover.len())
    })?;
    let params = WalkParams::default();
    let n_list = [1, 2, 3, 4];
    let r = lift(verify_thm_c(
        &sys,
        &cover,
        &n_list,
        1 << 12,
        &params.cover_discretization,
        &Tolerances::default(),
    ))?;
    let mut sums = Vec::new();
    for row in r.rows.iter().filter(|row| row.label.starts_with("sum_w")) {
        ensure(row.left == row.right && row.left.fract() == 0.0, || {
            format!("{}: {} vs {}", row.label, row.left, row.right)
        })?;
        sums.push(format!("{}", row.left));
    }
    ensure(sums.len() == n_list.len(), || {
        "missing identity rows".into()
    })?;
    let rate = r
        .rows
        .iter()
        .find(|row| row.label.starts_with("rate"))
        .ok_or("missing rate row")?;
    ensure(rate.gap().abs() <= 0.1, || {
        format!("rate gap {}", rate.gap())
    })?;
    ensure(r.verdict() == Verdict::Pass, || {
        "comparator did not pass".into()
    })?;
    Ok(format!(
        "sums {} equal exactly, rate gap {:.2e}",
        sums.join("/"),
        rate.gap().abs()
    ))
}

fn check_thm_a(name: &str, r: &ComparatorReport) -> Result<String, String> {
    let mut worst = f64::NEG_INFINITY;
    for row in r.rows.iter().filter(|row| row.gating) {
        if row.label.starts_with("sup_x") {
            let bound = row.right + 0.1 * row.right + 0.05;
            ensure(row.left <= bound, || {
                format!("{name}: eps {:?}: {} > {bound}", row.epsilon, row.left)
            })?;
            worst = worst.max(row.left - row.right);
        }
        ensure(row.verdict == Verdict::Pass, || {
            format!("{name}: row `{}` failed", row.label)
        })?;
    }
    let slopes: Vec<f64> = r.estimates.iter().map(|m| m.slope).collect();
    let gap = (slopes[0] - slopes[1]).abs();
    ensure(gap <= 0.15, || format!("{name}: mdim gap {gap}"))?;
    Ok(format!(
        "{name} worst excess {worst:.4}, slope gap {gap:.4}"
    ))
}

fn criterion_6() -> Outcome {
    let tol = Tolerances::default();
    let radii = [0.5, 0.25, 0.1];
    let mut out = Vec::new();

    let sys = doubling();
    let xs = lift(sys.space().sample_points(20, 61))?;
    let r = lift(verify_thm_a(
        &sys.clone().into(),
        &RandomWalk::symmetric(1),
        &DOUBLING_GRID,
        &xs,
        &radii,
        &doubling_params(),
        &tol,
    ))?;
    out.push(check_thm_a("x2", &r)?);

    let sys = doubling_tripling();
    let xs = lift(sys.space().sample_points(20, 62))?;
    let r = lift(verify_thm_a(
        &sys.clone().into(),
        &RandomWalk::symmetric(2),
        &PAIR_GRID,
        &xs,
        &radii,
        &pair_params(),
        &tol,
    ))?;
    out.push(check_thm_a("x2,x3", &r)?);

    let family = shift_family();
    let fine = lift(family.at(*SHIFT_GRID.last().unwrap()))?;
    let xs = lift(fine.space().sample_points(20, 63))?;
    let r = lift(verify_thm_a(
        &family,
        &RandomWalk::symmetric(1),
        &SHIFT_GRID,
        &xs,
        &radii,
        &shift_params(),
        &tol,
    ))?;
    out.push(check_thm_a("shift", &r)?);
    Ok(out.join("; "))
}

fn check_thm_b(name: &str, r: &ComparatorReport, slope_tol: f64) -> Result<(f64, f64), String> {
    for row in &r.rows {
        if row.label.starts_with("count:") {
            ensure(row.left <= 1e-9, || {
                format!(
                    "{name}: {} at eps {:?}: excess {}",
                    row.label, row.epsilon, row.left
                )
            })?;
        }
        if row.label.starts_with("mdim slope: katok <= walk") {
            ensure(row.left <= row.right + slope_tol, || {
                format!("{name}: {}: {} > {}", row.label, row.left, row.right)
            })?;
        }
    }
    let walk = r.estimates[0].slope;
    let katok = r.estimates[1..]
        .iter()
        .map(|m| m.slope)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((katok, walk))
}

fn criterion_7() -> Outcome {
    let tol = Tolerances {
        slope: 0.05,
        equality: 0.2,
        ..Tolerances::default()
    };
    let sys = doubling();
    let atom = lift(MeasureSample::point_mass(sys.space(), Point::scalar(0.3)))?;
    let sample = lift(MeasureSample::sampled(sys.space(), 300, 71))?;
    let orbit = lift(MeasureSample::orbit_empirical(
        &sys,
        &RandomWalk::symmetric(1),
        &Point::scalar(0.123),
        400,
        72,
    ))?;
    let candidates = vec![
        ("uniform".to_string(), MeasureRef::Lattice),
        ("atom".to_string(), MeasureRef::Sample(&atom)),
        ("sample".to_string(), MeasureRef::Sample(&sample)),
        ("orbit".to_string(), MeasureRef::Sample(&orbit)),
    ];
    let r = lift(verify_thm_b(
        &sys.clone().into(),
        &RandomWalk::symmetric(1),
        &candidates,
        &DOUBLING_GRID[..3],
        &[0.2, 0.1],
        &doubling_params(),
        &tol,
    ))?;
    let (k2, w2) = check_thm_b("x2", &r, tol.slope)?;

    let r = lift(verify_thm_b(
        &shift_family(),
        &RandomWalk::symmetric(1),
        &[("uniform".to_string(), MeasureRef::Lattice)],
        &SHIFT_GRID,
        &[0.2, 0.1],
        &shift_params(),
        &tol,
    ))?;
    let (ks, ws) = check_thm_b("shift", &r, tol.slope)?;
    ensure((ks - ws).abs() <= 0.2, || {
        format!("shift: katok slope {ks} vs walk slope {ws}")
    })?;
    Ok(format!(
        "x2 katok {k2:.4} <= walk {w2:.4}; shift katok {ks:.4} ~ walk {ws:.4}"
    ))
}

/// Mass of the ball of radius `r` around `y` under the density `2x` on [0,1].
fn ramp_mass(y: f64, r: f64) -> f64 {
    let hi = (y + r).min(1.0);
    let lo = (y - r).max(0.0);
    hi * hi - lo * lo
}

fn criterion_8() -> Outcome {
    let grid = [0.1, 0.05, 0.01];
    let uniform = lift(MeasureSample::uniform_grid(&circle(), 0.0005, 10_000))?;
    let support: Vec<usize> = (0..uniform.len()).step_by(97).collect();
    let u = lift(homogeneity_check(&uniform, &grid, &support, 2.5))?;
    ensure(u.pass && u.sup <= 2.5, || {
        format!("uniform: sup L {}", u.sup)
    })?;
    for row in &u.rows {
        // Arc masses give exactly 2; the lattice adds up to two points.
        ensure((row.constant - 2.0).abs() < 0.1, || {
            format!(
                "uniform: L({}) = {} vs arc ratio 2",
                row.epsilon, row.constant
            )
        })?;
    }

    let interval = SpaceDescriptor::interval(0.0, 1.0).unwrap();
    let m = 20_000;
    let ramp = lift(MeasureSample::density_1d(&interval, m, |x| 2.0 * x))?;
    let support = vec![0, m / 4, m / 2, m - 1];
    let r = lift(homogeneity_check(&ramp, &grid, &support, 2.5))?;
    ensure(!r.pass, || "ramp density passed".into())?;
    let at_finest = r.rows.last().unwrap().constant;
    ensure(at_finest >= 10.0, || format!("ramp: L(0.01) = {at_finest}"))?;
    // Closed-form masses at the sampled support points.
    let ys: Vec<f64> = support.iter().map(|&i| ramp.point(i)[0]).collect();
    let oracle = ys
        .iter()
        .flat_map(|&a| {
            ys.iter()
                .map(move |&b| ramp_mass(a, 0.02) / ramp_mass(b, 0.01))
        })
        .fold(0.0, f64::max);
    ensure((at_finest / oracle - 1.0).abs() < 0.1, || {
        format!("ramp: L(0.01) = {at_finest} vs closed form {oracle}")
    })?;

    // Two equal atoms form a homogeneous measure.
    let atoms = lift(MeasureSample::atoms(
        &circle(),
        &[Point::scalar(0.1), Point::scalar(0.6)],
        vec![0.5, 0.5],
    ))?;
    let a = lift(homogeneity_check(&atoms, &grid, &[0, 1], 2.5))?;
    ensure(a.pass, || format!("two atoms failed with L {}", a.sup))?;
    Ok(format!("uniform sup L {:.3}; ramp L(0.01) {at_finest:.1} (closed form {oracle:.1}); two atoms pass", u.sup))
}

fn rotation_system() -> SemigroupSystem {
    let a = 2f64.sqrt() - 1.0;
    let b = 3f64.sqrt() - 1.0;
    SemigroupSystem::new(
        circle(),
        vec![
            GeneratorMap::Rotation { angles: vec![a] },
            GeneratorMap::Rotation { angles: vec![b] },
            GeneratorMap::Rotation {
                angles: vec![1.0 - a],
            },
            GeneratorMap::Rotation {
                angles: vec![1.0 - b],
            },
        ],
    )
    .unwrap()
}

fn criterion_9() -> Outcome {
    let sys = rotation_system();
    let grid = [0.1, 0.05, 0.02];
    let nu = lift(MeasureSample::uniform_grid(&circle(), 0.0005, 10_000))?;
    let support: Vec<usize> = (0..nu.len()).step_by(211).collect();
    let hom = lift(g_homogeneity_check(
        &sys,
        &nu,
        &grid,
        2,
        &G_RATIOS,
        &support,
        1.5,
        1 << 12,
    ))?;
    ensure(hom.strong && hom.strong_ratio == Some(0.5), || {
        format!("not strongly homogeneous: {:?}", hom.best)
    })?;
    // Rotations preserve arcs, so the ratio of masses is exactly rho.
    for row in hom.rows.iter().filter(|row| row.ratio == 0.5) {
        ensure(
            row.constant <= 1.5 && (row.constant - 0.5).abs() < 0.01,
            || format!("eps {}: c = {} vs arc ratio 0.5", row.epsilon, row.constant),
        )?;
    }

    let xs = lift(sys.space().sample_points(5, 91))?;
    let mp = MeasureParams {
        n_min: 1,
        n_max: 3,
        tail: 3,
        group_budget: 1 << 12,
    };
    let glw = GlwParams {
        n_max: 2,
        ..GlwParams::default()
    };
    let r = lift(verify_thm_f(
        &sys,
        &nu,
        &grid,
        &xs,
        &hom,
        0.0,
        &mp,
        &glw,
        &Tolerances::default(),
    ))?;
    let glw_slope = r
        .estimates
        .iter()
        .find(|m| m.estimator == "glw")
        .ok_or("no glw estimate")?
        .slope;
    ensure(glw_slope <= 0.05, || format!("glw mdim {glw_slope}"))?;
    let mut slopes = Vec::new();
    for x in &xs {
        let m = lift(measure_mdim(
            &sys,
            &nu,
            x,
            &grid,
            (1, 3),
            3,
            1 << 12,
            LimitMode::Upper,
        ))?;
        ensure(m.slope <= 0.05, || {
            format!("measure mdim {} at {:?}", m.slope, x.coords)
        })?;
        slopes.push(m.slope);
    }
    let spread = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(spread <= 0.1, || format!("slopes over x spread {spread}"))?;
    ensure(r.verdict() == Verdict::Pass, || {
        let bad: Vec<_> = r
            .rows
            .iter()
            .filter(|x| x.verdict == Verdict::Fail)
            .map(|x| x.label.clone())
            .collect();
        format!("comparator failed: {bad:?}")
    })?;
    Ok(format!("strong with rho 1/2, glw mdim {glw_slope:.3}, measure mdim spread {spread:.3} over 5 points"))
}

fn csvs(r: &RunReport) -> [String; 3] {
    [curves_csv(r), mdim_csv(r), comparators_csv(r)]
}

fn criterion_10() -> Outcome {
    let configs = [
        (
            "doubling_tripling",
            include_str!("../../../configs/doubling_tripling.cfg"),
        ),
        ("rotations", include_str!("../../../configs/rotations.cfg")),
        ("shift", include_str!("../../../configs/shift.cfg")),
    ];
    let mut lines = 0;
    for (name, text) in configs {
        let cfg = parse_config(text).map_err(|e| format!("{name}: {e}"))?;
        let one = lift(run_with_workers(&cfg, 1))?;
        let many = lift(run_with_workers(&cfg, 4))?;
        ensure(one.failures.is_empty(), || {
            format!("{name}: {:?}", one.failures)
        })?;
        ensure(one.success(), || {
            format!("{name}: a gating comparator failed")
        })?;
        let (a, b) = (csvs(&one), csvs(&many));
        for (x, y) in a.iter().zip(&b) {
            ensure(x == y, || {
                format!("{name}: output differs between 1 and 4 workers")
            })?;
            lines += x.lines().count();
        }
        let mut no_cache = cfg.clone();
        no_cache.cache = false;
        let plain = lift(run_with_workers(&no_cache, 2))?;
        ensure(csvs(&plain) == a, || {
            format!("{name}: output differs without the count cache")
        })?;
    }
    Ok(format!(
        "3 configs, {lines} CSV lines identical across 1/4 workers and with the cache off"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("kernel exactness", criterion_1),
        ("single expanding map", criterion_2),
        ("walk average for x2,x3", criterion_3),
        ("positive mean dimension", criterion_4),
        ("cover identity", criterion_5),
        ("local entropy bound", criterion_6),
        ("Katok entropy bound", criterion_7),
        ("homogeneity diagnostics", criterion_8),
        ("isometries", criterion_9),
        ("determinism", criterion_10),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let k = i + 1;
        if !only.is_empty() && !only.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {k:>2} {name}: PASS ({detail}) [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {k:>2} {name}: FAIL ({why}) [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
