//! Metric mean dimension estimates and finite-level comparators between
//! the entropies of the suite.

use crate::entropy::{
    fit_growth, glw_entropy_at_scale, katok_entropy, local_entropy_at_points, shapira_entropy,
    skew_cover_count, walk_entropy_at_scale, CurveEntry, CurveMode, CurvePoint, Discretization,
    EntropyCurve, GlwParams, MeasureRef, MeasureSample, WalkParams,
};
use crate::error::{invalid, Result};
use crate::fit::fit_line;
use crate::measure::{measure_mdim, GHomogeneityReport, LimitMode};
use crate::packing::CoverSpec;
use crate::semigroup::{GeneratorMap, RandomWalk, SemigroupSystem};
use crate::space::{Point, SpaceDescriptor};

/// A system, possibly rebuilt per scale.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaledSystem {
    Fixed(SemigroupSystem),
    /// Sequence space over `base` whose truncation grows as the scale
    /// shrinks: `K = extra + ceil(log(1/eps) / log(1/rho))`.
    Truncated {
        base: SpaceDescriptor,
        rho: f64,
        extra: usize,
        generators: Vec<GeneratorMap>,
    },
}

impl ScaledSystem {
    pub fn truncation(&self, epsilon: f64) -> Option<usize> {
        match self {
            ScaledSystem::Fixed(_) => None,
            ScaledSystem::Truncated { rho, extra, .. } => Some(
                extra
                    + ((1.0 / epsilon).ln() / (1.0 / rho).ln() - 1e-9)
                        .ceil()
                        .max(0.0) as usize,
            ),
        }
    }

    pub fn at(&self, epsilon: f64) -> Result<SemigroupSystem> {
        match self {
            ScaledSystem::Fixed(s) => Ok(s.clone()),
            ScaledSystem::Truncated {
                base,
                rho,
                generators,
                ..
            } => {
                let k = self.truncation(epsilon).expect("truncated");
                SemigroupSystem::new(
                    SpaceDescriptor::seq(base.clone(), k, *rho)?,
                    generators.clone(),
                )
            }
        }
    }
}

/// Fits a point to the dimension of `system`: extra coordinates are dropped
/// and missing ones are taken from the space's anchor.
pub fn fit_point(system: &SemigroupSystem, x: &Point) -> Point {
    let anchor = system.space().anchor();
    let coords = (0..anchor.len())
        .map(|i| x.coords.get(i).copied().unwrap_or(anchor[i]))
        .collect();
    Point::new(coords)
}

impl From<SemigroupSystem> for ScaledSystem {
    fn from(s: SemigroupSystem) -> Self {
        ScaledSystem::Fixed(s)
    }
}

/// Growth of `h(eps)` against `-log eps` over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MdimEstimate {
    pub estimator: String,
    /// Deduplicated grid, largest scale first.
    pub grid: Vec<f64>,
    pub rates: Vec<f64>,
    /// Least-squares slope, clamped at 0.
    pub slope: f64,
    pub raw_slope: f64,
    pub residual: f64,
    /// `max h(eps) / (-log eps)` over the three smallest scales.
    pub upper: f64,
    /// `min h(eps) / (-log eps)` over the three smallest scales.
    pub lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdimMethod {
    Regression,
    RatioSup,
}

impl MdimEstimate {
    pub fn value(&self, method: MdimMethod) -> f64 {
        match method {
            MdimMethod::Regression => self.slope,
            MdimMethod::RatioSup => self.upper,
        }
    }
}

pub fn mdim_from_curve(curve: &EntropyCurve) -> Result<MdimEstimate> {
    mdim_from_rates(&curve.estimator, &curve.rates())
}

/// Builds an estimate from `(eps, h(eps))` pairs in any order. Repeated
/// scales keep their first value.
pub fn mdim_from_rates(estimator: &str, rates: &[(f64, f64)]) -> Result<MdimEstimate> {
    if rates.iter().any(|&(e, _)| !(e > 0.0 && e < 1.0)) {
        return Err(invalid(
            "epsilon grid",
            "scales must lie in (0,1) so that -log eps > 0",
        ));
    }
    if rates.iter().any(|&(_, h)| !h.is_finite()) {
        return Err(invalid("rates", "growth rates must be finite"));
    }
    let mut pts = rates.to_vec();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    pts.dedup_by(|b, a| a.0 == b.0);
    if pts.len() < 3 {
        return Err(invalid("epsilon grid", "need at least 3 distinct scales"));
    }
    let xy: Vec<(f64, f64)> = pts.iter().map(|&(e, h)| (-e.ln(), h)).collect();
    let fit = fit_line(&xy)?;
    let ratios: Vec<f64> = pts[pts.len() - 3..]
        .iter()
        .map(|&(e, h)| h / -e.ln())
        .collect();
    Ok(MdimEstimate {
        estimator: estimator.to_string(),
        grid: pts.iter().map(|p| p.0).collect(),
        rates: pts.iter().map(|p| p.1).collect(),
        slope: fit.slope.max(0.0),
        raw_slope: fit.slope,
        residual: fit.residual,
        upper: ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        lower: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NoVerdict,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NoVerdict => "NO-VERDICT",
        }
    }
}

/// How a comparator row is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    /// `left <= right + tolerance`.
    AtMost,
    /// `left == right`.
    Exact,
    /// A precondition was not established; nothing is asserted.
    Skipped,
}

impl Check {
    pub fn label(&self) -> &'static str {
        match self {
            Check::AtMost => "<=",
            Check::Exact => "==",
            Check::Skipped => "skipped",
        }
    }
}

pub fn judge(check: Check, left: f64, right: f64, tolerance: f64) -> Verdict {
    match check {
        Check::Skipped => Verdict::NoVerdict,
        _ if !(left.is_finite() && right.is_finite()) => Verdict::NoVerdict,
        Check::AtMost if left <= right + tolerance => Verdict::Pass,
        Check::Exact if left == right => Verdict::Pass,
        _ => Verdict::Fail,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorRow {
    pub label: String,
    pub epsilon: Option<f64>,
    pub left: f64,
    pub right: f64,
    pub tolerance: f64,
    pub check: Check,
    /// Non-gating rows are reported but do not affect the verdict.
    pub gating: bool,
    pub verdict: Verdict,
}

impl ComparatorRow {
    pub fn new(
        label: impl Into<String>,
        epsilon: Option<f64>,
        left: f64,
        right: f64,
        tolerance: f64,
        check: Check,
        gating: bool,
    ) -> Self {
        ComparatorRow {
            label: label.into(),
            epsilon,
            left,
            right,
            tolerance,
            check,
            gating,
            verdict: judge(check, left, right, tolerance),
        }
    }

    pub fn gap(&self) -> f64 {
        self.left - self.right
    }

    /// Verdict recomputed from the stored values.
    pub fn recompute(&self) -> Verdict {
        judge(self.check, self.left, self.right, self.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorReport {
    pub theorem: String,
    pub rows: Vec<ComparatorRow>,
    pub notes: Vec<String>,
    /// Curves computed along the way.
    pub curves: Vec<EntropyCurve>,
    pub estimates: Vec<MdimEstimate>,
}

impl ComparatorReport {
    fn new(theorem: &str) -> Self {
        ComparatorReport {
            theorem: theorem.to_string(),
            rows: Vec::new(),
            notes: Vec::new(),
            curves: Vec::new(),
            estimates: Vec::new(),
        }
    }

    /// Fail if a gating row fails; pass if at least one gating row passed and
    /// none failed; otherwise no verdict.
    pub fn verdict(&self) -> Verdict {
        let gating: Vec<Verdict> = self
            .rows
            .iter()
            .filter(|r| r.gating)
            .map(|r| r.verdict)
            .collect();
        if gating.contains(&Verdict::Fail) {
            Verdict::Fail
        } else if gating.contains(&Verdict::Pass) {
            Verdict::Pass
        } else {
            Verdict::NoVerdict
        }
    }

    fn push(&mut self, row: ComparatorRow) {
        self.rows.push(row);
    }

    /// Two one-sided rows `left <= right + tol` and `right <= left + tol`.
    fn push_equal(
        &mut self,
        label: &str,
        epsilon: Option<f64>,
        left: f64,
        right: f64,
        tol: f64,
        gating: bool,
    ) {
        self.push(ComparatorRow::new(
            format!("{label} (<=)"),
            epsilon,
            left,
            right,
            tol,
            Check::AtMost,
            gating,
        ));
        self.push(ComparatorRow::new(
            format!("{label} (>=)"),
            epsilon,
            right,
            left,
            tol,
            Check::AtMost,
            gating,
        ));
    }

    fn skip(&mut self, label: &str, note: &str) {
        self.push(ComparatorRow::new(
            label,
            None,
            f64::NAN,
            f64::NAN,
            0.0,
            Check::Skipped,
            true,
        ));
        self.notes.push(note.to_string());
    }
}

/// Slack used by the comparators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Per-scale slack `relative * |right| + absolute`.
    pub relative: f64,
    pub absolute: f64,
    /// One-sided slope slack.
    pub slope: f64,
    /// Two-sided slope slack for equality verdicts.
    pub equality: f64,
    /// Slack of count-level dominations (log scale; rounding only).
    pub count: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            relative: 0.1,
            absolute: 0.05,
            slope: 0.15,
            equality: 0.15,
            count: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn per_scale(&self, right: f64) -> f64 {
        self.relative * right.abs() + self.absolute
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(invalid("epsilon grid", "need at least 3 scales"));
    }
    if grid.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid(
            "epsilon grid",
            "scales must strictly decrease inside (0,1)",
        ));
    }
    Ok(())
}

/// Largest `log left_n - log right_n` over the shared lengths.
fn log_excess(left: &CurveEntry, right: &CurveEntry) -> f64 {
    left.points
        .iter()
        .filter_map(|p| right.log_count(p.n).map(|r| p.log_count - r))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn curve_of(name: String, mode: CurveMode, entries: Vec<CurveEntry>) -> Result<EntropyCurve> {
    let mut c = EntropyCurve::new(name, mode);
    for e in entries {
        c.push(e)?;
    }
    Ok(c)
}

/// Local entropy against the action entropy.
pub fn verify_thm_a(
    family: &ScaledSystem,
    walk: &RandomWalk,
    grid: &[f64],
    xs: &[Point],
    radii: &[f64],
    params: &WalkParams,
    tol: &Tolerances,
) -> Result<ComparatorReport> {
    check_grid(grid)?;
    let mut report = ComparatorReport::new("A");
    let mut sup_entries = Vec::new();
    let mut whole_entries = Vec::new();
    for &e in grid {
        let system = &family.at(e)?;
        let pts: Vec<Point> = xs.iter().map(|x| fit_point(system, x)).collect();
        let locals = local_entropy_at_points(system, walk, &pts, e, radii, params)?;
        let whole = locals[0].whole.clone();
        let excess = locals
            .iter()
            .flat_map(|l| l.per_radius.iter().map(|(_, c)| log_excess(c, &whole)))
            .fold(f64::NEG_INFINITY, f64::max);
        report.push(ComparatorRow::new(
            "count: local <= whole",
            Some(e),
            excess,
            0.0,
            tol.count,
            Check::AtMost,
            true,
        ));
        let best = locals
            .iter()
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .expect("points nonempty");
        let left = best.value;
        let right = whole.growth_rate;
        report.push(ComparatorRow::new(
            "sup_x h_d <= h",
            Some(e),
            left,
            right,
            tol.per_scale(right),
            Check::AtMost,
            true,
        ));
        report.push(ComparatorRow::new(
            "h <= sup_x h_d",
            Some(e),
            right,
            left,
            tol.per_scale(right),
            Check::AtMost,
            false,
        ));
        let entry = best
            .per_radius
            .iter()
            .find(|(_, c)| c.growth_rate == best.value)
            .map(|(_, c)| c.clone())
            .expect("value attained");
        sup_entries.push(entry);
        whole_entries.push(whole);
    }
    let local = curve_of("local_sup".into(), CurveMode::Walk, sup_entries)?;
    let whole = curve_of("walk".into(), CurveMode::Walk, whole_entries)?;
    let ml = mdim_from_curve(&local)?;
    let mw = mdim_from_curve(&whole)?;
    report.push_equal(
        "mdim slope: local vs walk",
        None,
        ml.slope,
        mw.slope,
        tol.equality,
        true,
    );
    report.curves = vec![whole, local];
    report.estimates = vec![mw, ml];
    Ok(report)
}

/// Katok entropy of each candidate measure against the action entropy.
pub fn verify_thm_b(
    family: &ScaledSystem,
    walk: &RandomWalk,
    candidates: &[(String, MeasureRef<'_>)],
    grid: &[f64],
    deltas: &[f64],
    params: &WalkParams,
    tol: &Tolerances,
) -> Result<ComparatorReport> {
    check_grid(grid)?;
    if candidates.is_empty() || deltas.is_empty() {
        return Err(invalid(
            "candidates",
            "need at least one measure and one delta",
        ));
    }
    let mut report = ComparatorReport::new("B");
    let mut action = Vec::new();
    let mut katok: Vec<Vec<CurveEntry>> = vec![Vec::new(); candidates.len() * deltas.len()];
    for &e in grid {
        let system = &family.at(e)?;
        let mut action_entry = None;
        for (ci, (label, nu)) in candidates.iter().enumerate() {
            for (di, &d) in deltas.iter().enumerate() {
                let k = katok_entropy(system, walk, *nu, e, d, params)?;
                let tag = format!("{label}, delta {d}");
                report.push(ComparatorRow::new(
                    format!("count: s_nu <= s [{tag}]"),
                    Some(e),
                    log_excess(&k.curve, &k.action),
                    0.0,
                    tol.count,
                    Check::AtMost,
                    true,
                ));
                let right = k.action.growth_rate;
                report.push(ComparatorRow::new(
                    format!("h_K <= h [{tag}]"),
                    Some(e),
                    k.curve.growth_rate,
                    right,
                    tol.per_scale(right),
                    Check::AtMost,
                    true,
                ));
                katok[ci * deltas.len() + di].push(k.curve);
                action_entry.get_or_insert(k.action);
            }
        }
        action.push(action_entry.expect("candidates nonempty"));
    }
    let action = curve_of("walk".into(), CurveMode::Walk, action)?;
    let ma = mdim_from_curve(&action)?;
    let mut best_at_smallest = f64::NEG_INFINITY;
    for (ci, (label, _)) in candidates.iter().enumerate() {
        for (di, &d) in deltas.iter().enumerate() {
            let entries = std::mem::take(&mut katok[ci * deltas.len() + di]);
            let c = curve_of(format!("katok[{label};{d}]"), CurveMode::Walk, entries)?;
            let m = mdim_from_curve(&c)?;
            report.push(ComparatorRow::new(
                format!("mdim slope: katok <= walk [{label}, delta {d}]"),
                None,
                m.slope,
                ma.slope,
                tol.slope,
                Check::AtMost,
                true,
            ));
            if di == deltas.len() - 1 {
                best_at_smallest = best_at_smallest.max(m.slope);
            }
            report.curves.push(c);
            report.estimates.push(m);
        }
    }
    report.push_equal(
        "mdim slope: max katok vs walk",
        None,
        best_at_smallest,
        ma.slope,
        tol.equality,
        true,
    );
    report.curves.insert(0, action);
    report.estimates.insert(0, ma);
    Ok(report)
}

/// Sum of per-word cover counts against the skew-product count.
pub fn verify_thm_c(
    system: &SemigroupSystem,
    cover: &CoverSpec,
    n_list: &[usize],
    word_budget: u64,
    discretization: &Discretization,
    tol: &Tolerances,
) -> Result<ComparatorReport> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("n_list", "need at least two increasing lengths"));
    }
    let mut report = ComparatorReport::new("C");
    let log_p = (system.p() as f64).ln();
    let mut avg = Vec::new();
    let mut skew = Vec::new();
    for &n in n_list {
        let s = skew_cover_count(system, cover, n, word_budget, discretization)?;
        report.push(ComparatorRow::new(
            format!("sum_w N(U,w,{n}) == N(U~,T_G,{n})"),
            None,
            s.total as f64,
            s.skew as f64,
            0.0,
            Check::Exact,
            true,
        ));
        avg.push(CurvePoint {
            n,
            log_count: (s.total as f64).ln() - n as f64 * log_p,
            stderr: 0.0,
        });
        skew.push(CurvePoint {
            n,
            log_count: (s.skew as f64).ln(),
            stderr: 0.0,
        });
    }
    let diam = cover.diam();
    let a = fit_growth(diam, avg, n_list.len())?;
    let b = fit_growth(diam, skew, n_list.len())?;
    let left = a.raw_slope;
    let right = b.raw_slope - log_p;
    report.push_equal(
        "rate: average vs skew - log p",
        None,
        left,
        right,
        tol.per_scale(right),
        true,
    );
    report.curves = vec![
        curve_of("cover_average".into(), CurveMode::Walk, vec![a])?,
        curve_of("cover_skew".into(), CurveMode::Walk, vec![b])?,
    ];
    Ok(report)
}

/// Ball covers of diameter `eps` whose Lebesgue number is at least `eps / 8`.
pub fn scale_cover(space: &SpaceDescriptor, epsilon: f64, cap: usize) -> Result<CoverSpec> {
    CoverSpec::from_net(space, 3.0 * epsilon / 8.0, epsilon / 2.0, cap)
}

/// Shapira entropy of each candidate against the action entropy at `eps / 8`.
#[allow(clippy::too_many_arguments)]
pub fn verify_thm_d(
    family: &ScaledSystem,
    walk: &RandomWalk,
    candidates: &[(String, MeasureRef<'_>)],
    grid: &[f64],
    deltas: &[f64],
    params: &WalkParams,
    cover_cap: usize,
    tol: &Tolerances,
) -> Result<ComparatorReport> {
    check_grid(grid)?;
    if candidates.is_empty() {
        return Err(invalid("candidates", "need at least one measure"));
    }
    let mut report = ComparatorReport::new("D");
    let mut left_entries = Vec::new();
    let mut right_entries = Vec::new();
    for &e in grid {
        let system = &family.at(e)?;
        let cover = scale_cover(system.space(), e, cover_cap)?;
        let mut best: Option<CurveEntry> = None;
        for (label, nu) in candidates {
            let s = shapira_entropy(system, walk, &cover, *nu, deltas, params)?;
            let excess = s
                .per_delta
                .iter()
                .map(|(_, c)| log_excess(c, &s.full_cover))
                .fold(f64::NEG_INFINITY, f64::max);
            report.push(ComparatorRow::new(
                format!("count: N_nu <= N [{label}]"),
                Some(e),
                excess,
                0.0,
                tol.count,
                Check::AtMost,
                true,
            ));
            let (_, entry) = s.per_delta.last().expect("deltas nonempty").clone();
            if best
                .as_ref()
                .is_none_or(|b| entry.growth_rate > b.growth_rate)
            {
                best = Some(entry);
            }
        }
        let mut left = best.expect("candidates nonempty");
        left.epsilon = e;
        let right = walk_entropy_at_scale(&family.at(e / 8.0)?, walk, e / 8.0, params)?;
        report.push(ComparatorRow::new(
            "sup_nu h_S <= h(eps/8)",
            Some(e),
            left.growth_rate,
            right.growth_rate,
            tol.per_scale(right.growth_rate),
            Check::AtMost,
            true,
        ));
        left_entries.push(left);
        right_entries.push(right);
    }
    let left = curve_of("shapira_sup".into(), CurveMode::Walk, left_entries)?;
    let right = curve_of("walk_eighth".into(), CurveMode::Walk, right_entries)?;
    let ml = mdim_from_curve(&left)?;
    let mr = mdim_from_curve(&right)?;
    report.push_equal(
        "mdim slope: shapira vs walk",
        None,
        ml.slope,
        mr.slope,
        tol.equality,
        true,
    );
    report.curves = vec![right, left];
    report.estimates = vec![mr, ml];
    Ok(report)
}

/// Sampling schedule for the measure-side local entropies.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureParams {
    pub n_min: usize,
    pub n_max: usize,
    pub tail: usize,
    pub group_budget: u128,
}

impl Default for MeasureParams {
    fn default() -> Self {
        MeasureParams {
            n_min: 1,
            n_max: 4,
            tail: 3,
            group_budget: 1 << 16,
        }
    }
}

fn glw_curve(
    system: &SemigroupSystem,
    grid: &[f64],
    glw: &GlwParams,
) -> Result<(EntropyCurve, MdimEstimate)> {
    let entries = grid
        .iter()
        .map(|&e| glw_entropy_at_scale(system, e, glw))
        .collect::<Result<Vec<_>>>()?;
    let c = curve_of("glw".into(), CurveMode::Glw, entries)?;
    let m = mdim_from_curve(&c)?;
    Ok((c, m))
}

fn measure_slopes(
    system: &SemigroupSystem,
    nu: &MeasureSample,
    xs: &[Point],
    grid: &[f64],
    mp: &MeasureParams,
    mode: LimitMode,
) -> Result<Vec<MdimEstimate>> {
    let name = match mode {
        LimitMode::Upper => "measure_upper",
        LimitMode::Lower => "measure_lower",
    };
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let m = measure_mdim(
                system,
                nu,
                x,
                grid,
                (mp.n_min, mp.n_max),
                mp.tail,
                mp.group_budget,
                mode,
            )?;
            mdim_from_rates(&format!("{name}[x{i}]"), &m.rates)
        })
        .collect()
}

/// GLW dimension of a group action bounded by the local measure dimension.
#[allow(clippy::too_many_arguments)]
pub fn verify_thm_e(
    system: &SemigroupSystem,
    nu: &MeasureSample,
    grid: &[f64],
    xs: &[Point],
    s_grid: &[f64],
    mp: &MeasureParams,
    glw: &GlwParams,
    tol: &Tolerances,
) -> Result<ComparatorReport> {
    check_grid(grid)?;
    let mut report = ComparatorReport::new("E");
    if !system.is_inverse_closed() || !matches!(system.space(), SpaceDescriptor::Torus { .. }) {
        report.skip(
            "glw <= measure",
            "hypothesis not established: needs an inverse-closed generator list on a torus",
        );
        return Ok(report);
    }
    if xs.is_empty() {
        return Err(invalid("points", "need at least one point"));
    }
    let slopes = measure_slopes(system, nu, xs, grid, mp, LimitMode::Upper)?;
    let hypothesis = slopes
        .iter()
        .map(|m| m.slope)
        .fold(f64::NEG_INFINITY, f64::max);
    let (curve, g) = glw_curve(system, grid, glw)?;
    let mut bracket: Vec<f64> = s_grid
        .iter()
        .cloned()
        .filter(|&s| s >= hypothesis)
        .collect();
    if bracket.is_empty() {
        bracket.push(hypothesis);
    }
    for s in bracket {
        report.push(ComparatorRow::new(
            format!("glw mdim <= s = {s}"),
            None,
            g.slope,
            s,
            tol.slope,
            Check::AtMost,
            true,
        ));
    }
    report.curves.push(curve);
    report.estimates.push(g);
    report.estimates.extend(slopes);
    Ok(report)
}

/// GLW dimension against local measure dimensions for a (strongly)
/// G-homogeneous measure.
#[allow(clippy::too_many_arguments)]
pub fn verify_thm_f(
    system: &SemigroupSystem,
    nu: &MeasureSample,
    grid: &[f64],
    xs: &[Point],
    homogeneity: &GHomogeneityReport,
    s: f64,
    mp: &MeasureParams,
    glw: &GlwParams,
    tol: &Tolerances,
) -> Result<ComparatorReport> {
    check_grid(grid)?;
    if xs.is_empty() {
        return Err(invalid("points", "need at least one point"));
    }
    let mut report = ComparatorReport::new("F");
    let (curve, g) = glw_curve(system, grid, glw)?;
    let upper = measure_slopes(system, nu, xs, grid, mp, LimitMode::Upper)?;
    if homogeneity.strong && !homogeneity.degenerate {
        for (i, m) in upper.iter().enumerate() {
            report.push_equal(
                &format!("glw mdim vs measure mdim at x{i}"),
                None,
                g.slope,
                m.slope,
                tol.equality,
                true,
            );
        }
        let hi = upper
            .iter()
            .map(|m| m.slope)
            .fold(f64::NEG_INFINITY, f64::max);
        let lo = upper.iter().map(|m| m.slope).fold(f64::INFINITY, f64::min);
        report.push(ComparatorRow::new(
            "measure mdim spread over x",
            None,
            hi - lo,
            0.0,
            tol.equality,
            Check::AtMost,
            true,
        ));
    } else {
        report.skip(
            "glw mdim vs measure mdim",
            "hypothesis not established: measure not strongly G-homogeneous",
        );
    }
    let lower = measure_slopes(system, nu, xs, grid, mp, LimitMode::Lower)?;
    let floor = lower.iter().map(|m| m.slope).fold(f64::INFINITY, f64::min);
    if floor >= s {
        report.push(ComparatorRow::new(
            format!("s = {s} <= glw mdim"),
            None,
            s,
            g.slope,
            tol.slope,
            Check::AtMost,
            true,
        ));
    } else {
        report.push(ComparatorRow::new(
            format!("s = {s} <= glw mdim"),
            None,
            s,
            g.slope,
            tol.slope,
            Check::Skipped,
            false,
        ));
        report.notes.push(format!(
            "lower measure mdim {floor} < s = {s}: part (b) not applicable"
        ));
    }
    report.curves.push(curve);
    report.estimates.push(g);
    report.estimates.extend(upper);
    report.estimates.extend(lower);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_curves() {
        let flat: Vec<(f64, f64)> = [0.1, 0.05, 0.02, 0.01]
            .iter()
            .map(|&e| (e, 2f64.ln()))
            .collect();
        let m = mdim_from_rates("flat", &flat).unwrap();
        assert!(m.slope.abs() < 1e-12);
        let lin: Vec<(f64, f64)> = [0.1, 0.05, 0.02, 0.01]
            .iter()
            .map(|&e: &f64| (e, -e.ln()))
            .collect();
        let m = mdim_from_rates("lin", &lin).unwrap();
        assert!((m.slope - 1.0).abs() < 1e-12);
        assert!((m.upper - 1.0).abs() < 1e-12 && (m.lower - 1.0).abs() < 1e-12);
        assert!(mdim_from_rates("bad", &[(1.0, 0.0), (0.5, 0.0), (0.2, 0.0)]).is_err());
        assert!(mdim_from_rates("short", &[(0.5, 0.0), (0.5, 0.0), (0.2, 0.0)]).is_err());
    }

    #[test]
    fn verdicts() {
        assert_eq!(judge(Check::AtMost, 1.0, 0.96, 0.05), Verdict::Pass);
        assert_eq!(judge(Check::AtMost, 1.0, 0.9, 0.05), Verdict::Fail);
        assert_eq!(judge(Check::Exact, 3.0, 3.0, 0.0), Verdict::Pass);
        assert_eq!(judge(Check::AtMost, f64::NAN, 0.0, 1.0), Verdict::NoVerdict);
        let mut r = ComparatorReport::new("X");
        assert_eq!(r.verdict(), Verdict::NoVerdict);
        r.push(ComparatorRow::new(
            "soft",
            None,
            2.0,
            0.0,
            0.0,
            Check::AtMost,
            false,
        ));
        assert_eq!(r.verdict(), Verdict::NoVerdict);
        r.push_equal("eq", None, 1.0, 1.1, 0.15, true);
        assert_eq!(r.verdict(), Verdict::Pass);
        r.push_equal("eq", None, 1.0, 1.2, 0.15, true);
        assert_eq!(r.verdict(), Verdict::Fail);
    }
}
