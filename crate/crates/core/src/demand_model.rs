//! Price-demand curves and the per-slot cost quantities derived from them.
//!
//! A curve is tabulated as `(gamma, ratio)` knots where `ratio = d / d*` is
//! the fraction of the actual demand that survives the posted price. The
//! first knot is the nominal price with ratio 1. Between two knots with
//! positive ratio the revenue per unit of actual demand, `ratio * gamma`,
//! is interpolated linearly in `ratio`, so the marginal unit revenue is
//! constant on each such segment and the price follows `gamma = s + c / ratio`.
//! A segment that ends at ratio 0 closes the operating zone; on it the ratio
//! falls linearly in price.
//!
//! If no knot reaches ratio 0 the operating zone is semi-infinite and the
//! last segment is extended past the table.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fleet::BillingConfig;
use crate::rng;
use crate::scalar::Scalar;

/// Absolute tolerance used by [`validate`].
pub const VALIDATION_TOL: f64 = 1e-6;

/// Parameters for [`synthesize_curve`].
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec<S> {
    /// Lower bound on marginal unit revenue.
    pub p_m: S,
    /// Upper bound on marginal unit revenue.
    pub p_max: S,
    pub gamma_star: S,
    /// Last grid price; the synthesized zone closes here at the latest.
    pub gamma_max: S,
    pub grid_steps: usize,
    pub seed: u64,
    pub tau: usize,
    pub cost: S,
}

impl<S: Scalar> CurveSpec<S> {
    /// Spec with unit cost, `gamma_max = p_max` and a 200-step grid.
    pub fn new(p_m: S, p_max: S, gamma_star: S, tau: usize, seed: u64) -> Self {
        CurveSpec {
            p_m,
            p_max,
            gamma_star,
            gamma_max: p_max,
            grid_steps: 200,
            seed,
            tau,
            cost: S::one(),
        }
    }

    pub fn grid_step(&self) -> S {
        (self.gamma_max - self.gamma_star) / S::from_count(self.grid_steps as u64)
    }

    /// Checks every inequality the generator relies on.
    pub fn check(&self) -> Result<()> {
        check_bounds(self.p_m, self.p_max, self.tau, self.cost)?;
        if !(self.gamma_star > self.p_m) {
            return Err(Error::Validation(format!(
                "gamma_star > p_m violated ({} <= {})",
                self.gamma_star, self.p_m
            )));
        }
        if !(self.gamma_star * S::from_count(self.tau as u64) > self.cost) {
            return Err(Error::Validation(format!(
                "gamma_star * tau > cost violated ({} * {} <= {})",
                self.gamma_star, self.tau, self.cost
            )));
        }
        if !(self.gamma_max > self.gamma_star && self.gamma_max <= self.p_max) {
            return Err(Error::Validation(format!(
                "gamma_star < gamma_max <= p_M violated (gamma_star={}, gamma_max={}, p_M={})",
                self.gamma_star, self.gamma_max, self.p_max
            )));
        }
        if self.grid_steps == 0 {
            return Err(Error::Validation("grid_steps >= 1 violated".into()));
        }
        let two = S::lit(2.0);
        if !(self.gamma_max - two * self.grid_step() >= self.p_m) {
            return Err(Error::Validation(format!(
                "gamma_max - 2 * grid_step >= p_m violated (grid too coarse: step {})",
                self.grid_step()
            )));
        }
        Ok(())
    }
}

fn check_bounds<S: Scalar>(p_m: S, p_max: S, tau: usize, cost: S) -> Result<()> {
    if tau < 2 {
        return Err(Error::Validation(format!(
            "tau >= 2 violated (tau = {tau})"
        )));
    }
    if !(cost > S::zero()) {
        return Err(Error::Validation(format!(
            "cost > 0 violated (cost = {cost})"
        )));
    }
    let floor = cost / S::from_count(tau as u64);
    if !(floor <= p_m) {
        return Err(Error::Validation(format!(
            "cost/tau <= p_m violated ({floor} > {p_m})"
        )));
    }
    if !(p_m <= p_max) {
        return Err(Error::Validation(format!(
            "p_m <= p_M violated ({p_m} > {p_max})"
        )));
    }
    if !(p_max < cost) {
        return Err(Error::Validation(format!(
            "p_M < cost violated ({p_max} >= {cost})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint<S> {
    pub gamma: S,
    pub ratio: S,
}

impl<S: Scalar> CurvePoint<S> {
    pub fn new(gamma: S, ratio: S) -> Self {
        CurvePoint { gamma, ratio }
    }

    fn revenue(&self) -> S {
        self.gamma * self.ratio
    }
}

#[derive(Debug, Clone, Copy)]
enum Position {
    Knot(usize),
    Segment(usize),
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment<S> {
    /// Revenue linear in ratio: `gamma = slope + offset / ratio`.
    Hyperbolic { slope: S, offset: S },
    /// Ratio linear in price down to zero.
    Closing,
    /// Both ends at ratio zero.
    Dead,
}

/// Tabulated monotone price-demand relation.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceDemandCurve<S> {
    points: Vec<CurvePoint<S>>,
    segments: Vec<Segment<S>>,
    gamma_op: Option<S>,
    p_m: S,
    p_max: S,
}

impl<S: Scalar> PriceDemandCurve<S> {
    /// Builds a curve from knots. Only the structure needed for lookups is
    /// enforced here (two or more finite knots, prices strictly increasing);
    /// the economic properties are reported by [`validate`].
    pub fn new(points: Vec<CurvePoint<S>>, p_m: S, p_max: S) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Validation("curve needs at least two knots".into()));
        }
        if points
            .iter()
            .any(|p| !p.gamma.is_finite() || !p.ratio.is_finite())
        {
            return Err(Error::Validation("curve knots must be finite".into()));
        }
        if points.windows(2).any(|w| !(w[1].gamma > w[0].gamma)) {
            return Err(Error::Validation(
                "curve prices must be strictly increasing".into(),
            ));
        }
        let segments = points
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                if a.ratio <= S::zero() {
                    Segment::Dead
                } else if b.ratio <= S::zero() {
                    Segment::Closing
                } else {
                    let slope = (b.revenue() - a.revenue()) / (b.ratio - a.ratio);
                    Segment::Hyperbolic {
                        slope,
                        offset: a.revenue() - slope * a.ratio,
                    }
                }
            })
            .collect();
        let gamma_op = points
            .iter()
            .find(|p| p.ratio <= S::zero())
            .map(|p| p.gamma);
        Ok(PriceDemandCurve {
            points,
            segments,
            gamma_op,
            p_m,
            p_max,
        })
    }

    pub fn points(&self) -> &[CurvePoint<S>] {
        &self.points
    }

    pub fn gamma_star(&self) -> S {
        self.points[0].gamma
    }

    /// First price at which demand vanishes; `None` for a semi-infinite zone.
    pub fn gamma_op(&self) -> Option<S> {
        self.gamma_op
    }

    pub fn declared_p_m(&self) -> S {
        self.p_m
    }

    pub fn declared_p_max(&self) -> S {
        self.p_max
    }

    /// Number of knots with positive ratio.
    fn positive_len(&self) -> usize {
        self.points
            .iter()
            .position(|p| p.ratio <= S::zero())
            .unwrap_or(self.points.len())
    }

    /// Segment used to extrapolate past the table on a semi-infinite zone.
    fn tail(&self) -> (S, S) {
        match self.segments.last() {
            Some(Segment::Hyperbolic { slope, offset }) => (*slope, *offset),
            _ => unreachable!("semi-infinite curve ends on a hyperbolic segment"),
        }
    }

    /// Demand ratio `f(gamma) = d / d*` at a posted price.
    pub fn ratio(&self, gamma: S) -> S {
        let first = self.points[0];
        if gamma <= first.gamma {
            return S::one();
        }
        let k = self.points.partition_point(|p| p.gamma <= gamma) - 1;
        if k == self.points.len() - 1 {
            if self.gamma_op.is_some() {
                return S::zero();
            }
            let (slope, offset) = self.tail();
            return offset / (gamma - slope);
        }
        let a = self.points[k];
        if gamma == a.gamma {
            return a.ratio;
        }
        match self.segments[k] {
            Segment::Hyperbolic { slope, offset } => offset / (gamma - slope),
            Segment::Closing => {
                let b = self.points[k + 1];
                a.ratio * (b.gamma - gamma) / (b.gamma - a.gamma)
            }
            Segment::Dead => S::zero(),
        }
    }

    /// Revenue per unit of actual demand at ratio `r`, i.e. `r * g(r)`.
    /// Zero served demand earns nothing on either kind of zone.
    pub fn unit_revenue(&self, r: S) -> S {
        if r <= S::zero() {
            return S::zero();
        }
        match self.locate(r) {
            Position::Knot(k) => self.points[k].revenue(),
            Position::Segment(k) => match self.segments[k] {
                Segment::Hyperbolic { slope, offset } => offset + slope * r,
                Segment::Closing | Segment::Dead => r * self.closing_price(k, r),
            },
            Position::Tail => {
                let (slope, offset) = self.tail();
                offset + slope * r
            }
        }
    }

    /// Price at ratio `r`.
    pub fn price_at_ratio(&self, r: S) -> Result<S> {
        if r <= S::zero() {
            return self.gamma_op.ok_or(Error::UnreachableDemand);
        }
        Ok(match self.locate(r) {
            Position::Knot(k) => self.points[k].gamma,
            Position::Segment(k) => match self.segments[k] {
                Segment::Hyperbolic { slope, offset } => slope + offset / r,
                Segment::Closing | Segment::Dead => self.closing_price(k, r),
            },
            Position::Tail => {
                let (slope, offset) = self.tail();
                slope + offset / r
            }
        })
    }

    fn closing_price(&self, k: usize, r: S) -> S {
        let (a, b) = (self.points[k], self.points[k + 1]);
        b.gamma - (b.gamma - a.gamma) * r / a.ratio
    }

    /// Places a positive ratio on a knot, inside a segment, or past the table.
    /// Ratios at or above the first knot map onto it.
    fn locate(&self, r: S) -> Position {
        let n = self.positive_len();
        let idx = self.points[..n].partition_point(|p| p.ratio > r);
        if idx < n && self.points[idx].ratio == r {
            Position::Knot(idx)
        } else if idx == 0 {
            Position::Knot(0)
        } else if idx == n && n == self.points.len() {
            Position::Tail
        } else {
            Position::Segment(idx - 1)
        }
    }

    /// `g(d*, d)`: the price that reduces actual demand `d_star` to `d`.
    pub fn price_for_demand(&self, d_star: S, d: S) -> Result<S> {
        check_demand(d_star, d)?;
        if d == d_star {
            return Ok(self.gamma_star());
        }
        self.price_at_ratio(d / d_star)
    }

    /// `d * g(d*, d)`, defined as zero when `d = 0`.
    pub fn revenue(&self, d_star: S, d: S) -> Result<S> {
        check_demand(d_star, d)?;
        if d <= S::zero() {
            return Ok(S::zero());
        }
        if d == d_star {
            return Ok(self.gamma_star() * d);
        }
        Ok(d_star * self.unit_revenue(d / d_star))
    }

    /// Derivative of `d * g(d*, d)` in `d` by a central difference with
    /// step `min(0.5, d/10)`, with the stencil kept inside `[0, d*]`.
    pub fn marginal_unit_revenue(&self, d_star: S, d: S) -> Result<S> {
        if !(d > S::zero() && d <= d_star) {
            return Err(Error::Domain {
                d_star: d_star.as_f64(),
                d: d.as_f64(),
            });
        }
        let h = S::lit(0.5).min(d / S::lit(10.0));
        let hi = (d + h).min(d_star);
        let lo = (d - h).max(S::zero());
        Ok((self.revenue(d_star, hi)? - self.revenue(d_star, lo)?) / (hi - lo))
    }

    /// Revenue given up by serving `d` instead of `d_star`: `gamma* d* - g(d*, d) d`.
    pub fn demand_loss(&self, d_star: S, d: S) -> Result<S> {
        Ok(self.gamma_star() * d_star - self.revenue(d_star, d)?)
    }

    /// Cost of reducing served demand from `d` to `d - n`.
    pub fn renting_cost(&self, d_star: S, d: S, n: S) -> Result<S> {
        if n < S::zero() || n > d {
            return Err(Error::ReductionTooLarge {
                d: d.as_f64(),
                n: n.as_f64(),
            });
        }
        Ok(self.revenue(d_star, d)? - self.revenue(d_star, d - n)?)
    }

    /// Smallest and largest marginal unit revenue over the tabulated zone.
    pub fn measured_bounds(&self) -> (S, S) {
        let mut lo = S::infinity();
        let mut hi = S::neg_infinity();
        for (k, _) in self.segments.iter().enumerate() {
            for p in self.segment_marginals(k) {
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        (lo, hi)
    }

    /// Marginal unit revenue at the ends of segment `k` (it is monotone on
    /// every segment, so the ends bound it).
    fn segment_marginals(&self, k: usize) -> Vec<S> {
        let (a, b) = (self.points[k], self.points[k + 1]);
        match self.segments[k] {
            Segment::Hyperbolic { slope, .. } => vec![slope],
            Segment::Closing => vec![a.gamma + a.gamma - b.gamma, b.gamma],
            Segment::Dead => vec![],
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# gamma_star={}", self.gamma_star());
        let _ = writeln!(out, "# p_m={}", self.p_m);
        let _ = writeln!(out, "# p_M={}", self.p_max);
        match self.gamma_op {
            Some(g) => {
                let _ = writeln!(out, "# gamma_op={g}");
            }
            None => out.push_str("# gamma_op=inf\n"),
        }
        for p in &self.points {
            let _ = writeln!(out, "{},{}", p.gamma, p.ratio);
        }
        out
    }

    pub fn from_csv(text: &str, source: &str) -> Result<Self> {
        let mut gamma_star = None;
        let mut p_m = None;
        let mut p_max = None;
        let mut gamma_op: Option<Option<S>> = None;
        let mut points = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let Some((key, value)) = meta.trim().split_once('=') else {
                    continue;
                };
                let value = value.trim();
                let num = || {
                    value
                        .parse::<S>()
                        .map_err(|_| Error::parse(source, lineno, format!("bad number {value:?}")))
                };
                match key.trim() {
                    "gamma_star" => gamma_star = Some(num()?),
                    "p_m" => p_m = Some(num()?),
                    "p_M" => p_max = Some(num()?),
                    "gamma_op" if value == "inf" => gamma_op = Some(None),
                    "gamma_op" => gamma_op = Some(Some(num()?)),
                    _ => {}
                }
                continue;
            }
            let Some((g, r)) = line.split_once(',') else {
                return Err(Error::parse(source, lineno, "expected `gamma,ratio`"));
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<S>()
                    .map_err(|_| Error::parse(source, lineno, format!("bad number {s:?}")))
            };
            points.push(CurvePoint::new(parse(g)?, parse(r)?));
        }
        let missing = |name: &str| Error::parse(source, 0, format!("missing `# {name}=` header"));
        let gamma_star = gamma_star.ok_or_else(|| missing("gamma_star"))?;
        let p_m = p_m.ok_or_else(|| missing("p_m"))?;
        let p_max = p_max.ok_or_else(|| missing("p_M"))?;
        let gamma_op = gamma_op.ok_or_else(|| missing("gamma_op"))?;
        let curve =
            Self::new(points, p_m, p_max).map_err(|e| Error::parse(source, 0, e.to_string()))?;
        if curve.gamma_star() != gamma_star {
            return Err(Error::parse(
                source,
                0,
                "gamma_star header disagrees with the first knot",
            ));
        }
        if curve.gamma_op != gamma_op {
            return Err(Error::parse(
                source,
                0,
                "gamma_op header disagrees with the knots",
            ));
        }
        Ok(curve)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn check_demand<S: Scalar>(d_star: S, d: S) -> Result<()> {
    if d < S::zero() || d > d_star || d_star < S::zero() {
        return Err(Error::Domain {
            d_star: d_star.as_f64(),
            d: d.as_f64(),
        });
    }
    Ok(())
}

/// Draws a random curve on the uniform price grid `[gamma*, gamma_max]`.
///
/// At each grid price a slope `dgamma/dratio` is drawn uniformly from
/// `[(p_m - gamma)/r, min(0, (p_M - gamma)/r))`, with `gamma` taken at the
/// right end of the step so that the segment's marginal revenue stays inside
/// `[p_m, p_M]`. The slope is inverted into a ratio decrement over the
/// price step; a decrement that would cross zero closes the zone at that grid
/// price, and the last grid price always closes it.
pub fn synthesize_curve<S: Scalar>(spec: &CurveSpec<S>) -> Result<PriceDemandCurve<S>> {
    spec.check()?;
    let mut rng = rng::stream(spec.seed, rng::streams::CURVE);
    let step = spec.grid_step();
    let n = spec.grid_steps;
    let grid = |k: usize| {
        if k == n {
            spec.gamma_max
        } else {
            spec.gamma_star + step * S::from_count(k as u64)
        }
    };

    let mut points = vec![CurvePoint::new(spec.gamma_star, S::one())];
    let mut ratio = S::one();
    for k in 0..n {
        let (here, next) = (grid(k), grid(k + 1));
        let delta = next - here;
        if k + 1 == n {
            points.push(CurvePoint::new(next, S::zero()));
            break;
        }
        // Closing from `here` puts marginal revenue 2*here - next at its left end.
        let may_close = here + here - next >= spec.p_m;
        let mut upper = next.min(spec.p_max);
        if !may_close {
            upper = upper.min(here);
        }
        let slope_lo = (spec.p_m - next) / ratio;
        let slope_hi = (upper - next) / ratio;
        let u = S::lit(rng.gen::<f64>());
        let slope = slope_lo + (slope_hi - slope_lo) * u;
        let candidate = ratio + delta / slope;
        if candidate <= S::zero() {
            points.push(CurvePoint::new(next, S::zero()));
            break;
        }
        points.push(CurvePoint::new(next, candidate));
        ratio = candidate;
    }
    PriceDemandCurve::new(points, spec.p_m, spec.p_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Checks a curve against the demand-function properties and the billing
/// parameters it will be simulated with.
pub fn validate<S: Scalar>(
    curve: &PriceDemandCurve<S>,
    config: &BillingConfig<S>,
) -> ValidationReport {
    let tol = S::lit(VALIDATION_TOL);
    let pts = curve.points();
    let mut checks = Vec::new();

    let bad_ratio = pts
        .iter()
        .position(|p| p.ratio < S::zero() || p.ratio > S::one());
    let first_ok = pts[0].ratio == S::one();
    checks.push(Check {
        name: "ratio_bounds",
        passed: bad_ratio.is_none() && first_ok,
        detail: match (bad_ratio, first_ok) {
            (Some(i), _) => format!("knot {i} has ratio {} outside [0, 1]", pts[i].ratio),
            (None, false) => format!("ratio at gamma_star is {}, expected 1", pts[0].ratio),
            _ => "ratios in [0, 1] with ratio(gamma_star) = 1".into(),
        },
    });

    let mut mono = None;
    for (k, w) in pts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let increasing = if a.ratio > S::zero() {
            !(b.ratio < a.ratio)
        } else {
            b.ratio > S::zero()
        };
        let bent = match curve.segments[k] {
            Segment::Hyperbolic { offset, .. } => !(offset > S::zero()),
            _ => false,
        };
        if increasing || bent {
            mono = Some(k);
            break;
        }
    }
    checks.push(Check {
        name: "monotonicity",
        passed: mono.is_none(),
        detail: match mono {
            Some(k) => format!(
                "ratio does not decrease on segment {k} ({} -> {})",
                pts[k].ratio,
                pts[k + 1].ratio
            ),
            None => "ratio strictly decreasing until it reaches 0".into(),
        },
    });

    let rev = pts
        .windows(2)
        .position(|w| w[1].revenue() > w[0].revenue() + tol);
    checks.push(Check {
        name: "revenue_monotonicity",
        passed: rev.is_none(),
        detail: match rev {
            Some(k) => format!(
                "revenue rises on segment {k} ({} -> {})",
                pts[k].revenue(),
                pts[k + 1].revenue()
            ),
            None => "revenue non-increasing in price".into(),
        },
    });

    let (p_m, p_max) = (curve.declared_p_m(), curve.declared_p_max());
    let mut out_of_band = None;
    'outer: for k in 0..curve.segments.len() {
        for p in curve.segment_marginals(k) {
            if p < p_m - tol || p > p_max + tol {
                out_of_band = Some((k, p));
                break 'outer;
            }
        }
    }
    let (lo, hi) = curve.measured_bounds();
    checks.push(Check {
        name: "marginal_revenue_bounds",
        passed: out_of_band.is_none(),
        detail: match out_of_band {
            Some((k, p)) => {
                format!("segment {k} has marginal revenue {p} outside [{p_m}, {p_max}]")
            }
            None => format!("measured [{lo}, {hi}] within declared [{p_m}, {p_max}]"),
        },
    });

    let declared = check_bounds(p_m, p_max, config.tau(), config.cost());
    checks.push(Check {
        name: "declared_bounds",
        passed: declared.is_ok(),
        detail: match declared {
            Ok(()) => "cost/tau <= p_m <= p_M < cost".into(),
            Err(e) => e.to_string(),
        },
    });

    let margin = config.gamma_star() * S::from_count(config.tau() as u64);
    let same_nominal = (config.gamma_star() - curve.gamma_star()).abs() <= tol;
    checks.push(Check {
        name: "nominal_profitability",
        passed: margin > config.cost() && same_nominal,
        detail: if !same_nominal {
            format!(
                "curve nominal price {} differs from billing gamma_star {}",
                curve.gamma_star(),
                config.gamma_star()
            )
        } else {
            format!("gamma_star * tau = {margin} vs cost {}", config.cost())
        },
    });

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hourly_spec(seed: u64) -> CurveSpec<f64> {
        CurveSpec::new(1.0 / 12.0, 0.8, 0.3, 12, seed)
    }

    fn billing() -> BillingConfig<f64> {
        BillingConfig::new(12, 1.0, 0.3).unwrap()
    }

    /// Constant marginal revenue `s` from ratio 1 down to `r_end`, then closing.
    fn constant_marginal_curve(s: f64, gamma_star: f64) -> PriceDemandCurve<f64> {
        let offset = gamma_star - s;
        let knots = [1.0, 0.8, 0.5, 0.3];
        let mut pts: Vec<_> = knots
            .iter()
            .map(|&r| CurvePoint::new(s + offset / r, r))
            .collect();
        let last = *pts.last().unwrap();
        pts.push(CurvePoint::new(last.gamma + 0.01, 0.0));
        PriceDemandCurve::new(pts, 0.1, 0.9).unwrap()
    }

    #[test]
    fn synthesized_curve_passes_validation() {
        let curve = synthesize_curve(&hourly_spec(1)).unwrap();
        let report = validate(&curve, &billing());
        assert!(report.all_passed(), "{report}");
        assert_eq!(curve.declared_p_m(), 1.0 / 12.0);
        assert_eq!(curve.declared_p_max(), 0.8);
        assert_eq!(curve.ratio(0.3), 1.0);
        assert!(curve.gamma_op().is_some());
    }

    #[test]
    fn synthesis_rejects_named_inequalities() {
        let mut spec = hourly_spec(1);
        spec.p_m = 1.0 / 12.0 - 0.01;
        let err = synthesize_curve(&spec).unwrap_err().to_string();
        assert!(err.contains("cost/tau <= p_m"), "{err}");

        let mut spec = hourly_spec(1);
        spec.gamma_star = 0.05;
        let err = synthesize_curve(&spec).unwrap_err().to_string();
        assert!(err.contains("gamma_star > p_m"), "{err}");

        let mut spec = hourly_spec(1);
        spec.p_max = 1.2;
        let err = synthesize_curve(&spec).unwrap_err().to_string();
        assert!(err.contains("p_M < cost"), "{err}");
    }

    #[test]
    fn synthesis_is_deterministic_per_seed() {
        let a = synthesize_curve(&hourly_spec(7)).unwrap();
        let b = synthesize_curve(&hourly_spec(7)).unwrap();
        let c = synthesize_curve(&hourly_spec(8)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_ne!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn nominal_demand_prices_at_gamma_star() {
        let curve = synthesize_curve(&hourly_spec(3)).unwrap();
        assert_eq!(curve.price_for_demand(7.0, 7.0).unwrap(), 0.3);
        assert_eq!(curve.demand_loss(7.0, 7.0).unwrap(), 0.0);
        assert_eq!(curve.renting_cost(7.0, 4.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn motivating_example_demand_loss() {
        // gamma* = 0.03 and g(10, 6) = 0.045.
        let curve = PriceDemandCurve::new(
            vec![
                CurvePoint::new(0.03, 1.0),
                CurvePoint::new(0.045, 0.6),
                CurvePoint::new(0.06, 0.0),
            ],
            0.023,
            0.12,
        )
        .unwrap();
        assert_eq!(curve.price_for_demand(10.0, 6.0).unwrap(), 0.045);
        assert_abs_diff_eq!(curve.demand_loss(10.0, 6.0).unwrap(), 0.03, epsilon = 1e-12);
    }

    #[test]
    fn domain_errors() {
        let curve = synthesize_curve(&hourly_spec(2)).unwrap();
        assert!(matches!(
            curve.price_for_demand(3.0, 4.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            curve.demand_loss(3.0, 3.5),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            curve.renting_cost(5.0, 2.0, 3.0),
            Err(Error::ReductionTooLarge { .. })
        ));
        assert!(curve.marginal_unit_revenue(3.0, 0.0).is_err());
        assert!(curve.marginal_unit_revenue(3.0, 3.5).is_err());
    }

    #[test]
    fn zero_demand_on_semi_infinite_curve_is_unreachable() {
        let curve = PriceDemandCurve::new(
            vec![CurvePoint::new(0.3, 1.0), CurvePoint::new(0.4, 0.6)],
            0.1,
            0.5,
        )
        .unwrap();
        assert!(curve.gamma_op().is_none());
        assert!(matches!(
            curve.price_for_demand(5.0, 0.0),
            Err(Error::UnreachableDemand)
        ));
        // Revenue and demand loss stay defined: nothing is served.
        assert_eq!(curve.revenue(5.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(curve.demand_loss(5.0, 0.0).unwrap(), 1.5, epsilon = 1e-12);
        // The tail keeps demand positive at any price.
        assert!(curve.ratio(100.0) > 0.0);
    }

    #[test]
    fn zero_demand_on_finite_curve_prices_at_gamma_op() {
        let curve = synthesize_curve(&hourly_spec(4)).unwrap();
        let op = curve.gamma_op().unwrap();
        assert_eq!(curve.price_for_demand(4.0, 0.0).unwrap(), op);
        assert_eq!(curve.ratio(op), 0.0);
        assert_eq!(curve.ratio(op + 1.0), 0.0);
    }

    #[test]
    fn linear_revenue_segment_has_exact_marginal() {
        let curve = constant_marginal_curve(0.2, 0.5);
        // Interior of the first segments, away from knots.
        for &d in &[9.0, 7.0, 6.0, 4.0] {
            let p = curve.marginal_unit_revenue(10.0, d).unwrap();
            assert_abs_diff_eq!(p, 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn marginal_matches_table_increments() {
        let curve = synthesize_curve(&hourly_spec(5)).unwrap();
        let pts = curve.points();
        let d_star = 1000.0;
        let mut checked = 0;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.ratio <= 0.0 {
                break;
            }
            let d = 0.5 * (a.ratio + b.ratio) * d_star;
            let h = (0.5f64).min(d / 10.0);
            // Only where the stencil stays inside one segment.
            if d + h > a.ratio * d_star || d - h < b.ratio * d_star {
                continue;
            }
            let table = (b.gamma * b.ratio - a.gamma * a.ratio) / (b.ratio - a.ratio);
            let fd = curve.marginal_unit_revenue(d_star, d).unwrap();
            assert_abs_diff_eq!(fd, table, epsilon = 1e-6);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn validate_flags_ratio_increase() {
        let curve = PriceDemandCurve::new(
            vec![
                CurvePoint::new(0.3, 1.0),
                CurvePoint::new(0.35, 0.7),
                CurvePoint::new(0.4, 0.75),
                CurvePoint::new(0.5, 0.0),
            ],
            1.0 / 12.0,
            0.8,
        )
        .unwrap();
        let report = validate(&curve, &billing());
        assert!(!report.check("monotonicity").unwrap().passed);
        assert!(!report.all_passed());
    }

    #[test]
    fn validate_flags_slope_outside_band() {
        // Start from a valid curve and bend one segment so that the drawn
        // slope lies above (p_M - gamma)/d, i.e. revenue nearly flat.
        let curve = synthesize_curve(&hourly_spec(6)).unwrap();
        let mut pts = curve.points().to_vec();
        assert!(pts.len() > 3);
        let a = pts[0];
        let gamma = pts[1].gamma;
        // Marginal revenue of the first segment forced to p_m / 2.
        let s = curve.declared_p_m() / 2.0;
        pts[1].ratio = a.ratio * (a.gamma - s) / (gamma - s);
        let bent =
            PriceDemandCurve::new(pts, curve.declared_p_m(), curve.declared_p_max()).unwrap();
        let report = validate(&bent, &billing());
        let check = report.check("marginal_revenue_bounds").unwrap();
        assert!(!check.passed, "{report}");
        assert!(check.detail.contains("segment 0"));
    }

    #[test]
    fn validate_flags_unprofitable_nominal_price() {
        let curve = synthesize_curve(&hourly_spec(1)).unwrap();
        let cheap = BillingConfig::new(12, 1.0, 0.3).unwrap();
        assert!(validate(&curve, &cheap).all_passed());
        // Same curve against a billing cycle too short to recover the cost.
        let short = BillingConfig::new_unchecked(3, 1.0, 0.3);
        let report = validate(&curve, &short);
        assert!(!report.check("nominal_profitability").unwrap().passed);
        assert!(!report.check("declared_bounds").unwrap().passed);
    }

    #[test]
    fn curve_csv_round_trip_is_bit_exact() {
        let curve = synthesize_curve(&hourly_spec(9)).unwrap();
        let text = curve.to_csv();
        let back = PriceDemandCurve::<f64>::from_csv(&text, "mem").unwrap();
        assert_eq!(back, curve);
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn curve_csv_reports_bad_rows() {
        let text = "# gamma_star=0.3\n# p_m=0.1\n# p_M=0.8\n# gamma_op=inf\n0.3,1\n0.4,x\n";
        let err = PriceDemandCurve::<f64>::from_csv(text, "c.csv").unwrap_err();
        assert!(err.to_string().starts_with("c.csv:6:"), "{err}");
        let text = "# gamma_star=0.3\n# p_m=0.1\n# p_M=0.8\n# gamma_op=0.5\n0.3,1\n0.4,0.5\n";
        assert!(PriceDemandCurve::<f64>::from_csv(text, "c.csv").is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let spec = CurveSpec::<f32>::new(1.0 / 12.0, 0.8, 0.3, 12, 1);
        let curve = synthesize_curve(&spec).unwrap();
        let cfg = BillingConfig::<f32>::new(12, 1.0, 0.3).unwrap();
        assert!(validate(&curve, &cfg).all_passed());
        let g = curve.price_for_demand(10.0, 5.0).unwrap();
        assert!((curve.ratio(g) * 10.0 - 5.0).abs() < 1e-4);
    }
}
