//! Weights, increasing bijections and the hypothesis checkers.
//!
//! Pure powers `c t^a` have closed-form primitives. Power-log weights
//! `c t^a prod l_j(t)^{b_j}` with `l_1 = 1 + |log t|`, `l_j = 1 + log l_{j-1}`
//! are integrated by adaptive Simpson in the variable `s = log t`; heads at 0
//! and tails at infinity become half-line integrals in `s` and their
//! convergence is decided by the exponents, not numerically.
//!
//! Composite weights (products, compositions with a bijection, primitives,
//! reciprocal primitives) are simplified to a power-log weight whenever the
//! algebra allows it and fall back to Gauss-Kronrod otherwise.

use crate::error::{Error, Result};
use crate::quad::{self, Tol};
use crate::tolerances::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    Nonincreasing,
    Nondecreasing,
    #[default]
    None,
}

impl Monotonicity {
    fn combine_product(a: Monotonicity, b: Monotonicity) -> Monotonicity {
        if a == b {
            a
        } else {
            Monotonicity::None
        }
    }
}

/// Geometric probe grid over `[PROBE_LO, PROBE_HI]` clipped to `(0, len)`.
pub fn probe_grid(len: f64) -> Vec<f64> {
    geometric_grid(PROBE_LO, PROBE_HI.min(len), PROBE_PER_DECADE, len)
}

/// Points `lo * 10^{k / per_decade}` up to `hi`, strictly below `len`.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize, len: f64) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round().max(0.0) as usize;
    let mut out: Vec<f64> = (0..=n)
        .map(|k| lo * 10f64.powf(k as f64 / per_decade as f64))
        .filter(|&t| t < len)
        .collect();
    if len.is_finite() && out.last().is_some_and(|&t| t < len * (1.0 - 1e-9)) {
        out.push(len * (1.0 - 1e-9));
    }
    out
}

// ---------------------------------------------------------------- power-log

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLog {
    pub c: f64,
    pub a: f64,
    #[serde(default)]
    pub b: Vec<f64>,
}

/// `l_j` evaluated at `s = |log t|`, for `j = 1..=n`.
fn iterated_logs(s: f64, n: usize) -> impl Iterator<Item = f64> {
    let mut l = 1.0 + s;
    (0..n).map(move |j| {
        if j > 0 {
            l = 1.0 + l.ln();
        }
        l
    })
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Conv {
    Converges,
    Diverges,
}

impl PowerLog {
    pub fn new(c: f64, a: f64, b: Vec<f64>) -> Result<Self> {
        let w = PowerLog { c, a, b };
        w.validate()?;
        Ok(w)
    }

    pub fn power(c: f64, a: f64) -> Self {
        PowerLog { c, a, b: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidSpec(format!("weight coefficient c must be positive, got {}", self.c)));
        }
        if !self.a.is_finite() || self.b.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("weight exponents must be finite".into()));
        }
        Ok(())
    }

    fn trimmed_b(&self) -> &[f64] {
        let n = self.b.iter().rposition(|&x| x != 0.0).map_or(0, |i| i + 1);
        &self.b[..n]
    }

    pub fn is_power(&self) -> bool {
        self.trimmed_b().is_empty()
    }

    fn log_factor(&self, s: f64) -> f64 {
        let b = self.trimmed_b();
        iterated_logs(s, b.len()).zip(b).map(|(l, &e)| l.powf(e)).product()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = self.c * t.powf(self.a);
        if self.is_power() {
            return p;
        }
        p * self.log_factor(t.ln().abs())
    }

    /// Bertrand-type rule for `\int t^{a'} prod l_j^{b_j}` near an endpoint
    /// where the power exponent has been reduced to the critical case.
    fn bertrand(&self) -> Conv {
        for &e in self.trimmed_b() {
            if e < -1.0 {
                return Conv::Converges;
            }
            if e > -1.0 {
                return Conv::Diverges;
            }
        }
        Conv::Diverges
    }

    fn head_converges(&self) -> Conv {
        if self.a > -1.0 {
            Conv::Converges
        } else if self.a < -1.0 {
            Conv::Diverges
        } else {
            self.bertrand()
        }
    }

    fn tail_converges(&self) -> Conv {
        if self.a < -1.0 {
            Conv::Converges
        } else if self.a > -1.0 {
            Conv::Diverges
        } else {
            self.bertrand()
        }
    }

    /// `\int_lo^hi`, `0 <= lo <= hi <= inf`.
    pub fn integral(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(hi > lo) {
            return Ok(0.0);
        }
        if lo == 0.0 && self.head_converges() == Conv::Diverges {
            return Err(Error::Divergent(format!("{self:?} is not integrable near 0")));
        }
        if hi.is_infinite() && self.tail_converges() == Conv::Diverges {
            return Err(Error::Divergent(format!("{self:?} is not integrable near infinity")));
        }
        if self.is_power() {
            return Ok(self.power_integral(lo, hi));
        }
        let mut total = 0.0;
        // Head: s = -log t on (log(1/m), inf).
        if lo == 0.0 {
            let m = hi.min(1.0);
            total += self.head_integral(m)?;
        }
        // Finite middle part in s = log t, split at t = 1.
        let mid_lo = if lo == 0.0 { hi.min(1.0) } else { lo };
        let mid_hi = if hi.is_infinite() { mid_lo.max(1.0) } else { hi };
        if mid_hi > mid_lo {
            total += self.middle_integral(mid_lo, mid_hi);
        }
        if hi.is_infinite() {
            total += self.tail_integral(mid_hi.max(1.0))?;
        }
        Ok(total)
    }

    fn power_integral(&self, lo: f64, hi: f64) -> f64 {
        let e = self.a + 1.0;
        if e == 0.0 {
            return self.c * (hi / lo).ln();
        }
        if lo == 0.0 {
            return self.c * hi.powf(e) / e;
        }
        if hi.is_infinite() {
            return -self.c * lo.powf(e) / e;
        }
        let x = e * (hi / lo).ln();
        if x.abs() > 0.5 {
            // Endpoints far apart: no cancellation, and lo^e may underflow.
            return self.c * (hi.powf(e) - lo.powf(e)) / e;
        }
        // hi^e - lo^e without cancellation.
        self.c * lo.powf(e) * x.exp_m1() / e
    }

    fn middle_integral(&self, lo: f64, hi: f64) -> f64 {
        let g = |s: f64| {
            let t = s.exp();
            self.eval(t) * t
        };
        let (sl, sh) = (lo.ln(), hi.ln());
        let mut total = 0.0;
        let mut cuts = vec![sl];
        if sl < 0.0 && sh > 0.0 {
            cuts.push(0.0);
        }
        cuts.push(sh);
        for w in cuts.windows(2) {
            // Unit-length pieces keep Simpson's tolerance meaningful.
            let n = ((w[1] - w[0]).ceil() as usize).clamp(1, 4096);
            let h = (w[1] - w[0]) / n as f64;
            for k in 0..n {
                let a = w[0] + h * k as f64;
                let b = if k + 1 == n { w[1] } else { a + h };
                total += quad::simpson(&g, a, b, PRIMITIVE_REL * 1e-2, QUAD_ABS_FLOOR).value;
            }
        }
        total
    }

    fn head_integral(&self, m: f64) -> Result<f64> {
        exp_log_tail(self.c, -(self.a + 1.0), self.trimmed_b(), (1.0 / m).ln())
    }

    fn tail_integral(&self, m: f64) -> Result<f64> {
        exp_log_tail(self.c, self.a + 1.0, self.trimmed_b(), m.ln())
    }

    pub fn mul(&self, o: &PowerLog) -> PowerLog {
        let n = self.b.len().max(o.b.len());
        let b = (0..n)
            .map(|j| self.b.get(j).copied().unwrap_or(0.0) + o.b.get(j).copied().unwrap_or(0.0))
            .collect();
        PowerLog { c: self.c * o.c, a: self.a + o.a, b }
    }
}

/// `\int_{s0}^inf c e^{e s} prod l_j(s)^{b_j} ds` with `l_1 = 1 + s`.
/// In the critical case `e = 0` the substitution `1 + s = e^r` turns the
/// integral into the same shape with exponent `1 + b_1` and the shorter chain
/// `b_2, b_3, ...`, so the integrand handed to the summation always decays
/// exponentially.
fn exp_log_tail(c: f64, e: f64, b: &[f64], s0: f64) -> Result<f64> {
    if e == 0.0 {
        return match b.split_first() {
            Some((&b1, rest)) => exp_log_tail(c, 1.0 + b1, rest, (1.0 + s0).ln()),
            None => Err(Error::Divergent("critical power-log integral diverges".into())),
        };
    }
    if e > 0.0 {
        return Err(Error::Divergent("power-log integrand grows along the half-line".into()));
    }
    let b = b.to_vec();
    let g = move |s: f64| {
        let lf: f64 = iterated_logs(s, b.len()).zip(&b).map(|(l, &x)| l.powf(x)).product();
        c * (e * s).exp() * lf
    };
    quad::semi_infinite(&g, s0, 1.0 / (-e).max(0.05), PRIMITIVE_REL)
        .ok_or_else(|| Error::Divergent("half-line integral did not settle".into()))
}

// ---------------------------------------------------------------- tables

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Step,
    Linear,
}

/// Tabulated weight: `points = [[x, y], ...]` with increasing `x`, extended
/// by constants outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub points: Vec<[f64; 2]>,
    pub interp: Interp,
}

impl Table {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidSpec("tabulated weight needs at least one point".into()));
        }
        for w in self.points.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(Error::InvalidSpec("tabulated abscissae must increase".into()));
            }
        }
        if self.points.iter().any(|p| !(p[0] >= 0.0 && p[1] >= 0.0 && p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidSpec("tabulated points must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = &self.points;
        let i = p.partition_point(|q| q[0] <= t);
        match self.interp {
            Interp::Step => p[i.saturating_sub(1)][1],
            Interp::Linear => {
                if i == 0 {
                    p[0][1]
                } else if i == p.len() {
                    p[p.len() - 1][1]
                } else {
                    let (x0, y0, x1, y1) = (p[i - 1][0], p[i - 1][1], p[i][0], p[i][1]);
                    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
                }
            }
        }
    }

    /// Exact integral of the piecewise constant or linear interpolant.
    pub fn integral(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(hi > lo) {
            return Ok(0.0);
        }
        let last = self.points[self.points.len() - 1][1];
        if hi.is_infinite() && last > 0.0 {
            return Err(Error::Divergent("tabulated weight has a positive constant tail".into()));
        }
        let mut xs: Vec<f64> = vec![lo];
        xs.extend(self.points.iter().map(|p| p[0]).filter(|&x| x > lo && x < hi));
        let hi_f = if hi.is_infinite() { self.points[self.points.len() - 1][0].max(lo) } else { hi };
        xs.push(hi_f);
        let mut s = 0.0;
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            s += match self.interp {
                Interp::Step => self.eval(a) * (b - a),
                Interp::Linear => 0.5 * (self.eval(a) + self.eval(b)) * (b - a),
            };
        }
        Ok(s)
    }
}

// ---------------------------------------------------------------- bijections

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NumericMap {
    /// `t + t^2` on `(0, inf)`.
    TPlusTSquared,
    /// `log(1 + t)` on `(0, inf)`.
    Log1p,
    /// `(e^t - 1) / (e - 1)` on `(0, 1)`.
    NormalizedExpm1,
    /// `t^alpha l_1(t)^beta` on `(0, 1)`; increasing when `beta < alpha`.
    PowerLog { alpha: f64, beta: f64 },
}

impl NumericMap {
    fn eval(&self, t: f64) -> f64 {
        match *self {
            NumericMap::TPlusTSquared => t + t * t,
            NumericMap::Log1p => t.ln_1p(),
            NumericMap::NormalizedExpm1 => t.exp_m1() / std::f64::consts::E.exp_m1(),
            NumericMap::PowerLog { alpha, beta } => t.powf(alpha) * (1.0 + t.ln().abs()).powf(beta),
        }
    }

    fn len(&self) -> f64 {
        match self {
            NumericMap::TPlusTSquared | NumericMap::Log1p => f64::INFINITY,
            NumericMap::NormalizedExpm1 | NumericMap::PowerLog { .. } => 1.0,
        }
    }
}

/// Increasing bijection of `(0, L)` onto itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Bijection {
    Power { alpha: f64 },
    /// `outer(inner(t))`.
    Composite { outer: Box<Bijection>, inner: Box<Bijection> },
    /// The inverse map.
    Inverse { of: Box<Bijection> },
    Numeric { map: NumericMap },
}

impl Bijection {
    pub fn identity() -> Self {
        Bijection::Power { alpha: 1.0 }
    }

    pub fn power(alpha: f64) -> Self {
        Bijection::Power { alpha }
    }

    pub fn numeric(map: NumericMap) -> Self {
        Bijection::Numeric { map }
    }

    pub fn compose(outer: Bijection, inner: Bijection) -> Self {
        Bijection::Composite { outer: Box::new(outer), inner: Box::new(inner) }
    }

    /// Exponent when the map is a pure power.
    pub fn as_power(&self) -> Option<f64> {
        match self {
            Bijection::Power { alpha } => Some(*alpha),
            Bijection::Composite { outer, inner } => Some(outer.as_power()? * inner.as_power()?),
            Bijection::Inverse { of } => Some(1.0 / of.as_power()?),
            Bijection::Numeric { .. } => None,
        }
    }

    /// Check that this is a bijection of `(0, len)`.
    pub fn validate(&self, len: f64) -> Result<()> {
        match self {
            Bijection::Power { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::InvalidSpec(format!("power bijection needs alpha > 0, got {alpha}")));
                }
                if *alpha != 1.0 && !(len == 1.0 || len.is_infinite()) {
                    return Err(Error::InvalidSpec(format!(
                        "t^{alpha} maps (0, {len}) onto itself only for L = 1 or L = inf"
                    )));
                }
                Ok(())
            }
            Bijection::Composite { outer, inner } => {
                outer.validate(len)?;
                inner.validate(len)
            }
            Bijection::Inverse { of } => of.validate(len),
            Bijection::Numeric { map } => {
                if map.len() != len {
                    return Err(Error::InvalidSpec(format!(
                        "numeric bijection {map:?} lives on (0, {}), not (0, {len})",
                        map.len()
                    )));
                }
                if let NumericMap::PowerLog { alpha, beta } = map {
                    if !(*alpha > 0.0 && beta < alpha) {
                        return Err(Error::InvalidSpec("power-log bijection needs alpha > 0 and beta < alpha".into()));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Bijection::Power { alpha } => {
                if *alpha == 1.0 {
                    t
                } else {
                    t.powf(*alpha)
                }
            }
            Bijection::Composite { outer, inner } => outer.eval(inner.eval(t)),
            Bijection::Inverse { of } => of.inverse(t),
            Bijection::Numeric { map } => map.eval(t),
        }
    }

    /// `nu^{-1}(y)`: exact for powers, monotone bisection otherwise.
    pub fn inverse(&self, y: f64) -> f64 {
        match self {
            Bijection::Power { alpha } => {
                if *alpha == 1.0 {
                    y
                } else {
                    y.powf(1.0 / alpha)
                }
            }
            Bijection::Composite { outer, inner } => inner.inverse(outer.inverse(y)),
            Bijection::Inverse { of } => of.eval(y),
            Bijection::Numeric { map } => bisect_inverse(|t| map.eval(t), y, map.len()),
        }
    }

    /// Domain-checked inverse.
    pub fn invert(&self, y: f64, len: f64) -> Result<f64> {
        if !(y > 0.0 && y < len) {
            return Err(Error::Domain(format!("{y} is not in (0, {len})")));
        }
        Ok(self.inverse(y))
    }

    pub fn inverse_map(&self) -> Bijection {
        match self {
            Bijection::Power { alpha } => Bijection::Power { alpha: 1.0 / alpha },
            Bijection::Inverse { of } => (**of).clone(),
            Bijection::Composite { outer, inner } => Bijection::Composite {
                outer: Box::new(inner.inverse_map()),
                inner: Box::new(outer.inverse_map()),
            },
            b @ Bijection::Numeric { .. } => Bijection::Inverse { of: Box::new(b.clone()) },
        }
    }

    /// Collapse chains of powers.
    pub fn simplified(&self) -> Bijection {
        match self.as_power() {
            Some(alpha) => Bijection::Power { alpha },
            None => self.clone(),
        }
    }
}

fn bisect_inverse(f: impl Fn(f64) -> f64, y: f64, len: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    // Bracket in log scale so tiny and huge targets converge equally fast.
    let mut hi = if len.is_finite() { len } else { y.max(1.0) };
    while f(hi) < y && hi.is_finite() {
        hi *= 2.0;
    }
    let mut lo = hi;
    let mut guard = 0;
    while f(lo) > y && guard < 4000 {
        lo *= 0.5;
        guard += 1;
    }
    if f(lo) == y {
        return lo;
    }
    for _ in 0..BISECTION_CAP {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if !(mid > lo && mid < hi) {
            break;
        }
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 0.25 * INVERT_REL * 1e-3 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------- weights

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    PowerLog(PowerLog),
    Tabulated(Table),
    /// `1 / \int_0^{nu^{-1}(t)} xi`.
    ReciprocalPrimitive { xi: Box<Weight>, nu: Bijection },
    Product(Box<Weight>, Box<Weight>),
    /// `1 / w(t)`.
    Reciprocal(Box<Weight>),
    /// `w(nu(t))`.
    Composed { w: Box<Weight>, nu: Bijection },
    /// `\int_0^t w`.
    Primitive(Box<Weight>),
    /// `left` on `(0, at)`, `right` on `[at, L)`.
    Split { at: f64, left: Box<Weight>, right: Box<Weight> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    pub kind: WeightKind,
    pub monotonicity: Monotonicity,
}

impl Weight {
    pub fn new(kind: WeightKind, monotonicity: Monotonicity) -> Result<Self> {
        match &kind {
            WeightKind::PowerLog(p) => p.validate()?,
            WeightKind::Tabulated(t) => t.validate()?,
            WeightKind::Split { at, .. } if !(*at > 0.0) => {
                return Err(Error::InvalidSpec("split point must be positive".into()))
            }
            _ => {}
        }
        Ok(Weight { kind, monotonicity })
    }

    /// `c t^a`, declared monotone according to the sign of `a`.
    pub fn power(c: f64, a: f64) -> Self {
        let m = if a <= 0.0 { Monotonicity::Nonincreasing } else { Monotonicity::Nondecreasing };
        Weight::new(WeightKind::PowerLog(PowerLog::power(c, a)), m).expect("power weight with c > 0")
    }

    pub fn constant(c: f64) -> Self {
        Weight::power(c, 0.0)
    }

    pub fn powerlog(c: f64, a: f64, b: Vec<f64>, monotonicity: Monotonicity) -> Result<Self> {
        Weight::new(WeightKind::PowerLog(PowerLog::new(c, a, b)?), monotonicity)
    }

    pub fn tabulated(points: Vec<[f64; 2]>, interp: Interp, monotonicity: Monotonicity) -> Result<Self> {
        Weight::new(WeightKind::Tabulated(Table { points, interp }), monotonicity)
    }

    /// `1 / \int_0^{nu^{-1}(t)} xi`; nonincreasing because its reciprocal is
    /// a nondecreasing primitive.
    pub fn reciprocal_primitive(xi: Weight, nu: Bijection) -> Self {
        Weight {
            kind: WeightKind::ReciprocalPrimitive { xi: Box::new(xi), nu },
            monotonicity: Monotonicity::Nonincreasing,
        }
    }

    pub fn product(a: Weight, b: Weight) -> Self {
        let m = Monotonicity::combine_product(a.monotonicity, b.monotonicity);
        Weight { kind: WeightKind::Product(Box::new(a), Box::new(b)), monotonicity: m }
    }

    pub fn reciprocal(w: Weight) -> Self {
        let m = match w.monotonicity {
            Monotonicity::Nonincreasing => Monotonicity::Nondecreasing,
            Monotonicity::Nondecreasing => Monotonicity::Nonincreasing,
            Monotonicity::None => Monotonicity::None,
        };
        Weight { kind: WeightKind::Reciprocal(Box::new(w)), monotonicity: m }
    }

    pub fn composed(w: Weight, nu: Bijection) -> Self {
        let m = w.monotonicity;
        Weight { kind: WeightKind::Composed { w: Box::new(w), nu }, monotonicity: m }
    }

    pub fn primitive_of(w: Weight) -> Self {
        Weight { kind: WeightKind::Primitive(Box::new(w)), monotonicity: Monotonicity::Nondecreasing }
    }

    pub fn split(at: f64, left: Weight, right: Weight, monotonicity: Monotonicity) -> Result<Self> {
        Weight::new(WeightKind::Split { at, left: Box::new(left), right: Box::new(right) }, monotonicity)
    }

    pub fn with_monotonicity(mut self, m: Monotonicity) -> Self {
        self.monotonicity = m;
        self
    }

    /// Closed power-log form when the algebra allows it.
    pub fn simplify(&self) -> Option<PowerLog> {
        match &self.kind {
            WeightKind::PowerLog(p) => Some(p.clone()),
            WeightKind::Tabulated(_) | WeightKind::Split { .. } => None,
            WeightKind::Product(x, y) => Some(x.simplify()?.mul(&y.simplify()?)),
            WeightKind::Reciprocal(w) => {
                let p = w.simplify()?;
                Some(PowerLog { c: 1.0 / p.c, a: -p.a, b: p.b.iter().map(|x| -x).collect() })
            }
            WeightKind::Composed { w, nu } => {
                let p = w.simplify()?;
                let alpha = nu.as_power()?;
                if !p.is_power() {
                    return None;
                }
                Some(PowerLog::power(p.c, p.a * alpha))
            }
            WeightKind::Primitive(w) => {
                let p = w.simplify()?;
                if !p.is_power() || p.a <= -1.0 {
                    return None;
                }
                Some(PowerLog::power(p.c / (p.a + 1.0), p.a + 1.0))
            }
            WeightKind::ReciprocalPrimitive { xi, nu } => {
                let p = xi.simplify()?;
                let alpha = nu.as_power()?;
                if !p.is_power() || p.a <= -1.0 {
                    return None;
                }
                let e = p.a + 1.0;
                Some(PowerLog::power(e / p.c, -e / alpha))
            }
        }
    }

    /// `(c, a)` when the weight is `c t^a`.
    pub fn as_power(&self) -> Option<(f64, f64)> {
        self.simplify().filter(|p| p.is_power()).map(|p| (p.c, p.a))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            WeightKind::PowerLog(p) => p.eval(t),
            WeightKind::Tabulated(tb) => tb.eval(t),
            WeightKind::Product(x, y) => x.eval(t) * y.eval(t),
            WeightKind::Reciprocal(w) => 1.0 / w.eval(t),
            WeightKind::Composed { w, nu } => w.eval(nu.eval(t)),
            WeightKind::Primitive(w) => w.integral(0.0, t).unwrap_or(f64::INFINITY),
            WeightKind::ReciprocalPrimitive { xi, nu } => {
                if let Some(p) = self.simplify() {
                    return p.eval(t);
                }
                match xi.integral(0.0, nu.inverse(t)) {
                    Ok(v) => 1.0 / v,
                    Err(_) => 0.0,
                }
            }
            WeightKind::Split { at, left, right } => {
                if t < *at {
                    left.eval(t)
                } else {
                    right.eval(t)
                }
            }
        }
    }

    /// Domain-checked evaluation.
    pub fn eval_checked(&self, t: f64, len: f64) -> Result<f64> {
        if !(t > 0.0 && t < len) {
            return Err(Error::Domain(format!("{t} is not in (0, {len})")));
        }
        Ok(self.eval(t))
    }

    /// Points where the weight may fail to be smooth.
    pub fn kinks(&self) -> Vec<f64> {
        let mut k = match &self.kind {
            WeightKind::PowerLog(p) => {
                if p.is_power() {
                    vec![]
                } else {
                    vec![1.0]
                }
            }
            WeightKind::Tabulated(tb) => tb.points.iter().map(|p| p[0]).filter(|&x| x > 0.0).collect(),
            WeightKind::Product(x, y) => {
                let mut v = x.kinks();
                v.extend(y.kinks());
                v
            }
            WeightKind::Composed { w, nu } => w.kinks().into_iter().map(|x| nu.inverse(x)).collect(),
            WeightKind::Primitive(w) | WeightKind::Reciprocal(w) => w.kinks(),
            WeightKind::ReciprocalPrimitive { xi, nu } => xi.kinks().into_iter().map(|x| nu.eval(x)).collect(),
            WeightKind::Split { at, left, right } => {
                let mut v = vec![*at];
                v.extend(left.kinks().into_iter().filter(|x| x < at));
                v.extend(right.kinks().into_iter().filter(|x| x > at));
                v
            }
        };
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    /// `\int_lo^hi w` for `0 <= lo <= hi <= inf`.
    pub fn integral(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(hi > lo) {
            return Ok(0.0);
        }
        if let Some(p) = self.simplify() {
            return p.integral(lo, hi);
        }
        match &self.kind {
            WeightKind::Tabulated(tb) => tb.integral(lo, hi),
            WeightKind::Split { at, left, right } => {
                let a = if lo < *at { left.integral(lo, hi.min(*at))? } else { 0.0 };
                let b = if hi > *at { right.integral(lo.max(*at), hi)? } else { 0.0 };
                Ok(a + b)
            }
            _ => self.numeric_integral(lo, hi),
        }
    }

    fn numeric_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        let f = |t: f64| self.eval(t);
        let r = quad::integrate_pieces(&f, lo, hi, &self.kinks(), Tol::rel(PRIMITIVE_REL));
        if r.converged && r.value.is_finite() {
            Ok(r.value)
        } else {
            Err(Error::Divergent(format!("quadrature of the weight on ({lo}, {hi}) did not converge")))
        }
    }

    /// `W(t) = \int_0^t w`.
    pub fn primitive(&self, t: f64) -> Result<f64> {
        self.integral(0.0, t)
    }

    /// `lim_{t -> 0+} w(t)`, possibly infinite.
    pub fn limit_at_zero(&self) -> f64 {
        if let Some(p) = self.simplify() {
            if p.a > 0.0 {
                return 0.0;
            }
            if p.a < 0.0 {
                return f64::INFINITY;
            }
            return match p.trimmed_b().first() {
                None => p.c,
                Some(&e) if e > 0.0 => f64::INFINITY,
                Some(&e) if e < 0.0 => 0.0,
                _ => p.c,
            };
        }
        match &self.kind {
            WeightKind::Tabulated(tb) => tb.eval(0.0),
            WeightKind::Split { left, .. } => left.limit_at_zero(),
            WeightKind::Primitive(_) => 0.0,
            _ => probe_limit_at_zero(|t| self.eval(t)),
        }
    }

    /// Probe the declared monotonicity on the geometric grid.
    pub fn verify_monotonicity(&self, len: f64) -> bool {
        let grid = probe_grid(len);
        let vals: Vec<f64> = grid.iter().map(|&t| self.eval(t)).collect();
        match self.monotonicity {
            Monotonicity::None => true,
            Monotonicity::Nonincreasing => {
                vals.windows(2).all(|w| w[1] <= w[0] * (1.0 + MONOTONE_SLACK) + f64::MIN_POSITIVE)
            }
            Monotonicity::Nondecreasing => {
                vals.windows(2).all(|w| w[1] >= w[0] * (1.0 - MONOTONE_SLACK))
            }
        }
    }
}

/// Limit at `0+` of a monotone-near-zero function from far-out probes.
pub fn probe_limit_at_zero(f: impl Fn(f64) -> f64) -> f64 {
    let a = f(1e-100);
    let b = f(1e-200);
    let c = f(1e-300);
    if !c.is_finite() {
        return f64::INFINITY;
    }
    let d1 = b - a;
    let d2 = c - b;
    if d1 > 1e-9 * a.abs().max(1e-300) && d2 >= 0.5 * d1 {
        // Still growing at least like a logarithm.
        return f64::INFINITY;
    }
    c
}

// ---------------------------------------------------------------- JSON

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct WeightRepr {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interp: Option<Interp>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<Box<Weight>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<Bijection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    factors: Option<Vec<Weight>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    w: Option<Box<Weight>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left: Option<Box<Weight>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right: Option<Box<Weight>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monotonicity: Option<Monotonicity>,
}

impl Serialize for Weight {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut r = WeightRepr { monotonicity: Some(self.monotonicity), ..Default::default() };
        match &self.kind {
            WeightKind::PowerLog(p) => {
                r.kind = "power_log".into();
                r.c = Some(p.c);
                r.a = Some(p.a);
                r.b = Some(p.b.clone());
            }
            WeightKind::Tabulated(t) => {
                r.kind = "tabulated".into();
                r.points = Some(t.points.clone());
                r.interp = Some(t.interp);
            }
            WeightKind::ReciprocalPrimitive { xi, nu } => {
                r.kind = "reciprocal_primitive".into();
                r.xi = Some(xi.clone());
                r.nu = Some(nu.clone());
            }
            WeightKind::Product(x, y) => {
                r.kind = "product".into();
                r.factors = Some(vec![(**x).clone(), (**y).clone()]);
            }
            WeightKind::Composed { w, nu } => {
                r.kind = "composed".into();
                r.w = Some(w.clone());
                r.nu = Some(nu.clone());
            }
            WeightKind::Primitive(w) => {
                r.kind = "primitive".into();
                r.w = Some(w.clone());
            }
            WeightKind::Reciprocal(w) => {
                r.kind = "reciprocal".into();
                r.w = Some(w.clone());
            }
            WeightKind::Split { at, left, right } => {
                r.kind = "split".into();
                r.at = Some(*at);
                r.left = Some(left.clone());
                r.right = Some(right.clone());
            }
        }
        r.serialize(s)
    }
}

fn need<T>(x: Option<T>, field: &str, kind: &str) -> Result<T> {
    x.ok_or_else(|| Error::InvalidSpec(format!("weight of kind {kind:?} requires field {field:?}")))
}

impl WeightRepr {
    fn into_weight(self) -> Result<Weight> {
        let k = self.kind.as_str();
        let declared = self.monotonicity;
        let w = match k {
            "power_log" | "power" => {
                let c = self.c.unwrap_or(1.0);
                let a = need(self.a, "a", k)?;
                let b = self.b.unwrap_or_default();
                let default = if b.iter().all(|&x| x == 0.0) {
                    if a <= 0.0 {
                        Monotonicity::Nonincreasing
                    } else {
                        Monotonicity::Nondecreasing
                    }
                } else {
                    Monotonicity::None
                };
                Weight::powerlog(c, a, b, declared.unwrap_or(default))?
            }
            "tabulated" => Weight::tabulated(
                need(self.points, "points", k)?,
                self.interp.unwrap_or(Interp::Step),
                declared.unwrap_or_default(),
            )?,
            "reciprocal_primitive" => {
                let w = Weight::reciprocal_primitive(*need(self.xi, "xi", k)?, need(self.nu, "nu", k)?);
                return Ok(match declared {
                    Some(m) => w.with_monotonicity(m),
                    None => w,
                });
            }
            "product" => {
                let mut fs = need(self.factors, "factors", k)?.into_iter();
                let first = fs.next().ok_or_else(|| Error::InvalidSpec("product needs factors".into()))?;
                let w = fs.fold(first, Weight::product);
                return Ok(match declared {
                    Some(m) => w.with_monotonicity(m),
                    None => w,
                });
            }
            "composed" => {
                let w = Weight::composed(*need(self.w, "w", k)?, need(self.nu, "nu", k)?);
                return Ok(match declared {
                    Some(m) => w.with_monotonicity(m),
                    None => w,
                });
            }
            "primitive" => Weight::primitive_of(*need(self.w, "w", k)?),
            "reciprocal" => Weight::reciprocal(*need(self.w, "w", k)?),
            "split" => Weight::split(
                need(self.at, "at", k)?,
                *need(self.left, "left", k)?,
                *need(self.right, "right", k)?,
                declared.unwrap_or_default(),
            )?,
            other => return Err(Error::InvalidSpec(format!("unknown weight kind {other:?}"))),
        };
        Ok(match declared {
            Some(m) => w.with_monotonicity(m),
            None => w,
        })
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        WeightRepr::deserialize(d)?.into_weight().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------- checkers

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Zero,
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Inf,
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Exact,
    Probed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub endpoint: Endpoint,
    pub mode: Mode,
    pub theta: f64,
    #[serde(with = "crate::serde_len")]
    pub estimate: f64,
    pub verdict: bool,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub lo: f64,
    pub hi: f64,
    pub per_decade: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    #[serde(with = "crate::serde_len")]
    pub constant_estimate: f64,
    pub grid: ProbeGrid,
    pub verdict: bool,
    pub confidence: Confidence,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Fit `y = A + B x` through the points and return `A`.
fn intercept(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return my;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    my - sxy / sxx * mx
}

/// Asymptotic liminf (or limsup) of `ratio(t)` as `t` approaches the endpoint:
/// per-decade extrema over the last decades, extrapolated linearly in
/// `1 / (1 + |log t|)` and capped by the observed extremes.
fn asymptotic_ratio(ratio: &dyn Fn(f64) -> f64, endpoint: Endpoint, mode: Mode, top: f64) -> f64 {
    let mut reps = Vec::new();
    let mut ext = Vec::new();
    for d in 0..DELTA_DECADES {
        let (lo, hi) = match endpoint {
            Endpoint::Zero => (top * 10f64.powi(-(d as i32) - 1), top * 10f64.powi(-(d as i32))),
            Endpoint::Infinity => (10f64.powi(d as i32), 10f64.powi(d as i32 + 1)),
        };
        let mut e: f64 = match mode {
            Mode::Inf => f64::INFINITY,
            Mode::Sup => 0.0,
        };
        for k in 0..PROBE_PER_DECADE {
            let t = lo * (hi / lo).powf(k as f64 / PROBE_PER_DECADE as f64);
            let r = ratio(t);
            e = match mode {
                Mode::Inf => e.min(r),
                Mode::Sup => e.max(r),
            };
        }
        reps.push((lo * hi).sqrt());
        ext.push(e);
    }
    let n = ext.len();
    let last = &ext[n - 3..];
    if last.iter().any(|v| !v.is_finite()) {
        return match mode {
            Mode::Inf => last.iter().copied().fold(f64::INFINITY, f64::min),
            Mode::Sup => f64::INFINITY,
        };
    }
    let xs: Vec<f64> = reps[n - 3..].iter().map(|t| 1.0 / (1.0 + t.ln().abs())).collect();
    let a = intercept(&xs, last);
    match mode {
        Mode::Inf => a.min(last.iter().copied().fold(f64::INFINITY, f64::min)),
        Mode::Sup => a.max(last.iter().copied().fold(0.0, f64::max)),
    }
}

/// Delta-class probe of `nu(theta t) / nu(t)` at an endpoint.
pub fn check_delta(nu: &Bijection, endpoint: Endpoint, mode: Mode, theta: f64, len: f64) -> Result<DeltaReport> {
    if !(theta > 1.0) {
        return Err(Error::InvalidSpec(format!("theta must exceed 1, got {theta}")));
    }
    if endpoint == Endpoint::Infinity && len.is_finite() {
        return Err(Error::Domain("the endpoint at infinity needs L = inf".into()));
    }
    let (estimate, confidence) = match nu.as_power() {
        Some(alpha) => (theta.powf(alpha), Confidence::Exact),
        None => {
            let top = if len.is_finite() { len / theta } else { 1.0 };
            let r = |t: f64| nu.eval(theta * t) / nu.eval(t);
            (asymptotic_ratio(&r, endpoint, mode, top), Confidence::Probed)
        }
    };
    let verdict = match mode {
        Mode::Inf => estimate > 1.0 + DELTA_INF_MARGIN,
        Mode::Sup => estimate.is_finite() && estimate < DELTA_SUP_CAP,
    };
    Ok(DeltaReport { endpoint, mode, theta, estimate, verdict, confidence })
}

/// `inf` or `sup` over the whole of `(0, range)` of `g(factor t) / g(t)`,
/// combining a dense probe with the asymptotic estimates at both ends.
pub fn global_ratio(g: &dyn Fn(f64) -> f64, factor: f64, range: f64, mode: Mode) -> f64 {
    let top = if range.is_finite() { range } else { 1.0 };
    let r = |t: f64| g(factor * t) / g(t);
    let mut acc = asymptotic_ratio(&r, Endpoint::Zero, mode, top);
    let pick = |a: f64, b: f64| match mode {
        Mode::Inf => a.min(b),
        Mode::Sup => a.max(b),
    };
    let hi = if range.is_finite() { range } else { 1e12 };
    for t in geometric_grid(top * 1e-12, hi, PROBE_PER_DECADE, f64::INFINITY) {
        if t < range {
            acc = pick(acc, r(t));
        }
    }
    if range.is_infinite() {
        acc = pick(acc, asymptotic_ratio(&r, Endpoint::Infinity, mode, 1.0));
    }
    acc
}

/// Averaging constant `sup (1 / (t w(t))) \int_0^t w`.
pub fn check_averaging(w: &Weight, len: f64) -> AveragingReport {
    let grid_pts = probe_grid(len);
    let grid = ProbeGrid {
        lo: PROBE_LO,
        hi: grid_pts.last().copied().unwrap_or(PROBE_HI),
        per_decade: PROBE_PER_DECADE,
        points: grid_pts.len(),
    };
    if let Some((_, a)) = w.as_power() {
        let beta = a + 1.0;
        return if beta > 0.0 {
            AveragingReport { constant_estimate: 1.0 / beta, grid, verdict: true, confidence: Confidence::Exact, reason: None }
        } else {
            AveragingReport {
                constant_estimate: f64::INFINITY,
                grid,
                verdict: false,
                confidence: Confidence::Exact,
                reason: Some(format!("t^{a} is not integrable near 0")),
            }
        };
    }
    let mut acc = match w.primitive(grid_pts[0]) {
        Ok(v) => v,
        Err(e) => {
            return AveragingReport {
                constant_estimate: f64::INFINITY,
                grid,
                verdict: false,
                confidence: Confidence::Probed,
                reason: Some(e.to_string()),
            }
        }
    };
    let mut best: f64 = 0.0;
    let mut prev = grid_pts[0];
    for &t in &grid_pts {
        if t > prev {
            match w.integral(prev, t) {
                Ok(v) => acc += v,
                Err(e) => {
                    return AveragingReport {
                        constant_estimate: f64::INFINITY,
                        grid,
                        verdict: false,
                        confidence: Confidence::Probed,
                        reason: Some(e.to_string()),
                    }
                }
            }
            prev = t;
        }
        let wt = w.eval(t);
        let r = if wt > 0.0 { acc / (t * wt) } else { f64::INFINITY };
        best = best.max(r);
    }
    AveragingReport {
        constant_estimate: best,
        grid,
        verdict: best.is_finite(),
        confidence: Confidence::Probed,
        reason: if best.is_finite() { None } else { Some("weight vanishes on the probe grid".into()) },
    }
}

/// Nondecreasing with `psi(t) / t` nonincreasing.
pub fn check_quasiconcave(psi: &Weight, len: f64) -> bool {
    if let Some((_, a)) = psi.as_power() {
        return (0.0..=1.0).contains(&a);
    }
    let grid = probe_grid(len);
    let vals: Vec<f64> = grid.iter().map(|&t| psi.eval(t)).collect();
    let up = vals.windows(2).all(|w| w[1] >= w[0] * (1.0 - MONOTONE_SLACK));
    let down = grid
        .windows(2)
        .zip(vals.windows(2))
        .all(|(t, v)| v[1] / t[1] <= v[0] / t[0] * (1.0 + MONOTONE_SLACK));
    up && down
}

/// `0 < U(t_0) < inf` for some probe point.
pub fn check_nondegenerate(u: &Weight, len: f64) -> bool {
    let grid = geometric_grid(PROBE_LO, PROBE_HI.min(len), 1, len);
    grid.iter().any(|&t| matches!(u.primitive(t), Ok(v) if v > 0.0 && v.is_finite()))
}
