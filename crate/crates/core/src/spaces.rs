//! Rearrangement-invariant norms.
//!
//! `L^p`, `Lambda^1_w` (`\int f* w`), `M_psi` (`sup psi f**`), intersections
//! (max) and sums (min over clippings `f = (f - c)_+ + min(f, c)`, an upper
//! bound for the true infimum). Norms of step functions are exact up to the
//! weights' primitives; norms of [`Profile`]s use quadrature and fall back to
//! sampling onto a step function when the profile is not known to be
//! nonincreasing.

use crate::error::{Error, Result};
use crate::functions::StepFunction;
use crate::operators::{sample_to_step, Profile, WeightOn};
use crate::quad::{self, Tol};
use crate::tolerances::*;
use crate::weights::{check_quasiconcave, geometric_grid, Bijection, Monotonicity, Weight};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SpaceSpec {
    Lebesgue {
        #[serde(with = "crate::serde_len")]
        p: f64,
    },
    LambdaOne {
        w: Weight,
    },
    Marcinkiewicz {
        psi: Weight,
    },
    Intersection {
        left: Box<SpaceSpec>,
        right: Box<SpaceSpec>,
    },
    Sum {
        left: Box<SpaceSpec>,
        right: Box<SpaceSpec>,
    },
}

/// A norm value; infinity means "not in the space".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormValue {
    Finite(f64),
    Infinite,
}

impl NormValue {
    pub fn from_f64(x: f64) -> Self {
        if x.is_finite() {
            NormValue::Finite(x)
        } else {
            NormValue::Infinite
        }
    }

    pub fn value(self) -> f64 {
        match self {
            NormValue::Finite(x) => x,
            NormValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, NormValue::Finite(_))
    }
}

impl Serialize for NormValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::serde_len::serialize(&self.value(), s)
    }
}

impl<'de> Deserialize<'de> for NormValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        crate::serde_len::deserialize(d).map(NormValue::from_f64)
    }
}

impl SpaceSpec {
    pub fn lebesgue(p: f64) -> Self {
        SpaceSpec::Lebesgue { p }
    }

    pub fn lambda(w: Weight) -> Self {
        SpaceSpec::LambdaOne { w }
    }

    pub fn marcinkiewicz(psi: Weight) -> Self {
        SpaceSpec::Marcinkiewicz { psi }
    }

    pub fn intersection(a: SpaceSpec, b: SpaceSpec) -> Self {
        SpaceSpec::Intersection { left: Box::new(a), right: Box::new(b) }
    }

    pub fn sum(a: SpaceSpec, b: SpaceSpec) -> Self {
        SpaceSpec::Sum { left: Box::new(a), right: Box::new(b) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceSpec::Lebesgue { p } if !(*p >= 1.0) => {
                Err(Error::InvalidSpec(format!("Lebesgue exponent must be in [1, inf], got {p}")))
            }
            SpaceSpec::Intersection { left, right } | SpaceSpec::Sum { left, right } => {
                left.validate()?;
                right.validate()
            }
            _ => Ok(()),
        }
    }

    /// Admissibility checks on `(0, len)`: `V(t)/t` quasi-decreasing for
    /// `Lambda^1_w` and quasiconcavity for `M_psi`.
    pub fn admissibility(&self, len: f64) -> Vec<(String, bool)> {
        match self {
            SpaceSpec::Lebesgue { .. } => vec![],
            SpaceSpec::LambdaOne { w } => {
                let c = lambda_admissibility_constant(w, len);
                vec![(format!("Lambda^1 admissible (constant {c})"), c.is_finite() && c < DELTA_SUP_CAP)]
            }
            SpaceSpec::Marcinkiewicz { psi } => vec![("psi quasiconcave".into(), check_quasiconcave(psi, len))],
            SpaceSpec::Intersection { left, right } | SpaceSpec::Sum { left, right } => {
                let mut v = left.admissibility(len);
                v.extend(right.admissibility(len));
                v
            }
        }
    }
}

/// `sup_{s < t} (V(t)/t) / (V(s)/s)` on the probe grid.
pub fn lambda_admissibility_constant(w: &Weight, len: f64) -> f64 {
    let grid = crate::weights::probe_grid(len);
    let mut best_min = f64::INFINITY;
    let mut worst: f64 = 1.0;
    let mut acc = match w.primitive(grid[0]) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let mut prev = grid[0];
    for &t in &grid {
        if t > prev {
            match w.integral(prev, t) {
                Ok(v) => acc += v,
                Err(_) => return f64::INFINITY,
            }
            prev = t;
        }
        let r = acc / t;
        if best_min.is_finite() && best_min > 0.0 {
            worst = worst.max(r / best_min);
        }
        best_min = best_min.min(r);
    }
    worst
}

// ---------------------------------------------------------------- step norms

fn lambda_norm(w: &Weight, f: &StepFunction) -> NormValue {
    let mut s = 0.0;
    let mut x = 0.0;
    for (v, m) in f.levels() {
        match w.integral(x, x + m) {
            Ok(i) => s += v * i,
            Err(_) => return NormValue::Infinite,
        }
        x += m;
    }
    NormValue::from_f64(s)
}

/// `sup_t psi(t) f**(t)` over the breakpoints of `f**`, the kinks of `psi`
/// and (for non-power `psi`) a probe grid with golden-section refinement.
fn marcinkiewicz_norm(psi: &Weight, f: &StepFunction) -> NormValue {
    let fstar = f.rearrange();
    if fstar.is_zero() {
        return NormValue::Finite(0.0);
    }
    let len = f.domain_length();
    let total = fstar.integral();
    let g = |t: f64| psi.eval(t) * fstar.double_star(t);
    let mut best: f64 = 0.0;
    // t -> 0+: psi(0+) f*(0+).
    let p0 = psi.limit_at_zero();
    if p0 > 0.0 {
        best = best.max(p0 * fstar.sup());
    }
    // t -> L: psi(t) total / t.
    let end = if len.is_finite() {
        psi.eval(len.next_down()) * total / len
    } else {
        let far = 1e100 * fstar.support_bound().max(1.0);
        psi.eval(far) * total / far
    };
    best = best.max(end);
    let mut cands: Vec<f64> = fstar.knots()[1..].to_vec();
    cands.extend(psi.kinks().into_iter().filter(|&k| k < len));
    let power = psi.as_power().is_some();
    if !power {
        let lo = fstar.knots()[1] * 1e-9;
        let hi = if len.is_finite() { len } else { fstar.support_bound() * 1e9 };
        cands.extend(geometric_grid(lo, hi, PROBE_PER_DECADE / 4, len));
    }
    cands.retain(|&t| t > 0.0 && t < len);
    cands.sort_by(f64::total_cmp);
    let vals: Vec<f64> = cands.iter().map(|&t| g(t)).collect();
    for &v in &vals {
        best = best.max(v);
    }
    if !power && !vals.is_empty() {
        let (i, _) = vals.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        let a = if i > 0 { cands[i - 1] } else { cands[i] * 0.5 };
        let b = if i + 1 < cands.len() { cands[i + 1] } else { (cands[i] * 2.0).min(len.next_down()) };
        best = best.max(golden_max(&|s: f64| g(s.exp()), a.ln(), b.ln()));
    }
    NormValue::from_f64(best)
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// `min(f, c)` and `(f - c)_+`.
fn clip(f: &StepFunction, c: f64) -> (StepFunction, StepFunction) {
    (f.clip_above(c), f.excess(c))
}

/// `min_c F(c)` over the levels of `f*` plus a 64-point refinement around
/// the best level.
fn min_over_clips(f: &StepFunction, cost: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let mut cs: Vec<f64> = vec![0.0];
    cs.extend(f.levels().iter().rev().map(|l| l.0));
    cs.dedup();
    let vals: Vec<f64> = cs.iter().map(|&c| cost(c)).collect();
    let (mut bi, mut bv) = (0, f64::INFINITY);
    for (i, &v) in vals.iter().enumerate() {
        if v < bv {
            bi = i;
            bv = v;
        }
    }
    let mut best_c = cs[bi];
    let lo = if bi > 0 { cs[bi - 1] } else { cs[0] };
    let hi = if bi + 1 < cs.len() { cs[bi + 1] } else { cs[bi] };
    for k in 0..=64 {
        let c = lo + (hi - lo) * k as f64 / 64.0;
        let v = cost(c);
        if v < bv {
            bv = v;
            best_c = c;
        }
    }
    (bv, best_c)
}

pub fn norm(x: &SpaceSpec, f: &StepFunction) -> Result<NormValue> {
    Ok(match x {
        SpaceSpec::Lebesgue { p } => NormValue::from_f64(f.lp_norm(*p)),
        SpaceSpec::LambdaOne { w } => lambda_norm(w, f),
        SpaceSpec::Marcinkiewicz { psi } => marcinkiewicz_norm(psi, f),
        SpaceSpec::Intersection { left, right } => {
            NormValue::from_f64(norm(left, f)?.value().max(norm(right, f)?.value()))
        }
        SpaceSpec::Sum { left, right } => {
            if f.is_zero() {
                return Ok(NormValue::Finite(0.0));
            }
            let cost = |c: f64, peaks: &SpaceSpec, body: &SpaceSpec| {
                let (low, high) = clip(f, c);
                let a = norm(peaks, &high).map_or(f64::INFINITY, |n| n.value());
                let b = norm(body, &low).map_or(f64::INFINITY, |n| n.value());
                a + b
            };
            let (a, _) = min_over_clips(f, &|c| cost(c, left, right));
            let (b, _) = min_over_clips(f, &|c| cost(c, right, left));
            NormValue::from_f64(a.min(b))
        }
    })
}

/// `norm(X, chi_(0,t))`.
pub fn fundamental_function(x: &SpaceSpec, t: f64, len: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    if t > len {
        return Err(Error::Domain(format!("{t} exceeds the domain length {len}")));
    }
    Ok(norm(x, &StepFunction::indicator(len, 0.0, t, 1.0)?)?.value())
}

/// The analytic associate space.
pub fn associate_space(x: &SpaceSpec) -> Result<SpaceSpec> {
    Ok(match x {
        SpaceSpec::Lebesgue { p } => {
            let q = if *p == 1.0 {
                f64::INFINITY
            } else if p.is_infinite() {
                1.0
            } else {
                p / (p - 1.0)
            };
            SpaceSpec::Lebesgue { p: q }
        }
        SpaceSpec::LambdaOne { w } => {
            // psi(t) = t / W(t).
            let recip = Weight::reciprocal_primitive(w.clone(), Bijection::identity());
            let psi = Weight::product(Weight::power(1.0, 1.0), recip).with_monotonicity(Monotonicity::Nondecreasing);
            SpaceSpec::Marcinkiewicz { psi }
        }
        SpaceSpec::Marcinkiewicz { .. } => {
            return Err(Error::UnsupportedDual(
                "the associate of a Marcinkiewicz norm has no closed form here; use associate_norm_lower".into(),
            ))
        }
        SpaceSpec::Intersection { left, right } => SpaceSpec::sum(associate_space(left)?, associate_space(right)?),
        SpaceSpec::Sum { left, right } => SpaceSpec::intersection(associate_space(left)?, associate_space(right)?),
    })
}

// ---------------------------------------------------------------- profiles

/// How a profile norm was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    Quadrature,
    Sampled { grid_points: usize },
}

/// Local power exponent of a profile at `0+` from far-out probes.
fn exponent_at_zero(p: &dyn Fn(f64) -> f64) -> Option<f64> {
    let (a, b) = (p(1e-100), p(1e-200));
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Some((b.ln() - a.ln()) / (-200.0 - -100.0) / std::f64::consts::LN_10)
    } else {
        None
    }
}

fn exponent_at_infinity(p: &dyn Fn(f64) -> f64) -> Option<f64> {
    let (a, b) = (p(1e100), p(1e200));
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Some((b.ln() - a.ln()) / (100.0 * std::f64::consts::LN_10))
    } else if a == 0.0 && b == 0.0 {
        Some(f64::NEG_INFINITY)
    } else {
        None
    }
}

/// `\int_0^E p(t) w(t) dt` with divergence detection at both ends, where
/// `E` is the profile's support end.
fn profile_integral<P: Profile + ?Sized>(p: &P, w: &dyn Fn(f64) -> f64, pw: f64) -> Option<f64> {
    let end = p.support_end().min(p.domain_length());
    if end <= 0.0 {
        return Some(0.0);
    }
    let h = |t: f64| {
        let x = p.eval(t);
        if x == 0.0 {
            0.0
        } else {
            x.powf(pw) * w(t)
        }
    };
    if !h(1e-300).is_finite() {
        return None;
    }
    if let Some(e) = exponent_at_zero(&h) {
        if e <= -1.0 + 1e-9 {
            return None;
        }
    }
    if end.is_infinite() {
        if let Some(e) = exponent_at_infinity(&h) {
            if e >= -1.0 - 1e-9 {
                return None;
            }
        }
    }
    let mut cuts = p.kinks();
    cuts.retain(|&c| c > 0.0 && c < end);
    let r = quad::integrate_pieces(&h, 0.0, end, &cuts, Tol::rel(PROFILE_REL));
    if r.value.is_finite() {
        Some(r.value)
    } else {
        None
    }
}

/// `lim_{t -> 0+}` of a nonincreasing profile.
fn limit_at_zero<P: Profile + ?Sized>(p: &P) -> f64 {
    crate::weights::probe_limit_at_zero(|t| p.eval(t))
}

/// Sampling grid for a profile: geometric, `n` points up to the support end
/// (or `1e6` past the last kink when unbounded), plus the kinks.
pub fn profile_grid<P: Profile + ?Sized>(p: &P, n: usize) -> Vec<f64> {
    let len = p.domain_length();
    let kinks = p.kinks();
    let end = p.support_end().min(len);
    let hi = if end.is_finite() { end } else { 1e6 * kinks.last().copied().unwrap_or(1.0).max(1.0) };
    let mut g = crate::operators::sampling_grid(hi, n);
    g.extend(kinks.into_iter().filter(|&k| k > 0.0 && k < hi));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

pub fn norm_profile<P: Profile + ?Sized>(x: &SpaceSpec, p: &P) -> Result<NormValue> {
    norm_profile_with(x, p, DEFAULT_GRID).map(|r| r.0)
}

/// Norm of a profile together with the method used.
pub fn norm_profile_with<P: Profile + ?Sized>(x: &SpaceSpec, p: &P, grid: usize) -> Result<(NormValue, NormMethod)> {
    let mono = p.monotonicity() == Monotonicity::Nonincreasing;
    let sampled = |x: &SpaceSpec| -> Result<(NormValue, NormMethod)> {
        let step = sample_to_step(p, &profile_grid(p, grid))?;
        Ok((norm(x, &step)?, NormMethod::Sampled { grid_points: grid }))
    };
    match x {
        SpaceSpec::Lebesgue { p: q } if q.is_infinite() => {
            if mono {
                return Ok((NormValue::from_f64(limit_at_zero(p)), NormMethod::Quadrature));
            }
            let g = profile_grid(p, grid);
            let mut m: f64 = limit_at_zero(p);
            for &t in &g {
                m = m.max(p.eval(t));
                m = m.max(p.eval(t.next_down()));
            }
            Ok((NormValue::from_f64(m), NormMethod::Sampled { grid_points: grid }))
        }
        SpaceSpec::Lebesgue { p: q } => {
            let v = profile_integral(p, &|_| 1.0, *q);
            Ok((NormValue::from_f64(v.map_or(f64::INFINITY, |v| v.powf(1.0 / q))), NormMethod::Quadrature))
        }
        SpaceSpec::LambdaOne { w } if mono => {
            let v = profile_integral(p, &|t| w.eval(t), 1.0);
            Ok((NormValue::from_f64(v.unwrap_or(f64::INFINITY)), NormMethod::Quadrature))
        }
        SpaceSpec::Marcinkiewicz { psi } if mono => Ok((marcinkiewicz_profile(psi, p), NormMethod::Quadrature)),
        SpaceSpec::Intersection { left, right } => {
            let (a, ma) = norm_profile_with(left, p, grid)?;
            let (b, mb) = norm_profile_with(right, p, grid)?;
            let m = if matches!(ma, NormMethod::Sampled { .. }) { ma } else { mb };
            Ok((NormValue::from_f64(a.value().max(b.value())), m))
        }
        _ => sampled(x),
    }
}

/// `sup psi(t) P**(t)` for a nonincreasing profile, with `\int_0^t P`
/// accumulated piecewise on a geometric grid.
fn marcinkiewicz_profile<P: Profile + ?Sized>(psi: &Weight, p: &P) -> NormValue {
    let g = profile_grid(p, DEFAULT_GRID / 4);
    let f = |t: f64| p.eval(t);
    let mut acc = match quad::integrate(&f, 0.0, g[0], Tol::rel(PROFILE_REL)) {
        r if r.value.is_finite() => r.value,
        _ => return NormValue::Infinite,
    };
    let mut best = psi.limit_at_zero() * limit_at_zero(p);
    if best.is_nan() {
        best = 0.0;
    }
    best = best.max(psi.eval(g[0]) * acc / g[0]);
    for w in g.windows(2) {
        acc += quad::gk_finite(&f, w[0], w[1], Tol::rel(PROFILE_REL)).value;
        best = best.max(psi.eval(w[1]) * acc / w[1]);
    }
    NormValue::from_f64(best)
}

// ---------------------------------------------------------------- associate norms

/// Lower estimate of `||f||_{X'}` with its witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociateEstimate {
    pub lower: f64,
    /// Closed-form value through [`associate_space`], when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    pub witness: StepFunction,
    pub iterations: usize,
}

fn pairing_ratio(x: &SpaceSpec, fstar: &StepFunction, g: &StepFunction) -> f64 {
    let n = norm(x, g).map_or(f64::INFINITY, |n| n.value());
    if !(n > 0.0) || !n.is_finite() {
        return 0.0;
    }
    fstar.inner(g) / n
}

/// `sup { \int f* g : g nonincreasing step, ||g||_X <= 1 }` from below:
/// indicator and power candidates, then coordinate ascent on the levels of
/// `g = sum_k w_k chi_(0, b_k)` for `budget` sweeps.
pub fn associate_norm_lower(x: &SpaceSpec, f: &StepFunction, budget: usize) -> Result<AssociateEstimate> {
    let len = f.domain_length();
    let fstar = f.rearrange();
    let exact = associate_space(x).ok().and_then(|y| norm(&y, f).ok()).map(|n| n.value());
    if fstar.is_zero() {
        return Ok(AssociateEstimate { lower: 0.0, exact, witness: StepFunction::zero(len), iterations: 0 });
    }
    let mut bs: Vec<f64> = fstar.knots()[1..].to_vec();
    let s = fstar.support_bound();
    for k in 1..8 {
        bs.push(s * k as f64 / 8.0);
    }
    bs.sort_by(f64::total_cmp);
    bs.dedup();
    let build = |w: &[f64]| -> StepFunction {
        // sum_k w_k chi_(0, b_k) as cells.
        let mut vals = vec![0.0; bs.len()];
        let mut acc = 0.0;
        for k in (0..bs.len()).rev() {
            acc += w[k];
            vals[k] = acc;
        }
        let mut knots = vec![0.0];
        knots.extend(bs.iter().copied());
        StepFunction::new(len, knots, vals).expect("valid candidate")
    };
    let mut best_w = vec![0.0; bs.len()];
    let mut best = 0.0;
    let try_w = |w: Vec<f64>, best: &mut f64, best_w: &mut Vec<f64>| {
        let r = pairing_ratio(x, &fstar, &build(&w));
        if r > *best {
            *best = r;
            *best_w = w;
        }
    };
    for k in 0..bs.len() {
        let mut w = vec![0.0; bs.len()];
        w[k] = 1.0;
        try_w(w, &mut best, &mut best_w);
    }
    for r in [0.25, 0.5, 1.0, 2.0, 3.0] {
        // g = (f*)^r expressed in the level basis.
        let vals: Vec<f64> = bs.iter().map(|&b| fstar.eval(b.next_down()).powf(r)).collect();
        let mut w = vec![0.0; bs.len()];
        for k in 0..bs.len() {
            w[k] = vals[k] - vals.get(k + 1).copied().unwrap_or(0.0);
        }
        try_w(w.into_iter().map(|x| x.max(0.0)).collect(), &mut best, &mut best_w);
    }
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < budget && step > 1e-6 {
        let mut improved = false;
        for k in 0..bs.len() {
            let scale: f64 = best_w.iter().sum::<f64>().max(1e-300);
            for d in [step, -step] {
                let mut w = best_w.clone();
                w[k] = (w[k] + d * scale).max(0.0);
                let before = best;
                try_w(w, &mut best, &mut best_w);
                if best > before * (1.0 + 1e-14) {
                    improved = true;
                }
            }
        }
        iterations += 1;
        if !improved {
            step *= 0.5;
        }
    }
    let witness = build(&best_w);
    let n = norm(x, &witness)?.value();
    Ok(AssociateEstimate { lower: best, exact, witness: witness.scale(1.0 / n), iterations })
}

// ---------------------------------------------------------------- K-functional

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KValue {
    /// `\int_0^{Xi^{-1}(t)} f* xi`.
    pub formula: f64,
    /// `min_c ||(f* - c)_+||_{Lambda^1_xi} + t min(c, f*(0+))` over clippings.
    pub oracle: f64,
    pub best_clip: f64,
}

/// `Xi^{-1}(t)` for `Xi(s) = \int_0^s xi`.
fn primitive_inverse(xi: &Weight, t: f64, len: f64) -> Result<f64> {
    if let Some((c, a)) = xi.as_power() {
        if a > -1.0 {
            return Ok((t * (a + 1.0) / c).powf(1.0 / (a + 1.0)));
        }
    }
    let prim = |s: f64| xi.primitive(s).unwrap_or(f64::INFINITY);
    let mut hi = if len.is_finite() { len } else { 1.0 };
    while prim(hi) < t && hi.is_finite() {
        hi *= 2.0;
    }
    let mut lo = hi;
    while prim(lo) > t && lo > 1e-300 {
        lo *= 0.5;
    }
    for _ in 0..BISECTION_CAP {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        if prim(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `K(f, t; Lambda^1_xi, L^inf)`: the closed formula and the clipping oracle.
pub fn k_functional(f: &StepFunction, t: f64, xi: &Weight) -> Result<KValue> {
    let len = f.domain_length();
    let xi_l = if len.is_finite() { xi.primitive(len)? } else { xi.integral(0.0, f64::INFINITY).unwrap_or(f64::INFINITY) };
    if !(t > 0.0) || t >= xi_l {
        return Err(Error::Domain(format!("t = {t} must lie in (0, {xi_l})")));
    }
    let fstar = f.rearrange();
    let s = primitive_inverse(xi, t, len)?;
    let formula = lambda_norm(xi, &fstar.truncate(s)).value();
    let sup = fstar.sup();
    let lam = SpaceSpec::lambda(xi.clone());
    let cost = |c: f64| {
        let peaks = fstar.excess(c);
        norm(&lam, &peaks).map_or(f64::INFINITY, |n| n.value()) + t * c.min(sup)
    };
    let (oracle, best_clip) = min_over_clips(&fstar, &cost);
    Ok(KValue { formula, oracle, best_clip })
}

/// Convenience: a weight as a profile on `(0, len)`.
pub fn weight_profile(w: &Weight, len: f64) -> WeightOn {
    WeightOn { w: w.clone(), len }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::Interp;

    const INF: f64 = f64::INFINITY;

    fn chi(len: f64, a: f64, b: f64) -> StepFunction {
        StepFunction::indicator(len, a, b, 1.0).unwrap()
    }

    #[test]
    fn norm_examples() {
        let f = chi(INF, 0.0, 4.0);
        assert_eq!(norm(&SpaceSpec::lebesgue(2.0), &f).unwrap(), NormValue::Finite(2.0));
        let l = SpaceSpec::lambda(Weight::power(1.0, -0.5));
        assert_eq!(norm(&l, &f).unwrap(), NormValue::Finite(4.0));
        let m = SpaceSpec::marcinkiewicz(Weight::power(1.0, 0.5));
        assert_eq!(norm(&m, &f).unwrap(), NormValue::Finite(2.0));
        let l = SpaceSpec::lambda(Weight::power(1.0, -1.0));
        assert_eq!(norm(&l, &f).unwrap(), NormValue::Infinite);
    }

    #[test]
    fn marcinkiewicz_with_tabulated_psi() {
        let psi = Weight::tabulated(vec![[0.0, 0.0], [1.0, 1.0]], Interp::Linear, Monotonicity::Nondecreasing).unwrap();
        let m = SpaceSpec::marcinkiewicz(psi);
        // sup min(1, t) * min(1, 3/t) = 1 at t = 1..3 for chi_(0,3).
        let n = norm(&m, &chi(INF, 0.0, 3.0)).unwrap().value();
        assert!((n - 1.0).abs() < 1e-12);
        assert_eq!(fundamental_function(&m, 0.5, INF).unwrap(), 0.5);
    }

    #[test]
    fn sums_and_intersections() {
        let l1 = SpaceSpec::lebesgue(1.0);
        let linf = SpaceSpec::lebesgue(INF);
        let f = StepFunction::from_levels(INF, &[(5.0, 0.5), (2.0, 1.0), (1.0, 3.0)]).unwrap();
        let s = norm(&SpaceSpec::sum(l1.clone(), linf.clone()), &f).unwrap().value();
        // ||f||_{L^1 + L^inf} = \int_0^1 f* = 2.5 + 1.0.
        assert!((s - 3.5).abs() < 1e-12, "{s}");
        let i = norm(&SpaceSpec::intersection(l1, linf), &f).unwrap().value();
        assert_eq!(i, 7.5);
    }

    #[test]
    fn associate_examples() {
        assert_eq!(associate_space(&SpaceSpec::lebesgue(2.0)).unwrap(), SpaceSpec::lebesgue(2.0));
        assert_eq!(associate_space(&SpaceSpec::lebesgue(1.0)).unwrap(), SpaceSpec::lebesgue(INF));
        let dual = associate_space(&SpaceSpec::lambda(Weight::constant(1.0))).unwrap();
        // psi = t / t = 1: the associate of L^1 is L^inf.
        for f in [chi(INF, 0.0, 2.0), StepFunction::from_levels(INF, &[(3.0, 0.5), (1.0, 2.0)]).unwrap()] {
            let a = norm(&dual, &f).unwrap().value();
            assert!((a - f.sup()).abs() < 1e-12);
        }
        let d = associate_space(&SpaceSpec::intersection(SpaceSpec::lebesgue(1.0), SpaceSpec::lebesgue(INF))).unwrap();
        assert_eq!(d, SpaceSpec::sum(SpaceSpec::lebesgue(INF), SpaceSpec::lebesgue(1.0)));
        assert!(matches!(
            associate_space(&SpaceSpec::marcinkiewicz(Weight::power(1.0, 0.5))),
            Err(Error::UnsupportedDual(_))
        ));
    }

    #[test]
    fn associate_lower_examples() {
        let e = associate_norm_lower(&SpaceSpec::lebesgue(2.0), &chi(1.0, 0.0, 1.0), 500).unwrap();
        assert!(e.lower >= 0.99 && e.lower <= 1.0 + 1e-12);
        let z = associate_norm_lower(&SpaceSpec::lebesgue(2.0), &StepFunction::zero(1.0), 10).unwrap();
        assert_eq!(z.lower, 0.0);
        let x = SpaceSpec::lambda(Weight::power(1.0, -0.5));
        let e = associate_norm_lower(&x, &chi(1.0, 0.0, 1.0), 200).unwrap();
        let exact = e.exact.unwrap();
        assert!((exact - 0.5).abs() < 1e-12);
        assert!(e.lower <= exact * (1.0 + 1e-12) && e.lower >= 0.95 * exact);
    }

    #[test]
    fn fundamental_identity_lp() {
        for p in [1.0, 1.5, 2.0, 3.0, INF] {
            let x = SpaceSpec::lebesgue(p);
            let y = associate_space(&x).unwrap();
            for t in [0.1, 1.0, 7.0] {
                let prod = fundamental_function(&x, t, INF).unwrap() * fundamental_function(&y, t, INF).unwrap();
                assert!((prod - t).abs() <= 1e-12 * t);
            }
        }
    }

    #[test]
    fn k_functional_examples() {
        let one = Weight::constant(1.0);
        let k = k_functional(&chi(INF, 0.0, 2.0), 1.0, &one).unwrap();
        assert!((k.formula - 1.0).abs() < 1e-15 && (k.oracle - 1.0).abs() < 1e-15);
        let f = StepFunction::from_levels(INF, &[(2.0, 1.0), (1.0, 1.0)]).unwrap();
        let k = k_functional(&f, 1.0, &one).unwrap();
        let r = k.formula / k.oracle;
        assert!((0.25..=4.0).contains(&r));
        let k = k_functional(&f, 1e-12, &one).unwrap();
        assert!(k.formula < 1e-11 && k.oracle < 1e-11);
        assert!(k_functional(&chi(1.0, 0.0, 1.0), 1.0, &one).is_err());
    }

    #[test]
    fn profile_norms() {
        // t^{-1/2} on (0, 1): L^1 = 2, L^2 infinite.
        let w = weight_profile(&Weight::power(1.0, -0.5), 1.0);
        let n1 = norm_profile(&SpaceSpec::lebesgue(1.0), &w).unwrap().value();
        assert!((n1 - 2.0).abs() < 1e-9);
        assert_eq!(norm_profile(&SpaceSpec::lebesgue(2.0), &w).unwrap(), NormValue::Infinite);
        assert_eq!(norm_profile(&SpaceSpec::lebesgue(INF), &w).unwrap(), NormValue::Infinite);
        let one = weight_profile(&Weight::constant(1.0), 1.0);
        assert_eq!(norm_profile(&SpaceSpec::lebesgue(INF), &one).unwrap(), NormValue::Finite(1.0));
        // Step functions through the profile path agree with the exact norms.
        let f = StepFunction::from_levels(INF, &[(3.0, 0.5), (1.0, 2.0)]).unwrap();
        for x in [SpaceSpec::lebesgue(2.0), SpaceSpec::lambda(Weight::power(1.0, -0.5)), SpaceSpec::marcinkiewicz(Weight::power(1.0, 0.5))] {
            let a = norm(&x, &f).unwrap().value();
            let b = norm_profile(&x, &f).unwrap().value();
            assert!((a - b).abs() <= 1e-8 * a, "{x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn space_json() {
        let s: SpaceSpec = serde_json::from_str(r#"{"kind":"lebesgue","p":"inf"}"#).unwrap();
        assert_eq!(s, SpaceSpec::lebesgue(INF));
        let s: SpaceSpec = serde_json::from_str(
            r#"{"kind":"sum","left":{"kind":"lebesgue","p":1},"right":{"kind":"lambda_one","w":{"kind":"power_log","a":-0.5}}}"#,
        )
        .unwrap();
        assert!(matches!(s, SpaceSpec::Sum { .. }));
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"kind":"lebesgue","p":2,"q":3}"#).is_err());
    }
}
