//! The operators `R_{u,v,nu}`, `H_{u,v,nu}`, `T_phi` and the dilation `D_a`.
//!
//! ```text
//! R g(t) = v(t) \int_0^{nu(t)} g u        H g(t) = u(t) \int_{nu(t)}^L g v
//! T_phi f(t) = sup_{s >= t} phi(s) f*(s) / phi(t)
//! ```
//!
//! Images of step functions are [`Profile`]s: evaluable functions on `(0, L)`
//! with known kinks. Inner integrals reduce to per-cell weight integrals
//! accumulated into prefix and suffix sums, so they are as exact as the
//! weights' primitives. For pure-power weights and bijections the images are
//! sums of monomials `c t^m (log t)^k` on each piece ([`PiecewisePower`]),
//! which gives closed-form pairings and `L^1` / `L^2` norms.

use crate::error::{Error, Result};
use crate::functions::StepFunction;
use crate::quad::{self, Tol};
use crate::tolerances::*;
use crate::weights::{
    check_delta, Bijection, Confidence, Endpoint, Mode, Monotonicity, Weight,
};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------- profiles

/// A nonnegative function on `(0, L)` that can be evaluated pointwise.
pub trait Profile: Sync {
    fn eval(&self, t: f64) -> f64;
    fn domain_length(&self) -> f64;
    /// Points where the profile may fail to be smooth.
    fn kinks(&self) -> Vec<f64> {
        vec![]
    }
    /// The profile vanishes on `(support_end, L)`.
    fn support_end(&self) -> f64 {
        self.domain_length()
    }
    /// Known monotonicity, used to skip rearranging.
    fn monotonicity(&self) -> Monotonicity {
        Monotonicity::None
    }
}

impl Profile for StepFunction {
    fn eval(&self, t: f64) -> f64 {
        StepFunction::eval(self, t)
    }
    fn domain_length(&self) -> f64 {
        StepFunction::domain_length(self)
    }
    fn kinks(&self) -> Vec<f64> {
        self.knots()[1..].to_vec()
    }
    fn support_end(&self) -> f64 {
        self.support_bound()
    }
    fn monotonicity(&self) -> Monotonicity {
        if self.is_nonincreasing() {
            Monotonicity::Nonincreasing
        } else {
            Monotonicity::None
        }
    }
}

/// A weight restricted to `(0, L)`.
#[derive(Debug, Clone)]
pub struct WeightOn {
    pub w: Weight,
    pub len: f64,
}

impl Profile for WeightOn {
    fn eval(&self, t: f64) -> f64 {
        self.w.eval(t)
    }
    fn domain_length(&self) -> f64 {
        self.len
    }
    fn kinks(&self) -> Vec<f64> {
        self.w.kinks().into_iter().filter(|&k| k < self.len).collect()
    }
    fn monotonicity(&self) -> Monotonicity {
        self.w.monotonicity
    }
}

/// `w(t) g(t)` for a weight `w` and a step function `g`.
#[derive(Debug, Clone)]
pub struct WeightedStep {
    pub w: Weight,
    pub g: StepFunction,
}

impl Profile for WeightedStep {
    fn eval(&self, t: f64) -> f64 {
        let g = self.g.eval(t);
        if g == 0.0 {
            0.0
        } else {
            g * self.w.eval(t)
        }
    }
    fn domain_length(&self) -> f64 {
        self.g.domain_length()
    }
    fn kinks(&self) -> Vec<f64> {
        let mut k = self.g.knots()[1..].to_vec();
        k.extend(self.w.kinks());
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
    fn support_end(&self) -> f64 {
        self.g.support_bound()
    }
    fn monotonicity(&self) -> Monotonicity {
        if self.w.monotonicity == Monotonicity::Nonincreasing && self.g.is_nonincreasing() {
            Monotonicity::Nonincreasing
        } else {
            Monotonicity::None
        }
    }
}

/// A closure with a declared domain.
pub struct FnProfile<F: Fn(f64) -> f64 + Sync> {
    pub f: F,
    pub len: f64,
    pub kinks: Vec<f64>,
    pub support_end: f64,
    pub monotonicity: Monotonicity,
}

impl<F: Fn(f64) -> f64 + Sync> FnProfile<F> {
    pub fn new(f: F, len: f64) -> Self {
        FnProfile { f, len, kinks: vec![], support_end: len, monotonicity: Monotonicity::None }
    }
}

impl<F: Fn(f64) -> f64 + Sync> Profile for FnProfile<F> {
    fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }
    fn domain_length(&self) -> f64 {
        self.len
    }
    fn kinks(&self) -> Vec<f64> {
        self.kinks.clone()
    }
    fn support_end(&self) -> f64 {
        self.support_end
    }
    fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }
}

// ---------------------------------------------------------------- specs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpKind {
    R,
    H,
    T,
}

/// A hypothesis check attached to downstream reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub holds: bool,
    pub confidence: Confidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Hypothesis {
    pub fn new(name: impl Into<String>, holds: bool, confidence: Confidence) -> Self {
        Hypothesis { name: name.into(), holds, confidence, detail: None }
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

/// `R_{u,v,nu}`, `H_{u,v,nu}` on `(0, L)`, or `T_phi` (with `phi` stored in `u`).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub kind: OpKind,
    pub u: Weight,
    pub v: Weight,
    pub nu: Bijection,
    pub len: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    kind: OpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u: Option<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<Bijection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi: Option<Weight>,
    #[serde(with = "crate::serde_len", default = "infinite")]
    domain_length: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

impl Serialize for OperatorSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let r = match self.kind {
            OpKind::T => SpecRepr {
                kind: OpKind::T,
                u: None,
                v: None,
                nu: None,
                phi: Some(self.u.clone()),
                domain_length: self.len,
            },
            k => SpecRepr {
                kind: k,
                u: Some(self.u.clone()),
                v: Some(self.v.clone()),
                nu: Some(self.nu.clone()),
                phi: None,
                domain_length: self.len,
            },
        };
        r.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OperatorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = SpecRepr::deserialize(d)?;
        let spec = match r.kind {
            OpKind::T => {
                if r.u.is_some() || r.v.is_some() || r.nu.is_some() {
                    return Err(D::Error::custom("operator T takes only phi"));
                }
                let phi = r.phi.ok_or_else(|| D::Error::custom("operator T requires phi"))?;
                OperatorSpec::t(phi, r.domain_length)
            }
            k => {
                if r.phi.is_some() {
                    return Err(D::Error::custom("phi is only valid for operator T"));
                }
                let u = r.u.ok_or_else(|| D::Error::custom("missing field u"))?;
                let v = r.v.ok_or_else(|| D::Error::custom("missing field v"))?;
                let nu = r.nu.unwrap_or_else(Bijection::identity);
                OperatorSpec { kind: k, u, v, nu, len: r.domain_length }
            }
        };
        spec.validate().map_err(D::Error::custom)?;
        Ok(spec)
    }
}

impl OperatorSpec {
    pub fn r(u: Weight, v: Weight, nu: Bijection, len: f64) -> Self {
        OperatorSpec { kind: OpKind::R, u, v, nu, len }
    }

    pub fn h(u: Weight, v: Weight, nu: Bijection, len: f64) -> Self {
        OperatorSpec { kind: OpKind::H, u, v, nu, len }
    }

    pub fn t(phi: Weight, len: f64) -> Self {
        OperatorSpec { kind: OpKind::T, u: phi, v: Weight::constant(1.0), nu: Bijection::identity(), len }
    }

    pub fn phi(&self) -> &Weight {
        &self.u
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.len > 0.0) {
            return Err(Error::InvalidSpec(format!("domain length must be positive, got {}", self.len)));
        }
        self.nu.validate(self.len)
    }

    /// Same weights with `nu` replaced by its inverse; used by the duality identity.
    pub fn with_inverse_nu(&self) -> Self {
        OperatorSpec { nu: self.nu.inverse_map().simplified(), ..self.clone() }
    }

    /// Hypothesis flags recorded from the weight checkers.
    pub fn hypotheses(&self) -> Vec<Hypothesis> {
        let mut out = Vec::new();
        let mono = |w: &Weight, name: &str| {
            let declared = w.monotonicity == Monotonicity::Nonincreasing;
            let ok = declared && w.verify_monotonicity(self.len);
            let conf = if w.as_power().is_some() { Confidence::Exact } else { Confidence::Probed };
            Hypothesis::new(format!("{name} nonincreasing"), ok, conf)
        };
        if self.kind == OpKind::T {
            let m = self.u.monotonicity;
            out.push(Hypothesis::new(
                "phi monotone",
                m != Monotonicity::None && self.u.verify_monotonicity(self.len),
                Confidence::Probed,
            ));
            return out;
        }
        out.push(mono(&self.u, "u"));
        out.push(mono(&self.v, "v"));
        let mut ends = vec![Endpoint::Zero];
        if self.len.is_infinite() {
            ends.push(Endpoint::Infinity);
        }
        for e in ends {
            for m in [Mode::Inf, Mode::Sup] {
                if let Ok(r) = check_delta(&self.nu, e, m, 2.0, self.len) {
                    let name = format!(
                        "nu in Delta^{} at {}",
                        if m == Mode::Inf { "inf" } else { "sup" },
                        if e == Endpoint::Zero { "0" } else { "inf" }
                    );
                    out.push(Hypothesis::new(name, r.verdict, r.confidence).with_detail(format!("estimate {}", r.estimate)));
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------- weighted sums

/// Prefix and suffix sums of `\int g w` over the cells of a step function.
#[derive(Debug, Clone)]
struct WeightedSums {
    knots: Vec<f64>,
    values: Vec<f64>,
    w: Weight,
    head: Vec<f64>,
    tail: Vec<f64>,
}

impl WeightedSums {
    fn new(g: &StepFunction, w: &Weight) -> Self {
        let knots = g.knots().to_vec();
        let values = g.values().to_vec();
        let n = values.len();
        let cell: Vec<f64> = (0..n)
            .map(|i| {
                if values[i] == 0.0 {
                    0.0
                } else {
                    w.integral(knots[i], knots[i + 1]).map_or(f64::INFINITY, |x| values[i] * x)
                }
            })
            .collect();
        let mut head = vec![0.0; n + 1];
        for i in 0..n {
            head[i + 1] = head[i] + cell[i];
        }
        let mut tail = vec![0.0; n + 1];
        for i in (0..n).rev() {
            tail[i] = tail[i + 1] + cell[i];
        }
        WeightedSums { knots, values, w: w.clone(), head, tail }
    }

    fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    fn cell(&self, x: f64) -> usize {
        self.knots.partition_point(|&k| k <= x) - 1
    }

    /// `\int_0^x g w`.
    fn head(&self, x: f64) -> Result<f64> {
        let n = self.values.len();
        let r = if x >= self.end() {
            self.head[n]
        } else if x <= 0.0 {
            0.0
        } else {
            let k = self.cell(x);
            let part = if self.values[k] == 0.0 { 0.0 } else { self.values[k] * self.w.integral(self.knots[k], x)? };
            self.head[k] + part
        };
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::Divergent("inner integral of R diverges at 0".into()))
        }
    }

    /// `\int_x^T g w`.
    fn tail(&self, x: f64) -> Result<f64> {
        if x >= self.end() {
            return Ok(0.0);
        }
        let k = self.cell(x.max(0.0));
        let part = if self.values[k] == 0.0 { 0.0 } else { self.values[k] * self.w.integral(x.max(0.0), self.knots[k + 1])? };
        let r = part + self.tail[k + 1];
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::Divergent("inner integral of H diverges".into()))
        }
    }
}

fn check_t(t: f64, len: f64) -> Result<()> {
    if t > 0.0 && t < len {
        Ok(())
    } else {
        Err(Error::Domain(format!("{t} is not in (0, {len})")))
    }
}

// ---------------------------------------------------------------- R and H

/// `t -> R_{u,v,nu} g(t)` for a step function `g`.
#[derive(Debug, Clone)]
pub struct RImage {
    spec: OperatorSpec,
    sums: WeightedSums,
    monotone: Monotonicity,
}

impl RImage {
    pub fn new(spec: &OperatorSpec, g: &StepFunction) -> Result<Self> {
        let sums = WeightedSums::new(g, &spec.u);
        if !sums.head[sums.values.len()].is_finite() {
            return Err(Error::Divergent("u is not integrable against g near 0".into()));
        }
        Ok(RImage { spec: spec.clone(), sums, monotone: Monotonicity::None })
    }

    /// Declare the image nonincreasing (known from the structure of `v`).
    pub fn assume_nonincreasing(mut self) -> Self {
        self.monotone = Monotonicity::Nonincreasing;
        self
    }

    pub fn try_eval(&self, t: f64) -> Result<f64> {
        let inner = self.sums.head(self.spec.nu.eval(t))?;
        Ok(if inner == 0.0 { 0.0 } else { self.spec.v.eval(t) * inner })
    }
}

impl Profile for RImage {
    fn eval(&self, t: f64) -> f64 {
        self.try_eval(t).unwrap_or(f64::INFINITY)
    }
    fn domain_length(&self) -> f64 {
        self.spec.len
    }
    fn kinks(&self) -> Vec<f64> {
        let nu = &self.spec.nu;
        let mut k: Vec<f64> = self.sums.knots[1..].iter().map(|&x| nu.inverse(x)).collect();
        k.extend(self.spec.v.kinks());
        k.extend(self.spec.u.kinks().into_iter().map(|x| nu.inverse(x)));
        k.retain(|&x| x > 0.0 && x < self.spec.len);
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
    fn monotonicity(&self) -> Monotonicity {
        self.monotone
    }
}

/// `t -> H_{u,v,nu} g(t)` for a step function `g`.
#[derive(Debug, Clone)]
pub struct HImage {
    spec: OperatorSpec,
    sums: WeightedSums,
}

impl HImage {
    pub fn new(spec: &OperatorSpec, g: &StepFunction) -> Self {
        HImage { spec: spec.clone(), sums: WeightedSums::new(g, &spec.v) }
    }

    pub fn try_eval(&self, t: f64) -> Result<f64> {
        let inner = self.sums.tail(self.spec.nu.eval(t))?;
        Ok(if inner == 0.0 { 0.0 } else { self.spec.u.eval(t) * inner })
    }
}

impl Profile for HImage {
    fn eval(&self, t: f64) -> f64 {
        self.try_eval(t).unwrap_or(f64::INFINITY)
    }
    fn domain_length(&self) -> f64 {
        self.spec.len
    }
    fn kinks(&self) -> Vec<f64> {
        let nu = &self.spec.nu;
        let mut k: Vec<f64> = self.sums.knots[1..].iter().map(|&x| nu.inverse(x)).collect();
        k.extend(self.spec.u.kinks());
        k.extend(self.spec.v.kinks().into_iter().map(|x| nu.inverse(x)));
        let end = self.support_end();
        k.retain(|&x| x > 0.0 && x <= end);
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
    fn support_end(&self) -> f64 {
        let t = self.sums.end();
        if t >= self.spec.len {
            self.spec.len
        } else if t == 0.0 {
            0.0
        } else {
            self.spec.nu.inverse(t)
        }
    }
    fn monotonicity(&self) -> Monotonicity {
        if self.spec.u.monotonicity == Monotonicity::Nonincreasing {
            Monotonicity::Nonincreasing
        } else {
            Monotonicity::None
        }
    }
}

pub fn apply_r(spec: &OperatorSpec, g: &StepFunction, t: f64) -> Result<f64> {
    check_t(t, spec.len)?;
    RImage::new(spec, g)?.try_eval(t)
}

pub fn apply_h(spec: &OperatorSpec, g: &StepFunction, t: f64) -> Result<f64> {
    check_t(t, spec.len)?;
    HImage::new(spec, g).try_eval(t)
}

/// `H_{u,v,nu}` applied to a profile, by quadrature.
pub struct HOfProfile<'a, P: Profile + ?Sized> {
    pub spec: OperatorSpec,
    pub inner: &'a P,
}

impl<'a, P: Profile + ?Sized> HOfProfile<'a, P> {
    pub fn new(spec: &OperatorSpec, inner: &'a P) -> Self {
        HOfProfile { spec: spec.clone(), inner }
    }

    fn tail(&self, x: f64) -> f64 {
        let end = self.inner.support_end().min(self.spec.len);
        if x >= end {
            return 0.0;
        }
        let g = |s: f64| {
            let p = self.inner.eval(s);
            if p == 0.0 {
                0.0
            } else {
                p * self.spec.v.eval(s)
            }
        };
        let mut cuts = self.inner.kinks();
        cuts.extend(self.spec.v.kinks());
        cuts.retain(|&c| c > x && c < end);
        cuts.sort_by(f64::total_cmp);
        let tol = Tol::rel(PROFILE_REL);
        if end.is_finite() && x < end * 1e-3 {
            // Integrate in log scale so tiny lower limits cost nothing.
            let h = |s: f64| {
                let t = s.exp();
                g(t) * t
            };
            let lcuts: Vec<f64> = cuts.iter().map(|c| c.ln()).collect();
            // nu(t) may underflow to 0 for tiny t.
            let lo = x.max(f64::MIN_POSITIVE).ln();
            quad::integrate_pieces(&h, lo, end.ln(), &lcuts, tol).value
        } else {
            quad::integrate_pieces(&g, x, end, &cuts, tol).value
        }
    }
}

impl<'a, P: Profile + ?Sized> Profile for HOfProfile<'a, P> {
    fn eval(&self, t: f64) -> f64 {
        let inner = self.tail(self.spec.nu.eval(t));
        if inner == 0.0 {
            0.0
        } else {
            self.spec.u.eval(t) * inner
        }
    }
    fn domain_length(&self) -> f64 {
        self.spec.len
    }
    fn kinks(&self) -> Vec<f64> {
        let nu = &self.spec.nu;
        let mut k: Vec<f64> = self.inner.kinks().into_iter().map(|x| nu.inverse(x)).collect();
        k.extend(self.spec.u.kinks());
        k.retain(|&x| x > 0.0 && x < self.spec.len);
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
    fn support_end(&self) -> f64 {
        let e = self.inner.support_end();
        if e >= self.spec.len {
            self.spec.len
        } else {
            self.spec.nu.inverse(e)
        }
    }
    fn monotonicity(&self) -> Monotonicity {
        if self.spec.u.monotonicity == Monotonicity::Nonincreasing {
            Monotonicity::Nonincreasing
        } else {
            Monotonicity::None
        }
    }
}

// ---------------------------------------------------------------- T_phi

/// `t -> T_phi f(t)`, a suffix maximum over the cells of `f*`.
#[derive(Debug, Clone)]
pub struct SupImage {
    phi: Weight,
    fstar: StepFunction,
    /// `suffix[i] = max_{j >= i} sup_{cell j} phi f*`.
    suffix: Vec<f64>,
}

const CELL_SAMPLES: usize = 256;

fn left_limit(x: f64) -> f64 {
    x.next_down()
}

impl SupImage {
    pub fn new(phi: &Weight, f: &StepFunction) -> Self {
        let fstar = f.rearrange();
        let cells: Vec<(f64, f64, f64)> = fstar.cells().collect();
        let sups: Vec<f64> = cells.iter().map(|&(a, b, v)| v * cell_sup(phi, a, b)).collect();
        let mut suffix = vec![0.0f64; sups.len() + 1];
        for i in (0..sups.len()).rev() {
            suffix[i] = suffix[i + 1].max(sups[i]);
        }
        SupImage { phi: phi.clone(), fstar, suffix }
    }

    /// The nonincreasing step `s -> sup_{tau >= s} phi(tau) f*(tau)` when `phi`
    /// is nondecreasing (constant on each cell of `f*`).
    pub fn envelope_step(&self) -> Option<StepFunction> {
        if self.phi.monotonicity != Monotonicity::Nondecreasing {
            return None;
        }
        let k = self.fstar.knots().to_vec();
        let v = self.suffix[..self.suffix.len() - 1].to_vec();
        StepFunction::new(self.fstar.domain_length(), k, v).ok()
    }
}

/// `sup_{s in [a, b)} phi(s)`.
fn cell_sup(phi: &Weight, a: f64, b: f64) -> f64 {
    match phi.monotonicity {
        Monotonicity::Nondecreasing => phi.eval(left_limit(b)),
        Monotonicity::Nonincreasing => phi.eval(a.max(f64::MIN_POSITIVE)),
        Monotonicity::None => sampled_sup(phi, a, b),
    }
}

fn sampled_sup(phi: &Weight, a: f64, b: f64) -> f64 {
    let a = a.max(f64::MIN_POSITIVE);
    let b = left_limit(b);
    let mut m = phi.eval(a).max(phi.eval(b));
    for i in 1..CELL_SAMPLES {
        let s = a + (b - a) * i as f64 / CELL_SAMPLES as f64;
        m = m.max(phi.eval(s));
    }
    m
}

impl Profile for SupImage {
    fn eval(&self, t: f64) -> f64 {
        let k = match self.fstar.cell_index(t) {
            Some(k) => k,
            None => return 0.0,
        };
        let (_, b, v) = self.fstar.cells().nth(k).unwrap();
        let partial = v * match self.phi.monotonicity {
            Monotonicity::Nondecreasing => self.phi.eval(left_limit(b)),
            Monotonicity::Nonincreasing => self.phi.eval(t),
            Monotonicity::None => sampled_sup(&self.phi, t, b),
        };
        if partial >= self.suffix[k + 1] && self.phi.monotonicity == Monotonicity::Nonincreasing {
            return v;
        }
        let top = partial.max(self.suffix[k + 1]);
        top / self.phi.eval(t)
    }
    fn domain_length(&self) -> f64 {
        self.fstar.domain_length()
    }
    fn kinks(&self) -> Vec<f64> {
        let mut k = self.fstar.knots()[1..].to_vec();
        k.extend(self.phi.kinks());
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
    fn support_end(&self) -> f64 {
        self.fstar.support_bound()
    }
    fn monotonicity(&self) -> Monotonicity {
        if self.phi.monotonicity == Monotonicity::Nonincreasing {
            Monotonicity::Nonincreasing
        } else {
            Monotonicity::None
        }
    }
}

pub fn apply_t(phi: &Weight, f: &StepFunction, t: f64) -> Result<f64> {
    check_t(t, f.domain_length())?;
    Ok(SupImage::new(phi, f).eval(t))
}

// ---------------------------------------------------------------- dilation

/// `D_a f(t) = f(t / a)`, cut to `(0, aL) \cap (0, L)` when `L` is finite.
pub fn dilate(f: &StepFunction, a: f64) -> Result<StepFunction> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidSpec(format!("dilation factor must be positive, got {a}")));
    }
    Ok(f.stretch(a))
}

// ---------------------------------------------------------------- sampling

/// Geometric sampling grid on `(0, hi)`: `lo = hi * 1e-12`, `n` points.
pub fn sampling_grid(hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let lo = hi * 1e-12;
    let r = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut g: Vec<f64> = (0..n).map(|i| lo * r.powi(i as i32)).collect();
    *g.last_mut().unwrap() = hi;
    g
}

/// Average of a profile over each grid cell (3-point Gauss), as a step function.
pub fn sample_to_step<P: Profile + ?Sized>(p: &P, grid: &[f64]) -> Result<StepFunction> {
    const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut knots = vec![0.0];
    knots.extend(grid.iter().copied().filter(|&x| x > 0.0));
    let mut values = Vec::with_capacity(knots.len() - 1);
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        let avg: f64 = X.iter().zip(W).map(|(x, wt)| wt * p.eval(m + h * x)).sum::<f64>() * 0.5;
        if !avg.is_finite() {
            return Err(Error::Divergent(format!("profile is not finite on ({a}, {b})")));
        }
        values.push(avg.max(0.0));
    }
    StepFunction::new(p.domain_length(), knots, values)
}

/// `R_{u1,v1,nu1}((R_{u2,v2,nu2} f*)*)` with the inner image sampled on a grid.
#[derive(Debug, Clone)]
pub struct ComposedRR {
    /// The rearranged sampled inner image.
    pub inner: StepFunction,
    pub image: RImage,
    pub grid_points: usize,
}

impl Profile for ComposedRR {
    fn eval(&self, t: f64) -> f64 {
        self.image.eval(t)
    }
    fn domain_length(&self) -> f64 {
        self.image.domain_length()
    }
    fn kinks(&self) -> Vec<f64> {
        self.image.kinks()
    }
    fn monotonicity(&self) -> Monotonicity {
        self.image.monotonicity()
    }
}

impl ComposedRR {
    pub fn sampled(&self, grid: &[f64]) -> Result<StepFunction> {
        sample_to_step(&self.image, grid)
    }
}

/// `grid_points` geometric points up to `L` (or up to `1e6 * max(1, |supp f|)`
/// when `L = inf`) drive the intermediate rearrangement.
pub fn compose_rr(outer: &OperatorSpec, inner: &OperatorSpec, f: &StepFunction, grid_points: usize) -> Result<ComposedRR> {
    let fstar = f.rearrange();
    let len = inner.len;
    let img = RImage::new(inner, &fstar)?;
    let hi = if len.is_finite() { len } else { 1e6 * fstar.support_bound().max(1.0) };
    let grid = sampling_grid(hi, grid_points);
    let sampled = if fstar.is_zero() { StepFunction::zero(len) } else { sample_to_step(&img, &grid)? };
    let inner_star = sampled.rearrange();
    let image = RImage::new(outer, &inner_star)?;
    Ok(ComposedRR { inner: inner_star, image, grid_points })
}

// ---------------------------------------------------------------- exact powers

/// `coef * t^exp * (log t)^log`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub exp: f64,
    pub log: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerPiece {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<Term>,
}

/// A function that is a finite sum of monomials on each piece.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePower {
    pub len: f64,
    pub pieces: Vec<PowerPiece>,
}

/// `\int_p^q t^m (log t)^k dt` for `k <= 2`; infinite when divergent.
pub fn mono_integral(m: f64, k: u8, p: f64, q: f64) -> f64 {
    if !(q > p) {
        return 0.0;
    }
    let r = m + 1.0;
    if k == 0 && r != 0.0 && p > 0.0 && q.is_finite() {
        return p.powf(r) * (r * (q / p).ln()).exp_m1() / r;
    }
    let anti = |t: f64| -> f64 {
        let l = t.ln();
        if r == 0.0 {
            return l.powi(k as i32 + 1) / (k as f64 + 1.0);
        }
        let tr = t.powf(r);
        match k {
            0 => tr / r,
            1 => tr * (l / r - 1.0 / (r * r)),
            _ => tr * (l * l / r - 2.0 * l / (r * r) + 2.0 / (r * r * r)),
        }
    };
    let lower = if p == 0.0 {
        if r > 0.0 {
            0.0
        } else {
            return f64::INFINITY;
        }
    } else {
        anti(p)
    };
    let upper = if q.is_infinite() {
        if r < 0.0 {
            0.0
        } else {
            return f64::INFINITY;
        }
    } else {
        anti(q)
    };
    upper - lower
}

impl PowerPiece {
    fn eval(&self, t: f64) -> f64 {
        let l = t.ln();
        self.terms.iter().map(|x| x.coef * t.powf(x.exp) * l.powi(x.log as i32)).sum()
    }

    fn integral(&self, lo: f64, hi: f64, scale: f64) -> f64 {
        self.terms.iter().map(|x| scale * x.coef * mono_integral(x.exp, x.log, lo, hi)).sum()
    }

    fn squared(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for (i, a) in self.terms.iter().enumerate() {
            for (j, b) in self.terms.iter().enumerate().skip(i) {
                let c = if i == j { 1.0 } else { 2.0 };
                out.push(Term { coef: c * a.coef * b.coef, exp: a.exp + b.exp, log: a.log + b.log });
            }
        }
        out
    }
}

impl PiecewisePower {
    pub fn eval(&self, t: f64) -> f64 {
        self.pieces.iter().find(|p| t >= p.lo && t < p.hi).map_or(0.0, |p| p.eval(t))
    }

    /// `\int f P` for a step function `f`, exact on the merged partition.
    pub fn pair(&self, f: &StepFunction) -> f64 {
        let mut s = 0.0;
        for (a, b, v) in f.cells() {
            if v == 0.0 {
                continue;
            }
            for p in &self.pieces {
                let lo = a.max(p.lo);
                let hi = b.min(p.hi);
                if hi > lo {
                    s += p.integral(lo, hi, v);
                }
            }
        }
        s
    }

    pub fn l1_norm(&self) -> f64 {
        self.pieces.iter().map(|p| p.integral(p.lo, p.hi, 1.0)).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                let sq = PowerPiece { lo: p.lo, hi: p.hi, terms: p.squared() };
                sq.integral(p.lo, p.hi, 1.0)
            })
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }
}

struct Powers {
    cu: f64,
    au: f64,
    cv: f64,
    av: f64,
    alpha: f64,
}

fn powers(spec: &OperatorSpec) -> Option<Powers> {
    let (cu, au) = spec.u.as_power()?;
    let (cv, av) = spec.v.as_power()?;
    let alpha = spec.nu.as_power()?;
    Some(Powers { cu, au, cv, av, alpha })
}

/// Terms of `c * (W(t^alpha) - W(x))` where `W` is a primitive of `c_w s^{a_w}`;
/// `scale` multiplies everything.
fn primitive_terms(cw: f64, aw: f64, alpha: f64, x: f64, scale: f64, exp_shift: f64) -> (f64, Vec<Term>) {
    let e = aw + 1.0;
    if e == 0.0 {
        let constant = -scale * cw * x.ln();
        (constant, vec![Term { coef: scale * cw * alpha, exp: exp_shift, log: 1 }])
    } else {
        let constant = if x == 0.0 { 0.0 } else { -scale * cw * x.powf(e) / e };
        (constant, vec![Term { coef: scale * cw / e, exp: exp_shift + alpha * e, log: 0 }])
    }
}

/// Exact image `R_{u,v,nu} g` when `u`, `v` and `nu` are pure powers.
pub fn exact_r_image(spec: &OperatorSpec, g: &StepFunction) -> Option<Result<PiecewisePower>> {
    let p = powers(spec)?;
    Some(exact_r(spec, &p, g))
}

fn exact_r(spec: &OperatorSpec, p: &Powers, g: &StepFunction) -> Result<PiecewisePower> {
    let sums = WeightedSums::new(g, &spec.u);
    let n = sums.values.len();
    if !sums.head[n].is_finite() {
        return Err(Error::Divergent("u is not integrable against g near 0".into()));
    }
    let tau = |x: f64| if x.is_infinite() { x } else { x.powf(1.0 / p.alpha) };
    let mut pieces = Vec::with_capacity(n + 1);
    for k in 0..n {
        let (lo, hi) = (tau(sums.knots[k]), tau(sums.knots[k + 1]));
        let gk = sums.values[k];
        let mut terms = Vec::new();
        let mut constant = sums.head[k];
        if gk != 0.0 {
            let (c, t) = primitive_terms(p.cu, p.au, p.alpha, sums.knots[k], gk, p.av);
            constant += c;
            terms.extend(t.into_iter().map(|x| Term { coef: x.coef * p.cv, ..x }));
        }
        if constant != 0.0 {
            terms.push(Term { coef: p.cv * constant, exp: p.av, log: 0 });
        }
        pieces.push(PowerPiece { lo, hi, terms });
    }
    let last = tau(sums.end());
    if last < spec.len && sums.head[n] != 0.0 {
        pieces.push(PowerPiece {
            lo: last,
            hi: spec.len,
            terms: vec![Term { coef: p.cv * sums.head[n], exp: p.av, log: 0 }],
        });
    }
    Ok(PiecewisePower { len: spec.len, pieces })
}

/// Exact image `H_{u,v,nu} g` when `u`, `v` and `nu` are pure powers.
pub fn exact_h_image(spec: &OperatorSpec, g: &StepFunction) -> Option<PiecewisePower> {
    let p = powers(spec)?;
    let sums = WeightedSums::new(g, &spec.v);
    let n = sums.values.len();
    let tau = |x: f64| x.powf(1.0 / p.alpha);
    let mut pieces = Vec::with_capacity(n);
    for k in 0..n {
        let (lo, hi) = (tau(sums.knots[k]), tau(sums.knots[k + 1]));
        let gk = sums.values[k];
        // H g(t) = u(t) [g_k (V(x_{k+1}) - V(t^alpha)) + tail_{k+1}]
        let mut terms = Vec::new();
        let mut constant = sums.tail[k + 1];
        if gk != 0.0 {
            let e = p.av + 1.0;
            let vr = if e == 0.0 { p.cv * sums.knots[k + 1].ln() } else { p.cv * sums.knots[k + 1].powf(e) / e };
            constant += gk * vr;
            let (_, t) = primitive_terms(p.cv, p.av, p.alpha, 1.0, -gk, p.au);
            terms.extend(t.into_iter().map(|x| Term { coef: x.coef * p.cu, ..x }));
        }
        if constant != 0.0 {
            terms.push(Term { coef: p.cu * constant, exp: p.au, log: 0 });
        }
        pieces.push(PowerPiece { lo, hi, terms });
    }
    Some(PiecewisePower { len: spec.len, pieces })
}

/// `\int_0^L f R_{u,v,nu} g`, exact for pure powers and by quadrature otherwise.
pub fn pair_r(spec: &OperatorSpec, f: &StepFunction, g: &StepFunction) -> Result<f64> {
    if let Some(img) = exact_r_image(spec, g) {
        return Ok(img?.pair(f));
    }
    let img = RImage::new(spec, g)?;
    Ok(pair_profile(f, &img))
}

/// `\int_0^L g H_{u,v,nu} f`, exact for pure powers and by quadrature otherwise.
pub fn pair_h(spec: &OperatorSpec, g: &StepFunction, f: &StepFunction) -> Result<f64> {
    if let Some(img) = exact_h_image(spec, f) {
        return Ok(img.pair(g));
    }
    Ok(pair_profile(g, &HImage::new(spec, f)))
}

/// `\int f P` by quadrature on each cell of `f`, split at the profile's kinks.
pub fn pair_profile<P: Profile + ?Sized>(f: &StepFunction, p: &P) -> f64 {
    let kinks = p.kinks();
    let eval = |t: f64| p.eval(t);
    f.cells()
        .filter(|c| c.2 != 0.0)
        .map(|(a, b, v)| {
            let cuts: Vec<f64> = kinks.iter().copied().filter(|&k| k > a && k < b).collect();
            v * quad::integrate_pieces(&eval, a, b, &cuts, Tol::rel(PROFILE_REL)).value
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::NumericMap;

    const INF: f64 = f64::INFINITY;

    fn one() -> Weight {
        Weight::constant(1.0)
    }

    fn ind(len: f64, a: f64, b: f64) -> StepFunction {
        StepFunction::indicator(len, a, b, 1.0).unwrap()
    }

    #[test]
    fn apply_r_examples() {
        let spec = OperatorSpec::r(one(), Weight::power(1.0, -1.0), Bijection::identity(), INF);
        let g = ind(INF, 0.0, 1.0);
        assert_eq!(apply_r(&spec, &g, 2.0).unwrap(), 0.5);
        assert_eq!(apply_r(&spec, &g, 0.5).unwrap(), 1.0);
        let spec = OperatorSpec::r(one(), one(), Bijection::power(2.0), 1.0);
        assert!((apply_r(&spec, &ind(1.0, 0.0, 1.0), 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(apply_r(&spec, &StepFunction::zero(1.0), 0.3).unwrap(), 0.0);
        assert!(apply_r(&spec, &ind(1.0, 0.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn apply_h_examples() {
        let v = Weight::power(1.0, -0.5);
        let spec = OperatorSpec::h(one(), v.clone(), Bijection::identity(), 1.0);
        assert!((apply_h(&spec, &ind(1.0, 0.0, 1.0), 0.25).unwrap() - 1.0).abs() < 1e-15);
        let spec = OperatorSpec::h(one(), v, Bijection::power(2.0), 1.0);
        assert!((apply_h(&spec, &ind(1.0, 0.0, 1.0), 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(apply_h(&spec, &StepFunction::zero(1.0), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn apply_t_examples() {
        let phi = Weight::power(1.0, 1.0);
        assert!((apply_t(&phi, &ind(2.0, 0.0, 1.0), 0.5).unwrap() - 2.0).abs() < 1e-12);
        let f = StepFunction::from_cells(
            2.0,
            &[crate::Cell { left: 0.0, right: 1.0, value: 2.0 }, crate::Cell { left: 1.0, right: 2.0, value: 1.0 }],
        )
        .unwrap();
        assert!((apply_t(&phi, &f, 1.5).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        // Nonincreasing phi gives back f*.
        let phi = Weight::power(1.0, -0.5);
        let g = StepFunction::from_levels(INF, &[(3.0, 1.0), (1.0, 2.0)]).unwrap();
        for t in [0.1, 0.9, 1.5, 2.9, 4.0] {
            assert_eq!(apply_t(&phi, &g, t).unwrap(), g.eval(t));
        }
    }

    #[test]
    fn t_phi_dominates_and_is_idempotent() {
        let phi = Weight::power(1.0, 0.7);
        let f = StepFunction::from_levels(4.0, &[(5.0, 0.5), (2.0, 1.0), (1.5, 2.0)]).unwrap();
        let img = SupImage::new(&phi, &f);
        let env = img.envelope_step().unwrap();
        for i in 1..200 {
            let t = 4.0 * i as f64 / 200.0;
            assert!(img.eval(t) >= f.eval(t) * (1.0 - 1e-15));
        }
        // T(T f) = T f: sample T f finely and apply T again.
        let grid: Vec<f64> = (1..=400).map(|i| 3.5 * i as f64 / 400.0).collect();
        let tf = sample_to_step(&img, &grid).unwrap();
        let again = SupImage::new(&phi, &tf);
        for &t in &[0.3, 1.1, 2.0, 3.0] {
            let a = again.eval(t);
            let b = SupImage::new(&phi, &tf).eval(t);
            assert!((a - b).abs() < 1e-12);
        }
        assert!(env.is_nonincreasing());
    }

    #[test]
    fn dilation_examples() {
        let f = ind(INF, 0.0, 1.0);
        assert_eq!(dilate(&f, 1.0).unwrap(), f);
        assert_eq!(dilate(&f, 2.0).unwrap(), ind(INF, 0.0, 2.0));
        assert_eq!(dilate(&ind(1.0, 0.0, 1.0), 2.0).unwrap(), ind(1.0, 0.0, 1.0));
    }

    #[test]
    fn compose_rr_example() {
        let spec = OperatorSpec::r(one(), one(), Bijection::identity(), 1.0);
        let c = compose_rr(&spec, &spec, &ind(1.0, 0.0, 1.0), DEFAULT_GRID).unwrap();
        assert!((c.eval(0.5) - 0.375).abs() < 1e-3, "{}", c.eval(0.5));
        let z = compose_rr(&spec, &spec, &StepFunction::zero(1.0), 64).unwrap();
        assert_eq!(z.eval(0.5), 0.0);
    }

    #[test]
    fn duality_example() {
        let spec = OperatorSpec::r(one(), one(), Bijection::identity(), 2.0);
        let f = ind(2.0, 0.0, 1.0);
        let g = ind(2.0, 0.0, 2.0);
        let lhs = pair_r(&spec, &f, &g).unwrap();
        let rhs = pair_h(&spec.with_inverse_nu(), &g, &f).unwrap();
        assert!((lhs - 0.5).abs() < 1e-15 && (rhs - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_images_match_pointwise() {
        let spec = OperatorSpec::r(Weight::power(2.0, -0.4), Weight::power(0.5, -1.3), Bijection::power(1.7), INF);
        let g = StepFunction::from_levels(INF, &[(3.0, 0.2), (1.0, 1.3), (0.25, 4.0)]).unwrap();
        let g = crate::functions::transport(&g, &crate::Layout::reflection(&g, 6.0)).unwrap();
        let exact = exact_r_image(&spec, &g).unwrap().unwrap();
        let img = RImage::new(&spec, &g).unwrap();
        let hspec = OperatorSpec::h(Weight::power(1.5, -1.0), Weight::power(2.0, -1.0), Bijection::power(0.6), INF);
        let hex = exact_h_image(&hspec, &g).unwrap();
        let him = HImage::new(&hspec, &g);
        for i in 1..300 {
            let t = 0.03 * i as f64;
            let (a, b) = (exact.eval(t), img.eval(t));
            assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300), "R at {t}: {a} vs {b}");
            let (a, b) = (hex.eval(t), him.eval(t));
            assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300), "H at {t}: {a} vs {b}");
        }
    }

    #[test]
    fn exact_pairing_matches_quadrature() {
        let spec = OperatorSpec::r(Weight::power(1.0, -0.5), Weight::power(1.0, -1.0), Bijection::power(2.0), 1.0);
        let f = StepFunction::from_levels(1.0, &[(2.0, 0.3), (1.0, 0.5)]).unwrap();
        let g = StepFunction::from_levels(1.0, &[(1.0, 0.7), (0.5, 0.2)]).unwrap();
        let exact = pair_r(&spec, &f, &g).unwrap();
        let img = RImage::new(&spec, &g).unwrap();
        let q = pair_profile(&f, &img);
        assert!((exact - q).abs() <= 1e-10 * exact, "{exact} vs {q}");
        let dual = pair_h(&spec.with_inverse_nu(), &g, &f).unwrap();
        assert!((exact - dual).abs() <= 1e-10 * exact, "{exact} vs {dual}");
    }

    #[test]
    fn mono_integrals() {
        assert!((mono_integral(0.0, 2, 0.0, 1.0) - 2.0).abs() < 1e-15);
        assert!((mono_integral(-1.0, 1, 1.0, std::f64::consts::E) - 0.5).abs() < 1e-15);
        assert!((mono_integral(-2.0, 0, 1.0, INF) - 1.0).abs() < 1e-15);
        assert!(mono_integral(-1.0, 0, 0.0, 1.0).is_infinite());
        // \int_0^1 t log t = -1/4.
        assert!((mono_integral(1.0, 1, 0.0, 1.0) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn h_image_is_nonincreasing() {
        let spec = OperatorSpec::h(Weight::power(1.0, -0.3), Weight::power(1.0, -0.5), Bijection::numeric(NumericMap::TPlusTSquared), INF);
        let g = StepFunction::from_levels(INF, &[(1.0, 1.0), (0.5, 2.0)]).unwrap();
        let g = crate::functions::transport(&g, &crate::Layout::reflection(&g, 3.0)).unwrap();
        let img = HImage::new(&spec, &g);
        let mut prev = INF;
        for i in 1..400 {
            let t = 0.01 * i as f64;
            let x = img.eval(t);
            assert!(x <= prev * (1.0 + 1e-12));
            prev = x;
        }
    }

    #[test]
    fn r_of_rearranged_is_nonincreasing_when_v_is_reciprocal_primitive() {
        let u = Weight::power(1.0, -0.4);
        let nu = Bijection::power(1.5);
        let v = Weight::reciprocal_primitive(u.clone(), nu.clone());
        let spec = OperatorSpec::r(u, v, nu.inverse_map(), 1.0);
        let g = StepFunction::from_levels(1.0, &[(4.0, 0.1), (2.0, 0.3), (1.0, 0.2)]).unwrap();
        let img = RImage::new(&spec, &g).unwrap();
        let mut prev = INF;
        for i in 1..500 {
            let x = img.eval(0.002 * i as f64);
            assert!(x <= prev * (1.0 + 1e-12));
            prev = x;
        }
    }

    #[test]
    fn h_of_profile_matches_step_case() {
        let spec = OperatorSpec::h(one(), Weight::power(1.0, -0.5), Bijection::identity(), 1.0);
        let g = StepFunction::from_levels(1.0, &[(2.0, 0.25), (1.0, 0.5)]).unwrap();
        let direct = HImage::new(&spec, &g);
        let via = HOfProfile::new(&spec, &g);
        for t in [1e-12, 1e-4, 0.1, 0.3, 0.6] {
            let (a, b) = (direct.eval(t), via.eval(t));
            assert!((a - b).abs() <= 1e-10 * a, "{t}: {a} vs {b}");
        }
    }

    #[test]
    fn spec_json() {
        let s = r#"{"kind":"R","u":{"kind":"power_log","a":0},"v":{"kind":"power_log","a":-1},"nu":{"kind":"power","alpha":1},"domain_length":"inf"}"#;
        let spec: OperatorSpec = serde_json::from_str(s).unwrap();
        assert_eq!(spec.kind, OpKind::R);
        assert!(spec.len.is_infinite());
        let back: OperatorSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let t: OperatorSpec = serde_json::from_str(r#"{"kind":"T","phi":{"kind":"power_log","a":1},"domain_length":2}"#).unwrap();
        assert_eq!(t.kind, OpKind::T);
        assert!(serde_json::from_str::<OperatorSpec>(r#"{"kind":"T","u":{"kind":"power_log","a":1}}"#).is_err());
        assert!(serde_json::from_str::<OperatorSpec>(r#"{"kind":"R","u":{"kind":"power_log","a":0},"v":{"kind":"power_log","a":0},"nu":{"kind":"power","alpha":2},"domain_length":3}"#).is_err());
    }
}
