//! Optimal-norm functionals.
//!
//! * `rho_r(f) = ||R_{u,v,nu}(f*)||_X`, a norm iff `xi` (see [`xi_profile`]) lies in `X`;
//! * the equimeasurable supremum `sup_{h ~ f} ||H_{u,v,nu} h||_X`, bracketed from
//!   below by transported step functions ([`rho_h_bracket`]);
//! * `rho_tilde(f) = sup_{||g||_{X'} <= 1} \int f* R_{u,v,nu^{-1}}(T_phi g)` with
//!   `phi = u / xi` and `1/v(t) = \int_0^{nu^{-1}(t)} xi`.
//!
//! By duality `rho_tilde(f) = sup_g \int T_phi g . H_{u,v,nu}(f*)`, which is what
//! is computed. For `X = L^1` the supremum sits at `g = 1`; for `X = L^inf` it
//! sits on the extreme points `chi_(0,a)/a` of the unit ball of `L^1`, because
//! `T_phi` is sublinear on nonincreasing functions. Both cases are exact;
//! other spaces fall back to candidate ascent and give a lower estimate.

use crate::error::{Error, Result};
use crate::functions::{transport, Layout, StepFunction};
use crate::operators::{FnProfile, HImage, Hypothesis, OperatorSpec, Profile, RImage, SupImage, WeightOn, WeightedStep};
use crate::par;
use crate::quad::{self, Tol};
use crate::sample;
use crate::spaces::{associate_space, norm, norm_profile, norm_profile_with, NormMethod, NormValue, SpaceSpec};
use crate::tolerances::*;
use crate::weights::{check_delta, check_nondegenerate, geometric_grid, Bijection, Confidence, Endpoint, Mode, Monotonicity, Weight};
use serde::Serialize;

/// Replace a weight by its closed power form when the algebra allows it.
fn tidy(w: Weight) -> Weight {
    match w.as_power() {
        Some((c, a)) => {
            let m = w.monotonicity;
            let p = Weight::power(c, a);
            if m == Monotonicity::None || a == 0.0 {
                p
            } else {
                p.with_monotonicity(m)
            }
        }
        None => w,
    }
}

// ---------------------------------------------------------------- R

/// `v(t) U(nu(t))`, with the tail `v(t)` on `(1, inf)` when `L = inf`.
pub fn xi_profile(u: &Weight, v: &Weight, nu: &Bijection, len: f64) -> Result<Weight> {
    if !check_nondegenerate(u, len) {
        return Err(Error::Hypothesis("u is degenerate".into()));
    }
    if len.is_finite() && !(u.eval(len.next_down()) > 0.0) {
        return Err(Error::Hypothesis("u(L-) must be positive".into()));
    }
    let head = tidy(Weight::product(v.clone(), Weight::composed(Weight::primitive_of(u.clone()), nu.clone())));
    if len.is_finite() {
        Ok(head)
    } else {
        Weight::split(1.0, head, v.clone(), Monotonicity::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub norm: NormValue,
    pub method: NormMethod,
}

/// Whether `xi` lies in `X`; `false` means no r.i. domain exists for `R`.
pub fn xi_membership(x: &SpaceSpec, u: &Weight, v: &Weight, nu: &Bijection, len: f64) -> Result<Membership> {
    let xi = xi_profile(u, v, nu, len)?;
    let (n, method) = norm_profile_with(x, &WeightOn { w: xi, len }, DEFAULT_GRID)?;
    Ok(Membership { member: n.is_finite(), norm: n, method })
}

/// `||R_{u,v,nu}(f*)||_X`.
pub fn rho_r(x: &SpaceSpec, spec: &OperatorSpec, f: &StepFunction, grid: usize) -> Result<NormValue> {
    let m = xi_membership(x, &spec.u, &spec.v, &spec.nu, spec.len)?;
    if !m.member {
        return Err(Error::NoOptimalSpace("xi is not in X; R has no r.i. domain for X".into()));
    }
    if f.is_zero() {
        return Ok(NormValue::Finite(0.0));
    }
    let img = RImage::new(spec, &f.rearrange())?;
    Ok(norm_profile_with(x, &img, grid)?.0)
}

/// `1 / v(t) = \int_0^{nu^{-1}(t)} xi`.
pub fn build_v_from_xi(xi: &Weight, nu: &Bijection, len: f64) -> Result<Weight> {
    let probe = if len.is_finite() { 0.5 * len } else { 1.0 };
    let p = xi.primitive(probe)?;
    if !p.is_finite() {
        return Err(Error::Divergent("the primitive of xi diverges".into()));
    }
    Ok(tidy(Weight::reciprocal_primitive(xi.clone(), nu.clone())))
}

// ---------------------------------------------------------------- rho tilde

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TildeMethod {
    /// `X = L^1`: the supremum is attained at `g = 1`.
    UnitFunction,
    /// `X = L^inf`: supremum over `chi_(0,a)/a`.
    ExtremePoints,
    /// `phi` nonincreasing: `T_phi g = g*` and the functional is `||H f*||_X`.
    Collapse,
    /// Candidate ascent on nonincreasing steps; a lower estimate.
    CandidateAscent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoTilde {
    pub value: f64,
    /// Exact up to quadrature (not a mere lower estimate).
    pub exact: bool,
    pub method: TildeMethod,
    /// `||H_{u,v,nu}(f*)||_X`.
    pub h_norm: f64,
    pub phi_monotonicity: Monotonicity,
    pub witness: String,
}

/// `phi = u / xi` with a verified monotonicity flag.
pub fn phi_weight(u: &Weight, xi: &Weight, len: f64) -> Weight {
    let phi = tidy(Weight::product(u.clone(), Weight::reciprocal(xi.clone())));
    if phi.monotonicity != Monotonicity::None && !phi.verify_monotonicity(len) {
        return phi.with_monotonicity(Monotonicity::None);
    }
    phi
}

/// `sup_{tau in [s, L)} phi(tau)` for nondecreasing `phi`: `phi(L-)`.
fn phi_at_end(phi: &Weight, len: f64) -> f64 {
    if len.is_finite() {
        return phi.eval(len.next_down());
    }
    let (a, b) = (phi.eval(1e200), phi.eval(1e300));
    if b > a * (1.0 + 1e-9) {
        f64::INFINITY
    } else {
        b
    }
}

pub fn rho_tilde(
    x: &SpaceSpec,
    u: &Weight,
    xi: &Weight,
    nu: &Bijection,
    f: &StepFunction,
    budget: usize,
) -> Result<RhoTilde> {
    let len = f.domain_length();
    let v = build_v_from_xi(xi, nu, len)?;
    let phi = phi_weight(u, xi, len);
    let pm = phi.monotonicity;
    let spec = OperatorSpec::h(u.clone(), v, nu.clone(), len);
    let fstar = f.rearrange();
    let h = HImage::new(&spec, &fstar);
    let h_norm = norm_profile(x, &h)?.value();
    let done = |value: f64, exact: bool, method: TildeMethod, witness: String| {
        Ok(RhoTilde { value, exact, method, h_norm, phi_monotonicity: pm, witness })
    };
    if fstar.is_zero() {
        return done(0.0, true, TildeMethod::Collapse, "f = 0".into());
    }
    let end = h.support_end();
    let mut kinks = h.kinks();
    kinks.extend(phi.kinks().into_iter().filter(|&k| k < end));
    kinks.sort_by(f64::total_cmp);
    match (x, pm) {
        (SpaceSpec::Lebesgue { p }, Monotonicity::Nonincreasing | Monotonicity::Nondecreasing) if *p == 1.0 => {
            // \int (sup_{tau >= s} phi(tau) / phi(s)) h(s) ds.
            let value = if pm == Monotonicity::Nonincreasing {
                norm_profile(&SpaceSpec::lebesgue(1.0), &h)?.value()
            } else {
                let top = phi_at_end(&phi, len);
                let q = FnProfile {
                    f: |s: f64| {
                        let hs = h.eval(s);
                        if hs == 0.0 {
                            0.0
                        } else {
                            hs / phi.eval(s)
                        }
                    },
                    len,
                    kinks: kinks.clone(),
                    support_end: end,
                    monotonicity: Monotonicity::None,
                };
                top * norm_profile(&SpaceSpec::lebesgue(1.0), &q)?.value()
            };
            done(value, true, TildeMethod::UnitFunction, "g = 1".into())
        }
        (SpaceSpec::Lebesgue { p }, Monotonicity::Nonincreasing | Monotonicity::Nondecreasing) if p.is_infinite() => {
            let (value, a) = extreme_point_sup(&h, &phi, &kinks, end, len);
            done(value, true, TildeMethod::ExtremePoints, format!("g = chi_(0,{a:e}) / {a:e}"))
        }
        (_, Monotonicity::Nonincreasing) => done(h_norm, true, TildeMethod::Collapse, "T_phi g = g*".into()),
        _ => {
            let (value, w) = tilde_ascent(x, &phi, &h, &fstar, budget)?;
            done(value, false, TildeMethod::CandidateAscent, w)
        }
    }
}

/// `sup_a (1/a) \int_0^a h(s) sup_{tau in [s,a)} phi(tau) / phi(s) ds` for
/// monotone `phi`, over a geometric grid of `a` with golden refinement.
fn extreme_point_sup(h: &HImage, phi: &Weight, kinks: &[f64], end: f64, len: f64) -> (f64, f64) {
    let nondecreasing = phi.monotonicity == Monotonicity::Nondecreasing;
    let q = |s: f64| {
        let hs = h.eval(s);
        if hs == 0.0 {
            0.0
        } else if nondecreasing {
            hs / phi.eval(s)
        } else {
            hs
        }
    };
    let scale = |a: f64| if nondecreasing { phi.eval(a.next_down()) / a } else { 1.0 / a };
    let top = if len.is_finite() { len } else { end * 1e6 };
    let tol = Tol::rel(PROFILE_REL);
    let mut grid = geometric_grid(end * 1e-30, top, 32, f64::INFINITY);
    let g0 = grid[0];
    grid.extend(kinks.iter().copied().filter(|&k| k > g0 && k < top));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut best = (0.0, grid[0]);
    for &a in &[end * 1e-200, end * 1e-100] {
        let j = scale(a) * quad::integrate(&q, 0.0, a, tol).value;
        if j > best.0 {
            best = (j, a);
        }
    }
    let mut acc = quad::integrate(&q, 0.0, grid[0], tol).value;
    let mut cum = vec![acc];
    for w in grid.windows(2) {
        acc += quad::gk_finite(&q, w[0], w[1], tol).value;
        cum.push(acc);
    }
    let mut bi = 0;
    for (i, (&a, &c)) in grid.iter().zip(&cum).enumerate() {
        let j = scale(a) * c;
        if j > best.0 {
            best = (j, a);
            bi = i;
        }
    }
    // Golden refinement on the neighbouring cells.
    if bi > 0 && bi + 1 < grid.len() {
        let lo = grid[bi - 1];
        let base = cum[bi - 1];
        let j = |la: f64| {
            let a = la.exp();
            scale(a) * (base + quad::gk_finite(&q, lo, a, tol).value)
        };
        let (mut l, mut r) = (lo.ln(), grid[bi + 1].ln());
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let (c, d) = (r - g * (r - l), l + g * (r - l));
            if j(c) > j(d) {
                r = d;
            } else {
                l = c;
            }
        }
        let a = (0.5 * (l + r)).exp();
        let v = j(a.ln());
        if v > best.0 {
            best = (v, a);
        }
    }
    best
}

/// Candidate ascent for general `X`: `g = sum_k w_k chi_(0,b_k)`, normalized
/// in `X'`, scored by `\int T_phi g . h`.
fn tilde_ascent(x: &SpaceSpec, phi: &Weight, h: &HImage, fstar: &StepFunction, budget: usize) -> Result<(f64, String)> {
    let dual = associate_space(x)?;
    let len = fstar.domain_length();
    let end = h.support_end();
    let hi = if len.is_finite() { len } else { end * 1e3 };
    let mut bs: Vec<f64> = geometric_grid(hi * 1e-6, hi, 2, f64::INFINITY);
    bs.extend(fstar.knots()[1..].iter().copied());
    bs.retain(|&b| b > 0.0 && b <= len);
    bs.sort_by(f64::total_cmp);
    bs.dedup();
    let build = |w: &[f64]| -> Option<StepFunction> {
        let mut vals = vec![0.0; bs.len()];
        let mut acc = 0.0;
        for k in (0..bs.len()).rev() {
            acc += w[k];
            vals[k] = acc;
        }
        let mut knots = vec![0.0];
        knots.extend(bs.iter().copied());
        StepFunction::new(len, knots, vals).ok()
    };
    let score = |w: &[f64]| -> f64 {
        let Some(g) = build(w) else { return 0.0 };
        let n = norm(&dual, &g).map_or(f64::INFINITY, |n| n.value());
        if !(n > 0.0 && n.is_finite()) {
            return 0.0;
        }
        let t = SupImage::new(phi, &g);
        let mut kinks = h.kinks();
        kinks.extend(t.kinks());
        kinks.retain(|&k| k < end);
        kinks.sort_by(f64::total_cmp);
        let prod = FnProfile {
            f: |s: f64| {
                let a = h.eval(s);
                if a == 0.0 {
                    0.0
                } else {
                    a * t.eval(s)
                }
            },
            len,
            kinks,
            support_end: end.min(g.support_bound()),
            monotonicity: Monotonicity::None,
        };
        norm_profile(&SpaceSpec::lebesgue(1.0), &prod).map_or(0.0, |v| v.value()) / n
    };
    let singles: Vec<f64> = par::map_range(bs.len(), |k| {
        let mut w = vec![0.0; bs.len()];
        w[k] = 1.0;
        score(&w)
    });
    let (k0, mut best) = singles.iter().enumerate().fold((0, 0.0), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    let mut w = vec![0.0; bs.len()];
    w[k0] = 1.0;
    let mut step = 1.0;
    let mut sweeps = 0;
    while sweeps < budget && step > 1e-4 {
        let tries: Vec<(f64, Vec<f64>)> = par::map_range(2 * bs.len(), |i| {
            let (k, d): (usize, f64) = (i / 2, if i % 2 == 0 { step } else { -step });
            let mut c = w.clone();
            c[k] = (c[k] + d).max(0.0);
            (score(&c), c)
        });
        let top = tries.into_iter().fold((0.0, vec![]), |a, b| if b.0 > a.0 { b } else { a });
        if top.0 > best * (1.0 + 1e-12) {
            best = top.0;
            w = top.1;
        } else {
            step *= 0.5;
        }
        sweeps += 1;
    }
    Ok((best, format!("ascent over {} indicator levels, {sweeps} sweeps", bs.len())))
}

/// Lower estimate of `||T_phi||` on `Y` from `samples` random nonincreasing
/// steps; a reported constant, not a certified bound.
pub fn t_phi_norm_estimate(phi: &Weight, y: &SpaceSpec, len: f64, samples: usize, seed: u64) -> f64 {
    let ratios = par::map_range(samples, |i| {
        let mut rng = sample::stream(seed, i as u64);
        let g = sample::random_nonincreasing(&mut rng, len, 8);
        let n = norm(y, &g).map_or(f64::NAN, |n| n.value());
        if !(n > 0.0 && n.is_finite()) {
            return 0.0;
        }
        norm_profile(y, &SupImage::new(phi, &g)).map_or(0.0, |v| v.value()) / n
    });
    ratios.into_iter().fold(1.0, f64::max)
}

// ---------------------------------------------------------------- H bracket

/// The assumption under which the equimeasurable supremum is a norm.
pub fn h_assumption(x: &SpaceSpec, spec: &OperatorSpec) -> Result<Vec<Hypothesis>> {
    let len = spec.len;
    let mut out = Vec::new();
    let mono = |w: &Weight| w.monotonicity == Monotonicity::Nonincreasing && w.verify_monotonicity(len);
    out.push(Hypothesis::new("u nonincreasing", mono(&spec.u), Confidence::Probed));
    out.push(Hypothesis::new("v nonincreasing", mono(&spec.v), Confidence::Probed));
    if len.is_finite() {
        out.push(Hypothesis::new("v(L-) > 0", spec.v.eval(len.next_down()) > 0.0, Confidence::Exact));
        let one = StepFunction::indicator(len, 0.0, len, 1.0)?;
        let n = norm_profile(x, &HImage::new(spec, &one))?;
        out.push(
            Hypothesis::new("u(t) int_{nu(t)}^L v in X", n.is_finite(), Confidence::Probed)
                .with_detail(format!("norm {}", n.value())),
        );
    } else {
        let d = check_delta(&spec.nu, Endpoint::Infinity, Mode::Inf, 2.0, len)?;
        out.push(Hypothesis::new("nu in Delta^inf at inf", d.verdict, d.confidence).with_detail(format!("estimate {}", d.estimate)));
        let one = StepFunction::indicator(len, 0.0, 1.0, 1.0)?;
        let n = norm_profile(x, &HImage::new(spec, &one))?;
        out.push(
            Hypothesis::new("u chi_(0,nu^{-1}(1)) int_{nu(t)}^1 v in X", n.is_finite(), Confidence::Probed)
                .with_detail(format!("norm {}", n.value())),
        );
        // limsup_{tau -> inf} v(tau) ||u chi_(0, nu^{-1}(tau))||_X on tau = 10^k.
        let q: Vec<f64> = (1..=9)
            .map(|k| {
                let tau = 10f64.powi(k);
                let g = StepFunction::indicator(len, 0.0, spec.nu.inverse(tau), 1.0).expect("finite indicator");
                let n = norm_profile(x, &WeightedStep { w: spec.u.clone(), g }).map_or(f64::INFINITY, |n| n.value());
                spec.v.eval(tau) * n
            })
            .collect();
        let ok = q.iter().all(|v| v.is_finite()) && q[8] <= 2.0 * q[4].max(q[0]) * (1.0 + 1e-9);
        out.push(
            Hypothesis::new("limsup v(tau) ||u chi_(0,nu^{-1}(tau))||_X finite", ok, Confidence::Probed)
                .with_detail(format!("values at 10^1..10^9: {q:?}")),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateValue {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: Option<f64>,
    /// `upper` follows from an exact `rho_tilde`; otherwise it uses the
    /// estimated `||T_phi||` and is heuristic.
    pub upper_certified: bool,
    pub witness: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<Layout>,
    pub h_norm: f64,
    pub trace: Vec<CandidateValue>,
}

/// Largest slot count searched exhaustively.
pub const EXHAUSTIVE_SLOTS: usize = 7;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    fn rec(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == p.len() {
            out.push(p.clone());
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            rec(k + 1, p, out);
            p.swap(k, i);
        }
    }
    rec(0, &mut p, &mut out);
    out
}

/// Lower bound for `sup_{h ~ f} ||H_{u,v,nu} h||_X` over transports of `f*`
/// (the rearrangement, reflections, translations, permutations of `m <=
/// n_cells` equal-measure pieces: exhaustive up to [`EXHAUSTIVE_SLOTS`]
/// slots, pairwise-swap descent with `budget` evaluations beyond). When a
/// factorization `1/v = \int_0^{nu^{-1}} xi` is supplied, the upper end comes
/// from `rho_tilde`.
pub fn rho_h_bracket(
    x: &SpaceSpec,
    spec: &OperatorSpec,
    f: &StepFunction,
    n_cells: usize,
    budget: usize,
    xi: Option<&Weight>,
) -> Result<Bracket> {
    let hyp = h_assumption(x, spec)?;
    if let Some(h) = hyp.iter().find(|h| !h.holds) {
        return Err(Error::NoOptimalSpace(format!("assumption fails: {}", h.name)));
    }
    let len = spec.len;
    let fstar = f.rearrange();
    let eval = |h: &StepFunction| norm_profile(x, &HImage::new(spec, h)).map_or(f64::INFINITY, |n| n.value());
    let h_norm = eval(&fstar);
    let mut trace = vec![CandidateValue { label: "rearrangement".into(), value: h_norm }];
    let mut best = (h_norm, "rearrangement".to_string(), Some(Layout::identity(&fstar)));
    let s = fstar.support_measure();
    let mut consider = |label: String, layout: Layout, trace: &mut Vec<CandidateValue>| -> Result<()> {
        let h = transport(&fstar, &layout)?;
        let v = eval(&h);
        trace.push(CandidateValue { label: label.clone(), value: v });
        if v > best.0 {
            best = (v, label, Some(layout));
        }
        Ok(())
    };
    if s > 0.0 {
        let a = if len.is_finite() { len } else { s };
        consider(format!("reflection at {a}"), Layout::reflection(&fstar, a), &mut trace)?;
        if len.is_finite() && len > s {
            for k in 1..=8 {
                let shift = (len - s) * k as f64 / 8.0;
                consider(format!("translation by {shift}"), Layout::translation(&fstar, shift), &mut trace)?;
            }
        }
        let gap = if len.is_finite() { len - s } else { 0.0 };
        for m in 2..=n_cells.max(1) {
            let pieces: Vec<[f64; 2]> = (0..m).map(|i| [s * i as f64 / m as f64, s * (i + 1) as f64 / m as f64]).collect();
            let mut slots: Vec<Option<usize>> = (0..m).map(Some).collect();
            if gap > 0.0 {
                slots.push(None);
            }
            let n = slots.len();
            let layout_of = |perm: &[usize]| {
                let order: Vec<Option<usize>> = perm.iter().map(|&i| slots[i]).collect();
                let mut l = Layout::arrange(&pieces, &order, gap);
                // Guard against rounding past the end of the domain.
                if let Some(b) = l.blocks.last_mut() {
                    if len.is_finite() && b.target + b.length() > len {
                        b.target = len - b.length();
                    }
                }
                l
            };
            if n <= EXHAUSTIVE_SLOTS {
                let perms = permutations(n);
                let vals = par::map(&perms, |p| transport(&fstar, &layout_of(p)).map(|h| eval(&h)).unwrap_or(0.0));
                let (i, v) = vals.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
                trace.push(CandidateValue { label: format!("exhaustive over {n} slots"), value: v });
                if v > best.0 {
                    best = (v, format!("permutation {:?} of {m} pieces", perms[i]), Some(layout_of(&perms[i])));
                }
            } else {
                // Pairwise-swap descent from the identity order.
                let mut perm: Vec<usize> = (0..n).collect();
                let mut cur = transport(&fstar, &layout_of(&perm)).map(|h| eval(&h)).unwrap_or(0.0);
                let mut evals = 0;
                'outer: while evals < budget {
                    let mut improved = false;
                    for i in 0..n {
                        for j in i + 1..n {
                            if evals >= budget {
                                break 'outer;
                            }
                            perm.swap(i, j);
                            let v = transport(&fstar, &layout_of(&perm)).map(|h| eval(&h)).unwrap_or(0.0);
                            evals += 1;
                            if v > cur * (1.0 + 1e-14) {
                                cur = v;
                                improved = true;
                            } else {
                                perm.swap(i, j);
                            }
                        }
                    }
                    if !improved {
                        break;
                    }
                }
                trace.push(CandidateValue { label: format!("swap descent over {n} slots"), value: cur });
                if cur > best.0 {
                    best = (cur, format!("permutation {perm:?} of {m} pieces"), Some(layout_of(&perm)));
                }
            }
        }
    }
    let (upper, upper_certified) = match xi {
        None => (None, false),
        Some(xi) => {
            let v = build_v_from_xi(xi, &spec.nu, len)?;
            let grid = crate::weights::probe_grid(len);
            let same = grid.iter().all(|&t| {
                let (a, b) = (v.eval(t), spec.v.eval(t));
                (a - b).abs() <= 1e-8 * a.abs().max(b.abs())
            });
            if !same {
                return Err(Error::InvalidSpec("v does not match the supplied xi factorization".into()));
            }
            let t = rho_tilde(x, &spec.u, xi, &spec.nu, f, 20)?;
            if t.exact {
                (Some(t.value), true)
            } else {
                let phi = phi_weight(&spec.u, xi, len);
                match associate_space(x) {
                    Ok(dual) => (Some(t_phi_norm_estimate(&phi, &dual, len, 200, DEFAULT_SEED) * h_norm), false),
                    Err(_) => (None, false),
                }
            }
        }
    };
    Ok(Bracket { lower: best.0, upper, upper_certified, witness: best.1, layout: best.2, h_norm, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::Interp;

    const INF: f64 = f64::INFINITY;

    fn chi(len: f64, a: f64, b: f64, c: f64) -> StepFunction {
        StepFunction::indicator(len, a, b, c).unwrap()
    }

    fn one() -> Weight {
        Weight::constant(1.0)
    }

    #[test]
    fn xi_examples() {
        let id = Bijection::identity();
        let xi = xi_profile(&one(), &Weight::power(1.0, -1.0), &id, 1.0).unwrap();
        assert_eq!(xi.as_power(), Some((1.0, 0.0)));
        let xi = xi_profile(&one(), &Weight::power(1.0, -2.0), &id, 1.0).unwrap();
        assert_eq!(xi.as_power(), Some((1.0, -1.0)));
        let xi = xi_profile(&one(), &one(), &id, INF).unwrap();
        for (t, want) in [(0.25, 0.25), (0.5, 0.5), (2.0, 1.0), (50.0, 1.0)] {
            assert!((xi.eval(t) - want).abs() < 1e-14);
        }
        let degenerate = Weight::tabulated(vec![[0.0, 1.0], [0.5, 0.0]], Interp::Step, Monotonicity::Nonincreasing).unwrap();
        assert!(matches!(xi_profile(&degenerate, &one(), &id, 1.0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn membership_examples() {
        let id = Bijection::identity();
        let linf = SpaceSpec::lebesgue(INF);
        assert!(xi_membership(&linf, &one(), &Weight::power(1.0, -1.0), &id, 1.0).unwrap().member);
        assert!(!xi_membership(&linf, &one(), &Weight::power(1.0, -2.0), &id, 1.0).unwrap().member);
        let l1 = SpaceSpec::lebesgue(1.0);
        assert!(xi_membership(&l1, &one(), &Weight::power(1.0, -1.5), &id, 1.0).unwrap().member);
    }

    #[test]
    fn rho_r_examples() {
        let id = Bijection::identity();
        let spec = OperatorSpec::r(one(), Weight::power(1.0, -1.0), id.clone(), INF);
        let r = rho_r(&SpaceSpec::lebesgue(INF), &spec, &chi(INF, 0.0, 1.0, 3.0), DEFAULT_GRID).unwrap();
        assert!((r.value() - 3.0).abs() < 1e-12);
        let spec = OperatorSpec::r(one(), one(), id.clone(), 1.0);
        let r = rho_r(&SpaceSpec::lebesgue(1.0), &spec, &chi(1.0, 0.0, 1.0, 1.0), DEFAULT_GRID).unwrap();
        assert!((r.value() - 0.5).abs() < 1e-9);
        assert_eq!(rho_r(&SpaceSpec::lebesgue(1.0), &spec, &StepFunction::zero(1.0), 64).unwrap().value(), 0.0);
        let bad = OperatorSpec::r(one(), Weight::power(1.0, -2.0), id, 1.0);
        assert!(matches!(
            rho_r(&SpaceSpec::lebesgue(INF), &bad, &chi(1.0, 0.0, 1.0, 1.0), 64),
            Err(Error::NoOptimalSpace(_))
        ));
    }

    #[test]
    fn build_v_examples() {
        let v = build_v_from_xi(&one(), &Bijection::identity(), INF).unwrap();
        assert_eq!(v.as_power(), Some((1.0, -1.0)));
        let v = build_v_from_xi(&one(), &Bijection::power(2.0), INF).unwrap();
        assert_eq!(v.as_power(), Some((1.0, -0.5)));
        let v = build_v_from_xi(&Weight::power(1.0, -0.5), &Bijection::identity(), INF).unwrap();
        assert_eq!(v.as_power(), Some((0.5, -0.5)));
        assert!(v.monotonicity == Monotonicity::Nonincreasing);
        assert!(build_v_from_xi(&Weight::power(1.0, -1.0), &Bijection::identity(), INF).is_err());
    }

    /// `||H f*||_X` for `X = L^2(0,1)`, `u = xi = 1`: `Hf(t) = \int_t^1 ds/s`
    /// for `f = chi_(0,1)`, so `||H f||_2^2 = \int_0^1 ln(t)^2 = 2`.
    #[test]
    fn rho_tilde_collapse_l2() {
        let f = chi(1.0, 0.0, 1.0, 1.0);
        let t = rho_tilde(&SpaceSpec::lebesgue(2.0), &one(), &one(), &Bijection::identity(), &f, 10).unwrap();
        assert!(t.exact && t.method == TildeMethod::Collapse);
        assert!((t.h_norm - 2f64.sqrt()).abs() < 1e-8, "{}", t.h_norm);
        assert!(t.value >= t.h_norm * 0.999);
        let z = rho_tilde(&SpaceSpec::lebesgue(2.0), &one(), &one(), &Bijection::identity(), &StepFunction::zero(1.0), 10).unwrap();
        assert_eq!(z.value, 0.0);
    }

    /// `u = 1`, `xi = t^{-g}` on `(0,1)`: `phi = t^g` nondecreasing,
    /// `v = (1-g) t^{g-1}`, `f = chi_(0,1)` gives `h(s) = 1 - s^g`.
    /// `X = L^1`: `\int_0^1 (1 - s^g) s^{-g} = 1/(1-g) - 1`.
    /// `X = L^inf`: `J(a) = (a^g/a) \int_0^a (s^{-g} - 1) = 1/(1-g) - a^g`, sup `1/(1-g)`.
    #[test]
    fn rho_tilde_exact_cases() {
        let g = 0.5;
        let xi = Weight::power(1.0, -g);
        let f = chi(1.0, 0.0, 1.0, 1.0);
        let id = Bijection::identity();
        let t1 = rho_tilde(&SpaceSpec::lebesgue(1.0), &one(), &xi, &id, &f, 0).unwrap();
        assert_eq!(t1.method, TildeMethod::UnitFunction);
        assert!((t1.value - (1.0 / (1.0 - g) - 1.0)).abs() < 1e-8, "{}", t1.value);
        // ||h||_1 = 1 - 1/(1+g).
        assert!((t1.h_norm - (1.0 - 1.0 / (1.0 + g))).abs() < 1e-9);
        let ti = rho_tilde(&SpaceSpec::lebesgue(INF), &one(), &xi, &id, &f, 0).unwrap();
        assert_eq!(ti.method, TildeMethod::ExtremePoints);
        assert!((ti.value - 1.0 / (1.0 - g)).abs() < 1e-6, "{}", ti.value);
        assert!((ti.h_norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rho_tilde_collapse_matches_dual_formulas() {
        // u = t^{-1/4} nonincreasing, xi = 1: phi = u nonincreasing.
        let u = Weight::power(1.0, -0.25);
        let f = StepFunction::from_levels(1.0, &[(3.0, 0.2), (1.0, 0.5)]).unwrap();
        let t = rho_tilde(&SpaceSpec::lebesgue(1.0), &u, &one(), &Bijection::identity(), &f, 0).unwrap();
        assert!((t.value - t.h_norm).abs() <= 1e-8 * t.h_norm);
        let u = one();
        let xi = Weight::power(1.0, 0.5).with_monotonicity(Monotonicity::Nondecreasing);
        let t = rho_tilde(&SpaceSpec::lebesgue(INF), &u, &xi, &Bijection::identity(), &f, 0).unwrap();
        assert_eq!(t.phi_monotonicity, Monotonicity::Nonincreasing);
        assert!((t.value - t.h_norm).abs() <= 1e-6 * t.h_norm, "{} vs {}", t.value, t.h_norm);
    }

    #[test]
    fn bracket_collapses() {
        let u = one();
        let id = Bijection::identity();
        let v = build_v_from_xi(&u, &id, 1.0).unwrap();
        let spec = OperatorSpec::h(u.clone(), v, id, 1.0);
        let f = StepFunction::from_levels(1.0, &[(2.0, 0.25), (1.0, 0.25)]).unwrap();
        // u(t) \int_t^1 ds/s = -ln t is not bounded: no optimal domain for L^inf.
        assert!(matches!(
            rho_h_bracket(&SpaceSpec::lebesgue(INF), &spec, &f, 4, 50, Some(&u)),
            Err(Error::NoOptimalSpace(_))
        ));
        for x in [SpaceSpec::lebesgue(1.0), SpaceSpec::lebesgue(2.0)] {
            let b = rho_h_bracket(&x, &spec, &f, 4, 50, Some(&u)).unwrap();
            let up = b.upper.unwrap();
            assert!(b.upper_certified);
            assert!((b.lower - b.h_norm).abs() <= 1e-9 * b.h_norm, "{x:?}: {} vs {}", b.lower, b.h_norm);
            assert!((up - b.h_norm).abs() <= 1e-6 * b.h_norm, "{x:?}: {up} vs {}", b.h_norm);
        }
    }

    #[test]
    fn bracket_single_level_and_six_cells() {
        let spec = OperatorSpec::h(one(), Weight::power(1.0, -0.5), Bijection::identity(), 1.0);
        let x = SpaceSpec::lebesgue(INF);
        let f = chi(1.0, 0.0, 0.5, 1.0);
        let b = rho_h_bracket(&x, &spec, &f, 6, 100, None).unwrap();
        // ||H h||_inf = \int h s^{-1/2}, largest with the mass at 0: 2 sqrt(1/2).
        assert!((b.h_norm - 2f64.sqrt()).abs() < 1e-9);
        assert!((b.lower - b.h_norm).abs() < 1e-9);
        assert!(b.upper.is_none());
        // Monotone refinement.
        let b3 = rho_h_bracket(&SpaceSpec::lebesgue(2.0), &spec, &f, 3, 10, None).unwrap();
        let b5 = rho_h_bracket(&SpaceSpec::lebesgue(2.0), &spec, &f, 5, 10, None).unwrap();
        assert!(b5.lower >= b3.lower && b3.lower >= b3.h_norm);
    }

    #[test]
    fn bracket_assumption_failure() {
        // X = L^1(0, inf), u = 1, v = t^{-1/2}: v(tau) ||chi_(0,tau)||_1 = sqrt(tau) grows.
        let spec = OperatorSpec::h(one(), Weight::power(1.0, -0.5), Bijection::identity(), INF);
        let f = chi(INF, 0.0, 1.0, 1.0);
        assert!(matches!(
            rho_h_bracket(&SpaceSpec::lebesgue(1.0), &spec, &f, 3, 10, None),
            Err(Error::NoOptimalSpace(_))
        ));
        assert!(rho_h_bracket(&SpaceSpec::lebesgue(INF), &spec, &f, 3, 10, None).is_ok());
    }

    #[test]
    fn t_phi_estimate_is_at_least_one() {
        let phi = Weight::power(1.0, 0.5);
        let e = t_phi_norm_estimate(&phi, &SpaceSpec::lebesgue(1.0), 1.0, 20, 1);
        assert!(e >= 1.0 && e.is_finite());
    }
}
