//! Adaptive quadrature.
//!
//! [`integrate`] is a global adaptive Gauss-Kronrod (7/15) rule. Intervals
//! touching 0 or infinity are mapped exponentially (`t = b e^{-x}` and
//! `t = a e^{x}`) and then compactified, which turns power and logarithmic
//! endpoint singularities into smooth decaying integrands.
//!
//! [`simpson`] is the adaptive Simpson rule used for weight primitives.

#![allow(clippy::excessive_precision)]

use crate::tolerances::{PROFILE_REL, QUAD_ABS_FLOOR, QUAD_MAX_SUBDIV};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub rel: f64,
    pub abs: f64,
    pub max_subdiv: usize,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { rel: PROFILE_REL, abs: QUAD_ABS_FLOOR, max_subdiv: QUAD_MAX_SUBDIV }
    }
}

impl Tol {
    pub fn rel(rel: f64) -> Self {
        Tol { rel, ..Tol::default() }
    }
}

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

struct Seg {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Seg {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Seg {}
impl PartialOrd for Seg {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Seg {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Global adaptive Gauss-Kronrod on a finite interval.
pub fn gk_finite(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: Tol) -> QuadResult {
    if !(b > a) {
        return QuadResult { value: 0.0, error: 0.0, converged: true };
    }
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Seg { a, b, val: v, err: e });
    let mut total = v;
    let mut err = e;
    let mut n = 1;
    loop {
        if !total.is_finite() {
            return QuadResult { value: total, error: f64::INFINITY, converged: false };
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return QuadResult { value: total, error: err, converged: true };
        }
        if n >= tol.max_subdiv {
            return QuadResult { value: total, error: err, converged: false };
        }
        let s = heap.pop().expect("heap holds at least one segment");
        let m = 0.5 * (s.a + s.b);
        if !(m > s.a && m < s.b) {
            // Interval exhausted in floating point; keep its contribution.
            heap.push(Seg { err: 0.0, ..s });
            err = heap.iter().map(|x| x.err).sum();
            if heap.iter().all(|x| x.err == 0.0) {
                return QuadResult { value: total, error: err, converged: false };
            }
            continue;
        }
        let (v1, e1) = gk15(f, s.a, m);
        let (v2, e2) = gk15(f, m, s.b);
        total += v1 + v2 - s.val;
        err += e1 + e2 - s.err;
        heap.push(Seg { a: s.a, b: m, val: v1, err: e1 });
        heap.push(Seg { a: m, b: s.b, val: v2, err: e2 });
        n += 1;
        if n % 64 == 0 {
            // Refresh the running sums to keep rounding drift out.
            total = heap.iter().map(|x| x.val).sum();
            err = heap.iter().map(|x| x.err).sum();
        }
    }
}

/// `\int_a^b f` for `0 <= a < b <= inf`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: Tol) -> QuadResult {
    if !(b > a) {
        return QuadResult { value: 0.0, error: 0.0, converged: true };
    }
    if a == 0.0 && b.is_infinite() {
        let r1 = integrate(f, 0.0, 1.0, tol);
        let r2 = integrate(f, 1.0, f64::INFINITY, tol);
        return QuadResult {
            value: r1.value + r2.value,
            error: r1.error + r2.error,
            converged: r1.converged && r2.converged,
        };
    }
    if a == 0.0 {
        // t = b e^{-x}, x = s/(1-s).
        let g = |s: f64| {
            if s >= 1.0 {
                return 0.0;
            }
            let x = s / (1.0 - s);
            let t = b * (-x).exp();
            if t <= 0.0 {
                return 0.0;
            }
            let w = t / ((1.0 - s) * (1.0 - s));
            let y = f(t) * w;
            if y.is_finite() {
                y
            } else {
                f64::INFINITY
            }
        };
        return gk_finite(&g, 0.0, 1.0, tol);
    }
    if b.is_infinite() {
        // t = a e^{x}, x = s/(1-s).
        let g = |s: f64| {
            if s >= 1.0 {
                return 0.0;
            }
            let x = s / (1.0 - s);
            let t = a * x.exp();
            if !t.is_finite() {
                return 0.0;
            }
            let y = f(t) * t / ((1.0 - s) * (1.0 - s));
            if y.is_nan() {
                0.0
            } else {
                y
            }
        };
        return gk_finite(&g, 0.0, 1.0, tol);
    }
    gk_finite(f, a, b, tol)
}

/// Integrate over `(a, b)` splitting at the given interior points.
pub fn integrate_pieces(f: &dyn Fn(f64) -> f64, a: f64, b: f64, cuts: &[f64], tol: Tol) -> QuadResult {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| c > a && c < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut lo = a;
    let mut acc = QuadResult { value: 0.0, error: 0.0, converged: true };
    for hi in pts.into_iter().chain(std::iter::once(b)) {
        let r = integrate(f, lo, hi, tol);
        acc.value += r.value;
        acc.error += r.error;
        acc.converged &= r.converged;
        lo = hi;
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    ok: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || !(m > a && m < b) {
        *ok = false;
        return left + right + delta / 15.0;
    }
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok)
}

/// Adaptive Simpson on a finite interval with a relative tolerance and an
/// absolute floor. The tolerance is made relative with a coarse estimate.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64, abs_floor: f64) -> QuadResult {
    if !(b > a) {
        return QuadResult { value: 0.0, error: 0.0, converged: true };
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let coarse = gk15(f, a, b).0;
    let tol = (rel * coarse.abs()).max(abs_floor);
    let mut ok = true;
    let v = simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48, &mut ok);
    QuadResult { value: v, error: tol, converged: ok && v.is_finite() }
}

/// `\int_s^\infty g` for a decaying integrand, summed over pieces of doubling
/// length with a geometric tail estimate. Returns `None` when the pieces do
/// not decay.
pub fn semi_infinite(g: &dyn Fn(f64) -> f64, s: f64, h: f64, rel: f64) -> Option<f64> {
    let mut lo = s;
    let mut width = h;
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let mut small = 0;
    for _ in 0..4000 {
        let hi = lo + width;
        let piece = simpson(g, lo, hi, rel * 0.1, 1e-300).value;
        total += piece;
        if let Some(p) = prev {
            if piece.abs() <= rel * 1e-2 * total.abs() {
                small += 1;
                if small >= 3 {
                    return Some(total);
                }
            } else {
                small = 0;
            }
            if p > 0.0 && piece > 0.0 {
                let r = piece / p;
                if r < 0.999 && piece / (1.0 - r) * r <= rel * 0.1 * total.abs() {
                    return Some(total + piece * r / (1.0 - r));
                }
            }
        }
        prev = Some(piece);
        lo = hi;
        width *= 2.0;
        if !lo.is_finite() {
            break;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_high_degree_polynomials() {
        // K15 integrates degree 22 exactly, G7 degree 13.
        let f = |x: f64| x.powi(22);
        let (v, _) = gk15(&f, 0.0, 1.0);
        assert!((v - 1.0 / 23.0).abs() < 1e-15);
        let g = |x: f64| x.powi(13) + 3.0 * x.powi(4);
        let (v, e) = gk15(&g, -1.0, 2.0);
        let exact = (2f64.powi(14) - 1.0) / 14.0 + 3.0 * (32.0 + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-11 * exact);
        assert!(e < 1e-9);
    }

    #[test]
    fn head_singularities() {
        let r = integrate(&|t: f64| t.powf(-0.5), 0.0, 4.0, Tol::default());
        assert!(r.converged);
        assert!((r.value - 4.0).abs() < 1e-10);
        let r = integrate(&|t: f64| t.powf(-0.9), 0.0, 1.0, Tol::default());
        assert!((r.value - 10.0).abs() < 1e-9, "{r:?}");
        let r = integrate(&|t: f64| (1.0 / t).ln().powi(2), 0.0, 1.0, Tol::default());
        assert!((r.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn tails() {
        let r = integrate(&|t: f64| t.powf(-1.5), 1.0, f64::INFINITY, Tol::default());
        assert!((r.value - 2.0).abs() < 1e-10, "{r:?}");
        let r = integrate(&|t: f64| (-t).exp(), 0.0, f64::INFINITY, Tol::default());
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_and_semi_infinite() {
        let r = simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 1e-300);
        assert!((r.value - 2.0).abs() < 1e-11);
        let v = semi_infinite(&|s: f64| (-0.5 * s).exp(), 0.0, 1.0, 1e-11).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        let v = semi_infinite(&|s: f64| 1.0 / (1.0 + s).powi(3), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 0.5).abs() < 1e-8, "{v}");
        assert!(semi_infinite(&|_s: f64| 1.0, 0.0, 1.0, 1e-10).is_none());
    }
}
