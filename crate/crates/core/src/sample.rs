//! Seeded random step functions for the verification suites.
//!
//! Values are log-uniform in `[1e-3, 1e3]`, breakpoints log-uniform on a
//! scale set by the domain, at most `max_cells` cells.

use crate::functions::StepFunction;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

pub const VALUE_RANGE: (f64, f64) = (1e-3, 1e3);

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `i` derived from `seed`, so parallel samples do not
/// depend on scheduling.
pub fn stream(seed: u64, i: u64) -> SampleRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(i + 1);
    r
}

pub fn log_uniform(rng: &mut SampleRng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Breakpoint scale: `(1e-3 L, L)` for finite `L`, else `(1e-3, 1e3)`.
fn span(len: f64) -> (f64, f64) {
    if len.is_finite() {
        (1e-3 * len, len)
    } else {
        (1e-3, 1e3)
    }
}

/// `k` sorted distinct breakpoints in the span.
fn breakpoints(rng: &mut SampleRng, len: f64, k: usize) -> Vec<f64> {
    let (lo, hi) = span(len);
    loop {
        let mut b: Vec<f64> = (0..k).map(|_| log_uniform(rng, lo, hi)).collect();
        if len.is_finite() && rng.gen_bool(0.5) {
            // Full support half of the time.
            b[k - 1] = len;
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        if b.len() == k && b.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9)) {
            return b;
        }
    }
}

/// A step function with at most `max_cells` cells, values in random order.
pub fn random_step(rng: &mut SampleRng, len: f64, max_cells: usize) -> StepFunction {
    let k = rng.gen_range(1..=max_cells.max(1));
    let mut knots = vec![0.0];
    knots.extend(breakpoints(rng, len, k));
    let values: Vec<f64> = (0..k).map(|_| log_uniform(rng, VALUE_RANGE.0, VALUE_RANGE.1)).collect();
    StepFunction::new(len, knots, values).expect("random step function")
}

/// A nonincreasing step function with at most `max_cells` levels.
pub fn random_nonincreasing(rng: &mut SampleRng, len: f64, max_cells: usize) -> StepFunction {
    let f = random_step(rng, len, max_cells);
    let mut v = f.values().to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    StepFunction::new(len, f.knots().to_vec(), v).expect("random step function")
}

/// `sum c_i chi_(0, a_i)` with `n` terms, as `(c_i, a_i)` pairs.
pub fn random_simple(rng: &mut SampleRng, len: f64, n: usize) -> Vec<(f64, f64)> {
    let a = breakpoints(rng, len, n.max(1));
    a.into_iter().map(|ai| (log_uniform(rng, VALUE_RANGE.0, VALUE_RANGE.1), ai)).collect()
}

pub fn simple_function(len: f64, terms: &[(f64, f64)]) -> StepFunction {
    terms.iter().fold(StepFunction::zero(len), |acc, &(c, a)| {
        acc.add(&StepFunction::indicator(len, 0.0, a, c).expect("term inside the domain"))
    })
}

/// A random permutation of the cells of `f` (an equimeasurable step function).
pub fn shuffle_cells(rng: &mut SampleRng, f: &StepFunction) -> StepFunction {
    let mut cells: Vec<(f64, f64)> = f.cells().map(|(a, b, v)| (b - a, v)).collect();
    cells.shuffle(rng);
    let mut knots = vec![0.0];
    let mut vals = Vec::new();
    let mut x = 0.0;
    for (m, v) in cells {
        x += m;
        knots.push(x);
        vals.push(v);
    }
    let last = knots.len() - 1;
    knots[last] = knots[last].min(f.domain_length());
    StepFunction::new(f.domain_length(), knots, vals).expect("permuted cells")
}
