//! Step functions on `(0, L)`.
//!
//! A [`StepFunction`] is nonnegative, piecewise constant and compactly
//! supported: knots `0 = x_0 < x_1 < ... < x_n = T` with one value per cell
//! and zero on `(T, L)`. `L` may be `f64::INFINITY`. The representation is
//! canonical: adjacent cells with equal values are merged (exact equality)
//! and trailing zero cells are dropped, so the zero function has no cells.
//!
//! A [`Layout`] moves pieces of `f*` around to build functions
//! equimeasurable with `f`.

use crate::error::{Error, Result};
use crate::tolerances::MEASURE_REL;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub left: f64,
    pub right: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    len: f64,
    knots: Vec<f64>,
    values: Vec<f64>,
}

/// JSON form: `{"domain_length": L, "cells": [...]}`; a bare array of
/// cells is also accepted on input and means `L = inf`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRepr {
    #[serde(with = "crate::serde_len")]
    domain_length: f64,
    cells: Vec<Cell>,
}

/// Dispatches on the JSON shape so field errors keep their path.
struct StepVisitor;

impl<'de> serde::de::Visitor<'de> for StepVisitor {
    type Value = (f64, Vec<Cell>);
    fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str("an object {domain_length, cells} or an array of cells")
    }
    fn visit_map<A: serde::de::MapAccess<'de>>(self, map: A) -> std::result::Result<Self::Value, A::Error> {
        let r = StepRepr::deserialize(serde::de::value::MapAccessDeserializer::new(map))?;
        Ok((r.domain_length, r.cells))
    }
    fn visit_seq<A: serde::de::SeqAccess<'de>>(self, seq: A) -> std::result::Result<Self::Value, A::Error> {
        let c = Vec::<Cell>::deserialize(serde::de::value::SeqAccessDeserializer::new(seq))?;
        Ok((f64::INFINITY, c))
    }
}

impl Serialize for StepFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StepRepr { domain_length: self.len, cells: self.to_cells() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StepFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (len, cells) = d.deserialize_any(StepVisitor)?;
        StepFunction::from_cells(len, &cells).map_err(serde::de::Error::custom)
    }
}

fn check_len(len: f64) -> Result<()> {
    if len > 0.0 && !len.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidStep(format!("domain length must be positive, got {len}")))
    }
}

impl StepFunction {
    /// Validate and canonicalize.
    pub fn new(len: f64, knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_len(len)?;
        if knots.len() != values.len() + 1 {
            return Err(Error::InvalidStep(format!(
                "{} knots for {} values; expected one more knot than values",
                knots.len(),
                values.len()
            )));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidStep("first knot must be 0".into()));
        }
        for w in knots.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidStep(format!("knots not strictly increasing at {}", w[1])));
            }
        }
        if *knots.last().unwrap() > len {
            return Err(Error::InvalidStep(format!(
                "support bound {} exceeds domain length {len}",
                knots.last().unwrap()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidStep(format!("value {v} is not finite and nonnegative")));
        }
        Ok(Self::canonical(len, knots, values))
    }

    /// Merge equal neighbours and trim trailing zeros. Inputs are trusted.
    fn canonical(len: f64, knots: Vec<f64>, values: Vec<f64>) -> Self {
        let mut k = Vec::with_capacity(knots.len());
        let mut v: Vec<f64> = Vec::with_capacity(values.len());
        k.push(0.0);
        for (i, &val) in values.iter().enumerate() {
            let right = knots[i + 1];
            if !(right > *k.last().unwrap()) {
                continue;
            }
            if v.last() == Some(&val) {
                *k.last_mut().unwrap() = right;
            } else {
                v.push(val);
                k.push(right);
            }
        }
        while v.last() == Some(&0.0) {
            v.pop();
            k.pop();
        }
        StepFunction { len, knots: k, values: v }
    }

    pub fn zero(len: f64) -> Self {
        StepFunction { len, knots: vec![0.0], values: vec![] }
    }

    /// `c * chi_(a, b)`.
    pub fn indicator(len: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        if !(0.0 <= a && a < b) {
            return Err(Error::InvalidStep(format!("empty interval ({a}, {b})")));
        }
        if a == 0.0 {
            Self::new(len, vec![0.0, b], vec![c])
        } else {
            Self::new(len, vec![0.0, a, b], vec![0.0, c])
        }
    }

    /// Load from cells; uncovered gaps are zero, overlaps are an error.
    pub fn from_cells(len: f64, cells: &[Cell]) -> Result<Self> {
        check_len(len)?;
        let mut cs: Vec<Cell> = cells.to_vec();
        for c in &cs {
            if !(c.left >= 0.0 && c.right > c.left && c.right.is_finite()) {
                return Err(Error::InvalidStep(format!("bad cell ({}, {})", c.left, c.right)));
            }
        }
        cs.sort_by(|a, b| a.left.total_cmp(&b.left));
        let mut knots = vec![0.0];
        let mut values = vec![];
        for c in cs {
            let last = *knots.last().unwrap();
            let scale = c.right.abs().max(1.0);
            let mut left = c.left;
            if left < last {
                if last - left <= 1e-12 * scale {
                    left = last;
                } else {
                    return Err(Error::InvalidStep(format!(
                        "cells overlap on ({}, {})",
                        c.left, last
                    )));
                }
            }
            if left - last > 1e-12 * scale {
                knots.push(left);
                values.push(0.0);
            } else {
                left = last;
            }
            if c.right > left {
                knots.push(c.right);
                values.push(c.value);
            }
        }
        Self::new(len, knots, values)
    }

    /// Nonincreasing step function with the given `(value, measure)` levels,
    /// which must already be sorted by decreasing value.
    pub fn from_levels(len: f64, levels: &[(f64, f64)]) -> Result<Self> {
        let mut knots = vec![0.0];
        let mut values = vec![];
        let mut x = 0.0;
        for &(v, m) in levels {
            if m <= 0.0 {
                continue;
            }
            x += m;
            knots.push(x);
            values.push(v);
        }
        // Summed measures may overshoot a finite L by rounding.
        if let Some(last) = knots.last_mut() {
            if *last > len && *last <= len * (1.0 + MEASURE_REL) {
                *last = len;
            }
        }
        Self::new(len, knots, values)
    }

    pub fn domain_length(&self) -> f64 {
        self.len
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `T`: the function vanishes on `(T, L)`.
    pub fn support_bound(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// `|{f > 0}|`.
    pub fn support_measure(&self) -> f64 {
        self.cells().filter(|c| c.2 > 0.0).map(|c| c.1 - c.0).sum()
    }

    /// Cells as `(left, right, value)`.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.knots[i], self.knots[i + 1], v))
    }

    pub fn to_cells(&self) -> Vec<Cell> {
        self.cells().map(|(left, right, value)| Cell { left, right, value }).collect()
    }

    /// Index of the cell containing `t` (cells are `[x_i, x_{i+1})`).
    pub fn cell_index(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0) || t >= self.support_bound() {
            return None;
        }
        let i = self.knots.partition_point(|&k| k <= t);
        Some(i - 1)
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        self.cell_index(t).map_or(0.0, |i| self.values[i])
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn integral(&self) -> f64 {
        self.cells().map(|(a, b, v)| v * (b - a)).sum()
    }

    /// `\int_0^t f` (no rearrangement).
    pub fn integral_to(&self, t: f64) -> f64 {
        let mut s = 0.0;
        for (a, b, v) in self.cells() {
            if a >= t {
                break;
            }
            s += v * (b.min(t) - a);
        }
        s
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup();
        }
        self.cells().map(|(a, b, v)| v.powf(p) * (b - a)).sum::<f64>().powf(1.0 / p)
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1]) && !self.values.contains(&0.0)
    }

    /// Distinct positive values in decreasing order with their total measures.
    pub fn levels(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> =
            self.cells().filter(|c| c.2 > 0.0).map(|(a, b, v)| (v, b - a)).collect();
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (v, m) in pairs {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += m,
                _ => out.push((v, m)),
            }
        }
        out
    }

    /// The nonincreasing rearrangement `f*`.
    pub fn rearrange(&self) -> StepFunction {
        if self.is_nonincreasing() {
            return self.clone();
        }
        StepFunction::from_levels(self.len, &self.levels()).expect("levels of a valid function")
    }

    /// `mu_f(lambda) = |{f > lambda}|`.
    pub fn distribution(&self, lambda: f64) -> f64 {
        self.cells().filter(|c| c.2 > lambda).map(|(a, b, _)| b - a).sum()
    }

    /// `\int_0^t f*`.
    pub fn head_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        let mut x = 0.0;
        for (v, m) in self.levels() {
            if x + m >= t {
                return s + v * (t - x);
            }
            s += v * m;
            x += m;
        }
        s
    }

    /// `f**(t) = (1/t) \int_0^t f*`.
    pub fn double_star(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.sup();
        }
        self.head_integral(t) / t
    }

    /// Knots of both functions, merged and deduplicated.
    pub fn merged_knots(&self, other: &StepFunction) -> Vec<f64> {
        let mut k: Vec<f64> = self.knots.iter().chain(other.knots.iter()).copied().collect();
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    fn combine(&self, other: &StepFunction, op: impl Fn(f64, f64) -> f64) -> StepFunction {
        let k = self.merged_knots(other);
        let vals: Vec<f64> = k
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                op(self.eval(m), other.eval(m))
            })
            .collect();
        StepFunction::canonical(self.len.min(other.len), k, vals)
    }

    /// `f + g` on the merged partition.
    pub fn add(&self, other: &StepFunction) -> StepFunction {
        self.combine(other, |a, b| a + b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &StepFunction) -> StepFunction {
        self.combine(other, |a, b| a * b)
    }

    pub fn max(&self, other: &StepFunction) -> StepFunction {
        self.combine(other, f64::max)
    }

    /// `\int f g`.
    pub fn inner(&self, other: &StepFunction) -> f64 {
        let k = self.merged_knots(other);
        k.windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                self.eval(m) * other.eval(m) * (w[1] - w[0])
            })
            .sum()
    }

    pub fn scale(&self, c: f64) -> StepFunction {
        assert!(c >= 0.0 && c.is_finite(), "scale factor must be finite and nonnegative");
        self.map_values(|v| v * c)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> StepFunction {
        let vals = self.values.iter().map(|&v| f(v)).collect();
        StepFunction::canonical(self.len, self.knots.clone(), vals)
    }

    /// `min(f, c)`.
    pub fn clip_above(&self, c: f64) -> StepFunction {
        self.map_values(|v| v.min(c))
    }

    /// `(f - c)_+`.
    pub fn excess(&self, c: f64) -> StepFunction {
        self.map_values(|v| (v - c).max(0.0))
    }

    /// `f chi_(0, t)`.
    pub fn truncate(&self, t: f64) -> StepFunction {
        if t >= self.support_bound() {
            return self.clone();
        }
        if t <= 0.0 {
            return StepFunction::zero(self.len);
        }
        let i = self.knots.partition_point(|&k| k < t);
        let mut knots = self.knots[..i].to_vec();
        knots.push(t);
        let values = self.values[..i].to_vec();
        StepFunction::canonical(self.len, knots, values)
    }

    /// `t -> f(t / a)` restricted to `(0, L)`.
    pub fn stretch(&self, a: f64) -> StepFunction {
        let knots: Vec<f64> = self.knots.iter().map(|&k| k * a).collect();
        let g = StepFunction::canonical(self.len, knots, self.values.clone());
        if self.len.is_finite() {
            g.truncate(self.len)
        } else {
            g
        }
    }

    /// Same function on a different domain `(0, len)`; `len` must cover the support.
    pub fn with_domain(&self, len: f64) -> Result<StepFunction> {
        check_len(len)?;
        if self.support_bound() > len {
            return Err(Error::InvalidStep(format!(
                "support bound {} exceeds domain length {len}",
                self.support_bound()
            )));
        }
        Ok(StepFunction { len, ..self.clone() })
    }

    /// Equal distribution functions: identical levels, measures equal to
    /// relative precision plus the rounding of knots of the support's size.
    pub fn is_equimeasurable(&self, other: &StepFunction) -> bool {
        let a = self.levels();
        let b = other.levels();
        let knot_ulp = 16.0 * f64::EPSILON * self.support_bound().max(other.support_bound());
        a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| {
                x.0 == y.0 && (x.1 - y.1).abs() <= MEASURE_REL * x.1.max(y.1) + knot_ulp
            })
    }
}

/// A piece of `f*` on `source` placed at `target`, optionally mirrored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub source: [f64; 2],
    pub target: f64,
    #[serde(default)]
    pub reversed: bool,
}

impl Block {
    pub fn length(&self) -> f64 {
        self.source[1] - self.source[0]
    }
}

/// Blocks whose sources tile `(0, |supp f|)` and whose targets are disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub blocks: Vec<Block>,
}

impl Layout {
    pub fn identity(f: &StepFunction) -> Layout {
        Layout::translation(f, 0.0)
    }

    pub fn translation(f: &StepFunction, shift: f64) -> Layout {
        let s = f.support_measure();
        if s == 0.0 {
            return Layout { blocks: vec![] };
        }
        Layout { blocks: vec![Block { source: [0.0, s], target: shift, reversed: false }] }
    }

    /// `h(t) = f*(a - t)` on `(a - |supp f|, a)`.
    pub fn reflection(f: &StepFunction, a: f64) -> Layout {
        let s = f.support_measure();
        if s == 0.0 {
            return Layout { blocks: vec![] };
        }
        Layout { blocks: vec![Block { source: [0.0, s], target: a - s, reversed: true }] }
    }

    /// Place source pieces back to back from 0 in the given order; `None`
    /// entries leave a gap of length `gap`.
    pub fn arrange(pieces: &[[f64; 2]], order: &[Option<usize>], gap: f64) -> Layout {
        let mut x = 0.0;
        let mut blocks = Vec::with_capacity(pieces.len());
        for o in order {
            match o {
                Some(i) => {
                    let p = pieces[*i];
                    blocks.push(Block { source: p, target: x, reversed: false });
                    x += p[1] - p[0];
                }
                None => x += gap,
            }
        }
        Layout { blocks }
    }

    /// Check against the level structure of `f` on `(0, len)`.
    pub fn validate(&self, f: &StepFunction) -> Result<()> {
        let s = f.support_measure();
        let len = f.domain_length();
        let tol = 1e-12 * s.max(1.0);
        if self.blocks.is_empty() {
            return if s == 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidLayout("no blocks for a nonzero function".into()))
            };
        }
        let mut src: Vec<&Block> = self.blocks.iter().collect();
        src.sort_by(|a, b| a.source[0].total_cmp(&b.source[0]));
        let mut x = 0.0;
        for b in &src {
            if !(b.length() > 0.0) {
                return Err(Error::InvalidLayout(format!("empty source ({}, {})", b.source[0], b.source[1])));
            }
            if (b.source[0] - x).abs() > tol {
                return Err(Error::InvalidLayout(format!(
                    "sources do not tile (0, {s}): expected a block starting at {x}"
                )));
            }
            x = b.source[1];
        }
        if (x - s).abs() > tol {
            return Err(Error::InvalidLayout(format!("sources cover (0, {x}) but the support has measure {s}")));
        }
        let mut tgt: Vec<&Block> = self.blocks.iter().collect();
        tgt.sort_by(|a, b| a.target.total_cmp(&b.target));
        let mut end = 0.0;
        for b in &tgt {
            if b.target < end - tol {
                return Err(Error::InvalidLayout(format!("targets overlap near {}", b.target)));
            }
            end = b.target + b.length();
        }
        if end > len + tol * len.max(1.0) {
            return Err(Error::InvalidLayout(format!("target ends at {end}, beyond the domain length {len}")));
        }
        Ok(())
    }
}

/// Move pieces of `f*` as prescribed by the layout.
pub fn transport(f: &StepFunction, layout: &Layout) -> Result<StepFunction> {
    layout.validate(f)?;
    let fs = f.rearrange();
    let mut cells = Vec::new();
    for b in &layout.blocks {
        let [s0, s1] = b.source;
        for (a, c, v) in fs.cells() {
            let lo = a.max(s0);
            let hi = c.min(s1);
            if hi <= lo {
                continue;
            }
            let (l, r) = if b.reversed {
                (b.target + (s1 - hi), b.target + (s1 - lo))
            } else {
                (b.target + (lo - s0), b.target + (hi - s0))
            };
            cells.push(Cell { left: l.max(0.0), right: r.min(f.domain_length()), value: v });
        }
    }
    StepFunction::from_cells(f.domain_length(), &cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(len: f64, knots: &[f64], values: &[f64]) -> StepFunction {
        StepFunction::new(len, knots.to_vec(), values.to_vec()).unwrap()
    }

    #[test]
    fn rearrange_examples() {
        let f = sf(3.0, &[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]);
        let r = f.rearrange();
        assert_eq!(r.knots(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(r.values(), &[3.0, 2.0, 1.0]);
        assert_eq!(r.rearrange(), r);
        assert!(StepFunction::zero(1.0).rearrange().is_zero());
    }

    #[test]
    fn head_integral_and_double_star() {
        let f = sf(3.0, &[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]);
        assert_eq!(f.head_integral(2.0), 5.0);
        assert!(f.head_integral(1e-300) < 1e-299);
        let chi = StepFunction::indicator(f64::INFINITY, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(chi.head_integral(3.0), 1.0);
        let g = sf(2.0, &[0.0, 1.0, 2.0], &[2.0, 1.0]);
        assert_eq!(g.double_star(2.0), 1.5);
        assert_eq!(g.double_star(1.0), 2.0);
        assert_eq!(StepFunction::zero(1.0).double_star(0.5), 0.0);
    }

    #[test]
    fn canonical_form() {
        let f = sf(5.0, &[0.0, 1.0, 2.0, 3.0, 4.0], &[2.0, 2.0, 0.0, 0.0]);
        assert_eq!(f.knots(), &[0.0, 2.0]);
        assert_eq!(f.values(), &[2.0]);
        assert_eq!(f.support_bound(), 2.0);
        assert!(StepFunction::new(1.0, vec![0.0, 0.5, 0.5], vec![1.0, 1.0]).is_err());
        assert!(StepFunction::new(1.0, vec![0.0, 2.0], vec![1.0]).is_err());
        assert!(StepFunction::new(1.0, vec![0.0, 0.5], vec![-1.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = sf(f64::INFINITY, &[0.0, 1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"inf\""));
        let g: StepFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        let h: StepFunction =
            serde_json::from_str(r#"[{"left":2,"right":3,"value":2},{"left":0,"right":1,"value":1}]"#).unwrap();
        assert_eq!(h, f);
        let bad = serde_json::from_str::<StepFunction>(
            r#"[{"left":0,"right":2,"value":1},{"left":1,"right":3,"value":1}]"#,
        );
        assert!(bad.is_err());
        let unknown = serde_json::from_str::<StepFunction>(r#"{"domain_length":1,"cells":[],"x":1}"#);
        assert!(unknown.is_err());
    }

    #[test]
    fn equimeasurability_examples() {
        let f = sf(3.0, &[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]);
        assert!(f.is_equimeasurable(&f.rearrange()));
        let one = StepFunction::indicator(10.0, 0.0, 1.0, 1.0).unwrap();
        assert!(!one.is_equimeasurable(&one.scale(2.0)));
        let a = StepFunction::indicator(10.0, 0.0, 2.0, 1.0).unwrap();
        let b = one.add(&StepFunction::indicator(10.0, 3.0, 4.0, 1.0).unwrap());
        assert!(a.is_equimeasurable(&b));
    }

    #[test]
    fn transport_examples() {
        let chi = StepFunction::indicator(5.0, 0.0, 1.0, 1.0).unwrap();
        let h = transport(&chi, &Layout::translation(&chi, 2.0)).unwrap();
        assert_eq!(h, StepFunction::indicator(5.0, 2.0, 3.0, 1.0).unwrap());
        let f = sf(3.0, &[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]);
        let r = transport(&f, &Layout::reflection(&f, 3.0)).unwrap();
        assert_eq!(r.values(), &[1.0, 2.0, 3.0]);
        assert!(r.is_equimeasurable(&f));
        for x in [0.25, 1.5, 2.75] {
            assert_eq!(r.eval(x), f.rearrange().eval(3.0 - x));
        }
        assert_eq!(transport(&f, &Layout::identity(&f)).unwrap(), f.rearrange());
        let bad = Layout { blocks: vec![Block { source: [0.0, 2.0], target: 0.0, reversed: false }] };
        assert!(matches!(transport(&f, &bad), Err(Error::InvalidLayout(_))));
        let over = Layout { blocks: vec![Block { source: [0.0, 3.0], target: 1.0, reversed: false }] };
        assert!(transport(&f, &over).is_err());
    }

    #[test]
    fn arrange_permutes_pieces() {
        let f = sf(4.0, &[0.0, 1.0, 2.0], &[2.0, 1.0]);
        let l = Layout::arrange(&[[0.0, 1.0], [1.0, 2.0]], &[Some(1), None, Some(0)], 1.0);
        let h = transport(&f, &l).unwrap();
        assert_eq!(h.knots(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(h.values(), &[1.0, 0.0, 2.0]);
    }

    #[test]
    fn algebra() {
        let f = sf(4.0, &[0.0, 1.0, 3.0], &[2.0, 1.0]);
        let g = sf(4.0, &[0.0, 2.0, 4.0], &[1.0, 3.0]);
        let s = f.add(&g);
        assert_eq!(s.knots(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.values(), &[3.0, 2.0, 4.0, 3.0]);
        assert_eq!(f.inner(&g), 2.0 + 1.0 + 3.0);
        assert_eq!(f.excess(1.5).integral(), 0.5);
        assert_eq!(f.clip_above(1.5).integral(), 1.5 + 2.0);
        assert_eq!(f.truncate(2.0).integral(), 3.0);
        assert_eq!(f.distribution(1.0), 1.0);
        assert_eq!(f.stretch(2.0).knots(), &[0.0, 2.0, 4.0]);
    }
}
