//! Interval arithmetic with outward rounding.
//!
//! Every operation returns an interval guaranteed to contain the exact real
//! result for all points of the operands (inclusion property). Rounding is
//! handled by widening each computed endpoint outward by a small number of
//! ulps, which over-covers the worst-case error of the underlying float
//! operation; transcendental endpoints get an extra ulp of slack for libm.
//!
//! Domain violations (division by an interval containing zero, sqrt/log of
//! negative ranges) poison the result: both bounds become NaN and every
//! subsequent operation propagates the poison. [`Interval::ok_or_domain`]
//! lifts a poisoned value into a proper error at API boundaries.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IntervalError {
    #[error("reversed bounds: lo {lo} > hi {hi}")]
    ReversedBounds { lo: f64, hi: f64 },
    #[error("non-finite bound: [{lo}, {hi}]")]
    NonFinite { lo: f64, hi: f64 },
    #[error("domain violation in interval operation{}", ctx_suffix(.context))]
    DomainViolation { context: &'static str },
}

fn ctx_suffix(context: &&'static str) -> String {
    if context.is_empty() { String::new() } else { format!(": {context}") }
}

/// Ulps of outward slack for exactly-rounded float operations (+,-,*,/,sqrt).
const ULPS_ARITH: u32 = 1;
/// Ulps of outward slack for libm transcendentals (exp, ln, sin, cos).
const ULPS_LIBM: u32 = 2;

fn step_down(mut v: f64, ulps: u32) -> f64 {
    for _ in 0..ulps {
        v = v.next_down();
    }
    v
}

fn step_up(mut v: f64, ulps: u32) -> f64 {
    for _ in 0..ulps {
        v = v.next_up();
    }
    v
}

/// Closed interval `[lo, hi]`. Invariant: `lo <= hi`, both finite — unless
/// poisoned by a domain violation, in which case both bounds are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// Checked constructor: bounds must be finite and ordered.
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(IntervalError::NonFinite { lo, hi });
        }
        if lo > hi {
            return Err(IntervalError::ReversedBounds { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// Degenerate interval `[v, v]`.
    pub fn point(v: f64) -> Self {
        debug_assert!(v.is_finite());
        Interval { lo: v, hi: v }
    }

    pub(crate) fn poisoned() -> Self {
        Interval { lo: f64::NAN, hi: f64::NAN }
    }

    fn raw(lo: f64, hi: f64) -> Self {
        if lo.is_nan() || hi.is_nan() {
            return Interval::poisoned();
        }
        debug_assert!(lo <= hi, "raw interval out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    /// Endpoints widened outward by `ulps` ulps each; saturates at infinity
    /// into a poison so the finiteness invariant survives.
    fn outward(lo: f64, hi: f64, ulps: u32) -> Self {
        let lo = step_down(lo, ulps);
        let hi = step_up(hi, ulps);
        if !lo.is_finite() || !hi.is_finite() {
            return Interval::poisoned();
        }
        Interval::raw(lo, hi)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// False once any contributing operation violated its domain.
    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Converts a poisoned interval into a domain error.
    pub fn ok_or_domain(self, context: &'static str) -> Result<Self, IntervalError> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(IntervalError::DomainViolation { context })
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        let mid = 0.5 * (self.lo + self.hi);
        mid.clamp(self.lo, self.hi)
    }

    /// Largest absolute value over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Zero membership; endpoints count.
    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Smallest interval containing both operands.
    pub fn hull(&self, other: &Interval) -> Interval {
        if !self.is_valid() || !other.is_valid() {
            return Interval::poisoned();
        }
        Interval::raw(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Exact range of `x^2`; never dips below zero, unlike `x * x`.
    pub fn sqr(&self) -> Interval {
        if !self.is_valid() {
            return Interval::poisoned();
        }
        let hi_m = self.mag();
        let lo_m = if self.contains_zero() { 0.0 } else { self.lo.abs().min(self.hi.abs()) };
        Interval::outward(lo_m * lo_m, hi_m * hi_m, ULPS_ARITH)
    }

    /// Range of `x^n` for integer `n`, using sign/parity so that even powers
    /// of sign-changing intervals start at zero.
    pub fn powi(&self, n: i32) -> Interval {
        if !self.is_valid() {
            return Interval::poisoned();
        }
        if n == 0 {
            return Interval::point(1.0);
        }
        if n < 0 {
            if self.contains_zero() {
                return Interval::poisoned();
            }
            return Interval::point(1.0) / self.powi(-n);
        }
        if n == 2 {
            return self.sqr();
        }
        // powi accumulates up to ~log2(n) ulps of rounding error.
        let ulps = ULPS_ARITH + 32 - (n as u32).leading_zeros();
        if n % 2 == 1 {
            Interval::outward(self.lo.powi(n), self.hi.powi(n), ulps)
        } else {
            let hi_m = self.mag();
            let lo_m = if self.contains_zero() { 0.0 } else { self.lo.abs().min(self.hi.abs()) };
            Interval::outward(lo_m.powi(n), hi_m.powi(n), ulps)
        }
    }

    /// Requires `lo >= 0`; poisoned otherwise.
    pub fn sqrt(&self) -> Interval {
        if !self.is_valid() || self.lo < 0.0 {
            return Interval::poisoned();
        }
        Interval::outward(self.lo.sqrt(), self.hi.sqrt(), ULPS_ARITH)
    }

    pub fn exp(&self) -> Interval {
        if !self.is_valid() {
            return Interval::poisoned();
        }
        let lo = step_down(self.lo.exp(), ULPS_LIBM).max(0.0);
        let hi = step_up(self.hi.exp(), ULPS_LIBM);
        if !hi.is_finite() {
            return Interval::poisoned();
        }
        Interval::raw(lo, hi)
    }

    /// Natural log; requires `lo > 0`.
    pub fn ln(&self) -> Interval {
        if !self.is_valid() || self.lo <= 0.0 {
            return Interval::poisoned();
        }
        Interval::outward(self.lo.ln(), self.hi.ln(), ULPS_LIBM)
    }

    pub fn sin(&self) -> Interval {
        if !self.is_valid() {
            return Interval::poisoned();
        }
        use std::f64::consts::{FRAC_PI_2, TAU};
        if self.width() >= TAU {
            return Interval::raw(-1.0, 1.0);
        }
        let (s_lo, s_hi) = (self.lo.sin(), self.hi.sin());
        let mut lo = step_down(s_lo.min(s_hi), ULPS_LIBM).max(-1.0);
        let mut hi = step_up(s_lo.max(s_hi), ULPS_LIBM).min(1.0);
        if self.meets_critical(FRAC_PI_2, TAU) {
            hi = 1.0;
        }
        if self.meets_critical(-FRAC_PI_2, TAU) {
            lo = -1.0;
        }
        Interval::raw(lo, hi)
    }

    pub fn cos(&self) -> Interval {
        if !self.is_valid() {
            return Interval::poisoned();
        }
        use std::f64::consts::{PI, TAU};
        if self.width() >= TAU {
            return Interval::raw(-1.0, 1.0);
        }
        let (c_lo, c_hi) = (self.lo.cos(), self.hi.cos());
        let mut lo = step_down(c_lo.min(c_hi), ULPS_LIBM).max(-1.0);
        let mut hi = step_up(c_lo.max(c_hi), ULPS_LIBM).min(1.0);
        if self.meets_critical(0.0, TAU) {
            hi = 1.0;
        }
        if self.meets_critical(PI, TAU) {
            lo = -1.0;
        }
        Interval::raw(lo, hi)
    }

    /// Whether some point `offset + k * period` may lie inside the interval.
    /// The test is widened by a magnitude-scaled slack, so near-misses count
    /// as hits; that only ever enlarges enclosures, never shrinks them.
    fn meets_critical(&self, offset: f64, period: f64) -> bool {
        let slack = 8.0 * f64::EPSILON * self.mag().max(1.0);
        let k = ((self.lo - slack - offset) / period).ceil();
        let candidate = offset + k * period;
        candidate <= self.hi + slack
    }

    /// Division that reports the zero-divisor case instead of poisoning.
    pub fn checked_div(&self, rhs: &Interval) -> Result<Interval, IntervalError> {
        (*self / *rhs).ok_or_domain("division by interval containing zero")
    }
}

impl std::ops::Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        if !self.is_valid() || !rhs.is_valid() {
            return Interval::poisoned();
        }
        Interval::outward(self.lo + rhs.lo, self.hi + rhs.hi, ULPS_ARITH)
    }
}

impl std::ops::Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        if !self.is_valid() || !rhs.is_valid() {
            return Interval::poisoned();
        }
        Interval::outward(self.lo - rhs.hi, self.hi - rhs.lo, ULPS_ARITH)
    }
}

impl std::ops::Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        if !self.is_valid() || !rhs.is_valid() {
            return Interval::poisoned();
        }
        let products = [self.lo * rhs.lo, self.lo * rhs.hi, self.hi * rhs.lo, self.hi * rhs.hi];
        let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::outward(lo, hi, ULPS_ARITH)
    }
}

impl std::ops::Div for Interval {
    type Output = Interval;
    fn div(self, rhs: Interval) -> Interval {
        if !self.is_valid() || !rhs.is_valid() || rhs.contains_zero() {
            return Interval::poisoned();
        }
        let quotients = [self.lo / rhs.lo, self.lo / rhs.hi, self.hi / rhs.lo, self.hi / rhs.hi];
        let lo = quotients.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = quotients.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::outward(lo, hi, ULPS_ARITH)
    }
}

impl std::ops::Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        if !self.is_valid() {
            return Interval::poisoned();
        }
        // Negation is exact: no widening.
        Interval::raw(-self.hi, -self.lo)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Axis-aligned box: a vector of intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    components: Vec<Interval>,
}

impl IntervalVector {
    pub fn new(components: Vec<Interval>) -> Self {
        IntervalVector { components }
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self, IntervalError> {
        let components = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(IntervalVector { components })
    }

    /// Degenerate box around a point.
    pub fn from_point(p: &[f64]) -> Self {
        IntervalVector { components: p.iter().map(|&v| Interval::point(v)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &Interval {
        &self.components[i]
    }

    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    pub fn is_valid(&self) -> bool {
        self.components.iter().all(Interval::is_valid)
    }

    /// Maximum component width.
    pub fn width(&self) -> f64 {
        self.components.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn widest_component(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.components.iter().enumerate() {
            if c.width() > self.components[best].width() {
                best = i;
            }
        }
        best
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.components.iter().map(Interval::midpoint).collect()
    }

    /// Splits along the widest component at its midpoint. The two halves
    /// partition the box: their hull is the input and their interiors are
    /// disjoint.
    pub fn bisect(&self) -> (IntervalVector, IntervalVector) {
        let axis = self.widest_component();
        let c = &self.components[axis];
        let mid = c.midpoint();
        debug_assert!(c.lo() < mid && mid < c.hi(), "bisecting a degenerate component");
        let mut left = self.clone();
        let mut right = self.clone();
        left.components[axis] = Interval::raw(c.lo(), mid);
        right.components[axis] = Interval::raw(mid, c.hi());
        (left, right)
    }

    /// Every component contains zero (endpoints count).
    pub fn contains_zero(&self) -> bool {
        self.components.iter().all(Interval::contains_zero)
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && self.components.iter().zip(p).all(|(c, &v)| c.contains(v))
    }

    pub fn contains_box(&self, other: &IntervalVector) -> bool {
        other.dim() == self.dim()
            && other.components.iter().zip(&self.components).all(|(inner, outer)| inner.subset_of(outer))
    }

    /// Componentwise hull.
    pub fn hull(&self, other: &IntervalVector) -> IntervalVector {
        assert_eq!(self.dim(), other.dim());
        IntervalVector {
            components: self.components.iter().zip(&other.components).map(|(a, b)| a.hull(b)).collect(),
        }
    }

    /// Lower corner, used as a deterministic sort key for box sets.
    pub fn lower_corner(&self) -> Vec<f64> {
        self.components.iter().map(Interval::lo).collect()
    }
}

/// Symmetric interval matrix, stored as the packed lower triangle so that
/// symmetry holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSymMatrix {
    n: usize,
    // Row-major packed lower triangle: entry (i, j) with i >= j at i(i+1)/2 + j.
    packed: Vec<Interval>,
}

impl IntervalSymMatrix {
    pub fn zeros(n: usize) -> Self {
        IntervalSymMatrix { n, packed: vec![Interval::point(0.0); n * (n + 1) / 2] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn idx(i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        r * (r + 1) / 2 + c
    }

    pub fn entry(&self, i: usize, j: usize) -> &Interval {
        &self.packed[Self::idx(i, j)]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, v: Interval) {
        self.packed[Self::idx(i, j)] = v;
    }

    pub fn is_valid(&self) -> bool {
        self.packed.iter().all(Interval::is_valid)
    }

    /// Interval Gershgorin sufficiency test: every symmetric matrix drawn
    /// from the enclosure is positive definite if, for each row, the smallest
    /// possible diagonal entry strictly dominates the largest possible sum of
    /// off-diagonal magnitudes. One-sided: `false` is "not verified", not
    /// "indefinite".
    pub fn is_positive_definite(&self) -> bool {
        if !self.is_valid() {
            return false;
        }
        (0..self.n).all(|i| {
            let radius: f64 = (0..self.n).filter(|&j| j != i).map(|j| self.entry(i, j).mag()).sum();
            self.entry(i, i).lo() - radius > 0.0
        })
    }

    /// Some diagonal entry is negative over the whole enclosure, which
    /// certifies that no matrix in the enclosure is positive semidefinite.
    pub fn has_negative_diagonal(&self) -> bool {
        self.is_valid() && (0..self.n).any(|i| self.entry(i, i).hi() < 0.0)
    }
}
