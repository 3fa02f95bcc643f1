//! The scalar abstraction shared by every evaluation mode.
//!
//! Problem right-hand sides and objectives are written once against
//! [`Scalar`]; instantiating the same code with `f64`, [`Interval`], or the
//! dual types yields plain values, guaranteed range enclosures, and exact
//! derivatives respectively — all through one expression path, so the interval
//! extension and the derivatives always see the same operation structure.
//!
//! Domain violations follow the base scalar's convention: NaN for real
//! arithmetic, poisoned intervals for interval arithmetic. Both propagate
//! through subsequent operations and are checked at API boundaries.

use crate::interval::Interval;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Injects a real constant.
    fn constant(c: f64) -> Self;
    /// `x^2` as a dedicated elemental: interval instantiation gives the exact
    /// range of the square, which plain self-multiplication overestimates.
    fn sqr(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn sqr(&self) -> Self {
        self * self
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
}

impl Scalar for Interval {
    fn constant(c: f64) -> Self {
        Interval::point(c)
    }
    fn sqr(&self) -> Self {
        Interval::sqr(self)
    }
    fn powi(&self, n: i32) -> Self {
        Interval::powi(self, n)
    }
    fn sqrt(&self) -> Self {
        Interval::sqrt(self)
    }
    fn exp(&self) -> Self {
        Interval::exp(self)
    }
    fn ln(&self) -> Self {
        Interval::ln(self)
    }
    fn sin(&self) -> Self {
        Interval::sin(self)
    }
    fn cos(&self) -> Self {
        Interval::cos(self)
    }
}
