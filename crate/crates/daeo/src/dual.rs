//! Forward-mode derivative propagation, first and second order.
//!
//! [`Dual1`] carries a value and a gradient with respect to a set of seeded
//! directions; [`Dual2`] adds the (symmetric, packed) Hessian. Both are
//! generic over the base [`Scalar`], so `Dual1<f64>` gives exact real
//! derivatives while `Dual1<Interval>` propagates the same chain rules in
//! interval arithmetic and yields guaranteed derivative enclosures.
//!
//! Constants carry an empty gradient that broadcasts as zeros, so constant
//! injection costs nothing regardless of how many directions are seeded.

use crate::scalar::Scalar;
use smallvec::SmallVec;

type Grad<S> = SmallVec<[S; 2]>;
type Hess<S> = SmallVec<[S; 3]>;

fn packed_idx(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn at<S: Scalar>(v: &[S], i: usize) -> S {
    v.get(i).cloned().unwrap_or_else(|| S::constant(0.0))
}

fn zip<S: Scalar>(a: &[S], b: &[S], f: impl Fn(S, S) -> S) -> Grad<S> {
    let n = a.len().max(b.len());
    (0..n).map(|i| f(at(a, i), at(b, i))).collect()
}

fn zip_hess<S: Scalar>(a: &[S], b: &[S], f: impl Fn(S, S) -> S) -> Hess<S> {
    let n = a.len().max(b.len());
    (0..n).map(|i| f(at(a, i), at(b, i))).collect()
}

/// Value plus first derivatives along the seeded directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual1<S> {
    value: S,
    grad: Grad<S>,
}

impl<S: Scalar> Dual1<S> {
    pub fn constant_of(value: S) -> Self {
        Dual1 { value, grad: Grad::new() }
    }

    /// Seeds direction `index` of `n`: derivative one along it, zero elsewhere.
    pub fn variable(value: S, index: usize, n: usize) -> Self {
        assert!(index < n);
        let mut grad: Grad<S> = (0..n).map(|_| S::constant(0.0)).collect();
        grad[index] = S::constant(1.0);
        Dual1 { value, grad }
    }

    pub fn value(&self) -> &S {
        &self.value
    }

    /// Derivative along direction `i` (zero if never seeded).
    pub fn d(&self, i: usize) -> S {
        at(&self.grad, i)
    }

    pub fn gradient(&self, n: usize) -> Vec<S> {
        (0..n).map(|i| self.d(i)).collect()
    }

    fn unary(&self, value: S, dphi: S) -> Self {
        Dual1 {
            value,
            grad: self.grad.iter().map(|g| dphi.clone() * g.clone()).collect(),
        }
    }
}

impl<S: Scalar> std::ops::Add for Dual1<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual1 {
            value: self.value + rhs.value,
            grad: zip(&self.grad, &rhs.grad, |a, b| a + b),
        }
    }
}

impl<S: Scalar> std::ops::Sub for Dual1<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual1 {
            value: self.value - rhs.value,
            grad: zip(&self.grad, &rhs.grad, |a, b| a - b),
        }
    }
}

impl<S: Scalar> std::ops::Mul for Dual1<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        // Product rule: (fg)' = f'g + fg'.
        let grad = zip(&self.grad, &rhs.grad, |a, b| {
            a * rhs.value.clone() + b * self.value.clone()
        });
        Dual1 { value: self.value * rhs.value, grad }
    }
}

impl<S: Scalar> std::ops::Div for Dual1<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        // (f/g)' = (f' - (f/g) g') / g.
        let q = self.value.clone() / rhs.value.clone();
        let grad = zip(&self.grad, &rhs.grad, |a, b| {
            (a - q.clone() * b) / rhs.value.clone()
        });
        Dual1 { value: q, grad }
    }
}

impl<S: Scalar> std::ops::Neg for Dual1<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual1 {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g.clone()).collect(),
        }
    }
}

impl<S: Scalar> Scalar for Dual1<S> {
    fn constant(c: f64) -> Self {
        Dual1::constant_of(S::constant(c))
    }
    fn sqr(&self) -> Self {
        self.unary(self.value.sqr(), S::constant(2.0) * self.value.clone())
    }
    fn powi(&self, n: i32) -> Self {
        self.unary(
            self.value.powi(n),
            S::constant(n as f64) * self.value.powi(n - 1),
        )
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.unary(s.clone(), S::constant(0.5) / s)
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.unary(e.clone(), e)
    }
    fn ln(&self) -> Self {
        self.unary(self.value.ln(), S::constant(1.0) / self.value.clone())
    }
    fn sin(&self) -> Self {
        self.unary(self.value.sin(), self.value.cos())
    }
    fn cos(&self) -> Self {
        self.unary(self.value.cos(), -self.value.sin())
    }
}

/// Value, gradient, and packed symmetric Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2<S> {
    value: S,
    grad: Grad<S>,
    hess: Hess<S>,
}

impl<S: Scalar> Dual2<S> {
    pub fn constant_of(value: S) -> Self {
        Dual2 { value, grad: Grad::new(), hess: Hess::new() }
    }

    pub fn variable(value: S, index: usize, n: usize) -> Self {
        assert!(index < n);
        let mut grad: Grad<S> = (0..n).map(|_| S::constant(0.0)).collect();
        grad[index] = S::constant(1.0);
        let hess: Hess<S> = (0..packed_len(n)).map(|_| S::constant(0.0)).collect();
        Dual2 { value, grad, hess }
    }

    pub fn value(&self) -> &S {
        &self.value
    }

    pub fn d(&self, i: usize) -> S {
        at(&self.grad, i)
    }

    pub fn gradient(&self, n: usize) -> Vec<S> {
        (0..n).map(|i| self.d(i)).collect()
    }

    /// Second derivative along directions `i`, `j`; symmetric by storage.
    pub fn dd(&self, i: usize, j: usize) -> S {
        at(&self.hess, packed_idx(i, j))
    }

    fn unary(&self, value: S, dphi: S, ddphi: S) -> Self {
        let grad: Grad<S> = self.grad.iter().map(|g| dphi.clone() * g.clone()).collect();
        let n = self.grad.len();
        let mut hess: Hess<S> = Hess::with_capacity(self.hess.len());
        for i in 0..n {
            for j in 0..=i {
                // phi(f)'' = phi'(f) f'' + phi''(f) f_i' f_j'.
                let idx = packed_idx(i, j);
                hess.push(
                    dphi.clone() * at(&self.hess, idx)
                        + ddphi.clone() * self.grad[i].clone() * self.grad[j].clone(),
                );
            }
        }
        Dual2 { value, grad, hess }
    }
}

impl<S: Scalar> std::ops::Add for Dual2<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual2 {
            value: self.value + rhs.value,
            grad: zip(&self.grad, &rhs.grad, |a, b| a + b),
            hess: zip_hess(&self.hess, &rhs.hess, |a, b| a + b),
        }
    }
}

impl<S: Scalar> std::ops::Sub for Dual2<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual2 {
            value: self.value - rhs.value,
            grad: zip(&self.grad, &rhs.grad, |a, b| a - b),
            hess: zip_hess(&self.hess, &rhs.hess, |a, b| a - b),
        }
    }
}

impl<S: Scalar> std::ops::Mul for Dual2<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let n = self.grad.len().max(rhs.grad.len());
        let grad = zip(&self.grad, &rhs.grad, |a, b| {
            a * rhs.value.clone() + b * self.value.clone()
        });
        let mut hess: Hess<S> = Hess::with_capacity(packed_len(n));
        for i in 0..n {
            for j in 0..=i {
                // (fg)'' = f'' g + f_i' g_j' + f_j' g_i' + f g''.
                let idx = packed_idx(i, j);
                hess.push(
                    at(&self.hess, idx) * rhs.value.clone()
                        + at(&self.grad, i) * at(&rhs.grad, j)
                        + at(&self.grad, j) * at(&rhs.grad, i)
                        + self.value.clone() * at(&rhs.hess, idx),
                );
            }
        }
        Dual2 { value: self.value * rhs.value, grad, hess }
    }
}

impl<S: Scalar> std::ops::Div for Dual2<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let n = self.grad.len().max(rhs.grad.len());
        let q = self.value.clone() / rhs.value.clone();
        let grad = zip(&self.grad, &rhs.grad, |a, b| {
            (a - q.clone() * b) / rhs.value.clone()
        });
        // From f = q g: f'' = q'' g + q_i' g_j' + q_j' g_i' + q g''.
        let mut hess: Hess<S> = Hess::with_capacity(packed_len(n));
        for i in 0..n {
            for j in 0..=i {
                let idx = packed_idx(i, j);
                let num = at(&self.hess, idx)
                    - at(&grad, i) * at(&rhs.grad, j)
                    - at(&grad, j) * at(&rhs.grad, i)
                    - q.clone() * at(&rhs.hess, idx);
                hess.push(num / rhs.value.clone());
            }
        }
        Dual2 { value: q, grad, hess }
    }
}

impl<S: Scalar> std::ops::Neg for Dual2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual2 {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g.clone()).collect(),
            hess: self.hess.iter().map(|h| -h.clone()).collect(),
        }
    }
}

impl<S: Scalar> Scalar for Dual2<S> {
    fn constant(c: f64) -> Self {
        Dual2::constant_of(S::constant(c))
    }
    fn sqr(&self) -> Self {
        self.unary(
            self.value.sqr(),
            S::constant(2.0) * self.value.clone(),
            S::constant(2.0),
        )
    }
    fn powi(&self, n: i32) -> Self {
        self.unary(
            self.value.powi(n),
            S::constant(n as f64) * self.value.powi(n - 1),
            S::constant((n * (n - 1)) as f64) * self.value.powi(n - 2),
        )
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        let dphi = S::constant(0.5) / s.clone();
        let ddphi = -(S::constant(0.25) / (s.clone() * self.value.clone()));
        self.unary(s, dphi, ddphi)
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.unary(e.clone(), e.clone(), e)
    }
    fn ln(&self) -> Self {
        let inv = S::constant(1.0) / self.value.clone();
        self.unary(self.value.ln(), inv.clone(), -inv.sqr())
    }
    fn sin(&self) -> Self {
        let s = self.value.sin();
        self.unary(s.clone(), self.value.cos(), -s)
    }
    fn cos(&self) -> Self {
        let c = self.value.cos();
        self.unary(c.clone(), -self.value.sin(), -c)
    }
}
