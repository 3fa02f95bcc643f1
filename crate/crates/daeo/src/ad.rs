//! Derivative drivers: seed dual numbers through a problem's generic
//! dynamics/objective and unpack the results into vectors and matrices.
//!
//! Real drivers (`f64` base) return exact floating-point derivatives and let
//! NaN propagate like any other numeric code. Interval drivers return
//! guaranteed enclosures of every derivative over a box and surface domain
//! violations as errors.
//!
//! Seeding convention for the coupled drivers: directions `0..n_x` are the
//! differential variables, `n_x..n_x + n_y` the algebraic ones.

use crate::dual::{Dual1, Dual2};
use crate::interval::{Interval, IntervalError, IntervalSymMatrix, IntervalVector};
use crate::linalg::{LinalgError, Matrix};
use crate::problem::DaeoProblem;

/// First derivatives of the dynamics: value and both Jacobian blocks.
pub struct DynamicsDerivatives {
    pub value: Vec<f64>,
    /// `d f_i / d x_j`, `n_x` by `n_x`.
    pub jac_x: Matrix,
    /// `d f_i / d y_j`, `n_x` by `n_y`.
    pub jac_y: Matrix,
}

/// Derivatives of the objective at a point, through second order in `y`.
pub struct ObjectiveDerivatives {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    /// `d^2 h / (dy_i dy_j)`, `n_y` by `n_y`.
    pub hess_yy: Matrix,
    /// `d^2 h / (dy_i dx_j)`, `n_y` by `n_x`.
    pub hess_yx: Matrix,
}

fn seed1(x: &[f64], y: &[f64]) -> (Vec<Dual1<f64>>, Vec<Dual1<f64>>) {
    let n = x.len() + y.len();
    let xs = x.iter().enumerate().map(|(i, &v)| Dual1::variable(v, i, n)).collect();
    let ys = y
        .iter()
        .enumerate()
        .map(|(j, &v)| Dual1::variable(v, x.len() + j, n))
        .collect();
    (xs, ys)
}

/// Evaluates `f` and its Jacobian with respect to both variable groups.
pub fn dynamics_derivatives<P: DaeoProblem>(p: &P, x: &[f64], y: &[f64]) -> DynamicsDerivatives {
    let (n_x, n_y) = (x.len(), y.len());
    let (xs, ys) = seed1(x, y);
    let f = p.dynamics(&xs, &ys);
    debug_assert_eq!(f.len(), n_x);
    let mut jac_x = Matrix::zeros(n_x, n_x);
    let mut jac_y = Matrix::zeros(n_x, n_y);
    let mut value = Vec::with_capacity(n_x);
    for (i, fi) in f.iter().enumerate() {
        value.push(*fi.value());
        for j in 0..n_x {
            jac_x[(i, j)] = fi.d(j);
        }
        for j in 0..n_y {
            jac_y[(i, j)] = fi.d(n_x + j);
        }
    }
    DynamicsDerivatives { value, jac_x, jac_y }
}

/// Evaluates `h` with gradient and the `yy`/`yx` Hessian blocks.
pub fn objective_derivatives<P: DaeoProblem>(p: &P, x: &[f64], y: &[f64]) -> ObjectiveDerivatives {
    let (n_x, n_y) = (x.len(), y.len());
    let n = n_x + n_y;
    let xs: Vec<Dual2<f64>> =
        x.iter().enumerate().map(|(i, &v)| Dual2::variable(v, i, n)).collect();
    let ys: Vec<Dual2<f64>> = y
        .iter()
        .enumerate()
        .map(|(j, &v)| Dual2::variable(v, n_x + j, n))
        .collect();
    let h = p.objective(&xs, &ys);
    let grad_x = (0..n_x).map(|i| h.d(i)).collect();
    let grad_y = (0..n_y).map(|j| h.d(n_x + j)).collect();
    let mut hess_yy = Matrix::zeros(n_y, n_y);
    let mut hess_yx = Matrix::zeros(n_y, n_x);
    for i in 0..n_y {
        for j in 0..n_y {
            hess_yy[(i, j)] = h.dd(n_x + i, n_x + j);
        }
        for j in 0..n_x {
            hess_yx[(i, j)] = h.dd(n_x + i, j);
        }
    }
    ObjectiveDerivatives { value: *h.value(), grad_x, grad_y, hess_yy, hess_yx }
}

/// Gradient and Hessian of `y -> h(x, y)` at a point, `x` held constant.
/// Cheaper than [`objective_derivatives`] when the cross blocks are unneeded.
pub fn objective_grad_hess_y<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    y: &[f64],
) -> (Vec<f64>, Matrix) {
    let n = y.len();
    let xs: Vec<Dual2<f64>> = x.iter().map(|&v| Dual2::constant_of(v)).collect();
    let ys: Vec<Dual2<f64>> =
        y.iter().enumerate().map(|(j, &v)| Dual2::variable(v, j, n)).collect();
    let h = p.objective(&xs, &ys);
    let grad = h.gradient(n);
    let mut hess = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            hess[(i, j)] = h.dd(i, j);
        }
    }
    (grad, hess)
}

/// Gradient of `y -> h(x, y)` alone (one first-order pass).
pub fn objective_grad_y<P: DaeoProblem>(p: &P, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let xs: Vec<Dual1<f64>> = x.iter().map(|&v| Dual1::constant_of(v)).collect();
    let ys: Vec<Dual1<f64>> =
        y.iter().enumerate().map(|(j, &v)| Dual1::variable(v, j, n)).collect();
    p.objective(&xs, &ys).gradient(n)
}

/// Enclosure of the gradient of `y -> h(x, y)` over the box `ybox`.
pub fn interval_grad_y<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    ybox: &IntervalVector,
) -> Result<Vec<Interval>, IntervalError> {
    let n = ybox.dim();
    let xs: Vec<Dual1<Interval>> =
        x.iter().map(|&v| Dual1::constant_of(Interval::point(v))).collect();
    let ys: Vec<Dual1<Interval>> = ybox
        .components()
        .iter()
        .enumerate()
        .map(|(j, &c)| Dual1::variable(c, j, n))
        .collect();
    let h = p.objective(&xs, &ys);
    h.gradient(n)
        .into_iter()
        .map(|g| g.ok_or_domain("objective gradient over a box"))
        .collect()
}

/// Enclosures of gradient and Hessian of `y -> h(x, y)` over `ybox`, from a
/// single second-order pass.
pub fn interval_grad_hess_y<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    ybox: &IntervalVector,
) -> Result<(Vec<Interval>, IntervalSymMatrix), IntervalError> {
    let n = ybox.dim();
    let xs: Vec<Dual2<Interval>> =
        x.iter().map(|&v| Dual2::constant_of(Interval::point(v))).collect();
    let ys: Vec<Dual2<Interval>> = ybox
        .components()
        .iter()
        .enumerate()
        .map(|(j, &c)| Dual2::variable(c, j, n))
        .collect();
    let h = p.objective(&xs, &ys);
    let grad: Vec<Interval> = h
        .gradient(n)
        .into_iter()
        .map(|g| g.ok_or_domain("objective gradient over a box"))
        .collect::<Result<_, _>>()?;
    let mut hess = IntervalSymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            hess.set_entry(i, j, h.dd(i, j).ok_or_domain("objective Hessian over a box")?);
        }
    }
    Ok((grad, hess))
}

/// Enclosure of the objective value itself over `ybox`.
pub fn interval_objective<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    ybox: &IntervalVector,
) -> Result<Interval, IntervalError> {
    let xs: Vec<Interval> = x.iter().map(|&v| Interval::point(v)).collect();
    p.objective(&xs, ybox.components())
        .ok_or_domain("objective value over a box")
}

/// Sensitivity of a stationary point of `y -> h(x, y)` to the state:
/// implicit differentiation of `grad_y h(x, y(x)) = 0` gives the
/// `n_y` by `n_x` system
///
/// ```text
///   dy/dx = -(d^2h/dy^2)^-1 (d^2h/dydx)
/// ```
///
/// A singular Hessian means the stationary point is degenerate (a fold), and
/// the sensitivity does not exist.
pub fn implicit_dy_dx<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    y: &[f64],
) -> Result<Matrix, LinalgError> {
    let d = objective_derivatives(p, x, y);
    let (n_y, n_x) = (y.len(), x.len());
    let mut s = Matrix::zeros(n_y, n_x);
    for j in 0..n_x {
        let rhs: Vec<f64> = (0..n_y).map(|i| -d.hess_yx[(i, j)]).collect();
        let col = d.hess_yy.clone().solve(&rhs)?;
        for (i, v) in col.into_iter().enumerate() {
            s[(i, j)] = v;
        }
    }
    Ok(s)
}

/// Drift of a tracked stationary point along the flow, by the chain rule
/// through `x' = f`: `dy/dt = (dy/dx) f(x, y)`.
pub fn dy_dt<P: DaeoProblem>(p: &P, x: &[f64], y: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let s = implicit_dy_dx(p, x, y)?;
    let f = p.dynamics(x, y);
    Ok(s.mul_vec(&f))
}
