//! Problem definitions: the DAEO trait, reference solutions, and the two
//! built-in test problems.
//!
//! A DAEO couples an ODE `x' = f(x, y*)` with an embedded global optimization
//! `y* = argmin_y h(x, y)` over a fixed search box. `f` and `h` are written
//! against the generic [`Scalar`], so a single definition serves plain
//! evaluation, interval enclosures, and derivative propagation.

use crate::interval::IntervalVector;
use crate::scalar::Scalar;

/// Closed-form data attached to a problem for validation: an analytic
/// trajectory (when one exists) and reference event times.
pub struct ReferenceSolution {
    x_of_t: Option<Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>>,
    event_times: Vec<f64>,
}

impl ReferenceSolution {
    pub fn new(
        x_of_t: Option<Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>>,
        event_times: Vec<f64>,
    ) -> Self {
        ReferenceSolution { x_of_t, event_times }
    }

    /// Analytic state at time `t`, if the problem has a closed form.
    pub fn x_of_t(&self, t: f64) -> Option<Vec<f64>> {
        self.x_of_t.as_ref().map(|f| f(t))
    }

    pub fn has_trajectory(&self) -> bool {
        self.x_of_t.is_some()
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }
}

/// A differential equation with an embedded global optimization criterion.
pub trait DaeoProblem {
    fn name(&self) -> &'static str;
    fn n_x(&self) -> usize;
    fn n_y(&self) -> usize;
    fn initial_state(&self) -> Vec<f64>;
    /// Integration window `(t0, t_end)`.
    fn time_span(&self) -> (f64, f64);
    /// Search box for the algebraic variables. Must contain every optimizer
    /// the trajectory visits; it is recorded in output headers so runs are
    /// auditable.
    fn y_domain(&self) -> IntervalVector;
    /// Right-hand side `f(x, y)` of the differential part.
    fn dynamics<S: Scalar>(&self, x: &[S], y: &[S]) -> Vec<S>;
    /// Objective `h(x, y)` whose global minimizer in `y` closes the system.
    fn objective<S: Scalar>(&self, x: &[S], y: &[S]) -> S;
    fn reference(&self) -> Option<&ReferenceSolution> {
        None
    }
}

/// Evaluates dynamics and objective together through the single generic path.
pub fn evaluate<P: DaeoProblem, S: Scalar>(p: &P, x: &[S], y: &[S]) -> (Vec<S>, S) {
    (p.dynamics(x, y), p.objective(x, y))
}

/// Scalar decaying ODE whose objective has two stationary minima at y = ±1
/// for every x. Which one is global flips when x crosses 1/2, so the exact
/// solution has a single event at t = ln(2)/3 and a closed form on both
/// sides:
///
/// ```text
///   x' = -(2 + y) x,  x(0) = 1,      h = (1 - y^2)^2 - (x - 1/2) sin(pi y / 2)
///   x(t) = exp(-3 t)                    until the event,
///   x(t) = exp(-t + (2/3) ln(1/2))      after it.
/// ```
pub struct Example1 {
    reference: ReferenceSolution,
}

/// Event time of [`Example1`]: x(t) = 1/2 at t = ln(2)/3.
pub const EXAMPLE1_EVENT_TIME: f64 = 0.231_049_060_186_648_12;

impl Example1 {
    pub fn new() -> Self {
        let event = EXAMPLE1_EVENT_TIME;
        let x_of_t = move |t: f64| {
            if t <= event {
                vec![(-3.0 * t).exp()]
            } else {
                vec![(-t + (2.0 / 3.0) * 0.5f64.ln()).exp()]
            }
        };
        Example1 {
            reference: ReferenceSolution::new(Some(Box::new(x_of_t)), vec![event]),
        }
    }
}

impl Default for Example1 {
    fn default() -> Self {
        Self::new()
    }
}

impl DaeoProblem for Example1 {
    fn name(&self) -> &'static str {
        "ex1"
    }
    fn n_x(&self) -> usize {
        1
    }
    fn n_y(&self) -> usize {
        1
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![1.0]
    }
    fn time_span(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn y_domain(&self) -> IntervalVector {
        IntervalVector::from_bounds(&[(-2.0, 2.0)]).unwrap()
    }
    fn dynamics<S: Scalar>(&self, x: &[S], y: &[S]) -> Vec<S> {
        vec![-((S::constant(2.0) + y[0].clone()) * x[0].clone())]
    }
    fn objective<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        let u = S::constant(1.0) - y[0].sqr();
        u.sqr()
            - (x[0].clone() - S::constant(0.5))
                * (y[0].clone() * S::constant(std::f64::consts::FRAC_PI_2)).sin()
    }
    fn reference(&self) -> Option<&ReferenceSolution> {
        Some(&self.reference)
    }
}

/// Growing ODE driven by an oscillatory objective: minima sit in the troughs
/// of `sin(5y)` near `y = x`, and as x grows the global one hops from trough
/// to trough. No closed-form trajectory; four reference event times on
/// `[0, 2]` are attached for validation.
///
/// ```text
///   x' = y,  x(0) = 1,      h = (y - x)^2 + sin(5 y)
/// ```
pub struct Example2 {
    reference: ReferenceSolution,
}

/// Reference event times of [`Example2`] on `[0, 2]`.
pub const EXAMPLE2_EVENT_TIMES: [f64; 4] =
    [0.589_331_037_698_447, 1.160_422_845_478_23, 1.523_812_336_229_1, 1.790_294_621_829_03];

impl Example2 {
    pub fn new() -> Self {
        Example2 {
            reference: ReferenceSolution::new(None, EXAMPLE2_EVENT_TIMES.to_vec()),
        }
    }
}

impl Default for Example2 {
    fn default() -> Self {
        Self::new()
    }
}

impl DaeoProblem for Example2 {
    fn name(&self) -> &'static str {
        "ex2"
    }
    fn n_x(&self) -> usize {
        1
    }
    fn n_y(&self) -> usize {
        1
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![1.0]
    }
    fn time_span(&self) -> (f64, f64) {
        (0.0, 2.0)
    }
    fn y_domain(&self) -> IntervalVector {
        IntervalVector::from_bounds(&[(-8.0, 8.0)]).unwrap()
    }
    fn dynamics<S: Scalar>(&self, _x: &[S], y: &[S]) -> Vec<S> {
        vec![y[0].clone()]
    }
    fn objective<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        (y[0].clone() - x[0].clone()).sqr() + (y[0].clone() * S::constant(5.0)).sin()
    }
    fn reference(&self) -> Option<&ReferenceSolution> {
        Some(&self.reference)
    }
}

/// Built-in problems, dispatchable by registry name.
pub enum BuiltinProblem {
    Ex1(Example1),
    Ex2(Example2),
}

/// Names accepted by [`problem_by_name`].
pub const PROBLEM_NAMES: [&str; 2] = ["ex1", "ex2"];

/// Looks up a built-in problem; `None` for unknown names.
pub fn problem_by_name(name: &str) -> Option<BuiltinProblem> {
    match name {
        "ex1" => Some(BuiltinProblem::Ex1(Example1::new())),
        "ex2" => Some(BuiltinProblem::Ex2(Example2::new())),
        _ => None,
    }
}

impl DaeoProblem for BuiltinProblem {
    fn name(&self) -> &'static str {
        match self {
            BuiltinProblem::Ex1(p) => p.name(),
            BuiltinProblem::Ex2(p) => p.name(),
        }
    }
    fn n_x(&self) -> usize {
        match self {
            BuiltinProblem::Ex1(p) => p.n_x(),
            BuiltinProblem::Ex2(p) => p.n_x(),
        }
    }
    fn n_y(&self) -> usize {
        match self {
            BuiltinProblem::Ex1(p) => p.n_y(),
            BuiltinProblem::Ex2(p) => p.n_y(),
        }
    }
    fn initial_state(&self) -> Vec<f64> {
        match self {
            BuiltinProblem::Ex1(p) => p.initial_state(),
            BuiltinProblem::Ex2(p) => p.initial_state(),
        }
    }
    fn time_span(&self) -> (f64, f64) {
        match self {
            BuiltinProblem::Ex1(p) => p.time_span(),
            BuiltinProblem::Ex2(p) => p.time_span(),
        }
    }
    fn y_domain(&self) -> IntervalVector {
        match self {
            BuiltinProblem::Ex1(p) => p.y_domain(),
            BuiltinProblem::Ex2(p) => p.y_domain(),
        }
    }
    fn dynamics<S: Scalar>(&self, x: &[S], y: &[S]) -> Vec<S> {
        match self {
            BuiltinProblem::Ex1(p) => p.dynamics(x, y),
            BuiltinProblem::Ex2(p) => p.dynamics(x, y),
        }
    }
    fn objective<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        match self {
            BuiltinProblem::Ex1(p) => p.objective(x, y),
            BuiltinProblem::Ex2(p) => p.objective(x, y),
        }
    }
    fn reference(&self) -> Option<&ReferenceSolution> {
        match self {
            BuiltinProblem::Ex1(p) => p.reference(),
            BuiltinProblem::Ex2(p) => p.reference(),
        }
    }
}
