//! Numerical simulation of differential-algebraic equations whose algebraic
//! condition is a global optimization problem (DAEOs): systems
//!
//! ```text
//!     x'(t) = f(x(t), y*(t))          y*(t) = argmin_y h(x(t), y)
//! ```
//!
//! where the optimizer `y*` may jump between local minima of `h(x, ·)` as `x`
//! drifts. Each such jump is an event; integrating across one without
//! noticing degrades a second-order integrator to first order.
//!
//! The crate provides the pieces needed to do this reliably:
//!
//! * [`interval`] — interval arithmetic with outward rounding, giving
//!   guaranteed enclosures of function ranges over boxes.
//! * [`scalar`] / [`dual`] — a common scalar abstraction plus forward-mode
//!   first- and second-order derivative propagation, generic over the base
//!   scalar so the same problem code yields real and interval derivatives.
//! * [`ad`] — derivative drivers built on the duals: objective gradients and
//!   Hessians (pointwise and over boxes), dynamics Jacobians, and implicit
//!   sensitivities of tracked minimizers.
//! * [`linalg`] — the small dense matrices, LU solves, and the Cholesky
//!   positive-definiteness test the rest of the crate leans on.
//! * [`problem`] — the problem trait, two built-in test problems, and a
//!   name-based registry.
//! * [`optimizer`] — deterministic branch-and-bound search for *all* local
//!   minima of `h(x, ·)` over a box, certified by an interval second-order
//!   sufficiency test and polished by Newton iteration.
//! * [`integrator`] — an implicit trapezoidal rule for the coupled system,
//!   minimizer tracking from step to step, and the simulation driver.
//! * [`events`] — detection of optimizer jumps between accepted steps and
//!   Newton location of the crossing time on a dense interpolant, so steps
//!   can be split at the jump and second-order convergence retained.

pub mod ad;
pub mod dual;
pub mod events;
pub mod integrator;
pub mod interval;
pub mod linalg;
pub mod optimizer;
pub mod problem;
pub mod scalar;

pub use integrator::{simulate, IntegratorConfig, Trajectory};
pub use optimizer::{find_local_optima, global_minimum, SearchConfig};
pub use problem::{problem_by_name, DaeoProblem};
