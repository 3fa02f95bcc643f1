//! Detection and location of global-minimizer exchanges.
//!
//! The trajectory's algebraic state follows one local-minimizer branch of
//! `y -> h(x, y)`; an *event* is the instant at which the global minimum
//! passes from that branch to another. Per step, a switch is *detected* by
//! a Lipschitz displacement bound on the global minimizer, then *located*
//! inside the step by root-finding on the objective gap between the two
//! branches over a locally interpolated trajectory, so the integrator can
//! split the step at the event instead of smearing the kink across it.

use crate::ad::{dy_dt, implicit_dy_dx, objective_derivatives, objective_grad_hess_y};
use crate::interval::IntervalVector;
use crate::linalg::{norm2, norm_inf, LinalgError};
use crate::optimizer::{
    find_local_optima, global_minimum, LocalOptimum, SearchConfig, SearchError, SearchProblem,
};
use crate::problem::DaeoProblem;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EventError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("stationary-point system is degenerate: {0}")]
    Degenerate(#[from] LinalgError),
    #[error("branch tracking failed at x = {x:?}: {reason}")]
    TrackingFailure { x: Vec<f64>, reason: &'static str },
    #[error("event location spent its budget of {probes} global-search probes without converging")]
    LocationFailure { probes: usize },
    #[error("event at t = {t} is not transversal (|ds/dt| = {slope:.3e}); the branches touch tangentially")]
    TransversalityFailure { t: f64, slope: f64 },
}

/// Outcome of the per-step switch test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionVerdict {
    pub event_detected: bool,
    /// How far the global minimizer actually moved over the step.
    pub displacement: f64,
    /// How far continuous drift could have moved it.
    pub bound: f64,
}

/// Flags a step across which the global minimizer jumped: the observed
/// displacement exceeds what drift at the step-start rate `dydt_k` — padded
/// by a safety factor and an absolute floor — can explain.
pub fn detect_event(
    ystar_k: &[f64],
    ystar_next: &[f64],
    dydt_k: &[f64],
    dt: f64,
    safety: f64,
    abstol: f64,
) -> DetectionVerdict {
    let diff: Vec<f64> = ystar_next.iter().zip(ystar_k).map(|(a, b)| a - b).collect();
    let displacement = norm2(&diff);
    let bound = safety * dt.abs() * norm2(dydt_k) + abstol;
    DetectionVerdict { event_detected: displacement > bound, displacement, bound }
}

/// One integration step's worth of dense output: cubic Hermite interpolation
/// from the endpoint states and endpoint derivatives. Locally third-order
/// accurate, so event times read off the interpolant do not degrade the
/// integrator's second-order global error.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t_k: f64,
    pub t_next: f64,
    pub x_k: Vec<f64>,
    pub x_next: Vec<f64>,
    pub f_k: Vec<f64>,
    pub f_next: Vec<f64>,
}

impl DenseSegment {
    fn normalized(&self, t: f64) -> (f64, f64) {
        assert!(
            self.t_k <= t && t <= self.t_next,
            "t = {t} outside segment [{}, {}]",
            self.t_k,
            self.t_next
        );
        let span = self.t_next - self.t_k;
        ((t - self.t_k) / span, span)
    }

    /// Interpolated state at `t`, which must lie within the segment.
    pub fn value(&self, t: f64) -> Vec<f64> {
        let (s, span) = self.normalized(t);
        let h00 = (2.0 * s - 3.0) * s * s + 1.0;
        let h10 = ((s - 2.0) * s + 1.0) * s;
        let h01 = (3.0 - 2.0 * s) * s * s;
        let h11 = (s - 1.0) * s * s;
        (0..self.x_k.len())
            .map(|i| {
                h00 * self.x_k[i]
                    + h10 * span * self.f_k[i]
                    + h01 * self.x_next[i]
                    + h11 * span * self.f_next[i]
            })
            .collect()
    }

    /// Interpolated time derivative at `t`, which must lie within the
    /// segment.
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        let (s, span) = self.normalized(t);
        let d00 = 6.0 * s * (s - 1.0) / span;
        let d10 = (3.0 * s - 4.0) * s + 1.0;
        let d01 = -d00;
        let d11 = (3.0 * s - 2.0) * s;
        (0..self.x_k.len())
            .map(|i| {
                d00 * self.x_k[i]
                    + d10 * self.f_k[i]
                    + d01 * self.x_next[i]
                    + d11 * self.f_next[i]
            })
            .collect()
    }
}

/// Objective gap between two branches at the same state:
/// `h(x, y1) - h(x, y2)`. Crosses zero when the branches exchange global
/// optimality.
pub fn event_function<P: DaeoProblem>(p: &P, x: &[f64], y1: &[f64], y2: &[f64]) -> f64 {
    p.objective(x, y1) - p.objective(x, y2)
}

/// State gradient of the branch gap, following both minimizers as they move
/// with `x`: per branch `d/dx h(x, y(x)) = grad_x h + (dy/dx)^T grad_y h`.
/// The second term is kept even though it is O(newton_tol) at a refined
/// optimum.
pub fn event_gradient<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    y1: &[f64],
    y2: &[f64],
) -> Result<Vec<f64>, EventError> {
    let branch = |y: &[f64]| -> Result<Vec<f64>, EventError> {
        let d = objective_derivatives(p, x, y);
        let s = implicit_dy_dx(p, x, y)?;
        Ok((0..x.len())
            .map(|j| d.grad_x[j] + (0..y.len()).map(|i| d.grad_y[i] * s[(i, j)]).sum::<f64>())
            .collect())
    };
    let g1 = branch(y1)?;
    let g2 = branch(y2)?;
    Ok(g1.iter().zip(&g2).map(|(a, b)| a - b).collect())
}

/// Safety factor on the drift bound that decides whether a tracked point is
/// still the same branch (same spirit as the detection bound).
const TRACK_SAFETY: f64 = 2.0;

/// Follows one local-minimizer branch to a nearby state: Newton on
/// `grad_y h(x_next, ·) = 0` started from the drift predictor
/// `y_prev + dt * dydt_prev`.
///
/// Tracking fails — rather than silently returning some other branch — when
/// the iteration diverges, lands on a non-minimum, or ends further from
/// `y_prev` than drift plus `move_slack` can explain (it fell into a
/// neighboring basin, typically because this one vanished at a fold).
pub fn track_local_optimum<P: DaeoProblem>(
    p: &P,
    x_next: &[f64],
    y_prev: &[f64],
    dydt_prev: &[f64],
    dt: f64,
    move_slack: f64,
    cfg: &SearchConfig,
) -> Result<LocalOptimum, EventError> {
    let fail =
        |reason: &'static str| EventError::TrackingFailure { x: x_next.to_vec(), reason };
    let mut y: Vec<f64> = y_prev.iter().zip(dydt_prev).map(|(a, b)| a + dt * b).collect();
    for _ in 0..cfg.max_newton_iters {
        let (g, h) = objective_grad_hess_y(p, x_next, &y);
        if norm_inf(&g) <= cfg.newton_tol {
            if !h.is_symmetric_positive_definite() {
                return Err(fail("converged to a non-minimum stationary point"));
            }
            let moved: Vec<f64> = y.iter().zip(y_prev).map(|(a, b)| a - b).collect();
            let allowed = TRACK_SAFETY * dt.abs() * norm2(dydt_prev) + move_slack;
            if norm2(&moved) > allowed {
                return Err(fail("left the branch's basin"));
            }
            let value = p.objective(x_next, &y);
            return Ok(LocalOptimum { y, value });
        }
        let step = h.solve(&g).map_err(|_| fail("singular curvature along the branch"))?;
        for (yk, sk) in y.iter_mut().zip(&step) {
            *yk -= sk;
            if !yk.is_finite() {
                return Err(fail("iteration diverged"));
            }
        }
    }
    Err(fail("no convergence within the iteration budget"))
}

/// How an event time was pinned down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocatedBy {
    /// Root of the branch gap along the interpolant, both branches tracked.
    Newton,
    /// Bisection on "which branch is globally optimal", one full global
    /// search per probe.
    Bisection,
}

/// A located optimizer exchange, reported in interpolant coordinates.
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub t_event: f64,
    pub x_event: Vec<f64>,
    pub y_before: Vec<f64>,
    pub y_after: Vec<f64>,
    pub located_by: LocatedBy,
}

/// Newton iterations before location falls back to bisection.
const MAX_LOCATE_NEWTON: usize = 25;
/// Global-search probes a bisection fallback may spend.
const MAX_PROBES: usize = 60;
/// Bracket width (in time) at which bisection stops.
const BISECT_WIDTH: f64 = 1e-9;

enum NewtonOutcome {
    Located(EventRecord),
    /// The gap never changes sign over the segment: nothing to locate.
    NoSignChange,
    /// Newton cannot run to completion here; bisection should take over.
    /// The payload names the reason for debugging.
    Fallback(#[allow(dead_code)] &'static str),
}

/// Locates the optimizer exchange inside a detected step.
///
/// `y_old` is the pre-step global minimizer (anchored at `seg.t_k`), `y_new`
/// the post-step one (anchored at `seg.t_next`). The primary path re-tracks
/// both branches from their anchors to each trial time along the interpolant
/// and runs bracketed Newton on the branch gap
/// `s(t) = h(x(t), y1(t)) - h(x(t), y2(t))`, declaring convergence at
/// `|s| <= event_tol`. Whenever tracking is impossible (the new branch
/// emerged mid-step and cannot be continued back) or Newton misbehaves
/// (leaves the bracket twice, exhausts its budget), location falls back to
/// bisection on "has the global minimizer switched yet", paying one full
/// global search per probe.
///
/// Returns `Ok(None)` when the gap does not change sign across the segment:
/// the rival branch merely touched the incumbent's value (or detection
/// false-alarmed) and the step stands as integrated. A gap that reaches zero
/// with vanishing slope is refused as `TransversalityFailure` instead of
/// being accepted silently.
pub fn locate_event<P: SearchProblem>(
    p: &P,
    seg: &DenseSegment,
    y_old: &[f64],
    y_new: &[f64],
    event_tol: f64,
    search: &SearchConfig,
) -> Result<Option<EventRecord>, EventError> {
    match locate_by_newton(p, seg, y_old, y_new, event_tol, search)? {
        NewtonOutcome::Located(r) => Ok(Some(r)),
        NewtonOutcome::NoSignChange => Ok(None),
        NewtonOutcome::Fallback(_) => locate_by_bisection(p, seg, y_old, y_new, search),
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&diff)
}

enum Probe {
    Val((f64, f64, LocalOptimum, LocalOptimum)),
    /// Tracking or sensitivity failed at this trial time.
    Soft,
}

fn locate_by_newton<P: SearchProblem>(
    p: &P,
    seg: &DenseSegment,
    y_old: &[f64],
    y_new: &[f64],
    event_tol: f64,
    search: &SearchConfig,
) -> Result<NewtonOutcome, EventError> {
    // Basin-change slack: a tracked point may drift, but never a quarter of
    // the way to the other branch.
    let move_slack = 0.25 * dist2(y_old, y_new);
    // Anchor drift rates; a degenerate anchor (optimum born exactly at an
    // endpoint) sends us straight to bisection.
    let (dydt_old, dydt_new) =
        match (dy_dt(p, &seg.x_k, y_old), dy_dt(p, &seg.x_next, y_new)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Ok(NewtonOutcome::Fallback("degenerate branch anchor")),
        };

    // Gap and gap slope at a trial time, with both branches re-tracked from
    // their anchors. Soft failures here mean "let bisection handle it".
    let eval = |t: f64| -> Result<Probe, EventError> {
        let x = seg.value(t);
        let b1 = track_local_optimum(p, &x, y_old, &dydt_old, t - seg.t_k, move_slack, search);
        let b2 = track_local_optimum(p, &x, y_new, &dydt_new, t - seg.t_next, move_slack, search);
        let (b1, b2) = match (b1, b2) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(EventError::TrackingFailure { .. }), _)
            | (_, Err(EventError::TrackingFailure { .. })) => return Ok(Probe::Soft),
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let s = b1.value - b2.value;
        let sdot = match event_gradient(p, &x, &b1.y, &b2.y) {
            Ok(g) => g.iter().zip(seg.derivative(t)).map(|(gi, v)| gi * v).sum::<f64>(),
            Err(EventError::Degenerate(_)) => return Ok(Probe::Soft),
            Err(e) => return Err(e),
        };
        Ok(Probe::Val((s, sdot, b1, b2)))
    };

    let Probe::Val((s_a, d_a, _, _)) = eval(seg.t_k)? else {
        return Ok(NewtonOutcome::Fallback("tracking failed at the step start"));
    };
    let Probe::Val((s_b, d_b, _, _)) = eval(seg.t_next)? else {
        return Ok(NewtonOutcome::Fallback("tracking failed at the step end"));
    };
    if s_a == 0.0 && s_b == 0.0 {
        // Both endpoint gaps vanish identically: the two anchors track the
        // same branch, so there is no exchange to locate.
        return Ok(NewtonOutcome::NoSignChange);
    }
    if s_a > 0.0 {
        // The old branch was not dominant at the step start as tracked; the
        // picture is inconsistent with detection, so let probing sort it out.
        return Ok(NewtonOutcome::Fallback("inconsistent gap signs"));
    }
    if s_b < 0.0 {
        return Ok(NewtonOutcome::NoSignChange);
    }
    let slope_scale = d_a.abs().max(d_b.abs());

    // Bracket [lo, hi] with s(lo) <= 0 <= s(hi); the secant point starts the
    // iteration, and any step leaving the bracket is replaced by its
    // midpoint (a second such excursion gives up on Newton altogether).
    let (mut lo, mut hi) = (seg.t_k, seg.t_next);
    let mut t = if s_b > s_a {
        lo + (hi - lo) * (s_a / (s_a - s_b)).clamp(0.0, 1.0)
    } else {
        0.5 * (lo + hi)
    };
    let mut departures = 0;
    for _ in 0..MAX_LOCATE_NEWTON {
        let Probe::Val((s, sdot, b1, b2)) = eval(t)? else {
            return Ok(NewtonOutcome::Fallback("tracking failed at a trial time"));
        };
        if s.abs() <= event_tol {
            let slope = sdot.abs();
            if slope < 1e-2 * slope_scale || slope < 1e-14 {
                return Err(EventError::TransversalityFailure { t, slope });
            }
            let t_event = t.clamp(seg.t_k, seg.t_next);
            return Ok(NewtonOutcome::Located(EventRecord {
                t_event,
                x_event: seg.value(t_event),
                y_before: b1.y,
                y_after: b2.y,
                located_by: LocatedBy::Newton,
            }));
        }
        if s < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - s / sdot;
        if !next.is_finite() || next <= lo || next >= hi {
            departures += 1;
            if departures >= 2 {
                return Ok(NewtonOutcome::Fallback("left the bracket twice"));
            }
            next = 0.5 * (lo + hi);
        }
        t = next;
    }
    Ok(NewtonOutcome::Fallback("no convergence within the Newton budget"))
}

/// One bisection probe: is the global minimizer at `x(t)` already nearer the
/// post-step anchor than the pre-step one? Returns the full optima set so
/// the caller can identify branches at the final bracket.
fn probe_switched<P: SearchProblem>(
    p: &P,
    seg: &DenseSegment,
    t: f64,
    y_old: &[f64],
    y_new: &[f64],
    domain: &IntervalVector,
    search: &SearchConfig,
    probes: &mut usize,
) -> Result<(bool, Vec<f64>, Vec<LocalOptimum>), EventError> {
    *probes += 1;
    if *probes > MAX_PROBES {
        return Err(EventError::LocationFailure { probes: MAX_PROBES });
    }
    let x = seg.value(t);
    let optima = find_local_optima(p, &x, domain, search)?;
    let g = global_minimum(&optima, search.tie_tol)?;
    let switched = dist2(&g.y, y_new) < dist2(&g.y, y_old);
    Ok((switched, g.y, optima))
}

fn locate_by_bisection<P: SearchProblem>(
    p: &P,
    seg: &DenseSegment,
    y_old: &[f64],
    y_new: &[f64],
    search: &SearchConfig,
) -> Result<Option<EventRecord>, EventError> {
    let domain = p.y_domain();
    let mut probes = 0usize;
    let (sw_a, _, _) =
        probe_switched(p, seg, seg.t_k, y_old, y_new, &domain, search, &mut probes)?;
    let (sw_b, g_b, _) =
        probe_switched(p, seg, seg.t_next, y_old, y_new, &domain, search, &mut probes)?;
    if sw_a == sw_b {
        // No switch visible to full global optimization: a touch, not a
        // crossing.
        return Ok(None);
    }
    let (mut lo, mut hi, mut g_hi) = (seg.t_k, seg.t_next, g_b);
    while hi - lo > BISECT_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (sw, g, _) = probe_switched(p, seg, mid, y_old, y_new, &domain, search, &mut probes)?;
        if sw == sw_b {
            hi = mid;
            g_hi = g;
        } else {
            lo = mid;
        }
    }
    let t_event = 0.5 * (lo + hi);
    let (_, _, optima) =
        probe_switched(p, seg, t_event, y_old, y_new, &domain, search, &mut probes)?;
    let nearest = |target: &[f64]| {
        optima
            .iter()
            .min_by(|a, b| dist2(&a.y, target).total_cmp(&dist2(&b.y, target)))
            .expect("probe verified the optima set is nonempty")
            .y
            .clone()
    };
    Ok(Some(EventRecord {
        t_event,
        x_event: seg.value(t_event),
        y_before: nearest(y_old),
        y_after: nearest(&g_hi),
        located_by: LocatedBy::Bisection,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Example1, Example2};
    use crate::scalar::Scalar;

    fn cfg() -> SearchConfig {
        SearchConfig::default()
    }

    /// The locked pre-event step of the double-well problem, sampled from
    /// the exact flow of x' = -3x at t = 0.22 and 0.24.
    fn decay_segment() -> DenseSegment {
        let (x0, x1) = (0.516_851_334_491_699_24, 0.486_752_255_959_971_65);
        DenseSegment {
            t_k: 0.22,
            t_next: 0.24,
            x_k: vec![x0],
            x_next: vec![x1],
            f_k: vec![-3.0 * x0],
            f_next: vec![-3.0 * x1],
        }
    }

    #[test]
    fn interpolant_matches_endpoint_data() {
        let seg = decay_segment();
        assert!((seg.value(seg.t_k)[0] - seg.x_k[0]).abs() < 1e-15);
        assert!((seg.value(seg.t_next)[0] - seg.x_next[0]).abs() < 1e-15);
        assert!((seg.derivative(seg.t_k)[0] - seg.f_k[0]).abs() < 1e-12);
        assert!((seg.derivative(seg.t_next)[0] - seg.f_next[0]).abs() < 1e-12);
    }

    #[test]
    fn interpolant_tracks_smooth_decay_to_third_order() {
        let seg = decay_segment();
        let mut worst = 0.0f64;
        for k in 0..=200 {
            let t = seg.t_k + (seg.t_next - seg.t_k) * (k as f64) / 200.0;
            worst = worst.max((seg.value(t)[0] - (-3.0 * t).exp()).abs());
        }
        assert!(worst <= 1e-7, "max interpolation error {worst:.3e}");
        assert!(worst > 1e-9, "sanity: the bound is not vacuous");
    }

    #[test]
    #[should_panic(expected = "outside segment")]
    fn interpolant_rejects_out_of_range_times() {
        decay_segment().value(0.25);
    }

    #[test]
    fn detection_flags_jumps_but_not_drift() {
        // Stationary minimizers two units apart: only a switch explains it.
        let v = detect_event(&[1.0], &[-1.0], &[0.0], 0.02, 2.0, 1e-8);
        assert!(v.event_detected);
        assert!((v.displacement - 2.0).abs() < 1e-15);
        assert!((v.bound - 1e-8).abs() < 1e-20);

        // The same minimizer twice: nothing moved.
        let v = detect_event(&[1.0], &[1.0], &[0.0], 0.02, 2.0, 1e-8);
        assert!(!v.event_detected);
        assert_eq!(v.displacement, 0.0);

        // Drift at the predicted rate stays under the safety factor.
        let v = detect_event(&[0.5], &[0.52], &[1.0], 0.02, 2.0, 1e-8);
        assert!(!v.event_detected);
        assert_eq!(v.event_detected, v.displacement > v.bound);
    }

    #[test]
    fn branch_gap_is_linear_for_the_double_well() {
        // h(x, +1) = -(x - 1/2) and h(x, -1) = +(x - 1/2): gap -2(x - 1/2).
        let p = Example1::new();
        assert!((event_function(&p, &[1.0], &[1.0], &[-1.0]) - (-1.0)).abs() < 1e-15);
        assert!(event_function(&p, &[0.5], &[1.0], &[-1.0]).abs() < 1e-15);
        assert_eq!(event_function(&p, &[0.8], &[0.3], &[0.3]), 0.0);
    }

    #[test]
    fn gap_gradient_matches_hand_and_reoptimized_differences() {
        let p = Example1::new();
        for &x in &[0.3, 1.0, 1.6] {
            let g = event_gradient(&p, &[x], &[1.0], &[-1.0]).unwrap();
            assert!((g[0] - (-2.0)).abs() < 1e-12, "gap slope at x = {x}: {}", g[0]);
        }
        let g = event_gradient(&p, &[0.7], &[0.4], &[0.4]).unwrap();
        assert!(g[0].abs() < 1e-15, "identical branches have a flat gap");

        // Oscillatory problem at x = 1.8, two best-valued branches. Frozen
        // oracle: reoptimize both branches at x +/- 1e-5 with high-precision
        // Newton and difference the gap.
        let p = Example2::new();
        let y1 = [2.169_450_192_221_938_1];
        let y2 = [1.007_030_346_980_717_3];
        let g = event_gradient(&p, &[1.8], &y1, &y2).unwrap();
        let rel = (g[0] - (-2.324_839_690_482_001_4)).abs() / 2.3248;
        assert!(rel < 1e-5, "gap gradient {} (rel err {rel:.2e})", g[0]);
    }

    /// h = (y - x)^2 with unit drift: the minimizer is glued to x.
    struct Glued;

    impl DaeoProblem for Glued {
        fn name(&self) -> &'static str {
            "glued"
        }
        fn n_x(&self) -> usize {
            1
        }
        fn n_y(&self) -> usize {
            1
        }
        fn initial_state(&self) -> Vec<f64> {
            vec![0.0]
        }
        fn time_span(&self) -> (f64, f64) {
            (0.0, 1.0)
        }
        fn y_domain(&self) -> IntervalVector {
            IntervalVector::from_bounds(&[(-10.0, 10.0)]).unwrap()
        }
        fn dynamics<S: Scalar>(&self, _x: &[S], _y: &[S]) -> Vec<S> {
            vec![S::constant(1.0)]
        }
        fn objective<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
            (y[0].clone() - x[0].clone()).sqr()
        }
    }

    #[test]
    fn quadratic_branch_tracks_exactly() {
        let t = track_local_optimum(&Glued, &[1.25], &[1.0], &[1.0], 0.25, 0.1, &cfg()).unwrap();
        assert!((t.y[0] - 1.25).abs() < 1e-12);
        assert!(t.value.abs() < 1e-20);
    }

    #[test]
    fn stationary_branch_stays_put() {
        let p = Example1::new();
        for &x in &[0.9, 0.6, 0.51] {
            let t = track_local_optimum(&p, &[x], &[1.0], &[0.0], 0.02, 0.5, &cfg()).unwrap();
            assert!((t.y[0] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tracking_fails_across_a_basin_fold() {
        // Near x ~ 0.63 the oscillatory problem's basin around y ~ 3.17
        // folds away. Tracking into the live basin works; tracking past the
        // fold must refuse rather than hand back some faraway minimizer.
        let p = Example2::new();
        let ok = track_local_optimum(&p, &[0.70], &[3.13], &[0.0], 0.02, 0.5, &cfg()).unwrap();
        assert!((ok.y[0] - 3.171_709_328_400_324_5).abs() < 1e-9);
        match track_local_optimum(&p, &[0.55], &[3.13], &[0.0], 0.02, 0.5, &cfg()) {
            Err(EventError::TrackingFailure { .. }) => {}
            other => panic!("expected TrackingFailure, got {other:?}"),
        }
    }

    #[test]
    fn newton_location_recovers_the_analytic_event_time() {
        let p = Example1::new();
        let seg = decay_segment();
        let r = locate_event(&p, &seg, &[1.0], &[-1.0], 1e-10, &cfg())
            .unwrap()
            .expect("the gap changes sign across this segment");
        let true_te = 2.0f64.ln() / 3.0;
        assert_eq!(r.located_by, LocatedBy::Newton);
        assert!(
            (r.t_event - true_te).abs() <= 1e-6,
            "t = {}, error {:.2e}",
            r.t_event,
            (r.t_event - true_te).abs()
        );
        assert!((r.x_event[0] - 0.5).abs() < 1e-6);
        assert!((r.y_before[0] - 1.0).abs() < 1e-9);
        assert!((r.y_after[0] + 1.0).abs() < 1e-9);
        // Located-event consistency: the record's gap is within tolerance.
        let gap = event_function(&p, &r.x_event, &r.y_before, &r.y_after);
        assert!(gap.abs() <= 1e-10, "|gap| = {:.3e}", gap.abs());
    }

    #[test]
    fn bisection_fallback_agrees_with_newton() {
        let p = Example1::new();
        let seg = decay_segment();
        let newton = locate_event(&p, &seg, &[1.0], &[-1.0], 1e-10, &cfg()).unwrap().unwrap();
        let bis = locate_by_bisection(&p, &seg, &[1.0], &[-1.0], &cfg()).unwrap().unwrap();
        assert_eq!(bis.located_by, LocatedBy::Bisection);
        assert!(
            (bis.t_event - newton.t_event).abs() <= 1e-6,
            "newton {} vs bisection {}",
            newton.t_event,
            bis.t_event
        );
        assert!((bis.y_before[0] - newton.y_before[0]).abs() < 1e-9);
        assert!((bis.y_after[0] - newton.y_after[0]).abs() < 1e-9);
    }

    #[test]
    fn gap_without_sign_change_is_not_an_event() {
        // Segment wholly inside the first phase: y = +1 stays dominant, so
        // whatever detection thought, there is nothing to locate.
        let p = Example1::new();
        let (x0, x1) = ((-3.0f64 * 0.10).exp(), (-3.0f64 * 0.12).exp());
        let seg = DenseSegment {
            t_k: 0.10,
            t_next: 0.12,
            x_k: vec![x0],
            x_next: vec![x1],
            f_k: vec![-3.0 * x0],
            f_next: vec![-3.0 * x1],
        };
        assert!(locate_event(&p, &seg, &[1.0], &[-1.0], 1e-10, &cfg()).unwrap().is_none());
    }

    /// Branch gap with a cubic tangency: h = (1 - y^2)^2 + (x - 1/2)^3 y has
    /// branches near -1 and +1 whose gap 2(x - 1/2)^3 crosses zero with zero
    /// slope at x = 1/2.
    struct Tangent;

    impl DaeoProblem for Tangent {
        fn name(&self) -> &'static str {
            "tangent"
        }
        fn n_x(&self) -> usize {
            1
        }
        fn n_y(&self) -> usize {
            1
        }
        fn initial_state(&self) -> Vec<f64> {
            vec![0.49]
        }
        fn time_span(&self) -> (f64, f64) {
            (0.0, 1.0)
        }
        fn y_domain(&self) -> IntervalVector {
            IntervalVector::from_bounds(&[(-2.0, 2.0)]).unwrap()
        }
        fn dynamics<S: Scalar>(&self, _x: &[S], _y: &[S]) -> Vec<S> {
            vec![S::constant(1.0)]
        }
        fn objective<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
            let well = (S::constant(1.0) - y[0].sqr()).sqr();
            well + (x[0].clone() - S::constant(0.5)).powi(3) * y[0].clone()
        }
    }

    #[test]
    fn tangential_crossing_is_refused() {
        // Unit drift makes the interpolant exactly linear: x crosses 1/2 at
        // t = 0.01 and the gap vanishes cubically there.
        let seg = DenseSegment {
            t_k: 0.0,
            t_next: 0.02,
            x_k: vec![0.49],
            x_next: vec![0.51],
            f_k: vec![1.0],
            f_next: vec![1.0],
        };
        match locate_event(&Tangent, &seg, &[1.0], &[-1.0], 1e-10, &cfg()) {
            Err(EventError::TransversalityFailure { t, .. }) => {
                assert!((t - 0.01).abs() < 2e-3, "tangency near mid-segment, got t = {t}");
            }
            other => panic!("expected TransversalityFailure, got {other:?}"),
        }
    }

    #[test]
    fn pathologically_long_segments_exhaust_the_probe_budget() {
        // Sixty probes cannot shrink a 1e9-long bracket to 1e-9. The
        // crossing sits at t = 0 so every halving stays representable.
        let p = Example1::new();
        let seg = DenseSegment {
            t_k: -5e8,
            t_next: 5e8,
            x_k: vec![0.6],
            x_next: vec![0.4],
            f_k: vec![-2e-10],
            f_next: vec![-2e-10],
        };
        match locate_by_bisection(&p, &seg, &[1.0], &[-1.0], &cfg()) {
            Err(EventError::LocationFailure { probes }) => assert_eq!(probes, MAX_PROBES),
            other => panic!("expected LocationFailure, got {other:?}"),
        }
    }
}
