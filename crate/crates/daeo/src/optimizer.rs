//! Deterministic global search for every local minimum of `y -> h(x, y)`
//! over a box, by interval branch-and-bound.
//!
//! Boxes are classified with guaranteed derivative enclosures:
//!
//! * **eliminate** — the gradient enclosure excludes zero (no stationary
//!   point), or some Hessian diagonal is negative over the whole box (no
//!   stationary point can be a minimum);
//! * **certify** — the gradient enclosure spans zero and the interval
//!   Hessian passes the Gershgorin positive-definiteness test, so `h` is
//!   strictly convex on the box and holds at most one minimizer;
//! * **branch** — inconclusive: bisect along the widest axis and recurse.
//!
//! Because the tests are one-sided, certification is sound but a minimizer
//! sitting exactly on a bisection plane would otherwise surface once per
//! touching box; a consolidation pass therefore merges face-adjacent
//! certified boxes whose hull re-certifies. Each surviving box is polished
//! by damped-free Newton iteration to floating-point accuracy.
//!
//! The frontier is processed wave by wave. Within a wave, boxes are
//! independent, which is what makes the work data-parallel; results are
//! merged in input order, so the output is identical whether a wave is
//! classified sequentially or in parallel.

use crate::ad::{interval_grad_hess_y, interval_grad_y, interval_objective, objective_grad_hess_y};
use crate::interval::{Interval, IntervalError, IntervalSymMatrix, IntervalVector};
use crate::linalg::norm_inf;
use crate::problem::DaeoProblem;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

/// Problems usable by the search. With the `parallel` feature, waves may be
/// classified from worker threads, so the problem must be `Sync`.
#[cfg(feature = "parallel")]
pub trait SearchProblem: DaeoProblem + Sync {}
#[cfg(feature = "parallel")]
impl<P: DaeoProblem + Sync> SearchProblem for P {}

#[cfg(not(feature = "parallel"))]
pub trait SearchProblem: DaeoProblem {}
#[cfg(not(feature = "parallel"))]
impl<P: DaeoProblem> SearchProblem for P {}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("invalid search configuration: {what}")]
    InvalidConfig { what: &'static str },
    #[error("work queue exceeded {limit} boxes at depth {depth}")]
    WorkQueueOverflow { limit: usize, depth: usize },
    #[error("search left {count} unresolved boxes (widest {widest:.3e}); the problem is degenerate at this state or the width/depth limits are too tight")]
    Indeterminate { count: usize, widest: f64 },
    #[error("Newton polish did not converge after {iters} iterations in {ybox:?}")]
    RefinementFailure { ybox: IntervalVector, iters: usize },
    #[error("no local minimum exists in the search domain")]
    NoMinimumFound,
}

/// Tuning knobs for the branch-and-bound search and Newton polish.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Bisection depth after which inconclusive boxes are left unresolved.
    pub max_depth: usize,
    /// Boxes narrower than this (widest axis) are left unresolved rather
    /// than split further.
    pub min_width: f64,
    /// Hard cap on the frontier size; exceeding it aborts the search.
    pub max_boxes: usize,
    /// Polished minimizers closer than this (max-norm) are considered the
    /// same point and deduplicated.
    pub merge_tol: f64,
    /// Gradient max-norm at which Newton polish declares convergence.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Optional value-dominance pruning: discard boxes whose objective lower
    /// bound exceeds the best certified upper bound by more than this margin.
    /// `None` (the default) keeps every local minimum; with `Some(a)` only
    /// minima within `a` of the global survive, which is sound when just the
    /// global branch matters. The incumbent updates between waves, never
    /// within one, so results stay deterministic.
    pub alpha: Option<f64>,
    /// Minima whose values differ by at most this are reported as tied.
    pub tie_tol: f64,
    /// Classify waves on the rayon pool. Ignored without the `parallel`
    /// feature; either way the result is identical.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_depth: 60,
            min_width: 1e-10,
            max_boxes: 100_000,
            merge_tol: 1e-8,
            newton_tol: 1e-12,
            max_newton_iters: 50,
            alpha: None,
            tie_tol: 1e-9,
            parallel: cfg!(feature = "parallel"),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        fn pos(v: f64, what: &'static str) -> Result<(), SearchError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SearchError::InvalidConfig { what })
            }
        }
        pos(self.min_width, "min_width must be positive")?;
        pos(self.merge_tol, "merge_tol must be positive")?;
        pos(self.newton_tol, "newton_tol must be positive")?;
        pos(self.tie_tol, "tie_tol must be positive")?;
        if let Some(a) = self.alpha {
            if !a.is_finite() || a < 0.0 {
                return Err(SearchError::InvalidConfig { what: "alpha must be non-negative" });
            }
        }
        if self.max_boxes == 0 {
            return Err(SearchError::InvalidConfig { what: "max_boxes must be positive" });
        }
        if self.max_newton_iters == 0 {
            return Err(SearchError::InvalidConfig { what: "max_newton_iters must be positive" });
        }
        Ok(())
    }
}

/// A box on which `h(x, ·)` is verified strictly convex with a stationary
/// point not excluded, together with the certifying enclosures.
#[derive(Debug, Clone)]
pub struct CertifiedBox {
    pub ybox: IntervalVector,
    /// Range of `h` over the box.
    pub objective: Interval,
    pub gradient: Vec<Interval>,
    pub hessian: IntervalSymMatrix,
}

/// Everything the branch-and-bound phase produces, before polishing.
#[derive(Debug)]
pub struct SearchOutcome {
    /// Certified convex boxes, sorted by lower corner.
    pub certified: Vec<CertifiedBox>,
    /// Boxes the width/depth limits forced the search to give up on.
    /// Empty for well-posed problems.
    pub unresolved: Vec<IntervalVector>,
}

/// A polished local minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOptimum {
    pub y: Vec<f64>,
    pub value: f64,
}

/// The minimum over all local optima.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMinimum {
    pub y: Vec<f64>,
    pub value: f64,
    /// Another local minimum matches this value to within `tie_tol`: the
    /// global minimizer is changing hands.
    pub tie: bool,
}

enum Verdict {
    Eliminated,
    Certified(Box<CertifiedBox>),
    Split(IntervalVector, IntervalVector),
    Unresolved(IntervalVector),
}

fn classify<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    ybox: &IntervalVector,
    depth: usize,
    cfg: &SearchConfig,
    incumbent: Option<f64>,
) -> Result<Verdict, SearchError> {
    if let (Some(alpha), Some(ub)) = (cfg.alpha, incumbent) {
        if lower_bound(p, x, ybox)? > ub + alpha {
            return Ok(Verdict::Eliminated);
        }
    }
    // First-order test alone settles most boxes; only survivors pay for the
    // second-order pass.
    let grad = interval_grad_y(p, x, ybox)?;
    if grad.iter().any(|g| !g.contains_zero()) {
        return Ok(Verdict::Eliminated);
    }
    let (gradient, hessian) = interval_grad_hess_y(p, x, ybox)?;
    if hessian.has_negative_diagonal() {
        return Ok(Verdict::Eliminated);
    }
    if hessian.is_positive_definite() {
        let objective = interval_objective(p, x, ybox)?;
        return Ok(Verdict::Certified(Box::new(CertifiedBox {
            ybox: ybox.clone(),
            objective,
            gradient,
            hessian,
        })));
    }
    if ybox.width() < cfg.min_width || depth >= cfg.max_depth {
        return Ok(Verdict::Unresolved(ybox.clone()));
    }
    let (left, right) = ybox.bisect();
    Ok(Verdict::Split(left, right))
}

fn classify_wave<P: SearchProblem>(
    p: &P,
    x: &[f64],
    frontier: &[IntervalVector],
    depth: usize,
    cfg: &SearchConfig,
    incumbent: Option<f64>,
) -> Result<Vec<Verdict>, SearchError> {
    #[cfg(feature = "parallel")]
    if cfg.parallel {
        return frontier
            .par_iter()
            .map(|b| classify(p, x, b, depth, cfg, incumbent))
            .collect();
    }
    frontier.iter().map(|b| classify(p, x, b, depth, cfg, incumbent)).collect()
}

fn sort_boxes(certified: &mut [CertifiedBox]) {
    certified.sort_by(|a, b| {
        a.ybox
            .lower_corner()
            .partial_cmp(&b.ybox.lower_corner())
            .expect("box corners are finite")
    });
}

/// Hull of two boxes that share a whole face: identical in every component
/// except one, where they are exactly adjacent.
fn face_adjacent_hull(a: &IntervalVector, b: &IntervalVector) -> Option<IntervalVector> {
    let n = a.dim();
    let mut shared_axis = None;
    for k in 0..n {
        let (ca, cb) = (a.component(k), b.component(k));
        if ca == cb {
            continue;
        }
        if ca.hi() == cb.lo() || cb.hi() == ca.lo() {
            if shared_axis.is_some() {
                return None;
            }
            shared_axis = Some(());
        } else {
            return None;
        }
    }
    shared_axis.map(|_| a.hull(b))
}

fn try_certify<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    ybox: &IntervalVector,
) -> Result<Option<CertifiedBox>, SearchError> {
    let (gradient, hessian) = interval_grad_hess_y(p, x, ybox)?;
    if gradient.iter().all(Interval::contains_zero) && hessian.is_positive_definite() {
        let objective = interval_objective(p, x, ybox)?;
        Ok(Some(CertifiedBox { ybox: ybox.clone(), objective, gradient, hessian }))
    } else {
        Ok(None)
    }
}

/// Merges face-adjacent certified boxes whose hull re-certifies, to a fixed
/// point. A minimizer that falls exactly on a bisection plane is certified
/// once per touching box; after consolidation it owns a single box.
fn consolidate<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    mut certified: Vec<CertifiedBox>,
) -> Result<Vec<CertifiedBox>, SearchError> {
    loop {
        sort_boxes(&mut certified);
        let mut merged = None;
        'scan: for i in 0..certified.len() {
            for j in i + 1..certified.len() {
                if let Some(hull) = face_adjacent_hull(&certified[i].ybox, &certified[j].ybox) {
                    if let Some(cb) = try_certify(p, x, &hull)? {
                        merged = Some((i, j, cb));
                        break 'scan;
                    }
                }
            }
        }
        match merged {
            Some((i, j, cb)) => {
                certified[i] = cb;
                certified.remove(j);
            }
            None => return Ok(certified),
        }
    }
}

/// Runs branch-and-bound over `domain` and returns the certified convex
/// boxes (consolidated and sorted) plus any boxes left unresolved.
pub fn find_convex_boxes<P: SearchProblem>(
    p: &P,
    x: &[f64],
    domain: &IntervalVector,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    cfg.validate()?;
    let mut frontier = vec![domain.clone()];
    let mut certified: Vec<CertifiedBox> = Vec::new();
    let mut unresolved: Vec<IntervalVector> = Vec::new();
    let mut incumbent: Option<f64> = None;
    let mut depth = 0;
    while !frontier.is_empty() {
        if frontier.len() > cfg.max_boxes {
            return Err(SearchError::WorkQueueOverflow { limit: cfg.max_boxes, depth });
        }
        let verdicts = classify_wave(p, x, &frontier, depth, cfg, incumbent)?;
        let mut next = Vec::new();
        for v in verdicts {
            match v {
                Verdict::Eliminated => {}
                Verdict::Certified(cb) => {
                    let ub = cb.objective.hi();
                    incumbent = Some(incumbent.map_or(ub, |cur: f64| cur.min(ub)));
                    certified.push(*cb);
                }
                Verdict::Split(l, r) => {
                    next.push(l);
                    next.push(r);
                }
                Verdict::Unresolved(b) => unresolved.push(b),
            }
        }
        frontier = next;
        depth += 1;
    }
    let certified = consolidate(p, x, certified)?;
    Ok(SearchOutcome { certified, unresolved })
}

/// Newton polish of the minimizer inside a certified box, started from the
/// midpoint.
///
/// Returns `Ok(None)` for a spurious box: enclosure overestimation can
/// certify a box whose actual stationary point lies outside it, in which
/// case the iteration either walks out of the inflated box or converges to
/// a point on or beyond the box boundary. Only strictly interior converged
/// points are accepted — consolidation has already arranged for every real
/// minimizer (bisection-corner ones included) to be interior to its box.
/// `Err(RefinementFailure)` means the iteration neither converged nor
/// escaped — a genuinely suspect state.
pub fn local_refine<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    cb: &CertifiedBox,
    cfg: &SearchConfig,
) -> Result<Option<LocalOptimum>, SearchError> {
    let b = &cb.ybox;
    let n = b.dim();
    // Escape margin: half the box width on each side.
    let inflated: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let c = b.component(k);
            let r = 0.5 * c.width();
            (c.lo() - r, c.hi() + r)
        })
        .collect();

    let mut y = b.midpoint();
    for _ in 0..cfg.max_newton_iters {
        let (g, h) = objective_grad_hess_y(p, x, &y);
        if norm_inf(&g) <= cfg.newton_tol {
            let interior = (0..n).all(|k| {
                let c = b.component(k);
                y[k] > c.lo() && y[k] < c.hi()
            });
            if !interior || !h.is_symmetric_positive_definite() {
                return Ok(None);
            }
            let value = p.objective(x, &y);
            return Ok(Some(LocalOptimum { y, value }));
        }
        let step = match h.solve(&g) {
            Ok(s) => s,
            Err(_) => {
                return Err(SearchError::RefinementFailure {
                    ybox: b.clone(),
                    iters: cfg.max_newton_iters,
                })
            }
        };
        for k in 0..n {
            y[k] -= step[k];
            if y[k] < inflated[k].0 || y[k] > inflated[k].1 || !y[k].is_finite() {
                return Ok(None);
            }
        }
    }
    Err(SearchError::RefinementFailure { ybox: b.clone(), iters: cfg.max_newton_iters })
}

/// Finds every local minimum of `y -> h(x, y)` over `domain`:
/// branch-and-bound, polish, deduplicate, sort by value.
pub fn find_local_optima<P: SearchProblem>(
    p: &P,
    x: &[f64],
    domain: &IntervalVector,
    cfg: &SearchConfig,
) -> Result<Vec<LocalOptimum>, SearchError> {
    let outcome = find_convex_boxes(p, x, domain, cfg)?;
    if !outcome.unresolved.is_empty() {
        let widest = outcome.unresolved.iter().map(IntervalVector::width).fold(0.0, f64::max);
        return Err(SearchError::Indeterminate { count: outcome.unresolved.len(), widest });
    }
    let mut optima = Vec::new();
    for cb in &outcome.certified {
        if let Some(o) = local_refine(p, x, cb, cfg)? {
            optima.push(o);
        }
    }
    optima.sort_by(|a, b| {
        a.value.total_cmp(&b.value).then_with(|| a.y.partial_cmp(&b.y).expect("finite"))
    });
    // Deduplicate boundary minimizers reported by more than one box, keeping
    // the best-valued representative.
    let mut unique: Vec<LocalOptimum> = Vec::new();
    for o in optima {
        if !unique.iter().any(|u| {
            u.y.iter().zip(&o.y).all(|(a, b)| (a - b).abs() <= cfg.merge_tol)
        }) {
            unique.push(o);
        }
    }
    Ok(unique)
}

/// Selects the minimum-value member of a set of local optima, flagging a
/// value tie with any other member (the signature of a minimizer exchange).
pub fn global_minimum(
    optima: &[LocalOptimum],
    tie_tol: f64,
) -> Result<GlobalMinimum, SearchError> {
    let (bi, best) = optima
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.value.total_cmp(&b.value))
        .ok_or(SearchError::NoMinimumFound)?;
    let tie = optima
        .iter()
        .enumerate()
        .any(|(i, o)| i != bi && (o.value - best.value).abs() <= tie_tol);
    Ok(GlobalMinimum { y: best.y.clone(), value: best.value, tie })
}

/// Certified lower bound on `h(x, ·)` over a box: no point of `ybox`
/// evaluates below it. One interval evaluation — cheap enough to call per
/// box during pruning.
pub fn lower_bound<P: DaeoProblem>(
    p: &P,
    x: &[f64],
    ybox: &IntervalVector,
) -> Result<f64, SearchError> {
    Ok(interval_objective(p, x, ybox)?.lo())
}
