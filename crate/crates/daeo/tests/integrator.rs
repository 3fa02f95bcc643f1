//! End-to-end integration runs over the built-in problems: event location
//! accuracy, branch bookkeeping, and the cost of switching events off.

use daeo::ad::objective_derivatives;
use daeo::integrator::{simulate, trapezoid_step, IntegratorConfig, Trajectory};
use daeo::linalg::norm_inf;
use daeo::problem::{Example1, Example2, EXAMPLE1_EVENT_TIME, EXAMPLE2_EVENT_TIMES};

fn config(dt: f64) -> IntegratorConfig {
    IntegratorConfig { dt, ..IntegratorConfig::default() }
}

/// Analytic endpoint of the decay problem: the rate is 3 before the branch
/// exchange and 1 after it.
fn decay_endpoint(t: f64) -> f64 {
    let te = EXAMPLE1_EVENT_TIME;
    if t <= te {
        (-3.0 * t).exp()
    } else {
        0.5 * (-(t - te)).exp()
    }
}

#[test]
fn decay_problem_locates_its_single_exchange_at_every_step_size() {
    let p = Example1::new();
    for (dt, te_bound, end_bound) in [
        (0.04, 1e-3, 2e-3),
        (0.02, 1e-3, 5e-4),
        (0.01, 1e-3, 1.5e-4),
        (0.005, 1e-3, 5e-5),
    ] {
        let traj = simulate(&p, &config(dt)).unwrap();
        assert_eq!(traj.events.len(), 1, "dt = {dt}: expected exactly one exchange");
        let te = traj.events[0].t_event;
        // The exchange must be found inside the grid step that truly
        // contains it, and close to the true time.
        let k = (EXAMPLE1_EVENT_TIME / dt).floor();
        assert!(
            te >= k * dt && te <= (k + 1.0) * dt,
            "dt = {dt}: located t = {te} outside the true step"
        );
        assert!(
            (te - EXAMPLE1_EVENT_TIME).abs() <= te_bound,
            "dt = {dt}: located t = {te}, true {EXAMPLE1_EVENT_TIME}"
        );
        let last = traj.points.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12);
        let err = (last.x[0] - decay_endpoint(1.0)).abs();
        assert!(err <= end_bound, "dt = {dt}: endpoint error {err:.3e} > {end_bound:.0e}");
    }
}

#[test]
fn event_rows_interleave_consistently_with_the_record() {
    let p = Example1::new();
    let traj = simulate(&p, &config(0.02)).unwrap();
    let event_rows: Vec<_> = traj.points.iter().filter(|r| r.is_event).collect();
    assert_eq!(event_rows.len(), 1);
    assert!((event_rows[0].t - traj.events[0].t_event).abs() <= 1e-9 * 0.02);
    for w in traj.points.windows(2) {
        assert!(w[0].t < w[1].t, "output times strictly increase");
    }
}

fn label_changes(traj: &Trajectory) -> Vec<usize> {
    traj.points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].active_label != w[1].active_label)
        .map(|(i, _)| i + 1)
        .collect()
}

#[test]
fn the_active_branch_changes_identity_only_at_events() {
    let p1 = Example1::new();
    let traj = simulate(&p1, &config(0.02)).unwrap();
    let changes = label_changes(&traj);
    assert_eq!(changes.len(), 1, "one exchange, one identity change");
    assert!(traj.points[changes[0]].is_event, "the change lands on the event row");

    let p2 = Example2::new();
    let traj = simulate(&p2, &config(0.02)).unwrap();
    for i in label_changes(&traj) {
        assert!(
            traj.points[i].is_event,
            "identity change at t = {} is not an event row",
            traj.points[i].t
        );
    }
}

#[test]
fn every_row_satisfies_the_algebraic_constraint() {
    let p = Example1::new();
    let cfg = config(0.02);
    let traj = simulate(&p, &cfg).unwrap();
    for row in &traj.points {
        let active = row
            .optima
            .iter()
            .find(|o| o.label == row.active_label)
            .expect("active branch present in its own row");
        for y in [&row.ystar, &active.y] {
            let grad = objective_derivatives(&p, &row.x, y).grad_y;
            assert!(
                norm_inf(&grad) <= 10.0 * cfg.newton_tol,
                "t = {}: constraint residual {:.3e}",
                row.t,
                norm_inf(&grad)
            );
        }
        assert_eq!(row.ystar, row.optima[0].y);
        assert!((row.hstar - row.optima[0].value).abs() == 0.0);
    }
}

#[test]
fn five_well_problem_sees_all_four_exchanges() {
    let p = Example2::new();
    let traj = simulate(&p, &config(0.02)).unwrap();
    assert_eq!(
        traj.events.len(),
        EXAMPLE2_EVENT_TIMES.len(),
        "located {:?}",
        traj.events.iter().map(|e| e.t_event).collect::<Vec<_>>()
    );
    for (ev, reference) in traj.events.iter().zip(EXAMPLE2_EVENT_TIMES) {
        assert!(
            (ev.t_event - reference).abs() <= 5e-3,
            "located {} vs reference {reference}",
            ev.t_event
        );
    }
}

#[test]
fn splitting_a_step_on_one_branch_agrees_to_third_order() {
    let p = Example1::new();
    let split_gap = |dt: f64| {
        let (full, _) = trapezoid_step(&p, &[1.0], &[1.0], dt, 1e-12, 50).unwrap();
        let (xa, ya) = trapezoid_step(&p, &[1.0], &[1.0], 0.4 * dt, 1e-12, 50).unwrap();
        let (xb, _) = trapezoid_step(&p, &xa, &ya, 0.6 * dt, 1e-12, 50).unwrap();
        (full[0] - xb[0]).abs()
    };
    let coarse = split_gap(0.02);
    let fine = split_gap(0.01);
    assert!(coarse <= 5e-5, "split disagreement {coarse:.3e} at dt = 0.02");
    // Third-order local behavior: halving the step shrinks the gap ~8x.
    assert!(coarse / fine > 5.0, "gap ratio {} under step halving", coarse / fine);
}

#[test]
fn disabling_events_degrades_the_endpoint() {
    let p = Example1::new();
    let on = simulate(&p, &config(0.02)).unwrap();
    let off =
        simulate(&p, &IntegratorConfig { events_enabled: false, ..config(0.02) }).unwrap();
    assert!(off.events.is_empty());
    assert!(off.points.iter().all(|r| !r.is_event));
    let exact = decay_endpoint(1.0);
    let err_on = (on.points.last().unwrap().x[0] - exact).abs();
    let err_off = (off.points.last().unwrap().x[0] - exact).abs();
    assert!(
        err_off > err_on,
        "locking the step across the exchange should cost accuracy: on {err_on:.3e}, off {err_off:.3e}"
    );
    // Both modes still resolve the same branch structure at the endpoint.
    assert_eq!(off.points.last().unwrap().optima.len(), 2);
}

#[test]
fn a_partial_final_step_lands_exactly_on_t_end() {
    let p = Example1::new();
    let c = IntegratorConfig { t_end: Some(0.1), ..config(0.03) };
    let traj = simulate(&p, &c).unwrap();
    let times: Vec<f64> = traj.points.iter().map(|r| r.t).collect();
    assert_eq!(times.len(), 5);
    assert_eq!(*times.last().unwrap(), 0.1);
    assert!((times[3] - 0.09).abs() < 1e-15);
}

#[test]
fn the_time_span_override_is_validated() {
    let p = Example1::new();
    let c = IntegratorConfig { t_end: Some(0.0), ..config(0.02) };
    assert!(simulate(&p, &c).is_err());
}
