//! Dynamics of the carbonate system at the shipped modern-ocean parameters.
//! These tests need `params/rothman-modern-ocean.json` at the workspace root
//! and skip (with a notice) when it is absent.

use carbon_gmam::carbon::{CarbonSystem, ModelParams};
use carbon_gmam::dynamics::{
    find_fixed_point, find_limit_cycle, find_thresholds, integrate, scan_regimes, Direction,
    Regime, Stability,
};
use carbon_gmam::gmam::{geometric_action, solve, GmamConfig, Quadrature};
use carbon_gmam::num::Vec2;
use carbon_gmam::path::resample;
use carbon_gmam::system::System;
use std::path::PathBuf;

fn shipped_params() -> Option<ModelParams<f64>> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../params/rothman-modern-ocean.json");
    let text = std::fs::read_to_string(p).ok()?;
    let params: ModelParams<f64> = serde_json::from_str(&text).expect("shipped params parse");
    params.validate().expect("shipped params validate");
    Some(params)
}

macro_rules! require_params {
    () => {
        match shipped_params() {
            Some(p) => p,
            None => {
                eprintln!("skipping: params/rothman-modern-ocean.json not present");
                return;
            }
        }
    };
}

#[test]
fn fixed_point_matches_closed_form() {
    let params = require_params!();
    // c* = c_p/(b−1)^{1/γ} is exact for this drift
    let sys = CarbonSystem::new(params.with_c_x(62.0)).unwrap();
    let fp = find_fixed_point(&sys, sys.fixed_point_guess()).unwrap();
    assert!(
        (fp.x - 83.58192542167518).abs() < 1e-9,
        "c* = {} differs from the closed form",
        fp.x
    );
    let d = sys.drift(fp);
    assert!(d.x.abs().max(d.y.abs()) < 1e-10);
}

#[test]
fn regime_boundaries_sit_where_expected() {
    let params = require_params!();
    let th = find_thresholds(&params, 54.0, 64.0, 1.0).unwrap();
    let lower = th.lower.expect("cycle-birth threshold in range");
    let upper = th.upper.expect("stability-loss threshold in range");
    assert!(
        (lower - 55.8985).abs() < 0.05,
        "cycle-birth threshold {lower}"
    );
    assert!(
        (upper - 62.6143).abs() < 0.05,
        "stability-loss threshold {upper}"
    );
    assert!(lower < upper);
}

#[test]
fn regime_scan_classifies_the_three_windows() {
    let params = require_params!();
    let reports = scan_regimes(&[55.0, 57.0, 62.0, 63.5], &params);
    assert_eq!(reports[0].regime, Regime::SingleStablePoint);
    assert_eq!(reports[1].regime, Regime::Bistable);
    assert_eq!(reports[2].regime, Regime::Bistable);
    assert_eq!(reports[3].regime, Regime::CycleOnly);
    for r in &reports {
        assert!(r.error.is_none(), "c_x={} error {:?}", r.c_x, r.error);
        assert!(r.fixed_point.is_some());
    }
    assert_eq!(reports[3].fixed_point_stable, Some(false));
}

#[test]
fn stable_cycle_extent_and_period() {
    let params = require_params!().with_c_x(62.0);
    let cyc = find_limit_cycle(&params, Stability::Stable).unwrap();
    assert!((cyc.period - 3.8258).abs() < 0.005, "period {}", cyc.period);
    let (lo, hi) = cyc.bounding_box();
    assert!((lo.x - 8.461).abs() < 0.1, "c min {}", lo.x);
    assert!((hi.x - 187.124).abs() < 0.1, "c max {}", hi.x);
    assert!((lo.y - 2126.68).abs() < 0.5, "w min {}", lo.y);
    assert!((hi.y - 3319.93).abs() < 0.5, "w max {}", hi.y);
    // stored closed: last point duplicates the first exactly
    assert_eq!(cyc.points[0], *cyc.points.last().unwrap());
}

#[test]
fn unstable_cycle_nests_between_point_and_stable_cycle() {
    let params = require_params!().with_c_x(62.0);
    let stable = find_limit_cycle(&params, Stability::Stable).unwrap();
    let unstable = find_limit_cycle(&params, Stability::Unstable).unwrap();
    assert!(
        (unstable.period - 2.1361).abs() < 0.005,
        "unstable period {}",
        unstable.period
    );

    let sys = CarbonSystem::new(params).unwrap();
    let fp = find_fixed_point(&sys, sys.fixed_point_guess()).unwrap();
    assert!(unstable.contains(fp), "fixed point inside the unstable orbit");
    assert!(stable.contains(fp));
    // every unstable-orbit point lies inside the stable orbit
    for p in unstable.points.iter().step_by(16) {
        assert!(stable.contains(*p), "unstable orbit leaks at ({}, {})", p.x, p.y);
    }
    // and the stable orbit is strictly outside the unstable one
    let far = stable
        .points
        .iter()
        .filter(|p| !unstable.contains(**p))
        .count();
    assert_eq!(far, stable.points.len(), "orbits must not interleave");
}

#[test]
fn forward_flow_leaves_the_unstable_orbit() {
    // the unstable orbit is a watershed: nudged inward the flow spirals to
    // the fixed point, nudged outward it reaches the stable orbit
    let params = require_params!().with_c_x(62.0);
    let stable = find_limit_cycle(&params, Stability::Stable).unwrap();
    let unstable = find_limit_cycle(&params, Stability::Unstable).unwrap();
    let sys = CarbonSystem::new(params).unwrap();
    let fp = find_fixed_point(&sys, sys.fixed_point_guess()).unwrap();

    let anchor = unstable.point_at_arc(0.25 * unstable.arc_length());
    let inward = anchor + (fp - anchor) * 0.02;
    let outward = anchor - (fp - anchor) * 0.02;

    // the focus is weakly attracting this close to its stability boundary,
    // so ask for clear contraction, not full collapse
    let t_in = integrate(&sys, inward, 200.0, 1e-3, Direction::Forward).unwrap();
    let end_in = *t_in.states.last().unwrap();
    assert!(unstable.contains(end_in));
    assert!(
        end_in.dist(fp) < 0.2 * inward.dist(fp),
        "inward nudge ended at ({}, {}), {} from the fixed point",
        end_in.x,
        end_in.y,
        end_in.dist(fp)
    );

    let t_out = integrate(&sys, outward, 200.0, 1e-3, Direction::Forward).unwrap();
    let end_out = *t_out.states.last().unwrap();
    assert!(
        stable.distance_to(end_out) < 0.05 * stable.bbox_diagonal(),
        "outward nudge ended {} from the stable orbit",
        stable.distance_to(end_out)
    );
}

#[test]
fn deterministic_flow_segment_costs_nothing() {
    // a drift trajectory is a zero of the geometric action
    let params = require_params!().with_c_x(62.0);
    let sys = CarbonSystem::new(params).unwrap();
    let fp = find_fixed_point(&sys, sys.fixed_point_guess()).unwrap();
    let traj = integrate(
        &sys,
        Vec2::new(fp.x + 5.0, fp.y),
        4.0,
        1e-3,
        Direction::Forward,
    )
    .unwrap();
    let pts = resample(&traj.states, 1000).unwrap();
    let s = geometric_action(&sys, &pts, Quadrature::Midpoint).unwrap();
    assert!(s < 1e-6, "flow-segment action {s}");
}

#[test]
fn transition_action_refines_at_second_order() {
    // fixed interior endpoints, ladder of resolutions: successive action
    // differences shrink ~4× per doubling
    let params = require_params!().with_c_x(62.0);
    let sys = CarbonSystem::new(params).unwrap();
    let fp = find_fixed_point(&sys, sys.fixed_point_guess()).unwrap();
    let xa = fp + Vec2::new(-4.0, 20.0);
    let xb = fp + Vec2::new(-7.0, 50.0);
    let action_at = |n: usize| {
        let cfg = GmamConfig {
            n_points: n,
            max_outer_iters: 20_000,
            step_tau: 1e-2,
            conv_tol: 1e-8,
            quadrature: Quadrature::Midpoint,
        };
        let r = solve(&sys, xa, xb, &cfg).unwrap();
        assert!(r.converged, "N={n} stopped {:?} after {}", r.reason, r.iterations);
        r.action
    };
    let s: Vec<f64> = [375, 750, 1500].iter().map(|&n| action_at(n)).collect();
    let d1 = (s[1] - s[0]).abs();
    let d2 = (s[2] - s[1]).abs();
    let ratio = d1 / d2;
    assert!(
        (2.5..6.0).contains(&ratio),
        "refinement ratio {ratio} (diffs {d1:e}, {d2:e})"
    );
    assert!((s[2] - 0.002714693).abs() / 0.002714693 < 1e-3, "S = {}", s[2]);
}

#[test]
fn quasipotential_is_invariant_under_the_weathering_shift() {
    // ν enters only through w ↦ w + μν: drifts at shifted states agree, so
    // transition paths and actions cannot depend on ν
    let params = require_params!().with_c_x(62.0);
    let sys0 = CarbonSystem::new(params).unwrap();
    for nu in [0.1, 0.4, 0.9] {
        let p = params.with_nu(nu);
        let sys = CarbonSystem::new(p).unwrap();
        let shift = p.mu * nu;
        for (c, w) in [(60.0, 2200.0), (83.58, 2290.0), (120.0, 2600.0), (30.0, 2900.0)] {
            let d0 = sys0.drift(Vec2::new(c, w));
            let dn = sys.drift(Vec2::new(c, w + shift));
            assert!(
                (d0.x - dn.x).abs() <= 1e-9 * d0.x.abs().max(1.0),
                "nu={nu}: drift_c {} vs {}",
                d0.x,
                dn.x
            );
            assert!(
                (d0.y - dn.y).abs() <= 1e-9 * d0.y.abs().max(1.0),
                "nu={nu}: drift_w {} vs {}",
                d0.y,
                dn.y
            );
        }
        // the fixed point rides the same shift, c* untouched
        let fp0 = find_fixed_point(&sys0, sys0.fixed_point_guess()).unwrap();
        let fpn = find_fixed_point(&sys, sys.fixed_point_guess()).unwrap();
        assert!((fp0.x - fpn.x).abs() < 1e-9);
        assert!((fpn.y - fp0.y - shift).abs() < 1e-6);
    }
}
