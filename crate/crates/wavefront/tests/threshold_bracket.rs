use wavefront::model::{speed_upper_bound, EndpointSource};
use wavefront::phase::{compare_with_w, integrate_z};
use wavefront::threshold::{find_sigma_star, probe_speed, solve_w, threshold_report, GSpec, WOutcome};
use wavefront::{FrontKind, Params, ToleranceSet};

#[test]
fn bracket_endpoints_are_witnessed() {
    let d = 2.0;
    let r = threshold_report(d, 1e-3).unwrap();
    let b = &r.bracket;
    assert!(b.width() <= 1e-3);
    assert!(matches!(b.witness_lo, EndpointSource::PhasePlane(_)));
    let tol = ToleranceSet::default();
    assert_eq!(probe_speed(d, b.c_lo, &tol).unwrap().kind, FrontKind::FailedConnection);
    assert!(probe_speed(d, b.c_hi, &tol).unwrap().kind.is_front());
    assert!(probe_speed(d, 2.0 * b.c_hi, &tol).unwrap().kind.is_front());
    assert!(b.c_hi <= r.sigma_star && r.sigma_star <= r.upper_bound);
}

#[test]
fn large_diffusion_threshold_respects_lower_bound() {
    let r = threshold_report(60.0, 1e-3).unwrap();
    assert!(r.bracket.c_lo >= 1.0);
    assert!(r.bracket.c_lo > r.lower_bound);
}

#[test]
fn sigma_star_separates_solvable_speeds() {
    let g = GSpec::new(1.0).unwrap();
    let s = find_sigma_star(&g, 1e-6).unwrap();
    assert!(s.value <= speed_upper_bound(1.0).unwrap() + 1e-3);
    assert!(solve_w(s.value, &g).unwrap().exists());
    assert!(s.below < s.value && s.value - s.below <= 1e-6);
    // `below` sits within 1e-12 relative of σ*, where the verdict is noise.
    assert!(!solve_w(0.999 * s.value, &g).unwrap().exists());
    assert!((s.slope_at_zero + s.value).abs() <= 0.02 * s.value);
    let WOutcome::Solution(above) = solve_w(s.value + 0.5, &g).unwrap() else {
        panic!("no solution above sigma*")
    };
    assert!(above.slope_at_zero.abs() <= 0.02 * s.value);
}

#[test]
fn aux_solution_bounds_phase_path_from_below() {
    let d = 1.0;
    let g = GSpec::new(d).unwrap();
    let s = find_sigma_star(&g, 1e-6).unwrap().value;
    let WOutcome::Solution(w) = solve_w(s, &g).unwrap() else {
        panic!("sigma* must be solvable")
    };
    for c in [s, 2.0 * s] {
        let path = integrate_z(&Params::new(d, c).unwrap()).unwrap();
        let rep = compare_with_w(&path, &w).unwrap();
        assert!(
            rep.holds,
            "c = {c}: min gap {} at beta {}, max z {}",
            rep.min_gap, rep.argmin_beta, rep.max_z
        );
    }
}
