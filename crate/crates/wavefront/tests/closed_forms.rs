//! Closed-form rates checked against the polynomials they solve.

use proptest::prelude::*;
use wavefront::model::{kappa, lower_ratio_l, nu, sigma1, sigma2, speed_lower_bound, speed_upper_bound};

proptest! {
    #[test]
    fn sigma2_is_the_positive_root(c in 1e-3f64..1e3) {
        let s = sigma2(c).unwrap();
        prop_assert!(s > 0.0);
        prop_assert!((s * s + c * s - 1.0).abs() <= 1e-12 * (1.0 + c * s));
    }

    #[test]
    fn nu_solves_its_quadratic_and_is_monotone(c in 1e-2f64..50.0, m in 1e-6f64..10.0) {
        let v = nu(c, m).unwrap();
        prop_assert!((v * v + c * v - m).abs() <= 1e-12 * (m + c * v));
        prop_assert!(nu(c, 1.01 * m).unwrap() > v);
    }

    #[test]
    fn sigma1_at_one_is_sigma2(c in 1e-2f64..50.0) {
        prop_assert_eq!(sigma1(c, 1.0).unwrap(), nu(c, 1.0).unwrap());
        prop_assert!((sigma1(c, 1.0).unwrap() - sigma2(c).unwrap()).abs() <= 1e-14);
    }

    /// Leading-order balance of the first integral at the left state gives
    /// `(1 − β)/η → (c + σ₂)/c`.
    #[test]
    fn lower_ratio_matches_left_balance(c in 1e-2f64..100.0) {
        let l = lower_ratio_l(c).unwrap();
        let s = sigma2(c).unwrap();
        prop_assert!(l > 0.0 && l < 1.0);
        prop_assert!((l - c / (c + s)).abs() <= 1e-13);
    }

    #[test]
    fn kappa_is_linear_in_eta0(c in 0.1f64..20.0, f in 0.01f64..0.99) {
        let l = lower_ratio_l(c).unwrap();
        let eta0 = f * l;
        let k = kappa(c, eta0).unwrap();
        prop_assert!((k - (1.0 - eta0 / l)).abs() <= 1e-13);
        prop_assert!(k > 0.0 && k < 1.0);
    }

    #[test]
    fn speed_bounds_are_ordered(d in 1e-3f64..200.0) {
        let lo = speed_lower_bound(d).unwrap();
        let hi = speed_upper_bound(d).unwrap();
        prop_assert!(lo >= 0.0 && lo < hi);
        prop_assert!((hi * hi - 4.0 * d * d.exp()).abs() <= 1e-12 * hi * hi);
    }
}

#[test]
fn known_values() {
    assert!((speed_upper_bound(1.0).unwrap() - 2.0 * 1f64.exp().sqrt()).abs() < 1e-15);
    assert!((speed_upper_bound(2.0f64).unwrap() - 2.0 * 2f64.sqrt() * 1f64.exp()).abs() < 1e-11);
    assert_eq!(speed_lower_bound(15.0).unwrap(), 0.0);
    assert!((speed_lower_bound(60.0f64).unwrap() - 1.0).abs() < 1e-15);
    assert!(sigma2(0.0f64).is_err());
    assert!(kappa(1.0, 0.9).is_err());
}
