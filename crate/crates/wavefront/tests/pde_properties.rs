use proptest::prelude::*;
use wavefront::pde::{step, Field};
use wavefront::Params;

fn stable_dt(f: &Field, d: f64) -> f64 {
    0.4 * f.stability_bound(d)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn steps_conserve_mass_and_positivity(
        d in 0.1f64..5.0,
        data in prop::collection::vec((0.0f64..1.5, 0.0f64..1.5), 8..64),
    ) {
        let (n, b): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
        let p = Params::new(d, 1.0).unwrap();
        let mut f = Field::new(0.0, 0.1, n, b).unwrap();
        let m0 = f.mass();
        for _ in 0..50 {
            let dt = stable_dt(&f, d);
            f = step(&f, dt, &p).unwrap();
        }
        prop_assert!((f.mass() - m0).abs() <= 1e-12 * m0.max(1.0));
        prop_assert!(f.n.iter().chain(&f.b).all(|&v| v >= 0.0));
        prop_assert_eq!(f.clip_events, 0);
    }

    #[test]
    fn equilibria_are_exactly_stationary(d in 0.1f64..5.0, k in 0.0f64..3.0, len in 4usize..40) {
        let p = Params::new(d, 1.0).unwrap();
        for (n, b) in [(vec![k; len], vec![0.0; len]), (vec![0.0; len], vec![k; len])] {
            let f = Field::new(-1.0, 0.05, n, b).unwrap();
            let g = step(&f, stable_dt(&f, d), &p).unwrap();
            prop_assert_eq!(&g.n, &f.n);
            prop_assert_eq!(&g.b, &f.b);
        }
    }
}

/// Same cell size, twice the domain and time of the standard run: the fitted
/// speed must not move. From a half-size base (L = 50, T = 40) the front is
/// still relaxing and the two speeds differ by about 4%.
#[test]
fn fitted_speed_is_stable_under_domain_doubling() {
    use wavefront::pde::{run_to_front_with, PdeOptions};
    let p = Params::new(2.0, 1.0).unwrap();
    let small = run_to_front_with(&p, 100.0, 80.0, &PdeOptions::default()).unwrap();
    let large = run_to_front_with(
        &p,
        200.0,
        160.0,
        &PdeOptions {
            cells: 8192,
            ..PdeOptions::default()
        },
    )
    .unwrap();
    let (a, b) = (small.estimate.fitted_speed, large.estimate.fitted_speed);
    assert!(a > 0.0 && b > 0.0);
    assert!((a - b).abs() / b < 0.02, "speeds {a} and {b}");
    assert!(large.mass_drift() <= 1e-10);
}
