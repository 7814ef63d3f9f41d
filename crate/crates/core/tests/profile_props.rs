use bubbles::numeric::geomspace;
use bubbles::profiles::{eval_profile, normalization_data, ode_residual, profile_mass, BubbleProfile};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mass_is_twice_a(a in 0.05f64..=2.0) {
        let m = profile_mass(&BubbleProfile::tower(a).unwrap());
        prop_assert!(m.relative_error < 1e-8, "{:?}", m);
        prop_assert!((m.analytic - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn solves_liouville(a in 0.05f64..=2.0) {
        // relative residual loses ~r^a ulps to cancellation in the far tail
        let grid = geomspace(1e-3, 1e3, 81);
        prop_assert!(ode_residual(&BubbleProfile::tower(a).unwrap(), &grid).unwrap() < 1e-9);
    }

    #[test]
    fn normalized_at_peak(a in 0.05f64..=2.0) {
        let p = BubbleProfile::tower(a).unwrap();
        let (r, z, rz) = normalization_data(&p).unwrap();
        prop_assert!((r - a / 2f64.sqrt()).abs() < 1e-15);
        prop_assert!(z.abs() < 1e-10 && (rz + 2.0).abs() < 1e-10);
    }

    #[test]
    fn density_peaks_at_a_over_root_two(a in 0.05f64..=2.0, off in 0.01f64..3.0) {
        let p = BubbleProfile::tower(a).unwrap();
        let s = (a / 2f64.sqrt()).ln();
        let top = p.log_r2_density(s);
        prop_assert!((top - (0.5 * a * a).ln()).abs() < 1e-12);
        prop_assert!(p.log_r2_density(s + off) < top);
        prop_assert!(p.log_r2_density(s - off) < top);
    }

    #[test]
    fn singular_exponent_at_origin(a in 0.5f64..1.99) {
        let p = BubbleProfile::tower(a).unwrap();
        let b = p.b().unwrap();
        let r = 1e-8f64;
        // z = log(2 a^2 b) + (2 - a) log(1/r) - 2 log(1 + b r^a)
        let rest = p.z(r).unwrap() - (2.0 - a) * (1.0 / r).ln() - (2.0 * a * a * b).ln();
        prop_assert!(rest <= 1e-12 && rest >= -2.0 * b * r.powf(a) - 1e-12, "{}", rest);
    }

    #[test]
    fn tail_exponent(a in 0.5f64..=2.0) {
        let p = BubbleProfile::tower(a).unwrap();
        let r = 1e8;
        let v = eval_profile(&p, r).unwrap();
        prop_assert!((r * v.z_prime + 2.0 + a).abs() < 1e-4);
    }
}

#[test]
fn regular_profile_mass_four() {
    let m = profile_mass(&BubbleProfile::Regular0);
    assert!(m.relative_error < 1e-10);
    let v = eval_profile(&BubbleProfile::Regular0, 8f64.sqrt()).unwrap();
    // r^2 e^z = 2 at the peak
    assert!((8.0 * v.z.exp() - 2.0).abs() < 1e-14);
}

#[test]
fn tower_singular_at_origin_below_two() {
    assert!(eval_profile(&BubbleProfile::tower(1.0).unwrap(), 0.0).is_err());
    assert!(eval_profile(&BubbleProfile::tower(2.0).unwrap(), 0.0).is_ok());
    assert!(BubbleProfile::tower(2.5).is_err());
}
