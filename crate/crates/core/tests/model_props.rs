use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rover_locate::model::{
    horizontal_angle, horizontal_gain, path_loss, recover_phi, rssi_2d, vertical_gain, Channel,
    RelativePosition3,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn path_loss_strictly_decreasing(a in 0.0..2e5f64, b in 0.0..2e5f64) {
        prop_assume!(a != b);
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(path_loss(near).unwrap() > path_loss(far).unwrap());
    }

    #[test]
    fn horizontal_gain_even_and_periodic(phi in -10.0..10.0f64) {
        let g = horizontal_gain(phi).unwrap();
        prop_assert!((-5.0..=0.0).contains(&g));
        prop_assert!((g - horizontal_gain(-phi).unwrap()).abs() < 1e-12);
        prop_assert!((g - horizontal_gain(phi + PI).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn vertical_gain_constant_on_domain(theta in -1.5..1.5f64) {
        prop_assert!((vertical_gain(theta).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn bearing_round_trip(x in 1.0..1e5f64, y in 0.0..1e5f64) {
        let phi = horizontal_angle(&RelativePosition3::new(x, y, 0.0)).unwrap();
        let aa = rssi_2d(Channel::AA, x, y, phi).unwrap();
        let bb = rssi_2d(Channel::BB, x, y, phi).unwrap();
        // acos loses accuracy within ~1e-6 rad of 0 and pi/2
        prop_assume!(phi > 1e-5 && phi < FRAC_PI_2 - 1e-5);
        prop_assert!((recover_phi(aa, bb).unwrap() - phi).abs() < 1e-9);
    }

    #[test]
    fn channel_difference_identity(x in 1.0..1e5f64, y in 1.0..1e5f64, phi in 0.0..FRAC_PI_2) {
        let aa = rssi_2d(Channel::AA, x, y, phi).unwrap();
        let bb = rssi_2d(Channel::BB, x, y, phi).unwrap();
        prop_assert!((aa - bb - 10.0 * (2.0 * phi).cos()).abs() < 1e-12);
    }

    #[test]
    fn rssi_is_non_positive(x in 0.0..2e5f64, y in 1.0..2e5f64, phi in 0.0..FRAC_PI_2) {
        prop_assert!(rssi_2d(Channel::AA, x, y, phi).unwrap() <= 0.0);
        prop_assert!(rssi_2d(Channel::BB, x, y, phi).unwrap() <= 0.0);
    }
}
