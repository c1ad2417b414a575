//! Checks of the test oracles themselves.

mod common;

use driven_pp::model::{Driver, EventSequence};

#[test]
fn kolmogorov_sf_matches_scipy() {
    // scipy.stats.kstwobign.sf
    for (x, expected) in [
        (0.5, 0.963_945_243_664_875_1),
        (1.0, 0.269_999_671_677_354_56),
        (1.3581, 0.049_999_630_431_667_4),
        (2.0, 0.000_670_925_255_779_695_3),
    ] {
        assert!((common::kolmogorov_sf(x) - expected).abs() < 1e-12, "{x}");
    }
}

#[test]
fn ks_statistic_matches_scipy() {
    // scipy.stats.kstest(x, 'expon', args=(0, 1 / 0.8)).statistic
    let x = [0.1, 0.5, 0.9, 1.3, 2.2, 0.05, 3.1, 0.7];
    assert!((common::ks_statistic_exponential(&x, 0.8) - 0.173_116_346_386_635_76).abs() < 1e-14);
}

#[test]
fn baseline_clock_collapses_windows() {
    let ev = EventSequence::new(vec![0.5, 1.5, 3.0, 4.5], 6.0).unwrap();
    let d = Driver::new("d", vec![1.0]).unwrap();
    // Window [1, 3] is removed: 0.5 -> 0.5, 4.5 -> 2.5; 1.5 and 3.0 are covered.
    assert_eq!(common::baseline_gaps(&ev, &[d], 0.0, 2.0), vec![2.0]);
}

#[test]
fn quadrature_self_check() {
    let v = common::quad::integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
    assert!((v - 2.0).abs() < 1e-12);
}

#[test]
fn quadrature_is_exact_on_smooth_and_piecewise_integrands() {
    use common::quad::{integrate, integrate_piecewise};
    assert!((integrate(|x| x.powi(7), 0.0, 2.0, 1e-14) - 32.0).abs() < 1e-12);
    let e = integrate(f64::exp, 0.0, 1.0, 1e-14);
    assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    let step = integrate_piecewise(|x| if x < 0.3 { 1.0 } else { 2.0 }, 0.0, 1.0, &[0.3], 1e-14);
    assert!((step - 1.7).abs() < 1e-13);
}
