use proptest::prelude::*;

use mpcorr_core::expsums::{KWindows, NWindows, DEFAULT_EPS};
use mpcorr_core::linalg::Mat;
use mpcorr_core::math::circ_dist;
use mpcorr_core::oscillatory::{vandermonde, vandermonde_inverse};
use mpcorr_core::partitions::{enumerate, Partition};
use mpcorr_core::seqcore::{Precision, SequenceSpec};
use mpcorr_core::testfn::{CorrKernel, TestFunction};

thread_local! {
    static BUMP: TestFunction = TestFunction::bump(1.0).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn x_lies_in_unit_interval(alpha in 0.01f64..50.0, theta in 0.01f64..0.99, n in 1u64..100_000_000) {
        for p in [Precision::Standard, Precision::Compensated] {
            let s = SequenceSpec::with_precision(alpha, theta, p).unwrap();
            let x = s.x_mod1(n);
            prop_assert!((0.0..1.0).contains(&x));
            prop_assert!(circ_dist(x) <= 0.5);
        }
    }

    #[test]
    fn y_increases(alpha in 0.01f64..50.0, theta in 0.01f64..0.99, n in 1u64..10_000_000) {
        let s = SequenceSpec::with_precision(alpha, theta, Precision::Compensated).unwrap();
        let a = s.y_dd(n);
        let b = s.y_dd(n + 1);
        prop_assert!((b - a).to_f64() > 0.0);
    }

    #[test]
    fn phase_routes_agree_within_bounds(alpha in 0.1f64..5.0, theta in 0.02f64..0.98, n in 1u64..10_000_000, k in -10_000_000i64..10_000_000) {
        let a = SequenceSpec::with_precision(alpha, theta, Precision::Standard).unwrap().phase_mod1(k, n).unwrap();
        let b = SequenceSpec::with_precision(alpha, theta, Precision::Compensated).unwrap().phase_mod1(k, n).unwrap();
        prop_assert!((0.0..1.0).contains(&a.value_mod1));
        prop_assert!((0.0..1.0).contains(&b.value_mod1));
        prop_assert!(circ_dist(a.value_mod1 - b.value_mod1) <= a.abs_error_bound + b.abs_error_bound);
        prop_assert!(b.abs_error_bound < 2f64.powi(-30));
    }

    #[test]
    fn phase_is_odd_in_k(theta in 0.02f64..0.98, n in 1u64..1_000_000, k in 1i64..1_000_000) {
        let s = SequenceSpec::with_precision(1.0, theta, Precision::Compensated).unwrap();
        let a = s.phase_mod1(k, n).unwrap();
        let b = s.phase_mod1(-k, n).unwrap();
        prop_assert!(circ_dist(a.value_mod1 + b.value_mod1) <= a.abs_error_bound + b.abs_error_bound);
    }

    #[test]
    fn test_functions_are_even(r in 0.1f64..10.0, x in -20.0f64..20.0, xi in -30.0f64..30.0) {
        let bump = BUMP.with(|b| b.with_radius(r).unwrap());
        for f in [TestFunction::bspline(r).unwrap(), bump] {
            prop_assert_eq!(f.eval(x), f.eval(-x));
            prop_assert!(f.eval(x) >= 0.0);
            if x.abs() >= r {
                prop_assert_eq!(f.eval(x), 0.0);
            }
            prop_assert!((f.fourier(xi) - f.fourier(-xi)).abs() <= 1e-14);
            prop_assert!(f.fourier(xi).abs() <= f.fourier(0.0) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn kernel_vanishes_off_support(r in 0.2f64..3.0, z1 in -8.0f64..8.0, z2 in -8.0f64..8.0) {
        let f = TestFunction::bspline(r).unwrap();
        let k = CorrKernel::new(&f, 3).unwrap();
        let v = k.eval(&[z1, z2]);
        prop_assert!(v >= 0.0);
        if z2.abs() >= 2.0 * r || (z1 + z2).abs() >= 2.0 * r || z1.abs() >= 2.0 * r {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn one_partition_per_vector(n in proptest::collection::vec(0i64..4, 1..=6)) {
        let all = enumerate(n.len()).unwrap();
        let hits: Vec<&Partition> = all.iter().filter(|p| p.chi_distinct(&n)).collect();
        prop_assert_eq!(hits.len(), 1);
        // and the hit is the partition into level sets of n
        for i in 0..n.len() {
            for j in 0..n.len() {
                prop_assert_eq!(hits[0].labels()[i] == hits[0].labels()[j], n[i] == n[j]);
            }
        }
    }

    #[test]
    fn vandermonde_inverse_is_inverse(tau in proptest::collection::vec(0.3f64..3.0, 1..=5)) {
        let mut sorted = tau.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 0.05));
        let v = vandermonde(&tau);
        let inv = vandermonde_inverse(&tau).unwrap();
        let prod = inv.mul(&v);
        let id = Mat::identity(tau.len());
        let mut worst: f64 = 0.0;
        for i in 0..tau.len() {
            for j in 0..tau.len() {
                worst = worst.max((prod[(i, j)] - id[(i, j)]).abs());
            }
        }
        let scale = inv.max_abs() * v.max_abs() * tau.len() as f64;
        prop_assert!(worst <= 1e-12 * scale.max(1.0), "worst {}", worst);
    }

    #[test]
    fn windows_partition_unity(n in 1000u64..1_000_000, u in 0.0f64..1.0) {
        let nw = NWindows::new(n).unwrap();
        let x = 1.0 + u * (n as f64 - 1.0);
        prop_assert!((nw.total(x) - 1.0).abs() < 1e-12);
        let kw = KWindows::new(n, DEFAULT_EPS).unwrap();
        let k = (u * kw.covered_up_to().ln()).exp();
        prop_assert!((kw.total(k) - 1.0).abs() < 1e-12);
        prop_assert_eq!(kw.total(k), kw.total(-k));
    }
}
