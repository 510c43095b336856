use metamed::{BoxCox, BoxCoxNormal, Distribution, SeedStream};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (-50.0..50.0f64, 0.01..20.0f64).prop_map(|(m, s)| Distribution::normal(m, s).unwrap()),
        (-3.0..6.0f64, 0.05..1.5f64).prop_map(|(m, s)| Distribution::lognormal(m, s).unwrap()),
        (0.3..30.0f64, 0.05..20.0f64).prop_map(|(k, t)| Distribution::gamma(k, t).unwrap()),
        (0.3..20.0f64, 0.3..20.0f64).prop_map(|(a, b)| Distribution::beta(a, b).unwrap()),
        (0.4..10.0f64, 0.1..50.0f64).prop_map(|(k, l)| Distribution::weibull(k, l).unwrap()),
        (0.1..100.0f64).prop_map(|m| Distribution::half_normal(m).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn cdf_inverts_quantile(d in family(), p in 1e-6..(1.0 - 1e-6f64)) {
        let x = d.quantile(p).unwrap();
        prop_assert!((d.cdf(x) - p).abs() < 1e-8, "{:?} p={} x={} cdf={}", d, p, x, d.cdf(x));
    }

    #[test]
    fn quantile_inverts_cdf_in_the_interior(d in family(), p in 0.001..0.999f64) {
        let x = d.quantile(p).unwrap();
        let back = d.quantile(d.cdf(x)).unwrap();
        prop_assert!((back - x).abs() <= 1e-8 * x.abs().max(1e-8), "{:?} x={} back={}", d, x, back);
    }

    #[test]
    fn cdf_is_monotone_with_limits(d in family(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = d.support();
        let (xa, xb) = (d.quantile_unchecked(a.min(b).max(1e-9)), d.quantile_unchecked(a.max(b).min(1.0 - 1e-9)));
        prop_assert!(d.cdf(xa) <= d.cdf(xb));
        prop_assert_eq!(d.cdf(f64::NEG_INFINITY), 0.0);
        prop_assert_eq!(d.cdf(f64::INFINITY), 1.0);
        prop_assert!(d.cdf(lo) <= 1e-12 && d.cdf(hi) >= 1.0 - 1e-12);
    }

    #[test]
    fn moments_are_finite_and_positive_sd(d in family()) {
        let (m, s) = d.moments();
        prop_assert!(m.is_finite() && s.is_finite() && s > 0.0);
    }

    #[test]
    fn box_cox_is_increasing_and_invertible(lambda in -3.0..3.0f64, x in 1e-2..1e2f64, r in 1.0001..3.0f64) {
        let bc = BoxCox::new(lambda);
        let (y1, y2) = (bc.transform(x).unwrap(), bc.transform(x * r).unwrap());
        prop_assert!(y2 > y1);
        prop_assert!((bc.inverse(y1).unwrap() - x).abs() < 1e-9 * x);
    }

    #[test]
    fn box_cox_normal_quantiles_are_positive_and_ordered(
        lambda in -1.0..2.0f64, sigma in 0.05..0.5f64, p in 0.01..0.98f64,
    ) {
        // a normal centred at g_λ(10) keeps most mass inside the range of g_λ
        let mu = BoxCox::new(lambda).transform(10.0).unwrap();
        let d = BoxCoxNormal::new(lambda, mu, sigma * mu.abs().max(1.0) * 0.1).unwrap();
        let (a, b) = (d.quantile(p).unwrap(), d.quantile(p + 0.01).unwrap());
        prop_assert!(a > 0.0 && b > a);
        prop_assert!((d.cdf(a) - p).abs() < 1e-9);
    }
}

#[test]
fn samples_stay_inside_the_support() {
    let mut rng = SeedStream::new(11).rng();
    let cases = [
        Distribution::lognormal(0.0, 1.0).unwrap(),
        Distribution::gamma(0.5, 2.0).unwrap(),
        Distribution::beta(0.5, 0.5).unwrap(),
        Distribution::weibull(0.7, 3.0).unwrap(),
        Distribution::half_normal(10.0).unwrap(),
    ];
    for d in cases {
        let (lo, hi) = d.support();
        let xs = d.sample(2000, &mut rng).unwrap();
        assert!(xs.iter().all(|&x| x >= lo && x <= hi), "{d:?}");
    }
}

#[test]
fn sampling_is_reproducible_from_a_seed() {
    let d = Distribution::gamma(2.0, 3.0).unwrap();
    let a = d.sample(100, &mut SeedStream::new(5).child(2).rng()).unwrap();
    let b = d.sample(100, &mut SeedStream::new(5).child(2).rng()).unwrap();
    let c = d.sample(100, &mut SeedStream::new(5).child(3).rng()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
