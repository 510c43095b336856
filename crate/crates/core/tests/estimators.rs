use metamed::estimators::{bc_estimate, estimate, mln_estimate, mln_log_likelihood, naive_se, qe_estimate};
use metamed::{Distribution, Method, QuantileSummary};
use proptest::prelude::*;

const Z75: f64 = 0.674_489_750_196_081_7;

fn exact(d: &Distribution, scenario: u8, n: usize) -> QuantileSummary {
    let q = |p: f64| d.quantile(p).unwrap();
    let (lo, hi) = (q(1.0 / n as f64), q(1.0 - 1.0 / n as f64));
    match scenario {
        1 => QuantileSummary::s1(lo, q(0.5), hi, n),
        2 => QuantileSummary::s2(q(0.25), q(0.5), q(0.75), n),
        _ => QuantileSummary::s3(lo, q(0.25), q(0.5), q(0.75), hi, n),
    }
    .unwrap()
}

fn skewed_summary() -> impl Strategy<Value = QuantileSummary> {
    (1.0..5.0f64, 0.1..0.6f64, 1u8..=3, 50usize..600).prop_map(|(m, s, sc, n)| {
        exact(&Distribution::lognormal(m, s).unwrap(), sc, n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn bc_and_mln_are_scale_equivariant(s in skewed_summary(), c in 0.01..100.0f64) {
        let scaled = s.map(|x| c * x).unwrap();
        for f in [bc_estimate, mln_estimate] {
            let (a, b) = (f(&s).unwrap(), f(&scaled).unwrap());
            prop_assert!((b.mean - c * a.mean).abs() <= 1e-6 * c * a.mean, "{} vs {}", b.mean, c * a.mean);
            prop_assert!((b.sd - c * a.sd).abs() <= 1e-6 * c * a.sd, "{} vs {}", b.sd, c * a.sd);
        }
    }

    #[test]
    fn qe_recovers_normal_location_and_scale(
        mu in -100.0..100.0f64, sigma in 0.1..30.0f64, sc in 1u8..=3, n in 50usize..2000,
    ) {
        let s = exact(&Distribution::normal(mu, sigma).unwrap(), sc, n);
        let e = qe_estimate(&s).unwrap();
        prop_assert!((e.mean - mu).abs() < 1e-4 * sigma.max(mu.abs()), "mean {} vs {mu}", e.mean);
        prop_assert!((e.sd - sigma).abs() < 1e-4 * sigma, "sd {} vs {sigma}", e.sd);
    }

    #[test]
    fn naive_se_times_root_n_is_the_sd(s in skewed_summary()) {
        for m in [Method::Qe, Method::Bc, Method::Mln] {
            let e = estimate(&s, m).unwrap();
            let n = s.n();
            prop_assert!((naive_se(&e, n) * (n as f64).sqrt() - e.sd).abs() <= 4.0 * f64::EPSILON * e.sd);
        }
    }

    #[test]
    fn mln_lambda_beats_a_41_point_grid(s in skewed_summary()) {
        let e = mln_estimate(&s).unwrap();
        let best = mln_log_likelihood(&s, e.diagnostics.lambda.unwrap()).unwrap();
        for i in 0..41 {
            let l = -3.0 + 6.0 * i as f64 / 40.0;
            if let Ok(v) = mln_log_likelihood(&s, l) {
                prop_assert!(best >= v - 1e-9, "lambda {l}: {v} > {best}");
            }
        }
    }
}

#[test]
fn exact_normal_quartiles_select_normal() {
    let s = QuantileSummary::s2(-Z75, 0.0, Z75, 1000).unwrap();
    let e = qe_estimate(&s).unwrap();
    assert!(e.mean.abs() < 1e-6 && (e.sd - 1.0).abs() < 1e-6);
    assert_eq!(e.fitted.family(), Some(metamed::Family::Normal));
}

#[test]
fn exact_lognormal_quartiles_recover_analytic_moments() {
    let d = Distribution::lognormal(5.0, 0.25).unwrap();
    let (mean, sd) = d.moments();
    assert!((mean - 153.12).abs() < 1e-2);
    let s = exact(&d, 2, 1000);
    let qe = qe_estimate(&s).unwrap();
    assert!((qe.mean - mean).abs() < 1e-3 * mean, "{qe:?}");
    let bc = bc_estimate(&s).unwrap();
    assert!(bc.diagnostics.lambda.unwrap().abs() < 0.05);
    assert!((bc.mean - mean).abs() < 0.02 * mean);
    let mln = mln_estimate(&s).unwrap();
    assert!((mln.mean - mean).abs() < 0.02 * mean);
    assert!((mln.sd - sd).abs() < 0.02 * sd);
}

#[test]
fn symmetric_raw_quartiles_keep_the_identity_transform() {
    let s = QuantileSummary::s2(10.0, 15.0, 20.0, 200).unwrap();
    let e = bc_estimate(&s).unwrap();
    assert!((e.diagnostics.lambda.unwrap() - 1.0).abs() < 0.05);
    let e = mln_estimate(&exact(&Distribution::normal(5.0, 1.0).unwrap(), 2, 250)).unwrap();
    assert!((e.mean - 5.0).abs() < 0.02 && (e.sd - 1.0).abs() < 0.05);
}

#[test]
fn invalid_inputs_are_rejected() {
    let s = QuantileSummary::s2(-1.0, 2.0, 3.0, 40).unwrap();
    assert!(bc_estimate(&s).is_err());
    assert!(mln_estimate(&s).is_err());
    assert!(QuantileSummary::s2(3.0, 2.0, 1.0, 40).is_err());
}
