//! Acceptance checks, one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use metamed::estimators::{bc_estimate, mln_estimate, qe_estimate};
use metamed::meta::{i_squared, pool, q_gen, reml_log_likelihood, reml_tau2, tau2_ci_qprofile, wald_ci_mu};
use metamed::{BootstrapConfig, Distribution, Method, QuantileSummary, Scenario, SeKind, SeedStream, StudyInput};
use metamed_cli::analysis::{analyze, RunConfig};
use metamed_cli::args::Format;
use metamed_cli::data::{pair_groups, read_records};
use metamed_sim::{run_meta_cell, run_study_cell, MetaMetrics, MetaSimConfig, SimCellResult, StudyMetrics, StudySimConfig};
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn study(r: &SimCellResult, m: Method, k: SeKind) -> &StudyMetrics {
    r.study.iter().find(|s| s.method == m && s.se_kind == k).expect("metric present")
}

fn meta(r: &SimCellResult, m: Method, k: SeKind) -> &MetaMetrics {
    r.meta.iter().find(|s| s.method == m && s.se_kind == k).expect("metric present")
}

fn study_cell(dist: Distribution, scenario: Scenario, methods: Vec<Method>, b: Option<usize>, seed: u64) -> SimCellResult {
    let cfg = StudySimConfig {
        dist,
        n: 1000,
        scenario,
        reps: 200,
        oracle_reps: 10_000,
        methods,
        bootstrap: b.map(|b| BootstrapConfig::new(b, 0)),
        seed,
    };
    run_study_cell(&cfg).expect("study cell runs")
}

fn meta_cell(p: f64, scenario: Scenario, methods: Vec<Method>, bootstrap: bool, seed: u64) -> SimCellResult {
    let mut cfg = MetaSimConfig::desk(30, p, scenario, methods, seed);
    if !bootstrap {
        cfg.bootstrap = None;
    }
    run_meta_cell(&cfg).expect("meta cell runs")
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

struct Cells {
    ln25: SimCellResult,
    meta_p1: SimCellResult,
    meta_p0: SimCellResult,
}

fn criterion_1(c: &Cells) -> Check {
    let sd = Distribution::lognormal(5.0, 0.25).unwrap().moments().1;
    let target = sd / 1000f64.sqrt();
    let mut ok = within(target, 1.2, 0.05);
    let mut parts = vec![format!("sigma/sqrt(n) = {target:.3}")];
    for m in [Method::Qe, Method::Bc, Method::Mln] {
        let s = study(&c.ln25, m, SeKind::Naive);
        ok &= s.median_pct_err < 0.0 && s.true_se > 1.2;
        parts.push(format!("{m}: naive {:+.1}%, true SE {:.3}", s.median_pct_err, s.true_se));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_2(c: &Cells) -> Check {
    let qe = study(&c.ln25, Method::Qe, SeKind::Naive).median_pct_err;
    let r = study_cell(Distribution::lognormal(5.0, 1.0).unwrap(), Scenario::S1, vec![Method::Mln], Some(200), 12);
    let naive = study(&r, Method::Mln, SeKind::Naive).median_pct_err;
    let boot = study(&r, Method::Mln, SeKind::Bootstrap).median_pct_err;
    verdict(
        within(qe, -65.0, 8.0) && within(naive, -54.0, 8.0) && within(boot, 3.0, 8.0),
        format!("QE naive {qe:+.1}% (-65 +/- 8); MLN naive {naive:+.1}% (-54 +/- 8); MLN bootstrap {boot:+.1}% (3 +/- 8)"),
    )
}

fn criterion_3() -> Check {
    let r = study_cell(Distribution::normal(5.0, 1.0).unwrap(), Scenario::S3, vec![Method::Mln], Some(200), 13);
    let naive = study(&r, Method::Mln, SeKind::Naive).median_pct_err;
    let boot = study(&r, Method::Mln, SeKind::Bootstrap).median_pct_err;
    verdict(
        within(naive, -16.0, 6.0) && within(boot, 0.0, 6.0),
        format!("MLN naive {naive:+.1}% (-16 +/- 6); bootstrap {boot:+.1}% (0 +/- 6)"),
    )
}

fn criterion_4(c: &Cells) -> Check {
    let n = meta(&c.meta_p1, Method::Qe, SeKind::Naive);
    let b = meta(&c.meta_p1, Method::Qe, SeKind::Bootstrap);
    let ok = (10.0..=20.0).contains(&n.tau2_bias)
        && (-4.0..=2.0).contains(&b.tau2_bias)
        && n.tau2_coverage < 0.35
        && (0.90..=0.98).contains(&b.tau2_coverage);
    verdict(
        ok,
        format!(
            "naive tau2 bias {:+.2}, coverage {:.3}; bootstrap tau2 bias {:+.2}, coverage {:.3}",
            n.tau2_bias, n.tau2_coverage, b.tau2_bias, b.tau2_coverage
        ),
    )
}

fn criterion_5(c: &Cells) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in &c.meta_p0.meta {
        ok &= m.tau2_bias.abs() <= 0.5 && (0.91..=0.98).contains(&m.tau2_coverage);
        parts.push(format!("{} {}: bias {:+.3}, coverage {:.3}", m.method, m.se_kind, m.tau2_bias, m.tau2_coverage));
    }
    parts.dedup_by(|a, b| a.split(':').nth(1) == b.split(':').nth(1));
    verdict(ok, parts.join("; "))
}

fn criterion_6(c: &Cells) -> Check {
    let mut cells = vec![&c.meta_p1];
    let extra: Vec<SimCellResult> = [(0.5, Scenario::S1), (0.5, Scenario::S2), (1.0, Scenario::S2), (1.0, Scenario::S3)]
        .into_iter()
        .enumerate()
        .map(|(i, (p, s))| meta_cell(p, s, vec![Method::Qe, Method::Bc, Method::Mln], false, 60 + i as u64))
        .collect();
    cells.extend(extra.iter());
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for cell in cells {
        for m in cell.meta.iter().filter(|m| m.se_kind == SeKind::Naive) {
            worst = worst.min(m.tau2_bias);
            count += 1;
        }
    }
    verdict(worst > 0.0, format!("smallest naive tau2 bias {worst:+.2} over {count} method-cell pairs"))
}

fn random_studies(seed: u64) -> Vec<StudyInput> {
    let stream = SeedStream::new(seed);
    let k = 3 + (seed % 27) as usize;
    let tau = 0.05 * (seed % 30) as f64;
    let z = Distribution::normal(0.0, 1.0).unwrap().sample(2 * k, &mut stream.child(0).rng()).unwrap();
    let se = Distribution::lognormal(-0.7, 0.6).unwrap().sample(k, &mut stream.child(1).rng()).unwrap();
    (0..k).map(|i| StudyInput::new(tau * z[i] + se[i] * z[k + i], se[i], format!("s{i}")).unwrap()).collect()
}

fn grid_reml(s: &[StudyInput]) -> f64 {
    let hi = s.iter().map(|x| x.y * x.y + x.se * x.se).sum::<f64>() * 4.0;
    let m = 20_000;
    let ll = |t: f64| reml_log_likelihood(s, t);
    let best = (0..=m).map(|i| hi * i as f64 / m as f64).max_by(|a, b| ll(*a).total_cmp(&ll(*b))).unwrap();
    let (mut a, mut b) = ((best - hi / m as f64).max(0.0), best + hi / m as f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if ll(c) >= ll(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn criterion_7() -> Check {
    let (mut pool_err, mut reml_err, mut q_err) = (0f64, 0f64, 0f64);
    for seed in 0..50 {
        let s = random_studies(seed);
        let tau2 = 0.3 * (seed % 4) as f64;
        let (mu, se) = pool(&s, tau2).unwrap();
        let w: Vec<f64> = s.iter().map(|x| 1.0 / (x.se * x.se + tau2)).collect();
        let sw: f64 = w.iter().sum();
        let mu_ref = s.iter().zip(&w).map(|(x, w)| w * x.y).sum::<f64>() / sw;
        let v: Vec<f64> = s.iter().map(|x| 1.0 / (x.se * x.se)).collect();
        let (a, b): (f64, f64) = (v.iter().sum(), v.iter().map(|x| x * x).sum());
        let typical = (s.len() - 1) as f64 * a / (a * a - b);
        let i2_ref = if tau2 > 0.0 { tau2 / (tau2 + typical) } else { 0.0 };
        let (lo, hi) = wald_ci_mu(mu, se, 0.95);
        let z = 1.959_963_984_540_054;
        pool_err = pool_err
            .max((mu - mu_ref).abs() / mu_ref.abs().max(1.0))
            .max((se - 1.0 / sw.sqrt()).abs() / se)
            .max((i_squared(&s, tau2).unwrap() - i2_ref).abs())
            .max((lo - (mu - z * se)).abs().max((hi - (mu + z * se)).abs()) / se.max(1.0));

        reml_err = reml_err.max((reml_tau2(&s).unwrap() - grid_reml(&s)).abs());

        let ci = tau2_ci_qprofile(&s, 0.95).unwrap();
        let chi = ChiSquared::new((s.len() - 1) as f64).unwrap();
        let (upper, lower) = (chi.inverse_cdf(0.975), chi.inverse_cdf(0.025));
        if !ci.degenerate {
            if ci.lo > 0.0 {
                q_err = q_err.max((q_gen(&s, ci.lo) - upper).abs() / upper);
            }
            q_err = q_err.max((q_gen(&s, ci.hi) - lower).abs() / lower.max(1.0));
        }
    }
    verdict(
        pool_err < 1e-10 && reml_err < 1e-4 && q_err < 1e-6,
        format!("pool/I2/Wald max err {pool_err:.1e}; REML vs grid {reml_err:.1e}; Q-profile {q_err:.1e}"),
    )
}

fn criterion_8() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    let n = 1000;
    for (name, d, lambda) in [
        ("Normal(5,1)", Distribution::normal(5.0, 1.0).unwrap(), 1.0),
        ("LogNormal(5,0.25)", Distribution::lognormal(5.0, 0.25).unwrap(), 0.0),
    ] {
        let q = |p: f64| d.quantile(p).unwrap();
        let s2 = QuantileSummary::s2(q(0.25), q(0.5), q(0.75), n).unwrap();
        let (mean, sd) = d.moments();
        let qe = qe_estimate(&s2).unwrap();
        let qe_err = ((qe.mean - mean) / mean).abs().max(((qe.sd - sd) / sd).abs());
        let l = bc_estimate(&s2).unwrap().diagnostics.lambda.unwrap();
        ok &= qe_err < 1e-3 && (l - lambda).abs() < 0.05;
        parts.push(format!("{name}: QE rel err {qe_err:.1e}, BC lambda {l:.3}"));
        if lambda == 0.0 {
            let m = mln_estimate(&s2).unwrap();
            let err = ((m.mean - mean) / mean).abs().max(((m.sd - sd) / sd).abs());
            ok &= err < 0.02;
            parts.push(format!("MLN rel err {:.2}%", 100.0 * err));
        }
    }
    verdict(ok, parts.join("; "))
}

fn criterion_9() -> Check {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("il6_synthetic.csv");
    let pairs = pair_groups(&read_records(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut i2 = Vec::new();
    for se in [SeKind::Naive, SeKind::Bootstrap] {
        let cfg = RunConfig {
            method: Method::Qe,
            se,
            b: 1000,
            seed: 1,
            min_n: 10,
            skew_cap: 0.75,
            min_studies: 6,
            level: 0.95,
            format: Format::Markdown,
        };
        let report = analyze(&pairs, &cfg, "il6_synthetic.csv").map_err(|e| e.to_string())?;
        i2.push(100.0 * report.outcomes.first().ok_or("no pooled outcome")?.i2);
    }
    verdict(i2[0] > 95.0 && i2[1] < 60.0, format!("QE naive I2 {:.2}%; bootstrap I2 {:.2}%", i2[0], i2[1]))
}

fn main() -> ExitCode {
    metamed_sim::configure_threads();
    let start = Instant::now();
    let cells = Cells {
        ln25: study_cell(
            Distribution::lognormal(5.0, 0.25).unwrap(),
            Scenario::S1,
            vec![Method::Qe, Method::Bc, Method::Mln],
            None,
            11,
        ),
        meta_p1: meta_cell(1.0, Scenario::S1, vec![Method::Qe], true, 41),
        meta_p0: meta_cell(0.0, Scenario::S1, vec![Method::Qe], true, 51),
    };
    let checks: [Criterion; 9] = [
        ("illustrative example", Box::new(|| criterion_1(&cells))),
        ("study-level spot rows", Box::new(|| criterion_2(&cells))),
        ("normal S3 spot row", Box::new(criterion_3)),
        ("median-reporting meta cell", Box::new(|| criterion_4(&cells))),
        ("control meta cell", Box::new(|| criterion_5(&cells))),
        ("naive tau2 bias sign", Box::new(|| criterion_6(&cells))),
        ("meta oracle suite", Box::new(criterion_7)),
        ("exact-quantile recovery", Box::new(criterion_8)),
        ("IL-6 shaped data set", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(d) => println!("PASS {} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {} {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 9 passed in {:.0?}", 9 - failed, start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
