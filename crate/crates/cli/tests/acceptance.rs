//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr,
//! bypassing the harness capture so the verdicts show up in a plain
//! `cargo test` log, and then asserts the verdict.
//!
//! The Monte Carlo criteria run 50 to 100 replications per design and take
//! minutes to hours depending on the core count.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use common::oracle::{clamped_knots, cox_de_boor, fused_objective, solve_fused_dual, OracleUnit};
use common::random_panel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvgroup::grouping::extract_partition;
use tvgroup::simulation::{
    gen_panel, run_study, CoverageConfig, Dgp, DgpSpec, StudyConfig, StudyReport,
};
use tvgroup::solver::{adaptive_weights, admm_fit, preliminary_ols, PenalizedSystem};
use tvgroup::spline::{build_knots, eval_basis};
use tvgroup::{build_design, fit_lambda, FitConfig, SplineConfig};

const SEED: u64 = 20240601;

/// Criteria run one at a time so the wall-clock limits are not measured
/// under contention from the Monte Carlo criteria.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: &str, pass: bool, detail: &str, elapsed: Duration) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "[acceptance] {verdict} criterion {criterion}: {detail} ({:.1}s)\n",
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn study(spec: DgpSpec, reps: usize, coverage: bool) -> StudyReport {
    let mut config = StudyConfig::new(spec, reps, SEED);
    if coverage {
        config.coverage = Some(CoverageConfig::default());
    }
    run_study(&config).expect("study runs")
}

/// DGP 1 with N = T = 50, shared by the grouping, RMSE and coverage criteria.
fn dgp1_study() -> &'static (StudyReport, Duration) {
    static CELL: OnceLock<(StudyReport, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let r = study(DgpSpec::new(Dgp::Trend, 50, 50), 100, true);
        (r, start.elapsed())
    })
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

#[test]
fn criterion_01_spline_identities() {
    let _serial = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_unity: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut ends_ok = true;
    let mut support_ok = true;
    for (degree, interior) in [(3, 2), (3, 5), (2, 1), (1, 3)] {
        let config = SplineConfig::new(degree, interior).unwrap();
        let knots = build_knots(config).unwrap();
        let k = clamped_knots(degree, interior);
        let m = knots.as_slice().len() - degree - 1;
        for _ in 0..10_000 {
            let v: f64 = rng.random();
            let b = eval_basis(&knots, v).unwrap();
            worst_unity = worst_unity.max((b.values().iter().sum::<f64>() - 1.0).abs());
            for (j, &x) in b.values().iter().enumerate() {
                if (v < k[j] || v >= k[j + degree + 1]) && x != 0.0 {
                    support_ok = false;
                }
                if x < 0.0 {
                    support_ok = false;
                }
            }
        }
        for i in 0..200 {
            let v = i as f64 / 199.0;
            let b = eval_basis(&knots, v).unwrap();
            for (x, r) in b.values().iter().zip(cox_de_boor(&k, degree, v)) {
                worst_oracle = worst_oracle.max((x - r).abs());
            }
        }
        let b0 = eval_basis(&knots, 0.0).unwrap();
        let b1 = eval_basis(&knots, 1.0).unwrap();
        ends_ok &= b0
            .values()
            .iter()
            .enumerate()
            .all(|(j, &x)| x == if j == 0 { 1.0 } else { 0.0 });
        ends_ok &= b1
            .values()
            .iter()
            .enumerate()
            .all(|(j, &x)| x == if j == m - 1 { 1.0 } else { 0.0 });
    }
    let elapsed = start.elapsed();
    let pass = worst_unity <= 1e-12
        && worst_oracle <= 1e-12
        && ends_ok
        && support_ok
        && elapsed.as_secs_f64() < 1.0;
    report(
        "1",
        pass,
        &format!(
            "max |sum b - 1| = {worst_unity:.1e} (<= 1e-12), max gap to recursion {worst_oracle:.1e}, \
             endpoints {ends_ok}, local support {support_ok}, runtime < 1s"
        ),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_02_admm_matches_convex_oracle() {
    let _serial = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut all_converged = true;
    for case in 0..20 {
        let n = rng.random_range(2..=4);
        let t = rng.random_range(10..=15);
        let p = rng.random_range(1..=2);
        let intercept = rng.random::<bool>();
        let lambda = [0.1, 1.0, 10.0][case % 3];
        let panel = random_panel(&mut rng, n, t, p, intercept);
        let design = build_design(&panel, SplineConfig::new(1, 1).unwrap()).unwrap();
        let prelim = preliminary_ols(&design).unwrap();
        let weights = adaptive_weights(&prelim, 2.0);
        let state = admm_fit(
            &design,
            &prelim,
            &weights,
            &FitConfig::default().with_lambda(lambda),
        )
        .unwrap();
        all_converged &= state.converged;

        let units: Vec<OracleUnit> = design
            .units()
            .iter()
            .map(|u| OracleUnit {
                z: u.z.clone(),
                y: u.y.clone(),
            })
            .collect();
        let w = DMatrix::from_fn(n, n, |i, j| if i < j { weights.get(i, j) } else { 0.0 });
        let pi: Vec<DVector<f64>> = (0..n)
            .map(|i| DVector::from_column_slice(state.pi.block(i)))
            .collect();
        let oracle = solve_fused_dual(&units, lambda, &w, 1e-12, 2_000_000);
        worst = worst.max((fused_objective(&units, &pi, lambda, &w) - oracle.primal).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-6 && all_converged && elapsed.as_secs_f64() < 30.0;
    report(
        "2",
        pass,
        &format!("20 instances, max |F_admm - F_oracle| = {worst:.2e} (<= 1e-6), all converged {all_converged}, runtime < 30s"),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_03_lambda_extremes() {
    let _serial = serial();
    let start = Instant::now();
    let tp = gen_panel(&DgpSpec::new(Dgp::Trend, 50, 50), SEED).unwrap();
    let design = build_design(&tp.panel, SplineConfig::new(3, 3).unwrap()).unwrap();
    let prelim = preliminary_ols(&design).unwrap();
    let weights = adaptive_weights(&prelim, 2.0);

    let at_zero = admm_fit(&design, &prelim, &weights, &FitConfig::default()).unwrap();
    let mut worst_ols: f64 = 0.0;
    for (i, u) in design.units().iter().enumerate() {
        let ols = u.z.clone().svd(true, true).solve(&u.y, 1e-14).unwrap();
        for (a, b) in at_zero.pi.block(i).iter().zip(ols.iter()) {
            worst_ols = worst_ols.max((a - b).abs());
        }
    }

    let config = FitConfig::default().with_lambda(1e6);
    let system = PenalizedSystem::new(&design, config.admm_penalty).unwrap();
    let huge = fit_lambda(&design, &system, &prelim, &weights, &config).unwrap();
    let raw_k = extract_partition(
        &admm_fit(&design, &prelim, &weights, &config).unwrap().pi,
        config.tol_group,
    )
    .n_groups();

    let elapsed = start.elapsed();
    let pass =
        worst_ols <= 1e-8 && huge.n_groups() == 1 && raw_k == 1 && elapsed.as_secs_f64() < 10.0;
    report(
        "3",
        pass,
        &format!(
            "lambda=0 max gap to per-unit OLS {worst_ols:.1e} (<= 1e-8); lambda=1e6 K = {} (raw {raw_k}); runtime < 10s",
            huge.n_groups()
        ),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_04_grouping_accuracy() {
    let _serial = serial();
    let (d1, t1) = dgp1_study();
    let start = Instant::now();
    let d2 = study(DgpSpec::new(Dgp::TrendExogenous, 50, 50), 100, false);
    let d3 = study(DgpSpec::new(Dgp::Dynamic, 50, 50), 100, false);
    let elapsed = *t1 + start.elapsed();

    let ok1 = d1.freq_correct_k >= 0.95 && d1.mean_ari >= 0.97;
    let ok2 = within(d2.freq_correct_k, 0.85, 1.0) && within(d2.mean_ari, 0.90, 1.0);
    let ok3 = within(d3.mean_ari, 0.75, 0.92);
    let pass = ok1 && ok2 && ok3;
    report(
        "4",
        pass,
        &format!(
            "DGP1 freq(K=3) {:.3} (>= 0.95), ARI {:.3} (>= 0.97) [{}]; \
             DGP2 freq(K=3) {:.3} (in [0.85, 1]), ARI {:.3} (in [0.90, 1]) [{}]; \
             DGP3 ARI {:.3} (in [0.75, 0.92]) [{}]; 100 reps each",
            d1.freq_correct_k,
            d1.mean_ari,
            verdict(ok1),
            d2.freq_correct_k,
            d2.mean_ari,
            verdict(ok2),
            d3.mean_ari,
            verdict(ok3)
        ),
        elapsed,
    );
    assert!(pass);
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "miss"
    }
}

#[test]
fn criterion_05_estimation_accuracy() {
    let _serial = serial();
    let (r, elapsed) = dgp1_study();
    let (pse, post, oracle) = (r.rmse_pse[0], r.rmse_post[0], r.rmse_oracle[0]);
    let pass = within(post, 0.13, 0.20)
        && within(oracle, 0.13, 0.19)
        && within(pse, 0.22, 0.34)
        && r.share_pse_above_post >= 0.90;
    report(
        "5",
        pass,
        &format!(
            "DGP1 RMSE post {post:.3} (in [0.13, 0.20]), oracle {oracle:.3} (in [0.13, 0.19]), \
             PSE {pse:.3} (in [0.22, 0.34]), PSE > post in {:.2} of reps (>= 0.90)",
            r.share_pse_above_post
        ),
        *elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_06_unbalanced_panels() {
    let _serial = serial();
    let start = Instant::now();
    let mut spec = DgpSpec::new(Dgp::Trend, 50, 100);
    spec.missing_share = 0.3;
    let r = study(spec, 100, false);
    let pass = r.freq_correct_k >= 0.95 && r.freq_exact >= 0.85;
    report(
        "6",
        pass,
        &format!(
            "DGP1 N=50 T=100 30% missing: freq(K=3) {:.3} (>= 0.95), exact grouping {:.3} (>= 0.85)",
            r.freq_correct_k, r.freq_exact
        ),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_07_post_lasso_normal_equations() {
    let _serial = serial();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut fits = 0;
    for (dgp, seed) in [
        (Dgp::Trend, SEED),
        (Dgp::TrendExogenous, SEED + 1),
        (Dgp::Dynamic, SEED + 2),
    ] {
        let spec = DgpSpec::new(dgp, 50, 50);
        let config = StudyConfig::new(spec.clone(), 1, seed);
        let tp = gen_panel(&spec, seed).unwrap();
        let design =
            build_design(&tp.panel, SplineConfig::new(3, config.knots()).unwrap()).unwrap();
        let prelim = preliminary_ols(&design).unwrap();
        let weights = adaptive_weights(&prelim, 2.0);
        let system = PenalizedSystem::new(&design, 1.0).unwrap();
        for lambda in config.grid.values() {
            let fit = fit_lambda(
                &design,
                &system,
                &prelim,
                &weights,
                &FitConfig::default().with_lambda(lambda),
            )
            .unwrap();
            fits += 1;
            for k in 0..fit.n_groups() {
                let mut score = DVector::zeros(design.dim());
                for i in fit.partition.members(k) {
                    score += design.units()[i].z.transpose() * &fit.residuals[i];
                }
                worst = worst.max(score.amax());
            }
        }
    }
    let pass = worst <= 1e-8;
    report(
        "7",
        pass,
        &format!("{fits} fits over the full tuning grids of DGPs 1-3, max |Z_k' e_k| = {worst:.1e} (<= 1e-8)"),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_08_ic_consistency() {
    let _serial = serial();
    let start = Instant::now();
    let r = study(DgpSpec::new(Dgp::Trend, 100, 100), 50, false);
    let pass = r.freq_correct_k >= 0.98;
    report(
        "8",
        pass,
        &format!(
            "DGP1 N=T=100, 50 reps: freq(K=3) {:.3} (>= 0.98)",
            r.freq_correct_k
        ),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_09_thread_count_does_not_change_results() {
    let _serial = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_tvgroup"))
            .args([
                "--threads",
                threads,
                "simulate",
                "--dgp",
                "1",
                "--n",
                "30",
                "--t",
                "30",
                "--reps",
                "8",
                "--seed",
                "7",
                "--coverage",
                "--out",
            ])
            .arg(&out)
            .env_remove("FUSE_TIME_THREADS")
            .status()
            .expect("binary runs");
        assert!(status.success());
        (
            std::fs::read(out.join("report.json")).unwrap(),
            std::fs::read(out.join("replications.csv")).unwrap(),
        )
    };
    let one = run("1");
    let eight = run("8");
    let pass = one == eight;
    report(
        "9",
        pass,
        &format!(
            "simulate --seed 7 report.json ({} bytes) and replications.csv identical with 1 and 8 threads: {pass}",
            one.0.len()
        ),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_10_pointwise_coverage() {
    let _serial = serial();
    let (r, elapsed) = dgp1_study();
    let c = r.coverage.as_ref().expect("coverage requested");
    let pass = c.rate[0] >= 0.80;
    report(
        "10",
        pass,
        &format!(
            "DGP1 90% bands at v=0.5 cover in {:.3} of {} (rep, group) cells (>= 0.80); \
             {} reps evaluated, {} excluded for wrong K; by true group {:?}",
            c.rate[0],
            c.total[0],
            c.evaluated_reps,
            c.excluded_reps,
            c.rate_by_true_group
                .iter()
                .map(|g| (g[0] * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>()
        ),
        *elapsed,
    );
    assert!(pass);
}
