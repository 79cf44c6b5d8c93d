//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p eecop-core --test acceptance`. Every criterion is
//! evaluated even when an earlier one fails; the process exits non-zero if any
//! criterion fails.

use std::time::{Duration, Instant};

use eecop_core::bootstrap::{bootstrap_replicate, replicate_rng, run_bootstrap};
use eecop_core::estimator::{estimate_many, estimate_weighted};
use eecop_core::identify::{equation_value, estimate_v, psi_quantile};
use eecop_core::margins::fit_kernel_margin;
use eecop_core::model::pit;
use eecop_core::simulate::{generate, rmse_study, DgpKind, DgpSpec, Functional, RmseStudy, SimEstimator, TruthFn};
use eecop_core::solver::{solve_at, solve_expectile, solve_path_with_weights, solve_quantile};
use eecop_core::{
    CopulaBandwidth, Estimator, ExpFamily, Family, GaussianCopula, MarginBandwidth, MarginModel, MultiplierSpec,
    PolynomialBasis, Sample, SolverConfig, WeightEstimator,
};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Brute-force lower sign-change point of t - W(Y < θ) over the data points.
fn quantile_scan(y: &[f64], w: &[f64], t: f64) -> f64 {
    let total: f64 = w.iter().sum();
    let mut cands = y.to_vec();
    cands.sort_by(f64::total_cmp);
    for &c in &cands {
        let at: f64 = y.iter().zip(w).map(|(&yi, &wi)| wi * psi_quantile(c, t, yi)).sum::<f64>() / total;
        let below_or_at: f64 = y.iter().zip(w).filter(|(&yi, _)| yi <= c).map(|(_, &wi)| wi).sum::<f64>() / total;
        if at >= -1e-12 && t - below_or_at <= 1e-12 {
            return c;
        }
    }
    *cands.last().unwrap()
}

fn c1_solver_oracle() -> Outcome {
    let cfg = SolverConfig::default();
    let mut worst = 0.0_f64;
    let mut mismatches = 0;
    let mut failures = Vec::new();
    for inst in 0..500u64 {
        let mut rng = replicate_rng(1001, inst);
        let n = rng.random_range(10..=200);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..5.0)).collect();
        let gauss: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let t = rng.random_range(0.05..0.95);
        let one = |family: Family, sample: Sample, t: Option<f64>| -> Result<f64, String> {
            let (theta, _) = solve_at(&family, &sample, &w, t, &cfg).map_err(|e| e.to_string())?;
            let r = equation_value(&family, &theta, t, &sample, &w);
            Ok(r.iter().fold(0.0, |a: f64, v| a.max(v.abs())))
        };
        let y = Sample::new(vec![gauss.clone()], vec![]).unwrap();
        let counts: Vec<f64> = (0..n).map(|_| Poisson::new(3.0).unwrap().sample(&mut rng)).collect();
        let bits: Vec<f64> = (0..n).map(|i| if gauss[i] + rng.random_range(-1.0..1.0) > 0.0 { 1.0 } else { 0.0 }).collect();
        let y2: Vec<f64> = (0..n).map(|i| gauss[i] + 0.5 * rng.random::<f64>()).collect();
        let y3: Vec<f64> = (0..n).map(|i| gauss[i] + 0.3 * rng.random::<f64>()).collect();
        let y1: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * y2[i] + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let cases = vec![
            ("mean", one(Family::Mean, y.clone(), None)),
            ("expectile", one(Family::expectile(vec![t]).unwrap(), y.clone(), Some(t))),
            (
                "gaussian",
                one(Family::ExpFam { spec: ExpFamily::Gaussian }, y.clone(), None),
            ),
            (
                "poisson",
                one(Family::ExpFam { spec: ExpFamily::Poisson }, Sample::new(vec![counts.clone()], vec![]).unwrap(), None),
            ),
            (
                "bernoulli",
                one(Family::ExpFam { spec: ExpFamily::Bernoulli }, Sample::new(vec![bits.clone()], vec![]).unwrap(), None),
            ),
            (
                "iv",
                one(
                    Family::IvLinear { basis: PolynomialBasis::new(1) },
                    Sample::new(vec![y1, y2, y3], vec![]).unwrap(),
                    None,
                ),
            ),
        ];
        for (name, r) in cases {
            match r {
                Ok(res) => worst = worst.max(res),
                Err(e) if name == "bernoulli" && bits.iter().all(|&b| b == bits[0]) => drop(e),
                Err(e) => failures.push(format!("{name}#{inst}: {e}")),
            }
        }
        let q = solve_quantile(&gauss, &w, t).unwrap();
        if q != quantile_scan(&gauss, &w, t) {
            mismatches += 1;
        }
    }
    outcome(
        worst <= 1e-9 && mismatches == 0 && failures.is_empty(),
        format!(
            "max |Σwψ|/Σw = {worst:.2e}, quantile scan mismatches = {mismatches}, solver errors = {}{}",
            failures.len(),
            failures.first().map(|f| format!(" ({f})")).unwrap_or_default()
        ),
    )
}

// w_0(y) = φ₂(y, 0; ρ) / {φ(y) φ(0)} with standard normal margins.
fn true_gaussian_weight(y: f64, rho: f64) -> f64 {
    let s2 = 1.0 - rho * rho;
    let joint = (-y * y / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2.sqrt());
    joint / (normal_pdf(y) * normal_pdf(0.0))
}

fn c2_oracle_weight() -> Outcome {
    let rho: f64 = 0.6;
    let reps = 400;
    let cfg = SolverConfig::default();
    let mut maes = Vec::new();
    let mut worst_scaled = 0.0_f64;
    for &n in &[500usize, 2000, 8000] {
        let mut abs_sum = 0.0;
        for r in 0..reps {
            let mut rng = replicate_rng(2002, ((n as u64) << 32) | r);
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                xs.push(a);
                ys.push(rho * a + (1.0 - rho * rho).sqrt() * b);
            }
            let w: Vec<f64> = ys.iter().map(|&y| true_gaussian_weight(y, rho)).collect();
            let sample = Sample::new(vec![ys], vec![xs]).unwrap();
            let est = solve_path_with_weights(&Family::Mean, &sample, &[0.0], &w, None, &cfg).unwrap();
            let theta = est.points[0].theta[0];
            worst_scaled = worst_scaled.max(theta.abs() * (n as f64).sqrt());
            abs_sum += theta.abs();
        }
        maes.push(abs_sum / reps as f64);
    }
    let ratios = [maes[0] / maes[1], maes[1] / maes[2]];
    let pass = worst_scaled <= 4.0 && ratios.iter().all(|r| (1.5..=2.5).contains(r));
    outcome(
        pass,
        format!(
            "max √n|θ̂| = {worst_scaled:.3} (≤ 4), MAE = {:.4}/{:.4}/{:.4}, ratios = {:.3}, {:.3}",
            maes[0], maes[1], maes[2], ratios[0], ratios[1]
        ),
    )
}

fn linear_study(sizes: Vec<usize>, estimators: Vec<SimEstimator>, seed: u64) -> RmseStudy {
    RmseStudy {
        dgp: DgpKind::LinearGaussian,
        p: 3,
        sizes,
        estimators,
        functional: Functional::Mean,
        eval_points: 20,
        reps: 200,
        seed,
    }
}

fn c3_efficiency() -> Outcome {
    let start = Instant::now();
    let rows = rmse_study(&linear_study(vec![1000], vec![SimEstimator::CopulaParametric, SimEstimator::Ols], 3003), None)
        .unwrap();
    let ratio = rows[0].rmse / rows[1].rmse;
    let elapsed = start.elapsed();
    outcome(
        (1.05..=1.60).contains(&ratio) && elapsed < Duration::from_secs(300) && rows.iter().all(|r| r.failures == 0),
        format!(
            "RMSE copula = {:.4}, OLS = {:.4}, ratio = {ratio:.3} (efficiency {:.0}%), {:.1}s",
            rows[0].rmse,
            rows[1].rmse,
            100.0 / (ratio * ratio),
            elapsed.as_secs_f64()
        ),
    )
}

fn c4_rate() -> Outcome {
    let rows = rmse_study(&linear_study(vec![400, 1600], vec![SimEstimator::CopulaParametric], 4004), None).unwrap();
    let ratio = rows[0].rmse / rows[1].rmse;
    outcome(
        (1.7..=2.3).contains(&ratio),
        format!("RMSE(400) = {:.4}, RMSE(1600) = {:.4}, ratio = {ratio:.3}", rows[0].rmse, rows[1].rmse),
    )
}

// Mean absolute error over reps × x1 grid × levels, and the median-path error
// for variance_shift.
fn quantile_recovery(rule: CopulaBandwidth) -> ([f64; 2], f64) {
    let levels = vec![0.1, 0.5, 0.9];
    let family = Family::quantile(levels.clone()).unwrap();
    // deciles of the U(-1, 1) covariate law
    let points: Vec<Vec<f64>> = (0..9).map(|k| vec![-0.8 + 0.2 * k as f64, 0.0, 0.0]).collect();
    let reps = 20;
    let estimator = Estimator::new(WeightEstimator::Kernel { margin: MarginBandwidth::NormalReference, copula: rule });
    let mut mae = [0.0; 2];
    let mut median_path = Vec::new();
    for (k, kind) in [DgpKind::MeanShift, DgpKind::VarianceShift].into_iter().enumerate() {
        let truth = TruthFn { kind };
        let mut total = 0.0;
        for rep in 0..reps {
            let sample = generate(&DgpSpec { kind, n: 1000, p: 3, seed: 5005 + rep }).unwrap();
            let fits = estimate_many(&sample, &points, &family, &estimator).unwrap();
            for (x, fit) in points.iter().zip(&fits) {
                for (p, &t) in fit.points.iter().zip(&levels) {
                    let err = (p.theta[0] - truth.quantile(x, t)).abs();
                    total += err;
                    if kind == DgpKind::VarianceShift && t == 0.5 {
                        median_path.push(err);
                    }
                }
            }
        }
        mae[k] = total / (reps as f64 * points.len() as f64 * levels.len() as f64);
    }
    (mae, median_path.iter().sum::<f64>() / median_path.len() as f64)
}

// Judged with the covariance-scaled bandwidth used in the simulation design;
// the scalar-rate rule is reported alongside.
fn c5_quantile_truth() -> Outcome {
    let (mae, median_err) = quantile_recovery(CopulaBandwidth::ScaledDiagonal);
    let (alt, alt_median) = quantile_recovery(CopulaBandwidth::PaperRate);
    outcome(
        mae[0] <= 0.25 && mae[1] <= 0.35 && median_err <= 0.15,
        format!(
            "MAE mean_shift = {:.3} (≤ 0.25), variance_shift = {:.3} (≤ 0.35), median path = {median_err:.3} (≤ 0.15); \
             scalar-rate bandwidth: {:.3} / {:.3} / {alt_median:.3}",
            mae[0], mae[1], alt[0], alt[1]
        ),
    )
}

fn c6_coverage() -> Outcome {
    let start = Instant::now();
    let x0 = [0.5, 0.25];
    let truth = 0.75;
    let runs = 200;
    let mut covered = 0;
    let mut failed = 0;
    for run in 0..runs {
        let sample = generate(&DgpSpec { kind: DgpKind::LinearGaussian, n: 500, p: 2, seed: 6006 + run }).unwrap();
        let spec = MultiplierSpec::exponential(200, 60_000 + run).unwrap();
        match run_bootstrap(&sample, &x0, &Family::Mean, &Estimator::default(), &spec, 0.10, None) {
            Ok(res) => {
                let b = res.bands.unwrap();
                if b.pointwise_lower[0] <= truth && truth <= b.pointwise_upper[0] {
                    covered += 1;
                }
            }
            Err(_) => failed += 1,
        }
    }
    let coverage = covered as f64 / runs as f64;
    let elapsed = start.elapsed();
    outcome(
        (0.82..=0.96).contains(&coverage) && failed == 0 && elapsed < Duration::from_secs(600),
        format!("coverage = {coverage:.3} over {runs} runs, {failed} failed, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn c7_properties() -> Outcome {
    let mut broken: Vec<&str> = Vec::new();
    let cfg = SolverConfig::default();
    let mut rng = replicate_rng(7007, 0);
    let y: Vec<f64> = (0..150).map(|_| StandardNormal.sample(&mut rng)).collect();
    let w: Vec<f64> = (0..150).map(|_| rng.random_range(0.1..3.0)).collect();
    let sample = Sample::new(vec![y.clone()], vec![]).unwrap();

    // scale-freeness
    let scaled: Vec<f64> = w.iter().map(|v| v * 37.5).collect();
    let families = [
        (Family::Mean, None),
        (Family::quantile(vec![0.3]).unwrap(), Some(0.3)),
        (Family::expectile(vec![0.8]).unwrap(), Some(0.8)),
        (Family::ExpFam { spec: ExpFamily::Gaussian }, None),
    ];
    for (f, t) in &families {
        let a = solve_at(f, &sample, &w, *t, &cfg).unwrap().0[0];
        let b = solve_at(f, &sample, &scaled, *t, &cfg).unwrap().0[0];
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            broken.push("scale-freeness");
        }
    }

    // path monotonicity
    let grid: Vec<f64> = (1..20).map(|k| k as f64 / 20.0).collect();
    let q: Vec<f64> = grid.iter().map(|&t| solve_quantile(&y, &w, t).unwrap()).collect();
    let e: Vec<f64> = grid.iter().map(|&t| solve_expectile(&y, &w, t, &cfg).unwrap().value).collect();
    if q.windows(2).any(|p| p[1] < p[0]) || e.windows(2).any(|p| p[1] < p[0]) {
        broken.push("path monotonicity");
    }

    // m ≡ 1 identity
    let data = generate(&DgpSpec { kind: DgpKind::MeanShift, n: 200, p: 2, seed: 71 }).unwrap();
    let ones = vec![1.0; 200];
    let qfam = Family::quantile(vec![0.25, 0.5, 0.75]).unwrap();
    for est in [
        Estimator::default(),
        Estimator::new(WeightEstimator::Kernel { margin: MarginBandwidth::NormalReference, copula: CopulaBandwidth::PaperRate }),
    ] {
        let point = estimate_weighted(&data, &[0.1, -0.2], &qfam, &est, None).unwrap().flat_theta();
        let rep = bootstrap_replicate(&data, &[0.1, -0.2], &qfam, &est, &ones).unwrap();
        if point.iter().zip(&rep).any(|(a, b)| a.to_bits() != b.to_bits()) {
            broken.push("m ≡ 1 identity");
        }
    }

    // independence copula
    let ind = GaussianCopula::independence(3);
    if [[0.1, 0.5, 0.9], [0.01, 0.99, 0.3]].iter().any(|u| ind.density(u) != 1.0) {
        broken.push("independence copula density");
    }

    // kernel CDF
    let km = fit_kernel_margin(&y, MarginBandwidth::NormalReference, None).unwrap();
    let pts: Vec<f64> = (0..=400).map(|k| -8.0 + 0.04 * k as f64).collect();
    let cdf: Vec<f64> = pts.iter().map(|&p| km.cdf(p)).collect();
    if cdf.windows(2).any(|p| p[1] < p[0]) || cdf[0] > 1e-12 || (1.0 - cdf[400]) > 1e-12 {
        broken.push("kernel CDF");
    }

    // expectile V by central differences
    let t = 0.7;
    let fam = Family::expectile(vec![t]).unwrap();
    let theta = solve_expectile(&y, &w, t, &cfg).unwrap().value;
    let h = 1e-6;
    let fd = (equation_value(&fam, &[theta + h], Some(t), &sample, &w)[0]
        - equation_value(&fam, &[theta - h], Some(t), &sample, &w)[0])
        / (2.0 * h);
    let v = estimate_v(&fam, &[theta], Some(t), &sample, &w).unwrap().v[0];
    if ((v - fd) / fd).abs() > 1e-3 {
        broken.push("expectile V");
    }

    // PIT under Y ↦ aY + b
    let moved: Vec<f64> = y.iter().map(|v| 2.5 * v - 4.0).collect();
    let fit = |z: &[f64]| {
        let s = Sample::new(vec![z.to_vec()], vec![]).unwrap();
        let m = MarginModel::Gaussian(eecop_core::margins::fit_gaussian_margin(z, None).unwrap());
        pit(&s, &[m]).unwrap().column(0).to_vec()
    };
    if fit(&y).iter().zip(fit(&moved)).any(|(a, b)| (a - b).abs() > 1e-12) {
        broken.push("PIT affine invariance");
    }

    // thread-count determinism
    let spec = MultiplierSpec::exponential(40, 9).unwrap();
    let a = run_bootstrap(&data, &[0.0, 0.0], &qfam, &Estimator::default(), &spec, 0.1, Some(1)).unwrap();
    let b = run_bootstrap(&data, &[0.0, 0.0], &qfam, &Estimator::default(), &spec, 0.1, Some(4)).unwrap();
    let st = RmseStudy { reps: 8, ..linear_study(vec![100], vec![SimEstimator::CopulaParametric], 77) };
    if a != b || rmse_study(&st, Some(1)).unwrap() != rmse_study(&st, Some(3)).unwrap() {
        broken.push("thread-count determinism");
    }

    broken.dedup();
    outcome(
        broken.is_empty(),
        if broken.is_empty() {
            "scale-freeness, monotone paths, m ≡ 1 identity, independence density, kernel CDF, expectile V, PIT, determinism".into()
        } else {
            format!("broken: {}", broken.join(", "))
        },
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);
    let criteria: Vec<Criterion> = vec![
        ("C1 solver-oracle equivalence", c1_solver_oracle, Some(Duration::from_secs(30))),
        ("C2 oracle-weight consistency", c2_oracle_weight, None),
        ("C3 parametric efficiency vs OLS", c3_efficiency, None),
        ("C4 root-n rate", c4_rate, None),
        ("C5 quantile-truth recovery", c5_quantile_truth, None),
        ("C6 bootstrap coverage", c6_coverage, None),
        ("C7 property suites", c7_properties, None),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, run, limit) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let mut out = run();
        let elapsed = start.elapsed();
        if limit.is_some_and(|l| elapsed > l) {
            out.pass = false;
            out.detail.push_str(" [over time limit]");
        }
        println!(
            "{} {name}: {} ({:.1}s)",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
        failed += usize::from(!out.pass);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
