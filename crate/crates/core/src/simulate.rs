//! Simulation designs, baseline estimators and the RMSE harness.
//!
//! All randomness comes from ChaCha8 streams keyed by (seed, n, replicate),
//! so results are platform-stable and independent of the thread count.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::replicate_rng;
use crate::copula::CopulaBandwidth;
use crate::error::{Error, Result};
use crate::estimator::estimate_from_model;
use crate::identify::{condition_number, Family, MAX_CONDITION};
use crate::margins::{weighted_mean_sd, MarginBandwidth};
use crate::model::Sample;
use crate::normal;
use crate::solver::{solve_mean, solve_quantile, SolverConfig};
use crate::weights::{fit_weight_model, WeightEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    /// X ~ N(0, I_p), Y = Σ_j X_j + Z
    LinearGaussian,
    /// X ~ U(-1, 1)^p, Y = exp(X_1) + Z
    MeanShift,
    /// X ~ U(-1, 1)^p, Y = (1 + exp(X_1)) Z
    VarianceShift,
}

impl DgpKind {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "linear_gaussian" => Some(Self::LinearGaussian),
            "mean_shift" => Some(Self::MeanShift),
            "variance_shift" => Some(Self::VarianceShift),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

/// One covariate vector from the design's covariate law.
pub fn draw_covariate<R: Rng>(kind: DgpKind, p: usize, rng: &mut R) -> Vec<f64> {
    (0..p)
        .map(|_| match kind {
            DgpKind::LinearGaussian => StandardNormal.sample(rng),
            DgpKind::MeanShift | DgpKind::VarianceShift => rng.random_range(-1.0..1.0),
        })
        .collect()
}

pub fn generate_with_rng<R: Rng>(kind: DgpKind, n: usize, p: usize, rng: &mut R) -> Result<Sample> {
    if n < 10 || p < 1 {
        return Err(Error::InvalidArgument(format!("simulation needs n ≥ 10 and p ≥ 1, got n={n}, p={p}")));
    }
    let mut covariates = vec![Vec::with_capacity(n); p];
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x = draw_covariate(kind, p, rng);
        let z: f64 = StandardNormal.sample(rng);
        y.push(match kind {
            DgpKind::LinearGaussian => x.iter().sum::<f64>() + z,
            DgpKind::MeanShift => x[0].exp() + z,
            DgpKind::VarianceShift => (1.0 + x[0].exp()) * z,
        });
        for (col, v) in covariates.iter_mut().zip(x) {
            col.push(v);
        }
    }
    Sample::new(vec![y], covariates)
}

/// Deterministic draw from the design.
pub fn generate(spec: &DgpSpec) -> Result<Sample> {
    generate_with_rng(spec.kind, spec.n, spec.p, &mut replicate_rng(spec.seed, 0))
}

/// Conditional functional targeted by a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Mean,
    Quantile(f64),
}

impl Functional {
    pub fn level(&self) -> Option<f64> {
        match self {
            Functional::Mean => None,
            Functional::Quantile(t) => Some(*t),
        }
    }

    pub fn family(&self) -> Result<Family> {
        match self {
            Functional::Mean => Ok(Family::Mean),
            Functional::Quantile(t) => Family::quantile(vec![*t]),
        }
    }
}

/// Closed-form conditional functionals of each design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthFn {
    pub kind: DgpKind,
}

impl TruthFn {
    pub fn mean(&self, x: &[f64]) -> f64 {
        match self.kind {
            DgpKind::LinearGaussian => x.iter().sum(),
            DgpKind::MeanShift => x[0].exp(),
            DgpKind::VarianceShift => 0.0,
        }
    }

    pub fn quantile(&self, x: &[f64], t: f64) -> f64 {
        let z = normal::quantile(t);
        match self.kind {
            DgpKind::LinearGaussian => x.iter().sum::<f64>() + z,
            DgpKind::MeanShift => x[0].exp() + z,
            DgpKind::VarianceShift => (1.0 + x[0].exp()) * z,
        }
    }

    pub fn eval(&self, x: &[f64], functional: Functional) -> f64 {
        match functional {
            Functional::Mean => self.mean(x),
            Functional::Quantile(t) => self.quantile(x, t),
        }
    }
}

/// Least squares with intercept; `coefficients[0]` is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    /// Y_i - fitted_i, in row order.
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.coefficients[0] + self.coefficients[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    /// Linear predictor shifted by the empirical t-quantile of the residuals.
    pub fn predict_quantile(&self, x: &[f64], t: f64) -> Result<f64> {
        let shift = solve_quantile(&self.residuals, &vec![1.0; self.residuals.len()], t)?;
        Ok(self.predict(x) + shift)
    }
}

pub fn ols_baseline(sample: &Sample) -> Result<OlsFit> {
    let n = sample.n();
    let k = sample.p() + 1;
    let design = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { sample.covariate(j - 1)[i] });
    let y = DVector::from_column_slice(sample.response(0));
    let svd = design.clone().svd(true, true);
    let sv = &svd.singular_values;
    let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    if !(cond < MAX_CONDITION) || n < k {
        return Err(Error::IllConditioned { condition: cond });
    }
    let beta = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::InvalidArgument(format!("least squares: {e}")))?;
    let fitted = &design * &beta;
    let residuals = (0..n).map(|i| y[i] - fitted[i]).collect();
    Ok(OlsFit { coefficients: beta.iter().copied().collect(), residuals })
}

/// h_j = sd_j · n^(-1/(p + 4))
pub fn scott_bandwidths(sample: &Sample) -> Vec<f64> {
    let rate = (sample.n() as f64).powf(-1.0 / (sample.p() + 4) as f64);
    (0..sample.p()).map(|j| weighted_mean_sd(sample.covariate(j), None).1 * rate).collect()
}

/// Π_j φ((x0_j - X_ij)/h_j) for every row.
pub fn nadaraya_watson_weights(sample: &Sample, x0: &[f64], bandwidth: &[f64]) -> Result<Vec<f64>> {
    if x0.len() != sample.p() || bandwidth.len() != sample.p() {
        return Err(Error::DimensionMismatch("x0 / bandwidth vs covariates".into()));
    }
    if bandwidth.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument("bandwidths must be positive".into()));
    }
    Ok((0..sample.n())
        .map(|i| {
            (0..sample.p())
                .map(|j| normal::pdf((x0[j] - sample.covariate(j)[i]) / bandwidth[j]))
                .product()
        })
        .collect())
}

/// Σ Y_i K_h(x0 - X_i) / Σ K_h(x0 - X_i) with a product Gaussian kernel.
pub fn nadaraya_watson_baseline(sample: &Sample, x0: &[f64], bandwidth: &[f64]) -> Result<f64> {
    let w = nadaraya_watson_weights(sample, x0, bandwidth)?;
    solve_mean(sample.response(0), &w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEstimator {
    /// Returns the true functional.
    Oracle,
    Ols,
    /// Scott-rule product-kernel regression (weighted quantile for quantiles).
    NadarayaWatson,
    CopulaParametric,
    CopulaKernel {
        margin: MarginBandwidth,
        copula: CopulaBandwidth,
    },
}

impl SimEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            SimEstimator::Oracle => "oracle",
            SimEstimator::Ols => "ols",
            SimEstimator::NadarayaWatson => "nadaraya_watson",
            SimEstimator::CopulaParametric => "eecop_param",
            SimEstimator::CopulaKernel { .. } => "eecop_kernel",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "oracle" => Some(Self::Oracle),
            "ols" => Some(Self::Ols),
            "nadaraya_watson" | "nw" => Some(Self::NadarayaWatson),
            "eecop_param" | "copula_param" => Some(Self::CopulaParametric),
            "eecop_kernel" | "copula_kernel" => Some(Self::CopulaKernel {
                margin: MarginBandwidth::NormalReference,
                copula: CopulaBandwidth::PaperRate,
            }),
            _ => None,
        }
    }

    /// Predictions at every evaluation point for one dataset.
    pub fn predict(&self, sample: &Sample, points: &[Vec<f64>], functional: Functional, truth: TruthFn) -> Result<Vec<f64>> {
        match self {
            SimEstimator::Oracle => Ok(points.iter().map(|x| truth.eval(x, functional)).collect()),
            SimEstimator::Ols => {
                let fit = ols_baseline(sample)?;
                points
                    .iter()
                    .map(|x| match functional {
                        Functional::Mean => Ok(fit.predict(x)),
                        Functional::Quantile(t) => fit.predict_quantile(x, t),
                    })
                    .collect()
            }
            SimEstimator::NadarayaWatson => {
                let h = scott_bandwidths(sample);
                points
                    .iter()
                    .map(|x| {
                        let w = nadaraya_watson_weights(sample, x, &h)?;
                        match functional {
                            Functional::Mean => solve_mean(sample.response(0), &w),
                            Functional::Quantile(t) => solve_quantile(sample.response(0), &w, t),
                        }
                    })
                    .collect()
            }
            SimEstimator::CopulaParametric | SimEstimator::CopulaKernel { .. } => {
                let weights = match *self {
                    SimEstimator::CopulaKernel { margin, copula } => WeightEstimator::Kernel { margin, copula },
                    _ => WeightEstimator::ParametricGaussian,
                };
                let model = fit_weight_model(sample, &weights, None)?;
                let family = functional.family()?;
                let cfg = SolverConfig::default();
                points
                    .iter()
                    .map(|x| Ok(estimate_from_model(&model, sample, x, &family, &cfg, None)?.points[0].theta[0]))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseStudy {
    pub dgp: DgpKind,
    pub p: usize,
    pub sizes: Vec<usize>,
    pub estimators: Vec<SimEstimator>,
    pub functional: Functional,
    /// Fresh covariate draws per replicate at which errors are measured.
    pub eval_points: usize,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub estimator: String,
    pub n: usize,
    pub p: usize,
    pub t: Option<f64>,
    pub rmse: f64,
    /// Delta-method Monte Carlo standard error of the RMSE.
    pub mc_se: f64,
    pub reps_ok: usize,
    pub failures: usize,
}

/// Per-replicate mean squared errors, one entry per estimator; `None` on failure.
pub fn replicate_errors(study: &RmseStudy, n: usize, rep: usize) -> Result<Vec<Option<f64>>> {
    let mut rng: ChaCha8Rng = replicate_rng(study.seed, ((n as u64) << 32) | rep as u64);
    let sample = generate_with_rng(study.dgp, n, study.p, &mut rng)?;
    let points: Vec<Vec<f64>> = (0..study.eval_points).map(|_| draw_covariate(study.dgp, study.p, &mut rng)).collect();
    let truth = TruthFn { kind: study.dgp };
    Ok(study
        .estimators
        .iter()
        .map(|est| {
            let preds = est.predict(&sample, &points, study.functional, truth).ok()?;
            let sq: f64 = preds
                .iter()
                .zip(&points)
                .map(|(p, x)| (p - truth.eval(x, study.functional)).powi(2))
                .sum();
            Some(sq / points.len() as f64)
        })
        .collect())
}

pub fn rmse_study(study: &RmseStudy, threads: Option<usize>) -> Result<Vec<RmseRow>> {
    if study.reps == 0 || study.eval_points == 0 || study.estimators.is_empty() {
        return Err(Error::InvalidArgument("study needs reps ≥ 1, eval points ≥ 1 and an estimator".into()));
    }
    if let Functional::Quantile(t) = study.functional {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!("quantile level {t} outside (0, 1)")));
        }
    }
    let run = || -> Result<Vec<RmseRow>> {
        let mut rows = Vec::new();
        for &n in &study.sizes {
            let per_rep = (0..study.reps)
                .into_par_iter()
                .map(|rep| replicate_errors(study, n, rep))
                .collect::<Result<Vec<_>>>()?;
            for (k, est) in study.estimators.iter().enumerate() {
                let mses: Vec<f64> = per_rep.iter().filter_map(|r| r[k]).collect();
                let reps_ok = mses.len();
                let (rmse, mc_se) = if reps_ok == 0 {
                    (f64::NAN, f64::NAN)
                } else {
                    let mse = mses.iter().sum::<f64>() / reps_ok as f64;
                    let rmse = mse.sqrt();
                    let se = if reps_ok > 1 && rmse > 0.0 {
                        let var = mses.iter().map(|m| (m - mse).powi(2)).sum::<f64>() / (reps_ok - 1) as f64;
                        (var / reps_ok as f64).sqrt() / (2.0 * rmse)
                    } else if rmse == 0.0 {
                        0.0
                    } else {
                        f64::NAN
                    };
                    (rmse, se)
                };
                rows.push(RmseRow {
                    estimator: est.name().to_string(),
                    n,
                    p: study.p,
                    t: study.functional.level(),
                    rmse,
                    mc_se,
                    reps_ok,
                    failures: study.reps - reps_ok,
                });
            }
        }
        Ok(rows)
    };
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Tidy CSV: estimator,n,p,t,rmse,mc_se,reps_ok,failures
pub fn rows_to_csv(rows: &[RmseRow]) -> String {
    let mut out = String::from("estimator,n,p,t,rmse,mc_se,reps_ok,failures\n");
    for r in rows {
        let t = r.t.map(|t| t.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.estimator, r.n, r.p, t, r.rmse, r.mc_se, r.reps_ok, r.failures
        ));
    }
    out
}

/// Exposed for the IV-style checks: condition number of a square matrix.
pub fn matrix_condition(m: &DMatrix<f64>) -> f64 {
    condition_number(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let spec = DgpSpec { kind: DgpKind::MeanShift, n: 50, p: 2, seed: 9 };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = DgpSpec { seed: 10, ..spec };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
        assert!(generate(&DgpSpec { n: 5, ..spec }).is_err());
    }

    #[test]
    fn linear_gaussian_ols_recovers_unit_slopes() {
        let s = generate(&DgpSpec { kind: DgpKind::LinearGaussian, n: 1000, p: 3, seed: 1 }).unwrap();
        let fit = ols_baseline(&s).unwrap();
        for b in &fit.coefficients[1..] {
            assert!((b - 1.0).abs() < 0.15, "{:?}", fit.coefficients);
        }
    }

    #[test]
    fn ols_matches_normal_equations() {
        let s = generate(&DgpSpec { kind: DgpKind::MeanShift, n: 60, p: 2, seed: 4 }).unwrap();
        let fit = ols_baseline(&s).unwrap();
        let x = DMatrix::from_fn(60, 3, |i, j| if j == 0 { 1.0 } else { s.covariate(j - 1)[i] });
        let y = DVector::from_column_slice(s.response(0));
        let xtx = x.transpose() * &x;
        let beta = xtx.try_inverse().unwrap() * x.transpose() * y;
        for (a, b) in fit.coefficients.iter().zip(beta.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ols_exact_fit_and_rank_deficiency() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v).collect();
        let fit = ols_baseline(&Sample::new(vec![y], vec![x.clone()]).unwrap()).unwrap();
        assert!((fit.coefficients[0] - 1.5).abs() < 1e-12 && (fit.coefficients[1] + 2.0).abs() < 1e-12);
        let dup = Sample::new(vec![vec![1.0, 2.0, 3.0, 4.0]], vec![x.clone(), x]).unwrap();
        assert!(matches!(ols_baseline(&dup), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn nadaraya_watson_cases() {
        let s = Sample::new(vec![vec![3.0; 4]], vec![vec![0.0, 1.0, 2.0, 3.0]]).unwrap();
        assert!((nadaraya_watson_baseline(&s, &[1.2], &[0.5]).unwrap() - 3.0).abs() < 1e-12);
        let s = Sample::new(vec![vec![7.0, 100.0]], vec![vec![0.0, 1000.0]]).unwrap();
        assert_eq!(nadaraya_watson_baseline(&s, &[0.0], &[1.0]).unwrap(), 7.0);
        let s = generate(&DgpSpec { kind: DgpKind::LinearGaussian, n: 30, p: 2, seed: 2 }).unwrap();
        let x0 = [0.3, -0.2];
        let h = [0.7, 0.9];
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..30 {
            let k = (-0.5 * ((x0[0] - s.covariate(0)[i]) / h[0]).powi(2)).exp()
                * (-0.5 * ((x0[1] - s.covariate(1)[i]) / h[1]).powi(2)).exp();
            num += k * s.response(0)[i];
            den += k;
        }
        assert!((nadaraya_watson_baseline(&s, &x0, &h).unwrap() - num / den).abs() < 1e-12);
        assert!(nadaraya_watson_baseline(&s, &[1e6, 1e6], &[0.1, 0.1]).is_err());
        assert!(nadaraya_watson_baseline(&s, &x0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn variance_shift_median_is_zero() {
        let s = generate(&DgpSpec { kind: DgpKind::VarianceShift, n: 20_000, p: 1, seed: 3 }).unwrap();
        let truth = TruthFn { kind: DgpKind::VarianceShift };
        for bin in 0..4 {
            let lo = -1.0 + 0.5 * bin as f64;
            let ys: Vec<f64> = (0..s.n())
                .filter(|&i| (lo..lo + 0.5).contains(&s.covariate(0)[i]))
                .map(|i| s.response(0)[i])
                .collect();
            let w = vec![1.0; ys.len()];
            let med = solve_quantile(&ys, &w, 0.5).unwrap();
            // se of the median in the widest bin is about 0.06
            assert!(med.abs() < 0.25, "bin {bin}: {med}");
            assert_eq!(truth.quantile(&[lo], 0.5), 0.0);
        }
    }

    #[test]
    fn mean_shift_center_bin() {
        let s = generate(&DgpSpec { kind: DgpKind::MeanShift, n: 20_000, p: 1, seed: 8 }).unwrap();
        let ys: Vec<f64> = (0..s.n()).filter(|&i| s.covariate(0)[i].abs() < 0.05).map(|i| s.response(0)[i]).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!((mean - 1.0).abs() < 0.2, "{mean}");
    }

    fn study(estimators: Vec<SimEstimator>, reps: usize) -> RmseStudy {
        RmseStudy {
            dgp: DgpKind::LinearGaussian,
            p: 2,
            sizes: vec![100],
            estimators,
            functional: Functional::Mean,
            eval_points: 5,
            reps,
            seed: 17,
        }
    }

    #[test]
    fn oracle_has_zero_rmse() {
        let rows = rmse_study(&study(vec![SimEstimator::Oracle], 3), None).unwrap();
        assert_eq!(rows[0].rmse, 0.0);
        assert_eq!(rows[0].mc_se, 0.0);
    }

    #[test]
    fn single_rep_matches_direct_computation() {
        let st = study(vec![SimEstimator::Ols, SimEstimator::CopulaParametric], 1);
        let rows = rmse_study(&st, Some(2)).unwrap();
        let direct = replicate_errors(&st, 100, 0).unwrap();
        for (row, mse) in rows.iter().zip(direct) {
            assert_eq!(row.rmse, mse.unwrap().sqrt());
        }
    }

    #[test]
    fn study_independent_of_threads() {
        let st = study(vec![SimEstimator::Ols, SimEstimator::NadarayaWatson], 6);
        assert_eq!(rmse_study(&st, Some(1)).unwrap(), rmse_study(&st, Some(3)).unwrap());
        let csv = rows_to_csv(&rmse_study(&st, Some(1)).unwrap());
        assert!(csv.starts_with("estimator,n,p,t,rmse,mc_se,reps_ok,failures\nols,100,2,,"));
    }
}
