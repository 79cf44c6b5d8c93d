//! Multiplier bootstrap: every replicate refits margins, copula and the
//! estimating equation under i.i.d. positive observation multipliers
//! ξ_i / ξ̄ (standard exponential ξ gives the Bayesian bootstrap).
//!
//! Bands are built from Δ_{b,t} = (μ/σ)(θ̃_{b,t} - θ̂_t). Sample-size scaling
//! cancels between replicates and band, so no convergence rate is needed.
//! Quantiles use linear interpolation between order statistics (type 7).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_weighted, Estimator};
use crate::identify::Family;
use crate::model::{EstimateResult, Sample};

/// Share of failed replicates above which a warning is attached.
pub const FAILURE_WARN_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierDistribution {
    /// Standard exponential: μ = σ = 1.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSpec {
    pub distribution: MultiplierDistribution,
    pub replicates: usize,
    pub seed: u64,
}

impl MultiplierSpec {
    pub fn exponential(replicates: usize, seed: u64) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::InvalidArgument("bootstrap needs at least one replicate".into()));
        }
        Ok(Self { distribution: MultiplierDistribution::Exponential, replicates, seed })
    }

    pub fn mu(&self) -> f64 {
        match self.distribution {
            MultiplierDistribution::Exponential => 1.0,
        }
    }

    pub fn sigma(&self) -> f64 {
        match self.distribution {
            MultiplierDistribution::Exponential => 1.0,
        }
    }

    fn sample_one<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.distribution {
            MultiplierDistribution::Exponential => Exp1.sample(rng),
        }
    }
}

/// Independent stream for replicate `index`: results do not depend on
/// scheduling or on the number of worker threads.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    /// Raw draws ξ_i.
    pub xi: Vec<f64>,
    /// Normalized ξ_i / ξ̄, averaging one.
    pub m: Vec<f64>,
}

pub fn draw_multipliers<R: Rng>(spec: &MultiplierSpec, n: usize, rng: &mut R) -> Result<Multipliers> {
    if n < 2 {
        return Err(Error::TooFewObservations { required: 2, got: n });
    }
    let xi: Vec<f64> = (0..n).map(|_| spec.sample_one(rng)).collect();
    let mean = xi.iter().sum::<f64>() / n as f64;
    let m = xi.iter().map(|v| v / mean).collect();
    Ok(Multipliers { xi, m })
}

/// θ̃ over the index grid (flattened) for one set of multipliers.
pub fn bootstrap_replicate(sample: &Sample, x0: &[f64], family: &Family, estimator: &Estimator, m: &[f64]) -> Result<Vec<f64>> {
    Ok(estimate_weighted(sample, x0, family, estimator, Some(m))?.flat_theta())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandResult {
    pub alpha: f64,
    /// One label per θ coordinate (index level and component).
    pub labels: Vec<String>,
    pub pointwise_lower: Vec<f64>,
    pub pointwise_upper: Vec<f64>,
    pub uniform_lower: Vec<f64>,
    pub uniform_upper: Vec<f64>,
    /// Quantile of sup_t |Δ_t| used for the uniform band.
    pub uniform_critical_value: f64,
    pub requested: usize,
    pub failed: usize,
    /// B rows; `None` marks a failed replicate.
    pub replicates: Vec<Option<Vec<f64>>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl BandResult {
    /// Replicate matrix as CSV, failed rows left empty.
    pub fn replicates_csv(&self) -> String {
        let mut out = String::from("replicate");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (b, row) in self.replicates.iter().enumerate() {
            out.push_str(&b.to_string());
            match row {
                Some(r) => r.iter().for_each(|v| out.push_str(&format!(",{v}"))),
                None => (0..self.labels.len()).for_each(|_| out.push(',')),
            }
            out.push('\n');
        }
        out
    }
}

/// Type-7 quantile of an ascending slice.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise band θ̂_t ± q_{1-α}(|Δ_t|) and uniform band
/// θ̂_t ± q_{1-α}(sup_t |Δ_t|), with Δ = scale · (θ̃ - θ̂) and scale = μ/σ.
pub fn confidence_bands(
    theta_hat: &[f64],
    replicates: &[Option<Vec<f64>>],
    alpha: f64,
    scale: f64,
    labels: Vec<String>,
) -> Result<BandResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    let dim = theta_hat.len();
    if labels.len() != dim {
        return Err(Error::DimensionMismatch("labels vs θ coordinates".into()));
    }
    let ok: Vec<&Vec<f64>> = replicates.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::AllReplicatesFailed(replicates.len()));
    }
    if ok.iter().any(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch("replicate length vs θ coordinates".into()));
    }
    let failed = replicates.len() - ok.len();
    let mut warnings = Vec::new();
    if failed as f64 > FAILURE_WARN_FRACTION * replicates.len() as f64 {
        warnings.push(format!("{failed} of {} replicates failed", replicates.len()));
    }
    if alpha <= 0.1 && ok.len() < 50 {
        warnings.push(format!("only {} successful replicates for alpha = {alpha}", ok.len()));
    }

    let deviations: Vec<Vec<f64>> = ok
        .iter()
        .map(|r| r.iter().zip(theta_hat).map(|(a, b)| (scale * (a - b)).abs()).collect())
        .collect();
    let mut pointwise_lower = Vec::with_capacity(dim);
    let mut pointwise_upper = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut col: Vec<f64> = deviations.iter().map(|d| d[k]).collect();
        col.sort_by(f64::total_cmp);
        let c = quantile_type7(&col, 1.0 - alpha);
        pointwise_lower.push(theta_hat[k] - c);
        pointwise_upper.push(theta_hat[k] + c);
    }
    let mut sups: Vec<f64> = deviations.iter().map(|d| d.iter().copied().fold(0.0, f64::max)).collect();
    sups.sort_by(f64::total_cmp);
    let c = quantile_type7(&sups, 1.0 - alpha);
    Ok(BandResult {
        alpha,
        labels,
        pointwise_lower,
        pointwise_upper,
        uniform_lower: theta_hat.iter().map(|t| t - c).collect(),
        uniform_upper: theta_hat.iter().map(|t| t + c).collect(),
        uniform_critical_value: c,
        requested: replicates.len(),
        failed,
        replicates: replicates.to_vec(),
        warnings,
    })
}

/// Labels `theta` coordinates as `t=<level>` and/or `[k]`.
pub fn coordinate_labels(result: &EstimateResult) -> Vec<String> {
    let mut out = Vec::new();
    for p in &result.points {
        for k in 0..p.theta.len() {
            let mut label = match p.t {
                Some(t) => format!("t={t}"),
                None => "theta".to_string(),
            };
            if p.theta.len() > 1 {
                label.push_str(&format!("[{k}]"));
            }
            out.push(label);
        }
    }
    out
}

/// Runs `spec.replicates` replicates on `threads` workers (all cores when
/// `None`) and returns the point estimate with bands attached.
pub fn run_bootstrap(
    sample: &Sample,
    x0: &[f64],
    family: &Family,
    estimator: &Estimator,
    spec: &MultiplierSpec,
    alpha: f64,
    threads: Option<usize>,
) -> Result<EstimateResult> {
    let mut point = estimate_weighted(sample, x0, family, estimator, None)?;
    let n = sample.n();
    let one = |b: usize| -> Option<Vec<f64>> {
        let mut rng = replicate_rng(spec.seed, b as u64);
        let m = draw_multipliers(spec, n, &mut rng).ok()?;
        bootstrap_replicate(sample, x0, family, estimator, &m.m).ok()
    };
    let replicates: Vec<Option<Vec<f64>>> = match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| (0..spec.replicates).into_par_iter().map(one).collect()),
        None => (0..spec.replicates).into_par_iter().map(one).collect(),
    };
    let bands = confidence_bands(
        &point.flat_theta(),
        &replicates,
        alpha,
        spec.mu() / spec.sigma(),
        coordinate_labels(&point),
    )?;
    point.bands = Some(bands);
    Ok(point)
}
