//! Versioned JSON documents written by `fit` and `bootstrap`.

use eecop_core::{BandResult, CopulaModel, EstimateResult, Family, MarginModel, WeightDiagnostics, WeightEstimator, WeightModel};
use serde::Serialize;

pub const SCHEMA: &str = "eecop/1";

#[derive(Debug, Serialize)]
pub struct FitDocument<'a> {
    pub schema: &'static str,
    pub command: &'static str,
    pub family: &'a Family,
    pub weights: &'a WeightEstimator,
    pub n: usize,
    pub response: &'a [String],
    pub covariates: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelEcho>,
    pub results: Vec<PointOutput>,
}

/// Fitted margins and copula of the point estimate.
#[derive(Debug, Serialize)]
pub struct ModelEcho {
    pub margins: Vec<MarginEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub copula: Option<CopulaEcho>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginEcho {
    Gaussian { mu: f64, sigma: f64 },
    Kernel { bandwidth: f64 },
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CopulaEcho {
    Gaussian { correlation: Vec<Vec<f64>> },
    Kernel { bandwidths: Vec<f64> },
}

impl ModelEcho {
    pub fn from_model(model: &WeightModel) -> Self {
        let margins = model
            .margins()
            .iter()
            .map(|m| match m {
                MarginModel::Gaussian(g) => MarginEcho::Gaussian { mu: g.mu, sigma: g.sigma },
                MarginModel::Kernel(k) => MarginEcho::Kernel { bandwidth: k.bandwidth() },
            })
            .collect();
        let copula = model.copula().map(|c| match c {
            CopulaModel::Gaussian(g) => {
                let r = g.correlation();
                CopulaEcho::Gaussian { correlation: r.row_iter().map(|row| row.iter().copied().collect()).collect() }
            }
            CopulaModel::Kernel(k) => CopulaEcho::Kernel { bandwidths: k.bandwidths().to_vec() },
        });
        Self { margins, copula }
    }
}

#[derive(Debug, Serialize)]
pub struct PointOutput {
    pub x0: Vec<f64>,
    pub diagnostics: WeightDiagnostics,
    pub estimates: Vec<LevelOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<BandOutput>,
}

#[derive(Debug, Serialize)]
pub struct LevelOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub theta: Vec<f64>,
    /// Row-major derivative matrix of the weighted equation.
    pub v: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Band summary; the replicate matrix is left out.
#[derive(Debug, Serialize)]
pub struct BandOutput {
    pub alpha: f64,
    pub labels: Vec<String>,
    pub pointwise_lower: Vec<f64>,
    pub pointwise_upper: Vec<f64>,
    pub uniform_lower: Vec<f64>,
    pub uniform_upper: Vec<f64>,
    pub uniform_critical_value: f64,
    pub requested: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl From<BandResult> for BandOutput {
    fn from(b: BandResult) -> Self {
        Self {
            alpha: b.alpha,
            labels: b.labels,
            pointwise_lower: b.pointwise_lower,
            pointwise_upper: b.pointwise_upper,
            uniform_lower: b.uniform_lower,
            uniform_upper: b.uniform_upper,
            uniform_critical_value: b.uniform_critical_value,
            requested: b.requested,
            failed: b.failed,
            warnings: b.warnings,
        }
    }
}

impl From<EstimateResult> for PointOutput {
    fn from(r: EstimateResult) -> Self {
        Self {
            x0: r.x0,
            diagnostics: r.diagnostics,
            estimates: r
                .points
                .into_iter()
                .map(|p| LevelOutput {
                    t: p.t,
                    theta: p.theta,
                    v: p.derivative.v,
                    iterations: p.iterations,
                    residual: p.residual,
                })
                .collect(),
            bands: r.bands.map(BandOutput::from),
        }
    }
}
