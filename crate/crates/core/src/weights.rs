//! The weight function ŵ_x(y) = c_{Y,X}(F_Y(y), F_X(x)) / c_Y(F_Y(y)) for a
//! fixed conditioning point x, and the estimators that fit it.
//!
//! The covariate-block normalizer c_X(F_X(x)) is never divided out: it is
//! constant in y and cancels in every estimating equation.

use serde::{Deserialize, Serialize};

use crate::copula::{fit_gaussian_copula, fit_kernel_copula, CopulaBandwidth, CopulaModel, GaussianCopula, KernelCopula};
use crate::error::{Error, Result};
use crate::margins::{fit_gaussian_margin, fit_kernel_margin, MarginBandwidth, MarginModel};
use crate::model::{clamp_unit, pit, Sample, WeightDiagnostics};
use crate::normal;

/// Total weight below this is treated as degenerate.
pub const MIN_WEIGHT_SUM: f64 = 1e-300;

/// How margins and copula are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightEstimator {
    #[default]
    /// Gaussian margins and Gaussian copula, both by maximum likelihood.
    ParametricGaussian,
    /// Integrated-kernel margins and a product-kernel copula density.
    Kernel {
        margin: MarginBandwidth,
        copula: CopulaBandwidth,
    },
}

/// Fitted margins and copula; independent of the conditioning point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightModel {
    q: usize,
    margins: Vec<MarginModel>,
    copula: Option<CopulaModel>,
    y_copula: Option<CopulaModel>,
}

/// Fits every margin and the joint copula, optionally multiplier-weighted.
pub fn fit_weight_model(sample: &Sample, estimator: &WeightEstimator, m: Option<&[f64]>) -> Result<WeightModel> {
    let margins = sample
        .columns()
        .map(|col| match estimator {
            WeightEstimator::ParametricGaussian => fit_gaussian_margin(col, m).map(MarginModel::Gaussian),
            WeightEstimator::Kernel { margin, .. } => fit_kernel_margin(col, *margin, m).map(MarginModel::Kernel),
        })
        .collect::<Result<Vec<_>>>()?;
    let q = sample.q();
    if sample.p() == 0 {
        return Ok(WeightModel { q, margins, copula: None, y_copula: None });
    }
    let u = pit(sample, &margins)?;
    let copula = match estimator {
        WeightEstimator::ParametricGaussian => CopulaModel::Gaussian(fit_gaussian_copula(&u, m)?),
        WeightEstimator::Kernel { copula, .. } => CopulaModel::Kernel(fit_kernel_copula(&u, *copula, m)?),
    };
    let y_copula = if q >= 2 {
        Some(copula.marginal(&(0..q).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok(WeightModel { q, margins, copula: Some(copula), y_copula })
}

impl WeightModel {
    pub fn margins(&self) -> &[MarginModel] {
        &self.margins
    }

    pub fn copula(&self) -> Option<&CopulaModel> {
        self.copula.as_ref()
    }

    /// Weight function at conditioning point `x0`.
    pub fn condition(&self, x0: &[f64]) -> Result<WeightFn> {
        match &self.copula {
            None if x0.is_empty() => Ok(WeightFn::unconditional(self.margins.clone())),
            None => Err(Error::DimensionMismatch(format!("x0 has {} entries, model has 0 covariates", x0.len()))),
            Some(c) => build_weight_fn(self.margins.clone(), c.clone(), self.y_copula.clone(), x0.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Numerator {
    Constant,
    Gaussian {
        copula: GaussianCopula,
        z_x: Vec<f64>,
    },
    /// `x_factors[i] = m_i Π_k φ((u_xk - U_ik)/h_k)`, fixed once x is fixed.
    Kernel {
        copula: KernelCopula,
        x_factors: Vec<f64>,
        norm: f64,
    },
}

/// ŵ_x(y) for one conditioning point; nonnegative and finite for finite y.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFn {
    margins: Vec<MarginModel>,
    q: usize,
    x0: Vec<f64>,
    u_x: Vec<f64>,
    numerator: Numerator,
    denominator: Option<CopulaModel>,
}

/// Assembles ŵ_x from fitted margins (q response then p covariate) and copulas.
/// `y_copula` is required when q ≥ 2 and ignored when q = 1.
pub fn build_weight_fn(
    margins: Vec<MarginModel>,
    copula: CopulaModel,
    y_copula: Option<CopulaModel>,
    x0: Vec<f64>,
) -> Result<WeightFn> {
    let d = copula.dim();
    if margins.len() != d {
        return Err(Error::DimensionMismatch(format!("{} margins for a {d}-dimensional copula", margins.len())));
    }
    let p = x0.len();
    if p >= d {
        return Err(Error::DimensionMismatch(format!("x0 has {p} entries, copula dimension is {d}")));
    }
    let q = d - p;
    let denominator = if q >= 2 {
        let c = y_copula.ok_or_else(|| Error::InvalidArgument("a response-block copula is required when q ≥ 2".into()))?;
        if c.dim() != q {
            return Err(Error::DimensionMismatch(format!("response copula has dimension {}, expected {q}", c.dim())));
        }
        Some(c)
    } else {
        None
    };
    let u_x: Vec<f64> = x0.iter().zip(&margins[q..]).map(|(&x, m)| clamp_unit(m.cdf(x))).collect();
    let numerator = if p == 0 {
        Numerator::Constant
    } else {
        match copula {
            CopulaModel::Gaussian(copula) => {
                let z_x = u_x.iter().map(|&u| normal::quantile(u)).collect();
                Numerator::Gaussian { copula, z_x }
            }
            CopulaModel::Kernel(copula) => {
                let x_factors = (0..copula.n())
                    .map(|i| {
                        let prod: f64 = u_x.iter().enumerate().map(|(k, &u)| copula.factor(i, q + k, u)).product();
                        copula.multiplier(i) * prod
                    })
                    .collect();
                let norm = copula.bandwidths().iter().product::<f64>() * copula.total_weight();
                Numerator::Kernel { copula, x_factors, norm }
            }
        }
    };
    Ok(WeightFn { margins, q, x0, u_x, numerator, denominator })
}

impl WeightFn {
    /// w ≡ 1: no covariates to condition on.
    pub fn unconditional(margins: Vec<MarginModel>) -> Self {
        let q = margins.len();
        Self { margins, q, x0: vec![], u_x: vec![], numerator: Numerator::Constant, denominator: None }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// Cached F̂_X(x0), clamped into the open unit interval.
    pub fn u_x(&self) -> &[f64] {
        &self.u_x
    }

    /// The response-block copula, present only when q ≥ 2.
    pub fn denominator(&self) -> Option<&CopulaModel> {
        self.denominator.as_ref()
    }

    /// ŵ_x(y) for a response vector of length q.
    pub fn evaluate(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.q);
        if matches!(self.numerator, Numerator::Constant) {
            return 1.0;
        }
        let u_y: Vec<f64> = y.iter().zip(&self.margins).map(|(&v, m)| clamp_unit(m.cdf(v))).collect();
        let num = match &self.numerator {
            Numerator::Constant => unreachable!(),
            Numerator::Gaussian { copula, z_x } => {
                let z: Vec<f64> = u_y.iter().map(|&u| normal::quantile(u)).chain(z_x.iter().copied()).collect();
                copula.log_density_scores(&z).exp()
            }
            Numerator::Kernel { copula, x_factors, norm } => {
                let mut s = 0.0;
                for (i, &xf) in x_factors.iter().enumerate() {
                    if xf == 0.0 {
                        continue;
                    }
                    let prod: f64 = u_y.iter().enumerate().map(|(j, &u)| copula.factor(i, j, u)).product();
                    s += xf * prod;
                }
                s / norm
            }
        };
        match &self.denominator {
            None => num,
            Some(c) => {
                let den = c.density(&u_y);
                if den > 0.0 && den.is_finite() {
                    num / den
                } else {
                    0.0
                }
            }
        }
    }
}

/// ŵ_x(Y_i) for every row plus summary diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub diagnostics: WeightDiagnostics,
}

pub fn evaluate_weights(w: &WeightFn, sample: &Sample) -> Result<WeightVector> {
    if sample.q() != w.q() {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} responses, weight function expects {}",
            sample.q(),
            w.q()
        )));
    }
    let values: Vec<f64> = (0..sample.n()).map(|i| w.evaluate(&sample.response_row(i))).collect();
    let diagnostics = weight_diagnostics(&values)?;
    Ok(WeightVector { values, diagnostics })
}

/// Sum, effective sample size (Σw)²/Σw² and range of a weight vector.
pub fn weight_diagnostics(values: &[f64]) -> Result<WeightDiagnostics> {
    let sum: f64 = values.iter().sum();
    if !(sum >= MIN_WEIGHT_SUM && sum.is_finite()) {
        return Err(Error::DegenerateWeights(sum));
    }
    let sum_sq: f64 = values.iter().map(|w| w * w).sum();
    let n = values.len();
    let max_weight = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(WeightDiagnostics {
        n,
        weight_sum: sum,
        effective_sample_size: sum * sum / sum_sq,
        min_weight: values.iter().copied().fold(f64::INFINITY, f64::min),
        max_weight,
        max_normalized_weight: max_weight * n as f64 / sum,
    })
}
