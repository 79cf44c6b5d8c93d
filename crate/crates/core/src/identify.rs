//! Identifying functions ψ_{θ,t} and their derivative maps V.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margins::weighted_mean_sd;
use crate::model::{IndexGrid, Sample};
use crate::normal;

/// Condition numbers at or above this make the IV system unusable.
pub const MAX_CONDITION: f64 = 1e12;

/// One-parameter exponential family with sufficient statistic a(y) = y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpFamily {
    /// b(θ) = θ²/2
    Gaussian,
    /// b(θ) = exp(θ)
    Poisson,
    /// b(θ) = log(1 + exp(θ))
    Bernoulli,
}

impl ExpFamily {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gaussian" => Some(Self::Gaussian),
            "poisson" => Some(Self::Poisson),
            "bernoulli" => Some(Self::Bernoulli),
            _ => None,
        }
    }

    #[inline]
    pub fn sufficient(&self, y: f64) -> f64 {
        y
    }

    pub fn b_prime(&self, theta: f64) -> f64 {
        match self {
            Self::Gaussian => theta,
            Self::Poisson => theta.exp(),
            Self::Bernoulli => 1.0 / (1.0 + (-theta).exp()),
        }
    }

    pub fn b_second(&self, theta: f64) -> f64 {
        match self {
            Self::Gaussian => 1.0,
            Self::Poisson => theta.exp(),
            Self::Bernoulli => {
                let p = self.b_prime(theta);
                p * (1.0 - p)
            }
        }
    }

    /// Whether `target` lies in the open range of b'.
    pub fn in_range(&self, target: f64) -> bool {
        match self {
            Self::Gaussian => target.is_finite(),
            Self::Poisson => target > 0.0 && target.is_finite(),
            Self::Bernoulli => target > 0.0 && target < 1.0,
        }
    }

    pub fn psi(&self, theta: f64, y: f64) -> f64 {
        self.sufficient(y) - self.b_prime(theta)
    }
}

/// b(y) = (1, y, ..., y^degree)
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialBasis {
    pub degree: usize,
}

impl PolynomialBasis {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, y: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut v = 1.0;
        for _ in 0..self.len() {
            out.push(v);
            v *= y;
        }
        out
    }

    /// b(y₃){y₁ - θᵀb(y₂)}
    pub fn psi(&self, theta: &[f64], y1: f64, y2: f64, y3: f64) -> Vec<f64> {
        let fitted: f64 = theta.iter().zip(self.eval(y2)).map(|(a, b)| a * b).sum();
        let resid = y1 - fitted;
        self.eval(y3).into_iter().map(|b| b * resid).collect()
    }
}

#[inline]
pub fn psi_mean(theta: f64, y: f64) -> f64 {
    y - theta
}

/// t·𝟙(y ≥ θ) - (1 - t)·𝟙(y < θ)
#[inline]
pub fn psi_quantile(theta: f64, t: f64, y: f64) -> f64 {
    if y >= theta {
        t
    } else {
        -(1.0 - t)
    }
}

/// t(y - θ)𝟙(y ≥ θ) - (1 - t)(θ - y)𝟙(y < θ)
#[inline]
pub fn psi_expectile(theta: f64, t: f64, y: f64) -> f64 {
    if y >= theta {
        t * (y - theta)
    } else {
        -(1.0 - t) * (theta - y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Mean,
    Quantile { grid: IndexGrid },
    Expectile { grid: IndexGrid },
    ExpFam { spec: ExpFamily },
    /// Linear sieve IV on responses (y₁, y₂, y₃) = (outcome, treatment, instrument).
    IvLinear { basis: PolynomialBasis },
}

impl Family {
    pub fn quantile(levels: Vec<f64>) -> Result<Self> {
        Ok(Family::Quantile { grid: IndexGrid::levels(levels)? })
    }

    pub fn expectile(levels: Vec<f64>) -> Result<Self> {
        Ok(Family::Expectile { grid: IndexGrid::levels(levels)? })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Mean => "mean",
            Family::Quantile { .. } => "quantile",
            Family::Expectile { .. } => "expectile",
            Family::ExpFam { .. } => "expfam",
            Family::IvLinear { .. } => "iv",
        }
    }

    pub fn grid(&self) -> IndexGrid {
        match self {
            Family::Quantile { grid } | Family::Expectile { grid } => grid.clone(),
            _ => IndexGrid::Unindexed,
        }
    }

    /// Dimension of θ.
    pub fn theta_dim(&self) -> usize {
        match self {
            Family::IvLinear { basis } => basis.len(),
            _ => 1,
        }
    }

    /// Number of response columns the family reads.
    pub fn response_dim(&self) -> usize {
        match self {
            Family::IvLinear { .. } => 3,
            _ => 1,
        }
    }

    /// ψ_{θ,t}(y) for a response row `y`.
    pub fn psi(&self, theta: &[f64], t: Option<f64>, y: &[f64]) -> Vec<f64> {
        let level = || t.expect("indexed family requires a level");
        match self {
            Family::Mean => vec![psi_mean(theta[0], y[0])],
            Family::Quantile { .. } => vec![psi_quantile(theta[0], level(), y[0])],
            Family::Expectile { .. } => vec![psi_expectile(theta[0], level(), y[0])],
            Family::ExpFam { spec } => vec![spec.psi(theta[0], y[0])],
            Family::IvLinear { basis } => basis.psi(theta, y[0], y[1], y[2]),
        }
    }
}

/// Self-normalized estimating equation Σ w_i ψ(Y_i) / Σ w_i.
pub fn equation_value(family: &Family, theta: &[f64], t: Option<f64>, sample: &Sample, w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut acc = vec![0.0; family.theta_dim()];
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let psi = family.psi(theta, t, &sample.response_row(i));
        for (a, v) in acc.iter_mut().zip(psi) {
            *a += wi * v;
        }
    }
    acc.iter().map(|a| a / total).collect()
}

/// Estimated derivative of θ ↦ E{ψ_{θ,t}(Y) w_x(Y)}, row-major `dim × dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeInfo {
    pub dim: usize,
    pub v: Vec<f64>,
}

impl DerivativeInfo {
    pub fn scalar(v: f64) -> Self {
        Self { dim: 1, v: vec![v] }
    }
}

/// Plug-in estimate of V with self-normalized weights ŵ_i = w_i / Σw.
pub fn estimate_v(family: &Family, theta: &[f64], t: Option<f64>, sample: &Sample, w: &[f64]) -> Result<DerivativeInfo> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights(total));
    }
    let y = sample.response(0);
    let cdf_at = |theta: f64| -> f64 {
        y.iter().zip(w).filter(|(&yi, _)| yi <= theta).map(|(_, &wi)| wi).sum::<f64>() / total
    };
    Ok(match family {
        Family::Mean => DerivativeInfo::scalar(-1.0),
        Family::Quantile { .. } => {
            let (_, sd) = weighted_mean_sd(y, Some(w));
            let b = 1.06 * sd * (y.len() as f64).powf(-0.2);
            if !(b > 0.0) {
                return Ok(DerivativeInfo::scalar(f64::NAN));
            }
            let dens: f64 = y.iter().zip(w).map(|(&yi, &wi)| wi * normal::pdf((theta[0] - yi) / b)).sum::<f64>()
                / (b * total);
            DerivativeInfo::scalar(-dens)
        }
        Family::Expectile { .. } => {
            let t = t.expect("expectile requires a level");
            DerivativeInfo::scalar((2.0 * t - 1.0) * cdf_at(theta[0]) - t)
        }
        Family::ExpFam { spec } => DerivativeInfo::scalar(-spec.b_second(theta[0])),
        Family::IvLinear { basis } => {
            let k = basis.len();
            let m = iv_moment_matrix(basis, sample.response(1), sample.response(2), w);
            let cond = condition_number(&m);
            if !(cond < MAX_CONDITION) {
                return Err(Error::IllConditioned { condition: cond });
            }
            let v = (0..k * k).map(|idx| -m[(idx / k, idx % k)] / total).collect();
            DerivativeInfo { dim: k, v }
        }
    })
}

/// Σ w_i b(y₃ᵢ) b(y₂ᵢ)ᵀ
pub(crate) fn iv_moment_matrix(basis: &PolynomialBasis, y2: &[f64], y3: &[f64], w: &[f64]) -> DMatrix<f64> {
    let k = basis.len();
    let mut m = DMatrix::zeros(k, k);
    for i in 0..w.len() {
        let b2 = basis.eval(y2[i]);
        let b3 = basis.eval(y3[i]);
        for a in 0..k {
            for c in 0..k {
                m[(a, c)] += w[i] * b3[a] * b2[c];
            }
        }
    }
    m
}

pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}
