//! Copula densities on the unit cube: the Gaussian copula (normal-scores
//! correlation) and a product-Gaussian kernel estimator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margins::{check_multipliers, weighted_mean_sd, weight_at};
use crate::model::PseudoSample;
use crate::normal;

/// Smallest eigenvalue kept when projecting onto valid correlation matrices.
pub const EIGEN_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCopula {
    corr: DMatrix<f64>,
    /// R⁻¹ - I
    #[serde(skip_serializing)]
    precision_minus_identity: DMatrix<f64>,
    #[serde(skip_serializing)]
    log_det: f64,
}

impl GaussianCopula {
    /// Validates a correlation matrix (symmetric, unit diagonal, positive definite).
    pub fn from_correlation(corr: DMatrix<f64>) -> Result<Self> {
        let d = corr.nrows();
        if d == 0 || corr.ncols() != d {
            return Err(Error::DimensionMismatch("correlation matrix must be square".into()));
        }
        for i in 0..d {
            if (corr[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument("correlation diagonal must be 1".into()));
            }
            for j in 0..i {
                if (corr[(i, j)] - corr[(j, i)]).abs() > 1e-12 || corr[(i, j)].abs() > 1.0 {
                    return Err(Error::InvalidArgument("correlation matrix must be symmetric".into()));
                }
            }
        }
        let chol = corr
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("correlation matrix is not positive definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let precision_minus_identity = chol.inverse() - DMatrix::identity(d, d);
        Ok(Self { corr, precision_minus_identity, log_det })
    }

    pub fn independence(d: usize) -> Self {
        Self::from_correlation(DMatrix::identity(d, d)).expect("identity is a correlation matrix")
    }

    pub fn dim(&self) -> usize {
        self.corr.nrows()
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.corr
    }

    /// Log-density at normal scores `z = Φ⁻¹(u)`.
    pub fn log_density_scores(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        let quad = (&self.precision_minus_identity * &z).dot(&z);
        -0.5 * (self.log_det + quad)
    }

    /// det(R)^(-1/2) · exp(-½ zᵀ(R⁻¹ - I)z) with z = Φ⁻¹(u).
    pub fn density(&self, u: &[f64]) -> f64 {
        let z: Vec<f64> = u.iter().map(|&v| normal::quantile(v)).collect();
        self.log_density_scores(&z).exp()
    }

    /// Copula of the listed coordinates: the corresponding block of R.
    pub fn marginal(&self, coords: &[usize]) -> Result<Self> {
        let k = coords.len();
        let sub = DMatrix::from_fn(k, k, |i, j| self.corr[(coords[i], coords[j])]);
        Self::from_correlation(sub)
    }
}

/// Two-step Gaussian copula fit: weighted correlation of the normal scores,
/// projected onto the valid correlation matrices.
pub fn fit_gaussian_copula(u: &PseudoSample, m: Option<&[f64]>) -> Result<GaussianCopula> {
    let d = u.dim();
    let n = u.n();
    if d == 0 {
        return Err(Error::InvalidArgument("copula needs at least one coordinate".into()));
    }
    check_multipliers(m, n)?;
    if d == 1 {
        return Ok(GaussianCopula::independence(1));
    }
    let scores: Vec<Vec<f64>> = u
        .columns()
        .iter()
        .map(|c| c.iter().map(|&v| normal::quantile(v)).collect())
        .collect();
    let mut means = Vec::with_capacity(d);
    for (j, col) in scores.iter().enumerate() {
        let (mean, sd) = weighted_mean_sd(col, m);
        if !(sd > 0.0) {
            return Err(Error::ConstantColumn(j));
        }
        means.push(mean);
    }
    let total: f64 = (0..n).map(|i| weight_at(m, i)).sum();
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..=a {
            let s: f64 = (0..n)
                .map(|i| weight_at(m, i) * (scores[a][i] - means[a]) * (scores[b][i] - means[b]))
                .sum();
            cov[(a, b)] = s / total;
            cov[(b, a)] = s / total;
        }
    }
    let mut corr = DMatrix::from_fn(d, d, |a, b| {
        if a == b {
            1.0
        } else {
            cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt()
        }
    });
    project_correlation(&mut corr);
    GaussianCopula::from_correlation(corr)
}

/// Symmetrize, clip eigenvalues at [`EIGEN_FLOOR`], rescale to unit diagonal.
/// Matrices already above the floor are left untouched.
pub fn project_correlation(corr: &mut DMatrix<f64>) {
    let d = corr.nrows();
    let sym = (&*corr + corr.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.min() >= EIGEN_FLOOR {
        *corr = sym;
        for i in 0..d {
            corr[(i, i)] = 1.0;
        }
        return;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    *corr = DMatrix::from_fn(d, d, |a, b| {
        if a == b {
            1.0
        } else {
            let off = 0.5 * (rebuilt[(a, b)] + rebuilt[(b, a)]);
            off / (rebuilt[(a, a)] * rebuilt[(b, b)]).sqrt()
        }
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaBandwidth {
    /// Scalar h = n^(-1/(4 + d - 1)).
    PaperRate,
    /// Per-coordinate h_j = n^(-1/(4 + d - 1)) · sd_j of the pseudo-observations,
    /// the diagonal of the matrix bandwidth n^(-2/(p+4)) Σ.
    ScaledDiagonal,
    Fixed(f64),
}

/// Product Gaussian kernel density on the uniform scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCopula {
    pseudo_obs: Vec<Vec<f64>>,
    bandwidths: Vec<f64>,
    rule: CopulaBandwidth,
    multipliers: Option<Vec<f64>>,
    total: f64,
}

pub fn fit_kernel_copula(u: &PseudoSample, rule: CopulaBandwidth, m: Option<&[f64]>) -> Result<KernelCopula> {
    let d = u.dim();
    let n = u.n();
    if d == 0 || n == 0 {
        return Err(Error::InvalidArgument("kernel copula needs data".into()));
    }
    check_multipliers(m, n)?;
    let rate = (n as f64).powf(-1.0 / (3 + d) as f64);
    let bandwidths = match rule {
        CopulaBandwidth::PaperRate => vec![rate; d],
        CopulaBandwidth::ScaledDiagonal => u
            .columns()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let (_, sd) = weighted_mean_sd(c, m);
                if sd > 0.0 {
                    Ok(rate * sd)
                } else {
                    Err(Error::ConstantColumn(j))
                }
            })
            .collect::<Result<_>>()?,
        CopulaBandwidth::Fixed(h) if h > 0.0 && h.is_finite() => vec![h; d],
        CopulaBandwidth::Fixed(h) => {
            return Err(Error::InvalidArgument(format!("copula bandwidth must be positive, got {h}")))
        }
    };
    let total = (0..n).map(|i| weight_at(m, i)).sum();
    Ok(KernelCopula {
        pseudo_obs: u.columns().to_vec(),
        bandwidths,
        rule,
        multipliers: m.map(<[f64]>::to_vec),
        total,
    })
}

impl KernelCopula {
    pub fn dim(&self) -> usize {
        self.pseudo_obs.len()
    }

    pub fn n(&self) -> usize {
        self.pseudo_obs[0].len()
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn pseudo_obs(&self) -> &[Vec<f64>] {
        &self.pseudo_obs
    }

    pub fn multiplier(&self, i: usize) -> f64 {
        weight_at(self.multipliers.as_deref(), i)
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    /// φ((u_j - U_ij)/h_j), the one-coordinate kernel factor.
    #[inline]
    pub fn factor(&self, i: usize, j: usize, u: f64) -> f64 {
        normal::pdf((u - self.pseudo_obs[j][i]) / self.bandwidths[j])
    }

    /// Σ_i m_i Π_j φ((u_j - U_ij)/h_j) / (Π_j h_j · Σ_i m_i)
    pub fn density(&self, u: &[f64]) -> f64 {
        let norm: f64 = self.bandwidths.iter().product::<f64>() * self.total;
        let s: f64 = (0..self.n())
            .map(|i| {
                let prod: f64 = (0..self.dim()).map(|j| self.factor(i, j, u[j])).product();
                self.multiplier(i) * prod
            })
            .sum();
        s / norm
    }

    /// Refit on a subset of coordinates with the same bandwidth rule and multipliers.
    pub fn marginal(&self, coords: &[usize]) -> Result<Self> {
        let sub = PseudoSample::new(coords.iter().map(|&j| self.pseudo_obs[j].clone()).collect())?;
        fit_kernel_copula(&sub, self.rule, self.multipliers.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaModel {
    Gaussian(GaussianCopula),
    Kernel(KernelCopula),
}

impl CopulaModel {
    pub fn dim(&self) -> usize {
        match self {
            CopulaModel::Gaussian(c) => c.dim(),
            CopulaModel::Kernel(c) => c.dim(),
        }
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        match self {
            CopulaModel::Gaussian(c) => c.density(u),
            CopulaModel::Kernel(c) => c.density(u),
        }
    }

    pub fn marginal(&self, coords: &[usize]) -> Result<Self> {
        Ok(match self {
            CopulaModel::Gaussian(c) => CopulaModel::Gaussian(c.marginal(coords)?),
            CopulaModel::Kernel(c) => CopulaModel::Kernel(c.marginal(coords)?),
        })
    }
}

/// Gaussian copula density; see [`GaussianCopula::density`].
pub fn gaussian_copula_density(c: &GaussianCopula, u: &[f64]) -> f64 {
    c.density(u)
}

/// Kernel copula density; see [`KernelCopula::density`].
pub fn kernel_copula_density(c: &KernelCopula, u: &[f64]) -> f64 {
    c.density(u)
}
