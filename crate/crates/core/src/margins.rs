//! One-dimensional marginal models: Gaussian (maximum likelihood) and
//! integrated Gaussian kernel, both accepting per-observation multipliers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Returns the multiplier for observation `i`, or 1 when unweighted.
#[inline]
pub(crate) fn weight_at(m: Option<&[f64]>, i: usize) -> f64 {
    m.map_or(1.0, |m| m[i])
}

pub(crate) fn check_multipliers(m: Option<&[f64]>, n: usize) -> Result<()> {
    let Some(m) = m else { return Ok(()) };
    if m.len() != n {
        return Err(Error::DimensionMismatch(format!("{} multipliers for {n} observations", m.len())));
    }
    if m.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
        return Err(Error::InvalidArgument("multipliers must be finite and nonnegative".into()));
    }
    let total: f64 = m.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights(total));
    }
    Ok(())
}

/// Weighted mean and weighted MLE standard deviation (denominator Σm).
pub(crate) fn weighted_mean_sd(z: &[f64], m: Option<&[f64]>) -> (f64, f64) {
    let mut total = 0.0;
    let mut sum = 0.0;
    for (i, &v) in z.iter().enumerate() {
        let w = weight_at(m, i);
        total += w;
        sum += w * v;
    }
    let mean = sum / total;
    let mut ss = 0.0;
    for (i, &v) in z.iter().enumerate() {
        let d = v - mean;
        ss += weight_at(m, i) * d * d;
    }
    (mean, (ss / total).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMargin {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianMargin {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("gaussian margin N({mu}, {sigma}²)")));
        }
        Ok(Self { mu, sigma })
    }
}

/// Maximum-likelihood Gaussian fit, optionally multiplier-weighted.
pub fn fit_gaussian_margin(z: &[f64], m: Option<&[f64]>) -> Result<GaussianMargin> {
    if z.len() < 2 {
        return Err(Error::TooFewObservations { required: 2, got: z.len() });
    }
    check_multipliers(m, z.len())?;
    let (mu, sigma) = weighted_mean_sd(z, m);
    if !(sigma > 0.0) {
        return Err(Error::DegenerateMargin);
    }
    Ok(GaussianMargin { mu, sigma })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginBandwidth {
    /// 1.06 · σ̂ · n^(-1/5)
    NormalReference,
    Fixed(f64),
}

/// Smoothed CDF `Σ m_i Φ((y - z_i)/b) / Σ m_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMargin {
    centers: Vec<f64>,
    bandwidth: f64,
    multipliers: Option<Vec<f64>>,
    total: f64,
    lo: f64,
    hi: f64,
}

impl KernelMargin {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let m = self.multipliers.as_deref();
        let b = self.bandwidth;
        let s: f64 = self
            .centers
            .iter()
            .enumerate()
            .map(|(i, &z)| weight_at(m, i) * normal::cdf((y - z) / b))
            .sum();
        s / self.total
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let m = self.multipliers.as_deref();
        let b = self.bandwidth;
        let s: f64 = self
            .centers
            .iter()
            .enumerate()
            .map(|(i, &z)| weight_at(m, i) * normal::pdf((y - z) / b))
            .sum();
        s / (b * self.total)
    }

    /// Bisection on the CDF to |F(y) - t| ≤ 1e-10.
    pub fn quantile(&self, t: f64) -> f64 {
        const TOL: f64 = 1e-10;
        let mut step = (self.hi - self.lo).max(self.bandwidth);
        let mut lo = self.lo - self.bandwidth;
        let mut hi = self.hi + self.bandwidth;
        for _ in 0..64 {
            if self.cdf(lo) <= t {
                break;
            }
            lo -= step;
            step *= 2.0;
        }
        let mut step = (self.hi - self.lo).max(self.bandwidth);
        for _ in 0..64 {
            if self.cdf(hi) >= t {
                break;
            }
            hi += step;
            step *= 2.0;
        }
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let f = self.cdf(mid);
            if (f - t).abs() <= TOL {
                break;
            }
            if f < t {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
                break;
            }
        }
        mid
    }
}

pub fn fit_kernel_margin(z: &[f64], rule: MarginBandwidth, m: Option<&[f64]>) -> Result<KernelMargin> {
    if z.len() < 2 {
        return Err(Error::TooFewObservations { required: 2, got: z.len() });
    }
    check_multipliers(m, z.len())?;
    let (_, sd) = weighted_mean_sd(z, m);
    if !(sd > 0.0) {
        return Err(Error::DegenerateMargin);
    }
    let bandwidth = match rule {
        MarginBandwidth::NormalReference => 1.06 * sd * (z.len() as f64).powf(-0.2),
        MarginBandwidth::Fixed(b) if b > 0.0 && b.is_finite() => b,
        MarginBandwidth::Fixed(b) => {
            return Err(Error::InvalidArgument(format!("kernel bandwidth must be positive, got {b}")))
        }
    };
    let total = (0..z.len()).map(|i| weight_at(m, i)).sum();
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(KernelMargin {
        centers: z.to_vec(),
        bandwidth,
        multipliers: m.map(<[f64]>::to_vec),
        total,
        lo,
        hi,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginModel {
    Gaussian(GaussianMargin),
    Kernel(KernelMargin),
}

impl MarginModel {
    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            MarginModel::Gaussian(g) => normal::cdf((y - g.mu) / g.sigma),
            MarginModel::Kernel(k) => k.cdf(y),
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match self {
            MarginModel::Gaussian(g) => normal::pdf((y - g.mu) / g.sigma) / g.sigma,
            MarginModel::Kernel(k) => k.pdf(y),
        }
    }

    pub fn quantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!("quantile level {t} outside (0, 1)")));
        }
        Ok(match self {
            MarginModel::Gaussian(g) => g.mu + g.sigma * normal::quantile(t),
            MarginModel::Kernel(k) => k.quantile(t),
        })
    }
}

/// F⁻¹(t) for either margin type.
pub fn margin_quantile(model: &MarginModel, t: f64) -> Result<f64> {
    model.quantile(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Φ from the Maclaurin series of erf, independent of the library path.
    fn phi_series(x: f64) -> f64 {
        let z = x / std::f64::consts::SQRT_2;
        let mut term = z;
        let mut sum = z;
        for k in 1..200 {
            term *= -z * z / k as f64;
            sum += term / (2 * k + 1) as f64;
        }
        0.5 + sum / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn gaussian_two_points() {
        let g = fit_gaussian_margin(&[-1.0, 1.0], None).unwrap();
        assert_eq!((g.mu, g.sigma), (0.0, 1.0));
    }

    #[test]
    fn gaussian_constant_is_degenerate() {
        assert_eq!(fit_gaussian_margin(&[5.0, 5.0, 5.0], None), Err(Error::DegenerateMargin));
    }

    #[test]
    fn gaussian_large_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let g = fit_gaussian_margin(&z, None).unwrap();
        assert!(g.mu.abs() < 0.1 && (g.sigma - 1.0).abs() < 0.1, "{g:?}");
    }

    #[test]
    fn gaussian_shift_equivariance() {
        let z = [0.3, -1.2, 2.5, 0.7, 1.1];
        let shifted: Vec<f64> = z.iter().map(|v| v + 10.0).collect();
        let a = fit_gaussian_margin(&z, None).unwrap();
        let b = fit_gaussian_margin(&shifted, None).unwrap();
        assert!((b.mu - a.mu - 10.0).abs() < 1e-12);
        assert!((b.sigma - a.sigma).abs() < 1e-12);
    }

    #[test]
    fn unit_multipliers_match_unweighted_fit() {
        let z = [0.3, -1.2, 2.5, 0.7, 1.1];
        let ones = [1.0; 5];
        assert_eq!(fit_gaussian_margin(&z, None), fit_gaussian_margin(&z, Some(&ones)));
        let a = fit_kernel_margin(&z, MarginBandwidth::NormalReference, None).unwrap();
        let b = fit_kernel_margin(&z, MarginBandwidth::NormalReference, Some(&ones)).unwrap();
        assert_eq!(a.bandwidth(), b.bandwidth());
        for y in [-2.0, 0.0, 0.5, 3.0] {
            assert_eq!(a.cdf(y), b.cdf(y));
        }
    }

    #[test]
    fn kernel_rejects_single_point_and_bad_bandwidth() {
        assert!(fit_kernel_margin(&[0.0], MarginBandwidth::NormalReference, None).is_err());
        assert!(fit_kernel_margin(&[0.0, 1.0], MarginBandwidth::Fixed(0.0), None).is_err());
        assert_eq!(
            fit_kernel_margin(&[2.0, 2.0], MarginBandwidth::NormalReference, None).unwrap_err(),
            Error::DegenerateMargin
        );
    }

    #[test]
    fn kernel_cdf_values() {
        let k = fit_kernel_margin(&[-1.0, 1.0], MarginBandwidth::Fixed(1.0), None).unwrap();
        assert!((k.cdf(0.0) - 0.5).abs() < 1e-15);
        let k = fit_kernel_margin(&[0.0, 2.0], MarginBandwidth::Fixed(0.5), None).unwrap();
        assert!((k.cdf(1.0) - 0.5).abs() < 1e-15);
        let expected = 0.5 * (phi_series(0.0) + phi_series(-4.0));
        assert!((expected - 0.250_015_8).abs() < 1e-7);
        assert!((k.cdf(0.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn normal_reference_rule() {
        let z = [-1.0, 1.0];
        let k = fit_kernel_margin(&z, MarginBandwidth::NormalReference, None).unwrap();
        assert!((k.bandwidth() - 1.06 * 2f64.powf(-0.2)).abs() < 1e-15);
    }

    #[test]
    fn quantiles() {
        let g = MarginModel::Gaussian(GaussianMargin::new(0.0, 1.0).unwrap());
        assert!(g.quantile(0.5).unwrap().abs() < 1e-15);
        let g = MarginModel::Gaussian(GaussianMargin::new(2.0, 3.0).unwrap());
        // 1.959964 from Newton iteration on the erf series oracle
        let mut x: f64 = 2.0;
        for _ in 0..50 {
            x -= (phi_series(x) - 0.975) / crate::normal::pdf(x);
        }
        assert!((x - 1.959_964).abs() < 1e-6);
        assert!((g.quantile(0.975).unwrap() - (2.0 + 3.0 * x)).abs() < 1e-9);
        assert!((g.quantile(0.975).unwrap() - 7.8799).abs() < 1e-3);
        let k = MarginModel::Kernel(fit_kernel_margin(&[-1.0, 1.0], MarginBandwidth::Fixed(1.0), None).unwrap());
        assert!(k.quantile(0.5).unwrap().abs() < 1e-9);
        assert!(g.quantile(1.0).is_err());
    }

    fn sample_kernel() -> KernelMargin {
        let z = [0.2, -0.7, 1.9, 3.3, 0.4, -2.1, 1.0, 0.9];
        fit_kernel_margin(&z, MarginBandwidth::NormalReference, None).unwrap()
    }

    #[test]
    fn kernel_cdf_is_a_distribution_function() {
        let k = sample_kernel();
        let b = k.bandwidth();
        let (lo, hi) = (-2.1 - 10.0 * b, 3.3 + 10.0 * b);
        assert!(k.cdf(lo) < 1e-15 && k.cdf(lo) > 0.0);
        assert!(1.0 - k.cdf(hi) < 1e-15);
        let mut prev = 0.0;
        for i in 0..=2000 {
            let f = k.cdf(lo + (hi - lo) * i as f64 / 2000.0);
            assert!(f >= prev && f < 1.0 + 1e-15);
            prev = f;
        }
    }

    #[test]
    fn kernel_cdf_tends_to_ecdf() {
        let mut z = vec![0.2, -0.7, 1.9, 3.3, 0.4, -2.1, 1.0, 0.9];
        let range = 3.3 - -2.1;
        let k = fit_kernel_margin(&z, MarginBandwidth::Fixed(1e-6 * range), None).unwrap();
        z.sort_by(f64::total_cmp);
        for (i, w) in z.windows(2).enumerate() {
            let mid = 0.5 * (w[0] + w[1]);
            let ecdf = (i + 1) as f64 / z.len() as f64;
            assert!((k.cdf(mid) - ecdf).abs() < 1e-6);
        }
    }

    #[test]
    fn kernel_density_integrates_to_one() {
        let k = sample_kernel();
        let b = k.bandwidth();
        let (lo, hi) = (-2.1 - 8.0 * b, 3.3 + 8.0 * b);
        let steps = 20_000;
        let h = (hi - lo) / steps as f64;
        let mut s = 0.5 * (k.pdf(lo) + k.pdf(hi));
        for i in 1..steps {
            s += k.pdf(lo + h * i as f64);
        }
        assert!((s * h - 1.0).abs() < 1e-4);
    }

    #[test]
    fn kernel_quantile_is_right_inverse() {
        let k = sample_kernel();
        for t in [0.01, 0.1, 0.5, 0.9, 0.99] {
            assert!((k.cdf(k.quantile(t)) - t).abs() <= 1e-8);
        }
    }
}
