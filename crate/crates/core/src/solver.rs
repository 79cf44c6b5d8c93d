//! Solvers for the weighted estimating equation Σ w_i ψ_{θ,t}(Y_i) = 0,
//! where w_i combines the copula weight with any bootstrap multiplier.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::{condition_number, equation_value, estimate_v, iv_moment_matrix, psi_expectile, ExpFamily, Family, PolynomialBasis, MAX_CONDITION};
use crate::model::{EstimateResult, PointEstimate, Sample};
use crate::weights::{evaluate_weights, weight_diagnostics, WeightFn};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Tolerance on the self-normalized equation value |Σwψ|/Σw.
    pub abs_tol: f64,
    pub max_iter: usize,
    pub bracket_expansion: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-9, max_iter: 200, bracket_expansion: 2.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || self.max_iter == 0 || !(self.bracket_expansion > 1.0) {
            return Err(Error::InvalidArgument(format!("invalid solver config {self:?}")));
        }
        Ok(())
    }
}

/// A root together with the iterations spent finding it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: f64,
    pub iterations: usize,
}

fn total_weight(w: &[f64]) -> Result<f64> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateWeights(total));
    }
    Ok(total)
}

fn check_lengths(y: &[f64], w: &[f64]) -> Result<()> {
    if y.len() != w.len() || y.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} responses, {} weights", y.len(), w.len())));
    }
    Ok(())
}

fn check_level(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!("level {t} outside (0, 1)")));
    }
    Ok(())
}

/// Σ w_i y_i / Σ w_i
pub fn solve_mean(y: &[f64], w: &[f64]) -> Result<f64> {
    check_lengths(y, w)?;
    let total = total_weight(w)?;
    Ok(y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total)
}

/// Weighted quantile: the smallest order statistic whose cumulative weight
/// reaches t·Σw. The equation changes sign there under the `≥ / <` convention.
pub fn solve_quantile(y: &[f64], w: &[f64], t: f64) -> Result<f64> {
    check_lengths(y, w)?;
    check_level(t)?;
    let total = total_weight(w)?;
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let target = t * total;
    let mut cum = 0.0;
    for &i in &order {
        cum += w[i];
        if cum >= target {
            return Ok(y[i]);
        }
    }
    Ok(y[*order.last().expect("nonempty")])
}

fn expectile_residual(y: &[f64], w: &[f64], t: f64, theta: f64, total: f64) -> f64 {
    y.iter().zip(w).map(|(&yi, &wi)| wi * psi_expectile(theta, t, yi)).sum::<f64>() / total
}

/// Asymmetric-weight fixed point started at the weighted mean, with a
/// bisection fallback on [min y, max y].
pub fn solve_expectile(y: &[f64], w: &[f64], t: f64, cfg: &SolverConfig) -> Result<Root> {
    check_lengths(y, w)?;
    check_level(t)?;
    cfg.validate()?;
    let total = total_weight(w)?;
    let mut theta = solve_mean(y, w)?;
    for iter in 0..cfg.max_iter {
        if expectile_residual(y, w, t, theta, total).abs() <= cfg.abs_tol {
            return Ok(Root { value: theta, iterations: iter });
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (&yi, &wi) in y.iter().zip(w) {
            let a = if yi >= theta { t * wi } else { (1.0 - t) * wi };
            num += a * yi;
            den += a;
        }
        let next = num / den;
        if next == theta {
            break;
        }
        theta = next;
    }
    // The map θ ↦ Σwψ is continuous and strictly decreasing, positive at min y
    // and negative at max y, so bisection always brackets the root.
    let mut lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut iterations = cfg.max_iter;
    loop {
        let mid = 0.5 * (lo + hi);
        let r = expectile_residual(y, w, t, mid, total);
        iterations += 1;
        if r.abs() <= cfg.abs_tol {
            return Ok(Root { value: mid, iterations });
        }
        if mid <= lo || mid >= hi {
            return Err(Error::NoConvergence { iterations, residual: r.abs() });
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Damped Newton on b'(θ) = Σ w a(y) / Σ w, started at θ = 0.
pub fn solve_expfam(y: &[f64], w: &[f64], spec: ExpFamily, cfg: &SolverConfig) -> Result<Root> {
    check_lengths(y, w)?;
    cfg.validate()?;
    let total = total_weight(w)?;
    let target = y.iter().zip(w).map(|(&yi, &wi)| wi * spec.sufficient(yi)).sum::<f64>() / total;
    if !spec.in_range(target) {
        return Err(Error::OutOfRange { target });
    }
    let mut theta = 0.0_f64;
    let mut resid = target - spec.b_prime(theta);
    for iter in 0..cfg.max_iter {
        if resid.abs() <= cfg.abs_tol {
            return Ok(Root { value: theta, iterations: iter });
        }
        let step = resid / spec.b_second(theta);
        let mut scale = 1.0;
        loop {
            let cand = theta + scale * step;
            let r = target - spec.b_prime(cand);
            if r.is_finite() && r.abs() < resid.abs() {
                theta = cand;
                resid = r;
                break;
            }
            scale *= 0.5;
            if scale < 1e-12 {
                return Err(Error::NoConvergence { iterations: iter, residual: resid.abs() });
            }
        }
    }
    if resid.abs() <= cfg.abs_tol {
        return Ok(Root { value: theta, iterations: cfg.max_iter });
    }
    Err(Error::NoConvergence { iterations: cfg.max_iter, residual: resid.abs() })
}

/// θ̂ = [Σ w b(y₃) b(y₂)ᵀ]⁻¹ Σ w b(y₃) y₁
pub fn solve_iv(y1: &[f64], y2: &[f64], y3: &[f64], w: &[f64], basis: &PolynomialBasis) -> Result<Vec<f64>> {
    check_lengths(y1, w)?;
    check_lengths(y2, w)?;
    check_lengths(y3, w)?;
    let total = total_weight(w)?;
    // Normalizing by Σw leaves the solution unchanged and keeps entries O(1).
    let m: DMatrix<f64> = iv_moment_matrix(basis, y2, y3, w) / total;
    let cond = condition_number(&m);
    if !(cond < MAX_CONDITION) {
        return Err(Error::IllConditioned { condition: cond });
    }
    let mut rhs = DVector::zeros(basis.len());
    for i in 0..w.len() {
        for (a, b) in basis.eval(y3[i]).into_iter().enumerate() {
            rhs[a] += w[i] * b * y1[i];
        }
    }
    rhs /= total;
    let sol = m
        .clone()
        .col_piv_qr()
        .solve(&rhs)
        .ok_or(Error::IllConditioned { condition: cond })?;
    Ok(sol.iter().copied().collect())
}

/// Solves a single index level with combined weights `w`.
pub fn solve_at(family: &Family, sample: &Sample, w: &[f64], t: Option<f64>, cfg: &SolverConfig) -> Result<(Vec<f64>, usize)> {
    let y = sample.response(0);
    let level = || t.ok_or_else(|| Error::InvalidArgument(format!("{} requires an index level", family.name())));
    Ok(match family {
        Family::Mean => (vec![solve_mean(y, w)?], 0),
        Family::Quantile { .. } => (vec![solve_quantile(y, w, level()?)?], 0),
        Family::Expectile { .. } => {
            let r = solve_expectile(y, w, level()?, cfg)?;
            (vec![r.value], r.iterations)
        }
        Family::ExpFam { spec } => {
            let r = solve_expfam(y, w, *spec, cfg)?;
            (vec![r.value], r.iterations)
        }
        Family::IvLinear { basis } => {
            if sample.q() < 3 {
                return Err(Error::DimensionMismatch("iv needs responses (outcome, treatment, instrument)".into()));
            }
            (solve_iv(y, sample.response(1), sample.response(2), w, basis)?, 0)
        }
    })
}

/// Solves every index level from raw weights ŵ_x(Y_i) and optional multipliers.
pub fn solve_path_with_weights(
    family: &Family,
    sample: &Sample,
    x0: &[f64],
    raw_weights: &[f64],
    multipliers: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<EstimateResult> {
    cfg.validate()?;
    if sample.q() < family.response_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} needs {} response columns, sample has {}",
            family.name(),
            family.response_dim(),
            sample.q()
        )));
    }
    let diagnostics = weight_diagnostics(raw_weights)?;
    let combined: Vec<f64> = match multipliers {
        None => raw_weights.to_vec(),
        Some(m) => {
            if m.len() != raw_weights.len() {
                return Err(Error::DimensionMismatch("multipliers vs observations".into()));
            }
            raw_weights.iter().zip(m).map(|(w, m)| w * m).collect()
        }
    };
    let grid = family.grid();
    let mut points = Vec::with_capacity(grid.len());
    for t in grid.iter() {
        let tag = |e: Error| match t {
            Some(t) => Error::AtIndex { t, source: Box::new(e) },
            None => e,
        };
        let (theta, iterations) = solve_at(family, sample, &combined, t, cfg).map_err(tag)?;
        let derivative = estimate_v(family, &theta, t, sample, &combined).map_err(tag)?;
        let residual = equation_value(family, &theta, t, sample, &combined)
            .into_iter()
            .fold(0.0, |a: f64, v| a.max(v.abs()));
        points.push(PointEstimate { t, theta, derivative, iterations, residual });
    }
    if let Family::Quantile { .. } = family {
        // no-op for a common weight vector; guards against crossing
        let mut values: Vec<f64> = points.iter().map(|p| p.theta[0]).collect();
        values.sort_by(f64::total_cmp);
        for (p, v) in points.iter_mut().zip(values) {
            p.theta[0] = v;
        }
    }
    Ok(EstimateResult { x0: x0.to_vec(), t_grid: grid, points, diagnostics, bands: None })
}

/// Evaluates ŵ_x on the sample and solves every index level.
pub fn solve_path(
    family: &Family,
    sample: &Sample,
    weight_fn: &WeightFn,
    multipliers: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<EstimateResult> {
    let weights = evaluate_weights(weight_fn, sample)?;
    solve_path_with_weights(family, sample, weight_fn.x0(), &weights.values, multipliers, cfg)
}
