//! End-to-end point estimation: fit margins and copula, condition on x0,
//! solve the weighted equation over the index grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::Family;
use crate::model::{EstimateResult, Sample};
use crate::solver::{solve_path_with_weights, SolverConfig};
use crate::weights::{evaluate_weights, fit_weight_model, WeightEstimator, WeightModel};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimator {
    pub weights: WeightEstimator,
    pub solver: SolverConfig,
}

impl Estimator {
    pub fn new(weights: WeightEstimator) -> Self {
        Self { weights, solver: SolverConfig::default() }
    }
}

fn check_x0(sample: &Sample, x0: &[f64]) -> Result<()> {
    if x0.len() != sample.p() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has {} entries, sample has {} covariates",
            x0.len(),
            sample.p()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("x0 must be finite".into()));
    }
    Ok(())
}

/// θ̂ over the family's index grid at conditioning point `x0`.
pub fn estimate(sample: &Sample, x0: &[f64], family: &Family, estimator: &Estimator) -> Result<EstimateResult> {
    estimate_weighted(sample, x0, family, estimator, None)
}

/// Same pipeline with every fit weighted by observation multipliers `m`,
/// which also multiply the estimating equation. `None` is the point estimate.
pub fn estimate_weighted(
    sample: &Sample,
    x0: &[f64],
    family: &Family,
    estimator: &Estimator,
    m: Option<&[f64]>,
) -> Result<EstimateResult> {
    check_x0(sample, x0)?;
    let model = fit_weight_model(sample, &estimator.weights, m)?;
    estimate_from_model(&model, sample, x0, family, &estimator.solver, m)
}

/// Solves at `x0` with an already fitted weight model.
pub fn estimate_from_model(
    model: &WeightModel,
    sample: &Sample,
    x0: &[f64],
    family: &Family,
    solver: &SolverConfig,
    m: Option<&[f64]>,
) -> Result<EstimateResult> {
    check_x0(sample, x0)?;
    let w = model.condition(x0)?;
    let weights = evaluate_weights(&w, sample)?;
    solve_path_with_weights(family, sample, x0, &weights.values, m, solver)
}

/// One fit of margins and copula shared across several conditioning points.
pub fn estimate_many(sample: &Sample, x0s: &[Vec<f64>], family: &Family, estimator: &Estimator) -> Result<Vec<EstimateResult>> {
    let model = fit_weight_model(sample, &estimator.weights, None)?;
    x0s.iter()
        .map(|x0| estimate_from_model(&model, sample, x0, family, &estimator.solver, None))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x0_dimension_checked() {
        let s = Sample::new(vec![vec![1.0, 2.0, 3.0]], vec![vec![0.0, 1.0, 0.5]]).unwrap();
        let e = Estimator::default();
        assert!(matches!(estimate(&s, &[], &Family::Mean, &e), Err(Error::DimensionMismatch(_))));
        assert!(estimate(&s, &[0.2], &Family::Mean, &e).is_ok());
    }

    #[test]
    fn unconditional_mean_is_sample_mean() {
        let s = Sample::new(vec![vec![1.0, 2.0, 6.0]], vec![]).unwrap();
        let r = estimate(&s, &[], &Family::Mean, &Estimator::default()).unwrap();
        assert_eq!(r.points[0].theta, vec![3.0]);
    }
}
