//! Conditional means, quantiles, expectiles, exponential-family parameters and
//! instrumental-variable coefficients obtained by solving copula-weighted
//! unconditional estimating equations.
//!
//! The conditional equation E{ψ_θ(Y) | X = x} = 0 is replaced by
//! Σ_i ψ_θ(Y_i) ŵ_x(Y_i) = 0 where ŵ_x is a ratio of copula densities
//! estimated from the data ([`weights`]). A multiplier bootstrap that refits
//! the whole pipeline gives pointwise and uniform confidence bands
//! ([`bootstrap`]).

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod copula;
pub mod error;
pub mod estimator;
pub mod identify;
pub mod margins;
pub mod model;
pub mod normal;
pub mod simulate;
pub mod solver;
pub mod weights;

pub use bootstrap::{BandResult, MultiplierSpec};
pub use copula::{CopulaBandwidth, CopulaModel, GaussianCopula, KernelCopula};
pub use error::{Error, Result};
pub use estimator::{estimate, Estimator};
pub use identify::{DerivativeInfo, ExpFamily, Family, PolynomialBasis};
pub use margins::{GaussianMargin, KernelMargin, MarginBandwidth, MarginModel};
pub use model::{load_sample, EstimateResult, IndexGrid, PointEstimate, PseudoSample, Sample, WeightDiagnostics};
pub use solver::SolverConfig;
pub use weights::{WeightEstimator, WeightFn, WeightModel};
