use clap::{Args, Parser, Subcommand};

/// Conditional means, quantiles, expectiles, exponential-family and IV
/// parameters from copula-weighted estimating equations.
#[derive(Debug, Parser)]
#[command(name = "eecop", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimates at one or more conditioning points.
    Fit(FitArgs),
    /// Point estimates with multiplier-bootstrap confidence bands.
    Bootstrap(BootstrapArgs),
    /// Monte Carlo RMSE study; writes a CSV table.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// Flat TOML file of `key = value` settings; flags take precedence.
    #[arg(long)]
    pub config: Option<String>,
    /// CSV file with a header row.
    #[arg(long)]
    pub data: Option<String>,
    /// Response column(s), comma separated (outcome,treatment,instrument for iv).
    #[arg(long)]
    pub response: Option<String>,
    /// Covariate columns, comma separated.
    #[arg(long)]
    pub covariates: Option<String>,
    /// mean | quantile | expectile | expfam | iv
    #[arg(long)]
    pub family: Option<String>,
    /// Index levels for quantile and expectile, comma separated.
    #[arg(long)]
    pub t: Option<String>,
    /// gaussian | poisson | bernoulli (family = expfam)
    #[arg(long)]
    pub expfam: Option<String>,
    /// Polynomial degree of the instrument basis (family = iv).
    #[arg(long)]
    pub basis_degree: Option<String>,
    /// Conditioning point as `v1,v2,...`, or a CSV file with covariate columns.
    #[arg(long)]
    pub x0: Option<String>,
    /// parametric | kernel
    #[arg(long)]
    pub weights: Option<String>,
    /// Kernel copula bandwidth: paper_rate | scaled_diagonal | <h>
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Kernel margin bandwidth: normal_reference | <b>
    #[arg(long)]
    pub margin_bandwidth: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Number of bootstrap replicates.
    #[arg(long = "B")]
    pub replicates: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub threads: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<String>,
    /// linear_gaussian | mean_shift | variance_shift
    #[arg(long)]
    pub dgp: Option<String>,
    /// Number of covariates.
    #[arg(long)]
    pub p: Option<String>,
    /// Sample sizes, comma separated.
    #[arg(long)]
    pub n: Option<String>,
    /// ols, nadaraya_watson, eecop_param, eecop_kernel, oracle (comma separated)
    #[arg(long)]
    pub estimators: Option<String>,
    /// mean | quantile
    #[arg(long)]
    pub family: Option<String>,
    /// Quantile level (family = quantile).
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    /// Evaluation points drawn per replicate.
    #[arg(long)]
    pub eval_points: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub threads: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

impl FitArgs {
    pub fn pairs(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![
            ("data", self.data.as_ref()),
            ("response", self.response.as_ref()),
            ("covariates", self.covariates.as_ref()),
            ("family", self.family.as_ref()),
            ("t", self.t.as_ref()),
            ("expfam", self.expfam.as_ref()),
            ("basis_degree", self.basis_degree.as_ref()),
            ("x0", self.x0.as_ref()),
            ("weights", self.weights.as_ref()),
            ("bandwidth", self.bandwidth.as_ref()),
            ("margin_bandwidth", self.margin_bandwidth.as_ref()),
            ("out", self.out.as_ref()),
        ]
    }
}

impl BootstrapArgs {
    pub fn pairs(&self) -> Vec<(&'static str, Option<&String>)> {
        let mut p = self.fit.pairs();
        p.extend([
            ("B", self.replicates.as_ref()),
            ("alpha", self.alpha.as_ref()),
            ("seed", self.seed.as_ref()),
            ("threads", self.threads.as_ref()),
        ]);
        p
    }
}

impl SimulateArgs {
    pub fn pairs(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![
            ("dgp", self.dgp.as_ref()),
            ("p", self.p.as_ref()),
            ("n", self.n.as_ref()),
            ("estimators", self.estimators.as_ref()),
            ("family", self.family.as_ref()),
            ("t", self.t.as_ref()),
            ("reps", self.reps.as_ref()),
            ("eval_points", self.eval_points.as_ref()),
            ("seed", self.seed.as_ref()),
            ("threads", self.threads.as_ref()),
            ("out", self.out.as_ref()),
        ]
    }
}
