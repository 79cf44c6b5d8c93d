//! Shared domain types: observed samples, pseudo-observations, index grids,
//! and the estimation result record.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bootstrap::BandResult;
use crate::error::{Error, Result};
use crate::identify::DerivativeInfo;
use crate::margins::MarginModel;

/// Pseudo-observations are clamped into `[PIT_EPS, 1 - PIT_EPS]`.
pub const PIT_EPS: f64 = 1e-10;

#[inline]
pub fn clamp_unit(u: f64) -> f64 {
    u.clamp(PIT_EPS, 1.0 - PIT_EPS)
}

/// `n` joint observations of a response block (q columns) and a covariate
/// block (p columns), stored column-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    response_names: Vec<String>,
    covariate_names: Vec<String>,
    responses: Vec<Vec<f64>>,
    covariates: Vec<Vec<f64>>,
}

impl Sample {
    /// Builds a sample with generated column names `y1..yq`, `x1..xp`.
    pub fn new(responses: Vec<Vec<f64>>, covariates: Vec<Vec<f64>>) -> Result<Self> {
        let response_names = (1..=responses.len()).map(|j| format!("y{j}")).collect();
        let covariate_names = (1..=covariates.len()).map(|j| format!("x{j}")).collect();
        Self::with_names(response_names, responses, covariate_names, covariates)
    }

    pub fn with_names(
        response_names: Vec<String>,
        responses: Vec<Vec<f64>>,
        covariate_names: Vec<String>,
        covariates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if responses.is_empty() {
            return Err(Error::InvalidArgument("at least one response column is required".into()));
        }
        if response_names.len() != responses.len() || covariate_names.len() != covariates.len() {
            return Err(Error::DimensionMismatch("column names vs columns".into()));
        }
        let n = responses[0].len();
        for (name, col) in response_names
            .iter()
            .zip(&responses)
            .chain(covariate_names.iter().zip(&covariates))
        {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column `{name}` has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: row + 1, column: name.clone() });
            }
        }
        if n < 2 {
            return Err(Error::TooFewObservations { required: 2, got: n });
        }
        Ok(Self { response_names, covariate_names, responses, covariates })
    }

    pub fn n(&self) -> usize {
        self.responses[0].len()
    }

    pub fn q(&self) -> usize {
        self.responses.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.len()
    }

    pub fn response(&self, j: usize) -> &[f64] {
        &self.responses[j]
    }

    pub fn covariate(&self, j: usize) -> &[f64] {
        &self.covariates[j]
    }

    pub fn response_names(&self) -> &[String] {
        &self.response_names
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// All q + p columns, responses first.
    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.responses.iter().chain(&self.covariates).map(Vec::as_slice)
    }

    pub fn response_row(&self, i: usize) -> Vec<f64> {
        self.responses.iter().map(|c| c[i]).collect()
    }

    pub fn covariate_row(&self, i: usize) -> Vec<f64> {
        self.covariates.iter().map(|c| c[i]).collect()
    }

    /// Reorders rows so that row `k` of the result is row `order[k]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let pick = |c: &Vec<f64>| order.iter().map(|&i| c[i]).collect::<Vec<_>>();
        Ok(Self {
            response_names: self.response_names.clone(),
            covariate_names: self.covariate_names.clone(),
            responses: self.responses.iter().map(pick).collect(),
            covariates: self.covariates.iter().map(pick).collect(),
        })
    }

    /// CSV text with a header row; floats use the shortest round-tripping form.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .response_names
            .iter()
            .chain(&self.covariate_names)
            .map(String::as_str)
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n() {
            for (k, col) in self.columns().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write!(out, "{}", col[i]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Reads a CSV file with a header row, selecting response and covariate
/// columns by name. Rows with empty cells are rejected.
pub fn load_sample(
    path: impl AsRef<Path>,
    response_cols: &[String],
    covariate_cols: &[String],
) -> Result<Sample> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_sample(&text, response_cols, covariate_cols)
}

/// Parses CSV text; see [`load_sample`]. Row numbers in errors count data
/// rows from 1, excluding the header.
pub fn parse_sample(text: &str, response_cols: &[String], covariate_cols: &[String]) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    let locate = |name: &String| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))
    };
    let response_idx = response_cols.iter().map(locate).collect::<Result<Vec<_>>>()?;
    let covariate_idx = covariate_cols.iter().map(locate).collect::<Result<Vec<_>>>()?;

    let mut responses = vec![Vec::new(); response_idx.len()];
    let mut covariates = vec![Vec::new(); covariate_idx.len()];
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let cell = |idx: usize, name: &String| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::MissingCell { row, column: name.clone() });
            }
            raw.parse::<f64>().map_err(|_| Error::NonNumeric {
                row,
                column: name.clone(),
                value: raw.to_string(),
            })
        };
        for (k, (&idx, name)) in response_idx.iter().zip(response_cols).enumerate() {
            responses[k].push(cell(idx, name)?);
        }
        for (k, (&idx, name)) in covariate_idx.iter().zip(covariate_cols).enumerate() {
            covariates[k].push(cell(idx, name)?);
        }
    }
    Sample::with_names(
        response_cols.to_vec(),
        responses,
        covariate_cols.to_vec(),
        covariates,
    )
}

/// Observations mapped through their margins, one column per coordinate,
/// every entry strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    columns: Vec<Vec<f64>>,
}

impl PseudoSample {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!("pseudo-observation column {j}")));
            }
            if col.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
                return Err(Error::InvalidArgument(format!(
                    "pseudo-observation column {j} leaves the open unit interval"
                )));
            }
        }
        Ok(Self { columns })
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Keeps the listed coordinates, in the given order.
    pub fn select(&self, coords: &[usize]) -> Self {
        Self { columns: coords.iter().map(|&j| self.columns[j].clone()).collect() }
    }
}

/// Probability integral transform of every column through its margin.
pub fn pit(sample: &Sample, margins: &[MarginModel]) -> Result<PseudoSample> {
    let d = sample.q() + sample.p();
    if margins.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} margins for {d} columns",
            margins.len()
        )));
    }
    let columns = sample
        .columns()
        .zip(margins)
        .map(|(col, margin)| col.iter().map(|&v| clamp_unit(margin.cdf(v))).collect())
        .collect();
    Ok(PseudoSample { columns })
}

/// Rescaled ranks `rank / (n + 1)` per column; ties share the average rank.
///
/// Invariant under any strictly increasing transform of a column.
pub fn rank_pseudo_observations(sample: &Sample) -> PseudoSample {
    let columns = sample.columns().map(scaled_ranks).collect();
    PseudoSample { columns }
}

fn scaled_ranks(col: &[f64]) -> Vec<f64> {
    let n = col.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && col[order[end]] == col[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg / (n as f64 + 1.0);
        }
        start = end;
    }
    ranks
}

/// Index set T of the identifying-function family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexGrid {
    /// Families without an index (mean, exponential family, IV).
    Unindexed,
    Levels(Vec<f64>),
}

impl IndexGrid {
    /// Strictly increasing levels inside (0, 1).
    pub fn levels(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("index grid is empty".into()));
        }
        if values.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::InvalidArgument("index levels must lie in (0, 1)".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("index levels must be strictly increasing".into()));
        }
        Ok(IndexGrid::Levels(values))
    }

    pub fn len(&self) -> usize {
        match self {
            IndexGrid::Unindexed => 1,
            IndexGrid::Levels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = Option<f64>> + '_> {
        match self {
            IndexGrid::Unindexed => Box::new(std::iter::once(None)),
            IndexGrid::Levels(v) => Box::new(v.iter().map(|&t| Some(t))),
        }
    }
}

/// Summary of the weight vector ŵ_x(Y_i) used by a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostics {
    pub n: usize,
    /// Sum of the raw (unnormalized) weights.
    pub weight_sum: f64,
    pub effective_sample_size: f64,
    pub min_weight: f64,
    pub max_weight: f64,
    /// Largest weight after rescaling the weights to sum to n.
    pub max_normalized_weight: f64,
}

/// θ̂ at one index level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub t: Option<f64>,
    pub theta: Vec<f64>,
    pub derivative: DerivativeInfo,
    pub iterations: usize,
    /// |Σ w ψ(θ̂)| / Σ w (max-norm for vector-valued ψ).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub x0: Vec<f64>,
    pub t_grid: IndexGrid,
    pub points: Vec<PointEstimate>,
    pub diagnostics: WeightDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<BandResult>,
}

impl EstimateResult {
    /// All θ̂ coordinates, index level by index level.
    pub fn flat_theta(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.theta.iter().copied()).collect()
    }
}
