//! Settings from a flat TOML file merged with command-line flags, then
//! validated into typed run configurations.

use std::collections::BTreeMap;
use std::str::FromStr;

use eecop_core::simulate::{DgpKind, Functional, RmseStudy, SimEstimator};
use eecop_core::{CopulaBandwidth, Estimator, ExpFamily, Family, MarginBandwidth, PolynomialBasis, WeightEstimator};

use crate::failure::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Raw string settings. Flags override file values key by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn toml_to_string(key: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|item| match item {
                toml::Value::Array(_) | toml::Value::Table(_) => {
                    Err(CliError::config("invalid_value", format!("`{key}` must be a flat list")))
                }
                other => toml_to_string(key, other),
            })
            .collect::<Result<Vec<_>>>()?
            .join(","),
        _ => return Err(CliError::config("invalid_value", format!("`{key}` must be a scalar or a list"))),
    })
}

impl Settings {
    /// `flags` lists every key the subcommand accepts; file keys outside it
    /// are rejected.
    pub fn merge(config_path: Option<&str>, flags: &[(&'static str, Option<&String>)]) -> Result<Self> {
        let mut settings = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config("read_failed", format!("{path}: {e}")))?;
                let allowed: Vec<&str> = flags.iter().map(|(k, _)| *k).collect();
                Self::from_toml(&text, &allowed)?
            }
            None => Self::default(),
        };
        for (key, value) in flags {
            if let Some(v) = value {
                settings.values.insert((*key).to_string(), (*v).clone());
            }
        }
        Ok(settings)
    }

    pub fn from_toml(text: &str, allowed: &[&str]) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::config("parse_failed", e.message()))?;
        let mut values = BTreeMap::new();
        for (raw_key, v) in &table {
            let key = raw_key.replace('-', "_");
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::config("unknown_key", format!("unknown key `{raw_key}`")));
            }
            values.insert(key.clone(), toml_to_string(&key, v)?);
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).map(str::trim).filter(|s| !s.is_empty())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| CliError::config(&format!("{key}_required"), format!("`{key}` is required")))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|_| CliError::config("invalid_value", format!("`{key}`: cannot parse `{s}`")))
            })
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|s| {
                s.split(',')
                    .map(|item| {
                        let item = item.trim();
                        item.parse::<T>()
                            .map_err(|_| CliError::config("invalid_value", format!("`{key}`: cannot parse `{item}`")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn names(&self, key: &str) -> Result<Option<Vec<String>>> {
        let list: Option<Vec<String>> = self.list(key)?;
        if let Some(names) = &list {
            if names.iter().any(String::is_empty) {
                return Err(CliError::config("invalid_value", format!("`{key}` contains an empty name")));
            }
        }
        Ok(list)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum X0Spec {
    Inline(Vec<f64>),
    File(String),
    /// No covariates: the unconditional functional.
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub data: String,
    pub response: Vec<String>,
    pub covariates: Vec<String>,
    pub family: Family,
    pub x0: X0Spec,
    pub estimator: Estimator,
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub fit: FitConfig,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub study: RmseStudy,
    pub threads: Option<usize>,
    pub out: Option<String>,
}

fn parse_family(s: &Settings) -> Result<Family> {
    let name = s.require("family")?;
    let levels: Option<Vec<f64>> = s.list("t")?;
    let needs_t = matches!(name, "quantile" | "expectile");
    if needs_t && levels.is_none() {
        return Err(CliError::config("t_required", format!("family `{name}` needs a t grid")));
    }
    if !needs_t && levels.is_some() {
        return Err(CliError::config("t_not_allowed", format!("family `{name}` takes no t grid")));
    }
    if name != "expfam" && s.get("expfam").is_some() {
        return Err(CliError::config("inconsistent", "`expfam` is only used with family = expfam"));
    }
    if name != "iv" && s.get("basis_degree").is_some() {
        return Err(CliError::config("inconsistent", "`basis_degree` is only used with family = iv"));
    }
    let grid_err = |e: eecop_core::Error| CliError::config("invalid_t", e.to_string());
    Ok(match name {
        "mean" => Family::Mean,
        "quantile" => Family::quantile(levels.unwrap_or_default()).map_err(grid_err)?,
        "expectile" => Family::expectile(levels.unwrap_or_default()).map_err(grid_err)?,
        "expfam" => {
            let kind = s.require("expfam")?;
            let spec = ExpFamily::from_name(kind)
                .ok_or_else(|| CliError::config("invalid_value", format!("unknown expfam `{kind}`")))?;
            Family::ExpFam { spec }
        }
        "iv" => {
            let degree: usize = s.parse("basis_degree")?.unwrap_or(1);
            if degree == 0 {
                return Err(CliError::config("invalid_value", "`basis_degree` must be at least 1"));
            }
            Family::IvLinear { basis: PolynomialBasis::new(degree) }
        }
        other => return Err(CliError::config("invalid_value", format!("unknown family `{other}`"))),
    })
}

fn parse_estimator(s: &Settings) -> Result<Estimator> {
    let kind = s.get("weights").unwrap_or("parametric");
    let weights = match kind {
        "parametric" | "parametric_gaussian" => {
            if s.get("bandwidth").is_some() || s.get("margin_bandwidth").is_some() {
                return Err(CliError::config("inconsistent", "bandwidths apply to weights = kernel only"));
            }
            WeightEstimator::ParametricGaussian
        }
        "kernel" => {
            let copula = match s.get("bandwidth") {
                None | Some("paper_rate") => CopulaBandwidth::PaperRate,
                Some("scaled_diagonal") => CopulaBandwidth::ScaledDiagonal,
                Some(_) => CopulaBandwidth::Fixed(positive(s, "bandwidth")?),
            };
            let margin = match s.get("margin_bandwidth") {
                None | Some("normal_reference") => MarginBandwidth::NormalReference,
                Some(_) => MarginBandwidth::Fixed(positive(s, "margin_bandwidth")?),
            };
            WeightEstimator::Kernel { margin, copula }
        }
        other => return Err(CliError::config("invalid_value", format!("unknown weights estimator `{other}`"))),
    };
    Ok(Estimator::new(weights))
}

fn positive(s: &Settings, key: &str) -> Result<f64> {
    match s.parse::<f64>(key)? {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(CliError::config("invalid_value", format!("`{key}` must be a positive number"))),
    }
}

fn threads(s: &Settings) -> Result<Option<usize>> {
    match s.parse::<usize>("threads")? {
        Some(0) => Err(CliError::config("invalid_value", "`threads` must be at least 1")),
        t => Ok(t),
    }
}

pub fn fit_config(s: &Settings) -> Result<FitConfig> {
    let data = s.require("data")?.to_string();
    let response = s.names("response")?.ok_or_else(|| CliError::config("response_required", "`response` is required"))?;
    let covariates = s.names("covariates")?.unwrap_or_default();
    let family = parse_family(s)?;
    if response.len() < family.response_dim() {
        return Err(CliError::config(
            "response_count",
            format!("family `{}` needs {} response columns", family.name(), family.response_dim()),
        ));
    }
    let x0 = match (s.get("x0"), covariates.is_empty()) {
        (None, true) => X0Spec::Empty,
        (None, false) => return Err(CliError::config("x0_required", "`x0` is required when covariates are given")),
        (Some(_), true) => return Err(CliError::config("inconsistent", "`x0` given without covariates")),
        (Some(raw), false) => match raw.split(',').map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>() {
            Ok(values) => {
                if values.len() != covariates.len() {
                    return Err(CliError::config(
                        "x0_dimension",
                        format!("x0 has {} entries for {} covariates", values.len(), covariates.len()),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::config("invalid_value", "x0 must be finite"));
                }
                X0Spec::Inline(values)
            }
            Err(_) => X0Spec::File(raw.to_string()),
        },
    };
    Ok(FitConfig {
        data,
        response,
        covariates,
        family,
        x0,
        estimator: parse_estimator(s)?,
        out: s.get("out").map(str::to_string),
    })
}

pub fn bootstrap_config(s: &Settings) -> Result<BootstrapConfig> {
    let fit = fit_config(s)?;
    let replicates: usize = s.parse("B")?.unwrap_or(200);
    if replicates == 0 {
        return Err(CliError::config("invalid_replicates", "`B` must be at least 1"));
    }
    let alpha: f64 = s.parse("alpha")?.unwrap_or(0.1);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::config("invalid_alpha", "`alpha` must lie in (0, 1)"));
    }
    Ok(BootstrapConfig { fit, replicates, alpha, seed: s.parse("seed")?.unwrap_or(1), threads: threads(s)? })
}

pub fn simulate_config(s: &Settings) -> Result<SimulateConfig> {
    let dgp_name = s.require("dgp")?;
    let dgp = DgpKind::from_name(dgp_name)
        .ok_or_else(|| CliError::config("invalid_value", format!("unknown dgp `{dgp_name}`")))?;
    let p: usize = s.parse("p")?.unwrap_or(1);
    let sizes: Vec<usize> = s.list("n")?.ok_or_else(|| CliError::config("n_required", "`n` is required"))?;
    if p == 0 || sizes.iter().any(|&n| n < 10) {
        return Err(CliError::config("invalid_value", "need p ≥ 1 and every n ≥ 10"));
    }
    let names: Vec<String> = s.names("estimators")?.unwrap_or_else(|| vec!["ols".into(), "eecop_param".into()]);
    let estimators = names
        .iter()
        .map(|n| SimEstimator::from_name(n).ok_or_else(|| CliError::config("invalid_value", format!("unknown estimator `{n}`"))))
        .collect::<Result<Vec<_>>>()?;
    let level: Option<Vec<f64>> = s.list("t")?;
    let functional = match (s.get("family").unwrap_or("mean"), level.as_deref()) {
        ("mean", None) => Functional::Mean,
        ("mean", Some(_)) => return Err(CliError::config("t_not_allowed", "family `mean` takes no t")),
        ("quantile", None) => return Err(CliError::config("t_required", "family `quantile` needs t")),
        ("quantile", Some([t])) if *t > 0.0 && *t < 1.0 => Functional::Quantile(*t),
        ("quantile", Some(_)) => return Err(CliError::config("invalid_t", "simulate takes a single t in (0, 1)")),
        (other, _) => return Err(CliError::config("invalid_value", format!("simulate supports mean and quantile, got `{other}`"))),
    };
    let reps: usize = s.parse("reps")?.unwrap_or(100);
    let eval_points: usize = s.parse("eval_points")?.unwrap_or(50);
    if reps == 0 || eval_points == 0 {
        return Err(CliError::config("invalid_value", "`reps` and `eval_points` must be at least 1"));
    }
    Ok(SimulateConfig {
        study: RmseStudy {
            dgp,
            p,
            sizes,
            estimators,
            functional,
            eval_points,
            reps,
            seed: s.parse("seed")?.unwrap_or(1),
        },
        threads: threads(s)?,
        out: s.get("out").map(str::to_string),
    })
}
