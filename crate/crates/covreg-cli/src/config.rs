//! Layered configuration: built-in defaults, then the TOML config file, then
//! command-line flags (flags win). The fully resolved configuration is echoed
//! into every output artifact so runs can be reconstructed exactly.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use covreg::penalty::PenaltyFamily;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub risk_free: Option<f64>,
    #[serde(default)]
    pub penalty: PenaltySection,
    #[serde(default)]
    pub tuning: TuningSection,
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub backtest: BacktestSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    pub family: Option<String>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSection {
    pub n_lambda: Option<usize>,
    pub lambda_min_ratio: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub covariates: Option<PathBuf>,
    pub constructions: Option<Vec<String>>,
    pub bandwidth: Option<f64>,
    pub density: Option<f64>,
    pub labels: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub matrices: Option<Vec<PathBuf>>,
    pub rescale: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestSection {
    pub window: Option<usize>,
    pub method: Option<String>,
    pub factors: Option<PathBuf>,
    pub marketcap: Option<PathBuf>,
    pub standardize: Option<bool>,
    pub pd_eps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub dist: Option<String>,
    pub w_model: Option<String>,
    pub n: Option<usize>,
    pub replications: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub freeze_basis: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
            }
        }
    }
}

/// Penalty settings after merging flags over config over defaults.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyConfig {
    pub family: PenaltyFamily,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
}

impl PenaltyConfig {
    pub fn resolve(
        file: &PenaltySection,
        family_flag: Option<&str>,
        gamma_flag: Option<f64>,
        lambda_flag: Option<f64>,
    ) -> Result<Self, CliError> {
        let family_name = family_flag
            .map(str::to_string)
            .or_else(|| file.family.clone())
            .unwrap_or_else(|| "scad".to_string());
        let family: PenaltyFamily = family_name.parse().map_err(CliError::from)?;
        Ok(Self {
            family,
            gamma: gamma_flag.or(file.gamma),
            lambda: lambda_flag.or(file.lambda),
        })
    }

    pub fn gamma_value(&self) -> f64 {
        self.gamma.unwrap_or(match self.family {
            PenaltyFamily::Scad => covreg::penalty::DEFAULT_SCAD_GAMMA,
            PenaltyFamily::Mcp => covreg::penalty::DEFAULT_MCP_GAMMA,
            PenaltyFamily::Lasso => f64::INFINITY,
        })
    }

    pub fn header_entries(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("penalty.family".into(), self.family.name().to_string()),
            ("penalty.gamma".into(), format!("{}", self.gamma_value())),
        ];
        if let Some(l) = self.lambda {
            out.push(("penalty.lambda".into(), format!("{l}")));
        }
        out
    }
}

/// Tuning grid settings after merging.
#[derive(Debug, Clone)]
pub struct TuningConfig {
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub lambda_grid: Option<Vec<f64>>,
}

impl TuningConfig {
    pub fn resolve(
        file: &TuningSection,
        n_lambda_flag: Option<usize>,
        min_ratio_flag: Option<f64>,
        grid_flag: Option<&str>,
    ) -> Result<Self, CliError> {
        let lambda_grid = match grid_flag {
            Some(list) => Some(
                list.split(',')
                    .map(|tok| {
                        tok.trim()
                            .parse::<f64>()
                            .map_err(|e| CliError::data(format!("--lambda-grid: `{tok}`: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => file.lambda_grid.clone(),
        };
        Ok(Self {
            n_lambda: n_lambda_flag.or(file.n_lambda).unwrap_or(50),
            lambda_min_ratio: min_ratio_flag.or(file.lambda_min_ratio).unwrap_or(1e-3),
            lambda_grid,
        })
    }

    pub fn header_entries(&self) -> Vec<(String, String)> {
        match &self.lambda_grid {
            Some(grid) => vec![(
                "tuning.lambda_grid".into(),
                grid.iter()
                    .map(|l| format!("{l}"))
                    .collect::<Vec<_>>()
                    .join(","),
            )],
            None => vec![
                ("tuning.n_lambda".into(), self.n_lambda.to_string()),
                (
                    "tuning.lambda_min_ratio".into(),
                    format!("{}", self.lambda_min_ratio),
                ),
            ],
        }
    }
}

/// Similarity basis construction settings after merging.
#[derive(Debug, Clone)]
pub struct BasisConfig {
    pub covariates: Option<PathBuf>,
    pub kernel: bool,
    pub outer: bool,
    pub bandwidth: f64,
    pub density: f64,
    pub labels: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub matrices: Vec<PathBuf>,
    pub rescale: bool,
}

impl BasisConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn resolve(
        file: &BasisSection,
        covariates_flag: Option<PathBuf>,
        constructions_flag: Option<&str>,
        bandwidth_flag: Option<f64>,
        density_flag: Option<f64>,
        labels_flag: Option<PathBuf>,
        edges_flag: Option<PathBuf>,
        matrices_flag: &[PathBuf],
        no_rescale_flag: bool,
    ) -> Result<Self, CliError> {
        let constructions: Vec<String> = match constructions_flag {
            Some(list) => list.split(',').map(|s| s.trim().to_lowercase()).collect(),
            None => file
                .constructions
                .clone()
                .unwrap_or_else(|| vec!["kernel".into(), "outer".into()]),
        };
        for c in &constructions {
            if c != "kernel" && c != "outer" {
                return Err(CliError::data(format!(
                    "unknown covariate construction `{c}` (expected kernel, outer)"
                )));
            }
        }
        let rescale = if no_rescale_flag {
            false
        } else {
            file.rescale.unwrap_or(true)
        };
        Ok(Self {
            covariates: covariates_flag.or_else(|| file.covariates.clone()),
            kernel: constructions.iter().any(|c| c == "kernel"),
            outer: constructions.iter().any(|c| c == "outer"),
            bandwidth: bandwidth_flag.or(file.bandwidth).unwrap_or(10.0),
            density: density_flag.or(file.density).unwrap_or(0.25),
            labels: labels_flag.or_else(|| file.labels.clone()),
            edges: edges_flag.or_else(|| file.edges.clone()),
            matrices: if matrices_flag.is_empty() {
                file.matrices.clone().unwrap_or_default()
            } else {
                matrices_flag.to_vec()
            },
            rescale,
        })
    }

    pub fn header_entries(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if let Some(p) = &self.covariates {
            out.push(("basis.covariates".into(), p.display().to_string()));
            let mut cons = Vec::new();
            if self.kernel {
                cons.push("kernel");
            }
            if self.outer {
                cons.push("outer");
            }
            out.push(("basis.constructions".into(), cons.join(",")));
            out.push(("basis.bandwidth".into(), format!("{}", self.bandwidth)));
            out.push(("basis.density".into(), format!("{}", self.density)));
        }
        if let Some(p) = &self.labels {
            out.push(("basis.labels".into(), p.display().to_string()));
        }
        if let Some(p) = &self.edges {
            out.push(("basis.edges".into(), p.display().to_string()));
        }
        for m in &self.matrices {
            out.push(("basis.matrix".into(), m.display().to_string()));
        }
        out.push(("basis.rescale".into(), self.rescale.to_string()));
        out
    }
}
