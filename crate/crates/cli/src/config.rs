//! Run configuration: one JSON document with the domain, weight,
//! nonlinearity, parameters, solver and output blocks.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use multibump::mesh::{build_mesh, DomainSpec, WeightSpec};
use multibump::model::{Discretization, Nonlinearity, NonlinearitySpec, ProblemSpec};
use multibump::solver::SolveOptions;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainBlock,
    pub weight: WeightSpec,
    pub nonlinearity: NonlinearitySpec,
    pub parameters: Parameters,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    /// Optional; checked against the number of extents when present.
    #[serde(default)]
    pub dimension: Option<usize>,
    pub extents: Vec<[f64; 2]>,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(default)]
    pub lambda: f64,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

impl OutputBlock {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                CliError::Config(format!("at top level: {}", e.into_inner()))
            } else {
                CliError::Config(format!("at `{path}`: {}", e.into_inner()))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(d) = self.domain.dimension {
            if d != self.domain.extents.len() {
                return Err(CliError::Config(format!(
                    "at `domain.dimension`: {d} does not match {} extents",
                    self.domain.extents.len()
                )));
            }
        }
        if self.parameters.mu.is_empty() {
            return Err(CliError::Config("at `parameters.mu`: list is empty".into()));
        }
        if let Some(mu) = self
            .parameters
            .mu
            .iter()
            .find(|m| !(**m >= 0.0) || !m.is_finite())
        {
            return Err(CliError::Config(format!(
                "at `parameters.mu`: {mu} is not a finite value ≥ 0"
            )));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::Config(
                "at `output.formats`: list is empty".into(),
            ));
        }
        self.solver
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Problem at the first `μ` of the list.
    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let domain = DomainSpec {
            extents: self.domain.extents.clone(),
            nodes: self.domain.nodes.clone(),
        };
        let mesh = build_mesh(&domain).map_err(config_error)?;
        let nl = Nonlinearity::new(&self.nonlinearity, &mesh).map_err(config_error)?;
        let disc = Discretization::new(mesh, &self.weight).map_err(config_error)?;
        ProblemSpec::new(
            Arc::new(disc),
            Arc::new(nl),
            self.parameters.lambda,
            self.parameters.mu[0],
        )
        .map_err(config_error)
    }
}

fn config_error(e: multibump::Error) -> CliError {
    CliError::Config(e.to_string())
}
