use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lips_core::workbench::PriorSpec;
use lips_core::LipsError;

/// Prior given either as a compact string or as a full table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSetting {
    Spec(String),
    Table(PriorSpec),
}

impl PriorSetting {
    pub fn to_spec(&self) -> Result<PriorSpec, LipsError> {
        match self {
            Self::Spec(s) => PriorSpec::parse(s),
            Self::Table(t) => Ok(t.clone()),
        }
    }
}

/// Every setting a subcommand may read. A config file and the command line
/// both fill one of these; command-line values win.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub response: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub prior: Option<PriorSetting>,
    pub coef_prior: Option<String>,
    pub max_size: Option<usize>,
    pub particles: Option<usize>,
    pub islands: Option<usize>,
    pub lookahead: Option<usize>,
    pub predict: Option<PathBuf>,
    pub iterations: Option<usize>,
    pub burnin: Option<usize>,
    pub splits: Option<usize>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub variant: Option<String>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub threads: Option<usize>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, LipsError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| LipsError::Config(format!("{}: {e}", path.display())))
    }

    /// `self` with every value set in `top` replaced.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        overlay!(
            self, top, data, response, out, seed, prior, coef_prior, max_size, particles, islands, lookahead,
            predict, iterations, burnin, splits, n_train, n_test, methods, variant, n, p, threads
        );
        self
    }

    pub fn require_data(&self) -> Result<&Path, LipsError> {
        self.data
            .as_deref()
            .ok_or_else(|| LipsError::Config("no input data (--data)".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}
