//! Run configuration: sectioned TOML, or JSON when the file ends in `.json`.

use std::path::{Path, PathBuf};

use bates_engine::hybrid::NumericalConfig;
use bates_engine::model::{validate, ExerciseStyle, MarketModel, OptionContract, OptionKind};
use bates_engine::montecarlo::McConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "MarketModel::benchmark_bates")]
    pub model: MarketModel,
    #[serde(default = "default_contract")]
    pub contract: OptionContract,
    #[serde(default)]
    pub numerics: NumericalConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Command-specific settings; each command reads only its own keys.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Space steps swept by `table`; the table's own list when empty.
    pub dx: Vec<f64>,
    /// Spots swept by `table`; 80..120 when empty.
    pub spots: Vec<f64>,
    /// Doubling time-step sequence for `converge`.
    pub steps: Vec<usize>,
    /// Prices injected in place of engine runs by `converge`, one per entry of `steps`.
    pub prices: Vec<f64>,
    pub smile: SmileOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmileOptions {
    pub axis: SmileAxis,
    /// `K/S0` ratios, or maturities when `axis = "maturity"`.
    pub points: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmileAxis {
    #[default]
    Moneyness,
    Maturity,
}

impl Default for SmileOptions {
    fn default() -> Self {
        SmileOptions { axis: SmileAxis::Moneyness, points: (0..=8).map(|i| 0.8 + 0.05 * i as f64).collect() }
    }
}

fn default_contract() -> OptionContract {
    OptionContract::new(100.0, 0.5, OptionKind::Call, ExerciseStyle::European)
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: MarketModel::benchmark_bates(),
            contract: default_contract(),
            numerics: NumericalConfig::default(),
            mc: McConfig::default(),
            options: Options::default(),
            output: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, json).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        if json {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }

    /// Validates every section and fills the model-dependent threshold default.
    pub fn checked(mut self) -> Result<Self, CliError> {
        self.model = validate(&self.model)?;
        self.contract = self.contract.validate()?;
        self.numerics.validate()?;
        self.mc.validate()?;
        if self.numerics.threshold.is_none() {
            self.numerics.threshold = NumericalConfig::default_threshold(&self.model);
        }
        Ok(self)
    }
}
