use std::fs;
use std::path::Path;

use hedger_core::{
    CostSpec, ExoticBook, HedgeInputs, MarketView, ProblemKind, SpotState, SvParams, VanillaOption,
    VegaProfile,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub options: Vec<VanillaOption>,
    pub book: ExoticBook,
    pub hedge: HedgeConfig,
    #[serde(default)]
    pub run: RunSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_override: Option<MarketView>,
    /// Explicit Vegas, used instead of pricing the options in the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greeks_override: Option<VegaProfile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub params: SvParams,
    pub spot: SpotState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeConfig {
    pub gamma: f64,
    pub horizon: f64,
    pub q0: Vec<f64>,
    pub costs: Vec<CostSpec>,
    pub problem: ProblemKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub grid: usize,
    pub oracle_grid: usize,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub vega_bump: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            grid: hedger_core::tpbvp::DEFAULT_BVP_GRID,
            oracle_grid: hedger_core::tpbvp::DEFAULT_ORACLE_GRID,
            n_paths: 100_000,
            n_steps: 200,
            seed: 0,
            vega_bump: hedger_core::pricing::DEFAULT_VEGA_BUMP,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.check_shape()?;
        Ok(cfg)
    }

    /// Cross-field size checks that serde cannot express.
    pub fn check_shape(&self) -> Result<(), CliError> {
        let n = self.options.len();
        let sizes = [
            ("book.vega_mm", self.book.vega_mm.len()),
            ("hedge.q0", self.hedge.q0.len()),
            ("hedge.costs", self.hedge.costs.len()),
        ];
        if n == 0 {
            return Err(CliError::Config("at least one option is required".into()));
        }
        for (name, len) in sizes {
            if len != n {
                return Err(CliError::Config(format!(
                    "{name} has {len} entries but there are {n} options"
                )));
            }
        }
        if let Some(g) = &self.greeks_override {
            if g.vega_sv.len() != n || g.vega_bs.len() != n {
                return Err(CliError::Config(format!(
                    "greeks_override must have {n} entries per Vega vector"
                )));
            }
        }
        Ok(())
    }
}

/// Frozen quantities the planner needs, from the model or the overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenGreeks {
    pub view: MarketView,
    pub profile: VegaProfile,
    pub target: Vec<f64>,
}

impl FrozenGreeks {
    pub fn hedge_inputs(&self, cfg: &RunConfig) -> HedgeInputs {
        HedgeInputs {
            gamma: cfg.hedge.gamma,
            rho: cfg.model.params.rho,
            xi: cfg.model.params.xi,
            view: self.view,
            vega_sv: self.profile.vega_sv.clone(),
            target: hedger_core::TargetVector(self.target.clone()),
            q0: cfg.hedge.q0.clone(),
            costs: cfg.hedge.costs.clone(),
            horizon: cfg.hedge.horizon,
        }
    }
}
