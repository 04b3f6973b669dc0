//! Config documents read by the subcommands.

use std::path::Path;

use serde::Deserialize;
use smmv::ct_game::{GameState, PenaltyParams};
use smmv::ct_market::{CtMarket, ZetaModel};
use smmv::preference::PreferenceParams;
use smmv::probspace::{RandomVariable, SpaceDocument};
use smmv::{Error, Result};

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", path.display())))
}

/// A floor given either as a constant or as the name of a variable.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FloorSpec {
    Level(f64),
    Named(String),
}

impl Default for FloorSpec {
    fn default() -> Self {
        FloorSpec::Level(0.0)
    }
}

/// Space document fields shared by `eval-pref` and `solve-static`.
#[derive(Debug, Clone, Deserialize)]
struct PreferenceFields {
    theta: f64,
    #[serde(default)]
    zeta: FloorSpec,
    #[serde(default)]
    payoffs: Option<Vec<String>>,
}

pub struct PreferenceConfig {
    pub doc: SpaceDocument,
    pub params: PreferenceParams,
    /// Payoffs to evaluate, in output order.
    pub payoffs: Vec<(String, RandomVariable)>,
}

pub fn preference_config(text: &str) -> Result<PreferenceConfig> {
    let doc: SpaceDocument = serde_json::from_str(text)?;
    let fields: PreferenceFields = serde_json::from_str(text)?;
    let (space, vars) = doc.build()?;
    let zeta = match &fields.zeta {
        FloorSpec::Level(z) => RandomVariable::constant(&space, *z),
        FloorSpec::Named(name) => vars.get(name).cloned().ok_or_else(|| {
            Error::Validation(format!("floor variable '{name}' missing from variables"))
        })?,
    };
    let floor_name = match &fields.zeta {
        FloorSpec::Named(n) => Some(n.as_str()),
        FloorSpec::Level(_) => None,
    };
    let names: Vec<String> = match fields.payoffs {
        Some(names) => names,
        None => vars
            .keys()
            .filter(|k| Some(k.as_str()) != floor_name)
            .cloned()
            .collect(),
    };
    let payoffs = names
        .into_iter()
        .map(|n| match vars.get(&n) {
            Some(v) => Ok((n, v.clone())),
            None => Err(Error::Validation(format!(
                "payoff '{n}' missing from variables"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    let params = PreferenceParams::new(fields.theta, zeta)?;
    Ok(PreferenceConfig {
        doc,
        params,
        payoffs,
    })
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct StateSpec {
    #[serde(default)]
    pub t: f64,
    pub x: f64,
    pub z: f64,
    #[serde(default = "one")]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Unconstrained,
    #[default]
    Approximate,
    Boundary,
    Embedding,
    MeanVariance,
}

/// Continuous-time game: market curves, floor, risk aversion, penalty and state.
#[derive(Debug, Clone, Deserialize)]
pub struct GameConfig {
    #[serde(flatten)]
    pub market: CtMarket,
    pub zeta: ZetaModel,
    pub risk_aversion: f64,
    pub rho: f64,
    pub c: f64,
    pub state: StateSpec,
    #[serde(default)]
    pub strategy: StrategyKind,
    #[serde(default)]
    pub antithetic: bool,
}

impl GameConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: GameConfig = serde_json::from_str(text)?;
        cfg.zeta.validate()?;
        cfg.state().validate(&cfg.market)?;
        if !(cfg.risk_aversion > 0.0) || !cfg.risk_aversion.is_finite() {
            return Err(Error::Validation(format!(
                "risk_aversion must be positive, got {}",
                cfg.risk_aversion
            )));
        }
        cfg.penalty()?;
        Ok(cfg)
    }

    pub fn state(&self) -> GameState {
        let s = self.state;
        GameState {
            t: s.t,
            x: s.x,
            z: s.z,
            lambda: s.lambda,
        }
    }

    pub fn penalty(&self) -> Result<PenaltyParams> {
        PenaltyParams::new(self.rho, self.c)
    }
}
