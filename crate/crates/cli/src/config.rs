//! Run configuration: one JSON document, every field defaulted.

use std::path::{Path, PathBuf};

use ctrlopt::hjb::{check_ladder, GridSpec, Variant};
use ctrlopt::{
    ControlBounds, FKind, GKind, MarketParams, McConfig, PaymentTiming, PayoffSpec, WeightMode,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Hjb,
    Mc,
    ClosedForm,
}

impl MethodName {
    pub fn label(&self) -> &'static str {
        match self {
            MethodName::Hjb => "hjb",
            MethodName::Mc => "mc",
            MethodName::ClosedForm => "closed_form",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HjbSection {
    /// `None` picks from the contract: normalized weight → normalized,
    /// `g = identity` → linear_reduced, otherwise adapted.
    pub variant: Option<Variant>,
    pub epsilon_ladder: Vec<f64>,
    pub grid: GridSpec,
    /// Also solve once on the refined grid and report the price change.
    pub delta_grid: bool,
}

impl Default for HjbSection {
    fn default() -> Self {
        HjbSection {
            variant: None,
            epsilon_ladder: vec![0.2, 0.1, 0.05],
            grid: GridSpec::default(),
            delta_grid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Builtin policy name, `hjb` for the policy extracted at the finest ε,
    /// or `auto` (tail when offered, else uniform).
    pub policy: String,
}

impl Default for McSection {
    fn default() -> Self {
        let d = McConfig::default();
        McSection {
            n_paths: d.n_paths,
            n_steps: d.n_steps,
            seed: d.seed,
            antithetic: d.antithetic,
            policy: "auto".into(),
        }
    }
}

impl McSection {
    pub fn engine(&self) -> McConfig {
        McConfig {
            n_paths: self.n_paths,
            n_steps: self.n_steps,
            seed: self.seed,
            antithetic: self.antithetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    /// Monte Carlo error bars count this many standard errors.
    pub n_sigma: f64,
    /// Relative allowance on an HJB price, on top of its δ_grid.
    pub hjb_rel_tol: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            n_sigma: 3.0,
            hjb_rel_tol: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: MarketParams,
    pub spec: PayoffSpec,
    pub methods: Vec<MethodName>,
    pub hjb: HjbSection,
    pub mc: McSection,
    pub compare: CompareSection,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: MarketParams {
                s0: 100.0,
                r: 0.0,
                sigma: 0.2,
                t_horizon: 1.0,
            },
            spec: PayoffSpec {
                f: FKind::Call { strike: 100.0 },
                timing: PaymentTiming::TerminalCompounded,
                g: GKind::Identity,
                weight_mode: WeightMode::AdaptedFixedCumulative,
                bounds: ControlBounds { d0: 0.0, d1: 2.0 },
            },
            methods: vec![MethodName::Hjb, MethodName::Mc, MethodName::ClosedForm],
            hjb: HjbSection::default(),
            mc: McSection::default(),
            compare: CompareSection::default(),
            out_dir: None,
        }
    }
}

impl RunConfig {
    /// Parses a config document, or the `config` member of a written report.
    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        let mut doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::config("config", e.to_string()))?;
        if doc.get("estimates").is_some() {
            if let Some(inner) = doc.get_mut("config") {
                doc = inner.take();
            }
        }
        serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(
                if path == "." { "config".into() } else { path },
                e.inner().to_string(),
            )
        })
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config("config", format!("cannot read {}: {e}", path.display()))
        })?;
        RunConfig::from_json(&text)
    }

    pub fn variant(&self) -> Variant {
        self.hjb
            .variant
            .unwrap_or(match (self.spec.weight_mode, self.spec.g) {
                (WeightMode::Normalized, _) => Variant::Normalized,
                (_, GKind::Identity) => Variant::LinearReduced,
                _ => Variant::Adapted,
            })
    }

    /// Re-validates everything the engine would check, naming the field.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params
            .validate()
            .map_err(|e| CliError::prefixed("params", e))?;
        self.spec
            .validate(&self.params)
            .map_err(|e| CliError::prefixed("spec", e))?;
        check_ladder(&self.hjb.epsilon_ladder).map_err(|e| CliError::prefixed("hjb", e))?;
        let eps_max = 0.5f64.min(self.params.t_horizon / 2.0);
        if let Some(&e) = self
            .hjb
            .epsilon_ladder
            .iter()
            .find(|&&e| !(e > 0.0 && e < eps_max))
        {
            return Err(CliError::config(
                "hjb.epsilon_ladder",
                format!("{e} is outside (0, {eps_max})"),
            ));
        }
        self.hjb
            .grid
            .validate()
            .map_err(|e| CliError::prefixed("hjb", e))?;
        self.mc.engine().validate()?;
        if self.methods.is_empty() {
            return Err(CliError::config("methods", "select at least one method"));
        }
        if !(self.compare.n_sigma > 0.0 && self.compare.hjb_rel_tol >= 0.0) {
            return Err(CliError::config(
                "compare",
                "n_sigma must be > 0 and hjb_rel_tol >= 0",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        assert_eq!(c.variant(), Variant::LinearReduced);
    }

    #[test]
    fn defaults_survive_a_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn parse_errors_name_the_path() {
        let err =
            RunConfig::from_json(r#"{"params": {"s0": 1, "r": 0, "sigma": "x", "t_horizon": 1}}"#)
                .unwrap_err();
        assert_eq!(err.field(), Some("params.sigma"));
        let err = RunConfig::from_json(r#"{"mc": {"paths": 3}}"#).unwrap_err();
        assert!(err.field().unwrap().starts_with("mc"));
    }

    #[test]
    fn reports_load_as_configs() {
        let mut c = RunConfig::default();
        c.mc.seed = 9;
        let report = serde_json::json!({"config": c, "estimates": []});
        assert_eq!(RunConfig::from_json(&report.to_string()).unwrap(), c);
    }

    #[test]
    fn inverted_bounds_name_d0() {
        let mut c = RunConfig::default();
        c.spec.bounds = ControlBounds { d0: 3.0, d1: 2.0 };
        assert_eq!(c.validate().unwrap_err().field(), Some("spec.bounds.d0"));
    }

    #[test]
    fn ladder_must_decrease_inside_the_range() {
        let mut c = RunConfig::default();
        c.hjb.epsilon_ladder = vec![0.05, 0.1];
        assert!(c.validate().is_err());
        c.hjb.epsilon_ladder = vec![0.7, 0.1];
        assert_eq!(
            c.validate().unwrap_err().field(),
            Some("hjb.epsilon_ladder")
        );
    }
}
