//! Price estimates with provenance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Hjb,
    ClosedForm,
    MonteCarlo,
}

/// Node counts of a solver grid: `[nx, ny, nz, nt]`.
pub type GridShape = [usize; 4];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridShape>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// A price with its error bar. `stderr` is the Monte Carlo standard error and
/// is zero for deterministic methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    pub meta: EstimateMeta,
}

impl PriceEstimate {
    pub fn deterministic(value: f64, method: Method, meta: EstimateMeta) -> Self {
        PriceEstimate {
            value,
            stderr: 0.0,
            method,
            meta,
        }
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.meta.diagnostics.get(key).copied()
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.meta.flags.iter().any(|f| f == flag)
    }
}
