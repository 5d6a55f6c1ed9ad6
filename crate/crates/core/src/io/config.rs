//! Plain-text model configuration: a versioned TOML schema with explicit
//! matrix blocks, hand-auditable against published parameter tables.
//!
//! ```toml
//! schema_version = 1
//!
//! [preferences]
//! beta = 0.99
//! risk_aversion = 1.0
//!
//! [technology]            # production economies (mutually exclusive with [wage])
//! alpha = 0.36
//! delta = 0.025
//! k_primordial = 11.5
//!
//! [wage]                  # pure-credit economies
//! value = 1.0
//!
//! [productivity]          # omit for models without aggregate risk
//! states = [1.01, 0.99]
//! q = [[0.875, 0.125], [0.125, 0.875]]
//!
//! [employment]
//! states = [0.3271, 0.0]
//!
//! [[employment.transition]]   # one block per (from, to) productivity pair,
//! from = 1                    # 1-based; a single block for single-chain models
//! to = 1
//! rows = [[0.972222, 0.027778], [0.666667, 0.333333]]
//!
//! [classical]              # optional: asset-grid bounds for the grid DP
//! asset_min = -2.0
//! asset_max = 16.0
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{EmploymentSpec, ModelSpec, Preferences, ProductivitySpec, Technology};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigFile {
    schema_version: u32,
    preferences: PreferencesSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    technology: Option<TechnologySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wage: Option<WageSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    productivity: Option<ProductivitySection>,
    employment: EmploymentSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    classical: Option<ClassicalSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PreferencesSection {
    beta: f64,
    risk_aversion: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TechnologySection {
    alpha: f64,
    delta: f64,
    k_primordial: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WageSection {
    value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProductivitySection {
    states: Vec<f64>,
    q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EmploymentSection {
    states: Vec<f64>,
    transition: Vec<TransitionBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TransitionBlock {
    /// 1-based departing productivity index.
    from: usize,
    /// 1-based arriving productivity index.
    to: usize,
    rows: Vec<Vec<f64>>,
}

/// Optional asset-grid bounds consumed by the classical pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ClassicalSection {
    pub asset_min: f64,
    pub asset_max: f64,
}

/// A parsed configuration: the validated model plus the optional classical
/// grid bounds.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub model: ModelSpec,
    pub classical: Option<ClassicalSection>,
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", path.as_ref().display()))
    })?;
    load_model_str(&text)
}

pub fn load_model_str(text: &str) -> Result<LoadedConfig> {
    let file: ConfigFile = toml::from_str(text)
        .map_err(|e| Error::Config(format!("schema violation: {e}")))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    let preferences = Preferences::new(file.preferences.beta, file.preferences.risk_aversion)?;
    let technology = match &file.technology {
        Some(t) => Some(Technology::new(t.alpha, t.delta, t.k_primordial)?),
        None => None,
    };
    let productivity = match &file.productivity {
        Some(p) => Some(ProductivitySpec::new(p.states.clone(), p.q.clone())?),
        None => None,
    };

    let nx = productivity.as_ref().map(|p| p.len()).unwrap_or(1);
    let mut table: Vec<Vec<Option<Vec<Vec<f64>>>>> = vec![vec![None; nx]; nx];
    for block in &file.employment.transition {
        if block.from == 0 || block.from > nx || block.to == 0 || block.to > nx {
            return Err(Error::Config(format!(
                "employment.transition block (from={}, to={}) out of range 1..={nx}",
                block.from, block.to
            )));
        }
        if table[block.from - 1][block.to - 1].is_some() {
            return Err(Error::Config(format!(
                "duplicate employment.transition block (from={}, to={})",
                block.from, block.to
            )));
        }
        table[block.from - 1][block.to - 1] = Some(block.rows.clone());
    }
    let mut p_matrices = Vec::with_capacity(nx);
    for (x, row) in table.into_iter().enumerate() {
        let mut out = Vec::with_capacity(nx);
        for (y, cell) in row.into_iter().enumerate() {
            out.push(cell.ok_or_else(|| {
                Error::Config(format!(
                    "missing employment.transition block (from={}, to={})",
                    x + 1,
                    y + 1
                ))
            })?);
        }
        p_matrices.push(out);
    }
    let employment = if nx == 1 {
        EmploymentSpec::single(
            file.employment.states.clone(),
            p_matrices.into_iter().next().unwrap().into_iter().next().unwrap(),
        )?
    } else {
        EmploymentSpec::synchronized(file.employment.states.clone(), p_matrices)?
    };

    let model = ModelSpec {
        preferences,
        technology,
        productivity,
        employment,
        wage: file.wage.as_ref().map(|w| w.value),
    };
    model.validate()?;
    Ok(LoadedConfig {
        model,
        classical: file.classical,
    })
}

/// Serialize a model (plus optional classical bounds) back to the schema.
/// Values survive a round trip exactly (shortest-round-trip float encoding).
pub fn save_model(model: &ModelSpec, classical: Option<ClassicalSection>) -> Result<String> {
    let nx = model.productivity.as_ref().map(|p| p.len()).unwrap_or(1);
    let mut transition = Vec::new();
    for x in 0..nx {
        for y in 0..nx {
            transition.push(TransitionBlock {
                from: x + 1,
                to: y + 1,
                rows: model.employment.p_matrices[x][y].clone(),
            });
        }
    }
    let file = ConfigFile {
        schema_version: SCHEMA_VERSION,
        preferences: PreferencesSection {
            beta: model.preferences.beta,
            risk_aversion: model.preferences.risk_aversion,
        },
        technology: model.technology.map(|t| TechnologySection {
            alpha: t.alpha,
            delta: t.delta,
            k_primordial: t.k_primordial,
        }),
        wage: model.wage.map(|value| WageSection { value }),
        productivity: model.productivity.as_ref().map(|p| ProductivitySection {
            states: p.states.clone(),
            q: p.q_matrix.clone(),
        }),
        employment: EmploymentSection {
            states: model.employment.states.clone(),
            transition,
        },
        classical,
    };
    toml::to_string_pretty(&file).map_err(|e| Error::Config(format!("serialize: {e}")))
}

/// SHA-256 over the canonical serialized form.
pub fn model_hash(model: &ModelSpec, classical: Option<ClassicalSection>) -> Result<String> {
    let text = save_model(model, classical)?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::presets;

    #[test]
    fn round_trip_preserves_model() {
        for name in presets::available_presets() {
            let cfg = presets::load_preset(name).unwrap();
            let text = save_model(&cfg.model, cfg.classical).unwrap();
            let again = load_model_str(&text).unwrap();
            assert_eq!(cfg.model, again.model, "preset {name}");
            assert_eq!(cfg.classical, again.classical, "preset {name}");
        }
    }

    #[test]
    fn bad_row_sum_rejected_with_block_name() {
        let text = r#"
schema_version = 1
[preferences]
beta = 0.95
risk_aversion = 2.0
[wage]
value = 1.0
[employment]
states = [1.0, 0.5]
[[employment.transition]]
from = 1
to = 1
rows = [[0.8, 0.1], [0.4, 0.6]]
"#;
        let err = load_model_str(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 0"), "message was: {msg}");
    }

    #[test]
    fn schema_version_checked() {
        let text = "schema_version = 99\n[preferences]\nbeta=0.9\nrisk_aversion=1.0\n[employment]\nstates=[1.0]\ntransition=[]\n";
        let err = load_model_str(text).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }
}
