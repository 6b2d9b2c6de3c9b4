//! TOML run configuration for the command-line front end.
//!
//! ```toml
//! [model]
//! preset = "DUT-160mΩ-1200V"      # or: card = "fitted.toml"
//! [model.overrides]
//! r_s = 0.02
//!
//! [sweep]
//! kind = "output"                 # transfer | output | transconductance
//! axis = "vds"
//! start = 0.005
//! stop = 800.0
//! points = 120
//! scale = "log"
//! fixed_bias = [6.0, 6.5, 7.0]
//!
//! [regions]
//! vds_lin_max = 0.5
//! vds_mid_max = 15.0
//!
//! [fit]
//! schedule = ["stage1", "stage2", "stage3", "polish"]
//! [fit.stage3]
//! free_params = ["beta_r", "v_sat"]
//! region = "high_power"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::{RegionThresholds, ValidationLimits};
use crate::extraction::{default_schedule, FitStageSpec, RegionSelect, Weighting};
use crate::sweep::SweepSpec;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: ModelSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub regions: RegionThresholds,
    #[serde(default)]
    pub validation: ValidationLimits,
    #[serde(default)]
    pub fit: FitSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Option<String>,
    /// Card file, relative paths resolved against the config file.
    pub card: Option<PathBuf>,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Transfer,
    Output,
    Transconductance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub kind: Option<SweepKind>,
    pub spec: SweepSpec,
}

// `kind` sits beside the spec fields; serde's flatten would lose
// unknown-field checking, so split the table by hand.
impl<'de> Deserialize<'de> for SweepSection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let mut table = toml::Table::deserialize(d)?;
        let kind = table
            .remove("kind")
            .map(|v| v.try_into::<SweepKind>())
            .transpose()
            .map_err(D::Error::custom)?;
        let spec = toml::Value::Table(table).try_into().map_err(D::Error::custom)?;
        Ok(Self { kind, spec })
    }
}

impl SweepSection {
    pub fn kind(&self) -> SweepKind {
        self.kind.unwrap_or(match self.spec.axis {
            crate::sweep::Axis::Vgs => SweepKind::Transfer,
            crate::sweep::Axis::Vds => SweepKind::Output,
        })
    }
}

/// A stage table; the name comes from its key.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTable {
    pub free_params: Vec<String>,
    pub region: RegionSelect,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub restarts: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct FitSection {
    pub schedule: Option<Vec<String>>,
    #[serde(flatten)]
    pub stages: BTreeMap<String, StageTable>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut cfg = Self::parse(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
        if let (Some(card), Some(dir)) = (&cfg.model.card, path.parent()) {
            if card.is_relative() {
                cfg.model.card = Some(dir.join(card));
            }
        }
        Ok(cfg)
    }

    /// The fit schedule: named stages from `[fit.*]` tables, falling back to
    /// the built-in stages of the same name.
    pub fn schedule(&self) -> Result<Vec<FitStageSpec>, String> {
        let builtin = default_schedule();
        let names: Vec<String> = match &self.fit.schedule {
            Some(names) => names.clone(),
            None => builtin.iter().map(|s| s.name.clone()).collect(),
        };
        if let Some(orphan) = self.fit.stages.keys().find(|k| !names.contains(k)) {
            return Err(format!("[fit.{orphan}] is not in the fit schedule"));
        }
        names
            .iter()
            .map(|name| {
                if let Some(t) = self.fit.stages.get(name) {
                    Ok(FitStageSpec {
                        name: name.clone(),
                        free_params: t.free_params.clone(),
                        region: t.region,
                        weighting: t.weighting,
                        bounds: t.bounds.clone(),
                        max_iter: t.max_iter.unwrap_or(200),
                        restarts: t.restarts,
                    })
                } else {
                    builtin
                        .iter()
                        .find(|s| &s.name == name)
                        .cloned()
                        .ok_or_else(|| format!("fit stage {name:?} has no [fit.{name}] table"))
                }
            })
            .collect()
    }
}
