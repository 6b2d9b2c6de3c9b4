//! Model cards: the versioned on-disk form of a parameter set, and the flat
//! `name=value # unit` export used in circuit-simulator decks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DriftLaw, ModelParams, PARAMS};

pub const CARD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CardError {
    #[error("malformed card: {0}")]
    Syntax(String),
    #[error("card schema error: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    /// `file name → sha256` of the data a fit was run against.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub data_sha256: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCard {
    pub schema_version: u32,
    pub device_name: String,
    pub params: ModelParams,
    pub provenance: Provenance,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCard {
    schema_version: u32,
    device_name: String,
    drift_law: Option<String>,
    params: BTreeMap<String, RawParam>,
    #[serde(default)]
    provenance: Provenance,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    value: f64,
    unit: String,
}

/// Shortest representation that parses back to the same `f64`, always in a
/// form TOML reads as a float.
fn float_repr(v: f64) -> String {
    format!("{v:?}")
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

impl ModelCard {
    pub fn new(device_name: impl Into<String>, params: ModelParams) -> Self {
        Self {
            schema_version: CARD_SCHEMA_VERSION,
            device_name: device_name.into(),
            params,
            provenance: Provenance::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CardError> {
        let raw: RawCard = toml::from_str(text).map_err(|e| CardError::Syntax(e.to_string()))?;
        if raw.schema_version != CARD_SCHEMA_VERSION {
            return Err(CardError::Schema(format!(
                "schema_version {} not supported (expected {CARD_SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        let drift_law = match raw.drift_law.as_deref() {
            None => DriftLaw::default(),
            Some(s) => s.parse().map_err(|e: crate::model::ModelError| CardError::Schema(e.to_string()))?,
        };
        if let Some(unknown) = raw.params.keys().find(|k| PARAMS.iter().all(|p| p.name != k.as_str())) {
            return Err(CardError::Schema(format!("unknown parameter {unknown:?}")));
        }
        let params = params_from_entries(drift_law, |name| {
            raw.params.get(name).map(|p| (p.value, p.unit.as_str()))
        })?;
        Ok(Self {
            schema_version: raw.schema_version,
            device_name: raw.device_name,
            params,
            provenance: raw.provenance,
        })
    }

    /// Canonical TOML text; parameters in [`PARAMS`] order.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "schema_version = {}", self.schema_version);
        let _ = writeln!(out, "device_name = {}", toml_string(&self.device_name));
        let _ = writeln!(out, "drift_law = {}", toml_string(&self.params.drift_law.to_string()));
        out.push_str("\n[params]\n");
        for info in PARAMS {
            let value = self.params.get(info.name).expect("listed parameter");
            let _ = writeln!(
                out,
                "{} = {{ value = {}, unit = {} }}",
                info.name,
                float_repr(value),
                toml_string(info.unit)
            );
        }
        if self.provenance != Provenance::default() {
            #[derive(Serialize)]
            struct Wrap<'a> {
                provenance: &'a Provenance,
            }
            let prov = toml::to_string(&Wrap { provenance: &self.provenance }).expect("provenance serializes");
            out.push('\n');
            out.push_str(&prov);
        }
        out
    }

    /// Flat `name=value # unit` listing with a deterministic key order.
    pub fn to_flat(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "* device: {}", self.device_name);
        let _ = writeln!(out, "* schema_version: {}", self.schema_version);
        let _ = writeln!(out, "drift_law={} # law", self.params.drift_law);
        for info in PARAMS {
            let value = self.params.get(info.name).expect("listed parameter");
            let _ = writeln!(out, "{}={} # {}", info.name, float_repr(value), info.unit);
        }
        out
    }

    /// Reads the flat export back. Lines starting with `*` are comments.
    pub fn parse_flat(text: &str) -> Result<Self, CardError> {
        let mut device_name = String::new();
        let mut schema_version = CARD_SCHEMA_VERSION;
        let mut drift_law = DriftLaw::default();
        let mut entries: BTreeMap<String, (f64, String)> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('*') {
                let comment = comment.trim();
                if let Some(name) = comment.strip_prefix("device:") {
                    device_name = name.trim().to_string();
                } else if let Some(v) = comment.strip_prefix("schema_version:") {
                    schema_version = v
                        .trim()
                        .parse()
                        .map_err(|_| CardError::Syntax(format!("line {}: bad schema_version", lineno + 1)))?;
                }
                continue;
            }
            let (body, unit) = match line.split_once('#') {
                Some((b, u)) => (b.trim(), u.trim()),
                None => (line, ""),
            };
            let (name, value) = body
                .split_once('=')
                .ok_or_else(|| CardError::Syntax(format!("line {}: expected name=value", lineno + 1)))?;
            let (name, value) = (name.trim(), value.trim());
            if name == "drift_law" {
                drift_law = value.parse().map_err(|e: crate::model::ModelError| CardError::Schema(e.to_string()))?;
                continue;
            }
            if PARAMS.iter().all(|p| p.name != name) {
                return Err(CardError::Schema(format!("line {}: unknown parameter {name:?}", lineno + 1)));
            }
            let value: f64 = value
                .parse()
                .map_err(|_| CardError::Syntax(format!("line {}: bad number {value:?}", lineno + 1)))?;
            if entries.insert(name.to_string(), (value, unit.to_string())).is_some() {
                return Err(CardError::Schema(format!("line {}: duplicate parameter {name:?}", lineno + 1)));
            }
        }
        if schema_version != CARD_SCHEMA_VERSION {
            return Err(CardError::Schema(format!("schema_version {schema_version} not supported")));
        }
        let params = params_from_entries(drift_law, |name| entries.get(name).map(|(v, u)| (*v, u.as_str())))?;
        Ok(Self {
            schema_version,
            device_name,
            params,
            provenance: Provenance::default(),
        })
    }
}

fn params_from_entries<'a>(
    drift_law: DriftLaw,
    lookup: impl Fn(&str) -> Option<(f64, &'a str)>,
) -> Result<ModelParams, CardError> {
    for info in PARAMS {
        let (_, unit) = lookup(info.name).ok_or_else(|| CardError::Schema(format!("missing parameter {:?}", info.name)))?;
        if unit != info.unit {
            return Err(CardError::Schema(format!(
                "parameter {:?} has unit {unit:?}, expected {:?}",
                info.name, info.unit
            )));
        }
    }
    let params = ModelParams::from_lookup(drift_law, |name| lookup(name).map_or(f64::NAN, |(v, _)| v));
    params.validate().map_err(|e| CardError::Schema(e.to_string()))?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn card() -> ModelCard {
        let mut c = ModelCard::new("test device", presets::dut_160mohm_1200v());
        c.params.vfb0 = -1.234_567_890_123_456_7;
        c.params.n_d = 7.777_777_777_777_777e21;
        c.provenance.notes = Some("note with \"quotes\"".into());
        c.provenance.data_sha256.insert("data.csv".into(), "ab".repeat(32));
        c
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        let c = card();
        let text = c.to_toml();
        let back = ModelCard::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn flat_round_trip_is_lossless() {
        let c = card();
        let flat = c.to_flat();
        assert!(flat.contains("cox=6.9e-4 # F/m^2") || flat.lines().any(|l| l.starts_with("cox=") && l.ends_with("# F/m^2")));
        let back = ModelCard::parse_flat(&flat).unwrap();
        assert_eq!(back.params, c.params);
        assert_eq!(back.device_name, c.device_name);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = card().to_toml().replace("[params]\n", "[params]\nbogus = { value = 1.0, unit = \"V\" }\n");
        assert!(matches!(ModelCard::parse(&text), Err(CardError::Schema(_))));
        let text = card().to_toml().replace("schema_version = 1\n", "schema_version = 1\nextra = 3\n");
        assert!(matches!(ModelCard::parse(&text), Err(CardError::Syntax(_))));
    }

    #[test]
    fn schema_and_unit_mismatch_rejected() {
        let text = card().to_toml().replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(ModelCard::parse(&text), Err(CardError::Schema(_))));
        let text = card().to_toml().replace("unit = \"F/m^2\"", "unit = \"F/cm^2\"");
        assert!(matches!(ModelCard::parse(&text), Err(CardError::Schema(_))));
    }

    #[test]
    fn missing_parameter_rejected() {
        let text: String = card()
            .to_toml()
            .lines()
            .filter(|l| !l.starts_with("cox "))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(ModelCard::parse(&text), Err(CardError::Schema(_))));
    }

    #[test]
    fn integer_values_accepted() {
        let text = card().to_toml().replace("value = 300.0", "value = 300");
        assert_eq!(ModelCard::parse(&text).unwrap().params.t0, 300.0);
    }
}
