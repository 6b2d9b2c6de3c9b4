//! Parameter presets shipped with the crate as model-card files.

use crate::card::ModelCard;
use crate::model::ModelParams;

const DUT_160MOHM_1200V: &str = include_str!("../presets/dut_160mohm_1200v.toml");

/// Names accepted by [`by_name`]; the first entry of each pair is canonical.
pub const PRESETS: &[(&str, &[&str])] = &[("DUT-160mΩ-1200V", &["DUT-160mOhm-1200V", "dut-160mohm-1200v"])];

/// Looks a preset up by its canonical name or an ASCII alias.
pub fn by_name(name: &str) -> Option<ModelCard> {
    let (canonical, _) = PRESETS
        .iter()
        .find(|(canonical, aliases)| *canonical == name || aliases.iter().any(|a| a.eq_ignore_ascii_case(name)))?;
    match *canonical {
        "DUT-160mΩ-1200V" => Some(ModelCard::parse(DUT_160MOHM_1200V).expect("shipped preset parses")),
        _ => None,
    }
}

/// The 160 mΩ / 1200 V device preset.
pub fn dut_160mohm_1200v() -> ModelParams {
    by_name("DUT-160mΩ-1200V").expect("preset exists").params
}
