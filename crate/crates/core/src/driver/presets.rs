use std::path::Path;

use super::{DriverError, Stage};
use crate::hw::{parse_hardware, HardwareSpec};
use crate::model::{parse_model, ModelSpec};

pub const MODEL_PRESETS: [(&str, &str); 3] = [
    ("deit_tiny", include_str!("../../presets/deit_tiny.json")),
    ("deit_small", include_str!("../../presets/deit_small.json")),
    ("deit_base", include_str!("../../presets/deit_base.json")),
];

pub const HARDWARE_PRESETS: [(&str, &str); 1] = [("vu9p", include_str!("../../presets/vu9p.json"))];

fn lookup(table: &[(&str, &'static str)], name: &str) -> Option<&'static str> {
    table.iter().find(|(n, _)| *n == name).map(|(_, doc)| *doc)
}

pub fn model_preset(name: &str) -> Option<ModelSpec> {
    lookup(&MODEL_PRESETS, name).map(|doc| parse_model(doc).expect("bundled preset parses"))
}

pub fn hardware_preset(name: &str) -> Option<HardwareSpec> {
    lookup(&HARDWARE_PRESETS, name).map(|doc| parse_hardware(doc).expect("bundled preset parses"))
}

fn resolve(table: &[(&str, &'static str)], arg: &str) -> Result<String, DriverError> {
    if let Some(doc) = lookup(table, arg) {
        return Ok(doc.to_string());
    }
    std::fs::read_to_string(Path::new(arg)).map_err(|e| DriverError::new(Stage::Input, format!("{arg}: {e}")))
}

/// Preset name or path to a model document.
pub fn resolve_model_doc(arg: &str) -> Result<String, DriverError> {
    resolve(&MODEL_PRESETS, arg)
}

/// Preset name or path to a hardware document.
pub fn resolve_hardware_doc(arg: &str) -> Result<String, DriverError> {
    resolve(&HARDWARE_PRESETS, arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        assert_eq!(model_preset("deit_tiny").unwrap().embed_dim, 192);
        assert_eq!(model_preset("deit_small").unwrap().num_heads, 6);
        assert_eq!(model_preset("deit_base").unwrap().num_heads, 12);
        assert_eq!(hardware_preset("vu9p").unwrap(), HardwareSpec::vu9p());
        assert!(model_preset("vit_huge").is_none());
        assert_eq!(resolve_model_doc("/no/such/file").unwrap_err().stage, Stage::Input);
    }
}
