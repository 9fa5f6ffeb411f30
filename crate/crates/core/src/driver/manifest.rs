use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DriverError, Stage, StageExt};
use crate::approx::ApproxConfig;
use crate::dse::SearchConfig;
use crate::hw::{validate_tiles, GraphLatency, HardwareSpec, TileParams};
use crate::layout::NodePlan;
use crate::model::ModelSpec;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    /// `heuristic`, `exhaustive`, or `fixed` for user-supplied tiles.
    pub mode: String,
    pub space_size: Option<u64>,
    pub space_fingerprint: Option<String>,
    pub evaluations_used: usize,
    pub config: Option<SearchConfig>,
}

/// Schedules of every node of one kind, summed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindSchedule {
    pub nodes: usize,
    pub total_steps: u64,
    pub lower_bound_steps: u64,
    pub partial_steps: usize,
}

/// Everything a compile run decided, sufficient to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompilationManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub model_fingerprint: String,
    pub model: ModelSpec,
    pub hardware: HardwareSpec,
    pub rewrites: Vec<String>,
    pub search: SearchSummary,
    pub tiles: TileParams,
    pub latency: GraphLatency,
    pub schedules: BTreeMap<String, KindSchedule>,
    pub layout: Vec<NodePlan>,
    pub approx: ApproxConfig,
    /// Fields written by newer tools, kept verbatim on rewrite.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl CompilationManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(doc: &str) -> Result<Self, DriverError> {
        let m: Self = serde_json::from_str(doc).stage(Stage::Emit)?;
        if m.manifest_version > MANIFEST_VERSION {
            return Err(DriverError::new(
                Stage::Emit,
                format!("manifest_version {} is newer than supported {MANIFEST_VERSION}", m.manifest_version),
            ));
        }
        Ok(m)
    }
}

/// Scalars a parameterised accelerator template consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateParams {
    pub pn: u64,
    pub pm: u64,
    pub tn: u64,
    pub tm: u64,
    pub banks: u32,
    pub kernels: u32,
    pub lop: u32,
    pub pack_factor: u64,
}

const KEYS: [&str; 8] = ["pn", "pm", "tn", "tm", "banks", "kernels", "lop", "pack_factor"];

impl TemplateParams {
    /// Checks the manifest's tiles against its hardware before extracting.
    pub fn from_manifest(m: &CompilationManifest) -> Result<Self, DriverError> {
        m.hardware.validate().stage(Stage::Emit)?;
        let verdict = validate_tiles(&m.tiles, &m.hardware);
        if !verdict.is_feasible() {
            return Err(DriverError::new(Stage::Emit, format!("inconsistent manifest: {:?}", verdict.violations)));
        }
        let t = m.tiles;
        Ok(Self {
            pn: t.pn,
            pm: t.pm,
            tn: t.tn,
            tm: t.tm,
            banks: m.hardware.ddr_banks,
            kernels: m.hardware.num_kernels,
            lop: m.hardware.lop,
            pack_factor: m.hardware.pm(),
        })
    }

    fn values(&self) -> [u64; 8] {
        [
            self.pn,
            self.pm,
            self.tn,
            self.tm,
            u64::from(self.banks),
            u64::from(self.kernels),
            u64::from(self.lop),
            self.pack_factor,
        ]
    }

    /// `key=value` lines in a fixed order.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(self.values()) {
            writeln!(out, "{k}={v}").expect("string write");
        }
        out
    }

    /// Reads the [`TemplateParams::emit`] format; `#` starts a comment line.
    pub fn parse(doc: &str) -> Result<Self, DriverError> {
        let err = |m: String| DriverError::new(Stage::Emit, m);
        let mut seen = BTreeMap::new();
        for line in doc.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(err(format!("unknown key `{k}`")));
            }
            let v: u64 = v.parse().map_err(|_| err(format!("`{k}` is not an unsigned integer")))?;
            if seen.insert(k, v).is_some() {
                return Err(err(format!("duplicate key `{k}`")));
            }
        }
        let get = |k: &str| seen.get(k).copied().ok_or_else(|| err(format!("missing key `{k}`")));
        let narrow = |k: &str| -> Result<u32, DriverError> {
            u32::try_from(get(k)?).map_err(|_| err(format!("`{k}` out of range")))
        };
        Ok(Self {
            pn: get("pn")?,
            pm: get("pm")?,
            tn: get("tn")?,
            tm: get("tm")?,
            banks: narrow("banks")?,
            kernels: narrow("kernels")?,
            lop: narrow("lop")?,
            pack_factor: get("pack_factor")?,
        })
    }
}
