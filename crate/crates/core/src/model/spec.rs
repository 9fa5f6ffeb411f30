//! Model descriptions as read from JSON documents.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Current version of the model description schema.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

fn default_batch() -> u64 {
    1
}

fn default_data_width() -> u32 {
    16
}

fn default_patch_pixels() -> u64 {
    16 * 16 * 3
}

fn default_num_classes() -> u64 {
    1000
}

/// Shape-level description of a ViT-style encoder stack.
///
/// `num_tokens` counts the class token. The patch embedding is modelled as a
/// single MatMul of `num_tokens x patch_pixels` by `patch_pixels x embed_dim`,
/// and the classifier as a MatMul applied to the class-token row of each image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub schema_version: u32,
    pub name: String,
    pub embed_dim: u64,
    pub num_heads: u64,
    pub num_layers: u64,
    pub num_tokens: u64,
    pub mlp_ratio: f64,
    #[serde(default = "default_batch")]
    pub batch: u64,
    #[serde(default = "default_data_width")]
    pub data_width_bits: u32,
    #[serde(default = "default_patch_pixels")]
    pub patch_pixels: u64,
    #[serde(default = "default_num_classes")]
    pub num_classes: u64,
}

impl ModelSpec {
    /// Builds a spec with the default batch, data width, patch size and class count.
    pub fn new(
        name: impl Into<String>,
        embed_dim: u64,
        num_heads: u64,
        num_layers: u64,
        num_tokens: u64,
    ) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            name: name.into(),
            embed_dim,
            num_heads,
            num_layers,
            num_tokens,
            mlp_ratio: 4.0,
            batch: default_batch(),
            data_width_bits: default_data_width(),
            patch_pixels: default_patch_pixels(),
            num_classes: default_num_classes(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(ModelError::SchemaVersion {
                found: self.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        if self.name.trim().is_empty() {
            return Err(ModelError::invalid("name", "must not be empty"));
        }
        let positive = [
            ("embed_dim", self.embed_dim),
            ("num_heads", self.num_heads),
            ("num_layers", self.num_layers),
            ("num_tokens", self.num_tokens),
            ("batch", self.batch),
            ("data_width_bits", u64::from(self.data_width_bits)),
            ("patch_pixels", self.patch_pixels),
            ("num_classes", self.num_classes),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(ModelError::invalid(field, "must be at least 1"));
            }
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return Err(ModelError::HeadDivisibility {
                embed_dim: self.embed_dim,
                num_heads: self.num_heads,
            });
        }
        if !(self.mlp_ratio.is_finite() && self.mlp_ratio > 0.0) {
            return Err(ModelError::invalid("mlp_ratio", "must be a positive number"));
        }
        let hidden = self.embed_dim as f64 * self.mlp_ratio;
        if hidden.fract() != 0.0 || hidden < 1.0 {
            return Err(ModelError::invalid(
                "mlp_ratio",
                "embed_dim * mlp_ratio must be a positive integer",
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> u64 {
        self.embed_dim / self.num_heads
    }

    /// FFN hidden width, `embed_dim * mlp_ratio`.
    pub fn mlp_hidden(&self) -> u64 {
        (self.embed_dim as f64 * self.mlp_ratio) as u64
    }

    /// Rows of every token-major activation: tokens of all images stacked.
    pub fn rows(&self) -> u64 {
        self.num_tokens * self.batch
    }
}

/// Parses and validates a JSON model description.
pub fn parse_model(doc: &str) -> Result<ModelSpec, ModelError> {
    let spec: ModelSpec = serde_json::from_str(doc)?;
    spec.validate()?;
    Ok(spec)
}
