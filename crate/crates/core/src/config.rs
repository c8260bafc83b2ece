//! Training configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hyperparameters and toggles for training and the scoring model.
///
/// Defaults follow the reference settings: learning rate 1e-3, 15 epochs,
/// batch size 1, POS embedding width 20, syntax width 512, entity width
/// 256, relation width 50, dropout 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Only 1 is supported; the trainer updates after every document.
    pub batch_size: usize,
    /// Token embedding width (the reference encoder's output width).
    pub h_x: usize,
    /// POS embedding width.
    pub h_p: usize,
    /// Syntax-enriched representation width.
    pub h_s: usize,
    /// Entity head width.
    pub h_e: usize,
    /// Relation head width.
    pub h_r: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Maximum token vocabulary size (excluding the reserved unknown row).
    pub vocab_size: usize,
    /// When false, the syntax module is bypassed entirely and `H_s` comes
    /// from a dedicated token-embedding projection.
    pub use_skem: bool,
    /// When false, POS embeddings are zeroed before the graph convolution.
    pub use_pos: bool,
    /// When false, the dependency adjacency is identity (self-loops only).
    pub use_dep: bool,
    /// When true, POS tags and dependency edges are replaced by seeded
    /// random draws of the same shape (random-syntax ablation).
    pub randomize_syntax: bool,
    /// Symmetric degree normalization of the adjacency; off by default.
    pub normalize_adjacency: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 15,
            batch_size: 1,
            h_x: 64,
            h_p: 20,
            h_s: 512,
            h_e: 256,
            h_r: 50,
            dropout: 0.5,
            seed: 0,
            vocab_size: 30000,
            use_skem: true,
            use_pos: true,
            use_dep: true,
            randomize_syntax: false,
            normalize_adjacency: false,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("dimension {name} must be positive")]
    ZeroDimension { name: &'static str },
    #[error("dropout must lie in [0, 1), got {value}")]
    DropoutOutOfRange { value: String },
    #[error("batch_size must be 1, got {value}")]
    UnsupportedBatchSize { value: usize },
    #[error("learning_rate must be positive and finite")]
    BadLearningRate,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("h_x", self.h_x),
            ("h_p", self.h_p),
            ("h_s", self.h_s),
            ("h_e", self.h_e),
            ("h_r", self.h_r),
            ("vocab_size", self.vocab_size),
        ] {
            if value == 0 {
                return Err(ConfigError::ZeroDimension { name });
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ConfigError::DropoutOutOfRange {
                value: format!("{}", self.dropout),
            });
        }
        if self.batch_size != 1 {
            return Err(ConfigError::UnsupportedBatchSize {
                value: self.batch_size,
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ConfigError::BadLearningRate);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 1e-3);
        assert_eq!(c.epochs, 15);
        assert_eq!(c.batch_size, 1);
        assert_eq!(c.h_p, 20);
        assert_eq!(c.h_s, 512);
        assert_eq!(c.h_e, 256);
        assert_eq!(c.h_r, 50);
        assert_eq!(c.dropout, 0.5);
        assert!(c.use_skem && c.use_pos && c.use_dep);
        assert!(!c.randomize_syntax);
        assert!(!c.normalize_adjacency);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut c = TrainConfig {
            h_e: 0,
            ..TrainConfig::default()
        };
        assert_eq!(
            c.validate(),
            Err(ConfigError::ZeroDimension { name: "h_e" })
        );
        c.h_e = 8;
        c.dropout = 1.0;
        assert!(matches!(
            c.validate(),
            Err(ConfigError::DropoutOutOfRange { .. })
        ));
        c.dropout = 0.1;
        c.batch_size = 4;
        assert_eq!(
            c.validate(),
            Err(ConfigError::UnsupportedBatchSize { value: 4 })
        );
    }

    #[test]
    fn partial_config_files_fill_in_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "h_s": 32}"#).unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.h_s, 32);
        assert_eq!(c.learning_rate, 1e-3);
    }
}
