use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grad::SurrogateSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifConfig {
    pub beta: f64,
    pub threshold: f64,
}

impl Default for LifConfig {
    fn default() -> Self {
        LifConfig {
            beta: 0.9,
            threshold: 1.0,
        }
    }
}

impl LifConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) || self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(invalid(format!(
                "LIF needs beta in [0,1] and threshold > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub height: usize,
    pub width: usize,
    pub patch: usize,
    pub dim: usize,
    pub layers: usize,
    pub timesteps: usize,
    pub lth_k: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            height: 32,
            width: 32,
            patch: 8,
            dim: 32,
            layers: 2,
            timesteps: 5,
            lth_k: 4,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.height,
            self.width,
            self.patch,
            self.dim,
            self.layers,
            self.timesteps,
            self.lth_k,
        ]
        .iter()
        .all(|&v| v > 0);
        if !all_positive {
            return Err(invalid(format!("encoder sizes must be positive: {self:?}")));
        }
        if !self.height.is_multiple_of(self.patch) || !self.width.is_multiple_of(self.patch) {
            return Err(invalid(format!(
                "patch {} must divide {}x{}",
                self.patch, self.height, self.width
            )));
        }
        Ok(())
    }

    /// Number of tokens N = (H/P)·(W/P).
    pub fn tokens(&self) -> usize {
        (self.height / self.patch) * (self.width / self.patch)
    }

    /// Input width of a token: two polarity channels of P² pixels.
    pub fn patch_features(&self) -> usize {
        2 * self.patch * self.patch
    }

    /// Channel symbols per time step, K·T.
    pub fn slots(&self) -> usize {
        self.lth_k * self.timesteps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    pub embed_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_hidden: usize,
    pub classes: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            embed_dim: 32,
            heads: 4,
            layers: 1,
            ffn_hidden: 64,
            classes: 4,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.embed_dim,
            self.heads,
            self.layers,
            self.ffn_hidden,
            self.classes,
        ]
        .iter()
        .all(|&v| v > 0);
        if !all_positive {
            return Err(invalid(format!("decoder sizes must be positive: {self:?}")));
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return Err(invalid(format!(
                "heads {} must divide embed_dim {}",
                self.heads, self.embed_dim
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }
}

/// LIF constants for each layer group.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifGroups {
    pub encoder: LifConfig,
    pub decoder: LifConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
    pub lif: LifGroups,
    pub surrogate: SurrogateSpec,
    /// Scale of the uniform weight initialization, relative to 1/√fan_in.
    pub init_gain: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderConfig::default(),
            decoder: DecoderConfig::default(),
            lif: LifGroups::default(),
            surrogate: SurrogateSpec::default(),
            init_gain: 2.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        self.lif.encoder.validate()?;
        self.lif.decoder.validate()?;
        self.surrogate.validate()?;
        if self.init_gain.is_nan() || self.init_gain <= 0.0 {
            return Err(invalid("init_gain must be > 0"));
        }
        Ok(())
    }
}
