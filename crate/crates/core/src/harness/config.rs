use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{db_to_gain, loss_db_to_factor, LinkConfig, LinkParams};
use crate::energy::EnergyTable;
use crate::error::{invalid, Error, Result};
use crate::events::DvsConfig;
use crate::grad::AdamConfig;
use crate::snn::{ModelConfig, ReceiveMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub classes: usize,
    pub per_class: usize,
    pub dvs: DvsConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            classes: 4,
            per_class: 100,
            dvs: DvsConfig::default(),
        }
    }
}

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    fn validate(&self, what: &str) -> Result<()> {
        if !(self.0.is_finite() && self.1.is_finite() && self.0 <= self.1) {
            return Err(invalid(format!(
                "{what}: bad range [{}, {}]",
                self.0, self.1
            )));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, r: &mut R) -> f64 {
        if self.0 == self.1 {
            self.0
        } else {
            r.random_range(self.0..=self.1)
        }
    }
}

/// Link parameter ranges redrawn for every training batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelRanges {
    pub responsivity: Range,
    pub amplifier_gain_db: Range,
    pub free_space_loss_db: Range,
    pub pointing_sensitivity: f64,
    pub pointing_variance: Range,
}

impl Default for ChannelRanges {
    fn default() -> Self {
        ChannelRanges {
            responsivity: Range(0.6, 0.9),
            amplifier_gain_db: Range(20.0, 40.0),
            free_space_loss_db: Range(10.0, 15.0),
            pointing_sensitivity: 1e6,
            pointing_variance: Range(0.0, 5e-7),
        }
    }
}

impl ChannelRanges {
    pub fn validate(&self) -> Result<()> {
        self.responsivity.validate("responsivity")?;
        self.amplifier_gain_db.validate("amplifier_gain_db")?;
        self.free_space_loss_db.validate("free_space_loss_db")?;
        self.pointing_variance.validate("pointing_variance")?;
        if self.pointing_variance.0 < 0.0 {
            return Err(invalid("pointing variance range must be >= 0"));
        }
        Ok(())
    }

    /// One draw; noise and on-power come from `base`.
    pub fn draw<R: Rng + ?Sized>(&self, base: &LinkConfig, r: &mut R) -> Result<LinkParams> {
        let p = LinkParams {
            responsivity: self.responsivity.sample(r),
            amplifier_gain: db_to_gain(self.amplifier_gain_db.sample(r)),
            free_space_loss: loss_db_to_factor(self.free_space_loss_db.sample(r)),
            pointing_sensitivity: self.pointing_sensitivity,
            pointing_variance: self.pointing_variance.sample(r),
            noise_floor: base.noise_floor,
            signal_noise_factor: base.signal_noise_factor,
            on_power: base.on_power,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    #[default]
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    /// Learning rate over epochs, ending at `final_lr_fraction`·lr.
    pub lr_schedule: LrSchedule,
    pub final_lr_fraction: f64,
    pub receive: ReceiveMode,
    pub channel_ranges: ChannelRanges,
    /// Train without the link (spikes delivered unchanged).
    pub ideal_channel: bool,
    /// Binarity of every spike tensor is asserted on every n-th batch.
    pub binary_check_every: usize,
}

impl TrainingConfig {
    /// Learning rate used throughout `epoch`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let lr = self.optimizer.lr;
        match self.lr_schedule {
            LrSchedule::Constant => lr,
            LrSchedule::Cosine => {
                let progress = if self.epochs > 1 {
                    epoch as f64 / (self.epochs - 1) as f64
                } else {
                    0.0
                };
                let f = self.final_lr_fraction;
                lr * (f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
            }
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 30,
            batch_size: 16,
            optimizer: AdamConfig::default(),
            lr_schedule: LrSchedule::Cosine,
            final_lr_fraction: 0.05,
            receive: ReceiveMode::Soft,
            channel_ranges: ChannelRanges::default(),
            ideal_channel: false,
            binary_check_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub sigma2g_grid: Vec<f64>,
    pub seeds: usize,
    /// Receiver used by the sweep; the training receiver when absent.
    pub receive: Option<ReceiveMode>,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            sigma2g_grid: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            seeds: 3,
            receive: None,
            batch_size: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerConfig {
    pub sigma2g_grid: Vec<f64>,
    pub noise_floor_grid: Vec<f64>,
    pub bits: u64,
}

impl Default for BerConfig {
    fn default() -> Self {
        BerConfig {
            sigma2g_grid: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            noise_floor_grid: vec![1e-6, 1e-5, 1e-4],
            bits: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub table: EnergyTable,
    /// Evaluation samples counted; all when absent.
    pub samples: Option<usize>,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            table: EnergyTable::default(),
            samples: Some(64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    /// Evaluation link; its noise and on-power also apply during training.
    pub channel: LinkConfig,
    pub training: TrainingConfig,
    pub evaluation: EvalConfig,
    pub ber: BerConfig,
    pub energy: EnergyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            output_dir: PathBuf::from("runs/default"),
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            channel: LinkConfig::default(),
            training: TrainingConfig::default(),
            evaluation: EvalConfig::default(),
            ber: BerConfig::default(),
            energy: EnergyConfig::default(),
        }
    }
}

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid(format!("{what} grid is empty")));
    }
    if let Some(v) = grid.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(invalid(format!(
            "{what} grid value {v} must be finite and >= 0"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_slice(bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&bytes)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        d.dvs.validate()?;
        if d.classes == 0 || d.per_class == 0 || !d.per_class.is_multiple_of(2) {
            return Err(invalid(
                "dataset needs classes > 0 and an even, positive per_class",
            ));
        }
        self.model.validate()?;
        let e = &self.model.encoder;
        if (e.height, e.width, e.timesteps) != (d.dvs.height, d.dvs.width, d.dvs.timesteps) {
            return Err(invalid(format!(
                "encoder input {}x{}x{} differs from event frames {}x{}x{}",
                e.timesteps, e.height, e.width, d.dvs.timesteps, d.dvs.height, d.dvs.width
            )));
        }
        if self.model.decoder.classes != d.classes {
            return Err(invalid(format!(
                "decoder has {} classes, dataset {}",
                self.model.decoder.classes, d.classes
            )));
        }
        self.channel.to_params()?;
        let t = &self.training;
        if t.epochs == 0 || t.batch_size == 0 || t.binary_check_every == 0 {
            return Err(invalid(
                "epochs, batch_size and binary_check_every must be positive",
            ));
        }
        t.optimizer.validate()?;
        if !(t.final_lr_fraction > 0.0 && t.final_lr_fraction <= 1.0) {
            return Err(invalid(format!(
                "final_lr_fraction must lie in (0, 1], got {}",
                t.final_lr_fraction
            )));
        }
        t.channel_ranges.validate()?;
        check_grid(&self.evaluation.sigma2g_grid, "sigma2g")?;
        if self.evaluation.seeds == 0 || self.evaluation.batch_size == 0 {
            return Err(invalid("evaluation seeds and batch_size must be positive"));
        }
        check_grid(&self.ber.sigma2g_grid, "BER sigma2g")?;
        check_grid(&self.ber.noise_floor_grid, "BER noise floor")?;
        if self.ber.bits == 0 {
            return Err(invalid("BER bit count must be positive"));
        }
        self.energy.table.validate()?;
        if self.energy.samples == Some(0) {
            return Err(invalid("energy sample count must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical (sorted-key) JSON form, without `output_dir`.
    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
        }
        let canonical = serde_json::to_string(&v)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn eval_receive(&self) -> ReceiveMode {
        self.evaluation.receive.unwrap_or(self.training.receive)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.output_dir.join("dataset")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output_dir.join("checkpoint")
    }
}
