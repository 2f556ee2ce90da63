//! Synthetic event-camera data: procedural scenes, a crop sliding across
//! the scene, and thresholded brightness differences between crops.

mod dataset;
mod scene;

pub use dataset::{
    decode_sample, make_dataset, parse_index, read_dataset, write_dataset, Dataset, DatasetIndex,
    IndexEntry, Sample, Split, INDEX_FILE, INDEX_FORMAT,
};
pub use scene::{generate_scene, Scene, FAMILIES};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DvsConfig {
    /// Contrast threshold on linear intensity differences.
    pub threshold: f64,
    pub height: usize,
    pub width: usize,
    /// Pixels moved per step.
    pub shift: usize,
    pub axis: Axis,
    pub timesteps: usize,
    /// Side of the square scene the crop moves across.
    pub scene_size: usize,
}

impl Default for DvsConfig {
    fn default() -> Self {
        DvsConfig {
            threshold: 0.1,
            height: 32,
            width: 32,
            shift: 1,
            axis: Axis::X,
            timesteps: 5,
            scene_size: 48,
        }
    }
}

impl DvsConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() || self.threshold <= 0.0 {
            return Err(invalid(format!(
                "contrast threshold must be > 0, got {}",
                self.threshold
            )));
        }
        if self.height == 0 || self.width == 0 || self.scene_size == 0 {
            return Err(invalid("crop and scene sizes must be positive"));
        }
        if self.timesteps < 2 {
            return Err(invalid(format!(
                "need at least 2 timesteps, got {}",
                self.timesteps
            )));
        }
        let (along, across) = self.extent();
        if along > self.scene_size || across > self.scene_size {
            return Err(invalid(format!(
                "crop {}x{} moving {} px x {} steps does not fit a {} px scene",
                self.height, self.width, self.shift, self.timesteps, self.scene_size
            )));
        }
        Ok(())
    }

    /// Pixels spanned along and across the motion axis.
    fn extent(&self) -> (usize, usize) {
        let travel = (self.timesteps - 1) * self.shift;
        match self.axis {
            Axis::X => (self.width + travel, self.height),
            Axis::Y => (self.height + travel, self.width),
        }
    }

    /// Largest legal crop origin (row, col).
    pub fn max_origin(&self) -> (usize, usize) {
        let (along, across) = self.extent();
        let (slack_along, slack_across) = (self.scene_size - along, self.scene_size - across);
        match self.axis {
            Axis::X => (slack_across, slack_along),
            Axis::Y => (slack_along, slack_across),
        }
    }
}

/// T frames of values in {−1, 0, 1}, each `height × width`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFrames {
    pub timesteps: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<i8>,
}

impl EventFrames {
    pub fn new(timesteps: usize, height: usize, width: usize, data: Vec<i8>) -> Result<Self> {
        if data.len() != timesteps * height * width {
            return Err(shape(format!(
                "{} event values for {timesteps}x{height}x{width}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(invalid(format!("event value {v} outside {{-1, 0, 1}}")));
        }
        Ok(EventFrames {
            timesteps,
            height,
            width,
            data,
        })
    }

    pub fn frame(&self, t: usize) -> &[i8] {
        let n = self.height * self.width;
        &self.data[t * n..(t + 1) * n]
    }

    /// Fraction of nonzero entries.
    pub fn density(&self) -> f64 {
        self.data.iter().filter(|&&v| v != 0).count() as f64 / self.data.len().max(1) as f64
    }
}

/// Crops of `scene` at offsets `origin + t·shift` along the motion axis,
/// t = 0..T−1.
pub fn frames_from_motion(
    scene: &Scene,
    cfg: &DvsConfig,
    origin: (usize, usize),
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if scene.size != cfg.scene_size {
        return Err(shape(format!(
            "scene is {} px, config expects {}",
            scene.size, cfg.scene_size
        )));
    }
    let max = cfg.max_origin();
    if origin.0 > max.0 || origin.1 > max.1 {
        return Err(invalid(format!("crop origin {origin:?} beyond {max:?}")));
    }
    Ok((0..cfg.timesteps)
        .map(|t| {
            let off = t * cfg.shift;
            let (r0, c0) = match cfg.axis {
                Axis::X => (origin.0, origin.1 + off),
                Axis::Y => (origin.0 + off, origin.1),
            };
            (0..cfg.height)
                .flat_map(|r| {
                    let row = (r0 + r) * scene.size + c0;
                    scene.pixels[row..row + cfg.width].iter().copied()
                })
                .collect()
        })
        .collect())
}

/// I_t = sign(F_t − F_{t−1}) where |F_t − F_{t−1}| > threshold, else 0.
/// The first event frame is all zeros.
pub fn events_from_frames(
    frames: &[Vec<f64>],
    height: usize,
    width: usize,
    threshold: f64,
) -> Result<EventFrames> {
    if frames.len() < 2 {
        return Err(invalid(format!(
            "need at least 2 frames, got {}",
            frames.len()
        )));
    }
    let n = height * width;
    if let Some(f) = frames.iter().find(|f| f.len() != n) {
        return Err(shape(format!(
            "frame of {} pixels, expected {height}x{width}",
            f.len()
        )));
    }
    let mut data = vec![0i8; frames.len() * n];
    for t in 1..frames.len() {
        for (i, (&now, &prev)) in frames[t].iter().zip(&frames[t - 1]).enumerate() {
            let d = now - prev;
            if d.abs() > threshold {
                data[t * n + i] = if d > 0.0 { 1 } else { -1 };
            }
        }
    }
    EventFrames::new(frames.len(), height, width, data)
}
