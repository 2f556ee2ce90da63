use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::generate_scene;
use super::{events_from_frames, frames_from_motion, DvsConfig, EventFrames};
use crate::error::{invalid, Error, Result};
use crate::rng;

pub const INDEX_FILE: &str = "index.json";
pub const INDEX_FORMAT: &str = "spikelink-events";
const INDEX_VERSION: u32 = 1;
const SAMPLE_DIR: &str = "samples";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub index: usize,
    pub label: usize,
    pub split: Split,
    pub events: EventFrames,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub classes: usize,
    pub dvs: DvsConfig,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split)
    }
}

/// Which within-class positions go to training: a seeded permutation of
/// `0..per_class`, first half train.
fn train_mask(seed: u64, class: usize, per_class: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..per_class).collect();
    order.shuffle(&mut rng::stream(rng::derive_indexed(
        seed,
        "split",
        class as u64,
    )));
    let mut mask = vec![false; per_class];
    for &i in &order[..per_class / 2] {
        mask[i] = true;
    }
    mask
}

/// `per_class` sequences of every class, sample `index = class·per_class + i`,
/// split evenly into training and evaluation halves per class.
pub fn make_dataset(
    classes: usize,
    per_class: usize,
    cfg: &DvsConfig,
    seed: u64,
) -> Result<Dataset> {
    cfg.validate()?;
    if classes == 0 {
        return Err(invalid("need at least one class"));
    }
    if per_class == 0 || !per_class.is_multiple_of(2) {
        return Err(invalid(format!(
            "samples per class must be even and positive, got {per_class}"
        )));
    }
    let masks: Vec<Vec<bool>> = (0..classes)
        .map(|c| train_mask(seed, c, per_class))
        .collect();
    let samples = (0..classes * per_class)
        .into_par_iter()
        .map(|index| {
            let (label, pos) = (index / per_class, index % per_class);
            let s = rng::derive_indexed(seed, "sample", index as u64);
            let scene = generate_scene(label, classes, s, cfg.scene_size)?;
            let max = cfg.max_origin();
            let mut r = rng::stream(rng::derive_seed(s, "origin"));
            let origin = (r.random_range(0..=max.0), r.random_range(0..=max.1));
            let frames = frames_from_motion(&scene, cfg, origin)?;
            let events = events_from_frames(&frames, cfg.height, cfg.width, cfg.threshold)?;
            Ok(Sample {
                index,
                label,
                split: if masks[label][pos] {
                    Split::Train
                } else {
                    Split::Eval
                },
                events,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        classes,
        dvs: *cfg,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub index: usize,
    pub file: String,
    pub label: usize,
    pub split: Split,
}

/// On-disk description of a dataset: every sample is a raw `i8` file of
/// `shape = [T, H, W]` values under `samples/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetIndex {
    pub format: String,
    pub version: u32,
    pub classes: usize,
    pub dtype: String,
    pub shape: [usize; 3],
    pub dvs: DvsConfig,
    pub samples: Vec<IndexEntry>,
}

impl DatasetIndex {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format(m));
        if self.format != INDEX_FORMAT || self.version != INDEX_VERSION {
            return bad(format!(
                "unsupported index {} v{}",
                self.format, self.version
            ));
        }
        if self.dtype != "i8" {
            return bad(format!("unsupported dtype {}", self.dtype));
        }
        let [t, h, w] = self.shape;
        if [t, h, w] != [self.dvs.timesteps, self.dvs.height, self.dvs.width] {
            return bad(format!(
                "shape {:?} disagrees with the event config",
                self.shape
            ));
        }
        self.dvs
            .validate()
            .map_err(|e| Error::Format(e.to_string()))?;
        if self.classes == 0 {
            return bad("zero classes".into());
        }
        let mut seen = HashSet::new();
        for e in &self.samples {
            if e.label >= self.classes {
                return bad(format!(
                    "sample {}: label {} of {} classes",
                    e.index, e.label, self.classes
                ));
            }
            if !seen.insert(e.index) {
                return bad(format!("duplicate sample index {}", e.index));
            }
            let plain = !e.file.is_empty()
                && e.file
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-')
                && !e.file.starts_with('.');
            if !plain {
                return bad(format!(
                    "sample {}: file name {:?} not allowed",
                    e.index, e.file
                ));
            }
        }
        Ok(())
    }

    /// Bytes in one sample file.
    pub fn sample_len(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Parses and validates `index.json` contents.
pub fn parse_index(bytes: &[u8]) -> Result<DatasetIndex> {
    let index: DatasetIndex = serde_json::from_slice(bytes)?;
    index.validate()?;
    Ok(index)
}

/// Decodes one sample file of the given `[T, H, W]` shape.
pub fn decode_sample(bytes: &[u8], shape: [usize; 3]) -> Result<EventFrames> {
    let [t, h, w] = shape;
    if bytes.len() != t * h * w {
        return Err(Error::Format(format!(
            "sample holds {} bytes, expected {}",
            bytes.len(),
            t * h * w
        )));
    }
    EventFrames::new(t, h, w, bytes.iter().map(|&b| b as i8).collect())
        .map_err(|e| Error::Format(e.to_string()))
}

fn sample_file(index: usize) -> String {
    format!("{index:06}.bin")
}

pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<DatasetIndex> {
    let samples_dir = dir.join(SAMPLE_DIR);
    fs::create_dir_all(&samples_dir).map_err(|e| Error::io(&samples_dir, e))?;
    let mut entries = Vec::with_capacity(data.samples.len());
    for s in &data.samples {
        let file = sample_file(s.index);
        let path = samples_dir.join(&file);
        let bytes: Vec<u8> = s.events.data.iter().map(|&v| v as u8).collect();
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(IndexEntry {
            index: s.index,
            file,
            label: s.label,
            split: s.split,
        });
    }
    let index = DatasetIndex {
        format: INDEX_FORMAT.into(),
        version: INDEX_VERSION,
        classes: data.classes,
        dtype: "i8".into(),
        shape: [data.dvs.timesteps, data.dvs.height, data.dvs.width],
        dvs: data.dvs,
        samples: entries,
    };
    let path = dir.join(INDEX_FILE);
    let mut json = serde_json::to_string_pretty(&index)?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(index)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join(INDEX_FILE);
    if !path.is_file() {
        return Err(Error::DatasetMissing(dir.to_path_buf()));
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let index = parse_index(&bytes)?;
    let samples = index
        .samples
        .iter()
        .map(|e| {
            let p = dir.join(SAMPLE_DIR).join(&e.file);
            let raw = fs::read(&p).map_err(|err| Error::io(&p, err))?;
            Ok(Sample {
                index: e.index,
                label: e.label,
                split: e.split,
                events: decode_sample(&raw, index.shape)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        classes: index.classes,
        dvs: index.dvs,
        samples,
    })
}
