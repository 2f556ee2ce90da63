use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::train::{evaluate, train, EpochRecord, EvalLink};
use crate::channel::{estimate_ber, LinkConfig};
use crate::energy::{energy_report, EnergyReport};
use crate::error::{Error, Result};
use crate::events::{make_dataset, read_dataset, write_dataset, Dataset, Sample, Split};
use crate::grad::checkpoint;
use crate::rng;
use crate::snn::{ChannelUse, Graph, Model, ModelConfig, PassOptions, Recording};

pub const RUN_RECORD: &str = "run_record.json";

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-run summary; sections are filled in by the commands that produce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_eval_accuracy: Option<f64>,
    pub eval_sweep: Vec<SweepPoint>,
    pub energy: Option<Value>,
    /// Training time; the only field that varies between identical runs.
    pub wall_clock_s: Option<f64>,
}

impl RunRecord {
    fn load_or_new(cfg: &ExperimentConfig) -> Result<Self> {
        let path = cfg.output_dir.join(RUN_RECORD);
        let hash = cfg.hash()?;
        if path.is_file() {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let rec: RunRecord = serde_json::from_slice(&bytes)?;
            if rec.config_hash == hash {
                return Ok(rec);
            }
        }
        Ok(RunRecord {
            config_hash: hash,
            seed: cfg.seed,
            ..RunRecord::default()
        })
    }

    fn save(&self, cfg: &ExperimentConfig) -> Result<()> {
        write_json(&cfg.output_dir.join(RUN_RECORD), self)
    }
}

/// Builds the dataset and writes it under `<out>/dataset`, plus a CSV
/// listing of every sample.
pub fn cmd_generate_dataset(cfg: &ExperimentConfig) -> Result<Value> {
    let d = &cfg.dataset;
    let data = make_dataset(
        d.classes,
        d.per_class,
        &d.dvs,
        rng::derive_seed(cfg.seed, "dataset"),
    )?;
    let dir = cfg.dataset_dir();
    write_dataset(&dir, &data)?;
    let path = cfg.output_dir.join("dataset.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["index", "label", "split", "event_density"])?;
    for s in &data.samples {
        let split = match s.split {
            Split::Train => "train",
            Split::Eval => "eval",
        };
        w.write_record([
            s.index.to_string(),
            s.label.to_string(),
            split.into(),
            s.events.density().to_string(),
        ])?;
    }
    finish(w, &path)?;
    let density =
        data.samples.iter().map(|s| s.events.density()).sum::<f64>() / data.samples.len() as f64;
    Ok(json!({
        "command": "generate-dataset",
        "dataset_dir": dir,
        "samples": data.samples.len(),
        "train": data.split(Split::Train).count(),
        "eval": data.split(Split::Eval).count(),
        "mean_event_density": density,
    }))
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let data = read_dataset(&cfg.dataset_dir())?;
    let d = &cfg.dataset;
    if data.classes != d.classes || data.dvs != d.dvs {
        return Err(Error::Format(format!(
            "dataset at {} was generated with a different configuration",
            cfg.dataset_dir().display()
        )));
    }
    Ok(data)
}

/// Trains, saves the best checkpoint to `<out>/checkpoint.{json,bin}` and
/// writes `train_log.csv` and the run record.
pub fn cmd_train(cfg: &ExperimentConfig, on_epoch: impl FnMut(&EpochRecord)) -> Result<Value> {
    let data = load_dataset(cfg)?;
    let out = train(cfg, &data, on_epoch)?;
    let hash = cfg.hash()?;
    let ckpt = cfg.checkpoint_path();
    let metadata = json!({
        "config_hash": hash,
        "epoch": out.best_epoch,
        "eval_accuracy": out.best_eval_accuracy,
        "model": out.best.config,
    });
    checkpoint::save(&ckpt, &out.best.store, metadata)?;

    let path = cfg.output_dir.join("train_log.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["epoch", "loss", "train_accuracy", "eval_accuracy"])?;
    for e in &out.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.loss.to_string(),
            e.train_accuracy.to_string(),
            e.eval_accuracy.to_string(),
        ])?;
    }
    finish(w, &path)?;

    let record = RunRecord {
        config_hash: hash,
        seed: cfg.seed,
        epochs: out.epochs.clone(),
        best_epoch: Some(out.best_epoch),
        best_eval_accuracy: Some(out.best_eval_accuracy),
        wall_clock_s: Some(out.wall_clock_s),
        ..RunRecord::default()
    };
    record.save(cfg)?;
    Ok(json!({
        "command": "train",
        "checkpoint": checkpoint::paths(&ckpt).0,
        "best_epoch": out.best_epoch,
        "best_eval_accuracy": out.best_eval_accuracy,
        "final_loss": out.epochs.last().map(|e| e.loss),
        "wall_clock_s": out.wall_clock_s,
    }))
}

/// Loads a checkpoint; the model configuration stored with it wins over the
/// experiment's.
pub fn load_model(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<Model> {
    let path: PathBuf = path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.checkpoint_path());
    let (store, meta) = checkpoint::load(&path)?;
    let model_cfg = match meta.get("model") {
        Some(v) => serde_json::from_value::<ModelConfig>(v.clone())?,
        None => cfg.model,
    };
    Model::from_store(model_cfg, store)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma2g: f64,
    pub mean_accuracy: f64,
    pub accuracies: Vec<f64>,
}

/// Accuracy on the evaluation split for every σ²G grid point and seed.
pub fn sweep(
    cfg: &ExperimentConfig,
    model: &Model,
    samples: &[&Sample],
) -> Result<Vec<SweepPoint>> {
    let base = cfg.channel.to_params()?;
    let receive = cfg.eval_receive();
    let sweep_seed = rng::derive_seed(cfg.seed, "eval-sweep");
    cfg.evaluation
        .sigma2g_grid
        .iter()
        .enumerate()
        .map(|(gi, &s2g)| {
            let params = base.with_normalized_pointing(s2g)?;
            let accuracies = (0..cfg.evaluation.seeds)
                .map(|k| {
                    let seed = rng::derive_indexed(
                        rng::derive_indexed(sweep_seed, "point", gi as u64),
                        "seed",
                        k as u64,
                    );
                    evaluate(
                        model,
                        samples,
                        EvalLink::Link(params, receive),
                        seed,
                        cfg.evaluation.batch_size,
                    )
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SweepPoint {
                sigma2g: s2g,
                mean_accuracy: accuracies.iter().sum::<f64>() / accuracies.len() as f64,
                accuracies,
            })
        })
        .collect()
}

/// Writes `eval_sweep.csv` with one row per (σ²G, seed).
pub fn cmd_eval_sweep(cfg: &ExperimentConfig, checkpoint_path: Option<&Path>) -> Result<Value> {
    let model = load_model(cfg, checkpoint_path)?;
    let data = load_dataset(cfg)?;
    let samples: Vec<&Sample> = data.split(Split::Eval).collect();
    let points = sweep(cfg, &model, &samples)?;
    let mode = match cfg.eval_receive() {
        crate::snn::ReceiveMode::Soft => "soft",
        crate::snn::ReceiveMode::Hard => "hard",
    };
    let path = cfg.output_dir.join("eval_sweep.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["sigma2G", "seed", "mode", "accuracy", "n_samples"])?;
    for p in &points {
        for (k, a) in p.accuracies.iter().enumerate() {
            w.write_record([
                p.sigma2g.to_string(),
                k.to_string(),
                mode.into(),
                a.to_string(),
                samples.len().to_string(),
            ])?;
        }
    }
    finish(w, &path)?;
    let mut record = RunRecord::load_or_new(cfg)?;
    record.eval_sweep = points.clone();
    record.save(cfg)?;
    Ok(json!({
        "command": "eval-sweep",
        "csv": path,
        "mode": mode,
        "points": points,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerPoint {
    pub sweep: &'static str,
    pub sigma2g: f64,
    pub noise_floor: f64,
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
}

/// Monte-Carlo BER over the σ²G grid (noise floor from the link) and over
/// the noise-floor grid (no pointing error).
pub fn ber_grid(cfg: &ExperimentConfig) -> Result<Vec<BerPoint>> {
    let seed = rng::derive_seed(cfg.seed, "ber");
    let mut jobs: Vec<(&'static str, f64, f64)> = cfg
        .ber
        .sigma2g_grid
        .iter()
        .map(|&s| ("sigma2G", s, cfg.channel.noise_floor))
        .collect();
    jobs.extend(
        cfg.ber
            .noise_floor_grid
            .iter()
            .map(|&n| ("noise_floor", 0.0, n)),
    );
    jobs.par_iter()
        .enumerate()
        .map(|(i, &(sweep, s2g, noise))| {
            let params = LinkConfig {
                noise_floor: noise,
                ..cfg.channel
            }
            .to_params()?
            .with_normalized_pointing(s2g)?;
            let est = estimate_ber(
                &params,
                cfg.ber.bits,
                rng::derive_indexed(seed, "point", i as u64),
            )?;
            Ok(BerPoint {
                sweep,
                sigma2g: s2g,
                noise_floor: noise,
                errors: est.errors,
                bits: est.bits,
                ber: est.rate(),
            })
        })
        .collect()
}

pub fn cmd_ber(cfg: &ExperimentConfig) -> Result<Value> {
    let points = ber_grid(cfg)?;
    let path = cfg.output_dir.join("ber.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["sweep", "sigma2G", "noise_floor", "errors", "bits", "ber"])?;
    for p in &points {
        w.write_record([
            p.sweep.to_string(),
            p.sigma2g.to_string(),
            p.noise_floor.to_string(),
            p.errors.to_string(),
            p.bits.to_string(),
            p.ber.to_string(),
        ])?;
    }
    finish(w, &path)?;
    Ok(json!({ "command": "ber", "csv": path, "points": points }))
}

/// Recorded forward passes over `samples` through the evaluation link
/// without pointing error.
pub fn record_activity(
    cfg: &ExperimentConfig,
    model: &Model,
    samples: &[&Sample],
) -> Result<Recording> {
    if samples.is_empty() {
        return Err(Error::Empty("energy samples"));
    }
    let params = cfg.channel.to_params()?.with_normalized_pointing(0.0)?;
    let seed = rng::derive_seed(cfg.seed, "energy");
    let parts = samples
        .par_chunks(cfg.evaluation.batch_size)
        .enumerate()
        .map(|(i, batch)| {
            let frames: Vec<&[i8]> = batch.iter().map(|s| s.events.data.as_slice()).collect();
            let options = PassOptions {
                record: true,
                ..PassOptions::eval(rng::derive_indexed(seed, "attention", i as u64))
            };
            let mut g = Graph::new(&model.store, options);
            let channel = ChannelUse::Link {
                params,
                receive: cfg.eval_receive(),
                seed: rng::derive_indexed(seed, "channel", i as u64),
            };
            model.forward(&mut g, &frames, &channel)?;
            g.recording.take().ok_or(Error::Empty("activity recording"))
        })
        .collect::<Result<Vec<Recording>>>()?;
    let mut all = Recording::default();
    for r in parts {
        all.traces.extend(r.traces);
        for v in [r.prob_min, r.prob_max].into_iter().flatten() {
            all.prob_min = Some(all.prob_min.map_or(v, |m| m.min(v)));
            all.prob_max = Some(all.prob_max.map_or(v, |m| m.max(v)));
        }
    }
    Ok(all)
}

pub fn energy_for(cfg: &ExperimentConfig, model: &Model, data: &Dataset) -> Result<EnergyReport> {
    let mut samples: Vec<&Sample> = data.split(Split::Eval).collect();
    if let Some(n) = cfg.energy.samples {
        samples.truncate(n);
    }
    let rec = record_activity(cfg, model, &samples)?;
    energy_report(&rec, samples.len() as u64, &cfg.energy.table)
}

/// Writes `energy.csv` (per-inference counts and energy for the spiking
/// model and its dense equivalent) and `energy.json`.
pub fn cmd_energy(cfg: &ExperimentConfig, checkpoint_path: Option<&Path>) -> Result<Value> {
    let model = load_model(cfg, checkpoint_path)?;
    let data = load_dataset(cfg)?;
    let report = energy_for(cfg, &model, &data)?;
    let path = cfg.output_dir.join("energy.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "stage",
        "variant",
        "category",
        "count",
        "pj_per_op",
        "total_pj",
    ])?;
    let per = report.inferences as f64;
    for s in &report.stages {
        let stage = serde_json::to_value(s.stage)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        for (variant, counts) in [("spiking", &s.spiking), ("dense", &s.dense)] {
            for ((cat, n), price) in counts.entries().into_iter().zip(report.table.prices()) {
                let count = n as f64 / per;
                w.write_record([
                    stage.clone(),
                    variant.into(),
                    cat.into(),
                    count.to_string(),
                    price.to_string(),
                    (n as f64 * price / per).to_string(),
                ])?;
            }
        }
    }
    finish(w, &path)?;
    let summary = json!({
        "inferences": report.inferences,
        "stages": report.stages.iter().map(|s| json!({
            "stage": s.stage,
            "spiking_pj": s.spiking_pj,
            "dense_pj": s.dense_pj,
            "spiking": crate::energy::format_joules(s.spiking_pj * 1e-12),
            "dense": crate::energy::format_joules(s.dense_pj * 1e-12),
            "ratio": s.spiking_pj / s.dense_pj,
            "input_spike_rate": s.input_spike_rate,
            "neuron_spike_rate": s.neuron_spike_rate,
        })).collect::<Vec<_>>(),
        "table": report.table,
        "layers": report.layers,
    });
    write_json(&cfg.output_dir.join("energy.json"), &summary)?;
    let mut record = RunRecord::load_or_new(cfg)?;
    record.energy = Some(summary.clone());
    record.save(cfg)?;
    Ok(json!({ "command": "energy", "csv": path, "summary": summary }))
}
