use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::channel::LinkParams;
use crate::error::{Error, Result};
use crate::events::{Dataset, Sample, Split};
use crate::grad::{Adam, ParamStore};
use crate::rng;
use crate::snn::{predict, ChannelUse, Graph, Model, PassOptions, ReceiveMode};

/// Link seen by an evaluation pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalLink {
    Ideal,
    Link(LinkParams, ReceiveMode),
}

impl EvalLink {
    fn channel(&self, seed: u64) -> ChannelUse {
        match *self {
            EvalLink::Ideal => ChannelUse::Ideal,
            EvalLink::Link(params, receive) => ChannelUse::Link {
                params,
                receive,
                seed,
            },
        }
    }
}

/// Accuracy of `model` on `samples`. Batch i draws its channel and
/// attention randomness from `derive_indexed(seed, .., i)`, so the result
/// does not depend on the thread count.
pub fn evaluate(
    model: &Model,
    samples: &[&Sample],
    link: EvalLink,
    seed: u64,
    batch_size: usize,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation samples"));
    }
    let correct = samples
        .par_chunks(batch_size.max(1))
        .enumerate()
        .map(|(i, batch)| {
            let frames: Vec<&[i8]> = batch.iter().map(|s| s.events.data.as_slice()).collect();
            let mut g = Graph::new(
                &model.store,
                PassOptions::eval(rng::derive_indexed(seed, "attention", i as u64)),
            );
            let f = model.forward(
                &mut g,
                &frames,
                &link.channel(rng::derive_indexed(seed, "channel", i as u64)),
            )?;
            let pred = predict(g.tape.value(f.logits));
            Ok(pred
                .iter()
                .zip(batch.iter())
                .filter(|(p, s)| **p == s.label)
                .count())
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub eval_accuracy: f64,
}

pub struct TrainOutcome {
    /// Parameters of the epoch with the best evaluation accuracy.
    pub best: Model,
    /// Parameters after the final epoch.
    pub last: Model,
    pub best_epoch: usize,
    pub best_eval_accuracy: f64,
    pub epochs: Vec<EpochRecord>,
    pub wall_clock_s: f64,
}

/// End-to-end training through the randomized link.
///
/// Each batch redraws the link from `training.channel_ranges`, runs the
/// hard spiking forward with surrogate gradients, and takes one Adam step.
/// After every epoch the model is scored on the evaluation split over the
/// configured evaluation link with pointing error switched off.
pub fn train(
    cfg: &ExperimentConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let t = &cfg.training;
    let mut model = Model::init(cfg.model, rng::derive_seed(cfg.seed, "init"))?;
    let mut adam = Adam::new(t.optimizer, &model.store)?;
    let train_set: Vec<&Sample> = data.split(Split::Train).collect();
    let eval_set: Vec<&Sample> = data.split(Split::Eval).collect();
    if train_set.is_empty() || eval_set.is_empty() {
        return Err(Error::Empty("training or evaluation split"));
    }
    let eval_link = EvalLink::Link(
        cfg.channel.to_params()?.with_normalized_pointing(0.0)?,
        cfg.eval_receive(),
    );
    let channel_seed = rng::derive_seed(cfg.seed, "channel");
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut epochs = Vec::with_capacity(t.epochs);
    let mut step = 0u64;
    for epoch in 0..t.epochs {
        adam.config.lr = t.learning_rate(epoch);
        let mut order = train_set.clone();
        order.shuffle(&mut rng::stream(rng::derive_indexed(
            cfg.seed,
            "shuffle",
            epoch as u64,
        )));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, batch) in order.chunks(t.batch_size).enumerate() {
            let frames: Vec<&[i8]> = batch.iter().map(|s| s.events.data.as_slice()).collect();
            let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
            let batch_seed = rng::derive_indexed(channel_seed, "batch", step);
            let channel = if t.ideal_channel {
                ChannelUse::Ideal
            } else {
                let params = t
                    .channel_ranges
                    .draw(&cfg.channel, &mut rng::stream(batch_seed))?;
                ChannelUse::Link {
                    params,
                    receive: t.receive,
                    seed: batch_seed,
                }
            };
            let options = PassOptions {
                check_binary: step.is_multiple_of(t.binary_check_every as u64),
                ..PassOptions::train(rng::derive_indexed(cfg.seed, "attention", step))
            };
            let (loss, preds, tape, grads, updates) = {
                let mut g = Graph::new(&model.store, options);
                let f = model.forward(&mut g, &frames, &channel)?;
                let loss = g.tape.cross_entropy(f.logits, &labels)?;
                let lv = g.tape.value(loss).item();
                if !lv.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: b,
                        loss: lv,
                    });
                }
                let preds = predict(g.tape.value(f.logits));
                let grads = g.tape.backward(loss)?;
                let updates = g.take_bn_updates();
                (lv, preds, g.tape, grads, updates)
            };
            model.store.zero_grad();
            model.store.accumulate(&tape, &grads);
            adam.step(&mut model.store);
            model.apply_bn_updates(&updates)?;
            loss_sum += loss * batch.len() as f64;
            correct += preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
            step += 1;
        }
        let eval_accuracy = evaluate(
            &model,
            &eval_set,
            eval_link,
            rng::derive_indexed(cfg.seed, "epoch-eval", epoch as u64),
            cfg.evaluation.batch_size,
        )?;
        let rec = EpochRecord {
            epoch,
            loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            eval_accuracy,
        };
        on_epoch(&rec);
        if best.as_ref().is_none_or(|(acc, _, _)| eval_accuracy > *acc) {
            best = Some((eval_accuracy, epoch, model.store.clone()));
        }
        epochs.push(rec);
    }
    let (best_eval_accuracy, best_epoch, store) = best.ok_or(Error::Empty("training epochs"))?;
    Ok(TrainOutcome {
        best: Model::from_store(cfg.model, store)?,
        last: model,
        best_epoch,
        best_eval_accuracy,
        epochs,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}
