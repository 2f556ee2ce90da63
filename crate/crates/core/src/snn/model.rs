//! End-to-end pass: events → encoder → time-hopping → link → decoder.

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::decoder::decoder_forward;
use super::encoder::{encoder_forward, patch_tokens};
use super::graph::{count_nonzero, Graph, Stage, Trace};
use super::weights::{BnUpdate, ModelWeights};
use crate::channel::{decision_threshold, detect, soft_receive, transmit, LinkParams};
use crate::error::{shape, Result};
use crate::grad::{ParamStore, Tensor, Var};
use crate::modem::{deserialize, lth_relaxed, serialize, SpikeSeq};
use crate::rng;

/// How the receiver turns photocurrent into decoder input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiveMode {
    /// Normalized photocurrent, real valued.
    #[default]
    Soft,
    /// Threshold detection to bits.
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelUse {
    /// Spikes reach the decoder unchanged.
    Ideal,
    /// Each sample's serialized spike stream crosses the optical link.
    /// Sample b uses the channel seed `derive_indexed(seed, "sample", b)`.
    Link {
        params: LinkParams,
        receive: ReceiveMode,
        seed: u64,
    },
}

/// Tape handles of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Var,
    /// Encoder output, one `[B, N, D]` tensor per encoder step.
    pub encoded: Vec<Var>,
    /// Channel symbols in transmit order (step-major, then slot).
    pub transmitted: Vec<Var>,
    pub received: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub weights: ModelWeights,
}

impl Model {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let (store, weights) = ModelWeights::init(&config, seed)?;
        Ok(Model {
            config,
            store,
            weights,
        })
    }

    pub fn from_store(config: ModelConfig, store: ParamStore) -> Result<Self> {
        let weights = ModelWeights::bind(&config, &store)?;
        Ok(Model {
            config,
            store,
            weights,
        })
    }

    /// Full pass over a batch; `frames[b]` is a `T·H·W` event tensor.
    pub fn forward(
        &self,
        g: &mut Graph,
        frames: &[&[i8]],
        channel: &ChannelUse,
    ) -> Result<Forward> {
        let cfg = &self.config;
        let inputs = patch_tokens(frames, &cfg.encoder)?
            .into_iter()
            .map(|t| g.tape.input(t))
            .collect::<Vec<_>>();
        let encoded = encoder_forward(g, &inputs, &self.weights, cfg)?;
        let map = g.p(self.weights.lth_map);
        let bias = g.p(self.weights.lth_bias);
        let mut transmitted = Vec::with_capacity(cfg.encoder.slots());
        for &x in &encoded {
            let slots = lth_relaxed(&mut g.tape, x, map, bias, cfg.surrogate)?;
            for &s in &slots {
                g.check_spikes(s, "time_hopping")?;
            }
            if g.recording.is_some() {
                let count = g.tape.value(x).len() * slots.len();
                let spikes = slots
                    .iter()
                    .map(|&s| count_nonzero(g.tape.value(s).data()))
                    .sum();
                g.push_trace(Trace::Neurons {
                    layer: "time_hopping".into(),
                    stage: Stage::Encoder,
                    count: count as u64,
                    spikes,
                });
            }
            transmitted.extend(slots);
        }
        let received = match channel {
            ChannelUse::Ideal => transmitted.clone(),
            ChannelUse::Link {
                params,
                receive,
                seed,
            } => link_pass(g, &transmitted, params, *receive, *seed)?,
        };
        let logits = decoder_forward(g, &received, &self.weights.decoder, cfg)?;
        Ok(Forward {
            logits,
            encoded,
            transmitted,
            received,
        })
    }

    /// Folds the batch statistics of a training pass into the running estimates.
    pub fn apply_bn_updates(&mut self, updates: &[BnUpdate]) -> Result<()> {
        for u in updates {
            u.weights.update(&mut self.store, u.step, &u.stats)?;
        }
        Ok(())
    }
}

/// Index of the largest logit per row, ties to the lowest index.
pub fn predict(logits: &Tensor) -> Vec<usize> {
    let c = *logits.shape().last().unwrap_or(&1);
    logits
        .data()
        .chunks(c.max(1))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Sends each sample's symbols over the link. The recorded backward scales
/// by the per-symbol fade exp(−G·e) in soft mode and passes straight
/// through in hard mode.
fn link_pass(
    g: &mut Graph,
    slots: &[Var],
    params: &LinkParams,
    receive: ReceiveMode,
    seed: u64,
) -> Result<Vec<Var>> {
    let first = *slots
        .first()
        .ok_or_else(|| shape("no symbols to transmit"))?;
    let dims = g.tape.shape(first).to_vec();
    if dims.len() != 3 {
        return Err(shape(format!("channel symbols of shape {dims:?}")));
    }
    let (b, n, d) = (dims[0], dims[1], dims[2]);
    let per = n * d;
    let steps = slots.len();
    let threshold = decision_threshold(params);
    let mut rx = vec![vec![0.0; b * per]; steps];
    let mut slope = vec![vec![0.0; b * per]; steps];
    for s in 0..b {
        let bits: Vec<u8> = slots
            .iter()
            .flat_map(|&v| {
                g.tape.value(v).data()[s * per..(s + 1) * per]
                    .iter()
                    .map(|&x| u8::from(x >= 0.5))
            })
            .collect();
        let seq = SpikeSeq::new(steps, n, d, bits)?;
        let (y, draw) = transmit(
            &serialize(&seq),
            params,
            rng::derive_indexed(seed, "sample", s as u64),
        )?;
        let values = match receive {
            ReceiveMode::Soft => deserialize(&soft_receive(&y, params)?, (steps, n, d))?,
            ReceiveMode::Hard => SpikeSeq::new(steps, n, d, detect(&y, threshold))?.to_tensor(),
        };
        for t in 0..steps {
            let src = t * per..(t + 1) * per;
            rx[t][s * per..(s + 1) * per].copy_from_slice(&values.data()[src.clone()]);
            for (dst, &e) in slope[t][s * per..(s + 1) * per]
                .iter_mut()
                .zip(&draw.pointing_errors[src])
            {
                *dst = match receive {
                    ReceiveMode::Soft => (-params.pointing_sensitivity * e).exp(),
                    ReceiveMode::Hard => 1.0,
                };
            }
        }
    }
    slots
        .iter()
        .zip(rx.into_iter().zip(slope))
        .map(|(&x, (r, sl))| g.tape.channel(x, Tensor::new(&[b, n, d], r)?, sl))
        .collect()
}
