//! Shared state of one recorded forward pass: the tape, the parameters it
//! reads, batch-norm bookkeeping, the attention RNG and an optional
//! activity recording used for energy accounting.

use std::collections::HashMap;

use serde::Serialize;

use super::lif::LifState;
use super::weights::{BnUpdate, BnWeights};
use crate::error::{Error, Result};
use crate::grad::{ParamId, ParamStore, SpikeMode, Tape, Var};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Encoder,
    Decoder,
}

/// Activity of one layer during one forward step.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trace {
    /// Weighted sum `rows × fan_in → rows × fan_out`. `active` counts the
    /// nonzero inputs; `binary` tells whether the inputs were spikes.
    Synapse {
        layer: String,
        stage: Stage,
        rows: u64,
        fan_in: u64,
        fan_out: u64,
        active: u64,
        binary: bool,
    },
    Neurons {
        layer: String,
        stage: Stage,
        count: u64,
        spikes: u64,
    },
    /// Stochastic attention: AND-count products of two spike matrices
    /// followed by Bernoulli sampling. `dense_macs` is the matching real
    /// valued product.
    Attention {
        layer: String,
        stage: Stage,
        ands: u64,
        active_ands: u64,
        draws: u64,
        dense_macs: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Recording {
    pub traces: Vec<Trace>,
    /// Range of every Bernoulli parameter seen, before any clamping.
    pub prob_min: Option<f64>,
    pub prob_max: Option<f64>,
}

impl Recording {
    fn observe_probs(&mut self, p: &[f64]) {
        for &v in p {
            self.prob_min = Some(self.prob_min.map_or(v, |m| m.min(v)));
            self.prob_max = Some(self.prob_max.map_or(v, |m| m.max(v)));
        }
    }
}

/// Options of a forward pass.
#[derive(Debug, Clone, Copy)]
pub struct PassOptions {
    /// Batch norm uses batch statistics and reports them for running-mean updates.
    pub training: bool,
    pub mode: SpikeMode,
    /// Seed of the attention sampler.
    pub seed: u64,
    /// Fail if any spike tensor leaves {0, 1} (hard mode only).
    pub check_binary: bool,
    pub record: bool,
    /// Build a tape that can produce parameter gradients.
    pub gradients: bool,
}

impl PassOptions {
    pub fn train(seed: u64) -> Self {
        PassOptions {
            training: true,
            mode: SpikeMode::Hard,
            seed,
            check_binary: false,
            record: false,
            gradients: true,
        }
    }

    pub fn eval(seed: u64) -> Self {
        PassOptions {
            training: false,
            mode: SpikeMode::Hard,
            seed,
            check_binary: false,
            record: false,
            gradients: false,
        }
    }
}

pub struct Graph<'s> {
    pub tape: Tape,
    pub store: &'s ParamStore,
    pub options: PassOptions,
    pub rng: Stream,
    pub recording: Option<Recording>,
    bn_updates: Vec<BnUpdate>,
    params: HashMap<ParamId, Var>,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore, options: PassOptions) -> Self {
        let tape = if options.gradients {
            Tape::new(options.mode)
        } else {
            Tape::inference(options.mode)
        };
        Graph {
            tape,
            store,
            options,
            rng: rng::stream(rng::derive_seed(options.seed, "attention")),
            recording: options.record.then(Recording::default),
            bn_updates: Vec::new(),
            params: HashMap::new(),
        }
    }

    /// Tape variable of a parameter; one node per parameter per pass.
    pub fn p(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.tape.param(self.store, id);
        self.params.insert(id, v);
        v
    }

    /// Batch norm at encoder step `step`: batch statistics when training,
    /// that step's running statistics otherwise.
    pub fn bn(&mut self, x: Var, w: &BnWeights, step: usize) -> Result<Var> {
        let (g, b) = (self.p(w.gamma), self.p(w.beta));
        if self.options.training {
            let (out, stats) = self.tape.batch_norm_train(x, g, b)?;
            self.bn_updates.push(BnUpdate {
                weights: *w,
                step,
                stats,
            });
            Ok(out)
        } else {
            let (mean, var) = w.running(self.store, step)?;
            self.tape.batch_norm_eval(x, g, b, mean, var)
        }
    }

    /// `x · W (+ b)` with activity recorded.
    pub fn dense(
        &mut self,
        x: Var,
        w: ParamId,
        bias: Option<ParamId>,
        layer: &str,
        stage: Stage,
    ) -> Result<Var> {
        let wv = self.p(w);
        self.record_synapse(x, self.store.value(w).shape()[1], layer, stage);
        let y = self.tape.matmul(x, wv)?;
        match bias {
            Some(b) => {
                let bv = self.p(b);
                self.tape.add_bcast(y, bv)
            }
            None => Ok(y),
        }
    }

    /// Token mixing `W[N, N] · x[B, N, D]`, recorded per column.
    pub fn mix_tokens(&mut self, w: ParamId, x: Var, layer: &str, stage: Stage) -> Result<Var> {
        let wv = self.p(w);
        let y = self.tape.mix_tokens(wv, x)?;
        if let Some(rec) = self.recording.as_mut() {
            let s = self.tape.shape(x);
            let (b, n, d) = (s[0], s[1], s[2]);
            let xv = self.tape.value(x);
            rec.traces.push(Trace::Synapse {
                layer: layer.to_string(),
                stage,
                rows: (b * d) as u64,
                fan_in: n as u64,
                fan_out: n as u64,
                active: count_nonzero(xv.data()),
                binary: xv.is_binary(),
            });
        }
        Ok(y)
    }

    fn record_synapse(&mut self, x: Var, fan_out: usize, layer: &str, stage: Stage) {
        if let Some(rec) = self.recording.as_mut() {
            let xv = self.tape.value(x);
            let fan_in = *xv.shape().last().unwrap_or(&1);
            rec.traces.push(Trace::Synapse {
                layer: layer.to_string(),
                stage,
                rows: (xv.len() / fan_in.max(1)) as u64,
                fan_in: fan_in as u64,
                fan_out: fan_out as u64,
                active: count_nonzero(xv.data()),
                binary: xv.is_binary(),
            });
        }
    }

    pub fn lif(
        &mut self,
        state: &mut LifState,
        current: Var,
        layer: &str,
        stage: Stage,
    ) -> Result<Var> {
        let o = state.step(&mut self.tape, current)?;
        self.check_spikes(o, layer)?;
        if let Some(rec) = self.recording.as_mut() {
            let v = self.tape.value(o);
            rec.traces.push(Trace::Neurons {
                layer: layer.to_string(),
                stage,
                count: v.len() as u64,
                spikes: count_nonzero(v.data()),
            });
        }
        Ok(o)
    }

    pub fn check_spikes(&self, v: Var, layer: &str) -> Result<()> {
        if self.options.check_binary
            && self.options.mode == SpikeMode::Hard
            && !self.tape.value(v).is_binary()
        {
            return Err(Error::Format(format!(
                "{layer}: spike tensor is not binary"
            )));
        }
        Ok(())
    }

    pub(crate) fn observe_probs(&mut self, p: Var) {
        if let Some(rec) = self.recording.as_mut() {
            rec.observe_probs(self.tape.value(p).data());
        }
    }

    pub(crate) fn push_trace(&mut self, t: Trace) {
        if let Some(rec) = self.recording.as_mut() {
            rec.traces.push(t);
        }
    }

    /// Batch statistics seen in this pass, for the running-estimate update.
    pub fn take_bn_updates(&mut self) -> Vec<BnUpdate> {
        std::mem::take(&mut self.bn_updates)
    }
}

pub(crate) fn count_nonzero(v: &[f64]) -> u64 {
    v.iter().filter(|&&x| x != 0.0).count() as u64
}
