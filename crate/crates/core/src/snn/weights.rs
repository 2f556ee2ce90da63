//! Parameter inventory of the encoder, time-hopping layer and decoder.

use rand::Rng;

use super::config::ModelConfig;
use crate::error::{shape, Error, Result};
use crate::grad::{BatchStats, ParamId, ParamStore, Tensor};
use crate::modem::LthParams;
use crate::rng;

/// Batch-norm affine parameters, shared across steps, and running
/// statistics kept separately for every step (`[T, width]`).
#[derive(Debug, Clone, Copy)]
pub struct BnWeights {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub mean: ParamId,
    pub var: ParamId,
}

/// Momentum of the running batch-norm estimates.
pub const BN_MOMENTUM: f64 = 0.9;

/// Batch statistics of one normalization call, waiting to be folded into
/// the running estimates of `step`.
#[derive(Debug, Clone)]
pub struct BnUpdate {
    pub weights: BnWeights,
    pub step: usize,
    pub stats: BatchStats,
}

impl BnWeights {
    /// Running mean and variance rows of `step`.
    pub fn running<'a>(
        &self,
        store: &'a ParamStore,
        step: usize,
    ) -> Result<(&'a [f64], &'a [f64])> {
        let row = |id: ParamId| -> Result<&'a [f64]> {
            let t = store.value(id);
            let width = *t.shape().last().unwrap_or(&0);
            t.data()
                .get(step * width..(step + 1) * width)
                .ok_or_else(|| shape(format!("no running statistics for step {step}")))
        };
        Ok((row(self.mean)?, row(self.var)?))
    }

    pub fn update(&self, store: &mut ParamStore, step: usize, stats: &BatchStats) -> Result<()> {
        for (id, new) in [(self.mean, &stats.mean), (self.var, &stats.var)] {
            let mut t = store.value(id).clone();
            let width = *t.shape().last().unwrap_or(&0);
            if new.len() != width {
                return Err(shape(format!(
                    "{} batch statistics for width {width}",
                    new.len()
                )));
            }
            let row = t
                .data_mut()
                .get_mut(step * width..(step + 1) * width)
                .ok_or_else(|| shape(format!("no running statistics for step {step}")))?;
            for (o, n) in row.iter_mut().zip(new) {
                *o = BN_MOMENTUM * *o + (1.0 - BN_MOMENTUM) * n;
            }
            store.set_value(id, t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PatchSplitWeights {
    pub w: ParamId,
    pub b: ParamId,
    pub bn: BnWeights,
}

/// One token-mixer block: value projection W_V, token mixing W_TM, channel
/// mixing W_CM with bias ε_CM.
#[derive(Debug, Clone, Copy)]
pub struct MixerWeights {
    pub w_v: ParamId,
    pub bn_v: BnWeights,
    pub w_tm: ParamId,
    pub w_cm: ParamId,
    pub eps_cm: ParamId,
    pub bn_cm: BnWeights,
}

/// One spiking transformer layer. W_Q, W_K, W_V are `[D_E, D_E]`; column
/// block h (width D_K) is the projection of head h.
#[derive(Debug, Clone, Copy)]
pub struct SvitWeights {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w1: ParamId,
    pub eps1: ParamId,
    pub w2: ParamId,
    pub eps2: ParamId,
}

#[derive(Debug, Clone)]
pub struct DecoderWeights {
    pub w_e: ParamId,
    pub p_e: ParamId,
    pub layers: Vec<SvitWeights>,
    pub w_cls: ParamId,
}

#[derive(Debug, Clone)]
pub struct ModelWeights {
    pub patch: PatchSplitWeights,
    pub blocks: Vec<MixerWeights>,
    pub lth_map: ParamId,
    pub lth_bias: ParamId,
    pub decoder: DecoderWeights,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    /// U(−a, a), a = gain·√(3/fan_in).
    Fan(usize),
    Uniform(f64, f64),
    Const(f64),
}

struct Spec {
    name: String,
    shape: Vec<usize>,
    init: Init,
    trainable: bool,
}

fn layout(cfg: &ModelConfig) -> Vec<Spec> {
    let e = &cfg.encoder;
    let d = &cfg.decoder;
    let (n, dim, pf) = (e.tokens(), e.dim, e.patch_features());
    let mut specs = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, init: Init, trainable: bool| {
        specs.push(Spec {
            name,
            shape,
            init,
            trainable,
        })
    };
    let steps = e.timesteps;
    let bn = |push: &mut dyn FnMut(String, Vec<usize>, Init, bool), prefix: &str, width: usize| {
        push(
            format!("{prefix}.gamma"),
            vec![width],
            Init::Const(1.0),
            true,
        );
        push(
            format!("{prefix}.beta"),
            vec![width],
            Init::Const(0.0),
            true,
        );
        push(
            format!("{prefix}.mean"),
            vec![steps, width],
            Init::Const(0.0),
            false,
        );
        push(
            format!("{prefix}.var"),
            vec![steps, width],
            Init::Const(1.0),
            false,
        );
    };

    push("enc.patch.w".into(), vec![pf, dim], Init::Fan(pf), true);
    push("enc.patch.b".into(), vec![dim], Init::Const(0.0), true);
    bn(&mut push, "enc.patch.bn", dim);
    for i in 0..e.layers {
        let p = format!("enc.block{i}");
        push(format!("{p}.w_v"), vec![dim, dim], Init::Fan(dim), true);
        bn(&mut push, &format!("{p}.bn_v"), dim);
        push(format!("{p}.w_tm"), vec![n, n], Init::Fan(n), true);
        push(format!("{p}.w_cm"), vec![dim, dim], Init::Fan(dim), true);
        push(format!("{p}.eps_cm"), vec![dim], Init::Const(0.0), true);
        bn(&mut push, &format!("{p}.bn_cm"), dim);
    }
    push(
        "lth.map".into(),
        vec![e.lth_k],
        Init::Uniform(-1.0, 1.0),
        true,
    );
    push(
        "lth.bias".into(),
        vec![n, dim, e.lth_k],
        Init::Uniform(-0.5, 0.5),
        true,
    );

    let de = d.embed_dim;
    push("dec.w_e".into(), vec![dim, de], Init::Fan(dim), true);
    push(
        "dec.p_e".into(),
        vec![n, de],
        Init::Uniform(-0.1, 0.1),
        true,
    );
    for i in 0..d.layers {
        let p = format!("dec.layer{i}");
        for w in ["w_q", "w_k", "w_v"] {
            push(format!("{p}.{w}"), vec![de, de], Init::Fan(de), true);
        }
        push(
            format!("{p}.w1"),
            vec![de, d.ffn_hidden],
            Init::Fan(de),
            true,
        );
        push(
            format!("{p}.eps1"),
            vec![d.ffn_hidden],
            Init::Const(0.0),
            true,
        );
        push(
            format!("{p}.w2"),
            vec![d.ffn_hidden, de],
            Init::Fan(d.ffn_hidden),
            true,
        );
        push(format!("{p}.eps2"), vec![de], Init::Const(0.0), true);
    }
    push("dec.w_cls".into(), vec![de, d.classes], Init::Fan(de), true);
    specs
}

fn lookup(store: &ParamStore, name: &str) -> Result<ParamId> {
    store
        .find(name)
        .ok_or_else(|| Error::Format(format!("parameter {name} missing")))
}

impl ModelWeights {
    /// Fresh parameters drawn from `seed`.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<(ParamStore, Self)> {
        cfg.validate()?;
        let mut r = rng::stream(seed);
        let mut store = ParamStore::new();
        for s in layout(cfg) {
            let n: usize = s.shape.iter().product();
            let data = match s.init {
                Init::Fan(fan_in) => {
                    let a = cfg.init_gain * (3.0 / fan_in as f64).sqrt();
                    (0..n).map(|_| r.random_range(-a..a)).collect()
                }
                Init::Uniform(lo, hi) => (0..n).map(|_| r.random_range(lo..hi)).collect(),
                Init::Const(c) => vec![c; n],
            };
            store.add(s.name, Tensor::new(&s.shape, data)?, s.trainable)?;
        }
        let w = Self::bind(cfg, &store)?;
        Ok((store, w))
    }

    /// Resolves every parameter of `cfg` in `store`, checking shapes.
    pub fn bind(cfg: &ModelConfig, store: &ParamStore) -> Result<Self> {
        cfg.validate()?;
        for s in layout(cfg) {
            let id = lookup(store, &s.name)?;
            if store.value(id).shape() != s.shape.as_slice() {
                return Err(shape(format!(
                    "{}: stored {:?}, model expects {:?}",
                    s.name,
                    store.value(id).shape(),
                    s.shape
                )));
            }
        }
        let f = |name: &str| lookup(store, name);
        let bn = |p: &str| -> Result<BnWeights> {
            Ok(BnWeights {
                gamma: f(&format!("{p}.gamma"))?,
                beta: f(&format!("{p}.beta"))?,
                mean: f(&format!("{p}.mean"))?,
                var: f(&format!("{p}.var"))?,
            })
        };
        let blocks = (0..cfg.encoder.layers)
            .map(|i| {
                let p = format!("enc.block{i}");
                Ok(MixerWeights {
                    w_v: f(&format!("{p}.w_v"))?,
                    bn_v: bn(&format!("{p}.bn_v"))?,
                    w_tm: f(&format!("{p}.w_tm"))?,
                    w_cm: f(&format!("{p}.w_cm"))?,
                    eps_cm: f(&format!("{p}.eps_cm"))?,
                    bn_cm: bn(&format!("{p}.bn_cm"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let layers = (0..cfg.decoder.layers)
            .map(|i| {
                let p = format!("dec.layer{i}");
                Ok(SvitWeights {
                    w_q: f(&format!("{p}.w_q"))?,
                    w_k: f(&format!("{p}.w_k"))?,
                    w_v: f(&format!("{p}.w_v"))?,
                    w1: f(&format!("{p}.w1"))?,
                    eps1: f(&format!("{p}.eps1"))?,
                    w2: f(&format!("{p}.w2"))?,
                    eps2: f(&format!("{p}.eps2"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelWeights {
            patch: PatchSplitWeights {
                w: f("enc.patch.w")?,
                b: f("enc.patch.b")?,
                bn: bn("enc.patch.bn")?,
            },
            blocks,
            lth_map: f("lth.map")?,
            lth_bias: f("lth.bias")?,
            decoder: DecoderWeights {
                w_e: f("dec.w_e")?,
                p_e: f("dec.p_e")?,
                layers,
                w_cls: f("dec.w_cls")?,
            },
        })
    }

    pub fn lth_params(&self, cfg: &ModelConfig, store: &ParamStore) -> Result<LthParams> {
        LthParams::new(
            cfg.encoder.tokens(),
            cfg.encoder.dim,
            store.value(self.lth_map).data().to_vec(),
            store.value(self.lth_bias).data().to_vec(),
        )
    }
}
