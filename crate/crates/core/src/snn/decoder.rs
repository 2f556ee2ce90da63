//! Spiking transformer decoder with stochastic attention and a pooled
//! temporal classifier.

use super::config::ModelConfig;
use super::graph::{Graph, Stage, Trace};
use super::lif::LifState;
use super::weights::{DecoderWeights, SvitWeights};
use crate::error::{shape, Error, Result};
use crate::grad::{ParamId, Var};

/// LIF states of one transformer layer: Q, K, V projections and the two
/// FFN stages.
pub struct SvitState {
    q: LifState,
    k: LifState,
    v: LifState,
    ffn1: LifState,
    ffn2: LifState,
}

impl SvitState {
    pub fn new(cfg: &ModelConfig) -> Self {
        let lif = || LifState::new(cfg.lif.decoder, cfg.surrogate);
        SvitState {
            q: lif(),
            k: lif(),
            v: lif(),
            ffn1: lif(),
            ffn2: lif(),
        }
    }
}

pub struct DecoderState {
    pub embed: LifState,
    pub layers: Vec<SvitState>,
}

impl DecoderState {
    pub fn new(cfg: &ModelConfig) -> Self {
        DecoderState {
            embed: LifState::new(cfg.lif.decoder, cfg.surrogate),
            layers: (0..cfg.decoder.layers)
                .map(|_| SvitState::new(cfg))
                .collect(),
        }
    }
}

/// E = LIF(Ŝ·W_E + P_E). `s` is `[B, L, D]`, real or binary.
pub fn embed(g: &mut Graph, s: Var, w: &DecoderWeights, state: &mut LifState) -> Result<Var> {
    let h = g.dense(s, w.w_e, Some(w.p_e), "embed", Stage::Decoder)?;
    g.lif(state, h, "embed", Stage::Decoder)
}

/// Sampling stage of attention on spike tensors `q, k, v` of shape
/// `[B, L, H·D_K]`:
/// M ~ Bern(Q_h K_hᵀ / D_K), A ~ Bern(M V_h / L) per head h.
pub fn stochastic_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    heads: usize,
    layer: &str,
) -> Result<Var> {
    let qs = g.tape.shape(q).to_vec();
    if qs.len() != 3 || heads == 0 || !qs[2].is_multiple_of(heads) {
        return Err(shape(format!("attention input {qs:?} with {heads} heads")));
    }
    if g.tape.shape(k) != qs.as_slice() || g.tape.shape(v) != qs.as_slice() {
        return Err(shape("attention Q, K, V shapes differ"));
    }
    let (b, l, dk) = (qs[0], qs[1], qs[2] / heads);
    let qh = g.tape.split_heads(q, heads)?;
    let kh = g.tape.split_heads(k, heads)?;
    let vh = g.tape.split_heads(v, heads)?;
    let scores = g.tape.batch_matmul(qh, kh, true)?;
    let p_m = g.tape.affine_scalar(scores, 1.0 / dk as f64, 0.0);
    g.observe_probs(p_m);
    let m = g.tape.bernoulli(p_m, &mut g.rng);
    g.check_spikes(m, layer)?;
    let mixed = g.tape.batch_matmul(m, vh, false)?;
    let p_a = g.tape.affine_scalar(mixed, 1.0 / l as f64, 0.0);
    g.observe_probs(p_a);
    let a = g.tape.bernoulli(p_a, &mut g.rng);
    g.check_spikes(a, layer)?;
    let bh = (b * heads) as u64;
    let (l64, dk64) = (l as u64, dk as u64);
    let products = 2 * bh * l64 * l64 * dk64;
    let active = g.tape.value(scores).sum() + g.tape.value(mixed).sum();
    g.push_trace(Trace::Attention {
        layer: layer.to_string(),
        stage: Stage::Decoder,
        ands: products,
        active_ands: active.round() as u64,
        draws: bh * l64 * l64 + bh * l64 * dk64,
        dense_macs: products,
    });
    g.tape.merge_heads(a, heads)
}

/// Q, K, V projections through LIF, then [`stochastic_attention`].
pub fn ssa_attention(
    g: &mut Graph,
    e: Var,
    w: &SvitWeights,
    state: &mut SvitState,
    heads: usize,
    index: usize,
) -> Result<Var> {
    let name = |part: &str| format!("layer{index}.{part}");
    let q = g.dense(e, w.w_q, None, &name("query"), Stage::Decoder)?;
    let q = g.lif(&mut state.q, q, &name("query"), Stage::Decoder)?;
    let k = g.dense(e, w.w_k, None, &name("key"), Stage::Decoder)?;
    let k = g.lif(&mut state.k, k, &name("key"), Stage::Decoder)?;
    let v = g.dense(e, w.w_v, None, &name("value"), Stage::Decoder)?;
    let v = g.lif(&mut state.v, v, &name("value"), Stage::Decoder)?;
    stochastic_attention(g, q, k, v, heads, &name("attention"))
}

/// Attention followed by the two-stage spiking FFN.
pub fn svit_layer(
    g: &mut Graph,
    e: Var,
    w: &SvitWeights,
    state: &mut SvitState,
    heads: usize,
    index: usize,
) -> Result<Var> {
    let a = ssa_attention(g, e, w, state, heads, index)?;
    let name = |part: &str| format!("layer{index}.{part}");
    let h = g.dense(a, w.w1, Some(w.eps1), &name("ffn1"), Stage::Decoder)?;
    let h = g.lif(&mut state.ffn1, h, &name("ffn1"), Stage::Decoder)?;
    let h = g.dense(h, w.w2, Some(w.eps2), &name("ffn2"), Stage::Decoder)?;
    g.lif(&mut state.ffn2, h, &name("ffn2"), Stage::Decoder)
}

/// z = (1/S)·Σ_t mean_tokens(E_t)·W_cls over the S steps of `seq`
/// (each `[B, L, D_E]`); returns `[B, C]`.
pub fn pool_classify(g: &mut Graph, seq: &[Var], w_cls: ParamId) -> Result<Var> {
    let (&first, rest) = seq
        .split_first()
        .ok_or(Error::Empty("decoder output sequence"))?;
    let mut acc = g.tape.mean_axis1(first)?;
    for &e in rest {
        let m = g.tape.mean_axis1(e)?;
        acc = g.tape.add(acc, m)?;
    }
    let pooled = g.tape.affine_scalar(acc, 1.0 / seq.len() as f64, 0.0);
    g.dense(pooled, w_cls, None, "classifier", Stage::Decoder)
}

/// Embedding, transformer layers and classifier over the received sequence.
pub fn decoder_forward(
    g: &mut Graph,
    received: &[Var],
    w: &DecoderWeights,
    cfg: &ModelConfig,
) -> Result<Var> {
    if received.is_empty() {
        return Err(Error::Empty("received sequence"));
    }
    let mut state = DecoderState::new(cfg);
    let heads = cfg.decoder.heads;
    let mut outputs = Vec::with_capacity(received.len());
    for &s in received {
        let mut e = embed(g, s, w, &mut state.embed)?;
        for (i, (lw, ls)) in w.layers.iter().zip(state.layers.iter_mut()).enumerate() {
            e = svit_layer(g, e, lw, ls, heads, i)?;
        }
        outputs.push(e);
    }
    pool_classify(g, &outputs, w.w_cls)
}
