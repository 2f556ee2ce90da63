//! Spiking patch splitting and token-mixer encoder blocks.

use super::config::{EncoderConfig, ModelConfig};
use super::graph::{Graph, Stage};
use super::lif::LifState;
use super::weights::{MixerWeights, ModelWeights, PatchSplitWeights};
use crate::error::{shape, Result};
use crate::grad::{Tensor, Var};

/// Patch features of a batch of event-frame sequences.
///
/// `frames[b]` holds `T·H·W` values in {−1, 0, 1}, row-major per frame.
/// Returns one `[B, N, 2P²]` tensor per time step. Patches are numbered
/// row-major; each feature vector is the P² positive-event mask followed by
/// the P² negative-event mask.
pub fn patch_tokens(frames: &[&[i8]], cfg: &EncoderConfig) -> Result<Vec<Tensor>> {
    let (h, w, p, t_steps) = (cfg.height, cfg.width, cfg.patch, cfg.timesteps);
    let per_frame = h * w;
    for (i, f) in frames.iter().enumerate() {
        if f.len() != t_steps * per_frame {
            return Err(shape(format!(
                "sample {i}: {} frame values, expected {t_steps}x{h}x{w}",
                f.len()
            )));
        }
    }
    let (pw, n, feat) = (w / p, cfg.tokens(), cfg.patch_features());
    let b = frames.len();
    (0..t_steps)
        .map(|t| {
            let mut out = vec![0.0; b * n * feat];
            for (s, f) in frames.iter().enumerate() {
                let frame = &f[t * per_frame..(t + 1) * per_frame];
                for (idx, &v) in frame.iter().enumerate() {
                    if v == 0 {
                        continue;
                    }
                    let (row, col) = (idx / w, idx % w);
                    let token = (row / p) * pw + col / p;
                    let inner = (row % p) * p + col % p;
                    let channel = if v > 0 { 0 } else { p * p };
                    out[(s * n + token) * feat + channel + inner] = 1.0;
                }
            }
            Tensor::new(&[b, n, feat], out)
        })
        .collect()
}

/// LIF states of the encoder for one sequence batch.
pub struct EncoderState {
    patch: LifState,
    blocks: Vec<[LifState; 3]>,
}

impl EncoderState {
    pub fn new(cfg: &ModelConfig) -> Self {
        let lif = || LifState::new(cfg.lif.encoder, cfg.surrogate);
        EncoderState {
            patch: lif(),
            blocks: (0..cfg.encoder.layers)
                .map(|_| [lif(), lif(), lif()])
                .collect(),
        }
    }
}

/// Affine → BN → LIF on the patch features of one step, `[B, N, 2P²] → [B, N, D]`.
pub fn patch_split(
    g: &mut Graph,
    x: Var,
    w: &PatchSplitWeights,
    state: &mut LifState,
    step: usize,
) -> Result<Var> {
    let h = g.dense(x, w.w, Some(w.b), "patch_split", Stage::Encoder)?;
    let h = g.bn(h, &w.bn, step)?;
    g.lif(state, h, "patch_split", Stage::Encoder)
}

/// One token-mixer block on one step. Residual merges are logical OR.
pub fn stmixer_block(
    g: &mut Graph,
    x: Var,
    w: &MixerWeights,
    states: &mut [LifState; 3],
    index: usize,
    step: usize,
) -> Result<Var> {
    let name = |part: &str| format!("block{index}.{part}");
    let [s_v, s_tm, s_cm] = states;
    let v = g.dense(x, w.w_v, None, &name("value"), Stage::Encoder)?;
    let v = g.bn(v, &w.bn_v, step)?;
    let v = g.lif(s_v, v, &name("value"), Stage::Encoder)?;
    let tm = g.mix_tokens(w.w_tm, v, &name("token_mix"), Stage::Encoder)?;
    let tm = g.lif(s_tm, tm, &name("token_mix"), Stage::Encoder)?;
    let x = g.tape.or(x, tm)?;
    let cm = g.dense(
        x,
        w.w_cm,
        Some(w.eps_cm),
        &name("channel_mix"),
        Stage::Encoder,
    )?;
    let cm = g.bn(cm, &w.bn_cm, step)?;
    let cm = g.lif(s_cm, cm, &name("channel_mix"), Stage::Encoder)?;
    let out = g.tape.or(x, cm)?;
    g.check_spikes(out, &name("residual"))?;
    Ok(out)
}

/// Encoder over all steps: one `[B, N, D]` spike tensor per step.
pub fn encoder_forward(
    g: &mut Graph,
    tokens: &[Var],
    weights: &ModelWeights,
    cfg: &ModelConfig,
) -> Result<Vec<Var>> {
    if tokens.len() != cfg.encoder.timesteps {
        return Err(shape(format!(
            "{} token steps for {} encoder steps",
            tokens.len(),
            cfg.encoder.timesteps
        )));
    }
    let mut state = EncoderState::new(cfg);
    tokens
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            let mut h = patch_split(g, x, &weights.patch, &mut state.patch, t)?;
            for (i, (w, s)) in weights
                .blocks
                .iter()
                .zip(state.blocks.iter_mut())
                .enumerate()
            {
                h = stmixer_block(g, h, w, s, i, t)?;
            }
            Ok(h)
        })
        .collect()
}
