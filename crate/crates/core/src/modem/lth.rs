//! Learned time-hopping: each spike X[t,l,d] becomes a K-slot binary
//! pattern S[tK + k, l, d] = Θ(map[k]·X[t,l,d] + bias[l,d,k]).

use super::serial::SpikeSeq;
use crate::error::{shape, Result};
use crate::grad::{SpikeMode, SurrogateSpec, Tape, Var};

/// Shared K-vector map applied to the scalar spike, plus a per-neuron
/// K-vector bias stored as `[tokens, dim, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LthParams {
    pub tokens: usize,
    pub dim: usize,
    pub map: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LthParams {
    pub fn new(tokens: usize, dim: usize, map: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if map.is_empty() {
            return Err(shape("expansion factor K must be >= 1"));
        }
        if bias.len() != tokens * dim * map.len() {
            return Err(shape(format!(
                "bias needs {tokens}x{dim}x{} entries, got {}",
                map.len(),
                bias.len()
            )));
        }
        Ok(LthParams {
            tokens,
            dim,
            map,
            bias,
        })
    }

    /// Same bias pattern for every neuron.
    pub fn uniform(tokens: usize, dim: usize, map: Vec<f64>, bias: &[f64]) -> Result<Self> {
        let all = (0..tokens * dim)
            .flat_map(|_| bias.iter().copied())
            .collect();
        Self::new(tokens, dim, map, all)
    }

    pub fn k(&self) -> usize {
        self.map.len()
    }
}

/// Hard time-hopping expansion, (T, L, D) → (KT, L, D).
pub fn lth_encode(x: &SpikeSeq, params: &LthParams) -> Result<SpikeSeq> {
    let (steps, tokens, dim) = x.dims();
    if tokens != params.tokens || dim != params.dim {
        return Err(shape(format!(
            "spikes have (L, D) = ({tokens}, {dim}), time-hopping expects ({}, {})",
            params.tokens, params.dim
        )));
    }
    let k = params.k();
    let mut out = SpikeSeq::zeros(steps * k, tokens, dim);
    for t in 0..steps {
        for l in 0..tokens {
            for d in 0..dim {
                let xv = f64::from(x.get(t, l, d));
                for j in 0..k {
                    let v = params.map[j] * xv + params.bias[(l * dim + d) * k + j];
                    out.set(t * k + j, l, d, v >= 0.0);
                }
            }
        }
    }
    Ok(out)
}

/// Time-hopping on the tape for a batch `x[B, L, D]` of one encoder step.
/// Returns the K slot tensors in order. The forward is the hard expansion
/// (in [`SpikeMode::Hard`]); the backward uses `surrogate` for Θ.
pub fn lth_relaxed(
    tape: &mut Tape,
    x: Var,
    map: Var,
    bias: Var,
    surrogate: SurrogateSpec,
) -> Result<Vec<Var>> {
    let pre = tape.lth_pre(x, map, bias)?;
    let spikes = tape.step(pre, 0.0, surrogate);
    let k = *tape.shape(map).first().unwrap_or(&0);
    let slots = (0..k)
        .map(|j| tape.select_last(spikes, j))
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(
        tape.mode() == SpikeMode::Relaxed || slots.iter().all(|&s| tape.value(s).is_binary())
    );
    Ok(slots)
}
