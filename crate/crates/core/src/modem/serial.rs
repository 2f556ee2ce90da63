use crate::error::{invalid, shape, Result};
use crate::grad::Tensor;

/// Binary spike tensor of shape (steps, tokens, dim), stored row-major in
/// (t, l, d) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeSeq {
    steps: usize,
    tokens: usize,
    dim: usize,
    data: Vec<u8>,
}

impl SpikeSeq {
    pub fn new(steps: usize, tokens: usize, dim: usize, data: Vec<u8>) -> Result<Self> {
        if steps * tokens * dim != data.len() {
            return Err(shape(format!(
                "spike tensor ({steps}, {tokens}, {dim}) needs {} entries, got {}",
                steps * tokens * dim,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(invalid(format!("spike values must be 0 or 1, got {v}")));
        }
        Ok(SpikeSeq {
            steps,
            tokens,
            dim,
            data,
        })
    }

    pub fn zeros(steps: usize, tokens: usize, dim: usize) -> Self {
        SpikeSeq {
            steps,
            tokens,
            dim,
            data: vec![0; steps * tokens * dim],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.steps, self.tokens, self.dim)
    }

    pub fn get(&self, t: usize, l: usize, d: usize) -> u8 {
        self.data[(t * self.tokens + l) * self.dim + d]
    }

    pub fn set(&mut self, t: usize, l: usize, d: usize, v: bool) {
        self.data[(t * self.tokens + l) * self.dim + d] = u8::from(v);
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Step `t` as a `[tokens, dim]` slice.
    pub fn step(&self, t: usize) -> &[u8] {
        let n = self.tokens * self.dim;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            &[self.steps, self.tokens, self.dim],
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("consistent dims")
    }

    /// Accepts only tensors whose entries are exactly 0.0 or 1.0.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let [s, l, d] = t.shape() else {
            return Err(shape(format!(
                "spike tensor must have rank 3, got {:?}",
                t.shape()
            )));
        };
        if !t.is_binary() {
            return Err(invalid("tensor is not binary"));
        }
        Self::new(*s, *l, *d, t.data().iter().map(|&v| v as u8).collect())
    }
}

/// Row-major flattening in (t, l, d) order; length steps·tokens·dim.
pub fn serialize(s: &SpikeSeq) -> Vec<u8> {
    s.data.clone()
}

/// Inverse of [`serialize`] for real-valued (soft) symbol streams.
pub fn deserialize(symbols: &[f64], dims: (usize, usize, usize)) -> Result<Tensor> {
    let (t, l, d) = dims;
    let n = t
        .checked_mul(l)
        .and_then(|v| v.checked_mul(d))
        .ok_or_else(|| shape("dimensions overflow"))?;
    if symbols.len() != n {
        return Err(shape(format!(
            "expected {n} symbols for {dims:?}, got {}",
            symbols.len()
        )));
    }
    Tensor::new(&[t, l, d], symbols.to_vec())
}

/// Inverse of [`serialize`] for hard-detected bits.
pub fn deserialize_bits(bits: &[u8], dims: (usize, usize, usize)) -> Result<SpikeSeq> {
    let (t, l, d) = dims;
    let n = t
        .checked_mul(l)
        .and_then(|v| v.checked_mul(d))
        .ok_or_else(|| shape("dimensions overflow"))?;
    if bits.len() != n {
        return Err(shape(format!(
            "expected {n} bits for {dims:?}, got {}",
            bits.len()
        )));
    }
    SpikeSeq::new(t, l, d, bits.to_vec())
}
