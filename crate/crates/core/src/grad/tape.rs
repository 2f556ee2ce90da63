//! Wengert-list reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation of one forward pass. Spike and
//! sampling nodes have a hard forward (unit step, Bernoulli draw) and a
//! surrogate or straight-through backward. In [`SpikeMode::Relaxed`] the
//! same nodes emit their smooth stand-in instead, which makes the recorded
//! backward the exact gradient of the forward.

use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::surrogate::SurrogateSpec;
use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};
use crate::error::{invalid, shape, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    Hard,
    Relaxed,
}

#[derive(Debug)]
enum Op {
    Input,
    Leaf,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Or(Var, Var),
    AddBcast(Var, Var),
    Affine(Var, f64),
    MatMul(Var, Var),
    MixTokens(Var, Var),
    BatchMatMul {
        a: Var,
        b: Var,
        transpose_b: bool,
    },
    SplitHeads(Var, usize),
    MergeHeads(Var, usize),
    Step {
        input: Var,
        threshold: f64,
        surrogate: SurrogateSpec,
    },
    Bernoulli(Var),
    BatchNorm(Box<BnNode>),
    MeanAxis1(Var),
    Sum(Var),
    Mean(Var),
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    LthPre {
        x: Var,
        map: Var,
        bias: Var,
    },
    SelectLast(Var, usize),
    Channel {
        input: Var,
        slope: Vec<f64>,
    },
}

#[derive(Debug)]
struct BnNode {
    input: Var,
    gamma: Var,
    beta: Var,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Per-feature statistics observed by a training-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub const BN_EPS: f64 = 1e-5;

pub struct Tape {
    nodes: Vec<Node>,
    mode: SpikeMode,
    grad_enabled: bool,
}

/// Gradients of one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::new(&self.shapes[v.0], g.clone()).expect("gradient shape"))
    }

    fn raw(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

impl Tape {
    pub fn new(mode: SpikeMode) -> Self {
        Tape {
            nodes: Vec::new(),
            mode,
            grad_enabled: true,
        }
    }

    /// Tape that records values only; `backward` yields no parameter gradients.
    pub fn inference(mode: SpikeMode) -> Self {
        Tape {
            nodes: Vec::new(),
            mode,
            grad_enabled: false,
        }
    }

    pub fn mode(&self) -> SpikeMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad: requires_grad && self.grad_enabled,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, false)
    }

    /// Free variable whose gradient is reported by [`Tape::backward`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let trainable = store.is_trainable(id);
        self.push(store.value(id).clone(), Op::Param(id), trainable)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "add")?;
        let mut out = self.value(a).clone();
        for (o, &y) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o += y;
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "sub")?;
        let mut out = self.value(a).clone();
        for (o, &y) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o -= y;
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "mul")?;
        let mut out = self.value(a).clone();
        for (o, &y) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o *= y;
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// Saturating union a + b − a·b; equals min(a + b, 1) on binary inputs.
    pub fn or(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "or")?;
        let mut out = self.value(a).clone();
        for (o, &y) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o = *o + y - *o * y;
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Or(a, b), rg))
    }

    /// `x + b` where the shape of `b` is a trailing suffix of the shape of `x`.
    pub fn add_bcast(&mut self, x: Var, b: Var) -> Result<Var> {
        let xs = self.shape(x);
        let bs = self.shape(b);
        if bs.len() > xs.len() || xs[xs.len() - bs.len()..] != *bs {
            return Err(shape(format!(
                "add_bcast: {bs:?} is not a suffix of {xs:?}"
            )));
        }
        let bv = self.value(b).data();
        let mut out = self.value(x).clone();
        for chunk in out.data_mut().chunks_mut(bv.len()) {
            for (o, &y) in chunk.iter_mut().zip(bv) {
                *o += y;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(out, Op::AddBcast(x, b), rg))
    }

    /// `scale·x + offset`.
    pub fn affine_scalar(&mut self, x: Var, scale: f64, offset: f64) -> Var {
        let out = self.value(x).map(|v| scale * v + offset);
        let rg = self.rg(x);
        self.push(out, Op::Affine(x, scale), rg)
    }

    /// `x[..., K] · w[K, C]`, batched over the leading axes of `x`.
    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w);
        if ws.len() != 2 || xs.is_empty() || *xs.last().unwrap() != ws[0] {
            return Err(shape(format!("matmul: {xs:?} · {ws:?}")));
        }
        let (k, c) = (ws[0], ws[1]);
        let m = self.value(x).len() / k.max(1);
        let mut out_shape = xs.clone();
        *out_shape.last_mut().unwrap() = c;
        let mut out = vec![0.0; m * c];
        gemm_acc(
            self.value(x).data(),
            self.value(w).data(),
            &mut out,
            m,
            k,
            c,
        );
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(Tensor::new(&out_shape, out)?, Op::MatMul(x, w), rg))
    }

    /// Per-sample token mixing `w[N, N] · x_b[N, D]` for `x[B, N, D]`.
    pub fn mix_tokens(&mut self, w: Var, x: Var) -> Result<Var> {
        let ws = self.shape(w);
        let xs = self.shape(x);
        if ws.len() != 2 || xs.len() != 3 || ws[0] != ws[1] || ws[1] != xs[1] {
            return Err(shape(format!("mix_tokens: {ws:?} · {xs:?}")));
        }
        let (b, n, d) = (xs[0], xs[1], xs[2]);
        let shape = xs.to_vec();
        let mut out = vec![0.0; b * n * d];
        let (wv, xv) = (self.value(w).data(), self.value(x).data());
        for s in 0..b {
            gemm_acc(
                wv,
                &xv[s * n * d..(s + 1) * n * d],
                &mut out[s * n * d..(s + 1) * n * d],
                n,
                n,
                d,
            );
        }
        let rg = self.rg(w) || self.rg(x);
        Ok(self.push(Tensor::new(&shape, out)?, Op::MixTokens(w, x), rg))
    }

    /// Batched product over the leading axis: `a[G,L,K]·b[G,K,M]`, or
    /// `a[G,L,K]·b[G,M,K]ᵀ` when `transpose_b`.
    pub fn batch_matmul(&mut self, a: Var, b: Var, transpose_b: bool) -> Result<Var> {
        let as_ = self.shape(a);
        let bs = self.shape(b);
        let ok = as_.len() == 3
            && bs.len() == 3
            && as_[0] == bs[0]
            && if transpose_b {
                as_[2] == bs[2]
            } else {
                as_[2] == bs[1]
            };
        if !ok {
            return Err(shape(format!(
                "batch_matmul: {as_:?} · {bs:?} (transpose_b={transpose_b})"
            )));
        }
        let (g, l, k) = (as_[0], as_[1], as_[2]);
        let m = if transpose_b { bs[1] } else { bs[2] };
        let mut out = vec![0.0; g * l * m];
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        for i in 0..g {
            let ai = &av[i * l * k..(i + 1) * l * k];
            let bi = &bv[i * k * m..(i + 1) * k * m];
            let oi = &mut out[i * l * m..(i + 1) * l * m];
            if transpose_b {
                gemm_nt_acc(ai, bi, oi, l, k, m);
            } else {
                gemm_acc(ai, bi, oi, l, k, m);
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(
            Tensor::new(&[g, l, m], out)?,
            Op::BatchMatMul { a, b, transpose_b },
            rg,
        ))
    }

    /// `[B, L, H·Dk] → [B·H, L, Dk]`; head h takes column block h.
    pub fn split_heads(&mut self, x: Var, heads: usize) -> Result<Var> {
        let xs = self.shape(x);
        if xs.len() != 3 || heads == 0 || !xs[2].is_multiple_of(heads) {
            return Err(shape(format!("split_heads: {xs:?} into {heads} heads")));
        }
        let (b, l, e) = (xs[0], xs[1], xs[2]);
        let dk = e / heads;
        let xv = self.value(x).data();
        let mut out = vec![0.0; b * l * e];
        for s in 0..b {
            for t in 0..l {
                for h in 0..heads {
                    let src = &xv[(s * l + t) * e + h * dk..][..dk];
                    out[((s * heads + h) * l + t) * dk..][..dk].copy_from_slice(src);
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(&[b * heads, l, dk], out)?,
            Op::SplitHeads(x, heads),
            rg,
        ))
    }

    /// Inverse of [`Tape::split_heads`].
    pub fn merge_heads(&mut self, x: Var, heads: usize) -> Result<Var> {
        let xs = self.shape(x);
        if xs.len() != 3 || heads == 0 || !xs[0].is_multiple_of(heads) {
            return Err(shape(format!("merge_heads: {xs:?} from {heads} heads")));
        }
        let (g, l, dk) = (xs[0], xs[1], xs[2]);
        let b = g / heads;
        let e = dk * heads;
        let xv = self.value(x).data();
        let mut out = vec![0.0; b * l * e];
        for s in 0..b {
            for t in 0..l {
                for h in 0..heads {
                    let src = &xv[((s * heads + h) * l + t) * dk..][..dk];
                    out[(s * l + t) * e + h * dk..][..dk].copy_from_slice(src);
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(&[b, l, e], out)?, Op::MergeHeads(x, heads), rg))
    }

    /// Θ(x − threshold) with Θ(0) = 1, surrogate gradient on the way back.
    pub fn step(&mut self, x: Var, threshold: f64, surrogate: SurrogateSpec) -> Var {
        let out = match self.mode {
            SpikeMode::Hard => self.value(x).map(|v| SurrogateSpec::step(v - threshold)),
            SpikeMode::Relaxed => self.value(x).map(|v| surrogate.relaxed(v - threshold)),
        };
        let rg = self.rg(x);
        self.push(
            out,
            Op::Step {
                input: x,
                threshold,
                surrogate,
            },
            rg,
        )
    }

    /// Independent Bernoulli(p) draws, p clamped to [0, 1]; identity backward.
    pub fn bernoulli<R: Rng + ?Sized>(&mut self, p: Var, rng: &mut R) -> Var {
        let out = match self.mode {
            SpikeMode::Hard => {
                let pv = self.value(p);
                let draws: Vec<f64> = pv
                    .data()
                    .iter()
                    .map(|&v| {
                        let u: f64 = rng.random();
                        if u < v.clamp(0.0, 1.0) {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Tensor::new(pv.shape(), draws).expect("same shape")
            }
            SpikeMode::Relaxed => self.value(p).map(|v| v.clamp(0.0, 1.0)),
        };
        let rg = self.rg(p);
        self.push(out, Op::Bernoulli(p), rg)
    }

    fn bn_check(&self, x: Var, gamma: Var, beta: Var) -> Result<usize> {
        let xs = self.shape(x);
        let c = *xs.last().ok_or_else(|| shape("batch_norm on a scalar"))?;
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(shape(format!(
                "batch_norm: features {c}, gamma {:?}, beta {:?}",
                self.shape(gamma),
                self.shape(beta)
            )));
        }
        Ok(c)
    }

    fn bn_apply(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        var: &[f64],
        batch_stats: bool,
    ) -> Var {
        let c = mean.len();
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let xv = self.value(x);
        let mut xhat = xv.data().to_vec();
        for row in xhat.chunks_mut(c) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean[j]) * inv_std[j];
            }
        }
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut out = xhat.clone();
        for row in out.chunks_mut(c) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = g[j] * *v + b[j];
            }
        }
        let out = Tensor::new(xv.shape(), out).expect("bn shape");
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        self.push(
            out,
            Op::BatchNorm(Box::new(BnNode {
                input: x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            })),
            rg,
        )
    }

    /// Batch norm over all leading rows using the batch's own statistics
    /// (biased variance, floored by [`BN_EPS`]). Returns the statistics so
    /// the caller can update running estimates.
    pub fn batch_norm_train(&mut self, x: Var, gamma: Var, beta: Var) -> Result<(Var, BatchStats)> {
        let c = self.bn_check(x, gamma, beta)?;
        let xv = self.value(x).data();
        let rows = xv.len().checked_div(c).unwrap_or(0);
        if rows == 0 {
            return Err(Error::Empty("batch norm batch"));
        }
        let mut mean = vec![0.0; c];
        for row in xv.chunks(c) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let mut var = vec![0.0; c];
        for row in xv.chunks(c) {
            for j in 0..c {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= rows as f64);
        let out = self.bn_apply(x, gamma, beta, &mean, &var, true);
        Ok((out, BatchStats { mean, var }))
    }

    /// Batch norm with fixed (running) statistics.
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        var: &[f64],
    ) -> Result<Var> {
        let c = self.bn_check(x, gamma, beta)?;
        if mean.len() != c || var.len() != c {
            return Err(shape(format!(
                "batch_norm stats length {} / {} for {c} features",
                mean.len(),
                var.len()
            )));
        }
        Ok(self.bn_apply(x, gamma, beta, mean, var, false))
    }

    /// Mean over axis 1: `[B, L, C] → [B, C]`.
    pub fn mean_axis1(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x);
        if xs.len() != 3 || xs[1] == 0 {
            return Err(shape(format!("mean_axis1 on {xs:?}")));
        }
        let (b, l, c) = (xs[0], xs[1], xs[2]);
        let xv = self.value(x).data();
        let mut out = vec![0.0; b * c];
        for s in 0..b {
            for t in 0..l {
                for j in 0..c {
                    out[s * c + j] += xv[(s * l + t) * c + j];
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= l as f64);
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(&[b, c], out)?, Op::MeanAxis1(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        if n == 0 {
            return Err(Error::Empty("mean of empty tensor"));
        }
        let s = self.value(x).sum() / n as f64;
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(s), Op::Mean(x), rg))
    }

    /// Mean over the batch of softmax cross-entropy, `logits[B, C]`.
    /// A rank-1 `logits[C]` is treated as a batch of one.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let zs = self.shape(logits);
        let (b, c) = match zs {
            [c] => (1, *c),
            [b, c] => (*b, *c),
            _ => return Err(shape(format!("cross_entropy on {zs:?}"))),
        };
        if labels.len() != b || b == 0 {
            return Err(shape(format!(
                "cross_entropy: {b} rows, {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(invalid(format!("label {bad} out of range for {c} classes")));
        }
        let zv = self.value(logits).data();
        let mut probs = vec![0.0; b * c];
        let mut loss = 0.0;
        for s in 0..b {
            let row = &zv[s * c..(s + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = row.iter().map(|&z| (z - max).exp()).sum();
            for j in 0..c {
                probs[s * c + j] = (row[j] - max).exp() / denom;
            }
            loss += denom.ln() - (row[labels[s]] - max);
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss / b as f64),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Pre-activation of the time-hopping expansion:
    /// `out[b,l,d,k] = map[k]·x[b,l,d] + bias[l,d,k]`.
    pub fn lth_pre(&mut self, x: Var, map: Var, bias: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ms = self.shape(map);
        let bs = self.shape(bias);
        if xs.len() != 3 || ms.len() != 1 || bs.len() != 3 || bs[..2] != xs[1..] || bs[2] != ms[0] {
            return Err(shape(format!("lth: x {xs:?}, map {ms:?}, bias {bs:?}")));
        }
        let k = ms[0];
        let (xv, mv, bv) = (
            self.value(x).data(),
            self.value(map).data(),
            self.value(bias).data(),
        );
        let per = xs[1] * xs[2];
        let mut out = vec![0.0; xv.len() * k];
        for (i, &xi) in xv.iter().enumerate() {
            let cell = i % per;
            for j in 0..k {
                out[i * k + j] = mv[j] * xi + bv[cell * k + j];
            }
        }
        let rg = self.rg(x) || self.rg(map) || self.rg(bias);
        Ok(self.push(
            Tensor::new(&[xs[0], xs[1], xs[2], k], out)?,
            Op::LthPre { x, map, bias },
            rg,
        ))
    }

    /// Index `k` of the last axis.
    pub fn select_last(&mut self, x: Var, k: usize) -> Result<Var> {
        let xs = self.shape(x);
        let last = *xs.last().ok_or_else(|| shape("select_last on a scalar"))?;
        if k >= last {
            return Err(shape(format!("select_last index {k} for axis of {last}")));
        }
        let out_shape = xs[..xs.len() - 1].to_vec();
        let out: Vec<f64> = self.value(x).data().chunks(last).map(|c| c[k]).collect();
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(&out_shape, out)?, Op::SelectLast(x, k), rg))
    }

    /// A stochastic channel whose output was computed outside the tape;
    /// backward multiplies by `slope` (the per-symbol fading factor).
    pub fn channel(&mut self, input: Var, received: Tensor, slope: Vec<f64>) -> Result<Var> {
        same_shape(self.value(input), &received, "channel")?;
        if slope.len() != received.len() {
            return Err(shape("channel slope length"));
        }
        let rg = self.rg(input);
        Ok(self.push(received, Op::Channel { input, slope }, rg))
    }

    /// Reverse accumulation from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(shape(format!(
                "backward on non-scalar {:?}",
                self.shape(loss)
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self
                .nodes
                .iter()
                .map(|n| n.value.shape().to_vec())
                .collect(),
        })
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
            f(slot);
        };
        let val = |v: Var| nodes[v.0].value.data();
        match &node.op {
            Op::Input | Op::Leaf | Op::Param(_) => {}
            Op::Add(a, b) => {
                acc(*a, &mut |ga| {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y)
                });
                acc(*b, &mut |gb| {
                    gb.iter_mut().zip(g).for_each(|(x, y)| *x += y)
                });
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y)
                });
                acc(*b, &mut |gb| {
                    gb.iter_mut().zip(g).for_each(|(x, y)| *x -= y)
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |ga| {
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                });
                acc(*b, &mut |gb| {
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                });
            }
            Op::Or(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |ga| {
                    for i in 0..g.len() {
                        ga[i] += g[i] * (1.0 - bv[i]);
                    }
                });
                acc(*b, &mut |gb| {
                    for i in 0..g.len() {
                        gb[i] += g[i] * (1.0 - av[i]);
                    }
                });
            }
            Op::AddBcast(x, b) => {
                acc(*x, &mut |gx| {
                    gx.iter_mut().zip(g).for_each(|(p, q)| *p += q)
                });
                acc(*b, &mut |gb| {
                    let n = gb.len();
                    for chunk in g.chunks(n) {
                        gb.iter_mut().zip(chunk).for_each(|(p, q)| *p += q);
                    }
                });
            }
            Op::Affine(x, s) => {
                acc(*x, &mut |gx| {
                    gx.iter_mut().zip(g).for_each(|(p, q)| *p += s * q)
                });
            }
            Op::MatMul(x, w) => {
                let ws = nodes[w.0].value.shape();
                let (k, c) = (ws[0], ws[1]);
                let m = g.len() / c.max(1);
                let (xv, wv) = (val(*x), val(*w));
                acc(*x, &mut |gx| gemm_nt_acc(g, wv, gx, m, c, k));
                acc(*w, &mut |gw| gemm_tn_acc(xv, g, gw, m, k, c));
            }
            Op::MixTokens(w, x) => {
                let xs = nodes[x.0].value.shape();
                let (b, n, d) = (xs[0], xs[1], xs[2]);
                let (wv, xv) = (val(*w), val(*x));
                acc(*w, &mut |gw| {
                    for s in 0..b {
                        let r = s * n * d..(s + 1) * n * d;
                        gemm_nt_acc(&g[r.clone()], &xv[r], gw, n, d, n);
                    }
                });
                acc(*x, &mut |gx| {
                    for s in 0..b {
                        let r = s * n * d..(s + 1) * n * d;
                        gemm_tn_acc(wv, &g[r.clone()], &mut gx[r], n, n, d);
                    }
                });
            }
            Op::BatchMatMul { a, b, transpose_b } => {
                let as_ = nodes[a.0].value.shape();
                let (gn, l, k) = (as_[0], as_[1], as_[2]);
                let m = g.len() / (gn * l).max(1);
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |ga| {
                    for i in 0..gn {
                        let gi = &g[i * l * m..(i + 1) * l * m];
                        let bi = &bv[i * k * m..(i + 1) * k * m];
                        let oi = &mut ga[i * l * k..(i + 1) * l * k];
                        if *transpose_b {
                            gemm_acc(gi, bi, oi, l, m, k);
                        } else {
                            gemm_nt_acc(gi, bi, oi, l, m, k);
                        }
                    }
                });
                acc(*b, &mut |gb| {
                    for i in 0..gn {
                        let gi = &g[i * l * m..(i + 1) * l * m];
                        let ai = &av[i * l * k..(i + 1) * l * k];
                        let oi = &mut gb[i * k * m..(i + 1) * k * m];
                        if *transpose_b {
                            gemm_tn_acc(gi, ai, oi, l, m, k);
                        } else {
                            gemm_tn_acc(ai, gi, oi, l, k, m);
                        }
                    }
                });
            }
            Op::SplitHeads(x, heads) => {
                let xs = nodes[x.0].value.shape();
                let (b, l, e) = (xs[0], xs[1], xs[2]);
                let dk = e / heads;
                acc(*x, &mut |gx| {
                    for s in 0..b {
                        for t in 0..l {
                            for h in 0..*heads {
                                let src = &g[((s * heads + h) * l + t) * dk..][..dk];
                                let dst = &mut gx[(s * l + t) * e + h * dk..][..dk];
                                dst.iter_mut().zip(src).for_each(|(p, q)| *p += q);
                            }
                        }
                    }
                });
            }
            Op::MergeHeads(x, heads) => {
                let xs = nodes[x.0].value.shape();
                let (gn, l, dk) = (xs[0], xs[1], xs[2]);
                let b = gn / heads;
                let e = dk * heads;
                acc(*x, &mut |gx| {
                    for s in 0..b {
                        for t in 0..l {
                            for h in 0..*heads {
                                let src = &g[(s * l + t) * e + h * dk..][..dk];
                                let dst = &mut gx[((s * heads + h) * l + t) * dk..][..dk];
                                dst.iter_mut().zip(src).for_each(|(p, q)| *p += q);
                            }
                        }
                    }
                });
            }
            Op::Step {
                input,
                threshold,
                surrogate,
            } => {
                let xv = val(*input);
                acc(*input, &mut |gx| {
                    for i in 0..g.len() {
                        if g[i] != 0.0 {
                            gx[i] += g[i] * surrogate.derivative(xv[i] - threshold);
                        }
                    }
                });
            }
            Op::Bernoulli(p) => {
                acc(*p, &mut |gp| {
                    gp.iter_mut().zip(g).for_each(|(a, b)| *a += b)
                });
            }
            Op::BatchNorm(bn) => {
                let c = bn.inv_std.len();
                let rows = g.len() / c.max(1);
                let gamma = val(bn.gamma);
                let mut sum_g = vec![0.0; c];
                let mut sum_gx = vec![0.0; c];
                for (gr, xr) in g.chunks(c).zip(bn.xhat.chunks(c)) {
                    for j in 0..c {
                        sum_g[j] += gr[j];
                        sum_gx[j] += gr[j] * xr[j];
                    }
                }
                acc(bn.gamma, &mut |gg| {
                    gg.iter_mut().zip(&sum_gx).for_each(|(a, b)| *a += b)
                });
                acc(bn.beta, &mut |gb| {
                    gb.iter_mut().zip(&sum_g).for_each(|(a, b)| *a += b)
                });
                acc(bn.input, &mut |gx| {
                    let m = rows as f64;
                    for ((o, gr), xr) in gx.chunks_mut(c).zip(g.chunks(c)).zip(bn.xhat.chunks(c)) {
                        for j in 0..c {
                            let scale = gamma[j] * bn.inv_std[j];
                            o[j] += if bn.batch_stats {
                                scale * (gr[j] - sum_g[j] / m - xr[j] * sum_gx[j] / m)
                            } else {
                                scale * gr[j]
                            };
                        }
                    }
                });
            }
            Op::MeanAxis1(x) => {
                let xs = nodes[x.0].value.shape();
                let (b, l, c) = (xs[0], xs[1], xs[2]);
                acc(*x, &mut |gx| {
                    for s in 0..b {
                        for t in 0..l {
                            for j in 0..c {
                                gx[(s * l + t) * c + j] += g[s * c + j] / l as f64;
                            }
                        }
                    }
                });
            }
            Op::Sum(x) => acc(*x, &mut |gx| gx.iter_mut().for_each(|v| *v += g[0])),
            Op::Mean(x) => acc(*x, &mut |gx| {
                let n = gx.len() as f64;
                gx.iter_mut().for_each(|v| *v += g[0] / n)
            }),
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let b = labels.len();
                let c = probs.len() / b;
                acc(*logits, &mut |gz| {
                    for s in 0..b {
                        for j in 0..c {
                            let onehot = if labels[s] == j { 1.0 } else { 0.0 };
                            gz[s * c + j] += g[0] * (probs[s * c + j] - onehot) / b as f64;
                        }
                    }
                });
            }
            Op::LthPre { x, map, bias } => {
                let k = nodes[map.0].value.len();
                let per = nodes[bias.0].value.len() / k.max(1);
                let (xv, mv) = (val(*x), val(*map));
                acc(*x, &mut |gx| {
                    for (i, o) in gx.iter_mut().enumerate() {
                        *o += (0..k).map(|j| g[i * k + j] * mv[j]).sum::<f64>();
                    }
                });
                acc(*map, &mut |gm| {
                    for (i, &xi) in xv.iter().enumerate() {
                        if xi != 0.0 {
                            for j in 0..k {
                                gm[j] += g[i * k + j] * xi;
                            }
                        }
                    }
                });
                acc(*bias, &mut |gb| {
                    for i in 0..xv.len() {
                        let cell = i % per;
                        for j in 0..k {
                            gb[cell * k + j] += g[i * k + j];
                        }
                    }
                });
            }
            Op::SelectLast(x, k) => {
                let last = *nodes[x.0].value.shape().last().unwrap();
                acc(*x, &mut |gx| {
                    for (i, &gi) in g.iter().enumerate() {
                        gx[i * last + k] += gi;
                    }
                });
            }
            Op::Channel { input, slope } => {
                acc(*input, &mut |gx| {
                    for i in 0..g.len() {
                        gx[i] += g[i] * slope[i];
                    }
                });
            }
        }
    }

    /// Pairs every parameter node with its gradient.
    pub(crate) fn param_grads<'a>(
        &'a self,
        grads: &'a Gradients,
    ) -> impl Iterator<Item = (ParamId, &'a [f64])> + 'a {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(move |(i, n)| match n.op {
                Op::Param(id) => grads.raw(Var(i)).map(|g| (id, g)),
                _ => None,
            })
    }
}
