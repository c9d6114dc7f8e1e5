//! Layer forward passes. Sequences are `[frames, features]` activations;
//! weights are f32 tensors.

use super::{Activations, Tensor};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

fn expect_shape(name: &str, t: &Tensor, want: &[usize]) -> Result<()> {
    if t.shape() != want {
        return Err(Error::Shape(format!("{name}: shape {:?}, expected {:?}", t.shape(), want)));
    }
    Ok(())
}

fn dot(a: &[f64], w: &[f32]) -> f64 {
    a.iter().zip(w).map(|(x, y)| x * f64::from(*y)).sum()
}

fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x W^T + b` for `x: [n, in]`, `w: [out, in]`, `b: [out]`.
pub fn fc_forward(x: &Activations, w: &Tensor, b: &Tensor) -> Result<Activations> {
    let (n, d_in) = x.dims2()?;
    let (d_out, w_in) = w.dims2()?;
    if w_in != d_in {
        return Err(Error::Shape(format!("fc: input has {d_in} features, weight expects {w_in}")));
    }
    expect_shape("fc bias", b, &[d_out])?;
    let mut out = Vec::with_capacity(n * d_out);
    for r in 0..n {
        let xr = x.row(r);
        for (o, &bias) in b.data().iter().enumerate() {
            out.push(dot(xr, w.row(o)) + f64::from(bias));
        }
    }
    Tensor::new(vec![n, d_out], out)
}

#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    /// `[4H, in]`, gate blocks ordered input, forget, cell, output.
    pub w_ih: &'a Tensor,
    /// `[4H, H]`.
    pub w_hh: &'a Tensor,
    /// `[4H]`.
    pub bias: &'a Tensor,
}

impl LstmWeights<'_> {
    pub fn hidden(&self) -> Result<usize> {
        let (g, _) = self.w_ih.dims2()?;
        if g % 4 != 0 {
            return Err(Error::Shape(format!("lstm: gate rows {g} not divisible by 4")));
        }
        let h = g / 4;
        expect_shape("lstm w_hh", self.w_hh, &[g, h])?;
        expect_shape("lstm bias", self.bias, &[g])?;
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Unidirectional LSTM with zero initial state. A backward pass runs over
/// the reversed sequence; its outputs are returned in the original frame
/// order.
pub fn lstm_forward(seq: &Activations, weights: LstmWeights, direction: Direction) -> Result<Activations> {
    let h = weights.hidden()?;
    let (frames, _) = seq.dims2()?;
    // input projections for every frame at once
    let pre = fc_forward(seq, weights.w_ih, weights.bias)?;
    let mut out = vec![0.0; frames * h];
    let mut hidden = vec![0.0; h];
    let mut cell = vec![0.0; h];
    let mut gates = vec![0.0; 4 * h];
    let order: Box<dyn Iterator<Item = usize>> = match direction {
        Direction::Forward => Box::new(0..frames),
        Direction::Backward => Box::new((0..frames).rev()),
    };
    for t in order {
        let p = pre.row(t);
        for (g, gate) in gates.iter_mut().enumerate() {
            *gate = p[g] + dot(&hidden, weights.w_hh.row(g));
        }
        for j in 0..h {
            let i = sigmoid(gates[j]);
            let f = sigmoid(gates[h + j]);
            let g = gates[2 * h + j].tanh();
            let o = sigmoid(gates[3 * h + j]);
            cell[j] = f * cell[j] + i * g;
            hidden[j] = o * cell[j].tanh();
        }
        out[t * h..(t + 1) * h].copy_from_slice(&hidden);
    }
    Tensor::new(vec![frames, h], out)
}

/// Concatenation of forward and backward LSTM outputs per frame.
pub fn blstm_forward(seq: &Activations, fwd: LstmWeights, bwd: LstmWeights) -> Result<Activations> {
    let a = lstm_forward(seq, fwd, Direction::Forward)?;
    let b = lstm_forward(seq, bwd, Direction::Backward)?;
    let (frames, ha) = a.dims2()?;
    let (_, hb) = b.dims2()?;
    let mut out = Vec::with_capacity(frames * (ha + hb));
    for t in 0..frames {
        out.extend_from_slice(a.row(t));
        out.extend_from_slice(b.row(t));
    }
    Tensor::new(vec![frames, ha + hb], out)
}

#[derive(Debug, Clone, Copy)]
pub struct MhaWeights<'a> {
    pub w_q: &'a Tensor,
    pub b_q: &'a Tensor,
    pub w_k: &'a Tensor,
    pub b_k: &'a Tensor,
    pub w_v: &'a Tensor,
    pub b_v: &'a Tensor,
    pub w_o: &'a Tensor,
    pub b_o: &'a Tensor,
}

/// Multi-head scaled dot-product self-attention with output projection and
/// a residual connection: `x + out_proj(attention(x))`.
pub fn mha_forward(seq: &Activations, weights: MhaWeights, heads: usize, causal: bool) -> Result<Activations> {
    let (frames, d) = seq.dims2()?;
    if heads == 0 || d % heads != 0 {
        return Err(Error::Shape(format!("mha: model dim {d} not divisible by {heads} heads")));
    }
    for (name, w) in [("w_q", weights.w_q), ("w_k", weights.w_k), ("w_v", weights.w_v), ("w_o", weights.w_o)] {
        expect_shape(name, w, &[d, d])?;
    }
    let q = fc_forward(seq, weights.w_q, weights.b_q)?;
    let k = fc_forward(seq, weights.w_k, weights.b_k)?;
    let v = fc_forward(seq, weights.w_v, weights.b_v)?;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut context = vec![0.0; frames * d];
    let mut scores = vec![0.0; frames];
    for head in 0..heads {
        let cols = head * dh..(head + 1) * dh;
        for i in 0..frames {
            let qi = &q.row(i)[cols.clone()];
            let visible = if causal { i + 1 } else { frames };
            let mut max = f64::NEG_INFINITY;
            for (j, s) in scores.iter_mut().enumerate().take(visible) {
                *s = dot64(qi, &k.row(j)[cols.clone()]) * scale;
                max = max.max(*s);
            }
            let mut total = 0.0;
            for s in scores.iter_mut().take(visible) {
                *s = (*s - max).exp();
                total += *s;
            }
            let ctx = &mut context[i * d + head * dh..i * d + (head + 1) * dh];
            for (j, s) in scores.iter().enumerate().take(visible) {
                let weight = s / total;
                for (c, vj) in ctx.iter_mut().zip(&v.row(j)[cols.clone()]) {
                    *c += weight * vj;
                }
            }
        }
    }
    let context = Tensor::new(vec![frames, d], context)?;
    let mut out = fc_forward(&context, weights.w_o, weights.b_o)?;
    for (o, x) in out.data_mut().iter_mut().zip(seq.data()) {
        *o += x;
    }
    Ok(out)
}

/// Normalizes each row over the feature axis, then applies `gain` and `bias`.
pub fn layer_norm(x: &Activations, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Activations> {
    let (n, d) = x.dims2()?;
    expect_shape("layer norm gain", gain, &[d])?;
    expect_shape("layer norm bias", bias, &[d])?;
    let mut out = Vec::with_capacity(n * d);
    for r in 0..n {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for ((v, g), b) in row.iter().zip(gain.data()).zip(bias.data()) {
            out.push((v - mean) * inv * f64::from(*g) + f64::from(*b));
        }
    }
    Tensor::new(vec![n, d], out)
}
