//! Naive scalar-loop reference implementations of every layer and of the
//! full model graph. They share no code with the runtime layers and serve
//! as oracles for tests and for golden fixture generation.

#![allow(clippy::needless_range_loop)]

use ndarray::Array2;

use super::model::{ModelBundle, ModelVariant};
use crate::error::Result;

fn w(v: &[f32], i: usize) -> f64 {
    f64::from(v[i])
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `y[r][o] = sum_c x[r][c] * w[o][c] + b[o]`.
pub fn fc(x: &[f64], rows: usize, d_in: usize, weight: &[f32], d_out: usize, bias: &[f32]) -> Vec<f64> {
    let mut y = vec![0.0; rows * d_out];
    for r in 0..rows {
        for o in 0..d_out {
            let mut acc = w(bias, o);
            for c in 0..d_in {
                acc += x[r * d_in + c] * w(weight, o * d_in + c);
            }
            y[r * d_out + o] = acc;
        }
    }
    y
}

/// LSTM over `frames` steps; `reverse` walks the sequence backwards and
/// stores each output at its original frame index.
#[allow(clippy::too_many_arguments)]
pub fn lstm(
    x: &[f64],
    frames: usize,
    d_in: usize,
    hidden: usize,
    w_ih: &[f32],
    w_hh: &[f32],
    bias: &[f32],
    reverse: bool,
) -> Vec<f64> {
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut out = vec![0.0; frames * hidden];
    for step in 0..frames {
        let t = if reverse { frames - 1 - step } else { step };
        let mut h_next = vec![0.0; hidden];
        let mut c_next = vec![0.0; hidden];
        for j in 0..hidden {
            let gate = |block: usize| -> f64 {
                let row = block * hidden + j;
                let mut z = w(bias, row);
                for k in 0..d_in {
                    z += w(w_ih, row * d_in + k) * x[t * d_in + k];
                }
                for k in 0..hidden {
                    z += w(w_hh, row * hidden + k) * h[k];
                }
                z
            };
            let input_gate = logistic(gate(0));
            let forget_gate = logistic(gate(1));
            let candidate = gate(2).tanh();
            let output_gate = logistic(gate(3));
            c_next[j] = forget_gate * c[j] + input_gate * candidate;
            h_next[j] = output_gate * c_next[j].tanh();
        }
        h = h_next;
        c = c_next;
        for j in 0..hidden {
            out[t * hidden + j] = h[j];
        }
    }
    out
}

/// Self-attention with residual. `weights` holds
/// `[w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o]`.
pub fn mha(x: &[f64], frames: usize, d: usize, heads: usize, weights: &[&[f32]], causal: bool) -> Vec<f64> {
    let q = fc(x, frames, d, weights[0], d, weights[1]);
    let k = fc(x, frames, d, weights[2], d, weights[3]);
    let v = fc(x, frames, d, weights[4], d, weights[5]);
    let dh = d / heads;
    let mut concat = vec![0.0; frames * d];
    for head in 0..heads {
        for i in 0..frames {
            let mut e = vec![0.0; frames];
            let mut norm = 0.0;
            for (j, ej) in e.iter_mut().enumerate() {
                if causal && j > i {
                    continue;
                }
                let mut s = 0.0;
                for c in 0..dh {
                    s += q[i * d + head * dh + c] * k[j * d + head * dh + c];
                }
                *ej = (s / (dh as f64).sqrt()).exp();
                norm += *ej;
            }
            for c in 0..dh {
                let mut acc = 0.0;
                for j in 0..frames {
                    acc += e[j] / norm * v[j * d + head * dh + c];
                }
                concat[i * d + head * dh + c] = acc;
            }
        }
    }
    let projected = fc(&concat, frames, d, weights[6], d, weights[7]);
    projected.iter().zip(x).map(|(p, xi)| p + xi).collect()
}

pub fn layer_norm(x: &[f64], rows: usize, d: usize, gain: &[f32], bias: &[f32], eps: f64) -> Vec<f64> {
    let mut y = vec![0.0; rows * d];
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let mut var = 0.0;
        for v in row {
            var += (v - mean).powi(2);
        }
        var /= d as f64;
        for c in 0..d {
            y[r * d + c] = w(gain, c) * (row[c] - mean) / (var + eps).sqrt() + w(bias, c);
        }
    }
    y
}

/// Full graph on a normalized `(bins, frames)` matrix, composed from the
/// functions above.
pub fn model_forward(bundle: &ModelBundle, features: &Array2<f64>) -> Result<Array2<f64>> {
    let desc = bundle.descriptor;
    let t = |name: &str| bundle.tensor(name).map(|t| t.data());
    let (k, frames) = features.dim();
    let mut x = vec![0.0; frames * k];
    for l in 0..frames {
        for b in 0..k {
            x[l * k + b] = features[(b, l)];
        }
    }

    let latent_dim = desc.latent_dim;
    let latent = match desc.variant {
        ModelVariant::Blstm => {
            let he = desc.encoder_hidden;
            let h = lstm(
                &x,
                frames,
                k,
                he,
                t("encoder.lstm.w_ih")?,
                t("encoder.lstm.w_hh")?,
                t("encoder.lstm.bias")?,
                false,
            );
            fc(&h, frames, he, t("encoder.proj.weight")?, latent_dim, t("encoder.proj.bias")?)
        }
        ModelVariant::Attention => fc(&x, frames, k, t("encoder.fc.weight")?, latent_dim, t("encoder.fc.bias")?),
    };

    let per_bin = desc.per_bin_in();
    let bin_w = t("bin_fc.weight")?;
    let bin_b = t("bin_fc.bias")?;
    let mut mixed = vec![0.0; frames * k];
    for l in 0..frames {
        for b in 0..k {
            let mut input = vec![x[l * k + b]];
            input.extend_from_slice(&latent[l * latent_dim..(l + 1) * latent_dim]);
            let local = fc(&input, 1, per_bin, &bin_w[b * per_bin..(b + 1) * per_bin], 1, &bin_b[b..b + 1]);
            mixed[l * k + b] = local[0] + x[l * k + b];
        }
    }
    let normed = layer_norm(&mixed, frames, k, t("norm.gain")?, t("norm.bias")?, 1e-5);

    let (decoded, dec_dim) = match desc.variant {
        ModelVariant::Blstm => {
            let hd = desc.decoder_hidden;
            let f = lstm(
                &normed,
                frames,
                k,
                hd,
                t("decoder.fwd.w_ih")?,
                t("decoder.fwd.w_hh")?,
                t("decoder.fwd.bias")?,
                false,
            );
            let b = lstm(
                &normed,
                frames,
                k,
                hd,
                t("decoder.bwd.w_ih")?,
                t("decoder.bwd.w_hh")?,
                t("decoder.bwd.bias")?,
                true,
            );
            let mut out = Vec::with_capacity(frames * 2 * hd);
            for l in 0..frames {
                out.extend_from_slice(&f[l * hd..(l + 1) * hd]);
                out.extend_from_slice(&b[l * hd..(l + 1) * hd]);
            }
            (out, 2 * hd)
        }
        ModelVariant::Attention => {
            let mut h = normed;
            for layer in 0..desc.attention_layers {
                let names = ["w_q", "b_q", "w_k", "b_k", "w_v", "b_v", "w_o", "b_o"];
                let ws = names.iter().map(|n| t(&format!("decoder.attn{layer}.{n}"))).collect::<Result<Vec<_>>>()?;
                h = mha(&h, frames, k, desc.heads, &ws, desc.causal);
            }
            (h, k)
        }
    };
    let h1 = fc(&decoded, frames, dec_dim, t("fc1.weight")?, desc.fc1_out, t("fc1.bias")?);
    let h2 = fc(&h1, frames, desc.fc1_out, t("fc2.weight")?, k, t("fc2.bias")?);
    Ok(Array2::from_shape_fn((k, frames), |(b, l)| logistic(h2[l * k + b])))
}
