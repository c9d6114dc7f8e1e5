//! Hybrid global-local SPP model: descriptor, weight bundle and forward pass.
//!
//! Graph, per utterance of `L` frames with `K` bins:
//!
//! 1. encoder maps each frame `[K]` to a latent vector `[latent]`
//!    (LSTM + projection for the BLSTM variant, one FC for the attention
//!    variant);
//! 2. each bin `k` feeds `[feature(k,l), latent(l)]` through its own
//!    FC(latent+1 -> 1);
//! 3. the `K` outputs are added to the input frame and layer-normalized;
//! 4. decoder: BLSTM (`[L, 2H]`) or a stack of residual multi-head attention
//!    layers (`[L, K]`);
//! 5. fc1 -> `[L, 2K]`, fc2 -> `[L, K]`, sigmoid.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::layers::{
    blstm_forward, fc_forward, layer_norm, lstm_forward, mha_forward, sigmoid, Direction, LstmWeights, MhaWeights,
    LAYER_NORM_EPS,
};
use super::{Activations, Tensor};
use crate::error::{Error, Result};
use crate::signal::{LogPowerFeatures, NormStats};
use crate::spp_stat::SppMap;

pub const FORMAT_VERSION: u32 = 1;

/// Saturated sigmoid outputs are kept this far inside (0, 1).
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    Blstm,
    Attention,
}

impl ModelVariant {
    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Blstm => "blstm",
            ModelVariant::Attention => "attention",
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blstm" => Ok(ModelVariant::Blstm),
            "attention" => Ok(ModelVariant::Attention),
            other => Err(Error::InvalidConfig(format!("unknown model variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub variant: ModelVariant,
    pub num_bins: usize,
    pub latent_dim: usize,
    /// Hidden size of the encoder LSTM (BLSTM variant only).
    pub encoder_hidden: usize,
    /// Hidden size per direction of the BLSTM decoder.
    pub decoder_hidden: usize,
    pub heads: usize,
    pub attention_layers: usize,
    pub fc1_out: usize,
    pub causal: bool,
}

impl ModelDescriptor {
    pub fn new(variant: ModelVariant) -> Self {
        ModelDescriptor {
            variant,
            num_bins: 129,
            latent_dim: 32,
            encoder_hidden: 129,
            decoder_hidden: 129,
            heads: 3,
            attention_layers: 2,
            fc1_out: 258,
            causal: false,
        }
    }

    pub fn per_bin_in(&self) -> usize {
        self.latent_dim + 1
    }

    pub fn decoder_out(&self) -> usize {
        match self.variant {
            ModelVariant::Blstm => 2 * self.decoder_hidden,
            ModelVariant::Attention => self.num_bins,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bins == 0 || self.latent_dim == 0 || self.fc1_out == 0 {
            return Err(Error::InvalidConfig("model dimensions must be non-zero".into()));
        }
        if self.variant == ModelVariant::Attention && (self.heads == 0 || !self.num_bins.is_multiple_of(self.heads)) {
            return Err(Error::InvalidConfig(format!(
                "{} heads do not divide model dim {}",
                self.heads, self.num_bins
            )));
        }
        Ok(())
    }

    /// Every tensor the graph needs, with its shape, in file order.
    pub fn inventory(&self) -> Vec<(String, Vec<usize>)> {
        let k = self.num_bins;
        let mut inv: Vec<(String, Vec<usize>)> = Vec::new();
        let lstm = |prefix: &str, input: usize, hidden: usize, inv: &mut Vec<(String, Vec<usize>)>| {
            inv.push((format!("{prefix}.w_ih"), vec![4 * hidden, input]));
            inv.push((format!("{prefix}.w_hh"), vec![4 * hidden, hidden]));
            inv.push((format!("{prefix}.bias"), vec![4 * hidden]));
        };
        match self.variant {
            ModelVariant::Blstm => {
                lstm("encoder.lstm", k, self.encoder_hidden, &mut inv);
                inv.push(("encoder.proj.weight".into(), vec![self.latent_dim, self.encoder_hidden]));
                inv.push(("encoder.proj.bias".into(), vec![self.latent_dim]));
            }
            ModelVariant::Attention => {
                inv.push(("encoder.fc.weight".into(), vec![self.latent_dim, k]));
                inv.push(("encoder.fc.bias".into(), vec![self.latent_dim]));
            }
        }
        inv.push(("bin_fc.weight".into(), vec![k, self.per_bin_in()]));
        inv.push(("bin_fc.bias".into(), vec![k]));
        inv.push(("norm.gain".into(), vec![k]));
        inv.push(("norm.bias".into(), vec![k]));
        match self.variant {
            ModelVariant::Blstm => {
                lstm("decoder.fwd", k, self.decoder_hidden, &mut inv);
                lstm("decoder.bwd", k, self.decoder_hidden, &mut inv);
            }
            ModelVariant::Attention => {
                for layer in 0..self.attention_layers {
                    for proj in ["q", "k", "v", "o"] {
                        inv.push((format!("decoder.attn{layer}.w_{proj}"), vec![k, k]));
                        inv.push((format!("decoder.attn{layer}.b_{proj}"), vec![k]));
                    }
                }
            }
        }
        inv.push(("fc1.weight".into(), vec![self.fc1_out, self.decoder_out()]));
        inv.push(("fc1.bias".into(), vec![self.fc1_out]));
        inv.push(("fc2.weight".into(), vec![k, self.fc1_out]));
        inv.push(("fc2.bias".into(), vec![k]));
        inv
    }
}

/// Exact number of trainable parameters.
pub fn param_count(descriptor: &ModelDescriptor) -> usize {
    descriptor.inventory().iter().map(|(_, shape)| shape.iter().product::<usize>()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub descriptor: ModelDescriptor,
    pub tensors: BTreeMap<String, Tensor>,
    pub norm_stats: NormStats,
    pub format_version: u32,
}

impl ModelBundle {
    pub fn new(descriptor: ModelDescriptor, tensors: BTreeMap<String, Tensor>, norm_stats: NormStats) -> Result<Self> {
        let bundle = ModelBundle { descriptor, tensors, norm_stats, format_version: FORMAT_VERSION };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Bundle with every tensor zero.
    pub fn zeros(descriptor: ModelDescriptor, norm_stats: NormStats) -> Self {
        let tensors = descriptor.inventory().into_iter().map(|(name, shape)| (name, Tensor::zeros(shape))).collect();
        ModelBundle { descriptor, tensors, norm_stats, format_version: FORMAT_VERSION }
    }

    pub fn validate(&self) -> Result<()> {
        self.descriptor.validate()?;
        self.norm_stats.validate()?;
        let inventory = self.descriptor.inventory();
        for (name, shape) in &inventory {
            let t = self.tensors.get(name).ok_or_else(|| Error::MissingTensor(name.clone()))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::TensorShape {
                    name: name.clone(),
                    found: t.shape().to_vec(),
                    expected: shape.clone(),
                });
            }
            if !t.is_finite() {
                return Err(Error::Format {
                    what: "model bundle",
                    detail: format!("tensor `{name}` has non-finite values"),
                });
            }
        }
        if let Some(extra) = self.tensors.keys().find(|n| !inventory.iter().any(|(i, _)| i == *n)) {
            return Err(Error::UnexpectedTensor(extra.clone()));
        }
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors.get(name).ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    fn lstm(&self, prefix: &str) -> Result<LstmWeights<'_>> {
        Ok(LstmWeights {
            w_ih: self.tensor(&format!("{prefix}.w_ih"))?,
            w_hh: self.tensor(&format!("{prefix}.w_hh"))?,
            bias: self.tensor(&format!("{prefix}.bias"))?,
        })
    }

    fn attention(&self, layer: usize) -> Result<MhaWeights<'_>> {
        let t = |p: &str| self.tensor(&format!("decoder.attn{layer}.{p}"));
        Ok(MhaWeights {
            w_q: t("w_q")?,
            b_q: t("b_q")?,
            w_k: t("w_k")?,
            b_k: t("b_k")?,
            w_v: t("w_v")?,
            b_v: t("b_v")?,
            w_o: t("w_o")?,
            b_o: t("b_o")?,
        })
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.descriptor)
    }
}

/// Runs the model on features normalized with the bundle's statistics.
pub fn model_forward(bundle: &ModelBundle, features: &LogPowerFeatures) -> Result<SppMap> {
    match features.normalized_with {
        Some(stats) if stats == bundle.norm_stats => {}
        Some(stats) => {
            return Err(Error::ModelMismatch(format!(
                "features normalized with mean {} std {}, model expects mean {} std {}",
                stats.mean, stats.std, bundle.norm_stats.mean, bundle.norm_stats.std
            )))
        }
        None => return Err(Error::ModelMismatch("features are not normalized".into())),
    }
    let probs = forward_normalized(bundle, &features.data)?;
    Ok(SppMap { data: probs })
}

/// Forward pass on an already-normalized `(bins, frames)` matrix.
pub fn forward_normalized(bundle: &ModelBundle, features: &Array2<f64>) -> Result<Array2<f64>> {
    let desc = &bundle.descriptor;
    let (k, frames) = features.dim();
    if k != desc.num_bins {
        return Err(Error::ModelMismatch(format!("features have {k} bins, model expects {}", desc.num_bins)));
    }
    if frames == 0 {
        return Err(Error::Shape("features have no frames".into()));
    }
    // [frames, bins]
    let x: Activations = Tensor::from_fn(vec![frames, k], |i| features[(i % k, i / k)]);

    let latent = match desc.variant {
        ModelVariant::Blstm => {
            let h = lstm_forward(&x, bundle.lstm("encoder.lstm")?, Direction::Forward)?;
            fc_forward(&h, bundle.tensor("encoder.proj.weight")?, bundle.tensor("encoder.proj.bias")?)?
        }
        ModelVariant::Attention => {
            fc_forward(&x, bundle.tensor("encoder.fc.weight")?, bundle.tensor("encoder.fc.bias")?)?
        }
    };

    let bin_w = bundle.tensor("bin_fc.weight")?;
    let bin_b = bundle.tensor("bin_fc.bias")?;
    let mut mixed = x.clone();
    for t in 0..frames {
        let lat = latent.row(t);
        let frame = x.row(t);
        let row = &mut mixed.data_mut()[t * k..(t + 1) * k];
        for bin in 0..k {
            let w = bin_w.row(bin);
            let local =
                f64::from(w[0]) * frame[bin] + w[1..].iter().zip(lat).map(|(a, b)| f64::from(*a) * b).sum::<f64>();
            // residual with the input feature
            row[bin] += local + f64::from(bin_b.data()[bin]);
        }
    }
    let normed = layer_norm(&mixed, bundle.tensor("norm.gain")?, bundle.tensor("norm.bias")?, LAYER_NORM_EPS)?;

    let decoded = match desc.variant {
        ModelVariant::Blstm => blstm_forward(&normed, bundle.lstm("decoder.fwd")?, bundle.lstm("decoder.bwd")?)?,
        ModelVariant::Attention => {
            let mut h = normed;
            for layer in 0..desc.attention_layers {
                h = mha_forward(&h, bundle.attention(layer)?, desc.heads, desc.causal)?;
            }
            h
        }
    };
    let h = fc_forward(&decoded, bundle.tensor("fc1.weight")?, bundle.tensor("fc1.bias")?)?;
    let logits = fc_forward(&h, bundle.tensor("fc2.weight")?, bundle.tensor("fc2.bias")?)?;
    Ok(Array2::from_shape_fn((k, frames), |(bin, t)| sigmoid(logits.row(t)[bin]).clamp(PROB_EPS, 1.0 - PROB_EPS)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::golden::random_bundle;
    use crate::signal::normalize;
    use proptest::prelude::*;

    fn input(k: usize, frames: usize, seed: u64) -> Array2<f64> {
        Array2::from_shape_fn((k, frames), |(b, t)| ((b * 31 + t * 7 + seed as usize) % 17) as f64 / 4.0 - 2.0)
    }

    #[test]
    fn param_counts() {
        let blstm = param_count(&ModelDescriptor::new(ModelVariant::Blstm));
        let attn = param_count(&ModelDescriptor::new(ModelVariant::Attention));
        assert_eq!(blstm, 509_969);
        assert_eq!(attn, 209_915);
        assert!((blstm as f64 / 0.51e6 - 1.0).abs() <= 0.15);
        assert!((attn as f64 / 0.23e6 - 1.0).abs() <= 0.15);
    }

    #[test]
    fn per_bin_layers_hold_4386_params() {
        let inv = ModelDescriptor::new(ModelVariant::Attention).inventory();
        let n: usize =
            inv.iter().filter(|(n, _)| n.starts_with("bin_fc.")).map(|(_, s)| s.iter().product::<usize>()).sum();
        assert_eq!(n, 4386);
    }

    #[test]
    fn zero_weights_give_one_half() {
        for variant in [ModelVariant::Blstm, ModelVariant::Attention] {
            let bundle = ModelBundle::zeros(ModelDescriptor::new(variant), NormStats::identity());
            let out = forward_normalized(&bundle, &input(129, 6, 0)).unwrap();
            assert!(out.iter().all(|&p| p == 0.5), "{variant:?}");
        }
    }

    #[test]
    fn deterministic() {
        for variant in [ModelVariant::Blstm, ModelVariant::Attention] {
            let bundle = random_bundle(variant, 17);
            let x = input(129, 9, 1);
            let a = forward_normalized(&bundle, &x).unwrap();
            let b = forward_normalized(&bundle, &x).unwrap();
            assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn feature_sentinel_is_checked() {
        let bundle = random_bundle(ModelVariant::Attention, 1);
        let raw = LogPowerFeatures::raw(input(129, 4, 0));
        assert!(matches!(model_forward(&bundle, &raw), Err(Error::ModelMismatch(_))));
        let wrong = normalize(&raw, NormStats::identity()).unwrap();
        assert!(matches!(model_forward(&bundle, &wrong), Err(Error::ModelMismatch(_))));
        let right = normalize(&raw, bundle.norm_stats).unwrap();
        let spp = model_forward(&bundle, &right).unwrap();
        assert_eq!((spp.num_bins(), spp.num_frames()), (129, 4));
    }

    #[test]
    fn bin_count_mismatch() {
        let bundle = random_bundle(ModelVariant::Attention, 1);
        assert!(matches!(forward_normalized(&bundle, &input(128, 4, 0)), Err(Error::ModelMismatch(_))));
    }

    #[test]
    fn validation_catches_missing_and_extra_tensors() {
        let mut bundle = random_bundle(ModelVariant::Blstm, 1);
        bundle.tensors.remove("fc1.bias");
        assert!(matches!(bundle.validate(), Err(Error::MissingTensor(ref n)) if n == "fc1.bias"));
        let mut bundle = random_bundle(ModelVariant::Blstm, 1);
        bundle.tensors.insert("stray".into(), Tensor::zeros(vec![1]));
        assert!(matches!(bundle.validate(), Err(Error::UnexpectedTensor(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn extreme_weights_stay_inside_unit_interval(seed in any::<u64>(), scale in prop::sample::select(vec![1.0f32, 10.0, 1e2, 1e3])) {
            for variant in [ModelVariant::Blstm, ModelVariant::Attention] {
                let mut bundle = random_bundle(variant, seed);
                for (i, t) in bundle.tensors.values_mut().enumerate() {
                    for (j, v) in t.data_mut().iter_mut().enumerate() {
                        let sign = if (i + j) % 3 == 0 { -1.0 } else { 1.0 };
                        *v = sign * scale * (0.5 + v.abs());
                    }
                }
                let out = forward_normalized(&bundle, &input(129, 5, seed)).unwrap();
                prop_assert!(out.iter().all(|&p| p.is_finite() && p > 0.0 && p < 1.0));
            }
        }
    }
}
