//! Golden-vector fixtures: a seeded random bundle, a normalized input and
//! the output of the naive reference graph.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::format::{load_model, save_model};
use super::model::{ModelBundle, ModelDescriptor, ModelVariant};
use super::{reference, Tensor};
use crate::dump::{load_dump, save_dump, DumpKind};
use crate::error::Result;
use crate::signal::NormStats;

#[derive(Debug, Clone)]
pub struct GoldenFixture {
    pub bundle: ModelBundle,
    /// Normalized `(bins, frames)` input, exactly representable in f32.
    pub input: Array2<f64>,
    /// Reference output, rounded to f32 as it is stored on disk.
    pub expected: Array2<f64>,
}

fn variant_salt(variant: ModelVariant) -> u64 {
    match variant {
        ModelVariant::Blstm => 0x626c_7374_6d00_0000,
        ModelVariant::Attention => 0x6174_746e_0000_0000,
    }
}

/// Weights uniform in `±1/sqrt(fan_in)`, biases in `±0.1`, layer-norm gain
/// near one. Same seed, same bundle.
pub fn random_bundle(variant: ModelVariant, seed: u64) -> ModelBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ variant_salt(variant));
    let desc = ModelDescriptor::new(variant);
    let tensors = desc
        .inventory()
        .into_iter()
        .map(|(name, shape)| {
            let (centre, half) = match shape[..] {
                [_, fan_in] => (0.0, 1.0 / (fan_in as f64).sqrt()),
                _ if name == "norm.gain" => (1.0, 0.1),
                _ => (0.0, 0.1),
            };
            let t = Tensor::from_fn(shape, |_| (centre + rng.random_range(-half..half)) as f32);
            (name, t)
        })
        .collect();
    let stats = NormStats { mean: rng.random_range(-5.0..5.0), std: rng.random_range(0.5..3.0) };
    ModelBundle::new(desc, tensors, stats).expect("inventory-built bundle is valid")
}

pub fn golden_fixture(variant: ModelVariant, seed: u64) -> Result<GoldenFixture> {
    let bundle = random_bundle(variant, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ variant_salt(variant));
    let frames = 12 + (seed % 8) as usize;
    let k = bundle.descriptor.num_bins;
    let input = Array2::from_shape_simple_fn((k, frames), || f64::from(rng.sample::<f64, _>(StandardNormal) as f32));
    let expected = reference::model_forward(&bundle, &input)?.mapv(|v| f64::from(v as f32));
    Ok(GoldenFixture { bundle, input, expected })
}

pub fn fixture_stem(variant: ModelVariant, seed: u64) -> String {
    format!("{}_seed{seed}", variant.name())
}

/// Writes `<variant>_seed<n>.{sppm,sppf,sppp}` for both variants and returns
/// the written paths.
pub fn write_golden(seed: u64, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    let mut paths = Vec::new();
    for variant in [ModelVariant::Blstm, ModelVariant::Attention] {
        let fx = golden_fixture(variant, seed)?;
        let stem = dir.join(fixture_stem(variant, seed));
        let (m, f, p) = (stem.with_extension("sppm"), stem.with_extension("sppf"), stem.with_extension("sppp"));
        save_model(&fx.bundle, &m)?;
        save_dump(&f, DumpKind::Features, &fx.input)?;
        save_dump(&p, DumpKind::Spp, &fx.expected)?;
        paths.extend([m, f, p]);
    }
    Ok(paths)
}

pub fn load_golden(dir: impl AsRef<Path>, variant: ModelVariant, seed: u64) -> Result<GoldenFixture> {
    let stem = dir.as_ref().join(fixture_stem(variant, seed));
    Ok(GoldenFixture {
        bundle: load_model(stem.with_extension("sppm"))?,
        input: load_dump(stem.with_extension("sppf"), DumpKind::Features)?,
        expected: load_dump(stem.with_extension("sppp"), DumpKind::Spp)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::forward_normalized;

    #[test]
    fn same_seed_same_fixture() {
        let a = golden_fixture(ModelVariant::Attention, 4).unwrap();
        let b = golden_fixture(ModelVariant::Attention, 4).unwrap();
        assert_eq!(a.bundle, b.bundle);
        assert_eq!(a.input, b.input);
        assert_eq!(a.expected, b.expected);
        assert_ne!(random_bundle(ModelVariant::Attention, 5), a.bundle);
    }

    #[test]
    fn runtime_matches_fixture() {
        for variant in [ModelVariant::Blstm, ModelVariant::Attention] {
            let fx = golden_fixture(variant, 0).unwrap();
            let got = forward_normalized(&fx.bundle, &fx.input).unwrap();
            let err = (&got - &fx.expected).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(err < 1e-5, "{variant:?}: {err}");
        }
    }

    #[test]
    fn files_reload_identically() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_golden(2, dir.path()).unwrap();
        assert_eq!(paths.len(), 6);
        let fx = golden_fixture(ModelVariant::Blstm, 2).unwrap();
        let back = load_golden(dir.path(), ModelVariant::Blstm, 2).unwrap();
        assert_eq!(back.bundle, fx.bundle);
        assert_eq!(back.input, fx.input);
        assert_eq!(back.expected, fx.expected);
    }
}
