//! `SPPM` weight bundle files.
//!
//! Layout, little-endian throughout: magic `SPPM`, u32 version, u32 tensor
//! count, then per tensor a u16 name length, the UTF-8 name, a u8 rank, rank
//! u32 dims and the f32 data. A footer holds the normalization mean and std
//! as f64. The variant is not stored; it is inferred from the tensor names.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{ModelBundle, ModelDescriptor, ModelVariant, FORMAT_VERSION};
use super::Tensor;
use crate::dump::{read_exact_or, read_u32};
use crate::error::{Error, Result};
use crate::signal::NormStats;

pub const MODEL_MAGIC: &[u8; 4] = b"SPPM";

pub fn write_model<W: Write>(w: &mut W, bundle: &ModelBundle) -> Result<()> {
    let io = |e| Error::io("<stream>", e);
    w.write_all(MODEL_MAGIC).map_err(io)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    let inventory = bundle.descriptor.inventory();
    w.write_all(&(inventory.len() as u32).to_le_bytes()).map_err(io)?;
    for (name, _) in &inventory {
        let t = bundle.tensor(name)?;
        w.write_all(&(name.len() as u16).to_le_bytes()).map_err(io)?;
        w.write_all(name.as_bytes()).map_err(io)?;
        w.write_all(&[t.rank() as u8]).map_err(io)?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io)?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.write_all(&bundle.norm_stats.mean.to_le_bytes()).map_err(io)?;
    w.write_all(&bundle.norm_stats.std.to_le_bytes()).map_err(io)?;
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<ModelBundle> {
    let mut magic = [0u8; 4];
    read_exact_or(r, &mut magic, || "model header cut short".into())?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format {
            what: "model bundle",
            detail: format!("magic {:?}, expected \"SPPM\"", String::from_utf8_lossy(&magic)),
        });
    }
    let version = read_u32(r, "model header")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { what: "model bundle", found: version, expected: FORMAT_VERSION });
    }
    let count = read_u32(r, "model header")? as usize;
    let mut tensors = BTreeMap::new();
    for index in 0..count {
        let (name, tensor) = read_tensor(r, index)?;
        if tensors.insert(name.clone(), tensor).is_some() {
            return Err(Error::Format { what: "model bundle", detail: format!("duplicate tensor `{name}`") });
        }
    }
    let mut footer = [0u8; 16];
    read_exact_or(r, &mut footer, || "footer with normalization stats is missing".into())?;
    let mean = f64::from_le_bytes(footer[..8].try_into().unwrap());
    let std = f64::from_le_bytes(footer[8..].try_into().unwrap());
    let norm_stats = NormStats::new(mean, std)?;
    let descriptor = infer_descriptor(&tensors)?;
    ModelBundle::new(descriptor, tensors, norm_stats)
}

fn read_tensor<R: Read>(r: &mut R, index: usize) -> Result<(String, Tensor)> {
    let mut len = [0u8; 2];
    read_exact_or(r, &mut len, || format!("tensor #{index} header cut short"))?;
    let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
    read_exact_or(r, &mut name, || format!("tensor #{index} name cut short"))?;
    let name = String::from_utf8(name)
        .map_err(|_| Error::Format { what: "model bundle", detail: format!("tensor #{index} name is not UTF-8") })?;
    let mut rank = [0u8; 1];
    read_exact_or(r, &mut rank, || format!("tensor `{name}` header cut short"))?;
    let mut shape = Vec::with_capacity(rank[0] as usize);
    for _ in 0..rank[0] {
        shape.push(read_u32(r, &format!("tensor `{name}` shape"))? as usize);
    }
    let n: usize = shape.iter().product();
    let mut bytes = vec![0u8; n * 4];
    read_exact_or(r, &mut bytes, || format!("tensor `{name}` data cut short"))?;
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let tensor = Tensor::new(shape, data)?;
    Ok((name, tensor))
}

/// Rebuilds the descriptor from the tensor table.
fn infer_descriptor(tensors: &BTreeMap<String, Tensor>) -> Result<ModelDescriptor> {
    let variant = if tensors.contains_key("decoder.fwd.w_ih") {
        ModelVariant::Blstm
    } else if tensors.contains_key("decoder.attn0.w_q") {
        ModelVariant::Attention
    } else {
        return Err(Error::MissingTensor("decoder.fwd.w_ih or decoder.attn0.w_q".into()));
    };
    let mut desc = ModelDescriptor::new(variant);
    let dim0 = |name: &str| -> Result<usize> {
        let t = tensors.get(name).ok_or_else(|| Error::MissingTensor(name.into()))?;
        t.shape().first().copied().ok_or_else(|| Error::TensorShape {
            name: name.into(),
            found: t.shape().to_vec(),
            expected: vec![0],
        })
    };
    desc.num_bins = dim0("norm.gain")?;
    desc.fc1_out = dim0("fc1.bias")?;
    match variant {
        ModelVariant::Blstm => {
            desc.latent_dim = dim0("encoder.proj.bias")?;
            desc.encoder_hidden = dim0("encoder.lstm.bias")? / 4;
            desc.decoder_hidden = dim0("decoder.fwd.bias")? / 4;
        }
        ModelVariant::Attention => {
            desc.latent_dim = dim0("encoder.fc.bias")?;
            desc.attention_layers = (0..).take_while(|i| tensors.contains_key(&format!("decoder.attn{i}.w_q"))).count();
        }
    }
    Ok(desc)
}

pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_model(&mut w, bundle).map_err(|e| relabel(e, path))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    read_model(&mut r).map_err(|e| relabel(e, path))
}

fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}
