//! Two-file checkpoint: a JSON manifest plus a blob of little-endian `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AffineLayer, DiagonalLayer, Layer, Network};
use crate::error::{CheckpointError, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::primitives::{IsoBlock, RadialNormalizer, RadialProfile};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    layers: Vec<LayerSpec>,
    tensors: Vec<TensorEntry>,
    blob: String,
    blob_bytes: u64,
    crc32: u32,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerSpec {
    Affine { rows: usize, cols: usize },
    Diagonal { rows: usize, cols: usize },
    Iso { profile: ProfileKind, intrinsic_length: bool, normalizer: bool },
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ProfileKind {
    IsoTanh,
    Identity,
    Blend,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
    len: usize,
}

fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(CheckpointError::Corrupt(msg.into()))
}

/// Writes `path` (manifest) and a sibling `.bin` blob.
pub fn save(net: &Network, path: &Path) -> Result<()> {
    let mut specs = Vec::new();
    let mut tensors = Vec::new();
    let mut blob: Vec<u8> = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, values: &[f64], tensors: &mut Vec<TensorEntry>| {
        tensors.push(TensorEntry { name, shape, offset: blob.len() as u64, len: values.len() });
        for v in values {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    };
    for (i, layer) in net.layers().iter().enumerate() {
        match layer {
            Layer::Affine(a) => {
                specs.push(LayerSpec::Affine { rows: a.w.rows(), cols: a.w.cols() });
                push(format!("layers.{i}.w"), vec![a.w.rows(), a.w.cols()], a.w.as_slice(), &mut tensors);
                push(format!("layers.{i}.b"), vec![a.b.len()], &a.b, &mut tensors);
            }
            Layer::Diagonal(d) => {
                specs.push(LayerSpec::Diagonal { rows: d.rows, cols: d.cols });
                push(format!("layers.{i}.diag"), vec![d.diag.len()], &d.diag, &mut tensors);
                push(format!("layers.{i}.b"), vec![d.b.len()], &d.b, &mut tensors);
            }
            Layer::Iso(b) => {
                let profile = match b.profile {
                    RadialProfile::IsoTanh => ProfileKind::IsoTanh,
                    RadialProfile::Identity => ProfileKind::Identity,
                    RadialProfile::Blend { .. } => ProfileKind::Blend,
                };
                specs.push(LayerSpec::Iso {
                    profile,
                    intrinsic_length: b.intrinsic_length,
                    normalizer: b.normalizer.is_some(),
                });
                push(format!("layers.{i}.lambda"), vec![1], &[b.lambda], &mut tensors);
                if let RadialProfile::Blend { alpha } = b.profile {
                    push(format!("layers.{i}.alpha"), vec![1], &[alpha], &mut tensors);
                }
                if let Some(n) = &b.normalizer {
                    push(
                        format!("layers.{i}.normalizer"),
                        vec![3],
                        &[n.target_scale, n.momentum, n.running_mean_radius],
                        &mut tensors,
                    );
                }
            }
            Layer::Tanh => specs.push(LayerSpec::Tanh),
        }
    }
    let bpath = blob_path(path);
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        layers: specs,
        tensors,
        blob: bpath
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        blob_bytes: blob.len() as u64,
        crc32: crc32fast::hash(&blob),
    };
    fs::write(&bpath, &blob)?;
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| corrupt(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads a checkpoint written by [`save`].
pub fn load(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
        if e.is_eof() {
            Error::Checkpoint(CheckpointError::Truncated(format!("manifest: {e}")))
        } else {
            corrupt(format!("manifest: {e}"))
        }
    })?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(CheckpointError::Version {
            found: manifest.version,
            expected: CHECKPOINT_VERSION,
        }));
    }
    let bpath = path.with_file_name(&manifest.blob);
    let blob = fs::read(&bpath)?;
    if (blob.len() as u64) < manifest.blob_bytes {
        return Err(Error::Checkpoint(CheckpointError::Truncated(format!(
            "blob holds {} bytes, manifest declares {}",
            blob.len(),
            manifest.blob_bytes
        ))));
    }
    if blob.len() as u64 != manifest.blob_bytes {
        return Err(corrupt(format!(
            "blob holds {} bytes, manifest declares {}",
            blob.len(),
            manifest.blob_bytes
        )));
    }
    let crc = crc32fast::hash(&blob);
    if crc != manifest.crc32 {
        return Err(Error::Checkpoint(CheckpointError::Checksum { expected: manifest.crc32, found: crc }));
    }

    let mut reader = TensorReader { blob: &blob, tensors: &manifest.tensors, next: 0 };
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for (i, spec) in manifest.layers.iter().enumerate() {
        layers.push(match *spec {
            LayerSpec::Affine { rows, cols } => {
                let w = reader.take(&format!("layers.{i}.w"), &[rows, cols])?;
                let b = reader.take(&format!("layers.{i}.b"), &[rows])?;
                Layer::Affine(AffineLayer::new(Matrix::from_vec(rows, cols, w)?, Vector::from_vec(b)))
            }
            LayerSpec::Diagonal { rows, cols } => {
                let diag = reader.take(&format!("layers.{i}.diag"), &[rows.min(cols)])?;
                let b = reader.take(&format!("layers.{i}.b"), &[rows])?;
                Layer::Diagonal(DiagonalLayer::new(rows, cols, Vector::from_vec(diag), Vector::from_vec(b)))
            }
            LayerSpec::Iso { profile, intrinsic_length, normalizer } => {
                let lambda = reader.take(&format!("layers.{i}.lambda"), &[1])?[0];
                let profile = match profile {
                    ProfileKind::IsoTanh => RadialProfile::IsoTanh,
                    ProfileKind::Identity => RadialProfile::Identity,
                    ProfileKind::Blend => RadialProfile::Blend {
                        alpha: reader.take(&format!("layers.{i}.alpha"), &[1])?[0],
                    },
                };
                let normalizer = if normalizer {
                    let v = reader.take(&format!("layers.{i}.normalizer"), &[3])?;
                    Some(RadialNormalizer { target_scale: v[0], momentum: v[1], running_mean_radius: v[2] })
                } else {
                    None
                };
                Layer::Iso(IsoBlock { profile, lambda, intrinsic_length, normalizer })
            }
            LayerSpec::Tanh => Layer::Tanh,
        });
    }
    if reader.next != manifest.tensors.len() {
        return Err(corrupt(format!(
            "{} tensors listed but layers consume {}",
            manifest.tensors.len(),
            reader.next
        )));
    }
    Network::new(layers).map_err(|e| corrupt(format!("inconsistent layers: {e}")))
}

struct TensorReader<'a> {
    blob: &'a [u8],
    tensors: &'a [TensorEntry],
    next: usize,
}

impl TensorReader<'_> {
    fn take(&mut self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let entry = self
            .tensors
            .get(self.next)
            .ok_or_else(|| corrupt(format!("tensor `{name}` missing from manifest")))?;
        self.next += 1;
        if entry.name != name {
            return Err(corrupt(format!("expected tensor `{name}`, found `{}`", entry.name)));
        }
        let count: usize = shape.iter().product();
        if entry.shape != shape || entry.len != count {
            return Err(corrupt(format!(
                "tensor `{name}` declares shape {:?} / len {} but the layer needs {shape:?}",
                entry.shape, entry.len
            )));
        }
        let start = usize::try_from(entry.offset).map_err(|_| corrupt("offset overflow"))?;
        let end = start + 8 * count;
        if end > self.blob.len() || start % 8 != 0 {
            return Err(corrupt(format!("tensor `{name}` spans bytes {start}..{end} outside the blob")));
        }
        Ok(self.blob[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Activation;

    fn sample_net() -> Network {
        let mut net = Network::mlp(&[5, 4, 3], Activation::IsoTanh, 9).unwrap();
        if let Layer::Iso(b) = &mut net.layers_mut()[1] {
            b.profile = RadialProfile::Blend { alpha: 0.25 };
            b.normalizer = Some(RadialNormalizer { target_scale: 1.5, momentum: 0.9, running_mean_radius: 0.7 });
        }
        net
    }

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ckpt.json");
        let net = sample_net();
        save(&net, &p).unwrap();
        assert_eq!(load(&p).unwrap(), net);
    }

    #[test]
    fn truncated_blob_and_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ckpt.json");
        save(&sample_net(), &p).unwrap();
        let b = blob_path(&p);
        let bytes = fs::read(&b).unwrap();
        fs::write(&b, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load(&p), Err(Error::Checkpoint(CheckpointError::Truncated(_)))));
        let mut flipped = bytes.clone();
        flipped[10] ^= 0x40;
        fs::write(&b, &flipped).unwrap();
        assert!(matches!(load(&p), Err(Error::Checkpoint(CheckpointError::Checksum { .. }))));
    }

    #[test]
    fn version_and_width_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ckpt.json");
        save(&sample_net(), &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        fs::write(&p, text.replace("\"version\": 1", "\"version\": 7")).unwrap();
        assert!(matches!(load(&p), Err(Error::Checkpoint(CheckpointError::Version { found: 7, .. }))));
        fs::write(&p, text.replacen("\"rows\": 4", "\"rows\": 6", 1)).unwrap();
        assert!(matches!(load(&p), Err(Error::Checkpoint(CheckpointError::Corrupt(_)))));
        fs::write(&p, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load(&p), Err(Error::Checkpoint(CheckpointError::Truncated(_)))));
    }
}
