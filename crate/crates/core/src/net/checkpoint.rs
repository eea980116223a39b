//! Binary checkpoint: `RLDC` magic, a version byte, a little-endian u32
//! manifest length, a UTF-8 JSON manifest, then every blob as contiguous
//! little-endian f32 in manifest order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Network, NetworkSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RLDC";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub iterations: u64,
    pub seed: u64,
    /// Environment id, e.g. `catch-10x10@40x40`.
    pub environment: String,
    #[serde(default)]
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the data section.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    spec: NetworkSpec,
    meta: CheckpointMeta,
    blobs: Vec<BlobEntry>,
}

/// Network weights at f32 precision plus the spec and training metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub meta: CheckpointMeta,
    pub blobs: Vec<(BlobEntry, Vec<f32>)>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn from_network(net: &Network, meta: CheckpointMeta) -> Self {
        let mut offset = 0;
        let blobs = net
            .named_params()
            .into_iter()
            .map(|(name, t)| {
                let entry = BlobEntry {
                    name,
                    shape: t.shape().to_vec(),
                    offset,
                };
                offset += t.len() * 4;
                (entry, t.values().iter().map(|&v| v as f32).collect())
            })
            .collect();
        Self {
            spec: net.spec().clone(),
            meta,
            blobs,
        }
    }

    /// Rebuilds the network, validating blob names and shapes against the spec.
    pub fn to_network(&self) -> Result<Network> {
        let mut net = Network::build(&self.spec, 0)?;
        let slots = net.param_slots();
        if slots.len() != self.blobs.len() {
            return Err(corrupt(format!(
                "spec needs {} blobs, checkpoint has {}",
                slots.len(),
                self.blobs.len()
            )));
        }
        for ((name, tensor), (entry, data)) in slots.into_iter().zip(&self.blobs) {
            if name != entry.name || tensor.shape() != entry.shape.as_slice() {
                return Err(corrupt(format!(
                    "blob `{}` {:?} disagrees with spec slot `{name}` {:?}",
                    entry.name,
                    entry.shape,
                    tensor.shape()
                )));
            }
            for (dst, &src) in tensor.values_mut().iter_mut().zip(data) {
                *dst = f64::from(src);
            }
        }
        Ok(net)
    }

    /// Round-trips a network through f32, the precision stored on disk.
    pub fn quantize(net: &Network) -> Result<Network> {
        Checkpoint::from_network(net, CheckpointMeta::default()).to_network()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let manifest = Manifest {
            spec: self.spec.clone(),
            meta: self.meta.clone(),
            blobs: self.blobs.iter().map(|(e, _)| e.clone()).collect(),
        };
        let json = serde_json::to_vec(&manifest)?;
        let len = u32::try_from(json.len()).map_err(|_| corrupt("manifest too large"))?;
        let data_len: usize = self.blobs.iter().map(|(_, d)| d.len() * 4).sum();
        let mut out = Vec::with_capacity(9 + json.len() + data_len);
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&json);
        for (_, data) in &self.blobs {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 {
            return Err(corrupt("file shorter than the fixed header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt(format!("bad magic {:?}", &bytes[..4])));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(corrupt(format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                bytes[4]
            )));
        }
        let len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
        let body = &bytes[9..];
        if body.len() < len {
            return Err(corrupt(format!(
                "manifest claims {len} bytes but only {} remain",
                body.len()
            )));
        }
        let manifest: Manifest = serde_json::from_slice(&body[..len])
            .map_err(|e| corrupt(format!("manifest is not valid JSON: {e}")))?;
        manifest.spec.validate()?;
        let data = &body[len..];
        let mut blobs = Vec::with_capacity(manifest.blobs.len());
        let mut expected_offset = 0;
        for entry in manifest.blobs {
            let count: usize = entry.shape.iter().product();
            if entry.offset != expected_offset {
                return Err(corrupt(format!("blob `{}` is not contiguous", entry.name)));
            }
            let end = entry.offset + count * 4;
            if end > data.len() {
                return Err(corrupt(format!(
                    "blob `{}` needs bytes {}..{end} but the data section has {}",
                    entry.name,
                    entry.offset,
                    data.len()
                )));
            }
            let values = data[entry.offset..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            expected_offset = end;
            blobs.push((entry, values));
        }
        if expected_offset != data.len() {
            return Err(corrupt(format!(
                "{} trailing bytes after the last blob",
                data.len() - expected_offset
            )));
        }
        let ckpt = Self {
            spec: manifest.spec,
            meta: manifest.meta,
            blobs,
        };
        ckpt.to_network()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::super::Arch;
    use super::*;
    use crate::tensor::Tensor;

    fn sample() -> (Network, Checkpoint) {
        let spec = NetworkSpec::new(Arch::MaxHalved, [4, 40, 40], 3);
        let net = Network::build(&spec, 3).unwrap();
        let meta = CheckpointMeta {
            iterations: 10,
            seed: 3,
            environment: "catch".into(),
            note: String::new(),
        };
        let ckpt = Checkpoint::from_network(&net, meta);
        (net, ckpt)
    }

    #[test]
    fn round_trip_is_bit_exact_at_f32() {
        let (net, ckpt) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.rldc");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ckpt);
        let a = ckpt.to_network().unwrap();
        let b = loaded.to_network().unwrap();
        assert!(a.same_params(&b));
        let obs = Tensor::full(&[4, 40, 40], 0.25);
        assert_eq!(
            a.forward(&obs, false).unwrap().q_values.values(),
            b.forward(&obs, false).unwrap().q_values.values()
        );
        // f32 storage differs from the f64 original by at most f32 rounding.
        for ((_, x), (_, y)) in net.named_params().iter().zip(a.named_params()) {
            for (u, v) in x.values().iter().zip(y.values()) {
                assert!((u - v).abs() <= u.abs() * 1e-7 + 1e-12);
            }
        }
    }

    #[test]
    fn corrupted_magic_rejected() {
        let (_, ckpt) = sample();
        let mut bytes = ckpt.to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(Checkpoint::from_bytes(&bytes).unwrap_err().to_string().contains("magic"));
    }

    #[test]
    fn version_mismatch_rejected() {
        let (_, ckpt) = sample();
        let mut bytes = ckpt.to_bytes().unwrap();
        bytes[4] = 9;
        assert!(Checkpoint::from_bytes(&bytes).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn truncated_blob_rejected() {
        let (_, ckpt) = sample();
        let bytes = ckpt.to_bytes().unwrap();
        let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 8]).unwrap_err();
        assert!(err.to_string().contains("data section"), "{err}");
    }

    #[test]
    fn shape_disagreement_rejected() {
        let (_, mut ckpt) = sample();
        ckpt.spec.hidden = 256;
        let bytes = ckpt.to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }

    #[test]
    fn header_layout() {
        let (_, ckpt) = sample();
        let bytes = ckpt.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"RLDC");
        assert_eq!(bytes[4], 1);
        let len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let manifest: serde_json::Value = serde_json::from_slice(&bytes[9..9 + len]).unwrap();
        assert_eq!(manifest["blobs"][0]["name"], "conv1.weight");
        let params = super::super::count_params(&ckpt.spec).unwrap();
        assert_eq!(bytes.len(), 9 + len + 4 * params);
    }
}
