//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | content |
//! |--------|------|---------|
//! | 0 | 8 | magic `NLCKPT\0\0` |
//! | 8 | 4 | format version (`u32`, currently 1) |
//! | 12 | 4 | header length `n` in bytes (`u32`) |
//! | 16 | n | UTF-8 JSON header: model kind, sizes, tensor names and shapes, free-form metadata |
//! | 16+n | 8·Σ rows·cols | tensor payload, `f64` little-endian, row-major, in header order |
//!
//! Loading rejects trailing bytes, short payloads and shape disagreements,
//! so a round trip is bit-exact or an error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FcnnParams, LstmParams, Model, ModelKind, ModelSizes};
use crate::error::{Error, Result};
use crate::numkernel::Matrix;

pub const MAGIC: &[u8; 8] = b"NLCKPT\0\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub kind: ModelKind,
    pub sizes: ModelSizes,
    pub tensors: Vec<TensorInfo>,
    /// Caller-defined metadata (target series, normalizer, ...).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

pub fn encode(model: &Model, metadata: serde_json::Value) -> Result<Vec<u8>> {
    let params = model.params();
    let header = CheckpointHeader {
        kind: model.kind(),
        sizes: model.sizes(),
        tensors: model
            .param_names()
            .into_iter()
            .zip(&params)
            .map(|(name, m)| TensorInfo {
                name,
                rows: m.rows(),
                cols: m.cols(),
            })
            .collect(),
        metadata,
    };
    let json = serde_json::to_vec(&header)?;
    let payload: usize = params.iter().map(|m| m.len() * 8).sum();
    let mut out = Vec::with_capacity(16 + json.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let len = u32::try_from(json.len()).map_err(|_| Error::Checkpoint("header too large".into()))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    for m in params {
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(Model, CheckpointHeader)> {
    let err = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(err("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| err("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[16..header_end])?;

    let mut cursor = header_end;
    let mut parts = Vec::with_capacity(header.tensors.len());
    for t in &header.tensors {
        let n = t.rows * t.cols;
        let end = cursor
            .checked_add(n * 8)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated payload in `{}`", t.name)))?;
        let data = bytes[cursor..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        parts.push(Matrix::new(t.rows, t.cols, data)?);
        cursor = end;
    }
    if cursor != bytes.len() {
        return Err(err("trailing bytes after payload"));
    }
    let model = match header.kind {
        ModelKind::Fcnn => Model::Fcnn(FcnnParams::from_parts(
            header.sizes.look_back,
            header.sizes.features,
            parts,
        )?),
        ModelKind::Lstm => Model::Lstm(LstmParams::from_parts(header.sizes.look_back, parts)?),
    };
    if model.sizes() != header.sizes || model.param_names().len() != header.tensors.len() {
        return Err(err("header sizes disagree with tensors"));
    }
    Ok((model, header))
}

pub fn save(path: &Path, model: &Model, metadata: serde_json::Value) -> Result<()> {
    let bytes = encode(model, metadata)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(Model, CheckpointHeader)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::init_params;
    use proptest::prelude::*;

    fn bits(m: &Model) -> Vec<u64> {
        m.params().iter().flat_map(|p| p.data().iter().map(|v| v.to_bits())).collect()
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            seed in any::<u64>(),
            lstm in any::<bool>(),
            features in 1usize..5,
            look_back in 1usize..5,
            h1 in 1usize..6,
            h2 in 1usize..6,
        ) {
            let kind = if lstm { ModelKind::Lstm } else { ModelKind::Fcnn };
            let sizes = ModelSizes { features, look_back, hidden: [h1, h2], outputs: 1 };
            let model = init_params(kind, sizes, seed).unwrap();
            let meta = serde_json::json!({ "target": "net_load" });
            let (back, header) = decode(&encode(&model, meta.clone()).unwrap()).unwrap();
            prop_assert_eq!(bits(&model), bits(&back));
            prop_assert_eq!(header.metadata, meta);
            prop_assert_eq!(back.sizes(), sizes);
        }
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let sizes = ModelSizes {
            features: 2,
            look_back: 3,
            hidden: [3, 3],
            outputs: 1,
        };
        let model = init_params(ModelKind::Lstm, sizes, 1).unwrap();
        let bytes = encode(&model, serde_json::Value::Null).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(decode(&bad_magic).is_err());
        let mut bad_version = bytes;
        bad_version[8] = 9;
        assert!(decode(&bad_version).is_err());
    }

    #[test]
    fn special_values_survive() {
        let sizes = ModelSizes {
            features: 1,
            look_back: 1,
            hidden: [1, 1],
            outputs: 1,
        };
        let mut model = init_params(ModelKind::Fcnn, sizes, 0).unwrap();
        model.params_mut()[0].set(0, 0, -0.0);
        model.params_mut()[1].set(0, 0, f64::MIN_POSITIVE / 2.0);
        let (back, _) = decode(&encode(&model, serde_json::Value::Null).unwrap()).unwrap();
        assert_eq!(bits(&model), bits(&back));
    }
}
