//! Model file format.
//!
//! ```text
//! magic    8 bytes   "QQSEMDL1"
//! hlen     u32 LE    length of the JSON header in bytes
//! header   hlen      UTF-8 JSON, see `Header`
//! payload  4 * n     little-endian f32 parameter blocks, in
//!                    `ModelWeights::blocks` order
//! ```
//!
//! The header carries the hyperparameters, embedding dimension and
//! fingerprint, the name and length of every block, the payload length and
//! the CRC32 of the payload bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HyperParams, ModelError, ModelWeights};

pub const MAGIC: &[u8; 8] = b"QQSEMDL1";
const MAGIC_PREFIX: &[u8; 7] = b"QQSEMDL";

#[derive(Debug, Serialize, Deserialize)]
struct BlockInfo {
    name: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    hyper: HyperParams,
    embedding_dim: usize,
    fingerprint: String,
    blocks: Vec<BlockInfo>,
    payload_len: usize,
    crc32: u32,
}

pub fn encode_model(weights: &ModelWeights<f32>) -> Vec<u8> {
    let blocks = weights.blocks();
    let mut payload = Vec::with_capacity(4 * weights.parameter_count());
    for (_, b) in &blocks {
        for x in b.iter() {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    let header = Header {
        hyper: weights.hyper.clone(),
        embedding_dim: weights.embedding_dim,
        fingerprint: weights.fingerprint.clone(),
        blocks: blocks.iter().map(|(n, b)| BlockInfo { name: n.clone(), len: b.len() }).collect(),
        payload_len: payload.len(),
        crc32: crc32fast::hash(&payload),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelWeights<f32>, ModelError> {
    if bytes.len() < MAGIC.len() || &bytes[..8] != MAGIC {
        if bytes.len() >= 8 && &bytes[..7] == MAGIC_PREFIX {
            return Err(ModelError::VersionMismatch(String::from_utf8_lossy(&bytes[..8]).into_owned()));
        }
        return Err(ModelError::Format("not a model file (bad magic)".into()));
    }
    let truncated = || ModelError::Checksum("file is truncated".into());
    let hlen = u32::from_le_bytes(bytes.get(8..12).ok_or_else(truncated)?.try_into().unwrap()) as usize;
    let header_bytes = bytes.get(12..12 + hlen).ok_or_else(truncated)?;
    let header: Header =
        serde_json::from_slice(header_bytes).map_err(|e| ModelError::Format(format!("header: {e}")))?;
    let payload = &bytes[12 + hlen..];
    if payload.len() != header.payload_len {
        return Err(ModelError::Checksum(format!(
            "payload is {} bytes, header declares {}",
            payload.len(),
            header.payload_len
        )));
    }
    let crc = crc32fast::hash(payload);
    if crc != header.crc32 {
        return Err(ModelError::Checksum(format!("crc32 {crc:08x} != {:08x}", header.crc32)));
    }
    header.hyper.validate()?;
    let mut weights = ModelWeights::<f32>::zeros(&header.hyper, header.embedding_dim, &header.fingerprint);
    let mut blocks = weights.blocks_mut();
    if blocks.len() != header.blocks.len() {
        return Err(ModelError::Format("block count does not match hyperparameters".into()));
    }
    let mut floats = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    for ((name, block), info) in blocks.iter_mut().zip(&header.blocks) {
        if *name != info.name || block.len() != info.len {
            return Err(ModelError::Format(format!("block {} does not match expected {name}", info.name)));
        }
        for x in block.iter_mut() {
            *x = floats.next().ok_or_else(|| ModelError::Format("payload shorter than blocks".into()))?;
        }
    }
    if floats.next().is_some() {
        return Err(ModelError::Format("payload longer than blocks".into()));
    }
    drop(blocks);
    Ok(weights)
}

pub fn save_model(weights: &ModelWeights<f32>, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, encode_model(weights)).map_err(ModelError::Io)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelWeights<f32>, ModelError> {
    decode_model(&fs::read(path).map_err(ModelError::Io)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_weights;

    fn weights() -> ModelWeights<f32> {
        let hp = HyperParams { cnn_filters_per_width: 3, cnn_fc_out: 4, lstm_hidden: 2, head_hidden: 5, ..Default::default() };
        init_weights(&hp, 6, "abc")
    }

    #[test]
    fn round_trip_is_bitwise() {
        let w = weights();
        let back = decode_model(&encode_model(&w)).unwrap();
        for ((_, a), (_, b)) in w.blocks().into_iter().zip(back.blocks()) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back, w);

        let q: ModelWeights<f32> = init_weights(&w.hyper.clone().query_only(), 6, "abc");
        assert_eq!(decode_model(&encode_model(&q)).unwrap(), q);
    }

    #[test]
    fn truncation_is_a_checksum_error() {
        let bytes = encode_model(&weights());
        for cut in [bytes.len() - 1, bytes.len() - 100, 10] {
            let err = decode_model(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, ModelError::Checksum(_)), "cut {cut}: {err}");
        }
    }

    #[test]
    fn flipped_payload_bit_is_detected() {
        let mut bytes = encode_model(&weights());
        let n = bytes.len();
        bytes[n - 3] ^= 0x10;
        assert!(matches!(decode_model(&bytes), Err(ModelError::Checksum(_))));
    }

    #[test]
    fn other_versions_are_rejected() {
        let mut bytes = encode_model(&weights());
        bytes[7] = b'2';
        assert!(matches!(decode_model(&bytes), Err(ModelError::VersionMismatch(_))));
        assert!(matches!(decode_model(b"GARBAGE!...."), Err(ModelError::Format(_))));
    }
}
