use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ModelError;

/// (name, shape, row-major f32 data) triples in canonical order.
pub type NamedTensors = Vec<(String, Vec<usize>, Vec<f32>)>;

const MAGIC: &[u8; 8] = b"SSDGCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckpointMeta {
    pub step: u64,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
}

/// Writes a checkpoint archive: a JSON header (metadata + tensor index)
/// followed by the raw little-endian f32 data, bit-exact on round trip.
pub fn save_checkpoint(
    path: &Path,
    meta: &CheckpointMeta,
    tensors: &NamedTensors,
) -> Result<(), ModelError> {
    let header = Header {
        meta: meta.clone(),
        tensors: tensors
            .iter()
            .map(|(name, shape, _)| TensorEntry {
                name: name.clone(),
                shape: shape.clone(),
            })
            .collect(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let io_err = |e: std::io::Error| ModelError::Checkpoint(format!("{}: {e}", path.display()));
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(MAGIC).map_err(io_err)?;
    file.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    file.write_all(&header_bytes).map_err(io_err)?;
    for (_, _, data) in tensors {
        let mut bytes = Vec::with_capacity(data.len() * 4);
        for &v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        file.write_all(&bytes).map_err(io_err)?;
    }
    Ok(())
}

/// Reads a checkpoint archive written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointMeta, NamedTensors), ModelError> {
    let io_err = |e: std::io::Error| ModelError::Checkpoint(format!("{}: {e}", path.display()));
    let mut file = std::fs::File::open(path).map_err(io_err)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint(format!(
            "{}: not a checkpoint file",
            path.display()
        )));
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word).map_err(io_err)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes).map_err(io_err)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes).map_err(io_err)?;
    let header: Header =
        serde_json::from_slice(&header_bytes).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in header.tensors {
        let count: usize = entry.shape.iter().product();
        let mut bytes = vec![0u8; count * 4];
        file.read_exact(&mut bytes).map_err(io_err)?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push((entry.name, entry.shape, data));
    }
    Ok((header.meta, tensors))
}
