//! Binary checkpoint format.
//!
//! ```text
//! EVPRED1\n
//! u64 LE   header length in bytes
//! header   UTF-8 `key=value` lines, then one `tensor<TAB>name<TAB>d1,d2<TAB>f64` line per tensor
//! payload  tensors in manifest order, little-endian f64
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{ModelConfig, Seq2SeqModel};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 8] = b"EVPRED1\n";
const FORMAT_VERSION: &str = "1";

/// Decoded checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Seq2SeqModel,
    /// Content hash of the vocabulary the model was trained with.
    pub vocab_hash: String,
    /// Free-form metadata (for example the selected epoch).
    pub metadata: BTreeMap<String, String>,
}

pub fn checkpoint_bytes(model: &Seq2SeqModel, vocab_hash: &str, metadata: &BTreeMap<String, String>) -> Vec<u8> {
    let mut header = String::new();
    header.push_str(&format!("format={FORMAT_VERSION}\n"));
    for (k, v) in model.config().to_entries() {
        header.push_str(&format!("{k}={v}\n"));
    }
    header.push_str(&format!("vocab_hash={vocab_hash}\n"));
    for (k, v) in metadata {
        header.push_str(&format!("meta.{k}={v}\n"));
    }
    let params = model.params();
    header.push_str(&format!("tensors={}\n", params.len()));
    for id in params.ids() {
        let dims: Vec<String> = params.value(id).shape().iter().map(|d| d.to_string()).collect();
        header.push_str(&format!("tensor\t{}\t{}\tf64\n", params.name(id), dims.join(",")));
    }

    let mut out = Vec::with_capacity(16 + header.len() + params.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for id in params.ids() {
        for x in params.value(id).data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(
    path: &Path,
    model: &Seq2SeqModel,
    vocab_hash: &str,
    metadata: &BTreeMap<String, String>,
) -> Result<()> {
    fs::write(path, checkpoint_bytes(model, vocab_hash, metadata)).map_err(|e| Error::io(path, e))
}

fn integrity(msg: impl Into<String>) -> Error {
    Error::Integrity(msg.into())
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(integrity("not an EVPRED1 checkpoint"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| integrity("truncated checkpoint header"))?;
    let header = std::str::from_utf8(&bytes[16..header_end]).map_err(|_| integrity("header is not UTF-8"))?;

    let mut entries = BTreeMap::new();
    let mut metadata = BTreeMap::new();
    let mut manifest: Vec<(String, Vec<usize>)> = Vec::new();
    for line in header.lines() {
        if let Some(rest) = line.strip_prefix("tensor\t") {
            let fields: Vec<&str> = rest.split('\t').collect();
            let [name, dims, dtype] = fields.as_slice() else {
                return Err(integrity(format!("bad manifest line {line:?}")));
            };
            if *dtype != "f64" {
                return Err(integrity(format!("unsupported dtype {dtype}")));
            }
            let shape = dims
                .split(',')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| integrity(format!("bad shape in {line:?}")))?;
            manifest.push((name.to_string(), shape));
        } else if let Some((k, v)) = line.split_once('=') {
            match k.strip_prefix("meta.") {
                Some(meta) => metadata.insert(meta.to_owned(), v.to_owned()),
                None => entries.insert(k.to_owned(), v.to_owned()),
            };
        } else {
            return Err(integrity(format!("bad header line {line:?}")));
        }
    }
    if entries.get("format").map(String::as_str) != Some(FORMAT_VERSION) {
        return Err(integrity("unsupported checkpoint format version"));
    }
    let vocab_hash = entries
        .get("vocab_hash")
        .cloned()
        .ok_or_else(|| integrity("missing vocab_hash"))?;
    let mut config = ModelConfig::default();
    config.apply_entries(&entries).map_err(|e| integrity(e.to_string()))?;
    let mut model = Seq2SeqModel::new(config, 0).map_err(|e| integrity(e.to_string()))?;

    let params = model.params();
    if manifest.len() != params.len() {
        return Err(integrity(format!(
            "manifest lists {} tensors, model expects {}",
            manifest.len(),
            params.len()
        )));
    }
    for (id, (name, shape)) in params.ids().zip(&manifest) {
        if params.name(id) != name || params.value(id).shape() != shape.as_slice() {
            return Err(integrity(format!(
                "manifest entry {name} {shape:?} does not match model tensor {} {:?}",
                params.name(id),
                params.value(id).shape()
            )));
        }
    }
    let expected = params.num_scalars() * 8;
    let payload = &bytes[header_end..];
    if payload.len() != expected {
        return Err(integrity(format!(
            "payload has {} bytes, manifest needs {expected}",
            payload.len()
        )));
    }
    let mut offset = 0;
    let ids: Vec<_> = model.params().ids().collect();
    for (id, (_, shape)) in ids.into_iter().zip(manifest) {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = payload[offset..offset + n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        offset += n * 8;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(integrity("checkpoint contains non-finite values"));
        }
        model.params_mut().set_value(id, Tensor::from_vec(shape, data)?)?;
    }
    Ok(Checkpoint {
        model,
        vocab_hash,
        metadata,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes)
}
