//! Versioned model checkpoint.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "DSCNNCK\0"
//! version      u32       1
//! header_len   u32       byte length of the header block
//! header       UTF-8     key=value lines: network config plus `seed`
//! blocks       f32 LE    per layer: weights then biases, in layer order
//! ```
//!
//! A sidecar `<checkpoint>.shapes.txt` lists every block name with its shape.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::network::Params;
use super::{CnnError, NetworkConfig, Tensor};
use crate::cnn::network::Layer;

pub const MAGIC: &[u8; 8] = b"DSCNNCK\0";
pub const VERSION: u32 = 1;

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".shapes.txt");
    PathBuf::from(s)
}

pub fn encode_checkpoint(cfg: &NetworkConfig, params: &Params<f32>) -> Vec<u8> {
    let mut header = String::new();
    for (k, v) in cfg.to_key_values() {
        header.push_str(&format!("{k}={v}\n"));
    }
    header.push_str(&format!("seed={}\n", params.seed));
    let mut out = Vec::with_capacity(16 + header.len() + 4 * params.count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for block in params.blocks() {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn shapes_listing(cfg: &NetworkConfig) -> Result<String, CnnError> {
    let mut s = String::new();
    for (name, (dims, nb)) in cfg.layer_names().iter().zip(cfg.layer_shapes()?) {
        let d: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
        s.push_str(&format!("{name}.weight {}\n{name}.bias {nb}\n", d.join(" ")));
    }
    Ok(s)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(NetworkConfig, Params<f32>), CnnError> {
    let bad = |m: &str| CnnError::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing checkpoint magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(CnnError::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let header = bytes
        .get(16..16 + hlen)
        .ok_or_else(|| bad("truncated header"))
        .and_then(|h| std::str::from_utf8(h).map_err(|_| bad("header is not UTF-8")))?;
    let mut seed = 0u64;
    let mut pairs = Vec::new();
    for line in header.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad("header line without `=`"))?;
        if k == "seed" {
            seed = v.parse().map_err(|_| bad("bad seed"))?;
        } else {
            pairs.push((k, v));
        }
    }
    let cfg = NetworkConfig::from_key_values(pairs)?;
    let shapes = cfg.layer_shapes()?;
    let total: usize = shapes.iter().map(|(d, nb)| d.iter().product::<usize>() + nb).sum();
    let body = &bytes[16 + hlen..];
    if body.len() != 4 * total {
        return Err(CnnError::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            4 * total,
            body.len()
        )));
    }
    let mut floats = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    let mut take = |n: usize| -> Vec<f32> { floats.by_ref().take(n).collect() };
    let layers = shapes
        .iter()
        .map(|(dims, nb)| {
            let w = take(dims.iter().product());
            Layer {
                weight: Tensor::from_vec(dims, w).expect("sized from dims"),
                bias: take(*nb),
            }
        })
        .collect();
    let params = Params { layers, seed };
    if !params.is_finite() {
        return Err(bad("non-finite parameter"));
    }
    Ok((cfg, params))
}

pub fn save_checkpoint(path: &Path, cfg: &NetworkConfig, params: &Params<f32>) -> Result<(), CnnError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, encode_checkpoint(cfg, params))?;
    fs::write(sidecar_path(path), shapes_listing(cfg)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(NetworkConfig, Params<f32>), CnnError> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CnnError::Checkpoint(format!("no checkpoint at {}", path.display())),
        _ => CnnError::Io(e),
    })?;
    decode_checkpoint(&bytes)
}
