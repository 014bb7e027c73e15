//! Model checkpoints: a fixed binary layout with an 8-byte magic, a
//! little-endian u32 header carrying the architecture, then the parameters
//! as little-endian f32 values in storage order.

use crate::model::{ModelConfig, RefinerModel};
use crate::FlowError;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"SVXFLOW1";
const VERSION: u32 = 1;

pub fn save_model(model: &RefinerModel, path: impl AsRef<Path>) -> Result<(), FlowError> {
    let mut out = Vec::with_capacity(8 + 7 * 4 + model.params.len() * 4);
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        model.config.fine_resolution,
        model.config.coarse_resolution,
        model.config.hidden as u32,
        model.config.time_features as u32,
        model.config.image_cond_dim as u32,
        model.params.len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &p in &model.params {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RefinerModel, FlowError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 8 + 7 * 4 {
        return Err(FlowError::BadCheckpoint("file too short".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(FlowError::BadCheckpoint(format!(
            "bad magic {:?}",
            &bytes[..8]
        )));
    }
    let mut at = 8;
    let mut next_u32 = || {
        let v = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        at += 4;
        v
    };
    let version = next_u32();
    if version != VERSION {
        return Err(FlowError::BadCheckpoint(format!(
            "unsupported version {version}"
        )));
    }
    let config = ModelConfig {
        fine_resolution: next_u32(),
        coarse_resolution: next_u32(),
        hidden: next_u32() as usize,
        time_features: next_u32() as usize,
        image_cond_dim: next_u32() as usize,
    };
    let count = next_u32() as usize;
    let mut model = RefinerModel::zeroed(config);
    if model.params.len() != count {
        return Err(FlowError::BadCheckpoint(format!(
            "parameter count {count} does not match architecture ({} expected)",
            model.params.len()
        )));
    }
    let expected_len = at + 4 * count;
    if bytes.len() != expected_len {
        return Err(FlowError::BadCheckpoint(format!(
            "expected {expected_len} bytes, file has {}",
            bytes.len()
        )));
    }
    for p in model.params.iter_mut() {
        *p = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as f64;
        at += 4;
    }
    Ok(model)
}
