//! Versioned JSON model files.
//!
//! Every file is `{"format": <kind>, "version": <n>, "model": {...}}`. Models
//! carry the vocabulary hash of the nutrient table they were trained on, and
//! loading against a different table fails with [`Error::Incompatible`].

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T> {
    format: &'a str,
    version: u32,
    model: &'a T,
}

#[derive(Deserialize)]
struct OwnedEnvelope<T> {
    format: String,
    version: u32,
    model: T,
}

pub fn to_bytes<T: Serialize>(kind: &str, model: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec(&Envelope { format: kind, version: FORMAT_VERSION, model })?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn from_bytes<T: DeserializeOwned>(kind: &str, bytes: &[u8]) -> Result<T> {
    let env: OwnedEnvelope<T> = serde_json::from_slice(bytes)?;
    if env.format != kind {
        return Err(Error::Incompatible(format!("expected a `{kind}` file, found `{}`", env.format)));
    }
    if env.version != FORMAT_VERSION {
        return Err(Error::Incompatible(format!(
            "`{kind}` file version {} is not supported (expected {FORMAT_VERSION})",
            env.version
        )));
    }
    Ok(env.model)
}

pub fn save<T: Serialize>(path: impl AsRef<Path>, kind: &str, model: &T) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, to_bytes(kind, model)?).map_err(|e| Error::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<T> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(kind, &bytes)
}

pub fn check_vocab(kind: &str, model_hash: &str, expected: &str) -> Result<()> {
    if model_hash != expected {
        return Err(Error::Incompatible(format!(
            "{kind} model was trained on vocabulary {model_hash}, current vocabulary is {expected}"
        )));
    }
    Ok(())
}
