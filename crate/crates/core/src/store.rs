//! Versioned JSON persistence for fitted models.
//!
//! Floats are written with round-trip precision, so a reloaded model gives
//! bit-identical outputs.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FORMAT: &str = "dynqoi-model";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    payload: T,
}

pub fn save<T: Serialize>(path: impl AsRef<Path>, kind: &str, payload: &T) -> Result<()> {
    let env = Envelope {
        format: FORMAT.to_string(),
        version: VERSION,
        kind: kind.to_string(),
        payload,
    };
    let f = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    serde_json::to_writer(f, &env)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<T> {
    let path = path.as_ref();
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let env: Envelope<T> = serde_json::from_reader(f)?;
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    if env.format != FORMAT {
        return Err(bad(format!("unknown format {:?}", env.format)));
    }
    if env.version != VERSION {
        return Err(bad(format!("unsupported version {}", env.version)));
    }
    if env.kind != kind {
        return Err(bad(format!("expected a {kind:?} payload, found {:?}", env.kind)));
    }
    Ok(env.payload)
}
