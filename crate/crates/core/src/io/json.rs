use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::raster::write_bytes;
use crate::error::{Error, Result};

/// Reads a JSON file; malformed or mistyped content is a format error.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Pretty-printed JSON with object keys sorted and a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // `Value` objects are ordered maps, so the round trip sorts every key.
    let value = serde_json::to_value(value).map_err(|e| Error::Domain(e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| Error::Domain(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json_string(value)?.as_bytes())
}
