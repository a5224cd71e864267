//! Newline-delimited record files with a version header line.
//!
//! Every artifact starts with one header object:
//! `{"format": ..., "tool_version": ..., "config_hash": ..., ...extra}`
//! followed by one JSON record per line.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{Error, Result, TOOL_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub tool_version: String,
    pub config_hash: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Header {
    pub fn new(format: &str, config_hash: &str) -> Self {
        Self {
            format: format.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            extra: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.extra.insert(
            key.to_string(),
            serde_json::to_value(value).expect("header values serialize"),
        );
        self
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        self.extra
            .get(key)
            .and_then(|v| serde_json::from_value(v.clone()).ok())
    }
}

pub fn write<T: Serialize>(path: &Path, header: &Header, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    to_writer(&mut out, header, records)?;
    out.flush()?;
    Ok(())
}

pub fn to_writer<W: Write, T: Serialize>(out: &mut W, header: &Header, records: &[T]) -> Result<()> {
    serde_json::to_writer(&mut *out, header)?;
    out.write_all(b"\n")?;
    for record in records {
        serde_json::to_writer(&mut *out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read<T: DeserializeOwned>(path: &Path, expected_format: &str) -> Result<(Header, Vec<T>)> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().transpose()?.ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        detail: "empty file".into(),
    })?;
    let header: Header = serde_json::from_str(&first).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        detail: format!("bad header: {e}"),
    })?;
    if header.format != expected_format {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("expected {expected_format}, found {}", header.format),
        });
    }
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: format!("line {}: {e}", n + 2),
        })?);
    }
    Ok((header, records))
}
