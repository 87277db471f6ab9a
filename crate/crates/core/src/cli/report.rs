//! Versioned JSON report envelope, stable float formatting and atomic writes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    /// File name without directories.
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub inputs: Vec<InputDigest>,
    pub config: Value,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub kind: String,
    pub tool_version: String,
    pub provenance: Provenance,
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(kind: &str, provenance: Provenance, body: T) -> Self {
        Envelope {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            provenance,
            body,
        }
    }
}

/// Pretty JSON whose floats carry 17 significant digits.
struct StableFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for StableFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn end_object_key<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_key(writer)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn to_stable_json<T: Serialize>(value: &T) -> Result<Vec<u8>, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, StableFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::io(path, e);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::io(path, io::Error::new(io::ErrorKind::InvalidInput, "not a file path")))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}

pub fn write_report<T: Serialize>(path: &Path, envelope: &Envelope<T>) -> Result<(), CliError> {
    let bytes = to_stable_json(envelope).map_err(|e| CliError::json(path, e))?;
    write_atomic(path, &bytes)
}

pub fn digest(path: &Path, bytes: &[u8]) -> InputDigest {
    InputDigest {
        name: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: hex::encode(Sha256::digest(bytes)),
    }
}

/// Reads an envelope, checking its schema version and kind.
pub fn read_report<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<(Envelope<T>, Vec<u8>), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let raw: Envelope<Value> = serde_json::from_slice(&bytes).map_err(|e| CliError::json(path, e))?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(CliError::Report {
            path: path.display().to_string(),
            reason: format!("schema version {} (expected {SCHEMA_VERSION})", raw.schema_version),
        });
    }
    if raw.kind != kind {
        return Err(CliError::Report {
            path: path.display().to_string(),
            reason: format!("report kind {:?} (expected {kind:?})", raw.kind),
        });
    }
    let body: T = serde_json::from_value(raw.body).map_err(|e| CliError::json(path, e))?;
    Ok((
        Envelope {
            schema_version: raw.schema_version,
            kind: raw.kind,
            tool_version: raw.tool_version,
            provenance: raw.provenance,
            body,
        },
        bytes,
    ))
}
