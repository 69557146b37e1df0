//! Versioned JSON documents for instances, solutions and clinic configs.
//!
//! Every document is an object `{"format": ..., "version": 1, "data": ...}`.
//! Paths ending in `.gz` are read and written gzip-compressed.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::Instance;
use crate::error::FormatError;
use crate::generator::ClinicConfig;
use crate::solution::Solution;

pub const FORMAT_VERSION: u32 = 1;
pub const INSTANCE_FORMAT: &str = "rtsched-instance";
pub const SOLUTION_FORMAT: &str = "rtsched-solution";
pub const CONFIG_FORMAT: &str = "rtsched-clinic-config";

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    format: &'static str,
    version: u32,
    data: &'a T,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    data: T,
}

fn parse_error(path: &str, e: serde_json::Error) -> FormatError {
    FormatError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn encode<T: Serialize>(format: &'static str, value: &T) -> String {
    let env = EnvelopeOut {
        format,
        version: FORMAT_VERSION,
        data: value,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("documents serialize");
    s.push('\n');
    s
}

fn decode<T: DeserializeOwned>(format: &'static str, text: &str, path: &str) -> Result<T, FormatError> {
    let header: Header = serde_json::from_str(text).map_err(|e| parse_error(path, e))?;
    if header.format != format || header.version != FORMAT_VERSION {
        return Err(FormatError::Version {
            path: path.to_string(),
            expected: format,
            expected_version: FORMAT_VERSION,
            found: header.format,
            found_version: header.version,
        });
    }
    let env: EnvelopeIn<T> = serde_json::from_str(text).map_err(|e| parse_error(path, e))?;
    Ok(env.data)
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn read_text(path: &Path) -> Result<String, FormatError> {
    let io = |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io)?;
    let mut text = String::new();
    if is_gz(path) {
        GzDecoder::new(file).read_to_string(&mut text).map_err(io)?;
    } else {
        let mut file = file;
        file.read_to_string(&mut text).map_err(io)?;
    }
    Ok(text)
}

fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    let io = |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(text.as_bytes()).map_err(io)?;
        enc.finish().map_err(io)?;
    } else {
        let mut file = file;
        file.write_all(text.as_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn instance_to_string(inst: &Instance) -> String {
    encode(INSTANCE_FORMAT, inst)
}

pub fn instance_from_str(text: &str, label: &str) -> Result<Instance, FormatError> {
    decode(INSTANCE_FORMAT, text, label)
}

pub fn solution_to_string(sol: &Solution) -> String {
    encode(SOLUTION_FORMAT, sol)
}

pub fn solution_from_str(text: &str, label: &str) -> Result<Solution, FormatError> {
    decode(SOLUTION_FORMAT, text, label)
}

pub fn config_to_string(cfg: &ClinicConfig) -> String {
    encode(CONFIG_FORMAT, cfg)
}

pub fn config_from_str(text: &str, label: &str) -> Result<ClinicConfig, FormatError> {
    let cfg: ClinicConfig = decode(CONFIG_FORMAT, text, label)?;
    cfg.validate().map_err(|source| FormatError::Domain {
        path: label.to_string(),
        source,
    })?;
    Ok(cfg)
}

pub fn save_instance(path: impl AsRef<Path>, inst: &Instance) -> Result<(), FormatError> {
    write_text(path.as_ref(), &instance_to_string(inst))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, FormatError> {
    let path = path.as_ref();
    instance_from_str(&read_text(path)?, &path.display().to_string())
}

pub fn save_solution(path: impl AsRef<Path>, sol: &Solution) -> Result<(), FormatError> {
    write_text(path.as_ref(), &solution_to_string(sol))
}

pub fn load_solution(path: impl AsRef<Path>) -> Result<Solution, FormatError> {
    let path = path.as_ref();
    solution_from_str(&read_text(path)?, &path.display().to_string())
}

pub fn save_config(path: impl AsRef<Path>, cfg: &ClinicConfig) -> Result<(), FormatError> {
    write_text(path.as_ref(), &config_to_string(cfg))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ClinicConfig, FormatError> {
    let path = path.as_ref();
    config_from_str(&read_text(path)?, &path.display().to_string())
}
