//! Reading and writing the on-disk artifacts.

use std::path::Path;

use balanced_aes::cipher::TraceSet;
use balanced_aes::tablegen::{EncodingSpec, TableSet, TableSetPair};

use crate::CliError;

pub const Q0_FILE: &str = "q0.tbl";
pub const Q1_FILE: &str = "q1.tbl";
pub const SPEC_FILE: &str = "spec.bin";

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn load_tables(dir: &Path) -> Result<TableSetPair, CliError> {
    let load = |name: &str| {
        let p = dir.join(name);
        TableSet::from_bytes(&read(&p)?).map_err(|e| CliError::format(&p, e))
    };
    Ok(TableSetPair {
        q0: load(Q0_FILE)?,
        q1: load(Q1_FILE)?,
    })
}

pub fn load_spec(path: &Path) -> Result<EncodingSpec, CliError> {
    EncodingSpec::from_bytes(&read(path)?).map_err(|e| CliError::format(path, e))
}

pub fn load_traces(path: &Path) -> Result<TraceSet, CliError> {
    TraceSet::from_bytes(&read(path)?).map_err(|e| match e {
        balanced_aes::Error::Format(f) => CliError::format(path, f),
        other => CliError::from(other),
    })
}
