use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("MixColumns coefficient must be 1, 2 or 3, got {0}")]
    InvalidCoefficient(u8),

    #[error("no valid g row {row} exists for the given f")]
    NoValidG { row: usize },

    #[error("table generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: u32, reason: String },

    #[error("invalid selector policy: {0}")]
    InvalidPolicy(String),

    #[error("trace layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("grid coverage incomplete: {0}")]
    IncompleteGrid(String),

    #[error("input byte value {0:#04x} never observed")]
    Unobserved(u8),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures while decoding one of the binary file formats.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated input: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("invalid field: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
