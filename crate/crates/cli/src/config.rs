//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Keys accepted in the `--config` file. Unknown keys are rejected.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub key: Option<String>,
    pub seed: Option<u64>,
    pub policy: Option<String>,
    pub source: Option<String>,
    pub count: Option<usize>,
    pub window: Option<String>,
    pub format: Option<Format>,
    pub tables: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Fields set in `flags` win over the ones already present.
    pub fn overlay(self, flags: RunConfig) -> RunConfig {
        RunConfig {
            key: flags.key.or(self.key),
            seed: flags.seed.or(self.seed),
            policy: flags.policy.or(self.policy),
            source: flags.source.or(self.source),
            count: flags.count.or(self.count),
            window: flags.window.or(self.window),
            format: flags.format.or(self.format),
            tables: flags.tables.or(self.tables),
            spec: flags.spec.or(self.spec),
            out: flags.out.or(self.out),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }

    pub fn key(&self) -> Result<Option<[u8; 16]>, CliError> {
        self.key.as_deref().map(parse_block).transpose()
    }

    pub fn require_key(&self) -> Result<[u8; 16], CliError> {
        self.key()?
            .ok_or_else(|| CliError::Usage("--key is required".into()))
    }

    pub fn tables(&self) -> Result<&Path, CliError> {
        self.tables
            .as_deref()
            .ok_or_else(|| CliError::Usage("--tables is required".into()))
    }

    /// `--spec`, defaulting to the spec file inside the tables directory.
    pub fn spec_path(&self) -> Option<PathBuf> {
        self.spec.clone().or_else(|| {
            self.tables
                .as_ref()
                .map(|t| t.join(crate::files::SPEC_FILE))
        })
    }
}

/// 32 hex digits into a block.
pub fn parse_block(s: &str) -> Result<[u8; 16], CliError> {
    let bytes =
        hex::decode(s.trim()).map_err(|e| CliError::Usage(format!("bad hex block {s:?}: {e}")))?;
    bytes
        .try_into()
        .map_err(|b: Vec<u8>| CliError::Usage(format!("expected 16 bytes of hex, got {}", b.len())))
}

/// Sample window: `OFF:LEN`, `ut:R` or `round:R` (rounds counted from 1),
/// or `all`.
pub fn parse_window(s: Option<&str>) -> Result<Vec<usize>, CliError> {
    use balanced_aes::cipher::layout;
    use balanced_aes::tablegen::ENCODED_ROUNDS;

    let bad = || {
        CliError::Usage(format!(
            "bad window {:?}; expected OFF:LEN, ut:R, round:R or all",
            s.unwrap_or("")
        ))
    };
    let round = |r: &str| -> Result<usize, CliError> {
        match r.parse::<usize>() {
            Ok(r) if (1..=ENCODED_ROUNDS).contains(&r) => Ok(r - 1),
            _ => Err(bad()),
        }
    };
    let Some(s) = s else {
        return Ok((0..layout::SAMPLES).collect());
    };
    match s.split_once(':') {
        None if s == "all" => Ok((0..layout::SAMPLES).collect()),
        Some(("ut", r)) => Ok(layout::round_ut(round(r)?)),
        Some(("round", r)) => Ok(layout::round(round(r)?)),
        Some((off, len)) => {
            let off: usize = off.parse().map_err(|_| bad())?;
            let len: usize = len.parse().map_err(|_| bad())?;
            if len == 0 || off + len > layout::SAMPLES {
                return Err(CliError::Usage(format!(
                    "window {off}:{len} outside the {} samples of a trace",
                    layout::SAMPLES
                )));
            }
            Ok((off..off + len).collect())
        }
        None => Err(bad()),
    }
}
