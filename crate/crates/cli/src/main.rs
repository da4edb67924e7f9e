//! `baes`: generate protected tables, encrypt, record trace campaigns and
//! run the leakage analyses.
//!
//! Exit codes: 0 success or pass, 1 a declared expectation failed, 2 usage,
//! 3 I/O or file format.

mod analyze;
mod config;
mod files;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use balanced_aes::cipher::{self, collect_traces_seeded, PlaintextSource, SelectorPolicy};
use balanced_aes::gf::reference_encrypt;
use balanced_aes::tablegen::{build_pair, build_q1, size_and_lookup_report, verify_tableset};
use balanced_aes::FormatError;
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use config::{Format, RunConfig};
use report::Report;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, source: FormatError) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 3,
        }
    }
}

impl From<balanced_aes::Error> for CliError {
    fn from(e: balanced_aes::Error) -> Self {
        use balanced_aes::Error as E;
        match e {
            E::InvalidPolicy(_) | E::InvalidCoefficient(_) => CliError::Usage(e.to_string()),
            E::Io(source) => CliError::Io {
                path: PathBuf::from("<input>"),
                source,
            },
            E::Format(source) => CliError::Format {
                path: PathBuf::from("<input>"),
                source,
            },
            E::LayoutMismatch(_) | E::IncompleteGrid(_) | E::Unobserved(_) => {
                CliError::Usage(e.to_string())
            }
            E::NoValidG { .. } | E::GenerationFailed { .. } => CliError::Failed(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "baes",
    version,
    about = "Balanced table-based AES-128: tables, traces and leakage analysis"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; they may also come from `--config`.
#[derive(Args, Debug, Default)]
struct Common {
    /// TOML file with any of the flags below; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// AES key, 32 hex digits.
    #[arg(long, global = true)]
    key: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory holding q0.tbl, q1.tbl and spec.bin.
    #[arg(long, global = true)]
    tables: Option<PathBuf>,
    /// Encoding spec file (defaults to spec.bin in --tables).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// q0 | q1 | random[:ALPHA] | pt-derived:N[:ALPHA]
    #[arg(long, global = true)]
    policy: Option<String>,
    /// random | fixed:HEX | grid
    #[arg(long, global = true)]
    source: Option<String>,
    #[arg(long, global = true)]
    count: Option<usize>,
    /// OFF:LEN | ut:R | round:R | all
    #[arg(long, global = true)]
    window: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output directory (gen, analyze) or file (trace).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let flags = RunConfig {
            key: self.key,
            seed: self.seed,
            policy: self.policy,
            source: self.source,
            count: self.count,
            window: self.window,
            format: self.format,
            tables: self.tables,
            spec: self.spec,
            out: self.out,
        };
        Ok(match self.config {
            Some(p) => RunConfig::load(&p)?.overlay(flags),
            None => flags,
        })
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and verify a table pair; writes q0.tbl, q1.tbl and spec.bin.
    Gen,
    /// Encrypt one block and print the ciphertext in hex.
    Encrypt {
        /// Plaintext, 32 hex digits.
        #[arg(long)]
        pt: String,
    },
    /// Record a trace campaign into the file given by --out.
    Trace,
    /// Run one analysis on tables or traces.
    Analyze(analyze::AnalyzeArgs),
    /// Re-run the balance and functional checks on a table directory.
    Verify,
    /// Time single-block encryption.
    Bench {
        #[arg(long, default_value_t = 100_000)]
        iterations: usize,
    },
}

fn policy(cfg: &RunConfig, default: &str) -> Result<SelectorPolicy, CliError> {
    Ok(SelectorPolicy::parse(
        cfg.policy.as_deref().unwrap_or(default),
        cfg.seed(),
    )?)
}

fn cmd_gen(cfg: &RunConfig) -> Result<Report, CliError> {
    let key = cfg.require_key()?;
    let dir = cfg
        .out
        .clone()
        .or_else(|| cfg.tables.clone())
        .ok_or_else(|| CliError::Usage("gen needs --out DIR".into()))?;
    let (pair, spec) = build_pair(key, cfg.seed())?;
    files::write(&dir.join(files::Q0_FILE), &pair.q0.to_bytes())?;
    files::write(&dir.join(files::Q1_FILE), &pair.q1.to_bytes())?;
    files::write(&dir.join(files::SPEC_FILE), &spec.to_bytes())?;
    let verify = verify_tableset(&pair.q0, &spec);
    let pass = verify.passed();
    Ok(Report::new(
        "gen",
        cfg.seed(),
        json!({
            "directory": dir,
            "sizes": size_and_lookup_report(&pair.q0),
            "verify": verify,
        }),
    )?
    .with_pass(pass))
}

fn cmd_encrypt(cfg: &RunConfig, pt: &str) -> Result<(), CliError> {
    let pt = config::parse_block(pt)?;
    let pair = files::load_tables(cfg.tables()?)?;
    let policy = policy(cfg, "random:0.5")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let e = cipher::encrypt(&pt, &pair, &policy, &mut rng, false);
    println!("{}", hex::encode(e.ciphertext));
    Ok(())
}

fn cmd_trace(cfg: &RunConfig) -> Result<Report, CliError> {
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("trace needs --out FILE".into()))?;
    let pair = files::load_tables(cfg.tables()?)?;
    let policy = policy(cfg, "random:0.5")?;
    let source: PlaintextSource = cfg.source.as_deref().unwrap_or("random").parse()?;
    let count = cfg.count.unwrap_or(1000);
    let start = Instant::now();
    let set = collect_traces_seeded(&pair, &policy, &source, count, cfg.seed());
    let elapsed = start.elapsed().as_secs_f64();
    files::write(&out, &set.to_bytes()?)?;
    let q1 = set.set_bits.iter().filter(|&&b| b == 1).count();
    Report::new(
        "trace",
        cfg.seed(),
        json!({
            "file": out,
            "traces": set.len(),
            "samples_per_trace": set.sample_count(),
            "q1_traces": q1,
            "meta": set.meta,
            "seconds": elapsed,
        }),
    )
}

fn cmd_verify(cfg: &RunConfig) -> Result<Report, CliError> {
    let dir = cfg.tables()?;
    let pair = files::load_tables(dir)?;
    let spec_path = cfg.spec_path().expect("tables given");
    let spec = files::load_spec(&spec_path)?;
    let q0 = verify_tableset(&pair.q0, &spec);
    let twin = build_q1(&pair.q0) == pair.q1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let q1_functional = (0..256).all(|_| {
        let pt: [u8; 16] = rng.gen();
        cipher::encrypt_with_tables(&pair.q1, &pt) == reference_encrypt(&pt, &spec.key)
    });
    let pass = q0.passed() && twin && q1_functional;
    Ok(Report::new(
        "verify",
        cfg.seed(),
        json!({
            "q0": q0,
            "q1_is_complement_twin": twin,
            "q1_functional": q1_functional,
        }),
    )?
    .with_pass(pass))
}

fn cmd_bench(cfg: &RunConfig, iterations: usize) -> Result<Report, CliError> {
    let pair = files::load_tables(cfg.tables()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let pts: Vec<[u8; 16]> = (0..iterations.clamp(1, 1 << 16))
        .map(|_| rng.gen())
        .collect();
    let iterations = iterations.max(1);
    let mut time = |policy: &SelectorPolicy| {
        let mut acc = 0u8;
        let start = Instant::now();
        for n in 0..iterations {
            acc ^=
                cipher::encrypt(&pts[n % pts.len()], &pair, policy, &mut rng, false).ciphertext[0];
        }
        std::hint::black_box(acc);
        start.elapsed().as_secs_f64() * 1e6 / iterations as f64
    };
    let q0 = time(&SelectorPolicy::FixedQ0);
    let q1 = time(&SelectorPolicy::FixedQ1);
    let mixed_policy = policy(cfg, "random:0.5")?;
    let mixed = time(&mixed_policy);
    let lookups = size_and_lookup_report(&pair.q0).total_lookups as f64;
    Report::new(
        "bench",
        cfg.seed(),
        json!({
            "iterations": iterations,
            "mean_us": {"q0": q0, "q1": q1, mixed_policy.to_string(): mixed},
            "lookups_per_block": lookups,
            "lookups_per_second_q0": lookups / q0 * 1e6,
            "q1_vs_q0": q1 / q0,
            "reference_point_us": 19.0,
            "note": "reference single-block latency measured on other hardware; informational only",
        }),
    )
}

fn run(cli: Cli) -> Result<Option<bool>, CliError> {
    let cfg = cli.common.resolve()?;
    let report = match cli.command {
        Command::Gen => cmd_gen(&cfg)?,
        Command::Encrypt { pt } => {
            cmd_encrypt(&cfg, &pt)?;
            return Ok(None);
        }
        Command::Trace => cmd_trace(&cfg)?,
        Command::Analyze(args) => analyze::run(&cfg, &args)?,
        Command::Verify => cmd_verify(&cfg)?,
        Command::Bench { iterations } => cmd_bench(&cfg, iterations)?,
    };
    // The trace command's --out names the trace file, not a report directory.
    let out = match report.name.as_str() {
        "trace" | "gen" => None,
        _ => cfg.out.as_deref(),
    };
    report.emit(out, cfg.format())?;
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(Some(false)) => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("baes: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
