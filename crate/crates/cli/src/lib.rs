//! Config-driven experiment runner: reads a TOML experiment file, runs the
//! requested pipelines, and writes CSV tables plus a manifest.

pub mod config;
pub mod pipeline;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use agsp_core::hamlib::Caps;
use sha2::{Digest, Sha256};

pub use config::{Config, SchemaError, TableKind};
pub use pipeline::{compute, Outputs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(#[from] SchemaError),
    #[error("cap exceeded: {0}")]
    Cap(String),
    #[error("{0}")]
    Run(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0} bound violation(s) under --strict")]
    Strict(usize),
}

impl std::error::Error for SchemaError {}

impl From<agsp_core::Error> for CliError {
    fn from(e: agsp_core::Error) -> Self {
        match e {
            agsp_core::Error::CapExceeded { .. } => CliError::Cap(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Run(_) | CliError::Io(_) | CliError::Strict(_) => 1,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub strict: bool,
    pub cap_qubits: Option<u32>,
    /// `None` runs the tables requested by the config.
    pub tables: Option<Vec<TableKind>>,
}

#[derive(Debug)]
pub struct Report {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
    pub violations: usize,
}

/// Parses, validates, computes and writes. Nothing is written unless the
/// whole computation succeeds.
pub fn execute(opts: &Options) -> Result<Report, CliError> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let text = fs::read(&opts.config).map_err(|e| CliError::Io(format!("{}: {e}", opts.config.display())))?;
    let text_str = std::str::from_utf8(&text).map_err(|_| SchemaError("config is not valid UTF-8".into()))?;
    let cfg = config::parse(text_str)?;
    let tables = match &opts.tables {
        Some(t) => t.clone(),
        None => cfg.requested_tables()?,
    };
    if tables.is_empty() {
        return Err(SchemaError("nothing to run: add a section or `run.tables`".into()).into());
    }
    cfg.validate(&tables)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let state_qubits = opts.cap_qubits.or(cfg.caps.as_ref().map(|c| c.state_qubits));
    let caps = state_qubits.map(Caps::with_state_qubits).unwrap_or_default();

    let outputs = compute(&cfg, &tables, caps, seed)?;

    let out_dir = opts.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut files = Vec::new();
    for t in &outputs.tables {
        write_file(&out_dir, &format!("{}.csv", t.name), &t.to_csv(), &mut files)?;
    }
    for s in &outputs.series {
        write_file(&out_dir, &format!("{}_plot.csv", s.name), &s.to_csv(), &mut files)?;
    }
    for (name, bytes) in &outputs.files {
        write_file(&out_dir, name, bytes, &mut files)?;
    }
    let violations = outputs.violations();
    let names: Vec<String> = files.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect();
    let manifest = [
        ("schema_version", config::SCHEMA_VERSION.to_string()),
        ("tool", format!("agsp-cli {}", env!("CARGO_PKG_VERSION"))),
        ("core", format!("agsp-core {}", agsp_core::VERSION)),
        ("config", opts.config.display().to_string()),
        ("config_sha256", hex(&Sha256::digest(&text))),
        ("seed", seed.to_string()),
        ("cap_state_qubits", caps.state_qubits.to_string()),
        ("tables", tables.iter().map(|t| t.name()).collect::<Vec<_>>().join(",")),
        ("files", names.join(",")),
        ("strict", opts.strict.to_string()),
        ("violations", violations.to_string()),
        ("started_unix", started_unix.to_string()),
        ("wall_time_s", format!("{:.3}", started.elapsed().as_secs_f64())),
    ];
    let body: String = manifest.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    write_file(&out_dir, "manifest.txt", body.as_bytes(), &mut files)?;

    if opts.strict && violations > 0 {
        return Err(CliError::Strict(violations));
    }
    Ok(Report { out_dir, files, messages: outputs.messages, violations })
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    files.push(p);
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads one CSV written by [`execute`].
pub fn read_output(dir: &Path, table: &str) -> std::io::Result<Vec<u8>> {
    fs::read(dir.join(format!("{table}.csv")))
}
