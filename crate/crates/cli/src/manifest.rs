//! Run manifests: every output file gets a `<name>.manifest.json` sidecar
//! recording the command, resolved configuration, input and output
//! digests, seed, tool version, and timing, so any artifact can be traced
//! and re-run exactly.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use ttcast_core::Error;

pub const MANIFEST_FORMAT: &str = "ttcast-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format: &'static str,
    pub version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix_ms: u64,
    pub elapsed_ms: u64,
}

/// Collects everything known before and during a command run, then writes
/// the manifest next to the primary output.
pub struct RunRecorder {
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started_unix_ms: u64,
    started: Instant,
}

impl RunRecorder {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        RunRecorder {
            command: command.to_string(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms,
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Digests all recorded files and writes `<primary>.manifest.json`.
    /// Inputs are hashed here, after the run; commands read inputs once
    /// and do not rewrite them.
    pub fn finish(self, primary_out: &Path) -> Result<PathBuf, Error> {
        let manifest = RunManifest {
            format: MANIFEST_FORMAT,
            version: MANIFEST_VERSION,
            tool: "ttcast",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            argv: std::env::args().collect(),
            config: self.config,
            seed: self.seed,
            inputs: digest_all(&self.inputs)?,
            outputs: digest_all(&self.outputs)?,
            started_unix_ms: self.started_unix_ms,
            elapsed_ms: self.started.elapsed().as_millis() as u64,
        };
        let path = manifest_path(primary_out);
        let mut json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Validation(format!("manifest not serializable: {e}")))?;
        json.push('\n');
        fs::write(&path, json).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        Ok(path)
    }
}

/// `matrix.csv` maps to `matrix.csv.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn digest_all(paths: &[PathBuf]) -> Result<Vec<FileDigest>, Error> {
    paths.iter().map(|p| digest_file(p)).collect()
}

pub fn digest_file(path: &Path) -> Result<FileDigest, Error> {
    let file = fs::File::open(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    let mut reader = std::io::BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut bytes: u64 = 0;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: format!("{:x}", hasher.finalize()),
        bytes,
    })
}
