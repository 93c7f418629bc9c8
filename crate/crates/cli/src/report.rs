use std::fs;
use std::path::{Path, PathBuf};

use chronicity::Error;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::{Context, Failure};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Reads input files, remembering a digest of each for the report.
#[derive(Debug, Default)]
pub struct Inputs {
    digests: Vec<InputDigest>,
}

impl Inputs {
    pub fn new(ctx: &Context) -> Result<Inputs, Failure> {
        let mut inputs = Inputs::default();
        if let Some(path) = &ctx.config_path {
            inputs.read(path)?;
        }
        Ok(inputs)
    }

    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, Failure> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let shown = path.display().to_string();
        if !self.digests.iter().any(|d| d.path == shown) {
            let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
            self.digests.push(InputDigest { path: shown, sha256 });
        }
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String, Failure> {
        String::from_utf8(self.read(path)?)
            .map_err(|_| Failure::input(format!("{}: not valid UTF-8", path.display())))
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Result<T, Failure> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }

    pub fn digests(&self) -> &[InputDigest] {
        &self.digests
    }
}

/// Provenance envelope around every JSON result.
#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub inputs: &'a [InputDigest],
    pub result: T,
}

pub fn envelope<'a, T: Serialize>(command: &'a str, ctx: &'a Context, inputs: &'a Inputs, result: T) -> Report<'a, T> {
    Report {
        tool: "chronicity",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: ctx.config.seed,
        config: &ctx.config,
        inputs: inputs.digests(),
        result,
    }
}

/// Files to be written once the whole computation has succeeded.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, path: PathBuf, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
        bytes.push(b'\n');
        self.add(path, bytes);
    }

    pub fn commit(self) -> Result<(), Failure> {
        for (path, bytes) in self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
