//! `manifest.json`: what was run, from which inputs, and how it ended.
//!
//! No timestamps or host details, so identical runs give identical files.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Seeds};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn digest(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(InputFile {
            path: path.to_path_buf(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Convergence {
    pub scenarios: usize,
    pub converged: usize,
    /// Indices of scenarios (firms, for single-firm sweeps) that hit an
    /// iteration cap.
    pub not_converged: Vec<usize>,
}

impl Convergence {
    pub fn from_flags(flags: impl IntoIterator<Item = bool>) -> Self {
        let mut c = Convergence::default();
        for (s, ok) in flags.into_iter().enumerate() {
            c.scenarios += 1;
            if ok {
                c.converged += 1;
            } else {
                c.not_converged.push(s);
            }
        }
        c
    }

    pub fn all(&self) -> bool {
        self.not_converged.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Invalid,
    NotConverged,
    Failed,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub engine_version: &'static str,
    pub command: &'a str,
    pub status: Status,
    /// Set when the run stopped early; `outputs` then lists what was
    /// written before the failure.
    pub partial: bool,
    pub error: Option<String>,
    pub parallel: bool,
    pub seeds: Seeds,
    pub config: &'a RunConfig,
    pub inputs: &'a [InputFile],
    pub outputs: &'a [String],
    pub convergence: Option<&'a Convergence>,
}

impl Manifest<'_> {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST);
        let mut body = serde_json::to_string_pretty(self)?;
        body.push('\n');
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    }
}
