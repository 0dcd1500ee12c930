//! Output directory handling. Every file carries the digest of the resolved
//! configuration: CSV files on a leading `# config-digest:` line, JSON
//! documents in a `config_digest` field.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

pub const CONFIG_FILE: &str = "run_config.toml";

pub struct OutputDir {
    dir: PathBuf,
    digest: String,
}

impl OutputDir {
    /// Creates `dir` and writes the resolved config into it. An existing
    /// config with a different digest is an error.
    pub fn open(dir: &Path, config: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        let digest = config.digest()?;
        let path = dir.join(CONFIG_FILE);
        if path.exists() {
            let previous = RunConfig::load(&path)?.digest()?;
            if previous != digest {
                bail!(
                    "config digest mismatch in {}: existing run has {previous}, this run has {digest}; use a fresh output directory",
                    dir.display()
                );
            }
        }
        fs::write(&path, format!("# config-digest: {digest}\n{}", config.to_toml()?))
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(Self { dir: dir.to_path_buf(), digest })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes a CSV body (header included) behind the digest line.
    pub fn write_csv_bytes(&self, name: &str, body: &[u8]) -> Result<()> {
        let mut out = format!("# config-digest: {}\n", self.digest).into_bytes();
        out.extend_from_slice(body);
        self.write(name, &out)
    }

    pub fn write_csv<S: Serialize>(&self, name: &str, rows: &[S]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        self.write_csv_bytes(name, &w.into_inner()?)
    }

    /// Pretty JSON with a `config_digest` field added at the top level.
    pub fn write_json<S: Serialize>(&self, name: &str, doc: &S) -> Result<()> {
        let mut map = serde_json::Map::new();
        map.insert("config_digest".into(), self.digest.clone().into());
        match serde_json::to_value(doc)? {
            serde_json::Value::Object(fields) => map.extend(fields),
            other => {
                map.insert("result".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(map))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}
