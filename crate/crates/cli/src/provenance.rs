use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliResult;

/// Metadata stamped on every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub tolerances: Vec<(String, f64)>,
}

impl Provenance {
    pub fn new(subcommand: &str, config: &ExperimentConfig) -> CliResult<Self> {
        Ok(Provenance {
            tool: format!("kac-lab {}", env!("CARGO_PKG_VERSION")),
            subcommand: subcommand.to_string(),
            config_hash: config_hash(subcommand, config)?,
            seed: config.seed(),
            tolerances: Vec::new(),
        })
    }

    pub fn tolerance(&mut self, name: &str, value: f64) {
        self.tolerances.push((name.to_string(), value));
    }

    fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("tool: {}", self.tool),
            format!("subcommand: {}", self.subcommand),
            format!("config_sha256: {}", self.config_hash),
            format!("seed: {}", self.seed),
        ];
        out.extend(self.tolerances.iter().map(|(k, v)| format!("tolerance {k}: {v:e}")));
        out
    }
}

/// SHA-256 of the subcommand and the config's canonical JSON, without the
/// output directory.
pub fn config_hash(subcommand: &str, config: &ExperimentConfig) -> CliResult<String> {
    let mut c = config.clone();
    c.out_dir = None;
    let bytes = serde_json::to_vec(&(subcommand, &c))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes artifacts into one output directory and records their names.
pub struct ArtifactWriter {
    dir: PathBuf,
    pub provenance: Provenance,
    pub written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, provenance: Provenance) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            provenance,
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, contents: String) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    /// CSV of serializable rows behind `# ` provenance lines.
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> CliResult<()> {
        let mut body = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut body);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        let mut text: String = self.provenance.lines().iter().map(|l| format!("# {l}\n")).collect();
        text.push_str(&String::from_utf8_lossy(&body));
        self.put(name, text)
    }

    /// Pretty JSON object with a `provenance` field next to `payload`.
    pub fn json<T: Serialize>(&mut self, name: &str, payload: &T) -> CliResult<()> {
        let doc = serde_json::json!({ "provenance": self.provenance, "result": payload });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.put(name, text)
    }

    pub fn svg(&mut self, name: &str, svg: String) -> CliResult<()> {
        let header: String = self.provenance.lines().iter().map(|l| format!("  {l}\n")).collect();
        let text = svg.replacen("<svg ", &format!("<!--\n{header}-->\n<svg "), 1);
        self.put(name, text)
    }
}
