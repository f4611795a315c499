//! Rankings, figure export and the output tree with its manifest.

pub mod figures;
pub mod ranking;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use figures::{box_stats, figure_data, FigureData, FigureKind};
pub use ranking::{rank_models, read_summary_table, RankingTable};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("completeness error: {0}")]
    Completeness(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Provenance stamped on every output file. Deliberately free of
/// timestamps so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seeds: Vec<u64>,
    pub bootstrap: bool,
    pub rng: String,
    pub template_hash: String,
    pub data_sha256: String,
}

impl Provenance {
    pub fn header_line(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "{} {} | seeds={} | bootstrap={} | rng={} | template={} | data={}",
            self.tool,
            self.version,
            seeds.join(","),
            if self.bootstrap { "on" } else { "off" },
            self.rng,
            self.template_hash,
            self.data_sha256
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    generated_at: String,
    #[serde(flatten)]
    provenance: &'a Provenance,
    command: &'a str,
    files: &'a [FileEntry],
}

/// Writes files under one root and remembers them for `manifest.json`.
#[derive(Debug)]
pub struct OutputTree {
    pub root: PathBuf,
    pub provenance: Provenance,
    files: Vec<FileEntry>,
}

impl OutputTree {
    pub fn new(root: impl Into<PathBuf>, provenance: Provenance) -> Self {
        OutputTree {
            root: root.into(),
            provenance,
            files: Vec::new(),
        }
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
        move |source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Writes `content` verbatim.
    pub fn write_raw(&mut self, rel: &str, content: &str) -> Result<PathBuf, ReportError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(Self::io(dir))?;
        }
        fs::write(&path, content).map_err(Self::io(&path))?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: sha256_hex(content.as_bytes()),
        });
        Ok(path)
    }

    /// Writes a CSV with the provenance as a leading `#` line.
    pub fn write_csv(&mut self, rel: &str, body: &str) -> Result<PathBuf, ReportError> {
        let text = format!("# {}\n{body}", self.provenance.header_line());
        self.write_raw(rel, &text)
    }

    pub fn write_svg(&mut self, rel: &str, svg: &str) -> Result<PathBuf, ReportError> {
        let text = format!("<!-- {} -->\n{svg}", self.provenance.header_line());
        self.write_raw(rel, &text)
    }

    /// Writes `{"provenance": ..., "data": ...}`.
    pub fn write_json<T: Serialize>(&mut self, rel: &str, data: &T) -> Result<PathBuf, ReportError> {
        let v = serde_json::json!({ "provenance": self.provenance.header_line(), "data": data });
        let text = serde_json::to_string_pretty(&v).map_err(|e| ReportError::Schema(e.to_string()))? + "\n";
        self.write_raw(rel, &text)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// `manifest.json`; its first field is the only timestamp in the tree.
    pub fn write_manifest(&self, command: &str) -> Result<PathBuf, ReportError> {
        let mut files = self.files.clone();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let m = Manifest {
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            provenance: &self.provenance,
            command,
            files: &files,
        };
        let path = self.root.join("manifest.json");
        fs::create_dir_all(&self.root).map_err(Self::io(&self.root))?;
        let text = serde_json::to_string_pretty(&m).map_err(|e| ReportError::Schema(e.to_string()))? + "\n";
        fs::write(&path, text).map_err(Self::io(&path))?;
        Ok(path)
    }
}
