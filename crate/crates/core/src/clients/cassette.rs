use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{content_hash, ClientError, ToolName};

/// One recorded exchange, stored as a single JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub tool: ToolName,
    pub key: String,
    pub response: Value,
    pub recorded_at: String,
}

/// Binary payloads live next to the cassette: `fixtures.jsonl` keeps its
/// blobs in `fixtures.blobs/<sha256>`.
pub fn blob_dir_for(cassette: &Path) -> PathBuf {
    cassette.with_extension("blobs")
}

/// Immutable, fully loaded cassette used for replay.
#[derive(Debug, Default)]
pub struct Cassette {
    path: Option<PathBuf>,
    entries: HashMap<(ToolName, String), CassetteEntry>,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let file = File::open(path)
            .map_err(|e| ClientError::Cassette(format!("{}: {e}", path.display())))?;
        let mut entries = HashMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| ClientError::Cassette(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry = serde_json::from_str(&line).map_err(|e| {
                ClientError::Cassette(format!("{}:{}: {e}", path.display(), n + 1))
            })?;
            // later lines win, so re-recording a key overrides it
            entries.insert((entry.tool, entry.key.clone()), entry);
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries,
        })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = CassetteEntry>) -> Self {
        Self {
            path: None,
            entries: entries
                .into_iter()
                .map(|e| ((e.tool, e.key.clone()), e))
                .collect(),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, tool: ToolName, key: &str) -> Result<&Value, ClientError> {
        self.entries
            .get(&(tool, key.to_string()))
            .map(|e| &e.response)
            .ok_or_else(|| ClientError::CassetteMiss {
                tool,
                key: key.to_string(),
            })
    }

    pub fn blob(&self, hash: &str) -> Result<Vec<u8>, ClientError> {
        let path = self
            .path
            .as_deref()
            .ok_or_else(|| ClientError::Cassette("in-memory cassette has no blob directory".into()))?;
        if !hash.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(ClientError::Cassette(format!("bad blob reference {hash:?}")));
        }
        let blob = blob_dir_for(path).join(hash);
        fs::read(&blob).map_err(|e| ClientError::Cassette(format!("{}: {e}", blob.display())))
    }
}

/// Appends entries to a cassette file. All writes go through one mutex so
/// concurrent recorders never interleave lines.
#[derive(Debug)]
pub struct CassetteWriter {
    path: PathBuf,
    file: Mutex<File>,
}

impl CassetteWriter {
    pub fn open(path: &Path) -> Result<Self, ClientError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| ClientError::Cassette(e.to_string()))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ClientError::Cassette(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, tool: ToolName, key: &str, response: Value) -> Result<(), ClientError> {
        let entry = CassetteEntry {
            tool,
            key: key.to_string(),
            response,
            recorded_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        let mut line = serde_json::to_string(&entry).map_err(|e| ClientError::Cassette(e.to_string()))?;
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| ClientError::Cassette(e.to_string()))
    }

    /// Stores `bytes` in the blob directory and returns its content hash.
    pub fn put_blob(&self, bytes: &[u8]) -> Result<String, ClientError> {
        let hash = content_hash(bytes);
        let dir = blob_dir_for(&self.path);
        fs::create_dir_all(&dir).map_err(|e| ClientError::Cassette(e.to_string()))?;
        let target = dir.join(&hash);
        if !target.exists() {
            fs::write(&target, bytes).map_err(|e| ClientError::Cassette(e.to_string()))?;
        }
        Ok(hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("suite.jsonl");
        let w = CassetteWriter::open(&path).unwrap();
        w.append(ToolName::WebSearch, "\"Nike\"", json!([])).unwrap();
        w.append(ToolName::WebSearch, "\"Nike\"", json!([1])).unwrap();
        let h = w.put_blob(b"png-bytes").unwrap();
        drop(w);

        let c = Cassette::load(&path).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.get(ToolName::WebSearch, "\"Nike\"").unwrap(), &json!([1]));
        assert_eq!(c.blob(&h).unwrap(), b"png-bytes");
        assert!(c.get(ToolName::ImageSearch, "\"Nike\"").unwrap_err().is_cassette_miss());
    }

    #[test]
    fn corrupt_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        fs::write(&path, "{\"tool\":\"web_search\"\n").unwrap();
        let err = Cassette::load(&path).unwrap_err().to_string();
        assert!(err.contains("bad.jsonl:1"), "{err}");
    }

    #[test]
    fn blob_refs_must_be_hex() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(&path, "").unwrap();
        let c = Cassette::load(&path).unwrap();
        assert!(c.blob("../etc/passwd").is_err());
    }
}
