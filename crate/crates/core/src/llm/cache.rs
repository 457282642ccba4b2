// SPDX-License-Identifier: Apache-2.0

//! Per-table artifact store.
//!
//! Each table gets `<root>/<id>-<hash>/`, where the hash covers the raw
//! table bytes and the prompt templates. A `manifest.json` records the
//! SHA-256 of every artifact; a file whose bytes disagree with the manifest
//! is reported as corrupt. Probe artifacts live under `provenance/`, which
//! the question-answering path never opens. `index.json` at the root maps
//! table ids to their current directory.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::prompts::{CODE_TEMPLATE, ISSUE_TEMPLATE, PLAN_EXAMPLES, PLAN_TEMPLATE, QA_TEMPLATE};
use crate::plan::vocabulary_block;
use crate::table::{write_csv, Table};

pub const PROBES_FILE: &str = "provenance/issues.json";
pub const PLAN_FILE: &str = "plan.json";
pub const CANONICAL_FILE: &str = "canonical.csv";
pub const TRACE_FILE: &str = "trace.json";
pub const AUDIT_FILE: &str = "audit.json";
pub const SCHEMA_FILE: &str = "schema.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O on {path}: {message}")]
    Io { path: String, message: String },
    #[error("cache file {path} does not match its recorded hash; delete it to regenerate")]
    Corrupt { path: String },
    #[error("cache metadata {path} is unreadable: {message}")]
    Metadata { path: String, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CacheError {
    CacheError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub table_id: String,
    #[serde(default)]
    pub title: String,
    pub key: String,
    pub files: BTreeMap<String, String>,
}

/// A table's cache directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub table_id: String,
    pub key: String,
    pub dir: PathBuf,
}

impl CacheEntry {
    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }
}

/// Makes a table id usable as a directory name.
pub fn sanitize_table_id(id: &str) -> String {
    let mut s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .take(64)
        .collect();
    if s.starts_with('.') {
        s.replace_range(0..1, "_");
    }
    if s.is_empty() {
        s.push_str("table");
    }
    s
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fingerprint of everything prompt-side that shapes the artifacts.
pub fn prompt_fingerprint() -> String {
    let mut h = Sha256::new();
    for part in [ISSUE_TEMPLATE, PLAN_TEMPLATE, CODE_TEMPLATE, QA_TEMPLATE, PLAN_EXAMPLES, &vocabulary_block()] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CacheError> {
    let dir = path.parent().ok_or_else(|| io_err(path, "no parent directory"))?;
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(contents).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub struct ArtifactCache {
    root: PathBuf,
    lock: Mutex<()>,
}

impl ArtifactCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ArtifactCache { root: root.into(), lock: Mutex::new(()) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Content key for a raw table: hash of its CSV bytes, its id and the
    /// prompt fingerprint.
    pub fn key_for(table: &Table) -> String {
        let mut h = Sha256::new();
        h.update(table.table_id.as_bytes());
        h.update([0]);
        h.update(write_csv(table).as_bytes());
        h.update([0]);
        h.update(prompt_fingerprint().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn entry_for(&self, table: &Table) -> CacheEntry {
        let key = Self::key_for(table);
        let dir = self.root.join(format!("{}-{}", sanitize_table_id(&table.table_id), &key[..16]));
        CacheEntry { table_id: table.table_id.clone(), key, dir }
    }

    fn read_json<T: for<'de> Deserialize<'de> + Default>(path: &Path) -> Result<T, CacheError> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| CacheError::Metadata { path: path.display().to_string(), message: e.to_string() }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(T::default()),
            Err(e) => Err(io_err(path, e)),
        }
    }

    pub fn manifest(&self, entry: &CacheEntry) -> Result<Manifest, CacheError> {
        Self::read_json(&entry.path(MANIFEST_FILE))
    }

    /// Reads an artifact. `Ok(None)` when it is absent or was never
    /// recorded; `Corrupt` when its bytes disagree with the manifest.
    pub fn read(&self, entry: &CacheEntry, file: &str) -> Result<Option<String>, CacheError> {
        let manifest = self.manifest(entry)?;
        let Some(expected) = manifest.files.get(file) else { return Ok(None) };
        let path = entry.path(file);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path, e)),
        };
        if &sha256_hex(&bytes) != expected {
            return Err(CacheError::Corrupt { path: path.display().to_string() });
        }
        String::from_utf8(bytes).map(Some).map_err(|_| CacheError::Corrupt { path: path.display().to_string() })
    }

    /// Writes artifacts atomically, then records their hashes and points
    /// the index at this entry.
    pub fn write(&self, entry: &CacheEntry, title: &str, files: &[(&str, &str)]) -> Result<(), CacheError> {
        let _guard = self.lock.lock().expect("cache lock");
        let mut manifest = self.manifest(entry)?;
        manifest.table_id = entry.table_id.clone();
        manifest.title = title.to_string();
        manifest.key = entry.key.clone();
        for (name, contents) in files {
            write_atomic(&entry.path(name), contents.as_bytes())?;
            manifest.files.insert((*name).to_string(), sha256_hex(contents.as_bytes()));
        }
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&entry.path(MANIFEST_FILE), text.as_bytes())?;

        let index_path = self.root.join(INDEX_FILE);
        let mut index: BTreeMap<String, String> = Self::read_json(&index_path)?;
        let dir_name = entry.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if index.get(&entry.table_id) != Some(&dir_name) {
            index.insert(entry.table_id.clone(), dir_name);
            let text = serde_json::to_string_pretty(&index).expect("index serializes");
            write_atomic(&index_path, text.as_bytes())?;
        }
        Ok(())
    }

    /// The entry most recently written for `table_id`, if any.
    pub fn lookup(&self, table_id: &str) -> Result<Option<CacheEntry>, CacheError> {
        let index: BTreeMap<String, String> = Self::read_json(&self.root.join(INDEX_FILE))?;
        let Some(dir_name) = index.get(table_id) else { return Ok(None) };
        let dir = self.root.join(dir_name);
        let manifest: Manifest = Self::read_json(&dir.join(MANIFEST_FILE))?;
        if manifest.key.is_empty() {
            return Ok(None);
        }
        Ok(Some(CacheEntry { table_id: table_id.to_string(), key: manifest.key, dir }))
    }

    /// Table ids listed in the index.
    pub fn table_ids(&self) -> Result<Vec<String>, CacheError> {
        let index: BTreeMap<String, String> = Self::read_json(&self.root.join(INDEX_FILE))?;
        Ok(index.into_keys().collect())
    }
}

impl ArtifactCache {
    /// Deletes the directory indexed for `table_id`. Returns whether
    /// anything was removed.
    pub fn remove(&self, table_id: &str) -> Result<bool, CacheError> {
        let _guard = self.lock.lock().expect("cache lock");
        let index_path = self.root.join(INDEX_FILE);
        let mut index: BTreeMap<String, String> = Self::read_json(&index_path)?;
        let Some(dir_name) = index.remove(table_id) else { return Ok(false) };
        let dir = self.root.join(dir_name);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
        let text = serde_json::to_string_pretty(&index).expect("index serializes");
        write_atomic(&index_path, text.as_bytes())?;
        Ok(true)
    }

    /// Deletes the whole cache root.
    pub fn clear(&self) -> Result<(), CacheError> {
        let _guard = self.lock.lock().expect("cache lock");
        if self.root.exists() {
            std::fs::remove_dir_all(&self.root).map_err(|e| io_err(&self.root, e))?;
        }
        Ok(())
    }
}
