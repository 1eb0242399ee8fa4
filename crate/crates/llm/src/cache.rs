use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use structamp_core::predictors::prompt::{messages_to_json, prompt_hash, Message};

/// One raw backend reply and, if it was rejected, why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub content: String,
    pub reasoning: Option<String>,
    pub error: Option<String>,
}

/// Every exchange for one (model, prompt) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub model: String,
    pub prompt_hash: String,
    pub messages: Vec<Message>,
    pub attempts: Vec<Attempt>,
    /// Index of the attempt that parsed; `None` if all were rejected.
    pub accepted: Option<usize>,
}

/// Content-addressed store of backend exchanges, one JSON file per key.
/// Writes go to a temporary file in the same directory and are renamed
/// into place, so concurrent writers never leave a torn entry.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(Self { dir: dir.as_ref().to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hex SHA-256 of the model id and the canonical prompt.
    pub fn key(model: &str, messages: &[Message]) -> String {
        let mut h = Sha256::new();
        h.update(model.as_bytes());
        h.update([0u8]);
        h.update(messages_to_json(messages).as_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let path = self.path(key);
        let text = fs::read_to_string(&path).ok()?;
        match serde_json::from_str(&text) {
            Ok(e) => Some(e),
            Err(err) => {
                log::warn!("ignoring unreadable cache entry {}: {err}", path.display());
                None
            }
        }
    }

    pub fn put(&self, key: &str, entry: &CacheEntry) -> std::io::Result<()> {
        let path = self.path(key);
        let parent = path.parent().expect("entry path has a parent");
        fs::create_dir_all(parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(serde_json::to_string_pretty(entry).expect("entry serializes").as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        walk(&self.dir)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn walk(dir: &Path) -> usize {
    let Ok(rd) = fs::read_dir(dir) else { return 0 };
    rd.flatten()
        .map(|e| {
            let p = e.path();
            if p.is_dir() {
                walk(&p)
            } else {
                usize::from(p.extension().is_some_and(|x| x == "json"))
            }
        })
        .sum()
}

pub(crate) fn new_entry(model: &str, messages: &[Message]) -> CacheEntry {
    CacheEntry {
        model: model.to_string(),
        prompt_hash: prompt_hash(messages),
        messages: messages.to_vec(),
        attempts: Vec::new(),
        accepted: None,
    }
}
