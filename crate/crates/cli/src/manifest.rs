//! Run directory bookkeeping. Every artifact is written through [`RunDir`],
//! which records its content hash and owning stage in `manifest.json`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    pub finished_at: String,
    pub error: Option<String>,
    /// Free-form counters (request totals, cache hits, skipped items).
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub sha256: String,
    pub bytes: u64,
    pub stage: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub created_at: String,
    pub updated_at: String,
    pub stages: BTreeMap<String, StageRecord>,
    /// Keyed by path relative to the run directory, `/`-separated.
    pub artifacts: BTreeMap<String, ArtifactRecord>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    fn new(config_hash: &str) -> Self {
        let t = now();
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            created_at: t.clone(),
            updated_at: t,
            stages: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let parent = path.parent().context("artifact path has no parent")?;
    std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// An open run directory.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    manifest: RunManifest,
}

impl RunDir {
    /// Opens or creates a run directory for a config. A manifest written
    /// under a different config hash is discarded; artifacts whose content
    /// no longer matches their hash are dropped along with the completion
    /// flag of the stage that wrote them.
    pub fn open(root: &Path, config_hash: &str) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let manifest = match Self::read_manifest(root)? {
            Some(m) if m.config_hash == config_hash => m,
            Some(_) => {
                log::info!(target: "run", "config changed since the last run; starting over");
                RunManifest::new(config_hash)
            }
            None => RunManifest::new(config_hash),
        };
        let mut dir = Self { root: root.to_path_buf(), manifest };
        for rel in dir.verify() {
            log::warn!(target: "run", "artifact {rel} is missing or modified; its stage will re-run");
            if let Some(rec) = dir.manifest.artifacts.remove(&rel) {
                dir.manifest.stages.remove(&rec.stage);
            }
        }
        dir.save()?;
        Ok(dir)
    }

    /// Opens a directory produced by an earlier run without checking the
    /// config it came from.
    pub fn open_existing(root: &Path) -> anyhow::Result<Option<Self>> {
        Ok(Self::read_manifest(root)?.map(|manifest| Self { root: root.to_path_buf(), manifest }))
    }

    fn read_manifest(root: &Path) -> anyhow::Result<Option<RunManifest>> {
        let path = root.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn save(&mut self) -> anyhow::Result<()> {
        self.manifest.updated_at = now();
        let text = serde_json::to_string_pretty(&self.manifest)?;
        write_atomic(&self.root.join(MANIFEST), text.as_bytes())
    }

    pub fn is_complete(&self, stage: &str) -> bool {
        self.manifest.stages.get(stage).is_some_and(|s| s.status == StageStatus::Complete)
    }

    /// Whether `rel` was recorded by a previous write.
    pub fn has(&self, rel: &str) -> bool {
        self.manifest.artifacts.contains_key(rel)
    }

    pub fn write(&mut self, stage: &str, rel: &str, bytes: &[u8]) -> anyhow::Result<()> {
        write_atomic(&self.path(rel), bytes)?;
        self.manifest.artifacts.insert(
            rel.to_string(),
            ArtifactRecord { sha256: sha256_hex(bytes), bytes: bytes.len() as u64, stage: stage.to_string() },
        );
        self.save()
    }

    pub fn write_json<S: Serialize>(&mut self, stage: &str, rel: &str, value: &S) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(stage, rel, text.as_bytes())
    }

    pub fn read(&self, rel: &str) -> anyhow::Result<Vec<u8>> {
        std::fs::read(self.path(rel)).with_context(|| format!("reading {rel}"))
    }

    pub fn read_json<D: serde::de::DeserializeOwned>(&self, rel: &str) -> anyhow::Result<D> {
        serde_json::from_slice(&self.read(rel)?).with_context(|| format!("parsing {rel}"))
    }

    pub fn complete(&mut self, stage: &str, notes: BTreeMap<String, String>) -> anyhow::Result<()> {
        self.manifest.stages.insert(
            stage.to_string(),
            StageRecord { status: StageStatus::Complete, finished_at: now(), error: None, notes },
        );
        self.save()
    }

    pub fn reset(&mut self, stage: &str) {
        self.manifest.stages.remove(stage);
    }

    pub fn fail(&mut self, stage: &str, error: &str) -> anyhow::Result<()> {
        self.manifest.stages.insert(
            stage.to_string(),
            StageRecord {
                status: StageStatus::Failed,
                finished_at: now(),
                error: Some(error.to_string()),
                notes: BTreeMap::new(),
            },
        );
        self.save()
    }

    /// Recorded artifacts whose file is missing or whose content hash no
    /// longer matches.
    pub fn verify(&self) -> Vec<String> {
        self.manifest
            .artifacts
            .iter()
            .filter(|(rel, rec)| std::fs::read(self.path(rel)).map_or(true, |b| sha256_hex(&b) != rec.sha256))
            .map(|(rel, _)| rel.clone())
            .collect()
    }
}
