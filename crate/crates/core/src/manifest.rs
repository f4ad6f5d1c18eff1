//! JSON manifest recording every generated file and the parameters that
//! produced it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asm::{SceneKind, SceneProfile};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryParams {
    #[serde(rename = "A")]
    pub airlight: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub delta_betas: Vec<f64>,
    /// Seed of the entry's own random stream.
    pub seed: u64,
}

/// Downsampled clean targets for coarse-to-fine supervision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleTargets {
    pub half: String,
    pub quarter: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_path: Option<String>,
    pub hazy_path: String,
    #[serde(default)]
    pub rehazy_paths: Vec<String>,
    pub depth_path: String,
    pub params: EntryParams,
    pub profile: SceneKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<ScaleTargets>,
}

impl ManifestEntry {
    /// Every path the entry references.
    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.clean_path
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.hazy_path.as_str()))
            .chain(self.rehazy_paths.iter().map(String::as_str))
            .chain(std::iter::once(self.depth_path.as_str()))
            .chain(
                self.targets
                    .iter()
                    .flat_map(|t| [t.half.as_str(), t.quarter.as_str()]),
            )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestKind {
    Synth,
    Rehazy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub schema: u32,
    pub kind: ManifestKind,
    pub seed: u64,
    pub profile: SceneProfile,
    pub entries: Vec<ManifestEntry>,
}

impl PairManifest {
    pub fn new(kind: ManifestKind, seed: u64, profile: SceneProfile) -> Self {
        PairManifest {
            schema: SCHEMA_VERSION,
            kind,
            seed,
            profile,
            entries: Vec::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: PairManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if manifest.schema != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported manifest schema {} (expected {SCHEMA_VERSION})",
                manifest.schema
            )));
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Paths that are referenced but missing on disk.
    pub fn missing_files(&self) -> Vec<String> {
        self.entries
            .iter()
            .flat_map(ManifestEntry::paths)
            .filter(|p| !Path::new(p).is_file())
            .map(str::to_owned)
            .collect()
    }
}
