//! Dataset manifests: `{"items":[{"seed":..,"intensity":..,"labels":..}], "params":{..}}`.
//!
//! Item paths are stored relative to the manifest's directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
    /// Per-label bounding boxes, for methods that predict boxes only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<PathBuf>,
}

impl ManifestItem {
    /// Sample identifier shared between prediction and ground-truth sets.
    pub fn id(&self) -> String {
        self.seed.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub items: Vec<ManifestItem>,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(skip)]
    dir: PathBuf,
}

impl Manifest {
    pub fn new(dir: impl Into<PathBuf>, items: Vec<ManifestItem>, params: serde_json::Value) -> Self {
        Self {
            items,
            params,
            dir: dir.into(),
        }
    }

    /// Accepts either a manifest file or a directory containing `manifest.json`.
    pub fn locate(path: &Path) -> PathBuf {
        if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = Self::locate(path);
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        let mut manifest: Manifest = serde_json::from_slice(&bytes).map_err(|source| Error::Json {
            path: file.clone(),
            source,
        })?;
        manifest.dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.dir.join(rel)
    }

    /// Writes `manifest.json` into the manifest directory through a temporary
    /// file and a rename, so readers never observe a partial manifest.
    pub fn save(&self) -> Result<PathBuf> {
        let path = self.dir.join(MANIFEST_FILE);
        let tmp = self.dir.join(format!(".{MANIFEST_FILE}.tmp"));
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
