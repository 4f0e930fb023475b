//! Case manifests: which reference, intensity and prediction files make up a run.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ranking::SubsetKey;
use crate::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub case_id: String,
    pub subset: SubsetKey,
    pub reference: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<PathBuf>,
    /// Algorithm name to prediction file.
    pub predictions: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseManifest {
    pub schema_version: u32,
    pub cases: Vec<ManifestEntry>,
}

impl CaseManifest {
    /// Every algorithm named in any entry, sorted.
    pub fn algorithms(&self) -> Vec<String> {
        self.cases
            .iter()
            .flat_map(|c| c.predictions.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Parses and validates a manifest. Relative paths are resolved against
/// `base_dir` and must exist.
pub fn load_manifest(bytes: &[u8], base_dir: &Path) -> Result<CaseManifest> {
    let mut manifest: CaseManifest =
        serde_json::from_slice(bytes).map_err(|e| Error::SchemaViolation(format!("manifest: {e}")))?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::SchemaViolation(format!(
            "unsupported schema_version {} (expected {MANIFEST_SCHEMA_VERSION})",
            manifest.schema_version
        )));
    }
    let mut seen = BTreeSet::new();
    for entry in &mut manifest.cases {
        if entry.case_id.is_empty() {
            return Err(Error::SchemaViolation("empty case_id".into()));
        }
        if !seen.insert(entry.case_id.clone()) {
            return Err(Error::DuplicateCase(entry.case_id.clone()));
        }
        if entry.predictions.is_empty() {
            return Err(Error::SchemaViolation(format!(
                "case {} lists no predictions",
                entry.case_id
            )));
        }
        entry.reference = resolve(base_dir, &entry.reference)?;
        if let Some(p) = &entry.intensity {
            entry.intensity = Some(resolve(base_dir, p)?);
        }
        for path in entry.predictions.values_mut() {
            *path = resolve(base_dir, path)?;
        }
    }
    Ok(manifest)
}

/// Reads a manifest file, resolving paths relative to its directory.
pub fn load_manifest_file(path: &Path) -> Result<CaseManifest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_manifest(&bytes, path.parent().unwrap_or(Path::new(".")))
}

fn resolve(base: &Path, path: &Path) -> Result<PathBuf> {
    let full = if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    };
    if full.is_file() {
        Ok(full)
    } else {
        Err(Error::MissingFile(full))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for f in ["ref.nii", "a.nii", "b.nii"] {
            std::fs::write(dir.path().join(f), b"x").unwrap();
        }
        dir
    }

    #[test]
    fn minimal_manifest() {
        let dir = fixture();
        let json = br#"{"schema_version":1,"cases":[{"case_id":"c1","subset":"FDG_UKT","reference":"ref.nii","predictions":{"a":"a.nii"}}]}"#;
        let m = load_manifest(json, dir.path()).unwrap();
        assert_eq!(m.cases.len(), 1);
        assert_eq!(m.cases[0].reference, dir.path().join("ref.nii"));
        assert_eq!(m.algorithms(), vec!["a"]);
    }

    #[test]
    fn rejects_bad_manifests() {
        let dir = fixture();
        let dup = br#"{"schema_version":1,"cases":[
            {"case_id":"c1","subset":"FDG_UKT","reference":"ref.nii","predictions":{"a":"a.nii"}},
            {"case_id":"c1","subset":"FDG_LMU","reference":"ref.nii","predictions":{"a":"b.nii"}}]}"#;
        assert!(matches!(load_manifest(dup, dir.path()), Err(Error::DuplicateCase(id)) if id == "c1"));

        let subset = br#"{"schema_version":1,"cases":[{"case_id":"c1","subset":"CTLM","reference":"ref.nii","predictions":{"a":"a.nii"}}]}"#;
        assert!(matches!(
            load_manifest(subset, dir.path()),
            Err(Error::SchemaViolation(_))
        ));

        let missing = br#"{"schema_version":1,"cases":[{"case_id":"c1","subset":"FDG_UKT","reference":"nope.nii","predictions":{"a":"a.nii"}}]}"#;
        assert!(matches!(load_manifest(missing, dir.path()), Err(Error::MissingFile(_))));

        let version = br#"{"schema_version":7,"cases":[]}"#;
        assert!(matches!(
            load_manifest(version, dir.path()),
            Err(Error::SchemaViolation(_))
        ));
    }
}
