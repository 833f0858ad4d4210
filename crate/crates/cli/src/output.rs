//! Output staging: everything a command produces is collected in memory and
//! written only once the whole run has succeeded, each file through a
//! temporary file and an atomic rename.

use anyhow::{Context, Result};
use drivevol::report::{json_with_metadata, Metadata};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

pub const RUN_MANIFEST: &str = "run_manifest.json";

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Prefixes CSV text with the metadata comment line.
pub fn stamp_csv(body: &str, metadata: &Metadata) -> String {
    format!("{}\n{body}", metadata.line())
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub config_hash: &'a str,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    /// Row accounting from every stage that ran.
    pub counts: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(String, String)>,
}

impl Staged {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Appends the run manifest and writes every file into `dir`.
    pub fn commit(mut self, dir: &Path, manifest: RunManifest<'_>, metadata: &Metadata) -> Result<Vec<String>> {
        let mut manifest = manifest;
        manifest.outputs = self.files.iter().map(|(n, _)| n.clone()).collect();
        manifest.outputs.push(RUN_MANIFEST.to_owned());
        self.add(RUN_MANIFEST, json_with_metadata(&manifest, Some(metadata))?);

        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, contents) in &self.files {
            write_atomic(&dir.join(name), contents.as_bytes())?;
        }
        Ok(manifest.outputs)
    }
}

/// Writes through a temporary file in the target directory, then renames it
/// over `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    // temp files are created owner-only; results are ordinary files
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents_and_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"old").unwrap();
        write_atomic(&p, b"new").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "new");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn digest_is_sha256() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(
            file_digest(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
