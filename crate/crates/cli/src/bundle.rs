//! Writes report artifacts and a checksummed index into an output directory.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::canonical::to_json;

pub const INDEX_FILE: &str = "index.json";

/// One file of a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub content: String,
}

impl Artifact {
    pub fn new(file: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Index {
    pub schema: &'static str,
    pub artifacts: Vec<IndexEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every artifact plus `index.json` into `dir`, creating it if needed.
pub fn report_bundle(dir: &Path, artifacts: &[Artifact]) -> io::Result<Index> {
    if artifacts.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no reports to write"));
    }
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        fs::write(dir.join(&a.file), &a.content)?;
        entries.push(IndexEntry {
            file: a.file.clone(),
            bytes: a.content.len(),
            sha256: sha256_hex(a.content.as_bytes()),
        });
    }
    let index = Index {
        schema: "obswin/index/v1",
        artifacts: entries,
    };
    fs::write(dir.join(INDEX_FILE), to_json(&index))?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_files_and_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let index = report_bundle(dir.path(), &[Artifact::new("rank.json", "{}\n")]).unwrap();
        assert_eq!(index.artifacts.len(), 1);
        assert_eq!(
            index.artifacts[0].sha256,
            "ca3d163bab055381827226140568f3bef7eaac187cebd76878e0b63e9e442356"
        );
        assert_eq!(fs::read_to_string(dir.path().join("rank.json")).unwrap(), "{}\n");
        assert!(dir.path().join(INDEX_FILE).exists());
    }

    #[test]
    fn empty_bundle_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(report_bundle(dir.path(), &[]).is_err());
    }

    #[test]
    fn unwritable_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(report_bundle(&blocker.join("sub"), &[Artifact::new("a.json", "{}")]).is_err());
    }
}
