//! `.meta` sidecars written next to every artifact.

use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats::create;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    /// e.g. `specialized_seen`, `generator`, `report`
    pub kind: String,
    pub config_sha256: String,
    pub seed: u64,
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `<artifact>.meta`. The artifact must already exist; its digest
/// is recorded alongside the run's config hash and seed.
pub fn write_sidecar(artifact: &Path, meta: &Meta) -> Result<PathBuf> {
    let path = sidecar_path(artifact);
    let content = file_sha256(artifact)?;
    let mut out = create(&path)?;
    let text = format!(
        "kind = {}\nconfig_sha256 = {}\nseed = {}\ncontent_sha256 = {content}\ntool = lexspec {}\n",
        meta.kind,
        meta.config_sha256,
        meta.seed,
        env!("CARGO_PKG_VERSION"),
    );
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads the `key = value` lines of a sidecar.
pub fn read_sidecar(artifact: &Path) -> Result<Vec<(String, String)>> {
    let path = sidecar_path(artifact);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_records_digest() {
        let dir = tempfile::tempdir().unwrap();
        let art = dir.path().join("x.txt");
        std::fs::write(&art, "abc").unwrap();
        let meta = Meta {
            kind: "test".into(),
            config_sha256: "00".into(),
            seed: 4,
        };
        let p = write_sidecar(&art, &meta).unwrap();
        assert_eq!(p, dir.path().join("x.txt.meta"));
        let kv = read_sidecar(&art).unwrap();
        let get = |k: &str| kv.iter().find(|(a, _)| a == k).map(|(_, v)| v.as_str());
        assert_eq!(get("seed"), Some("4"));
        assert_eq!(
            get("content_sha256"),
            Some("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
        );
    }
}
