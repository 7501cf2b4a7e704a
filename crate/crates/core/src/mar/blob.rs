//! Content-addressed blob store backing URI-referenced file parts.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::a2a::{FilePart, FilePayload, Part, MAX_INLINE_BYTES};

pub const BLOB_ROUTE: &str = "/blobs";

#[derive(Debug, thiserror::Error)]
#[error("blob store write failed: {0}")]
pub struct BlobWriteError(#[from] io::Error);

#[derive(Debug)]
pub struct BlobStore {
    dir: PathBuf,
    base_url: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn is_sha(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl BlobStore {
    /// `base_url` is the origin serving `/blobs/{sha}`, e.g. the router's address.
    pub fn open(dir: impl Into<PathBuf>, base_url: &str) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, base_url: base_url.trim_end_matches('/').to_string() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn uri_for(&self, sha: &str) -> String {
        format!("{}{BLOB_ROUTE}/{sha}", self.base_url)
    }

    /// Stores `bytes` and returns their URI. Writing the same content twice is a no-op.
    pub fn put(&self, bytes: &[u8]) -> io::Result<String> {
        let sha = sha256_hex(bytes);
        let path = self.dir.join(&sha);
        if !path.exists() {
            let tmp = self.dir.join(format!(".{sha}.{}.tmp", std::process::id()));
            std::fs::write(&tmp, bytes)?;
            std::fs::rename(&tmp, &path)?;
        }
        Ok(self.uri_for(&sha))
    }

    pub fn get(&self, sha: &str) -> io::Result<Option<Vec<u8>>> {
        if !is_sha(sha) {
            return Ok(None);
        }
        match std::fs::read(self.dir.join(sha)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Reads a URI this store issued. Foreign URIs return `None`.
    pub fn resolve(&self, uri: &str) -> Option<Vec<u8>> {
        let sha = uri.strip_prefix(&self.base_url)?.strip_prefix(BLOB_ROUTE)?.strip_prefix('/')?;
        self.get(sha).ok().flatten()
    }
}

/// Moves inline payloads above the 1 MiB limit into the blob store.
pub fn encode_for_wire(part: Part, store: &BlobStore) -> Result<Part, BlobWriteError> {
    match part {
        Part::File(FilePart { mime_type, payload: FilePayload::Inline(bytes), name }) if bytes.len() > MAX_INLINE_BYTES => {
            let uri = store.put(&bytes)?;
            Ok(Part::uri_file(mime_type, uri, name))
        }
        other => Ok(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a2a::MimeType;

    fn store() -> (tempfile::TempDir, BlobStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = BlobStore::open(dir.path().join("blobs"), "http://127.0.0.1:9/").unwrap();
        (dir, s)
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn threshold_and_round_trip() {
        let (_d, s) = store();
        let wav = MimeType::parse("audio/wav").unwrap();
        let small = Part::inline_file(wav.clone(), vec![7; 500 * 1024], None);
        assert_eq!(encode_for_wire(small.clone(), &s).unwrap(), small);
        let exact = Part::inline_file(wav.clone(), vec![1; MAX_INLINE_BYTES], None);
        assert_eq!(encode_for_wire(exact.clone(), &s).unwrap(), exact);
        let empty = Part::inline_file(wav.clone(), vec![], None);
        assert_eq!(encode_for_wire(empty.clone(), &s).unwrap(), empty);

        let big_bytes = vec![3u8; 2 * 1024 * 1024];
        let big = Part::inline_file(MimeType::parse("image/png").unwrap(), big_bytes.clone(), Some("x.png".into()));
        let Part::File(FilePart { payload: FilePayload::Uri(uri), name, .. }) = encode_for_wire(big, &s).unwrap() else {
            panic!("expected a URI part");
        };
        assert_eq!(name.as_deref(), Some("x.png"));
        assert!(uri.starts_with("http://127.0.0.1:9/blobs/"));
        assert_eq!(s.resolve(&uri).unwrap(), big_bytes);
    }

    #[test]
    fn foreign_or_malformed_uris() {
        let (_d, s) = store();
        assert!(s.resolve("http://elsewhere/blobs/abc").is_none());
        assert!(s.resolve("http://127.0.0.1:9/blobs/../../etc/passwd").is_none());
        assert_eq!(s.get(&"0".repeat(64)).unwrap(), None);
    }
}
