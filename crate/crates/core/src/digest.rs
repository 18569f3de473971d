//! Content digests used for determinism checks and workspace manifests.

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Streaming digest over several byte chunks, each length-prefixed so that
/// chunk boundaries are part of the digest.
#[derive(Default)]
pub struct Digester(Sha256);

impl Digester {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, chunk: &[u8]) -> &mut Self {
        self.0.update((chunk.len() as u64).to_le_bytes());
        self.0.update(chunk);
        self
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}
