//! Encrypted-at-rest corpus container.
//!
//! Layout: `"RDXC" | version:u8 | salt:[u8;16] | nonce:[u8;24] | ciphertext`.
//! The key is stretched with Argon2id over the salt; the JSON-lines corpus is
//! sealed with XChaCha20-Poly1305 and the header bytes are bound as
//! associated data, so any edit to the header or body fails authentication.

use argon2::Argon2;
use chacha20poly1305::aead::{Aead, Payload};
use chacha20poly1305::{KeyInit, XChaCha20Poly1305, XNonce};
use rand::RngCore;
use thiserror::Error;

use super::Corpus;

pub const SEAL_MAGIC: &[u8; 4] = b"RDXC";
pub const SEAL_VERSION: u8 = 1;
const SALT_LEN: usize = 16;
const NONCE_LEN: usize = 24;
const HEADER_LEN: usize = 4 + 1 + SALT_LEN + NONCE_LEN;
const TAG_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum SealError {
    #[error("encryption key must be nonempty")]
    EmptyKey,
    #[error("authentication failed: wrong key or tampered container")]
    AuthenticationFailure,
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("key derivation failed: {0}")]
    KeyDerivation(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedCorpus {
    pub version: u8,
    pub salt: [u8; SALT_LEN],
    pub nonce: [u8; NONCE_LEN],
    pub ciphertext: Vec<u8>,
}

impl SealedCorpus {
    fn header(&self) -> Vec<u8> {
        let mut h = Vec::with_capacity(HEADER_LEN);
        h.extend_from_slice(SEAL_MAGIC);
        h.push(self.version);
        h.extend_from_slice(&self.salt);
        h.extend_from_slice(&self.nonce);
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header();
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SealError> {
        if bytes.len() < HEADER_LEN + TAG_LEN {
            return Err(SealError::MalformedContainer(format!("{} bytes is shorter than the minimum", bytes.len())));
        }
        if &bytes[..4] != SEAL_MAGIC {
            return Err(SealError::MalformedContainer("bad magic bytes".into()));
        }
        let version = bytes[4];
        if version != SEAL_VERSION {
            return Err(SealError::UnsupportedVersion(version));
        }
        let mut salt = [0u8; SALT_LEN];
        salt.copy_from_slice(&bytes[5..5 + SALT_LEN]);
        let mut nonce = [0u8; NONCE_LEN];
        nonce.copy_from_slice(&bytes[5 + SALT_LEN..HEADER_LEN]);
        Ok(SealedCorpus { version, salt, nonce, ciphertext: bytes[HEADER_LEN..].to_vec() })
    }
}

fn derive_key(key: &str, salt: &[u8]) -> Result<[u8; 32], SealError> {
    if key.is_empty() {
        return Err(SealError::EmptyKey);
    }
    let mut out = [0u8; 32];
    Argon2::default()
        .hash_password_into(key.as_bytes(), salt, &mut out)
        .map_err(|e| SealError::KeyDerivation(e.to_string()))?;
    Ok(out)
}

/// Encrypts `corpus` under `key` with a fresh random salt and nonce.
pub fn seal_corpus(corpus: &Corpus, key: &str) -> Result<SealedCorpus, SealError> {
    let mut rng = rand::rngs::OsRng;
    let mut salt = [0u8; SALT_LEN];
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut salt);
    rng.fill_bytes(&mut nonce);
    let derived = derive_key(key, &salt)?;
    let mut sealed = SealedCorpus { version: SEAL_VERSION, salt, nonce, ciphertext: Vec::new() };
    let aad = sealed.header();
    let cipher = XChaCha20Poly1305::new((&derived).into());
    let plaintext = corpus.to_jsonl();
    sealed.ciphertext = cipher
        .encrypt(XNonce::from_slice(&nonce), Payload { msg: &plaintext, aad: &aad })
        .map_err(|_| SealError::MalformedContainer("encryption failed".into()))?;
    Ok(sealed)
}

/// Decrypts and parses a sealed corpus. On any failure no plaintext is
/// returned.
pub fn open_corpus(sealed: &SealedCorpus, key: &str) -> Result<Corpus, SealError> {
    if sealed.version != SEAL_VERSION {
        return Err(SealError::UnsupportedVersion(sealed.version));
    }
    let derived = derive_key(key, &sealed.salt)?;
    let cipher = XChaCha20Poly1305::new((&derived).into());
    let aad = sealed.header();
    let plaintext = cipher
        .decrypt(XNonce::from_slice(&sealed.nonce), Payload { msg: &sealed.ciphertext, aad: &aad })
        .map_err(|_| SealError::AuthenticationFailure)?;
    Corpus::from_jsonl(&plaintext[..]).map_err(|e| SealError::MalformedContainer(e.to_string()))
}
