//! Hashing and signatures.
//!
//! SHA-256 for digests and Ed25519 (RFC 8032, deterministic) for signatures,
//! fixed project-wide so golden vectors are stable across platforms.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const PUBLIC_KEY_LEN: usize = 32;
pub const SECRET_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;
pub const DIGEST_LEN: usize = 32;

const KEYGEN_DOMAIN: &[u8] = b"epcert/keygen/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("secret key must be {SECRET_KEY_LEN} bytes, got {0}")]
    MalformedSecret(usize),
    #[error("keypair seed must not be empty")]
    EmptySeed,
    #[error("digest needs at least one part")]
    EmptyDigestInput,
    #[error("modulus must be at least 1")]
    ZeroModulus,
}

/// An Ed25519 public key, used on-chain as the subject pseudonym.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(PublicKey)
    }

    pub fn to_hex(&self) -> String {
        to_hex(&self.0)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &self.to_hex()[..16])
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(Signature)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", &to_hex(&self.0[..8]))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0; DIGEST_LEN]);

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        to_hex(&self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

/// Key pair ⟨public, secret⟩ of a subject.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public: PublicKey,
}

impl KeyPair {
    pub fn from_secret(secret: &[u8]) -> Result<Self, CryptoError> {
        let bytes: [u8; SECRET_KEY_LEN] = secret
            .try_into()
            .map_err(|_| CryptoError::MalformedSecret(secret.len()))?;
        let signing = SigningKey::from_bytes(&bytes);
        let public = PublicKey(signing.verifying_key().to_bytes());
        Ok(Self { signing, public })
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn secret(&self) -> [u8; SECRET_KEY_LEN] {
        self.signing.to_bytes()
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public && self.secret() == other.secret()
    }
}

impl Eq for KeyPair {}

/// Deterministic key generation: the secret is the framed digest of the seed.
pub fn generate_keypair(seed: &[u8]) -> Result<KeyPair, CryptoError> {
    if seed.is_empty() {
        return Err(CryptoError::EmptySeed);
    }
    let secret = digest(&[KEYGEN_DOMAIN, seed])?;
    KeyPair::from_secret(secret.as_bytes())
}

pub fn sign(secret: &[u8], message: &[u8]) -> Result<Signature, CryptoError> {
    Ok(KeyPair::from_secret(secret)?.sign(message))
}

/// Strict Ed25519 verification. Malformed keys verify as `false`.
pub fn verify(public: &[u8], message: &[u8], sig: &Signature) -> bool {
    let Ok(bytes) = <[u8; PUBLIC_KEY_LEN]>::try_from(public) else {
        return false;
    };
    let Ok(key) = VerifyingKey::from_bytes(&bytes) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    key.verify_strict(message, &sig).is_ok()
}

/// SHA-256 over `count ‖ (len ‖ part)*`, all lengths as big-endian u64.
///
/// The framing makes `["ab", "c"]` and `["a", "bc"]` hash differently.
pub fn digest<P: AsRef<[u8]>>(parts: &[P]) -> Result<Digest, CryptoError> {
    if parts.is_empty() {
        return Err(CryptoError::EmptyDigestInput);
    }
    let mut hasher = Sha256::new();
    hasher.update((parts.len() as u64).to_be_bytes());
    for part in parts {
        let part = part.as_ref();
        hasher.update((part.len() as u64).to_be_bytes());
        hasher.update(part);
    }
    Ok(Digest(hasher.finalize().into()))
}

/// `d mod n`, reading the digest as a big-endian unsigned integer.
pub fn index_from_digest(d: &Digest, n: u64) -> Result<u64, CryptoError> {
    if n == 0 {
        return Err(CryptoError::ZeroModulus);
    }
    let n = n as u128;
    let rem = d
        .0
        .iter()
        .fold(0u128, |acc, &byte| ((acc << 8) | byte as u128) % n);
    Ok(rem as u64)
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
