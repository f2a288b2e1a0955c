//! Authenticated encryption of stored resources and the at-rest image format.
//!
//! Image layout (all integers big-endian):
//!
//! ```text
//! magic "RGVSEAL\0" | version u16 | record count u32
//! per record: resource id u64 | length u32 | nonce (12) || ciphertext
//! ```
//!
//! The resource id is bound to each ciphertext as associated data, so moving
//! a record under another id fails authentication like any other tampering.

use std::collections::BTreeMap;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::policy::UsagePolicy;

pub const IMAGE_MAGIC: &[u8; 8] = b"RGVSEAL\0";
pub const IMAGE_VERSION: u16 = 1;
const NONCE_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SealError {
    #[error("sealed record for resource {0} failed authentication")]
    Integrity(u64),
    #[error("malformed storage image: {0}")]
    MalformedImage(String),
    #[error("unsupported storage image version {0}")]
    UnsupportedVersion(u16),
}

/// Remaining opens for a stored object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Remaining {
    Limited(u64),
    /// No access-counter rule applies.
    Unlimited,
}

impl Remaining {
    pub fn from_policy(policy: &UsagePolicy) -> Self {
        policy.access_counter().map_or(Remaining::Unlimited, Remaining::Limited)
    }
}

impl std::fmt::Display for Remaining {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Remaining::Limited(n) => write!(f, "{n}"),
            Remaining::Unlimited => f.write_str("unlimited"),
        }
    }
}

/// Plaintext of a sealed object; exists only inside the enclave.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct ObjectState {
    pub payload: Vec<u8>,
    pub policy: UsagePolicy,
    pub retrieved_at: u64,
    pub remaining: Remaining,
}

pub(crate) struct SealingKey(Key);

impl SealingKey {
    pub fn generate<R: RngCore>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        Self(Key::from(bytes))
    }

    fn cipher(&self) -> ChaCha20Poly1305 {
        ChaCha20Poly1305::new(&self.0)
    }

    pub fn seal<R: RngCore>(&self, rng: &mut R, resource_id: u64, state: &ObjectState) -> SealedObject {
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        let plaintext = serde_json::to_vec(state).expect("object state always encodes");
        let aad = resource_id.to_be_bytes();
        let ciphertext = self
            .cipher()
            .encrypt(Nonce::from_slice(&nonce), Payload { msg: &plaintext, aad: &aad })
            .expect("encryption with a valid key cannot fail");
        SealedObject { resource_id, nonce, ciphertext }
    }

    pub fn unseal(&self, object: &SealedObject) -> Result<ObjectState, SealError> {
        let aad = object.resource_id.to_be_bytes();
        let plaintext = self
            .cipher()
            .decrypt(Nonce::from_slice(&object.nonce), Payload { msg: &object.ciphertext, aad: &aad })
            .map_err(|_| SealError::Integrity(object.resource_id))?;
        serde_json::from_slice(&plaintext).map_err(|_| SealError::Integrity(object.resource_id))
    }
}

impl std::fmt::Debug for SealingKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SealingKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedObject {
    pub resource_id: u64,
    pub nonce: [u8; NONCE_LEN],
    pub ciphertext: Vec<u8>,
}

impl SealedObject {
    fn body_len(&self) -> usize {
        NONCE_LEN + self.ciphertext.len()
    }

    /// Flips one bit of the record body (nonce followed by ciphertext).
    pub fn flip_bit(&mut self, bit: usize) {
        let byte = (bit / 8) % self.body_len();
        let mask = 1u8 << (bit % 8);
        if byte < NONCE_LEN {
            self.nonce[byte] ^= mask;
        } else {
            self.ciphertext[byte - NONCE_LEN] ^= mask;
        }
    }

    pub fn bit_len(&self) -> usize {
        self.body_len() * 8
    }
}

/// Sealed records as held by the untrusted host.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SealedStore {
    records: BTreeMap<u64, SealedObject>,
}

impl SealedStore {
    pub fn get(&self, resource_id: u64) -> Option<&SealedObject> {
        self.records.get(&resource_id)
    }

    pub fn get_mut(&mut self, resource_id: u64) -> Option<&mut SealedObject> {
        self.records.get_mut(&resource_id)
    }

    pub fn contains(&self, resource_id: u64) -> bool {
        self.records.contains_key(&resource_id)
    }

    pub fn ids(&self) -> Vec<u64> {
        self.records.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub(crate) fn insert(&mut self, object: SealedObject) {
        self.records.insert(object.resource_id, object);
    }

    pub(crate) fn remove(&mut self, resource_id: u64) -> Option<SealedObject> {
        self.records.remove(&resource_id)
    }

    pub fn to_image(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(IMAGE_MAGIC);
        out.extend_from_slice(&IMAGE_VERSION.to_be_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_be_bytes());
        for r in self.records.values() {
            out.extend_from_slice(&r.resource_id.to_be_bytes());
            out.extend_from_slice(&(r.body_len() as u32).to_be_bytes());
            out.extend_from_slice(&r.nonce);
            out.extend_from_slice(&r.ciphertext);
        }
        out
    }

    pub fn from_image(bytes: &[u8]) -> Result<Self, SealError> {
        let mut cur = Cursor { bytes, at: 0 };
        if cur.take(IMAGE_MAGIC.len())? != IMAGE_MAGIC {
            return Err(SealError::MalformedImage("bad magic".into()));
        }
        let version = u16::from_be_bytes(cur.array()?);
        if version != IMAGE_VERSION {
            return Err(SealError::UnsupportedVersion(version));
        }
        let count = u32::from_be_bytes(cur.array()?);
        let mut records = BTreeMap::new();
        for _ in 0..count {
            let resource_id = u64::from_be_bytes(cur.array()?);
            let len = u32::from_be_bytes(cur.array()?) as usize;
            if len < NONCE_LEN {
                return Err(SealError::MalformedImage(format!("record {resource_id} shorter than its nonce")));
            }
            let body = cur.take(len)?;
            let nonce: [u8; NONCE_LEN] = body[..NONCE_LEN].try_into().expect("length checked");
            let object = SealedObject { resource_id, nonce, ciphertext: body[NONCE_LEN..].to_vec() };
            if records.insert(resource_id, object).is_some() {
                return Err(SealError::MalformedImage(format!("duplicate record {resource_id}")));
            }
        }
        if cur.at != bytes.len() {
            return Err(SealError::MalformedImage("trailing bytes".into()));
        }
        Ok(Self { records })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SealError> {
        let end = self.at.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| SealError::MalformedImage(format!("truncated at byte {}", self.at)))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], SealError> {
        Ok(self.take(N)?.try_into().expect("take returns exactly N bytes"))
    }
}
