//! Node identities backed by secp256k1 key pairs.
//!
//! Every node owns one key pair. The same key signs ledger transactions and
//! the `auth_token` of data requests; the token is a recoverable signature so
//! that a datastore can extract the signer's key from it.

use std::fmt;
use std::str::FromStr;

use k256::ecdsa::{RecoveryId, Signature as EcdsaSignature, SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

/// SHA-256 digest.
pub type Digest = [u8; 32];

pub fn sha256(data: &[u8]) -> Digest {
    Sha256::digest(data).into()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("invalid public key encoding")]
    BadPublicKey,
    #[error("invalid private key encoding")]
    BadPrivateKey,
    #[error("invalid signature encoding")]
    BadSignature,
    #[error("identity has no private key")]
    NoPrivateKey,
}

/// Compressed SEC1 encoding of a secp256k1 verification key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey([u8; 33]);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IdentityError> {
        let key = VerifyingKey::from_sec1_bytes(bytes).map_err(|_| IdentityError::BadPublicKey)?;
        Ok(Self::from_verifying_key(&key))
    }

    fn from_verifying_key(key: &VerifyingKey) -> Self {
        let point = key.to_encoded_point(true);
        let mut out = [0u8; 33];
        out.copy_from_slice(point.as_bytes());
        Self(out)
    }

    pub fn as_bytes(&self) -> &[u8; 33] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Checks a (recoverable or plain) signature over `message`.
    pub fn verify(&self, message: &[u8], signature: &RecoverableSignature) -> bool {
        match signature.recover(message) {
            Ok(key) => key == *self,
            Err(_) => false,
        }
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}..)", &self.to_hex()[..12])
    }
}

impl FromStr for PublicKey {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|_| IdentityError::BadPublicKey)?;
        Self::from_bytes(&bytes)
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// 64-byte compact ECDSA signature followed by a one-byte recovery id.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RecoverableSignature([u8; 65]);

impl RecoverableSignature {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IdentityError> {
        let arr: [u8; 65] = bytes.try_into().map_err(|_| IdentityError::BadSignature)?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; 65] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Extracts the public key that produced this signature over `message`.
    pub fn recover(&self, message: &[u8]) -> Result<PublicKey, IdentityError> {
        let sig = EcdsaSignature::from_slice(&self.0[..64]).map_err(|_| IdentityError::BadSignature)?;
        let rid = RecoveryId::from_byte(self.0[64]).ok_or(IdentityError::BadSignature)?;
        let key = VerifyingKey::recover_from_msg(message, &sig, rid).map_err(|_| IdentityError::BadSignature)?;
        Ok(PublicKey::from_verifying_key(&key))
    }
}

impl fmt::Debug for RecoverableSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sig({}..)", &self.to_hex()[..12])
    }
}

impl Serialize for RecoverableSignature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for RecoverableSignature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        Self::from_bytes(&bytes).map_err(serde::de::Error::custom)
    }
}

/// A node's key pair. Remote identities carry only the public half.
#[derive(Clone)]
pub struct NodeIdentity {
    public_key: PublicKey,
    private_key: Option<SigningKey>,
}

impl NodeIdentity {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self::from_signing_key(SigningKey::random(rng))
    }

    /// Derives a key pair from 32 seed bytes. Used by the simulator so that
    /// node keys are reproducible across runs.
    pub fn from_seed(seed: &[u8]) -> Self {
        let mut material = sha256(seed);
        loop {
            if let Ok(key) = SigningKey::from_slice(&material) {
                return Self::from_signing_key(key);
            }
            material = sha256(&material);
        }
    }

    pub fn from_private_hex(s: &str) -> Result<Self, IdentityError> {
        let bytes = hex::decode(s).map_err(|_| IdentityError::BadPrivateKey)?;
        let key = SigningKey::from_slice(&bytes).map_err(|_| IdentityError::BadPrivateKey)?;
        Ok(Self::from_signing_key(key))
    }

    pub fn public_only(public_key: PublicKey) -> Self {
        Self { public_key, private_key: None }
    }

    fn from_signing_key(key: SigningKey) -> Self {
        Self { public_key: PublicKey::from_verifying_key(key.verifying_key()), private_key: Some(key) }
    }

    pub fn public_key(&self) -> PublicKey {
        self.public_key
    }

    /// Printable identifier, a pure function of the public key.
    pub fn node_id(&self) -> String {
        self.public_key.to_hex()
    }

    pub fn has_private_key(&self) -> bool {
        self.private_key.is_some()
    }

    pub fn private_hex(&self) -> Option<String> {
        self.private_key.as_ref().map(|k| hex::encode(k.to_bytes()))
    }

    pub fn sign(&self, message: &[u8]) -> Result<RecoverableSignature, IdentityError> {
        let key = self.private_key.as_ref().ok_or(IdentityError::NoPrivateKey)?;
        let (sig, rid) = key.sign_recoverable(message).map_err(|_| IdentityError::BadSignature)?;
        let mut out = [0u8; 65];
        out[..64].copy_from_slice(&sig.to_bytes());
        out[64] = rid.to_byte();
        Ok(RecoverableSignature(out))
    }
}

impl PartialEq for NodeIdentity {
    fn eq(&self, other: &Self) -> bool {
        self.public_key == other.public_key
    }
}

impl Eq for NodeIdentity {}

impl fmt::Debug for NodeIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeIdentity").field("public_key", &self.public_key).field("has_private_key", &self.has_private_key()).finish()
    }
}
