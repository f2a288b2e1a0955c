//! Simulated remote attestation: an authority signs quotes binding an
//! enclave measurement and node key to one request.

use std::collections::BTreeSet;

use crate::identity::{sha256, Digest, NodeIdentity, PublicKey, RecoverableSignature};

pub const SALT_LEN: usize = 16;
pub const QUOTE_LEN: usize = 32 + 33 + 32 + SALT_LEN + 65;

/// Measurement of the genuine trusted application build.
pub fn trusted_app_measurement() -> Digest {
    sha256(b"regov-trusted-application/1")
}

/// Hash a quote commits to for a request on `url`.
pub fn request_hash(salt: &[u8; SALT_LEN], url: &str) -> Digest {
    let mut bytes = salt.to_vec();
    bytes.extend_from_slice(url.as_bytes());
    sha256(&bytes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationQuote {
    pub measurement: Digest,
    pub node_key: PublicKey,
    pub request_hash: Digest,
    pub salt: [u8; SALT_LEN],
    pub authority_signature: RecoverableSignature,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttestationError {
    #[error("quote must be {QUOTE_LEN} bytes, got {0}")]
    BadLength(usize),
    #[error("quote contains an invalid key or signature encoding")]
    BadEncoding,
    #[error("quote is not signed by the attestation authority")]
    BadSignature,
    #[error("enclave measurement is not trusted")]
    UntrustedMeasurement,
    #[error("quote was issued for a different request")]
    RequestMismatch,
}

impl AttestationQuote {
    fn body(measurement: &Digest, node_key: &PublicKey, request_hash: &Digest, salt: &[u8; SALT_LEN]) -> Vec<u8> {
        let mut body = Vec::with_capacity(QUOTE_LEN - 65);
        body.extend_from_slice(measurement);
        body.extend_from_slice(node_key.as_bytes());
        body.extend_from_slice(request_hash);
        body.extend_from_slice(salt);
        body
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Self::body(&self.measurement, &self.node_key, &self.request_hash, &self.salt);
        out.extend_from_slice(self.authority_signature.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AttestationError> {
        if bytes.len() != QUOTE_LEN {
            return Err(AttestationError::BadLength(bytes.len()));
        }
        let (measurement, rest) = bytes.split_at(32);
        let (node_key, rest) = rest.split_at(33);
        let (request_hash, rest) = rest.split_at(32);
        let (salt, signature) = rest.split_at(SALT_LEN);
        Ok(Self {
            measurement: measurement.try_into().expect("split length"),
            node_key: PublicKey::from_bytes(node_key).map_err(|_| AttestationError::BadEncoding)?,
            request_hash: request_hash.try_into().expect("split length"),
            salt: salt.try_into().expect("split length"),
            authority_signature: RecoverableSignature::from_bytes(signature).map_err(|_| AttestationError::BadEncoding)?,
        })
    }
}

/// Issues quotes for enclaves; its public key anchors verification.
#[derive(Debug, Clone)]
pub struct AttestationAuthority {
    identity: NodeIdentity,
}

impl AttestationAuthority {
    pub fn from_seed(seed: &[u8]) -> Self {
        Self { identity: NodeIdentity::from_seed(seed) }
    }

    pub fn public_key(&self) -> PublicKey {
        self.identity.public_key()
    }

    pub fn issue(&self, measurement: Digest, node_key: PublicKey, request_hash: Digest, salt: [u8; SALT_LEN]) -> AttestationQuote {
        let body = AttestationQuote::body(&measurement, &node_key, &request_hash, &salt);
        let authority_signature = self.identity.sign(&body).expect("authority holds its private key");
        AttestationQuote { measurement, node_key, request_hash, salt, authority_signature }
    }

    pub fn verifier(&self) -> QuoteVerifier {
        QuoteVerifier::new(self.public_key(), [trusted_app_measurement()])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuoteVerifier {
    authority: PublicKey,
    trusted: BTreeSet<Digest>,
}

impl QuoteVerifier {
    pub fn new(authority: PublicKey, trusted: impl IntoIterator<Item = Digest>) -> Self {
        Self { authority, trusted: trusted.into_iter().collect() }
    }

    /// Checks the authority signature, the measurement and the binding to `url`.
    pub fn verify(&self, quote: &AttestationQuote, url: &str) -> Result<(), AttestationError> {
        let body = AttestationQuote::body(&quote.measurement, &quote.node_key, &quote.request_hash, &quote.salt);
        if !self.authority.verify(&body, &quote.authority_signature) {
            return Err(AttestationError::BadSignature);
        }
        if !self.trusted.contains(&quote.measurement) {
            return Err(AttestationError::UntrustedMeasurement);
        }
        if request_hash(&quote.salt, url) != quote.request_hash {
            return Err(AttestationError::RequestMismatch);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quote(authority: &AttestationAuthority, measurement: Digest, url: &str) -> AttestationQuote {
        let salt = [3u8; SALT_LEN];
        authority.issue(measurement, NodeIdentity::from_seed(b"alice").public_key(), request_hash(&salt, url), salt)
    }

    #[test]
    fn genuine_quote_verifies_and_round_trips() {
        let ca = AttestationAuthority::from_seed(b"ca");
        let q = quote(&ca, trusted_app_measurement(), "https://BobNode.com/x");
        assert_eq!(ca.verifier().verify(&q, "https://BobNode.com/x"), Ok(()));
        assert_eq!(AttestationQuote::from_bytes(&q.to_bytes()).unwrap(), q);
        assert_eq!(q.to_bytes().len(), QUOTE_LEN);
    }

    #[test]
    fn rejections() {
        let ca = AttestationAuthority::from_seed(b"ca");
        let url = "https://BobNode.com/x";
        let rogue = quote(&ca, sha256(b"modified build"), url);
        assert_eq!(ca.verifier().verify(&rogue, url), Err(AttestationError::UntrustedMeasurement));
        let q = quote(&ca, trusted_app_measurement(), url);
        assert_eq!(ca.verifier().verify(&q, "https://BobNode.com/y"), Err(AttestationError::RequestMismatch));
        let forged = quote(&AttestationAuthority::from_seed(b"mallory"), trusted_app_measurement(), url);
        assert_eq!(ca.verifier().verify(&forged, url), Err(AttestationError::BadSignature));
        let mut tampered = q.clone();
        tampered.node_key = NodeIdentity::from_seed(b"eve").public_key();
        assert_eq!(ca.verifier().verify(&tampered, url), Err(AttestationError::BadSignature));
        assert_eq!(AttestationQuote::from_bytes(&[0; 3]), Err(AttestationError::BadLength(3)));
    }
}
