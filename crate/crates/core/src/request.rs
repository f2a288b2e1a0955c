//! Data requests sent from a consumer's enclave to a datastore.
//!
//! Wire body: one `name=value` line per field, in the order `url`,
//! `auth_token`, `claim`, `attestation`. Binary values are lowercase hex.

use std::fmt;

use crate::enclave::AttestationQuote;
use crate::identity::{PublicKey, RecoverableSignature};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataRequest {
    pub url: String,
    /// Recoverable signature over the exact url bytes.
    pub auth_token: RecoverableSignature,
    /// Key the sender claims to hold.
    pub claim: PublicKey,
    pub attestation: Option<AttestationQuote>,
}

pub const FIELD_ORDER: [&str; 4] = ["url", "auth_token", "claim", "attestation"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("field {field}: {reason}")]
    BadField { field: &'static str, reason: String },
    #[error("unexpected line {0:?}")]
    UnexpectedLine(String),
}

impl DataRequest {
    pub fn to_wire(&self) -> String {
        let mut out = format!("url={}\nauth_token={}\nclaim={}\n", self.url, self.auth_token.to_hex(), self.claim.to_hex());
        if let Some(q) = &self.attestation {
            out.push_str(&format!("attestation={}\n", hex::encode(q.to_bytes())));
        }
        out
    }

    /// Parses a wire body. An absent or undecodable attestation yields `None`
    /// so the receiver can classify it separately from malformed parameters.
    pub fn from_wire(body: &str) -> Result<Self, WireError> {
        let mut fields: [Option<&str>; 4] = [None; 4];
        let mut next = 0;
        for line in body.lines().filter(|l| !l.is_empty()) {
            let (name, value) = line.split_once('=').ok_or_else(|| WireError::UnexpectedLine(line.to_owned()))?;
            let pos = FIELD_ORDER[next..]
                .iter()
                .position(|f| *f == name)
                .map(|p| p + next)
                .ok_or_else(|| WireError::UnexpectedLine(line.to_owned()))?;
            fields[pos] = Some(value);
            next = pos + 1;
        }
        let url = fields[0].filter(|u| !u.is_empty()).ok_or(WireError::MissingField("url"))?;
        let token = fields[1].ok_or(WireError::MissingField("auth_token"))?;
        let claim = fields[2].ok_or(WireError::MissingField("claim"))?;
        let token_bytes = hex::decode(token).map_err(|e| bad("auth_token", e))?;
        let auth_token = RecoverableSignature::from_bytes(&token_bytes).map_err(|e| bad("auth_token", e))?;
        let claim_bytes = hex::decode(claim).map_err(|e| bad("claim", e))?;
        let claim = PublicKey::from_bytes(&claim_bytes).map_err(|e| bad("claim", e))?;
        let attestation = fields[3].and_then(|a| hex::decode(a).ok()).and_then(|b| AttestationQuote::from_bytes(&b).ok());
        Ok(Self { url: url.to_owned(), auth_token, claim, attestation })
    }
}

fn bad(field: &'static str, e: impl fmt::Display) -> WireError {
    WireError::BadField { field, reason: e.to_string() }
}
