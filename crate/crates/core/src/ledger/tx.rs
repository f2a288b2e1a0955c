use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;

use crate::identity::{sha256, Digest, IdentityError, NodeIdentity, PublicKey, RecoverableSignature};

/// Argument and return value of contract functions.
pub type Value = serde_json::Value;

/// Gas-table function name used for contract deployment.
pub const DEPLOY: &str = "deployment";

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address([u8; 20]);

impl Address {
    /// The `n`-th address handed out by a ledger.
    pub(crate) fn derive(n: u64) -> Self {
        let mut material = b"regov-contract-address".to_vec();
        material.extend_from_slice(&n.to_be_bytes());
        let digest = sha256(&material);
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[..20]);
        Self(out)
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.0))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", &self.to_hex()[..10])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid address {0:?}")]
pub struct AddressParseError(pub String);

impl FromStr for Address {
    type Err = AddressParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.strip_prefix("0x").unwrap_or(s);
        let bytes = hex::decode(body).map_err(|_| AddressParseError(s.to_owned()))?;
        let arr: [u8; 20] = bytes.try_into().map_err(|_| AddressParseError(s.to_owned()))?;
        Ok(Self(arr))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Deploy { kind: String },
    Contract(Address),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: PublicKey,
    pub target: Target,
    pub function: String,
    pub args: Vec<Value>,
    pub nonce: u64,
    pub signature: RecoverableSignature,
}

impl Transaction {
    /// Canonical bytes covered by the signature.
    pub fn signing_bytes(sender: &PublicKey, target: &Target, function: &str, args: &[Value], nonce: u64) -> Vec<u8> {
        // serde_json maps are key-sorted, so this encoding is canonical.
        serde_json::to_vec(&json!({
            "sender": sender,
            "target": target,
            "function": function,
            "args": args,
            "nonce": nonce,
        }))
        .expect("transaction fields always encode")
    }

    pub fn signed(
        identity: &NodeIdentity,
        target: Target,
        function: impl Into<String>,
        args: Vec<Value>,
        nonce: u64,
    ) -> Result<Self, IdentityError> {
        let sender = identity.public_key();
        let function = function.into();
        let signature = identity.sign(&Self::signing_bytes(&sender, &target, &function, &args, nonce))?;
        Ok(Self { sender, target, function, args, nonce, signature })
    }

    pub fn deploy(identity: &NodeIdentity, kind: &str, init_args: Vec<Value>, nonce: u64) -> Result<Self, IdentityError> {
        Self::signed(identity, Target::Deploy { kind: kind.to_owned() }, DEPLOY, init_args, nonce)
    }

    pub fn call(identity: &NodeIdentity, address: Address, function: &str, args: Vec<Value>, nonce: u64) -> Result<Self, IdentityError> {
        Self::signed(identity, Target::Contract(address), function, args, nonce)
    }

    pub fn verify_signature(&self) -> bool {
        let bytes = Self::signing_bytes(&self.sender, &self.target, &self.function, &self.args, self.nonce);
        self.sender.verify(&bytes, &self.signature)
    }

    pub fn hash(&self) -> Digest {
        let mut bytes = Self::signing_bytes(&self.sender, &self.target, &self.function, &self.args, self.nonce);
        bytes.extend_from_slice(self.signature.as_bytes());
        sha256(&bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxStatus {
    Ok,
    Reverted(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub contract: Address,
    pub name: String,
    pub payload: Value,
    pub sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    #[serde(with = "hex_digest")]
    pub tx_hash: Digest,
    pub sender: PublicKey,
    /// Contract kind and function the gas was charged for.
    pub kind: String,
    pub function: String,
    pub status: TxStatus,
    pub gas_charged: u64,
    pub emitted: Vec<Event>,
    pub block_index: u64,
    /// Return value of the function, or the new address for deployments.
    pub output: Value,
}

impl Receipt {
    pub fn is_ok(&self) -> bool {
        self.status == TxStatus::Ok
    }

    pub fn revert_reason(&self) -> Option<&str> {
        match &self.status {
            TxStatus::Ok => None,
            TxStatus::Reverted(r) => Some(r),
        }
    }

    pub fn event(&self, name: &str) -> Option<&Event> {
        self.emitted.iter().find(|e| e.name == name)
    }
}

mod hex_digest {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(s).map_err(serde::de::Error::custom)?;
        bytes.try_into().map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))
    }
}
