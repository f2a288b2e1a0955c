//! Flat per-function gas costs keyed by `ContractKind.functionName`.
//!
//! Config files are TOML with one table per contract kind:
//!
//! ```toml
//! [DTindexing]
//! deployment = 4824135
//! registerPod = 2703393
//! ```

use std::collections::BTreeMap;

use super::{FunctionSpec, Mutability};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GasTableError {
    #[error("gas table key {0:?} names no contract function")]
    UnknownKey(String),
    #[error("gas table key {0:?} is a read function; reads cost 0")]
    ReadKey(String),
    #[error("gas table value for {0:?} is not a non-negative integer")]
    BadValue(String),
    #[error("gas table has no entry for write function {0:?}")]
    MissingEntry(String),
    #[error("gas table is not valid TOML: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GasTable {
    entries: BTreeMap<String, u64>,
}

pub fn gas_key(kind: &str, function: &str) -> String {
    format!("{kind}.{function}")
}

impl GasTable {
    pub fn new<I, K>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, u64)>,
        K: Into<String>,
    {
        Self { entries: entries.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }

    /// Cost of `kind.function`; read functions and unlisted keys cost 0.
    pub fn cost(&self, kind: &str, function: &str) -> u64 {
        self.entries.get(&gas_key(kind, function)).copied().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Every write function in `abi` must be priced and no key may fall outside it.
    pub fn validate(&self, abi: &[FunctionSpec]) -> Result<(), GasTableError> {
        for key in self.entries.keys() {
            match abi.iter().find(|f| gas_key(f.kind, f.name) == *key) {
                None => return Err(GasTableError::UnknownKey(key.clone())),
                Some(f) if f.mutability == Mutability::Read => return Err(GasTableError::ReadKey(key.clone())),
                Some(_) => {}
            }
        }
        for f in abi.iter().filter(|f| f.mutability == Mutability::Write) {
            let key = gas_key(f.kind, f.name);
            if !self.entries.contains_key(&key) {
                return Err(GasTableError::MissingEntry(key));
            }
        }
        Ok(())
    }

    /// Applies the entries of a TOML config on top of this table.
    pub fn with_overrides(mut self, toml_text: &str, abi: &[FunctionSpec]) -> Result<Self, GasTableError> {
        let doc: toml::Table = toml_text.parse().map_err(|e: toml::de::Error| GasTableError::Parse(e.to_string()))?;
        for (kind, functions) in doc {
            let Some(functions) = functions.as_table() else {
                return Err(GasTableError::UnknownKey(kind));
            };
            for (function, value) in functions {
                let key = gas_key(&kind, function);
                if !abi.iter().any(|f| f.kind == kind && f.name == function) {
                    return Err(GasTableError::UnknownKey(key));
                }
                let cost = value.as_integer().and_then(|v| u64::try_from(v).ok()).ok_or_else(|| GasTableError::BadValue(key.clone()))?;
                self.entries.insert(key, cost);
            }
        }
        self.validate(abi)?;
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        let mut by_kind: BTreeMap<&str, Vec<(&str, u64)>> = BTreeMap::new();
        for (key, cost) in &self.entries {
            let (kind, function) = key.split_once('.').expect("gas keys contain a dot");
            by_kind.entry(kind).or_default().push((function, *cost));
        }
        let mut out = String::new();
        for (kind, functions) in by_kind {
            out.push_str(&format!("[{kind}]\n"));
            for (function, cost) in functions {
                out.push_str(&format!("{function} = {cost}\n"));
            }
            out.push('\n');
        }
        out
    }
}
