//! File-backed ledger: every accepted transaction and every empty block is
//! appended to a JSON-lines journal, and opening the file replays it.
//! Replay is exact because execution is deterministic.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Address, Chain, ContractHost, Event, Ledger, LedgerError, Receipt, Transaction, Value};
use crate::identity::PublicKey;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Entry {
    Tx(Transaction),
    EmptyBlock,
}

#[derive(Debug)]
pub struct JournaledLedger<H: ContractHost> {
    ledger: Ledger<H>,
    path: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LedgerError {
    LedgerError::Journal(format!("{}: {e}", path.display()))
}

impl<H: ContractHost> JournaledLedger<H> {
    /// Replays `path` on top of `ledger`, which must be fresh. A missing file is an empty journal.
    pub fn open(mut ledger: Ledger<H>, path: impl Into<PathBuf>) -> Result<Self, LedgerError> {
        let path = path.into();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&path, e)),
        };
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let entry: Entry = serde_json::from_str(line).map_err(|e| io_err(&path, format!("line {}: {e}", i + 1)))?;
            match entry {
                Entry::Tx(tx) => {
                    ledger.submit(tx).map_err(|e| io_err(&path, format!("line {} no longer applies: {e}", i + 1)))?;
                }
                Entry::EmptyBlock => ledger.mine_empty_block(),
            }
        }
        Ok(Self { ledger, path })
    }

    pub fn ledger(&self) -> &Ledger<H> {
        &self.ledger
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn append(&self, entry: &Entry) -> Result<(), LedgerError> {
        let mut line = serde_json::to_string(entry).expect("journal entries encode");
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(|e| io_err(&self.path, e))?;
        f.write_all(line.as_bytes()).and_then(|_| f.sync_data()).map_err(|e| io_err(&self.path, e))
    }

    pub fn mine_empty_block(&mut self) -> Result<(), LedgerError> {
        self.append(&Entry::EmptyBlock)?;
        self.ledger.mine_empty_block();
        Ok(())
    }
}

impl<H: ContractHost> Chain for JournaledLedger<H> {
    fn submit(&mut self, tx: Transaction) -> Result<Receipt, LedgerError> {
        let receipt = self.ledger.submit(tx.clone())?;
        self.append(&Entry::Tx(tx))?;
        Ok(receipt)
    }

    fn call(&self, address: Address, function: &str, args: &[Value]) -> Result<Value, LedgerError> {
        self.ledger.call(address, function, args)
    }

    fn next_nonce(&self, account: &PublicKey) -> u64 {
        self.ledger.next_nonce(account)
    }

    fn events_since(&self, cursor: u64) -> Vec<Event> {
        self.ledger.events_since(cursor)
    }

    fn block_height(&self) -> u64 {
        self.ledger.block_height()
    }
}
