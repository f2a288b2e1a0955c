//! Deterministic single-node blockchain substitute.
//!
//! Transactions commit one per block, in arrival order, with instant finality.
//! Contract state lives in a [`ContractHost`]; the ledger verifies
//! signatures and nonces, executes each transaction atomically against a
//! snapshot, charges the flat gas cost from its [`GasTable`] (also on revert)
//! and appends emitted events to a totally ordered log.

mod gas;
mod journal;
mod tx;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

pub use gas::{gas_key, GasTable, GasTableError};
pub use journal::JournaledLedger;
pub use tx::{Address, AddressParseError, Event, Receipt, Target, Transaction, TxStatus, Value, DEPLOY};

use crate::identity::{NodeIdentity, PublicKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutability {
    Read,
    Write,
}

/// One entry of a contract kind's ABI. Deployments use the name [`DEPLOY`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionSpec {
    pub kind: &'static str,
    pub name: &'static str,
    pub mutability: Mutability,
}

/// Contract-level failure; rolls back the whole transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Revert(pub String);

impl Revert {
    pub fn new(reason: impl Into<String>) -> Self {
        Self(reason.into())
    }
}

impl fmt::Display for Revert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("transaction signature does not verify against its sender")]
    BadSignature,
    #[error("nonce {got} is not above the last used nonce (next is {next})")]
    BadNonce { next: u64, got: u64 },
    #[error("no contract at {0}")]
    UnknownAddress(Address),
    #[error("unknown contract kind {0:?}")]
    UnknownKind(String),
    #[error("{kind} has no {surface} function {function:?}")]
    UnknownFunction { kind: String, function: String, surface: &'static str },
    #[error("call reverted: {0}")]
    Reverted(String),
    #[error("ledger unreachable")]
    Unavailable,
    #[error("cannot sign transaction: {0}")]
    Signing(String),
    #[error(transparent)]
    GasTable(#[from] GasTableError),
    #[error("journal {0}")]
    Journal(String),
}

/// Execution context handed to contracts for one transaction.
#[derive(Debug)]
pub struct ExecContext {
    sender: PublicKey,
    block_index: u64,
    next_address: u64,
    events: Vec<(Address, String, Value)>,
}

impl ExecContext {
    pub fn sender(&self) -> PublicKey {
        self.sender
    }

    pub fn block_index(&self) -> u64 {
        self.block_index
    }

    pub fn allocate_address(&mut self) -> Address {
        let address = Address::derive(self.next_address);
        self.next_address += 1;
        address
    }

    pub fn emit(&mut self, contract: Address, name: &str, payload: Value) {
        self.events.push((contract, name.to_owned(), payload));
    }
}

/// The contract state machine hosted by a ledger.
pub trait ContractHost: Clone + PartialEq + fmt::Debug {
    fn abi() -> &'static [FunctionSpec];

    fn kind_of(&self, address: &Address) -> Option<&'static str>;

    fn deploy(&mut self, ctx: &mut ExecContext, kind: &str, args: &[Value]) -> Result<Address, Revert>;

    fn execute(&mut self, ctx: &mut ExecContext, address: Address, function: &str, args: &[Value]) -> Result<Value, Revert>;

    fn query(&self, block_height: u64, address: Address, function: &str, args: &[Value]) -> Result<Value, Revert>;

    /// Called before each transaction. The default hands the ledger a full
    /// copy to restore on revert; hosts that record their own writes return
    /// [`Checkpoint::Journal`] and implement [`rollback`](Self::rollback).
    fn checkpoint(&mut self) -> Checkpoint<Self> {
        Checkpoint::Copy(self.clone())
    }

    /// Ends a journaled transaction, keeping its writes.
    fn commit(&mut self) {}

    /// Undoes every write since the last journaled checkpoint.
    fn rollback(&mut self) {
        unreachable!("host never returns Checkpoint::Journal")
    }
}

pub enum Checkpoint<H> {
    Copy(H),
    Journal,
}

/// What off-chain components need from a ledger.
pub trait Chain {
    fn submit(&mut self, tx: Transaction) -> Result<Receipt, LedgerError>;
    fn call(&self, address: Address, function: &str, args: &[Value]) -> Result<Value, LedgerError>;
    fn next_nonce(&self, account: &PublicKey) -> u64;
    fn events_since(&self, cursor: u64) -> Vec<Event>;
    fn block_height(&self) -> u64;
}

/// Signs and submits transactions for one account.
pub trait Submitter {
    fn account(&self) -> PublicKey;

    fn submit_as<C: Chain + ?Sized>(&self, chain: &mut C, target: Target, function: &str, args: Vec<Value>)
        -> Result<Receipt, LedgerError>;
}

/// Plain identities sign with whatever nonce the chain expects next.
impl Submitter for NodeIdentity {
    fn account(&self) -> PublicKey {
        self.public_key()
    }

    fn submit_as<C: Chain + ?Sized>(
        &self,
        chain: &mut C,
        target: Target,
        function: &str,
        args: Vec<Value>,
    ) -> Result<Receipt, LedgerError> {
        let nonce = chain.next_nonce(&self.public_key());
        let tx = Transaction::signed(self, target, function, args, nonce).map_err(|e| LedgerError::Signing(e.to_string()))?;
        chain.submit(tx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ledger<H: ContractHost> {
    host: H,
    gas: GasTable,
    next_nonce: BTreeMap<PublicKey, u64>,
    receipts: Vec<Receipt>,
    events: Vec<Event>,
    height: u64,
    next_address: u64,
    gas_by_account: BTreeMap<PublicKey, u64>,
}

impl<H: ContractHost> Ledger<H> {
    pub fn new(host: H, gas: GasTable) -> Result<Self, LedgerError> {
        gas.validate(H::abi())?;
        Ok(Self {
            host,
            gas,
            next_nonce: BTreeMap::new(),
            receipts: Vec::new(),
            events: Vec::new(),
            height: 0,
            next_address: 0,
            gas_by_account: BTreeMap::new(),
        })
    }

    pub fn host(&self) -> &H {
        &self.host
    }

    pub fn gas_table(&self) -> &GasTable {
        &self.gas
    }

    pub fn receipts(&self) -> &[Receipt] {
        &self.receipts
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn last_sequence(&self) -> u64 {
        self.events.last().map_or(0, |e| e.sequence)
    }

    pub fn gas_spent(&self, account: &PublicKey) -> u64 {
        self.gas_by_account.get(account).copied().unwrap_or(0)
    }

    pub fn total_gas(&self) -> u64 {
        self.receipts.iter().map(|r| r.gas_charged).sum()
    }

    /// Closes a block that carries no transaction.
    pub fn mine_empty_block(&mut self) {
        self.height += 1;
    }

    fn spec(&self, kind: &str, function: &str) -> Option<&'static FunctionSpec> {
        H::abi().iter().find(|f| f.kind == kind && f.name == function)
    }

    fn resolve(&self, tx: &Transaction) -> Result<&'static str, LedgerError> {
        let kind = match &tx.target {
            Target::Deploy { kind } => {
                return self.spec(kind, DEPLOY).map(|f| f.kind).ok_or_else(|| LedgerError::UnknownKind(kind.clone()));
            }
            Target::Contract(address) => self.host.kind_of(address).ok_or(LedgerError::UnknownAddress(*address))?,
        };
        match self.spec(kind, &tx.function) {
            Some(f) if f.mutability == Mutability::Write && f.name != DEPLOY => Ok(kind),
            _ => Err(LedgerError::UnknownFunction { kind: kind.to_owned(), function: tx.function.clone(), surface: "write" }),
        }
    }

    pub fn submit(&mut self, tx: Transaction) -> Result<Receipt, LedgerError> {
        if !tx.verify_signature() {
            return Err(LedgerError::BadSignature);
        }
        let next = self.next_nonce(&tx.sender);
        if tx.nonce < next {
            return Err(LedgerError::BadNonce { next, got: tx.nonce });
        }
        let kind = self.resolve(&tx)?;

        let checkpoint = self.host.checkpoint();
        let mut ctx = ExecContext { sender: tx.sender, block_index: self.height, next_address: self.next_address, events: Vec::new() };
        let outcome = match &tx.target {
            Target::Deploy { kind } => self.host.deploy(&mut ctx, kind, &tx.args).map(|address| Value::String(address.to_hex())),
            Target::Contract(address) => self.host.execute(&mut ctx, *address, &tx.function, &tx.args),
        };

        let gas_charged = self.gas.cost(kind, &tx.function);
        self.next_nonce.insert(tx.sender, tx.nonce + 1);
        *self.gas_by_account.entry(tx.sender).or_default() += gas_charged;

        let (status, output, emitted) = match outcome {
            Ok(output) => {
                self.host.commit();
                self.next_address = ctx.next_address;
                let mut sequence = self.last_sequence();
                let emitted: Vec<Event> = ctx
                    .events
                    .into_iter()
                    .map(|(contract, name, payload)| {
                        sequence += 1;
                        Event { contract, name, payload, sequence }
                    })
                    .collect();
                self.events.extend(emitted.iter().cloned());
                (TxStatus::Ok, output, emitted)
            }
            Err(Revert(reason)) => {
                match checkpoint {
                    Checkpoint::Copy(h) => self.host = h,
                    Checkpoint::Journal => self.host.rollback(),
                }
                (TxStatus::Reverted(reason), Value::Null, Vec::new())
            }
        };

        let receipt = Receipt {
            tx_hash: tx.hash(),
            sender: tx.sender,
            kind: kind.to_owned(),
            function: tx.function,
            status,
            gas_charged,
            emitted,
            block_index: self.height,
            output,
        };
        self.height += 1;
        self.receipts.push(receipt.clone());
        Ok(receipt)
    }

    pub fn call(&self, address: Address, function: &str, args: &[Value]) -> Result<Value, LedgerError> {
        let kind = self.host.kind_of(&address).ok_or(LedgerError::UnknownAddress(address))?;
        match self.spec(kind, function) {
            Some(f) if f.mutability == Mutability::Read => {}
            _ => return Err(LedgerError::UnknownFunction { kind: kind.to_owned(), function: function.to_owned(), surface: "read-only" }),
        }
        self.host.query(self.height, address, function, args).map_err(|Revert(r)| LedgerError::Reverted(r))
    }

    pub fn events_since(&self, cursor: u64) -> Vec<Event> {
        // Sequences are dense and start at 1.
        let start = usize::try_from(cursor).unwrap_or(usize::MAX).min(self.events.len());
        self.events[start..].to_vec()
    }

    pub fn next_nonce(&self, account: &PublicKey) -> u64 {
        self.next_nonce.get(account).copied().unwrap_or(0)
    }

    pub fn block_height(&self) -> u64 {
        self.height
    }

    /// Line-delimited JSON, one event per line.
    pub fn export_events(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events always encode"));
            out.push('\n');
        }
        out
    }

    /// One line per receipt followed by per-account totals.
    pub fn gas_report(&self) -> String {
        let mut out = String::new();
        for r in &self.receipts {
            let status = match &r.status {
                TxStatus::Ok => "ok".to_owned(),
                TxStatus::Reverted(reason) => format!("reverted({reason})"),
            };
            out.push_str(&format!(
                "block={} sender={} call={}.{} gas={} status={}\n",
                r.block_index,
                &r.sender.to_hex()[..16],
                r.kind,
                r.function,
                r.gas_charged,
                status
            ));
        }
        for (account, gas) in &self.gas_by_account {
            out.push_str(&format!("total sender={} gas={}\n", &account.to_hex()[..16], gas));
        }
        out.push_str(&format!("total all gas={}\n", self.total_gas()));
        out
    }
}

impl<H: ContractHost> Chain for Ledger<H> {
    fn submit(&mut self, tx: Transaction) -> Result<Receipt, LedgerError> {
        Ledger::submit(self, tx)
    }

    fn call(&self, address: Address, function: &str, args: &[Value]) -> Result<Value, LedgerError> {
        Ledger::call(self, address, function, args)
    }

    fn next_nonce(&self, account: &PublicKey) -> u64 {
        Ledger::next_nonce(self, account)
    }

    fn events_since(&self, cursor: u64) -> Vec<Event> {
        Ledger::events_since(self, cursor)
    }

    fn block_height(&self) -> u64 {
        Ledger::block_height(self)
    }
}

/// Thread-safe handle: submissions serialize on one lock in arrival order.
#[derive(Debug)]
pub struct SharedLedger<H: ContractHost>(Arc<Mutex<Ledger<H>>>);

impl<H: ContractHost> Clone for SharedLedger<H> {
    fn clone(&self) -> Self {
        Self(Arc::clone(&self.0))
    }
}

impl<H: ContractHost> SharedLedger<H> {
    pub fn new(ledger: Ledger<H>) -> Self {
        Self(Arc::new(Mutex::new(ledger)))
    }

    pub fn with<R>(&self, f: impl FnOnce(&Ledger<H>) -> R) -> R {
        f(&self.0.lock().expect("ledger lock poisoned"))
    }
}

impl<H: ContractHost> Chain for SharedLedger<H> {
    fn submit(&mut self, tx: Transaction) -> Result<Receipt, LedgerError> {
        self.0.lock().expect("ledger lock poisoned").submit(tx)
    }

    fn call(&self, address: Address, function: &str, args: &[Value]) -> Result<Value, LedgerError> {
        self.with(|l| l.call(address, function, args))
    }

    fn next_nonce(&self, account: &PublicKey) -> u64 {
        self.with(|l| l.next_nonce(account))
    }

    fn events_since(&self, cursor: u64) -> Vec<Event> {
        self.with(|l| l.events_since(cursor))
    }

    fn block_height(&self) -> u64 {
        self.with(|l| l.block_height())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::NodeIdentity;
    use serde_json::json;

    /// Minimal key/value contract for exercising the ledger alone.
    #[derive(Debug, Clone, PartialEq, Default)]
    struct Store {
        contracts: BTreeMap<Address, BTreeMap<String, i64>>,
    }

    const ABI: &[FunctionSpec] = &[
        FunctionSpec { kind: "Store", name: DEPLOY, mutability: Mutability::Write },
        FunctionSpec { kind: "Store", name: "put", mutability: Mutability::Write },
        FunctionSpec { kind: "Store", name: "get", mutability: Mutability::Read },
    ];

    impl ContractHost for Store {
        fn abi() -> &'static [FunctionSpec] {
            ABI
        }

        fn kind_of(&self, address: &Address) -> Option<&'static str> {
            self.contracts.contains_key(address).then_some("Store")
        }

        fn deploy(&mut self, ctx: &mut ExecContext, _kind: &str, _args: &[Value]) -> Result<Address, Revert> {
            let address = ctx.allocate_address();
            self.contracts.insert(address, BTreeMap::new());
            Ok(address)
        }

        fn execute(&mut self, ctx: &mut ExecContext, address: Address, _function: &str, args: &[Value]) -> Result<Value, Revert> {
            let key = args[0].as_str().unwrap().to_owned();
            let value = args[1].as_i64().unwrap();
            self.contracts.get_mut(&address).unwrap().insert(key.clone(), value);
            ctx.emit(address, "Put", json!({ "key": key }));
            if value < 0 {
                return Err(Revert::new("negative"));
            }
            Ok(Value::Null)
        }

        fn query(&self, _h: u64, address: Address, _function: &str, args: &[Value]) -> Result<Value, Revert> {
            let key = args[0].as_str().unwrap();
            Ok(json!(self.contracts[&address].get(key)))
        }
    }

    fn ledger() -> Ledger<Store> {
        Ledger::new(Store::default(), GasTable::new([("Store.deployment", 100), ("Store.put", 7)])).unwrap()
    }

    fn deploy(l: &mut Ledger<Store>, who: &NodeIdentity) -> Address {
        let n = l.next_nonce(&who.public_key());
        let r = l.submit(Transaction::deploy(who, "Store", vec![], n).unwrap()).unwrap();
        r.output.as_str().unwrap().parse().unwrap()
    }

    fn put(l: &mut Ledger<Store>, who: &NodeIdentity, at: Address, k: &str, v: i64) -> Receipt {
        let n = l.next_nonce(&who.public_key());
        l.submit(Transaction::call(who, at, "put", vec![json!(k), json!(v)], n).unwrap()).unwrap()
    }

    #[test]
    fn deploy_charges_table_and_gives_fresh_addresses() {
        let mut l = ledger();
        let alice = NodeIdentity::from_seed(b"alice");
        let a = deploy(&mut l, &alice);
        let b = deploy(&mut l, &alice);
        assert_ne!(a, b);
        assert_eq!(l.gas_spent(&alice.public_key()), 200);
    }

    #[test]
    fn corrupted_signature_rejected_without_state_change() {
        let mut l = ledger();
        let alice = NodeIdentity::from_seed(b"alice");
        let mut tx = Transaction::deploy(&alice, "Store", vec![], 0).unwrap();
        tx.nonce = 5;
        let before = l.clone();
        assert_eq!(l.submit(tx), Err(LedgerError::BadSignature));
        assert_eq!(l, before);
    }

    #[test]
    fn replayed_nonce_rejected() {
        let mut l = ledger();
        let alice = NodeIdentity::from_seed(b"alice");
        let tx = Transaction::deploy(&alice, "Store", vec![], 0).unwrap();
        l.submit(tx.clone()).unwrap();
        let before = l.clone();
        assert_eq!(l.submit(tx), Err(LedgerError::BadNonce { next: 1, got: 0 }));
        assert_eq!(l, before);
    }

    #[test]
    fn unknown_kind_and_address() {
        let mut l = ledger();
        let alice = NodeIdentity::from_seed(b"alice");
        let tx = Transaction::deploy(&alice, "Nope", vec![], 0).unwrap();
        assert_eq!(l.submit(tx), Err(LedgerError::UnknownKind("Nope".into())));
        let ghost = Address::derive(99);
        let tx = Transaction::call(&alice, ghost, "put", vec![], 0).unwrap();
        assert_eq!(l.submit(tx), Err(LedgerError::UnknownAddress(ghost)));
        assert_eq!(l.call(ghost, "get", &[]), Err(LedgerError::UnknownAddress(ghost)));
    }

    #[test]
    fn revert_rolls_back_but_charges_gas() {
        let mut l = ledger();
        let alice = NodeIdentity::from_seed(b"alice");
        let at = deploy(&mut l, &alice);
        assert!(put(&mut l, &alice, at, "k", 1).is_ok());
        let host_before = l.host().clone();
        let events_before = l.events().len();
        let r = put(&mut l, &alice, at, "k", -1);
        assert_eq!(r.revert_reason(), Some("negative"));
        assert_eq!(r.gas_charged, 7);
        assert!(r.emitted.is_empty());
        assert_eq!(l.host(), &host_before);
        assert_eq!(l.events().len(), events_before);
        assert_eq!(l.call(at, "get", &[json!("k")]).unwrap(), json!(1));
    }

    #[test]
    fn reads_are_free_and_write_surface_hidden() {
        let mut l = ledger();
        let alice = NodeIdentity::from_seed(b"alice");
        let at = deploy(&mut l, &alice);
        let receipts = l.receipts().len();
        assert_eq!(l.call(at, "get", &[json!("missing")]).unwrap(), Value::Null);
        assert_eq!(l.receipts().len(), receipts);
        assert!(matches!(l.call(at, "put", &[]), Err(LedgerError::UnknownFunction { surface: "read-only", .. })));
    }

    #[test]
    fn events_since_cursor() {
        let mut l = ledger();
        let alice = NodeIdentity::from_seed(b"alice");
        let bob = NodeIdentity::from_seed(b"bob");
        let at = deploy(&mut l, &alice);
        put(&mut l, &alice, at, "a", 1);
        put(&mut l, &bob, at, "b", 2);
        put(&mut l, &alice, at, "c", 3);
        let all = l.events_since(0);
        let keys: Vec<_> = all.iter().map(|e| e.payload["key"].as_str().unwrap()).collect();
        assert_eq!(keys, ["a", "b", "c"]);
        assert!(all.windows(2).all(|w| w[0].sequence + 1 == w[1].sequence));
        assert_eq!(l.events_since(1), all[1..].to_vec());
        assert_eq!(l.events_since(1), l.events_since(1));
        assert!(l.events_since(l.last_sequence()).is_empty());
    }

    #[test]
    fn gas_conservation_across_senders() {
        let mut l = ledger();
        let alice = NodeIdentity::from_seed(b"alice");
        let bob = NodeIdentity::from_seed(b"bob");
        let at = deploy(&mut l, &alice);
        put(&mut l, &bob, at, "x", 1);
        put(&mut l, &bob, at, "y", -1);
        assert_eq!(l.gas_spent(&alice.public_key()), 100);
        assert_eq!(l.gas_spent(&bob.public_key()), 14);
        assert_eq!(l.total_gas(), 114);
        assert_eq!(l.gas_spent(&NodeIdentity::from_seed(b"carol").public_key()), 0);
    }

    #[test]
    fn concurrent_submitters_commit_in_total_order() {
        let shared = SharedLedger::new(ledger());
        let deployer = NodeIdentity::from_seed(b"deployer");
        let at = {
            let mut s = shared.clone();
            let r = s.submit(Transaction::deploy(&deployer, "Store", vec![], 0).unwrap()).unwrap();
            r.output.as_str().unwrap().parse::<Address>().unwrap()
        };
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let mut s = shared.clone();
                std::thread::spawn(move || {
                    let who = NodeIdentity::from_seed(format!("t{i}").as_bytes());
                    for n in 0..5 {
                        let tx = Transaction::call(&who, at, "put", vec![json!(format!("{i}-{n}")), json!(n)], n).unwrap();
                        s.submit(tx).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        shared.with(|l| {
            assert_eq!(l.receipts().len(), 21);
            let blocks: Vec<u64> = l.receipts().iter().map(|r| r.block_index).collect();
            assert_eq!(blocks, (0..21).collect::<Vec<_>>());
            assert_eq!(l.total_gas(), 100 + 20 * 7);
        });
    }
}
