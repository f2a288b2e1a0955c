pub mod contracts;
pub mod datastore;
pub mod enclave;
mod fsutil;
pub mod identity;
pub mod ledger;
pub mod oracle_bridge;
pub mod policy;
pub mod request;
pub mod resource;
pub mod sim;
pub mod usage_log;
