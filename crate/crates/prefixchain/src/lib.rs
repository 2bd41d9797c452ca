#![forbid(unsafe_code)]

//! A passive blockchain for IP prefix allocations and BGP path transactions.
//!
//! Nodes form a full-mesh overlay, exchange signed transactions that either
//! move prefix ownership (Assign/Update/Revoke) or mirror BGP propagation
//! (Announce/Withdraw), mine them into proof-of-work blocks, and resolve
//! forks with the longest-chain rule. Replaying the chain yields two states:
//! per-prefix ownership records and per-prefix directed AS-level graphs, the
//! basis for rejecting (and logging) hijack-style transactions.
//!
//! The crate is organized around that pipeline:
//!
//! - [`ledger`]: blocks, transactions, canonical encoding, hashing, keys.
//! - [`ipalloc`]: prefix ownership state and allocation validation.
//! - [`bgppath`]: per-prefix graphs and announce/withdraw validation.
//! - [`mempool`] / [`mining`]: pending transactions and proof of work.
//! - [`consensus`]: chain validation, state replay, longest-chain rule.
//! - [`overlay`]: peering, key exchange, the HTTP daemon and client.
//! - [`node`]: the engine tying the above together.
//! - [`ingest`]: pfx2as and BGP update log parsing, triplet extraction.
//! - [`sim`]: deterministic in-process multi-node simulation.
//!
//! See the `examples/` directory for one runnable walk-through per major
//! capability, and the `prefixchain` binary for the operator CLI.

pub mod attack;
pub mod bgppath;
pub mod cli;
pub mod consensus;
pub mod ingest;
pub mod ipalloc;
pub mod ledger;
pub mod mempool;
pub mod mining;
pub mod node;
pub mod overlay;
pub mod sim;
pub mod verdict;

pub use consensus::{replay, resolve, validate_chain, ChainError, ReplayedStates, Resolution};
pub use ledger::crypto::{DeterministicKeyring, KeyPair, KeyRegistry, PublicKey};
pub use ledger::genesis::{build_genesis_block, GENESIS_AUTHORITY};
pub use ledger::{
    Allocation, Asn, Block, Chain, Digest, Prefix, Transaction, TransactionOutput,
    TransactionPayload, TxId, TxType, LEASE_INFINITE,
};
pub use mining::Difficulty;
pub use node::{NodeConfig, NodeEngine};
pub use verdict::{InvalidReason, Roster, Verdict};
