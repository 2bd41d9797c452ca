//! The mempool: a FIFO buffer of validated, not-yet-mined transactions.
//!
//! Incoming transactions are validated against the chain state extended by
//! everything already pending, so causally ordered streams are accepted
//! without waiting for intermediate blocks. Block assembly re-validates from
//! a scratch replay of the chain state alone.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{
    validate_and_apply, validate_state_transition, verify_envelope, ReplayedStates,
};
use crate::ledger::crypto::KeyRegistry;
use crate::ledger::{Asn, Transaction, TxId, TxType};
use crate::verdict::{InvalidReason, Roster};

/// One rejected transaction, kept for real-time detection and offline
/// forensics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvalidTxRecord {
    pub received_at: u64,
    pub txid: TxId,
    pub tx_type: TxType,
    pub creator: Asn,
    pub reason: InvalidReason,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("mempool has no pending transactions")]
pub struct NoWork;

/// FIFO buffer plus the pending state (chain state with the queue applied).
#[derive(Debug, Clone)]
pub struct Mempool {
    queue: VecDeque<Transaction>,
    seen: BTreeSet<TxId>,
    pending: ReplayedStates,
}

impl Mempool {
    /// Builds an empty mempool over the given chain state snapshot.
    pub fn new(base: ReplayedStates) -> Self {
        Mempool {
            queue: VecDeque::new(),
            seen: BTreeSet::new(),
            pending: base,
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn contains(&self, txid: &TxId) -> bool {
        self.seen.contains(txid)
    }

    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.queue.iter()
    }

    /// Chain state extended by every pending transaction.
    pub fn pending_states(&self) -> &ReplayedStates {
        &self.pending
    }
}

/// Admits a transaction: envelope checks, duplicate protection against both
/// the chain and the pool, then type-specific validation against the pending
/// state. Rejections are appended to the invalid-transaction log.
pub fn submit(
    mempool: &mut Mempool,
    tx: Transaction,
    chain_txids: &BTreeSet<TxId>,
    registry: &KeyRegistry,
    roster: &Roster,
    received_at: u64,
    log: &mut Vec<InvalidTxRecord>,
) -> Result<(), InvalidReason> {
    let outcome = admit(mempool, &tx, chain_txids, registry, roster);
    if let Err(reason) = outcome {
        log.push(InvalidTxRecord {
            received_at,
            txid: tx.txid,
            tx_type: tx.tx_type(),
            creator: tx.creator,
            reason,
        });
        return Err(reason);
    }
    mempool.seen.insert(tx.txid);
    mempool.queue.push_back(tx);
    Ok(())
}

fn admit(
    mempool: &mut Mempool,
    tx: &Transaction,
    chain_txids: &BTreeSet<TxId>,
    registry: &KeyRegistry,
    roster: &Roster,
) -> Result<(), InvalidReason> {
    verify_envelope(tx, registry).into_result()?;
    if chain_txids.contains(&tx.txid) || mempool.seen.contains(&tx.txid) {
        return Err(InvalidReason::Duplicate);
    }
    validate_and_apply(tx, &mut mempool.pending, roster)
}

/// Selects up to `max_tx` transactions for a candidate block, re-validated
/// in FIFO order against a scratch replay of the chain state. Transactions
/// invalidated by earlier in-block picks are skipped and stay in the pool.
pub fn assemble(
    mempool: &Mempool,
    chain_states: &ReplayedStates,
    roster: &Roster,
    max_tx: usize,
) -> Result<Vec<Transaction>, NoWork> {
    if mempool.queue.is_empty() {
        return Err(NoWork);
    }
    let mut scratch = chain_states.clone();
    let mut picked = Vec::new();
    for tx in &mempool.queue {
        if picked.len() >= max_tx {
            break;
        }
        if validate_state_transition(tx, &scratch, roster).is_valid() {
            crate::consensus::apply_transaction(tx, &mut scratch)
                .expect("validated transaction applies");
            picked.push(tx.clone());
        }
    }
    if picked.is_empty() {
        return Err(NoWork);
    }
    Ok(picked)
}

/// Rebases the pool onto a freshly adopted chain: transactions already in
/// the chain are dropped, the rest re-validate in FIFO order against the new
/// state; the now-invalid ones are dropped and logged.
pub fn refilter(
    mempool: &mut Mempool,
    base: ReplayedStates,
    chain_txids: &BTreeSet<TxId>,
    registry: &KeyRegistry,
    roster: &Roster,
    now: u64,
    log: &mut Vec<InvalidTxRecord>,
) {
    let old: Vec<Transaction> = std::mem::take(&mut mempool.queue).into();
    mempool.seen.clear();
    mempool.pending = base;
    for tx in old {
        if chain_txids.contains(&tx.txid) {
            continue; // mined meanwhile; not an error
        }
        let _ = submit(mempool, tx, chain_txids, registry, roster, now, log);
    }
}
