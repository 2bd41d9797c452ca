//! Full-chain validation with state replay, and longest-chain conflict
//! resolution.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::bgppath::{self, BgpPathState};
use crate::ipalloc::{self, IpAllocationState};
use crate::ledger::crypto::{verify, KeyRegistry};
use crate::ledger::{
    compute_txid, Asn, Chain, Digest, Transaction, TransactionOutput, TransactionPayload, TxId,
};
use crate::mining::{verify_pow, Difficulty};
use crate::verdict::{InvalidReason, Roster, Verdict};

/// The two chain-derived states, always produced and advanced together.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayedStates {
    pub ip: IpAllocationState,
    pub bgp: BgpPathState,
}

/// Why a chain was rejected, with the failing position where applicable.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("chain is empty")]
    Empty,
    #[error("block 0 is not a well-formed genesis block")]
    BadGenesis,
    #[error("genesis hash does not match the expected genesis")]
    GenesisMismatch,
    #[error("block {index} does not link to its predecessor")]
    Linkage { index: u64 },
    #[error("block {index} is out of sequence")]
    IndexSequence { index: u64 },
    #[error("block {index} fails proof-of-work verification")]
    Pow { index: u64 },
    #[error("block {index} contains no transactions")]
    EmptyBlock { index: u64 },
    #[error("block {index} was mined by unregistered {miner}")]
    UnknownMiner { index: u64, miner: Asn },
    #[error("block {index} carries an invalid miner signature")]
    MinerSignature { index: u64 },
    #[error("txid {txid} appears more than once in the chain")]
    DuplicateTxid { txid: TxId },
    #[error("invalid transaction at block {block}, position {tx}: {reason}")]
    Tx {
        block: u64,
        tx: usize,
        reason: InvalidReason,
    },
}

/// Envelope checks that need no ledger state: structural payload invariants,
/// creator binding, txid integrity and the creator's signature.
pub fn verify_envelope(tx: &Transaction, registry: &KeyRegistry) -> Verdict {
    Verdict::from(verify_envelope_inner(tx, registry))
}

fn verify_envelope_inner(tx: &Transaction, registry: &KeyRegistry) -> Result<(), InvalidReason> {
    let Some(as_source) = tx.input.as_source() else {
        // Genesis Assigns never travel as loose transactions.
        return Err(InvalidReason::GenesisOnly);
    };
    tx.input.check_invariants()?;
    if tx.creator != as_source {
        return Err(InvalidReason::CreatorMismatch);
    }
    if compute_txid(&tx.input, tx.timestamp, tx.creator)? != tx.txid {
        return Err(InvalidReason::TxidMismatch);
    }
    let key = registry.get(tx.creator).ok_or(InvalidReason::UnknownCreator)?;
    if !verify(key, &tx.signing_content(), &tx.signature) {
        return Err(InvalidReason::BadSignature);
    }
    Ok(())
}

/// Type-specific validation against the current states, including the
/// output recomputation-and-compare step.
pub fn validate_state_transition(
    tx: &Transaction,
    states: &ReplayedStates,
    roster: &Roster,
) -> Verdict {
    Verdict::from(validate_state_transition_inner(tx, states, roster))
}

fn validate_state_transition_inner(
    tx: &Transaction,
    states: &ReplayedStates,
    roster: &Roster,
) -> Result<(), InvalidReason> {
    let expected_output = match &tx.input {
        TransactionPayload::GenesisAssign(_) => return Err(InvalidReason::GenesisOnly),
        TransactionPayload::Assign(p) => {
            ipalloc::validate_assign(&states.ip, p, tx.timestamp, roster).into_result()?;
            ipalloc::assign_output(p)
        }
        TransactionPayload::Update(p) => {
            ipalloc::validate_update(&states.ip, p, tx.timestamp).into_result()?;
            let stored = states
                .ip
                .assign(p.assign_tran)
                .ok_or(InvalidReason::UnknownAssign)?;
            ipalloc::update_output(p, stored)
        }
        TransactionPayload::Revoke(p) => {
            ipalloc::validate_revoke(&states.ip, p, tx.timestamp).into_result()?;
            let stored = states
                .ip
                .assign(p.assign_tran)
                .ok_or(InvalidReason::UnknownAssign)?;
            ipalloc::revoke_output(stored)
        }
        TransactionPayload::Announce(p) => {
            bgppath::validate_announce(&states.bgp, p, roster).into_result()?;
            bgppath::announce_output(p)
        }
        TransactionPayload::Withdraw(p) => {
            bgppath::validate_withdraw(&states.bgp, p).into_result()?;
            bgppath::withdraw_output(p)
        }
    };
    if tx.output != expected_output {
        return Err(InvalidReason::OutputMismatch);
    }
    Ok(())
}

/// Applies a validated transaction, keeping the per-prefix graphs in sync
/// with ownership changes.
pub fn apply_transaction(tx: &Transaction, states: &mut ReplayedStates) -> Result<(), InvalidReason> {
    match &tx.input {
        TransactionPayload::GenesisAssign(_) => Err(InvalidReason::GenesisOnly),
        TransactionPayload::Assign(p) => {
            ipalloc::apply_assign(&mut states.ip, p, tx.txid, tx.timestamp)?;
            let owners = states.ip.current_owners(p.prefix, tx.timestamp);
            bgppath::sync_origins(&mut states.bgp, p.prefix, &owners);
            Ok(())
        }
        TransactionPayload::Update(p) => ipalloc::apply_update(&mut states.ip, p),
        TransactionPayload::Revoke(p) => {
            let prefix = states
                .ip
                .assign(p.assign_tran)
                .map(|s| s.payload.prefix)
                .ok_or(InvalidReason::UnknownAssign)?;
            if states.bgp.has_announce_edges(prefix) {
                // Withdrawals are assumed to precede revocations; a revoke
                // over live announce edges still clears the topology.
                log::warn!(
                    "revoke of {} clears a graph that still has announce edges",
                    prefix
                );
            }
            ipalloc::apply_revoke(&mut states.ip, p, tx.timestamp)?;
            let owners = states.ip.current_owners(prefix, tx.timestamp);
            bgppath::sync_origins(&mut states.bgp, prefix, &owners);
            Ok(())
        }
        TransactionPayload::Announce(p) => bgppath::apply_announce(&mut states.bgp, p),
        TransactionPayload::Withdraw(p) => bgppath::apply_withdraw(&mut states.bgp, p),
    }
}

/// Convenience: state validation followed by application.
pub fn validate_and_apply(
    tx: &Transaction,
    states: &mut ReplayedStates,
    roster: &Roster,
) -> Result<(), InvalidReason> {
    validate_state_transition(tx, states, roster).into_result()?;
    apply_transaction(tx, states)
}

/// Replays a chain from its genesis transaction, folding every transaction
/// through the validate/apply pairs. The first failure aborts with its
/// position and reason.
pub fn replay(chain: &Chain, roster: &Roster) -> Result<ReplayedStates, ChainError> {
    let genesis = chain.genesis().ok_or(ChainError::Empty)?;
    if !genesis.is_genesis() || genesis.transactions.len() != 1 {
        return Err(ChainError::BadGenesis);
    }
    let genesis_tx = &genesis.transactions[0];
    let TransactionPayload::GenesisAssign(payload) = &genesis_tx.input else {
        return Err(ChainError::BadGenesis);
    };
    let tx_fault = |reason| ChainError::Tx {
        block: 0,
        tx: 0,
        reason,
    };
    let expected_txid = compute_txid(&genesis_tx.input, genesis_tx.timestamp, genesis_tx.creator)
        .map_err(tx_fault)?;
    if expected_txid != genesis_tx.txid {
        return Err(tx_fault(InvalidReason::TxidMismatch));
    }
    let expected_output = TransactionOutput::GenesisAssign {
        allocations: payload.allocations.clone(),
    };
    if genesis_tx.output != expected_output {
        return Err(tx_fault(InvalidReason::OutputMismatch));
    }

    let mut states = ReplayedStates::default();
    ipalloc::apply_genesis_assign(&mut states.ip, payload, genesis_tx.txid).map_err(tx_fault)?;
    let prefixes: BTreeSet<_> = payload.allocations.iter().map(|a| a.prefix).collect();
    for prefix in prefixes {
        let owners = states.ip.current_owners(prefix, genesis_tx.timestamp);
        bgppath::sync_origins(&mut states.bgp, prefix, &owners);
    }

    for block in &chain.blocks[1..] {
        for (pos, tx) in block.transactions.iter().enumerate() {
            validate_and_apply(tx, &mut states, roster).map_err(|reason| ChainError::Tx {
                block: block.index,
                tx: pos,
                reason,
            })?;
        }
    }
    Ok(states)
}

/// Full chain validation: genesis hash equality, per-block linkage, proof of
/// work, miner authentication, global txid uniqueness, transaction envelopes
/// and finally the state replay. Returns the replayed states on success.
pub fn validate_chain(
    chain: &Chain,
    expected_genesis: &Digest,
    difficulty: Difficulty,
    registry: &KeyRegistry,
) -> Result<ReplayedStates, ChainError> {
    let genesis = chain.genesis().ok_or(ChainError::Empty)?;
    if !genesis.is_genesis() {
        return Err(ChainError::BadGenesis);
    }
    if genesis.compute_hash() != genesis.hash || genesis.hash != *expected_genesis {
        return Err(ChainError::GenesisMismatch);
    }

    for (i, block) in chain.blocks.iter().enumerate().skip(1) {
        let index = block.index;
        if index != i as u64 {
            return Err(ChainError::IndexSequence { index });
        }
        if block.previous_hash != chain.blocks[i - 1].hash {
            return Err(ChainError::Linkage { index });
        }
        if block.transactions.is_empty() {
            return Err(ChainError::EmptyBlock { index });
        }
        if !verify_pow(block, difficulty) {
            return Err(ChainError::Pow { index });
        }
        let key = registry.get(block.miner).ok_or(ChainError::UnknownMiner {
            index,
            miner: block.miner,
        })?;
        if !verify(key, block.hash.as_bytes(), &block.signature) {
            return Err(ChainError::MinerSignature { index });
        }
    }

    let mut seen = BTreeSet::new();
    for txid in chain.txids() {
        if !seen.insert(*txid) {
            return Err(ChainError::DuplicateTxid { txid: *txid });
        }
    }

    for block in &chain.blocks[1..] {
        for (pos, tx) in block.transactions.iter().enumerate() {
            verify_envelope(tx, registry)
                .into_result()
                .map_err(|reason| ChainError::Tx {
                    block: block.index,
                    tx: pos,
                    reason,
                })?;
        }
    }

    replay(chain, &registry.roster())
}

/// Longest-chain conflict resolution. The remote chain must already have
/// passed [`validate_chain`]; equal lengths keep the incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Keep,
    Adopt,
}

pub fn resolve(local: &Chain, remote: &Chain) -> Resolution {
    if remote.len() > local.len() {
        Resolution::Adopt
    } else {
        Resolution::Keep
    }
}
