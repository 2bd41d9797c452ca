//! The node engine: one struct owning chain, states, mempool, peers and
//! keys, driven either by the HTTP daemon or by the in-process simulator.
//!
//! All mutation goes through `&mut self` methods, which gives the
//! single-logical-writer contract; the daemon serializes access behind a
//! mutex, the simulator is single-threaded by construction.

use std::collections::BTreeSet;
use std::net::IpAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::consensus::{
    self, replay, resolve, validate_chain, ChainError, ReplayedStates, Resolution,
};
use crate::ipalloc;
use crate::ledger::crypto::{verify, KeyConflict, KeyPair, KeyRegistry};
use crate::ledger::{
    Asn, Block, Chain, Digest, RevokePayload, Transaction, TransactionPayload, TxId,
};
use crate::mempool::{self, InvalidTxRecord, Mempool, NoWork};
use crate::mining::{build_candidate, Difficulty};
use crate::overlay::{BlockNotify, HeadInfo, PeerInfo, PeerTable, SignedIdentity};
use crate::verdict::{InvalidReason, Roster};

/// Per-node configuration knobs.
#[derive(Debug, Clone)]
pub struct NodeConfig {
    pub difficulty: Difficulty,
    pub max_tx_per_block: usize,
    pub mine: bool,
    pub auto_revoke: bool,
    pub keepalive_interval: u64,
    pub keepalive_timeout: u64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            difficulty: Difficulty::new(4).expect("default difficulty is in range"),
            max_tx_per_block: 100,
            mine: false,
            auto_revoke: false,
            keepalive_interval: 10,
            keepalive_timeout: 30,
        }
    }
}

#[derive(Debug, Error)]
pub enum RegisterError {
    #[error("identity record signature does not verify")]
    BadSignature,
    #[error(transparent)]
    KeyConflict(#[from] KeyConflict),
}

/// What to do after a block notification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotifyDecision {
    /// The notifier claims a longer chain; fetch and resolve.
    Fetch,
    Ignore,
}

pub struct NodeEngine {
    asn: Asn,
    key: KeyPair,
    address: IpAddr,
    port: u16,
    config: NodeConfig,
    chain: Chain,
    chain_txids: BTreeSet<TxId>,
    states: ReplayedStates,
    mempool: Mempool,
    peers: PeerTable,
    registry: KeyRegistry,
    invalid_log: Vec<InvalidTxRecord>,
    expected_genesis: Digest,
    mining_abort: Arc<AtomicBool>,
    last_keepalive: u64,
}

impl NodeEngine {
    pub fn new(
        asn: Asn,
        key: KeyPair,
        address: IpAddr,
        port: u16,
        config: NodeConfig,
        genesis: Block,
    ) -> Result<Self, ChainError> {
        let expected_genesis = genesis.hash;
        let chain = Chain::new(genesis);
        let mut registry = KeyRegistry::new();
        registry
            .register(asn, key.public())
            .expect("fresh registry cannot conflict");
        let states = replay(&chain, &registry.roster())?;
        let chain_txids = chain.txids().copied().collect();
        let mempool = Mempool::new(states.clone());
        Ok(NodeEngine {
            asn,
            key,
            address,
            port,
            config,
            chain,
            chain_txids,
            states,
            mempool,
            peers: PeerTable::new(),
            registry,
            invalid_log: Vec::new(),
            expected_genesis,
            mining_abort: Arc::new(AtomicBool::new(false)),
            last_keepalive: 0,
        })
    }

    pub fn asn(&self) -> Asn {
        self.asn
    }

    pub fn key(&self) -> &KeyPair {
        &self.key
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn states(&self) -> &ReplayedStates {
        &self.states
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn peers(&self) -> &PeerTable {
        &self.peers
    }

    pub fn registry(&self) -> &KeyRegistry {
        &self.registry
    }

    pub fn invalid_log(&self) -> &[InvalidTxRecord] {
        &self.invalid_log
    }

    pub fn expected_genesis(&self) -> Digest {
        self.expected_genesis
    }

    /// Handle the mining loop polls; raised whenever the chain is replaced.
    pub fn mining_abort_handle(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.mining_abort)
    }

    pub fn head_info(&self) -> HeadInfo {
        let head = self.chain.head().expect("chain always has genesis");
        HeadInfo {
            head_index: head.index,
            head_hash: head.hash,
        }
    }

    pub fn identity_record(&self) -> SignedIdentity {
        SignedIdentity::build(self.asn, self.address, self.port, &self.key)
    }

    /// Current network participants: every ASN with a registered key.
    pub fn roster(&self) -> Roster {
        self.registry.roster()
    }

    /// Processes a signed identity record: verify, bind the key (TOFU),
    /// upsert the peer entry. Registering ourselves is a no-op.
    pub fn handle_register(
        &mut self,
        record: &SignedIdentity,
        now: u64,
    ) -> Result<(), RegisterError> {
        if !record.verify() {
            return Err(RegisterError::BadSignature);
        }
        self.registry.register(record.asn, record.pubkey)?;
        if record.asn != self.asn {
            self.peers.upsert(PeerInfo {
                asn: record.asn,
                address: record.address,
                port: record.port,
                pubkey: record.pubkey,
                last_seen: now,
                alive: true,
            });
        }
        Ok(())
    }

    /// Mempool admission for a broadcast transaction.
    pub fn submit_transaction(
        &mut self,
        tx: Transaction,
        received_at: u64,
    ) -> Result<(), InvalidReason> {
        let roster = self.roster();
        mempool::submit(
            &mut self.mempool,
            tx,
            &self.chain_txids,
            &self.registry,
            &roster,
            received_at,
            &mut self.invalid_log,
        )
    }

    /// Reacts to a block notification. The notify signature is the miner's
    /// signature over the block hash, so it verifies against the registry.
    pub fn handle_notify(&self, notify: &BlockNotify) -> NotifyDecision {
        let Some(key) = self.registry.get(notify.miner) else {
            log::warn!("block notify from unregistered {}", notify.miner);
            return NotifyDecision::Ignore;
        };
        if !verify(key, notify.hash.as_bytes(), &notify.signature) {
            log::warn!("block notify with bad signature from {}", notify.miner);
            return NotifyDecision::Ignore;
        }
        if notify.index > self.head_info().head_index {
            NotifyDecision::Fetch
        } else {
            NotifyDecision::Ignore
        }
    }

    /// Validates a fetched chain and adopts it if strictly longer. On
    /// adoption the mempool is re-filtered and any running miner aborted.
    pub fn offer_chain(&mut self, remote: Chain, now: u64) -> Result<Resolution, ChainError> {
        let states = validate_chain(
            &remote,
            &self.expected_genesis,
            self.config.difficulty,
            &self.registry,
        )?;
        if resolve(&self.chain, &remote) == Resolution::Keep {
            return Ok(Resolution::Keep);
        }
        self.chain = remote;
        self.chain_txids = self.chain.txids().copied().collect();
        self.states = states;
        self.mining_abort.store(true, Ordering::Relaxed);
        self.refilter_mempool(now);
        Ok(Resolution::Adopt)
    }

    /// Builds an unmined candidate block from the mempool.
    pub fn assemble_candidate(&self, built_at: u64) -> Result<Block, NoWork> {
        let roster = self.roster();
        let txs = mempool::assemble(
            &self.mempool,
            &self.states,
            &roster,
            self.config.max_tx_per_block,
        )?;
        let head = self.chain.head().expect("chain always has genesis");
        Ok(build_candidate(
            head.index + 1,
            txs,
            head.hash,
            built_at,
            self.asn,
        ))
    }

    /// Appends a block this node just mined. Returns false when the chain
    /// moved on while mining (stale candidate); its transactions stay pooled.
    pub fn adopt_own_block(&mut self, block: Block, now: u64) -> Result<bool, ChainError> {
        let head = self.chain.head().expect("chain always has genesis");
        if block.previous_hash != head.hash || block.index != head.index + 1 {
            return Ok(false);
        }
        if !crate::mining::verify_pow(&block, self.config.difficulty) {
            return Err(ChainError::Pow { index: block.index });
        }
        let roster = self.roster();
        let mut next = self.states.clone();
        for (pos, tx) in block.transactions.iter().enumerate() {
            consensus::validate_and_apply(tx, &mut next, &roster).map_err(|reason| {
                ChainError::Tx {
                    block: block.index,
                    tx: pos,
                    reason,
                }
            })?;
        }
        for tx in &block.transactions {
            self.chain_txids.insert(tx.txid);
        }
        self.chain.blocks.push(block);
        self.states = next;
        self.refilter_mempool(now);
        Ok(true)
    }

    fn refilter_mempool(&mut self, now: u64) {
        let roster = self.roster();
        mempool::refilter(
            &mut self.mempool,
            self.states.clone(),
            &self.chain_txids,
            &self.registry,
            &roster,
            now,
            &mut self.invalid_log,
        );
    }

    /// The notify document for a block this node mined.
    pub fn notify_for(&self, block: &Block) -> BlockNotify {
        BlockNotify {
            index: block.index,
            hash: block.hash,
            miner: block.miner,
            signature: block.signature.clone(),
        }
    }

    /// Whether a keepalive round is due; records the round when it is.
    pub fn keepalive_due(&mut self, now: u64) -> bool {
        if now >= self.last_keepalive.saturating_add(self.config.keepalive_interval) {
            self.last_keepalive = now;
            true
        } else {
            false
        }
    }

    /// Feeds one ping result back into the table. Returns true when the peer
    /// advertises a strictly longer chain and a fetch is warranted.
    pub fn process_ping(&mut self, peer: Asn, response: Option<HeadInfo>, now: u64) -> bool {
        match response {
            Some(head) => {
                self.peers.mark_alive(peer, now);
                head.head_index > self.head_info().head_index
            }
            None => false,
        }
    }

    /// Marks peers silent past the timeout as not alive.
    pub fn sweep_peers(&mut self, now: u64) {
        self.peers.sweep(now, self.config.keepalive_timeout);
    }

    /// Auto-revocation: emits (signs, locally submits) a Revoke for every
    /// assign this node made whose lease has fully expired. Returns the
    /// accepted transactions for broadcast.
    pub fn auto_revoke_due(&mut self, now: u64) -> Vec<Transaction> {
        if !self.config.auto_revoke {
            return Vec::new();
        }
        let pending_revokes: BTreeSet<TxId> = self
            .mempool
            .transactions()
            .filter_map(|tx| match &tx.input {
                TransactionPayload::Revoke(p) => Some(p.assign_tran),
                _ => None,
            })
            .collect();
        let candidates: Vec<TxId> = self
            .states
            .ip
            .assigns()
            .filter(|(txid, stored)| {
                stored.payload.as_source == self.asn && !pending_revokes.contains(txid)
            })
            .filter(|(txid, _)| {
                let payload = RevokePayload {
                    as_source: self.asn,
                    assign_tran: **txid,
                };
                ipalloc::validate_revoke(&self.states.ip, &payload, now).is_valid()
            })
            .map(|(txid, _)| *txid)
            .collect();

        let mut emitted = Vec::new();
        for assign_tran in candidates {
            let Some(stored) = self.states.ip.assign(assign_tran) else {
                continue;
            };
            let payload = RevokePayload {
                as_source: self.asn,
                assign_tran,
            };
            let output = ipalloc::revoke_output(stored);
            let Ok(tx) = Transaction::build_signed(
                TransactionPayload::Revoke(payload),
                output,
                now,
                self.asn,
                &self.key,
            ) else {
                continue;
            };
            if self.submit_transaction(tx.clone(), now).is_ok() {
                log::info!("auto-revoke emitted for assign {assign_tran}");
                emitted.push(tx);
            }
        }
        emitted
    }

    /// Canonical dumps used by the inspect surface and determinism checks.
    pub fn dump_ip_state(&self) -> String {
        self.states.ip.dump()
    }

    pub fn dump_graphs(&self) -> String {
        self.states.bgp.dump()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::genesis::{build_genesis_block, GENESIS_AUTHORITY};
    use crate::ledger::{Allocation, AssignPayload, Prefix, LEASE_INFINITE};
    use crate::mining::{mine, MineOutcome};
    use std::net::Ipv4Addr;

    fn prefix() -> Prefix {
        Prefix::v4(10, 0, 0, 0, 8).unwrap()
    }

    fn engine(asn: u32, owner: u32) -> NodeEngine {
        let genesis = build_genesis_block(
            &[Allocation {
                prefix: prefix(),
                asn: Asn(owner),
            }],
            GENESIS_AUTHORITY,
            0,
        )
        .unwrap();
        let config = NodeConfig {
            difficulty: Difficulty::new(1).unwrap(),
            ..NodeConfig::default()
        };
        NodeEngine::new(
            Asn(asn),
            KeyPair::from_seed([asn as u8; 32]),
            IpAddr::V4(Ipv4Addr::LOCALHOST),
            9000 + (asn % 1000) as u16,
            config,
            genesis,
        )
        .unwrap()
    }

    #[test]
    fn register_then_submit_and_mine_own_block() {
        // Node is AS64512; the prefix owner AS1 is a registered participant.
        let mut node = engine(64512, 1);
        let owner_key = KeyPair::from_seed([1; 32]);
        let owner_identity =
            SignedIdentity::build(Asn(1), IpAddr::V4(Ipv4Addr::LOCALHOST), 9101, &owner_key);
        node.handle_register(&owner_identity, 5).unwrap();

        let genesis_txid = node.chain().genesis().unwrap().transactions[0].txid;
        let payload = AssignPayload {
            prefix: prefix(),
            as_source: Asn(1),
            as_dest: vec![Asn(64512)],
            source_lease: LEASE_INFINITE,
            lease_duration: 3600,
            transfer_tag: true,
            last_assign: genesis_txid,
        };
        let tx = Transaction::build_signed(
            TransactionPayload::Assign(payload.clone()),
            ipalloc::assign_output(&payload),
            10,
            Asn(1),
            &owner_key,
        )
        .unwrap();
        node.submit_transaction(tx, 10).unwrap();
        assert_eq!(node.mempool().len(), 1);

        let candidate = node.assemble_candidate(11).unwrap();
        let abort = AtomicBool::new(false);
        let MineOutcome::Mined(block) = mine(
            candidate,
            node.config().difficulty,
            &abort,
            node.key(),
            || 12,
        ) else {
            panic!("mining aborted");
        };
        assert!(node.adopt_own_block(block, 12).unwrap());
        assert_eq!(node.chain().len(), 2);
        assert!(node.mempool().is_empty());
        assert_eq!(
            node.states().ip.current_owners(prefix(), 20),
            std::collections::BTreeSet::from([Asn(64512)])
        );
    }

    #[test]
    fn duplicate_submission_is_rejected_and_logged() {
        let mut node = engine(64512, 1);
        let owner_key = KeyPair::from_seed([1; 32]);
        node.handle_register(
            &SignedIdentity::build(Asn(1), IpAddr::V4(Ipv4Addr::LOCALHOST), 9101, &owner_key),
            0,
        )
        .unwrap();
        let payload = crate::ledger::WithdrawPayload {
            prefix: prefix(),
            as_source: Asn(1),
        };
        let tx = Transaction::build_signed(
            TransactionPayload::Withdraw(payload.clone()),
            crate::bgppath::withdraw_output(&payload),
            1,
            Asn(1),
            &owner_key,
        )
        .unwrap();
        node.submit_transaction(tx.clone(), 1).unwrap();
        assert_eq!(
            node.submit_transaction(tx, 2),
            Err(InvalidReason::Duplicate)
        );
        assert_eq!(node.invalid_log().len(), 1);
        assert_eq!(node.invalid_log()[0].reason, InvalidReason::Duplicate);
    }

    #[test]
    fn registration_with_new_key_for_same_asn_is_rejected() {
        let mut node = engine(64512, 1);
        let key_a = KeyPair::from_seed([1; 32]);
        let key_b = KeyPair::from_seed([2; 32]);
        let addr = IpAddr::V4(Ipv4Addr::LOCALHOST);
        node.handle_register(&SignedIdentity::build(Asn(1), addr, 9101, &key_a), 0)
            .unwrap();
        let err = node
            .handle_register(&SignedIdentity::build(Asn(1), addr, 9102, &key_b), 1)
            .unwrap_err();
        assert!(matches!(err, RegisterError::KeyConflict(_)));
        // Same key, new port: fine.
        node.handle_register(&SignedIdentity::build(Asn(1), addr, 9102, &key_a), 2)
            .unwrap();
        assert_eq!(node.peers().get(Asn(1)).unwrap().port, 9102);
    }

    #[test]
    fn tampered_identity_record_is_rejected() {
        let mut node = engine(64512, 1);
        let key = KeyPair::from_seed([1; 32]);
        let mut record =
            SignedIdentity::build(Asn(1), IpAddr::V4(Ipv4Addr::LOCALHOST), 9101, &key);
        record.asn = Asn(2);
        assert!(matches!(
            node.handle_register(&record, 0),
            Err(RegisterError::BadSignature)
        ));
        assert!(node.peers().is_empty());
    }

    #[test]
    fn notify_requires_known_miner_and_valid_signature() {
        let mut node = engine(64512, 1);
        let miner_key = KeyPair::from_seed([5; 32]);
        let hash = crate::ledger::canonical::content_hash(b"block");
        let good = crate::overlay::BlockNotify {
            index: 3,
            hash,
            miner: Asn(5),
            signature: miner_key.sign(hash.as_bytes()),
        };
        // Unknown miner: ignored.
        assert_eq!(node.handle_notify(&good), NotifyDecision::Ignore);
        node.handle_register(
            &SignedIdentity::build(Asn(5), IpAddr::V4(Ipv4Addr::LOCALHOST), 9105, &miner_key),
            0,
        )
        .unwrap();
        assert_eq!(node.handle_notify(&good), NotifyDecision::Fetch);
        // Not longer than the local head: ignored.
        let stale = crate::overlay::BlockNotify { index: 0, ..good.clone() };
        assert_eq!(node.handle_notify(&stale), NotifyDecision::Ignore);
        // Bad signature: ignored.
        let mut forged = good;
        forged.signature.0[0] ^= 1;
        assert_eq!(node.handle_notify(&forged), NotifyDecision::Ignore);
    }

    #[test]
    fn auto_revoke_emits_after_expiry() {
        let mut node = engine(1, 1); // node itself owns the prefix
        let dest_key = KeyPair::from_seed([2; 32]);
        node.handle_register(
            &SignedIdentity::build(Asn(2), IpAddr::V4(Ipv4Addr::LOCALHOST), 9102, &dest_key),
            0,
        )
        .unwrap();
        let mut config = node.config.clone();
        config.auto_revoke = true;
        node.config = config;

        let genesis_txid = node.chain().genesis().unwrap().transactions[0].txid;
        let payload = AssignPayload {
            prefix: prefix(),
            as_source: Asn(1),
            as_dest: vec![Asn(2)],
            source_lease: LEASE_INFINITE,
            lease_duration: 100,
            transfer_tag: true,
            last_assign: genesis_txid,
        };
        let tx = Transaction::build_signed(
            TransactionPayload::Assign(payload.clone()),
            ipalloc::assign_output(&payload),
            10,
            Asn(1),
            node.key(),
        )
        .unwrap();
        node.submit_transaction(tx, 10).unwrap();
        let candidate = node.assemble_candidate(11).unwrap();
        let abort = AtomicBool::new(false);
        let MineOutcome::Mined(block) =
            mine(candidate, Difficulty::new(1).unwrap(), &abort, node.key(), || 11)
        else {
            panic!("mining aborted");
        };
        node.adopt_own_block(block, 11).unwrap();

        // Lease runs to t=110; nothing due before.
        assert!(node.auto_revoke_due(50).is_empty());
        let emitted = node.auto_revoke_due(110);
        assert_eq!(emitted.len(), 1);
        // Not re-emitted while pending.
        assert!(node.auto_revoke_due(120).is_empty());
    }
}
