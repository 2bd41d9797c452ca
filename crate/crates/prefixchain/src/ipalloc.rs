//! Prefix-ownership state and validation/application of the IP Allocation
//! transaction types (Genesis Assign, Assign, Update, Revoke).
//!
//! Expiry is lazy: expired records stay in the state until an explicit
//! Revoke reclaims them, and are filtered out at query time. All lease
//! arithmetic is evaluated at the transaction's own timestamp so that
//! propagation delay cannot flip a verdict between nodes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ledger::{
    Asn, AssignPayload, GenesisAssignPayload, OwnershipEntry, Prefix, RevokeEntry, RevokePayload,
    TransactionOutput, TxId, UpdatePayload, LEASE_INFINITE,
};
use crate::verdict::{InvalidReason, Roster, Verdict};

/// One co-owner's claim over a prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnershipRecord {
    pub prefix: Prefix,
    pub owner: Asn,
    /// Absolute expiry in seconds, or [`LEASE_INFINITE`].
    pub lease_expiry: u64,
    /// Lease length this record started with, at the time it was created.
    pub remaining_source_lease: u64,
    pub transfer_allowed: bool,
    /// Txid of the Assign (or genesis transaction) that created this record.
    pub last_assign: TxId,
}

/// A past Assign kept for Update/Revoke lookups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredAssign {
    pub payload: AssignPayload,
    pub timestamp: u64,
}

/// Per-prefix ownership records plus the index of past Assign transactions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IpAllocationState {
    records: BTreeMap<Prefix, Vec<OwnershipRecord>>,
    assigns: BTreeMap<TxId, StoredAssign>,
}

/// Remaining lease seconds of `expiry` evaluated at `at`; infinite stays
/// infinite, expired leases report zero.
pub fn remaining_lease(expiry: u64, at: u64) -> u64 {
    if expiry == LEASE_INFINITE {
        LEASE_INFINITE
    } else {
        expiry.saturating_sub(at)
    }
}

fn lease_unexpired(expiry: u64, now: u64) -> bool {
    expiry == LEASE_INFINITE || expiry > now
}

impl IpAllocationState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty() && self.assigns.is_empty()
    }

    pub fn records_for(&self, prefix: Prefix) -> &[OwnershipRecord] {
        self.records.get(&prefix).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn record_of(&self, prefix: Prefix, owner: Asn) -> Option<&OwnershipRecord> {
        self.records_for(prefix).iter().find(|r| r.owner == owner)
    }

    pub fn assign(&self, txid: TxId) -> Option<&StoredAssign> {
        self.assigns.get(&txid)
    }

    pub fn assigns(&self) -> impl Iterator<Item = (&TxId, &StoredAssign)> {
        self.assigns.iter()
    }

    pub fn prefixes(&self) -> impl Iterator<Item = Prefix> + '_ {
        self.records.keys().copied()
    }

    /// Owners whose lease is still running at `now`.
    pub fn current_owners(&self, prefix: Prefix, now: u64) -> BTreeSet<Asn> {
        self.records_for(prefix)
            .iter()
            .filter(|r| lease_unexpired(r.lease_expiry, now))
            .map(|r| r.owner)
            .collect()
    }

    /// All record-holding owners regardless of expiry.
    pub fn record_owners(&self, prefix: Prefix) -> BTreeSet<Asn> {
        self.records_for(prefix).iter().map(|r| r.owner).collect()
    }

    fn insert_record(&mut self, record: OwnershipRecord) {
        let list = self.records.entry(record.prefix).or_default();
        // Overwrite any leftover (expired) record for the same owner so a
        // (prefix, owner) pair never holds two records.
        list.retain(|r| r.owner != record.owner);
        list.push(record);
        list.sort_by_key(|r| r.owner);
    }

    fn remove_record(&mut self, prefix: Prefix, owner: Asn) {
        if let Some(list) = self.records.get_mut(&prefix) {
            list.retain(|r| r.owner != owner);
            if list.is_empty() {
                self.records.remove(&prefix);
            }
        }
    }

    /// Line-oriented canonical dump, sorted by prefix then owner ASN:
    /// `prefix<TAB>owner_asn<TAB>lease_expiry<TAB>transfer<TAB>last_assign_txid`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (prefix, list) in &self.records {
            for r in list {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    prefix, r.owner.0, r.lease_expiry, r.transfer_allowed, r.last_assign
                ));
            }
        }
        out
    }
}

/// Seeds the state from the genesis transaction: one record per (prefix,
/// ASN) pair with an infinite lease and transfer rights.
pub fn apply_genesis_assign(
    state: &mut IpAllocationState,
    payload: &GenesisAssignPayload,
    genesis_txid: TxId,
) -> Result<(), InvalidReason> {
    if !state.is_empty() {
        // NonEmptyState: genesis may only seed a fresh state.
        return Err(InvalidReason::BadPayload);
    }
    for alloc in &payload.allocations {
        state.insert_record(OwnershipRecord {
            prefix: alloc.prefix,
            owner: alloc.asn,
            lease_expiry: LEASE_INFINITE,
            remaining_source_lease: LEASE_INFINITE,
            transfer_allowed: true,
            last_assign: genesis_txid,
        });
    }
    Ok(())
}

/// Checks whether `as_source` may assign the prefix at `now` (the
/// transaction's timestamp).
pub fn validate_assign(
    state: &IpAllocationState,
    payload: &AssignPayload,
    now: u64,
    roster: &Roster,
) -> Verdict {
    Verdict::from(validate_assign_inner(state, payload, now, roster))
}

fn validate_assign_inner(
    state: &IpAllocationState,
    payload: &AssignPayload,
    now: u64,
    roster: &Roster,
) -> Result<(), InvalidReason> {
    payload.check_invariants()?;
    let record = state
        .record_of(payload.prefix, payload.as_source)
        .filter(|r| lease_unexpired(r.lease_expiry, now))
        .ok_or(InvalidReason::NotOwner)?;
    if payload.last_assign != record.last_assign {
        return Err(InvalidReason::LastAssignMismatch);
    }
    let remaining = remaining_lease(record.lease_expiry, now);
    if payload.lease_duration > remaining {
        return Err(InvalidReason::LeaseExceedsSource);
    }
    if payload.source_lease != remaining {
        return Err(InvalidReason::SourceLeaseMismatch);
    }
    if !record.transfer_allowed {
        return Err(InvalidReason::TransferNotAllowed);
    }
    if !roster.contains_all(&payload.as_dest) {
        return Err(InvalidReason::NotInNetwork);
    }
    // A destination holding a live record would end up with two concurrent
    // claims; leftover expired records are overwritten on apply instead.
    for dest in &payload.as_dest {
        if let Some(r) = state.record_of(payload.prefix, *dest) {
            if lease_unexpired(r.lease_expiry, now) {
                return Err(InvalidReason::DestAlreadyOwner);
            }
        }
    }
    Ok(())
}

/// The derived output of an Assign: one updated ownership entry per
/// destination ASN.
pub fn assign_output(payload: &AssignPayload) -> TransactionOutput {
    TransactionOutput::Assign {
        entries: payload
            .as_dest
            .iter()
            .map(|dest| OwnershipEntry {
                prefix: payload.prefix,
                as_dest: *dest,
                lease: payload.lease_duration,
                transfer_tag: payload.transfer_tag,
            })
            .collect(),
    }
}

/// Applies a validated Assign: the source loses its claim, each destination
/// gains one, and the Assign index learns the transaction.
pub fn apply_assign(
    state: &mut IpAllocationState,
    payload: &AssignPayload,
    txid: TxId,
    timestamp: u64,
) -> Result<(), InvalidReason> {
    if state.record_of(payload.prefix, payload.as_source).is_none() {
        return Err(InvalidReason::NotOwner);
    }
    state.remove_record(payload.prefix, payload.as_source);
    for dest in &payload.as_dest {
        state.insert_record(OwnershipRecord {
            prefix: payload.prefix,
            owner: *dest,
            lease_expiry: timestamp.saturating_add(payload.lease_duration),
            remaining_source_lease: payload.lease_duration,
            transfer_allowed: payload.transfer_tag,
            last_assign: txid,
        });
    }
    state.assigns.insert(
        txid,
        StoredAssign {
            payload: payload.clone(),
            timestamp,
        },
    );
    Ok(())
}

/// Shared checks for Update and Revoke: the referenced Assign must exist,
/// the caller must be its maker, and every destination must still hold its
/// record from that Assign.
fn check_assign_reference<'a>(
    state: &'a IpAllocationState,
    as_source: Asn,
    assign_tran: TxId,
) -> Result<&'a StoredAssign, InvalidReason> {
    let stored = state
        .assign(assign_tran)
        .ok_or(InvalidReason::UnknownAssign)?;
    if stored.payload.as_source != as_source {
        return Err(InvalidReason::NotAssigner);
    }
    for dest in &stored.payload.as_dest {
        let still_owner = state
            .record_of(stored.payload.prefix, *dest)
            .is_some_and(|r| r.last_assign == assign_tran);
        if !still_owner {
            return Err(InvalidReason::DestNotOwner);
        }
    }
    Ok(stored)
}

pub fn validate_update(state: &IpAllocationState, payload: &UpdatePayload, now: u64) -> Verdict {
    Verdict::from(validate_update_inner(state, payload, now))
}

fn validate_update_inner(
    state: &IpAllocationState,
    payload: &UpdatePayload,
    now: u64,
) -> Result<(), InvalidReason> {
    payload.check_invariants()?;
    let stored = state
        .assign(payload.assign_tran)
        .ok_or(InvalidReason::UnknownAssign)?;
    let expiry = stored.timestamp.saturating_add(stored.payload.lease_duration);
    if !lease_unexpired(expiry, now) {
        return Err(InvalidReason::LeaseExpired);
    }
    check_assign_reference(state, payload.as_source, payload.assign_tran)?;
    if payload.new_lease > stored.payload.source_lease {
        return Err(InvalidReason::LeaseExceedsSource);
    }
    Ok(())
}

/// Output of an Update: one entry per destination of the original Assign
/// with the new lease.
pub fn update_output(payload: &UpdatePayload, stored: &StoredAssign) -> TransactionOutput {
    TransactionOutput::Update {
        entries: stored
            .payload
            .as_dest
            .iter()
            .map(|dest| OwnershipEntry {
                prefix: stored.payload.prefix,
                as_dest: *dest,
                lease: payload.new_lease,
                transfer_tag: stored.payload.transfer_tag,
            })
            .collect(),
    }
}

/// Applies a validated Update: every record created by the referenced Assign
/// gets expiry = original Assign timestamp + new_lease.
pub fn apply_update(state: &mut IpAllocationState, payload: &UpdatePayload) -> Result<(), InvalidReason> {
    let stored = state
        .assign(payload.assign_tran)
        .ok_or(InvalidReason::UnknownAssign)?
        .clone();
    let new_expiry = stored.timestamp.saturating_add(payload.new_lease);
    let list = state
        .records
        .get_mut(&stored.payload.prefix)
        .ok_or(InvalidReason::DestNotOwner)?;
    for r in list.iter_mut() {
        if r.last_assign == payload.assign_tran {
            r.lease_expiry = new_expiry;
        }
    }
    Ok(())
}

pub fn validate_revoke(state: &IpAllocationState, payload: &RevokePayload, now: u64) -> Verdict {
    Verdict::from(validate_revoke_inner(state, payload, now))
}

fn validate_revoke_inner(
    state: &IpAllocationState,
    payload: &RevokePayload,
    now: u64,
) -> Result<(), InvalidReason> {
    payload.check_invariants()?;
    let stored = state
        .assign(payload.assign_tran)
        .ok_or(InvalidReason::UnknownAssign)?;
    // Records may have been re-leased via Update, so expiry is read from the
    // live records rather than the original duration.
    let expired = state
        .records_for(stored.payload.prefix)
        .iter()
        .filter(|r| r.last_assign == payload.assign_tran)
        .all(|r| !lease_unexpired(r.lease_expiry, now));
    if !expired {
        return Err(InvalidReason::LeaseNotExpired);
    }
    check_assign_reference(state, payload.as_source, payload.assign_tran)?;
    Ok(())
}

/// Output of a Revoke: the restored owner with its recomputed lease,
/// `source_lease(assign_tran) - lease_duration(assign_tran)`.
pub fn revoke_output(stored: &StoredAssign) -> TransactionOutput {
    TransactionOutput::Revoke {
        entry: RevokeEntry {
            prefix: stored.payload.prefix,
            as_source: stored.payload.as_source,
            transfer_tag: stored.payload.transfer_tag,
            new_lease_duration: restored_lease(&stored.payload),
        },
    }
}

fn restored_lease(payload: &AssignPayload) -> u64 {
    if payload.source_lease == LEASE_INFINITE {
        LEASE_INFINITE
    } else {
        payload.source_lease - payload.lease_duration
    }
}

/// Applies a validated Revoke: drops every record created by the referenced
/// Assign and restores the original owner with the remaining lease.
pub fn apply_revoke(
    state: &mut IpAllocationState,
    payload: &RevokePayload,
    timestamp: u64,
) -> Result<(), InvalidReason> {
    let stored = state
        .assign(payload.assign_tran)
        .ok_or(InvalidReason::UnknownAssign)?
        .clone();
    if let Some(list) = state.records.get_mut(&stored.payload.prefix) {
        list.retain(|r| r.last_assign != payload.assign_tran);
    }
    let lease = restored_lease(&stored.payload);
    let expiry = if lease == LEASE_INFINITE {
        LEASE_INFINITE
    } else {
        timestamp.saturating_add(lease)
    };
    state.insert_record(OwnershipRecord {
        prefix: stored.payload.prefix,
        owner: stored.payload.as_source,
        lease_expiry: expiry,
        remaining_source_lease: lease,
        transfer_allowed: stored.payload.transfer_tag,
        last_assign: stored.payload.last_assign,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{compute_txid, Digest, TransactionPayload};

    fn prefix() -> Prefix {
        Prefix::v4(10, 0, 0, 0, 8).unwrap()
    }

    fn genesis_state() -> (IpAllocationState, TxId) {
        let mut state = IpAllocationState::new();
        let payload = GenesisAssignPayload {
            allocations: vec![crate::ledger::Allocation {
                prefix: prefix(),
                asn: Asn(1),
            }],
        };
        let txid = compute_txid(
            &TransactionPayload::GenesisAssign(payload.clone()),
            0,
            crate::ledger::genesis::GENESIS_AUTHORITY,
        )
        .unwrap();
        apply_genesis_assign(&mut state, &payload, txid).unwrap();
        (state, txid)
    }

    fn roster(asns: &[u32]) -> Roster {
        asns.iter().map(|a| Asn(*a)).collect()
    }

    fn assign(
        source: u32,
        dests: &[u32],
        source_lease: u64,
        duration: u64,
        last: TxId,
    ) -> AssignPayload {
        AssignPayload {
            prefix: prefix(),
            as_source: Asn(source),
            as_dest: dests.iter().map(|d| Asn(*d)).collect(),
            source_lease,
            lease_duration: duration,
            transfer_tag: true,
            last_assign: last,
        }
    }

    #[test]
    fn genesis_assign_seeds_records() {
        let (state, txid) = genesis_state();
        assert_eq!(state.current_owners(prefix(), 0), BTreeSet::from([Asn(1)]));
        let r = state.record_of(prefix(), Asn(1)).unwrap();
        assert_eq!(r.lease_expiry, LEASE_INFINITE);
        assert!(r.transfer_allowed);
        assert_eq!(r.last_assign, txid);
    }

    #[test]
    fn genesis_assign_requires_empty_state() {
        let (mut state, txid) = genesis_state();
        let payload = GenesisAssignPayload {
            allocations: vec![],
        };
        assert!(apply_genesis_assign(&mut state, &payload, txid).is_err());
    }

    #[test]
    fn empty_genesis_yields_empty_state() {
        let mut state = IpAllocationState::new();
        apply_genesis_assign(
            &mut state,
            &GenesisAssignPayload {
                allocations: vec![],
            },
            Digest::ZERO,
        )
        .unwrap();
        assert!(state.records.is_empty());
        assert!(state.current_owners(prefix(), 0).is_empty());
    }

    #[test]
    fn valid_assign_from_infinite_owner() {
        let (state, genesis_txid) = genesis_state();
        let p = assign(1, &[2], LEASE_INFINITE, 3600, genesis_txid);
        assert_eq!(
            validate_assign(&state, &p, 1000, &roster(&[1, 2])),
            Verdict::Valid
        );
    }

    #[test]
    fn non_owner_assign_is_rejected() {
        let (state, genesis_txid) = genesis_state();
        let p = assign(3, &[2], LEASE_INFINITE, 3600, genesis_txid);
        assert_eq!(
            validate_assign(&state, &p, 1000, &roster(&[1, 2, 3])),
            Verdict::Invalid(InvalidReason::NotOwner)
        );
    }

    #[test]
    fn lease_longer_than_remaining_is_rejected() {
        let (mut state, genesis_txid) = genesis_state();
        // AS1 -> AS2 for 100s at t=0, so AS2's remaining lease at t=0 is 100.
        let first = assign(1, &[2], LEASE_INFINITE, 100, genesis_txid);
        let txid = Digest::from_hex(&"11".repeat(32)).unwrap();
        apply_assign(&mut state, &first, txid, 0).unwrap();
        // AS2 claims a 200s source lease and tries to hand out 200s.
        let p = assign(2, &[3], 200, 200, txid);
        assert_eq!(
            validate_assign(&state, &p, 0, &roster(&[1, 2, 3])),
            Verdict::Invalid(InvalidReason::LeaseExceedsSource)
        );
    }

    #[test]
    fn source_lease_must_match_remaining() {
        let (mut state, genesis_txid) = genesis_state();
        let first = assign(1, &[2], LEASE_INFINITE, 100, genesis_txid);
        let txid = Digest::from_hex(&"11".repeat(32)).unwrap();
        apply_assign(&mut state, &first, txid, 0).unwrap();
        // At t=40 the remaining lease is 60, not 100.
        let p = assign(2, &[3], 100, 50, txid);
        assert_eq!(
            validate_assign(&state, &p, 40, &roster(&[1, 2, 3])),
            Verdict::Invalid(InvalidReason::SourceLeaseMismatch)
        );
        let ok = assign(2, &[3], 60, 50, txid);
        assert_eq!(
            validate_assign(&state, &ok, 40, &roster(&[1, 2, 3])),
            Verdict::Valid
        );
    }

    #[test]
    fn transfer_flag_and_roster_are_enforced() {
        let (mut state, genesis_txid) = genesis_state();
        let mut first = assign(1, &[2], LEASE_INFINITE, 100, genesis_txid);
        first.transfer_tag = false;
        let txid = Digest::from_hex(&"22".repeat(32)).unwrap();
        apply_assign(&mut state, &first, txid, 0).unwrap();
        let p = assign(2, &[3], 100, 50, txid);
        assert_eq!(
            validate_assign(&state, &p, 0, &roster(&[1, 2, 3])),
            Verdict::Invalid(InvalidReason::TransferNotAllowed)
        );
        // Unregistered destination.
        let (state2, genesis_txid2) = genesis_state();
        let p2 = assign(1, &[9], LEASE_INFINITE, 50, genesis_txid2);
        assert_eq!(
            validate_assign(&state2, &p2, 0, &roster(&[1, 2])),
            Verdict::Invalid(InvalidReason::NotInNetwork)
        );
    }

    #[test]
    fn stale_last_assign_is_rejected() {
        let (state, _) = genesis_state();
        let p = assign(1, &[2], LEASE_INFINITE, 3600, Digest::ZERO);
        assert_eq!(
            validate_assign(&state, &p, 0, &roster(&[1, 2])),
            Verdict::Invalid(InvalidReason::LastAssignMismatch)
        );
    }

    #[test]
    fn apply_assign_replaces_owner() {
        let (mut state, genesis_txid) = genesis_state();
        let p = assign(1, &[2, 3], LEASE_INFINITE, 60, genesis_txid);
        let txid = Digest::from_hex(&"33".repeat(32)).unwrap();
        apply_assign(&mut state, &p, txid, 1000).unwrap();
        assert_eq!(
            state.current_owners(prefix(), 1000),
            BTreeSet::from([Asn(2), Asn(3)])
        );
        for owner in [Asn(2), Asn(3)] {
            assert_eq!(state.record_of(prefix(), owner).unwrap().lease_expiry, 1060);
        }
        assert!(state.record_of(prefix(), Asn(1)).is_none());
        // Expired at 1060 exactly.
        assert!(state.current_owners(prefix(), 1060).is_empty());
    }

    #[test]
    fn update_lifecycle() {
        let (mut state, genesis_txid) = genesis_state();
        let p = assign(1, &[2], 200, 100, genesis_txid);
        // Source is genesis (infinite), so use a finite sub-lease first.
        let p = AssignPayload {
            source_lease: LEASE_INFINITE,
            ..p
        };
        let txid = Digest::from_hex(&"44".repeat(32)).unwrap();
        apply_assign(&mut state, &p, txid, 0).unwrap();

        let upd = UpdatePayload {
            as_source: Asn(1),
            assign_tran: txid,
            new_lease: 150,
        };
        assert_eq!(validate_update(&state, &upd, 50), Verdict::Valid);
        // Wrong assigner.
        let bad = UpdatePayload {
            as_source: Asn(9),
            ..upd.clone()
        };
        assert_eq!(
            validate_update(&state, &bad, 50),
            Verdict::Invalid(InvalidReason::NotAssigner)
        );
        // After expiry of the lease, updates are rejected.
        assert_eq!(
            validate_update(&state, &upd, 100),
            Verdict::Invalid(InvalidReason::LeaseExpired)
        );
        // Unknown assign reference.
        let unknown = UpdatePayload {
            assign_tran: Digest::ZERO,
            ..upd.clone()
        };
        assert_eq!(
            validate_update(&state, &unknown, 50),
            Verdict::Invalid(InvalidReason::UnknownAssign)
        );

        apply_update(&mut state, &upd).unwrap();
        assert_eq!(state.record_of(prefix(), Asn(2)).unwrap().lease_expiry, 150);

        // Shrinking below `now` is allowed; the record then expires naturally.
        let shrink = UpdatePayload {
            as_source: Asn(1),
            assign_tran: txid,
            new_lease: 50,
        };
        assert_eq!(validate_update(&state, &shrink, 40), Verdict::Valid);
        apply_update(&mut state, &shrink).unwrap();
        assert_eq!(state.record_of(prefix(), Asn(2)).unwrap().lease_expiry, 50);
        assert!(state.current_owners(prefix(), 60).is_empty());
    }

    #[test]
    fn update_cannot_exceed_original_source_lease() {
        let (mut state, genesis_txid) = genesis_state();
        // Give AS2 a finite lease of 200, then AS2 assigns 100 to AS3.
        let p1 = assign(1, &[2], LEASE_INFINITE, 200, genesis_txid);
        let t1 = Digest::from_hex(&"55".repeat(32)).unwrap();
        apply_assign(&mut state, &p1, t1, 0).unwrap();
        let p2 = assign(2, &[3], 200, 100, t1);
        let t2 = Digest::from_hex(&"66".repeat(32)).unwrap();
        apply_assign(&mut state, &p2, t2, 0).unwrap();

        let upd = UpdatePayload {
            as_source: Asn(2),
            assign_tran: t2,
            new_lease: 201,
        };
        assert_eq!(
            validate_update(&state, &upd, 10),
            Verdict::Invalid(InvalidReason::LeaseExceedsSource)
        );
    }

    #[test]
    fn revoke_lifecycle_restores_owner() {
        let (mut state, genesis_txid) = genesis_state();
        let p1 = assign(1, &[2], LEASE_INFINITE, 200, genesis_txid);
        let t1 = Digest::from_hex(&"77".repeat(32)).unwrap();
        apply_assign(&mut state, &p1, t1, 0).unwrap();
        // AS2 assigns P to AS3 and AS4 for 40s out of its 200s.
        let p2 = assign(2, &[3, 4], 200, 40, t1);
        let t2 = Digest::from_hex(&"88".repeat(32)).unwrap();
        apply_assign(&mut state, &p2, t2, 0).unwrap();
        assert_eq!(
            state.current_owners(prefix(), 10),
            BTreeSet::from([Asn(3), Asn(4)])
        );

        let rev = RevokePayload {
            as_source: Asn(2),
            assign_tran: t2,
        };
        // Too early.
        assert_eq!(
            validate_revoke(&state, &rev, 10),
            Verdict::Invalid(InvalidReason::LeaseNotExpired)
        );
        // Wrong revoker.
        let bad = RevokePayload {
            as_source: Asn(9),
            assign_tran: t2,
        };
        assert_eq!(
            validate_revoke(&state, &bad, 40),
            Verdict::Invalid(InvalidReason::NotAssigner)
        );
        // Unknown reference.
        let unknown = RevokePayload {
            as_source: Asn(2),
            assign_tran: Digest::ZERO,
        };
        assert_eq!(
            validate_revoke(&state, &unknown, 40),
            Verdict::Invalid(InvalidReason::UnknownAssign)
        );
        // At expiry it becomes valid.
        assert_eq!(validate_revoke(&state, &rev, 40), Verdict::Valid);

        apply_revoke(&mut state, &rev, 40).unwrap();
        assert_eq!(state.record_owners(prefix()), BTreeSet::from([Asn(2)]));
        let restored = state.record_of(prefix(), Asn(2)).unwrap();
        // source_lease 200 - lease_duration 40 = 160, counted from the revoke.
        assert_eq!(restored.remaining_source_lease, 160);
        assert_eq!(restored.lease_expiry, 40 + 160);
        assert_eq!(restored.last_assign, t1);
    }

    #[test]
    fn revoke_of_genesis_sourced_assign_restores_infinite_lease() {
        let (mut state, genesis_txid) = genesis_state();
        let p = assign(1, &[2], LEASE_INFINITE, 100, genesis_txid);
        let t = Digest::from_hex(&"99".repeat(32)).unwrap();
        apply_assign(&mut state, &p, t, 0).unwrap();
        let rev = RevokePayload {
            as_source: Asn(1),
            assign_tran: t,
        };
        assert_eq!(validate_revoke(&state, &rev, 100), Verdict::Valid);
        apply_revoke(&mut state, &rev, 100).unwrap();
        let restored = state.record_of(prefix(), Asn(1)).unwrap();
        assert_eq!(restored.lease_expiry, LEASE_INFINITE);
        assert_eq!(restored.last_assign, genesis_txid);
        assert_eq!(state.record_owners(prefix()), BTreeSet::from([Asn(1)]));
    }

    #[test]
    fn assign_to_live_co_owner_is_rejected() {
        // Multi-origin genesis: AS1 and AS2 co-own the prefix.
        let mut state = IpAllocationState::new();
        let genesis_txid = Digest::ZERO;
        let payload = GenesisAssignPayload {
            allocations: vec![
                crate::ledger::Allocation {
                    prefix: prefix(),
                    asn: Asn(1),
                },
                crate::ledger::Allocation {
                    prefix: prefix(),
                    asn: Asn(2),
                },
            ],
        };
        apply_genesis_assign(&mut state, &payload, genesis_txid).unwrap();
        let p = assign(1, &[2], LEASE_INFINITE, 100, genesis_txid);
        assert_eq!(
            validate_assign(&state, &p, 0, &roster(&[1, 2])),
            Verdict::Invalid(InvalidReason::DestAlreadyOwner)
        );
    }

    #[test]
    fn dump_is_sorted_and_stable() {
        let (mut state, genesis_txid) = genesis_state();
        let p = assign(1, &[3, 2], LEASE_INFINITE, 100, genesis_txid);
        let t = Digest::from_hex(&"aa".repeat(32)).unwrap();
        apply_assign(&mut state, &p, t, 0).unwrap();
        let dump = state.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("10.0.0.0/8\t2\t100\ttrue\t"));
        assert!(lines[1].starts_with("10.0.0.0/8\t3\t100\ttrue\t"));
        assert_eq!(dump, state.clone().dump());
    }
}
