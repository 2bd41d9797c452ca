//! Validation verdicts and their machine-readable failure reasons.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::Asn;

/// Why a transaction was rejected. Serialized in rejection responses and in
/// the invalid-transaction log, so variants are stable snake_case codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    #[error("payload violates a structural invariant")]
    BadPayload,
    #[error("txid already present in the chain or mempool")]
    Duplicate,
    #[error("creator has no registered public key")]
    UnknownCreator,
    #[error("creator does not match the payload's as_source")]
    CreatorMismatch,
    #[error("txid does not match the transaction content")]
    TxidMismatch,
    #[error("signature does not verify against the creator's key")]
    BadSignature,
    #[error("stored output differs from the recomputed output")]
    OutputMismatch,
    #[error("genesis_assign is only valid inside the genesis block")]
    GenesisOnly,
    #[error("as_source does not hold an unexpired ownership record for the prefix")]
    NotOwner,
    #[error("last_assign does not match the current ownership record")]
    LastAssignMismatch,
    #[error("lease_duration exceeds the source's remaining lease")]
    LeaseExceedsSource,
    #[error("source_lease does not equal the source's remaining lease")]
    SourceLeaseMismatch,
    #[error("source's ownership record does not permit transfers")]
    TransferNotAllowed,
    #[error("a referenced AS is not a registered network participant")]
    NotInNetwork,
    #[error("a destination AS already holds an unexpired record for the prefix")]
    DestAlreadyOwner,
    #[error("referenced assign transaction is unknown")]
    UnknownAssign,
    #[error("as_source is not the AS that made the referenced assign")]
    NotAssigner,
    #[error("a destination of the referenced assign no longer owns the prefix")]
    DestNotOwner,
    #[error("the referenced lease has already expired")]
    LeaseExpired,
    #[error("the referenced lease has not yet expired")]
    LeaseNotExpired,
    #[error("no graph exists for the prefix and as_source does not own it")]
    UnknownPrefix,
    #[error("as_source has no valid origin or learning path for the prefix")]
    InvalidOrigin,
    #[error("the announced edges would introduce a loop")]
    LoopDetected,
    #[error("AS has no path towards the prefix")]
    NoPath,
}

impl InvalidReason {
    /// Stable code used in logs, histograms and HTTP rejection bodies.
    pub fn code(&self) -> &'static str {
        match self {
            InvalidReason::BadPayload => "bad_payload",
            InvalidReason::Duplicate => "duplicate",
            InvalidReason::UnknownCreator => "unknown_creator",
            InvalidReason::CreatorMismatch => "creator_mismatch",
            InvalidReason::TxidMismatch => "txid_mismatch",
            InvalidReason::BadSignature => "bad_signature",
            InvalidReason::OutputMismatch => "output_mismatch",
            InvalidReason::GenesisOnly => "genesis_only",
            InvalidReason::NotOwner => "not_owner",
            InvalidReason::LastAssignMismatch => "last_assign_mismatch",
            InvalidReason::LeaseExceedsSource => "lease_exceeds_source",
            InvalidReason::SourceLeaseMismatch => "source_lease_mismatch",
            InvalidReason::TransferNotAllowed => "transfer_not_allowed",
            InvalidReason::NotInNetwork => "not_in_network",
            InvalidReason::DestAlreadyOwner => "dest_already_owner",
            InvalidReason::UnknownAssign => "unknown_assign",
            InvalidReason::NotAssigner => "not_assigner",
            InvalidReason::DestNotOwner => "dest_not_owner",
            InvalidReason::LeaseExpired => "lease_expired",
            InvalidReason::LeaseNotExpired => "lease_not_expired",
            InvalidReason::UnknownPrefix => "unknown_prefix",
            InvalidReason::InvalidOrigin => "invalid_origin",
            InvalidReason::LoopDetected => "loop_detected",
            InvalidReason::NoPath => "no_path",
        }
    }
}

/// Outcome of a validation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(InvalidReason),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    pub fn reason(&self) -> Option<InvalidReason> {
        match self {
            Verdict::Valid => None,
            Verdict::Invalid(r) => Some(*r),
        }
    }

    /// Converts into a `Result` for `?`-style composition.
    pub fn into_result(self) -> Result<(), InvalidReason> {
        match self {
            Verdict::Valid => Ok(()),
            Verdict::Invalid(r) => Err(r),
        }
    }
}

impl From<Result<(), InvalidReason>> for Verdict {
    fn from(r: Result<(), InvalidReason>) -> Verdict {
        match r {
            Ok(()) => Verdict::Valid,
            Err(reason) => Verdict::Invalid(reason),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid => f.write_str("valid"),
            Verdict::Invalid(r) => write!(f, "invalid: {}", r.code()),
        }
    }
}

/// Snapshot of the ASes considered part of the blockchain network at
/// validation time. Built from the key registry on a live node and from the
/// global roster in the simulator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Roster(BTreeSet<Asn>);

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, asn: Asn) -> bool {
        self.0.contains(&asn)
    }

    pub fn contains_all<'a>(&self, asns: impl IntoIterator<Item = &'a Asn>) -> bool {
        asns.into_iter().all(|a| self.contains(*a))
    }

    pub fn insert(&mut self, asn: Asn) {
        self.0.insert(asn);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<Asn> for Roster {
    fn from_iter<I: IntoIterator<Item = Asn>>(iter: I) -> Self {
        Roster(iter.into_iter().collect())
    }
}
