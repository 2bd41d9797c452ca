//! Dataset ingestion: genesis bootstrapping from prefix-to-AS files and the
//! conversion of replayed BGP update logs into path transactions via
//! AS-triplet extraction.
//!
//! Input grammars (one record per line, `#` comments and blank lines
//! skipped; malformed lines are counted, not fatal):
//!
//! - pfx2as:      `address<TAB>prefix_len<TAB>asn_spec` where `asn_spec` is
//!   a single ASN, an underscore-joined multi-origin set (`1_2`), or a
//!   comma-joined list (`1,2`).
//! - update log:  `timestamp|A|prefix|space-separated-as-path` or
//!   `timestamp|W|prefix|withdrawing_asn`. Paths are collector-nearest
//!   first. AS-set path tokens (`{1,2}`) are rejected.
//! - genesis CSV: `prefix,asn` one pair per line.

use std::io::BufRead;

use crate::bgppath;
use crate::ledger::crypto::DeterministicKeyring;
use crate::ledger::{
    Allocation, AnnouncePayload, Asn, Prefix, Transaction, TransactionPayload, WithdrawPayload,
};

/// One prefix-to-origins line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pfx2AsRecord {
    pub prefix: Prefix,
    pub origins: Vec<Asn>,
}

/// One replayed BGP update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BgpUpdateRecord {
    pub timestamp: u64,
    pub kind: UpdateKind,
    pub prefix: Prefix,
    /// Collector-nearest first; empty for withdraws.
    pub as_path: Vec<Asn>,
    /// The withdrawing AS, carried explicitly by the log format.
    pub withdrawer: Option<Asn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    Announce,
    Withdraw,
}

/// The local propagation step extracted from an AS-path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AsTriplet {
    /// Toward the origin: the neighbor the advertiser learned from.
    pub previous: Option<Asn>,
    pub advertiser: Asn,
    /// Toward the collector: the neighbor the advertiser announced to.
    pub next: Option<Asn>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub parsed: usize,
    pub skipped: usize,
}

fn parse_asn(token: &str) -> Option<Asn> {
    let value: u32 = token.trim().parse().ok()?;
    (value > 0).then_some(Asn(value))
}

/// Parses a CAIDA-style pfx2as stream.
pub fn parse_pfx2as<R: BufRead>(reader: R) -> std::io::Result<(Vec<Pfx2AsRecord>, ParseStats)> {
    let mut records = Vec::new();
    let mut stats = ParseStats::default();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_pfx2as_line(line) {
            Some(record) => {
                records.push(record);
                stats.parsed += 1;
            }
            None => stats.skipped += 1,
        }
    }
    Ok((records, stats))
}

fn parse_pfx2as_line(line: &str) -> Option<Pfx2AsRecord> {
    let mut fields = line.split('\t');
    let addr = fields.next()?;
    let len = fields.next()?;
    let asn_spec = fields.next()?;
    if fields.next().is_some() {
        return None;
    }
    let prefix: Prefix = format!("{}/{}", addr.trim(), len.trim()).parse().ok()?;
    let origins: Option<Vec<Asn>> = asn_spec
        .split(|c| c == '_' || c == ',')
        .map(parse_asn)
        .collect();
    let origins = origins?;
    (!origins.is_empty()).then_some(Pfx2AsRecord { prefix, origins })
}

/// Flattens pfx2as records into genesis allocations, dropping exact
/// duplicate (prefix, asn) pairs while preserving first-seen order.
pub fn genesis_allocations(records: &[Pfx2AsRecord]) -> Vec<Allocation> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for record in records {
        for asn in &record.origins {
            if seen.insert((record.prefix, *asn)) {
                out.push(Allocation {
                    prefix: record.prefix,
                    asn: *asn,
                });
            }
        }
    }
    out
}

/// Parses the genesis CSV format: `prefix,asn` per line.
pub fn parse_genesis_csv<R: BufRead>(reader: R) -> std::io::Result<(Vec<Allocation>, ParseStats)> {
    let mut out = Vec::new();
    let mut stats = ParseStats::default();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = line.split_once(',').and_then(|(prefix, asn)| {
            Some(Allocation {
                prefix: prefix.trim().parse().ok()?,
                asn: parse_asn(asn)?,
            })
        });
        match parsed {
            Some(alloc) => {
                out.push(alloc);
                stats.parsed += 1;
            }
            None => stats.skipped += 1,
        }
    }
    Ok((out, stats))
}

/// Parses the update log format.
pub fn parse_updates<R: BufRead>(reader: R) -> std::io::Result<(Vec<BgpUpdateRecord>, ParseStats)> {
    let mut out = Vec::new();
    let mut stats = ParseStats::default();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_update_line(line) {
            Some(record) => {
                out.push(record);
                stats.parsed += 1;
            }
            None => stats.skipped += 1,
        }
    }
    Ok((out, stats))
}

fn parse_update_line(line: &str) -> Option<BgpUpdateRecord> {
    let fields: Vec<&str> = line.split('|').collect();
    if fields.len() != 4 {
        return None;
    }
    let timestamp: u64 = fields[0].trim().parse().ok()?;
    let prefix: Prefix = fields[2].trim().parse().ok()?;
    match fields[1].trim() {
        "A" => {
            let path: Option<Vec<Asn>> = fields[3]
                .split_whitespace()
                .map(|token| {
                    // AS-set members ({1,2}) are not representable as a
                    // single hop; reject the record.
                    if token.contains(['{', '}', ',']) {
                        None
                    } else {
                        parse_asn(token)
                    }
                })
                .collect();
            let path = path?;
            (!path.is_empty()).then_some(BgpUpdateRecord {
                timestamp,
                kind: UpdateKind::Announce,
                prefix,
                as_path: path,
                withdrawer: None,
            })
        }
        "W" => Some(BgpUpdateRecord {
            timestamp,
            kind: UpdateKind::Withdraw,
            prefix,
            as_path: Vec::new(),
            withdrawer: Some(parse_asn(fields[3])?),
        }),
        _ => None,
    }
}

/// Collapses consecutive repeats (AS-path prepending).
pub fn collapse_prepends(path: &[Asn]) -> Vec<Asn> {
    let mut out: Vec<Asn> = Vec::with_capacity(path.len());
    for asn in path {
        if out.last() != Some(asn) {
            out.push(*asn);
        }
    }
    out
}

/// Extracts one triplet per position of a collapsed, non-empty AS-path.
/// The origin is the last element; `previous` looks toward the origin and
/// `next` toward the collector.
pub fn triplets_from_path(path: &[Asn]) -> Vec<AsTriplet> {
    debug_assert_eq!(path, collapse_prepends(path), "path must be collapsed");
    (0..path.len())
        .map(|i| AsTriplet {
            previous: path.get(i + 1).copied(),
            advertiser: path[i],
            next: if i > 0 { Some(path[i - 1]) } else { None },
        })
        .collect()
}

/// Generation counters reported by [`transactions_from_updates`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenStats {
    pub announce_txs: usize,
    pub withdraw_txs: usize,
    pub merged: usize,
    pub skipped_records: usize,
}

#[derive(Debug)]
struct PendingAnnounce {
    prefix: Prefix,
    advertiser: Asn,
    sources: Vec<Asn>,
    dests: Vec<Asn>,
    timestamp: u64,
}

#[derive(Debug)]
enum Pending {
    Announce(PendingAnnounce),
    Withdraw {
        prefix: Prefix,
        as_source: Asn,
        timestamp: u64,
    },
}

/// Converts parsed updates into signed transactions, origin-outward per
/// record so that each announce's learning edges exist by the time it is
/// validated.
///
/// Triplet transactions for the same (prefix, advertiser) with identical
/// source sets are merged into one announce with unioned destination lists
/// when they fall within `merge_window` positions of each other in the
/// output stream; a withdraw for the prefix acts as a merge barrier. Merged
/// or not, replaying the stream yields the same final graphs.
pub fn transactions_from_updates(
    records: &[BgpUpdateRecord],
    keyring: &mut DeterministicKeyring,
    merge_window: usize,
) -> (Vec<Transaction>, GenStats) {
    let mut pending: Vec<Pending> = Vec::new();
    let mut stats = GenStats::default();
    let mut barriers: std::collections::BTreeMap<Prefix, usize> = std::collections::BTreeMap::new();

    for record in records {
        match record.kind {
            UpdateKind::Withdraw => {
                let Some(withdrawer) = record.withdrawer else {
                    stats.skipped_records += 1;
                    continue;
                };
                pending.push(Pending::Withdraw {
                    prefix: record.prefix,
                    as_source: withdrawer,
                    timestamp: record.timestamp,
                });
                barriers.insert(record.prefix, pending.len());
                stats.withdraw_txs += 1;
            }
            UpdateKind::Announce => {
                let path = collapse_prepends(&record.as_path);
                let distinct: std::collections::BTreeSet<&Asn> = path.iter().collect();
                if path.is_empty() || distinct.len() != path.len() {
                    // Looped paths are bogus routing data.
                    stats.skipped_records += 1;
                    continue;
                }
                for triplet in triplets_from_path(&path).into_iter().rev() {
                    let Some(next) = triplet.next else {
                        continue; // collector end advertises to nobody we know
                    };
                    let sources: Vec<Asn> = triplet.previous.into_iter().collect();
                    let barrier = barriers.get(&record.prefix).copied().unwrap_or(0);
                    let merged = merge_into_pending(
                        &mut pending,
                        merge_window,
                        barrier,
                        record.prefix,
                        triplet.advertiser,
                        &sources,
                        next,
                    );
                    if merged {
                        stats.merged += 1;
                    } else {
                        pending.push(Pending::Announce(PendingAnnounce {
                            prefix: record.prefix,
                            advertiser: triplet.advertiser,
                            sources,
                            dests: vec![next],
                            timestamp: record.timestamp,
                        }));
                        stats.announce_txs += 1;
                    }
                }
            }
        }
    }

    let txs = pending
        .into_iter()
        .map(|entry| match entry {
            Pending::Announce(a) => {
                let payload = AnnouncePayload {
                    prefix: a.prefix,
                    as_source: a.advertiser,
                    as_source_list: a.sources,
                    as_dest_list: a.dests,
                };
                let output = bgppath::announce_output(&payload);
                let key = keyring.key_for(a.advertiser).clone();
                Transaction::build_signed(
                    TransactionPayload::Announce(payload),
                    output,
                    a.timestamp,
                    a.advertiser,
                    &key,
                )
                .expect("generated announce payloads are well-formed")
            }
            Pending::Withdraw {
                prefix,
                as_source,
                timestamp,
            } => {
                let payload = WithdrawPayload { prefix, as_source };
                let output = bgppath::withdraw_output(&payload);
                let key = keyring.key_for(as_source).clone();
                Transaction::build_signed(
                    TransactionPayload::Withdraw(payload),
                    output,
                    timestamp,
                    as_source,
                    &key,
                )
                .expect("generated withdraw payloads are well-formed")
            }
        })
        .collect();
    (txs, stats)
}

/// Tries to union `next` into a recent pending announce with the same
/// prefix, advertiser and source set. Only positions after the prefix's
/// last withdraw barrier and within the lookback window qualify.
fn merge_into_pending(
    pending: &mut [Pending],
    merge_window: usize,
    barrier: usize,
    prefix: Prefix,
    advertiser: Asn,
    sources: &[Asn],
    next: Asn,
) -> bool {
    if merge_window == 0 {
        return false;
    }
    let start = pending.len().saturating_sub(merge_window).max(barrier);
    for entry in pending[start..].iter_mut().rev() {
        let Pending::Announce(a) = entry else {
            continue;
        };
        if a.prefix == prefix && a.advertiser == advertiser && a.sources == sources {
            // The destination must not collide with the advertiser or the
            // source set; both would break the payload invariants.
            if next == advertiser || a.sources.contains(&next) {
                return false;
            }
            if !a.dests.contains(&next) {
                a.dests.push(next);
            }
            return true;
        }
    }
    false
}

/// Every ASN mentioned anywhere in the records: path members, withdrawers
/// and pfx2as origins all need registered identities before replay.
pub fn participants(records: &[BgpUpdateRecord], pfx2as: &[Pfx2AsRecord]) -> Vec<Asn> {
    let mut set = std::collections::BTreeSet::new();
    for record in records {
        set.extend(record.as_path.iter().copied());
        set.extend(record.withdrawer);
    }
    for record in pfx2as {
        set.extend(record.origins.iter().copied());
    }
    set.into_iter().collect()
}
