//! Core ledger entities: prefixes, ASNs, transactions, blocks and chains.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. Hashing and signing operate on the canonical wire encoding (see
//! [`canonical`]), so two processes that build the same entity from the same
//! inputs produce bit-identical bytes, hashes and signatures.

pub mod canonical;
pub mod crypto;
pub mod genesis;

use std::collections::BTreeSet;
use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::verdict::InvalidReason;
use canonical::{canonical_encode, content_hash};

/// Autonomous System number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Asn(pub u32);

impl fmt::Display for Asn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AS{}", self.0)
    }
}

/// Reserved ASN identifying IANA when a registry acts as a transaction party.
pub const IANA_ASN: Asn = Asn(0xFFFF_0000);

/// Reserved ASNs for the five regional registries, in alphabetical order
/// (AFRINIC, APNIC, ARIN, LACNIC, RIPE NCC).
pub const RIR_ASNS: [Asn; 5] = [
    Asn(0xFFFF_0001),
    Asn(0xFFFF_0002),
    Asn(0xFFFF_0003),
    Asn(0xFFFF_0004),
    Asn(0xFFFF_0005),
];

/// Sentinel lease value meaning "never expires" (genesis ownership).
pub const LEASE_INFINITE: u64 = u64::MAX;

/// Errors from constructing or parsing core ledger values.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("prefix length {len} out of range for IPv{version}")]
    PrefixLength { len: u8, version: u8 },
    #[error("prefix has nonzero bits beyond its length (not canonical)")]
    NonCanonicalPrefix,
    #[error("malformed prefix: {0}")]
    PrefixParse(String),
    #[error("duplicate allocation for ({prefix}, {asn})")]
    DuplicateAllocation { prefix: Prefix, asn: Asn },
    #[error("malformed key material")]
    MalformedKey,
    #[error("malformed hex digest: {0}")]
    BadDigest(String),
    #[error("difficulty must be between 1 and 16 leading zero hex chars, got {0}")]
    BadDifficulty(u8),
}

/// An IP prefix in canonical form: every address bit beyond `len` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Prefix {
    addr: IpAddr,
    len: u8,
}

impl Prefix {
    /// Builds a prefix, rejecting out-of-range lengths and non-canonical
    /// addresses (host bits set).
    pub fn new(addr: IpAddr, len: u8) -> Result<Self, LedgerError> {
        let max = match addr {
            IpAddr::V4(_) => 32,
            IpAddr::V6(_) => 128,
        };
        if len > max {
            return Err(LedgerError::PrefixLength {
                len,
                version: if max == 32 { 4 } else { 6 },
            });
        }
        let canonical = Self::mask(addr, len);
        if canonical != addr {
            return Err(LedgerError::NonCanonicalPrefix);
        }
        Ok(Prefix { addr, len })
    }

    /// Convenience constructor for IPv4 prefixes in tests and fixtures.
    pub fn v4(a: u8, b: u8, c: u8, d: u8, len: u8) -> Result<Self, LedgerError> {
        Self::new(IpAddr::V4(Ipv4Addr::new(a, b, c, d)), len)
    }

    pub fn addr(&self) -> IpAddr {
        self.addr
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_v4(&self) -> bool {
        matches!(self.addr, IpAddr::V4(_))
    }

    /// Zeroes every bit of `addr` beyond `len`.
    fn mask(addr: IpAddr, len: u8) -> IpAddr {
        match addr {
            IpAddr::V4(v4) => {
                let raw = u32::from(v4);
                let masked = if len == 0 {
                    0
                } else {
                    raw & (u32::MAX << (32 - u32::from(len)))
                };
                IpAddr::V4(Ipv4Addr::from(masked))
            }
            IpAddr::V6(v6) => {
                let raw = u128::from(v6);
                let masked = if len == 0 {
                    0
                } else {
                    raw & (u128::MAX << (128 - u32::from(len)))
                };
                IpAddr::V6(Ipv6Addr::from(masked))
            }
        }
    }

    /// Sort key: IPv4 before IPv6, then address bytes, then length.
    fn sort_key(&self) -> (u8, u128, u8) {
        match self.addr {
            IpAddr::V4(v4) => (4, u128::from(u32::from(v4)), self.len),
            IpAddr::V6(v6) => (6, u128::from(v6), self.len),
        }
    }
}

impl PartialOrd for Prefix {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Prefix {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

impl FromStr for Prefix {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .rsplit_once('/')
            .ok_or_else(|| LedgerError::PrefixParse(s.to_string()))?;
        let addr: IpAddr = addr
            .parse()
            .map_err(|_| LedgerError::PrefixParse(s.to_string()))?;
        let len: u8 = len
            .parse()
            .map_err(|_| LedgerError::PrefixParse(s.to_string()))?;
        Prefix::new(addr, len)
    }
}

impl Serialize for Prefix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A 256-bit content hash, rendered as 64 lowercase hex characters on the wire.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

/// Transaction identifiers are content hashes.
pub type TxId = Digest;

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, LedgerError> {
        let bytes = hex::decode(s).map_err(|_| LedgerError::BadDigest(s.to_string()))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| LedgerError::BadDigest(s.to_string()))?;
        Ok(Digest(arr))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Raw signature bytes, hex on the wire. Empty means "unsigned" and is only
/// legal on the genesis block and its transaction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignatureBytes(pub Vec<u8>);

impl SignatureBytes {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for SignatureBytes {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for SignatureBytes {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(&s)
            .map(SignatureBytes)
            .map_err(serde::de::Error::custom)
    }
}

/// The six transaction types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxType {
    GenesisAssign,
    Assign,
    Update,
    Revoke,
    Announce,
    Withdraw,
}

impl TxType {
    pub fn as_str(&self) -> &'static str {
        match self {
            TxType::GenesisAssign => "genesis_assign",
            TxType::Assign => "assign",
            TxType::Update => "update",
            TxType::Revoke => "revoke",
            TxType::Announce => "announce",
            TxType::Withdraw => "withdraw",
        }
    }
}

impl fmt::Display for TxType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One ground-truth (prefix, ASN) pair carried by a Genesis Assign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Allocation {
    pub prefix: Prefix,
    pub asn: Asn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisAssignPayload {
    pub allocations: Vec<Allocation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignPayload {
    pub prefix: Prefix,
    pub as_source: Asn,
    pub as_dest: Vec<Asn>,
    pub source_lease: u64,
    pub lease_duration: u64,
    pub transfer_tag: bool,
    pub last_assign: TxId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdatePayload {
    pub as_source: Asn,
    pub assign_tran: TxId,
    pub new_lease: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevokePayload {
    pub as_source: Asn,
    pub assign_tran: TxId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnouncePayload {
    pub prefix: Prefix,
    pub as_source: Asn,
    pub as_source_list: Vec<Asn>,
    pub as_dest_list: Vec<Asn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WithdrawPayload {
    pub prefix: Prefix,
    pub as_source: Asn,
}

/// Transaction input, tagged on the wire with `"type"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TransactionPayload {
    GenesisAssign(GenesisAssignPayload),
    Assign(AssignPayload),
    Update(UpdatePayload),
    Revoke(RevokePayload),
    Announce(AnnouncePayload),
    Withdraw(WithdrawPayload),
}

impl TransactionPayload {
    pub fn tx_type(&self) -> TxType {
        match self {
            TransactionPayload::GenesisAssign(_) => TxType::GenesisAssign,
            TransactionPayload::Assign(_) => TxType::Assign,
            TransactionPayload::Update(_) => TxType::Update,
            TransactionPayload::Revoke(_) => TxType::Revoke,
            TransactionPayload::Announce(_) => TxType::Announce,
            TransactionPayload::Withdraw(_) => TxType::Withdraw,
        }
    }

    /// The AS that must have created (and signed) this transaction, when the
    /// payload pins one. Genesis Assigns are created by the configured
    /// registry authority instead.
    pub fn as_source(&self) -> Option<Asn> {
        match self {
            TransactionPayload::GenesisAssign(_) => None,
            TransactionPayload::Assign(p) => Some(p.as_source),
            TransactionPayload::Update(p) => Some(p.as_source),
            TransactionPayload::Revoke(p) => Some(p.as_source),
            TransactionPayload::Announce(p) => Some(p.as_source),
            TransactionPayload::Withdraw(p) => Some(p.as_source),
        }
    }

    /// Structural invariants that hold independently of any ledger state.
    pub fn check_invariants(&self) -> Result<(), InvalidReason> {
        match self {
            TransactionPayload::GenesisAssign(p) => p.check_invariants(),
            TransactionPayload::Assign(p) => p.check_invariants(),
            TransactionPayload::Update(p) => p.check_invariants(),
            TransactionPayload::Revoke(p) => p.check_invariants(),
            TransactionPayload::Announce(p) => p.check_invariants(),
            TransactionPayload::Withdraw(p) => p.check_invariants(),
        }
    }
}

fn all_positive(asns: &[Asn]) -> bool {
    asns.iter().all(|a| a.0 > 0)
}

fn distinct(asns: &[Asn]) -> bool {
    let set: BTreeSet<_> = asns.iter().collect();
    set.len() == asns.len()
}

fn invariant(ok: bool) -> Result<(), InvalidReason> {
    if ok {
        Ok(())
    } else {
        Err(InvalidReason::BadPayload)
    }
}

impl GenesisAssignPayload {
    pub fn check_invariants(&self) -> Result<(), InvalidReason> {
        let pairs: BTreeSet<_> = self.allocations.iter().map(|a| (a.prefix, a.asn)).collect();
        invariant(pairs.len() == self.allocations.len() && self.allocations.iter().all(|a| a.asn.0 > 0))
    }
}

impl AssignPayload {
    pub fn check_invariants(&self) -> Result<(), InvalidReason> {
        invariant(
            self.as_source.0 > 0
                && !self.as_dest.is_empty()
                && all_positive(&self.as_dest)
                && distinct(&self.as_dest)
                && !self.as_dest.contains(&self.as_source)
                && self.lease_duration > 0
                && self.lease_duration <= self.source_lease,
        )
    }
}

impl UpdatePayload {
    pub fn check_invariants(&self) -> Result<(), InvalidReason> {
        invariant(self.as_source.0 > 0 && self.new_lease > 0)
    }
}

impl RevokePayload {
    pub fn check_invariants(&self) -> Result<(), InvalidReason> {
        invariant(self.as_source.0 > 0)
    }
}

impl AnnouncePayload {
    pub fn check_invariants(&self) -> Result<(), InvalidReason> {
        let disjoint = self
            .as_source_list
            .iter()
            .all(|s| !self.as_dest_list.contains(s));
        invariant(
            self.as_source.0 > 0
                && !self.as_dest_list.is_empty()
                && all_positive(&self.as_source_list)
                && all_positive(&self.as_dest_list)
                && distinct(&self.as_source_list)
                && distinct(&self.as_dest_list)
                && !self.as_source_list.contains(&self.as_source)
                && !self.as_dest_list.contains(&self.as_source)
                && disjoint,
        )
    }
}

impl WithdrawPayload {
    pub fn check_invariants(&self) -> Result<(), InvalidReason> {
        invariant(self.as_source.0 > 0)
    }
}

/// Updated ownership entry, one per destination ASN (Assign/Update outputs).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OwnershipEntry {
    pub prefix: Prefix,
    pub as_dest: Asn,
    pub lease: u64,
    pub transfer_tag: bool,
}

/// Revoke output: restored owner plus its recomputed remaining lease.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevokeEntry {
    pub prefix: Prefix,
    pub as_source: Asn,
    pub transfer_tag: bool,
    pub new_lease_duration: u64,
}

/// One partial path towards a prefix, ordered from the prefix side outwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialPath {
    pub prefix: Prefix,
    pub path: Vec<Asn>,
}

/// Transaction output: the derived result, recomputed and compared during
/// validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TransactionOutput {
    GenesisAssign { allocations: Vec<Allocation> },
    Assign { entries: Vec<OwnershipEntry> },
    Update { entries: Vec<OwnershipEntry> },
    Revoke { entry: RevokeEntry },
    Announce { paths: Vec<PartialPath> },
    Withdraw { prefix: Prefix, as_source: Asn },
}

/// A signed envelope around one payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transaction {
    pub txid: TxId,
    pub input: TransactionPayload,
    pub output: TransactionOutput,
    pub timestamp: u64,
    pub creator: Asn,
    pub signature: SignatureBytes,
}

/// Preimage document for txids and transaction signatures: the four fields
/// (tx_type, input, timestamp, creator) under canonical encoding.
#[derive(Serialize)]
struct TxContent<'a> {
    creator: Asn,
    input: &'a TransactionPayload,
    timestamp: u64,
    tx_type: TxType,
}

/// Computes a transaction id from the signed content fields.
///
/// Fails with `BadPayload` when the payload's structural invariants do not
/// hold; ids are only defined over well-formed payloads.
pub fn compute_txid(
    input: &TransactionPayload,
    timestamp: u64,
    creator: Asn,
) -> Result<TxId, InvalidReason> {
    input.check_invariants()?;
    Ok(content_hash(&signing_content(input, timestamp, creator)))
}

/// Canonical bytes covered by both the txid and the creator's signature.
pub fn signing_content(input: &TransactionPayload, timestamp: u64, creator: Asn) -> Vec<u8> {
    canonical_encode(&TxContent {
        creator,
        input: input,
        timestamp,
        tx_type: input.tx_type(),
    })
}

impl Transaction {
    pub fn tx_type(&self) -> TxType {
        self.input.tx_type()
    }

    /// Builds and signs a transaction in one step.
    pub fn build_signed(
        input: TransactionPayload,
        output: TransactionOutput,
        timestamp: u64,
        creator: Asn,
        key: &crypto::KeyPair,
    ) -> Result<Transaction, InvalidReason> {
        let txid = compute_txid(&input, timestamp, creator)?;
        let signature = key.sign(&signing_content(&input, timestamp, creator));
        Ok(Transaction {
            txid,
            input,
            output,
            timestamp,
            creator,
            signature,
        })
    }

    pub fn signing_content(&self) -> Vec<u8> {
        signing_content(&self.input, self.timestamp, self.creator)
    }
}

/// A mined (or genesis) container of transactions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub index: u64,
    pub transactions: Vec<Transaction>,
    pub timestamp: u64,
    pub mined_timestamp: u64,
    pub previous_hash: Digest,
    pub nonce: u64,
    pub hash: Digest,
    pub miner: Asn,
    pub signature: SignatureBytes,
}

/// Preimage document for block hashes. `mined_timestamp` and the signature
/// are deliberately outside the hash; the signature covers the hash itself.
#[derive(Serialize)]
struct BlockContent<'a> {
    index: u64,
    miner: Asn,
    nonce: u64,
    previous_hash: &'a Digest,
    timestamp: u64,
    txids: Vec<&'a TxId>,
}

impl Block {
    /// Recomputes the content hash from the block's hashed fields.
    pub fn compute_hash(&self) -> Digest {
        content_hash(&canonical_encode(&BlockContent {
            index: self.index,
            miner: self.miner,
            nonce: self.nonce,
            previous_hash: &self.previous_hash,
            timestamp: self.timestamp,
            txids: self.transactions.iter().map(|t| &t.txid).collect(),
        }))
    }

    /// Canonical preimage with the current nonce value; the mining loop
    /// patches the nonce digits in place instead of re-serializing.
    pub fn hash_preimage(&self) -> Vec<u8> {
        canonical_encode(&BlockContent {
            index: self.index,
            miner: self.miner,
            nonce: self.nonce,
            previous_hash: &self.previous_hash,
            timestamp: self.timestamp,
            txids: self.transactions.iter().map(|t| &t.txid).collect(),
        })
    }

    /// Genesis blocks are identified structurally: first position, all-zero
    /// previous hash.
    pub fn is_genesis(&self) -> bool {
        self.index == 0 && self.previous_hash == Digest::ZERO
    }
}

/// A simply connected list of blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Chain {
    pub blocks: Vec<Block>,
}

impl Chain {
    pub fn new(genesis: Block) -> Chain {
        Chain {
            blocks: vec![genesis],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn head(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn genesis(&self) -> Option<&Block> {
        self.blocks.first()
    }

    /// All txids in chain order.
    pub fn txids(&self) -> impl Iterator<Item = &TxId> {
        self.blocks
            .iter()
            .flat_map(|b| b.transactions.iter().map(|t| &t.txid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_rejects_host_bits() {
        assert!(Prefix::v4(10, 0, 0, 1, 8).is_err());
        assert!(Prefix::v4(10, 0, 0, 0, 8).is_ok());
    }

    #[test]
    fn prefix_parses_and_displays_round_trip() {
        for s in ["0.0.0.0/0", "10.0.0.0/8", "192.168.128.0/17", "2001:db8::/32"] {
            let p: Prefix = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("10.0.0.0/33".parse::<Prefix>().is_err());
        assert!("2001:db8::/129".parse::<Prefix>().is_err());
        assert!("10.0.0.0".parse::<Prefix>().is_err());
        assert!("banana/8".parse::<Prefix>().is_err());
    }

    #[test]
    fn prefix_ordering_is_v4_first_then_bytes_then_len() {
        let a = Prefix::v4(9, 255, 0, 0, 16).unwrap();
        let b = Prefix::v4(10, 0, 0, 0, 8).unwrap();
        let c = Prefix::v4(10, 0, 0, 0, 9).unwrap();
        let d: Prefix = "::/0".parse().unwrap();
        let mut v = vec![d, c, b, a];
        v.sort();
        assert_eq!(v, vec![a, b, c, d]);
    }

    #[test]
    fn digest_hex_round_trip() {
        let d = content_hash(b"abc");
        let parsed = Digest::from_hex(&d.to_hex()).unwrap();
        assert_eq!(d, parsed);
        assert!(Digest::from_hex("zz").is_err());
        assert!(Digest::from_hex("00").is_err());
    }

    #[test]
    fn txid_changes_with_timestamp() {
        let input = TransactionPayload::Withdraw(WithdrawPayload {
            prefix: Prefix::v4(10, 0, 0, 0, 8).unwrap(),
            as_source: Asn(1),
        });
        let a = compute_txid(&input, 1000, Asn(1)).unwrap();
        let b = compute_txid(&input, 1001, Asn(1)).unwrap();
        let a2 = compute_txid(&input, 1000, Asn(1)).unwrap();
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }

    #[test]
    fn announce_invariants_reject_overlap() {
        let p = Prefix::v4(10, 0, 0, 0, 8).unwrap();
        let bad = TransactionPayload::Announce(AnnouncePayload {
            prefix: p,
            as_source: Asn(2),
            as_source_list: vec![Asn(1)],
            as_dest_list: vec![Asn(1)],
        });
        assert!(bad.check_invariants().is_err());
        let self_in_list = TransactionPayload::Announce(AnnouncePayload {
            prefix: p,
            as_source: Asn(2),
            as_source_list: vec![],
            as_dest_list: vec![Asn(2)],
        });
        assert!(self_in_list.check_invariants().is_err());
    }

    #[test]
    fn assign_invariants() {
        let p = Prefix::v4(10, 0, 0, 0, 8).unwrap();
        let mk = |dest: Vec<Asn>, source_lease: u64, duration: u64| {
            TransactionPayload::Assign(AssignPayload {
                prefix: p,
                as_source: Asn(1),
                as_dest: dest,
                source_lease,
                lease_duration: duration,
                transfer_tag: true,
                last_assign: Digest::ZERO,
            })
        };
        assert!(mk(vec![Asn(2)], 100, 50).check_invariants().is_ok());
        assert!(mk(vec![], 100, 50).check_invariants().is_err());
        assert!(mk(vec![Asn(2)], 100, 200).check_invariants().is_err());
        assert!(mk(vec![Asn(1)], 100, 50).check_invariants().is_err());
        assert!(mk(vec![Asn(2), Asn(2)], 100, 50).check_invariants().is_err());
    }
}
