//! Peer-to-peer full-mesh overlay: peer records, key exchange, liveness and
//! the transport abstraction shared by the HTTP daemon and the simulator.

pub mod http;

use std::collections::BTreeMap;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::canonical::canonical_encode;
use crate::ledger::crypto::{verify, KeyPair, PublicKey};
use crate::ledger::{Asn, Chain, Digest, SignatureBytes};
use crate::verdict::InvalidReason;

/// An authenticated peer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerInfo {
    pub asn: Asn,
    pub address: IpAddr,
    pub port: u16,
    pub pubkey: PublicKey,
    pub last_seen: u64,
    pub alive: bool,
}

impl PeerInfo {
    pub fn endpoint(&self) -> String {
        format!("{}:{}", self.address, self.port)
    }
}

/// Self-signed identity record broadcast during peering: the key binds to
/// the (ASN, address, port) triple it signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignedIdentity {
    pub asn: Asn,
    pub address: IpAddr,
    pub port: u16,
    pub pubkey: PublicKey,
    pub signature: SignatureBytes,
}

#[derive(Serialize)]
struct IdentityContent<'a> {
    address: &'a IpAddr,
    asn: Asn,
    port: u16,
    pubkey: &'a PublicKey,
}

impl SignedIdentity {
    pub fn build(asn: Asn, address: IpAddr, port: u16, key: &KeyPair) -> Self {
        let pubkey = key.public();
        let content = canonical_encode(&IdentityContent {
            address: &address,
            asn,
            port,
            pubkey: &pubkey,
        });
        SignedIdentity {
            asn,
            address,
            port,
            pubkey,
            signature: key.sign(&content),
        }
    }

    /// Verifies the self-signature.
    pub fn verify(&self) -> bool {
        let content = canonical_encode(&IdentityContent {
            address: &self.address,
            asn: self.asn,
            port: self.port,
            pubkey: &self.pubkey,
        });
        verify(&self.pubkey, &content, &self.signature)
    }

    pub fn endpoint(&self) -> String {
        format!("{}:{}", self.address, self.port)
    }
}

/// Head announcement sent after mining. The signature is the block's own
/// miner signature over the block hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockNotify {
    pub index: u64,
    pub hash: Digest,
    pub miner: Asn,
    pub signature: SignatureBytes,
}

/// Ping response: the responder's chain head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadInfo {
    pub head_index: u64,
    pub head_hash: Digest,
}

/// Authenticated peers, keyed by ASN. A node is never its own peer.
#[derive(Debug, Clone, Default)]
pub struct PeerTable {
    peers: BTreeMap<Asn, PeerInfo>,
}

impl PeerTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn upsert(&mut self, info: PeerInfo) {
        self.peers.insert(info.asn, info);
    }

    pub fn get(&self, asn: Asn) -> Option<&PeerInfo> {
        self.peers.get(&asn)
    }

    pub fn contains(&self, asn: Asn) -> bool {
        self.peers.contains_key(&asn)
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    pub fn all(&self) -> impl Iterator<Item = &PeerInfo> {
        self.peers.values()
    }

    pub fn alive(&self) -> impl Iterator<Item = &PeerInfo> {
        self.peers.values().filter(|p| p.alive)
    }

    pub fn mark_alive(&mut self, asn: Asn, now: u64) {
        if let Some(p) = self.peers.get_mut(&asn) {
            p.alive = true;
            p.last_seen = now;
        }
    }

    /// Marks peers silent for longer than `timeout` as not alive.
    pub fn sweep(&mut self, now: u64, timeout: u64) {
        for p in self.peers.values_mut() {
            if p.last_seen.saturating_add(timeout) < now {
                p.alive = false;
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("peer unreachable: {0}")]
    Unreachable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("registration rejected with key conflict")]
    KeyConflict,
}

/// Request/response surface a node needs from its peers. Implemented over
/// HTTP for the daemon and over the in-memory bus for the simulator.
pub trait PeerClient {
    fn identity(&self, endpoint: &str) -> Result<SignedIdentity, TransportError>;
    fn register(&self, endpoint: &str, record: &SignedIdentity) -> Result<(), TransportError>;
    fn peers(&self, endpoint: &str) -> Result<Vec<PeerInfo>, TransportError>;
    fn ping(&self, endpoint: &str) -> Result<HeadInfo, TransportError>;
    fn post_transaction(
        &self,
        endpoint: &str,
        tx: &crate::ledger::Transaction,
    ) -> Result<Result<(), InvalidReason>, TransportError>;
    fn notify_block(&self, endpoint: &str, notify: &BlockNotify) -> Result<(), TransportError>;
    fn fetch_chain(&self, endpoint: &str) -> Result<Chain, TransportError>;
}

#[derive(Debug, Error)]
pub enum JoinError {
    #[error("no bootstrap node was reachable")]
    AllBootstrapsUnreachable,
}

/// Bootstrapping: contact each bootstrap node, register our identity there,
/// fetch its peer list, then introduce ourselves to every discovered peer
/// and collect their verified identities.
///
/// Returns every verified identity seen, for the caller to feed into its
/// peer table and key registry. Unreachable non-bootstrap peers are skipped;
/// the join fails only when no bootstrap answers at all.
pub fn join<C: PeerClient>(
    client: &C,
    bootstrap_endpoints: &[String],
    self_record: &SignedIdentity,
) -> Result<Vec<SignedIdentity>, JoinError> {
    let mut discovered: BTreeMap<Asn, SignedIdentity> = BTreeMap::new();
    let mut reached_any = false;

    let absorb = |client: &C, endpoint: &str, discovered: &mut BTreeMap<Asn, SignedIdentity>| {
        match client.identity(endpoint) {
            Ok(identity) if identity.verify() && identity.asn != self_record.asn => {
                if let Err(err) = client.register(endpoint, self_record) {
                    log::warn!("registration at {endpoint} failed: {err}");
                }
                discovered.insert(identity.asn, identity);
                true
            }
            Ok(_) => false,
            Err(err) => {
                log::debug!("peer {endpoint} unreachable during join: {err}");
                false
            }
        }
    };

    for endpoint in bootstrap_endpoints {
        if !absorb(client, endpoint, &mut discovered) {
            continue;
        }
        reached_any = true;
        let listed = match client.peers(endpoint) {
            Ok(list) => list,
            Err(err) => {
                log::warn!("peer list fetch from {endpoint} failed: {err}");
                continue;
            }
        };
        for peer in listed {
            if peer.asn == self_record.asn || discovered.contains_key(&peer.asn) {
                continue;
            }
            absorb(client, &peer.endpoint(), &mut discovered);
        }
    }

    if !reached_any {
        return Err(JoinError::AllBootstrapsUnreachable);
    }
    Ok(discovered.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;
    use std::collections::HashMap;
    use std::net::Ipv4Addr;

    fn identity(asn: u32, port: u16) -> (SignedIdentity, KeyPair) {
        let key = KeyPair::from_seed([asn as u8; 32]);
        let record = SignedIdentity::build(
            Asn(asn),
            IpAddr::V4(Ipv4Addr::LOCALHOST),
            port,
            &key,
        );
        (record, key)
    }

    #[test]
    fn identity_signature_round_trip() {
        let (record, _) = identity(1, 9001);
        assert!(record.verify());
        let mut tampered = record.clone();
        tampered.port = 9002;
        assert!(!tampered.verify());
        let mut unsigned = record;
        unsigned.signature = SignatureBytes::default();
        assert!(!unsigned.verify());
    }

    #[test]
    fn sweep_marks_silent_peers_dead_and_revives_on_contact() {
        let (record, _) = identity(1, 9001);
        let mut table = PeerTable::new();
        table.upsert(PeerInfo {
            asn: record.asn,
            address: record.address,
            port: record.port,
            pubkey: record.pubkey,
            last_seen: 100,
            alive: true,
        });
        table.sweep(120, 30);
        assert!(table.get(Asn(1)).unwrap().alive);
        table.sweep(131, 30);
        assert!(!table.get(Asn(1)).unwrap().alive);
        table.mark_alive(Asn(1), 140);
        assert!(table.get(Asn(1)).unwrap().alive);
        table.sweep(150, 30);
        assert!(table.get(Asn(1)).unwrap().alive);
    }

    /// Static in-memory peer universe for exercising `join`.
    struct MockNet {
        identities: HashMap<String, SignedIdentity>,
        peer_lists: HashMap<String, Vec<PeerInfo>>,
        registrations: RefCell<Vec<(String, Asn)>>,
    }

    impl PeerClient for MockNet {
        fn identity(&self, endpoint: &str) -> Result<SignedIdentity, TransportError> {
            self.identities
                .get(endpoint)
                .cloned()
                .ok_or_else(|| TransportError::Unreachable(endpoint.to_string()))
        }

        fn register(&self, endpoint: &str, record: &SignedIdentity) -> Result<(), TransportError> {
            self.registrations
                .borrow_mut()
                .push((endpoint.to_string(), record.asn));
            Ok(())
        }

        fn peers(&self, endpoint: &str) -> Result<Vec<PeerInfo>, TransportError> {
            Ok(self.peer_lists.get(endpoint).cloned().unwrap_or_default())
        }

        fn ping(&self, _: &str) -> Result<HeadInfo, TransportError> {
            unimplemented!("not used by join")
        }

        fn post_transaction(
            &self,
            _: &str,
            _: &crate::ledger::Transaction,
        ) -> Result<Result<(), InvalidReason>, TransportError> {
            unimplemented!("not used by join")
        }

        fn notify_block(&self, _: &str, _: &BlockNotify) -> Result<(), TransportError> {
            unimplemented!("not used by join")
        }

        fn fetch_chain(&self, _: &str) -> Result<Chain, TransportError> {
            unimplemented!("not used by join")
        }
    }

    fn peer_info(record: &SignedIdentity) -> PeerInfo {
        PeerInfo {
            asn: record.asn,
            address: record.address,
            port: record.port,
            pubkey: record.pubkey,
            last_seen: 0,
            alive: true,
        }
    }

    #[test]
    fn join_discovers_bootstrap_and_its_peers() {
        let (boot, _) = identity(1, 9001);
        let (b, _) = identity(2, 9002);
        let (c, _) = identity(3, 9003);
        let (joiner, _) = identity(10, 9010);

        let mut identities = HashMap::new();
        identities.insert(boot.endpoint(), boot.clone());
        identities.insert(b.endpoint(), b.clone());
        identities.insert(c.endpoint(), c.clone());
        let mut peer_lists = HashMap::new();
        peer_lists.insert(boot.endpoint(), vec![peer_info(&b), peer_info(&c)]);
        let net = MockNet {
            identities,
            peer_lists,
            registrations: RefCell::new(Vec::new()),
        };

        let found = join(&net, &[boot.endpoint()], &joiner).unwrap();
        let asns: Vec<u32> = found.iter().map(|r| r.asn.0).collect();
        assert_eq!(asns, vec![1, 2, 3]);
        // Registered with the bootstrap and with every discovered peer.
        assert_eq!(net.registrations.borrow().len(), 3);
    }

    #[test]
    fn join_fails_when_no_bootstrap_answers() {
        let (joiner, _) = identity(10, 9010);
        let net = MockNet {
            identities: HashMap::new(),
            peer_lists: HashMap::new(),
            registrations: RefCell::new(Vec::new()),
        };
        assert!(matches!(
            join(&net, &["127.0.0.1:1".to_string()], &joiner),
            Err(JoinError::AllBootstrapsUnreachable)
        ));
    }
}
