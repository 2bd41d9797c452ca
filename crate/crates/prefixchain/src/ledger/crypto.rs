//! Digital signatures and key management (Ed25519).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use super::{Asn, LedgerError, SignatureBytes};
use crate::verdict::Roster;

/// The distributable half of a key pair.
#[derive(Clone, Copy)]
pub struct PublicKey(VerifyingKey);

impl PublicKey {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0.as_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self, LedgerError> {
        let bytes = hex::decode(s).map_err(|_| LedgerError::MalformedKey)?;
        let arr: [u8; 32] = bytes.try_into().map_err(|_| LedgerError::MalformedKey)?;
        let key = VerifyingKey::from_bytes(&arr).map_err(|_| LedgerError::MalformedKey)?;
        Ok(PublicKey(key))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        self.0.as_bytes()
    }
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.as_bytes() == other.as_bytes()
    }
}

impl Eq for PublicKey {}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PublicKey::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// An Ed25519 signing key pair.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn generate<R: rand::CryptoRng + rand::RngCore>(rng: &mut R) -> KeyPair {
        KeyPair {
            signing: SigningKey::generate(rng),
        }
    }

    pub fn from_seed(seed: [u8; 32]) -> KeyPair {
        KeyPair {
            signing: SigningKey::from_bytes(&seed),
        }
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key())
    }

    pub fn sign(&self, bytes: &[u8]) -> SignatureBytes {
        SignatureBytes(self.signing.sign(bytes).to_bytes().to_vec())
    }

    /// Persists the pair as a small JSON document; `keygen` output format.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let doc = KeyFile {
            secret: hex::encode(self.signing.to_bytes()),
            public: self.public().to_hex(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&doc).expect("key file encodes"))
    }

    pub fn load(path: &Path) -> Result<KeyPair, KeyFileError> {
        let text = std::fs::read_to_string(path)?;
        let doc: KeyFile = serde_json::from_str(&text)?;
        let bytes = hex::decode(&doc.secret).map_err(|_| KeyFileError::Malformed)?;
        let seed: [u8; 32] = bytes.try_into().map_err(|_| KeyFileError::Malformed)?;
        Ok(KeyPair::from_seed(seed))
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair(pub {})", self.public().to_hex())
    }
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    secret: String,
    public: String,
}

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("cannot read key file: {0}")]
    Io(#[from] std::io::Error),
    #[error("key file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("key file holds malformed key material")]
    Malformed,
}

/// Verifies `sig` over `bytes` against `key`. Empty or malformed signatures
/// simply fail verification.
pub fn verify(key: &PublicKey, bytes: &[u8], sig: &SignatureBytes) -> bool {
    let Ok(raw) = <[u8; 64]>::try_from(sig.0.as_slice()) else {
        return false;
    };
    let sig = Signature::from_bytes(&raw);
    key.0.verify(bytes, &sig).is_ok()
}

/// Trust-on-first-use key bindings: the first key registered for an ASN is
/// final. Bindings are retained forever so historical blocks stay verifiable.
#[derive(Debug, Clone, Default)]
pub struct KeyRegistry {
    keys: BTreeMap<Asn, PublicKey>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{asn} is already bound to a different key")]
pub struct KeyConflict {
    pub asn: Asn,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `key` to `asn`. Re-registering the same key is a no-op;
    /// a different key is rejected.
    pub fn register(&mut self, asn: Asn, key: PublicKey) -> Result<(), KeyConflict> {
        match self.keys.get(&asn) {
            Some(existing) if *existing != key => Err(KeyConflict { asn }),
            Some(_) => Ok(()),
            None => {
                self.keys.insert(asn, key);
                Ok(())
            }
        }
    }

    pub fn get(&self, asn: Asn) -> Option<&PublicKey> {
        self.keys.get(&asn)
    }

    pub fn contains(&self, asn: Asn) -> bool {
        self.keys.contains_key(&asn)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Snapshot of every registered participant.
    pub fn roster(&self) -> Roster {
        Roster::from_iter(self.keys.keys().copied())
    }
}

/// Derives per-ASN key pairs from a single seed. Used by the simulator and
/// by the replay tooling, where thousands of ASes need stable identities
/// without key ceremony.
#[derive(Debug)]
pub struct DeterministicKeyring {
    seed: u64,
    cache: BTreeMap<Asn, KeyPair>,
}

impl DeterministicKeyring {
    pub fn new(seed: u64) -> Self {
        DeterministicKeyring {
            seed,
            cache: BTreeMap::new(),
        }
    }

    pub fn key_for(&mut self, asn: Asn) -> &KeyPair {
        let seed = self.seed;
        self.cache.entry(asn).or_insert_with(|| {
            let mut hasher = Sha256::new();
            hasher.update(b"prefixchain-sim-key");
            hasher.update(seed.to_be_bytes());
            hasher.update(asn.0.to_be_bytes());
            KeyPair::from_seed(hasher.finalize().into())
        })
    }

    pub fn public_for(&mut self, asn: Asn) -> PublicKey {
        self.key_for(asn).public()
    }
}
