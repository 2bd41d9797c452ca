//! Canonical wire encoding.
//!
//! Hashes and signatures must be reproducible across nodes, so every entity
//! is reduced to one fixed byte form: a JSON document with keys sorted
//! lexicographically, no insignificant whitespace, integers as decimal
//! literals, byte strings and digests as lowercase hex, and prefixes in
//! `address/len` text form. These bytes are the bit-exact input to
//! [`content_hash`] and to signing.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest as _, Sha256};

use super::Digest;

/// Encodes a ledger value to its canonical byte form.
///
/// Total over the ledger types: they contain no floats and no non-string map
/// keys, which are the only values JSON cannot represent canonically.
pub fn canonical_encode<T: Serialize>(value: &T) -> Vec<u8> {
    // Round-tripping through Value sorts object keys (serde_json maps are
    // BTreeMaps); serializing a struct directly would keep field order.
    let value = serde_json::to_value(value).expect("ledger types always encode");
    serde_json::to_vec(&value).expect("json values always serialize")
}

/// Decodes a canonical byte form back into a typed value.
pub fn canonical_decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, serde_json::Error> {
    serde_json::from_slice(bytes)
}

/// SHA-256 of the given bytes.
pub fn content_hash(bytes: &[u8]) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    Digest(hasher.finalize().into())
}

/// Convenience: hash of a value's canonical encoding.
pub fn hash_value<T: Serialize>(value: &T) -> Digest {
    content_hash(&canonical_encode(value))
}
