//! Proof of Work: candidate assembly into blocks, the nonce search, and
//! verification.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::ledger::canonical::content_hash;
use crate::ledger::crypto::KeyPair;
use crate::ledger::{Asn, Block, Digest, LedgerError, SignatureBytes, Transaction};

/// PoW target expressed as leading zero hex characters of the block hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Difficulty(u8);

impl Difficulty {
    pub fn new(leading_zero_hex_chars: u8) -> Result<Self, LedgerError> {
        if (1..=16).contains(&leading_zero_hex_chars) {
            Ok(Difficulty(leading_zero_hex_chars))
        } else {
            Err(LedgerError::BadDifficulty(leading_zero_hex_chars))
        }
    }

    pub fn get(&self) -> u8 {
        self.0
    }
}

/// How often the nonce loop polls the abort signal.
pub const ABORT_CHECK_INTERVAL: u64 = 1024;

/// Number of leading zero hex characters of a digest.
pub fn leading_zero_hex(digest: &Digest) -> u32 {
    let mut count = 0;
    for byte in digest.as_bytes() {
        if *byte == 0 {
            count += 2;
        } else if byte >> 4 == 0 {
            count += 1;
            break;
        } else {
            break;
        }
    }
    count
}

pub fn meets_difficulty(digest: &Digest, difficulty: Difficulty) -> bool {
    leading_zero_hex(digest) >= u32::from(difficulty.get())
}

/// Builds an unmined candidate block on top of the given head.
pub fn build_candidate(
    index: u64,
    transactions: Vec<Transaction>,
    previous_hash: Digest,
    timestamp: u64,
    miner: Asn,
) -> Block {
    Block {
        index,
        transactions,
        timestamp,
        mined_timestamp: 0,
        previous_hash,
        nonce: 0,
        hash: Digest::ZERO,
        miner,
        signature: SignatureBytes::default(),
    }
}

/// Result of a mining attempt. An abort is not an error; the candidate's
/// transactions simply stay in the mempool.
#[derive(Debug)]
pub enum MineOutcome {
    Mined(Block),
    Aborted,
}

/// Searches nonces from 0 upward until the block hash meets the difficulty
/// target, then timestamps and signs the block.
///
/// The preimage is canonical JSON with the nonce digits patched in place, so
/// the loop costs one SHA-256 per attempt instead of a re-serialization. The
/// miner ASN sits inside the preimage, which keeps two miners from racing
/// identical nonce spaces over the same transactions.
pub fn mine(
    mut candidate: Block,
    difficulty: Difficulty,
    abort: &AtomicBool,
    key: &KeyPair,
    now: impl Fn() -> u64,
) -> MineOutcome {
    candidate.nonce = 0;
    let preimage = candidate.hash_preimage();
    let marker = b"\"nonce\":0";
    let split = find_subslice(&preimage, marker).expect("canonical block form names its nonce");
    let prefix = &preimage[..split + marker.len() - 1];
    let suffix = &preimage[split + marker.len()..];

    let mut bytes = Vec::with_capacity(prefix.len() + 20 + suffix.len());
    let mut digits = itoa_buf();
    let mut nonce: u64 = 0;
    loop {
        if nonce % ABORT_CHECK_INTERVAL == 0 && abort.load(Ordering::Relaxed) {
            return MineOutcome::Aborted;
        }
        bytes.clear();
        bytes.extend_from_slice(prefix);
        bytes.extend_from_slice(format_u64(&mut digits, nonce));
        bytes.extend_from_slice(suffix);
        let hash = content_hash(&bytes);
        if meets_difficulty(&hash, difficulty) {
            candidate.nonce = nonce;
            candidate.hash = hash;
            candidate.mined_timestamp = now();
            candidate.signature = key.sign(hash.as_bytes());
            debug_assert_eq!(candidate.compute_hash(), hash);
            return MineOutcome::Mined(candidate);
        }
        nonce += 1;
    }
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack
        .windows(needle.len())
        .position(|window| window == needle)
}

fn itoa_buf() -> [u8; 20] {
    [0; 20]
}

/// Renders a u64 as decimal digits without allocating.
fn format_u64(buf: &mut [u8; 20], mut value: u64) -> &[u8] {
    let mut pos = buf.len();
    loop {
        pos -= 1;
        buf[pos] = b'0' + (value % 10) as u8;
        value /= 10;
        if value == 0 {
            break;
        }
    }
    &buf[pos..]
}

/// Recomputes the block hash from its contents and checks both stored-hash
/// equality and the leading-zero target. Genesis blocks are exempt.
pub fn verify_pow(block: &Block, difficulty: Difficulty) -> bool {
    if block.is_genesis() {
        return true;
    }
    let recomputed = block.compute_hash();
    recomputed == block.hash && meets_difficulty(&block.hash, difficulty)
}
