//! Genesis block construction.

use std::collections::BTreeSet;

use super::{
    compute_txid, Allocation, Asn, Block, Digest, GenesisAssignPayload, LedgerError,
    SignatureBytes, Transaction, TransactionOutput, TransactionPayload, IANA_ASN,
};

/// Default registry authority for genesis allocations.
pub const GENESIS_AUTHORITY: Asn = IANA_ASN;

/// Builds the unmined first block from ground-truth allocations.
///
/// The block is exempt from the difficulty target and carries no signatures:
/// its contents come from out-of-band trusted sources and every node checks
/// the resulting hash against its configured expected genesis hash instead.
/// Two nodes given the same allocations, authority and timestamp produce
/// byte-identical blocks.
pub fn build_genesis_block(
    allocations: &[Allocation],
    authority: Asn,
    timestamp: u64,
) -> Result<Block, LedgerError> {
    let mut seen = BTreeSet::new();
    for alloc in allocations {
        if !seen.insert((alloc.prefix, alloc.asn)) {
            return Err(LedgerError::DuplicateAllocation {
                prefix: alloc.prefix,
                asn: alloc.asn,
            });
        }
    }

    let input = TransactionPayload::GenesisAssign(GenesisAssignPayload {
        allocations: allocations.to_vec(),
    });
    let output = TransactionOutput::GenesisAssign {
        allocations: allocations.to_vec(),
    };
    let txid = compute_txid(&input, timestamp, authority)
        .expect("genesis payload invariants hold after duplicate check");
    let tx = Transaction {
        txid,
        input,
        output,
        timestamp,
        creator: authority,
        signature: SignatureBytes::default(),
    };

    let mut block = Block {
        index: 0,
        transactions: vec![tx],
        timestamp,
        mined_timestamp: timestamp,
        previous_hash: Digest::ZERO,
        nonce: 0,
        hash: Digest::ZERO,
        miner: authority,
        signature: SignatureBytes::default(),
    };
    block.hash = block.compute_hash();
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Prefix, TxType};

    #[test]
    fn empty_allocations_yield_empty_genesis_assign() {
        let block = build_genesis_block(&[], GENESIS_AUTHORITY, 0).unwrap();
        assert_eq!(block.index, 0);
        assert_eq!(block.previous_hash, Digest::ZERO);
        assert_eq!(block.nonce, 0);
        assert_eq!(block.transactions.len(), 1);
        let tx = &block.transactions[0];
        assert_eq!(tx.tx_type(), TxType::GenesisAssign);
        match &tx.input {
            TransactionPayload::GenesisAssign(p) => assert!(p.allocations.is_empty()),
            other => panic!("unexpected payload {other:?}"),
        }
        assert!(block.is_genesis());
    }

    #[test]
    fn duplicate_pairs_are_rejected() {
        let p = Prefix::v4(10, 0, 0, 0, 8).unwrap();
        let a = Allocation {
            prefix: p,
            asn: Asn(1),
        };
        let err = build_genesis_block(&[a, a], GENESIS_AUTHORITY, 0).unwrap_err();
        assert!(matches!(err, LedgerError::DuplicateAllocation { .. }));
        // Multi-origin lines are fine: same prefix, different ASNs.
        let b = Allocation {
            prefix: p,
            asn: Asn(2),
        };
        assert!(build_genesis_block(&[a, b], GENESIS_AUTHORITY, 0).is_ok());
    }

    #[test]
    fn same_inputs_build_byte_identical_blocks() {
        let p = Prefix::v4(10, 0, 0, 0, 8).unwrap();
        let allocs = vec![Allocation {
            prefix: p,
            asn: Asn(1),
        }];
        let a = build_genesis_block(&allocs, GENESIS_AUTHORITY, 1234).unwrap();
        let b = build_genesis_block(&allocs, GENESIS_AUTHORITY, 1234).unwrap();
        assert_eq!(
            crate::ledger::canonical::canonical_encode(&a),
            crate::ledger::canonical::canonical_encode(&b)
        );
        assert_eq!(a.hash, b.hash);
        let c = build_genesis_block(&allocs, GENESIS_AUTHORITY, 1235).unwrap();
        assert_ne!(a.hash, c.hash);
    }
}
