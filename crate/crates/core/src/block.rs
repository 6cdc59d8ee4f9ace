use serde::{Deserialize, Serialize};

use crate::codec::{Decode, DecodeError, Decoder, Encode, Encoder};
use crate::hash::{digest, Digest};
use crate::keys::{Address, KeyPair, Signature};
use crate::merkle::merkle_root;
use crate::tx::Transaction;

/// Block weight for the proposer scheduled at the block's height.
pub const WEIGHT_IN_TURN: u8 = 2;
/// Block weight for any other authorized proposer.
pub const WEIGHT_OUT_OF_TURN: u8 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub height: u64,
    pub parent: Digest,
    pub state_root: Digest,
    pub tx_root: Digest,
    pub proposer: Address,
    pub timestamp: u64,
    pub weight: u8,
    /// Absent only on the genesis block.
    pub signature: Option<Signature>,
}

impl BlockHeader {
    fn encode_unsigned(&self, enc: &mut Encoder) {
        enc.put_u64(self.height);
        enc.put_fixed(&self.parent.0);
        enc.put_fixed(&self.state_root.0);
        enc.put_fixed(&self.tx_root.0);
        enc.put_fixed(&self.proposer.0);
        enc.put_u64(self.timestamp);
        enc.put_u8(self.weight);
    }

    /// Digest the proposer signs: every header field before the signature.
    pub fn signing_digest(&self) -> Digest {
        let mut enc = Encoder::new();
        self.encode_unsigned(&mut enc);
        digest(&enc.into_bytes())
    }

    /// The block identifier: digest of the full canonical header encoding.
    pub fn digest(&self) -> Digest {
        digest(&self.to_bytes())
    }

    pub fn sign(&mut self, key: &KeyPair) {
        self.signature = Some(key.sign(&self.signing_digest()));
    }

    pub fn signature_valid(&self) -> bool {
        self.signature
            .as_ref()
            .is_some_and(|sig| sig.verify_by(&self.proposer, &self.signing_digest()))
    }

    pub fn is_in_turn(&self) -> bool {
        self.weight == WEIGHT_IN_TURN
    }
}

impl Encode for BlockHeader {
    fn encode(&self, enc: &mut Encoder) {
        self.encode_unsigned(enc);
        match &self.signature {
            None => enc.put_u8(0),
            Some(sig) => {
                enc.put_u8(1);
                sig.encode(enc);
            }
        }
    }
}

impl Decode for BlockHeader {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let height = dec.get_u64("height")?;
        let parent = Digest(dec.get_array("parent")?);
        let state_root = Digest(dec.get_array("state root")?);
        let tx_root = Digest(dec.get_array("tx root")?);
        let proposer = Address(dec.get_array("proposer")?);
        let timestamp = dec.get_u64("timestamp")?;
        let weight = dec.get_u8("weight")?;
        let signature = match dec.get_u8("signature presence")? {
            0 => None,
            1 => Some(dec.get()?),
            tag => {
                return Err(DecodeError::InvalidTag {
                    what: "signature presence",
                    tag,
                })
            }
        };
        Ok(BlockHeader {
            height,
            parent,
            state_root,
            tx_root,
            proposer,
            timestamp,
            weight,
            signature,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub txs: Vec<Transaction>,
}

impl Block {
    pub fn digest(&self) -> Digest {
        self.header.digest()
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn tx_digests(&self) -> Vec<Digest> {
        self.txs.iter().map(Transaction::digest).collect()
    }

    pub fn compute_tx_root(&self) -> Digest {
        merkle_root(&self.tx_digests())
    }
}

impl Encode for Block {
    fn encode(&self, enc: &mut Encoder) {
        self.header.encode(enc);
        enc.put_seq(&self.txs);
    }
}

impl Decode for Block {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Block {
            header: dec.get()?,
            txs: dec.get_seq("transactions")?,
        })
    }
}

/// Canonical byte encoding of a block.
pub fn canonical_serialize(block: &Block) -> Vec<u8> {
    block.to_bytes()
}

pub fn canonical_deserialize(bytes: &[u8]) -> Result<Block, DecodeError> {
    Block::from_bytes(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::TxKind;
    use proptest::prelude::*;

    fn header(height: u64) -> BlockHeader {
        BlockHeader {
            height,
            parent: digest(b"p"),
            state_root: digest(b"s"),
            tx_root: merkle_root(&[]),
            proposer: KeyPair::from_label("v").address(),
            timestamp: 5 * height,
            weight: WEIGHT_IN_TURN,
            signature: None,
        }
    }

    fn arb_block() -> impl Strategy<Value = Block> {
        (
            any::<u64>(),
            any::<[u8; 32]>(),
            any::<[u8; 32]>(),
            any::<u64>(),
            1u8..=2,
            any::<bool>(),
            prop::collection::vec((any::<u64>(), any::<u64>(), any::<u128>()), 0..4),
        )
            .prop_map(|(height, parent, state, ts, weight, signed, txs)| {
                let key = KeyPair::from_label("prop");
                let txs: Vec<Transaction> = txs
                    .into_iter()
                    .map(|(nonce, gas, amount)| {
                        Transaction::signed(
                            &key,
                            nonce,
                            gas,
                            TxKind::Transfer {
                                to: Address::well_known(7),
                                amount,
                            },
                        )
                    })
                    .collect();
                let mut header = BlockHeader {
                    height,
                    parent: Digest(parent),
                    state_root: Digest(state),
                    tx_root: merkle_root(&txs.iter().map(Transaction::digest).collect::<Vec<_>>()),
                    proposer: key.address(),
                    timestamp: ts,
                    weight,
                    signature: None,
                };
                if signed {
                    header.sign(&key);
                }
                Block { header, txs }
            })
    }

    #[test]
    fn genesis_like_block_round_trips() {
        let block = Block {
            header: header(0),
            txs: vec![],
        };
        let bytes = canonical_serialize(&block);
        assert_eq!(canonical_deserialize(&bytes).unwrap(), block);
    }

    #[test]
    fn zero_and_one_tx_blocks_encode_differently() {
        let key = KeyPair::from_label("a");
        let empty = Block {
            header: header(1),
            txs: vec![],
        };
        let mut one = empty.clone();
        one.txs.push(Transaction::signed(
            &key,
            0,
            21,
            TxKind::Transfer {
                to: Address::ZERO,
                amount: 1,
            },
        ));
        assert_ne!(canonical_serialize(&empty), canonical_serialize(&one));
    }

    #[test]
    fn signature_covers_header_fields() {
        let key = KeyPair::from_label("v");
        let mut h = header(3);
        h.sign(&key);
        assert!(h.signature_valid());
        let mut t = h.clone();
        t.timestamp += 1;
        assert!(!t.signature_valid());
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

        #[test]
        fn serialize_deserialize_is_identity(block in arb_block()) {
            let bytes = canonical_serialize(&block);
            prop_assert_eq!(canonical_deserialize(&bytes).unwrap(), block.clone());
            prop_assert_eq!(canonical_serialize(&block.clone()), bytes);
        }
    }

    proptest! {
        #[test]
        fn any_header_field_change_changes_digest(block in arb_block(), field in 0usize..8, delta in 1u8..=255) {
            let h = block.header.clone();
            let mut m = h.clone();
            match field {
                0 => m.height = m.height.wrapping_add(delta as u64),
                1 => m.parent.0[0] ^= delta,
                2 => m.state_root.0[31] ^= delta,
                3 => m.tx_root.0[7] ^= delta,
                4 => m.proposer.0[3] ^= delta,
                5 => m.timestamp = m.timestamp.wrapping_add(delta as u64),
                6 => m.weight = m.weight.wrapping_add(delta),
                _ => {
                    m.signature = match m.signature {
                        Some(mut s) => { s.bytes[0] ^= delta; Some(s) }
                        None => Some(KeyPair::from_label("x").sign(&digest(b"x"))),
                    }
                }
            }
            prop_assert_ne!(h.digest(), m.digest());
        }
    }
}
