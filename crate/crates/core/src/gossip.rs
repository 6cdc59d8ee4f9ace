//! Peer-to-peer messages and their canonical encoding.

use crate::block::Block;
use crate::codec::{Decode, DecodeError, Decoder, Encode, Encoder};
use crate::hash::Digest;
use crate::tx::Transaction;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GossipMessage {
    NewBlock(Block),
    /// Ask a peer for a block we saw referenced but do not have.
    RequestBlock(Digest),
    BlockResponse(Block),
    NewTx(Transaction),
}

impl GossipMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            GossipMessage::NewBlock(_) => "new_block",
            GossipMessage::RequestBlock(_) => "request_block",
            GossipMessage::BlockResponse(_) => "block_response",
            GossipMessage::NewTx(_) => "new_tx",
        }
    }
}

impl Encode for GossipMessage {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            GossipMessage::NewBlock(b) => {
                enc.put_u8(1);
                enc.put(b);
            }
            GossipMessage::RequestBlock(d) => {
                enc.put_u8(2);
                enc.put_fixed(&d.0);
            }
            GossipMessage::BlockResponse(b) => {
                enc.put_u8(3);
                enc.put(b);
            }
            GossipMessage::NewTx(tx) => {
                enc.put_u8(4);
                enc.put(tx);
            }
        }
    }
}

impl Decode for GossipMessage {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match dec.get_u8("gossip message")? {
            1 => Ok(GossipMessage::NewBlock(dec.get()?)),
            2 => Ok(GossipMessage::RequestBlock(Digest(
                dec.get_array("requested digest")?,
            ))),
            3 => Ok(GossipMessage::BlockResponse(dec.get()?)),
            4 => Ok(GossipMessage::NewTx(dec.get()?)),
            tag => Err(DecodeError::InvalidTag {
                what: "gossip message",
                tag,
            }),
        }
    }
}
