//! Chain export stream: each block as a big-endian `u32` length followed by
//! its canonical encoding.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::block::Block;
use crate::codec::{Decode, DecodeError, Encode, MAX_FIELD_LEN};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("block {index}: {source}")]
    Decode { index: usize, source: DecodeError },
    #[error("truncated export stream")]
    Truncated,
}

pub fn write_export<'a, W: Write>(
    mut out: W,
    blocks: impl IntoIterator<Item = &'a Block>,
) -> io::Result<()> {
    for block in blocks {
        out.write_all(&frame(block))?;
    }
    out.flush()
}

/// One length-prefixed block.
pub fn frame(block: &Block) -> Vec<u8> {
    let bytes = block.to_bytes();
    let mut out = Vec::with_capacity(4 + bytes.len());
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(&bytes);
    out
}

pub fn encode_export<'a>(blocks: impl IntoIterator<Item = &'a Block>) -> Vec<u8> {
    let mut out = Vec::new();
    write_export(&mut out, blocks).expect("writing to a Vec cannot fail");
    out
}

pub fn decode_export(bytes: &[u8]) -> Result<Vec<Block>, ExportError> {
    read_export(bytes)
}

pub fn read_export<R: Read>(mut input: R) -> Result<Vec<Block>, ExportError> {
    let mut blocks = Vec::new();
    loop {
        let mut len = [0u8; 4];
        match read_full(&mut input, &mut len)? {
            0 => return Ok(blocks),
            4 => {}
            _ => return Err(ExportError::Truncated),
        }
        let len = u32::from_be_bytes(len);
        if len > MAX_FIELD_LEN {
            return Err(ExportError::Decode {
                index: blocks.len(),
                source: DecodeError::LengthOverflow(len as u64),
            });
        }
        let mut buf = vec![0u8; len as usize];
        if read_full(&mut input, &mut buf)? != buf.len() {
            return Err(ExportError::Truncated);
        }
        let block = Block::from_bytes(&buf).map_err(|source| ExportError::Decode {
            index: blocks.len(),
            source,
        })?;
        blocks.push(block);
    }
}

fn read_full<R: Read>(input: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}
