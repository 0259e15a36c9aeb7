//! Container format for assembled programs.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "QAPE0001"
//! hdr_len    u32       length of the JSON header in bytes
//! header     hdr_len   {"qubit_count": n, "blocks": [BlockDirective...]}
//! n_words    u32
//! words      n_words × u32
//! ```

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::encode::{decode_instruction, encode_instruction, DecodeError, EncodeError};
use super::{BlockDirective, Program};

pub const MAGIC: &[u8; 8] = b"QAPE0001";

#[derive(Debug, Error)]
pub enum BinaryError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic; not an assembled program")]
    BadMagic,
    #[error("header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("word {index}: {source}")]
    Decode { index: usize, source: DecodeError },
    #[error("instruction {index}: {source}")]
    Encode { index: usize, source: EncodeError },
}

#[derive(Serialize, Deserialize)]
struct Header {
    qubit_count: u32,
    blocks: Vec<BlockDirective>,
}

pub fn write_binary<W: Write>(p: &Program, mut w: W) -> Result<(), BinaryError> {
    let header = serde_json::to_vec(&Header {
        qubit_count: p.qubit_count,
        blocks: p.blocks.clone(),
    })?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&(p.instructions.len() as u32).to_le_bytes())?;
    for (index, i) in p.instructions.iter().enumerate() {
        let word = encode_instruction(i).map_err(|source| BinaryError::Encode { index, source })?;
        w.write_all(&word.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Program, BinaryError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(BinaryError::BadMagic);
    }
    let len = read_u32(&mut r)? as usize;
    let mut hdr = vec![0u8; len];
    r.read_exact(&mut hdr)?;
    let header: Header = serde_json::from_slice(&hdr)?;
    let n = read_u32(&mut r)? as usize;
    let mut instructions = Vec::with_capacity(n);
    for index in 0..n {
        let word = read_u32(&mut r)?;
        instructions.push(decode_instruction(word).map_err(|source| BinaryError::Decode { index, source })?);
    }
    let mut p = Program::new(header.qubit_count);
    p.instructions = instructions;
    p.blocks = header.blocks;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::parse_program;

    #[test]
    fn binary_round_trip() {
        let src = ".qubits 2\n.block W1 start=0 end=3 deps=none\n0 H q0\n0 MEAS q0 -> r1\nFMR r2, r1\nBR.ne 0\n";
        let p = parse_program(src).unwrap();
        let mut buf = Vec::new();
        write_binary(&p, &mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let q = read_binary(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_foreign_bytes() {
        let r = read_binary(&b"NOTAPROGRAM....."[..]);
        assert!(matches!(r, Err(BinaryError::BadMagic)));
    }
}
