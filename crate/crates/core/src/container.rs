//! File container and packet framing.
//!
//! Container layout (all integers big-endian):
//!
//! ```text
//! offset  size    field
//! 0       4       magic "PZLE"
//! 4       1       version (1)
//! 5       1       hash algorithm id (1 = SHA-256, 2 = SHA-512)
//! 6       1       flags (bit 0: granularity, 0 = byte, 1 = bit)
//! 7       2       IV length in bytes (>= 8)
//! 9       n       IV
//! 9+n     8       plaintext length in bytes
//! 17+n    ...     ciphertext blocks, tail zero-padded to the minimum
//! ```
//!
//! The reference block size is deliberately absent: the actual block size
//! stays secret and the caller must supply the reference size again to
//! decrypt.
//!
//! There is no integrity tag. A wrong password or reference block size
//! decrypts to garbage without any error.

use std::io::{self, Read, Write};

use crate::cipher::StreamState;
use crate::error::{invalid, PuzzleError, Result};
use crate::keyschedule::{HashAlg, KeyPair};
use crate::params::{plan_message, CipherParams, Granularity};

pub const MAGIC: [u8; 4] = *b"PZLE";
pub const VERSION: u8 = 1;
pub const MIN_IV_LEN: usize = 8;
pub const DEFAULT_IV_LEN: usize = 16;

const FLAG_BIT_GRANULARITY: u8 = 0x01;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContainerHeader {
    pub version: u8,
    pub hash_alg: HashAlg,
    pub granularity: Granularity,
    pub iv: Vec<u8>,
    pub plaintext_len: u64,
}

impl ContainerHeader {
    pub fn encoded_len(&self) -> usize {
        17 + self.iv.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.iv.len() < MIN_IV_LEN || self.iv.len() > u16::MAX as usize {
            return Err(invalid(format!("IV length {} is out of range", self.iv.len())));
        }
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.push(self.version);
        out.push(self.hash_alg.id());
        out.push(self.granularity.flag());
        out.extend_from_slice(&(self.iv.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.iv);
        out.extend_from_slice(&self.plaintext_len.to_be_bytes());
        Ok(out)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut fixed = [0u8; 9];
        read_exact_at(&mut r, &mut fixed, 0)?;
        if fixed[..4] != MAGIC {
            return Err(PuzzleError::Format("bad magic".into()));
        }
        if fixed[4] != VERSION {
            return Err(PuzzleError::Format(format!("unsupported version {}", fixed[4])));
        }
        let hash_alg = HashAlg::from_id(fixed[5])
            .ok_or_else(|| PuzzleError::Format(format!("unknown hash id {}", fixed[5])))?;
        let flags = fixed[6];
        if flags & !FLAG_BIT_GRANULARITY != 0 {
            return Err(PuzzleError::Format(format!("unknown flags {flags:#04x}")));
        }
        let granularity = if flags & FLAG_BIT_GRANULARITY != 0 {
            Granularity::Bit
        } else {
            Granularity::Byte
        };
        let iv_len = u16::from_be_bytes([fixed[7], fixed[8]]) as usize;
        if iv_len < MIN_IV_LEN {
            return Err(PuzzleError::Format(format!("IV length {iv_len} is below {MIN_IV_LEN}")));
        }
        let mut iv = vec![0u8; iv_len];
        read_exact_at(&mut r, &mut iv, 9)?;
        let mut len = [0u8; 8];
        read_exact_at(&mut r, &mut len, 9 + iv_len as u64)?;
        Ok(ContainerHeader {
            version: VERSION,
            hash_alg,
            granularity,
            iv,
            plaintext_len: u64::from_be_bytes(len),
        })
    }
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            PuzzleError::Format(format!("truncated container at byte offset {offset}"))
        } else {
            PuzzleError::Io { offset, source: e }
        }
    })
}

/// Reads until `buf` is full or the input ends; returns the byte count.
fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(source) => {
                return Err(PuzzleError::Io {
                    offset: offset + got as u64,
                    source,
                })
            }
        }
    }
    Ok(got)
}

fn write_at<W: Write>(w: &mut W, buf: &[u8], offset: u64) -> Result<()> {
    w.write_all(buf).map_err(|source| PuzzleError::Io { offset, source })
}

/// A fresh IV from the operating system's randomness source.
pub fn random_iv() -> Result<Vec<u8>> {
    let mut iv = vec![0u8; DEFAULT_IV_LEN];
    getrandom::fill(&mut iv).map_err(|e| PuzzleError::Io {
        offset: 0,
        source: io::Error::other(e.to_string()),
    })?;
    Ok(iv)
}

/// What a container operation did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamSummary {
    pub blocks: u64,
    pub block_size: usize,
    pub plaintext_len: u64,
}

/// Encrypts `plaintext_len` bytes read from `input` into a container.
///
/// Memory use is bounded by a few block lengths regardless of the input
/// size.
pub fn encrypt_stream<R: Read, W: Write>(
    mut input: R,
    plaintext_len: u64,
    mut output: W,
    password: &[u8],
    iv: &[u8],
    params: &CipherParams,
) -> Result<StreamSummary> {
    params.validate()?;
    if plaintext_len == 0 {
        return Err(invalid("plaintext must not be empty"));
    }
    let header = ContainerHeader {
        version: VERSION,
        hash_alg: params.hash_alg,
        granularity: params.granularity,
        iv: iv.to_vec(),
        plaintext_len,
    };
    let encoded = header.encode()?;
    let mut state = StreamState::new(password, Some(iv), params.clone())?;
    let plan = plan_message(plaintext_len, params, state.block_size())?;
    write_at(&mut output, &encoded, 0)?;
    let mut out_pos = encoded.len() as u64;
    let mut in_pos = 0u64;
    let mut buf = Vec::with_capacity(state.block_bytes().max(params.granularity.min_bytes()));
    for spec in plan.blocks() {
        buf.clear();
        buf.resize(spec.padded_len, 0);
        input.read_exact(&mut buf[..spec.data_len]).map_err(|e| {
            let e = if e.kind() == io::ErrorKind::UnexpectedEof {
                io::Error::new(io::ErrorKind::UnexpectedEof, "input shorter than declared length")
            } else {
                e
            };
            PuzzleError::Io { offset: in_pos, source: e }
        })?;
        in_pos += spec.data_len as u64;
        state.encrypt_in_place(&mut buf)?;
        write_at(&mut output, &buf, out_pos)?;
        out_pos += buf.len() as u64;
    }
    output.flush().map_err(|source| PuzzleError::Io { offset: out_pos, source })?;
    Ok(StreamSummary {
        blocks: plan.block_count(),
        block_size: state.block_size(),
        plaintext_len,
    })
}

/// Decrypts a container. `params` supplies the out-of-band reference
/// block size and granularity; the hash algorithm comes from the header.
pub fn decrypt_stream<R: Read, W: Write>(
    mut input: R,
    mut output: W,
    password: &[u8],
    params: &CipherParams,
) -> Result<StreamSummary> {
    let header = ContainerHeader::read_from(&mut input)?;
    if header.granularity != params.granularity {
        return Err(invalid(format!(
            "container uses {:?} granularity but {:?} was requested",
            header.granularity, params.granularity
        )));
    }
    if header.plaintext_len == 0 {
        return Err(PuzzleError::Format("container declares an empty plaintext".into()));
    }
    let mut params = params.clone();
    params.hash_alg = header.hash_alg;
    params.validate()?;
    let mut state = StreamState::new(password, Some(&header.iv), params.clone())?;
    let plan = plan_message(header.plaintext_len, &params, state.block_size())?;
    let slack = params.granularity.min_bytes();
    let last = plan.block_count() - 1;
    let mut in_pos = header.encoded_len() as u64;
    let mut out_pos = 0u64;
    let mut buf = Vec::new();
    for spec in plan.blocks() {
        buf.clear();
        buf.resize(spec.padded_len, 0);
        if spec.index == last {
            // A wrong reference block size shifts the padded length by less
            // than one minimum block; that must decrypt to garbage, not fail.
            let got = read_up_to(&mut input, &mut buf, in_pos)?;
            if got < buf.len() {
                if buf.len() - got >= slack {
                    return Err(PuzzleError::Format(format!(
                        "truncated container at byte offset {}",
                        in_pos + got as u64
                    )));
                }
                log::warn!("container body is {} bytes short for these parameters", buf.len() - got);
                buf[got..].fill(0);
            }
        } else {
            read_exact_at(&mut input, &mut buf, in_pos)?;
        }
        in_pos += buf.len() as u64;
        state.decrypt_in_place(&mut buf)?;
        write_at(&mut output, &buf[..spec.data_len], out_pos)?;
        out_pos += spec.data_len as u64;
    }
    let mut trailing = vec![0u8; slack];
    let extra = read_up_to(&mut input, &mut trailing, in_pos)?;
    if extra == slack {
        return Err(PuzzleError::Format(format!("trailing data after byte offset {in_pos}")));
    } else if extra > 0 {
        log::warn!("ignoring {extra} trailing bytes; parameters may not match the container");
    }
    output.flush().map_err(|source| PuzzleError::Io { offset: out_pos, source })?;
    Ok(StreamSummary {
        blocks: plan.block_count(),
        block_size: state.block_size(),
        plaintext_len: header.plaintext_len,
    })
}

pub fn encrypt_bytes(plaintext: &[u8], password: &[u8], iv: &[u8], params: &CipherParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    encrypt_stream(plaintext, plaintext.len() as u64, &mut out, password, iv, params)?;
    Ok(out)
}

pub fn decrypt_bytes(container: &[u8], password: &[u8], params: &CipherParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    decrypt_stream(container, &mut out, password, params)?;
    Ok(out)
}

fn packet_state(len: usize, seq: u64, keys: &KeyPair, params: &CipherParams) -> Result<StreamState> {
    let g = params.granularity;
    if len < g.min_bytes() {
        return Err(invalid(format!(
            "packet of {len} bytes is below the {} byte minimum for {g:?} granularity",
            g.min_bytes()
        )));
    }
    let mut state = StreamState::with_block_size(keys.clone(), params.clone(), g.bytes_to_elements(len));
    state.set_block_number(seq);
    Ok(state)
}

/// Encrypts one packet as a single block whose size is the payload size
/// and whose block number is `seq`.
pub fn encrypt_packet(payload: &[u8], seq: u64, keys: &KeyPair, params: &CipherParams) -> Result<Vec<u8>> {
    packet_state(payload.len(), seq, keys, params)?.encrypt_block(payload)
}

pub fn decrypt_packet(payload: &[u8], seq: u64, keys: &KeyPair, params: &CipherParams) -> Result<Vec<u8>> {
    packet_state(payload.len(), seq, keys, params)?.decrypt_block(payload)
}
