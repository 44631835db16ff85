//! The block pipeline and the streaming encrypt/decrypt state.
//!
//! Encryption of one block is `rotate left by shift -> XOR -> permute`;
//! decryption runs the exact reverse. The shift for block `b` is
//! `forward[b mod n]` of the current map and the XOR key window starts at
//! `b * block_bytes` modulo the key length, so the window keeps moving
//! across blocks. After `block_size` blocks both keys are regenerated and
//! a fresh map is built.

use crate::error::{invalid, Result};
use crate::keyschedule::{apply_iv, derive_key_pair, regenerate, KeyMaterial, KeyPair};
use crate::params::{compute_block_size, CipherParams, Granularity};
use crate::permmap::{build_map, PermutationMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

/// XORs `block` in place against the key window of `block_number`.
///
/// `block_bytes` is the stream's block length in bytes; it sets the
/// window offset `block_number * block_bytes`.
pub fn xor_layer(block: &mut [u8], block_number: u64, xor_key: &KeyMaterial, block_bytes: usize) {
    let key = xor_key.bytes();
    let mut k = window_start(block_number, block_bytes, key.len());
    for b in block.iter_mut() {
        *b ^= key[k];
        k += 1;
        if k == key.len() {
            k = 0;
        }
    }
}

fn window_start(block_number: u64, block_bytes: usize, key_len: usize) -> usize {
    ((u128::from(block_number) * block_bytes as u128) % key_len as u128) as usize
}

pub fn shift_amount(map: &PermutationMap, block_number: u64) -> usize {
    map.forward()[(block_number % map.block_size() as u64) as usize] as usize
}

#[inline]
pub(crate) fn get_bit(buf: &[u8], j: usize) -> bool {
    buf[j / 8] & (0x80 >> (j % 8)) != 0
}

#[inline]
pub(crate) fn set_bit(buf: &mut [u8], j: usize) {
    buf[j / 8] |= 0x80 >> (j % 8);
}

/// Rotates the elements of `block`. Bits are ordered MSB-first within
/// each byte.
pub fn rotate_block(block: &mut [u8], n: usize, direction: Direction, granularity: Granularity) {
    let len = granularity.bytes_to_elements(block.len());
    if len == 0 {
        return;
    }
    let n = n % len;
    match granularity {
        Granularity::Byte => match direction {
            Direction::Left => block.rotate_left(n),
            Direction::Right => block.rotate_right(n),
        },
        Granularity::Bit => {
            if n == 0 {
                return;
            }
            let src = block.to_vec();
            block.fill(0);
            let offset = match direction {
                Direction::Left => n,
                Direction::Right => len - n,
            };
            for k in 0..len {
                let from = if k + offset >= len { k + offset - len } else { k + offset };
                if get_bit(&src, from) {
                    set_bit(block, k);
                }
            }
        }
    }
}

/// `output[forward[i]] = input[i]`.
pub fn permute(block: &[u8], map: &PermutationMap, granularity: Granularity) -> Result<Vec<u8>> {
    check_len(block, map, granularity)?;
    let mut out = vec![0u8; block.len()];
    match granularity {
        Granularity::Byte => {
            for (b, &f) in block.iter().zip(map.forward()) {
                out[f as usize] = *b;
            }
        }
        Granularity::Bit => {
            for (i, &f) in map.forward().iter().enumerate() {
                if get_bit(block, i) {
                    set_bit(&mut out, f as usize);
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`permute`].
pub fn unpermute(block: &[u8], map: &PermutationMap, granularity: Granularity) -> Result<Vec<u8>> {
    check_len(block, map, granularity)?;
    let mut out = vec![0u8; block.len()];
    match granularity {
        Granularity::Byte => {
            for (o, &f) in out.iter_mut().zip(map.forward()) {
                *o = block[f as usize];
            }
        }
        Granularity::Bit => {
            for (i, &f) in map.forward().iter().enumerate() {
                if get_bit(block, f as usize) {
                    set_bit(&mut out, i);
                }
            }
        }
    }
    Ok(out)
}

fn check_len(block: &[u8], map: &PermutationMap, granularity: Granularity) -> Result<()> {
    let elements = granularity.bytes_to_elements(block.len());
    if elements != map.block_size() {
        return Err(invalid(format!(
            "block has {elements} elements but the map covers {}",
            map.block_size()
        )));
    }
    Ok(())
}

/// Per-stream cipher state. Blocks must be fed in order.
#[derive(Clone, Debug)]
pub struct StreamState {
    keys: KeyPair,
    params: CipherParams,
    block_size: usize,
    current_map: Option<PermutationMap>,
    block_number: u64,
    blocks_since_regen: u64,
    regenerations: u64,
    scratch: Vec<u8>,
}

impl StreamState {
    /// Derives keys from `password`, applies the IV (if any) and sizes
    /// the block from the resulting map key.
    pub fn new(password: &[u8], iv: Option<&[u8]>, params: CipherParams) -> Result<Self> {
        let keys = derive_key_pair(password, params.hash_alg)?;
        let keys = match iv {
            Some(iv) => apply_iv(&keys, iv, params.hash_alg)?,
            None => keys,
        };
        Self::from_keys(keys, params)
    }

    pub fn from_keys(keys: KeyPair, params: CipherParams) -> Result<Self> {
        let block_size = compute_block_size(&params, &keys.map_key)?;
        Ok(Self::with_block_size(keys, params, block_size))
    }

    /// A state with an explicit block size, bypassing the keyed sizing.
    pub fn with_block_size(keys: KeyPair, params: CipherParams, block_size: usize) -> Self {
        StreamState {
            keys,
            params,
            block_size,
            current_map: None,
            block_number: 0,
            blocks_since_regen: 0,
            regenerations: 0,
            scratch: Vec::new(),
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Block length in bytes of storage.
    pub fn block_bytes(&self) -> usize {
        self.params.granularity.elements_to_bytes(self.block_size)
    }

    pub fn params(&self) -> &CipherParams {
        &self.params
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn block_number(&self) -> u64 {
        self.block_number
    }

    pub fn blocks_since_regen(&self) -> u64 {
        self.blocks_since_regen
    }

    pub(crate) fn set_block_number(&mut self, block_number: u64) {
        self.block_number = block_number;
    }

    pub fn regenerations(&self) -> u64 {
        self.regenerations
    }

    /// The map for full-size blocks in the current epoch, building it if
    /// needed.
    pub fn current_map(&mut self) -> Result<&PermutationMap> {
        if self.current_map.is_none() {
            let method = self.params.method_for(self.block_size);
            let map = build_map(method, self.block_size, &mut self.keys.map_key)?;
            self.current_map = Some(map);
        }
        Ok(self.current_map.as_ref().expect("map built above"))
    }

    /// The map that the next block of `len_bytes` bytes will use.
    ///
    /// Full-size blocks use the epoch map. Shorter blocks get a transient
    /// map of their own size built from a copy of the map key, so the
    /// epoch state is left untouched.
    pub fn map_for(&mut self, len_bytes: usize) -> Result<PermutationMap> {
        let elements = self.check_block(len_bytes)?;
        if elements == self.block_size {
            return self.current_map().cloned();
        }
        self.transient_map(elements)
    }

    fn transient_map(&self, elements: usize) -> Result<PermutationMap> {
        let mut key = self.keys.map_key.clone();
        build_map(self.params.method_for(elements), elements, &mut key)
    }

    fn check_block(&self, len_bytes: usize) -> Result<usize> {
        let g = self.params.granularity;
        let elements = g.bytes_to_elements(len_bytes);
        if elements > self.block_size || elements < g.min_elements() {
            return Err(invalid(format!(
                "block of {elements} elements is outside [{}, {}]",
                g.min_elements(),
                self.block_size
            )));
        }
        Ok(elements)
    }

    pub fn encrypt_block(&mut self, block: &[u8]) -> Result<Vec<u8>> {
        let mut out = block.to_vec();
        self.encrypt_in_place(&mut out)?;
        Ok(out)
    }

    pub fn decrypt_block(&mut self, block: &[u8]) -> Result<Vec<u8>> {
        let mut out = block.to_vec();
        self.decrypt_in_place(&mut out)?;
        Ok(out)
    }

    pub fn encrypt_in_place(&mut self, block: &mut [u8]) -> Result<()> {
        self.process(block, true)
    }

    pub fn decrypt_in_place(&mut self, block: &mut [u8]) -> Result<()> {
        self.process(block, false)
    }

    fn process(&mut self, block: &mut [u8], encrypt: bool) -> Result<()> {
        let elements = self.check_block(block.len())?;
        let transient = if elements == self.block_size {
            self.current_map()?;
            None
        } else {
            Some(self.transient_map(elements)?)
        };
        let map = match &transient {
            Some(m) => m,
            None => self.current_map.as_ref().expect("built above"),
        };
        let shift = shift_amount(map, self.block_number);
        let block_bytes = self.params.granularity.elements_to_bytes(self.block_size);
        let g = self.params.granularity;
        let xor_key = &self.keys.xor_key;
        let bn = self.block_number;
        match (g, encrypt) {
            (Granularity::Byte, true) => {
                encrypt_bytes_fused(block, map, shift, bn, xor_key, block_bytes, &mut self.scratch)
            }
            (Granularity::Byte, false) => {
                decrypt_bytes_fused(block, map, shift, bn, xor_key, block_bytes, &mut self.scratch)
            }
            (Granularity::Bit, true) => {
                rotate_block(block, shift, Direction::Left, g);
                xor_layer(block, bn, xor_key, block_bytes);
                let out = permute(block, map, g)?;
                block.copy_from_slice(&out);
            }
            (Granularity::Bit, false) => {
                let mut out = unpermute(block, map, g)?;
                xor_layer(&mut out, bn, xor_key, block_bytes);
                rotate_block(&mut out, shift, Direction::Right, g);
                block.copy_from_slice(&out);
            }
        }
        self.advance()
    }

    fn advance(&mut self) -> Result<()> {
        self.block_number += 1;
        self.blocks_since_regen += 1;
        if self.blocks_since_regen == self.block_size as u64 {
            self.regenerate_epoch()?;
        }
        Ok(())
    }

    /// Regenerates both keys and drops the epoch map; the next full block
    /// rebuilds it. The block size is kept.
    pub fn regenerate_epoch(&mut self) -> Result<()> {
        let alg = self.params.hash_alg;
        self.keys.xor_key = regenerate(&self.keys.xor_key, alg)?;
        self.keys.map_key = regenerate(&self.keys.map_key, alg)?;
        self.current_map = None;
        self.blocks_since_regen = 0;
        self.regenerations += 1;
        Ok(())
    }
}

// rotate + XOR + permute in a single pass:
//   out[forward[k]] = in[(k + shift) mod n] ^ key[(start + k) mod L]
fn encrypt_bytes_fused(
    block: &mut [u8],
    map: &PermutationMap,
    shift: usize,
    block_number: u64,
    xor_key: &KeyMaterial,
    block_bytes: usize,
    scratch: &mut Vec<u8>,
) {
    let n = block.len();
    let key = xor_key.bytes();
    scratch.clear();
    scratch.resize(n, 0);
    let mut src = shift % n;
    let mut k = window_start(block_number, block_bytes, key.len());
    for &f in map.forward() {
        scratch[f as usize] = block[src] ^ key[k];
        src += 1;
        if src == n {
            src = 0;
        }
        k += 1;
        if k == key.len() {
            k = 0;
        }
    }
    block.copy_from_slice(scratch);
}

fn decrypt_bytes_fused(
    block: &mut [u8],
    map: &PermutationMap,
    shift: usize,
    block_number: u64,
    xor_key: &KeyMaterial,
    block_bytes: usize,
    scratch: &mut Vec<u8>,
) {
    let n = block.len();
    let key = xor_key.bytes();
    scratch.clear();
    scratch.resize(n, 0);
    let mut dst = shift % n;
    let mut k = window_start(block_number, block_bytes, key.len());
    for &f in map.forward() {
        scratch[dst] = block[f as usize] ^ key[k];
        dst += 1;
        if dst == n {
            dst = 0;
        }
        k += 1;
        if k == key.len() {
            k = 0;
        }
    }
    block.copy_from_slice(scratch);
}
