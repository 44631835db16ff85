//! Block sizing, granularity and map-method selection.

use crate::error::{invalid, Result};
use crate::keyschedule::{HashAlg, KeyMaterial};

pub const MIN_BYTE_BLOCK: usize = 100;
pub const MIN_BIT_BLOCK: usize = 128;
pub const DEFAULT_METHOD_THRESHOLD: usize = 10_000;

/// Whether the permuted elements are bytes or bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Granularity {
    #[default]
    Byte,
    Bit,
}

impl Granularity {
    /// Smallest block, in elements.
    pub fn min_elements(self) -> usize {
        match self {
            Granularity::Byte => MIN_BYTE_BLOCK,
            Granularity::Bit => MIN_BIT_BLOCK,
        }
    }

    pub fn bits_per_element(self) -> usize {
        match self {
            Granularity::Byte => 8,
            Granularity::Bit => 1,
        }
    }

    /// Smallest block, in bytes of storage.
    pub fn min_bytes(self) -> usize {
        self.elements_to_bytes(self.min_elements())
    }

    pub fn elements_to_bytes(self, elements: usize) -> usize {
        match self {
            Granularity::Byte => elements,
            Granularity::Bit => elements / 8,
        }
    }

    pub fn bytes_to_elements(self, bytes: usize) -> usize {
        match self {
            Granularity::Byte => bytes,
            Granularity::Bit => bytes * 8,
        }
    }

    /// Header flag bit.
    pub fn flag(self) -> u8 {
        match self {
            Granularity::Byte => 0,
            Granularity::Bit => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MapMethod {
    Unfolding,
    Iteration,
}

impl std::fmt::Display for MapMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MapMethod::Unfolding => f.write_str("unfolding"),
            MapMethod::Iteration => f.write_str("iteration"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CipherParams {
    /// In elements: bytes for byte granularity, bits for bit granularity.
    pub reference_block_size: usize,
    pub granularity: Granularity,
    pub hash_alg: HashAlg,
    /// Blocks up to and including this many elements use unfolding.
    pub method_threshold: usize,
    pub method_override: Option<MapMethod>,
}

impl CipherParams {
    pub fn new(reference_block_size: usize, granularity: Granularity, hash_alg: HashAlg) -> Self {
        CipherParams {
            reference_block_size,
            granularity,
            hash_alg,
            method_threshold: DEFAULT_METHOD_THRESHOLD,
            method_override: None,
        }
    }

    pub fn with_method(mut self, method: MapMethod) -> Self {
        self.method_override = Some(method);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.reference_block_size;
        match self.granularity {
            Granularity::Byte if r < MIN_BYTE_BLOCK => Err(invalid(format!(
                "reference block size {r} is below the byte minimum {MIN_BYTE_BLOCK}"
            ))),
            Granularity::Bit if r < MIN_BIT_BLOCK || !r.is_multiple_of(8) => Err(invalid(format!(
                "reference block size {r} must be a multiple of 8 and at least {MIN_BIT_BLOCK} bits"
            ))),
            _ if self.method_threshold == 0 => Err(invalid("method threshold must be positive")),
            _ => Ok(()),
        }
    }

    /// Method for a block of `block_size` elements under this configuration.
    pub fn method_for(&self, block_size: usize) -> MapMethod {
        self.method_override
            .unwrap_or_else(|| select_method_with(block_size, self.method_threshold))
    }
}

impl Default for CipherParams {
    fn default() -> Self {
        CipherParams::new(4096, Granularity::Byte, HashAlg::Sha512)
    }
}

/// `R + (K[0] + ... + K[5]) mod floor(R/2)`, with bit blocks rounded down
/// to a multiple of 8. The key cursor is not advanced.
pub fn compute_block_size(params: &CipherParams, map_key: &KeyMaterial) -> Result<usize> {
    params.validate()?;
    if map_key.word_count() < 6 {
        return Err(invalid(format!(
            "map key has {} words; block sizing needs 6",
            map_key.word_count()
        )));
    }
    let r = params.reference_block_size;
    let sum: u64 = (0..6).map(|i| u64::from(map_key.peek_word(i))).sum();
    let size = r + (sum % (r as u64 / 2)) as usize;
    Ok(match params.granularity {
        Granularity::Byte => size,
        Granularity::Bit => (size - size % 8).max(MIN_BIT_BLOCK),
    })
}

pub fn select_method(block_size: usize, _granularity: Granularity) -> MapMethod {
    select_method_with(block_size, DEFAULT_METHOD_THRESHOLD)
}

fn select_method_with(block_size: usize, threshold: usize) -> MapMethod {
    if block_size <= threshold {
        MapMethod::Unfolding
    } else {
        MapMethod::Iteration
    }
}

/// One block of a planned message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockSpec {
    pub index: u64,
    /// Plaintext bytes carried by this block.
    pub data_len: usize,
    /// Stored bytes, including zero padding.
    pub padded_len: usize,
    /// Permuted elements (bytes or bits).
    pub elements: usize,
}

/// Layout of a message split into blocks: full blocks, then one tail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MessagePlan {
    total_len: u64,
    block_bytes: usize,
    granularity: Granularity,
}

impl MessagePlan {
    pub fn block_count(&self) -> u64 {
        self.total_len.div_ceil(self.block_bytes as u64)
    }

    pub fn block(&self, index: u64) -> Option<BlockSpec> {
        if index >= self.block_count() {
            return None;
        }
        let start = index * self.block_bytes as u64;
        let data_len = (self.total_len - start).min(self.block_bytes as u64) as usize;
        let padded_len = data_len.max(self.granularity.min_bytes());
        Some(BlockSpec {
            index,
            data_len,
            padded_len,
            elements: self.granularity.bytes_to_elements(padded_len),
        })
    }

    pub fn blocks(&self) -> impl Iterator<Item = BlockSpec> + '_ {
        (0..self.block_count()).filter_map(|i| self.block(i))
    }

    /// Stored length of the whole message, padding included.
    pub fn padded_len(&self) -> u64 {
        match self.block_count() {
            0 => 0,
            n => (n - 1) * self.block_bytes as u64 + self.block(n - 1).map_or(0, |b| b.padded_len) as u64,
        }
    }
}

/// Splits `total_len` bytes into blocks of `block_size` elements. A tail
/// shorter than the granularity minimum is zero-padded up to it.
pub fn plan_message(total_len: u64, params: &CipherParams, block_size: usize) -> Result<MessagePlan> {
    if total_len == 0 {
        return Err(invalid("message must not be empty"));
    }
    let g = params.granularity;
    if block_size < g.min_elements() || (g == Granularity::Bit && !block_size.is_multiple_of(8)) {
        return Err(invalid(format!("block size {block_size} is not valid for {g:?} granularity")));
    }
    Ok(MessagePlan {
        total_len,
        block_bytes: g.elements_to_bytes(block_size),
        granularity: g,
    })
}
