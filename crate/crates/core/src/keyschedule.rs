//! Password-to-key derivation, IV extension and key regeneration.
//!
//! Two keys come out of one password. The XOR key is read as a byte
//! stream; the map key is read as a stream of little-endian `u32` words
//! whose byte array is rotated left by one byte every time the word view
//! has been fully consumed.

use sha2::{Digest, Sha256, Sha512};

use crate::error::{internal, invalid, Result};

/// Passwords shorter than this are accepted but logged as weak.
pub const WEAK_PASSWORD_LEN: usize = 8;

/// Size of the prefix groups used by [`derive_parts`].
pub const GROUP_LEN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[derive(Default)]
pub enum HashAlg {
    Sha256,
    #[default]
    Sha512,
}

impl HashAlg {
    /// Wire id stored in container headers.
    pub fn id(self) -> u8 {
        match self {
            HashAlg::Sha256 => 1,
            HashAlg::Sha512 => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(HashAlg::Sha256),
            2 => Some(HashAlg::Sha512),
            _ => None,
        }
    }

    pub fn output_len(self) -> usize {
        match self {
            HashAlg::Sha256 => 32,
            HashAlg::Sha512 => 64,
        }
    }

    pub fn digest(self, data: &[u8]) -> Vec<u8> {
        self.digest_concat(&[data])
    }

    /// Digest of the concatenation of `parts`, without materializing it.
    pub fn digest_concat(self, parts: &[&[u8]]) -> Vec<u8> {
        match self {
            HashAlg::Sha256 => {
                let mut h = Sha256::new();
                for p in parts {
                    h.update(p);
                }
                h.finalize().to_vec()
            }
            HashAlg::Sha512 => {
                let mut h = Sha512::new();
                for p in parts {
                    h.update(p);
                }
                h.finalize().to_vec()
            }
        }
    }
}


impl std::fmt::Display for HashAlg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HashAlg::Sha256 => f.write_str("sha256"),
            HashAlg::Sha512 => f.write_str("sha512"),
        }
    }
}

/// A derived key with a byte view and a rotating 32-bit word view.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    bytes: Vec<u8>,
    words: Vec<u32>,
    cursor: usize,
    rotations: u64,
}

impl std::fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Never print key bytes.
        f.debug_struct("KeyMaterial")
            .field("len", &self.bytes.len())
            .field("cursor", &self.cursor)
            .field("rotations", &self.rotations)
            .finish()
    }
}

impl KeyMaterial {
    /// Wraps raw key bytes. The length must be a positive multiple of 4.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        if bytes.is_empty() || !bytes.len().is_multiple_of(4) {
            return Err(invalid(format!(
                "key length {} is not a positive multiple of 4",
                bytes.len()
            )));
        }
        let words = decode_words(&bytes);
        Ok(KeyMaterial {
            bytes,
            words,
            cursor: 0,
            rotations: 0,
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn word_cursor(&self) -> usize {
        self.cursor
    }

    /// Number of one-byte rotations performed since construction or the
    /// last reset.
    pub fn rotations(&self) -> u64 {
        self.rotations
    }

    /// Word `idx` of the current (possibly rotated) word view.
    pub fn peek_word(&self, idx: usize) -> u32 {
        self.words[idx]
    }

    pub fn next_word(&mut self) -> u32 {
        let w = self.words[self.cursor];
        self.cursor += 1;
        if self.cursor == self.words.len() {
            self.bytes.rotate_left(1);
            self.words = decode_words(&self.bytes);
            self.cursor = 0;
            self.rotations += 1;
        }
        w
    }

    /// Consumes two words, as the map builders do for every element.
    pub fn next_pair(&mut self) -> (u32, u32) {
        let a = self.next_word();
        let b = self.next_word();
        (a, b)
    }

    pub fn next_words(&mut self, n: usize) -> Vec<u32> {
        (0..n).map(|_| self.next_word()).collect()
    }

    fn replace_bytes(&mut self, bytes: Vec<u8>) {
        self.words = decode_words(&bytes);
        self.bytes = bytes;
        self.cursor = 0;
        self.rotations = 0;
    }

    /// XORs `mask` into the key bytes. Resets the cursor.
    pub fn xor_with(&mut self, mask: &[u8]) -> Result<()> {
        if mask.len() != self.bytes.len() {
            return Err(invalid(format!(
                "mask length {} != key length {}",
                mask.len(),
                self.bytes.len()
            )));
        }
        let bytes = self.bytes.iter().zip(mask).map(|(k, m)| k ^ m).collect();
        self.replace_bytes(bytes);
        Ok(())
    }
}

fn decode_words(bytes: &[u8]) -> Vec<u32> {
    bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

/// The XOR key and the map key derived from one password.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub xor_key: KeyMaterial,
    pub map_key: KeyMaterial,
}

/// Digests of the password prefixes of length 3, 6, 9, ... plus a final
/// digest of the whole password.
pub fn derive_parts(password: &[u8], alg: HashAlg) -> Result<Vec<Vec<u8>>> {
    if password.is_empty() {
        return Err(invalid("password must not be empty"));
    }
    let mut parts: Vec<Vec<u8>> = (1..)
        .map(|g| g * GROUP_LEN)
        .take_while(|&end| end < password.len())
        .map(|end| alg.digest(&password[..end]))
        .collect();
    parts.push(alg.digest(password));
    Ok(parts)
}

/// Reverse-order hashing over the parts.
///
/// Entry `i < N-1` is the digest of `parts[i..]` concatenated; the last
/// entry is the digest of every part except `parts[N-2]`. A single part
/// collapses to its own digest.
pub fn second_pass(parts: &[Vec<u8>], alg: HashAlg) -> Result<Vec<u8>> {
    let n = parts.len();
    if n == 0 {
        return Err(invalid("second pass needs at least one part"));
    }
    if n == 1 {
        return Ok(alg.digest(&parts[0]));
    }
    let mut out = Vec::with_capacity(n * alg.output_len());
    for i in 0..n - 1 {
        let suffix: Vec<&[u8]> = parts[i..].iter().map(Vec::as_slice).collect();
        out.extend(alg.digest_concat(&suffix));
    }
    let skip_one: Vec<&[u8]> = parts
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != n - 2)
        .map(|(_, p)| p.as_slice())
        .collect();
    out.extend(alg.digest_concat(&skip_one));
    Ok(out)
}

/// Splits the key into quarters E, F, G, H and returns
/// `(E^G) ‖ (E^H) ‖ (F^G) ‖ (F^H)`.
pub fn xor_fold(intermediate: &[u8]) -> Result<Vec<u8>> {
    if intermediate.is_empty() || !intermediate.len().is_multiple_of(4) {
        return Err(internal(format!(
            "intermediate key length {} is not divisible by 4",
            intermediate.len()
        )));
    }
    let q = intermediate.len() / 4;
    let (e, rest) = intermediate.split_at(q);
    let (f, rest) = rest.split_at(q);
    let (g, h) = rest.split_at(q);
    let xor = |a: &[u8], b: &[u8]| a.iter().zip(b).map(|(x, y)| x ^ y).collect::<Vec<u8>>();
    let mut out = Vec::with_capacity(intermediate.len());
    out.extend(xor(e, g));
    out.extend(xor(e, h));
    out.extend(xor(f, g));
    out.extend(xor(f, h));
    Ok(out)
}

fn derive_one(password: &[u8], alg: HashAlg) -> Result<KeyMaterial> {
    let parts = derive_parts(password, alg)?;
    let intermediate = second_pass(&parts, alg)?;
    KeyMaterial::from_bytes(xor_fold(&intermediate)?)
}

/// Derives the XOR key from the password and the map key from the
/// byte-reversed password.
pub fn derive_key_pair(password: &[u8], alg: HashAlg) -> Result<KeyPair> {
    if password.len() < WEAK_PASSWORD_LEN && !password.is_empty() {
        log::warn!(
            "password is {} bytes; fewer than {} bytes is weak",
            password.len(),
            WEAK_PASSWORD_LEN
        );
    }
    let xor_key = derive_one(password, alg)?;
    let reversed: Vec<u8> = password.iter().rev().copied().collect();
    let map_key = derive_one(&reversed, alg)?;
    Ok(KeyPair { xor_key, map_key })
}

/// Hash-chain extension of an IV: `H(IV)`, then repeatedly append the
/// digest of everything so far, truncated to `key_len`.
pub fn extend_iv(iv: &[u8], key_len: usize, alg: HashAlg) -> Result<Vec<u8>> {
    if iv.is_empty() {
        return Err(invalid("IV must not be empty"));
    }
    if key_len == 0 {
        return Err(invalid("key length must be positive"));
    }
    let mut ext = alg.digest(iv);
    while ext.len() < key_len {
        let d = alg.digest(&ext);
        ext.extend(d);
    }
    ext.truncate(key_len);
    Ok(ext)
}

/// XORs the extended IV into both keys and resets their cursors.
pub fn apply_iv(keys: &KeyPair, iv: &[u8], alg: HashAlg) -> Result<KeyPair> {
    let mut out = keys.clone();
    let ext = extend_iv(iv, keys.xor_key.len(), alg)?;
    out.xor_key.xor_with(&ext)?;
    let ext = if keys.map_key.len() == ext.len() {
        ext
    } else {
        extend_iv(iv, keys.map_key.len(), alg)?
    };
    out.map_key.xor_with(&ext)?;
    Ok(out)
}

/// Replaces every digest-sized block of the key by its own digest.
pub fn regenerate(key: &KeyMaterial, alg: HashAlg) -> Result<KeyMaterial> {
    let n = alg.output_len();
    if !key.len().is_multiple_of(n) {
        return Err(internal(format!(
            "key length {} is not a multiple of the digest length {n}",
            key.len()
        )));
    }
    let bytes: Vec<u8> = key.bytes().chunks(n).flat_map(|b| alg.digest(b)).collect();
    KeyMaterial::from_bytes(bytes)
}
