//! Naive reference model of the cipher, written without touching the
//! library's internals. Slow on purpose: list removal for unfolding,
//! linear scans for iteration, `Vec<bool>` for bit blocks.

#![allow(dead_code)]

use sha2::{Digest, Sha256, Sha512};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hash {
    S256,
    S512,
}

impl Hash {
    pub fn id(self) -> u8 {
        match self {
            Hash::S256 => 1,
            Hash::S512 => 2,
        }
    }

    pub fn len(self) -> usize {
        match self {
            Hash::S256 => 32,
            Hash::S512 => 64,
        }
    }

    pub fn h(self, data: &[u8]) -> Vec<u8> {
        match self {
            Hash::S256 => Sha256::digest(data).to_vec(),
            Hash::S512 => Sha512::digest(data).to_vec(),
        }
    }
}

pub fn parts(pw: &[u8], hash: Hash) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut end = 3;
    while end < pw.len() {
        out.push(hash.h(&pw[..end]));
        end += 3;
    }
    out.push(hash.h(pw));
    out
}

pub fn second(parts: &[Vec<u8>], hash: Hash) -> Vec<u8> {
    let n = parts.len();
    if n == 1 {
        return hash.h(&parts[0]);
    }
    let mut out = Vec::new();
    for i in 0..n - 1 {
        let mut cat = Vec::new();
        for p in &parts[i..] {
            cat.extend_from_slice(p);
        }
        out.extend(hash.h(&cat));
    }
    let mut cat = Vec::new();
    for (j, p) in parts.iter().enumerate() {
        if j + 2 != n {
            cat.extend_from_slice(p);
        }
    }
    out.extend(hash.h(&cat));
    out
}

pub fn fold(k: &[u8]) -> Vec<u8> {
    let q = k.len() / 4;
    let mut out = vec![0u8; k.len()];
    for i in 0..q {
        let (e, f, g, h) = (k[i], k[q + i], k[2 * q + i], k[3 * q + i]);
        out[i] = e ^ g;
        out[q + i] = e ^ h;
        out[2 * q + i] = f ^ g;
        out[3 * q + i] = f ^ h;
    }
    out
}

pub fn key(pw: &[u8], hash: Hash) -> Vec<u8> {
    fold(&second(&parts(pw, hash), hash))
}

pub fn keys(pw: &[u8], hash: Hash) -> (Vec<u8>, Vec<u8>) {
    let mut rev = pw.to_vec();
    rev.reverse();
    (key(pw, hash), key(&rev, hash))
}

pub fn ext_iv(iv: &[u8], len: usize, hash: Hash) -> Vec<u8> {
    let mut e = hash.h(iv);
    while e.len() < len {
        let d = hash.h(&e);
        e.extend(d);
    }
    e.truncate(len);
    e
}

pub fn keys_with_iv(pw: &[u8], iv: &[u8], hash: Hash) -> (Vec<u8>, Vec<u8>) {
    let (mut x, mut m) = keys(pw, hash);
    let e = ext_iv(iv, x.len(), hash);
    for i in 0..x.len() {
        x[i] ^= e[i];
        m[i] ^= e[i];
    }
    (x, m)
}

pub fn regen(k: &[u8], hash: Hash) -> Vec<u8> {
    let mut out = Vec::new();
    for block in k.chunks(hash.len()) {
        out.extend(hash.h(block));
    }
    out
}

/// Word stream over a byte array: reads little-endian words; after the
/// last word the bytes rotate left by one and reading restarts at 0.
#[derive(Clone)]
pub struct Words {
    pub bytes: Vec<u8>,
    pub pos: usize,
}

impl Words {
    pub fn new(bytes: Vec<u8>) -> Self {
        Words { bytes, pos: 0 }
    }

    pub fn next(&mut self) -> u32 {
        let b = &self.bytes[self.pos * 4..self.pos * 4 + 4];
        let w = b[0] as u32 | (b[1] as u32) << 8 | (b[2] as u32) << 16 | (b[3] as u32) << 24;
        self.pos += 1;
        if self.pos * 4 == self.bytes.len() {
            let first = self.bytes.remove(0);
            self.bytes.push(first);
            self.pos = 0;
        }
        w
    }
}

pub fn block_size(r: usize, bit: bool, map_key: &[u8]) -> usize {
    let mut w = Words::new(map_key.to_vec());
    let mut sum: u64 = 0;
    for _ in 0..6 {
        sum += w.next() as u64;
    }
    let s = r + (sum % (r as u64 / 2)) as usize;
    if bit {
        std::cmp::max(s / 8 * 8, 128)
    } else {
        s
    }
}

pub fn raw(i: usize, a: u32, b: u32, n: usize) -> usize {
    // double-and-add keeps every intermediate below 2n
    let n = n as u64;
    let mut acc = 0u64;
    let mut base = a as u64 % n;
    let mut k = i as u64;
    while k > 0 {
        if k & 1 == 1 {
            acc = (acc + base) % n;
        }
        base = (base + base) % n;
        k >>= 1;
    }
    ((acc + b as u64 % n) % n) as usize
}

pub fn unfold(n: usize, w: &mut Words) -> Vec<usize> {
    let mut avail: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for i in 0..n {
        let a = w.next();
        let b = w.next();
        let r = raw(i, a, b, n);
        let idx = r % avail.len();
        out.push(avail.remove(idx));
    }
    out
}

pub fn iterate(n: usize, w: &mut Words) -> Vec<usize> {
    let mut used = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        let a = w.next();
        let b = w.next();
        let mut f = raw(i, a, b, n) as i64;
        let step: i64 = if a % 2 == 1 { 1 } else { -1 };
        while used[f as usize] {
            f = (f + step).rem_euclid(n as i64);
        }
        used[f as usize] = true;
        out.push(f as usize);
    }
    out
}

pub fn build(n: usize, w: &mut Words, threshold: usize) -> Vec<usize> {
    if n <= threshold {
        unfold(n, w)
    } else {
        iterate(n, w)
    }
}

fn to_bits(bytes: &[u8]) -> Vec<bool> {
    let mut v = Vec::new();
    for b in bytes {
        for k in 0..8 {
            v.push((b >> (7 - k)) & 1 == 1);
        }
    }
    v
}

fn from_bits(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| acc << 1 | b as u8))
        .collect()
}

fn xor(block: &mut [u8], bn: u64, key: &[u8], block_bytes: usize) {
    for (i, b) in block.iter_mut().enumerate() {
        let idx = ((i as u128 + bn as u128 * block_bytes as u128) % key.len() as u128) as usize;
        *b ^= key[idx];
    }
}

/// Stream model: encrypts or decrypts a sequence of blocks.
pub struct Stream {
    pub hash: Hash,
    pub bit: bool,
    pub n: usize,
    pub xk: Vec<u8>,
    pub mk: Words,
    pub map: Option<Vec<usize>>,
    pub bn: u64,
    pub since: usize,
    pub threshold: usize,
}

impl Stream {
    pub fn new(pw: &[u8], iv: &[u8], r: usize, bit: bool, hash: Hash) -> Self {
        let (xk, mk) = keys_with_iv(pw, iv, hash);
        let n = block_size(r, bit, &mk);
        Stream {
            hash,
            bit,
            n,
            xk,
            mk: Words::new(mk),
            map: None,
            bn: 0,
            since: 0,
            threshold: 10_000,
        }
    }

    pub fn block_bytes(&self) -> usize {
        if self.bit {
            self.n / 8
        } else {
            self.n
        }
    }

    fn map_for(&mut self, elems: usize) -> Vec<usize> {
        if elems == self.n {
            if self.map.is_none() {
                self.map = Some(build(self.n, &mut self.mk, self.threshold));
            }
            self.map.clone().unwrap()
        } else {
            let mut copy = self.mk.clone();
            build(elems, &mut copy, self.threshold)
        }
    }

    fn step(&mut self) {
        self.bn += 1;
        self.since += 1;
        if self.since == self.n {
            self.xk = regen(&self.xk, self.hash);
            let m = regen(&self.mk.bytes, self.hash);
            self.mk = Words::new(m);
            self.map = None;
            self.since = 0;
        }
    }

    pub fn encrypt(&mut self, block: &[u8]) -> Vec<u8> {
        let elems = if self.bit { block.len() * 8 } else { block.len() };
        let map = self.map_for(elems);
        let shift = map[(self.bn % elems as u64) as usize];
        let bb = self.block_bytes();
        let out = if self.bit {
            let mut bits = to_bits(block);
            bits.rotate_left(shift);
            let mut bytes = from_bits(&bits);
            xor(&mut bytes, self.bn, &self.xk, bb);
            let bits = to_bits(&bytes);
            let mut o = vec![false; elems];
            for i in 0..elems {
                o[map[i]] = bits[i];
            }
            from_bits(&o)
        } else {
            let mut b = block.to_vec();
            b.rotate_left(shift);
            xor(&mut b, self.bn, &self.xk, bb);
            let mut o = vec![0u8; elems];
            for i in 0..elems {
                o[map[i]] = b[i];
            }
            o
        };
        self.step();
        out
    }

    pub fn decrypt(&mut self, block: &[u8]) -> Vec<u8> {
        let elems = if self.bit { block.len() * 8 } else { block.len() };
        let map = self.map_for(elems);
        let shift = map[(self.bn % elems as u64) as usize];
        let bb = self.block_bytes();
        let out = if self.bit {
            let bits = to_bits(block);
            let mut o = vec![false; elems];
            for i in 0..elems {
                o[i] = bits[map[i]];
            }
            let mut bytes = from_bits(&o);
            xor(&mut bytes, self.bn, &self.xk, bb);
            let mut bits = to_bits(&bytes);
            bits.rotate_right(shift);
            from_bits(&bits)
        } else {
            let mut o = vec![0u8; elems];
            for i in 0..elems {
                o[i] = block[map[i]];
            }
            xor(&mut o, self.bn, &self.xk, bb);
            o.rotate_right(shift);
            o
        };
        self.step();
        out
    }
}

/// Full container: header, then blocks with the tail padded to the
/// minimum (100 bytes, or 16 bytes for bit blocks).
pub fn encrypt_container(pt: &[u8], pw: &[u8], iv: &[u8], r: usize, bit: bool, hash: Hash) -> Vec<u8> {
    let mut s = Stream::new(pw, iv, r, bit, hash);
    let mut out = b"PZLE".to_vec();
    out.push(1);
    out.push(hash.id());
    out.push(bit as u8);
    out.extend((iv.len() as u16).to_be_bytes());
    out.extend_from_slice(iv);
    out.extend((pt.len() as u64).to_be_bytes());
    let bb = s.block_bytes();
    let min = if bit { 16 } else { 100 };
    for chunk in pt.chunks(bb) {
        let mut b = chunk.to_vec();
        if b.len() < min {
            b.resize(min, 0);
        }
        out.extend(s.encrypt(&b));
    }
    out
}
