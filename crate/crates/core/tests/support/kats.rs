//! Frozen known-answer vectors and their text format.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::reference::{self, Hash};

pub struct KatSpec {
    pub name: &'static str,
    pub password: &'static [u8],
    pub iv: Vec<u8>,
    pub reference_block_size: usize,
    pub bit: bool,
    pub hash: Hash,
    pub plaintext: Vec<u8>,
}

pub fn specs() -> Vec<KatSpec> {
    let fox = b"The quick brown fox jumps over the lazy dog. ";
    vec![
        KatSpec {
            name: "mypassword_r100_sha512",
            password: b"mypassword",
            iv: vec![0u8; 16],
            reference_block_size: 100,
            bit: false,
            hash: Hash::S512,
            plaintext: fox.iter().cycle().take(300).copied().collect(),
        },
        KatSpec {
            // long enough to cross a key-regeneration epoch
            name: "epoch_r100_sha256",
            password: b"correct horse battery staple",
            iv: (0u8..16).collect(),
            reference_block_size: 100,
            bit: false,
            hash: Hash::S256,
            plaintext: (0..20_000u32).map(|i| (i * i + 7 * i) as u8).collect(),
        },
        KatSpec {
            name: "bits_r128_sha512",
            password: b"puzzle-bits",
            iv: vec![1, 2, 3, 4, 5, 6, 7, 8],
            reference_block_size: 128,
            bit: true,
            hash: Hash::S512,
            plaintext: fox.iter().cycle().take(70).copied().collect(),
        },
    ]
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn kat_path(name: &str) -> PathBuf {
    data_dir().join(format!("kat_{name}.txt"))
}

pub fn render(spec: &KatSpec, container: &[u8]) -> String {
    format!(
        "# generated by the naive reference model in tests/support/reference.rs\n\
         password = {}\n\
         iv = {}\n\
         reference_block_size = {}\n\
         granularity = {}\n\
         hash = {}\n\
         plaintext = {}\n\
         container = {}\n",
        hex::encode(spec.password),
        hex::encode(&spec.iv),
        spec.reference_block_size,
        if spec.bit { "bit" } else { "byte" },
        if spec.hash == Hash::S512 { "sha512" } else { "sha256" },
        hex::encode(&spec.plaintext),
        hex::encode(container),
    )
}

pub fn reference_container(spec: &KatSpec) -> Vec<u8> {
    reference::encrypt_container(
        &spec.plaintext,
        spec.password,
        &spec.iv,
        spec.reference_block_size,
        spec.bit,
        spec.hash,
    )
}

/// A parsed KAT file.
pub struct Kat {
    pub password: Vec<u8>,
    pub iv: Vec<u8>,
    pub reference_block_size: usize,
    pub bit: bool,
    pub hash: String,
    pub plaintext: Vec<u8>,
    pub container: Vec<u8>,
}

pub fn parse(text: &str) -> Kat {
    let fields: BTreeMap<&str, &str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .filter_map(|l| l.split_once(" = "))
        .collect();
    let hex_field = |k: &str| hex::decode(fields[k]).unwrap_or_else(|e| panic!("{k}: {e}"));
    Kat {
        password: hex_field("password"),
        iv: hex_field("iv"),
        reference_block_size: fields["reference_block_size"].parse().unwrap(),
        bit: fields["granularity"] == "bit",
        hash: fields["hash"].to_string(),
        plaintext: hex_field("plaintext"),
        container: hex_field("container"),
    }
}

pub fn load(name: &str) -> Kat {
    let path = kat_path(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse(&text)
}

pub const KEYPAIR_PASSWORDS: &[&[u8]] = &[b"a", b"abc", b"abcd", b"mypassword", b"abccba", b"correct horse battery staple"];

pub fn keypairs_path() -> PathBuf {
    data_dir().join("keypairs.txt")
}
