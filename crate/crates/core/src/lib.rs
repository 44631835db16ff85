//! The Puzzle transposition block cipher.
//!
//! Plaintext blocks are rotated, XORed against a rolling key window and
//! then permuted by a keyed map. The block size is derived from the key,
//! so it is not visible in the ciphertext.
//!
//! This cipher provides no integrity protection and has not been vetted
//! for production use.

pub mod analysis;
pub mod cipher;
pub mod container;
pub mod error;
pub mod keyschedule;
pub mod ostree;
pub mod params;
pub mod permmap;

pub use cipher::StreamState;
pub use container::{decrypt_bytes, decrypt_stream, encrypt_bytes, encrypt_stream, ContainerHeader};
pub use error::{PuzzleError, Result};
pub use keyschedule::{HashAlg, KeyMaterial, KeyPair};
pub use params::{CipherParams, Granularity, MapMethod};
pub use permmap::PermutationMap;
