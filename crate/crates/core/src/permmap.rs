//! Keyed permutation maps.
//!
//! Both builders walk the initial positions in order, draw two words
//! `(k_a, k_b)` from the map key per element and evaluate the affine
//! position `(i * k_a + k_b) mod n`. They differ in how that raw position
//! becomes a free final position:
//!
//! * unfolding uses it as a rank into the ordered set of still-available
//!   positions, removing the chosen one;
//! * iteration uses it directly and, on collision, walks by `+1` (odd
//!   `k_a`) or `-1` (even `k_a`), wrapping at the block boundary.

use std::io::Write;

use crate::error::{internal, invalid, Result};
use crate::keyschedule::KeyMaterial;
use crate::ostree::PositionSet;
use crate::params::MapMethod;

/// A bijection over `0..block_size` and its inverse.
#[derive(Clone, PartialEq, Eq)]
pub struct PermutationMap {
    forward: Vec<u32>,
    inverse: Vec<u32>,
    method: MapMethod,
}

impl std::fmt::Debug for PermutationMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PermutationMap")
            .field("block_size", &self.forward.len())
            .field("method", &self.method)
            .finish()
    }
}

impl PermutationMap {
    /// Validates `forward` as a bijection and computes its inverse.
    pub fn from_forward(forward: Vec<u32>, method: MapMethod) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![u32::MAX; n];
        for (i, &f) in forward.iter().enumerate() {
            let f = f as usize;
            if f >= n || inverse[f] != u32::MAX {
                return Err(internal(format!("map is not a bijection at position {i}")));
            }
            inverse[f] = i as u32;
        }
        Ok(PermutationMap { forward, inverse, method })
    }

    pub fn identity(n: usize) -> Self {
        let forward: Vec<u32> = (0..n as u32).collect();
        PermutationMap {
            inverse: forward.clone(),
            forward,
            method: MapMethod::Unfolding,
        }
    }

    pub fn block_size(&self) -> usize {
        self.forward.len()
    }

    pub fn method(&self) -> MapMethod {
        self.method
    }

    /// `forward[initial] = final`.
    pub fn forward(&self) -> &[u32] {
        &self.forward
    }

    /// `inverse[final] = initial`.
    pub fn inverse(&self) -> &[u32] {
        &self.inverse
    }

    pub fn invert(&self) -> Result<Self> {
        // from_forward re-checks the bijection on the swapped side
        PermutationMap::from_forward(self.inverse.clone(), self.method)
    }

    /// Writes `index,final` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,final")?;
        for (i, f) in self.forward.iter().enumerate() {
            writeln!(out, "{i},{f}")?;
        }
        Ok(())
    }
}

/// `(i * k_a + k_b) mod block_size` without overflow.
pub fn raw_final_position(i: usize, k_a: u32, k_b: u32, block_size: usize) -> usize {
    let v = i as u128 * u128::from(k_a) + u128::from(k_b);
    (v % block_size as u128) as usize
}

fn check_size(block_size: usize) -> Result<()> {
    if block_size == 0 || block_size > u32::MAX as usize {
        return Err(invalid(format!("block size {block_size} out of range")));
    }
    Ok(())
}

pub fn build_map(method: MapMethod, block_size: usize, map_key: &mut KeyMaterial) -> Result<PermutationMap> {
    match method {
        MapMethod::Unfolding => build_map_unfolding(block_size, map_key),
        MapMethod::Iteration => build_map_iteration(block_size, map_key),
    }
}

pub fn build_map_unfolding(block_size: usize, map_key: &mut KeyMaterial) -> Result<PermutationMap> {
    check_size(block_size)?;
    let mut available = PositionSet::full(block_size);
    let mut forward = Vec::with_capacity(block_size);
    let mut inverse = vec![0u32; block_size];
    for i in 0..block_size {
        let (k_a, k_b) = map_key.next_pair();
        let intermediate = raw_final_position(i, k_a, k_b, block_size);
        let f = available.take(intermediate % available.len());
        forward.push(f as u32);
        inverse[f] = i as u32;
    }
    Ok(PermutationMap {
        forward,
        inverse,
        method: MapMethod::Unfolding,
    })
}

pub fn build_map_iteration(block_size: usize, map_key: &mut KeyMaterial) -> Result<PermutationMap> {
    check_size(block_size)?;
    const FREE: u32 = u32::MAX;
    let mut inverse = vec![FREE; block_size];
    let mut forward = Vec::with_capacity(block_size);
    for i in 0..block_size {
        let (k_a, k_b) = map_key.next_pair();
        let mut f = raw_final_position(i, k_a, k_b, block_size);
        let up = k_a % 2 == 1;
        while inverse[f] != FREE {
            f = if up {
                if f + 1 == block_size { 0 } else { f + 1 }
            } else if f == 0 {
                block_size - 1
            } else {
                f - 1
            };
        }
        inverse[f] = i as u32;
        forward.push(f as u32);
    }
    Ok(PermutationMap {
        forward,
        inverse,
        method: MapMethod::Iteration,
    })
}
