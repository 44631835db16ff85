use std::time::Instant;

use anyhow::Context;
use clap::Args;
use puzzle_core::keyschedule::derive_key_pair;
use puzzle_core::{CipherParams, Granularity, HashAlg, MapMethod, StreamState};

pub const BLOCK_SIZES: [usize; 3] = [100, 10_000, 1_000_000];

#[derive(Args)]
pub struct BenchArgs {
    /// Bytes encrypted per row (at least one block is always encrypted)
    #[arg(long, default_value_t = 16 << 20)]
    bytes: usize,
}

struct Row {
    method: MapMethod,
    block_size: usize,
    map_ms: f64,
    mb_per_s: f64,
    cycles_per_byte: Option<f64>,
}

#[cfg(target_arch = "x86_64")]
fn cycles() -> Option<u64> {
    // SAFETY: rdtsc is available on every x86_64 CPU and has no side effects.
    Some(unsafe { core::arch::x86_64::_rdtsc() })
}

#[cfg(not(target_arch = "x86_64"))]
fn cycles() -> Option<u64> {
    None
}

fn measure(method: MapMethod, block_size: usize, total: usize) -> anyhow::Result<Row> {
    let params = CipherParams::new(block_size, Granularity::Byte, HashAlg::Sha512).with_method(method);
    let keys = derive_key_pair(b"benchmark password", params.hash_alg)?;
    let mut state = StreamState::with_block_size(keys, params, block_size);

    let t = Instant::now();
    state.current_map()?;
    let map_ms = t.elapsed().as_secs_f64() * 1e3;

    let blocks = total.div_ceil(block_size).max(1);
    let mut buf: Vec<u8> = (0..block_size).map(|i| (i * 31) as u8).collect();
    let c0 = cycles();
    let t = Instant::now();
    for _ in 0..blocks {
        state.encrypt_in_place(&mut buf)?;
    }
    let secs = t.elapsed().as_secs_f64().max(1e-9);
    let c1 = cycles();
    let bytes = (blocks * block_size) as f64;
    Ok(Row {
        method,
        block_size,
        map_ms,
        mb_per_s: bytes / 1e6 / secs,
        cycles_per_byte: c0.zip(c1).map(|(a, b)| b.wrapping_sub(a) as f64 / bytes),
    })
}

/// Throughput table. Report only: speed never fails the command.
pub fn run(args: BenchArgs) -> anyhow::Result<()> {
    println!("{:<10} {:>10} {:>12} {:>12} {:>12}", "method", "block", "map_ms", "MB/s", "cycles/B");
    for method in [MapMethod::Unfolding, MapMethod::Iteration] {
        for block_size in BLOCK_SIZES {
            let row = measure(method, block_size, args.bytes).with_context(|| format!("{method} at {block_size}"))?;
            let cpb = row.cycles_per_byte.map_or("n/a".to_string(), |c| format!("{c:.1}"));
            println!(
                "{:<10} {:>10} {:>12.3} {:>12.1} {:>12}",
                row.method.to_string(),
                row.block_size,
                row.map_ms,
                row.mb_per_s,
                cpb
            );
        }
    }
    Ok(())
}
