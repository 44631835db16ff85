//! Statistical measurements on maps and ciphertexts.
//!
//! The appendix reproduction draws a random 64-character password per
//! trial, derives the map key with SHA-512 and measures, for one block
//! size:
//!
//! | table      | content                                         |
//! |------------|-------------------------------------------------|
//! | appendix1  | raw affine positions, no collision handling     |
//! | appendix2  | final positions of the iteration map            |
//! | appendix3  | final positions of the unfolding map            |
//! | appendix4  | per-position nonlinear flags, iteration map     |
//! | appendix5  | per-position nonlinear flags, unfolding map     |
//!
//! Each table is emitted as `trial,position,value` CSV rows.
//!
//! An attacker who recovers `(initial, final)` pairs through differential
//! probing could try to fit
//! `final = ((initial + (block_number * A + B) mod n) * C + D) mod n`
//! for four unknown 32-bit key words `A, B, C, D`. No solver for that
//! system is provided here; the nonlinear coefficient measures how often
//! such an affine fit would be wrong.

use std::io::Write;

use rand::distr::{Alphanumeric, SampleString};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::cipher::{shift_amount, StreamState};
use crate::error::{invalid, Result};
use crate::keyschedule::{derive_key_pair, HashAlg, KeyMaterial};
use crate::params::{Granularity, MapMethod};
use crate::permmap::{build_map, raw_final_position, PermutationMap};

/// Significance level of [`uniformity_test`].
pub const UNIFORMITY_ALPHA: f64 = 0.001;
pub const MIN_UNIFORMITY_TRIALS: usize = 30;
/// Bins of the final-position histogram.
pub const POSITION_BINS: usize = 100;
/// Side of the (initial, final) diagnostic grid.
pub const GRID_SIDE: usize = 20;
pub const RANDOM_PASSWORD_LEN: usize = 64;

/// Raw affine positions with the builders' word schedule (two words per
/// element).
pub fn raw_position_trace(block_size: usize, map_key: &mut KeyMaterial) -> Vec<u32> {
    (0..block_size)
        .map(|i| {
            let (k_a, k_b) = map_key.next_pair();
            raw_final_position(i, k_a, k_b, block_size) as u32
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapStats {
    pub final_positions: Vec<u32>,
    /// `true` where the map disagrees with the raw formula.
    pub nonlinear_flags: Vec<bool>,
    pub nonlinear_coefficient: f64,
    /// Histogram of final positions over [`POSITION_BINS`] equal bins.
    pub bucket_counts: Vec<u64>,
}

/// Compares a map against the raw trace replayed from `key_snapshot`, the
/// map key state the map was built from.
pub fn nonlinear_profile(map: &PermutationMap, key_snapshot: &KeyMaterial) -> Result<MapStats> {
    let n = map.block_size();
    let raw = raw_position_trace(n, &mut key_snapshot.clone());
    // both builders place element 0 exactly at its raw position
    if n > 0 && raw[0] != map.forward()[0] {
        return Err(invalid("key snapshot does not match the map"));
    }
    let flags: Vec<bool> = map.forward().iter().zip(&raw).map(|(f, r)| f != r).collect();
    let nonlinear = flags.iter().filter(|&&f| f).count();
    Ok(MapStats {
        final_positions: map.forward().to_vec(),
        nonlinear_coefficient: nonlinear as f64 / n as f64,
        nonlinear_flags: flags,
        bucket_counts: position_histogram(map.forward(), n),
    })
}

/// Histogram of final positions over [`POSITION_BINS`] equal bins.
///
/// For a bijective map every position occurs exactly once, so this is
/// only informative for raw traces; [`position_grid`] keeps the pairing
/// with the initial position.
pub fn position_histogram(final_positions: &[u32], block_size: usize) -> Vec<u64> {
    let mut counts = vec![0u64; POSITION_BINS];
    for &f in final_positions {
        counts[f as usize * POSITION_BINS / block_size] += 1;
    }
    counts
}

/// `GRID_SIDE x GRID_SIDE` histogram of (initial, final) pairs.
pub fn position_grid(final_positions: &[u32], block_size: usize) -> Vec<u64> {
    let mut counts = vec![0u64; GRID_SIDE * GRID_SIDE];
    for (i, &f) in final_positions.iter().enumerate() {
        let row = i * GRID_SIDE / block_size;
        let col = f as usize * GRID_SIDE / block_size;
        counts[row * GRID_SIDE + col] += 1;
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UniformityReport {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub pass: bool,
}

/// Pearson chi-square of `counts` against a uniform expectation, tested
/// at [`UNIFORMITY_ALPHA`].
pub fn uniformity_test(counts: &[u64], trials: usize) -> Result<UniformityReport> {
    if trials < MIN_UNIFORMITY_TRIALS {
        return Err(invalid(format!(
            "uniformity test needs at least {MIN_UNIFORMITY_TRIALS} trials, got {trials}"
        )));
    }
    if counts.len() < 2 {
        return Err(invalid("histogram needs at least two buckets"));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(invalid("histogram is empty"));
    }
    let expected = total as f64 / counts.len() as f64;
    let statistic: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dof = counts.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| invalid(e.to_string()))?;
    let p_value = dist.sf(statistic);
    Ok(UniformityReport {
        statistic,
        degrees_of_freedom: dof,
        p_value,
        pass: p_value >= UNIFORMITY_ALPHA,
    })
}

/// `log10(n!)`.
pub fn log10_permutations(block_size: u64) -> f64 {
    ln_gamma(block_size as f64 + 1.0) / std::f64::consts::LN_10
}

/// `log10(2^bits)`.
pub fn log10_keyspace(key_bits: u64) -> f64 {
    key_bits as f64 * std::f64::consts::LOG10_2
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferenceReport {
    /// Absolute ciphertext offsets that differ.
    pub positions: Vec<usize>,
    /// Where a byte-granularity pipeline must move the flipped byte.
    pub predicted: Option<usize>,
}

impl DifferenceReport {
    pub fn count(&self) -> usize {
        self.positions.len()
    }
}

/// Encrypts `plaintext` and a copy with byte `byte_index` inverted under
/// two states from `factory`, and reports where the ciphertexts differ.
///
/// `plaintext` is split into stream blocks; a short tail must still meet
/// the granularity minimum.
pub fn differential_probe<F>(factory: F, plaintext: &[u8], byte_index: usize) -> Result<DifferenceReport>
where
    F: Fn() -> Result<StreamState>,
{
    if byte_index >= plaintext.len() {
        return Err(invalid("byte index outside the plaintext"));
    }
    let mut a = factory()?;
    let mut b = factory()?;
    let block_bytes = a.block_bytes();
    if plaintext.len() < block_bytes {
        return Err(invalid("plaintext must cover at least one block"));
    }
    let mut flipped = plaintext.to_vec();
    flipped[byte_index] ^= 0xFF;

    let mut ca = Vec::with_capacity(plaintext.len());
    let mut cb = Vec::with_capacity(plaintext.len());
    let mut predicted = None;
    for (chunk_no, (pa, pb)) in plaintext.chunks(block_bytes).zip(flipped.chunks(block_bytes)).enumerate() {
        let start = chunk_no * block_bytes;
        if (start..start + pa.len()).contains(&byte_index) && a.params().granularity == Granularity::Byte {
            let map = a.map_for(pa.len())?;
            let n = map.block_size();
            let shift = shift_amount(&map, a.block_number()) % n;
            let j = byte_index - start;
            predicted = Some(start + map.forward()[(j + n - shift) % n] as usize);
        }
        ca.extend(a.encrypt_block(pa)?);
        cb.extend(b.encrypt_block(pb)?);
    }
    let positions = ca.iter().zip(&cb).enumerate().filter(|(_, (x, y))| x != y).map(|(i, _)| i).collect();
    Ok(DifferenceReport { positions, predicted })
}

/// Fraction of ciphertext bytes that differ between two encryptions.
pub fn byte_difference_ratio(a: &[u8], b: &[u8]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / n as f64
}

/// A random alphanumeric password, standing in for a random key.
pub fn random_password(rng: &mut ChaCha20Rng) -> String {
    Alphanumeric.sample_string(rng, RANDOM_PASSWORD_LEN)
}

/// Everything measured for one random key.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: usize,
    pub raw: Vec<u32>,
    pub iteration: MapStats,
    pub unfolding: MapStats,
}

pub fn run_trial(seed: u64, trial: usize, block_size: usize) -> Result<TrialResult> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(trial as u64));
    let password = random_password(&mut rng);
    let keys = derive_key_pair(password.as_bytes(), HashAlg::Sha512)?;
    let snapshot = keys.map_key;
    let raw = raw_position_trace(block_size, &mut snapshot.clone());
    let iter_map = build_map(MapMethod::Iteration, block_size, &mut snapshot.clone())?;
    let unfold_map = build_map(MapMethod::Unfolding, block_size, &mut snapshot.clone())?;
    Ok(TrialResult {
        trial,
        raw,
        iteration: nonlinear_profile(&iter_map, &snapshot)?,
        unfolding: nonlinear_profile(&unfold_map, &snapshot)?,
    })
}

/// Trials run in parallel; results come back ordered by trial index.
pub fn run_trials(seed: u64, trials: usize, block_size: usize) -> Result<Vec<TrialResult>> {
    (0..trials).into_par_iter().map(|t| run_trial(seed, t, block_size)).collect()
}

/// Mean of `flags` over `[from, to)`.
pub fn flag_rate(flags: &[bool], from: usize, to: usize) -> f64 {
    if to <= from {
        return 0.0;
    }
    flags[from..to].iter().filter(|&&f| f).count() as f64 / (to - from) as f64
}

/// Per-position mean of the flags across trials.
pub fn mean_flag_rate_by_position(profiles: &[&MapStats]) -> Vec<f64> {
    let Some(first) = profiles.first() else {
        return Vec::new();
    };
    let mut sums = vec![0.0; first.nonlinear_flags.len()];
    for p in profiles {
        for (s, &f) in sums.iter_mut().zip(&p.nonlinear_flags) {
            if f {
                *s += 1.0;
            }
        }
    }
    sums.iter().map(|s| s / profiles.len() as f64).collect()
}

/// One line of the JSON-lines summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryLine {
    pub metric: String,
    pub value: f64,
    pub threshold: String,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct AppendixReport {
    pub block_size: usize,
    pub trials: Vec<TrialResult>,
}

impl AppendixReport {
    pub fn run(seed: u64, trials: usize, block_size: usize) -> Result<Self> {
        if trials == 0 {
            return Err(invalid("at least one trial is required"));
        }
        Ok(AppendixReport {
            block_size,
            trials: run_trials(seed, trials, block_size)?,
        })
    }

    pub fn mean_coefficient(&self, method: MapMethod) -> f64 {
        let sum: f64 = self.trials.iter().map(|t| self.stats(t, method).nonlinear_coefficient).sum();
        sum / self.trials.len() as f64
    }

    fn stats<'a>(&self, t: &'a TrialResult, method: MapMethod) -> &'a MapStats {
        match method {
            MapMethod::Iteration => &t.iteration,
            MapMethod::Unfolding => &t.unfolding,
        }
    }

    /// Trials in which element 0 sits at its raw position.
    pub fn first_element_linear_count(&self, method: MapMethod) -> usize {
        self.trials.iter().filter(|t| !self.stats(t, method).nonlinear_flags[0]).count()
    }

    /// Trials whose last-decile flag rate is at least the first-decile rate.
    pub fn rising_tail_count(&self, method: MapMethod) -> usize {
        let n = self.block_size;
        let decile = (n / 10).max(1);
        self.trials
            .iter()
            .filter(|t| {
                let flags = &self.stats(t, method).nonlinear_flags;
                flag_rate(flags, n - decile, n) >= flag_rate(flags, 0, decile)
            })
            .count()
    }

    pub fn raw_histogram(&self) -> Vec<u64> {
        self.sum_counts(|t| position_histogram(&t.raw, self.block_size))
    }

    pub fn map_histogram(&self, method: MapMethod) -> Vec<u64> {
        self.sum_counts(|t| self.stats(t, method).bucket_counts.clone())
    }

    /// Aggregated (initial, final) grid; `None` selects the raw trace.
    pub fn joint_grid(&self, method: Option<MapMethod>) -> Vec<u64> {
        self.sum_counts(|t| match method {
            None => position_grid(&t.raw, self.block_size),
            Some(m) => position_grid(&self.stats(t, m).final_positions, self.block_size),
        })
    }

    fn sum_counts<F: Fn(&TrialResult) -> Vec<u64>>(&self, f: F) -> Vec<u64> {
        let mut total: Vec<u64> = Vec::new();
        for t in &self.trials {
            let c = f(t);
            total.resize(c.len(), 0);
            for (s, c) in total.iter_mut().zip(c) {
                *s += c;
            }
        }
        total
    }

    /// Writes appendix table `index` (1..=5) as `trial,position,value`.
    pub fn write_csv<W: Write>(&self, index: usize, mut out: W) -> std::io::Result<()> {
        writeln!(out, "trial,position,value")?;
        for t in &self.trials {
            match index {
                1 => write_rows(&mut out, t.trial, t.raw.iter().map(|&v| v as u64))?,
                2 => write_rows(&mut out, t.trial, t.iteration.final_positions.iter().map(|&v| v as u64))?,
                3 => write_rows(&mut out, t.trial, t.unfolding.final_positions.iter().map(|&v| v as u64))?,
                4 => write_rows(&mut out, t.trial, t.iteration.nonlinear_flags.iter().map(|&f| f as u64))?,
                5 => write_rows(&mut out, t.trial, t.unfolding.nonlinear_flags.iter().map(|&f| f as u64))?,
                _ => {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::InvalidInput,
                        format!("no appendix table {index}"),
                    ))
                }
            }
        }
        out.flush()
    }

    /// Summary metrics with their acceptance thresholds. Uniformity is
    /// only evaluated with enough trials.
    pub fn summary(&self) -> Vec<SummaryLine> {
        let trials = self.trials.len();
        let unfold = self.mean_coefficient(MapMethod::Unfolding);
        let iter = self.mean_coefficient(MapMethod::Iteration);
        let first_unfold = self.first_element_linear_count(MapMethod::Unfolding);
        let rising = self.rising_tail_count(MapMethod::Iteration);
        let rising_needed = (trials * 9).div_ceil(10);
        let mut lines = vec![
            SummaryLine {
                metric: "unfolding_mean_nonlinear_coefficient".into(),
                value: unfold,
                threshold: ">= 0.95".into(),
                pass: Some(unfold >= 0.95),
            },
            SummaryLine {
                metric: "unfolding_first_element_linear_trials".into(),
                value: first_unfold as f64,
                threshold: format!("== {trials}"),
                pass: Some(first_unfold == trials),
            },
            SummaryLine {
                metric: "iteration_mean_nonlinear_coefficient".into(),
                value: iter,
                threshold: "<= 0.65".into(),
                pass: Some(iter <= 0.65),
            },
            SummaryLine {
                metric: "iteration_rising_tail_trials".into(),
                value: rising as f64,
                threshold: format!(">= {rising_needed}"),
                pass: Some(rising >= rising_needed),
            },
        ];
        for (name, hist) in [
            ("raw", self.raw_histogram()),
            ("iteration", self.map_histogram(MapMethod::Iteration)),
            ("unfolding", self.map_histogram(MapMethod::Unfolding)),
        ] {
            lines.push(match uniformity_test(&hist, trials) {
                Ok(r) => SummaryLine {
                    metric: format!("{name}_uniformity_p_value"),
                    value: r.p_value,
                    threshold: format!(">= {UNIFORMITY_ALPHA}"),
                    pass: Some(r.pass),
                },
                Err(_) => SummaryLine {
                    metric: format!("{name}_uniformity_p_value"),
                    value: f64::NAN,
                    threshold: format!("needs >= {MIN_UNIFORMITY_TRIALS} trials"),
                    pass: None,
                },
            });
        }
        // informational: the joint grid exposes structure the marginal hides
        for (name, method) in [
            ("raw", None),
            ("iteration", Some(MapMethod::Iteration)),
            ("unfolding", Some(MapMethod::Unfolding)),
        ] {
            let value = uniformity_test(&self.joint_grid(method), trials).map_or(f64::NAN, |r| r.p_value);
            lines.push(SummaryLine {
                metric: format!("{name}_joint_grid_p_value"),
                value,
                threshold: "diagnostic".into(),
                pass: None,
            });
        }
        lines
    }
}

fn write_rows<W: Write, I: Iterator<Item = u64>>(out: &mut W, trial: usize, values: I) -> std::io::Result<()> {
    for (pos, v) in values.enumerate() {
        writeln!(out, "{trial},{pos},{v}")?;
    }
    Ok(())
}

/// Serializes summary lines as JSON lines. NaN values become `null`.
pub fn write_summary<W: Write>(lines: &[SummaryLine], mut out: W) -> std::io::Result<()> {
    for l in lines {
        let mut v = serde_json::to_value(l).map_err(std::io::Error::other)?;
        if l.value.is_nan() {
            v["value"] = serde_json::Value::Null;
        }
        writeln!(out, "{v}")?;
    }
    out.flush()
}
