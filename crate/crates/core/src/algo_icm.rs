//! Compression-based stand-ins for algorithmic information, and a reversible
//! block cellular automaton for watching state complexity grow.
//!
//! Description length is approximated by the size of a raw deflate stream
//! (flate2, fixed level) in bits, minus what the same encoder emits for an
//! empty input.

use std::io::{self, Write};

use flate2::write::DeflateEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgoError {
    #[error("rule table is not a permutation of 0..{0}")]
    NotBijective(usize),
    #[error("block size must be an even number of bits in 2..=16, got {0}")]
    BadBlockBits(u32),
    #[error("state length {len} is not a positive multiple of the block size {block}")]
    StateLength { len: usize, block: u32 },
    #[error("reverse replay did not return to the initial state")]
    NotReversible,
}

pub type Result<T> = std::result::Result<T, AlgoError>;

/// Separator placed between the two inputs of [`mutual_info_proxy`].
pub const SEPARATOR: [u8; 4] = [0xfe, 0x00, 0xfe, 0x00];

/// Deflate at a fixed compression level (0..=9).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compressor {
    pub level: u32,
}

impl Default for Compressor {
    fn default() -> Self {
        Self { level: 9 }
    }
}

impl Compressor {
    fn raw_bytes(&self, data: &[u8]) -> usize {
        let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(self.level));
        enc.write_all(data).expect("writing to a Vec cannot fail");
        enc.finish().expect("writing to a Vec cannot fail").len()
    }

    /// Bits the encoder emits for an empty input.
    pub fn baseline_bits(&self) -> u64 {
        8 * self.raw_bytes(&[]) as u64
    }

    /// Compressed size in bits above the empty-input baseline, never negative.
    pub fn bits(&self, data: &[u8]) -> u64 {
        (8 * self.raw_bytes(data) as u64).saturating_sub(self.baseline_bits())
    }

    pub fn mutual_info(&self, a: &[u8], b: &[u8]) -> f64 {
        let mut joint = Vec::with_capacity(a.len() + b.len() + SEPARATOR.len());
        joint.extend_from_slice(a);
        joint.extend_from_slice(&SEPARATOR);
        joint.extend_from_slice(b);
        let joint_bits = self.bits(&joint) as f64 - self.bits(&SEPARATOR) as f64;
        self.bits(a) as f64 + self.bits(b) as f64 - joint_bits
    }
}

/// [`Compressor::bits`] at the default level.
pub fn compress_len(data: &[u8]) -> u64 {
    Compressor::default().bits(data)
}

/// `C(a) + C(b) - (C(a ++ sep ++ b) - C(sep))`; the separator's own cost is
/// taken out so that two empty inputs give exactly 0. Can come out slightly
/// negative from encoder overhead; that is reported as is.
pub fn mutual_info_proxy(a: &[u8], b: &[u8]) -> f64 {
    Compressor::default().mutual_info(a, b)
}

/// Fixed-length bit string, one `bool` per cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitState {
    bits: Vec<bool>,
}

impl BitState {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    /// All zeros except ones on `start..start + len_ones`.
    pub fn single_block(len: usize, start: usize, len_ones: usize) -> Self {
        let mut s = Self::zeros(len);
        for b in s.bits.iter_mut().skip(start).take(len_ones) {
            *b = true;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Packs eight cells per byte, least significant bit first.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << i)))
            .collect()
    }
}

/// Block-partitioned reversible automaton. Each step cuts the (cyclic) state
/// into blocks of `block_bits` cells and replaces every block value `v` with
/// `table[v]`; odd steps shift the partition by half a block, so neighbouring
/// blocks interact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReversibleRule {
    block_bits: u32,
    table: Vec<u32>,
}

impl ReversibleRule {
    pub fn new(block_bits: u32, table: Vec<u32>) -> Result<Self> {
        if !(2..=16).contains(&block_bits) || block_bits % 2 != 0 {
            return Err(AlgoError::BadBlockBits(block_bits));
        }
        let size = 1usize << block_bits;
        let mut seen = vec![false; size];
        if table.len() != size {
            return Err(AlgoError::NotBijective(size));
        }
        for &v in &table {
            let v = v as usize;
            if v >= size || seen[v] {
                return Err(AlgoError::NotBijective(size));
            }
            seen[v] = true;
        }
        Ok(Self { block_bits, table })
    }

    pub fn identity(block_bits: u32) -> Result<Self> {
        Self::new(block_bits, (0..1u32 << block_bits.min(16)).collect())
    }

    /// Uniformly random permutation that keeps the all-zero block fixed, so
    /// an empty region stays empty until activity reaches it.
    pub fn random_mixing(block_bits: u32, seed: u64) -> Result<Self> {
        if !(2..=16).contains(&block_bits) {
            return Err(AlgoError::BadBlockBits(block_bits));
        }
        let mut rest: Vec<u32> = (1..1u32 << block_bits).collect();
        rest.shuffle(&mut exec::substream(seed, 0x0ca0, 0));
        let mut table = vec![0];
        table.extend(rest);
        Self::new(block_bits, table)
    }

    pub fn block_bits(&self) -> u32 {
        self.block_bits
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.table.len()];
        for (i, &v) in self.table.iter().enumerate() {
            inv[v as usize] = i as u32;
        }
        Self { block_bits: self.block_bits, table: inv }
    }

    fn check(&self, state: &BitState) -> Result<()> {
        let b = self.block_bits as usize;
        if state.is_empty() || state.len() % b != 0 {
            return Err(AlgoError::StateLength { len: state.len(), block: self.block_bits });
        }
        Ok(())
    }

    /// Applies step number `k` (its parity picks the partition offset).
    pub fn step(&self, state: &BitState, k: usize) -> Result<BitState> {
        self.check(state)?;
        let n = state.len();
        let b = self.block_bits as usize;
        let offset = if k % 2 == 0 { 0 } else { b / 2 };
        let mut out = vec![false; n];
        for start in (0..n).step_by(b) {
            let base = start + offset;
            let v = (0..b).fold(0u32, |acc, j| acc | (u32::from(state.bits[(base + j) % n]) << j));
            let w = self.table[v as usize];
            for j in 0..b {
                out[(base + j) % n] = (w >> j) & 1 == 1;
            }
        }
        Ok(BitState::new(out))
    }

    /// Undoes step number `k`.
    pub fn unstep(&self, state: &BitState, k: usize) -> Result<BitState> {
        self.inverse().step(state, k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondLawRun {
    /// `complexity[k]` is the compressed size of the state after `k` steps.
    pub complexity: Vec<u64>,
    /// Compressed sizes along the reverse replay, starting from the final
    /// state; `reverse_complexity[k]` is the state after undoing `k` steps.
    pub reverse_complexity: Vec<u64>,
    pub final_state_ones: usize,
}

impl SecondLawRun {
    /// Largest single-step drop of the forward series (0 if none).
    pub fn max_drop(&self) -> u64 {
        self.complexity.windows(2).map(|w| w[0].saturating_sub(w[1])).max().unwrap_or(0)
    }

    pub fn total_rise(&self) -> i64 {
        *self.complexity.last().unwrap_or(&0) as i64 - *self.complexity.first().unwrap_or(&0) as i64
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "step,bits")?;
        for (k, b) in self.complexity.iter().enumerate() {
            writeln!(out, "{k},{b}")?;
        }
        Ok(())
    }
}

/// Evolves `initial` for `steps` steps, records the compressed size of every
/// state, then replays the inverse rule from the final state and checks that
/// it lands exactly on `initial`.
pub fn second_law_run(
    initial: &BitState,
    rule: &ReversibleRule,
    steps: usize,
    compressor: &Compressor,
    execution: Execution,
) -> Result<SecondLawRun> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(initial.clone());
    for k in 0..steps {
        let next = rule.step(&states[k], k)?;
        states.push(next);
    }
    let inverse = rule.inverse();
    let mut reverse = Vec::with_capacity(steps + 1);
    reverse.push(states[steps].clone());
    for k in (0..steps).rev() {
        let prev = inverse.step(reverse.last().expect("non-empty"), k)?;
        reverse.push(prev);
    }
    if reverse.last() != Some(initial) {
        return Err(AlgoError::NotReversible);
    }
    let size = |s: &BitState| compressor.bits(&s.to_bytes());
    let complexity = exec::map_indices(execution, states.len(), |k| size(&states[k]));
    let reverse_complexity = exec::map_indices(execution, reverse.len(), |k| size(&reverse[k]));
    Ok(SecondLawRun { complexity, reverse_complexity, final_state_ones: states[steps].count_ones() })
}
