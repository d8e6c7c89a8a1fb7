//! Recovery of an [`XorMaskSet`] from (address, CHA) observation samples.
//!
//! Each CHA index bit is an independent affine function over GF(2) of the 28
//! address bits 33:6 plus a constant, so recovery reduces to one 29-unknown
//! linear solve per bit. Rows are kept as bitsets in a single `u64` and
//! eliminated incrementally; a sample whose equation contradicts the span of
//! the rows accepted so far is counted in the residual and dropped, which
//! yields the solution of a maximal-in-order consistent subsystem instead of
//! aborting on noisy data.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::addr::{ChaId, ChaMapping, PhysAddr, XorMaskSet, MAP_BIT_HI, MAP_BIT_LO};
use crate::error::{Error, Result};

/// One observation: an address and the CHA index it mapped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub addr: PhysAddr,
    pub cha: ChaId,
}

/// An unknown of the per-bit linear system left free by the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    /// The mask coefficient of one address bit position.
    AddrBit(u32),
    /// The affine constant.
    Constant,
}

/// Outcome of [`learn_xor_masks`].
///
/// `residuals[b]` counts the samples whose equation for CHA bit `b` was
/// inconsistent with the rows accepted before it; zero everywhere means the
/// recovered set reproduces every sample exactly. `free[b]` lists the
/// unknowns the samples never pinned down; they default to zero.
#[derive(Debug, Clone)]
pub struct LearnResult {
    pub recovered: XorMaskSet,
    pub residuals: Vec<usize>,
    pub free: Vec<Vec<Unknown>>,
}

impl LearnResult {
    pub fn total_residual(&self) -> usize {
        self.residuals.iter().sum()
    }

    pub fn is_exact(&self) -> bool {
        self.total_residual() == 0 && self.free.iter().all(Vec::is_empty)
    }
}

/// Generates `n` samples with uniformly random mapped address bits (33:6)
/// from a planted mask set, deterministically per seed.
pub fn synth_samples(planted: &XorMaskSet, n: usize, seed: u64) -> Result<Vec<Sample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let addr = PhysAddr((rng.random::<u64>() & 0x0FFF_FFFF) << MAP_BIT_LO);
        match planted.cha_of(addr) {
            ChaMapping::Cha(cha) => samples.push(Sample { addr, cha }),
            ChaMapping::Unmapped { raw_index } => {
                return Err(Error::UnmappedAddress {
                    addr,
                    index: raw_index,
                    num_chas: planted.num_chas(),
                })
            }
        }
    }
    Ok(samples)
}

const UNKNOWNS: usize = (MAP_BIT_HI - MAP_BIT_LO + 1) as usize + 1; // 28 mask bits + constant
const CONST_COL: usize = UNKNOWNS - 1;
const COEFF_MASK: u64 = (1 << UNKNOWNS) - 1;
const RHS_BIT: u64 = 1 << UNKNOWNS;

#[derive(Debug, Clone, PartialEq, Eq)]
struct BitSolution {
    mask: u64,
    constant: bool,
    residual: usize,
    free: Vec<Unknown>,
}

#[allow(clippy::needless_range_loop)]
fn solve_bit(samples: &[Sample], bit: u32) -> BitSolution {
    let mut basis = [0u64; UNKNOWNS];
    let mut residual = 0usize;

    for s in samples {
        let coeffs = (s.addr.value() >> MAP_BIT_LO) & (COEFF_MASK >> 1);
        let rhs = (s.cha.0 >> bit & 1) as u64;
        let mut row = coeffs | (1 << CONST_COL) | (rhs << UNKNOWNS);
        loop {
            let lead = (row & COEFF_MASK).trailing_zeros() as usize;
            if lead >= UNKNOWNS {
                if row & RHS_BIT != 0 {
                    residual += 1; // 0 = 1: contradicts the accepted rows
                }
                break;
            }
            if basis[lead] == 0 {
                basis[lead] = row;
                break;
            }
            row ^= basis[lead];
        }
    }

    // Jordan pass: clear every pivot column from the other rows, so each
    // pivot's value is its row's RHS once free unknowns default to zero.
    for col in 0..UNKNOWNS {
        if basis[col] == 0 {
            continue;
        }
        for other in 0..UNKNOWNS {
            if other != col && basis[other] != 0 && basis[other] >> col & 1 != 0 {
                basis[other] ^= basis[col];
            }
        }
    }

    let mut mask = 0u64;
    let mut constant = false;
    let mut free = Vec::new();
    for col in 0..UNKNOWNS {
        if basis[col] == 0 {
            free.push(if col == CONST_COL {
                Unknown::Constant
            } else {
                Unknown::AddrBit(MAP_BIT_LO + col as u32)
            });
            continue;
        }
        let value = basis[col] & RHS_BIT != 0;
        if col == CONST_COL {
            constant = value;
        } else if value {
            mask |= 1 << (MAP_BIT_LO + col as u32);
        }
    }

    BitSolution {
        mask,
        constant,
        residual,
        free,
    }
}

fn assemble(solutions: Vec<BitSolution>) -> Result<LearnResult> {
    let num_cha_bits = solutions.len() as u32;
    let masks = solutions.iter().map(|s| s.mask).collect();
    let constants = solutions
        .iter()
        .enumerate()
        .fold(0u64, |acc, (b, s)| acc | (s.constant as u64) << b);
    // The samples say nothing about the system's CHA count; report the total
    // model over all 2^bits indices.
    let recovered = XorMaskSet::new(1 << num_cha_bits, masks, constants)?;
    Ok(LearnResult {
        recovered,
        residuals: solutions.iter().map(|s| s.residual).collect(),
        free: solutions.into_iter().map(|s| s.free).collect(),
    })
}

/// Recovers an XOR mask set from samples by per-bit Gaussian elimination
/// over GF(2). Errors only on an empty sample list.
pub fn learn_xor_masks(samples: &[Sample], num_cha_bits: u32) -> Result<LearnResult> {
    if samples.is_empty() {
        return Err(Error::InvalidMaskSet("no samples to learn from".into()));
    }
    #[cfg(feature = "parallel")]
    let solutions: Vec<BitSolution> = (0..num_cha_bits)
        .into_par_iter()
        .map(|b| solve_bit(samples, b))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let solutions: Vec<BitSolution> = (0..num_cha_bits).map(|b| solve_bit(samples, b)).collect();
    assemble(solutions)
}

/// Sequential reference for [`learn_xor_masks`].
pub fn learn_xor_masks_seq(samples: &[Sample], num_cha_bits: u32) -> Result<LearnResult> {
    if samples.is_empty() {
        return Err(Error::InvalidMaskSet("no samples to learn from".into()));
    }
    assemble((0..num_cha_bits).map(|b| solve_bit(samples, b)).collect())
}

fn sample_mismatch(map: &XorMaskSet, s: &Sample) -> bool {
    map.cha_of(s.addr) != ChaMapping::Cha(s.cha)
}

/// Number of samples a mask set fails to reproduce.
pub fn verify_masks(map: &XorMaskSet, samples: &[Sample]) -> usize {
    #[cfg(feature = "parallel")]
    {
        samples
            .par_iter()
            .with_min_len(1024)
            .filter(|s| sample_mismatch(map, s))
            .count()
    }
    #[cfg(not(feature = "parallel"))]
    {
        verify_masks_seq(map, samples)
    }
}

/// Sequential reference for [`verify_masks`].
pub fn verify_masks_seq(map: &XorMaskSet, samples: &[Sample]) -> usize {
    samples.iter().filter(|s| sample_mismatch(map, s)).count()
}
