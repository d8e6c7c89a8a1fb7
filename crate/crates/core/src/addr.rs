//! Physical-address to CHA mapping modeled as configurable XOR mask sets,
//! plus the quadrant-cycle and fast quadrant-walk machinery built on top of it.
//!
//! Each CHA index bit is the parity of a subset of the address bits 33:6,
//! XORed with an affine constant. Bits 5:0 are the intra-line offset and
//! bits above 33 fall outside the mapped space; neither ever affects the
//! result. Because the mapping is XOR-linear in the address bits, the CHA
//! deltas produced by the low window bits (12:6) can be tabulated once per
//! mask set, which lets range walks evaluate the full mapping only once per
//! 8 KiB window instead of once per line.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Bytes per cache line.
pub const LINE_BYTES: u64 = 64;
/// Bytes per quadrant group: four consecutive lines covering all four quadrants.
pub const GROUP_BYTES: u64 = 256;
/// Bytes per offset window: 32 groups sharing one packed offset word.
pub const WINDOW_BYTES: u64 = 8192;
/// Lowest address bit participating in the mapping.
pub const MAP_BIT_LO: u32 = 6;
/// Highest address bit participating in the mapping.
pub const MAP_BIT_HI: u32 = 33;
/// Mask of the address bits that participate in the mapping (33:6).
pub const MAP_BITS: u64 = ((1u64 << (MAP_BIT_HI + 1)) - 1) & !(LINE_BYTES - 1);

const GROUPS_PER_WINDOW: usize = (WINDOW_BYTES / GROUP_BYTES) as usize;
const LINES_PER_WINDOW: usize = (WINDOW_BYTES / LINE_BYTES) as usize;

/// A 64-bit physical byte address. Only bits 33:6 are significant to the
/// CHA mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PhysAddr(pub u64);

impl PhysAddr {
    pub const fn new(value: u64) -> Self {
        PhysAddr(value)
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    /// Base address of the cache line containing this address.
    pub const fn line(self) -> PhysAddr {
        PhysAddr(self.0 & !(LINE_BYTES - 1))
    }

    pub const fn offset(self, bytes: u64) -> PhysAddr {
        PhysAddr(self.0 + bytes)
    }

    pub const fn is_aligned(self, align: u64) -> bool {
        self.0.is_multiple_of(align)
    }
}

impl fmt::Display for PhysAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl FromStr for PhysAddr {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let hex = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .ok_or_else(|| format!("address `{s}` must be hexadecimal with a 0x prefix"))?;
        u64::from_str_radix(hex, 16)
            .map(PhysAddr)
            .map_err(|e| format!("address `{s}`: {e}"))
    }
}

/// Index of a CHA in `[0, num_chas)`. The low two bits are `(c1, c0)` and
/// identify the quadrant the CHA lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChaId(pub u32);

impl ChaId {
    pub fn quadrant(self) -> Quadrant {
        Quadrant((self.0 & 0b11) as u8)
    }
}

impl fmt::Display for ChaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the four mesh quadrants, encoded as the 2-bit value `c1 c0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quadrant(pub u8);

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant(0), Quadrant(1), Quadrant(2), Quadrant(3)];

    pub fn from_bits(c1: bool, c0: bool) -> Self {
        Quadrant(((c1 as u8) << 1) | c0 as u8)
    }

    pub fn c0(self) -> bool {
        self.0 & 1 != 0
    }

    pub fn c1(self) -> bool {
        self.0 & 2 != 0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0 >> 1, self.0 & 1)
    }
}

/// Outcome of mapping an address: either a CHA index below `num_chas`, or
/// the raw XOR index when it falls at or beyond `num_chas`. The latter can
/// happen for mask sets whose CHA count is not a power of two; it is
/// surfaced rather than wrapped so statistics stay honest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChaMapping {
    Cha(ChaId),
    Unmapped { raw_index: u32 },
}

impl ChaMapping {
    pub fn ok(self) -> Option<ChaId> {
        match self {
            ChaMapping::Cha(id) => Some(id),
            ChaMapping::Unmapped { .. } => None,
        }
    }
}

fn parity(bits: u64) -> u32 {
    bits.count_ones() & 1
}

/// The address-to-CHA mapping: one XOR mask over address bits 33:6 plus an
/// affine constant per CHA index bit.
///
/// Construction precomputes a 128-entry table of CHA-index deltas indexed by
/// address bits 12:6, and (for quadrant-valid sets) the four packed
/// offset-window words derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XorMaskSet {
    num_cha_bits: u32,
    num_chas: u32,
    masks: Vec<u64>,
    constants: u64,
    delta: Vec<u32>,
    quad_words: Option<[u64; 4]>,
}

impl XorMaskSet {
    /// Builds a mask set from per-bit masks (bit `b` of the result is the
    /// parity of `addr & masks[b]`, XOR bit `b` of `constants`).
    pub fn new(num_chas: u32, masks: Vec<u64>, constants: u64) -> Result<Self> {
        let num_cha_bits = masks.len() as u32;
        if !(1..=16).contains(&num_cha_bits) {
            return Err(Error::InvalidMaskSet(format!(
                "{num_cha_bits} CHA bits, expected 1..=16"
            )));
        }
        if num_chas == 0 || num_chas > 1 << num_cha_bits {
            return Err(Error::InvalidMaskSet(format!(
                "{num_chas} CHAs do not fit {num_cha_bits} CHA bits"
            )));
        }
        for (bit, &mask) in masks.iter().enumerate() {
            if mask & !MAP_BITS != 0 {
                return Err(Error::InvalidMaskSet(format!(
                    "mask for CHA bit {bit} selects address bits outside 6..=33"
                )));
            }
        }

        let delta: Vec<u32> = (0..LINES_PER_WINDOW as u64)
            .map(|pattern| {
                let addr = pattern << MAP_BIT_LO;
                masks
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (b, &m)| acc | (parity(addr & m) << b))
            })
            .collect();
        let quad_words = Self::build_quad_words(&delta);

        Ok(XorMaskSet {
            num_cha_bits,
            num_chas,
            masks,
            constants: constants & ((1 << num_cha_bits) - 1),
            delta,
            quad_words,
        })
    }

    /// All-zero masks and constants: every address maps to CHA 0.
    pub fn zeroed(num_cha_bits: u32) -> Self {
        XorMaskSet::new(1, vec![0; num_cha_bits as usize], 0).expect("zero mask set")
    }

    /// Deterministic random quadrant-valid mask set. Address bit 6 always
    /// feeds both low CHA bits, bit 7 exactly one of them, so every 256-byte
    /// group holds one line per quadrant; all other bits are drawn freely.
    pub fn random_quadrant_valid(seed: u64, num_cha_bits: u32, num_chas: u32) -> Result<Self> {
        if num_cha_bits < 2 {
            return Err(Error::InvalidMaskSet(
                "quadrant-valid sets need at least 2 CHA bits".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut masks: Vec<u64> = (0..num_cha_bits)
            .map(|_| rng.random::<u64>() & MAP_BITS)
            .collect();
        let bit6 = 1u64 << 6;
        let bit7 = 1u64 << 7;
        masks[0] |= bit6;
        masks[1] |= bit6;
        if rng.random::<bool>() {
            masks[0] &= !bit7;
            masks[1] |= bit7;
        } else {
            masks[0] |= bit7;
            masks[1] &= !bit7;
        }
        let constants = rng.random::<u64>() & ((1 << num_cha_bits) - 1);
        XorMaskSet::new(num_chas, masks, constants)
    }

    /// The synthetic default configuration: 6 CHA bits over 38 CHAs, so raw
    /// indices 38..63 surface as unmapped, mirroring a mesh with a
    /// non-power-of-two CHA count.
    pub fn synthetic_default() -> Self {
        XorMaskSet::random_quadrant_valid(42, 6, 38).expect("synthetic default mask set")
    }

    fn build_quad_words(delta: &[u32]) -> Option<[u64; 4]> {
        // +64 B must flip both quadrant bits and +128 B exactly one of them;
        // only then does every group hold one line per quadrant.
        let d64 = delta[1] & 0b11;
        let d128 = delta[2] & 0b11;
        if d64 != 0b11 || !(d128 == 0b01 || d128 == 0b10) {
            return None;
        }
        let mut words = [0u64; 4];
        for group in 0..GROUPS_PER_WINDOW {
            for pos in 0..4usize {
                let diff = delta[(group << 2) | pos] & 0b11;
                words[diff as usize] |= (pos as u64) << (2 * group);
            }
        }
        Some(words)
    }

    pub fn num_chas(&self) -> u32 {
        self.num_chas
    }

    pub fn num_cha_bits(&self) -> u32 {
        self.num_cha_bits
    }

    pub fn mask(&self, bit: u32) -> u64 {
        self.masks[bit as usize]
    }

    pub fn constant(&self, bit: u32) -> bool {
        self.constants >> bit & 1 != 0
    }

    pub fn constants(&self) -> u64 {
        self.constants
    }

    /// True when bit 6 flips both quadrant bits and bit 7 exactly one, i.e.
    /// every 256-byte group contains exactly one line per quadrant.
    pub fn is_quadrant_valid(&self) -> bool {
        self.quad_words.is_some()
    }

    /// Raw XOR index of an address, before the `num_chas` bound check.
    pub fn cha_index(&self, addr: PhysAddr) -> u32 {
        let a = addr.value() & MAP_BITS;
        self.masks
            .iter()
            .enumerate()
            .fold(self.constants as u32, |acc, (b, &m)| {
                acc ^ (parity(a & m) << b)
            })
    }

    /// Maps an address to its CHA, surfacing indices at or beyond
    /// `num_chas` as [`ChaMapping::Unmapped`].
    pub fn cha_of(&self, addr: PhysAddr) -> ChaMapping {
        let raw_index = self.cha_index(addr);
        if raw_index < self.num_chas {
            ChaMapping::Cha(ChaId(raw_index))
        } else {
            ChaMapping::Unmapped { raw_index }
        }
    }

    /// Quadrant of an address: the low two bits of the raw index. Total even
    /// when the full index is unmapped.
    pub fn quadrant_of(&self, addr: PhysAddr) -> Quadrant {
        Quadrant((self.cha_index(addr) & 0b11) as u8)
    }

    /// Quadrants of the four lines of a 256-byte group, in line order.
    /// Errors if the four quadrants are not pairwise distinct.
    pub fn group_cycle(&self, group_base: PhysAddr) -> Result<[Quadrant; 4]> {
        check_aligned("group base", group_base.value(), GROUP_BYTES)?;
        let q: Vec<Quadrant> = (0..4)
            .map(|i| self.quadrant_of(group_base.offset(i * LINE_BYTES)))
            .collect();
        let seen: u8 = q.iter().fold(0, |acc, qq| acc | 1 << qq.0);
        if seen != 0b1111 {
            return Err(Error::NotQuadrantValid);
        }
        Ok([q[0], q[1], q[2], q[3]])
    }

    /// Packed offset word for one 8 KiB window: for each of its 32 groups,
    /// the 2-bit within-group position of the unique line in quadrant `q`.
    /// Costs a single full mapping evaluation; the 31 other positions come
    /// from the precomputed delta table.
    pub fn offset_window(&self, window_base: PhysAddr, q: Quadrant) -> Result<OffsetWindow> {
        check_aligned("window base", window_base.value(), WINDOW_BYTES)?;
        let words = self.quad_words.ok_or(Error::NotQuadrantValid)?;
        let diff = q.0 ^ self.quadrant_of(window_base).0;
        Ok(OffsetWindow {
            window_base,
            quadrant: q,
            packed: words[diff as usize],
        })
    }

    /// All lines of quadrant `q` within `[start, start + len_bytes)`, in
    /// increasing address order, along with the number of full mapping
    /// evaluations spent (one per 8 KiB window touched).
    pub fn quadrant_walk(
        &self,
        start: PhysAddr,
        len_bytes: u64,
        q: Quadrant,
    ) -> Result<QuadrantWalk> {
        check_aligned("range start", start.value(), GROUP_BYTES)?;
        check_aligned("range length", len_bytes, GROUP_BYTES)?;
        let end = checked_range_end(start, len_bytes)?;
        let words = self.quad_words.ok_or(Error::NotQuadrantValid)?;
        let mut walk = QuadrantWalk {
            lines: Vec::with_capacity((len_bytes / GROUP_BYTES) as usize),
            full_evaluations: 0,
        };
        if len_bytes == 0 {
            return Ok(walk);
        }
        let mut window = start.value() & !(WINDOW_BYTES - 1);
        while window < end {
            walk.full_evaluations += 1;
            let diff = q.0 ^ self.quadrant_of(PhysAddr(window)).0;
            let word = words[diff as usize];
            let g_lo = window.max(start.value()).wrapping_sub(window) / GROUP_BYTES;
            let g_hi = ((end - window) / GROUP_BYTES).min(GROUPS_PER_WINDOW as u64);
            for g in g_lo..g_hi {
                let pos = word >> (2 * g) & 0b11;
                walk.lines
                    .push(PhysAddr(window + g * GROUP_BYTES + pos * LINE_BYTES));
            }
            window += WINDOW_BYTES;
        }
        Ok(walk)
    }

    /// Per-CHA and per-quadrant line counts over `[start, start + len_bytes)`.
    pub fn histogram(&self, start: PhysAddr, len_bytes: u64) -> Result<Histogram> {
        self.check_histogram_range(start, len_bytes)?;
        let n_lines = len_bytes / LINE_BYTES;
        #[cfg(feature = "parallel")]
        {
            // Tallying one line is a handful of popcounts; parallelize over
            // coarse sub-ranges so each task runs the tight sequential loop.
            const CHUNK_LINES: u64 = 1 << 16;
            let n_chunks = n_lines.div_ceil(CHUNK_LINES) as usize;
            let hist = (0..n_chunks)
                .into_par_iter()
                .map(|c| {
                    let first = c as u64 * CHUNK_LINES;
                    let count = CHUNK_LINES.min(n_lines - first);
                    self.histogram_lines(start.offset(first * LINE_BYTES), count)
                })
                .reduce(|| Histogram::empty(self.num_chas), Histogram::merge);
            Ok(hist)
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok(self.histogram_lines(start, n_lines))
        }
    }

    /// Sequential reference for [`XorMaskSet::histogram`]; the default build
    /// dispatches to the rayon path.
    pub fn histogram_seq(&self, start: PhysAddr, len_bytes: u64) -> Result<Histogram> {
        self.check_histogram_range(start, len_bytes)?;
        Ok(self.histogram_lines(start, len_bytes / LINE_BYTES))
    }

    fn check_histogram_range(&self, start: PhysAddr, len_bytes: u64) -> Result<()> {
        check_aligned("range start", start.value(), LINE_BYTES)?;
        check_aligned("range length", len_bytes, LINE_BYTES)?;
        checked_range_end(start, len_bytes).map(|_| ())
    }

    fn histogram_lines(&self, start: PhysAddr, n_lines: u64) -> Histogram {
        let mut hist = Histogram::empty(self.num_chas);
        for i in 0..n_lines {
            hist.tally(self.cha_index(start.offset(i * LINE_BYTES)), self.num_chas);
        }
        hist
    }
}

fn check_aligned(what: &'static str, value: u64, align: u64) -> Result<()> {
    if !value.is_multiple_of(align) {
        return Err(Error::Misaligned { what, value, align });
    }
    Ok(())
}

fn checked_range_end(start: PhysAddr, len_bytes: u64) -> Result<u64> {
    start
        .value()
        .checked_add(len_bytes)
        .ok_or_else(|| Error::InvalidInput(format!("range {start}+{len_bytes:#x} overflows")))
}

/// Result of a quadrant walk: the matching lines plus the number of full
/// mapping evaluations performed.
#[derive(Debug, Clone)]
pub struct QuadrantWalk {
    pub lines: Vec<PhysAddr>,
    pub full_evaluations: usize,
}

/// A 64-bit word packing, for 32 consecutive 256-byte groups, the 2-bit
/// within-group position of the line belonging to one quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OffsetWindow {
    pub window_base: PhysAddr,
    pub quadrant: Quadrant,
    pub packed: u64,
}

impl OffsetWindow {
    /// Within-group line position (0..4) for group `g` in 0..32.
    pub fn position(&self, group: usize) -> u8 {
        debug_assert!(group < GROUPS_PER_WINDOW);
        (self.packed >> (2 * group) & 0b11) as u8
    }

    /// The 32 line addresses this window selects, in address order.
    pub fn lines(&self) -> impl Iterator<Item = PhysAddr> + '_ {
        (0..GROUPS_PER_WINDOW).map(move |g| {
            self.window_base
                .offset(g as u64 * GROUP_BYTES + self.position(g) as u64 * LINE_BYTES)
        })
    }
}

/// Line counts of a histogram run: per CHA, per quadrant, and the lines
/// whose raw index fell beyond the configured CHA count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub per_cha: Vec<u64>,
    pub per_quadrant: [u64; 4],
    pub unmapped: u64,
}

impl Histogram {
    fn empty(num_chas: u32) -> Self {
        Histogram {
            per_cha: vec![0; num_chas as usize],
            per_quadrant: [0; 4],
            unmapped: 0,
        }
    }

    fn tally(&mut self, raw_index: u32, num_chas: u32) {
        if raw_index < num_chas {
            self.per_cha[raw_index as usize] += 1;
        } else {
            self.unmapped += 1;
        }
        self.per_quadrant[(raw_index & 0b11) as usize] += 1;
    }

    #[cfg(feature = "parallel")]
    fn merge(mut self, other: Histogram) -> Histogram {
        for (a, b) in self.per_cha.iter_mut().zip(&other.per_cha) {
            *a += b;
        }
        for (a, b) in self.per_quadrant.iter_mut().zip(&other.per_quadrant) {
            *a += b;
        }
        self.unmapped += other.unmapped;
        self
    }

    pub fn total_lines(&self) -> u64 {
        self.per_quadrant.iter().sum()
    }

    /// Max/min ratio over the per-CHA counts. Infinite when some CHA saw no
    /// lines; reported, never enforced.
    pub fn cha_spread(&self) -> f64 {
        let max = self.per_cha.iter().copied().max().unwrap_or(0);
        let min = self.per_cha.iter().copied().min().unwrap_or(0);
        if min == 0 {
            f64::INFINITY
        } else {
            max as f64 / min as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// mask_0 = {6}, mask_1 = {6,7}: the minimal quadrant-valid set.
    pub(crate) fn m0() -> XorMaskSet {
        XorMaskSet::new(4, vec![1 << 6, (1 << 6) | (1 << 7)], 0).unwrap()
    }

    /// Bit-by-bit parity oracle, independent of the mask/popcount path.
    fn oracle_index(map: &XorMaskSet, addr: u64) -> u32 {
        let mut idx = 0u32;
        for b in 0..map.num_cha_bits() {
            let mut bit = map.constant(b) as u32;
            for pos in MAP_BIT_LO..=MAP_BIT_HI {
                if map.mask(b) >> pos & 1 != 0 {
                    bit ^= (addr >> pos & 1) as u32;
                }
            }
            idx |= bit << b;
        }
        idx
    }

    #[test]
    fn zero_masks_map_everything_to_cha_zero() {
        let map = XorMaskSet::zeroed(6);
        for addr in [0u64, 0x40, 0x1234_5680, (1 << 34) - 64] {
            assert_eq!(map.cha_of(PhysAddr(addr)), ChaMapping::Cha(ChaId(0)));
        }
    }

    #[test]
    fn single_bit_mask_is_a_parity_of_bit_6() {
        let map = XorMaskSet::new(2, vec![1 << 6], 0).unwrap();
        assert_eq!(map.cha_of(PhysAddr(0x40)), ChaMapping::Cha(ChaId(1)));
        assert_eq!(map.cha_of(PhysAddr(0x80)), ChaMapping::Cha(ChaId(0)));
    }

    #[test]
    fn bits_above_33_never_change_the_cha() {
        let maps = [
            m0(),
            XorMaskSet::synthetic_default(),
            XorMaskSet::random_quadrant_valid(7, 6, 64).unwrap(),
        ];
        for map in &maps {
            for addr in [0u64, 0x40, 0x2_0000_0040, 0x3_FFFF_FFC0] {
                assert_eq!(
                    map.cha_index(PhysAddr(addr)),
                    map.cha_index(PhysAddr(addr + (1 << 34)))
                );
            }
        }
    }

    #[test]
    fn cha_index_matches_parity_oracle() {
        let map = XorMaskSet::random_quadrant_valid(42, 6, 38).unwrap();
        assert_eq!(
            map.cha_index(PhysAddr(0x2_0000_0040)),
            oracle_index(&map, 0x2_0000_0040)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..2000 {
            let addr = rng.random::<u64>() & MAP_BITS;
            assert_eq!(map.cha_index(PhysAddr(addr)), oracle_index(&map, addr));
        }
    }

    #[test]
    fn unmapped_indices_are_surfaced() {
        let map = XorMaskSet::synthetic_default();
        let mut saw_unmapped = false;
        for i in 0..256u64 {
            if let ChaMapping::Unmapped { raw_index } = map.cha_of(PhysAddr(i * 64)) {
                assert!(raw_index >= 38);
                saw_unmapped = true;
            }
        }
        assert!(
            saw_unmapped,
            "38-of-64 mask set never overflowed in 256 lines"
        );
    }

    #[test]
    fn m0_quadrants_cycle_through_the_group() {
        let map = m0();
        assert_eq!(map.quadrant_of(PhysAddr(0x00)), Quadrant(0b00));
        assert_eq!(map.quadrant_of(PhysAddr(0x40)), Quadrant(0b11));
        assert_eq!(map.quadrant_of(PhysAddr(0x80)), Quadrant(0b10));
        assert_eq!(map.quadrant_of(PhysAddr(0xC0)), Quadrant(0b01));
    }

    #[test]
    fn group_cycle_m0() {
        let map = m0();
        let expect = [
            Quadrant(0b00),
            Quadrant(0b11),
            Quadrant(0b10),
            Quadrant(0b01),
        ];
        assert_eq!(map.group_cycle(PhysAddr(0x000)).unwrap(), expect);
        // M0 only uses bits 6 and 7, so the pattern repeats group after group.
        assert_eq!(map.group_cycle(PhysAddr(0x100)).unwrap(), expect);
    }

    #[test]
    fn group_cycle_is_distinct_for_random_quadrant_valid_sets() {
        let map = XorMaskSet::random_quadrant_valid(42, 6, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let base = rng.random::<u64>() & MAP_BITS & !(GROUP_BYTES - 1);
            let cycle = map.group_cycle(PhysAddr(base)).unwrap();
            let seen: u8 = cycle.iter().fold(0, |acc, q| acc | 1 << q.0);
            assert_eq!(seen, 0b1111);
        }
    }

    #[test]
    fn group_cycle_rejects_degenerate_maps() {
        // Bit 7 feeds both low CHA bits: +128 B flips neither quadrant bit.
        let map = XorMaskSet::new(4, vec![(1 << 6) | (1 << 7), (1 << 6) | (1 << 7)], 0).unwrap();
        assert!(!map.is_quadrant_valid());
        assert!(matches!(
            map.group_cycle(PhysAddr(0)),
            Err(Error::NotQuadrantValid)
        ));
    }

    #[test]
    fn offset_window_m0_packed_words() {
        let map = m0();
        let w00 = map.offset_window(PhysAddr(0), Quadrant(0b00)).unwrap();
        assert_eq!(w00.packed, 0);
        let w11 = map.offset_window(PhysAddr(0), Quadrant(0b11)).unwrap();
        assert_eq!(w11.packed, 0x5555_5555_5555_5555);
    }

    #[test]
    fn offset_window_matches_brute_force_scan() {
        let map = XorMaskSet::random_quadrant_valid(42, 6, 64).unwrap();
        for base in [0u64, 0x2000, 0x1_2344_8000, 0x3_FFFF_E000] {
            for q in Quadrant::ALL {
                let win = map.offset_window(PhysAddr(base), q).unwrap();
                for g in 0..32u64 {
                    let brute: Vec<u64> = (0..4)
                        .filter(|p| map.quadrant_of(PhysAddr(base + g * 256 + p * 64)) == q)
                        .collect();
                    assert_eq!(brute.len(), 1);
                    assert_eq!(win.position(g as usize) as u64, brute[0]);
                }
            }
        }
    }

    #[test]
    fn quadrant_walk_m0_strides() {
        let map = m0();
        let w = map
            .quadrant_walk(PhysAddr(0), 8192, Quadrant(0b00))
            .unwrap();
        let expect: Vec<PhysAddr> = (0..32).map(|g| PhysAddr(g * 256)).collect();
        assert_eq!(w.lines, expect);

        let w = map
            .quadrant_walk(PhysAddr(0), 8192, Quadrant(0b11))
            .unwrap();
        let expect: Vec<PhysAddr> = (0..32).map(|g| PhysAddr(g * 256 + 64)).collect();
        assert_eq!(w.lines, expect);
        assert_eq!(*w.lines.last().unwrap(), PhysAddr(8000));
    }

    #[test]
    fn quadrant_walk_matches_brute_force_filter() {
        let map = XorMaskSet::random_quadrant_valid(42, 6, 64).unwrap();
        let len = 1u64 << 20;
        for q in Quadrant::ALL {
            let walk = map.quadrant_walk(PhysAddr(0), len, q).unwrap();
            let brute: Vec<PhysAddr> = (0..len / 64)
                .map(|i| PhysAddr(i * 64))
                .filter(|&a| map.quadrant_of(a) == q)
                .collect();
            assert_eq!(walk.lines, brute);
            assert!(walk.full_evaluations <= walk.lines.len().div_ceil(32) + 1);
        }
    }

    #[test]
    fn quadrant_walk_empty_range() {
        let w = m0().quadrant_walk(PhysAddr(0), 0, Quadrant(0b01)).unwrap();
        assert!(w.lines.is_empty());
        assert_eq!(w.full_evaluations, 0);
    }

    #[test]
    fn quadrant_walk_unaligned_range_is_rejected() {
        assert!(matches!(
            m0().quadrant_walk(PhysAddr(64), 256, Quadrant(0)),
            Err(Error::Misaligned { .. })
        ));
    }

    #[test]
    fn histogram_m0_exact_quarters() {
        let map = m0();
        let h = map.histogram(PhysAddr(0), 1 << 20).unwrap();
        assert_eq!(h.per_quadrant, [4096; 4]);
        assert_eq!(h.total_lines(), 16384);
    }

    #[test]
    fn histogram_matches_brute_tally() {
        let map = XorMaskSet::synthetic_default();
        let start = PhysAddr(0x1234_5600 & !0xff);
        let len = 1u64 << 20;
        let h = map.histogram(start, len).unwrap();
        let hs = map.histogram_seq(start, len).unwrap();
        assert_eq!(h, hs);

        let mut per_cha = vec![0u64; 38];
        let mut unmapped = 0u64;
        for i in 0..len / 64 {
            let idx = map.cha_index(start.offset(i * 64));
            if idx < 38 {
                per_cha[idx as usize] += 1;
            } else {
                unmapped += 1;
            }
        }
        assert_eq!(h.per_cha, per_cha);
        assert_eq!(h.unmapped, unmapped);
        assert_eq!(h.per_quadrant, [len / 64 / 4; 4]);
    }

    #[test]
    fn mask_set_rejects_out_of_range_bits() {
        assert!(XorMaskSet::new(2, vec![1 << 5], 0).is_err());
        assert!(XorMaskSet::new(2, vec![1 << 34], 0).is_err());
        assert!(XorMaskSet::new(8, vec![1 << 6], 0).is_err());
    }

    #[test]
    fn overflowing_ranges_are_rejected() {
        let map = m0();
        let top = PhysAddr(!(GROUP_BYTES - 1));
        assert!(matches!(
            map.quadrant_walk(top, 1 << 20, Quadrant(0)),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            map.histogram(top, 1 << 20),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn phys_addr_parses_hex_only() {
        assert_eq!("0x40".parse::<PhysAddr>().unwrap(), PhysAddr(0x40));
        assert!("64".parse::<PhysAddr>().is_err());
    }
}
