//! Emulated hugepage pool and block layout.
//!
//! Physical addresses are simulated, never read from the OS: the 16 GiB
//! space is divided into sixteen 1 GiB pages, a seeded pool hands them out
//! in a machine-dependent order, and the static/dynamic pinning procedure
//! matches the pages a layout assumed against the pages the pool produced,
//! freeing the rest. Swapping in a real pagemap reader would replace only
//! [`emulate_hugepage_pool`].

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::addr::{PhysAddr, LINE_BYTES};
use crate::error::{Error, Result};
use crate::sched::Statement;

/// Bytes per hugepage (1 GiB, the architectural maximum; smaller pages would
/// leave address bits 33:30 unknowable).
pub const PAGE_BYTES: u64 = 1 << 30;
/// Pages in the 16 GiB space.
pub const POOL_PAGES: usize = 16;

/// An ordered set of 1 GiB page base addresses, as the machine handed them out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HugepagePool {
    bases: Vec<u64>,
}

impl HugepagePool {
    pub fn bases(&self) -> &[u64] {
        &self.bases
    }
}

/// Deterministic-per-seed permutation of `available` distinct page bases
/// from the 16 GiB space.
pub fn emulate_hugepage_pool(seed: u64, available: usize) -> Result<HugepagePool> {
    if !(1..=POOL_PAGES).contains(&available) {
        return Err(Error::PoolSize { available });
    }
    let mut bases: Vec<u64> = (0..POOL_PAGES as u64).map(|k| k * PAGE_BYTES).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bases.shuffle(&mut rng);
    bases.truncate(available);
    Ok(HugepagePool { bases })
}

/// Result of matching required page bases against an allocated pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageAssignment {
    /// The required bases, in required order; each was present in the pool.
    pub assigned: Vec<u64>,
    /// Pool pages not matched by any requirement, in pool order.
    pub freed: Vec<u64>,
}

fn check_page_base(base: u64) -> Result<()> {
    if !base.is_multiple_of(PAGE_BYTES) || base >= POOL_PAGES as u64 * PAGE_BYTES {
        return Err(Error::InvalidPage { base });
    }
    Ok(())
}

/// Matches each required base to the identical base in the pool and frees
/// the rest. A required base absent from the pool fails, naming the base;
/// in a real run that is the retry condition.
pub fn assign_hugepages(required: &[u64], pool: &HugepagePool) -> Result<PageAssignment> {
    let mut seen = [false; POOL_PAGES];
    for &base in required {
        check_page_base(base)?;
        let k = (base / PAGE_BYTES) as usize;
        if seen[k] {
            return Err(Error::InvalidPage { base });
        }
        seen[k] = true;
        if !pool.bases.contains(&base) {
            return Err(Error::PageMissing { base });
        }
    }
    let freed = pool
        .bases
        .iter()
        .copied()
        .filter(|b| !required.contains(b))
        .collect();
    Ok(PageAssignment {
        assigned: required.to_vec(),
        freed,
    })
}

/// A logical structure to be placed: name, total bytes (64 B-aligned), and
/// element width in bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureSpec {
    pub name: String,
    pub size_bytes: u64,
    pub elem_bytes: u32,
}

impl StructureSpec {
    pub fn new(name: impl Into<String>, size_bytes: u64, elem_bytes: u32) -> Self {
        StructureSpec {
            name: name.into(),
            size_bytes,
            elem_bytes,
        }
    }
}

/// Placement of one structure: physically contiguous from `base`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureLayout {
    pub name: String,
    pub base: PhysAddr,
    pub size_bytes: u64,
    pub elem_bytes: u32,
    /// True when the structure crosses a hugepage boundary (the spanned
    /// pages were physically contiguous, but the placement is worth flagging).
    pub spans_pages: bool,
}

impl StructureLayout {
    pub fn n_elems(&self) -> u64 {
        self.size_bytes / self.elem_bytes as u64
    }

    /// Physical address of element `index`.
    pub fn elem_addr(&self, index: u64) -> Result<PhysAddr> {
        if (index + 1) * self.elem_bytes as u64 > self.size_bytes {
            return Err(Error::UnresolvedOperand {
                operand: "element",
                statement: 0,
                detail: format!("index {index} out of bounds for structure {}", self.name),
            });
        }
        Ok(self.base.offset(index * self.elem_bytes as u64))
    }

    /// Cache lines covering elements `[first, first + count)`, in address order.
    pub fn lines_covering(&self, first: u64, count: u64) -> Result<Vec<PhysAddr>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let start = self.elem_addr(first)?.value();
        let last = self.elem_addr(first + count - 1)?.value() + self.elem_bytes as u64 - 1;
        let mut lines = Vec::new();
        let mut line = start & !(LINE_BYTES - 1);
        while line <= last {
            lines.push(PhysAddr(line));
            line += LINE_BYTES;
        }
        Ok(lines)
    }

    pub fn contains_line(&self, line: PhysAddr) -> bool {
        line.value() >= self.base.value() & !(LINE_BYTES - 1)
            && line.value() < self.base.value() + self.size_bytes
    }
}

/// Placement of all logical structures into assigned hugepages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    structures: Vec<StructureLayout>,
}

impl BlockLayout {
    pub fn from_structures(structures: Vec<StructureLayout>) -> Self {
        BlockLayout { structures }
    }

    pub fn structures(&self) -> &[StructureLayout] {
        &self.structures
    }

    pub fn structure(&self, name: &str) -> Option<&StructureLayout> {
        self.structures.iter().find(|s| s.name == name)
    }

    /// The SpMV operand view: structures `y`, `x`, and the matrix (`A` for
    /// sparse value streams, `B` for dense matrices).
    pub fn spmv(&self) -> Result<SpmvOperands<'_>> {
        let pick = |names: &[&str], role: &'static str| {
            names
                .iter()
                .find_map(|n| self.structure(n))
                .ok_or(Error::UnresolvedOperand {
                    operand: role,
                    statement: 0,
                    detail: "structure missing from layout".into(),
                })
        };
        Ok(SpmvOperands {
            y: pick(&["y"], "y")?,
            matrix: pick(&["A", "B"], "A")?,
            x: pick(&["x"], "x")?,
        })
    }
}

/// Places structures contiguously into the assigned pages, in order.
/// A structure that does not fit in the remainder of the current page flows
/// onto the next assigned page, which must be physically contiguous with it;
/// running out of pages is an error.
pub fn layout_blocks(specs: &[StructureSpec], pages: &[u64]) -> Result<BlockLayout> {
    for &p in pages {
        check_page_base(p)?;
    }
    if pages.is_empty() && !specs.is_empty() {
        return Err(Error::PageOverflow {
            name: specs[0].name.clone(),
        });
    }
    let mut structures: Vec<StructureLayout> = Vec::with_capacity(specs.len());
    let mut page = 0usize; // index into pages
    let mut offset = 0u64; // offset within pages[page]
    for spec in specs {
        if spec.size_bytes == 0 || spec.size_bytes % LINE_BYTES != 0 {
            return Err(Error::Misaligned {
                what: "structure size",
                value: spec.size_bytes,
                align: LINE_BYTES,
            });
        }
        if spec.elem_bytes == 0 || !LINE_BYTES.is_multiple_of(spec.elem_bytes as u64) {
            return Err(Error::InvalidMaskSet(format!(
                "element size {} does not divide the {LINE_BYTES}-byte line",
                spec.elem_bytes
            )));
        }
        if page >= pages.len() {
            return Err(Error::PageOverflow {
                name: spec.name.clone(),
            });
        }
        let base = pages[page] + offset;
        let end = offset + spec.size_bytes; // bytes past the current page base
        let spanned = ((end - 1) / PAGE_BYTES) as usize; // extra pages needed
        if page + spanned >= pages.len() {
            return Err(Error::PageOverflow {
                name: spec.name.clone(),
            });
        }
        for i in 0..spanned {
            if pages[page + i + 1] != pages[page + i] + PAGE_BYTES {
                return Err(Error::PagesNotContiguous {
                    name: spec.name.clone(),
                    a: pages[page + i],
                    b: pages[page + i + 1],
                });
            }
        }
        page += spanned;
        offset = end - spanned as u64 * PAGE_BYTES;
        if offset == PAGE_BYTES {
            page += 1;
            offset = 0;
        }
        structures.push(StructureLayout {
            name: spec.name.clone(),
            base: PhysAddr(base),
            size_bytes: spec.size_bytes,
            elem_bytes: spec.elem_bytes,
            spans_pages: spanned > 0,
        });
    }
    Ok(BlockLayout { structures })
}

/// Operand roles of an SpMV statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandRole {
    Y,
    Matrix,
    X,
}

impl OperandRole {
    pub fn name(self) -> &'static str {
        match self {
            OperandRole::Y => "y",
            OperandRole::Matrix => "matrix",
            OperandRole::X => "x",
        }
    }
}

/// The three structures an SpMV statement reads and writes.
#[derive(Debug, Clone, Copy)]
pub struct SpmvOperands<'a> {
    pub y: &'a StructureLayout,
    pub matrix: &'a StructureLayout,
    pub x: &'a StructureLayout,
}

impl<'a> SpmvOperands<'a> {
    pub fn structure(&self, role: OperandRole) -> &'a StructureLayout {
        match role {
            OperandRole::Y => self.y,
            OperandRole::Matrix => self.matrix,
            OperandRole::X => self.x,
        }
    }

    /// The distinct cache lines touched by a statement, tagged with the
    /// operand they belong to. `index` only labels errors.
    pub fn statement_lines(
        &self,
        s: &Statement,
        index: usize,
    ) -> Result<Vec<(PhysAddr, OperandRole)>> {
        let name_err = |operand: &'static str, detail: String| Error::UnresolvedOperand {
            operand,
            statement: index,
            detail,
        };
        let mut lines = Vec::with_capacity(4);
        for l in self
            .y
            .lines_covering(s.row as u64, 1)
            .map_err(|e| name_err("y", e.to_string()))?
        {
            lines.push((l, OperandRole::Y));
        }
        for l in self
            .matrix
            .lines_covering(s.a_start, s.width as u64)
            .map_err(|e| name_err("A", e.to_string()))?
        {
            lines.push((l, OperandRole::Matrix));
        }
        for l in self
            .x
            .lines_covering(s.x_start as u64, s.width as u64)
            .map_err(|e| name_err("x", e.to_string()))?
        {
            lines.push((l, OperandRole::X));
        }
        Ok(lines)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_of_16_holds_every_base() {
        let pool = emulate_hugepage_pool(3, 16).unwrap();
        let mut sorted = pool.bases().to_vec();
        sorted.sort_unstable();
        let expect: Vec<u64> = (0..16).map(|k| k * PAGE_BYTES).collect();
        assert_eq!(sorted, expect);
    }

    #[test]
    fn pool_is_deterministic_per_seed() {
        assert_eq!(
            emulate_hugepage_pool(9, 16).unwrap(),
            emulate_hugepage_pool(9, 16).unwrap()
        );
        assert_eq!(emulate_hugepage_pool(9, 1).unwrap().bases().len(), 1);
        assert!(emulate_hugepage_pool(9, 0).is_err());
        assert!(emulate_hugepage_pool(9, 17).is_err());
    }

    #[test]
    fn assign_with_no_requirements_frees_everything() {
        let pool = emulate_hugepage_pool(1, 16).unwrap();
        let a = assign_hugepages(&[], &pool).unwrap();
        assert!(a.assigned.is_empty());
        assert_eq!(a.freed.len(), 16);
    }

    #[test]
    fn assign_matches_and_frees_the_rest() {
        let pool = emulate_hugepage_pool(4, 16).unwrap();
        let a = assign_hugepages(&[0x0, 0x4000_0000], &pool).unwrap();
        assert_eq!(a.assigned, vec![0x0, 0x4000_0000]);
        assert_eq!(a.freed.len(), 14);
        assert!(!a.freed.contains(&0x0));
        assert!(!a.freed.contains(&0x4000_0000));
    }

    #[test]
    fn page_outside_the_space_fails() {
        let pool = emulate_hugepage_pool(4, 16).unwrap();
        assert!(matches!(
            assign_hugepages(&[0x4_0000_0000], &pool),
            Err(Error::InvalidPage { .. })
        ));
    }

    #[test]
    fn missing_page_names_the_base() {
        let pool = emulate_hugepage_pool(4, 2).unwrap();
        let absent = (0..16)
            .map(|k| k * PAGE_BYTES)
            .find(|b| !pool.bases().contains(b))
            .unwrap();
        match assign_hugepages(&[absent], &pool) {
            Err(Error::PageMissing { base }) => assert_eq!(base, absent),
            other => panic!("expected PageMissing, got {other:?}"),
        }
    }

    #[test]
    fn one_gib_structure_exactly_fills_a_page() {
        let specs = [StructureSpec::new("B", PAGE_BYTES, 4)];
        let layout = layout_blocks(&specs, &[0x0]).unwrap();
        let b = layout.structure("B").unwrap();
        assert_eq!(b.elem_addr(0).unwrap(), PhysAddr(0));
        let last = b.elem_addr(b.n_elems() - 1).unwrap();
        assert_eq!(last.line(), PhysAddr(PAGE_BYTES - 64));
        assert!(!b.spans_pages);
    }

    #[test]
    fn n16384_single_precision_matrix_fills_one_hugepage() {
        let n = 16384u64;
        assert_eq!(4 * n * n, PAGE_BYTES);
        let layout = layout_blocks(
            &[
                StructureSpec::new("B", 4 * n * n, 4),
                StructureSpec::new("y", 4 * n, 4),
            ],
            &[0x4000_0000, 0x8000_0000],
        )
        .unwrap();
        let b = layout.structure("B").unwrap();
        assert!(!b.spans_pages);
        // B consumed its page whole; y starts on the next one.
        assert_eq!(layout.structure("y").unwrap().base, PhysAddr(0x8000_0000));
    }

    #[test]
    fn structures_on_distinct_pages_do_not_overlap() {
        let specs = [
            StructureSpec::new("y", 4096, 8),
            StructureSpec::new("A", PAGE_BYTES, 8),
            StructureSpec::new("x", 4096, 8),
        ];
        let layout = layout_blocks(&specs, &[0x0, 0x4000_0000, 0x8000_0000]).unwrap();
        let s = layout.structures();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                let (a, b) = (&s[i], &s[j]);
                let disjoint = a.base.value() + a.size_bytes <= b.base.value()
                    || b.base.value() + b.size_bytes <= a.base.value();
                assert!(disjoint, "{} overlaps {}", a.name, b.name);
            }
        }
        // A did not fit after y on page 0, so it flowed onto the next page,
        // which is contiguous here.
        assert!(layout.structure("A").unwrap().spans_pages);
    }

    #[test]
    fn overflow_without_enough_pages_errors() {
        let specs = [StructureSpec::new("A", 2 * PAGE_BYTES, 8)];
        assert!(matches!(
            layout_blocks(&specs, &[0x0]),
            Err(Error::PageOverflow { .. })
        ));
    }

    #[test]
    fn non_contiguous_spill_errors() {
        let specs = [StructureSpec::new("A", 2 * PAGE_BYTES, 8)];
        assert!(matches!(
            layout_blocks(&specs, &[0x0, 0x8000_0000]),
            Err(Error::PagesNotContiguous { .. })
        ));
    }

    #[test]
    fn resolver_is_line_aligned_and_injective() {
        let layout = layout_blocks(&[StructureSpec::new("x", 1024, 8)], &[0x4000_0000]).unwrap();
        let x = layout.structure("x").unwrap();
        let mut addrs: Vec<u64> = (0..x.n_elems())
            .map(|i| x.elem_addr(i).unwrap().value())
            .collect();
        addrs.dedup();
        assert_eq!(addrs.len() as u64, x.n_elems());
        for a in addrs {
            assert_eq!(a % 8, 0);
            assert_eq!(PhysAddr(a).line().value() % 64, 0);
        }
        assert!(x.elem_addr(x.n_elems()).is_err());
    }
}
