//! Models XOR-based distributed-directory (CHA) address mappings on mesh
//! manycores, recovers such mappings from observation samples, and builds
//! and evaluates coherence-aware schedules under an explicit NoC cost model.
//!
//! The pieces, bottom up:
//!
//! - [`addr`]: the mapping itself — per CHA-index bit, an XOR mask over
//!   physical address bits 33:6 plus an affine constant — with the quadrant
//!   cycle of consecutive cache lines, packed offset windows, and a fast
//!   quadrant walk that evaluates the full mapping once per 32 lines.
//! - [`learn`]: recovery of a mask set from `(address, CHA)` samples by
//!   per-bit Gaussian elimination over GF(2).
//! - [`mesh`]: grid geometry, the zero-overhead rectangle access model,
//!   block/statement access costs, and a deterministic schedule simulator.
//! - [`sched`]: statement mining from sparse matrices plus three schedulers:
//!   sequential row blocks, the sub-NUMA quadrant walk, and greedy
//!   coherence-aware assignment.
//! - [`matrix`], [`layout`]: Matrix Market ingestion, the emulated 16 GiB
//!   hugepage pool, static/dynamic page pinning, and block layout.
//! - [`config`]: the structured-text file formats tying the CLI together.
//!
//! Hot kernels (histogram tallies, per-bit solves, greedy candidate scans)
//! run data-parallel under the default `parallel` feature and sequentially
//! without it; `*_seq` twins expose the sequential path for benchmarks and
//! equivalence tests either way.

pub mod addr;
pub mod config;
pub mod error;
pub mod layout;
pub mod learn;
pub mod matrix;
pub mod mesh;
pub mod sched;

pub use addr::{
    ChaId, ChaMapping, Histogram, OffsetWindow, PhysAddr, Quadrant, QuadrantWalk, XorMaskSet,
    GROUP_BYTES, LINE_BYTES, MAP_BITS, MAP_BIT_HI, MAP_BIT_LO, WINDOW_BYTES,
};
pub use error::{Error, Result};
pub use layout::{
    assign_hugepages, emulate_hugepage_pool, layout_blocks, BlockLayout, HugepagePool, OperandRole,
    PageAssignment, SpmvOperands, StructureLayout, StructureSpec, PAGE_BYTES, POOL_PAGES,
};
pub use learn::{
    learn_xor_masks, learn_xor_masks_seq, synth_samples, verify_masks, verify_masks_seq,
    LearnResult, Sample, Unknown,
};
pub use matrix::{load_matrix_market, parse_matrix_market, SparseMatrix};
pub use mesh::{
    block_access_cost, simulate_schedule, statement_cost, BlockState, BlockStates, CostReport,
    MeshConfig, StructureTraffic, TileCoord, TileTraffic,
};
pub use sched::{
    dense_line_statements, greedy_schedule, greedy_schedule_seq, mine_regular_statements,
    sequential_block_schedule, subnuma_schedule, tile_visit_order, Schedule, Statement,
    DEFAULT_MAX_WIDTH,
};
