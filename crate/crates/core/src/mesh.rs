//! Mesh geometry, the zero-overhead rectangle access model, block and
//! statement access costs, and a deterministic schedule simulator.
//!
//! Every out-of-tile access first queries the directory tile `T_d` owning
//! the line, which forwards the request to the data tile `T_B` (a private L2
//! holding the line, or the memory controller of `T_d`'s quadrant when the
//! line is cold). Tiles inside the axis-aligned rectangle spanned by `T_d`
//! and `T_B` pay no extra mesh latency: a requestor closer to the directory
//! sees a shorter query path and a longer response path, and the two
//! compensate exactly. Tiles outside pay twice the weighted hop distance to
//! the rectangle, once for the query to enter it and once for the response
//! to come back out.

use std::collections::HashMap;

use crate::addr::{ChaMapping, PhysAddr, Quadrant, XorMaskSet};
use crate::error::{Error, Result};
use crate::layout::{BlockLayout, OperandRole, SpmvOperands};
use crate::sched::{Schedule, Statement};

/// Position of a tile on the mesh grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TileCoord {
    pub col: u16,
    pub row: u16,
}

impl TileCoord {
    pub fn new(col: u16, row: u16) -> Self {
        TileCoord { col, row }
    }
}

impl std::fmt::Display for TileCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.col, self.row)
    }
}

/// Grid geometry, active tiles, CHA and memory-controller placement, and the
/// cycle weights of the cost model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshConfig {
    pub cols: u16,
    pub rows: u16,
    /// Schedulable tiles, sorted by (row, col).
    pub active_tiles: Vec<TileCoord>,
    /// Tile hosting each CHA; index = CHA id.
    pub cha_tiles: Vec<TileCoord>,
    /// Memory-controller tile of each quadrant.
    pub mc_tiles: [TileCoord; 4],
    /// Cycles per horizontal hop.
    pub hop_horizontal: u32,
    /// Cycles per vertical hop.
    pub hop_vertical: u32,
    /// Cycles to read a line from a remote private L2.
    pub lambda_l2: u32,
    /// Cycles to read a line from a memory (MCDRAM) interface.
    pub lambda_mcdram: u32,
}

impl MeshConfig {
    /// Builds a grid with every tile active, memory controllers on the outer
    /// corner of each quadrant, and CHA `k` placed on the `k/4`-th tile
    /// (row-major) of quadrant `k & 3`, so each CHA sits in the quadrant its
    /// index bits name.
    pub fn synthetic(cols: u16, rows: u16, num_chas: u32) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return Err(Error::InvalidMesh("grid must be at least 1x1".into()));
        }
        let mut active = Vec::with_capacity(cols as usize * rows as usize);
        for row in 0..rows {
            for col in 0..cols {
                active.push(TileCoord { col, row });
            }
        }
        let mc_tiles = [
            TileCoord::new(0, 0),
            TileCoord::new(cols - 1, 0),
            TileCoord::new(0, rows - 1),
            TileCoord::new(cols - 1, rows - 1),
        ];
        let mut config = MeshConfig {
            cols,
            rows,
            active_tiles: active,
            cha_tiles: Vec::new(),
            mc_tiles,
            hop_horizontal: 2,
            hop_vertical: 1,
            lambda_l2: 12,
            lambda_mcdram: 115,
        };
        let mut by_quadrant: [Vec<TileCoord>; 4] = Default::default();
        for &t in &config.active_tiles {
            by_quadrant[config.tile_quadrant(t).index()].push(t);
        }
        let mut cha_tiles = Vec::with_capacity(num_chas as usize);
        for k in 0..num_chas {
            let q = (k & 0b11) as usize;
            let slot = (k >> 2) as usize;
            let tile = by_quadrant[q].get(slot).ok_or_else(|| {
                Error::InvalidMesh(format!(
                    "quadrant {q:02b} has {} tiles, cannot host CHA {k}",
                    by_quadrant[q].len()
                ))
            })?;
            cha_tiles.push(*tile);
        }
        config.cha_tiles = cha_tiles;
        Ok(config)
    }

    /// The default 6x7 grid: 42 tiles, 38 CHAs. Corner tiles see a 32-cycle
    /// worst-case round trip, central tiles 18 cycles.
    pub fn default_knl() -> Self {
        MeshConfig::synthetic(6, 7, 38).expect("default mesh")
    }

    pub fn with_hop_weights(mut self, horizontal: u32, vertical: u32) -> Self {
        self.hop_horizontal = horizontal;
        self.hop_vertical = vertical;
        self
    }

    pub fn with_lambdas(mut self, l2: u32, mcdram: u32) -> Self {
        self.lambda_l2 = l2;
        self.lambda_mcdram = mcdram;
        self
    }

    /// Checks grid bounds, active-tile ordering, and that the CHA placement
    /// is injective into the active tiles.
    pub fn validate(&self) -> Result<()> {
        if self.cols == 0 || self.rows == 0 {
            return Err(Error::InvalidMesh("grid must be at least 1x1".into()));
        }
        if self.active_tiles.is_empty() {
            return Err(Error::NoActiveTiles);
        }
        for &t in self
            .active_tiles
            .iter()
            .chain(&self.mc_tiles)
            .chain(&self.cha_tiles)
        {
            if !self.contains(t) {
                return Err(Error::InvalidMesh(format!("tile {t} outside the grid")));
            }
        }
        for w in self.active_tiles.windows(2) {
            if (w[0].row, w[0].col) >= (w[1].row, w[1].col) {
                return Err(Error::InvalidMesh(
                    "active tiles must be sorted by (row, col)".into(),
                ));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for (id, &t) in self.cha_tiles.iter().enumerate() {
            if !self.is_active(t) {
                return Err(Error::InvalidMesh(format!(
                    "CHA {id} placed on inactive tile {t}"
                )));
            }
            if !seen.insert(t) {
                return Err(Error::InvalidMesh(format!(
                    "tile {t} hosts more than one CHA"
                )));
            }
        }
        Ok(())
    }

    pub fn num_chas(&self) -> u32 {
        self.cha_tiles.len() as u32
    }

    pub fn contains(&self, t: TileCoord) -> bool {
        t.col < self.cols && t.row < self.rows
    }

    pub fn is_active(&self, t: TileCoord) -> bool {
        self.active_tiles
            .binary_search_by_key(&(t.row, t.col), |a| (a.row, a.col))
            .is_ok()
    }

    /// Mesh quadrant of a tile: `c0` = right half, `c1` = bottom half.
    pub fn tile_quadrant(&self, t: TileCoord) -> Quadrant {
        Quadrant::from_bits(2 * t.row >= self.rows, 2 * t.col >= self.cols)
    }

    pub fn memory_controller_tile(&self, q: Quadrant) -> TileCoord {
        self.mc_tiles[q.index()]
    }

    /// Tile hosting the directory (CHA) owning a line's coherence state.
    pub fn directory_tile(&self, cha: crate::addr::ChaId) -> Result<TileCoord> {
        self.cha_tiles
            .get(cha.0 as usize)
            .copied()
            .ok_or(Error::UnplacedCha(cha.0))
    }

    /// One-way weighted hop distance between two tiles.
    pub fn weighted_distance(&self, a: TileCoord, b: TileCoord) -> u64 {
        let dx = a.col.abs_diff(b.col) as u64;
        let dy = a.row.abs_diff(b.row) as u64;
        self.hop_horizontal as u64 * dx + self.hop_vertical as u64 * dy
    }

    /// Extra cycles a requestor pays for lying outside the rectangle with
    /// corners `t_d` and `t_b`: zero inside, twice the weighted distance to
    /// the rectangle outside.
    pub fn access_overhead(&self, t: TileCoord, t_d: TileCoord, t_b: TileCoord) -> u64 {
        let (c_lo, c_hi) = (t_d.col.min(t_b.col), t_d.col.max(t_b.col));
        let (r_lo, r_hi) = (t_d.row.min(t_b.row), t_d.row.max(t_b.row));
        let dx = if t.col < c_lo {
            (c_lo - t.col) as u64
        } else if t.col > c_hi {
            (t.col - c_hi) as u64
        } else {
            0
        };
        let dy = if t.row < r_lo {
            (r_lo - t.row) as u64
        } else if t.row > r_hi {
            (t.row - r_hi) as u64
        } else {
            0
        };
        if dx == 0 && dy == 0 {
            0
        } else {
            2 * (self.hop_horizontal as u64 * dx + self.hop_vertical as u64 * dy)
        }
    }

    /// Cycles of the query-plus-response path inside the rectangle, charged
    /// by the simulator on every access: twice the directory-to-data
    /// distance.
    pub fn intra_rectangle_path(&self, t_d: TileCoord, t_b: TileCoord) -> u64 {
        2 * self.weighted_distance(t_d, t_b)
    }

    /// Worst-case round trip from an active tile to any active tile.
    pub fn worst_case_trip(&self, t: TileCoord) -> Result<u64> {
        if !self.is_active(t) {
            return Err(Error::InactiveTile(t));
        }
        let max = self
            .active_tiles
            .iter()
            .map(|&other| self.weighted_distance(t, other))
            .max()
            .ok_or(Error::NoActiveTiles)?;
        Ok(2 * max)
    }
}

/// Coherence view of one cache line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockState {
    pub line: PhysAddr,
    /// Tile hosting the CHA that owns the line.
    pub directory_tile: TileCoord,
    /// Tile whose private cache holds the line, if any.
    pub forwarder: Option<TileCoord>,
}

/// Mutable forwarder table over a fixed mapping and mesh. Reads are cheap
/// and lock-free; one table belongs to one scheduling or simulation run.
#[derive(Debug, Clone)]
pub struct BlockStates<'a> {
    map: &'a XorMaskSet,
    mesh: &'a MeshConfig,
    forwarders: HashMap<u64, TileCoord>,
}

impl<'a> BlockStates<'a> {
    pub fn new(map: &'a XorMaskSet, mesh: &'a MeshConfig) -> Self {
        BlockStates {
            map,
            mesh,
            forwarders: HashMap::new(),
        }
    }

    pub fn mesh(&self) -> &MeshConfig {
        self.mesh
    }

    /// Current state of a line; errors when its raw index has no CHA.
    pub fn state(&self, line: PhysAddr) -> Result<BlockState> {
        let line = line.line();
        let directory_tile = match self.map.cha_of(line) {
            ChaMapping::Cha(id) => self.mesh.directory_tile(id)?,
            ChaMapping::Unmapped { raw_index } => {
                return Err(Error::UnmappedAddress {
                    addr: line,
                    index: raw_index,
                    num_chas: self.map.num_chas(),
                })
            }
        };
        Ok(BlockState {
            line,
            directory_tile,
            forwarder: self.forwarders.get(&line.value()).copied(),
        })
    }

    /// Marks `tile` as the forwarder of `line` after an access.
    pub fn record_access(&mut self, line: PhysAddr, tile: TileCoord) {
        self.forwarders.insert(line.line().value(), tile);
    }
}

fn data_source(mesh: &MeshConfig, bs: &BlockState) -> (TileCoord, u64, bool) {
    match bs.forwarder {
        Some(f) => (f, mesh.lambda_l2 as u64, false),
        None => (
            mesh.memory_controller_tile(mesh.tile_quadrant(bs.directory_tile)),
            mesh.lambda_mcdram as u64,
            true,
        ),
    }
}

/// Scheduling cost of accessing one block from `t`: the source latency plus
/// the outside-rectangle overhead.
pub fn block_access_cost(t: TileCoord, bs: &BlockState, mesh: &MeshConfig) -> u64 {
    let (t_b, lambda, _) = data_source(mesh, bs);
    lambda + mesh.access_overhead(t, bs.directory_tile, t_b)
}

/// Scheduling cost of a statement on a tile: the sum of block access costs
/// over the distinct lines its y, A, and x operands touch.
pub fn statement_cost(
    s: &Statement,
    t: TileCoord,
    states: &BlockStates<'_>,
    ops: &SpmvOperands<'_>,
) -> Result<u64> {
    let lines = ops.statement_lines(s, 0)?;
    statement_cost_lines(&lines, t, states)
}

pub(crate) fn statement_cost_lines(
    lines: &[(PhysAddr, OperandRole)],
    t: TileCoord,
    states: &BlockStates<'_>,
) -> Result<u64> {
    let mut total = 0u64;
    for &(line, _) in lines {
        total += block_access_cost(t, &states.state(line)?, states.mesh());
    }
    Ok(total)
}

/// Traffic a single tile generated during a simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileTraffic {
    pub tile: TileCoord,
    pub statements: u64,
    pub accesses: u64,
    pub cycles: u64,
    pub memory_accesses: u64,
    pub far_accesses: u64,
}

/// Traffic attributed to one logical structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureTraffic {
    pub name: String,
    pub accesses: u64,
    pub memory_accesses: u64,
    /// Accesses whose directory tile sat in a different quadrant than the
    /// requestor.
    pub far_accesses: u64,
}

impl StructureTraffic {
    pub fn far_fraction(&self) -> f64 {
        if self.accesses == 0 {
            0.0
        } else {
            self.far_accesses as f64 / self.accesses as f64
        }
    }
}

/// Deterministic replay of a schedule under the cost model.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub per_tile: Vec<TileTraffic>,
    pub per_structure: Vec<StructureTraffic>,
    pub total_accesses: u64,
    pub total_cycles: u64,
    pub memory_accesses: u64,
    pub far_accesses: u64,
}

impl CostReport {
    pub fn mean_latency(&self) -> f64 {
        if self.total_accesses == 0 {
            0.0
        } else {
            self.total_cycles as f64 / self.total_accesses as f64
        }
    }
}

/// Replays a schedule tile by tile, in schedule order, charging each line
/// access its block cost plus the intra-rectangle path, and promoting the
/// requestor to forwarder afterwards. Caches are unbounded: nothing is ever
/// evicted.
pub fn simulate_schedule(
    schedule: &Schedule,
    layout: &BlockLayout,
    map: &XorMaskSet,
    mesh: &MeshConfig,
) -> Result<CostReport> {
    let ops = layout.spmv()?;
    let mut states = BlockStates::new(map, mesh);
    let mut per_tile = Vec::with_capacity(schedule.per_tile().len());
    let structure_name = |role: OperandRole| ops.structure(role).name.clone();
    let mut per_structure = [
        (OperandRole::Y, 0u64, 0u64, 0u64),
        (OperandRole::Matrix, 0, 0, 0),
        (OperandRole::X, 0, 0, 0),
    ];

    for (tile, statements) in schedule.per_tile() {
        let tile = *tile;
        if !mesh.is_active(tile) {
            return Err(Error::InactiveTile(tile));
        }
        let tile_quadrant = mesh.tile_quadrant(tile);
        let mut traffic = TileTraffic {
            tile,
            statements: statements.len() as u64,
            accesses: 0,
            cycles: 0,
            memory_accesses: 0,
            far_accesses: 0,
        };
        for (si, s) in statements.iter().enumerate() {
            for (line, role) in ops.statement_lines(s, si)? {
                let bs = states.state(line)?;
                let (t_b, lambda, from_memory) = data_source(mesh, &bs);
                let cost = lambda
                    + mesh.access_overhead(tile, bs.directory_tile, t_b)
                    + mesh.intra_rectangle_path(bs.directory_tile, t_b);
                let far = mesh.tile_quadrant(bs.directory_tile) != tile_quadrant;
                traffic.accesses += 1;
                traffic.cycles += cost;
                traffic.memory_accesses += from_memory as u64;
                traffic.far_accesses += far as u64;
                let slot = per_structure
                    .iter_mut()
                    .find(|(r, ..)| *r == role)
                    .expect("role slot");
                slot.1 += 1;
                slot.2 += from_memory as u64;
                slot.3 += far as u64;
                states.record_access(line, tile);
            }
        }
        per_tile.push(traffic);
    }

    let total = |f: fn(&TileTraffic) -> u64| per_tile.iter().map(f).sum::<u64>();
    Ok(CostReport {
        total_accesses: total(|t| t.accesses),
        total_cycles: total(|t| t.cycles),
        memory_accesses: total(|t| t.memory_accesses),
        far_accesses: total(|t| t.far_accesses),
        per_tile,
        per_structure: per_structure
            .into_iter()
            .map(
                |(role, accesses, memory_accesses, far_accesses)| StructureTraffic {
                    name: structure_name(role),
                    accesses,
                    memory_accesses,
                    far_accesses,
                },
            )
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{layout_blocks, StructureSpec};
    use crate::sched::Schedule;

    #[test]
    fn weighted_distance_examples() {
        let mesh = MeshConfig::default_knl();
        let a = TileCoord::new(0, 0);
        assert_eq!(mesh.weighted_distance(a, a), 0);
        assert_eq!(mesh.weighted_distance(a, TileCoord::new(5, 6)), 16);
        assert_eq!(mesh.weighted_distance(a, TileCoord::new(1, 2)), 4);
    }

    #[test]
    fn overhead_zero_inside_rectangle() {
        let mesh = MeshConfig::default_knl();
        let t_d = TileCoord::new(1, 1);
        let t_b = TileCoord::new(4, 5);
        for col in 1..=4 {
            for row in 1..=5 {
                assert_eq!(mesh.access_overhead(TileCoord::new(col, row), t_d, t_b), 0);
            }
        }
    }

    #[test]
    fn overhead_one_column_outside() {
        let mesh = MeshConfig::default_knl();
        let t_d = TileCoord::new(1, 1);
        let t_b = TileCoord::new(4, 5);
        assert_eq!(mesh.access_overhead(TileCoord::new(5, 3), t_d, t_b), 4);
    }

    #[test]
    fn overhead_degenerate_rectangle_opposite_corner() {
        let mesh = MeshConfig::default_knl();
        let far = TileCoord::new(5, 6);
        assert_eq!(
            mesh.access_overhead(TileCoord::new(0, 0), far, far),
            2 * (2 * 5 + 6)
        );
    }

    #[test]
    fn block_cost_examples() {
        let mesh = MeshConfig::default_knl();
        let bs_l2 = BlockState {
            line: PhysAddr(0),
            directory_tile: TileCoord::new(1, 1),
            forwarder: Some(TileCoord::new(4, 5)),
        };
        // Requestor inside the rectangle: just the L2 latency.
        assert_eq!(block_access_cost(TileCoord::new(2, 3), &bs_l2, &mesh), 12);
        // Outside with Dx=2, Dy=1 to the rectangle corner (4..=4, 5..=5).
        let bs_corner = BlockState {
            directory_tile: TileCoord::new(4, 5),
            ..bs_l2
        };
        assert_eq!(
            block_access_cost(TileCoord::new(2, 4), &bs_corner, &mesh),
            12 + 2 * (2 * 2 + 1)
        );
    }

    #[test]
    fn cold_block_costs_memory_lambda() {
        let mesh = MeshConfig::default_knl();
        // Directory on the MC tile itself: requestor == rectangle.
        let bs = BlockState {
            line: PhysAddr(0),
            directory_tile: TileCoord::new(0, 0),
            forwarder: None,
        };
        assert_eq!(block_access_cost(TileCoord::new(0, 0), &bs, &mesh), 115);
    }

    #[test]
    fn worst_case_trips_on_the_default_grid() {
        let mesh = MeshConfig::default_knl();
        assert_eq!(mesh.worst_case_trip(TileCoord::new(0, 0)).unwrap(), 32);
        let min = mesh
            .active_tiles
            .iter()
            .map(|&t| mesh.worst_case_trip(t).unwrap())
            .min()
            .unwrap();
        assert_eq!(min, 18);

        let single = MeshConfig::synthetic(1, 1, 1).unwrap();
        assert_eq!(single.worst_case_trip(TileCoord::new(0, 0)).unwrap(), 0);
    }

    #[test]
    fn intra_rectangle_path_matches_the_depicted_geometry() {
        let mesh = MeshConfig::default_knl();
        assert_eq!(
            mesh.intra_rectangle_path(TileCoord::new(1, 1), TileCoord::new(3, 4)),
            14
        );
    }

    #[test]
    fn empty_schedule_reports_zeros() {
        let mesh = MeshConfig::default_knl();
        let map = XorMaskSet::zeroed(2);
        let layout = layout_blocks(
            &[
                StructureSpec::new("y", 64, 8),
                StructureSpec::new("A", 64, 8),
                StructureSpec::new("x", 64, 8),
            ],
            &[0],
        )
        .unwrap();
        let report =
            simulate_schedule(&Schedule::new("sequential", vec![]), &layout, &map, &mesh).unwrap();
        assert_eq!(report.total_accesses, 0);
        assert_eq!(report.total_cycles, 0);
        assert_eq!(report.mean_latency(), 0.0);
    }

    #[test]
    fn statement_cost_sums_per_operand_lambdas() {
        // 1x1 mesh: the requestor sits inside every rectangle, so the cost
        // is the sum of the three operand latencies.
        let mesh = MeshConfig::synthetic(1, 1, 1).unwrap();
        let map = XorMaskSet::zeroed(2);
        let layout = layout_blocks(
            &[
                StructureSpec::new("y", 64, 8),
                StructureSpec::new("A", 64, 8),
                StructureSpec::new("x", 64, 8),
            ],
            &[0],
        )
        .unwrap();
        let ops = layout.spmv().unwrap();
        let s = Statement {
            row: 0,
            a_start: 0,
            x_start: 0,
            width: 1,
        };
        let t = TileCoord::new(0, 0);
        let mut states = BlockStates::new(&map, &mesh);
        for st in [ops.y, ops.matrix, ops.x] {
            states.record_access(st.base, t);
        }
        assert_eq!(statement_cost(&s, t, &states, &ops).unwrap(), 36);

        // y forwarded from an L2, A and x still in memory.
        let mut states = BlockStates::new(&map, &mesh);
        states.record_access(ops.y.base, t);
        assert_eq!(
            statement_cost(&s, t, &states, &ops).unwrap(),
            12 + 115 + 115
        );
    }

    #[test]
    fn cold_single_statement_costs_three_memory_reads() {
        // 1x1 mesh: directory, memory controller, and requestor coincide, so
        // every term except the memory latency vanishes.
        let mesh = MeshConfig::synthetic(1, 1, 1).unwrap();
        let map = XorMaskSet::zeroed(2);
        let layout = layout_blocks(
            &[
                StructureSpec::new("y", 64, 8),
                StructureSpec::new("A", 64, 8),
                StructureSpec::new("x", 64, 8),
            ],
            &[0],
        )
        .unwrap();
        let s = Statement {
            row: 0,
            a_start: 0,
            x_start: 0,
            width: 1,
        };
        let schedule = Schedule::new("greedy", vec![(TileCoord::new(0, 0), vec![s])]);
        let report = simulate_schedule(&schedule, &layout, &map, &mesh).unwrap();
        assert_eq!(report.total_accesses, 3);
        assert_eq!(report.memory_accesses, 3);
        assert_eq!(report.total_cycles, 3 * 115);
        assert_eq!(report.mean_latency(), 115.0);
    }

    #[test]
    fn forwarder_promotion_turns_memory_into_l2() {
        let mesh = MeshConfig::synthetic(1, 1, 1).unwrap();
        let map = XorMaskSet::zeroed(2);
        let layout = layout_blocks(
            &[
                StructureSpec::new("y", 64, 8),
                StructureSpec::new("A", 64, 8),
                StructureSpec::new("x", 64, 8),
            ],
            &[0],
        )
        .unwrap();
        let s = Statement {
            row: 0,
            a_start: 0,
            x_start: 0,
            width: 1,
        };
        let schedule = Schedule::new("greedy", vec![(TileCoord::new(0, 0), vec![s, s])]);
        let report = simulate_schedule(&schedule, &layout, &map, &mesh).unwrap();
        assert_eq!(report.total_accesses, 6);
        assert_eq!(report.memory_accesses, 3);
        assert_eq!(report.total_cycles, 3 * 115 + 3 * 12);
    }

    #[test]
    fn simulation_is_deterministic() {
        // A 32-CHA total map keeps every line mapped.
        let map = XorMaskSet::random_quadrant_valid(5, 5, 32).unwrap();
        let mesh32 = MeshConfig::synthetic(6, 7, 32).unwrap();
        let layout = layout_blocks(
            &[
                StructureSpec::new("y", 4096, 8),
                StructureSpec::new("A", 65536, 8),
                StructureSpec::new("x", 4096, 8),
            ],
            &[0],
        )
        .unwrap();
        let stmts: Vec<Statement> = (0..64)
            .map(|i| Statement {
                row: i,
                a_start: (i as u64) * 8,
                x_start: i % 32,
                width: 8,
            })
            .collect();
        let schedule = Schedule::new(
            "sequential",
            vec![
                (TileCoord::new(0, 0), stmts[..32].to_vec()),
                (TileCoord::new(5, 6), stmts[32..].to_vec()),
            ],
        );
        let a = simulate_schedule(&schedule, &layout, &map, &mesh32).unwrap();
        let b = simulate_schedule(&schedule, &layout, &map, &mesh32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unmapped_line_is_surfaced_not_wrapped() {
        let mesh = MeshConfig::default_knl();
        let map = XorMaskSet::synthetic_default(); // 38 of 64 indices mapped
        let states = BlockStates::new(&map, &mesh);
        let unmapped_line = (0..256u64)
            .map(|i| PhysAddr(i * 64))
            .find(|&a| map.cha_of(a).ok().is_none())
            .unwrap();
        assert!(matches!(
            states.state(unmapped_line),
            Err(Error::UnmappedAddress { .. })
        ));
    }

    #[test]
    fn lambda_shift_preserves_block_cost_argmin() {
        let mesh = MeshConfig::default_knl();
        let shifted = mesh.clone().with_lambdas(12 + 50, 115 + 50);
        let bs = BlockState {
            line: PhysAddr(0),
            directory_tile: TileCoord::new(2, 3),
            forwarder: Some(TileCoord::new(4, 1)),
        };
        let argmin = |m: &MeshConfig| {
            m.active_tiles
                .iter()
                .min_by_key(|&&t| (block_access_cost(t, &bs, m), t.row, t.col))
                .copied()
                .unwrap()
        };
        assert_eq!(argmin(&mesh), argmin(&shifted));
    }
}
