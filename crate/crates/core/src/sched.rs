//! Statement mining and the three schedulers: sequential row blocks, the
//! sub-NUMA quadrant walk, and coherence-aware greedy assignment.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::addr::{PhysAddr, Quadrant, XorMaskSet, GROUP_BYTES, LINE_BYTES};
use crate::error::{Error, Result};
use crate::layout::{SpmvOperands, StructureLayout};
use crate::matrix::SparseMatrix;
use crate::mesh::{statement_cost_lines, BlockStates, MeshConfig, TileCoord};

/// Default statement width: one 512-bit vector of 64-bit lanes.
pub const DEFAULT_MAX_WIDTH: u32 = 8;

/// A regular SpMV sub-operation over one contiguous run:
/// `y[row] += A[a_start .. a_start+width) * x[x_start .. x_start+width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Statement {
    pub row: u32,
    /// Index into the matrix value stream.
    pub a_start: u64,
    /// Column index of the first lane.
    pub x_start: u32,
    /// Lanes; always at least 1.
    pub width: u32,
}

impl Statement {
    /// One multiply and one add per lane.
    pub fn flops(&self) -> u64 {
        2 * self.width as u64
    }
}

/// An assignment of statements to tiles: per tile, the ordered statements it
/// executes. Every statement of the input appears on exactly one tile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    label: String,
    per_tile: Vec<(TileCoord, Vec<Statement>)>,
}

impl Schedule {
    pub fn new(label: impl Into<String>, per_tile: Vec<(TileCoord, Vec<Statement>)>) -> Self {
        Schedule {
            label: label.into(),
            per_tile,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn per_tile(&self) -> &[(TileCoord, Vec<Statement>)] {
        &self.per_tile
    }

    /// FLOPs assigned to each tile, in schedule order.
    pub fn loads(&self) -> Vec<(TileCoord, u64)> {
        self.per_tile
            .iter()
            .map(|(t, stmts)| (*t, stmts.iter().map(Statement::flops).sum()))
            .collect()
    }

    pub fn statement_count(&self) -> usize {
        self.per_tile.iter().map(|(_, s)| s.len()).sum()
    }

    pub fn statements(&self) -> impl Iterator<Item = (&TileCoord, &Statement)> {
        self.per_tile
            .iter()
            .flat_map(|(t, stmts)| stmts.iter().map(move |s| (t, s)))
    }
}

/// Mines maximal runs of consecutive-column nonzeros from each row and
/// splits them into statements of at most `max_width` lanes, in row-major
/// order. Every nonzero is covered exactly once.
pub fn mine_regular_statements(matrix: &SparseMatrix, max_width: u32) -> Result<Vec<Statement>> {
    if max_width == 0 {
        return Err(Error::InvalidInput("max_width must be at least 1".into()));
    }
    let mut statements = Vec::new();
    let mut flush = |row: u32, a_start: u64, x_start: u32, mut width: u32| {
        let mut a = a_start;
        let mut x = x_start;
        while width > 0 {
            let w = width.min(max_width);
            statements.push(Statement {
                row,
                a_start: a,
                x_start: x,
                width: w,
            });
            a += w as u64;
            x += w;
            width -= w;
        }
    };
    let mut run: Option<(u32, u64, u32, u32)> = None; // (row, a_start, x_start, width)
    for (i, &(r, c, _)) in matrix.triples().iter().enumerate() {
        match run {
            Some((row, a_start, x_start, width)) if row == r && x_start + width == c => {
                run = Some((row, a_start, x_start, width + 1));
            }
            Some((row, a_start, x_start, width)) => {
                flush(row, a_start, x_start, width);
                run = Some((r, i as u64, c, 1));
            }
            None => run = Some((r, i as u64, c, 1)),
        }
    }
    if let Some((row, a_start, x_start, width)) = run {
        flush(row, a_start, x_start, width);
    }
    Ok(statements)
}

/// Line-grained statements for a dense row-major matrix: one statement per
/// (cache line, row) intersection, so a scheduler can assign whole lines.
pub fn dense_line_statements(
    mat: &StructureLayout,
    n_rows: u32,
    n_cols: u32,
) -> Result<Vec<Statement>> {
    Ok(dense_statements_by_line(mat, n_rows, n_cols)?
        .into_iter()
        .flatten()
        .collect())
}

fn dense_statements_by_line(
    mat: &StructureLayout,
    n_rows: u32,
    n_cols: u32,
) -> Result<Vec<Vec<Statement>>> {
    let eb = mat.elem_bytes as u64;
    if !mat.base.is_aligned(LINE_BYTES) {
        return Err(Error::Misaligned {
            what: "matrix base",
            value: mat.base.value(),
            align: LINE_BYTES,
        });
    }
    let total_elems = n_rows as u64 * n_cols as u64;
    let total_bytes = total_elems
        .checked_mul(eb)
        .ok_or_else(|| Error::InvalidInput(format!("{n_rows}x{n_cols} matrix size overflows")))?;
    if total_bytes > mat.size_bytes {
        return Err(Error::InvalidInput(format!(
            "{n_rows}x{n_cols} matrix needs {total_bytes} bytes, structure {} holds {}",
            mat.name, mat.size_bytes
        )));
    }
    let per_line = LINE_BYTES / eb;
    let n_lines = total_bytes.div_ceil(LINE_BYTES);
    let mut by_line = Vec::with_capacity(n_lines as usize);
    for l in 0..n_lines {
        let first = l * per_line;
        let last = (first + per_line).min(total_elems);
        let mut stmts = Vec::with_capacity(1);
        let mut e = first;
        while e < last {
            let row = (e / n_cols as u64) as u32;
            let row_end = (row as u64 + 1) * n_cols as u64;
            let w = (last.min(row_end) - e) as u32;
            stmts.push(Statement {
                row,
                a_start: e,
                x_start: (e % n_cols as u64) as u32,
                width: w,
            });
            e += w as u64;
        }
        by_line.push(stmts);
    }
    Ok(by_line)
}

/// Assigns contiguous row blocks of `ceil(n_rows / tiles)` rows to tiles in
/// order; statements stay in row-major order within each tile.
pub fn sequential_block_schedule(
    statements: &[Statement],
    n_rows: u32,
    tiles: &[TileCoord],
) -> Result<Schedule> {
    if tiles.is_empty() {
        return Err(Error::NoActiveTiles);
    }
    if n_rows == 0 {
        return Err(Error::InvalidInput("matrix has no rows".into()));
    }
    let block = n_rows.div_ceil(tiles.len() as u32);
    let mut per_tile: Vec<(TileCoord, Vec<Statement>)> =
        tiles.iter().map(|&t| (t, Vec::new())).collect();
    for s in statements {
        if s.row >= n_rows {
            return Err(Error::InvalidInput(format!(
                "statement row {} out of range 0..{n_rows}",
                s.row
            )));
        }
        per_tile[(s.row / block) as usize].1.push(*s);
    }
    Ok(Schedule::new("sequential", per_tile))
}

/// Assigns each tile exactly the matrix cache lines whose quadrant matches
/// the tile's, dividing each quadrant's lines evenly among its tiles in
/// address order.
pub fn subnuma_schedule(
    mat: &StructureLayout,
    n_rows: u32,
    n_cols: u32,
    map: &XorMaskSet,
    mesh: &MeshConfig,
) -> Result<Schedule> {
    if !map.is_quadrant_valid() {
        return Err(Error::NotQuadrantValid);
    }
    let by_line = dense_statements_by_line(mat, n_rows, n_cols)?;
    let base = mat.base.value();
    let end = base + n_rows as u64 * n_cols as u64 * mat.elem_bytes as u64;
    let n_lines = by_line.len() as u64;

    let mut tiles_by_q: [Vec<TileCoord>; 4] = Default::default();
    for &t in &mesh.active_tiles {
        tiles_by_q[mesh.tile_quadrant(t).index()].push(t);
    }
    for q in Quadrant::ALL {
        if tiles_by_q[q.index()].is_empty() {
            return Err(Error::EmptyQuadrant(q));
        }
    }

    // Group-aligned middle goes through the fast walk; the ragged head and
    // tail lines (at most three each) are classified directly.
    let mid_start = base.next_multiple_of(GROUP_BYTES).min(end);
    let mid_end = (end / GROUP_BYTES * GROUP_BYTES).max(mid_start);
    let mut lines_by_q: [Vec<PhysAddr>; 4] = Default::default();
    let mut line = base;
    while line < mid_start {
        lines_by_q[map.quadrant_of(PhysAddr(line)).index()].push(PhysAddr(line));
        line += LINE_BYTES;
    }
    if mid_start < mid_end {
        for q in Quadrant::ALL {
            let walk = map.quadrant_walk(PhysAddr(mid_start), mid_end - mid_start, q)?;
            lines_by_q[q.index()].extend(walk.lines);
        }
    }
    let mut line = mid_end.max(mid_start);
    while line < end {
        lines_by_q[map.quadrant_of(PhysAddr(line)).index()].push(PhysAddr(line));
        line += LINE_BYTES;
    }
    debug_assert_eq!(
        lines_by_q.iter().map(Vec::len).sum::<usize>() as u64,
        n_lines
    );

    let mut per_tile: Vec<(TileCoord, Vec<Statement>)> = Vec::new();
    for q in Quadrant::ALL {
        let tiles = &tiles_by_q[q.index()];
        let lines = &lines_by_q[q.index()];
        let k = tiles.len();
        let chunk = lines.len() / k;
        let extra = lines.len() % k;
        let mut cursor = 0usize;
        for (i, &tile) in tiles.iter().enumerate() {
            let take = chunk + (i < extra) as usize;
            let mut stmts = Vec::with_capacity(take);
            for &l in &lines[cursor..cursor + take] {
                let idx = ((l.value() - base) / LINE_BYTES) as usize;
                stmts.extend_from_slice(&by_line[idx]);
            }
            cursor += take;
            per_tile.push((tile, stmts));
        }
    }
    Ok(Schedule::new("subnuma", per_tile))
}

/// Active tiles ordered worst-case round trip first; ties break toward the
/// lower (row, col).
pub fn tile_visit_order(mesh: &MeshConfig) -> Result<Vec<TileCoord>> {
    if mesh.active_tiles.is_empty() {
        return Err(Error::NoActiveTiles);
    }
    let mut order = mesh.active_tiles.clone();
    let mut keyed: Vec<(u64, TileCoord)> = order
        .drain(..)
        .map(|t| Ok((mesh.worst_case_trip(t)?, t)))
        .collect::<Result<_>>()?;
    keyed.sort_by_key(|&(trip, t)| (std::cmp::Reverse(trip), t.row, t.col));
    Ok(keyed.into_iter().map(|(_, t)| t).collect())
}

/// Greedy coherence-aware assignment: visits tiles worst-trip first and
/// hands each the cheapest remaining statement until the tile carries its
/// balanced share `L_b = total FLOPs / tiles`. Block states update after
/// every assignment, so later costs see the new forwarder placement.
pub fn greedy_schedule(
    statements: &[Statement],
    ops: &SpmvOperands<'_>,
    map: &XorMaskSet,
    mesh: &MeshConfig,
) -> Result<Schedule> {
    greedy_impl(statements, ops, map, mesh, true)
}

/// Sequential reference for [`greedy_schedule`]: candidate costs are
/// evaluated on one thread.
pub fn greedy_schedule_seq(
    statements: &[Statement],
    ops: &SpmvOperands<'_>,
    map: &XorMaskSet,
    mesh: &MeshConfig,
) -> Result<Schedule> {
    greedy_impl(statements, ops, map, mesh, false)
}

fn greedy_impl(
    statements: &[Statement],
    ops: &SpmvOperands<'_>,
    map: &XorMaskSet,
    mesh: &MeshConfig,
    parallel: bool,
) -> Result<Schedule> {
    if statements.is_empty() {
        return Err(Error::NoStatements);
    }
    let visit = tile_visit_order(mesh)?;
    let resolved: Vec<_> = statements
        .iter()
        .enumerate()
        .map(|(i, s)| ops.statement_lines(s, i))
        .collect::<Result<_>>()?;
    let mut states = BlockStates::new(map, mesh);
    for lines in &resolved {
        for &(line, _) in lines {
            states.state(line)?;
        }
    }

    let total_flops: u64 = statements.iter().map(Statement::flops).sum();
    let n_tiles = visit.len() as u64;
    let mut remaining: Vec<usize> = (0..statements.len()).collect();
    let mut per_tile: Vec<(TileCoord, Vec<Statement>)> =
        visit.iter().map(|&t| (t, Vec::new())).collect();

    for (ti, &tile) in visit.iter().enumerate() {
        let mut load = 0u64;
        // load < L_b without rounding: load * |tiles| < total FLOPs.
        while load * n_tiles < total_flops && !remaining.is_empty() {
            let (_, sidx) = best_pick(&remaining, &resolved, tile, &states, parallel)?;
            let pos = remaining.iter().position(|&i| i == sidx).expect("picked");
            remaining.remove(pos);
            for &(line, _) in &resolved[sidx] {
                states.record_access(line, tile);
            }
            load += statements[sidx].flops();
            per_tile[ti].1.push(statements[sidx]);
        }
        if ti + 1 == visit.len() {
            // Anything left after the last tile reached its share lands here.
            for sidx in remaining.drain(..) {
                for &(line, _) in &resolved[sidx] {
                    states.record_access(line, tile);
                }
                per_tile[ti].1.push(statements[sidx]);
            }
        }
    }
    Ok(Schedule::new("greedy", per_tile))
}

type ResolvedLines = Vec<(PhysAddr, crate::layout::OperandRole)>;

/// Candidate sets below this size are scanned on one thread; the per-candidate
/// cost is a few table lookups and does not amortize a fork-join.
const PARALLEL_PICK_CUTOFF: usize = 512;

fn best_pick(
    remaining: &[usize],
    resolved: &[ResolvedLines],
    tile: TileCoord,
    states: &BlockStates<'_>,
    parallel: bool,
) -> Result<(u64, usize)> {
    let cost_of = |&sidx: &usize| -> Result<(u64, usize)> {
        Ok((statement_cost_lines(&resolved[sidx], tile, states)?, sidx))
    };
    if parallel && remaining.len() >= PARALLEL_PICK_CUTOFF {
        #[cfg(feature = "parallel")]
        {
            let costs: Vec<(u64, usize)> = remaining
                .par_iter()
                .with_min_len(PARALLEL_PICK_CUTOFF / 2)
                .map(cost_of)
                .collect::<Result<Vec<_>>>()?;
            return Ok(costs.into_iter().min().expect("nonempty remaining"));
        }
    }
    let costs: Vec<(u64, usize)> = remaining.iter().map(cost_of).collect::<Result<Vec<_>>>()?;
    Ok(costs.into_iter().min().expect("nonempty remaining"))
}
