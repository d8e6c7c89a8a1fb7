//! Structured-text formats: mask-set and mesh configuration files, sample
//! CSV, schedule and layout files, and the cost-report CSV.
//!
//! All formats are line-based: `#` starts a comment, blank lines are
//! skipped, and addresses are hexadecimal with a `0x` prefix.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::addr::{ChaId, PhysAddr, Quadrant, XorMaskSet, MAP_BIT_HI, MAP_BIT_LO};
use crate::error::{Error, Result};
use crate::layout::{BlockLayout, StructureLayout};
use crate::learn::Sample;
use crate::mesh::{CostReport, MeshConfig, TileCoord};
use crate::sched::{Schedule, Statement};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            None
        } else {
            Some((i + 1, l))
        }
    })
}

fn parse_tile(tok: &str, lineno: usize) -> Result<TileCoord> {
    let (c, r) = tok
        .split_once(',')
        .ok_or_else(|| Error::parse(lineno, format!("expected `col,row`, got `{tok}`")))?;
    let col = c
        .parse()
        .map_err(|_| Error::parse(lineno, format!("invalid column `{c}`")))?;
    let row = r
        .parse()
        .map_err(|_| Error::parse(lineno, format!("invalid row `{r}`")))?;
    Ok(TileCoord { col, row })
}

fn parse_addr(tok: &str, lineno: usize) -> Result<PhysAddr> {
    tok.parse::<PhysAddr>().map_err(|e| Error::parse(lineno, e))
}

// ---------------------------------------------------------------------------
// Mask-set configuration
// ---------------------------------------------------------------------------

pub fn mask_config_to_string(map: &XorMaskSet) -> String {
    let mut out = String::from("# xor mask-set configuration\n");
    let _ = writeln!(out, "num_chas {}", map.num_chas());
    let _ = writeln!(out, "num_cha_bits {}", map.num_cha_bits());
    out.push_str("# bit <index> const <0|1> positions <address bit positions>\n");
    for b in 0..map.num_cha_bits() {
        let positions: Vec<String> = (MAP_BIT_LO..=MAP_BIT_HI)
            .filter(|&p| map.mask(b) >> p & 1 != 0)
            .map(|p| p.to_string())
            .collect();
        let positions = if positions.is_empty() {
            "-".to_string()
        } else {
            positions.join(",")
        };
        let _ = writeln!(
            out,
            "bit {b} const {} positions {positions}",
            map.constant(b) as u8
        );
    }
    out
}

pub fn parse_mask_config(text: &str) -> Result<XorMaskSet> {
    let mut num_chas: Option<u32> = None;
    let mut num_cha_bits: Option<u32> = None;
    let mut bits: Vec<(u32, u64, bool, usize)> = Vec::new();

    for (lineno, line) in content_lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "num_chas" if toks.len() == 2 => {
                num_chas = Some(
                    toks[1]
                        .parse()
                        .map_err(|_| Error::parse(lineno, "invalid num_chas"))?,
                );
            }
            "num_cha_bits" if toks.len() == 2 => {
                num_cha_bits = Some(
                    toks[1]
                        .parse()
                        .map_err(|_| Error::parse(lineno, "invalid num_cha_bits"))?,
                );
            }
            "bit" if toks.len() == 6 && toks[2] == "const" && toks[4] == "positions" => {
                let index: u32 = toks[1]
                    .parse()
                    .map_err(|_| Error::parse(lineno, "invalid bit index"))?;
                let constant = match toks[3] {
                    "0" => false,
                    "1" => true,
                    other => return Err(Error::parse(lineno, format!("invalid const `{other}`"))),
                };
                let mut mask = 0u64;
                if toks[5] != "-" {
                    for p in toks[5].split(',') {
                        let pos: u32 = p.parse().map_err(|_| {
                            Error::parse(lineno, format!("invalid bit position `{p}`"))
                        })?;
                        if !(MAP_BIT_LO..=MAP_BIT_HI).contains(&pos) {
                            return Err(Error::parse(
                                lineno,
                                format!("bit position {pos} outside 6..=33"),
                            ));
                        }
                        mask |= 1 << pos;
                    }
                }
                bits.push((index, mask, constant, lineno));
            }
            _ => {
                return Err(Error::parse(
                    lineno,
                    format!("unrecognized mask-config line `{line}`"),
                ))
            }
        }
    }

    let num_chas = num_chas.ok_or_else(|| Error::parse(0, "missing num_chas"))?;
    let num_cha_bits = num_cha_bits.ok_or_else(|| Error::parse(0, "missing num_cha_bits"))?;
    let mut masks = vec![None; num_cha_bits as usize];
    let mut constants = 0u64;
    for (index, mask, constant, lineno) in bits {
        let slot = masks
            .get_mut(index as usize)
            .ok_or_else(|| Error::parse(lineno, format!("bit index {index} out of range")))?;
        if slot.is_some() {
            return Err(Error::parse(lineno, format!("bit {index} defined twice")));
        }
        *slot = Some(mask);
        constants |= (constant as u64) << index;
    }
    let masks: Vec<u64> = masks
        .into_iter()
        .enumerate()
        .map(|(i, m)| m.ok_or_else(|| Error::parse(0, format!("bit {i} missing"))))
        .collect::<Result<_>>()?;
    XorMaskSet::new(num_chas, masks, constants)
}

pub fn load_mask_config(path: impl AsRef<Path>) -> Result<XorMaskSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_mask_config(&text).map_err(|e| e.in_file(path))
}

// ---------------------------------------------------------------------------
// Mesh configuration
// ---------------------------------------------------------------------------

pub fn mesh_config_to_string(mesh: &MeshConfig) -> String {
    let mut out = String::from("# mesh configuration\n");
    let _ = writeln!(out, "grid {} {}", mesh.cols, mesh.rows);
    let _ = writeln!(
        out,
        "hop_cycles {} {}",
        mesh.hop_horizontal, mesh.hop_vertical
    );
    let _ = writeln!(out, "lambda_l2 {}", mesh.lambda_l2);
    let _ = writeln!(out, "lambda_mcdram {}", mesh.lambda_mcdram);
    for q in Quadrant::ALL {
        let _ = writeln!(out, "mc {} {}", q.index(), mesh.memory_controller_tile(q));
    }
    for chunk in mesh.active_tiles.chunks(8) {
        let tiles: Vec<String> = chunk.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(out, "active {}", tiles.join(" "));
    }
    for (id, tile) in mesh.cha_tiles.iter().enumerate() {
        let _ = writeln!(out, "cha {id} {tile}");
    }
    out
}

pub fn parse_mesh_config(text: &str) -> Result<MeshConfig> {
    let mut grid: Option<(u16, u16)> = None;
    let mut hop = (2u32, 1u32);
    let mut lambda_l2 = 12u32;
    let mut lambda_mcdram = 115u32;
    let mut mc: [Option<TileCoord>; 4] = [None; 4];
    let mut active: Vec<TileCoord> = Vec::new();
    let mut chas: Vec<(u32, TileCoord, usize)> = Vec::new();

    for (lineno, line) in content_lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::parse(lineno, format!("unrecognized mesh-config line `{line}`"));
        match toks[0] {
            "grid" if toks.len() == 3 => {
                let cols = toks[1].parse().map_err(|_| bad())?;
                let rows = toks[2].parse().map_err(|_| bad())?;
                grid = Some((cols, rows));
            }
            "hop_cycles" if toks.len() == 3 => {
                hop = (
                    toks[1].parse().map_err(|_| bad())?,
                    toks[2].parse().map_err(|_| bad())?,
                );
            }
            "lambda_l2" if toks.len() == 2 => lambda_l2 = toks[1].parse().map_err(|_| bad())?,
            "lambda_mcdram" if toks.len() == 2 => {
                lambda_mcdram = toks[1].parse().map_err(|_| bad())?
            }
            "mc" if toks.len() == 3 => {
                let q: usize = toks[1].parse().map_err(|_| bad())?;
                if q >= 4 {
                    return Err(Error::parse(lineno, "mc quadrant out of range 0..=3"));
                }
                mc[q] = Some(parse_tile(toks[2], lineno)?);
            }
            "active" => {
                for t in &toks[1..] {
                    active.push(parse_tile(t, lineno)?);
                }
            }
            "cha" if toks.len() == 3 => {
                let id: u32 = toks[1].parse().map_err(|_| bad())?;
                chas.push((id, parse_tile(toks[2], lineno)?, lineno));
            }
            _ => return Err(bad()),
        }
    }

    let (cols, rows) = grid.ok_or_else(|| Error::parse(0, "missing grid line"))?;
    let mc_tiles = [
        mc[0].ok_or_else(|| Error::parse(0, "missing mc 0"))?,
        mc[1].ok_or_else(|| Error::parse(0, "missing mc 1"))?,
        mc[2].ok_or_else(|| Error::parse(0, "missing mc 2"))?,
        mc[3].ok_or_else(|| Error::parse(0, "missing mc 3"))?,
    ];
    let mut cha_tiles = vec![None; chas.len()];
    for (id, tile, lineno) in chas {
        let slot = cha_tiles.get_mut(id as usize).ok_or_else(|| {
            Error::parse(
                lineno,
                format!("cha ids must cover 0..n; {id} is out of range"),
            )
        })?;
        if slot.is_some() {
            return Err(Error::parse(lineno, format!("cha {id} placed twice")));
        }
        *slot = Some(tile);
    }
    let cha_tiles: Vec<TileCoord> = cha_tiles
        .into_iter()
        .enumerate()
        .map(|(i, t)| t.ok_or_else(|| Error::parse(0, format!("cha {i} missing"))))
        .collect::<Result<_>>()?;

    active.sort_by_key(|t| (t.row, t.col));
    active.dedup();
    let mesh = MeshConfig {
        cols,
        rows,
        active_tiles: active,
        cha_tiles,
        mc_tiles,
        hop_horizontal: hop.0,
        hop_vertical: hop.1,
        lambda_l2,
        lambda_mcdram,
    };
    mesh.validate()?;
    Ok(mesh)
}

pub fn load_mesh_config(path: impl AsRef<Path>) -> Result<MeshConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_mesh_config(&text).map_err(|e| e.in_file(path))
}

// ---------------------------------------------------------------------------
// Sample CSV
// ---------------------------------------------------------------------------

pub fn samples_to_csv(samples: &[Sample]) -> String {
    let mut out = String::from("addr,cha\n");
    for s in samples {
        let _ = writeln!(out, "{},{}", s.addr, s.cha);
    }
    out
}

pub fn parse_samples_csv(text: &str) -> Result<Vec<Sample>> {
    let mut lines = text.lines().enumerate();
    let (no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty sample file"))?;
    if header.trim() != "addr,cha" {
        return Err(Error::parse(no + 1, "expected `addr,cha` header"));
    }
    let mut samples = Vec::new();
    for (no, line) in lines {
        let lineno = no + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, c) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(lineno, "expected `addr,cha`"))?;
        let addr = parse_addr(a.trim(), lineno)?;
        let cha: u32 = c
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid cha `{c}`")))?;
        samples.push(Sample {
            addr,
            cha: ChaId(cha),
        });
    }
    Ok(samples)
}

pub fn load_samples_csv(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_samples_csv(&text).map_err(|e| e.in_file(path))
}

// ---------------------------------------------------------------------------
// Schedule files
// ---------------------------------------------------------------------------

pub fn schedule_to_string(schedule: &Schedule) -> String {
    let mut out =
        String::from("# schedule: per tile, statement tuples (row, a_start, x_start, width)\n");
    let _ = writeln!(out, "scheduler {}", schedule.label());
    for (tile, stmts) in schedule.per_tile() {
        let _ = writeln!(out, "tile {tile}");
        for s in stmts {
            let _ = writeln!(out, "s {} {} {} {}", s.row, s.a_start, s.x_start, s.width);
        }
    }
    out
}

pub fn parse_schedule(text: &str) -> Result<Schedule> {
    let mut label = String::from("imported");
    let mut per_tile: Vec<(TileCoord, Vec<Statement>)> = Vec::new();
    for (lineno, line) in content_lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "scheduler" if toks.len() == 2 => label = toks[1].to_string(),
            "tile" if toks.len() == 2 => {
                per_tile.push((parse_tile(toks[1], lineno)?, Vec::new()));
            }
            "s" if toks.len() == 5 => {
                let parse = |tok: &str| -> Result<u64> {
                    tok.parse()
                        .map_err(|_| Error::parse(lineno, format!("invalid number `{tok}`")))
                };
                let s = Statement {
                    row: parse(toks[1])? as u32,
                    a_start: parse(toks[2])?,
                    x_start: parse(toks[3])? as u32,
                    width: parse(toks[4])? as u32,
                };
                if s.width == 0 {
                    return Err(Error::parse(lineno, "statement width must be at least 1"));
                }
                per_tile
                    .last_mut()
                    .ok_or_else(|| Error::parse(lineno, "statement before any tile line"))?
                    .1
                    .push(s);
            }
            _ => {
                return Err(Error::parse(
                    lineno,
                    format!("unrecognized schedule line `{line}`"),
                ))
            }
        }
    }
    Ok(Schedule::new(label, per_tile))
}

pub fn load_schedule(path: impl AsRef<Path>) -> Result<Schedule> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_schedule(&text).map_err(|e| e.in_file(path))
}

// ---------------------------------------------------------------------------
// Layout files
// ---------------------------------------------------------------------------

pub fn layout_to_string(layout: &BlockLayout) -> String {
    let mut out = String::from("# block layout\n");
    for s in layout.structures() {
        let _ = writeln!(
            out,
            "structure {} base {} size {} elem {} spans {}",
            s.name, s.base, s.size_bytes, s.elem_bytes, s.spans_pages as u8
        );
    }
    out
}

pub fn parse_layout(text: &str) -> Result<BlockLayout> {
    let mut structures = Vec::new();
    for (lineno, line) in content_lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 10
            || toks[0] != "structure"
            || toks[2] != "base"
            || toks[4] != "size"
            || toks[6] != "elem"
            || toks[8] != "spans"
        {
            return Err(Error::parse(
                lineno,
                format!("unrecognized layout line `{line}`"),
            ));
        }
        let num = |tok: &str| -> Result<u64> {
            tok.parse()
                .map_err(|_| Error::parse(lineno, format!("invalid number `{tok}`")))
        };
        structures.push(StructureLayout {
            name: toks[1].to_string(),
            base: parse_addr(toks[3], lineno)?,
            size_bytes: num(toks[5])?,
            elem_bytes: num(toks[7])? as u32,
            spans_pages: num(toks[9])? != 0,
        });
    }
    Ok(BlockLayout::from_structures(structures))
}

pub fn load_layout(path: impl AsRef<Path>) -> Result<BlockLayout> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_layout(&text).map_err(|e| e.in_file(path))
}

// ---------------------------------------------------------------------------
// Cost report
// ---------------------------------------------------------------------------

/// Per-tile CSV: `tile_col,tile_row,statements,accesses,cycles,memory_accesses,far_accesses`.
pub fn cost_report_to_csv(report: &CostReport) -> String {
    let mut out =
        String::from("tile_col,tile_row,statements,accesses,cycles,memory_accesses,far_accesses\n");
    for t in &report.per_tile {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            t.tile.col,
            t.tile.row,
            t.statements,
            t.accesses,
            t.cycles,
            t.memory_accesses,
            t.far_accesses
        );
    }
    out
}

pub fn cost_report_summary(report: &CostReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "accesses:        {}", report.total_accesses);
    let _ = writeln!(out, "cycles:          {}", report.total_cycles);
    let _ = writeln!(out, "memory accesses: {}", report.memory_accesses);
    let _ = writeln!(
        out,
        "far accesses:    {} ({:.1}% of all)",
        report.far_accesses,
        if report.total_accesses == 0 {
            0.0
        } else {
            100.0 * report.far_accesses as f64 / report.total_accesses as f64
        }
    );
    let _ = writeln!(
        out,
        "mean latency:    {:.2} cycles/access",
        report.mean_latency()
    );
    for s in &report.per_structure {
        let _ = writeln!(
            out,
            "structure {:<8} accesses {:>10}  memory {:>10}  far {:>10} ({:.1}%)",
            s.name,
            s.accesses,
            s.memory_accesses,
            s.far_accesses,
            100.0 * s.far_fraction()
        );
    }
    out
}
