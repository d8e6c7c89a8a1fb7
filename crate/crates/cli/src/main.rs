//! `chamap` — CHA address-mapping toolkit.
//!
//! Subcommands cover the whole pipeline: inspect a mapping over an address
//! range (`map`), recover a mapping from samples (`learn`), build a schedule
//! for a matrix (`schedule`), replay it under the cost model (`simulate`),
//! and emulate the hugepage pool and pinning procedure (`pool`, `pin`).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use chamap::config;
use chamap::{
    assign_hugepages, dense_line_statements, emulate_hugepage_pool, greedy_schedule, layout_blocks,
    learn_xor_masks, load_matrix_market, mine_regular_statements, sequential_block_schedule,
    simulate_schedule, subnuma_schedule, MeshConfig, PhysAddr, StructureSpec, Unknown, XorMaskSet,
    DEFAULT_MAX_WIDTH, PAGE_BYTES,
};

#[derive(Parser)]
#[command(
    name = "chamap",
    about = "XOR CHA-mapping model, mapping recovery, and coherence-aware scheduling",
    long_about = "Models XOR-based CHA address mappings on mesh manycores, recovers mappings \
                  from observation samples, and builds and evaluates coherence-aware schedules \
                  under an explicit NoC cost model.\n\n\
                  All outputs are deterministic for a given seed and configuration. Addresses \
                  are hexadecimal with a 0x prefix. Without --mask-config the synthetic default \
                  mask set ships (seed-42 quadrant-valid, 6 CHA bits, 38 CHAs); without \
                  --mesh-config the default 6x7 mesh with 38 CHAs is used."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheduler {
    Sequential,
    Subnuma,
    Greedy,
}

#[derive(Subcommand)]
enum Command {
    /// Dump CHA/quadrant mapping over an address range and emit a histogram CSV
    #[command(long_about = "Tallies the CHA and quadrant of every cache line in \
        [start, start+len) and emits a histogram CSV with columns `kind,id,lines` \
        (kind is cha, quadrant, or unmapped). --dump additionally prints one \
        `addr,cha,quadrant` line per cache line.")]
    Map {
        /// Range start (hexadecimal, 64 B-aligned)
        #[arg(long)]
        start: PhysAddr,
        /// Range length in bytes (hexadecimal or decimal, 64 B-multiple)
        #[arg(long, value_parser = parse_len)]
        len: u64,
        /// Mask-set configuration file
        #[arg(long)]
        mask_config: Option<PathBuf>,
        /// Write the histogram CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print every line's mapping as `addr,cha,quadrant`
        #[arg(long)]
        dump: bool,
    },
    /// Recover a mask set from an `addr,cha` sample CSV
    #[command(
        long_about = "Reads a sample CSV (header `addr,cha`; addr hexadecimal, cha \
        decimal), solves the per-bit GF(2) systems, and emits the recovered mask-set \
        configuration plus a residual report. Unknowns the samples leave free default \
        to zero and are listed."
    )]
    Learn {
        /// Sample CSV file
        #[arg(long)]
        samples: PathBuf,
        /// CHA index bits to recover (default: enough for the largest observed cha)
        #[arg(long)]
        num_cha_bits: Option<u32>,
        /// Write the recovered mask-set config here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a schedule for a matrix under a mapping and mesh
    #[command(
        long_about = "Mines statements from a Matrix Market file (or generates \
        line-grained statements for a dense matrix), lays the structures out in emulated \
        1 GiB hugepages, and assigns statements to tiles with the chosen scheduler. \
        Writes the schedule file to --out and the block layout to --layout-out \
        (default: <out>.layout). The subnuma scheduler requires a dense matrix."
    )]
    Schedule {
        /// Matrix Market file (.mtx)
        #[arg(long, conflicts_with_all = ["dense_rows", "dense_cols"])]
        matrix: Option<PathBuf>,
        /// Dense matrix rows
        #[arg(long, requires = "dense_cols")]
        dense_rows: Option<u32>,
        /// Dense matrix columns
        #[arg(long, requires = "dense_rows")]
        dense_cols: Option<u32>,
        /// Element size in bytes (4 for single precision, 8 for double)
        #[arg(long, default_value_t = 8)]
        elem_bytes: u32,
        #[arg(long, value_enum)]
        scheduler: Scheduler,
        /// Mask-set configuration file
        #[arg(long)]
        mask_config: Option<PathBuf>,
        /// Mesh configuration file
        #[arg(long)]
        mesh_config: Option<PathBuf>,
        /// Seed for the emulated hugepage pool
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Maximum statement width in lanes (sparse mining)
        #[arg(long, default_value_t = DEFAULT_MAX_WIDTH)]
        max_width: u32,
        /// Schedule output file
        #[arg(long)]
        out: PathBuf,
        /// Layout output file (default: <out>.layout)
        #[arg(long)]
        layout_out: Option<PathBuf>,
    },
    /// Replay a schedule under the cost model and report traffic
    #[command(
        long_about = "Replays a schedule file against its block layout, mask set, \
        and mesh. Prints a human-readable summary (totals, mean latency, per-structure \
        far-access fractions) and optionally writes the per-tile CSV with columns \
        `tile_col,tile_row,statements,accesses,cycles,memory_accesses,far_accesses`."
    )]
    Simulate {
        /// Schedule file produced by `schedule`
        #[arg(long)]
        schedule: PathBuf,
        /// Layout file produced by `schedule`
        #[arg(long)]
        layout: PathBuf,
        /// Mask-set configuration file
        #[arg(long)]
        mask_config: Option<PathBuf>,
        /// Mesh configuration file
        #[arg(long)]
        mesh_config: Option<PathBuf>,
        /// Write the per-tile CSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emulate the hugepage pool a machine would hand out
    Pool {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Pages the machine has available (1..=16)
        #[arg(long, default_value_t = 16)]
        available: usize,
    },
    /// Match required page bases against an emulated pool and free the rest
    #[command(
        long_about = "Emulates the static/dynamic pinning procedure: overallocate \
        the pool, match each required base against it, free the unused pages. A required \
        base missing from the pool fails, naming the base (the real-world retry \
        condition)."
    )]
    Pin {
        /// Comma-separated required page bases (hexadecimal, 1 GiB-aligned)
        #[arg(long, value_delimiter = ',')]
        required: Vec<PhysAddr>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        available: usize,
    },
}

fn parse_len(s: &str) -> Result<u64, String> {
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).map_err(|e| e.to_string())
    } else {
        s.parse()
            .map_err(|e: std::num::ParseIntError| e.to_string())
    }
}

fn load_masks(path: &Option<PathBuf>) -> Result<XorMaskSet> {
    match path {
        Some(p) => Ok(config::load_mask_config(p)?),
        None => Ok(XorMaskSet::synthetic_default()),
    }
}

fn load_mesh(path: &Option<PathBuf>) -> Result<MeshConfig> {
    match path {
        Some(p) => Ok(config::load_mesh_config(p)?),
        None => Ok(MeshConfig::default_knl()),
    }
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            println!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    // Die quietly when a downstream pipe closes, like any line-oriented tool.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Map {
            start,
            len,
            mask_config,
            out,
            dump,
        } => cmd_map(start, len, &mask_config, &out, dump),
        Command::Learn {
            samples,
            num_cha_bits,
            out,
        } => cmd_learn(&samples, num_cha_bits, &out),
        Command::Schedule {
            matrix,
            dense_rows,
            dense_cols,
            elem_bytes,
            scheduler,
            mask_config,
            mesh_config,
            seed,
            max_width,
            out,
            layout_out,
        } => cmd_schedule(ScheduleArgs {
            matrix,
            dense: dense_rows.zip(dense_cols),
            elem_bytes,
            scheduler,
            mask_config,
            mesh_config,
            seed,
            max_width,
            out,
            layout_out,
        }),
        Command::Simulate {
            schedule,
            layout,
            mask_config,
            mesh_config,
            out,
        } => cmd_simulate(&schedule, &layout, &mask_config, &mesh_config, &out),
        Command::Pool { seed, available } => {
            let pool = emulate_hugepage_pool(seed, available)?;
            for base in pool.bases() {
                println!("{}", PhysAddr(*base));
            }
            Ok(())
        }
        Command::Pin {
            required,
            seed,
            available,
        } => {
            let pool = emulate_hugepage_pool(seed, available)?;
            let required: Vec<u64> = required.iter().map(|a| a.value()).collect();
            let assignment = assign_hugepages(&required, &pool)?;
            for base in &assignment.assigned {
                println!("assigned {}", PhysAddr(*base));
            }
            for base in &assignment.freed {
                println!("freed {}", PhysAddr(*base));
            }
            Ok(())
        }
    }
}

fn cmd_map(
    start: PhysAddr,
    len: u64,
    mask_config: &Option<PathBuf>,
    out: &Option<PathBuf>,
    dump: bool,
) -> Result<()> {
    let map = load_masks(mask_config)?;
    if dump {
        let mut addr = start;
        while addr.value() < start.value() + len {
            match map.cha_of(addr) {
                chamap::ChaMapping::Cha(id) => {
                    println!("{addr},{id},{}", id.quadrant());
                }
                chamap::ChaMapping::Unmapped { raw_index } => {
                    println!("{addr},unmapped({raw_index}),{}", map.quadrant_of(addr));
                }
            }
            addr = addr.offset(chamap::LINE_BYTES);
        }
    }
    let hist = map.histogram(start, len)?;
    let mut csv = String::from("kind,id,lines\n");
    for (id, count) in hist.per_cha.iter().enumerate() {
        csv.push_str(&format!("cha,{id},{count}\n"));
    }
    for q in chamap::Quadrant::ALL {
        csv.push_str(&format!("quadrant,{q},{}\n", hist.per_quadrant[q.index()]));
    }
    csv.push_str(&format!("unmapped,-,{}\n", hist.unmapped));
    write_or_print(out, &csv)?;
    let spread = hist.cha_spread();
    if spread.is_finite() {
        eprintln!("per-CHA spread (max/min): {spread:.3}");
    } else {
        eprintln!("per-CHA spread (max/min): undefined (some CHA saw no lines)");
    }
    Ok(())
}

fn cmd_learn(samples: &Path, num_cha_bits: Option<u32>, out: &Option<PathBuf>) -> Result<()> {
    let samples = config::load_samples_csv(samples)?;
    let bits = num_cha_bits.unwrap_or_else(|| {
        let max = samples.iter().map(|s| s.cha.0).max().unwrap_or(0);
        (32 - max.leading_zeros()).max(1)
    });
    let result = learn_xor_masks(&samples, bits)?;
    write_or_print(out, &config::mask_config_to_string(&result.recovered))?;
    for (bit, residual) in result.residuals.iter().enumerate() {
        if *residual > 0 {
            eprintln!("bit {bit}: {residual} samples inconsistent with an affine-XOR model");
        }
    }
    for (bit, free) in result.free.iter().enumerate() {
        if !free.is_empty() {
            let names: Vec<String> = free
                .iter()
                .map(|u| match u {
                    Unknown::AddrBit(p) => p.to_string(),
                    Unknown::Constant => "const".to_string(),
                })
                .collect();
            eprintln!(
                "bit {bit}: {} unknowns left free (set to 0): {}",
                free.len(),
                names.join(",")
            );
        }
    }
    if result.is_exact() {
        eprintln!(
            "recovered mask set reproduces all {} samples exactly",
            samples.len()
        );
    }
    Ok(())
}

struct ScheduleArgs {
    matrix: Option<PathBuf>,
    dense: Option<(u32, u32)>,
    elem_bytes: u32,
    scheduler: Scheduler,
    mask_config: Option<PathBuf>,
    mesh_config: Option<PathBuf>,
    seed: u64,
    max_width: u32,
    out: PathBuf,
    layout_out: Option<PathBuf>,
}

fn cmd_schedule(args: ScheduleArgs) -> Result<()> {
    let map = load_masks(&args.mask_config)?;
    let mesh = load_mesh(&args.mesh_config)?;
    let eb = args.elem_bytes;

    enum Source {
        Dense { rows: u32, cols: u32 },
        Sparse(chamap::SparseMatrix),
    }
    let source = match (&args.matrix, args.dense) {
        (Some(path), None) => Source::Sparse(load_matrix_market(path)?),
        (None, Some((rows, cols))) => Source::Dense { rows, cols },
        _ => bail!("pass either --matrix or --dense-rows/--dense-cols"),
    };

    let pad = |bytes: u64| bytes.next_multiple_of(chamap::LINE_BYTES);
    let sized = |elems: u64| -> Result<u64> {
        elems
            .checked_mul(eb as u64)
            .context("structure size overflows a 64-bit byte count")
    };
    let (specs, rows) = match &source {
        Source::Dense { rows, cols } => (
            vec![
                StructureSpec::new("B", pad(sized(*rows as u64 * *cols as u64)?), eb),
                StructureSpec::new("y", pad(sized(*rows as u64)?), eb),
                StructureSpec::new("x", pad(sized(*cols as u64)?), eb),
            ],
            *rows,
        ),
        Source::Sparse(m) => (
            vec![
                StructureSpec::new("A", pad(sized(m.nnz() as u64)?), eb),
                StructureSpec::new("y", pad(sized(m.n_rows as u64)?), eb),
                StructureSpec::new("x", pad(sized(m.n_cols as u64)?), eb),
            ],
            m.n_rows,
        ),
    };

    // Static side assumes the lowest pages; the emulated executor
    // overallocates, matches them, and frees the rest.
    let total: u64 = specs.iter().map(|s| s.size_bytes).sum();
    let pages_needed = total.div_ceil(PAGE_BYTES).max(1);
    let required: Vec<u64> = (0..pages_needed).map(|k| k * PAGE_BYTES).collect();
    let pool = emulate_hugepage_pool(args.seed, chamap::POOL_PAGES)?;
    let assignment = assign_hugepages(&required, &pool)?;
    let layout = layout_blocks(&specs, &assignment.assigned)?;

    let schedule = match (&source, args.scheduler) {
        (Source::Dense { rows, cols }, Scheduler::Subnuma) => {
            let mat = layout.structure("B").expect("dense layout has B");
            subnuma_schedule(mat, *rows, *cols, &map, &mesh)?
        }
        (Source::Sparse(_), Scheduler::Subnuma) => {
            bail!("the subnuma scheduler walks a dense matrix; pass --dense-rows/--dense-cols")
        }
        (source, kind) => {
            let statements = match source {
                Source::Dense { rows, cols } => {
                    let mat = layout.structure("B").expect("dense layout has B");
                    dense_line_statements(mat, *rows, *cols)?
                }
                Source::Sparse(m) => mine_regular_statements(m, args.max_width)?,
            };
            match kind {
                Scheduler::Sequential => {
                    sequential_block_schedule(&statements, rows, &mesh.active_tiles)?
                }
                Scheduler::Greedy => {
                    let ops = layout.spmv()?;
                    greedy_schedule(&statements, &ops, &map, &mesh)?
                }
                Scheduler::Subnuma => unreachable!(),
            }
        }
    };

    fs::write(&args.out, config::schedule_to_string(&schedule))
        .with_context(|| format!("writing {}", args.out.display()))?;
    let layout_path = args
        .layout_out
        .unwrap_or_else(|| args.out.with_extension("layout"));
    fs::write(&layout_path, config::layout_to_string(&layout))
        .with_context(|| format!("writing {}", layout_path.display()))?;
    println!(
        "wrote {} ({} statements on {} tiles) and {}",
        args.out.display(),
        schedule.statement_count(),
        schedule.per_tile().len(),
        layout_path.display()
    );
    Ok(())
}

fn cmd_simulate(
    schedule: &Path,
    layout: &Path,
    mask_config: &Option<PathBuf>,
    mesh_config: &Option<PathBuf>,
    out: &Option<PathBuf>,
) -> Result<()> {
    let schedule = config::load_schedule(schedule)?;
    let layout = config::load_layout(layout)?;
    let map = load_masks(mask_config)?;
    let mesh = load_mesh(mesh_config)?;
    let report = simulate_schedule(&schedule, &layout, &map, &mesh)?;
    print!("{}", config::cost_report_summary(&report));
    if let Some(path) = out {
        fs::write(path, config::cost_report_to_csv(&report))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
