use std::path::PathBuf;

use thiserror::Error;

use crate::addr::{PhysAddr, Quadrant};
use crate::mesh::TileCoord;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mask set: {0}")]
    InvalidMaskSet(String),

    #[error("mask set is not quadrant-valid: 256-byte groups do not hold one line per quadrant")]
    NotQuadrantValid,

    #[error("address {addr} maps to raw index {index}, beyond the {num_chas} configured CHAs")]
    UnmappedAddress {
        addr: PhysAddr,
        index: u32,
        num_chas: u32,
    },

    #[error("{what} {value:#x} is not aligned to {align} bytes")]
    Misaligned {
        what: &'static str,
        value: u64,
        align: u64,
    },

    #[error("invalid mesh configuration: {0}")]
    InvalidMesh(String),

    #[error("tile ({},{}) is not an active tile", .0.col, .0.row)]
    InactiveTile(TileCoord),

    #[error("mesh has no active tiles")]
    NoActiveTiles,

    #[error("no active tile lies in quadrant {0}")]
    EmptyQuadrant(Quadrant),

    #[error("cannot resolve operand {operand} of statement {statement}: {detail}")]
    UnresolvedOperand {
        operand: &'static str,
        statement: usize,
        detail: String,
    },

    #[error("no statements to schedule")]
    NoStatements,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no CHA placement for CHA {0}")]
    UnplacedCha(u32),

    #[error("required page base {base:#x} is not in the hugepage pool")]
    PageMissing { base: u64 },

    #[error("page base {base:#x} is not a 1 GiB page inside the 16 GiB space")]
    InvalidPage { base: u64 },

    #[error("pool size {available} out of range 1..=16")]
    PoolSize { available: usize },

    #[error("structure {name} overflows its assigned hugepages")]
    PageOverflow { name: String },

    #[error("structure {name} spans pages {a:#x} and {b:#x}, which are not physically contiguous")]
    PagesNotContiguous { name: String, a: u64, b: u64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
