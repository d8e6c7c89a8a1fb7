//! Sparse matrix representation and Matrix Market ingestion.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A sparse matrix as row-major sorted (row, col, value) triples.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n_rows: u32,
    pub n_cols: u32,
    triples: Vec<(u32, u32, f64)>,
}

impl SparseMatrix {
    /// Validates bounds and duplicates, sorts row-major.
    pub fn new(n_rows: u32, n_cols: u32, mut triples: Vec<(u32, u32, f64)>) -> Result<Self> {
        for &(r, c, _) in &triples {
            if r >= n_rows || c >= n_cols {
                return Err(Error::parse(
                    0,
                    format!("entry ({r},{c}) out of bounds for {n_rows}x{n_cols} matrix"),
                ));
            }
        }
        triples.sort_by_key(|&(r, c, _)| (r, c));
        for w in triples.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::parse(
                    0,
                    format!("duplicate entry at ({},{})", w[0].0, w[0].1),
                ));
            }
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            triples,
        })
    }

    /// Dense matrix with every entry set to 1.0; handy for matvec pipelines.
    pub fn dense(n_rows: u32, n_cols: u32) -> Self {
        let mut triples = Vec::with_capacity(n_rows as usize * n_cols as usize);
        for r in 0..n_rows {
            for c in 0..n_cols {
                triples.push((r, c, 1.0));
            }
        }
        SparseMatrix {
            n_rows,
            n_cols,
            triples,
        }
    }

    pub fn nnz(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[(u32, u32, f64)] {
        &self.triples
    }
}

/// Loads a Matrix Market coordinate file; symmetric matrices are expanded.
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_matrix_market(&text).map_err(|e| e.in_file(path))
}

#[derive(PartialEq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

/// Parses Matrix Market coordinate text. Pattern files take value 1.0;
/// symmetric files mirror their off-diagonal entries.
pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate();

    let (header_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file".to_string()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5 || !tokens[0].eq_ignore_ascii_case("%%MatrixMarket") {
        return Err(Error::parse(
            header_no + 1,
            "expected `%%MatrixMarket matrix coordinate <field> <symmetry>` header",
        ));
    }
    if !tokens[1].eq_ignore_ascii_case("matrix") || !tokens[2].eq_ignore_ascii_case("coordinate") {
        return Err(Error::parse(
            header_no + 1,
            format!("unsupported object/format `{} {}`", tokens[1], tokens[2]),
        ));
    }
    let field = match tokens[3].to_ascii_lowercase().as_str() {
        "real" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => {
            return Err(Error::parse(
                header_no + 1,
                format!("unsupported field `{other}` (real, integer, or pattern)"),
            ))
        }
    };
    let symmetric = match tokens[4].to_ascii_lowercase().as_str() {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(Error::parse(
                header_no + 1,
                format!("unsupported symmetry `{other}` (general or symmetric)"),
            ))
        }
    };

    let mut dims: Option<(u32, u32, usize)> = None;
    let mut triples: Vec<(u32, u32, f64)> = Vec::new();
    let mut entry_lines: Vec<usize> = Vec::new();
    let mut file_entries = 0usize;

    for (no, line) in lines {
        let lineno = no + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut parts = line.split_whitespace();
        if dims.is_none() {
            let n_rows = parse_num::<u32>(&mut parts, lineno, "row count")?;
            let n_cols = parse_num::<u32>(&mut parts, lineno, "column count")?;
            let nnz = parse_num::<usize>(&mut parts, lineno, "entry count")?;
            dims = Some((n_rows, n_cols, nnz));
            triples.reserve(nnz);
            continue;
        }
        let (n_rows, n_cols, _) = dims.unwrap();
        let r = parse_num::<u64>(&mut parts, lineno, "row index")?;
        let c = parse_num::<u64>(&mut parts, lineno, "column index")?;
        if r < 1 || r > n_rows as u64 || c < 1 || c > n_cols as u64 {
            return Err(Error::parse(
                lineno,
                format!("entry ({r},{c}) out of range for {n_rows}x{n_cols} matrix"),
            ));
        }
        let value = match field {
            Field::Pattern => 1.0,
            Field::Real | Field::Integer => parse_num::<f64>(&mut parts, lineno, "value")?,
        };
        let (r, c) = (r as u32 - 1, c as u32 - 1);
        file_entries += 1;
        triples.push((r, c, value));
        entry_lines.push(lineno);
        if symmetric && r != c {
            triples.push((c, r, value));
            entry_lines.push(lineno);
        }
    }

    let (n_rows, n_cols, declared) = dims.ok_or_else(|| Error::parse(0, "missing size line"))?;
    if file_entries != declared {
        return Err(Error::parse(
            0,
            format!("size line declares {declared} entries, file stores {file_entries}"),
        ));
    }

    // Sort and locate duplicates with their source lines.
    let mut order: Vec<usize> = (0..triples.len()).collect();
    order.sort_by_key(|&i| (triples[i].0, triples[i].1));
    for w in order.windows(2) {
        let (a, b) = (triples[w[0]], triples[w[1]]);
        if a.0 == b.0 && a.1 == b.1 {
            return Err(Error::parse(
                entry_lines[w[1]],
                format!(
                    "duplicate entry at ({},{}) (first stored at line {})",
                    a.0 + 1,
                    a.1 + 1,
                    entry_lines[w[0]]
                ),
            ));
        }
    }

    SparseMatrix::new(n_rows, n_cols, triples)
}

fn parse_num<'a, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'a str>,
    lineno: usize,
    what: &str,
) -> Result<T> {
    let tok = parts
        .next()
        .ok_or_else(|| Error::parse(lineno, format!("missing {what}")))?;
    tok.parse::<T>()
        .map_err(|_| Error::parse(lineno, format!("invalid {what} `{tok}`")))
}
