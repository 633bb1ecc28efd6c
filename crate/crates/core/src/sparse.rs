//! Triple-format sparse matrices between Hilbert spaces, their projection
//! from operator sums, persistence and lazily assembled linear combinations.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{OperatorSum, PRUNE};
use crate::operator::LinearOperator;
use crate::space::{header_fields, HilbertSpace};

/// Sparse matrix as `(row j, col i, c_ji)` triples sorted by `(i, j)`, with
/// a row-compressed copy for matrix-vector products.
#[derive(Clone, Debug)]
pub struct SparseOp {
    rows: usize,
    cols: usize,
    triples: Vec<(usize, usize, C64)>,
    row_ptr: Vec<usize>,
    row_entries: Vec<(usize, C64)>,
}

impl PartialEq for SparseOp {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.triples == other.triples
    }
}

impl SparseOp {
    /// Validates indices, merges duplicates, prunes and sorts.
    pub fn new(rows: usize, cols: usize, mut triples: Vec<(usize, usize, C64)>) -> Result<Self> {
        if let Some(&(j, i, _)) = triples.iter().find(|&&(j, i, _)| j >= rows || i >= cols) {
            return Err(Error::DimensionMismatch { expected: if j >= rows { rows } else { cols }, actual: j.max(i) });
        }
        triples.sort_by_key(|&(j, i, _)| (i, j));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(triples.len());
        for (j, i, c) in triples {
            match merged.last_mut() {
                Some(last) if last.0 == j && last.1 == i => last.2 += c,
                _ => merged.push((j, i, c)),
            }
        }
        merged.retain(|t| t.2.norm() > PRUNE);
        Ok(Self::from_sorted(rows, cols, merged))
    }

    fn from_sorted(rows: usize, cols: usize, triples: Vec<(usize, usize, C64)>) -> Self {
        let mut counts = vec![0usize; rows + 1];
        for &(j, _, _) in &triples {
            counts[j + 1] += 1;
        }
        for r in 0..rows {
            counts[r + 1] += counts[r];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let mut row_entries = vec![(0usize, C64::new(0.0, 0.0)); triples.len()];
        // triples are column-sorted, so each row receives ascending columns
        for &(j, i, c) in &triples {
            row_entries[fill[j]] = (i, c);
            fill[j] += 1;
        }
        SparseOp { rows, cols, triples, row_ptr, row_entries }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_sorted(rows, cols, Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_sorted(n, n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.ncols() {
            for j in 0..m.nrows() {
                if m[(j, i)].norm() > PRUNE {
                    t.push((j, i, m[(j, i)]));
                }
            }
        }
        Self::from_sorted(m.nrows(), m.ncols(), t)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.rows, self.cols, C64::new(0.0, 0.0));
        for &(j, i, c) in &self.triples {
            m[(j, i)] = c;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[(usize, usize, C64)] {
        &self.triples
    }

    pub fn get(&self, j: usize, i: usize) -> C64 {
        let row = &self.row_entries[self.row_ptr[j]..self.row_ptr[j + 1]];
        row.binary_search_by_key(&i, |e| e.0).map(|k| row[k].1).unwrap_or_default()
    }

    pub fn matvec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, actual: x.len() });
        }
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        self.apply(x, &mut y);
        Ok(y)
    }

    /// `y += alpha A x`
    pub fn matvec_acc(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(j, yj)| {
            let mut acc = C64::new(0.0, 0.0);
            for &(i, c) in &self.row_entries[self.row_ptr[j]..self.row_ptr[j + 1]] {
                acc += c * x[i];
            }
            *yj += alpha * acc;
        });
    }

    pub fn adjoint(&self) -> SparseOp {
        let t = self.triples.iter().map(|&(j, i, c)| (i, j, c.conj())).collect();
        SparseOp::new(self.cols, self.rows, t).expect("indices already validated")
    }

    /// Replaces each pair (c_ji, c_ij) by its Hermitian average so that
    /// c_ji = conj(c_ij) holds exactly as stored.
    pub fn hermitize(&self) -> SparseOp {
        assert_eq!(self.rows, self.cols, "hermitize needs a square matrix");
        let mut map: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for &(j, i, c) in &self.triples {
            let (lo, hi, v) = if j <= i { (j, i, c) } else { (i, j, c.conj()) };
            *map.entry((lo, hi)).or_default() += v * 0.5;
        }
        let mut t = Vec::with_capacity(self.triples.len());
        for ((lo, hi), v) in map {
            if lo == hi {
                t.push((lo, lo, C64::new(2.0 * v.re, 0.0)));
            } else {
                t.push((lo, hi, v));
                t.push((hi, lo, v.conj()));
            }
        }
        SparseOp::new(self.rows, self.cols, t).expect("indices already validated")
    }

    /// Exact (bitwise) Hermiticity of the stored triples.
    pub fn is_exactly_hermitian(&self) -> bool {
        self.rows == self.cols && self.triples.iter().all(|&(j, i, c)| self.get(i, j) == c.conj())
    }

    pub fn write(&self, path: &Path, from: &str, to: &str) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(
            w,
            "#HXX-SPARSE from={from} to={to} rows={} cols={} nnz={}",
            self.rows,
            self.cols,
            self.nnz()
        )
        .map_err(io)?;
        for &(j, i, c) in &self.triples {
            writeln!(w, "{j} {i} {:.16e} {:.16e}", c.re, c.im).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads a component file; returns the matrix and its (from, to) basis names.
    pub fn read(path: &Path) -> Result<(SparseOp, String, String)> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty component file"))?
            .map_err(|e| Error::io(path, e))?;
        let fields = header_fields(&header, "#HXX-SPARSE").ok_or_else(|| Error::parse(path, 1, "bad sparse header"))?;
        let field = |k: &str| -> Result<String> {
            fields
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::parse(path, 1, format!("missing {k} in header")))
        };
        let num = |k: &str| -> Result<usize> {
            field(k)?.parse().map_err(|_| Error::parse(path, 1, format!("bad {k} in header")))
        };
        let (rows, cols, nnz) = (num("rows")?, num("cols")?, num("nnz")?);
        let mut triples = Vec::with_capacity(nnz);
        for (n, line) in lines.enumerate() {
            let lineno = n + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut next = || it.next().ok_or_else(|| Error::parse(path, lineno, "expected 'j i re im'"));
            let j: usize = next()?.parse().map_err(|_| Error::parse(path, lineno, "bad row index"))?;
            let i: usize = next()?.parse().map_err(|_| Error::parse(path, lineno, "bad column index"))?;
            let re: f64 = next()?.parse().map_err(|_| Error::parse(path, lineno, "bad real part"))?;
            let im: f64 = next()?.parse().map_err(|_| Error::parse(path, lineno, "bad imaginary part"))?;
            if j >= rows || i >= cols {
                return Err(Error::parse(path, lineno, format!("index ({j}, {i}) outside {rows}x{cols}")));
            }
            triples.push((j, i, C64::new(re, im)));
        }
        if triples.len() != nnz {
            return Err(Error::parse(path, 1, format!("header says nnz={nnz}, file has {}", triples.len())));
        }
        let op = SparseOp::new(rows, cols, triples)?;
        Ok((op, field("from")?, field("to")?))
    }
}

impl LinearOperator for SparseOp {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        self.matvec_acc(C64::new(1.0, 0.0), x, y);
    }
}

/// What happens to images that fall outside the target space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Escape {
    /// Raise [`Error::EscapingDeterminant`].
    Reject,
    /// Drop them (projection onto a spin sector).
    Truncate,
    /// Drop images the target constraint excludes; reject admissible images
    /// missing from the basis.
    Constrained,
}

/// Matrix of `op` from `from` to `to`; column i is the image of basis vector i.
pub fn project(op: &OperatorSum, from: &HilbertSpace, to: &HilbertSpace) -> Result<SparseOp> {
    project_with(op, from, to, Escape::Reject)
}

pub fn project_with(op: &OperatorSum, from: &HilbertSpace, to: &HilbertSpace, escape: Escape) -> Result<SparseOp> {
    let columns: Vec<Result<Vec<(usize, usize, C64)>>> = from
        .basis()
        .par_iter()
        .enumerate()
        .map(|(i, det)| {
            let mut col: Vec<(usize, C64)> = Vec::new();
            let mut escaped = None;
            op.for_each_image(det, |d, c| match to.index_of(&d) {
                Some(j) => col.push((j, c)),
                None => {
                    let keep = match escape {
                        Escape::Reject => true,
                        Escape::Truncate => false,
                        Escape::Constrained => to.admits(&d),
                    };
                    if keep && escaped.is_none() {
                        escaped = Some(d)
                    }
                }
            });
            if let Some(d) = escaped {
                return Err(Error::EscapingDeterminant { determinant: d.to_string(), space: to.name().to_string() });
            }
            col.sort_by_key(|e| e.0);
            let mut out: Vec<(usize, usize, C64)> = Vec::with_capacity(col.len());
            for (j, c) in col {
                match out.last_mut() {
                    Some(last) if last.0 == j => last.2 += c,
                    _ => out.push((j, i, c)),
                }
            }
            out.retain(|t| t.2.norm() > PRUNE);
            Ok(out)
        })
        .collect();
    let mut triples = Vec::new();
    for c in columns {
        triples.extend(c?);
    }
    Ok(SparseOp::from_sorted(to.dim(), from.dim(), triples))
}

/// Named unit-coefficient components between two spaces.
#[derive(Clone, Debug, Default)]
pub struct ComponentSet {
    pub from: String,
    pub to: String,
    pub rows: usize,
    pub cols: usize,
    components: BTreeMap<String, SparseOp>,
}

impl ComponentSet {
    pub fn new(from: &str, to: &str, rows: usize, cols: usize) -> Self {
        ComponentSet { from: from.into(), to: to.into(), rows, cols, components: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: &str, op: SparseOp) -> Result<()> {
        if op.rows() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, actual: op.rows() });
        }
        if op.cols() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, actual: op.cols() });
        }
        self.components.insert(name.to_string(), op);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&SparseOp> {
        self.components.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.components.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SparseOp)> {
        self.components.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Lazy linear combination Σ coeff_k · component_k.
    pub fn assemble<'a>(&'a self, coefficients: &[(String, C64)]) -> Result<AssembledOp<'a>> {
        let mut parts = Vec::with_capacity(coefficients.len());
        for (name, c) in coefficients {
            let op = self.get(name).ok_or_else(|| Error::UnknownComponent(name.clone()))?;
            if *c != C64::new(0.0, 0.0) {
                parts.push((*c, op));
            }
        }
        Ok(AssembledOp { rows: self.rows, cols: self.cols, parts })
    }
}

/// Linear combination of sparse components applied term by term.
#[derive(Clone, Debug)]
pub struct AssembledOp<'a> {
    rows: usize,
    cols: usize,
    parts: Vec<(C64, &'a SparseOp)>,
}

impl AssembledOp<'_> {
    /// Explicitly merged matrix.
    pub fn merged(&self) -> SparseOp {
        let mut t = Vec::new();
        for (c, op) in &self.parts {
            t.extend(op.triples().iter().map(|&(j, i, v)| (j, i, v * c)));
        }
        SparseOp::new(self.rows, self.cols, t).expect("component indices already validated")
    }
}

impl LinearOperator for AssembledOp<'_> {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (c, op) in &self.parts {
            op.matvec_acc(*c, x, y);
        }
    }
}
