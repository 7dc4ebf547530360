//! Square 0/1 matrices, the matchings they induce, and the `.pmat` text format.
//!
//! A matrix doubles as the biadjacency matrix of a bipartite graph with rows
//! on one side and columns on the other, so entry `(r, c) = 1` is the edge
//! between row vertex `r` and column vertex `c`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    n: usize,
    entries: Vec<bool>,
}

impl Matrix {
    /// Builds a matrix from row-major entries.
    pub fn new(n: usize, entries: Vec<bool>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "matrix side must be at least 1".into(),
            ));
        }
        if entries.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        Ok(Matrix { n, entries })
    }

    /// Builds a matrix from rows of 0/1 bytes. Panics on ragged input or
    /// entries other than 0 and 1; intended for literals.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), n, "ragged row in matrix literal");
            for &a in row {
                assert!(a <= 1, "matrix literal entries must be 0 or 1");
                entries.push(a == 1);
            }
        }
        Matrix::new(n, entries).expect("matrix literal must be non-empty")
    }

    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            entries: vec![false; n * n],
        }
    }

    pub fn ones(n: usize) -> Self {
        Matrix {
            n,
            entries: vec![true; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m.entries[i * n + i] = true;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn ones_count(&self) -> usize {
        self.entries.iter().filter(|&&a| a).count()
    }

    /// Returns the matrix whose row `i` is row `row_perm[i]` of `self` and
    /// whose column `j` is column `col_perm[j]`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        assert_eq!(row_perm.len(), self.n);
        assert_eq!(col_perm.len(), self.n);
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for &r in row_perm {
            for &c in col_perm {
                entries.push(self.get(r, c));
            }
        }
        Matrix { n, entries }
    }

    /// Uniformly random matrix with exactly `ones` entries set, positions
    /// drawn without replacement from the `n²` cells.
    pub fn generate_random(n: usize, ones: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "matrix side must be at least 1".into(),
            ));
        }
        let cells = n * n;
        if ones > cells {
            return Err(Error::InvalidArgument(format!(
                "cannot place {ones} ones in a {n}x{n} matrix"
            )));
        }
        let mut rng = rng::seeded(seed);
        let mut m = Matrix::zeros(n);
        for cell in index::sample(&mut rng, cells, ones) {
            m.entries[cell] = true;
        }
        Ok(m)
    }

    /// Finds a perfect matching that uses only 1-entries, by augmenting paths
    /// from each row in index order.
    pub fn find_perfect_matching(&self) -> Option<Matching> {
        let n = self.n;
        let mut col_to_row: Vec<Option<usize>> = vec![None; n];
        for row in 0..n {
            let mut seen = vec![false; n];
            if !self.augment(row, &mut seen, &mut col_to_row) {
                return None;
            }
        }
        let mut row_to_col = vec![0; n];
        for (col, row) in col_to_row.iter().enumerate() {
            row_to_col[row.expect("every column is matched")] = col;
        }
        Some(Matching::perfect(row_to_col).expect("augmenting paths yield a permutation"))
    }

    fn augment(&self, row: usize, seen: &mut [bool], col_to_row: &mut [Option<usize>]) -> bool {
        for col in 0..self.n {
            if !self.get(row, col) || seen[col] {
                continue;
            }
            seen[col] = true;
            let free = match col_to_row[col] {
                None => true,
                Some(other) => self.augment(other, seen, col_to_row),
            };
            if free {
                col_to_row[col] = Some(row);
                return true;
            }
        }
        false
    }

    /// Renders the `.pmat` text form: the side length on the first line, then
    /// one line of `0`/`1` characters per row.
    pub fn to_pmat(&self) -> String {
        let mut out = String::with_capacity(self.n * (self.n + 1) + 8);
        out.push_str(&self.n.to_string());
        out.push('\n');
        for r in 0..self.n {
            out.extend(self.row(r).iter().map(|&a| if a { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    pub fn read_pmat(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    pub fn write_pmat(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pmat()).map_err(|e| Error::io(path, e))
    }
}

impl FromStr for Matrix {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        parse_matrix(text)
    }
}

/// Parses the `.pmat` format. Errors carry the 1-based line number.
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let err = |line: usize, message: String| Error::Parse { line, message };

    let header = lines.next().unwrap_or("");
    let n: usize = header.trim().parse().map_err(|_| {
        err(
            1,
            format!("expected the matrix side length, found {header:?}"),
        )
    })?;
    if n == 0 {
        return Err(err(1, "matrix side must be at least 1".into()));
    }

    let mut entries = Vec::with_capacity(n * n);
    for row in 0..n {
        let line_no = row + 2;
        let line = lines
            .next()
            .ok_or_else(|| err(line_no, format!("missing row {row} of {n}")))?;
        let mut width = 0;
        for ch in line.chars() {
            match ch {
                '0' => entries.push(false),
                '1' => entries.push(true),
                other => return Err(err(line_no, format!("invalid character {other:?}"))),
            }
            width += 1;
        }
        if width != n {
            return Err(err(
                line_no,
                format!("row has {width} entries, expected {n}"),
            ));
        }
    }
    for (offset, line) in lines.enumerate() {
        if !line.trim().is_empty() {
            return Err(err(
                n + 2 + offset,
                "unexpected content after the last row".into(),
            ));
        }
    }
    Matrix::new(n, entries)
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix(n={})", self.n)?;
        for r in 0..self.n {
            f.write_str(if r == 0 { " [" } else { ", " })?;
            for &a in self.row(r) {
                f.write_str(if a { "1" } else { "0" })?;
            }
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchingKind {
    Perfect,
    NearPerfect { hole: (usize, usize) },
}

/// A perfect or near-perfect matching on the complete bipartite graph with
/// `n` row vertices and `n` column vertices.
///
/// Near-perfect matchings leave exactly one row `u` and one column `v`
/// uncovered; `(u, v)` is the hole.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    row_to_col: Vec<Option<usize>>,
    col_to_row: Vec<Option<usize>>,
    hole: Option<(usize, usize)>,
}

impl Matching {
    /// The perfect matching pairing row `i` with column `row_to_col[i]`.
    pub fn perfect(row_to_col: Vec<usize>) -> Result<Self> {
        let n = row_to_col.len();
        let pairs: Vec<_> = row_to_col.into_iter().enumerate().collect();
        let m = Matching::from_pairs(n, &pairs)?;
        debug_assert!(m.is_perfect());
        Ok(m)
    }

    /// Builds a matching from `(row, column)` pairs: `n` pairs make a perfect
    /// matching and `n - 1` pairs a near-perfect one.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatching("n must be at least 1".into()));
        }
        let mut row_to_col = vec![None; n];
        let mut col_to_row = vec![None; n];
        for &(u, v) in pairs {
            if u >= n || v >= n {
                return Err(Error::InvalidMatching(format!(
                    "pair ({u}, {v}) out of range"
                )));
            }
            if row_to_col[u].is_some() || col_to_row[v].is_some() {
                return Err(Error::InvalidMatching(format!(
                    "pair ({u}, {v}) reuses a vertex"
                )));
            }
            row_to_col[u] = Some(v);
            col_to_row[v] = Some(u);
        }
        let hole = match pairs.len() {
            len if len == n => None,
            len if len + 1 == n => {
                let u = row_to_col
                    .iter()
                    .position(Option::is_none)
                    .expect("one free row");
                let v = col_to_row
                    .iter()
                    .position(Option::is_none)
                    .expect("one free column");
                Some((u, v))
            }
            len => {
                return Err(Error::InvalidMatching(format!(
                    "{len} pairs is neither perfect nor near-perfect for n = {n}"
                )))
            }
        };
        Ok(Matching {
            row_to_col,
            col_to_row,
            hole,
        })
    }

    pub fn n(&self) -> usize {
        self.row_to_col.len()
    }

    /// Number of matched pairs.
    pub fn len(&self) -> usize {
        if self.hole.is_some() {
            self.n() - 1
        } else {
            self.n()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> MatchingKind {
        match self.hole {
            None => MatchingKind::Perfect,
            Some(hole) => MatchingKind::NearPerfect { hole },
        }
    }

    #[inline]
    pub fn is_perfect(&self) -> bool {
        self.hole.is_none()
    }

    #[inline]
    pub fn hole(&self) -> Option<(usize, usize)> {
        self.hole
    }

    #[inline]
    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.row_to_col[row]
    }

    #[inline]
    pub fn row_of(&self, col: usize) -> Option<usize> {
        self.col_to_row[col]
    }

    /// Matched pairs in row order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(u, v)| v.map(|v| (u, v)))
    }

    /// True when every matched pair is a 1-entry of `m`.
    pub fn uses_only_edges_of(&self, m: &Matrix) -> bool {
        self.pairs().all(|(u, v)| m.get(u, v))
    }

    // Mutators below keep the hole in sync; callers guarantee preconditions.

    pub(crate) fn remove_pair(&mut self, u: usize, v: usize) {
        debug_assert!(self.is_perfect() && self.row_to_col[u] == Some(v));
        self.row_to_col[u] = None;
        self.col_to_row[v] = None;
        self.hole = Some((u, v));
    }

    pub(crate) fn fill_hole(&mut self) {
        let (u, v) = self.hole.take().expect("near-perfect matching");
        self.row_to_col[u] = Some(v);
        self.col_to_row[v] = Some(u);
    }

    /// `M + (u, col) - (w, col)` where `(u, v)` is the hole and `w` currently
    /// holds `col`. The new hole is `(w, v)`.
    pub(crate) fn shift_column(&mut self, col: usize) {
        let (u, v) = self.hole.expect("near-perfect matching");
        let w = self.col_to_row[col].expect("column is matched");
        self.row_to_col[w] = None;
        self.row_to_col[u] = Some(col);
        self.col_to_row[col] = Some(u);
        self.hole = Some((w, v));
    }

    /// `M + (row, v) - (row, z)` where `(u, v)` is the hole and `row`
    /// currently holds `z`. The new hole is `(u, z)`.
    pub(crate) fn shift_row(&mut self, row: usize) {
        let (u, v) = self.hole.expect("near-perfect matching");
        let z = self.row_to_col[row].expect("row is matched");
        self.col_to_row[z] = None;
        self.row_to_col[row] = Some(v);
        self.col_to_row[v] = Some(row);
        self.hole = Some((u, z));
    }
}

impl fmt::Debug for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs: Vec<_> = self.pairs().collect();
        match self.hole {
            None => write!(f, "Perfect{pairs:?}"),
            Some(h) => write!(f, "NearPerfect{pairs:?} hole {h:?}"),
        }
    }
}
