//! Compressed sparse row storage with triplet assembly and MatrixMarket
//! import/export.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Sparse matrix in compressed-row form. Column indices are sorted and
/// deduplicated within each row; all stored values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Assemble from triplets; duplicate entries are summed, exact zeros are
    /// kept out of the pattern.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::ShapeMismatch(format!(
                    "triplet ({i}, {j}) outside {n_rows} x {n_cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Assembly(format!("non-finite entry at ({i}, {j})")));
            }
        }
        let mut counts = vec![0usize; n_rows + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut order: Vec<u32> = (0..triplets.len() as u32).collect();
        order.sort_unstable_by_key(|&t| {
            let (i, j, _) = triplets[t as usize];
            (i, j)
        });

        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row = 0usize;
        for &t in &order {
            let (i, j, v) = triplets[t as usize];
            while row < i {
                row_ptr.push(col_idx.len());
                row += 1;
            }
            if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                vals.push(v);
            }
        }
        while row < n_rows {
            row_ptr.push(col_idx.len());
            row += 1;
        }
        let mut m = SparseMatrix { n_rows, n_cols, row_ptr, col_idx, vals };
        m.drop_explicit_zeros();
        Ok(m)
    }

    fn drop_explicit_zeros(&mut self) {
        if !self.vals.iter().any(|&v| v == 0.0) {
            return;
        }
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for i in 0..self.n_rows {
            for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.vals[t] != 0.0 {
                    col_idx.push(self.col_idx[t]);
                    vals.push(self.vals[t]);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.vals = vals;
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.vals[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(t) => vals[t],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    /// y = A^T x
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_rows);
        assert_eq!(y.len(), self.n_cols);
        y.fill(0.0);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let xi = x[i];
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<(usize, usize, f64)> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        SparseMatrix::from_triplets(self.n_cols, self.n_rows, &t).expect("transpose of valid matrix")
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let mut col_sums = vec![0.0f64; self.n_cols];
        for (_, j, v) in self.triplets() {
            col_sums[j] += v.abs();
        }
        col_sums.into_iter().fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// A - shift I (square matrices).
    pub fn shifted(&self, shift: f64) -> SparseMatrix {
        assert_eq!(self.n_rows, self.n_cols);
        let mut t: Vec<(usize, usize, f64)> = self.triplets().collect();
        for i in 0..self.n_rows {
            t.push((i, i, -shift));
        }
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, &t).expect("shift of valid matrix")
    }

    /// Extract the submatrix with the given rows and columns (in the given
    /// order).
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut t = Vec::new();
        for (new_i, &old_i) in rows.iter().enumerate() {
            let (cs, vs) = self.row(old_i);
            for (&j, &v) in cs.iter().zip(vs) {
                if col_map[j] != usize::MAX {
                    t.push((new_i, col_map[j], v));
                }
            }
        }
        SparseMatrix::from_triplets(rows.len(), cols.len(), &t).expect("restriction of valid matrix")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// Write in MatrixMarket coordinate format (1-based indices).
    pub fn write_matrix_market(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }

    pub fn write_matrix_market_path(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_matrix_market(&mut f)
    }

    pub fn read_matrix_market(r: impl Read) -> Result<SparseMatrix> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty MatrixMarket file".into()))??;
        let h = header.to_lowercase();
        if !h.starts_with("%%matrixmarket matrix coordinate real") {
            return Err(Error::Parse(format!("unsupported MatrixMarket header: {header}")));
        }
        let mut dims: Option<(usize, usize, usize)> = None;
        let mut triplets = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let mut it = line.split_whitespace();
            if dims.is_none() {
                let nr = parse_field(it.next(), "rows")?;
                let nc = parse_field(it.next(), "cols")?;
                let nz = parse_field(it.next(), "nnz")?;
                dims = Some((nr, nc, nz));
            } else {
                let i: usize = parse_field(it.next(), "row index")?;
                let j: usize = parse_field(it.next(), "col index")?;
                let v: f64 = it
                    .next()
                    .ok_or_else(|| Error::Parse("missing value field".into()))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad value: {e}")))?;
                if i == 0 || j == 0 {
                    return Err(Error::Parse("MatrixMarket indices are 1-based".into()));
                }
                triplets.push((i - 1, j - 1, v));
            }
        }
        let (nr, nc, nz) = dims.ok_or_else(|| Error::Parse("missing dimensions line".into()))?;
        if triplets.len() != nz {
            return Err(Error::Parse(format!(
                "declared {nz} entries but found {}",
                triplets.len()
            )));
        }
        SparseMatrix::from_triplets(nr, nc, &triplets)
    }

    pub fn read_matrix_market_path(path: &Path) -> Result<SparseMatrix> {
        Self::read_matrix_market(std::fs::File::open(path)?)
    }
}

fn parse_field(field: Option<&str>, what: &str) -> Result<usize> {
    field
        .ok_or_else(|| Error::Parse(format!("missing {what} field")))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_and_sort() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            &[(1, 2, 4.0), (0, 1, 1.0), (1, 2, -1.0), (0, 0, 2.0)],
        )
        .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 2), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
        // cancellation to exact zero drops the entry
        let z = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, -1.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(z.nnz(), 1);
    }

    #[test]
    fn rejects_bad_triplets() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn matvec_and_transpose() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -3.0)]).unwrap();
        let mut y = vec![0.0; 2];
        m.matvec(&[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![3.0, -3.0]);
        let mut z = vec![0.0; 3];
        m.matvec_transpose(&[1.0, 2.0], &mut z);
        assert_eq!(z, vec![1.0, -6.0, 2.0]);
        assert_eq!(m.transpose().get(2, 0), 2.0);
        assert_eq!(m.norm_1(), 3.0);
        assert_eq!(m.norm_inf(), 3.0);
        assert_eq!(m.norm_max(), 3.0);
    }

    #[test]
    fn restrict_blocks() {
        let m = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (0, 2, 5.0)],
        )
        .unwrap();
        let b = m.restrict(&[0, 2], &[0, 2]);
        assert_eq!(b.n_rows(), 2);
        assert_eq!(b.get(0, 0), 1.0);
        assert_eq!(b.get(0, 1), 5.0);
        assert_eq!(b.get(1, 1), 3.0);
    }

    #[test]
    fn matrix_market_roundtrip() {
        let m = SparseMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 1.5), (2, 1, -2.25e-8), (1, 0, 3.0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_matrix_market(&mut buf).unwrap();
        let back = SparseMatrix::read_matrix_market(&buf[..]).unwrap();
        assert_eq!(m, back);
    }
}
