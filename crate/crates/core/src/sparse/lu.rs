//! Direct sparse LU factorization with row partial pivoting.
//!
//! The working rows are stored as contiguous envelope segments plus a
//! detached value for the final column. Saddle-point systems border an
//! almost-banded block with one dense row and column at the end; the
//! detached-tail convention keeps that border from inflating every row
//! segment to full length. A reverse Cuthill-McKee ordering of the
//! symmetrized pattern is used whenever it shrinks the envelope; very dense
//! nodes are held out of the ordering and eliminated last.

use crate::error::{Error, Result};
use crate::sparse::matrix::SparseMatrix;
use num_complex::Complex64;

/// Scalar admitted by the factorization: real or complex double precision.
pub trait LuScalar:
    Copy
    + std::fmt::Debug
    + Send
    + Sync
    + PartialEq
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn modulus(self) -> f64;
    fn from_real(x: f64) -> Self;
}

impl LuScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_real(x: f64) -> Self {
        x
    }
}

impl LuScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

/// Relative pivot floor: a pivot below `1e-14 * max |A|` is treated as an
/// exact singularity.
const PIVOT_FLOOR_REL: f64 = 1e-14;

/// Factorization statistics: fill-in, pivot range, growth and a cheap
/// condition estimate from `||A||_1` and triangular-solve growth.
#[derive(Debug, Clone)]
pub struct LuStats {
    pub n: usize,
    pub nnz_a: usize,
    pub nnz_factors: usize,
    pub min_pivot: f64,
    pub max_pivot: f64,
    /// max |U| / max |A|
    pub growth: f64,
    pub cond_estimate: f64,
    pub used_rcm: bool,
}

struct WorkRow<S> {
    /// Column of `seg[0]`; meaningless when `seg` is empty.
    base: usize,
    seg: Vec<S>,
    /// Value at the final column when it lies beyond the segment.
    tail: S,
    has_tail: bool,
}

impl<S: LuScalar> WorkRow<S> {
    fn get(&self, col: usize, n: usize) -> S {
        if self.has_tail && col == n - 1 {
            return self.tail;
        }
        if col >= self.base && col < self.base + self.seg.len() {
            self.seg[col - self.base]
        } else {
            S::zero()
        }
    }

    /// Grow the segment to cover `col` inclusive, folding the tail in when
    /// the segment reaches the final column.
    fn cover(&mut self, col: usize, n: usize) {
        if self.seg.is_empty() {
            self.base = col;
            self.seg.push(S::zero());
        } else if col >= self.base + self.seg.len() {
            self.seg.resize(col - self.base + 1, S::zero());
        }
        if self.has_tail && self.base + self.seg.len() == n {
            let t = self.tail;
            *self.seg.last_mut().unwrap() = t;
            self.has_tail = false;
        }
    }
}

struct URow<S> {
    /// Values from the pivot column onward.
    seg: Vec<S>,
    tail: S,
    has_tail: bool,
}

/// LU factors of a square sparse matrix, generic over the scalar.
pub struct GenericLu<S> {
    n: usize,
    /// Symmetric ordering, new index -> old index.
    order: Vec<usize>,
    /// Column j -> permuted row chosen as pivot.
    pivot_row: Vec<u32>,
    l_colptr: Vec<usize>,
    l_rows: Vec<u32>,
    l_vals: Vec<S>,
    u_rows: Vec<URow<S>>,
    // permuted matrix, for refinement and residuals
    b_row_ptr: Vec<usize>,
    b_col_idx: Vec<usize>,
    b_vals: Vec<S>,
    pub stats: LuStats,
}

impl<S: LuScalar> GenericLu<S> {
    /// Factorize from CSR parts. `order` maps new indices to old ones and is
    /// applied symmetrically.
    pub fn factorize_parts(
        n: usize,
        row_ptr: &[usize],
        col_idx: &[usize],
        vals: &[S],
        order: Vec<usize>,
        used_rcm: bool,
    ) -> Result<Self> {
        assert_eq!(row_ptr.len(), n + 1);
        assert_eq!(order.len(), n);
        let mut inv = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }

        // permuted matrix B = P A P^T in CSR
        let mut b_triplets: Vec<(usize, usize, S)> = Vec::with_capacity(vals.len());
        for old_i in 0..n {
            for t in row_ptr[old_i]..row_ptr[old_i + 1] {
                b_triplets.push((inv[old_i], inv[col_idx[t]], vals[t]));
            }
        }
        b_triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut b_row_ptr = vec![0usize; n + 1];
        let mut b_col_idx = Vec::with_capacity(b_triplets.len());
        let mut b_vals = Vec::with_capacity(b_triplets.len());
        for &(i, j, v) in &b_triplets {
            b_row_ptr[i + 1] += 1;
            b_col_idx.push(j);
            b_vals.push(v);
        }
        for i in 0..n {
            b_row_ptr[i + 1] += b_row_ptr[i];
        }

        let a_max = vals.iter().fold(0.0f64, |m, v| m.max(v.modulus()));
        let threshold = PIVOT_FLOOR_REL * a_max;

        // working rows
        let mut rows: Vec<WorkRow<S>> = Vec::with_capacity(n);
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n];
        for i in 0..n {
            let lo = b_row_ptr[i];
            let hi = b_row_ptr[i + 1];
            let cols = &b_col_idx[lo..hi];
            let rvals = &b_vals[lo..hi];
            let mut wr = WorkRow { base: 0, seg: Vec::new(), tail: S::zero(), has_tail: false };
            if !cols.is_empty() {
                let core_hi = if *cols.last().unwrap() == n - 1 && cols.len() > 1 {
                    cols.len() - 1
                } else {
                    cols.len()
                };
                if core_hi < cols.len() {
                    // final column detached unless contiguous with the core
                    let core_last = cols[core_hi - 1];
                    if n - 1 > core_last + 1 {
                        wr.tail = rvals[core_hi];
                        wr.has_tail = true;
                    }
                }
                let used = if wr.has_tail { core_hi } else { cols.len() };
                wr.base = cols[0];
                wr.seg = vec![S::zero(); cols[used - 1] - cols[0] + 1];
                for t in 0..used {
                    wr.seg[cols[t] - cols[0]] = rvals[t];
                }
                buckets[wr.base].push(i as u32);
            }
            rows.push(wr);
        }

        let mut active: Vec<u32> = Vec::new();
        let mut pivot_row = vec![0u32; n];
        let mut l_colptr = Vec::with_capacity(n + 1);
        let mut l_rows: Vec<u32> = Vec::new();
        let mut l_vals: Vec<S> = Vec::new();
        let mut u_rows: Vec<URow<S>> = Vec::with_capacity(n);
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        let mut u_max = 0.0f64;
        l_colptr.push(0);

        for j in 0..n {
            active.extend_from_slice(&buckets[j]);
            // partial pivoting: largest modulus in column j
            let mut best: Option<(usize, f64)> = None;
            for (pos, &r) in active.iter().enumerate() {
                let m = rows[r as usize].get(j, n).modulus();
                if best.map_or(true, |(_, bm)| m > bm) {
                    best = Some((pos, m));
                }
            }
            let (pos, piv_mod) = best.unwrap_or((usize::MAX, 0.0));
            if piv_mod <= threshold {
                return Err(Error::Singular { col: j, pivot: piv_mod, threshold });
            }
            let r_piv = active.swap_remove(pos) as usize;
            pivot_row[j] = r_piv as u32;
            min_pivot = min_pivot.min(piv_mod);
            max_pivot = max_pivot.max(piv_mod);

            let piv = std::mem::replace(
                &mut rows[r_piv],
                WorkRow { base: 0, seg: Vec::new(), tail: S::zero(), has_tail: false },
            );
            let pval = piv.get(j, n);
            let piv_end = piv.base + piv.seg.len();

            for &r in &active {
                let r = r as usize;
                let v = rows[r].get(j, n);
                if v.modulus() == 0.0 {
                    continue;
                }
                let m = v / pval;
                l_rows.push(r as u32);
                l_vals.push(m);
                let row = &mut rows[r];
                if piv_end > j + 1 {
                    row.cover(piv_end - 1, n);
                    let off_t = j + 1 - row.base;
                    let off_p = j + 1 - piv.base;
                    let len = piv_end - (j + 1);
                    let tseg = &mut row.seg[off_t..off_t + len];
                    let pseg = &piv.seg[off_p..off_p + len];
                    for (t, p) in tseg.iter_mut().zip(pseg) {
                        *t -= m * *p;
                    }
                }
                if piv.has_tail {
                    if !row.has_tail && row.base + row.seg.len() == n {
                        let last = row.seg.last_mut().unwrap();
                        *last -= m * piv.tail;
                    } else {
                        if !row.has_tail {
                            row.tail = S::zero();
                            row.has_tail = true;
                        }
                        row.tail -= m * piv.tail;
                    }
                }
            }
            l_colptr.push(l_rows.len());

            // store the U row from the pivot column onward; the pivot value
            // may live in the detached tail when j is the final column
            let (seg, tail, has_tail) = if j >= piv.base + piv.seg.len() || piv.seg.is_empty() {
                debug_assert!(piv.has_tail && j == n - 1);
                (vec![piv.tail], S::zero(), false)
            } else {
                (piv.seg[j - piv.base..].to_vec(), piv.tail, piv.has_tail)
            };
            for v in &seg {
                u_max = u_max.max(v.modulus());
            }
            if has_tail {
                u_max = u_max.max(tail.modulus());
            }
            u_rows.push(URow { seg, tail, has_tail });
        }

        let nnz_factors =
            l_vals.len() + u_rows.iter().map(|u| u.seg.len() + usize::from(u.has_tail)).sum::<usize>();
        let stats = LuStats {
            n,
            nnz_a: vals.len(),
            nnz_factors,
            min_pivot,
            max_pivot,
            growth: if a_max > 0.0 { u_max / a_max } else { 0.0 },
            cond_estimate: 0.0,
            used_rcm,
        };

        let mut lu = GenericLu {
            n,
            order,
            pivot_row,
            l_colptr,
            l_rows,
            l_vals,
            u_rows,
            b_row_ptr,
            b_col_idx,
            b_vals,
            stats,
        };

        // condition estimate: ||A||_1 times the growth of one triangular
        // solve on an alternating-sign right-hand side
        let mut norm1 = vec![0.0f64; n];
        for i in 0..n {
            for t in lu.b_row_ptr[i]..lu.b_row_ptr[i + 1] {
                norm1[lu.b_col_idx[t]] += lu.b_vals[t].modulus();
            }
        }
        let a_norm1 = norm1.into_iter().fold(0.0, f64::max);
        let ones: Vec<S> =
            (0..n).map(|i| S::from_real(if i % 2 == 0 { 1.0 } else { -1.0 })).collect();
        let x = lu.solve_permuted_raw(&ones);
        let x_inf = x.iter().fold(0.0f64, |m, v| m.max(v.modulus()));
        lu.stats.cond_estimate = a_norm1 * x_inf;
        Ok(lu)
    }

    /// Triangular solves in the permuted space without refinement.
    fn solve_permuted_raw(&self, b_perm: &[S]) -> Vec<S> {
        let n = self.n;
        let mut work = b_perm.to_vec();
        let mut y = vec![S::zero(); n];
        for j in 0..n {
            let v = work[self.pivot_row[j] as usize];
            y[j] = v;
            for t in self.l_colptr[j]..self.l_colptr[j + 1] {
                work[self.l_rows[t] as usize] -= self.l_vals[t] * v;
            }
        }
        let mut x = vec![S::zero(); n];
        for j in (0..n).rev() {
            let u = &self.u_rows[j];
            let mut acc = y[j];
            for (t, &uv) in u.seg.iter().enumerate().skip(1) {
                acc -= uv * x[j + t];
            }
            if u.has_tail {
                acc -= u.tail * x[n - 1];
            }
            x[j] = acc / u.seg[0];
        }
        x
    }

    fn matvec_permuted(&self, x: &[S], y: &mut [S]) {
        for i in 0..self.n {
            let mut acc = S::zero();
            for t in self.b_row_ptr[i]..self.b_row_ptr[i + 1] {
                acc += self.b_vals[t] * x[self.b_col_idx[t]];
            }
            y[i] = acc;
        }
    }

    /// Solve `A x = b` with one step of iterative refinement; returns the
    /// solution and the relative residual `||Ax - b||_2 / ||b||_2`.
    pub fn solve(&self, b: &[S]) -> (Vec<S>, f64) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let b_perm: Vec<S> = self.order.iter().map(|&old| b[old]).collect();
        let mut x = self.solve_permuted_raw(&b_perm);

        let mut r = vec![S::zero(); n];
        self.matvec_permuted(&x, &mut r);
        for i in 0..n {
            r[i] = b_perm[i] - r[i];
        }
        let dx = self.solve_permuted_raw(&r);
        for i in 0..n {
            x[i] += dx[i];
        }

        self.matvec_permuted(&x, &mut r);
        let mut rr = 0.0f64;
        let mut bb = 0.0f64;
        for i in 0..n {
            let d = r[i] - b_perm[i];
            rr += d.modulus() * d.modulus();
            bb += b_perm[i].modulus() * b_perm[i].modulus();
        }
        let rel = if bb > 0.0 { (rr / bb).sqrt() } else { rr.sqrt() };

        let mut out = vec![S::zero(); n];
        for (new, &old) in self.order.iter().enumerate() {
            out[old] = x[new];
        }
        (out, rel)
    }
}

/// Choose between the natural ordering and reverse Cuthill-McKee on the
/// symmetrized pattern, by envelope size. Nodes of unusually high degree are
/// kept out of the RCM sweep and eliminated last; the final column is free
/// because its storage is detached.
fn choose_ordering(a: &SparseMatrix) -> (Vec<usize>, bool) {
    let n = a.n_rows();
    // symmetrized adjacency
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j as u32);
            adj[j].push(i as u32);
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let avg_deg = adj.iter().map(|l| l.len()).sum::<usize>() as f64 / n.max(1) as f64;
    let dense_cut = (4.0 * (avg_deg + 1.0)).max(32.0) as usize;

    let envelope = |order: &[usize]| -> usize {
        let mut inv = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let mut total = 0usize;
        for old_i in 0..n {
            let (cols, _) = a.row(old_i);
            let mut lo = usize::MAX;
            let mut hi = 0usize;
            let mut tail = 0usize;
            let i_new = inv[old_i];
            for &j in cols {
                let jn = inv[j];
                if jn == n - 1 && n > 1 {
                    tail = 1;
                    continue;
                }
                lo = lo.min(jn.min(i_new));
                hi = hi.max(jn.max(i_new));
            }
            if lo != usize::MAX {
                total += hi - lo + 1;
            }
            total += tail;
        }
        total
    };

    let natural: Vec<usize> = (0..n).collect();
    let nat_env = envelope(&natural);

    // RCM over the non-dense nodes
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let dense: Vec<usize> = (0..n).filter(|&i| adj[i].len() >= dense_cut).collect();
    for &d in &dense {
        visited[d] = true;
    }
    let mut queue = std::collections::VecDeque::new();
    loop {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (adj[i].len(), i));
        let Some(start) = start else { break };
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = adj[u]
                .iter()
                .map(|&v| v as usize)
                .filter(|&v| !visited[v])
                .collect();
            nb.sort_by_key(|&v| (adj[v].len(), v));
            for v in nb {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order.extend_from_slice(&dense);
    debug_assert_eq!(order.len(), n);
    let rcm_env = envelope(&order);

    if rcm_env < nat_env {
        (order, true)
    } else {
        (natural, false)
    }
}

/// LU factors of a real sparse matrix together with the original matrix,
/// kept for refinement and residual reporting.
pub struct LuFactors {
    inner: GenericLu<f64>,
    a: SparseMatrix,
}

/// Solution of a linear system with its achieved relative residual.
#[derive(Debug, Clone)]
pub struct LuSolve {
    pub x: Vec<f64>,
    pub rel_residual: f64,
}

/// Factorize a square real sparse matrix with partial pivoting and a
/// fill-reducing ordering.
pub fn lu_factorize(a: &SparseMatrix) -> Result<LuFactors> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::ShapeMismatch(format!(
            "LU needs a square matrix, got {} x {}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let (order, used_rcm) = choose_ordering(a);
    let n = a.n_rows();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(a.nnz());
    let mut vals = Vec::with_capacity(a.nnz());
    row_ptr.push(0);
    for i in 0..n {
        let (cols, vs) = a.row(i);
        col_idx.extend_from_slice(cols);
        vals.extend_from_slice(vs);
        row_ptr.push(col_idx.len());
    }
    let inner = GenericLu::factorize_parts(n, &row_ptr, &col_idx, &vals, order, used_rcm)?;
    Ok(LuFactors { inner, a: a.clone() })
}

impl LuFactors {
    pub fn stats(&self) -> &LuStats {
        &self.inner.stats
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.a
    }

    /// Solve with one refinement step; the reported residual is relative to
    /// `||b||_2`.
    pub fn solve(&self, b: &[f64]) -> Result<LuSolve> {
        if b.len() != self.inner.n {
            return Err(Error::ShapeMismatch(format!(
                "rhs length {} does not match system size {}",
                b.len(),
                self.inner.n
            )));
        }
        let (x, rel_residual) = self.inner.solve(b);
        Ok(LuSolve { x, rel_residual })
    }
}

/// Complex LU of `A - shift I` for a real matrix `A`; used by the
/// shift-invert eigensolver.
pub fn lu_factorize_shifted_complex(
    a: &SparseMatrix,
    shift: Complex64,
) -> Result<GenericLu<Complex64>> {
    assert_eq!(a.n_rows(), a.n_cols());
    let n = a.n_rows();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx: Vec<usize> = Vec::with_capacity(a.nnz() + n);
    let mut vals: Vec<Complex64> = Vec::with_capacity(a.nnz() + n);
    row_ptr.push(0);
    for i in 0..n {
        let (cols, vs) = a.row(i);
        let mut put_diag = false;
        for (&j, &v) in cols.iter().zip(vs) {
            if !put_diag && j >= i {
                if j == i {
                    col_idx.push(i);
                    vals.push(Complex64::new(v, 0.0) - shift);
                    put_diag = true;
                    continue;
                }
                col_idx.push(i);
                vals.push(-shift);
                put_diag = true;
            }
            col_idx.push(j);
            vals.push(Complex64::new(v, 0.0));
        }
        if !put_diag {
            col_idx.push(i);
            vals.push(-shift);
        }
        row_ptr.push(col_idx.len());
    }
    // ordering from the real pattern
    let (order, used_rcm) = choose_ordering(a);
    GenericLu::factorize_parts(n, &row_ptr, &col_idx, &vals, order, used_rcm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn dense_n(n: usize, entries: &[(usize, usize, f64)]) -> SparseMatrix {
        SparseMatrix::from_triplets(n, n, entries).unwrap()
    }

    #[test]
    fn identity_no_fill() {
        let a = SparseMatrix::identity(5);
        let f = lu_factorize(&a).unwrap();
        assert_eq!(f.stats().nnz_factors, 5);
        assert_eq!(f.stats().min_pivot, 1.0);
        let s = f.solve(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(s.x, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.rel_residual, 0.0);
    }

    #[test]
    fn permutation_matrix_pivots() {
        let a = dense_n(2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        let f = lu_factorize(&a).unwrap();
        let s = f.solve(&[3.0, 7.0]).unwrap();
        assert!((s.x[0] - 7.0).abs() < 1e-15);
        assert!((s.x[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = dense_n(3, &[(0, 0, 2.0), (1, 1, 3.0), (2, 2, 4.0), (0, 2, 1.0)]);
        let f = lu_factorize(&a).unwrap();
        let s = f.solve(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn singular_reported() {
        let a = dense_n(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        match lu_factorize(&a) {
            Err(Error::Singular { col, .. }) => assert_eq!(col, 1),
            other => panic!("expected singular, got {:?}", other.map(|_| ())),
        }
        // structurally empty column
        let b = dense_n(2, &[(0, 0, 1.0), (1, 0, 1.0)]);
        assert!(matches!(lu_factorize(&b), Err(Error::Singular { .. })));
    }

    #[test]
    fn random_band_systems_accurate() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for trial in 0..20usize {
            let n = 100usize;
            let bw = 3 + trial % 5;
            let mut t = Vec::new();
            for i in 0..n {
                for j in i.saturating_sub(bw)..(i + bw + 1).min(n) {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    t.push((i, j, v));
                }
                t.push((i, i, 8.0)); // diagonally heavy
            }
            let a = dense_n(n, &t);
            let f = lu_factorize(&a).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = f.solve(&b).unwrap();
            assert!(s.rel_residual <= 1e-12, "residual {}", s.rel_residual);
            // check against the true solution via matvec
            let mut ax = vec![0.0; n];
            a.matvec(&s.x, &mut ax);
            let err: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let bn: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
            assert!(err / bn <= 1e-12);
        }
    }

    #[test]
    fn bordered_system_matches_dense_oracle() {
        // band block plus dense last row/column, solved against nalgebra
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i, 2.0 + i as f64 * 0.1));
            if i + 1 < n - 1 {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, 0.5));
            }
        }
        for k in 0..6 {
            t.push((k, n - 1, 1.0 + k as f64));
            t.push((n - 1, k, 1.0 + k as f64));
        }
        let a = dense_n(n, &t);
        let f = lu_factorize(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = f.solve(&b).unwrap();
        let d = a.to_dense();
        let xd = d.lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
        for i in 0..n {
            assert!((s.x[i] - xd[i]).abs() < 1e-10, "i={i}: {} vs {}", s.x[i], xd[i]);
        }
        assert!(s.rel_residual <= 1e-13);
    }

    #[test]
    fn arrowhead_first_column_dense() {
        // dense FIRST column exercises segments that stretch left of the band
        let n = 12;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            t.push((i, 0, 1.0));
            t.push((0, i, 1.0));
        }
        let a = dense_n(n, &t);
        let f = lu_factorize(&a).unwrap();
        let b = vec![1.0; n];
        let s = f.solve(&b).unwrap();
        assert!(s.rel_residual < 1e-13);
        let d = a.to_dense();
        let xd = d.lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
        for i in 0..n {
            assert!((s.x[i] - xd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_shift_factorization() {
        use num_complex::Complex64 as C;
        let a = dense_n(2, &[(0, 1, -1.0), (1, 0, 1.0)]);
        // A - 0.5i has eigenvalues +-i - 0.5i: nonsingular
        let f = lu_factorize_shifted_complex(&a, C::new(0.0, 0.5)).unwrap();
        let b = vec![C::new(1.0, 0.0), C::new(0.0, 1.0)];
        let (x, rel) = f.solve(&b);
        assert!(rel < 1e-14);
        // verify (A - 0.5 i) x = b by hand: rows [ -0.5i, -1 ; 1, -0.5i ]
        let r0 = C::new(0.0, -0.5) * x[0] - x[1] - b[0];
        let r1 = x[0] + C::new(0.0, -0.5) * x[1] - b[1];
        assert!(r0.norm() < 1e-14 && r1.norm() < 1e-14);
    }

    #[test]
    fn condition_estimate_scales() {
        let well = dense_n(2, &[(0, 0, 1.0), (1, 1, 1.0)]);
        let ill = dense_n(2, &[(0, 0, 1.0), (1, 1, 1e-9)]);
        let cw = lu_factorize(&well).unwrap().stats().cond_estimate;
        let ci = lu_factorize(&ill).unwrap().stats().cond_estimate;
        assert!(ci > 1e6 * cw);
    }
}
