//! Dense complex linear algebra for small matrices.
//!
//! Everything here is sized for precoding work (at most a few dozen rows and
//! columns), so products are direct triple loops and eigenproblems are solved
//! with cyclic Jacobi rotations. The real symmetric solver is also used for
//! the covariance of vectorized matrices, which is larger (hundreds of rows).

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Jacobi stops once the off-diagonal Frobenius mass falls below this
/// fraction of the input's Frobenius norm.
pub const JACOBI_TOL: f64 = 1e-12;

/// Default relative gap under which eigenvalues join the top eigenspace.
pub const DEFAULT_DEGENERACY_RTOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 100;
const HERMITIAN_RTOL: f64 = 1e-10;

/// Row-major dense complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.4}{:+.4}j ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, checking length and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidDimension(format!(
                "{} entries supplied for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::contract(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Stacks equal-length vectors as rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDimension("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Places vectors side by side as columns.
    pub fn from_columns(n_rows: usize, columns: &[Vec<Complex64>]) -> Result<Self> {
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::InvalidDimension("column length mismatch".into()));
        }
        Ok(Self::from_fn(n_rows, columns.len(), |i, j| columns[j][i]))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.data[i * self.cols + j] = z;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::InvalidDimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (l, &a) in lhs_row.iter().enumerate() {
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(l)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(Error::InvalidDimension(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self^H * self`.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut out = Self::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for (i, ri) in row.iter().enumerate() {
                let ci = ri.conj();
                for (o, rj) in out.data[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += ci * rj;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.same_shape(rhs)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        self.same_shape(rhs)?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Entrywise moduli, row-major.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    fn same_shape(&self, rhs: &Self) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::InvalidDimension(format!(
                "shape {:?} vs {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        Ok(())
    }
}

/// Unitary DFT matrix: entry `(a, b)` is `exp(-j 2π a b / n) / √n`.
pub fn dft_matrix(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("DFT size must be at least 1".into()));
    }
    let norm = 1.0 / (n as f64).sqrt();
    Ok(ComplexMatrix::from_fn(n, n, |a, b| {
        // reduce a*b mod n first so the angle stays small
        let k = (a * b) % n;
        Complex64::from_polar(norm, -2.0 * PI * k as f64 / n as f64)
    }))
}

/// Cyclic shift by `m` rows and `n` columns: output `(i, j)` is input
/// `(i - m mod rows, j - n mod cols)`. Positive `m` moves rows toward larger
/// indices.
pub fn cyclic_shift(m: &ComplexMatrix, row_shift: i64, col_shift: i64) -> ComplexMatrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return m.clone();
    }
    let dr = row_shift.rem_euclid(rows as i64) as usize;
    let dc = col_shift.rem_euclid(cols as i64) as usize;
    ComplexMatrix::from_fn(rows, cols, |i, j| m.get((i + rows - dr) % rows, (j + cols - dc) % cols))
}

/// Eigendecomposition of a Hermitian matrix, grouped around its top eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub max_eigenvalue: f64,
    /// Orthonormal basis (as columns) of the top eigenspace.
    pub eigenbasis: ComplexMatrix,
    /// All eigenvalues, descending.
    pub all_eigenvalues: Vec<f64>,
    /// All eigenvectors as columns, in the order of `all_eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

impl EigenResult {
    pub fn eigenspace_dim(&self) -> usize {
        self.eigenbasis.cols()
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Eigenvalues within `degeneracy_rtol * |λ_max|` of the largest one are
/// treated as the same eigenvalue and their eigenvectors form `eigenbasis`.
pub fn hermitian_eig(m: &ComplexMatrix, degeneracy_rtol: f64) -> Result<EigenResult> {
    if !m.is_square() {
        return Err(Error::contract(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if n == 0 {
        return Err(Error::InvalidDimension("empty matrix".into()));
    }
    let norm = m.frobenius_norm();
    let skew = m.sub(&m.adjoint())?.frobenius_norm();
    if skew > HERMITIAN_RTOL * norm {
        return Err(Error::contract(format!(
            "matrix is not Hermitian (‖M - M^H‖ = {skew:e}, ‖M‖ = {norm:e})"
        )));
    }

    let mut a = m.data.clone();
    // symmetrize exactly so rotations see a true Hermitian matrix
    for i in 0..n {
        a[i * n + i] = Complex64::new(a[i * n + i].re, 0.0);
        for j in i + 1..n {
            let avg = (a[i * n + j] + a[j * n + i].conj()) * 0.5;
            a[i * n + j] = avg;
            a[j * n + i] = avg.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n).data;

    let off = |a: &[Complex64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let tol = JACOBI_TOL * norm;
    for _ in 0..MAX_SWEEPS {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let b = a[p * n + q];
                let mag = b.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = b / mag; // e^{iφ}
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let (t, c, s) = rotation(app, aqq, mag);
                let ph_conj = phase.conj();
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q] * ph_conj;
                    let new_kp = akp * c - akq * s;
                    let new_kq = akp * s + akq * c;
                    a[k * n + p] = new_kp;
                    a[k * n + q] = new_kq;
                    a[p * n + k] = new_kp.conj();
                    a[q * n + k] = new_kq.conj();
                }
                a[p * n + p] = Complex64::new(app - t * mag, 0.0);
                a[q * n + q] = Complex64::new(aqq + t * mag, 0.0);
                a[p * n + q] = Complex64::new(0.0, 0.0);
                a[q * n + p] = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q] * ph_conj;
                    v[k * n + p] = vkp * c - vkq * s;
                    v[k * n + q] = vkp * s + vkq * c;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    let order = descending_order(&diag);
    let all_eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    let max_eigenvalue = all_eigenvalues[0];
    let cutoff = degeneracy_rtol * max_eigenvalue.abs();
    let dim = all_eigenvalues
        .iter()
        .take_while(|&&l| max_eigenvalue - l <= cutoff)
        .count();
    let eigenbasis = ComplexMatrix::from_fn(n, dim, |r, c| eigenvectors.get(r, c));
    Ok(EigenResult {
        max_eigenvalue,
        eigenbasis,
        all_eigenvalues,
        eigenvectors,
    })
}

/// Eigendecomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Real symmetric eigendecomposition by cyclic Jacobi rotations.
/// `m` is row-major `n x n`.
pub fn symmetric_eig(m: &[f64], n: usize) -> Result<SymmetricEigen> {
    if m.len() != n * n || n == 0 {
        return Err(Error::InvalidDimension(format!(
            "{} entries for a {n}x{n} symmetric matrix",
            m.len()
        )));
    }
    let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut asym = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            asym += 2.0 * (m[i * n + j] - m[j * n + i]).powi(2);
        }
    }
    if asym.sqrt() > HERMITIAN_RTOL * norm {
        return Err(Error::contract("matrix is not symmetric"));
    }

    let mut a = m.to_vec();
    // vt[j*n..] holds eigenvector j so rotations touch contiguous rows
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    let tol = JACOBI_TOL * norm;
    // entries below this cannot keep the off-diagonal mass above `tol`
    let skip = tol / n as f64;
    // round-robin ordering: each round is a set of disjoint pairs, so their
    // rotations commute and are applied together
    let players = n + n % 2;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for round in 0..players - 1 {
            let seat = |j: usize| if j == 0 { 0 } else { 1 + (j - 1 + round) % (players - 1) };
            let rotations: Vec<Rotation> = (0..players / 2)
                .filter_map(|j| {
                    let (x, y) = (seat(j), seat(players - 1 - j));
                    let (p, q) = (x.min(y), x.max(y));
                    if q >= n {
                        return None;
                    }
                    let apq = a[p * n + q];
                    if apq.abs() <= skip {
                        return None;
                    }
                    let (app, aqq) = (a[p * n + p], a[q * n + q]);
                    let (t, c, s) = rotation(app, aqq, apq);
                    Some(Rotation {
                        p,
                        q,
                        c,
                        s,
                        new_pp: app - t * apq,
                        new_qq: aqq + t * apq,
                    })
                })
                .collect();
            if rotations.is_empty() {
                continue;
            }
            rotate_row_pairs(&mut a, n, &rotations);
            rotate_row_pairs(&mut vt, n, &rotations);
            a.par_chunks_mut(n).for_each(|row| {
                for r in &rotations {
                    let (xp, xq) = (row[r.p], row[r.q]);
                    row[r.p] = r.c * xp - r.s * xq;
                    row[r.q] = r.s * xp + r.c * xq;
                }
            });
            for r in &rotations {
                a[r.p * n + r.p] = r.new_pp;
                a[r.q * n + r.q] = r.new_qq;
                a[r.p * n + r.q] = 0.0;
                a[r.q * n + r.p] = 0.0;
            }
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let order = descending_order(&diag);
    Ok(SymmetricEigen {
        values: order.iter().map(|&i| diag[i]).collect(),
        vectors: order.iter().map(|&i| vt[i * n..(i + 1) * n].to_vec()).collect(),
    })
}

struct Rotation {
    p: usize,
    q: usize,
    c: f64,
    s: f64,
    new_pp: f64,
    new_qq: f64,
}

/// Applies `row_p <- c row_p - s row_q`, `row_q <- s row_p + c row_q` for
/// disjoint pairs, in parallel.
fn rotate_row_pairs(data: &mut [f64], n: usize, rotations: &[Rotation]) {
    let mut rows: Vec<Option<&mut [f64]>> = data.chunks_mut(n).map(Some).collect();
    let mut pairs: Vec<(&mut [f64], &mut [f64], f64, f64)> = rotations
        .iter()
        .map(|r| {
            let rp = rows[r.p].take().expect("disjoint rotation pairs");
            let rq = rows[r.q].take().expect("disjoint rotation pairs");
            (rp, rq, r.c, r.s)
        })
        .collect();
    pairs.par_iter_mut().for_each(|(rp, rq, c, s)| {
        for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
            let (xp, xq) = (*x, *y);
            *x = *c * xp - *s * xq;
            *y = *s * xp + *c * xq;
        }
    });
}

/// Jacobi rotation `(t, c, s)` annihilating the off-diagonal entry `apq` of
/// the real 2x2 block `[[app, apq], [apq, aqq]]`.
fn rotation(app: f64, aqq: f64, apq: f64) -> (f64, f64, f64) {
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    (t, c, t * c)
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    order
}

/// Euclidean norm of a complex vector.
pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
