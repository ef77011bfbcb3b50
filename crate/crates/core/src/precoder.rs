//! Per-subband precoding vectors and eigenspace-projection alignment.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::channelgen::{keyed_rng, ChannelSample};
use crate::error::{Error, Result};
use crate::numkit::{self, ComplexMatrix, DEFAULT_DEGENERACY_RTOL};

/// Projections shorter than this fraction of the reference norm are treated
/// as orthogonal to the eigenspace.
pub const PROJECTION_FLOOR: f64 = 1e-12;

/// `K x N_t` matrix whose row `k` is the unit-norm precoder of subband `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    matrix: ComplexMatrix,
    eigenvalues: Vec<f64>,
}

impl PrecodingMatrix {
    pub fn new(matrix: ComplexMatrix, eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.len() != matrix.rows() {
            return Err(Error::InvalidDimension(format!(
                "{} eigenvalues for {} subbands",
                eigenvalues.len(),
                matrix.rows()
            )));
        }
        if let Some(k) = eigenvalues.iter().position(|&l| l.is_nan() || l < 0.0) {
            return Err(Error::contract(format!("negative eigenvalue in subband {k}")));
        }
        for k in 0..matrix.rows() {
            let n = numkit::norm(matrix.row(k));
            if (n - 1.0).abs() > 1e-10 {
                return Err(Error::contract(format!("row {k} has norm {n}, expected 1")));
            }
        }
        Ok(Self { matrix, eigenvalues })
    }

    pub fn k_subbands(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_t(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        self.matrix.row(k)
    }
}

/// Power gain and orthonormal basis (columns) of the top eigenspace of
/// `H^H H`.
#[derive(Debug, Clone)]
pub struct SubbandEigenspace {
    pub eigenvalue: f64,
    pub basis: ComplexMatrix,
}

/// Top eigenspace of `H^H H` for one subband.
///
/// When `N_r < N_t` the decomposition runs on the small Gram matrix `H H^H`;
/// for `λ > 0` its eigenvectors `u` map onto those of `H^H H` as
/// `H^H u / √λ`.
pub fn subband_eigenspace(h: &ComplexMatrix, subband: usize) -> Result<SubbandEigenspace> {
    if h.frobenius_norm() == 0.0 {
        return Err(Error::DegenerateChannel { subband });
    }
    let (n_r, n_t) = h.shape();
    if n_r >= n_t {
        let eig = numkit::hermitian_eig(&h.gram(), DEFAULT_DEGENERACY_RTOL)?;
        return Ok(SubbandEigenspace {
            eigenvalue: eig.max_eigenvalue.max(0.0),
            basis: eig.eigenbasis,
        });
    }
    let small = h.matmul(&h.adjoint())?;
    let eig = numkit::hermitian_eig(&small, DEFAULT_DEGENERACY_RTOL)?;
    let lambda = eig.max_eigenvalue;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::DegenerateChannel { subband });
    }
    let h_adj = h.adjoint();
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(eig.eigenspace_dim());
    for c in 0..eig.eigenspace_dim() {
        let mut col = h_adj.matvec(&eig.eigenbasis.column(c))?;
        // modified Gram-Schmidt against the columns kept so far
        for prev in &columns {
            let proj = numkit::inner(prev, &col);
            for (x, p) in col.iter_mut().zip(prev) {
                *x -= proj * p;
            }
        }
        let n = numkit::norm(&col);
        if n > 0.0 {
            columns.push(col.into_iter().map(|z| z / n).collect());
        }
    }
    Ok(SubbandEigenspace {
        eigenvalue: lambda,
        basis: ComplexMatrix::from_columns(n_t, &columns)?,
    })
}

/// Rotates `v` so its largest-magnitude entry (first on ties) is real and
/// non-negative.
pub fn canonical_gauge(v: &mut [Complex64]) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag > 0.0 {
        let rot = v[best].conj() / best_mag;
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

/// Dominant eigenvector of every subband, in canonical gauge.
pub fn dominant_eigenvectors(sample: &ChannelSample) -> Result<PrecodingMatrix> {
    let n_t = sample.config.n_t();
    let mut rows = Vec::with_capacity(sample.subbands.len());
    let mut eigenvalues = Vec::with_capacity(sample.subbands.len());
    for (k, h) in sample.subbands.iter().enumerate() {
        let space = subband_eigenspace(h, k)?;
        let mut w = space.basis.column(0);
        debug_assert_eq!(w.len(), n_t);
        canonical_gauge(&mut w);
        rows.push(w);
        eigenvalues.push(space.eigenvalue);
    }
    PrecodingMatrix::new(ComplexMatrix::from_rows(&rows)?, eigenvalues)
}

/// Multiplies each row by an independent uniform unit phase drawn from a
/// stream keyed by `(seed, sample_index)`. Emulates the arbitrary phase an
/// eigensolver may return.
pub fn random_gauge(pm: &PrecodingMatrix, seed: u64, sample_index: u64) -> PrecodingMatrix {
    let mut rng = keyed_rng(seed, sample_index, u64::MAX);
    let mut m = pm.matrix.clone();
    for k in 0..m.rows() {
        let rot = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
        for z in m.row_mut(k) {
            *z *= rot;
        }
    }
    PrecodingMatrix {
        matrix: m,
        eigenvalues: pm.eigenvalues.clone(),
    }
}

/// Result of eigenspace-projection alignment.
#[derive(Debug, Clone)]
pub struct JointOptimized {
    pub precoding: PrecodingMatrix,
    /// `true` where the reference was orthogonal to the eigenspace and the
    /// input row was kept.
    pub fallback: Vec<bool>,
}

/// Replaces each precoder by the normalized projection of the reference
/// channel vector (transpose of receive-antenna row 0) onto its eigenspace.
pub fn eig_joint_optimize(sample: &ChannelSample, pm: &PrecodingMatrix) -> Result<JointOptimized> {
    eig_joint_optimize_with_reference(sample, pm, 0)
}

/// As [`eig_joint_optimize`], with the reference taken from receive antenna
/// `reference_rx`.
pub fn eig_joint_optimize_with_reference(
    sample: &ChannelSample,
    pm: &PrecodingMatrix,
    reference_rx: usize,
) -> Result<JointOptimized> {
    let k_subbands = sample.subbands.len();
    if pm.k_subbands() != k_subbands || pm.n_t() != sample.config.n_t() {
        return Err(Error::contract("precoding matrix does not match the sample"));
    }
    if reference_rx >= sample.config.n_r {
        return Err(Error::contract(format!(
            "reference antenna {reference_rx} out of range (N_r = {})",
            sample.config.n_r
        )));
    }
    let mut rows = Vec::with_capacity(k_subbands);
    let mut eigenvalues = Vec::with_capacity(k_subbands);
    let mut fallback = vec![false; k_subbands];
    for (k, h) in sample.subbands.iter().enumerate() {
        let space = subband_eigenspace(h, k)?;
        let v = h.row(reference_rx);
        let mut proj = vec![Complex64::new(0.0, 0.0); v.len()];
        for c in 0..space.basis.cols() {
            let e = space.basis.column(c);
            let coef = numkit::inner(&e, v);
            for (p, x) in proj.iter_mut().zip(&e) {
                *p += coef * x;
            }
        }
        let n = numkit::norm(&proj);
        if n < PROJECTION_FLOOR * numkit::norm(v) || n == 0.0 {
            fallback[k] = true;
            rows.push(pm.row(k).to_vec());
        } else {
            rows.push(proj.into_iter().map(|z| z / n).collect());
        }
        eigenvalues.push(space.eigenvalue);
    }
    Ok(JointOptimized {
        precoding: PrecodingMatrix::new(ComplexMatrix::from_rows(&rows)?, eigenvalues)?,
        fallback,
    })
}

/// Sum of entry magnitudes.
pub fn sparsity_l1(m: &ComplexMatrix) -> f64 {
    m.as_slice().iter().map(|z| z.norm()).sum()
}

/// `‖H^H H w - λ w‖` for one subband.
pub fn eigen_residual(h: &ComplexMatrix, w: &[Complex64], lambda: f64) -> Result<f64> {
    let hw = h.matvec(w)?;
    let hhw = h.adjoint().matvec(&hw)?;
    Ok(hhw
        .iter()
        .zip(w)
        .map(|(a, b)| (a - b * lambda).norm_sqr())
        .sum::<f64>()
        .sqrt())
}
