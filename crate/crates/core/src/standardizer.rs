//! Angular-delay transform and benchmark-aligned cyclic standardization.
//!
//! Precoding matrices are `K x N_t`. After [`sparse_transform`] rows index
//! delay taps and columns index angular bins. Standardization cyclically
//! shifts the transformed matrix so that its row and column magnitude
//! profiles best correlate with those of a fixed benchmark; the shift pair is
//! the side information needed to undo it.

use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::channelgen::{ChannelSample, PropagationPath, SystemConfig};
use crate::error::{Error, Result};
use crate::numkit::{cyclic_shift, dft_matrix, ComplexMatrix};
use crate::precoder::{dominant_eigenvectors, eig_joint_optimize};

/// `F_d^H W F_h` with unitary DFT matrices sized to each axis.
pub fn sparse_transform(w: &ComplexMatrix) -> Result<ComplexMatrix> {
    let f_d = dft_matrix(w.rows())?;
    let f_h = dft_matrix(w.cols())?;
    f_d.adjoint().matmul(w)?.matmul(&f_h)
}

/// `F_d M F_h^H`, the exact inverse of [`sparse_transform`].
pub fn inverse_sparse_transform(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let f_d = dft_matrix(m.rows())?;
    let f_h = dft_matrix(m.cols())?;
    f_d.matmul(m)?.matmul(&f_h.adjoint())
}

/// Entry `i` is `Σ_j |M_ij|`.
pub fn row_profile(m: &ComplexMatrix) -> Vec<f64> {
    (0..m.rows()).map(|i| m.row(i).iter().map(|z| z.norm()).sum()).collect()
}

/// Entry `j` is `Σ_i |M_ij|`.
pub fn col_profile(m: &ComplexMatrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, z) in out.iter_mut().zip(m.row(i)) {
            *o += z.norm();
        }
    }
    out
}

fn magnitude_row_profile(mag: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    (0..rows).map(|i| mag[i * cols..(i + 1) * cols].iter().sum()).collect()
}

fn magnitude_col_profile(mag: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    (0..cols).map(|j| (0..rows).map(|i| mag[i * cols + j]).sum()).collect()
}

/// Shift `m` in `[0, n)` maximizing `Σ_i profile[(i - m) mod n] · bench[i]`;
/// the smallest maximizer wins ties.
pub fn optimal_shift(profile: &[f64], benchmark_profile: &[f64]) -> Result<usize> {
    let n = profile.len();
    if n == 0 || benchmark_profile.len() != n {
        return Err(Error::contract(format!(
            "profile lengths {} and {} must match and be non-zero",
            n,
            benchmark_profile.len()
        )));
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for m in 0..n {
        let score: f64 = benchmark_profile
            .iter()
            .enumerate()
            .map(|(i, b)| profile[(i + n - m) % n] * b)
            .sum();
        if score > best_score {
            best_score = score;
            best = m;
        }
    }
    Ok(best)
}

/// Reference magnitude pattern that fixes where the strongest component of
/// every standardized matrix should land.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    k_subbands: usize,
    n_t: usize,
    magnitude: Vec<f64>,
    row_profile: Vec<f64>,
    col_profile: Vec<f64>,
    target_row: usize,
    target_col: usize,
}

impl Benchmark {
    /// Builds a benchmark from a row-major `K x N_t` magnitude matrix.
    pub fn from_magnitude(
        k_subbands: usize,
        n_t: usize,
        magnitude: Vec<f64>,
        target_row: usize,
        target_col: usize,
    ) -> Result<Self> {
        if magnitude.len() != k_subbands * n_t || k_subbands == 0 || n_t == 0 {
            return Err(Error::InvalidDimension(format!(
                "{} magnitudes for a {k_subbands}x{n_t} benchmark",
                magnitude.len()
            )));
        }
        if target_row >= k_subbands || target_col >= n_t {
            return Err(Error::contract("benchmark target outside the matrix"));
        }
        if magnitude.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::contract("benchmark magnitudes must be finite and non-negative"));
        }
        let row_profile = magnitude_row_profile(&magnitude, k_subbands, n_t);
        let col_profile = magnitude_col_profile(&magnitude, k_subbands, n_t);
        Ok(Self {
            k_subbands,
            n_t,
            magnitude,
            row_profile,
            col_profile,
            target_row,
            target_col,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.k_subbands, self.n_t)
    }

    /// Row-major `|W_Ben|`.
    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    pub fn row_profile(&self) -> &[f64] {
        &self.row_profile
    }

    pub fn col_profile(&self) -> &[f64] {
        &self.col_profile
    }

    pub fn target_row(&self) -> usize {
        self.target_row
    }

    pub fn target_col(&self) -> usize {
        self.target_col
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + 8 * self.magnitude.len());
        out.extend_from_slice(BENCHMARK_MAGIC);
        for v in [
            BENCHMARK_VERSION,
            self.k_subbands as u16,
            self.n_t as u16,
            self.target_row as u16,
            self.target_col as u16,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for m in &self.magnitude {
            out.extend_from_slice(&m.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 14 {
            return Err(Error::format(bytes.len(), "truncated benchmark header"));
        }
        if &bytes[..4] != BENCHMARK_MAGIC {
            return Err(Error::format(0, "bad magic, expected \"CSIB\""));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]) as usize;
        let version = u16_at(4);
        if version != BENCHMARK_VERSION as usize {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let (k, n_t, tr, tc) = (u16_at(6), u16_at(8), u16_at(10), u16_at(12));
        let want = 14 + 8 * k * n_t;
        if bytes.len() != want {
            return Err(Error::format(
                bytes.len().min(want),
                format!("benchmark body has {} bytes, expected {}", bytes.len() - 14, want - 14),
            ));
        }
        let magnitude = bytes[14..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_magnitude(k, n_t, magnitude, tr, tc).map_err(|e| Error::format(6, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

const BENCHMARK_MAGIC: &[u8; 4] = b"CSIB";
const BENCHMARK_VERSION: u16 = 1;

/// Default delay-axis target: 0-based index `⌈K/5⌉ - 1`.
pub fn default_target_row(k_subbands: usize) -> usize {
    k_subbands.div_ceil(5).saturating_sub(1)
}

/// Default angular-axis target: the central bin `⌊N_t/2⌋`.
pub fn default_target_col(n_t: usize) -> usize {
    n_t / 2
}

// Broadside line of sight: a single DFT atom in both axes, so the benchmark
// profiles are deltas and correlation aligns each sample's own peak.
const BENCH_AZIMUTH: f64 = 0.0;
const BENCH_ZENITH: f64 = FRAC_PI_2;
const BENCH_RX_ANGLE: f64 = 0.25;

/// The single-path line-of-sight channel the benchmark is derived from.
pub fn benchmark_source(config: &SystemConfig) -> ChannelSample {
    let path = PropagationPath {
        gain: Complex64::new(1.0, 0.0),
        delay: 0.0,
        azimuth: BENCH_AZIMUTH,
        zenith: BENCH_ZENITH,
        rx_angle: BENCH_RX_ANGLE,
    };
    ChannelSample::from_paths(config, &[path])
}

pub fn build_benchmark(config: &SystemConfig) -> Result<Benchmark> {
    build_benchmark_with_target(
        config,
        default_target_row(config.k_subbands),
        default_target_col(config.n_t()),
    )
}

/// Precodes the canonical LoS sample with eigenvector alignment, moves it to
/// the angular-delay domain and rolls its peak onto `(target_row, target_col)`.
pub fn build_benchmark_with_target(config: &SystemConfig, target_row: usize, target_col: usize) -> Result<Benchmark> {
    config.validate()?;
    let (k, n_t) = (config.k_subbands, config.n_t());
    if target_row >= k || target_col >= n_t {
        return Err(Error::contract("benchmark target outside the matrix"));
    }
    let sample = benchmark_source(config);
    let pm = dominant_eigenvectors(&sample)?;
    let aligned = eig_joint_optimize(&sample, &pm)?;
    let spar = sparse_transform(aligned.precoding.matrix())?;
    let mag = spar.magnitudes();
    let peak = argmax(&mag);
    let (pr, pc) = (peak / n_t, peak % n_t);
    let shifted = cyclic_shift(&spar, target_row as i64 - pr as i64, target_col as i64 - pc as i64);
    Benchmark::from_magnitude(k, n_t, shifted.magnitudes(), target_row, target_col)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Shift pair needed to undo standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ControlInfo {
    /// Row (delay) shift in `[0, K)`.
    pub m_star: usize,
    /// Column (angle) shift in `[0, N_t)`.
    pub n_star: usize,
}

/// Transforms `w` to the angular-delay domain and aligns it with `bench`.
/// The row and column shifts are searched independently.
pub fn standardize(w: &ComplexMatrix, bench: &Benchmark) -> Result<(ComplexMatrix, ControlInfo)> {
    if w.shape() != bench.shape() {
        return Err(Error::contract(format!(
            "matrix shape {:?} does not match benchmark {:?}",
            w.shape(),
            bench.shape()
        )));
    }
    let spar = sparse_transform(w)?;
    standardize_sparse(&spar, bench)
}

/// Standardization of a matrix already in the angular-delay domain.
pub fn standardize_sparse(spar: &ComplexMatrix, bench: &Benchmark) -> Result<(ComplexMatrix, ControlInfo)> {
    if spar.shape() != bench.shape() {
        return Err(Error::contract("matrix shape does not match benchmark"));
    }
    let m_star = optimal_shift(&row_profile(spar), bench.row_profile())?;
    let n_star = optimal_shift(&col_profile(spar), bench.col_profile())?;
    Ok((
        cyclic_shift(spar, m_star as i64, n_star as i64),
        ControlInfo { m_star, n_star },
    ))
}

/// Undoes the shift and returns to the antenna-frequency domain. Rows are
/// not renormalized.
pub fn destandardize(w_std: &ComplexMatrix, ctrl: ControlInfo) -> Result<ComplexMatrix> {
    let (k, n_t) = w_std.shape();
    if ctrl.m_star >= k || ctrl.n_star >= n_t {
        return Err(Error::Decode(format!(
            "control ({}, {}) outside [0, {k}) x [0, {n_t})",
            ctrl.m_star, ctrl.n_star
        )));
    }
    let unshifted = cyclic_shift(
        w_std,
        ((k - ctrl.m_star) % k) as i64,
        ((n_t - ctrl.n_star) % n_t) as i64,
    );
    inverse_sparse_transform(&unshifted)
}

/// Bits needed for a value in `[0, n)`: `⌈log2 n⌉`.
pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// `B_ctrl = ⌈log2 K⌉ + ⌈log2 N_t⌉`.
pub fn control_bit_width(config: &SystemConfig) -> usize {
    ceil_log2(config.k_subbands) + ceil_log2(config.n_t())
}

/// `m*` then `n*`, each fixed-width and most significant bit first.
pub fn encode_control(ctrl: ControlInfo, config: &SystemConfig) -> Result<Vec<bool>> {
    if ctrl.m_star >= config.k_subbands || ctrl.n_star >= config.n_t() {
        return Err(Error::contract("control values out of range"));
    }
    let mut bits = Vec::with_capacity(control_bit_width(config));
    push_bits(&mut bits, ctrl.m_star as u64, ceil_log2(config.k_subbands));
    push_bits(&mut bits, ctrl.n_star as u64, ceil_log2(config.n_t()));
    Ok(bits)
}

pub fn decode_control(bits: &[bool], config: &SystemConfig) -> Result<ControlInfo> {
    let (wm, wn) = (ceil_log2(config.k_subbands), ceil_log2(config.n_t()));
    if bits.len() < wm + wn {
        return Err(Error::Decode(format!(
            "{} control bits supplied, {} required",
            bits.len(),
            wm + wn
        )));
    }
    let ctrl = ControlInfo {
        m_star: read_bits(&bits[..wm]) as usize,
        n_star: read_bits(&bits[wm..wm + wn]) as usize,
    };
    if ctrl.m_star >= config.k_subbands || ctrl.n_star >= config.n_t() {
        return Err(Error::Decode(format!(
            "decoded control ({}, {}) out of range",
            ctrl.m_star, ctrl.n_star
        )));
    }
    Ok(ctrl)
}

pub(crate) fn push_bits(out: &mut Vec<bool>, value: u64, width: usize) {
    for b in (0..width).rev() {
        out.push((value >> b) & 1 == 1);
    }
}

pub(crate) fn read_bits(bits: &[bool]) -> u64 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
}
