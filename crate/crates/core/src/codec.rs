//! Deterministic compression stage and feedback codeword layout.
//!
//! A [`CodecModel`] maps a `K x N_t` angular-delay matrix to `L` reals and
//! back. Two calibratable kinds exist: a fixed mask that keeps the `L/2`
//! strongest cells on average, and an orthonormal linear subspace fitted to
//! the training set's second-moment matrix. Codec outputs are uniformly
//! quantized to `B` bits each and packed behind the control bits.
//!
//! Vectorization of a complex matrix is all real parts (row-major) followed
//! by all imaginary parts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{symmetric_eig, ComplexMatrix};
use crate::standardizer::{push_bits, read_bits};

/// Percentile of training-set code magnitudes used as the clipping range.
pub const CLIP_PERCENTILE: f64 = 99.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodecKind {
    FixedMask,
    LinearSubspace,
}

impl CodecKind {
    fn tag(self) -> u8 {
        match self {
            CodecKind::FixedMask => 0,
            CodecKind::LinearSubspace => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Transform {
    /// `(row, col)` cells, in code order.
    Mask(Vec<(usize, usize)>),
    /// Row-major `2·K·N_t x L`, orthonormal columns.
    Basis(Vec<f64>),
}

/// A calibrated encoder/decoder pair with its quantizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecModel {
    k_subbands: usize,
    n_t: usize,
    latent_dim: usize,
    bits_per_element: u8,
    clip_range: f64,
    transform: Transform,
}

impl CodecModel {
    /// Fixed-mask model from explicit cells; `L = 2 · cells.len()`.
    pub fn fixed_mask(
        k_subbands: usize,
        n_t: usize,
        cells: Vec<(usize, usize)>,
        bits_per_element: u8,
        clip_range: f64,
    ) -> Result<Self> {
        let model = Self {
            k_subbands,
            n_t,
            latent_dim: 2 * cells.len(),
            bits_per_element,
            clip_range,
            transform: Transform::Mask(cells),
        };
        model.validate()?;
        Ok(model)
    }

    /// Linear-subspace model from a row-major `2·K·N_t x L` basis.
    pub fn linear_subspace(
        k_subbands: usize,
        n_t: usize,
        latent_dim: usize,
        basis: Vec<f64>,
        bits_per_element: u8,
        clip_range: f64,
    ) -> Result<Self> {
        let model = Self {
            k_subbands,
            n_t,
            latent_dim,
            bits_per_element,
            clip_range,
            transform: Transform::Basis(basis),
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.k_subbands == 0 || self.n_t == 0 {
            return Err(Error::InvalidDimension("empty codec shape".into()));
        }
        if !(1..=16).contains(&self.bits_per_element) {
            return Err(Error::contract(format!(
                "bits per element must be in [1, 16], got {}",
                self.bits_per_element
            )));
        }
        if !(self.clip_range > 0.0 && self.clip_range.is_finite()) {
            return Err(Error::contract("clip range must be positive"));
        }
        let dim = self.input_dim();
        if self.latent_dim > dim {
            return Err(Error::contract(format!(
                "latent dimension {} exceeds {dim}",
                self.latent_dim
            )));
        }
        match &self.transform {
            Transform::Mask(cells) => {
                let mut seen = vec![false; self.k_subbands * self.n_t];
                for &(r, c) in cells {
                    if r >= self.k_subbands || c >= self.n_t {
                        return Err(Error::contract(format!("mask cell ({r}, {c}) out of range")));
                    }
                    let idx = r * self.n_t + c;
                    if std::mem::replace(&mut seen[idx], true) {
                        return Err(Error::contract(format!("mask cell ({r}, {c}) repeated")));
                    }
                }
            }
            Transform::Basis(b) => {
                if b.len() != dim * self.latent_dim {
                    return Err(Error::InvalidDimension(format!(
                        "basis has {} entries, expected {}",
                        b.len(),
                        dim * self.latent_dim
                    )));
                }
                let l = self.latent_dim;
                for i in 0..l {
                    for j in i..l {
                        let dot: f64 = (0..dim).map(|r| b[r * l + i] * b[r * l + j]).sum();
                        let want = if i == j { 1.0 } else { 0.0 };
                        if (dot - want).abs() > 1e-8 {
                            return Err(Error::contract(format!(
                                "basis columns {i}, {j} not orthonormal (dot = {dot})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> CodecKind {
        match self.transform {
            Transform::Mask(_) => CodecKind::FixedMask,
            Transform::Basis(_) => CodecKind::LinearSubspace,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.k_subbands, self.n_t)
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn bits_per_element(&self) -> u8 {
        self.bits_per_element
    }

    pub fn clip_range(&self) -> f64 {
        self.clip_range
    }

    /// Mask cells, for fixed-mask models.
    pub fn mask(&self) -> Option<&[(usize, usize)]> {
        match &self.transform {
            Transform::Mask(m) => Some(m),
            Transform::Basis(_) => None,
        }
    }

    /// Row-major basis, for linear-subspace models.
    pub fn basis(&self) -> Option<&[f64]> {
        match &self.transform {
            Transform::Basis(b) => Some(b),
            Transform::Mask(_) => None,
        }
    }

    /// Payload bits `L · B`.
    pub fn payload_bits(&self) -> usize {
        self.latent_dim * self.bits_per_element as usize
    }

    fn input_dim(&self) -> usize {
        2 * self.k_subbands * self.n_t
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.push(self.kind().tag());
        out.extend_from_slice(&(self.k_subbands as u16).to_le_bytes());
        out.extend_from_slice(&(self.n_t as u16).to_le_bytes());
        out.extend_from_slice(&(self.latent_dim as u32).to_le_bytes());
        out.push(self.bits_per_element);
        out.extend_from_slice(&self.clip_range.to_le_bytes());
        match &self.transform {
            Transform::Mask(cells) => {
                for &(r, c) in cells {
                    out.extend_from_slice(&(r as u16).to_le_bytes());
                    out.extend_from_slice(&(c as u16).to_le_bytes());
                }
            }
            Transform::Basis(b) => {
                for x in b {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 4 + 2 + 1 + 2 + 2 + 4 + 1 + 8;
        if bytes.len() < HEADER {
            return Err(Error::format(bytes.len(), "truncated codec header"));
        }
        if &bytes[..4] != MODEL_MAGIC {
            return Err(Error::format(0, "bad magic, expected \"CSIC\""));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != MODEL_VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let kind = bytes[6];
        let k = u16::from_le_bytes([bytes[7], bytes[8]]) as usize;
        let n_t = u16::from_le_bytes([bytes[9], bytes[10]]) as usize;
        let latent = u32::from_le_bytes(bytes[11..15].try_into().unwrap()) as usize;
        let bits = bytes[15];
        let alpha = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let body = &bytes[HEADER..];
        let model = match kind {
            0 => {
                if !latent.is_multiple_of(2) {
                    return Err(Error::format(11, "fixed-mask latent dimension must be even"));
                }
                let want = latent / 2 * 4;
                if body.len() != want {
                    return Err(Error::format(
                        HEADER + body.len().min(want),
                        "mask body length mismatch",
                    ));
                }
                let cells = body
                    .chunks_exact(4)
                    .map(|c| {
                        (
                            u16::from_le_bytes([c[0], c[1]]) as usize,
                            u16::from_le_bytes([c[2], c[3]]) as usize,
                        )
                    })
                    .collect();
                Self::fixed_mask(k, n_t, cells, bits, alpha)
            }
            1 => {
                let want = 2 * k * n_t * latent * 8;
                if body.len() != want {
                    return Err(Error::format(
                        HEADER + body.len().min(want),
                        "basis body length mismatch",
                    ));
                }
                let basis = body
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Self::linear_subspace(k, n_t, latent, basis, bits, alpha)
            }
            other => return Err(Error::format(6, format!("unknown codec kind {other}"))),
        };
        model.map_err(|e| Error::format(HEADER, e.to_string()))
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

const MODEL_MAGIC: &[u8; 4] = b"CSIC";
const MODEL_VERSION: u16 = 1;

/// Re-parts then im-parts, both row-major.
pub fn vectorize(m: &ComplexMatrix) -> Vec<f64> {
    let data = m.as_slice();
    data.iter().map(|z| z.re).chain(data.iter().map(|z| z.im)).collect()
}

pub fn unvectorize(x: &[f64], rows: usize, cols: usize) -> Result<ComplexMatrix> {
    let n = rows * cols;
    if x.len() != 2 * n {
        return Err(Error::InvalidDimension(format!(
            "{} reals for a {rows}x{cols} matrix",
            x.len()
        )));
    }
    ComplexMatrix::new(rows, cols, (0..n).map(|i| Complex64::new(x[i], x[n + i])).collect())
}

/// Fits a codec of the given kind to standardized (or raw angular-delay)
/// training matrices.
pub fn calibrate(
    kind: CodecKind,
    training: &[ComplexMatrix],
    latent_dim: usize,
    bits_per_element: u8,
) -> Result<CodecModel> {
    Ok(calibrate_many(kind, training, &[latent_dim], bits_per_element)?.remove(0))
}

/// Same as [`calibrate`] for several latent sizes, sharing the cell ranking
/// or eigendecomposition. Models come back in the order of `latent_dims`.
pub fn calibrate_many(
    kind: CodecKind,
    training: &[ComplexMatrix],
    latent_dims: &[usize],
    bits_per_element: u8,
) -> Result<Vec<CodecModel>> {
    let first = training
        .first()
        .ok_or_else(|| Error::contract("calibration needs at least one training matrix"))?;
    let (k, n_t) = first.shape();
    if training.iter().any(|m| m.shape() != (k, n_t)) {
        return Err(Error::contract("training matrices differ in shape"));
    }
    let dim = 2 * k * n_t;
    for &l in latent_dims {
        if l > dim {
            return Err(Error::contract(format!("latent dimension {l} exceeds {dim}")));
        }
        if kind == CodecKind::FixedMask && l % 2 != 0 {
            return Err(Error::contract("fixed-mask latent dimension must be even"));
        }
    }
    let provisional: Vec<CodecModel> = match kind {
        CodecKind::FixedMask => {
            let mut mean = vec![0.0; k * n_t];
            for m in training {
                for (acc, z) in mean.iter_mut().zip(m.as_slice()) {
                    *acc += z.norm();
                }
            }
            let mut order: Vec<usize> = (0..k * n_t).collect();
            // stable sort keeps row-major order among equal means
            order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]));
            latent_dims
                .iter()
                .map(|&l| {
                    let cells = order[..l / 2].iter().map(|&i| (i / n_t, i % n_t)).collect();
                    CodecModel::fixed_mask(k, n_t, cells, bits_per_element, 1.0)
                })
                .collect::<Result<_>>()?
        }
        CodecKind::LinearSubspace => {
            let mut second_moment = vec![0.0; dim * dim];
            for m in training {
                let x = vectorize(m);
                for i in 0..dim {
                    if x[i] == 0.0 {
                        continue;
                    }
                    let row = &mut second_moment[i * dim..(i + 1) * dim];
                    for (r, xj) in row.iter_mut().zip(&x) {
                        *r += x[i] * xj;
                    }
                }
            }
            let inv = 1.0 / training.len() as f64;
            second_moment.iter_mut().for_each(|v| *v *= inv);
            let eig = symmetric_eig(&second_moment, dim)?;
            let signed: Vec<Vec<f64>> = eig
                .vectors
                .iter()
                .take(latent_dims.iter().copied().max().unwrap_or(0))
                .map(|v| {
                    // sign convention: largest-magnitude coordinate positive
                    let pivot = v
                        .iter()
                        .copied()
                        .fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
                    let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
                    v.iter().map(|x| sign * x).collect()
                })
                .collect();
            latent_dims
                .iter()
                .map(|&l| {
                    let mut basis = vec![0.0; dim * l];
                    for (c, v) in signed.iter().take(l).enumerate() {
                        for r in 0..dim {
                            basis[r * l + c] = v[r];
                        }
                    }
                    CodecModel::linear_subspace(k, n_t, l, basis, bits_per_element, 1.0)
                })
                .collect::<Result<_>>()?
        }
    };

    provisional
        .into_iter()
        .map(|model| {
            let mut magnitudes: Vec<f64> = Vec::with_capacity(training.len() * model.latent_dim);
            for m in training {
                magnitudes.extend(encode(&model, m)?.into_iter().map(f64::abs));
            }
            let alpha = percentile(&mut magnitudes, CLIP_PERCENTILE);
            let clip_range = if alpha > 0.0 && alpha.is_finite() { alpha } else { 1.0 };
            Ok(CodecModel { clip_range, ..model })
        })
        .collect()
}

/// Linear-interpolated percentile (`p` in `[0, 100]`); 0 for empty input.
pub(crate) fn percentile(values: &mut [f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
}

pub fn encode(model: &CodecModel, w_std: &ComplexMatrix) -> Result<Vec<f64>> {
    if w_std.shape() != model.shape() {
        return Err(Error::contract(format!(
            "input shape {:?} does not match codec {:?}",
            w_std.shape(),
            model.shape()
        )));
    }
    Ok(match &model.transform {
        Transform::Mask(cells) => {
            let mut z = Vec::with_capacity(model.latent_dim);
            for &(r, c) in cells {
                let v = w_std.get(r, c);
                z.push(v.re);
                z.push(v.im);
            }
            z
        }
        Transform::Basis(b) => {
            let x = vectorize(w_std);
            let l = model.latent_dim;
            let mut z = vec![0.0; l];
            for (r, xr) in x.iter().enumerate() {
                for (zi, bi) in z.iter_mut().zip(&b[r * l..(r + 1) * l]) {
                    *zi += xr * bi;
                }
            }
            z
        }
    })
}

pub fn decode(model: &CodecModel, z: &[f64]) -> Result<ComplexMatrix> {
    if z.len() != model.latent_dim {
        return Err(Error::contract(format!(
            "code of length {} for latent dimension {}",
            z.len(),
            model.latent_dim
        )));
    }
    let (k, n_t) = model.shape();
    match &model.transform {
        Transform::Mask(cells) => {
            let mut m = ComplexMatrix::zeros(k, n_t);
            for (pair, &(r, c)) in z.chunks_exact(2).zip(cells) {
                m.set(r, c, Complex64::new(pair[0], pair[1]));
            }
            Ok(m)
        }
        Transform::Basis(b) => {
            let l = model.latent_dim;
            let x: Vec<f64> = (0..2 * k * n_t)
                .map(|r| b[r * l..(r + 1) * l].iter().zip(z).map(|(a, c)| a * c).sum())
                .collect();
            unvectorize(&x, k, n_t)
        }
    }
}

fn check_quantizer(bits: u8, alpha: f64) -> Result<()> {
    if !(1..=16).contains(&bits) {
        return Err(Error::contract(format!(
            "bits per element must be in [1, 16], got {bits}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::contract("clip range must be positive"));
    }
    Ok(())
}

/// Bin index of `x` on the `2^B`-level uniform grid over `[-α, α]`.
pub fn quantize_index(x: f64, bits: u8, alpha: f64) -> u32 {
    let levels = 1u32 << bits;
    let clipped = x.clamp(-alpha, alpha);
    let idx = ((clipped + alpha) / (2.0 * alpha) * levels as f64).floor();
    (idx.max(0.0) as u32).min(levels - 1)
}

/// Center of bin `idx`.
pub fn bin_center(idx: u32, bits: u8, alpha: f64) -> f64 {
    let levels = (1u32 << bits) as f64;
    -alpha + (idx as f64 + 0.5) * 2.0 * alpha / levels
}

/// Clips to `[-α, α]` and writes each element as an unsigned `B`-bit bin
/// index, most significant bit first.
pub fn quantize(z: &[f64], bits: u8, alpha: f64) -> Result<Vec<bool>> {
    check_quantizer(bits, alpha)?;
    let mut out = Vec::with_capacity(z.len() * bits as usize);
    for &x in z {
        push_bits(&mut out, quantize_index(x, bits, alpha) as u64, bits as usize);
    }
    Ok(out)
}

/// Bin centers for the first `len` codes in `bits`.
pub fn dequantize(stream: &[bool], bits: u8, alpha: f64, len: usize) -> Result<Vec<f64>> {
    check_quantizer(bits, alpha)?;
    let b = bits as usize;
    if stream.len() < len * b {
        return Err(Error::Decode(format!(
            "{} payload bits for {len} codes of {b} bits",
            stream.len()
        )));
    }
    Ok(stream[..len * b]
        .chunks_exact(b)
        .map(|c| bin_center(read_bits(c) as u32, bits, alpha))
        .collect())
}

/// Number of elements outside `[-α, α]`.
pub fn clip_count(z: &[f64], alpha: f64) -> usize {
    z.iter().filter(|x| x.abs() > alpha).count()
}

/// Control bits followed by payload bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    pub control_bits: Vec<bool>,
    pub payload_bits: Vec<bool>,
    /// `L · B + B_ctrl`; byte padding is not counted.
    pub b_total: usize,
}

impl Codeword {
    /// MSB-first bytes, zero-padded at the end.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.b_total.div_ceil(8)];
        for (i, &b) in self.control_bits.iter().chain(&self.payload_bits).enumerate() {
            if b {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }
}

pub fn pack_codeword(control_bits: Vec<bool>, payload_bits: Vec<bool>) -> Codeword {
    let b_total = control_bits.len() + payload_bits.len();
    Codeword {
        control_bits,
        payload_bits,
        b_total,
    }
}

/// Bit lengths expected when parsing a codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodewordLayout {
    pub control_bits: usize,
    pub payload_bits: usize,
}

impl CodewordLayout {
    pub fn b_total(&self) -> usize {
        self.control_bits + self.payload_bits
    }
}

pub fn unpack_codeword(bytes: &[u8], layout: CodewordLayout) -> Result<(Vec<bool>, Vec<bool>)> {
    let total = layout.b_total();
    if bytes.len() * 8 < total {
        return Err(Error::Decode(format!(
            "codeword has {} bytes, {} bits required",
            bytes.len(),
            total
        )));
    }
    let bit = |i: usize| bytes[i / 8] & (0x80 >> (i % 8)) != 0;
    let ctrl = (0..layout.control_bits).map(bit).collect();
    let payload = (layout.control_bits..total).map(bit).collect();
    Ok((ctrl, payload))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_level_quantizer() {
        let bits = quantize(&[0.7, -0.2], 1, 1.0).unwrap();
        assert_eq!(bits, vec![true, false]);
        assert_eq!(dequantize(&bits, 1, 1.0, 2).unwrap(), vec![0.5, -0.5]);
    }

    #[test]
    fn quantizer_edges_and_idempotence() {
        let alpha = 2.0;
        for bits in [1u8, 3, 6, 16] {
            assert_eq!(quantize_index(alpha, bits, alpha), (1 << bits) - 1);
            assert_eq!(quantize_index(-alpha, bits, alpha), 0);
            assert_eq!(quantize_index(1e9, bits, alpha), (1 << bits) - 1);
            let z = [-1.99, -0.3, 0.0, 0.41, 1.7];
            let q = quantize(&z, bits, alpha).unwrap();
            let d = dequantize(&q, bits, alpha, z.len()).unwrap();
            assert_eq!(quantize(&d, bits, alpha).unwrap(), q);
        }
        assert!(quantize(&[0.0], 0, 1.0).is_err());
        assert!(quantize(&[0.0], 17, 1.0).is_err());
        assert!(quantize(&[0.0], 4, 0.0).is_err());
        assert!(dequantize(&[true; 5], 6, 1.0, 1).is_err());
    }

    #[test]
    fn mask_readout() {
        let model = CodecModel::fixed_mask(2, 3, vec![(1, 2), (0, 0)], 6, 1.0).unwrap();
        assert_eq!(encode(&model, &ComplexMatrix::zeros(2, 3)).unwrap(), vec![0.0; 4]);
        let mut m = ComplexMatrix::zeros(2, 3);
        m.set(1, 2, c(0.25, -0.5));
        m.set(0, 0, c(1.0, 2.0));
        m.set(0, 1, c(9.0, 9.0));
        let z = encode(&model, &m).unwrap();
        assert_eq!(z, vec![0.25, -0.5, 1.0, 2.0]);
        let back = decode(&model, &z).unwrap();
        assert_eq!(back.get(1, 2), c(0.25, -0.5));
        assert_eq!(back.get(0, 1), c(0.0, 0.0));
        assert!(encode(&model, &ComplexMatrix::zeros(3, 3)).is_err());
        assert!(decode(&model, &[0.0; 3]).is_err());
    }

    #[test]
    fn mask_validation() {
        assert!(CodecModel::fixed_mask(2, 2, vec![(0, 0), (0, 0)], 4, 1.0).is_err());
        assert!(CodecModel::fixed_mask(2, 2, vec![(2, 0)], 4, 1.0).is_err());
    }

    #[test]
    fn dominant_cell_mask() {
        let mut m = ComplexMatrix::zeros(3, 4);
        m.set(2, 1, c(0.3, -0.4));
        let model = calibrate(CodecKind::FixedMask, &vec![m; 5], 2, 6).unwrap();
        assert_eq!(model.mask().unwrap(), &[(2, 1)]);
        assert!((model.clip_range() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rank_one_subspace_is_exact() {
        let m = ComplexMatrix::from_fn(2, 3, |i, j| c(i as f64 + 1.0, j as f64 - 1.0));
        let training: Vec<_> = [1.0, -2.0, 0.5].iter().map(|s| m.scale(c(*s, 0.0))).collect();
        let model = calibrate(CodecKind::LinearSubspace, &training, 1, 8).unwrap();
        let x = vectorize(&m);
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let b = model.basis().unwrap();
        let dot: f64 = x.iter().zip(b).map(|(a, c)| a * c).sum();
        assert!((dot.abs() - nx).abs() < 1e-10);
        for t in &training {
            let rec = decode(&model, &encode(&model, t).unwrap()).unwrap();
            assert!(rec.max_abs_diff(t).unwrap() < 1e-10);
        }
    }

    #[test]
    fn calibration_errors() {
        assert!(calibrate(CodecKind::FixedMask, &[], 2, 6).is_err());
        let m = ComplexMatrix::zeros(2, 2);
        assert!(calibrate(CodecKind::FixedMask, std::slice::from_ref(&m), 10, 6).is_err());
        assert!(calibrate(CodecKind::FixedMask, std::slice::from_ref(&m), 3, 6).is_err());
        assert!(calibrate(CodecKind::FixedMask, &[m.clone(), ComplexMatrix::zeros(3, 2)], 2, 6).is_err());
    }

    #[test]
    fn zero_latent_mask() {
        let m = ComplexMatrix::from_fn(2, 2, |i, j| c(i as f64, j as f64));
        let model = calibrate(CodecKind::FixedMask, std::slice::from_ref(&m), 0, 6).unwrap();
        assert_eq!(model.latent_dim(), 0);
        assert_eq!(model.clip_range(), 1.0);
        let z = encode(&model, &m).unwrap();
        assert!(z.is_empty());
        assert_eq!(decode(&model, &z).unwrap(), ComplexMatrix::zeros(2, 2));
    }

    #[test]
    fn model_file_roundtrip() {
        let mask = CodecModel::fixed_mask(13, 32, vec![(2, 16), (2, 15), (3, 16)], 6, 0.731).unwrap();
        assert_eq!(CodecModel::from_bytes(&mask.to_bytes()).unwrap(), mask);
        let m = ComplexMatrix::from_fn(2, 2, |i, j| c(i as f64 + 0.5, j as f64));
        let lin = calibrate(CodecKind::LinearSubspace, &[m.clone(), m.scale(c(0.0, 1.0))], 2, 4).unwrap();
        assert_eq!(CodecModel::from_bytes(&lin.to_bytes()).unwrap(), lin);
        let mut bad = mask.to_bytes();
        bad[0] = b'Z';
        assert!(matches!(
            CodecModel::from_bytes(&bad),
            Err(Error::Format { offset: 0, .. })
        ));
        let bytes = mask.to_bytes();
        assert!(matches!(
            CodecModel::from_bytes(&bytes[..bytes.len() - 2]),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn codeword_budget() {
        let cw = pack_codeword(vec![true; 9], vec![false; 36]);
        assert_eq!(cw.b_total, 45);
        assert_eq!(cw.to_bytes().len(), 6);
        let ctrl_only = pack_codeword(vec![true, false, true], vec![]);
        assert_eq!(ctrl_only.b_total, 3);
        assert_eq!(ctrl_only.to_bytes(), vec![0b1010_0000]);
    }

    #[test]
    fn truncated_codeword() {
        let layout = CodewordLayout {
            control_bits: 9,
            payload_bits: 36,
        };
        assert!(matches!(unpack_codeword(&[0u8; 5], layout), Err(Error::Decode(_))));
    }

    #[test]
    fn percentile_interpolates() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&mut v, 0.0), 1.0);
        assert_eq!(percentile(&mut v, 100.0), 4.0);
        assert!((percentile(&mut v, 50.0) - 2.5).abs() < 1e-15);
    }
}
