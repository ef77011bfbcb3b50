//! Synthetic multi-environment channels from a geometric multipath model.
//!
//! Each subband channel is a sum of planar-wave paths,
//! `H_k = Σ_p g_p · a_r(p) · a_t(p)^H · exp(-j2π f_k τ_p)` with
//! `f_k = k · n_gran · spacing` (0-based `k`). The base station carries a
//! half-wavelength UPA, the UE a half-wavelength ULA.
//!
//! Path parameters are drawn from a ChaCha stream keyed by
//! `(profile seed, sample index)` with one stream per path index, so samples
//! can be generated in any order or in parallel with identical results.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::ComplexMatrix;

/// Antenna and OFDM numerology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Horizontal transmit ports.
    pub n_h: usize,
    /// Vertical transmit ports.
    pub n_v: usize,
    /// Receive antennas.
    pub n_r: usize,
    pub k_subbands: usize,
    /// Subcarriers per subband.
    pub n_gran: usize,
    /// Hz.
    pub subcarrier_spacing: f64,
    /// Hz.
    pub carrier_freq: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_h: 8,
            n_v: 4,
            n_r: 4,
            k_subbands: 13,
            n_gran: 48,
            subcarrier_spacing: 15e3,
            carrier_freq: 2.6e9,
        }
    }
}

impl SystemConfig {
    pub fn n_t(&self) -> usize {
        self.n_h * self.n_v
    }

    /// Frequency offset of subband `k` from the first one.
    pub fn subband_freq(&self, k: usize) -> f64 {
        (k * self.n_gran) as f64 * self.subcarrier_spacing
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t() == 0 || self.n_r == 0 || self.k_subbands == 0 || self.n_gran == 0 {
            return Err(Error::contract("antenna and subband counts must be at least 1"));
        }
        if !(self.subcarrier_spacing > 0.0 && self.carrier_freq > 0.0) {
            return Err(Error::contract("frequencies must be positive"));
        }
        // dataset header stores these as u16
        let max = u16::MAX as usize;
        if [self.n_h, self.n_v, self.n_r, self.k_subbands, self.n_gran]
            .iter()
            .any(|&d| d > max)
        {
            return Err(Error::contract("dimension exceeds 65535"));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Statistical description of one propagation environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentProfile {
    pub env_id: u32,
    pub num_paths: usize,
    pub los: bool,
    /// LoS-to-scattered power ratio in dB; ignored when `los` is false.
    pub rician_k_db: f64,
    /// Radians.
    pub mean_azimuth: f64,
    /// Radians, measured from the array's vertical axis.
    pub mean_zenith: f64,
    /// Standard deviation of the Laplacian angle spread, radians.
    pub angle_spread: f64,
    /// Mean excess delay of scattered paths, seconds.
    pub delay_spread: f64,
    /// Seconds.
    pub max_delay: f64,
    pub seed: u64,
}

impl EnvironmentProfile {
    pub fn validate(&self) -> Result<()> {
        if self.num_paths == 0 {
            return Err(Error::contract(format!("env {}: num_paths must be >= 1", self.env_id)));
        }
        if !(0.0..=PI).contains(&self.angle_spread) {
            return Err(Error::contract(format!(
                "env {}: angle_spread outside [0, π]",
                self.env_id
            )));
        }
        if !(self.delay_spread > 0.0 && self.delay_spread <= self.max_delay) {
            return Err(Error::contract(format!(
                "env {}: need 0 < delay_spread <= max_delay",
                self.env_id
            )));
        }
        let finite = [self.rician_k_db, self.mean_azimuth, self.mean_zenith, self.max_delay];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::contract(format!("env {}: non-finite parameter", self.env_id)));
        }
        Ok(())
    }
}

/// JSON wrapper: `{"profiles": [ ... ]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSet {
    pub profiles: Vec<EnvironmentProfile>,
}

impl ProfileSet {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let set: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        for p in &set.profiles {
            p.validate()?;
        }
        Ok(set)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// The six-environment set used by the default experiment: the first four
/// are training environments, the last two are held out as unseen.
pub fn default_profiles() -> Vec<EnvironmentProfile> {
    let ns = 1e-9;
    let env = |env_id, num_paths, los, rician_k_db, mean_azimuth, mean_zenith, angle_spread, delay_spread: f64| {
        EnvironmentProfile {
            env_id,
            num_paths,
            los,
            rician_k_db,
            mean_azimuth,
            mean_zenith,
            angle_spread,
            delay_spread: delay_spread * ns,
            max_delay: 1000.0 * ns,
            seed: 0x5eed_0000 + env_id as u64,
        }
    };
    vec![
        env(1, 6, true, 6.0, -0.6, 1.40, 0.10, 150.0),
        env(2, 8, false, 0.0, 0.4, 1.60, 0.15, 200.0),
        env(3, 5, true, 3.0, 0.0, 1.30, 0.08, 100.0),
        env(4, 10, false, 0.0, -0.2, 1.50, 0.20, 300.0),
        env(5, 12, false, 0.0, 0.9, 1.45, 0.22, 350.0),
        env(6, 10, false, 0.0, -1.0, 1.55, 0.22, 320.0),
    ]
}

/// One downlink channel realization: `K` matrices of `N_r x N_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub config: SystemConfig,
    pub subbands: Vec<ComplexMatrix>,
}

impl ChannelSample {
    pub fn new(config: SystemConfig, subbands: Vec<ComplexMatrix>) -> Result<Self> {
        if subbands.len() != config.k_subbands {
            return Err(Error::InvalidDimension(format!(
                "{} subband matrices for K = {}",
                subbands.len(),
                config.k_subbands
            )));
        }
        for (k, h) in subbands.iter().enumerate() {
            if h.shape() != (config.n_r, config.n_t()) {
                return Err(Error::InvalidDimension(format!(
                    "subband {k} has shape {:?}, expected ({}, {})",
                    h.shape(),
                    config.n_r,
                    config.n_t()
                )));
            }
        }
        Ok(Self { config, subbands })
    }

    /// Evaluates the multipath sum exactly, in double precision.
    pub fn from_paths(config: &SystemConfig, paths: &[PropagationPath]) -> Self {
        let n_t = config.n_t();
        let subbands = (0..config.k_subbands)
            .map(|k| {
                let f = config.subband_freq(k);
                let mut h = ComplexMatrix::zeros(config.n_r, n_t);
                for p in paths {
                    let a_t = steering_vector(config, p.azimuth, p.zenith);
                    let a_r = receive_steering(config.n_r, p.rx_angle);
                    let coef = p.gain * Complex64::from_polar(1.0, -2.0 * PI * f * p.delay);
                    for (r, ar) in a_r.iter().enumerate() {
                        let scaled = coef * ar;
                        for (dst, at) in h.row_mut(r).iter_mut().zip(&a_t) {
                            *dst += scaled * at.conj();
                        }
                    }
                }
                h
            })
            .collect();
        Self {
            config: *config,
            subbands,
        }
    }

    /// `‖H'‖_F²` over all subbands.
    pub fn energy(&self) -> f64 {
        self.subbands.iter().map(|h| h.frobenius_norm().powi(2)).sum()
    }
}

/// One planar-wave component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationPath {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
    pub azimuth: f64,
    pub zenith: f64,
    /// Arrival angle at the UE array, radians from broadside.
    pub rx_angle: f64,
}

/// UPA response with half-wavelength spacing; element `(h, v)` sits at
/// flattened index `h * n_v + v`.
pub fn steering_vector(config: &SystemConfig, azimuth: f64, zenith: f64) -> Vec<Complex64> {
    let u = zenith.sin() * azimuth.sin();
    let w = zenith.cos();
    let mut out = Vec::with_capacity(config.n_t());
    for h in 0..config.n_h {
        for v in 0..config.n_v {
            out.push(Complex64::from_polar(1.0, PI * (h as f64 * u + v as f64 * w)));
        }
    }
    out
}

/// Half-wavelength ULA response at the UE.
pub fn receive_steering(n_r: usize, angle: f64) -> Vec<Complex64> {
    let s = angle.sin();
    (0..n_r)
        .map(|r| Complex64::from_polar(1.0, PI * r as f64 * s))
        .collect()
}

fn mix64(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-keyed generator for one `(seed, sample, stream)` triple.
pub fn keyed_rng(seed: u64, sample_index: u64, stream: u64) -> ChaCha8Rng {
    let key = mix64(seed ^ mix64(sample_index.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

fn laplace(rng: &mut impl Rng, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

/// Draws the path set of one sample.
///
/// Scattered delays follow an exponential law with mean `delay_spread`,
/// truncated at `max_delay`; their powers decay as `exp(-τ / delay_spread)`.
/// Angles are Laplacian around the profile means with standard deviation
/// `angle_spread`. The LoS path, when present, carries `K / (K + 1)` of the
/// power at zero delay and exactly the mean angles. Mean total power is 1.
pub fn draw_paths(profile: &EnvironmentProfile, sample_index: u64) -> Vec<PropagationPath> {
    let k_lin = 10f64.powf(profile.rician_k_db / 10.0);
    let scattered_power = if profile.los { 1.0 / (1.0 + k_lin) } else { 1.0 };
    let lap_scale = profile.angle_spread / 2f64.sqrt();
    let ds = profile.delay_spread;
    let trunc = 1.0 - (-profile.max_delay / ds).exp();

    struct Draw {
        delay: f64,
        azimuth: f64,
        zenith: f64,
        rx_angle: f64,
        unit_gain: Complex64,
    }
    let draws: Vec<Draw> = (0..profile.num_paths)
        .map(|p| {
            let mut rng = keyed_rng(profile.seed, sample_index, p as u64);
            let u: f64 = rng.random();
            let delay = (-ds * (1.0 - u * trunc).ln()).min(profile.max_delay);
            let azimuth = profile.mean_azimuth + laplace(&mut rng, lap_scale);
            let zenith = (profile.mean_zenith + laplace(&mut rng, lap_scale)).clamp(0.0, PI);
            let rx_angle = rng.random_range(-PI / 2.0..PI / 2.0);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Draw {
                delay,
                azimuth,
                zenith,
                rx_angle,
                unit_gain: Complex64::new(re, im) / 2f64.sqrt(),
            }
        })
        .collect();

    let weights: Vec<f64> = draws.iter().map(|d| (-d.delay / ds).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut paths: Vec<PropagationPath> = draws
        .iter()
        .zip(&weights)
        .map(|(d, w)| PropagationPath {
            gain: d.unit_gain * (scattered_power * w / total).sqrt(),
            delay: d.delay,
            azimuth: d.azimuth,
            zenith: d.zenith,
            rx_angle: d.rx_angle,
        })
        .collect();

    if profile.los {
        let mut rng = keyed_rng(profile.seed, sample_index, profile.num_paths as u64);
        let phase = rng.random_range(0.0..2.0 * PI);
        let rx_angle = rng.random_range(-PI / 2.0..PI / 2.0);
        paths.push(PropagationPath {
            gain: Complex64::from_polar((k_lin / (1.0 + k_lin)).sqrt(), phase),
            delay: 0.0,
            azimuth: profile.mean_azimuth,
            zenith: profile.mean_zenith,
            rx_angle,
        });
    }
    paths
}

/// Deterministic channel sample for `(profile.seed, sample_index)`.
///
/// Entries are rounded to single precision, the resolution of the dataset
/// file, so a written-then-read dataset compares equal to the generated one.
pub fn generate_sample(
    config: &SystemConfig,
    profile: &EnvironmentProfile,
    sample_index: u64,
) -> Result<ChannelSample> {
    config.validate()?;
    profile.validate()?;
    let mut sample = ChannelSample::from_paths(config, &draw_paths(profile, sample_index));
    for h in &mut sample.subbands {
        for r in 0..h.rows() {
            for z in h.row_mut(r) {
                *z = Complex64::new(z.re as f32 as f64, z.im as f32 as f64);
            }
        }
    }
    Ok(sample)
}

/// Generates samples `0..count` of one environment in parallel.
pub fn generate_environment(
    config: &SystemConfig,
    profile: &EnvironmentProfile,
    count: usize,
) -> Result<Vec<ChannelSample>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_sample(config, profile, i))
        .collect()
}

const DATASET_MAGIC: &[u8; 4] = b"CSID";
const DATASET_VERSION: u16 = 1;
const DATASET_HEADER_LEN: usize = 4 + 2 * 6 + 8 * 2 + 4;

/// Writes samples in the `CSID` little-endian format. Entries are stored as
/// `f32` pairs, subband-major, then receive antenna, then transmit antenna.
pub fn write_dataset(path: impl AsRef<Path>, config: &SystemConfig, samples: &[ChannelSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_dataset(&mut w, config, samples)?;
    w.flush()?;
    Ok(())
}

pub fn encode_dataset(w: &mut impl Write, config: &SystemConfig, samples: &[ChannelSample]) -> Result<()> {
    config.validate()?;
    if let Some(i) = samples.iter().position(|s| s.config != *config) {
        return Err(Error::contract(format!("sample {i} has a different system config")));
    }
    let count = u32::try_from(samples.len()).map_err(|_| Error::contract("too many samples"))?;
    w.write_all(DATASET_MAGIC)?;
    for v in [
        DATASET_VERSION,
        config.n_h as u16,
        config.n_v as u16,
        config.n_r as u16,
        config.k_subbands as u16,
        config.n_gran as u16,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&config.subcarrier_spacing.to_le_bytes())?;
    w.write_all(&config.carrier_freq.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    let mut buf = Vec::with_capacity(config.k_subbands * config.n_r * config.n_t() * 8);
    for s in samples {
        buf.clear();
        for h in &s.subbands {
            for z in h.as_slice() {
                buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                buf.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<(SystemConfig, Vec<ChannelSample>)> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_dataset(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.pos,
                format!(
                    "truncated while reading {what} ({} bytes left, {n} needed)",
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<(SystemConfig, Vec<ChannelSample>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != DATASET_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"CSID\""));
    }
    let version = cur.u16("version")?;
    if version != DATASET_VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let n_h = cur.u16("n_h")? as usize;
    let n_v = cur.u16("n_v")? as usize;
    let n_r = cur.u16("n_r")? as usize;
    let k_subbands = cur.u16("k")? as usize;
    let n_gran = cur.u16("n_gran")? as usize;
    let subcarrier_spacing = cur.f64("subcarrier spacing")?;
    let carrier_freq = cur.f64("carrier frequency")?;
    let count = cur.u32("sample count")? as usize;
    debug_assert_eq!(cur.pos, DATASET_HEADER_LEN);
    let config = SystemConfig {
        n_h,
        n_v,
        n_r,
        k_subbands,
        n_gran,
        subcarrier_spacing,
        carrier_freq,
    };
    config
        .validate()
        .map_err(|e| Error::format(6, format!("invalid header: {e}")))?;

    let n_t = config.n_t();
    let mut samples = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let mut subbands = Vec::with_capacity(k_subbands);
        for _ in 0..k_subbands {
            let mut data = Vec::with_capacity(n_r * n_t);
            for _ in 0..n_r * n_t {
                let at = cur.pos;
                let re = cur.f32("entry")? as f64;
                let im = cur.f32("entry")? as f64;
                if !re.is_finite() || !im.is_finite() {
                    return Err(Error::format(at, "non-finite entry"));
                }
                data.push(Complex64::new(re, im));
            }
            subbands.push(ComplexMatrix::new(n_r, n_t, data)?);
        }
        samples.push(ChannelSample { config, subbands });
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(cur.pos, "trailing bytes after last sample"));
    }
    Ok((config, samples))
}
