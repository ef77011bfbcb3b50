//! SGCS scoring of full feedback chains and the seen/unseen experiment.
//!
//! A pipeline turns a channel sample into precoders, optionally aligns them
//! by eigenspace projection, moves them to the angular-delay domain,
//! optionally standardizes, and then runs the codec round trip through an
//! actual packed codeword. Each subband is scored against the precoder that
//! entered the chain.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channelgen::{keyed_rng, ChannelSample, SystemConfig};
use crate::codec::{
    self, calibrate, calibrate_many, clip_count, decode, dequantize, encode, pack_codeword, quantize, unpack_codeword,
    CodecKind, CodecModel, CodewordLayout,
};
use crate::error::{Error, Result};
use crate::numkit::{self, ComplexMatrix};
use crate::precoder::{dominant_eigenvectors, eig_joint_optimize, random_gauge, PrecodingMatrix};
use crate::standardizer::{
    control_bit_width, decode_control, destandardize, encode_control, inverse_sparse_transform, sparse_transform,
    standardize_sparse, Benchmark, ControlInfo,
};

/// Squared generalized cosine similarity `|w^H ŵ|² / (‖w‖² ‖ŵ‖²)`.
pub fn sgcs(w: &[Complex64], w_hat: &[Complex64]) -> Result<f64> {
    if w.len() != w_hat.len() {
        return Err(Error::contract(format!(
            "vector lengths {} and {}",
            w.len(),
            w_hat.len()
        )));
    }
    let (a, b) = (numkit::norm(w), numkit::norm(w_hat));
    if a == 0.0 || b == 0.0 {
        return Err(Error::UndefinedMetric("SGCS of a zero vector".into()));
    }
    Ok(numkit::inner(w, w_hat).norm_sqr() / (a * a * b * b))
}

/// Phase convention of the raw eigenvectors entering a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    /// Largest entry real positive.
    Canonical,
    /// Independent uniform phase per subband, keyed by the experiment seed.
    Random,
}

/// Which preprocessing stages a feedback chain applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PipelineSpec {
    pub use_standardization: bool,
    pub use_eigjo: bool,
    pub gauge: Gauge,
}

impl PipelineSpec {
    pub const RAW: Self = Self {
        use_standardization: false,
        use_eigjo: false,
        gauge: Gauge::Canonical,
    };
    pub const STD: Self = Self {
        use_standardization: true,
        use_eigjo: false,
        gauge: Gauge::Canonical,
    };
    pub const STD_EIGJO: Self = Self {
        use_standardization: true,
        use_eigjo: true,
        gauge: Gauge::Canonical,
    };

    pub fn with_gauge(self, gauge: Gauge) -> Self {
        Self { gauge, ..self }
    }

    pub fn name(&self) -> String {
        let base = match (self.use_standardization, self.use_eigjo) {
            (false, false) => "raw",
            (true, false) => "std",
            (true, true) => "std+eigjo",
            (false, true) => "eigjo",
        };
        match self.gauge {
            Gauge::Canonical => base.to_string(),
            Gauge::Random => format!("{base}@random"),
        }
    }

    pub fn control_bits(&self, config: &SystemConfig) -> usize {
        if self.use_standardization {
            control_bit_width(config)
        } else {
            0
        }
    }
}

impl fmt::Display for PipelineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for PipelineSpec {
    type Err = Error;

    /// `raw`, `std`, `std+eigjo` or `eigjo`, optionally suffixed `@random`.
    fn from_str(s: &str) -> Result<Self> {
        let (base, gauge) = match s.trim().split_once('@') {
            Some((b, "random")) => (b, Gauge::Random),
            Some((b, "canonical")) => (b, Gauge::Canonical),
            Some((_, g)) => return Err(Error::contract(format!("unknown gauge '{g}'"))),
            None => (s.trim(), Gauge::Canonical),
        };
        let spec = match base {
            "raw" => Self::RAW,
            "std" => Self::STD,
            "std+eigjo" => Self::STD_EIGJO,
            "eigjo" => Self {
                use_standardization: false,
                use_eigjo: true,
                gauge: Gauge::Canonical,
            },
            other => return Err(Error::contract(format!("unknown pipeline '{other}'"))),
        };
        Ok(spec.with_gauge(gauge))
    }
}

/// Precoders and codec input of one sample under one pipeline.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Rows the reconstruction is scored against.
    pub reference: PrecodingMatrix,
    /// Angular-delay matrix handed to the encoder.
    pub codec_input: ComplexMatrix,
    pub control: Option<ControlInfo>,
}

/// Runs the pre-codec stages. `seed` and `sample_key` drive the random
/// gauge and are ignored for canonical pipelines.
pub fn prepare(
    sample: &ChannelSample,
    pipeline: &PipelineSpec,
    bench: &Benchmark,
    seed: u64,
    sample_key: u64,
) -> Result<Prepared> {
    let mut pm = dominant_eigenvectors(sample)?;
    if pipeline.gauge == Gauge::Random {
        pm = random_gauge(&pm, seed, sample_key);
    }
    if pipeline.use_eigjo {
        pm = eig_joint_optimize(sample, &pm)?.precoding;
    }
    let spar = sparse_transform(pm.matrix())?;
    let (codec_input, control) = if pipeline.use_standardization {
        let (m, c) = standardize_sparse(&spar, bench)?;
        (m, Some(c))
    } else {
        (spar, None)
    };
    Ok(Prepared {
        reference: pm,
        codec_input,
        control,
    })
}

/// Outcome of one sample's feedback round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct SgcsReport {
    pub per_subband: Vec<f64>,
    pub average: f64,
    pub b_total: usize,
    /// Codec outputs clipped by the quantizer.
    pub clipped: usize,
    /// Codec outputs produced.
    pub coded: usize,
}

impl SgcsReport {
    pub fn clip_rate(&self) -> f64 {
        if self.coded == 0 {
            0.0
        } else {
            self.clipped as f64 / self.coded as f64
        }
    }
}

/// Full chain: precode, preprocess, encode, quantize, pack, unpack,
/// dequantize, decode, undo preprocessing, score.
pub fn evaluate_sample(
    sample: &ChannelSample,
    pipeline: &PipelineSpec,
    model: &CodecModel,
    bench: &Benchmark,
    seed: u64,
    sample_key: u64,
) -> Result<SgcsReport> {
    let config = &sample.config;
    let prep = prepare(sample, pipeline, bench, seed, sample_key)?;
    let bits = model.bits_per_element();
    let alpha = model.clip_range();

    let z = encode(model, &prep.codec_input)?;
    let clipped = clip_count(&z, alpha);
    let payload = quantize(&z, bits, alpha)?;
    let control_bits = match prep.control {
        Some(c) => encode_control(c, config)?,
        None => Vec::new(),
    };
    let codeword = pack_codeword(control_bits, payload);
    let layout = CodewordLayout {
        control_bits: pipeline.control_bits(config),
        payload_bits: model.payload_bits(),
    };
    debug_assert_eq!(codeword.b_total, layout.b_total());
    let (ctrl_rx, payload_rx) = unpack_codeword(&codeword.to_bytes(), layout)?;
    let z_hat = dequantize(&payload_rx, bits, alpha, model.latent_dim())?;
    let x_hat = decode(model, &z_hat)?;
    let w_hat = if pipeline.use_standardization {
        destandardize(&x_hat, decode_control(&ctrl_rx, config)?)?
    } else {
        inverse_sparse_transform(&x_hat)?
    };

    let per_subband = (0..config.k_subbands)
        .map(|k| {
            sgcs(prep.reference.row(k), w_hat.row(k)).map_err(|e| match e {
                Error::UndefinedMetric(m) => Error::UndefinedMetric(format!("subband {k}: {m}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let average = per_subband.iter().sum::<f64>() / per_subband.len() as f64;
    Ok(SgcsReport {
        per_subband,
        average,
        b_total: codeword.b_total,
        clipped,
        coded: z.len(),
    })
}

/// Samples of one environment.
#[derive(Debug, Clone)]
pub struct EnvironmentData {
    pub env_id: u32,
    pub samples: Vec<ChannelSample>,
}

/// File name `gen` uses for environment `id`.
pub fn dataset_file_name(env_id: u32) -> String {
    format!("env_{env_id}.csid")
}

fn env_id_from_path(path: &Path) -> Option<u32> {
    path.file_stem()?.to_str()?.strip_prefix("env_")?.parse().ok()
}

/// Loads datasets from a directory of `env_<id>.csid` files (ordered by id)
/// or from a comma-separated list of files (kept in the given order).
/// Files without an `env_<id>` name are numbered by position from 1.
pub fn load_environments(spec: &str) -> Result<Vec<EnvironmentData>> {
    let dir = Path::new(spec);
    let mut paths: Vec<PathBuf> = if dir.is_dir() {
        let mut found = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "csid") {
                found.push(p);
            }
        }
        found.sort_by_key(|p| (env_id_from_path(p).unwrap_or(u32::MAX), p.clone()));
        found
    } else {
        spec.split(',').filter(|s| !s.is_empty()).map(PathBuf::from).collect()
    };
    if paths.is_empty() {
        return Err(Error::contract(format!("no datasets found in '{spec}'")));
    }
    let mut envs = Vec::with_capacity(paths.len());
    let mut config: Option<SystemConfig> = None;
    for (i, p) in paths.drain(..).enumerate() {
        let (cfg, samples) = crate::channelgen::read_dataset(&p)?;
        match config {
            None => config = Some(cfg),
            Some(c) if c != cfg => {
                return Err(Error::contract(format!(
                    "{} uses a different system config",
                    p.display()
                )))
            }
            _ => {}
        }
        envs.push(EnvironmentData {
            env_id: env_id_from_path(&p).unwrap_or(i as u32 + 1),
            samples,
        });
    }
    Ok(envs)
}

/// Train/held-out split of the seen environments.
#[derive(Debug, Clone)]
pub struct Split {
    pub train_envs: usize,
    /// Per seen environment: training sample indices.
    pub train: Vec<Vec<usize>>,
    /// Per seen environment: held-out sample indices.
    pub held_out: Vec<Vec<usize>>,
}

impl Split {
    /// Shuffles each of the first `train_envs` environments with a stream
    /// keyed by `seed` and keeps `⌊fraction · n⌋` samples for training. With
    /// `fraction == 1` the training samples double as the evaluation set.
    pub fn new(envs: &[EnvironmentData], train_envs: usize, fraction: f64, seed: u64) -> Result<Self> {
        if train_envs == 0 {
            return Err(Error::contract("need at least one training environment"));
        }
        if train_envs > envs.len() {
            return Err(Error::contract(format!(
                "{train_envs} training environments requested, dataset has {}",
                envs.len()
            )));
        }
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::contract("train fraction must be in (0, 1]"));
        }
        let mut train = Vec::with_capacity(train_envs);
        let mut held_out = Vec::with_capacity(train_envs);
        for (e, env) in envs[..train_envs].iter().enumerate() {
            let n = env.samples.len();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut keyed_rng(seed, e as u64, SPLIT_STREAM));
            let cut = ((fraction * n as f64).floor() as usize).clamp(1.min(n), n);
            let (tr, ho) = idx.split_at(cut);
            let mut tr = tr.to_vec();
            tr.sort_unstable();
            let mut ho = ho.to_vec();
            ho.sort_unstable();
            if ho.is_empty() {
                ho = tr.clone();
            }
            train.push(tr);
            held_out.push(ho);
        }
        Ok(Self {
            train_envs,
            train,
            held_out,
        })
    }

    /// Sample indices evaluated for environment `e`.
    fn eval_indices(&self, e: usize, n: usize) -> Vec<usize> {
        if e < self.train_envs {
            self.held_out[e].clone()
        } else {
            (0..n).collect()
        }
    }
}

const SPLIT_STREAM: u64 = 0x5911_7000;

/// Key for per-sample random streams: environment in the high bits.
pub fn sample_key(env_index: usize, sample_index: usize) -> u64 {
    ((env_index as u64) << 32) | sample_index as u64
}

/// Matrices this pipeline hands to its encoder, over the training split.
pub fn training_inputs(
    envs: &[EnvironmentData],
    split: &Split,
    pipeline: &PipelineSpec,
    bench: &Benchmark,
    seed: u64,
) -> Result<Vec<ComplexMatrix>> {
    let jobs: Vec<(usize, usize)> = split
        .train
        .iter()
        .enumerate()
        .flat_map(|(e, idx)| idx.iter().map(move |&i| (e, i)))
        .collect();
    jobs.par_iter()
        .map(|&(e, i)| {
            prepare(&envs[e].samples[i], pipeline, bench, seed, sample_key(e, i))
                .map(|p| p.codec_input)
                .map_err(|err| Error::Sample {
                    sample: i,
                    source: Box::new(err),
                })
        })
        .collect()
}

/// Calibrates a codec on the training split, fed the matrices this pipeline
/// would hand to its encoder.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_pipeline(
    envs: &[EnvironmentData],
    split: &Split,
    pipeline: &PipelineSpec,
    bench: &Benchmark,
    kind: CodecKind,
    latent_dim: usize,
    bits: u8,
    seed: u64,
) -> Result<CodecModel> {
    calibrate(
        kind,
        &training_inputs(envs, split, pipeline, bench, seed)?,
        latent_dim,
        bits,
    )
}

/// Settings of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub train_envs: usize,
    pub pipelines: Vec<PipelineSpec>,
    pub latent_dims: Vec<usize>,
    pub bits: u8,
    pub codec: CodecKind,
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train_envs: 4,
            pipelines: vec![PipelineSpec::RAW, PipelineSpec::STD, PipelineSpec::STD_EIGJO],
            latent_dims: vec![6],
            bits: 6,
            codec: CodecKind::FixedMask,
            seed: 0,
            train_fraction: 0.8,
        }
    }
}

/// One line of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub pipeline: String,
    pub env_group: String,
    /// `None` on group-aggregate rows.
    pub env_id: Option<u32>,
    #[serde(rename = "L")]
    pub latent_dim: usize,
    #[serde(rename = "B")]
    pub bits: u8,
    pub b_total: usize,
    pub mean_sgcs: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    pub clip_rate: f64,
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "pipeline",
    "env_group",
    "env_id",
    "L",
    "B",
    "b_total",
    "mean_sgcs",
    "p10",
    "p50",
    "p90",
    "clip_rate",
];

pub const SEEN: &str = "seen";
pub const UNSEEN: &str = "unseen";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    /// Group-aggregate row for `(pipeline, L, group)`.
    pub fn group(&self, pipeline: &PipelineSpec, latent_dim: usize, group: &str) -> Option<&ReportRow> {
        let name = pipeline.name();
        self.rows
            .iter()
            .find(|r| r.env_id.is_none() && r.pipeline == name && r.latent_dim == latent_dim && r.env_group == group)
    }

    pub fn group_mean(&self, pipeline: &PipelineSpec, latent_dim: usize, group: &str) -> Option<f64> {
        self.group(pipeline, latent_dim, group).map(|r| r.mean_sgcs)
    }

    /// Seen-minus-unseen mean SGCS.
    pub fn gap(&self, pipeline: &PipelineSpec, latent_dim: usize) -> Option<f64> {
        Some(self.group_mean(pipeline, latent_dim, SEEN)? - self.group_mean(pipeline, latent_dim, UNSEEN)?)
    }
}

/// Per-sample reports of one `(pipeline, codec)` pair, grouped by
/// environment in input order.
pub fn evaluate_split(
    envs: &[EnvironmentData],
    split: &Split,
    pipeline: &PipelineSpec,
    model: &CodecModel,
    bench: &Benchmark,
    seed: u64,
) -> Result<Vec<Vec<SgcsReport>>> {
    envs.iter()
        .enumerate()
        .map(|(e, env)| {
            split
                .eval_indices(e, env.samples.len())
                .par_iter()
                .map(|&i| {
                    evaluate_sample(&env.samples[i], pipeline, model, bench, seed, sample_key(e, i)).map_err(|err| {
                        Error::Sample {
                            sample: i,
                            source: Box::new(err),
                        }
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Appends per-environment and per-group rows for one evaluated pipeline.
pub fn summarize(
    report: &mut ExperimentReport,
    envs: &[EnvironmentData],
    split: &Split,
    pipeline: &PipelineSpec,
    model: &CodecModel,
    b_total: usize,
    results: &[Vec<SgcsReport>],
) {
    let row = |group: &str, env_id: Option<u32>, reps: &[&SgcsReport]| {
        let mut scores: Vec<f64> = reps.iter().map(|r| r.average).collect();
        let mean = pairwise_sum(&scores) / scores.len().max(1) as f64;
        let clipped: usize = reps.iter().map(|r| r.clipped).sum();
        let coded: usize = reps.iter().map(|r| r.coded).sum();
        ReportRow {
            pipeline: pipeline.name(),
            env_group: group.to_string(),
            env_id,
            latent_dim: model.latent_dim(),
            bits: model.bits_per_element(),
            b_total,
            mean_sgcs: mean,
            p10: codec_percentile(&mut scores, 10.0),
            p50: codec_percentile(&mut scores, 50.0),
            p90: codec_percentile(&mut scores, 90.0),
            clip_rate: if coded == 0 { 0.0 } else { clipped as f64 / coded as f64 },
        }
    };
    for (group, range) in [(SEEN, 0..split.train_envs), (UNSEEN, split.train_envs..envs.len())] {
        if range.is_empty() {
            continue;
        }
        let mut all: Vec<&SgcsReport> = Vec::new();
        for e in range {
            let reps: Vec<&SgcsReport> = results[e].iter().collect();
            report.rows.push(row(group, Some(envs[e].env_id), &reps));
            all.extend(reps);
        }
        report.rows.push(row(group, None, &all));
    }
}

/// Calibrates one codec per `(pipeline, L)` on the training split and scores
/// held-out seen samples and all unseen samples.
pub fn run_experiment(envs: &[EnvironmentData], bench: &Benchmark, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let split = Split::new(envs, cfg.train_envs, cfg.train_fraction, cfg.seed)?;
    let config = envs
        .first()
        .and_then(|e| e.samples.first())
        .map(|s| s.config)
        .ok_or_else(|| Error::contract("empty dataset"))?;
    let mut report = ExperimentReport::default();
    for pipeline in &cfg.pipelines {
        let training = training_inputs(envs, &split, pipeline, bench, cfg.seed)?;
        let models = calibrate_many(cfg.codec, &training, &cfg.latent_dims, cfg.bits)?;
        drop(training);
        for model in &models {
            let results = evaluate_split(envs, &split, pipeline, model, bench, cfg.seed)?;
            let b_total = model.payload_bits() + pipeline.control_bits(&config);
            summarize(&mut report, envs, &split, pipeline, model, b_total, &results);
        }
    }
    Ok(report)
}

/// Scores pre-calibrated models, one per pipeline.
pub fn run_with_models(
    envs: &[EnvironmentData],
    bench: &Benchmark,
    runs: &[(PipelineSpec, CodecModel)],
    train_envs: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<ExperimentReport> {
    let split = Split::new(envs, train_envs, train_fraction, seed)?;
    let config = envs
        .first()
        .and_then(|e| e.samples.first())
        .map(|s| s.config)
        .ok_or_else(|| Error::contract("empty dataset"))?;
    let mut report = ExperimentReport::default();
    for (pipeline, model) in runs {
        let results = evaluate_split(envs, &split, pipeline, model, bench, seed)?;
        let b_total = model.payload_bits() + pipeline.control_bits(&config);
        summarize(&mut report, envs, &split, pipeline, model, b_total, &results);
    }
    Ok(report)
}

fn codec_percentile(values: &mut [f64], p: f64) -> f64 {
    codec::percentile(values, p)
}

/// Pairwise summation; the result depends only on the order of `v`.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::contract(format!("unknown report format '{other}'"))),
        }
    }
}

pub fn write_report(report: &ExperimentReport, format: ReportFormat, out: impl Write) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(REPORT_COLUMNS)?;
            for row in &report.rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &report.rows)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    write_report(report, format, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sgcs_examples() {
        let w = [c(0.3, -0.1), c(1.0, 0.4)];
        assert!((sgcs(&w, &w).unwrap() - 1.0).abs() < 1e-15);
        let rot = Complex64::from_polar(1.0, 2.1);
        let wr: Vec<_> = w.iter().map(|z| z * rot).collect();
        assert!((sgcs(&w, &wr).unwrap() - 1.0).abs() < 1e-15);
        let h = 1.0 / 2f64.sqrt();
        let e1 = [c(1.0, 0.0), c(0.0, 0.0)];
        assert!((sgcs(&e1, &[c(h, 0.0), c(h, 0.0)]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(sgcs(&e1, &[c(0.0, 0.0); 2]), Err(Error::UndefinedMetric(_))));
        assert!(sgcs(&e1, &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn pipeline_names_roundtrip() {
        for s in ["raw", "std", "std+eigjo", "eigjo", "std@random", "raw@random"] {
            let p: PipelineSpec = s.parse().unwrap();
            assert_eq!(p.name(), s);
        }
        assert!("foo".parse::<PipelineSpec>().is_err());
        assert!("std@weird".parse::<PipelineSpec>().is_err());
    }

    #[test]
    fn pairwise_matches_naive_for_small() {
        let v: Vec<f64> = (0..100).map(|i| i as f64 * 0.25).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_report(&ExperimentReport::default(), ReportFormat::Csv, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "pipeline,env_group,env_id,L,B,b_total,mean_sgcs,p10,p50,p90,clip_rate\n"
        );
    }
}
