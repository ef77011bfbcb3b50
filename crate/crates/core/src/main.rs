use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use csifb::channelgen::{default_profiles, generate_environment, write_dataset, ProfileSet, SystemConfig};
use csifb::codec::{CodecKind, CodecModel};
use csifb::harness::{
    calibrate_pipeline, dataset_file_name, emit_report, load_environments, run_experiment, run_with_models,
    ExperimentConfig, Gauge, PipelineSpec, ReportFormat, Split,
};
use csifb::standardizer::{build_benchmark, build_benchmark_with_target, Benchmark};
use csifb::{Error, Result};

#[derive(Parser)]
#[command(name = "csifb", version, about = "CSI feedback preprocessing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one dataset file per environment profile.
    Gen {
        /// System configuration JSON (defaults built in).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Environment profile JSON (defaults built in).
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Samples per environment.
        #[arg(long, alias = "samples", default_value_t = 500)]
        samples_per_env: usize,
        /// Offset added to every profile seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and store the standardization benchmark.
    BenchmarkCache {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        target_row: Option<usize>,
        #[arg(long)]
        target_col: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate a codec for one pipeline on the training split.
    Calibrate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "std+eigjo")]
        pipeline: PipelineSpec,
        #[arg(long, value_enum, default_value_t = CodecArg::FixedMask)]
        codec: CodecArg,
        #[arg(long, default_value_t = 6)]
        latent: usize,
        #[arg(long, default_value_t = 6)]
        bits: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score pipelines on held-out seen and unseen environments.
    Run {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated pipelines.
        #[arg(long, default_value = "raw,std,std+eigjo", value_delimiter = ',')]
        pipelines: Vec<PipelineSpec>,
        /// Pre-calibrated model. A bare path is used for every pipeline in
        /// --pipelines; `pipeline=path` pairs may be repeated instead.
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long, value_enum, default_value_t = CodecArg::FixedMask)]
        codec: CodecArg,
        /// Comma-separated latent sizes.
        #[arg(long, default_value = "6", value_delimiter = ',')]
        latent: Vec<usize>,
        #[arg(long, default_value_t = 6)]
        bits: u8,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct DataArgs {
    /// Directory of `env_<id>.csid` files or comma-separated file list.
    #[arg(long, alias = "data")]
    dataset: String,
    /// Leading environments used for training.
    #[arg(long, default_value_t = 4)]
    train_envs: usize,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cached benchmark; rebuilt from the dataset config when absent.
    #[arg(long)]
    benchmark: Option<PathBuf>,
    /// Give every eigenvector a seeded random phase before preprocessing.
    #[arg(long)]
    random_gauge: bool,
}

impl DataArgs {
    fn gauge(&self, p: PipelineSpec) -> PipelineSpec {
        if self.random_gauge {
            p.with_gauge(Gauge::Random)
        } else {
            p
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CodecArg {
    #[value(name = "mask", alias = "fixed-mask")]
    FixedMask,
    #[value(name = "linear", alias = "linear-subspace")]
    LinearSubspace,
}

impl From<CodecArg> for CodecKind {
    fn from(c: CodecArg) -> Self {
        match c {
            CodecArg::FixedMask => CodecKind::FixedMask,
            CodecArg::LinearSubspace => CodecKind::LinearSubspace,
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<SystemConfig> {
    match path {
        Some(p) => SystemConfig::from_json_file(p),
        None => Ok(SystemConfig::default()),
    }
}

fn benchmark_for(args: &DataArgs, config: &SystemConfig) -> Result<Benchmark> {
    let bench = match &args.benchmark {
        Some(p) => Benchmark::load(p)?,
        None => build_benchmark(config)?,
    };
    if bench.shape() != (config.k_subbands, config.n_t()) {
        return Err(Error::contract("benchmark shape does not match the dataset"));
    }
    Ok(bench)
}

fn model_runs(models: &[String], pipelines: &[PipelineSpec]) -> Result<Vec<(PipelineSpec, CodecModel)>> {
    let mut runs = Vec::new();
    for m in models {
        let paired = m
            .split_once('=')
            .and_then(|(p, path)| p.parse::<PipelineSpec>().ok().map(|p| (p, path)));
        match paired {
            Some((p, path)) => runs.push((p, CodecModel::load(path)?)),
            None => {
                if models.len() > 1 {
                    return Err(Error::contract("several --model values need pipeline=path form"));
                }
                let model = CodecModel::load(m)?;
                runs.extend(pipelines.iter().map(|p| (*p, model.clone())));
            }
        }
    }
    Ok(runs)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            config,
            profiles,
            samples_per_env,
            seed,
            out,
        } => {
            let config = load_config(config.as_ref())?;
            let profiles = match profiles {
                Some(p) => ProfileSet::from_json_file(p)?.profiles,
                None => default_profiles(),
            };
            std::fs::create_dir_all(&out)?;
            for mut profile in profiles {
                profile.seed = profile.seed.wrapping_add(seed);
                let data = generate_environment(&config, &profile, samples_per_env)?;
                write_dataset(out.join(dataset_file_name(profile.env_id)), &config, &data)?;
            }
        }
        Command::BenchmarkCache {
            config,
            target_row,
            target_col,
            out,
        } => {
            let config = load_config(config.as_ref())?;
            let bench = match (target_row, target_col) {
                (None, None) => build_benchmark(&config)?,
                (r, c) => build_benchmark_with_target(
                    &config,
                    r.unwrap_or(csifb::standardizer::default_target_row(config.k_subbands)),
                    c.unwrap_or(csifb::standardizer::default_target_col(config.n_t())),
                )?,
            };
            bench.save(out)?;
        }
        Command::Calibrate {
            data,
            pipeline,
            codec,
            latent,
            bits,
            out,
        } => {
            let envs = load_environments(&data.dataset)?;
            let config = envs[0]
                .samples
                .first()
                .ok_or_else(|| Error::contract("empty dataset"))?
                .config;
            let bench = benchmark_for(&data, &config)?;
            let split = Split::new(&envs, data.train_envs, data.train_fraction, data.seed)?;
            let pipeline = data.gauge(pipeline);
            let model = calibrate_pipeline(&envs, &split, &pipeline, &bench, codec.into(), latent, bits, data.seed)?;
            model.save(out)?;
        }
        Command::Run {
            data,
            pipelines,
            models,
            codec,
            latent,
            bits,
            format,
            out,
        } => {
            let envs = load_environments(&data.dataset)?;
            let config = envs[0]
                .samples
                .first()
                .ok_or_else(|| Error::contract("empty dataset"))?
                .config;
            let bench = benchmark_for(&data, &config)?;
            let pipelines: Vec<PipelineSpec> = pipelines.into_iter().map(|p| data.gauge(p)).collect();
            let report = if models.is_empty() {
                let cfg = ExperimentConfig {
                    train_envs: data.train_envs,
                    pipelines,
                    latent_dims: latent,
                    bits,
                    codec: codec.into(),
                    seed: data.seed,
                    train_fraction: data.train_fraction,
                };
                run_experiment(&envs, &bench, &cfg)?
            } else {
                let mut runs = model_runs(&models, &pipelines)?;
                runs.iter_mut().for_each(|(p, _)| *p = data.gauge(*p));
                run_with_models(&envs, &bench, &runs, data.train_envs, data.train_fraction, data.seed)?
            };
            emit_report(&report, format, out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io_or_format() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
