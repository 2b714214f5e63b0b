//! `qdenoise` command-line harness.
//!
//! Every subcommand loads a scenario (preset name or TOML file), applies
//! `--set` overrides and writes its artifacts into `--out`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use qdenoise::experiments::{
    ablation_suite, ablation_variants, build_dataset, compression_report, eval_doa, eval_reconstruction,
    spectrum_compare, train, width_timing, write_csv, CsvHeader, CurvePoint, Dataset, ReconRow, Split,
};
use qdenoise::nn::checkpoint::{load_checkpoint, save_checkpoint};
use qdenoise::{DenoiserModel, ScenarioConfig};

#[derive(Parser)]
#[command(name = "qdenoise", version, about = "Quantized-array denoising and DOA experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Preset name (desk, extended, paper) or path to a TOML scenario.
    #[arg(long, default_value = "desk")]
    config: String,
    /// Dotted-path override such as `train.lr=0.001`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replaces the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for data generation and trials.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct DataArg {
    /// Directory holding train.qdst and test.qdst; generated in memory when
    /// omitted.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write train.qdst and test.qdst.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train the denoiser; writes model.qdnn and train_curve.csv.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
    },
    /// Per-SNR reconstruction loss; writes recon_loss.csv.
    EvalRecon {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// DOA MSE against SNR for every series; writes doa_mse.csv.
    EvalDoa {
        #[command(flatten)]
        common: Common,
        /// Adds the reconstructed series when given.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// MUSIC spectra for one realization; writes spectrum.csv.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// fp32 against fp16; writes model_fp16.qdnn and compression.csv.
    Compress {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Training time per hidden width; writes bench.csv.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
    },
    /// Variant sweep; writes ablation.csv and ablation_timing.csv.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Generate { common }
            | Command::Train { common, .. }
            | Command::EvalRecon { common, .. }
            | Command::EvalDoa { common, .. }
            | Command::Spectrum { common, .. }
            | Command::Compress { common, .. }
            | Command::Bench { common, .. }
            | Command::Ablate { common, .. } => common,
        }
    }
}

/// Failure before any work starts (bad flags, config or overrides).
#[derive(Debug)]
struct Invalid(anyhow::Error);

fn load_config(common: &Common) -> Result<ScenarioConfig, Invalid> {
    let path = Path::new(&common.config);
    let base = if path.is_file() {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Invalid)?;
        ScenarioConfig::from_toml_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(Invalid)?
    } else if let Some(c) = ScenarioConfig::preset(&common.config) {
        c
    } else {
        return Err(Invalid(anyhow::anyhow!(
            "config {:?} is neither a file nor a preset (desk, extended, paper)",
            common.config
        )));
    };
    let mut config = base.with_overrides(&common.overrides).map_err(|e| Invalid(e.into()))?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate().map_err(|e| Invalid(e.into()))?;
    Ok(config)
}

fn datasets(config: &ScenarioConfig, data: &DataArg) -> anyhow::Result<(Dataset, Dataset)> {
    let Some(dir) = &data.data else {
        return Ok((build_dataset(config, Split::Train)?, build_dataset(config, Split::Test)?));
    };
    let read = |name: &str| -> anyhow::Result<Dataset> {
        let p = dir.join(name);
        let d = Dataset::read(&p).with_context(|| format!("reading {}", p.display()))?;
        if d.sensors != config.array.sensors || d.num_sources != config.sources.count {
            bail!(
                "{} holds M={} K={}, config has M={} K={}",
                p.display(),
                d.sensors,
                d.num_sources,
                config.array.sensors,
                config.sources.count
            );
        }
        Ok(d)
    };
    Ok((read("train.qdst")?, read("test.qdst")?))
}

fn test_set(config: &ScenarioConfig, data: &DataArg) -> anyhow::Result<Dataset> {
    match &data.data {
        Some(dir) => Ok(Dataset::read(dir.join("test.qdst"))?),
        None => Ok(build_dataset(config, Split::Test)?),
    }
}

fn load_model(path: &Path) -> anyhow::Result<DenoiserModel<f32>> {
    load_checkpoint(path).with_context(|| format!("loading {}", path.display()))
}

fn csv(out: &Path, name: &str, header: CsvHeader, points: &[CurvePoint]) -> anyhow::Result<()> {
    let p = out.join(name);
    write_csv(&p, &header, points).with_context(|| format!("writing {}", p.display()))?;
    println!("wrote {}", p.display());
    Ok(())
}

fn run(command: &Command, config: &ScenarioConfig) -> anyhow::Result<()> {
    let out = &command.common().out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let header = |kind: &str| CsvHeader::new(kind, config);
    match command {
        Command::Generate { .. } => {
            for (split, name) in [(Split::Train, "train.qdst"), (Split::Test, "test.qdst")] {
                let d = build_dataset(config, split)?;
                d.write(out.join(name))?;
                println!("wrote {} ({} records)", out.join(name).display(), d.len());
            }
        }
        Command::Train { data, .. } => {
            let (tr, te) = datasets(config, data)?;
            let report = train(config, &tr, &te)?;
            save_checkpoint(&report.model, out.join("model.qdnn"))?;
            println!("wrote {}", out.join("model.qdnn").display());
            let h = header("train-curve")
                .with("steps", report.steps)
                .with("diverged_epoch", report.diverged.map_or("none".into(), |e| e.to_string()));
            csv(out, "train_curve.csv", h, &report.curve_points())?;
            if let Some(l) = report.final_test_loss() {
                println!("final test loss {l:.6e} after {} steps ({:.1} s)", report.steps, report.seconds);
            }
            if let Some(e) = report.diverged {
                eprintln!("training diverged at epoch {e}; kept the last finite model");
            }
        }
        Command::EvalRecon { data, checkpoint, .. } => {
            let model = load_model(checkpoint)?;
            let rows = eval_reconstruction(&model, &test_set(config, data)?)?;
            csv(out, "recon_loss.csv", header("recon-loss"), &ReconRow::to_points(&rows))?;
        }
        Command::EvalDoa { checkpoint, .. } => {
            let model = checkpoint.as_deref().map(load_model).transpose()?;
            let table = eval_doa(model.as_ref(), config)?;
            let h = header("doa-mse").with("trials", config.music.trials);
            csv(out, "doa_mse.csv", h, &table.to_points())?;
        }
        Command::Spectrum { checkpoint, .. } => {
            let model = checkpoint.as_deref().map(load_model).transpose()?;
            let s = spectrum_compare(model.as_ref(), config)?;
            let truth: Vec<String> = s.truth.iter().map(f64::to_string).collect();
            let h = header("spectrum")
                .with("trial_seed", s.seed)
                .with("snr_db", config.spectrum.snr_db)
                .with("angles", truth.join(" "));
            csv(out, "spectrum.csv", h, &s.to_points())?;
        }
        Command::Compress { data, checkpoint, .. } => {
            let model = load_model(checkpoint)?;
            let r = compression_report(&model, &test_set(config, data)?, config)?;
            save_checkpoint(&r.model_fp16, out.join("model_fp16.qdnn"))?;
            println!("wrote {}", out.join("model_fp16.qdnn").display());
            let h = header("compression")
                .with("fp32_payload_bytes", r.fp32_payload)
                .with("fp16_payload_bytes", r.fp16_payload)
                .with("saturated", r.half.saturated);
            csv(out, "compression.csv", h, &r.to_points())?;
        }
        Command::Bench { data, .. } => {
            let (tr, te) = datasets(config, data)?;
            let times = width_timing(config, &config.bench.widths, &tr, &te)?;
            let points: Vec<CurvePoint> = times
                .iter()
                .map(|&(w, s)| CurvePoint::new("train-seconds", w as f64, s, 0.0))
                .collect();
            let h = header("bench")
                .with("epochs", config.bench.epochs)
                .with("threads", rayon::current_num_threads())
                .with("machine", format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS));
            csv(out, "bench.csv", h, &points)?;
        }
        Command::Ablate { data, .. } => {
            let (tr, te) = datasets(config, data)?;
            let r = ablation_suite(config, &ablation_variants(config), &tr, &te)?;
            let diverged: Vec<&str> = r
                .results
                .iter()
                .filter(|v| v.diverged.is_some())
                .map(|v| v.name.as_str())
                .collect();
            let h = header("ablation")
                .with("epochs", config.ablation.epochs)
                .with("diverged", if diverged.is_empty() { "none".into() } else { diverged.join(" ") });
            csv(out, "ablation.csv", h, &r.to_points())?;
            csv(out, "ablation_timing.csv", header("ablation-timing"), &r.timing_points())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let common = cli.command.common();
    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let config = match load_config(common) {
        Ok(c) => c,
        Err(Invalid(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    match run(&cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
