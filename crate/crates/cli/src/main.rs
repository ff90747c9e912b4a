//! `gancomm` command-line tool.
//!
//! Exit status is 0 on success, 2 on a usage error and 1 on a runtime failure.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gancomm::eval::{
    self, awgn_conditions, bler_sweep_baseline, bler_sweep_learned, BaselineSystem, FidelityCondition, SweepSpec,
};
use gancomm::train::{PhaseSummary, Trainer};
use gancomm::{load_config, Models, RealChannel, TrainConfig};
use num_complex::Complex64;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

const MANIFEST_FILE: &str = "manifest.json";
const SCATTER_SAMPLES: usize = 500;

#[derive(Parser, Debug)]
#[command(name = "gancomm", version, about = "End-to-end learned transceivers with a conditional GAN channel surrogate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train transmitter, receiver and channel GAN.
    Train {
        /// JSON training config; missing keys take their defaults.
        #[arg(long)]
        config: PathBuf,
        /// Run directory for checkpoints, log and manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// BLER sweep of a trained system over the real channel.
    Eval {
        /// Run directory written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// JSON sweep spec.
        #[arg(long)]
        sweep: PathBuf,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG plot of the curve.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// BLER sweep of a classical reference chain.
    Baseline {
        #[arg(long, value_parser = parse_system)]
        system: BaselineSystem,
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Constellation or generated-vs-real scatter data as CSV.
    Dump {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        what: DumpKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DumpKind {
    Constellation,
    Gan,
}

fn parse_system(s: &str) -> Result<BaselineSystem, String> {
    s.parse().map_err(|e: gancomm::Error| e.to_string())
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'static str,
    seed: u64,
    config: &'a TrainConfig,
    started_unix: u64,
    outputs: Vec<&'static str>,
}

/// Writes the manifest through a temporary file; fails if one already exists.
fn write_manifest(dir: &Path, cfg: &TrainConfig) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    if path.exists() {
        bail!("{} already exists; refusing to overwrite a previous run", path.display());
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        outputs: vec![
            gancomm::train::TX_FILE,
            gancomm::train::RX_FILE,
            gancomm::train::G_FILE,
            gancomm::train::D_FILE,
            gancomm::train::LOG_FILE,
            gancomm::train::CONFIG_FILE,
        ],
    };
    let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    let linked = fs::hard_link(&tmp, &path);
    let _ = fs::remove_file(&tmp);
    linked.with_context(|| format!("creating {}", path.display()))
}

fn train(config: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(config).with_context(|| format!("loading {}", config.display()))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_manifest(out, &cfg)?;
    let mut trainer = Trainer::new(&cfg)?;
    let stdout = std::io::stdout();
    let result = trainer.run(|s: &PhaseSummary| {
        let mut lock = stdout.lock();
        let _ = writeln!(lock, "iter={} phase={} loss={}", s.iteration, s.phase, s.loss);
    });
    trainer.save(out).with_context(|| format!("writing checkpoints to {}", out.display()))?;
    result.context("training aborted; partial checkpoints were written")?;
    log::info!("checkpoints written to {}", out.display());
    Ok(())
}

fn load_models(dir: &Path) -> Result<Models> {
    Models::load(dir).with_context(|| format!("loading checkpoints from {}", dir.display()))
}

fn load_sweep(path: &Path) -> Result<SweepSpec> {
    SweepSpec::load(path).with_context(|| format!("loading {}", path.display()))
}

fn evaluate(checkpoint: &Path, sweep: &Path, out: &Path, plot: Option<&Path>) -> Result<()> {
    let m = load_models(checkpoint)?;
    let spec = load_sweep(sweep)?;
    let points = bler_sweep_learned(&m.tx, &m.rx, m.cfg.channel, &spec, spec.seed.unwrap_or(m.cfg.seed))?;
    eval::write_bler_csv(out, &points)?;
    if let Some(p) = plot {
        fs::write(p, eval::bler_svg(&[("learned", &points)])).with_context(|| format!("writing {}", p.display()))?;
    }
    for p in &points {
        log::info!("Eb/N0 {} dB: BLER {:.3e} ({} errors / {} trials)", p.ebn0_db, p.bler, p.errors, p.trials);
    }
    Ok(())
}

fn baseline(system: BaselineSystem, sweep: &Path, out: &Path) -> Result<()> {
    let spec = load_sweep(sweep)?;
    let points = bler_sweep_baseline(system, system.channel(), &spec, spec.seed.unwrap_or(1))?;
    eval::write_bler_csv(out, &points)?;
    Ok(())
}

fn dump(checkpoint: &Path, what: DumpKind, out: &Path) -> Result<()> {
    let m = load_models(checkpoint)?;
    match what {
        DumpKind::Constellation => eval::constellation_dump(&m.tx, out)?,
        DumpKind::Gan => {
            let cfg = &m.cfg;
            let channel = RealChannel::new(cfg.channel, cfg.snr_train().noise_std(), cfg.pilots().max(1))?;
            let conditions: Vec<FidelityCondition> = if cfg.channel.is_fading() {
                let hs = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.5, -0.5)];
                hs.iter()
                    .flat_map(|&h| (0..cfg.alphabet()).map(move |message| FidelityCondition { message, h: Some(h) }))
                    .collect()
            } else {
                awgn_conditions(&m.tx)
            };
            eval::gan_scatter_dump(&m.g, &m.tx, &channel, &conditions, SCATTER_SAMPLES, cfg.seed, out)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out } => train(&config, &out),
        Command::Eval { checkpoint, sweep, out, plot } => evaluate(&checkpoint, &sweep, &out, plot.as_deref()),
        Command::Baseline { system, sweep, out } => baseline(system, &sweep, &out),
        Command::Dump { checkpoint, what, out } => dump(&checkpoint, what, &out),
    }
}

fn main() -> ExitCode {
    let mut logger = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty()) {
        logger.write_style(env_logger::WriteStyle::Never);
    }
    logger.init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}
