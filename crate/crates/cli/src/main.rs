use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dora_core::harness::{
    load_config, oracle_rows, plot_files, run_to_dir, sweep, write_oracle, ExperimentConfig,
    PlotKind, PlotOptions, RunOutput,
};

#[derive(Parser)]
#[command(name = "dora", version, about = "E-value exploration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (TOML, one experiment per table).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Concurrent trials.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments and write one raw metrics CSV per experiment.
    Run {
        #[command(flatten)]
        common: Common,
        /// Only run the named experiment(s).
        #[arg(long = "experiment")]
        experiments: Vec<String>,
    },
    /// Run every experiment, then write aggregated mean curves.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Dump Q*, the optimal action flag and the optimal occupancy.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Render CSV output as an SVG chart.
    Plot {
        /// curves, fig6, histogram or heatmap.
        #[arg(long, default_value = "curves")]
        kind: String,
        /// SVG file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log_abscissa: bool,
        #[arg(long)]
        title: Option<String>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn report(run: &RunOutput) {
    let cfg = &run.config;
    eprintln!(
        "{}: {} trials x {} episodes of {} on {}",
        cfg.name, cfg.trials, cfg.episodes, cfg.agent, cfg.env
    );
    for (seed, msg) in run.failures() {
        eprintln!("  trial {seed} aborted: {msg}");
    }
}

fn select<'a>(cfgs: &'a [ExperimentConfig], names: &[String]) -> Result<Vec<&'a ExperimentConfig>> {
    if names.is_empty() {
        return Ok(cfgs.iter().collect());
    }
    names
        .iter()
        .map(|n| {
            cfgs.iter().find(|c| &c.name == n).with_context(|| {
                let known: Vec<_> = cfgs.iter().map(|c| c.name.as_str()).collect();
                format!("no experiment '{n}'; defined: {}", known.join(", "))
            })
        })
        .collect()
}

fn run_cmd(common: &Common, names: &[String]) -> Result<()> {
    let cfgs = load_config(&common.config)?;
    for cfg in select(&cfgs, names)? {
        let (run, files) = run_to_dir(cfg, common.workers, &common.out)?;
        report(&run);
        for p in std::iter::once(&files.raw).chain(&files.extra) {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn sweep_cmd(common: &Common) -> Result<()> {
    let cfgs = load_config(&common.config)?;
    let out = sweep(&cfgs, common.workers, &common.out)?;
    let mut failed = 0;
    for (name, result) in &out.runs {
        match result {
            Ok((run, files)) => {
                report(run);
                println!("{}", files.raw.display());
            }
            Err(e) => {
                failed += 1;
                eprintln!("{name}: {e}");
            }
        }
    }
    println!("{}", out.aggregated.display());
    if failed > 0 {
        bail!("{failed} of {} experiments failed", out.runs.len());
    }
    Ok(())
}

fn oracle_cmd(config: &Path, out: &Path) -> Result<()> {
    let cfgs = load_config(config)?;
    std::fs::create_dir_all(out)?;
    for cfg in &cfgs {
        let rows = oracle_rows(&cfg.env, cfg.gamma).with_context(|| format!("[{}]", cfg.name))?;
        let path = out.join(format!("{}.oracle.csv", cfg.out));
        let file = std::fs::File::create(&path)?;
        write_oracle(std::io::BufWriter::new(file), &rows)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, experiments } => run_cmd(common, experiments),
        Command::Sweep { common } => sweep_cmd(common),
        Command::Oracle { config, out } => oracle_cmd(config, out),
        Command::Plot {
            kind,
            out,
            log_abscissa,
            title,
            inputs,
        } => (|| {
            let kind: PlotKind = kind.parse()?;
            let opts = PlotOptions {
                log_abscissa: *log_abscissa,
                title: title.clone(),
            };
            let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
            let svg = plot_files(kind, &inputs, &opts)?;
            std::fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", out.display());
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
