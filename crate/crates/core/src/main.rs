use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oran_edrl::experiment::{
    compare_run_sets, read_metrics, resolve_config, run_with_progress, Mode, MetricsLog, RunConfig, SetComparison,
};
use oran_edrl::Result;

#[derive(Parser)]
#[command(name = "oran-edrl", version, about = "Evolutionary DRL for O-RAN slice resource management")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with the hybrid algorithm or the DDPG baseline.
    Run {
        #[command(flatten)]
        common: Common,
        /// edrl, drl or eval-only.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Evaluate a saved agent or network without training.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare final-window discounted returns of EDRL and baseline runs.
    Compare {
        /// metrics.csv files of EDRL runs.
        #[arg(long, num_args = 1.., required = true)]
        edrl: Vec<PathBuf>,
        /// metrics.csv files of baseline runs.
        #[arg(long, num_args = 1.., required = true)]
        drl: Vec<PathBuf>,
        /// Directory for comparison.csv; printed only when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress per-generation progress lines.
    #[arg(long)]
    quiet: bool,
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = resolve_config(common.config.as_deref(), std::env::vars())?;
    if let Some(seed) = common.seed {
        cfg.edrl.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cfg: RunConfig, quiet: bool) -> Result<()> {
    cfg.validate()?;
    let summary = run_with_progress(&cfg, &mut |line| {
        if !quiet {
            eprintln!("{line}");
        }
    })?;
    println!(
        "{}: {} records, final discounted return {:.4}, metrics in {}",
        summary.run_id,
        summary.records,
        summary.final_discounted_return,
        summary.metrics_path.display()
    );
    Ok(())
}

fn comparison_log(cmp: &SetComparison) -> Result<MetricsLog> {
    let mut log = MetricsLog::new("compare");
    for (name, spread) in [("edrl", &cmp.edrl), ("drl", &cmp.drl)] {
        log.push(0, &format!("{name}_final_median"), spread.median, "reward")?;
        log.push(0, &format!("{name}_final_q1"), spread.q1, "reward")?;
        log.push(0, &format!("{name}_final_q3"), spread.q3, "reward")?;
        log.push(0, &format!("{name}_runs"), spread.count as f64, "runs")?;
    }
    log.push(0, "median_ratio", cmp.median_ratio, "ratio")?;
    for (i, r) in cmp.runs.iter().enumerate() {
        log.push(i as u64 + 1, "run_ratio", r.ratio, "ratio")?;
    }
    Ok(log)
}

fn compare(edrl: &[PathBuf], drl: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let read = |paths: &[PathBuf]| paths.iter().map(|p| read_metrics(p)).collect::<Result<Vec<_>>>();
    let cmp = compare_run_sets(&read(edrl)?, &read(drl)?)?;
    for w in &cmp.warnings {
        eprintln!("warning: {w}");
    }
    let log = comparison_log(&cmp)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            log.save(&dir.join("comparison.csv"))?;
        }
        None => log.write_csv(std::io::stdout().lock())?,
    }
    println!(
        "EDRL median {:.4} (IQR {:.4}), DRL median {:.4} (IQR {:.4}), ratio {:.4}",
        cmp.edrl.median,
        cmp.edrl.iqr(),
        cmp.drl.median,
        cmp.drl.iqr(),
        cmp.median_ratio
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, mode } => {
            let mut cfg = load(&common)?;
            if let Some(m) = mode {
                cfg.mode = m.parse()?;
            }
            execute(cfg, common.quiet)
        }
        Command::Eval { common, checkpoint } => {
            let mut cfg = load(&common)?;
            cfg.mode = Mode::EvalOnly;
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            execute(cfg, common.quiet)
        }
        Command::Compare { edrl, drl, out } => compare(&edrl, &drl, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
