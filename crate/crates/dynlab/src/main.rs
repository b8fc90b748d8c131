use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use dynlab::aggregate::RunSummary;
use dynlab::config::{apply_overrides, read_json, set_path, ExperimentConfig};
use dynlab::experiment::{run_experiment, summary_path, ExperimentSummary};
use dynlab::formats::{write_json, Table};
use dynlab::plot::{emit_plot, from_table, PlotData, PlotKind};
use dynlab::sweep::{run_sweep, SweepConfig, SweepSummary};
use dynlab::verify::{verify_family, VerifyOptions};
use dynlab_core::analysis::VerificationReport;

/// Simulate, verify and plot learning dynamics in zero-sum games.
#[derive(Debug, Parser)]
#[command(name = "dynlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; run k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs (instances, for `verify`).
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// `dotted.key=value`, applied after the file; the value is JSON or a bare string.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write trajectories and a summary.
    Simulate(Common),
    /// Check the convergence theory on random or specified bilinear instances.
    Verify(Common),
    /// Run a grid of configurations.
    Sweep(Common),
    /// Render a trajectory CSV or a summary JSON to SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Trajectory2d,
    Series,
    Boxplot,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Trajectory CSV, `summary.json` or `sweep_summary.json`.
    #[arg(long)]
    input: PathBuf,
    /// Columns to plot, comma separated (CSV input only).
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// SVG path; the companion CSV takes the same stem.
    #[arg(long)]
    out: PathBuf,
}

fn with_flags(mut v: Value, c: &Common, runs_key: &str) -> Result<Value> {
    if let Some(seed) = c.seed {
        set_path(&mut v, "seed", seed.into())?;
    }
    if let Some(runs) = c.runs {
        set_path(&mut v, runs_key, runs.into())?;
    }
    apply_overrides(&mut v, &c.overrides)?;
    Ok(v)
}

fn require_config(c: &Common) -> Result<&Path> {
    c.config.as_deref().context("--config is required")
}

fn simulate(c: &Common) -> Result<ExitCode> {
    let v = with_flags(read_json(require_config(c)?)?, c, "runs")?;
    let cfg = ExperimentConfig::from_value(v)?;
    let s = run_experiment(&cfg, Some(&c.out))?;
    for r in &s.last_epoch {
        println!(
            "lr {:e}: median final {:?} {:.6e} (q1 {:.6e}, q3 {:.6e}) over {} runs",
            r.lr.unwrap_or(f64::NAN),
            s.metric,
            r.stats.median,
            r.stats.q1,
            r.stats.q3,
            r.selected.len()
        );
    }
    if let Some(b) = &s.best_validation_loss {
        println!("best validation loss: median {:?} {:.6e}", s.metric, b.stats.median);
    }
    let mut failed = Vec::new();
    for f in &s.verification_files {
        let r = read_report(&c.out.join(f))?;
        let bad = r.failures().count();
        if !r.precondition_violations.is_empty() {
            println!(
                "verification: {f}: not applicable ({})",
                r.precondition_violations.join("; ")
            );
        } else {
            println!("verification: {f}: {} checks, {bad} failed", r.checks.len());
        }
        if bad > 0 {
            failed.push(f);
        }
    }
    println!("summary: {}", summary_path(&c.out).display());
    if !failed.is_empty() {
        eprintln!("verification checks failed in {failed:?}");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn read_report(path: &Path) -> Result<VerificationReport> {
    Ok(serde_json::from_value(read_json(path)?)?)
}

fn verify(c: &Common) -> Result<ExitCode> {
    let v = match &c.config {
        Some(p) => read_json(p)?,
        None => Value::Object(Default::default()),
    };
    let v = with_flags(v, c, "instances")?;
    let opts: VerifyOptions = serde_json::from_value(v).context("invalid verify options")?;
    let s = verify_family(&opts)?;
    let path = c.out.join("verification.json");
    write_json(&path, &s)?;
    println!(
        "{} instances, {} checks, {} failed: {}",
        s.reports.len(),
        s.checks,
        s.failures,
        if s.passed { "PASS" } else { "FAIL" }
    );
    for f in &s.failing {
        println!("  {f}");
    }
    println!("report: {}", path.display());
    Ok(if s.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn sweep(c: &Common) -> Result<ExitCode> {
    let mut sw = SweepConfig::load(require_config(c)?, &[])?;
    sw.base = with_flags(sw.base, c, "runs")?;
    let (s, _) = run_sweep(&sw, Some(&c.out))?;
    for cell in &s.cells {
        let best = cell
            .best_validation_loss
            .map(|q| format!("{:.6e}", q.median))
            .unwrap_or_else(|| "-".into());
        let last: Vec<String> = cell
            .last_epoch
            .iter()
            .map(|(lr, q)| format!("{lr:e}:{:.6e}", q.median))
            .collect();
        println!(
            "{:<24} best-validation {best}  last-epoch {}",
            cell.name,
            last.join(" ")
        );
    }
    println!("summary: {}", c.out.join("sweep_summary.json").display());
    Ok(ExitCode::SUCCESS)
}

fn summary_boxplot(v: Value) -> Result<PlotData> {
    if let Ok(s) = serde_json::from_value::<SweepSummary>(v.clone()) {
        let groups = s
            .cells
            .iter()
            .map(|c| {
                let q = c.best_validation_loss.or_else(|| c.last_epoch.first().map(|x| x.1));
                q.map(|q| (c.name.clone(), q)).context("cell has no summary")
            })
            .collect::<Result<_>>()?;
        return Ok(PlotData::Boxplot {
            label: format!("{:?}", s.metric).to_lowercase(),
            groups,
        });
    }
    let s: ExperimentSummary = serde_json::from_value(v).context("not a summary file")?;
    let mut groups: Vec<(String, _)> = s
        .last_epoch
        .iter()
        .map(|r: &RunSummary| (format!("last lr={}", r.lr.unwrap_or(f64::NAN)), r.stats))
        .collect();
    if let Some(b) = &s.best_validation_loss {
        groups.push(("best validation".into(), b.stats));
    }
    Ok(PlotData::Boxplot {
        label: format!("{:?}", s.metric).to_lowercase(),
        groups,
    })
}

fn plot(p: &PlotArgs) -> Result<ExitCode> {
    let kind = match p.kind {
        Kind::Trajectory2d => PlotKind::Trajectory2d,
        Kind::Series => PlotKind::Series,
        Kind::Boxplot => PlotKind::Boxplot,
    };
    let is_json = p.input.extension().is_some_and(|e| e == "json");
    let data = if is_json {
        if kind != PlotKind::Boxplot {
            bail!("summary files can only be drawn as a boxplot");
        }
        summary_boxplot(read_json(&p.input)?)?
    } else {
        if p.columns.is_empty() {
            bail!("--columns is required for CSV input");
        }
        from_table(&Table::read(&p.input)?, kind, &p.columns)?
    };
    let csv = emit_plot(&data, &p.out)?;
    println!("plot: {} (data: {})", p.out.display(), csv.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Verify(c) => verify(c),
        Command::Sweep(c) => sweep(c),
        Command::Plot(p) => plot(p),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
