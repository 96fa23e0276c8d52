use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heterosim_core::report::{emit_report, Table};
use heterosim_core::{run, Error, ExperimentConfig, ExperimentKind, Format, WorkloadSection};

#[derive(Parser)]
#[command(name = "heterosim", version, about = "Analytic simulator for heterogeneous 3D transformer fine-tuning accelerators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline model on one workload.
    Simulate(Common),
    /// Sweep systolic array shapes or weight precisions.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the three NoC topologies.
    Noc {
        #[arg(long)]
        compare: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Die and stack cost, including the planar-vs-stacked comparison.
    Cost {
        #[arg(long = "compare-2d")]
        compare_2d: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Shape,
    Quant,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in workload preset; overrides the config file's workload.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<Format>>,
    #[arg(long)]
    seed: Option<u64>,
}

const DEFAULT_PRESET: &str = "gpt2-medium";

fn build_config(kind: ExperimentKind, c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(path) => {
            let mut cfg = ExperimentConfig::load(path)?;
            cfg.experiment = kind;
            cfg
        }
        None => ExperimentConfig::new(kind, WorkloadSection::from_preset(DEFAULT_PRESET)),
    };
    if let Some(p) = &c.preset {
        cfg.workload = WorkloadSection::from_preset(p);
    }
    if let Some(dir) = &c.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(f) = &c.format {
        cfg.output.formats = f.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn render_table(t: &Table, out: &mut String) {
    let header: Vec<String> = t.columns.iter().map(|c| c.header()).collect();
    let rows: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(|c| c.to_string()).collect()).collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let mut line = |cells: &[String]| {
        let s: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(s.join("  ").trim_end());
        out.push('\n');
    };
    line(&[format!("== {}", t.name)]);
    line(&header);
    for r in &rows {
        line(r);
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (kind, common) = match &cli.command {
        Command::Simulate(c) => (ExperimentKind::Simulate, c),
        Command::Sweep { axis: Axis::Shape, common } => (ExperimentKind::ShapeSweep, common),
        Command::Sweep { axis: Axis::Quant, common } => (ExperimentKind::QuantSweep, common),
        // Comparison is the only mode of these subcommands; the flags are accepted for clarity.
        Command::Noc { common, .. } => (ExperimentKind::NocCompare, common),
        Command::Cost { common, .. } => (ExperimentKind::CostCompare, common),
    };
    let cfg = build_config(kind, common)?;
    let report = run(&cfg)?;
    let shown = match kind {
        ExperimentKind::CostCompare => &["die_cost", "stack_cost", "planar_vs_stacked"][..],
        ExperimentKind::NocCompare => &["noc_compare"][..],
        ExperimentKind::QuantSweep => &["quant_sweep"][..],
        _ => &["summary"][..],
    };
    let mut text = String::new();
    for name in shown {
        if let Some(t) = report.table(name) {
            render_table(t, &mut text);
        }
    }
    let files = emit_report(&report, &cfg.output.formats, &cfg.output.dir)?;
    text.push_str(&format!("wrote {} files to {}\n", files.len(), cfg.output.dir.display()));
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                ref e if e.is_config_error() => 2,
                Error::Infeasible { .. } => 3,
                _ => 1,
            })
        }
    }
}
