//! `wcs`: batch front end for the verification suites.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wcs_core::config::RunConfig;
use wcs_core::suite;
use wcs_core::zoo::lens_from_spec;
use wcs_core::{DerivativeMode, Error};

#[derive(Parser)]
#[command(name = "wcs", version, about = "Wodzicki-Chern-Simons invariants and identity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every identity check on one metric.
    VerifyLemmas(Common),
    /// Integrate the pulled-back form of one circle action.
    Invariant(Common),
    /// Iterate and lens covering scaling.
    Scaling(Common),
    /// Timing table for K assembly and grid fills.
    Bench(Common),
    /// Riemann tensor at the grid nodes as CSV.
    CurvatureDump(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Series,
    Fd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Metric spec, e.g. `berger:t=0.5`, `round:dim=5`, `flat-torus:dim=3`.
    #[arg(long)]
    metric: Option<String>,
    /// Action label or `rotation:w=1,0,0`.
    #[arg(long)]
    action: Option<String>,
    /// Homotopy label for the Stokes check.
    #[arg(long)]
    homotopy: Option<String>,
    /// Lens order as `p=3`; repeat for several.
    #[arg(long)]
    lens: Vec<String>,
    /// `fast`, `default` or per-axis counts like `8,8,6,6,6`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_enum)]
    engine: Option<Engine>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    theta_nodes: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Iterate orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    iterates: Option<Vec<u32>>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Write the JSON report (or CSV table) here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of the report on stdout.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.metric {
            cfg.metric = v.clone();
        }
        if let Some(v) = &self.action {
            cfg.action = v.clone();
        }
        if self.homotopy.is_some() {
            cfg.homotopy = self.homotopy.clone();
        }
        if !self.lens.is_empty() {
            cfg.lens = self.lens.iter().map(|s| lens_from_spec(s)).collect::<Result<_, _>>()?;
        }
        if let Some(v) = &self.grid {
            cfg.grid = v.clone();
        }
        if let Some(e) = self.engine {
            cfg.engine = match e {
                Engine::Series => DerivativeMode::Series,
                Engine::Fd => DerivativeMode::FiniteDifference,
            };
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if self.theta_nodes.is_some() {
            cfg.theta_nodes = self.theta_nodes;
        }
        if let Some(v) = self.samples {
            cfg.samples = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.iterates {
            cfg.iterates = v.clone();
        }
        if self.cache_dir.is_some() {
            cfg.cache_dir = self.cache_dir.clone();
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cmd: &Command) -> Result<i32, Error> {
    match cmd {
        Command::VerifyLemmas(c) => {
            let cfg = c.resolve()?;
            let report = suite::verify_lemmas(&cfg)?;
            if let Some(p) = &cfg.out {
                emit(Some(p), &report.to_json())?;
            }
            match c.format {
                Format::Text => print!("{}", report.to_text()),
                Format::Json => println!("{}", report.to_json()),
            }
            Ok(report.exit_code())
        }
        Command::Invariant(c) => {
            let cfg = c.resolve()?;
            let row = suite::invariant(&cfg)?;
            let body = match c.format {
                Format::Text => suite::to_csv(std::slice::from_ref(&row))?,
                Format::Json => serde_json::to_string_pretty(&row)? + "\n",
            };
            emit(cfg.out.as_deref(), &body)?;
            Ok(0)
        }
        Command::Scaling(c) => {
            let cfg = c.resolve()?;
            let outcome = suite::scaling(&cfg)?;
            if let Some(p) = &cfg.out {
                emit(Some(p), &(serde_json::to_string_pretty(&outcome)? + "\n"))?;
            }
            match c.format {
                Format::Text => {
                    print!("{}", outcome.report.to_text());
                    print!("{}", suite::to_csv(&outcome.iterates)?);
                }
                Format::Json => println!("{}", serde_json::to_string_pretty(&outcome)?),
            }
            Ok(outcome.report.exit_code())
        }
        Command::Bench(c) => {
            let cfg = c.resolve()?;
            let table = suite::bench(&cfg)?;
            let body = match c.format {
                Format::Text => table.to_csv()?,
                Format::Json => serde_json::to_string_pretty(&table)? + "\n",
            };
            emit(cfg.out.as_deref(), &body)?;
            Ok(0)
        }
        Command::CurvatureDump(c) => {
            let cfg = c.resolve()?;
            emit(cfg.out.as_deref(), &suite::curvature_dump(&cfg)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("wcs: {e}");
            ExitCode::from(2)
        }
    }
}
