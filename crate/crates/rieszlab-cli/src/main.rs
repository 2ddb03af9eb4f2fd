//! Batch driver: generate or load a measure, run the diagnostic pipeline,
//! and emit a JSON report with SVG figures and CSV tables.

mod config;
mod pipeline;
mod svg;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{parse_kv_args, parse_kv_file, RunConfig};

const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_SCALE_WINDOW: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(name = "rieszlab", version, about = "Geometric diagnostics on discrete measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Config file (flat key=value lines); flags and key=value args win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input point cloud CSV (x0,...,xd,w).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated stage list (lattice,riesz,flatness,baup,carleson).
    #[arg(long)]
    stages: Option<String>,
    /// Hole-radius fraction for the non-BAUP test.
    #[arg(long)]
    delta: Option<f64>,
    /// Flatness window factor (must exceed 5).
    #[arg(long = "A")]
    a_factor: Option<f64>,
    /// Flatness threshold.
    #[arg(long)]
    alpha: Option<f64>,
    /// Cell cutoff margin (at most 1/48).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    kmin: Option<i32>,
    #[arg(long)]
    kmax: Option<i32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (flag wins over RIESZLAB_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long = "tree-theta")]
    tree_theta: Option<f64>,
    /// monopole or dipole.
    #[arg(long = "tree-order")]
    tree_order: Option<String>,
    /// Additional key=value settings (same keys as the config file).
    #[arg(trailing_var_arg = true)]
    kv: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a measure and write it as CSV.
    Gen(Overrides),
    /// Run the configured pipeline stages and write report.json.
    Run(Overrides),
    /// Check a configuration without computing anything.
    Validate(Overrides),
    /// Summarize an existing report.json.
    Report {
        /// Path to a report.json.
        #[arg(long)]
        input: PathBuf,
    },
}

impl Overrides {
    /// Merge order: config file, then key=value args, then flags.
    fn merged(&self) -> Result<BTreeMap<String, String>> {
        let mut map = match &self.config {
            Some(path) => parse_kv_file(path)?,
            None => BTreeMap::new(),
        };
        map.extend(parse_kv_args(&self.kv)?);
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        set("input", self.input.as_ref().map(|p| p.display().to_string()));
        set("out", self.out.as_ref().map(|p| p.display().to_string()));
        set("stages", self.stages.clone());
        set("delta", self.delta.map(|v| v.to_string()));
        set("A", self.a_factor.map(|v| v.to_string()));
        set("alpha", self.alpha.map(|v| v.to_string()));
        set("eps", self.eps.map(|v| v.to_string()));
        set("kmin", self.kmin.map(|v| v.to_string()));
        set("kmax", self.kmax.map(|v| v.to_string()));
        set("seed", self.seed.map(|v| v.to_string()));
        set("threads", self.threads.map(|v| v.to_string()));
        set("tree-theta", self.tree_theta.map(|v| v.to_string()));
        set("tree-order", self.tree_order.clone());
        Ok(map)
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<rieszlab::Error>() {
        return match e {
            rieszlab::Error::ScaleWindow(_) => EXIT_SCALE_WINDOW,
            rieszlab::Error::InvariantViolation(_) | rieszlab::Error::Internal(_) => EXIT_INVARIANT,
            _ => EXIT_INVALID_CONFIG,
        };
    }
    EXIT_INVALID_CONFIG
}

fn init_threads(cfg: &RunConfig) {
    let n = cfg
        .threads
        .or_else(|| std::env::var("RIESZLAB_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn cmd_gen(over: &Overrides) -> Result<()> {
    let cfg = RunConfig::from_map(over.merged()?)?;
    let m = cfg.build_measure()?;
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("points.csv");
    m.save_csv(&path).map_err(anyhow::Error::from)?;
    println!(
        "wrote {} points (d = {}, mesh = {}, mass = {}) to {}",
        m.len(),
        m.d(),
        m.mesh(),
        m.total_mass(),
        path.display()
    );
    Ok(())
}

fn cmd_run(over: &Overrides) -> Result<()> {
    let cfg = RunConfig::from_map(over.merged()?)?;
    let complaints = cfg.diagnostics();
    if !complaints.is_empty() {
        for c in &complaints {
            eprintln!("config: {c}");
        }
        anyhow::bail!("invalid configuration ({} problem(s))", complaints.len());
    }
    init_threads(&cfg);
    let out = pipeline::run(&cfg)?;
    let path = cfg.out.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&out.report)? + "\n")?;
    println!("report written to {}", path.display());
    Ok(())
}

fn cmd_validate(over: &Overrides) -> Result<()> {
    let cfg = RunConfig::from_map(over.merged()?)?;
    let complaints = cfg.diagnostics();
    println!("plan:");
    println!("  generator: {:?}", cfg.generator);
    println!("  stages:    {}", cfg.stages.join(", "));
    println!(
        "  delta = {}, A = {}, alpha = {}, eps = {}, seed = {}",
        cfg.delta, cfg.a_factor, cfg.alpha, cfg.eps, cfg.seed
    );
    if complaints.is_empty() {
        println!("diagnostics: none");
    } else {
        println!("diagnostics:");
        for c in &complaints {
            println!("  - {c}");
        }
    }
    Ok(())
}

fn cmd_report(input: &PathBuf) -> Result<()> {
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("cannot read {}", input.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    println!("rieszlab report {}", v["meta"]["version"].as_str().unwrap_or("?"));
    let mm = &v["measure"];
    println!(
        "measure: {} points, d = {}, mesh = {}, mass = {}",
        mm["points"], mm["d"], mm["mesh"], mm["total_mass"]
    );
    if !v["lattice"].is_null() {
        println!(
            "lattice: {} cells over k = {}..{}",
            v["lattice"]["cells"], v["lattice"]["k_min"], v["lattice"]["k_max"]
        );
    }
    if !v["riesz"].is_null() {
        println!(
            "riesz:   op_norm = {} at delta = {}",
            v["riesz"]["op_norm"]["value"], v["riesz"]["op_norm"]["delta"]
        );
    }
    if !v["baup"].is_null() {
        println!(
            "baup:    {} of {} cells non-BAUP (fraction {})",
            v["baup"]["family"].as_array().map(|a| a.len()).unwrap_or(0),
            v["baup"]["tested_cells"],
            v["baup"]["fraction"]
        );
    }
    if !v["carleson"].is_null() {
        println!(
            "carleson: constant {} on family `{}` ({} cells)",
            v["carleson"]["best_constant"], v["carleson"]["family"], v["carleson"]["family_size"]
        );
    }
    if !v["layers"].is_null() {
        if v["layers"]["refused"].as_bool() == Some(true) {
            println!("layers:  refused ({})", v["layers"]["reason"]);
        } else {
            println!(
                "layers:  {} layers, coverage {}",
                v["layers"]["layers"].as_array().map(|a| a.len()).unwrap_or(0),
                v["layers"]["coverage"]
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(over) => cmd_gen(over),
        Command::Run(over) => cmd_run(over),
        Command::Validate(over) => cmd_validate(over),
        Command::Report { input } => cmd_report(input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
