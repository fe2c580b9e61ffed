use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fraclab::genericity::Mode;
use fraclab::io::{
    run_hadamard_check, run_pohozaev, run_simplify, run_spectrum, to_json_string, write_atomic, Command,
    DiscretizationSpec, ExperimentConfig, OneOrMany, SimplifySpec, Table,
};
use fraclab::Error;

#[derive(Parser)]
#[command(name = "fraclab", version, about = "Dirichlet eigenvalues of the fractional Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// First k eigenvalues with cluster ids.
    Spectrum(Common),
    /// Pohozaev identity residuals.
    Pohozaev(Common),
    /// Boundary-formula slopes against finite differences.
    HadamardCheck(Common),
    /// Run the simplicity loop.
    Simplify(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Interval,
    Disk,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Domain,
    Potential,
    Weight,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in defaults when no config is given.
    #[arg(long, value_enum)]
    domain: Option<DomainArg>,
    /// Orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    s: Vec<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Spectral modes (interval).
    #[arg(long)]
    n: Option<usize>,
    /// Lattice spacing.
    #[arg(long)]
    h: Option<f64>,
    /// Number of eigenvalues to make simple.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON output path.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

fn build_config(command: Command, c: &Common) -> fraclab::Result<ExperimentConfig> {
    let mut cfg = match (&c.config, c.domain) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| config_error("config", e.to_string()))?;
            let mut cfg = ExperimentConfig::from_toml(&text)?;
            cfg.command = command;
            cfg
        }
        (None, Some(DomainArg::Disk)) => ExperimentConfig::disk_defaults(command),
        (None, _) => ExperimentConfig::interval_defaults(command),
    };
    if !c.s.is_empty() {
        cfg.s = if c.s.len() == 1 { OneOrMany::One(c.s[0]) } else { OneOrMany::Many(c.s.clone()) };
    }
    if let Some(k) = c.k {
        cfg.k = k;
    }
    match (&mut cfg.discretization, c.n, c.h) {
        (DiscretizationSpec::Spectral { n }, Some(v), None) => *n = v,
        (DiscretizationSpec::Grid { h, .. }, None, Some(v)) => *h = v,
        (_, Some(v), None) => cfg.discretization = DiscretizationSpec::Spectral { n: v },
        (_, None, Some(v)) => {
            cfg.discretization = DiscretizationSpec::Grid { h: v, node_cap: fraclab::discretization::DEFAULT_NODE_CAP }
        }
        (_, Some(_), Some(_)) => return Err(config_error("discretization", "give either --n or --h")),
        (_, None, None) => {}
    }
    if c.q.is_some() || c.mode.is_some() {
        let sp = cfg.simplify.get_or_insert(SimplifySpec {
            mode: Mode::Domain,
            q: 5,
            epsilon: 0.1,
            max_iterations: 20,
            cluster_tol: None,
        });
        if let Some(q) = c.q {
            sp.q = q;
        }
        if let Some(m) = c.mode {
            sp.mode = match m {
                ModeArg::Domain => Mode::Domain,
                ModeArg::Potential => Mode::Potential,
                ModeArg::Weight => Mode::Weight,
            };
        }
    }
    if let Some(p) = &c.out {
        cfg.output.csv = Some(p.display().to_string());
    }
    if let Some(p) = &c.json {
        cfg.output.json = Some(p.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit_table(cfg: &ExperimentConfig, table: &Table) -> fraclab::Result<()> {
    let text = table.to_csv(&cfg.hash())?;
    match &cfg.output.csv {
        Some(p) => write_atomic(Path::new(p), text.as_bytes())?,
        None => print!("{text}"),
    }
    if let Some(p) = &cfg.output.json {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = table
            .rows
            .iter()
            .map(|r| {
                table
                    .header
                    .iter()
                    .zip(r)
                    .map(|(h, v)| {
                        let val = v.parse::<f64>().map(serde_json::Value::from).unwrap_or_else(|_| v.clone().into());
                        (h.clone(), val)
                    })
                    .collect()
            })
            .collect();
        let doc = serde_json::json!({ "config_sha256": cfg.hash(), "rows": rows });
        write_atomic(Path::new(p), to_json_string(&doc)?.as_bytes())?;
    }
    Ok(())
}

fn run(command: Command, c: &Common) -> fraclab::Result<()> {
    let cfg = build_config(command, c)?;
    match command {
        Command::Spectrum => emit_table(&cfg, &run_spectrum(&cfg)?),
        Command::Pohozaev => emit_table(&cfg, &run_pohozaev(&cfg)?),
        Command::HadamardCheck => emit_table(&cfg, &run_hadamard_check(&cfg)?),
        Command::Simplify => {
            let report = run_simplify(&cfg, |line| println!("{line}"))?;
            let doc = serde_json::json!({ "config_sha256": cfg.hash(), "report": report });
            let text = to_json_string(&doc)?;
            match &cfg.output.json {
                Some(p) => write_atomic(Path::new(p), text.as_bytes()),
                None => {
                    println!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Sub::Spectrum(c) => (Command::Spectrum, c),
        Sub::Pohozaev(c) => (Command::Pohozaev, c),
        Sub::HadamardCheck(c) => (Command::HadamardCheck, c),
        Sub::Simplify(c) => (Command::Simplify, c),
    };
    match run(command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_config_error() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            let diag = serde_json::json!({ "error": e.to_string(), "kind": format!("{e:?}") });
            eprintln!("{diag}");
            ExitCode::from(3)
        }
    }
}
