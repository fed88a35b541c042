use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use hsmix_cli::config::Format;
use hsmix_cli::output::OUT_DIR_ENV;
use hsmix_cli::{exit_code, load_config, run, RunConfig};

#[derive(Parser)]
#[command(name = "hsmix", version, about = "Two-species hard-sphere mixture experiments")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config and $HSMIX_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Event-driven flow of a sampled or loaded configuration.
    Simulate(Common),
    /// Realized Boltzmann–Grad parameters.
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n2: Option<usize>,
    },
    /// Picard solve of the Boltzmann system for mixtures.
    PdeSolve {
        #[command(flatten)]
        common: Common,
        /// Drop the transport term.
        #[arg(long)]
        homogeneous: bool,
    },
    /// Coupled Boltzmann/BBGKY pseudo-trajectories against the proximity bounds.
    PseudoCompare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        /// c1,c2,b[,N2]
        #[arg(long)]
        scaling: Option<String>,
    },
    /// Monte Carlo Duhamel iterates.
    Duhamel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Propagation-of-chaos gaps across scaled particle numbers.
    ChaosTest {
        #[command(flatten)]
        common: Common,
        /// c1,c2,b[,N2 of the first point]
        #[arg(long)]
        scaling: Option<String>,
        /// Number of N2 points, doubling from the first.
        #[arg(long)]
        n_points: Option<usize>,
        #[arg(long)]
        ensemble: Option<usize>,
    },
    /// Pathology rate against the contact window.
    PathologyScan(Common),
    /// Check a configuration and print derived quantities.
    Validate { config: PathBuf },
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "jsonl" => Ok(Format::Jsonl),
        "binary" => Ok(Format::Binary),
        _ => Err(format!("unknown format {s:?}; expected csv, jsonl or binary")),
    }
}

fn apply_scaling(cfg: &mut RunConfig, spec: &str) -> Result<Option<usize>> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if !(3..=4).contains(&parts.len()) {
        bail!(hsmix_cli::ConfigError::Field { field: "--scaling".into(), message: "expected c1,c2,b[,N2]".into() });
    }
    let num = |s: &str| {
        s.parse::<f64>().map_err(|e| hsmix_cli::ConfigError::Field { field: "--scaling".into(), message: format!("{s:?}: {e}") })
    };
    cfg.scaling.c1 = num(parts[0])?;
    cfg.scaling.c2 = num(parts[1])?;
    cfg.scaling.b = num(parts[2])?;
    Ok(match parts.get(3) {
        Some(n) => Some(num(n)? as usize),
        None => None,
    })
}

fn prepare(common: &Common) -> Result<RunConfig> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
        cfg.output.dir = PathBuf::from(dir);
    }
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(f) = common.format {
        cfg.output.format = f;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let (name, cfg) = match cli.command {
        Command::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            let warnings = cfg.validate()?;
            let d = cfg.derived()?;
            println!("ok");
            println!("N1                 {}", d.realized.n1);
            println!("N2                 {}", d.realized.n2);
            println!("eps1               {:.6e}", d.realized.eps1);
            println!("eps2               {:.6e}", d.realized.eps2);
            println!("A[alpha][beta]     {:?}", d.kernel_constants);
            println!("mean free time     {:.6}", d.mean_free_time);
            println!("dynamics t_end     {:.6}", d.dynamics_t_end);
            println!("pde t_end          {:.6}", d.pde_t_end);
            println!("pde weight horizon {:.6}", d.pde_horizon);
            println!("horizon heuristic  {:.6}", d.horizon_heuristic);
            println!("chaos t            {:.6}", d.chaos_t);
            for w in warnings {
                eprintln!("warning: {w}");
            }
            return Ok(());
        }
        Command::Simulate(c) => ("simulate", prepare(&c)?),
        Command::PathologyScan(c) => ("pathology-scan", prepare(&c)?),
        Command::Scaling { common, n2 } => {
            let mut cfg = prepare(&common)?;
            if let Some(n) = n2 {
                cfg.scaling.n2 = n;
            }
            ("scaling", cfg)
        }
        Command::PdeSolve { common, homogeneous } => {
            let mut cfg = prepare(&common)?;
            if homogeneous {
                cfg.pde.homogeneous = true;
            }
            ("pde-solve", cfg)
        }
        Command::PseudoCompare { common, k, trials, scaling } => {
            let mut cfg = prepare(&common)?;
            if let Some(s) = scaling {
                if let Some(n) = apply_scaling(&mut cfg, &s)? {
                    cfg.scaling.n2 = n;
                }
            }
            cfg.pseudo.k = k.unwrap_or(cfg.pseudo.k);
            cfg.pseudo.trials = trials.unwrap_or(cfg.pseudo.trials);
            ("pseudo-compare", cfg)
        }
        Command::Duhamel { common, k, samples } => {
            let mut cfg = prepare(&common)?;
            cfg.duhamel.k = k.unwrap_or(cfg.duhamel.k);
            cfg.duhamel.samples = samples.unwrap_or(cfg.duhamel.samples);
            ("duhamel", cfg)
        }
        Command::ChaosTest { common, scaling, n_points, ensemble } => {
            let mut cfg = prepare(&common)?;
            if let Some(s) = scaling {
                if let Some(n) = apply_scaling(&mut cfg, &s)? {
                    cfg.chaos.n2 = vec![n];
                }
            }
            if let Some(p) = n_points {
                let first = cfg.chaos.n2.first().copied().unwrap_or(64);
                cfg.chaos.n2 = (0..p).map(|i| first << i).collect();
            }
            cfg.chaos.ensemble = ensemble.unwrap_or(cfg.chaos.ensemble);
            ("chaos-test", cfg)
        }
    };
    let outcome = run(name, &cfg)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for f in &outcome.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
