//! CLI wrapper: flag parsing and config-file merging only. Flags win over
//! config keys of the same name; nothing is read from the environment.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfsc_lab::commands::{
    cmd_construct, cmd_dim_probe, cmd_ratio, cmd_simulate, cmd_verify, parse_eps, parse_k_grid,
    parse_n_grid, parse_s_grid, read_file, ConstructOpts, DimProbeOpts, Direction, RatioOpts,
    SimulateOpts, VerifyOpts,
};
use mfsc_lab::config::{parse_config, ExperimentConfig};
use mfsc_lab::LabError;

#[derive(Parser)]
#[command(name = "mfsc", about = "laboratory for multihead finite-state compressors and gamblers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a machine over a generated sequence and write its trace
    Simulate(SimulateArgs),
    /// Build the gambler for a compressor, or the block compressor for a gambler
    Construct(ConstructArgs),
    /// Compression ratios |C(w[..n])| / (n log2 sigma) over an n-grid
    Ratio(RatioArgs),
    /// Run a verification suite and report pass/fail per instance
    Verify(VerifyArgs),
    /// Scan s-gale growth over (k, s, n) grids for dimension witnesses
    DimProbe(DimProbeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    machine: Option<String>,
    #[arg(long)]
    seq: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// Drive the constructed counterpart instead: c2g or g2c
    #[arg(long)]
    construct: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    machine: Option<String>,
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// Exploration depth for the reachable-state count
    #[arg(long)]
    horizon: Option<String>,
    /// Cap on materialized or explored states
    #[arg(long)]
    budget: Option<String>,
    /// Write the reachable fragment as a machine file
    #[arg(long)]
    export: Option<String>,
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args)]
struct RatioArgs {
    #[arg(long)]
    machine: Option<String>,
    #[arg(long)]
    construct: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    seq: Option<String>,
    #[arg(long = "n-grid")]
    n_grid: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    suite: Option<String>,
    /// Machine file to verify instead of the seeded defaults; repeatable
    #[arg(long = "machine")]
    machines: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long = "max-len")]
    max_len: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args)]
struct DimProbeArgs {
    #[arg(long)]
    machine: Option<String>,
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    seq: Option<String>,
    #[arg(long = "k-grid")]
    k_grid: Option<String>,
    #[arg(long = "s-grid")]
    s_grid: Option<String>,
    #[arg(long = "n-grid")]
    n_grid: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    config: Option<String>,
}

/// Flag values overlaid on a parsed config file.
struct Scope {
    cfg: ExperimentConfig,
}

impl Scope {
    fn load(config: &Option<String>) -> Result<Scope, LabError> {
        let cfg = match config {
            None => ExperimentConfig::empty(),
            Some(p) => {
                let text = read_file(Path::new(p))?;
                parse_config(&text)
                    .map_err(|source| LabError::File { path: p.clone(), source })?
            }
        };
        Ok(Scope { cfg })
    }

    fn get(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.cfg.get(key).map(str::to_string))
    }

    fn need(&self, flag: Option<String>, name: &str) -> Result<String, LabError> {
        self.get(flag, name)
            .ok_or_else(|| LabError::usage(format!("missing --{name} (config key {name})")))
    }
}

fn to_usize(v: &str, what: &str) -> Result<usize, LabError> {
    v.parse().map_err(|_| LabError::usage(format!("{what}: bad number {v:?}")))
}

fn to_u64(v: &str, what: &str) -> Result<u64, LabError> {
    v.parse().map_err(|_| LabError::usage(format!("{what}: bad number {v:?}")))
}

fn run(cli: Cli) -> Result<i32, LabError> {
    match cli.cmd {
        Cmd::Simulate(a) => {
            let sc = Scope::load(&a.config)?;
            let opts = SimulateOpts {
                machine: PathBuf::from(sc.need(a.machine, "machine")?),
                seq: sc.need(a.seq, "seq")?,
                n: to_usize(&sc.need(a.n, "n")?, "--n")?,
                construct: sc
                    .get(a.construct, "construct")
                    .map(|s| Direction::parse(&s))
                    .transpose()?,
                k: sc.get(a.k, "k").map(|s| to_usize(&s, "--k")).transpose()?,
                eps: sc.get(a.eps, "eps").map(|s| parse_eps(&s)).transpose()?,
                out: PathBuf::from(sc.get(a.out, "out").unwrap_or_else(|| ".".into())),
            };
            cmd_simulate(&opts)
        }
        Cmd::Construct(a) => {
            let sc = Scope::load(&a.config)?;
            let opts = ConstructOpts {
                machine: PathBuf::from(sc.need(a.machine, "machine")?),
                direction: Direction::parse(&sc.need(a.direction, "direction")?)?,
                k: to_usize(&sc.need(a.k, "k")?, "--k")?,
                eps: sc.get(a.eps, "eps").map(|s| parse_eps(&s)).transpose()?,
                horizon: sc
                    .get(a.horizon, "horizon")
                    .map(|s| to_usize(&s, "--horizon"))
                    .transpose()?
                    .unwrap_or(8),
                budget: sc
                    .get(a.budget, "budget")
                    .map(|s| to_usize(&s, "--budget"))
                    .transpose()?
                    .unwrap_or(1 << 16),
                export: sc.get(a.export, "export").map(PathBuf::from),
            };
            cmd_construct(&opts)
        }
        Cmd::Ratio(a) => {
            let sc = Scope::load(&a.config)?;
            let opts = RatioOpts {
                machine: PathBuf::from(sc.need(a.machine, "machine")?),
                construct: sc
                    .get(a.construct, "construct")
                    .map(|s| Direction::parse(&s))
                    .transpose()?,
                k: sc.get(a.k, "k").map(|s| to_usize(&s, "--k")).transpose()?,
                eps: sc.get(a.eps, "eps").map(|s| parse_eps(&s)).transpose()?,
                seq: sc.need(a.seq, "seq")?,
                n_grid: parse_n_grid(&sc.need(a.n_grid, "n-grid")?)?,
                out: sc.get(a.out, "out").map(PathBuf::from),
            };
            cmd_ratio(&opts)
        }
        Cmd::Verify(a) => {
            let sc = Scope::load(&a.config)?;
            let machines: Vec<PathBuf> = if !a.machines.is_empty() {
                a.machines.iter().map(PathBuf::from).collect()
            } else if let Some(ms) = sc.cfg.get("machines") {
                ms.split_whitespace().map(PathBuf::from).collect()
            } else if let Some(m) = sc.cfg.get("machine") {
                vec![PathBuf::from(m)]
            } else {
                Vec::new()
            };
            let opts = VerifyOpts {
                suite: sc.get(a.suite, "suite").unwrap_or_else(|| "all".into()),
                machines,
                seed: sc
                    .get(a.seed, "seed")
                    .map(|s| to_u64(&s, "--seed"))
                    .transpose()?
                    .unwrap_or(1),
                k: sc.get(a.k, "k").map(|s| to_usize(&s, "--k")).transpose()?,
                max_len: sc
                    .get(a.max_len, "max-len")
                    .map(|s| to_usize(&s, "--max-len"))
                    .transpose()?,
                depth: sc.get(a.depth, "depth").map(|s| to_usize(&s, "--depth")).transpose()?,
                out: sc.get(a.out, "out").map(PathBuf::from),
            };
            cmd_verify(&opts)
        }
        Cmd::DimProbe(a) => {
            let sc = Scope::load(&a.config)?;
            let opts = DimProbeOpts {
                machine: PathBuf::from(sc.need(a.machine, "machine")?),
                direction: Direction::parse(&sc.need(a.direction, "direction")?)?,
                seq: sc.need(a.seq, "seq")?,
                k_grid: parse_k_grid(&sc.need(a.k_grid, "k-grid")?)?,
                s_grid: parse_s_grid(&sc.need(a.s_grid, "s-grid")?)?,
                n_grid: parse_n_grid(&sc.need(a.n_grid, "n-grid")?)?,
                out: sc.get(a.out, "out").map(PathBuf::from),
            };
            cmd_dim_probe(&opts)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
