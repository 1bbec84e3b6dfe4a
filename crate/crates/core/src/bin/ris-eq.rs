use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ris_equalizer::agents::{save_checkpoint, AgentKind};
use ris_equalizer::experiments::{
    configuration_for, emit_cdf, emit_constellation, emit_csv, emit_sweep, empirical_cdf, final_eta_norms,
    mean_std, run_algorithm_with_agent, run_scenario, sweep, Algorithm, RunRecord, ScenarioConfig, SweepAxis,
};
use ris_equalizer::rng::{stream, Stream};
use ris_equalizer::Result;

#[derive(Parser)]
#[command(name = "ris-eq", version, about = "RIS-assisted channel equalization simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Steps per agent episode.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Disable receiver noise.
    #[arg(long, global = true)]
    no_noise: bool,
    /// Record wall-clock seconds per episode (outputs stop being reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithms over all episodes.
    Simulate {
        /// Comma-separated algorithms, overriding the config.
        #[arg(long, value_delimiter = ',')]
        algorithms: Vec<Algorithm>,
    },
    /// Run the ARISE equalizer on every episode's coherence block.
    Arise,
    /// Train an agent and save its final weights.
    Train {
        #[arg(value_enum)]
        agent: AgentArg,
        /// 100 elements, 512-wide networks (default is M = 16, 128 wide).
        #[arg(long)]
        full_scale: bool,
    },
    /// Evaluate a fixed-phase baseline.
    Baseline {
        #[arg(value_enum)]
        kind: BaselineArg,
    },
    /// Repeat the scenario over values of one parameter.
    Sweep {
        /// n_r, M or kappa.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        algorithms: Vec<Algorithm>,
    },
    /// QPSK constellation at the first coherence block.
    Constellation {
        #[arg(long, default_value = "arise")]
        algorithm: Algorithm,
        #[arg(long, default_value_t = 10_000)]
        symbols: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    Ddpg,
    Td3,
    Sac,
}

impl From<AgentArg> for AgentKind {
    fn from(a: AgentArg) -> Self {
        match a {
            AgentArg::Ddpg => AgentKind::Ddpg,
            AgentArg::Td3 => AgentKind::Td3,
            AgentArg::Sac => AgentKind::Sac,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Random,
    Inverse,
}

fn load(common: &Common, fallback: ScenarioConfig) -> Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => fallback,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(e) = common.episodes {
        cfg.episodes = e;
    }
    if let Some(s) = common.steps {
        cfg.episode.n_steps = s;
    }
    cfg.noise &= !common.no_noise;
    cfg.timing |= common.timing;
    cfg.validate()?;
    Ok(cfg)
}

fn report(records: &[RunRecord], algorithms: &[Algorithm]) {
    for &a in algorithms {
        if let Ok((m, s)) = mean_std(&final_eta_norms(records, a)) {
            println!("{a:>15}  final eta_n {m:.4} +- {s:.4}");
        }
    }
}

fn write_records(records: &[RunRecord], algorithms: &[Algorithm], out: &Path, name: &str) -> Result<()> {
    let path = out.join(format!("{name}.csv"));
    emit_csv(records, &path)?;
    let cdfs = algorithms
        .iter()
        .map(|&a| Ok((a, empirical_cdf(&final_eta_norms(records, a))?)))
        .collect::<Result<Vec<_>>>()?;
    emit_cdf(&cdfs, &out.join(format!("{name}_cdf.csv")))?;
    report(records, algorithms);
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    match cli.command {
        Command::Simulate { algorithms } => {
            let mut cfg = load(c, ScenarioConfig::default())?;
            if !algorithms.is_empty() {
                cfg.algorithms = algorithms;
            }
            let records = run_scenario(&cfg)?;
            write_records(&records, &cfg.algorithms, &c.out, "records")
        }
        Command::Arise => {
            let mut cfg = load(c, ScenarioConfig::default())?;
            cfg.algorithms = vec![Algorithm::Arise];
            let records = run_scenario(&cfg)?;
            write_records(&records, &cfg.algorithms, &c.out, "arise")
        }
        Command::Baseline { kind } => {
            let mut cfg = load(c, ScenarioConfig::default())?;
            let (alg, name) = match kind {
                BaselineArg::Random => (Algorithm::RandomPhases, "baseline_random"),
                BaselineArg::Inverse => (Algorithm::InversePhases, "baseline_inverse"),
            };
            cfg.algorithms = vec![alg];
            let records = run_scenario(&cfg)?;
            write_records(&records, &cfg.algorithms, &c.out, name)
        }
        Command::Train { agent, full_scale } => {
            let kind = AgentKind::from(agent);
            let base = if full_scale {
                ScenarioConfig::default()
            } else {
                ScenarioConfig::desk_scale()
            };
            let mut cfg = load(c, base)?;
            let alg = Algorithm::from(kind);
            cfg.algorithms = vec![alg];
            let (records, trained) = run_algorithm_with_agent(&cfg, alg)?;
            write_records(&records, &cfg.algorithms, &c.out, kind.name())?;
            if let Some(a) = trained {
                let ckpt = c.out.join(format!("{}.ckpt", kind.name()));
                save_checkpoint(a.as_ref(), &ckpt)?;
                println!("wrote {}", ckpt.display());
            }
            Ok(())
        }
        Command::Sweep { axis, values, algorithms } => {
            let mut cfg = load(c, ScenarioConfig::default())?;
            if !algorithms.is_empty() {
                cfg.algorithms = algorithms;
            }
            let rows = sweep(&cfg, axis, &values)?;
            for r in &rows {
                println!("{}={:<8} {:>15}  {:.4} +- {:.4}", axis, r.value, r.algorithm, r.mean, r.std);
            }
            let path = c.out.join(format!("sweep_{axis}.csv"));
            emit_sweep(&rows, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Constellation { algorithm, symbols } => {
            let cfg = load(c, ScenarioConfig::default())?;
            let gamma = configuration_for(&cfg, algorithm)?;
            let env = cfg.environment()?;
            let path = c.out.join(format!("constellation_{algorithm}.csv"));
            let con = emit_constellation(
                env.channel(),
                &gamma,
                env.noise_power(),
                symbols,
                &mut stream(cfg.seed, Stream::Noise),
                &path,
            )?;
            println!("{algorithm}: SINR {:.2} dB over {} samples", con.sinr_db, con.samples.len());
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
