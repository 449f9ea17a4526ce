use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use swarmsim::experiment::{
    aggregate, figure_configs, run_simulation, run_sweep, write_outputs, write_trace, OutputError,
    SweepError, SweepSpec, TraceError, PRESETS,
};
use swarmsim::model::{ConfigError, SimConfig};

const EXIT_INVALID: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "swarmsim",
    version,
    about = "Heterogeneous swarm target search and tracking simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its summary CSV and histogram JSON.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long, env = "SWARMSIM_OUT", default_value = "results")]
        out: PathBuf,
    },
    /// Run a figure preset (fig3, fig4, fig5, fig7, fig8) or a sweep spec file.
    Sweep {
        /// Preset name or path to a JSON sweep spec.
        preset: String,
        #[arg(long, env = "SWARMSIM_OUT", default_value = "results")]
        out: PathBuf,
        /// Worker threads; defaults to all available cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Use the 100,000-step horizon with five seeds.
        #[arg(long)]
        full: bool,
        /// Override the steps per run.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Dump agent and target state every `stride` steps as CSV.
    Trace {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        stride: u64,
    },
    /// Check a config file and print the effective configuration.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print the default configuration as JSON.
    DefaultConfig,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Number of fast agents; the rest are slow.
    #[arg(long)]
    fast: Option<usize>,
    #[arg(long)]
    target_speed: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SimConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => SimConfig::from_json_file(path)?,
            None => SimConfig::default(),
        };
        if let Some(n) = self.fast {
            cfg = cfg.with_fast_count(n);
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(v) = self.target_speed {
            cfg.target_speed = v;
        }
        if let Some(t) = self.steps {
            cfg.t_f = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg.validate()?)
    }
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<TraceError> for Failure {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::Io(_) => Failure::Io(e.to_string()),
            TraceError::Csv(ref c) if c.is_io_error() => Failure::Io(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn load_sweep(preset: &str) -> Result<(String, SweepSpec), Failure> {
    let path = Path::new(preset);
    if path.extension().is_some_and(|e| e == "json") || path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("cannot read sweep spec {preset}: {e}")))?;
        let spec: SweepSpec = serde_json::from_str(&text)
            .map_err(|e| Failure::Invalid(format!("malformed sweep spec {preset}: {e}")))?;
        let name = path
            .file_stem()
            .map_or("sweep".to_string(), |s| s.to_string_lossy().into_owned());
        return Ok((name, spec));
    }
    let spec = figure_configs(preset).map_err(|_| {
        Failure::Invalid(format!(
            "unknown preset '{preset}'; valid presets: {}",
            PRESETS.join(", ")
        ))
    })?;
    Ok((preset.to_string(), spec))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out } => {
            let cfg = config.load()?;
            let summary = run_simulation(cfg).map_err(|e| Failure::Invalid(e.to_string()))?;
            write_outputs(&out, "run", std::slice::from_ref(&summary))?;
            println!(
                "k={} n_fast={} v={} seed={} time_on_target={:.4} xi={:.4} ({:.1?})",
                summary.cell.k,
                summary.cell.n_fast,
                summary.cell.target_speed,
                summary.seed,
                summary.time_on_target,
                summary.xi,
                summary.wall_clock
            );
        }
        Command::Sweep {
            preset,
            out,
            jobs,
            full,
            steps,
        } => {
            let (name, mut spec) = load_sweep(&preset)?;
            if full {
                spec = spec.full();
            }
            if let Some(t) = steps {
                spec.steps = t;
            }
            let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
            let jobs = jobs.map(|j| j.clamp(1, cores));
            eprintln!("{name}: {} runs of {} steps", spec.run_count(), spec.steps);
            let results = run_sweep(&spec, jobs)?;
            write_outputs(&out, &name, &results)?;
            println!(
                "{:>4} {:>6} {:>6} {:>14} {:>10}",
                "k", "n_fast", "v", "time_on_target", "xi"
            );
            for cell in aggregate(&results) {
                println!(
                    "{:>4} {:>6} {:>6} {:>14.4} {:>10.4}",
                    cell.cell.k,
                    cell.cell.n_fast,
                    cell.cell.target_speed,
                    cell.time_on_target.mean,
                    cell.xi.mean
                );
            }
        }
        Command::Trace {
            config,
            out,
            stride,
        } => {
            let cfg = config.load()?;
            if stride == 0 {
                return Err(TraceError::ZeroStride.into());
            }
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)
                    .map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
            }
            let file = fs::File::create(&out)
                .map_err(|e| Failure::Io(format!("cannot create {}: {e}", out.display())))?;
            let n = write_trace(cfg, stride, std::io::BufWriter::new(file))?;
            println!("wrote {n} snapshots to {}", out.display());
        }
        Command::Validate { config } => {
            let cfg = config.load()?;
            println!("{}", cfg.to_json_pretty());
        }
        Command::DefaultConfig => println!("{}", SimConfig::default().to_json_pretty()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
