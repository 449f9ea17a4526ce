//! Single runs, parameter sweeps, figure presets and result files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Simulation;
use crate::metrics::{avg_max_speed, Histogram, MetricsAccumulator, StepSeries};
use crate::model::{SimConfig, ValidationError};

/// Desk-scale horizon used by the presets.
pub const DESK_STEPS: u64 = 20_000;
/// Horizon of the long reference runs.
pub const FULL_STEPS: u64 = 100_000;

/// Degree grid used by the k-sweep presets.
pub const K_GRID: [usize; 11] = [5, 10, 15, 18, 20, 25, 30, 35, 40, 45, 49];

pub const PRESETS: [&str; 5] = ["fig3", "fig4", "fig5", "fig7", "fig8"];

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub k: usize,
    pub n_fast: usize,
    pub target_speed: f64,
}

impl Cell {
    pub fn apply(&self, base: &SimConfig) -> SimConfig {
        let mut cfg = base.clone().with_fast_count(self.n_fast);
        cfg.k = self.k;
        cfg.target_speed = self.target_speed;
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_id: String,
    pub cell: Cell,
    pub cell_index: usize,
    pub seed_index: usize,
    /// Seed the run was actually executed with.
    pub seed: u64,
    pub steps: u64,
    pub agent_count: usize,
    pub xi: f64,
    pub time_on_target: f64,
    pub histogram: Histogram,
    /// Per-step series; left empty by sweeps.
    pub series: StepSeries,
    pub wall_clock: Duration,
}

impl RunSummary {
    /// CSV fields in [`CSV_HEADER`] order.
    pub fn csv_record(&self) -> [String; 7] {
        [
            self.run_id.clone(),
            self.cell.k.to_string(),
            self.cell.n_fast.to_string(),
            self.cell.target_speed.to_string(),
            self.seed.to_string(),
            self.xi.to_string(),
            self.time_on_target.to_string(),
        ]
    }
}

pub const CSV_HEADER: [&str; 7] = [
    "run_id",
    "k",
    "n_fast",
    "target_speed",
    "seed",
    "xi",
    "time_on_target",
];

fn execute(config: &SimConfig, keep_series: bool) -> Result<MetricsAccumulator, ValidationError> {
    let mut sim = Simulation::new(config.clone())?;
    let cfg = sim.config();
    let mut acc = MetricsAccumulator::new(
        cfg.agent_count,
        avg_max_speed(&cfg.composition),
        cfg.histogram_bins,
        cfg.fluctuation,
    );
    let steps = cfg.t_f;
    let mut velocities = Vec::with_capacity(cfg.agent_count);
    for _ in 0..steps {
        let out = sim.advance();
        velocities.clear();
        velocities.extend(out.agents.iter().map(|a| a.velocity));
        acc.observe(
            &out.context.positions,
            &velocities,
            out.context.target.position,
            out.context.detected(),
        );
    }
    if !keep_series {
        acc.clear_series();
    }
    Ok(acc)
}

fn summarize(
    config: &SimConfig,
    acc: MetricsAccumulator,
    run_id: String,
    cell_index: usize,
    seed_index: usize,
    wall_clock: Duration,
) -> RunSummary {
    RunSummary {
        run_id,
        cell: Cell {
            k: config.k,
            n_fast: config.fast_count(),
            target_speed: config.target_speed,
        },
        cell_index,
        seed_index,
        seed: config.seed,
        steps: acc.steps(),
        agent_count: config.agent_count,
        xi: acc.cumulative_fluctuation(),
        time_on_target: acc.time_on_target(),
        histogram: acc.histogram(),
        series: acc.series().clone(),
        wall_clock,
    }
}

/// Runs `config.t_f` steps and summarizes the metrics.
pub fn run_simulation(config: SimConfig) -> Result<RunSummary, ValidationError> {
    let start = Instant::now();
    let acc = execute(&config, true)?;
    Ok(summarize(&config, acc, "run".into(), 0, 0, start.elapsed()))
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep axis '{0}' is empty")]
    EmptyAxis(&'static str),
    #[error("sweep needs at least one step per run")]
    ZeroSteps,
    #[error("cell {index} (k = {}, n_fast = {}, v = {}): {source}", cell.k, cell.n_fast, cell.target_speed)]
    InvalidCell {
        index: usize,
        cell: Cell,
        #[source]
        source: ValidationError,
    },
    #[error("unknown preset '{0}', expected one of: fig3, fig4, fig5, fig7, fig8")]
    UnknownPreset(String),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// A grid of cells (k x fast count x target speed) with replicate seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: SimConfig,
    pub ks: Vec<usize>,
    pub fast_counts: Vec<usize>,
    pub target_speeds: Vec<f64>,
    /// Replicate identifiers; each is mixed with the base seed and cell index.
    pub seeds: Vec<u64>,
    pub steps: u64,
}

impl SweepSpec {
    /// Cells in canonical order: k, then fast count, then target speed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &k in &self.ks {
            for &n_fast in &self.fast_counts {
                for &target_speed in &self.target_speeds {
                    out.push(Cell {
                        k,
                        n_fast,
                        target_speed,
                    });
                }
            }
        }
        out
    }

    /// Checks the grid and every cell's config before anything runs.
    pub fn validate(&self) -> Result<Vec<Cell>, SweepError> {
        for (name, empty) in [
            ("ks", self.ks.is_empty()),
            ("fast_counts", self.fast_counts.is_empty()),
            ("target_speeds", self.target_speeds.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(SweepError::EmptyAxis(name));
            }
        }
        if self.steps == 0 {
            return Err(SweepError::ZeroSteps);
        }
        let cells = self.cells();
        for (index, cell) in cells.iter().enumerate() {
            self.config_for(cell, 0)
                .validate()
                .map_err(|source| SweepError::InvalidCell {
                    index,
                    cell: *cell,
                    source,
                })?;
        }
        Ok(cells)
    }

    fn config_for(&self, cell: &Cell, seed: u64) -> SimConfig {
        let mut cfg = cell.apply(&self.base);
        cfg.t_f = self.steps;
        cfg.seed = seed;
        cfg
    }

    pub fn run_count(&self) -> usize {
        self.cells().len() * self.seeds.len()
    }

    /// Switches a desk-scale preset to the long reference horizon with five seeds.
    pub fn full(mut self) -> Self {
        self.steps = FULL_STEPS;
        self.seeds = (0..5).collect();
        self
    }
}

/// Seed of the run for `cell_index` and replicate `replicate` of a sweep.
pub fn derive_run_seed(base_seed: u64, cell_index: usize, replicate: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(cell_index as u64);
    rng.set_word_pos(u128::from(replicate) * 2);
    rng.next_u64()
}

/// Runs every (cell, seed) pair, on `jobs` threads when given, and returns the
/// summaries sorted by cell then seed index.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<Vec<RunSummary>, SweepError> {
    let cells = spec.validate()?;
    let tasks: Vec<(usize, usize, SimConfig)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, cell)| {
            spec.seeds.iter().enumerate().map(move |(si, &replicate)| {
                let seed = derive_run_seed(spec.base.seed, ci, replicate);
                (ci, si, spec.config_for(cell, seed))
            })
        })
        .collect();

    let run = |(ci, si, cfg): &(usize, usize, SimConfig)| {
        let start = Instant::now();
        let acc = execute(cfg, false).expect("cells validated before running");
        summarize(
            cfg,
            acc,
            format!("c{ci:03}-s{si:02}"),
            *ci,
            *si,
            start.elapsed(),
        )
    };

    let mut results: Vec<RunSummary> = match jobs {
        Some(1) => tasks.iter().map(run).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SweepError::Pool(e.to_string()))?
            .install(|| tasks.par_iter().map(run).collect()),
        None => tasks.par_iter().map(run).collect(),
    };
    results.sort_by_key(|r| (r.cell_index, r.seed_index));
    Ok(results)
}

/// Preset sweep reproducing one of the figure experiments at desk scale.
pub fn figure_configs(name: &str) -> Result<SweepSpec, SweepError> {
    let base = SimConfig {
        t_f: DESK_STEPS,
        ..SimConfig::default()
    };
    let all_fast: Vec<usize> = (0..=50).step_by(5).collect();
    let (ks, fast_counts, target_speeds) = match name {
        "fig3" => (vec![10, 20, 40], vec![15, 0], vec![3.0, 5.0]),
        "fig4" | "fig7" => (vec![20], all_fast, vec![3.0]),
        "fig5" => (K_GRID.to_vec(), vec![15], vec![3.0]),
        "fig8" => (K_GRID.to_vec(), vec![15, 0], vec![3.0]),
        other => return Err(SweepError::UnknownPreset(other.to_string())),
    };
    Ok(SweepSpec {
        base,
        ks,
        fast_counts,
        target_speeds,
        seeds: vec![0, 1, 2],
        steps: DESK_STEPS,
    })
}

/// Seed-aggregated metrics of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAggregate {
    pub cell: Cell,
    pub runs: usize,
    pub time_on_target: Spread,
    pub xi: Spread,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut min, mut max) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            n += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        Self {
            mean: sum / n as f64,
            min,
            max,
        }
    }

    /// `(max - min) / mean`.
    pub fn relative_spread(&self) -> f64 {
        (self.max - self.min) / self.mean
    }
}

/// Groups summaries by cell (in order of first appearance) and reduces over seeds.
pub fn aggregate(results: &[RunSummary]) -> Vec<CellAggregate> {
    let mut order: Vec<usize> = Vec::new();
    for r in results {
        if !order.contains(&r.cell_index) {
            order.push(r.cell_index);
        }
    }
    order
        .into_iter()
        .map(|ci| {
            let runs: Vec<&RunSummary> = results.iter().filter(|r| r.cell_index == ci).collect();
            CellAggregate {
                cell: runs[0].cell,
                runs: runs.len(),
                time_on_target: Spread::of(runs.iter().map(|r| r.time_on_target)),
                xi: Spread::of(runs.iter().map(|r| r.xi)),
            }
        })
        .collect()
}

pub fn write_summaries_csv<W: Write>(writer: W, results: &[RunSummary]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

pub const AGGREGATE_HEADER: [&str; 10] = [
    "k",
    "n_fast",
    "target_speed",
    "runs",
    "time_on_target_mean",
    "time_on_target_min",
    "time_on_target_max",
    "xi_mean",
    "xi_min",
    "xi_max",
];

pub fn write_aggregate_csv<W: Write>(writer: W, cells: &[CellAggregate]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(AGGREGATE_HEADER)?;
    for c in cells {
        w.write_record([
            c.cell.k.to_string(),
            c.cell.n_fast.to_string(),
            c.cell.target_speed.to_string(),
            c.runs.to_string(),
            c.time_on_target.mean.to_string(),
            c.time_on_target.min.to_string(),
            c.time_on_target.max.to_string(),
            c.xi.mean.to_string(),
            c.xi.min.to_string(),
            c.xi.max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn histogram_json(histogram: &Histogram) -> String {
    serde_json::to_string_pretty(histogram).expect("histogram serializes")
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv_file(
    path: &Path,
    f: impl FnOnce(fs::File) -> csv::Result<()>,
) -> Result<(), OutputError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    f(file).map_err(|source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<name>.csv`, `<name>_cells.csv` and one
/// `<name>_c<cell>_s<seed>.json` histogram per run into `out_dir`.
/// Returns the paths written.
pub fn write_outputs(
    out_dir: &Path,
    name: &str,
    results: &[RunSummary],
) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();

    let summary = out_dir.join(format!("{name}.csv"));
    write_csv_file(&summary, |f| write_summaries_csv(f, results))?;
    written.push(summary);

    let cells = out_dir.join(format!("{name}_cells.csv"));
    write_csv_file(&cells, |f| write_aggregate_csv(f, &aggregate(results)))?;
    written.push(cells);

    for r in results {
        let path = out_dir.join(format!(
            "{name}_c{:03}_s{:02}.json",
            r.cell_index, r.seed_index
        ));
        fs::write(&path, histogram_json(&r.histogram)).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace stride must be >= 1")]
    ZeroStride,
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub const TRACE_HEADER: [&str; 9] = ["step", "entity", "id", "class", "x", "y", "vx", "vy", "a_r"];

/// Writes agent and target state every `stride` steps, starting at step 0.
/// Returns the number of snapshots written.
pub fn write_trace<W: Write>(config: SimConfig, stride: u64, writer: W) -> Result<u64, TraceError> {
    if stride == 0 {
        return Err(TraceError::ZeroStride);
    }
    let mut sim = Simulation::new(config)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    let mut snapshots = 0;
    for t in 0..sim.config().t_f {
        if t % stride == 0 {
            let step = t.to_string();
            for a in sim.agents() {
                w.write_record([
                    step.as_str(),
                    "agent",
                    &a.id.to_string(),
                    &sim.config().class(a.class_id).name,
                    &a.position.x.to_string(),
                    &a.position.y.to_string(),
                    &a.velocity.x.to_string(),
                    &a.velocity.y.to_string(),
                    &a.repulsion_strength.to_string(),
                ])?;
            }
            let target = sim.target();
            let v = target.heading * target.speed;
            w.write_record([
                step.as_str(),
                "target",
                "0",
                "target",
                &target.position.x.to_string(),
                &target.position.y.to_string(),
                &v.x.to_string(),
                &v.y.to_string(),
                "",
            ])?;
            snapshots += 1;
        }
        sim.advance();
    }
    w.flush()?;
    Ok(snapshots)
}
