//! Shared domain types: agent classes, agent and target state, run
//! configuration and the seeded random-number contract.

use std::fmt;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec2::Vec2;

/// Named speed profile shared by a group of agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentClass {
    pub name: String,
    /// Top speed in length-units per time-step.
    pub v_max: f64,
}

impl AgentClass {
    pub fn new(name: impl Into<String>, v_max: f64) -> Self {
        Self {
            name: name.into(),
            v_max,
        }
    }

    /// Slow platform, 1.0 units/step.
    pub fn slow() -> Self {
        Self::new(SLOW_CLASS, 1.0)
    }

    /// Fast platform, 2.6 units/step.
    pub fn fast() -> Self {
        Self::new(FAST_CLASS, 2.6)
    }
}

pub const FAST_CLASS: &str = "fast";
pub const SLOW_CLASS: &str = "slow";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCount {
    pub class: AgentClass,
    pub count: usize,
}

impl ClassCount {
    pub fn new(class: AgentClass, count: usize) -> Self {
        Self { class, count }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    /// Index into [`SimConfig::composition`].
    pub class_id: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    /// Adaptive repulsion strength, kept within `[a_r_min, a_r_max]`.
    pub repulsion_strength: f64,
    /// Objective value from the most recent evaluation: -1 on target, 0 otherwise.
    pub objective: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub position: Vec2,
    pub heading: Vec2,
    pub speed: f64,
    pub radius: f64,
    /// Steps left before a new heading is drawn.
    pub heading_hold: u32,
}

/// How the summed velocity is bounded by the agent's top speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedLimit {
    /// Rescale to `v_max` only when the speed exceeds it.
    #[default]
    Cap,
    /// Divide every velocity by `v_max`, every step.
    Divide,
}

/// What happens to an agent that would leave the arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallMode {
    /// Clamp into the arena and zero the velocity component normal to the wall.
    #[default]
    Clamp,
    /// Clamp into the arena and zero the whole velocity.
    Stop,
    /// Mirror the position and flip the normal velocity component.
    Reflect,
}

/// Per-step reduction of velocity fluctuations used for the Ξ metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluctuationReduction {
    /// Sum of fluctuation norms.
    #[default]
    NormSum,
    /// Norm of the summed fluctuation vectors (identically ~0 by construction).
    VectorSum,
}

/// Complete description of one simulation run.
///
/// The JSON form uses the field names below (`L` and `N` for the arena side
/// and agent count). Missing keys take their default; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    #[serde(rename = "L")]
    pub arena_size: f64,
    #[serde(rename = "N")]
    pub agent_count: usize,
    pub composition: Vec<ClassCount>,
    pub k: usize,
    pub omega: f64,
    pub c: f64,
    pub a_r_min: f64,
    pub a_r_max: f64,
    pub delta: f64,
    pub d: u32,
    /// Length scale applied to `a_R` inside the repulsion term; 1.0 keeps the raw values.
    pub repulsion_gain: f64,
    pub target_speed: f64,
    pub target_radius: f64,
    pub t_f: u64,
    pub seed: u64,
    /// Inclusive range of steps a target heading is held.
    pub heading_hold_range: (u32, u32),
    pub speed_limit: SpeedLimit,
    pub wall: WallMode,
    pub fluctuation: FluctuationReduction,
    pub histogram_bins: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        let arena_size = 100.0;
        Self {
            arena_size,
            agent_count: 50,
            composition: vec![
                ClassCount::new(AgentClass::fast(), 15),
                ClassCount::new(AgentClass::slow(), 35),
            ],
            k: 20,
            omega: 1.0,
            c: 0.5,
            a_r_min: 0.375,
            a_r_max: 1.5,
            delta: 0.01,
            d: 6,
            repulsion_gain: 7.0,
            target_speed: 3.0,
            target_radius: arena_size / 20.0,
            t_f: 100_000,
            seed: 0,
            heading_hold_range: (50, 200),
            speed_limit: SpeedLimit::Cap,
            wall: WallMode::Clamp,
            fluctuation: FluctuationReduction::NormSum,
            histogram_bins: 20,
        }
    }
}

/// A single violated configuration invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ArenaSize(f64),
    DegreeBelowTwo { k: usize },
    DegreeAboveMax { k: usize, max: usize },
    CompositionMismatch { sum: usize, n: usize },
    MaxSpeed { class: String, v_max: f64 },
    RepulsionBounds { min: f64, max: f64 },
    RepulsionStep(f64),
    RepulsionExponent(u32),
    RepulsionGain(f64),
    Weights { omega: f64, c: f64 },
    TargetSpeed(f64),
    TargetRadius(f64),
    Horizon,
    HeadingHold { min: u32, max: u32 },
    HistogramBins,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ArenaSize(l) => {
                write!(f, "arena size L must be positive and finite, got {l}")
            }
            Violation::DegreeBelowTwo { k } => write!(f, "degree below 2: k = {k}"),
            Violation::DegreeAboveMax { k, max } => {
                write!(f, "degree above N-1: k = {k}, max {max}")
            }
            Violation::CompositionMismatch { sum, n } => {
                write!(f, "composition mismatch: counts sum to {sum} != N = {n}")
            }
            Violation::MaxSpeed { class, v_max } => {
                write!(f, "class '{class}' needs v_max > 0, got {v_max}")
            }
            Violation::RepulsionBounds { min, max } => {
                write!(
                    f,
                    "repulsion bounds need 0 < a_r_min < a_r_max, got [{min}, {max}]"
                )
            }
            Violation::RepulsionStep(d) => write!(f, "repulsion step delta must be > 0, got {d}"),
            Violation::RepulsionExponent(d) => {
                write!(f, "repulsion exponent d must be >= 1, got {d}")
            }
            Violation::RepulsionGain(g) => {
                write!(f, "repulsion gain must be finite and >= 0, got {g}")
            }
            Violation::Weights { omega, c } => {
                write!(
                    f,
                    "PSO weights must be finite, got omega = {omega}, c = {c}"
                )
            }
            Violation::TargetSpeed(v) => write!(f, "target speed must be finite and >= 0, got {v}"),
            Violation::TargetRadius(r) => write!(f, "target radius must be > 0, got {r}"),
            Violation::Horizon => write!(f, "horizon t_f must be >= 1"),
            Violation::HeadingHold { min, max } => {
                write!(
                    f,
                    "heading hold range needs 1 <= min <= max, got ({min}, {max})"
                )
            }
            Violation::HistogramBins => write!(f, "histogram needs at least one bin"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

impl SimConfig {
    /// Checks every invariant and returns the config unchanged when all hold.
    pub fn validate(self) -> Result<SimConfig, ValidationError> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ValidationError { violations })
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.arena_size.is_finite() && self.arena_size > 0.0) {
            out.push(Violation::ArenaSize(self.arena_size));
        }
        if self.k < 2 {
            out.push(Violation::DegreeBelowTwo { k: self.k });
        }
        let max_k = self.agent_count.saturating_sub(1);
        if self.k > max_k {
            out.push(Violation::DegreeAboveMax {
                k: self.k,
                max: max_k,
            });
        }
        let sum: usize = self.composition.iter().map(|c| c.count).sum();
        if sum != self.agent_count {
            out.push(Violation::CompositionMismatch {
                sum,
                n: self.agent_count,
            });
        }
        for entry in &self.composition {
            if !(entry.class.v_max.is_finite() && entry.class.v_max > 0.0) {
                out.push(Violation::MaxSpeed {
                    class: entry.class.name.clone(),
                    v_max: entry.class.v_max,
                });
            }
        }
        if !(self.a_r_min > 0.0 && self.a_r_min < self.a_r_max && self.a_r_max.is_finite()) {
            out.push(Violation::RepulsionBounds {
                min: self.a_r_min,
                max: self.a_r_max,
            });
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            out.push(Violation::RepulsionStep(self.delta));
        }
        if self.d < 1 {
            out.push(Violation::RepulsionExponent(self.d));
        }
        if !(self.repulsion_gain >= 0.0 && self.repulsion_gain.is_finite()) {
            out.push(Violation::RepulsionGain(self.repulsion_gain));
        }
        if !(self.omega.is_finite() && self.c.is_finite()) {
            out.push(Violation::Weights {
                omega: self.omega,
                c: self.c,
            });
        }
        if !(self.target_speed >= 0.0 && self.target_speed.is_finite()) {
            out.push(Violation::TargetSpeed(self.target_speed));
        }
        if !(self.target_radius > 0.0 && self.target_radius.is_finite()) {
            out.push(Violation::TargetRadius(self.target_radius));
        }
        if self.t_f < 1 {
            out.push(Violation::Horizon);
        }
        let (hmin, hmax) = self.heading_hold_range;
        if hmin < 1 || hmin > hmax {
            out.push(Violation::HeadingHold {
                min: hmin,
                max: hmax,
            });
        }
        if self.histogram_bins == 0 {
            out.push(Violation::HistogramBins);
        }
        out
    }

    /// Parses a JSON config file. The result is not validated.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Class of each agent id, in composition order.
    pub fn class_of_agents(&self) -> Vec<usize> {
        self.composition
            .iter()
            .enumerate()
            .flat_map(|(class_id, entry)| std::iter::repeat_n(class_id, entry.count))
            .collect()
    }

    pub fn class(&self, class_id: usize) -> &AgentClass {
        &self.composition[class_id].class
    }

    /// Count of agents in the class named `fast`, or 0 if there is none.
    pub fn fast_count(&self) -> usize {
        self.composition
            .iter()
            .filter(|c| c.class.name == FAST_CLASS)
            .map(|c| c.count)
            .sum()
    }

    /// Rebuilds the composition as `n_fast` fast agents plus `N - n_fast`
    /// slow agents, keeping any configured speeds for the two classes.
    pub fn with_fast_count(mut self, n_fast: usize) -> SimConfig {
        let find = |name: &str, fallback: AgentClass| {
            self.composition
                .iter()
                .find(|c| c.class.name == name)
                .map(|c| c.class.clone())
                .unwrap_or(fallback)
        };
        let fast = find(FAST_CLASS, AgentClass::fast());
        let slow = find(SLOW_CLASS, AgentClass::slow());
        // An oversized request leaves a composition mismatch for validate() to report.
        let n_slow = self.agent_count.saturating_sub(n_fast);
        self.composition = vec![ClassCount::new(fast, n_fast), ClassCount::new(slow, n_slow)];
        self
    }
}

const STREAM_INIT: u64 = 0;
const STREAM_TARGET: u64 = 1;
const STREAM_SOCIAL: u64 = 2 << 56;
const STREAM_COINCIDENT: u64 = 3 << 56;

/// Seeded sequential random stream (ChaCha8, portable across platforms).
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, STREAM_INIT)
    }

    /// Independent stream of the same seed, used for target motion.
    pub fn target(seed: u64) -> Self {
        Self::with_stream(seed, STREAM_TARGET)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform scalar in `[0, 1)`.
    pub fn draw_unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform direction on the unit circle.
    pub fn draw_heading(&mut self) -> Vec2 {
        Vec2::from_angle(std::f64::consts::TAU * self.draw_unit())
    }

    /// Uniform integer in `lo..=hi`.
    pub fn draw_inclusive(&mut self, lo: u32, hi: u32) -> u32 {
        self.rng.random_range(lo..=hi)
    }
}

/// Random draws addressed by key instead of by sequence position, so every
/// agent's draw at a given step is independent of processing order.
#[derive(Debug, Clone)]
pub struct KeyedDraws {
    base: ChaCha8Rng,
}

impl KeyedDraws {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn draw(&self, stream: u64, step: u64) -> u64 {
        let mut rng = self.base.clone();
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(step) * 2);
        rng.next_u64()
    }

    /// The social-term coefficient `r` in `[0, 1)` for `agent` at `step`.
    pub fn social_unit(&self, step: u64, agent: usize) -> f64 {
        to_unit(self.draw(STREAM_SOCIAL | agent as u64, step))
    }

    /// Separation direction for two coincident agents; the lower id gets the
    /// returned heading and the higher id its opposite.
    pub fn coincident_heading(&self, step: u64, i: usize, j: usize) -> Vec2 {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let key = STREAM_COINCIDENT | ((lo as u64) << 28) | hi as u64;
        let heading = Vec2::from_angle(std::f64::consts::TAU * to_unit(self.draw(key, step)));
        if i < j {
            heading
        } else {
            -heading
        }
    }
}

#[inline]
fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Places the swarm and the target for step 0.
///
/// Agents are i.i.d. uniform in the arena with zero velocity and maximum
/// repulsion strength; the target is uniform in the arena with a random
/// heading and hold duration.
pub fn init_swarm(config: &SimConfig, rng: &mut RngStream) -> (Vec<AgentState>, TargetState) {
    let l = config.arena_size;
    let agents = config
        .class_of_agents()
        .into_iter()
        .enumerate()
        .map(|(id, class_id)| {
            let position = Vec2::new(rng.draw_unit() * l, rng.draw_unit() * l);
            AgentState {
                id,
                class_id,
                position,
                velocity: Vec2::ZERO,
                repulsion_strength: config.a_r_max,
                objective: 0,
            }
        })
        .collect();
    let position = Vec2::new(rng.draw_unit() * l, rng.draw_unit() * l);
    let heading = rng.draw_heading();
    let (hmin, hmax) = config.heading_hold_range;
    let target = TargetState {
        position,
        heading,
        speed: config.target_speed,
        radius: config.target_radius,
        heading_hold: rng.draw_inclusive(hmin, hmax),
    };
    (agents, target)
}
