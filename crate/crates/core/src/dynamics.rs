//! Per-step control loop: neighborhood best selection, PSO velocity,
//! adaptive repulsion, speed limiting and position integration.
//!
//! Every agent's update at step `t` reads only the step-`t` snapshot held in
//! [`StepContext`], so the order in which agents are processed does not
//! affect the result. The per-agent random coefficient of the social term is
//! keyed by `(seed, step, agent id)`.

use crate::model::{
    init_swarm, AgentState, KeyedDraws, RngStream, SimConfig, SpeedLimit, TargetState,
    ValidationError, WallMode,
};
use crate::target::{advance_target, objective, ON_TARGET};
use crate::topology::{knn, NeighborSet};
use crate::vec2::Vec2;

/// Separations below this are treated as coincident agents.
pub const COINCIDENT_EPS: f64 = 1e-9;

/// Immutable snapshot of the swarm at step `t`.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub step: u64,
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    /// Objective of each agent against the step-`t` target.
    pub objectives: Vec<i8>,
    pub neighbors: NeighborSet,
    pub target: TargetState,
}

impl StepContext {
    pub fn new(agents: &[AgentState], target: &TargetState, k: usize, step: u64) -> Self {
        let positions: Vec<Vec2> = agents.iter().map(|a| a.position).collect();
        let velocities = agents.iter().map(|a| a.velocity).collect();
        let objectives = positions.iter().map(|&p| objective(p, target)).collect();
        let neighbors = knn(&positions, k).expect("degree validated with the config");
        Self {
            step,
            positions,
            velocities,
            objectives,
            neighbors,
            target: target.clone(),
        }
    }

    /// True when at least one agent is inside the target disc.
    pub fn detected(&self) -> bool {
        self.objectives.contains(&ON_TARGET)
    }

    pub fn on_target_count(&self) -> usize {
        self.objectives.iter().filter(|&&f| f == ON_TARGET).count()
    }

    /// Agent `i` or one of its neighbors is on target.
    pub fn target_seen(&self, i: usize) -> bool {
        self.objectives[i] == ON_TARGET
            || self
                .neighbors
                .of(i)
                .iter()
                .any(|&j| self.objectives[j] == ON_TARGET)
    }
}

/// Social attractor for agent `i`: its own position when on target, else the
/// nearest neighbor on target, else its own position.
pub fn select_nbest(i: usize, ctx: &StepContext) -> Vec2 {
    if ctx.objectives[i] == ON_TARGET {
        return ctx.positions[i];
    }
    ctx.neighbors
        .of(i)
        .iter()
        .find(|&&j| ctx.objectives[j] == ON_TARGET)
        .map_or(ctx.positions[i], |&j| ctx.positions[j])
}

/// `omega * v + c * r * (nbest - x)`.
#[inline]
pub fn pso_velocity(v: Vec2, x: Vec2, nbest: Vec2, omega: f64, c: f64, r: f64) -> Vec2 {
    v * omega + (nbest - x) * (c * r)
}

/// Inverse-power repulsion from agent `i`'s neighbors:
/// `-sum_j (gain * a_r / r_ij)^d * r_ij / |r_ij|`.
///
/// Coincident neighbors push along a keyed pseudo-random direction with
/// magnitude `v_max` instead of the singular power law.
pub fn repulsion_velocity(
    i: usize,
    ctx: &StepContext,
    a_r: f64,
    d: u32,
    gain: f64,
    v_max: f64,
    draws: &KeyedDraws,
) -> Vec2 {
    let xi = ctx.positions[i];
    let scale = gain * a_r;
    let exponent = d as i32;
    ctx.neighbors
        .of(i)
        .iter()
        .map(|&j| {
            let r_ij = ctx.positions[j] - xi;
            let dist = r_ij.norm();
            if dist < COINCIDENT_EPS {
                draws.coincident_heading(ctx.step, i, j) * v_max
            } else {
                -(r_ij / dist) * (scale / dist).powi(exponent)
            }
        })
        .sum()
}

/// One adaptive-repulsion update: shrink by `delta` while the target is seen,
/// grow otherwise, staying within `bounds`.
#[inline]
pub fn update_repulsion_strength(
    a_r: f64,
    target_seen: bool,
    delta: f64,
    bounds: (f64, f64),
) -> f64 {
    let (min, max) = bounds;
    if target_seen {
        if a_r > min {
            (a_r - delta).max(min)
        } else {
            a_r
        }
    } else if a_r < max {
        (a_r + delta).min(max)
    } else {
        a_r
    }
}

/// Rescales `v` to magnitude `v_max` when it is faster than that.
#[inline]
pub fn limit_speed(v: Vec2, v_max: f64) -> Vec2 {
    let speed = v.norm();
    if speed <= v_max {
        v
    } else {
        (v / speed) * v_max
    }
}

#[inline]
pub fn apply_speed_limit(v: Vec2, v_max: f64, mode: SpeedLimit) -> Vec2 {
    match mode {
        SpeedLimit::Cap => limit_speed(v, v_max),
        SpeedLimit::Divide => v / v_max,
    }
}

/// Brings a position that left `[0, l]^2` back into the arena.
pub fn confine(position: Vec2, velocity: Vec2, l: f64, mode: WallMode) -> (Vec2, Vec2) {
    match mode {
        WallMode::Clamp => clamp(position, velocity, l),
        WallMode::Stop => {
            let (p, v) = clamp(position, velocity, l);
            if p == position {
                (p, v)
            } else {
                (p, Vec2::ZERO)
            }
        }
        WallMode::Reflect => {
            let (x, vx) = mirror(position.x, velocity.x, l);
            let (y, vy) = mirror(position.y, velocity.y, l);
            (Vec2::new(x, y), Vec2::new(vx, vy))
        }
    }
}

fn mirror(coord: f64, vel: f64, l: f64) -> (f64, f64) {
    if (0.0..=l).contains(&coord) || !coord.is_finite() {
        return (coord, vel);
    }
    // Unfold onto a circle of circumference 2l; the mirrored half flips the velocity.
    let period = 2.0 * l;
    let m = coord.rem_euclid(period);
    if m > l {
        (period - m, -vel)
    } else {
        (m, vel)
    }
}

// Zeroes the velocity component normal to any wall that was crossed.
fn clamp(mut position: Vec2, mut velocity: Vec2, l: f64) -> (Vec2, Vec2) {
    if position.x < 0.0 {
        position.x = 0.0;
        velocity.x = 0.0;
    } else if position.x > l {
        position.x = l;
        velocity.x = 0.0;
    }
    if position.y < 0.0 {
        position.y = 0.0;
        velocity.y = 0.0;
    } else if position.y > l {
        position.y = l;
        velocity.y = 0.0;
    }
    (position, velocity)
}

/// Computes agent `i`'s state at `t + 1` from the step-`t` snapshot.
pub fn update_agent(
    agent: &AgentState,
    ctx: &StepContext,
    config: &SimConfig,
    draws: &KeyedDraws,
) -> AgentState {
    let i = agent.id;
    let v_max = config.class(agent.class_id).v_max;
    let x = ctx.positions[i];
    let nbest = select_nbest(i, ctx);
    let r = draws.social_unit(ctx.step, i);
    let v_pso = pso_velocity(ctx.velocities[i], x, nbest, config.omega, config.c, r);
    let v_rep = repulsion_velocity(
        i,
        ctx,
        agent.repulsion_strength,
        config.d,
        config.repulsion_gain,
        v_max,
        draws,
    );
    let a_r = update_repulsion_strength(
        agent.repulsion_strength,
        ctx.target_seen(i),
        config.delta,
        (config.a_r_min, config.a_r_max),
    );
    let v = apply_speed_limit(v_pso + v_rep, v_max, config.speed_limit);
    let (position, velocity) = confine(x + v, v, config.arena_size, config.wall);
    AgentState {
        id: i,
        class_id: agent.class_id,
        position,
        velocity,
        repulsion_strength: a_r,
        objective: ctx.objectives[i],
    }
}

/// Result of one synchronous step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Snapshot the step was computed from (positions and target at `t`).
    pub context: StepContext,
    pub agents: Vec<AgentState>,
    pub target: TargetState,
}

/// Advances the swarm and then the target by one step.
pub fn step(
    agents: &[AgentState],
    target: &TargetState,
    config: &SimConfig,
    draws: &KeyedDraws,
    target_rng: &mut RngStream,
    step_index: u64,
) -> StepOutcome {
    let ctx = StepContext::new(agents, target, config.k, step_index);
    let next: Vec<AgentState> = agents
        .iter()
        .map(|a| update_agent(a, &ctx, config, draws))
        .collect();
    let next_target = advance_target(
        target,
        config.arena_size,
        config.heading_hold_range,
        target_rng,
    );
    StepOutcome {
        context: ctx,
        agents: next,
        target: next_target,
    }
}

/// Owns the evolving state of one run.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    agents: Vec<AgentState>,
    target: TargetState,
    draws: KeyedDraws,
    target_rng: RngStream,
    step: u64,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, ValidationError> {
        let config = config.validate()?;
        let (agents, target) = init_swarm(&config, &mut RngStream::new(config.seed));
        Ok(Self::from_state(config, agents, target))
    }

    /// Starts from explicit state. The caller is responsible for the config
    /// being valid and consistent with `agents`.
    pub fn from_state(config: SimConfig, agents: Vec<AgentState>, target: TargetState) -> Self {
        let seed = config.seed;
        Self {
            draws: KeyedDraws::new(seed),
            target_rng: RngStream::target(seed),
            config,
            agents,
            target,
            step: 0,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn target(&self) -> &TargetState {
        &self.target
    }

    /// Index of the next step to execute.
    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Executes one step and returns the snapshot it was computed from
    /// together with the new agent velocities.
    pub fn advance(&mut self) -> StepOutcome {
        let outcome = step(
            &self.agents,
            &self.target,
            &self.config,
            &self.draws,
            &mut self.target_rng,
            self.step,
        );
        self.agents.clone_from(&outcome.agents);
        self.target = outcome.target.clone();
        self.step += 1;
        outcome
    }
}
