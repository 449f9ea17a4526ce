//! Swarm performance metrics: cumulative velocity fluctuation magnitude (Ξ),
//! heading-bearing correlation histogram and time on target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClassCount, FluctuationReduction};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("heading-bearing sample {0} outside [-1, 1]")]
    SampleOutOfRange(f64),
    #[error("cannot merge accumulators with different shapes")]
    ShapeMismatch,
}

/// `u_i = v_i - mean(v)` for every agent.
pub fn velocity_fluctuations(velocities: &[Vec2]) -> Vec<Vec2> {
    if velocities.is_empty() {
        return Vec::new();
    }
    let mean = velocities.iter().copied().sum::<Vec2>() / velocities.len() as f64;
    velocities.iter().map(|&v| v - mean).collect()
}

/// Count-weighted mean of the classes' top speeds.
pub fn avg_max_speed(composition: &[ClassCount]) -> f64 {
    let total: usize = composition.iter().map(|c| c.count).sum();
    let weighted: f64 = composition
        .iter()
        .map(|c| c.count as f64 * c.class.v_max)
        .sum();
    weighted / total as f64
}

/// Ξ over a full trace of per-step velocity lists.
pub fn cumulative_fluctuation(
    trace: &[Vec<Vec2>],
    v_bar_max: f64,
    reduction: FluctuationReduction,
) -> f64 {
    let steps = trace.len();
    let n = trace.first().map_or(0, Vec::len);
    let total = match reduction {
        FluctuationReduction::NormSum => trace
            .iter()
            .flat_map(|vs| velocity_fluctuations(vs))
            .map(Vec2::norm)
            .sum::<f64>(),
        FluctuationReduction::VectorSum => trace
            .iter()
            .flat_map(|vs| velocity_fluctuations(vs))
            .sum::<Vec2>()
            .norm(),
    };
    total / (n as f64 * steps as f64 * v_bar_max)
}

/// Unit vector from `from` towards `to`; `None` when the points coincide.
pub fn bearing(from: Vec2, to: Vec2) -> Option<Vec2> {
    let d = to - from;
    let n = d.norm();
    (n > 0.0).then(|| d / n)
}

/// Cosine between a velocity and a unit bearing; 0 for a stationary agent.
pub fn heading_bearing(v: Vec2, bearing: Vec2) -> f64 {
    let speed = v.norm();
    if speed == 0.0 {
        return 0.0;
    }
    (v.dot(bearing) / speed).clamp(-1.0, 1.0)
}

/// Bin of `phi` among `bins` uniform half-open bins over `[-1, 1]`, with
/// `phi = 1` folded into the top bin. Zero lands in bin `bins / 2`.
#[inline]
pub fn bin_index(phi: f64, bins: usize) -> usize {
    let idx = ((phi + 1.0) * 0.5 * bins as f64).floor() as usize;
    idx.min(bins - 1)
}

/// Time-averaged histogram of heading-bearing correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Histogram {
    fn from_counts(counts: &[u64], steps: u64) -> Self {
        let bins = counts.len();
        let edges = (0..=bins)
            .map(|i| -1.0 + 2.0 * i as f64 / bins as f64)
            .collect();
        let weights = counts
            .iter()
            .map(|&c| {
                if steps == 0 {
                    0.0
                } else {
                    c as f64 / steps as f64
                }
            })
            .collect();
        Self { edges, weights }
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    /// Total weight; equals the agent count for any complete run.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weight of the bin holding `phi = 0`.
    pub fn zero_bin(&self) -> f64 {
        self.weights[bin_index(0.0, self.bins())]
    }

    /// Weight of all bins whose lower edge is at or above `lower`.
    pub fn mass_from(&self, lower: f64) -> f64 {
        self.edges
            .iter()
            .zip(&self.weights)
            .filter(|(&e, _)| e >= lower - 1e-12)
            .map(|(_, &w)| w)
            .sum()
    }
}

/// Histogram of per-step, per-agent samples normalized by the step count.
pub fn histogram_phi(samples: &[Vec<f64>], bins: usize) -> Result<Histogram, MetricsError> {
    let mut counts = vec![0u64; bins];
    for &phi in samples.iter().flatten() {
        if !(-1.0..=1.0).contains(&phi) {
            return Err(MetricsError::SampleOutOfRange(phi));
        }
        counts[bin_index(phi, bins)] += 1;
    }
    Ok(Histogram::from_counts(&counts, samples.len() as u64))
}

/// Fraction of steps on which at least one agent detected the target.
pub fn time_on_target(flags: &[bool]) -> f64 {
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

/// Per-step scalar series recorded alongside the running totals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepSeries {
    /// Sum of fluctuation norms at each step.
    pub fluctuation: Vec<f64>,
    pub detected: Vec<bool>,
}

/// Streaming accumulator for one run (or a contiguous range of steps).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsAccumulator {
    agent_count: usize,
    v_bar_max: f64,
    reduction: FluctuationReduction,
    fluctuation_norm_sum: f64,
    fluctuation_vector_sum: Vec2,
    counts: Vec<u64>,
    on_target_steps: u64,
    steps: u64,
    series: StepSeries,
}

impl MetricsAccumulator {
    pub fn new(
        agent_count: usize,
        v_bar_max: f64,
        bins: usize,
        reduction: FluctuationReduction,
    ) -> Self {
        Self {
            agent_count,
            v_bar_max,
            reduction,
            fluctuation_norm_sum: 0.0,
            fluctuation_vector_sum: Vec2::ZERO,
            counts: vec![0; bins],
            on_target_steps: 0,
            steps: 0,
            series: StepSeries::default(),
        }
    }

    /// Records one step: agent positions and target at `t`, the velocities
    /// the agents moved with, and whether anyone was on target.
    pub fn observe(
        &mut self,
        positions: &[Vec2],
        velocities: &[Vec2],
        target_position: Vec2,
        detected: bool,
    ) {
        debug_assert_eq!(positions.len(), self.agent_count);
        let fluct = velocity_fluctuations(velocities);
        let norm_sum: f64 = fluct.iter().map(|u| u.norm()).sum();
        self.fluctuation_norm_sum += norm_sum;
        self.fluctuation_vector_sum += fluct.into_iter().sum();

        let bins = self.counts.len();
        for (&x, &v) in positions.iter().zip(velocities) {
            let phi = bearing(x, target_position).map_or(0.0, |b| heading_bearing(v, b));
            self.counts[bin_index(phi, bins)] += 1;
        }

        if detected {
            self.on_target_steps += 1;
        }
        self.steps += 1;
        self.series.fluctuation.push(norm_sum);
        self.series.detected.push(detected);
    }

    /// Combines with an accumulator that covered the steps right after this one.
    pub fn merge(mut self, later: MetricsAccumulator) -> Result<Self, MetricsError> {
        if self.agent_count != later.agent_count
            || self.counts.len() != later.counts.len()
            || self.v_bar_max != later.v_bar_max
            || self.reduction != later.reduction
        {
            return Err(MetricsError::ShapeMismatch);
        }
        self.fluctuation_norm_sum += later.fluctuation_norm_sum;
        self.fluctuation_vector_sum += later.fluctuation_vector_sum;
        for (a, b) in self.counts.iter_mut().zip(&later.counts) {
            *a += b;
        }
        self.on_target_steps += later.on_target_steps;
        self.steps += later.steps;
        self.series.fluctuation.extend(later.series.fluctuation);
        self.series.detected.extend(later.series.detected);
        Ok(self)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn on_target_steps(&self) -> u64 {
        self.on_target_steps
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn series(&self) -> &StepSeries {
        &self.series
    }

    pub fn clear_series(&mut self) {
        self.series = StepSeries::default();
    }

    pub fn cumulative_fluctuation(&self) -> f64 {
        let total = match self.reduction {
            FluctuationReduction::NormSum => self.fluctuation_norm_sum,
            FluctuationReduction::VectorSum => self.fluctuation_vector_sum.norm(),
        };
        total / (self.agent_count as f64 * self.steps as f64 * self.v_bar_max)
    }

    pub fn time_on_target(&self) -> f64 {
        self.on_target_steps as f64 / self.steps as f64
    }

    pub fn histogram(&self) -> Histogram {
        Histogram::from_counts(&self.counts, self.steps)
    }
}
