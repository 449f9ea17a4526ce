//! Disc target: binary objective and random-heading motion.

use crate::model::{RngStream, TargetState};
use crate::vec2::Vec2;

pub const ON_TARGET: i8 = -1;
pub const OFF_TARGET: i8 = 0;

/// Binary objective: -1 when the agent lies inside the disc (boundary
/// included), 0 otherwise.
#[inline]
pub fn objective(agent_pos: Vec2, target: &TargetState) -> i8 {
    if agent_pos.distance_squared(target.position) <= target.radius * target.radius {
        ON_TARGET
    } else {
        OFF_TARGET
    }
}

/// Moves the target one step along its heading at constant speed.
///
/// A new uniform heading and hold duration are drawn when the current hold
/// has run out. Walls reflect the heading component normal to them.
pub fn advance_target(
    target: &TargetState,
    arena_size: f64,
    hold_range: (u32, u32),
    rng: &mut RngStream,
) -> TargetState {
    let mut next = target.clone();
    if next.heading_hold == 0 {
        next.heading = rng.draw_heading();
        next.heading_hold = rng.draw_inclusive(hold_range.0, hold_range.1);
    }
    let mut position = next.position + next.heading * next.speed;
    let (x, hx) = reflect(position.x, next.heading.x, arena_size);
    let (y, hy) = reflect(position.y, next.heading.y, arena_size);
    position = Vec2::new(x, y);
    next.position = position;
    next.heading = Vec2::new(hx, hy);
    next.heading_hold -= 1;
    next
}

// Mirror a coordinate back into [0, l], flipping the heading component once
// per bounce.
fn reflect(mut coord: f64, mut heading: f64, l: f64) -> (f64, f64) {
    loop {
        if coord < 0.0 {
            coord = -coord;
        } else if coord > l {
            coord = 2.0 * l - coord;
        } else {
            return (coord, heading);
        }
        heading = -heading;
    }
}
