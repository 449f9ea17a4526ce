//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use swarmsim::dynamics::StepOutcome;
use swarmsim::model::SimConfig;
use swarmsim::Vec2;

/// Full sort of every other agent by (squared distance, id).
pub fn brute_knn(positions: &[Vec2], k: usize) -> Vec<Vec<usize>> {
    (0..positions.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..positions.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let dx = positions[j].x - positions[i].x;
                    let dy = positions[j].y - positions[i].y;
                    (dx * dx + dy * dy, j)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Checks the state invariants of one step; returns a description of the first violation.
pub fn check_step(cfg: &SimConfig, out: &StepOutcome) -> Result<(), String> {
    let l = cfg.arena_size;
    for a in &out.agents {
        let v_max = cfg.class(a.class_id).v_max;
        if !a.position.is_finite() || !a.velocity.is_finite() {
            return Err(format!("agent {} non-finite state", a.id));
        }
        if a.velocity.norm() > v_max * (1.0 + 1e-12) {
            return Err(format!(
                "agent {} speed {} > {}",
                a.id,
                a.velocity.norm(),
                v_max
            ));
        }
        if !(a.repulsion_strength >= cfg.a_r_min && a.repulsion_strength <= cfg.a_r_max) {
            return Err(format!(
                "agent {} a_R {} out of bounds",
                a.id, a.repulsion_strength
            ));
        }
        if !(0.0..=l).contains(&a.position.x) || !(0.0..=l).contains(&a.position.y) {
            return Err(format!("agent {} left the arena at {:?}", a.id, a.position));
        }
    }
    let t = &out.target;
    if !(0.0..=l).contains(&t.position.x) || !(0.0..=l).contains(&t.position.y) {
        return Err(format!("target left the arena at {:?}", t.position));
    }
    Ok(())
}

/// Mean-removed velocities, computed directly.
pub fn fluctuations(vs: &[Vec2]) -> Vec<Vec2> {
    let n = vs.len() as f64;
    let mx = vs.iter().map(|v| v.x).sum::<f64>() / n;
    let my = vs.iter().map(|v| v.y).sum::<f64>() / n;
    vs.iter().map(|v| Vec2::new(v.x - mx, v.y - my)).collect()
}

/// cos of the angle between `v` and the direction from `x` to `target`; 0 if undefined.
pub fn phi(v: Vec2, x: Vec2, target: Vec2) -> f64 {
    let (bx, by) = (target.x - x.x, target.y - x.y);
    let bn = (bx * bx + by * by).sqrt();
    let vn = (v.x * v.x + v.y * v.y).sqrt();
    if bn == 0.0 || vn == 0.0 {
        return 0.0;
    }
    ((v.x * bx + v.y * by) / (vn * bn)).clamp(-1.0, 1.0)
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = rx
        .iter()
        .zip(&ry)
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    let vx: f64 = rx.iter().map(|a| (a - mean).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - mean).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

// Average ranks (1-based) with ties sharing their mean rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &m in &idx[i..=j] {
            out[m] = r;
        }
        i = j + 1;
    }
    out
}
