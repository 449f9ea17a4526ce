//! Directed k-nearest-neighbor graph over agent positions.

use thiserror::Error;

use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("degree k = {k} out of range [{min}, {max}] for {n} agents")]
    DegreeOutOfRange {
        k: usize,
        min: usize,
        max: usize,
        n: usize,
    },
}

/// Each agent's `k` nearest agents, nearest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSet {
    k: usize,
    flat: Vec<usize>,
}

impl NeighborSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn agent_count(&self) -> usize {
        self.flat.len().checked_div(self.k).unwrap_or(0)
    }

    /// Neighbors of agent `i`, ordered by ascending distance then id.
    pub fn of(&self, i: usize) -> &[usize] {
        &self.flat[i * self.k..(i + 1) * self.k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.flat.chunks_exact(self.k)
    }
}

/// Topological neighbor sets with the swarm's degree constraint `2 <= k <= N-1`.
pub fn knn(positions: &[Vec2], k: usize) -> Result<NeighborSet, TopologyError> {
    check_degree(positions.len(), k, 2)?;
    Ok(build(positions, k))
}

/// Same as [`knn`] but admits `k = 1`.
pub fn nearest_k(positions: &[Vec2], k: usize) -> Result<NeighborSet, TopologyError> {
    check_degree(positions.len(), k, 1)?;
    Ok(build(positions, k))
}

fn check_degree(n: usize, k: usize, min: usize) -> Result<(), TopologyError> {
    let max = n.saturating_sub(1);
    if k < min || k > max {
        return Err(TopologyError::DegreeOutOfRange { k, min, max, n });
    }
    Ok(())
}

// Non-negative f64 bit patterns order like the values, so packing the
// squared distance above the id gives the (distance, id) order as integers.
#[inline]
fn rank_key(d2: f64, j: usize) -> u128 {
    (u128::from(d2.to_bits()) << 64) | j as u128
}

// Exact selection: partition around the k-th candidate, then order the head.
fn build(positions: &[Vec2], k: usize) -> NeighborSet {
    let n = positions.len();
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = positions[i].distance_squared(positions[j]);
            d2[i * n + j] = d;
            d2[j * n + i] = d;
        }
    }
    let mut flat = Vec::with_capacity(n * k);
    let mut keys: Vec<u128> = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        keys.clear();
        let row = &d2[i * n..(i + 1) * n];
        keys.extend((0..n).filter(|&j| j != i).map(|j| rank_key(row[j], j)));
        if k < keys.len() {
            keys.select_nth_unstable(k - 1);
        }
        let head = &mut keys[..k];
        head.sort_unstable();
        flat.extend(head.iter().map(|&key| key as u64 as usize));
    }
    NeighborSet { k, flat }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Vec<Vec2> {
        xs.iter().map(|&x| Vec2::new(x, 0.0)).collect()
    }

    #[test]
    fn line_with_k_one() {
        let nbrs = nearest_k(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(nbrs.of(0), &[1]);
        assert_eq!(nbrs.of(1), &[0]);
        assert_eq!(nbrs.of(2), &[1]);
    }

    #[test]
    fn complete_graph_when_k_is_n_minus_one() {
        let nbrs = knn(&line(&[0.0, 1.0, 3.0]), 2).unwrap();
        assert_eq!(nbrs.of(0), &[1, 2]);
        assert_eq!(nbrs.of(1), &[0, 2]);
        assert_eq!(nbrs.of(2), &[1, 0]);
    }

    #[test]
    fn ties_go_to_lower_id() {
        // Agents 1 and 2 sit at distance 1 on either side of agent 0.
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(5.0, 5.0),
        ];
        let nbrs = knn(&pts, 2).unwrap();
        assert_eq!(nbrs.of(0), &[1, 2]);
        let pts = vec![pts[0], pts[2], pts[1], pts[3]];
        assert_eq!(knn(&pts, 2).unwrap().of(0), &[1, 2]);
    }

    #[test]
    fn degree_range_enforced() {
        let pts = line(&[0.0, 1.0, 2.0, 3.0]);
        assert!(knn(&pts, 1).is_err());
        assert!(knn(&pts, 4).is_err());
        assert!(nearest_k(&pts, 0).is_err());
        assert!(knn(&pts, 3).is_ok());
    }

    #[test]
    fn set_shape() {
        let pts: Vec<Vec2> = (0..10)
            .map(|i| Vec2::new(i as f64, (i * i) as f64))
            .collect();
        let nbrs = knn(&pts, 4).unwrap();
        assert_eq!(nbrs.agent_count(), 10);
        for (i, set) in nbrs.iter().enumerate() {
            assert_eq!(set.len(), 4);
            assert!(!set.contains(&i));
        }
    }
}
