//! Shared oracles for the acceptance suite: exhaustive action-sequence
//! enumeration for tiny tabular instances and an 8-direction lattice search
//! over the maze used to certify solvability claims independently of the
//! dynamic-programming code under test.

use std::collections::HashMap;

use etmdp_lab::envs::geometry::{segments_intersect, Segment};
use etmdp_lab::envs::MazeSpec;
use etmdp_lab::tabular::TabularMdp;
use etmdp_lab::Real;

/// Best return over every action sequence whose cumulative cost stays within
/// `budget`; `None` when no sequence is feasible. Exponential in the horizon,
/// so only for tiny instances.
pub fn best_feasible_by_enumeration(mdp: &TabularMdp, start: usize, budget: usize) -> Option<Real> {
    let h = mdp.horizon as u32;
    let a = mdp.n_actions;
    let total = a.checked_pow(h).expect("enumeration size overflow");
    assert!(total <= 1 << 20, "instance too large to enumerate");
    let mut best: Option<Real> = None;
    for seq in 0..total {
        let mut code = seq;
        let mut s = start;
        let mut ret = 0.0;
        let mut cost = 0usize;
        let mut feasible = true;
        for _ in 0..h {
            let act = code % a;
            code /= a;
            cost += mdp.cost(s, act);
            if cost > budget {
                feasible = false;
                break;
            }
            ret += mdp.reward[s][act];
            s = mdp.transition[s][act];
        }
        if feasible && best.is_none_or(|b| ret > b) {
            best = Some(ret);
        }
    }
    best
}

/// A lattice path through the maze found by breadth-first search.
pub struct LatticePath {
    /// Lava crossings incurred along the path.
    pub crossings: usize,
    /// Visited integer positions, start first.
    pub positions: Vec<(i64, i64)>,
}

impl LatticePath {
    /// Unit actions replaying the path through a maze environment.
    pub fn actions(&self) -> Vec<Vec<Real>> {
        self.positions
            .windows(2)
            .map(|w| vec![(w[1].0 - w[0].0) as Real, (w[1].1 - w[0].1) as Real])
            .collect()
    }
}

/// Breadth-first search over integer positions with 8-direction unit moves:
/// the shortest path (in steps) from the maze start to the goal disc that
/// crosses lava at most `budget` times within `horizon` steps.
pub fn lattice_search(spec: &MazeSpec, budget: usize, horizon: usize) -> Option<LatticePath> {
    let size = spec.size as i64;
    let start = (spec.start.0.round() as i64, spec.start.1.round() as i64);
    let in_goal = |p: (i64, i64)| {
        let dx = p.0 as Real - spec.goal_center.0;
        let dy = p.1 as Real - spec.goal_center.1;
        (dx * dx + dy * dy).sqrt() <= spec.goal_radius
    };
    let crosses = |from: (i64, i64), to: (i64, i64)| {
        let motion = Segment::new(from.0 as Real, from.1 as Real, to.0 as Real, to.1 as Real);
        spec.lava.iter().any(|seg| segments_intersect(&motion, seg))
    };

    let mut parent: HashMap<(i64, i64, usize), (i64, i64, usize)> = HashMap::new();
    let mut frontier = vec![(start.0, start.1, 0usize)];
    parent.insert(frontier[0], frontier[0]);
    let reconstruct = |parent: &HashMap<_, _>, mut node: (i64, i64, usize)| {
        let crossings = node.2;
        let mut positions = vec![(node.0, node.1)];
        while parent[&node] != node {
            node = parent[&node];
            positions.push((node.0, node.1));
        }
        positions.reverse();
        LatticePath {
            crossings,
            positions,
        }
    };
    if in_goal(start) {
        return Some(reconstruct(&parent, frontier[0]));
    }
    for _step in 0..horizon {
        let mut next = Vec::new();
        for &(x, y, c) in &frontier {
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if !(0..=size).contains(&nx) || !(0..=size).contains(&ny) {
                        continue;
                    }
                    let nc = c + usize::from(crosses((x, y), (nx, ny)));
                    if nc > budget || parent.contains_key(&(nx, ny, nc)) {
                        continue;
                    }
                    parent.insert((nx, ny, nc), (x, y, c));
                    if in_goal((nx, ny)) {
                        return Some(reconstruct(&parent, (nx, ny, nc)));
                    }
                    next.push((nx, ny, nc));
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        frontier = next;
    }
    None
}
