//! Open-street components, window crossings and connection probabilities.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    build_street_system, sample_poisson_points, GeometryError, StreetSystem, Window,
};
use crate::placement::{Deployment, NetworkParams, ParamError};
use crate::propagation::{SinrField, StreetVerdict};
use crate::seed::ReplicationSeeds;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("replications must be at least 1")]
    NoReplications,
}

/// Open streets and their connected components. Streets are joined when
/// they share a crossroads; an open street has relays at both ends, so any
/// shared end of two open streets carries a relay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenGraph {
    /// Component label per street, `None` for closed streets.
    pub labels: Vec<Option<usize>>,
    /// Street count per component.
    pub sizes: Vec<usize>,
}

impl OpenGraph {
    pub fn open_streets(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(s, l)| l.map(|_| s))
    }

    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn largest_component(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

/// Labels components of the open streets by breadth-first search.
pub fn build_open_graph(system: &StreetSystem, open: &[bool]) -> OpenGraph {
    let mut labels = vec![None; system.streets().len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if !open[start] || labels[start].is_some() {
            continue;
        }
        let label = sizes.len();
        let mut size = 0;
        labels[start] = Some(label);
        queue.push_back(start);
        while let Some(s) = queue.pop_front() {
            size += 1;
            let street = system.street(s);
            for v in [street.v1, street.v2] {
                for &t in system.incident(v) {
                    if open[t] && labels[t].is_none() {
                        labels[t] = Some(label);
                        queue.push_back(t);
                    }
                }
            }
        }
        sizes.push(size);
    }
    OpenGraph { labels, sizes }
}

/// Open graph straight from a deployment.
pub fn open_graph_for(
    system: &StreetSystem,
    deployment: &Deployment,
    params: &NetworkParams,
) -> (Vec<StreetVerdict>, OpenGraph) {
    let verdicts = SinrField::new(system, deployment, params).verdicts();
    let open: Vec<bool> = verdicts.iter().map(StreetVerdict::is_open).collect();
    let graph = build_open_graph(system, &open);
    (verdicts, graph)
}

/// Streets meeting each side of the inner window.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoundarySets {
    pub north: Vec<usize>,
    pub east: Vec<usize>,
    pub south: Vec<usize>,
    pub west: Vec<usize>,
}

/// Per side, the streets whose segment meets that side (closed segments,
/// so a street through a corner belongs to both sides).
pub fn boundary_streets(system: &StreetSystem, window: &Window) -> BoundarySets {
    let inner = window.inner();
    let (min, max) = (inner.min, inner.max);
    let mut sets = BoundarySets::default();
    for street in system.streets() {
        let (a, b) = system.endpoints(street.id);
        if crosses_level(a.y, b.y, max.y, a.x, b.x, min.x, max.x) {
            sets.north.push(street.id);
        }
        if crosses_level(a.x, b.x, max.x, a.y, b.y, min.y, max.y) {
            sets.east.push(street.id);
        }
        if crosses_level(a.y, b.y, min.y, a.x, b.x, min.x, max.x) {
            sets.south.push(street.id);
        }
        if crosses_level(a.x, b.x, min.x, a.y, b.y, min.y, max.y) {
            sets.west.push(street.id);
        }
    }
    sets
}

/// Whether the segment with coordinates `(u1, w1)`-`(u2, w2)` meets the
/// axis-parallel side `u == level`, `w in [lo, hi]`.
fn crosses_level(u1: f64, u2: f64, level: f64, w1: f64, w2: f64, lo: f64, hi: f64) -> bool {
    if level < u1.min(u2) || level > u1.max(u2) {
        return false;
    }
    if u1 == u2 {
        // lies along the side's line
        return w1.max(w2) >= lo && w1.min(w2) <= hi;
    }
    let t = (level - u1) / (u2 - u1);
    let w = w1 + t * (w2 - w1);
    (lo..=hi).contains(&w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Crossing {
    pub vertical: bool,
    pub horizontal: bool,
}

impl Crossing {
    pub fn percolates(&self) -> bool {
        self.vertical || self.horizontal
    }
}

/// A crossing exists when one component holds open streets meeting both
/// opposite sides.
pub fn detect_crossing(graph: &OpenGraph, boundary: &BoundarySets) -> Crossing {
    let touched = |side: &[usize]| {
        let mut hit = vec![false; graph.sizes.len()];
        for &s in side {
            if let Some(label) = graph.labels[s] {
                hit[label] = true;
            }
        }
        hit
    };
    let shares = |a: &[usize], b: &[usize]| touched(a).iter().zip(touched(b)).any(|(&x, y)| x && y);
    Crossing {
        vertical: shares(&boundary.north, &boundary.south),
        horizontal: shares(&boundary.east, &boundary.west),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationOutcome {
    pub replication: u64,
    pub verdicts: Vec<StreetVerdict>,
    pub graph: OpenGraph,
    pub boundary: BoundarySets,
    pub crossing: Crossing,
}

impl RealizationOutcome {
    pub fn percolates(&self) -> bool {
        self.crossing.percolates()
    }
}

/// Everything drawn for one replication, kept for dumps and checks.
#[derive(Debug, Clone)]
pub struct Realization {
    pub system: StreetSystem,
    pub deployment: Deployment,
    pub outcome: RealizationOutcome,
}

/// Street system of replication `replication` under `master_seed`. It
/// depends on the street intensity only, so sweeps over other parameters
/// reuse the same streets.
pub fn realize_streets(
    street_intensity: f64,
    window: &Window,
    master_seed: u64,
    replication: u64,
) -> Result<StreetSystem, GeometryError> {
    let seeds = ReplicationSeeds::new(master_seed, replication);
    let points = sample_poisson_points(street_intensity, window, seeds.points)?;
    build_street_system(&points, window)
}

pub fn realize(
    params: &NetworkParams,
    window: &Window,
    master_seed: u64,
    replication: u64,
) -> Result<Realization, SimulationError> {
    params.validate()?;
    let seeds = ReplicationSeeds::new(master_seed, replication);
    let system = realize_streets(params.street_intensity, window, master_seed, replication)?;
    let deployment = Deployment::generate(&system, params, seeds.relays, seeds.users);
    let (verdicts, graph) = open_graph_for(&system, &deployment, params);
    let boundary = boundary_streets(&system, window);
    let crossing = detect_crossing(&graph, &boundary);
    Ok(Realization {
        system,
        deployment,
        outcome: RealizationOutcome {
            replication,
            verdicts,
            graph,
            boundary,
            crossing,
        },
    })
}

/// Full pipeline for one replication: streets, relays, users, verdicts,
/// components, crossings.
pub fn simulate_realization(
    params: &NetworkParams,
    window: &Window,
    master_seed: u64,
    replication: u64,
) -> Result<RealizationOutcome, SimulationError> {
    realize(params, window, master_seed, replication).map(|r| r.outcome)
}

/// 95% Wilson score interval.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub replications: usize,
    pub successes: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ProbabilityEstimate {
    pub fn from_counts(successes: usize, replications: usize) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, replications);
        Self {
            replications,
            successes,
            probability: if replications == 0 {
                0.0
            } else {
                successes as f64 / replications as f64
            },
            ci_low,
            ci_high,
        }
    }
}

/// Runs replications `0..replications` and counts how many percolate.
pub fn estimate_connection_probability(
    params: &NetworkParams,
    window: &Window,
    replications: usize,
    master_seed: u64,
) -> Result<ProbabilityEstimate, SimulationError> {
    if replications == 0 {
        return Err(SimulationError::NoReplications);
    }
    params.validate()?;
    let flags = map_replications(replications, |rep| {
        simulate_realization(params, window, master_seed, rep as u64).map(|o| o.percolates())
    })?;
    let successes = flags.iter().filter(|&&f| f).count();
    Ok(ProbabilityEstimate::from_counts(successes, replications))
}

/// Maps replication indices in order, in parallel when enabled.
pub fn map_replications<T, E, F>(replications: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..replications).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..replications).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    /// Path of three streets crossing a 10 m window west to east.
    fn path_system() -> StreetSystem {
        let v = vec![
            Point::new(-8.0, 0.0),
            Point::new(-2.0, 1.0),
            Point::new(2.0, -1.0),
            Point::new(8.0, 0.0),
        ];
        StreetSystem::from_parts(v, &[(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn chain_of_open_streets_is_one_component() {
        let system = path_system();
        let g = build_open_graph(&system, &[true, true, true]);
        assert_eq!(g.component_count(), 1);
        assert_eq!(g.largest_component(), 3);
        let g = build_open_graph(&system, &[true, false, true]);
        assert_eq!(g.component_count(), 2);
        assert_eq!(g.labels[1], None);
        let g = build_open_graph(&system, &[false; 3]);
        assert_eq!(g.component_count(), 0);
    }

    #[test]
    fn horizontal_crossing_only() {
        let system = path_system();
        let window = Window::new(10.0).unwrap();
        let boundary = boundary_streets(&system, &window);
        assert_eq!(boundary.west, vec![0]);
        assert_eq!(boundary.east, vec![2]);
        assert!(boundary.north.is_empty() && boundary.south.is_empty());
        let c = detect_crossing(&build_open_graph(&system, &[true; 3]), &boundary);
        assert!(c.horizontal && !c.vertical && c.percolates());
        let c = detect_crossing(&build_open_graph(&system, &[true, false, true]), &boundary);
        assert!(!c.percolates());
        let c = detect_crossing(&build_open_graph(&system, &[false; 3]), &boundary);
        assert_eq!(c, Crossing::default());
    }

    #[test]
    fn corner_street_touches_two_sides() {
        let v = vec![
            Point::new(3.0, 3.0),
            Point::new(7.0, 7.0),
            Point::new(0.0, 0.0),
        ];
        let system = StreetSystem::from_parts(v, &[(0, 1), (0, 2)]).unwrap();
        let window = Window::new(10.0).unwrap();
        let b = boundary_streets(&system, &window);
        assert_eq!(b.north, vec![0]);
        assert_eq!(b.east, vec![0]);
        assert!(b.south.is_empty() && b.west.is_empty());
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 100);
        assert!(lo < 1e-12);
        assert!(hi < 3.0 / 100.0 + 0.01, "{hi}");
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(lo > 0.96 && hi == 1.0);
        let e = ProbabilityEstimate::from_counts(0, 40);
        assert_eq!(e.probability, 0.0);
    }

    #[test]
    fn realization_is_deterministic() {
        let params = NetworkParams::default().with_users_per_street(3.0);
        let window = Window::new(800.0).unwrap();
        let a = simulate_realization(&params, &window, 9, 2).unwrap();
        let b = simulate_realization(&params, &window, 9, 2).unwrap();
        assert_eq!(a, b);
        let c = simulate_realization(&params, &window, 9, 3).unwrap();
        assert_ne!(a.verdicts, c.verdicts);
    }

    #[test]
    fn no_relays_means_no_open_streets() {
        let params = NetworkParams {
            relay_probability: 0.0,
            ..NetworkParams::default().with_users_per_street(3.0)
        };
        let window = Window::new(800.0).unwrap();
        let o = simulate_realization(&params, &window, 1, 0).unwrap();
        assert_eq!(o.graph.component_count(), 0);
        assert!(!o.percolates());
    }

    #[test]
    fn zero_replications_is_an_error() {
        let window = Window::new(800.0).unwrap();
        assert_eq!(
            estimate_connection_probability(&NetworkParams::default(), &window, 0, 1),
            Err(SimulationError::NoReplications)
        );
    }
}
