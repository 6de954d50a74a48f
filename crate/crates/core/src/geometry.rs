//! Poisson point sampling and the truncated Poisson-Voronoi street system.
//!
//! The simulation window is a square `W1` centred at the origin, padded by
//! eight translated copies into a 3x3 outer square `W`. Seeds of the
//! tessellation are sampled over `W`; only Voronoi edges touching `W1` are
//! kept, at full length.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use spade::handles::VoronoiVertex;
use spade::{DelaunayTriangulation, Point2, Triangulation};
use thiserror::Error;

use crate::seed::stream_rng;

/// Points closer than this are treated as duplicates before triangulation.
const MIN_SEPARATION: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("cannot build street system: {0}")]
    Construction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point at fraction `t` of the way from `self` to `other`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn scaled(&self, c: f64) -> Point {
        Point::new(self.x * c, self.y * c)
    }
}

/// Axis-aligned square, closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Square {
    pub min: Point,
    pub max: Point,
}

impl Square {
    pub fn centered(half_side: f64) -> Self {
        Self {
            min: Point::new(-half_side, -half_side),
            max: Point::new(half_side, half_side),
        }
    }

    pub fn side(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn area(&self) -> f64 {
        self.side() * (self.max.y - self.min.y)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Length of the part of segment `a`-`b` inside the square
    /// (Liang-Barsky clipping).
    pub fn clipped_length(&self, a: &Point, b: &Point) -> f64 {
        match self.clip_parameters(a, b) {
            Some((t0, t1)) => (t1 - t0) * a.distance(b),
            None => 0.0,
        }
    }

    /// Closed segment/square intersection test.
    pub fn intersects_segment(&self, a: &Point, b: &Point) -> bool {
        self.clip_parameters(a, b).is_some()
    }

    fn clip_parameters(&self, a: &Point, b: &Point) -> Option<(f64, f64)> {
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for (p, q) in [
            (-dx, a.x - self.min.x),
            (dx, self.max.x - a.x),
            (-dy, a.y - self.min.y),
            (dy, self.max.y - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// The four sides as segments, in north, east, south, west order.
    pub fn sides(&self) -> [(Point, Point); 4] {
        let nw = Point::new(self.min.x, self.max.y);
        let ne = self.max;
        let se = Point::new(self.max.x, self.min.y);
        let sw = self.min;
        [(nw, ne), (ne, se), (sw, se), (sw, nw)]
    }
}

/// Inner simulation window `W1` of a given side, and the 3x3 padded
/// window `W` around it. Both are centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    inner_side: f64,
}

impl Window {
    pub fn new(inner_side: f64) -> Result<Self, GeometryError> {
        if !inner_side.is_finite() || inner_side < 0.0 {
            return Err(GeometryError::Parameter(format!(
                "window side must be finite and non-negative, got {inner_side}"
            )));
        }
        Ok(Self { inner_side })
    }

    pub fn inner_side(&self) -> f64 {
        self.inner_side
    }

    pub fn outer_side(&self) -> f64 {
        3.0 * self.inner_side
    }

    pub fn inner(&self) -> Square {
        Square::centered(self.inner_side / 2.0)
    }

    pub fn outer(&self) -> Square {
        Square::centered(self.outer_side() / 2.0)
    }
}

/// Homogeneous Poisson points of `intensity` (per m²) over the outer window.
pub fn sample_poisson_points(
    intensity: f64,
    window: &Window,
    seed: u64,
) -> Result<Vec<Point>, GeometryError> {
    let mut rng = stream_rng(seed);
    sample_poisson_points_with(intensity, window, &mut rng)
}

pub fn sample_poisson_points_with<R: Rng + ?Sized>(
    intensity: f64,
    window: &Window,
    rng: &mut R,
) -> Result<Vec<Point>, GeometryError> {
    if !(intensity > 0.0) || !intensity.is_finite() {
        return Err(GeometryError::Parameter(format!(
            "intensity must be positive, got {intensity}"
        )));
    }
    let square = window.outer();
    let mean = intensity * square.area();
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| GeometryError::Parameter(e.to_string()))?
        .sample(rng) as usize;
    let side = square.side();
    Ok((0..count)
        .map(|_| {
            Point::new(
                square.min.x + side * rng.random::<f64>(),
                square.min.y + side * rng.random::<f64>(),
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Street {
    pub id: usize,
    pub v1: usize,
    pub v2: usize,
    pub length: f64,
}

/// Truncated Voronoi tessellation. Vertices are crossroads, edges are
/// streets. Ids are indices into `vertices` and `streets`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetSystem {
    vertices: Vec<Point>,
    streets: Vec<Street>,
    adjacency: Vec<Vec<usize>>,
}

impl StreetSystem {
    /// Assembles a street system from explicit geometry. Streets are given as
    /// vertex index pairs.
    pub fn from_parts(
        vertices: Vec<Point>,
        edges: &[(usize, usize)],
    ) -> Result<Self, GeometryError> {
        let mut streets = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (id, &(v1, v2)) in edges.iter().enumerate() {
            if v1 == v2 || v1 >= vertices.len() || v2 >= vertices.len() {
                return Err(GeometryError::Construction(format!(
                    "street {id} has invalid endpoints ({v1}, {v2})"
                )));
            }
            let length = vertices[v1].distance(&vertices[v2]);
            if !(length > 0.0) {
                return Err(GeometryError::Construction(format!(
                    "street {id} has zero length"
                )));
            }
            adjacency[v1].push(id);
            adjacency[v2].push(id);
            streets.push(Street { id, v1, v2, length });
        }
        Ok(Self {
            vertices,
            streets,
            adjacency,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn streets(&self) -> &[Street] {
        &self.streets
    }

    pub fn street(&self, id: usize) -> &Street {
        &self.streets[id]
    }

    pub fn vertex(&self, id: usize) -> Point {
        self.vertices[id]
    }

    /// Streets incident to a vertex.
    pub fn incident(&self, vertex: usize) -> &[usize] {
        &self.adjacency[vertex]
    }

    pub fn endpoints(&self, street: usize) -> (Point, Point) {
        let s = &self.streets[street];
        (self.vertices[s.v1], self.vertices[s.v2])
    }

    /// Position at `offset` metres from the street's first endpoint.
    pub fn point_on(&self, street: usize, offset: f64) -> Point {
        let s = &self.streets[street];
        let (a, b) = self.endpoints(street);
        a.lerp(&b, offset / s.length)
    }

    pub fn is_empty(&self) -> bool {
        self.streets.is_empty()
    }
}

/// Voronoi diagram of `points`, truncated to the edges that touch the inner
/// window. Retained streets keep their full length.
pub fn build_street_system(
    points: &[Point],
    window: &Window,
) -> Result<StreetSystem, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::Construction(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    let inner = window.inner();
    let triangulation: DelaunayTriangulation<Point2<f64>> =
        DelaunayTriangulation::bulk_load_stable(dedup_points(points))
            .map_err(|e| GeometryError::Construction(format!("triangulation failed: {e:?}")))?;
    if triangulation.num_inner_faces() == 0 {
        return Err(GeometryError::Construction(
            "points are collinear, no bounded Voronoi vertex exists".into(),
        ));
    }

    // Rays shot from unbounded edges are tested as long segments.
    let ray_reach = 4.0 * window.outer_side().max(1.0);
    let mut face_vertex: Vec<Option<usize>> = vec![None; triangulation.num_all_faces()];
    let mut vertices = Vec::new();
    let mut edges = Vec::new();

    for edge in triangulation.undirected_voronoi_edges() {
        let directed = edge.as_directed();
        match (directed.from(), directed.to()) {
            (VoronoiVertex::Inner(f1), VoronoiVertex::Inner(f2)) => {
                let a = to_point(f1.circumcenter());
                let b = to_point(f2.circumcenter());
                if !inner.intersects_segment(&a, &b) || a.distance(&b) <= MIN_SEPARATION {
                    continue;
                }
                let mut vertex_id = |idx: usize, p: Point| {
                    *face_vertex[idx].get_or_insert_with(|| {
                        vertices.push(p);
                        vertices.len() - 1
                    })
                };
                let v1 = vertex_id(f1.fix().index(), a);
                let v2 = vertex_id(f2.fix().index(), b);
                edges.push((v1, v2));
            }
            (VoronoiVertex::Inner(face), VoronoiVertex::Outer(_))
            | (VoronoiVertex::Outer(_), VoronoiVertex::Inner(face)) => {
                // The ray leaves the circumcenter along the hull edge's
                // outward normal, away from the face's third vertex.
                let [p, q] = edge.as_delaunay_edge().positions().map(to_point);
                let third = face
                    .positions()
                    .map(to_point)
                    .into_iter()
                    .find(|v| *v != p && *v != q)
                    .expect("triangle has a vertex off the hull edge");
                let mut normal = Point::new(q.y - p.y, p.x - q.x);
                let toward_third = (third.x - p.x) * normal.x + (third.y - p.y) * normal.y;
                if toward_third > 0.0 {
                    normal = normal.scaled(-1.0);
                }
                let norm = normal.x.hypot(normal.y);
                let origin = to_point(face.circumcenter());
                let far = Point::new(
                    origin.x + normal.x / norm * ray_reach,
                    origin.y + normal.y / norm * ray_reach,
                );
                if inner.intersects_segment(&origin, &far) {
                    return Err(GeometryError::Construction(
                        "an unbounded Voronoi edge reaches the inner window; \
                         increase the window or the street intensity"
                            .into(),
                    ));
                }
            }
            _ => {}
        }
    }
    StreetSystem::from_parts(vertices, &edges)
}

fn to_point(p: Point2<f64>) -> Point {
    Point::new(p.x, p.y)
}

fn dedup_points(points: &[Point]) -> Vec<Point2<f64>> {
    let mut sorted: Vec<Point> = points.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut kept: Vec<Point> = Vec::with_capacity(sorted.len());
    for p in sorted {
        let duplicate = kept
            .iter()
            .rev()
            .take_while(|q| p.x - q.x <= MIN_SEPARATION)
            .any(|q| q.distance(&p) <= MIN_SEPARATION);
        if !duplicate {
            kept.push(p);
        }
    }
    kept.into_iter().map(|p| Point2::new(p.x, p.y)).collect()
}

/// Empirical tessellation statistics measured in the inner window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StreetStatistics {
    /// Crossroads lying in `W1`.
    pub vertices_in_window: usize,
    /// Street length inside `W1` (clipped).
    pub length_in_window: f64,
    /// Streets whose midpoint lies in `W1`.
    pub sampled_streets: usize,
    /// Summed full length of those streets.
    pub sampled_length: f64,
    pub window_area: f64,
}

impl StreetStatistics {
    pub fn vertex_intensity(&self) -> f64 {
        ratio(self.vertices_in_window as f64, self.window_area)
    }

    pub fn line_intensity(&self) -> f64 {
        ratio(self.length_in_window, self.window_area)
    }

    pub fn mean_street_length(&self) -> f64 {
        ratio(self.sampled_length, self.sampled_streets as f64)
    }

    /// Pools counts from several realizations.
    pub fn merge(&self, other: &StreetStatistics) -> StreetStatistics {
        StreetStatistics {
            vertices_in_window: self.vertices_in_window + other.vertices_in_window,
            length_in_window: self.length_in_window + other.length_in_window,
            sampled_streets: self.sampled_streets + other.sampled_streets,
            sampled_length: self.sampled_length + other.sampled_length,
            window_area: self.window_area + other.window_area,
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Measures the street system in the inner window.
///
/// Mean street length is taken over streets whose midpoint falls in `W1`.
/// Every street is marked by exactly one midpoint, so this is an unbiased
/// sample of the typical edge; restricting to fully-inside streets would
/// under-sample long streets near the boundary.
pub fn street_statistics(system: &StreetSystem, window: &Window) -> StreetStatistics {
    let inner = window.inner();
    let mut stats = StreetStatistics {
        window_area: inner.area(),
        ..Default::default()
    };
    stats.vertices_in_window = system
        .vertices()
        .iter()
        .filter(|p| inner.contains(p))
        .count();
    for street in system.streets() {
        let (a, b) = system.endpoints(street.id);
        stats.length_in_window += inner.clipped_length(&a, &b);
        if inner.contains(&a.lerp(&b, 0.5)) {
            stats.sampled_streets += 1;
            stats.sampled_length += street.length;
        }
    }
    stats
}

/// Segment intersection including touching endpoints and collinear overlap.
pub fn segments_intersect(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> bool {
    fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
        (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
    }
    fn on_segment(a: &Point, b: &Point, p: &Point) -> bool {
        p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    }
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}
