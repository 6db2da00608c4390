//! Combinatorial and metric graphs of a neighbor relation.
//!
//! Balls are always taken in the intrinsic metric of the space: hop count
//! `d_c` on the combinatorial graph and path length `d_m` on the metric
//! graph.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{equivalence_constant, NeighborRelation};
use crate::pointset::PointSet;

/// Vertices = point ids, edges = relation pairs, counting measure.
#[derive(Debug, Clone)]
pub struct CombinatorialGraph {
    rel: NeighborRelation,
}

impl CombinatorialGraph {
    pub fn new(rel: &NeighborRelation) -> Self {
        Self { rel: rel.clone() }
    }

    pub fn relation(&self) -> &NeighborRelation {
        &self.rel
    }

    pub fn pointset(&self) -> &PointSet {
        self.rel.pointset()
    }

    pub fn len(&self) -> usize {
        self.pointset().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        self.rel.neighbors(x)
    }

    /// Hop distances from `x`, `None` where unreachable. Stops expanding
    /// beyond `limit` hops.
    pub fn hops_from(&self, x: usize, limit: Option<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[x] = Some(0);
        let mut queue = VecDeque::from([x]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            if limit.is_some_and(|l| du >= l) {
                continue;
            }
            for &v in self.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Combinatorial distance; `None` if `y` is unreachable from `x`.
    pub fn dc(&self, x: usize, y: usize) -> Option<usize> {
        if x == y {
            return Some(0);
        }
        self.hops_from(x, None)[y]
    }
}

/// A metric edge between two vertices, `a < b`, of length `|a - b|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// A point of the metric graph: a vertex, or a position on an edge given by
/// its offset from the edge's `a` end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GraphPoint {
    Vertex(usize),
    OnEdge { edge: usize, offset: f64 },
}

/// Intervals of length `|x - y|` glued at the vertices.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    rel: NeighborRelation,
    edges: Vec<MetricEdge>,
    incident: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MetricGraph {
    pub fn new(rel: &NeighborRelation) -> Self {
        let ps = rel.pointset();
        let edges: Vec<MetricEdge> = rel
            .pairs()
            .iter()
            .map(|&(a, b)| MetricEdge { a, b, length: ps.distance(a, b) })
            .collect();
        let mut incident = vec![Vec::new(); ps.len()];
        for (e, edge) in edges.iter().enumerate() {
            incident[edge.a].push(e);
            incident[edge.b].push(e);
        }
        Self { rel: rel.clone(), edges, incident }
    }

    pub fn relation(&self) -> &NeighborRelation {
        &self.rel
    }

    pub fn pointset(&self) -> &PointSet {
        self.rel.pointset()
    }

    pub fn vertex_count(&self) -> usize {
        self.incident.len()
    }

    pub fn edges(&self) -> &[MetricEdge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &MetricEdge {
        &self.edges[e]
    }

    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    /// Edge joining `a` and `b`, if any.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.incident[a].iter().copied().find(|&e| {
            let ed = &self.edges[e];
            (ed.a == a && ed.b == b) || (ed.a == b && ed.b == a)
        })
    }

    /// `mu_m` of the whole graph.
    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Validates an address and maps edge endpoints to vertices.
    pub fn canonical(&self, p: GraphPoint) -> Result<GraphPoint> {
        match p {
            GraphPoint::Vertex(v) if v < self.vertex_count() => Ok(p),
            GraphPoint::Vertex(v) => Err(Error::invalid(format!("no vertex {v}"))),
            GraphPoint::OnEdge { edge, offset } => {
                let ed = self
                    .edges
                    .get(edge)
                    .ok_or_else(|| Error::invalid(format!("no edge {edge}")))?;
                if !(0.0..=ed.length).contains(&offset) {
                    return Err(Error::invalid(format!(
                        "offset {offset} outside [0, {}] on edge {edge}",
                        ed.length
                    )));
                }
                Ok(if offset == 0.0 {
                    GraphPoint::Vertex(ed.a)
                } else if offset == ed.length {
                    GraphPoint::Vertex(ed.b)
                } else {
                    p
                })
            }
        }
    }

    /// Euclidean position of a graph point.
    pub fn position(&self, p: GraphPoint) -> Vec<f64> {
        let ps = self.pointset();
        match p {
            GraphPoint::Vertex(v) => ps.point(v).to_vec(),
            GraphPoint::OnEdge { edge, offset } => {
                let ed = &self.edges[edge];
                let t = offset / ed.length;
                ps.point(ed.a)
                    .iter()
                    .zip(ps.point(ed.b))
                    .map(|(x, y)| x + t * (y - x))
                    .collect()
            }
        }
    }

    fn seeds(&self, p: GraphPoint) -> Vec<(usize, f64)> {
        match p {
            GraphPoint::Vertex(v) => vec![(v, 0.0)],
            GraphPoint::OnEdge { edge, offset } => {
                let ed = &self.edges[edge];
                vec![(ed.a, offset), (ed.b, ed.length - offset)]
            }
        }
    }

    /// Dijkstra distances from `p` to every vertex; vertices farther than
    /// `limit` stay at infinity.
    pub fn distances_from(&self, p: GraphPoint, limit: f64) -> Result<Vec<f64>> {
        let p = self.canonical(p)?;
        let mut dist = vec![f64::INFINITY; self.vertex_count()];
        let mut heap = BinaryHeap::new();
        for (v, d) in self.seeds(p) {
            if d < dist[v] && d <= limit {
                dist[v] = d;
                heap.push(HeapItem(d, v));
            }
        }
        while let Some(HeapItem(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &self.incident[u] {
                let ed = &self.edges[e];
                let v = if ed.a == u { ed.b } else { ed.a };
                let nd = d + ed.length;
                if nd < dist[v] && nd <= limit {
                    dist[v] = nd;
                    heap.push(HeapItem(nd, v));
                }
            }
        }
        Ok(dist)
    }

    /// Path-length distance between two graph points; infinite if they lie
    /// in different components.
    pub fn dm(&self, a: GraphPoint, b: GraphPoint) -> Result<f64> {
        let a = self.canonical(a)?;
        let b = self.canonical(b)?;
        let dist = self.distances_from(a, f64::INFINITY)?;
        let mut best = self
            .seeds(b)
            .into_iter()
            .map(|(v, d)| dist[v] + d)
            .fold(f64::INFINITY, f64::min);
        if let (
            GraphPoint::OnEdge { edge: ea, offset: ta },
            GraphPoint::OnEdge { edge: eb, offset: tb },
        ) = (a, b)
        {
            if ea == eb {
                best = best.min((ta - tb).abs());
            }
        }
        if let (GraphPoint::Vertex(v), GraphPoint::Vertex(w)) = (a, b) {
            if v == w {
                best = 0.0;
            }
        }
        Ok(best)
    }

    /// Length of `{q : d_m(a, q) <= s}`, partial edges counted exactly.
    pub fn ball_measure(&self, a: GraphPoint, s: f64) -> Result<BallMeasure> {
        let a = self.canonical(a)?;
        let dist = self.distances_from(a, s)?;
        let mut total = 0.0;
        for (e, ed) in self.edges.iter().enumerate() {
            let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(3);
            let (da, db) = (dist[ed.a], dist[ed.b]);
            if da < s {
                pieces.push((0.0, (s - da).min(ed.length)));
            }
            if db < s {
                pieces.push(((ed.length - (s - db)).max(0.0), ed.length));
            }
            if let GraphPoint::OnEdge { edge, offset } = a {
                if edge == e {
                    pieces.push(((offset - s).max(0.0), (offset + s).min(ed.length)));
                }
            }
            total += union_length(&mut pieces);
        }
        Ok(BallMeasure { measure: total, truncated: self.truncated(a, s) })
    }

    /// Number of vertices with `d_m <= s`.
    pub fn vertex_ball_count(&self, a: GraphPoint, s: f64) -> Result<BallCount> {
        let a = self.canonical(a)?;
        let dist = self.distances_from(a, s)?;
        let count = dist.iter().filter(|d| **d <= s).count();
        Ok(BallCount { count, truncated: self.truncated(a, s) })
    }

    /// Since `d_m >= d`, the ball stays in the Euclidean `s`-ball.
    fn truncated(&self, a: GraphPoint, s: f64) -> bool {
        s > self.pointset().window().boundary_distance(&self.position(a))
    }
}

fn union_length(pieces: &mut [(f64, f64)]) -> f64 {
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for &(lo, hi) in pieces.iter() {
        if hi <= lo {
            continue;
        }
        cur = match cur {
            None => Some((lo, hi)),
            Some((clo, chi)) if lo <= chi => Some((clo, chi.max(hi))),
            Some((clo, chi)) => {
                total += chi - clo;
                Some((lo, hi))
            }
        };
    }
    if let Some((lo, hi)) = cur {
        total += hi - lo;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallCount {
    pub count: usize,
    /// The ball may reach past the window boundary.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallMeasure {
    pub measure: f64,
    pub truncated: bool,
}

/// Either graph, for code that treats both spaces alike.
#[derive(Debug, Clone, Copy)]
pub enum Space<'a> {
    Discrete(&'a CombinatorialGraph),
    Metric(&'a MetricGraph),
}

/// `mu_c(B_s(x))` in the combinatorial graph with `d_c`, or in metric mode
/// the number of vertices within `d_m <= s`.
pub fn ball_count_c(space: Space<'_>, x: usize, s: f64) -> Result<BallCount> {
    if s < 0.0 {
        return Err(Error::invalid("ball radius must be nonnegative"));
    }
    match space {
        Space::Discrete(g) => {
            let hops = s.floor() as usize;
            let dist = g.hops_from(x, Some(hops));
            let count = dist.iter().filter(|d| d.is_some_and(|d| d <= hops)).count();
            // Each hop moves at most S in the plane.
            let reach = hops as f64 * g.relation().parameter();
            let truncated = reach > g.pointset().window().boundary_distance(g.pointset().point(x));
            Ok(BallCount { count, truncated })
        }
        Space::Metric(m) => m.vertex_ball_count(GraphPoint::Vertex(x), s),
    }
}

/// `mu_m(B_s(a))`.
pub fn ball_measure_m(graph: &MetricGraph, a: GraphPoint, s: f64) -> Result<BallMeasure> {
    if s < 0.0 {
        return Err(Error::invalid("ball radius must be nonnegative"));
    }
    graph.ball_measure(a, s)
}

/// Sampled distance ratios against the analytic constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub samples: usize,
    pub seed: u64,
    pub parameter: f64,
    pub r: f64,
    pub constant_c: f64,
    pub min_dm_over_d: f64,
    pub max_dm_over_d: f64,
    pub max_dc_s_over_dm: f64,
    pub max_dc_over_d: f64,
    /// Pairs breaking `d <= d_m <= S d_c` or `d_c <= C d`.
    pub violations: Vec<(usize, usize)>,
    pub unreachable: usize,
    pub metric_convention: String,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.unreachable == 0 && self.samples > 0
    }
}

/// Samples `samples` pairs of distinct points in the margin-shrunk window and
/// compares `d`, `d_c` and `d_m` vertex to vertex.
pub fn equivalence_constants(
    rel: &NeighborRelation,
    r: f64,
    margin: f64,
    samples: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let ps = rel.pointset();
    let inner = ps.window().shrink(margin)?;
    let interior = ps.ids_in(&inner);
    if interior.len() < 2 {
        return Err(Error::invalid("fewer than two points in the margin-shrunk window"));
    }
    let g = CombinatorialGraph::new(rel);
    let m = MetricGraph::new(rel);
    let s = rel.parameter();
    let c = equivalence_constant(s, r, ps.dim());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = (0..samples)
        .map(|_| loop {
            let a = interior[rng.random_range(0..interior.len())];
            let b = interior[rng.random_range(0..interior.len())];
            if a != b {
                break (a, b);
            }
        })
        .collect();

    let rows: Vec<(usize, usize, f64, Option<usize>, f64)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let d = ps.distance(a, b);
            let dc = g.dc(a, b);
            let dm = m.dm(GraphPoint::Vertex(a), GraphPoint::Vertex(b)).unwrap_or(f64::INFINITY);
            (a, b, d, dc, dm)
        })
        .collect();

    let tol = 1e-9;
    let mut report = EquivalenceReport {
        samples,
        seed,
        parameter: s,
        r,
        constant_c: c,
        min_dm_over_d: f64::INFINITY,
        max_dm_over_d: 0.0,
        max_dc_s_over_dm: 0.0,
        max_dc_over_d: 0.0,
        violations: Vec::new(),
        unreachable: 0,
        metric_convention: "intrinsic: d_c on the combinatorial graph, d_m on the metric graph".into(),
    };
    for (a, b, d, dc, dm) in rows {
        let Some(dc) = dc else {
            report.unreachable += 1;
            continue;
        };
        let dc = dc as f64;
        report.min_dm_over_d = report.min_dm_over_d.min(dm / d);
        report.max_dm_over_d = report.max_dm_over_d.max(dm / d);
        report.max_dc_s_over_dm = report.max_dc_s_over_dm.max(dc * s / dm);
        report.max_dc_over_d = report.max_dc_over_d.max(dc / d);
        let ok = d <= dm * (1.0 + tol) && dm <= s * dc * (1.0 + tol) && dc <= c * d * (1.0 + tol);
        if !ok {
            report.violations.push((a, b));
        }
    }
    Ok(report)
}
