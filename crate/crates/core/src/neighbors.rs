//! Neighbor relations on Delone sets and their axioms.
//!
//! A relation with parameter `S` must be symmetric (N0), only join points at
//! distance at most `S` (N1), and connect any two points `x`, `y` by a chain
//! of neighbors staying inside the tube `[x, y] + B_S` (N2).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointset::{unit_ball_volume, PointSet};
use crate::tiling::{cell_contacts, facet_adjacency, TilingSystem};

/// Tolerance for distance comparisons against `S`.
const DIST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Voronoi,
    Canonical,
    Max,
    Ingested,
}

/// Symmetric set of pairs over a point set, diagonal implied.
#[derive(Debug, Clone)]
pub struct NeighborRelation {
    pointset: PointSet,
    pairs: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    s: f64,
    kind: RelationKind,
}

impl NeighborRelation {
    fn from_pairs(pointset: &PointSet, mut pairs: Vec<(usize, usize)>, s: f64, kind: RelationKind) -> Self {
        for p in pairs.iter_mut() {
            if p.0 > p.1 {
                *p = (p.1, p.0);
            }
        }
        pairs.retain(|p| p.0 != p.1);
        pairs.sort_unstable();
        pairs.dedup();
        let mut adjacency = vec![Vec::new(); pointset.len()];
        for &(a, b) in &pairs {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in adjacency.iter_mut() {
            list.sort_unstable();
        }
        Self { pointset: pointset.clone(), pairs, adjacency, s, kind }
    }

    pub fn pointset(&self) -> &PointSet {
        &self.pointset
    }

    /// Pairs `(a, b)` with `a < b`, sorted.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.adjacency[id]
    }

    pub fn degree(&self, id: usize) -> usize {
        self.adjacency[id].len()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        a == b || self.adjacency[a].binary_search(&b).is_ok()
    }

    /// The parameter `S`.
    pub fn parameter(&self) -> f64 {
        self.s
    }

    pub fn kind(&self) -> RelationKind {
        self.kind
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Same pairs, larger parameter.
    pub fn with_parameter(&self, s: f64) -> Result<Self> {
        if s < self.s {
            return Err(Error::invalid(format!("parameter can only grow: {s} < {}", self.s)));
        }
        let mut out = self.clone();
        out.s = s;
        Ok(out)
    }

    fn max_pair_distance(&self) -> f64 {
        self.pairs
            .iter()
            .map(|&(a, b)| self.pointset.distance(a, b))
            .fold(0.0, f64::max)
    }
}

/// Pairs whose Voronoi cells share an edge longer than `eps_len`.
pub fn build_voronoi_relation(ts: &TilingSystem, eps_len: f64) -> NeighborRelation {
    let pairs = facet_adjacency(ts, eps_len).into_iter().map(|e| (e.id_a, e.id_b)).collect();
    let mut rel = NeighborRelation::from_pairs(ts.pointset(), pairs, 0.0, RelationKind::Voronoi);
    rel.s = rel.max_pair_distance();
    rel
}

/// All pairs with `0 < |x - y| <= 2R`; parameter `2R`.
pub fn build_max_relation(ps: &PointSet, big_r: f64) -> NeighborRelation {
    let reach = 2.0 * big_r;
    let cutoff = reach * (1.0 + DIST_TOL);
    let idx = ps.index();
    let pairs: Vec<(usize, usize)> = (0..ps.len())
        .into_par_iter()
        .flat_map_iter(|a| {
            idx.within(ps.point(a), cutoff)
                .into_iter()
                .filter(move |&b| b > a)
                .map(move |b| (a, b))
                .collect::<Vec<_>>()
        })
        .collect();
    NeighborRelation::from_pairs(ps, pairs, reach, RelationKind::Max)
}

/// Pairs whose cells intersect, corner contacts included.
pub fn build_canonical_relation(ts: &TilingSystem) -> NeighborRelation {
    let tol = 1e-9 * ts.params().big_r.max(1.0);
    let pairs = cell_contacts(ts, tol);
    let mut rel = NeighborRelation::from_pairs(ts.pointset(), pairs, 0.0, RelationKind::Canonical);
    rel.s = rel.max_pair_distance();
    rel
}

/// Relation from an external edge list (for instance the 1-skeleton of a
/// polytopal complex). Pairs are symmetrized; any pair longer than `s` is
/// rejected.
pub fn ingest_relation(ps: &PointSet, pairs: &[(usize, usize)], s: f64) -> Result<NeighborRelation> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("parameter S must be positive, got {s}")));
    }
    for &(a, b) in pairs {
        if a >= ps.len() || b >= ps.len() {
            return Err(Error::invalid(format!("pair ({a}, {b}) references a missing id")));
        }
        let d = ps.distance(a, b);
        if d > s * (1.0 + DIST_TOL) {
            return Err(Error::invalid(format!(
                "pair ({a}, {b}) has length {d} > S = {s}, violating (N1)"
            )));
        }
    }
    Ok(NeighborRelation::from_pairs(ps, pairs.to_vec(), s, RelationKind::Ingested))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub passed: bool,
    pub checked: usize,
    pub counterexamples: Vec<(usize, usize)>,
}

/// Result of [`validate_axioms`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomReport {
    pub parameter: f64,
    pub margin: f64,
    pub seed: u64,
    pub n2_samples: usize,
    pub empty_relation: bool,
    pub n0: AxiomCheck,
    pub n1: AxiomCheck,
    pub n2: AxiomCheck,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.n0.passed && self.n1.passed && self.n2.passed
    }
}

/// Distance from `p` to the segment `[a, b]` in any dimension.
pub fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let ap: Vec<f64> = a.iter().zip(p).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (ab.iter().zip(&ap).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    ab.iter()
        .zip(&ap)
        .map(|(u, v)| (v - t * u).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Breadth-first search from `x` to `y` through vertices inside
/// `[x, y] + B_S`.
pub fn tube_connected(rel: &NeighborRelation, x: usize, y: usize) -> bool {
    let ps = rel.pointset();
    let (px, py) = (ps.point(x), ps.point(y));
    let reach = rel.s + DIST_TOL;
    let mut seen = vec![false; ps.len()];
    let mut queue = std::collections::VecDeque::from([x]);
    seen[x] = true;
    while let Some(u) = queue.pop_front() {
        if u == y {
            return true;
        }
        for &v in rel.neighbors(u) {
            if !seen[v] && segment_distance(ps.point(v), px, py) <= reach {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

/// Checks (N0) and (N1) on every pair and (N2) on `n2_samples` random pairs
/// of points in the margin-shrunk window.
pub fn validate_axioms(rel: &NeighborRelation, margin: f64, n2_samples: usize, seed: u64) -> Result<AxiomReport> {
    let ps = rel.pointset();
    let inner = ps.window().shrink(margin)?;
    let interior = ps.ids_in(&inner);
    if interior.is_empty() {
        return Err(Error::invalid("margin-shrunk window contains no points"));
    }

    let n0_bad: Vec<(usize, usize)> = rel
        .pairs
        .iter()
        .filter(|&&(a, b)| a == b || !rel.adjacency[b].contains(&a) || !rel.adjacency[a].contains(&b))
        .copied()
        .collect();
    let n1_bad: Vec<(usize, usize)> = rel
        .pairs
        .iter()
        .filter(|&&(a, b)| ps.distance(a, b) > rel.s * (1.0 + DIST_TOL))
        .copied()
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(usize, usize)> = if interior.len() < 2 {
        Vec::new()
    } else {
        (0..n2_samples)
            .map(|_| loop {
                let a = interior[rng.random_range(0..interior.len())];
                let b = interior[rng.random_range(0..interior.len())];
                if a != b {
                    break (a, b);
                }
            })
            .collect()
    };
    let n2_bad: Vec<(usize, usize)> = samples
        .par_iter()
        .filter(|&&(a, b)| !tube_connected(rel, a, b))
        .copied()
        .collect();

    Ok(AxiomReport {
        parameter: rel.s,
        margin,
        seed,
        n2_samples,
        empty_relation: rel.is_empty(),
        n0: AxiomCheck { passed: n0_bad.is_empty(), checked: rel.pairs.len(), counterexamples: n0_bad },
        n1: AxiomCheck { passed: n1_bad.is_empty(), checked: rel.pairs.len(), counterexamples: n1_bad },
        n2: AxiomCheck {
            passed: n2_bad.is_empty() && !samples.is_empty(),
            checked: samples.len(),
            counterexamples: n2_bad,
        },
    })
}

/// Interior degree statistics and the packing bound `((S + r) / r)^N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeStats {
    pub min: usize,
    pub max: usize,
    pub histogram: BTreeMap<usize, usize>,
    pub bound: f64,
    /// Shortest and longest pair with an interior endpoint.
    pub min_pair_distance: f64,
    pub max_pair_distance: f64,
    pub r: f64,
    pub parameter: f64,
}

impl DegreeStats {
    pub fn within_bound(&self) -> bool {
        (self.max as f64) <= self.bound
    }

    /// `2r <= |x - y| <= S` on every inspected pair.
    pub fn lengths_within(&self) -> bool {
        self.min_pair_distance >= 2.0 * self.r * (1.0 - DIST_TOL)
            && self.max_pair_distance <= self.parameter * (1.0 + DIST_TOL)
    }
}

/// Packing bound on the number of points in `x + B_S`: `|B_{S+r}| / |B_r|`.
pub fn degree_bound(s: f64, r: f64, dim: usize) -> f64 {
    ((s + r) / r).powi(dim as i32)
}

pub fn degree_stats(rel: &NeighborRelation, r: f64, margin: f64) -> Result<DegreeStats> {
    let ps = rel.pointset();
    let inner = ps.window().shrink(margin)?;
    let interior = ps.ids_in(&inner);
    if interior.is_empty() {
        return Err(Error::invalid("margin-shrunk window contains no points"));
    }
    let mut histogram = BTreeMap::new();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &a in &interior {
        *histogram.entry(rel.degree(a)).or_insert(0) += 1;
        for &b in rel.neighbors(a) {
            let d = ps.distance(a, b);
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    let degrees = interior.iter().map(|&a| rel.degree(a));
    Ok(DegreeStats {
        min: degrees.clone().min().unwrap_or(0),
        max: degrees.max().unwrap_or(0),
        histogram,
        bound: degree_bound(rel.s, r, ps.dim()),
        min_pair_distance: lo,
        max_pair_distance: hi,
        r,
        parameter: rel.s,
    })
}

/// Analytic constant `C` with `d_c <= C d`:
/// `(sigma + |B_{S+r}| / (2r)) / |U_r|`, where `sigma` is the volume of the
/// `(S + r)`-ball in dimension `N - 1`.
pub fn equivalence_constant(s: f64, r: f64, dim: usize) -> f64 {
    let rho = s + r;
    let sigma = unit_ball_volume(dim - 1) * rho.powi(dim as i32 - 1);
    let big_ball = unit_ball_volume(dim) * rho.powi(dim as i32);
    let small_ball = unit_ball_volume(dim) * r.powi(dim as i32);
    (sigma + big_ball / (2.0 * r)) / small_ball
}
