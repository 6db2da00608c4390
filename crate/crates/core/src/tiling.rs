//! Planar Voronoi tiling systems.
//!
//! Each cell `V_x` is the intersection of the half-planes
//! `{p : |p - x| <= |p - y|}` over the points `y` with `0 < |x - y| <= 2R`,
//! computed by clipping a bounding square one half-plane at a time. Every
//! polygon edge remembers which neighbor produced it, so the shared facet of
//! two cells is read off directly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointset::{DeloneParams, PointSet, Window};

/// Merge tolerance for polygon vertices, relative to the cell scale.
const MERGE_TOL: f64 = 1e-12;

/// Default facet length threshold, relative to the spacing scale.
pub const DEFAULT_EPS_LEN: f64 = 1e-9;

/// Which line produced a polygon edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeSource {
    /// Bisector with the point of this id.
    Neighbor(usize),
    /// Side of the initial bounding box.
    Bound,
}

/// Convex polygon with counterclockwise vertices. Edge `i` joins vertex `i`
/// to vertex `i + 1` and came from `sources[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<[f64; 2]>,
    pub sources: Vec<EdgeSource>,
}

impl ConvexPolygon {
    /// Axis-aligned square `center + [-h, h]^2`.
    pub fn square(center: [f64; 2], h: f64) -> Self {
        let [cx, cy] = center;
        Self {
            vertices: vec![[cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]],
            sources: vec![EdgeSource::Bound; 4],
        }
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut s = 0.0;
        for i in 0..n {
            let [x0, y0] = self.vertices[i];
            let [x1, y1] = self.vertices[(i + 1) % n];
            s += x0 * y1 - x1 * y0;
        }
        0.5 * s
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Keep the part with `normal . p <= offset`; the new edge is labeled
    /// `source`.
    pub fn clip(&self, normal: [f64; 2], offset: f64, source: EdgeSource, tol: f64) -> Self {
        let n = self.vertices.len();
        let side = |p: &[f64; 2]| normal[0] * p[0] + normal[1] * p[1] - offset;
        let mut vertices = Vec::with_capacity(n + 1);
        let mut sources = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let (sa, sb) = (side(&a), side(&b));
            let a_in = sa <= 0.0;
            let b_in = sb <= 0.0;
            if a_in {
                vertices.push(a);
                if b_in {
                    sources.push(self.sources[i]);
                } else {
                    // Leaving: the edge piece a -> x keeps its source, x starts the new edge.
                    let t = sa / (sa - sb);
                    sources.push(self.sources[i]);
                    vertices.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    sources.push(source);
                }
            } else if b_in {
                let t = sa / (sa - sb);
                vertices.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                sources.push(self.sources[i]);
            }
        }
        let mut poly = Self { vertices, sources };
        poly.merge_close(tol);
        poly
    }

    fn merge_close(&mut self, tol: f64) {
        let mut i = 0;
        while self.vertices.len() > 1 && i < self.vertices.len() {
            let n = self.vertices.len();
            let j = (i + 1) % n;
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a[0] - b[0]).hypot(a[1] - b[1]) <= tol {
                // Drop vertex j; the edge leaving j now leaves i.
                self.sources[i] = self.sources[j];
                self.vertices.remove(j);
                self.sources.remove(j);
                if j < i {
                    i = i.saturating_sub(1);
                }
            } else {
                i += 1;
            }
        }
    }

    /// Distance from `p` to the closed polygon (0 inside).
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let n = self.vertices.len();
        let mut inside = true;
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            if cross < 0.0 {
                inside = false;
            }
            best = best.min(segment_distance(p, a, b));
        }
        if inside {
            0.0
        } else {
            best
        }
    }

    /// Total length of the edges produced by `source`.
    pub fn edge_length(&self, source: EdgeSource) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .filter(|&i| self.sources[i] == source)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .sum()
    }
}

pub(crate) fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

/// Voronoi cell of `x` against `neighbors` (id, position), clipped from the
/// square of half-width `bound` around `x`. Half-planes are applied in the
/// given order.
pub fn voronoi_cell(x: [f64; 2], neighbors: &[(usize, [f64; 2])], bound: f64) -> ConvexPolygon {
    let tol = MERGE_TOL * bound;
    let mut poly = ConvexPolygon::square(x, bound);
    for &(id, y) in neighbors {
        let normal = [y[0] - x[0], y[1] - x[1]];
        let mid = [(x[0] + y[0]) / 2.0, (x[1] + y[1]) / 2.0];
        let offset = normal[0] * mid[0] + normal[1] * mid[1];
        poly = poly.clip(normal, offset, EdgeSource::Neighbor(id), tol);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// Cells for every point of a planar set. Cells of points in the
/// margin-shrunk window are exact ("interior"); the others only see the
/// truncated set and serve to complete the relations near the boundary.
#[derive(Debug, Clone)]
pub struct TilingSystem {
    pointset: PointSet,
    params: DeloneParams,
    margin: f64,
    interior_window: Window,
    cells: Vec<ConvexPolygon>,
    interior: Vec<bool>,
}

/// Query radius for cell construction: `2R` plus the probe resolution.
fn local_radius(params: &DeloneParams) -> f64 {
    2.0 * (params.big_r + params.resolution) * (1.0 + 1e-9)
}

pub fn voronoi_cells_2d(ps: &PointSet, params: &DeloneParams, margin: f64) -> Result<TilingSystem> {
    if ps.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "exact Voronoi cells are planar only, point set has dimension {}",
            ps.dim()
        )));
    }
    let radius = local_radius(params);
    if margin < 2.0 * params.big_r {
        return Err(Error::invalid(format!(
            "margin {margin} < 2R = {}: interior cells would not be locally determined",
            2.0 * params.big_r
        )));
    }
    let interior_window = ps.window().shrink(margin)?;
    let idx = ps.index();
    let cells: Vec<ConvexPolygon> = (0..ps.len())
        .into_par_iter()
        .map(|a| {
            let x = [ps.point(a)[0], ps.point(a)[1]];
            let nbrs: Vec<(usize, [f64; 2])> = idx
                .within(&x, radius)
                .into_iter()
                .filter(|&b| b != a)
                .map(|b| (b, [ps.point(b)[0], ps.point(b)[1]]))
                .collect();
            voronoi_cell(x, &nbrs, radius)
        })
        .collect();
    let interior = (0..ps.len()).map(|a| interior_window.contains(ps.point(a))).collect();
    let ts = TilingSystem {
        pointset: ps.clone(),
        params: *params,
        margin,
        interior_window,
        cells,
        interior,
    };
    for a in ts.interior_ids() {
        if ts.cells[a].is_empty() || ts.cells[a].sources.contains(&EdgeSource::Bound) {
            return Err(Error::numerical(format!(
                "cell of interior point {a} is not bounded by its 2R-neighbors; R underestimated?"
            )));
        }
    }
    Ok(ts)
}

impl TilingSystem {
    pub fn pointset(&self) -> &PointSet {
        &self.pointset
    }

    pub fn params(&self) -> &DeloneParams {
        &self.params
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn interior_window(&self) -> &Window {
        &self.interior_window
    }

    pub fn cell(&self, id: usize) -> &ConvexPolygon {
        &self.cells[id]
    }

    pub fn is_interior(&self, id: usize) -> bool {
        self.interior[id]
    }

    pub fn interior_ids(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| self.interior[i]).collect()
    }

    pub(crate) fn candidates(&self, a: usize) -> Vec<usize> {
        self.pointset
            .index()
            .within(self.pointset.point(a), local_radius(&self.params))
            .into_iter()
            .filter(|&b| b != a)
            .collect()
    }

    /// Area of an interior cell.
    pub fn cell_volume(&self, id: usize) -> Result<f64> {
        if id >= self.cells.len() {
            return Err(Error::invalid(format!("no point with id {id}")));
        }
        if !self.interior[id] {
            return Err(Error::invalid(format!(
                "cell {id} lies outside the margin-shrunk window; its area is not determined"
            )));
        }
        Ok(self.cells[id].area())
    }

    /// Length of the common edge of `V_a` and `V_b`, the smaller of the
    /// values seen from either side.
    pub fn shared_length(&self, a: usize, b: usize) -> f64 {
        let la = self.cells[a].edge_length(EdgeSource::Neighbor(b));
        let lb = self.cells[b].edge_length(EdgeSource::Neighbor(a));
        la.min(lb)
    }

    /// Checks `B(x, r) ⊆ V_x ⊆ B(x, R)` on interior cells, with `R` widened
    /// by the probe resolution. Returns the offending ids.
    pub fn ball_containment_violations(&self) -> Vec<usize> {
        let tol = 1e-9 * self.params.big_r;
        self.interior_ids()
            .into_iter()
            .filter(|&a| {
                let x = [self.pointset.point(a)[0], self.pointset.point(a)[1]];
                let cell = &self.cells[a];
                let n = cell.vertices.len();
                let outer = cell.vertices.iter().any(|v| {
                    (v[0] - x[0]).hypot(v[1] - x[1]) > self.params.big_r + self.params.resolution + tol
                });
                let inner = (0..n).any(|i| {
                    let (p, q) = (cell.vertices[i], cell.vertices[(i + 1) % n]);
                    line_distance(x, p, q) < self.params.r - tol
                });
                outer || inner
            })
            .collect()
    }
}

fn line_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    ((p[0] - a[0]) * dy - (p[1] - a[1]) * dx).abs() / dx.hypot(dy)
}

/// Facet adjacency record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adjacency {
    pub id_a: usize,
    pub id_b: usize,
    pub shared_length: f64,
}

/// Pairs `a < b` whose cells share an edge longer than `eps_len`. Pairs
/// with at least one interior endpoint are exact; pairs of two boundary
/// cells reflect the truncated set.
pub fn facet_adjacency(ts: &TilingSystem, eps_len: f64) -> Vec<Adjacency> {
    let mut out: Vec<Adjacency> = (0..ts.cells.len())
        .into_par_iter()
        .flat_map_iter(|a| {
            ts.candidates(a)
                .into_iter()
                .filter(move |&b| b > a)
                .filter_map(move |b| {
                    let len = if ts.interior[a] && !ts.interior[b] {
                        ts.cells[a].edge_length(EdgeSource::Neighbor(b))
                    } else if ts.interior[b] && !ts.interior[a] {
                        ts.cells[b].edge_length(EdgeSource::Neighbor(a))
                    } else {
                        ts.shared_length(a, b)
                    };
                    (len > eps_len).then_some(Adjacency { id_a: a, id_b: b, shared_length: len })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    out.sort_by_key(|e| (e.id_a, e.id_b));
    out
}

/// Pairs `a < b` whose cells intersect, corners included (within `tol`).
pub fn cell_contacts(ts: &TilingSystem, tol: f64) -> Vec<(usize, usize)> {
    let touches = |a: usize, b: usize| {
        ts.cells[a].vertices.iter().any(|v| ts.cells[b].distance_to(*v) <= tol)
            || ts.cells[b].vertices.iter().any(|v| ts.cells[a].distance_to(*v) <= tol)
    };
    let mut out: Vec<(usize, usize)> = (0..ts.cells.len())
        .into_par_iter()
        .flat_map_iter(|a| {
            ts.candidates(a)
                .into_iter()
                .filter(move |&b| b > a)
                .filter(move |&b| touches(a, b))
                .map(move |b| (a, b))
                .collect::<Vec<_>>()
        })
        .collect();
    out.sort_unstable();
    out
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::pointset::{generate_jittered_lattice, LatticeKind};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn probes_lie_in_the_cell_of_their_nearest_point(
            seed in 0u64..10_000,
            probes in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 20),
        ) {
            let w = Window::new(vec![0.0, 0.0], 6.0).unwrap();
            let ps = generate_jittered_lattice(LatticeKind::Square, 1.0, &w, 0.25, seed).unwrap();
            let base = LatticeKind::Square.delone_params(1.0, 2);
            let params = DeloneParams::new(base.r - 0.25, base.big_r + 0.25).unwrap();
            let ts = voronoi_cells_2d(&ps, &params, 2.0).unwrap();
            for (x, y) in probes {
                let a = ps.nearest_id(&[x, y]);
                prop_assert!(ts.is_interior(a));
                prop_assert!(ts.cell(a).distance_to([x, y]) < 1e-9);
            }
        }
    }
}
