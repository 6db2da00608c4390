//! Kirchhoff Laplacian of a metric graph by conforming P1 finite elements.
//!
//! Vertex nodes are shared by all incident edges, so continuity holds by
//! construction and the Kirchhoff current condition is the natural one. The
//! kernel is taken against the mass matrix:
//! `p_t(x_i, x_j) = [e^{-t M^{-1} K} M^{-1}]_{ij}`, so that
//! `sum_j p_t(x_i, x_j) (M 1)_j = 1`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{GraphPoint, MetricGraph};
use crate::heat_discrete::Boundary;
use crate::linalg::{conjugate_gradient, dot, generalized_eigen, shift_invert_expmv, CsrMatrix};
use crate::pointset::Window;

/// Largest number of free nodes for the dense generalized eigensolver.
pub const DENSE_FEM_LIMIT: usize = 4000;
/// Crossover from spectral to Krylov for [`MetricMethod::Auto`].
pub const AUTO_SPECTRAL_LIMIT: usize = 1000;
const SNAP_TOL: f64 = 1e-12;
const KRYLOV_MAX_ITER: usize = 800;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshNode {
    pub point: GraphPoint,
    pub position: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    pub edge: usize,
}

/// Nodes and 1-D elements over (parts of) metric edges.
#[derive(Debug, Clone)]
pub struct GraphMesh {
    nodes: Vec<MeshNode>,
    elements: Vec<Element>,
    /// Nodes held at zero.
    dirichlet: Vec<usize>,
    lookup: HashMap<NodeKey, usize>,
    dmax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum NodeKey {
    Vertex(usize),
    Edge(usize, u64),
}

struct Piece {
    edge: usize,
    t0: f64,
    t1: f64,
}

impl GraphMesh {
    fn from_pieces(graph: &MetricGraph, pieces: &[Piece], dmax: f64) -> Result<Self> {
        if !(dmax > 0.0 && dmax.is_finite()) {
            return Err(Error::invalid(format!("mesh spacing must be positive, got {dmax}")));
        }
        let mut mesh = GraphMesh {
            nodes: Vec::new(),
            elements: Vec::new(),
            dirichlet: Vec::new(),
            lookup: HashMap::new(),
            dmax,
        };
        for p in pieces {
            let len = p.t1 - p.t0;
            let count = (len / dmax).ceil().max(1.0) as usize;
            let mut prev = mesh.node(graph, p.edge, p.t0);
            for k in 1..=count {
                let t = if k == count { p.t1 } else { p.t0 + len * k as f64 / count as f64 };
                let next = mesh.node(graph, p.edge, t);
                mesh.elements.push(Element { a: prev, b: next, length: len / count as f64, edge: p.edge });
                prev = next;
            }
        }
        Ok(mesh)
    }

    fn node(&mut self, graph: &MetricGraph, edge: usize, t: f64) -> usize {
        let ed = graph.edge(edge);
        let (key, point) = if t <= SNAP_TOL {
            (NodeKey::Vertex(ed.a), GraphPoint::Vertex(ed.a))
        } else if t >= ed.length - SNAP_TOL {
            (NodeKey::Vertex(ed.b), GraphPoint::Vertex(ed.b))
        } else {
            (NodeKey::Edge(edge, t.to_bits()), GraphPoint::OnEdge { edge, offset: t })
        };
        if let Some(&i) = self.lookup.get(&key) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(MeshNode { point, position: graph.position(point) });
        self.lookup.insert(key, i);
        i
    }

    pub fn nodes(&self) -> &[MeshNode] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn dmax(&self) -> f64 {
        self.dmax
    }

    pub fn total_length(&self) -> f64 {
        self.elements.iter().map(|e| e.length).sum()
    }

    /// Mesh node at a graph vertex.
    pub fn vertex_node(&self, v: usize) -> Option<usize> {
        self.lookup.get(&NodeKey::Vertex(v)).copied()
    }

    /// `(node_id, edge_id, offset, coords)`; vertex nodes are addressed on
    /// the first element's edge that touches them.
    pub fn node_rows(&self, graph: &MetricGraph) -> Vec<(usize, usize, f64, Vec<f64>)> {
        let mut host: Vec<Option<usize>> = vec![None; self.nodes.len()];
        for el in &self.elements {
            for n in [el.a, el.b] {
                host[n].get_or_insert(el.edge);
            }
        }
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                let (edge, offset) = match node.point {
                    GraphPoint::OnEdge { edge, offset } => (edge, offset),
                    GraphPoint::Vertex(v) => {
                        let e = host[i].unwrap_or(0);
                        let ed = graph.edge(e);
                        (e, if ed.a == v { 0.0 } else { ed.length })
                    }
                };
                (i, edge, offset, node.position.clone())
            })
            .collect()
    }
}

/// Every edge split into `ceil(l / dmax)` equal elements.
pub fn mesh(graph: &MetricGraph, dmax: f64) -> Result<GraphMesh> {
    let pieces: Vec<Piece> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, ed)| Piece { edge: e, t0: 0.0, t1: ed.length })
        .collect();
    GraphMesh::from_pieces(graph, &pieces, dmax)
}

/// Mesh of the edges inside `window`. Neumann keeps edges with both ends
/// inside; Dirichlet also keeps edges leaving the window and pins their
/// outer ends to zero.
pub fn mesh_window(graph: &MetricGraph, window: &Window, dmax: f64, boundary: Boundary) -> Result<GraphMesh> {
    let ps = graph.pointset();
    let inside: Vec<bool> = (0..ps.len()).map(|v| window.contains(ps.point(v))).collect();
    let mut outer = Vec::new();
    let pieces: Vec<Piece> = graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, ed)| match (inside[ed.a], inside[ed.b]) {
            (true, true) => true,
            (true, false) | (false, true) if boundary == Boundary::Dirichlet => {
                outer.push(if inside[ed.a] { ed.b } else { ed.a });
                true
            }
            _ => false,
        })
        .map(|(e, ed)| Piece { edge: e, t0: 0.0, t1: ed.length })
        .collect();
    if pieces.is_empty() {
        return Err(Error::invalid("window contains no edges"));
    }
    let mut m = GraphMesh::from_pieces(graph, &pieces, dmax)?;
    outer.sort_unstable();
    outer.dedup();
    m.dirichlet = outer.iter().filter_map(|&v| m.vertex_node(v)).collect();
    Ok(m)
}

/// Mesh of the closed ball `{q : d_m(center, q) <= s}` with free ends where
/// the ball cuts an edge.
pub fn mesh_ball(graph: &MetricGraph, center: GraphPoint, s: f64, dmax: f64) -> Result<GraphMesh> {
    let center = graph.canonical(center)?;
    let dist = graph.distances_from(center, s)?;
    let mut pieces = Vec::new();
    for (e, ed) in graph.edges().iter().enumerate() {
        let mut iv: Vec<(f64, f64)> = Vec::new();
        if dist[ed.a] < s {
            iv.push((0.0, (s - dist[ed.a]).min(ed.length)));
        }
        if dist[ed.b] < s {
            iv.push(((ed.length - (s - dist[ed.b])).max(0.0), ed.length));
        }
        if let GraphPoint::OnEdge { edge, offset } = center {
            if edge == e {
                iv.push(((offset - s).max(0.0), (offset + s).min(ed.length)));
            }
        }
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in iv {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + SNAP_TOL => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        for (t0, t1) in merged {
            if t1 - t0 > SNAP_TOL {
                pieces.push(Piece { edge: e, t0, t1 });
            }
        }
    }
    if pieces.is_empty() {
        return Err(Error::invalid("ball contains no edge segment"));
    }
    GraphMesh::from_pieces(graph, &pieces, dmax)
}

/// Stiffness and mass matrices over the free (non-Dirichlet) nodes.
#[derive(Debug, Clone)]
pub struct FemPair {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    /// Mesh node of each degree of freedom.
    pub dofs: Vec<usize>,
    /// Per-element density multiplying the length measure; `None` = 1.
    pub density: Option<Vec<f64>>,
    node_dof: Vec<Option<usize>>,
}

impl FemPair {
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Degree of freedom of a mesh node.
    pub fn dof(&self, node: usize) -> Option<usize> {
        self.node_dof.get(node).copied().flatten()
    }

    /// `M 1`.
    pub fn mass_weights(&self) -> Vec<f64> {
        self.m.matvec(&vec![1.0; self.len()])
    }
}

pub fn assemble_fem(mesh: &GraphMesh, density: Option<&[f64]>) -> Result<FemPair> {
    if let Some(d) = density {
        if d.len() != mesh.elements.len() {
            return Err(Error::invalid("density must have one value per element"));
        }
        if d.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("density must be positive and finite"));
        }
    }
    let mut pinned = vec![false; mesh.nodes.len()];
    for &n in &mesh.dirichlet {
        pinned[n] = true;
    }
    let dofs: Vec<usize> = (0..mesh.nodes.len()).filter(|&n| !pinned[n]).collect();
    let mut map = vec![usize::MAX; mesh.nodes.len()];
    for (i, &n) in dofs.iter().enumerate() {
        map[n] = i;
    }
    let mut kt = Vec::with_capacity(4 * mesh.elements.len());
    let mut mt = Vec::with_capacity(4 * mesh.elements.len());
    for (e, el) in mesh.elements.iter().enumerate() {
        let rho = density.map_or(1.0, |d| d[e]);
        let (ka, kb) = (1.0 / el.length, -1.0 / el.length);
        let (ma, mb) = (rho * el.length / 3.0, rho * el.length / 6.0);
        let (i, j) = (map[el.a], map[el.b]);
        let li = i != usize::MAX;
        let lj = j != usize::MAX;
        if li {
            kt.push((i, i, ka));
            mt.push((i, i, ma));
        }
        if lj {
            kt.push((j, j, ka));
            mt.push((j, j, ma));
        }
        if li && lj {
            kt.extend([(i, j, kb), (j, i, kb)]);
            mt.extend([(i, j, mb), (j, i, mb)]);
        }
    }
    let n = dofs.len();
    Ok(FemPair {
        k: CsrMatrix::from_triplets(n, n, &kt),
        m: CsrMatrix::from_triplets(n, n, &mt),
        dofs,
        density: density.map(<[f64]>::to_vec),
        node_dof: map.iter().map(|&i| (i != usize::MAX).then_some(i)).collect(),
    })
}

/// Generalized eigenpairs, ascending, `M`-orthonormal columns.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// First `k` eigenpairs of `K v = λ M v` (dense solver).
pub fn eigenpairs(fem: &FemPair, k: usize) -> Result<Eigenpairs> {
    let n = fem.len();
    if k > n {
        return Err(Error::invalid(format!("requested {k} eigenpairs of a {n}-node problem")));
    }
    if n > DENSE_FEM_LIMIT {
        return Err(Error::invalid(format!(
            "dense generalized eigensolver limited to {DENSE_FEM_LIMIT} nodes, problem has {n}"
        )));
    }
    let (values, vectors) = generalized_eigen(&fem.k.to_dense(), &fem.m.to_dense())?;
    Ok(Eigenpairs { values: values[..k].to_vec(), vectors: vectors.columns(0, k).into_owned() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMethod {
    Spectral,
    Krylov,
    /// Spectral up to [`AUTO_SPECTRAL_LIMIT`] nodes, Krylov beyond.
    Auto,
}

/// Metric heat kernel values from one mesh node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricKernelSamples {
    pub source: usize,
    pub targets: Vec<usize>,
    pub times: Vec<f64>,
    /// `values[k][j] = p_{times[k]}(source, targets[j])`.
    pub values: Vec<Vec<f64>>,
    pub method: MetricMethod,
    /// Spectral tail bound or Krylov error estimate.
    pub error_bound: f64,
    /// Modes kept by the spectral expansion, per time.
    pub modes: Vec<usize>,
    /// Negative values found at `t >= dmax^2`.
    pub negative: usize,
}

/// `p_t(source, target)` for mesh nodes. Spectral truncation keeps the
/// fewest modes with tail bound `e^{-λ_K t} n` below `tol`.
pub fn metric_heat_kernel(
    mesh: &GraphMesh,
    fem: &FemPair,
    source: usize,
    targets: &[usize],
    times: &[f64],
    method: MetricMethod,
    tol: f64,
) -> Result<MetricKernelSamples> {
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::invalid(format!("times must be positive, got {t}")));
    }
    let dof = |n: usize| {
        fem.dof(n).ok_or_else(|| Error::invalid(format!("mesh node {n} is not a free node")))
    };
    let si = dof(source)?;
    let ti: Vec<usize> = targets.iter().map(|&n| dof(n)).collect::<Result<_>>()?;
    let method = match method {
        MetricMethod::Auto if fem.len() <= AUTO_SPECTRAL_LIMIT => MetricMethod::Spectral,
        MetricMethod::Auto => MetricMethod::Krylov,
        m => m,
    };
    let (values, error_bound, modes) = match method {
        MetricMethod::Spectral => {
            let eig = eigenpairs(fem, fem.len())?;
            spectral_kernel(&eig, si, &ti, times, tol, fem.len())?
        }
        _ => krylov_kernel(fem, si, &ti, times, tol)?,
    };
    let floor = mesh.dmax() * mesh.dmax();
    let negative = times
        .iter()
        .zip(&values)
        .filter(|(t, _)| **t >= floor)
        .map(|(_, row)| row.iter().filter(|p| **p < 0.0).count())
        .sum();
    Ok(MetricKernelSamples {
        source,
        targets: targets.to_vec(),
        times: times.to_vec(),
        values,
        method,
        error_bound,
        modes,
        negative,
    })
}

type KernelValues = (Vec<Vec<f64>>, f64, Vec<usize>);

/// Kernel from a (possibly partial) set of eigenpairs.
pub fn spectral_kernel(
    eig: &Eigenpairs,
    source: usize,
    targets: &[usize],
    times: &[f64],
    tol: f64,
    node_count: usize,
) -> Result<KernelValues> {
    let kmax = eig.values.len();
    let mut values = Vec::with_capacity(times.len());
    let mut modes = Vec::with_capacity(times.len());
    let mut worst: f64 = 0.0;
    for &t in times {
        let kept = eig.values.iter().position(|&l| (-l * t).exp() * node_count as f64 <= tol);
        let (kept, bound) = match kept {
            Some(k) => (k, (-eig.values[k] * t).exp() * node_count as f64),
            None if kmax == node_count => (kmax, 0.0),
            None => {
                let bound = (-eig.values[kmax - 1] * t).exp() * node_count as f64;
                return Err(Error::numerical(format!(
                    "{kmax} eigenpairs leave a tail bound {bound:.3e} > {tol:.3e} at t = {t}"
                )));
            }
        };
        worst = worst.max(bound);
        modes.push(kept);
        let row = targets
            .iter()
            .map(|&j| {
                (0..kept)
                    .map(|k| (-eig.values[k] * t).exp() * eig.vectors[(source, k)] * eig.vectors[(j, k)])
                    .sum()
            })
            .collect();
        values.push(row);
    }
    Ok((values, worst, modes))
}

fn krylov_kernel(fem: &FemPair, source: usize, targets: &[usize], times: &[f64], tol: f64) -> Result<KernelValues> {
    let n = fem.len();
    let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let gamma = (t_min * t_max).sqrt() / 10.0;
    // (I + gamma M^{-1} K)^{-1} v = (M + gamma K)^{-1} M v.
    let shifted: Vec<(usize, usize, f64)> = fem
        .m
        .triplets()
        .chain(fem.k.triplets().map(|(i, j, v)| (i, j, gamma * v)))
        .collect();
    let shifted = CsrMatrix::from_triplets(n, n, &shifted);
    let sdiag = shifted.diagonal();
    let mdiag = fem.m.diagonal();
    let cg_cap = 20 * n.max(100);
    let mut e = vec![0.0; n];
    e[source] = 1.0;
    let b = conjugate_gradient(|v| fem.m.matvec(v), &mdiag, &e, 1e-14, cg_cap)?;
    let res = shift_invert_expmv(
        |v| {
            let x = conjugate_gradient(|u| shifted.matvec(u), &sdiag, &fem.m.matvec(v), 1e-14, cg_cap)?;
            let mx = fem.m.matvec(&x);
            Ok((x, mx))
        },
        gamma,
        &b,
        &e,
        times,
        tol,
        KRYLOV_MAX_ITER,
    )?;
    let err = res.error_estimates.iter().copied().fold(0.0, f64::max);
    let values = res.values.iter().map(|col| targets.iter().map(|&j| col[j]).collect()).collect();
    Ok((values, err, vec![res.iterations; times.len()]))
}

/// `u^T K u`.
pub fn energy(fem: &FemPair, u: &[f64]) -> f64 {
    fem.k.quadratic_form(u)
}

/// `u^T M u`.
pub fn mass_norm2(fem: &FemPair, u: &[f64]) -> f64 {
    dot(u, &fem.m.matvec(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::{build_max_relation, ingest_relation};
    use crate::pointset::{generate_lattice, Generator, LatticeKind, Point, PointSet};
    use std::f64::consts::PI;

    fn segment(l: f64) -> MetricGraph {
        let ps = PointSet::from_points(
            vec![Point::new(vec![0.0, 0.0]).unwrap(), Point::new(vec![l, 0.0]).unwrap()],
            Window::new(vec![l / 2.0, 0.0], l).unwrap(),
            Generator::External { description: "segment".into() },
            None,
        )
        .unwrap();
        MetricGraph::new(&ingest_relation(&ps, &[(0, 1)], l).unwrap())
    }

    fn z2(hw: f64) -> MetricGraph {
        let ps = generate_lattice(LatticeKind::Square, 1.0, &Window::new(vec![0.0, 0.0], hw).unwrap()).unwrap();
        MetricGraph::new(&build_max_relation(&ps, 0.5))
    }

    #[test]
    fn single_edge_mesh_counts() {
        let g = segment(1.0);
        let m = mesh(&g, 0.25).unwrap();
        assert_eq!(m.elements().len(), 4);
        assert_eq!(m.nodes().len(), 5);
        let coarse = mesh(&g, 2.0).unwrap();
        assert_eq!(coarse.elements().len(), 1);
    }

    #[test]
    fn node_count_on_lattice() {
        let g = z2(3.0);
        let dmax = 0.3;
        let m = mesh(&g, dmax).unwrap();
        let interior: usize = g.edges().iter().map(|e| (e.length / dmax).ceil() as usize - 1).sum();
        assert_eq!(m.nodes().len(), g.vertex_count() + interior);
        assert!(m.elements().iter().all(|e| e.length <= dmax + 1e-15));
    }

    #[test]
    fn fem_identities() {
        let g = z2(2.0);
        let m = mesh(&g, 0.2).unwrap();
        let fem = assemble_fem(&m, None).unwrap();
        let ones = vec![1.0; fem.len()];
        assert!(fem.k.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
        assert!((mass_norm2(&fem, &ones) - g.total_length()).abs() < 1e-12);
    }

    #[test]
    fn linear_function_energy() {
        let l = 2.5;
        let g = segment(l);
        let m = mesh(&g, 0.1).unwrap();
        let fem = assemble_fem(&m, None).unwrap();
        let u: Vec<f64> = m.nodes().iter().map(|n| n.position[0] / l).collect();
        assert!((energy(&fem, &u) - 1.0 / l).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_converge_quadratically() {
        let g = segment(1.0);
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let fem = assemble_fem(&mesh(&g, h).unwrap(), None).unwrap();
                let e = eigenpairs(&fem, 2).unwrap();
                assert!(e.values[0].abs() < 1e-9);
                e.values[1] - PI * PI
            })
            .collect();
        let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let slope = crate::analysis::least_squares(&x, &y).0;
        assert!((1.8..=2.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn disconnected_graph_has_two_zero_modes() {
        let ps = PointSet::from_points(
            (0..4).map(|i| Point::new(vec![i as f64 * 2.0, 0.0]).unwrap()).collect(),
            Window::new(vec![3.0, 0.0], 4.0).unwrap(),
            Generator::External { description: "two segments".into() },
            None,
        )
        .unwrap();
        let g = MetricGraph::new(&ingest_relation(&ps, &[(0, 1), (2, 3)], 2.0).unwrap());
        let fem = assemble_fem(&mesh(&g, 0.25).unwrap(), None).unwrap();
        let e = eigenpairs(&fem, 3).unwrap();
        assert!(e.values[0].abs() < 1e-9 && e.values[1].abs() < 1e-9);
        assert!(e.values[2] > 1.0);
    }

    #[test]
    fn interval_kernel_oracle() {
        let g = segment(1.0);
        let m = mesh(&g, 0.01).unwrap();
        let fem = assemble_fem(&m, None).unwrap();
        let mid = m
            .nodes()
            .iter()
            .position(|n| (n.position[0] - 0.5).abs() < 1e-12)
            .unwrap();
        let t = 0.1;
        let exact: f64 = 1.0
            + 2.0 * (1..200).map(|k| (-(k as f64 * PI).powi(2) * t).exp() * (k as f64 * PI / 2.0).cos().powi(2)).sum::<f64>();
        let k = metric_heat_kernel(&m, &fem, mid, &[mid], &[t], MetricMethod::Spectral, 1e-12).unwrap();
        assert!((k.values[0][0] - exact).abs() / exact < 1e-3);
        let kk = metric_heat_kernel(&m, &fem, mid, &[mid], &[t], MetricMethod::Krylov, 1e-10).unwrap();
        let diff = (kk.values[0][0] - k.values[0][0]).abs();
        assert!(diff < 1e-8 * exact, "spectral/Krylov differ by {diff:e}");
    }

    #[test]
    fn kernel_conserves_mass_and_is_symmetric() {
        let g = z2(2.0);
        let m = mesh(&g, 0.25).unwrap();
        let fem = assemble_fem(&m, None).unwrap();
        let all: Vec<usize> = fem.dofs.clone();
        let w = fem.mass_weights();
        for method in [MetricMethod::Spectral, MetricMethod::Krylov] {
            let k = metric_heat_kernel(&m, &fem, 7, &all, &[0.2, 2.0], method, 1e-12).unwrap();
            for row in &k.values {
                let mass: f64 = row.iter().zip(&w).map(|(p, w)| p * w).sum();
                assert!((mass - 1.0).abs() < 1e-6, "{method:?}: {mass}");
            }
            let back = metric_heat_kernel(&m, &fem, 30, &[7], &[2.0], method, 1e-12).unwrap();
            assert!((back.values[0][0] - k.values[1][30]).abs() < 1e-10);
            // Consistent mass does not preserve positivity; tail values
            // may dip below zero and are counted, not clipped.
            let negative = k.values.iter().flatten().filter(|p| **p < 0.0).count();
            assert_eq!(k.negative, negative);
            assert!(k.values[1].iter().all(|p| *p > 0.0));
        }
    }

    #[test]
    fn partial_spectrum_reports_tail() {
        let g = segment(1.0);
        let m = mesh(&g, 0.05).unwrap();
        let fem = assemble_fem(&m, None).unwrap();
        let eig = eigenpairs(&fem, 3).unwrap();
        let err = spectral_kernel(&eig, 0, &[0], &[1e-3], 1e-8, fem.len()).unwrap_err();
        assert!(err.to_string().contains("tail bound"));
        assert!(spectral_kernel(&eig, 0, &[0], &[5.0], 1e-8, fem.len()).is_ok());
    }

    #[test]
    fn ball_mesh_has_ball_length() {
        let g = z2(5.0);
        let o = g.pointset().nearest_id(&[0.0, 0.0]);
        for s in [0.3, 1.0, 1.5, 2.0, 2.7] {
            let m = mesh_ball(&g, GraphPoint::Vertex(o), s, 0.1).unwrap();
            let mu = g.ball_measure(GraphPoint::Vertex(o), s).unwrap().measure;
            assert!((m.total_length() - mu).abs() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn dirichlet_window_pins_outer_vertices() {
        let g = z2(4.0);
        let w = Window::new(vec![0.0, 0.0], 2.0).unwrap();
        let neu = mesh_window(&g, &w, 0.5, Boundary::Neumann).unwrap();
        let dir = mesh_window(&g, &w, 0.5, Boundary::Dirichlet).unwrap();
        assert!(neu.dirichlet_nodes().is_empty());
        assert_eq!(dir.dirichlet_nodes().len(), 20);
        let fem = assemble_fem(&dir, None).unwrap();
        assert_eq!(fem.len(), dir.nodes().len() - 20);
    }
}
