//! Discrete Laplacians on a window and their heat kernels.
//!
//! `L u(x) = (1/h(x)) sum_{y ~ x} b(x, y) (u(x) - u(y))`. The kernel is
//! normalized against `h`: `e^{-tL} u(x) = sum_y p_t(x, y) u(y) h(y)`, so in
//! terms of the symmetric matrix `H^{-1/2} A H^{-1/2}`,
//! `p_t(x, y) = [e^{-t H^{-1/2} A H^{-1/2}}]_{xy} / sqrt(h(x) h(y))`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lanczos_expmv, symmetric_eigen, CsrMatrix};
use crate::neighbors::NeighborRelation;
use crate::pointset::{PointSet, Window};
use crate::tiling::TilingSystem;

/// Largest vertex count for the dense eigendecomposition path.
pub const DENSE_LIMIT: usize = 5000;
/// Crossover from dense to Krylov for [`Method::Auto`].
pub const AUTO_DENSE_LIMIT: usize = 1000;
const KRYLOV_MAX_ITER: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DenseEig,
    Krylov,
    /// Dense up to [`AUTO_DENSE_LIMIT`] vertices, Krylov beyond.
    Auto,
}

/// Vertex measure `h` (by point id) and edge weights `b` (by relation pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub h: Vec<f64>,
    pub b: Vec<f64>,
}

impl Weights {
    pub fn unit(rel: &NeighborRelation) -> Self {
        Self { h: vec![1.0; rel.pointset().len()], b: vec![1.0; rel.pairs().len()] }
    }

    /// `h(x) = |V_x|`, `b(x, y) = d(x, y)^l`. Cells of points outside the
    /// tiling's interior are clipped, so windows should stay inside it.
    pub fn cell_volume(ts: &TilingSystem, rel: &NeighborRelation, l: f64) -> Self {
        let ps = rel.pointset();
        let h = (0..ps.len()).map(|id| ts.cell(id).area()).collect();
        let b = rel.pairs().iter().map(|&(a, b)| ps.distance(a, b).powf(l)).collect();
        Self { h, b }
    }
}

/// Laplacian restricted to the points of a window.
#[derive(Debug)]
pub struct DiscreteOperator {
    pointset: PointSet,
    window: Window,
    boundary: Boundary,
    vertices: Vec<usize>,
    local: Vec<Option<usize>>,
    h: Vec<f64>,
    form: CsrMatrix,
    symmetric: CsrMatrix,
    cut_edges: usize,
    spectrum: OnceLock<(Vec<f64>, DMatrix<f64>)>,
}

/// Builds the windowed operator. Neumann keeps only edges inside the window;
/// Dirichlet additionally counts edges leaving it on the diagonal.
pub fn assemble(
    rel: &NeighborRelation,
    window: &Window,
    boundary: Boundary,
    weights: Option<&Weights>,
) -> Result<DiscreteOperator> {
    let ps = rel.pointset();
    let unit;
    let weights = match weights {
        Some(w) => w,
        None => {
            unit = Weights::unit(rel);
            &unit
        }
    };
    if weights.h.len() != ps.len() || weights.b.len() != rel.pairs().len() {
        return Err(Error::invalid(format!(
            "weights sized {}/{} do not match {} points and {} pairs",
            weights.h.len(),
            weights.b.len(),
            ps.len(),
            rel.pairs().len()
        )));
    }
    let vertices = ps.ids_in(window);
    if vertices.is_empty() {
        return Err(Error::invalid("window contains no points"));
    }
    let mut local = vec![None; ps.len()];
    for (i, &id) in vertices.iter().enumerate() {
        local[id] = Some(i);
    }
    let h: Vec<f64> = vertices.iter().map(|&id| weights.h[id]).collect();
    if let Some((i, v)) = h.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::invalid(format!(
            "vertex measure must be positive and finite, got h = {v} at point {}",
            vertices[i]
        )));
    }
    let n = vertices.len();
    let mut triplets = Vec::new();
    let mut diag = vec![0.0; n];
    let mut cut_edges = 0;
    for (&(a, b), &w) in rel.pairs().iter().zip(&weights.b) {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::invalid(format!("edge weight must be positive and finite, got b = {w} on ({a}, {b})")));
        }
        match (local[a], local[b]) {
            (Some(i), Some(j)) => {
                diag[i] += w;
                diag[j] += w;
                triplets.push((i, j, -w));
                triplets.push((j, i, -w));
            }
            (Some(i), None) | (None, Some(i)) => {
                cut_edges += 1;
                if boundary == Boundary::Dirichlet {
                    diag[i] += w;
                }
            }
            _ => {}
        }
    }
    triplets.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    let form = CsrMatrix::from_triplets(n, n, &triplets);
    let sqrt_h: Vec<f64> = h.iter().map(|v| v.sqrt()).collect();
    let sym_triplets: Vec<_> = form.triplets().map(|(i, j, v)| (i, j, v / (sqrt_h[i] * sqrt_h[j]))).collect();
    let symmetric = CsrMatrix::from_triplets(n, n, &sym_triplets);
    Ok(DiscreteOperator {
        pointset: ps.clone(),
        window: window.clone(),
        boundary,
        vertices,
        local,
        h,
        form,
        symmetric,
        cut_edges,
        spectrum: OnceLock::new(),
    })
}

impl DiscreteOperator {
    pub fn pointset(&self) -> &PointSet {
        &self.pointset
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Relation pairs with exactly one endpoint in the window. With none,
    /// the two boundary modes coincide.
    pub fn cut_edges(&self) -> usize {
        self.cut_edges
    }

    /// Point ids of the window, in matrix order.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Matrix index of a point id.
    pub fn local(&self, id: usize) -> Option<usize> {
        self.local.get(id).copied().flatten()
    }

    /// Vertex measure in matrix order.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// The form matrix `A`, with `L = H^{-1} A`.
    pub fn form(&self) -> &CsrMatrix {
        &self.form
    }

    /// `H^{-1/2} A H^{-1/2}`.
    pub fn symmetric(&self) -> &CsrMatrix {
        &self.symmetric
    }

    /// `L u` in matrix order.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.form.matvec(u).iter().zip(&self.h).map(|(v, h)| v / h).collect()
    }

    /// Symmetric coordinate triples `(id_a, id_b, value)` of `A` by point id.
    pub fn triples(&self) -> Vec<(usize, usize, f64)> {
        self.form.triplets().map(|(i, j, v)| (self.vertices[i], self.vertices[j], v)).collect()
    }

    fn local_or_err(&self, id: usize) -> Result<usize> {
        self.local(id).ok_or_else(|| Error::invalid(format!("point {id} is not in the operator window")))
    }

    fn spectrum(&self) -> Result<&(Vec<f64>, DMatrix<f64>)> {
        if self.len() > DENSE_LIMIT {
            return Err(Error::invalid(format!(
                "dense eigendecomposition limited to {DENSE_LIMIT} vertices, operator has {}",
                self.len()
            )));
        }
        Ok(self.spectrum.get_or_init(|| symmetric_eigen(self.symmetric.to_dense())))
    }

    fn resolve(&self, method: Method) -> Method {
        match method {
            Method::Auto if self.len() <= AUTO_DENSE_LIMIT => Method::DenseEig,
            Method::Auto => Method::Krylov,
            m => m,
        }
    }

    /// `e^{-tA~} v` for each time, `A~` the symmetric matrix.
    fn exp_symmetric(&self, v: &[f64], times: &[f64], method: Method, tol: f64) -> Result<(Vec<Vec<f64>>, f64)> {
        match self.resolve(method) {
            Method::DenseEig => {
                let (vals, vecs) = self.spectrum()?;
                let n = self.len();
                let coeff: Vec<f64> = (0..n).map(|k| (0..n).map(|i| vecs[(i, k)] * v[i]).sum()).collect();
                let out = times
                    .iter()
                    .map(|&t| {
                        let mut u = vec![0.0; n];
                        for k in 0..n {
                            let c = coeff[k] * (-t * vals[k]).exp();
                            for (i, ui) in u.iter_mut().enumerate() {
                                *ui += c * vecs[(i, k)];
                            }
                        }
                        u
                    })
                    .collect();
                Ok((out, 0.0))
            }
            _ => {
                let res = lanczos_expmv(|x| Ok(self.symmetric.matvec(x)), v, times, tol, KRYLOV_MAX_ITER)?;
                let err = res.error_estimates.iter().copied().fold(0.0, f64::max);
                Ok((res.values, err))
            }
        }
    }

    /// `e^{-tL} u` in matrix order.
    pub fn semigroup(&self, u: &[f64], t: f64, method: Method, tol: f64) -> Result<Vec<f64>> {
        if u.len() != self.len() {
            return Err(Error::invalid("vector length does not match the operator"));
        }
        let v: Vec<f64> = u.iter().zip(&self.h).map(|(u, h)| u * h.sqrt()).collect();
        let (out, _) = self.exp_symmetric(&v, &[t], method, tol)?;
        Ok(out[0].iter().zip(&self.h).map(|(w, h)| w / h.sqrt()).collect())
    }
}

/// Heat kernel values from one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSamples {
    pub source: usize,
    pub targets: Vec<usize>,
    pub times: Vec<f64>,
    /// `values[k][j] = p_{times[k]}(source, targets[j])`.
    pub values: Vec<Vec<f64>>,
    pub boundary: Boundary,
    pub method: Method,
    /// Largest Krylov error estimate, 0 for the dense path.
    pub error_estimate: f64,
    pub certificate: Option<f64>,
}

impl KernelSamples {
    /// `(x, y, t, p)` rows, time-major.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        self.times.iter().zip(&self.values).flat_map(move |(&t, row)| {
            self.targets.iter().zip(row).map(move |(&y, &p)| (self.source, y, t, p))
        })
    }
}

/// `p_t(x, y)` for every target and time.
pub fn heat_kernel(
    op: &DiscreteOperator,
    x: usize,
    targets: &[usize],
    times: &[f64],
    method: Method,
    tol: f64,
) -> Result<KernelSamples> {
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::invalid(format!("times must be positive, got {t}")));
    }
    let xi = op.local_or_err(x)?;
    let ti: Vec<usize> = targets.iter().map(|&y| op.local_or_err(y)).collect::<Result<_>>()?;
    let mut e = vec![0.0; op.len()];
    e[xi] = 1.0;
    let (cols, error_estimate) = op.exp_symmetric(&e, times, method, tol)?;
    let hx = op.h[xi];
    let values = cols
        .iter()
        .map(|col| ti.iter().map(|&j| col[j] / (hx * op.h[j]).sqrt()).collect())
        .collect();
    Ok(KernelSamples {
        source: x,
        targets: targets.to_vec(),
        times: times.to_vec(),
        values,
        boundary: op.boundary,
        method: op.resolve(method),
        error_estimate,
        certificate: None,
    })
}

/// Dirichlet versus Neumann agreement on a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationCertificate {
    /// `max |p^D - p^N| / p^N` over targets and times.
    pub discrepancy: f64,
    pub tol: f64,
    /// `(y, t)` attaining the maximum.
    pub worst: Option<(usize, f64)>,
    /// Pairs leaving the window; zero makes the certificate vacuous.
    pub cut_edges: usize,
    pub neumann: KernelSamples,
}

impl TruncationCertificate {
    pub fn passed(&self) -> bool {
        self.discrepancy < self.tol
    }
}

#[allow(clippy::too_many_arguments)]
pub fn truncation_certificate(
    rel: &NeighborRelation,
    window: &Window,
    weights: Option<&Weights>,
    x: usize,
    targets: &[usize],
    times: &[f64],
    method: Method,
    tol: f64,
) -> Result<TruncationCertificate> {
    let neu = assemble(rel, window, Boundary::Neumann, weights)?;
    let dir = assemble(rel, window, Boundary::Dirichlet, weights)?;
    let solver_tol = (tol * 1e-6).max(1e-16);
    let mut pn = heat_kernel(&neu, x, targets, times, method, solver_tol)?;
    let pd = heat_kernel(&dir, x, targets, times, method, solver_tol)?;
    let mut discrepancy: f64 = 0.0;
    let mut worst = None;
    for (k, &t) in times.iter().enumerate() {
        for (j, &y) in targets.iter().enumerate() {
            let (a, b) = (pd.values[k][j], pn.values[k][j]);
            let rel_err = if a == b { 0.0 } else { (a - b).abs() / b.abs() };
            if rel_err > discrepancy || (worst.is_none() && rel_err >= discrepancy) {
                discrepancy = rel_err;
                worst = Some((y, t));
            }
        }
    }
    pn.certificate = Some(discrepancy);
    Ok(TruncationCertificate { discrepancy, tol, worst, cut_edges: dir.cut_edges, neumann: pn })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::build_max_relation;
    use crate::pointset::{generate_lattice, LatticeKind};
    use proptest::prelude::*;

    fn z2(hw: f64) -> NeighborRelation {
        let ps = generate_lattice(LatticeKind::Square, 1.0, &Window::new(vec![0.0, 0.0], hw).unwrap()).unwrap();
        build_max_relation(&ps, 0.5)
    }

    fn bessel_i(k: u32, z: f64) -> f64 {
        let mut term = (z / 2.0).powi(k as i32) / (1..=k).map(f64::from).product::<f64>();
        let mut sum = term;
        for j in 1..200 {
            term *= (z / 2.0).powi(2) / (j as f64 * (j + k) as f64);
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
        }
        sum
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let rel = z2(4.0);
        let op = assemble(&rel, rel.pointset().window(), Boundary::Neumann, None).unwrap();
        assert!(op.apply(&vec![1.0; op.len()]).iter().all(|v| *v == 0.0));
        assert_eq!(op.form().asymmetry(), 0.0);
    }

    #[test]
    fn gershgorin_bound() {
        let rel = z2(4.0);
        let w = Window::new(vec![0.0, 0.0], 3.0).unwrap();
        let op = assemble(&rel, &w, Boundary::Dirichlet, None).unwrap();
        let (vals, _) = symmetric_eigen(op.symmetric().to_dense());
        assert!(vals[0] > 0.0);
        assert!(*vals.last().unwrap() <= 2.0 * 4.0 + 1e-12);
    }

    #[test]
    fn cell_volume_weights_with_zero_exponent_reduce_to_plain() {
        let rel = z2(6.0);
        let params = crate::pointset::DeloneParams::new(0.5, 0.5 * 2f64.sqrt()).unwrap();
        let ts = crate::tiling::voronoi_cells_2d(rel.pointset(), &params, 2.0).unwrap();
        let w = Weights::cell_volume(&ts, &rel, 0.0);
        let inner = rel.pointset().window().shrink(2.0).unwrap();
        let plain = assemble(&rel, &inner, Boundary::Neumann, None).unwrap();
        let weighted = assemble(&rel, &inner, Boundary::Neumann, Some(&w)).unwrap();
        for ((_, _, a), (_, _, b)) in plain.triples().iter().zip(weighted.triples()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(weighted.h().iter().all(|h| (h - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rejects_nonpositive_weights() {
        let rel = z2(3.0);
        let mut w = Weights::unit(&rel);
        w.b[0] = 0.0;
        assert!(assemble(&rel, rel.pointset().window(), Boundary::Neumann, Some(&w)).is_err());
        let mut w = Weights::unit(&rel);
        w.h[2] = -1.0;
        assert!(assemble(&rel, rel.pointset().window(), Boundary::Neumann, Some(&w)).is_err());
    }

    #[test]
    fn small_time_limit() {
        let rel = z2(3.0);
        let op = assemble(&rel, rel.pointset().window(), Boundary::Neumann, None).unwrap();
        let o = rel.pointset().nearest_id(&[0.0, 0.0]);
        let k = heat_kernel(&op, o, &[o], &[1e-8], Method::DenseEig, 1e-14).unwrap();
        assert!((k.values[0][0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bessel_product_near_center() {
        let rel = z2(12.0);
        let op = assemble(&rel, rel.pointset().window(), Boundary::Neumann, None).unwrap();
        let ps = rel.pointset();
        let o = ps.nearest_id(&[0.0, 0.0]);
        let targets: Vec<usize> = [(0.0, 0.0), (1.0, 0.0), (2.0, 1.0), (3.0, 3.0)]
            .iter()
            .map(|&(a, b)| ps.nearest_id(&[a, b]))
            .collect();
        let times = [0.5, 1.0, 2.0];
        for method in [Method::DenseEig, Method::Krylov] {
            let k = heat_kernel(&op, o, &targets, &times, method, 1e-15).unwrap();
            for (ti, &t) in times.iter().enumerate() {
                for (j, &y) in targets.iter().enumerate() {
                    let p = ps.point(y);
                    let exact = (-4.0 * t).exp()
                        * bessel_i(p[0].abs() as u32, 2.0 * t)
                        * bessel_i(p[1].abs() as u32, 2.0 * t);
                    let got = k.values[ti][j];
                    assert!((got - exact).abs() / exact < 1e-8, "{method:?} t={t} y={p:?}: {got} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn certificate_exact_without_crossing_edges() {
        let rel = z2(5.0);
        let o = rel.pointset().nearest_id(&[0.0, 0.0]);
        let c = truncation_certificate(&rel, rel.pointset().window(), None, o, &[o], &[1.0, 5.0], Method::DenseEig, 1e-6)
            .unwrap();
        assert_eq!(c.discrepancy, 0.0);
        assert_eq!(c.cut_edges, 0);
        assert!(c.passed());
    }

    #[test]
    fn certificate_flags_boundary_targets() {
        let rel = z2(8.0);
        let ps = rel.pointset();
        let w = Window::new(vec![0.0, 0.0], 5.0).unwrap();
        let y = ps.nearest_id(&[5.0, 0.0]);
        let c = truncation_certificate(&rel, &w, None, y, &[y], &[10.0], Method::DenseEig, 1e-6).unwrap();
        assert!(c.discrepancy > 0.1);
        assert_eq!(c.cut_edges, 4 * 11);
        assert!(!c.passed());
    }

    #[test]
    fn semigroup_law() {
        let rel = z2(3.0);
        let op = assemble(&rel, rel.pointset().window(), Boundary::Neumann, None).unwrap();
        let all = op.vertices().to_vec();
        let x = all[3];
        let y = all[17];
        let (t, s) = (0.7, 1.3);
        let kx = heat_kernel(&op, x, &all, &[t], Method::DenseEig, 1e-14).unwrap();
        let ky = heat_kernel(&op, y, &all, &[s], Method::DenseEig, 1e-14).unwrap();
        let direct = heat_kernel(&op, x, &[y], &[t + s], Method::DenseEig, 1e-14).unwrap();
        let composed: f64 = kx.values[0].iter().zip(&ky.values[0]).map(|(a, b)| a * b).sum();
        assert!((composed - direct.values[0][0]).abs() < 1e-8);
    }

    #[test]
    fn weighted_markov_conservation() {
        let rel = z2(4.0);
        let mut w = Weights::unit(&rel);
        for (i, h) in w.h.iter_mut().enumerate() {
            *h = 1.0 + 0.5 * ((i * 7) % 5) as f64 / 5.0;
        }
        for (i, b) in w.b.iter_mut().enumerate() {
            *b = 0.5 + ((i * 3) % 4) as f64 / 4.0;
        }
        let op = assemble(&rel, rel.pointset().window(), Boundary::Neumann, Some(&w)).unwrap();
        let all = op.vertices().to_vec();
        let k = heat_kernel(&op, all[5], &all, &[0.3, 3.0], Method::Krylov, 1e-14).unwrap();
        for row in &k.values {
            let mass: f64 = row.iter().zip(op.h()).map(|(p, h)| p * h).sum();
            assert!((mass - 1.0).abs() < 1e-10);
        }
        // Self-adjointness in the h inner product gives a symmetric kernel.
        let back = heat_kernel(&op, all[9], &[all[5]], &[3.0], Method::Krylov, 1e-14).unwrap();
        assert!((back.values[0][0] - k.values[1][9]).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn semigroup_is_markov(seed in 0u64..1000, t in 0.01f64..20.0) {
            use rand::{Rng, SeedableRng};
            let rel = z2(3.0);
            let op = assemble(&rel, rel.pointset().window(), Boundary::Neumann, None).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..op.len()).map(|_| rng.random::<f64>()).collect();
            let v = op.semigroup(&u, t, Method::DenseEig, 1e-14).unwrap();
            for x in v {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x));
            }
        }

        #[test]
        fn dense_and_krylov_agree(t in 0.05f64..10.0, src in 0usize..49) {
            let rel = z2(3.0);
            let op = assemble(&rel, rel.pointset().window(), Boundary::Dirichlet, None).unwrap();
            let all = op.vertices().to_vec();
            let a = heat_kernel(&op, all[src], &all, &[t], Method::DenseEig, 1e-14).unwrap();
            let b = heat_kernel(&op, all[src], &all, &[t], Method::Krylov, 1e-14).unwrap();
            for (p, q) in a.values[0].iter().zip(&b.values[0]) {
                prop_assert!((p - q).abs() < 1e-11);
                prop_assert!(*p > 0.0);
            }
        }
    }
}
