//! Volume doubling, Poincaré constants and Gaussian envelope fits.
//!
//! Balls use the intrinsic metric of each space: `d_c` on the combinatorial
//! graph, `d_m` on the metric graph.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{ball_count_c, ball_measure_m, CombinatorialGraph, GraphPoint, MetricGraph, Space};
use crate::heat_discrete::{assemble, heat_kernel, Boundary, Method, Weights};
use crate::heat_metric::{assemble_fem, mass_norm2, mesh_ball, mesh_window, metric_heat_kernel, GraphMesh, MetricMethod};
use crate::linalg::{generalized_eigen, symmetric_eigen};
use crate::neighbors::NeighborRelation;
use crate::pointset::{PointSet, Window};

pub const METRIC_CONVENTION: &str = "intrinsic: d_c balls on the combinatorial graph, d_m balls on the metric graph";
const MIN_ENVELOPE_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceTag {
    Discrete,
    Metric,
}

impl Space<'_> {
    pub fn tag(&self) -> SpaceTag {
        match self {
            Space::Discrete(_) => SpaceTag::Discrete,
            Space::Metric(_) => SpaceTag::Metric,
        }
    }

    /// `mu(B_s(x))` at a vertex: vertex count or edge length.
    pub fn ball_volume(&self, x: usize, s: f64) -> Result<(f64, bool)> {
        match self {
            Space::Discrete(_) => ball_count_c(*self, x, s).map(|b| (b.count as f64, b.truncated)),
            Space::Metric(m) => ball_measure_m(m, GraphPoint::Vertex(x), s).map(|b| (b.measure, b.truncated)),
        }
    }
}

/// Ordinary least squares `y ≈ slope x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// `count` distinct point ids from `window`, drawn with a seeded generator
/// and returned sorted.
pub fn sample_centers(ps: &PointSet, window: &Window, count: usize, seed: u64) -> Result<Vec<usize>> {
    let ids = ps.ids_in(window);
    if ids.is_empty() {
        return Err(Error::invalid("no points in the sampling window"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<usize> = sample(&mut rng, ids.len(), count.min(ids.len())).into_iter().map(|i| ids[i]).collect();
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingSample {
    pub center: usize,
    pub s: f64,
    pub mu_s: f64,
    pub mu_2s: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub space: SpaceTag,
    pub centers: Vec<usize>,
    pub s_grid: Vec<f64>,
    pub samples: Vec<DoublingSample>,
    /// `(center, s)` pairs dropped because `B_2s` was truncated.
    pub truncated: usize,
    pub max_ratio: f64,
    pub nu_hat: f64,
    pub metric_convention: String,
}

impl DoublingReport {
    pub fn passed(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.ratio.is_finite() && s.ratio >= 1.0)
    }
}

pub fn volume_doubling_scan(space: Space<'_>, centers: &[usize], s_grid: &[f64], l: f64) -> Result<DoublingReport> {
    if let Some(s) = s_grid.iter().find(|s| !(**s > 0.0 && **s <= l / 2.0)) {
        return Err(Error::invalid(format!("radius {s} outside (0, L/2] with L = {l}")));
    }
    let jobs: Vec<(usize, f64)> = centers.iter().flat_map(|&c| s_grid.iter().map(move |&s| (c, s))).collect();
    let rows: Vec<Option<DoublingSample>> = jobs
        .par_iter()
        .map(|&(center, s)| {
            let (mu_2s, truncated) = space.ball_volume(center, 2.0 * s)?;
            if truncated {
                return Ok(None);
            }
            let (mu_s, _) = space.ball_volume(center, s)?;
            Ok(Some(DoublingSample { center, s, mu_s, mu_2s, ratio: mu_2s / mu_s }))
        })
        .collect::<Result<_>>()?;
    let truncated = rows.iter().filter(|r| r.is_none()).count();
    let samples: Vec<DoublingSample> = rows.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(Error::invalid("every doubling ball is truncated; the window is too small"));
    }
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(DoublingReport {
        space: space.tag(),
        centers: centers.to_vec(),
        s_grid: s_grid.to_vec(),
        samples,
        truncated,
        max_ratio,
        nu_hat: max_ratio.log2(),
        metric_convention: METRIC_CONVENTION.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSample {
    pub center: usize,
    pub s: f64,
    pub lambda1: f64,
    pub c_p: f64,
    /// `|∫|u - ū|² - ∫|u'|²/λ₁| / ∫|u - ū|²` for the eigenfunction `u`.
    pub residual: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    pub space: SpaceTag,
    pub samples: Vec<PoincareSample>,
    pub sup_c_p: f64,
    pub max_residual: f64,
    pub disconnected: usize,
    pub truncated: usize,
    pub mesh_spacing: Option<f64>,
    pub metric_convention: String,
}

impl PoincareReport {
    pub fn passed(&self, residual_tol: f64) -> bool {
        !self.samples.is_empty() && self.sup_c_p.is_finite() && self.max_residual < residual_tol
    }
}

enum BallOutcome {
    Sample(PoincareSample),
    Disconnected,
    Truncated,
}

/// Neumann spectral gap of each ball. `dmax` is the mesh spacing for the
/// metric space and is ignored for the discrete one.
pub fn poincare_scan(space: Space<'_>, centers: &[usize], s_grid: &[f64], dmax: f64) -> Result<PoincareReport> {
    let jobs: Vec<(usize, f64)> = centers.iter().flat_map(|&c| s_grid.iter().map(move |&s| (c, s))).collect();
    let rows: Vec<BallOutcome> = jobs
        .par_iter()
        .map(|&(center, s)| match space {
            Space::Discrete(g) => discrete_ball_gap(g, center, s),
            Space::Metric(m) => metric_ball_gap(m, center, s, dmax),
        })
        .collect::<Result<_>>()?;
    let mut report = PoincareReport {
        space: space.tag(),
        samples: Vec::new(),
        sup_c_p: 0.0,
        max_residual: 0.0,
        disconnected: 0,
        truncated: 0,
        mesh_spacing: matches!(space, Space::Metric(_)).then_some(dmax),
        metric_convention: METRIC_CONVENTION.into(),
    };
    for r in rows {
        match r {
            BallOutcome::Sample(s) => {
                report.sup_c_p = report.sup_c_p.max(s.c_p);
                report.max_residual = report.max_residual.max(s.residual);
                report.samples.push(s);
            }
            BallOutcome::Disconnected => report.disconnected += 1,
            BallOutcome::Truncated => report.truncated += 1,
        }
    }
    if report.samples.is_empty() {
        return Err(Error::invalid("no admissible Poincaré balls (all truncated or disconnected)"));
    }
    Ok(report)
}

/// Gap below which the ball counts as disconnected.
const GAP_TOL: f64 = 1e-9;

fn discrete_ball_gap(g: &CombinatorialGraph, center: usize, s: f64) -> Result<BallOutcome> {
    let ball = ball_count_c(Space::Discrete(g), center, s)?;
    if ball.truncated {
        return Ok(BallOutcome::Truncated);
    }
    let hops = g.hops_from(center, Some(s.floor() as usize));
    let verts: Vec<usize> = (0..g.len()).filter(|&v| hops[v].is_some()).collect();
    let n = verts.len();
    if n < 2 {
        return Ok(BallOutcome::Disconnected);
    }
    let mut local = vec![usize::MAX; g.len()];
    for (i, &v) in verts.iter().enumerate() {
        local[v] = i;
    }
    let mut a = nalgebra::DMatrix::zeros(n, n);
    let mut edges = Vec::new();
    for (i, &v) in verts.iter().enumerate() {
        for &w in g.neighbors(v) {
            let j = local[w];
            if j != usize::MAX && j > i {
                edges.push((i, j));
                a[(i, i)] += 1.0;
                a[(j, j)] += 1.0;
                a[(i, j)] -= 1.0;
                a[(j, i)] -= 1.0;
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(a);
    let lambda1 = vals[1];
    if lambda1 <= GAP_TOL * vals[n - 1].max(1.0) {
        return Ok(BallOutcome::Disconnected);
    }
    let u: Vec<f64> = vecs.column(1).iter().copied().collect();
    let mean = u.iter().sum::<f64>() / n as f64;
    let var: f64 = u.iter().map(|x| (x - mean).powi(2)).sum();
    let en: f64 = edges.iter().map(|&(i, j)| (u[i] - u[j]).powi(2)).sum();
    Ok(BallOutcome::Sample(PoincareSample {
        center,
        s,
        lambda1,
        c_p: 1.0 / (s * s * lambda1),
        residual: (var - en / lambda1).abs() / var,
        size: n,
    }))
}

fn metric_ball_gap(m: &MetricGraph, center: usize, s: f64, dmax: f64) -> Result<BallOutcome> {
    let a = GraphPoint::Vertex(center);
    if m.ball_measure(a, s)?.truncated {
        return Ok(BallOutcome::Truncated);
    }
    let mesh = mesh_ball(m, a, s, dmax)?;
    let fem = assemble_fem(&mesh, None)?;
    let (vals, vecs) = generalized_eigen(&fem.k.to_dense(), &fem.m.to_dense())?;
    let n = vals.len();
    if n < 2 {
        return Ok(BallOutcome::Disconnected);
    }
    let lambda1 = vals[1];
    if lambda1 <= GAP_TOL * vals[n - 1].max(1.0) * 1e-3 {
        return Ok(BallOutcome::Disconnected);
    }
    let u: Vec<f64> = vecs.column(1).iter().copied().collect();
    let w = fem.mass_weights();
    let total: f64 = w.iter().sum();
    let mean = u.iter().zip(&w).map(|(u, w)| u * w).sum::<f64>() / total;
    let centered: Vec<f64> = u.iter().map(|x| x - mean).collect();
    let var = mass_norm2(&fem, &centered);
    let en = fem.k.quadratic_form(&u);
    Ok(BallOutcome::Sample(PoincareSample {
        center,
        s,
        lambda1,
        c_p: 1.0 / (s * s * lambda1),
        residual: (var - en / lambda1).abs() / var,
        size: n,
    }))
}

/// One kernel value with the quantities the envelope needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub x: usize,
    pub y: usize,
    pub t: f64,
    pub p: f64,
    /// Intrinsic distance `d_c` or `d_m`.
    pub d: f64,
    /// `mu(B_sqrt(t)(x))`.
    pub mu: f64,
    pub truncated: bool,
    /// Relative Dirichlet/Neumann discrepancy, when computed.
    pub certificate: Option<f64>,
}

impl EnvelopeSample {
    /// Discrete regime `t > max(1, d_c)`.
    pub fn in_discrete_regime(&self) -> bool {
        self.t > self.d.max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub x_value: f64,
    pub y_value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub space: Option<SpaceTag>,
    pub admitted: Vec<EnvelopeSample>,
    pub points: Vec<FitPoint>,
    pub a: f64,
    /// Shared slope, `c2 = c4 = b`.
    pub b: f64,
    pub c1: f64,
    pub c3: f64,
    /// `log(c3 / c1)`.
    pub spread: f64,
    /// Samples satisfying `c1 e^{-bX} <= p mu <= c3 e^{-bX}`.
    pub inside: usize,
    pub excluded_regime: usize,
    pub excluded_truncated: usize,
    pub excluded_certificate: usize,
    pub excluded_nonpositive: usize,
    pub metric_convention: String,
}

impl EnvelopeFit {
    pub fn holds_everywhere(&self) -> bool {
        self.inside == self.admitted.len()
    }

    pub fn passed(&self, max_spread: f64) -> bool {
        self.b > 0.0 && self.spread <= max_spread && self.holds_everywhere()
    }
}

/// Least-squares envelope through already admitted samples. Any number of
/// positive samples is accepted; a single sample gives `b = 0`, `c1 = c3`.
pub fn fit_envelope(samples: &[EnvelopeSample]) -> Result<EnvelopeFit> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to fit"));
    }
    if let Some(s) = samples.iter().find(|s| !(s.p > 0.0 && s.mu > 0.0 && s.t > 0.0)) {
        return Err(Error::invalid(format!(
            "envelope needs positive p, mu and t; got p = {}, mu = {}, t = {}",
            s.p, s.mu, s.t
        )));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.d * s.d / s.t).collect();
    let ys: Vec<f64> = samples.iter().map(|s| (s.p * s.mu).ln()).collect();
    let (slope, a) = least_squares(&xs, &ys);
    let b = -slope;
    let points: Vec<FitPoint> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| FitPoint { x_value: x, y_value: y, residual: y - (a - b * x) })
        .collect();
    let rmin = points.iter().map(|p| p.residual).fold(f64::INFINITY, f64::min);
    let rmax = points.iter().map(|p| p.residual).fold(f64::NEG_INFINITY, f64::max);
    let (c1, c3) = ((a + rmin).exp(), (a + rmax).exp());
    let slack = 1e-12;
    let inside = samples
        .iter()
        .zip(&xs)
        .filter(|(s, &x)| {
            let v = s.p * s.mu;
            let lo = c1 * (-b * x).exp();
            let hi = c3 * (-b * x).exp();
            v >= lo * (1.0 - slack) && v <= hi * (1.0 + slack)
        })
        .count();
    Ok(EnvelopeFit {
        space: None,
        admitted: samples.to_vec(),
        points,
        a,
        b,
        c1,
        c3,
        spread: (c3 / c1).ln(),
        inside,
        excluded_regime: 0,
        excluded_truncated: 0,
        excluded_certificate: 0,
        excluded_nonpositive: 0,
        metric_convention: METRIC_CONVENTION.into(),
    })
}

/// Filters to the admissible regime, then fits. Discrete samples need
/// `t > max(1, d_c)`; metric samples need `t >= dmax^2`. Truncated balls and
/// samples with certificate above `certificate_tol` are dropped.
pub fn gaussian_envelope_fit(
    samples: &[EnvelopeSample],
    space: SpaceTag,
    dmax: Option<f64>,
    certificate_tol: f64,
) -> Result<EnvelopeFit> {
    let mut admitted = Vec::new();
    let (mut regime, mut trunc, mut cert, mut nonpos) = (0, 0, 0, 0);
    for s in samples {
        let in_regime = match space {
            SpaceTag::Discrete => s.in_discrete_regime(),
            SpaceTag::Metric => s.t > 0.0 && dmax.is_none_or(|h| s.t >= h * h),
        };
        if !in_regime {
            regime += 1;
        } else if s.truncated {
            trunc += 1;
        } else if s.certificate.is_some_and(|c| !(c < certificate_tol)) {
            cert += 1;
        } else if !(s.p > 0.0) {
            nonpos += 1;
        } else {
            admitted.push(s.clone());
        }
    }
    if admitted.len() < MIN_ENVELOPE_SAMPLES {
        return Err(Error::invalid(format!(
            "only {} admitted samples (need {MIN_ENVELOPE_SAMPLES}); excluded: {regime} regime, \
             {trunc} truncated, {cert} certificate, {nonpos} nonpositive",
            admitted.len()
        )));
    }
    let mut fit = fit_envelope(&admitted)?;
    fit.space = Some(space);
    fit.excluded_regime = regime;
    fit.excluded_truncated = trunc;
    fit.excluded_certificate = cert;
    fit.excluded_nonpositive = nonpos;
    Ok(fit)
}

/// One computed kernel value before annotation with distance and ball data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    pub x: usize,
    pub y: usize,
    pub t: f64,
    pub p: f64,
    pub certificate: Option<f64>,
}

fn relative_gap(p: f64, q: f64) -> f64 {
    if p == q {
        0.0
    } else {
        (p - q).abs() / p.abs()
    }
}

/// Adds `d_c(x, y)` and `mu(B_sqrt(t)(x))` to discrete samples. The measure
/// is the vertex count, or `sum h` over the ball when `h` is given.
pub fn annotate_discrete(rel: &NeighborRelation, h: Option<&[f64]>, raw: &[RawSample]) -> Result<Vec<EnvelopeSample>> {
    let g = CombinatorialGraph::new(rel);
    if let Some(h) = h {
        if h.len() != g.len() {
            return Err(Error::invalid("vertex measure must have one value per point"));
        }
    }
    let check = |id: usize| {
        if id < g.len() {
            Ok(id)
        } else {
            Err(Error::invalid(format!("point id {id} out of range (n = {})", g.len())))
        }
    };
    let mut hops: BTreeMap<usize, Vec<Option<usize>>> = BTreeMap::new();
    let mut balls: BTreeMap<(usize, u64), (f64, bool)> = BTreeMap::new();
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        let (x, y) = (check(r.x)?, check(r.y)?);
        if !(r.t > 0.0 && r.t.is_finite()) {
            return Err(Error::invalid(format!("time must be positive, got {}", r.t)));
        }
        let dist = hops.entry(x).or_insert_with(|| g.hops_from(x, None));
        let d = dist[y].ok_or_else(|| Error::invalid(format!("points {x} and {y} are not connected")))? as f64;
        let (mu, truncated) = match balls.get(&(x, r.t.to_bits())) {
            Some(v) => *v,
            None => {
                let ball = ball_count_c(Space::Discrete(&g), x, r.t.sqrt())?;
                let radius = r.t.sqrt().floor() as usize;
                let mu = match h {
                    Some(h) => dist.iter().zip(h).filter(|(d, _)| d.is_some_and(|d| d <= radius)).map(|(_, h)| h).sum(),
                    None => ball.count as f64,
                };
                balls.insert((x, r.t.to_bits()), (mu, ball.truncated));
                (mu, ball.truncated)
            }
        };
        out.push(EnvelopeSample { x, y, t: r.t, p: r.p, d, mu, truncated, certificate: r.certificate });
    }
    Ok(out)
}

/// Adds `d_m(x, y)` and `mu_m(B_sqrt(t)(x))` to vertex-to-vertex metric samples.
pub fn annotate_metric(graph: &MetricGraph, raw: &[RawSample]) -> Result<Vec<EnvelopeSample>> {
    let n = graph.vertex_count();
    let mut dists: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut balls: BTreeMap<(usize, u64), (f64, bool)> = BTreeMap::new();
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        if r.x >= n || r.y >= n {
            return Err(Error::invalid(format!("vertex id out of range in ({}, {}) (n = {n})", r.x, r.y)));
        }
        if !(r.t > 0.0 && r.t.is_finite()) {
            return Err(Error::invalid(format!("time must be positive, got {}", r.t)));
        }
        let dist = match dists.get(&r.x) {
            Some(d) => d,
            None => {
                let d = graph.distances_from(GraphPoint::Vertex(r.x), f64::INFINITY)?;
                dists.entry(r.x).or_insert(d)
            }
        };
        let d = dist[r.y];
        if !d.is_finite() {
            return Err(Error::invalid(format!("vertices {} and {} are not connected", r.x, r.y)));
        }
        let (mu, truncated) = match balls.get(&(r.x, r.t.to_bits())) {
            Some(v) => *v,
            None => {
                let b = ball_measure_m(graph, GraphPoint::Vertex(r.x), r.t.sqrt())?;
                balls.insert((r.x, r.t.to_bits()), (b.measure, b.truncated));
                (b.measure, b.truncated)
            }
        };
        out.push(EnvelopeSample { x: r.x, y: r.y, t: r.t, p: r.p, d, mu, truncated, certificate: r.certificate });
    }
    Ok(out)
}

/// Neumann kernels from each source to every window vertex within
/// `max_hops`, with per-sample Dirichlet/Neumann certificates.
pub fn discrete_raw_samples(
    rel: &NeighborRelation,
    window: &Window,
    weights: Option<&Weights>,
    sources: &[usize],
    max_hops: usize,
    times: &[f64],
    method: Method,
) -> Result<Vec<RawSample>> {
    let g = CombinatorialGraph::new(rel);
    let neu = assemble(rel, window, Boundary::Neumann, weights)?;
    let dir = assemble(rel, window, Boundary::Dirichlet, weights)?;
    let per_source: Vec<Vec<RawSample>> = sources
        .par_iter()
        .map(|&x| {
            let hops = g.hops_from(x, Some(max_hops));
            let targets: Vec<usize> = (0..g.len())
                .filter(|&y| hops[y].is_some() && neu.local(y).is_some())
                .collect();
            let pn = heat_kernel(&neu, x, &targets, times, method, 1e-15)?;
            let pd = heat_kernel(&dir, x, &targets, times, method, 1e-15)?;
            let mut out = Vec::new();
            for (k, &t) in times.iter().enumerate() {
                for (j, &y) in targets.iter().enumerate() {
                    let (p, q) = (pn.values[k][j], pd.values[k][j]);
                    out.push(RawSample { x, y, t, p, certificate: Some(relative_gap(p, q)) });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_source.into_iter().flatten().collect())
}

/// [`discrete_raw_samples`] annotated for the envelope fit.
#[allow(clippy::too_many_arguments)]
pub fn discrete_kernel_samples(
    rel: &NeighborRelation,
    window: &Window,
    weights: Option<&Weights>,
    sources: &[usize],
    max_hops: usize,
    times: &[f64],
    method: Method,
) -> Result<Vec<EnvelopeSample>> {
    let raw = discrete_raw_samples(rel, window, weights, sources, max_hops, times, method)?;
    annotate_discrete(rel, weights.map(|w| w.h.as_slice()), &raw)
}

/// Metric kernels on the windowed mesh from vertex sources to vertices
/// within `max_dist`. With `certify`, a Dirichlet mesh of the same window
/// supplies per-sample certificates.
#[allow(clippy::too_many_arguments)]
pub fn metric_raw_samples(
    graph: &MetricGraph,
    window: &Window,
    dmax: f64,
    sources: &[usize],
    max_dist: f64,
    times: &[f64],
    method: MetricMethod,
    certify: bool,
) -> Result<Vec<RawSample>> {
    let neu_mesh = mesh_window(graph, window, dmax, Boundary::Neumann)?;
    let neu = assemble_fem(&neu_mesh, None)?;
    let dir = if certify {
        let mesh = mesh_window(graph, window, dmax, Boundary::Dirichlet)?;
        let fem = assemble_fem(&mesh, None)?;
        Some((mesh, fem))
    } else {
        None
    };
    let node = |m: &GraphMesh, v: usize| m.vertex_node(v).ok_or_else(|| Error::invalid(format!("vertex {v} not meshed")));
    let per_source: Vec<Vec<RawSample>> = sources
        .par_iter()
        .map(|&x| {
            let dist = graph.distances_from(GraphPoint::Vertex(x), max_dist)?;
            let targets: Vec<usize> = (0..graph.vertex_count())
                .filter(|&y| dist[y] <= max_dist && neu_mesh.vertex_node(y).is_some())
                .collect();
            let nodes: Vec<usize> = targets.iter().map(|&y| node(&neu_mesh, y)).collect::<Result<_>>()?;
            let pn = metric_heat_kernel(&neu_mesh, &neu, node(&neu_mesh, x)?, &nodes, times, method, 1e-12)?;
            let pd = match &dir {
                Some((mesh, fem)) => {
                    let dn: Vec<usize> = targets.iter().map(|&y| node(mesh, y)).collect::<Result<_>>()?;
                    Some(metric_heat_kernel(mesh, fem, node(mesh, x)?, &dn, times, method, 1e-12)?)
                }
                None => None,
            };
            let mut out = Vec::new();
            for (k, &t) in times.iter().enumerate() {
                for (j, &y) in targets.iter().enumerate() {
                    let p = pn.values[k][j];
                    let certificate = pd.as_ref().map(|pd| relative_gap(p, pd.values[k][j]));
                    out.push(RawSample { x, y, t, p, certificate });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_source.into_iter().flatten().collect())
}

/// [`metric_raw_samples`] annotated for the envelope fit.
#[allow(clippy::too_many_arguments)]
pub fn metric_kernel_samples(
    graph: &MetricGraph,
    window: &Window,
    dmax: f64,
    sources: &[usize],
    max_dist: f64,
    times: &[f64],
    method: MetricMethod,
    certify: bool,
) -> Result<Vec<EnvelopeSample>> {
    let raw = metric_raw_samples(graph, window, dmax, sources, max_dist, times, method, certify)?;
    annotate_metric(graph, &raw)
}
