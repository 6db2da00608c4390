//! Delone point sets on finite windows.
//!
//! A [`PointSet`] is a finite truncation of a Delone set to an axis-aligned
//! cubical [`Window`]. Everything that estimates a property of the infinite
//! set takes a `margin` and only looks at the margin-shrunk window, so that
//! truncation artifacts at the window boundary stay out of the numbers.

mod index;
mod penrose;

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use index::GridIndex;
pub(crate) use index::dist2;
pub use penrose::{penrose_patch, PenrosePatch};

/// Relative tolerance under which two points count as identical.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Euclidean distance.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// A point of R^N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point must have at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate in {coords:?}")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl std::ops::Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Closed axis-aligned cube `center + [-half_width, half_width]^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Point,
    pub half_width: f64,
}

impl Window {
    pub fn new(center: Vec<f64>, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!(
                "window half_width must be positive, got {half_width}"
            )));
        }
        Ok(Self { center: Point::new(center)?, half_width })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    fn slack(&self) -> f64 {
        IDENTITY_TOL * self.half_width.max(1.0)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.boundary_distance(p) >= -self.slack()
    }

    /// Signed Chebyshev distance from `p` to the window boundary; positive
    /// inside.
    pub fn boundary_distance(&self, p: &[f64]) -> f64 {
        let worst = p
            .iter()
            .zip(self.center.iter())
            .map(|(x, c)| (x - c).abs())
            .fold(0.0, f64::max);
        self.half_width - worst
    }

    /// The window with `margin` removed on every side.
    pub fn shrink(&self, margin: f64) -> Result<Window> {
        if margin < 0.0 || margin >= self.half_width {
            return Err(Error::invalid(format!(
                "margin {margin} must lie in [0, half_width = {})",
                self.half_width
            )));
        }
        Ok(Window { center: self.center.clone(), half_width: self.half_width - margin })
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim() as i32)
    }
}

/// Lattice families for the deterministic generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    /// Hypercubic lattice `spacing * Z^N` (any N).
    Square,
    /// Planar triangular lattice spanned by `(s, 0)` and `(s/2, s*sqrt(3)/2)`.
    Triangular,
}

impl LatticeKind {
    /// Exact packing and covering radii of the infinite lattice.
    pub fn delone_params(self, spacing: f64, dim: usize) -> DeloneParams {
        match self {
            LatticeKind::Square => DeloneParams {
                r: spacing / 2.0,
                big_r: spacing * (dim as f64).sqrt() / 2.0,
                resolution: 0.0,
            },
            LatticeKind::Triangular => DeloneParams {
                r: spacing / 2.0,
                big_r: spacing / 3f64.sqrt(),
                resolution: 0.0,
            },
        }
    }
}

/// Where a point set came from; serialized into the metadata sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Lattice { lattice: LatticeKind, spacing: f64 },
    Jittered { lattice: LatticeKind, spacing: f64, delta: f64 },
    Penrose { patch_radius: f64, offsets: [f64; 5] },
    External { description: String },
}

#[derive(Debug)]
struct PointSetData {
    points: Vec<Point>,
    dim: usize,
    window: Window,
    generator: Generator,
    seed: Option<u64>,
    index: OnceLock<GridIndex>,
}

/// A finite set of distinct points inside a window. Point ids are the
/// indices `0..len()`. Cloning is cheap.
#[derive(Debug, Clone)]
pub struct PointSet {
    inner: Arc<PointSetData>,
}

impl PointSet {
    /// Validates and wraps a list of points.
    pub fn from_points(
        points: Vec<Point>,
        window: Window,
        generator: Generator,
        seed: Option<u64>,
    ) -> Result<Self> {
        let dim = window.dim();
        for (id, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::invalid(format!(
                    "point {id} has dimension {}, window has {dim}",
                    p.dim()
                )));
            }
            if !window.contains(p) {
                return Err(Error::invalid(format!("point {id} {:?} lies outside the window", p.0)));
            }
        }
        let ps = Self {
            inner: Arc::new(PointSetData {
                points,
                dim,
                window,
                generator,
                seed,
                index: OnceLock::new(),
            }),
        };
        if let Some((a, b)) = ps.coincident_pair() {
            return Err(Error::invalid(format!(
                "not uniformly discrete: points {a} and {b} coincide"
            )));
        }
        Ok(ps)
    }

    pub fn len(&self) -> usize {
        self.inner.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn window(&self) -> &Window {
        &self.inner.window
    }

    pub fn generator(&self) -> &Generator {
        &self.inner.generator
    }

    pub fn seed(&self) -> Option<u64> {
        self.inner.seed
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.inner.points[id]
    }

    pub fn points(&self) -> &[Point] {
        &self.inner.points
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        distance(self.point(a), self.point(b))
    }

    /// Spatial index; built on first use.
    pub fn index(&self) -> &GridIndex {
        self.inner.index.get_or_init(|| {
            let n = self.len().max(1) as f64;
            let typical = (self.window().volume() / n).powf(1.0 / self.dim() as f64);
            GridIndex::new(self.inner.points.iter().map(|p| p.coords()), typical.max(1e-9))
        })
    }

    /// Ids of points inside `w`, ascending.
    pub fn ids_in(&self, w: &Window) -> Vec<usize> {
        (0..self.len()).filter(|&i| w.contains(self.point(i))).collect()
    }

    /// Id of the point nearest to `p`.
    pub fn nearest_id(&self, p: &[f64]) -> usize {
        self.index().nearest(p).expect("point set is empty").0
    }

    fn identity_tol(&self) -> f64 {
        IDENTITY_TOL * self.window().half_width.max(1.0)
    }

    fn coincident_pair(&self) -> Option<(usize, usize)> {
        let tol = self.identity_tol();
        let idx = self.index();
        (0..self.len()).find_map(|a| {
            idx.within(self.point(a), tol)
                .into_iter()
                .find(|&b| b > a)
                .map(|b| (a, b))
        })
    }
}

/// Packing radius `r` and covering radius `R` (named `big_r`). Estimated
/// values carry the probe resolution used for `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeloneParams {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(default)]
    pub resolution: f64,
}

impl DeloneParams {
    pub fn new(r: f64, big_r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= big_r && big_r.is_finite()) {
            return Err(Error::invalid(format!("need 0 < r <= R, got r={r}, R={big_r}")));
        }
        Ok(Self { r, big_r, resolution: 0.0 })
    }
}

/// All lattice points of `kind` (anchored at the origin) inside `window`, in
/// row-major order (first coordinate fastest).
pub fn generate_lattice(kind: LatticeKind, spacing: f64, window: &Window) -> Result<PointSet> {
    let points = lattice_points(kind, spacing, window)?;
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "window contains {} lattice point(s), need at least 2",
            points.len()
        )));
    }
    PointSet::from_points(points, window.clone(), Generator::Lattice { lattice: kind, spacing }, None)
}

fn lattice_points(kind: LatticeKind, spacing: f64, window: &Window) -> Result<Vec<Point>> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
    }
    let dim = window.dim();
    let c = window.center.coords();
    let hw = window.half_width;
    let slack = window.slack();
    let mut out = Vec::new();
    match kind {
        LatticeKind::Square => {
            let lo: Vec<i64> = c.iter().map(|x| ((x - hw - slack) / spacing).ceil() as i64).collect();
            let hi: Vec<i64> = c.iter().map(|x| ((x + hw + slack) / spacing).floor() as i64).collect();
            if lo.iter().zip(&hi).any(|(l, h)| l > h) {
                return Ok(out);
            }
            let mut cur = lo.clone();
            'outer: loop {
                let p: Vec<f64> = cur.iter().map(|&k| k as f64 * spacing).collect();
                if window.contains(&p) {
                    out.push(Point(p));
                }
                for i in 0..dim {
                    if cur[i] < hi[i] {
                        cur[i] += 1;
                        continue 'outer;
                    }
                    cur[i] = lo[i];
                }
                break;
            }
        }
        LatticeKind::Triangular => {
            if dim != 2 {
                return Err(Error::Unsupported(format!(
                    "triangular lattice is planar, window has dimension {dim}"
                )));
            }
            let row_h = spacing * 3f64.sqrt() / 2.0;
            let j_lo = ((c[1] - hw - slack) / row_h).ceil() as i64;
            let j_hi = ((c[1] + hw + slack) / row_h).floor() as i64;
            for j in j_lo..=j_hi {
                let y = j as f64 * row_h;
                let shift = j as f64 * spacing / 2.0;
                let i_lo = ((c[0] - hw - slack - shift) / spacing).ceil() as i64;
                let i_hi = ((c[0] + hw + slack - shift) / spacing).floor() as i64;
                for i in i_lo..=i_hi {
                    let p = vec![i as f64 * spacing + shift, y];
                    if window.contains(&p) {
                        out.push(Point(p));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Lattice with every point displaced by an independent uniform vector from
/// the closed ball of radius `delta`. Displaced points leaving the window are
/// dropped. The result is an `(r - delta, R + delta)`-Delone set.
pub fn generate_jittered_lattice(
    kind: LatticeKind,
    spacing: f64,
    window: &Window,
    delta: f64,
    seed: u64,
) -> Result<PointSet> {
    if !(delta >= 0.0 && delta < spacing / 2.0) {
        return Err(Error::invalid(format!(
            "jitter delta = {delta} must lie in [0, spacing/2 = {}) for the result to be Delone",
            spacing / 2.0
        )));
    }
    let base = lattice_points(kind, spacing, window)?;
    let dim = window.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(base.len());
    for p in base {
        let disp = uniform_in_ball(&mut rng, dim, delta);
        let q: Vec<f64> = p.iter().zip(&disp).map(|(a, b)| a + b).collect();
        if window.contains(&q) {
            points.push(Point(q));
        }
    }
    if points.len() < 2 {
        return Err(Error::invalid("window contains fewer than 2 points"));
    }
    PointSet::from_points(
        points,
        window.clone(),
        Generator::Jittered { lattice: kind, spacing, delta },
        Some(seed),
    )
}

fn uniform_in_ball(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
    if radius == 0.0 {
        return vec![0.0; dim];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return v.into_iter().map(|x| x * radius).collect();
        }
    }
}

/// Vertex set of a Penrose rhombus tiling filling the square window of
/// half-width `patch_radius` around the origin (de Bruijn pentagrid dual).
/// Edge length is 1.
pub fn generate_penrose(patch_radius: f64, offsets: [f64; 5], seed: u64) -> Result<PointSet> {
    Ok(penrose_patch(patch_radius, offsets, seed)?.pointset)
}

/// Estimate `(r, R)` on the margin-shrunk window.
///
/// `r` is half the minimal distance from a point in the shrunk window to any
/// other point (exact). `R` is the largest distance from a probe on a grid
/// of pitch at most `r/4` over the shrunk window to the nearest point; it is
/// a lower estimate of the covering radius with error at most the pitch,
/// which is returned as `resolution`.
pub fn estimate_delone_params(ps: &PointSet, margin: f64) -> Result<DeloneParams> {
    let inner = ps.window().shrink(margin)?;
    let interior = ps.ids_in(&inner);
    if interior.len() < 2 || ps.len() < 2 {
        return Err(Error::invalid(format!(
            "only {} point(s) in the margin-shrunk window, need at least 2",
            interior.len()
        )));
    }
    let idx = ps.index();
    let min_dist = interior
        .par_iter()
        .map(|&a| nearest_other(ps, idx, a))
        .reduce(|| f64::INFINITY, f64::min);
    if min_dist < ps.identity_tol() {
        return Err(Error::invalid("not uniformly discrete: coincident points"));
    }
    let r = min_dist / 2.0;
    let (big_r, pitch) = probe_covering(ps, &inner, r / 4.0);
    Ok(DeloneParams { r, big_r, resolution: pitch })
}

fn nearest_other(ps: &PointSet, idx: &GridIndex, a: usize) -> f64 {
    let p = ps.point(a);
    let mut radius = idx.cell_size();
    loop {
        let d = idx
            .within(p, radius)
            .into_iter()
            .filter(|&b| b != a)
            .map(|b| ps.distance(a, b))
            .fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            return d;
        }
        radius *= 2.0;
    }
}

/// Regular probe grid over `w` with pitch at most `max_pitch`.
pub(crate) fn probe_grid(w: &Window, max_pitch: f64) -> (Vec<Vec<f64>>, f64) {
    let dim = w.dim();
    let steps = ((2.0 * w.half_width / max_pitch).ceil() as usize).max(1);
    let pitch = 2.0 * w.half_width / steps as f64;
    let total = (steps + 1).pow(dim as u32);
    let probes = (0..total)
        .map(|mut k| {
            (0..dim)
                .map(|i| {
                    let j = k % (steps + 1);
                    k /= steps + 1;
                    w.center[i] - w.half_width + j as f64 * pitch
                })
                .collect()
        })
        .collect();
    (probes, pitch)
}

fn probe_covering(ps: &PointSet, w: &Window, max_pitch: f64) -> (f64, f64) {
    let (probes, pitch) = probe_grid(w, max_pitch);
    let idx = ps.index();
    let worst = probes
        .par_iter()
        .map(|q| idx.nearest(q).map_or(f64::INFINITY, |(_, d)| d))
        .reduce(|| 0.0, f64::max);
    (worst, pitch)
}

/// Outcome of [`verify_delone`]. Empty violation lists mean the set is
/// `(r, R)`-Delone on the shrunk window up to the probe pitch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeloneReport {
    pub params: DeloneParams,
    pub margin: f64,
    pub probe_pitch: f64,
    /// Pairs `(a, b, distance)` with `a < b` closer than `2r`.
    pub close_pairs: Vec<(usize, usize, f64)>,
    /// Probe points farther than `R` from the set, with that distance.
    pub uncovered: Vec<(Vec<f64>, f64)>,
}

impl DeloneReport {
    pub fn passed(&self) -> bool {
        self.close_pairs.is_empty() && self.uncovered.is_empty()
    }
}

pub fn verify_delone(ps: &PointSet, params: &DeloneParams, margin: f64) -> Result<DeloneReport> {
    let inner = ps.window().shrink(margin)?;
    let tol = ps.identity_tol();
    let idx = ps.index();
    let interior = ps.ids_in(&inner);
    let mut close_pairs: Vec<(usize, usize, f64)> = interior
        .par_iter()
        .flat_map_iter(|&a| {
            idx.within(ps.point(a), 2.0 * params.r)
                .into_iter()
                .filter(move |&b| b != a)
                .map(move |b| (a.min(b), a.max(b), ps.distance(a, b)))
                .filter(move |&(_, _, d)| d < 2.0 * params.r - tol)
                .collect::<Vec<_>>()
        })
        .collect();
    close_pairs.sort_by_key(|p| (p.0, p.1));
    close_pairs.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);

    let (probes, pitch) = probe_grid(&inner, params.r / 4.0);
    let uncovered = probes
        .into_par_iter()
        .filter_map(|q| {
            let d = idx.nearest(&q).map_or(f64::INFINITY, |(_, d)| d);
            (d > params.big_r + tol).then_some((q, d))
        })
        .collect();
    Ok(DeloneReport { params: *params, margin, probe_pitch: pitch, close_pairs, uncovered })
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn origin_window(hw: f64) -> Window {
        Window::new(vec![0.0, 0.0], hw).unwrap()
    }

    #[test]
    fn square_lattice_in_unit_window_has_nine_points() {
        let ps = generate_lattice(LatticeKind::Square, 1.0, &origin_window(1.0)).unwrap();
        assert_eq!(ps.len(), 9);
        let mut got: Vec<(i64, i64)> =
            ps.points().iter().map(|p| (p[0] as i64, p[1] as i64)).collect();
        got.sort();
        let mut want = Vec::new();
        for x in -1..=1 {
            for y in -1..=1 {
                want.push((x, y));
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn tiny_window_is_rejected() {
        let w = origin_window(0.3);
        assert!(generate_lattice(LatticeKind::Square, 1.0, &w).is_err());
    }

    #[test]
    fn lattice_params_match_geometry() {
        let sq = LatticeKind::Square.delone_params(1.0, 2);
        assert_eq!(sq.r, 0.5);
        assert!((sq.big_r - SQRT_2 / 2.0).abs() < 1e-15);
        let tri = LatticeKind::Triangular.delone_params(1.0, 2);
        assert!((tri.big_r - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn estimate_on_square_lattice() {
        let ps = generate_lattice(LatticeKind::Square, 1.0, &origin_window(10.0)).unwrap();
        let est = estimate_delone_params(&ps, 2.0).unwrap();
        assert_eq!(est.r, 0.5);
        assert!(est.big_r <= SQRT_2 / 2.0 + 1e-15);
        assert!(est.big_r >= SQRT_2 / 2.0 - est.resolution);
        assert!(est.resolution <= est.r / 4.0);
    }

    #[test]
    fn estimate_on_triangular_lattice_confirms_circumradius() {
        let ps = generate_lattice(LatticeKind::Triangular, 1.0, &origin_window(8.0)).unwrap();
        let est = estimate_delone_params(&ps, 2.0).unwrap();
        assert!((est.r - 0.5).abs() < 1e-12);
        let exact = 1.0 / 3f64.sqrt();
        assert!(est.big_r <= exact + 1e-12);
        assert!(est.big_r >= exact - est.resolution);
    }

    #[test]
    fn duplicated_point_is_not_uniformly_discrete() {
        let w = origin_window(2.0);
        let pts = vec![
            Point::new(vec![0.0, 0.0]).unwrap(),
            Point::new(vec![1.0, 0.0]).unwrap(),
            Point::new(vec![0.0, 0.0]).unwrap(),
        ];
        let err = PointSet::from_points(pts, w, Generator::External { description: "dup".into() }, None)
            .unwrap_err();
        assert!(err.to_string().contains("not uniformly discrete"), "{err}");
    }

    #[test]
    fn zero_jitter_equals_lattice() {
        let w = origin_window(4.0);
        let a = generate_lattice(LatticeKind::Square, 1.0, &w).unwrap();
        let b = generate_jittered_lattice(LatticeKind::Square, 1.0, &w, 0.0, 3).unwrap();
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn jitter_is_reproducible_and_bounded() {
        let w = origin_window(6.0);
        let a = generate_jittered_lattice(LatticeKind::Square, 1.0, &w, 0.2, 7).unwrap();
        let b = generate_jittered_lattice(LatticeKind::Square, 1.0, &w, 0.2, 7).unwrap();
        assert_eq!(a.points(), b.points());
        // Exhaustive pair scan.
        let mut min = f64::INFINITY;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                min = min.min(a.distance(i, j));
            }
        }
        assert!(min >= 0.6 - 1e-12, "min distance {min}");
    }

    #[test]
    fn jitter_delta_too_large() {
        let err = generate_jittered_lattice(LatticeKind::Square, 1.0, &origin_window(3.0), 0.5, 1)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn jittered_estimate_within_bounds() {
        let ps = generate_jittered_lattice(LatticeKind::Square, 1.0, &origin_window(10.0), 0.2, 11)
            .unwrap();
        let est = estimate_delone_params(&ps, 2.0).unwrap();
        assert!(est.r >= 0.3 - 1e-12);
        assert!(est.big_r <= SQRT_2 / 2.0 + 0.2 + est.resolution);
    }

    #[test]
    fn verify_square_lattice() {
        let ps = generate_lattice(LatticeKind::Square, 1.0, &origin_window(5.0)).unwrap();
        let ok = verify_delone(&ps, &DeloneParams::new(0.5, 0.71).unwrap(), 1.0).unwrap();
        assert!(ok.passed());

        let packed = verify_delone(&ps, &DeloneParams::new(0.6, 0.71).unwrap(), 1.0).unwrap();
        assert!(packed.uncovered.is_empty());
        // Every axis-adjacent pair touching the shrunk window [-4, 4]^2.
        let inner = ps.window().shrink(1.0).unwrap();
        let mut expected = 0;
        for a in 0..ps.len() {
            for b in a + 1..ps.len() {
                let touches = inner.contains(ps.point(a)) || inner.contains(ps.point(b));
                if touches && (ps.distance(a, b) - 1.0).abs() < 1e-12 {
                    expected += 1;
                }
            }
        }
        assert_eq!(packed.close_pairs.len(), expected);
        assert!(packed.close_pairs.iter().all(|&(_, _, d)| (d - 1.0).abs() < 1e-12));

        let sparse = verify_delone(&ps, &DeloneParams::new(0.5, 0.5).unwrap(), 1.0).unwrap();
        assert!(sparse.close_pairs.is_empty());
        assert!(!sparse.uncovered.is_empty());
        assert!(sparse.uncovered.iter().all(|(_, d)| *d > 0.5));
        // The cell centers are the worst probes.
        let worst = sparse.uncovered.iter().map(|(_, d)| *d).fold(0.0, f64::max);
        assert!((worst - SQRT_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-15);
        assert_eq!(unit_ball_volume(1), 2.0);
    }

    #[test]
    fn hypercubic_lattice_in_three_dimensions() {
        let w = Window::new(vec![0.0; 3], 1.0).unwrap();
        let ps = generate_lattice(LatticeKind::Square, 1.0, &w).unwrap();
        assert_eq!(ps.len(), 27);
        assert!(generate_lattice(LatticeKind::Triangular, 1.0, &w).is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn jittered_lattice_is_delone(seed in 0u64..10_000, delta in 0.0f64..0.45) {
            let w = Window::new(vec![0.0, 0.0], 5.0).unwrap();
            let ps = generate_jittered_lattice(LatticeKind::Square, 1.0, &w, delta, seed).unwrap();
            let base = LatticeKind::Square.delone_params(1.0, 2);
            let params = DeloneParams::new(base.r - delta, base.big_r + delta).unwrap();
            prop_assert!(verify_delone(&ps, &params, 1.5).unwrap().passed());
        }
    }
}
