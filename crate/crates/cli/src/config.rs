//! Experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use delone::heat_discrete::{Boundary, Method};
use delone::heat_metric::MetricMethod;
use delone::pointset::{DeloneParams, LatticeKind, Window};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Seed for every stochastic step; `--seed` overrides it.
    pub seed: u64,
    pub generator: GeneratorSpec,
    /// Known `(r, R)`; estimated from the points when absent and not exact.
    #[serde(default)]
    pub params: Option<DeloneParams>,
    /// Distance from the window boundary inside which results are trusted.
    pub margin: f64,
    pub relation: RelationSpec,
    #[serde(default)]
    pub operator: OperatorSpec,
    #[serde(default)]
    pub heat: Option<HeatSpec>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    /// Used when `--out` is not given; relative to the config file.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Lattice { lattice: LatticeKind, spacing: f64, window: Window },
    Jittered { lattice: LatticeKind, spacing: f64, delta: f64, window: Window },
    Penrose { patch_radius: f64, offsets: [f64; 5] },
    /// Points CSV plus metadata sidecar, relative to the config file.
    File { points: PathBuf, meta: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RelationSpec {
    Voronoi {
        #[serde(default = "default_facet_eps")]
        facet_eps: f64,
    },
    Canonical,
    Max,
    /// Edge list `id_a,id_b[,...]` with its length bound `S`.
    Ingest { edges: PathBuf, parameter: f64 },
}

fn default_facet_eps() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexMeasure {
    #[default]
    Unit,
    /// `h(x) = |V_x|`, planar point sets only.
    CellVolume,
}

/// `h` and `b(x, y) = d(x, y)^l`.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default)]
    pub h: VertexMeasure,
    #[serde(default)]
    pub l: f64,
}

impl WeightSpec {
    pub fn is_unit(&self) -> bool {
        self.h == VertexMeasure::Unit && self.l == 0.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    /// Boundary mode of the exported operator; kernels always carry both.
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default)]
    pub weights: WeightSpec,
}

fn default_boundary() -> Boundary {
    Boundary::Neumann
}

impl Default for OperatorSpec {
    fn default() -> Self {
        Self { boundary: Boundary::Neumann, weights: WeightSpec::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSpec {
    pub times: Vec<f64>,
    pub sources: usize,
    /// Sources are drawn from the centered square of this half-width.
    pub source_half_width: f64,
    pub max_hops: usize,
    #[serde(default = "default_method")]
    pub method: Method,
}

fn default_method() -> Method {
    Method::Auto
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub dmax: f64,
    pub times: Vec<f64>,
    pub sources: usize,
    pub source_half_width: f64,
    pub max_dist: f64,
    #[serde(default = "default_metric_method")]
    pub method: MetricMethod,
    #[serde(default = "yes")]
    pub certify: bool,
}

fn default_metric_method() -> MetricMethod {
    MetricMethod::Auto
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "yes")]
    pub axioms: bool,
    #[serde(default = "yes")]
    pub vd: bool,
    #[serde(default = "yes")]
    pub pi: bool,
    #[serde(default = "yes")]
    pub ge: bool,
    #[serde(default = "yes")]
    pub equivalence: bool,
    /// Scale range `L`; doubling radii must lie in `(0, L/2]`.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_s_grid")]
    pub s_grid: Vec<f64>,
    #[serde(default = "default_centers")]
    pub centers: usize,
    pub center_half_width: f64,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_n2")]
    pub n2_samples: usize,
    /// Mesh spacing for metric Poincaré balls.
    #[serde(default = "default_pi_dmax")]
    pub pi_dmax: f64,
    #[serde(default = "default_spread")]
    pub envelope_spread: f64,
    #[serde(default = "default_certificate_tol")]
    pub certificate_tol: f64,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

fn default_scale() -> f64 {
    8.0
}
fn default_s_grid() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0]
}
fn default_centers() -> usize {
    20
}
fn default_pairs() -> usize {
    400
}
fn default_n2() -> usize {
    500
}
fn default_pi_dmax() -> f64 {
    0.25
}
fn default_spread() -> f64 {
    4.0
}
fn default_certificate_tol() -> f64 {
    1e-6
}
fn default_residual_tol() -> f64 {
    1e-8
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            axioms: true,
            vd: true,
            pi: true,
            ge: true,
            equivalence: true,
            scale: default_scale(),
            s_grid: default_s_grid(),
            centers: default_centers(),
            center_half_width: 2.0,
            pairs: default_pairs(),
            n2_samples: default_n2(),
            pi_dmax: default_pi_dmax(),
            envelope_spread: default_spread(),
            certificate_tol: default_certificate_tol(),
            residual_tol: default_residual_tol(),
        }
    }
}

/// Input problems, reported with exit status 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

impl ExperimentConfig {
    /// Reads and validates a config; relative paths are resolved against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| input_error(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| input_error(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate().map_err(|e| input_error(format!("invalid config {}: {e:#}", path.display())))?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let GeneratorSpec::File { points, meta } = &mut self.generator {
            fix(points);
            fix(meta);
        }
        if let RelationSpec::Ingest { edges, .. } = &mut self.relation {
            fix(edges);
        }
        if let Some(o) = &mut self.output {
            fix(o);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            bail!("margin must be positive, got {}", self.margin);
        }
        let mut files: Vec<&Path> = Vec::new();
        if let GeneratorSpec::File { points, meta } = &self.generator {
            files.push(points);
            files.push(meta);
        }
        if let RelationSpec::Ingest { edges, parameter } = &self.relation {
            files.push(edges);
            if !(*parameter > 0.0) {
                bail!("ingested relation parameter must be positive, got {parameter}");
            }
        }
        for f in files {
            if !f.is_file() {
                bail!("referenced file {} does not exist", f.display());
            }
        }
        if let Some(h) = &self.heat {
            check_times(&h.times).context("heat.times")?;
            if h.sources == 0 {
                bail!("heat.sources must be at least 1");
            }
        }
        if let Some(m) = &self.metric {
            check_times(&m.times).context("metric.times")?;
            if !(m.dmax > 0.0) || m.sources == 0 || !(m.max_dist > 0.0) {
                bail!("metric needs dmax > 0, max_dist > 0 and at least one source");
            }
        }
        let a = &self.analysis;
        if a.centers == 0 || a.s_grid.is_empty() {
            bail!("analysis needs at least one center and one radius");
        }
        if let Some(s) = a.s_grid.iter().find(|s| !(**s > 0.0 && **s <= a.scale / 2.0)) {
            bail!("analysis radius {s} outside (0, scale/2] with scale = {}", a.scale);
        }
        Ok(())
    }
}

fn check_times(t: &[f64]) -> Result<()> {
    if t.is_empty() {
        bail!("time grid is empty");
    }
    if let Some(v) = t.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        bail!("times must be positive, got {v}");
    }
    Ok(())
}
