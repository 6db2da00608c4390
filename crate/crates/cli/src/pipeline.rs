//! Pipeline stages with file handoff through the output directory.

use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::ValueEnum;
use delone::analysis::{
    annotate_discrete, annotate_metric, discrete_raw_samples, gaussian_envelope_fit, metric_raw_samples,
    poincare_scan, sample_centers, volume_doubling_scan, DoublingReport, EnvelopeFit, PoincareReport, RawSample,
    SpaceTag,
};
use delone::graphs::{ball_count_c, equivalence_constants, CombinatorialGraph, EquivalenceReport, MetricGraph, Space};
use delone::heat_discrete::{assemble, Boundary, Weights};
use delone::heat_metric::{mesh_window, GraphMesh};
use delone::io::{self, KernelRow, RelationMeta};
use delone::neighbors::{
    build_canonical_relation, build_max_relation, build_voronoi_relation, degree_stats, ingest_relation,
    validate_axioms, AxiomReport, DegreeStats, NeighborRelation, RelationKind,
};
use delone::pointset::{
    estimate_delone_params, generate_jittered_lattice, generate_lattice, generate_penrose, verify_delone,
    DeloneParams, DeloneReport, PointSet, Window,
};
use delone::tiling::{facet_adjacency, voronoi_cells_2d, TilingSystem};
use serde::{Deserialize, Serialize};

use crate::config::{input_error, ExperimentConfig, GeneratorSpec, RelationSpec, VertexMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Generate,
    Relation,
    Validate,
    Heat,
    Analyze,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Generate, Stage::Relation, Stage::Validate, Stage::Heat, Stage::Analyze, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Relation => "relation",
            Stage::Validate => "validate",
            Stage::Heat => "heat",
            Stage::Analyze => "analyze",
            Stage::Report => "report",
        }
    }
}

pub const POINTS: &str = "points.csv";
pub const POINTS_META: &str = "points.json";
pub const DELONE: &str = "delone.json";
pub const EDGES: &str = "edges.csv";
pub const RELATION: &str = "relation.json";
pub const CELLS: &str = "cells.json";
pub const ADJACENCY: &str = "adjacency.csv";
pub const AXIOMS: &str = "axioms.json";
pub const DEGREE: &str = "degree.json";
pub const OPERATOR: &str = "operator.csv";
pub const KERNEL: &str = "kernel.csv";
pub const MESH_NODES: &str = "mesh_nodes.csv";
pub const METRIC_KERNEL: &str = "metric_kernel.csv";
pub const DOUBLING: &str = "doubling.json";
pub const BALL_GROWTH: &str = "ball_growth.csv";
pub const POINCARE: &str = "poincare.json";
pub const GE_DISCRETE: &str = "ge_discrete.json";
pub const GE_METRIC: &str = "ge_metric.json";
pub const SCATTER_DISCRETE: &str = "scatter_discrete.csv";
pub const SCATTER_METRIC: &str = "scatter_metric.csv";
pub const EQUIVALENCE: &str = "equivalence.json";
pub const REPORT: &str = "report.json";
pub const PROVENANCE: &str = "provenance.json";

/// One assertion with its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub stage: Stage,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(stage: Stage, name: &str, passed: bool, detail: String) -> Self {
        Self { stage, name: name.into(), passed, detail }
    }
}

/// Analysis toggles after command-line narrowing.
#[derive(Debug, Clone, Copy)]
pub struct Toggles {
    pub vd: bool,
    pub pi: bool,
    pub ge: bool,
    pub equivalence: bool,
}

pub struct Pipeline {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub toggles: Toggles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingPair {
    pub discrete: DoublingReport,
    pub metric: DoublingReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoincarePair {
    pub discrete: PoincareReport,
    pub metric: PoincareReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalReport {
    pub name: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn kind_name(k: RelationKind) -> &'static str {
    match k {
        RelationKind::Voronoi => "voronoi",
        RelationKind::Canonical => "canonical",
        RelationKind::Max => "max",
        RelationKind::Ingested => "ingested",
    }
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig, out: PathBuf) -> Self {
        let a = &cfg.analysis;
        let toggles = Toggles { vd: a.vd, pi: a.pi, ge: a.ge, equivalence: a.equivalence };
        Self { cfg, out, toggles }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Path of an upstream artifact, or an input error naming both stages.
    fn upstream(&self, name: &str, producer: Stage, consumer: Stage) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(input_error(format!(
                "stage `{}` needs {name} from stage `{}`, not found in {}",
                consumer.name(),
                producer.name(),
                self.out.display()
            )))
        }
    }

    pub fn run_stage(&self, stage: Stage) -> Result<Vec<Check>> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| input_error(format!("cannot create output directory {}: {e}", self.out.display())))?;
        match stage {
            Stage::Generate => self.generate(),
            Stage::Relation => self.relation(),
            Stage::Validate => self.validate(),
            Stage::Heat => self.heat(),
            Stage::Analyze => self.analyze(),
            Stage::Report => self.report(),
        }
        .with_context(|| format!("stage `{}`", stage.name()))
    }

    fn generate(&self) -> Result<Vec<Check>> {
        let seed = self.cfg.seed;
        let (ps, known) = match &self.cfg.generator {
            GeneratorSpec::Lattice { lattice, spacing, window } => {
                let ps = generate_lattice(*lattice, *spacing, window)?;
                (ps, Some(lattice.delone_params(*spacing, window.dim())))
            }
            GeneratorSpec::Jittered { lattice, spacing, delta, window } => {
                let ps = generate_jittered_lattice(*lattice, *spacing, window, *delta, seed)?;
                let base = lattice.delone_params(*spacing, window.dim());
                (ps, Some(DeloneParams::new(base.r - delta, base.big_r + delta)?))
            }
            GeneratorSpec::Penrose { patch_radius, offsets } => (generate_penrose(*patch_radius, *offsets, seed)?, None),
            GeneratorSpec::File { points, meta } => io::read_points(points, meta)?,
        };
        let params = match self.cfg.params.or(known) {
            Some(p) => p,
            None => estimate_delone_params(&ps, self.cfg.margin)?,
        };
        io::write_points(&self.path(POINTS), &self.path(POINTS_META), &ps, Some(&params))?;
        let rep = verify_delone(&ps, &params, self.cfg.margin)?;
        io::write_json(&self.path(DELONE), &rep)?;
        Ok(vec![delone_check(&rep, ps.len())])
    }

    fn load_points(&self, consumer: Stage) -> Result<(PointSet, DeloneParams)> {
        let csv = self.upstream(POINTS, Stage::Generate, consumer)?;
        let meta = self.upstream(POINTS_META, Stage::Generate, consumer)?;
        let (ps, params) = io::read_points(&csv, &meta)?;
        let params = params.ok_or_else(|| input_error(format!("{POINTS_META} carries no Delone parameters")))?;
        Ok((ps, params))
    }

    fn tiling(&self, ps: &PointSet, params: &DeloneParams) -> Result<TilingSystem> {
        Ok(voronoi_cells_2d(ps, params, self.cfg.margin)?)
    }

    fn relation(&self) -> Result<Vec<Check>> {
        let (ps, params) = self.load_points(Stage::Relation)?;
        let rel = match &self.cfg.relation {
            RelationSpec::Voronoi { facet_eps } => {
                let ts = self.tiling(&ps, &params)?;
                io::write_cells(&self.path(CELLS), &ts)?;
                io::write_adjacency(&self.path(ADJACENCY), &facet_adjacency(&ts, *facet_eps))?;
                build_voronoi_relation(&ts, *facet_eps)
            }
            RelationSpec::Canonical => {
                let ts = self.tiling(&ps, &params)?;
                io::write_cells(&self.path(CELLS), &ts)?;
                build_canonical_relation(&ts)
            }
            RelationSpec::Max => build_max_relation(&ps, params.big_r),
            RelationSpec::Ingest { edges, parameter } => ingest_relation(&ps, &io::read_edges(edges)?, *parameter)?,
        };
        io::write_edges(&self.path(EDGES), &self.path(RELATION), &rel)?;
        Ok(vec![Check::new(
            Stage::Relation,
            "relation",
            !rel.is_empty(),
            format!("{} relation with {} pairs, S = {}", kind_name(rel.kind()), rel.pairs().len(), rel.parameter()),
        )])
    }

    fn load_relation(&self, consumer: Stage) -> Result<(NeighborRelation, DeloneParams)> {
        let (ps, params) = self.load_points(consumer)?;
        let edges = self.upstream(EDGES, Stage::Relation, consumer)?;
        let meta: RelationMeta = io::read_json(&self.upstream(RELATION, Stage::Relation, consumer)?)?;
        let rel = ingest_relation(&ps, &io::read_edges(&edges)?, meta.parameter)?;
        Ok((rel, params))
    }

    fn validate(&self) -> Result<Vec<Check>> {
        let (rel, params) = self.load_relation(Stage::Validate)?;
        let a = &self.cfg.analysis;
        let mut checks = Vec::new();
        let stats = degree_stats(&rel, params.r, self.cfg.margin)?;
        io::write_json(&self.path(DEGREE), &stats)?;
        checks.push(degree_check(&stats));
        if a.axioms {
            let rep = validate_axioms(&rel, self.cfg.margin, a.n2_samples, self.cfg.seed)?;
            io::write_json(&self.path(AXIOMS), &rep)?;
            checks.push(axioms_check(&rep));
        }
        Ok(checks)
    }

    fn weights(&self, rel: &NeighborRelation, params: &DeloneParams) -> Result<Option<Weights>> {
        let w = self.cfg.operator.weights;
        if w.is_unit() {
            return Ok(None);
        }
        Ok(Some(match w.h {
            VertexMeasure::CellVolume => Weights::cell_volume(&self.tiling(rel.pointset(), params)?, rel, w.l),
            VertexMeasure::Unit => {
                let ps = rel.pointset();
                Weights {
                    h: vec![1.0; ps.len()],
                    b: rel.pairs().iter().map(|&(a, b)| ps.distance(a, b).powf(w.l)).collect(),
                }
            }
        }))
    }

    fn operator_window(&self, ps: &PointSet) -> Result<Window> {
        Ok(ps.window().shrink(self.cfg.margin)?)
    }

    fn centered(&self, ps: &PointSet, half_width: f64) -> Result<Window> {
        Ok(Window::new(ps.window().center.coords().to_vec(), half_width)?)
    }

    fn metric_mesh(&self, graph: &MetricGraph, dmax: f64) -> Result<GraphMesh> {
        Ok(mesh_window(graph, &self.operator_window(graph.pointset())?, dmax, Boundary::Neumann)?)
    }

    fn heat(&self) -> Result<Vec<Check>> {
        let (rel, params) = self.load_relation(Stage::Heat)?;
        let ps = rel.pointset().clone();
        let window = self.operator_window(&ps)?;
        let mut checks = Vec::new();
        if let Some(h) = &self.cfg.heat {
            let weights = self.weights(&rel, &params)?;
            let op = assemble(&rel, &window, self.cfg.operator.boundary, weights.as_ref())?;
            io::write_triples(&self.path(OPERATOR), &op.triples())?;
            let sources = sample_centers(&ps, &self.centered(&ps, h.source_half_width)?, h.sources, self.cfg.seed)?;
            let raw = discrete_raw_samples(&rel, &window, weights.as_ref(), &sources, h.max_hops, &h.times, h.method)?;
            let rows: Vec<KernelRow> = raw
                .iter()
                .map(|r| KernelRow {
                    x_id: r.x,
                    y_id: r.y,
                    t: r.t,
                    p: r.p,
                    mode: "neumann".into(),
                    certificate: r.certificate,
                    regime: true,
                })
                .collect();
            let annotated = annotate_discrete(&rel, weights.as_ref().map(|w| w.h.as_slice()), &raw)?;
            let rows: Vec<KernelRow> = rows
                .into_iter()
                .zip(&annotated)
                .map(|(row, s)| KernelRow { regime: s.in_discrete_regime(), ..row })
                .collect();
            io::write_kernel(&self.path(KERNEL), &rows)?;
            checks.push(kernel_check(Stage::Heat, "discrete_kernel", &rows, self.cfg.analysis.certificate_tol));
        }
        if let Some(m) = &self.cfg.metric {
            let graph = MetricGraph::new(&rel);
            let mesh = self.metric_mesh(&graph, m.dmax)?;
            io::write_mesh_nodes(&self.path(MESH_NODES), &mesh.node_rows(&graph))?;
            let sources = sample_centers(&ps, &self.centered(&ps, m.source_half_width)?, m.sources, self.cfg.seed)?;
            let raw = metric_raw_samples(&graph, &window, m.dmax, &sources, m.max_dist, &m.times, m.method, m.certify)?;
            let node = |v: usize| mesh.vertex_node(v).expect("sampled vertices are meshed");
            let rows: Vec<KernelRow> = raw
                .iter()
                .map(|r| KernelRow {
                    x_id: node(r.x),
                    y_id: node(r.y),
                    t: r.t,
                    p: r.p,
                    mode: "neumann".into(),
                    certificate: r.certificate,
                    regime: r.t >= m.dmax * m.dmax,
                })
                .collect();
            io::write_kernel(&self.path(METRIC_KERNEL), &rows)?;
            checks.push(kernel_check(Stage::Heat, "metric_kernel", &rows, self.cfg.analysis.certificate_tol));
        }
        Ok(checks)
    }

    fn analyze(&self) -> Result<Vec<Check>> {
        let (rel, params) = self.load_relation(Stage::Analyze)?;
        let ps = rel.pointset().clone();
        let a = &self.cfg.analysis;
        let g = CombinatorialGraph::new(&rel);
        let mg = MetricGraph::new(&rel);
        let mut checks = Vec::new();
        let centers = sample_centers(&ps, &self.centered(&ps, a.center_half_width)?, a.centers, self.cfg.seed)?;
        if self.toggles.vd {
            let pair = DoublingPair {
                discrete: volume_doubling_scan(Space::Discrete(&g), &centers, &a.s_grid, a.scale)?,
                metric: volume_doubling_scan(Space::Metric(&mg), &centers, &a.s_grid, a.scale)?,
            };
            io::write_json(&self.path(DOUBLING), &pair)?;
            let x = ps.nearest_id(ps.window().center.coords());
            let growth = (0..=(2.0 * a.scale).floor() as usize)
                .map(|s| Ok((s as f64, ball_count_c(Space::Discrete(&g), x, s as f64)?.count as f64)))
                .collect::<Result<Vec<_>>>()?;
            io::write_columns(&self.path(BALL_GROWTH), ["s", "mu"], &growth)?;
            checks.extend(doubling_checks(&pair));
        }
        if self.toggles.pi {
            let pair = PoincarePair {
                discrete: poincare_scan(Space::Discrete(&g), &centers, &a.s_grid, a.pi_dmax)?,
                metric: poincare_scan(Space::Metric(&mg), &centers, &a.s_grid, a.pi_dmax)?,
            };
            io::write_json(&self.path(POINCARE), &pair)?;
            checks.extend(poincare_checks(&pair, a.residual_tol));
        }
        if self.toggles.ge {
            if self.cfg.heat.is_some() {
                let rows = io::read_kernel(&self.upstream(KERNEL, Stage::Heat, Stage::Analyze)?)?;
                let weights = self.weights(&rel, &params)?;
                let raw: Vec<RawSample> = rows.iter().map(raw_sample).collect();
                let samples = annotate_discrete(&rel, weights.as_ref().map(|w| w.h.as_slice()), &raw)?;
                let fit = gaussian_envelope_fit(&samples, SpaceTag::Discrete, None, a.certificate_tol)?;
                log_exclusions("discrete", &fit);
                io::write_json(&self.path(GE_DISCRETE), &fit)?;
                io::write_columns(&self.path(SCATTER_DISCRETE), ["X", "Y"], &scatter(&fit))?;
                checks.push(envelope_check("ge_discrete", &fit, a.envelope_spread));
            }
            if let Some(m) = &self.cfg.metric {
                let rows = io::read_kernel(&self.upstream(METRIC_KERNEL, Stage::Heat, Stage::Analyze)?)?;
                let mesh = self.metric_mesh(&mg, m.dmax)?;
                let mut vertex_of = vec![None; mesh.nodes().len()];
                for v in 0..mg.vertex_count() {
                    if let Some(n) = mesh.vertex_node(v) {
                        vertex_of[n] = Some(v);
                    }
                }
                let to_vertex = |n: usize| {
                    vertex_of
                        .get(n)
                        .copied()
                        .flatten()
                        .ok_or_else(|| input_error(format!("{METRIC_KERNEL}: node {n} is not a graph vertex")))
                };
                let raw = rows
                    .iter()
                    .map(|r| Ok(RawSample { x: to_vertex(r.x_id)?, y: to_vertex(r.y_id)?, ..raw_sample(r) }))
                    .collect::<Result<Vec<_>>>()?;
                let samples = annotate_metric(&mg, &raw)?;
                let fit = gaussian_envelope_fit(&samples, SpaceTag::Metric, Some(m.dmax), a.certificate_tol)?;
                log_exclusions("metric", &fit);
                io::write_json(&self.path(GE_METRIC), &fit)?;
                io::write_columns(&self.path(SCATTER_METRIC), ["X", "Y"], &scatter(&fit))?;
                checks.push(envelope_check("ge_metric", &fit, a.envelope_spread));
            }
        }
        if self.toggles.equivalence {
            let rep = equivalence_constants(&rel, params.r, self.cfg.margin, a.pairs, self.cfg.seed)?;
            io::write_json(&self.path(EQUIVALENCE), &rep)?;
            checks.push(equivalence_check(&rep));
        }
        Ok(checks)
    }

    /// Rebuilds every check from the artifacts on disk.
    pub fn collect_checks(&self) -> Result<Vec<Check>> {
        let r = Stage::Report;
        let mut checks = Vec::new();
        let delone: DeloneReport = io::read_json(&self.upstream(DELONE, Stage::Generate, r)?)?;
        let points = self.upstream(POINTS, Stage::Generate, r)?;
        let meta = self.upstream(POINTS_META, Stage::Generate, r)?;
        let n = io::read_points(&points, &meta)?.0.len();
        checks.push(delone_check(&delone, n));
        let rel: RelationMeta = io::read_json(&self.upstream(RELATION, Stage::Relation, r)?)?;
        checks.push(Check::new(
            Stage::Relation,
            "relation",
            rel.pairs > 0,
            format!("{} relation with {} pairs, S = {}", kind_name(rel.kind), rel.pairs, rel.parameter),
        ));
        checks.push(degree_check(&io::read_json(&self.upstream(DEGREE, Stage::Validate, r)?)?));
        if self.cfg.analysis.axioms {
            checks.push(axioms_check(&io::read_json(&self.upstream(AXIOMS, Stage::Validate, r)?)?));
        }
        let tol = self.cfg.analysis.certificate_tol;
        if self.cfg.heat.is_some() {
            let rows = io::read_kernel(&self.upstream(KERNEL, Stage::Heat, r)?)?;
            checks.push(kernel_check(Stage::Heat, "discrete_kernel", &rows, tol));
        }
        if self.cfg.metric.is_some() {
            let rows = io::read_kernel(&self.upstream(METRIC_KERNEL, Stage::Heat, r)?)?;
            checks.push(kernel_check(Stage::Heat, "metric_kernel", &rows, tol));
        }
        let a = &self.cfg.analysis;
        if self.toggles.vd {
            checks.extend(doubling_checks(&io::read_json(&self.upstream(DOUBLING, Stage::Analyze, r)?)?));
        }
        if self.toggles.pi {
            checks.extend(poincare_checks(&io::read_json(&self.upstream(POINCARE, Stage::Analyze, r)?)?, a.residual_tol));
        }
        if self.toggles.ge {
            if self.cfg.heat.is_some() {
                let fit = io::read_json(&self.upstream(GE_DISCRETE, Stage::Analyze, r)?)?;
                checks.push(envelope_check("ge_discrete", &fit, a.envelope_spread));
            }
            if self.cfg.metric.is_some() {
                let fit = io::read_json(&self.upstream(GE_METRIC, Stage::Analyze, r)?)?;
                checks.push(envelope_check("ge_metric", &fit, a.envelope_spread));
            }
        }
        if self.toggles.equivalence {
            checks.push(equivalence_check(&io::read_json(&self.upstream(EQUIVALENCE, Stage::Analyze, r)?)?));
        }
        Ok(checks)
    }

    fn report(&self) -> Result<Vec<Check>> {
        let checks = self.collect_checks()?;
        let report = FinalReport {
            name: self.cfg.name.clone(),
            seed: self.cfg.seed,
            passed: checks.iter().all(|c| c.passed),
            checks: checks.clone(),
        };
        io::write_json(&self.path(REPORT), &report)?;
        Ok(checks)
    }
}

fn raw_sample(r: &KernelRow) -> RawSample {
    RawSample { x: r.x_id, y: r.y_id, t: r.t, p: r.p, certificate: r.certificate }
}

fn scatter(fit: &EnvelopeFit) -> Vec<(f64, f64)> {
    fit.points.iter().map(|p| (p.x_value, p.y_value)).collect()
}

fn log_exclusions(space: &str, fit: &EnvelopeFit) {
    eprintln!(
        "ge_{space}: {} admitted; excluded {} outside the regime, {} truncated, {} above the certificate tolerance, {} nonpositive",
        fit.admitted.len(),
        fit.excluded_regime,
        fit.excluded_truncated,
        fit.excluded_certificate,
        fit.excluded_nonpositive
    );
}

fn delone_check(rep: &DeloneReport, n: usize) -> Check {
    Check::new(
        Stage::Generate,
        "delone",
        rep.passed(),
        format!(
            "{n} points, r = {}, R = {}, {} close pairs, {} uncovered probes",
            rep.params.r,
            rep.params.big_r,
            rep.close_pairs.len(),
            rep.uncovered.len()
        ),
    )
}

fn degree_check(s: &DegreeStats) -> Check {
    Check::new(
        Stage::Validate,
        "degree_bound",
        s.within_bound() && s.lengths_within(),
        format!("interior degree {}..{} against bound {:.3}", s.min, s.max, s.bound),
    )
}

fn axioms_check(rep: &AxiomReport) -> Check {
    let mut failed = Vec::new();
    for (name, c) in [("N0", &rep.n0), ("N1", &rep.n1), ("N2", &rep.n2)] {
        if !c.passed {
            failed.push(format!("{name} ({} counterexamples)", c.counterexamples.len()));
        }
    }
    let detail = if failed.is_empty() {
        format!("N0, N1, N2 hold; {} N2 pairs sampled", rep.n2.checked)
    } else {
        format!("failed: {}", failed.join(", "))
    };
    Check::new(Stage::Validate, "axioms", rep.passed(), detail)
}

fn kernel_check(stage: Stage, name: &str, rows: &[KernelRow], tol: f64) -> Check {
    let positive = rows.iter().all(|r| r.p.is_finite());
    let outside = rows.iter().filter(|r| !r.regime).count();
    let uncertified = rows.iter().filter(|r| r.certificate.is_some_and(|c| !(c < tol))).count();
    Check::new(
        stage,
        name,
        positive && !rows.is_empty(),
        format!("{} samples, {outside} outside the regime, {uncertified} above certificate tolerance", rows.len()),
    )
}

fn doubling_checks(pair: &DoublingPair) -> Vec<Check> {
    [("vd_discrete", &pair.discrete), ("vd_metric", &pair.metric)]
        .into_iter()
        .map(|(name, r)| {
            Check::new(
                Stage::Analyze,
                name,
                r.passed(),
                format!("max ratio {:.4}, nu = {:.4}, {} samples, {} truncated", r.max_ratio, r.nu_hat, r.samples.len(), r.truncated),
            )
        })
        .collect()
}

fn poincare_checks(pair: &PoincarePair, tol: f64) -> Vec<Check> {
    [("pi_discrete", &pair.discrete), ("pi_metric", &pair.metric)]
        .into_iter()
        .map(|(name, r)| {
            Check::new(
                Stage::Analyze,
                name,
                r.passed(tol),
                format!("sup c_P {:.4} over {} balls, max residual {:.1e}", r.sup_c_p, r.samples.len(), r.max_residual),
            )
        })
        .collect()
}

fn envelope_check(name: &str, fit: &EnvelopeFit, spread: f64) -> Check {
    Check::new(
        Stage::Analyze,
        name,
        fit.passed(spread),
        format!(
            "slope b = {:.4}, spread {:.3}, {}/{} inside, {} excluded by regime",
            fit.b,
            fit.spread,
            fit.inside,
            fit.admitted.len(),
            fit.excluded_regime
        ),
    )
}

fn equivalence_check(rep: &EquivalenceReport) -> Check {
    Check::new(
        Stage::Analyze,
        "equivalence",
        rep.passed(),
        format!(
            "C = {:.4}, max dc/d = {:.6}, dm/d in [{:.4}, {:.4}], {} violations",
            rep.constant_c,
            rep.max_dc_over_d,
            rep.min_dm_over_d,
            rep.max_dm_over_d,
            rep.violations.len()
        ),
    )
}

/// Provenance kept apart from the reproducible reports.
#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub args: Vec<String>,
    pub config: PathBuf,
    pub threads: usize,
    pub host: String,
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn host_name() -> String {
    std::env::var("HOSTNAME")
        .ok()
        .or_else(|| std::fs::read_to_string("/etc/hostname").ok().map(|s| s.trim().to_string()))
        .unwrap_or_else(|| "unknown".into())
}

pub fn write_provenance(out: &Path, p: &Provenance) -> Result<()> {
    Ok(io::write_json(&out.join(PROVENANCE), p)?)
}
