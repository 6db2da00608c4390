//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Extra arguments filter criteria by name.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use delone::analysis::{
    discrete_kernel_samples, gaussian_envelope_fit, least_squares, metric_kernel_samples, poincare_scan,
    sample_centers, volume_doubling_scan, EnvelopeFit, SpaceTag,
};
use delone::graphs::{equivalence_constants, CombinatorialGraph, MetricGraph, Space};
use delone::heat_discrete::{assemble, heat_kernel, truncation_certificate, Boundary, Method};
use delone::heat_metric::{assemble_fem, eigenpairs, mesh, metric_heat_kernel, MetricMethod};
use delone::neighbors::{
    build_max_relation, build_voronoi_relation, degree_stats, ingest_relation, validate_axioms, NeighborRelation,
};
use delone::pointset::{
    estimate_delone_params, generate_jittered_lattice, generate_lattice, generate_penrose, DeloneParams,
    Generator, LatticeKind, Point, PointSet, Window,
};
use delone::tiling::{voronoi_cells_2d, TilingSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_611;
const PENROSE_OFFSETS: [f64; 5] = [0.1, 0.27, 0.33, 0.41, -0.11];
const FACET_EPS: f64 = 1e-9;
/// Scale range `L` for the doubling and Poincaré scans.
const SCALE: f64 = 8.0;

struct Instance {
    name: &'static str,
    params: DeloneParams,
    voronoi: NeighborRelation,
    max: NeighborRelation,
}

fn window(hw: f64) -> Window {
    Window::new(vec![0.0, 0.0], hw).unwrap()
}

fn build(name: &'static str, ps: PointSet, params: DeloneParams) -> Instance {
    let ts: TilingSystem = voronoi_cells_2d(&ps, &params, 2.0 * (params.big_r + params.resolution) + 0.5).unwrap();
    let voronoi = build_voronoi_relation(&ts, FACET_EPS);
    let max = build_max_relation(&ps, params.big_r);
    Instance { name, params, voronoi, max }
}

fn z2() -> &'static Instance {
    static I: OnceLock<Instance> = OnceLock::new();
    I.get_or_init(|| {
        let ps = generate_lattice(LatticeKind::Square, 1.0, &window(30.0)).unwrap();
        build("Z2", ps, LatticeKind::Square.delone_params(1.0, 2))
    })
}

fn triangular() -> &'static Instance {
    static I: OnceLock<Instance> = OnceLock::new();
    I.get_or_init(|| {
        let ps = generate_lattice(LatticeKind::Triangular, 1.0, &window(20.0)).unwrap();
        build("triangular", ps, LatticeKind::Triangular.delone_params(1.0, 2))
    })
}

fn jittered() -> &'static Instance {
    static I: OnceLock<Instance> = OnceLock::new();
    I.get_or_init(|| {
        let ps = generate_jittered_lattice(LatticeKind::Square, 1.0, &window(30.0), 0.2, SEED).unwrap();
        let params = DeloneParams::new(0.5 - 0.2, 0.5f64.sqrt() + 0.2).unwrap();
        build("jittered", ps, params)
    })
}

fn penrose() -> &'static Instance {
    static I: OnceLock<Instance> = OnceLock::new();
    I.get_or_init(|| {
        let ps = generate_penrose(30.0, PENROSE_OFFSETS, SEED).unwrap();
        let params = estimate_delone_params(&ps, 2.0).unwrap();
        build("penrose", ps, params)
    })
}

fn instances() -> [&'static Instance; 4] {
    [z2(), triangular(), jittered(), penrose()]
}

/// `I_k(z)` by its power series.
fn bessel_i(k: u32, z: f64) -> f64 {
    let mut term = (z / 2.0).powi(k as i32) / (1..=k).map(f64::from).product::<f64>();
    let mut sum = term;
    for j in 1..400 {
        term *= (z / 2.0) * (z / 2.0) / (j as f64 * (j + k) as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Continuous-time simple random walk on Z^2 with unit edge rates.
fn lattice_kernel(m: i64, n: i64, t: f64) -> f64 {
    (-4.0 * t).exp() * bessel_i(m.unsigned_abs() as u32, 2.0 * t) * bessel_i(n.unsigned_abs() as u32, 2.0 * t)
}

struct Bessel {
    rel: NeighborRelation,
    w: Window,
    x: usize,
    targets: Vec<usize>,
    offsets: Vec<(i64, i64)>,
}

const BESSEL_TIMES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Operator window of half-width 20 inside a point set one layer larger, so
/// the Dirichlet truncation differs from the Neumann one.
fn bessel_instance() -> Bessel {
    let w = window(20.0);
    let ps = generate_lattice(LatticeKind::Square, 1.0, &window(21.0)).unwrap();
    let rel = build_max_relation(&ps, 0.5);
    let x = ps.nearest_id(&[0.0, 0.0]);
    let mut targets = Vec::new();
    let mut offsets = Vec::new();
    for id in 0..ps.len() {
        let p = ps.point(id);
        if !w.contains(p) {
            continue;
        }
        let (m, n) = (p[0].round() as i64, p[1].round() as i64);
        if m.abs() + n.abs() <= 8 {
            targets.push(id);
            offsets.push((m, n));
        }
    }
    Bessel { rel, w, x, targets, offsets }
}

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c01_bessel() -> Outcome {
    let start = Instant::now();
    let b = bessel_instance();
    let op = assemble(&b.rel, &b.w, Boundary::Neumann, None).map_err(|e| e.to_string())?;
    let n = op.len();
    let mut worst: f64 = 0.0;
    for method in [Method::Krylov, Method::DenseEig] {
        let k = heat_kernel(&op, b.x, &b.targets, &BESSEL_TIMES, method, 1e-15).map_err(|e| e.to_string())?;
        for (ti, &t) in BESSEL_TIMES.iter().enumerate() {
            for (j, &(m, nn)) in b.offsets.iter().enumerate() {
                let exact = lattice_kernel(m, nn, t);
                worst = worst.max((k.values[ti][j] - exact).abs() / exact);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        n == 1681 && b.targets.len() == 145 && worst < 1e-6 && secs < 30.0,
        format!("{n} vertices, {} targets, max rel err {worst:.2e} (Krylov and dense), {secs:.1} s", b.targets.len()),
    )
}

fn c02_certificate() -> Outcome {
    let b = bessel_instance();
    let c = truncation_certificate(&b.rel, &b.w, None, b.x, &b.targets, &BESSEL_TIMES, Method::Krylov, 1e-6)
        .map_err(|e| e.to_string())?;
    check(
        c.passed() && c.cut_edges > 0,
        format!(
            "Dirichlet/Neumann discrepancy {:.2e} over {} (y, t), {} cut edges",
            c.discrepancy,
            b.targets.len() * 4,
            c.cut_edges
        ),
    )
}

fn c03_markov() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_sum: f64 = 0.0;
    let mut worst_bound: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    let w = window(8.0);
    for inst in [z2(), jittered()] {
        for method in [Method::DenseEig, Method::Krylov] {
            let op = assemble(&inst.voronoi, &w, Boundary::Neumann, None).map_err(|e| e.to_string())?;
            let n = op.len();
            for t in [0.5, 2.0, 8.0] {
                let one = op.semigroup(&vec![1.0; n], t, method, 1e-14).map_err(|e| e.to_string())?;
                worst_sum = one.iter().fold(worst_sum, |a, v| a.max((v - 1.0).abs()));
            }
            for _ in 0..100 {
                let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let t = rng.random_range(0.1..10.0);
                let v = op.semigroup(&u, t, method, 1e-14).map_err(|e| e.to_string())?;
                worst_bound = v.iter().fold(worst_bound, |a, v| a.max(-v).max(v - 1.0));
            }
            let ids = op.vertices().to_vec();
            let picks: Vec<usize> = (0..6).map(|_| ids[rng.random_range(0..ids.len())]).collect();
            let k = picks
                .iter()
                .map(|&x| heat_kernel(&op, x, &picks, &[1.0, 4.0], method, 1e-14))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            for (a, ka) in k.iter().enumerate() {
                for (b, kb) in k.iter().enumerate() {
                    for ti in 0..2 {
                        worst_sym = worst_sym.max((ka.values[ti][b] - kb.values[ti][a]).abs());
                    }
                }
            }
        }
    }
    check(
        worst_sum < 1e-10 && worst_bound <= 1e-12 && worst_sym < 1e-10,
        format!("row sum err {worst_sum:.1e}, bound excess {worst_bound:.1e}, asymmetry {worst_sym:.1e}"),
    )
}

fn discrete_fit(inst: &Instance) -> Result<EnvelopeFit, String> {
    let ps = inst.voronoi.pointset();
    let sources = sample_centers(ps, &window(3.0), 5, SEED).map_err(|e| e.to_string())?;
    let times = [2.0, 4.0, 8.0, 16.0, 32.0];
    let w = ps.window().shrink(2.0).map_err(|e| e.to_string())?;
    let samples = discrete_kernel_samples(&inst.voronoi, &w, None, &sources, 10, &times, Method::Krylov)
        .map_err(|e| e.to_string())?;
    gaussian_envelope_fit(&samples, SpaceTag::Discrete, None, 1e-6).map_err(|e| e.to_string())
}

fn describe(fit: &EnvelopeFit) -> String {
    format!(
        "b = {:.4}, spread = {:.3}, inside {}/{}",
        fit.b,
        fit.spread,
        fit.inside,
        fit.admitted.len()
    )
}

fn c04_discrete_ge() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for inst in [z2(), jittered()] {
        let start = Instant::now();
        let fit = discrete_fit(inst)?;
        let secs = start.elapsed().as_secs_f64();
        ok &= fit.passed(4.0) && secs < 120.0;
        parts.push(format!("{}: {} ({secs:.1} s)", inst.name, describe(&fit)));
    }
    check(ok, parts.join("; "))
}

fn c05_metric_ge() -> Outcome {
    let w = window(12.0);
    let ps = generate_lattice(LatticeKind::Square, 1.0, &window(13.0)).unwrap();
    let rel = build_max_relation(&ps, 0.5);
    let graph = MetricGraph::new(&rel);
    let sources = sample_centers(&ps, &window(2.0), 3, SEED).map_err(|e| e.to_string())?;
    let times = [1.0, 2.0, 4.0, 8.0];
    let samples = metric_kernel_samples(&graph, &w, 0.1, &sources, 6.0, &times, MetricMethod::Krylov, true)
        .map_err(|e| e.to_string())?;
    let fit = gaussian_envelope_fit(&samples, SpaceTag::Metric, Some(0.1), 1e-6).map_err(|e| e.to_string())?;
    let disc = discrete_fit(z2())?;
    let ratio = disc.b / fit.b;
    check(
        fit.passed(4.0) && (0.5..=2.0).contains(&ratio),
        format!("metric {}; discrete b = {:.4}; slope ratio {ratio:.3}", describe(&fit), disc.b),
    )
}

fn segment() -> MetricGraph {
    let ps = PointSet::from_points(
        vec![Point::new(vec![0.0, 0.0]).unwrap(), Point::new(vec![1.0, 0.0]).unwrap()],
        Window::new(vec![0.5, 0.0], 1.0).unwrap(),
        Generator::External { description: "unit segment".into() },
        None,
    )
    .unwrap();
    let rel = ingest_relation(&ps, &[(0, 1)], 1.0).unwrap();
    MetricGraph::new(&rel)
}

/// Neumann heat kernel of the unit interval.
fn interval_kernel(x: f64, y: f64, t: f64) -> f64 {
    1.0 + 2.0
        * (1..2000)
            .map(|k| {
                let a = k as f64 * PI;
                (-a * a * t).exp() * (a * x).cos() * (a * y).cos()
            })
            .sum::<f64>()
}

fn c06_fem() -> Outcome {
    let g = segment();
    let steps = [0.1, 0.05, 0.025, 0.0125];
    let mut errs = Vec::new();
    for &h in &steps {
        let fem = assemble_fem(&mesh(&g, h).map_err(|e| e.to_string())?, None).map_err(|e| e.to_string())?;
        let eig = eigenpairs(&fem, 2).map_err(|e| e.to_string())?;
        errs.push((eig.values[1] - PI * PI).abs());
    }
    let lx: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (slope, _) = least_squares(&lx, &ly);

    let m = mesh(&g, 0.01).map_err(|e| e.to_string())?;
    let fem = assemble_fem(&m, None).map_err(|e| e.to_string())?;
    let node_at = |x: f64| m.nodes().iter().position(|n| (n.position[0] - x).abs() < 1e-9).unwrap();
    let xs = [0.0, 0.25, 0.5];
    let nodes: Vec<usize> = xs.iter().map(|&x| node_at(x)).collect();
    let times = [0.05, 0.1, 0.5, 1.0];
    let mut worst: f64 = 0.0;
    for (i, &src) in nodes.iter().enumerate() {
        let k = metric_heat_kernel(&m, &fem, src, &nodes, &times, MetricMethod::Spectral, 1e-12)
            .map_err(|e| e.to_string())?;
        for (ti, &t) in times.iter().enumerate() {
            for (j, &y) in xs.iter().enumerate() {
                let exact = interval_kernel(xs[i], y, t);
                worst = worst.max((k.values[ti][j] - exact).abs() / exact);
            }
        }
    }
    check(
        (1.8..=2.2).contains(&slope) && worst < 1e-3,
        format!("lambda_1 error slope {slope:.3}; interval kernel max rel err {worst:.2e} at dmax 0.01"),
    )
}

fn c07_doubling() -> Outcome {
    let s_grid = [1.0, 2.0, 3.0, 4.0];
    let mut parts = Vec::new();
    let mut ok = true;
    for inst in [penrose(), jittered()] {
        let rel = &inst.voronoi;
        let ps = rel.pointset();
        let g = CombinatorialGraph::new(rel);
        let mg = MetricGraph::new(rel);
        for space in [Space::Discrete(&g), Space::Metric(&mg)] {
            let mut nus = Vec::new();
            for count in [100, 200] {
                let centers = sample_centers(ps, &window(14.0), count, SEED).map_err(|e| e.to_string())?;
                let rep = volume_doubling_scan(space, &centers, &s_grid, SCALE).map_err(|e| e.to_string())?;
                ok &= rep.passed() && rep.nu_hat <= 4.0;
                nus.push(rep.nu_hat);
            }
            let drift = (nus[1] - nus[0]).abs() / nus[0];
            ok &= drift <= 0.1;
            parts.push(format!("{} {:?}: nu {:.3} -> {:.3}", inst.name, space.tag(), nus[0], nus[1]));
        }
    }
    check(ok, parts.join("; "))
}

fn c08_poincare() -> Outcome {
    let s_grid = [1.0, 1.5, 2.0, 3.0, 4.0];
    let mut parts = Vec::new();
    let mut ok = true;
    for inst in [z2(), penrose()] {
        let rel = &inst.voronoi;
        let g = CombinatorialGraph::new(rel);
        let mg = MetricGraph::new(rel);
        let centers = sample_centers(rel.pointset(), &window(14.0), 10, SEED).map_err(|e| e.to_string())?;
        for space in [Space::Discrete(&g), Space::Metric(&mg)] {
            let rep = poincare_scan(space, &centers, &s_grid, 0.25).map_err(|e| e.to_string())?;
            ok &= rep.samples.len() == 50 && rep.passed(1e-8);
            parts.push(format!(
                "{} {:?}: {} balls, sup c_P {:.3}, residual {:.1e}",
                inst.name,
                space.tag(),
                rep.samples.len(),
                rep.sup_c_p,
                rep.max_residual
            ));
        }
    }
    check(ok, parts.join("; "))
}

fn c09_equivalence() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for inst in instances() {
        for (label, rel) in [("V", &inst.voronoi), ("max", &inst.max)] {
            let rep = equivalence_constants(rel, inst.params.r, 2.0, 400, SEED).map_err(|e| e.to_string())?;
            ok &= rep.passed();
            if inst.name == "Z2" && label == "V" {
                ok &= (rep.max_dc_over_d - 2f64.sqrt()).abs() < 1e-9;
                parts.push(format!("Z2 max dc/d = {:.12}", rep.max_dc_over_d));
            }
            if !rep.passed() {
                parts.push(format!("{} {label}: {} violations", inst.name, rep.violations.len()));
            }
        }
    }
    parts.push("8 relations checked".into());
    check(ok, parts.join("; "))
}

fn c10_degree() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for inst in instances() {
        for (label, rel) in [("V", &inst.voronoi), ("max", &inst.max)] {
            let st = degree_stats(rel, inst.params.r, 2.0).map_err(|e| e.to_string())?;
            ok &= st.within_bound();
            if inst.name == "Z2" && label == "V" {
                ok &= st.min == 4 && st.max == 4;
            }
            parts.push(format!("{} {label} {}<={:.0}", inst.name, st.max, st.bound));
        }
    }
    check(ok, parts.join(", "))
}

fn c11_axioms() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for inst in instances() {
        for (label, rel) in [("V", &inst.voronoi), ("max", &inst.max)] {
            let rep = validate_axioms(rel, 2.0, 500, SEED).map_err(|e| e.to_string())?;
            ok &= rep.passed() && rep.n2.checked == 500;
            if !rep.passed() {
                parts.push(format!("{} {label} failed", inst.name));
            }
        }
    }
    parts.push("N0-N2 on 8 relations, 500 pairs each".into());
    check(ok, parts.join("; "))
}

fn c12_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_delone");
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/z2_voronoi.json");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = Command::new(bin)
            .args(["run", "--config", config, "--out"])
            .arg(d.path())
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("run exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
        }
    }
    let list = |d: &std::path::Path| -> Vec<String> {
        let mut v: Vec<String> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n != "provenance.json")
            .collect();
        v.sort();
        v
    };
    let (a, b) = (list(dirs[0].path()), list(dirs[1].path()));
    if a != b {
        return Err(format!("artifact sets differ: {a:?} vs {b:?}"));
    }
    let differing: Vec<&String> = a
        .iter()
        .filter(|n| std::fs::read(dirs[0].path().join(n)).unwrap() != std::fs::read(dirs[1].path().join(n)).unwrap())
        .collect();
    check(
        differing.is_empty() && !a.is_empty(),
        format!("{} artifacts compared, {} differ {differing:?}", a.len(), differing.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("01 bessel oracle", c01_bessel),
        ("02 truncation certificate", c02_certificate),
        ("03 markov suite", c03_markov),
        ("04 discrete gaussian envelope", c04_discrete_ge),
        ("05 metric gaussian envelope", c05_metric_ge),
        ("06 fem convergence", c06_fem),
        ("07 volume doubling", c07_doubling),
        ("08 poincare", c08_poincare),
        ("09 distance equivalence", c09_equivalence),
        ("10 degree bound", c10_degree),
        ("11 axioms", c11_axioms),
        ("12 cli determinism", c12_determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {name}: PASS [{secs:.1} s] {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {name}: FAIL [{secs:.1} s] {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
