//! File formats for point sets, relations, cells, kernels, meshes and
//! reports. Floats are written with 17 significant digits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{NeighborRelation, RelationKind};
use crate::pointset::{DeloneParams, Generator, Point, PointSet, Window};
use crate::tiling::{Adjacency, TilingSystem};

/// Full double precision, 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Format(format!("bad {what} value {s:?}")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Format(format!("bad {what} value {s:?}")))
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn check_header(rdr: &mut csv::Reader<File>, expected: &[&str], path: &Path) -> Result<()> {
    let h = rdr.headers()?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(Error::Format(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            expected.join(","),
            h.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Point-set sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSetMeta {
    pub dim: usize,
    pub window: Window,
    pub generator: Generator,
    pub seed: Option<u64>,
    pub params: Option<DeloneParams>,
}

/// Writes `id,x0,...` rows and the sidecar JSON.
pub fn write_points(csv_path: &Path, meta_path: &Path, ps: &PointSet, params: Option<&DeloneParams>) -> Result<()> {
    let mut w = writer(csv_path)?;
    let mut header = vec!["id".to_string()];
    header.extend((0..ps.dim()).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (id, p) in ps.points().iter().enumerate() {
        let mut row = vec![id.to_string()];
        row.extend(p.coords().iter().map(|&x| fmt_f64(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    let meta = PointSetMeta {
        dim: ps.dim(),
        window: ps.window().clone(),
        generator: ps.generator().clone(),
        seed: ps.seed(),
        params: params.copied(),
    };
    write_json(meta_path, &meta)
}

pub fn read_points(csv_path: &Path, meta_path: &Path) -> Result<(PointSet, Option<DeloneParams>)> {
    let meta: PointSetMeta = read_json(meta_path)?;
    let mut rdr = reader(csv_path)?;
    let mut expected = vec!["id".to_string()];
    expected.extend((0..meta.dim).map(|i| format!("x{i}")));
    check_header(&mut rdr, &expected.iter().map(String::as_str).collect::<Vec<_>>(), csv_path)?;
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = parse_usize(&rec[0], "id")?;
        if id != row {
            return Err(Error::Format(format!("{}: ids must be 0..n in order, row {row} has id {id}", csv_path.display())));
        }
        let coords = (1..=meta.dim).map(|i| parse_f64(&rec[i], "coordinate")).collect::<Result<Vec<_>>>()?;
        points.push(Point::new(coords)?);
    }
    let ps = PointSet::from_points(points, meta.window, meta.generator, meta.seed)?;
    Ok((ps, meta.params))
}

/// Relation sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMeta {
    pub kind: RelationKind,
    pub parameter: f64,
    pub pairs: usize,
}

/// `id_a,id_b,distance` plus the relation sidecar.
pub fn write_edges(csv_path: &Path, meta_path: &Path, rel: &NeighborRelation) -> Result<()> {
    let ps = rel.pointset();
    let mut w = writer(csv_path)?;
    w.write_record(["id_a", "id_b", "distance"])?;
    for &(a, b) in rel.pairs() {
        w.write_record([a.to_string(), b.to_string(), fmt_f64(ps.distance(a, b))])?;
    }
    w.flush()?;
    write_json(meta_path, &RelationMeta { kind: rel.kind(), parameter: rel.parameter(), pairs: rel.pairs().len() })
}

/// Pairs from an `id_a,id_b[,...]` edge list; extra columns are ignored.
pub fn read_edges(csv_path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut rdr = reader(csv_path)?;
    let h = rdr.headers()?.clone();
    if h.len() < 2 || &h[0] != "id_a" || &h[1] != "id_b" {
        return Err(Error::Format(format!("{}: header must start with id_a,id_b", csv_path.display())));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok((parse_usize(&rec[0], "id_a")?, parse_usize(&rec[1], "id_b")?))
        })
        .collect()
}

/// `id_a,id_b,shared_length`.
pub fn write_adjacency(path: &Path, adj: &[Adjacency]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["id_a", "id_b", "shared_length"])?;
    for a in adj {
        w.write_record([a.id_a.to_string(), a.id_b.to_string(), fmt_f64(a.shared_length)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: usize,
    pub vertices: Vec<[f64; 2]>,
    pub area: f64,
    pub interior: bool,
}

pub fn cell_records(ts: &TilingSystem) -> Vec<CellRecord> {
    (0..ts.pointset().len())
        .map(|id| {
            let c = ts.cell(id);
            CellRecord { id, vertices: c.vertices.clone(), area: c.area(), interior: ts.is_interior(id) }
        })
        .collect()
}

pub fn write_cells(path: &Path, ts: &TilingSystem) -> Result<()> {
    write_json(path, &cell_records(ts))
}

/// One kernel CSV row. `mode` is the boundary mode, or the mesh label for
/// metric kernels; ids are point ids or mesh node ids accordingly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub x_id: usize,
    pub y_id: usize,
    pub t: f64,
    pub p: f64,
    pub mode: String,
    pub certificate: Option<f64>,
    /// Sample lies in the admissible regime of its space.
    pub regime: bool,
}

pub const KERNEL_HEADER: [&str; 7] = ["x_id", "y_id", "t", "p", "mode", "certificate", "regime"];

pub fn write_kernel(path: &Path, rows: &[KernelRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(KERNEL_HEADER)?;
    for r in rows {
        w.write_record([
            r.x_id.to_string(),
            r.y_id.to_string(),
            fmt_f64(r.t),
            fmt_f64(r.p),
            r.mode.clone(),
            r.certificate.map(fmt_f64).unwrap_or_default(),
            r.regime.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kernel(path: &Path) -> Result<Vec<KernelRow>> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, &KERNEL_HEADER, path)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let certificate = match rec[5].trim() {
                "" => None,
                s => Some(parse_f64(s, "certificate")?),
            };
            let regime = match rec[6].trim() {
                "true" => true,
                "false" => false,
                s => return Err(Error::Format(format!("bad regime value {s:?}"))),
            };
            Ok(KernelRow {
                x_id: parse_usize(&rec[0], "x_id")?,
                y_id: parse_usize(&rec[1], "y_id")?,
                t: parse_f64(&rec[2], "t")?,
                p: parse_f64(&rec[3], "p")?,
                mode: rec[4].to_string(),
                certificate,
                regime,
            })
        })
        .collect()
}

/// Symmetric coordinate triples `id_a,id_b,value`.
pub fn write_triples(path: &Path, triples: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["id_a", "id_b", "value"])?;
    for &(a, b, v) in triples {
        w.write_record([a.to_string(), b.to_string(), fmt_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// `node_id,edge_id,offset,x,y` for planar meshes.
pub fn write_mesh_nodes(path: &Path, rows: &[(usize, usize, f64, Vec<f64>)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["node_id", "edge_id", "offset", "x", "y"])?;
    for (node, edge, offset, pos) in rows {
        if pos.len() != 2 {
            return Err(Error::Unsupported("mesh node export is planar only".into()));
        }
        w.write_record([node.to_string(), edge.to_string(), fmt_f64(*offset), fmt_f64(pos[0]), fmt_f64(pos[1])])?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column numeric CSV, e.g. ball growth `s,mu` or scatter `X,Y`.
pub fn write_columns(path: &Path, header: [&str; 2], rows: &[(f64, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for &(a, b) in rows {
        w.write_record([fmt_f64(a), fmt_f64(b)])?;
    }
    w.flush()?;
    Ok(())
}
