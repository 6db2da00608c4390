//! Penrose rhombus tilings from de Bruijn's pentagrid.
//!
//! Grid family `j` consists of the lines `<z, e_j> + offset_j = k`, `k` in Z,
//! with `e_j = (cos 2πj/5, sin 2πj/5)`. Each crossing of two lines becomes a
//! rhombus whose corners are `sum_i K_i e_i`, where `K_i` is the ceiling of
//! `<z, e_i> + offset_i` on the four meshes around the crossing.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Generator, Point, PointSet, Window};
use crate::error::{Error, Result};

const MAX_REDRAWS: usize = 16;
const GENERICITY_TOL: f64 = 1e-9;

/// A Penrose patch: its vertices and its rhombus edges (all of length 1).
#[derive(Debug, Clone)]
pub struct PenrosePatch {
    pub pointset: PointSet,
    /// Tiling edges as `(a, b)` with `a < b`.
    pub edges: Vec<(usize, usize)>,
    /// Offsets actually used, after any genericity re-draws.
    pub offsets: [f64; 5],
}

fn directions() -> [[f64; 2]; 5] {
    let mut e = [[0.0; 2]; 5];
    for (j, v) in e.iter_mut().enumerate() {
        let a = 2.0 * PI * j as f64 / 5.0;
        *v = [a.cos(), a.sin()];
    }
    e
}

type Key = [i64; 5];

/// Build the patch filling the square window of half-width `patch_radius`
/// centered at the origin.
pub fn penrose_patch(patch_radius: f64, offsets: [f64; 5], seed: u64) -> Result<PenrosePatch> {
    if !(patch_radius > 0.0 && patch_radius.is_finite()) {
        return Err(Error::invalid(format!("patch_radius must be positive, got {patch_radius}")));
    }
    if offsets.iter().any(|o| !o.is_finite()) {
        return Err(Error::invalid("offsets must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma = offsets;
    let mut last_bad = None;
    for _ in 0..=MAX_REDRAWS {
        match rhombi(patch_radius, &gamma) {
            Ok(tiles) => return assemble(patch_radius, gamma, seed, tiles),
            Err(bad) => {
                last_bad = Some(bad);
                for g in gamma.iter_mut() {
                    *g = rng.random::<f64>();
                }
            }
        }
    }
    let (j, l, i) = last_bad.unwrap();
    Err(Error::numerical(format!(
        "pentagrid offsets stayed non-generic after {MAX_REDRAWS} re-draws \
         (lines of families {j}, {l} and {i} concurrent)"
    )))
}

/// Enumerate rhombi; `Err((j, l, i))` names three concurrent families.
fn rhombi(patch_radius: f64, gamma: &[f64; 5]) -> std::result::Result<Vec<[Key; 4]>, (usize, usize, usize)> {
    let e = directions();
    // Vertices sit within ~3.1 + |sum gamma_i e_i| of 2.5 z.
    let shift: f64 = gamma.iter().map(|g| g.abs()).sum::<f64>() + 3.5;
    let grid_radius = (patch_radius * 2f64.sqrt() + shift) / 2.5 + 1.0;
    let mut tiles = Vec::new();
    for j in 0..5 {
        for l in j + 1..5 {
            let det = e[j][0] * e[l][1] - e[j][1] * e[l][0];
            let k_lo = (-grid_radius + gamma[j]).floor() as i64;
            let k_hi = (grid_radius + gamma[j]).ceil() as i64;
            let m_lo = (-grid_radius + gamma[l]).floor() as i64;
            let m_hi = (grid_radius + gamma[l]).ceil() as i64;
            for k in k_lo..=k_hi {
                for m in m_lo..=m_hi {
                    let a = k as f64 - gamma[j];
                    let b = m as f64 - gamma[l];
                    // Solve <z,e_j> = a, <z,e_l> = b.
                    let z = [(a * e[l][1] - b * e[j][1]) / det, (b * e[j][0] - a * e[l][0]) / det];
                    if z[0].hypot(z[1]) > grid_radius {
                        continue;
                    }
                    let mut base: Key = [0; 5];
                    for i in 0..5 {
                        if i == j || i == l {
                            continue;
                        }
                        let v = z[0] * e[i][0] + z[1] * e[i][1] + gamma[i];
                        if (v - v.round()).abs() < GENERICITY_TOL {
                            return Err((j, l, i));
                        }
                        base[i] = v.ceil() as i64;
                    }
                    let corner = |dj: i64, dl: i64| {
                        let mut key = base;
                        key[j] = k + dj;
                        key[l] = m + dl;
                        key
                    };
                    tiles.push([corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)]);
                }
            }
        }
    }
    Ok(tiles)
}

fn position(key: &Key) -> [f64; 2] {
    let e = directions();
    let mut p = [0.0, 0.0];
    for i in 0..5 {
        p[0] += key[i] as f64 * e[i][0];
        p[1] += key[i] as f64 * e[i][1];
    }
    p
}

fn assemble(patch_radius: f64, gamma: [f64; 5], seed: u64, tiles: Vec<[Key; 4]>) -> Result<PenrosePatch> {
    let window = Window::new(vec![0.0, 0.0], patch_radius)?;
    let mut keys: BTreeSet<Key> = BTreeSet::new();
    let mut edge_keys: BTreeSet<(Key, Key)> = BTreeSet::new();
    for t in &tiles {
        for c in 0..4 {
            let (a, b) = (t[c], t[(c + 1) % 4]);
            keys.insert(a);
            edge_keys.insert(if a < b { (a, b) } else { (b, a) });
        }
    }
    let mut id_of: BTreeMap<Key, usize> = BTreeMap::new();
    let mut points = Vec::new();
    for key in &keys {
        let p = position(key);
        if window.contains(&p) {
            id_of.insert(*key, points.len());
            points.push(Point::new(p.to_vec())?);
        }
    }
    let mut edges: Vec<(usize, usize)> = edge_keys
        .iter()
        .filter_map(|(a, b)| Some((*id_of.get(a)?, *id_of.get(b)?)))
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let pointset = PointSet::from_points(
        points,
        window,
        Generator::Penrose { patch_radius, offsets: gamma },
        Some(seed),
    )?;
    Ok(PenrosePatch { pointset, edges, offsets: gamma })
}
