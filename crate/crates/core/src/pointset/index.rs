use std::collections::HashMap;

/// Uniform bucket grid over the points of a set, used for radius and
/// nearest-point queries.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell: f64,
    dim: usize,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
    coords: Vec<Vec<f64>>,
}

impl GridIndex {
    pub fn new<'a>(points: impl IntoIterator<Item = &'a [f64]>, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell must be positive");
        let coords: Vec<Vec<f64>> = points.into_iter().map(|p| p.to_vec()).collect();
        let dim = coords.first().map_or(0, |p| p.len());
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (id, p) in coords.iter().enumerate() {
            buckets.entry(key(p, cell)).or_default().push(id);
        }
        Self { cell, dim, buckets, coords }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Ids of all points with `|p - q| <= radius`, ascending.
    pub fn within(&self, p: &[f64], radius: f64) -> Vec<usize> {
        let reach = (radius / self.cell).ceil() as i64;
        let center = key(p, self.cell);
        let mut out = Vec::new();
        let r2 = radius * radius;
        for_each_offset(self.dim, reach, |off| {
            let k: Vec<i64> = center.iter().zip(off).map(|(c, o)| c + o).collect();
            if let Some(ids) = self.buckets.get(&k) {
                for &id in ids {
                    if dist2(&self.coords[id], p) <= r2 {
                        out.push(id);
                    }
                }
            }
        });
        out.sort_unstable();
        out
    }

    /// Nearest point to `p` and its distance. Ties resolve to the smaller id.
    pub fn nearest(&self, p: &[f64]) -> Option<(usize, f64)> {
        if self.coords.is_empty() {
            return None;
        }
        let center = key(p, self.cell);
        let mut best: Option<(usize, f64)> = None;
        let mut ring = 0i64;
        loop {
            for_each_offset(self.dim, ring, |off| {
                if off.iter().map(|o| o.abs()).max().unwrap_or(0) != ring {
                    return;
                }
                let k: Vec<i64> = center.iter().zip(off).map(|(c, o)| c + o).collect();
                if let Some(ids) = self.buckets.get(&k) {
                    for &id in ids {
                        let d = dist2(&self.coords[id], p).sqrt();
                        let better = match best {
                            None => true,
                            Some((bid, bd)) => d < bd || (d == bd && id < bid),
                        };
                        if better {
                            best = Some((id, d));
                        }
                    }
                }
            });
            // Anything outside ring k is at least k cells away.
            if let Some((_, d)) = best {
                if d <= ring as f64 * self.cell {
                    return best;
                }
            }
            ring += 1;
        }
    }
}

fn key(p: &[f64], cell: f64) -> Vec<i64> {
    p.iter().map(|x| (x / cell).floor() as i64).collect()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn for_each_offset(dim: usize, reach: i64, mut f: impl FnMut(&[i64])) {
    let mut off = vec![-reach; dim];
    loop {
        f(&off);
        let mut i = 0;
        loop {
            if i == dim {
                return;
            }
            if off[i] < reach {
                off[i] += 1;
                break;
            }
            off[i] = -reach;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn within_and_nearest_match_brute_force() {
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64 * 0.37).sin() * 5.0, (i as f64 * 0.91).cos() * 5.0])
            .collect();
        let idx = GridIndex::new(pts.iter().map(|p| p.as_slice()), 0.7);
        let q = [0.3, -1.2];
        let brute: Vec<usize> = (0..pts.len())
            .filter(|&i| dist2(&pts[i], &q) <= 4.0)
            .collect();
        assert_eq!(idx.within(&q, 2.0), brute);
        let (nid, nd) = idx.nearest(&q).unwrap();
        let best = (0..pts.len())
            .map(|i| dist2(&pts[i], &q).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(nd, best);
        assert_eq!(dist2(&pts[nid], &q).sqrt(), best);
    }
}
