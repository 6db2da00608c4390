//! Diffusion on Delone sets.
//!
//! This crate builds graphs over Delone point sets and studies heat flow on
//! them. The pipeline is:
//!
//! 1. [`pointset`]: lattices, jittered lattices and Penrose vertex sets,
//!    together with estimates of the packing radius `r` and covering
//!    radius `R`.
//! 2. [`tiling`]: planar Voronoi cells, built from the points within `2R`.
//! 3. [`neighbors`]: the Voronoi, canonical and maximal neighbor relations,
//!    ingestion of external edge lists, and a validator for the three
//!    neighbor-relation axioms.
//! 4. [`graphs`]: the combinatorial graph with hop metric `d_c` and the
//!    metric graph with path-length metric `d_m`, ball volumes, and the
//!    empirical distance-equivalence constants.
//! 5. [`heat_discrete`] and [`heat_metric`]: the discrete Laplacian and the
//!    Kirchhoff Laplacian of the metric graph (via P1 finite elements),
//!    and their heat kernels.
//! 6. [`analysis`]: volume doubling, Poincaré constants and two-sided
//!    Gaussian envelope fits.
//!
//! The accompanying book (`book/` at the repository root) walks through
//! each stage; its code listings are compiled and run as doc-tests of this
//! crate.
//!
//! ```
//! use delone::pointset::{generate_lattice, LatticeKind, Window};
//! use delone::neighbors::build_max_relation;
//! use delone::graphs::CombinatorialGraph;
//!
//! let window = Window::new(vec![0.0, 0.0], 5.0).unwrap();
//! let ps = generate_lattice(LatticeKind::Square, 1.0, &window).unwrap();
//! // 2R = 1 keeps exactly the axis-parallel unit edges.
//! let rel = build_max_relation(&ps, 0.5);
//! let g = CombinatorialGraph::new(&rel);
//! let origin = ps.nearest_id(&[0.0, 0.0]);
//! let target = ps.nearest_id(&[3.0, 4.0]);
//! assert_eq!(g.dc(origin, target), Some(7));
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod graphs;
pub mod heat_discrete;
pub mod heat_metric;
pub mod io;
pub mod linalg;
pub mod neighbors;
pub mod pointset;
pub mod tiling;

#[cfg(doctest)]
mod guide;

pub use error::{Error, Result};
