//! Book chapters, one module each, so `cargo test --doc` runs every
//! listing in `book/src`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/point-sets.md")]
pub mod point_sets {}

#[doc = include_str!("../../../book/src/relations.md")]
pub mod relations {}

#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}

#[doc = include_str!("../../../book/src/discrete-heat.md")]
pub mod discrete_heat {}

#[doc = include_str!("../../../book/src/metric-heat.md")]
pub mod metric_heat {}

#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
