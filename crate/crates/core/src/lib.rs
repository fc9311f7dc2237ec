//! Merged Voronoi–Delaunay (MVD) grids on convex polygons.
//!
//! Pipeline: points ([`generate`]) → Delaunay triangulation and clipped
//! Voronoi diagram ([`tessellation`]) → merged grid ([`grid`]) → grid
//! operators ([`ops`]) → boundary value problems ([`bvp`], [`study`]).

pub mod bvp;
pub mod error;
pub mod expr;
pub mod generate;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod ops;
pub mod sparse;
pub mod study;
pub mod tessellation;

pub use error::{Error, Result};
