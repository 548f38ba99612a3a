pub mod adapt;
pub mod config;
pub mod error;
pub mod estimator;
pub mod expr;
pub mod integration;
pub mod kernels;
pub mod legendre;
pub mod mesh;
pub mod operators;
pub mod problem;
pub mod quadrature;
pub mod run;
pub mod solver;
pub mod spaces;
pub mod stabilization;

pub use error::{Error, Result};
pub use mesh::{build_mesh, BoundaryGeometry, BoundaryMesh, Element, Part, Point, Side};
