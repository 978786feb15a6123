//! Porous-media Darcy flow on structured grids: a two-point flux
//! finite-volume fine solver, a multiscale Robin-coupled domain-decomposition
//! solver, conservative velocity postprocessing and IMPES two-phase transport.
//!
//! Every numerical type is generic over the scalar (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod fv;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod mrcm;
pub mod output;
pub mod parallel;
pub mod postprocess;
pub mod scenario;
pub mod scalar;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid = grid::StructuredGrid<f64>;
pub type Field = grid::CellField<f64>;
pub type Fluxes = grid::FaceFluxField<f64>;
pub type Permeability = grid::PermeabilityField<f64>;
pub type Saturation = grid::SaturationField<f64>;
pub type Boundary = fv::BoundarySpec<f64>;
pub type Matrix = linalg::CsrMatrix<f64>;
