pub mod cli;
pub mod connection;
pub mod error;
pub mod gl;
pub mod harmonic;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod renorm;
pub mod rng;
pub mod section;
pub mod tensor;
pub mod vortex;

pub use error::{Error, MeshError, Result};
pub use mesh::{build_icosphere, build_torus, cotan_laplacian, Frame, Point, SurfaceMesh};
