use thiserror::Error;

/// Validation failures raised while building a [`crate::SurfaceMesh`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh has no faces")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face {face} has {count} vertices, only triangles are supported")]
    NonTriangleFace { face: usize, count: usize },
    #[error("face {face} references vertex {vertex}, but the mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        vertex: usize,
        count: usize,
    },
    #[error("face {face} repeats a vertex")]
    DegenerateFace { face: usize },
    #[error("boundary edge ({0}, {1}): only closed surfaces are supported")]
    BoundaryEdge(usize, usize),
    #[error("non-manifold edge ({0}, {1}) is shared by more than two faces")]
    NonManifoldEdge(usize, usize),
    #[error("inconsistent orientation across edge ({0}, {1})")]
    InconsistentOrientation(usize, usize),
    #[error("non-manifold vertex {0}: its star is not a single fan")]
    NonManifoldVertex(usize),
    #[error("vertex {0} is not referenced by any face")]
    IsolatedVertex(usize),
    #[error("mesh has {0} connected components, expected one")]
    Disconnected(usize),
    #[error("degenerate triangle {face} (area {area:e})")]
    DegenerateTriangle { face: usize, area: f64 },
    #[error("icosphere subdivision {0} exceeds the limit of 8")]
    SubdivisionLimit(u32),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("solvability error: {0}")]
    Solvability(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("inconsistent fluxes: {0}")]
    Inconsistent(String),
    #[error("ambiguous degree on face {face}: vertex {vertex} has a zero section value")]
    AmbiguousDegree { face: usize, vertex: usize },
    #[error(
        "line search stagnated in stage {stage} at iteration {iteration} \
         (energy {energy:.12e}, gradient max-norm {grad_norm:.3e})"
    )]
    Stagnation {
        stage: usize,
        iteration: usize,
        energy: f64,
        grad_norm: f64,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
