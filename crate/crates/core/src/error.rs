use crate::mesh::SideKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-conforming mesh, offending elements {elements:?}")]
    NonConforming { elements: Vec<usize> },

    #[error("matching assumption violated between elements {elements:?}")]
    MatchingViolation { elements: Vec<usize> },

    #[error("degenerate element {element} (zero area)")]
    DegenerateElement { element: usize },

    #[error("side {0} is not a side of the triangulation")]
    UnknownSide(SideKey),

    #[error("triangulations belong to different forests")]
    ForeignForest,

    #[error("triangulation is not a refinement of the reference triangulation")]
    NotRefinement,

    #[error("function is not defined on the given triangulation")]
    WrongTriangulation,

    #[error("operation requires a {expected}-component function, got {actual}")]
    ComponentMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("element budget exceeded: {elements} > {budget}")]
    BudgetExceeded { elements: usize, budget: usize },

    #[error("enumeration overflow: more than {cap} triangulations")]
    EnumerationOverflow { cap: usize },

    #[error("AFEM iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("trace is empty")]
    EmptyTrace,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
