//! Newest-vertex-bisection forest, triangulation snapshots and the
//! refinement lattice.

mod forest;
mod io;
mod lattice;
mod refine;
mod triangulation;

pub use forest::{ElemId, Forest, Point, SideKey, VertexId};
pub use io::{load_mesh, parse_mesh, write_mesh};
pub use lattice::{bdd_ratio, intermediate_triangulation, is_lower_diamond, join, join_all, meet, meet_all};
pub use refine::bisected_sides;
pub use triangulation::{Side, Triangulation};

/// Built-in initial meshes.
pub mod builtin {
    use std::sync::Arc;

    use super::{parse_mesh, Forest};

    pub const UNIT_SQUARE: &str = include_str!("../../meshes/unit_square.msh");
    pub const LSHAPE: &str = include_str!("../../meshes/lshape.msh");

    /// Unit square split along the diagonal (0,0)-(1,1), which is the
    /// refinement edge of both triangles. Element 0 is the lower-right one.
    pub fn unit_square() -> Arc<Forest> {
        parse_mesh(UNIT_SQUARE).expect("built-in mesh is valid")
    }

    /// `(-1,1)² ∖ [0,1)×(-1,0]` in six triangles, diagonals through the
    /// reentrant corner.
    pub fn lshape() -> Arc<Forest> {
        parse_mesh(LSHAPE).expect("built-in mesh is valid")
    }
}
