//! Catalog of model problems on polygonal domains with homogeneous
//! Dirichlet data.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use crate::assembly::{ProblemKind, RhsField};
use crate::error::{Error, Result};
use crate::mesh::{builtin, load_mesh, parse_mesh, Point, Triangulation};
use crate::quadrature::{gauss_legendre, TriangleRule};
use crate::space::{norm_sq, CrFunction, P0Function};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeshSource {
    UnitSquare,
    LShape,
    File(PathBuf),
    Text(String),
}

impl MeshSource {
    /// Loads the mesh into a fresh forest.
    pub fn load(&self) -> Result<Triangulation> {
        let forest = match self {
            MeshSource::UnitSquare => builtin::unit_square(),
            MeshSource::LShape => builtin::lshape(),
            MeshSource::File(p) => load_mesh(p)?,
            MeshSource::Text(t) => parse_mesh(t)?,
        };
        Ok(forest.bottom())
    }
}

type VecFn = dyn Fn(Point) -> [f64; 2] + Send + Sync;
type GradFn = dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync;
type ScalarFn = dyn Fn(Point) -> f64 + Send + Sync;

/// Exact solution with gradient (rows = components) and, for Stokes, the
/// mean-zero pressure.
#[derive(Clone)]
pub struct ExactSolution {
    pub components: usize,
    pub value: Arc<VecFn>,
    pub gradient: Arc<GradFn>,
    pub pressure: Option<Arc<ScalarFn>>,
    /// `½‖∇u‖²`, which equals `−(½‖∇u‖² − ∫ f·u)`.
    pub energy: f64,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution").field("components", &self.components).field("energy", &self.energy).finish()
    }
}

impl ExactSolution {
    /// `‖∇_NC(u − u_T)‖²` by a degree-8 rule per element.
    pub fn error_sq(&self, u: &CrFunction) -> f64 {
        use rayon::prelude::*;
        let tri = u.tri();
        let rule = TriangleRule::collapsed_gauss(5);
        (0..tri.num_elements())
            .into_par_iter()
            .map(|t| {
                let gh: Vec<Point> = (0..self.components).map(|c| u.gradient(t, c)).collect();
                rule.integrate(&tri.element_coords(t), tri.area(t), |x| {
                    let g = (self.gradient)(x);
                    (0..self.components).map(|c| norm_sq([g[c][0] - gh[c][0], g[c][1] - gh[c][1]])).sum()
                })
            })
            .sum()
    }

    /// `‖p − p_T‖²` when a pressure is known.
    pub fn pressure_error_sq(&self, p: &P0Function) -> Option<f64> {
        let exact = self.pressure.as_ref()?;
        let tri = p.tri();
        let rule = TriangleRule::collapsed_gauss(5);
        Some(
            (0..tri.num_elements())
                .map(|t| rule.integrate(&tri.element_coords(t), tri.area(t), |x| (exact(x) - p.value(t)).powi(2)))
                .sum(),
        )
    }

    /// Largest `|u|` over Gauss points of the boundary sides of `tri`.
    pub fn boundary_max(&self, tri: &Triangulation) -> f64 {
        let (nodes, _) = gauss_legendre(6);
        let mut m: f64 = 0.0;
        for s in tri.sides().iter().filter(|s| s.boundary) {
            let (a, b) = (tri.vertex_coord(s.vertices[0]), tri.vertex_coord(s.vertices[1]));
            for &t in nodes.iter().chain(&[0.0, 1.0]) {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let v = (self.value)(x);
                m = m.max(v[0].abs()).max(v[1].abs());
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub name: String,
    pub description: String,
    pub kind: ProblemKind,
    pub mesh: MeshSource,
    pub f: RhsField,
    pub exact: Option<ExactSolution>,
    /// Uniform refinements beyond the finest mesh for reference solutions.
    pub k_ref: usize,
}

impl ProblemSpec {
    pub fn initial_mesh(&self) -> Result<Triangulation> {
        self.mesh.load()
    }

    pub fn with_mesh(mut self, mesh: MeshSource) -> Self {
        self.mesh = mesh;
        self
    }
}

/// Default depth of the reference refinement.
pub const DEFAULT_K_REF: usize = 2;

// x²(1−x)² and its derivatives
fn q0(x: f64) -> f64 {
    x * x * (1.0 - x) * (1.0 - x)
}
fn q1(x: f64) -> f64 {
    2.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
}
fn q2(x: f64) -> f64 {
    2.0 * (1.0 - 6.0 * x + 6.0 * x * x)
}
fn q3(x: f64) -> f64 {
    12.0 * (2.0 * x - 1.0)
}

/// Velocity `curl ψ` for `ψ = x²(1−x)²y²(1−y)²`.
fn stokes_velocity(p: Point) -> [f64; 2] {
    let [x, y] = p;
    [q0(x) * q1(y), -q1(x) * q0(y)]
}

fn stokes_gradient(p: Point) -> [[f64; 2]; 2] {
    let [x, y] = p;
    [[q1(x) * q1(y), q0(x) * q2(y)], [-q2(x) * q0(y), -q1(x) * q1(y)]]
}

fn stokes_pressure(p: Point) -> f64 {
    (p[0] - 0.5) * (p[1] - 0.5)
}

/// `−Δu + ∇p` for the manufactured velocity and pressure.
fn stokes_load(p: Point) -> [f64; 2] {
    let [x, y] = p;
    let lap1 = q2(x) * q1(y) + q0(x) * q3(y);
    let lap2 = -(q3(x) * q0(y) + q1(x) * q2(y));
    [-lap1 + (y - 0.5), -lap2 + (x - 0.5)]
}

/// `∫_{[0,1]²} g` by a tensor Gauss rule exact for degree 19 per direction.
fn square_integral(g: impl Fn(Point) -> f64) -> f64 {
    let (x, w) = gauss_legendre(10);
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            s += w[i] * w[j] * g([x[i], x[j]]);
        }
    }
    s
}

fn sin_sin() -> ExactSolution {
    ExactSolution {
        components: 1,
        value: Arc::new(|p| [(PI * p[0]).sin() * (PI * p[1]).sin(), 0.0]),
        gradient: Arc::new(|p| {
            let (sx, cx, sy, cy) = ((PI * p[0]).sin(), (PI * p[0]).cos(), (PI * p[1]).sin(), (PI * p[1]).cos());
            [[PI * cx * sy, PI * sx * cy], [0.0, 0.0]]
        }),
        pressure: None,
        energy: PI * PI / 4.0,
    }
}

fn stokes_exact() -> ExactSolution {
    let energy = 0.5
        * square_integral(|p| {
            let g = stokes_gradient(p);
            g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2)
        });
    ExactSolution {
        components: 2,
        value: Arc::new(stokes_velocity),
        gradient: Arc::new(stokes_gradient),
        pressure: Some(Arc::new(stokes_pressure)),
        energy,
    }
}

fn spec(name: &str, description: &str, kind: ProblemKind, mesh: MeshSource, f: RhsField) -> ProblemSpec {
    ProblemSpec {
        name: name.into(),
        description: description.into(),
        kind,
        mesh,
        f,
        exact: None,
        k_ref: DEFAULT_K_REF,
    }
}

pub fn catalog() -> Vec<ProblemSpec> {
    let smooth = ProblemSpec {
        exact: Some(sin_sin()),
        ..spec(
            "square-poisson-smooth",
            "unit square, u = sin(πx)sin(πy), f = 2π²u",
            ProblemKind::Poisson,
            MeshSource::UnitSquare,
            RhsField::scalar(None, |p| 2.0 * PI * PI * (PI * p[0]).sin() * (PI * p[1]).sin()),
        )
    };
    let manufactured = ProblemSpec {
        exact: Some(stokes_exact()),
        ..spec(
            "square-stokes-manufactured",
            "unit square, u = curl(x²(1−x)²y²(1−y)²), p = (x−½)(y−½)",
            ProblemKind::Stokes,
            MeshSource::UnitSquare,
            RhsField::vector(Some(5), stokes_load),
        )
    };
    vec![
        spec(
            "square-poisson-f1",
            "unit square (two triangles), f = 1",
            ProblemKind::Poisson,
            MeshSource::UnitSquare,
            RhsField::constant_scalar(1.0),
        ),
        smooth,
        spec(
            "lshape-poisson-f1",
            "L-shaped domain (−1,1)² ∖ [0,1)×(−1,0], f = 1",
            ProblemKind::Poisson,
            MeshSource::LShape,
            RhsField::constant_scalar(1.0),
        ),
        spec(
            "square-stokes-f10",
            "unit square (two triangles), f = (1, 0)",
            ProblemKind::Stokes,
            MeshSource::UnitSquare,
            RhsField::constant_vector([1.0, 0.0]),
        ),
        manufactured,
        spec(
            "lshape-stokes-f10",
            "L-shaped domain, f = (1, 0)",
            ProblemKind::Stokes,
            MeshSource::LShape,
            RhsField::constant_vector([1.0, 0.0]),
        ),
        spec(
            "square-poisson-zero",
            "unit square, f = 0",
            ProblemKind::Poisson,
            MeshSource::UnitSquare,
            RhsField::zero(1),
        ),
    ]
}

/// Looks up a catalog entry. `lshape-poisson` is accepted for
/// `lshape-poisson-f1`.
pub fn problem(name: &str) -> Result<ProblemSpec> {
    let name = match name {
        "lshape-poisson" => "lshape-poisson-f1",
        "lshape-stokes" => "lshape-stokes-f10",
        n => n,
    };
    catalog().into_iter().find(|p| p.name == name).ok_or_else(|| Error::UnknownProblem(name.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_resolve() {
        let c = catalog();
        assert!(c.len() >= 5);
        for p in &c {
            assert_eq!(problem(&p.name).unwrap().name, p.name);
            assert_eq!(p.f.components(), p.kind.components());
        }
        assert!(matches!(problem("nope"), Err(Error::UnknownProblem(_))));
        assert_eq!(problem("lshape-poisson").unwrap().name, "lshape-poisson-f1");
    }

    #[test]
    fn exact_solutions_vanish_on_boundary() {
        for p in catalog() {
            if let Some(ex) = &p.exact {
                let tri = p.initial_mesh().unwrap().uniform_refine_times(2);
                assert!(ex.boundary_max(&tri) <= 1e-12, "{}", p.name);
            }
        }
    }

    #[test]
    fn manufactured_load_matches_finite_differences() {
        let h = 2e-4;
        let u = stokes_velocity;
        for &x in &[[0.3, 0.4], [0.71, 0.22], [0.5, 0.5], [0.15, 0.87]] {
            let mut fd = [0.0; 2];
            for c in 0..2 {
                let at = |dx: f64, dy: f64| u([x[0] + dx, x[1] + dy])[c];
                let lap = (at(h, 0.0) + at(-h, 0.0) + at(0.0, h) + at(0.0, -h) - 4.0 * at(0.0, 0.0)) / (h * h);
                let dp = if c == 0 {
                    (stokes_pressure([x[0] + h, x[1]]) - stokes_pressure([x[0] - h, x[1]])) / (2.0 * h)
                } else {
                    (stokes_pressure([x[0], x[1] + h]) - stokes_pressure([x[0], x[1] - h])) / (2.0 * h)
                };
                fd[c] = -lap + dp;
            }
            let f = stokes_load(x);
            let rel = ((f[0] - fd[0]).powi(2) + (f[1] - fd[1]).powi(2)).sqrt() / (f[0].powi(2) + f[1].powi(2)).sqrt().max(1.0);
            assert!(rel <= 1e-6, "{rel} at {x:?}");
        }
    }

    #[test]
    fn manufactured_velocity_is_solenoidal_with_mean_zero_pressure() {
        for &x in &[[0.3, 0.4], [0.9, 0.1]] {
            let g = stokes_gradient(x);
            assert!((g[0][0] + g[1][1]).abs() < 1e-15);
        }
        assert!(square_integral(stokes_pressure).abs() < 1e-15);
    }

    #[test]
    fn smooth_energy_matches_quadrature() {
        let ex = sin_sin();
        let e = 0.5 * square_integral(|p| {
            let g = (ex.gradient)(p);
            norm_sq(g[0])
        });
        assert!((e - ex.energy).abs() < 1e-10);
    }
}
