use crate::error::{Error, Result};
use crate::mesh::{Point, Triangulation};

/// Crouzeix–Raviart function: one coefficient per side midpoint and
/// component, stored component-major (`coeffs[c * #E + s]`).
#[derive(Clone, Debug)]
pub struct CrFunction {
    tri: Triangulation,
    components: usize,
    coeffs: Vec<f64>,
}

impl CrFunction {
    pub fn zero(tri: &Triangulation, components: usize) -> Self {
        assert!(components == 1 || components == 2);
        CrFunction { tri: tri.clone(), components, coeffs: vec![0.0; components * tri.num_sides()] }
    }

    /// Element of `CR_0`: boundary coefficients must vanish.
    pub fn from_coeffs(tri: &Triangulation, components: usize, coeffs: Vec<f64>) -> Result<Self> {
        let f = Self::from_coeffs_free(tri, components, coeffs)?;
        if let Some(s) = f.boundary_violation(0.0) {
            return Err(Error::Invariant(format!("boundary side {} carries a nonzero coefficient", tri.side(s).key)));
        }
        Ok(f)
    }

    /// Piecewise affine function with edge-mean continuity but no boundary
    /// condition.
    pub fn from_coeffs_free(tri: &Triangulation, components: usize, coeffs: Vec<f64>) -> Result<Self> {
        if !(components == 1 || components == 2) {
            return Err(Error::InvalidParameter(format!("{components} components")));
        }
        if coeffs.len() != components * tri.num_sides() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                components * tri.num_sides(),
                coeffs.len()
            )));
        }
        Ok(CrFunction { tri: tri.clone(), components, coeffs })
    }

    pub fn tri(&self) -> &Triangulation {
        &self.tri
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn coeff(&self, side: usize, comp: usize) -> f64 {
        self.coeffs[comp * self.tri.num_sides() + side]
    }

    pub fn set_coeff(&mut self, side: usize, comp: usize, value: f64) {
        let n = self.tri.num_sides();
        self.coeffs[comp * n + side] = value;
    }

    /// First boundary side whose coefficient exceeds `tol` in magnitude.
    pub fn boundary_violation(&self, tol: f64) -> Option<usize> {
        (0..self.tri.num_sides())
            .filter(|&s| self.tri.side(s).boundary)
            .find(|&s| (0..self.components).any(|c| self.coeff(s, c).abs() > tol))
    }

    pub fn ensure_on(&self, tri: &Triangulation) -> Result<()> {
        if &self.tri == tri {
            Ok(())
        } else {
            Err(Error::WrongTriangulation)
        }
    }

    /// Midpoint values of element `t` for component `c`, ordered like the
    /// element's sides (side `k` opposite vertex `k`).
    pub fn local(&self, t: usize, c: usize) -> [f64; 3] {
        self.tri.element_sides(t).map(|s| self.coeff(s, c))
    }

    /// Value at barycentric point `bary` of element `t`:
    /// `Σ_k c_k (1 - 2 λ_k)`.
    pub fn eval(&self, t: usize, bary: [f64; 3], c: usize) -> f64 {
        let m = self.local(t, c);
        (0..3).map(|k| m[k] * (1.0 - 2.0 * bary[k])).sum()
    }

    pub fn eval_point(&self, t: usize, x: Point, c: usize) -> f64 {
        self.eval(t, self.tri.barycentric(t, x), c)
    }

    /// Value of the element-`t` restriction at its local vertex `k`.
    pub fn vertex_value(&self, t: usize, k: usize, c: usize) -> f64 {
        let m = self.local(t, c);
        m[(k + 1) % 3] + m[(k + 2) % 3] - m[k]
    }

    /// Elementwise gradient `∇(v|_T) = -2 Σ_k c_k ∇λ_k`.
    pub fn gradient(&self, t: usize, c: usize) -> Point {
        let m = self.local(t, c);
        let g = self.tri.grad_lambda(t);
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] -= 2.0 * m[k] * g[k][0];
            out[1] -= 2.0 * m[k] * g[k][1];
        }
        out
    }

    pub fn nc_gradient(&self) -> NcGradientField {
        let grads = (0..self.tri.num_elements())
            .map(|t| {
                let mut g = [[0.0; 2]; 2];
                for (c, row) in g.iter_mut().enumerate().take(self.components) {
                    *row = self.gradient(t, c);
                }
                g
            })
            .collect();
        NcGradientField { components: self.components, grads }
    }

    /// Piecewise divergence `div_NC v = tr ∇_NC v`.
    pub fn nc_divergence(&self) -> Result<P0Function> {
        if self.components != 2 {
            return Err(Error::ComponentMismatch { expected: 2, actual: self.components });
        }
        let values = (0..self.tri.num_elements()).map(|t| self.gradient(t, 0)[0] + self.gradient(t, 1)[1]).collect();
        Ok(P0Function { tri: self.tri.clone(), values, mean_zero: self.boundary_violation(0.0).is_none() })
    }

    /// `‖∇_NC v‖²`.
    pub fn nc_energy_sq(&self) -> f64 {
        (0..self.tri.num_elements())
            .map(|t| {
                let a = self.tri.area(t);
                (0..self.components).map(|c| a * norm_sq(self.gradient(t, c))).sum::<f64>()
            })
            .sum()
    }

    pub fn axpy(&mut self, alpha: f64, other: &CrFunction) -> Result<()> {
        other.ensure_on(&self.tri)?;
        if other.components != self.components {
            return Err(Error::ComponentMismatch { expected: self.components, actual: other.components });
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// CSV rows `side_id,component,value` keyed by the global side key.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("side_a,side_b,component,value\n");
        for c in 0..self.components {
            for s in 0..self.tri.num_sides() {
                let [a, b] = self.tri.side(s).key.endpoints();
                out.push_str(&format!("{},{},{},{:e}\n", a.0, b.0, c, self.coeff(s, c)));
            }
        }
        out
    }
}

/// Piecewise constant function.
#[derive(Clone, Debug)]
pub struct P0Function {
    tri: Triangulation,
    values: Vec<f64>,
    mean_zero: bool,
}

impl P0Function {
    pub fn new(tri: &Triangulation, values: Vec<f64>) -> Result<Self> {
        if values.len() != tri.num_elements() {
            return Err(Error::InvalidParameter("one value per element expected".into()));
        }
        Ok(P0Function { tri: tri.clone(), values, mean_zero: false })
    }

    /// Builds a function of `Q_T ∩ L²_0`; the mean is checked against
    /// `1e-12·‖q‖`.
    pub fn new_mean_zero(tri: &Triangulation, values: Vec<f64>) -> Result<Self> {
        let mut q = Self::new(tri, values)?;
        let mean = q.integral();
        let scale = q.l2_norm() * tri.total_area().sqrt();
        if mean.abs() > 1e-12 * scale {
            return Err(Error::Invariant(format!("pressure mean {mean:e} is not zero")));
        }
        q.mean_zero = true;
        Ok(q)
    }

    pub fn tri(&self) -> &Triangulation {
        &self.tri
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, t: usize) -> f64 {
        self.values[t]
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().enumerate().map(|(t, v)| self.tri.area(t) * v).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().enumerate().map(|(t, v)| self.tri.area(t) * v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("element,value\n");
        for (t, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{:e}\n", self.tri.element_id(t).0, v));
        }
        out
    }
}

/// Elementwise constant gradient (`components × 2` per element).
#[derive(Clone, Debug)]
pub struct NcGradientField {
    pub components: usize,
    pub grads: Vec<[[f64; 2]; 2]>,
}

impl NcGradientField {
    pub fn divergence(&self) -> Result<Vec<f64>> {
        if self.components != 2 {
            return Err(Error::ComponentMismatch { expected: 2, actual: self.components });
        }
        Ok(self.grads.iter().map(|g| g[0][0] + g[1][1]).collect())
    }
}

pub(crate) fn norm_sq(p: Point) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}
