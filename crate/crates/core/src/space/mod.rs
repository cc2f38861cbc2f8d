//! Crouzeix–Raviart and piecewise constant spaces with the operators
//! `I_T`, `E_T`, `I_{T★} ∘ E_T` and `J_T^{T★}`.

mod enrich;
mod functions;
mod interpolate;
mod transfer;

pub use enrich::{enrich, enrich_then_interpolate, interpolate_p2, interpolate_p2_coarse, P2Function};
pub use functions::{CrFunction, NcGradientField, P0Function};
pub use interpolate::{interpolate_closure, interpolate_cr, project_p0, project_p0_closure};
pub use transfer::{transfer, transfer_detailed, TransferResult};

pub(crate) use functions::norm_sq;

/// Upper bound of the interpolation stability constant:
/// `‖h_T^{-1}(v - I_T v)‖_T ≤ Λ ‖∇(v - I_T v)‖_T`.
pub const LAMBDA: f64 = 0.4396;

/// Default energy weight; must exceed `2Λ²`.
pub const DEFAULT_GAMMA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpaceConstants {
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for SpaceConstants {
    fn default() -> Self {
        SpaceConstants { lambda: LAMBDA, gamma: DEFAULT_GAMMA }
    }
}

impl SpaceConstants {
    /// `γ > 2Λ²`, the condition under which the energy is monotone.
    pub fn gamma_admissible(&self) -> bool {
        self.gamma > 2.0 * self.lambda * self.lambda
    }
}

/// `‖∇_NC(a - b)‖²` for CR functions on nested triangulations (either order).
pub fn nc_gradient_distance_sq(a: &CrFunction, b: &CrFunction) -> crate::Result<f64> {
    use crate::Error;
    if a.components() != b.components() {
        return Err(Error::ComponentMismatch { expected: a.components(), actual: b.components() });
    }
    let (coarse, fine) = if a.tri().num_elements() <= b.tri().num_elements() { (a, b) } else { (b, a) };
    let parent = coarse.tri().coarse_parent_map(fine.tri())?;
    let mut sum = 0.0;
    for (k, &t) in parent.iter().enumerate() {
        for c in 0..a.components() {
            let (gf, gc) = (fine.gradient(k, c), coarse.gradient(t, c));
            sum += fine.tri().area(k) * norm_sq([gf[0] - gc[0], gf[1] - gc[1]]);
        }
    }
    Ok(sum)
}

/// `∫ ∇_NC a · ∇_NC b` for CR functions on nested triangulations.
pub fn nc_gradient_inner(a: &CrFunction, b: &CrFunction) -> crate::Result<f64> {
    use crate::Error;
    if a.components() != b.components() {
        return Err(Error::ComponentMismatch { expected: a.components(), actual: b.components() });
    }
    let (coarse, fine) = if a.tri().num_elements() <= b.tri().num_elements() { (a, b) } else { (b, a) };
    let parent = coarse.tri().coarse_parent_map(fine.tri())?;
    let mut sum = 0.0;
    for (k, &t) in parent.iter().enumerate() {
        for c in 0..a.components() {
            let (gf, gc) = (fine.gradient(k, c), coarse.gradient(t, c));
            sum += fine.tri().area(k) * (gf[0] * gc[0] + gf[1] * gc[1]);
        }
    }
    Ok(sum)
}
