//! Side-based error indicators, oscillation and the generalized energy.

use rayon::prelude::*;

use crate::assembly::{RhsField, Solution};
use crate::error::{Error, Result};
use crate::mesh::{SideKey, Triangulation};
use crate::space::{nc_gradient_distance_sq, CrFunction, LAMBDA};

/// `η²(S) = ‖h_T f‖²_{ω_S} + h_S‖[∇_NC u_T · t_S]‖²_S` for every side.
#[derive(Clone, Debug, serde::Serialize)]
pub struct IndicatorTable {
    pub keys: Vec<SideKey>,
    pub volume: Vec<f64>,
    pub jump: Vec<f64>,
    pub total: Vec<f64>,
    #[serde(skip)]
    tri: Option<Triangulation>,
}

impl IndicatorTable {
    /// Table built from raw per-side totals (volume parts set to the totals).
    pub fn from_totals(tri: &Triangulation, total: Vec<f64>) -> Result<Self> {
        if total.len() != tri.num_sides() {
            return Err(Error::InvalidParameter("one indicator per side expected".into()));
        }
        if let Some(v) = total.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("negative indicator {v}")));
        }
        Ok(IndicatorTable {
            keys: tri.sides().iter().map(|s| s.key).collect(),
            volume: total.clone(),
            jump: vec![0.0; total.len()],
            total,
            tri: Some(tri.clone()),
        })
    }

    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    pub fn ensure_on(&self, tri: &Triangulation) -> Result<()> {
        match &self.tri {
            Some(t) if t == tri && self.total.len() == tri.num_sides() => Ok(()),
            _ => Err(Error::WrongTriangulation),
        }
    }

    /// `η²(E(T))`.
    pub fn sum_all(&self) -> f64 {
        self.total.iter().sum()
    }

    /// `η²(S)` summed over local side indices.
    pub fn sum(&self, sides: impl IntoIterator<Item = usize>) -> f64 {
        sides.into_iter().map(|s| self.total[s]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("side_a,side_b,volume,jump,total\n");
        for i in 0..self.len() {
            let [a, b] = self.keys[i].endpoints();
            out.push_str(&format!("{},{},{:e},{:e},{:e}\n", a.0, b.0, self.volume[i], self.jump[i], self.total[i]));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(serde::Serialize)]
        struct Row {
            side: [u32; 2],
            volume: f64,
            jump: f64,
            total: f64,
        }
        let rows: Vec<Row> = (0..self.len())
            .map(|i| {
                let [a, b] = self.keys[i].endpoints();
                Row { side: [a.0, b.0], volume: self.volume[i], jump: self.jump[i], total: self.total[i] }
            })
            .collect();
        Ok(serde_json::to_string_pretty(&rows)?)
    }
}

/// Error indicators on all sides of `tri` for the discrete solution `u`.
/// For vector fields the jump is the full tangential jump of the gradient.
pub fn indicators(tri: &Triangulation, u: &CrFunction, f: &RhsField) -> Result<IndicatorTable> {
    u.ensure_on(tri)?;
    if f.components() != u.components() {
        return Err(Error::ComponentMismatch { expected: u.components(), actual: f.components() });
    }
    let hf = f.hf_sq(tri);
    let nc = u.components();
    let rows: Vec<(f64, f64)> = tri
        .sides()
        .par_iter()
        .map(|side| {
            let volume: f64 = side.adjacent().iter().map(|&t| hf[t]).sum();
            let tan = side.tangent(tri);
            let mut jump_sq = 0.0;
            for c in 0..nc {
                let g0 = u.gradient(side.elements[0], c);
                let mut d = g0[0] * tan[0] + g0[1] * tan[1];
                if !side.boundary {
                    let g1 = u.gradient(side.elements[1], c);
                    d -= g1[0] * tan[0] + g1[1] * tan[1];
                }
                jump_sq += d * d;
            }
            // the jump is constant along the side: h_S ∫_S |j|² = h_S² |j|²
            (volume, side.length * side.length * jump_sq)
        })
        .collect();
    let (volume, jump): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let total = volume.iter().zip(&jump).map(|(a, b)| a + b).collect();
    Ok(IndicatorTable { keys: tri.sides().iter().map(|s| s.key).collect(), volume, jump, total, tri: Some(tri.clone()) })
}

/// `η̄² = max_S η²(refd(T;S))` together with the per-side values
/// `η²(refd(T;S))`.
pub fn eta_bar(tri: &Triangulation, table: &IndicatorTable) -> Result<(f64, Vec<f64>)> {
    table.ensure_on(tri)?;
    let per_side: Vec<f64> = (0..tri.num_sides()).into_par_iter().map(|s| table.sum(tri.refd_local(s))).collect();
    let max = per_side.iter().copied().fold(0.0, f64::max);
    Ok((max, per_side))
}

/// Parts of `G(T) = -(½‖∇_NC u_T‖² − ∫ f·u_T) + γ‖h_T f‖²`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnergyRecord {
    pub gamma: f64,
    pub dirichlet: f64,
    pub load: f64,
    pub hf_sq: f64,
    pub data: f64,
    pub total: f64,
}

impl EnergyRecord {
    pub fn recomputed_total(&self) -> f64 {
        -(self.dirichlet - self.load) + self.data
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("γ = {gamma} must be positive")));
    }
    if gamma <= 2.0 * LAMBDA * LAMBDA {
        log::warn!("γ = {gamma} does not exceed 2Λ²; energy monotonicity is not guaranteed");
    }
    Ok(())
}

pub fn energy(tri: &Triangulation, u: &CrFunction, f: &RhsField, gamma: f64) -> Result<EnergyRecord> {
    check_gamma(gamma)?;
    u.ensure_on(tri)?;
    let dirichlet = 0.5 * u.nc_energy_sq();
    let load = f.integrate_against(u);
    let hf_sq: f64 = f.hf_sq(tri).iter().sum();
    let data = gamma * hf_sq;
    Ok(EnergyRecord { gamma, dirichlet, load, hf_sq, data, total: -(dirichlet - load) + data })
}

/// `G` of a reference solution standing in for the top element: the data
/// term is omitted.
pub fn reference_energy(u: &CrFunction, f: &RhsField) -> EnergyRecord {
    let dirichlet = 0.5 * u.nc_energy_sq();
    let load = f.integrate_against(u);
    EnergyRecord { gamma: 0.0, dirichlet, load, hf_sq: 0.0, data: 0.0, total: -(dirichlet - load) }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct OscillationRecord {
    pub per_element: Vec<f64>,
    pub total: f64,
}

/// `osc²(T) = Σ_T h_T² ‖f − f_T‖²_T` with `f_T` the elementwise mean.
pub fn oscillation(tri: &Triangulation, f: &RhsField) -> OscillationRecord {
    let rule = f.square_rule();
    let per_element: Vec<f64> = (0..tri.num_elements())
        .into_par_iter()
        .map(|t| {
            let (verts, area) = (tri.element_coords(t), tri.area(t));
            let mut osc = 0.0;
            for c in 0..f.components() {
                let mean = rule.integrate(&verts, area, |x| f.component(x, c)) / area;
                osc += rule.integrate(&verts, area, |x| (f.component(x, c) - mean).powi(2));
            }
            area * osc
        })
        .collect();
    let total = per_element.iter().sum();
    OscillationRecord { per_element, total }
}

/// Comparison of two nested discrete solutions `T ≤ T★`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct EnergyComparison {
    /// `G(T) − G(T★)`.
    pub energy_gap: f64,
    /// `‖∇_NC(u_{T★} − u_T)‖²`.
    pub gradient_gap: f64,
    /// `‖h_T f‖²_{Ω(T∖T★)}`.
    pub hf_refined: f64,
    /// `gradient_gap + hf_refined`.
    pub quasi_error: f64,
    /// `η²(E(T)∖E(T★))`.
    pub eta_refined: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub bracket_ok: bool,
    /// `quasi_error / eta_refined` (None for 0/0).
    pub quasi_ratio: Option<f64>,
    /// `energy_gap / eta_refined` (None for 0/0).
    pub energy_ratio: Option<f64>,
}

/// Ratio with the degenerate-sample filter: `None` when both parts are
/// below `1e-14`.
pub fn filtered_ratio(num: f64, den: f64) -> Option<f64> {
    if num.abs() < 1e-14 && den.abs() < 1e-14 {
        None
    } else {
        Some(num / den)
    }
}

/// Relative slack used when testing inequalities between computed energies.
pub const BRACKET_SLACK: f64 = 1e-10;

/// Energy difference against quasi-error and estimator for `T ≤ T★`,
/// with the explicit bracket
/// `¼‖∇δ‖² + (γ/2 − Λ²)‖hf‖² ≤ G(T) − G(T★) ≤ ¾‖∇δ‖² + (γ + Λ²)‖hf‖²`.
pub fn energy_difference_vs_error(coarse: &Solution, fine: &Solution, f: &RhsField, gamma: f64) -> Result<EnergyComparison> {
    let (tc, tf) = (coarse.tri(), fine.tri());
    if !tc.is_coarsening_of(tf)? {
        return Err(Error::NotRefinement);
    }
    let gc = energy(tc, &coarse.u, f, gamma)?;
    let gf = energy(tf, &fine.u, f, gamma)?;
    let energy_gap = gc.total - gf.total;
    let gradient_gap = nc_gradient_distance_sq(&coarse.u, &fine.u)?;
    let hf = f.hf_sq(tc);
    let hf_refined: f64 = tc.elements_not_in(tf).iter().map(|&t| hf[t]).sum();
    let table = indicators(tc, &coarse.u, f)?;
    let eta_refined: f64 =
        tc.sides().iter().enumerate().filter(|(_, s)| !tf.contains_side(s.key)).map(|(i, _)| table.total[i]).sum();
    let l2 = LAMBDA * LAMBDA;
    let lower_bound = 0.25 * gradient_gap + (gamma / 2.0 - l2) * hf_refined;
    let upper_bound = 0.75 * gradient_gap + (gamma + l2) * hf_refined;
    let scale = BRACKET_SLACK * (gc.total.abs() + gf.total.abs() + upper_bound).max(1e-300);
    let bracket_ok = lower_bound <= energy_gap + scale && energy_gap <= upper_bound + scale;
    let quasi_error = gradient_gap + hf_refined;
    Ok(EnergyComparison {
        energy_gap,
        gradient_gap,
        hf_refined,
        quasi_error,
        eta_refined,
        lower_bound,
        upper_bound,
        bracket_ok,
        quasi_ratio: filtered_ratio(quasi_error, eta_refined),
        energy_ratio: filtered_ratio(energy_gap, eta_refined),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{solve_poisson, SolverOptions};
    use crate::mesh::builtin;

    fn square() -> (Triangulation, Solution, RhsField) {
        let tri = builtin::unit_square().bottom();
        let f = RhsField::constant_scalar(1.0);
        let sol = solve_poisson(&tri, &f, &SolverOptions::default()).unwrap();
        (tri, sol, f)
    }

    #[test]
    fn two_triangle_indicators() {
        let (tri, sol, f) = square();
        let t = indicators(&tri, &sol.u, &f).unwrap();
        for (i, s) in tri.sides().iter().enumerate() {
            assert_eq!(t.total[i], t.volume[i] + t.jump[i]);
            if s.boundary {
                assert!((t.total[i] - (0.25 + 1.0 / 144.0)).abs() < 1e-14, "{}", t.total[i]);
            } else {
                assert!((t.total[i] - 0.5).abs() < 1e-14);
                assert!(t.jump[i].abs() < 1e-28);
            }
        }
        let doubled = indicators(&tri, &solve_poisson(&tri, &f.scaled(2.0), &SolverOptions::default()).unwrap().u, &f.scaled(2.0)).unwrap();
        for i in 0..t.len() {
            assert!((doubled.total[i] - 4.0 * t.total[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn two_triangle_energy() {
        let (tri, sol, f) = square();
        let g = energy(&tri, &sol.u, &f, 0.5).unwrap();
        assert!((g.dirichlet - 1.0 / 144.0).abs() < 1e-15);
        assert!((g.load - 1.0 / 72.0).abs() < 1e-15);
        assert!((g.hf_sq - 0.5).abs() < 1e-15);
        assert!((g.total - (1.0 / 144.0 + 0.25)).abs() < 1e-15);
        assert!((g.total - g.recomputed_total()).abs() <= 1e-13 * g.total.abs());
        assert!(energy(&tri, &sol.u, &f, 0.0).is_err());
    }

    #[test]
    fn eta_bar_on_two_triangles() {
        let tri = builtin::unit_square().bottom();
        let mut tot = vec![0.0; tri.num_sides()];
        let diag = (0..tri.num_sides()).find(|&s| !tri.side(s).boundary).unwrap();
        let bottom = (0..tri.num_sides())
            .find(|&s| {
                let sd = tri.side(s);
                sd.boundary && sd.midpoint[1] == 0.0
            })
            .unwrap();
        tot[diag] = 1.0;
        tot[bottom] = 4.0;
        let table = IndicatorTable::from_totals(&tri, tot).unwrap();
        let (max, per) = eta_bar(&tri, &table).unwrap();
        assert_eq!(max, 5.0);
        assert_eq!(per[diag], 1.0);
        let zero = IndicatorTable::from_totals(&tri, vec![0.0; tri.num_sides()]).unwrap();
        assert_eq!(eta_bar(&tri, &zero).unwrap().0, 0.0);
    }

    #[test]
    fn oscillation_of_linear_load() {
        let forest = crate::mesh::parse_mesh("vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\n").unwrap();
        let tri = forest.bottom();
        let osc = oscillation(&tri, &RhsField::scalar(Some(1), |x| x[0]));
        assert!((osc.total - 1.0 / 72.0).abs() < 1e-15, "{}", osc.total);
        assert_eq!(oscillation(&tri, &RhsField::constant_scalar(3.0)).total, 0.0);
    }
}
