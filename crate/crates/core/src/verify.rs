//! Executable checks for the exact identities and measured constants of
//! the method: seeded corpora, ratio reports, lower diamonds, brute-force
//! lattice enumeration and the instance-optimality probe.

use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::afem::{afem_run_from, AfemConfig};
use crate::assembly::{solve, ProblemKind, RhsField, Solution, SolverOptions};
use crate::error::{Error, Result};
use crate::estimate::{energy, energy_difference_vs_error, filtered_ratio, indicators, EnergyComparison};
use crate::mesh::{is_lower_diamond, join_all, meet_all, ElemId, Triangulation};
use crate::problems::ProblemSpec;
use crate::quadrature::TriangleRule;
use crate::space::{
    enrich, enrich_then_interpolate, interpolate_cr, interpolate_p2_coarse, nc_gradient_distance_sq, nc_gradient_inner,
    norm_sq, transfer_detailed, CrFunction, P2Function, LAMBDA,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    MeasuredOnly,
    /// No samples.
    Vacuous,
}

/// Samples of one quantity with summary statistics.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct RatioReport {
    pub name: String,
    pub anchor: String,
    pub samples: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Enforced interval, if any.
    pub bracket: Option<[f64; 2]>,
    pub violations: usize,
    pub verdict: Verdict,
}

impl RatioReport {
    fn build(name: &str, anchor: &str, samples: Vec<f64>, bracket: Option<[f64; 2]>, violations: usize) -> Self {
        let finite: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
        let (min, max, mean) = if finite.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (min, max, (finite.iter().sum::<f64>() / finite.len() as f64).clamp(min, max))
        };
        let verdict = if samples.is_empty() {
            Verdict::Vacuous
        } else if violations > 0 || finite.len() != samples.len() {
            Verdict::Fail
        } else if bracket.is_some() {
            Verdict::Pass
        } else {
            Verdict::MeasuredOnly
        };
        RatioReport { name: name.into(), anchor: anchor.into(), samples, min, max, mean, bracket, violations, verdict }
    }

    /// Measured quantity; only non-finite samples fail.
    pub fn measured(name: &str, anchor: &str, samples: Vec<f64>) -> Self {
        Self::build(name, anchor, samples, None, 0)
    }

    /// Samples that must lie in `[lo, hi]` up to `slack`.
    pub fn bracketed(name: &str, anchor: &str, samples: Vec<f64>, lo: f64, hi: f64, slack: f64) -> Self {
        let violations = samples.iter().filter(|&&v| !(v >= lo - slack && v <= hi + slack)).count();
        Self::build(name, anchor, samples, Some([lo, hi]), violations)
    }

    /// Samples whose violations were decided by the caller.
    pub fn with_violations(name: &str, anchor: &str, samples: Vec<f64>, bracket: [f64; 2], violations: usize) -> Self {
        Self::build(name, anchor, samples, Some(bracket), violations)
    }

    pub fn passed(&self) -> bool {
        matches!(self.verdict, Verdict::Pass | Verdict::MeasuredOnly)
    }

    /// Regression drift: fails if min or max moved by more than a factor 2
    /// against the pinned values.
    pub fn within_drift(&self, pinned_min: f64, pinned_max: f64) -> bool {
        let ok = |now: f64, then: f64| {
            if then == 0.0 {
                now.abs() < 1e-12
            } else {
                let r = now / then;
                (0.5..=2.0).contains(&r)
            }
        };
        ok(self.min, pinned_min) && ok(self.max, pinned_max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Seeded generator for case `case` of a corpus.
pub fn case_rng(seed: u64, case: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (case as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// `steps` rounds of refinement, each marking every side with probability
/// `p` (at least one side per round).
pub fn random_refinement(tri: &Triangulation, rng: &mut impl Rng, steps: usize, p: f64) -> Triangulation {
    let mut t = tri.clone();
    for _ in 0..steps {
        let mut seeds: Vec<usize> = (0..t.num_sides()).filter(|_| rng.random_bool(p)).collect();
        if seeds.is_empty() {
            seeds.push(rng.random_range(0..t.num_sides()));
        }
        t = t.refine_local(&seeds);
    }
    t
}

/// Random element of `CR_0` with interior coefficients in `[-1, 1]`.
pub fn random_cr(tri: &Triangulation, components: usize, rng: &mut impl Rng) -> CrFunction {
    let ns = tri.num_sides();
    let mut coeffs = vec![0.0; components * ns];
    for c in 0..components {
        for s in 0..ns {
            if !tri.side(s).boundary {
                coeffs[c * ns + s] = rng.random_range(-1.0..=1.0);
            }
        }
    }
    CrFunction::from_coeffs(tri, components, coeffs).expect("boundary coefficients are zero")
}

/// Lower diamond `T∧ ≤ T_j ≤ T∨`.
#[derive(Clone, Debug)]
pub struct Diamond {
    pub lower: Triangulation,
    pub upper: Triangulation,
    pub members: Vec<Triangulation>,
}

/// Refines `m` regions of `base` with pairwise disjoint closures; member
/// `j` carries every region except the `j`-th, so that its coarsening area
/// is region `j`. `m = 1` gives the degenerate diamond.
pub fn random_diamond(base: &Triangulation, m: usize, depth: usize, rng: &mut impl Rng) -> Result<Diamond> {
    if m == 0 {
        return Err(Error::InvalidParameter("a diamond needs at least one member".into()));
    }
    if m == 1 {
        return Ok(Diamond { lower: base.clone(), upper: base.clone(), members: vec![base.clone()] });
    }
    for _ in 0..200 {
        // seeds whose refinement closures touch pairwise disjoint element sets
        let mut used = vec![false; base.num_elements()];
        let mut regions: Vec<Vec<usize>> = Vec::new();
        let mut order: Vec<usize> = (0..base.num_sides()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for s in order {
            if regions.len() == m {
                break;
            }
            let closure = base.closure_mask([s]);
            let elems: HashSet<usize> = (0..base.num_sides())
                .filter(|&k| closure[k])
                .flat_map(|k| base.side(k).adjacent().to_vec())
                .collect();
            // keep a one-element buffer so the regions do not share sides
            let touched: HashSet<usize> = elems
                .iter()
                .flat_map(|&t| base.element_sides(t))
                .flat_map(|k| base.side(k).adjacent().to_vec())
                .collect();
            if touched.iter().any(|&t| used[t]) {
                continue;
            }
            for &t in &touched {
                used[t] = true;
            }
            regions.push((0..base.num_sides()).filter(|&k| closure[k]).collect());
        }
        if regions.len() < m {
            continue;
        }
        let refine_regions = |skip: Option<usize>| {
            let seeds: Vec<usize> =
                regions.iter().enumerate().filter(|(j, _)| Some(*j) != skip).flat_map(|(_, r)| r.clone()).collect();
            let mut t = base.refine_local(&seeds);
            // deeper refinement whose closure stays among the new elements
            for _ in 1..depth {
                let fresh: Vec<bool> = (0..t.num_elements()).map(|e| !base.contains_element(t.element_id(e))).collect();
                let inside = |k: usize| t.side(k).adjacent().iter().all(|&e| fresh[e]);
                let seeds: Vec<usize> =
                    (0..t.num_sides()).filter(|&k| inside(k) && t.refd_local(k).into_iter().all(inside)).collect();
                if seeds.is_empty() {
                    break;
                }
                t = t.refine_local(&seeds);
            }
            t
        };
        let members: Vec<Triangulation> = (0..m).map(|j| refine_regions(Some(j))).collect();
        let upper = join_all(&members)?;
        let lower = meet_all(&members)?;
        if lower == *base && is_lower_diamond(&lower, &upper, &members) {
            return Ok(Diamond { lower, upper, members });
        }
    }
    Err(Error::Invariant(format!("no lower diamond with {m} members found on this base")))
}

/// One case of the exact-identity corpus.
#[derive(Clone, Debug)]
pub struct IdentityCase {
    pub coarse: Triangulation,
    pub fine: Triangulation,
    /// Random element of `CR_0(T)`.
    pub v_coarse: CrFunction,
    /// Random element of `CR_0(T★)`.
    pub v_fine: CrFunction,
    pub diamond: Diamond,
    /// Random element of `CR_0(T∨)`.
    pub v_upper: CrFunction,
    /// Perturbation of one interpolated coefficient (fault injection).
    pub fault: Option<(usize, f64)>,
}

/// Seeded corpus on the square and the L-shape, scalar and vector valued.
pub fn identity_corpus(seed: u64, cases: usize) -> Vec<IdentityCase> {
    (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(seed, i);
            let base = if i % 2 == 0 { crate::mesh::builtin::lshape() } else { crate::mesh::builtin::unit_square() }
                .bottom()
                .uniform_refine_times(1 + i % 2);
            let components = 1 + (i / 2) % 2;
            let coarse = { let steps = rng.random_range(0..3); random_refinement(&base, &mut rng, steps, 0.2) };
            let fine = { let steps = rng.random_range(0..4); random_refinement(&coarse, &mut rng, steps, 0.3) };
            let v_coarse = random_cr(&coarse, components, &mut rng);
            let v_fine = random_cr(&fine, components, &mut rng);
            let m = 1 + i % 3;
            let dbase = coarse.uniform_refine();
            let diamond = random_diamond(&dbase, m, 1 + i % 2, &mut rng)
                .or_else(|_| random_diamond(&dbase, 1, 1, &mut rng))
                .expect("degenerate diamond always exists");
            let v_upper = random_cr(&diamond.upper, components, &mut rng);
            IdentityCase { coarse, fine, v_coarse, v_fine, diamond, v_upper, fault: None }
        })
        .collect()
}

/// A failed identity with its residual.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Witness {
    pub case: usize,
    pub identity: String,
    pub residual: f64,
    pub detail: String,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub cases: usize,
    pub tolerance: f64,
    /// Largest residual per identity.
    pub max_residual: BTreeMap<String, f64>,
    pub failures: Vec<Witness>,
    pub vacuous: bool,
    pub verdict: Verdict,
    /// Stability ratios of the operators (not gated).
    pub measured: Vec<RatioReport>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn max_abs_diff(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

type Point2 = [f64; 2];

/// Residuals of all identities for one case, with two stability ratios.
fn identity_residuals(case: &IdentityCase) -> Result<(Vec<(&'static str, f64)>, [f64; 2])> {
    let (tc, tf) = (&case.coarse, &case.fine);
    let nc = case.v_coarse.components();
    let parent = tc.coarse_parent_map(tf)?;
    let mut out = Vec::new();

    // projection property for v ∈ CR(T★): ∇(I_T v)|_T = |T|^{-1} ∫_T ∇_NC v
    let mut iv = interpolate_cr(tc, &case.v_fine)?;
    if let Some((s, delta)) = case.fault {
        let s = s % tc.num_sides();
        let c = iv.coeff(s, 0);
        iv.set_coeff(s, 0, c + delta);
    }
    let mut means = vec![[[0.0; 2]; 2]; tc.num_elements()];
    for (k, &t) in parent.iter().enumerate() {
        for c in 0..nc {
            let g = case.v_fine.gradient(k, c);
            let a = tf.area(k) / tc.area(t);
            means[t][c][0] += a * g[0];
            means[t][c][1] += a * g[1];
        }
    }
    let mean_res =
        (0..tc.num_elements()).flat_map(|t| (0..nc).map(move |c| (t, c))).map(|(t, c)| max_abs_diff(iv.gradient(t, c), means[t][c])).fold(0.0, f64::max);
    out.push(("projection-mean", mean_res));

    // projection property for a conforming quadratic on T★
    let w: P2Function = enrich(tf, &case.v_fine)?;
    let iw = interpolate_p2_coarse(tc, &w)?;
    let mut wmeans = vec![[[0.0; 2]; 2]; tc.num_elements()];
    for (k, &t) in parent.iter().enumerate() {
        for c in 0..nc {
            let g = w.gradient_integral(k, c);
            wmeans[t][c][0] += g[0] / tc.area(t);
            wmeans[t][c][1] += g[1] / tc.area(t);
        }
    }
    let wres = (0..tc.num_elements())
        .flat_map(|t| (0..nc).map(move |c| (t, c)))
        .map(|(t, c)| max_abs_diff(iw.gradient(t, c), wmeans[t][c]))
        .fold(0.0, f64::max);
    out.push(("projection-mean-conforming", wres));

    // orthogonality: ∫∇w_T·∇v = ∫∇w_T·∇(I_T v)
    let lhs = nc_gradient_inner(&case.v_coarse, &case.v_fine)?;
    let rhs = nc_gradient_inner(&case.v_coarse, &iv)?;
    out.push(("orthogonality", (lhs - rhs).abs()));

    // enrichment gradient means on T
    let e = enrich(tc, &case.v_coarse)?;
    let eres = (0..tc.num_elements())
        .flat_map(|t| (0..nc).map(move |c| (t, c)))
        .map(|(t, c)| {
            let g = e.gradient_integral(t, c);
            let a = tc.area(t);
            let v = case.v_coarse.gradient(t, c);
            max_abs_diff([g[0] / a, g[1] / a], v)
        })
        .fold(0.0, f64::max);
    out.push(("enrichment-gradient-mean", eres));

    // I_{T★}∘E_T: gradient means and conservation
    let ie = enrich_then_interpolate(tc, tf, &case.v_coarse)?;
    let mut iemeans = vec![[[0.0; 2]; 2]; tc.num_elements()];
    for (k, &t) in parent.iter().enumerate() {
        for c in 0..nc {
            let g = ie.gradient(k, c);
            let a = tf.area(k) / tc.area(t);
            iemeans[t][c][0] += a * g[0];
            iemeans[t][c][1] += a * g[1];
        }
    }
    let ieres = (0..tc.num_elements())
        .flat_map(|t| (0..nc).map(move |c| (t, c)))
        .map(|(t, c)| max_abs_diff(iemeans[t][c], case.v_coarse.gradient(t, c)))
        .fold(0.0, f64::max);
    out.push(("composition-gradient-mean", ieres));
    let conserve = |g: &CrFunction| -> f64 {
        let mut r: f64 = 0.0;
        for (k, &t) in parent.iter().enumerate() {
            if tc.element_id(t) != tf.element_id(k) {
                continue;
            }
            for c in 0..nc {
                let (a, b) = (g.local(k, c), case.v_coarse.local(t, c));
                for j in 0..3 {
                    r = r.max((a[j] - b[j]).abs());
                }
            }
        }
        r
    };
    out.push(("composition-conservation", conserve(&ie)));

    // transfer operator
    let tr = transfer_detailed(tc, tf, &case.v_coarse)?;
    out.push(("transfer-conservation", conserve(&tr.on_fine)));
    out.push(("transfer-cr-membership", tr.fine_cr_defect));

    // lower diamond identities
    let d = &case.diamond;
    let v = &case.v_upper;
    let lhs = nc_gradient_distance_sq(v, &interpolate_cr(&d.lower, v)?)?;
    let mut rhs = 0.0;
    for tj in &d.members {
        rhs += nc_gradient_distance_sq(v, &interpolate_cr(tj, v)?)?;
    }
    out.push(("lde-interpolation", (lhs - rhs).abs()));
    let f = RhsField::scalar(Some(2), |x| 1.0 + x[0] * x[1] - x[1] * x[1]);
    let hf_lower = f.hf_sq(&d.lower);
    let lhs: f64 = d.lower.elements_not_in(&d.upper).iter().map(|&t| hf_lower[t]).sum();
    let mut rhs = 0.0;
    for tj in &d.members {
        let hf = f.hf_sq(tj);
        rhs += tj.elements_not_in(&d.upper).iter().map(|&t| hf[t]).sum::<f64>();
    }
    out.push(("lde-hf", (lhs - rhs).abs()));

    // stability ratios, measured only
    let denom = case.v_coarse.nc_energy_sq().sqrt();
    let comp_ratio = nc_gradient_distance_sq(&case.v_coarse, &ie)?.sqrt() / denom.max(1e-300);
    let jump: f64 = {
        let table = indicators(tc, &case.v_coarse, &RhsField::zero(nc))?;
        tc.sides().iter().enumerate().filter(|(_, s)| !tf.contains_side(s.key)).map(|(i, _)| table.jump[i]).sum()
    };
    let mut l2 = 0.0;
    let mid = TriangleRule::midpoints();
    for (k, &t) in parent.iter().enumerate() {
        for c in 0..nc {
            l2 += mid.integrate(&tf.element_coords(k), tf.area(k), |x| {
                (case.v_coarse.eval_point(t, x, c) - tr.on_fine.eval_point(k, x, c)).powi(2)
            }) / tc.area(t);
        }
    }
    let transfer_ratio = filtered_ratio(l2 + nc_gradient_distance_sq(&case.v_coarse, &tr.on_fine)?, jump).unwrap_or(0.0);
    Ok((out, [comp_ratio, transfer_ratio]))
}

pub const IDENTITY_TOL: f64 = 1e-10;

/// Evaluates every exact identity on every case.
pub fn check_exact_identities(corpus: &[IdentityCase]) -> IdentityReport {
    let results: Vec<Result<(Vec<(&'static str, f64)>, [f64; 2])>> = corpus.par_iter().map(identity_residuals).collect();
    let mut max_residual: BTreeMap<String, f64> = BTreeMap::new();
    let mut failures = Vec::new();
    let (mut comp, mut trans) = (Vec::new(), Vec::new());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((res, ratios)) => {
                for (name, v) in res {
                    let e = max_residual.entry(name.to_string()).or_insert(0.0);
                    *e = e.max(v);
                    if !(v <= IDENTITY_TOL) {
                        failures.push(Witness {
                            case: i,
                            identity: name.into(),
                            residual: v,
                            detail: format!("{} coarse / {} fine elements", corpus[i].coarse.num_elements(), corpus[i].fine.num_elements()),
                        });
                    }
                }
                comp.push(ratios[0]);
                trans.push(ratios[1]);
            }
            Err(e) => failures.push(Witness { case: i, identity: "evaluation".into(), residual: f64::INFINITY, detail: e.to_string() }),
        }
    }
    let vacuous = corpus.is_empty();
    let verdict = if vacuous {
        Verdict::Vacuous
    } else if failures.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    IdentityReport {
        name: "exact-identities".into(),
        cases: corpus.len(),
        tolerance: IDENTITY_TOL,
        max_residual,
        failures,
        vacuous,
        verdict,
        measured: vec![
            RatioReport::measured(
                "composition-stability",
                "‖∇_NC(v − I_{T★}E_T v)‖ / ‖∇_NC v‖",
                comp,
            ),
            RatioReport::measured(
                "transfer-stability",
                "(‖h⁻¹(v − Jv)‖² + ‖∇_NC(v − Jv)‖²) / Σ h_S²|[∂_t v]|² over bisected sides",
                trans,
            ),
        ],
    }
}

/// Interpolation stability on random conforming quadratics:
/// returns the reports for `‖h⁻¹(v − I v)‖ ≤ Λ‖∇(v − I v)‖` and
/// `‖∇(v − I v)‖ ≤ ‖∇v‖`, each with additive slack `1e-12`.
pub fn check_stability(seed: u64, cases: usize) -> Result<(RatioReport, RatioReport)> {
    let rows: Vec<Result<(f64, f64, f64)>> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(seed ^ 0x5747, i);
            let base = if i % 2 == 0 { crate::mesh::builtin::lshape() } else { crate::mesh::builtin::unit_square() }.bottom();
            let coarse = { let steps = rng.random_range(1..4); random_refinement(&base, &mut rng, steps, 0.3) };
            let fine = { let steps = rng.random_range(0..3); random_refinement(&coarse, &mut rng, steps, 0.3) };
            let w = enrich(&fine, &random_cr(&fine, 1, &mut rng))?;
            let iw = interpolate_p2_coarse(&coarse, &w)?;
            let parent = coarse.coarse_parent_map(&fine)?;
            let rule = TriangleRule::degree5();
            let (mut l2h, mut grad_err, mut grad) = (0.0, 0.0, 0.0);
            for (k, &t) in parent.iter().enumerate() {
                let verts = fine.element_coords(k);
                let gi = iw.gradient(t, 0);
                for (x, wq) in rule.map(&verts) {
                    let l = fine.barycentric(k, x);
                    let gv = w.gradient(k, l, 0);
                    let diff = w.eval(k, l, 0) - iw.eval_point(t, x, 0);
                    l2h += fine.area(k) * wq * diff * diff / coarse.area(t);
                    grad_err += fine.area(k) * wq * norm_sq([gv[0] - gi[0], gv[1] - gi[1]]);
                    grad += fine.area(k) * wq * norm_sq(gv);
                }
            }
            Ok((l2h.sqrt(), grad_err.sqrt(), grad.sqrt()))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let v1 = rows.iter().filter(|(a, b, _)| *a > LAMBDA * b + 1e-12).count();
    let v2 = rows.iter().filter(|(_, b, c)| *b > c + 1e-12).count();
    let r1 = rows.iter().map(|(a, b, _)| filtered_ratio(*a, *b).unwrap_or(0.0)).collect();
    let r2 = rows.iter().map(|(_, b, c)| filtered_ratio(*b, *c).unwrap_or(0.0)).collect();
    Ok((
        RatioReport::with_violations("interpolation-approximation", "‖h⁻¹(v − I v)‖ / ‖∇(v − I v)‖ ≤ Λ", r1, [0.0, LAMBDA], v1),
        RatioReport::with_violations("interpolation-stability", "‖∇(v − I v)‖ / ‖∇v‖ ≤ 1", r2, [0.0, 1.0], v2),
    ))
}

/// Solved nested pair `T ≤ T★`.
#[derive(Clone, Debug)]
pub struct SolvedPair {
    pub coarse: Solution,
    pub fine: Solution,
}

/// `n` nested pairs from seeded random refinements of the problem mesh.
/// Every tenth pair has `T★ = T`, every fifth-but-not-tenth `T★ = T̂`.
pub fn solved_pairs(problem: &ProblemSpec, n: usize, seed: u64, solver: &SolverOptions) -> Result<Vec<SolvedPair>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(seed, i);
            let base = problem.initial_mesh()?.uniform_refine_times(1 + i % 2);
            let coarse = { let steps = rng.random_range(0..3); random_refinement(&base, &mut rng, steps, 0.25) };
            let fine = match i % 10 {
                0 => coarse.clone(),
                5 => coarse.uniform_refine(),
                _ => { let steps = rng.random_range(1..4); random_refinement(&coarse, &mut rng, steps, 0.3) },
            };
            Ok(SolvedPair {
                coarse: solve(problem.kind, &coarse, &problem.f, solver)?,
                fine: solve(problem.kind, &fine, &problem.f, solver)?,
            })
        })
        .collect()
}

/// Slack for energy inequalities, relative to the energies involved.
pub const ENERGY_SLACK: f64 = 1e-10;

/// Bracket report (samples: position of `G(T) − G(T★)` inside the bracket,
/// `0` at the lower and `1` at the upper bound), monotonicity report
/// (samples `G(T★) − G(T)`), and the raw comparisons.
pub fn check_energy_bracket(
    pairs: &[SolvedPair],
    f: &RhsField,
    gamma: f64,
) -> Result<(RatioReport, RatioReport, Vec<EnergyComparison>)> {
    let cmp: Vec<EnergyComparison> = pairs
        .par_iter()
        .map(|p| energy_difference_vs_error(&p.coarse, &p.fine, f, gamma))
        .collect::<Result<Vec<_>>>()?;
    let pos: Vec<f64> = cmp
        .iter()
        .map(|c| {
            let w = c.upper_bound - c.lower_bound;
            if w <= 1e-14 {
                0.0
            } else {
                (c.energy_gap - c.lower_bound) / w
            }
        })
        .collect();
    let bracket_viol = cmp.iter().filter(|c| !c.bracket_ok).count();
    let bracket = RatioReport::with_violations("energy-bracket", "¼‖∇δ‖² + (γ/2 − Λ²)‖hf‖² ≤ G(T) − G(T★) ≤ ¾‖∇δ‖² + (γ + Λ²)‖hf‖²", pos, [0.0, 1.0], bracket_viol);
    let mono: Vec<(f64, f64)> = pairs
        .iter()
        .map(|p| -> Result<(f64, f64)> {
            let gc = energy(p.coarse.tri(), &p.coarse.u, f, gamma)?.total;
            let gf = energy(p.fine.tri(), &p.fine.u, f, gamma)?.total;
            Ok((gf - gc, gc.abs().max(gf.abs())))
        })
        .collect::<Result<Vec<_>>>()?;
    let viol = mono.iter().filter(|(d, _)| *d > 1e-10).count();
    let monotone = RatioReport::with_violations(
        "energy-monotonicity",
        "G(T★) − G(T) ≤ 1e-10",
        mono.iter().map(|m| m.0).collect(),
        [f64::NEG_INFINITY, 1e-10],
        viol,
    );
    Ok((bracket, monotone, cmp))
}

/// Measured equivalence ratios `quasi-error / η²(E(T)∖E(T★))` and
/// `(G(T) − G(T★)) / η²(E(T)∖E(T★))`; 0/0 samples are filtered, negative
/// or non-finite samples fail.
pub fn check_estimator_equivalence(comparisons: &[EnergyComparison]) -> (RatioReport, RatioReport) {
    let q: Vec<f64> = comparisons.iter().filter_map(|c| c.quasi_ratio).collect();
    let g: Vec<f64> = comparisons.iter().filter_map(|c| c.energy_ratio).collect();
    let neg_q = q.iter().filter(|v| !(**v >= 0.0)).count();
    let neg_g = g.iter().filter(|v| !(**v >= -1e-10)).count();
    let mut rq = RatioReport::measured("quasi-error-vs-estimator", "quasi-error / η²(E(T)∖E(T★))", q);
    let mut rg = RatioReport::measured("energy-gap-vs-estimator", "(G(T) − G(T★)) / η²(E(T)∖E(T★))", g);
    for (r, n) in [(&mut rq, neg_q), (&mut rg, neg_g)] {
        if n > 0 {
            r.violations = n;
            r.verdict = Verdict::Fail;
        }
    }
    (rq, rg)
}

/// Per-diamond results.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct DiamondSample {
    pub members: usize,
    pub interpolation_residual: f64,
    pub hf_residual: f64,
    pub energy_ratio: Option<f64>,
}

/// Exact identities on the discrete solution of `T∨` and the measured ratio
/// `(G(T∧) − G(T∨)) / Σ_j (G(T_j) − G(T∨))`.
pub fn check_lower_diamond(problem: &ProblemSpec, d: &Diamond, gamma: f64, solver: &SolverOptions) -> Result<DiamondSample> {
    if !is_lower_diamond(&d.lower, &d.upper, &d.members) {
        return Err(Error::Invariant("generator produced a non-diamond".into()));
    }
    let f = &problem.f;
    let upper = solve(problem.kind, &d.upper, f, solver)?;
    let u = &upper.u;
    let lhs = nc_gradient_distance_sq(u, &interpolate_cr(&d.lower, u)?)?;
    let mut rhs = 0.0;
    for tj in &d.members {
        rhs += nc_gradient_distance_sq(u, &interpolate_cr(tj, u)?)?;
    }
    let hf_lower = f.hf_sq(&d.lower);
    let hl: f64 = d.lower.elements_not_in(&d.upper).iter().map(|&t| hf_lower[t]).sum();
    let mut hr = 0.0;
    for tj in &d.members {
        let hf = f.hf_sq(tj);
        hr += tj.elements_not_in(&d.upper).iter().map(|&t| hf[t]).sum::<f64>();
    }
    let g = |t: &Triangulation| -> Result<f64> {
        let s = solve(problem.kind, t, f, solver)?;
        Ok(energy(t, &s.u, f, gamma)?.total)
    };
    let gu = energy(&d.upper, u, f, gamma)?.total;
    let gl = g(&d.lower)? - gu;
    let mut sum = 0.0;
    for tj in &d.members {
        sum += g(tj)? - gu;
    }
    Ok(DiamondSample {
        members: d.members.len(),
        interpolation_residual: (lhs - rhs).abs(),
        hf_residual: (hl - hr).abs(),
        energy_ratio: filtered_ratio(gl, sum),
    })
}

/// All conforming refinements of `bottom` needing at most `budget` edge
/// bisections, found breadth-first over single-element bisections and
/// deduplicated by leaf set. Fails once more than `cap` are found.
pub fn brute_force_enumerate(bottom: &Triangulation, budget: usize, cap: usize) -> Result<Vec<Triangulation>> {
    let base = bottom.count_bisected_edges();
    let mut seen: HashSet<Vec<ElemId>> = HashSet::new();
    let mut out = vec![bottom.clone()];
    seen.insert(bottom.elements().to_vec());
    let mut queue = VecDeque::from([bottom.clone()]);
    while let Some(t) = queue.pop_front() {
        for e in 0..t.num_elements() {
            let r = t.bisect_element(e);
            if r.count_bisected_edges() - base > budget {
                continue;
            }
            if seen.insert(r.elements().to_vec()) {
                if out.len() >= cap {
                    return Err(Error::EnumerationOverflow { cap });
                }
                out.push(r.clone());
                queue.push_back(r);
            }
        }
    }
    Ok(out)
}

/// Result of the instance-optimality probe.
#[derive(Clone, Debug, serde::Serialize)]
pub struct OptimalityReport {
    pub problem: String,
    pub mu: f64,
    pub budget: usize,
    pub enumerated: usize,
    /// Per AFEM iterate: `#(T_k∖T_⊥)` and `G(T_k)`.
    pub iterates: Vec<(usize, f64)>,
    /// For each tested `c`: the iterates usable at this budget and whether
    /// `G(T_k)` beat every enumerated mesh with `#(T∖T_⊥) ≤ #(T_k∖T_⊥)/c`.
    pub per_c: Vec<OptimalityRow>,
    /// Smallest tested `c` for which every usable iterate is optimal.
    pub measured_c: Option<f64>,
    /// `G(T_k) ≤ G(T_⊥)` for all `k ≥ 1`.
    pub monotone_from_bottom: bool,
    pub note: String,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct OptimalityRow {
    pub c: f64,
    pub usable_iterates: usize,
    pub optimal: bool,
    pub worst_gap: f64,
}

/// Compares AFEM iterates against all meshes within the bisection budget.
/// `c` runs through 1, 2, 4, … until the comparison set shrinks to `T_⊥`,
/// where monotonicity makes the statement hold, so the measured value is
/// finite whenever the energies are monotone.
pub fn probe_instance_optimality(
    problem: &ProblemSpec,
    mu: f64,
    gamma: f64,
    budget: usize,
    cap: usize,
    solver: &SolverOptions,
) -> Result<OptimalityReport> {
    let bottom = problem.initial_mesh()?;
    let all = brute_force_enumerate(&bottom, budget, cap)?;
    let g_of = |t: &Triangulation| -> Result<f64> {
        let s = solve(problem.kind, t, &problem.f, solver)?;
        Ok(energy(t, &s.u, &problem.f, gamma)?.total)
    };
    let enumerated: Vec<(usize, f64)> =
        all.par_iter().map(|t| Ok((t.count_new_elements(), g_of(t)?))).collect::<Result<Vec<_>>>()?;
    let config = AfemConfig {
        mu,
        gamma,
        max_iters: Some(12),
        max_elems: Some(bottom.num_elements() + 64 * budget.max(1)),
        tol: Some(0.0),
        solver: *solver,
        ..AfemConfig::default()
    };
    let run = afem_run_from(problem, &config, bottom.clone())?;
    let iterates: Vec<(usize, f64)> = run.trace.rows.iter().map(|r| (r.new_elements, r.energy)).collect();
    let g_bottom = iterates.first().map(|r| r.1).unwrap_or(0.0);
    let monotone_from_bottom = iterates.iter().skip(1).all(|r| r.1 <= g_bottom + ENERGY_SLACK * g_bottom.abs().max(1.0));
    let tol = ENERGY_SLACK * g_bottom.abs().max(1.0);
    let mut per_c = Vec::new();
    let mut measured_c = None;
    let max_new = iterates.iter().map(|r| r.0).max().unwrap_or(0);
    let mut c = 1.0f64;
    loop {
        let mut usable = 0;
        let mut worst_gap = f64::NEG_INFINITY;
        for &(n_k, g_k) in &iterates {
            let limit = (n_k as f64 / c).floor() as usize;
            // enumeration is complete up to `budget` new elements: #(T∖T_⊥) ≥ #bisections
            if limit > budget {
                continue;
            }
            usable += 1;
            let best = enumerated.iter().filter(|(n, _)| *n <= limit).map(|e| e.1).fold(f64::INFINITY, f64::min);
            worst_gap = worst_gap.max(g_k - best);
        }
        let optimal = usable > 0 && worst_gap <= tol;
        per_c.push(OptimalityRow { c, usable_iterates: usable, optimal, worst_gap });
        if optimal && measured_c.is_none() {
            measured_c = Some(c);
        }
        if (max_new as f64) / c < 1.0 || c > 1e6 {
            break;
        }
        c *= 2.0;
    }
    Ok(OptimalityReport {
        problem: problem.name.clone(),
        mu,
        budget,
        enumerated: all.len(),
        iterates,
        per_c,
        measured_c,
        monotone_from_bottom,
        note: "The constants of the instance-optimality theorem are not explicit; this probe reports the smallest \
               tested c for which every AFEM iterate beats all meshes of at most 1/c its size, and cannot falsify \
               the theorem at this scale."
            .into(),
    })
}

/// Maximal elementwise `|div_NC u|` of a Stokes solution.
pub fn max_divergence(sol: &Solution) -> Result<f64> {
    if sol.kind != ProblemKind::Stokes {
        return Err(Error::ComponentMismatch { expected: 2, actual: sol.u.components() });
    }
    Ok(sol.u.nc_divergence()?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin;

    #[test]
    fn report_statistics() {
        let r = RatioReport::bracketed("x", "a", vec![0.2, 0.5, 0.8], 0.0, 1.0, 0.0);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.min <= r.mean && r.mean <= r.max);
        let r = RatioReport::bracketed("x", "a", vec![0.2, 1.5], 0.0, 1.0, 0.0);
        assert_eq!((r.verdict, r.violations), (Verdict::Fail, 1));
        assert_eq!(RatioReport::measured("x", "a", vec![]).verdict, Verdict::Vacuous);
        assert!(r.within_drift(0.3, 1.0));
        assert!(!r.within_drift(0.05, 1.0));
    }

    #[test]
    fn enumeration_of_small_budgets() {
        let b = builtin::unit_square().bottom();
        assert_eq!(brute_force_enumerate(&b, 0, 100).unwrap().len(), 1);
        let one = brute_force_enumerate(&b, 1, 100).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(one[1].num_elements(), 4);
        assert!(matches!(brute_force_enumerate(&b, 6, 3), Err(Error::EnumerationOverflow { cap: 3 })));
    }

    #[test]
    fn diamond_generator_produces_diamonds() {
        let base = builtin::lshape().bottom().uniform_refine_times(2);
        let mut rng = case_rng(3, 0);
        for m in 1..=3 {
            let d = random_diamond(&base, m, 2, &mut rng).unwrap();
            assert!(is_lower_diamond(&d.lower, &d.upper, &d.members));
            assert_eq!(d.members.len(), m);
        }
    }
}
