use crafem::assembly::{
    assemble, galerkin_defect, nc_projection, solve, solve_stokes, RhsField, SolveMethod, SolverOptions,
};
use crafem::estimate::{energy, energy_difference_vs_error, filtered_ratio, indicators, oscillation};
use crafem::mesh::builtin;
use crafem::problems::problem;
use crafem::quadrature::TriangleRule;
use crafem::space::{nc_gradient_distance_sq, CrFunction};
use crafem::verify::{case_rng, max_divergence, random_cr, random_refinement};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn load_vector_matches_a_high_order_rule() {
    // polynomial load of degree 5
    let p = problem("square-stokes-manufactured").unwrap();
    let tri = builtin::unit_square().bottom().uniform_refine_times(2);
    let rule = TriangleRule::collapsed_gauss(12);
    for t in 0..tri.num_elements() {
        let verts = tri.element_coords(t);
        for c in 0..2 {
            let local = p.f.local_load(&tri, t, c);
            for k in 0..3 {
                // ψ_k = 1 − 2λ_k
                let expect = rule.integrate(&verts, tri.area(t), |x| {
                    p.f.component(x, c) * (1.0 - 2.0 * tri.barycentric(t, x)[k])
                });
                assert!((local[k] - expect).abs() < 1e-13, "element {t} component {c} basis {k}");
            }
        }
    }
}

#[test]
fn assembled_matrices_are_symmetric() {
    for name in ["lshape-poisson-f1", "lshape-stokes-f10"] {
        let p = problem(name).unwrap();
        let tri = p.initial_mesh().unwrap().uniform_refine_times(2);
        let sys = assemble(p.kind, &tri, &p.f).unwrap();
        let a = &sys.matrix;
        for i in 0..a.dim() {
            for (j, v) in a.row(i) {
                assert!((v - a.get(j, i)).abs() < 1e-14, "{name} ({i},{j})");
            }
        }
    }
}

#[test]
fn galerkin_defect_vanishes() {
    for name in ["square-poisson-smooth", "lshape-poisson-f1", "square-stokes-f10"] {
        let p = problem(name).unwrap();
        let tri = random_refinement(&p.initial_mesh().unwrap().uniform_refine_times(2), &mut case_rng(5, 0), 3, 0.3);
        let sol = solve(p.kind, &tri, &p.f, &opts()).unwrap();
        if p.kind == crafem::assembly::ProblemKind::Poisson {
            assert!(galerkin_defect(&sol.u, &p.f).unwrap() < 1e-12, "{name}");
            // testing with u itself: ‖∇u‖² = ∫ f u
            let e = energy(&tri, &sol.u, &p.f, 0.5).unwrap();
            assert!((2.0 * e.dirichlet - e.load).abs() < 1e-12 * e.load.abs().max(1.0));
        }
        assert!(sol.stats.residual <= 1e-12 * (sol.stats.rhs_norm + 1.0));
    }
}

#[test]
fn stokes_with_zero_load_is_trivial() {
    let tri = builtin::lshape().bottom().uniform_refine();
    let sol = solve_stokes(&tri, &RhsField::zero(2), &opts()).unwrap();
    assert_eq!(sol.stats.method, SolveMethod::Trivial);
    assert!(sol.u.coeffs().iter().all(|c| *c == 0.0));
    assert!(sol.p.unwrap().values().iter().all(|c| *c == 0.0));
}

#[test]
fn stokes_solution_is_divergence_free_with_mean_zero_pressure() {
    let p = problem("square-stokes-manufactured").unwrap();
    let tri = p.initial_mesh().unwrap().uniform_refine_times(4);
    let sol = solve(p.kind, &tri, &p.f, &opts()).unwrap();
    assert_eq!(sol.stats.method, SolveMethod::Ldlt);
    assert!(max_divergence(&sol).unwrap() < 1e-10);
    let pr = sol.p.as_ref().unwrap();
    assert!(pr.is_mean_zero() && pr.integral().abs() < 1e-12);
    // first order: one uniform refinement roughly halves the energy error
    let ex = p.exact.as_ref().unwrap();
    let finer = solve(p.kind, &tri.uniform_refine(), &p.f, &opts()).unwrap();
    let ratio = (ex.error_sq(&finer.u) / ex.error_sq(&sol.u)).sqrt();
    assert!((0.4..0.6).contains(&ratio), "{ratio}");
    let scalar = solve(crafem::assembly::ProblemKind::Poisson, &tri, &RhsField::constant_scalar(1.0), &opts()).unwrap();
    assert!(max_divergence(&scalar).is_err());
}

#[test]
fn projection_satisfies_pythagoras() {
    let coarse = builtin::lshape().bottom().uniform_refine();
    let fine = random_refinement(&coarse, &mut case_rng(11, 0), 3, 0.4);
    let mut rng = case_rng(11, 1);
    for comps in [1, 2] {
        let v = random_cr(&coarse, comps, &mut rng);
        let pv = nc_projection(&fine, &v).unwrap();
        for _ in 0..5 {
            let w = random_cr(&fine, comps, &mut rng);
            let lhs = nc_gradient_distance_sq(&v, &w).unwrap();
            let rhs = nc_gradient_distance_sq(&v, &pv).unwrap() + nc_gradient_distance_sq(&pv, &w).unwrap();
            assert!((lhs - rhs).abs() < 1e-9 * lhs.max(1.0), "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn indicators_by_hand_on_the_square() {
    let tri = builtin::unit_square().bottom();
    let diag = (0..tri.num_sides()).find(|&s| !tri.side(s).boundary).unwrap();
    // volume part only: h_T² = |T| = ½, so each element adds ¼
    let t = indicators(&tri, &CrFunction::zero(&tri, 1), &RhsField::constant_scalar(1.0)).unwrap();
    for s in 0..tri.num_sides() {
        let expect = if s == diag { 0.5 } else { 0.25 };
        assert!((t.total[s] - expect).abs() < 1e-15);
    }
    // jump part only: the diagonal basis function has tangential slope ±2 on
    // the legs and 0 along the diagonal
    let mut v = CrFunction::zero(&tri, 1);
    v.set_coeff(diag, 0, 1.0);
    let t = indicators(&tri, &v, &RhsField::zero(1)).unwrap();
    for s in 0..tri.num_sides() {
        let expect = if s == diag { 0.0 } else { 4.0 };
        assert!((t.total[s] - expect).abs() < 1e-13, "side {s}: {}", t.total[s]);
    }
    assert!(indicators(&tri, &v, &RhsField::zero(2)).is_err());
}

#[test]
fn energy_of_the_zero_function() {
    let tri = builtin::unit_square().bottom().uniform_refine();
    let f = RhsField::constant_scalar(2.0);
    let e = energy(&tri, &CrFunction::zero(&tri, 1), &f, 0.5).unwrap();
    // ‖h f‖² = Σ |T|² · 4 over 8 triangles of area ⅛
    assert!((e.hf_sq - 8.0 * 4.0 / 64.0).abs() < 1e-15);
    assert!((e.total - 0.5 * e.hf_sq).abs() < 1e-15);
    assert_eq!(e.total, e.recomputed_total());
    assert!(energy(&tri, &CrFunction::zero(&tri, 1), &f, 0.0).is_err());
    assert!(oscillation(&tri, &f).total.abs() < 1e-28);
}

#[test]
fn nested_solutions_lie_in_the_energy_bracket() {
    let p = problem("lshape-poisson-f1").unwrap();
    let coarse = p.initial_mesh().unwrap().uniform_refine();
    let fine = random_refinement(&coarse, &mut case_rng(2, 2), 2, 0.5);
    let sc = solve(p.kind, &coarse, &p.f, &opts()).unwrap();
    let sf = solve(p.kind, &fine, &p.f, &opts()).unwrap();
    let cmp = energy_difference_vs_error(&sc, &sf, &p.f, 0.5).unwrap();
    assert!(cmp.bracket_ok);
    assert!(cmp.energy_gap >= 0.0);
    assert!(energy_difference_vs_error(&sf, &sc, &p.f, 0.5).is_err());
    let same = energy_difference_vs_error(&sc, &sc, &p.f, 0.5).unwrap();
    assert_eq!(same.quasi_ratio, None);
    assert_eq!(filtered_ratio(0.0, 1e-15), None);
    assert_eq!(filtered_ratio(1.0, 2.0), Some(0.5));
}
