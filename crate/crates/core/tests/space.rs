use crafem::mesh::{builtin, parse_mesh, Triangulation};
use crafem::quadrature::TriangleRule;
use crafem::space::{
    enrich, enrich_then_interpolate, interpolate_closure, interpolate_cr, nc_gradient_distance_sq, nc_gradient_inner,
    project_p0, project_p0_closure, transfer_detailed, CrFunction, P0Function,
};
use crafem::verify::{case_rng, random_cr, random_refinement};
use crafem::Error;
use proptest::prelude::*;

fn unit_triangle() -> Triangulation {
    parse_mesh("vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\n").unwrap().bottom()
}

fn side_with_midpoint(tri: &Triangulation, m: [f64; 2]) -> usize {
    (0..tri.num_sides())
        .find(|&s| {
            let p = tri.side(s).midpoint;
            (p[0] - m[0]).abs() < 1e-14 && (p[1] - m[1]).abs() < 1e-14
        })
        .expect("side exists")
}

#[test]
fn edge_mean_of_x_squared() {
    let t = unit_triangle();
    let v = interpolate_closure(&t, 1, |x| [x[0] * x[0], 0.0]);
    let hyp = side_with_midpoint(&t, [0.5, 0.5]);
    assert!((v.coeff(hyp, 0) - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn affine_functions_are_reproduced() {
    let t = builtin::lshape().bottom().uniform_refine_times(2);
    let affine = |x: [f64; 2]| [2.0 * x[0] - x[1] + 0.5, x[1]];
    let v = interpolate_closure(&t, 2, affine);
    for e in 0..t.num_elements() {
        assert!((v.gradient(e, 0)[0] - 2.0).abs() < 1e-13 && (v.gradient(e, 0)[1] + 1.0).abs() < 1e-13);
        let c = t.centroid(e);
        assert!((v.eval_point(e, c, 1) - c[1]).abs() < 1e-13);
    }
}

#[test]
fn basis_gradient_of_the_diagonal() {
    let t = builtin::unit_square().bottom();
    let diag = side_with_midpoint(&t, [0.5, 0.5]);
    let mut coeffs = vec![0.0; t.num_sides()];
    coeffs[diag] = 1.0;
    let v = CrFunction::from_coeffs(&t, 1, coeffs).unwrap();
    // element 0 is (0,0),(1,0),(1,1), where the barycentric opposite the diagonal is x − y
    let g = v.gradient(0, 0);
    assert!((g[0] + 2.0).abs() < 1e-14 && (g[1] - 2.0).abs() < 1e-14);
    assert!(CrFunction::zero(&t, 1).nc_gradient().grads.iter().flatten().flatten().all(|v| *v == 0.0));
}

#[test]
fn divergence_needs_a_vector_field() {
    let t = builtin::unit_square().bottom();
    assert!(matches!(CrFunction::zero(&t, 1).nc_divergence(), Err(Error::ComponentMismatch { .. })));
}

#[test]
fn boundary_coefficients_must_vanish() {
    let t = builtin::unit_square().bottom();
    assert!(CrFunction::from_coeffs(&t, 1, vec![1.0; t.num_sides()]).is_err());
}

#[test]
fn p0_projection_examples() {
    let t = unit_triangle();
    let q = project_p0_closure(&t, TriangleRule::degree5(), |x| x[0]);
    assert!((q.value(0) - 1.0 / 3.0).abs() < 1e-15);
    let c = project_p0_closure(&t, TriangleRule::degree5(), |_| 2.5);
    assert!((c.value(0) - 2.5).abs() < 1e-15);
    let coarse = builtin::unit_square().bottom();
    let fine = coarse.uniform_refine();
    let vals: Vec<f64> = (0..fine.num_elements()).map(|k| k as f64).collect();
    let p = P0Function::new(&fine, vals.clone()).unwrap();
    let r = project_p0(&coarse, &p).unwrap();
    let parent = coarse.coarse_parent_map(&fine).unwrap();
    for t in 0..2 {
        let expect: f64 = parent.iter().enumerate().filter(|(_, &q)| q == t).map(|(k, _)| fine.area(k) * vals[k]).sum::<f64>() / coarse.area(t);
        assert!((r.value(t) - expect).abs() < 1e-14);
    }
    assert_eq!(project_p0(&fine, &p).unwrap().values(), p.values());
}

#[test]
fn enrichment_examples() {
    let t = builtin::unit_square().bottom().uniform_refine();
    let zero = enrich(&t, &CrFunction::zero(&t, 1)).unwrap();
    for v in 0..t.num_vertices() {
        assert_eq!(zero.vertex_value(v, 0), 0.0);
    }
    let mut rng = case_rng(7, 0);
    let v = random_cr(&t, 1, &mut rng);
    let e = enrich(&t, &v).unwrap();
    for k in 0..t.num_elements() {
        let g = e.gradient_integral(k, 0);
        let nc = v.gradient(k, 0);
        assert!((g[0] - t.area(k) * nc[0]).abs() < 1e-12 && (g[1] - t.area(k) * nc[1]).abs() < 1e-12);
    }
    // continuous: both traces agree at side quadrature points
    for s in t.sides().iter().filter(|s| !s.boundary) {
        let [a, b] = s.elements;
        for w in [0.2, 0.5, 0.9] {
            let [p, q] = s.key.endpoints().map(|v| t.forest().coord(v));
            let x = [p[0] + w * (q[0] - p[0]), p[1] + w * (q[1] - p[1])];
            assert!((e.eval_point(a, x, 0) - e.eval_point(b, x, 0)).abs() < 1e-13);
        }
    }
    for s in t.sides().iter().filter(|s| s.boundary) {
        assert!(e.eval_point(s.elements[0], s.midpoint, 0).abs() < 1e-14);
    }
}

#[test]
fn composition_is_identity_without_refinement() {
    let t = builtin::lshape().bottom().uniform_refine();
    let v = random_cr(&t, 2, &mut case_rng(1, 1));
    let w = enrich_then_interpolate(&t, &t, &v).unwrap();
    for (a, b) in v.coeffs().iter().zip(w.coeffs()) {
        assert!((a - b).abs() < 1e-13);
    }
    let coarse = t.uniform_refine();
    assert!(enrich_then_interpolate(&coarse, &t, &v).is_err());
}

#[test]
fn transfer_examples() {
    let t = builtin::unit_square().bottom();
    let v = random_cr(&t, 1, &mut case_rng(3, 3));
    let same = transfer_detailed(&t, &t, &v).unwrap();
    for (a, b) in v.coeffs().iter().zip(same.on_fine.coeffs()) {
        assert!((a - b).abs() < 1e-14);
    }
    let fine = t.uniform_refine();
    let star = fine.uniform_refine();
    let v = random_cr(&fine, 1, &mut case_rng(3, 4));
    let r = transfer_detailed(&fine, &star, &v).unwrap();
    assert!(r.fine_cr_defect <= 1e-12);
    assert_eq!(r.on_fine.tri(), &star);
}

fn nested(seed: u64) -> (Triangulation, Triangulation) {
    let mut rng = case_rng(seed, 0);
    let base = if seed.is_multiple_of(2) { builtin::lshape() } else { builtin::unit_square() }.bottom().uniform_refine();
    let coarse = random_refinement(&base, &mut rng, 1 + (seed % 2) as usize, 0.3);
    let fine = random_refinement(&coarse, &mut rng, 2, 0.3);
    (coarse, fine)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interpolation_is_a_projection(seed in 0u64..1000) {
        let (coarse, fine) = nested(seed);
        let v = random_cr(&coarse, 1, &mut case_rng(seed, 1));
        let again = interpolate_cr(&coarse, &v).unwrap();
        for (a, b) in v.coeffs().iter().zip(again.coeffs()) {
            prop_assert!((a - b).abs() < 1e-13);
        }
        // gradient means over coarse elements
        let w = random_cr(&fine, 1, &mut case_rng(seed, 2));
        let iw = interpolate_cr(&coarse, &w).unwrap();
        let parent = coarse.coarse_parent_map(&fine).unwrap();
        let mut mean = vec![[0.0; 2]; coarse.num_elements()];
        for (k, &t) in parent.iter().enumerate() {
            let g = w.gradient(k, 0);
            mean[t][0] += fine.area(k) * g[0] / coarse.area(t);
            mean[t][1] += fine.area(k) * g[1] / coarse.area(t);
        }
        for t in 0..coarse.num_elements() {
            let g = iw.gradient(t, 0);
            prop_assert!((g[0] - mean[t][0]).abs() < 1e-11 && (g[1] - mean[t][1]).abs() < 1e-11);
        }
    }

    #[test]
    fn interpolation_is_the_best_approximation(seed in 0u64..1000) {
        let (coarse, fine) = nested(seed);
        let w = random_cr(&fine, 1, &mut case_rng(seed, 5));
        let iw = interpolate_cr(&coarse, &w).unwrap();
        let best = nc_gradient_distance_sq(&w, &iw).unwrap();
        let mut rng = case_rng(seed, 6);
        for _ in 0..100 {
            let other = random_cr(&coarse, 1, &mut rng);
            prop_assert!(best <= nc_gradient_distance_sq(&w, &other).unwrap() * (1.0 + 1e-12) + 1e-14);
        }
    }

    #[test]
    fn orthogonality(seed in 0u64..1000) {
        let (coarse, fine) = nested(seed);
        let wt = random_cr(&coarse, 2, &mut case_rng(seed, 8));
        let v = random_cr(&fine, 2, &mut case_rng(seed, 9));
        let lhs = nc_gradient_inner(&wt, &v).unwrap();
        let rhs = nc_gradient_inner(&wt, &interpolate_cr(&coarse, &v).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn conservation_on_unrefined_elements(seed in 0u64..1000) {
        let (coarse, fine) = nested(seed);
        let v = random_cr(&coarse, 1, &mut case_rng(seed, 10));
        let ie = enrich_then_interpolate(&coarse, &fine, &v).unwrap();
        let tr = transfer_detailed(&coarse, &fine, &v).unwrap();
        prop_assert!(tr.fine_cr_defect < 1e-12);
        for k in 0..fine.num_elements() {
            if let Some(t) = coarse.element_index(fine.element_id(k)) {
                for j in 0..3 {
                    prop_assert!((ie.local(k, 0)[j] - v.local(t, 0)[j]).abs() < 1e-12);
                    prop_assert!((tr.on_fine.local(k, 0)[j] - v.local(t, 0)[j]).abs() < 1e-12);
                }
            }
        }
    }
}
