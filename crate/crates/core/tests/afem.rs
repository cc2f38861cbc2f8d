use crafem::afem::{afem_run, mark, marking_sizes, replay, run_with_strategy, AfemConfig, MarkingStrategy, StopReason};
use crafem::assembly::{solve, SolverOptions};
use crafem::estimate::{eta_bar, indicators};
use crafem::mesh::builtin;
use crafem::problems::problem;
use crafem::verify::{
    brute_force_enumerate, case_rng, check_exact_identities, check_lower_diamond, identity_corpus, random_diamond,
};
use crafem::Error;

fn first_step_table(name: &str) -> (crafem::mesh::Triangulation, crafem::estimate::IndicatorTable) {
    let p = problem(name).unwrap();
    let tri = p.initial_mesh().unwrap().uniform_refine_times(2);
    let sol = solve(p.kind, &tri, &p.f, &SolverOptions::default()).unwrap();
    let table = indicators(&tri, &sol.u, &p.f).unwrap();
    (tri, table)
}

#[test]
fn larger_mu_marks_fewer_sides() {
    let (tri, table) = first_step_table("lshape-poisson-f1");
    let strict = mark(&tri, &table, 1.0).unwrap();
    let loose = mark(&tri, &table, 0.1).unwrap();
    assert!(!strict.is_empty());
    assert!(strict.marked.len() <= loose.marked.len());
    let (bar, _) = eta_bar(&tri, &table).unwrap();
    assert_eq!(strict.eta_bar_sq, bar);
    // the first selection attains η̄²
    assert!(strict.log[0].marked && strict.log[0].refd_value == bar);
    for d in strict.log.iter().filter(|d| d.marked) {
        assert!(d.tested >= bar);
    }
}

#[test]
fn mu_outside_the_unit_interval_is_rejected() {
    let (tri, table) = first_step_table("square-poisson-f1");
    for mu in [0.0, -0.5, 1.5, f64::NAN] {
        assert!(matches!(mark(&tri, &table, mu), Err(Error::InvalidParameter(_))));
    }
}

#[test]
fn replay_reproduces_the_marking() {
    let (tri, table) = first_step_table("lshape-stokes-f10");
    let m = mark(&tri, &table, 0.3).unwrap();
    assert_eq!(replay(&tri, &table, &m).unwrap(), m.marked);
    let mut bad = m.clone();
    bad.log[0].tested *= 2.0;
    assert!(replay(&tri, &table, &bad).is_err());
}

#[test]
fn zero_load_converges_immediately() {
    let p = problem("square-poisson-zero").unwrap();
    let run = afem_run(&p, &AfemConfig::default()).unwrap();
    assert_eq!(run.trace.stop, StopReason::Converged);
    assert_eq!(run.trace.rows.len(), 1);
    assert_eq!(run.trace.rows[0].n_marked, 0);
}

#[test]
fn afem_is_deterministic_and_monotone() {
    let p = problem("lshape-poisson-f1").unwrap();
    let config = AfemConfig { max_iters: Some(8), max_elems: Some(5000), ..AfemConfig::default() };
    let a = afem_run(&p, &config).unwrap();
    let b = afem_run(&p, &config).unwrap();
    assert_eq!(a.trace.to_csv_with(false), b.trace.to_csv_with(false));
    let g = a.trace.energies();
    for w in g.windows(2) {
        assert!(w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0), "{w:?}");
    }
    assert_eq!(a.trace.rows[0].marked_before, 0);
    assert!(a.trace.bdd_ratios().iter().all(|r| r.is_finite() && *r > 0.0));
    assert_eq!(marking_sizes(&a.trace).len(), a.trace.rows.len());
}

#[test]
fn invalid_configurations_are_rejected() {
    let p = problem("square-poisson-f1").unwrap();
    let none = AfemConfig { max_iters: None, max_elems: None, tol: None, ..AfemConfig::default() };
    assert!(afem_run(&p, &none).is_err());
    let gamma = AfemConfig { gamma: -1.0, ..AfemConfig::default() };
    assert!(afem_run(&p, &gamma).is_err());
}

#[test]
fn strategies_run_side_by_side() {
    let p = problem("lshape-poisson-f1").unwrap();
    for s in [
        MarkingStrategy::ModifiedMaximum { mu: 0.5 },
        MarkingStrategy::Dorfler { theta: 0.3 },
        MarkingStrategy::Maximum { mu: 0.5 },
    ] {
        let rows = run_with_strategy(&p, s, 2000, 6, 0.5, &SolverOptions::default()).unwrap();
        assert!(rows.len() >= 2, "{}", s.label());
        assert!(rows[1].n_elems > rows[0].n_elems);
    }
    assert!(run_with_strategy(&p, MarkingStrategy::Dorfler { theta: 2.0 }, 100, 2, 0.5, &SolverOptions::default())
        .is_err());
}

#[test]
fn enumeration_of_the_square() {
    // B = 0: the bottom; B = 1: the diagonal bisected once (both halves);
    // B = 2: additionally one of the four boundary edges.
    let bottom = builtin::unit_square().bottom();
    let counts: Vec<usize> = (0..3).map(|b| brute_force_enumerate(&bottom, b, 1000).unwrap().len()).collect();
    assert_eq!(counts, vec![1, 2, 6]);
    assert!(matches!(brute_force_enumerate(&bottom, 2, 3), Err(Error::EnumerationOverflow { cap: 3 })));
}

#[test]
fn degenerate_diamond_has_ratio_one() {
    let p = problem("lshape-poisson-f1").unwrap();
    let base = p.initial_mesh().unwrap().uniform_refine();
    let d = random_diamond(&base, 1, 1, &mut case_rng(0, 0)).unwrap();
    let s = check_lower_diamond(&p, &d, 0.5, &SolverOptions::default()).unwrap();
    assert_eq!(s.members, 1);
    assert!(s.interpolation_residual < 1e-14 && s.hf_residual < 1e-14);
    assert!(s.energy_ratio.is_none() || (s.energy_ratio.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn two_member_diamonds_satisfy_the_identities() {
    let p = problem("square-poisson-f1").unwrap();
    let base = p.initial_mesh().unwrap().uniform_refine_times(2);
    for seed in 0..4 {
        let d = random_diamond(&base, 2, 1, &mut case_rng(seed, 0)).unwrap();
        let s = check_lower_diamond(&p, &d, 0.5, &SolverOptions::default()).unwrap();
        assert!(s.interpolation_residual < 1e-10 && s.hf_residual < 1e-14, "{s:?}");
        assert!(s.energy_ratio.unwrap() > 0.0);
    }
}

#[test]
fn identity_suite_detects_injected_faults() {
    let mut corpus = identity_corpus(3, 8);
    assert!(check_exact_identities(&corpus).passed());
    corpus[2].fault = Some((0, 1e-3));
    let report = check_exact_identities(&corpus);
    assert!(!report.passed());
    assert!(report.failures.iter().any(|w| w.case == 2));
    let empty = check_exact_identities(&[]);
    assert!(empty.vacuous && !empty.passed());
}
