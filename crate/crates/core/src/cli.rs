//! Batch runner behind the `crafem` binary.
//!
//! Every subcommand writes one artifact (CSV or JSON) to `--out` or stdout and
//! reports through [`Outcome`] whether its gating checks held.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use crate::afem::{afem_run_from, run_with_strategy_from, AfemConfig, MarkingStrategy, StrategyRow};
use crate::assembly::{reference_solution, solve, SolverOptions};
use crate::error::{Error, Result};
use crate::estimate::{energy, indicators};
use crate::mesh::Triangulation;
use crate::problems::{catalog, problem, ProblemSpec};
use crate::space::{nc_gradient_distance_sq, DEFAULT_GAMMA};
use crate::verify::{
    brute_force_enumerate, case_rng, check_energy_bracket, check_estimator_equivalence, check_exact_identities,
    check_lower_diamond, check_stability, identity_corpus, probe_instance_optimality, random_diamond, solved_pairs,
    RatioReport,
};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "CRAFEM_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "crafem", version, about = "Adaptive Crouzeix-Raviart finite elements for Poisson and Stokes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve on one mesh and dump the discrete solution.
    Solve(SolveArgs),
    /// Run the adaptive loop and write the per-iteration trace.
    Afem(AfemArgs),
    /// Run a verification suite and write JSON reports.
    Verify(VerifyArgs),
    /// Census of all refinements within a bisection budget.
    Enumerate(EnumerateArgs),
    /// Modified maximum, Dörfler and plain maximum marking on the same problem.
    CompareMarking(CompareArgs),
    /// List the problem catalog.
    Problems(OutputArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    #[arg(long, default_value = "lshape-poisson-f1")]
    pub problem: String,
    /// Uniform refinements of the catalog mesh before starting.
    #[arg(long, default_value_t = 0, value_name = "K")]
    pub refine_uniform: usize,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
}

impl ProblemArgs {
    fn load(&self) -> Result<(ProblemSpec, Triangulation)> {
        let p = problem(&self.problem)?;
        let tri = p.initial_mesh()?.uniform_refine_times(self.refine_uniform);
        Ok((p, tri))
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Also solve on the mesh refined K more times and report the distance.
    #[arg(long, value_name = "K")]
    pub kref: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct AfemArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_elems: usize,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stop once the total estimator drops below this value.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Fill the wall-time column (makes the CSV non-reproducible).
    #[arg(long)]
    pub timings: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Exact,
    Stability,
    Energy,
    Estimator,
    Diamond,
    All,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Corpus size (identities, stability) or number of solved pairs.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Maximal number of edge bisections beyond the initial mesh.
    #[arg(long, default_value_t = 4)]
    pub budget: usize,
    #[arg(long, default_value_t = 200_000)]
    pub cap: usize,
    /// Compare AFEM iterates against the census with this μ.
    #[arg(long)]
    pub mu: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    /// Bulk parameter of Dörfler marking.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_elems: usize,
    #[arg(long, default_value_t = 30)]
    pub max_iters: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Result of a subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    ChecksFailed,
}

impl Outcome {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Passed
        } else {
            Outcome::ChecksFailed
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Passed => 0,
            Outcome::ChecksFailed => 1,
        }
    }
}

/// Exit code for errors (bad flags, unknown problems, solver failures).
pub const ERROR_EXIT: i32 = 2;

/// Rayon pool size from [`WORKERS_ENV`]; `None` if unset.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidParameter(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        },
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(output: &OutputArgs, default: Format, csv: impl FnOnce() -> Result<String>, json: impl FnOnce() -> Result<String>) -> Result<()> {
    let text = match output.format.unwrap_or(default) {
        Format::Csv => csv()?,
        Format::Json => {
            let mut s = json()?;
            s.push('\n');
            s
        }
    };
    let mut w = sink(&output.out)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Afem(a) => run_afem(a),
        Command::Verify(a) => run_verify(a),
        Command::Enumerate(a) => run_enumerate(a),
        Command::CompareMarking(a) => run_compare(a),
        Command::Problems(o) => run_problems(o),
    }
}

fn run_problems(o: &OutputArgs) -> Result<Outcome> {
    let list = catalog();
    emit(
        o,
        Format::Csv,
        || {
            let mut s = String::from("name,kind,exact,description\n");
            for p in &list {
                s.push_str(&format!("{},{:?},{},\"{}\"\n", p.name, p.kind, p.exact.is_some(), p.description));
            }
            Ok(s)
        },
        || {
            let rows: Vec<_> = list
                .iter()
                .map(|p| json!({"name": p.name, "kind": format!("{:?}", p.kind), "exact": p.exact.is_some(), "description": p.description}))
                .collect();
            Ok(serde_json::to_string_pretty(&rows)?)
        },
    )?;
    Ok(Outcome::Passed)
}

fn run_solve(a: &SolveArgs) -> Result<Outcome> {
    let (p, tri) = a.problem.load()?;
    let solver = SolverOptions::default();
    let sol = solve(p.kind, &tri, &p.f, &solver)?;
    let g = energy(&tri, &sol.u, &p.f, a.problem.gamma)?;
    let eta: f64 = indicators(&tri, &sol.u, &p.f)?.sum_all();
    let exact_error = p.exact.as_ref().map(|ex| ex.error_sq(&sol.u).sqrt());
    let reference_distance = match a.kref {
        Some(k) => {
            let r = reference_solution(p.kind, &tri, k, &p.f, &solver)?;
            Some(nc_gradient_distance_sq(&sol.u, &r.u)?.sqrt())
        }
        None => None,
    };
    log::info!("{}: {} elements, energy {:.12e}, η² {:.6e}", p.name, tri.num_elements(), g.total, eta);
    let comps = sol.u.components();
    emit(
        &a.output,
        Format::Csv,
        || {
            let mut s = String::from(if comps == 1 { "x,y,boundary,u\n" } else { "x,y,boundary,u1,u2\n" });
            for (i, side) in tri.sides().iter().enumerate() {
                let [x, y] = side.midpoint;
                s.push_str(&format!("{x},{y},{}", side.boundary as u8));
                for c in 0..comps {
                    s.push_str(&format!(",{:.17e}", sol.u.coeff(i, c)));
                }
                s.push('\n');
            }
            Ok(s)
        },
        || {
            let sides: Vec<_> = tri
                .sides()
                .iter()
                .enumerate()
                .map(|(i, side)| json!({"midpoint": side.midpoint, "boundary": side.boundary, "u": (0..comps).map(|c| sol.u.coeff(i, c)).collect::<Vec<_>>()}))
                .collect();
            Ok(serde_json::to_string_pretty(&json!({
                "problem": p.name,
                "elements": tri.num_elements(),
                "sides": tri.num_sides(),
                "stats": sol.stats,
                "energy": g,
                "eta_total_sq": eta,
                "exact_error": exact_error,
                "reference_distance": reference_distance,
                "pressure": sol.p.as_ref().map(|q| q.values().to_vec()),
                "solution": sides,
            }))?)
        },
    )?;
    Ok(Outcome::Passed)
}

fn run_afem(a: &AfemArgs) -> Result<Outcome> {
    let (p, tri) = a.problem.load()?;
    let config = AfemConfig {
        mu: a.mu,
        gamma: a.problem.gamma,
        max_iters: a.max_iters,
        max_elems: Some(a.max_elems),
        tol: Some(a.tol),
        ..AfemConfig::default()
    };
    let run = afem_run_from(&p, &config, tri)?;
    let g = run.trace.energies();
    let monotone = g.windows(2).all(|w| w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0));
    if !monotone {
        log::error!("energy increased along the adaptive sequence");
    }
    emit(&a.output, Format::Csv, || Ok(run.trace.to_csv_with(a.timings)), || Ok(serde_json::to_string_pretty(&run.trace)?))?;
    Ok(Outcome::from_bool(monotone))
}

fn run_verify(a: &VerifyArgs) -> Result<Outcome> {
    let suites: Vec<Suite> = match a.suite {
        Suite::All => vec![Suite::Exact, Suite::Stability, Suite::Energy, Suite::Diamond],
        s => vec![s],
    };
    let mut reports: BTreeMap<&'static str, serde_json::Value> = BTreeMap::new();
    let mut ok = true;
    let solver = SolverOptions::default();
    let p = problem(&a.problem.problem)?;
    let gamma = a.problem.gamma;
    for s in suites {
        match s {
            Suite::Exact => {
                let r = check_exact_identities(&identity_corpus(a.seed, a.cases));
                ok &= r.passed();
                reports.insert("exact", serde_json::to_value(&r)?);
            }
            Suite::Stability => {
                let (r1, r2) = check_stability(a.seed, a.cases)?;
                ok &= r1.passed() && r2.passed();
                reports.insert("stability", serde_json::to_value([r1, r2])?);
            }
            Suite::Energy | Suite::Estimator => {
                let pairs = solved_pairs(&p, a.cases.min(50), a.seed, &solver)?;
                let (bracket, monotone, cmps) = check_energy_bracket(&pairs, &p.f, gamma)?;
                let (rq, rg) = check_estimator_equivalence(&cmps);
                ok &= bracket.passed() && monotone.passed() && rq.passed() && rg.passed();
                reports.insert("energy", serde_json::to_value([bracket, monotone, rq, rg])?);
            }
            Suite::Diamond => {
                let base = p.initial_mesh()?.uniform_refine_times(2 + a.problem.refine_uniform);
                let n = a.cases.min(20);
                let samples = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = case_rng(a.seed, i);
                        // small bases may not fit three disjoint regions
                        let d = random_diamond(&base, 1 + i % 3, 1, &mut rng)
                            .or_else(|_| random_diamond(&base, 2, 1, &mut rng))?;
                        check_lower_diamond(&p, &d, gamma, &solver)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let interp = RatioReport::bracketed(
                    "diamond-interpolation",
                    "|‖∇(u − I_∧u)‖² − Σ_j ‖∇(u − I_j u)‖²|",
                    samples.iter().map(|s| s.interpolation_residual).collect(),
                    0.0,
                    1e-10,
                    0.0,
                );
                let hf = RatioReport::bracketed(
                    "diamond-data",
                    "|‖hf‖²(T∧∖T∨) − Σ_j ‖hf‖²(T_j∖T∨)|",
                    samples.iter().map(|s| s.hf_residual).collect(),
                    0.0,
                    1e-12,
                    0.0,
                );
                let ratio = RatioReport::measured(
                    "diamond-energy-ratio",
                    "(G(T∧) − G(T∨)) / Σ_j (G(T_j) − G(T∨))",
                    samples.iter().filter_map(|s| s.energy_ratio).collect(),
                );
                ok &= interp.passed() && hf.passed() && ratio.passed();
                reports.insert("diamond", serde_json::to_value([interp, hf, ratio])?);
            }
            Suite::All => unreachable!(),
        }
    }
    let body = json!({"seed": a.seed, "cases": a.cases, "passed": ok, "reports": reports});
    emit(&a.output, Format::Json, || Err(Error::InvalidParameter("verify writes JSON only".into())), || {
        Ok(serde_json::to_string_pretty(&body)?)
    })?;
    Ok(Outcome::from_bool(ok))
}

fn run_enumerate(a: &EnumerateArgs) -> Result<Outcome> {
    let (p, tri) = a.problem.load()?;
    if let Some(mu) = a.mu {
        if a.problem.refine_uniform != 0 {
            return Err(Error::InvalidParameter("the probe starts from the catalog mesh".into()));
        }
        let report = probe_instance_optimality(&p, mu, a.problem.gamma, a.budget, a.cap, &SolverOptions::default())?;
        let ok = report.monotone_from_bottom && report.measured_c.is_some();
        emit(&a.output, Format::Json, || Err(Error::InvalidParameter("the probe writes JSON only".into())), || {
            Ok(serde_json::to_string_pretty(&report)?)
        })?;
        return Ok(Outcome::from_bool(ok));
    }
    let all = brute_force_enumerate(&tri, a.budget, a.cap)?;
    let base = tri.count_bisected_edges();
    let mut census: BTreeMap<usize, usize> = BTreeMap::new();
    for t in &all {
        *census.entry(t.count_bisected_edges() - base).or_default() += 1;
    }
    emit(
        &a.output,
        Format::Csv,
        || {
            let mut s = String::from("bisections,meshes\n");
            for (k, n) in &census {
                s.push_str(&format!("{k},{n}\n"));
            }
            Ok(s)
        },
        || Ok(serde_json::to_string_pretty(&json!({"problem": p.name, "budget": a.budget, "total": all.len(), "by_bisections": census}))?),
    )?;
    Ok(Outcome::Passed)
}

fn run_compare(a: &CompareArgs) -> Result<Outcome> {
    let (p, tri) = a.problem.load()?;
    let strategies = [
        MarkingStrategy::ModifiedMaximum { mu: a.mu },
        MarkingStrategy::Dorfler { theta: a.theta },
        MarkingStrategy::Maximum { mu: a.mu },
    ];
    let solver = SolverOptions::default();
    let runs: Vec<Vec<StrategyRow>> = strategies
        .par_iter()
        .map(|s| run_with_strategy_from(&p, *s, tri.clone(), a.max_elems, a.max_iters, a.problem.gamma, &solver))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<StrategyRow> = runs.into_iter().flatten().collect();
    emit(
        &a.output,
        Format::Csv,
        || {
            let mut s = String::from("strategy,iter,n_elems,n_marked,eta_total_sq,energy\n");
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{},{:.12e},{:.15e}\n",
                    r.strategy, r.iter, r.n_elems, r.n_marked, r.eta_total_sq, r.energy
                ));
            }
            Ok(s)
        },
        || Ok(serde_json::to_string_pretty(&rows)?),
    )?;
    Ok(Outcome::Passed)
}
