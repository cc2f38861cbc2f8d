//! The adaptive loop SOLVE → ESTIMATE → MARK → REFINE with the modified
//! maximum marking strategy.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::assembly::{solve, SolverOptions, Solution};
use crate::error::{Error, Result};
use crate::estimate::{energy, indicators, IndicatorTable};
use crate::mesh::{bdd_ratio, SideKey, Triangulation};
use crate::problems::ProblemSpec;
use crate::space::DEFAULT_GAMMA;

/// One selection of the marking loop.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarkDecision {
    pub side: SideKey,
    /// `η²(refd(T;S))` before the loop.
    pub refd_value: f64,
    /// `η²(refd(T;S) ∖ M̃)` at the time of selection.
    pub tested: f64,
    pub marked: bool,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Marking {
    pub mu: f64,
    pub eta_bar_sq: f64,
    /// `M`, in selection order.
    pub marked: Vec<SideKey>,
    /// `M̃ = ⋃_{S ∈ M} refd(T;S)`.
    pub covered: Vec<SideKey>,
    pub log: Vec<MarkDecision>,
}

impl Marking {
    pub fn is_empty(&self) -> bool {
        self.marked.is_empty()
    }
}

/// Selection order policy for the marking loop. The loop semantics allow
/// any order; descending refd values make the first selection attain `η̄²`.
/// Equal values prefer the smaller `refd` set, then the smaller side key.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionOrder {
    #[default]
    DescendingRefd,
    SideKey,
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::InvalidParameter(format!("μ = {mu} outside (0, 1]")));
    }
    Ok(())
}

/// Modified maximum marking.
///
/// `refd` holds `refd(T;S)` per local side and must match `table`.
pub fn mark_with(
    tri: &Triangulation,
    table: &IndicatorTable,
    refd: &[Vec<usize>],
    mu: f64,
    order: SelectionOrder,
) -> Result<Marking> {
    check_mu(mu)?;
    table.ensure_on(tri)?;
    if refd.len() != tri.num_sides() {
        return Err(Error::InvalidParameter("refd table incomplete".into()));
    }
    let refd_value: Vec<f64> = refd.iter().map(|r| table.sum(r.iter().copied())).collect();
    let eta_bar_sq = refd_value.iter().copied().fold(0.0, f64::max);
    let mut out = Marking { mu, eta_bar_sq, marked: Vec::new(), covered: Vec::new(), log: Vec::new() };
    if eta_bar_sq == 0.0 {
        return Ok(out);
    }
    let mut order_idx: Vec<usize> = (0..tri.num_sides()).collect();
    match order {
        SelectionOrder::DescendingRefd => order_idx.sort_by(|&a, &b| {
            refd_value[b]
                .total_cmp(&refd_value[a])
                .then(refd[a].len().cmp(&refd[b].len()))
                .then(tri.side(a).key.cmp(&tri.side(b).key))
        }),
        SelectionOrder::SideKey => order_idx.sort_by_key(|&a| tri.side(a).key),
    }
    let mut in_c = vec![true; tri.num_sides()];
    let mut in_mt = vec![false; tri.num_sides()];
    let threshold = mu * eta_bar_sq;
    for s in order_idx {
        if !in_c[s] {
            continue;
        }
        let tested: f64 = refd[s].iter().filter(|&&r| !in_mt[r]).map(|&r| table.total[r]).sum();
        let marked = tested >= threshold;
        if marked {
            out.marked.push(tri.side(s).key);
            for &r in &refd[s] {
                if !in_mt[r] {
                    in_mt[r] = true;
                    out.covered.push(tri.side(r).key);
                }
            }
        }
        for &r in &refd[s] {
            in_c[r] = false;
        }
        out.log.push(MarkDecision { side: tri.side(s).key, refd_value: refd_value[s], tested, marked });
    }
    Ok(out)
}

pub fn mark(tri: &Triangulation, table: &IndicatorTable, mu: f64) -> Result<Marking> {
    mark_with(tri, table, &tri.refd_all(), mu, SelectionOrder::default())
}

/// Re-executes a decision log against `table` and returns the marked set.
/// Fails if a recorded selection was not admissible (already removed from
/// `C`), if a recomputed test disagrees with the log, or if `C` is not
/// exhausted at the end.
pub fn replay(tri: &Triangulation, table: &IndicatorTable, marking: &Marking) -> Result<Vec<SideKey>> {
    table.ensure_on(tri)?;
    let mu = marking.mu;
    check_mu(mu)?;
    let refd: Vec<Vec<usize>> = tri.refd_all();
    let refd_value: Vec<f64> = refd.iter().map(|r| table.sum(r.iter().copied())).collect();
    let eta_bar_sq = refd_value.iter().copied().fold(0.0, f64::max);
    if eta_bar_sq != marking.eta_bar_sq {
        return Err(Error::Invariant(format!("η̄² {} differs from recorded {}", eta_bar_sq, marking.eta_bar_sq)));
    }
    if eta_bar_sq == 0.0 {
        return Ok(Vec::new());
    }
    let mut in_c = vec![true; tri.num_sides()];
    let mut in_mt = vec![false; tri.num_sides()];
    let mut marked = Vec::new();
    for d in &marking.log {
        let s = tri.require_side(d.side)?;
        if !in_c[s] {
            return Err(Error::Invariant(format!("side {} selected after leaving C", d.side)));
        }
        let tested: f64 = refd[s].iter().filter(|&&r| !in_mt[r]).map(|&r| table.total[r]).sum();
        let decision = tested >= mu * eta_bar_sq;
        if tested != d.tested || decision != d.marked {
            return Err(Error::Invariant(format!("decision for side {} does not replay", d.side)));
        }
        if decision {
            marked.push(d.side);
            for &r in &refd[s] {
                in_mt[r] = true;
            }
        }
        for &r in &refd[s] {
            in_c[r] = false;
        }
    }
    if in_c.iter().any(|&c| c) {
        return Err(Error::Invariant("candidate set not exhausted by the log".into()));
    }
    Ok(marked)
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct AfemConfig {
    pub mu: f64,
    pub gamma: f64,
    pub max_iters: Option<usize>,
    /// Stop before solving on a mesh with more elements than this.
    pub max_elems: Option<usize>,
    /// Stop once `η²(E(T_k)) ≤ tol`.
    pub tol: Option<f64>,
    pub order: SelectionOrder,
    pub solver: SolverOptions,
    /// Keep every `T_k` and `u_k` in the result.
    pub keep_iterates: bool,
    /// Keep every decision log (with the indicator table it refers to).
    pub keep_logs: bool,
}

impl Default for AfemConfig {
    fn default() -> Self {
        AfemConfig {
            mu: 0.5,
            gamma: DEFAULT_GAMMA,
            max_iters: None,
            max_elems: Some(100_000),
            tol: Some(1e-8),
            order: SelectionOrder::default(),
            solver: SolverOptions::default(),
            keep_iterates: false,
            keep_logs: false,
        }
    }
}

impl AfemConfig {
    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu)?;
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("γ = {} must be positive", self.gamma)));
        }
        if self.max_iters.is_none() && self.max_elems.is_none() && self.tol.is_none() {
            return Err(Error::InvalidParameter("no stop rule configured".into()));
        }
        Ok(())
    }
}

/// One row of the trace.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct AfemRow {
    pub iter: usize,
    pub n_elems: usize,
    pub n_sides: usize,
    pub n_marked: usize,
    pub n_covered: usize,
    pub eta_bar_sq: f64,
    pub eta_total_sq: f64,
    pub energy: f64,
    pub err_ref: Option<f64>,
    pub seconds: f64,
    /// `#(T_k ∖ T_⊥)`.
    pub new_elements: usize,
    /// `Σ_{j<k} #M_j`.
    pub marked_before: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    Tolerance,
    MaxIterations,
    ElementBudget,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct AfemTrace {
    pub problem: String,
    pub config: AfemConfig,
    pub rows: Vec<AfemRow>,
    pub stop: StopReason,
}

pub const TRACE_HEADER: &str = "iter,n_elems,n_sides,n_marked,eta_bar_sq,eta_total_sq,energy,err_ref,seconds";

impl AfemTrace {
    pub fn to_csv(&self) -> String {
        self.to_csv_with(true)
    }

    /// CSV trace; `with_time = false` blanks the wall-time column so that
    /// identical runs produce identical bytes.
    pub fn to_csv_with(&self, with_time: bool) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let err = r.err_ref.map(|e| format!("{e:.12e}")).unwrap_or_default();
            let secs = if with_time { format!("{:.6}", r.seconds) } else { String::new() };
            out.push_str(&format!(
                "{},{},{},{},{:.12e},{:.12e},{:.15e},{},{}\n",
                r.iter, r.n_elems, r.n_sides, r.n_marked, r.eta_bar_sq, r.eta_total_sq, r.energy, err, secs
            ));
        }
        out
    }

    /// `#(T_k∖T_⊥) / Σ_{j<k} #M_j` for every `k ≥ 1`.
    pub fn bdd_ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| bdd_ratio(r.new_elements, r.marked_before)).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }
}

/// Decision log of one iteration with the data needed to replay it.
#[derive(Clone, Debug)]
pub struct MarkRecord {
    pub tri: Triangulation,
    pub table: IndicatorTable,
    pub marking: Marking,
}

#[derive(Clone, Debug)]
pub struct AfemResult {
    pub trace: AfemTrace,
    pub iterates: Vec<Solution>,
    pub logs: Vec<MarkRecord>,
    pub last: Triangulation,
}

/// Mutable loop state.
#[derive(Clone, Debug)]
pub struct AfemState {
    pub iter: usize,
    pub tri: Triangulation,
    pub marked_before: usize,
}

pub struct StepOutput {
    pub row: AfemRow,
    pub solution: Solution,
    pub table: IndicatorTable,
    pub marking: Marking,
    pub next: Option<AfemState>,
}

/// One SOLVE → ESTIMATE → MARK → REFINE pass. `next` is `None` when the
/// marking is empty (η̄² = 0).
pub fn afem_step(problem: &ProblemSpec, config: &AfemConfig, state: &AfemState) -> Result<StepOutput> {
    let wrap = |e: Error| Error::Iteration { iteration: state.iter, source: Box::new(e) };
    let start = Instant::now();
    let tri = &state.tri;
    let solution = solve(problem.kind, tri, &problem.f, &config.solver).map_err(wrap)?;
    let table = indicators(tri, &solution.u, &problem.f).map_err(wrap)?;
    let g = energy(tri, &solution.u, &problem.f, config.gamma).map_err(wrap)?;
    let refd = tri.refd_all();
    let marking = mark_with(tri, &table, &refd, config.mu, config.order).map_err(wrap)?;
    let err_ref = problem.exact.as_ref().map(|ex| ex.error_sq(&solution.u).sqrt());
    let next = if marking.is_empty() {
        None
    } else {
        let seeds: Vec<usize> = marking.marked.iter().map(|k| tri.side_index(*k).expect("marked side of T")).collect();
        Some(AfemState {
            iter: state.iter + 1,
            tri: tri.refine_local(&seeds),
            marked_before: state.marked_before + marking.marked.len(),
        })
    };
    let row = AfemRow {
        iter: state.iter,
        n_elems: tri.num_elements(),
        n_sides: tri.num_sides(),
        n_marked: marking.marked.len(),
        n_covered: marking.covered.len(),
        eta_bar_sq: marking.eta_bar_sq,
        eta_total_sq: table.sum_all(),
        energy: g.total,
        err_ref,
        seconds: start.elapsed().as_secs_f64(),
        new_elements: tri.count_new_elements(),
        marked_before: state.marked_before,
    };
    Ok(StepOutput { row, solution, table, marking, next })
}

pub fn afem_run(problem: &ProblemSpec, config: &AfemConfig) -> Result<AfemResult> {
    afem_run_from(problem, config, problem.initial_mesh()?)
}

pub fn afem_run_from(problem: &ProblemSpec, config: &AfemConfig, initial: Triangulation) -> Result<AfemResult> {
    config.validate()?;
    let mut state = AfemState { iter: 0, tri: initial, marked_before: 0 };
    let mut rows = Vec::new();
    let mut iterates = Vec::new();
    let mut logs = Vec::new();
    let stop = loop {
        if config.max_elems.is_some_and(|m| state.tri.num_elements() > m) {
            break StopReason::ElementBudget;
        }
        let out = afem_step(problem, config, &state)?;
        log::info!(
            "iter {} elems {} marked {} eta² {:.3e}",
            out.row.iter,
            out.row.n_elems,
            out.row.n_marked,
            out.row.eta_total_sq
        );
        let eta = out.row.eta_total_sq;
        rows.push(out.row);
        if config.keep_iterates {
            iterates.push(out.solution);
        }
        if config.keep_logs {
            logs.push(MarkRecord { tri: state.tri.clone(), table: out.table, marking: out.marking });
        }
        let Some(next) = out.next else { break StopReason::Converged };
        if config.tol.is_some_and(|t| eta <= t) {
            break StopReason::Tolerance;
        }
        if config.max_iters.is_some_and(|m| state.iter + 1 >= m) {
            break StopReason::MaxIterations;
        }
        state = next;
    };
    let trace = AfemTrace { problem: problem.name.clone(), config: config.clone(), rows, stop };
    Ok(AfemResult { trace, iterates, logs, last: state.tri })
}

/// Marking strategies compared by the CLI experiment.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkingStrategy {
    ModifiedMaximum { mu: f64 },
    /// Smallest set of sides with `Σ η² ≥ θ η²(E(T))`, largest first.
    Dorfler { theta: f64 },
    /// Sides with `η²(S) ≥ μ max η²`.
    Maximum { mu: f64 },
}

impl MarkingStrategy {
    pub fn label(&self) -> String {
        match self {
            MarkingStrategy::ModifiedMaximum { mu } => format!("modified-max({mu})"),
            MarkingStrategy::Dorfler { theta } => format!("dorfler({theta})"),
            MarkingStrategy::Maximum { mu } => format!("max({mu})"),
        }
    }

    pub fn select(&self, tri: &Triangulation, table: &IndicatorTable) -> Result<Vec<usize>> {
        match *self {
            MarkingStrategy::ModifiedMaximum { mu } => {
                let m = mark(tri, table, mu)?;
                Ok(m.marked.iter().map(|k| tri.side_index(*k).expect("side of T")).collect())
            }
            MarkingStrategy::Dorfler { theta } => {
                if !(theta > 0.0 && theta <= 1.0) {
                    return Err(Error::InvalidParameter(format!("θ = {theta} outside (0, 1]")));
                }
                let total = table.sum_all();
                let mut idx: Vec<usize> = (0..table.len()).collect();
                idx.sort_by(|&a, &b| table.total[b].total_cmp(&table.total[a]).then(table.keys[a].cmp(&table.keys[b])));
                let mut acc = 0.0;
                let mut out = Vec::new();
                for s in idx {
                    if acc >= theta * total || table.total[s] == 0.0 {
                        break;
                    }
                    acc += table.total[s];
                    out.push(s);
                }
                Ok(out)
            }
            MarkingStrategy::Maximum { mu } => {
                check_mu(mu)?;
                let max = table.total.iter().copied().fold(0.0, f64::max);
                if max == 0.0 {
                    return Ok(Vec::new());
                }
                Ok((0..table.len()).filter(|&s| table.total[s] >= mu * max).collect())
            }
        }
    }
}

/// Summary row of a strategy comparison run.
#[derive(Clone, Debug, serde::Serialize)]
pub struct StrategyRow {
    pub strategy: String,
    pub iter: usize,
    pub n_elems: usize,
    pub n_marked: usize,
    pub eta_total_sq: f64,
    pub energy: f64,
}

/// Adaptive loop with an arbitrary marking strategy (for comparisons).
pub fn run_with_strategy(
    problem: &ProblemSpec,
    strategy: MarkingStrategy,
    max_elems: usize,
    max_iters: usize,
    gamma: f64,
    solver: &SolverOptions,
) -> Result<Vec<StrategyRow>> {
    run_with_strategy_from(problem, strategy, problem.initial_mesh()?, max_elems, max_iters, gamma, solver)
}

pub fn run_with_strategy_from(
    problem: &ProblemSpec,
    strategy: MarkingStrategy,
    initial: Triangulation,
    max_elems: usize,
    max_iters: usize,
    gamma: f64,
    solver: &SolverOptions,
) -> Result<Vec<StrategyRow>> {
    let mut tri = initial;
    let mut rows = Vec::new();
    for iter in 0..max_iters {
        if tri.num_elements() > max_elems {
            break;
        }
        let wrap = |e: Error| Error::Iteration { iteration: iter, source: Box::new(e) };
        let sol = solve(problem.kind, &tri, &problem.f, solver).map_err(wrap)?;
        let table = indicators(&tri, &sol.u, &problem.f).map_err(wrap)?;
        let g = energy(&tri, &sol.u, &problem.f, gamma).map_err(wrap)?;
        let seeds = strategy.select(&tri, &table).map_err(wrap)?;
        rows.push(StrategyRow {
            strategy: strategy.label(),
            iter,
            n_elems: tri.num_elements(),
            n_marked: seeds.len(),
            eta_total_sq: table.sum_all(),
            energy: g.total,
        });
        if seeds.is_empty() {
            break;
        }
        tri = tri.refine_local(&seeds);
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Per-iteration marking cardinalities keyed by iteration.
pub fn marking_sizes(trace: &AfemTrace) -> BTreeMap<usize, usize> {
    trace.rows.iter().map(|r| (r.iter, r.n_marked)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin;

    #[test]
    fn hand_executed_marking() {
        let tri = builtin::unit_square().bottom();
        let diag = (0..tri.num_sides()).find(|&s| !tri.side(s).boundary).unwrap();
        let bottom = (0..tri.num_sides()).find(|&s| tri.side(s).boundary && tri.side(s).midpoint[1] == 0.0).unwrap();
        let mut tot = vec![0.0; tri.num_sides()];
        tot[diag] = 1.0;
        tot[bottom] = 4.0;
        let table = IndicatorTable::from_totals(&tri, tot).unwrap();
        let m = mark(&tri, &table, 0.5).unwrap();
        assert_eq!(m.marked, vec![tri.side(bottom).key]);
        let mut covered = m.covered.clone();
        covered.sort();
        let mut expect = vec![tri.side(bottom).key, tri.side(diag).key];
        expect.sort();
        assert_eq!(covered, expect);
        assert_eq!(m.log[0].tested, 5.0);
        assert_eq!(replay(&tri, &table, &m).unwrap(), m.marked);
    }

    #[test]
    fn zero_indicators_mark_nothing() {
        let tri = builtin::unit_square().bottom();
        let table = IndicatorTable::from_totals(&tri, vec![0.0; tri.num_sides()]).unwrap();
        let m = mark(&tri, &table, 1.0).unwrap();
        assert!(m.is_empty() && m.log.is_empty());
    }

    #[test]
    fn single_side_with_full_parameter() {
        let tri = builtin::unit_square().bottom();
        let diag = (0..tri.num_sides()).find(|&s| !tri.side(s).boundary).unwrap();
        let mut tot = vec![0.0; tri.num_sides()];
        tot[diag] = 2.0;
        let table = IndicatorTable::from_totals(&tri, tot).unwrap();
        let m = mark(&tri, &table, 1.0).unwrap();
        assert_eq!(m.marked, vec![tri.side(diag).key]);
    }

    #[test]
    fn tampered_log_is_detected() {
        let tri = builtin::lshape().bottom().uniform_refine();
        let tot: Vec<f64> = (0..tri.num_sides()).map(|s| ((s * 7919) % 13) as f64).collect();
        let table = IndicatorTable::from_totals(&tri, tot).unwrap();
        let mut m = mark(&tri, &table, 0.3).unwrap();
        assert_eq!(replay(&tri, &table, &m).unwrap(), m.marked);
        let flip = m.log.iter().position(|d| !d.marked).unwrap();
        m.log[flip].marked = true;
        assert!(replay(&tri, &table, &m).is_err());
    }

    #[test]
    fn invalid_mu() {
        let tri = builtin::unit_square().bottom();
        let table = IndicatorTable::from_totals(&tri, vec![1.0; tri.num_sides()]).unwrap();
        assert!(mark(&tri, &table, 0.0).is_err());
        assert!(mark(&tri, &table, 1.5).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..10).map(|k| (k as f64, (k as f64).powf(-0.5))).collect();
        assert!((loglog_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
    }
}
