//! Linear programs in minimization form and a dense two-phase simplex solver.
//!
//! The dense solver uses Bland's rule throughout, so a given problem always follows the
//! same pivot sequence. After the final basis is found the basic values are recomputed
//! from the original data with an LU solve, and the answer is checked against every
//! constraint before it is reported as optimal.
//!
//! Large sparse problems (the constrained-zonotope hulls after a few inference steps)
//! go to a sparse revised simplex instead; see [`LpBackend`].

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Feasibility tolerance on constraint residuals.
pub const FEAS_TOL: f64 = 1e-8;
/// Optimality tolerance on reduced costs.
pub const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;

/// Sparse row `coeffs . v (<= | =) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn eval(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * v[j]).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub ineq: Vec<LinearConstraint>,
    pub eq: Vec<LinearConstraint>,
    pub bounds: Vec<(f64, f64)>,
    pub names: Vec<String>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with objective coefficient `cost` and bounds `[lo, hi]`; either
    /// bound may be infinite. Returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lo, hi));
        self.names.push(name.into());
        self.objective.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.ineq.push(LinearConstraint { coeffs, rhs });
    }

    pub fn add_ge(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        let coeffs = coeffs.into_iter().map(|(j, a)| (j, -a)).collect();
        self.ineq.push(LinearConstraint { coeffs, rhs: -rhs });
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.eq.push(LinearConstraint { coeffs, rhs });
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let mut issues = Vec::new();
        if self.bounds.len() != n || self.names.len() != n {
            issues.push("objective, bounds and names lengths differ".to_string());
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            issues.push("non-finite objective coefficient".to_string());
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                issues.push(format!("bad bounds [{lo}, {hi}] on variable {j}"));
            }
        }
        for (kind, rows) in [("inequality", &self.ineq), ("equality", &self.eq)] {
            for (r, row) in rows.iter().enumerate() {
                if !row.rhs.is_finite() || row.coeffs.iter().any(|(_, a)| !a.is_finite()) {
                    issues.push(format!("non-finite data in {kind} row {r}"));
                }
                if row.coeffs.iter().any(|&(j, _)| j >= n) {
                    issues.push(format!("{kind} row {r} references an unknown variable"));
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Solver {
                status: "invalid problem".into(),
                detail: issues.join("; "),
            })
        }
    }

    pub fn objective_at(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }
}

/// Human-readable listing, one constraint per line.
impl fmt::Display for LpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |j: usize| self.names.get(j).cloned().unwrap_or_else(|| format!("v{j}"));
        let term_list = |coeffs: &mut dyn Iterator<Item = (usize, f64)>| -> String {
            let mut s = String::new();
            for (j, a) in coeffs {
                if a == 0.0 {
                    continue;
                }
                if s.is_empty() {
                    s.push_str(&format!("{a} {}", name(j)));
                } else if a < 0.0 {
                    s.push_str(&format!(" - {} {}", -a, name(j)));
                } else {
                    s.push_str(&format!(" + {a} {}", name(j)));
                }
            }
            if s.is_empty() {
                s.push('0');
            }
            s
        };
        writeln!(
            f,
            "minimize {}",
            term_list(&mut self.objective.iter().copied().enumerate())
        )?;
        writeln!(f, "subject to")?;
        for (r, row) in self.ineq.iter().enumerate() {
            writeln!(
                f,
                "  ineq{r}: {} <= {}",
                term_list(&mut row.coeffs.iter().copied()),
                row.rhs
            )?;
        }
        for (r, row) in self.eq.iter().enumerate() {
            writeln!(
                f,
                "  eq{r}: {} = {}",
                term_list(&mut row.coeffs.iter().copied()),
                row.rhs
            )?;
        }
        writeln!(f, "bounds")?;
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            writeln!(f, "  {lo} <= {} <= {hi}", name(j))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The solver stopped without a trustworthy answer; see `LpSolution::diagnostics`.
    NumericalFailure,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::NumericalFailure => "numerical failure",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub diagnostics: Option<String>,
}

impl LpSolution {
    fn without_point(status: LpStatus, diagnostics: Option<String>) -> Self {
        LpSolution {
            status,
            values: Vec::new(),
            objective_value: f64::NAN,
            diagnostics,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Turns anything but `Optimal` into an error.
    pub fn into_optimal(self) -> Result<LpSolution> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status.to_string(),
                detail: self.diagnostics.unwrap_or_default(),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub worst_residual: f64,
}

/// Checks every bound and row of `p` at `v` against [`FEAS_TOL`].
pub fn check_feasible(p: &LpProblem, v: &[f64]) -> Result<FeasibilityReport> {
    crate::error::check_dim("check_feasible", p.num_vars(), v.len())?;
    let mut worst = 0.0f64;
    for (x, &(lo, hi)) in v.iter().zip(&p.bounds) {
        worst = worst.max(lo - x).max(x - hi);
    }
    for row in &p.ineq {
        worst = worst.max(row.eval(v) - row.rhs);
    }
    for row in &p.eq {
        worst = worst.max((row.eval(v) - row.rhs).abs());
    }
    if v.iter().any(|x| x.is_nan()) {
        worst = f64::INFINITY;
    }
    Ok(FeasibilityReport {
        feasible: worst <= FEAS_TOL,
        worst_residual: worst,
    })
}

/// Which engine runs a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpBackend {
    /// Dense tableau, two phases, Bland's rule. Used for small problems.
    DenseSimplex,
    /// Sparse revised simplex from the `microlp` crate. Used for large problems.
    SparseSimplex,
}

/// Problems whose standard form has more columns than this go to the sparse backend.
const DENSE_COLUMN_LIMIT: usize = 400;

/// Solves `p`, choosing the backend by problem size.
pub fn solve(p: &LpProblem) -> Result<LpSolution> {
    let cols = 2 * p.num_vars() + p.ineq.len() + p.eq.len();
    let backend = if cols <= DENSE_COLUMN_LIMIT {
        LpBackend::DenseSimplex
    } else {
        LpBackend::SparseSimplex
    };
    solve_with(p, backend)
}

pub fn solve_with(p: &LpProblem, backend: LpBackend) -> Result<LpSolution> {
    p.validate()?;
    let sol = match backend {
        LpBackend::DenseSimplex => DenseSimplex::build(p).run(),
        LpBackend::SparseSimplex => solve_sparse(p),
    };
    Ok(audit(p, sol))
}

/// Demotes an `Optimal` answer that fails the feasibility check.
fn audit(p: &LpProblem, mut sol: LpSolution) -> LpSolution {
    if sol.status != LpStatus::Optimal {
        return sol;
    }
    match check_feasible(p, &sol.values) {
        Ok(r) if r.feasible => {
            sol.objective_value = p.objective_at(&sol.values);
            sol
        }
        Ok(r) => LpSolution::without_point(
            LpStatus::NumericalFailure,
            Some(format!(
                "candidate optimum violates constraints by {:e}",
                r.worst_residual
            )),
        ),
        Err(e) => LpSolution::without_point(LpStatus::NumericalFailure, Some(e.to_string())),
    }
}

fn solve_sparse(p: &LpProblem) -> LpSolution {
    use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

    let mut prob = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = p
        .objective
        .iter()
        .zip(&p.bounds)
        .map(|(&c, &b)| prob.add_var(c, b))
        .collect();
    let expr = |row: &LinearConstraint| -> Vec<(microlp::Variable, f64)> {
        row.coeffs.iter().map(|&(j, a)| (vars[j], a)).collect()
    };
    for row in &p.ineq {
        prob.add_constraint(expr(row), ComparisonOp::Le, row.rhs);
    }
    for row in &p.eq {
        prob.add_constraint(expr(row), ComparisonOp::Eq, row.rhs);
    }
    match prob.solve() {
        Ok(SolveOutcome::Solution(s)) => LpSolution {
            status: LpStatus::Optimal,
            values: vars.iter().map(|&v| s.var_value(v)).collect(),
            objective_value: s.objective(),
            diagnostics: None,
        },
        Ok(SolveOutcome::Interrupted(_)) => LpSolution::without_point(
            LpStatus::NumericalFailure,
            Some("sparse solve interrupted".into()),
        ),
        Err(microlp::Error::Infeasible) => LpSolution::without_point(LpStatus::Infeasible, None),
        Err(microlp::Error::Unbounded) => LpSolution::without_point(LpStatus::Unbounded, None),
        Err(e) => LpSolution::without_point(LpStatus::NumericalFailure, Some(e.to_string())),
    }
}

/// How an original variable is expressed through nonnegative standard-form columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `v = offset + col`
    Shift { offset: f64, col: usize },
    /// `v = offset - col`
    Flip { offset: f64, col: usize },
    /// `v = pos - neg`
    Split { pos: usize, neg: usize },
}

/// Standard form `min c.x, A x = b, x >= 0` held as a dense tableau.
struct DenseSimplex {
    /// Original standard-form matrix, kept for the final basis refinement.
    a0: DMatrix<f64>,
    b0: DVector<f64>,
    cost: Vec<f64>,
    map: Vec<VarMap>,
    n_struct: usize,
    n_art: usize,
    obj_offset: f64,
    tab: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    active_rows: Vec<usize>,
}

enum Phase {
    Done,
    Unbounded,
    IterationLimit,
}

impl DenseSimplex {
    fn build(p: &LpProblem) -> Self {
        let mut map = Vec::with_capacity(p.num_vars());
        let mut n_struct = 0usize;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for &(lo, hi) in &p.bounds {
            if lo.is_finite() {
                map.push(VarMap::Shift {
                    offset: lo,
                    col: n_struct,
                });
                if hi.is_finite() {
                    bound_rows.push((n_struct, hi - lo));
                }
                n_struct += 1;
            } else if hi.is_finite() {
                map.push(VarMap::Flip {
                    offset: hi,
                    col: n_struct,
                });
                n_struct += 1;
            } else {
                map.push(VarMap::Split {
                    pos: n_struct,
                    neg: n_struct + 1,
                });
                n_struct += 2;
            }
        }

        let mut cost = vec![0.0; n_struct];
        let mut obj_offset = 0.0;
        for (j, &c) in p.objective.iter().enumerate() {
            match map[j] {
                VarMap::Shift { offset, col } => {
                    cost[col] += c;
                    obj_offset += c * offset;
                }
                VarMap::Flip { offset, col } => {
                    cost[col] -= c;
                    obj_offset += c * offset;
                }
                VarMap::Split { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        // Rows over structural columns; `true` marks a <= row that gets a slack.
        let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
        let substitute = |row: &LinearConstraint| -> (Vec<f64>, f64) {
            let mut dense = vec![0.0; n_struct];
            let mut rhs = row.rhs;
            for &(j, a) in &row.coeffs {
                match map[j] {
                    VarMap::Shift { offset, col } => {
                        dense[col] += a;
                        rhs -= a * offset;
                    }
                    VarMap::Flip { offset, col } => {
                        dense[col] -= a;
                        rhs -= a * offset;
                    }
                    VarMap::Split { pos, neg } => {
                        dense[pos] += a;
                        dense[neg] -= a;
                    }
                }
            }
            (dense, rhs)
        };
        for &(col, width) in &bound_rows {
            let mut dense = vec![0.0; n_struct];
            dense[col] = 1.0;
            rows.push((dense, width, true));
        }
        for row in &p.ineq {
            let (d, r) = substitute(row);
            rows.push((d, r, true));
        }
        for row in &p.eq {
            let (d, r) = substitute(row);
            rows.push((d, r, false));
        }

        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.2).count();
        let n_real = n_struct + n_slack;
        let mut a0 = DMatrix::zeros(m, n_real);
        let mut b0 = DVector::zeros(m);
        let mut slack = n_struct;
        let mut slack_of_row = vec![None; m];
        for (i, (dense, rhs, has_slack)) in rows.iter().enumerate() {
            for (j, v) in dense.iter().enumerate() {
                a0[(i, j)] = *v;
            }
            if *has_slack {
                a0[(i, slack)] = 1.0;
                slack_of_row[i] = Some(slack);
                slack += 1;
            }
            b0[i] = *rhs;
        }

        // Artificial columns for rows whose slack cannot start basic.
        let needs_art: Vec<bool> = (0..m)
            .map(|i| !(slack_of_row[i].is_some() && b0[i] >= 0.0))
            .collect();
        let n_art = needs_art.iter().filter(|x| **x).count();
        let width = n_real + n_art;
        let mut tab = vec![vec![0.0; width]; m];
        let mut rhs = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut art = n_real;
        for i in 0..m {
            let sign = if b0[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n_real {
                tab[i][j] = sign * a0[(i, j)];
            }
            rhs[i] = sign * b0[i];
            if needs_art[i] {
                tab[i][art] = 1.0;
                basis[i] = art;
                art += 1;
            } else {
                basis[i] = slack_of_row[i].unwrap();
            }
        }
        cost.resize(n_real, 0.0);

        DenseSimplex {
            a0,
            b0,
            cost,
            map,
            n_struct,
            n_art,
            obj_offset,
            tab,
            rhs,
            basis,
            active_rows: (0..m).collect(),
        }
    }

    fn n_real(&self) -> usize {
        self.cost.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.tab[r][c];
        for v in self.tab[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let prow = self.tab[r].clone();
        let prhs = self.rhs[r];
        for i in 0..self.tab.len() {
            if i == r {
                continue;
            }
            let f = self.tab[i][c];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in self.tab[i].iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            self.tab[i][c] = 0.0;
            self.rhs[i] -= f * prhs;
            if self.rhs[i] < 0.0 && self.rhs[i] > -PIVOT_TOL {
                self.rhs[i] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Bland's-rule simplex on the current tableau for `costs` over columns `0..allowed`.
    fn optimize(&mut self, costs: &[f64], allowed: usize) -> Phase {
        let m = self.tab.len();
        let limit = 50 * (m + allowed) + 1000;
        for _ in 0..limit {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut d = costs[j];
                for i in 0..m {
                    let cb = costs.get(self.basis[i]).copied().unwrap_or(0.0);
                    d -= cb * self.tab[i][j];
                }
                if d < -OPT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else {
                return Phase::Done;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.tab[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Phase::Unbounded;
            };
            self.pivot(r, c);
        }
        Phase::IterationLimit
    }

    fn run(mut self) -> LpSolution {
        let n_real = self.n_real();
        let width = n_real + self.n_art;

        if self.n_art > 0 {
            let mut phase1 = vec![0.0; width];
            for c in phase1.iter_mut().skip(n_real) {
                *c = 1.0;
            }
            match self.optimize(&phase1, width) {
                Phase::Done => {}
                Phase::Unbounded | Phase::IterationLimit => {
                    return LpSolution::without_point(
                        LpStatus::NumericalFailure,
                        Some("phase one did not terminate cleanly".into()),
                    )
                }
            }
            let infeas: f64 = (0..self.tab.len())
                .filter(|&i| self.basis[i] >= n_real)
                .map(|i| self.rhs[i])
                .sum();
            let scale = 1.0 + self.b0.amax();
            if infeas > FEAS_TOL * scale {
                return LpSolution::without_point(
                    LpStatus::Infeasible,
                    Some(format!("phase-one residual {infeas:e}")),
                );
            }
            // Drive remaining artificials out, dropping rows that turn out redundant.
            let mut i = 0;
            while i < self.tab.len() {
                if self.basis[i] >= n_real {
                    let col = (0..n_real)
                        .filter(|j| !self.basis.contains(j))
                        .find(|&j| self.tab[i][j].abs() > 1e-9);
                    match col {
                        Some(j) => self.pivot(i, j),
                        None => {
                            self.tab.remove(i);
                            self.rhs.remove(i);
                            self.basis.remove(i);
                            self.active_rows.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }

        let costs = self.cost.clone();
        match self.optimize(&costs, n_real) {
            Phase::Done => {}
            Phase::Unbounded => return LpSolution::without_point(LpStatus::Unbounded, None),
            Phase::IterationLimit => {
                return LpSolution::without_point(
                    LpStatus::NumericalFailure,
                    Some("iteration limit reached in phase two".into()),
                )
            }
        }

        let mut x = vec![0.0; n_real];
        for (i, &bv) in self.basis.iter().enumerate() {
            x[bv] = self.rhs[i].max(0.0);
        }
        self.refine(&mut x);

        let values: Vec<f64> = self
            .map
            .iter()
            .map(|vm| match *vm {
                VarMap::Shift { offset, col } => offset + x[col],
                VarMap::Flip { offset, col } => offset - x[col],
                VarMap::Split { pos, neg } => x[pos] - x[neg],
            })
            .collect();
        let objective_value = self.obj_offset
            + self.cost[..self.n_struct]
                .iter()
                .zip(&x)
                .map(|(c, v)| c * v)
                .sum::<f64>();
        LpSolution {
            status: LpStatus::Optimal,
            values,
            objective_value,
            diagnostics: None,
        }
    }

    /// Recomputes the basic values by solving `B x_B = b` on the untouched data.
    fn refine(&self, x: &mut [f64]) {
        let m = self.basis.len();
        let b_mat = DMatrix::from_fn(m, m, |i, j| self.a0[(self.active_rows[i], self.basis[j])]);
        let rhs = DVector::from_fn(m, |i, _| self.b0[self.active_rows[i]]);
        if let Some(xb) = b_mat.lu().solve(&rhs) {
            if xb.iter().all(|v| v.is_finite() && *v >= -FEAS_TOL) {
                for (j, &bv) in self.basis.iter().enumerate() {
                    x[bv] = xb[j].max(0.0);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn both(p: &LpProblem) -> [LpSolution; 2] {
        [
            solve_with(p, LpBackend::DenseSimplex).unwrap(),
            solve_with(p, LpBackend::SparseSimplex).unwrap(),
        ]
    }

    #[test]
    fn lower_bounded_single_variable() {
        let mut p = LpProblem::new();
        let v = p.add_var("v", 1.0, f64::NEG_INFINITY, f64::INFINITY);
        p.add_ge(vec![(v, 1.0)], 3.0);
        for s in both(&p) {
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.values[0] - 3.0).abs() < 1e-12);
            assert!((s.objective_value - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn free_variable_is_unbounded() {
        let mut p = LpProblem::new();
        p.add_var("v", -1.0, f64::NEG_INFINITY, f64::INFINITY);
        for s in both(&p) {
            assert_eq!(s.status, LpStatus::Unbounded);
        }
    }

    #[test]
    fn two_variable_example() {
        let mut p = LpProblem::new();
        let a = p.add_var("v1", 1.0, 0.0, 0.25);
        let b = p.add_var("v2", 1.0, 0.0, f64::INFINITY);
        p.add_ge(vec![(a, 1.0), (b, 1.0)], 1.0);
        for s in both(&p) {
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.objective_value - 1.0).abs() < 1e-12);
            assert!(check_feasible(&p, &s.values).unwrap().feasible);
        }
    }

    #[test]
    fn detects_infeasibility() {
        let mut p = LpProblem::new();
        let a = p.add_var("a", 0.0, 0.0, 1.0);
        p.add_ge(vec![(a, 1.0)], 2.0);
        for s in both(&p) {
            assert_eq!(s.status, LpStatus::Infeasible);
        }
        let mut p = LpProblem::new();
        let a = p.add_var("a", 1.0, -1.0, 1.0);
        let b = p.add_var("b", 1.0, -1.0, 1.0);
        p.add_eq(vec![(a, 1.0), (b, 1.0)], 1.0);
        p.add_eq(vec![(a, 1.0), (b, 1.0)], 1.5);
        assert_eq!(
            solve_with(&p, LpBackend::DenseSimplex).unwrap().status,
            LpStatus::Infeasible
        );
    }

    #[test]
    fn handles_redundant_equalities_and_upper_only_bounds() {
        let mut p = LpProblem::new();
        let a = p.add_var("a", -1.0, f64::NEG_INFINITY, 4.0);
        let b = p.add_var("b", 2.0, -1.0, 1.0);
        p.add_eq(vec![(a, 1.0), (b, 1.0)], 3.0);
        p.add_eq(vec![(a, 2.0), (b, 2.0)], 6.0);
        for s in both(&p) {
            assert_eq!(s.status, LpStatus::Optimal);
            // a = 3 - b, objective = -3 + 3b, minimized at b = -1, but a <= 4.
            assert!((s.values[0] - 4.0).abs() < 1e-9);
            assert!((s.values[1] + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_malformed_problems() {
        let mut p = LpProblem::new();
        p.add_var("a", 1.0, 0.0, 1.0);
        p.add_le(vec![(3, 1.0)], 1.0);
        assert!(solve(&p).is_err());
        let mut p = LpProblem::new();
        p.add_var("a", f64::NAN, 0.0, 1.0);
        assert!(solve(&p).is_err());
    }

    #[test]
    fn check_feasible_flags_bound_violation() {
        let mut p = LpProblem::new();
        p.add_var("a", 1.0, 0.0, 1.0);
        let r = check_feasible(&p, &[1.5]).unwrap();
        assert!(!r.feasible);
        assert!((r.worst_residual - 0.5).abs() < 1e-12);
    }

    #[test]
    fn display_lists_one_constraint_per_line() {
        let mut p = LpProblem::new();
        let a = p.add_var("a", 1.0, 0.0, 1.0);
        let b = p.add_var("b", -2.0, 0.0, 1.0);
        p.add_le(vec![(a, 1.0), (b, -1.0)], 0.5);
        p.add_eq(vec![(a, 1.0)], 0.25);
        let text = p.to_string();
        assert!(text.contains("minimize 1 a - 2 b"));
        assert!(text.contains("ineq0: 1 a - 1 b <= 0.5"));
        assert!(text.contains("eq0: 1 a = 0.25"));
    }

    /// Random LP over a box with a few inequality rows.
    fn random_box_lp(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> LpProblem {
        let mut p = LpProblem::new();
        for j in 0..n {
            let lo = rng.random_range(-2.0..0.0);
            let hi = rng.random_range(0.0..2.0);
            p.add_var(format!("v{j}"), rng.random_range(-1.0..1.0), lo, hi);
        }
        for _ in 0..rows {
            let coeffs = (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect();
            p.add_le(coeffs, rng.random_range(0.1..1.0));
        }
        p
    }

    /// Brute-force optimum: enumerate every choice of `n` active constraints among bounds
    /// and rows, solve for the vertex, keep the best feasible one.
    fn vertex_enumeration_optimum(p: &LpProblem) -> Option<f64> {
        let n = p.num_vars();
        let mut hyperplanes: Vec<(Vec<f64>, f64)> = Vec::new();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            hyperplanes.push((e.clone(), p.bounds[j].0));
            hyperplanes.push((e, p.bounds[j].1));
        }
        for row in &p.ineq {
            let mut d = vec![0.0; n];
            for &(j, a) in &row.coeffs {
                d[j] += a;
            }
            hyperplanes.push((d, row.rhs));
        }
        let h = hyperplanes.len();
        let mut best: Option<f64> = None;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let a = DMatrix::from_fn(n, n, |r, c| hyperplanes[idx[r]].0[c]);
            let b = DVector::from_fn(n, |r, _| hyperplanes[idx[r]].1);
            if a.determinant().abs() > 1e-10 {
                if let Some(x) = a.lu().solve(&b) {
                    let xs: Vec<f64> = x.iter().copied().collect();
                    let r = check_feasible(p, &xs).unwrap();
                    if r.worst_residual <= 1e-9 {
                        let f = p.objective_at(&xs);
                        best = Some(best.map_or(f, |b: f64| b.min(f)));
                    }
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < h - n + i {
                    idx[i] += 1;
                    for k in i + 1..n {
                        idx[k] = idx[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn matches_vertex_enumeration_on_small_box_lps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..60 {
            let n = 2 + trial % 5;
            let p = random_box_lp(&mut rng, n, 3);
            let want = vertex_enumeration_optimum(&p).expect("box LP containing 0 is feasible");
            for s in both(&p) {
                assert_eq!(s.status, LpStatus::Optimal, "trial {trial}");
                assert!(
                    (s.objective_value - want).abs() < 1e-7,
                    "trial {trial}: {} vs {want}",
                    s.objective_value
                );
            }
        }
    }

    #[test]
    fn weak_duality_spot_check() {
        // Any feasible point's objective is at least the reported minimum.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let p = random_box_lp(&mut rng, 4, 3);
            let s = solve(&p).unwrap();
            assert!(s.is_optimal());
            let mut found = 0;
            while found < 50 {
                let v: Vec<f64> = p
                    .bounds
                    .iter()
                    .map(|&(lo, hi)| rng.random_range(lo..hi))
                    .collect();
                if check_feasible(&p, &v).unwrap().feasible {
                    assert!(p.objective_at(&v) >= s.objective_value - 1e-7);
                    found += 1;
                }
            }
        }
    }

    #[test]
    fn solves_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_box_lp(&mut rng, 6, 4);
        let a = solve(&p).unwrap();
        let b = solve(&p).unwrap();
        assert_eq!(a, b);
    }
}
