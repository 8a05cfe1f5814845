//! Linear programs and the reference solver.
//!
//! Problems are always minimizations over box-bounded variables with linear
//! rows of sense `<=`, `=` or `>=`. The reference backend is a bounded-variable
//! revised simplex; see [`RevisedSimplex`].
//!
//! Dual values follow the sensitivity convention: the dual of a row is the
//! derivative of the optimal objective with respect to that row's right-hand
//! side. Reduced costs are `c_j - a_j^T y` and, for a variable resting at a
//! bound, give the derivative of the objective with respect to that bound.

mod dump;
mod lu;
mod simplex;

pub use dump::write_lp_format;
pub use simplex::RevisedSimplex;

use serde::{Deserialize, Serialize};

/// Index of a variable inside an [`LpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// Index of a row inside an [`LpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization LP.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub vars: Vec<Variable>,
    pub rows: Vec<Constraint>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> RowId {
        self.rows.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn var_mut(&mut self, id: VarId) -> &mut Variable {
        &mut self.vars[id.0]
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum()
    }

    pub fn row_activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.rows[row.0].terms.iter().map(|(v, a)| a * x[v.0]).sum()
    }

    /// Largest absolute violation of any bound or row at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, xi) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xi).max(xi - v.upper);
        }
        for (i, row) in self.rows.iter().enumerate() {
            let act = self.row_activity(RowId(i), x);
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Structural problems that would make the LP ill-posed before any pivoting.
    pub fn check_well_formed(&self) -> Result<(), String> {
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || !v.cost.is_finite() {
                return Err(format!("variable {j} ({}) has NaN bound or non-finite cost", v.name));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(format!("variable {j} ({}) has an empty infinite bound", v.name));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                return Err(format!("row {i} ({}) has non-finite rhs", r.name));
            }
            for (v, a) in &r.terms {
                if v.0 >= self.vars.len() {
                    return Err(format!("row {i} ({}) references undeclared variable {}", r.name, v.0));
                }
                if !a.is_finite() {
                    return Err(format!("row {i} ({}) has non-finite coefficient", r.name));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

/// A simplex basis over structural variables followed by one logical per row.
///
/// Reusable as a warm start for any problem with the same dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub(crate) state: Vec<VarState>,
    pub(crate) head: Vec<usize>,
}

impl Basis {
    pub fn num_columns(&self) -> usize {
        self.state.len()
    }

    pub fn num_rows(&self) -> usize {
        self.head.len()
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// One value per row, sensitivity convention.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    /// Unbounded: a primal improving direction. Infeasible: row multipliers
    /// from the final phase-one pricing.
    pub ray: Option<Vec<f64>>,
    pub basis: Option<Basis>,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn failed(status: LpStatus, problem: &LpProblem, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            primal: vec![0.0; problem.num_vars()],
            duals: vec![0.0; problem.num_rows()],
            reduced_costs: vec![0.0; problem.num_vars()],
            ray: None,
            basis: None,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.primal[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.duals[r.0]
    }

    pub fn reduced_cost(&self, v: VarId) -> f64 {
        self.reduced_costs[v.0]
    }

    /// Dual objective `b^T y + sum_j (bound term of d_j)` together with the
    /// largest dual sign violation. Reduced costs within `tol` of zero are
    /// treated as zero; a wrong-sign reduced cost against an infinite bound
    /// contributes to the violation instead of the objective.
    pub fn dual_objective(&self, problem: &LpProblem, tol: f64) -> (f64, f64) {
        let mut obj = 0.0;
        let mut infeas = 0.0f64;
        for (row, y) in problem.rows.iter().zip(&self.duals) {
            obj += row.rhs * y;
            // logical column s_i with coefficient 1 and cost 0
            let d = -y;
            let (lo, hi) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            infeas = infeas.max(bound_term(d, lo, hi, tol, &mut obj));
        }
        let mut d = vec![0.0; problem.num_vars()];
        for (j, v) in problem.vars.iter().enumerate() {
            d[j] = v.cost;
        }
        for (row, y) in problem.rows.iter().zip(&self.duals) {
            for (v, a) in &row.terms {
                d[v.0] -= a * y;
            }
        }
        for (v, dj) in problem.vars.iter().zip(&d) {
            infeas = infeas.max(bound_term(*dj, v.lower, v.upper, tol, &mut obj));
        }
        (obj, infeas)
    }
}

fn bound_term(d: f64, lo: f64, hi: f64, tol: f64, obj: &mut f64) -> f64 {
    if d > tol {
        if lo.is_finite() {
            *obj += d * lo;
            0.0
        } else {
            d
        }
    } else if d < -tol {
        if hi.is_finite() {
            *obj += d * hi;
            0.0
        } else {
            -d
        }
    } else {
        0.0
    }
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute tolerance on bound and row activity at the reported point.
    pub feasibility: f64,
    /// Relative primal/dual objective gap accepted at optimality.
    pub gap: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_pivots: usize,
    pub max_iterations: Option<usize>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-7,
            gap: 1e-7,
            stall_pivots: 50,
            max_iterations: None,
        }
    }
}

/// Anything that can solve an [`LpProblem`].
///
/// A backend instance may hold mutable scratch state, so each worker owns one.
pub trait LpBackend {
    fn solve(&mut self, problem: &LpProblem, warm_start: Option<&Basis>) -> LpSolution;
}

/// Solves with a fresh reference backend and default tolerances.
pub fn solve(problem: &LpProblem) -> LpSolution {
    RevisedSimplex::new(Tolerances::default()).solve(problem, None)
}
