//! Bounded-variable primal revised simplex.
//!
//! Every row gets a logical column `s_i` so that `A x + s = b`, with bounds on
//! `s_i` encoding the row sense. Phase one minimizes the sum of basic bound
//! violations (composite pricing, recomputed every iteration); phase two
//! minimizes the true costs. Pricing is Dantzig with ties to the lowest column
//! index, switching to Bland's rule after `stall_pivots` consecutive
//! degenerate pivots. The ratio test is a two-pass Harris test.

use super::lu::LuFactor;
use super::{Basis, LpBackend, LpProblem, LpSolution, LpStatus, Sense, Tolerances, VarState};

const REFACTOR_EVERY: usize = 100;
const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const NONE: usize = usize::MAX;

/// Reference LP backend.
#[derive(Debug, Clone, Default)]
pub struct RevisedSimplex {
    tol: Tolerances,
}

impl RevisedSimplex {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol }
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }
}

impl LpBackend for RevisedSimplex {
    fn solve(&mut self, problem: &LpProblem, warm_start: Option<&Basis>) -> LpSolution {
        if let Err(msg) = problem.check_well_formed() {
            log::error!("rejecting malformed LP: {msg}");
            return LpSolution::failed(LpStatus::NumericFailure, problem, 0);
        }
        Engine::new(problem, self.tol).run(warm_start)
    }
}

enum Ratio {
    Unbounded,
    Flip(f64),
    Pivot { pos: usize, theta: f64, to_upper: bool },
}

struct Engine<'a> {
    problem: &'a LpProblem,
    tol: Tolerances,
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    head: Vec<usize>,
    pos: Vec<usize>,
    lu: Option<LuFactor>,
    dtol: f64,
    iterations: usize,
    phase1: bool,
    y: Vec<f64>,
    alpha: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(problem: &'a LpProblem, tol: Tolerances) -> Self {
        let n = problem.num_vars();
        let m = problem.num_rows();
        let mut counts = vec![0usize; n + 1];
        for row in &problem.rows {
            for (v, _) in &row.terms {
                counts[v.0 + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, row) in problem.rows.iter().enumerate() {
            for (v, a) in &row.terms {
                let k = fill[v.0];
                col_row[k] = i;
                col_val[k] = *a;
                fill[v.0] += 1;
            }
        }

        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for v in &problem.vars {
            lb.push(v.lower);
            ub.push(v.upper);
            cost.push(v.cost);
        }
        let mut b = Vec::with_capacity(m);
        for row in &problem.rows {
            let (lo, hi) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lb.push(lo);
            ub.push(hi);
            cost.push(0.0);
            b.push(row.rhs);
        }
        let cmax = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));

        Self {
            problem,
            tol,
            n,
            m,
            col_start,
            col_row,
            col_val,
            lb,
            ub,
            cost,
            b,
            x: vec![0.0; n + m],
            state: vec![VarState::AtLower; n + m],
            head: Vec::new(),
            pos: vec![NONE; n + m],
            lu: None,
            dtol: 1e-9 * cmax,
            iterations: 0,
            phase1: false,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
        }
    }

    fn nonbasic_state(&self, j: usize) -> VarState {
        if self.lb[j].is_finite() {
            VarState::AtLower
        } else if self.ub[j].is_finite() {
            VarState::AtUpper
        } else {
            VarState::Free
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lb[j],
            VarState::AtUpper => self.ub[j],
            _ => 0.0,
        }
    }

    fn install_basis(&mut self, warm: Option<&Basis>) {
        let total = self.n + self.m;
        let usable = warm.filter(|w| {
            w.state.len() == total
                && w.head.len() == self.m
                && w.head.iter().all(|&j| j < total && w.state[j] == VarState::Basic)
                && w.state.iter().filter(|s| **s == VarState::Basic).count() == self.m
        });
        match usable {
            Some(w) => {
                self.head = w.head.clone();
                for j in 0..total {
                    self.state[j] = match w.state[j] {
                        VarState::Basic => VarState::Basic,
                        VarState::AtUpper if self.ub[j].is_finite() => VarState::AtUpper,
                        VarState::AtLower if self.lb[j].is_finite() => VarState::AtLower,
                        _ => self.nonbasic_state(j),
                    };
                }
            }
            None => {
                self.head = (self.n..total).collect();
                for j in 0..total {
                    self.state[j] = if j >= self.n {
                        VarState::Basic
                    } else {
                        self.nonbasic_state(j)
                    };
                }
            }
        }
        for p in self.pos.iter_mut() {
            *p = NONE;
        }
        for (r, &j) in self.head.iter().enumerate() {
            self.pos[j] = r;
        }
        for j in 0..total {
            if self.state[j] != VarState::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
    }

    fn column(&self, j: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                out.push((self.col_row[k], self.col_val[k]));
            }
        } else {
            out.push((j - self.n, 1.0));
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for k in self.col_start[j]..self.col_start[j + 1] {
                s += self.col_val[k] * y[self.col_row[k]];
            }
            s
        } else {
            y[j - self.n]
        }
    }

    /// Factor the current basis, swapping in logicals for dependent columns.
    fn refactor(&mut self) -> bool {
        let mut buf = Vec::new();
        for _attempt in 0..=self.m {
            let cols: Vec<Vec<(usize, f64)>> = self
                .head
                .iter()
                .map(|&j| {
                    self.column(j, &mut buf);
                    buf.clone()
                })
                .collect();
            match LuFactor::factor(self.m, &cols) {
                Ok(lu) => {
                    self.lu = Some(lu);
                    return true;
                }
                Err(sing) => {
                    let Some(&row) = sing
                        .free_rows
                        .iter()
                        .find(|&&i| self.state[self.n + i] != VarState::Basic)
                    else {
                        return false;
                    };
                    let out = self.head[sing.position];
                    let slack = self.n + row;
                    log::debug!("singular basis: replacing column {out} by logical of row {row}");
                    self.state[out] = self.nonbasic_state(out);
                    self.x[out] = self.nonbasic_value(out);
                    self.pos[out] = NONE;
                    self.head[sing.position] = slack;
                    self.pos[slack] = sing.position;
                    self.state[slack] = VarState::Basic;
                }
            }
        }
        false
    }

    fn compute_basic_values(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[k]] -= self.col_val[k] * v;
                }
            } else {
                rhs[j - self.n] -= v;
            }
        }
        self.lu.as_mut().expect("factored").ftran(&mut rhs);
        for (r, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[r];
        }
    }

    fn infeasibility_sign(&self, j: usize) -> f64 {
        if self.x[j] < self.lb[j] - PRIMAL_TOL {
            -1.0
        } else if self.x[j] > self.ub[j] + PRIMAL_TOL {
            1.0
        } else {
            0.0
        }
    }

    /// Fills `self.y` with the pricing vector of the current phase.
    fn price_vector(&mut self) {
        self.phase1 = self.head.iter().any(|&j| self.infeasibility_sign(j) != 0.0);
        let mut cb: Vec<f64> = if self.phase1 {
            self.head.iter().map(|&j| self.infeasibility_sign(j)).collect()
        } else {
            self.head.iter().map(|&j| self.cost[j]).collect()
        };
        self.lu.as_mut().expect("factored").btran(&mut cb);
        self.y = cb;
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let dtol = if self.phase1 { 1e-9 } else { self.dtol };
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if st == VarState::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let c = if self.phase1 { 0.0 } else { self.cost[j] };
            let d = c - self.col_dot(j, &self.y);
            let dir = match st {
                VarState::AtLower if d < -dtol => 1.0,
                VarState::AtUpper if d > dtol => -1.0,
                VarState::Free if d.abs() > dtol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn blocking_bound(&self, j: usize, rate: f64) -> Option<(f64, bool)> {
        let v = self.x[j];
        if rate < 0.0 {
            if self.phase1 && v < self.lb[j] - PRIMAL_TOL {
                return None;
            }
            if self.phase1 && v > self.ub[j] + PRIMAL_TOL {
                return Some((self.ub[j], true));
            }
            self.lb[j].is_finite().then_some((self.lb[j], false))
        } else {
            if self.phase1 && v > self.ub[j] + PRIMAL_TOL {
                return None;
            }
            if self.phase1 && v < self.lb[j] - PRIMAL_TOL {
                return Some((self.lb[j], false));
            }
            self.ub[j].is_finite().then_some((self.ub[j], true))
        }
    }

    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Ratio {
        let range = self.ub[q] - self.lb[q];
        let mut theta_max = if range.is_finite() { range } else { f64::INFINITY };
        let mut candidates: Vec<(usize, f64, bool, f64)> = Vec::new();
        for r in 0..self.m {
            let a = self.alpha[r];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.head[r];
            let rate = -dir * a;
            let Some((bnd, to_upper)) = self.blocking_bound(j, rate) else {
                continue;
            };
            let dist = (bnd - self.x[j]) / rate;
            let relaxed = ((bnd - self.x[j]).abs() + PRIMAL_TOL) / rate.abs();
            if !bland {
                theta_max = theta_max.min(relaxed);
            }
            candidates.push((r, dist.max(0.0), to_upper, a.abs()));
        }

        if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for &(r, dist, up, _) in &candidates {
                match best {
                    None => best = Some((r, dist, up)),
                    Some((br, bd, _)) => {
                        if dist < bd - 1e-12
                            || (dist <= bd + 1e-12 && self.head[r] < self.head[br])
                        {
                            best = Some((r, dist, up));
                        }
                    }
                }
            }
            return match best {
                Some((r, dist, up)) if !(range.is_finite() && range <= dist) => Ratio::Pivot {
                    pos: r,
                    theta: dist,
                    to_upper: up,
                },
                _ if range.is_finite() => Ratio::Flip(range),
                _ => Ratio::Unbounded,
            };
        }

        if theta_max.is_infinite() {
            return Ratio::Unbounded;
        }
        if range.is_finite() && range <= theta_max {
            return Ratio::Flip(range);
        }
        let mut best: Option<(usize, f64, bool, f64)> = None;
        for &(r, dist, up, mag) in &candidates {
            if dist > theta_max {
                continue;
            }
            let better = match best {
                None => true,
                Some((br, _, _, bmag)) => {
                    mag > bmag || (mag == bmag && self.head[r] < self.head[br])
                }
            };
            if better {
                best = Some((r, dist, up, mag));
            }
        }
        match best {
            Some((r, dist, up, _)) => Ratio::Pivot {
                pos: r,
                theta: dist,
                to_upper: up,
            },
            None => Ratio::Unbounded,
        }
    }

    fn run(mut self, warm: Option<&Basis>) -> LpSolution {
        let max_iter = self
            .tol
            .max_iterations
            .unwrap_or(50_000 + 20 * (self.n + self.m));
        self.install_basis(warm);
        if !self.refactor() {
            return LpSolution::failed(LpStatus::NumericFailure, self.problem, 0);
        }
        self.compute_basic_values();

        let mut since_refactor = 0usize;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut col = Vec::new();

        loop {
            if self.iterations >= max_iter {
                log::warn!("simplex iteration limit {max_iter} reached");
                return LpSolution::failed(LpStatus::NumericFailure, self.problem, self.iterations);
            }
            self.price_vector();
            let Some((q, dir)) = self.choose_entering(bland) else {
                if since_refactor > 0 {
                    if !self.refactor() {
                        return LpSolution::failed(
                            LpStatus::NumericFailure,
                            self.problem,
                            self.iterations,
                        );
                    }
                    self.compute_basic_values();
                    since_refactor = 0;
                    continue;
                }
                if self.phase1 {
                    let mut sol =
                        LpSolution::failed(LpStatus::Infeasible, self.problem, self.iterations);
                    sol.ray = Some(self.y.clone());
                    return sol;
                }
                return self.finish();
            };
            self.iterations += 1;

            self.alpha.iter_mut().for_each(|a| *a = 0.0);
            self.column(q, &mut col);
            for &(i, v) in &col {
                self.alpha[i] = v;
            }
            let mut alpha = std::mem::take(&mut self.alpha);
            self.lu.as_mut().expect("factored").ftran(&mut alpha);
            self.alpha = alpha;

            let step = self.ratio_test(q, dir, bland);
            let theta = match step {
                Ratio::Unbounded => {
                    if self.phase1 {
                        log::warn!("phase one found no blocking variable");
                        return LpSolution::failed(
                            LpStatus::NumericFailure,
                            self.problem,
                            self.iterations,
                        );
                    }
                    let mut ray = vec![0.0; self.n];
                    if q < self.n {
                        ray[q] = dir;
                    }
                    for (r, &j) in self.head.iter().enumerate() {
                        if j < self.n {
                            ray[j] = -dir * self.alpha[r];
                        }
                    }
                    let mut sol =
                        LpSolution::failed(LpStatus::Unbounded, self.problem, self.iterations);
                    sol.ray = Some(ray);
                    return sol;
                }
                Ratio::Flip(t) => t,
                Ratio::Pivot { theta, .. } => theta,
            };

            if theta != 0.0 {
                self.x[q] += dir * theta;
                for r in 0..self.m {
                    let j = self.head[r];
                    self.x[j] -= dir * theta * self.alpha[r];
                }
            }

            match step {
                Ratio::Flip(_) => {
                    self.state[q] = if dir > 0.0 {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[q] = self.nonbasic_value(q);
                }
                Ratio::Pivot { pos, to_upper, .. } => {
                    let leaving = self.head[pos];
                    self.state[leaving] = if to_upper && self.lb[leaving] != self.ub[leaving] {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[leaving] = if to_upper {
                        self.ub[leaving]
                    } else {
                        self.lb[leaving]
                    };
                    self.pos[leaving] = NONE;
                    self.head[pos] = q;
                    self.pos[q] = pos;
                    self.state[q] = VarState::Basic;
                    self.lu.as_mut().expect("factored").push_eta(pos, &self.alpha);
                    since_refactor += 1;
                    if since_refactor >= REFACTOR_EVERY {
                        if !self.refactor() {
                            return LpSolution::failed(
                                LpStatus::NumericFailure,
                                self.problem,
                                self.iterations,
                            );
                        }
                        self.compute_basic_values();
                        since_refactor = 0;
                    }
                }
                Ratio::Unbounded => unreachable!(),
            }

            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate >= self.tol.stall_pivots && !bland {
                    log::trace!("stalling after {degenerate} degenerate pivots, using Bland's rule");
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    fn finish(mut self) -> LpSolution {
        let mut cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.lu.as_mut().expect("factored").btran(&mut cb);
        let duals = cb;
        let primal: Vec<f64> = self.x[..self.n].to_vec();
        let reduced_costs: Vec<f64> = (0..self.n)
            .map(|j| self.cost[j] - self.col_dot(j, &duals))
            .collect();
        let objective = self.problem.objective_at(&primal);
        let viol = self.problem.max_violation(&primal);
        if viol > self.tol.feasibility {
            log::warn!("optimal basis violates feasibility by {viol:e}");
            return LpSolution::failed(LpStatus::NumericFailure, self.problem, self.iterations);
        }
        let basis = Basis {
            state: self.state.clone(),
            head: self.head.clone(),
        };
        LpSolution {
            status: LpStatus::Optimal,
            objective,
            primal,
            duals,
            reduced_costs,
            ray: None,
            basis: Some(basis),
            iterations: self.iterations,
        }
    }
}
