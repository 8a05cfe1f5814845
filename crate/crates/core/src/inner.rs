//! Dual function evaluation: for fixed EENS prices, minimize first-stage
//! cost plus expected priced operations over the plan by projected
//! subgradient with a Polyak step aimed at the wait-and-see bound.

use std::sync::Mutex;

use log::{debug, trace, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::Executor;
use crate::lp::{Basis, LpBackend, LpProblem, LpStatus, RevisedSimplex, Sense, VarId};
use crate::model::{eens_by_zone, first_stage_cost, ExpansionPlan, ScenarioSet, Shedding, SystemInstance};
use crate::subproblem::{wait_and_see_with, SecondStage, SubproblemResult, WaitAndSee};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    pub max_iters: usize,
    /// Stop when `|W^i - W^{i-1}| / max(1, |W^{i-1}|)` drops below this.
    pub tol: f64,
    /// Re-estimate the Polyak target only when some price moved by more than
    /// this relative amount. `None` re-estimates on every call.
    pub target_refresh: Option<f64>,
    /// Consecutive iterations the relative change must stay below `tol`.
    pub patience: usize,
    /// After the subgradient phase, up to this many evaluations at the
    /// minimizer of the cut model, stopping once the certified gap is
    /// below `tol`. Zero keeps the pure subgradient method.
    #[serde(default)]
    pub polish: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-3,
            target_refresh: Some(0.05),
            patience: 3,
            polish: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerState {
    pub iteration: usize,
    /// Plan to be evaluated next.
    pub plan: ExpansionPlan,
    /// `W` at the last evaluated plan.
    pub objective: f64,
    pub q_new: Vec<f64>,
    pub q_retire: Vec<f64>,
    pub target: f64,
    pub alpha: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

impl InnerState {
    pub fn new(plan: ExpansionPlan, target: f64) -> Self {
        Self {
            iteration: 0,
            plan,
            objective: f64::NAN,
            q_new: vec![],
            q_retire: vec![],
            target,
            alpha: 0.0,
            history: vec![],
            converged: false,
        }
    }

    /// Lowest `W` seen so far.
    pub fn best(&self) -> f64 {
        self.history.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InnerTraceRow {
    pub i: usize,
    pub w: f64,
    pub q_norm: f64,
    pub alpha: f64,
}

/// Result of one dual function evaluation.
#[derive(Debug, Clone)]
pub struct DualFunctionSolution {
    pub lambda: Vec<f64>,
    /// `W_best - sum_n lambda_n EENS_n`; an estimate from above of `g`.
    pub g: f64,
    /// Certified lower bound on `g(lambda)`.
    pub lower_bound: f64,
    pub w_best: f64,
    pub target: f64,
    pub plan: ExpansionPlan,
    /// `[scenario][zone][t]` at `plan`.
    pub shedding: Shedding,
    /// Achieved EENS per zone at `plan`.
    pub eens: Vec<f64>,
    /// Second-stage primal points at `plan`, one per scenario.
    pub primals: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<InnerTraceRow>,
}

/// Polyak step length and whether the iteration should stop instead.
pub fn polyak_step(w: f64, target: f64, q_new: &[f64], q_retire: &[f64]) -> (f64, bool) {
    let norm2: f64 = q_new.iter().chain(q_retire).map(|q| q * q).sum();
    if norm2 == 0.0 {
        return (0.0, true);
    }
    let alpha = (w - target) / norm2;
    if alpha < 0.0 {
        (0.0, true)
    } else {
        (alpha, false)
    }
}

/// Drops the components of `q` that push `x` out of `[0, upper]`. What is
/// left is still a subgradient of `W` plus the indicator of the box, and
/// its norm is not inflated by directions the projection would cancel.
pub fn tangent_subgradient(x: &[f64], q: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(q)
        .zip(upper)
        .map(|((x, q), u)| {
            if (*x <= 0.0 && *q > 0.0) || (*x >= *u && *q < 0.0) {
                0.0
            } else {
                *q
            }
        })
        .collect()
}

/// `clamp(x - alpha q, 0, upper)` componentwise.
pub fn project_step(
    plan: &ExpansionPlan,
    alpha: f64,
    q_new: &[f64],
    q_retire: &[f64],
    upper_new: &[f64],
    upper_retire: &[f64],
) -> ExpansionPlan {
    let step = |x: &[f64], q: &[f64], u: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(q)
            .zip(u)
            .map(|((x, q), u)| (x - alpha * q).clamp(0.0, *u))
            .collect()
    };
    ExpansionPlan {
        invest: step(&plan.invest, q_new, upper_new),
        retire: step(&plan.retire, q_retire, upper_retire),
    }
}

/// Expected wait-and-see value at `lambda` together with the per-scenario
/// solutions, in scenario order.
pub fn estimate_target(
    lambda: &[f64],
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    executor: &Executor,
) -> Result<(f64, Vec<WaitAndSee>)> {
    if lambda.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Invalid("prices must be nonnegative".into()));
    }
    let results = executor.map(scenarios.len(), RevisedSimplex::default, |backend, i| {
        wait_and_see_with(&scenarios.scenarios[i], lambda, instance, backend)
    });
    let mut target = 0.0;
    let mut out = Vec::with_capacity(results.len());
    for (s, r) in scenarios.scenarios.iter().zip(results) {
        let ws = r?;
        target += s.probability * ws.value;
        out.push(ws);
    }
    Ok((target, out))
}

struct Slot {
    stage: SecondStage,
    basis: Option<Basis>,
}

/// One evaluation of all scenarios at a plan.
struct Evaluation {
    w: f64,
    q_new: Vec<f64>,
    q_retire: Vec<f64>,
    results: Vec<SubproblemResult>,
}

/// Cuts per scenario kept for the lower bound model, and how many of them
/// enter the bounding LP.
const STORED_CUTS: usize = 4000;
const MASTER_CUTS: usize = 300;
/// Inner iterations between checks of the cut model gap.
const CERTIFY_EVERY: usize = 10;

/// Minorant of one scenario's value function built from an optimal dual
/// point. The dual stays feasible when the plan or the shedding prices
/// change (shedding is bounded on both sides), so the minorant is valid
/// for every plan and every `lambda >= 0`:
/// `V(x, lambda) >= constant + shed_term(lambda) + mu . x`.
struct Cut {
    constant: f64,
    /// Capacity sensitivities, candidates then retirements.
    mu: Vec<f64>,
    /// Load balance duals `[zone][t]`.
    duals: Vec<Vec<f64>>,
}

impl Cut {
    /// `sum D min(lambda dt - y, 0)`: the bound term of each shedding
    /// variable with its reduced cost at `lambda`.
    fn shed_term(&self, lambda: &[f64], demand: &[Vec<f64>], hours: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((y, d), l) in self.duals.iter().zip(demand).zip(lambda) {
            for ((y, d), h) in y.iter().zip(d).zip(hours) {
                s += d * (l * h - y).min(0.0);
            }
        }
        s
    }
}

/// Keeps the scenario LPs and their bases alive across dual function
/// evaluations so later calls warm start.
pub struct DualSolver<'a> {
    instance: &'a SystemInstance,
    scenarios: &'a ScenarioSet,
    executor: Executor,
    config: InnerConfig,
    slots: Vec<Mutex<Slot>>,
    start: ExpansionPlan,
    cached_target: Option<(Vec<f64>, f64)>,
    upper_new: Vec<f64>,
    upper_retire: Vec<f64>,
    lambda: Vec<f64>,
    cuts: Vec<Vec<Cut>>,
}

impl<'a> DualSolver<'a> {
    pub fn new(
        instance: &'a SystemInstance,
        scenarios: &'a ScenarioSet,
        config: InnerConfig,
        executor: Executor,
    ) -> Result<Self> {
        instance.check_dimensions(scenarios)?;
        if scenarios.is_empty() {
            return Err(Error::Invalid("no scenarios".into()));
        }
        let topo = instance.topology()?;
        let start = ExpansionPlan::zeros(instance);
        let lambda = vec![0.0; instance.zones.len()];
        let slots = scenarios
            .scenarios
            .iter()
            .map(|s| {
                Ok(Mutex::new(Slot {
                    stage: SecondStage::build(instance, s, &lambda, &start)?,
                    basis: None,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            instance,
            scenarios,
            executor,
            config,
            slots,
            start,
            cached_target: None,
            upper_new: topo.candidates.iter().map(|&u| instance.thermal[u].cap_upper).collect(),
            upper_retire: topo.existing.iter().map(|&u| instance.thermal[u].cap_upper).collect(),
            lambda,
            cuts: scenarios.scenarios.iter().map(|_| Vec::new()).collect(),
        })
    }

    pub fn config(&self) -> &InnerConfig {
        &self.config
    }

    /// Plan the next call starts from.
    pub fn start_plan(&self) -> &ExpansionPlan {
        &self.start
    }

    pub fn set_start_plan(&mut self, plan: ExpansionPlan) {
        self.start = plan;
    }

    fn set_lambda(&mut self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.instance.zones.len() {
            return Err(Error::Invalid(format!(
                "{} prices for {} zones",
                lambda.len(),
                self.instance.zones.len()
            )));
        }
        if lambda.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::Invalid("prices must be nonnegative".into()));
        }
        if lambda != self.lambda.as_slice() {
            for slot in &mut self.slots {
                slot.get_mut().expect("slot lock").stage.set_lambda(lambda);
            }
            self.lambda = lambda.to_vec();
        }
        Ok(())
    }

    /// Polyak target at the current prices, reusing the cached one while
    /// prices stay within the refresh threshold. Returns the target and
    /// whether it was computed at exactly these prices.
    fn target(&mut self) -> Result<(f64, bool)> {
        if let Some((at, value)) = &self.cached_target {
            if at == &self.lambda {
                return Ok((*value, true));
            }
            if let Some(thr) = self.config.target_refresh {
                let moved = at
                    .iter()
                    .zip(&self.lambda)
                    .any(|(a, b)| (a - b).abs() > thr * a.abs().max(1e-12));
                if !moved {
                    return Ok((*value, false));
                }
            }
        }
        let (value, _) = estimate_target(&self.lambda, self.instance, self.scenarios, &self.executor)?;
        debug!("wait-and-see target {value:.6}");
        self.cached_target = Some((self.lambda.clone(), value));
        Ok((value, true))
    }

    fn evaluate(&self, plan: &ExpansionPlan) -> Result<Evaluation> {
        let slots = &self.slots;
        let results = self.executor.map(slots.len(), RevisedSimplex::default, |backend, i| {
            let mut slot = slots[i].lock().expect("slot lock");
            slot.stage.set_plan(plan);
            let warm = slot.basis.take();
            let r = slot.stage.evaluate(backend, warm.as_ref());
            if let Ok(r) = &r {
                slot.basis = r.basis.clone();
            }
            r
        });
        let mut w = first_stage_cost(plan, self.instance);
        let topo = self.instance.topology()?;
        let mut q_new: Vec<f64> = topo
            .candidates
            .iter()
            .map(|&u| self.instance.thermal[u].ic + self.instance.thermal[u].fom)
            .collect();
        let mut q_retire: Vec<f64> = topo.existing.iter().map(|&u| -self.instance.thermal[u].fom).collect();
        let mut out = Vec::with_capacity(results.len());
        for (s, r) in self.scenarios.scenarios.iter().zip(results) {
            let r = r?;
            let p = s.probability;
            w += p * r.value;
            for (q, m) in q_new.iter_mut().zip(&r.mu_new) {
                *q += p * m;
            }
            for (q, m) in q_retire.iter_mut().zip(&r.mu_exist) {
                *q += p * m;
            }
            out.push(r);
        }
        Ok(Evaluation {
            w,
            q_new,
            q_retire,
            results: out,
        })
    }

    /// Evaluates every scenario at `state.plan`, records `W` and the
    /// subgradient, and moves the plan by one projected Polyak step.
    pub fn inner_step(&mut self, state: &mut InnerState) -> Result<()> {
        let eval = self.evaluate(&state.plan)?;
        self.absorb(state, &eval);
        Ok(())
    }

    fn absorb(&mut self, state: &mut InnerState, eval: &Evaluation) {
        let plan = state.plan.clone();
        self.add_cuts(&plan, eval);
        state.objective = eval.w;
        state.q_new = tangent_subgradient(&state.plan.invest, &eval.q_new, &self.upper_new);
        state.q_retire = tangent_subgradient(&state.plan.retire, &eval.q_retire, &self.upper_retire);
        let (alpha, stop) = polyak_step(eval.w, state.target, &state.q_new, &state.q_retire);
        state.alpha = alpha;
        state.converged = stop;
        state.history.push(eval.w);
        state.iteration += 1;
        if !stop {
            state.plan = project_step(
                &state.plan,
                alpha,
                &state.q_new,
                &state.q_retire,
                &self.upper_new,
                &self.upper_retire,
            );
        }
    }

    fn add_cuts(&mut self, plan: &ExpansionPlan, eval: &Evaluation) {
        let at = plan.to_vec();
        let hours = &self.instance.time_grid.block_duration;
        for ((r, s), cuts) in eval.results.iter().zip(&self.scenarios.scenarios).zip(&mut self.cuts) {
            let mut mu = r.mu_new.clone();
            mu.extend_from_slice(&r.mu_exist);
            let mut cut = Cut {
                constant: 0.0,
                mu,
                duals: r.balance_duals.clone(),
            };
            cut.constant = r.value - cut.shed_term(&self.lambda, &s.demand, hours) - dot(&cut.mu, &at);
            if cuts.len() == STORED_CUTS {
                cuts.remove(0);
            }
            cuts.push(cut);
        }
    }

    /// Minimizes the relaxed problem at `lambda`.
    pub fn solve(&mut self, lambda: &[f64]) -> Result<DualFunctionSolution> {
        self.set_lambda(lambda)?;
        let (target, exact_target) = self.target()?;
        let mut state = InnerState::new(self.start.clone(), target);
        let mut best: Option<(ExpansionPlan, Evaluation)> = None;
        let mut trace = Vec::new();
        let mut converged = false;
        let mut calm = 0;
        while state.iteration < self.config.max_iters {
            let plan = state.plan.clone();
            let eval = self.evaluate(&plan)?;
            let prev = state.history.last().copied();
            self.absorb(&mut state, &eval);
            let q_norm = state.q_new.iter().chain(&state.q_retire).map(|q| q * q).sum::<f64>().sqrt();
            trace!(
                "inner i={} W={:.6} |q|={:.6e} alpha={:.6e}",
                state.iteration,
                eval.w,
                q_norm,
                state.alpha
            );
            trace.push(InnerTraceRow {
                i: state.iteration,
                w: eval.w,
                q_norm,
                alpha: state.alpha,
            });
            if best.as_ref().map_or(true, |(_, b)| eval.w < b.w) {
                best = Some((plan, eval));
            }
            if prev.is_some_and(|p| (state.objective - p).abs() / p.abs().max(1.0) < self.config.tol) {
                calm += 1;
            } else {
                calm = 0;
            }
            let (best_plan, best_w) = best.as_ref().map(|(p, b)| (p, b.w)).expect("just set");
            // an exact target is a lower bound, so this gap is certified
            let gap = |lb: f64| (best_w - lb) / lb.abs().max(1.0) <= self.config.tol;
            let mut certified = exact_target && gap(target);
            if !certified && state.iteration % CERTIFY_EVERY == 0 {
                certified = self.cut_bound(best_plan)?.is_some_and(|(lb, _)| gap(lb));
            }
            if state.converged || calm >= self.config.patience.max(1) || certified {
                converged = true;
                break;
            }
        }
        let (mut plan, mut eval) = best.expect("at least one iteration");
        for _ in 0..self.config.polish {
            let Some((lb, at)) = self.cut_bound(&plan)? else { break };
            if (eval.w - lb) / lb.abs().max(1.0) <= self.config.tol {
                break;
            }
            let e = self.evaluate(&at)?;
            self.add_cuts(&at, &e);
            trace!("polish W={:.6} lower={:.6}", e.w, lb);
            if e.w < eval.w {
                plan = at;
                eval = e;
            }
        }
        let constant: f64 = lambda
            .iter()
            .zip(&self.instance.zones)
            .map(|(l, z)| l * z.eens_limit)
            .sum();
        let mut lower = self.cut_bound(&plan)?.map_or(f64::NEG_INFINITY, |(lb, _)| lb);
        if exact_target {
            lower = lower.max(target);
        }
        let shedding: Shedding = eval.results.iter().map(|r| r.shedding.clone()).collect();
        let eens = eens_by_zone(&shedding, self.scenarios, &self.instance.time_grid);
        debug!(
            "dual function: W_best={:.6} lower={:.6} target={:.6} iters={} converged={}",
            eval.w, lower, target, state.iteration, converged
        );
        self.start = plan.clone();
        Ok(DualFunctionSolution {
            lambda: lambda.to_vec(),
            g: eval.w - constant,
            lower_bound: lower.min(eval.w) - constant,
            w_best: eval.w,
            target,
            plan,
            shedding,
            eens,
            primals: eval.results.into_iter().map(|r| r.primal).collect(),
            iterations: state.iteration,
            converged,
            trace,
        })
    }

    /// Minimum of first-stage cost plus the expected cut model over the plan
    /// box at the current prices. Every cut minorizes its scenario's value
    /// function, so this is a valid lower bound on `min W`. Also returns
    /// the minimizing plan of the model.
    fn cut_bound(&self, near: &ExpansionPlan) -> Result<Option<(f64, ExpansionPlan)>> {
        let topo = self.instance.topology()?;
        let mut lp = LpProblem::new();
        let mut x = Vec::new();
        for (k, &u) in topo.candidates.iter().enumerate() {
            let unit = &self.instance.thermal[u];
            x.push(lp.add_var(format!("x_new[{k}]"), 0.0, self.upper_new[k], unit.ic + unit.fom));
        }
        for (k, &u) in topo.existing.iter().enumerate() {
            let unit = &self.instance.thermal[u];
            x.push(lp.add_var(format!("x_ret[{k}]"), 0.0, self.upper_retire[k], -unit.fom));
        }
        let at = near.to_vec();
        let hours = &self.instance.time_grid.block_duration;
        for (i, (s, cuts)) in self.scenarios.scenarios.iter().zip(&self.cuts).enumerate() {
            // operating values are nonnegative, so theta >= 0 is always valid
            let theta = lp.add_var(format!("theta[{i}]"), 0.0, f64::INFINITY, s.probability);
            let mut ranked: Vec<(f64, &Cut)> = cuts
                .iter()
                .map(|c| {
                    let base = c.constant + c.shed_term(&self.lambda, &s.demand, hours);
                    (base, c)
                })
                .collect();
            ranked.sort_by(|a, b| {
                let va = a.0 + dot(&a.1.mu, &at);
                let vb = b.0 + dot(&b.1.mu, &at);
                vb.total_cmp(&va)
            });
            let mut seen: Vec<(f64, &[f64])> = Vec::new();
            for (base, cut) in ranked {
                if seen.len() == MASTER_CUTS {
                    break;
                }
                let dup = seen.iter().any(|(b, mu)| {
                    (b - base).abs() <= 1e-9 * base.abs().max(1.0)
                        && mu.iter().zip(&cut.mu).all(|(a, c)| (a - c).abs() <= 1e-9 * a.abs().max(1.0))
                });
                if dup {
                    continue;
                }
                seen.push((base, &cut.mu));
                // row scaling keeps the bounding LP well conditioned
                let scale = cut.mu.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                let mut terms = vec![(theta, 1.0 / scale)];
                for (v, m) in x.iter().zip(&cut.mu) {
                    if *m != 0.0 {
                        terms.push((*v, -m / scale));
                    }
                }
                lp.add_row(format!("cut[{i},{}]", seen.len()), terms, Sense::Ge, base / scale);
            }
        }
        let sol = RevisedSimplex::default().solve(&lp, None);
        if sol.status != LpStatus::Optimal {
            warn!("lower bound model not solved: {:?}", sol.status);
            return Ok(None);
        }
        let (dual, _) = sol.dual_objective(&lp, 0.0);
        let n = topo.candidates.len();
        let clip = |v: &[VarId], u: &[f64]| -> Vec<f64> {
            v.iter().zip(u).map(|(j, u)| sol.primal[j.0].clamp(0.0, *u)).collect()
        };
        let at = ExpansionPlan {
            invest: clip(&x[..n], &self.upper_new),
            retire: clip(&x[n..], &self.upper_retire),
        };
        Ok(Some((dual.min(sol.objective), at)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One-shot evaluation of `g(lambda)` starting from the zero plan.
pub fn solve_dual_function(
    lambda: &[f64],
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    config: InnerConfig,
    executor: &Executor,
) -> Result<DualFunctionSolution> {
    DualSolver::new(instance, scenarios, config, *executor)?.solve(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::solve_relaxed_extended;

    #[test]
    fn polyak_arithmetic() {
        let (a, stop) = polyak_step(110.0, 100.0, &[2.0], &[1.0]);
        assert_eq!(a, 2.0);
        assert!(!stop);
        assert_eq!(polyak_step(90.0, 100.0, &[2.0], &[1.0]), (0.0, true));
        assert_eq!(polyak_step(110.0, 100.0, &[0.0], &[0.0]), (0.0, true));
    }

    #[test]
    fn projection_clamps_both_ends() {
        let plan = ExpansionPlan {
            invest: vec![1.0],
            retire: vec![],
        };
        let down = project_step(&plan, 1.0, &[5.0], &[], &[200.0], &[]);
        assert_eq!(down.invest, vec![0.0]);
        let up = project_step(&plan, 1.0, &[-300.0], &[], &[200.0], &[]);
        assert_eq!(up.invest, vec![200.0]);
    }

    #[test]
    fn tangent_drops_outward_components() {
        let q = tangent_subgradient(&[0.0, 5.0, 10.0, 10.0], &[3.0, 3.0, -1.0, 1.0], &[10.0; 4]);
        assert_eq!(q, vec![0.0, 3.0, 0.0, 1.0]);
    }

    #[test]
    fn target_is_expected_wait_and_see() {
        let (inst, sc) = fixtures::toy2();
        let lambda = [50.0, 50.0];
        let (t, ws) = estimate_target(&lambda, &inst, &sc, &Executor::new(2)).unwrap();
        for (i, w) in ws.iter().enumerate() {
            let single = solve_relaxed_extended(&inst, &sc.single(i), &lambda).unwrap();
            assert!((single.value - w.value).abs() <= 1e-7 * w.value.abs().max(1.0));
        }
        assert!((t - 0.5 * (ws[0].value + ws[1].value)).abs() < 1e-9 * t.abs());
        let g0 = solve_relaxed_extended(&inst, &sc, &[0.0, 0.0]).unwrap();
        let (t0, _) = estimate_target(&[0.0, 0.0], &inst, &sc, &Executor::new(1)).unwrap();
        assert!(t0 <= g0.value + 1e-6 * g0.value.abs());
    }

    #[test]
    fn toy2_high_price_close_to_oracle() {
        let (inst, sc) = fixtures::toy2();
        let lambda = [15000.0, 15000.0];
        let exact = solve_relaxed_extended(&inst, &sc, &lambda).unwrap();
        let sol = solve_dual_function(&lambda, &inst, &sc, InnerConfig::default(), &Executor::new(1)).unwrap();
        assert!(sol.w_best >= exact.value * (1.0 - 1e-7));
        assert!(
            sol.w_best <= exact.value * 1.005,
            "W={} exact={} iters={}",
            sol.w_best,
            exact.value,
            sol.iterations
        );
        assert!(sol.lower_bound <= exact.g + 1e-6 * exact.g.abs());
        assert!(sol.plan.bound_violation(&inst) == 0.0);
    }

    #[test]
    fn single_scenario_reaches_its_optimum() {
        let (inst, sc) = fixtures::toy2();
        let one = sc.single(0);
        let lambda = [300.0, 300.0];
        let exact = solve_relaxed_extended(&inst, &one, &lambda).unwrap();
        let sol = solve_dual_function(&lambda, &inst, &one, InnerConfig::default(), &Executor::new(1)).unwrap();
        assert!(
            (sol.w_best - exact.value).abs() <= 1e-3 * exact.value,
            "W={} exact={}",
            sol.w_best,
            exact.value
        );
    }

    #[test]
    fn best_envelope_nonincreasing() {
        let (inst, sc) = fixtures::toy2();
        let mut solver = DualSolver::new(&inst, &sc, InnerConfig::default(), Executor::new(1)).unwrap();
        let sol = solver.solve(&[2000.0, 2000.0]).unwrap();
        let mut env = f64::INFINITY;
        for row in &sol.trace {
            let next = env.min(row.w);
            assert!(next <= env);
            env = next;
        }
        assert_eq!(env, sol.w_best);
    }
}
