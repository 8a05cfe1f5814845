//! Price loop: projected subgradient ascent on the EENS prices with a
//! Polyak step aimed at the best upper bound, recovering a feasible plan at
//! every iterate.

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::Executor;
use crate::inner::{DualSolver, InnerConfig};
use crate::lp::{LpStatus, RevisedSimplex};
use crate::model::{eens_by_zone, first_stage_cost, ExpansionPlan, ScenarioSet, Shedding, SystemInstance, TimeGrid};
use crate::recovery::{recover_all, RecoveryOptions, ZoneRecovery};
use crate::subproblem::SecondStage;

/// Slack allowed on EENS limits when checking a plan, MWh.
pub const EPS_EENS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterConfig {
    /// Starting price for every zone, EUR/MWh.
    pub lambda0: f64,
    /// Per-zone starting prices; overrides `lambda0` when set.
    pub lambda_start: Option<Vec<f64>>,
    pub gap_target: f64,
    pub max_outer: usize,
    /// Stop when the subgradient norm falls below this, MWh.
    pub rho_tol: f64,
    /// Evaluate a single iterate at the starting prices.
    pub fixed_lambda: bool,
    /// Halve the step scale, and step again from the best prices so far,
    /// after this many iterations without a better lower bound. `None`
    /// keeps the plain Polyak step.
    pub step_decay: Option<usize>,
    pub inner: InnerConfig,
    pub recovery: RecoveryOptions,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            lambda0: 50.0,
            lambda_start: None,
            gap_target: 0.02,
            max_outer: 50,
            rho_tol: 1e-9,
            fixed_lambda: false,
            step_decay: Some(5),
            inner: InnerConfig::default(),
            recovery: RecoveryOptions::default(),
        }
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsRecord {
    pub k: usize,
    /// Certified lower bound on `g(lambda^k)`.
    pub lower: f64,
    /// Upper bound from the recovered plan at this iterate.
    pub upper: f64,
    pub best_lower: f64,
    pub best_upper: f64,
    /// `(best_upper - best_lower) / best_upper`
    pub gap: f64,
    /// Step taken after this iterate; zero on the last one.
    pub alpha: f64,
    pub rho_norm: f64,
    /// Inner estimate `W_best - sum lambda EENS`.
    pub g_estimate: f64,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryLogEntry {
    pub k: usize,
    pub lambda: Vec<f64>,
    pub upper: f64,
    pub zones: Vec<ZoneRecovery>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrueCostSource {
    /// Operations re-optimized at the final prices met every limit.
    PriceEvaluation,
    /// The recovered point was cheaper or the re-optimized one infeasible.
    RecoveredPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueCost {
    pub value: f64,
    pub first_stage: f64,
    pub operating: f64,
    /// Achieved EENS per zone of the operations behind `value`.
    pub eens: Vec<f64>,
    pub source: TrueCostSource,
    /// Cost and EENS of the re-optimized operations, feasible or not.
    pub evaluated: f64,
    pub evaluated_eens: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OuterResult {
    pub final_plan: ExpansionPlan,
    /// Prices at the iterate with the best lower bound.
    pub lambda_final: Vec<f64>,
    /// Prices of the last evaluated iterate.
    pub lambda_last: Vec<f64>,
    pub bounds_trace: Vec<BoundsRecord>,
    pub recovery_log: Vec<RecoveryLogEntry>,
    pub true_cost: TrueCost,
    pub best_upper: f64,
    pub best_lower: f64,
    pub gap: f64,
    pub converged: bool,
    /// EENS per zone of the recovered point behind `best_upper`.
    pub final_eens: Vec<f64>,
}

/// EENS excess per zone: `E[sum_t dt ls_n] - EENS_n`.
pub fn rho(shedding: &Shedding, scenarios: &ScenarioSet, grid: &TimeGrid, eens_limits: &[f64]) -> Vec<f64> {
    eens_by_zone(shedding, scenarios, grid)
        .iter()
        .zip(eens_limits)
        .map(|(e, l)| e - l)
        .collect()
}

/// Projected Polyak step on the prices. `None` when `rho` is zero.
pub fn lambda_update(lambda: &[f64], rho: &[f64], w_star: f64, w_k: f64) -> Option<(Vec<f64>, f64)> {
    let norm2: f64 = rho.iter().map(|r| r * r).sum();
    if norm2 == 0.0 {
        return None;
    }
    let alpha = ((w_star - w_k) / norm2).max(0.0);
    let next = lambda.iter().zip(rho).map(|(l, r)| (l + alpha * r).max(0.0)).collect();
    Some((next, alpha))
}

/// Runs the price loop to the gap target or the iteration cap.
pub fn run(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    config: &OuterConfig,
    executor: &Executor,
) -> Result<OuterResult> {
    let nz = instance.zones.len();
    let mut lambda = match &config.lambda_start {
        Some(l) if l.len() == nz => l.clone(),
        Some(l) => return Err(Error::Invalid(format!("{} starting prices for {nz} zones", l.len()))),
        None => vec![config.lambda0; nz],
    };
    if lambda.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Invalid("starting prices must be nonnegative".into()));
    }
    let limits = instance.eens_limits();
    let mut solver = DualSolver::new(instance, scenarios, config.inner, *executor)?;

    let mut trace: Vec<BoundsRecord> = Vec::new();
    let mut log = Vec::new();
    let mut best_upper = f64::INFINITY;
    let mut best_lower = f64::NEG_INFINITY;
    let mut best: Option<(ExpansionPlan, Vec<f64>)> = None;
    let mut lambda_final = lambda.clone();
    let mut converged = false;
    let mut scale = 1.0;
    let mut stale = 0;
    // subgradient and dual estimate at lambda_final
    let mut best_step: (Vec<f64>, f64) = (Vec::new(), 0.0);

    for k in 0..config.max_outer.max(1) {
        let sol = solver.solve(&lambda)?;
        let rec = recover_all(&sol, instance, scenarios, config.recovery)?;
        if rec.ub < best_upper {
            best_upper = rec.ub;
            best = Some((rec.plan.clone(), rec.eens.clone()));
        }
        let r = rho(&sol.shedding, scenarios, &instance.time_grid, &limits);
        // W^k is the inner estimate; fall back to the certified bound if
        // the estimate already sits above the best upper bound
        let w_k = if sol.g < best_upper { sol.g } else { sol.lower_bound };
        let mut restart = false;
        if sol.lower_bound > best_lower {
            best_lower = sol.lower_bound;
            lambda_final = lambda.clone();
            best_step = (r.clone(), w_k);
            stale = 0;
        } else {
            stale += 1;
            if config.step_decay.is_some_and(|n| stale >= n) {
                scale *= 0.5;
                stale = 0;
                restart = true;
                debug!("step scale now {scale}, back to the best prices");
            }
        }
        if sol.lower_bound > best_upper + 1e-6 * best_upper.abs() {
            return Err(Error::Sandwich {
                k,
                lower: sol.lower_bound,
                upper: best_upper,
            });
        }
        let rho_norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let gap = (best_upper - best_lower) / best_upper.abs().max(1e-12);
        info!(
            "outer k={k} lower={:.6} upper={:.6} gap={:.4e} |rho|={:.4e} inner={}",
            sol.lower_bound, rec.ub, gap, rho_norm, sol.iterations
        );
        log.push(RecoveryLogEntry {
            k,
            lambda: lambda.clone(),
            upper: rec.ub,
            zones: rec.zones.clone(),
        });
        let done = config.fixed_lambda || gap <= config.gap_target || rho_norm <= config.rho_tol;
        let mut alpha = 0.0;
        let mut next = None;
        if !done && k + 1 < config.max_outer {
            let (from, g, w) = if restart {
                (&lambda_final, &best_step.0, best_step.1)
            } else {
                (&lambda, &r, w_k)
            };
            let target = w + scale * (best_upper - w);
            if let Some((l, a)) = lambda_update(from, g, target, w) {
                alpha = a;
                next = Some(l);
            }
        }
        trace.push(BoundsRecord {
            k,
            lower: sol.lower_bound,
            upper: rec.ub,
            best_lower,
            best_upper,
            gap,
            alpha,
            rho_norm,
            g_estimate: sol.g,
            lambda: lambda.clone(),
            rho: r,
            inner_iterations: sol.iterations,
        });
        if done {
            converged = !config.fixed_lambda || gap <= config.gap_target;
            break;
        }
        match next {
            Some(l) => lambda = l,
            None => break,
        }
    }

    let (final_plan, final_eens) = best.expect("at least one iteration");
    let lambda_last = trace.last().map(|r| r.lambda.clone()).unwrap_or_default();
    let eval_lambda = if config.fixed_lambda { &lambda_last } else { &lambda_final };
    let true_cost = true_cost(&final_plan, best_upper, &final_eens, eval_lambda, instance, scenarios, executor)?;
    debug!("true cost {:.6} via {:?}", true_cost.value, true_cost.source);
    Ok(OuterResult {
        final_plan,
        lambda_final,
        lambda_last,
        gap: trace.last().map_or(f64::NAN, |r| r.gap),
        bounds_trace: trace,
        recovery_log: log,
        true_cost,
        best_upper,
        best_lower,
        converged,
        final_eens,
    })
}

/// Fixes `plan`, re-optimizes operations with shedding priced at `lambda`,
/// and reports investment plus operating cost without the shedding term.
/// Falls back to the recovered point's cost `upper` when that is lower or
/// the re-optimized operations break a limit.
pub fn true_cost(
    plan: &ExpansionPlan,
    upper: f64,
    upper_eens: &[f64],
    lambda: &[f64],
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    executor: &Executor,
) -> Result<TrueCost> {
    let results = executor.map(scenarios.len(), RevisedSimplex::default, |backend, i| {
        let stage = SecondStage::build(instance, &scenarios.scenarios[i], lambda, plan)?;
        let r = stage.evaluate(backend, None)?;
        Ok::<_, Error>((stage.operating_cost(&r.primal), r.shedding))
    });
    let first_stage = first_stage_cost(plan, instance);
    let mut operating = 0.0;
    let mut shedding = Vec::with_capacity(results.len());
    for (s, r) in scenarios.scenarios.iter().zip(results) {
        let (cost, ls) = r?;
        operating += s.probability * cost;
        shedding.push(ls);
    }
    let eens = eens_by_zone(&shedding, scenarios, &instance.time_grid);
    let evaluated = first_stage + operating;
    let feasible = eens.iter().zip(&instance.zones).all(|(e, z)| *e <= z.eens_limit + EPS_EENS);
    if feasible && evaluated <= upper {
        Ok(TrueCost {
            value: evaluated,
            first_stage,
            operating,
            eens: eens.clone(),
            source: TrueCostSource::PriceEvaluation,
            evaluated,
            evaluated_eens: eens,
        })
    } else {
        Ok(TrueCost {
            value: upper,
            first_stage,
            operating: upper - first_stage,
            eens: upper_eens.to_vec(),
            source: TrueCostSource::RecoveredPoint,
            evaluated,
            evaluated_eens: eens,
        })
    }
}

/// Cost of a plan evaluated as in [`true_cost`] but without the fallback;
/// handy for comparing plans from different runs.
pub fn plan_cost(plan: &ExpansionPlan, instance: &SystemInstance, scenarios: &ScenarioSet) -> Result<(f64, Vec<f64>)> {
    let zero = vec![0.0; instance.zones.len()];
    let mut cost = first_stage_cost(plan, instance);
    let mut shedding = Vec::new();
    for s in &scenarios.scenarios {
        let stage = SecondStage::build(instance, s, &zero, plan)?;
        let sol = crate::lp::LpBackend::solve(&mut RevisedSimplex::default(), &stage.lp, None);
        if sol.status != LpStatus::Optimal {
            return Err(Error::Lp(sol.status));
        }
        cost += s.probability * stage.operating_cost(&sol.primal);
        shedding.push(stage.layout.shedding(&sol.primal));
    }
    Ok((cost, eens_by_zone(&shedding, scenarios, &instance.time_grid)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::solve_extended_form;

    #[test]
    fn rho_examples() {
        let (inst, sc) = fixtures::toy2();
        let zero: Shedding = sc
            .scenarios
            .iter()
            .map(|_| vec![vec![0.0; inst.num_blocks()]; inst.zones.len()])
            .collect();
        assert_eq!(rho(&zero, &sc, &inst.time_grid, &[5.0, 5.0]), vec![-5.0, -5.0]);
        let mut single = sc.single(0);
        single.scenarios[0].probability = 1.0;
        let ls = vec![vec![vec![4.0, 8.0, 0.0]]];
        assert_eq!(rho(&ls, &single, &TimeGrid::uniform(3, 1.0), &[3.0]), vec![9.0]);
    }

    #[test]
    fn lambda_update_examples() {
        // alpha = 30 with rho = -5 needs W* - W = 30 * 25
        let (l, a) = lambda_update(&[100.0], &[-5.0], 750.0, 0.0).unwrap();
        assert_eq!(a, 30.0);
        assert_eq!(l, vec![0.0]);
        let (l, a) = lambda_update(&[1.0, 1.0], &[2.0, 1.0], 110.0, 100.0).unwrap();
        assert_eq!(a, 2.0);
        assert_eq!(l, vec![5.0, 3.0]);
        assert!(lambda_update(&[1.0], &[0.0], 110.0, 100.0).is_none());
    }

    #[test]
    fn toy2_converges_near_oracle() {
        let (inst, sc) = fixtures::toy2();
        let oracle = solve_extended_form(&inst, &sc).unwrap();
        let res = run(&inst, &sc, &OuterConfig::default(), &Executor::new(2)).unwrap();
        let last = res.bounds_trace.last().unwrap();
        assert!(last.gap <= 0.02, "gap {}", last.gap);
        for r in &res.bounds_trace {
            assert!(r.lower <= oracle.cost * (1.0 + 1e-6));
            assert!(r.upper >= oracle.cost * (1.0 - 1e-6));
        }
        let true_gap = (res.true_cost.value - res.best_lower) / res.true_cost.value;
        assert!(true_gap <= last.gap + 1e-12);
        assert!((res.true_cost.value - oracle.cost) / oracle.cost <= 0.02);
    }

    #[test]
    fn loose_limits_drive_prices_to_zero() {
        let (mut inst, sc) = fixtures::toy2();
        for z in &mut inst.zones {
            z.eens_limit = 1e9;
        }
        let res = run(&inst, &sc, &OuterConfig::default(), &Executor::new(1)).unwrap();
        let oracle = solve_extended_form(&inst, &sc).unwrap();
        assert!(res.lambda_last.iter().all(|l| *l == 0.0) || res.gap <= 0.02, "{:?}", res.lambda_last);
        assert!((res.true_cost.value - oracle.cost) / oracle.cost <= 0.02);
    }

    #[test]
    fn fixed_lambda_runs_one_iterate() {
        let (inst, sc) = fixtures::toy2();
        let cfg = OuterConfig {
            lambda0: 15000.0,
            fixed_lambda: true,
            ..OuterConfig::default()
        };
        let res = run(&inst, &sc, &cfg, &Executor::new(1)).unwrap();
        assert_eq!(res.bounds_trace.len(), 1);
        assert_eq!(res.bounds_trace[0].lambda, vec![15000.0, 15000.0]);
        for (e, z) in res.true_cost.eens.iter().zip(&inst.zones) {
            assert!(*e <= z.eens_limit + EPS_EENS);
        }
    }
}
