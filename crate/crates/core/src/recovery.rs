//! Feasibility recovery: cover shedding with idle dispatchable capacity,
//! size the capacity each zone is still missing, take it first from undone
//! retirements and then from new peaking units, and price the repaired
//! point to get an upper bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner::DualFunctionSolution;
use crate::model::{eens_by_zone, first_stage_cost, ExpansionPlan, ScenarioSet, Shedding, SystemInstance, TimeGrid};
use crate::subproblem::SecondStage;

/// Shedding below this does not count towards LOLE (MW).
pub const EPS_LS: f64 = 1e-6;
/// Recovery stops once the remaining deficit is below this (MWh).
pub const EPS_DEFICIT: f64 = 1e-6;
const MAX_ROUNDS: usize = 100_000;

/// How the expected shedding duration is treated inside the sizing loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoleMode {
    /// Recomputed over the blocks still shedding after each step.
    #[default]
    Recompute,
    /// Computed once from the initial shedding.
    Fixed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub lole: LoleMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecovery {
    /// Capacity needed, MW.
    pub x_new: f64,
    /// Remaining shedding `[scenario][t]`.
    pub ls_f: Vec<Vec<f64>>,
    pub rounds: usize,
}

fn expected(ls: &[Vec<f64>], probs: &[f64], hours: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    ls.iter()
        .zip(probs)
        .map(|(row, p)| p * row.iter().zip(hours).map(|(l, h)| h * f(*l)).sum::<f64>())
        .sum()
}

fn lole(ls: &[Vec<f64>], probs: &[f64], hours: &[f64]) -> f64 {
    let above = expected(ls, probs, hours, |l| if l > EPS_LS { 1.0 } else { 0.0 });
    if above > 0.0 {
        above
    } else {
        expected(ls, probs, hours, |l| if l > 0.0 { 1.0 } else { 0.0 })
    }
}

/// Least capacity that brings one zone's EENS down to `eens_limit`.
/// `ls_hat` is `[scenario][t]`.
pub fn recover_node(
    ls_hat: &[Vec<f64>],
    eens_limit: f64,
    scenarios: &ScenarioSet,
    grid: &TimeGrid,
    mode: LoleMode,
) -> NodeRecovery {
    let probs = scenarios.probabilities();
    let hours = &grid.block_duration;
    let eens = |ls: &[Vec<f64>]| expected(ls, &probs, hours, |l| l);
    let shave = |x: f64| -> Vec<Vec<f64>> {
        ls_hat
            .iter()
            .map(|row| row.iter().map(|l| (l - x).max(0.0)).collect())
            .collect()
    };
    if eens(ls_hat) - eens_limit <= 0.0 {
        return NodeRecovery {
            x_new: 0.0,
            ls_f: ls_hat.to_vec(),
            rounds: 0,
        };
    }
    if eens_limit <= 0.0 {
        let peak = ls_hat.iter().flatten().fold(0.0f64, |m, l| m.max(*l));
        return NodeRecovery {
            x_new: peak,
            ls_f: shave(peak),
            rounds: 0,
        };
    }
    let fixed = lole(ls_hat, &probs, hours);
    let mut x_new = 0.0;
    let mut ls_f = ls_hat.to_vec();
    let mut rounds = 0;
    while rounds < MAX_ROUNDS {
        let deficit = eens(&ls_f) - eens_limit;
        if deficit <= EPS_DEFICIT {
            break;
        }
        let duration = match mode {
            LoleMode::Recompute => lole(&ls_f, &probs, hours),
            LoleMode::Fixed => fixed,
        };
        if duration <= 0.0 {
            break;
        }
        let x_plus = deficit / duration;
        x_new += x_plus;
        for l in ls_f.iter_mut().flatten() {
            *l = (*l - x_plus).max(0.0);
        }
        rounds += 1;
    }
    NodeRecovery {
        x_new,
        ls_f: shave(x_new),
        rounds,
    }
}

/// What recovery did in one zone.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ZoneRecovery {
    pub zone: String,
    /// EENS excess before recovery, MWh.
    pub violation: f64,
    /// Expected energy served by idle units already in the plan, MWh.
    pub redispatched: f64,
    /// Total capacity added, MW.
    pub x_new: f64,
    /// `(technology, MW)` of retirements undone.
    pub restored: Vec<(String, f64)>,
    /// `(technology, MW)` of new peaking capacity.
    pub added: Vec<(String, f64)>,
    pub rounds: usize,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Zones that needed recovery, in zone order.
    pub zones: Vec<ZoneRecovery>,
    pub plan: ExpansionPlan,
    /// `[scenario][zone][t]`
    pub ls_f: Shedding,
    /// Repaired second-stage points, one per scenario.
    pub primals: Vec<Vec<f64>>,
    pub eens: Vec<f64>,
    /// Investment and operating cost of the repaired point.
    pub ub: f64,
    /// Largest constraint violation of the repaired point.
    pub max_violation: f64,
}

/// Capacity source inside a zone.
enum Source {
    Restore(usize),
    Peaker(usize),
}

/// Repairs every zone whose EENS exceeds its limit and prices the result.
pub fn recover_all(
    solution: &DualFunctionSolution,
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    options: RecoveryOptions,
) -> Result<RecoveryResult> {
    let topo = instance.topology()?;
    let nz = instance.zones.len();
    let hours = &instance.time_grid.block_duration;
    let mut plan = solution.plan.clone();
    let mut primals = solution.primals.clone();
    // shedding left after redispatch, the base the new capacity works on
    let mut base = solution.shedding.clone();
    let mut ls_f = solution.shedding.clone();
    let mut zones = Vec::new();
    // per zone: (source, MW) in dispatch order
    let mut sources: Vec<Vec<(Source, f64)>> = (0..nz).map(|_| Vec::new()).collect();
    let mut repaired = vec![false; nz];

    for (n, zone) in instance.zones.iter().enumerate() {
        let violation = solution.eens[n] - zone.eens_limit;
        if violation <= 0.0 {
            continue;
        }
        // below a unit's marginal cost the relaxation sheds rather than run it
        let mut units: Vec<(f64, bool, usize)> = Vec::new();
        for (k, &u) in topo.existing.iter().enumerate() {
            if topo.unit_zone[u] == n {
                units.push((instance.thermal[u].mc, false, k));
            }
        }
        for (k, &u) in topo.candidates.iter().enumerate() {
            if topo.unit_zone[u] == n {
                units.push((instance.thermal[u].mc, true, k));
            }
        }
        units.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut redispatched = 0.0;
        for (s, scenario) in scenarios.scenarios.iter().enumerate() {
            let stage = SecondStage::build(instance, scenario, &solution.lambda, &solution.plan)?;
            let x = &mut primals[s];
            for (t, h) in hours.iter().enumerate() {
                let mut need = base[s][n][t];
                for &(_, new, k) in &units {
                    if need <= 0.0 {
                        break;
                    }
                    let v = if new { stage.layout.p_new[k][t] } else { stage.layout.p[k][t] };
                    let give = (stage.lp.var(v).upper - x[v.0]).max(0.0).min(need);
                    x[v.0] += give;
                    need -= give;
                }
                redispatched += scenario.probability * h * (base[s][n][t] - need);
                base[s][n][t] = need;
            }
        }
        let ls_hat: Vec<Vec<f64>> = base.iter().map(|s| s[n].clone()).collect();
        let node = recover_node(&ls_hat, zone.eens_limit, scenarios, &instance.time_grid, options.lole);
        let mut remaining = node.x_new;
        let mut restored = Vec::new();
        let mut added = Vec::new();

        let mut retired: Vec<usize> = (0..topo.existing.len())
            .filter(|&k| topo.unit_zone[topo.existing[k]] == n && plan.retire[k] > 0.0)
            .collect();
        retired.sort_by(|a, b| {
            let fa = instance.thermal[topo.existing[*a]].fom;
            let fb = instance.thermal[topo.existing[*b]].fom;
            fa.total_cmp(&fb).then(a.cmp(b))
        });
        for k in retired {
            if remaining <= 0.0 {
                break;
            }
            let r = plan.retire[k].min(remaining);
            plan.retire[k] -= r;
            remaining -= r;
            restored.push((instance.thermal[topo.existing[k]].technology.clone(), r));
            sources[n].push((Source::Restore(k), r));
        }

        let mut peakers: Vec<usize> = (0..topo.candidates.len())
            .filter(|&k| topo.unit_zone[topo.candidates[k]] == n)
            .collect();
        peakers.sort_by(|a, b| {
            let ma = instance.thermal[topo.candidates[*a]].mc;
            let mb = instance.thermal[topo.candidates[*b]].mc;
            mb.total_cmp(&ma).then(a.cmp(b))
        });
        for k in peakers {
            if remaining <= 0.0 {
                break;
            }
            let room = (instance.thermal[topo.candidates[k]].cap_upper - plan.invest[k]).max(0.0);
            let a = room.min(remaining);
            if a <= 0.0 {
                continue;
            }
            plan.invest[k] += a;
            remaining -= a;
            added.push((instance.thermal[topo.candidates[k]].technology.clone(), a));
            sources[n].push((Source::Peaker(k), a));
        }
        if remaining > 1e-9 * node.x_new.max(1.0) {
            return Err(Error::RecoveryInfeasible {
                zone: zone.id.clone(),
                residual: remaining,
            });
        }
        for (s, rows) in ls_f.iter_mut().enumerate() {
            rows[n] = node.ls_f[s].clone();
        }
        repaired[n] = true;
        zones.push(ZoneRecovery {
            zone: zone.id.clone(),
            violation,
            redispatched,
            x_new: node.x_new,
            restored,
            added,
            rounds: node.rounds,
        });
    }

    let mut max_violation = 0.0f64;
    let mut operating = 0.0;
    for (s, scenario) in scenarios.scenarios.iter().enumerate() {
        let stage = SecondStage::build(instance, scenario, &solution.lambda, &plan)?;
        let lay = &stage.layout;
        let x = &mut primals[s];
        for n in 0..nz {
            if !repaired[n] {
                continue;
            }
            for t in 0..instance.num_blocks() {
                let hat = base[s][n][t];
                let mut delta = hat - ls_f[s][n][t];
                for (src, cap) in &sources[n] {
                    if delta <= 0.0 {
                        break;
                    }
                    let give = cap.min(delta);
                    let var = match src {
                        Source::Restore(k) => lay.p[*k][t],
                        Source::Peaker(k) => lay.p_new[*k][t],
                    };
                    x[var.0] += give;
                    delta -= give;
                }
                // anything left unallocated stays shed
                ls_f[s][n][t] += delta.max(0.0);
                x[lay.ls[n][t].0] = ls_f[s][n][t];
            }
        }
        max_violation = max_violation.max(stage.lp.max_violation(x));
        operating += scenario.probability * stage.operating_cost(x);
    }
    let eens = eens_by_zone(&ls_f, scenarios, &instance.time_grid);
    Ok(RecoveryResult {
        zones,
        ub: first_stage_cost(&plan, instance) + operating,
        plan,
        ls_f,
        primals,
        eens,
        max_violation,
    })
}

/// Investment plus expected operating cost of a repaired point; shedding
/// is not charged.
pub fn upper_bound(recovery: &RecoveryResult, instance: &SystemInstance, scenarios: &ScenarioSet) -> Result<f64> {
    let zero = vec![0.0; instance.zones.len()];
    let mut ub = first_stage_cost(&recovery.plan, instance);
    for (scenario, x) in scenarios.scenarios.iter().zip(&recovery.primals) {
        let stage = SecondStage::build(instance, scenario, &zero, &recovery.plan)?;
        ub += scenario.probability * stage.operating_cost(x);
    }
    Ok(ub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::Executor;
    use crate::inner::{solve_dual_function, InnerConfig};
    use crate::model::{Scenario, UnitKind};
    use crate::oracle::solve_extended_form;

    fn one_scenario(t: usize) -> (ScenarioSet, TimeGrid) {
        let s = Scenario {
            id: "s".into(),
            probability: 1.0,
            demand: vec![],
            pv: vec![],
            wind: vec![],
            inflows: vec![],
        };
        (ScenarioSet { scenarios: vec![s] }, TimeGrid::uniform(t, 1.0))
    }

    #[test]
    fn hand_trace_with_recomputed_lole() {
        let (sc, grid) = one_scenario(3);
        let r = recover_node(&[vec![10.0, 5.0, 0.0]], 3.0, &sc, &grid, LoleMode::Recompute);
        assert_eq!(r.x_new, 7.0);
        assert_eq!(r.ls_f, vec![vec![3.0, 0.0, 0.0]]);
        assert_eq!(r.rounds, 2);
    }

    #[test]
    fn fixed_lole_approaches_from_below() {
        let (sc, grid) = one_scenario(3);
        let fixed = recover_node(&[vec![10.0, 5.0, 0.0]], 3.0, &sc, &grid, LoleMode::Fixed);
        assert!(fixed.x_new <= 7.0 && fixed.x_new >= 7.0 - 1e-5, "{}", fixed.x_new);
        let eens: f64 = fixed.ls_f[0].iter().sum();
        assert!(eens <= 3.0 + EPS_DEFICIT);
    }

    #[test]
    fn zero_limit_is_peak_shaving() {
        let (sc, grid) = one_scenario(3);
        let r = recover_node(&[vec![10.0, 5.0, 0.0]], 0.0, &sc, &grid, LoleMode::Recompute);
        assert_eq!(r.x_new, 10.0);
        assert!(r.ls_f[0].iter().all(|l| *l == 0.0));
    }

    #[test]
    fn feasible_zone_is_untouched() {
        let (sc, grid) = one_scenario(3);
        let r = recover_node(&[vec![1.0, 1.0, 0.0]], 3.0, &sc, &grid, LoleMode::Recompute);
        assert_eq!(r.x_new, 0.0);
        assert_eq!(r.ls_f, vec![vec![1.0, 1.0, 0.0]]);
    }

    fn low_price_solution() -> (SystemInstance, ScenarioSet, DualFunctionSolution) {
        let (inst, sc) = crate::fixtures::toy2();
        let sol = solve_dual_function(&[50.0, 50.0], &inst, &sc, InnerConfig::default(), &Executor::new(1)).unwrap();
        (inst, sc, sol)
    }

    /// Runs every unit of `zone` at its bound so injected shedding cannot
    /// be served by redispatch.
    fn saturate(sol: &mut DualFunctionSolution, inst: &SystemInstance, sc: &ScenarioSet, zone: usize) {
        let topo = inst.topology().unwrap();
        for (s, scenario) in sc.scenarios.iter().enumerate() {
            let stage = SecondStage::build(inst, scenario, &sol.lambda, &sol.plan).unwrap();
            let lay = &stage.layout;
            let exist = topo.existing.iter().enumerate().map(|(k, &u)| (u, &lay.p[k]));
            let new = topo.candidates.iter().enumerate().map(|(k, &u)| (u, &lay.p_new[k]));
            for (u, vars) in exist.chain(new) {
                if topo.unit_zone[u] == zone {
                    for v in vars {
                        sol.primals[s][v.0] = stage.lp.var(*v).upper;
                    }
                }
            }
        }
    }

    #[test]
    fn idle_units_serve_economic_shedding() {
        let (inst, sc) = crate::fixtures::toy2();
        // zone B sheds instead of running coal at 25 EUR/MWh
        let sol = solve_dual_function(&[5000.0, 18.8], &inst, &sc, InnerConfig::default(), &Executor::new(1)).unwrap();
        assert!(sol.eens[1] > inst.zones[1].eens_limit);
        let rec = recover_all(&sol, &inst, &sc, RecoveryOptions::default()).unwrap();
        let z = rec.zones.iter().find(|z| z.zone == "B").unwrap();
        assert!(z.redispatched > 0.0, "{z:?}");
        assert!(rec.eens[1] <= inst.zones[1].eens_limit + 1e-6);
        assert!(rec.max_violation <= 1e-6, "violation {}", rec.max_violation);
    }

    #[test]
    fn toy2_recovery_is_feasible_and_bounds_oracle() {
        let (inst, sc, sol) = low_price_solution();
        let rec = recover_all(&sol, &inst, &sc, RecoveryOptions::default()).unwrap();
        for (n, z) in inst.zones.iter().enumerate() {
            assert!(rec.eens[n] <= z.eens_limit + 1e-6, "zone {} eens {}", z.id, rec.eens[n]);
        }
        assert!(rec.max_violation <= 1e-6, "violation {}", rec.max_violation);
        assert_eq!(rec.plan.bound_violation(&inst), 0.0);
        let oracle = solve_extended_form(&inst, &sc).unwrap();
        assert!(rec.ub >= oracle.cost * (1.0 - 1e-9));
        let again = upper_bound(&rec, &inst, &sc).unwrap();
        assert!((again - rec.ub).abs() <= 1e-9 * rec.ub);
    }

    #[test]
    fn restores_retirements_before_building() {
        let (inst, sc, mut sol) = low_price_solution();
        // one zone, one block, one scenario sheds; 5 MW retired at zone A
        let a = 0;
        let k_gas = 0;
        sol.plan.retire[k_gas] = 5.0;
        for s in &mut sol.shedding {
            for z in s.iter_mut() {
                z.iter_mut().for_each(|l| *l = 0.0);
            }
        }
        let h = inst.time_grid.block_duration[0];
        let limit = inst.zones[a].eens_limit;
        // 7 MW over one block of one of two equiprobable scenarios, on top of the limit
        sol.shedding[0][a][2] = 7.0 + 2.0 * limit / h;
        saturate(&mut sol, &inst, &sc, a);
        sol.eens = eens_by_zone(&sol.shedding, &sc, &inst.time_grid);
        let rec = recover_all(&sol, &inst, &sc, RecoveryOptions::default()).unwrap();
        let z = &rec.zones[0];
        assert!((z.x_new - 7.0).abs() < 1e-9, "{z:?}");
        assert_eq!(z.restored.len(), 1);
        assert!((z.restored[0].1 - 5.0).abs() < 1e-9);
        assert_eq!(z.added.len(), 1);
        assert_eq!(z.added[0].0, "peaker");
        assert!((z.added[0].1 - 2.0).abs() < 1e-9);
        assert_eq!(rec.plan.retire[k_gas], 0.0);
    }

    #[test]
    fn spare_peaker_costs_its_fixed_charge() {
        let (inst, sc, sol) = low_price_solution();
        let rec = recover_all(&sol, &inst, &sc, RecoveryOptions::default()).unwrap();
        let topo = inst.topology().unwrap();
        let k = topo
            .candidates
            .iter()
            .position(|&u| inst.thermal[u].technology == "peaker")
            .unwrap();
        let mut more = rec.clone();
        more.plan.invest[k] += 1.0;
        let unit = &inst.thermal[topo.candidates[k]];
        assert_eq!(unit.kind, UnitKind::Candidate);
        let diff = upper_bound(&more, &inst, &sc).unwrap() - upper_bound(&rec, &inst, &sc).unwrap();
        assert!((diff - (unit.ic + unit.fom)).abs() < 1e-6 * (unit.ic + unit.fom));
    }

    #[test]
    fn exhausted_bounds_are_reported() {
        let (mut inst, sc, sol) = low_price_solution();
        for u in &mut inst.thermal {
            if u.kind == UnitKind::Candidate {
                u.cap_upper = 0.0;
            }
        }
        let mut sol = sol;
        sol.plan = ExpansionPlan::zeros(&inst);
        for s in &mut sol.shedding {
            s[0].iter_mut().for_each(|l| *l = 0.0);
        }
        sol.shedding[0][1][3] = 50.0;
        saturate(&mut sol, &inst, &sc, 1);
        sol.eens = eens_by_zone(&sol.shedding, &sc, &inst.time_grid);
        match recover_all(&sol, &inst, &sc, RecoveryOptions::default()) {
            Err(Error::RecoveryInfeasible { zone, .. }) => assert_eq!(zone, "B"),
            other => panic!("expected infeasible recovery, got {other:?}"),
        }
    }
}
