//! Per-scenario operating problem for a fixed first stage.
//!
//! The same block builder also assembles the wait-and-see problem and the
//! extended form; there the capacity links become rows against first-stage
//! variables instead of variable bounds.

use crate::error::{Error, Result};
use crate::lp::{Basis, LpBackend, LpProblem, LpSolution, LpStatus, RevisedSimplex, RowId, Sense, Tolerances, VarId};
use crate::model::{
    first_stage_cost, ExpansionPlan, HydroTech, OpenLoopBalance, Scenario, SystemInstance, Topology,
};

/// How a scenario block sees the first-stage decisions.
#[derive(Clone, Copy)]
pub(crate) enum Coupling<'a> {
    /// Plan fixed: capacities enter as variable bounds.
    Fixed(&'a ExpansionPlan),
    /// Plan free: `p_new - x_new <= 0` and `p + x <= P_max` rows.
    Vars { invest: &'a [VarId], retire: &'a [VarId] },
}

/// Variable and row handles of one assembled scenario block.
#[derive(Debug, Clone)]
pub struct ScenarioLayout {
    /// `[existing unit][t]`
    pub p: Vec<Vec<VarId>>,
    /// `[candidate unit][t]`
    pub p_new: Vec<Vec<VarId>>,
    /// `[zone][t]`
    pub ls: Vec<Vec<VarId>>,
    pub curtail: Vec<Vec<Option<VarId>>>,
    /// `[line][t]`, flow from `from_zone` to `to_zone` split by direction.
    pub flow_fwd: Vec<Vec<VarId>>,
    pub flow_back: Vec<Vec<VarId>>,
    /// `[battery][t]`
    pub bc: Vec<Vec<VarId>>,
    pub bd: Vec<Vec<VarId>>,
    pub bv: Vec<Vec<VarId>>,
    /// `[hydro unit][t]`, absent where the technology has no such variable.
    pub q: Vec<Vec<VarId>>,
    pub spill: Vec<Vec<Option<VarId>>>,
    pub pump: Vec<Vec<Option<VarId>>>,
    pub v_head: Vec<Vec<Option<VarId>>>,
    pub v_tail: Vec<Vec<Option<VarId>>>,
    /// `[zone][t]`
    pub balance: Vec<Vec<RowId>>,
    /// Capacity rows, present only for [`Coupling::Vars`]: `[unit][t]`.
    pub link_new: Vec<Vec<RowId>>,
    pub link_exist: Vec<Vec<RowId>>,
}

impl ScenarioLayout {
    /// Shedding `[zone][t]` read from a primal vector.
    pub fn shedding(&self, primal: &[f64]) -> Vec<Vec<f64>> {
        self.ls
            .iter()
            .map(|z| z.iter().map(|v| primal[v.0].max(0.0)).collect())
            .collect()
    }
}

/// Appends one scenario block. Operating costs are scaled by `weight`;
/// shedding in zone n costs `weight * lambda[n]` per MWh.
pub(crate) fn add_block(
    lp: &mut LpProblem,
    instance: &SystemInstance,
    topo: &Topology,
    scenario: &Scenario,
    lambda: &[f64],
    weight: f64,
    coupling: Coupling<'_>,
) -> ScenarioLayout {
    let tn = instance.num_blocks();
    let hours = &instance.time_grid.block_duration;
    let nz = instance.zones.len();
    let opts = &instance.options;
    let frac = opts.initial_storage_fraction;
    let tag = &scenario.id;

    let mut lay = ScenarioLayout {
        p: vec![],
        p_new: vec![],
        ls: vec![],
        curtail: vec![],
        flow_fwd: vec![],
        flow_back: vec![],
        bc: vec![],
        bd: vec![],
        bv: vec![],
        q: vec![],
        spill: vec![],
        pump: vec![],
        v_head: vec![],
        v_tail: vec![],
        balance: vec![],
        link_new: vec![],
        link_exist: vec![],
    };

    // supply side contributions to each (zone, t) balance
    let mut bal: Vec<Vec<Vec<(VarId, f64)>>> = vec![vec![Vec::new(); tn]; nz];

    for (k, &u) in topo.existing.iter().enumerate() {
        let unit = &instance.thermal[u];
        let z = topo.unit_zone[u];
        let mut vars = Vec::with_capacity(tn);
        for t in 0..tn {
            let upper = match coupling {
                Coupling::Fixed(plan) => fixed_upper(unit.p_max[t], unit.p_min[t], plan.retire[k]),
                Coupling::Vars { .. } => unit.p_max[t],
            };
            let v = lp.add_var(
                format!("p[{tag},{},{},{t}]", unit.zone, unit.technology),
                unit.p_min[t],
                upper,
                weight * hours[t] * unit.mc,
            );
            bal[z][t].push((v, 1.0));
            vars.push(v);
        }
        if let Coupling::Vars { retire, .. } = coupling {
            let rows = (0..tn)
                .map(|t| {
                    lp.add_row(
                        format!("cap_exist[{tag},{},{},{t}]", unit.zone, unit.technology),
                        vec![(vars[t], 1.0), (retire[k], 1.0)],
                        Sense::Le,
                        unit.p_max[t],
                    )
                })
                .collect();
            lay.link_exist.push(rows);
        }
        lay.p.push(vars);
    }

    for (k, &u) in topo.candidates.iter().enumerate() {
        let unit = &instance.thermal[u];
        let z = topo.unit_zone[u];
        let upper = match coupling {
            Coupling::Fixed(plan) => plan.invest[k].max(0.0),
            Coupling::Vars { .. } => f64::INFINITY,
        };
        let mut vars = Vec::with_capacity(tn);
        for t in 0..tn {
            let v = lp.add_var(
                format!("p_new[{tag},{},{},{t}]", unit.zone, unit.technology),
                0.0,
                upper,
                weight * hours[t] * unit.mc,
            );
            bal[z][t].push((v, 1.0));
            vars.push(v);
        }
        if let Coupling::Vars { invest, .. } = coupling {
            let rows = (0..tn)
                .map(|t| {
                    lp.add_row(
                        format!("cap_new[{tag},{},{},{t}]", unit.zone, unit.technology),
                        vec![(vars[t], 1.0), (invest[k], -1.0)],
                        Sense::Le,
                        0.0,
                    )
                })
                .collect();
            lay.link_new.push(rows);
        }
        lay.p_new.push(vars);
    }

    for (n, zone) in instance.zones.iter().enumerate() {
        let vars = (0..tn)
            .map(|t| {
                let v = lp.add_var(
                    format!("ls[{tag},{},{t}]", zone.id),
                    0.0,
                    scenario.demand[n][t],
                    weight * lambda[n] * hours[t],
                );
                bal[n][t].push((v, 1.0));
                v
            })
            .collect();
        lay.ls.push(vars);
    }

    for (l, line) in instance.lines.iter().enumerate() {
        let (from, to) = topo.line_ends[l];
        let mut fwd = Vec::with_capacity(tn);
        let mut back = Vec::with_capacity(tn);
        for t in 0..tn {
            let name = format!("{tag},{}-{},{t}", line.from_zone, line.to_zone);
            let f = lp.add_var(format!("f_fwd[{name}]"), 0.0, line.l_max.max(0.0), weight * hours[t] * line.wc);
            let b = lp.add_var(format!("f_back[{name}]"), 0.0, (-line.l_min).max(0.0), weight * hours[t] * line.wc);
            bal[to][t].push((f, 1.0));
            bal[to][t].push((b, -1.0));
            bal[from][t].push((f, -1.0));
            bal[from][t].push((b, 1.0));
            fwd.push(f);
            back.push(b);
        }
        lay.flow_fwd.push(fwd);
        lay.flow_back.push(back);
    }

    for (i, b) in instance.batteries.iter().enumerate() {
        let z = topo.battery_zone[i];
        let (mut vc, mut vd, mut vv) = (vec![], vec![], vec![]);
        for t in 0..tn {
            let c = lp.add_var(format!("bc[{tag},{},{t}]", b.zone), 0.0, b.bc, 0.0);
            let d = lp.add_var(format!("bd[{tag},{},{t}]", b.zone), 0.0, b.bd, 0.0);
            let lower = if t + 1 == tn { frac * b.bv } else { 0.0 };
            let v = lp.add_var(format!("bv[{tag},{},{t}]", b.zone), lower, b.bv, 0.0);
            bal[z][t].push((d, 1.0));
            bal[z][t].push((c, -1.0));
            let mut terms = vec![(v, 1.0), (c, -hours[t] * b.bce), (d, hours[t] * b.bde)];
            let rhs = if t == 0 {
                frac * b.bv
            } else {
                terms.push((vv[t - 1], -1.0));
                0.0
            };
            lp.add_row(format!("battery[{tag},{},{t}]", b.zone), terms, Sense::Eq, rhs);
            vc.push(c);
            vd.push(d);
            vv.push(v);
        }
        lay.bc.push(vc);
        lay.bd.push(vd);
        lay.bv.push(vv);
    }

    let mut ror = vec![vec![0.0; tn]; nz];
    for (h, unit) in instance.hydro.iter().enumerate() {
        let z = topo.hydro_zone[h];
        let inflow = &scenario.inflows[h];
        let code = unit.technology.code();
        let name = |what: &str, t: usize| format!("{what}[{tag},{},{code},{t}]", unit.zone);
        let vmax = unit.v.unwrap_or(0.0);
        let qmax = unit.q.unwrap_or(0.0);
        let dmax = unit.d.unwrap_or(0.0);
        let (mut qs, mut ss, mut ds, mut hs, mut ts) = (vec![], vec![], vec![], vec![], vec![]);
        for t in 0..tn {
            let dt = hours[t];
            let last = t + 1 == tn;
            match unit.technology {
                HydroTech::R => {
                    let q = lp.add_var(name("q", t), inflow[t], inflow[t], 0.0);
                    bal[z][t].push((q, 1.0));
                    ror[z][t] += inflow[t];
                    qs.push(q);
                    ss.push(None);
                    ds.push(None);
                    hs.push(None);
                    ts.push(None);
                }
                HydroTech::S => {
                    let q = lp.add_var(name("q", t), 0.0, qmax, 0.0);
                    let s = lp.add_var(name("s", t), 0.0, f64::INFINITY, weight * dt * unit.sc);
                    let v = lp.add_var(name("v", t), if last { frac * vmax } else { 0.0 }, vmax, 0.0);
                    bal[z][t].push((q, 1.0));
                    let mut terms = vec![(v, 1.0), (q, dt), (s, dt)];
                    let mut rhs = dt * inflow[t];
                    match hs.last() {
                        Some(&Some(prev)) => terms.push((prev, -1.0)),
                        _ => rhs += frac * vmax,
                    }
                    lp.add_row(name("reservoir", t), terms, Sense::Eq, rhs);
                    qs.push(q);
                    ss.push(Some(s));
                    ds.push(None);
                    hs.push(Some(v));
                    ts.push(None);
                }
                HydroTech::O | HydroTech::C => {
                    let open = unit.technology == HydroTech::O;
                    let a = if open { inflow[t] } else { 0.0 };
                    let s_cap = if open && opts.open_loop_spill_cap { dmax } else { f64::INFINITY };
                    let q = lp.add_var(name("q", t), 0.0, qmax, 0.0);
                    let s = lp.add_var(name("s", t), 0.0, s_cap, weight * dt * unit.sc);
                    let d = lp.add_var(name("d", t), 0.0, dmax, 0.0);
                    let vh = lp.add_var(name("v_head", t), if last { frac * vmax } else { 0.0 }, vmax, 0.0);
                    bal[z][t].push((q, 1.0));
                    bal[z][t].push((d, -1.0));

                    let mut head = vec![(vh, 1.0), (d, -dt * unit.pe), (q, dt), (s, dt)];
                    let mut head_rhs = dt * a;
                    match hs.last() {
                        Some(&Some(prev)) => head.push((prev, -1.0)),
                        _ => head_rhs += frac * vmax,
                    }
                    lp.add_row(name("head", t), head, Sense::Eq, head_rhs);

                    let as_written = open && opts.open_loop_balance == OpenLoopBalance::AsWritten;
                    let level = if as_written {
                        None
                    } else {
                        Some(lp.add_var(
                            name("v_tail", t),
                            if last { frac * vmax } else { 0.0 },
                            f64::INFINITY,
                            0.0,
                        ))
                    };
                    // second balance: on the tail level, or on the head level again
                    let target = level.unwrap_or(vh);
                    let prev = if as_written { hs.last() } else { ts.last() };
                    let mut tail = vec![(target, 1.0), (d, dt * unit.pe), (q, -dt)];
                    let mut tail_rhs = 0.0;
                    match prev {
                        Some(&Some(p)) => tail.push((p, -1.0)),
                        _ => tail_rhs += frac * vmax,
                    }
                    lp.add_row(name("tail", t), tail, Sense::Eq, tail_rhs);

                    qs.push(q);
                    ss.push(Some(s));
                    ds.push(Some(d));
                    hs.push(Some(vh));
                    ts.push(level);
                }
            }
        }
        lay.q.push(qs);
        lay.spill.push(ss);
        lay.pump.push(ds);
        lay.v_head.push(hs);
        lay.v_tail.push(ts);
    }

    for (n, zone) in instance.zones.iter().enumerate() {
        let mut curt = Vec::with_capacity(tn);
        let mut rows = Vec::with_capacity(tn);
        for t in 0..tn {
            let renewable = scenario.pv[n][t] + scenario.wind[n][t];
            let cap = renewable + ror[n][t];
            let cu = if opts.renewable_curtailment && cap > 0.0 {
                let v = lp.add_var(format!("curtail[{tag},{},{t}]", zone.id), 0.0, cap, 0.0);
                bal[n][t].push((v, -1.0));
                Some(v)
            } else {
                None
            };
            curt.push(cu);
            let terms = std::mem::take(&mut bal[n][t]);
            rows.push(lp.add_row(
                format!("balance[{tag},{},{t}]", zone.id),
                terms,
                Sense::Eq,
                scenario.demand[n][t] - renewable,
            ));
        }
        lay.curtail.push(curt);
        lay.balance.push(rows);
    }

    lay
}

fn fixed_upper(p_max: f64, p_min: f64, retire: f64) -> f64 {
    let u = p_max - retire;
    // absorb rounding when the plan sits exactly on the retirement limit
    if u < p_min && u > p_min - 1e-9 {
        p_min
    } else {
        u
    }
}

/// Value, capacity sensitivities and operations of one scenario at a fixed
/// plan.
#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub value: f64,
    /// `dV/dx_new` per candidate unit, summed over blocks. Nonpositive.
    pub mu_new: Vec<f64>,
    /// `dV/dx_retire` per existing unit, summed over blocks. Nonnegative.
    pub mu_exist: Vec<f64>,
    /// `[zone][t]`, MW.
    pub shedding: Vec<Vec<f64>>,
    /// Duals of the load balance rows, `[zone][t]`, EUR/MW per block.
    pub balance_duals: Vec<Vec<f64>>,
    /// Full primal point, indexed like the stage's LP variables.
    pub primal: Vec<f64>,
    pub basis: Option<Basis>,
}

/// A scenario's second-stage LP, kept assembled so the plan and prices can
/// be changed in place between solves.
#[derive(Debug, Clone)]
pub struct SecondStage {
    pub lp: LpProblem,
    pub layout: ScenarioLayout,
    pub scenario_id: String,
    lambda: Vec<f64>,
    hours: Vec<f64>,
    p_max: Vec<Vec<f64>>,
    p_min: Vec<Vec<f64>>,
}

/// Assembles the operating LP of `scenario` for a fixed `plan` with
/// shedding priced at `lambda`.
pub fn build_second_stage(
    plan: &ExpansionPlan,
    scenario: &Scenario,
    lambda: &[f64],
    instance: &SystemInstance,
) -> Result<SecondStage> {
    SecondStage::build(instance, scenario, lambda, plan)
}

impl SecondStage {
    pub fn build(instance: &SystemInstance, scenario: &Scenario, lambda: &[f64], plan: &ExpansionPlan) -> Result<Self> {
        let topo = instance.topology()?;
        check_shapes(instance, &topo, scenario, lambda, plan)?;
        let mut lp = LpProblem::new();
        let layout = add_block(&mut lp, instance, &topo, scenario, lambda, 1.0, Coupling::Fixed(plan));
        Ok(Self {
            lp,
            layout,
            scenario_id: scenario.id.clone(),
            lambda: lambda.to_vec(),
            hours: instance.time_grid.block_duration.clone(),
            p_max: topo.existing.iter().map(|&u| instance.thermal[u].p_max.clone()).collect(),
            p_min: topo.existing.iter().map(|&u| instance.thermal[u].p_min.clone()).collect(),
        })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Moves the capacity bounds to `plan`.
    pub fn set_plan(&mut self, plan: &ExpansionPlan) {
        for (k, vars) in self.layout.p_new.iter().enumerate() {
            for v in vars {
                self.lp.var_mut(*v).upper = plan.invest[k].max(0.0);
            }
        }
        for (k, vars) in self.layout.p.iter().enumerate() {
            for (t, v) in vars.iter().enumerate() {
                self.lp.var_mut(*v).upper = fixed_upper(self.p_max[k][t], self.p_min[k][t], plan.retire[k]);
            }
        }
    }

    /// Reprices shedding.
    pub fn set_lambda(&mut self, lambda: &[f64]) {
        for (n, vars) in self.layout.ls.iter().enumerate() {
            for (t, v) in vars.iter().enumerate() {
                self.lp.var_mut(*v).cost = lambda[n] * self.hours[t];
            }
        }
        self.lambda = lambda.to_vec();
    }

    /// Solves at the current plan and extracts the sensitivities.
    pub fn evaluate(&self, backend: &mut dyn LpBackend, warm: Option<&Basis>) -> Result<SubproblemResult> {
        let sol = backend.solve(&self.lp, warm);
        self.extract(sol)
    }

    fn extract(&self, sol: LpSolution) -> Result<SubproblemResult> {
        if sol.status != LpStatus::Optimal {
            return Err(Error::Subproblem {
                scenario: self.scenario_id.clone(),
                status: sol.status,
            });
        }
        // reduced cost of a bounded variable = derivative w.r.t. its upper
        // bound when negative; basic or lower-bound variables contribute 0
        let upper_sens = |v: &VarId| sol.reduced_cost(*v).min(0.0);
        let mu_new = self.layout.p_new.iter().map(|vars| vars.iter().map(upper_sens).sum()).collect();
        let mu_exist = self
            .layout
            .p
            .iter()
            .map(|vars| -vars.iter().map(upper_sens).sum::<f64>())
            .collect();
        Ok(SubproblemResult {
            value: sol.objective,
            mu_new,
            mu_exist,
            shedding: self.layout.shedding(&sol.primal),
            balance_duals: self
                .layout
                .balance
                .iter()
                .map(|rows| rows.iter().map(|r| sol.dual(*r)).collect())
                .collect(),
            primal: sol.primal,
            basis: sol.basis,
        })
    }

    /// Operating cost of `primal` without the shedding term.
    pub fn operating_cost(&self, primal: &[f64]) -> f64 {
        let mut c = self.lp.objective_at(primal);
        for vars in &self.layout.ls {
            for v in vars {
                c -= self.lp.var(*v).cost * primal[v.0];
            }
        }
        c
    }
}

fn check_shapes(
    instance: &SystemInstance,
    topo: &Topology,
    scenario: &Scenario,
    lambda: &[f64],
    plan: &ExpansionPlan,
) -> Result<()> {
    let tn = instance.num_blocks();
    let nz = instance.zones.len();
    let shaped = |s: &Vec<Vec<f64>>, rows: usize| s.len() == rows && s.iter().all(|r| r.len() == tn);
    if !(shaped(&scenario.demand, nz)
        && shaped(&scenario.pv, nz)
        && shaped(&scenario.wind, nz)
        && shaped(&scenario.inflows, instance.hydro.len()))
    {
        return Err(Error::Invalid(format!("scenario {}: series dimensions do not match the instance", scenario.id)));
    }
    if lambda.len() != nz {
        return Err(Error::Invalid(format!("{} prices given for {nz} zones", lambda.len())));
    }
    if plan.invest.len() != topo.candidates.len() || plan.retire.len() != topo.existing.len() {
        return Err(Error::Invalid("plan does not match the instance's units".into()));
    }
    for &u in &topo.existing {
        let unit = &instance.thermal[u];
        if unit.p_max.len() != tn || unit.p_min.len() != tn {
            return Err(Error::Invalid(format!("unit {}/{}: p_max/p_min length", unit.zone, unit.technology)));
        }
    }
    Ok(())
}

/// One-off evaluation with a fresh solver.
pub fn evaluate(
    plan: &ExpansionPlan,
    scenario: &Scenario,
    lambda: &[f64],
    instance: &SystemInstance,
) -> Result<SubproblemResult> {
    let stage = SecondStage::build(instance, scenario, lambda, plan)?;
    stage.evaluate(&mut RevisedSimplex::new(Tolerances::default()), None)
}

/// Single-scenario problem with the first stage free.
#[derive(Debug, Clone)]
pub struct WaitAndSee {
    pub value: f64,
    pub plan: ExpansionPlan,
}

/// Builds the single-scenario relaxed problem with first-stage variables:
/// the LP plus the plan variable handles.
pub(crate) fn build_wait_and_see(
    instance: &SystemInstance,
    scenario: &Scenario,
    lambda: &[f64],
) -> Result<(LpProblem, Vec<VarId>, Vec<VarId>)> {
    let topo = instance.topology()?;
    check_shapes(instance, &topo, scenario, lambda, &ExpansionPlan::zeros(instance))?;
    let mut lp = LpProblem::new();
    let (invest, retire) = add_first_stage(&mut lp, instance, &topo);
    add_block(
        &mut lp,
        instance,
        &topo,
        scenario,
        lambda,
        1.0,
        Coupling::Vars {
            invest: &invest,
            retire: &retire,
        },
    );
    Ok((lp, invest, retire))
}

pub fn wait_and_see_value(scenario: &Scenario, lambda: &[f64], instance: &SystemInstance) -> Result<WaitAndSee> {
    wait_and_see_with(scenario, lambda, instance, &mut RevisedSimplex::new(Tolerances::default()))
}

pub fn wait_and_see_with(
    scenario: &Scenario,
    lambda: &[f64],
    instance: &SystemInstance,
    backend: &mut dyn LpBackend,
) -> Result<WaitAndSee> {
    let (lp, invest, retire) = build_wait_and_see(instance, scenario, lambda)?;
    let sol = backend.solve(&lp, None);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Subproblem {
            scenario: scenario.id.clone(),
            status: sol.status,
        });
    }
    let plan = ExpansionPlan {
        invest: invest.iter().map(|v| sol.value(*v)).collect(),
        retire: retire.iter().map(|v| sol.value(*v)).collect(),
    };
    debug_assert!((first_stage_cost(&plan, instance) - first_stage_part(&lp, &invest, &retire, &sol)).abs() < 1e-6);
    Ok(WaitAndSee {
        value: sol.objective,
        plan,
    })
}

fn first_stage_part(lp: &LpProblem, invest: &[VarId], retire: &[VarId], sol: &LpSolution) -> f64 {
    invest.iter().chain(retire).map(|v| lp.var(*v).cost * sol.value(*v)).sum()
}

/// First-stage variables with their cost: `(IC + FOM)` per new MW and
/// `-FOM` per retired MW.
pub(crate) fn add_first_stage(lp: &mut LpProblem, instance: &SystemInstance, topo: &Topology) -> (Vec<VarId>, Vec<VarId>) {
    let invest = topo
        .candidates
        .iter()
        .map(|&u| {
            let unit = &instance.thermal[u];
            lp.add_var(
                format!("x_new[{},{}]", unit.zone, unit.technology),
                0.0,
                unit.cap_upper,
                unit.ic + unit.fom,
            )
        })
        .collect();
    let retire = topo
        .existing
        .iter()
        .map(|&u| {
            let unit = &instance.thermal[u];
            lp.add_var(format!("x_ret[{},{}]", unit.zone, unit.technology), 0.0, unit.cap_upper, -unit.fom)
        })
        .collect();
    (invest, retire)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelOptions, ScenarioSet, ThermalUnit, TimeGrid, UnitKind, Zone};

    pub(crate) fn single_zone(blocks: usize, existing_max: f64, demand: f64) -> (SystemInstance, ScenarioSet) {
        let inst = SystemInstance {
            time_grid: TimeGrid::uniform(blocks, 1.0),
            zones: vec![Zone {
                id: "A".into(),
                eens_limit: 0.0,
            }],
            thermal: vec![
                ThermalUnit {
                    zone: "A".into(),
                    technology: "base".into(),
                    kind: UnitKind::Existing,
                    ic: 0.0,
                    fom: 1000.0,
                    mc: 30.0,
                    cap_upper: 0.0,
                    p_max: vec![existing_max; blocks],
                    p_min: vec![0.0; blocks],
                },
                ThermalUnit {
                    zone: "A".into(),
                    technology: "peaker".into(),
                    kind: UnitKind::Candidate,
                    ic: 100.0,
                    fom: 10.0,
                    mc: 150.0,
                    cap_upper: 100.0,
                    p_max: vec![],
                    p_min: vec![],
                },
            ],
            lines: vec![],
            batteries: vec![],
            hydro: vec![],
            options: ModelOptions::default(),
        };
        let mut s = Scenario::empty("only", 1.0, &inst);
        s.demand[0] = vec![demand; blocks];
        (inst, ScenarioSet { scenarios: vec![s] })
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let (inst, mut sc) = crate::fixtures::toy2();
        let s = &mut sc.scenarios[0];
        for z in s.demand.iter_mut().chain(s.pv.iter_mut()).chain(s.wind.iter_mut()).chain(s.inflows.iter_mut()) {
            z.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut inst = inst;
        for u in &mut inst.thermal {
            u.p_min.iter_mut().for_each(|v| *v = 0.0);
        }
        inst.options.initial_storage_fraction = 0.0;
        let r = evaluate(&ExpansionPlan::zeros(&inst), &sc.scenarios[0], &[50.0, 50.0], &inst).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.primal.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn one_unit_dispatch_cost() {
        let (inst, sc) = single_zone(2, 100.0, 50.0);
        let r = evaluate(&ExpansionPlan::zeros(&inst), &sc.scenarios[0], &[1000.0], &inst).unwrap();
        assert!((r.value - 3000.0).abs() < 1e-9);
        assert!(r.shedding[0].iter().all(|x| *x == 0.0));
        assert_eq!(r.mu_new, vec![0.0]);
        assert_eq!(r.mu_exist, vec![0.0]);
    }

    #[test]
    fn binding_peaker_sensitivity() {
        // existing unit covers 50 of 60 MW; a 5 MW peaker binds every block
        let (inst, sc) = single_zone(3, 50.0, 60.0);
        let plan = ExpansionPlan {
            invest: vec![5.0],
            retire: vec![0.0],
        };
        let r = evaluate(&plan, &sc.scenarios[0], &[1000.0], &inst).unwrap();
        assert!((r.mu_new[0] + 2550.0).abs() < 1e-9, "{:?}", r.mu_new);
        let h = 1e-4;
        let up = ExpansionPlan {
            invest: vec![5.0 + h],
            retire: vec![0.0],
        };
        let v_up = evaluate(&up, &sc.scenarios[0], &[1000.0], &inst).unwrap().value;
        assert!(((v_up - r.value) / h + 2550.0).abs() < 1e-6);
    }

    #[test]
    fn retirement_sensitivity_is_nonnegative() {
        let (mut inst, sc) = single_zone(3, 50.0, 60.0);
        inst.thermal[0].cap_upper = 10.0;
        let plan = ExpansionPlan {
            invest: vec![0.0],
            retire: vec![4.0],
        };
        let r = evaluate(&plan, &sc.scenarios[0], &[1000.0], &inst).unwrap();
        // one more retired MW is replaced by shedding at 1000 instead of 30
        assert!((r.mu_exist[0] - 3.0 * 970.0).abs() < 1e-9, "{:?}", r.mu_exist);
    }

    #[test]
    fn shedding_never_exceeds_demand() {
        let (inst, sc) = crate::fixtures::toy2();
        let plan = ExpansionPlan::zeros(&inst);
        for s in &sc.scenarios {
            let r = evaluate(&plan, s, &[1e5, 1e5], &inst).unwrap();
            for (n, z) in r.shedding.iter().enumerate() {
                for (t, l) in z.iter().enumerate() {
                    assert!(*l <= s.demand[n][t] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn closed_loop_conserves_water_up_to_spill() {
        let (inst, sc) = crate::fixtures::random_instance(3, crate::fixtures::RandomSpec::default());
        let r = evaluate(&ExpansionPlan::zeros(&inst), &sc.scenarios[0], &[500.0; 3], &inst).unwrap();
        let stage = SecondStage::build(&inst, &sc.scenarios[0], &[500.0; 3], &ExpansionPlan::zeros(&inst)).unwrap();
        let h = inst.hydro.iter().position(|h| h.technology == HydroTech::C).unwrap();
        let lay = &stage.layout;
        let v0 = inst.options.initial_storage_fraction * inst.hydro[h].v.unwrap();
        let mut prev = 2.0 * v0;
        for t in 0..inst.num_blocks() {
            let head = r.primal[lay.v_head[h][t].unwrap().0];
            let tail = r.primal[lay.v_tail[h][t].unwrap().0];
            let spill = r.primal[lay.spill[h][t].unwrap().0];
            let dt = inst.time_grid.block_duration[t];
            assert!((head + tail - (prev - dt * spill)).abs() < 1e-6 * (1.0 + prev));
            prev = head + tail;
        }
    }

    #[test]
    fn set_plan_matches_fresh_build() {
        let (inst, sc) = crate::fixtures::toy2();
        let zero = ExpansionPlan::zeros(&inst);
        let plan = ExpansionPlan {
            invest: vec![10.0, 5.0, 3.0],
            retire: vec![4.0, 2.0],
        };
        let mut stage = SecondStage::build(&inst, &sc.scenarios[1], &[300.0, 300.0], &zero).unwrap();
        let mut backend = RevisedSimplex::new(Tolerances::default());
        let cold = stage.evaluate(&mut backend, None).unwrap();
        stage.set_plan(&plan);
        let warm = stage.evaluate(&mut backend, cold.basis.as_ref()).unwrap();
        let fresh = evaluate(&plan, &sc.scenarios[1], &[300.0, 300.0], &inst).unwrap();
        assert!((warm.value - fresh.value).abs() < 1e-7 * fresh.value.abs());
    }

    #[test]
    fn wait_and_see_of_zero_demand_is_zero() {
        let (mut inst, mut sc) = crate::fixtures::toy2();
        for u in &mut inst.thermal {
            u.p_min.iter_mut().for_each(|v| *v = 0.0);
            if u.kind == UnitKind::Existing {
                u.cap_upper = 0.0;
            }
        }
        inst.options.initial_storage_fraction = 0.0;
        let s = &mut sc.scenarios[0];
        for z in s.demand.iter_mut().chain(s.inflows.iter_mut()) {
            z.iter_mut().for_each(|v| *v = 0.0);
        }
        let ws = wait_and_see_value(&sc.scenarios[0], &[50.0, 50.0], &inst).unwrap();
        assert!(ws.value.abs() < 1e-9);
        assert!(ws.plan.invest.iter().all(|x| *x == 0.0));
    }
}
