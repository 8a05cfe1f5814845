//! Extended form: first stage, every scenario block and the EENS rows in one
//! LP. Ground truth for desk-scale instances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{LpBackend, LpProblem, LpSolution, LpStatus, RevisedSimplex, RowId, Sense, Tolerances, VarId};
use crate::model::{eens_by_zone, ExpansionPlan, ScenarioSet, Shedding, SystemInstance};
use crate::subproblem::{add_block, add_first_stage, Coupling, ScenarioLayout};

pub const DEFAULT_VAR_CAP: usize = 200_000;

#[derive(Debug, Clone, Serialize)]
pub struct OracleSolution {
    pub cost: f64,
    pub plan: ExpansionPlan,
    /// EENS prices, `-d cost / d EENS_n`.
    pub lambda: Vec<f64>,
    pub eens: Vec<f64>,
    #[serde(skip)]
    pub shedding: Shedding,
}

/// Optimum of the relaxed problem at fixed prices.
#[derive(Debug, Clone)]
pub struct RelaxedSolution {
    /// First-stage cost plus expected operating and shedding cost.
    pub value: f64,
    /// Dual function value: `value - sum_n lambda_n EENS_n`.
    pub g: f64,
    pub plan: ExpansionPlan,
    pub shedding: Shedding,
    pub eens: Vec<f64>,
}

/// What goes into an extended-form LP.
pub struct ExtendedSpec<'a> {
    /// Shedding prices per zone; zero for the constrained problem.
    pub lambda: &'a [f64],
    /// Add the EENS coupling rows.
    pub eens_rows: bool,
    /// Pin the first stage to this plan.
    pub fixed_plan: Option<&'a ExpansionPlan>,
    /// Drop the EENS rows of all zones but these (used for diagnosis).
    pub only_zones: Option<&'a [usize]>,
}

pub struct ExtendedForm {
    pub lp: LpProblem,
    pub invest: Vec<VarId>,
    pub retire: Vec<VarId>,
    pub layouts: Vec<ScenarioLayout>,
    /// One per zone when EENS rows were requested.
    pub eens_rows: Vec<Option<RowId>>,
}

pub fn build_extended(instance: &SystemInstance, scenarios: &ScenarioSet, form: &ExtendedSpec<'_>) -> Result<ExtendedForm> {
    let topo = instance.topology()?;
    instance.check_dimensions(scenarios)?;
    let mut lp = LpProblem::new();
    let (invest, retire) = add_first_stage(&mut lp, instance, &topo);
    if let Some(plan) = form.fixed_plan {
        for (v, x) in invest.iter().zip(&plan.invest).chain(retire.iter().zip(&plan.retire)) {
            let var = lp.var_mut(*v);
            var.lower = *x;
            var.upper = *x;
        }
    }
    let layouts: Vec<ScenarioLayout> = scenarios
        .scenarios
        .iter()
        .map(|s| {
            add_block(
                &mut lp,
                instance,
                &topo,
                s,
                form.lambda,
                s.probability,
                Coupling::Vars {
                    invest: &invest,
                    retire: &retire,
                },
            )
        })
        .collect();
    let hours = &instance.time_grid.block_duration;
    let mut eens_rows = vec![None; instance.zones.len()];
    if form.eens_rows {
        for (n, zone) in instance.zones.iter().enumerate() {
            if form.only_zones.is_some_and(|z| !z.contains(&n)) {
                continue;
            }
            let mut terms = Vec::new();
            for (s, lay) in scenarios.scenarios.iter().zip(&layouts) {
                for (t, v) in lay.ls[n].iter().enumerate() {
                    terms.push((*v, s.probability * hours[t]));
                }
            }
            eens_rows[n] = Some(lp.add_row(format!("eens[{}]", zone.id), terms, Sense::Le, zone.eens_limit));
        }
    }
    Ok(ExtendedForm {
        lp,
        invest,
        retire,
        layouts,
        eens_rows,
    })
}

fn guard(lp: &LpProblem, cap: usize) -> Result<()> {
    if lp.num_vars() > cap {
        return Err(Error::TooLarge {
            vars: lp.num_vars(),
            cap,
        });
    }
    Ok(())
}

impl ExtendedForm {
    fn plan(&self, sol: &LpSolution) -> ExpansionPlan {
        ExpansionPlan {
            invest: self.invest.iter().map(|v| sol.value(*v)).collect(),
            retire: self.retire.iter().map(|v| sol.value(*v)).collect(),
        }
    }

    fn shedding(&self, sol: &LpSolution) -> Shedding {
        self.layouts.iter().map(|l| l.shedding(&sol.primal)).collect()
    }
}

/// Minimum-cost plan subject to every zone's EENS limit.
pub fn solve_extended_form(instance: &SystemInstance, scenarios: &ScenarioSet) -> Result<OracleSolution> {
    solve_extended_form_with(instance, scenarios, None, DEFAULT_VAR_CAP)
}

/// As [`solve_extended_form`], optionally with the first stage pinned.
pub fn solve_extended_form_with(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    fixed_plan: Option<&ExpansionPlan>,
    var_cap: usize,
) -> Result<OracleSolution> {
    let zero = vec![0.0; instance.zones.len()];
    let ext = build_extended(
        instance,
        scenarios,
        &ExtendedSpec {
            lambda: &zero,
            eens_rows: true,
            fixed_plan,
            only_zones: None,
        },
    )?;
    guard(&ext.lp, var_cap)?;
    let mut backend = RevisedSimplex::new(Tolerances::default());
    let sol = backend.solve(&ext.lp, None);
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(diagnose(instance, scenarios, fixed_plan)),
        s => return Err(Error::Lp(s)),
    }
    let lambda = ext
        .eens_rows
        .iter()
        .map(|r| r.map_or(0.0, |r| (-sol.dual(r)).max(0.0)))
        .collect();
    let shedding = ext.shedding(&sol);
    Ok(OracleSolution {
        cost: sol.objective,
        plan: ext.plan(&sol),
        lambda,
        eens: eens_by_zone(&shedding, scenarios, &instance.time_grid),
        shedding,
    })
}

/// Names the first zone whose EENS row alone makes the problem infeasible.
fn diagnose(instance: &SystemInstance, scenarios: &ScenarioSet, fixed_plan: Option<&ExpansionPlan>) -> Error {
    let zero = vec![0.0; instance.zones.len()];
    for n in 0..instance.zones.len() {
        let only = [n];
        let Ok(ext) = build_extended(
            instance,
            scenarios,
            &ExtendedSpec {
                lambda: &zero,
                eens_rows: true,
                fixed_plan,
                only_zones: Some(&only),
            },
        ) else {
            break;
        };
        if RevisedSimplex::default().solve(&ext.lp, None).status == LpStatus::Infeasible {
            return Error::OracleInfeasible(format!(
                "zone {} cannot meet its EENS limit of {} MWh",
                instance.zones[n].id, instance.zones[n].eens_limit
            ));
        }
    }
    Error::OracleInfeasible("EENS limits are jointly unattainable".into())
}

/// Exact minimizer of the relaxed problem at `lambda`, hence the exact dual
/// function value.
pub fn solve_relaxed_extended(instance: &SystemInstance, scenarios: &ScenarioSet, lambda: &[f64]) -> Result<RelaxedSolution> {
    relaxed_with(instance, scenarios, lambda, None)
}

/// As [`solve_relaxed_extended`] with the first stage pinned to `plan`.
pub fn relaxed_at_plan(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    lambda: &[f64],
    plan: &ExpansionPlan,
) -> Result<RelaxedSolution> {
    relaxed_with(instance, scenarios, lambda, Some(plan))
}

fn relaxed_with(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    lambda: &[f64],
    fixed_plan: Option<&ExpansionPlan>,
) -> Result<RelaxedSolution> {
    if lambda.len() != instance.zones.len() {
        return Err(Error::Invalid(format!("{} prices for {} zones", lambda.len(), instance.zones.len())));
    }
    let ext = build_extended(
        instance,
        scenarios,
        &ExtendedSpec {
            lambda,
            eens_rows: false,
            fixed_plan,
            only_zones: None,
        },
    )?;
    guard(&ext.lp, DEFAULT_VAR_CAP)?;
    let sol = RevisedSimplex::default().solve(&ext.lp, None);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    let shedding = ext.shedding(&sol);
    let eens = eens_by_zone(&shedding, scenarios, &instance.time_grid);
    let constant: f64 = lambda.iter().zip(&instance.zones).map(|(l, z)| l * z.eens_limit).sum();
    Ok(RelaxedSolution {
        value: sol.objective,
        g: sol.objective - constant,
        plan: ext.plan(&sol),
        shedding,
        eens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn complementary_slackness_on_toy2() {
        let (inst, sc) = fixtures::toy2();
        let o = solve_extended_form(&inst, &sc).unwrap();
        for (n, z) in inst.zones.iter().enumerate() {
            assert!(o.eens[n] <= z.eens_limit + 1e-6);
            assert!((o.lambda[n] * (z.eens_limit - o.eens[n])).abs() <= 1e-6 * (1.0 + o.cost.abs()));
        }
    }

    #[test]
    fn tighter_limits_cost_more() {
        let (mut inst, sc) = fixtures::toy2();
        for z in &mut inst.zones {
            z.eens_limit = 10.0;
        }
        let loose = solve_extended_form(&inst, &sc).unwrap().cost;
        for z in &mut inst.zones {
            z.eens_limit = 0.0;
        }
        let tight = solve_extended_form(&inst, &sc).unwrap().cost;
        assert!(tight >= loose - 1e-6);
    }

    #[test]
    fn strong_duality_with_relaxation() {
        // at the oracle prices the relaxed optimum equals the constrained one
        let (inst, sc) = fixtures::toy2();
        let o = solve_extended_form(&inst, &sc).unwrap();
        let r = solve_relaxed_extended(&inst, &sc, &o.lambda).unwrap();
        assert!((r.g - o.cost).abs() <= 1e-6 * o.cost.abs(), "{} vs {}", r.g, o.cost);
    }

    #[test]
    fn unattainable_limit_names_zone() {
        let (mut inst, sc) = fixtures::toy2();
        for u in &mut inst.thermal {
            if u.kind == crate::model::UnitKind::Candidate && u.zone == "B" {
                u.cap_upper = 0.0;
            }
        }
        inst.zones[1].eens_limit = 0.0;
        inst.lines.clear();
        let err = solve_extended_form(&inst, &sc).unwrap_err().to_string();
        assert!(err.contains("zone B"), "{err}");
    }

    #[test]
    fn size_guard() {
        let (inst, sc) = fixtures::toy2();
        let err = solve_extended_form_with(&inst, &sc, None, 10).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
    }
}
