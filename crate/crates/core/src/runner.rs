//! Run configuration, input ingestion and artifact emission.
//!
//! A run writes five files into the output directory:
//!
//! - `bounds_trace.csv`: `k,lower,upper,gap,alpha,rho_norm` per outer iterate
//! - `lambda_trace.csv`: `k,zone,lambda` per outer iterate and zone
//! - `final_plan.json`: the first-stage decisions behind the reported cost
//! - `recovery_log.jsonl`: one feasibility-recovery record per outer iterate
//! - `summary.json`: costs, bounds and per-zone prices
//!
//! Nothing written depends on the worker count or the wall clock.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::Executor;
use crate::inner::{estimate_target, InnerConfig};
use crate::model::{
    first_stage_cost, load_instance, load_scenarios, validate_instance, ExpansionPlan, ScenarioSet, SystemInstance,
};
use crate::oracle::solve_extended_form;
use crate::outer::{self, OuterConfig, OuterResult, TrueCostSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Price loop to the gap target.
    Full,
    /// One dual-function solve plus recovery at a uniform price.
    FixedLambda,
    /// Extended-form LP.
    Oracle,
    /// Per-scenario optima at the starting prices.
    WaitAndSee,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EensCase {
    /// Limits as given in the instance.
    Explicit,
    Zero,
    /// This fraction of each zone's minimum annual demand over scenarios.
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub instance: PathBuf,
    pub scenarios: PathBuf,
    pub mode: Mode,
    pub lambda0: f64,
    /// Required in fixed-lambda mode.
    pub fixed_lambda: Option<f64>,
    pub gap_target: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub inner_tol: f64,
    pub workers: usize,
    /// Reserved for sampled diagnostics; no mode draws random numbers.
    pub seed: u64,
    pub out: PathBuf,
    pub eens_case: EensCase,
}

impl RunConfig {
    /// Defaults for everything but the paths.
    pub fn new(instance: impl Into<PathBuf>, scenarios: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        let outer = OuterConfig::default();
        Self {
            instance: instance.into(),
            scenarios: scenarios.into(),
            mode: Mode::Full,
            lambda0: outer.lambda0,
            fixed_lambda: None,
            gap_target: outer.gap_target,
            max_outer: outer.max_outer,
            max_inner: outer.inner.max_iters,
            inner_tol: outer.inner.tol,
            workers: 1,
            seed: 0,
            out: out.into(),
            eens_case: EensCase::Explicit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Invalid(format!("config: {what}")));
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return bad("lambda0 must be finite and nonnegative");
        }
        if !(self.gap_target > 0.0) {
            return bad("gap target must be positive");
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration caps must be positive");
        }
        if !(self.inner_tol > 0.0) {
            return bad("inner tolerance must be positive");
        }
        if self.workers == 0 {
            return bad("worker count must be positive");
        }
        match (self.mode, self.fixed_lambda) {
            (Mode::FixedLambda, None) => return bad("fixed-lambda mode needs a price"),
            (_, Some(l)) if !(l >= 0.0 && l.is_finite()) => return bad("fixed price must be finite and nonnegative"),
            _ => {}
        }
        if let EensCase::Fraction(p) = self.eens_case {
            if !(p >= 0.0 && p.is_finite()) {
                return bad("EENS fraction must be finite and nonnegative");
            }
        }
        Ok(())
    }

    /// Price-loop settings implied by this run.
    pub fn outer_config(&self) -> OuterConfig {
        let fixed = self.mode == Mode::FixedLambda;
        OuterConfig {
            lambda0: if fixed { self.fixed_lambda.unwrap_or(self.lambda0) } else { self.lambda0 },
            gap_target: self.gap_target,
            max_outer: if fixed { 1 } else { self.max_outer },
            fixed_lambda: fixed,
            inner: InnerConfig {
                max_iters: self.max_inner,
                tol: self.inner_tol,
                ..InnerConfig::default()
            },
            ..OuterConfig::default()
        }
    }
}

/// Overwrites the EENS limits according to `case`.
pub fn apply_eens_case(instance: &mut SystemInstance, scenarios: &ScenarioSet, case: EensCase) {
    match case {
        EensCase::Explicit => {}
        EensCase::Zero => instance.zones.iter_mut().for_each(|z| z.eens_limit = 0.0),
        EensCase::Fraction(p) => {
            let demand = scenarios.min_annual_demand(&instance.time_grid);
            for (z, d) in instance.zones.iter_mut().zip(demand) {
                z.eens_limit = p * d;
            }
        }
    }
}

/// Loads and validates the inputs, with limits set per the EENS case.
pub fn ingest(config: &RunConfig) -> Result<(SystemInstance, ScenarioSet)> {
    config.validate()?;
    let mut instance = load_instance(&config.instance)?;
    let scenarios = load_scenarios(&config.scenarios, &instance)?;
    apply_eens_case(&mut instance, &scenarios, config.eens_case);
    let report = validate_instance(&instance, &scenarios);
    if !report.is_valid() {
        return Err(Error::Invalid(report.to_string()));
    }
    Ok((instance, scenarios))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneSummary {
    pub zone: String,
    pub eens_limit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eens: Option<f64>,
    pub lambda: f64,
    pub invested_mw: f64,
    pub retired_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TechnologySummary {
    pub technology: String,
    pub invested_mw: f64,
    pub retired_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mode: Mode,
    pub eens_case: EensCase,
    pub converged: bool,
    /// Total cost of the reported plan: investment and fixed cost net of
    /// retirements, plus expected operating cost.
    pub total_cost: f64,
    pub first_stage_cost: f64,
    pub investment_cost: f64,
    pub retirement_savings: f64,
    pub operating_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_source: Option<TrueCostSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub outer_iterations: usize,
    /// Prices weighted by expected annual demand.
    pub average_lambda: f64,
    pub zones: Vec<ZoneSummary>,
    pub technologies: Vec<TechnologySummary>,
    /// Per-scenario values, wait-and-see mode only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wait_and_see: Option<Vec<ScenarioValue>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioValue {
    pub scenario: String,
    pub probability: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitDecision {
    pub zone: String,
    pub technology: String,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PlanFile<'a> {
    investments: Vec<UnitDecision>,
    retirements: Vec<UnitDecision>,
    plan: &'a ExpansionPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ScenarioPlan<'a> {
    scenario: &'a str,
    investments: Vec<UnitDecision>,
    retirements: Vec<UnitDecision>,
    plan: &'a ExpansionPlan,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn decisions(plan: &ExpansionPlan, instance: &SystemInstance) -> (Vec<UnitDecision>, Vec<UnitDecision>) {
    let pick = |units: Vec<usize>, values: &[f64]| {
        units
            .into_iter()
            .zip(values)
            .map(|(u, &mw)| UnitDecision {
                zone: instance.thermal[u].zone.clone(),
                technology: instance.thermal[u].technology.clone(),
                mw,
            })
            .collect()
    };
    (
        pick(instance.candidates(), &plan.invest),
        pick(instance.existing(), &plan.retire),
    )
}

/// Loads the inputs and runs the configured mode.
pub fn execute(config: &RunConfig) -> Result<Summary> {
    let (instance, scenarios) = ingest(config)?;
    execute_loaded(config, &instance, &scenarios)
}

/// Runs the configured mode on inputs already in memory and writes the
/// artifacts into `config.out`.
pub fn execute_loaded(config: &RunConfig, instance: &SystemInstance, scenarios: &ScenarioSet) -> Result<Summary> {
    config.validate()?;
    fs::create_dir_all(&config.out)?;
    let executor = Executor::new(config.workers);
    let started = Instant::now();
    let summary = match config.mode {
        Mode::Full | Mode::FixedLambda => {
            let result = outer::run(instance, scenarios, &config.outer_config(), &executor)?;
            write_outer(config, instance, &result)?;
            outer_summary(config, instance, scenarios, &result)
        }
        Mode::Oracle => {
            let o = solve_extended_form(instance, scenarios)?;
            write_traces(&config.out, instance, &[])?;
            write_plan(&config.out, instance, &o.plan)?;
            fs::write(config.out.join("recovery_log.jsonl"), "")?;
            let fs_cost = first_stage_cost(&o.plan, instance);
            let mut s = base_summary(config, instance, scenarios, &o.plan, &o.lambda, Some(&o.eens));
            s.converged = true;
            s.total_cost = round6(o.cost);
            s.operating_cost = round6(o.cost - fs_cost);
            s
        }
        Mode::WaitAndSee => {
            let lambda = vec![config.lambda0; instance.zones.len()];
            let (target, per) = estimate_target(&lambda, instance, scenarios, &executor)?;
            write_traces(&config.out, instance, &[])?;
            let plans: Vec<ScenarioPlan<'_>> = scenarios
                .scenarios
                .iter()
                .zip(&per)
                .map(|(s, ws)| {
                    let (investments, retirements) = decisions(&ws.plan, instance);
                    ScenarioPlan {
                        scenario: &s.id,
                        investments,
                        retirements,
                        plan: &ws.plan,
                    }
                })
                .collect();
            write_json(&config.out.join("final_plan.json"), &plans)?;
            fs::write(config.out.join("recovery_log.jsonl"), "")?;
            let constant: f64 = instance.zones.iter().map(|z| config.lambda0 * z.eens_limit).sum();
            let zeros = ExpansionPlan::zeros(instance);
            let mut s = base_summary(config, instance, scenarios, &zeros, &lambda, None);
            s.converged = true;
            s.total_cost = round6(target);
            s.lower_bound = Some(round6(target - constant));
            s.operating_cost = 0.0;
            s.wait_and_see = Some(
                scenarios
                    .scenarios
                    .iter()
                    .zip(&per)
                    .map(|(sc, ws)| ScenarioValue {
                        scenario: sc.id.clone(),
                        probability: sc.probability,
                        value: round6(ws.value),
                    })
                    .collect(),
            );
            s
        }
    };
    write_json(&config.out.join("summary.json"), &summary)?;
    info!(
        "{:?} run finished in {:.3} s, total cost {}",
        config.mode,
        started.elapsed().as_secs_f64(),
        summary.total_cost
    );
    Ok(summary)
}

fn base_summary(
    config: &RunConfig,
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    plan: &ExpansionPlan,
    lambda: &[f64],
    eens: Option<&[f64]>,
) -> Summary {
    let (investments, retirements) = decisions(plan, instance);
    let investment_cost: f64 = instance
        .candidates()
        .into_iter()
        .zip(&plan.invest)
        .map(|(u, x)| (instance.thermal[u].ic + instance.thermal[u].fom) * x)
        .sum();
    let retirement_savings: f64 = instance
        .existing()
        .into_iter()
        .zip(&plan.retire)
        .map(|(u, x)| instance.thermal[u].fom * x)
        .sum();

    let zones = instance
        .zones
        .iter()
        .enumerate()
        .map(|(n, z)| {
            let sum = |d: &[UnitDecision]| d.iter().filter(|u| u.zone == z.id).map(|u| u.mw).sum::<f64>();
            ZoneSummary {
                zone: z.id.clone(),
                eens_limit: z.eens_limit,
                eens: eens.map(|e| e[n]),
                lambda: lambda[n],
                invested_mw: sum(&investments),
                retired_mw: sum(&retirements),
            }
        })
        .collect();

    let mut technologies: Vec<TechnologySummary> = Vec::new();
    for u in &instance.thermal {
        if !technologies.iter().any(|t| t.technology == u.technology) {
            technologies.push(TechnologySummary {
                technology: u.technology.clone(),
                invested_mw: 0.0,
                retired_mw: 0.0,
            });
        }
    }
    for (d, new) in investments.iter().map(|d| (d, true)).chain(retirements.iter().map(|d| (d, false))) {
        let t = technologies.iter_mut().find(|t| t.technology == d.technology).expect("listed above");
        if new {
            t.invested_mw += d.mw;
        } else {
            t.retired_mw += d.mw;
        }
    }

    Summary {
        mode: config.mode,
        eens_case: config.eens_case,
        converged: false,
        total_cost: f64::NAN,
        first_stage_cost: round6(investment_cost - retirement_savings),
        investment_cost: round6(investment_cost),
        retirement_savings: round6(retirement_savings),
        operating_cost: f64::NAN,
        cost_source: None,
        lower_bound: None,
        upper_bound: None,
        gap: None,
        outer_iterations: 0,
        average_lambda: average_lambda(lambda, instance, scenarios),
        zones,
        technologies,
        wait_and_see: None,
    }
}

/// Prices weighted by each zone's expected annual demand.
pub fn average_lambda(lambda: &[f64], instance: &SystemInstance, scenarios: &ScenarioSet) -> f64 {
    let hours = &instance.time_grid.block_duration;
    let mut num = 0.0;
    let mut den = 0.0;
    for (n, l) in lambda.iter().enumerate() {
        let d: f64 = scenarios
            .scenarios
            .iter()
            .map(|s| s.probability * s.demand[n].iter().zip(hours).map(|(d, h)| d * h).sum::<f64>())
            .sum();
        num += l * d;
        den += d;
    }
    if den > 0.0 {
        num / den
    } else {
        lambda.iter().sum::<f64>() / lambda.len().max(1) as f64
    }
}

fn outer_summary(config: &RunConfig, instance: &SystemInstance, scenarios: &ScenarioSet, r: &OuterResult) -> Summary {
    let lambda = if config.mode == Mode::FixedLambda { &r.lambda_last } else { &r.lambda_final };
    let mut s = base_summary(config, instance, scenarios, &r.final_plan, lambda, Some(&r.true_cost.eens));
    s.converged = r.converged;
    s.total_cost = round6(r.true_cost.value);
    s.operating_cost = round6(r.true_cost.operating);
    s.cost_source = Some(r.true_cost.source);
    s.lower_bound = Some(round6(r.best_lower));
    s.upper_bound = Some(round6(r.best_upper));
    s.gap = Some(r.gap);
    s.outer_iterations = r.bounds_trace.len();
    s
}

fn write_outer(config: &RunConfig, instance: &SystemInstance, r: &OuterResult) -> Result<()> {
    write_traces(&config.out, instance, &r.bounds_trace)?;
    write_plan(&config.out, instance, &r.final_plan)?;
    let mut log = String::new();
    for entry in &r.recovery_log {
        log.push_str(&serde_json::to_string(entry).map_err(|e| Error::Invalid(e.to_string()))?);
        log.push('\n');
    }
    fs::write(config.out.join("recovery_log.jsonl"), log)?;
    Ok(())
}

fn write_traces(out: &Path, instance: &SystemInstance, trace: &[outer::BoundsRecord]) -> Result<()> {
    let mut bounds = String::from("k,lower,upper,gap,alpha,rho_norm\n");
    let mut prices = String::from("k,zone,lambda\n");
    for r in trace {
        let _ = writeln!(bounds, "{},{},{},{},{},{}", r.k, r.lower, r.upper, r.gap, r.alpha, r.rho_norm);
        for (z, l) in instance.zones.iter().zip(&r.lambda) {
            let _ = writeln!(prices, "{},{},{}", r.k, z.id, l);
        }
    }
    fs::write(out.join("bounds_trace.csv"), bounds)?;
    fs::write(out.join("lambda_trace.csv"), prices)?;
    Ok(())
}

fn write_plan(out: &Path, instance: &SystemInstance, plan: &ExpansionPlan) -> Result<()> {
    let (investments, retirements) = decisions(plan, instance);
    write_json(
        &out.join("final_plan.json"),
        &PlanFile {
            investments,
            retirements,
            plan,
        },
    )
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}
