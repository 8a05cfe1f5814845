//! Instance, scenario and plan types plus the quantities derived from them.

mod io;
mod validate;

pub use io::{
    load_instance, load_scenarios, save_instance, save_scenarios, ScenarioManifest, ScenarioRef,
};
pub use validate::{validate_instance, Finding, ValidationReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTimeGrid")]
pub struct TimeGrid {
    pub block_count: usize,
    /// Hours represented by each block.
    pub block_duration: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Durations {
    Uniform(f64),
    PerBlock(Vec<f64>),
}

#[derive(Deserialize)]
struct RawTimeGrid {
    block_count: usize,
    block_duration: Durations,
}

impl TryFrom<RawTimeGrid> for TimeGrid {
    type Error = String;

    fn try_from(raw: RawTimeGrid) -> std::result::Result<Self, String> {
        let block_duration = match raw.block_duration {
            Durations::Uniform(d) => vec![d; raw.block_count],
            Durations::PerBlock(v) => v,
        };
        if block_duration.len() != raw.block_count {
            return Err(format!(
                "block_duration has {} entries, block_count is {}",
                block_duration.len(),
                raw.block_count
            ));
        }
        Ok(Self {
            block_count: raw.block_count,
            block_duration,
        })
    }
}

impl TimeGrid {
    pub fn uniform(block_count: usize, hours: f64) -> Self {
        Self {
            block_count,
            block_duration: vec![hours; block_count],
        }
    }

    pub fn total_hours(&self) -> f64 {
        self.block_duration.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: String,
    /// MWh per planning year.
    pub eens_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Existing,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalUnit {
    pub zone: String,
    pub technology: String,
    pub kind: UnitKind,
    /// Annualized investment cost, EUR/MW-yr. Candidates only.
    #[serde(default)]
    pub ic: f64,
    pub fom: f64,
    pub mc: f64,
    /// Investment limit for candidates, retirable capacity for existing units.
    pub cap_upper: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p_max: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p_min: Vec<f64>,
}

/// Physical interconnector. Flow is positive from `from_zone` to `to_zone`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_zone: String,
    pub to_zone: String,
    pub l_max: f64,
    pub l_min: f64,
    /// Wheeling charge, EUR/MWh.
    pub wc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub zone: String,
    pub bv: f64,
    pub bc: f64,
    pub bd: f64,
    pub bce: f64,
    pub bde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HydroTech {
    /// Run-of-river.
    R,
    /// Reservoir.
    S,
    /// Open-loop pumped storage.
    O,
    /// Closed-loop pumped storage.
    C,
}

impl HydroTech {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "R" => Some(Self::R),
            "S" => Some(Self::S),
            "O" => Some(Self::O),
            "C" => Some(Self::C),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Self::R => "R",
            Self::S => "S",
            Self::O => "O",
            Self::C => "C",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroUnit {
    pub zone: String,
    pub technology: HydroTech,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default = "one")]
    pub pe: f64,
    #[serde(default)]
    pub sc: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

/// How the second open-loop balance row is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OpenLoopBalance {
    /// Second row tracks a tail reservoir, like the closed-loop block.
    #[default]
    Tail,
    /// Both rows constrain the head level.
    AsWritten,
}

/// Modelling switches that have no single reading in the source formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    #[serde(default)]
    pub open_loop_balance: OpenLoopBalance,
    /// Bound open-loop spillage by the pump capacity.
    #[serde(default = "yes")]
    pub open_loop_spill_cap: bool,
    /// Storage level at the start of the horizon as a fraction of capacity.
    /// The end level must be at least as high.
    #[serde(default = "half")]
    pub initial_storage_fraction: f64,
    /// Allow free curtailment of PV, wind and run-of-river output.
    #[serde(default = "yes")]
    pub renewable_curtailment: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            open_loop_balance: OpenLoopBalance::Tail,
            open_loop_spill_cap: true,
            initial_storage_fraction: 0.5,
            renewable_curtailment: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemInstance {
    pub time_grid: TimeGrid,
    pub zones: Vec<Zone>,
    #[serde(default)]
    pub thermal: Vec<ThermalUnit>,
    #[serde(default)]
    pub lines: Vec<Line>,
    #[serde(default)]
    pub batteries: Vec<Battery>,
    #[serde(default)]
    pub hydro: Vec<HydroUnit>,
    #[serde(default)]
    pub options: ModelOptions,
}

impl SystemInstance {
    pub fn num_blocks(&self) -> usize {
        self.time_grid.block_count
    }

    pub fn zone_index(&self, id: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.id == id)
    }

    /// Thermal indices of candidate units, in plan order.
    pub fn candidates(&self) -> Vec<usize> {
        self.units_of(UnitKind::Candidate)
    }

    /// Thermal indices of existing units, in plan order.
    pub fn existing(&self) -> Vec<usize> {
        self.units_of(UnitKind::Existing)
    }

    fn units_of(&self, kind: UnitKind) -> Vec<usize> {
        self.thermal
            .iter()
            .enumerate()
            .filter(|(_, u)| u.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn eens_limits(&self) -> Vec<f64> {
        self.zones.iter().map(|z| z.eens_limit).collect()
    }

    /// Resolves every zone reference once. Fails on dangling references.
    pub fn topology(&self) -> Result<Topology> {
        let find = |id: &str, what: &str| {
            self.zone_index(id)
                .ok_or_else(|| Error::Invalid(format!("{what} references unknown zone '{id}'")))
        };
        let mut unit_zone = Vec::with_capacity(self.thermal.len());
        for u in &self.thermal {
            unit_zone.push(find(&u.zone, &format!("unit {}", u.technology))?);
        }
        let mut line_ends = Vec::with_capacity(self.lines.len());
        for (i, l) in self.lines.iter().enumerate() {
            line_ends.push((find(&l.from_zone, &format!("line {i}"))?, find(&l.to_zone, &format!("line {i}"))?));
        }
        let mut battery_zone = Vec::new();
        for b in &self.batteries {
            battery_zone.push(find(&b.zone, "battery")?);
        }
        let mut hydro_zone = Vec::new();
        for h in &self.hydro {
            hydro_zone.push(find(&h.zone, "hydro unit")?);
        }
        Ok(Topology {
            candidates: self.candidates(),
            existing: self.existing(),
            unit_zone,
            line_ends,
            battery_zone,
            hydro_zone,
        })
    }

    /// Checks that a scenario set matches this instance's dimensions.
    pub fn check_dimensions(&self, scenarios: &ScenarioSet) -> Result<()> {
        let t = self.num_blocks();
        let nz = self.zones.len();
        for s in &scenarios.scenarios {
            let bad = |what: &str| Error::Invalid(format!("scenario {}: {what} has wrong dimensions", s.id));
            for (name, series) in [("demand", &s.demand), ("pv", &s.pv), ("wind", &s.wind)] {
                if series.len() != nz || series.iter().any(|z| z.len() != t) {
                    return Err(bad(name));
                }
            }
            if s.inflows.len() != self.hydro.len() || s.inflows.iter().any(|h| h.len() != t) {
                return Err(bad("inflows"));
            }
        }
        Ok(())
    }
}

/// Zone indices resolved from a [`SystemInstance`].
#[derive(Debug, Clone)]
pub struct Topology {
    pub candidates: Vec<usize>,
    pub existing: Vec<usize>,
    pub unit_zone: Vec<usize>,
    pub line_ends: Vec<(usize, usize)>,
    pub battery_zone: Vec<usize>,
    pub hydro_zone: Vec<usize>,
}

/// One realization of demand, renewables and inflows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub probability: f64,
    /// MW, indexed `[zone][t]`.
    pub demand: Vec<Vec<f64>>,
    pub pv: Vec<Vec<f64>>,
    pub wind: Vec<Vec<f64>>,
    /// MW, indexed `[hydro unit][t]` in instance order.
    pub inflows: Vec<Vec<f64>>,
}

impl Scenario {
    /// Zero series shaped for `instance`.
    pub fn empty(id: impl Into<String>, probability: f64, instance: &SystemInstance) -> Self {
        let t = instance.num_blocks();
        let z = vec![vec![0.0; t]; instance.zones.len()];
        Self {
            id: id.into(),
            probability,
            demand: z.clone(),
            pv: z.clone(),
            wind: z,
            inflows: vec![vec![0.0; t]; instance.hydro.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    /// Keeps only scenario `i`, with probability one.
    pub fn single(&self, i: usize) -> ScenarioSet {
        let mut s = self.scenarios[i].clone();
        s.probability = 1.0;
        ScenarioSet { scenarios: vec![s] }
    }

    /// Annual energy demand per zone, minimized over scenarios.
    pub fn min_annual_demand(&self, grid: &TimeGrid) -> Vec<f64> {
        let nz = self.scenarios.first().map_or(0, |s| s.demand.len());
        (0..nz)
            .map(|n| {
                self.scenarios
                    .iter()
                    .map(|s| s.demand[n].iter().zip(&grid.block_duration).map(|(d, h)| d * h).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

/// First-stage decisions. `invest[k]` belongs to the k-th candidate unit and
/// `retire[k]` to the k-th existing unit, in instance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionPlan {
    pub invest: Vec<f64>,
    pub retire: Vec<f64>,
}

impl ExpansionPlan {
    pub fn zeros(instance: &SystemInstance) -> Self {
        Self {
            invest: vec![0.0; instance.candidates().len()],
            retire: vec![0.0; instance.existing().len()],
        }
    }

    /// Largest distance outside the box `[0, cap_upper]`.
    pub fn bound_violation(&self, instance: &SystemInstance) -> f64 {
        let caps = instance
            .candidates()
            .into_iter()
            .zip(&self.invest)
            .chain(instance.existing().into_iter().zip(&self.retire));
        caps.map(|(u, &x)| (-x).max(x - instance.thermal[u].cap_upper).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Flat view, investments first.
    pub fn to_vec(&self) -> Vec<f64> {
        self.invest.iter().chain(&self.retire).copied().collect()
    }

    pub fn from_slice(instance: &SystemInstance, v: &[f64]) -> Self {
        let nc = instance.candidates().len();
        Self {
            invest: v[..nc].to_vec(),
            retire: v[nc..].to_vec(),
        }
    }
}

/// EENS prices, EUR/MWh per zone.
pub type DualPriceVector = Vec<f64>;

/// Load shedding in MW, indexed `[scenario][zone][t]`.
pub type Shedding = Vec<Vec<Vec<f64>>>;

/// Investment plus fixed cost of new capacity minus avoided fixed cost of
/// retirements.
pub fn first_stage_cost(plan: &ExpansionPlan, instance: &SystemInstance) -> f64 {
    let new: f64 = instance
        .candidates()
        .iter()
        .zip(&plan.invest)
        .map(|(&u, x)| (instance.thermal[u].ic + instance.thermal[u].fom) * x)
        .sum();
    let avoided: f64 = instance
        .existing()
        .iter()
        .zip(&plan.retire)
        .map(|(&u, x)| instance.thermal[u].fom * x)
        .sum();
    new - avoided
}

/// Probability-weighted energy shed per zone, MWh.
pub fn eens_by_zone(ls: &Shedding, scenarios: &ScenarioSet, grid: &TimeGrid) -> Vec<f64> {
    let nz = ls.first().map_or(0, |s| s.len());
    let mut out = vec![0.0; nz];
    for (s, per_zone) in scenarios.scenarios.iter().zip(ls) {
        for (n, series) in per_zone.iter().enumerate() {
            let e: f64 = series.iter().zip(&grid.block_duration).map(|(l, h)| h * l).sum();
            out[n] += s.probability * e;
        }
    }
    out
}
