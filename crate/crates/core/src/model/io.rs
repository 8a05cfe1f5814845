//! Instance JSON, scenario manifest JSON and the per-series CSV files.
//!
//! Series CSVs carry the header `scenario,zone,t,value`; the inflow file adds
//! a `technology` column (`R`, `S`, `O` or `C`) after `zone`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HydroTech, Scenario, ScenarioSet, SystemInstance};
use crate::error::{Error, Result};

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn load_instance(path: &Path) -> Result<SystemInstance> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))
}

pub fn save_instance(instance: &SystemInstance, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(instance).map_err(|e| parse_err(path, e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
}

/// Scenario manifest. Series paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    /// When present, must agree with the instance's time grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_duration: Option<serde_json::Value>,
    pub scenarios: Vec<ScenarioRef>,
    pub demand: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflows: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    scenario: String,
    zone: String,
    t: usize,
    value: f64,
}

#[derive(Debug, Deserialize)]
struct InflowRow {
    scenario: String,
    zone: String,
    technology: String,
    t: usize,
    value: f64,
}

/// Reads a manifest and its CSVs. Missing PV, wind or inflow files mean zero;
/// demand must cover every (scenario, zone, block). Probabilities default to
/// uniform when the manifest omits all of them.
pub fn load_scenarios(path: &Path, instance: &SystemInstance) -> Result<ScenarioSet> {
    let text = fs::read_to_string(path)?;
    let manifest: ScenarioManifest = serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));

    if let Some(v) = &manifest.block_duration {
        let expected = &instance.time_grid.block_duration;
        let ok = match v {
            serde_json::Value::Number(n) => n.as_f64().is_some_and(|h| expected.iter().all(|e| *e == h)),
            serde_json::Value::Array(a) => {
                a.len() == expected.len() && a.iter().zip(expected).all(|(x, e)| x.as_f64() == Some(*e))
            }
            _ => false,
        };
        if !ok {
            return Err(parse_err(path, "block_duration disagrees with the instance time grid"));
        }
    }

    let n = manifest.scenarios.len();
    if n == 0 {
        return Err(parse_err(path, "no scenarios listed"));
    }
    let given = manifest.scenarios.iter().filter(|s| s.probability.is_some()).count();
    if given != 0 && given != n {
        return Err(parse_err(path, "give a probability for every scenario or for none"));
    }

    let mut set = ScenarioSet {
        scenarios: manifest
            .scenarios
            .iter()
            .map(|r| Scenario::empty(&r.id, r.probability.unwrap_or(1.0 / n as f64), instance))
            .collect(),
    };
    let scen_idx: HashMap<&str, usize> =
        manifest.scenarios.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();

    let demand_path = base.join(&manifest.demand);
    let mut seen = vec![vec![vec![false; instance.num_blocks()]; instance.zones.len()]; n];
    read_series(&demand_path, instance, &scen_idx, |s, z, t, v| {
        set.scenarios[s].demand[z][t] = v;
        seen[s][z][t] = true;
    })?;
    if let Some((s, z, t)) = first_missing(&seen) {
        return Err(parse_err(
            &demand_path,
            format!(
                "no demand for scenario {}, zone {}, t {t}",
                set.scenarios[s].id, instance.zones[z].id
            ),
        ));
    }
    if let Some(p) = &manifest.pv {
        read_series(&base.join(p), instance, &scen_idx, |s, z, t, v| set.scenarios[s].pv[z][t] = v)?;
    }
    if let Some(p) = &manifest.wind {
        read_series(&base.join(p), instance, &scen_idx, |s, z, t, v| set.scenarios[s].wind[z][t] = v)?;
    }
    if let Some(p) = &manifest.inflows {
        read_inflows(&base.join(p), instance, &scen_idx, &mut set)?;
    }
    Ok(set)
}

fn first_missing(seen: &[Vec<Vec<bool>>]) -> Option<(usize, usize, usize)> {
    for (s, zs) in seen.iter().enumerate() {
        for (z, ts) in zs.iter().enumerate() {
            if let Some(t) = ts.iter().position(|x| !x) {
                return Some((s, z, t));
            }
        }
    }
    None
}

fn read_series(
    path: &Path,
    instance: &SystemInstance,
    scen_idx: &HashMap<&str, usize>,
    mut put: impl FnMut(usize, usize, usize, f64),
) -> Result<()> {
    for rec in rows::<SeriesRow>(path)? {
        let (n, row) = rec?;
        let line = || format!("line {n}: row with scenario '{}', zone '{}', t {}", row.scenario, row.zone, row.t);
        let s = *scen_idx
            .get(row.scenario.as_str())
            .ok_or_else(|| parse_err(path, format!("{}: unknown scenario", line())))?;
        let z = instance
            .zone_index(&row.zone)
            .ok_or_else(|| parse_err(path, format!("{}: unknown zone", line())))?;
        if row.t >= instance.num_blocks() {
            return Err(parse_err(path, format!("{}: t out of range", line())));
        }
        put(s, z, row.t, row.value);
    }
    Ok(())
}

fn read_inflows(
    path: &Path,
    instance: &SystemInstance,
    scen_idx: &HashMap<&str, usize>,
    set: &mut ScenarioSet,
) -> Result<()> {
    for rec in rows::<InflowRow>(path)? {
        let (n, row) = rec?;
        let line = || format!("line {n}: row with scenario '{}', zone '{}', t {}", row.scenario, row.zone, row.t);
        let s = *scen_idx
            .get(row.scenario.as_str())
            .ok_or_else(|| parse_err(path, format!("{}: unknown scenario", line())))?;
        let tech = HydroTech::parse(&row.technology)
            .ok_or_else(|| parse_err(path, format!("{}: unknown technology '{}'", line(), row.technology)))?;
        let h = instance
            .hydro
            .iter()
            .position(|h| h.zone == row.zone && h.technology == tech)
            .ok_or_else(|| parse_err(path, format!("{}: no {} hydro unit in that zone", line(), tech.code())))?;
        if row.t >= instance.num_blocks() {
            return Err(parse_err(path, format!("{}: t out of range", line())));
        }
        set.scenarios[s].inflows[h][row.t] = row.value;
    }
    Ok(())
}

/// Deserialized rows paired with their 1-based line numbers.
fn rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<impl Iterator<Item = Result<(u64, T)>> + '_> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| parse_err(path, csv_message(&e)))?.clone();
    Ok(rdr.into_records().map(move |rec| {
        let raw = rec.map_err(|e| parse_err(path, csv_message(&e)))?;
        let line = raw.position().map_or(0, |p| p.line());
        raw.deserialize(Some(&headers))
            .map(|row| (line, row))
            .map_err(|e| parse_err(path, format!("line {line}: {e}")))
    }))
}

fn csv_message(e: &csv::Error) -> String {
    match e.position() {
        Some(p) => format!("line {}: {e}", p.line()),
        None => e.to_string(),
    }
}

/// Writes `set` as a manifest plus four CSVs into `dir`, returning the
/// manifest path.
pub fn save_scenarios(set: &ScenarioSet, instance: &SystemInstance, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    for (file, pick) in [
        ("demand.csv", 0usize),
        ("pv.csv", 1),
        ("wind.csv", 2),
    ] {
        let mut w = csv::Writer::from_path(dir.join(file)).map_err(io)?;
        w.write_record(["scenario", "zone", "t", "value"]).map_err(io)?;
        for s in &set.scenarios {
            let series = match pick {
                0 => &s.demand,
                1 => &s.pv,
                _ => &s.wind,
            };
            for (z, vals) in series.iter().enumerate() {
                for (t, v) in vals.iter().enumerate() {
                    w.write_record([s.id.clone(), instance.zones[z].id.clone(), t.to_string(), v.to_string()])
                        .map_err(io)?;
                }
            }
        }
        w.flush()?;
    }
    let mut w = csv::Writer::from_path(dir.join("inflows.csv")).map_err(io)?;
    w.write_record(["scenario", "zone", "technology", "t", "value"]).map_err(io)?;
    for s in &set.scenarios {
        for (h, vals) in s.inflows.iter().enumerate() {
            let unit = &instance.hydro[h];
            for (t, v) in vals.iter().enumerate() {
                w.write_record([
                    s.id.clone(),
                    unit.zone.clone(),
                    unit.technology.code().to_string(),
                    t.to_string(),
                    v.to_string(),
                ])
                .map_err(io)?;
            }
        }
    }
    w.flush()?;

    let manifest = ScenarioManifest {
        block_duration: Some(serde_json::json!(instance.time_grid.block_duration)),
        scenarios: set
            .scenarios
            .iter()
            .map(|s| ScenarioRef {
                id: s.id.clone(),
                probability: Some(s.probability),
            })
            .collect(),
        demand: "demand.csv".into(),
        pv: Some("pv.csv".into()),
        wind: Some("wind.csv".into()),
        inflows: Some("inflows.csv".into()),
    };
    let path = dir.join("scenarios.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| parse_err(&path, e.to_string()))?;
    fs::write(&path, text + "\n")?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn instance_round_trip() {
        let (inst, _) = fixtures::toy2();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("inst.json");
        save_instance(&inst, &p).unwrap();
        assert_eq!(load_instance(&p).unwrap(), inst);
    }

    #[test]
    fn scenario_round_trip() {
        let (inst, sc) = fixtures::toy2();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_scenarios(&sc, &inst, dir.path()).unwrap();
        assert_eq!(load_scenarios(&manifest, &inst).unwrap(), sc);
    }

    #[test]
    fn probabilities_default_to_uniform() {
        let (inst, sc) = fixtures::toy2();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_scenarios(&sc, &inst, dir.path()).unwrap();
        let text = fs::read_to_string(&manifest).unwrap();
        let mut m: ScenarioManifest = serde_json::from_str(&text).unwrap();
        for s in &mut m.scenarios {
            s.probability = None;
        }
        m.pv = None;
        fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
        let loaded = load_scenarios(&manifest, &inst).unwrap();
        let n = loaded.len() as f64;
        assert!(loaded.scenarios.iter().all(|s| s.probability == 1.0 / n));
        assert!(loaded.scenarios.iter().all(|s| s.pv.iter().flatten().all(|v| *v == 0.0)));
    }

    #[test]
    fn malformed_row_names_its_line() {
        let (inst, sc) = fixtures::toy2();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_scenarios(&sc, &inst, dir.path()).unwrap();
        let demand = dir.path().join("demand.csv");
        let mut text = fs::read_to_string(&demand).unwrap();
        text.push_str("s1,A,0,not-a-number\n");
        fs::write(&demand, text).unwrap();
        let lines = fs::read_to_string(&demand).unwrap().lines().count();
        let err = load_scenarios(&manifest, &inst).unwrap_err().to_string();
        assert!(err.contains(&format!("line {lines}")), "{err}");
    }

    #[test]
    fn incomplete_demand_is_rejected() {
        let (inst, sc) = fixtures::toy2();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_scenarios(&sc, &inst, dir.path()).unwrap();
        let demand = dir.path().join("demand.csv");
        let text = fs::read_to_string(&demand).unwrap();
        let kept: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
        fs::write(&demand, kept.join("\n") + "\n").unwrap();
        let err = load_scenarios(&manifest, &inst).unwrap_err().to_string();
        assert!(err.contains("no demand for"), "{err}");
    }
}
