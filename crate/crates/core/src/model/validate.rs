use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::{HydroTech, ScenarioSet, SystemInstance, UnitKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    /// What the rule was checked on, e.g. `unit A/gas block 3`.
    pub subject: String,
    pub rule: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, subject: impl Into<String>, rule: impl Into<String>) {
        self.findings.push(Finding {
            subject: subject.into(),
            rule: rule.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.findings.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

fn nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

/// Lists every violated structural rule. An empty report means the pair can
/// be assembled and every second-stage problem is feasible.
pub fn validate_instance(instance: &SystemInstance, scenarios: &ScenarioSet) -> ValidationReport {
    let mut r = ValidationReport::default();
    let grid = &instance.time_grid;
    let t_count = grid.block_count;

    if t_count == 0 {
        r.push("time_grid", "block_count must be at least 1");
    }
    if grid.block_duration.len() != t_count {
        r.push("time_grid", "one duration per block required");
    }
    for (t, h) in grid.block_duration.iter().enumerate() {
        if !(h.is_finite() && *h > 0.0) {
            r.push(format!("time_grid block {t}"), "duration must be positive");
        }
    }

    let mut ids = HashSet::new();
    for z in &instance.zones {
        if !ids.insert(z.id.as_str()) {
            r.push(format!("zone {}", z.id), "duplicate zone id");
        }
        if !nonneg(z.eens_limit) {
            r.push(format!("zone {}", z.id), "EENS limit must be finite and >= 0");
        }
    }
    let zone_ok = |id: &str| instance.zone_index(id).is_some();

    let mut unit_keys = HashSet::new();
    for u in &instance.thermal {
        let name = format!("unit {}/{}", u.zone, u.technology);
        if !zone_ok(&u.zone) {
            r.push(&name, "unknown zone");
        }
        if !unit_keys.insert((u.zone.as_str(), u.technology.as_str(), u.kind)) {
            r.push(&name, "duplicate (zone, technology, kind)");
        }
        for (what, v) in [("IC", u.ic), ("FOM", u.fom), ("MC", u.mc), ("cap_upper", u.cap_upper)] {
            if !nonneg(v) {
                r.push(&name, format!("{what} must be finite and >= 0"));
            }
        }
        if u.kind == UnitKind::Existing {
            if u.p_max.len() != t_count || u.p_min.len() != t_count {
                r.push(&name, "p_max and p_min need one value per block");
                continue;
            }
            let mut headroom = f64::INFINITY;
            for t in 0..t_count {
                let (lo, hi) = (u.p_min[t], u.p_max[t]);
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                    r.push(format!("{name} block {t}"), "requires 0 <= P_min <= P_max");
                }
                headroom = headroom.min(hi - lo);
            }
            // p <= P_max - x with p >= P_min caps retirements at the smallest headroom
            if u.cap_upper > headroom + 1e-9 {
                r.push(&name, "retirable capacity exceeds min over blocks of P_max - P_min");
            }
        } else if !u.p_max.is_empty() || !u.p_min.is_empty() {
            r.push(&name, "candidate units take no p_max/p_min series");
        }
    }

    for (i, l) in instance.lines.iter().enumerate() {
        let name = format!("line {i} ({}->{})", l.from_zone, l.to_zone);
        if !zone_ok(&l.from_zone) || !zone_ok(&l.to_zone) {
            r.push(&name, "unknown zone");
        }
        if l.from_zone == l.to_zone {
            r.push(&name, "line must join two different zones");
        }
        if !(l.l_min.is_finite() && l.l_max.is_finite() && l.l_min <= 0.0 && 0.0 <= l.l_max) {
            r.push(&name, "requires L_min <= 0 <= L_max");
        }
        if !nonneg(l.wc) {
            r.push(&name, "wheeling charge must be >= 0");
        }
    }

    let mut battery_zones = HashSet::new();
    for b in &instance.batteries {
        let name = format!("battery {}", b.zone);
        if !zone_ok(&b.zone) {
            r.push(&name, "unknown zone");
        }
        if !battery_zones.insert(b.zone.as_str()) {
            r.push(&name, "at most one battery per zone");
        }
        if !(nonneg(b.bv) && nonneg(b.bc) && nonneg(b.bd)) {
            r.push(&name, "BV, BC, BD must be >= 0");
        }
        if !(b.bce > 0.0 && b.bce <= 1.0 && b.bde > 0.0 && b.bde <= 1.0) {
            r.push(&name, "efficiencies must lie in (0, 1]");
        }
    }

    let mut hydro_keys = HashSet::new();
    for h in &instance.hydro {
        let name = format!("hydro {}/{}", h.zone, h.technology.code());
        if !zone_ok(&h.zone) {
            r.push(&name, "unknown zone");
        }
        if !hydro_keys.insert((h.zone.as_str(), h.technology)) {
            r.push(&name, "at most one hydro unit per technology per zone");
        }
        let needs: &[(&str, Option<f64>)] = match h.technology {
            HydroTech::R => &[],
            HydroTech::S => &[("V", h.v), ("Q", h.q)],
            HydroTech::O | HydroTech::C => &[("V", h.v), ("Q", h.q), ("D", h.d)],
        };
        for (what, v) in needs {
            match v {
                None => r.push(&name, format!("{what} is required for this technology")),
                Some(x) if !nonneg(*x) => r.push(&name, format!("{what} must be >= 0")),
                _ => {}
            }
        }
        if !(h.pe > 0.0 && h.pe <= 1.0) {
            r.push(&name, "pump efficiency must lie in (0, 1]");
        }
        if !nonneg(h.sc) {
            r.push(&name, "spillage cost must be >= 0");
        }
    }

    let o = &instance.options;
    if !(o.initial_storage_fraction >= 0.0 && o.initial_storage_fraction <= 1.0) {
        r.push("options", "initial_storage_fraction must lie in [0, 1]");
    }

    validate_scenarios(instance, scenarios, &mut r);
    r
}

fn validate_scenarios(instance: &SystemInstance, scenarios: &ScenarioSet, r: &mut ValidationReport) {
    let t_count = instance.num_blocks();
    let nz = instance.zones.len();
    if scenarios.is_empty() {
        r.push("scenarios", "at least one scenario required");
        return;
    }
    let mut ids = HashSet::new();
    let mut total = 0.0;
    for s in &scenarios.scenarios {
        let name = format!("scenario {}", s.id);
        if !ids.insert(s.id.as_str()) {
            r.push(&name, "duplicate scenario id");
        }
        if !(s.probability > 0.0 && s.probability <= 1.0) {
            r.push(&name, "probability must lie in (0, 1]");
        }
        total += s.probability;
        let mut shaped = true;
        for (what, series, rows) in [
            ("demand", &s.demand, nz),
            ("pv", &s.pv, nz),
            ("wind", &s.wind, nz),
            ("inflows", &s.inflows, instance.hydro.len()),
        ] {
            if series.len() != rows || series.iter().any(|v| v.len() != t_count) {
                r.push(&name, format!("{what} series has wrong dimensions"));
                shaped = false;
                continue;
            }
            if series.iter().flatten().any(|x| !nonneg(*x)) {
                r.push(&name, format!("{what} values must be finite and >= 0"));
            }
        }
        if shaped {
            must_run_check(instance, s, &name, r);
        }
    }
    if (total - 1.0).abs() > 1e-9 {
        r.push("scenarios", format!("probabilities sum to {total}, not 1"));
    }
}

/// Flags blocks where must-run output cannot be absorbed even with every
/// sink at full use, which would make the second stage infeasible.
fn must_run_check(instance: &SystemInstance, s: &super::Scenario, name: &str, r: &mut ValidationReport) {
    let Ok(topo) = instance.topology() else {
        return;
    };
    let nz = instance.zones.len();
    let mut sink = vec![0.0; nz];
    for (b, &z) in instance.batteries.iter().zip(&topo.battery_zone) {
        sink[z] += b.bc;
    }
    for (h, &z) in instance.hydro.iter().zip(&topo.hydro_zone) {
        if matches!(h.technology, HydroTech::O | HydroTech::C) {
            sink[z] += h.d.unwrap_or(0.0);
        }
    }
    for (l, &(from, to)) in instance.lines.iter().zip(&topo.line_ends) {
        sink[from] += l.l_max.max(0.0);
        sink[to] += (-l.l_min).max(0.0);
    }
    for t in 0..instance.num_blocks() {
        let mut must = vec![0.0; nz];
        for &u in &topo.existing {
            must[topo.unit_zone[u]] += instance.thermal[u].p_min.get(t).copied().unwrap_or(0.0);
        }
        for n in 0..nz {
            if must[n] > s.demand[n][t] + sink[n] + 1e-9 {
                r.push(
                    format!("{name} zone {} block {t}", instance.zones[n].id),
                    "must-run output exceeds demand plus every sink",
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn toy2_is_valid() {
        let (inst, sc) = fixtures::toy2();
        let report = validate_instance(&inst, &sc);
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn pmin_above_pmax_is_reported() {
        let (mut inst, sc) = fixtures::toy2();
        let u = inst.existing()[0];
        inst.thermal[u].p_min[2] = inst.thermal[u].p_max[2] + 1.0;
        let report = validate_instance(&inst, &sc);
        let f = report
            .findings
            .iter()
            .find(|f| f.rule.contains("P_min <= P_max"))
            .expect("finding");
        assert!(f.subject.contains(&inst.thermal[u].technology));
        assert!(f.subject.contains("block 2"));
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let (inst, mut sc) = fixtures::toy2();
        for s in &mut sc.scenarios {
            s.probability = 0.6;
        }
        let report = validate_instance(&inst, &sc);
        assert!(report.findings.iter().any(|f| f.rule.contains("sum to 1.2")), "{report}");
    }

    #[test]
    fn missing_reservoir_volume_is_reported() {
        let (mut inst, sc) = fixtures::toy2();
        let h = inst.hydro.iter().position(|h| h.technology == HydroTech::S).unwrap();
        inst.hydro[h].v = None;
        let report = validate_instance(&inst, &sc);
        assert!(report.findings.iter().any(|f| f.rule.starts_with("V is required")));
    }
}
