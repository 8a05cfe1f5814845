//! Repairs a cheap, unreliable plan: solve the dual function at a low price,
//! run idle units, then add capacity until every zone meets its EENS limit.

use cep_eens::executor::Executor;
use cep_eens::fixtures::toy2;
use cep_eens::inner::{solve_dual_function, InnerConfig};
use cep_eens::recovery::{recover_all, recover_node, LoleMode, RecoveryOptions};
use cep_eens::model::{Scenario, ScenarioSet, TimeGrid};

fn main() -> cep_eens::Result<()> {
    // one scenario, three one-hour blocks, shedding 10, 5, 0 MW, limit 3 MWh
    let one = ScenarioSet {
        scenarios: vec![Scenario {
            id: "s".into(),
            probability: 1.0,
            demand: vec![],
            pv: vec![],
            wind: vec![],
            inflows: vec![],
        }],
    };
    let grid = TimeGrid::uniform(3, 1.0);
    for mode in [LoleMode::Recompute, LoleMode::Fixed] {
        let r = recover_node(&[vec![10.0, 5.0, 0.0]], 3.0, &one, &grid, mode);
        println!("{mode:?}: {:.6} MW in {} rounds, shedding left {:?}", r.x_new, r.rounds, r.ls_f[0]);
    }

    let (instance, scenarios) = toy2();
    let lambda = vec![20.0; instance.zones.len()];
    let sol = solve_dual_function(&lambda, &instance, &scenarios, InnerConfig::default(), &Executor::new(2))?;
    let rec = recover_all(&sol, &instance, &scenarios, RecoveryOptions::default())?;
    for z in &rec.zones {
        println!(
            "zone {}: {:.3} MWh over, {:.3} MWh served by idle units, {:.3} MW needed, restored {:?}, added {:?}",
            z.zone, z.violation, z.redispatched, z.x_new, z.restored, z.added
        );
    }
    println!("EENS before {:?}", sol.eens);
    println!("EENS after  {:?}", rec.eens);
    println!("upper bound {:.2}", rec.ub);
    Ok(())
}
