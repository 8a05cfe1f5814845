//! Runs the price loop on the two-zone toy system and prints the bounds.

use cep_eens::executor::Executor;
use cep_eens::fixtures::toy2;
use cep_eens::outer::{run, OuterConfig};

fn main() -> cep_eens::Result<()> {
    let (instance, scenarios) = toy2();
    let result = run(&instance, &scenarios, &OuterConfig::default(), &Executor::new(2))?;
    println!("{:>3} {:>14} {:>14} {:>9}", "k", "lower", "upper", "gap");
    for r in &result.bounds_trace {
        println!("{:>3} {:>14.2} {:>14.2} {:>8.3}%", r.k, r.lower, r.upper, 100.0 * r.gap);
    }
    println!("true cost {:.2} ({:?})", result.true_cost.value, result.true_cost.source);
    for (z, l) in instance.zones.iter().zip(&result.lambda_final) {
        println!("lambda[{}] = {l:.2} EUR/MWh", z.id);
    }
    Ok(())
}
