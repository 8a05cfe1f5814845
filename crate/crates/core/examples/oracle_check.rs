//! Compares the decomposed solve with the extended-form LP on a generated
//! instance. Pass a seed as the first argument.

use std::time::Instant;

use cep_eens::executor::Executor;
use cep_eens::fixtures::{random_instance, RandomSpec};
use cep_eens::oracle::solve_extended_form;
use cep_eens::outer::{run, OuterConfig};

fn main() -> cep_eens::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let (instance, scenarios) = random_instance(seed, RandomSpec::default());

    let t = Instant::now();
    let oracle = solve_extended_form(&instance, &scenarios)?;
    println!("extended form   {:.2}  in {:.2?}", oracle.cost, t.elapsed());

    let t = Instant::now();
    let r = run(&instance, &scenarios, &OuterConfig::default(), &Executor::new(4))?;
    println!("decomposition   {:.2}  in {:.2?}", r.true_cost.value, t.elapsed());
    println!("excess          {:.3}%", 100.0 * (r.true_cost.value / oracle.cost - 1.0));
    for (n, z) in instance.zones.iter().enumerate() {
        println!(
            "zone {}: lambda {:.1} (oracle {:.1}), EENS {:.3} of {:.3} MWh",
            z.id, r.lambda_final[n], oracle.lambda[n], r.true_cost.eens[n], z.eens_limit
        );
    }
    Ok(())
}
