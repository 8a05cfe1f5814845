//! Explicit per-zone EENS limits against one uniform shedding price of
//! 15000 EUR/MWh, on a system where one zone tolerates far more shedding
//! than the other.

use cep_eens::executor::Executor;
use cep_eens::fixtures::{random_instance, RandomSpec};
use cep_eens::outer::{run, OuterConfig};

fn main() -> cep_eens::Result<()> {
    let shape = RandomSpec {
        zones: 2,
        scenarios: 2,
        blocks: 24,
        eens_fraction: 1e-3,
    };
    let (mut instance, scenarios) = random_instance(31, shape);
    let demand = scenarios.min_annual_demand(&instance.time_grid);
    instance.zones[0].eens_limit = 0.01 * demand[0];
    instance.zones[1].eens_limit = 1e-5 * demand[1];

    let ex = Executor::new(4);
    let explicit = run(&instance, &scenarios, &OuterConfig::default(), &ex)?;
    let implicit = run(
        &instance,
        &scenarios,
        &OuterConfig {
            lambda0: 15000.0,
            fixed_lambda: true,
            max_outer: 1,
            ..OuterConfig::default()
        },
        &ex,
    )?;
    let (a, b) = (explicit.true_cost.value, implicit.true_cost.value);
    println!("explicit limits   {a:.0}  lambda {:?}", explicit.lambda_final);
    println!("uniform 15000     {b:.0}");
    println!("saving            {:.2}%", 100.0 * (b - a) / b);
    Ok(())
}
