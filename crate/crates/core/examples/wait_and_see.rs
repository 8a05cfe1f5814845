//! The wait-and-see value is a lower bound on the dual function.

use cep_eens::executor::Executor;
use cep_eens::fixtures::toy2;
use cep_eens::inner::estimate_target;
use cep_eens::oracle::solve_relaxed_extended;

fn main() -> cep_eens::Result<()> {
    let (instance, scenarios) = toy2();
    for price in [10.0, 100.0, 1000.0, 15000.0] {
        let lambda = vec![price; instance.zones.len()];
        let (ws, per) = estimate_target(&lambda, &instance, &scenarios, &Executor::new(2))?;
        let shift: f64 = instance.zones.iter().map(|z| price * z.eens_limit).sum();
        let g = solve_relaxed_extended(&instance, &scenarios, &lambda)?.g;
        let values: Vec<String> = per.iter().map(|w| format!("{:.0}", w.value)).collect();
        println!(
            "lambda {price:>7}: WS {:>12.2}  g {g:>12.2}  per scenario [{}]",
            ws - shift,
            values.join(", ")
        );
    }
    Ok(())
}
