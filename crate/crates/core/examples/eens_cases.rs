//! Oracle cost and prices as the EENS limits loosen from zero.

use cep_eens::fixtures::{random_instance, RandomSpec};
use cep_eens::oracle::solve_extended_form;
use cep_eens::runner::{apply_eens_case, average_lambda, EensCase};

fn main() -> cep_eens::Result<()> {
    let (base, scenarios) = random_instance(41, RandomSpec::default());
    println!("{:>10} {:>14} {:>10}", "case", "cost", "avg lambda");
    for (name, case) in [
        ("zero", EensCase::Zero),
        ("0.01%", EensCase::Fraction(1e-4)),
        ("0.1%", EensCase::Fraction(1e-3)),
        ("1%", EensCase::Fraction(1e-2)),
    ] {
        let mut instance = base.clone();
        apply_eens_case(&mut instance, &scenarios, case);
        let o = solve_extended_form(&instance, &scenarios)?;
        let avg = average_lambda(&o.lambda, &instance, &scenarios);
        println!("{name:>10} {:>14.0} {avg:>10.1}", o.cost);
    }
    Ok(())
}
