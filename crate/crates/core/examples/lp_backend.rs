//! The bounded revised simplex on a small production-planning LP, with
//! duals and reduced costs.

use cep_eens::lp::{solve, LpProblem, Sense};

fn main() {
    let mut lp = LpProblem::new();
    let a = lp.add_var("a", 0.0, 40.0, -3.0);
    let b = lp.add_var("b", 0.0, f64::INFINITY, -5.0);
    let labour = lp.add_row("labour", vec![(a, 1.0), (b, 2.0)], Sense::Le, 100.0);
    let machine = lp.add_row("machine", vec![(a, 3.0), (b, 2.0)], Sense::Le, 180.0);

    let sol = solve(&lp);
    println!("status {:?} after {} pivots", sol.status, sol.iterations);
    println!("objective {}", sol.objective);
    println!("a = {}, b = {}", sol.value(a), sol.value(b));
    println!("duals: labour {}, machine {}", sol.dual(labour), sol.dual(machine));
    println!("reduced costs: a {}, b {}", sol.reduced_cost(a), sol.reduced_cost(b));
}
