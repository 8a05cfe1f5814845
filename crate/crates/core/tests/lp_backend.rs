mod common;

use cep_eens::lp::{solve, LpBackend, LpStatus, RevisedSimplex, Tolerances};
use common::dense_tableau::{solve_dense, TableauResult};

#[test]
fn random_lps_agree_with_dense_tableau() {
    let mut counts = [0usize; 3];
    for seed in 0..300u64 {
        let lp = common::random_lp(seed);
        let ours = solve(&lp);
        let oracle = solve_dense(&lp);
        match oracle {
            TableauResult::Optimal(obj) => {
                counts[0] += 1;
                assert_eq!(ours.status, LpStatus::Optimal, "seed {seed}");
                assert!(
                    (ours.objective - obj).abs() <= 1e-7 * (1.0 + obj.abs()),
                    "seed {seed}: {} vs {obj}",
                    ours.objective
                );
                assert!(lp.max_violation(&ours.primal) <= 1e-7, "seed {seed}");
                let (dual, dinf) = ours.dual_objective(&lp, 1e-9);
                assert!(dinf <= 1e-7, "seed {seed}: dual infeasibility {dinf}");
                assert!((dual - ours.objective).abs() <= 1e-7 * (1.0 + obj.abs()), "seed {seed}");
            }
            TableauResult::Infeasible => {
                counts[1] += 1;
                assert_eq!(ours.status, LpStatus::Infeasible, "seed {seed}");
            }
            TableauResult::Unbounded => {
                counts[2] += 1;
                assert_eq!(ours.status, LpStatus::Unbounded, "seed {seed}");
            }
        }
    }
    // the generator should exercise every outcome
    assert!(counts.iter().all(|&c| c > 10), "{counts:?}");
}

#[test]
fn identical_input_gives_identical_solution() {
    let lp = common::random_lp(17);
    let a = solve(&lp);
    let b = solve(&lp);
    assert_eq!(a.status, b.status);
    assert_eq!(a.primal, b.primal);
    assert_eq!(a.duals, b.duals);
}

#[test]
fn warm_start_reaches_same_optimum() {
    for seed in 0..100u64 {
        let lp = common::random_lp(seed);
        let mut backend = RevisedSimplex::new(Tolerances::default());
        let cold = backend.solve(&lp, None);
        if cold.status != LpStatus::Optimal {
            continue;
        }
        let mut shifted = lp.clone();
        for v in shifted.vars.iter_mut() {
            if v.upper.is_finite() {
                v.upper += 1.0;
            }
        }
        let warm = backend.solve(&shifted, cold.basis.as_ref());
        let fresh = backend.solve(&shifted, None);
        assert_eq!(warm.status, fresh.status, "seed {seed}");
        if fresh.status == LpStatus::Optimal {
            assert!((warm.objective - fresh.objective).abs() <= 1e-7 * (1.0 + fresh.objective.abs()));
        }
    }
}
