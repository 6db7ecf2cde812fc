// The transportation simplex as an oracle for the entropic solver on
// small instances: the Sinkhorn value approaches the exact optimum as the
// regularization shrinks.

use papm::{exact_ot, sinkhorn, CostMatrix, EpsilonRule, SinkhornConfig};

pub fn run_example() -> papm::Result<()> {
    let cost = CostMatrix::new(2, 3, vec![1.0, 4.0, 2.0, 3.0, 1.0, 5.0])?;
    let source = [0.6, 0.4];
    let target = [0.3, 0.5, 0.2];

    let exact = exact_ot(&cost, &source, &target)?;
    println!("exact optimum {:.6}", exact.value);
    for (i, row) in exact.plan.chunks(3).enumerate() {
        println!("  row {i}: {row:?}");
    }

    for frac in [1e-1, 1e-2, 1e-3] {
        let cfg = SinkhornConfig {
            epsilon: EpsilonRule::RelativeMax(frac),
            max_iters: 20_000,
            marginal_tol: 1e-9,
            epsilon_schedule: Some(0.9),
            newton_steps: 0,
        };
        let sol = sinkhorn(&cost, &source, &target, &cfg)?;
        println!(
            "eps {:.4}: value {:.6} (gap {:.2e}), converged {}",
            sol.epsilon,
            sol.value,
            (sol.value - exact.value) / exact.value,
            sol.converged
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
