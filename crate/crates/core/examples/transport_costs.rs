// Transport cost families and the ratio between the GGD-L2 cost and the
// squared Euclidean cost, which grows like `exp(d^2 / 2 sigma^2)`.

use papm::{build_cost_matrix, cost, CostSpec, GgdParams, Point, PointSet, Shape};

pub fn run_example() -> papm::Result<()> {
    let ggd = CostSpec::ggd_l2(GgdParams::new(16.0, 2.0)?);
    let l2 = CostSpec::squared_euclidean();
    let power = CostSpec::power_ratio(16.0, 4.0)?;

    println!("{:>4} {:>14} {:>10} {:>10} {:>10}", "d", "ggd-l2", "l2", "ratio", "power");
    for d in [1.0, 4.0, 8.0, 16.0, 32.0, 48.0] {
        let (a, b) = (cost(d, &ggd), cost(d, &l2));
        println!("{d:>4} {a:>14.4} {b:>10.1} {:>10.4} {:>10.4}", a / b, cost(d, &power));
        assert!(((a / b) - (d * d / 512.0).exp()).abs() < 1e-9 * (a / b));
    }

    let points = PointSet::new(8, 8, vec![Point::new(2.5, 2.5), Point::new(6.0, 5.0)])?;
    let matrix = build_cost_matrix(&points, Shape::new(8, 8), &ggd)?;
    println!(
        "cost matrix {}x{}: max {:.3}, median {:.3}, clamped {}",
        matrix.rows(),
        matrix.cols(),
        matrix.max(),
        matrix.median(),
        matrix.clamped()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
