// The adaptively learned objective on a small prediction: transport term,
// similarity-count term, gradient and solver diagnostics.

use papm::{al_papm_loss, CostSpec, GridMap, Point, PointSet, SinkhornConfig};

pub fn run_example() -> papm::Result<()> {
    let points = PointSet::new(8, 8, vec![Point::new(2.5, 2.5), Point::new(5.5, 4.5)])?;
    let cost = CostSpec::default();
    let cfg = SinkhornConfig::default();

    let exact = GridMap::rasterize(&points);
    let at_min = al_papm_loss(&points, &exact, &cost, &cfg, 0.1)?;
    println!("prediction on the annotations: total {:.3e}", at_min.total);

    // a blurred prediction that also misses a little mass
    let shape = exact.shape();
    let values = (0..shape.len())
        .map(|i| {
            let c = shape.center_of_index(i);
            points.points().iter().map(|p| 0.1 * (-p.distance_sq(&c) / 4.0).exp()).sum()
        })
        .collect();
    let blurred = GridMap::new(8, 8, values)?;
    let loss = al_papm_loss(&points, &blurred, &cost, &cfg, 0.1)?;
    let d = &loss.diagnostics;
    println!(
        "blurred prediction (mass {:.3}): ot {:.4} similarity {:.4} total {:.4}",
        blurred.total_mass(),
        loss.ot_term,
        loss.similarity_term,
        loss.total
    );
    println!(
        "solver: converged {:?} after {} iterations, violation {:.2e}, eps {:.4}",
        d.converged, d.iterations, d.marginal_violation, d.epsilon
    );
    println!("largest gradient component {:.4}", loss.grad.max_abs());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
