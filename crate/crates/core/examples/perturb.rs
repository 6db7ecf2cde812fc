// Seeded annotation noise. Each point draws from its own stream, so a
// point's displacement does not depend on how many points precede it.

use papm::{perturb, PerturbMode, PerturbSpec, Point, PointSet};

pub fn run_example() -> papm::Result<()> {
    let points = PointSet::new(
        64,
        64,
        vec![Point::new(32.0, 32.0), Point::new(2.0, 60.0), Point::new(50.0, 10.0)],
    )?;
    for mode in [PerturbMode::ExactRadius, PerturbMode::UniformDisk] {
        let spec = PerturbSpec {
            magnitude: 8.0,
            mode,
            seed: 7,
        };
        let out = perturb(&points, &spec)?;
        println!("{mode:?}: {} clamped at the border", out.clamped);
        for (a, b) in points.points().iter().zip(out.points.points()) {
            println!("  ({:5.1}, {:5.1}) -> ({:5.1}, {:5.1})  moved {:.3}", a.x, a.y, b.x, b.y, a.distance(b));
        }
    }

    let spec = PerturbSpec {
        magnitude: 8.0,
        mode: PerturbMode::ExactRadius,
        seed: 7,
    };
    assert_eq!(perturb(&points, &spec)?, perturb(&points, &spec)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
