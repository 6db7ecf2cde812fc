// Point localization from a map: local maxima above a fraction of the
// peak value, greedily matched to annotations within a radius.

use papm::{generate_hd_papm, localize_and_match, KernelSpec, Point, PointSet};

pub fn run_example() -> papm::Result<()> {
    let truth = PointSet::new(
        64,
        48,
        vec![
            Point::new(10.5, 10.5),
            Point::new(40.2, 12.7),
            Point::new(22.0, 35.3),
            Point::new(55.5, 40.5),
        ],
    )?;
    let map = generate_hd_papm(&truth, &KernelSpec::default())?;
    let loc = localize_and_match(&map, &truth, 0.5, 4.0);
    for &(p, t, d) in &loc.matches {
        let (a, b) = (loc.predicted[p], truth.points()[t]);
        println!("peak ({:.1}, {:.1}) -> truth ({:.1}, {:.1}) at {d:.3}", a.x, a.y, b.x, b.y);
    }
    println!(
        "precision {:.3} recall {:.3} f1 {:.3}",
        loc.precision, loc.recall, loc.f1
    );

    // one annotation missing from the reference: a false positive
    let partial = PointSet::new(64, 48, truth.points()[..3].to_vec())?;
    let loc = localize_and_match(&map, &partial, 0.5, 4.0);
    println!("against 3 of 4 annotations: precision {:.3} recall {:.3}", loc.precision, loc.recall);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
