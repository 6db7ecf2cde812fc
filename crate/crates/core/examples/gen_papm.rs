// Hand-designed target maps: one GGD kernel per annotation, each
// renormalized to unit mass, written to and read back from a map file.

use papm::{generate_hd_papm, read_map, write_map, GgdParams, KernelSpec, MapFormat, Normalization, Point, PointSet};

pub fn run_example() -> papm::Result<()> {
    // one point sits on the image border
    let points = PointSet::new(
        48,
        32,
        vec![Point::new(10.0, 12.5), Point::new(30.2, 20.0), Point::new(47.9, 0.0)],
    )?;

    let spec = KernelSpec::default();
    let map = generate_hd_papm(&points, &spec)?;
    println!(
        "{}x{} map, sigma {} s {}: mass {:.12} for {} points",
        map.rows(),
        map.cols(),
        spec.params.sigma(),
        spec.params.shape_s(),
        map.total_mass(),
        points.count()
    );
    assert!((map.total_mass() - points.count() as f64).abs() < 1e-9);

    // the closed-form constant keeps the kernel shape but not the exact mass
    let analytic = KernelSpec::new(GgdParams::new(4.0, 8.0)?, Normalization::Analytic);
    let approx = generate_hd_papm(&points, &analytic)?;
    println!("analytic constant: mass {:.6}", approx.total_mass());

    let mut bytes = Vec::new();
    write_map(&map, &mut bytes, MapFormat::Binary)?;
    let back = read_map(bytes.as_slice())?;
    assert_eq!(back, map);
    println!("binary round trip: {} bytes, identical", bytes.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
