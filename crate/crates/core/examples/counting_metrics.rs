// Count metrics over a small evaluation set: MAE, MSE (root mean square)
// and the grid average mean absolute error at increasing levels.

use papm::{game, generate_hd_papm, mae_mse, EvalRecord, GridMap, KernelSpec, Point, PointSet};

pub fn run_example() -> papm::Result<()> {
    let records = [
        EvalRecord::new("a", 101.5, 100),
        EvalRecord::new("b", 47.0, 52),
        EvalRecord::new("c", 12.2, 12),
    ];
    let (mae, mse) = mae_mse(&records)?;
    println!("MAE {mae:.4}  MSE {mse:.4}");

    // right total count, wrong place: GAME grows with the level
    let points = PointSet::new(32, 32, vec![Point::new(6.0, 6.0), Point::new(25.0, 24.0)])?;
    let shifted = PointSet::new(32, 32, vec![Point::new(14.0, 6.0), Point::new(25.0, 17.0)])?;
    let pred = generate_hd_papm(&shifted, &KernelSpec::default())?;
    for level in 0..=3 {
        println!("GAME({level}) = {:.4}", game(&pred, &points, level)?);
    }

    let exact = GridMap::rasterize(&points);
    assert_eq!(game(&exact, &points, 3)?, 0.0);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
