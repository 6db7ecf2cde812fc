// Robustness to annotation noise: perturb the annotations, fit a map
// against the noisy points, and score it against the clean ones.

use papm::{fit_map, robustness_sweep, CostSpec, FitConfig, FitLoss, Point, PointSet, SinkhornConfig, SweepConfig};

pub fn run_example() -> papm::Result<()> {
    let points = PointSet::new(
        24,
        24,
        vec![Point::new(5.5, 6.5), Point::new(17.5, 5.5), Point::new(11.5, 18.5)],
    )?;
    let magnitudes = [0.0, 3.0, 6.0];
    let seeds = [1, 2];

    for (name, cost) in [("ggd-l2", CostSpec::default()), ("l2", CostSpec::squared_euclidean())] {
        let cfg = FitConfig {
            loss: FitLoss::AlPapm {
                cost,
                sinkhorn: SinkhornConfig::default(),
                lambda: 0.1,
            },
            steps: 60,
            ..FitConfig::default()
        };
        let fit = |p: &PointSet| fit_map(p, p.shape(), &cfg).map(|r| r.map);
        let rows = robustness_sweep(&points, fit, &magnitudes, &seeds, &SweepConfig::default())?;
        for row in rows {
            println!(
                "{name:>6} magnitude {:>4}: mae {:.4} mse {:.4} ({} fits, {} failed)",
                row.magnitude,
                row.mae,
                row.mse,
                row.completed,
                row.failures.len()
            );
        }
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
