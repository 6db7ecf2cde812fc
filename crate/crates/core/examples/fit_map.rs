// A free nonnegative map fitted directly against each loss: the
// per-pixel L2 loss against a generated target, and the transport plus
// similarity objective against the annotations themselves.

use papm::{fit_map, game, FitConfig, FitLoss, GgdParams, KernelSpec, Normalization, Point, PointSet};

pub fn run_example() -> papm::Result<()> {
    let points = PointSet::new(16, 16, vec![Point::new(4.5, 4.5), Point::new(11.5, 10.5)])?;

    let kernel = KernelSpec::new(GgdParams::new(2.0, 8.0)?, Normalization::DiscreteRenormalized);
    let hd = FitConfig {
        loss: FitLoss::HdL2(kernel),
        steps: 400,
        step_size: 5.0,
        ..FitConfig::default()
    };
    let fitted = fit_map(&points, points.shape(), &hd)?;
    println!(
        "hd-l2: loss {:.3e} -> {:.3e}, mass {:.4}",
        fitted.trace[0],
        fitted.final_loss,
        fitted.map.total_mass()
    );

    let al = FitConfig {
        loss: FitLoss::al_papm_default(),
        steps: 150,
        ..FitConfig::default()
    };
    let fitted = fit_map(&points, points.shape(), &al)?;
    println!(
        "al-papm: loss {:.3} -> {:.3}, mass {:.4}, GAME(2) {:.4}",
        fitted.trace[0],
        fitted.final_loss,
        fitted.map.total_mass(),
        game(&fitted.map, &points, 2)?
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
