//! Annotation displacement and the robustness sweep built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PapmError, Result};
use crate::metrics::game;
use crate::types::{GridMap, Point, PointSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerturbMode {
    /// Displacement of exactly `magnitude` in a uniform direction.
    #[default]
    ExactRadius,
    /// Displacement uniform over the disk of radius `magnitude`.
    UniformDisk,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbSpec {
    pub magnitude: f64,
    pub mode: PerturbMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub points: PointSet,
    /// Number of points pulled back inside the image.
    pub clamped: usize,
}

/// Point `index` draws from its own ChaCha stream keyed by `(seed, index)`.
pub fn perturb(points: &PointSet, spec: &PerturbSpec) -> Result<Perturbed> {
    if !(spec.magnitude.is_finite() && spec.magnitude >= 0.0) {
        return Err(PapmError::invalid(
            "magnitude",
            format!("{} must be finite and >= 0", spec.magnitude),
        ));
    }
    let width = f64::from(points.width());
    let height = f64::from(points.height());
    let mut clamped = 0;
    let moved = points
        .points()
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let (dx, dy) = displacement(spec, index as u64);
            let (x, cx) = clamp_inside(p.x + dx, width);
            let (y, cy) = clamp_inside(p.y + dy, height);
            if cx || cy {
                clamped += 1;
            }
            Point::new(x, y)
        })
        .collect();
    Ok(Perturbed {
        points: PointSet::new(points.width(), points.height(), moved)?,
        clamped,
    })
}

fn displacement(spec: &PerturbSpec, index: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let angle = rng.gen::<f64>() * std::f64::consts::TAU;
    let radius = match spec.mode {
        PerturbMode::ExactRadius => spec.magnitude,
        PerturbMode::UniformDisk => spec.magnitude * rng.gen::<f64>().sqrt(),
    };
    (radius * angle.cos(), radius * angle.sin())
}

/// Clamps to `[0, extent)`; the flag reports whether clamping happened.
fn clamp_inside(v: f64, extent: f64) -> (f64, bool) {
    if v < 0.0 {
        (0.0, true)
    } else if v >= extent {
        (f64::from_bits(extent.to_bits() - 1), true)
    } else {
        (v, false)
    }
}

/// How a fitted map is scored against the clean annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    /// `|total_mass - n|`
    Count,
    /// Tile-wise count error over a `2^L x 2^L` grid.
    Game(u32),
}

impl SweepMetric {
    pub fn evaluate(&self, map: &GridMap, clean: &PointSet) -> Result<f64> {
        match *self {
            SweepMetric::Count => Ok((map.total_mass() - clean.count() as f64).abs()),
            SweepMetric::Game(level) => game(map, clean, level),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub magnitude: f64,
    /// Mean error over seeds that completed.
    pub mae: f64,
    /// Root mean squared error over seeds that completed.
    pub mse: f64,
    pub completed: usize,
    pub failures: Vec<(u64, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub mode: PerturbMode,
    pub metric: SweepMetric,
    /// Worker threads for independent cells; 0 or 1 runs sequentially.
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            mode: PerturbMode::ExactRadius,
            metric: SweepMetric::Game(2),
            threads: 0,
        }
    }
}

/// For every magnitude and seed: perturb, fit against the perturbed
/// points, score against the clean points. A failing cell is recorded in
/// its row and does not stop the sweep.
pub fn robustness_sweep<F>(
    points: &PointSet,
    fit: F,
    magnitudes: &[f64],
    seeds: &[u64],
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>>
where
    F: Fn(&PointSet) -> Result<GridMap> + Sync,
{
    if magnitudes.is_empty() || seeds.is_empty() {
        return Err(PapmError::invalid("sweep", "needs at least one magnitude and one seed"));
    }
    let cells: Vec<(usize, u64)> = (0..magnitudes.len())
        .flat_map(|mi| seeds.iter().map(move |&s| (mi, s)))
        .collect();
    let run_cell = |&(mi, seed): &(usize, u64)| -> Result<f64> {
        let spec = PerturbSpec {
            magnitude: magnitudes[mi],
            mode: cfg.mode,
            seed,
        };
        let noisy = perturb(points, &spec)?;
        let map = fit(&noisy.points)?;
        cfg.metric.evaluate(&map, points)
    };

    let outcomes: Vec<Result<f64>> = if cfg.threads > 1 {
        let chunk = cells.len().div_ceil(cfg.threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = cells
                .chunks(chunk)
                .map(|part| scope.spawn(|| part.iter().map(run_cell).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        })
    } else {
        cells.iter().map(run_cell).collect()
    };

    let mut rows: Vec<SweepRow> = magnitudes
        .iter()
        .map(|&magnitude| SweepRow {
            magnitude,
            mae: 0.0,
            mse: 0.0,
            completed: 0,
            failures: Vec::new(),
        })
        .collect();
    for ((mi, seed), outcome) in cells.iter().zip(outcomes) {
        let row = &mut rows[*mi];
        match outcome {
            Ok(err) => {
                row.mae += err;
                row.mse += err * err;
                row.completed += 1;
            }
            Err(e) => row.failures.push((*seed, e.to_string())),
        }
    }
    for row in &mut rows {
        if row.completed > 0 {
            let k = row.completed as f64;
            row.mae /= k;
            row.mse = (row.mse / k).sqrt();
        } else {
            row.mae = f64::NAN;
            row.mse = f64::NAN;
        }
    }
    Ok(rows)
}
