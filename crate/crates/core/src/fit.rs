//! Fits a free nonnegative map directly against a target-map loss.
//!
//! The map is parameterized as `A = theta^2` and `theta` follows gradient
//! descent, projected onto `theta >= 0`, with a fixed or slowly decaying
//! step size. Since `theta` and `-theta` give the same map the projection only removes the sign
//! ambiguity; it also keeps a pixel whose gradient step would overshoot
//! zero from growing again.
//!
//! Transport costs such as GGD-L2 reach `1e10` on a 64 x 64 grid, so the
//! raw gradient can be many orders larger than the count term's. The step
//! is taken on the gradient rescaled to norm at most `clip`. Rescaling the
//! whole vector (rather than clipping components) matters: the transport
//! term is invariant to the scale of `A`, so its gradient is orthogonal to
//! `theta` and a step of length `h` raises the mass by `h^2`. Clipping
//! each component would let that growth scale with the pixel count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::CostSpec;
use crate::error::{PapmError, Result};
use crate::kernel::{generate_hd_papm, l2_loss, KernelSpec};
use crate::loss::{AlPapmLoss, DEFAULT_LAMBDA};
use crate::ot::SinkhornConfig;
use crate::types::{GridMap, Point, PointSet, Shape};

/// Fixed-point iterations per solve used by [`FitLoss::al_papm_default`].
pub const FIT_SINKHORN_ITERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitLoss {
    /// Per-pixel L2 against a generated target map.
    HdL2(KernelSpec),
    AlPapm {
        cost: CostSpec,
        sinkhorn: SinkhornConfig,
        lambda: f64,
    },
}

impl FitLoss {
    /// Solves are warm-started from the previous step, so a short
    /// fixed-point budget before the Newton refinement is enough.
    pub fn al_papm_default() -> Self {
        FitLoss::AlPapm {
            cost: CostSpec::default(),
            sinkhorn: SinkhornConfig {
                max_iters: FIT_SINKHORN_ITERS,
                ..SinkhornConfig::default()
            },
            lambda: DEFAULT_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitInit {
    /// Every pixel starts at `n / m`.
    UniformMassN,
    /// `n / m` scaled per pixel by a factor drawn from `[0.5, 1.5)`.
    SeededRandom(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub loss: FitLoss,
    pub steps: usize,
    pub step_size: f64,
    pub init: FitInit,
    /// Bound on the Euclidean norm of the parameter gradient; a longer
    /// gradient is rescaled to this length before the step.
    pub clip: Option<f64>,
    /// Step `t` uses `step_size / sqrt(1 + t / decay)`; `None` keeps the
    /// step fixed. The count term is nonsmooth, and a fixed step leaves the
    /// loss oscillating at a level proportional to the step.
    pub decay: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            loss: FitLoss::al_papm_default(),
            steps: 2000,
            step_size: 0.05,
            init: FitInit::UniformMassN,
            clip: Some(1.0),
            decay: Some(DEFAULT_DECAY),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub map: GridMap,
    /// Loss at the start of each step.
    pub trace: Vec<f64>,
    /// Loss of the returned map.
    pub final_loss: f64,
}

pub const DEFAULT_DECAY: f64 = 5.0;

/// Divergence threshold relative to the initial loss.
const DIVERGENCE_FACTOR: f64 = 1e3;

pub fn fit_map(points: &PointSet, grid: Shape, cfg: &FitConfig) -> Result<FitResult> {
    if points.is_empty() {
        return Err(PapmError::invalid("points", "fitting needs n >= 1"));
    }
    if cfg.steps == 0 {
        return Err(PapmError::invalid("steps", "must be >= 1"));
    }
    if !(cfg.step_size.is_finite() && cfg.step_size > 0.0) {
        return Err(PapmError::invalid("step_size", "must be > 0"));
    }
    points.check_extent(grid)?;
    // canonical order makes the result independent of annotation order
    let points = canonical_order(points);

    let m = grid.len();
    let n = points.count() as f64;
    let base = n / m as f64;
    let mut theta: Vec<f64> = match cfg.init {
        FitInit::UniformMassN => vec![base.sqrt(); m],
        FitInit::SeededRandom(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..m).map(|_| (base * rng.gen_range(0.5..1.5)).sqrt()).collect()
        }
    };

    let mut objective: Box<dyn FnMut(&GridMap) -> Result<(f64, Vec<f64>)>> = match cfg.loss {
        FitLoss::HdL2(spec) => {
            let target = generate_hd_papm(&points, &spec)?;
            Box::new(move |map: &GridMap| {
                let (v, g) = l2_loss(map, &target)?;
                Ok((v, g.into_values()))
            })
        }
        FitLoss::AlPapm {
            cost,
            sinkhorn,
            lambda,
        } => {
            let mut loss = AlPapmLoss::new(cost, sinkhorn, lambda)?;
            let pts = points.clone();
            Box::new(move |map: &GridMap| {
                let b = loss.evaluate(&pts, map, true)?;
                Ok((b.total, b.grad.into_values()))
            })
        }
    };

    let to_map = |theta: &[f64]| GridMap::from_parts(grid, theta.iter().map(|t| t * t).collect());
    let mut trace = Vec::with_capacity(cfg.steps);
    let (mut value, mut grad) = objective(&to_map(&theta))?;
    let limit = DIVERGENCE_FACTOR * value.max(f64::MIN_POSITIVE);
    for step in 0..cfg.steps {
        trace.push(value);
        if !value.is_finite() || value > limit {
            return Err(PapmError::Diverged {
                step,
                loss: value,
                limit,
                trace,
            });
        }
        // d loss / d theta = 2 theta g
        let mut dir: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| 2.0 * t * g).collect();
        if let Some(c) = cfg.clip {
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > c {
                dir.iter_mut().for_each(|v| *v *= c / norm);
            }
        }
        let eta = match cfg.decay {
            Some(tau) => cfg.step_size / (1.0 + step as f64 / tau).sqrt(),
            None => cfg.step_size,
        };
        let candidate: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| (t - eta * d).max(0.0)).collect();
        theta = candidate;
        (value, grad) = objective(&to_map(&theta))?;
    }
    Ok(FitResult {
        map: to_map(&theta),
        trace,
        final_loss: value,
    })
}

fn canonical_order(points: &PointSet) -> PointSet {
    let mut sorted: Vec<Point> = points.points().to_vec();
    sorted.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    PointSet::new(points.width(), points.height(), sorted).expect("same points, same extent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_config() {
        let pts = PointSet::new(4, 4, vec![Point::new(1.0, 1.0)]).unwrap();
        let grid = pts.shape();
        let bad_steps = FitConfig {
            steps: 0,
            ..Default::default()
        };
        assert!(fit_map(&pts, grid, &bad_steps).is_err());
        let bad_step = FitConfig {
            step_size: -1.0,
            ..Default::default()
        };
        assert!(fit_map(&pts, grid, &bad_step).is_err());
        let empty = PointSet::empty(4, 4).unwrap();
        assert!(fit_map(&empty, grid, &FitConfig::default()).is_err());
        assert!(fit_map(&pts, Shape::new(3, 4), &FitConfig::default()).is_err());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let pts = PointSet::new(6, 6, vec![Point::new(3.0, 3.0)]).unwrap();
        let cfg = FitConfig {
            steps: 3,
            init: FitInit::SeededRandom(11),
            ..Default::default()
        };
        let a = fit_map(&pts, pts.shape(), &cfg).unwrap();
        let b = fit_map(&pts, pts.shape(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_aborts_with_trace() {
        let pts = PointSet::new(6, 6, vec![Point::new(3.0, 3.0)]).unwrap();
        let spec = KernelSpec::default();
        let cfg = FitConfig {
            loss: FitLoss::HdL2(spec),
            steps: 50,
            step_size: 1e6,
            init: FitInit::UniformMassN,
            clip: None,
            decay: None,
        };
        match fit_map(&pts, pts.shape(), &cfg) {
            Err(PapmError::Diverged { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
