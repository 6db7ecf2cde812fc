//! The adaptively learned objective `lambda * ot + similarity`.

use crate::cost::{build_cost_matrix, CostMatrix, CostSpec};
use crate::error::{PapmError, Result};
use crate::ot::{
    normalize_measures, ot_gradient, sinkhorn_warm, transport_cost_gradient, SinkhornConfig, TransportSolution,
};
use crate::types::{Field, GridMap, PointSet};

/// Default weight of the transport term.
pub const DEFAULT_LAMBDA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `None` when the transport term was skipped.
    pub converged: Option<bool>,
    pub iterations: usize,
    pub marginal_violation: f64,
    pub epsilon: f64,
    pub clamped_costs: usize,
    pub degenerate: Option<&'static str>,
}

impl Diagnostics {
    fn skipped(reason: &'static str) -> Self {
        Diagnostics {
            converged: None,
            iterations: 0,
            marginal_violation: 0.0,
            epsilon: 0.0,
            clamped_costs: 0,
            degenerate: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub ot_term: f64,
    pub similarity_term: f64,
    pub total: f64,
    pub lambda: f64,
    pub grad: Field,
    pub diagnostics: Diagnostics,
}

/// `| n - |A| | + n * | P/n - A/|A| |_1`, with `P` the annotations
/// rasterized onto their containing pixels, and its subgradient in `A`.
/// Sign ties take subgradient 0.
pub fn similarity_count_loss(points: &PointSet, pred: &GridMap) -> Result<(f64, Field)> {
    points.check_extent(pred.shape())?;
    let n = points.count() as f64;
    let mass = pred.total_mass();
    let shape = pred.shape();
    let sign = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let count_sign = sign(mass - n);
    let count_term = (n - mass).abs();

    if points.is_empty() || mass <= 0.0 {
        let shape_term = if points.is_empty() { 0.0 } else { n };
        return Ok((
            count_term + shape_term,
            Field::from_parts(shape, vec![count_sign; shape.len()]),
        ));
    }

    let raster = GridMap::rasterize(points);
    let mut shape_term = 0.0;
    let mut signs = Vec::with_capacity(shape.len());
    let mut weighted = 0.0;
    for (p, a) in raster.values().iter().zip(pred.values()) {
        let b = a / mass;
        let r = p / n - b;
        shape_term += r.abs();
        let s = sign(r);
        weighted += s * b;
        signs.push(s);
    }
    let grad = signs
        .into_iter()
        .map(|s| count_sign + n / mass * (weighted - s))
        .collect();
    Ok((count_term + n * shape_term, Field::from_parts(shape, grad)))
}

/// How the transport term is differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientRoute {
    /// Exact derivative of `<C, T>` for the entropic plan, so `grad` is the
    /// gradient of `total`.
    #[default]
    Exact,
    /// Target duals (envelope theorem): the gradient of the regularized
    /// transport value, which differs from the `<C, T>` gradient by `O(eps)`.
    Envelope,
}

/// Reusable per-instance state: the cost matrix and the last duals.
#[derive(Debug, Clone)]
pub struct AlPapmLoss {
    pub cost_spec: CostSpec,
    pub sinkhorn: SinkhornConfig,
    pub lambda: f64,
    pub route: GradientRoute,
    cost: Option<CostMatrix>,
    warm: Option<(Vec<f64>, Vec<f64>)>,
}

impl AlPapmLoss {
    pub fn new(cost_spec: CostSpec, sinkhorn: SinkhornConfig, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(PapmError::invalid("lambda", format!("{lambda} must be >= 0")));
        }
        sinkhorn.validate()?;
        Ok(AlPapmLoss {
            cost_spec,
            sinkhorn,
            lambda,
            route: GradientRoute::default(),
            cost: None,
            warm: None,
        })
    }

    /// Evaluates the loss. With `warm_start` the previous duals seed the
    /// solver; the cost matrix is cached across calls with the same points.
    pub fn evaluate(&mut self, points: &PointSet, pred: &GridMap, warm_start: bool) -> Result<LossBreakdown> {
        points.check_extent(pred.shape())?;
        let (similarity_term, sim_grad) = similarity_count_loss(points, pred)?;
        let measures = match normalize_measures(points, pred) {
            Ok(m) => m,
            Err(PapmError::DegenerateMeasure(reason)) => {
                return Ok(LossBreakdown {
                    ot_term: 0.0,
                    similarity_term,
                    total: similarity_term,
                    lambda: self.lambda,
                    grad: sim_grad,
                    diagnostics: Diagnostics::skipped(reason),
                });
            }
            Err(e) => return Err(e),
        };
        let fresh = match &self.cost {
            Some(c) => c.rows() != points.count() || c.cols() != pred.values().len(),
            None => true,
        };
        if fresh {
            self.cost = Some(build_cost_matrix(points, pred.shape(), &self.cost_spec)?);
            self.warm = None;
        }
        let cost = self.cost.as_ref().expect("cost matrix built above");
        let warm = if warm_start {
            self.warm.as_ref().map(|(f, g)| (f.as_slice(), g.as_slice()))
        } else {
            None
        };
        let sol = sinkhorn_warm(cost, &measures.source, &measures.target, &self.sinkhorn, warm)?;
        let ot_grad = match self.route {
            GradientRoute::Exact => transport_cost_gradient(&sol, cost, &measures.source, pred)?,
            GradientRoute::Envelope => ot_gradient(&sol, pred)?,
        };
        let grad = ot_grad
            .values()
            .iter()
            .zip(sim_grad.values())
            .map(|(o, s)| self.lambda * o + s)
            .collect();
        let diagnostics = Diagnostics {
            converged: Some(sol.converged),
            iterations: sol.iterations_used,
            marginal_violation: sol.marginal_violation,
            epsilon: sol.epsilon,
            clamped_costs: cost.clamped(),
            degenerate: None,
        };
        let ot_term = sol.value;
        self.store_duals(sol);
        Ok(LossBreakdown {
            ot_term,
            similarity_term,
            total: self.lambda * ot_term + similarity_term,
            lambda: self.lambda,
            grad: Field::from_parts(pred.shape(), grad),
            diagnostics,
        })
    }

    /// Drops the cached cost matrix, e.g. when the points change.
    pub fn reset(&mut self) {
        self.cost = None;
        self.warm = None;
    }

    fn store_duals(&mut self, sol: TransportSolution) {
        self.warm = Some((sol.dual_source, sol.dual_target));
    }
}

pub fn al_papm_loss(
    points: &PointSet,
    pred: &GridMap,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
    lambda: f64,
) -> Result<LossBreakdown> {
    AlPapmLoss::new(*cost, *cfg, lambda)?.evaluate(points, pred, false)
}
