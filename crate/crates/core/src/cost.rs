//! Transport costs between annotation points and pixel centers.

use crate::error::{PapmError, Result};
use crate::types::{GgdParams, PointSet, Shape};

/// Costs above this are clamped unless a [`CostSpec`] overrides it.
pub const DEFAULT_COST_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostFamily {
    /// `d^2 * exp((d^2 / 2 sigma^2)^(s/2))`: squared distance divided by a GGD kernel.
    GgdL2(GgdParams),
    /// `d^2`
    SquaredEuclidean,
    /// `(d / scale)^exponent`
    PowerRatio { scale: f64, exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSpec {
    pub family: CostFamily,
    pub cap: f64,
}

impl CostSpec {
    pub fn new(family: CostFamily) -> Self {
        CostSpec {
            family,
            cap: DEFAULT_COST_CAP,
        }
    }

    pub fn ggd_l2(params: GgdParams) -> Self {
        Self::new(CostFamily::GgdL2(params))
    }

    pub fn squared_euclidean() -> Self {
        Self::new(CostFamily::SquaredEuclidean)
    }

    pub fn power_ratio(scale: f64, exponent: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(PapmError::invalid("power_scale", format!("{scale} must be > 0")));
        }
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(PapmError::invalid(
                "power_exponent",
                format!("{exponent} must be > 0"),
            ));
        }
        Ok(Self::new(CostFamily::PowerRatio { scale, exponent }))
    }

    /// Cost before clamping; may be `inf` for far pixels under `GgdL2`.
    pub fn raw_cost(&self, d: f64) -> f64 {
        match self.family {
            CostFamily::GgdL2(params) => {
                if d == 0.0 {
                    0.0
                } else {
                    d * d * params.exponent(d).exp()
                }
            }
            CostFamily::SquaredEuclidean => d * d,
            CostFamily::PowerRatio { scale, exponent } => (d / scale).powf(exponent),
        }
    }

    /// Cost saturated at `self.cap`.
    pub fn cost(&self, d: f64) -> f64 {
        let c = self.raw_cost(d);
        if c > self.cap || c.is_nan() {
            self.cap
        } else {
            c
        }
    }
}

impl Default for CostSpec {
    fn default() -> Self {
        Self::ggd_l2(GgdParams::AL_DEFAULT)
    }
}

/// `cost(d, spec)` with the spec's cap applied.
pub fn cost(d: f64, spec: &CostSpec) -> f64 {
    spec.cost(d)
}

/// Dense `n x m` cost matrix, rows in point order, columns row-major pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    clamped: usize,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(PapmError::DimensionMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        if entries.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(PapmError::invalid("cost", "entries must be finite and >= 0"));
        }
        Ok(CostMatrix {
            rows,
            cols,
            entries,
            clamped: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    /// Number of entries saturated at the cost cap.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, c| m.max(*c))
    }

    pub fn median(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let mut sorted = self.entries.clone();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        if sorted.len() % 2 == 0 {
            0.5 * (sorted[mid - 1] + sorted[mid])
        } else {
            sorted[mid]
        }
    }
}

pub fn build_cost_matrix(points: &PointSet, grid: Shape, spec: &CostSpec) -> Result<CostMatrix> {
    if points.is_empty() {
        return Err(PapmError::invalid("points", "cost matrix needs n >= 1"));
    }
    if grid.is_empty() {
        return Err(PapmError::invalid("grid", "cost matrix needs m >= 1"));
    }
    let mut clamped = 0;
    let mut entries = Vec::with_capacity(points.count() * grid.len());
    for p in points.points() {
        for idx in 0..grid.len() {
            let raw = spec.raw_cost(grid.center_of_index(idx).distance(p));
            if raw > spec.cap || raw.is_nan() {
                clamped += 1;
                entries.push(spec.cap);
            } else {
                entries.push(raw);
            }
        }
    }
    Ok(CostMatrix {
        rows: points.count(),
        cols: grid.len(),
        entries,
        clamped,
    })
}
