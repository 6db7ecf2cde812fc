//! Generalized Gaussian kernels and hand-designed target maps.

use statrs::function::gamma::gamma;

use crate::error::{PapmError, Result};
use crate::types::{Field, GgdParams, GridMap, PointSet, Shape};

/// How each per-point kernel is scaled before it is added to the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Multiply by the closed-form constant `K = s / (pi sigma^2 Gamma(1/s) 2^(1/s))`.
    /// The grid sum of such a kernel is generally not 1.
    Analytic,
    /// Divide by the kernel's sum over its in-image truncated support, so
    /// every annotation contributes exactly unit mass.
    #[default]
    DiscreteRenormalized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub params: GgdParams,
    pub normalization: Normalization,
    /// Kernel values below `truncation_tau` times the peak are dropped.
    pub truncation_tau: f64,
    /// Output grid stride in pixels. Stride `k` gives a
    /// `ceil(H / k) x ceil(W / k)` map whose cell centers sit at
    /// `((j + 0.5) k, (i + 0.5) k)`.
    pub stride: u32,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            params: GgdParams::HD_DEFAULT,
            normalization: Normalization::DiscreteRenormalized,
            truncation_tau: 1e-6,
            stride: 1,
        }
    }
}

impl KernelSpec {
    pub fn new(params: GgdParams, normalization: Normalization) -> Self {
        KernelSpec {
            params,
            normalization,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.truncation_tau > 0.0 && self.truncation_tau < 1.0) {
            return Err(PapmError::invalid(
                "truncation_tau",
                format!("{} must lie in (0, 1)", self.truncation_tau),
            ));
        }
        if self.stride == 0 {
            return Err(PapmError::invalid("stride", "must be >= 1"));
        }
        Ok(())
    }

    /// Distance at which the kernel falls to `truncation_tau`:
    /// `sigma * sqrt(2) * ln(1/tau)^(1/s)`.
    pub fn truncation_radius(&self) -> f64 {
        let p = &self.params;
        p.sigma() * std::f64::consts::SQRT_2 * (1.0 / self.truncation_tau).ln().powf(1.0 / p.shape_s())
    }
}

/// Unnormalized kernel `exp(-(d^2 / 2 sigma^2)^(s/2))`.
pub fn kernel_value(d: f64, params: &GgdParams) -> f64 {
    (-params.exponent(d)).exp()
}

/// Closed-form normalization constant for `D = 2` and identity scatter,
/// `s / (pi sigma^2 Gamma(1/s) 2^(1/s))`.
///
/// This is the constant as printed for the GGD density. The kernel's
/// integral over the plane is `4 pi sigma^2 Gamma(2/s) / s`, and the two
/// only cancel for particular shapes, so analytic maps carry a shape
/// dependent total mass per point.
pub fn analytic_constant(params: &GgdParams) -> f64 {
    let s = params.shape_s();
    let sigma = params.sigma();
    s / (std::f64::consts::PI * sigma * sigma * gamma(1.0 / s) * 2f64.powf(1.0 / s))
}

/// Sums one kernel per annotation onto a grid matching the point extent
/// (divided by `spec.stride`).
pub fn generate_hd_papm(points: &PointSet, spec: &KernelSpec) -> Result<GridMap> {
    spec.validate()?;
    let k = spec.stride as usize;
    let shape = Shape::new(
        (points.height() as usize).div_ceil(k),
        (points.width() as usize).div_ceil(k),
    );
    if shape.is_empty() {
        return Err(PapmError::invalid("grid", "zero-size grid"));
    }
    let step = k as f64;
    let radius = spec.truncation_radius();
    let analytic = analytic_constant(&spec.params);
    let mut values = vec![0.0; shape.len()];
    let mut support: Vec<(usize, f64)> = Vec::new();

    for p in points.points() {
        support.clear();
        let col_range = index_range(p.x, radius, step, shape.cols);
        let row_range = index_range(p.y, radius, step, shape.rows);
        for row in row_range.clone() {
            let cy = (row as f64 + 0.5) * step;
            for col in col_range.clone() {
                let cx = (col as f64 + 0.5) * step;
                let d = (cx - p.x).hypot(cy - p.y);
                if d <= radius {
                    support.push((row * shape.cols + col, kernel_value(d, &spec.params)));
                }
            }
        }
        match spec.normalization {
            Normalization::Analytic => {
                for &(idx, v) in &support {
                    values[idx] += analytic * v;
                }
            }
            Normalization::DiscreteRenormalized => {
                let sum: f64 = support.iter().map(|(_, v)| v).sum();
                if sum > 0.0 {
                    for &(idx, v) in &support {
                        values[idx] += v / sum;
                    }
                } else {
                    // no cell center inside the truncation disk
                    let row = ((p.y / step) as usize).min(shape.rows - 1);
                    let col = ((p.x / step) as usize).min(shape.cols - 1);
                    values[row * shape.cols + col] += 1.0;
                }
            }
        }
    }
    Ok(GridMap::from_parts(shape, values))
}

fn index_range(coord: f64, radius: f64, step: f64, len: usize) -> std::ops::Range<usize> {
    let lo = ((coord - radius) / step - 0.5).ceil().max(0.0);
    let hi = ((coord + radius) / step - 0.5).floor();
    if hi < 0.0 || lo as usize >= len {
        return 0..0;
    }
    lo as usize..(hi as usize + 1).min(len)
}

/// Per-pixel `0.5 * sum (target - pred)^2` and its gradient `pred - target`.
pub fn l2_loss(pred: &GridMap, target: &GridMap) -> Result<(f64, Field)> {
    pred.shape().check_same(target.shape())?;
    let grad: Vec<f64> = pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| p - t)
        .collect();
    let value = 0.5 * grad.iter().map(|g| g * g).sum::<f64>();
    Ok((value, Field::from_parts(pred.shape(), grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Point;

    fn params(sigma: f64, s: f64) -> GgdParams {
        GgdParams::new(sigma, s).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_value(0.0, &params(3.0, 0.7)), 1.0);
        assert_eq!(kernel_value(4.0, &params(4.0, 2.0)), (-0.5f64).exp());
        // exp(-(0.5)^4)
        let v = kernel_value(4.0, &params(4.0, 8.0));
        assert!((v - 0.939_413_062_813_475_8).abs() < 1e-15, "{v}");
    }

    #[test]
    fn crossover_value_is_independent_of_shape() {
        let sigma = 3.0;
        let d = sigma * std::f64::consts::SQRT_2;
        for s in [0.5, 1.0, 2.0, 8.0, 16.0] {
            assert!((kernel_value(d, &params(sigma, s)) - (-1f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn analytic_constant_at_gaussian_shape() {
        // s = 2: K = 2 / (pi sigma^2 sqrt(pi) sqrt(2))
        let k = analytic_constant(&params(1.0, 2.0));
        let expected = 2.0 / (std::f64::consts::PI * std::f64::consts::PI.sqrt() * 2f64.sqrt());
        assert!((k - expected).abs() < 1e-14);
    }

    #[test]
    fn truncation_radius_hits_tau() {
        let spec = KernelSpec::default();
        let r = spec.truncation_radius();
        assert!((kernel_value(r, &spec.params) - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn empty_point_set_gives_zero_map() {
        let pts = PointSet::empty(5, 7).unwrap();
        let map = generate_hd_papm(&pts, &KernelSpec::default()).unwrap();
        assert_eq!(map.shape(), Shape::new(7, 5));
        assert_eq!(map.total_mass(), 0.0);
    }

    #[test]
    fn single_centered_point() {
        let pts = PointSet::new(9, 9, vec![Point::new(4.5, 4.5)]).unwrap();
        let map = generate_hd_papm(&pts, &KernelSpec::default()).unwrap();
        assert!((map.total_mass() - 1.0).abs() < 1e-9);
        let argmax = map
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 4 * 9 + 4);
    }

    #[test]
    fn corner_point_keeps_unit_mass() {
        let pts = PointSet::new(10, 6, vec![Point::new(0.01, 5.99)]).unwrap();
        let map = generate_hd_papm(&pts, &KernelSpec::default()).unwrap();
        assert!((map.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_bandwidth_falls_back_to_containing_pixel() {
        let spec = KernelSpec::new(params(0.01, 2.0), Normalization::DiscreteRenormalized);
        let pts = PointSet::new(4, 4, vec![Point::new(1.0, 2.0)]).unwrap();
        let map = generate_hd_papm(&pts, &spec).unwrap();
        assert_eq!(map.get(2, 1), 1.0);
        assert_eq!(map.total_mass(), 1.0);
    }

    #[test]
    fn stride_divides_grid_and_keeps_mass() {
        let spec = KernelSpec {
            stride: 4,
            ..Default::default()
        };
        let pts = PointSet::new(30, 17, vec![Point::new(3.0, 3.0), Point::new(28.0, 16.0)]).unwrap();
        let map = generate_hd_papm(&pts, &spec).unwrap();
        assert_eq!(map.shape(), Shape::new(5, 8));
        assert!((map.total_mass() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_mode_scales_by_constant() {
        let p = params(2.0, 2.0);
        let pts = PointSet::new(21, 21, vec![Point::new(10.5, 10.5)]).unwrap();
        let map = generate_hd_papm(&pts, &KernelSpec::new(p, Normalization::Analytic)).unwrap();
        assert!((map.get(10, 10) - analytic_constant(&p)).abs() < 1e-15);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let pts = PointSet::empty(4, 4).unwrap();
        for spec in [
            KernelSpec {
                truncation_tau: 1.0,
                ..Default::default()
            },
            KernelSpec {
                stride: 0,
                ..Default::default()
            },
        ] {
            assert!(generate_hd_papm(&pts, &spec).is_err());
        }
    }

    #[test]
    fn l2_loss_single_pixel_offset() {
        let target = GridMap::new(2, 2, vec![1.0, 0.0, 2.0, 0.5]).unwrap();
        let (v, g) = l2_loss(&target, &target).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.values().iter().all(|x| *x == 0.0));
        let pred = GridMap::new(2, 2, vec![1.0, 0.0, 2.25, 0.5]).unwrap();
        let (v, g) = l2_loss(&pred, &target).unwrap();
        assert_eq!(v, 0.5 * 0.25 * 0.25);
        assert_eq!(g.values(), &[0.0, 0.0, 0.25, 0.0]);
        assert!(l2_loss(&GridMap::zeros(Shape::new(1, 4)), &target).is_err());
    }
}
