//! Shared value types.
//!
//! Coordinates are continuous pixel units. Pixel `(row i, col j)` covers
//! `[j, j + 1) x [i, i + 1)` and has its center at `(j + 0.5, i + 0.5)`,
//! so a point at `(4.5, 4.5)` sits exactly on the center of pixel `(4, 4)`.

use crate::error::{PapmError, Result};

/// A 2-D position in pixel units, `x` along columns and `y` along rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Ground-truth point annotations bound to an image extent.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    width: u32,
    height: u32,
    points: Vec<Point>,
}

impl PointSet {
    /// Validates that the extent is positive and every point lies in
    /// `[0, width) x [0, height)`.
    pub fn new(width: u32, height: u32, points: Vec<Point>) -> Result<Self> {
        if width == 0 {
            return Err(PapmError::InvalidExtent {
                field: "image_width",
                value: 0,
            });
        }
        if height == 0 {
            return Err(PapmError::InvalidExtent {
                field: "image_height",
                value: 0,
            });
        }
        for (index, p) in points.iter().enumerate() {
            let inside = p.x.is_finite()
                && p.y.is_finite()
                && p.x >= 0.0
                && p.y >= 0.0
                && p.x < f64::from(width)
                && p.y < f64::from(height);
            if !inside {
                return Err(PapmError::OutOfExtent {
                    index,
                    x: p.x,
                    y: p.y,
                    width,
                    height,
                });
            }
        }
        Ok(PointSet {
            width,
            height,
            points,
        })
    }

    pub fn empty(width: u32, height: u32) -> Result<Self> {
        Self::new(width, height, Vec::new())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Grid shape matching the image extent at stride 1.
    pub fn shape(&self) -> Shape {
        Shape::new(self.height as usize, self.width as usize)
    }

    /// Pixel containing point `index` (floor of its coordinates).
    pub fn containing_pixel(&self, index: usize) -> (usize, usize) {
        let p = self.points[index];
        (p.y.floor() as usize, p.x.floor() as usize)
    }

    pub(crate) fn check_extent(&self, shape: Shape) -> Result<()> {
        if shape != self.shape() {
            return Err(PapmError::ShapeMismatch {
                left_rows: self.height as usize,
                left_cols: self.width as usize,
                right_rows: shape.rows,
                right_cols: shape.cols,
            });
        }
        Ok(())
    }
}

/// Grid dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center of pixel `(row, col)` in the point coordinate frame.
    pub fn center(&self, row: usize, col: usize) -> Point {
        Point::new(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// Center of the pixel at row-major index `idx`.
    pub fn center_of_index(&self, idx: usize) -> Point {
        self.center(idx / self.cols, idx % self.cols)
    }

    pub(crate) fn check_same(&self, other: Shape) -> Result<()> {
        if *self != other {
            return Err(PapmError::ShapeMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        Ok(())
    }
}

/// A real-valued field on a pixel grid, row-major. Used for gradients,
/// which may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    shape: Shape,
    values: Vec<f64>,
}

impl Field {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(PapmError::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(PapmError::invalid(
                "values",
                format!("value at index {bad} is not finite"),
            ));
        }
        Ok(Field {
            shape: Shape::new(rows, cols),
            values,
        })
    }

    pub fn zeros(shape: Shape) -> Self {
        Field {
            shape,
            values: vec![0.0; shape.len()],
        }
    }

    pub(crate) fn from_parts(shape: Shape, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), values.len());
        Field { shape, values }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.shape.cols + col]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A dense nonnegative map on a pixel grid (target maps, predictions).
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    field: Field,
}

impl GridMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_field(Field::new(rows, cols, values)?)
    }

    pub fn from_field(field: Field) -> Result<Self> {
        if let Some(bad) = field.values.iter().position(|v| *v < 0.0) {
            return Err(PapmError::invalid(
                "values",
                format!("value at index {bad} is negative"),
            ));
        }
        Ok(GridMap { field })
    }

    pub fn zeros(shape: Shape) -> Self {
        GridMap {
            field: Field::zeros(shape),
        }
    }

    pub(crate) fn from_parts(shape: Shape, values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| *v >= 0.0));
        GridMap {
            field: Field::from_parts(shape, values),
        }
    }

    pub fn shape(&self) -> Shape {
        self.field.shape
    }

    pub fn rows(&self) -> usize {
        self.field.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.field.shape.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.field.get(row, col)
    }

    /// Sum of all values in row-major order.
    pub fn total_mass(&self) -> f64 {
        self.field.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.field.values.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn as_field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    /// Maps with each annotation's unit mass placed on its containing pixel.
    pub fn rasterize(points: &PointSet) -> GridMap {
        let shape = points.shape();
        let mut values = vec![0.0; shape.len()];
        for idx in 0..points.count() {
            let (r, c) = points.containing_pixel(idx);
            values[r * shape.cols + c] += 1.0;
        }
        GridMap::from_parts(shape, values)
    }
}

/// Bandwidth and shape of an isotropic generalized Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdParams {
    sigma: f64,
    shape_s: f64,
}

impl GgdParams {
    /// Default bandwidth and shape for hand-designed target maps.
    pub const HD_DEFAULT: GgdParams = GgdParams {
        sigma: 4.0,
        shape_s: 8.0,
    };

    /// Default bandwidth and shape for the transport cost.
    pub const AL_DEFAULT: GgdParams = GgdParams {
        sigma: 16.0,
        shape_s: 2.0,
    };

    pub fn new(sigma: f64, shape_s: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(PapmError::invalid("sigma", format!("{sigma} must be > 0")));
        }
        if !(shape_s.is_finite() && shape_s > 0.0) {
            return Err(PapmError::invalid(
                "shape",
                format!("{shape_s} must be > 0"),
            ));
        }
        Ok(GgdParams { sigma, shape_s })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn shape_s(&self) -> f64 {
        self.shape_s
    }

    /// `(d^2 / 2 sigma^2)^(s/2)`, the exponent shared by kernel and cost.
    pub fn exponent(&self, d: f64) -> f64 {
        let u = d * d / (2.0 * self.sigma * self.sigma);
        if self.shape_s == 2.0 {
            u
        } else {
            u.powf(self.shape_s / 2.0)
        }
    }
}
