//! Counting and localization metrics.

use crate::error::{PapmError, Result};
use crate::types::{GridMap, Point, PointSet};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub id: String,
    pub estimated: f64,
    pub ground_truth: usize,
}

impl EvalRecord {
    pub fn new(id: impl Into<String>, estimated: f64, ground_truth: usize) -> Self {
        EvalRecord {
            id: id.into(),
            estimated,
            ground_truth,
        }
    }
}

/// Mean absolute count error and root mean squared count error.
pub fn mae_mse(records: &[EvalRecord]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(PapmError::EmptyRecords);
    }
    let n = records.len() as f64;
    let (abs, sq) = records.iter().fold((0.0, 0.0), |(a, s), r| {
        let e = (r.estimated - r.ground_truth as f64).abs();
        (a + e, s + e * e)
    });
    Ok((abs / n, (sq / n).sqrt()))
}

/// Tile boundaries `floor(k * len / tiles)` for `k = 0..=tiles`.
fn boundaries(len: usize, tiles: usize) -> Vec<usize> {
    (0..=tiles).map(|k| k * len / tiles).collect()
}

/// Sum over a `2^level x 2^level` tiling of `|tile mass - tile count|`.
/// Points are counted in the tile holding their containing pixel.
pub fn game(pred: &GridMap, points: &PointSet, level: u32) -> Result<f64> {
    points.check_extent(pred.shape())?;
    if level > 3 {
        return Err(PapmError::invalid("level", format!("{level} not in 0..=3")));
    }
    let tiles = 1usize << level;
    let (rows, cols) = (pred.rows(), pred.cols());
    if rows < tiles || cols < tiles {
        return Err(PapmError::GridTooSmall { rows, cols, tiles });
    }
    let rb = boundaries(rows, tiles);
    let cb = boundaries(cols, tiles);
    let tile_of = |b: &[usize], v: usize| b.partition_point(|&edge| edge <= v) - 1;

    let mut counts = vec![0usize; tiles * tiles];
    for idx in 0..points.count() {
        let (r, c) = points.containing_pixel(idx);
        counts[tile_of(&rb, r) * tiles + tile_of(&cb, c)] += 1;
    }
    let mut total = 0.0;
    for ti in 0..tiles {
        for tj in 0..tiles {
            let mut mass = 0.0;
            for r in rb[ti]..rb[ti + 1] {
                for c in cb[tj]..cb[tj + 1] {
                    mass += pred.get(r, c);
                }
            }
            total += (mass - counts[ti * tiles + tj] as f64).abs();
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted: Vec<Point>,
    /// `(predicted index, ground-truth index, distance)`
    pub matches: Vec<(usize, usize, f64)>,
}

/// Local maxima at or above `threshold * max`. Equal-valued neighbors form
/// one plateau, reported at its centroid when every pixel around it is
/// lower; a map that is one plateau has no peaks.
pub fn find_peaks(pred: &GridMap, threshold: f64) -> Vec<Point> {
    let max = pred.max_value();
    if max <= 0.0 {
        return Vec::new();
    }
    let floor = threshold * max;
    let (rows, cols) = (pred.rows(), pred.cols());
    let neighbors = |r: usize, c: usize| {
        (-1isize..=1)
            .flat_map(move |dr| (-1isize..=1).map(move |dc| (dr, dc)))
            .filter(|&d| d != (0, 0))
            .filter_map(move |(dr, dc)| {
                let (nr, nc) = (r.checked_add_signed(dr)?, c.checked_add_signed(dc)?);
                (nr < rows && nc < cols).then_some((nr, nc))
            })
    };
    let mut seen = vec![false; rows * cols];
    let mut peaks = Vec::new();
    for start in 0..rows * cols {
        let v = pred.values()[start];
        if seen[start] || v < floor || v <= 0.0 {
            continue;
        }
        seen[start] = true;
        let mut plateau = vec![(start / cols, start % cols)];
        let (mut higher, mut bordered) = (false, false);
        let mut k = 0;
        while k < plateau.len() {
            let (r, c) = plateau[k];
            k += 1;
            for (nr, nc) in neighbors(r, c) {
                let u = pred.get(nr, nc);
                if u == v {
                    if !seen[nr * cols + nc] {
                        seen[nr * cols + nc] = true;
                        plateau.push((nr, nc));
                    }
                } else {
                    bordered = true;
                    higher |= u > v;
                }
            }
        }
        if bordered && !higher {
            let len = plateau.len() as f64;
            let (sx, sy) = plateau.iter().fold((0.0, 0.0), |(sx, sy), &(r, c)| {
                let p = pred.shape().center(r, c);
                (sx + p.x, sy + p.y)
            });
            peaks.push(Point::new(sx / len, sy / len));
        }
    }
    peaks
}

/// Greedy one-to-one matching in ascending distance within `radius`.
pub fn match_points(predicted: &[Point], truth: &[Point], radius: f64) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let d = p.distance(t);
            if d <= radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_pred = vec![false; predicted.len()];
    let mut used_truth = vec![false; truth.len()];
    let mut matches = Vec::new();
    for (d, i, j) in pairs {
        if !used_pred[i] && !used_truth[j] {
            used_pred[i] = true;
            used_truth[j] = true;
            matches.push((i, j, d));
        }
    }
    matches
}

pub fn localize_and_match(
    pred: &GridMap,
    points: &PointSet,
    peak_threshold: f64,
    match_radius: f64,
) -> Localization {
    let predicted = find_peaks(pred, peak_threshold);
    let matches = match_points(&predicted, points.points(), match_radius);
    let hits = matches.len() as f64;
    let ratio = |den: usize| if den == 0 { 0.0 } else { hits / den as f64 };
    let precision = ratio(predicted.len());
    let recall = ratio(points.count());
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Localization {
        precision,
        recall,
        f1,
        predicted,
        matches,
    }
}
