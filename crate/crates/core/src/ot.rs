//! Balanced entropic optimal transport between the normalized annotation
//! measure and a normalized predicted map.
//!
//! The solver works in the log domain with the regularizer
//! `eps * KL(T | a (x) b)`, so the plan is
//! `T_ij = a_i b_j exp((f_i + g_j - C_ij) / eps)` and zero-mass pixels need
//! no special casing: their dual value is the soft c-transform of `f`.

use crate::cost::CostMatrix;
use crate::error::{PapmError, Result};
use crate::types::{Field, GridMap, PointSet};

/// How the regularization strength is derived from the cost matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    Absolute(f64),
    /// Fraction of the median cost entry.
    RelativeMedian(f64),
    /// Fraction of the largest cost entry.
    RelativeMax(f64),
}

impl EpsilonRule {
    pub fn resolve(&self, cost: &CostMatrix) -> f64 {
        let eps = match *self {
            EpsilonRule::Absolute(e) => e,
            EpsilonRule::RelativeMedian(f) => {
                let med = cost.median();
                if med > 0.0 {
                    f * med
                } else {
                    f * cost.max()
                }
            }
            EpsilonRule::RelativeMax(f) => f * cost.max(),
        };
        if eps > 0.0 && eps.is_finite() {
            eps
        } else {
            // all-zero costs: any positive value gives the same plan
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: EpsilonRule,
    pub max_iters: usize,
    /// Stop once the L1 marginal violation falls to this value.
    pub marginal_tol: f64,
    /// Geometric decay factor in `(0, 1]`. When set, the solve starts at
    /// `max(C)` and multiplies the regularization by this factor every
    /// iteration until it reaches the target.
    pub epsilon_schedule: Option<f64>,
    /// Newton steps on the source potential after the fixed-point loop
    /// when it ends above `marginal_tol`. Plain Sinkhorn needs on the order
    /// of `max(C) / eps` iterations, which is hopeless for costs spanning
    /// ten orders of magnitude; the semi-dual in `f` has only `n`
    /// unknowns.
    pub newton_steps: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon: EpsilonRule::RelativeMedian(0.01),
            max_iters: 500,
            marginal_tol: 1e-6,
            epsilon_schedule: None,
            newton_steps: 30,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        let e = match self.epsilon {
            EpsilonRule::Absolute(e) | EpsilonRule::RelativeMedian(e) | EpsilonRule::RelativeMax(e) => e,
        };
        if !(e.is_finite() && e > 0.0) {
            return Err(PapmError::invalid("epsilon", format!("{e} must be > 0")));
        }
        if self.max_iters == 0 {
            return Err(PapmError::invalid("max_iters", "must be >= 1"));
        }
        if !(self.marginal_tol > 0.0) {
            return Err(PapmError::invalid("marginal_tol", "must be > 0"));
        }
        if let Some(r) = self.epsilon_schedule {
            if !(r > 0.0 && r <= 1.0) {
                return Err(PapmError::invalid("epsilon_schedule", format!("{r} not in (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    rows: usize,
    cols: usize,
    /// Row-major `n x m` plan.
    pub plan: Vec<f64>,
    /// `<C, T>`
    pub value: f64,
    /// Entropic objective `<a, f> + <b, g>`; equals
    /// `<C, T> + eps KL(T | a (x) b)` at convergence.
    pub regularized_value: f64,
    pub dual_source: Vec<f64>,
    pub dual_target: Vec<f64>,
    pub epsilon: f64,
    pub iterations_used: usize,
    /// `|T 1 - a|_1 + |T^t 1 - b|_1`
    pub marginal_violation: f64,
    pub converged: bool,
}

impl TransportSolution {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn plan_entry(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.plan.chunks(self.cols) {
            for (s, t) in sums.iter_mut().zip(row) {
                *s += t;
            }
        }
        sums
    }
}

/// Source and target probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Measures {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

/// Uniform `1/n` per annotation and `pred / total_mass(pred)` per pixel.
pub fn normalize_measures(points: &PointSet, pred: &GridMap) -> Result<Measures> {
    if points.is_empty() {
        return Err(PapmError::DegenerateMeasure("empty point set"));
    }
    let mass = pred.total_mass();
    if !(mass > 0.0) {
        return Err(PapmError::DegenerateMeasure("predicted map has zero mass"));
    }
    let n = points.count();
    Ok(Measures {
        source: vec![1.0 / n as f64; n],
        target: pred.values().iter().map(|v| v / mass).collect(),
    })
}

fn check_measure(name: &'static str, w: &[f64], len: usize) -> Result<()> {
    if w.len() != len {
        return Err(PapmError::DimensionMismatch {
            expected: len,
            found: w.len(),
        });
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(PapmError::invalid(name, "weights must be finite and >= 0"));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(PapmError::invalid(name, format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

pub fn sinkhorn(
    cost: &CostMatrix,
    source: &[f64],
    target: &[f64],
    cfg: &SinkhornConfig,
) -> Result<TransportSolution> {
    sinkhorn_warm(cost, source, target, cfg, None)
}

/// Same as [`sinkhorn`], starting from the given `(f, g)` potentials.
pub fn sinkhorn_warm(
    cost: &CostMatrix,
    source: &[f64],
    target: &[f64],
    cfg: &SinkhornConfig,
    warm: Option<(&[f64], &[f64])>,
) -> Result<TransportSolution> {
    cfg.validate()?;
    let (n, m) = (cost.rows(), cost.cols());
    check_measure("source", source, n)?;
    check_measure("target", target, m)?;

    let eps_target = cfg.epsilon.resolve(cost);
    let log_a: Vec<f64> = source.iter().map(|v| v.ln()).collect();
    let log_b: Vec<f64> = target.iter().map(|v| v.ln()).collect();
    // columns with mass; the rest only need their dual at the end
    let support: Vec<usize> = (0..m).filter(|&j| target[j] > 0.0).collect();
    let rows: Vec<usize> = (0..n).filter(|&i| source[i] > 0.0).collect();

    let (mut f, mut g) = match warm {
        Some((f0, g0)) if f0.len() == n && g0.len() == m => (f0.to_vec(), g0.to_vec()),
        _ => (vec![0.0; n], vec![0.0; m]),
    };

    let update_f = |g: &[f64], eps: f64, out: &mut [f64]| {
        for &i in &rows {
            let row = cost.row(i);
            out[i] = -eps * log_sum_exp(support.iter().map(|&j| log_b[j] + (g[j] - row[j]) / eps));
        }
    };
    let update_g = |f: &[f64], eps: f64, cols: &[usize], out: &mut [f64]| {
        for &j in cols {
            out[j] = -eps
                * log_sum_exp(rows.iter().map(|&i| log_a[i] + (f[i] - cost.get(i, j)) / eps));
        }
    };

    let mut eps = match cfg.epsilon_schedule {
        Some(r) if r < 1.0 => cost.max().max(eps_target),
        _ => eps_target,
    };
    let decay = cfg.epsilon_schedule.unwrap_or(1.0);

    let mut iterations = 0;
    let mut f_next = f.clone();
    update_g(&f, eps, &support, &mut g);
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    while iterations < cfg.max_iters {
        update_f(&g, eps, &mut f_next);
        iterations += 1;
        if eps == eps_target {
            // row sums of the current plan are a_i exp((f_i - f'_i) / eps)
            let violation: f64 = rows
                .iter()
                .map(|&i| source[i] * (((f[i] - f_next[i]) / eps).exp() - 1.0).abs())
                .sum();
            if best.as_ref().is_none_or(|(v, _, _)| violation < *v) {
                best = Some((violation, f.clone(), g.clone()));
            }
            if violation <= cfg.marginal_tol {
                converged = true;
                break;
            }
        }
        std::mem::swap(&mut f, &mut f_next);
        eps = (eps * decay).max(eps_target);
        update_g(&f, eps, &support, &mut g);
    }
    if !converged {
        if let Some((_, bf, bg)) = best {
            f = bf;
            g = bg;
        }
        if cfg.newton_steps > 0 {
            let dual = SemiDual {
                cost,
                log_a: &log_a,
                target,
                rows: &rows,
                support: &support,
                eps: eps_target,
                span: cost_span(cost, &rows, &support),
            };
            let violation = dual.refine(&mut f, &mut g, cfg.newton_steps, cfg.marginal_tol);
            iterations += violation.1;
            converged = violation.0 <= cfg.marginal_tol;
        }
    }

    // duals of empty pixels: soft c-transform of f
    let empty: Vec<usize> = (0..m).filter(|&j| target[j] <= 0.0).collect();
    update_g(&f, eps_target, &empty, &mut g);

    let mut plan = vec![0.0; n * m];
    let mut value = 0.0;
    for &i in &rows {
        let row = cost.row(i);
        for &j in &support {
            let t = (log_a[i] + log_b[j] + (f[i] + g[j] - row[j]) / eps_target).exp();
            plan[i * m + j] = t;
            value += row[j] * t;
        }
    }
    let regularized_value = rows.iter().map(|&i| source[i] * f[i]).sum::<f64>()
        + support.iter().map(|&j| target[j] * g[j]).sum::<f64>();

    let mut sol = TransportSolution {
        rows: n,
        cols: m,
        plan,
        value,
        regularized_value,
        dual_source: f,
        dual_target: g,
        epsilon: eps_target,
        iterations_used: iterations,
        marginal_violation: 0.0,
        converged,
    };
    let row_err: f64 = sol.row_sums().iter().zip(source).map(|(r, a)| (r - a).abs()).sum();
    let col_err: f64 = sol.col_sums().iter().zip(target).map(|(c, b)| (c - b).abs()).sum();
    sol.marginal_violation = row_err + col_err;
    Ok(sol)
}

/// Entropic semi-dual `D(f) = <a, f> + <b, g(f)>` with `g` the soft
/// c-transform of `f`. Its gradient is `a - T 1` and its Hessian is
/// `-(1/eps) sum_j b_j (diag(q_j) - q_j q_j^t)` with `q_j = T_.j / b_j`.
struct SemiDual<'a> {
    cost: &'a CostMatrix,
    log_a: &'a [f64],
    target: &'a [f64],
    rows: &'a [usize],
    support: &'a [usize],
    eps: f64,
    /// Largest cost minus smallest cost over the active entries.
    span: f64,
}

impl SemiDual<'_> {
    fn c_transform(&self, f: &[f64], g: &mut [f64]) {
        for &j in self.support {
            g[j] = -self.eps
                * log_sum_exp(self.rows.iter().map(|&i| self.log_a[i] + (f[i] - self.cost.get(i, j)) / self.eps));
        }
    }

    fn objective(&self, f: &[f64], g: &[f64]) -> f64 {
        self.rows.iter().map(|&i| self.log_a[i].exp() * f[i]).sum::<f64>()
            + self.support.iter().map(|&j| self.target[j] * g[j]).sum::<f64>()
    }

    /// Returns the final row violation and the number of steps taken.
    fn refine(&self, f: &mut [f64], g: &mut [f64], steps: usize, tol: f64) -> (f64, usize) {
        let n = f.len();
        let rows = self.rows;
        let k = rows.len();
        self.c_transform(f, g);
        let mut value = self.objective(f, g);
        let mut trial_g = g.to_vec();
        let mut trial = f.to_vec();
        let violation_of = |f: &[f64], g: &[f64]| -> (f64, Vec<f64>) {
            let mut r = vec![0.0; n];
            for &j in self.support {
                for &i in rows {
                    r[i] += self.target[j] * (self.log_a[i] + (f[i] + g[j] - self.cost.get(i, j)) / self.eps).exp();
                }
            }
            let grad: Vec<f64> = rows.iter().map(|&i| self.log_a[i].exp() - r[i]).collect();
            (grad.iter().map(|v| v.abs()).sum(), grad)
        };
        let (mut violation, mut grad) = violation_of(f, g);
        for step in 0..steps {
            if violation <= tol || k < 2 {
                return (violation, step);
            }
            // The Hessian is a weighted graph Laplacian over the rows. Its
            // diagonal is rebuilt from the off-diagonal weights, because
            // `q (1 - q)` cancels to zero when the plan is nearly a hard
            // assignment.
            let mut lap = vec![0.0; k * k];
            let mut q = vec![0.0; k];
            for &j in self.support {
                for (u, &i) in rows.iter().enumerate() {
                    q[u] = (self.log_a[i] + (f[i] + g[j] - self.cost.get(i, j)) / self.eps).exp();
                }
                let b = self.target[j];
                for u in 0..k {
                    for v in u + 1..k {
                        let w = b * q[u] * q[v];
                        lap[u * k + v] -= w;
                        lap[v * k + u] -= w;
                    }
                }
            }
            for u in 0..k {
                lap[u * k + u] = -(0..k).filter(|&v| v != u).map(|v| lap[u * k + v]).sum::<f64>();
            }
            // ground the first row's potential
            let mut reduced = vec![0.0; (k - 1) * (k - 1)];
            for u in 1..k {
                for v in 1..k {
                    reduced[(u - 1) * (k - 1) + v - 1] = lap[u * k + v];
                }
            }
            let rhs: Vec<f64> = grad[1..].iter().map(|v| self.eps * v).collect();
            let sol = solve_grounded(&mut reduced, rhs, k - 1);
            let mut dir = vec![0.0; n];
            for u in 1..k {
                dir[rows[u]] = sol[u - 1];
            }
            // rows that barely share mass get enormous Newton steps; the
            // line search then starts from a move no longer than the cost
            // range
            let longest = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if longest > self.span {
                dir.iter_mut().for_each(|d| *d *= self.span / longest);
            }
            let slope: f64 = rows.iter().zip(&grad).map(|(&i, v)| dir[i] * v).sum();
            if !(slope > 0.0) {
                return (violation, step);
            }
            let mut t = 1.0;
            loop {
                for i in 0..n {
                    trial[i] = f[i] + t * dir[i];
                }
                self.c_transform(&trial, &mut trial_g);
                let next = self.objective(&trial, &trial_g);
                let (next_violation, next_grad) = violation_of(&trial, &trial_g);
                // the slack absorbs rounding once the increase is at machine level
                let slack = 1e-14 * value.abs();
                if next >= value + 1e-4 * t * slope - slack && (next > value - slack || next_violation < violation) {
                    f.copy_from_slice(&trial);
                    g.copy_from_slice(&trial_g);
                    value = next;
                    violation = next_violation;
                    grad = next_grad;
                    break;
                }
                t *= 0.5;
                if t < 1e-10 {
                    return (violation, step);
                }
            }
        }
        (violation, steps)
    }
}

/// Gradient of the transport term with respect to the unnormalized map:
/// `g_j / |A| - <g, A> / |A|^2`, where `g` is the target dual.
pub fn ot_gradient(sol: &TransportSolution, pred: &GridMap) -> Result<Field> {
    let m = pred.values().len();
    if sol.cols() != m {
        return Err(PapmError::DimensionMismatch {
            expected: sol.cols(),
            found: m,
        });
    }
    let mass = pred.total_mass();
    if !(mass > 0.0) {
        return Err(PapmError::DegenerateMeasure("predicted map has zero mass"));
    }
    let beta = &sol.dual_target;
    let mean: f64 = beta.iter().zip(pred.values()).map(|(b, a)| b * a).sum::<f64>() / mass;
    let grad = beta.iter().map(|b| (b - mean) / mass).collect();
    Ok(Field::from_parts(pred.shape(), grad))
}

/// Exact gradient of the transport cost `<C, T>` of an entropic plan with
/// respect to the unnormalized map, obtained by differentiating the
/// Sinkhorn fixed point.
///
/// With `P_ij = a_i exp((f_i + g_j - C_ij) / eps)` (so `T_ij = b_j P_ij`),
/// `d<C,T>/db_j = sum_i P_ij (C_ij - z_i)` where `z` solves
/// `(diag(a) - T diag(1/b) T^t) z = s`, `s_i = sum_j T_ij (C_ij - w_j)`
/// and `w_j = sum_i P_ij C_ij`. The simplex derivative is then mapped to
/// `A` the same way as in [`ot_gradient`].
pub fn transport_cost_gradient(
    sol: &TransportSolution,
    cost: &CostMatrix,
    source: &[f64],
    pred: &GridMap,
) -> Result<Field> {
    let (n, m) = (sol.rows(), sol.cols());
    if cost.rows() != n || cost.cols() != m || source.len() != n {
        return Err(PapmError::DimensionMismatch {
            expected: n * m,
            found: cost.rows() * cost.cols(),
        });
    }
    if pred.values().len() != m {
        return Err(PapmError::DimensionMismatch {
            expected: m,
            found: pred.values().len(),
        });
    }
    let mass = pred.total_mass();
    if !(mass > 0.0) {
        return Err(PapmError::DegenerateMeasure("predicted map has zero mass"));
    }
    let eps = sol.epsilon;
    let (f, g) = (&sol.dual_source, &sol.dual_target);

    // conditional plan P_ij = T_ij / b_j, column-stochastic
    let mut cond = vec![0.0; n * m];
    for i in 0..n {
        if source[i] <= 0.0 {
            continue;
        }
        let la = source[i].ln();
        let row = cost.row(i);
        for j in 0..m {
            cond[i * m + j] = (la + (f[i] + g[j] - row[j]) / eps).exp();
        }
    }
    let b: Vec<f64> = pred.values().iter().map(|v| v / mass).collect();
    let w: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| cond[i * m + j] * cost.get(i, j)).sum())
        .collect();
    let s: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|j| b[j] * cond[i * m + j] * (cost.get(i, j) - w[j])).sum())
        .collect();
    // M = diag(a) - sum_j b_j P_.j P_.j^t
    let mut sys = vec![0.0; n * n];
    for i in 0..n {
        sys[i * n + i] = source[i];
    }
    for j in 0..m {
        if b[j] <= 0.0 {
            continue;
        }
        for i in 0..n {
            let pij = b[j] * cond[i * m + j];
            if pij == 0.0 {
                continue;
            }
            for k in 0..n {
                sys[i * n + k] -= pij * cond[k * m + j];
            }
        }
    }
    let z = solve_singular(&mut sys, s, n);
    let d: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| cond[i * m + j] * (cost.get(i, j) - z[i])).sum())
        .collect();
    let mean: f64 = d.iter().zip(&b).map(|(x, y)| x * y).sum();
    Ok(Field::from_parts(
        pred.shape(),
        d.iter().map(|x| (x - mean) / mass).collect(),
    ))
}

fn cost_span(cost: &CostMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in rows {
        for &j in cols {
            lo = lo.min(cost.get(i, j));
            hi = hi.max(cost.get(i, j));
        }
    }
    (hi - lo).max(f64::MIN_POSITIVE)
}

/// Solves a grounded graph Laplacian system (symmetric, diagonally
/// dominant) by elimination without pivoting. Weights that underflowed
/// leave a row disconnected; a floor on the pivots keeps its step finite
/// and in the direction of the residual.
fn solve_grounded(a: &mut [f64], mut rhs: Vec<f64>, n: usize) -> Vec<f64> {
    const FLOOR: f64 = 1e-300;
    for col in 0..n {
        let p = a[col * n + col].max(FLOOR);
        a[col * n + col] = p;
        for r in col + 1..n {
            let factor = a[r * n + col] / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut z = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r * n + c] * z[c]).sum();
        z[r] = (rhs[r] - tail) / a[r * n + r];
    }
    z
}

/// Gaussian elimination with partial pivoting on a consistent, possibly
/// singular symmetric system; free variables are set to zero.
fn solve_singular(a: &mut [f64], mut rhs: Vec<f64>, n: usize) -> Vec<f64> {
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let tiny = 1e-13 * scale;
    let mut pivot_col = vec![usize::MAX; n];
    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let (best, best_abs) = (row..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_abs <= tiny {
            continue;
        }
        if best != row {
            for c in 0..n {
                a.swap(best * n + c, row * n + c);
            }
            rhs.swap(best, row);
        }
        let p = a[row * n + col];
        for r in 0..n {
            if r == row {
                continue;
            }
            let factor = a[r * n + col] / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= factor * a[row * n + c];
            }
            rhs[r] -= factor * rhs[row];
        }
        pivot_col[row] = col;
        row += 1;
    }
    let mut z = vec![0.0; n];
    for r in 0..row {
        let col = pivot_col[r];
        z[col] = rhs[r] / a[r * n + col];
    }
    z
}

/// Exact optimum of the transportation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub value: f64,
    pub plan: Vec<f64>,
}

/// Largest `n + m` accepted by [`exact_ot`].
pub const EXACT_OT_LIMIT: usize = 16;

/// Transportation simplex (MODI potentials, Bland's rule) from a
/// north-west-corner start.
pub fn exact_ot(cost: &CostMatrix, source: &[f64], target: &[f64]) -> Result<ExactSolution> {
    let (n, m) = (cost.rows(), cost.cols());
    if n + m > EXACT_OT_LIMIT {
        return Err(PapmError::InstanceTooLarge {
            limit: EXACT_OT_LIMIT,
            found: n + m,
        });
    }
    if n == 0 || m == 0 {
        return Err(PapmError::invalid("cost", "empty instance"));
    }
    check_measure("source", source, n)?;
    check_measure("target", target, m)?;

    let mut x = vec![0.0; n * m];
    let mut basic = vec![false; n * m];
    {
        let mut supply = source.to_vec();
        let mut demand = target.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let q = if i == n - 1 && j == m - 1 {
                supply[i].max(demand[j]).max(0.0)
            } else {
                supply[i].min(demand[j]).max(0.0)
            };
            x[i * m + j] = q;
            basic[i * m + j] = true;
            supply[i] -= q;
            demand[j] -= q;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if j == m - 1 || (i < n - 1 && supply[i] <= demand[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let tol = 1e-12 * (1.0 + cost.max());
    let max_pivots = 100_000;
    for _ in 0..max_pivots {
        let (u, v) = potentials(cost, &basic, n, m);
        let entering = (0..n * m).find(|&k| {
            !basic[k] && cost.entries()[k] - u[k / m] - v[k % m] < -tol
        });
        let Some(enter) = entering else {
            let value = x.iter().zip(cost.entries()).map(|(t, c)| t * c).sum();
            return Ok(ExactSolution { value, plan: x });
        };
        let path = tree_path(&basic, n, m, enter % m, enter / m);
        // edges alternate -, +, -, ... starting at the entering column
        let minus: Vec<usize> = path.iter().step_by(2).copied().collect();
        let theta = minus.iter().map(|&k| x[k]).fold(f64::INFINITY, f64::min);
        let leave = *minus
            .iter()
            .filter(|&&k| x[k] <= theta)
            .min()
            .expect("cycle has a decreasing edge");
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                x[k] -= theta;
            } else {
                x[k] += theta;
            }
        }
        x[enter] = theta;
        x[leave] = 0.0;
        basic[leave] = false;
        basic[enter] = true;
    }
    Err(PapmError::invalid("exact_ot", "pivot limit reached"))
}

fn potentials(cost: &CostMatrix, basic: &[bool], n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; n];
    let mut v = vec![f64::NAN; m];
    u[0] = 0.0;
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for j in 0..m {
                if !basic[i * m + j] {
                    continue;
                }
                let c = cost.get(i, j);
                if !u[i].is_nan() && v[j].is_nan() {
                    v[j] = c - u[i];
                    changed = true;
                } else if u[i].is_nan() && !v[j].is_nan() {
                    u[i] = c - v[j];
                    changed = true;
                }
            }
        }
    }
    (u, v)
}

/// Basic cells on the tree path from column `col` to row `row`, in order.
fn tree_path(basic: &[bool], n: usize, m: usize, col: usize, row: usize) -> Vec<usize> {
    // nodes: rows 0..n, columns n..n+m
    let start = n + col;
    let goal = row;
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n + m];
    let mut seen = vec![false; n + m];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        let neighbors: Vec<(usize, usize)> = if node < n {
            (0..m).filter(|&j| basic[node * m + j]).map(|j| (n + j, node * m + j)).collect()
        } else {
            let j = node - n;
            (0..n).filter(|&i| basic[i * m + j]).map(|i| (i, i * m + j)).collect()
        };
        for (next, cell) in neighbors {
            if !seen[next] {
                seen[next] = true;
                prev[next] = Some((node, cell));
                queue.push_back(next);
            }
        }
    }
    let mut cells = Vec::new();
    let mut node = goal;
    while node != start {
        let (p, cell) = prev[node].expect("basis is a spanning tree");
        cells.push(cell);
        node = p;
    }
    cells.reverse();
    cells
}
