use papm::ot::EXACT_OT_LIMIT;
use papm::{exact_ot, ot_gradient, sinkhorn, CostMatrix, EpsilonRule, GridMap, PapmError, SinkhornConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves a square system by Gaussian elimination; `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..k {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..k).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum over the basic feasible solutions of the transportation LP:
/// every choice of `n + m - 1` cells whose equality system is nonsingular.
fn vertex_oracle(c: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let k = n + m - 1;
    let cells = n * m;
    let mut best = f64::INFINITY;
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        // rows, then the first m - 1 columns (the last column is implied)
        let mut sys = vec![vec![0.0; k]; k];
        for (v, &cell) in pick.iter().enumerate() {
            let (i, j) = (cell / m, cell % m);
            sys[i][v] = 1.0;
            if j < m - 1 {
                sys[n + j][v] = 1.0;
            }
        }
        let rhs: Vec<f64> = a.iter().chain(&b[..m - 1]).copied().collect();
        if let Some(x) = solve(sys, rhs) {
            if x.iter().all(|&v| v >= -1e-12) {
                let value: f64 = pick.iter().zip(&x).map(|(&cell, v)| c[cell] * v).sum();
                best = best.min(value);
            }
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < cells - k + i {
                break;
            }
        }
        pick[i] += 1;
        for t in i + 1..k {
            pick[t] = pick[t - 1] + 1;
        }
    }
}

fn simplex(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn tight(frac: f64) -> SinkhornConfig {
    SinkhornConfig {
        epsilon: EpsilonRule::RelativeMax(frac),
        max_iters: 200_000,
        marginal_tol: 1e-9,
        epsilon_schedule: Some(0.9),
        newton_steps: 0,
    }
}

#[test]
fn vertex_oracle_two_by_two() {
    let c = [1.0, 2.0, 3.0, 1.0];
    let (a, b) = ([0.6, 0.4], [0.5, 0.5]);
    let brute = vertex_oracle(&c, &a, &b);
    // feasible plans are [[t, .6-t], [.5-t, t-.1]] for t in [.1, .5]
    assert!((brute - 1.1).abs() < 1e-12);
    let exact = exact_ot(&CostMatrix::new(2, 2, c.to_vec()).unwrap(), &a, &b).unwrap();
    assert!((exact.value - brute).abs() < 1e-12);
    let expected = [0.5, 0.1, 0.0, 0.4];
    for (p, e) in exact.plan.iter().zip(expected) {
        assert!((p - e).abs() < 1e-12);
    }
}

#[test]
fn exact_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=4);
        let c: Vec<f64> = (0..n * m).map(|_| rng.gen_range(0.0..10.0)).collect();
        let (a, b) = (simplex(&mut rng, n), simplex(&mut rng, m));
        let exact = exact_ot(&CostMatrix::new(n, m, c.clone()).unwrap(), &a, &b).unwrap();
        let brute = vertex_oracle(&c, &a, &b);
        assert!((exact.value - brute).abs() < 1e-9, "{n}x{m}: {} vs {brute}", exact.value);
    }
}

#[test]
fn exact_rejects_oversized_instances() {
    let (n, m) = (8, EXACT_OT_LIMIT - 7);
    let c = CostMatrix::new(n, m, vec![1.0; n * m]).unwrap();
    let r = exact_ot(&c, &vec![1.0 / n as f64; n], &vec![1.0 / m as f64; m]);
    assert!(matches!(r, Err(PapmError::InstanceTooLarge { .. })));
}

#[test]
fn sinkhorn_two_by_three_matches_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let c: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..5.0)).collect();
    let (a, b) = (simplex(&mut rng, 2), simplex(&mut rng, 3));
    let cost = CostMatrix::new(2, 3, c).unwrap();
    let exact = exact_ot(&cost, &a, &b).unwrap();
    let sol = sinkhorn(&cost, &a, &b, &tight(1e-3)).unwrap();
    assert!(sol.converged);
    assert!((sol.value - exact.value).abs() <= 0.01 * exact.value);
}

#[test]
fn sinkhorn_value_within_entropic_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let (n, m) = (rng.gen_range(1..=3), rng.gen_range(2..=9));
        let cost = CostMatrix::new(n, m, (0..n * m).map(|_| rng.gen_range(0.0..4.0)).collect()).unwrap();
        let (a, b) = (simplex(&mut rng, n), simplex(&mut rng, m));
        let exact = exact_ot(&cost, &a, &b).unwrap();
        let sol = sinkhorn(&cost, &a, &b, &tight(1e-2)).unwrap();
        let bound = sol.epsilon * ((n * m) as f64).ln();
        assert!(sol.value >= exact.value - 1e-6);
        assert!(sol.value <= exact.value + bound + 1e-9);
    }
}

#[test]
fn newton_refinement_handles_wide_cost_range() {
    // columns a few units apart, plus a column ten orders of magnitude away
    let c = vec![0.0, 4.0, 16.0, 1e10, 16.0, 4.0, 0.0, 2e10];
    let cost = CostMatrix::new(2, 4, c).unwrap();
    let (a, b) = ([0.5, 0.5], [0.3, 0.2, 0.3, 0.2]);
    let plain = SinkhornConfig {
        epsilon: EpsilonRule::Absolute(1.0),
        max_iters: 50,
        newton_steps: 0,
        ..Default::default()
    };
    let refined = SinkhornConfig {
        newton_steps: 30,
        ..plain
    };
    let slow = sinkhorn(&cost, &a, &b, &plain).unwrap();
    let fast = sinkhorn(&cost, &a, &b, &refined).unwrap();
    assert!(!slow.converged);
    assert!(fast.converged, "violation {}", fast.marginal_violation);
    assert!(fast.marginal_violation < 1e-6);
}

#[test]
fn gradient_is_gauge_invariant() {
    let cost = CostMatrix::new(2, 4, vec![0.0, 1.0, 4.0, 9.0, 9.0, 4.0, 1.0, 0.0]).unwrap();
    let pred = GridMap::new(2, 2, vec![0.4, 1.1, 0.2, 0.7]).unwrap();
    let b: Vec<f64> = pred.values().iter().map(|v| v / pred.total_mass()).collect();
    let mut sol = sinkhorn(&cost, &[0.5, 0.5], &b, &SinkhornConfig::default()).unwrap();
    let g0 = ot_gradient(&sol, &pred).unwrap();
    sol.dual_target.iter_mut().for_each(|v| *v += 3.25);
    sol.dual_source.iter_mut().for_each(|v| *v -= 3.25);
    let g1 = ot_gradient(&sol, &pred).unwrap();
    for (x, y) in g0.values().iter().zip(g1.values()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn scaled_prediction_gives_parallel_update() {
    let cost = CostMatrix::new(1, 4, vec![0.0, 1.0, 1.0, 2.0]).unwrap();
    let pred = GridMap::new(2, 2, vec![0.1, 0.3, 0.2, 0.4]).unwrap();
    let doubled = GridMap::new(2, 2, pred.values().iter().map(|v| 2.0 * v).collect()).unwrap();
    let grad = |p: &GridMap| {
        let b: Vec<f64> = p.values().iter().map(|v| v / p.total_mass()).collect();
        let sol = sinkhorn(&cost, &[1.0], &b, &SinkhornConfig::default()).unwrap();
        ot_gradient(&sol, p).unwrap()
    };
    let (g1, g2) = (grad(&pred), grad(&doubled));
    // the induced change of the normalized shape is the same direction
    for (x, y) in g1.values().iter().zip(g2.values()) {
        assert!((x - 2.0 * y).abs() < 1e-9 * x.abs().max(1.0));
    }
}

proptest! {
    #[test]
    fn marginals_are_feasible(seed in any::<u64>(), n in 1usize..4, m in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = CostMatrix::new(n, m, (0..n * m).map(|_| rng.gen_range(0.0..100.0)).collect()).unwrap();
        let (a, b) = (simplex(&mut rng, n), simplex(&mut rng, m));
        let sol = sinkhorn(&cost, &a, &b, &SinkhornConfig::default()).unwrap();
        prop_assert!(sol.plan.iter().all(|t| *t >= 0.0));
        prop_assert!(sol.converged);
        let rows: f64 = sol.row_sums().iter().zip(&a).map(|(r, x)| (r - x).abs()).sum();
        let cols: f64 = sol.col_sums().iter().zip(&b).map(|(c, y)| (c - y).abs()).sum();
        prop_assert!(rows <= 1e-6 && cols <= 1e-6, "rows {rows} cols {cols}");
        let value: f64 = (0..n * m).map(|k| sol.plan[k] * cost.get(k / m, k % m)).sum();
        prop_assert!((value - sol.value).abs() <= 1e-12 * value.max(1.0));
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = CostMatrix::new(3, 7, (0..21).map(|_| rng.gen_range(0.0..1e4)).collect()).unwrap();
        let (a, b) = (simplex(&mut rng, 3), simplex(&mut rng, 7));
        let x = sinkhorn(&cost, &a, &b, &SinkhornConfig::default()).unwrap();
        let y = sinkhorn(&cost, &a, &b, &SinkhornConfig::default()).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn single_source_is_forced(seed in any::<u64>(), m in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..50.0)).collect();
        let b = simplex(&mut rng, m);
        let cost = CostMatrix::new(1, m, c.clone()).unwrap();
        let closed: f64 = c.iter().zip(&b).map(|(x, y)| x * y).sum();
        let sol = sinkhorn(&cost, &[1.0], &b, &SinkhornConfig::default()).unwrap();
        prop_assert!((sol.value - closed).abs() <= 1e-9 * closed.max(1.0));
        let exact = exact_ot(&cost, &[1.0], &b).unwrap();
        prop_assert!((exact.value - closed).abs() <= 1e-9 * closed.max(1.0));
    }
}
