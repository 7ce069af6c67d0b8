//! Minimum-cost bipartite assignment (Kuhn-Munkres with potentials).

/// Optimal assignment for a rectangular cost matrix `cost[r][c]`.
///
/// Returns `(row, column)` pairs; every row is matched when rows <= columns
/// and every column otherwise.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| cost[r][c]).collect()).collect();
        return min_cost_assignment(&t).into_iter().map(|(c, r)| (r, c)).collect();
    }
    // 1-based potentials formulation, rows <= cols
    let inf = f64::INFINITY;
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out: Vec<(usize, usize)> = (1..=cols).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(cost: &[Vec<f64>]) -> f64 {
        let (r, c) = (cost.len(), cost[0].len());
        let k = r.min(c);
        let mut best = f64::INFINITY;
        // enumerate injective maps from the smaller side into the larger one
        fn rec(i: usize, k: usize, used: &mut Vec<bool>, acc: f64, f: &dyn Fn(usize, usize) -> f64, best: &mut f64) {
            if i == k {
                *best = best.min(acc);
                return;
            }
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    rec(i + 1, k, used, acc + f(i, j), f, best);
                    used[j] = false;
                }
            }
        }
        if r <= c {
            rec(0, k, &mut vec![false; c], 0.0, &|i, j| cost[i][j], &mut best);
        } else {
            rec(0, k, &mut vec![false; r], 0.0, &|i, j| cost[j][i], &mut best);
        }
        best
    }

    #[test]
    fn matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let r = rng.gen_range(1..=4);
            let c = rng.gen_range(1..=4);
            let cost: Vec<Vec<f64>> = (0..r).map(|_| (0..c).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
            let a = min_cost_assignment(&cost);
            assert_eq!(a.len(), r.min(c));
            let total: f64 = a.iter().map(|&(i, j)| cost[i][j]).sum();
            assert!((total - brute(&cost)).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_input() {
        assert!(min_cost_assignment(&[]).is_empty());
    }
}
