//! Exact minimum-cost assignment on square integer matrices, O(n^3).

/// Returns (row -> column assignment, total cost).
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = cost.len();
    assert!(n > 0, "empty cost matrix");
    debug_assert!(cost.iter().all(|row| row.len() == n), "matrix must be square");

    const INF: i64 = i64::MAX / 4;
    // potentials over rows (u) and columns (v); p[j] is the row matched to
    // column j, with index 0 used as a virtual root
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
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
            for j in 0..=n {
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

    let mut assignment = vec![0usize; n];
    let mut total = 0i64;
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
        total += cost[p[j] - 1][j - 1];
    }
    (assignment, total)
}

/// Among all minimum-cost assignments, the one whose row->column vector is
/// lexicographically smallest. Fixes rows in order, always trying the
/// smallest feasible column and checking optimality of the completion.
pub fn lexmin_optimal_assignment(cost: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = cost.len();
    let (_, best) = min_cost_assignment(cost);
    let mut chosen = vec![usize::MAX; n];
    let mut col_used = vec![false; n];
    let mut prefix = 0i64;

    for i in 0..n {
        let free_cols: Vec<usize> = (0..n).filter(|&j| !col_used[j]).collect();
        for &j in &free_cols {
            let remainder: i64 = if i + 1 == n {
                0
            } else {
                let sub: Vec<Vec<i64>> = (i + 1..n)
                    .map(|r| {
                        free_cols
                            .iter()
                            .filter(|&&cj| cj != j)
                            .map(|&cj| cost[r][cj])
                            .collect()
                    })
                    .collect();
                min_cost_assignment(&sub).1
            };
            if prefix + cost[i][j] + remainder == best {
                chosen[i] = j;
                col_used[j] = true;
                prefix += cost[i][j];
                break;
            }
        }
        debug_assert_ne!(chosen[i], usize::MAX, "no feasible optimal column");
    }
    (chosen, best)
}
