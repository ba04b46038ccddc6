//! Rectangular linear assignment (Hungarian method with potentials).

/// Minimum-cost one-to-one assignment on a rectangular cost matrix.
///
/// `costs[i][j]` is the cost of pairing row `i` with column `j`. Returns, for
/// every row, the matched column or `None` when there are more rows than
/// columns. Costs must be finite.
pub fn solve(costs: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = costs.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = costs[0].len();
    debug_assert!(costs.iter().all(|r| r.len() == cols));
    if cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        hungarian(costs).into_iter().map(Some).collect()
    } else {
        let transposed: Vec<Vec<f64>> =
            (0..cols).map(|j| (0..rows).map(|i| costs[i][j]).collect()).collect();
        let col_to_row = hungarian(&transposed);
        let mut out = vec![None; rows];
        for (j, i) in col_to_row.into_iter().enumerate() {
            out[i] = Some(j);
        }
        out
    }
}

/// Maximum-score assignment; see [`solve`].
pub fn solve_max(scores: &[Vec<f64>]) -> Vec<Option<usize>> {
    let neg: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|s| -s).collect()).collect();
    solve(&neg)
}

/// Total cost of an assignment.
pub fn total(costs: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| costs[i][j]))
        .sum()
}

// rows <= cols; returns the column of each row.
fn hungarian(a: &[Vec<f64>]) -> Vec<usize> {
    let n = a.len();
    let m = a[0].len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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

    let mut out = vec![0usize; n];
    for j in 1..=m {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(costs: &[Vec<f64>]) -> f64 {
        // rows <= cols
        fn rec(costs: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == costs.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(costs[row][j] + rec(costs, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(costs, 0, &mut vec![false; costs[0].len()])
    }

    #[test]
    fn square_known_case() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = solve(&c);
        assert_eq!(total(&c, &a), 5.0);
    }

    #[test]
    fn tall_matrix_leaves_rows_unassigned() {
        let c = vec![vec![1.0], vec![0.5], vec![3.0]];
        assert_eq!(solve(&c), vec![None, Some(0), None]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(rows in 1usize..5, extra in 0usize..3, seed in any::<u64>()) {
            let cols = rows + extra;
            let mut s = seed;
            let costs: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                (s >> 40) as f64 / 1000.0
            }).collect()).collect();
            let a = solve(&costs);
            let mut seen = std::collections::HashSet::new();
            for j in a.iter().flatten() {
                prop_assert!(seen.insert(*j));
            }
            prop_assert!((total(&costs, &a) - brute_force(&costs)).abs() < 1e-9);
        }
    }
}
