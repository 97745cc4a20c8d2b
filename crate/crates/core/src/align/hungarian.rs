//! Minimum-cost one-to-one assignment (Kuhn-Munkres with row potentials).

use crate::error::AlignError;

/// Returns `min(n, m)` `(row, col)` pairs minimising total cost, sorted by row.
///
/// Rectangular inputs are handled by solving the orientation with fewer rows; ties resolve to
/// the lowest column index in scan order.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<(usize, usize)>, AlignError> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Ok(Vec::new());
    }
    if cost.iter().any(|row| row.len() != m || row.iter().any(|c| !c.is_finite())) {
        return Err(AlignError::NonFiniteCost);
    }
    if n <= m {
        Ok(solve(cost, n, m))
    } else {
        let transposed: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
        let mut pairs: Vec<(usize, usize)> = solve(&transposed, m, n).into_iter().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        Ok(pairs)
    }
}

/// Requires `n <= m`.
fn solve(cost: &[Vec<f64>], n: usize, m: usize) -> Vec<(usize, usize)> {
    // 1-based potentials; column 0 is the virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| (owner[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

pub fn assignment_cost(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| cost[i][j]).sum()
}
