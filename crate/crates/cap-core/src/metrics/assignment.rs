//! Minimum-cost bipartite assignment with forbidden pairs.
//!
//! Costs are integers; forbidden pairs are modeled with a sentinel large
//! enough that the solver first maximizes the number of allowed pairs and
//! only then minimizes their total cost.

/// Sentinel for forbidden pairs. Must exceed any possible sum of allowed
/// costs so that using a forbidden pair is never cheaper than leaving two
/// items unmatched.
pub const FORBIDDEN: i64 = 1 << 48;

const INF: i64 = i64::MAX / 4;

/// Solves the rectangular assignment problem for a `rows x cols` cost
/// matrix in row-major order. Returns, for each row, the matched column
/// (or `None` if the row is left unmatched, i.e. only forbidden pairs were
/// available for it).
///
/// The implementation is the standard O(n^2 m) shortest-augmenting-path
/// Hungarian algorithm with potentials; it is fully deterministic for a
/// given matrix.
pub fn solve(cost: &[i64], rows: usize, cols: usize) -> Vec<Option<usize>> {
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    // The algorithm needs rows <= cols; transpose if necessary.
    if rows > cols {
        let mut t = vec![0i64; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                t[j * rows + i] = cost[i * cols + j];
            }
        }
        let col_to_row = solve(&t, cols, rows);
        let mut out = vec![None; rows];
        for (col, assigned) in col_to_row.iter().enumerate() {
            if let Some(row) = assigned {
                out[*row] = Some(col);
            }
        }
        return out;
    }

    let n = rows;
    let m = cols;
    // 1-based arrays per the classical formulation.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut matched = vec![0usize; m + 1]; // matched[j] = row occupying column j (1-based; 0 = free)
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
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
            for j in 0..=m {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; rows];
    for j in 1..=m {
        let i = matched[j];
        if i != 0 && cost[(i - 1) * m + (j - 1)] < FORBIDDEN {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}
