//! Exact linear assignment (Hungarian algorithm with dual potentials).
//!
//! Used to maximize cluster-to-class overlaps; kept generic over any
//! rectangular cost matrix with rows <= columns.

use crate::error::{Error, Result};

/// Minimum-cost assignment of each row to a distinct column.
///
/// `costs` is row-major `rows x cols` with `rows <= cols`. Returns the
/// column assigned to each row. `O(rows^2 * cols)`.
pub fn min_cost_assignment(costs: &[f64], rows: usize, cols: usize) -> Result<Vec<usize>> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyInput("assignment matrix must be non-empty".to_string()));
    }
    if rows > cols {
        return Err(Error::invalid_parameter(
            "assignment",
            format!("rows ({rows}) must not exceed columns ({cols})"),
        ));
    }
    if costs.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            got: costs.len(),
            context: "assignment cost matrix".to_string(),
        });
    }
    if costs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_parameter(
            "assignment",
            "costs must be finite".to_string(),
        ));
    }

    // Potentials-based Hungarian with 1-based sentinels: row 0 and column 0
    // are virtual. `way[j]` remembers the previous column on the augmenting
    // path, `links[j]` the row currently matched to column j.
    let cost = |i: usize, j: usize| costs[(i - 1) * cols + (j - 1)];
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut links = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        links[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = links[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[links[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if links[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            links[j0] = links[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![usize::MAX; rows];
    for j in 1..=cols {
        if links[j] > 0 {
            assignment[links[j] - 1] = j - 1;
        }
    }
    debug_assert!(assignment.iter().all(|&j| j != usize::MAX));
    Ok(assignment)
}

/// Maximum-total assignment (negated costs).
pub fn max_value_assignment(values: &[f64], rows: usize, cols: usize) -> Result<Vec<usize>> {
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    min_cost_assignment(&negated, rows, cols)
}
