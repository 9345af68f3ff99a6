//! Exact transportation solver on dense bipartite instances.
//!
//! Classic transportation simplex: northwest-corner start, dual (MODI)
//! pricing, Bland pivot selection for cycle-free determinism. Instances here
//! are small (one side per partition, one node per cluster), so the simplex
//! runs to exact optimality; nothing is approximated.

use crate::error::{Error, Result};

/// Optimal coupling between two weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols` nonnegative flow matrix.
    flow: Vec<f64>,
    /// `sum flow[i][j] * cost[i][j]`, summed in value order so the result
    /// does not depend on cluster labeling.
    cost: f64,
}

impl TransportPlan {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn flow(&self, i: usize, j: usize) -> f64 {
        self.flow[i * self.cols + j]
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Row and column sums of the flow matrix.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let mut row = vec![0.0; self.rows];
        let mut col = vec![0.0; self.cols];
        for (i, flows) in self.flow.chunks(self.cols).enumerate() {
            for (j, &f) in flows.iter().enumerate() {
                row[i] += f;
                col[j] += f;
            }
        }
        (row, col)
    }

    /// The same plan with row `i` renamed to `row_map[i]` and column `j` to
    /// `col_map[j]`. Both maps must be permutations; the cost is unchanged.
    pub(crate) fn reindexed(&self, row_map: &[usize], col_map: &[usize]) -> TransportPlan {
        debug_assert_eq!(row_map.len(), self.rows);
        debug_assert_eq!(col_map.len(), self.cols);
        let mut flow = vec![0.0; self.flow.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                flow[row_map[i] * self.cols + col_map[j]] = self.flow[i * self.cols + j];
            }
        }
        TransportPlan {
            rows: self.rows,
            cols: self.cols,
            flow,
            cost: self.cost,
        }
    }

    /// The same plan with sources and sinks exchanged.
    pub fn transposed(&self) -> TransportPlan {
        let mut flow = vec![0.0; self.flow.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                flow[j * self.rows + i] = self.flow[i * self.cols + j];
            }
        }
        TransportPlan {
            rows: self.cols,
            cols: self.rows,
            flow,
            cost: self.cost,
        }
    }
}

/// Total cost of an arbitrary flow matrix, summed in value order (see
/// [`value_ordered_sum`]).
pub fn plan_cost(flow: &[f64], costs: &[f64]) -> f64 {
    let products: Vec<f64> = flow.iter().zip(costs).map(|(f, c)| f * c).collect();
    value_ordered_sum(products)
}

/// Sums terms after sorting them by value, making the result invariant to
/// the order in which the terms were produced (cluster relabelings permute
/// them but cannot change the sum).
pub(crate) fn value_ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| a.total_cmp(b));
    terms.iter().sum()
}

/// Reduced costs below this count as zero when pricing entering arcs.
const REDUCED_COST_EPS: f64 = 1e-12;

/// Supply and demand totals may differ by at most this (relative).
const BALANCE_TOL: f64 = 1e-9;

/// Solves the balanced transportation problem exactly.
///
/// `costs` is row-major `supply.len() x demand.len()`. Entries of `supply`
/// and `demand` must be nonnegative and sum to the same total within
/// [`BALANCE_TOL`] (relative). The returned plan is an exact optimum; its
/// basic structure is deterministic in the inputs.
pub fn solve_transport(supply: &[f64], demand: &[f64], costs: &[f64]) -> Result<TransportPlan> {
    let r = supply.len();
    let c = demand.len();
    if r == 0 || c == 0 {
        return Err(Error::EmptyInput("transportation sides must be non-empty".to_string()));
    }
    if costs.len() != r * c {
        return Err(Error::DimensionMismatch {
            expected: r * c,
            got: costs.len(),
            context: "transportation cost matrix".to_string(),
        });
    }
    for (name, side) in [("supply", supply), ("demand", demand)] {
        for (i, &v) in side.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid_parameter(
                    name,
                    format!("entry {v} at index {i} must be finite and nonnegative"),
                ));
            }
        }
    }
    if costs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_parameter(
            "costs",
            "all ground costs must be finite".to_string(),
        ));
    }
    let s_total: f64 = supply.iter().sum();
    let d_total: f64 = demand.iter().sum();
    let scale = s_total.max(d_total).max(1.0);
    if (s_total - d_total).abs() > BALANCE_TOL * scale {
        return Err(Error::invalid_parameter(
            "weights",
            format!("supply total {s_total} and demand total {d_total} differ"),
        ));
    }
    if s_total <= 0.0 {
        return Err(Error::invalid_parameter(
            "weights",
            "total mass must be positive".to_string(),
        ));
    }

    let mut state = SimplexState::northwest(supply, demand, c);
    // Pivot count for the transportation simplex with Bland's rule is finite;
    // the cap only guards against implementation bugs.
    let max_pivots = 1000 + 200 * (r + c) * (r + c);
    for _ in 0..max_pivots {
        let (u, v) = state.duals(r, c, costs);
        let Some((ei, ej)) = state.entering(r, c, costs, &u, &v) else {
            let cost = plan_cost(&state.flow, costs);
            return Ok(TransportPlan {
                rows: r,
                cols: c,
                flow: state.flow,
                cost,
            });
        };
        state.pivot(r, c, ei, ej);
    }
    Err(Error::Degenerate(
        "transportation simplex failed to terminate".to_string(),
    ))
}

struct SimplexState {
    flow: Vec<f64>,
    basis: Vec<bool>,
}

impl SimplexState {
    /// Northwest-corner initial basis: walks from (0,0) to (r-1,c-1) moving
    /// down when the row is exhausted, right otherwise; visits exactly
    /// r + c - 1 cells, possibly with zero flow (degenerate but valid).
    fn northwest(supply: &[f64], demand: &[f64], c: usize) -> SimplexState {
        let r = supply.len();
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut flow = vec![0.0; r * c];
        let mut basis = vec![false; r * c];
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let f = s[i].min(d[j]);
            flow[i * c + j] = f;
            basis[i * c + j] = true;
            s[i] -= f;
            d[j] -= f;
            if i == r - 1 && j == c - 1 {
                break;
            }
            if i < r - 1 && (s[i] <= 0.0 || j == c - 1) {
                i += 1;
            } else {
                j += 1;
            }
        }
        SimplexState { flow, basis }
    }

    /// Dual prices from the basis tree: u[0] = 0, u[i] + v[j] = cost[i][j]
    /// on basic cells, propagated by breadth-first search. The basis always
    /// forms a spanning tree of rows and columns, so every dual is reached.
    fn duals(&self, r: usize, c: usize, costs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![f64::NAN; r];
        let mut v = vec![f64::NAN; c];
        u[0] = 0.0;
        let mut queue = std::collections::VecDeque::from([0usize]); // node < r: row; else col r+j
        while let Some(node) = queue.pop_front() {
            if node < r {
                let i = node;
                for j in 0..c {
                    if self.basis[i * c + j] && v[j].is_nan() {
                        v[j] = costs[i * c + j] - u[i];
                        queue.push_back(r + j);
                    }
                }
            } else {
                let j = node - r;
                for i in 0..r {
                    if self.basis[i * c + j] && u[i].is_nan() {
                        u[i] = costs[i * c + j] - v[j];
                        queue.push_back(i);
                    }
                }
            }
        }
        debug_assert!(
            u.iter().chain(v.iter()).all(|x| !x.is_nan()),
            "basis must span all rows and columns"
        );
        (u, v)
    }

    /// First non-basic cell (row-major) pricing strictly negative: Bland's
    /// rule, which cannot cycle even on degenerate instances.
    fn entering(
        &self,
        r: usize,
        c: usize,
        costs: &[f64],
        u: &[f64],
        v: &[f64],
    ) -> Option<(usize, usize)> {
        for i in 0..r {
            for j in 0..c {
                if !self.basis[i * c + j] && costs[i * c + j] - u[i] - v[j] < -REDUCED_COST_EPS {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Pivots the entering cell into the basis: finds the unique cycle it
    /// closes in the basis tree, shifts the bottleneck flow around it, and
    /// drops the first bottleneck cell (lowest row-major index) from the
    /// basis.
    fn pivot(&mut self, r: usize, c: usize, ei: usize, ej: usize) {
        let path = self.tree_path(r, c, ei, r + ej);
        // Convert the node path (row, col, row, ...) to cells. Cell t shares
        // a row with its predecessor for even t, a column for odd t, so
        // signs alternate starting with minus (the entering cell is plus).
        let cells: Vec<(usize, usize)> = path
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                if a < r {
                    (a, b - r)
                } else {
                    (b, a - r)
                }
            })
            .collect();
        let minus_cells = || cells.iter().copied().step_by(2);
        let theta = minus_cells()
            .map(|(i, j)| self.flow[i * c + j])
            .fold(f64::INFINITY, f64::min);
        let leaving = minus_cells()
            .filter(|(i, j)| self.flow[i * c + j] <= theta)
            .min()
            .expect("cycle has at least one minus cell");
        for (t, (i, j)) in cells.iter().copied().enumerate() {
            if t % 2 == 0 {
                self.flow[i * c + j] -= theta;
            } else {
                self.flow[i * c + j] += theta;
            }
        }
        self.flow[ei * c + ej] = theta;
        self.basis[ei * c + ej] = true;
        self.flow[leaving.0 * c + leaving.1] = 0.0;
        self.basis[leaving.0 * c + leaving.1] = false;
    }

    /// Path between two nodes of the basis tree (nodes 0..r are rows,
    /// r..r+c are columns), found by depth-first search.
    // Row and column neighbor scans mirror each other; explicit indices keep
    // the flat basis addressing visible.
    #[allow(clippy::needless_range_loop)]
    fn tree_path(&self, r: usize, c: usize, from: usize, to: usize) -> Vec<usize> {
        let mut parent = vec![usize::MAX; r + c];
        let mut stack = vec![from];
        parent[from] = from;
        while let Some(node) = stack.pop() {
            if node == to {
                break;
            }
            if node < r {
                let i = node;
                for j in 0..c {
                    if self.basis[i * c + j] && parent[r + j] == usize::MAX {
                        parent[r + j] = node;
                        stack.push(r + j);
                    }
                }
            } else {
                let j = node - r;
                for i in 0..r {
                    if self.basis[i * c + j] && parent[i] == usize::MAX {
                        parent[i] = node;
                        stack.push(i);
                    }
                }
            }
        }
        debug_assert!(parent[to] != usize::MAX, "basis tree must connect all nodes");
        let mut path = vec![to];
        let mut node = to;
        while node != from {
            node = parent[node];
            path.push(node);
        }
        path.reverse();
        path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn assert_marginals(plan: &TransportPlan, supply: &[f64], demand: &[f64]) {
        let (rows, cols) = plan.marginals();
        for (got, want) in rows.iter().zip(supply) {
            assert!((got - want).abs() < 1e-7, "row marginal {got} vs {want}");
        }
        for (got, want) in cols.iter().zip(demand) {
            assert!((got - want).abs() < 1e-7, "col marginal {got} vs {want}");
        }
    }

    #[test]
    fn identity_instance_costs_zero() {
        let supply = [0.3, 0.7];
        let costs = [0.0, 1.0, 1.0, 0.0];
        let plan = solve_transport(&supply, &supply, &costs).unwrap();
        assert_eq!(plan.cost(), 0.0);
        assert_eq!(plan.flow(0, 0), 0.3);
        assert_eq!(plan.flow(1, 1), 0.7);
        assert_marginals(&plan, &supply, &supply);
    }

    #[test]
    fn single_edge_instance_is_forced() {
        let plan = solve_transport(&[1.0], &[1.0], &[2.5]).unwrap();
        assert_eq!(plan.flow(0, 0), 1.0);
        assert!((plan.cost() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_matches_the_one_parameter_enumeration() {
        // Equal halves on both sides leave one degree of freedom
        // f(0,0) = t; sweep t to brute-force the optimum.
        let supply = [0.5, 0.5];
        let demand = [0.5, 0.5];
        let costs = [0.0, 3.0, 1.0, 2.0];
        let plan = solve_transport(&supply, &demand, &costs).unwrap();
        let mut best = f64::INFINITY;
        let steps = 500_000usize;
        for s in 0..=steps {
            let t = 0.5 * s as f64 / steps as f64;
            let cost =
                t * costs[0] + (0.5 - t) * costs[1] + (0.5 - t) * costs[2] + t * costs[3];
            best = best.min(cost);
        }
        assert!(
            (plan.cost() - best).abs() < 1e-6,
            "solver {} vs enumerated {best}",
            plan.cost()
        );
        assert_marginals(&plan, &supply, &demand);
    }

    #[test]
    fn unbalanced_totals_are_rejected() {
        assert!(solve_transport(&[0.6, 0.6], &[0.5, 0.5], &[0.0; 4]).is_err());
    }

    #[test]
    fn negative_entries_are_rejected() {
        assert!(solve_transport(&[-0.1, 1.1], &[0.5, 0.5], &[0.0; 4]).is_err());
    }

    /// Random feasible plan by greedy filling in a random cell order.
    fn random_feasible_cost(
        rng: &mut ChaCha12Rng,
        supply: &[f64],
        demand: &[f64],
        costs: &[f64],
    ) -> f64 {
        let r = supply.len();
        let c = demand.len();
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut cells: Vec<(usize, usize)> =
            (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
        for t in (1..cells.len()).rev() {
            let pick = rng.gen_range(0..=t);
            cells.swap(t, pick);
        }
        let mut flow = vec![0.0; r * c];
        for (i, j) in cells {
            let f = s[i].min(d[j]);
            flow[i * c + j] = f;
            s[i] -= f;
            d[j] -= f;
        }
        // Visiting every cell exhausts both sides of a balanced instance, so
        // the greedy fill is feasible in any order.
        plan_cost(&flow, costs)
    }

    #[test]
    fn optimum_undercuts_randomly_sampled_plans() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..20 {
            let r = rng.gen_range(1..=5);
            let c = rng.gen_range(1..=5);
            let mut supply: Vec<f64> = (0..r).map(|_| rng.gen_range(0.1..1.0)).collect();
            let mut demand: Vec<f64> = (0..c).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s_total: f64 = supply.iter().sum();
            let d_total: f64 = demand.iter().sum();
            supply.iter_mut().for_each(|v| *v /= s_total);
            demand.iter_mut().for_each(|v| *v /= d_total);
            let costs: Vec<f64> = (0..r * c).map(|_| rng.gen_range(0.0..10.0)).collect();
            let plan = solve_transport(&supply, &demand, &costs).unwrap();
            assert_marginals(&plan, &supply, &demand);
            for _ in 0..50 {
                let sampled = random_feasible_cost(&mut rng, &supply, &demand, &costs);
                assert!(
                    plan.cost() <= sampled + 1e-9,
                    "optimum {} beaten by sampled plan {sampled}",
                    plan.cost()
                );
            }
        }
    }

    #[test]
    fn degenerate_equal_weights_still_terminate() {
        // Many ties in the northwest walk produce zero-flow basic cells.
        let supply = [0.25; 4];
        let demand = [0.25; 4];
        let costs: Vec<f64> = (0..16).map(|i| ((i * 7) % 11) as f64).collect();
        let plan = solve_transport(&supply, &demand, &costs).unwrap();
        assert_marginals(&plan, &supply, &demand);
    }

    #[test]
    fn solver_is_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let supply = [0.2, 0.3, 0.5];
        let demand = [0.4, 0.6];
        let costs: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a = solve_transport(&supply, &demand, &costs).unwrap();
        let b = solve_transport(&supply, &demand, &costs).unwrap();
        assert_eq!(a, b, "identical inputs must give identical plans");
    }

    #[test]
    fn transposed_plan_swaps_marginals() {
        let supply = [0.3, 0.7];
        let demand = [0.5, 0.25, 0.25];
        let costs = [1.0, 2.0, 3.0, 4.0, 0.5, 2.0];
        let plan = solve_transport(&supply, &demand, &costs).unwrap();
        let t = plan.transposed();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.cols(), 2);
        assert_eq!(plan.cost(), t.cost());
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(plan.flow(i, j), t.flow(j, i));
            }
        }
    }
}
