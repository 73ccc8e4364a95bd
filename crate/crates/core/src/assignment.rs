//! Exact minimum-cost bipartite assignment on rectangular real matrices.
//!
//! The solver is the shortest-augmenting-path form of the Hungarian method
//! (O(n^2 m) on the padded square). Among all optimal pairings it returns the
//! one that is lexicographically smallest in `(row, col)` order: once the dual
//! potentials are known, every optimum is a perfect matching on the tight
//! edges, and a greedy pass over rows picks the smallest feasible column.

use crate::error::AssignError;

/// Dense `rows x cols` matrix of finite reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignError> {
        if data.len() != rows * cols {
            return Err(AssignError::Shape { rows, cols, len: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(AssignError::NonFinite { row: i / cols.max(1), col: i % cols.max(1) });
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, AssignError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(AssignError::Ragged);
            }
            data.extend_from_slice(r);
        }
        CostMatrix::new(rows.len(), cols, data)
    }

    /// Build from a closure evaluated at every `(row, col)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, AssignError> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CostMatrix::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    fn negated(&self) -> CostMatrix {
        CostMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }
}

/// A one-to-one pairing of rows to columns.
///
/// `pairs` is sorted by row. `total` is the sum of the selected entries,
/// accumulated in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

impl Assignment {
    /// Column assigned to `row`, if any.
    pub fn col_for(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }

    /// Row assigned to `col`, if any.
    pub fn row_for(&self, col: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == col).map(|p| p.0)
    }
}

/// Minimum total cost over all pairings of size `min(rows, cols)`.
pub fn solve_min_cost(c: &CostMatrix) -> Assignment {
    if c.rows == 0 || c.cols == 0 {
        return Assignment { pairs: Vec::new(), total: 0.0 };
    }
    let n = c.rows.max(c.cols);
    // Padding rows/columns are constant, so they never influence which real
    // pairs are chosen.
    let pad = 0.0;
    let cost = |i: usize, j: usize| if i < c.rows && j < c.cols { c.get(i, j) } else { pad };

    let (u, v) = hungarian_potentials(n, &cost);

    let scale = c.data.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-10 * scale;
    let tight = |i: usize, j: usize| cost(i, j) - u[i] - v[j] <= tol;

    let row_to_col = lexicographic_tight_matching(n, c.cols, &tight);

    let mut pairs = Vec::with_capacity(c.rows.min(c.cols));
    let mut total = 0.0;
    for (i, &j) in row_to_col.iter().enumerate().take(c.rows) {
        if j < c.cols {
            pairs.push((i, j));
            total += c.get(i, j);
        }
    }
    Assignment { pairs, total }
}

/// Maximum total score; same tie-breaking as [`solve_min_cost`].
pub fn solve_max_score(s: &CostMatrix) -> Assignment {
    let a = solve_min_cost(&s.negated());
    let total = a.pairs.iter().fold(0.0, |acc, &(i, j)| acc + s.get(i, j));
    Assignment { pairs: a.pairs, total }
}

/// Dual potentials `(u, v)` of an optimal square assignment, such that
/// `cost(i, j) - u[i] - v[j] >= 0` everywhere with equality on some optimum.
fn hungarian_potentials(n: usize, cost: &impl Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    // 1-based arrays; index 0 is the virtual root column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
    (u[1..].to_vec(), v[1..].to_vec())
}

/// Lexicographically smallest perfect matching in the tight-edge graph of an
/// `n x n` problem. Columns `>= real_cols` are padding and are tried last.
fn lexicographic_tight_matching(
    n: usize,
    real_cols: usize,
    tight: &impl Fn(usize, usize) -> bool,
) -> Vec<usize> {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| tight(i, j)).collect())
        .collect();

    let mut row_to_col = vec![usize::MAX; n];
    let mut col_to_row = vec![usize::MAX; n];
    for i in 0..n {
        let mut seen = vec![false; n];
        let found = augment(i, &adj, &mut row_to_col, &mut col_to_row, &mut seen, 0);
        debug_assert!(found, "tight graph must admit a perfect matching");
    }

    // Padding columns sit at indices >= real_cols, so ascending order already
    // tries every real column before any padding.
    debug_assert!(real_cols <= n);
    for i in 0..n {
        for j in 0..n {
            if !tight(i, j) {
                continue;
            }
            if row_to_col[i] == j {
                break;
            }
            if try_reroute(i, j, &adj, &mut row_to_col, &mut col_to_row) {
                break;
            }
        }
    }
    row_to_col
}

/// Kuhn augmenting path from `row`, restricted to rows `>= min_row`.
fn augment(
    row: usize,
    adj: &[Vec<usize>],
    row_to_col: &mut [usize],
    col_to_row: &mut [usize],
    seen: &mut [bool],
    min_row: usize,
) -> bool {
    for &j in &adj[row] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        let owner = col_to_row[j];
        if owner == usize::MAX
            || (owner >= min_row && augment(owner, adj, row_to_col, col_to_row, seen, min_row))
        {
            row_to_col[row] = j;
            col_to_row[j] = row;
            return true;
        }
    }
    false
}

/// Try to force `row -> col` while keeping rows `< row` fixed and the
/// matching perfect. On failure the matching is left unchanged.
fn try_reroute(
    row: usize,
    col: usize,
    adj: &[Vec<usize>],
    row_to_col: &mut [usize],
    col_to_row: &mut [usize],
) -> bool {
    let owner = col_to_row[col];
    if owner < row {
        return false;
    }
    let old_col = row_to_col[row];
    let saved_r2c = row_to_col.to_vec();
    let saved_c2r = col_to_row.to_vec();

    // Detach `row` and `owner`, give `col` to `row`, then the displaced owner
    // must find a new column among rows > row.
    row_to_col[row] = col;
    col_to_row[col] = row;
    col_to_row[old_col] = usize::MAX;
    row_to_col[owner] = usize::MAX;

    let mut seen = vec![false; adj.len()];
    seen[col] = true;
    if augment(owner, adj, row_to_col, col_to_row, &mut seen, row + 1) {
        true
    } else {
        row_to_col.copy_from_slice(&saved_r2c);
        col_to_row.copy_from_slice(&saved_c2r);
        false
    }
}
