//! Minimum-cost perfect assignment on a dense square matrix.
//!
//! Shortest augmenting path formulation of the Hungarian method with row and
//! column potentials, O(n^3).

/// Solves a dense `n × n` minimum-cost assignment.
pub trait AssignmentSolver {
    /// `cost` is row-major. Returns `assignment[row] = column`.
    fn solve(&self, n: usize, cost: &[f64]) -> Vec<usize>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Hungarian;

impl AssignmentSolver for Hungarian {
    fn solve(&self, n: usize, cost: &[f64]) -> Vec<usize> {
        debug_assert_eq!(cost.len(), n * n);
        if n == 0 {
            return Vec::new();
        }
        // 1-based internally; column 0 is the virtual root of each search.
        let mut u = vec![0.0f64; n + 1];
        let mut v = vec![0.0f64; n + 1];
        let mut row_of = vec![0usize; n + 1];
        let mut way = vec![0usize; n + 1];
        let mut minv = vec![0.0f64; n + 1];
        let mut used = vec![false; n + 1];

        for i in 1..=n {
            row_of[0] = i;
            let mut j0 = 0usize;
            minv.fill(f64::INFINITY);
            used.fill(false);
            loop {
                used[j0] = true;
                let i0 = row_of[j0];
                let row = &cost[(i0 - 1) * n..i0 * n];
                let mut delta = f64::INFINITY;
                let mut j1 = 0usize;
                for j in 1..=n {
                    if used[j] {
                        continue;
                    }
                    let cur = row[j - 1] - u[i0] - v[j];
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
                        u[row_of[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if row_of[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                row_of[j0] = row_of[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }

        let mut assignment = vec![0usize; n];
        for j in 1..=n {
            assignment[row_of[j] - 1] = j - 1;
        }
        assignment
    }
}
