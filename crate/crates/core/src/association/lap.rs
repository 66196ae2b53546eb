//! Gated minimum-cost bipartite assignment.
//!
//! Every row gets a private "unmatched" column of cost zero and every real
//! pair is charged `cost - max_cost`, so a pair is only taken when it beats
//! leaving both sides unmatched. Pairs above `max_cost` are forbidden. The
//! resulting rectangular problem is solved exactly with the shortest
//! augmenting path (Hungarian) method using row/column potentials.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

/// Row-major cost matrix with `rows` rows; `cost.len()` must be `rows * cols`.
pub fn solve_assignment<T: Scalar>(cost: &[T], rows: usize, cols: usize, max_cost: T) -> Assignment {
    assert_eq!(cost.len(), rows * cols, "cost matrix shape mismatch");
    if rows == 0 || cols == 0 {
        return Assignment {
            matches: Vec::new(),
            unmatched_rows: (0..rows).collect(),
            unmatched_cols: (0..cols).collect(),
        };
    }

    let width = cols + rows;
    let entry = |i: usize, j: usize| -> Option<T> {
        if j < cols {
            let c = cost[i * cols + j];
            (c <= max_cost).then(|| c - max_cost)
        } else if j - cols == i {
            Some(T::zero())
        } else {
            None
        }
    };

    // 1-based potentials and matching, column 0 is the virtual root.
    let inf = T::infinity();
    let mut u = vec![T::zero(); rows + 1];
    let mut v = vec![T::zero(); width + 1];
    let mut owner = vec![0usize; width + 1];
    let mut way = vec![0usize; width + 1];

    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; width + 1];
        let mut used = vec![false; width + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=width {
                if used[j] {
                    continue;
                }
                if let Some(c) = entry(i0 - 1, j - 1) {
                    let cur = c - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            debug_assert!(j1 != 0, "private unmatched column keeps every row feasible");
            for j in 0..=width {
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

    let mut row_match = vec![None; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            row_match[owner[j] - 1] = Some(j - 1);
        }
    }
    let mut out = Assignment::default();
    let mut col_used = vec![false; cols];
    for (i, m) in row_match.iter().enumerate() {
        match m {
            Some(j) => {
                out.matches.push((i, *j));
                col_used[*j] = true;
            }
            None => out.unmatched_rows.push(i),
        }
    }
    out.unmatched_cols = (0..cols).filter(|&j| !col_used[j]).collect();
    out
}
