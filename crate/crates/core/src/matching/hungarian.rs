use crate::error::{Error, Result};

/// Minimum-cost one-to-one assignment of rows to columns.
///
/// Returns `min(rows, cols)` pairs `(row, col)` in ascending row order. Among all optimal
/// assignments the lexicographically smallest row-to-column map is returned, where the
/// rectangular matrix is first padded with zero-cost dummy rows or columns (dummy columns
/// sort after real ones).
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<(usize, usize)>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::Config("cost matrix rows differ in length".into()));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Domain("cost matrix has non-finite entries".into()));
    }
    let n = rows.max(cols);
    let c = |i: usize, j: usize| if i < rows && j < cols { cost[i][j] } else { 0.0 };

    // Shortest augmenting paths with row/column potentials, 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
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

    // Every optimal assignment uses only edges that are tight under optimal potentials.
    let scale = cost
        .iter()
        .flatten()
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-9 * scale;
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| c(i, j) - u[i + 1] - v[j + 1] <= tol)
                .collect()
        })
        .collect();
    let mut col_of = vec![0usize; n];
    let mut owner = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
        owner[j - 1] = row_of[j] - 1;
    }
    debug_assert!((0..n).all(|i| tight[i][col_of[i]]));

    lexicographic_refine(&tight, &mut col_of, &mut owner);

    Ok((0..rows)
        .filter(|&i| col_of[i] < cols)
        .map(|i| (i, col_of[i]))
        .collect())
}

/// Turns a perfect matching of the tight graph into the lexicographically smallest one.
fn lexicographic_refine(tight: &[Vec<bool>], col_of: &mut [usize], owner: &mut [usize]) {
    let n = tight.len();
    for i in 0..n {
        for target in 0..col_of[i] {
            if !tight[i][target] {
                continue;
            }
            // Row `r` loses `target`; it must reach the column `i` frees through an
            // alternating path over rows that are not yet fixed.
            let r = owner[target];
            if r < i {
                continue;
            }
            let freed = col_of[i];
            let mut seen = vec![false; n];
            seen[target] = true;
            let mut path = Vec::new();
            if augment(tight, r, freed, i, owner, &mut seen, &mut path) {
                // Apply the alternating path: each row in `path` takes the column after it.
                for &(row, col) in &path {
                    col_of[row] = col;
                    owner[col] = row;
                }
                col_of[i] = target;
                owner[target] = i;
                break;
            }
        }
    }
}

/// Depth-first search for an alternating path from `row` to column `goal` that only uses
/// rows greater than `fixed`. Records the new `(row, col)` edges in `path`.
fn augment(
    tight: &[Vec<bool>],
    row: usize,
    goal: usize,
    fixed: usize,
    owner: &[usize],
    seen: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    for col in 0..tight.len() {
        if !tight[row][col] || seen[col] {
            continue;
        }
        seen[col] = true;
        if col == goal {
            path.push((row, col));
            return true;
        }
        let next = owner[col];
        if next > fixed
            && next != row
            && augment(tight, next, goal, fixed, owner, seen, path)
        {
            path.push((row, col));
            return true;
        }
    }
    false
}

/// Sum of the selected entries in row order.
pub fn assignment_cost(cost: &[Vec<f64>], assignment: &[(usize, usize)]) -> f64 {
    assignment.iter().map(|&(i, j)| cost[i][j]).sum()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive oracle: pads to square, walks permutations in lexicographic order and
    /// keeps the first strict minimum.
    pub(crate) fn brute_force(cost: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
        let rows = cost.len();
        let cols = cost.first().map_or(0, Vec::len);
        let n = rows.max(cols);
        let c = |i: usize, j: usize| if i < rows && j < cols { cost[i][j] } else { 0.0 };
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = (f64::INFINITY, Vec::new());
        loop {
            let total: f64 = (0..n).map(|i| c(i, perm[i])).sum();
            if total < best.0 {
                best = (total, perm.clone());
            }
            // next permutation
            let Some(k) = (0..n.saturating_sub(1)).rev().find(|&k| perm[k] < perm[k + 1]) else {
                break;
            };
            let l = (k + 1..n).rev().find(|&l| perm[l] > perm[k]).unwrap();
            perm.swap(k, l);
            perm[k + 1..].reverse();
        }
        let pairs = (0..rows)
            .filter(|&i| best.1[i] < cols)
            .map(|i| (i, best.1[i]))
            .collect();
        (best.0, pairs)
    }

    #[test]
    fn two_by_two_examples() {
        let a = hungarian(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(a, vec![(0, 0), (1, 1)]);
        let b = hungarian(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(b, vec![(0, 1), (1, 0)]);
        assert_eq!(assignment_cost(&[vec![2.0, 1.0], vec![1.0, 2.0]], &b), 2.0);
    }

    #[test]
    fn empty_and_invalid() {
        assert!(hungarian(&[]).unwrap().is_empty());
        assert!(hungarian(&[vec![]]).unwrap().is_empty());
        assert!(hungarian(&[vec![f64::NAN]]).is_err());
        assert!(hungarian(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let all_equal = vec![vec![1.0; 3]; 3];
        assert_eq!(hungarian(&all_equal).unwrap(), vec![(0, 0), (1, 1), (2, 2)]);
        // More rows than columns: the first rows get the real columns.
        let tall = vec![vec![0.0], vec![0.0], vec![0.0]];
        assert_eq!(hungarian(&tall).unwrap(), vec![(0, 0)]);
    }

    #[test]
    fn rectangular_picks_cheapest_rows() {
        let cost = vec![vec![5.0, 9.0], vec![1.0, 8.0], vec![7.0, 2.0]];
        assert_eq!(hungarian(&cost).unwrap(), vec![(1, 0), (2, 1)]);
    }

    fn matrix(max: usize, integer: bool) -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1..=max, 1..=max).prop_flat_map(move |(r, c)| {
            let cell = if integer {
                (0u8..4).prop_map(f64::from).boxed()
            } else {
                (0.0f64..1.0).boxed()
            };
            proptest::collection::vec(proptest::collection::vec(cell, c), r)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn matches_brute_force_with_ties(cost in matrix(6, true)) {
            let got = hungarian(&cost).unwrap();
            let (best, pairs) = brute_force(&cost);
            prop_assert_eq!(assignment_cost(&cost, &got), best);
            prop_assert_eq!(got, pairs);
        }

        #[test]
        fn matches_brute_force_real(cost in matrix(6, false)) {
            let got = hungarian(&cost).unwrap();
            let (best, _) = brute_force(&cost);
            prop_assert_eq!(assignment_cost(&cost, &got), best);
        }
    }
}
