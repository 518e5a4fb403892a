//! Maximum-weight rectangular assignment.
//!
//! Solved as a min-cost problem with the shortest-augmenting-path Hungarian
//! method (O(n²m)). Among all optimal assignments the lexicographically
//! smallest list of `(row, col)` pairs is returned: the dual potentials give
//! the equality subgraph that contains every optimum, and rows are fixed
//! greedily to their smallest feasible column inside it.

const INF: f64 = f64::INFINITY;

/// Returns `(row, col)` pairs, sorted by row, of a one-to-one assignment
/// covering `min(rows, cols)` pairs with maximal total score.
///
/// # Panics
/// If the matrix is ragged or holds non-finite entries.
pub fn hungarian_assign(scores: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n_rows = scores.len();
    let n_cols = scores.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 {
        return Vec::new();
    }
    assert!(
        scores.iter().all(|r| r.len() == n_cols),
        "score matrix rows differ in length"
    );
    assert!(
        scores.iter().flatten().all(|v| v.is_finite()),
        "score matrix holds non-finite entries"
    );

    let transposed = n_rows > n_cols;
    let (n, m) = if transposed { (n_cols, n_rows) } else { (n_rows, n_cols) };
    let cost = |i: usize, j: usize| -> f64 {
        if transposed {
            -scores[j][i]
        } else {
            -scores[i][j]
        }
    };

    let (u, v) = solve_min_cost(n, m, &cost);

    let scale = scores
        .iter()
        .flatten()
        .fold(1.0f64, |acc, x| acc.max(x.abs()));
    let eps = 1e-10 * scale * (n + m) as f64;

    // Equality subgraph and required vertices in the original orientation.
    let mut tight = vec![vec![false; n_cols]; n_rows];
    for (r, row) in tight.iter_mut().enumerate() {
        for (c, t) in row.iter_mut().enumerate() {
            let (i, j) = if transposed { (c, r) } else { (r, c) };
            *t = cost(i, j) - u[i + 1] - v[j + 1] <= eps;
        }
    }
    let (row_required, col_required): (Vec<bool>, Vec<bool>) = if transposed {
        (
            (0..n_rows).map(|r| v[r + 1] < -eps).collect(),
            vec![true; n_cols],
        )
    } else {
        (
            vec![true; n_rows],
            (0..n_cols).map(|c| v[c + 1] < -eps).collect(),
        )
    };

    lexicographic_matching(&tight, &row_required, &col_required)
}

/// Hungarian method for `n <= m`, 1-indexed potentials as returned.
fn solve_min_cost(n: usize, m: usize, cost: &dyn Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
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
    (u, v)
}

/// Lexicographically smallest matching in `tight` that saturates every
/// required row and column.
fn lexicographic_matching(
    tight: &[Vec<bool>],
    row_required: &[bool],
    col_required: &[bool],
) -> Vec<(usize, usize)> {
    let n_rows = tight.len();
    let n_cols = col_required.len();
    let mut col_used = vec![false; n_cols];
    let mut pairs = Vec::new();
    for r in 0..n_rows {
        let mut chosen = None;
        for c in 0..n_cols {
            if col_used[c] || !tight[r][c] {
                continue;
            }
            col_used[c] = true;
            let ok = feasible(tight, r + 1, &col_used, row_required, col_required);
            if ok {
                chosen = Some(c);
                break;
            }
            col_used[c] = false;
        }
        match chosen {
            Some(c) => pairs.push((r, c)),
            None => debug_assert!(!row_required[r], "required row {r} left unmatched"),
        }
    }
    pairs
}

/// Whether rows `from..` and the unused columns admit a matching in `tight`
/// covering the remaining required rows, and one covering the remaining
/// required columns. Two such matchings imply one that covers both.
fn feasible(
    tight: &[Vec<bool>],
    from: usize,
    col_used: &[bool],
    row_required: &[bool],
    col_required: &[bool],
) -> bool {
    let n_rows = tight.len();
    let n_cols = col_used.len();

    // Rows -> columns.
    let mut match_col: Vec<Option<usize>> = vec![None; n_cols];
    for r in from..n_rows {
        if row_required[r] {
            let mut seen = vec![false; n_cols];
            if !augment_row(r, tight, col_used, &mut match_col, &mut seen) {
                return false;
            }
        }
    }

    // Columns -> rows.
    let mut match_row: Vec<Option<usize>> = vec![None; n_rows];
    for c in 0..n_cols {
        if col_required[c] && !col_used[c] {
            let mut seen = vec![false; n_rows];
            if !augment_col(c, tight, from, &mut match_row, &mut seen) {
                return false;
            }
        }
    }
    true
}

fn augment_row(
    r: usize,
    tight: &[Vec<bool>],
    col_used: &[bool],
    match_col: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for c in 0..col_used.len() {
        if col_used[c] || !tight[r][c] || seen[c] {
            continue;
        }
        seen[c] = true;
        let free = match match_col[c] {
            None => true,
            Some(other) => augment_row(other, tight, col_used, match_col, seen),
        };
        if free {
            match_col[c] = Some(r);
            return true;
        }
    }
    false
}

fn augment_col(
    c: usize,
    tight: &[Vec<bool>],
    from: usize,
    match_row: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for r in from..tight.len() {
        if !tight[r][c] || seen[r] {
            continue;
        }
        seen[r] = true;
        let free = match match_row[r] {
            None => true,
            Some(other) => augment_col(other, tight, from, match_row, seen),
        };
        if free {
            match_row[r] = Some(c);
            return true;
        }
    }
    false
}

/// Sum of the assigned scores, accumulated in row order.
pub fn assignment_total(scores: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| scores[r][c]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive oracle: best total over all injective maps from the
    /// smaller side into the larger one, ties broken lexicographically.
    fn brute_force(scores: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
        let n_rows = scores.len();
        let n_cols = scores[0].len();
        let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
        let mut current = Vec::new();
        let mut used = vec![false; n_cols];
        let k = n_rows.min(n_cols);
        fn rec(
            r: usize,
            k: usize,
            scores: &[Vec<f64>],
            used: &mut Vec<bool>,
            current: &mut Vec<(usize, usize)>,
            best: &mut Option<(f64, Vec<(usize, usize)>)>,
        ) {
            let remaining_rows = scores.len() - r;
            if current.len() + remaining_rows < k {
                return;
            }
            if r == scores.len() {
                let total: f64 = current.iter().map(|&(r, c)| scores[r][c]).sum();
                let better = match best {
                    None => true,
                    Some((b, pairs)) => total > *b || (total == *b && *current < *pairs),
                };
                if better {
                    *best = Some((total, current.clone()));
                }
                return;
            }
            for c in 0..used.len() {
                if !used[c] {
                    used[c] = true;
                    current.push((r, c));
                    rec(r + 1, k, scores, used, current, best);
                    current.pop();
                    used[c] = false;
                }
            }
            rec(r + 1, k, scores, used, current, best);
        }
        rec(0, k, scores, &mut used, &mut current, &mut best);
        best.unwrap()
    }

    #[test]
    fn identity_favoring() {
        let s = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(hungarian_assign(&s), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn prefers_larger_total() {
        let s = vec![vec![0.9, 0.8], vec![0.85, 0.1]];
        assert_eq!(hungarian_assign(&s), vec![(0, 1), (1, 0)]);
        assert!((assignment_total(&s, &hungarian_assign(&s)) - 1.65).abs() < 1e-12);
    }

    #[test]
    fn empty_matrix() {
        assert!(hungarian_assign(&[]).is_empty());
        assert!(hungarian_assign(&[vec![], vec![]]).is_empty());
    }

    #[test]
    fn ties_break_lexicographically() {
        let s = vec![vec![1.0; 3]; 3];
        assert_eq!(hungarian_assign(&s), vec![(0, 0), (1, 1), (2, 2)]);
        let wide = vec![vec![0.5; 4]; 2];
        assert_eq!(hungarian_assign(&wide), vec![(0, 0), (1, 1)]);
        let tall = vec![vec![0.5; 2]; 4];
        assert_eq!(hungarian_assign(&tall), vec![(0, 0), (1, 1)]);
        let tall_zero_first = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(hungarian_assign(&tall_zero_first), vec![(1, 0), (2, 1)]);
    }

    #[test]
    fn seven_by_seven_matches_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let s: Vec<Vec<f64>> = (0..7)
                .map(|_| (0..7).map(|_| rng.random::<f64>()).collect())
                .collect();
            let pairs = hungarian_assign(&s);
            let (best, oracle_pairs) = brute_force(&s);
            assert_eq!(assignment_total(&s, &pairs), best);
            assert_eq!(pairs, oracle_pairs);
        }
    }

    #[test]
    fn rectangular_and_tied_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let r = rng.random_range(1..=6);
            let c = rng.random_range(1..=6);
            // Few distinct values so ties are common.
            let s: Vec<Vec<f64>> = (0..r)
                .map(|_| (0..c).map(|_| rng.random_range(0..4) as f64 * 0.25).collect())
                .collect();
            let pairs = hungarian_assign(&s);
            let (best, oracle_pairs) = brute_force(&s);
            assert_eq!(pairs.len(), r.min(c));
            assert_eq!(assignment_total(&s, &pairs), best, "{s:?}");
            assert_eq!(pairs, oracle_pairs, "{s:?}");
        }
    }
}
