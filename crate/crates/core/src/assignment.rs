//! Maximum-weight bipartite matching (Hungarian method with potentials).

use alloc::vec;
use alloc::vec::Vec;

/// For a `rows x cols` weight matrix, returns `matched[r] = Some(c)` for a
/// one-to-one partial matching maximizing the summed weight.
///
/// Rectangular inputs are padded with zero-weight dummies; a row matched to
/// a dummy column is reported as unmatched.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let n = rows.max(cols);
    let max_w = weights.iter().flatten().copied().fold(0.0_f64, f64::max);
    // Minimization over cost = max_w - w; dummies cost max_w (weight 0).
    let cost = |r: usize, c: usize| -> f64 {
        if r < rows && c < cols {
            max_w - weights[r][c]
        } else {
            max_w
        }
    };

    // 1-based arrays, column 0 is the virtual root.
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for r in 1..=n {
        owner[0] = r;
        let mut col0 = 0usize;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let reduced = cost(r0 - 1, c - 1) - u[r0] - v[c];
                if reduced < min_v[c] {
                    min_v[c] = reduced;
                    way[c] = col0;
                }
                if min_v[c] < delta {
                    delta = min_v[c];
                    col1 = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    min_v[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut matched = vec![None; rows];
    for (c, &r) in owner.iter().enumerate().take(n + 1).skip(1) {
        if (1..=rows).contains(&r) && c <= cols {
            matched[r - 1] = Some(c - 1);
        }
    }
    matched
}
