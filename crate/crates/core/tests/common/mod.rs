//! Independent reference implementations used by the tests. Each one solves
//! its problem by exhaustive enumeration rather than by the library's method.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ovsc_core::overlap_decode::{DurationConfig, FrameClass, EMISSION_FLOOR};
use ovsc_core::segments::OverlapVector;
use ovsc_core::timeline::Timeline;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the sign
/// of R's diagonal folded into Q.
pub fn random_orthogonal(rng: &mut impl Rng, k: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, k, k).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// All index combinations of size `m` from `0..k`, in lexicographic order.
pub fn combinations(k: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i + 1, k, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k, m, &mut Vec::new(), &mut out);
    out
}

/// Every feasible binary N x K matrix (row sums 1 + v_i), with its squared
/// distance to `y`. Enumerates whole matrices, not rows.
pub fn feasible_assignments(y: &DMatrix<f64>, overlap: &OverlapVector) -> Vec<(DMatrix<u8>, f64)> {
    let (n, k) = y.shape();
    let choices: Vec<Vec<Vec<usize>>> = (0..n).map(|i| combinations(k, 1 + overlap.extra(i))).collect();
    let mut out = Vec::new();
    let mut pick = vec![0usize; n];
    loop {
        let mut x = DMatrix::<u8>::zeros(n, k);
        for i in 0..n {
            for &c in &choices[i][pick[i]] {
                x[(i, c)] = 1;
            }
        }
        let cost: f64 = (0..n)
            .flat_map(|i| (0..k).map(move |c| (i, c)))
            .map(|(i, c)| (f64::from(x[(i, c)]) - y[(i, c)]).powi(2))
            .sum();
        out.push((x, cost));
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            pick[i] += 1;
            if pick[i] < choices[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

fn frames(seconds: f64, shift: f64) -> usize {
    (seconds / shift - 1e-9).ceil() as usize
}

fn bounds(cfg: &DurationConfig, class: FrameClass, shift: f64) -> (usize, Option<usize>) {
    let (lo, hi) = match class {
        FrameClass::Silence => (cfg.min_silence, cfg.max_silence),
        FrameClass::Single => (cfg.min_single, cfg.max_single),
        FrameClass::Overlap => (cfg.min_overlap, cfg.max_overlap),
    };
    (frames(lo, shift), hi.map(|h| frames(h, shift)))
}

/// Whether a label sequence obeys the run-length bounds and the class
/// adjacency rule (silence and overlap never touch).
pub fn path_is_feasible(path: &[FrameClass], cfg: &DurationConfig, shift: f64) -> bool {
    let mut runs: Vec<(FrameClass, usize)> = Vec::new();
    for &c in path {
        match runs.last_mut() {
            Some((last, len)) if *last == c => *len += 1,
            _ => runs.push((c, 1)),
        }
    }
    let lengths_ok = runs.iter().all(|&(c, len)| {
        let (lo, hi) = bounds(cfg, c, shift);
        len >= lo.max(1) && hi.is_none_or(|h| len <= h)
    });
    let adjacency_ok = runs.windows(2).all(|w| {
        let (a, b) = (w[0].0, w[1].0);
        matches!((a, b), (FrameClass::Single, _) | (_, FrameClass::Single))
    });
    lengths_ok && adjacency_ok
}

pub fn path_score(path: &[FrameClass], posteriors: &[[f64; 3]], bias: [f64; 3]) -> f64 {
    path.iter()
        .zip(posteriors)
        .map(|(c, p)| libm::log((bias[c.index()] * p[c.index()]).max(EMISSION_FLOOR)))
        .sum()
}

/// Maximum score over all 3^T label sequences that are feasible.
pub fn best_feasible_score(posteriors: &[[f64; 3]], cfg: &DurationConfig, shift: f64) -> Option<f64> {
    let t = posteriors.len();
    let mut best: Option<f64> = None;
    let mut path = vec![FrameClass::Silence; t];
    for code in 0..3usize.pow(t as u32) {
        let mut rest = code;
        for slot in path.iter_mut() {
            *slot = FrameClass::ALL[rest % 3];
            rest /= 3;
        }
        if path_is_feasible(&path, cfg, shift) {
            let s = path_score(&path, posteriors, cfg.bias);
            if best.is_none_or(|b| s > b) {
                best = Some(s);
            }
        }
    }
    best
}

/// Random stochastic rows, some with exact zeros.
pub fn random_posteriors(rng: &mut impl Rng, t: usize) -> Vec<[f64; 3]> {
    (0..t)
        .map(|_| {
            let mut row = [0.0; 3];
            for v in row.iter_mut() {
                *v = if rng.random_bool(0.1) { 0.0 } else { rng.random::<f64>() };
            }
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                [0.0, 1.0, 0.0]
            } else {
                row.map(|v| v / s)
            }
        })
        .collect()
}

/// Co-occurrence time of two single-speaker interval lists.
fn shared_time(a: &Timeline, sa: &str, b: &Timeline, sb: &str) -> f64 {
    let mut total = 0.0;
    for x in a.entries().iter().filter(|e| e.speaker == sa) {
        for y in b.entries().iter().filter(|e| e.speaker == sb) {
            total += (x.end.min(y.end) - x.start.max(y.start)).max(0.0);
        }
    }
    total
}

pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// Best total co-occurrence over all bijections between equally sized
/// speaker sets.
pub fn brute_force_mapping_time(reference: &Timeline, hypothesis: &Timeline) -> f64 {
    let refs = reference.speakers();
    let hyps = hypothesis.speakers();
    assert_eq!(refs.len(), hyps.len());
    let idx: Vec<usize> = (0..refs.len()).collect();
    permutations(&idx)
        .iter()
        .map(|perm| {
            perm.iter()
                .enumerate()
                .map(|(h, &r)| shared_time(reference, &refs[r], hypothesis, &hyps[h]))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Random timeline on a 0.25 s grid so that all sums are exact.
pub fn random_timeline(rng: &mut impl Rng, speakers: &[&str], max_turns: usize) -> Timeline {
    let mut t = Timeline::empty();
    for &s in speakers {
        let turns = rng.random_range(1..=max_turns);
        let mut cursor = rng.random_range(0..8) as f64 * 0.25;
        for _ in 0..turns {
            let len = rng.random_range(1..=16) as f64 * 0.25;
            t.push(s, cursor, cursor + len).unwrap();
            cursor += len + rng.random_range(0..12) as f64 * 0.25;
        }
    }
    t.normalized()
}
