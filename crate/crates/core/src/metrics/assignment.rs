//! Exact minimum-cost perfect matching on a dense square cost matrix
//! (shortest augmenting paths with dual potentials, O(n^3)).

use crate::error::{Error, Result};

/// Solves the assignment problem for the row-major `n x n` matrix `cost`.
/// Returns `(assignment, total)` with `assignment[row] = column`.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Result<(Vec<usize>, f64)> {
    if cost.len() != n * n {
        return Err(Error::domain(format!(
            "cost matrix has {} entries, expected {}",
            cost.len(),
            n * n
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Evaluation(
            "cost matrix holds a non-finite entry".into(),
        ));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }

    // 1-based indices; column 0 is the virtual root of each augmenting search.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - ui0 - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return Err(Error::Evaluation("assignment search stalled".into()));
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[r * n + c])
        .sum();
    Ok((assignment, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for c in 0..n {
                if !used[c] {
                    used[c] = true;
                    rec(cost, n, row + 1, used, acc + cost[row * n + c], best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn small_known_instance() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let (a, total) = min_cost_assignment(&cost, 3).unwrap();
        assert_eq!(total, 5.0);
        let mut cols = a.clone();
        cols.sort();
        assert_eq!(cols, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(min_cost_assignment(&[1.0, 2.0], 2).is_err());
        assert!(min_cost_assignment(&[f64::NAN], 1).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..7, seed in any::<u64>()) {
            let mut rng = crate::rng::RngStream::new(seed).rng();
            let cost: Vec<f64> = (0..n * n).map(|_| rand::Rng::random_range(&mut rng, -5.0..5.0)).collect();
            let (a, total) = min_cost_assignment(&cost, n).unwrap();
            let mut seen = vec![false; n];
            for &c in &a { prop_assert!(!seen[c]); seen[c] = true; }
            prop_assert!((total - brute_force(&cost, n)).abs() < 1e-9);
        }
    }
}
