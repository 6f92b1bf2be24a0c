//! Clustering primitives shared by the embedding-based strategies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::StrategyError;
use crate::linalg::{distance, squared_distance, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans<T> {
    /// `k × dim`
    pub centroids: Matrix<T>,
    /// cluster index per point
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

impl<T: Scalar> KMeans<T> {
    /// Within-cluster sum of squared distances.
    pub fn sse(&self, points: &Matrix<T>) -> T {
        self.assignment
            .iter()
            .enumerate()
            .map(|(i, &c)| squared_distance(points.row(i), self.centroids.row(c)))
            .sum()
    }
}

fn check_k(k: usize, n: usize) -> Result<(), StrategyError> {
    if k == 0 || k > n {
        return Err(StrategyError::InvalidContext(format!(
            "cluster count {k} must lie in [1, {n}]"
        )));
    }
    Ok(())
}

fn nearest<T: Scalar>(point: &[T], centroids: &Matrix<T>) -> (usize, T) {
    let mut best = (0, squared_distance(point, centroids.row(0)));
    for c in 1..centroids.rows() {
        let d = squared_distance(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Independent k-means++ starts per [`kmeans`] call.
pub const KMEANS_RESTARTS: usize = 10;

/// k-means++ seeding followed by Lloyd iterations until the assignment is
/// stable or `max_iter` rounds have run. An emptied cluster is re-seeded at
/// the point farthest from its current centroid. The whole procedure runs
/// [`KMEANS_RESTARTS`] times from one seeded stream and the run with the
/// lowest within-cluster error is kept (earliest on ties).
pub fn kmeans<T: Scalar>(points: &Matrix<T>, k: usize, seed: u64, max_iter: usize) -> Result<KMeans<T>, StrategyError> {
    check_k(k, points.rows())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = kmeans_once(points, k, &mut rng, max_iter);
    let mut best_sse = best.sse(points);
    for _ in 1..KMEANS_RESTARTS {
        let run = kmeans_once(points, k, &mut rng, max_iter);
        let sse = run.sse(points);
        if sse < best_sse {
            best = run;
            best_sse = sse;
        }
    }
    Ok(best)
}

fn kmeans_once<T: Scalar>(points: &Matrix<T>, k: usize, rng: &mut ChaCha8Rng, max_iter: usize) -> KMeans<T> {
    let n = points.rows();
    let dim = points.cols();

    let mut seeds = vec![rng.random_range(0..n)];
    let mut d2: Vec<T> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(seeds[0])))
        .collect();
    while seeds.len() < k {
        let total: T = d2.iter().copied().sum();
        let next = if total > T::zero() {
            let mut target = T::lit(rng.random::<f64>()) * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > T::zero() {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            (0..n).find(|i| !seeds.contains(i)).expect("k <= n")
        };
        seeds.push(next);
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(squared_distance(points.row(i), points.row(next)));
        }
    }
    let mut centroids = points.select_rows(&seeds);

    let mut assignment = vec![usize::MAX; n];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let next: Vec<usize> = (0..n).map(|i| nearest(points.row(i), &centroids).0).collect();
        let mut changed = next != assignment;
        assignment = next;

        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, &x) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assignment[i]] > 1)
                    .map(|i| (i, squared_distance(points.row(i), centroids.row(assignment[i]))))
                    .fold(None, |best: Option<(usize, T)>, (i, d)| match best {
                        Some((_, bd)) if bd >= d => best,
                        _ => Some((i, d)),
                    });
                if let Some((i, _)) = far {
                    let old = assignment[i];
                    counts[old] -= 1;
                    for (s, &x) in sums.row_mut(old).iter_mut().zip(points.row(i)) {
                        *s -= x;
                    }
                    assignment[i] = c;
                    counts[c] = 1;
                    changed = true;
                    sums.row_mut(c).copy_from_slice(points.row(i));
                }
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = T::one() / T::of_usize(counts[c]);
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        if !changed {
            break;
        }
    }
    KMeans {
        centroids,
        assignment,
        iterations,
    }
}

fn distance_matrix<T: Scalar>(points: &Matrix<T>) -> Vec<Vec<T>> {
    let n = points.rows();
    let mut d = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = distance(points.row(i), points.row(j));
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Largest `C(n, k)` for which [`kmedoids`] searches every medoid set.
pub const EXHAUSTIVE_MEDOID_SUBSETS: u64 = 20_000;

fn subset_count(n: usize, k: usize) -> u64 {
    let k = k.min(n - k) as u64;
    let mut c: u64 = 1;
    for i in 0..k {
        c = c.saturating_mul(n as u64 - i) / (i + 1);
        if c > EXHAUSTIVE_MEDOID_SUBSETS {
            return u64::MAX;
        }
    }
    c
}

/// Cheapest medoid set over all `k`-subsets, earliest in lexicographic order
/// on ties.
fn exhaustive_medoids<T: Scalar>(d: &[Vec<T>], k: usize) -> Vec<usize> {
    let n = d.len();
    let mut set: Vec<usize> = (0..k).collect();
    let mut best = (set.clone(), cost_with(d, &set));
    loop {
        let Some(i) = (0..k).rev().find(|&i| set[i] < n - k + i) else {
            return best.0;
        };
        set[i] += 1;
        for j in i + 1..k {
            set[j] = set[j - 1] + 1;
        }
        let cost = cost_with(d, &set);
        if cost < best.1 - T::lit(1e-12) * best.1.max(T::one()) {
            best = (set.clone(), cost);
        }
    }
}

/// Sum over points of the distance to their nearest medoid.
pub fn medoid_cost<T: Scalar>(points: &Matrix<T>, medoids: &[usize]) -> T {
    (0..points.rows())
        .map(|i| {
            medoids
                .iter()
                .map(|&m| distance(points.row(i), points.row(m)))
                .fold(T::infinity(), T::min)
        })
        .sum()
}

fn cost_with<T: Scalar>(d: &[Vec<T>], medoids: &[usize]) -> T {
    d.iter()
        .map(|row| medoids.iter().map(|&m| row[m]).fold(T::infinity(), T::min))
        .sum()
}

/// Partitioning around medoids: greedy BUILD, then the best improving
/// single swap until none improves or `max_iter` swaps were made. When
/// there are at most [`EXHAUSTIVE_MEDOID_SUBSETS`] candidate medoid sets
/// they are all scored instead, which yields the optimum (itself a swap
/// fixed point). The result is deterministic; medoid indices are returned
/// ascending.
pub fn kmedoids<T: Scalar>(points: &Matrix<T>, k: usize, max_iter: usize) -> Result<Vec<usize>, StrategyError> {
    let n = points.rows();
    check_k(k, n)?;
    if k == n {
        return Ok((0..n).collect());
    }
    let d = distance_matrix(points);
    if subset_count(n, k) <= EXHAUSTIVE_MEDOID_SUBSETS {
        return Ok(exhaustive_medoids(&d, k));
    }
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    while medoids.len() < k {
        let mut best: Option<(usize, T)> = None;
        let candidates: Vec<usize> = (0..n).filter(|c| !medoids.contains(c)).collect();
        for cand in candidates {
            medoids.push(cand);
            let cost = cost_with(&d, &medoids);
            medoids.pop();
            if best.is_none_or(|(_, b)| cost < b) {
                best = Some((cand, cost));
            }
        }
        medoids.push(best.expect("candidate exists").0);
    }

    let mut current = cost_with(&d, &medoids);
    for _ in 0..max_iter {
        let mut best: Option<(usize, usize, T)> = None;
        for slot in 0..k {
            for cand in (0..n).filter(|c| !medoids.contains(c)) {
                let mut trial = medoids.clone();
                trial[slot] = cand;
                let cost = cost_with(&d, &trial);
                if best.is_none_or(|(_, _, b)| cost < b) {
                    best = Some((slot, cand, cost));
                }
            }
        }
        match best {
            // relative slack keeps rounding noise from triggering swaps
            Some((slot, cand, cost)) if cost < current - T::lit(1e-12) * current.max(T::one()) => {
                medoids[slot] = cand;
                current = cost;
            }
            _ => break,
        }
    }
    medoids.sort_unstable();
    Ok(medoids)
}

/// Farthest-first traversal. Starts from index 0 when nothing is
/// preselected, then repeatedly adds the point whose distance to the
/// nearest chosen or preselected point is largest (ties to the smaller
/// index). Returns `k` indices distinct from each other in pick order.
pub fn kcenter_greedy<T: Scalar>(
    points: &Matrix<T>,
    k: usize,
    preselected: &[usize],
) -> Result<Vec<usize>, StrategyError> {
    let n = points.rows();
    check_k(k, n)?;
    if let Some(&bad) = preselected.iter().find(|&&p| p >= n) {
        return Err(StrategyError::InvalidContext(format!(
            "preselected index {bad} outside [0, {n})"
        )));
    }
    let mut chosen = Vec::with_capacity(k);
    let mut min_d = vec![T::infinity(); n];
    let absorb = |centre: usize, min_d: &mut Vec<T>| {
        for (i, slot) in min_d.iter_mut().enumerate() {
            *slot = slot.min(distance(points.row(i), points.row(centre)));
        }
    };
    for &p in preselected {
        absorb(p, &mut min_d);
    }
    if preselected.is_empty() {
        chosen.push(0);
        absorb(0, &mut min_d);
    }
    while chosen.len() < k {
        let mut best: Option<(usize, T)> = None;
        for i in (0..n).filter(|i| !chosen.contains(i)) {
            if best.is_none_or(|(_, b)| min_d[i] > b) {
                best = Some((i, min_d[i]));
            }
        }
        let pick = best.expect("k <= n leaves a candidate").0;
        chosen.push(pick);
        absorb(pick, &mut min_d);
    }
    Ok(chosen)
}

/// Largest distance from any point to its nearest centre.
pub fn covering_radius<T: Scalar>(points: &Matrix<T>, centres: &[usize]) -> T {
    (0..points.rows())
        .map(|i| {
            centres
                .iter()
                .map(|&c| distance(points.row(i), points.row(c)))
                .fold(T::infinity(), T::min)
        })
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pts(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn kmeans_separated_pairs() {
        let p = pts(&[&[0.0, 0.0], &[0.0, 1.0], &[10.0, 10.0], &[10.0, 11.0]]);
        for seed in 0..10 {
            let km = kmeans(&p, 2, seed, 100).unwrap();
            let mut cs: Vec<Vec<f64>> = (0..2).map(|c| km.centroids.row(c).to_vec()).collect();
            cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert_eq!(cs, vec![vec![0.0, 0.5], vec![10.0, 10.5]]);
            assert_eq!(km.assignment[0], km.assignment[1]);
            assert_ne!(km.assignment[0], km.assignment[2]);
        }
    }

    #[test]
    fn kmeans_with_k_equal_n_recovers_points() {
        let p = pts(&[&[1.0], &[4.0], &[9.0]]);
        let km = kmeans(&p, 3, 2, 50).unwrap();
        let mut cs: Vec<f64> = km.centroids.as_slice().to_vec();
        cs.sort_by(f64::total_cmp);
        assert_eq!(cs, vec![1.0, 4.0, 9.0]);
        assert_eq!(km.sse(&p), 0.0);
    }

    #[test]
    fn kmeans_duplicates_fill_every_cluster() {
        let p = pts(&[&[2.0, 2.0][..]; 5]);
        let km = kmeans(&p, 3, 9, 20).unwrap();
        assert_eq!(km.centroids.rows(), 3);
        assert_eq!(km.sse(&p), 0.0);
    }

    #[test]
    fn kmeans_rejects_bad_k() {
        let p = pts(&[&[0.0]]);
        assert!(kmeans(&p, 0, 0, 10).is_err());
        assert!(kmeans(&p, 2, 0, 10).is_err());
    }

    #[test]
    fn kmedoids_collinear_median() {
        let p = pts(&[&[0.0], &[1.0], &[5.0]]);
        assert_eq!(kmedoids(&p, 1, 50).unwrap(), vec![1]);
        assert_eq!(kmedoids(&p, 3, 50).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn kmedoids_two_groups() {
        let p = pts(&[&[0.0], &[1.0], &[2.0], &[20.0], &[21.0], &[22.0], &[23.0]]);
        let m = kmedoids(&p, 2, 50).unwrap();
        assert_eq!(m[0], 1);
        assert!(m[1] == 4 || m[1] == 5);
        assert_abs_diff_eq!(medoid_cost(&p, &m), 2.0 + 4.0);
    }

    #[test]
    fn large_inputs_end_at_a_swap_fixed_point() {
        let vals: Vec<f64> = (0..40).map(|i| ((i * 37) % 41) as f64 + 0.1 * i as f64).collect();
        let rows: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v, (v * 0.7).sin()]).collect();
        let p = Matrix::from_rows(&rows).unwrap();
        assert!(subset_count(40, 4) > EXHAUSTIVE_MEDOID_SUBSETS);
        let m = kmedoids(&p, 4, 200).unwrap();
        let cost = medoid_cost(&p, &m);
        for slot in 0..4 {
            for cand in (0..40).filter(|c| !m.contains(c)) {
                let mut trial = m.clone();
                trial[slot] = cand;
                assert!(medoid_cost(&p, &trial) >= cost - 1e-9);
            }
        }
    }

    #[test]
    fn subset_counts() {
        assert_eq!(subset_count(7, 2), 21);
        assert_eq!(subset_count(16, 3), 560);
        assert_eq!(subset_count(10, 10), 1);
        assert_eq!(subset_count(1000, 500), u64::MAX);
    }

    #[test]
    fn kcenter_line_examples() {
        let p = pts(&[&[0.0], &[1.0], &[10.0]]);
        assert_eq!(kcenter_greedy(&p, 2, &[]).unwrap(), vec![0, 2]);
        assert_eq!(kcenter_greedy(&p, 1, &[2]).unwrap(), vec![0]);
        assert_eq!(kcenter_greedy(&p, 1, &[0]).unwrap(), vec![2]);
        assert!(kcenter_greedy(&p, 1, &[3]).is_err());
    }

    #[test]
    fn kcenter_reuses_preselected_only_when_everything_is_covered() {
        let p = pts(&[&[0.0], &[0.0], &[0.0]]);
        assert_eq!(kcenter_greedy(&p, 3, &[1]).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn covering_radius_of_line() {
        let p = pts(&[&[0.0], &[1.0], &[10.0]]);
        assert_eq!(covering_radius(&p, &[0, 2]), 1.0);
    }
}
