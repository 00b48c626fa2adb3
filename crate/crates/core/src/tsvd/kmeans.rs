//! k-means++ seeding and Lloyd iterations on dense points.
//!
//! Used for clustering documents in the projected singular subspace.
//! Deterministic: seeding consumes a caller-supplied RNG sequentially and
//! all distance sums are accumulated in index order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub struct KMeansOutcome {
    pub assignment: Vec<u32>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub centers: Vec<Vec<f64>>,
    pub cost: f64,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, then each next center drawn
/// with probability proportional to squared distance from the chosen set.
fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut min_d: Vec<f64> = points.iter().map(|p| dist_sq(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = min_d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (j, &w) in min_d.iter().enumerate() {
                if u < w {
                    chosen = j;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            // all points coincide with existing centers; take the lowest
            // index not yet used as a center
            (0..n)
                .find(|&j| centers.iter().all(|c| c != &points[j]))
                .unwrap_or(0)
        };
        centers.push(points[next].clone());
        let last = centers.last().unwrap();
        for (j, p) in points.iter().enumerate() {
            let d = dist_sq(p, last);
            if d < min_d[j] {
                min_d[j] = d;
            }
        }
    }
    centers
}

/// Lloyd iterations to convergence (unchanged assignment) or `max_iters`.
/// Ties go to the lowest cluster id; empty clusters are reseeded with the
/// point farthest from its assigned center.
pub fn lloyd(
    points: &[Vec<f64>],
    mut centers: Vec<Vec<f64>>,
    max_iters: usize,
) -> KMeansOutcome {
    let n = points.len();
    let k = centers.len();
    let dim = centers[0].len();
    let mut assignment: Vec<u32> = vec![u32::MAX; n];
    let mut cost = f64::INFINITY;

    for _ in 0..max_iters {
        let assigned: Vec<(u32, f64)> = points
            .par_iter()
            .map(|p| {
                let mut best = 0u32;
                let mut best_d = f64::INFINITY;
                for (l, c) in centers.iter().enumerate() {
                    let d = dist_sq(p, c);
                    if d < best_d {
                        best_d = d;
                        best = l as u32;
                    }
                }
                (best, best_d)
            })
            .collect();
        let new_assignment: Vec<u32> = assigned.iter().map(|&(a, _)| a).collect();
        let new_cost: f64 = assigned.iter().map(|&(_, d)| d).sum();
        debug_assert!(
            new_cost <= cost * (1.0 + 1e-9) + 1e-9,
            "lloyd cost increased: {new_cost} > {cost}"
        );
        let converged = new_assignment == assignment;
        assignment = new_assignment;
        cost = new_cost;
        if converged {
            break;
        }

        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (j, p) in points.iter().enumerate() {
            let l = assignment[j] as usize;
            counts[l] += 1;
            for (s, &x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for l in 0..k {
            if counts[l] > 0 {
                for s in sums[l].iter_mut() {
                    *s /= counts[l] as f64;
                }
                centers[l] = std::mem::take(&mut sums[l]);
            }
        }
        // Reseed empty clusters with the farthest point from its center.
        let mut stolen = vec![false; n];
        for l in 0..k {
            if counts[l] > 0 {
                continue;
            }
            let mut far_j = 0usize;
            let mut far_d = -1.0f64;
            for (j, p) in points.iter().enumerate() {
                if stolen[j] {
                    continue;
                }
                let d = dist_sq(p, &centers[assignment[j] as usize]);
                if d > far_d {
                    far_d = d;
                    far_j = j;
                }
            }
            centers[l] = points[far_j].clone();
            assignment[far_j] = l as u32;
            stolen[far_j] = true;
        }
    }

    // Final cost against the returned centers and assignment.
    let dists: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(j, p)| dist_sq(p, &centers[assignment[j] as usize]))
        .collect();
    let cost = dists.iter().sum();
    KMeansOutcome {
        assignment,
        centers,
        cost,
    }
}

/// One full k-means run: k-means++ seeding followed by Lloyd.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
    max_iters: usize,
) -> KMeansOutcome {
    let centers = seed_plus_plus(points, k, rng);
    lloyd(points, centers, max_iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_rng;

    #[test]
    fn separated_duplicates_recovered() {
        // three duplicate groups, far apart
        let mut points = Vec::new();
        for _ in 0..4 {
            points.push(vec![0.0, 0.0]);
        }
        for _ in 0..4 {
            points.push(vec![100.0, 0.0]);
        }
        for _ in 0..4 {
            points.push(vec![0.0, 100.0]);
        }
        let mut rng = stream_rng(1, 0);
        let out = kmeans(&points, 3, &mut rng, 100);
        assert!(out.cost < 1e-18);
        for g in 0..3 {
            let base = out.assignment[g * 4];
            for j in 0..4 {
                assert_eq!(out.assignment[g * 4 + j], base);
            }
        }
    }

    #[test]
    fn single_cluster_center_is_mean() {
        let points = vec![vec![1.0, 2.0], vec![3.0, 6.0]];
        let mut rng = stream_rng(0, 0);
        let out = kmeans(&points, 1, &mut rng, 100);
        assert_eq!(out.centers[0], vec![2.0, 4.0]);
    }

    #[test]
    fn hand_traced_one_dimensional_case() {
        let points = vec![vec![0.0], vec![0.0], vec![10.0], vec![10.0]];
        let init = vec![vec![1.0], vec![9.0]];
        let out = lloyd(&points, init, 100);
        assert_eq!(out.centers, vec![vec![0.0], vec![10.0]]);
        assert_eq!(out.cost, 0.0);
        assert_eq!(out.assignment, vec![0, 0, 1, 1]);
    }

    #[test]
    fn optimal_init_is_fixed_point() {
        let points = vec![vec![0.0], vec![0.0], vec![10.0], vec![10.0]];
        let init = vec![vec![0.0], vec![10.0]];
        let out = lloyd(&points, init.clone(), 1);
        assert_eq!(out.centers, init);
        assert_eq!(out.cost, 0.0);
    }
}
