//! Seeded k-means used to initialise responsibilities.

use rand::Rng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centre; ties go to the lowest index.
fn nearest(p: &[f64], centres: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centres.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centres = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centres.push(points[next].to_vec());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centres[centres.len() - 1]));
        }
    }
    centres
}

/// Moves the point farthest from its centre in the largest cluster into
/// each empty cluster.
fn repair_empty(points: &[&[f64]], assign: &mut [usize], centres: &mut [Vec<f64>]) {
    let k = centres.len();
    loop {
        let mut sizes = vec![0usize; k];
        assign.iter().for_each(|&a| sizes[a] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k).fold(0, |best, j| if sizes[j] > sizes[best] { j } else { best });
        if sizes[largest] < 2 {
            return;
        }
        let mut far = (usize::MAX, -1.0);
        for (i, p) in points.iter().enumerate() {
            if assign[i] == largest {
                let d = sq_dist(p, &centres[largest]);
                if d > far.1 {
                    far = (i, d);
                }
            }
        }
        assign[far.0] = empty;
        centres[empty] = points[far.0].to_vec();
    }
}

fn lloyd(points: &[&[f64]], mut centres: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let k = centres.len();
    let dim = points[0].len();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..300 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (j, _) = nearest(p, &centres);
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
        }
        repair_empty(points, &mut assign, &mut centres);
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            sums[a].iter_mut().zip(*p).for_each(|(s, v)| *s += v);
        }
        for j in 0..k {
            if counts[j] > 0 {
                centres[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assign)
        .map(|(p, &a)| sq_dist(p, &centres[a]))
        .sum();
    (assign, inertia)
}

/// Cluster assignments for `points` into `k` non-empty clusters (requires
/// `k <= points.len()`); the restart with the lowest inertia wins.
pub fn kmeans<R: Rng>(points: &[&[f64]], k: usize, restarts: usize, rng: &mut R) -> Vec<usize> {
    assert!(k >= 1 && k <= points.len(), "k-means needs 1 <= k <= n");
    if k == 1 {
        return vec![0; points.len()];
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let centres = plus_plus_init(points, k, rng);
        let (assign, inertia) = lloyd(points, centres);
        if best.as_ref().is_none_or(|b| inertia < b.1) {
            best = Some((assign, inertia));
        }
    }
    best.expect("at least one restart").0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separates_obvious_clusters() {
        let raw: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let base = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)][i % 3];
                vec![base.0 + (i as f64) * 0.01, base.1 - (i as f64) * 0.01]
            })
            .collect();
        let pts: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
        let a = kmeans(&pts, 3, 10, &mut ChaCha8Rng::seed_from_u64(1));
        for i in 0..30 {
            assert_eq!(a[i], a[i % 3]);
        }
        assert_ne!(a[0], a[1]);
        assert_ne!(a[1], a[2]);
    }

    #[test]
    fn no_empty_clusters_with_duplicates() {
        let raw: Vec<Vec<f64>> = (0..5).map(|_| vec![1.0, 1.0]).collect();
        let pts: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
        let a = kmeans(&pts, 5, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn deterministic_for_seed() {
        let raw: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64 * 1.37).sin(), (i as f64 * 0.71).cos()])
            .collect();
        let pts: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
        let a = kmeans(&pts, 4, 10, &mut ChaCha8Rng::seed_from_u64(5));
        let b = kmeans(&pts, 4, 10, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }
}
