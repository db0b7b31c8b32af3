//! Lloyd's k-means with k-means++ seeding and restarts.
//!
//! Used to initialize the samplers and to cluster the point process
//! representation of the draws during relabeling.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::ChainRng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusteringError {
    #[error(
        "k-means needs at least one point, one cluster and one dimension (n={n}, k={k}, d={d})"
    )]
    Empty { n: usize, k: usize, d: usize },
    #[error("data length {len} is not a multiple of the dimension {dim}")]
    Shape { len: usize, dim: usize },
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub n_restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iter: 100,
            n_restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// `k` centers of dimension `d`.
    pub centers: Vec<Vec<f64>>,
    /// 0-based cluster index per point.
    pub labels: Vec<usize>,
    /// Sum of squared distances to the assigned centers.
    pub inertia: f64,
    pub n_nonempty: usize,
    /// Lloyd iterations of the selected restart.
    pub iterations: usize,
    /// Inertia after each assignment step of the selected restart.
    pub inertia_trace: Vec<f64>,
    /// Index of the restart that produced this result.
    pub restart: usize,
}

/// Row-major view over `n` points of dimension `dim`.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self, ClusteringError> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(ClusteringError::Shape {
                len: data.len(),
                dim,
            });
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best-of-restarts k-means.
///
/// One seed per restart is drawn from `rng` up front, so the result does not
/// depend on how restarts are scheduled across threads. Ties in inertia go
/// to the lowest restart index.
pub fn kmeans<R: Rng + ?Sized>(
    points: Points<'_>,
    config: &KMeansConfig,
    rng: &mut R,
) -> Result<KMeansResult, ClusteringError> {
    let n = points.len();
    let k = config.k;
    if n == 0 || k == 0 {
        return Err(ClusteringError::Empty {
            n,
            k,
            d: points.dim(),
        });
    }
    if let Some(i) = (0..n).find(|&i| points.row(i).iter().any(|x| !x.is_finite())) {
        return Err(ClusteringError::NonFinite { row: i });
    }
    let seeds: Vec<u64> = (0..config.n_restarts.max(1))
        .map(|_| rng.random())
        .collect();
    if k >= n {
        return Ok(singleton_clusters(points, k));
    }
    let runs: Vec<KMeansResult> = seeds
        .par_iter()
        .enumerate()
        .map(|(restart, &seed)| {
            let mut local = ChainRng::seed_from_u64(seed);
            let mut res = lloyd(points, k, config.max_iter, &mut local);
            res.restart = restart;
            res
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, cand| {
            if cand.inertia < best.inertia {
                cand
            } else {
                best
            }
        })
        .expect("at least one restart");
    Ok(best)
}

/// `k ≥ n`: every point is its own cluster; surplus centers copy point 0.
fn singleton_clusters(points: Points<'_>, k: usize) -> KMeansResult {
    let n = points.len();
    let centers = (0..k)
        .map(|j| points.row(if j < n { j } else { 0 }).to_vec())
        .collect();
    KMeansResult {
        centers,
        labels: (0..n).collect(),
        inertia: 0.0,
        n_nonempty: n,
        iterations: 0,
        inertia_trace: vec![0.0],
        restart: 0,
    }
}

fn kmeans_plus_plus<R: Rng + ?Sized>(points: Points<'_>, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points.row(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(next).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn assign(points: Points<'_>, centers: &[Vec<f64>], labels: &mut [usize], dist: &mut [f64]) {
    for i in 0..points.len() {
        let row = points.row(i);
        let mut best = (0, f64::INFINITY);
        for (j, c) in centers.iter().enumerate() {
            let d = sq_dist(row, c);
            if d < best.1 {
                best = (j, d);
            }
        }
        labels[i] = best.0;
        dist[i] = best.1;
    }
}

fn lloyd<R: Rng + ?Sized>(
    points: Points<'_>,
    k: usize,
    max_iter: usize,
    rng: &mut R,
) -> KMeansResult {
    let n = points.len();
    let d = points.dim();
    let mut centers = kmeans_plus_plus(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut new_labels = vec![0; n];
    let mut inertia_trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter.max(1) {
        iterations += 1;
        assign(points, &centers, &mut new_labels, &mut dist);

        // re-seed empty clusters with the point farthest from its center
        let mut counts = vec![0usize; k];
        for &l in &new_labels {
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[new_labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[new_labels[i]] -= 1;
                new_labels[i] = j;
                counts[j] = 1;
                dist[i] = 0.0;
                centers[j] = points.row(i).to_vec();
            }
        }
        inertia_trace.push(dist.iter().sum());

        let converged = new_labels == labels;
        labels.copy_from_slice(&new_labels);
        if converged {
            break;
        }

        let mut sums = vec![vec![0.0; d]; k];
        for (i, &l) in labels.iter().enumerate() {
            for (s, x) in sums[l].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
    }

    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), &centers[labels[i]]))
        .sum();
    let mut seen = vec![false; k];
    for &l in &labels {
        seen[l] = true;
    }
    KMeansResult {
        centers,
        labels,
        inertia,
        n_nonempty: seen.iter().filter(|s| **s).count(),
        iterations,
        inertia_trace,
        restart: 0,
    }
}
