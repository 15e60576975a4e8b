//! Normalized-cuts style segmentation: symmetric normalized Laplacian,
//! spectral embedding, row normalization and seeded k-means.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::affinity::AffinityGraph;
use crate::error::{ClarError, Result};
use crate::kernels::Matrix;

pub const DEFAULT_RESTARTS: usize = 50;
const KMEANS_MAX_ITERS: usize = 300;
const KMEANS_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterLabels {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<ClusterLabels> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(ClarError::invalid(format!("label {bad} out of range for k = {k}")));
        }
        Ok(ClusterLabels { labels, k })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Cluster the affinity graph into k groups.
///
/// Degree-zero vertices get a zero D^{-1/2} entry; they land at the
/// embedding origin and are assigned by k-means like any other point.
pub fn spectral_cluster(
    graph: &AffinityGraph,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterLabels> {
    let n = graph.n();
    if k == 0 {
        return Err(ClarError::invalid("k must be >= 1".to_string()));
    }
    if k > n {
        return Err(ClarError::invalid(format!("k = {k} exceeds sample count n = {n}")));
    }
    if k == 1 {
        return ClusterLabels::new(vec![0; n], 1);
    }

    let w = &graph.w;
    let dhalf_inv = DVector::from_fn(n, |i, _| {
        let d: f64 = w.row(i).sum();
        if d > 0.0 {
            1.0 / d.sqrt()
        } else {
            0.0
        }
    });
    // L_sym = I - D^{-1/2} W D^{-1/2}
    let mut lsym = Matrix::from_fn(n, n, |i, j| -dhalf_inv[i] * w[(i, j)] * dhalf_inv[j]);
    for i in 0..n {
        lsym[(i, i)] += 1.0;
    }
    // enforce exact symmetry before the eigensolver
    lsym = (&lsym + lsym.transpose()) * 0.5;

    let eig = lsym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    let mut embedding = Matrix::zeros(n, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        embedding.column_mut(col).copy_from(&eig.eigenvectors.column(idx));
    }
    for mut row in embedding.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row.scale_mut(1.0 / norm);
        }
    }

    let points: Vec<DVector<f64>> = (0..n).map(|i| embedding.row(i).transpose()).collect();
    let labels = kmeans_best_of(&points, k, seed, restarts.max(1));
    ClusterLabels::new(labels, k)
}

/// Retained smallest eigenvalues of L_sym, for diagnostics.
pub fn laplacian_spectrum(graph: &AffinityGraph) -> Vec<f64> {
    let n = graph.n();
    let w = &graph.w;
    let dhalf_inv = DVector::from_fn(n, |i, _| {
        let d: f64 = w.row(i).sum();
        if d > 0.0 {
            1.0 / d.sqrt()
        } else {
            0.0
        }
    });
    let mut lsym = Matrix::from_fn(n, n, |i, j| -dhalf_inv[i] * w[(i, j)] * dhalf_inv[j]);
    for i in 0..n {
        lsym[(i, i)] += 1.0;
    }
    lsym = (&lsym + lsym.transpose()) * 0.5;
    let mut vals: Vec<f64> = lsym.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

fn kmeans_best_of(points: &[DVector<f64>], k: usize, seed: u64, restarts: usize) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let (labels, inertia) = kmeans_once(points, k, &mut rng);
        // strict < keeps the lowest restart index on ties
        if best.as_ref().is_none_or(|(bi, _)| inertia < *bi) {
            best = Some((inertia, labels));
        }
    }
    best.unwrap().1
}

fn kmeans_once(points: &[DVector<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut centers = kmeanspp_init(points, k, rng);
    let mut labels = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITERS {
        let mut new_inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (best_c, best_d) = centers
                .iter()
                .enumerate()
                .map(|(c, ctr)| (c, (p - ctr).norm_squared()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            labels[i] = best_c;
            new_inertia += best_d;
        }
        let dim = points[0].len();
        let mut sums = vec![DVector::zeros(dim); k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            sums[labels[i]] += p;
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = &sums[c] / counts[c] as f64;
            }
        }
        if (inertia - new_inertia).abs() <= KMEANS_REL_TOL * inertia.max(1e-300) {
            inertia = new_inertia;
            break;
        }
        inertia = new_inertia;
    }
    (labels, inertia)
}

fn kmeanspp_init(points: &[DVector<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut dists: Vec<f64> = points
        .iter()
        .map(|p| (p - &centers[0]).norm_squared())
        .collect();
    while centers.len() < k {
        let total: f64 = dists.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in dists.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = (p - centers.last().unwrap()).norm_squared();
            if d < dists[i] {
                dists[i] = d;
            }
        }
    }
    centers
}
