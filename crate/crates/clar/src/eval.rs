//! Segmentation error rate under the best cluster-label bijection, plus
//! aggregation for experiment tables.

use crate::error::{ClarError, Result};
use crate::spectral::ClusterLabels;

#[derive(Debug, Clone)]
pub struct EvalReport {
    /// misassigned / n_samples under the best matching.
    pub error_rate: f64,
    pub n_samples: usize,
    pub n_clusters: usize,
    /// matching[p] = truth cluster assigned to predicted cluster p.
    pub matching: Vec<usize>,
    pub seconds: f64,
}

/// Error rate of `predicted` against `truth` with optimal label matching.
///
/// The confusion matrix is padded to a square when the cluster counts
/// differ; the Hungarian method finds the agreement-maximizing bijection.
pub fn clustering_error(predicted: &ClusterLabels, truth: &ClusterLabels) -> Result<EvalReport> {
    let n = truth.len();
    if predicted.len() != n {
        return Err(ClarError::Dimension {
            context: "clustering error",
            expected: format!("{n} labels"),
            got: format!("{} labels", predicted.len()),
        });
    }
    if n == 0 {
        return Err(ClarError::invalid("empty label vectors".to_string()));
    }
    let dim = predicted.k.max(truth.k);
    let mut confusion = vec![vec![0i64; dim]; dim];
    for (&p, &t) in predicted.labels.iter().zip(truth.labels.iter()) {
        confusion[p][t] += 1;
    }
    let (matching, agreement) = hungarian_max(&confusion);
    let error_rate = 1.0 - agreement as f64 / n as f64;
    Ok(EvalReport {
        error_rate,
        n_samples: n,
        n_clusters: truth.k,
        matching,
        seconds: 0.0,
    })
}

/// Maximum-weight perfect matching on a square profit matrix.
/// Returns (assignment rows -> cols, total profit). O(n³) Hungarian method
/// on the negated matrix.
fn hungarian_max(profit: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = profit.len();
    let max_entry = profit
        .iter()
        .flat_map(|r| r.iter())
        .copied()
        .max()
        .unwrap_or(0);
    // minimization form with nonnegative costs
    let cost: Vec<Vec<i64>> = profit
        .iter()
        .map(|row| row.iter().map(|&v| max_entry - v).collect())
        .collect();

    // potentials-based Hungarian, 1-indexed internally
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row matched to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
            for j in 0..=n {
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
    let mut assignment = vec![0usize; n];
    let mut total = 0i64;
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
            total += profit[p[j] - 1][j - 1];
        }
    }
    (assignment, total)
}

#[derive(Debug, Clone, Copy)]
pub struct Summary {
    pub mean_error: f64,
    pub median_error: f64,
    pub mean_seconds: f64,
    pub n_reports: usize,
}

/// Mean and median error rate (midpoint convention for even counts) and
/// mean wall-clock over a collection of runs.
pub fn aggregate(reports: &[EvalReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(ClarError::invalid("cannot aggregate zero reports".to_string()));
    }
    let n = reports.len();
    let mean_error = reports.iter().map(|r| r.error_rate).sum::<f64>() / n as f64;
    let mean_seconds = reports.iter().map(|r| r.seconds).sum::<f64>() / n as f64;
    let mut errs: Vec<f64> = reports.iter().map(|r| r.error_rate).collect();
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_error = if n % 2 == 1 {
        errs[n / 2]
    } else {
        0.5 * (errs[n / 2 - 1] + errs[n / 2])
    };
    Ok(Summary {
        mean_error,
        median_error,
        mean_seconds,
        n_reports: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[usize]) -> ClusterLabels {
        let k = v.iter().copied().max().map_or(1, |m| m + 1);
        ClusterLabels::new(v.to_vec(), k).unwrap()
    }

    #[test]
    fn identical_labels_zero_error() {
        let t = labels(&[0, 0, 1, 1, 2]);
        assert_eq!(clustering_error(&t, &t).unwrap().error_rate, 0.0);
    }

    #[test]
    fn relabeling_is_absorbed() {
        let t = labels(&[0, 0, 1, 1, 2, 2]);
        let p = labels(&[2, 2, 0, 0, 1, 1]);
        assert_eq!(clustering_error(&p, &t).unwrap().error_rate, 0.0);
    }

    #[test]
    fn one_misassignment_of_four() {
        let t = labels(&[0, 0, 1, 1]);
        let p = labels(&[0, 1, 1, 1]);
        assert!((clustering_error(&p, &t).unwrap().error_rate - 0.25).abs() < 1e-15);
    }

    #[test]
    fn differing_cluster_counts_pad() {
        let t = labels(&[0, 0, 1, 1]);
        let p = ClusterLabels::new(vec![0, 1, 2, 2], 3).unwrap();
        let r = clustering_error(&p, &t).unwrap();
        // best bijection matches two clusters; one sample stranded
        assert!((r.error_rate - 0.25).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_rejected() {
        let t = labels(&[0, 1]);
        let p = labels(&[0, 1, 0]);
        assert!(clustering_error(&p, &t).is_err());
    }

    #[test]
    fn matches_brute_force_small_k() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let k = rng.random_range(1..=4usize);
            let n = rng.random_range(k..30usize.max(k + 1));
            let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let tl = ClusterLabels::new(t.clone(), k).unwrap();
            let pl = ClusterLabels::new(p.clone(), k).unwrap();
            let got = clustering_error(&pl, &tl).unwrap().error_rate;
            let want = brute_force_error(&p, &t, k);
            assert!((got - want).abs() < 1e-12, "k {k} got {got} want {want}");
        }
    }

    pub fn brute_force_error(p: &[usize], t: &[usize], k: usize) -> f64 {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0usize;
        permute(&mut perm, 0, &mut |perm| {
            let agree = p.iter().zip(t).filter(|(&pi, &ti)| perm[pi] == ti).count();
            if agree > best {
                best = agree;
            }
        });
        1.0 - best as f64 / p.len() as f64
    }

    fn permute(perm: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
        if i == perm.len() {
            f(perm);
            return;
        }
        for j in i..perm.len() {
            perm.swap(i, j);
            permute(perm, i + 1, f);
            perm.swap(i, j);
        }
    }

    #[test]
    fn constant_prediction_bound() {
        // balanced truth with k clusters, constant prediction: error 1 - 1/k
        for k in 2..=4usize {
            let n = k * 6;
            let t: Vec<usize> = (0..n).map(|i| i / 6).collect();
            let p = vec![0usize; n];
            let tl = ClusterLabels::new(t, k).unwrap();
            let pl = ClusterLabels::new(p, k).unwrap();
            let e = clustering_error(&pl, &tl).unwrap().error_rate;
            assert!((e - (1.0 - 1.0 / k as f64)).abs() < 1e-12);
        }
    }

    fn report(e: f64) -> EvalReport {
        EvalReport {
            error_rate: e,
            n_samples: 10,
            n_clusters: 2,
            matching: vec![0, 1],
            seconds: 1.0,
        }
    }

    #[test]
    fn aggregate_conventions() {
        let s = aggregate(&[report(0.1)]).unwrap();
        assert_eq!(s.mean_error, 0.1);
        assert_eq!(s.median_error, 0.1);

        let s = aggregate(&[report(0.0), report(0.1), report(0.2)]).unwrap();
        assert!((s.mean_error - 0.1).abs() < 1e-15);
        assert!((s.median_error - 0.1).abs() < 1e-15);

        let s = aggregate(&[report(0.0), report(0.1), report(0.2), report(0.3)]).unwrap();
        assert!((s.median_error - 0.15).abs() < 1e-15);

        assert!(aggregate(&[]).is_err());
    }
}
