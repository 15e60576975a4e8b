//! End-to-end runs: solve, build the graph, cluster, evaluate, write
//! output files. Shared by the CLI subcommands and the test suites.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::affinity::{build_affinity, DEFAULT_SKINNY_TOL};
use crate::data::{
    atomic_write, load_benchmark_dir, load_matrix, save_labels, save_matrix, Dataset, MatrixFormat,
};
use crate::error::{ClarError, Result};
use crate::eval::{aggregate, clustering_error, EvalReport, Summary};
use crate::manifest::RunManifest;
use crate::solver::{solve, SolveStatus};
use crate::spectral::{spectral_cluster, ClusterLabels};

pub struct RunOutcome {
    pub labels: ClusterLabels,
    pub report: Option<EvalReport>,
    pub status: SolveStatus,
    pub seconds: f64,
}

/// Load the dataset a manifest points at: either a benchmark-style
/// directory or a bare matrix file (no truth).
pub fn load_manifest_data(manifest: &RunManifest) -> Result<Dataset> {
    let path = &manifest.data;
    if path.is_dir() {
        let x_bin = path.join("X.bin");
        let x_csv = path.join("X.csv");
        if x_bin.is_file() || x_csv.is_file() {
            // single-dataset directory
            let parent = path.parent().unwrap_or(Path::new("."));
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            let mut sets = load_benchmark_dir(parent)?;
            if let Some(pos) = sets.iter().position(|d| d.name == name) {
                let mut ds = sets.swap_remove(pos);
                ds.k = manifest.k;
                return Ok(ds);
            }
        }
        Err(ClarError::invalid(format!(
            "{} is not a dataset directory (wants X.csv or X.bin)",
            path.display()
        )))
    } else {
        let x = load_matrix(path, MatrixFormat::from_path(path))?;
        Ok(Dataset {
            x,
            truth: None,
            name: path
                .file_stem()
                .and_then(|n| n.to_str())
                .unwrap_or("dataset")
                .to_string(),
            k: manifest.k,
        })
    }
}

/// The full pipeline on an in-memory dataset. Does not touch the
/// filesystem.
pub fn run_on_dataset(ds: &Dataset, manifest: &RunManifest) -> Result<RunOutcome> {
    manifest.validate()?;
    let start = Instant::now();
    let solved = solve(&ds.x, &manifest.config)?;
    let graph = build_affinity(&solved.z, manifest.phi, DEFAULT_SKINNY_TOL)?;
    if graph.degenerate {
        eprintln!("warning: rank-0 coefficient matrix for {}, graph is degenerate", ds.name);
    }
    let labels = spectral_cluster(&graph, manifest.k, manifest.seed, manifest.restarts)?;
    let seconds = start.elapsed().as_secs_f64();
    let report = match &ds.truth {
        Some(truth) => {
            let mut r = clustering_error(&labels, truth)?;
            r.seconds = seconds;
            Some(r)
        }
        None => None,
    };
    Ok(RunOutcome {
        labels,
        report,
        status: solved.status,
        seconds,
    })
}

/// `cmd_cluster`: run the pipeline and write Z.bin, E.bin, labels.csv,
/// trace.csv and report.csv into the output directory.
pub fn run_cluster(manifest: &RunManifest) -> Result<RunOutcome> {
    manifest.validate()?;
    let ds = load_manifest_data(manifest)?;
    let out = &manifest.out;
    fs::create_dir_all(out).map_err(|e| ClarError::io(out.display().to_string(), e))?;

    let start = Instant::now();
    let solved = solve(&ds.x, &manifest.config)?;
    let graph = build_affinity(&solved.z, manifest.phi, DEFAULT_SKINNY_TOL)?;
    let labels = spectral_cluster(&graph, manifest.k, manifest.seed, manifest.restarts)?;
    let seconds = start.elapsed().as_secs_f64();

    save_matrix(&out.join("Z.bin"), &solved.z, MatrixFormat::Binary)?;
    save_matrix(&out.join("E.bin"), &solved.e, MatrixFormat::Binary)?;
    save_labels(&out.join("labels.csv"), &labels)?;

    let mut trace_buf = Vec::new();
    solved
        .trace
        .write_csv(&mut trace_buf)
        .map_err(|e| ClarError::io("trace.csv".to_string(), e))?;
    atomic_write(&out.join("trace.csv"), &trace_buf)?;

    let report = match &ds.truth {
        Some(truth) => {
            let mut r = clustering_error(&labels, truth)?;
            r.seconds = seconds;
            Some(r)
        }
        None => None,
    };
    let mut report_csv = String::from("dataset,n,k,error_rate,seconds\n");
    let _ = writeln!(
        report_csv,
        "{},{},{},{},{:.6}",
        ds.name,
        ds.x.ncols(),
        manifest.k,
        report
            .as_ref()
            .map_or(String::new(), |r| format!("{:.6}", r.error_rate)),
        seconds
    );
    atomic_write(&out.join("report.csv"), report_csv.as_bytes())?;
    atomic_write(&out.join("manifest.txt"), manifest.serialize().as_bytes())?;

    Ok(RunOutcome {
        labels,
        report,
        status: solved.status,
        seconds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Lambda,
    Phi,
    Gamma,
}

impl SweepParameter {
    pub fn parse(s: &str) -> Result<SweepParameter> {
        match s {
            "lambda" => Ok(SweepParameter::Lambda),
            "phi" => Ok(SweepParameter::Phi),
            "gamma" => Ok(SweepParameter::Gamma),
            other => Err(ClarError::invalid(format!(
                "unknown sweep parameter {other:?} (expected lambda, phi or gamma)"
            ))),
        }
    }

    pub fn apply(self, manifest: &RunManifest, value: f64) -> Result<RunManifest> {
        let mut m = manifest.clone();
        match self {
            SweepParameter::Lambda => m.config.lambda = value,
            SweepParameter::Gamma => m.config.gamma = value,
            SweepParameter::Phi => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(ClarError::invalid(format!("phi sweep value {value} must be a positive integer")));
                }
                m.phi = value as u32;
            }
        }
        Ok(m)
    }
}

pub struct SweepRow {
    pub value: f64,
    pub summary: Summary,
}

/// One pipeline run per parameter value over the manifest's dataset.
/// Writes `sweep.csv` under the manifest's output directory.
pub fn run_sweep(
    manifest: &RunManifest,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(ClarError::invalid("sweep needs at least one value".to_string()));
    }
    let ds = load_manifest_data(manifest)?;
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let m = parameter.apply(manifest, value)?;
        m.validate()?;
        let outcome = run_on_dataset(&ds, &m)?;
        let report = outcome.report.ok_or_else(|| {
            ClarError::invalid("sweep requires a dataset with ground-truth labels".to_string())
        })?;
        rows.push(SweepRow {
            value,
            summary: aggregate(&[report])?,
        });
    }

    fs::create_dir_all(&manifest.out)
        .map_err(|e| ClarError::io(manifest.out.display().to_string(), e))?;
    let mut csv = String::from("value,mean_error,median_error,mean_seconds\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{:.6},{:.6},{:.6}",
            row.value, row.summary.mean_error, row.summary.median_error, row.summary.mean_seconds
        );
    }
    atomic_write(&manifest.out.join("sweep.csv"), csv.as_bytes())?;
    Ok(rows)
}

pub struct BenchRow {
    pub name: String,
    pub k: usize,
    pub n: usize,
    pub report: Option<EvalReport>,
}

/// Run the pipeline over every dataset of a benchmark directory (optionally
/// in parallel) and write a per-k mean/median table.
pub fn run_bench(dir: &Path, defaults: &RunManifest, jobs: usize) -> Result<Vec<BenchRow>> {
    let datasets = load_benchmark_dir(dir)?;
    if datasets.is_empty() {
        return Err(ClarError::invalid(format!(
            "benchmark directory {} contains no datasets",
            dir.display()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ClarError::invalid(format!("thread pool: {e}")))?;

    let rows: Result<Vec<BenchRow>> = pool.install(|| {
        datasets
            .par_iter()
            .map(|ds| {
                let mut m = defaults.clone();
                m.k = ds.k;
                let outcome = run_on_dataset(ds, &m)?;
                Ok(BenchRow {
                    name: ds.name.clone(),
                    k: ds.k,
                    n: ds.x.ncols(),
                    report: outcome.report,
                })
            })
            .collect()
    });
    let rows = rows?;

    fs::create_dir_all(&defaults.out)
        .map_err(|e| ClarError::io(defaults.out.display().to_string(), e))?;
    atomic_write(
        &defaults.out.join("bench.csv"),
        bench_table(&rows)?.as_bytes(),
    )?;
    Ok(rows)
}

/// Per-dataset rows followed by mean/median rows per cluster count, in the
/// shape of the published experiment tables.
pub fn bench_table(rows: &[BenchRow]) -> Result<String> {
    let mut csv = String::from("dataset,n,k,error_rate,seconds\n");
    for row in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.name,
            row.n,
            row.k,
            row.report
                .as_ref()
                .map_or(String::new(), |r| format!("{:.6}", r.error_rate)),
            row.report
                .as_ref()
                .map_or(String::new(), |r| format!("{:.6}", r.seconds)),
        );
    }
    let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    for k in ks {
        let reports: Vec<EvalReport> = rows
            .iter()
            .filter(|r| r.k == k)
            .filter_map(|r| r.report.clone())
            .collect();
        if reports.is_empty() {
            continue;
        }
        let s = aggregate(&reports)?;
        let _ = writeln!(csv, "mean_k{},{},{},{:.6},{:.6}", k, s.n_reports, k, s.mean_error, s.mean_seconds);
        let _ = writeln!(csv, "median_k{},{},{},{:.6},", k, s.n_reports, k, s.median_error);
    }
    let all: Vec<EvalReport> = rows.iter().filter_map(|r| r.report.clone()).collect();
    if !all.is_empty() {
        let s = aggregate(&all)?;
        let _ = writeln!(csv, "mean_all,{},,{:.6},{:.6}", s.n_reports, s.mean_error, s.mean_seconds);
        let _ = writeln!(csv, "median_all,{},,{:.6},", s.n_reports, s.median_error);
    }
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, save_dataset, SynthSpec};
    use std::path::PathBuf;
    use tempfile::tempdir;

    fn small_spec(seed: u64) -> SynthSpec {
        SynthSpec {
            ambient_dim: 15,
            n_subspaces: 2,
            subspace_dim: 2,
            points_per_subspace: 10,
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            seed,
        }
    }

    #[test]
    fn cluster_run_writes_all_outputs() {
        let dir = tempdir().unwrap();
        let (mut ds, _) = generate_synthetic(&small_spec(3)).unwrap();
        ds.name = "d0".to_string();
        save_dataset(dir.path(), &ds).unwrap();

        let mut manifest = RunManifest::new(dir.path().join("d0"), 5.0, 2, dir.path().join("out"));
        manifest.restarts = 10;
        let outcome = run_cluster(&manifest).unwrap();
        assert!(outcome.report.unwrap().error_rate <= 0.2);
        for f in ["Z.bin", "E.bin", "labels.csv", "trace.csv", "report.csv", "manifest.txt"] {
            assert!(dir.path().join("out").join(f).is_file(), "{f} missing");
        }
    }

    #[test]
    fn cluster_rerun_is_byte_identical() {
        let dir = tempdir().unwrap();
        let (mut ds, _) = generate_synthetic(&small_spec(4)).unwrap();
        ds.name = "d0".to_string();
        save_dataset(dir.path(), &ds).unwrap();

        let mut manifest = RunManifest::new(dir.path().join("d0"), 5.0, 2, dir.path().join("out1"));
        manifest.restarts = 5;
        run_cluster(&manifest).unwrap();
        manifest.out = dir.path().join("out2");
        run_cluster(&manifest).unwrap();
        for f in ["Z.bin", "E.bin", "labels.csv"] {
            let a = fs::read(dir.path().join("out1").join(f)).unwrap();
            let b = fs::read(dir.path().join("out2").join(f)).unwrap();
            assert_eq!(a, b, "{f} differs");
        }
    }

    #[test]
    fn sweep_single_value_matches_cluster_run() {
        let dir = tempdir().unwrap();
        let (mut ds, _) = generate_synthetic(&small_spec(5)).unwrap();
        ds.name = "d0".to_string();
        save_dataset(dir.path(), &ds).unwrap();

        let mut manifest = RunManifest::new(dir.path().join("d0"), 5.0, 2, dir.path().join("out"));
        manifest.restarts = 5;
        let rows = run_sweep(&manifest, SweepParameter::Lambda, &[5.0]).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = run_cluster(&manifest).unwrap();
        assert_eq!(
            rows[0].summary.mean_error,
            direct.report.unwrap().error_rate
        );
        assert!(dir.path().join("out").join("sweep.csv").is_file());
    }

    #[test]
    fn bench_parallel_matches_serial() {
        let dir = tempdir().unwrap();
        for seed in 0..3u64 {
            let (mut ds, _) = generate_synthetic(&small_spec(seed)).unwrap();
            ds.name = format!("d{seed}");
            save_dataset(dir.path(), &ds).unwrap();
        }
        let mut defaults = RunManifest::new(PathBuf::new(), 5.0, 2, dir.path().join("out_s"));
        defaults.restarts = 5;
        let serial = run_bench(dir.path(), &defaults, 1).unwrap();
        defaults.out = dir.path().join("out_p");
        let parallel = run_bench(dir.path(), &defaults, 3).unwrap();
        // identical up to the wall-clock column
        let strip = |table: String| -> Vec<String> {
            table
                .lines()
                .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_else(|| l.to_string()))
                .collect()
        };
        let a = strip(bench_table(&serial).unwrap());
        let b = strip(bench_table(&parallel).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn bench_empty_dir_is_an_error() {
        let dir = tempdir().unwrap();
        let defaults = RunManifest::new(PathBuf::new(), 1.0, 2, dir.path().join("out"));
        assert!(run_bench(dir.path(), &defaults, 1).is_err());
    }
}
