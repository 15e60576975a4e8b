//! Batch CLI for the subspace-clustering pipeline.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clar::data::{generate_synthetic, save_dataset, SynthSpec};
use clar::error::ClarError;
use clar::error_prox::ErrorNorm;
use clar::manifest::RunManifest;
use clar::pipeline::{run_bench, run_cluster, run_sweep, SweepParameter};
use clar::solver::SolveStatus;

#[derive(Parser)]
#[command(name = "clar", about = "Subspace clustering via smoothed rank minimization", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PipelineFlags {
    /// Dataset directory (X.csv/X.bin + labels.csv) or matrix file
    #[arg(long)]
    data: Option<PathBuf>,
    /// Manifest file; flags below override its values
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Noise trade-off (required unless the manifest provides it)
    #[arg(long)]
    lambda: Option<f64>,
    /// Initial penalty
    #[arg(long)]
    mu0: Option<f64>,
    /// Penalty growth factor
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative stopping tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Noise model: fro2, l1 or l21
    #[arg(long)]
    error_norm: Option<String>,
    /// Affinity sharpness exponent
    #[arg(long)]
    phi: Option<u32>,
    /// Number of clusters
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// k-means restarts
    #[arg(long)]
    restarts: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl PipelineFlags {
    fn into_manifest(self) -> Result<RunManifest, ClarError> {
        let mut m = match &self.manifest {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ClarError::io(path.display().to_string(), e))?;
                RunManifest::parse(&text, path)?
            }
            None => {
                let data = self
                    .data
                    .clone()
                    .ok_or_else(|| ClarError::invalid("--data or --manifest is required".to_string()))?;
                let lambda = self
                    .lambda
                    .ok_or_else(|| ClarError::invalid("--lambda is required".to_string()))?;
                let k = self
                    .k
                    .ok_or_else(|| ClarError::invalid("--k is required".to_string()))?;
                let out = self
                    .out
                    .clone()
                    .ok_or_else(|| ClarError::invalid("--out is required".to_string()))?;
                RunManifest::new(data, lambda, k, out)
            }
        };
        if let Some(v) = self.data {
            m.data = v;
        }
        if let Some(v) = self.lambda {
            m.config.lambda = v;
        }
        if let Some(v) = self.mu0 {
            m.config.mu0 = v;
        }
        if let Some(v) = self.gamma {
            m.config.gamma = v;
        }
        if let Some(v) = self.max_iters {
            m.config.max_iters = v;
        }
        if let Some(v) = self.tol {
            m.config.rel_tol = v;
        }
        if let Some(v) = self.error_norm {
            m.config.error_norm = ErrorNorm::parse(&v)?;
        }
        if let Some(v) = self.phi {
            m.phi = v;
        }
        if let Some(v) = self.k {
            m.k = v;
        }
        if let Some(v) = self.seed {
            m.seed = v;
        }
        if let Some(v) = self.restarts {
            m.restarts = v;
        }
        if let Some(v) = self.out {
            m.out = v;
        }
        m.validate()?;
        Ok(m)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve, cluster and evaluate one dataset
    Cluster(PipelineFlags),
    /// Re-run the pipeline over a grid of one parameter
    Sweep {
        #[command(flatten)]
        flags: PipelineFlags,
        /// Parameter to vary: lambda, phi or gamma
        #[arg(long)]
        param: String,
        /// Comma-separated grid values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Generate a synthetic union-of-subspaces dataset
    Synth {
        /// Spec file (key = value lines)
        #[arg(long)]
        spec: PathBuf,
        /// Directory receiving the benchmark-layout dataset
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every dataset in a benchmark directory and tabulate
    Bench {
        /// Benchmark directory of dataset subdirectories
        #[arg(long)]
        dir: PathBuf,
        #[command(flatten)]
        flags: PipelineFlags,
        /// Parallel dataset jobs
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn exit_code_for(err: &ClarError) -> u8 {
    match err {
        ClarError::InvalidParameter(_) | ClarError::Dimension { .. } => 2,
        ClarError::SvdFailure { .. } | ClarError::NotSpd { .. } | ClarError::Divergence { .. } => 3,
        ClarError::Parse { .. } | ClarError::Io { .. } => 4,
    }
}

fn parse_synth_spec(path: &Path) -> Result<(SynthSpec, String), ClarError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ClarError::io(path.display().to_string(), e))?;
    let mut spec = SynthSpec {
        ambient_dim: 30,
        n_subspaces: 3,
        subspace_dim: 4,
        points_per_subspace: 50,
        noise_sigma: 0.0,
        outlier_fraction: 0.0,
        seed: 0,
    };
    let mut name = String::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| ClarError::Parse {
            path: path.display().to_string(),
            location: format!("line {}", lineno + 1),
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected key = value".to_string()))?;
        let (key, value) = (key.trim(), value.trim());
        let num = |v: &str| -> Result<f64, ClarError> {
            v.parse().map_err(|_| bad(format!("cannot parse {v:?}")))
        };
        match key {
            "ambient_dim" => spec.ambient_dim = num(value)? as usize,
            "n_subspaces" => spec.n_subspaces = num(value)? as usize,
            "subspace_dim" => spec.subspace_dim = num(value)? as usize,
            "points_per_subspace" => spec.points_per_subspace = num(value)? as usize,
            "noise_sigma" => spec.noise_sigma = num(value)?,
            "outlier_fraction" => spec.outlier_fraction = num(value)?,
            "seed" => spec.seed = num(value)? as u64,
            "name" => name = value.to_string(),
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    Ok((spec, name))
}

fn run(cli: Cli) -> Result<(), ClarError> {
    match cli.command {
        Command::Cluster(flags) => {
            let manifest = flags.into_manifest()?;
            let outcome = run_cluster(&manifest)?;
            let status = match outcome.status {
                SolveStatus::Converged => "converged",
                SolveStatus::MaxIters => "max-iters",
            };
            match &outcome.report {
                Some(r) => println!(
                    "cluster: {} samples, k={}, error={:.4}, {} in {:.2}s",
                    outcome.labels.len(),
                    manifest.k,
                    r.error_rate,
                    status,
                    outcome.seconds
                ),
                None => println!(
                    "cluster: {} samples, k={}, no ground truth, {} in {:.2}s",
                    outcome.labels.len(),
                    manifest.k,
                    status,
                    outcome.seconds
                ),
            }
            Ok(())
        }
        Command::Sweep { flags, param, values } => {
            let manifest = flags.into_manifest()?;
            let parameter = SweepParameter::parse(&param)?;
            let rows = run_sweep(&manifest, parameter, &values)?;
            for row in &rows {
                println!(
                    "sweep {param}={}: mean_error={:.4} ({:.2}s)",
                    row.value, row.summary.mean_error, row.summary.mean_seconds
                );
            }
            Ok(())
        }
        Command::Synth { spec, out } => {
            let (spec, name) = parse_synth_spec(&spec)?;
            let (mut ds, _) = generate_synthetic(&spec)?;
            if !name.is_empty() {
                ds.name = name;
            }
            save_dataset(&out, &ds)?;
            println!(
                "synth: wrote {} ({} samples, k={}) under {}",
                ds.name,
                ds.x.ncols(),
                ds.k,
                out.display()
            );
            Ok(())
        }
        Command::Bench { dir, mut flags, jobs } => {
            // per-dataset k comes from the truth labels; data is the dir itself
            flags.data.get_or_insert_with(|| dir.clone());
            flags.k.get_or_insert(1);
            let defaults = flags.into_manifest()?;
            let rows = run_bench(&dir, &defaults, jobs)?;
            let evaluated = rows.iter().filter(|r| r.report.is_some()).count();
            println!(
                "bench: {} datasets ({} with ground truth), table at {}",
                rows.len(),
                evaluated,
                defaults.out.join("bench.csv").display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
