//! Matrix and label file formats, benchmark-directory loading, and the
//! union-of-subspaces synthetic generator.
//!
//! Orientation: columns of X are samples (X is m features by n samples).
//! CSV matrix files are headerless, one matrix row per line. The binary
//! format is magic `CLARMAT1`, u64-le rows, u64-le cols, then row-major
//! f64-le entries; it round-trips bit-exactly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ClarError, Result};
use crate::kernels::{normal_matrix, Matrix};
use crate::spectral::ClusterLabels;

const MAGIC: &[u8; 8] = b"CLARMAT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// Picks the format from the file extension (`.bin` is binary,
    /// anything else CSV).
    pub fn from_path(path: &Path) -> MatrixFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    match format {
        MatrixFormat::Csv => load_matrix_csv(path),
        MatrixFormat::Binary => load_matrix_binary(path),
    }
}

pub fn save_matrix(path: &Path, m: &Matrix, format: MatrixFormat) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        MatrixFormat::Csv => write_matrix_csv(&mut buf, m).map_err(|e| ClarError::io(path.display().to_string(), e))?,
        MatrixFormat::Binary => write_matrix_binary(&mut buf, m).map_err(|e| ClarError::io(path.display().to_string(), e))?,
    }
    atomic_write(path, &buf)
}

/// Write via a temp file in the same directory plus rename, so readers
/// never observe a half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, bytes).map_err(|e| ClarError::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| ClarError::io(path.display().to_string(), e))?;
    Ok(())
}

fn load_matrix_csv(path: &Path) -> Result<Matrix> {
    let file = fs::File::open(path).map_err(|e| ClarError::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ClarError::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, tok) in line.split(',').enumerate() {
            let v: f64 = tok.trim().parse().map_err(|_| ClarError::Parse {
                path: path.display().to_string(),
                location: format!("line {}, field {}", lineno + 1, col + 1),
                message: format!("not a number: {tok:?}"),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(ClarError::Parse {
                    path: path.display().to_string(),
                    location: format!("line {}", lineno + 1),
                    message: format!("expected {} fields, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ClarError::Parse {
            path: path.display().to_string(),
            location: "end of file".to_string(),
            message: "no rows".to_string(),
        });
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn write_matrix_csv<W: Write>(w: &mut W, m: &Matrix) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        let mut first = true;
        for j in 0..m.ncols() {
            if !first {
                write!(w, ",")?;
            }
            // 17 significant digits round-trip f64 exactly
            write!(w, "{:.17e}", m[(i, j)])?;
            first = false;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn load_matrix_binary(path: &Path) -> Result<Matrix> {
    let file = fs::File::open(path).map_err(|e| ClarError::io(path.display().to_string(), e))?;
    let mut reader = BufReader::new(file);
    let parse_err = |offset: usize, message: String| ClarError::Parse {
        path: path.display().to_string(),
        location: format!("byte {offset}"),
        message,
    };
    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|_| parse_err(0, "truncated header".to_string()))?;
    if &magic != MAGIC {
        return Err(parse_err(0, format!("bad magic {magic:?}")));
    }
    let mut counts = [0u8; 16];
    reader
        .read_exact(&mut counts)
        .map_err(|_| parse_err(8, "truncated dimensions".to_string()))?;
    let rows = u64::from_le_bytes(counts[..8].try_into().unwrap());
    let cols = u64::from_le_bytes(counts[8..].try_into().unwrap());
    let total = rows
        .checked_mul(cols)
        .filter(|&t| t <= (usize::MAX as u64) / 8 && rows <= u32::MAX as u64 && cols <= u32::MAX as u64)
        .ok_or_else(|| parse_err(8, format!("dimension overflow {rows}x{cols}")))?;
    let mut data = vec![0u8; total as usize * 8];
    reader
        .read_exact(&mut data)
        .map_err(|_| parse_err(24, "truncated payload".to_string()))?;
    let (r, c) = (rows as usize, cols as usize);
    let mut m = Matrix::zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            let off = (i * c + j) * 8;
            m[(i, j)] = f64::from_le_bytes(data[off..off + 8].try_into().unwrap());
        }
    }
    Ok(m)
}

fn write_matrix_binary<W: Write>(w: &mut W, m: &Matrix) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Labels CSV with the mandatory `sample_index,cluster` header.
pub fn save_labels(path: &Path, labels: &ClusterLabels) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = BufWriter::new(&mut buf);
        writeln!(w, "sample_index,cluster").unwrap();
        for (i, l) in labels.labels.iter().enumerate() {
            writeln!(w, "{i},{l}").unwrap();
        }
    }
    atomic_write(path, &buf)
}

pub fn load_labels(path: &Path) -> Result<ClusterLabels> {
    let file = fs::File::open(path).map_err(|e| ClarError::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut entries: Vec<(usize, usize)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ClarError::io(path.display().to_string(), e))?;
        let trimmed = line.trim();
        if lineno == 0 {
            if trimmed != "sample_index,cluster" {
                return Err(ClarError::Parse {
                    path: path.display().to_string(),
                    location: "line 1".to_string(),
                    message: "missing sample_index,cluster header".to_string(),
                });
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split(',');
        let parse = |tok: Option<&str>, field: &str| -> Result<usize> {
            tok.and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| ClarError::Parse {
                    path: path.display().to_string(),
                    location: format!("line {}", lineno + 1),
                    message: format!("bad {field}"),
                })
        };
        let idx = parse(parts.next(), "sample_index")?;
        let cluster = parse(parts.next(), "cluster")?;
        entries.push((idx, cluster));
    }
    entries.sort_unstable();
    let labels: Vec<usize> = entries.iter().map(|&(_, c)| c).collect();
    let k = labels.iter().copied().max().map_or(1, |m| m + 1);
    ClusterLabels::new(labels, k)
}

/// One loaded benchmark problem.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub truth: Option<ClusterLabels>,
    pub name: String,
    pub k: usize,
}

/// Parameters of the synthetic union-of-subspaces generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub ambient_dim: usize,
    pub n_subspaces: usize,
    pub subspace_dim: usize,
    pub points_per_subspace: usize,
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.subspace_dim >= self.ambient_dim {
            return Err(ClarError::invalid(format!(
                "subspace_dim {} must be < ambient_dim {}",
                self.subspace_dim, self.ambient_dim
            )));
        }
        if self.ambient_dim == 0
            || self.n_subspaces == 0
            || self.subspace_dim == 0
            || self.points_per_subspace == 0
        {
            return Err(ClarError::invalid("all counts must be >= 1".to_string()));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return Err(ClarError::invalid("noise_sigma must be >= 0".to_string()));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(ClarError::invalid("outlier_fraction must be in [0, 1)".to_string()));
        }
        Ok(())
    }
}

/// Orthonormal bases of the generated subspaces, for oracle checks.
pub struct SynthGroundTruth {
    pub bases: Vec<Matrix>,
}

/// Draw a union-of-subspaces dataset: per subspace an orthonormal basis
/// (QR of a seeded Gaussian), unit-norm points inside it, optional
/// Gaussian noise, and a fraction of samples replaced by unit-norm
/// Gaussian outliers. Fully deterministic per seed.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(Dataset, SynthGroundTruth)> {
    spec.validate()?;
    let m = spec.ambient_dim;
    let k = spec.n_subspaces;
    let per = spec.points_per_subspace;
    let n = k * per;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut bases = Vec::with_capacity(k);
    let mut x = Matrix::zeros(m, n);
    let mut labels = Vec::with_capacity(n);
    for s in 0..k {
        let basis = normal_matrix(m, spec.subspace_dim, &mut rng).qr().q();
        for p in 0..per {
            let coeff = normal_matrix(spec.subspace_dim, 1, &mut rng);
            let mut sample = &basis * coeff;
            let norm = sample.norm();
            if norm > 0.0 {
                sample /= norm;
            }
            x.column_mut(s * per + p).copy_from(&sample.column(0));
            labels.push(s);
        }
        bases.push(basis);
    }

    if spec.noise_sigma > 0.0 {
        let noise = normal_matrix(m, n, &mut rng) * spec.noise_sigma;
        x += noise;
    }

    let n_outliers = (spec.outlier_fraction * n as f64).round() as usize;
    if n_outliers > 0 {
        // deterministic choice of which samples become outliers
        let picks = pick_distinct(n, n_outliers, &mut rng);
        for idx in picks {
            let mut o = normal_matrix(m, 1, &mut rng);
            let norm = o.norm();
            if norm > 0.0 {
                o /= norm;
            }
            x.column_mut(idx).copy_from(&o.column(0));
        }
    }

    let truth = ClusterLabels::new(labels, k)?;
    Ok((
        Dataset {
            x,
            truth: Some(truth),
            name: format!("synth-seed{}", spec.seed),
            k,
        },
        SynthGroundTruth { bases },
    ))
}

fn pick_distinct(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(count);
    all
}

/// Nearest-subspace assignment from the true bases; validates the
/// generator independently of the main pipeline.
pub fn nearest_subspace_labels(x: &Matrix, bases: &[Matrix]) -> ClusterLabels {
    let n = x.ncols();
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let col = x.column(j);
        let mut best = 0usize;
        let mut best_res = f64::INFINITY;
        for (s, basis) in bases.iter().enumerate() {
            let proj = basis * (basis.transpose() * col);
            let res = (col - proj.column(0)).norm();
            if res < best_res {
                best_res = res;
                best = s;
            }
        }
        labels.push(best);
    }
    ClusterLabels::new(labels, bases.len()).unwrap()
}

/// Load every subdirectory of `path` that contains `X.csv` or `X.bin`,
/// in lexicographic order. Missing `labels.csv` leaves truth empty.
pub fn load_benchmark_dir(path: &Path) -> Result<Vec<Dataset>> {
    let mut subdirs: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| ClarError::io(path.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();

    let mut datasets = Vec::new();
    for dir in subdirs {
        let bin = dir.join("X.bin");
        let csv = dir.join("X.csv");
        let x = if bin.is_file() {
            load_matrix(&bin, MatrixFormat::Binary)?
        } else if csv.is_file() {
            load_matrix(&csv, MatrixFormat::Csv)?
        } else {
            continue;
        };
        let labels_path = dir.join("labels.csv");
        let truth = if labels_path.is_file() {
            Some(load_labels(&labels_path)?)
        } else {
            eprintln!("warning: {} has no labels.csv, truth unavailable", dir.display());
            None
        };
        let k = truth.as_ref().map_or(1, |t| {
            let mut distinct: Vec<usize> = t.labels.clone();
            distinct.sort_unstable();
            distinct.dedup();
            distinct.len()
        });
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("dataset")
            .to_string();
        datasets.push(Dataset { x, truth, name, k });
    }
    Ok(datasets)
}

/// Materialize a dataset in the benchmark-dir layout (`<dir>/<name>/X.csv`
/// + `labels.csv`).
pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    let sub = dir.join(&ds.name);
    fs::create_dir_all(&sub).map_err(|e| ClarError::io(sub.display().to_string(), e))?;
    save_matrix(&sub.join("X.csv"), &ds.x, MatrixFormat::Csv)?;
    if let Some(truth) = &ds.truth {
        save_labels(&sub.join("labels.csv"), truth)?;
    }
    Ok(())
}
