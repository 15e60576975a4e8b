//! Run manifests: a flat `key = value` text file that pins every input of
//! a run, so any run is reproducible from its manifest alone.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::affinity::DEFAULT_PHI;
use crate::error::{ClarError, Result};
use crate::error_prox::ErrorNorm;
use crate::solver::SolverConfig;
use crate::spectral::DEFAULT_RESTARTS;

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    /// Dataset directory (X.csv/X.bin + labels.csv) or a bare matrix file.
    pub data: PathBuf,
    pub config: SolverConfig,
    pub phi: u32,
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn new(data: PathBuf, lambda: f64, k: usize, out: PathBuf) -> RunManifest {
        RunManifest {
            data,
            config: SolverConfig::with_lambda(lambda),
            phi: DEFAULT_PHI,
            k,
            seed: 0,
            restarts: DEFAULT_RESTARTS,
            out,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.phi == 0 {
            return Err(ClarError::invalid("phi must be >= 1".to_string()));
        }
        if self.k == 0 {
            return Err(ClarError::invalid("k must be >= 1".to_string()));
        }
        if self.restarts == 0 {
            return Err(ClarError::invalid("restarts must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Canonical text form; fixed key order so serialize/parse/serialize is
    /// byte-identical.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "data = {}", self.data.display());
        let _ = writeln!(s, "lambda = {}", self.config.lambda);
        let _ = writeln!(s, "mu0 = {}", self.config.mu0);
        let _ = writeln!(s, "gamma = {}", self.config.gamma);
        let _ = writeln!(s, "mu_max = {}", self.config.mu_max);
        let _ = writeln!(s, "max_iters = {}", self.config.max_iters);
        let _ = writeln!(s, "tol = {}", self.config.rel_tol);
        let _ = writeln!(s, "error_norm = {}", self.config.error_norm.name());
        let _ = writeln!(s, "phi = {}", self.phi);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "restarts = {}", self.restarts);
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }

    pub fn parse(text: &str, origin: &Path) -> Result<RunManifest> {
        let mut data = None;
        let mut out = None;
        let mut lambda = None;
        let mut k = None;
        let mut m = RunManifest::new(PathBuf::new(), 1.0, 1, PathBuf::new());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ClarError::Parse {
                path: origin.display().to_string(),
                location: format!("line {}", lineno + 1),
                message: "expected key = value".to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |message: String| ClarError::Parse {
                path: origin.display().to_string(),
                location: format!("line {}", lineno + 1),
                message,
            };
            match key {
                "data" => data = Some(PathBuf::from(value)),
                "out" => out = Some(PathBuf::from(value)),
                "lambda" => lambda = Some(parse_num(value).map_err(&bad)?),
                "mu0" => m.config.mu0 = parse_num(value).map_err(&bad)?,
                "gamma" => m.config.gamma = parse_num(value).map_err(&bad)?,
                "mu_max" => m.config.mu_max = parse_num(value).map_err(&bad)?,
                "max_iters" => m.config.max_iters = parse_num(value).map_err(&bad)?,
                "tol" => m.config.rel_tol = parse_num(value).map_err(&bad)?,
                "error_norm" => m.config.error_norm = ErrorNorm::parse(value)?,
                "phi" => m.phi = parse_num(value).map_err(&bad)?,
                "k" => k = Some(parse_num(value).map_err(&bad)?),
                "seed" => m.seed = parse_num(value).map_err(&bad)?,
                "restarts" => m.restarts = parse_num(value).map_err(&bad)?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let missing = |field: &str| ClarError::Parse {
            path: origin.display().to_string(),
            location: "end of file".to_string(),
            message: format!("missing required key {field:?}"),
        };
        m.data = data.ok_or_else(|| missing("data"))?;
        m.out = out.ok_or_else(|| missing("out"))?;
        m.config.lambda = lambda.ok_or_else(|| missing("lambda"))?;
        m.k = k.ok_or_else(|| missing("k"))?;
        Ok(m)
    }
}

fn parse_num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse {value:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_byte_identical() {
        let mut m = RunManifest::new(PathBuf::from("data/synth"), 3e-4, 5, PathBuf::from("out"));
        m.seed = 42;
        m.config.error_norm = ErrorNorm::L21;
        let text = m.serialize();
        let parsed = RunManifest::parse(&text, Path::new("mem")).unwrap();
        assert_eq!(parsed, m);
        assert_eq!(parsed.serialize(), text);
    }

    #[test]
    fn missing_required_key_is_parse_error() {
        let err = RunManifest::parse("lambda = 1\nk = 2\nout = o\n", Path::new("mem"));
        assert!(matches!(err, Err(ClarError::Parse { .. })));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunManifest::parse("data = d\nout = o\nlambda = 1\nk = 2\nbogus = 3\n", Path::new("mem"));
        assert!(err.is_err());
    }

    #[test]
    fn defaults_follow_experiment_settings() {
        let m = RunManifest::new(PathBuf::from("d"), 1.0, 2, PathBuf::from("o"));
        assert_eq!(m.config.mu0, 0.4);
        assert_eq!(m.config.gamma, 1.1);
        assert_eq!(m.config.max_iters, 100);
        assert_eq!(m.config.rel_tol, 1e-5);
        assert_eq!(m.phi, 2);
        assert_eq!(m.restarts, 50);
    }
}
