//! Closed-form solutions of the E-subproblem
//! argmin_E λ‖E‖_l + (μ/2)‖Q − E‖_F², with Q = X − XZ + Y₂/μ, for the three
//! supported noise norms.

use crate::error::{ClarError, Result};
use crate::kernels::Matrix;

/// Noise model on the residual term E.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    /// Squared Frobenius norm: dense Gaussian noise.
    Fro2,
    /// Entrywise l1: random sparse corruption.
    L1,
    /// l2,1 (sum of column norms): sample-specific corruption and outliers.
    L21,
}

impl ErrorNorm {
    pub fn name(self) -> &'static str {
        match self {
            ErrorNorm::Fro2 => "fro2",
            ErrorNorm::L1 => "l1",
            ErrorNorm::L21 => "l21",
        }
    }

    pub fn parse(s: &str) -> Result<ErrorNorm> {
        match s {
            "fro2" => Ok(ErrorNorm::Fro2),
            "l1" => Ok(ErrorNorm::L1),
            "l21" => Ok(ErrorNorm::L21),
            other => Err(ClarError::invalid(format!(
                "unknown error norm {other:?} (expected fro2, l1 or l21)"
            ))),
        }
    }

    /// λ‖E‖_l for this variant (λ = 1).
    pub fn value(self, e: &Matrix) -> f64 {
        match self {
            ErrorNorm::Fro2 => e.norm_squared(),
            ErrorNorm::L1 => e.iter().map(|x| x.abs()).sum(),
            ErrorNorm::L21 => e.column_iter().map(|c| c.norm()).sum(),
        }
    }
}

/// E update of the alternating scheme. `xz` is the product XZ for the
/// current Z iterate.
pub fn update_error(
    norm: ErrorNorm,
    x: &Matrix,
    xz: &Matrix,
    y2: &Matrix,
    mu: f64,
    lambda: f64,
) -> Result<Matrix> {
    if x.shape() != xz.shape() || x.shape() != y2.shape() {
        return Err(ClarError::Dimension {
            context: "error update",
            expected: format!("{}x{}", x.nrows(), x.ncols()),
            got: format!("{}x{} / {}x{}", xz.nrows(), xz.ncols(), y2.nrows(), y2.ncols()),
        });
    }
    if !(mu > 0.0 && lambda > 0.0 && mu.is_finite() && lambda.is_finite()) {
        return Err(ClarError::invalid(format!(
            "error update needs mu > 0 and lambda > 0 (got mu = {mu}, lambda = {lambda})"
        )));
    }
    match norm {
        ErrorNorm::Fro2 => {
            let num = y2 + (x - xz) * mu;
            Ok(num / (mu + 2.0 * lambda))
        }
        ErrorNorm::L1 => {
            let q = x - xz + y2 / mu;
            let t = lambda / mu;
            Ok(q.map(|v| v.signum() * (v.abs() - t).max(0.0)))
        }
        ErrorNorm::L21 => {
            let q = x - xz + y2 / mu;
            let t = lambda / mu;
            let mut e = q;
            for mut col in e.column_iter_mut() {
                let n = col.norm();
                if n > t {
                    col.scale_mut((n - t) / n);
                } else {
                    col.fill(0.0);
                }
            }
            Ok(e)
        }
    }
}
