//! Similarity graph from the coefficient matrix: skinny SVD of Z*,
//! Ũ = U Σ^{1/2}, and W_ij = cos∠(ũ_i, ũ_j)^{2φ}.

use crate::error::{ClarError, Result};
use crate::kernels::{svd, Matrix, SvdMode};

pub const DEFAULT_PHI: u32 = 2;
pub const DEFAULT_SKINNY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AffinityGraph {
    pub w: Matrix,
    pub phi: u32,
    /// Set when Z* had rank 0 and the graph degenerated to isolated nodes.
    pub degenerate: bool,
}

impl AffinityGraph {
    pub fn n(&self) -> usize {
        self.w.nrows()
    }
}

/// Build the affinity graph from a converged coefficient matrix.
///
/// Rows of Ũ that are entirely zero (samples outside the span of Z*) get
/// W_ii = 1 and zero affinity to every other sample.
pub fn build_affinity(zstar: &Matrix, phi: u32, skinny_tol: f64) -> Result<AffinityGraph> {
    let n = zstar.nrows();
    if n != zstar.ncols() {
        return Err(ClarError::Dimension {
            context: "affinity input",
            expected: format!("{n}x{n}"),
            got: format!("{}x{}", zstar.nrows(), zstar.ncols()),
        });
    }
    if phi == 0 {
        return Err(ClarError::invalid("phi must be a positive integer".to_string()));
    }
    let sys = svd(zstar, SvdMode::Skinny { tol: skinny_tol })?;
    let r = sys.rank();
    let degenerate = r == 0;

    // rows of U Sigma^{1/2}, one per sample
    let mut ut = sys.u;
    for (j, s) in sys.sigma.iter().enumerate() {
        ut.column_mut(j).scale_mut(s.sqrt());
    }
    let norms: Vec<f64> = (0..n).map(|i| ut.row(i).norm()).collect();

    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = 1.0;
        for j in (i + 1)..n {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let dot = ut.row(i).dot(&ut.row(j));
            let cos = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            let val = cos.powi(2 * phi as i32);
            w[(i, j)] = val;
            w[(j, i)] = val;
        }
    }
    Ok(AffinityGraph { w, phi, degenerate })
}
