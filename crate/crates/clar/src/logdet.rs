//! The smoothed rank surrogate logdet(I + ZᵀZ) = Σ log(1 + σ_i²) and its
//! proximal operator.
//!
//! The matrix prox reduces to independent scalar problems on the singular
//! values; each scalar problem minimizes f(σ) = log(1 + σ²) + (β/2)(σ − σ_A)²
//! over σ ≥ 0, whose stationary points are roots of the monic cubic
//! σ³ − σ_A σ² + (1 + 2/β) σ − σ_A = 0.

use crate::error::{ClarError, Result};
use crate::kernels::{svd, Matrix, SvdMode};

/// Σ_i log(1 + σ_i(Z)²), computed from the singular values. Never forms
/// I + ZᵀZ explicitly.
pub fn logdet_value(z: &Matrix) -> Result<f64> {
    let s = svd(z, SvdMode::Full)?;
    Ok(s.sigma.iter().map(|x| (1.0 + x * x).ln()).sum())
}

/// One scalar prox instance: target singular value and quadratic weight.
#[derive(Debug, Clone, Copy)]
pub struct ScalarProxProblem {
    pub sigma_a: f64,
    pub beta: f64,
}

impl ScalarProxProblem {
    pub fn new(sigma_a: f64, beta: f64) -> Result<ScalarProxProblem> {
        if !(beta.is_finite() && beta > 0.25) {
            return Err(ClarError::invalid(format!(
                "prox weight beta = {beta} must be finite and > 1/4"
            )));
        }
        if !(sigma_a.is_finite() && sigma_a >= 0.0) {
            return Err(ClarError::invalid(format!(
                "target singular value {sigma_a} must be finite and >= 0"
            )));
        }
        Ok(ScalarProxProblem { sigma_a, beta })
    }

    pub fn objective(&self, s: f64) -> f64 {
        let d = s - self.sigma_a;
        (1.0 + s * s).ln() + 0.5 * self.beta * d * d
    }

    /// Gradient of the objective, zero at stationary points.
    pub fn residual(&self, s: f64) -> f64 {
        2.0 * s / (1.0 + s * s) + self.beta * (s - self.sigma_a)
    }
}

/// Real roots of the monic cubic x³ + px² + qx + r, by the trigonometric /
/// Cardano method.
fn cubic_real_roots(p: f64, q: f64, r: f64) -> Vec<f64> {
    // depressed cubic t³ + at + b with x = t − p/3
    let shift = p / 3.0;
    let a = q - p * p / 3.0;
    let b = 2.0 * p * p * p / 27.0 - p * q / 3.0 + r;
    let disc = (b / 2.0) * (b / 2.0) + (a / 3.0) * (a / 3.0) * (a / 3.0);
    let mut roots = Vec::with_capacity(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-b / 2.0 + sq).cbrt();
        let v = (-b / 2.0 - sq).cbrt();
        roots.push(u + v - shift);
    } else if a == 0.0 && b == 0.0 {
        roots.push(-shift);
    } else {
        // three real roots
        let m = 2.0 * (-a / 3.0).sqrt();
        let arg = (3.0 * b / (a * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for k in 0..3 {
            let t = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
            roots.push(t - shift);
        }
    }
    roots
}

/// Global minimizer over σ ≥ 0 of log(1 + σ²) + (β/2)(σ − σ_A)².
///
/// All real cubic roots inside [0, σ_A] plus the boundary σ = 0 are
/// evaluated and the best is returned after a short Newton polish, so the
/// result does not rely on the interior-uniqueness claim.
pub fn scalar_prox(p: ScalarProxProblem) -> f64 {
    if p.sigma_a == 0.0 {
        return 0.0;
    }
    let a = p.sigma_a;
    let mut best = 0.0;
    let mut best_f = p.objective(0.0);
    for root in cubic_real_roots(-a, 1.0 + 2.0 / p.beta, -a) {
        // tolerate rounding that pushes a boundary-hugging root just past a
        if !root.is_finite() || root <= 0.0 || root > a * (1.0 + 1e-9) {
            continue;
        }
        let s = newton_polish(&p, root.min(a));
        let f = p.objective(s);
        if f < best_f {
            best_f = f;
            best = s;
        }
    }
    best
}

// Closed-form roots carry ~1e-7 error; a few Newton steps push the
// stationarity residual below 1e-10.
fn newton_polish(p: &ScalarProxProblem, mut s: f64) -> f64 {
    for _ in 0..5 {
        let g = p.residual(s);
        if g.abs() <= 1e-12 {
            break;
        }
        let d = s * s;
        let h = 2.0 * (1.0 - d) / ((1.0 + d) * (1.0 + d)) + p.beta;
        if h.abs() < 1e-300 {
            break;
        }
        let next = s - g / h;
        if !next.is_finite() || next < 0.0 || next > p.sigma_a {
            break;
        }
        s = next;
    }
    s
}

/// Matrix prox: SVD of A, scalar prox on each singular value, reconstruct.
pub fn matrix_prox(a: &Matrix, beta: f64) -> Result<Matrix> {
    ScalarProxProblem::new(0.0, beta)?;
    let sys = svd(a, SvdMode::Full)?;
    let shrunk = sys.map_sigma(|s| {
        scalar_prox(ScalarProxProblem { sigma_a: s, beta })
    });
    Ok(shrunk.reconstruct())
}
