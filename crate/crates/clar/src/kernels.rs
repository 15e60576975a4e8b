//! Dense-matrix primitives: SVD, SPD solves, seeded random matrices.
//!
//! Matrices are `nalgebra::DMatrix<f64>` throughout, column-major. All
//! arithmetic is double precision.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ClarError, Result};

pub type Matrix = DMatrix<f64>;

/// An SVD triple A = U diag(sigma) Vᵀ with `sigma` nonincreasing.
#[derive(Debug, Clone)]
pub struct SingularSystem {
    pub u: Matrix,
    pub sigma: DVector<f64>,
    pub v: Matrix,
}

impl SingularSystem {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// U diag(sigma) Vᵀ.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// Same U and V, singular values replaced by `f(sigma_i)`.
    pub fn map_sigma(&self, f: impl Fn(f64) -> f64) -> SingularSystem {
        SingularSystem {
            u: self.u.clone(),
            sigma: self.sigma.map(f),
            v: self.v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvdMode {
    /// All min(m, n) singular triplets.
    Full,
    /// Only triplets with sigma_i > tol * sigma_1.
    Skinny { tol: f64 },
}

/// Singular value decomposition with triplets sorted by decreasing sigma.
pub fn svd(a: &Matrix, mode: SvdMode) -> Result<SingularSystem> {
    let (rows, cols) = (a.nrows(), a.ncols());
    let dec = nalgebra::SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or(ClarError::SvdFailure { rows, cols })?;
    let u = dec.u.expect("svd requested u");
    let vt = dec.v_t.expect("svd requested v_t");
    let sv = dec.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());

    let keep: Vec<usize> = match mode {
        SvdMode::Full => order,
        SvdMode::Skinny { tol } => {
            let smax = order.first().map_or(0.0, |&i| sv[i]);
            order.into_iter().filter(|&i| sv[i] > tol * smax).collect()
        }
    };

    let r = keep.len();
    let mut su = Matrix::zeros(rows, r);
    let mut sv_out = DVector::zeros(r);
    let mut svv = Matrix::zeros(cols, r);
    for (j, &i) in keep.iter().enumerate() {
        su.column_mut(j).copy_from(&u.column(i));
        sv_out[j] = sv[i];
        svv.column_mut(j).copy_from(&vt.row(i).transpose());
    }
    Ok(SingularSystem {
        u: su,
        sigma: sv_out,
        v: svv,
    })
}

/// Cached Cholesky factorization of a symmetric positive definite matrix,
/// reusable across many right-hand sides.
pub struct SpdFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    dim: usize,
}

impl SpdFactor {
    pub fn new(g: &Matrix) -> Result<SpdFactor> {
        let n = g.nrows();
        if n != g.ncols() {
            return Err(ClarError::Dimension {
                context: "spd factorization",
                expected: format!("{n}x{n}"),
                got: format!("{}x{}", g.nrows(), g.ncols()),
            });
        }
        let chol = nalgebra::Cholesky::new(g.clone()).ok_or(ClarError::NotSpd { rows: n })?;
        Ok(SpdFactor { chol, dim: n })
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        if b.nrows() != self.dim {
            return Err(ClarError::Dimension {
                context: "spd solve rhs",
                expected: format!("{} rows", self.dim),
                got: format!("{} rows", b.nrows()),
            });
        }
        Ok(self.chol.solve(b))
    }
}

/// Solve G S = B for symmetric positive definite G.
pub fn solve_spd(g: &Matrix, b: &Matrix) -> Result<Matrix> {
    SpdFactor::new(g)?.solve(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomDistribution {
    StandardNormal,
    /// Uniform on [0, 1).
    Uniform,
}

/// Deterministic random matrix: ChaCha8 stream keyed by `seed`, entries
/// drawn in column-major order.
pub fn seeded_random_matrix(
    rows: usize,
    cols: usize,
    dist: RandomDistribution,
    seed: u64,
) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| match dist {
        RandomDistribution::StandardNormal => StandardNormal.sample(&mut rng),
        RandomDistribution::Uniform => rng.random::<f64>(),
    })
}

/// Seeded standard-normal matrix from a caller-owned stream.
pub fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_identity_full() {
        let a = Matrix::identity(3, 3);
        let s = svd(&a, SvdMode::Full).unwrap();
        assert_eq!(s.rank(), 3);
        for v in s.sigma.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_zero_skinny_is_rank_zero() {
        let a = Matrix::zeros(2, 4);
        let s = svd(&a, SvdMode::Skinny { tol: 1e-10 }).unwrap();
        assert_eq!(s.rank(), 0);
    }

    #[test]
    fn svd_skinny_truncates_tiny_values() {
        let a = Matrix::from_diagonal(&DVector::from_vec(vec![3.0, 1e-12]));
        let s = svd(&a, SvdMode::Skinny { tol: 1e-8 }).unwrap();
        assert_eq!(s.rank(), 1);
        assert!((s.sigma[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn svd_roundtrip_random() {
        for seed in 0..5 {
            let a = seeded_random_matrix(23, 17, RandomDistribution::StandardNormal, seed);
            let s = svd(&a, SvdMode::Full).unwrap();
            let err = (s.reconstruct() - &a).norm();
            assert!(err <= 1e-7 * a.norm(), "roundtrip err {err}");
            // orthonormal columns
            let gram = s.u.transpose() * &s.u - Matrix::identity(s.rank(), s.rank());
            assert!(gram.amax() <= 1e-8);
            let gram = s.v.transpose() * &s.v - Matrix::identity(s.rank(), s.rank());
            assert!(gram.amax() <= 1e-8);
            // nonincreasing
            for i in 1..s.rank() {
                assert!(s.sigma[i] <= s.sigma[i - 1]);
            }
        }
    }

    #[test]
    fn solve_spd_identity_and_scaled() {
        let b = seeded_random_matrix(3, 2, RandomDistribution::StandardNormal, 1);
        let s = solve_spd(&Matrix::identity(3, 3), &b).unwrap();
        assert!((s - &b).amax() < 1e-14);

        let g = Matrix::identity(3, 3) * 2.0;
        let s = solve_spd(&g, &Matrix::identity(3, 3)).unwrap();
        assert!((s - Matrix::identity(3, 3) * 0.5).amax() < 1e-14);
    }

    #[test]
    fn solve_spd_residual_bound() {
        for seed in 0..100u64 {
            let m = seeded_random_matrix(8, 8, RandomDistribution::StandardNormal, seed);
            let g = m.transpose() * &m + Matrix::identity(8, 8);
            let b = seeded_random_matrix(8, 3, RandomDistribution::StandardNormal, seed + 1000);
            let s = solve_spd(&g, &b).unwrap();
            let res = (&g * s - &b).norm();
            assert!(res <= 1e-8 * b.norm().max(1.0), "residual {res}");
        }
    }

    #[test]
    fn solve_spd_rejects_indefinite() {
        let g = Matrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(
            solve_spd(&g, &Matrix::identity(2, 2)),
            Err(ClarError::NotSpd { .. })
        ));
    }

    #[test]
    fn random_matrix_deterministic() {
        let a = seeded_random_matrix(2, 2, RandomDistribution::StandardNormal, 7);
        let b = seeded_random_matrix(2, 2, RandomDistribution::StandardNormal, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn random_normal_mean_near_zero() {
        let a = seeded_random_matrix(1000, 1, RandomDistribution::StandardNormal, 1);
        let mean = a.sum() / 1000.0;
        assert!(mean.abs() < 0.15, "mean {mean}");
    }

    #[test]
    fn random_uniform_in_unit_interval() {
        let a = seeded_random_matrix(3, 3, RandomDistribution::Uniform, 0);
        for v in a.iter() {
            assert!((0.0..1.0).contains(v));
        }
    }

    #[test]
    fn skinny_rank_matches_constructed_rank() {
        for rank in [1usize, 3, 7] {
            let u = seeded_random_matrix(20, rank, RandomDistribution::StandardNormal, rank as u64);
            let v =
                seeded_random_matrix(15, rank, RandomDistribution::StandardNormal, 50 + rank as u64);
            let a = u * v.transpose();
            let s = svd(&a, SvdMode::Skinny { tol: 1e-8 }).unwrap();
            assert_eq!(s.rank(), rank);
        }
    }
}
