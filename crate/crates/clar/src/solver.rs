//! Alternating smoothed-rank minimization of
//! min logdet(I + JᵀJ) + λ‖E‖_l  s.t.  X = XZ + E, Z = J
//! by augmented Lagrangian multipliers with a growing penalty.

use std::io::Write;
use std::time::Instant;

use crate::error::{ClarError, Result};
use crate::error_prox::{update_error, ErrorNorm};
use crate::kernels::{Matrix, SpdFactor};
use crate::logdet::{logdet_value, matrix_prox};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Trade-off between the rank surrogate and the noise term.
    pub lambda: f64,
    /// Initial penalty; must exceed 1/4 so every J step has a unique prox.
    pub mu0: f64,
    /// Penalty growth factor per iteration.
    pub gamma: f64,
    /// Penalty cap, guards long runs against overflow.
    pub mu_max: f64,
    pub max_iters: usize,
    /// Relative stopping tolerance.
    pub rel_tol: f64,
    pub error_norm: ErrorNorm,
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> SolverConfig {
        SolverConfig {
            lambda,
            mu0: 0.4,
            gamma: 1.1,
            mu_max: 1e8,
            max_iters: 100,
            rel_tol: 1e-5,
            error_norm: ErrorNorm::Fro2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ClarError::invalid(format!("lambda = {} must be > 0", self.lambda)));
        }
        if !(self.mu0 > 0.25 && self.mu0.is_finite()) {
            return Err(ClarError::invalid(format!("mu0 = {} must be > 1/4", self.mu0)));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(ClarError::invalid(format!("gamma = {} must be > 1", self.gamma)));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(ClarError::invalid(format!("rel_tol = {} must be > 0", self.rel_tol)));
        }
        if self.max_iters == 0 {
            return Err(ClarError::invalid("max_iters must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// The iterate tuple of the augmented Lagrangian scheme.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub z: Matrix,
    pub j: Matrix,
    pub e: Matrix,
    pub y1: Matrix,
    pub y2: Matrix,
    pub mu: f64,
    pub iter: usize,
}

impl SolverState {
    /// J = I, E = 0, Y1 = Y2 = 0; Z starts at zero and is overwritten by
    /// the first update.
    pub fn init(x: &Matrix, config: &SolverConfig) -> SolverState {
        let (m, n) = x.shape();
        SolverState {
            z: Matrix::zeros(n, n),
            j: Matrix::identity(n, n),
            e: Matrix::zeros(m, n),
            y1: Matrix::zeros(n, n),
            y2: Matrix::zeros(m, n),
            mu: config.mu0,
            iter: 0,
        }
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct TraceRecord {
    pub iter: usize,
    /// ‖X − XZ − E‖_F after the step.
    pub res_constraint: f64,
    /// ‖J − Z‖_F after the step.
    pub res_split: f64,
    pub logdet: f64,
    /// ‖Zᵗ⁺¹ − Zᵗ‖_F / max(1, ‖Zᵗ‖_F).
    pub rel_change_z: f64,
    /// Penalty used during the step.
    pub mu: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
}

impl IterationTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,res_constraint,res_split,logdet,rel_change_z,mu,seconds")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.6}",
                r.iter, r.res_constraint, r.res_split, r.logdet, r.rel_change_z, r.mu, r.seconds
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
}

pub struct SolveResult {
    pub z: Matrix,
    pub e: Matrix,
    pub trace: IterationTrace,
    pub status: SolveStatus,
}

/// Closed-form Z update: Z⁺ = (I + XᵀX)⁻¹ [Xᵀ(X − E) + J + (Y₁ + XᵀY₂)/μ].
pub fn update_z(state: &SolverState, x: &Matrix, factor: &SpdFactor) -> Result<Matrix> {
    let xt = x.transpose();
    let rhs = &xt * (x - &state.e) + &state.j + (&state.y1 + &xt * &state.y2) / state.mu;
    factor.solve(&rhs)
}

/// J update: prox of the logdet surrogate at Z⁺ − Y₁/μ with weight μ.
pub fn update_j(z_new: &Matrix, state: &SolverState) -> Result<Matrix> {
    let target = z_new - &state.y1 / state.mu;
    matrix_prox(&target, state.mu)
}

fn check_finite(m: &Matrix, iter: usize, variable: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ClarError::Divergence { iter, variable })
    }
}

/// One full iteration: Z, J, E updates, multiplier ascent, penalty growth.
pub fn step(
    state: &mut SolverState,
    x: &Matrix,
    factor: &SpdFactor,
    config: &SolverConfig,
) -> Result<TraceRecord> {
    let start = Instant::now();
    let iter = state.iter + 1;
    let mu = state.mu;

    let z_prev_norm = state.z.norm();
    let z_new = update_z(state, x, factor)?;
    check_finite(&z_new, iter, "Z")?;

    let j_new = update_j(&z_new, state)?;
    check_finite(&j_new, iter, "J")?;

    let xz = x * &z_new;
    let e_new = update_error(config.error_norm, x, &xz, &state.y2, mu, config.lambda)?;
    check_finite(&e_new, iter, "E")?;

    state.y1 += (&j_new - &z_new) * mu;
    state.y2 += (x - &xz - &e_new) * mu;
    check_finite(&state.y1, iter, "Y1")?;
    check_finite(&state.y2, iter, "Y2")?;

    let rel_change_z = (&z_new - &state.z).norm() / z_prev_norm.max(1.0);
    let res_constraint = (x - &xz - &e_new).norm();
    let res_split = (&j_new - &z_new).norm();
    let logdet = logdet_value(&j_new)?;

    state.z = z_new;
    state.j = j_new;
    state.e = e_new;
    state.mu = (mu * config.gamma).min(config.mu_max);
    state.iter = iter;

    Ok(TraceRecord {
        iter,
        res_constraint,
        res_split,
        logdet,
        rel_change_z,
        mu,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Combined stopping metric: relative Z change, relative constraint
/// residual and relative splitting residual must all be small.
pub fn stop_metric(record: &TraceRecord, x_norm: f64, z_norm: f64) -> f64 {
    record
        .rel_change_z
        .max(record.res_constraint / x_norm)
        .max(record.res_split / z_norm.max(1.0))
}

/// Run the full algorithm on X until the stopping rule or the iteration cap.
pub fn solve(x: &Matrix, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let (m, n) = x.shape();
    if m == 0 || n == 0 {
        return Err(ClarError::invalid("data matrix must be nonempty".to_string()));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(ClarError::invalid("data matrix contains non-finite entries".to_string()));
    }
    let x_norm = x.norm().max(f64::MIN_POSITIVE);

    let gram = Matrix::identity(n, n) + x.transpose() * x;
    let factor = SpdFactor::new(&gram)?;

    let mut state = SolverState::init(x, config);
    let mut trace = IterationTrace::default();
    let mut status = SolveStatus::MaxIters;
    for _ in 0..config.max_iters {
        let record = step(&mut state, x, &factor, config)?;
        let metric = stop_metric(&record, x_norm, state.z.norm());
        trace.records.push(record);
        if metric <= config.rel_tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    Ok(SolveResult {
        z: state.z,
        e: state.e,
        trace,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{seeded_random_matrix, RandomDistribution};
    use crate::logdet::ScalarProxProblem;
    use crate::kernels::{svd, SvdMode};

    fn default_cfg() -> SolverConfig {
        SolverConfig::with_lambda(10.0)
    }

    #[test]
    fn update_z_reduces_to_j_for_zero_x() {
        let x = Matrix::zeros(4, 3);
        let cfg = default_cfg();
        let state = SolverState::init(&x, &cfg);
        let factor = SpdFactor::new(&(Matrix::identity(3, 3) + x.transpose() * &x)).unwrap();
        let z = update_z(&state, &x, &factor).unwrap();
        assert!((z - Matrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn update_z_zero_rhs() {
        let x = seeded_random_matrix(4, 3, RandomDistribution::StandardNormal, 1);
        let cfg = default_cfg();
        let mut state = SolverState::init(&x, &cfg);
        state.e = x.clone();
        state.j = Matrix::zeros(3, 3);
        let factor = SpdFactor::new(&(Matrix::identity(3, 3) + x.transpose() * &x)).unwrap();
        let z = update_z(&state, &x, &factor).unwrap();
        assert!(z.amax() < 1e-12);
    }

    #[test]
    fn update_z_matches_dense_solve_oracle() {
        let x = seeded_random_matrix(5, 8, RandomDistribution::StandardNormal, 7);
        let cfg = default_cfg();
        let mut state = SolverState::init(&x, &cfg);
        state.e = seeded_random_matrix(5, 8, RandomDistribution::StandardNormal, 8) * 0.1;
        state.y1 = seeded_random_matrix(8, 8, RandomDistribution::StandardNormal, 9) * 0.1;
        state.y2 = seeded_random_matrix(5, 8, RandomDistribution::StandardNormal, 10) * 0.1;
        let gram = Matrix::identity(8, 8) + x.transpose() * &x;
        let factor = SpdFactor::new(&gram).unwrap();
        let z = update_z(&state, &x, &factor).unwrap();
        let xt = x.transpose();
        let rhs = &xt * (&x - &state.e) + &state.j + (&state.y1 + &xt * &state.y2) / state.mu;
        // independent route: LU solve of the same normal equations
        let oracle = gram.clone().lu().solve(&rhs).unwrap();
        assert!((&z - oracle).amax() < 1e-8);
        let res = (&gram * z - &rhs).norm();
        assert!(res <= 1e-8 * rhs.norm().max(1.0));
    }

    #[test]
    fn update_j_trivial_cases() {
        let x = Matrix::zeros(3, 3);
        let cfg = default_cfg();
        let mut state = SolverState::init(&x, &cfg);
        state.mu = 1.0;
        // target 0
        let j = update_j(&Matrix::zeros(3, 3), &state).unwrap();
        assert_eq!(j.amax(), 0.0);
        // target 2I at mu = 1 shrinks each singular value 2 -> 1
        let j = update_j(&(Matrix::identity(3, 3) * 2.0), &state).unwrap();
        assert!((j - Matrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn update_j_stationarity_certificate() {
        let x = Matrix::zeros(6, 6);
        let cfg = default_cfg();
        let mut state = SolverState::init(&x, &cfg);
        state.mu = 0.9;
        let target = seeded_random_matrix(6, 6, RandomDistribution::StandardNormal, 11) * 2.0;
        state.y1 = Matrix::zeros(6, 6);
        let j = update_j(&target, &state).unwrap();
        let sj = svd(&j, SvdMode::Skinny { tol: 1e-12 }).unwrap();
        let sa = svd(&target, SvdMode::Full).unwrap();
        for (i, s) in sj.sigma.iter().enumerate() {
            let p = ScalarProxProblem::new(sa.sigma[i], state.mu).unwrap();
            assert!(p.residual(*s).abs() <= 1e-10, "i={i}");
        }
    }

    #[test]
    fn zero_data_converges_to_zero_fixed_point() {
        // J starts at I, so Z = J = 0 is approached geometrically rather
        // than hit immediately
        let x = Matrix::zeros(5, 4);
        let cfg = SolverConfig {
            rel_tol: 1e-10,
            ..SolverConfig::with_lambda(1.0)
        };
        let result = solve(&x, &cfg).unwrap();
        assert_eq!(result.status, SolveStatus::Converged);
        assert!(result.z.amax() < 1e-8);
        assert!(result.e.amax() < 1e-12);
    }

    #[test]
    fn mu_schedule_is_exact() {
        let x = seeded_random_matrix(6, 10, RandomDistribution::StandardNormal, 2);
        let cfg = SolverConfig {
            rel_tol: 1e-14,
            max_iters: 20,
            ..default_cfg()
        };
        let gram = Matrix::identity(10, 10) + x.transpose() * &x;
        let factor = SpdFactor::new(&gram).unwrap();
        let mut state = SolverState::init(&x, &cfg);
        let first = step(&mut state, &x, &factor, &cfg).unwrap();
        assert!((first.mu - 0.4).abs() < 1e-15);
        assert!((state.mu - 0.44).abs() < 1e-15);
        for t in 1..20 {
            let rec = step(&mut state, &x, &factor, &cfg).unwrap();
            let expect = (0.4 * 1.1f64.powi(t)).min(cfg.mu_max);
            assert!((rec.mu - expect).abs() <= 1e-12 * expect, "t={t}");
        }
    }

    #[test]
    fn multiplier_updates_are_exact_ascent_steps() {
        let x = seeded_random_matrix(5, 7, RandomDistribution::StandardNormal, 3);
        let cfg = default_cfg();
        let gram = Matrix::identity(7, 7) + x.transpose() * &x;
        let factor = SpdFactor::new(&gram).unwrap();
        let mut state = SolverState::init(&x, &cfg);
        for _ in 0..5 {
            let y1_before = state.y1.clone();
            let y2_before = state.y2.clone();
            let mu = state.mu;
            step(&mut state, &x, &factor, &cfg).unwrap();
            let d1 = &state.y1 - y1_before - (&state.j - &state.z) * mu;
            let d2 = &state.y2 - y2_before - (&x - &x * &state.z - &state.e) * mu;
            assert!(d1.amax() < 1e-12);
            assert!(d2.amax() < 1e-12);
        }
    }

    #[test]
    fn single_sample_degenerate_size() {
        let x = seeded_random_matrix(6, 1, RandomDistribution::StandardNormal, 4);
        let result = solve(&x, &SolverConfig::with_lambda(1.0)).unwrap();
        assert_eq!(result.z.shape(), (1, 1));
    }

    #[test]
    fn solve_is_deterministic() {
        let x = seeded_random_matrix(8, 12, RandomDistribution::StandardNormal, 5);
        let cfg = SolverConfig {
            max_iters: 15,
            ..default_cfg()
        };
        let a = solve(&x, &cfg).unwrap();
        let b = solve(&x, &cfg).unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.e, b.e);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SolverConfig { lambda: 0.0, ..default_cfg() }.validate().is_err());
        assert!(SolverConfig { mu0: 0.25, ..default_cfg() }.validate().is_err());
        assert!(SolverConfig { gamma: 1.0, ..default_cfg() }.validate().is_err());
        assert!(SolverConfig { max_iters: 0, ..default_cfg() }.validate().is_err());
    }

    #[test]
    fn trace_csv_has_expected_header() {
        let x = seeded_random_matrix(4, 4, RandomDistribution::StandardNormal, 6);
        let cfg = SolverConfig { max_iters: 3, ..default_cfg() };
        let result = solve(&x, &cfg).unwrap();
        let mut buf = Vec::new();
        result.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,res_constraint,res_split,logdet,rel_change_z,mu,seconds\n"));
        assert_eq!(text.lines().count(), 1 + result.trace.records.len());
    }
}
