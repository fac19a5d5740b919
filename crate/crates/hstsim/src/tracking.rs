//! EKF position/velocity engine driven by TDOA batches.
//!
//! State is [x, y, vx, vy] with a constant-velocity transition and a
//! continuous white-noise acceleration process model. Measurement updates
//! use the Joseph-form covariance recursion plus explicit symmetrization,
//! and innovations are chi-square gated.

use crate::measurements::TdoaBatch;
use crate::{Vec2, SPEED_OF_LIGHT};
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("initialization failed: grid residual {residual:.3e} s exceeds {threshold:.3e} s")]
    InitializationFailed { residual: f64, threshold: f64 },
    #[error("batch needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("batch epoch {batch} s precedes estimate epoch {estimate} s")]
    EpochOrder { batch: f64, estimate: f64 },
    #[error("innovation covariance is not positive definite")]
    NumericalFailure,
    #[error("RRH id {0} not present in the deployment")]
    UnknownRrh(u32),
}

/// Continuous white-noise acceleration spectral density, m^2/s^3.
#[derive(Debug, Clone, Copy)]
pub struct ProcessModel {
    pub q: f64,
}

/// Filter state: mean [x, y, vx, vy] and 4x4 covariance.
#[derive(Debug, Clone, Copy)]
pub struct EkfEstimate {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub epoch_time: f64,
}

impl EkfEstimate {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.mean[2], self.mean[3])
    }
}

/// Initialization search settings.
#[derive(Debug, Clone, Copy)]
pub struct InitParams {
    /// Half-width of the search box centered on the reference RRH, m.
    pub corridor_half_width_m: f64,
    /// Grid step of the coarse search, m.
    pub grid_step_m: f64,
    /// Gauss-Newton refinement iterations.
    pub gauss_newton_iters: usize,
    /// Prior position variance per axis, m^2.
    pub position_prior_var: f64,
    /// Prior velocity variance per axis, (m/s)^2.
    pub velocity_prior_var: f64,
}

impl Default for InitParams {
    fn default() -> Self {
        Self {
            corridor_half_width_m: 300.0,
            grid_step_m: 1.0,
            gauss_newton_iters: 10,
            position_prior_var: 100.0,
            velocity_prior_var: 200.0,
        }
    }
}

fn rrh_position(positions: &[Vec2], id: u32) -> Result<Vec2, TrackingError> {
    positions.get(id as usize).copied().ok_or(TrackingError::UnknownRrh(id))
}

/// Predicted TDOA vector (seconds) for a position hypothesis.
fn predict_tdoas(p: Vec2, batch: &TdoaBatch, positions: &[Vec2]) -> Result<DVector<f64>, TrackingError> {
    let p_ref = rrh_position(positions, batch.reference_rrh_id)?;
    let d_ref = (p - p_ref).norm();
    let mut h = DVector::zeros(batch.pairs.len());
    for (i, pair) in batch.pairs.iter().enumerate() {
        let p_i = rrh_position(positions, pair.rrh_id)?;
        h[i] = ((p - p_i).norm() - d_ref) / SPEED_OF_LIGHT;
    }
    Ok(h)
}

/// Measurement Jacobian rows over [x, y, vx, vy].
fn tdoa_jacobian(p: Vec2, batch: &TdoaBatch, positions: &[Vec2]) -> Result<DMatrix<f64>, TrackingError> {
    let p_ref = rrh_position(positions, batch.reference_rrh_id)?;
    let u_ref = (p - p_ref) / (p - p_ref).norm().max(1e-9);
    let mut jac = DMatrix::zeros(batch.pairs.len(), 4);
    for (i, pair) in batch.pairs.iter().enumerate() {
        let p_i = rrh_position(positions, pair.rrh_id)?;
        let u_i = (p - p_i) / (p - p_i).norm().max(1e-9);
        jac[(i, 0)] = (u_i.x - u_ref.x) / SPEED_OF_LIGHT;
        jac[(i, 1)] = (u_i.y - u_ref.y) / SPEED_OF_LIGHT;
    }
    Ok(jac)
}

fn measured_tdoas(batch: &TdoaBatch) -> DVector<f64> {
    DVector::from_iterator(batch.pairs.len(), batch.pairs.iter().map(|p| p.tdoa_s))
}

/// Initializes the filter from the first TDOA batch: coarse grid search over
/// a corridor around the reference RRH, refined by Gauss-Newton, with zero
/// velocity and broad priors.
pub fn ekf_init(
    batch: &TdoaBatch,
    positions: &[Vec2],
    params: &InitParams,
) -> Result<EkfEstimate, TrackingError> {
    if batch.pairs.len() < 2 {
        return Err(TrackingError::TooFewPairs(batch.pairs.len()));
    }
    let center = rrh_position(positions, batch.reference_rrh_id)?;
    let z = measured_tdoas(batch);

    // Coarse grid.
    let half = params.corridor_half_width_m;
    let step = params.grid_step_m;
    let n_steps = (2.0 * half / step).round() as i64;
    let mut best = (center, f64::INFINITY);
    for ix in 0..=n_steps {
        for iy in 0..=n_steps {
            let p = center + Vec2::new(-half + ix as f64 * step, -half + iy as f64 * step);
            let r = (predict_tdoas(p, batch, positions)? - &z).norm();
            if r < best.1 {
                best = (p, r);
            }
        }
    }

    let threshold = 5.0 * batch.covariance.trace().sqrt();
    if best.1 > threshold.max(2.0 * step / SPEED_OF_LIGHT) {
        return Err(TrackingError::InitializationFailed { residual: best.1, threshold });
    }

    // Gauss-Newton refinement, whitened by the batch covariance.
    let chol = batch
        .covariance
        .clone()
        .cholesky()
        .ok_or(TrackingError::NumericalFailure)?;
    let mut p = best.0;
    for _ in 0..params.gauss_newton_iters {
        let r = predict_tdoas(p, batch, positions)? - &z;
        let jac = tdoa_jacobian(p, batch, positions)?.columns(0, 2).into_owned();
        let wr = chol.l().solve_lower_triangular(&r).ok_or(TrackingError::NumericalFailure)?;
        let wj = chol.l().solve_lower_triangular(&jac).ok_or(TrackingError::NumericalFailure)?;
        let mut normal = wj.transpose() * &wj;
        // Levenberg damping: near-collinear anchors leave the lateral axis
        // almost unobservable and an undamped step would wander along it.
        let damping = 1e-6 * normal.trace().max(1e-300);
        normal[(0, 0)] += damping;
        normal[(1, 1)] += damping;
        let rhs = wj.transpose() * wr;
        let delta = normal
            .cholesky()
            .ok_or(TrackingError::NumericalFailure)?
            .solve(&rhs);
        p -= Vec2::new(delta[0], delta[1]);
    }

    // Re-check after refinement; a diverged Gauss-Newton also fails here.
    let final_residual = (predict_tdoas(p, batch, positions)? - &z).norm();
    if !(final_residual <= threshold.max(2.0 * step / SPEED_OF_LIGHT)) {
        return Err(TrackingError::InitializationFailed { residual: final_residual, threshold });
    }

    let mut covariance = Matrix4::zeros();
    covariance[(0, 0)] = params.position_prior_var;
    covariance[(1, 1)] = params.position_prior_var;
    covariance[(2, 2)] = params.velocity_prior_var;
    covariance[(3, 3)] = params.velocity_prior_var;

    Ok(EkfEstimate {
        mean: Vector4::new(p.x, p.y, 0.0, 0.0),
        covariance,
        epoch_time: batch.epoch_time,
    })
}

/// Constant-velocity prediction with the continuous white-noise acceleration
/// process covariance (blocks q*dt^3/3, q*dt^2/2, q*dt).
pub fn ekf_predict(estimate: &EkfEstimate, dt: f64, model: &ProcessModel) -> EkfEstimate {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;

    let q = model.q;
    let (q_pp, q_pv, q_vv) = (q * dt.powi(3) / 3.0, q * dt * dt / 2.0, q * dt);
    let mut qm = Matrix4::zeros();
    for axis in 0..2 {
        qm[(axis, axis)] = q_pp;
        qm[(axis, axis + 2)] = q_pv;
        qm[(axis + 2, axis)] = q_pv;
        qm[(axis + 2, axis + 2)] = q_vv;
    }

    let mean = f * estimate.mean;
    let covariance = f * estimate.covariance * f.transpose() + qm;
    EkfEstimate {
        mean,
        covariance: 0.5 * (covariance + covariance.transpose()),
        epoch_time: estimate.epoch_time + dt,
    }
}

/// Outcome of a measurement update attempt.
#[derive(Debug, Clone)]
pub enum UpdateOutcome {
    Updated(EkfEstimate),
    /// Innovation failed the chi-square gate; the batch was skipped.
    Gated { mahalanobis_sq: f64, threshold: f64 },
}

/// EKF measurement update with innovation gating.
///
/// `gate_probability` is the chi-square acceptance mass (0.997 gives the
/// conventional 3-sigma gate; 1.0 disables gating).
pub fn ekf_update(
    estimate: &EkfEstimate,
    batch: &TdoaBatch,
    positions: &[Vec2],
    gate_probability: f64,
) -> Result<UpdateOutcome, TrackingError> {
    if batch.epoch_time < estimate.epoch_time - 1e-9 {
        return Err(TrackingError::EpochOrder { batch: batch.epoch_time, estimate: estimate.epoch_time });
    }
    if batch.pairs.len() < 2 {
        return Err(TrackingError::TooFewPairs(batch.pairs.len()));
    }

    let p_est = estimate.position();
    let innovation = measured_tdoas(batch) - predict_tdoas(p_est, batch, positions)?;
    let h = tdoa_jacobian(p_est, batch, positions)?;

    let p_cov = DMatrix::from_fn(4, 4, |i, j| estimate.covariance[(i, j)]);
    let s = &h * &p_cov * h.transpose() + &batch.covariance;
    let s_chol = s.clone().cholesky().ok_or(TrackingError::NumericalFailure)?;

    let mahalanobis_sq = innovation.dot(&s_chol.solve(&innovation));
    let threshold = chi_squared_quantile(gate_probability, batch.pairs.len() as f64);
    if mahalanobis_sq > threshold {
        return Ok(UpdateOutcome::Gated { mahalanobis_sq, threshold });
    }

    // K = P H^T S^-1 via S K^T = H P.
    let k = s_chol.solve(&(&h * &p_cov)).transpose();
    let new_mean_dyn = DVector::from_column_slice(estimate.mean.as_slice()) + &k * &innovation;

    // Joseph form: (I - K H) P (I - K H)^T + K R K^T.
    let ikh = DMatrix::<f64>::identity(4, 4) - &k * &h;
    let joseph = &ikh * &p_cov * ikh.transpose() + &k * &batch.covariance * k.transpose();

    let mut covariance = Matrix4::from_fn(|i, j| joseph[(i, j)]);
    covariance = 0.5 * (covariance + covariance.transpose());

    Ok(UpdateOutcome::Updated(EkfEstimate {
        mean: Vector4::new(new_mean_dyn[0], new_mean_dyn[1], new_mean_dyn[2], new_mean_dyn[3]),
        covariance,
        epoch_time: batch.epoch_time,
    }))
}

/// Constant-velocity position extrapolation for beam pointing.
pub fn predict_position(estimate: &EkfEstimate, dt_ahead: f64) -> Vec2 {
    estimate.position() + estimate.velocity() * dt_ahead
}

// ---------------------------------------------------------------------------
// Quantiles
// ---------------------------------------------------------------------------

/// Acklam's rational approximation of the standard normal quantile.
fn normal_quantile(p: f64) -> f64 {
    if p >= 1.0 {
        return f64::INFINITY;
    }
    debug_assert!(p > 0.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Wilson-Hilferty chi-square quantile; accurate to ~1% for the gate sizes
/// used here.
fn chi_squared_quantile(p: f64, dof: f64) -> f64 {
    let z = normal_quantile(p);
    let a = 2.0 / (9.0 * dof);
    dof * (1.0 - a + z * a.sqrt()).powi(3)
}
