//! Least-squares fit of mBVD element values to a measured admittance.
//!
//! The six elements are optimised through their logarithms, which keeps them
//! positive without constraints. Residuals are the stacked real and
//! imaginary parts of `Y_model - Y_meas`, each weighted by
//! `1 / max(|Y_meas|, 0.01 max|Y_meas|)` so the resonance peak and the
//! antiresonance notch carry comparable weight.

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{self, ExtractError};
use crate::mbvd::{MbvdError, MbvdParams, MAX_CAPACITANCE_RATIO};
use crate::network::AdmittanceTrace;

const NPARAM: usize = 6;
type Vec6 = SVector<f64, NPARAM>;
type Mat6 = SMatrix<f64, NPARAM, NPARAM>;

/// Resistances are not allowed below this many ohms.
pub const RESISTANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("estimated static capacitance {0:e} F is not positive (inductive baseline?)")]
    NegativeStaticCapacitance(f64),
    #[error("no samples below 0.9 f_s or above 1.1 f_p to estimate C_0 from")]
    NoStaticRegion,
    #[error("residual is not finite")]
    NonFiniteResidual,
    #[error("fit did not converge after {} iterations (rms residual {:e} S)", .0.iterations, .0.rms_residual)]
    DidNotConverge(Box<FitResult>),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Model(#[from] MbvdError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Relative perturbation of each element for the numeric Jacobian.
    pub jacobian_step: f64,
    pub initial_damping: f64,
    /// Stop once an accepted step improves the cost by less than this fraction.
    pub cost_tolerance: f64,
    /// Stop once no log-parameter moves by more than this.
    pub step_tolerance: f64,
    /// Before iterating, also try the initial guess with L_m and C_m moved so
    /// its lossless f_s / f_p match the measured |Y| extrema, and start from
    /// whichever has the lower cost.
    pub align_resonances: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            jacobian_step: 1e-6,
            initial_damping: 1e-3,
            cost_tolerance: 1e-10,
            step_tolerance: 1e-8,
            align_resonances: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: MbvdParams,
    /// sqrt(mean |Y_model - Y_meas|²), siemens.
    #[serde(rename = "rms_residual_s")]
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Weighted cost after the start point and each accepted step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cost_history: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Deterministic starting point for [`fit_mbvd`].
///
/// C_0 is the median of Im(Y)/ω below 0.9 f_s (or above 1.1 f_p when the
/// trace has nothing below), C_m and L_m reproduce the measured f_s and f_p,
/// and R_m = 1 / max|Y|.
pub fn initial_guess(y: &AdmittanceTrace) -> Result<MbvdParams, FitError> {
    let (f_s, f_p) = extract::find_fs_fp(y)?;
    let static_c = |keep: &dyn Fn(f64) -> bool| {
        median(
            y.frequencies()
                .iter()
                .zip(y.y())
                .filter(|(f, _)| keep(**f))
                .map(|(f, v)| v.im / (2.0 * PI * f))
                .collect(),
        )
    };
    let c_0 = static_c(&|f| f < 0.9 * f_s)
        .or_else(|| static_c(&|f| f > 1.1 * f_p))
        .ok_or(FitError::NoStaticRegion)?;
    if c_0.is_nan() || c_0 <= 0.0 {
        return Err(FitError::NegativeStaticCapacitance(c_0));
    }
    let c_m = c_0 * (f_p * f_p - f_s * f_s) / (f_s * f_s);
    let l_m = 1.0 / ((2.0 * PI * f_s).powi(2) * c_m);
    let y_peak = y.y().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let r_m = (1.0 / y_peak).max(0.01);
    Ok(MbvdParams::new(0.5, 0.1, r_m, l_m, c_m, c_0)?)
}

struct Problem<'a> {
    frequencies: &'a [f64],
    measured: &'a [Complex64],
    sqrt_weights: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(y: &'a AdmittanceTrace) -> Self {
        let peak = y.y().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let sqrt_weights = y.y().iter().map(|v| 1.0 / v.norm().max(0.01 * peak)).collect();
        Self {
            frequencies: y.frequencies(),
            measured: y.y(),
            sqrt_weights,
        }
    }

    fn residuals(&self, theta: &Vec6, out: &mut Vec<f64>) {
        let p = from_log(theta);
        let n = self.frequencies.len();
        out.clear();
        out.resize(2 * n, 0.0);
        for (i, (&f, &meas)) in self.frequencies.iter().zip(self.measured).enumerate() {
            let d = (p.admittance(f) - meas) * self.sqrt_weights[i];
            out[i] = d.re;
            out[n + i] = d.im;
        }
    }

    fn cost(&self, theta: &Vec6, scratch: &mut Vec<f64>) -> f64 {
        self.residuals(theta, scratch);
        scratch.iter().map(|r| r * r).sum()
    }

    fn rms(&self, p: &MbvdParams) -> f64 {
        let sum: f64 = self
            .frequencies
            .iter()
            .zip(self.measured)
            .map(|(&f, &m)| (p.admittance(f) - m).norm_sqr())
            .sum();
        (sum / self.frequencies.len() as f64).sqrt()
    }

    /// Central-difference Jacobian in log-parameter space.
    fn jacobian(&self, theta: &Vec6, step: f64) -> Vec<Vec6> {
        let m = 2 * self.frequencies.len();
        let mut rows = vec![Vec6::zeros(); m];
        let (mut plus, mut minus) = (Vec::new(), Vec::new());
        for k in 0..NPARAM {
            let mut tp = *theta;
            let mut tm = *theta;
            tp[k] += step;
            tm[k] -= step;
            self.residuals(&tp, &mut plus);
            self.residuals(&tm, &mut minus);
            for (row, (a, b)) in rows.iter_mut().zip(plus.iter().zip(&minus)) {
                row[k] = (a - b) / (2.0 * step);
            }
        }
        rows
    }
}

fn to_log(p: &MbvdParams) -> Vec6 {
    Vec6::from([
        p.r_s.max(RESISTANCE_FLOOR).ln(),
        p.r_0.max(RESISTANCE_FLOOR).ln(),
        p.r_m.max(RESISTANCE_FLOOR).ln(),
        p.l_m.ln(),
        p.c_m.ln(),
        p.c_0.ln(),
    ])
}

fn from_log(theta: &Vec6) -> MbvdParams {
    MbvdParams {
        r_s: theta[0].exp(),
        r_0: theta[1].exp(),
        r_m: theta[2].exp(),
        l_m: theta[3].exp(),
        c_m: theta[4].exp(),
        c_0: theta[5].exp(),
    }
}

fn clamp_resistances(theta: &mut Vec6) {
    let floor = RESISTANCE_FLOOR.ln();
    for k in 0..3 {
        theta[k] = theta[k].max(floor);
    }
}

/// `init` with L_m and C_m moved so the lossless resonances sit at the
/// measured |Y| extrema; C_0 and the resistances are kept.
fn aligned_start(y: &AdmittanceTrace, init: &MbvdParams) -> Option<MbvdParams> {
    let (f_s, f_p) = extract::find_fs_fp(y).ok()?;
    let ratio = (f_p * f_p - f_s * f_s) / (f_s * f_s);
    if !(ratio > 0.0 && ratio < MAX_CAPACITANCE_RATIO) {
        return None;
    }
    let c_m = init.c_0 * ratio;
    let l_m = 1.0 / ((2.0 * PI * f_s).powi(2) * c_m);
    MbvdParams::new(init.r_s, init.r_0, init.r_m, l_m, c_m, init.c_0).ok()
}

/// Damped Gauss-Newton (Levenberg-Marquardt) fit of `init` to `y`.
///
/// The damping is multiplied by 10 after a rejected step and divided by 10
/// after an accepted one, so the weighted cost never increases between
/// accepted iterates. Hitting `max_iterations` returns
/// [`FitError::DidNotConverge`] carrying the best parameters found.
pub fn fit_mbvd(y: &AdmittanceTrace, init: &MbvdParams, config: &FitConfig) -> Result<FitResult, FitError> {
    init.validate()?;
    let problem = Problem::new(y);
    let mut scratch = Vec::with_capacity(2 * y.len());

    let mut theta = to_log(init);
    let mut cost = problem.cost(&theta, &mut scratch);
    if config.align_resonances {
        if let Some(aligned) = aligned_start(y, init) {
            let t = to_log(&aligned);
            let c = problem.cost(&t, &mut scratch);
            if c < cost || !cost.is_finite() {
                theta = t;
                cost = c;
            }
        }
    }
    if !cost.is_finite() {
        return Err(FitError::NonFiniteResidual);
    }

    let mut history = vec![cost];
    let mut damping = config.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < config.max_iterations {
        iterations += 1;
        let jac = problem.jacobian(&theta, config.jacobian_step);
        problem.residuals(&theta, &mut scratch);
        let mut jtj = Mat6::zeros();
        let mut jtr = Vec6::zeros();
        for (row, &r) in jac.iter().zip(&scratch) {
            jtj += row * row.transpose();
            jtr += row * r;
        }
        if !jtj.iter().all(|v| v.is_finite()) || !jtr.iter().all(|v| v.is_finite()) {
            return Err(FitError::NonFiniteResidual);
        }
        let diag_floor = 1e-12 * jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let scaling = jtj.diagonal().map(|d| d.max(diag_floor));

        loop {
            let mut damped = jtj;
            for k in 0..NPARAM {
                damped[(k, k)] += damping * scaling[k];
            }
            let step = damped
                .cholesky()
                .map(|ch| ch.solve(&(-jtr)))
                .or_else(|| damped.lu().solve(&(-jtr)));
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                damping *= 10.0;
                if damping > 1e16 {
                    converged = true;
                    break 'outer;
                }
                continue;
            };

            let mut trial = theta + step;
            clamp_resistances(&mut trial);
            let trial_cost = problem.cost(&trial, &mut scratch);
            if trial_cost.is_finite() && trial_cost < cost {
                let moved = (trial - theta).amax();
                let improvement = (cost - trial_cost) / cost;
                theta = trial;
                cost = trial_cost;
                history.push(cost);
                damping = (damping / 10.0).max(1e-15);
                if improvement < config.cost_tolerance || moved < config.step_tolerance {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            // A step too small to matter that still cannot lower the cost
            // means we are sitting on the minimum.
            if step.amax() < config.step_tolerance {
                converged = true;
                break 'outer;
            }
            damping *= 10.0;
            if damping > 1e16 {
                converged = true;
                break 'outer;
            }
        }
    }

    let params = from_log(&theta);
    let result = FitResult {
        params,
        rms_residual: problem.rms(&params),
        iterations,
        converged,
        cost_history: history,
    };
    if !result.rms_residual.is_finite() {
        return Err(FitError::NonFiniteResidual);
    }
    if converged {
        Ok(result)
    } else {
        Err(FitError::DidNotConverge(Box::new(result)))
    }
}
