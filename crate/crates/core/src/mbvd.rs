//! Modified Butterworth-Van Dyke (mBVD) equivalent circuit.
//!
//! Topology: `R_s` in series with the parallel combination of the motional
//! branch (`R_m`, `L_m`, `C_m` in series) and the static branch (`C_0` in
//! series with `R_0`).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{self, AdmittanceTrace, NetworkError};
use crate::touchstone::OnePortTrace;

/// Upper bound on C_m / C_0, keeping k_eff² below 100 %.
pub const MAX_CAPACITANCE_RATIO: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MbvdError {
    #[error("{name} must be {rule}, got {value}")]
    InvalidElement {
        name: &'static str,
        rule: &'static str,
        value: f64,
    },
    #[error("C_m / C_0 = {0} exceeds the sanity bound of 8")]
    CouplingTooLarge(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Element values in SI units. JSON keys carry the unit suffix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MbvdParams {
    /// Series (electrode) resistance, Ω.
    #[serde(rename = "r_s_ohm")]
    pub r_s: f64,
    /// Static-branch loss resistance, Ω.
    #[serde(rename = "r_0_ohm")]
    pub r_0: f64,
    /// Motional resistance, Ω.
    #[serde(rename = "r_m_ohm")]
    pub r_m: f64,
    /// Motional inductance, H.
    #[serde(rename = "l_m_h")]
    pub l_m: f64,
    /// Motional capacitance, F.
    #[serde(rename = "c_m_f")]
    pub c_m: f64,
    /// Static capacitance, F.
    #[serde(rename = "c_0_f")]
    pub c_0: f64,
}

impl MbvdParams {
    pub fn new(r_s: f64, r_0: f64, r_m: f64, l_m: f64, c_m: f64, c_0: f64) -> Result<Self, MbvdError> {
        let p = Self {
            r_s,
            r_0,
            r_m,
            l_m,
            c_m,
            c_0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Build a resonator from its series resonance, coupling and motional Q.
    ///
    /// `keff2` is the fraction returned by [`crate::extract::keff2`] for the
    /// lossless f_s/f_p pair, so `C_m / C_0 = keff2 · 8 / π²`.
    pub fn from_resonance(f_s: f64, keff2: f64, q_m: f64, c_0: f64, r_s: f64, r_0: f64) -> Result<Self, MbvdError> {
        let c_m = c_0 * keff2 * 8.0 / (PI * PI);
        let omega = 2.0 * PI * f_s;
        let l_m = 1.0 / (omega * omega * c_m);
        let r_m = omega * l_m / q_m;
        Self::new(r_s, r_0, r_m, l_m, c_m, c_0)
    }

    pub fn validate(&self) -> Result<(), MbvdError> {
        let positive = [("L_m", self.l_m), ("C_m", self.c_m), ("C_0", self.c_0)];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(MbvdError::InvalidElement {
                    name,
                    rule: "positive and finite",
                    value,
                });
            }
        }
        let non_negative = [("R_s", self.r_s), ("R_0", self.r_0), ("R_m", self.r_m)];
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(MbvdError::InvalidElement {
                    name,
                    rule: "non-negative and finite",
                    value,
                });
            }
        }
        let ratio = self.c_m / self.c_0;
        if ratio >= MAX_CAPACITANCE_RATIO {
            return Err(MbvdError::CouplingTooLarge(ratio));
        }
        Ok(())
    }

    /// Input admittance in siemens at `f` Hz.
    pub fn admittance(&self, f: f64) -> Complex64 {
        let omega = 2.0 * PI * f;
        let z_m = Complex64::new(self.r_m, omega * self.l_m - 1.0 / (omega * self.c_m));
        let y_m = z_m.inv();
        let jwc0 = Complex64::new(0.0, omega * self.c_0);
        let y_0 = jwc0 / (1.0 + jwc0 * self.r_0);
        let y_p = y_m + y_0;
        if self.r_s == 0.0 {
            return y_p;
        }
        (self.r_s + y_p.inv()).inv()
    }

    /// Series resonance 1 / (2π √(L_m C_m)), Hz.
    pub fn series_resonance(&self) -> f64 {
        1.0 / (2.0 * PI * (self.l_m * self.c_m).sqrt())
    }

    /// Lossless antiresonance f_s · √(1 + C_m / C_0), Hz.
    pub fn parallel_resonance(&self) -> f64 {
        self.series_resonance() * (1.0 + self.c_m / self.c_0).sqrt()
    }

    /// Coupling implied by the lossless resonance pair: (π²/8) · C_m / C_0.
    pub fn keff2(&self) -> f64 {
        PI * PI / 8.0 * self.c_m / self.c_0
    }

    /// Motional quality factor ω_s L_m / R_m (infinite when R_m = 0).
    pub fn motional_q(&self) -> f64 {
        2.0 * PI * self.series_resonance() * self.l_m / self.r_m
    }

    pub fn admittance_trace(&self, grid: &[f64]) -> Result<AdmittanceTrace, MbvdError> {
        let y = grid.iter().map(|&f| self.admittance(f)).collect();
        AdmittanceTrace::new(grid.to_vec(), y).map_err(|e| MbvdError::Network(e.into()))
    }

    /// S11 of the model on `grid` against reference impedance `z0`.
    pub fn synthesize_s11(&self, grid: &[f64], z0: f64) -> Result<OnePortTrace, MbvdError> {
        Ok(network::y_to_s(&self.admittance_trace(grid)?, z0)?)
    }
}

/// `n` evenly spaced frequencies from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}
