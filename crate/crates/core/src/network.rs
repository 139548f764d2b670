//! One-port network conversions and source-impedance tuning.
//!
//! All conversions go through the admittance, which does not depend on the
//! reference impedance. Renormalising a trace is therefore `y_to_s(s_to_y(t), z)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::touchstone::{validate_grid, validate_impedance, OnePortTrace, TraceError};

/// |1 + S11| below this is treated as a short circuit.
const SINGULAR_REFLECTION: f64 = 1e-12;
/// Re(Y) below -PASSIVITY_EPS siemens is reported as non-passive.
const PASSIVITY_EPS: f64 = 1e-6;

pub const TUNE_Z0_MIN: f64 = 1.0;
pub const TUNE_Z0_MAX: f64 = 5000.0;
/// Width of the final golden-section bracket in ohms.
pub const TUNE_RESOLUTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("S11 = -1 (short circuit) at sample {index}")]
    SingularReflection { index: usize },
    #[error("band [{lo}, {hi}] Hz is empty or inverted")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("circle fit needs at least {required} samples in band, found {found}")]
    TooFewPoints { found: usize, required: usize },
    #[error("S11 locus is degenerate (points coincide or are collinear)")]
    DegenerateLocus,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Closed frequency interval in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self, NetworkError> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(NetworkError::InvalidBand { lo, hi })
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f <= self.hi
    }
}

/// Admittance samples in siemens on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceTrace {
    frequencies: Vec<f64>,
    y: Vec<Complex64>,
}

impl AdmittanceTrace {
    pub fn new(frequencies: Vec<f64>, y: Vec<Complex64>) -> Result<Self, TraceError> {
        validate_grid(&frequencies, y.len())?;
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(TraceError::NonFinite { index });
        }
        if let Some(index) = y.iter().position(|v| v.re < -PASSIVITY_EPS) {
            log::warn!(
                "admittance has Re(Y) = {:.3e} S at {:.6e} Hz; data is not passive",
                y[index].re,
                frequencies[index]
            );
        }
        Ok(Self { frequencies, y })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn y(&self) -> &[Complex64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Index of the sample closest to `f`.
    pub fn nearest_index(&self, f: f64) -> usize {
        nearest_index(&self.frequencies, f)
    }
}

pub(crate) fn nearest_index(grid: &[f64], f: f64) -> usize {
    match grid.binary_search_by(|probe| probe.total_cmp(&f)) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) if i >= grid.len() => grid.len() - 1,
        Err(i) => {
            if f - grid[i - 1] <= grid[i] - f {
                i - 1
            } else {
                i
            }
        }
    }
}

/// Y = (1 - S) / (z0 (1 + S)) per sample.
pub fn s_to_y(trace: &OnePortTrace) -> Result<AdmittanceTrace, NetworkError> {
    let z0 = trace.z0();
    let y = trace
        .s11()
        .iter()
        .enumerate()
        .map(|(index, &s)| {
            let denom = 1.0 + s;
            if denom.norm() < SINGULAR_REFLECTION {
                Err(NetworkError::SingularReflection { index })
            } else {
                Ok((1.0 - s) / (z0 * denom))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AdmittanceTrace::new(trace.frequencies().to_vec(), y)?)
}

/// S = (1 - z0 Y) / (1 + z0 Y) per sample.
pub fn y_to_s(trace: &AdmittanceTrace, z0: f64) -> Result<OnePortTrace, NetworkError> {
    validate_impedance(z0)?;
    let s = trace
        .y()
        .iter()
        .enumerate()
        .map(|(index, &y)| {
            let zy = z0 * y;
            let denom = 1.0 + zy;
            if denom.norm() == 0.0 {
                // only reachable for active data with Y = -1/z0
                Err(NetworkError::SingularReflection { index })
            } else {
                Ok((1.0 - zy) / denom)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OnePortTrace::new(trace.frequencies().to_vec(), s, z0)?)
}

/// Re-express S11 against a new real reference impedance.
pub fn renormalize(trace: &OnePortTrace, z0_new: f64) -> Result<OnePortTrace, NetworkError> {
    validate_impedance(z0_new)?;
    if z0_new == trace.z0() {
        return Ok(trace.clone());
    }
    y_to_s(&s_to_y(trace)?, z0_new)
}

/// Least-squares circle through the S11 locus on the Smith chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmithCircle {
    pub center: Complex64,
    pub radius: f64,
    /// RMS of |p - center| - radius over the fitted points.
    pub rms_residual: f64,
}

pub const CIRCLE_MIN_POINTS: usize = 5;

/// Algebraic (Kåsa) circle fit on raw points.
pub fn fit_circle(points: &[Complex64]) -> Result<SmithCircle, NetworkError> {
    let n = points.len();
    if n < CIRCLE_MIN_POINTS {
        return Err(NetworkError::TooFewPoints {
            found: n,
            required: CIRCLE_MIN_POINTS,
        });
    }
    let nf = n as f64;
    let mean = points.iter().sum::<Complex64>() / nf;

    // Centred moments keep the normal equations well conditioned.
    let (mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0);
    let (mut suuu, mut svvv, mut suvv, mut svuu) = (0.0, 0.0, 0.0, 0.0);
    for p in points {
        let u = p.re - mean.re;
        let v = p.im - mean.im;
        suu += u * u;
        svv += v * v;
        suv += u * v;
        suuu += u * u * u;
        svvv += v * v * v;
        suvv += u * v * v;
        svuu += v * u * u;
    }

    // Eigenvalues of the scatter matrix: collinear or coincident points make
    // the smaller one vanish.
    let half_trace = 0.5 * (suu + svv);
    let disc = (0.25 * (suu - svv).powi(2) + suv * suv).sqrt();
    let lambda_max = half_trace + disc;
    let lambda_min = half_trace - disc;
    if lambda_max.is_nan() || lambda_max <= 0.0 || lambda_min <= 1e-12 * lambda_max {
        return Err(NetworkError::DegenerateLocus);
    }

    let det = suu * svv - suv * suv;
    let bu = 0.5 * (suuu + suvv);
    let bv = 0.5 * (svvv + svuu);
    let uc = (bu * svv - bv * suv) / det;
    let vc = (suu * bv - suv * bu) / det;
    let center = Complex64::new(uc + mean.re, vc + mean.im);
    let radius = (uc * uc + vc * vc + (suu + svv) / nf).sqrt();
    if !center.is_finite() || !radius.is_finite() {
        return Err(NetworkError::DegenerateLocus);
    }

    let rms_residual = (points
        .iter()
        .map(|p| ((p - center).norm() - radius).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok(SmithCircle {
        center,
        radius,
        rms_residual,
    })
}

/// Circle fit of the S11 samples whose frequency lies in `band`.
pub fn fit_smith_circle(trace: &OnePortTrace, band: Band) -> Result<SmithCircle, NetworkError> {
    let points: Vec<Complex64> = trace
        .frequencies()
        .iter()
        .zip(trace.s11())
        .filter(|(f, _)| band.contains(**f))
        .map(|(_, s)| *s)
        .collect();
    fit_circle(&points)
}

/// Outcome of [`tune_source_impedance`].
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTuning {
    /// Real source impedance in ohms that best centres the S11 circle.
    pub z0_star: f64,
    /// Circle fitted at `z0_star`.
    pub circle: SmithCircle,
    /// Input trace renormalised to `z0_star`.
    pub trace: OnePortTrace,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const COARSE_POINTS: usize = 48;

fn golden_section<F>(mut objective: F, mut a: f64, mut b: f64) -> Result<f64, NetworkError>
where
    F: FnMut(f64) -> Result<f64, NetworkError>,
{
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    while b - a > TUNE_RESOLUTION {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = objective(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Find the real source impedance in [1, 5000] Ω that puts the fitted S11
/// circle closest to the Smith-chart origin.
///
/// A log-spaced coarse scan brackets the minimum; if the scan is unimodal a
/// golden-section search refines inside the bracket, otherwise a 1 Ω grid
/// scan is followed by golden-section refinement around the best point.
pub fn tune_source_impedance(trace: &OnePortTrace, band: Band) -> Result<SourceTuning, NetworkError> {
    let admittance = s_to_y(trace)?;
    let distance = |z0: f64| -> Result<f64, NetworkError> {
        let renormalized = y_to_s(&admittance, z0)?;
        Ok(fit_smith_circle(&renormalized, band)?.center.norm())
    };

    let ratio = (TUNE_Z0_MAX / TUNE_Z0_MIN).powf(1.0 / (COARSE_POINTS - 1) as f64);
    let coarse: Vec<f64> = (0..COARSE_POINTS)
        .map(|i| (TUNE_Z0_MIN * ratio.powi(i as i32)).min(TUNE_Z0_MAX))
        .collect();
    let values = coarse.iter().map(|&z| distance(z)).collect::<Result<Vec<_>, _>>()?;
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("coarse grid is non-empty");
    let unimodal = values[..=best].windows(2).all(|w| w[1] <= w[0]) && values[best..].windows(2).all(|w| w[1] >= w[0]);

    let z0_star = if unimodal {
        let lo = coarse[best.saturating_sub(1)];
        let hi = coarse[(best + 1).min(COARSE_POINTS - 1)];
        golden_section(distance, lo, hi)?
    } else {
        log::debug!("source-impedance objective is not unimodal; scanning at 1 ohm");
        let mut best_z = TUNE_Z0_MIN;
        let mut best_v = f64::INFINITY;
        let mut z = TUNE_Z0_MIN;
        while z <= TUNE_Z0_MAX {
            let v = distance(z)?;
            if v < best_v {
                best_v = v;
                best_z = z;
            }
            z += 1.0;
        }
        golden_section(
            distance,
            (best_z - 1.0).max(TUNE_Z0_MIN),
            (best_z + 1.0).min(TUNE_Z0_MAX),
        )?
    };

    // Never return something worse than the trace's own reference impedance.
    let z0_star = if (TUNE_Z0_MIN..=TUNE_Z0_MAX).contains(&trace.z0()) && distance(trace.z0())? <= distance(z0_star)? {
        trace.z0()
    } else {
        z0_star
    };

    let tuned = renormalize(trace, z0_star)?;
    let circle = fit_smith_circle(&tuned, band)?;
    Ok(SourceTuning {
        z0_star,
        circle,
        trace: tuned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn trace(s: Vec<Complex64>, z0: f64) -> OnePortTrace {
        let f = (1..=s.len()).map(|i| i as f64 * 1e9).collect();
        OnePortTrace::new(f, s, z0).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn s_to_y_reference_cases() {
        let y = s_to_y(&trace(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0)], 50.0)).unwrap();
        assert!((y.y()[0] - c(0.02, 0.0)).norm() < 1e-15);
        assert_eq!(y.y()[1], c(0.0, 0.0));
        assert!((y.y()[2] - c(1.0 / 150.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn short_circuit_is_singular() {
        let err = s_to_y(&trace(vec![c(0.0, 0.0), c(-1.0, 0.0)], 50.0)).unwrap_err();
        assert_eq!(err, NetworkError::SingularReflection { index: 1 });
    }

    #[test]
    fn y_to_s_reference_cases() {
        let y = AdmittanceTrace::new(vec![1.0, 2.0], vec![c(0.02, 0.0), c(0.0, 0.0)]).unwrap();
        let s = y_to_s(&y, 50.0).unwrap();
        assert!(s.s11()[0].norm() < 1e-15);
        assert_eq!(s.s11()[1], c(1.0, 0.0));
        assert!(y_to_s(&y, 0.0).is_err());
    }

    #[test]
    fn renormalize_matched_load_to_100_ohm() {
        let t = trace(vec![c(0.0, 0.0); 2], 50.0);
        let r = renormalize(&t, 100.0).unwrap();
        assert!((r.s11()[0] - c(-1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert_eq!(r.z0(), 100.0);
        assert_eq!(renormalize(&t, 50.0).unwrap(), t);
    }

    #[test]
    fn exact_circle_is_recovered() {
        let center = c(0.2, 0.1);
        let pts: Vec<Complex64> = (0..7)
            .map(|k| center + Complex64::from_polar(0.3, 0.4 + 0.7 * k as f64))
            .collect();
        let circle = fit_circle(&pts).unwrap();
        assert!((circle.center - center).norm() < 1e-12);
        assert!((circle.radius - 0.3).abs() < 1e-12);
        assert!(circle.rms_residual < 1e-10);
    }

    #[test]
    fn circle_fit_errors() {
        assert!(matches!(
            fit_circle(&[c(0.0, 0.0); 4]),
            Err(NetworkError::TooFewPoints { found: 4, .. })
        ));
        assert_eq!(fit_circle(&[c(0.3, 0.3); 6]), Err(NetworkError::DegenerateLocus));
        let line: Vec<Complex64> = (0..6).map(|k| c(k as f64, 2.0 * k as f64)).collect();
        assert_eq!(fit_circle(&line), Err(NetworkError::DegenerateLocus));
    }

    #[test]
    fn band_rejects_inverted() {
        assert!(Band::new(2.0, 1.0).is_err());
        assert!(Band::new(1.0, 1.0).is_err());
        assert!(Band::new(1.0, 2.0).is_ok());
    }

    #[test]
    fn already_centered_trace_tunes_to_its_own_z0() {
        let s: Vec<Complex64> = (0..40).map(|k| Complex64::from_polar(0.3, 0.15 * k as f64)).collect();
        let t = trace(s, 50.0);
        let band = Band::new(0.0 + 1.0, 1e12).unwrap();
        let tuning = tune_source_impedance(&t, band).unwrap();
        assert!((tuning.z0_star - 50.0).abs() <= TUNE_RESOLUTION, "{}", tuning.z0_star);
    }

    #[test]
    fn tuning_finds_offset_reference() {
        // A circle centred at the origin for 120 ohm, presented at 50 ohm.
        let s: Vec<Complex64> = (0..40).map(|k| Complex64::from_polar(0.4, 0.15 * k as f64)).collect();
        let t = renormalize(&trace(s, 120.0), 50.0).unwrap();
        let band = Band::new(1.0, 1e12).unwrap();
        let before = fit_smith_circle(&t, band).unwrap().center.norm();
        let tuning = tune_source_impedance(&t, band).unwrap();
        assert!((tuning.z0_star - 120.0).abs() <= TUNE_RESOLUTION, "{}", tuning.z0_star);
        assert!(tuning.circle.center.norm() < before);
    }

    #[test]
    fn nearest_index_picks_closest() {
        let g = [1.0, 2.0, 4.0];
        assert_eq!(nearest_index(&g, 0.0), 0);
        assert_eq!(nearest_index(&g, 2.9), 1);
        assert_eq!(nearest_index(&g, 3.1), 2);
        assert_eq!(nearest_index(&g, 9.0), 2);
        assert_eq!(nearest_index(&g, 2.0), 1);
    }

    fn passive_s() -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((0.0..0.999f64, -PI..PI), 3..30)
            .prop_map(|v| v.into_iter().map(|(m, a)| Complex64::from_polar(m, a)).collect())
    }

    proptest! {
        #[test]
        fn admittance_is_reference_invariant(s in passive_s(), z in prop::sample::select(vec![10.0, 50.0, 75.0, 200.0])) {
            let t = trace(s, 50.0);
            let y0 = s_to_y(&t).unwrap();
            let y1 = s_to_y(&renormalize(&t, z).unwrap()).unwrap();
            for (a, b) in y0.y().iter().zip(y1.y()) {
                prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-12));
            }
        }

        #[test]
        fn renormalization_preserves_passivity(s in passive_s(), z in 1.0..5000.0f64) {
            let r = renormalize(&trace(s, 50.0), z).unwrap();
            for v in r.s11() {
                prop_assert!(v.norm() <= 1.0 + 1e-9);
            }
        }

        #[test]
        fn renormalize_round_trip(s in passive_s(), z in 1.0..5000.0f64) {
            let t = trace(s, 50.0);
            let back = renormalize(&renormalize(&t, z).unwrap(), 50.0).unwrap();
            for (a, b) in t.s11().iter().zip(back.s11()) {
                prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
            }
        }

        #[test]
        fn noiseless_circles_recovered(cx in -0.5..0.5f64, cy in -0.5..0.5f64, r in 0.05..0.5f64,
                                       start in 0.0..TAU, span in 1.0..6.0f64) {
            let center = Complex64::new(cx, cy);
            let pts: Vec<Complex64> = (0..25)
                .map(|k| center + Complex64::from_polar(r, start + span * k as f64 / 24.0))
                .collect();
            let fit = fit_circle(&pts).unwrap();
            prop_assert!((fit.center - center).norm() <= 1e-9);
            prop_assert!((fit.radius - r).abs() <= 1e-9);
        }
    }
}
