//! Resonator metrics from a one-port trace: f_s, f_p, k_eff², admittance
//! ratio, Bode-Q, Q_max and the figure of merit.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{self, AdmittanceTrace, Band, NetworkError, SmithCircle};
use crate::touchstone::OnePortTrace;

pub const SCHEMA_VERSION: u32 = 1;

/// Bode-Q samples with 1 - |S11|² below this are flagged instead of reported.
pub const BODE_DENOMINATOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("resonance not bracketed: {0}")]
    ResonanceNotBracketed(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("need at least {required} samples, got {found}")]
    TooFewPoints { found: usize, required: usize },
    #[error("no unflagged Bode-Q samples in [{lo}, {hi}] Hz")]
    EmptyBand { lo: f64, hi: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Vertex of the parabola through three points, relative to the middle one
/// and clamped to the outer two.
fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let a = x[0] - x[1];
    let b = x[2] - x[1];
    let ya = y[0] - y[1];
    let yb = y[2] - y[1];
    let det = a * b * (b - a);
    let c1 = (ya * b * b - yb * a * a) / det;
    let c2 = (a * yb - b * ya) / det;
    if c2 == 0.0 || !c1.is_finite() || !c2.is_finite() {
        return x[1];
    }
    x[1] + (-c1 / (2.0 * c2)).clamp(a, b)
}

fn refine_extremum(f: &[f64], log_mag: &[f64], i: usize) -> f64 {
    parabolic_vertex([f[i - 1], f[i], f[i + 1]], [log_mag[i - 1], log_mag[i], log_mag[i + 1]])
}

/// Series resonance at the maximum of |Y| and parallel resonance at the
/// minimum of |Y| above it, each refined by a parabola through log|Y|.
pub fn find_fs_fp(y: &AdmittanceTrace) -> Result<(f64, f64), ExtractError> {
    let f = y.frequencies();
    let log_mag: Vec<f64> = y.y().iter().map(|v| v.norm().ln()).collect();
    let n = log_mag.len();

    let i_max = (0..n)
        .max_by(|&a, &b| log_mag[a].total_cmp(&log_mag[b]))
        .expect("trace is non-empty");
    if i_max == 0 || i_max == n - 1 {
        return Err(ExtractError::ResonanceNotBracketed(format!(
            "maximum |Y| sits at the grid edge ({:.6e} Hz)",
            f[i_max]
        )));
    }
    let i_min = (i_max + 1..n)
        .min_by(|&a, &b| log_mag[a].total_cmp(&log_mag[b]))
        .expect("i_max is not the last sample");
    if i_min == n - 1 {
        return Err(ExtractError::ResonanceNotBracketed(
            "no minimum of |Y| above the series resonance".into(),
        ));
    }
    Ok((refine_extremum(f, &log_mag, i_max), refine_extremum(f, &log_mag, i_min)))
}

/// Effective coupling (π²/8) · (f_p² - f_s²) / f_s².
pub fn keff2(f_s: f64, f_p: f64) -> Result<f64, ExtractError> {
    if !(f_s > 0.0 && f_s.is_finite() && f_p.is_finite()) {
        return Err(ExtractError::Domain(format!("invalid resonance pair ({f_s}, {f_p})")));
    }
    if f_p < f_s {
        return Err(ExtractError::Domain(format!("f_p = {f_p} Hz is below f_s = {f_s} Hz")));
    }
    Ok(PI * PI / 8.0 * (f_p * f_p - f_s * f_s) / (f_s * f_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceRatio {
    pub linear: f64,
    pub db: f64,
}

/// |Y(f_s)| / |Y(f_p)| at the nearest grid samples.
pub fn admittance_ratio(y: &AdmittanceTrace, f_s: f64, f_p: f64) -> Result<AdmittanceRatio, ExtractError> {
    let f = y.frequencies();
    let (lo, hi) = (f[0], f[f.len() - 1]);
    for (name, v) in [("f_s", f_s), ("f_p", f_p)] {
        if !(v >= lo && v <= hi) {
            return Err(ExtractError::Domain(format!(
                "{name} = {v} Hz is outside the trace [{lo}, {hi}] Hz"
            )));
        }
    }
    let ys = y.y()[y.nearest_index(f_s)].norm();
    let yp = y.y()[y.nearest_index(f_p)].norm();
    let linear = ys / yp;
    Ok(AdmittanceRatio {
        linear,
        db: 20.0 * linear.log10(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QPoint {
    pub f_hz: f64,
    pub q: f64,
}

/// Bode-Q curve. Samples where 1 - |S11|² is too small to divide by are
/// listed in `flagged_hz` instead of `points`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BodeQ {
    pub points: Vec<QPoint>,
    pub flagged_hz: Vec<f64>,
}

/// dS/df on a possibly non-uniform grid: second-order central differences
/// inside, one-sided at the ends.
fn derivative(f: &[f64], s: &[Complex64]) -> Vec<Complex64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (s[1] - s[0]) / (f[1] - f[0])
            } else if i == n - 1 {
                (s[n - 1] - s[n - 2]) / (f[n - 1] - f[n - 2])
            } else {
                let h0 = f[i] - f[i - 1];
                let h1 = f[i + 1] - f[i];
                (s[i + 1] * (h0 * h0) - s[i - 1] * (h1 * h1) + s[i] * (h1 * h1 - h0 * h0)) / (h0 * h1 * (h0 + h1))
            }
        })
        .collect()
}

fn bode_from_samples(f: &[f64], s: &[Complex64]) -> Result<BodeQ, ExtractError> {
    if f.len() < 3 {
        return Err(ExtractError::TooFewPoints {
            found: f.len(),
            required: 3,
        });
    }
    let ds = derivative(f, s);
    let mut out = BodeQ::default();
    for ((&fi, si), dsi) in f.iter().zip(s).zip(&ds) {
        let denom = 1.0 - si.norm_sqr();
        if denom < BODE_DENOMINATOR_FLOOR {
            out.flagged_hz.push(fi);
        } else {
            // ω |dS/dω| = f |dS/df|
            out.points.push(QPoint {
                f_hz: fi,
                q: fi * dsi.norm() / denom,
            });
        }
    }
    Ok(out)
}

/// Q(f) = ω |dS11/dω| / (1 - |S11|²) on the raw samples.
pub fn bode_q(trace: &OnePortTrace) -> Result<BodeQ, ExtractError> {
    bode_from_samples(trace.frequencies(), trace.s11())
}

/// Local quadratic least-squares smoothing of S11 over `2 * half_window + 1`
/// samples, fitted against the actual frequencies.
pub fn smooth_s11(f: &[f64], s: &[Complex64], half_window: usize) -> Vec<Complex64> {
    let n = f.len();
    if half_window == 0 || n < 3 {
        return s.to_vec();
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_window);
            let hi = (i + half_window).min(n - 1);
            if hi - lo < 2 {
                return s[i];
            }
            let scale = (f[hi] - f[lo]).max(f64::MIN_POSITIVE);
            let mut ata = Matrix3::<f64>::zeros();
            let mut atb_re = Vector3::<f64>::zeros();
            let mut atb_im = Vector3::<f64>::zeros();
            for j in lo..=hi {
                let x = (f[j] - f[i]) / scale;
                let row = Vector3::new(1.0, x, x * x);
                ata += row * row.transpose();
                atb_re += row * s[j].re;
                atb_im += row * s[j].im;
            }
            match ata.lu().solve(&atb_re).zip(ata.lu().solve(&atb_im)) {
                Some((re, im)) => Complex64::new(re[0], im[0]),
                None => s[i],
            }
        })
        .collect()
}

/// Bode-Q after [`smooth_s11`].
pub fn bode_q_smoothed(trace: &OnePortTrace, half_window: usize) -> Result<BodeQ, ExtractError> {
    let smoothed = smooth_s11(trace.frequencies(), trace.s11(), half_window);
    bode_from_samples(trace.frequencies(), &smoothed)
}

/// Largest Q among the samples inside `band`.
pub fn q_max(points: &[QPoint], band: Band) -> Result<f64, ExtractError> {
    points
        .iter()
        .filter(|p| band.contains(p.f_hz))
        .map(|p| p.q)
        .max_by(f64::total_cmp)
        .ok_or(ExtractError::EmptyBand {
            lo: band.lo,
            hi: band.hi,
        })
}

/// Figure of merit k_eff² × Q.
pub fn fom(keff2: f64, q: f64) -> f64 {
    keff2 * q
}

pub fn default_smith_band(f_s: f64, f_p: f64) -> Band {
    Band {
        lo: 0.98 * f_s,
        hi: 1.02 * f_p,
    }
}

pub fn default_q_band(f_s: f64, f_p: f64) -> Band {
    Band {
        lo: 0.9 * f_s,
        hi: 1.1 * f_p,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractOptions {
    /// Band for the Smith-circle fit; defaults to [0.98 f_s, 1.02 f_p].
    pub smith_band: Option<Band>,
    /// Band searched for Q_max; defaults to [0.9 f_s, 1.1 f_p].
    pub q_band: Option<Band>,
    /// Half-window of the S11 smoothing applied before Bode-Q. `None` or 0
    /// leaves the trace untouched.
    pub smoothing: Option<usize>,
    pub device: Option<String>,
    /// Acoustic wavelength in metres, carried into the report.
    pub lambda: Option<f64>,
}

/// One row of results for a resonator. Frequencies in Hz, impedances in Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub schema_version: u32,
    #[serde(default)]
    pub device: Option<String>,
    #[serde(default)]
    pub lambda_m: Option<f64>,
    pub f_s_hz: f64,
    pub f_p_hz: f64,
    /// Coupling from the measured |Y| extrema, as a fraction.
    pub keff2: f64,
    /// Coupling of a fitted mBVD model, when one was fitted.
    #[serde(default)]
    pub keff2_mbvd: Option<f64>,
    pub y_ratio: f64,
    pub y_ratio_db: f64,
    pub z0_input_ohm: f64,
    pub z0_star_ohm: f64,
    pub smith_circle: SmithCircle,
    pub smith_band_hz: Band,
    pub q_band_hz: Band,
    pub q_max: f64,
    pub fom: f64,
    pub q_bode: Vec<QPoint>,
    #[serde(default)]
    pub q_bode_flagged_hz: Vec<f64>,
}

/// Rounds to six significant digits and prints the shortest form.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ExtractionReport {
    pub const CSV_HEADER: &'static str = "device,lambda_nm,f_s_GHz,keff2_pct,q_max,fom";

    /// `device,lambda_nm,f_s_GHz,keff2_pct,q_max,fom` with six significant digits.
    pub fn csv_row(&self) -> String {
        [
            csv_field(self.device.as_deref().unwrap_or("")),
            self.lambda_m.map(|l| sig6(l * 1e9)).unwrap_or_default(),
            sig6(self.f_s_hz / 1e9),
            sig6(self.keff2 * 100.0),
            sig6(self.q_max),
            sig6(self.fom),
        ]
        .join(",")
    }

    /// Human-readable summary at the precision the results are usually quoted.
    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "{:<8} λ={:>5} nm  f_s={:.2} GHz  f_p={:.3} GHz  k_eff²={:.1} %  Y_R={:.1} dB  Q_max={:.0}  FoM={:.0}  z0*={:.1} Ω",
            self.device.as_deref().unwrap_or("-"),
            self.lambda_m.map(|l| format!("{:.0}", l * 1e9)).unwrap_or_else(|| "-".into()),
            self.f_s_hz / 1e9,
            self.f_p_hz / 1e9,
            self.keff2 * 100.0,
            self.y_ratio_db,
            self.q_max,
            self.fom,
            self.z0_star_ohm,
        );
        if let Some(k) = self.keff2_mbvd {
            line.push_str(&format!("  k_eff²(mBVD)={:.1} %", k * 100.0));
        }
        line
    }
}

/// Full measurement pipeline: admittance, resonances, coupling, admittance
/// ratio, source-impedance tuning, Bode-Q, Q_max and FoM.
pub fn full_extraction(trace: &OnePortTrace, options: &ExtractOptions) -> Result<ExtractionReport, ExtractError> {
    let admittance = network::s_to_y(trace)?;
    let (f_s, f_p) = find_fs_fp(&admittance)?;
    let k = keff2(f_s, f_p)?;
    let ratio = admittance_ratio(&admittance, f_s, f_p)?;

    let smith_band = options.smith_band.unwrap_or_else(|| default_smith_band(f_s, f_p));
    let tuning = network::tune_source_impedance(trace, smith_band)?;

    let q = match options.smoothing {
        Some(w) if w > 0 => bode_q_smoothed(&tuning.trace, w)?,
        _ => bode_q(&tuning.trace)?,
    };
    let q_band = options.q_band.unwrap_or_else(|| default_q_band(f_s, f_p));
    let q_max = q_max(&q.points, q_band)?;

    Ok(ExtractionReport {
        schema_version: SCHEMA_VERSION,
        device: options.device.clone(),
        lambda_m: options.lambda,
        f_s_hz: f_s,
        f_p_hz: f_p,
        keff2: k,
        keff2_mbvd: None,
        y_ratio: ratio.linear,
        y_ratio_db: ratio.db,
        z0_input_ohm: trace.z0(),
        z0_star_ohm: tuning.z0_star,
        smith_circle: tuning.circle,
        smith_band_hz: smith_band,
        q_band_hz: q_band,
        q_max,
        fom: fom(k, q_max),
        q_bode: q.points,
        q_bode_flagged_hz: q.flagged_hz,
    })
}
