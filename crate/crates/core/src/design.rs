//! Frequency-scaling explorer for SH-SAW geometries.
//!
//! Predictions come from a dispersion table: anchor points of phase velocity
//! and k_eff² against the film-thickness ratio h_LN/λ, grouped by family
//! (`measured`, `simulated`, or anything a user table names) and IDT duty
//! factor. Values between anchors are linearly interpolated; no smoothing.
//! Duty-factor and electrode-thickness dependence is not modelled, only
//! flagged through [`PredictionWarning`].

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::sig6;

const BUILTIN_TABLE: &str = include_str!("../data/builtin_dispersion.csv");

/// Relative distance under which a ratio is treated as sitting on an anchor.
const SNAP: f64 = 1e-9;
/// Relative mismatch in the secondary ratio that triggers a warning.
const RATIO_WARN: f64 = 0.05;
const DUTY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid dispersion table: {0}")]
    InvalidTable(String),
    #[error("v_p is not strictly decreasing in h_LN/λ for family '{family}' at duty {duty}")]
    NonMonotonicDispersion { family: String, duty: f64 },
    #[error("no anchors for family '{0}'")]
    UnknownFamily(String),
    #[error("ratio {ratio} is outside the table range [{lo}, {hi}] (extrapolation disabled)")]
    OutOfTableRange { ratio: f64, lo: f64, hi: f64 },
    #[error("target {target:e} Hz is outside the reachable range [{lo:e}, {hi:e}] Hz")]
    TargetOutOfRange { target: f64, lo: f64, hi: f64 },
    #[error("f_s(λ) is not monotone for family '{0}'; cannot invert")]
    NonMonotonicScaling(String),
}

/// Resonator layout. Lengths in metres, aperture in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    #[serde(rename = "lambda_m")]
    pub lambda: f64,
    #[serde(rename = "h_ln_m")]
    pub h_ln: f64,
    #[serde(rename = "h_elec_m")]
    pub h_elec: f64,
    pub duty: f64,
    pub n_e: u32,
    pub n_r: u32,
    #[serde(rename = "aperture_lambda")]
    pub aperture: f64,
}

impl DeviceGeometry {
    pub fn validate(&self) -> Result<(), DesignError> {
        let bad = |what: &str| Err(DesignError::InvalidGeometry(what.to_string()));
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.h_ln.is_finite() && self.h_ln > 0.0) {
            return bad("h_ln must be positive");
        }
        if !(self.h_elec.is_finite() && self.h_elec >= 0.0) {
            return bad("h_elec must be non-negative");
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return bad("duty must lie in (0, 1)");
        }
        if self.n_e < 2 {
            return bad("n_e must be at least 2");
        }
        if !(self.aperture.is_finite() && self.aperture > 0.0) {
            return bad("aperture must be positive");
        }
        Ok(())
    }

    pub fn h_ln_over_lambda(&self) -> f64 {
        self.h_ln / self.lambda
    }

    pub fn h_elec_over_lambda(&self) -> f64 {
        self.h_elec / self.lambda
    }

    /// Layouts of the six fabricated resonators (0.7 µm LN, 40 nm Al).
    pub fn reference_device(name: &str) -> Option<Self> {
        let (lambda_nm, n_e, aperture, duty) = match name {
            "A" => (400.0, 40, 20.0, 0.7),
            "B" => (360.0, 40, 20.0, 0.5),
            "C" => (324.0, 54, 30.0, 0.5),
            "D" => (296.0, 42, 30.0, 0.5),
            "E" => (240.0, 64, 30.0, 0.5),
            "F" => (400.0, 40, 20.0, 0.5),
            _ => return None,
        };
        Some(Self {
            lambda: lambda_nm * 1e-9,
            h_ln: 0.7e-6,
            h_elec: 40e-9,
            duty,
            n_e,
            n_r: 40,
            aperture,
        })
    }
}

/// Name of an anchor family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Family(String);

impl Family {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into().trim().to_ascii_lowercase())
    }

    pub fn measured() -> Self {
        Self::new("measured")
    }

    pub fn simulated() -> Self {
        Self::new("simulated")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            Err("family name is empty".into())
        } else {
            Ok(Self::new(s))
        }
    }
}

/// One row of a dispersion table CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub h_ln_over_lambda: f64,
    pub h_elec_over_lambda: f64,
    pub duty: f64,
    #[serde(rename = "v_p_mps")]
    pub v_p: f64,
    pub keff2: f64,
    pub family: Family,
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolationAxis {
    /// h_LN/λ varies across the group.
    FilmRatio,
    /// Every anchor shares one h_LN/λ and h_elec/λ varies (an electrode
    /// loading curve).
    ElectrodeRatio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    x: f64,
    /// The ratio on the other axis.
    other: f64,
    v_p: f64,
    keff2: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Group {
    family: Family,
    duty: f64,
    axis: InterpolationAxis,
    nodes: Vec<Node>,
    /// f_s(λ) strictly decreasing in λ at fixed film thickness.
    scaling_monotone: bool,
}

enum Column {
    VelocityMps,
    Keff2,
    Other,
}

impl Group {
    fn hull(&self) -> (f64, f64) {
        (self.nodes[0].x, self.nodes[self.nodes.len() - 1].x)
    }

    fn axis_value(&self, g: &DeviceGeometry) -> f64 {
        match self.axis {
            InterpolationAxis::FilmRatio => g.h_ln_over_lambda(),
            InterpolationAxis::ElectrodeRatio => g.h_elec_over_lambda(),
        }
    }

    fn covers(&self, x: f64) -> bool {
        let (lo, hi) = self.hull();
        x >= lo * (1.0 - SNAP) && x <= hi * (1.0 + SNAP)
    }

    fn column(node: &Node, column: &Column) -> f64 {
        match column {
            Column::VelocityMps => node.v_p,
            Column::Keff2 => node.keff2,
            Column::Other => node.other,
        }
    }

    /// Piecewise-linear value at `x`; anchors are returned verbatim.
    fn interpolate(&self, x: f64, column: Column, allow_extrapolation: bool) -> Result<(f64, bool), DesignError> {
        if let Some(node) = self.nodes.iter().find(|n| (x - n.x).abs() <= SNAP * n.x) {
            return Ok((Self::column(node, &column), false));
        }
        let (lo, hi) = self.hull();
        let outside = x < lo || x > hi;
        if outside && (!allow_extrapolation || self.nodes.len() < 2) {
            return Err(DesignError::OutOfTableRange { ratio: x, lo, hi });
        }
        let seg = if x < lo {
            0
        } else if x > hi {
            self.nodes.len() - 2
        } else {
            self.nodes
                .windows(2)
                .position(|w| x >= w[0].x && x <= w[1].x)
                .expect("x is inside the hull")
        };
        let (a, b) = (&self.nodes[seg], &self.nodes[seg + 1]);
        let t = (x - a.x) / (b.x - a.x);
        let (va, vb) = (Self::column(a, &column), Self::column(b, &column));
        Ok((va + t * (vb - va), outside))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictionWarning {
    DutyMismatch { requested: f64, used: f64 },
    ElectrodeMismatch { requested: f64, anchor: f64 },
    FilmMismatch { requested: f64, anchor: f64 },
    Extrapolated { ratio: f64 },
}

impl fmt::Display for PredictionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DutyMismatch { requested, used } => {
                write!(f, "duty {requested} has no anchors; used duty {used} data")
            }
            Self::ElectrodeMismatch { requested, anchor } => write!(
                f,
                "h_elec/lambda {requested:.4} differs from anchor value {anchor:.4}; electrode loading not modelled"
            ),
            Self::FilmMismatch { requested, anchor } => {
                write!(f, "h_ln/lambda {requested:.4} differs from anchor value {anchor:.4}")
            }
            Self::Extrapolated { ratio } => write!(f, "ratio {ratio:.4} extrapolated beyond the table"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictOptions {
    pub family: Family,
    pub allow_extrapolation: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            family: Family::measured(),
            allow_extrapolation: false,
        }
    }
}

/// A predicted value plus anything the caller should know about how it
/// was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub warnings: Vec<PredictionWarning>,
}

/// Everything predicted for one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub v_p: f64,
    pub f_s: f64,
    pub keff2: f64,
    pub warnings: Vec<PredictionWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable {
    anchors: Vec<Anchor>,
    groups: Vec<Group>,
}

fn scaling_is_monotone(nodes: &[Node]) -> bool {
    // f_s ∝ r · v(r) with r = h_LN/λ; on each linear segment its slope
    // v + r·v' is linear in r, so checking the segment ends suffices.
    nodes.windows(2).all(|w| {
        let slope = (w[1].v_p - w[0].v_p) / (w[1].x - w[0].x);
        w[0].v_p + w[0].x * slope > 0.0 && w[1].v_p + w[1].x * slope > 0.0
    })
}

impl DispersionTable {
    pub fn from_anchors(anchors: Vec<Anchor>) -> Result<Self, DesignError> {
        let invalid = |msg: String| Err(DesignError::InvalidTable(msg));
        for (i, a) in anchors.iter().enumerate() {
            let row = i + 1;
            if !(a.h_ln_over_lambda.is_finite() && a.h_ln_over_lambda > 0.0) {
                return invalid(format!("row {row}: h_ln_over_lambda must be positive"));
            }
            if !(a.h_elec_over_lambda.is_finite() && a.h_elec_over_lambda >= 0.0) {
                return invalid(format!("row {row}: h_elec_over_lambda must be non-negative"));
            }
            if !(a.duty > 0.0 && a.duty < 1.0) {
                return invalid(format!("row {row}: duty must lie in (0, 1)"));
            }
            if !(a.v_p.is_finite() && a.v_p > 0.0) {
                return invalid(format!("row {row}: v_p must be positive"));
            }
            if !(a.keff2 >= 0.0 && a.keff2 < 1.0) {
                return invalid(format!("row {row}: keff2 must lie in [0, 1)"));
            }
            if anchors[..i].iter().any(|b| {
                b.family == a.family
                    && b.h_ln_over_lambda == a.h_ln_over_lambda
                    && b.h_elec_over_lambda == a.h_elec_over_lambda
                    && b.duty == a.duty
            }) {
                return invalid(format!("row {row}: duplicate anchor in family '{}'", a.family));
            }
        }

        let mut groups: Vec<Group> = Vec::new();
        for a in &anchors {
            let existing = groups
                .iter_mut()
                .find(|g| g.family == a.family && (g.duty - a.duty).abs() < DUTY_EPS);
            let node = Node {
                x: a.h_ln_over_lambda,
                other: a.h_elec_over_lambda,
                v_p: a.v_p,
                keff2: a.keff2,
            };
            match existing {
                Some(g) => g.nodes.push(node),
                None => groups.push(Group {
                    family: a.family.clone(),
                    duty: a.duty,
                    axis: InterpolationAxis::FilmRatio,
                    nodes: vec![node],
                    scaling_monotone: true,
                }),
            }
        }

        for g in &mut groups {
            let film_varies = g.nodes.iter().any(|n| n.x != g.nodes[0].x);
            if !film_varies && g.nodes.len() > 1 {
                g.axis = InterpolationAxis::ElectrodeRatio;
                for n in &mut g.nodes {
                    std::mem::swap(&mut n.x, &mut n.other);
                }
            }
            g.nodes.sort_by(|a, b| a.x.total_cmp(&b.x));
            if g.nodes.windows(2).any(|w| w[0].x == w[1].x) {
                return invalid(format!(
                    "family '{}' duty {} has anchors varying in both h_ln/lambda and h_elec/lambda",
                    g.family, g.duty
                ));
            }
            if g.axis == InterpolationAxis::FilmRatio {
                g.scaling_monotone = scaling_is_monotone(&g.nodes);
            } else {
                g.scaling_monotone = false;
            }
            let strict_family = g.family == Family::measured() && (g.duty - 0.5).abs() < DUTY_EPS;
            if strict_family
                && g.axis == InterpolationAxis::FilmRatio
                && g.nodes.windows(2).any(|w| w[1].v_p >= w[0].v_p)
            {
                return Err(DesignError::NonMonotonicDispersion {
                    family: g.family.to_string(),
                    duty: g.duty,
                });
            }
        }
        Ok(Self { anchors, groups })
    }

    /// Load from CSV with header
    /// `h_ln_over_lambda,h_elec_over_lambda,duty,v_p_mps,keff2,family,provenance`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, DesignError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let anchors = rdr
            .deserialize()
            .collect::<Result<Vec<Anchor>, _>>()
            .map_err(|e| DesignError::InvalidTable(e.to_string()))?;
        Self::from_anchors(anchors)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, DesignError> {
        Self::from_csv_reader(text.as_bytes())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DesignError> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| DesignError::InvalidTable(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(file)
    }

    /// The table shipped with the crate: fabricated devices (`measured`) and
    /// the two FEM endpoints (`simulated`).
    pub fn builtin() -> Self {
        Self::from_csv_str(BUILTIN_TABLE).expect("builtin dispersion table is valid")
    }

    pub fn builtin_csv() -> &'static str {
        BUILTIN_TABLE
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    /// Anchors of `family` at `duty`, sorted by h_LN/λ.
    pub fn family_anchors(&self, family: &Family, duty: f64) -> Vec<&Anchor> {
        let mut v: Vec<&Anchor> = self
            .anchors
            .iter()
            .filter(|a| &a.family == family && (a.duty - duty).abs() < DUTY_EPS)
            .collect();
        v.sort_by(|a, b| a.h_ln_over_lambda.total_cmp(&b.h_ln_over_lambda));
        v
    }

    fn primary_group(&self, family: &Family) -> Result<&Group, DesignError> {
        // Most anchors wins; ties go to the earliest group in the file.
        self.groups
            .iter()
            .filter(|g| &g.family == family)
            .fold(None::<&Group>, |best, g| match best {
                Some(b) if b.nodes.len() >= g.nodes.len() => Some(b),
                _ => Some(g),
            })
            .ok_or_else(|| DesignError::UnknownFamily(family.to_string()))
    }

    fn select_group(
        &self,
        g: &DeviceGeometry,
        opts: &PredictOptions,
    ) -> Result<(&Group, Vec<PredictionWarning>), DesignError> {
        let primary = self.primary_group(&opts.family)?;
        let same_duty = self.groups.iter().find(|grp| {
            grp.family == opts.family
                && (grp.duty - g.duty).abs() < DUTY_EPS
                && (grp.covers(grp.axis_value(g)) || (opts.allow_extrapolation && grp.nodes.len() > 1))
        });
        match same_duty {
            Some(grp) => Ok((grp, Vec::new())),
            None => {
                let mut warnings = Vec::new();
                if (primary.duty - g.duty).abs() >= DUTY_EPS {
                    warnings.push(PredictionWarning::DutyMismatch {
                        requested: g.duty,
                        used: primary.duty,
                    });
                }
                Ok((primary, warnings))
            }
        }
    }

    /// Phase velocity, f_s and k_eff² for `g`.
    pub fn predict(&self, g: &DeviceGeometry, opts: &PredictOptions) -> Result<DesignPoint, DesignError> {
        g.validate()?;
        let (group, mut warnings) = self.select_group(g, opts)?;
        let x = group.axis_value(g);
        let (v_p, extrapolated) = group.interpolate(x, Column::VelocityMps, opts.allow_extrapolation)?;
        let (keff2, _) = group.interpolate(x, Column::Keff2, opts.allow_extrapolation)?;
        let (other, _) = group.interpolate(x, Column::Other, opts.allow_extrapolation)?;
        if extrapolated {
            warnings.push(PredictionWarning::Extrapolated { ratio: x });
        }
        let requested = match group.axis {
            InterpolationAxis::FilmRatio => g.h_elec_over_lambda(),
            InterpolationAxis::ElectrodeRatio => g.h_ln_over_lambda(),
        };
        if (requested - other).abs() > RATIO_WARN * other.abs() {
            warnings.push(match group.axis {
                InterpolationAxis::FilmRatio => PredictionWarning::ElectrodeMismatch {
                    requested,
                    anchor: other,
                },
                InterpolationAxis::ElectrodeRatio => PredictionWarning::FilmMismatch {
                    requested,
                    anchor: other,
                },
            });
        }
        Ok(DesignPoint {
            v_p,
            f_s: v_p / g.lambda,
            keff2: keff2.clamp(0.0, 1.0),
            warnings,
        })
    }
}

/// f_s = v_p(h_LN/λ) / λ.
pub fn predict_fs(
    g: &DeviceGeometry,
    table: &DispersionTable,
    opts: &PredictOptions,
) -> Result<Prediction, DesignError> {
    let p = table.predict(g, opts)?;
    Ok(Prediction {
        value: p.f_s,
        warnings: p.warnings,
    })
}

pub fn predict_keff2(
    g: &DeviceGeometry,
    table: &DispersionTable,
    opts: &PredictOptions,
) -> Result<Prediction, DesignError> {
    let p = table.predict(g, opts)?;
    Ok(Prediction {
        value: p.keff2,
        warnings: p.warnings,
    })
}

/// Wavelength that puts f_s at `target_fs` for a film of thickness `h_ln`,
/// using the family's largest duty group. Bisection on λ to 1e-10 relative.
pub fn scale_to_frequency(
    target_fs: f64,
    h_ln: f64,
    table: &DispersionTable,
    family: &Family,
) -> Result<f64, DesignError> {
    if !(h_ln.is_finite() && h_ln > 0.0) {
        return Err(DesignError::InvalidGeometry("h_ln must be positive".into()));
    }
    let group = table.primary_group(family)?;
    if group.axis != InterpolationAxis::FilmRatio || !group.scaling_monotone || group.nodes.len() < 2 {
        return Err(DesignError::NonMonotonicScaling(family.to_string()));
    }
    let (x_lo, x_hi) = group.hull();
    let fs_at = |lambda: f64| -> Result<f64, DesignError> {
        let (v, _) = group.interpolate(h_ln / lambda, Column::VelocityMps, false)?;
        Ok(v / lambda)
    };
    // Short λ means a thick film relative to λ, the top of the hull.
    let mut short = h_ln / x_hi;
    let mut long = h_ln / x_lo;
    let f_max = fs_at(short)?;
    let f_min = fs_at(long)?;
    if !(target_fs >= f_min && target_fs <= f_max) {
        return Err(DesignError::TargetOutOfRange {
            target: target_fs,
            lo: f_min,
            hi: f_max,
        });
    }
    while (long - short) > 1e-10 * short {
        let mid = 0.5 * (short + long);
        if fs_at(mid)? > target_fs {
            short = mid;
        } else {
            long = mid;
        }
    }
    Ok(0.5 * (short + long))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Lambda,
    HLn,
    HElec,
    Duty,
    Electrodes,
    Reflectors,
    Aperture,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lambda => "lambda_m",
            Self::HLn => "h_ln_m",
            Self::HElec => "h_elec_m",
            Self::Duty => "duty",
            Self::Electrodes => "n_e",
            Self::Reflectors => "n_r",
            Self::Aperture => "aperture_lambda",
        }
    }

    fn apply(self, base: &DeviceGeometry, value: f64) -> DeviceGeometry {
        let mut g = *base;
        let count = |v: f64| if v >= 0.0 && v.fract() == 0.0 { v as u32 } else { 0 };
        match self {
            Self::Lambda => g.lambda = value,
            Self::HLn => g.h_ln = value,
            Self::HElec => g.h_elec = value,
            Self::Duty => g.duty = value,
            Self::Electrodes => g.n_e = count(value),
            Self::Reflectors => g.n_r = count(value),
            Self::Aperture => g.aperture = value,
        }
        g
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" | "lambda_m" => Ok(Self::Lambda),
            "h_ln" | "h_ln_m" => Ok(Self::HLn),
            "h_elec" | "h_elec_m" => Ok(Self::HElec),
            "duty" => Ok(Self::Duty),
            "n_e" => Ok(Self::Electrodes),
            "n_r" => Ok(Self::Reflectors),
            "aperture" | "aperture_lambda" => Ok(Self::Aperture),
            _ => Err(format!("unknown sweep axis '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: Result<DesignPoint, DesignError>,
}

/// Predict each geometry obtained by setting `axis` to each of `values`.
/// Failures are kept in their row; rows follow the input order.
pub fn sweep(
    base: &DeviceGeometry,
    axis: SweepAxis,
    values: &[f64],
    table: &DispersionTable,
    opts: &PredictOptions,
) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| SweepRow {
            value,
            outcome: table.predict(&axis.apply(base, value), opts),
        })
        .collect()
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Sweep rows as CSV: `<axis>,v_p_mps,f_s_hz,f_s_GHz,keff2,warnings,error`,
/// predictions to six significant digits.
pub fn sweep_csv(axis: SweepAxis, rows: &[SweepRow]) -> String {
    let mut out = format!("{},v_p_mps,f_s_hz,f_s_GHz,keff2,warnings,error\n", axis.name());
    for row in rows {
        let line = match &row.outcome {
            Ok(p) => {
                let warnings: Vec<String> = p.warnings.iter().map(|w| w.to_string()).collect();
                format!(
                    "{},{},{},{},{},{},",
                    row.value,
                    sig6(p.v_p),
                    sig6(p.f_s),
                    sig6(p.f_s / 1e9),
                    sig6(p.keff2),
                    csv_quote(&warnings.join("; "))
                )
            }
            Err(e) => format!("{},,,,,,{}", row.value, csv_quote(&e.to_string())),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry(lambda_nm: f64) -> DeviceGeometry {
        DeviceGeometry {
            lambda: lambda_nm * 1e-9,
            ..DeviceGeometry::reference_device("F").unwrap()
        }
    }

    fn opts(family: Family) -> PredictOptions {
        PredictOptions {
            family,
            allow_extrapolation: false,
        }
    }

    #[test]
    fn builtin_anchor_values() {
        let t = DispersionTable::builtin();
        let measured: Vec<f64> = t
            .family_anchors(&Family::measured(), 0.5)
            .iter()
            .map(|a| a.v_p)
            .collect();
        assert_eq!(measured, vec![3736.0, 3690.0, 3528.0, 3484.0, 3209.0]);
        let sim: Vec<f64> = t
            .family_anchors(&Family::simulated(), 0.5)
            .iter()
            .map(|a| a.v_p)
            .collect();
        assert_eq!(sim, vec![3664.0, 3103.0]);
        let a = t.family_anchors(&Family::measured(), 0.7);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].v_p, 3620.0);
    }

    #[test]
    fn measured_anchor_is_exact() {
        let t = DispersionTable::builtin();
        let f = predict_fs(&geometry(400.0), &t, &opts(Family::measured())).unwrap();
        assert_eq!(f.value, 3736.0 / 400e-9);
        assert!(f.warnings.is_empty(), "{:?}", f.warnings);
        let sim = t.predict(&geometry(400.0), &opts(Family::simulated())).unwrap();
        assert_eq!(sim.v_p, 3664.0);
        assert_eq!(sim.keff2, 0.39);
    }

    #[test]
    fn device_e_prediction() {
        let t = DispersionTable::builtin();
        let e = DeviceGeometry::reference_device("E").unwrap();
        let f = predict_fs(&e, &t, &opts(Family::measured())).unwrap();
        assert!((f.value / 13.37e9 - 1.0).abs() < 5e-3, "{}", f.value);
        let k = predict_keff2(&e, &t, &opts(Family::measured())).unwrap();
        assert!((k.value - 0.07).abs() < 0.005);
    }

    #[test]
    fn interpolation_between_b_and_c() {
        // Oracle: straight line through (1.94, 3690) and (2.16, 3528).
        let t = DispersionTable::builtin();
        let g = DeviceGeometry {
            h_ln: 2.05 * 300e-9,
            ..geometry(300.0)
        };
        let p = t.predict(&g, &opts(Family::measured())).unwrap();
        let expected = 3690.0 + (2.05 - 1.94) / (2.16 - 1.94) * (3528.0 - 3690.0);
        assert!((p.v_p - expected).abs() < 1e-9);
        assert!((p.v_p - 3609.0).abs() < 1e-9);
        let kexp = 0.11 + (2.05 - 1.94) / (2.16 - 1.94) * (0.13 - 0.11);
        assert!((p.keff2 - kexp).abs() < 1e-12);
    }

    #[test]
    fn lambda_halving_doubles_fs() {
        let t = DispersionTable::builtin();
        let o = opts(Family::measured());
        let g = DeviceGeometry {
            h_ln: 2.2 * 320e-9,
            ..geometry(320.0)
        };
        let half = DeviceGeometry {
            lambda: g.lambda / 2.0,
            h_ln: g.h_ln / 2.0,
            h_elec: g.h_elec / 2.0,
            ..g
        };
        let a = predict_fs(&g, &t, &o).unwrap().value;
        let b = predict_fs(&half, &t, &o).unwrap().value;
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn out_of_range_refused_unless_enabled() {
        let t = DispersionTable::builtin();
        let g = geometry(100.0);
        assert!(matches!(
            predict_fs(&g, &t, &opts(Family::measured())),
            Err(DesignError::OutOfTableRange { .. })
        ));
        let o = PredictOptions {
            family: Family::measured(),
            allow_extrapolation: true,
        };
        let p = predict_fs(&g, &t, &o).unwrap();
        assert!(p
            .warnings
            .iter()
            .any(|w| matches!(w, PredictionWarning::Extrapolated { .. })));
    }

    #[test]
    fn duty_mismatch_warns() {
        let t = DispersionTable::builtin();
        let a = DeviceGeometry::reference_device("A").unwrap();
        let p = t.predict(&a, &opts(Family::measured())).unwrap();
        assert_eq!(p.v_p, 3620.0);
        assert!(p.warnings.is_empty());
        let off = DeviceGeometry { duty: 0.6, ..a };
        let p = t.predict(&off, &opts(Family::measured())).unwrap();
        assert_eq!(p.v_p, 3736.0);
        assert!(matches!(p.warnings[0], PredictionWarning::DutyMismatch { .. }));
        // Duty 0.7 away from its single anchor falls back to the 50 % data.
        let b = DeviceGeometry {
            duty: 0.7,
            ..DeviceGeometry::reference_device("B").unwrap()
        };
        let p = t.predict(&b, &opts(Family::measured())).unwrap();
        assert!(matches!(p.warnings[0], PredictionWarning::DutyMismatch { .. }));
    }

    #[test]
    fn scale_inverts_reference_devices() {
        let t = DispersionTable::builtin();
        let e = scale_to_frequency(13.37e9, 0.7e-6, &t, &Family::measured()).unwrap();
        assert!((e / 240e-9 - 1.0).abs() < 5e-3, "{e}");
        let f = scale_to_frequency(9.34e9, 0.7e-6, &t, &Family::measured()).unwrap();
        assert!((f / 400e-9 - 1.0).abs() < 5e-3, "{f}");
        assert!(matches!(
            scale_to_frequency(100e9, 0.7e-6, &t, &Family::measured()),
            Err(DesignError::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn unknown_family() {
        let t = DispersionTable::builtin();
        assert!(matches!(
            t.predict(&geometry(400.0), &opts(Family::new("bogus"))),
            Err(DesignError::UnknownFamily(_))
        ));
    }

    #[test]
    fn table_validation() {
        let header = "h_ln_over_lambda,h_elec_over_lambda,duty,v_p_mps,keff2,family,provenance\n";
        let increasing = format!("{header}1.0,0.1,0.5,3000,0.1,measured,x\n2.0,0.1,0.5,3100,0.1,measured,y\n");
        assert!(matches!(
            DispersionTable::from_csv_str(&increasing),
            Err(DesignError::NonMonotonicDispersion { .. })
        ));
        let dup = format!("{header}1.0,0.1,0.5,3000,0.1,measured,x\n1.0,0.1,0.5,2900,0.1,measured,y\n");
        assert!(DispersionTable::from_csv_str(&dup).is_err());
        let bad_k = format!("{header}1.0,0.1,0.5,3000,1.2,measured,x\n");
        assert!(DispersionTable::from_csv_str(&bad_k).is_err());
        let bad_header = "a,b\n1,2\n";
        assert!(DispersionTable::from_csv_str(bad_header).is_err());
        // Other families may be non-monotone.
        let sim = format!("{header}1.0,0.1,0.5,3000,0.1,simulated,x\n2.0,0.1,0.5,3100,0.1,simulated,y\n");
        assert!(DispersionTable::from_csv_str(&sim).is_ok());
    }

    #[test]
    fn electrode_loading_curve_interpolates_along_h_elec() {
        let header = "h_ln_over_lambda,h_elec_over_lambda,duty,v_p_mps,keff2,family,provenance\n";
        let text = format!(
            "{header}1.75,0.025,0.5,3800,0.30,fig3,a\n1.75,0.1,0.5,3664,0.39,fig3,b\n1.75,0.25,0.5,3400,0.33,fig3,c\n"
        );
        let t = DispersionTable::from_csv_str(&text).unwrap();
        let g = DeviceGeometry {
            h_elec: 20e-9,
            ..geometry(400.0)
        };
        let p = t.predict(&g, &opts(Family::new("fig3"))).unwrap();
        let expected = 3800.0 + (0.05 - 0.025) / (0.1 - 0.025) * (3664.0 - 3800.0);
        assert!((p.v_p - expected).abs() < 1e-9);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn sweep_preserves_order_and_records_errors() {
        let t = DispersionTable::builtin();
        let base = geometry(400.0);
        let rows = sweep(
            &base,
            SweepAxis::Lambda,
            &[400e-9, 100e-9, 240e-9],
            &t,
            &opts(Family::measured()),
        );
        assert_eq!(rows.len(), 3);
        assert!(rows[0].outcome.is_ok());
        assert!(matches!(rows[1].outcome, Err(DesignError::OutOfTableRange { .. })));
        assert!(rows[2].outcome.is_ok());
        assert!(sweep(&base, SweepAxis::Lambda, &[], &t, &opts(Family::measured())).is_empty());
        let csv = sweep_csv(SweepAxis::Lambda, &rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(2).unwrap().contains("outside the table range"));
    }

    #[test]
    fn invalid_geometry_rows() {
        let t = DispersionTable::builtin();
        let rows = sweep(&geometry(400.0), SweepAxis::Duty, &[1.5], &t, &opts(Family::measured()));
        assert!(matches!(rows[0].outcome, Err(DesignError::InvalidGeometry(_))));
    }

    #[test]
    fn geometry_json_keys() {
        let v = serde_json::to_value(geometry(400.0)).unwrap();
        for key in [
            "lambda_m",
            "h_ln_m",
            "h_elec_m",
            "duty",
            "n_e",
            "n_r",
            "aperture_lambda",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
