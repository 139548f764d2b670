//! Touchstone v1 reader/writer for one-port (`.s1p`) files.
//!
//! Only S-parameter, single-port files are accepted. Comment lines are kept
//! verbatim in [`TouchstoneFormat::comments`] and written back out, so
//! measurement metadata survives a read/write cycle.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// Problems with the samples of a trace, independent of any file format.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("trace needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("{frequencies} frequencies but {values} values")]
    LengthMismatch { frequencies: usize, values: usize },
    #[error("frequency at index {index} is not positive")]
    NonPositiveFrequency { index: usize },
    #[error("frequency at index {index} is not strictly increasing")]
    NonMonotonicFrequency { index: usize },
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("reference impedance must be positive and finite, got {0}")]
    InvalidImpedance(f64),
}

pub(crate) fn validate_grid(frequencies: &[f64], values: usize) -> Result<(), TraceError> {
    if frequencies.len() != values {
        return Err(TraceError::LengthMismatch {
            frequencies: frequencies.len(),
            values,
        });
    }
    if frequencies.len() < 2 {
        return Err(TraceError::TooShort(frequencies.len()));
    }
    for (index, &f) in frequencies.iter().enumerate() {
        if !f.is_finite() {
            return Err(TraceError::NonFinite { index });
        }
        if f <= 0.0 {
            return Err(TraceError::NonPositiveFrequency { index });
        }
        if index > 0 && f <= frequencies[index - 1] {
            return Err(TraceError::NonMonotonicFrequency { index });
        }
    }
    Ok(())
}

pub(crate) fn validate_impedance(z0: f64) -> Result<(), TraceError> {
    if z0.is_finite() && z0 > 0.0 {
        Ok(())
    } else {
        Err(TraceError::InvalidImpedance(z0))
    }
}

/// A measured (or synthesised) one-port reflection trace.
#[derive(Debug, Clone, PartialEq)]
pub struct OnePortTrace {
    frequencies: Vec<f64>,
    s11: Vec<Complex64>,
    z0: f64,
}

impl OnePortTrace {
    /// Frequencies in Hz, strictly increasing and positive; `z0` in ohms.
    pub fn new(frequencies: Vec<f64>, s11: Vec<Complex64>, z0: f64) -> Result<Self, TraceError> {
        validate_grid(&frequencies, s11.len())?;
        validate_impedance(z0)?;
        if let Some(index) = s11.iter().position(|s| !s.is_finite()) {
            return Err(TraceError::NonFinite { index });
        }
        Ok(Self { frequencies, s11, z0 })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn s11(&self) -> &[Complex64] {
        &self.s11
    }

    /// Reference impedance in ohms.
    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Same samples, reinterpreted against a different reference impedance.
    ///
    /// This does not renormalise; see [`crate::network::renormalize`] for that.
    pub fn with_z0(mut self, z0: f64) -> Result<Self, TraceError> {
        validate_impedance(z0)?;
        self.z0 = z0;
        Ok(self)
    }

    /// Replace the frequency axis, keeping the S11 samples.
    pub fn with_frequencies(self, frequencies: Vec<f64>) -> Result<Self, TraceError> {
        Self::new(frequencies, self.s11, self.z0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FrequencyUnit {
    pub const ALL: [FrequencyUnit; 4] = [Self::Hz, Self::KHz, Self::MHz, Self::GHz];

    pub fn multiplier(self) -> f64 {
        match self {
            Self::Hz => 1.0,
            Self::KHz => 1e3,
            Self::MHz => 1e6,
            Self::GHz => 1e9,
        }
    }
}

impl fmt::Display for FrequencyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hz => "HZ",
            Self::KHz => "KHZ",
            Self::MHz => "MHZ",
            Self::GHz => "GHZ",
        })
    }
}

impl FromStr for FrequencyUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "HZ" => Ok(Self::Hz),
            "KHZ" => Ok(Self::KHz),
            "MHZ" => Ok(Self::MHz),
            "GHZ" => Ok(Self::GHz),
            _ => Err(format!("unknown frequency unit '{s}'")),
        }
    }
}

/// How each complex sample is written on a data row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueFormat {
    /// Real and imaginary part.
    RealImag,
    /// Linear magnitude and angle in degrees.
    MagAngle,
    /// 20·log10 magnitude and angle in degrees.
    DbAngle,
}

impl ValueFormat {
    pub const ALL: [ValueFormat; 3] = [Self::RealImag, Self::MagAngle, Self::DbAngle];
}

impl fmt::Display for ValueFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RealImag => "RI",
            Self::MagAngle => "MA",
            Self::DbAngle => "DB",
        })
    }
}

impl FromStr for ValueFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RI" => Ok(Self::RealImag),
            "MA" => Ok(Self::MagAngle),
            "DB" => Ok(Self::DbAngle),
            _ => Err(format!("unknown value format '{s}'")),
        }
    }
}

/// Network parameter kind. Only scattering parameters are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parameter {
    #[default]
    S,
}

/// Everything in a Touchstone file besides the samples themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct TouchstoneFormat {
    pub frequency_unit: FrequencyUnit,
    pub parameter: Parameter,
    pub value_format: ValueFormat,
    /// Ohms, > 0.
    pub reference_resistance: f64,
    /// Comment lines with the leading `!` stripped, in file order.
    pub comments: Vec<String>,
}

/// The Touchstone v1 defaults: `# GHZ S MA R 50`.
impl Default for TouchstoneFormat {
    fn default() -> Self {
        Self {
            frequency_unit: FrequencyUnit::GHz,
            parameter: Parameter::S,
            value_format: ValueFormat::MagAngle,
            reference_resistance: 50.0,
            comments: Vec::new(),
        }
    }
}

impl TouchstoneFormat {
    pub fn new(frequency_unit: FrequencyUnit, value_format: ValueFormat, reference_resistance: f64) -> Self {
        Self {
            frequency_unit,
            value_format,
            reference_resistance,
            ..Self::default()
        }
    }

    /// The `# ...` option line, without a trailing newline.
    pub fn option_line(&self) -> String {
        format!(
            "# {} S {} R {}",
            self.frequency_unit,
            self.value_format,
            format_number(self.reference_resistance)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TouchstoneError {
    #[error("line {line}: malformed option line: {reason}")]
    MalformedOptionLine { line: usize, reason: String },
    #[error("line {line}: data before the option line")]
    MissingOptionLine { line: usize },
    #[error("line {line}: frequency is not strictly increasing")]
    NonMonotonicFrequency { line: usize },
    #[error("line {line}: frequency must be positive")]
    NonPositiveFrequency { line: usize },
    #[error("line {line}: expected 3 columns, found {found}")]
    WrongColumnCount { line: usize, found: usize },
    #[error("line {line}: cannot parse '{token}' as a finite number")]
    InvalidNumber { line: usize, token: String },
    #[error("need at least 2 data rows, found {rows}")]
    EmptyData { rows: usize },
    #[error("line {line}: unsupported: {what}")]
    Unsupported { line: usize, what: String },
}

fn parse_option_line(body: &str, line: usize) -> Result<TouchstoneFormat, TouchstoneError> {
    let malformed = |reason: String| TouchstoneError::MalformedOptionLine { line, reason };
    let mut fmt = TouchstoneFormat::default();
    let mut tokens = body.split_whitespace();
    while let Some(token) = tokens.next() {
        let upper = token.to_ascii_uppercase();
        if let Ok(unit) = upper.parse::<FrequencyUnit>() {
            fmt.frequency_unit = unit;
        } else if let Ok(vf) = upper.parse::<ValueFormat>() {
            fmt.value_format = vf;
        } else {
            match upper.as_str() {
                "S" => fmt.parameter = Parameter::S,
                "Y" | "Z" | "H" | "G" => {
                    return Err(TouchstoneError::Unsupported {
                        line,
                        what: format!("{upper}-parameter data (only S is supported)"),
                    })
                }
                "R" => {
                    let value = tokens
                        .next()
                        .ok_or_else(|| malformed("'R' without a resistance".into()))?;
                    let r: f64 = value
                        .parse()
                        .map_err(|_| malformed(format!("bad resistance '{value}'")))?;
                    if !(r.is_finite() && r > 0.0) {
                        return Err(malformed(format!("resistance must be positive, got {value}")));
                    }
                    fmt.reference_resistance = r;
                }
                _ => return Err(malformed(format!("unknown token '{token}'"))),
            }
        }
    }
    Ok(fmt)
}

fn parse_number(token: &str, line: usize) -> Result<f64, TouchstoneError> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| TouchstoneError::InvalidNumber {
            line,
            token: token.to_string(),
        })
}

fn decode(format: ValueFormat, a: f64, b: f64) -> Complex64 {
    match format {
        ValueFormat::RealImag => Complex64::new(a, b),
        ValueFormat::MagAngle => Complex64::from_polar(a, b.to_radians()),
        ValueFormat::DbAngle => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

/// Parse a one-port Touchstone v1 file. Accepts LF or CRLF line endings.
pub fn parse_touchstone(text: &str) -> Result<(OnePortTrace, TouchstoneFormat), TouchstoneError> {
    let mut format: Option<TouchstoneFormat> = None;
    let mut comments = Vec::new();
    let mut frequencies: Vec<f64> = Vec::new();
    let mut s11 = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('!') {
            comments.push(comment.to_string());
            continue;
        }
        // Inline comments may follow data or options.
        let content = trimmed.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            return Err(TouchstoneError::Unsupported {
                line,
                what: format!("Touchstone v2 keyword '{content}'"),
            });
        }
        if let Some(body) = content.strip_prefix('#') {
            if format.is_some() {
                log::warn!("line {line}: ignoring additional option line");
                continue;
            }
            format = Some(parse_option_line(body, line)?);
            continue;
        }

        let fmt = format.as_ref().ok_or(TouchstoneError::MissingOptionLine { line })?;
        let columns: Vec<&str> = content.split_whitespace().collect();
        match columns.len() {
            3 => {}
            9 => {
                return Err(TouchstoneError::Unsupported {
                    line,
                    what: "two-port data rows".into(),
                })
            }
            found => return Err(TouchstoneError::WrongColumnCount { line, found }),
        }
        let f = parse_number(columns[0], line)? * fmt.frequency_unit.multiplier();
        let a = parse_number(columns[1], line)?;
        let b = parse_number(columns[2], line)?;
        if f <= 0.0 {
            return Err(TouchstoneError::NonPositiveFrequency { line });
        }
        if frequencies.last().is_some_and(|&prev| f <= prev) {
            return Err(TouchstoneError::NonMonotonicFrequency { line });
        }
        frequencies.push(f);
        s11.push(decode(fmt.value_format, a, b));
    }

    if frequencies.len() < 2 {
        return Err(TouchstoneError::EmptyData {
            rows: frequencies.len(),
        });
    }
    let mut fmt = format.unwrap_or_default();
    fmt.comments = comments;
    let trace =
        OnePortTrace::new(frequencies, s11, fmt.reference_resistance).expect("parser enforces trace invariants");
    Ok((trace, fmt))
}

/// Angle in degrees folded into (-180, 180].
pub fn normalize_degrees(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Shortest representation that parses back to the same `f64`.
fn format_number(v: f64) -> String {
    let mag = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&mag) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

// 20·log10 of the smallest normal f64 is about -6153 dB; anything below that
// is written as this floor rather than -inf.
const DB_FLOOR: f64 = -6000.0;

fn encode(format: ValueFormat, s: Complex64) -> (f64, f64) {
    match format {
        ValueFormat::RealImag => (s.re, s.im),
        ValueFormat::MagAngle => (s.norm(), normalize_degrees(s.arg().to_degrees())),
        ValueFormat::DbAngle => {
            let db = 20.0 * s.norm().log10();
            (db.max(DB_FLOOR), normalize_degrees(s.arg().to_degrees()))
        }
    }
}

/// Render `trace` as a Touchstone v1 file (LF line endings).
///
/// Samples are written in shortest round-trip form, so parsing the output
/// reproduces the trace up to the unit/format conversion rounding.
/// The option line carries `fmt.reference_resistance`; callers normally set
/// it to `trace.z0()`.
pub fn write_touchstone(trace: &OnePortTrace, fmt: &TouchstoneFormat) -> String {
    let mut out = String::with_capacity(48 * (trace.len() + fmt.comments.len() + 1));
    for comment in &fmt.comments {
        out.push('!');
        out.push_str(comment);
        out.push('\n');
    }
    out.push_str(&fmt.option_line());
    out.push('\n');
    let scale = fmt.frequency_unit.multiplier();
    for (&f, &s) in trace.frequencies().iter().zip(trace.s11()) {
        let (a, b) = encode(fmt.value_format, s);
        out.push_str(&format_number(f / scale));
        out.push(' ');
        out.push_str(&format_number(a));
        out.push(' ');
        out.push_str(&format_number(b));
        out.push('\n');
    }
    out
}
