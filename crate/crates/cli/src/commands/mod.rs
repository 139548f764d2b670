pub mod convert;
pub mod extract;
pub mod fit;
pub mod fixtures;
pub mod report;
pub mod sweep;
pub mod synth;

use sawkit::Band;
use serde::Serialize;

/// JSON envelope for outputs whose payload has no version field of its own.
#[derive(Debug, Serialize)]
pub struct Versioned<'a, T: Serialize> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: &'a T,
}

impl<'a, T: Serialize> Versioned<'a, T> {
    pub fn new(body: &'a T) -> Self {
        Self {
            schema_version: sawkit::extract::SCHEMA_VERSION,
            body,
        }
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect()
}

/// `LO,HI` in Hz.
pub fn parse_band(s: &str) -> Result<Band, String> {
    match parse_floats(s)?.as_slice() {
        [lo, hi] => Band::new(*lo, *hi).map_err(|e| e.to_string()),
        _ => Err("expected LO,HI".into()),
    }
}

#[derive(Debug, Clone)]
pub struct Linspace(pub Vec<f64>);

/// `LO,HI,N` into N evenly spaced values.
pub fn parse_linspace(s: &str) -> Result<Linspace, String> {
    let v = parse_floats(s)?;
    let [lo, hi, n] = v.as_slice() else {
        return Err("expected LO,HI,N".into());
    };
    if !(n.fract() == 0.0 && *n >= 1.0) {
        return Err("N must be a positive integer".into());
    }
    Ok(Linspace(sawkit::mbvd::linear_grid(*lo, *hi, *n as usize)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_parsing() {
        let b = parse_band("8.5e9, 10.5e9").unwrap();
        assert_eq!((b.lo, b.hi), (8.5e9, 10.5e9));
        assert!(parse_band("2,1").is_err());
        assert!(parse_band("1").is_err());
        assert!(parse_band("a,b").is_err());
    }

    #[test]
    fn linspace_parsing() {
        assert_eq!(parse_linspace("10e-9,100e-9,4").unwrap().0.len(), 4);
        assert!(parse_linspace("1,2,2.5").is_err());
        assert!(parse_linspace("1,2").is_err());
    }
}
