//! File helpers. A path of `-` means stdin or stdout.

use std::io::{Read, Write};
use std::path::Path;

use sawkit::touchstone::{parse_touchstone, TouchstoneFormat};
use sawkit::OnePortTrace;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::io(path, e))?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io(path, e))
    } else {
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}

pub fn read_touchstone(path: &Path) -> Result<(OnePortTrace, TouchstoneFormat), CliError> {
    let text = read_text(path)?;
    parse_touchstone(&text).map_err(|e| CliError::input(path.display(), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path.display(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Value of a `! key: value` comment, if any.
pub fn comment_value<'a>(comments: &'a [String], key: &str) -> Option<&'a str> {
    comments.iter().find_map(|c| {
        let (k, v) = c.trim().split_once(':')?;
        (k.trim().eq_ignore_ascii_case(key)).then(|| v.trim())
    })
}
