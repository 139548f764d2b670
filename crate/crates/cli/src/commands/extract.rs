use std::path::Path;

use sawkit::extract::{full_extraction, ExtractOptions, ExtractionReport};
use sawkit::fit::{fit_mbvd, initial_guess, FitConfig, FitError};
use sawkit::network::s_to_y;
use sawkit::touchstone::TouchstoneFormat;
use sawkit::OnePortTrace;

use crate::error::CliError;
use crate::io;
use crate::ExtractArgs;

/// Device name and wavelength (m) from flags, falling back to file comments.
pub fn identity(
    fmt: &TouchstoneFormat,
    device: Option<&str>,
    lambda_nm: Option<f64>,
    path: &Path,
) -> Result<(Option<String>, Option<f64>), CliError> {
    let device = device
        .map(str::to_string)
        .or_else(|| io::comment_value(&fmt.comments, "device").map(str::to_string));
    let lambda_nm = match lambda_nm {
        Some(l) => Some(l),
        None => io::comment_value(&fmt.comments, "lambda_nm")
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::Input(format!("{}: bad lambda_nm comment '{v}'", path.display())))
            })
            .transpose()?,
    };
    if let Some(l) = lambda_nm {
        if !(l.is_finite() && l > 0.0) {
            return Err(CliError::Input(format!("lambda_nm must be positive, got {l}")));
        }
    }
    Ok((device, lambda_nm.map(|l| l / 1e9)))
}

pub fn extract_trace(
    trace: &OnePortTrace,
    options: &ExtractOptions,
    path: &Path,
) -> Result<ExtractionReport, CliError> {
    full_extraction(trace, options).map_err(|e| CliError::extraction(path.display(), e))
}

fn fitted_keff2(trace: &OnePortTrace, path: &Path) -> Result<f64, CliError> {
    let y = s_to_y(trace).map_err(|e| CliError::extraction(path.display(), e))?;
    let init = initial_guess(&y).map_err(|e| CliError::extraction(path.display(), e))?;
    match fit_mbvd(&y, &init, &FitConfig::default()) {
        Ok(r) => Ok(r.params.keff2()),
        Err(FitError::DidNotConverge(best)) => {
            log::warn!("{}: mBVD fit did not converge; using best parameters", path.display());
            Ok(best.params.keff2())
        }
        Err(e) => Err(CliError::extraction(path.display(), e)),
    }
}

pub fn run(args: &ExtractArgs) -> Result<(), CliError> {
    let (mut trace, fmt) = io::read_touchstone(&args.input)?;
    if let Some(z0) = args.z0 {
        trace = trace.with_z0(z0).map_err(|e| CliError::input("--z0", e))?;
    }
    let (device, lambda) = identity(&fmt, args.device.as_deref(), args.lambda_nm, &args.input)?;
    let options = ExtractOptions {
        smith_band: args.smith_band,
        q_band: args.q_band,
        smoothing: args.smooth,
        device,
        lambda,
    };
    let mut report = extract_trace(&trace, &options, &args.input)?;
    if args.mbvd {
        report.keff2_mbvd = Some(fitted_keff2(&trace, &args.input)?);
    }

    io::write_json(&args.output, &report)?;
    if let Some(csv) = &args.csv {
        io::write_text(
            csv,
            &format!("{}\n{}\n", ExtractionReport::CSV_HEADER, report.csv_row()),
        )?;
    }
    eprintln!("{}", report.summary_line());
    Ok(())
}
