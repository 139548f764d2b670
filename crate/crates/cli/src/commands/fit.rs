use std::path::{Path, PathBuf};

use sawkit::extract::{full_extraction, ExtractOptions};
use sawkit::fit::{fit_mbvd, initial_guess, FitConfig, FitError, FitResult};
use sawkit::network::s_to_y;
use sawkit::MbvdParams;
use serde::{Deserialize, Serialize};

use crate::commands::Versioned;
use crate::error::CliError;
use crate::io;
use crate::FitArgs;

enum Init {
    Auto,
    FromFile(PathBuf),
}

fn parse_init(words: &[String]) -> Result<Init, CliError> {
    match words {
        [mode] if mode == "auto" => Ok(Init::Auto),
        [mode, path] if mode == "from-file" => Ok(Init::FromFile(PathBuf::from(path))),
        _ => Err(CliError::Input(format!(
            "--init expects 'auto' or 'from-file PATH', got '{}'",
            words.join(" ")
        ))),
    }
}

/// Either a bare parameter set or a previous fit output.
#[derive(Deserialize)]
#[serde(untagged)]
enum ParamsFile {
    Fit { params: MbvdParams },
    Bare(MbvdParams),
}

pub fn read_params(path: &Path) -> Result<MbvdParams, CliError> {
    let params = match io::read_json::<ParamsFile>(path)? {
        ParamsFile::Fit { params } | ParamsFile::Bare(params) => params,
    };
    params.validate().map_err(|e| CliError::input(path.display(), e))?;
    Ok(params)
}

/// k_eff² three ways: from the data's |Y| extrema, from the fitted model's
/// |Y| extrema, and from the fitted element values.
#[derive(Debug, Serialize)]
struct Comparison {
    keff2_data: f64,
    keff2_model_extrema: f64,
    keff2_mbvd: f64,
}

#[derive(Debug, Serialize)]
struct FitOutput<'a> {
    #[serde(flatten)]
    fit: &'a FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

fn compare(args: &FitArgs, trace: &sawkit::OnePortTrace, fit: &FitResult) -> Result<Comparison, CliError> {
    let data = full_extraction(trace, &ExtractOptions::default())
        .map_err(|e| CliError::extraction(args.input.display(), e))?;
    let model_trace = fit
        .params
        .synthesize_s11(trace.frequencies(), trace.z0())
        .map_err(|e| CliError::extraction("fitted model", e))?;
    let model = full_extraction(&model_trace, &ExtractOptions::default())
        .map_err(|e| CliError::extraction("fitted model", e))?;
    Ok(Comparison {
        keff2_data: data.keff2,
        keff2_model_extrema: model.keff2,
        keff2_mbvd: fit.params.keff2(),
    })
}

pub fn run(args: &FitArgs) -> Result<(), CliError> {
    let init_mode = parse_init(&args.init)?;
    let (trace, _) = io::read_touchstone(&args.input)?;
    let y = s_to_y(&trace).map_err(|e| CliError::extraction(args.input.display(), e))?;
    let init = match init_mode {
        Init::Auto => initial_guess(&y).map_err(|e| CliError::extraction(args.input.display(), e))?,
        Init::FromFile(path) => read_params(&path)?,
    };
    let config = FitConfig {
        max_iterations: args.max_iterations,
        ..FitConfig::default()
    };
    let (fit, converged) = match fit_mbvd(&y, &init, &config) {
        Ok(r) => (r, true),
        Err(FitError::DidNotConverge(best)) => (*best, false),
        Err(e) => return Err(CliError::extraction(args.input.display(), e)),
    };

    let comparison = if args.report {
        Some(compare(args, &trace, &fit)?)
    } else {
        None
    };
    if let Some(c) = &comparison {
        eprintln!(
            "k_eff² data extrema {:.2} %  model extrema {:.2} %  mBVD (π²/8)·C_m/C_0 {:.2} %",
            c.keff2_data * 100.0,
            c.keff2_model_extrema * 100.0,
            c.keff2_mbvd * 100.0
        );
    }
    let output = FitOutput { fit: &fit, comparison };
    io::write_json(&args.output, &Versioned::new(&output))?;
    if converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "fit did not converge after {} iterations; best result written with converged = false",
            fit.iterations
        )))
    }
}
