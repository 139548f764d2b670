use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sawkit::mbvd::linear_grid;
use sawkit::touchstone::{write_touchstone, TouchstoneFormat};
use sawkit::{Complex64, MbvdParams, OnePortTrace};

use crate::commands::fit::read_params;
use crate::error::CliError;
use crate::io;
use crate::SynthArgs;

pub struct SynthRequest<'a> {
    pub params: &'a MbvdParams,
    pub f_lo: f64,
    pub f_hi: f64,
    pub points: usize,
    pub z0: f64,
    pub noise: f64,
    pub seed: u64,
}

/// Model S11 on a linear grid, with optional additive complex Gaussian
/// noise of standard deviation `noise` (split evenly between Re and Im).
pub fn synthesize(req: &SynthRequest) -> Result<OnePortTrace, CliError> {
    if req.points < 2 {
        return Err(CliError::Input(format!(
            "grid needs at least 2 points, got {}",
            req.points
        )));
    }
    if !(req.f_lo > 0.0 && req.f_lo < req.f_hi && req.f_hi.is_finite()) {
        return Err(CliError::Input(format!(
            "need 0 < f_lo < f_hi, got [{}, {}]",
            req.f_lo, req.f_hi
        )));
    }
    if !(req.noise >= 0.0 && req.noise.is_finite()) {
        return Err(CliError::Input(format!(
            "noise must be non-negative, got {}",
            req.noise
        )));
    }
    let grid = linear_grid(req.f_lo, req.f_hi, req.points);
    let trace = req
        .params
        .synthesize_s11(&grid, req.z0)
        .map_err(|e| CliError::input("synthesis", e))?;
    if req.noise == 0.0 {
        return Ok(trace);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let normal = Normal::new(0.0, req.noise / 2f64.sqrt()).expect("finite sigma");
    let noisy = trace
        .s11()
        .iter()
        .map(|&s| s + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    OnePortTrace::new(grid, noisy, req.z0).map_err(|e| CliError::input("synthesis", e))
}

pub fn identity_comments(device: Option<&str>, lambda_nm: Option<f64>) -> Vec<String> {
    let mut comments = Vec::new();
    if let Some(d) = device {
        comments.push(format!(" device: {d}"));
    }
    if let Some(l) = lambda_nm {
        comments.push(format!(" lambda_nm: {l}"));
    }
    comments
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    let params = read_params(&args.params)?;
    let trace = synthesize(&SynthRequest {
        params: &params,
        f_lo: args.f_lo,
        f_hi: args.f_hi,
        points: args.points,
        z0: args.z0,
        noise: args.noise,
        seed: args.seed,
    })?;
    let mut fmt = TouchstoneFormat::new(args.unit, args.format, args.z0);
    fmt.comments = identity_comments(args.device.as_deref(), args.lambda_nm);
    io::write_text(&args.output, &write_touchstone(&trace, &fmt))
}
