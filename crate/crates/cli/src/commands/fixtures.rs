//! Synthetic stand-ins for the six reference resonators.

use std::path::Path;

use sawkit::touchstone::{write_touchstone, FrequencyUnit, TouchstoneFormat, ValueFormat};
use sawkit::MbvdParams;

use crate::commands::synth::{identity_comments, synthesize, SynthRequest};
use crate::commands::Versioned;
use crate::error::CliError;
use crate::io;
use crate::MakeFixturesArgs;

/// (name, λ nm, f_s GHz, k_eff², Q_max) per device.
pub const DEVICES: [(&str, f64, f64, f64, f64); 6] = [
    ("A", 400.0, 9.05, 0.15, 213.0),
    ("B", 360.0, 10.25, 0.11, 172.0),
    ("C", 324.0, 10.89, 0.13, 126.0),
    ("D", 296.0, 11.77, 0.09, 111.0),
    ("E", 240.0, 13.37, 0.07, 58.0),
    ("F", 400.0, 9.34, 0.16, 99.0),
];

pub const FIXTURE_POINTS: usize = 4001;

/// mBVD element values for a device: C_0 = 100 fF, R_s = R_0 = 0.5 Ω,
/// motional Q equal to the device's Q_max.
pub fn device_params(f_s_ghz: f64, keff2: f64, q: f64) -> MbvdParams {
    MbvdParams::from_resonance(f_s_ghz * 1e9, keff2, q, 100e-15, 0.5, 0.5).expect("fixture parameters are valid")
}

pub fn run(args: &MakeFixturesArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    for (name, lambda_nm, f_s, keff2, q) in DEVICES {
        let params = device_params(f_s, keff2, q);
        let trace = synthesize(&SynthRequest {
            params: &params,
            f_lo: 0.85 * params.series_resonance(),
            f_hi: 1.15 * params.parallel_resonance(),
            points: FIXTURE_POINTS,
            z0: 50.0,
            noise: 0.0,
            seed: 0,
        })?;
        let mut fmt = TouchstoneFormat::new(FrequencyUnit::GHz, ValueFormat::RealImag, 50.0);
        fmt.comments = identity_comments(Some(name), Some(lambda_nm));
        let path = args.out_dir.join(format!("device_{name}.s1p"));
        io::write_text(&path, &write_touchstone(&trace, &fmt))?;
        if args.with_params {
            let p = args.out_dir.join(format!("device_{name}.params.json"));
            io::write_json(Path::new(&p), &Versioned::new(&params))?;
        }
        log::info!("wrote {}", path.display());
    }
    Ok(())
}
