use sawkit::design::{sweep, sweep_csv, DesignError, DeviceGeometry, DispersionTable, PredictOptions};

use crate::error::CliError;
use crate::io;
use crate::SweepArgs;

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    let geometry: DeviceGeometry = io::read_json(&args.geometry)?;
    geometry
        .validate()
        .map_err(|e| CliError::input(args.geometry.display(), e))?;
    let table = match &args.table {
        Some(path) => {
            let text = io::read_text(path)?;
            DispersionTable::from_csv_str(&text).map_err(|e| CliError::input(path.display(), e))?
        }
        None => DispersionTable::builtin(),
    };
    let values = args.linspace.as_ref().map_or(&args.values[..], |l| &l.0[..]);
    let options = PredictOptions {
        family: args.family.clone(),
        allow_extrapolation: args.allow_extrapolation,
    };
    let rows = sweep(&geometry, args.axis, values, &table, &options);
    io::write_text(&args.output, &sweep_csv(args.axis, &rows))?;

    for row in &rows {
        if let Ok(p) = &row.outcome {
            for w in &p.warnings {
                log::warn!("{} = {}: {w}", args.axis.name(), row.value);
            }
        }
    }
    let mut failure = None;
    for row in &rows {
        match &row.outcome {
            Err(e @ DesignError::InvalidGeometry(_)) | Err(e @ DesignError::UnknownFamily(_)) => {
                return Err(CliError::input(format!("{} = {}", args.axis.name(), row.value), e));
            }
            Err(e) => {
                failure.get_or_insert_with(|| CliError::extraction(format!("{} = {}", args.axis.name(), row.value), e));
            }
            Ok(_) => {}
        }
    }
    failure.map_or(Ok(()), Err)
}
