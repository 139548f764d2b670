use sawkit::network::renormalize;
use sawkit::touchstone::write_touchstone;

use crate::error::CliError;
use crate::io;
use crate::ConvertArgs;

pub fn run(args: &ConvertArgs) -> Result<(), CliError> {
    let (mut trace, mut fmt) = io::read_touchstone(&args.input)?;
    if let Some(z0) = args.z0 {
        trace = renormalize(&trace, z0).map_err(|e| CliError::input("--z0", e))?;
        fmt.reference_resistance = z0;
    }
    if let Some(f) = args.format {
        fmt.value_format = f;
    }
    if let Some(u) = args.unit {
        fmt.frequency_unit = u;
    }
    io::write_text(&args.output, &write_touchstone(&trace, &fmt))
}
