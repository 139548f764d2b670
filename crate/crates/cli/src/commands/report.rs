use std::collections::HashMap;

use sawkit::extract::{sig6, ExtractionReport, SCHEMA_VERSION};

use crate::error::CliError;
use crate::io;
use crate::ReportArgs;

const MARKDOWN_HEADER: &str = "| Device | λ [nm] | f_s [GHz] | k_eff² [%] | Q_max | FoM |\n|---|---|---|---|---|---|\n";

fn load(args: &ReportArgs) -> Result<Vec<ExtractionReport>, CliError> {
    let mut reports = Vec::with_capacity(args.inputs.len());
    let mut seen: HashMap<String, usize> = HashMap::new();
    for path in &args.inputs {
        let mut r: ExtractionReport = io::read_json(path)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "{}: unsupported schema_version {}",
                path.display(),
                r.schema_version
            )));
        }
        let name = r.device.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
        let count = seen.entry(name.clone()).or_insert(0);
        *count += 1;
        r.device = Some(if *count == 1 {
            name
        } else {
            let renamed = format!("{name}-{count}");
            log::warn!(
                "duplicate device name '{name}' in {}; renamed to '{renamed}'",
                path.display()
            );
            renamed
        });
        reports.push(r);
    }
    if args.sort_lambda {
        // Longest wavelength first; reports without one go last. Stable.
        reports.sort_by(|a, b| {
            let key = |r: &ExtractionReport| r.lambda_m.unwrap_or(f64::NEG_INFINITY);
            key(b).total_cmp(&key(a))
        });
    }
    Ok(reports)
}

fn markdown_row(r: &ExtractionReport) -> String {
    format!(
        "| {} | {} | {} | {} | {} | {} |\n",
        r.device.as_deref().unwrap_or(""),
        r.lambda_m.map(|l| sig6(l * 1e9)).unwrap_or_default(),
        sig6(r.f_s_hz / 1e9),
        sig6(r.keff2 * 100.0),
        sig6(r.q_max),
        sig6(r.fom)
    )
}

pub fn render(reports: &[ExtractionReport], markdown: bool) -> String {
    let mut out = if markdown {
        MARKDOWN_HEADER.to_string()
    } else {
        format!("{}\n", ExtractionReport::CSV_HEADER)
    };
    for r in reports {
        if markdown {
            out.push_str(&markdown_row(r));
        } else {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
    }
    out
}

pub fn run(args: &ReportArgs) -> Result<(), CliError> {
    let reports = load(args)?;
    io::write_text(&args.output, &render(&reports, args.markdown))
}
