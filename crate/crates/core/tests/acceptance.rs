//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

use std::f64::consts::PI;
use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sawkit::design::{scale_to_frequency, DispersionTable, Family};
use sawkit::extract::{self, bode_q, find_fs_fp, full_extraction, q_max, ExtractOptions};
use sawkit::fit::{fit_mbvd, FitConfig};
use sawkit::mbvd::{linear_grid, MbvdParams};
use sawkit::network::{renormalize, s_to_y, Band};
use sawkit::touchstone::{parse_touchstone, write_touchstone, FrequencyUnit, TouchstoneFormat, ValueFormat};
use sawkit::{Complex64, OnePortTrace};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn device_a() -> MbvdParams {
    MbvdParams::from_resonance(9.05e9, 0.15, 213.0, 100e-15, 0.5, 0.5).unwrap()
}

fn device_a_trace(points: usize) -> OnePortTrace {
    device_a()
        .synthesize_s11(&linear_grid(8.5e9, 10.5e9, points), 50.0)
        .unwrap()
}

fn fom_closure() -> Outcome {
    let rows = [
        ("A", 0.15, 213.0, 32.0),
        ("B", 0.11, 172.0, 19.0),
        ("C", 0.13, 126.0, 16.0),
        ("D", 0.09, 111.0, 10.0),
        ("E", 0.07, 58.0, 4.0),
        ("F", 0.16, 99.0, 16.0),
    ];
    let mut worst = 0.0f64;
    for (name, k, q, published) in rows {
        let err = (extract::fom(k, q) - published).abs();
        if err > 0.5 {
            return Err(format!("device {name}: fom {} vs {published}", extract::fom(k, q)));
        }
        worst = worst.max(err);
    }
    Ok(format!("max |error| {worst:.3}"))
}

fn dispersion_monotonic() -> Outcome {
    let table = DispersionTable::builtin();
    let v: Vec<f64> = table
        .family_anchors(&Family::measured(), 0.5)
        .iter()
        .map(|a| a.v_p)
        .collect();
    let expected = vec![3736.0, 3690.0, 3528.0, 3484.0, 3209.0];
    let decreasing = v.windows(2).all(|w| w[1] < w[0]);
    check(v == expected && decreasing, format!("v_p = {v:?}"))
}

fn scaling_inverse() -> Outcome {
    let table = DispersionTable::builtin();
    let fam = Family::measured();
    let e = scale_to_frequency(13.37e9, 0.7e-6, &table, &fam).map_err(|e| e.to_string())?;
    let f = scale_to_frequency(9.34e9, 0.7e-6, &table, &fam).map_err(|e| e.to_string())?;
    let (re, rf) = (rel(e, 240e-9), rel(f, 400e-9));
    check(
        re <= 5e-3 && rf <= 5e-3,
        format!(
            "lambda {:.2} nm ({:.3} %), {:.2} nm ({:.3} %)",
            e * 1e9,
            re * 100.0,
            f * 1e9,
            rf * 100.0
        ),
    )
}

fn mbvd_round_trip() -> Outcome {
    let truth = device_a();
    let trace = device_a_trace(4001);
    let report = full_extraction(&trace, &ExtractOptions::default()).map_err(|e| e.to_string())?;
    let fs_err = rel(report.f_s_hz, truth.series_resonance());
    let k_err = (report.keff2 - truth.keff2()).abs();
    let q_err = rel(report.q_max, truth.motional_q());
    if fs_err > 5e-4 || k_err > 3e-3 || q_err > 0.1 {
        return Err(format!(
            "f_s err {fs_err:.2e}, keff2 {:.4} (err {k_err:.2e}), q_max {:.1} (err {q_err:.3})",
            report.keff2, report.q_max
        ));
    }

    let y = s_to_y(&trace).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let cases = 12;
    for case in 0..cases {
        let mut jitter = || 1.0 + rng.random_range(-0.2..=0.2);
        let init = MbvdParams {
            r_s: truth.r_s * jitter(),
            r_0: truth.r_0 * jitter(),
            r_m: truth.r_m * jitter(),
            l_m: truth.l_m * jitter(),
            c_m: truth.c_m * jitter(),
            c_0: truth.c_0 * jitter(),
        };
        let fit = fit_mbvd(&y, &init, &FitConfig::default()).map_err(|e| format!("case {case}: {e}"))?;
        let p = fit.params;
        let errs = [
            rel(p.r_s, truth.r_s),
            rel(p.r_0, truth.r_0),
            rel(p.r_m, truth.r_m),
            rel(p.l_m, truth.l_m),
            rel(p.c_m, truth.c_m),
            rel(p.c_0, truth.c_0),
        ];
        let e = errs.iter().cloned().fold(0.0, f64::max);
        if e > 0.01 {
            return Err(format!("case {case}: worst parameter error {e:.3e}"));
        }
        worst = worst.max(e);
    }
    Ok(format!(
        "f_s err {fs_err:.1e}, keff2 {:.3} %, q_max {:.1}; {cases} perturbed fits, worst param err {worst:.1e}",
        report.keff2 * 100.0,
        report.q_max
    ))
}

fn lossless_keff2_identity() -> Outcome {
    let mut worst = 0.0f64;
    for ratio in [0.01, 0.05, 0.1216, 0.3] {
        let c_0 = 100e-15;
        let c_m = ratio * c_0;
        let l_m = 1.0 / ((2.0 * PI * 9.05e9f64).powi(2) * c_m);
        let p = MbvdParams::new(0.0, 0.0, 0.0, l_m, c_m, c_0).unwrap();
        let (fs, fp) = (p.series_resonance(), p.parallel_resonance());
        // Even point count so no sample falls exactly on f_s.
        let y = p.admittance_trace(&linear_grid(0.9 * fs, 1.1 * fp, 20002)).unwrap();
        let (f_s, f_p) = find_fs_fp(&y).map_err(|e| e.to_string())?;
        let k = extract::keff2(f_s, f_p).unwrap();
        let expected = PI * PI / 8.0 * ratio;
        let e = rel(k, expected);
        if e > 5e-3 {
            return Err(format!("C_m/C_0 = {ratio}: keff2 {k} vs {expected}"));
        }
        worst = worst.max(e);
    }
    Ok(format!("worst relative error {worst:.2e}"))
}

fn bode_guards() -> Outcome {
    let lossless = MbvdParams {
        r_s: 0.0,
        r_0: 0.0,
        r_m: 0.0,
        ..device_a()
    };
    let t = lossless
        .synthesize_s11(&linear_grid(8.5e9, 10.5e9, 2002), 50.0)
        .unwrap();
    let q = bode_q(&t).map_err(|e| e.to_string())?;
    if !q.points.is_empty() || q.flagged_hz.len() != t.len() {
        return Err(format!("lossless trace kept {} Q points", q.points.len()));
    }

    let trace = device_a_trace(4001);
    let base = bode_q(&trace).unwrap();
    let scaled_f: Vec<f64> = trace.frequencies().iter().map(|f| f * 3.7e-3).collect();
    let scaled = bode_q(&trace.clone().with_frequencies(scaled_f).unwrap()).unwrap();
    let mut worst_scale = 0.0f64;
    for (a, b) in base.points.iter().zip(&scaled.points) {
        worst_scale = worst_scale.max(rel(b.q, a.q));
    }
    if base.points.len() != scaled.points.len() || worst_scale > 1e-10 {
        return Err(format!("rescaling changed Q by {worst_scale:.2e}"));
    }

    let band = Band::new(8.5e9, 10.5e9).unwrap();
    let coarse = q_max(&bode_q(&device_a_trace(4001)).unwrap().points, band).unwrap();
    let fine = q_max(&bode_q(&device_a_trace(8001)).unwrap().points, band).unwrap();
    let density = rel(fine, coarse);
    check(
        density < 0.01,
        format!(
            "rescale err {worst_scale:.1e}, q_max {coarse:.2} -> {fine:.2} ({:.3} %)",
            density * 100.0
        ),
    )
}

fn z0_invariance() -> Outcome {
    let trace = device_a_trace(4001);
    let base = full_extraction(&trace, &ExtractOptions::default()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for z in [25.0, 50.0, 75.0, 200.0] {
        let r =
            full_extraction(&renormalize(&trace, z).unwrap(), &ExtractOptions::default()).map_err(|e| e.to_string())?;
        for (a, b) in [
            (r.f_s_hz, base.f_s_hz),
            (r.f_p_hz, base.f_p_hz),
            (r.keff2, base.keff2),
            (r.y_ratio, base.y_ratio),
        ] {
            worst = worst.max(rel(a, b));
        }
    }
    check(worst <= 1e-6, format!("worst relative change {worst:.2e}"))
}

fn random_trace(rng: &mut ChaCha8Rng) -> OnePortTrace {
    let n = rng.random_range(2..40);
    let mut f = rng.random_range(1e3..1e10);
    let mut freqs = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for _ in 0..n {
        freqs.push(f);
        f *= 1.0 + rng.random_range(1e-6..0.5);
        let mag = if rng.random_bool(0.05) {
            0.0
        } else {
            rng.random_range(1e-6..1.5)
        };
        s.push(Complex64::from_polar(mag, rng.random_range(-PI..PI)));
    }
    let z0 = [50.0, 75.0, 1.0, 123.456][rng.random_range(0..4)];
    OnePortTrace::new(freqs, s, z0).unwrap()
}

fn parser_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cases_per_combo = 100;
    let mut total = 0;
    let mut worst = 0.0f64;
    for value_format in ValueFormat::ALL {
        for unit in FrequencyUnit::ALL {
            for _ in 0..cases_per_combo {
                let trace = random_trace(&mut rng);
                let fmt = TouchstoneFormat::new(unit, value_format, trace.z0());
                let text = write_touchstone(&trace, &fmt);
                let (back, back_fmt) = parse_touchstone(&text).map_err(|e| format!("{e}\n{text}"))?;
                if back.len() != trace.len() || back_fmt.value_format != value_format || back_fmt.frequency_unit != unit
                {
                    return Err(format!("{value_format} {unit}: shape changed"));
                }
                worst = worst.max(rel(back.z0(), trace.z0()));
                for i in 0..trace.len() {
                    worst = worst.max(rel(back.frequencies()[i], trace.frequencies()[i]));
                    let a = trace.s11()[i];
                    let d = (back.s11()[i] - a).norm();
                    worst = worst.max(if a.norm() == 0.0 { d } else { d / a.norm() });
                }
                total += 1;
            }
        }
    }
    check(
        worst <= 1e-9,
        format!("{total} traces, worst relative error {worst:.2e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 FoM closure", fom_closure),
        ("2 dispersion monotonicity", dispersion_monotonic),
        ("3 scaling inverse", scaling_inverse),
        ("4 mBVD round trip", mbvd_round_trip),
        ("5 lossless keff2 identity", lossless_keff2_identity),
        ("6 Bode-Q guards and invariances", bode_guards),
        ("7 z0 invariance", z0_invariance),
        ("8 Touchstone round trip", parser_round_trip),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{ms} ms]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail} [{ms} ms]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
