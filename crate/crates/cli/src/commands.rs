//! Subcommand implementations: simulate, chsh, fringes, render, and the
//! one-shot reproduce-paper run that emits every figure-data file.

use serde::Serialize;
use serde_json::json;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fs;
use std::path::{Path, PathBuf};

use spinorbit::analysis::{
    fit_fringes, format_scan_table, scan_s_with, scan_to_csv, AnalysisError, FringeFit, ScanPoint,
    ScanSettings, ANGLE_TOLERANCE,
};
use spinorbit::elements::qplate;
use spinorbit::experiments::{
    counts_from_csv, counts_to_csv, simulate_counts, CountRecord, ExperimentConfig,
    ExperimentError, ExperimentMode,
};
use spinorbit::fieldmap::{export_maps, render_mode, FieldmapError, MapFormat};
use spinorbit::hilbert::SinglePhotonState;

use crate::config::FileConfig;
use crate::manifest::ManifestBuilder;
use crate::{ChshArgs, CliError, FringesArgs, MapsFormat, RenderArgs, ReportFormat, ReproduceArgs, SimulateArgs};

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::CsvParse { .. } => CliError::Data(e.to_string()),
            ExperimentError::Source(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FieldmapError> for CliError {
    fn from(e: FieldmapError) -> Self {
        match e {
            FieldmapError::GridTooCoarse { .. } | FieldmapError::GridNotSquare { .. } => {
                CliError::Config(e.to_string())
            }
            FieldmapError::StateNotNormalized { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn read_counts(path: &Path) -> Result<Vec<CountRecord>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(counts_from_csv(&text)?)
}

/// Simulate counts for the configured experiment and write the counts CSV
/// plus a run manifest.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let file_config = FileConfig::load(&args.config)?;
    let (experiment, renormalized) = file_config.to_experiment(args.seed)?;
    if renormalized {
        eprintln!("warning: schmidt coefficients were renormalized (deviation > 1e-6)");
    }
    ensure_dir(&args.out)?;
    let records = simulate_counts(&experiment)?;
    let counts_path = args.out.join("counts.csv");
    write_file(&counts_path, &counts_to_csv(&records))?;

    let mut manifest = ManifestBuilder::new(
        "simulate",
        experiment.seed,
        serde_json::to_value(&file_config).expect("config serializes"),
    );
    manifest.record(&args.out, &counts_path);
    manifest.write(&args.out)?;
    println!(
        "wrote {} settings ({} theta x {} chi) to {}",
        records.len(),
        experiment.theta_list.len(),
        experiment.chi_list.len(),
        counts_path.display()
    );
    Ok(())
}

/// Distinct values of an angle in the data, merged within tolerance.
fn distinct_angles(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.collect();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    for v in sorted {
        if distinct.last().is_none_or(|last| v - last > ANGLE_TOLERANCE) {
            distinct.push(v);
        }
    }
    distinct
}

fn scan_available(
    records: &[CountRecord],
    chis: &[f64],
    settings: &ScanSettings,
) -> Result<Vec<ScanPoint>, CliError> {
    let mut points = Vec::new();
    let mut first_error: Option<AnalysisError> = None;
    for &chi in chis {
        match scan_s_with(records, &[chi], settings) {
            Ok(mut p) => points.append(&mut p),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    if points.is_empty() {
        return Err(first_error
            .map(CliError::from)
            .unwrap_or_else(|| CliError::Data("no chi values in data".to_string())));
    }
    if let Some(e) = first_error {
        eprintln!("warning: some chi values skipped: {e}");
    }
    Ok(points)
}

fn write_scan_report(
    points: &[ScanPoint],
    out: &Path,
    stem: &str,
    format: ReportFormat,
) -> Result<PathBuf, CliError> {
    let path = match format {
        ReportFormat::Csv => {
            let path = out.join(format!("{stem}.csv"));
            write_file(&path, &scan_to_csv(points))?;
            path
        }
        ReportFormat::Json => {
            let path = out.join(format!("{stem}.json"));
            let text = serde_json::to_string_pretty(points)
                .map_err(|e| CliError::Data(format!("report serialization: {e}")))?;
            write_file(&path, &text)?;
            path
        }
    };
    Ok(path)
}

/// Evaluate the CHSH S(χ) scan from a counts CSV.
pub fn cmd_chsh(args: &ChshArgs) -> Result<(), CliError> {
    let records = read_counts(&args.counts)?;
    let settings = ScanSettings {
        theta: args.theta_deg.to_radians(),
        theta_prime: args.theta_prime_deg.to_radians(),
        chi_offset: args.chi_offset_deg.to_radians(),
    };
    let chis = distinct_angles(records.iter().map(|r| r.chi));
    let points = scan_available(&records, &chis, &settings)?;
    print!("{}", format_scan_table(&points));

    ensure_dir(&args.out)?;
    let report = write_scan_report(&points, &args.out, "chsh_scan", args.format)?;
    let mut manifest = ManifestBuilder::new(
        "chsh",
        0,
        json!({
            "counts": args.counts.display().to_string(),
            "theta_deg": args.theta_deg,
            "theta_prime_deg": args.theta_prime_deg,
            "chi_offset_deg": args.chi_offset_deg,
        }),
    );
    manifest.record(&args.out, &report);
    manifest.write(&args.out)?;
    println!("wrote {}", report.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct FringeRow {
    theta: f64,
    #[serde(flatten)]
    fit: FringeFit,
}

fn fringe_rows(records: &[CountRecord]) -> Result<Vec<FringeRow>, CliError> {
    let thetas = distinct_angles(records.iter().map(|r| r.theta));
    let mut rows = Vec::new();
    for &theta in &thetas {
        let subset: Vec<CountRecord> = records
            .iter()
            .filter(|r| (r.theta - theta).abs() <= ANGLE_TOLERANCE)
            .cloned()
            .collect();
        let fit = fit_fringes(&subset)?;
        rows.push(FringeRow { theta, fit });
    }
    Ok(rows)
}

fn fringe_rows_to_csv(rows: &[FringeRow]) -> String {
    let mut out = String::from(
        "theta_rad,amplitude,offset,phase_rad,visibility,residual_rms,n_points,nonphysical\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.theta,
            row.fit.amplitude,
            row.fit.offset,
            row.fit.phase,
            row.fit.visibility,
            row.fit.residual_rms,
            row.fit.n_points,
            row.fit.nonphysical
        ));
    }
    out
}

fn fringe_table(rows: &[FringeRow]) -> String {
    let mut out = format!(
        "{:>12} {:>12} {:>12} {:>12} {:>12}\n",
        "theta_rad", "visibility", "amplitude", "offset", "rms"
    );
    for row in rows {
        let flag = if row.fit.nonphysical { " [nonphysical]" } else { "" };
        out.push_str(&format!(
            "{:>12.6} {:>12.6} {:>12.3} {:>12.3} {:>12.3}{flag}\n",
            row.theta, row.fit.visibility, row.fit.amplitude, row.fit.offset, row.fit.residual_rms
        ));
    }
    out
}

fn write_fringe_report(
    rows: &[FringeRow],
    out: &Path,
    stem: &str,
    format: ReportFormat,
) -> Result<PathBuf, CliError> {
    let path = match format {
        ReportFormat::Csv => {
            let path = out.join(format!("{stem}.csv"));
            write_file(&path, &fringe_rows_to_csv(rows))?;
            path
        }
        ReportFormat::Json => {
            let path = out.join(format!("{stem}.json"));
            let text = serde_json::to_string_pretty(rows)
                .map_err(|e| CliError::Data(format!("report serialization: {e}")))?;
            write_file(&path, &text)?;
            path
        }
    };
    Ok(path)
}

/// Fit fringes per polarizer angle from a counts CSV.
pub fn cmd_fringes(args: &FringesArgs) -> Result<(), CliError> {
    let records = read_counts(&args.counts)?;
    let rows = fringe_rows(&records)?;
    print!("{}", fringe_table(&rows));

    ensure_dir(&args.out)?;
    let report = write_fringe_report(&rows, &args.out, "fringe_fits", args.format)?;
    let mut manifest = ManifestBuilder::new(
        "fringes",
        0,
        json!({ "counts": args.counts.display().to_string() }),
    );
    manifest.record(&args.out, &report);
    manifest.write(&args.out)?;
    println!("wrote {}", report.display());
    Ok(())
}

fn render_from_section(
    section: &crate::config::RenderSection,
) -> Result<spinorbit::fieldmap::FieldGrid, CliError> {
    let mut state = section.input_state()?;
    for op in section.pipeline()? {
        state = op
            .apply(&state)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    let state = state
        .normalized()
        .map_err(|_| CliError::Numerical("render pipeline annihilated the state".to_string()))?;
    Ok(render_mode(&state, &section.grid(), section.waist)?)
}

/// Render field and Stokes maps for the configured mode.
pub fn cmd_render(args: &RenderArgs) -> Result<(), CliError> {
    let file_config = FileConfig::load(&args.config)?;
    let section = file_config.render.as_ref().ok_or_else(|| {
        CliError::Config("config has no [render] section".to_string())
    })?;
    let field = render_from_section(section)?;
    ensure_dir(&args.out)?;
    let mut written = Vec::new();
    if matches!(args.maps_format, MapsFormat::Csv | MapsFormat::Both) {
        written.extend(export_maps(&field, &args.out, MapFormat::CsvGrid)?);
    }
    if matches!(args.maps_format, MapsFormat::Png | MapsFormat::Both) {
        written.extend(export_maps(&field, &args.out, MapFormat::Png)?);
    }
    let mut manifest = ManifestBuilder::new(
        "render",
        file_config.seed,
        serde_json::to_value(&file_config).expect("config serializes"),
    );
    for path in &written {
        manifest.record(&args.out, path);
    }
    manifest.write(&args.out)?;
    println!("wrote {} map files to {}", written.len(), args.out.display());
    Ok(())
}

/// Standard grid of the bundled demonstration runs: the four fringe
/// polarizer angles and 64 hologram orientations per quarter turn.
pub fn standard_grid() -> (Vec<f64>, Vec<f64>) {
    let thetas = vec![0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];
    let chis = (0..64).map(|j| j as f64 * PI / 128.0).collect();
    (thetas, chis)
}

#[derive(Debug, Serialize)]
struct SignificanceRow {
    experiment: String,
    chi: f64,
    s: f64,
    sigma_s: f64,
    violation_sigmas: Option<f64>,
    visibility_at_theta0: f64,
}

fn significance_csv(rows: &[SignificanceRow]) -> String {
    let mut out =
        String::from("experiment,chi_rad,S,sigma_S,violation_sigmas,visibility_theta0\n");
    for r in rows {
        let v = r.violation_sigmas.map_or(String::new(), |v| format!("{v}"));
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.experiment, r.chi, r.s, r.sigma_s, v, r.visibility_at_theta0
        ));
    }
    out
}

/// Run all three experiments with the documented default settings and emit
/// fringe data, S(χ) scans, a significance report, and the field maps.
pub fn cmd_reproduce(args: &ReproduceArgs) -> Result<(), CliError> {
    let seed = args.seed.unwrap_or(42);
    let out = &args.out;
    ensure_dir(out)?;
    let (thetas, chis) = standard_grid();
    let probe_chi = PI / 16.0;

    let mut manifest = ManifestBuilder::new(
        "reproduce-paper",
        seed,
        json!({
            "pair_rate": 2000.0,
            "exposure_s": 1.0,
            "visibility": 0.9,
            "accidental_rate": 0.0,
            "theta_count": thetas.len(),
            "chi_count": chis.len(),
            "seed_layout": "single = seed, two-photon = seed+1, classical = seed+2",
        }),
    );

    let mut significance: Vec<SignificanceRow> = Vec::new();
    let runs = [
        ("single_photon", ExperimentMode::SinglePhoton, seed),
        ("two_photon", ExperimentMode::TwoPhoton, seed.wrapping_add(1)),
        ("classical", ExperimentMode::Classical, seed.wrapping_add(2)),
    ];
    for (name, mode, run_seed) in runs {
        let mut config = ExperimentConfig::new(mode, thetas.clone(), chis.clone());
        config.visibility = 0.9;
        config.seed = run_seed;
        let records = simulate_counts(&config)?;

        let counts_name = match mode {
            ExperimentMode::Classical => format!("{name}_power.csv"),
            _ => format!("{name}_counts.csv"),
        };
        let counts_path = out.join(counts_name);
        write_file(&counts_path, &counts_to_csv(&records))?;
        manifest.record(out, &counts_path);

        let rows = fringe_rows(&records)?;
        let fringe_path = write_fringe_report(&rows, out, &format!("{name}_fringes"), args.format)?;
        manifest.record(out, &fringe_path);

        let points = scan_available(&records, &chis, &ScanSettings::default())?;
        let scan_path = write_scan_report(&points, out, &format!("{name}_chsh"), args.format)?;
        manifest.record(out, &scan_path);

        let at_probe = points
            .iter()
            .find(|p| (p.chi - probe_chi).abs() < ANGLE_TOLERANCE)
            .expect("probe chi is on the standard grid");
        let visibility = rows
            .iter()
            .find(|r| r.theta.abs() < ANGLE_TOLERANCE)
            .map(|r| r.fit.visibility)
            .unwrap_or(f64::NAN);
        significance.push(SignificanceRow {
            experiment: name.to_string(),
            chi: probe_chi,
            s: at_probe.result.s,
            sigma_s: at_probe.result.sigma_s,
            violation_sigmas: at_probe.result.violation_sigmas,
            visibility_at_theta0: visibility,
        });
        println!(
            "{name}: S(pi/16) = {:.4} +- {:.4}{}",
            at_probe.result.s,
            at_probe.result.sigma_s,
            at_probe
                .result
                .violation_sigmas
                .map_or(String::new(), |v| format!(" ({v:.1} sigma violation)"))
        );
    }

    // noiseless ideal prediction curve: expected counts at V = 1
    let mut ideal_config = ExperimentConfig::new(ExperimentMode::Classical, thetas, chis.clone());
    ideal_config.visibility = 1.0;
    ideal_config.seed = seed;
    let ideal_records = simulate_counts(&ideal_config)?;
    let ideal_points = scan_available(&ideal_records, &chis, &ScanSettings::default())?;
    let ideal_path = write_scan_report(&ideal_points, out, "ideal_chsh", args.format)?;
    manifest.record(out, &ideal_path);

    let significance_path = match args.format {
        ReportFormat::Csv => {
            let path = out.join("significance_report.csv");
            write_file(&path, &significance_csv(&significance))?;
            path
        }
        ReportFormat::Json => {
            let path = out.join("significance_report.json");
            let text = serde_json::to_string_pretty(&significance)
                .map_err(|e| CliError::Data(format!("report serialization: {e}")))?;
            write_file(&path, &text)?;
            path
        }
    };
    manifest.record(out, &significance_path);

    // the vector-mode texture behind the q-plate, as maps
    let mode_state = qplate(1)
        .apply(&SinglePhotonState::horizontal(0, spinorbit::hilbert::DEFAULT_M_MAX))
        .expect("within truncation");
    let field = render_mode(
        &mode_state.normalized().expect("unit norm"),
        &spinorbit::fieldmap::DEFAULT_GRID,
        1.0,
    )?;
    let map_dir = out.join("fieldmap");
    for format in [MapFormat::CsvGrid, MapFormat::Png] {
        for path in export_maps(&field, &map_dir, format)? {
            manifest.record(out, &path);
        }
    }

    manifest.write(out)?;
    println!("all outputs in {}", out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_contains_probe_settings() {
        let (thetas, chis) = standard_grid();
        assert_eq!(thetas.len(), 4);
        assert_eq!(chis.len(), 64);
        assert!(chis.iter().any(|&c| (c - PI / 16.0).abs() < 1e-15));
        for offset in [PI / 8.0, FRAC_PI_4, 3.0 * PI / 8.0] {
            // every scan lookup lands back on the grid modulo the period
            let shifted = (PI / 16.0 + offset) % FRAC_PI_2;
            assert!(
                chis.iter().any(|&c| (c - shifted).abs() < 1e-9),
                "offset {offset} leaves the grid"
            );
        }
    }

    #[test]
    fn distinct_angles_merges_close_values() {
        let values = vec![0.0, 1e-12, 0.5, 0.5 + 1e-13, 1.0];
        assert_eq!(distinct_angles(values.into_iter()).len(), 3);
    }
}
