//! Statistics on coincidence-count data: the four-setting correlation
//! estimator, CHSH values with first-order Poisson error propagation, and
//! linear least-squares fringe fitting with visibility extraction.
//!
//! The correlation estimator uses the single-polarizer four-setting form
//!
//! ```text
//! E(θ,χ) = [C(θ,χ) + C(θ+π/2,χ+π/4) − C(θ+π/2,χ) − C(θ,χ+π/4)] / (sum)
//! ```
//!
//! which matches an apparatus that detects only transmitted photons. For
//! ideal counts ∝ ½cos²(θ−2χ) this gives E = cos(2(θ−2χ)) and the χ-scan
//! of S traces 2√2·|sin(4χ + π/4)|.
//!
//! Setting lookup is modulo the exact apparatus periods (π in θ, π/2 in χ):
//! a polarizer rotated by π and a four-sector hologram rotated by π/2 are
//! physically the same setting.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use thiserror::Error;

use crate::experiments::CountRecord;

/// Angular tolerance for matching measurement settings, radians.
pub const ANGLE_TOLERANCE: f64 = 1e-9;
/// Period of the polarization analyzer setting.
pub const THETA_PERIOD: f64 = PI;
/// Period of the hologram orientation setting.
pub const CHI_PERIOD: f64 = FRAC_PI_2;
/// Classical CHSH bound.
pub const CHSH_BOUND: f64 = 2.0;

/// Errors from count-data analysis.
#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    /// The four records do not form the required (θ, χ) pattern.
    #[error("setting pattern mismatch: {detail}")]
    SettingMismatch { detail: String },
    /// All four counts of a correlation quadruple are zero.
    #[error("total counts are zero; correlation undefined")]
    ZeroCounts,
    /// Required settings absent from the data.
    #[error("missing settings (theta_rad, chi_rad): {}", format_settings(.settings))]
    MissingSetting { settings: Vec<(f64, f64)> },
    #[error("insufficient data: {detail}")]
    InsufficientData { detail: String },
}

fn format_settings(settings: &[(f64, f64)]) -> String {
    settings
        .iter()
        .map(|(t, c)| format!("({t:.6}, {c:.6})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// True when two angles denote the same setting modulo `period`.
fn same_angle(a: f64, b: f64, period: f64) -> bool {
    let d = (a - b).rem_euclid(period);
    d <= ANGLE_TOLERANCE || period - d <= ANGLE_TOLERANCE
}

/// Find the record measured at (θ, χ), modulo the apparatus periods.
pub fn find_setting(records: &[CountRecord], theta: f64, chi: f64) -> Option<&CountRecord> {
    records
        .iter()
        .find(|r| same_angle(r.theta, theta, THETA_PERIOD) && same_angle(r.chi, chi, CHI_PERIOD))
}

/// Correlation E(θ, χ) with its propagated Poisson uncertainty and the four
/// constituent counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub e: f64,
    pub sigma_e: f64,
    /// Counts in estimator order: C(θ,χ), C(θ+π/2,χ+π/4), C(θ+π/2,χ), C(θ,χ+π/4).
    pub counts: [f64; 4],
    /// Set when any constituent count is zero: such cells contribute zero
    /// variance to the first-order propagation, so σ_E is underestimated.
    pub degenerate: bool,
}

/// Compute E(θ, χ) from the four records of the estimator pattern:
/// `c1` at (θ, χ), `c2` at (θ+π/2, χ+π/4), `c3` at (θ+π/2, χ), `c4` at
/// (θ, χ+π/4). The pattern is validated to 1e−9 rad modulo the apparatus
/// periods.
pub fn correlation_e(
    c1: &CountRecord,
    c2: &CountRecord,
    c3: &CountRecord,
    c4: &CountRecord,
) -> Result<CorrelationEstimate, AnalysisError> {
    let theta = c1.theta;
    let chi = c1.chi;
    let expected = [
        (c2, theta + FRAC_PI_2, chi + FRAC_PI_4, "c2"),
        (c3, theta + FRAC_PI_2, chi, "c3"),
        (c4, theta, chi + FRAC_PI_4, "c4"),
    ];
    for (record, want_theta, want_chi, name) in expected {
        if !same_angle(record.theta, want_theta, THETA_PERIOD)
            || !same_angle(record.chi, want_chi, CHI_PERIOD)
        {
            return Err(AnalysisError::SettingMismatch {
                detail: format!(
                    "{name} measured at ({}, {}), expected ({want_theta}, {want_chi}) \
                     relative to c1 at ({theta}, {chi})",
                    record.theta, record.chi
                ),
            });
        }
    }
    let counts = [c1.counts, c2.counts, c3.counts, c4.counts];
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(AnalysisError::ZeroCounts);
    }
    let plus = counts[0] + counts[1];
    let minus = counts[2] + counts[3];
    let e = (plus - minus) / total;
    // First-order propagation on independent Poisson counts:
    // σ_E² = Σᵢ (∂E/∂Cᵢ)²·Cᵢ with ∂E/∂Cᵢ = ±2·N∓/T².
    let t2 = total * total;
    let derivatives = [
        2.0 * minus / t2,
        2.0 * minus / t2,
        -2.0 * plus / t2,
        -2.0 * plus / t2,
    ];
    let variance: f64 = derivatives
        .iter()
        .zip(counts.iter())
        .map(|(d, c)| d * d * c)
        .sum();
    Ok(CorrelationEstimate {
        e,
        sigma_e: variance.sqrt(),
        counts,
        degenerate: counts.contains(&0.0),
    })
}

/// The four analyzer settings entering one CHSH value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshSettings {
    pub theta: f64,
    pub theta_prime: f64,
    pub chi: f64,
    pub chi_prime: f64,
}

impl ChshSettings {
    /// The standard scan settings: θ = 0, θ′ = π/4, χ′ = χ + π/8.
    pub fn standard(chi: f64) -> Self {
        ScanSettings::default().at(chi)
    }
}

/// Base angles of an S(χ) scan; χ itself is the scan variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSettings {
    pub theta: f64,
    pub theta_prime: f64,
    pub chi_offset: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            theta: 0.0,
            theta_prime: FRAC_PI_4,
            chi_offset: PI / 8.0,
        }
    }
}

impl ScanSettings {
    pub fn at(&self, chi: f64) -> ChshSettings {
        ChshSettings {
            theta: self.theta,
            theta_prime: self.theta_prime,
            chi,
            chi_prime: chi + self.chi_offset,
        }
    }
}

/// A CHSH evaluation: S, its propagated uncertainty, the settings used, and
/// the violation significance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChshResult {
    pub s: f64,
    pub sigma_s: f64,
    pub settings: ChshSettings,
    /// (S − 2)/σ_S when S exceeds the classical bound, `None` otherwise.
    pub violation_sigmas: Option<f64>,
    /// Set when any constituent correlation had a zero-count cell.
    pub degenerate: bool,
}

impl ChshResult {
    pub fn violates(&self) -> bool {
        self.violation_sigmas.is_some()
    }
}

/// Evaluate S = |E(θ,χ) − E(θ,χ′) + E(θ′,χ) + E(θ′,χ′)| from count data.
///
/// All 16 required records (4 per correlation) must be present; absent
/// settings are reported collectively in [`AnalysisError::MissingSetting`].
/// σ_S adds the four correlation variances in quadrature (independent
/// Poisson settings).
pub fn chsh_s(records: &[CountRecord], settings: &ChshSettings) -> Result<ChshResult, AnalysisError> {
    let mut missing: Vec<(f64, f64)> = Vec::new();
    let mut estimate = |theta: f64, chi: f64| -> Option<CorrelationEstimate> {
        let quad = [
            (theta, chi),
            (theta + FRAC_PI_2, chi + FRAC_PI_4),
            (theta + FRAC_PI_2, chi),
            (theta, chi + FRAC_PI_4),
        ];
        let mut found: Vec<&CountRecord> = Vec::with_capacity(4);
        for (t, c) in quad {
            match find_setting(records, t, c) {
                Some(r) => found.push(r),
                None => missing.push((t, c)),
            }
        }
        if found.len() == 4 {
            Some(correlation_e(found[0], found[1], found[2], found[3]).expect("validated pattern"))
        } else {
            None
        }
    };

    let e1 = estimate(settings.theta, settings.chi);
    let e2 = estimate(settings.theta, settings.chi_prime);
    let e3 = estimate(settings.theta_prime, settings.chi);
    let e4 = estimate(settings.theta_prime, settings.chi_prime);
    if !missing.is_empty() {
        return Err(AnalysisError::MissingSetting { settings: missing });
    }
    let (e1, e2, e3, e4) = (e1.unwrap(), e2.unwrap(), e3.unwrap(), e4.unwrap());

    let s = (e1.e - e2.e + e3.e + e4.e).abs();
    let sigma_s = (e1.sigma_e.powi(2) + e2.sigma_e.powi(2) + e3.sigma_e.powi(2)
        + e4.sigma_e.powi(2))
    .sqrt();
    let violation_sigmas = if s > CHSH_BOUND {
        Some((s - CHSH_BOUND) / sigma_s)
    } else {
        None
    };
    Ok(ChshResult {
        s,
        sigma_s,
        settings: *settings,
        violation_sigmas,
        degenerate: [&e1, &e2, &e3, &e4].iter().any(|e| e.degenerate),
    })
}

/// One point of an S(χ) scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub chi: f64,
    #[serde(flatten)]
    pub result: ChshResult,
}

/// Scan S over a χ grid with the standard settings θ = 0, θ′ = π/4,
/// χ′ = χ + π/8. For ideal data the curve is 2√2·V·|sin(4χ + π/4)|.
pub fn scan_s(records: &[CountRecord], chi_values: &[f64]) -> Result<Vec<ScanPoint>, AnalysisError> {
    scan_s_with(records, chi_values, &ScanSettings::default())
}

/// Scan S over a χ grid with explicit base angles.
pub fn scan_s_with(
    records: &[CountRecord],
    chi_values: &[f64],
    settings: &ScanSettings,
) -> Result<Vec<ScanPoint>, AnalysisError> {
    chi_values
        .iter()
        .map(|&chi| chsh_s(records, &settings.at(chi)).map(|result| ScanPoint { chi, result }))
        .collect()
}

/// Result of fitting C(χ) = B + A·cos(4χ − φ₀) to counts at fixed θ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FringeFit {
    pub amplitude: f64,
    pub offset: f64,
    /// Fitted phase φ₀, radians.
    pub phase: f64,
    /// (max − min)/(max + min) = A/B of the fitted fringe.
    pub visibility: f64,
    pub residual_rms: f64,
    pub n_points: usize,
    /// Set when A > B (visibility above 1) or B ≤ 0: not a physical fringe.
    pub nonphysical: bool,
}

/// Fringe frequency in χ: cos²(θ − 2χ) has period π/2, i.e. 4 cycles per π.
pub const FRINGE_FREQUENCY: f64 = 4.0;

fn collect_fixed_theta(records: &[CountRecord]) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let theta = records
        .first()
        .ok_or(AnalysisError::InsufficientData {
            detail: "no records".to_string(),
        })?
        .theta;
    let mut points = Vec::with_capacity(records.len());
    for r in records {
        if !same_angle(r.theta, theta, THETA_PERIOD) {
            return Err(AnalysisError::SettingMismatch {
                detail: format!(
                    "fringe fit needs a fixed polarizer angle; found both {theta} and {}",
                    r.theta
                ),
            });
        }
        points.push((r.chi, r.counts));
    }
    let mut chis: Vec<f64> = points.iter().map(|(chi, _)| *chi).collect();
    chis.sort_by(f64::total_cmp);
    let mut distinct = 1;
    for pair in chis.windows(2) {
        if pair[1] - pair[0] > ANGLE_TOLERANCE {
            distinct += 1;
        }
    }
    if distinct < 4 {
        return Err(AnalysisError::InsufficientData {
            detail: format!("need at least 4 distinct chi values, got {distinct}"),
        });
    }
    let span = chis.last().unwrap() - chis.first().unwrap();
    if span < FRAC_PI_4 - ANGLE_TOLERANCE {
        return Err(AnalysisError::InsufficientData {
            detail: format!("chi span {span:.6} rad is under half a fringe period (π/4)"),
        });
    }
    Ok(points)
}

/// (offset, cos coefficient, sin coefficient, residual rms)
type RawFit = (f64, f64, f64, f64);

fn linear_fit(points: &[(f64, f64)], frequency: f64) -> Option<RawFit> {
    // least squares on the basis {1, cos(fχ), sin(fχ)} via normal equations
    let mut gram = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for &(chi, counts) in points {
        let row = Vector3::new(1.0, (frequency * chi).cos(), (frequency * chi).sin());
        gram += row * row.transpose();
        rhs += row * counts;
    }
    let solution = gram.lu().solve(&rhs)?;
    let (offset, a, b) = (solution[0], solution[1], solution[2]);
    let mut sum_sq = 0.0;
    for &(chi, counts) in points {
        let model = offset + a * (frequency * chi).cos() + b * (frequency * chi).sin();
        sum_sq += (counts - model).powi(2);
    }
    let rms = (sum_sq / points.len() as f64).sqrt();
    Some((offset, a, b, rms))
}

/// Fit fringes of known frequency (4 cycles per π in χ) to counts measured
/// at a fixed θ. The fit is linear in {1, cos 4χ, sin 4χ}; amplitude and
/// phase follow as A = √(a² + b²), φ₀ = atan2(b, a).
///
/// Requires at least 4 distinct χ values spanning at least half a fringe
/// period (π/4).
pub fn fit_fringes(records: &[CountRecord]) -> Result<FringeFit, AnalysisError> {
    let points = collect_fixed_theta(records)?;
    let (offset, a, b, residual_rms) =
        linear_fit(&points, FRINGE_FREQUENCY).ok_or(AnalysisError::InsufficientData {
            detail: "singular normal equations".to_string(),
        })?;
    let amplitude = a.hypot(b);
    let phase = b.atan2(a);
    let visibility = if offset > 0.0 {
        amplitude / offset
    } else {
        f64::INFINITY
    };
    Ok(FringeFit {
        amplitude,
        offset,
        phase,
        visibility,
        residual_rms,
        n_points: points.len(),
        nonphysical: !(amplitude <= offset && offset > 0.0),
    })
}

/// Diagnostic refit with the fringe frequency left free: scans candidate
/// frequencies, keeping the best-residual linear fit. Used as a sanity
/// check that the data really oscillates at 4 cycles per π.
pub fn fit_fringes_free_frequency(
    records: &[CountRecord],
) -> Result<(f64, FringeFit), AnalysisError> {
    let points = collect_fixed_theta(records)?;
    fn consider(points: &[(f64, f64)], freq: f64, best: &mut Option<(f64, RawFit)>) {
        if let Some(fit) = linear_fit(points, freq) {
            if best.is_none() || fit.3 < best.as_ref().unwrap().1 .3 {
                *best = Some((freq, fit));
            }
        }
    }
    let mut best: Option<(f64, RawFit)> = None;
    let coarse_steps = 80;
    for i in 0..=coarse_steps {
        consider(&points, 2.0 + 4.0 * i as f64 / coarse_steps as f64, &mut best);
    }
    let center = best.as_ref().map(|(f, _)| *f).unwrap_or(FRINGE_FREQUENCY);
    let fine_steps = 50;
    for i in 0..=fine_steps {
        consider(
            &points,
            center - 0.05 + 0.1 * i as f64 / fine_steps as f64,
            &mut best,
        );
    }
    let (frequency, (offset, a, b, residual_rms)) =
        best.ok_or(AnalysisError::InsufficientData {
            detail: "singular normal equations".to_string(),
        })?;
    let amplitude = a.hypot(b);
    Ok((
        frequency,
        FringeFit {
            amplitude,
            offset,
            phase: b.atan2(a),
            visibility: if offset > 0.0 { amplitude / offset } else { f64::INFINITY },
            residual_rms,
            n_points: points.len(),
            nonphysical: !(amplitude <= offset && offset > 0.0),
        },
    ))
}

/// Machine-readable S(χ) scan report: `chi_rad,S,sigma_S,violation_sigmas`
/// with an empty last field on non-violating rows.
pub fn scan_to_csv(points: &[ScanPoint]) -> String {
    let mut out = String::from("chi_rad,S,sigma_S,violation_sigmas\n");
    for p in points {
        let violation = match p.result.violation_sigmas {
            Some(v) => format!("{v}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.chi, p.result.s, p.result.sigma_s, violation
        ));
    }
    out
}

/// Human-readable S(χ) table.
pub fn format_scan_table(points: &[ScanPoint]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>12} {:>10} {:>10} {:>16}\n",
        "chi_rad", "S", "sigma_S", "violation"
    ));
    for p in points {
        let violation = match p.result.violation_sigmas {
            Some(v) => format!("{v:.2} sigma"),
            None => "non-violating".to_string(),
        };
        let flag = if p.result.degenerate { " [degenerate]" } else { "" };
        out.push_str(&format!(
            "{:>12.6} {:>10.6} {:>10.6} {:>16}{flag}\n",
            p.chi, p.result.s, p.result.sigma_s, violation
        ));
    }
    out
}
