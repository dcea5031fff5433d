//! The three end-to-end measurement pipelines and coincidence-count
//! simulation.
//!
//! All three experiments measure the same joint observable — polarization
//! orientation θ on one side, spatial-mode orientation χ on the other — and
//! share the ideal detection law ½·cos²(θ − 2χ):
//!
//! - single photon: heralded |H,0⟩ → q-plate → polarization analyzer at θ →
//!   sector hologram at χ → fiber;
//! - photon pair: m = ±2 post-selected pair, q-plate + fiber on arm A
//!   (OAM-to-SAM transfer), analyzer at θ on A, hologram at χ + fiber on B;
//! - classical beam: a coherent state in the same mode, measured by the
//!   same filters, with counts replaced by power fractions.
//!
//! Noise enters as a white admixture with visibility V plus a flat
//! accidental rate; counts are Poisson draws from per-setting random
//! streams so the grid can be evaluated in any order (or in parallel)
//! without changing the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::elements::{pol_analyzer, qplate, sector_hologram_analyzer, smf_coupler};
use crate::hilbert::{Arm, SinglePhotonState, TwoPhotonState, DEFAULT_M_MAX};
use crate::source::{postselect_pm2_pair, SchmidtSpectrum, SourceError};

/// Peak of the ideal detection probability ½·cos²(θ − 2χ); the pair rate is
/// defined as mean counts/s at this peak for V = 1.
pub const PEAK_PROBABILITY: f64 = 0.5;
/// Setting-averaged ideal probability, the white-noise admixture level.
pub const MEAN_PROBABILITY: f64 = 0.25;

/// Errors from experiment configuration and simulation.
#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("visibility must lie in [0, 1], got {0}")]
    InvalidVisibility(f64),
    #[error("{name} must be non-negative, got {value}")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("exposure must be positive, got {0}")]
    NonPositiveExposure(f64),
    #[error("{name} grid must not be empty")]
    EmptyGrid { name: &'static str },
    #[error("source error: {0}")]
    Source(#[from] SourceError),
    #[error("counts CSV line {line}: {message}")]
    CsvParse { line: usize, message: String },
}

/// Which of the three experiments to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentMode {
    SinglePhoton,
    TwoPhoton,
    Classical,
}

/// Full description of a simulated run. Identical (config, seed) pairs
/// produce bit-identical counts.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    /// Polarization analyzer angles, radians.
    pub theta_list: Vec<f64>,
    /// Hologram orientations, radians.
    pub chi_list: Vec<f64>,
    /// Mean coincidences per second at the fringe peak (V = 1).
    pub pair_rate: f64,
    /// Seconds per setting.
    pub exposure: f64,
    /// Fringe visibility V ∈ [0, 1].
    pub visibility: f64,
    /// Flat accidental-coincidence rate, counts per second.
    pub accidental_rate: f64,
    /// Master seed; every setting derives its own stream from it.
    pub seed: u64,
    pub schmidt: SchmidtSpectrum,
    /// Relative power-meter noise for classical mode (0 = noiseless).
    pub classical_noise: f64,
}

impl ExperimentConfig {
    /// A configuration with the demo spectrum and no noise beyond the
    /// visibility admixture.
    pub fn new(mode: ExperimentMode, theta_list: Vec<f64>, chi_list: Vec<f64>) -> Self {
        Self {
            mode,
            theta_list,
            chi_list,
            pair_rate: 2000.0,
            exposure: 1.0,
            visibility: 1.0,
            accidental_rate: 0.0,
            seed: 0,
            schmidt: SchmidtSpectrum::default_demo(),
            classical_noise: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(ExperimentError::InvalidVisibility(self.visibility));
        }
        for (name, value) in [
            ("pair_rate", self.pair_rate),
            ("accidental_rate", self.accidental_rate),
            ("classical_noise", self.classical_noise),
        ] {
            // NaN must fail too
            if value < 0.0 || value.is_nan() {
                return Err(ExperimentError::NegativeRate { name, value });
            }
        }
        if self.exposure <= 0.0 || self.exposure.is_nan() {
            return Err(ExperimentError::NonPositiveExposure(self.exposure));
        }
        if self.theta_list.is_empty() {
            return Err(ExperimentError::EmptyGrid { name: "theta" });
        }
        if self.chi_list.is_empty() {
            return Err(ExperimentError::EmptyGrid { name: "chi" });
        }
        Ok(())
    }
}

/// Measured or simulated counts for one (θ, χ) setting.
///
/// `counts` is integer-valued for the photon-counting modes; classical mode
/// stores expected power fractions scaled to a dimensionless flux, which
/// need not be integer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRecord {
    pub theta: f64,
    pub chi: f64,
    pub counts: f64,
    pub exposure: f64,
}

/// Detection probability of the heralded single-photon pipeline at
/// analyzer settings (θ, χ), computed by composing the actual elements:
/// q-plate on |H,0⟩, polarization analyzer, sector hologram, fiber.
/// Equals ½·cos²(θ − 2χ).
pub fn probability_single(theta: f64, chi: f64) -> f64 {
    let input = SinglePhotonState::horizontal(0, DEFAULT_M_MAX);
    let entangled = qplate(1).apply(&input).expect("within truncation");
    let after_pol = pol_analyzer(theta)
        .apply(&entangled)
        .expect("within truncation");
    let after_holo = sector_hologram_analyzer(chi)
        .apply(&after_pol)
        .expect("within truncation");
    let detected = smf_coupler().apply(&after_holo).expect("within truncation");
    detected.squared_norm()
}

/// The post-selected two-photon pipeline state: m = ±2 pair, q-plate on arm
/// A, fiber on arm A. Returns the normalized non-local hybrid state together
/// with the combined post-selection probability (sector weight × transfer).
pub fn postselected_pipeline_state(
    spectrum: &SchmidtSpectrum,
) -> Result<(TwoPhotonState, f64), ExperimentError> {
    let (pair, sector_prob) = postselect_pm2_pair(spectrum)?;
    let transferred = qplate(1).apply_arm(&pair, Arm::A).expect("within truncation");
    let filtered = smf_coupler()
        .apply_arm(&transferred, Arm::A)
        .expect("within truncation");
    let transfer_prob = filtered.squared_norm();
    let state = filtered.normalized().map_err(|_| SourceError::ZeroNorm {
        sector: 2,
    })?;
    Ok((state, sector_prob * transfer_prob))
}

/// Joint detection probability of the two-photon pipeline at (θ, χ), given
/// post-selection: analyzer at θ on arm A, hologram at χ plus fiber on arm
/// B, applied to the non-local hybrid state. Equals ½·cos²(θ − 2χ), the
/// same law as the single-photon experiment.
pub fn probability_pair(theta: f64, chi: f64) -> f64 {
    let (state, _) = postselected_pipeline_state(&SchmidtSpectrum::default_demo())
        .expect("demo spectrum has c2 > 0");
    let after_pol = pol_analyzer(theta)
        .apply_arm(&state, Arm::A)
        .expect("within truncation");
    let after_holo = sector_hologram_analyzer(chi)
        .apply_arm(&after_pol, Arm::B)
        .expect("within truncation");
    let detected = smf_coupler()
        .apply_arm(&after_holo, Arm::B)
        .expect("within truncation");
    detected.squared_norm()
}

/// Transmitted power fraction of the classical coherent-beam experiment at
/// (θ, χ). A coherent state in the same mode measured by the same modal
/// filters transmits exactly the single-photon detection probability.
pub fn classical_power_fraction(theta: f64, chi: f64) -> f64 {
    probability_single(theta, chi)
}

/// White-noise admixture: V·p + (1 − V)·p̄ with p̄ = ¼ the setting-averaged
/// ideal probability, so fringes have visibility exactly V.
pub fn noisy_probability(p_ideal: f64, visibility: f64) -> Result<f64, ExperimentError> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(ExperimentError::InvalidVisibility(visibility));
    }
    Ok(visibility * p_ideal + (1.0 - visibility) * MEAN_PROBABILITY)
}

/// Deterministic per-setting random stream: the master seed keys the
/// generator and the grid indices select the stream, so settings are
/// independent of evaluation order.
pub fn setting_rng(seed: u64, theta_index: usize, chi_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((theta_index as u64) << 32) | chi_index as u64);
    rng
}

/// Draw Poisson counts with the given mean from the stream.
pub fn poisson_counts(lambda: f64, rng: &mut ChaCha8Rng) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let dist = Poisson::new(lambda).expect("positive finite mean");
    dist.sample(rng)
}

/// Run the configured experiment over the full (θ, χ) grid.
///
/// Mean counts per setting are
/// `pair_rate · exposure · noisy_probability(p, V) / ½ + accidental_rate · exposure`,
/// Poisson-sampled in the photon modes; classical mode emits expected
/// values, optionally smeared by relative Gaussian power-meter noise.
pub fn simulate_counts(config: &ExperimentConfig) -> Result<Vec<CountRecord>, ExperimentError> {
    config.validate()?;
    let ideal: &dyn Fn(f64, f64) -> f64 = match config.mode {
        ExperimentMode::SinglePhoton => &probability_single,
        ExperimentMode::TwoPhoton => &probability_pair,
        ExperimentMode::Classical => &classical_power_fraction,
    };
    let mut records = Vec::with_capacity(config.theta_list.len() * config.chi_list.len());
    for (i, &theta) in config.theta_list.iter().enumerate() {
        for (j, &chi) in config.chi_list.iter().enumerate() {
            let p = noisy_probability(ideal(theta, chi), config.visibility)?;
            let lambda = config.pair_rate * config.exposure * p / PEAK_PROBABILITY
                + config.accidental_rate * config.exposure;
            let mut rng = setting_rng(config.seed, i, j);
            let counts = match config.mode {
                ExperimentMode::Classical => {
                    if config.classical_noise > 0.0 {
                        let noise = Normal::new(0.0, config.classical_noise)
                            .expect("finite std dev")
                            .sample(&mut rng);
                        (lambda * (1.0 + noise)).max(0.0)
                    } else {
                        lambda
                    }
                }
                _ => poisson_counts(lambda, &mut rng),
            };
            records.push(CountRecord {
                theta,
                chi,
                counts,
                exposure: config.exposure,
            });
        }
    }
    Ok(records)
}

/// Header of the counts CSV format.
pub const COUNTS_CSV_HEADER: &str = "theta_rad,chi_rad,counts,exposure_s";

/// Serialize count records to the CSV format: one row per setting,
/// locale-independent `.` decimal separator.
pub fn counts_to_csv(records: &[CountRecord]) -> String {
    let mut out = String::from(COUNTS_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.theta, r.chi, r.counts, r.exposure));
    }
    out
}

/// Parse the counts CSV format written by [`counts_to_csv`].
pub fn counts_from_csv(text: &str) -> Result<Vec<CountRecord>, ExperimentError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(ExperimentError::CsvParse {
        line: 1,
        message: "empty file".to_string(),
    })?;
    if header.trim() != COUNTS_CSV_HEADER {
        return Err(ExperimentError::CsvParse {
            line: 1,
            message: format!("expected header '{COUNTS_CSV_HEADER}', got '{}'", header.trim()),
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(ExperimentError::CsvParse {
                line: idx + 1,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |field: &str, name: &str| -> Result<f64, ExperimentError> {
            field.trim().parse::<f64>().map_err(|e| ExperimentError::CsvParse {
                line: idx + 1,
                message: format!("bad {name} value '{field}': {e}"),
            })
        };
        let counts = parse(fields[2], "counts")?;
        if counts < 0.0 {
            return Err(ExperimentError::CsvParse {
                line: idx + 1,
                message: format!("counts must be non-negative, got {counts}"),
            });
        }
        records.push(CountRecord {
            theta: parse(fields[0], "theta_rad")?,
            chi: parse(fields[1], "chi_rad")?,
            counts,
            exposure: parse(fields[3], "exposure_s")?,
        });
    }
    if records.is_empty() {
        return Err(ExperimentError::CsvParse {
            line: 1,
            message: "no data rows".to_string(),
        });
    }
    Ok(records)
}
