//! TOML run configuration: experiment parameters, angle grids with explicit
//! unit suffixes, and the optional render section with its pipeline stages.
//!
//! Angles always carry their unit in the key name (`theta_deg` vs
//! `theta_rad`, `angle_deg` vs `angle_rad`); values are stored internally in
//! radians. Unknown keys are rejected with an error naming the key.

use serde::{Deserialize, Serialize};
use std::path::Path;

use spinorbit::elements::{
    half_wave_plate, pol_analyzer, polarizer, qplate, sector_hologram_analyzer, smf_coupler,
    uniform_grating, ElementOp,
};
use spinorbit::experiments::{ExperimentConfig, ExperimentMode};
use spinorbit::fieldmap::GridSpec;
use spinorbit::hilbert::{SinglePhotonState, Spin, DEFAULT_M_MAX};
use spinorbit::source::SchmidtSpectrum;

use crate::CliError;

/// Top-level run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: ModeSpec,
    pub seed: u64,
    /// Mean coincidences per second at the fringe peak (V = 1).
    pub pair_rate: f64,
    /// Seconds per setting.
    pub exposure: f64,
    pub visibility: f64,
    #[serde(default)]
    pub accidental_rate: f64,
    /// Relative power-meter noise for classical mode; 0 disables it.
    #[serde(default)]
    pub classical_noise: f64,
    /// Schmidt coefficients c_|m| for |m| = 0, 1, 2, …; auto-normalized.
    pub schmidt: Vec<f64>,
    pub angles: AnglesSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    SinglePhoton,
    TwoPhoton,
    Classical,
}

impl From<ModeSpec> for ExperimentMode {
    fn from(mode: ModeSpec) -> Self {
        match mode {
            ModeSpec::SinglePhoton => ExperimentMode::SinglePhoton,
            ModeSpec::TwoPhoton => ExperimentMode::TwoPhoton,
            ModeSpec::Classical => ExperimentMode::Classical,
        }
    }
}

/// Analyzer angle grids. Exactly one of the `_deg` / `_rad` / `_grid`
/// variants must be given per angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AnglesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_rad: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<AngleGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_rad: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_grid: Option<AngleGrid>,
}

/// Uniform angle grid `start + k·step` for k = 0..count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_rad: Option<f64>,
    pub count: usize,
}

fn angle_from(key: &str, deg: Option<f64>, rad: Option<f64>) -> Result<f64, CliError> {
    match (deg, rad) {
        (Some(d), None) => Ok(d.to_radians()),
        (None, Some(r)) => Ok(r),
        (None, None) => Err(CliError::Config(format!(
            "{key}: one of {key}_deg or {key}_rad is required"
        ))),
        (Some(_), Some(_)) => Err(CliError::Config(format!(
            "{key}: give either {key}_deg or {key}_rad, not both"
        ))),
    }
}

impl AngleGrid {
    fn resolve(&self, key: &str) -> Result<Vec<f64>, CliError> {
        if self.count == 0 {
            return Err(CliError::Config(format!("{key}.count must be at least 1")));
        }
        let start = angle_from(&format!("{key}.start"), self.start_deg, self.start_rad)?;
        let step = angle_from(&format!("{key}.step"), self.step_deg, self.step_rad)?;
        Ok((0..self.count).map(|k| start + k as f64 * step).collect())
    }
}

fn resolve_angle_list(
    key: &str,
    deg: &Option<Vec<f64>>,
    rad: &Option<Vec<f64>>,
    grid: &Option<AngleGrid>,
) -> Result<Vec<f64>, CliError> {
    let given = [deg.is_some(), rad.is_some(), grid.is_some()]
        .iter()
        .filter(|&&x| x)
        .count();
    if given != 1 {
        return Err(CliError::Config(format!(
            "angles: exactly one of {key}_deg, {key}_rad, {key}_grid must be set"
        )));
    }
    if let Some(values) = deg {
        return Ok(values.iter().map(|d| d.to_radians()).collect());
    }
    if let Some(values) = rad {
        return Ok(values.clone());
    }
    grid.as_ref().unwrap().resolve(&format!("angles.{key}_grid"))
}

impl AnglesSection {
    pub fn theta_list(&self) -> Result<Vec<f64>, CliError> {
        resolve_angle_list("theta", &self.theta_deg, &self.theta_rad, &self.theta_grid)
    }

    pub fn chi_list(&self) -> Result<Vec<f64>, CliError> {
        resolve_angle_list("chi", &self.chi_deg, &self.chi_rad, &self.chi_grid)
    }
}

/// Field-map rendering setup: grid geometry, input state, and the pipeline
/// stages applied before rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    #[serde(default = "default_raster")]
    pub width: usize,
    #[serde(default = "default_raster")]
    pub height: usize,
    /// Half-extent of the grid in beam-waist units.
    #[serde(default = "default_half_extent")]
    pub half_extent: f64,
    #[serde(default = "default_waist")]
    pub waist: f64,
    pub input: InputSpec,
    #[serde(default)]
    pub stages: Vec<StageSpec>,
}

fn default_raster() -> usize {
    256
}

fn default_half_extent() -> f64 {
    3.0
}

fn default_waist() -> f64 {
    1.0
}

impl RenderSection {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            width: self.width,
            height: self.height,
            half_extent: self.half_extent,
        }
    }

    /// Build the input state with enough OAM headroom for every q-plate in
    /// the pipeline.
    pub fn input_state(&self) -> Result<SinglePhotonState, CliError> {
        let shift: i32 = self
            .stages
            .iter()
            .map(|s| match s {
                StageSpec::Qplate { q } => 2 * *q as i32,
                _ => 0,
            })
            .sum();
        let m_max = DEFAULT_M_MAX.max(self.input.oam.abs() + shift);
        let oam = self.input.oam;
        Ok(match self.input.spin {
            SpinSpec::H => SinglePhotonState::horizontal(oam, m_max),
            SpinSpec::V => SinglePhotonState::vertical(oam, m_max),
            SpinSpec::L => SinglePhotonState::basis(Spin::L, oam, m_max),
            SpinSpec::R => SinglePhotonState::basis(Spin::R, oam, m_max),
        })
    }

    pub fn pipeline(&self) -> Result<Vec<ElementOp>, CliError> {
        self.stages.iter().map(|s| s.to_element()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub spin: SpinSpec,
    #[serde(default)]
    pub oam: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinSpec {
    H,
    V,
    L,
    R,
}

/// One pipeline stage, tagged by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StageSpec {
    Qplate {
        q: u32,
    },
    Hwp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_rad: Option<f64>,
    },
    Polarizer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_rad: Option<f64>,
    },
    PolAnalyzer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_rad: Option<f64>,
    },
    SectorHologram {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_rad: Option<f64>,
    },
    Smf {},
    Grating {},
}

impl StageSpec {
    pub fn to_element(&self) -> Result<ElementOp, CliError> {
        Ok(match self {
            StageSpec::Qplate { q } => {
                if *q == 0 {
                    return Err(CliError::Config(
                        "stages: qplate q must be a positive integer".to_string(),
                    ));
                }
                qplate(*q)
            }
            StageSpec::Hwp { angle_deg, angle_rad } => {
                half_wave_plate(angle_from("stages.hwp.angle", *angle_deg, *angle_rad)?)
            }
            StageSpec::Polarizer { angle_deg, angle_rad } => {
                polarizer(angle_from("stages.polarizer.angle", *angle_deg, *angle_rad)?)
            }
            StageSpec::PolAnalyzer { angle_deg, angle_rad } => pol_analyzer(angle_from(
                "stages.pol_analyzer.angle",
                *angle_deg,
                *angle_rad,
            )?),
            StageSpec::SectorHologram { angle_deg, angle_rad } => sector_hologram_analyzer(
                angle_from("stages.sector_hologram.angle", *angle_deg, *angle_rad)?,
            ),
            StageSpec::Smf {} => smf_coupler(),
            StageSpec::Grating {} => uniform_grating(),
        })
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    /// Resolve into the experiment configuration, warning (via the returned
    /// flag) when the Schmidt coefficients needed renormalization by more
    /// than 1e−6.
    pub fn to_experiment(&self, seed_override: Option<u64>) -> Result<(ExperimentConfig, bool), CliError> {
        let schmidt = SchmidtSpectrum::new(&self.schmidt)
            .map_err(|e| CliError::Config(format!("schmidt: {e}")))?;
        let renormalized = schmidt.normalization_deviation() > 1e-6;
        let config = ExperimentConfig {
            mode: self.mode.into(),
            theta_list: self.angles.theta_list()?,
            chi_list: self.angles.chi_list()?,
            pair_rate: self.pair_rate,
            exposure: self.exposure,
            visibility: self.visibility,
            accidental_rate: self.accidental_rate,
            seed: seed_override.unwrap_or(self.seed),
            schmidt,
            classical_noise: self.classical_noise,
        };
        config
            .validate()
            .map_err(|e| CliError::Config(format!("config: {e}")))?;
        Ok((config, renormalized))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
mode = "single-photon"
seed = 42
pair_rate = 2000.0
exposure = 1.0
visibility = 0.9
schmidt = [1.0, 0.5, 0.3333]

[angles]
theta_deg = [0.0, 45.0, 90.0, 135.0]
chi_grid = { start_deg = 0.0, step_deg = 1.40625, count = 64 }

[render]
width = 128
height = 128
input = { spin = "h", oam = 0 }

[[render.stages]]
type = "qplate"
q = 1
"#;

    #[test]
    fn parses_example() {
        let config = FileConfig::parse(EXAMPLE).unwrap();
        assert_eq!(config.mode, ModeSpec::SinglePhoton);
        let (experiment, renormalized) = config.to_experiment(None).unwrap();
        assert!(renormalized); // raw coefficients are not normalized
        assert_eq!(experiment.theta_list.len(), 4);
        assert_eq!(experiment.chi_list.len(), 64);
        assert!((experiment.theta_list[1] - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        let render = config.render.as_ref().unwrap();
        assert_eq!(render.pipeline().unwrap().len(), 1);
        assert!(render.input_state().unwrap().is_normalized());
    }

    #[test]
    fn unknown_key_is_named() {
        let bad = EXAMPLE.replace("pair_rate", "pair_rte");
        let err = FileConfig::parse(&bad).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("pair_rte"), "message was: {message}");
    }

    #[test]
    fn round_trip_is_identity() {
        let config = FileConfig::parse(EXAMPLE).unwrap();
        let text = toml::to_string_pretty(&config).unwrap();
        let reparsed = FileConfig::parse(&text).unwrap();
        assert_eq!(config, reparsed);
    }

    #[test]
    fn angle_unit_suffix_is_mandatory() {
        let missing = r#"
mode = "classical"
seed = 1
pair_rate = 100.0
exposure = 1.0
visibility = 1.0
schmidt = [1.0]

[angles]
theta_deg = [0.0]
"#;
        let config = FileConfig::parse(missing).unwrap();
        let err = config.to_experiment(None).unwrap_err();
        assert!(err.to_string().contains("chi"));
    }

    #[test]
    fn both_units_rejected() {
        let both = r#"
mode = "classical"
seed = 1
pair_rate = 100.0
exposure = 1.0
visibility = 1.0
schmidt = [1.0]

[angles]
theta_deg = [0.0]
theta_rad = [0.0]
chi_deg = [0.0]
"#;
        let config = FileConfig::parse(both).unwrap();
        let err = config.to_experiment(None).unwrap_err();
        assert!(err.to_string().contains("theta"));
    }

    #[test]
    fn seed_override_applies() {
        let config = FileConfig::parse(EXAMPLE).unwrap();
        let (experiment, _) = config.to_experiment(Some(7)).unwrap();
        assert_eq!(experiment.seed, 7);
    }

    #[test]
    fn stage_angles_resolve() {
        let stage = StageSpec::Hwp {
            angle_deg: Some(22.5),
            angle_rad: None,
        };
        assert!(stage.to_element().is_ok());
        let bad = StageSpec::Hwp {
            angle_deg: None,
            angle_rad: None,
        };
        assert!(bad.to_element().is_err());
    }
}
