//! Transverse-field rendering of SAM-OAM modes and Stokes-parameter maps.
//!
//! Each OAM component is assigned the p = 0 Laguerre-Gauss radial profile
//! LG_m(r) ∝ (r√2/w₀)^|m|·exp(−r²/w₀²) with unit L² norm, so a normalized
//! photon state renders to a field of unit integrated intensity. The
//! polarization texture of the states of interest is radius-independent,
//! which makes this the simplest faithful radial model.
//!
//! Sign conventions, pinned by unit tests: S3 = |E_L|² − |E_R|² (+1 ⇔ pure
//! left-circular) and S1 + iS2 = 2·conj(E_R)·E_L, which makes a uniform
//! horizontal field give S1/S0 = +1 and the linear-polarization state at
//! analyzer angle θ give orientation ψ = θ.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use image::{GrayImage, Rgb, RgbImage};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::hilbert::{SinglePhotonState, Spin};

/// Smallest accepted raster dimension.
pub const MIN_GRID_SIZE: usize = 64;
/// Default raster: 256×256 over ±3 beam waists.
pub const DEFAULT_GRID: GridSpec = GridSpec {
    width: 256,
    height: 256,
    half_extent: 3.0,
};

/// Errors from rendering and map export.
#[derive(Debug, Error)]
pub enum FieldmapError {
    #[error("grid {width}x{height} too coarse; need at least {MIN_GRID_SIZE} px per side")]
    GridTooCoarse { width: usize, height: usize },
    #[error("grid must be square, got {width}x{height}")]
    GridNotSquare { width: usize, height: usize },
    #[error("state must be normalized to render (squared norm {squared_norm})")]
    StateNotNormalized { squared_norm: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("{path} line {line}: {message}")]
    CsvGridParse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Raster geometry: square pixel grid centered on the beam axis, spanning
/// ±`half_extent` beam waists. The axis itself falls on the pixel at index
/// (width/2, height/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// Half-extent of the grid in units of the beam waist.
    pub half_extent: f64,
}

impl GridSpec {
    fn validate(&self) -> Result<(), FieldmapError> {
        if self.width < MIN_GRID_SIZE || self.height < MIN_GRID_SIZE {
            return Err(FieldmapError::GridTooCoarse {
                width: self.width,
                height: self.height,
            });
        }
        if self.width != self.height {
            return Err(FieldmapError::GridNotSquare {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }
}

/// Sampled transverse optical field: two circular-polarization complex
/// components per pixel, row-major.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub width: usize,
    pub height: usize,
    /// Half-extent in beam-waist units.
    pub half_extent: f64,
    /// Beam waist w₀ (sets the physical pixel pitch).
    pub waist: f64,
    e_l: Vec<Complex64>,
    e_r: Vec<Complex64>,
}

impl FieldGrid {
    pub fn e_left(&self, ix: usize, iy: usize) -> Complex64 {
        self.e_l[iy * self.width + ix]
    }

    pub fn e_right(&self, ix: usize, iy: usize) -> Complex64 {
        self.e_r[iy * self.width + ix]
    }

    /// Physical pixel pitch.
    pub fn pixel_size(&self) -> f64 {
        2.0 * self.half_extent * self.waist / self.width as f64
    }

    /// Intensity summed over the grid times the pixel area; 1 within
    /// quadrature error for a normalized rendered state.
    pub fn total_intensity(&self) -> f64 {
        let da = self.pixel_size() * self.pixel_size();
        self.e_l
            .iter()
            .zip(self.e_r.iter())
            .map(|(l, r)| l.norm_sqr() + r.norm_sqr())
            .sum::<f64>()
            * da
    }
}

/// Per-pixel Stokes parameters of a [`FieldGrid`].
#[derive(Debug, Clone)]
pub struct StokesMap {
    pub width: usize,
    pub height: usize,
    pub half_extent: f64,
    pub s0: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub s3: Vec<f64>,
}

impl StokesMap {
    /// Polarization-ellipse orientation ψ = ½·atan2(S2, S1) ∈ (−π/2, π/2].
    pub fn orientation(&self, ix: usize, iy: usize) -> f64 {
        let i = iy * self.width + ix;
        0.5 * self.s2[i].atan2(self.s1[i])
    }

    /// Ellipticity angle ½·asin(S3/S0); zero where S0 vanishes.
    pub fn ellipticity_angle(&self, ix: usize, iy: usize) -> f64 {
        let i = iy * self.width + ix;
        if self.s0[i] <= 0.0 {
            return 0.0;
        }
        0.5 * (self.s3[i] / self.s0[i]).clamp(-1.0, 1.0).asin()
    }

    fn normalized_component(&self, component: &[f64]) -> Vec<f64> {
        component
            .iter()
            .zip(self.s0.iter())
            .map(|(v, s0)| if *s0 > 0.0 { v / s0 } else { 0.0 })
            .collect()
    }
}

/// p = 0 Laguerre-Gauss radial profile of order |m|: the full transverse
/// mode LG(r)·e^{imφ} has unit L² norm over the plane.
pub fn lg_radial(r: f64, m_abs: u32, waist: f64) -> f64 {
    let mut factorial = 1.0;
    for k in 2..=m_abs as u64 {
        factorial *= k as f64;
    }
    let norm = (2.0 / (PI * waist * waist * factorial)).sqrt();
    let scaled = r * std::f64::consts::SQRT_2 / waist;
    norm * scaled.powi(m_abs as i32) * (-r * r / (waist * waist)).exp()
}

/// Render a normalized single-photon state to a transverse field, assigning
/// each OAM component its LG radial profile.
pub fn render_mode(
    state: &SinglePhotonState,
    grid: &GridSpec,
    waist: f64,
) -> Result<FieldGrid, FieldmapError> {
    grid.validate()?;
    let squared_norm = state.squared_norm();
    if !state.is_normalized() {
        return Err(FieldmapError::StateNotNormalized { squared_norm });
    }
    assert!(waist > 0.0, "beam waist must be positive");

    let components: Vec<(Spin, i32, Complex64)> = state
        .amplitudes()
        .map(|(label, amp)| (label.spin, label.oam, amp))
        .collect();

    let n = grid.width;
    let pitch = 2.0 * grid.half_extent * waist / n as f64;
    let mut e_l = vec![Complex64::ZERO; n * n];
    let mut e_r = vec![Complex64::ZERO; n * n];
    for iy in 0..n {
        let y = (iy as f64 - (n / 2) as f64) * pitch;
        for ix in 0..n {
            let x = (ix as f64 - (n / 2) as f64) * pitch;
            let r = x.hypot(y);
            let phi = y.atan2(x);
            let mut el = Complex64::ZERO;
            let mut er = Complex64::ZERO;
            for &(spin, m, amp) in &components {
                let value = amp
                    * lg_radial(r, m.unsigned_abs(), waist)
                    * Complex64::from_polar(1.0, m as f64 * phi);
                match spin {
                    Spin::L => el += value,
                    Spin::R => er += value,
                }
            }
            e_l[iy * n + ix] = el;
            e_r[iy * n + ix] = er;
        }
    }
    Ok(FieldGrid {
        width: n,
        height: n,
        half_extent: grid.half_extent,
        waist,
        e_l,
        e_r,
    })
}

/// Per-pixel Stokes parameters: S0 = |E_L|² + |E_R|², S3 = |E_L|² − |E_R|²,
/// S1 + iS2 = 2·conj(E_R)·E_L.
pub fn stokes(field: &FieldGrid) -> StokesMap {
    let len = field.e_l.len();
    let mut s0 = Vec::with_capacity(len);
    let mut s1 = Vec::with_capacity(len);
    let mut s2 = Vec::with_capacity(len);
    let mut s3 = Vec::with_capacity(len);
    for (el, er) in field.e_l.iter().zip(field.e_r.iter()) {
        let il = el.norm_sqr();
        let ir = er.norm_sqr();
        let cross = 2.0 * er.conj() * el;
        s0.push(il + ir);
        s1.push(cross.re);
        s2.push(cross.im);
        s3.push(il - ir);
    }
    StokesMap {
        width: field.width,
        height: field.height,
        half_extent: field.half_extent,
        s0,
        s1,
        s2,
        s3,
    }
}

/// Winding number of the polarization orientation around the beam axis,
/// sampled on a circle of `radius_px` pixels: the accumulated unwrapped
/// ψ divided by 2π after one loop.
pub fn orientation_winding(map: &StokesMap, radius_px: f64, samples: usize) -> f64 {
    let cx = (map.width / 2) as f64;
    let cy = (map.height / 2) as f64;
    let psi_at = |k: usize| {
        let t = 2.0 * PI * k as f64 / samples as f64;
        let ix = (cx + radius_px * t.cos()).round() as usize;
        let iy = (cy + radius_px * t.sin()).round() as usize;
        map.orientation(ix.min(map.width - 1), iy.min(map.height - 1))
    };
    let mut total = 0.0;
    let mut previous = psi_at(0);
    for k in 1..=samples {
        let psi = psi_at(k % samples);
        // orientation lives mod π: map each step into (−π/2, π/2]
        let mut delta = psi - previous;
        while delta > PI / 2.0 {
            delta -= PI;
        }
        while delta <= -PI / 2.0 {
            delta += PI;
        }
        total += delta;
        previous = psi;
    }
    total / (2.0 * PI)
}

/// Output encoding for [`export_maps`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    /// Plain-text grids: `# width height half_extent_w0` header, then
    /// row-major comma-separated values.
    CsvGrid,
    /// Rasters: grayscale intensity, blue-white-red diverging S_i/S0
    /// clamped to [−1, 1], and an orientation-line overlay.
    Png,
}

/// Write one value grid in the CSV-grid format.
pub fn write_csv_grid(
    path: &Path,
    width: usize,
    height: usize,
    half_extent: f64,
    values: &[f64],
) -> Result<(), FieldmapError> {
    assert_eq!(values.len(), width * height);
    let mut text = format!("# {width} {height} {half_extent}\n");
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| FieldmapError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a CSV grid back: (width, height, half_extent, row-major values).
pub fn read_csv_grid(path: &Path) -> Result<(usize, usize, f64, Vec<f64>), FieldmapError> {
    let text = fs::read_to_string(path).map_err(|source| FieldmapError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: usize, message: String| FieldmapError::CsvGridParse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".to_string()))?;
    let fields: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    if !header.starts_with('#') || fields.len() != 3 {
        return Err(parse_err(
            1,
            "expected header '# width height half_extent_w0'".to_string(),
        ));
    }
    let width: usize = fields[0]
        .parse()
        .map_err(|e| parse_err(1, format!("bad width: {e}")))?;
    let height: usize = fields[1]
        .parse()
        .map_err(|e| parse_err(1, format!("bad height: {e}")))?;
    let half_extent: f64 = fields[2]
        .parse()
        .map_err(|e| parse_err(1, format!("bad half extent: {e}")))?;
    let mut values = Vec::with_capacity(width * height);
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        for field in line.split(',') {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(idx + 1, format!("bad value '{field}': {e}")))?,
            );
        }
    }
    if values.len() != width * height {
        return Err(parse_err(
            1,
            format!("expected {} values, got {}", width * height, values.len()),
        ));
    }
    Ok((width, height, half_extent, values))
}

fn diverging_color(v: f64) -> Rgb<u8> {
    let v = v.clamp(-1.0, 1.0);
    let lerp = |a: f64, b: f64, t: f64| (a + (b - a) * t).round() as u8;
    if v < 0.0 {
        let t = 1.0 + v; // −1 → 0, 0 → 1
        Rgb([lerp(59.0, 255.0, t), lerp(76.0, 255.0, t), lerp(192.0, 255.0, t)])
    } else {
        let t = v;
        Rgb([lerp(255.0, 180.0, t), lerp(255.0, 4.0, t), lerp(255.0, 38.0, t)])
    }
}

fn save_gray(path: &Path, width: usize, values: &[f64], peak: f64) -> Result<(), FieldmapError> {
    let height = values.len() / width;
    let mut img = GrayImage::new(width as u32, height as u32);
    for (i, v) in values.iter().enumerate() {
        let level = if peak > 0.0 {
            (v / peak * 255.0).clamp(0.0, 255.0) as u8
        } else {
            0
        };
        img.put_pixel((i % width) as u32, (i / width) as u32, image::Luma([level]));
    }
    img.save(path).map_err(|e| FieldmapError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn save_diverging(path: &Path, width: usize, values: &[f64]) -> Result<(), FieldmapError> {
    let height = values.len() / width;
    let mut img = RgbImage::new(width as u32, height as u32);
    for (i, v) in values.iter().enumerate() {
        img.put_pixel(
            (i % width) as u32,
            (i / width) as u32,
            diverging_color(*v),
        );
    }
    img.save(path).map_err(|e| FieldmapError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn save_orientation_overlay(path: &Path, map: &StokesMap) -> Result<(), FieldmapError> {
    let peak = map.s0.iter().cloned().fold(0.0, f64::max);
    let width = map.width;
    let mut img = RgbImage::new(width as u32, map.height as u32);
    for (i, v) in map.s0.iter().enumerate() {
        let level = if peak > 0.0 {
            (v / peak * 255.0).clamp(0.0, 255.0) as u8
        } else {
            0
        };
        img.put_pixel(
            (i % width) as u32,
            (i / width) as u32,
            Rgb([level, level, level]),
        );
    }
    // short line segments showing the local orientation, on a coarse lattice
    let step = (width / 16).max(8);
    let half_len = step as f64 * 0.4;
    for cy in (step / 2..map.height).step_by(step) {
        for cx in (step / 2..width).step_by(step) {
            if map.s0[cy * width + cx] < 0.05 * peak {
                continue;
            }
            let psi = map.orientation(cx, cy);
            let (dx, dy) = (psi.cos(), psi.sin());
            let mut t = -half_len;
            while t <= half_len {
                let px = cx as f64 + t * dx;
                let py = cy as f64 + t * dy;
                if px >= 0.0 && py >= 0.0 && (px as usize) < width && (py as usize) < map.height {
                    img.put_pixel(px as u32, py as u32, Rgb([255, 214, 64]));
                }
                t += 0.5;
            }
        }
    }
    img.save(path).map_err(|e| FieldmapError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Export the intensity map, the three normalized Stokes maps, and an
/// orientation raster for a rendered field. Returns the written paths.
///
/// CSV-grid exports are byte-deterministic for identical fields. The
/// orientation CSV stores ψ in radians; the orientation PNG overlays line
/// segments on the intensity image.
pub fn export_maps(
    field: &FieldGrid,
    dir: &Path,
    format: MapFormat,
) -> Result<Vec<PathBuf>, FieldmapError> {
    fs::create_dir_all(dir).map_err(|source| FieldmapError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let map = stokes(field);
    let orientation: Vec<f64> = (0..map.height)
        .flat_map(|iy| (0..map.width).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| map.orientation(ix, iy))
        .collect();
    let components = [
        ("intensity", map.s0.clone()),
        ("s1_over_s0", map.normalized_component(&map.s1)),
        ("s2_over_s0", map.normalized_component(&map.s2)),
        ("s3_over_s0", map.normalized_component(&map.s3)),
        ("orientation", orientation),
    ];
    let mut written = Vec::new();
    match format {
        MapFormat::CsvGrid => {
            for (name, values) in &components {
                let path = dir.join(format!("{name}.csv"));
                write_csv_grid(&path, map.width, map.height, map.half_extent, values)?;
                written.push(path);
            }
        }
        MapFormat::Png => {
            let peak = map.s0.iter().cloned().fold(0.0, f64::max);
            for (name, values) in &components {
                let path = dir.join(format!("{name}.png"));
                match *name {
                    "intensity" => save_gray(&path, map.width, values, peak)?,
                    "orientation" => save_orientation_overlay(&path, &map)?,
                    _ => save_diverging(&path, map.width, values)?,
                }
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Convenience for tests and tools: write arbitrary text with path-context
/// errors.
pub fn write_text(path: &Path, text: &str) -> Result<(), FieldmapError> {
    let mut file = fs::File::create(path).map_err(|source| FieldmapError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(text.as_bytes())
        .map_err(|source| FieldmapError::Io {
            path: path.to_path_buf(),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{ModeLabel, SinglePhotonState, Spin, DEFAULT_M_MAX};
    use approx::assert_abs_diff_eq;

    fn bell_field() -> FieldGrid {
        let state = SinglePhotonState::sam_oam_bell(DEFAULT_M_MAX);
        render_mode(&state, &DEFAULT_GRID, 1.0).unwrap()
    }

    #[test]
    fn gaussian_mode_is_pure_circular() {
        let state = SinglePhotonState::basis(Spin::L, 0, DEFAULT_M_MAX);
        let field = render_mode(&state, &DEFAULT_GRID, 1.0).unwrap();
        let map = stokes(&field);
        let peak = map.s0.iter().cloned().fold(0.0, f64::max);
        // peak on axis for the fundamental mode
        let center = (field.height / 2) * field.width + field.width / 2;
        assert_abs_diff_eq!(map.s0[center], peak, epsilon = 1e-12);
        for i in 0..map.s0.len() {
            if map.s0[i] > 1e-12 * peak {
                assert_abs_diff_eq!(map.s3[i] / map.s0[i], 1.0, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(field.total_intensity(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn bell_mode_is_doughnut() {
        let field = bell_field();
        let map = stokes(&field);
        let peak = map.s0.iter().cloned().fold(0.0, f64::max);
        let center = (field.height / 2) * field.width + field.width / 2;
        assert!(map.s0[center] < 1e-12 * peak);
        assert_abs_diff_eq!(field.total_intensity(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn bell_mode_is_linearly_polarized_everywhere() {
        let field = bell_field();
        let map = stokes(&field);
        for i in 0..map.s0.len() {
            assert!(map.s3[i].abs() <= 1e-12, "S3 = {} at pixel {i}", map.s3[i]);
        }
    }

    /// Orientation rotates as ψ(φ) = −2φ (mod π) for the q-plate output
    /// mode; the winding number around the axis is −2.
    #[test]
    fn bell_mode_orientation_winding() {
        let field = bell_field();
        let map = stokes(&field);
        // sample on the intensity ring, r = w0 ≈ width/(2·half_extent) px
        let radius = field.width as f64 / (2.0 * field.half_extent);
        let winding = orientation_winding(&map, radius, 720);
        assert_abs_diff_eq!(winding, -2.0, epsilon = 1e-6);

        // spot-check ψ(φ) = −2φ mod π on a few azimuths
        let cx = field.width / 2;
        let cy = field.height / 2;
        for k in 0..8 {
            let phi = 2.0 * PI * k as f64 / 8.0 + 0.03;
            let ix = (cx as f64 + radius * phi.cos()).round() as usize;
            let iy = (cy as f64 + radius * phi.sin()).round() as usize;
            let psi = map.orientation(ix, iy);
            let expected = -2.0 * phi;
            let wrapped = (psi - expected).rem_euclid(PI);
            let distance = wrapped.min(PI - wrapped);
            // nearest-pixel sampling limits the accuracy here
            assert!(distance < 0.06, "psi {psi} vs -2φ at φ = {phi}");
        }
    }

    #[test]
    fn stokes_convention_pinned_by_cardinal_states() {
        // uniform |H⟩: S1/S0 = +1, S2 = S3 = 0
        let h = SinglePhotonState::horizontal(0, DEFAULT_M_MAX);
        let map = stokes(&render_mode(&h, &DEFAULT_GRID, 1.0).unwrap());
        let idx = (map.height / 2) * map.width + map.width / 2 + 10;
        assert_abs_diff_eq!(map.s1[idx] / map.s0[idx], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(map.s2[idx], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(map.s3[idx], 0.0, epsilon = 1e-15);

        // pure |L⟩: S3/S0 = +1
        let l = SinglePhotonState::basis(Spin::L, 0, DEFAULT_M_MAX);
        let map = stokes(&render_mode(&l, &DEFAULT_GRID, 1.0).unwrap());
        assert_abs_diff_eq!(map.s3[idx] / map.s0[idx], 1.0, epsilon = 1e-12);

        // diagonal analyzer state (θ = π/4): S2/S0 = +1, orientation π/4
        let d = SinglePhotonState::linear(PI / 4.0, 0, DEFAULT_M_MAX);
        let map = stokes(&render_mode(&d, &DEFAULT_GRID, 1.0).unwrap());
        assert_abs_diff_eq!(map.s2[idx] / map.s0[idx], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            map.orientation(map.width / 2 + 10, map.height / 2),
            PI / 4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn full_polarization_identity() {
        let field = bell_field();
        let map = stokes(&field);
        for i in 0..map.s0.len() {
            let lhs = map.s1[i].powi(2) + map.s2[i].powi(2) + map.s3[i].powi(2);
            let rhs = map.s0[i].powi(2);
            assert!(lhs <= rhs + 1e-12);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9);
        }
    }

    /// Shifting all OAM phases by e^{imα} rotates every map by α.
    #[test]
    fn rotational_covariance() {
        let alpha = 0.35;
        let base = SinglePhotonState::sam_oam_bell(DEFAULT_M_MAX);
        let rotated_state = SinglePhotonState::from_amplitudes(
            base.amplitudes().map(|(label, amp)| {
                (
                    label,
                    amp * Complex64::from_polar(1.0, label.oam as f64 * alpha),
                )
            }),
            DEFAULT_M_MAX,
        );
        let grid = GridSpec {
            width: 256,
            height: 256,
            half_extent: 3.0,
        };
        let map_base = stokes(&render_mode(&base, &grid, 1.0).unwrap());
        let map_rot = stokes(&render_mode(&rotated_state, &grid, 1.0).unwrap());

        let n = grid.width;
        let center = (n / 2) as f64;
        let peak = map_base.s0.iter().cloned().fold(0.0, f64::max);
        let bilinear = |values: &[f64], x: f64, y: f64| -> f64 {
            let x0 = x.floor() as usize;
            let y0 = y.floor() as usize;
            let fx = x - x0 as f64;
            let fy = y - y0 as f64;
            let v = |ix: usize, iy: usize| values[iy.min(n - 1) * n + ix.min(n - 1)];
            v(x0, y0) * (1.0 - fx) * (1.0 - fy)
                + v(x0 + 1, y0) * fx * (1.0 - fy)
                + v(x0, y0 + 1) * (1.0 - fx) * fy
                + v(x0 + 1, y0 + 1) * fx * fy
        };
        for iy in 8..n - 8 {
            for ix in 8..n - 8 {
                let dx = ix as f64 - center;
                let dy = iy as f64 - center;
                if dx.hypot(dy) > 0.75 * center {
                    continue;
                }
                // rotated field at p equals base field at R(α)·p
                let rx = center + alpha.cos() * dx - alpha.sin() * dy;
                let ry = center + alpha.sin() * dx + alpha.cos() * dy;
                let expected = bilinear(&map_base.s0, rx, ry);
                let got = map_rot.s0[iy * n + ix];
                assert!(
                    (got - expected).abs() <= 1e-3 * peak + 1e-12,
                    "S0 mismatch at ({ix},{iy}): {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let state = SinglePhotonState::horizontal(0, DEFAULT_M_MAX);
        let grid = GridSpec {
            width: 32,
            height: 32,
            half_extent: 3.0,
        };
        assert!(matches!(
            render_mode(&state, &grid, 1.0),
            Err(FieldmapError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn unnormalized_state_rejected() {
        let state = SinglePhotonState::from_amplitudes(
            [(ModeLabel::new(Spin::L, 0), Complex64::new(2.0, 0.0))],
            DEFAULT_M_MAX,
        );
        assert!(matches!(
            render_mode(&state, &DEFAULT_GRID, 1.0),
            Err(FieldmapError::StateNotNormalized { .. })
        ));
    }

    #[test]
    fn export_csv_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec {
            width: 128,
            height: 128,
            half_extent: 3.0,
        };
        let state = SinglePhotonState::sam_oam_bell(DEFAULT_M_MAX);
        let field = render_mode(&state, &grid, 1.0).unwrap();
        let files = export_maps(&field, dir.path(), MapFormat::CsvGrid).unwrap();
        assert_eq!(files.len(), 5);

        // read-back equals the in-memory values
        let map = stokes(&field);
        let (w, h, he, values) = read_csv_grid(&dir.path().join("intensity.csv")).unwrap();
        assert_eq!((w, h), (128, 128));
        assert_abs_diff_eq!(he, 3.0, epsilon = 1e-12);
        for (a, b) in values.iter().zip(map.s0.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }

        // re-export is byte-identical
        let first = fs::read(dir.path().join("s2_over_s0.csv")).unwrap();
        export_maps(&field, dir.path(), MapFormat::CsvGrid).unwrap();
        let second = fs::read(dir.path().join("s2_over_s0.csv")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn export_png_writes_five_files() {
        let dir = tempfile::tempdir().unwrap();
        let state = SinglePhotonState::sam_oam_bell(DEFAULT_M_MAX);
        let grid = GridSpec {
            width: 64,
            height: 64,
            half_extent: 3.0,
        };
        let field = render_mode(&state, &grid, 1.0).unwrap();
        let files = export_maps(&field, dir.path(), MapFormat::Png).unwrap();
        assert_eq!(files.len(), 5);
        for f in files {
            assert!(f.exists());
            assert_eq!(f.extension().unwrap(), "png");
        }
    }

    #[test]
    fn csv_grid_parse_errors_carry_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "no header\n1,2\n").unwrap();
        match read_csv_grid(&path) {
            Err(FieldmapError::CsvGridParse { path: p, .. }) => assert_eq!(p, path),
            other => panic!("expected parse error, got {other:?}"),
        }
        match read_csv_grid(&dir.path().join("absent.csv")) {
            Err(FieldmapError::Io { .. }) => {}
            other => panic!("expected io error, got {other:?}"),
        }
    }

    #[test]
    fn lg_profiles_are_normalized() {
        // ∫ |LG_m(r)|² r dr dφ = 1 by quadrature
        for m in 0..=4u32 {
            let dr = 1e-3;
            let mut integral = 0.0;
            let mut r = dr / 2.0;
            while r < 8.0 {
                integral += lg_radial(r, m, 1.0).powi(2) * r * dr;
                r += dr;
            }
            assert_abs_diff_eq!(integral * 2.0 * PI, 1.0, epsilon = 1e-4);
        }
    }
}
