//! JSON run configuration. Every key carries its unit; unknown keys are
//! rejected so a typo cannot silently fall back to a default.

use std::f64::consts::PI;
use std::path::Path;

use atom_mirror::aberration::{AberrationSpec, FringeModel, PhaseScreen};
use atom_mirror::scan::{ModelSelector, ScanParams};
use atom_mirror::{AtomScatterer, CavityGeometry, MirrorSpec};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenName {
    Sinusoidal,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceGrid {
    pub epsilon_points: usize,
    pub r_points: usize,
    pub phi_points: usize,
    pub max_two_r_eps: f64,
}

impl Default for EquivalenceGrid {
    fn default() -> Self {
        Self {
            epsilon_points: 20,
            r_points: 20,
            phi_points: 64,
            max_two_r_eps: 0.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub wavelength_nm: f64,
    pub distance_m: f64,
    /// Intensity reflectivity |r|².
    pub mirror_reflectivity: f64,
    pub epsilon: f64,
    /// Defaults to `epsilon`.
    pub epsilon_prime: Option<f64>,
    pub eta: f64,
    pub aberration_model: ScreenName,
    /// γ/2π in Hz; the free-space extinction line has FWHM 2·gamma_hz.
    pub gamma_hz: f64,
    pub phase_offset_rad: f64,
    pub scan_start_nm: f64,
    pub scan_stop_nm: f64,
    pub scan_points: usize,
    pub detuning_start_hz: f64,
    pub detuning_stop_hz: f64,
    pub detuning_points: usize,
    /// Probe detuning during a mirror scan.
    pub probe_detuning_hz: f64,
    pub seed: u64,
    pub mean_counts: f64,
    pub fluorescence_rate_hz: f64,
    pub fringe_contrast: f64,
    pub integration_time_s: f64,
    pub dark_counts_hz: f64,
    pub model: String,
    pub lmax: usize,
    pub mc_samples: usize,
    pub eta_grid: Vec<f64>,
    pub equivalence: EquivalenceGrid,
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            wavelength_nm: 493.0,
            distance_m: 0.3,
            mirror_reflectivity: 0.997,
            epsilon: 0.003387,
            epsilon_prime: None,
            eta: 0.0,
            aberration_model: ScreenName::Sinusoidal,
            gamma_hz: 5.5e6,
            phase_offset_rad: 0.0,
            scan_start_nm: 0.0,
            scan_stop_nm: 493.0,
            scan_points: 128,
            detuning_start_hz: -50e6,
            detuning_stop_hz: 50e6,
            detuning_points: 201,
            probe_detuning_hz: 0.0,
            seed: 1,
            mean_counts: 0.0,
            fluorescence_rate_hz: 2.0e4,
            fringe_contrast: 1.0,
            integration_time_s: 1.0,
            dark_counts_hz: 0.0,
            model: "fp".into(),
            lmax: 200,
            mc_samples: 1_000_000,
            eta_grid: vec![0.5, 1.0, 1.5, 2.40483],
            equivalence: EquivalenceGrid::default(),
            svg: false,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every range before anything is computed.
    pub fn validate(&self) -> Result<(), CliError> {
        let finite = [
            ("wavelength_nm", self.wavelength_nm),
            ("distance_m", self.distance_m),
            ("gamma_hz", self.gamma_hz),
            ("phase_offset_rad", self.phase_offset_rad),
            ("scan_start_nm", self.scan_start_nm),
            ("scan_stop_nm", self.scan_stop_nm),
            ("detuning_start_hz", self.detuning_start_hz),
            ("detuning_stop_hz", self.detuning_stop_hz),
            ("probe_detuning_hz", self.probe_detuning_hz),
            ("mean_counts", self.mean_counts),
            ("fluorescence_rate_hz", self.fluorescence_rate_hz),
            ("integration_time_s", self.integration_time_s),
            ("dark_counts_hz", self.dark_counts_hz),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite, got {v}")));
            }
        }
        if self.wavelength_nm <= 0.0 || self.distance_m <= 0.0 || self.gamma_hz <= 0.0 {
            return Err(invalid("wavelength_nm, distance_m and gamma_hz must be positive"));
        }
        if !(0.0..=1.0).contains(&self.mirror_reflectivity) {
            return Err(invalid(format!(
                "mirror_reflectivity must be in [0, 1], got {}",
                self.mirror_reflectivity
            )));
        }
        if !(0.0..=0.5).contains(&self.epsilon) {
            return Err(invalid(format!("epsilon must be in [0, 0.5], got {}", self.epsilon)));
        }
        let eps_p = self.epsilon_prime();
        if !(0.0..=self.epsilon).contains(&eps_p) {
            return Err(invalid(format!("epsilon_prime must be in [0, epsilon], got {eps_p}")));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.fringe_contrast) {
            return Err(invalid("fringe_contrast must be in [0, 1]"));
        }
        if self.mean_counts < 0.0 || self.fluorescence_rate_hz < 0.0 || self.dark_counts_hz < 0.0 {
            return Err(invalid("count rates must be non-negative"));
        }
        if self.integration_time_s <= 0.0 {
            return Err(invalid("integration_time_s must be positive"));
        }
        if self.scan_points < 4 {
            return Err(invalid("scan_points must be at least 4"));
        }
        if self.scan_stop_nm <= self.scan_start_nm {
            return Err(invalid("scan_stop_nm must exceed scan_start_nm"));
        }
        if self.detuning_points < 5 {
            return Err(invalid("detuning_points must be at least 5"));
        }
        if self.detuning_stop_hz <= self.detuning_start_hz {
            return Err(invalid("detuning_stop_hz must exceed detuning_start_hz"));
        }
        self.model
            .parse::<ModelSelector>()
            .map_err(|e| invalid(e.to_string()))?;
        if self.lmax == 0 {
            return Err(invalid("lmax must be positive"));
        }
        if self.mc_samples == 0 {
            return Err(invalid("mc_samples must be positive"));
        }
        if self.eta_grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(invalid("eta_grid entries must be finite and >= 0"));
        }
        let g = &self.equivalence;
        if g.epsilon_points < 1 || g.r_points < 1 || g.phi_points < 1 {
            return Err(invalid("equivalence grid needs at least one point per axis"));
        }
        if !(g.max_two_r_eps > 0.0 && g.max_two_r_eps < 1.0) {
            return Err(invalid("equivalence.max_two_r_eps must be in (0, 1)"));
        }
        Ok(())
    }

    pub fn epsilon_prime(&self) -> f64 {
        self.epsilon_prime.unwrap_or(self.epsilon)
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_nm * 1e-9
    }

    /// γ in rad/s.
    pub fn gamma_rad_s(&self) -> f64 {
        2.0 * PI * self.gamma_hz
    }

    pub fn model(&self) -> ModelSelector {
        self.model.parse().expect("validated")
    }

    pub fn screen(&self) -> PhaseScreen {
        match self.aberration_model {
            ScreenName::Sinusoidal => PhaseScreen::SinusoidalCorrugation,
            ScreenName::Gaussian => PhaseScreen::GaussianPhase,
        }
    }

    pub fn mirror(&self) -> Result<MirrorSpec, CliError> {
        Ok(MirrorSpec::from_intensity_reflectivity(self.mirror_reflectivity)?)
    }

    pub fn atom(&self) -> Result<AtomScatterer, CliError> {
        Ok(AtomScatterer::new(self.epsilon, self.gamma_rad_s(), self.wavelength_m())?)
    }

    pub fn aberration(&self) -> Result<AberrationSpec, CliError> {
        Ok(AberrationSpec::from_eta(
            self.eta,
            self.wavelength_m(),
            self.screen(),
            self.epsilon_prime(),
        )?)
    }

    pub fn scan_params(&self) -> Result<ScanParams, CliError> {
        Ok(ScanParams {
            mirror: self.mirror()?,
            atom: self.atom()?,
            geometry: CavityGeometry::new(self.distance_m, self.phase_offset_rad, 0.0)?,
            aberration: self.aberration()?,
            fringe: FringeModel::new(self.fluorescence_rate_hz, self.fringe_contrast)?,
            detuning: 2.0 * PI * self.probe_detuning_hz,
            integration_time: self.integration_time_s,
            dark_counts: self.dark_counts_hz,
        })
    }

    /// Mirror positions in metres.
    pub fn scan_positions(&self) -> Vec<f64> {
        linspace(self.scan_start_nm, self.scan_stop_nm, self.scan_points)
            .into_iter()
            .map(|x| x * 1e-9)
            .collect()
    }

    /// Probe detunings in Hz.
    pub fn detunings_hz(&self) -> Vec<f64> {
        linspace(self.detuning_start_hz, self.detuning_stop_hz, self.detuning_points)
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
