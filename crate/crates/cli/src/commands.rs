use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use atom_mirror::aberration::{mc_extinction_contrast, mc_fringe_contrast, AberrationSpec};
use atom_mirror::scan::{
    fit_lorentzian, fit_sinusoid, generate_scan, generate_spectrum, line_shape_residual, phase_relation, Channel,
    LorentzianFit, SinusoidFit,
};
use atom_mirror::{aberration, fp, qed, reduce_phase, AtomScatterer, Error, MirrorSpec, ProbeSpec};
use serde::Serialize;

use crate::config::{linspace, RunConfig};
use crate::output::{fmt_float, fmt_opt, write_csv, write_json};
use crate::svg::{line_plot, Series};
use crate::CliError;

/// Result of one command: whether its numerical check passed and the files
/// it wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
}

const HZ: f64 = 1.0 / (2.0 * PI);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorentzianSummary {
    pub converged: bool,
    pub reliable: bool,
    pub center_hz: f64,
    pub center_stderr_hz: f64,
    pub fwhm_hz: f64,
    pub fwhm_stderr_hz: f64,
    pub depth: f64,
    pub depth_stderr: f64,
    pub iterations: usize,
}

impl LorentzianSummary {
    fn new(fit: &LorentzianFit, converged: bool) -> Self {
        Self {
            converged,
            reliable: fit.reliable && converged,
            center_hz: fit.center,
            center_stderr_hz: fit.center_stderr,
            fwhm_hz: fit.fwhm,
            fwhm_stderr_hz: fit.fwhm_stderr,
            depth: fit.depth,
            depth_stderr: fit.depth_stderr,
            iterations: fit.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    /// Extracted from the noiseless model line.
    pub fwhm_hz: Option<f64>,
    pub peak_extinction: f64,
    pub peak_detuning_hz: f64,
    /// Lorentzian fit to the written (possibly noisy) samples.
    pub fit: LorentzianSummary,
    pub mean_counts: f64,
    pub points: usize,
    pub seed: u64,
}

pub fn spectrum(config: &RunConfig, out: &Path) -> Result<(SpectrumSummary, Outcome), CliError> {
    let params = config.scan_params()?;
    let phi = reduce_phase(config.phase_offset_rad);
    let detunings_hz = config.detunings_hz();
    let detunings: Vec<f64> = detunings_hz.iter().map(|d| d / HZ).collect();

    let model = qed::spectrum(&params.atom, &params.mirror, phi, &detunings)?;
    let samples = generate_spectrum(&params, &detunings, config.mean_counts, config.seed)?;
    let extinction: Vec<f64> = samples.iter().map(|s| s.extinction()).collect();
    let fit = match fit_lorentzian(&detunings_hz, &extinction) {
        Ok(fit) => LorentzianSummary::new(&fit, true),
        Err(Error::NoConvergence { best, .. }) => LorentzianSummary::new(&best, false),
        Err(e) => return Err(e.into()),
    };

    let rows: Vec<Vec<String>> = samples
        .iter()
        .zip(&detunings_hz)
        .map(|(s, &d)| vec![fmt_float(d), fmt_float(s.transmitted), fmt_float(s.extinction())])
        .collect();
    let mut files = vec![write_csv(&out.join("spectrum.csv"), &["detuning_hz", "T_norm", "E"], &rows)?];

    let summary = SpectrumSummary {
        fwhm_hz: model.fwhm.map(|w| w * HZ),
        peak_extinction: model.peak_extinction,
        peak_detuning_hz: model.peak_detuning * HZ,
        fit,
        mean_counts: config.mean_counts,
        points: detunings.len(),
        seed: config.seed,
    };
    files.push(write_json(&out.join("spectrum.json"), &summary)?);
    if config.svg {
        let svg = line_plot(
            "Extinction spectrum",
            "detuning (Hz)",
            &[Series { label: "E", x: &detunings_hz, y: &extinction }],
        );
        files.push(write_text(&out.join("spectrum.svg"), &svg)?);
    }
    Ok((summary, Outcome { passed: true, files }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub model: String,
    /// Fluorescence fringe contrast from the sinusoid fit.
    #[serde(rename = "V")]
    pub v: Option<f64>,
    #[serde(rename = "V_stderr")]
    pub v_stderr: Option<f64>,
    /// Extinction fringe contrast from the sinusoid fit.
    #[serde(rename = "V_prime")]
    pub v_prime: Option<f64>,
    #[serde(rename = "V_prime_stderr")]
    pub v_prime_stderr: Option<f64>,
    /// (max - min)/(max + min) of the sampled curves.
    #[serde(rename = "V_extrema")]
    pub v_extrema: Option<f64>,
    #[serde(rename = "V_prime_extrema")]
    pub v_prime_extrema: Option<f64>,
    /// Transmitted minus reflected fringe phase.
    pub phase_relation: Option<f64>,
    /// Transmitted minus fluorescence fringe phase.
    pub phase_relation_fluorescence: Option<f64>,
    pub line_shape_residual: Option<f64>,
    pub j0_eta: f64,
    pub points: usize,
    pub mean_counts: f64,
    pub seed: u64,
}

fn resolved(fit: &SinusoidFit) -> bool {
    fit.amplitude > 1e-12 * fit.offset.abs().max(1e-300)
}

fn contrast_of(fit: &Option<SinusoidFit>) -> (Option<f64>, Option<f64>) {
    match fit {
        Some(f) if resolved(f) && f.offset != 0.0 => (Some(f.contrast()), Some(f.contrast_stderr)),
        _ => (None, None),
    }
}

pub fn scan(config: &RunConfig, out: &Path) -> Result<(ScanSummary, Outcome), CliError> {
    let params = config.scan_params()?;
    let model = config.model();
    let positions = config.scan_positions();
    let records = generate_scan(model, &params, &positions, config.mean_counts, config.seed)?;
    let period = 0.5 * config.wavelength_m();

    let fit = |ch: Channel| fit_sinusoid(&records, ch, period).ok();
    let transmitted = fit(Channel::Transmitted);
    let extinction = fit(Channel::Extinction);
    let reflected = if records.iter().all(|r| r.reflected.is_some()) {
        fit(Channel::Reflected)
    } else {
        None
    };
    let fluorescence = fit(Channel::Fluorescence);

    let relation = |a: &Option<SinusoidFit>, b: &Option<SinusoidFit>| match (a, b) {
        (Some(a), Some(b)) if resolved(a) && resolved(b) => Some(phase_relation(a, b)),
        _ => None,
    };
    let e_curve: Vec<f64> = records.iter().map(|r| r.extinction()).collect();
    let f_curve: Vec<f64> = records.iter().map(|r| r.fluorescence).collect();
    let (v, v_stderr) = contrast_of(&fluorescence);
    let (v_prime, v_prime_stderr) = contrast_of(&extinction);

    let summary = ScanSummary {
        model: model.as_str().to_string(),
        v,
        v_stderr,
        v_prime,
        v_prime_stderr,
        v_extrema: aberration::contrast(&f_curve).ok(),
        v_prime_extrema: aberration::contrast(&e_curve).ok(),
        phase_relation: relation(&transmitted, &reflected),
        phase_relation_fluorescence: relation(&transmitted, &fluorescence),
        line_shape_residual: extinction.as_ref().filter(|f| resolved(f)).map(line_shape_residual),
        j0_eta: params.aberration.model().mean_cos(params.aberration.eta()),
        points: records.len(),
        mean_counts: config.mean_counts,
        seed: config.seed,
    };

    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                fmt_float(r.position * 1e9),
                fmt_float(r.phi_l),
                fmt_float(r.transmitted),
                fmt_float(r.extinction()),
                fmt_opt(r.reflected),
                fmt_float(r.fluorescence),
            ]
        })
        .collect();
    let mut files = vec![write_csv(
        &out.join("scan.csv"),
        &["position_nm", "phi_L", "T_norm", "E", "R_norm", "fluor_counts"],
        &rows,
    )?];
    files.push(write_json(&out.join("scan.json"), &summary)?);
    if config.svg {
        let x: Vec<f64> = records.iter().map(|r| r.position * 1e9).collect();
        let t: Vec<f64> = records.iter().map(|r| r.transmitted).collect();
        let svg = line_plot(
            "Mirror scan",
            "mirror position (nm)",
            &[Series { label: "T/t²", x: &x, y: &t }],
        );
        files.push(write_text(&out.join("scan.svg"), &svg)?);
    }
    Ok((summary, Outcome { passed: true, files }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceSummary {
    /// max |T_qed(δ = 0) - T_fp| over the evaluated points.
    pub max_abs_diff: f64,
    /// max |T_fp - bounce series| over the same points.
    pub bounce_max_abs_diff: f64,
    pub grid_size: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub tolerance: f64,
    pub pass: bool,
}

pub const EQUIVALENCE_TOL: f64 = 1e-12;

/// Grid comparison of the two transmission models and the bounce series.
pub fn equivalence_grid(config: &RunConfig) -> Result<EquivalenceSummary, CliError> {
    let g = &config.equivalence;
    let eps_axis = linspace(0.0, 0.5, g.epsilon_points);
    let r_axis = linspace(0.0, 1.0, g.r_points);
    let phi_axis: Vec<f64> = (0..g.phi_points).map(|k| TAU * k as f64 / g.phi_points as f64).collect();
    let gamma = config.gamma_rad_s();
    let wavelength = config.wavelength_m();

    let mut max_diff = 0.0f64;
    let mut bounce_diff = 0.0f64;
    let mut evaluated = 0;
    let mut skipped = 0;
    for &eps in &eps_axis {
        let atom = AtomScatterer::new(eps, gamma, wavelength)?;
        for &r in &r_axis {
            let mirror = MirrorSpec::lossless(r)?;
            if 2.0 * r * eps > g.max_two_r_eps {
                skipped += phi_axis.len();
                continue;
            }
            for &phi in &phi_axis {
                let cavity = fp::transmission_exact(&mirror, &atom, phi)?;
                let boundary = qed::qed_transmission(&atom, &mirror, phi, &ProbeSpec::resonant())?;
                let series = fp::multiple_bounce_transmission(&mirror, &atom, phi, 1e-17)?;
                max_diff = max_diff.max((cavity - boundary).abs());
                bounce_diff = bounce_diff.max((cavity - series).abs());
                evaluated += 1;
            }
        }
    }
    let pass = max_diff < EQUIVALENCE_TOL && bounce_diff < EQUIVALENCE_TOL;
    Ok(EquivalenceSummary {
        max_abs_diff: max_diff,
        bounce_max_abs_diff: bounce_diff,
        grid_size: eps_axis.len() * r_axis.len() * phi_axis.len(),
        evaluated,
        skipped,
        tolerance: EQUIVALENCE_TOL,
        pass,
    })
}

pub fn equivalence(config: &RunConfig, out: &Path) -> Result<(EquivalenceSummary, Outcome), CliError> {
    let summary = equivalence_grid(config)?;
    let file = write_json(&out.join("equivalence.json"), &summary)?;
    let passed = summary.pass;
    Ok((summary, Outcome { passed, files: vec![file] }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AberrationRow {
    pub eta: f64,
    pub v_mc: f64,
    pub v_analytic: f64,
    pub vp_mc: f64,
    pub stderr: f64,
    pub vp_stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AberrationSummary {
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<AberrationRow>,
    pub pass: bool,
}

/// Phases at which the extinction contrast is sampled; φ_L = 0 is included.
const VP_PHASES: usize = 8;

pub fn aberration(config: &RunConfig, out: &Path) -> Result<(AberrationSummary, Outcome), CliError> {
    let phases: Vec<f64> = (0..VP_PHASES).map(|k| TAU * k as f64 / VP_PHASES as f64).collect();
    let mut rows = Vec::with_capacity(config.eta_grid.len());
    for &eta in &config.eta_grid {
        let spec = AberrationSpec::from_eta(eta, config.wavelength_m(), config.screen(), config.epsilon_prime())?;
        let v = mc_fringe_contrast(&spec, config.mc_samples, config.seed)?;
        let analytic = spec.model().mean_cos(eta);
        let (vp, vp_stderr) = match mc_extinction_contrast(&spec, &phases, config.mc_samples, config.seed) {
            Ok(e) => (e.mean, e.stderr),
            Err(Error::FlatCurve) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e.into()),
        };
        rows.push(AberrationRow {
            eta,
            v_mc: v.mean,
            v_analytic: analytic,
            vp_mc: vp,
            stderr: v.stderr,
            vp_stderr,
            pass: (v.mean - analytic).abs() <= 3.0 * v.stderr,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_float(r.eta),
                fmt_float(r.v_mc),
                fmt_float(r.v_analytic),
                fmt_float(r.vp_mc),
                fmt_float(r.stderr),
            ]
        })
        .collect();
    let mut files = vec![write_csv(
        &out.join("aberration.csv"),
        &["eta", "V_mc", "V_analytic", "Vp_mc", "stderr"],
        &csv_rows,
    )?];
    let summary = AberrationSummary {
        samples: config.mc_samples,
        seed: config.seed,
        rows,
        pass,
    };
    files.push(write_json(&out.join("aberration.json"), &summary)?);
    Ok((summary, Outcome { passed: pass, files }))
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf, CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}
