//! Synthetic mirror scans and spectra with shot noise, and the fits used to
//! read contrasts, phases and line widths back out of them.

use std::f64::consts::TAU;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::aberration::{averaged_extinction, self_interference_intensity, AberrationSpec, FringeModel};
use crate::error::{Error, Result};
use crate::types::{round_trip_phase, wrap_phase, AtomScatterer, CavityGeometry, MirrorSpec, ProbeSpec};
use crate::{fp, qed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSelector {
    Fp,
    Qed,
    Aberrated,
}

impl FromStr for ModelSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fp" => Ok(ModelSelector::Fp),
            "qed" => Ok(ModelSelector::Qed),
            "aberrated" => Ok(ModelSelector::Aberrated),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl ModelSelector {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelSelector::Fp => "fp",
            ModelSelector::Qed => "qed",
            ModelSelector::Aberrated => "aberrated",
        }
    }
}

/// Everything a scan needs besides the mirror positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanParams {
    pub mirror: MirrorSpec,
    pub atom: AtomScatterer,
    pub geometry: CavityGeometry,
    pub aberration: AberrationSpec,
    /// Fluorescence rate I₀ (counts/s) and its unaberrated contrast.
    pub fringe: FringeModel,
    /// Probe detuning (rad/s); only the qed model uses it.
    pub detuning: f64,
    /// Detector integration time per point (s).
    pub integration_time: f64,
    /// Background rate on the fluorescence detector (counts/s).
    pub dark_counts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRecord {
    /// Mirror displacement (m).
    pub position: f64,
    pub phi_l: f64,
    /// T / t²
    pub transmitted: f64,
    /// R / r²; `None` without a reflecting mirror or for the aberrated model.
    pub reflected: Option<f64>,
    /// Fluorescence counts in `integration_time`.
    pub fluorescence: f64,
    pub integration_time: f64,
}

impl ScanRecord {
    pub fn extinction(&self) -> f64 {
        1.0 - self.transmitted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Transmitted,
    Extinction,
    Reflected,
    Fluorescence,
}

impl Channel {
    pub fn value(&self, record: &ScanRecord) -> Option<f64> {
        match self {
            Channel::Transmitted => Some(record.transmitted),
            Channel::Extinction => Some(record.extinction()),
            Channel::Reflected => record.reflected,
            Channel::Fluorescence => Some(record.fluorescence),
        }
    }
}

/// Noiseless channel values at one round-trip phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelValues {
    pub transmitted: f64,
    pub reflected: Option<f64>,
    /// Fluorescence rate (counts/s), dark counts excluded.
    pub fluorescence_rate: f64,
}

/// Reflected field over the incident one when the atom line is detuned:
/// the cavity closure with the atomic round trip 2rε e^{iφ} replaced by the
/// detuned denominator (γ̃ + i(Δ̃ + δ))/γ.
fn qed_reflection_amplitude(atom: &AtomScatterer, mirror: &MirrorSpec, phi: f64, detuning: f64) -> Result<Complex64> {
    let rates = qed::modified_rates(atom, mirror, phi)?;
    let denom = (rates.complex() + Complex64::new(0.0, detuning)) / atom.gamma();
    if denom.norm_sqr() == 0.0 {
        return Err(Error::Singular);
    }
    let t = mirror.t();
    Ok(-mirror.r() + t * t * 2.0 * atom.epsilon() * Complex64::cis(phi) / denom)
}

/// Model values of every channel at `phi_l`.
pub fn model_point(model: ModelSelector, params: &ScanParams, phi_l: f64) -> Result<ChannelValues> {
    let r = params.mirror.r();
    let (transmitted, reflected) = match model {
        ModelSelector::Fp => {
            let t = fp::normalized_transmission(&params.mirror, &params.atom, phi_l)?;
            let refl = if r > 0.0 {
                Some(fp::reflection_off_cavity(&params.mirror, &params.atom, phi_l)? / (r * r))
            } else {
                None
            };
            (t, refl)
        }
        ModelSelector::Qed => {
            let probe = ProbeSpec::detuned(params.detuning);
            let t = qed::normalized_transmission(&params.atom, &params.mirror, phi_l, &probe)?;
            let refl = if r > 0.0 {
                let amp = qed_reflection_amplitude(&params.atom, &params.mirror, phi_l, params.detuning)?;
                Some(amp.norm_sqr() / (r * r))
            } else {
                None
            };
            (t, refl)
        }
        ModelSelector::Aberrated => (1.0 - averaged_extinction(&params.aberration, phi_l), None),
    };
    Ok(ChannelValues {
        transmitted,
        reflected,
        fluorescence_rate: self_interference_intensity(&params.fringe, &params.aberration, phi_l),
    })
}

fn poisson<R: rand::Rng>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        0.0
    } else {
        Poisson::new(mean).unwrap().sample(rng)
    }
}

/// Synthetic scan over mirror `positions` (m).
///
/// With `mean_counts > 0` the transmitted and reflected channels are
/// Poisson counts with mean value·mean_counts, divided back by
/// mean_counts, and the fluorescence is Poisson counts over the
/// integration time. With `mean_counts = 0` every channel is noiseless.
pub fn generate_scan(
    model: ModelSelector,
    params: &ScanParams,
    positions: &[f64],
    mean_counts: f64,
    seed: u64,
) -> Result<Vec<ScanRecord>> {
    if positions.is_empty() {
        return Err(Error::InsufficientData("scan needs at least one position".into()));
    }
    if !(mean_counts >= 0.0 && mean_counts.is_finite()) {
        return Err(Error::OutOfRange {
            name: "mean_counts",
            value: mean_counts,
            range: "[0, inf)",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = params.atom.wavelength();
    positions
        .iter()
        .map(|&position| {
            let phi_l = round_trip_phase(&params.geometry.with_scan_delta(position), lambda);
            let v = model_point(model, params, phi_l)?;
            let fluor_mean = (v.fluorescence_rate + params.dark_counts) * params.integration_time;
            let record = if mean_counts > 0.0 {
                let transmitted = poisson(v.transmitted * mean_counts, &mut rng) / mean_counts;
                let reflected = v.reflected.map(|x| poisson(x * mean_counts, &mut rng) / mean_counts);
                ScanRecord {
                    position,
                    phi_l,
                    transmitted,
                    reflected,
                    fluorescence: poisson(fluor_mean, &mut rng),
                    integration_time: params.integration_time,
                }
            } else {
                ScanRecord {
                    position,
                    phi_l,
                    transmitted: v.transmitted,
                    reflected: v.reflected,
                    fluorescence: fluor_mean,
                    integration_time: params.integration_time,
                }
            };
            Ok(record)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSample {
    /// rad/s
    pub detuning: f64,
    /// T / t²
    pub transmitted: f64,
}

impl SpectrumSample {
    pub fn extinction(&self) -> f64 {
        1.0 - self.transmitted
    }
}

/// Probe-frequency scan at the fixed mirror phase of `params.geometry`,
/// from the qed model, with the same noise convention as [`generate_scan`].
pub fn generate_spectrum(
    params: &ScanParams,
    detunings: &[f64],
    mean_counts: f64,
    seed: u64,
) -> Result<Vec<SpectrumSample>> {
    if detunings.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = round_trip_phase(&params.geometry, params.atom.wavelength());
    detunings
        .iter()
        .map(|&detuning| {
            let t = qed::normalized_transmission(&params.atom, &params.mirror, phi, &ProbeSpec::detuned(detuning))?;
            let transmitted = if mean_counts > 0.0 {
                poisson(t * mean_counts, &mut rng) / mean_counts
            } else {
                t
            };
            Ok(SpectrumSample { detuning, transmitted })
        })
        .collect()
}

/// y = a + b cos(φ - c) with b ≥ 0 and c ∈ (-π, π].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub rms_residual: f64,
    pub offset_stderr: f64,
    pub amplitude_stderr: f64,
    pub phase_stderr: f64,
    pub contrast_stderr: f64,
    pub samples: usize,
}

impl SinusoidFit {
    /// b / a
    pub fn contrast(&self) -> f64 {
        self.amplitude / self.offset
    }

    /// rms residual over the fringe amplitude.
    pub fn residual_over_amplitude(&self) -> f64 {
        self.rms_residual / self.amplitude
    }

    pub fn evaluate(&self, phi: f64) -> f64 {
        self.offset + self.amplitude * (phi - self.phase).cos()
    }
}

/// Least-squares fit of samples (φ_i, y_i) on the basis {1, cos φ, sin φ}.
pub fn fit_sinusoid_phases(phases: &[f64], values: &[f64]) -> Result<SinusoidFit> {
    let n = phases.len();
    if n != values.len() {
        return Err(Error::InsufficientData(format!(
            "{} phases for {} values",
            n,
            values.len()
        )));
    }
    if n < 4 {
        return Err(Error::InsufficientData(format!("sinusoid fit needs at least 4 samples, got {n}")));
    }
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => phases[i].cos(),
        _ => phases[i].sin(),
    });
    let y = DVector::from_column_slice(values);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient);
    }
    let beta = svd.solve(&y, 0.0).map_err(|_| Error::RankDeficient)?;
    let residual = &y - &design * &beta;
    let ssr = residual.norm_squared();
    let rms = (ssr / n as f64).sqrt();

    let (a, bc, bs) = (beta[0], beta[1], beta[2]);
    let b = bc.hypot(bs);
    let c = if b > 0.0 { wrap_phase(bs.atan2(bc)) } else { 0.0 };

    let gram: Matrix3<f64> = (design.transpose() * &design).fixed_view::<3, 3>(0, 0).into_owned();
    let sigma2 = if n > 3 { ssr / (n - 3) as f64 } else { 0.0 };
    let cov = gram.try_inverse().ok_or(Error::RankDeficient)? * sigma2;
    let spread = |g: Vector3<f64>| (g.transpose() * cov * g)[(0, 0)].max(0.0).sqrt();
    let (db, dc) = if b > 0.0 {
        (
            Vector3::new(0.0, bc / b, bs / b),
            Vector3::new(0.0, -bs / (b * b), bc / (b * b)),
        )
    } else {
        (Vector3::zeros(), Vector3::zeros())
    };
    let dv = if a != 0.0 && b > 0.0 {
        Vector3::new(-b / (a * a), bc / (a * b), bs / (a * b))
    } else {
        Vector3::zeros()
    };

    Ok(SinusoidFit {
        offset: a,
        amplitude: b,
        phase: c,
        rms_residual: rms,
        offset_stderr: cov[(0, 0)].max(0.0).sqrt(),
        amplitude_stderr: spread(db),
        phase_stderr: spread(dc),
        contrast_stderr: spread(dv),
        samples: n,
    })
}

/// Fits one channel of a scan against φ = 2π·position/period; the period
/// is λ/2 for a mirror scan and is not fitted.
pub fn fit_sinusoid(records: &[ScanRecord], channel: Channel, known_period: f64) -> Result<SinusoidFit> {
    if !(known_period > 0.0 && known_period.is_finite()) {
        return Err(Error::OutOfRange {
            name: "period",
            value: known_period,
            range: "(0, inf)",
        });
    }
    let mut phases = Vec::with_capacity(records.len());
    let mut values = Vec::with_capacity(records.len());
    for r in records {
        let v = channel.value(r).ok_or_else(|| {
            Error::InsufficientData(format!("channel {channel:?} is missing from the scan"))
        })?;
        phases.push(TAU * r.position / known_period);
        values.push(v);
    }
    fit_sinusoid_phases(&phases, &values)
}

/// Fringe phase of `a` minus that of `b`, wrapped into (-π, π].
pub fn phase_relation(a: &SinusoidFit, b: &SinusoidFit) -> f64 {
    wrap_phase(a.phase - b.phase)
}

/// Residual of a sinusoid fit to the extinction fringe, relative to the
/// mean transmitted signal 1 - a. Harmonics of the cavity line push it up
/// roughly as (2rε)².
pub fn line_shape_residual(extinction_fit: &SinusoidFit) -> f64 {
    extinction_fit.rms_residual / (1.0 - extinction_fit.offset).abs()
}

/// E(δ) = depth / (1 + ((δ - center)/w)²) with FWHM = 2w.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianFit {
    pub center: f64,
    pub fwhm: f64,
    pub depth: f64,
    pub center_stderr: f64,
    pub fwhm_stderr: f64,
    pub depth_stderr: f64,
    pub rms_residual: f64,
    pub iterations: usize,
    /// False for a flat spectrum or a depth not resolved above its error.
    pub reliable: bool,
}

impl LorentzianFit {
    pub fn evaluate(&self, delta: f64) -> f64 {
        let u = 2.0 * (delta - self.center) / self.fwhm;
        self.depth / (1.0 + u * u)
    }
}

const LM_MAX_ITER: usize = 200;
const LM_STEP_TOL: f64 = 1e-10;

/// Levenberg–Marquardt fit of a Lorentzian dip to extinction samples
/// (δ_i, E_i). Detunings are rescaled to O(1) internally; the start point
/// comes from the peak sample and the area under the curve.
pub fn fit_lorentzian(detunings: &[f64], extinction: &[f64]) -> Result<LorentzianFit> {
    let n = detunings.len();
    if n != extinction.len() {
        return Err(Error::InsufficientData(format!(
            "{} detunings for {} values",
            n,
            extinction.len()
        )));
    }
    if n < 5 {
        return Err(Error::InsufficientData(format!("Lorentzian fit needs at least 5 points, got {n}")));
    }
    let lo = detunings.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = detunings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let scale = 0.5 * (hi - lo);
    if !(scale > 0.0) {
        return Err(Error::InsufficientData("detunings do not span an interval".into()));
    }
    let x: Vec<f64> = detunings.iter().map(|d| (d - mid) / scale).collect();
    let y = extinction;

    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let level = ymax.abs().max(ymin.abs());
    if ymax <= 0.0 || ymax - ymin <= 1e-12 * level.max(f64::MIN_POSITIVE) {
        let mean = y.iter().sum::<f64>() / n as f64;
        let rms = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        return Ok(LorentzianFit {
            center: detunings[imax],
            fwhm: 0.0,
            depth: mean,
            center_stderr: 0.0,
            fwhm_stderr: 0.0,
            depth_stderr: 0.0,
            rms_residual: rms,
            iterations: 0,
            reliable: false,
        });
    }

    // Area under a Lorentzian is π·depth·w.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let area: f64 = order
        .windows(2)
        .map(|w| 0.5 * (y[w[0]] + y[w[1]]) * (x[w[1]] - x[w[0]]))
        .sum();
    let min_spacing = order
        .windows(2)
        .map(|w| x[w[1]] - x[w[0]])
        .filter(|d| *d > 0.0)
        .fold(2.0, f64::min);
    let w0 = (area / (std::f64::consts::PI * ymax)).clamp(min_spacing, 2.0);
    let mut p = Vector3::new(ymax, x[imax], w0);

    let residuals = |p: &Vector3<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let mut r = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, 3);
        for i in 0..n {
            let u = (x[i] - p[1]) / p[2];
            let l = 1.0 / (1.0 + u * u);
            r[i] = y[i] - p[0] * l;
            jac[(i, 0)] = l;
            jac[(i, 1)] = p[0] * 2.0 * u / p[2] * l * l;
            jac[(i, 2)] = p[0] * 2.0 * u * u / p[2] * l * l;
        }
        (r, jac)
    };

    let (mut r, mut jac) = residuals(&p);
    let mut ssr = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < LM_MAX_ITER {
        iterations += 1;
        let jtj: Matrix3<f64> = (jac.transpose() * &jac).fixed_view::<3, 3>(0, 0).into_owned();
        let jtr: Vector3<f64> = (jac.transpose() * &r).fixed_view::<3, 1>(0, 0).into_owned();
        let mut damped = jtj;
        for k in 0..3 {
            damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
        }
        let Some(step) = damped.try_inverse().map(|m| m * jtr) else {
            lambda *= 10.0;
            continue;
        };
        let relative = step.norm() / p.norm().max(f64::MIN_POSITIVE);
        let trial = p + step;
        if trial[2] > 0.0 {
            let (tr, tj) = residuals(&trial);
            let tssr = tr.norm_squared();
            if tssr <= ssr {
                p = trial;
                r = tr;
                jac = tj;
                ssr = tssr;
                lambda = (lambda / 10.0).max(1e-15);
                if relative < LM_STEP_TOL || ssr == 0.0 {
                    converged = true;
                    break;
                }
                continue;
            }
        }
        if relative < LM_STEP_TOL {
            converged = true;
            break;
        }
        lambda *= 10.0;
    }

    let jtj: Matrix3<f64> = (jac.transpose() * &jac).fixed_view::<3, 3>(0, 0).into_owned();
    let sigma2 = ssr / (n - 3) as f64;
    let cov = jtj.try_inverse().map(|m| m * sigma2).unwrap_or_else(Matrix3::zeros);
    let se = |k: usize| cov[(k, k)].max(0.0).sqrt();
    let depth_stderr = se(0);
    let fit = LorentzianFit {
        center: mid + scale * p[1],
        fwhm: 2.0 * scale * p[2],
        depth: p[0],
        center_stderr: scale * se(1),
        fwhm_stderr: 2.0 * scale * se(2),
        depth_stderr,
        rms_residual: (ssr / n as f64).sqrt(),
        iterations,
        reliable: p[0] > 3.0 * depth_stderr,
    };
    if converged {
        Ok(fit)
    } else {
        Err(Error::NoConvergence {
            iterations,
            best: Box::new(fit),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aberration::PhaseScreen;
    use crate::special::bessel_j0;
    use std::f64::consts::PI;

    const LAMBDA: f64 = 493e-9;
    const GAMMA: f64 = 2.0 * PI * 5.5e6;

    fn params(reflectivity: f64, eps: f64, eta: f64, eps_prime: f64) -> ScanParams {
        ScanParams {
            mirror: MirrorSpec::from_intensity_reflectivity(reflectivity).unwrap(),
            atom: AtomScatterer::new(eps, GAMMA, LAMBDA).unwrap(),
            geometry: CavityGeometry::new(0.3, 0.0, 0.0).unwrap(),
            aberration: AberrationSpec::from_eta(eta, LAMBDA, PhaseScreen::SinusoidalCorrugation, eps_prime)
                .unwrap(),
            fringe: FringeModel::ideal(2.0e4).unwrap(),
            detuning: 0.0,
            integration_time: 1.0,
            dark_counts: 0.0,
        }
    }

    fn positions(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.5 * LAMBDA * i as f64 / n as f64).collect()
    }

    #[test]
    fn model_selector_parsing() {
        assert_eq!("qed".parse::<ModelSelector>().unwrap(), ModelSelector::Qed);
        assert_eq!("fp".parse::<ModelSelector>().unwrap().as_str(), "fp");
        assert_eq!("air".parse::<ModelSelector>(), Err(Error::UnknownModel("air".into())));
    }

    #[test]
    fn noiseless_scan_is_the_model() {
        let p = params(0.997, 0.003387, 0.0, 0.003387);
        let recs = generate_scan(ModelSelector::Fp, &p, &positions(16), 0.0, 1).unwrap();
        for r in &recs {
            let want = fp::normalized_transmission(&p.mirror, &p.atom, r.phi_l).unwrap();
            assert_eq!(r.transmitted, want);
        }
    }

    #[test]
    fn uncoupled_scan_is_flat() {
        let p = params(0.997, 0.0, 0.0, 0.0);
        for model in [ModelSelector::Fp, ModelSelector::Qed, ModelSelector::Aberrated] {
            let recs = generate_scan(model, &p, &positions(16), 0.0, 1).unwrap();
            assert!(recs.iter().all(|r| r.transmitted == 1.0), "{model:?}");
        }
    }

    #[test]
    fn scan_rejects_bad_input() {
        let p = params(0.997, 0.01, 0.0, 0.0);
        assert!(generate_scan(ModelSelector::Fp, &p, &[], 0.0, 1).is_err());
        assert!(generate_scan(ModelSelector::Fp, &p, &[0.0], -1.0, 1).is_err());
    }

    #[test]
    fn noisy_scans_are_reproducible_integers() {
        let p = params(0.997, 0.003387, 1.3, 0.0034);
        let a = generate_scan(ModelSelector::Aberrated, &p, &positions(32), 1e4, 9).unwrap();
        let b = generate_scan(ModelSelector::Aberrated, &p, &positions(32), 1e4, 9).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert_eq!(r.fluorescence.fract(), 0.0);
            assert!(((r.transmitted * 1e4).round() - r.transmitted * 1e4).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_sinusoid_is_recovered() {
        let phases: Vec<f64> = (0..20).map(|i| TAU * i as f64 / 20.0).collect();
        let values: Vec<f64> = phases.iter().map(|p| 2.0 + 0.7 * (p - 1.1).cos()).collect();
        let fit = fit_sinusoid_phases(&phases, &values).unwrap();
        assert!((fit.offset - 2.0).abs() < 1e-12);
        assert!((fit.amplitude - 0.7).abs() < 1e-12);
        assert!((fit.phase - 1.1).abs() < 1e-12);
        assert!(fit.rms_residual < 1e-12);
        assert!((fit.contrast() - 0.35).abs() < 1e-12);
    }

    #[test]
    fn degenerate_design_is_rejected() {
        let phases = vec![0.3; 6];
        assert_eq!(fit_sinusoid_phases(&phases, &[1.0; 6]), Err(Error::RankDeficient));
        let wrapped: Vec<f64> = (0..6).map(|k| 0.3 + TAU * k as f64).collect();
        assert_eq!(fit_sinusoid_phases(&wrapped, &[1.0; 6]), Err(Error::RankDeficient));
        assert!(matches!(fit_sinusoid_phases(&[0.0, 1.0, 2.0], &[1.0; 3]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn identical_fits_have_zero_phase_relation() {
        let p = params(0.75, 0.05, 0.0, 0.05);
        let recs = generate_scan(ModelSelector::Fp, &p, &positions(64), 0.0, 1).unwrap();
        let f = fit_sinusoid(&recs, Channel::Transmitted, LAMBDA / 2.0).unwrap();
        assert_eq!(phase_relation(&f, &f), 0.0);
    }

    #[test]
    fn aberrated_scan_channels() {
        let eps_p = 0.0034;
        let p = params(0.997, 0.003387, 1.3, eps_p);
        let recs = generate_scan(ModelSelector::Aberrated, &p, &positions(128), 0.0, 1).unwrap();
        let e: Vec<f64> = recs.iter().map(|r| r.extinction()).collect();
        let emax = e.iter().copied().fold(f64::MIN, f64::max);
        let emin = e.iter().copied().fold(f64::MAX, f64::min);
        assert!(emin.abs() < 1e-15);
        assert!((emax - 8.0 * eps_p * bessel_j0(1.3)).abs() < 1e-15);
        let fl = fit_sinusoid(&recs, Channel::Fluorescence, LAMBDA / 2.0).unwrap();
        assert!((fl.contrast() - bessel_j0(1.3)).abs() < 1e-12);
    }

    #[test]
    fn fit_contrast_matches_extrema_contrast() {
        let p = params(0.997, 0.003387, 1.3, 0.0034);
        let recs = generate_scan(ModelSelector::Aberrated, &p, &positions(64), 0.0, 1).unwrap();
        let fl: Vec<f64> = recs.iter().map(|r| r.fluorescence).collect();
        let e: Vec<f64> = recs.iter().map(|r| r.extinction()).collect();
        let v = crate::aberration::contrast(&fl).unwrap();
        let vp = crate::aberration::contrast(&e).unwrap();
        let fit_fl = fit_sinusoid(&recs, Channel::Fluorescence, LAMBDA / 2.0).unwrap();
        let fit_e = fit_sinusoid(&recs, Channel::Extinction, LAMBDA / 2.0).unwrap();
        assert!((fit_fl.contrast() - v).abs() < 1e-10);
        assert!((fit_e.contrast() - vp).abs() < 1e-10);
    }

    #[test]
    fn noisy_contrast_within_three_stderr() {
        let p = params(0.997, 0.003387, 1.0, 0.0034);
        let mut p = p;
        p.integration_time = 0.5;
        let recs = generate_scan(ModelSelector::Aberrated, &p, &positions(64), 1e4, 21).unwrap();
        let fit = fit_sinusoid(&recs, Channel::Fluorescence, LAMBDA / 2.0).unwrap();
        let truth = bessel_j0(1.0);
        assert!((fit.contrast() - truth).abs() < 3.0 * fit.contrast_stderr, "{} ± {}", fit.contrast(), fit.contrast_stderr);
    }

    #[test]
    fn reflected_fringe_is_out_of_phase() {
        let p = params(0.75, 0.0034, 0.0, 0.0034);
        let recs = generate_scan(ModelSelector::Fp, &p, &positions(128), 0.0, 1).unwrap();
        let t = fit_sinusoid(&recs, Channel::Transmitted, LAMBDA / 2.0).unwrap();
        let r = fit_sinusoid(&recs, Channel::Reflected, LAMBDA / 2.0).unwrap();
        assert!((phase_relation(&t, &r).abs() - PI).abs() < 0.01);
    }

    #[test]
    fn qed_reflection_matches_cavity_on_resonance() {
        let p = params(0.75, 0.1, 0.0, 0.0);
        for i in 0..8 {
            let phi = TAU * i as f64 / 8.0;
            let q = model_point(ModelSelector::Qed, &p, phi).unwrap();
            let f = model_point(ModelSelector::Fp, &p, phi).unwrap();
            assert!((q.transmitted - f.transmitted).abs() < 1e-14);
            assert!((q.reflected.unwrap() - f.reflected.unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn line_shape_distortion_grows_with_coupling() {
        let mut residual = vec![];
        for eps in [0.005, 0.1] {
            let p = params(0.997, eps, 0.0, 0.0);
            let recs = generate_scan(ModelSelector::Qed, &p, &positions(256), 0.0, 1).unwrap();
            let fit = fit_sinusoid(&recs, Channel::Extinction, LAMBDA / 2.0).unwrap();
            residual.push((line_shape_residual(&fit), fit.residual_over_amplitude()));
        }
        assert!(residual[0].0 < 1e-3);
        assert!(residual[1].0 > 1e-2);
        assert!(residual[1].1 > 1e-2);
    }

    #[test]
    fn poisson_variance_matches_mean() {
        let p = params(0.997, 0.003387, 0.0, 0.0);
        let n = 10_000;
        let counts = 400.0;
        let samples: Vec<f64> = (0..n)
            .map(|k| generate_scan(ModelSelector::Fp, &p, &[0.0], counts, k as u64).unwrap()[0].transmitted * counts)
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Var of the sample variance of a Poisson(μ) variable ≈ (2μ² + μ)/n.
        let sigma = ((2.0 * mean * mean + mean) / n as f64).sqrt();
        assert!((var - mean).abs() < 5.0 * sigma, "var {var} mean {mean} sigma {sigma}");
    }

    fn lorentz_grid(n: usize, half_span: f64) -> Vec<f64> {
        (0..n).map(|i| -half_span + 2.0 * half_span * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn lorentzian_exact_recovery() {
        let d = lorentz_grid(101, 5e7);
        let e: Vec<f64> = d.iter().map(|x| 0.0135 / (1.0 + ((x - 3e6) / 3.4e7).powi(2))).collect();
        let fit = fit_lorentzian(&d, &e).unwrap();
        assert!((fit.depth - 0.0135).abs() < 1e-12);
        assert!((fit.fwhm - 6.8e7).abs() < 1e-3);
        assert!((fit.center - 3e6).abs() < 1e-3);
        assert!(fit.reliable);
    }

    #[test]
    fn lorentzian_flat_is_flagged() {
        let d = lorentz_grid(21, 1.0);
        let fit = fit_lorentzian(&d, &[0.0; 21]).unwrap();
        assert!(!fit.reliable);
        assert_eq!(fit.depth, 0.0);
        assert!(matches!(fit_lorentzian(&d[..4], &[0.0; 4]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn noisy_lorentzian_within_three_stderr() {
        let mut p = params(0.0, 0.003387, 0.0, 0.0);
        p.mirror = MirrorSpec::absent();
        let d = lorentz_grid(201, 8.0 * GAMMA);
        let spec = generate_spectrum(&p, &d, 1e5, 4).unwrap();
        let e: Vec<f64> = spec.iter().map(|s| s.extinction()).collect();
        let fit = fit_lorentzian(&d, &e).unwrap();
        assert!((fit.fwhm - 2.0 * GAMMA).abs() < 3.0 * fit.fwhm_stderr, "{} ± {}", fit.fwhm, fit.fwhm_stderr);
        let depth = 4.0 * 0.003387 * (1.0 - 0.003387);
        assert!((fit.depth - depth).abs() < 3.0 * fit.depth_stderr);
    }
}
