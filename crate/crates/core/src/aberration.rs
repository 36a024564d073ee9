//! Lens aberrations: random per-ray phase errors φ′ across the collection
//! lens, their Monte-Carlo average, and the closed-form Bessel-averaged
//! extinction and self-interference fringes.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{check_range, Error, Result};
use crate::special::bessel_j0;
use crate::types::{AtomScatterer, MirrorSpec};

/// Samples per independent RNG stream.
pub const CHUNK_SAMPLES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseScreen {
    /// φ′ = η cos u with u uniform on [0, 2π); ⟨e^{iφ′}⟩ = J₀(η).
    SinusoidalCorrugation,
    /// φ′ normal with standard deviation η; ⟨e^{iφ′}⟩ = exp(-η²/2).
    GaussianPhase,
}

impl PhaseScreen {
    /// Exact ensemble mean ⟨cos φ′⟩.
    pub fn mean_cos(&self, eta: f64) -> f64 {
        match self {
            PhaseScreen::SinusoidalCorrugation => bessel_j0(eta),
            PhaseScreen::GaussianPhase => (-0.5 * eta * eta).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AberrationSpec {
    sigma_ab: f64,
    eta: f64,
    model: PhaseScreen,
    epsilon_prime: f64,
}

impl AberrationSpec {
    /// From the dimensionless strength η; σ_ab = ηλ/2π.
    pub fn from_eta(eta: f64, wavelength: f64, model: PhaseScreen, epsilon_prime: f64) -> Result<Self> {
        let eta = check_range("eta", eta, 0.0, f64::MAX, "[0, inf)")?;
        let wavelength = check_range("wavelength", wavelength, f64::MIN_POSITIVE, f64::MAX, "(0, inf)")?;
        let epsilon_prime = check_range("epsilon_prime", epsilon_prime, 0.0, 0.5, "[0, 0.5]")?;
        Ok(Self {
            sigma_ab: eta * wavelength / TAU,
            eta,
            model,
            epsilon_prime,
        })
    }

    /// From the rms wavefront error σ_ab (m); η = 2πσ_ab/λ.
    pub fn from_sigma(sigma_ab: f64, wavelength: f64, model: PhaseScreen, epsilon_prime: f64) -> Result<Self> {
        let sigma_ab = check_range("sigma_ab", sigma_ab, 0.0, f64::MAX, "[0, inf)")?;
        let wavelength = check_range("wavelength", wavelength, f64::MIN_POSITIVE, f64::MAX, "(0, inf)")?;
        let mut spec = Self::from_eta(TAU * sigma_ab / wavelength, wavelength, model, epsilon_prime)?;
        spec.sigma_ab = sigma_ab;
        Ok(spec)
    }

    /// Checks ε′ ≤ ε for the unaberrated coupling of `atom`.
    pub fn check_against(self, atom: &AtomScatterer) -> Result<Self> {
        if self.epsilon_prime > atom.epsilon() {
            return Err(Error::OutOfRange {
                name: "epsilon_prime",
                value: self.epsilon_prime,
                range: "[0, epsilon]",
            });
        }
        Ok(self)
    }

    pub fn sigma_ab(&self) -> f64 {
        self.sigma_ab
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn model(&self) -> PhaseScreen {
        self.model
    }

    pub fn epsilon_prime(&self) -> f64 {
        self.epsilon_prime
    }

    /// ε̄ = ε′⟨cos φ′⟩, which is ε′J₀(η) for the corrugation model.
    pub fn effective_epsilon(&self) -> f64 {
        self.epsilon_prime * self.model.mean_cos(self.eta)
    }
}

/// Self-interference fringe I = I₀(1 + V cos φ_L). `contrast` is the
/// contrast without aberrations; a spatial-mode filter lowers it below 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeModel {
    i0: f64,
    contrast: f64,
}

impl FringeModel {
    pub fn new(i0: f64, contrast: f64) -> Result<Self> {
        let i0 = check_range("I0", i0, 0.0, f64::MAX, "[0, inf)")?;
        let contrast = check_range("contrast_V", contrast, 0.0, 1.0, "[0, 1]")?;
        Ok(Self { i0, contrast })
    }

    pub fn ideal(i0: f64) -> Result<Self> {
        Self::new(i0, 1.0)
    }

    pub fn i0(&self) -> f64 {
        self.i0
    }

    pub fn contrast(&self) -> f64 {
        self.contrast
    }
}

/// Transmission of a single ray with phase error φ′:
/// t²(1 - 4ε′cos φ′ + 4ε′cos(φ′ + φ_L)).
pub fn per_ray_transmission(spec: &AberrationSpec, mirror: &MirrorSpec, phi_prime: f64, phi_l: f64) -> f64 {
    let t = mirror.t();
    t * t * (1.0 - per_ray_extinction(spec, phi_prime, phi_l))
}

/// 1 - T_ray/t², zero for every φ′ when φ_L = 0.
pub fn per_ray_extinction(spec: &AberrationSpec, phi_prime: f64, phi_l: f64) -> f64 {
    4.0 * spec.epsilon_prime * (phi_prime.cos() - (phi_prime + phi_l).cos())
}

/// E = 4ε̄(1 - cos φ_L).
pub fn averaged_extinction(spec: &AberrationSpec, phi_l: f64) -> f64 {
    4.0 * spec.effective_epsilon() * (1.0 - phi_l.cos())
}

/// I = I₀(1 + V⟨cos φ′⟩cos φ_L).
pub fn self_interference_intensity(fringe: &FringeModel, spec: &AberrationSpec, phi_l: f64) -> f64 {
    fringe.i0 * (1.0 + fringe.contrast * spec.model.mean_cos(spec.eta) * phi_l.cos())
}

/// Fluorescence of a single ray, I₀(1 + V cos(φ′ + φ_L)).
pub fn per_ray_intensity(fringe: &FringeModel, phi_prime: f64, phi_l: f64) -> f64 {
    fringe.i0 * (1.0 + fringe.contrast * (phi_prime + phi_l).cos())
}

/// (max - min)/(max + min) of a sampled curve.
pub fn contrast(curve: &[f64]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "contrast needs at least 2 samples, got {}",
            curve.len()
        )));
    }
    let max = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = curve.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = max.abs().max(min.abs());
    if max - min <= 1e-14 * scale || max + min == 0.0 {
        return Err(Error::FlatCurve);
    }
    Ok((max - min) / (max + min))
}

/// (V′, V) from an extinction curve and a fluorescence curve.
pub fn contrasts(extinction: &[f64], intensity: &[f64]) -> Result<(f64, f64)> {
    Ok((contrast(extinction)?, contrast(intensity)?))
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }
}

/// Draws one phase error for the given screen.
pub fn sample_phase<R: Rng + ?Sized>(model: PhaseScreen, eta: f64, rng: &mut R) -> f64 {
    match model {
        PhaseScreen::SinusoidalCorrugation => eta * (TAU * rng.random::<f64>()).cos(),
        PhaseScreen::GaussianPhase => {
            if eta == 0.0 {
                0.0
            } else {
                Normal::new(0.0, eta).unwrap().sample(rng)
            }
        }
    }
}

/// ⟨f(φ′)⟩ over `samples` antithetic pairs (φ′, -φ′) of the phase screen.
/// Both screens are even in φ′, so each pair average is an unbiased sample
/// and odd parts of `f` cancel exactly.
///
/// Each chunk of [`CHUNK_SAMPLES`] draws uses its own ChaCha stream keyed
/// by (seed, chunk index), and chunk results are merged in index order, so
/// the estimate is bitwise reproducible for any thread count. Calls with the
/// same seed see the same φ′ sequence.
pub fn ensemble_average<F>(model: PhaseScreen, eta: f64, samples: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    if samples == 0 {
        return Err(Error::NoSamples);
    }
    let chunks = samples.div_ceil(CHUNK_SAMPLES);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let n = CHUNK_SAMPLES.min(samples - chunk * CHUNK_SAMPLES);
            let mut m = Moments { n: 0, mean: 0.0, m2: 0.0 };
            for _ in 0..n {
                let p = sample_phase(model, eta, &mut rng);
                m.push(0.5 * (f(p) + f(-p)));
            }
            m
        })
        .collect();
    let total = parts
        .into_iter()
        .fold(Moments { n: 0, mean: 0.0, m2: 0.0 }, Moments::merge);
    let variance = if total.n > 1 { total.m2 / (total.n - 1) as f64 } else { 0.0 };
    Ok(McEstimate {
        mean: total.mean,
        stderr: (variance / total.n as f64).sqrt(),
        samples: total.n,
    })
}

/// ⟨e^{iφ′}⟩ with the standard error of each component.
pub fn mc_phasor(spec: &AberrationSpec, samples: usize, seed: u64) -> Result<(Complex64, Complex64)> {
    let re = ensemble_average(spec.model, spec.eta, samples, seed, f64::cos)?;
    let im = ensemble_average(spec.model, spec.eta, samples, seed, f64::sin)?;
    Ok((Complex64::new(re.mean, im.mean), Complex64::new(re.stderr, im.stderr)))
}

/// Fringe contrast from the ensemble, ⟨cos φ′⟩; compare with J₀(η).
pub fn mc_fringe_contrast(spec: &AberrationSpec, samples: usize, seed: u64) -> Result<McEstimate> {
    ensemble_average(spec.model, spec.eta, samples, seed, f64::cos)
}

/// Ensemble-averaged transmission ⟨T_ray⟩ at one mirror phase.
pub fn mc_transmission(
    spec: &AberrationSpec,
    mirror: &MirrorSpec,
    phi_l: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    ensemble_average(spec.model, spec.eta, samples, seed, |p| {
        per_ray_transmission(spec, mirror, p, phi_l)
    })
}

/// Ensemble-averaged extinction at one mirror phase.
pub fn mc_extinction(spec: &AberrationSpec, phi_l: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    ensemble_average(spec.model, spec.eta, samples, seed, |p| per_ray_extinction(spec, p, phi_l))
}

/// Extinction contrast V′ from the ensemble, sampled at `phases`.
///
/// Every phase reuses the same draws, so the φ_L = 0 sample is exactly zero
/// whenever it is on the grid. The standard error is propagated from the
/// two extrema.
pub fn mc_extinction_contrast(spec: &AberrationSpec, phases: &[f64], samples: usize, seed: u64) -> Result<McEstimate> {
    let curve = phases
        .iter()
        .map(|&p| mc_extinction(spec, p, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let max = curve.iter().max_by(|a, b| a.mean.total_cmp(&b.mean)).unwrap();
    let min = curve.iter().min_by(|a, b| a.mean.total_cmp(&b.mean)).unwrap();
    let means: Vec<f64> = curve.iter().map(|e| e.mean).collect();
    let v = contrast(&means)?;
    let s = (max.mean + min.mean).powi(2);
    let stderr = (2.0 / s) * (min.mean * max.stderr).hypot(max.mean * min.stderr);
    Ok(McEstimate {
        mean: v,
        stderr,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(eta: f64, eps: f64) -> AberrationSpec {
        AberrationSpec::from_eta(eta, 493e-9, PhaseScreen::SinusoidalCorrugation, eps).unwrap()
    }

    #[test]
    fn sigma_and_eta_are_consistent() {
        let s = AberrationSpec::from_sigma(100e-9, 493e-9, PhaseScreen::GaussianPhase, 0.002).unwrap();
        assert!((s.eta() - TAU * 100e-9 / 493e-9).abs() < 1e-15);
        let back = AberrationSpec::from_eta(s.eta(), 493e-9, PhaseScreen::GaussianPhase, 0.002).unwrap();
        assert!((back.sigma_ab() - 100e-9).abs() < 1e-22);
        assert!(AberrationSpec::from_eta(-0.1, 493e-9, PhaseScreen::GaussianPhase, 0.0).is_err());
    }

    #[test]
    fn epsilon_prime_cannot_exceed_epsilon() {
        let atom = AtomScatterer::new(0.003, 1.0, 493e-9).unwrap();
        assert!(spec(1.0, 0.0034).check_against(&atom).is_err());
        assert!(spec(1.0, 0.002).check_against(&atom).is_ok());
    }

    #[test]
    fn per_ray_endpoints() {
        let m = MirrorSpec::from_intensity_reflectivity(0.997).unwrap();
        let s = spec(1.0, 0.003);
        assert_eq!(per_ray_transmission(&s, &m, 0.0, 0.0), m.t() * m.t());
        let dip = per_ray_transmission(&s, &m, 0.0, PI);
        assert!((dip - m.t() * m.t() * (1.0 - 8.0 * 0.003)).abs() < 1e-17);
        for &p in &[0.3, -1.2, 2.9] {
            assert_eq!(per_ray_extinction(&s, p, 0.0), 0.0);
        }
    }

    #[test]
    fn averaged_extinction_endpoints() {
        let s = spec(0.0, 0.003387);
        assert_eq!(averaged_extinction(&s, 0.0), 0.0);
        assert!((averaged_extinction(&s, PI) - 8.0 * 0.003387).abs() < 1e-17);
    }

    #[test]
    fn intensity_contrast_follows_j0() {
        let f = FringeModel::ideal(1000.0).unwrap();
        let curve = |s: &AberrationSpec| -> Vec<f64> {
            (0..64)
                .map(|i| self_interference_intensity(&f, s, TAU * i as f64 / 64.0))
                .collect()
        };
        assert!((contrast(&curve(&spec(0.0, 0.003))).unwrap() - 1.0).abs() < 1e-15);
        let v = contrast(&curve(&spec(1.3, 0.003))).unwrap();
        assert!((v - bessel_j0(1.3)).abs() < 1e-14);
        let zero = 2.404_825_557_695_773;
        assert_eq!(contrast(&curve(&spec(zero, 0.003))), Err(Error::FlatCurve));
    }

    #[test]
    fn filtered_fringe_contrast() {
        let f = FringeModel::new(1000.0, 0.9).unwrap();
        let s = spec(0.0, 0.003);
        let curve: Vec<f64> = (0..64)
            .map(|i| self_interference_intensity(&f, &s, TAU * i as f64 / 64.0))
            .collect();
        assert!((contrast(&curve).unwrap() - 0.9).abs() < 1e-14);
        assert!(FringeModel::new(1.0, 1.1).is_err());
    }

    #[test]
    fn extinction_contrast_is_unity() {
        let s = spec(1.3, 0.003387);
        let e: Vec<f64> = (0..64).map(|i| averaged_extinction(&s, TAU * i as f64 / 64.0)).collect();
        let i: Vec<f64> = (0..64)
            .map(|k| self_interference_intensity(&FringeModel::ideal(1.0).unwrap(), &s, TAU * k as f64 / 64.0))
            .collect();
        let (vp, v) = contrasts(&e, &i).unwrap();
        assert_eq!(vp, 1.0);
        assert!((v - bessel_j0(1.3)).abs() < 1e-14);
    }

    #[test]
    fn contrast_needs_samples() {
        assert!(matches!(contrast(&[1.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn mc_is_deterministic_and_seed_sensitive() {
        let s = spec(1.0, 0.003);
        let a = mc_fringe_contrast(&s, 200_000, 7).unwrap();
        let b = mc_fringe_contrast(&s, 200_000, 7).unwrap();
        let c = mc_fringe_contrast(&s, 200_000, 8).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_ne!(a.mean, c.mean);
        assert_eq!(ensemble_average(PhaseScreen::GaussianPhase, 1.0, 0, 1, f64::cos), Err(Error::NoSamples));
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let s = spec(0.8, 0.003);
        let many = mc_fringe_contrast(&s, 300_000, 11).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool.install(|| mc_fringe_contrast(&s, 300_000, 11).unwrap());
        assert_eq!(many.mean.to_bits(), one.mean.to_bits());
        assert_eq!(many.stderr.to_bits(), one.stderr.to_bits());
    }

    #[test]
    fn mc_transmission_at_dark_fringe() {
        let m = MirrorSpec::from_intensity_reflectivity(0.997).unwrap();
        let s = spec(1.0, 0.003);
        let est = mc_transmission(&s, &m, PI, 1_000_000, 3).unwrap();
        let want = m.t() * m.t() * (1.0 - 8.0 * 0.003 * bessel_j0(1.0));
        assert!((est.mean - want).abs() <= 3.0 * est.stderr, "{} vs {want} ± {}", est.mean, est.stderr);
    }

    #[test]
    fn mc_extinction_matches_closed_form() {
        let s = spec(1.3, 0.003387);
        let est = mc_extinction(&s, PI, 1_000_000, 5).unwrap();
        let want = 8.0 * 0.003387 * bessel_j0(1.3);
        assert!((est.mean - want).abs() <= 3.0 * est.stderr);
        assert!((averaged_extinction(&s, PI) - want).abs() < 1e-17);
    }

    #[test]
    fn gaussian_screen_phasor() {
        let s = AberrationSpec::from_eta(0.9, 493e-9, PhaseScreen::GaussianPhase, 0.003).unwrap();
        let (z, se) = mc_phasor(&s, 1_000_000, 17).unwrap();
        assert!((z.re - (-0.405f64).exp()).abs() <= 3.0 * se.re);
        assert!(z.im.abs() <= 3.0 * se.im);
    }

    #[test]
    fn zero_strength_has_no_spread() {
        let est = mc_fringe_contrast(&spec(0.0, 0.003), 1000, 1).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }
}
