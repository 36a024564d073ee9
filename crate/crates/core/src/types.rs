//! Domain types shared by every model, plus the geometric conversions between
//! lens aperture, solid angle and round-trip phase.
//!
//! All mirror coefficients are real, non-negative amplitudes. Any phase picked
//! up in the dielectric stack is absorbed into the cavity phase offset.

use std::f64::consts::{PI, TAU};

use crate::error::{check_range, Error, Result};

const LOSSLESS_TOL: f64 = 1e-12;

/// Amplitude reflectivity and transmissivity of the dielectric mirror.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorSpec {
    r: f64,
    t: f64,
    lossless: bool,
}

impl MirrorSpec {
    /// Lossless mirror with amplitude reflectivity `r`; `t = sqrt(1 - r²)`.
    pub fn lossless(r: f64) -> Result<Self> {
        let r = check_range("r", r, 0.0, 1.0, "[0, 1]")?;
        Ok(Self {
            r,
            t: (1.0 - r * r).max(0.0).sqrt(),
            lossless: true,
        })
    }

    /// Lossless mirror from the intensity reflectivity |r|², e.g. 0.997.
    pub fn from_intensity_reflectivity(reflectivity: f64) -> Result<Self> {
        let reflectivity = check_range("|r|²", reflectivity, 0.0, 1.0, "[0, 1]")?;
        Ok(Self {
            r: reflectivity.sqrt(),
            t: (1.0 - reflectivity).sqrt(),
            lossless: true,
        })
    }

    /// Mirror with independent amplitudes. `lossless` is checked against
    /// r² + t² = 1; a lossy mirror only needs r² + t² ≤ 1.
    pub fn new(r: f64, t: f64, lossless: bool) -> Result<Self> {
        let r = check_range("r", r, 0.0, 1.0, "[0, 1]")?;
        let t = check_range("t", t, 0.0, 1.0, "[0, 1]")?;
        let sum = r * r + t * t;
        if lossless && (sum - 1.0).abs() > LOSSLESS_TOL {
            return Err(Error::NotLossless { r, t });
        }
        if !lossless && sum > 1.0 + LOSSLESS_TOL {
            return Err(Error::NotLossless { r, t });
        }
        Ok(Self { r, t, lossless })
    }

    /// No mirror at all: everything is transmitted.
    pub fn absent() -> Self {
        Self {
            r: 0.0,
            t: 1.0,
            lossless: true,
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn is_lossless(&self) -> bool {
        self.lossless
    }
}

/// The atom as seen by the probe: solid-angle coupling fraction, free-space
/// decay rate (rad/s) and transition wavelength (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomScatterer {
    epsilon: f64,
    gamma: f64,
    wavelength: f64,
}

impl AtomScatterer {
    pub fn new(epsilon: f64, gamma: f64, wavelength: f64) -> Result<Self> {
        let epsilon = check_range("epsilon", epsilon, 0.0, 0.5, "[0, 0.5]")?;
        let gamma = check_range("gamma", gamma, f64::MIN_POSITIVE, f64::MAX, "(0, inf)")?;
        let wavelength = check_range(
            "wavelength",
            wavelength,
            f64::MIN_POSITIVE,
            f64::MAX,
            "(0, inf)",
        )?;
        Ok(Self {
            epsilon,
            gamma,
            wavelength,
        })
    }

    /// Same atom with a different coupling fraction.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, self.gamma, self.wavelength)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
}

/// Atom–mirror distance and the mirror scan.
///
/// The absolute phase 2kR for R of tens of centimetres cannot be reduced
/// modulo 2π in floating point to any useful accuracy, so it enters as the
/// free offset `phase_offset`; only the displacement `scan_delta` is
/// converted to phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    distance: f64,
    phase_offset: f64,
    scan_delta: f64,
}

impl CavityGeometry {
    pub fn new(distance: f64, phase_offset: f64, scan_delta: f64) -> Result<Self> {
        let distance = check_range("distance_R", distance, f64::MIN_POSITIVE, f64::MAX, "(0, inf)")?;
        if !phase_offset.is_finite() {
            return Err(Error::OutOfRange {
                name: "phase_offset",
                value: phase_offset,
                range: "finite",
            });
        }
        if !scan_delta.is_finite() {
            return Err(Error::OutOfRange {
                name: "scan_delta",
                value: scan_delta,
                range: "finite",
            });
        }
        Ok(Self {
            distance,
            phase_offset,
            scan_delta,
        })
    }

    /// Same cavity with the mirror displaced by `scan_delta` from its reference.
    pub fn with_scan_delta(&self, scan_delta: f64) -> Self {
        Self { scan_delta, ..*self }
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn phase_offset(&self) -> f64 {
        self.phase_offset
    }

    pub fn scan_delta(&self) -> f64 {
        self.scan_delta
    }
}

/// Weak probe. Every model output is an intensity ratio, so `intensity_scale`
/// never enters the arithmetic; it is carried only for bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    pub detuning: f64,
    pub intensity_scale: f64,
}

impl ProbeSpec {
    pub fn resonant() -> Self {
        Self {
            detuning: 0.0,
            intensity_scale: 1.0,
        }
    }

    pub fn detuned(detuning: f64) -> Self {
        Self {
            detuning,
            intensity_scale: 1.0,
        }
    }
}

/// Fraction of the full 4π solid angle inside the cone of a lens with the
/// given numerical aperture: (1 - cos θ_max) / 2 with θ_max = asin(NA).
pub fn solid_angle_fraction(numerical_aperture: f64) -> Result<f64> {
    let na = numerical_aperture;
    if !(na > 0.0 && na <= 1.0) {
        return Err(Error::OutOfRange {
            name: "numerical aperture",
            value: na,
            range: "(0, 1]",
        });
    }
    // (1 - sqrt(1 - NA²)) / 2 without the cancellation at small NA
    let cos_max = (1.0 - na * na).sqrt();
    Ok(na * na / (2.0 * (1.0 + cos_max)))
}

/// Half-opening angle of the cap whose solid-angle fraction is `epsilon`.
pub fn cap_half_angle(epsilon: f64) -> Result<f64> {
    let epsilon = check_range("epsilon", epsilon, 0.0, 0.5, "[0, 0.5]")?;
    Ok((1.0 - 2.0 * epsilon).acos())
}

/// Round-trip phase φ_L = φ₀ + 4π·δ/λ reduced to [0, 2π).
///
/// The displacement is reduced in units of λ/2 before it is turned into a
/// phase, so the result has period λ/2 in `scan_delta` up to one rounding.
pub fn round_trip_phase(geometry: &CavityGeometry, wavelength: f64) -> f64 {
    let half_wave = 0.5 * wavelength;
    let periods = (geometry.scan_delta / half_wave).rem_euclid(1.0);
    reduce_phase(geometry.phase_offset + TAU * periods)
}

/// Reduce any finite phase to [0, 2π).
pub fn reduce_phase(phase: f64) -> f64 {
    let reduced = phase.rem_euclid(TAU);
    if reduced >= TAU {
        0.0
    } else {
        reduced
    }
}

/// Wrap a phase difference into (-π, π].
pub fn wrap_phase(phase: f64) -> f64 {
    let reduced = reduce_phase(phase);
    if reduced > PI {
        reduced - TAU
    } else {
        reduced
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_mirror_from_intensity() {
        let m = MirrorSpec::from_intensity_reflectivity(0.997).unwrap();
        assert!((m.r() * m.r() + m.t() * m.t() - 1.0).abs() < 1e-12);
        assert!((m.t() * m.t() - 0.003).abs() < 1e-15);
    }

    #[test]
    fn mirror_rejects_bad_amplitudes() {
        assert!(MirrorSpec::lossless(1.2).is_err());
        assert!(MirrorSpec::new(0.9, 0.9, true).is_err());
        assert!(MirrorSpec::new(0.9, 0.9, false).is_err());
        assert!(MirrorSpec::new(0.9, 0.3, false).is_ok());
        assert!(MirrorSpec::new(-0.1, 0.3, false).is_err());
    }

    #[test]
    fn atom_epsilon_bounds() {
        assert!(AtomScatterer::new(0.5, 1.0, 493e-9).is_ok());
        assert!(AtomScatterer::new(0.51, 1.0, 493e-9).is_err());
        assert!(AtomScatterer::new(0.1, 0.0, 493e-9).is_err());
        assert!(AtomScatterer::new(0.1, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn full_aperture_is_a_hemisphere() {
        assert_eq!(solid_angle_fraction(1.0).unwrap(), 0.5);
    }

    /// Midpoint rule for ∫ sinθ dθ / 2 over [0, θ_max] = ∫ dΩ / 4π over the cap.
    fn cap_fraction_by_quadrature(na: f64) -> f64 {
        let theta_max = na.asin();
        let n = 200_000;
        let h = theta_max / n as f64;
        (0..n)
            .map(|i| ((i as f64 + 0.5) * h).sin())
            .sum::<f64>()
            * h
            / 2.0
    }

    #[test]
    fn na_04_matches_cap_integral() {
        let eps = solid_angle_fraction(0.4).unwrap();
        let oracle = cap_fraction_by_quadrature(0.4);
        assert!((eps - oracle).abs() < 1e-10, "{eps} vs {oracle}");
        assert!((eps - 0.04174).abs() < 5e-6);
    }

    #[test]
    fn small_na_limit() {
        let na = 0.01;
        let eps = solid_angle_fraction(na).unwrap();
        assert!((eps - cap_fraction_by_quadrature(na)).abs() < 1e-14);
        // NA²/4 + NA⁴/16 + ...
        assert!((eps - na * na / 4.0).abs() < na.powi(4) / 8.0);
    }

    #[test]
    fn na_domain_errors() {
        assert!(solid_angle_fraction(0.0).is_err());
        assert!(solid_angle_fraction(1.0001).is_err());
        assert!(solid_angle_fraction(f64::NAN).is_err());
    }

    #[test]
    fn cap_angle_inverts_fraction() {
        let eps = solid_angle_fraction(0.4).unwrap();
        assert!((cap_half_angle(eps).unwrap() - 0.4f64.asin()).abs() < 1e-12);
        assert!((cap_half_angle(0.5).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn round_trip_phase_examples() {
        let lambda = 493e-9;
        let g = CavityGeometry::new(0.3, 0.0, 0.0).unwrap();
        assert_eq!(round_trip_phase(&g, lambda), 0.0);
        assert_eq!(round_trip_phase(&g.with_scan_delta(lambda / 2.0), lambda), 0.0);
        let quarter = round_trip_phase(&g.with_scan_delta(lambda / 8.0), lambda);
        assert!((quarter - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_phase(0.0), 0.0);
    }
}
