//! Scattering picture: the atom is a mirror of amplitude reflectivity 2ε and
//! forms a Fabry–Pérot cavity with the dielectric mirror.
//!
//! Normalised quantities (T/t², R/r²) are computed from the cavity amplitude
//! directly so they stay defined for t = 0 or r = 0.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{AtomScatterer, MirrorSpec};

/// Transmission, reflection and extinction of the ion + mirror cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpResponse {
    pub transmission: f64,
    pub reflection: f64,
    pub extinction: f64,
}

/// 2rε, the round-trip amplitude of the cavity.
pub fn round_trip_gain(mirror: &MirrorSpec, atom: &AtomScatterer) -> f64 {
    2.0 * mirror.r() * atom.epsilon()
}

fn cavity_denominator(mirror: &MirrorSpec, atom: &AtomScatterer, phi_l: f64) -> Result<Complex64> {
    let denom = Complex64::new(1.0, 0.0) - round_trip_gain(mirror, atom) * Complex64::cis(phi_l);
    if denom.norm_sqr() == 0.0 {
        return Err(Error::Singular);
    }
    Ok(denom)
}

/// Field transmission divided by t: (1 - 2ε) / (1 - 2rε e^{iφ}).
pub fn normalized_amplitude(mirror: &MirrorSpec, atom: &AtomScatterer, phi_l: f64) -> Result<Complex64> {
    let denom = cavity_denominator(mirror, atom, phi_l)?;
    Ok((1.0 - 2.0 * atom.epsilon()) / denom)
}

/// T / t², the transmission normalised to the bare mirror.
pub fn normalized_transmission(mirror: &MirrorSpec, atom: &AtomScatterer, phi_l: f64) -> Result<f64> {
    normalized_amplitude(mirror, atom, phi_l).map(|a| a.norm_sqr())
}

/// T = |t(1 - 2ε) / (1 - 2rε e^{iφ_L})|².
pub fn transmission_exact(mirror: &MirrorSpec, atom: &AtomScatterer, phi_l: f64) -> Result<f64> {
    let t = mirror.t();
    Ok(t * t * normalized_transmission(mirror, atom, phi_l)?)
}

/// Weak-atom limit T ≈ t² |1 - 2ε + 2εr e^{iφ_L}|², the single-bounce
/// truncation of the exact result.
pub fn transmission_weak(mirror: &MirrorSpec, atom: &AtomScatterer, phi_l: f64) -> f64 {
    let t = mirror.t();
    t * t * normalized_transmission_weak(mirror, atom, phi_l)
}

/// |1 - 2ε + 2εr e^{iφ_L}|².
pub fn normalized_transmission_weak(mirror: &MirrorSpec, atom: &AtomScatterer, phi_l: f64) -> f64 {
    let eps = atom.epsilon();
    let amp = Complex64::new(1.0 - 2.0 * eps, 0.0) + 2.0 * eps * mirror.r() * Complex64::cis(phi_l);
    amp.norm_sqr()
}

/// Field reflected off the cavity from the probe side.
///
/// The outside reflection carries -r, the inside +r (Stokes relations), so
/// the reflected power dips where the transmission peaks.
pub fn reflection_amplitude(mirror: &MirrorSpec, atom: &AtomScatterer, phi_l: f64) -> Result<Complex64> {
    let denom = cavity_denominator(mirror, atom, phi_l)?;
    let r = mirror.r();
    let t = mirror.t();
    let feedback = 2.0 * atom.epsilon() * Complex64::cis(phi_l) / denom;
    Ok(Complex64::new(-r, 0.0) + t * t * feedback)
}

/// Reflected intensity ratio |r_cav|².
pub fn reflection_off_cavity(mirror: &MirrorSpec, atom: &AtomScatterer, phi_l: f64) -> Result<f64> {
    reflection_amplitude(mirror, atom, phi_l).map(|a| a.norm_sqr())
}

/// Extinction E = 1 - T/t².
pub fn extinction(mirror: &MirrorSpec, atom: &AtomScatterer, phi_l: f64) -> Result<f64> {
    Ok(1.0 - normalized_transmission(mirror, atom, phi_l)?)
}

pub fn response(mirror: &MirrorSpec, atom: &AtomScatterer, phi_l: f64) -> Result<FpResponse> {
    let normalized = normalized_transmission(mirror, atom, phi_l)?;
    let t = mirror.t();
    Ok(FpResponse {
        transmission: t * t * normalized,
        reflection: reflection_off_cavity(mirror, atom, phi_l)?,
        extinction: 1.0 - normalized,
    })
}

/// F = π·2εr / (1 - (2εr)²).
///
/// This is the Airy finesse π√R/(1 - R) evaluated with R = (2εr)². The FSR /
/// FWHM ratio of [`transmission_exact`] itself follows π√(2εr)/(1 - 2εr), see
/// [`airy_finesse`]; near 2εr → 1 the two differ by a factor of two.
pub fn finesse(atom: &AtomScatterer, mirror: &MirrorSpec) -> Result<f64> {
    let rho = round_trip_gain(mirror, atom);
    if rho >= 1.0 {
        return Err(Error::DivergentFinesse(rho));
    }
    Ok(PI * rho / (1.0 - rho * rho))
}

/// Coefficient-of-finesse form π√ρ/(1 - ρ) with ρ = 2εr the round-trip
/// amplitude.
pub fn airy_finesse(atom: &AtomScatterer, mirror: &MirrorSpec) -> Result<f64> {
    let rho = round_trip_gain(mirror, atom);
    if rho >= 1.0 {
        return Err(Error::DivergentFinesse(rho));
    }
    Ok(PI * rho.sqrt() / (1.0 - rho))
}

/// Transmission from the explicit multiple-bounce series
/// t(1 - 2ε) ∑ₙ (2rε e^{iφ})ⁿ, summed with Neumaier compensation until the
/// remaining geometric tail drops below `tolerance` relative to the leading
/// term.
///
/// Independent of the closed form; used to cross-check it.
pub fn multiple_bounce_transmission(
    mirror: &MirrorSpec,
    atom: &AtomScatterer,
    phi_l: f64,
    tolerance: f64,
) -> Result<f64> {
    let rho = round_trip_gain(mirror, atom);
    if rho >= 1.0 {
        return Err(Error::Singular);
    }
    let step = rho * Complex64::cis(phi_l);
    let terms = if rho == 0.0 {
        1
    } else {
        // ρ^N / (1 - ρ) < tolerance
        let n = ((tolerance * (1.0 - rho)).ln() / rho.ln()).ceil();
        (n.max(1.0) as usize) + 1
    };

    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    for _ in 0..terms {
        neumaier_add(&mut sum.re, &mut comp.re, term.re);
        neumaier_add(&mut sum.im, &mut comp.im, term.im);
        term *= step;
    }
    let total = sum + comp;
    let t = mirror.t();
    let amp = t * (1.0 - 2.0 * atom.epsilon()) * total;
    Ok(amp.norm_sqr())
}

fn neumaier_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}
