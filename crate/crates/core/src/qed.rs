//! Boundary-QED picture: the mirror reshapes the vacuum modes around the
//! atom, which changes its decay rate, its level shift and its coupling to
//! the probe mode.
//!
//! Rates are in rad/s. The weak-probe limit is assumed throughout: the AC
//! Stark shift is dropped, the atom starts in the ground state
//! (σ_z(0) = -1), and only the mirror-induced part of the Lamb shift is kept.
//!
//! The closed forms are backed by an explicit spherical-harmonic mode sum
//! ([`CapModeSum`]) for the decay rate.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_range, Error, Result};
use crate::special::{legendre_upper_integral, GaussLegendre};
use crate::types::{cap_half_angle, AtomScatterer, MirrorSpec, ProbeSpec};

/// Decay rate γ̃ and mirror-induced level shift Δ̃, both in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedAtomRates {
    pub gamma_tilde: f64,
    pub delta_tilde: f64,
}

impl ModifiedAtomRates {
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.gamma_tilde, self.delta_tilde)
    }
}

/// The product g_ε·ḡ* of the probe-mode coupling and the mean coupling to
/// all modes, in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingPair {
    pub g_eps_gbar: Complex64,
}

/// Angular overlap of one spherical mode with the mirror geometry, scaled so
/// that the free-space l = 0 overlap is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOverlap {
    pub value: Complex64,
}

/// γ̃ + iΔ̃ = (1 - 2rε e^{iφ})γ.
pub fn modified_rates(atom: &AtomScatterer, mirror: &MirrorSpec, phi: f64) -> Result<ModifiedAtomRates> {
    let rho = 2.0 * mirror.r() * atom.epsilon();
    if rho > 1.0 {
        return Err(Error::NegativeDecay(rho));
    }
    let z = (Complex64::new(1.0, 0.0) - rho * Complex64::cis(phi)) * atom.gamma();
    Ok(ModifiedAtomRates {
        gamma_tilde: z.re,
        delta_tilde: z.im,
    })
}

/// g_ε ḡ* = ε(1 - r e^{iφ})γ.
pub fn coupling_product(atom: &AtomScatterer, mirror: &MirrorSpec, phi: f64) -> CouplingPair {
    let g = atom.epsilon() * (Complex64::new(1.0, 0.0) - mirror.r() * Complex64::cis(phi)) * atom.gamma();
    CouplingPair { g_eps_gbar: g }
}

/// g_ε ḡ* / (γ̃ + i(Δ̃ + δ)), dimensionless.
///
/// Probe detuning only enters the denominator; on resonance this reduces to
/// ε(1 - r e^{iφ}) / (1 - 2rε e^{iφ}).
pub fn steady_state_ratio(
    atom: &AtomScatterer,
    mirror: &MirrorSpec,
    phi: f64,
    probe: &ProbeSpec,
) -> Result<Complex64> {
    let rates = modified_rates(atom, mirror, phi)?;
    let denom = rates.complex() + Complex64::new(0.0, probe.detuning);
    if denom.norm_sqr() == 0.0 {
        return Err(Error::Singular);
    }
    Ok(coupling_product(atom, mirror, phi).g_eps_gbar / denom)
}

/// Output field over t·E_in: 1 + 2·ratio·σ_z(0) with σ_z(0) = -1.
pub fn normalized_amplitude(
    atom: &AtomScatterer,
    mirror: &MirrorSpec,
    phi: f64,
    probe: &ProbeSpec,
) -> Result<Complex64> {
    Ok(1.0 - 2.0 * steady_state_ratio(atom, mirror, phi, probe)?)
}

/// T / t².
pub fn normalized_transmission(
    atom: &AtomScatterer,
    mirror: &MirrorSpec,
    phi: f64,
    probe: &ProbeSpec,
) -> Result<f64> {
    normalized_amplitude(atom, mirror, phi, probe).map(|a| a.norm_sqr())
}

/// T = t² |1 - 2 g_ε ḡ* / (γ̃ + i(Δ̃ + δ))|².
pub fn qed_transmission(
    atom: &AtomScatterer,
    mirror: &MirrorSpec,
    phi: f64,
    probe: &ProbeSpec,
) -> Result<f64> {
    let t = mirror.t();
    Ok(t * t * normalized_transmission(atom, mirror, phi, probe)?)
}

/// Transmission a time `time` after the probe is switched on. The steady
/// ratio is multiplied by I(t) = 1 - exp(-(γ̃ + i(Δ̃ + δ))t), so T(0) = t² and
/// T(∞) is [`qed_transmission`].
pub fn transient_transmission(
    atom: &AtomScatterer,
    mirror: &MirrorSpec,
    phi: f64,
    probe: &ProbeSpec,
    time: f64,
) -> Result<f64> {
    if !(time >= 0.0) {
        return Err(Error::OutOfRange {
            name: "time",
            value: time,
            range: "[0, inf]",
        });
    }
    let ratio = steady_state_ratio(atom, mirror, phi, probe)?;
    let rates = modified_rates(atom, mirror, phi)?;
    let exponent = (rates.complex() + Complex64::new(0.0, probe.detuning)) * time;
    let envelope = if time.is_infinite() {
        Complex64::new(1.0, 0.0)
    } else {
        1.0 - (-exponent).exp()
    };
    let t = mirror.t();
    Ok(t * t * (1.0 - 2.0 * ratio * envelope).norm_sqr())
}

/// Coupling fraction that gives a peak free-space extinction `peak`; the
/// free-space line is exactly Lorentzian with depth 4ε(1 - ε).
pub fn epsilon_from_peak_extinction(peak: f64) -> Result<f64> {
    let peak = check_range("peak extinction", peak, 0.0, 1.0, "[0, 1]")?;
    Ok(0.5 * (1.0 - (1.0 - peak).sqrt()))
}

/// γ from the free-space extinction FWHM (both rad/s): FWHM = 2γ.
pub fn gamma_from_fwhm(fwhm: f64) -> f64 {
    0.5 * fwhm
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub detuning: f64,
    /// T / t²
    pub transmission: f64,
    pub extinction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub points: Vec<SpectrumPoint>,
    pub peak_extinction: f64,
    pub peak_detuning: f64,
    /// `None` when the line is flat or a half-maximum crossing lies outside
    /// the grid.
    pub fwhm: Option<f64>,
}

/// Samples the transmission over `delta_grid` (rad/s, sorted ascending) and
/// extracts the extinction peak and its full width at half maximum.
///
/// The peak is refined by golden-section search between the neighbouring
/// samples and both half-maximum crossings by bisection on the model itself,
/// so the extracted numbers do not depend on the grid spacing.
pub fn spectrum(
    atom: &AtomScatterer,
    mirror: &MirrorSpec,
    phi: f64,
    delta_grid: &[f64],
) -> Result<Spectrum> {
    if delta_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if delta_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::UnsortedGrid);
    }
    let extinction_at = |delta: f64| -> Result<f64> {
        Ok(1.0 - normalized_transmission(atom, mirror, phi, &ProbeSpec::detuned(delta))?)
    };
    let points = delta_grid
        .iter()
        .map(|&detuning| {
            let transmission = normalized_transmission(atom, mirror, phi, &ProbeSpec::detuned(detuning))?;
            Ok(SpectrumPoint {
                detuning,
                transmission,
                extinction: 1.0 - transmission,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let peak_index = (0..points.len())
        .max_by(|&i, &j| points[i].extinction.total_cmp(&points[j].extinction))
        .unwrap();
    let coarse_peak = points[peak_index].extinction;
    if coarse_peak <= 0.0 {
        return Ok(Spectrum {
            points,
            peak_extinction: coarse_peak.max(0.0),
            peak_detuning: delta_grid[peak_index],
            fwhm: None,
        });
    }

    let lo = delta_grid[peak_index.saturating_sub(1)];
    let hi = delta_grid[(peak_index + 1).min(delta_grid.len() - 1)];
    let (peak_detuning, peak_extinction) = golden_max(&extinction_at, lo, hi)?;
    let (peak_detuning, peak_extinction) = if peak_extinction >= coarse_peak {
        (peak_detuning, peak_extinction)
    } else {
        (delta_grid[peak_index], coarse_peak)
    };

    let half = 0.5 * peak_extinction;
    let left = (0..peak_index)
        .rev()
        .find(|&j| points[j].extinction < half)
        .map(|j| bisect_crossing(&extinction_at, delta_grid[j], peak_detuning, half))
        .transpose()?;
    let right = (peak_index + 1..points.len())
        .find(|&j| points[j].extinction < half)
        .map(|j| bisect_crossing(&extinction_at, peak_detuning, delta_grid[j], half))
        .transpose()?;
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        _ => None,
    };

    Ok(Spectrum {
        points,
        peak_extinction,
        peak_detuning,
        fwhm,
    })
}

fn golden_max(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Point between `a` and `b` where `f` crosses `level`; f(a) and f(b) must
/// straddle it.
fn bisect_crossing(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, level: f64) -> Result<f64> {
    let mut fa = f(a)? - level;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid)? - level;
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

// ---------------------------------------------------------------------------
// Mode functions

fn check_cap(theta_max: f64) -> Result<f64> {
    if theta_max > 0.0 && theta_max <= PI / 2.0 {
        Ok(theta_max)
    } else {
        Err(Error::OutOfRange {
            name: "theta_max",
            value: theta_max,
            range: "(0, pi/2]",
        })
    }
}

fn harmonic_norm(l: usize) -> f64 {
    ((2 * l + 1) as f64 / (4.0 * PI)).sqrt()
}

/// ∫_cap Y_{l,m} dΩ / 4π over the cap θ ≤ θ_max around the mirror axis.
///
/// The azimuthal integral kills every m ≠ 0; for m = 0 the polar integral is
/// the Legendre antiderivative ½·√((2l+1)/4π)·∫_{cos θ_max}^1 P_l.
pub fn cap_harmonic_integral(l: usize, m: i64, theta_max: f64) -> Result<Complex64> {
    if m.unsigned_abs() as usize > l {
        return Err(Error::InvalidHarmonic { l, m });
    }
    let theta_max = check_cap(theta_max)?;
    if m != 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let value = 0.5 * harmonic_norm(l) * legendre_upper_integral(l, theta_max.cos());
    Ok(Complex64::new(value, 0.0))
}

/// Weight of the mirror cap in the overlap: 1 - r e^{iφ} + (-1)^l t.
fn mirror_bracket(l: usize, mirror: &MirrorSpec, phi: f64) -> Complex64 {
    let parity = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    Complex64::new(1.0 + parity * mirror.t(), 0.0) - mirror.r() * Complex64::cis(phi)
}

/// Assemble the overlap of mode (l, m) on the mirror-side hemisphere:
/// inside the cap the field is a standing wave plus the wave transmitted
/// through the mirror, outside it is the free-space pair 1 + (-1)^l.
fn assemble_overlap(l: usize, cap: f64, hemisphere: f64, mirror: &MirrorSpec, phi: f64, covers: bool) -> Complex64 {
    let parity = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    let free = 1.0 + parity;
    let inside = if covers {
        mirror_bracket(l, mirror, phi)
    } else {
        Complex64::new(free, 0.0)
    };
    (4.0 * PI).sqrt() * (inside * cap + free * (hemisphere - cap))
}

/// Overlap of the (l, m) spherical mode with the mirror geometry. With
/// `mirror_covers_cap = false` the mirror is absent and the free-space modes
/// are returned.
pub fn mode_overlap(
    l: usize,
    m: i64,
    mirror: &MirrorSpec,
    phi: f64,
    theta_max: f64,
    mirror_covers_cap: bool,
) -> Result<ModeOverlap> {
    let cap = cap_harmonic_integral(l, m, theta_max)?;
    let hemisphere = cap_harmonic_integral(l, m, PI / 2.0)?;
    Ok(ModeOverlap {
        value: assemble_overlap(l, cap.re, hemisphere.re, mirror, phi, mirror_covers_cap),
    })
}

/// Number of large-l terms summed explicitly from the asymptotic form before
/// the remainder is closed with the smooth envelope.
const TAIL_TERMS: usize = 1 << 22;

/// Mode sum ∑_l |T_l|² over the axially symmetric (m = 0) modes for a mirror
/// covering the cap θ ≤ θ_max.
///
/// Modes l ≤ `l_max` come from Gauss–Legendre quadrature of the cap
/// integrals with 4·l_max nodes, which is exact for these polynomial
/// integrands. The hard mirror edge makes |T_l|² fall off only as 1/l², so
/// the truncated sum alone converges like 1/l_max; the modes above `l_max`
/// are added from the large-l asymptotics of the cap integrals,
///
/// (2l+1)/2 · (∫P_l)² ≈ (sinθ/π)(1 - sin((2l+1)θ))/(l(l+1))
///                      - (3cosθ/4π) cos((2l+1)θ)/(l+½)³,
///
/// which are accurate to O(l⁻⁴) and depend only on the parity of l through
/// the mirror weight.
#[derive(Debug, Clone)]
pub struct CapModeSum {
    theta_max: f64,
    l_max: usize,
    cap: Vec<f64>,
    hemisphere: Vec<f64>,
    /// Asymptotic ∑ |C_l|²·4π over l > l_max, split by parity of l.
    tail: [f64; 2],
}

impl CapModeSum {
    pub fn new(theta_max: f64, l_max: usize) -> Result<Self> {
        let theta_max = check_cap(theta_max)?;
        let nodes = (4 * l_max).max(8);
        let cap = cap_integrals_by_quadrature(l_max, theta_max.cos(), nodes);
        let hemisphere = cap_integrals_by_quadrature(l_max, 0.0, nodes);
        let tail = asymptotic_tail(theta_max, l_max);
        Ok(Self {
            theta_max,
            l_max,
            cap,
            hemisphere,
            tail,
        })
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// ∫_cap Y_{l,0} dΩ/4π for l ≤ l_max, from quadrature.
    pub fn cap_integral(&self, l: usize) -> Option<f64> {
        self.cap.get(l).copied()
    }

    /// Overlaps T_l for l = 0..=l_max.
    pub fn overlaps(&self, mirror: &MirrorSpec, phi: f64, mirror_covers_cap: bool) -> Vec<ModeOverlap> {
        (0..=self.l_max)
            .map(|l| ModeOverlap {
                value: assemble_overlap(l, self.cap[l], self.hemisphere[l], mirror, phi, mirror_covers_cap),
            })
            .collect()
    }

    /// ∑_{l ≤ l_max} |T_l|².
    pub fn truncated_sum(&self, mirror: &MirrorSpec, phi: f64, mirror_covers_cap: bool) -> f64 {
        self.overlaps(mirror, phi, mirror_covers_cap)
            .iter()
            .map(|o| o.value.norm_sqr())
            .sum()
    }

    /// ∑_{l > l_max} |T_l|² from the asymptotic cap integrals. Above l = 0
    /// the overlap is √(4π)·(-r e^{iφ} + (-1)^l (t - 1))·C_l, so the mirror
    /// only sets one weight per parity.
    pub fn tail_sum(&self, mirror: &MirrorSpec, phi: f64, mirror_covers_cap: bool) -> f64 {
        if !mirror_covers_cap {
            return 0.0;
        }
        let a = -mirror.r() * Complex64::cis(phi);
        let b = Complex64::new(mirror.t() - 1.0, 0.0);
        (a + b).norm_sqr() * self.tail[0] + (a - b).norm_sqr() * self.tail[1]
    }

    pub fn total_sum(&self, mirror: &MirrorSpec, phi: f64, mirror_covers_cap: bool) -> f64 {
        self.truncated_sum(mirror, phi, mirror_covers_cap) + self.tail_sum(mirror, phi, mirror_covers_cap)
    }

    /// γ̃/γ = ∑|T_l|² (mirror) / ∑|T⁰_l|² (no mirror).
    pub fn decay_ratio(&self, mirror: &MirrorSpec, phi: f64) -> f64 {
        self.total_sum(mirror, phi, true) / self.total_sum(mirror, phi, false)
    }

    /// Same ratio with the sum cut at l_max and no tail.
    pub fn truncated_decay_ratio(&self, mirror: &MirrorSpec, phi: f64) -> f64 {
        self.truncated_sum(mirror, phi, true) / self.truncated_sum(mirror, phi, false)
    }
}

fn cap_integrals_by_quadrature(l_max: usize, x0: f64, nodes: usize) -> Vec<f64> {
    let rule = GaussLegendre::on_interval(nodes, x0, 1.0);
    let mut integrals = vec![0.0; l_max + 1];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let (mut p0, mut p1) = (1.0, x);
        integrals[0] += w;
        if l_max >= 1 {
            integrals[1] += w * x;
        }
        for n in 1..l_max {
            let nf = n as f64;
            let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
            integrals[n + 1] += w * p2;
            p0 = p1;
            p1 = p2;
        }
    }
    integrals
        .iter()
        .enumerate()
        .map(|(l, &i)| 0.5 * harmonic_norm(l) * i)
        .collect()
}

/// Parity-split ∑_{l > l_max} 4π·C_l² with 4π·C_l² = (2l+1)/4 · (∫P_l)².
fn asymptotic_tail(theta: f64, l_max: usize) -> [f64; 2] {
    let (sin_t, cos_t) = theta.sin_cos();
    let mut tail = [0.0; 2];
    for l in (l_max + 1)..=TAIL_TERMS.max(l_max + 1) {
        let lf = l as f64;
        let nu = lf + 0.5;
        let (s, c) = ((2.0 * lf + 1.0) * theta).sin_cos();
        let u = sin_t / PI * (1.0 - s) / (lf * (lf + 1.0)) - 3.0 * cos_t / (4.0 * PI) * c / (nu * nu * nu);
        tail[l % 2] += 0.5 * u;
    }
    // Envelope of the remainder, shared evenly by the parities.
    let n = TAIL_TERMS.max(l_max + 1) as f64;
    let rest = sin_t / PI / (4.0 * n);
    tail[0] += rest;
    tail[1] += rest;
    tail
}

/// γ̃/γ from the mode sum, with the mirror cap sized to the atom's coupling
/// fraction ε.
pub fn decay_ratio_mode_sum(atom: &AtomScatterer, mirror: &MirrorSpec, phi: f64, l_max: usize) -> Result<f64> {
    let rho = 2.0 * mirror.r() * atom.epsilon();
    if rho > 1.0 {
        return Err(Error::NegativeDecay(rho));
    }
    let theta_max = cap_half_angle(atom.epsilon())?;
    Ok(CapModeSum::new(theta_max, l_max)?.decay_ratio(mirror, phi))
}
