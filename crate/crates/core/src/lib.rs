//! Models of a single atom in front of a distant mirror: the atom acts as
//! a weak mirror that forms a cavity with the dielectric one, or
//! equivalently the mirror reshapes the vacuum modes the atom couples to.
//!
//! * [`fp`]: scattering (Fabry–Pérot) picture.
//! * [`qed`]: modified decay rate, level shift and coupling, with the
//!   spherical-mode sum behind the decay rate.
//! * [`aberration`]: phase errors across the lens and their averages.
//! * [`scan`]: synthetic scans and spectra, sinusoid and Lorentzian fits.

pub mod aberration;
pub mod error;
pub mod fp;
pub mod qed;
pub mod scan;
pub mod special;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    cap_half_angle, reduce_phase, round_trip_phase, solid_angle_fraction, wrap_phase, AtomScatterer,
    CavityGeometry, MirrorSpec, ProbeSpec,
};
