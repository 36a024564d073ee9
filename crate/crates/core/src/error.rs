use thiserror::Error;

use crate::scan::LorentzianFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("lossless mirror requires r² + t² = 1, got r = {r}, t = {t}")]
    NotLossless { r: f64, t: f64 },

    /// r = 1, ε = 1/2 and φ = 0 make the cavity response 0/0.
    #[error("singular cavity response: 2rε = 1 on resonance")]
    Singular,

    #[error("finesse diverges for 2εr = {0} ≥ 1")]
    DivergentFinesse(f64),

    #[error("modified decay rate would be negative: 2rε = {0} > 1")]
    NegativeDecay(f64),

    #[error("spherical harmonic index |m| = {m} exceeds l = {l}")]
    InvalidHarmonic { l: usize, m: i64 },

    #[error("empty detuning grid")]
    EmptyGrid,

    #[error("detuning grid is not sorted")]
    UnsortedGrid,

    #[error("flat curve: contrast is undefined")]
    FlatCurve,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank-deficient sinusoid design: sample phases do not span a period")]
    RankDeficient,

    #[error("Lorentzian fit did not converge after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        best: Box<LorentzianFit>,
    },

    #[error("unknown model selector `{0}` (expected fp, qed or aberrated)")]
    UnknownModel(String),

    #[error("Monte-Carlo estimate requested with zero samples")]
    NoSamples,
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    range: &'static str,
) -> Result<f64> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::OutOfRange { name, value, range })
    }
}
