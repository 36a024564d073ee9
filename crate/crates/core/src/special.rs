//! Special functions: the Bessel function J₀, Legendre polynomials and
//! Gauss–Legendre quadrature rules.

use std::f64::consts::PI;

/// Bessel function of the first kind, order zero.
///
/// Small arguments use the power series. Everything else goes through
/// Miller's backward recurrence normalised with J₀ + 2∑J₂ₖ = 1, which stays
/// at a few ulp of absolute error over the whole range used here (η ≤ 50
/// and well beyond).
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 1e-4 {
        let q = 0.25 * x * x;
        return 1.0 - q + 0.25 * q * q;
    }

    // Starting index well above x; the recurrence is stable downward.
    let start = 2 * ((x + 30.0 + 10.0 * x.sqrt()) as usize / 2);
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{k+1}
    let mut current = 1e-300; // J_k, arbitrary scale
    let mut even_sum = 0.0; // ∑ J_{2k}, k ≥ 1
    for k in (1..=start).rev() {
        let prev = k as f64 * two_over_x * current - next;
        next = current;
        current = prev;
        if current.abs() > 1e250 {
            current *= 1e-250;
            next *= 1e-250;
            even_sum *= 1e-250;
        }
        // `current` now holds J_{k-1}
        let order = k - 1;
        if order > 0 && order % 2 == 0 {
            even_sum += current;
        }
    }
    current / (current + 2.0 * even_sum)
}

/// Legendre polynomial P_l(x) by the three-term recurrence.
pub fn legendre_p(l: usize, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut p0, mut p1) = (1.0, x);
            for n in 1..l {
                let nf = n as f64;
                let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// P_0(x) ..= P_{l_max}(x).
pub fn legendre_table(l_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(l_max + 1);
    out.push(1.0);
    if l_max == 0 {
        return out;
    }
    out.push(x);
    for n in 1..l_max {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * out[n] - nf * out[n - 1]) / (nf + 1.0);
        out.push(next);
    }
    out
}

/// ∫ₓ¹ P_l(u) du from the antiderivative identity
/// (2l+1) P_l = P'_{l+1} - P'_{l-1}.
pub fn legendre_upper_integral(l: usize, x: f64) -> f64 {
    if l == 0 {
        1.0 - x
    } else {
        (legendre_p(l - 1, x) - legendre_p(l + 1, x)) / (2 * l + 1) as f64
    }
}

/// Gauss–Legendre nodes and weights on [a, b].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on [-1, 1]; exact for polynomials of degree 2n - 1.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Same rule mapped to [a, b].
    pub fn on_interval(n: usize, a: f64, b: f64) -> Self {
        let base = Self::new(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        Self {
            nodes: base.nodes.iter().map(|x| mid + half * x).collect(),
            weights: base.weights.iter().map(|w| half * w).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let prev = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (x * p - prev) / (x * x - 1.0);
    (p, d)
}
