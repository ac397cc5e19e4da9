//! Entropy of Cauchy-distributed DCT coefficients under uniform quantization.
//!
//! A zero-mean Cauchy density with scale `gamma` is quantized with step `Q`.
//! Bin `n` covers `[(n - 1/2) Q, (n + 1/2) Q]`, whose probability mass reduces
//! to `(1/pi) * atan(gamma Q / (gamma^2 + (n^2 - 1/4) Q^2))`. The entropy of the
//! resulting discrete source stands in for the residual bit cost of a frame,
//! which makes it a cheap ground-truth generator for R-QP curves.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{RqpCurve, RqpSample};

/// Terms with probability below this are treated as `0 * log 0 = 0`.
pub const UNDERFLOW_PROBABILITY: f64 = 1e-300;
/// Adaptive truncation stops once a `+-n` pair contributes less than this.
pub const ADAPTIVE_TERM_TOLERANCE: f64 = 1e-12;
/// Upper bound on explicitly summed bins in adaptive mode.
pub const ADAPTIVE_MAX_N: u32 = 100_000;

/// How many `+-n` bins are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Sum exactly `n = +-1 ..= +-N`, nothing beyond.
    Fixed(u32),
    /// Sum until the next pair's contribution drops below
    /// [`ADAPTIVE_TERM_TOLERANCE`] (at most [`ADAPTIVE_MAX_N`] bins), then add
    /// the remaining tail by Euler-Maclaurin summation.
    Adaptive,
}

/// Scale and summation settings of the quantized Cauchy source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyParams {
    pub gamma: f64,
    pub truncation: Truncation,
    pub include_zero_bin: bool,
}

impl CauchyParams {
    /// Adaptive truncation with the zero bin included, so bin masses sum to one.
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            truncation: Truncation::Adaptive,
            include_zero_bin: true,
        }
    }

    /// The literal finite sum over `n = +-1 ..= +-N` without the zero bin.
    pub fn strict(gamma: f64, n: u32) -> Self {
        Self {
            gamma,
            truncation: Truncation::Fixed(n),
            include_zero_bin: false,
        }
    }

    pub fn with_zero_bin(mut self, include: bool) -> Self {
        self.include_zero_bin = include;
        self
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.truncation == Truncation::Fixed(0) {
            return Err(Error::Domain("truncation N must be at least 1".into()));
        }
        Ok(())
    }
}

/// Quantization step size.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Qstep(f64);

impl Qstep {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q.is_finite() {
            Ok(Qstep(q))
        } else {
            Err(Error::Domain(format!("qstep must be positive and finite, got {q}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `QP = 6 log2(Q) + 4`
    pub fn to_qp(self) -> f64 {
        6.0 * self.0.log2() + 4.0
    }

    pub fn from_qp(qp: f64) -> Result<Self> {
        Qstep::new(((qp - 4.0) / 6.0).exp2())
    }
}

pub fn qstep_to_qp(q: f64) -> Result<f64> {
    Ok(Qstep::new(q)?.to_qp())
}

pub fn qp_to_qstep(qp: f64) -> Result<f64> {
    Ok(Qstep::from_qp(qp)?.get())
}

fn bin_mass(gamma: f64, q: f64, n: f64) -> f64 {
    if n == 0.0 {
        2.0 / PI * (q / (2.0 * gamma)).atan()
    } else {
        (gamma * q / (gamma * gamma + (n * n - 0.25) * q * q)).atan() / PI
    }
}

fn surprisal_term(p: f64) -> f64 {
    if p < UNDERFLOW_PROBABILITY {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Probability mass of quantization bin `n`.
///
/// `n = 0` is only accepted when the zero bin is enabled.
pub fn bin_probability(params: &CauchyParams, q: Qstep, n: i64) -> Result<f64> {
    params.validate()?;
    if n == 0 && !params.include_zero_bin {
        return Err(Error::Domain("zero bin requested but include_zero_bin is off".into()));
    }
    Ok(bin_mass(params.gamma, q.get(), n as f64))
}

/// Discrete entropy in bits of the quantized source.
pub fn entropy(params: &CauchyParams, q: Qstep) -> Result<f64> {
    Ok(summarize(params, q)?.entropy)
}

/// Entropy together with the bin mass that was accounted for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropySummary {
    pub entropy: f64,
    /// Total probability mass covered: explicit bins plus the summed tail.
    pub mass: f64,
    /// Largest explicitly summed `|n|`.
    pub explicit_n: u32,
}

pub fn summarize(params: &CauchyParams, q: Qstep) -> Result<EntropySummary> {
    params.validate()?;
    let (gamma, q) = (params.gamma, q.get());

    let mut entropy = 0.0;
    let mut mass = 0.0;
    if params.include_zero_bin {
        let p0 = bin_mass(gamma, q, 0.0);
        entropy += surprisal_term(p0);
        mass += p0;
    }

    let mut n = 0u32;
    match params.truncation {
        Truncation::Fixed(limit) => {
            while n < limit {
                n += 1;
                let p = bin_mass(gamma, q, n as f64);
                entropy += 2.0 * surprisal_term(p);
                mass += 2.0 * p;
            }
        }
        Truncation::Adaptive => {
            while n < ADAPTIVE_MAX_N {
                let p = bin_mass(gamma, q, (n + 1) as f64);
                let term = 2.0 * surprisal_term(p);
                if term < ADAPTIVE_TERM_TOLERANCE {
                    break;
                }
                n += 1;
                entropy += term;
                mass += 2.0 * p;
            }
            let tail = tail_sums(gamma, q, n.max(1) as f64, n == 0);
            entropy += 2.0 * tail.entropy;
            mass += 2.0 * tail.mass;
        }
    }

    Ok(EntropySummary {
        entropy: entropy.max(0.0),
        mass,
        explicit_n: n,
    })
}

struct Tail {
    entropy: f64,
    mass: f64,
}

// Gauss-Legendre, 8 nodes on [-1, 1].
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Sum over bins `n > m` (or `n >= 1` when `include_m` is set and `m == 1`) via
/// Euler-Maclaurin: integral from `m` to infinity plus endpoint corrections.
fn tail_sums(gamma: f64, q: f64, m: f64, include_m: bool) -> Tail {
    let p = |x: f64| bin_mass(gamma, q, x);
    let f = |x: f64| surprisal_term(p(x));

    // x = m / s maps (0, 1] onto [m, inf); dyadic panels in s absorb the
    // logarithmic behaviour of the entropy integrand near s = 0.
    let mut int_f = 0.0;
    let mut int_p = 0.0;
    let mut hi = 1.0f64;
    for _ in 0..64 {
        let lo = hi * 0.5;
        let (mid, half) = ((hi + lo) * 0.5, (hi - lo) * 0.5);
        for (&node, &w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            for s in [mid - half * node, mid + half * node] {
                let x = m / s;
                let jac = m / (s * s);
                int_f += w * half * f(x) * jac;
                int_p += w * half * p(x) * jac;
            }
        }
        hi = lo;
    }

    let h = (m * 1e-3).max(1e-4);
    let df = (f(m + h) - f(m - h)) / (2.0 * h);
    let dp = (p(m + h) - p(m - h)) / (2.0 * h);
    // sum_{n >= m} g(n) = int_m^inf g + g(m)/2 - g'(m)/12 + ...
    let sign = if include_m { 1.0 } else { -1.0 };
    Tail {
        entropy: (int_f + sign * 0.5 * f(m) - df / 12.0).max(0.0),
        mass: (int_p + sign * 0.5 * p(m) - dp / 12.0).max(0.0),
    }
}

/// Builds an R-QP curve whose rate at each QP is `bits_scale * H(Q(qp))`.
pub fn synth_curve(params: &CauchyParams, qp_grid: &[f64], bits_scale: f64) -> Result<RqpCurve> {
    if qp_grid.is_empty() {
        return Err(Error::Domain("qp grid must be nonempty".into()));
    }
    if qp_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("qp grid must be strictly increasing".into()));
    }
    if !(bits_scale > 0.0 && bits_scale.is_finite()) {
        return Err(Error::Domain(format!("bits_scale must be positive, got {bits_scale}")));
    }
    let samples = qp_grid
        .iter()
        .map(|&qp| {
            let h = entropy(params, Qstep::from_qp(qp)?)?;
            Ok(RqpSample {
                qp,
                rate: bits_scale * h,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RqpCurve::new(samples)
}

/// `count` points spaced evenly in `ln Q` over `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}
