//! Chi, beta and radial-node samplers for the stochastic radial rules.

use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::rng::RngStream;

/// Nodes closer than this (or a first node below it) make the fifth-degree
/// radial weights blow up and are redrawn.
pub const DEGENERATE_NODE_TOL: f64 = 1e-12;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("chi distribution needs at least one degree of freedom")]
    ZeroDof,
    #[error("invalid beta parameters alpha={alpha}, beta={beta}")]
    InvalidBeta { alpha: f64, beta: f64 },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("invalid radial nodes rho1={rho1}, rho2={rho2}")]
    InvalidNodes { rho1: f64, rho2: f64 },
    #[error("sampler produced degenerate values {attempts} times in a row")]
    TooManyRedraws { attempts: usize },
}

/// Square root of a chi-square variate, drawn as `sqrt(Gamma(dof/2, 2))`.
pub fn sample_chi(dof: u32, rng: &mut RngStream) -> Result<f64, SamplingError> {
    if dof == 0 {
        return Err(SamplingError::ZeroDof);
    }
    let gamma = Gamma::new(dof as f64 / 2.0, 2.0).expect("positive gamma parameters");
    for _ in 0..MAX_REDRAWS {
        let x = gamma.sample(rng).sqrt();
        if x > 0.0 {
            return Ok(x);
        }
    }
    Err(SamplingError::TooManyRedraws {
        attempts: MAX_REDRAWS,
    })
}

/// Beta variate as `X / (X + Y)` with `X ~ Gamma(alpha)`, `Y ~ Gamma(beta)`.
/// Results that round to 0 or 1 are redrawn.
pub fn sample_beta(alpha: f64, beta: f64, rng: &mut RngStream) -> Result<f64, SamplingError> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(SamplingError::InvalidBeta { alpha, beta });
    }
    let ga = Gamma::new(alpha, 1.0).expect("validated");
    let gb = Gamma::new(beta, 1.0).expect("validated");
    for _ in 0..MAX_REDRAWS {
        let x = ga.sample(rng);
        let y = gb.sample(rng);
        let b = x / (x + y);
        if b > 0.0 && b < 1.0 {
            return Ok(b);
        }
    }
    Err(SamplingError::TooManyRedraws {
        attempts: MAX_REDRAWS,
    })
}

/// Radial node of the third-degree rule: chi with `n + 2` degrees of freedom,
/// i.e. density proportional to `ρ^(n+1) exp(-ρ²/2)`.
pub fn sample_radial_single(n: usize, rng: &mut RngStream) -> Result<f64, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroDimension);
    }
    sample_chi(n as u32 + 2, rng)
}

/// Ordered node pair `rho1 < rho2` of the fifth-degree radial rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPair {
    rho1: f64,
    rho2: f64,
}

impl RadialPair {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self, SamplingError> {
        let ok = rho1.is_finite()
            && rho2.is_finite()
            && rho1 >= DEGENERATE_NODE_TOL
            && rho2 - rho1 > DEGENERATE_NODE_TOL;
        if ok {
            Ok(Self { rho1, rho2 })
        } else {
            Err(SamplingError::InvalidNodes { rho1, rho2 })
        }
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }
}

/// Draws `(rho1, rho2)` with joint density proportional to
///
/// ```text
/// (ρ1 ρ2)^(n+1) exp(-(ρ1² + ρ2²)/2) (ρ2 - ρ1)² (ρ2 + ρ1),   ρ1 < ρ2
/// ```
///
/// through the polar transform `ρ1 = η1 sin(½ asin η2)`,
/// `ρ2 = η1 cos(½ asin η2)` with `η1 ~ chi(2n + 7)` and
/// `η2 ~ Beta(n + 2, 3/2)`.
pub fn sample_radial_pair(n: usize, rng: &mut RngStream) -> Result<RadialPair, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroDimension);
    }
    let dof = 2 * n as u32 + 7;
    let alpha = n as f64 + 2.0;
    for _ in 0..MAX_REDRAWS {
        let eta1 = sample_chi(dof, rng)?;
        let eta2 = sample_beta(alpha, 1.5, rng)?;
        let half_angle = 0.5 * eta2.asin();
        let (s, c) = half_angle.sin_cos();
        if let Ok(pair) = RadialPair::new(eta1 * s, eta1 * c) {
            return Ok(pair);
        }
    }
    Err(SamplingError::TooManyRedraws {
        attempts: MAX_REDRAWS,
    })
}
