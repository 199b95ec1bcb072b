//! Polynomial exactness checks of integration rules against analytic
//! Gaussian moments.

use crate::rng::RngStream;
use crate::rules::{build_rule, IntegrationScheme, RuleError, SigmaPointSet};

/// Deviation above which a monomial counts as not integrated exactly.
pub const INEXACT_THRESHOLD: f64 = 1e-6;

/// Exponent vectors of all monomials of total degree exactly `degree` in
/// `n` variables, in lexicographic order.
pub fn monomials(n: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e;
            rec(pos + 1, left - e, cur, out);
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(0, degree, &mut vec![0; n], &mut out);
    }
    out
}

/// `E[Π c_i^{α_i}]` for `c ~ N(0, I)`: zero if any exponent is odd, else the
/// product of `(α_i − 1)!!`.
pub fn gaussian_moment(alpha: &[u32]) -> f64 {
    alpha
        .iter()
        .map(|&a| {
            if a % 2 == 1 {
                0.0
            } else {
                (1..a).step_by(2).map(f64::from).product()
            }
        })
        .product()
}

/// Rule value `Σ_j w_j Π_i c_{ji}^{α_i}` for every monomial in `alphas`.
pub fn rule_moments(set: &SigmaPointSet, alphas: &[Vec<u32>]) -> Vec<f64> {
    let max_exp = alphas.iter().flatten().copied().max().unwrap_or(0) as usize;
    let n = set.dim();
    // powers[j][i * (max_exp + 1) + e] = c_{ji}^e
    let stride = max_exp + 1;
    let powers: Vec<Vec<f64>> = set
        .points()
        .column_iter()
        .map(|c| {
            let mut p = vec![1.0; n * stride];
            for i in 0..n {
                for e in 1..stride {
                    p[i * stride + e] = p[i * stride + e - 1] * c[i];
                }
            }
            p
        })
        .collect();
    alphas
        .iter()
        .map(|alpha| {
            let sparse: Vec<usize> = alpha
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| i * stride + e as usize)
                .collect();
            powers
                .iter()
                .zip(set.weights())
                .map(|(p, w)| w * sparse.iter().map(|&k| p[k]).product::<f64>())
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessReport {
    pub scheme: IntegrationScheme,
    pub n: usize,
    pub draws: usize,
    /// Degree the scheme claims to integrate exactly.
    pub degree: u32,
    /// `max_deviation[d]` is the largest `|rule − moment|` over all draws and
    /// all monomials of total degree `d`, for `d = 0..=degree + 1`.
    pub max_deviation: Vec<f64>,
    /// Monomial of degree `degree + 1` with the largest deviation.
    pub worst_next: Vec<u32>,
}

impl ExactnessReport {
    /// Largest deviation over degrees up to the claimed degree.
    pub fn exact_deviation(&self) -> f64 {
        self.max_deviation[..=self.degree as usize]
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// Whether some monomial of degree `degree + 1` is not integrated exactly.
    pub fn next_degree_inexact(&self) -> bool {
        self.max_deviation[self.degree as usize + 1] > INEXACT_THRESHOLD
    }
}

/// Checks `draws` independent draws (draw `l` from `rng.substream(l)`) on
/// every monomial of degree up to `degree + 1`.
pub fn rule_check(
    n: usize,
    scheme: &IntegrationScheme,
    draws: usize,
    rng: &RngStream,
) -> Result<ExactnessReport, RuleError> {
    let degree = scheme.kind().degree();
    let by_degree: Vec<Vec<Vec<u32>>> = (0..=degree + 1).map(|d| monomials(n, d)).collect();
    let truths: Vec<Vec<f64>> = by_degree
        .iter()
        .map(|ms| ms.iter().map(|a| gaussian_moment(a)).collect())
        .collect();
    let mut max_deviation = vec![0.0f64; by_degree.len()];
    let mut worst_next = (0.0f64, by_degree[degree as usize + 1][0].clone());
    let effective = if scheme.kind().is_deterministic() { 1 } else { draws.max(1) };
    for l in 0..effective {
        let set = build_rule(scheme, n, &mut rng.substream(l as u64))?;
        for (d, (ms, ts)) in by_degree.iter().zip(&truths).enumerate() {
            for ((alpha, truth), value) in ms.iter().zip(ts).zip(rule_moments(&set, ms)) {
                let dev = (value - truth).abs();
                max_deviation[d] = max_deviation[d].max(dev);
                if d == degree as usize + 1 && dev > worst_next.0 {
                    worst_next = (dev, alpha.clone());
                }
            }
        }
    }
    Ok(ExactnessReport {
        scheme: *scheme,
        n,
        draws: effective,
        degree,
        max_deviation,
        worst_next: worst_next.1,
    })
}
