//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code under test except for `RngStream` as a bit source.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use srcf::RngStream;

/// Unnormalised log-density of the fifth-degree radial pair on `0 < r1 < r2`.
pub fn log_pair_density(n: usize, r1: f64, r2: f64) -> f64 {
    if !(0.0 < r1 && r1 < r2) {
        return f64::NEG_INFINITY;
    }
    let k = n as f64 + 1.0;
    k * (r1 * r2).ln() - 0.5 * (r1 * r1 + r2 * r2) + 2.0 * (r2 - r1).ln() + (r2 + r1).ln()
}

/// Rejection sampler for the radial pair over the truncated box `[0, B]²`
/// with a uniform proposal. The envelope comes from a fine grid maximum with
/// a safety margin.
pub struct PairOracle {
    n: usize,
    bound: f64,
    log_max: f64,
}

impl PairOracle {
    pub fn new(n: usize) -> Self {
        // the radius is chi(2n+7), so the mass beyond mean + 10 is negligible
        let bound = ((2 * n + 7) as f64).sqrt() + 10.0;
        let grid = 800;
        let mut log_max = f64::NEG_INFINITY;
        for i in 1..grid {
            for j in (i + 1)..grid {
                let r1 = bound * i as f64 / grid as f64;
                let r2 = bound * j as f64 / grid as f64;
                log_max = log_max.max(log_pair_density(n, r1, r2));
            }
        }
        Self {
            n,
            bound,
            log_max: log_max + 0.5,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> (f64, f64) {
        loop {
            let r1 = rng.random::<f64>() * self.bound;
            let r2 = rng.random::<f64>() * self.bound;
            let lp = log_pair_density(self.n, r1, r2);
            let u: f64 = rng.random();
            if lp > f64::NEG_INFINITY {
                assert!(lp <= self.log_max, "envelope too low");
                if u.ln() < lp - self.log_max {
                    return (r1, r2);
                }
            }
        }
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a two-sample KS statistic.
pub fn ks_p_value(d: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Textbook Kalman filter for `x' = A x + w`, `y = C x + v`.
pub struct Kalman {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl Kalman {
    pub fn run(
        &self,
        mut mean: DVector<f64>,
        mut cov: DMatrix<f64>,
        ys: &[DVector<f64>],
    ) -> Vec<(DVector<f64>, DMatrix<f64>)> {
        ys.iter()
            .map(|y| {
                let mp = &self.a * &mean;
                let pp = &self.a * &cov * self.a.transpose() + &self.q;
                let s = &self.c * &pp * self.c.transpose() + &self.r;
                let k = &pp * self.c.transpose() * s.try_inverse().expect("innovation covariance invertible");
                mean = &mp + &k * (y - &self.c * &mp);
                cov = &pp - &k * &self.c * &pp;
                (mean.clone(), cov.clone())
            })
            .collect()
    }
}

/// Random matrix with i.i.d. N(0, scale²) entries.
pub fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut RngStream) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Random SPD matrix `M Mᵀ + floor·I`.
pub fn random_spd(n: usize, floor: f64, rng: &mut RngStream) -> DMatrix<f64> {
    let m = gaussian_matrix(n, n, 1.0, rng);
    &m * m.transpose() + DMatrix::identity(n, n) * floor
}

/// Every exponent vector of length `n` with total degree `<= max_degree`.
pub fn exponent_vectors(n: usize, max_degree: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; n]];
    let mut frontier = vec![vec![0u32; n]];
    for _ in 0..max_degree {
        let mut next = Vec::new();
        for alpha in &frontier {
            // raise only coordinates at or after the last raised one, so each
            // vector is produced once
            let start = alpha.iter().rposition(|&a| a > 0).unwrap_or(0);
            for i in start..n {
                let mut b = alpha.clone();
                b[i] += 1;
                next.push(b);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// `E[Π c_i^{α_i}]` for `c ~ N(0, I)`: product of `(α_i − 1)!!` for even `α_i`.
pub fn gaussian_monomial(alpha: &[u32]) -> f64 {
    alpha
        .iter()
        .map(|&a| {
            if a % 2 == 1 {
                0.0
            } else {
                (1..a).step_by(2).map(|k| k as f64).product::<f64>()
            }
        })
        .product()
}

/// `Σ_j w_j Π_i c_ij^{α_i}` with points stored one per column.
pub fn weighted_monomial(points: &DMatrix<f64>, weights: &[f64], alpha: &[u32]) -> f64 {
    points
        .column_iter()
        .zip(weights)
        .map(|(c, w)| w * c.iter().zip(alpha).map(|(x, &a)| x.powi(a as i32)).product::<f64>())
        .sum()
}
