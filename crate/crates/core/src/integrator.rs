//! Gaussian-weighted expectations `E[s(x)]`, `x ~ N(x̂, P)`.
//!
//! Rule nodes `c` are mapped to `x̂ + L c` with `L Lᵀ = P`, the integrand is
//! evaluated there and the weighted sums of `N_m` independent draws are
//! averaged. The origin is the same point for every draw, so its value is
//! computed once per call.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{spd_sqrt, LinalgError, SpdMatrix};
use crate::rng::RngStream;
use crate::rules::{build_rule, IntegrationScheme, RuleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("function {function} returned shape {got:?}, declared {expected:?}")]
    ShapeMismatch {
        function: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("function {function} is not finite at x = {x:?} (draw {repetition}, node {node})")]
    NonFinite {
        function: usize,
        repetition: usize,
        node: usize,
        x: Vec<f64>,
    },
}

/// Filtering density `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    cov: SpdMatrix,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self, IntegrationError> {
        if mean.len() != cov.dim() {
            return Err(IntegrationError::DimensionMismatch {
                expected: cov.dim(),
                actual: mean.len(),
            });
        }
        if let Some(i) = mean.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite { row: i, col: 0 }.into());
        }
        Ok(Self { mean, cov })
    }

    pub fn standard(n: usize) -> Self {
        Self {
            mean: DVector::zeros(n),
            cov: SpdMatrix::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }
}

type Callable = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// Integrand with a fixed output shape. Matrix-valued integrands are
/// accumulated entry-wise.
#[derive(Clone)]
pub struct VectorFunction {
    rows: usize,
    cols: usize,
    f: Arc<Callable>,
}

impl fmt::Debug for VectorFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFunction")
            .field("shape", &(self.rows, self.cols))
            .finish_non_exhaustive()
    }
}

impl VectorFunction {
    pub fn matrix<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            rows,
            cols,
            f: Arc::new(f),
        }
    }

    pub fn vector<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self::matrix(dim, 1, move |x| {
            let v = f(x);
            let len = v.len();
            v.reshape_generic(nalgebra::Dyn(len), nalgebra::Dyn(1))
        })
    }

    pub fn scalar<F>(f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        Self::matrix(1, 1, move |x| DMatrix::from_element(1, 1, f(x)))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn call(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.f)(x)
    }

    /// `x ↦ s(x) s(x)ᵀ` for a vector-valued `s`.
    pub fn outer_self(&self) -> VectorFunction {
        let inner = self.clone();
        let m = self.rows;
        Self::matrix(m, m, move |x| {
            let v = inner.call(x);
            &v * v.transpose()
        })
    }

    /// `x ↦ x s(x)ᵀ` for an `n`-dimensional argument.
    pub fn outer_with_arg(&self, n: usize) -> VectorFunction {
        let inner = self.clone();
        Self::matrix(n, self.rows, move |x| x * inner.call(x).transpose())
    }
}

fn evaluate(
    fns: &[&VectorFunction],
    x: &DVector<f64>,
    repetition: usize,
    node: usize,
) -> Result<Vec<DMatrix<f64>>, IntegrationError> {
    fns.iter()
        .enumerate()
        .map(|(i, f)| {
            let v = f.call(x);
            if v.shape() != f.shape() {
                return Err(IntegrationError::ShapeMismatch {
                    function: i,
                    expected: f.shape(),
                    got: v.shape(),
                });
            }
            if v.iter().any(|e| !e.is_finite()) {
                return Err(IntegrationError::NonFinite {
                    function: i,
                    repetition,
                    node,
                    x: x.iter().copied().collect(),
                });
            }
            Ok(v)
        })
        .collect()
}

/// Sums in a fixed binary tree over the index order.
fn pairwise_sum(parts: &[Vec<DMatrix<f64>>]) -> Vec<DMatrix<f64>> {
    match parts.len() {
        0 => Vec::new(),
        1 => parts[0].clone(),
        len => {
            let (a, b) = parts.split_at(len / 2);
            pairwise_sum(a)
                .into_iter()
                .zip(pairwise_sum(b))
                .map(|(x, y)| x + y)
                .collect()
        }
    }
}

/// Estimate of `E[s(x)]`.
pub fn expect(
    s: &VectorFunction,
    belief: &GaussianBelief,
    scheme: &IntegrationScheme,
    rng: &RngStream,
) -> Result<DMatrix<f64>, IntegrationError> {
    Ok(expect_batch(&[s], belief, scheme, rng)?.remove(0))
}

/// Estimates of `E[s_i(x)]` for several integrands on the same draws.
///
/// Draw `l` uses `rng.substream(l)`, so the result depends only on the
/// stream address and not on the state of `rng`.
pub fn expect_batch(
    fns: &[&VectorFunction],
    belief: &GaussianBelief,
    scheme: &IntegrationScheme,
    rng: &RngStream,
) -> Result<Vec<DMatrix<f64>>, IntegrationError> {
    let n = belief.dim();
    scheme.check_dimension(n)?;
    let sqrt_cov = spd_sqrt(belief.cov())?;
    let center = if scheme.kind().has_center() {
        Some(evaluate(fns, belief.mean(), 0, 0)?)
    } else {
        None
    };

    let mut per_draw = Vec::with_capacity(scheme.n_m());
    for l in 0..scheme.n_m() {
        let rule = build_rule(scheme, n, &mut rng.substream(l as u64))?;
        let mut nodes = &sqrt_cov * rule.points();
        for mut col in nodes.column_iter_mut() {
            col += belief.mean();
        }
        let mut acc: Vec<DMatrix<f64>> = fns.iter().map(|f| DMatrix::zeros(f.rows, f.cols)).collect();
        let mut weight_sum = 0.0;
        for (j, (x, &w)) in nodes.column_iter().zip(rule.weights()).enumerate() {
            weight_sum += w;
            let values = match (&center, j) {
                (Some(c), 0) => c.clone(),
                _ => evaluate(fns, &x.into_owned(), l, j)?,
            };
            for (a, v) in acc.iter_mut().zip(values) {
                *a += v * w;
            }
        }
        // the weights sum to 1 up to rounding; dividing by the sum taken in the
        // same order makes constants come out exact
        per_draw.push(acc.into_iter().map(|a| a / weight_sum).collect());
    }

    let draws = scheme.n_m() as f64;
    Ok(pairwise_sum(&per_draw).into_iter().map(|m| m / draws).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::SchemeKind;
    use nalgebra::dmatrix;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn all_schemes() -> Vec<IntegrationScheme> {
        vec![
            IntegrationScheme::ckf3(),
            IntegrationScheme::ckf5(),
            IntegrationScheme::sif3(4).unwrap(),
            IntegrationScheme::sif5(3).unwrap(),
            IntegrationScheme::qsif5(3).unwrap(),
        ]
    }

    fn belief() -> GaussianBelief {
        let cov = SpdMatrix::new(dmatrix![2.0, 0.3, 0.1; 0.3, 1.0, -0.2; 0.1, -0.2, 0.5]).unwrap();
        GaussianBelief::new(DVector::from_vec(vec![1.0, -2.0, 0.5]), cov).unwrap()
    }

    #[test]
    fn identity_returns_mean() {
        let b = belief();
        let id = VectorFunction::vector(3, |x| x.clone());
        for scheme in all_schemes() {
            for seed in 0..5 {
                let m = expect(&id, &b, &scheme, &RngStream::new(seed)).unwrap();
                assert!((m.column(0) - b.mean()).amax() < 1e-9, "{scheme}");
            }
        }
    }

    #[test]
    fn second_moment_is_cov_plus_outer_mean() {
        let b = belief();
        let outer = VectorFunction::vector(3, |x| x.clone()).outer_self();
        let truth = b.cov().as_matrix() + b.mean() * b.mean().transpose();
        for scheme in all_schemes() {
            let m = expect(&outer, &b, &scheme, &RngStream::new(3)).unwrap();
            assert!((m - &truth).amax() < 1e-9, "{scheme}");
        }
    }

    #[test]
    fn batch_shares_draws() {
        let b = GaussianBelief::standard(4);
        let x = VectorFunction::vector(4, |x| x.clone());
        let xx = x.outer_self();
        let scheme = IntegrationScheme::sif5(2).unwrap();
        let rng = RngStream::new(10);
        let batch = expect_batch(&[&x, &xx], &b, &scheme, &rng).unwrap();
        assert!(batch[0].amax() < 1e-12);
        assert!((&batch[1] - DMatrix::identity(4, 4)).amax() < 1e-9);
        let single = expect(&xx, &b, &scheme, &rng).unwrap();
        assert_eq!(single, batch[1]);
    }

    #[test]
    fn evaluation_count_matches_scheme() {
        for scheme in all_schemes().into_iter().chain([IntegrationScheme::mc(37).unwrap()]) {
            let calls = Arc::new(AtomicUsize::new(0));
            let c = calls.clone();
            let f = VectorFunction::scalar(move |x| {
                c.fetch_add(1, Ordering::Relaxed);
                x[0]
            });
            expect(&f, &GaussianBelief::standard(6), &scheme, &RngStream::new(0)).unwrap();
            assert_eq!(calls.load(Ordering::Relaxed), scheme.evaluation_count(6), "{scheme}");
        }
    }

    #[test]
    fn non_finite_is_reported() {
        let f = VectorFunction::scalar(|x| if x[0] > 0.5 { f64::NAN } else { 0.0 });
        let err = expect(&f, &GaussianBelief::standard(2), &IntegrationScheme::ckf3(), &RngStream::new(0))
            .unwrap_err();
        match err {
            IntegrationError::NonFinite { x, .. } => assert!(x[0] > 0.5),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let f = VectorFunction::matrix(2, 1, |_| DMatrix::zeros(3, 1));
        let err = expect(&f, &GaussianBelief::standard(2), &IntegrationScheme::ckf3(), &RngStream::new(0));
        assert!(matches!(err, Err(IntegrationError::ShapeMismatch { .. })));
    }

    #[test]
    fn dimension_checks() {
        let f = VectorFunction::scalar(|x| x[0]);
        let err = expect(&f, &GaussianBelief::standard(1), &IntegrationScheme::sif5(1).unwrap(), &RngStream::new(0));
        assert!(matches!(
            err,
            Err(IntegrationError::Rule(RuleError::DimensionTooSmall {
                kind: SchemeKind::Sif5,
                ..
            }))
        ));
        assert!(GaussianBelief::new(DVector::zeros(2), SpdMatrix::identity(3)).is_err());
    }

    #[test]
    fn deterministic_schemes_ignore_seed() {
        let f = VectorFunction::scalar(|x| x.iter().map(|v| v.powi(6)).sum());
        let b = GaussianBelief::standard(3);
        for scheme in [IntegrationScheme::ckf3(), IntegrationScheme::ckf5()] {
            let a = expect(&f, &b, &scheme, &RngStream::new(1)).unwrap();
            let c = expect(&f, &b, &scheme, &RngStream::new(2)).unwrap();
            assert_eq!(a, c);
        }
    }
}
