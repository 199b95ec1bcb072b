//! Gaussian-assumed Bayesian filter.
//!
//! One recursion for every [`IntegrationScheme`]: the state prediction
//! integrates `f` and `f fᵀ` on shared draws, the observation prediction
//! integrates `h`, `x hᵀ` and `h hᵀ` on a fresh set of shared draws, and the
//! correction is the usual linear update.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::integrator::{expect_batch, GaussianBelief, IntegrationError, VectorFunction};
use crate::linalg::{LinalgError, SpdMatrix};
use crate::rng::RngStream;
use crate::rules::IntegrationScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    StatePrediction,
    ObservationPrediction,
    Correction,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::StatePrediction => "state prediction",
            Stage::ObservationPrediction => "observation prediction",
            Stage::Correction => "correction",
        })
    }
}

fn at(step: &Option<usize>) -> String {
    step.map(|k| format!(" at step {k}")).unwrap_or_default()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("invalid model: {0}")]
    Model(String),
    #[error("filter diverged in {stage}{}: covariance not positive definite", at(.step))]
    Diverged { stage: Stage, step: Option<usize> },
    #[error("{stage} failed{}: {source}", at(.step))]
    Integration {
        stage: Stage,
        step: Option<usize>,
        #[source]
        source: IntegrationError,
    },
}

impl FilterError {
    pub fn step(&self) -> Option<usize> {
        match self {
            FilterError::Model(_) => None,
            FilterError::Diverged { step, .. } | FilterError::Integration { step, .. } => *step,
        }
    }

    fn at_step(mut self, k: usize) -> Self {
        match &mut self {
            FilterError::Diverged { step, .. } | FilterError::Integration { step, .. } => *step = Some(k),
            FilterError::Model(_) => {}
        }
        self
    }

    fn integration(stage: Stage) -> impl FnOnce(IntegrationError) -> Self {
        move |source| FilterError::Integration {
            stage,
            step: None,
            source,
        }
    }

    fn diverged(stage: Stage) -> impl FnOnce(LinalgError) -> Self {
        move |_| FilterError::Diverged { stage, step: None }
    }
}

/// `x_k = f(x_{k-1}) + w_k`, `y_k = h(x_k) + v_k` with additive Gaussian
/// noise `w ~ N(0, Q)`, `v ~ N(0, R)`.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    f: VectorFunction,
    h: VectorFunction,
    q: SpdMatrix,
    r: SpdMatrix,
}

impl StateSpaceModel {
    pub fn new(f: VectorFunction, h: VectorFunction, q: SpdMatrix, r: SpdMatrix) -> Result<Self, FilterError> {
        let n = q.dim();
        let m = r.dim();
        if f.shape() != (n, 1) {
            return Err(FilterError::Model(format!(
                "transition returns {:?}, process noise is {n}x{n}",
                f.shape()
            )));
        }
        if h.shape() != (m, 1) {
            return Err(FilterError::Model(format!(
                "observation returns {:?}, observation noise is {m}x{m}",
                h.shape()
            )));
        }
        Ok(Self { f, h, q, r })
    }

    pub fn state_dim(&self) -> usize {
        self.q.dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.r.dim()
    }

    pub fn transition(&self) -> &VectorFunction {
        &self.f
    }

    pub fn observation(&self) -> &VectorFunction {
        &self.h
    }

    pub fn process_noise(&self) -> &SpdMatrix {
        &self.q
    }

    pub fn observation_noise(&self) -> &SpdMatrix {
        &self.r
    }

    fn check_belief(&self, b: &GaussianBelief) -> Result<(), FilterError> {
        if b.dim() == self.state_dim() {
            Ok(())
        } else {
            Err(FilterError::Model(format!(
                "belief has dimension {}, model state has {}",
                b.dim(),
                self.state_dim()
            )))
        }
    }
}

/// Predicted observation moments `ŷ`, `P^xy`, `P^yy`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedObservation {
    pub y_hat: DVector<f64>,
    pub pxy: DMatrix<f64>,
    pub pyy: SpdMatrix,
}

fn column(m: DMatrix<f64>) -> DVector<f64> {
    m.column(0).into_owned()
}

/// `x̂ = E[f]`, `P = E[f fᵀ] − x̂ x̂ᵀ + Q`.
pub fn predict_state(
    prior: &GaussianBelief,
    model: &StateSpaceModel,
    scheme: &IntegrationScheme,
    rng: &RngStream,
) -> Result<GaussianBelief, FilterError> {
    model.check_belief(prior)?;
    let stage = Stage::StatePrediction;
    let f2 = model.f.outer_self();
    let mut moments = expect_batch(&[&model.f, &f2], prior, scheme, rng)
        .map_err(FilterError::integration(stage))?
        .into_iter();
    let mean = column(moments.next().unwrap());
    let second = moments.next().unwrap();
    let cov = second - &mean * mean.transpose() + model.q.as_matrix();
    let cov = SpdMatrix::condition(cov).map_err(FilterError::diverged(stage))?;
    GaussianBelief::new(mean, cov).map_err(FilterError::integration(stage))
}

/// `ŷ = E[h]`, `P^xy = E[x hᵀ] − x̂ ŷᵀ`, `P^yy = E[h hᵀ] − ŷ ŷᵀ + R`.
pub fn predict_observation(
    pred: &GaussianBelief,
    model: &StateSpaceModel,
    scheme: &IntegrationScheme,
    rng: &RngStream,
) -> Result<PredictedObservation, FilterError> {
    model.check_belief(pred)?;
    let stage = Stage::ObservationPrediction;
    let h2 = model.h.outer_with_arg(model.state_dim());
    let h3 = model.h.outer_self();
    let mut moments = expect_batch(&[&model.h, &h2, &h3], pred, scheme, rng)
        .map_err(FilterError::integration(stage))?
        .into_iter();
    let y_hat = column(moments.next().unwrap());
    let pxy = moments.next().unwrap() - pred.mean() * y_hat.transpose();
    let pyy = moments.next().unwrap() - &y_hat * y_hat.transpose() + model.r.as_matrix();
    let pyy = SpdMatrix::symmetrize(pyy).map_err(FilterError::diverged(stage))?;
    Ok(PredictedObservation { y_hat, pxy, pyy })
}

/// Linear update with gain `K = P^xy (P^yy)⁻¹`, solved through the Cholesky
/// factor of `P^yy`.
pub fn correct(
    pred: &GaussianBelief,
    obs: &PredictedObservation,
    y: &DVector<f64>,
) -> Result<GaussianBelief, FilterError> {
    let stage = Stage::Correction;
    let n = pred.dim();
    let m = obs.y_hat.len();
    if y.len() != m || obs.pxy.shape() != (n, m) || obs.pyy.dim() != m {
        return Err(FilterError::Model(format!(
            "observation of length {} against prediction of length {m}",
            y.len()
        )));
    }
    let (l, _) = obs.pyy.cholesky_with_jitter().map_err(FilterError::diverged(stage))?;
    // K Pyy = Pxy  <=>  Pyy Kᵀ = Pxyᵀ
    let kt = l
        .solve_lower_triangular(&obs.pxy.transpose())
        .and_then(|z| l.transpose().solve_upper_triangular(&z))
        .ok_or(FilterError::Diverged { stage, step: None })?;
    let gain = kt.transpose();
    let mean = pred.mean() + &gain * (y - &obs.y_hat);
    let cov = pred.cov().as_matrix() - &gain * obs.pxy.transpose();
    let cov = SpdMatrix::condition(cov).map_err(FilterError::diverged(stage))?;
    GaussianBelief::new(mean, cov).map_err(FilterError::integration(stage))
}

/// Stateful filter that consumes one observation per [`Filter::step`].
#[derive(Debug, Clone)]
pub struct Filter {
    model: StateSpaceModel,
    scheme: IntegrationScheme,
    belief: GaussianBelief,
    rng: RngStream,
    step: usize,
}

impl Filter {
    pub fn new(
        model: StateSpaceModel,
        scheme: IntegrationScheme,
        init: GaussianBelief,
        rng: RngStream,
    ) -> Result<Self, FilterError> {
        model.check_belief(&init)?;
        scheme
            .check_dimension(model.state_dim())
            .map_err(|e| FilterError::Model(e.to_string()))?;
        Ok(Self {
            model,
            scheme,
            belief: init,
            rng,
            step: 0,
        })
    }

    pub fn belief(&self) -> &GaussianBelief {
        &self.belief
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    /// Predict and correct with observation `y`. Step `k` draws its rules
    /// from substreams `(k, 0)` and `(k, 1)` of the filter stream.
    pub fn step(&mut self, y: &DVector<f64>) -> Result<&GaussianBelief, FilterError> {
        let k = self.step;
        let base = self.rng.substream(k as u64);
        let run = || -> Result<GaussianBelief, FilterError> {
            let pred = predict_state(&self.belief, &self.model, &self.scheme, &base.substream(0))?;
            let obs = predict_observation(&pred, &self.model, &self.scheme, &base.substream(1))?;
            correct(&pred, &obs, y)
        };
        self.belief = run().map_err(|e| e.at_step(k))?;
        self.step += 1;
        Ok(&self.belief)
    }
}

/// Posterior after every observation in `ys`.
pub fn run_filter(
    model: &StateSpaceModel,
    scheme: &IntegrationScheme,
    ys: &[DVector<f64>],
    init: &GaussianBelief,
    rng: &RngStream,
) -> Result<Vec<GaussianBelief>, FilterError> {
    if ys.is_empty() {
        return Err(FilterError::Model("empty observation sequence".into()));
    }
    let mut filter = Filter::new(model.clone(), *scheme, init.clone(), rng.clone())?;
    ys.iter().map(|y| filter.step(y).cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn schemes() -> Vec<IntegrationScheme> {
        vec![
            IntegrationScheme::ckf3(),
            IntegrationScheme::ckf5(),
            IntegrationScheme::sif3(3).unwrap(),
            IntegrationScheme::sif5(2).unwrap(),
            IntegrationScheme::qsif5(2).unwrap(),
        ]
    }

    fn linear(a: DMatrix<f64>) -> VectorFunction {
        let rows = a.nrows();
        VectorFunction::vector(rows, move |x| &a * x)
    }

    fn prior() -> GaussianBelief {
        let cov = SpdMatrix::new(dmatrix![2.0, 0.4; 0.4, 1.0]).unwrap();
        GaussianBelief::new(DVector::from_vec(vec![0.5, -1.0]), cov).unwrap()
    }

    #[test]
    fn identity_dynamics_keep_prior() {
        let model = StateSpaceModel::new(
            linear(DMatrix::identity(2, 2)),
            linear(DMatrix::identity(2, 2)),
            SpdMatrix::new(DMatrix::zeros(2, 2)).unwrap(),
            SpdMatrix::identity(2),
        )
        .unwrap();
        for scheme in schemes() {
            let p = predict_state(&prior(), &model, &scheme, &RngStream::new(1)).unwrap();
            assert!((p.mean() - prior().mean()).amax() < 1e-9);
            assert!((p.cov().as_matrix() - prior().cov().as_matrix()).amax() < 1e-9);
        }
    }

    #[test]
    fn linear_prediction_matches_closed_form() {
        let a = dmatrix![0.9, 0.2; -0.1, 1.1];
        let c = dmatrix![1.0, -0.5];
        let q = SpdMatrix::new(dmatrix![0.3, 0.05; 0.05, 0.2]).unwrap();
        let r = SpdMatrix::new(dmatrix![0.7]).unwrap();
        let model = StateSpaceModel::new(linear(a.clone()), linear(c.clone()), q.clone(), r.clone()).unwrap();
        let p0 = prior();
        let want_mean = &a * p0.mean();
        let want_cov = &a * p0.cov().as_matrix() * a.transpose() + q.as_matrix();
        for scheme in schemes() {
            let p = predict_state(&p0, &model, &scheme, &RngStream::new(2)).unwrap();
            assert!((p.mean() - &want_mean).amax() < 1e-8, "{scheme}");
            assert!((p.cov().as_matrix() - &want_cov).amax() < 1e-8, "{scheme}");
            let o = predict_observation(&p, &model, &scheme, &RngStream::new(3)).unwrap();
            let pc = p.cov().as_matrix();
            assert!((&o.y_hat - &c * p.mean()).amax() < 1e-8);
            assert!((&o.pxy - pc * c.transpose()).amax() < 1e-8);
            assert!((o.pyy.as_matrix() - (&c * pc * c.transpose() + r.as_matrix())).amax() < 1e-8);
        }
    }

    #[test]
    fn growth_model_prediction() {
        let n = 10;
        let model = StateSpaceModel::new(
            VectorFunction::vector(n, |x| x * 0.9),
            VectorFunction::scalar(|x| x.norm_squared()),
            SpdMatrix::scaled_identity(n, 100.0),
            SpdMatrix::scaled_identity(1, 10.0),
        )
        .unwrap();
        let prior = GaussianBelief::new(DVector::from_element(n, 1.0), SpdMatrix::scaled_identity(n, 10.0)).unwrap();
        for scheme in schemes() {
            let p = predict_state(&prior, &model, &scheme, &RngStream::new(4)).unwrap();
            assert!((p.mean() - DVector::from_element(n, 0.9)).amax() < 1e-9);
            assert!((p.cov().as_matrix() - DMatrix::identity(n, n) * 108.1).amax() < 1e-8);
        }
    }

    #[test]
    fn identity_observation_without_noise() {
        let model = StateSpaceModel::new(
            linear(DMatrix::identity(2, 2)),
            linear(DMatrix::identity(2, 2)),
            SpdMatrix::identity(2),
            SpdMatrix::new(DMatrix::zeros(2, 2)).unwrap(),
        )
        .unwrap();
        for scheme in schemes() {
            let o = predict_observation(&prior(), &model, &scheme, &RngStream::new(5)).unwrap();
            assert!((&o.y_hat - prior().mean()).amax() < 1e-8);
            assert!((&o.pxy - prior().cov().as_matrix()).amax() < 1e-8);
            assert!((o.pyy.as_matrix() - prior().cov().as_matrix()).amax() < 1e-8);
        }
    }

    #[test]
    fn constant_observation() {
        let model = StateSpaceModel::new(
            linear(DMatrix::identity(2, 2)),
            VectorFunction::scalar(|_| 3.5),
            SpdMatrix::identity(2),
            SpdMatrix::new(dmatrix![0.25]).unwrap(),
        )
        .unwrap();
        for scheme in schemes() {
            let o = predict_observation(&prior(), &model, &scheme, &RngStream::new(6)).unwrap();
            assert!((o.y_hat[0] - 3.5).abs() < 1e-12);
            assert!(o.pxy.amax() < 1e-12);
            assert!((o.pyy.as_matrix()[(0, 0)] - 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_cross_covariance_leaves_prediction() {
        let pred = prior();
        let obs = PredictedObservation {
            y_hat: DVector::from_vec(vec![1.0]),
            pxy: DMatrix::zeros(2, 1),
            pyy: SpdMatrix::new(dmatrix![2.0]).unwrap(),
        };
        let post = correct(&pred, &obs, &DVector::from_vec(vec![5.0])).unwrap();
        assert_eq!(post, pred);
    }

    #[test]
    fn scalar_correction_by_hand() {
        let pred = GaussianBelief::new(DVector::from_vec(vec![3.0]), SpdMatrix::identity(1)).unwrap();
        let obs = PredictedObservation {
            y_hat: DVector::from_vec(vec![0.0]),
            pxy: dmatrix![1.0],
            pyy: SpdMatrix::new(dmatrix![2.0]).unwrap(),
        };
        let post = correct(&pred, &obs, &DVector::from_vec(vec![2.0])).unwrap();
        assert!((post.mean()[0] - 4.0).abs() < 1e-15);
        assert!((post.cov().as_matrix()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singular_innovation_diverges() {
        let obs = PredictedObservation {
            y_hat: DVector::from_vec(vec![0.0]),
            pxy: dmatrix![1.0; 0.0],
            pyy: SpdMatrix::new(dmatrix![-1.0]).unwrap(),
        };
        let err = correct(&prior(), &obs, &DVector::from_vec(vec![0.0])).unwrap_err();
        assert_eq!(
            err,
            FilterError::Diverged {
                stage: Stage::Correction,
                step: None
            }
        );
    }

    #[test]
    fn errors_carry_step_index() {
        // transition blows up once the state passes 10
        let model = StateSpaceModel::new(
            VectorFunction::vector(1, |x| if x[0] > 10.0 { x * f64::INFINITY } else { x * 2.0 }),
            VectorFunction::vector(1, |x| x.clone()),
            SpdMatrix::identity(1),
            SpdMatrix::identity(1),
        )
        .unwrap();
        let init = GaussianBelief::new(DVector::from_vec(vec![1.0]), SpdMatrix::new(dmatrix![1e-4]).unwrap()).unwrap();
        let ys: Vec<_> = (0..10).map(|k| DVector::from_vec(vec![2f64.powi(k + 1)])).collect();
        let err = run_filter(&model, &IntegrationScheme::ckf3(), &ys, &init, &RngStream::new(0)).unwrap_err();
        assert!(err.step().is_some_and(|k| k >= 2), "{err}");
        assert!(err.to_string().contains("at step"));
    }

    #[test]
    fn rejects_mismatched_model() {
        assert!(StateSpaceModel::new(
            linear(DMatrix::identity(3, 3)),
            VectorFunction::scalar(|x| x[0]),
            SpdMatrix::identity(2),
            SpdMatrix::identity(1),
        )
        .is_err());
        let model = StateSpaceModel::new(
            linear(DMatrix::identity(2, 2)),
            VectorFunction::scalar(|x| x[0]),
            SpdMatrix::identity(2),
            SpdMatrix::identity(1),
        )
        .unwrap();
        assert!(run_filter(&model, &IntegrationScheme::ckf3(), &[], &prior(), &RngStream::new(0)).is_err());
    }
}
