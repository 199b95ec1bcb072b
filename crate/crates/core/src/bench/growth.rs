use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{BenchError, FILTER_TAG, TRAJECTORY_TAG};
use crate::filter::{run_filter, StateSpaceModel};
use crate::integrator::{GaussianBelief, VectorFunction};
use crate::linalg::SpdMatrix;
use crate::rng::RngStream;
use crate::rules::{IntegrationScheme, SchemeKind};

/// Observations with magnitude above this are treated as overflow and the
/// trajectory is regenerated.
pub const OBSERVATION_LIMIT: f64 = 1e280;
const MAX_TRAJECTORY_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthObservation {
    /// `((1 + xᵀx)²)^q`
    Power { q: u32 },
    /// `x_1`, a linear control case.
    FirstCoordinate,
}

impl GrowthObservation {
    fn eval(self, x: &DVector<f64>) -> f64 {
        match self {
            GrowthObservation::Power { q } => {
                let z = (1.0 + x.norm_squared()).powi(2);
                z.powi(q as i32)
            }
            GrowthObservation::FirstCoordinate => x[0],
        }
    }
}

/// `x_k = 0.9 x_{k-1} + w_k`, `y_k = h(x_k) + v_k` with isotropic noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthModel {
    pub n: usize,
    pub observation: GrowthObservation,
    pub process_var: f64,
    pub obs_var: f64,
    pub init_mean: f64,
    pub init_var: f64,
}

impl GrowthModel {
    /// `Q = 100 I`, `R = 10`, `x_0 ~ N(1, 10 I)`.
    pub fn new(n: usize, q: u32) -> Self {
        Self {
            n,
            observation: GrowthObservation::Power { q },
            process_var: 100.0,
            obs_var: 10.0,
            init_mean: 1.0,
            init_var: 10.0,
        }
    }

    pub const DECAY: f64 = 0.9;

    pub fn q(&self) -> Option<u32> {
        match self.observation {
            GrowthObservation::Power { q } => Some(q),
            GrowthObservation::FirstCoordinate => None,
        }
    }

    pub fn state_space_model(&self) -> StateSpaceModel {
        let obs = self.observation;
        StateSpaceModel::new(
            VectorFunction::vector(self.n, |x| x * Self::DECAY),
            VectorFunction::scalar(move |x| obs.eval(x)),
            SpdMatrix::scaled_identity(self.n, self.process_var),
            SpdMatrix::scaled_identity(1, self.obs_var),
        )
        .expect("shapes are consistent by construction")
    }

    pub fn initial_belief(&self) -> GaussianBelief {
        GaussianBelief::new(
            DVector::from_element(self.n, self.init_mean),
            SpdMatrix::scaled_identity(self.n, self.init_var),
        )
        .expect("shapes are consistent by construction")
    }

    fn validate(&self) -> Result<(), BenchError> {
        let ok = self.n >= 1
            && [self.process_var, self.obs_var, self.init_var]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0)
            && self.init_mean.is_finite();
        if ok {
            Ok(())
        } else {
            Err(BenchError::Invalid(format!("{self:?}")))
        }
    }
}

/// Simulated states `x_1..x_K` and observations `y_1..y_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub observations: Vec<DVector<f64>>,
    /// Regenerations caused by observation overflow.
    pub resamples: usize,
}

fn gaussian(n: usize, sd: f64, rng: &mut RngStream) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    })
}

/// Draws `x_0 ~ N(init_mean·1, init_var·I)` and iterates the model for
/// `steps` steps. Attempt `a` uses `rng.substream(a)`; a trajectory whose
/// observations leave [`OBSERVATION_LIMIT`] is regenerated, at most 10 times.
pub fn simulate_trajectory(model: &GrowthModel, steps: usize, rng: &RngStream) -> Result<Trajectory, BenchError> {
    model.validate()?;
    if steps == 0 {
        return Err(BenchError::Invalid("steps must be >= 1".into()));
    }
    let (w_sd, v_sd) = (model.process_var.sqrt(), model.obs_var.sqrt());
    'attempt: for attempt in 0..MAX_TRAJECTORY_ATTEMPTS {
        let mut rng = rng.substream(attempt as u64);
        let mut x = DVector::from_element(model.n, model.init_mean) + gaussian(model.n, model.init_var.sqrt(), &mut rng);
        let mut states = Vec::with_capacity(steps);
        let mut observations = Vec::with_capacity(steps);
        for _ in 0..steps {
            x = &x * GrowthModel::DECAY + gaussian(model.n, w_sd, &mut rng);
            let noise: f64 = StandardNormal.sample(&mut rng);
            let y = model.observation.eval(&x) + v_sd * noise;
            if !(y.abs() <= OBSERVATION_LIMIT) {
                continue 'attempt;
            }
            states.push(x.clone());
            observations.push(DVector::from_element(1, y));
        }
        return Ok(Trajectory {
            states,
            observations,
            resamples: attempt,
        });
    }
    Err(BenchError::TrajectoryOverflow {
        attempts: MAX_TRAJECTORY_ATTEMPTS,
    })
}

/// Per-step RMSE of one scheme over the Monte-Carlo runs that did not diverge.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseSeries {
    pub scheme: IntegrationScheme,
    pub rmse: Vec<f64>,
    /// Indices of runs that diverged and were left out.
    pub excluded: Vec<usize>,
    /// `(run, squared error per step)` for every included run.
    pub run_errors: Vec<(usize, Vec<f64>)>,
}

impl RmseSeries {
    fn from_runs(scheme: IntegrationScheme, steps: usize, runs: Vec<Option<Vec<f64>>>) -> Self {
        let mut excluded = Vec::new();
        let mut run_errors = Vec::new();
        for (m, r) in runs.into_iter().enumerate() {
            match r {
                Some(e) => run_errors.push((m, e)),
                None => excluded.push(m),
            }
        }
        let rmse = if run_errors.is_empty() {
            Vec::new()
        } else {
            (0..steps)
                .map(|k| {
                    let s: f64 = run_errors.iter().map(|(_, e)| e[k]).sum();
                    (s / run_errors.len() as f64).sqrt()
                })
                .collect()
        };
        Self {
            scheme,
            rmse,
            excluded,
            run_errors,
        }
    }

    pub fn included_runs(&self) -> usize {
        self.run_errors.len()
    }

    /// Per-run squared error averaged over steps `from..`.
    pub fn window_mse(&self, from: usize) -> Vec<(usize, f64)> {
        self.run_errors
            .iter()
            .map(|(m, e)| {
                let w = &e[from.min(e.len())..];
                (*m, w.iter().sum::<f64>() / w.len().max(1) as f64)
            })
            .collect()
    }

    /// RMSE averaged over steps `from..`.
    pub fn time_averaged_rmse(&self, from: usize) -> f64 {
        let w = &self.rmse[from.min(self.rmse.len())..];
        w.iter().sum::<f64>() / w.len() as f64
    }

    pub fn median_rmse(&self) -> f64 {
        let mut v = self.rmse.clone();
        v.sort_by(f64::total_cmp);
        match v.len() {
            0 => f64::NAN,
            l if l % 2 == 1 => v[l / 2],
            l => 0.5 * (v[l / 2 - 1] + v[l / 2]),
        }
    }

    /// Largest `RMSE_k / median(RMSE)`.
    pub fn peak_to_median(&self) -> f64 {
        let med = self.median_rmse();
        self.rmse.iter().copied().fold(0.0, f64::max) / med
    }
}

/// Mean and standard error of the per-run difference `a − b` of window MSE,
/// over runs included in both series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    pub mean: f64,
    pub std_error: f64,
    pub runs: usize,
}

impl PairedDifference {
    pub fn between(a: &RmseSeries, b: &RmseSeries, from: usize) -> Option<Self> {
        let bm: std::collections::HashMap<usize, f64> = b.window_mse(from).into_iter().collect();
        let d: Vec<f64> = a
            .window_mse(from)
            .into_iter()
            .filter_map(|(m, v)| bm.get(&m).map(|w| v - w))
            .collect();
        if d.len() < 2 {
            return None;
        }
        let len = d.len() as f64;
        let mean = d.iter().sum::<f64>() / len;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (len - 1.0);
        Some(Self {
            mean,
            std_error: (var / len).sqrt(),
            runs: d.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBenchReport {
    pub model: GrowthModel,
    pub n_mc: usize,
    pub steps: usize,
    pub seed: u64,
    pub trajectory_resamples: usize,
    pub series: Vec<RmseSeries>,
}

impl FilterBenchReport {
    pub fn series(&self, kind: SchemeKind) -> Option<&RmseSeries> {
        self.series.iter().find(|s| s.scheme.kind() == kind)
    }
}

/// Filters the same `n_mc` simulated trajectories with every scheme and
/// reports `RMSE_k = sqrt(mean_m ‖x̂_k,m − x_k,m‖²)`.
///
/// Trajectory `m` comes from substream `(TRAJECTORY, m)`; the filter for
/// scheme `s` on run `m` from `(FILTER, s, m)`. Runs whose filter raises an
/// error are excluded and listed in the series.
pub fn run_filter_bench(
    model: &GrowthModel,
    schemes: &[IntegrationScheme],
    n_mc: usize,
    steps: usize,
    rng: &RngStream,
) -> Result<FilterBenchReport, BenchError> {
    if n_mc == 0 {
        return Err(BenchError::Invalid("N_MC must be >= 1".into()));
    }
    for s in schemes {
        s.check_dimension(model.n)?;
    }
    let trajectories = (0..n_mc)
        .into_par_iter()
        .map(|m| simulate_trajectory(model, steps, &rng.substream_path(&[TRAJECTORY_TAG, m as u64])))
        .collect::<Result<Vec<_>, _>>()?;
    let resamples = trajectories.iter().map(|t| t.resamples).sum();
    let ssm = model.state_space_model();
    let init = model.initial_belief();

    let series = schemes
        .iter()
        .map(|scheme| {
            let runs: Vec<Option<Vec<f64>>> = trajectories
                .par_iter()
                .enumerate()
                .map(|(m, traj)| {
                    let stream = rng.substream_path(&[FILTER_TAG, scheme.kind().stream_tag(), m as u64]);
                    let posteriors = run_filter(&ssm, scheme, &traj.observations, &init, &stream)
                        .map_err(|e| log::debug!("{scheme}, run {m}: {e}"))
                        .ok()?;
                    Some(
                        posteriors
                            .iter()
                            .zip(&traj.states)
                            .map(|(p, x)| (p.mean() - x).norm_squared())
                            .collect(),
                    )
                })
                .collect();
            RmseSeries::from_runs(*scheme, steps, runs)
        })
        .collect();

    Ok(FilterBenchReport {
        model: *model,
        n_mc,
        steps,
        seed: rng.seed(),
        trajectory_resamples: resamples,
        series,
    })
}
