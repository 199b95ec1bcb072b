//! Weighted point sets in standard-normal coordinates.
//!
//! Every scheme produces a [`SigmaPointSet`] whose weights integrate against
//! the standard Gaussian measure: they sum to one and the normalising
//! constants of the radial and spherical parts never appear explicitly.
//!
//! The fifth-degree rules share one construction: a radial rule with nodes
//! `{0, ρ1, ρ2}` crossed with the spherical simplex rule (the `n + 1` simplex
//! vertices and their `n(n+1)/2` projected midpoints, each taken with both
//! signs), optionally rotated by an orthogonal `Q`.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{haar_orthogonal, LinalgError, OrthogonalMatrix};
use crate::rng::RngStream;
use crate::sampling::{sample_radial_pair, sample_radial_single, RadialPair, SamplingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("{kind} needs dimension >= {min}, got {n}")]
    DimensionTooSmall { kind: SchemeKind, n: usize, min: usize },
    #[error("repetition count must be >= 1")]
    ZeroRepetitions,
    #[error("Monte-Carlo sample count must be >= 1")]
    ZeroSamples,
    #[error("radial node must be positive and finite, got {0}")]
    InvalidNode(f64),
    #[error("unknown scheme `{0}` (expected ckf3, ckf5, sif3, sif5, qsif5 or mc)")]
    UnknownScheme(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    /// Third-degree cubature rule, `2n` points.
    Ckf3,
    /// Deterministic fifth-degree spherical-simplex radial rule.
    Ckf5,
    /// Third-degree stochastic rule, random radius and rotation.
    Sif3,
    /// Fifth-degree stochastic rule, random radii and rotation.
    Sif5,
    /// Fifth-degree rule with deterministic radii and a random rotation.
    Qsif5,
    /// Plain Monte-Carlo with equal weights.
    Mc,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::Ckf3,
        SchemeKind::Ckf5,
        SchemeKind::Sif3,
        SchemeKind::Sif5,
        SchemeKind::Qsif5,
        SchemeKind::Mc,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::Ckf3 => "ckf3",
            SchemeKind::Ckf5 => "ckf5",
            SchemeKind::Sif3 => "sif3",
            SchemeKind::Sif5 => "sif5",
            SchemeKind::Qsif5 => "qsif5",
            SchemeKind::Mc => "mc",
        }
    }

    /// Polynomial degree integrated exactly by every single draw.
    /// Monte-Carlo only reproduces constants.
    pub fn degree(self) -> u32 {
        match self {
            SchemeKind::Ckf3 | SchemeKind::Sif3 => 3,
            SchemeKind::Ckf5 | SchemeKind::Sif5 | SchemeKind::Qsif5 => 5,
            SchemeKind::Mc => 0,
        }
    }

    pub fn is_deterministic(self) -> bool {
        matches!(self, SchemeKind::Ckf3 | SchemeKind::Ckf5)
    }

    pub fn min_dimension(self) -> usize {
        match self {
            SchemeKind::Ckf5 | SchemeKind::Sif5 | SchemeKind::Qsif5 => 2,
            _ => 1,
        }
    }

    /// Whether a draw contains the origin as a node.
    pub fn has_center(self) -> bool {
        matches!(
            self,
            SchemeKind::Ckf5 | SchemeKind::Sif3 | SchemeKind::Sif5 | SchemeKind::Qsif5
        )
    }

    /// Short description of how the scheme is built, for report metadata.
    pub fn variant(self) -> &'static str {
        match self {
            SchemeKind::Ckf3 => "2n axis points at radius sqrt(n)",
            SchemeKind::Ckf5 => "radial {0, sqrt(n+2)} x spherical simplex, Q = I",
            SchemeKind::Sif3 => "radial {0, chi(n+2)} x random-rotated axis points",
            SchemeKind::Sif5 => "radial {0, rho1, rho2} (chi/beta transform) x random-rotated spherical simplex",
            SchemeKind::Qsif5 => "radial {0, sqrt(n+2)} x random-rotated spherical simplex",
            SchemeKind::Mc => "i.i.d. standard normal samples",
        }
    }

    pub(crate) fn stream_tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SchemeKind {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| RuleError::UnknownScheme(s.to_string()))
    }
}

/// A scheme plus its repetition count `N_m` (and sample count for MC).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegrationScheme {
    kind: SchemeKind,
    n_m: usize,
    mc_samples: usize,
}

impl IntegrationScheme {
    /// Deterministic kinds are pinned to a single repetition; asking for more
    /// logs a warning.
    pub fn new(kind: SchemeKind, n_m: usize, mc_samples: usize) -> Result<Self, RuleError> {
        if n_m == 0 {
            return Err(RuleError::ZeroRepetitions);
        }
        if kind == SchemeKind::Mc && mc_samples == 0 {
            return Err(RuleError::ZeroSamples);
        }
        let n_m = if kind.is_deterministic() && n_m != 1 {
            warn!("{kind} is deterministic; ignoring N_m = {n_m}");
            1
        } else {
            n_m
        };
        let mc_samples = if kind == SchemeKind::Mc { mc_samples } else { 0 };
        Ok(Self {
            kind,
            n_m,
            mc_samples,
        })
    }

    pub fn ckf3() -> Self {
        Self::new(SchemeKind::Ckf3, 1, 0).unwrap()
    }

    pub fn ckf5() -> Self {
        Self::new(SchemeKind::Ckf5, 1, 0).unwrap()
    }

    pub fn sif3(n_m: usize) -> Result<Self, RuleError> {
        Self::new(SchemeKind::Sif3, n_m, 0)
    }

    pub fn sif5(n_m: usize) -> Result<Self, RuleError> {
        Self::new(SchemeKind::Sif5, n_m, 0)
    }

    pub fn qsif5(n_m: usize) -> Result<Self, RuleError> {
        Self::new(SchemeKind::Qsif5, n_m, 0)
    }

    pub fn mc(samples: usize) -> Result<Self, RuleError> {
        Self::new(SchemeKind::Mc, 1, samples)
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    /// Number of independent draws averaged per expectation.
    pub fn n_m(&self) -> usize {
        self.n_m
    }

    pub fn mc_samples(&self) -> usize {
        self.mc_samples
    }

    pub fn check_dimension(&self, n: usize) -> Result<(), RuleError> {
        let min = self.kind.min_dimension();
        if n < min {
            Err(RuleError::DimensionTooSmall {
                kind: self.kind,
                n,
                min,
            })
        } else {
            Ok(())
        }
    }

    /// Nodes in one draw, the origin included.
    pub fn points_per_draw(&self, n: usize) -> usize {
        match self.kind {
            SchemeKind::Ckf3 => 2 * n,
            SchemeKind::Sif3 => 2 * n + 1,
            SchemeKind::Ckf5 | SchemeKind::Qsif5 => 1 + (n + 1) * (n + 2),
            SchemeKind::Sif5 => 1 + 2 * (n + 1) * (n + 2),
            SchemeKind::Mc => self.mc_samples,
        }
    }

    /// Integrand evaluations per expectation. The origin maps to the mean
    /// for every draw, so it is evaluated once and shared by all `N_m` draws.
    pub fn evaluation_count(&self, n: usize) -> usize {
        let per_draw = self.points_per_draw(n);
        if self.kind.has_center() {
            1 + self.n_m * (per_draw - 1)
        } else {
            self.n_m * per_draw
        }
    }

    /// Terms of the symmetrised sum per draw, counting each `±x` node pair
    /// once (the origin counts as one term). For the fifth-degree stochastic
    /// rule this is `n² + 3n + 3`.
    pub fn symmetric_terms_per_draw(&self, n: usize) -> usize {
        match self.kind {
            SchemeKind::Ckf3 => n,
            SchemeKind::Sif3 => n + 1,
            SchemeKind::Ckf5 | SchemeKind::Qsif5 => 1 + (n + 1) * (n + 2) / 2,
            SchemeKind::Sif5 => 1 + (n + 1) * (n + 2),
            SchemeKind::Mc => self.mc_samples,
        }
    }
}

impl fmt::Display for IntegrationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SchemeKind::Mc => write!(f, "mc({})", self.mc_samples),
            k if k.is_deterministic() => write!(f, "{k}"),
            k => write!(f, "{k}(N_m={})", self.n_m),
        }
    }
}

/// One draw of a rule: nodes as columns of an `n × K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPointSet {
    points: DMatrix<f64>,
    weights: Vec<f64>,
    center: bool,
}

impl SigmaPointSet {
    fn new(points: DMatrix<f64>, weights: Vec<f64>, center: bool) -> Self {
        debug_assert_eq!(points.ncols(), weights.len());
        Self {
            points,
            weights,
            center,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when column 0 is the origin.
    pub fn has_center(&self) -> bool {
        self.center
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted sum `Σ w_j g(c_j)` for a scalar integrand.
    pub fn apply(&self, g: impl Fn(&DVector<f64>) -> f64) -> f64 {
        self.points
            .column_iter()
            .zip(&self.weights)
            .map(|(c, w)| w * g(&c.into_owned()))
            .sum()
    }
}

/// Probability-normalised weights `(w0, w1, w2)` of the fifth-degree radial
/// rule with nodes `{0, ρ1, ρ2}`.
pub fn radial_weights_deg5(n: usize, nodes: &RadialPair) -> (f64, f64, f64) {
    let nf = n as f64;
    let a = nodes.rho1() * nodes.rho1();
    let b = nodes.rho2() * nodes.rho2();
    let w0 = 1.0 - nf * (a + b - (nf + 2.0)) / (a * b);
    let w1 = nf * (nf + 2.0 - b) / (a * (a - b));
    let w2 = nf * (nf + 2.0 - a) / (b * (b - a));
    (w0, w1, w2)
}

/// Weights `(w0, w1)` of the third-degree radial rule with nodes `{0, ρ}`.
pub fn radial_weights_deg3(n: usize, rho: f64) -> Result<(f64, f64), RuleError> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(RuleError::InvalidNode(rho));
    }
    let w1 = n as f64 / (rho * rho);
    Ok((1.0 - w1, w1))
}

/// Vertices `a_1..a_{n+1}` of the regular simplex inscribed in the unit
/// sphere.
pub fn simplex_vertices(n: usize) -> Vec<DVector<f64>> {
    let nf = n as f64;
    (1..=n + 1)
        .map(|j| {
            DVector::from_fn(n, |k0, _| {
                let k = k0 + 1;
                if k < j {
                    let kf = k as f64;
                    -((nf + 1.0) / (nf * (nf - kf + 2.0) * (nf - kf + 1.0))).sqrt()
                } else if k == j {
                    let jf = j as f64;
                    ((nf + 1.0) * (nf - jf + 1.0) / (nf * (nf - jf + 2.0))).sqrt()
                } else {
                    0.0
                }
            })
        })
        .collect()
}

/// Pairwise vertex midpoints pushed back onto the sphere, in lexicographic
/// `(k, l)` order. Empty for `n < 2`.
pub fn simplex_midpoints(n: usize, vertices: &[DVector<f64>]) -> Vec<DVector<f64>> {
    if n < 2 {
        return Vec::new();
    }
    let scale = (n as f64 / (2.0 * (n as f64 - 1.0))).sqrt();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for k in 0..vertices.len() {
        for l in (k + 1)..vertices.len() {
            out.push((&vertices[k] + &vertices[l]) * scale);
        }
    }
    out
}

/// Per-point weights `(wa, wb)` of the spherical simplex rule, normalised
/// so that all `2(n+1)` signed vertices and `n(n+1)` signed midpoints sum to
/// one. `wa` is negative for `n > 7`.
pub fn spherical_weights_deg5(n: usize) -> Result<(f64, f64), RuleError> {
    if n < 2 {
        return Err(RuleError::DimensionTooSmall {
            kind: SchemeKind::Sif5,
            n,
            min: 2,
        });
    }
    let nf = n as f64;
    let np1 = nf + 1.0;
    let wa = (7.0 - nf) * nf / (2.0 * np1 * np1 * (nf + 2.0));
    let wb = 2.0 * (nf - 1.0) * (nf - 1.0) / (nf * np1 * np1 * (nf + 2.0));
    Ok((wa, wb))
}

/// Simplex vertices and midpoints stacked column-wise, with the per-point
/// spherical weight of each column.
#[derive(Debug, Clone)]
pub struct SimplexBasis {
    directions: DMatrix<f64>,
    weights: Vec<f64>,
    vertex_count: usize,
}

impl SimplexBasis {
    pub fn new(n: usize) -> Result<Self, RuleError> {
        let (wa, wb) = spherical_weights_deg5(n)?;
        let vertices = simplex_vertices(n);
        let midpoints = simplex_midpoints(n, &vertices);
        let cols: Vec<DVector<f64>> = vertices.iter().chain(&midpoints).cloned().collect();
        let weights = std::iter::repeat_n(wa, vertices.len())
            .chain(std::iter::repeat_n(wb, midpoints.len()))
            .collect();
        Ok(Self {
            directions: DMatrix::from_columns(&cols),
            weights,
            vertex_count: vertices.len(),
        })
    }

    pub fn vertices(&self) -> Vec<DVector<f64>> {
        self.columns(0, self.vertex_count)
    }

    pub fn midpoints(&self) -> Vec<DVector<f64>> {
        self.columns(self.vertex_count, self.directions.ncols() - self.vertex_count)
    }

    fn columns(&self, first: usize, count: usize) -> Vec<DVector<f64>> {
        self.directions
            .columns(first, count)
            .column_iter()
            .map(|c| c.into_owned())
            .collect()
    }
}

/// Origin plus `±ρ·Q·d` for each radius and each simplex direction `d`.
fn compose_simplex_rule(
    basis: &SimplexBasis,
    rotation: &OrthogonalMatrix,
    center_weight: f64,
    radii: &[(f64, f64)],
) -> SigmaPointSet {
    let n = basis.directions.nrows();
    let rotated = rotation.as_matrix() * &basis.directions;
    let dirs = rotated.ncols();
    let total = 1 + 2 * dirs * radii.len();
    let mut points = DMatrix::zeros(n, total);
    let mut weights = Vec::with_capacity(total);
    weights.push(center_weight);
    let mut col = 1;
    for &(rho, w_r) in radii {
        for (d, &w_s) in rotated.column_iter().zip(&basis.weights) {
            for sign in [1.0, -1.0] {
                points.column_mut(col).copy_from(&(d * (sign * rho)));
                weights.push(w_s * w_r);
                col += 1;
            }
        }
    }
    SigmaPointSet::new(points, weights, true)
}

/// Origin plus `±ρ·Q·e_i` with equal spherical weight `1/(2n)`.
fn compose_axis_rule(
    rotation: &OrthogonalMatrix,
    rho: f64,
    center_weight: Option<f64>,
    radial_weight: f64,
) -> SigmaPointSet {
    let n = rotation.dim();
    let offset = usize::from(center_weight.is_some());
    let mut points = DMatrix::zeros(n, offset + 2 * n);
    let mut weights = Vec::with_capacity(offset + 2 * n);
    if let Some(w0) = center_weight {
        weights.push(w0);
    }
    let w = radial_weight / (2 * n) as f64;
    for (i, q) in rotation.as_matrix().column_iter().enumerate() {
        points.column_mut(offset + 2 * i).copy_from(&(q * rho));
        points.column_mut(offset + 2 * i + 1).copy_from(&(q * -rho));
        weights.push(w);
        weights.push(w);
    }
    SigmaPointSet::new(points, weights, center_weight.is_some())
}

/// Radial nodes `{0, sqrt(n+2)}` with weights matched to the Gaussian
/// radial moments `1, n, n(n+2)`.
fn deterministic_radial_deg5(n: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    ((nf + 2.0).sqrt(), 2.0 / (nf + 2.0), nf / (nf + 2.0))
}

/// One draw of `scheme` in dimension `n`. Randomness is consumed in a fixed
/// order (radial nodes, then rotation) so draws are reproducible.
pub fn build_rule(
    scheme: &IntegrationScheme,
    n: usize,
    rng: &mut RngStream,
) -> Result<SigmaPointSet, RuleError> {
    scheme.check_dimension(n)?;
    let set = match scheme.kind() {
        SchemeKind::Ckf3 => compose_axis_rule(&OrthogonalMatrix::identity(n), (n as f64).sqrt(), None, 1.0),
        SchemeKind::Sif3 => {
            let rho = sample_radial_single(n, rng)?;
            let (w0, w1) = radial_weights_deg3(n, rho)?;
            let q = haar_orthogonal(n, rng)?;
            compose_axis_rule(&q, rho, Some(w0), w1)
        }
        SchemeKind::Ckf5 => {
            let (rho, w0, w1) = deterministic_radial_deg5(n);
            compose_simplex_rule(&SimplexBasis::new(n)?, &OrthogonalMatrix::identity(n), w0, &[(rho, w1)])
        }
        SchemeKind::Qsif5 => {
            let (rho, w0, w1) = deterministic_radial_deg5(n);
            let q = haar_orthogonal(n, rng)?;
            compose_simplex_rule(&SimplexBasis::new(n)?, &q, w0, &[(rho, w1)])
        }
        SchemeKind::Sif5 => {
            let nodes = sample_radial_pair(n, rng)?;
            let (w0, w1, w2) = radial_weights_deg5(n, &nodes);
            let q = haar_orthogonal(n, rng)?;
            compose_simplex_rule(
                &SimplexBasis::new(n)?,
                &q,
                w0,
                &[(nodes.rho1(), w1), (nodes.rho2(), w2)],
            )
        }
        SchemeKind::Mc => {
            let s = scheme.mc_samples();
            let points = DMatrix::from_fn(n, s, |_, _| StandardNormal.sample(rng));
            SigmaPointSet::new(points, vec![1.0 / s as f64; s], false)
        }
    };
    debug_assert_eq!(set.len(), scheme.points_per_draw(n));
    Ok(set)
}
