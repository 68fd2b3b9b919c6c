//! Likelihood models, priors, parameter vectors and synthetic data.
//!
//! Four families are supported: logistic and Gaussian likelihoods, each with
//! either a linear mean function `m(X, θ) = Xᵀθ` or a one-hidden-layer tanh
//! network. Linear families carry no intercept; add a constant feature
//! column if one is wanted.
//!
//! Parameter layout (flat vector, `d` inputs, `h` hidden units):
//!
//! | family          | layout                                   |
//! |-----------------|------------------------------------------|
//! | linear          | `w[0..d]`                                |
//! | MLP             | `W[h×d] (row-major) | b1[h] | v[h] | b2` |
//!
//! Gaussian families append one unconstrained scalar `ζ` with
//! `σ² = s² + exp(ζ)`, so the density never exceeds `1/(√(2π) s)`.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Whether labels are binary classes or real-valued responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Classification,
    Regression,
}

/// One observation: a feature vector and a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Record {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Self { features, label }
    }

    fn validate(&self, kind: DataKind, d: usize) -> Result<()> {
        if self.features.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.features.len() });
        }
        if !self.label.is_finite() || self.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("record contains a non-finite entry".into()));
        }
        if kind == DataKind::Classification && self.label != 0.0 && self.label != 1.0 {
            return Err(Error::KindMismatch(format!(
                "classification label must be 0 or 1, got {}",
                self.label
            )));
        }
        Ok(())
    }
}

/// A collection of records with uniform feature length, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    kind: DataKind,
    d: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    /// Build a nonempty dataset, validating every record.
    pub fn new(kind: DataKind, records: Vec<Record>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Empty("dataset has no records".into()))?;
        let d = first.features.len();
        if d == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        let mut features = Vec::with_capacity(records.len() * d);
        let mut labels = Vec::with_capacity(records.len());
        for r in &records {
            r.validate(kind, d)?;
            features.extend_from_slice(&r.features);
            labels.push(r.label);
        }
        Ok(Self { kind, d, features, labels })
    }

    /// A dataset with no records. Its posterior is the prior.
    pub fn empty(kind: DataKind, d: usize) -> Self {
        Self { kind, d, features: Vec::new(), labels: Vec::new() }
    }

    pub fn kind(&self) -> DataKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn record(&self, i: usize) -> Record {
        Record::new(self.features(i).to_vec(), self.labels[i])
    }

    pub fn records(&self) -> Vec<Record> {
        (0..self.len()).map(|i| self.record(i)).collect()
    }

    /// Iterate over `(features, label)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.features
            .chunks_exact(self.d)
            .zip(self.labels.iter().copied())
    }

    /// Neighbouring dataset: record `i` replaced by `record`.
    pub fn replace(&self, i: usize, record: Record) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::InvalidArgument(format!("index {i} out of range")));
        }
        record.validate(self.kind, self.d)?;
        let mut out = self.clone();
        out.features[i * self.d..(i + 1) * self.d].copy_from_slice(&record.features);
        out.labels[i] = record.label;
        Ok(out)
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.features(i));
            labels.push(self.labels[i]);
        }
        Self { kind: self.kind, d: self.d, features, labels }
    }

    /// Same labels, new feature matrix (row-major, same shape).
    pub(crate) fn with_features(&self, features: Vec<f64>) -> Self {
        debug_assert_eq!(features.len(), self.features.len());
        Self { kind: self.kind, d: self.d, features, labels: self.labels.clone() }
    }

    pub(crate) fn feature_matrix(&self) -> &[f64] {
        &self.features
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    LogisticLinear,
    LogisticMlp,
    GaussianLinear,
    GaussianMlp,
}

impl Family {
    pub fn kind(self) -> DataKind {
        match self {
            Family::LogisticLinear | Family::LogisticMlp => DataKind::Classification,
            Family::GaussianLinear | Family::GaussianMlp => DataKind::Regression,
        }
    }

    pub fn is_mlp(self) -> bool {
        matches!(self, Family::LogisticMlp | Family::GaussianMlp)
    }

    pub fn is_gaussian(self) -> bool {
        self.kind() == DataKind::Regression
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

/// Likelihood family, mean-function architecture and density-bound parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub d: usize,
    pub hidden_width: usize,
    pub activation: Activation,
    /// Lower bound `s²` on the residual variance. Ignored for classification.
    pub variance_floor_s2: f64,
}

/// Per-record quantities shared by densities, losses and their gradients.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pointwise {
    pub log_f: f64,
    /// ∂ log f / ∂m
    pub dlogf_dm: f64,
    /// ∂ log f / ∂ζ (zero for classification)
    pub dlogf_dzeta: f64,
}

impl ModelSpec {
    pub fn new(
        family: Family,
        d: usize,
        hidden_width: usize,
        variance_floor_s2: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("d must be positive".into()));
        }
        if family.is_mlp() != (hidden_width > 0) {
            return Err(Error::InvalidArgument(
                "hidden_width must be positive exactly for MLP families".into(),
            ));
        }
        if family.is_gaussian() && !(variance_floor_s2 > 0.0 && variance_floor_s2.is_finite()) {
            return Err(Error::InvalidArgument("variance floor s² must be positive".into()));
        }
        Ok(Self { family, d, hidden_width, activation: Activation::Tanh, variance_floor_s2 })
    }

    pub fn logistic_linear(d: usize) -> Self {
        Self::new(Family::LogisticLinear, d, 0, 1.0).expect("valid logistic model")
    }

    pub fn logistic_mlp(d: usize, width: usize) -> Self {
        Self::new(Family::LogisticMlp, d, width, 1.0).expect("valid logistic MLP")
    }

    pub fn gaussian_linear(d: usize, s2: f64) -> Result<Self> {
        Self::new(Family::GaussianLinear, d, 0, s2)
    }

    pub fn gaussian_mlp(d: usize, width: usize, s2: f64) -> Result<Self> {
        Self::new(Family::GaussianMlp, d, width, s2)
    }

    pub fn kind(&self) -> DataKind {
        self.family.kind()
    }

    /// Number of mean-function parameters (excludes ζ).
    pub fn n_mean_params(&self) -> usize {
        if self.family.is_mlp() {
            self.hidden_width * (self.d + 2) + 1
        } else {
            self.d
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_mean_params() + usize::from(self.family.is_gaussian())
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), got: theta.len() });
        }
        Ok(())
    }

    pub fn check_record(&self, features: &[f64], label: f64) -> Result<()> {
        if features.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: features.len() });
        }
        if self.kind() == DataKind::Classification && label != 0.0 && label != 1.0 {
            return Err(Error::KindMismatch(format!("label {label} is not a class")));
        }
        Ok(())
    }

    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.kind() != self.kind() {
            return Err(Error::KindMismatch(format!(
                "model expects {:?} data, dataset is {:?}",
                self.kind(),
                data.kind()
            )));
        }
        if data.d() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: data.d() });
        }
        Ok(())
    }

    /// Scratch buffer large enough for [`Self::forward`].
    pub(crate) fn scratch(&self) -> Vec<f64> {
        vec![0.0; self.hidden_width]
    }

    /// Mean function `m(X, θ)`. For MLPs, hidden activations land in `hidden`.
    pub(crate) fn forward(&self, theta: &[f64], x: &[f64], hidden: &mut [f64]) -> f64 {
        let d = self.d;
        if !self.family.is_mlp() {
            return dot(&theta[..d], x);
        }
        let h = self.hidden_width;
        let (w, rest) = theta.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (v, rest) = rest.split_at(h);
        let b2 = rest[0];
        let mut out = b2;
        for j in 0..h {
            let a = b1[j] + dot(&w[j * d..(j + 1) * d], x);
            let t = a.tanh();
            hidden[j] = t;
            out += v[j] * t;
        }
        out
    }

    /// Adds `scale · ∂m/∂θ` into `out`, using activations from [`Self::forward`].
    pub(crate) fn add_mean_grad(
        &self,
        theta: &[f64],
        x: &[f64],
        hidden: &[f64],
        scale: f64,
        out: &mut [f64],
    ) {
        let d = self.d;
        if !self.family.is_mlp() {
            for (o, &xi) in out[..d].iter_mut().zip(x) {
                *o += scale * xi;
            }
            return;
        }
        let h = self.hidden_width;
        let v = &theta[h * d + h..h * d + 2 * h];
        let (gw, rest) = out.split_at_mut(h * d);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gv, rest) = rest.split_at_mut(h);
        rest[0] += scale;
        for j in 0..h {
            let t = hidden[j];
            gv[j] += scale * t;
            let back = scale * v[j] * (1.0 - t * t);
            gb1[j] += back;
            for (g, &xk) in gw[j * d..(j + 1) * d].iter_mut().zip(x) {
                *g += back * xk;
            }
        }
    }

    /// `σ²` for Gaussian families.
    pub fn variance(&self, theta: &[f64]) -> f64 {
        debug_assert!(self.family.is_gaussian());
        self.variance_floor_s2 + theta[self.n_mean_params()].exp()
    }

    /// Index of ζ in the parameter vector, if any.
    pub(crate) fn zeta_index(&self) -> Option<usize> {
        self.family.is_gaussian().then(|| self.n_mean_params())
    }

    pub(crate) fn pointwise(
        &self,
        theta: &[f64],
        x: &[f64],
        y: f64,
        hidden: &mut [f64],
    ) -> Pointwise {
        let m = self.forward(theta, x, hidden);
        match self.kind() {
            DataKind::Classification => {
                let p = sigmoid(m);
                let log_f = if y == 1.0 { log_sigmoid(m) } else { log_sigmoid(-m) };
                Pointwise { log_f, dlogf_dm: y - p, dlogf_dzeta: 0.0 }
            }
            DataKind::Regression => {
                let ez = theta[self.n_mean_params()].exp();
                let s2 = self.variance_floor_s2 + ez;
                let r = y - m;
                let log_f = -0.5 * (2.0 * PI * s2).ln() - r * r / (2.0 * s2);
                let dlogf_ds2 = -0.5 / s2 + r * r / (2.0 * s2 * s2);
                Pointwise { log_f, dlogf_dm: r / s2, dlogf_dzeta: dlogf_ds2 * ez }
            }
        }
    }

    pub fn log_density(&self, theta: &ParamVector, record: &Record) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_record(&record.features, record.label)?;
        let mut hidden = self.scratch();
        Ok(self.pointwise(theta, &record.features, record.label, &mut hidden).log_f)
    }

    /// `f(record; θ)`.
    pub fn density(&self, theta: &ParamVector, record: &Record) -> Result<f64> {
        Ok(self.log_density(theta, record)?.exp())
    }

    /// `∂f/∂θ`, exact reverse accumulation through the hidden layer.
    pub fn grad_density(&self, theta: &ParamVector, record: &Record) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.check_record(&record.features, record.label)?;
        let mut hidden = self.scratch();
        let pw = self.pointwise(theta, &record.features, record.label, &mut hidden);
        let f = pw.log_f.exp();
        let mut grad = vec![0.0; self.n_params()];
        self.add_mean_grad(theta, &record.features, &hidden, f * pw.dlogf_dm, &mut grad);
        if let Some(z) = self.zeta_index() {
            grad[z] += f * pw.dlogf_dzeta;
        }
        Ok(grad)
    }

    /// Uniform bound `M` with `f(·; θ) ≤ M` for every θ.
    pub fn density_upper_bound(&self) -> f64 {
        match self.kind() {
            DataKind::Classification => 1.0,
            DataKind::Regression => 1.0 / ((2.0 * PI).sqrt() * self.variance_floor_s2.sqrt()),
        }
    }

    /// Class-1 probabilities (classification) or mean predictions (regression).
    pub fn predict(&self, theta: &ParamVector, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let mut hidden = self.scratch();
        batch
            .iter()
            .map(|x| {
                if x.len() != self.d {
                    return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
                }
                Ok(self.predict_one(theta, x, &mut hidden))
            })
            .collect()
    }

    pub fn predict_dataset(&self, theta: &ParamVector, data: &Dataset) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        if data.d() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: data.d() });
        }
        let mut hidden = self.scratch();
        Ok(data.iter().map(|(x, _)| self.predict_one(theta, x, &mut hidden)).collect())
    }

    fn predict_one(&self, theta: &[f64], x: &[f64], hidden: &mut [f64]) -> f64 {
        let m = self.forward(theta, x, hidden);
        match self.kind() {
            DataKind::Classification => sigmoid(m),
            DataKind::Regression => m,
        }
    }
}

/// Flat parameter vector θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Isotropic Gaussian prior `N(0, sd² I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub sd: f64,
}

impl Default for Prior {
    fn default() -> Self {
        Self { sd: 3.0 }
    }
}

impl Prior {
    pub fn new(sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::InvalidArgument(format!("prior sd must be positive, got {sd}")));
        }
        Ok(Self { sd })
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let var = self.sd * self.sd;
        let sq: f64 = theta.iter().map(|t| t * t).sum();
        -0.5 * sq / var - 0.5 * theta.len() as f64 * (2.0 * PI * var).ln()
    }

    /// Adds `∇ log π(θ) = −θ/sd²` into `out`.
    pub fn add_grad(&self, theta: &[f64], out: &mut [f64]) {
        let inv = 1.0 / (self.sd * self.sd);
        for (o, t) in out.iter_mut().zip(theta) {
            *o -= t * inv;
        }
    }
}

/// Post-processing applied to simulated features before labels are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScaling {
    #[default]
    None,
    /// Per-column min-max scaling to `[0, 1]`; labels are then drawn from the
    /// model on the scaled features so the returned θ generates the data.
    MinMax,
}

/// Recipe for [`simulate_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub model: ModelSpec,
    pub n: usize,
    pub param_sd: f64,
    /// Residual variance of Gaussian families; must exceed the variance floor.
    pub noise_variance: f64,
    pub feature_scaling: FeatureScaling,
    /// Use this θ instead of drawing one.
    pub theta: Option<ParamVector>,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(model: ModelSpec, n: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            param_sd: 3.0,
            noise_variance: 1.0,
            feature_scaling: FeatureScaling::None,
            theta: None,
            seed,
        }
    }
}

fn theta_from(gen: &GeneratorSpec, rng: &mut Rng) -> Result<ParamVector> {
    let model = &gen.model;
    let mut t: Vec<f64> = (0..model.n_mean_params())
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            gen.param_sd * z
        })
        .collect();
    if model.family.is_gaussian() {
        let excess = gen.noise_variance - model.variance_floor_s2;
        if !(excess > 0.0) {
            return Err(Error::InvalidArgument("noise variance must exceed the variance floor".into()));
        }
        t.push(excess.ln());
    }
    Ok(ParamVector(t))
}

/// The ground-truth θ that [`simulate_data`] draws for `gen` when none is fixed.
pub fn draw_theta(gen: &GeneratorSpec) -> Result<ParamVector> {
    theta_from(gen, &mut rng_from_seed(gen.seed))
}

/// Draw standard normal features, a ground-truth θ and labels from the model.
pub fn simulate_data(gen: &GeneratorSpec) -> Result<(Dataset, ParamVector)> {
    let model = &gen.model;
    if gen.n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = rng_from_seed(gen.seed);
    let theta = match &gen.theta {
        Some(t) => {
            model.check_theta(t)?;
            t.clone()
        }
        None => theta_from(gen, &mut rng)?,
    };

    let d = model.d;
    let mut features: Vec<f64> =
        (0..gen.n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    if gen.feature_scaling == FeatureScaling::MinMax {
        crate::data::minmax_in_place(&mut features, d);
    }

    let mut hidden = model.scratch();
    let mut labels = Vec::with_capacity(gen.n);
    for x in features.chunks_exact(d) {
        let m = model.forward(&theta, x, &mut hidden);
        let y = match model.kind() {
            DataKind::Classification => f64::from(u8::from(rng.gen::<f64>() < sigmoid(m))),
            DataKind::Regression => {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + model.variance(&theta).sqrt() * z
            }
        };
        labels.push(y);
    }
    Ok((Dataset { kind: model.kind(), d, features, labels }, theta))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log σ(z)` without overflow.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}
