//! Synthetic risk-factor data.
//!
//! Two populations are supported: a bivariate Frank copula with Gumbel
//! marginals, and a Gaussian vector `N(μ, Σ)`. Costs are attached as
//! `Y = ‖X‖² + ε` with centred Gaussian noise.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::depth::DepthModel;
use crate::error::{Error, Result};
use crate::linalg::squared_norm;
use crate::rng::RngStream;

/// Frank dependence used when a caller has no reason to pick another value.
pub const DEFAULT_THETA: f64 = 5.0;

/// Below this magnitude the Frank copula is replaced by independence.
pub const THETA_INDEPENDENCE: f64 = 1e-8;

/// Observations of risk factors, row-major `n × dim`, with optional costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    dim: usize,
    points: Vec<f64>,
    costs: Option<Vec<f64>>,
}

impl Sample {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("sample dimension must be positive"));
        }
        if points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::domain(format!(
                "point buffer of length {} does not hold a whole number (>= 1) of {dim}-vectors",
                points.len()
            )));
        }
        Ok(Self {
            dim,
            points,
            costs: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            Error::check_dim(dim, r.len())?;
            flat.extend_from_slice(r);
        }
        Self::new(dim, flat)
    }

    pub fn with_costs(mut self, costs: Vec<f64>) -> Result<Self> {
        Error::check_dim(self.len(), costs.len())?;
        self.costs = Some(costs);
        Ok(self)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    /// Row-major point buffer.
    pub fn flat(&self) -> &[f64] {
        &self.points
    }

    pub fn costs(&self) -> Option<&[f64]> {
        self.costs.as_deref()
    }

    /// Splits into the first `k` observations and the rest.
    pub fn split_at(&self, k: usize) -> Result<(Sample, Sample)> {
        if k == 0 || k >= self.len() {
            return Err(Error::domain(format!("split index {k} outside 1..{}", self.len())));
        }
        let (a, b) = self.points.split_at(k * self.dim);
        let mut left = Sample::new(self.dim, a.to_vec())?;
        let mut right = Sample::new(self.dim, b.to_vec())?;
        if let Some(c) = &self.costs {
            left.costs = Some(c[..k].to_vec());
            right.costs = Some(c[k..].to_vec());
        }
        Ok((left, right))
    }
}

/// A distribution that can be sampled one point at a time.
pub trait PointSource {
    fn dim(&self) -> usize;

    /// Writes one draw into `out` (length `dim`).
    fn draw(&self, rng: &mut RngStream, out: &mut [f64]);
}

/// Max-Gumbel law with CDF `exp(-exp(-(x - mu)/beta))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gumbel {
    pub mu: f64,
    pub beta: f64,
}

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

impl Gumbel {
    pub fn new(mu: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() || !mu.is_finite() {
            return Err(Error::domain(format!(
                "Gumbel needs finite mu and beta > 0, got ({mu}, {beta})"
            )));
        }
        Ok(Self { mu, beta })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        libm::exp(-libm::exp(-(x - self.mu) / self.beta))
    }

    pub fn mean(&self) -> f64 {
        self.mu + self.beta * EULER_GAMMA
    }

    pub fn variance(&self) -> f64 {
        core::f64::consts::PI * core::f64::consts::PI * self.beta * self.beta / 6.0
    }

    #[inline]
    fn quantile_unchecked(&self, p: f64) -> f64 {
        self.mu - self.beta * libm::log(-libm::log(p))
    }
}

/// Gumbel inverse CDF `mu - beta·ln(-ln p)`.
pub fn gumbel_quantile(p: f64, mu: f64, beta: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile level {p} outside (0, 1)")));
    }
    Ok(Gumbel::new(mu, beta)?.quantile_unchecked(p))
}

/// Frank-copula pair by conditional inversion: `u` is kept, `w` is mapped
/// through the inverse of `∂C/∂u(u, ·)`.
pub fn frank_pair(u: f64, w: f64, theta: f64) -> Result<(f64, f64)> {
    if !(u > 0.0 && u < 1.0) || !(w > 0.0 && w < 1.0) {
        return Err(Error::domain(format!("Frank inputs ({u}, {w}) outside (0, 1)")));
    }
    if theta == 0.0 || !theta.is_finite() {
        return Err(Error::domain("Frank theta must be finite and nonzero"));
    }
    Ok((u, frank_conditional(u, w, theta)))
}

#[inline]
fn frank_conditional(u: f64, w: f64, theta: f64) -> f64 {
    if libm::fabs(theta) < THETA_INDEPENDENCE {
        return w;
    }
    let a = libm::exp(-theta * u);
    let v = -libm::log1p(w * libm::expm1(-theta) / (w + (1.0 - w) * a)) / theta;
    v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Bivariate Frank copula with Gumbel marginals plus cost noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrankGumbelConfig {
    pub theta: f64,
    pub marginals: [Gumbel; 2],
    pub noise_var: f64,
}

impl FrankGumbelConfig {
    pub fn new(theta: f64, marginals: [Gumbel; 2], noise_var: f64) -> Result<Self> {
        let cfg = Self {
            theta,
            marginals,
            noise_var,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Gumbel(0, 0.25) and Gumbel(-0.5, 0.25) marginals with noise variance 0.005.
    pub fn with_reference_marginals(theta: f64) -> Result<Self> {
        Self::new(
            theta,
            [Gumbel { mu: 0.0, beta: 0.25 }, Gumbel { mu: -0.5, beta: 0.25 }],
            0.005,
        )
    }

    /// Every violated constraint, one message per field.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.theta == 0.0 || !self.theta.is_finite() {
            out.push(String::from("theta: must be finite and nonzero"));
        }
        for (i, g) in self.marginals.iter().enumerate() {
            if !g.mu.is_finite() {
                out.push(format!("marginals[{i}].mu: must be finite"));
            }
            if !(g.beta > 0.0) || !g.beta.is_finite() {
                out.push(format!("marginals[{i}].beta: must be finite and > 0"));
            }
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            out.push(String::from("noise_var: must be finite and >= 0"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "invalid Frank–Gumbel parameters: {}",
                problems.join("; ")
            )))
        }
    }
}

impl PointSource for FrankGumbelConfig {
    fn dim(&self) -> usize {
        2
    }

    #[inline]
    fn draw(&self, rng: &mut RngStream, out: &mut [f64]) {
        let u = rng.uniform();
        let w = rng.uniform();
        let v = frank_conditional(u, w, self.theta);
        out[0] = self.marginals[0].quantile_unchecked(u);
        out[1] = self.marginals[1].quantile_unchecked(v);
    }
}

/// `N(μ, Σ)` sampled as `μ + L z`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSource {
    pub model: DepthModel,
}

impl GaussianSource {
    pub fn new(model: DepthModel) -> Self {
        Self { model }
    }
}

impl PointSource for GaussianSource {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    #[inline]
    fn draw(&self, rng: &mut RngStream, out: &mut [f64]) {
        let d = self.model.dim();
        let l = self.model.sigma().chol();
        let mu = self.model.mu();
        // Fill z first so that the draw order is independent of d.
        for z in out.iter_mut() {
            *z = rng.normal();
        }
        for i in (0..d).rev() {
            let mut acc = mu[i];
            for j in 0..=i {
                acc += l[i * d + j] * out[j];
            }
            out[i] = acc;
        }
    }
}

/// `n` i.i.d. draws from any [`PointSource`].
pub fn draw_sample<S: PointSource + ?Sized>(n: usize, source: &S, rng: &mut RngStream) -> Result<Sample> {
    if n == 0 {
        return Err(Error::domain("sample size must be >= 1"));
    }
    let d = source.dim();
    let mut points = alloc::vec![0.0; n * d];
    for chunk in points.chunks_exact_mut(d) {
        source.draw(rng, chunk);
    }
    Sample::new(d, points)
}

/// `n` Frank–Gumbel risk-factor vectors in ℝ².
pub fn sample_risk_factors(n: usize, cfg: &FrankGumbelConfig, rng: &mut RngStream) -> Result<Sample> {
    cfg.validate()?;
    draw_sample(n, cfg, rng)
}

/// `n` draws from `N(model.mu, model.sigma)`.
pub fn sample_gaussian(n: usize, model: &DepthModel, rng: &mut RngStream) -> Result<Sample> {
    draw_sample(n, &GaussianSource::new(model.clone()), rng)
}

/// Attaches `Y_i = ‖X_i‖² + ε_i`, `ε_i ~ N(0, noise_var)`. With zero noise no
/// variates are consumed and costs are exactly the squared norms.
pub fn attach_costs(s: Sample, noise_var: f64, rng: &mut RngStream) -> Result<Sample> {
    if s.costs.is_some() {
        return Err(Error::AlreadyHasCosts);
    }
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::domain(format!(
            "noise variance {noise_var} must be finite and >= 0"
        )));
    }
    let sd = libm::sqrt(noise_var);
    let costs = s
        .points()
        .map(|p| {
            let base = squared_norm(p);
            if noise_var > 0.0 {
                base + sd * rng.normal()
            } else {
                base
            }
        })
        .collect();
    s.with_costs(costs)
}
