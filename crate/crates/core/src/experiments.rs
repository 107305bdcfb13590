//! Replication protocol for the CCTE estimator and convergence studies for
//! the plug-in depth.
//!
//! All randomness is derived from `master_seed` through fixed stream ids:
//!
//! | purpose                          | stream id parts                     |
//! |----------------------------------|-------------------------------------|
//! | population mean/covariance       | `[POPULATION]`, then chunk index    |
//! | ground truth                     | `[TRUTH]`, then chunk index         |
//! | replicate `j` of cell `(n, α_k)` | `[REPLICATE, n, k, j]`              |
//! | convergence draw `s` at size `n` | `[CONVERGENCE, n, s]`               |
//!
//! so any single cell or replicate can be rerun on its own.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ccte::{ccte_hat, ccte_true_oracle, estimate_population_model, CcteEstimate};
use crate::depth::{fit_model, sup_norm_distance, DepthModel, Probe};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::levelset::{hausdorff_boundaries, sym_diff_volume, LevelSetSpec};
use crate::linalg::{operator_norm, SpdMatrix};
use crate::rng::{stream_id, RngStream};
use crate::sampling::{attach_costs, draw_sample, FrankGumbelConfig, GaussianSource, PointSource};
use crate::stats::{mean, rate_slope, sample_sd, Spread};

pub const STREAM_POPULATION: u64 = 1;
pub const STREAM_TRUTH: u64 = 2;
pub const STREAM_REPLICATE: u64 = 3;
pub const STREAM_CONVERGENCE: u64 = 4;

/// Gaussian population `N(mu, sigma)` with cost noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub mu: Vec<f64>,
    pub sigma: SpdMatrix,
    pub noise_var: f64,
}

/// Data-generating process of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataConfig {
    FrankGumbel(FrankGumbelConfig),
    Gaussian(GaussianConfig),
}

impl DataConfig {
    pub fn standard_gaussian(dim: usize, noise_var: f64) -> Self {
        let m = DepthModel::standard(dim);
        DataConfig::Gaussian(GaussianConfig {
            mu: m.mu().to_vec(),
            sigma: m.sigma().clone(),
            noise_var,
        })
    }

    pub fn noise_var(&self) -> f64 {
        match self {
            DataConfig::FrankGumbel(c) => c.noise_var,
            DataConfig::Gaussian(c) => c.noise_var,
        }
    }

    pub fn source(&self) -> Result<Population> {
        match self {
            DataConfig::FrankGumbel(c) => {
                c.validate()?;
                Ok(Population::FrankGumbel(*c))
            }
            DataConfig::Gaussian(c) => {
                if !(c.noise_var >= 0.0) || !c.noise_var.is_finite() {
                    return Err(Error::domain(format!(
                        "noise variance {} must be finite and >= 0",
                        c.noise_var
                    )));
                }
                Ok(Population::Gaussian(GaussianSource::new(DepthModel::new(
                    c.mu.clone(),
                    c.sigma.clone(),
                )?)))
            }
        }
    }

    /// Population depth model: exact for Gaussian data, estimated from
    /// `n_mc` draws otherwise (with standard errors of the mean).
    pub fn population_model<E: Executor>(
        &self,
        n_mc: usize,
        master_seed: u64,
        exec: &E,
    ) -> Result<(DepthModel, Option<Vec<f64>>)> {
        match self.source()? {
            Population::Gaussian(g) => Ok((g.model, None)),
            src => {
                let rng = RngStream::derive(master_seed, &[STREAM_POPULATION]);
                let (model, se) = estimate_population_model(&src, n_mc, &rng, exec)?;
                Ok((model, Some(se)))
            }
        }
    }
}

/// Sampler behind a [`DataConfig`].
#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    FrankGumbel(FrankGumbelConfig),
    Gaussian(GaussianSource),
}

impl PointSource for Population {
    fn dim(&self) -> usize {
        match self {
            Population::FrankGumbel(c) => c.dim(),
            Population::Gaussian(g) => g.dim(),
        }
    }

    #[inline]
    fn draw(&self, rng: &mut RngStream, out: &mut [f64]) {
        match self {
            Population::FrankGumbel(c) => c.draw(rng, out),
            Population::Gaussian(g) => g.draw(rng, out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub n_values: Vec<usize>,
    pub alpha_values: Vec<f64>,
    pub replications: usize,
    pub delta_values: Vec<f64>,
    pub truth_n_mc: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Every violated constraint, one message per field.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match &self.data {
            DataConfig::FrankGumbel(c) => out.extend(c.problems().into_iter().map(|p| format!("data.{p}"))),
            DataConfig::Gaussian(c) => {
                if c.mu.len() != c.sigma.dim() {
                    out.push(format!(
                        "data.mu: length {} does not match sigma dimension {}",
                        c.mu.len(),
                        c.sigma.dim()
                    ));
                }
                if !(c.noise_var >= 0.0) || !c.noise_var.is_finite() {
                    out.push(String::from("data.noise_var: must be finite and >= 0"));
                }
            }
        }
        if self.n_values.is_empty() {
            out.push(String::from("n_values: must be nonempty"));
        }
        let dim = match &self.data {
            DataConfig::FrankGumbel(_) => 2,
            DataConfig::Gaussian(c) => c.mu.len(),
        };
        for &n in &self.n_values {
            if n < dim + 1 {
                out.push(format!(
                    "n_values: {n} is too small to fit a {dim}-dimensional covariance"
                ));
            }
        }
        if self.alpha_values.is_empty() {
            out.push(String::from("alpha_values: must be nonempty"));
        }
        for &a in &self.alpha_values {
            if !(a > 0.0 && a < 1.0) {
                out.push(format!("alpha_values: {a} outside (0, 1)"));
            }
        }
        if self.replications < 2 {
            out.push(String::from("replications: must be >= 2"));
        }
        if self.delta_values.iter().any(|d| !d.is_finite()) {
            out.push(String::from("delta_values: must be finite"));
        }
        if self.truth_n_mc < crate::ccte::ORACLE_MIN_MC {
            out.push(format!("truth_n_mc: must be >= {}", crate::ccte::ORACLE_MIN_MC));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

/// Aggregate over the replicates of one `(n, α)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub n: usize,
    pub alpha: f64,
    pub truth: f64,
    pub truth_se: f64,
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub sigma_hat: f64,
    pub rmae: f64,
    pub degenerate_count: usize,
}

impl CellReport {
    pub fn from_estimates(n: usize, alpha: f64, truth: f64, truth_se: f64, estimates: &[CcteEstimate]) -> Result<Self> {
        if estimates.len() < 2 {
            return Err(Error::domain("a cell needs at least two replicates"));
        }
        let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
        let rmae = values
            .iter()
            .map(|v| libm::fabs(v - truth) / libm::fabs(truth))
            .sum::<f64>()
            / values.len() as f64;
        Ok(Self {
            n,
            alpha,
            truth,
            truth_se,
            mean: mean(&values),
            sigma_hat: sample_sd(&values),
            rmae,
            degenerate_count: estimates.iter().filter(|e| e.degenerate).count(),
            estimates: values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub population: DepthModel,
    /// Standard errors of the population mean when it was estimated.
    pub population_se: Option<Vec<f64>>,
    /// Cells ordered by `n`, then by `α` as listed in the config.
    pub cells: Vec<CellReport>,
}

impl ReplicationReport {
    pub fn cell(&self, n: usize, alpha: f64) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.n == n && c.alpha == alpha)
    }
}

/// One replicate: `2n` fresh draws, the first `n` fit the depth and the last
/// `n` carry costs.
pub fn replicate<S: PointSource + ?Sized>(
    source: &S,
    noise_var: f64,
    n: usize,
    alpha: f64,
    master_seed: u64,
    alpha_index: usize,
    j: usize,
) -> Result<CcteEstimate> {
    let mut rng = RngStream::new(
        master_seed,
        stream_id(&[STREAM_REPLICATE, n as u64, alpha_index as u64, j as u64]),
    );
    let level = draw_sample(n, source, &mut rng)?;
    let cost = draw_sample(n, source, &mut rng)?;
    let cost = attach_costs(cost, noise_var, &mut rng)?;
    ccte_hat(&level, &cost, alpha)
}

/// Runs the full `(n, α)` grid: one ground truth per `α`, then `R`
/// replicates per cell. Deterministic in `cfg` for any executor.
pub fn run_replications<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<ReplicationReport> {
    cfg.validate()?;
    let source = cfg.data.source()?;
    let (population, population_se) = cfg.data.population_model(cfg.truth_n_mc, cfg.master_seed, exec)?;
    let truth_rng = RngStream::derive(cfg.master_seed, &[STREAM_TRUTH]);
    let truths = ccte_true_oracle(
        &population,
        &source,
        &cfg.alpha_values,
        cfg.truth_n_mc,
        &truth_rng,
        exec,
    )?;
    let noise = cfg.data.noise_var();
    let mut cells = Vec::with_capacity(cfg.n_values.len() * cfg.alpha_values.len());
    for &n in &cfg.n_values {
        for (k, (&alpha, truth)) in cfg.alpha_values.iter().zip(&truths).enumerate() {
            let results = exec.map_indexed(cfg.replications, |j| {
                replicate(&source, noise, n, alpha, cfg.master_seed, k, j)
            });
            let estimates = results.into_iter().collect::<Result<Vec<_>>>()?;
            cells.push(CellReport::from_estimates(
                n,
                alpha,
                truth.value,
                truth.std_error,
                &estimates,
            )?);
        }
    }
    Ok(ReplicationReport {
        population,
        population_se,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub n: usize,
    pub alpha: f64,
    pub delta: f64,
    pub v: f64,
}

/// `V = n^{1/2 − δ}·RMAE` for every cell and every `δ`.
pub fn rate_table(report: &ReplicationReport, delta_values: &[f64]) -> Vec<RateEntry> {
    report
        .cells
        .iter()
        .flat_map(|c| {
            delta_values.iter().map(move |&delta| RateEntry {
                n: c.n,
                alpha: c.alpha,
                delta,
                v: libm::pow(c.n as f64, 0.5 - delta) * c.rmae,
            })
        })
        .collect()
}

/// Convergence study of the fitted depth against the population depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub data: DataConfig,
    pub n_values: Vec<usize>,
    pub seeds: usize,
    pub alpha: f64,
    pub master_seed: u64,
    #[serde(default = "default_boundary_points")]
    pub boundary_points: usize,
    #[serde(default = "default_sym_diff_n_mc")]
    pub sym_diff_n_mc: usize,
    /// Draws used to estimate a non-Gaussian population's mean and covariance.
    #[serde(default = "default_population_n_mc")]
    pub population_n_mc: usize,
}

fn default_boundary_points() -> usize {
    4096
}

fn default_sym_diff_n_mc() -> usize {
    100_000
}

fn default_population_n_mc() -> usize {
    10_000_000
}

impl ConvergenceConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_values.is_empty() {
            out.push(String::from("n_values: must be nonempty"));
        }
        let dim = match &self.data {
            DataConfig::FrankGumbel(_) => 2,
            DataConfig::Gaussian(c) => c.mu.len(),
        };
        for &n in &self.n_values {
            if n < dim + 1 {
                out.push(format!(
                    "n_values: {n} is too small to fit a {dim}-dimensional covariance"
                ));
            }
        }
        if self.seeds == 0 {
            out.push(String::from("seeds: must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(format!("alpha: {} outside (0, 1)", self.alpha));
        }
        if self.boundary_points < 64 {
            out.push(String::from("boundary_points: must be >= 64"));
        }
        if self.sym_diff_n_mc < 1000 {
            out.push(String::from("sym_diff_n_mc: must be >= 1000"));
        }
        if let DataConfig::FrankGumbel(c) = &self.data {
            out.extend(c.problems().into_iter().map(|p| format!("data.{p}")));
        }
        out
    }
}

/// Distances between fitted and population depth for one draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDraw {
    pub sup_norm: f64,
    pub hausdorff: f64,
    pub sym_diff: f64,
    /// `‖Σ̂⁻¹ − Σ⁻¹‖` in operator norm.
    pub scatter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub sup_norm: Spread,
    pub hausdorff: Spread,
    pub sym_diff: Spread,
    pub scatter: Spread,
}

/// Log-log slopes of the medians; `None` when fewer than three sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSlopes {
    pub sup_norm: Option<f64>,
    pub hausdorff: Option<f64>,
    pub sym_diff: Option<f64>,
    pub scatter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub slopes: ConvergenceSlopes,
}

/// Fits the depth on `n` draws and measures it against `truth`.
pub fn convergence_draw<S: PointSource + ?Sized>(
    source: &S,
    truth: &DepthModel,
    cfg: &ConvergenceConfig,
    n: usize,
    s: usize,
) -> Result<ConvergenceDraw> {
    let mut rng = RngStream::new(cfg.master_seed, stream_id(&[STREAM_CONVERGENCE, n as u64, s as u64]));
    let sample = draw_sample(n, source, &mut rng)?;
    let fitted = fit_model(&sample)?;
    let mut probe = Probe::auto(truth, &fitted)?;
    probe.seed = rng.next_u64();
    let sup_norm = sup_norm_distance(&fitted, truth, &probe)?;
    let a = LevelSetSpec::new(fitted.clone(), cfg.alpha)?;
    let b = LevelSetSpec::new(truth.clone(), cfg.alpha)?;
    let hausdorff = hausdorff_boundaries(&a, &b, cfg.boundary_points)?.distance;
    let sym_diff = sym_diff_volume(&a, &b, cfg.sym_diff_n_mc, &mut rng)?.estimate;
    let fi = fitted.sigma().inverse();
    let ti = truth.sigma().inverse();
    let diff: Vec<Vec<f64>> = fi
        .iter()
        .zip(&ti)
        .map(|(r, t)| r.iter().zip(t).map(|(x, y)| x - y).collect())
        .collect();
    let scatter = operator_norm(&diff)?;
    Ok(ConvergenceDraw {
        sup_norm,
        hausdorff,
        sym_diff,
        scatter,
    })
}

pub fn run_convergence<E: Executor>(cfg: &ConvergenceConfig, exec: &E) -> Result<ConvergenceReport> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems.join("; ")));
    }
    let source = cfg.data.source()?;
    let (truth, _) = cfg.data.population_model(cfg.population_n_mc, cfg.master_seed, exec)?;
    let mut rows = Vec::with_capacity(cfg.n_values.len());
    for &n in &cfg.n_values {
        let draws = exec
            .map_indexed(cfg.seeds, |s| convergence_draw(&source, &truth, cfg, n, s))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let column = |f: fn(&ConvergenceDraw) -> f64| Spread::of(&draws.iter().map(f).collect::<Vec<_>>());
        rows.push(ConvergenceRow {
            n,
            sup_norm: column(|d| d.sup_norm),
            hausdorff: column(|d| d.hausdorff),
            sym_diff: column(|d| d.sym_diff),
            scatter: column(|d| d.scatter),
        });
    }
    let slope = |f: fn(&ConvergenceRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, f(r))).collect();
        rate_slope(&pts).ok()
    };
    let slopes = ConvergenceSlopes {
        sup_norm: slope(|r| r.sup_norm.median),
        hausdorff: slope(|r| r.hausdorff.median),
        sym_diff: slope(|r| r.sym_diff.median),
        scatter: slope(|r| r.scatter.median),
    };
    Ok(ConvergenceReport { rows, slopes })
}
