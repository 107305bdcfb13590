//! Covariate-conditional tail expectation over a depth region.
//!
//! `CCTE(α) = E[Y | X ∈ L(α)]`. The estimator fits the depth on one sample
//! and averages the costs of an independent second sample over the fitted
//! lower set, with `0/0 = 0` when no point lands there.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::depth::{fit_model, Depth, DepthModel};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::levelset::{in_lower_set, LevelSetSpec, BOUNDARY_TOL};
use crate::linalg::{squared_norm, SpdMatrix};
use crate::rng::{stream_id, RngStream};
use crate::sampling::{PointSource, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcteEstimate {
    pub value: f64,
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
    pub hits: usize,
    pub degenerate: bool,
}

/// Two-sample estimator: depth fitted on `level_sample`, costs averaged over
/// the points of `cost_sample` inside the fitted lower set.
///
/// The two samples are expected to be independent.
pub fn ccte_hat(level_sample: &Sample, cost_sample: &Sample, alpha: f64) -> Result<CcteEstimate> {
    Error::check_dim(level_sample.dim(), cost_sample.dim())?;
    if cost_sample.costs().is_none() {
        return Err(Error::MissingCosts);
    }
    check_alpha(alpha)?;
    let model = fit_model(level_sample)?;
    ccte_hat_with_model(&model, level_sample.len(), cost_sample, alpha)
}

/// [`ccte_hat`] on one sample split in half (`n1 = n2`), the first half
/// fitting the depth.
pub fn ccte_hat_split(sample: &Sample, alpha: f64) -> Result<CcteEstimate> {
    let (level, cost) = sample.split_at(sample.len() / 2)?;
    ccte_hat(&level, &cost, alpha)
}

/// Estimator with an already-fitted (or known) depth; `n1` is recorded only.
pub fn ccte_hat_with_model<D: Depth>(model: &D, n1: usize, cost_sample: &Sample, alpha: f64) -> Result<CcteEstimate> {
    Error::check_dim(model.dim(), cost_sample.dim())?;
    let costs = cost_sample.costs().ok_or(Error::MissingCosts)?;
    let threshold = alpha + BOUNDARY_TOL;
    let mut sum = 0.0;
    let mut hits = 0usize;
    for (x, &y) in cost_sample.points().zip(costs) {
        if model.depth(x)? <= threshold {
            sum += y;
            hits += 1;
        }
    }
    let degenerate = hits == 0;
    Ok(CcteEstimate {
        value: if degenerate { 0.0 } else { sum / hits as f64 },
        n1,
        n2: cost_sample.len(),
        alpha,
        hits,
        degenerate,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// Draws per oracle chunk; each chunk has its own substream.
pub const ORACLE_CHUNK: usize = 1 << 16;

/// Minimum Monte Carlo size accepted by the oracle.
pub const ORACLE_MIN_MC: usize = 100_000;

/// Large-sample value of the CCTE with noise-free costs `R(x) = ‖x‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub alpha: f64,
    pub value: f64,
    /// Delta-method standard error of the ratio estimator.
    pub std_error: f64,
    pub hits: u64,
    pub n_mc: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, y: f64) {
        self.count += 1;
        let delta = y - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (y - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * w,
        }
    }
}

fn chunk_bounds(n_mc: usize, chunk: usize) -> (usize, usize) {
    let start = chunk * ORACLE_CHUNK;
    (start, (start + ORACLE_CHUNK).min(n_mc))
}

/// Ratio estimator `Σ R(X_i)·1{X_i ∈ L(α)} / Σ 1{X_i ∈ L(α)}` over `n_mc`
/// draws from `source`, evaluated for every level in `alphas` on the same
/// draws.
///
/// Draws are split into fixed chunks of [`ORACLE_CHUNK`], chunk `k` using
/// substream `stream_id([rng.stream_id(), k])`; partial results are merged
/// in chunk order, so the output does not depend on the executor.
pub fn ccte_true_oracle<S, E>(
    population: &DepthModel,
    source: &S,
    alphas: &[f64],
    n_mc: usize,
    rng: &RngStream,
    exec: &E,
) -> Result<Vec<OracleValue>>
where
    S: PointSource + Sync + ?Sized,
    E: Executor,
{
    let d = population.dim();
    Error::check_dim(d, source.dim())?;
    if n_mc < ORACLE_MIN_MC {
        return Err(Error::domain(format!(
            "oracle needs n_mc >= {ORACLE_MIN_MC}, got {n_mc}"
        )));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    // x ∈ L(α) ⟺ 1/(1 + d²) ≤ α, evaluated exactly as in `in_lower_set`.
    let thresholds: Vec<f64> = alphas.iter().map(|a| a + BOUNDARY_TOL).collect();
    let (seed, base) = (rng.seed(), rng.stream_id());
    let chunks = n_mc.div_ceil(ORACLE_CHUNK);
    let partials = exec.map_indexed(chunks, |k| {
        let (start, end) = chunk_bounds(n_mc, k);
        let mut rng = RngStream::new(seed, stream_id(&[base, k as u64]));
        let mut acc = vec![Moments::default(); thresholds.len()];
        let mut x = vec![0.0; d];
        let (mut diff, mut scratch) = (vec![0.0; d], vec![0.0; d]);
        for _ in start..end {
            source.draw(&mut rng, &mut x);
            let depth = 1.0 / (1.0 + population.mahalanobis_sq_with(&x, &mut diff, &mut scratch));
            let cost = squared_norm(&x);
            for (m, &t) in acc.iter_mut().zip(&thresholds) {
                if depth <= t {
                    m.push(cost);
                }
            }
        }
        acc
    });
    let mut total = vec![Moments::default(); alphas.len()];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t = t.merge(p);
        }
    }
    let n = n_mc as f64;
    alphas
        .iter()
        .zip(total)
        .map(|(&alpha, m)| {
            if m.count == 0 {
                return Err(Error::NoMass);
            }
            Ok(OracleValue {
                alpha,
                value: m.mean,
                std_error: libm::sqrt(m.m2 * n / (n - 1.0)) / m.count as f64,
                hits: m.count,
                n_mc: n_mc as u64,
            })
        })
        .collect()
}

/// Mean and covariance of a population estimated from `n_mc` draws, with the
/// standard errors of the mean. Chunking and merge order follow
/// [`ccte_true_oracle`].
pub fn estimate_population_model<S, E>(
    source: &S,
    n_mc: usize,
    rng: &RngStream,
    exec: &E,
) -> Result<(DepthModel, Vec<f64>)>
where
    S: PointSource + Sync + ?Sized,
    E: Executor,
{
    let d = source.dim();
    if n_mc < d + 1 {
        return Err(Error::domain(format!("population estimate needs more than {d} draws")));
    }
    let (seed, base) = (rng.seed(), rng.stream_id());
    let chunks = n_mc.div_ceil(ORACLE_CHUNK);
    // Per chunk: (count, mean, centred cross-product sums).
    let partials = exec.map_indexed(chunks, |k| {
        let (start, end) = chunk_bounds(n_mc, k);
        let mut rng = RngStream::new(seed, stream_id(&[base, k as u64]));
        let mut x = vec![0.0; d];
        let mut mean = vec![0.0; d];
        let mut cross = vec![0.0; d * d];
        let mut delta = vec![0.0; d];
        for (i, _) in (start..end).enumerate() {
            source.draw(&mut rng, &mut x);
            let count = (i + 1) as f64;
            for j in 0..d {
                delta[j] = x[j] - mean[j];
                mean[j] += delta[j] / count;
            }
            for a in 0..d {
                for b in 0..d {
                    cross[a * d + b] += delta[a] * (x[b] - mean[b]);
                }
            }
        }
        ((end - start) as f64, mean, cross)
    });
    let mut count = 0.0;
    let mut mean = vec![0.0; d];
    let mut cross = vec![0.0; d * d];
    for (nb, mb, cb) in partials {
        let total = count + nb;
        let delta: Vec<f64> = mb.iter().zip(&mean).map(|(b, a)| b - a).collect();
        for a in 0..d {
            for b in 0..d {
                cross[a * d + b] += cb[a * d + b] + delta[a] * delta[b] * count * nb / total;
            }
        }
        for j in 0..d {
            mean[j] += delta[j] * nb / total;
        }
        count = total;
    }
    let cov: Vec<f64> = cross.iter().map(|c| c / (count - 1.0)).collect();
    let sigma = SpdMatrix::from_flat(d, cov)?;
    let se = (0..d).map(|j| libm::sqrt(sigma.get(j, j) / count)).collect();
    Ok((DepthModel::new(mean, sigma)?, se))
}

/// Direct enumeration of the estimator with a known model, using
/// [`in_lower_set`] point by point.
pub fn ccte_by_enumeration(spec: &LevelSetSpec, cost_sample: &Sample) -> Result<f64> {
    let costs = cost_sample.costs().ok_or(Error::MissingCosts)?;
    let mut sum = 0.0;
    let mut hits = 0usize;
    for (i, &y) in costs.iter().enumerate() {
        if in_lower_set(cost_sample.point(i), spec)? {
            sum += y;
            hits += 1;
        }
    }
    Ok(if hits == 0 { 0.0 } else { sum / hits as f64 })
}
