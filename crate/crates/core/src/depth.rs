//! Mahalanobis depth.
//!
//! `MHD(x) = 1 / (1 + (x - μ)ᵀ Σ⁻¹ (x - μ))`. The population depth uses the
//! true location and scatter; the plug-in depth uses the sample mean and the
//! unbiased sample covariance, see [`fit_model`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SpdMatrix, PIVOT_FLOOR};
use crate::rng::RngStream;
use crate::sampling::Sample;

/// Any center-outward depth: a map from points to `[0, max_depth]`.
///
/// Level sets and the CCTE estimator only need this surface; Mahalanobis
/// depth is the one implementation shipped here.
pub trait Depth {
    fn dim(&self) -> usize;

    fn depth(&self, x: &[f64]) -> Result<f64>;

    /// Supremum of the depth over the space (`α_max`).
    fn max_depth(&self) -> f64;
}

const STACK_DIM: usize = 8;

/// Location and scatter of a Mahalanobis depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct DepthModel {
    mu: Vec<f64>,
    sigma: SpdMatrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    mu: Vec<f64>,
    sigma: SpdMatrix,
}

impl TryFrom<RawModel> for DepthModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        DepthModel::new(raw.mu, raw.sigma)
    }
}

impl From<DepthModel> for RawModel {
    fn from(m: DepthModel) -> Self {
        RawModel {
            mu: m.mu,
            sigma: m.sigma,
        }
    }
}

impl DepthModel {
    pub fn new(mu: Vec<f64>, sigma: SpdMatrix) -> Result<Self> {
        Error::check_dim(sigma.dim(), mu.len())?;
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("location has non-finite entries"));
        }
        Ok(Self { mu, sigma })
    }

    /// `N(0, I_d)` model.
    pub fn standard(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            sigma: SpdMatrix::identity(dim),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    /// Squared Mahalanobis distance to the center.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        Error::check_dim(d, x.len())?;
        if d <= STACK_DIM {
            let mut diff = [0.0; STACK_DIM];
            let mut scratch = [0.0; STACK_DIM];
            Ok(self.mahalanobis_sq_with(x, &mut diff[..d], &mut scratch[..d]))
        } else {
            let mut diff = vec![0.0; d];
            let mut scratch = vec![0.0; d];
            Ok(self.mahalanobis_sq_with(x, &mut diff, &mut scratch))
        }
    }

    /// Allocation-free squared distance; buffers must have length `dim`.
    #[inline]
    pub(crate) fn mahalanobis_sq_with(&self, x: &[f64], diff: &mut [f64], scratch: &mut [f64]) -> f64 {
        for ((d, &xi), &mi) in diff.iter_mut().zip(x).zip(&self.mu) {
            *d = xi - mi;
        }
        self.sigma.quad_form_unchecked(diff, scratch)
    }
}

impl Depth for DepthModel {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn depth(&self, x: &[f64]) -> Result<f64> {
        mhd(x, self)
    }

    fn max_depth(&self) -> f64 {
        1.0
    }
}

/// Mahalanobis depth of `x`.
pub fn mhd(x: &[f64], m: &DepthModel) -> Result<f64> {
    Ok(1.0 / (1.0 + m.mahalanobis_sq(x)?))
}

/// Gradient `-2·MHD(x)²·Σ⁻¹(x - μ)`.
pub fn mhd_gradient(x: &[f64], m: &DepthModel) -> Result<Vec<f64>> {
    Error::check_dim(m.dim(), x.len())?;
    let diff: Vec<f64> = x.iter().zip(&m.mu).map(|(a, b)| a - b).collect();
    let depth = mhd(x, m)?;
    let scale = -2.0 * depth * depth;
    // `+ 0.0` turns the -0 at the center into +0.
    Ok(m.sigma.solve(&diff)?.into_iter().map(|g| scale * g + 0.0).collect())
}

/// Plug-in model: sample mean and unbiased (1/(n−1)) sample covariance.
pub fn fit_model(s: &Sample) -> Result<DepthModel> {
    let n = s.len();
    let d = s.dim();
    if n < d + 1 {
        return Err(Error::DegenerateSample(format!(
            "{n} points cannot span {d} dimensions"
        )));
    }
    let mut mu = vec![0.0; d];
    for p in s.points() {
        for (m, &x) in mu.iter_mut().zip(p) {
            *m += x;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = vec![0.0; d * d];
    let mut diff = vec![0.0; d];
    for p in s.points() {
        for ((c, &x), &m) in diff.iter_mut().zip(p).zip(&mu) {
            *c = x - m;
        }
        for i in 0..d {
            for j in 0..=i {
                cov[i * d + j] += diff[i] * diff[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in 0..=i {
            let v = cov[i * d + j] / denom;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    let sigma = SpdMatrix::from_flat(d, cov).map_err(|e| match e {
        Error::NotPositiveDefinite { index, pivot } => {
            Error::DegenerateSample(format!("covariance is singular (pivot {pivot:e} at {index})"))
        }
        other => other,
    })?;
    // Rounding can leave a tiny positive pivot on rank-deficient data.
    let l = sigma.chol();
    for i in 0..d {
        let pivot = l[i * d + i] * l[i * d + i];
        if pivot <= 1e-12 * sigma.get(i, i) || pivot <= PIVOT_FLOOR {
            return Err(Error::DegenerateSample(format!(
                "covariance is numerically singular (relative pivot {:e} at {i})",
                pivot / sigma.get(i, i)
            )));
        }
    }
    DepthModel::new(mu, sigma)
}

/// Points at which two depth functions are compared.
///
/// A tensor grid over a box plus optional far-field points scattered
/// log-uniformly in radius around `far_center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub per_axis: usize,
    pub far_center: Vec<f64>,
    pub far_points: usize,
    pub far_min_radius: f64,
    pub far_max_radius: f64,
    pub seed: u64,
}

/// Grid budget: 201 points per axis in the plane.
const GRID_BUDGET: f64 = 40_401.0;

impl Probe {
    /// Grid over `μ ± 6·√diag(Σ)` covering both models, plus 10⁴ far points
    /// out to radius 10³.
    pub fn auto(a: &DepthModel, b: &DepthModel) -> Result<Self> {
        Error::check_dim(a.dim(), b.dim())?;
        let d = a.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let mut max_sd: f64 = 0.0;
        for m in [a, b] {
            for i in 0..d {
                let sd = libm::sqrt(m.sigma.get(i, i));
                max_sd = max_sd.max(sd);
                lo[i] = lo[i].min(m.mu[i] - 6.0 * sd);
                hi[i] = hi[i].max(m.mu[i] + 6.0 * sd);
            }
        }
        let per_axis = (libm::floor(libm::pow(GRID_BUDGET, 1.0 / d as f64) + 1e-9) as usize).max(3);
        let far_min_radius = 6.0 * max_sd;
        Ok(Self {
            lo,
            hi,
            per_axis,
            far_center: a.mu.clone(),
            far_points: 10_000,
            far_min_radius,
            far_max_radius: if far_min_radius < 1e3 {
                1e3
            } else {
                10.0 * far_min_radius
            },
            seed: 0,
        })
    }

    /// Plain tensor grid on `[lo, hi]` without far points.
    pub fn grid(lo: Vec<f64>, hi: Vec<f64>, per_axis: usize) -> Result<Self> {
        Error::check_dim(lo.len(), hi.len())?;
        if lo.is_empty() || per_axis == 0 {
            return Err(Error::domain("probe grid must be nonempty"));
        }
        Ok(Self {
            far_center: vec![0.0; lo.len()],
            lo,
            hi,
            per_axis,
            far_points: 0,
            far_min_radius: 0.0,
            far_max_radius: 0.0,
            seed: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.per_axis.pow(self.dim() as u32) + self.far_points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `f` on every probe point.
    pub fn for_each_point(&self, mut f: impl FnMut(&[f64])) {
        let d = self.dim();
        let mut x = vec![0.0; d];
        let mut idx = vec![0usize; d];
        let step: Vec<f64> = (0..d)
            .map(|i| {
                if self.per_axis > 1 {
                    (self.hi[i] - self.lo[i]) / (self.per_axis - 1) as f64
                } else {
                    0.0
                }
            })
            .collect();
        let total = self.per_axis.pow(d as u32);
        for _ in 0..total {
            for i in 0..d {
                x[i] = if self.per_axis > 1 {
                    self.lo[i] + step[i] * idx[i] as f64
                } else {
                    0.5 * (self.lo[i] + self.hi[i])
                };
            }
            f(&x);
            for i in 0..d {
                idx[i] += 1;
                if idx[i] < self.per_axis {
                    break;
                }
                idx[i] = 0;
            }
        }
        if self.far_points == 0 {
            return;
        }
        let mut rng = RngStream::derive(self.seed, &[0x5052_4f42]);
        let log_lo = libm::log(self.far_min_radius.max(f64::MIN_POSITIVE));
        let log_hi = libm::log(self.far_max_radius.max(self.far_min_radius));
        for _ in 0..self.far_points {
            let mut norm = 0.0;
            while norm == 0.0 {
                for xi in x.iter_mut() {
                    *xi = rng.normal();
                }
                norm = libm::sqrt(crate::linalg::squared_norm(&x));
            }
            let r = libm::exp(rng.uniform_in(log_lo, log_hi));
            for (xi, &c) in x.iter_mut().zip(&self.far_center) {
                *xi = c + r * *xi / norm;
            }
            f(&x);
        }
    }
}

/// `max |MHD_a − MHD_b|` over the probe points, a lower bound of the sup norm
/// over the whole space.
pub fn sup_norm_distance(a: &DepthModel, b: &DepthModel, probe: &Probe) -> Result<f64> {
    Error::check_dim(a.dim(), b.dim())?;
    Error::check_dim(a.dim(), probe.dim())?;
    if probe.is_empty() {
        return Err(Error::domain("probe set is empty"));
    }
    let d = a.dim();
    let (mut diff, mut scratch) = (vec![0.0; d], vec![0.0; d]);
    let mut best: f64 = 0.0;
    probe.for_each_point(|x| {
        let da = 1.0 / (1.0 + a.mahalanobis_sq_with(x, &mut diff, &mut scratch));
        let db = 1.0 / (1.0 + b.mahalanobis_sq_with(x, &mut diff, &mut scratch));
        best = best.max(libm::fabs(da - db));
    });
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::build_spd;

    #[test]
    fn depth_examples() {
        let m = DepthModel::standard(2);
        assert_eq!(mhd(&[0.0, 0.0], &m).unwrap(), 1.0);
        assert_eq!(mhd(&[1.0, 0.0], &m).unwrap(), 0.5);
        assert_eq!(mhd(&[3.0, 4.0], &m).unwrap(), 1.0 / 26.0);
        assert!(matches!(mhd(&[1.0], &m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gradient_examples() {
        let m = DepthModel::standard(2);
        assert_eq!(mhd_gradient(&[0.0, 0.0], &m).unwrap(), vec![-0.0, -0.0]);
        assert_eq!(mhd_gradient(&[1.0, 0.0], &m).unwrap(), vec![-0.5, -0.0]);
    }

    #[test]
    fn fit_rejects_degenerate() {
        let s = Sample::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(fit_model(&s), Err(Error::DegenerateSample(_))));
        let s = Sample::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        assert!(matches!(fit_model(&s), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn fit_unit_square_corners() {
        let s = Sample::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let m = fit_model(&s).unwrap();
        assert_eq!(m.mu(), &[0.5, 0.5]);
        // Σ (x - 0.5)² = 4·0.25 = 1, divided by n − 1 = 3.
        assert!((m.sigma().get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.sigma().get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.sigma().get(0, 1), 0.0);
    }

    #[test]
    fn model_dimension_checked() {
        let sigma = build_spd(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(DepthModel::new(vec![0.0], sigma).is_err());
    }

    #[test]
    fn sup_norm_identical_is_zero() {
        let m = DepthModel::standard(2);
        let p = Probe::auto(&m, &m).unwrap();
        assert_eq!(p.per_axis, 201);
        assert_eq!(sup_norm_distance(&m, &m, &p).unwrap(), 0.0);
    }

    #[test]
    fn sup_norm_shrinks_with_shift() {
        let a = DepthModel::standard(2);
        let probe = Probe::grid(vec![-5.0, -5.0], vec![5.0, 5.0], 101).unwrap();
        let mut last = f64::INFINITY;
        for &t in &[1.0, 0.5, 0.1, 0.01, 0.001] {
            let b = DepthModel::new(vec![t, 0.0], SpdMatrix::identity(2)).unwrap();
            let s = sup_norm_distance(&a, &b, &probe).unwrap();
            assert!(s < last);
            last = s;
        }
        assert!(last < 1e-3);
    }
}
