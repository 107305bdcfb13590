//! Depth lower-level sets `L(α) = {x : D(x) ≤ α}`.
//!
//! Membership works for any [`Depth`]. Boundary sampling, Hausdorff
//! distances and Lebesgue volumes are specific to Mahalanobis depth, whose
//! boundary is the ellipsoid `(x − μ)ᵀ Σ⁻¹ (x − μ) = 1/α − 1`.
//!
//! Lower sets are unbounded, so volumes are computed on the bounded upper
//! sets `U = {D ≥ α}`: `L_a Δ L_b` and `U_a Δ U_b` differ only on the
//! boundaries, which have measure zero.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::depth::{Depth, DepthModel};
use crate::error::{Error, Result};
use crate::linalg::squared_norm;
use crate::rng::RngStream;
use crate::sampling::PointSource;

/// Depth values within this distance of `α` count as members of `L(α)`.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetSpec<D = DepthModel> {
    pub model: D,
    pub alpha: f64,
}

impl<D: Depth> LevelSetSpec<D> {
    /// Requires `0 < alpha < max_depth`.
    pub fn new(model: D, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < model.max_depth()) {
            return Err(Error::domain(format!(
                "level {alpha} outside (0, {})",
                model.max_depth()
            )));
        }
        Ok(Self { model, alpha })
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }
}

impl LevelSetSpec<DepthModel> {
    /// Squared Mahalanobis radius of the boundary, `1/α − 1`.
    pub fn radius_sq(&self) -> f64 {
        1.0 / self.alpha - 1.0
    }

    /// Axis-aligned bounding box of the upper set.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let r = libm::sqrt(self.radius_sq());
        let sigma = self.model.sigma();
        self.model
            .mu()
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let half = r * libm::sqrt(sigma.get(i, i));
                (m - half, m + half)
            })
            .unzip()
    }

    #[inline]
    fn in_lower_fast(&self, x: &[f64], diff: &mut [f64], scratch: &mut [f64]) -> bool {
        let depth = 1.0 / (1.0 + self.model.mahalanobis_sq_with(x, diff, scratch));
        depth <= self.alpha + BOUNDARY_TOL
    }
}

/// `x ∈ L(α)`; boundary points are members.
pub fn in_lower_set<D: Depth>(x: &[f64], spec: &LevelSetSpec<D>) -> Result<bool> {
    Ok(spec.model.depth(x)? <= spec.alpha + BOUNDARY_TOL)
}

/// Unit directions used to trace a boundary: equal angles in the plane, a
/// Fibonacci lattice on the 2-sphere, normalized Gaussians beyond.
fn sphere_directions(d: usize, m: usize) -> Vec<Vec<f64>> {
    match d {
        1 => (0..m).map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..m)
            .map(|k| {
                let (s, c) = libm::sincos(2.0 * PI * k as f64 / m as f64);
                vec![c, s]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - libm::sqrt(5.0));
            (0..m)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / m as f64;
                    let rho = libm::sqrt((1.0 - z * z).max(0.0));
                    let (s, c) = libm::sincos(golden * k as f64);
                    vec![rho * c, rho * s, z]
                })
                .collect()
        }
        _ => {
            let mut rng = RngStream::derive(0, &[0x5350_4845, d as u64, m as u64]);
            (0..m)
                .map(|_| loop {
                    let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
                    let n = libm::sqrt(squared_norm(&v));
                    if n > 1e-12 {
                        break v.into_iter().map(|x| x / n).collect();
                    }
                })
                .collect()
        }
    }
}

/// `m` points on the boundary ellipsoid, `μ + r(α)·L·u` for unit directions `u`.
pub fn boundary_points(spec: &LevelSetSpec, m: usize) -> Result<Vec<Vec<f64>>> {
    if m < 8 {
        return Err(Error::domain(format!("need at least 8 boundary points, got {m}")));
    }
    let r = libm::sqrt(spec.radius_sq());
    let mu = spec.model.mu();
    sphere_directions(spec.dim(), m)
        .into_iter()
        .map(|u| {
            let lu = spec.model.sigma().mul_chol(&u)?;
            Ok(mu.iter().zip(lu).map(|(&c, v)| c + r * v).collect())
        })
        .collect()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + (x - y) * (x - y))
}

/// Largest nearest-neighbour distance within a point cloud. Planar
/// boundaries are traced in order, so consecutive gaps suffice there.
fn max_nn_gap(points: &[Vec<f64>], cyclic_plane: bool) -> f64 {
    let worst_sq = if cyclic_plane {
        let m = points.len();
        (0..m)
            .map(|k| dist_sq(&points[k], &points[(k + 1) % m]))
            .fold(0.0, f64::max)
    } else {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                points
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, q)| dist_sq(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    libm::sqrt(worst_sq)
}

/// `sup_{p ∈ A} inf_{q ∈ B} |p − q|`.
fn directed_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            let d = dist_sq(p, q);
            if d < best {
                best = d;
                if best <= worst {
                    break;
                }
            }
        }
        worst = worst.max(best);
    }
    libm::sqrt(worst)
}

/// Sampled Hausdorff distance and the sampling resolution behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hausdorff {
    pub distance: f64,
    /// Largest nearest-neighbour gap of either sampled boundary; the sampled
    /// distance is within this of the exact one.
    pub resolution: f64,
}

/// Two-sided Hausdorff distance between the boundaries of two MHD level sets.
pub fn hausdorff_boundaries(a: &LevelSetSpec, b: &LevelSetSpec, m: usize) -> Result<Hausdorff> {
    Error::check_dim(a.dim(), b.dim())?;
    if m < 64 {
        return Err(Error::domain(format!("need at least 64 boundary points, got {m}")));
    }
    let pa = boundary_points(a, m)?;
    let pb = boundary_points(b, m)?;
    let distance = directed_hausdorff(&pa, &pb).max(directed_hausdorff(&pb, &pa));
    let plane = a.dim() == 2;
    let resolution = max_nn_gap(&pa, plane).max(max_nn_gap(&pb, plane));
    Ok(Hausdorff { distance, resolution })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl McEstimate {
    fn binomial(hits: u64, n: u64, scale: f64) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            estimate: scale * p,
            std_error: scale * libm::sqrt(p * (1.0 - p) / n as f64),
        }
    }
}

/// Lebesgue measure of `L_a Δ L_b` by uniform sampling over the union of both
/// upper-set bounding boxes, inflated by 1%.
pub fn sym_diff_volume(a: &LevelSetSpec, b: &LevelSetSpec, n_mc: usize, rng: &mut RngStream) -> Result<McEstimate> {
    let d = a.dim();
    Error::check_dim(d, b.dim())?;
    if n_mc < 1000 {
        return Err(Error::domain(format!("n_mc must be >= 1000, got {n_mc}")));
    }
    let (lo_a, hi_a) = a.bounding_box();
    let (lo_b, hi_b) = b.bounding_box();
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    let mut volume = 1.0;
    for i in 0..d {
        let l = lo_a[i].min(lo_b[i]);
        let h = hi_a[i].max(hi_b[i]);
        let pad = 0.005 * (h - l);
        lo[i] = l - pad;
        hi[i] = h + pad;
        volume *= hi[i] - lo[i];
    }
    let mut x = vec![0.0; d];
    let (mut diff, mut scratch) = (vec![0.0; d], vec![0.0; d]);
    let mut hits = 0u64;
    for _ in 0..n_mc {
        for i in 0..d {
            x[i] = rng.uniform_in(lo[i], hi[i]);
        }
        let in_a = a.in_lower_fast(&x, &mut diff, &mut scratch);
        let in_b = b.in_lower_fast(&x, &mut diff, &mut scratch);
        if in_a != in_b {
            hits += 1;
        }
    }
    Ok(McEstimate::binomial(hits, n_mc as u64, volume))
}

/// Probability mass of `L_a Δ L_b` under `source`.
pub fn sym_diff_probability<D: Depth, S: PointSource + ?Sized>(
    a: &LevelSetSpec<D>,
    b: &LevelSetSpec<D>,
    source: &S,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    let d = a.dim();
    Error::check_dim(d, b.dim())?;
    Error::check_dim(d, source.dim())?;
    if n_mc == 0 {
        return Err(Error::domain("n_mc must be positive"));
    }
    let mut x = vec![0.0; d];
    let mut hits = 0u64;
    for _ in 0..n_mc {
        source.draw(rng, &mut x);
        if in_lower_set(&x, a)? != in_lower_set(&x, b)? {
            hits += 1;
        }
    }
    Ok(McEstimate::binomial(hits, n_mc as u64, 1.0))
}
