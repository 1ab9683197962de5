//! Finite covers: Euclidean balls, products of Frobenius balls, and
//! empirical sup-norm covers of truncated linear hypotheses.

use std::collections::HashSet;
use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{dot, norm};
use crate::error::{Error, Result};
use crate::rng::{self, DpRng};

pub const DEFAULT_COVER_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    /// Cubic lattice of pitch `2 gamma / sqrt(k)`; lattice points outside the ball are
    /// projected onto its boundary (projection onto a convex set never increases distances).
    AxisGrid,
    /// Greedy net grown from uniform samples until `probes` consecutive samples are covered.
    RandomNet { seed: u64, probes: usize },
}

/// A finite `gamma`-cover of the centered ball of radius `radius` in `R^k`.
#[derive(Debug, Clone)]
pub struct BallCover {
    pub k: usize,
    pub radius: f64,
    pub gamma: f64,
    pub construction: Construction,
    points: Vec<f64>,
}

impl BallCover {
    pub fn len(&self) -> usize {
        self.points.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.k..(i + 1) * self.k]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.k)
    }

    /// Distance from `x` to its nearest cover point.
    pub fn nearest_distance(&self, x: &[f64]) -> f64 {
        self.points().map(|p| dist2(p, x)).fold(f64::INFINITY, f64::min).sqrt()
    }

    /// Index of the cover point closest to `x` (lowest index on ties).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points().enumerate() {
            let d = dist2(p, x);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Worst nearest-point distance over `n` uniform targets in the ball.
    pub fn audit(&self, n: usize, seed: u64) -> f64 {
        let mut r = rng::stream(seed, rng::tag::COVER);
        (0..n)
            .map(|_| self.nearest_distance(&uniform_in_ball(self.k, self.radius, &mut r)))
            .fold(0.0, f64::max)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform draw from the ball of radius `radius` in `R^k`.
pub fn uniform_in_ball(k: usize, radius: f64, rng: &mut DpRng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&g);
        if n > 1e-300 {
            let r = radius * rng.random::<f64>().powf(1.0 / k as f64);
            return g.into_iter().map(|v| v * r / n).collect();
        }
    }
}

fn ln_unit_ball_volume(k: usize) -> f64 {
    // V_k = V_{k-2} * 2 pi / k, V_0 = 1, V_1 = 2.
    let mut v = if k % 2 == 0 { 0.0 } else { 2f64.ln() };
    let mut j = if k % 2 == 0 { 2 } else { 3 };
    while j <= k {
        v += (2.0 * std::f64::consts::PI / j as f64).ln();
        j += 2;
    }
    v
}

/// Upper bound on the number of lattice points the axis grid enumerates.
pub fn axis_grid_estimate(k: usize, radius: f64, gamma: f64) -> f64 {
    if gamma >= radius {
        return 1.0;
    }
    let kf = k as f64;
    let pitch = 2.0 * gamma / kf.sqrt();
    let reach = (radius + gamma) / pitch;
    let cube = kf * (2.0 * reach.floor() + 1.0).ln();
    // Unit cells around admitted points fit in a ball of radius reach + sqrt(k)/2.
    let ball = ln_unit_ball_volume(k) + kf * (reach + kf.sqrt() / 2.0).ln();
    cube.min(ball).exp()
}

/// Bound `(ceil(radius sqrt(k) / gamma) * 2 + 1)^k` on the axis grid size.
pub fn axis_grid_bound(k: usize, radius: f64, gamma: f64) -> f64 {
    ((radius * (k as f64).sqrt() / gamma).ceil() * 2.0 + 1.0).powi(k as i32)
}

pub fn ball_cover(k: usize, radius: f64, gamma: f64, construction: Construction, cap: usize) -> Result<BallCover> {
    if k == 0 {
        return Err(Error::param("cover dimension must be at least 1"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("cover radius gamma must be positive, got {gamma}")));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::param(format!("ball radius must be nonnegative, got {radius}")));
    }
    let mk = |points| BallCover { k, radius, gamma, construction, points };
    if gamma >= radius {
        return Ok(mk(vec![0.0; k]));
    }
    let points = match construction {
        Construction::AxisGrid => {
            let estimate = axis_grid_estimate(k, radius, gamma);
            if estimate > cap as f64 {
                return Err(Error::CoverTooLarge { estimated: estimate, cap });
            }
            axis_grid(k, radius, gamma)
        }
        Construction::RandomNet { seed, probes } => random_net(k, radius, gamma, seed, probes, cap)?,
    };
    Ok(mk(points))
}

fn axis_grid(k: usize, radius: f64, gamma: f64) -> Vec<f64> {
    let pitch = 2.0 * gamma / (k as f64).sqrt();
    let reach = radius + gamma;
    let n = (reach / pitch).floor() as i64;
    let reach2 = reach * reach * (1.0 + 1e-12);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut idx = vec![0i64; k];
    // Depth-first lexicographic enumeration with partial-norm pruning.
    fn rec(
        depth: usize,
        partial: f64,
        idx: &mut [i64],
        n: i64,
        pitch: f64,
        reach2: f64,
        radius: f64,
        out: &mut Vec<f64>,
        seen: &mut HashSet<Vec<u64>>,
    ) {
        if depth == idx.len() {
            let mut p: Vec<f64> = idx.iter().map(|&c| c as f64 * pitch).collect();
            let pn = partial.sqrt();
            if pn > radius {
                p.iter_mut().for_each(|v| *v *= radius / pn);
            }
            if seen.insert(p.iter().map(|v| v.to_bits()).collect()) {
                out.extend(p);
            }
            return;
        }
        for c in -n..=n {
            let v = c as f64 * pitch;
            let next = partial + v * v;
            if next <= reach2 {
                idx[depth] = c;
                rec(depth + 1, next, idx, n, pitch, reach2, radius, out, seen);
            }
        }
    }
    rec(0, 0.0, &mut idx, n, pitch, reach2, radius, &mut out, &mut seen);
    out
}

fn random_net(k: usize, radius: f64, gamma: f64, seed: u64, probes: usize, cap: usize) -> Result<Vec<f64>> {
    let mut r = rng::stream(seed, rng::tag::COVER);
    let mut net: Vec<f64> = Vec::new();
    let g2 = gamma * gamma;
    let mut covered_run = 0;
    while covered_run < probes.max(1) {
        let x = uniform_in_ball(k, radius, &mut r);
        if net.chunks_exact(k).any(|p| dist2(p, &x) <= g2) {
            covered_run += 1;
        } else {
            net.extend(x);
            covered_run = 0;
            if net.len() / k > cap {
                return Err(Error::CoverTooLarge { estimated: (net.len() / k) as f64, cap });
            }
        }
    }
    Ok(net)
}

/// Shape `(rows, cols)` of one weight factor.
pub type Shape = (usize, usize);

/// Product of per-factor ball covers, covering tuples of matrices in root-sum-square Frobenius norm.
#[derive(Debug, Clone)]
pub struct ProductCover {
    pub shapes: Vec<Shape>,
    pub radius: f64,
    pub gamma: f64,
    factors: Vec<BallCover>,
    len: usize,
}

impl ProductCover {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn factor(&self, j: usize) -> &BallCover {
        &self.factors[j]
    }

    /// Member `index` as one flattened row-major matrix per factor; the last factor varies fastest.
    pub fn member(&self, mut index: usize) -> Vec<&[f64]> {
        assert!(index < self.len, "cover index out of range");
        let mut parts = vec![&[][..]; self.factors.len()];
        for (j, f) in self.factors.iter().enumerate().rev() {
            parts[j] = f.point(index % f.len());
            index /= f.len();
        }
        parts
    }

    /// Root-sum-square Frobenius distance from a weight tuple to its nearest member.
    pub fn nearest_distance(&self, weights: &[Vec<f64>]) -> f64 {
        self.factors
            .iter()
            .zip(weights)
            .map(|(f, w)| f.nearest_distance(w).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Factor shapes of an `layers`-layer network cover: `layers - 1` matrices `k x width`, then `k x 1`.
pub fn product_shapes(layers: usize, k: usize, width: usize) -> Vec<Shape> {
    let mut shapes = vec![(k, width); layers.saturating_sub(1)];
    shapes.push((k, 1));
    shapes
}

pub fn product_cover(layers: usize, k: usize, width: usize, radius: f64, gamma: f64, cap: usize) -> Result<ProductCover> {
    if layers == 0 || k == 0 || width == 0 {
        return Err(Error::param("product cover needs layers, k and width all at least 1"));
    }
    let shapes = product_shapes(layers, k, width);
    let per_factor = gamma / (layers as f64).sqrt();
    let mut estimate = 1.0;
    for &(r, c) in &shapes {
        estimate *= axis_grid_estimate(r * c, radius, per_factor);
    }
    if estimate > cap as f64 {
        return Err(Error::CoverTooLarge { estimated: estimate, cap });
    }
    let mut factors: Vec<BallCover> = Vec::with_capacity(shapes.len());
    for &(r, c) in &shapes {
        let existing = factors.iter().find(|f| f.k == r * c).cloned();
        factors.push(match existing {
            Some(f) => f,
            None => ball_cover(r * c, radius, per_factor, Construction::AxisGrid, cap)?,
        });
    }
    let len = factors
        .iter()
        .try_fold(1usize, |acc, f| acc.checked_mul(f.len()))
        .filter(|&n| n <= cap)
        .ok_or(Error::CoverTooLarge { estimated: estimate, cap })?;
    Ok(ProductCover { shapes, radius, gamma, factors, len })
}

// ===========================================================================
// Empirical sup-norm covers
// ===========================================================================

/// Clamps `u` to `[-rho, rho]`.
#[inline]
pub fn truncate(u: f64, rho: f64) -> f64 {
    u.clamp(-rho, rho)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HypothesisFamily {
    /// `x -> <w, x>` with `||w|| <= lambda`.
    Linear { lambda: f64 },
    /// Neural networks; no parameter grid is available for this family.
    NeuralNet,
}

/// Weight vectors whose `rho`-truncated outputs on `xs` form a `rho/2`-cover in max-norm.
///
/// A parameter lattice at Euclidean scale `rho / (4 max||x||)` puts every hypothesis within
/// `rho/4` of a grid point on the sample; grid points are then deduplicated by their output
/// pattern quantized into cells of width `rho/4`, keeping the first of each cell.
pub fn empirical_linf_cover(family: &HypothesisFamily, xs: &[f64], dim: usize, rho: f64, cap: usize) -> Result<Vec<Vec<f64>>> {
    let HypothesisFamily::Linear { lambda } = *family else {
        return Err(Error::CoverUnavailable("only norm-bounded linear families support parameter gridding".into()));
    };
    if dim == 0 || xs.len() % dim != 0 || xs.is_empty() {
        return Err(Error::param("sample matrix shape does not match dimension"));
    }
    if !(rho > 0.0) {
        return Err(Error::param(format!("rho must be positive, got {rho}")));
    }
    let rx = xs.chunks_exact(dim).map(norm).fold(0.0, f64::max);
    if rx == 0.0 {
        return Ok(vec![vec![0.0; dim]]);
    }
    let grid = ball_cover(dim, lambda, rho / (4.0 * rx), Construction::AxisGrid, cap)?;
    let cell = rho / 4.0;
    // Patterns are m cells long; keep a 128-bit digest of each instead of the pattern.
    let digests: Vec<(u64, u64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let w = grid.point(i);
            let (mut lo, mut hi) = (DefaultHasher::new(), DefaultHasher::new());
            1u8.hash(&mut hi);
            for x in xs.chunks_exact(dim) {
                let c = (truncate(dot(w, x), rho) / cell).floor() as i64;
                c.hash(&mut lo);
                c.hash(&mut hi);
            }
            (lo.finish(), hi.finish())
        })
        .collect();
    let mut seen = HashSet::new();
    Ok((0..grid.len()).filter(|&i| seen.insert(digests[i])).map(|i| grid.point(i).to_vec()).collect())
}

/// Max-norm distance between truncated output patterns of two linear hypotheses on `xs`.
pub fn truncated_distance(a: &[f64], b: &[f64], xs: &[f64], dim: usize, rho: f64) -> f64 {
    xs.chunks_exact(dim)
        .map(|x| (truncate(dot(a, x), rho) - truncate(dot(b, x), rho)).abs())
        .fold(0.0, f64::max)
}
