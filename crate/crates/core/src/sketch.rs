//! Johnson-Lindenstrauss sketches.
//!
//! Two kinds: a dense matrix with i.i.d. entries in `{±1/√k}`, and a
//! subsampled randomized Hadamard transform (random signs, fast Walsh-Hadamard
//! transform, row subsample, rescale) that applies in `O(d log d)`.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, DpRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    DenseRademacher,
    FastHadamard,
}

impl ProjectionKind {
    pub fn name(self) -> &'static str {
        match self {
            ProjectionKind::DenseRademacher => "dense_rademacher",
            ProjectionKind::FastHadamard => "fast_hadamard",
        }
    }
}

impl std::str::FromStr for ProjectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense_rademacher" => Ok(Self::DenseRademacher),
            "fast_hadamard" => Ok(Self::FastHadamard),
            other => Err(Error::param(format!("unknown projection kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Body {
    /// Row-major `k x d` entries.
    Dense(Vec<f64>),
    /// Sign flips over the padded length and the sampled Hadamard rows.
    Hadamard { signs: Vec<f64>, rows: Vec<usize> },
}

/// A seeded linear map `R^d -> R^k`.
#[derive(Debug, Clone)]
pub struct Projection {
    kind: ProjectionKind,
    k: usize,
    d: usize,
    seed: u64,
    body: Body,
}

impl Projection {
    pub fn sample(kind: ProjectionKind, d: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::param(format!("projection needs k >= 1 and d >= 1, got k={k}, d={d}")));
        }
        let mut rng = rng::stream(seed, rng::tag::PROJECTION);
        let body = match kind {
            ProjectionKind::DenseRademacher => {
                let len = k
                    .checked_mul(d)
                    .filter(|&n| n <= 1 << 30)
                    .ok_or_else(|| Error::param(format!("dense projection {k}x{d} is too large")))?;
                let s = 1.0 / (k as f64).sqrt();
                Body::Dense((0..len).map(|_| if rng.random::<bool>() { s } else { -s }).collect())
            }
            ProjectionKind::FastHadamard => {
                let n = d.next_power_of_two();
                let signs = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                let rows = sample_rows(&mut rng, n, k);
                Body::Hadamard { signs, rows }
            }
        };
        Ok(Self { kind, k, d, seed, body })
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `Φx`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::param(format!("vector has length {}, projection expects {}", x.len(), self.d)));
        }
        let mut out = vec![0.0; self.k];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.body {
            Body::Dense(entries) => {
                for (o, row) in out.iter_mut().zip(entries.chunks_exact(self.d)) {
                    *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            Body::Hadamard { signs, rows } => {
                let mut buf = vec![0.0; signs.len()];
                for ((b, s), v) in buf.iter_mut().zip(signs).zip(x) {
                    *b = s * v;
                }
                fwht(&mut buf);
                let scale = 1.0 / (self.k as f64).sqrt();
                for (o, &r) in out.iter_mut().zip(rows) {
                    *o = buf[r] * scale;
                }
            }
        }
    }

    /// Applies the map to every row of a row-major `n x d` matrix.
    pub fn apply_rows(&self, rows: &[f64]) -> Result<Vec<f64>> {
        if rows.len() % self.d != 0 {
            return Err(Error::param("matrix size is not a multiple of the source dimension"));
        }
        let n = rows.len() / self.d;
        let mut out = vec![0.0; n * self.k];
        out.par_chunks_mut(self.k)
            .zip(rows.par_chunks(self.d))
            .for_each(|(o, x)| self.apply_into(x, o));
        Ok(out)
    }

    /// `Φᵀw`.
    pub fn apply_transpose(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.k {
            return Err(Error::param(format!("vector has length {}, transpose expects {}", w.len(), self.k)));
        }
        Ok(match &self.body {
            Body::Dense(entries) => {
                let mut out = vec![0.0; self.d];
                for (wi, row) in w.iter().zip(entries.chunks_exact(self.d)) {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += wi * a;
                    }
                }
                out
            }
            Body::Hadamard { signs, rows } => {
                let mut buf = vec![0.0; signs.len()];
                let scale = 1.0 / (self.k as f64).sqrt();
                for (wi, &r) in w.iter().zip(rows) {
                    buf[r] += wi * scale;
                }
                fwht(&mut buf);
                buf.iter().zip(signs).take(self.d).map(|(b, s)| b * s).collect()
            }
        })
    }

    /// Explicit row-major `k x d` matrix.
    pub fn materialize(&self) -> Vec<f64> {
        match &self.body {
            Body::Dense(entries) => entries.clone(),
            Body::Hadamard { .. } => {
                let mut m = vec![0.0; self.k * self.d];
                let mut e = vec![0.0; self.d];
                for j in 0..self.d {
                    e[j] = 1.0;
                    let col = self.apply(&e).expect("shape checked");
                    for (i, v) in col.into_iter().enumerate() {
                        m[i * self.d + j] = v;
                    }
                    e[j] = 0.0;
                }
                m
            }
        }
    }
}

fn sample_rows(rng: &mut DpRng, n: usize, k: usize) -> Vec<usize> {
    if k <= n {
        index::sample(rng, n, k).into_vec()
    } else {
        (0..k).map(|_| rng.random_range(0..n)).collect()
    }
}

/// In-place unnormalized Walsh-Hadamard transform; `buf.len()` must be a power of two.
pub fn fwht(buf: &mut [f64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in buf.chunks_exact_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

/// Sketch-size constant.
pub const DEFAULT_JL_CONSTANT: f64 = 8.0;

/// Target dimension for `(1 ± gamma)`-distortion on `m` points with failure probability `beta`.
pub fn required_dim(m: usize, beta: f64, gamma: f64, kind: ProjectionKind, c: f64) -> Result<usize> {
    if m == 0 {
        return Err(Error::param("m must be at least 1"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param(format!("beta must be in (0, 1), got {beta}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param(format!("gamma must be in (0, 1), got {gamma}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("sketch constant must be positive"));
    }
    let m = m as f64;
    let base = c * (m / beta).ln() / (gamma * gamma);
    let k = match kind {
        ProjectionKind::DenseRademacher => base,
        ProjectionKind::FastHadamard => base * (m / (gamma * beta)).ln(),
    };
    Ok((k.ceil() as usize).max(1))
}
