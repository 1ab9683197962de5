//! Hinge-loss solvers over a Euclidean ball.
//!
//! [`hinge_erm`] is the non-private reference minimizer used as an oracle by
//! tests, reports and margin selection. [`noisy_smoothed_gd`] is the inner
//! solver of the private DP-ERM routine: projected gradient descent on the
//! Moreau envelope of the rho-hinge with Gaussian gradient noise.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::{dot, norm, Dataset};
use crate::rng::DpRng;

/// Projects `w` onto the centered ball of radius `radius` in place.
pub fn project_ball(w: &mut [f64], radius: f64) {
    let n = norm(w);
    if n > radius {
        let s = radius / n;
        w.iter_mut().for_each(|v| *v *= s);
    }
}

/// Empirical rho-hinge risk of `w` on `data`. Summation order is fixed, so the
/// result does not depend on the thread count.
pub fn hinge_value(data: &Dataset, w: &[f64], rho: f64) -> f64 {
    let terms: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|i| crate::losses::hinge(data.label(i) * dot(w, data.row(i)), rho))
        .collect();
    terms.iter().sum::<f64>() / data.len() as f64
}

/// Sum over rows of `d/du loss(y <w,x>) * y x`. Partial sums over fixed chunks are
/// combined sequentially, so the result is independent of the thread count.
fn gradient_sum(data: &Dataset, idx: &[usize], w: &[f64], dloss: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    let d = data.dim();
    let partials: Vec<Vec<f64>> = idx
        .par_chunks(256)
        .map(|chunk| {
            let mut g = vec![0.0; d];
            for &i in chunk {
                let x = data.row(i);
                let y = data.label(i);
                let c = dloss(y * dot(w, x)) * y;
                if c != 0.0 {
                    g.iter_mut().zip(x).for_each(|(gi, xi)| *gi += c * xi);
                }
            }
            g
        })
        .collect();
    let mut total = vec![0.0; d];
    for p in &partials {
        total.iter_mut().zip(p).for_each(|(x, y)| *x += y);
    }
    total
}

#[derive(Debug, Clone)]
pub struct HingeErm {
    pub weights: Vec<f64>,
    pub risk: f64,
}

/// Non-private projected subgradient descent on the rho-hinge over the ball of radius `lambda`.
/// Returns the best iterate seen.
pub fn hinge_erm(data: &Dataset, rho: f64, lambda: f64, iters: usize) -> HingeErm {
    let all: Vec<usize> = (0..data.len()).collect();
    let m = data.len() as f64;
    let g_bound = (data.radius() / rho).max(1e-12);
    let mut w = vec![0.0; data.dim()];
    let mut best = HingeErm { weights: w.clone(), risk: hinge_value(data, &w, rho) };
    for t in 0..iters {
        let mut g = gradient_sum(data, &all, &w, |u| if u < rho { -1.0 / rho } else { 0.0 });
        g.iter_mut().for_each(|v| *v /= m);
        let step = 2.0 * lambda / (g_bound * ((t + 1) as f64).sqrt());
        w.iter_mut().zip(&g).for_each(|(wi, gi)| *wi -= step * gi);
        project_ball(&mut w, lambda);
        let risk = hinge_value(data, &w, rho);
        if risk < best.risk {
            best = HingeErm { weights: w.clone(), risk };
        }
    }
    best
}

/// Derivative in `u` of the Moreau envelope (parameter `mu`) of `max(1 - u/rho, 0)`.
#[inline]
pub fn smoothed_hinge_grad(u: f64, rho: f64, mu: f64) -> f64 {
    let gap = rho - u;
    if gap <= 0.0 {
        0.0
    } else if gap <= mu / rho {
        -gap / mu
    } else {
        -1.0 / rho
    }
}

/// Moreau envelope (parameter `mu`) of `max(1 - u/rho, 0)`.
#[inline]
pub fn smoothed_hinge(u: f64, rho: f64, mu: f64) -> f64 {
    let gap = rho - u;
    if gap <= 0.0 {
        0.0
    } else if gap <= mu / rho {
        gap * gap / (2.0 * mu)
    } else {
        gap / rho - mu / (2.0 * rho * rho)
    }
}

/// Hyperparameters of one run of the inner solver.
#[derive(Debug, Clone, Copy)]
pub struct GdParams {
    pub rho: f64,
    pub radius: f64,
    pub smoothing: f64,
    pub steps: usize,
    pub step_size: f64,
    pub sigma: f64,
}

/// Full-batch projected gradient descent on the smoothed hinge over the rows `idx`,
/// adding `N(0, sigma^2 I)` to every averaged gradient. Returns the average of the
/// last half of the iterates.
pub fn noisy_smoothed_gd(data: &Dataset, idx: &[usize], p: &GdParams, rng: &mut DpRng) -> Vec<f64> {
    let d = data.dim();
    let n = idx.len() as f64;
    let noise = Normal::new(0.0, p.sigma.max(0.0)).expect("finite sigma");
    let mut w = vec![0.0; d];
    let mut avg = vec![0.0; d];
    let tail_start = p.steps / 2;
    let mut tail = 0usize;
    for t in 0..p.steps {
        let g = gradient_sum(data, idx, &w, |u| smoothed_hinge_grad(u, p.rho, p.smoothing));
        for (wi, gi) in w.iter_mut().zip(&g) {
            let z = if p.sigma > 0.0 { noise.sample(rng) } else { 0.0 };
            *wi -= p.step_size * (gi / n + z);
        }
        project_ball(&mut w, p.radius);
        if t >= tail_start {
            tail += 1;
            avg.iter_mut().zip(&w).for_each(|(a, wi)| *a += (wi - *a) / tail as f64);
        }
    }
    if p.steps == 0 {
        return w;
    }
    avg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticKind, SyntheticSpec};
    use crate::rng;

    #[test]
    fn smoothed_hinge_matches_envelope_numerically() {
        // Oracle: brute-force minimization of f(v) + (u - v)^2 / (2 mu) on a fine grid.
        let (rho, mu) = (0.5, 0.1);
        for &u in &[-1.0, 0.0, 0.3, 0.45, 0.49, 0.5, 0.9] {
            let brute = (0..200_001)
                .map(|i| -3.0 + i as f64 * 3e-5)
                .chain(std::iter::once(rho))
                .map(|v| crate::losses::hinge(v, rho) + (u - v) * (u - v) / (2.0 * mu))
                .fold(f64::INFINITY, f64::min);
            assert!((brute - smoothed_hinge(u, rho, mu)).abs() < 1e-6, "u={u}");
            let h = 1e-6;
            let fd = (smoothed_hinge(u + h, rho, mu) - smoothed_hinge(u - h, rho, mu)) / (2.0 * h);
            assert!((fd - smoothed_hinge_grad(u, rho, mu)).abs() < 1e-4, "u={u}");
        }
    }

    #[test]
    fn envelope_is_within_smoothing_gap() {
        let (rho, mu) = (0.7, 0.05);
        for i in 0..100 {
            let u = -2.0 + i as f64 * 0.04;
            let gap = crate::losses::hinge(u, rho) - smoothed_hinge(u, rho, mu);
            assert!((-1e-15..=mu / (2.0 * rho * rho) + 1e-15).contains(&gap));
        }
    }

    #[test]
    fn noiseless_solver_reaches_reference_erm() {
        let spec = SyntheticSpec {
            kind: SyntheticKind::NoisyMargin { dim: 20, margin: 0.05, flip_prob: 0.1 },
            m: 2000,
            seed: 5,
        };
        let data = generate_synthetic(&spec).unwrap();
        let (rho, lambda) = (0.25, 2.0);
        let reference = hinge_erm(&data, rho, lambda, 3000);
        let idx: Vec<usize> = (0..data.len()).collect();
        let p = GdParams {
            rho,
            radius: lambda,
            smoothing: rho / (data.len() as f64).sqrt(),
            steps: 2000,
            step_size: 2.0 * lambda / (data.radius() / rho) / (2000f64).sqrt(),
            sigma: 0.0,
        };
        let w = noisy_smoothed_gd(&data, &idx, &p, &mut rng::seeded(1));
        let risk = hinge_value(&data, &w, rho);
        assert!(risk <= reference.risk + 0.05, "{risk} vs {}", reference.risk);
        assert!(norm(&w) <= lambda + 1e-12);
    }
}
