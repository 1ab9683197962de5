//! Pure-DP selection of small feed-forward networks.
//!
//! Each layer's weights live in a JL-compressed space: the effective matrix of layer `j`
//! is `Φ_{j-1}ᵀ W̃_j`, where `Φ_{j-1}` is a fixed Rademacher sketch and `W̃_j` is one of
//! `L-1` factors of shape `k x N` followed by a `k x 1` output factor. A product cover of
//! the factor balls is scored on the sample and one member is drawn by the exponential
//! mechanism.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cover::{product_cover, product_shapes, ProductCover, DEFAULT_COVER_CAP};
use crate::data::{dot, Dataset};
use crate::error::{Error, Result};
use crate::linear::{fmt17, header_get, parse_header, parse_values};
use crate::losses::MarginParams;
use crate::mech::{exponential_mechanism, PrivacyParams, ScoredCandidates};
use crate::rng::{self, child_seed, tag};
use crate::sketch::{Projection, ProjectionKind};

/// `(1 - e^{-ηa/2}) / (1 + e^{-ηa/2})`, evaluated as `tanh(ηa/4)`.
#[inline]
pub fn activation(a: f64, eta: f64) -> f64 {
    (eta * a / 4.0).tanh()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Architecture {
    pub layers: usize,
    pub width: usize,
    pub eta: f64,
}

impl Architecture {
    pub fn new(layers: usize, width: usize, eta: f64) -> Result<Self> {
        if layers == 0 || width == 0 {
            return Err(Error::param("network needs at least one layer and width at least 1"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param(format!("activation slope must be positive, got {eta}")));
        }
        Ok(Self { layers, width, eta })
    }
}

/// The sketches `Φ₀ (k x d), Φ₁..Φ_{L-1} (k x N)`, all derived from one seed.
pub fn sample_projections(arch: &Architecture, input_dim: usize, k: usize, seed: u64) -> Result<Vec<Projection>> {
    (0..arch.layers)
        .map(|j| {
            let src = if j == 0 { input_dim } else { arch.width };
            Projection::sample(ProjectionKind::DenseRademacher, src, k, child_seed(seed, j as u64))
        })
        .collect()
}

/// Network with sketched layers; `factors[j]` is row-major `k x N` (or `k x 1` for the last).
#[derive(Debug, Clone)]
pub struct NeuralNet {
    pub arch: Architecture,
    pub input_dim: usize,
    pub k: usize,
    pub projection_seed: u64,
    pub projections: Vec<Projection>,
    pub factors: Vec<Vec<f64>>,
}

impl NeuralNet {
    pub fn new(arch: Architecture, input_dim: usize, k: usize, projection_seed: u64, factors: Vec<Vec<f64>>) -> Result<Self> {
        let shapes = product_shapes(arch.layers, k, arch.width);
        if factors.len() != shapes.len() || factors.iter().zip(&shapes).any(|(f, (r, c))| f.len() != r * c) {
            return Err(Error::param("factor shapes do not match the architecture"));
        }
        let projections = sample_projections(&arch, input_dim, k, projection_seed)?;
        Ok(Self { arch, input_dim, k, projection_seed, projections, factors })
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let z = self.projections[0].apply(x)?;
        Ok(forward_sketched(&self.arch, &self.projections, &self.factors.iter().map(Vec::as_slice).collect::<Vec<_>>(), z))
    }

    pub fn to_text(&self, provenance: &NnProvenance) -> String {
        let mut s = format!(
            "{NN_MAGIC} L={} N={} k={} d={} eta={} projection_seed={} seed={} eps={} rho={} lambda={} selected={}\n",
            self.arch.layers,
            self.arch.width,
            self.k,
            self.input_dim,
            fmt17(self.arch.eta),
            self.projection_seed,
            provenance.seed,
            fmt17(provenance.epsilon),
            fmt17(provenance.rho),
            fmt17(provenance.lambda),
            provenance.selected,
        );
        for f in &self.factors {
            for v in f {
                let _ = writeln!(s, "{}", fmt17(*v));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<(Self, NnProvenance)> {
        let mut lines = text.lines();
        let head = parse_header(lines.next().unwrap_or(""), NN_MAGIC)?;
        let arch = Architecture::new(header_get(&head, "L")?, header_get(&head, "N")?, header_get(&head, "eta")?)?;
        let k: usize = header_get(&head, "k")?;
        let shapes = product_shapes(arch.layers, k, arch.width);
        let total: usize = shapes.iter().map(|(r, c)| r * c).sum();
        let flat = parse_values(lines, 2, total)?;
        let mut factors = Vec::with_capacity(shapes.len());
        let mut at = 0;
        for (r, c) in shapes {
            factors.push(flat[at..at + r * c].to_vec());
            at += r * c;
        }
        let net = Self::new(arch, header_get(&head, "d")?, k, header_get(&head, "projection_seed")?, factors)?;
        let prov = NnProvenance {
            seed: header_get(&head, "seed")?,
            epsilon: header_get(&head, "eps")?,
            rho: header_get(&head, "rho")?,
            lambda: header_get(&head, "lambda")?,
            selected: header_get(&head, "selected")?,
        };
        Ok((net, prov))
    }
}

const NN_MAGIC: &str = "dpm-nn v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnProvenance {
    pub seed: u64,
    pub epsilon: f64,
    pub rho: f64,
    pub lambda: f64,
    pub selected: usize,
}

/// Forward pass given `z = Φ₀x`: each layer computes `W̃_jᵀ z`, then `z ← Φ_j σ(·)`.
fn forward_sketched(arch: &Architecture, projections: &[Projection], factors: &[&[f64]], mut z: Vec<f64>) -> f64 {
    for j in 0..arch.layers - 1 {
        z = hidden_step(arch, factors[j], &z, &projections[j + 1]);
    }
    dot(&z, factors[arch.layers - 1])
}

/// `Φ σ(W̃ᵀ z)` for a row-major `k x N` factor `W̃`.
fn hidden_step(arch: &Architecture, w: &[f64], z: &[f64], next: &Projection) -> Vec<f64> {
    let mut a = vec![0.0; arch.width];
    for (zi, row) in z.iter().zip(w.chunks_exact(arch.width)) {
        a.iter_mut().zip(row).for_each(|(ai, wi)| *ai += zi * wi);
    }
    a.iter_mut().for_each(|v| *v = activation(*v, arch.eta));
    next.apply(&a).expect("width matches")
}

/// A full-width network: `weights[0]` is `d x N`, middle layers `N x N`, the last `N x 1`
/// (all row-major, applied as `Wᵀv`).
#[derive(Debug, Clone)]
pub struct DenseNet {
    pub arch: Architecture,
    pub input_dim: usize,
    pub weights: Vec<Vec<f64>>,
}

impl DenseNet {
    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut v = x.to_vec();
        for (j, w) in self.weights.iter().enumerate() {
            let cols = if j + 1 == self.arch.layers { 1 } else { self.arch.width };
            let mut a = vec![0.0; cols];
            for (vi, row) in v.iter().zip(w.chunks_exact(cols)) {
                a.iter_mut().zip(row).for_each(|(ai, wi)| *ai += vi * wi);
            }
            if j + 1 < self.arch.layers {
                a.iter_mut().for_each(|t| *t = activation(*t, self.arch.eta));
            }
            v = a;
        }
        v[0]
    }

    /// The sketched network with factors `W̃_j = Φ_{j-1} W_j`, whose effective weights are
    /// `Φ_{j-1}ᵀ Φ_{j-1} W_j`.
    pub fn compress(&self, k: usize, projection_seed: u64) -> Result<NeuralNet> {
        let projections = sample_projections(&self.arch, self.input_dim, k, projection_seed)?;
        let factors = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let cols = if j + 1 == self.arch.layers { 1 } else { self.arch.width };
                let rows = w.len() / cols;
                // Column c of W lives at stride `cols`; sketch each column.
                let mut out = vec![0.0; k * cols];
                for c in 0..cols {
                    let col: Vec<f64> = (0..rows).map(|i| w[i * cols + c]).collect();
                    for (i, v) in projections[j].apply(&col).expect("rows match").into_iter().enumerate() {
                        out[i * cols + c] = v;
                    }
                }
                out
            })
            .collect();
        Ok(NeuralNet { arch: self.arch, input_dim: self.input_dim, k, projection_seed, projections, factors })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NnConfig {
    /// Multiplier in `k = C r² (2ηΛ)^{2L} / ρ²`.
    pub k_constant: f64,
    /// Multiplier in `γ = C ρ / (r (4ηΛ)^L)`.
    pub gamma_constant: f64,
    pub k_override: Option<usize>,
    pub gamma_override: Option<f64>,
    pub cover_cap: usize,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self { k_constant: 1.0, gamma_constant: 0.1, k_override: None, gamma_override: None, cover_cap: DEFAULT_COVER_CAP }
    }
}

/// Sketch dimension and cover radius for an architecture.
pub fn nn_dims(arch: &Architecture, r: f64, margin: &MarginParams, cfg: &NnConfig) -> (usize, f64) {
    let l = arch.layers as i32;
    let el = arch.eta * margin.lambda;
    let k = cfg
        .k_override
        .unwrap_or_else(|| ((cfg.k_constant * r * r * (2.0 * el).powi(2 * l) / (margin.rho * margin.rho)).ceil() as usize).max(1));
    let gamma = cfg.gamma_override.unwrap_or(cfg.gamma_constant * margin.rho / (r * (4.0 * el).powi(l)));
    (k, gamma)
}

/// Data-independent state of the learner: architecture, sketch size and the product cover
/// of the factor balls of radius `2Λ`. Reusable across datasets of the same shape.
#[derive(Debug, Clone)]
pub struct NnTrainer {
    pub arch: Architecture,
    pub privacy: PrivacyParams,
    pub margin: MarginParams,
    pub m: usize,
    pub input_dim: usize,
    pub k: usize,
    pub gamma: f64,
    pub cover: ProductCover,
}

#[derive(Debug, Clone)]
pub struct NnFit {
    pub net: NeuralNet,
    pub provenance: NnProvenance,
    /// Empirical zero-one risk of every cover member under this fit's projections.
    pub cover_risks: Vec<f64>,
}

impl NnTrainer {
    pub fn new(m: usize, input_dim: usize, radius: f64, arch: Architecture, privacy: PrivacyParams, margin: MarginParams, cfg: &NnConfig) -> Result<Self> {
        privacy.require_pure()?;
        if m == 0 || input_dim == 0 {
            return Err(Error::param("empty sample"));
        }
        if !(radius > 0.0) {
            return Err(Error::param(format!("feature radius must be positive, got {radius}")));
        }
        let (k, gamma) = nn_dims(&arch, radius, &margin, cfg);
        let cover = product_cover(arch.layers, k, arch.width, 2.0 * margin.lambda, gamma, cfg.cover_cap).map_err(|e| match e {
            Error::CoverTooLarge { estimated, cap } => Error::ArchitectureTooLarge(format!(
                "L={} N={} k={k} gamma={gamma:.3e} needs about {estimated:.3e} members, cap {cap}",
                arch.layers, arch.width
            )),
            other => other,
        })?;
        Ok(Self { arch, privacy, margin, m, input_dim, k, gamma, cover })
    }

    /// Empirical zero-one risk of every cover member.
    pub fn cover_risks(&self, data: &Dataset, projections: &[Projection]) -> Result<Vec<f64>> {
        self.cover_margin_risks(data, projections, 0.0)
    }

    /// Empirical `rho`-margin risk of every cover member, in member order.
    ///
    /// Members sharing a prefix of factors share hidden activations, so the cover is walked
    /// depth-first and only the output factor is evaluated per member.
    pub fn cover_margin_risks(&self, data: &Dataset, projections: &[Projection], rho: f64) -> Result<Vec<f64>> {
        let sketched = projections[0].apply_rows(data.features())?;
        let labels: Vec<f64> = (0..data.len()).map(|i| data.label(i)).collect();
        let top = self.cover.factor(0);
        let parts: Vec<Vec<f64>> = (0..top.len())
            .into_par_iter()
            .map(|c| {
                let mut out = Vec::new();
                self.walk(projections, 0, top.point(c), &sketched, &labels, rho, &mut out);
                out
            })
            .collect();
        Ok(parts.concat())
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(&self, projections: &[Projection], depth: usize, w: &[f64], zs: &[f64], labels: &[f64], rho: f64, out: &mut Vec<f64>) {
        let k = self.k;
        if depth + 1 == self.arch.layers {
            let errors = zs.chunks_exact(k).zip(labels).filter(|(z, y)| *y * dot(z, w) <= rho).count();
            out.push(errors as f64 / labels.len() as f64);
            return;
        }
        let next: Vec<f64> = zs.chunks_exact(k).flat_map(|z| hidden_step(&self.arch, w, z, &projections[depth + 1])).collect();
        for p in self.cover.factor(depth + 1).points() {
            self.walk(projections, depth + 1, p, &next, labels, rho, out);
        }
    }

    pub fn fit(&self, data: &Dataset, seed: u64) -> Result<NnFit> {
        if data.len() != self.m || data.dim() != self.input_dim {
            return Err(Error::param(format!(
                "trainer was built for m={}, d={}; got m={}, d={}",
                self.m,
                self.input_dim,
                data.len(),
                data.dim()
            )));
        }
        let projection_seed = child_seed(seed, tag::PROJECTION);
        let projections = sample_projections(&self.arch, self.input_dim, self.k, projection_seed)?;
        let cover_risks = self.cover_risks(data, &projections)?;
        let scores = cover_risks.iter().map(|r| -r).collect();
        let mut mech_rng = rng::stream(child_seed(seed, tag::MECHANISM), 0);
        let selected = exponential_mechanism(&ScoredCandidates::uniform(scores, 1.0 / self.m as f64), self.privacy.epsilon, &mut mech_rng)?;
        let factors = self.cover.member(selected).into_iter().map(<[f64]>::to_vec).collect();
        let net = NeuralNet { arch: self.arch, input_dim: self.input_dim, k: self.k, projection_seed, projections, factors };
        let provenance = NnProvenance { seed, epsilon: self.privacy.epsilon, rho: self.margin.rho, lambda: self.margin.lambda, selected };
        Ok(NnFit { net, provenance, cover_risks })
    }
}

/// epsilon-DP network selection over the product cover.
pub fn train_nn_pure_dp(data: &Dataset, arch: Architecture, privacy: PrivacyParams, margin: MarginParams, seed: u64, cfg: &NnConfig) -> Result<NnFit> {
    NnTrainer::new(data.len(), data.dim(), data.radius(), arch, privacy, margin, cfg)?.fit(data, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{ball_cover, uniform_in_ball, Construction};
    use crate::data::norm;
    use crate::losses::{margin_risk, zero_one_risk};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn activation_matches_logistic_form() {
        for &eta in &[0.5, 1.0, 3.0] {
            for &a in &[-1.0, 0.0, 1.0] {
                let e = (-eta * a / 2.0f64).exp();
                assert!((activation(a, eta) - (1.0 - e) / (1.0 + e)).abs() < 1e-12);
            }
        }
        assert_eq!(activation(0.0, 2.0), 0.0);
    }

    proptest! {
        #[test]
        fn activation_is_eta_lipschitz(a in -50.0..50.0f64, b in -50.0..50.0f64, eta in 0.01..10.0f64) {
            prop_assert!((activation(a, eta) - activation(b, eta)).abs() <= eta * (a - b).abs() + 1e-15);
        }
    }

    fn xor_data(m: usize, seed: u64) -> Dataset {
        let mut r = rng::seeded(seed);
        let mut f = Vec::new();
        let mut y = Vec::new();
        for _ in 0..m {
            let p = uniform_in_ball(2, 1.0, &mut r);
            y.push(if p[0] * p[1] >= 0.0 { 1 } else { -1 });
            f.extend(p);
        }
        Dataset::new(f, 2, y, 1.0).unwrap()
    }

    fn tiny_cfg() -> NnConfig {
        NnConfig { k_override: Some(2), gamma_override: Some(1.0), ..NnConfig::default() }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let arch = Architecture::new(3, 4, 2.0).unwrap();
        let factors = product_shapes(3, 5, 4).iter().map(|(r, c)| vec![0.0; r * c]).collect();
        let net = NeuralNet::new(arch, 7, 5, 1, factors).unwrap();
        let mut r = rng::seeded(2);
        for _ in 0..20 {
            assert_eq!(net.forward(&uniform_in_ball(7, 1.0, &mut r)).unwrap(), 0.0);
        }
        assert!(net.forward(&[0.0; 6]).is_err());
    }

    #[test]
    fn huge_epsilon_picks_a_cover_minimizer() {
        let data = xor_data(64, 3);
        let arch = Architecture::new(2, 2, 4.0).unwrap();
        let trainer = NnTrainer::new(64, 2, 1.0, arch, PrivacyParams::pure(1e9).unwrap(), MarginParams::new(0.2, 1.0).unwrap(), &tiny_cfg()).unwrap();
        for seed in 0..3 {
            let fit = trainer.fit(&data, seed).unwrap();
            let best = fit.cover_risks.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(fit.cover_risks[fit.provenance.selected], best);
            let scores: Vec<f64> = (0..64).map(|i| data.label(i) * fit.net.forward(data.row(i)).unwrap()).collect();
            assert_eq!(zero_one_risk(&scores).unwrap(), best);
        }
    }

    #[test]
    fn cover_walk_matches_member_forward() {
        let data = xor_data(30, 8);
        let arch = Architecture::new(3, 1, 2.0).unwrap();
        let cfg = NnConfig { k_override: Some(2), gamma_override: Some(1.0), ..NnConfig::default() };
        let trainer = NnTrainer::new(30, 2, 1.0, arch, PrivacyParams::pure(1.0).unwrap(), MarginParams::new(0.2, 1.0).unwrap(), &cfg).unwrap();
        let projections = sample_projections(&arch, 2, 2, 11).unwrap();
        let risks = trainer.cover_margin_risks(&data, &projections, 0.1).unwrap();
        assert_eq!(risks.len(), trainer.cover.len());
        for (idx, risk) in risks.iter().enumerate().step_by(7) {
            let factors = trainer.cover.member(idx).into_iter().map(<[f64]>::to_vec).collect();
            let net = NeuralNet::new(arch, 2, 2, 11, factors).unwrap();
            let scores: Vec<f64> = (0..30).map(|i| data.label(i) * net.forward(data.row(i)).unwrap()).collect();
            assert_eq!(*risk, margin_risk(&scores, 0.1).unwrap(), "member {idx}");
        }
    }

    #[test]
    fn utility_on_xor_within_mechanism_slack() {
        // Oracle: exhaustive evaluation of every cover member.
        let data = xor_data(64, 4);
        let arch = Architecture::new(2, 2, 4.0).unwrap();
        let (eps, beta) = (2.0, 0.1);
        let trainer = NnTrainer::new(64, 2, 1.0, arch, PrivacyParams::pure(eps).unwrap(), MarginParams::new(0.2, 1.0).unwrap(), &tiny_cfg()).unwrap();
        let slack = 2.0 / (eps * 64.0) * (trainer.cover.len() as f64 / beta).ln();
        let good = (0..50)
            .filter(|&seed| {
                let fit = trainer.fit(&data, seed).unwrap();
                let best = fit.cover_risks.iter().cloned().fold(f64::INFINITY, f64::min);
                fit.cover_risks[fit.provenance.selected] <= best + slack
            })
            .count();
        assert!(good >= 45, "{good}/50");
    }

    #[test]
    fn oversized_architecture_is_refused() {
        let arch = Architecture::new(3, 8, 1.0).unwrap();
        let err = NnTrainer::new(10, 4, 1.0, arch, PrivacyParams::pure(1.0).unwrap(), MarginParams::new(0.1, 1.0).unwrap(), &NnConfig::default()).unwrap_err();
        assert!(err.to_string().contains("architecture too large for cover enumeration"));
        assert_eq!(err.exit_code(), 3);
        let approx = PrivacyParams::new(1.0, 1e-6).unwrap();
        assert!(NnTrainer::new(10, 2, 1.0, Architecture::new(1, 1, 1.0).unwrap(), approx, MarginParams::new(0.1, 1.0).unwrap(), &tiny_cfg()).is_err());
    }

    #[test]
    fn default_dimensions() {
        let arch = Architecture::new(2, 3, 1.0).unwrap();
        let margin = MarginParams::new(0.5, 0.5).unwrap();
        let (k, gamma) = nn_dims(&arch, 1.0, &margin, &NnConfig::default());
        assert_eq!(k, 4);
        assert!((gamma - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn serialization_round_trip() {
        let data = xor_data(64, 5);
        let arch = Architecture::new(2, 2, 4.0).unwrap();
        let fit = train_nn_pure_dp(&data, arch, PrivacyParams::pure(1.0).unwrap(), MarginParams::new(0.2, 1.0).unwrap(), 9, &tiny_cfg()).unwrap();
        let (back, prov) = NeuralNet::from_text(&fit.net.to_text(&fit.provenance)).unwrap();
        assert_eq!(prov, fit.provenance);
        for x in data.rows() {
            assert_eq!(back.forward(x).unwrap().to_bits(), fit.net.forward(x).unwrap().to_bits());
        }
    }

    fn random_dense(arch: Architecture, d: usize, lambda: f64, seed: u64) -> DenseNet {
        let mut r = rng::seeded(seed);
        let weights = (0..arch.layers)
            .map(|j| {
                let rows = if j == 0 { d } else { arch.width };
                let cols = if j + 1 == arch.layers { 1 } else { arch.width };
                uniform_in_ball(rows * cols, lambda, &mut r)
            })
            .collect();
        DenseNet { arch, input_dim: d, weights }
    }

    #[test]
    fn compression_error_shrinks_with_k() {
        // Sup-gap between a random network and its sketched version on the sample,
        // against r (2ηΛ)^L sqrt(ln(Lm/β)/k) with constant 1.
        let (d, m, beta, lambda) = (200, 50, 0.1, 1.0);
        let arch = Architecture::new(2, 4, 1.0).unwrap();
        let mut r = rng::seeded(6);
        let xs: Vec<Vec<f64>> = (0..m).map(|_| uniform_in_ball(d, 1.0, &mut r)).collect();
        for &k in &[50, 200, 800] {
            let bound = (2.0 * arch.eta * lambda).powi(2) * ((2.0 * m as f64 / beta).ln() / k as f64).sqrt();
            let ok = (0..100u64)
                .filter(|&s| {
                    let dense = random_dense(arch, d, lambda, s);
                    let net = dense.compress(k, 1000 + s).unwrap();
                    xs.iter().map(|x| (dense.forward(x) - net.forward(x).unwrap()).abs()).fold(0.0, f64::max) <= bound
                })
                .count();
            assert!(ok >= 85, "k={k}: {ok}/100");
        }
    }

    #[test]
    fn nearest_member_keeps_half_margin_points() {
        // Perturbing each factor by at most γ/√L keeps every output within ρ/2,
        // so the rounded network errs only where the original had margin below ρ/2.
        let arch = Architecture::new(2, 2, 1.0).unwrap();
        let margin = MarginParams::new(0.5, 0.25).unwrap();
        let (k, gamma) = nn_dims(&arch, 1.0, &margin, &NnConfig { k_override: Some(2), ..NnConfig::default() });
        let per_factor = gamma / 2f64.sqrt();
        let shapes = product_shapes(2, k, 2);
        let covers: Vec<_> = shapes
            .iter()
            .map(|(rr, c)| ball_cover(rr * c, 2.0 * margin.lambda, per_factor, Construction::AxisGrid, 10_000_000).unwrap())
            .collect();
        let mut r = rng::seeded(8);
        for trial in 0..20u64 {
            let factors: Vec<Vec<f64>> = shapes.iter().map(|(rr, c)| uniform_in_ball(rr * c, 2.0 * margin.lambda, &mut r)).collect();
            let net = NeuralNet::new(arch, 3, k, trial, factors.clone()).unwrap();
            let rounded: Vec<Vec<f64>> = covers.iter().zip(&factors).map(|(cv, f)| cv.point(cv.nearest(f)).to_vec()).collect();
            assert!(covers.iter().zip(&factors).zip(&rounded).all(|((cv, f), g)| norm(&f.iter().zip(g).map(|(a, b)| a - b).collect::<Vec<_>>()) <= cv.gamma + 1e-12));
            let near = NeuralNet::new(arch, 3, k, trial, rounded).unwrap();
            let xs: Vec<Vec<f64>> = (0..200).map(|_| uniform_in_ball(3, 1.0, &mut r)).collect();
            let ys: Vec<f64> = (0..200).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let orig: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y * net.forward(x).unwrap()).collect();
            let new: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y * near.forward(x).unwrap()).collect();
            assert!(orig.iter().zip(&new).all(|(a, b)| (a - b).abs() < margin.rho / 2.0));
            assert!(zero_one_risk(&new).unwrap() <= margin_risk(&orig, margin.rho / 2.0).unwrap());
        }
    }
}
