//! Private kernel classification through random Fourier features.
//!
//! The feature map is `ψ̂(x) = (r/√D)(cos⟨ω₁,x⟩, sin⟨ω₁,x⟩, …, cos⟨ω_D,x⟩, sin⟨ω_D,x⟩)`,
//! so `‖ψ̂(x)‖ = r` for every `x`; the linear learner then runs on the mapped sample.

use std::fmt::Write as _;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::{dot, Dataset, FeatureRows};
use crate::error::{Error, Result};
use crate::linear::{fmt17, header_get, parse_header, parse_values, train_efficient, EfficientConfig, EfficientReport};
use crate::losses::MarginParams;
use crate::mech::PrivacyParams;
use crate::rng::{self, child_seed, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Gaussian,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelKind::Gaussian),
            other => Err(Error::KernelNotImplemented(format!("'{other}' (only 'gaussian' ships)"))),
        }
    }
}

/// A shift-invariant kernel with `K(x, x) = r²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: f64,
    pub r: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64, r: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::param(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param(format!("kernel scale r must be positive, got {r}")));
        }
        Ok(Self { kind: KernelKind::Gaussian, bandwidth, r })
    }

    /// `K(x, x') = r² exp(-‖x - x'‖² / (2 σ²))`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.r * self.r * (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

/// Random Fourier feature map with `D` frequencies in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RffMap {
    pub spec: KernelSpec,
    pub input_dim: usize,
    pub num_features: usize,
    pub seed: u64,
    frequencies: Vec<f64>,
}

impl RffMap {
    /// Frequencies drawn from the spectral density of the kernel (for the Gaussian kernel,
    /// i.i.d. normal coordinates with standard deviation `1/σ`).
    pub fn sample(spec: KernelSpec, num_features: usize, input_dim: usize, seed: u64) -> Result<Self> {
        if num_features == 0 || input_dim == 0 {
            return Err(Error::param("feature count and input dimension must be at least 1"));
        }
        let mut r = rng::stream(seed, tag::FEATURES);
        let normal = Normal::new(0.0, 1.0 / spec.bandwidth).map_err(|e| Error::param(e.to_string()))?;
        let frequencies = (0..num_features * input_dim).map(|_| normal.sample(&mut r)).collect();
        Ok(Self { spec, input_dim, num_features, seed, frequencies })
    }

    /// Map with explicit row-major `D x d` frequencies.
    pub fn from_frequencies(spec: KernelSpec, input_dim: usize, frequencies: Vec<f64>) -> Result<Self> {
        if input_dim == 0 || frequencies.is_empty() || frequencies.len() % input_dim != 0 {
            return Err(Error::param("frequency matrix shape does not match the input dimension"));
        }
        Ok(Self { spec, input_dim, num_features: frequencies.len() / input_dim, seed: 0, frequencies })
    }

    pub fn output_dim(&self) -> usize {
        2 * self.num_features
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::param(format!("input has length {}, map expects {}", x.len(), self.input_dim)));
        }
        let mut out = vec![0.0; self.output_dim()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let scale = self.spec.r / (self.num_features as f64).sqrt();
        for (pair, omega) in out.chunks_exact_mut(2).zip(self.frequencies.chunks_exact(self.input_dim)) {
            let (s, c) = dot(omega, x).sin_cos();
            pair[0] = scale * c;
            pair[1] = scale * s;
        }
    }
}

/// A dataset viewed through a feature map, computed row by row on demand.
pub struct MappedRows<'a> {
    pub data: &'a Dataset,
    pub map: &'a RffMap,
}

impl FeatureRows for MappedRows<'_> {
    fn len(&self) -> usize {
        self.data.len()
    }
    fn dim(&self) -> usize {
        self.map.output_dim()
    }
    fn radius(&self) -> f64 {
        self.map.spec.r
    }
    fn label_sign(&self, i: usize) -> i8 {
        self.data.labels()[i]
    }
    fn row_into(&self, i: usize, out: &mut [f64]) {
        self.map.apply_into(self.data.row(i), out);
    }
}

/// `h(x) = <w, ψ̂(x)>`: a finite-dimensional predictor, not an RKHS element.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPredictor {
    pub map: RffMap,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub rho: f64,
    pub lambda: f64,
    pub k: usize,
}

const KERNEL_MAGIC: &str = "dpm-kernel v1";

impl KernelPredictor {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.weights, &self.map.apply(x)?))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{KERNEL_MAGIC} kernel=gaussian bandwidth={} r={} d={} D={} feature_seed={} seed={} k={} eps={} delta={} rho={} lambda={}\n",
            fmt17(self.map.spec.bandwidth),
            fmt17(self.map.spec.r),
            self.map.input_dim,
            self.map.num_features,
            self.map.seed,
            self.seed,
            self.k,
            fmt17(self.epsilon),
            fmt17(self.delta),
            fmt17(self.rho),
            fmt17(self.lambda),
        );
        for w in &self.weights {
            let _ = writeln!(s, "{}", fmt17(*w));
        }
        s
    }

    /// Parses a predictor and regenerates its frequencies from the stored seed.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = parse_header(lines.next().unwrap_or(""), KERNEL_MAGIC)?;
        let kind: KernelKind = head
            .get("kernel")
            .ok_or_else(|| Error::Parse { line: 1, msg: "header is missing 'kernel'".into() })?
            .parse()?;
        let spec = KernelSpec { kind, bandwidth: header_get(&head, "bandwidth")?, r: header_get(&head, "r")? };
        let num_features: usize = header_get(&head, "D")?;
        let map = RffMap::sample(spec, num_features, header_get(&head, "d")?, header_get(&head, "feature_seed")?)?;
        let weights = parse_values(lines, 2, 2 * num_features)?;
        Ok(Self {
            map,
            weights,
            seed: header_get(&head, "seed")?,
            epsilon: header_get(&head, "eps")?,
            delta: header_get(&head, "delta")?,
            rho: header_get(&head, "rho")?,
            lambda: header_get(&head, "lambda")?,
            k: header_get(&head, "k")?,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KernelConfig {
    /// Upper limit on the number of frequencies.
    pub d_cap: usize,
    /// Skip the formula and use this many frequencies.
    pub d_override: Option<usize>,
    pub efficient: EfficientConfig,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { d_cap: 200_000, d_override: None, efficient: EfficientConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct KernelReport {
    /// `m² ln(2m/β)` before capping.
    pub d_formula: f64,
    pub num_features: usize,
    pub cap_binds: bool,
    pub linear: EfficientReport,
}

/// Number of frequencies `m² ln(2m/β)`.
pub fn rff_count(m: usize, beta: f64) -> f64 {
    let m = m as f64;
    m * m * (2.0 * m / beta).ln()
}

/// (epsilon, delta)-DP kernel learner: map through `ψ̂`, then run the efficient linear learner
/// with norm bound `2Λ` and confidence `β/2`.
pub fn train_kernel_dp(data: &Dataset, spec: KernelSpec, privacy: PrivacyParams, margin: MarginParams, beta: f64, seed: u64, cfg: &KernelConfig) -> Result<(KernelPredictor, KernelReport)> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param(format!("beta must be in (0, 1), got {beta}")));
    }
    let d_formula = rff_count(data.len(), beta);
    let num_features = cfg.d_override.unwrap_or_else(|| (d_formula.ceil() as usize).clamp(1, cfg.d_cap.max(1)));
    let cap_binds = cfg.d_override.is_none() && d_formula.ceil() > cfg.d_cap as f64;
    let map = RffMap::sample(spec, num_features, data.dim(), child_seed(seed, tag::FEATURES))?;
    let rows = MappedRows { data, map: &map };
    let lifted = MarginParams::new(margin.rho, 2.0 * margin.lambda)?;
    let (model, linear) = train_efficient(&rows, privacy, lifted, beta / 2.0, child_seed(seed, tag::TRAIN), &cfg.efficient)?;
    let predictor = KernelPredictor {
        map,
        weights: model.weights,
        seed,
        epsilon: privacy.epsilon,
        delta: privacy.delta,
        rho: margin.rho,
        lambda: margin.lambda,
        k: linear.k,
    };
    Ok((predictor, KernelReport { d_formula, num_features, cap_binds, linear }))
}

/// Largest off-diagonal gap `|<ψ̂(x_i), ψ̂(x_j)> - K(x_i, x_j)|` over a set of points.
pub fn max_kernel_error(map: &RffMap, points: &[f64]) -> f64 {
    let d = map.input_dim;
    let feats: Vec<Vec<f64>> = points.par_chunks(d).map(|x| map.apply(x).expect("shape")).collect();
    let n = feats.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (dot(&feats[i], &feats[j]) - map.spec.eval(&points[i * d..(i + 1) * d], &points[j * d..(j + 1) * d])).abs())
                .fold(0.0, f64::max)
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max)
}
