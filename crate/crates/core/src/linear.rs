//! Private linear classifiers.
//!
//! * [`train_pure_dp`]: JL sketch, finite cover of the sketched ball, exponential mechanism.
//! * [`dp_erm_gll`]: approximate-DP hinge ERM with resampling and confidence boosting.
//! * [`train_efficient`]: fast JL sketch followed by [`dp_erm_gll`].
//!
//! All three return weights in the original input space (`Φᵀw̃`), whose norm is not constrained.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::cover::{ball_cover, BallCover, Construction, DEFAULT_COVER_CAP};
use crate::data::{dot, norm, Dataset, FeatureRows};
use crate::erm::{self, GdParams};
use crate::error::{Error, Result};
use crate::losses::{hinge_risk, zero_one_risk, MarginParams};
use crate::mech::{exponential_mechanism, gaussian_sigma, PrivacyParams, ScoredCandidates};
use crate::rng::{self, child_seed, tag};
use crate::sketch::{Projection, ProjectionKind};

// ===========================================================================
// Model and serialization
// ===========================================================================

/// Everything needed to trace a model back to its training call.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub algorithm: String,
    /// `None` when the weights were chosen directly in the input space.
    pub projection: Option<ProjectionKind>,
    pub projection_seed: u64,
    pub k: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub rho: f64,
    pub lambda: f64,
    /// Index chosen by the final selection step.
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub provenance: Provenance,
}

pub(crate) const LINEAR_MAGIC: &str = "dpm-linear v1";

/// 17 significant digits; parses back to the identical `f64`.
pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn parse_header(line: &str, magic: &str) -> Result<std::collections::BTreeMap<String, String>> {
    let rest = line
        .strip_prefix(magic)
        .ok_or_else(|| Error::Parse { line: 1, msg: format!("expected header starting with '{magic}'") })?;
    let mut map = std::collections::BTreeMap::new();
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("header token '{tok}' is not key=value") })?;
        map.insert(k.to_string(), v.to_string());
    }
    Ok(map)
}

pub(crate) fn header_get<T: std::str::FromStr>(map: &std::collections::BTreeMap<String, String>, key: &str) -> Result<T> {
    map.get(key)
        .ok_or_else(|| Error::Parse { line: 1, msg: format!("header is missing '{key}'") })?
        .parse()
        .map_err(|_| Error::Parse { line: 1, msg: format!("header value for '{key}' is malformed") })
}

pub(crate) fn parse_values(lines: std::str::Lines<'_>, first_line: usize, expected: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(expected);
    for (i, l) in lines.enumerate() {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let v: f64 = l
            .parse()
            .map_err(|_| Error::Parse { line: first_line + i, msg: format!("'{l}' is not a number") })?;
        out.push(v);
    }
    if out.len() != expected {
        return Err(Error::Parse {
            line: first_line,
            msg: format!("expected {expected} values, found {}", out.len()),
        });
    }
    Ok(out)
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Raw score `<w, x>`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x)
    }

    pub fn to_text(&self) -> String {
        let p = &self.provenance;
        let mut s = format!(
            "{LINEAR_MAGIC} algorithm={} d={} k={} seed={} eps={} delta={} rho={} lambda={} projection={} projection_seed={} selected={}\n",
            p.algorithm,
            self.weights.len(),
            p.k,
            p.seed,
            fmt17(p.epsilon),
            fmt17(p.delta),
            fmt17(p.rho),
            fmt17(p.lambda),
            p.projection.map_or("none", ProjectionKind::name),
            p.projection_seed,
            p.selected
        );
        for w in &self.weights {
            let _ = writeln!(s, "{}", fmt17(*w));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = parse_header(lines.next().unwrap_or(""), LINEAR_MAGIC)?;
        let d: usize = header_get(&head, "d")?;
        let provenance = Provenance {
            algorithm: header_get(&head, "algorithm")?,
            projection: match head.get("projection").map(String::as_str) {
                Some("none") => None,
                _ => Some(header_get(&head, "projection")?),
            },
            projection_seed: header_get(&head, "projection_seed")?,
            k: header_get(&head, "k")?,
            seed: header_get(&head, "seed")?,
            epsilon: header_get(&head, "eps")?,
            delta: header_get(&head, "delta")?,
            rho: header_get(&head, "rho")?,
            lambda: header_get(&head, "lambda")?,
            selected: header_get(&head, "selected")?,
        };
        let weights = parse_values(lines, 2, d)?;
        Ok(Self { weights, provenance })
    }
}

// ===========================================================================
// Pure DP: sketch + cover + exponential mechanism
// ===========================================================================

#[derive(Debug, Clone, Copy)]
pub struct PureDpConfig {
    /// Constant in the sketch dimension `k = ceil(C Λ² r² ln(m/β) / ρ²)`.
    pub k_constant: f64,
    /// Skip the formula and use this sketch dimension.
    pub k_override: Option<usize>,
    pub cover_cap: usize,
}

impl Default for PureDpConfig {
    fn default() -> Self {
        Self { k_constant: 8.0, k_override: None, cover_cap: DEFAULT_COVER_CAP }
    }
}

/// Sketch dimension of the pure-DP learner.
pub fn pure_dp_dim(m: usize, r: f64, marg: &MarginParams, beta: f64, c: f64) -> usize {
    let lr = marg.lambda * r;
    ((c * lr * lr * (m as f64 / beta).ln() / (marg.rho * marg.rho)).ceil() as usize).max(1)
}

/// The data-independent parts of the pure-DP learner (sketch size and cover), reusable across datasets
/// that share `m`, `d` and radius.
#[derive(Debug, Clone)]
pub struct PureDpLearner {
    pub privacy: PrivacyParams,
    pub margin: MarginParams,
    pub beta: f64,
    pub m: usize,
    pub d: usize,
    pub radius: f64,
    pub k: usize,
    pub cover: BallCover,
}

/// Output of one pure-DP fit, with the intermediate quantities used by tests and reports.
#[derive(Debug, Clone)]
pub struct PureDpFit {
    pub model: LinearModel,
    pub reduced: Vec<f64>,
    pub projection: Projection,
    /// Empirical error on the sketched sample of every cover point.
    pub cover_risks: Vec<f64>,
}

impl PureDpLearner {
    pub fn new(m: usize, d: usize, radius: f64, privacy: PrivacyParams, margin: MarginParams, beta: f64, cfg: &PureDpConfig) -> Result<Self> {
        privacy.require_pure()?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::param(format!("beta must be in (0, 1), got {beta}")));
        }
        if !(radius > 0.0) {
            return Err(Error::param("data radius must be positive"));
        }
        if margin.rho > margin.lambda * radius {
            return Err(Error::param(format!(
                "rho = {} exceeds lambda * r = {}",
                margin.rho,
                margin.lambda * radius
            )));
        }
        let k = cfg.k_override.unwrap_or_else(|| pure_dp_dim(m, radius, &margin, beta, cfg.k_constant));
        let gamma = margin.rho / (10.0 * radius);
        let cover = ball_cover(k, 2.0 * margin.lambda, gamma, Construction::AxisGrid, cfg.cover_cap).map_err(|e| match e {
            Error::CoverTooLarge { estimated, cap } => {
                log::warn!("pure-DP cover in k={k} is too large; use a larger rho or a smaller lambda*r/rho");
                Error::CoverTooLarge { estimated, cap }
            }
            other => other,
        })?;
        Ok(Self { privacy, margin, beta, m, d, radius, k, cover })
    }

    pub fn fit(&self, data: &Dataset, seed: u64) -> Result<PureDpFit> {
        if data.len() != self.m || data.dim() != self.d {
            return Err(Error::param("dataset shape does not match the prepared learner"));
        }
        if data.radius() > self.radius * (1.0 + 1e-9) {
            return Err(Error::param("dataset radius exceeds the prepared learner's radius"));
        }
        let projection_seed = child_seed(seed, tag::PROJECTION);
        let projection = Projection::sample(ProjectionKind::DenseRademacher, self.d, self.k, projection_seed)?;
        let sketched = projection.apply_rows(data.features())?;
        let labels: Vec<f64> = (0..data.len()).map(|i| data.label(i)).collect();
        let k = self.k;
        let m = data.len();
        let cover_risks: Vec<f64> = (0..self.cover.len())
            .into_par_iter()
            .map(|c| {
                let w = self.cover.point(c);
                let errors = sketched
                    .chunks_exact(k)
                    .zip(&labels)
                    .filter(|(x, y)| *y * dot(w, x) <= 0.0)
                    .count();
                errors as f64 / m as f64
            })
            .collect();
        let scores: Vec<f64> = cover_risks.iter().map(|r| -r).collect();
        let mut mech_rng = rng::stream(child_seed(seed, tag::MECHANISM), 0);
        let selected = exponential_mechanism(&ScoredCandidates::uniform(scores, 1.0 / m as f64), self.privacy.epsilon, &mut mech_rng)?;
        let reduced = self.cover.point(selected).to_vec();
        let weights = projection.apply_transpose(&reduced)?;
        let model = LinearModel {
            weights,
            provenance: Provenance {
                algorithm: "pure-linear".into(),
                projection: Some(ProjectionKind::DenseRademacher),
                projection_seed,
                k,
                seed,
                epsilon: self.privacy.epsilon,
                delta: 0.0,
                rho: self.margin.rho,
                lambda: self.margin.lambda,
                selected,
            },
        };
        Ok(PureDpFit { model, reduced, projection, cover_risks })
    }
}

/// Pure epsilon-DP linear learner.
pub fn train_pure_dp(data: &Dataset, privacy: PrivacyParams, margin: MarginParams, beta: f64, seed: u64, cfg: &PureDpConfig) -> Result<LinearModel> {
    let learner = PureDpLearner::new(data.len(), data.dim(), data.radius(), privacy, margin, beta, cfg)?;
    Ok(learner.fit(data, seed)?.model)
}

// ===========================================================================
// DP-ERM for generalized linear losses
// ===========================================================================

/// Hyperparameters of the inner noisy gradient solver.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub steps: usize,
    /// Multiplier on the default step size `2Λ / sqrt(T (G² + k σ²))`.
    pub step_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { steps: 64, step_scale: 1.0 }
    }
}

/// Fully resolved parameters of one DP-ERM call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpErmConfig {
    pub rounds: usize,
    pub inner_epsilon: f64,
    pub inner_delta: f64,
    pub steps: usize,
    pub step_size: f64,
    pub smoothing: f64,
    /// Radius of the parameter ball.
    pub radius: f64,
    /// Declared bound on feature norms.
    pub feature_radius: f64,
    pub rho: f64,
    /// Per-coordinate Gaussian noise added to each averaged gradient.
    pub sigma: f64,
    /// Sensitivity of the hinge-risk score used by the final selection.
    pub selection_sensitivity: f64,
}

impl DpErmConfig {
    pub fn derive(m: usize, k: usize, feature_radius: f64, privacy: PrivacyParams, margin: MarginParams, beta: f64, solver: &SolverConfig) -> Result<Self> {
        privacy.require_approx(m)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::param(format!("beta must be in (0, 1), got {beta}")));
        }
        if solver.steps == 0 {
            return Err(Error::param("solver needs at least one step"));
        }
        let (eps, delta) = (privacy.epsilon, privacy.delta);
        let rounds = ((2.0 / beta).ln().ceil() as usize).max(1);
        let mf = rounds as f64;
        let denom = 4.0 * mf * (2.0 * mf / delta).ln();
        let inner_epsilon = eps / denom;
        let inner_delta = delta * delta / denom;
        let mf_m = m as f64;
        let g = feature_radius / margin.rho;
        let sigma = gaussian_sigma(inner_epsilon, inner_delta, 2.0 * g / mf_m, solver.steps)?;
        let t = solver.steps as f64;
        let step_size = solver.step_scale * 2.0 * margin.lambda / (t * (g * g + k as f64 * sigma * sigma)).sqrt().max(1e-300);
        let ratio = margin.lambda * feature_radius / margin.rho;
        Ok(Self {
            rounds,
            inner_epsilon,
            inner_delta,
            steps: solver.steps,
            step_size,
            smoothing: margin.rho / mf_m.sqrt(),
            radius: margin.lambda,
            feature_radius,
            rho: margin.rho,
            sigma,
            selection_sensitivity: (2.0 * ratio).min(1.0 + ratio) / mf_m,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DpErmOutput {
    pub weights: Vec<f64>,
    pub config: DpErmConfig,
    /// Hinge risk on the full sample of each boosting candidate.
    pub candidate_risks: Vec<f64>,
    pub selected: usize,
    pub gradient_evaluations: u64,
}

/// (epsilon, delta)-DP minimization of the rho-hinge over the ball of radius `margin.lambda`.
///
/// Each of `M = ceil(ln(2/β))` rounds resamples `m` rows with replacement and runs the noisy
/// solver at `(ε', δ')`; one candidate is then chosen by the exponential mechanism with budget
/// `ε/2` on the full-sample hinge risk. Rows must lie in the ball of radius `data.radius()`.
pub fn dp_erm_gll(data: &Dataset, privacy: PrivacyParams, margin: MarginParams, beta: f64, seed: u64, solver: &SolverConfig) -> Result<DpErmOutput> {
    let m = data.len();
    let config = DpErmConfig::derive(m, data.dim(), data.radius(), privacy, margin, beta, solver)?;
    let params = GdParams {
        rho: config.rho,
        radius: config.radius,
        smoothing: config.smoothing,
        steps: config.steps,
        step_size: config.step_size,
        sigma: config.sigma,
    };
    let candidates: Vec<Vec<f64>> = (0..config.rounds)
        .into_par_iter()
        .map(|t| {
            let round_seed = child_seed(seed, 1000 + t as u64);
            let mut resample_rng = rng::stream(round_seed, tag::RESAMPLE);
            let idx: Vec<usize> = (0..m).map(|_| resample_rng.random_range(0..m)).collect();
            let mut noise_rng = rng::stream(round_seed, tag::NOISE);
            erm::noisy_smoothed_gd(data, &idx, &params, &mut noise_rng)
        })
        .collect();
    let candidate_risks: Vec<f64> = candidates.iter().map(|w| erm::hinge_value(data, w, config.rho)).collect();
    let scores: Vec<f64> = candidate_risks.iter().map(|r| -r).collect();
    let mut mech_rng = rng::stream(child_seed(seed, tag::SELECTION), 0);
    let selected = exponential_mechanism(
        &ScoredCandidates::uniform(scores, config.selection_sensitivity),
        privacy.epsilon / 2.0,
        &mut mech_rng,
    )?;
    Ok(DpErmOutput {
        weights: candidates[selected].clone(),
        config,
        candidate_risks,
        selected,
        gradient_evaluations: (config.rounds * config.steps * m) as u64,
    })
}

// ===========================================================================
// Efficient learner: fast JL + DP-ERM
// ===========================================================================

#[derive(Debug, Clone, Copy)]
pub struct EfficientConfig {
    pub k_cap: usize,
    pub solver: SolverConfig,
}

impl Default for EfficientConfig {
    fn default() -> Self {
        Self { k_cap: 4096, solver: SolverConfig::default() }
    }
}

/// Diagnostics of an efficient-learner run.
#[derive(Debug, Clone)]
pub struct EfficientReport {
    pub k_formula: f64,
    pub k: usize,
    pub cap_binds: bool,
    /// Sketched rows that fell outside `B(2r)` and were projected back.
    pub clipped_rows: usize,
    pub erm: DpErmOutput,
    pub runtime_secs: f64,
}

/// Sketch dimension `ε m ln(m/β) / (ln^{3/2}(1/δ) ln(1/β))` before capping.
pub fn efficient_dim(m: usize, privacy: &PrivacyParams, beta: f64) -> f64 {
    let m = m as f64;
    privacy.epsilon * m * (m / beta).ln() / ((1.0 / privacy.delta).ln().powf(1.5) * (1.0 / beta).ln())
}

/// (epsilon, delta)-DP linear learner running in near-linear time.
pub fn train_efficient<S: FeatureRows>(data: &S, privacy: PrivacyParams, margin: MarginParams, beta: f64, seed: u64, cfg: &EfficientConfig) -> Result<(LinearModel, EfficientReport)> {
    let start = std::time::Instant::now();
    let m = data.len();
    privacy.require_approx(m)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param(format!("beta must be in (0, 1), got {beta}")));
    }
    let k_formula = efficient_dim(m, &privacy, beta);
    let k = (k_formula.ceil() as usize).clamp(1, cfg.k_cap.max(1));
    let cap_binds = k_formula.ceil() > cfg.k_cap as f64;
    let projection_seed = child_seed(seed, tag::PROJECTION);
    let projection = Projection::sample(ProjectionKind::FastHadamard, data.dim(), k, projection_seed)?;
    let r2 = 2.0 * data.radius();
    let sketched: Vec<(Vec<f64>, bool)> = (0..m)
        .into_par_iter()
        .map_init(
            || vec![0.0; data.dim()],
            |buf, i| {
                data.row_into(i, buf);
                let mut z = projection.apply(buf).expect("dimension checked");
                let clipped = norm(&z) > r2;
                erm::project_ball(&mut z, r2);
                (z, clipped)
            },
        )
        .collect();
    let clipped_rows = sketched.iter().filter(|(_, c)| *c).count();
    let features: Vec<f64> = sketched.into_iter().flat_map(|(z, _)| z).collect();
    let labels: Vec<i8> = (0..m).map(|i| data.label_sign(i)).collect();
    let reduced_data = Dataset::new(features, k, labels, r2)?;
    let erm_margin = MarginParams::new(margin.rho, 2.0 * margin.lambda)?;
    let erm = dp_erm_gll(&reduced_data, privacy, erm_margin, beta, child_seed(seed, tag::TRAIN), &cfg.solver)?;
    let weights = projection.apply_transpose(&erm.weights)?;
    let model = LinearModel {
        weights,
        provenance: Provenance {
            algorithm: "eff-linear".into(),
            projection: Some(ProjectionKind::FastHadamard),
            projection_seed,
            k,
            seed,
            epsilon: privacy.epsilon,
            delta: privacy.delta,
            rho: margin.rho,
            lambda: margin.lambda,
            selected: erm.selected,
        },
    };
    let report = EfficientReport { k_formula, k, cap_binds, clipped_rows, erm, runtime_secs: start.elapsed().as_secs_f64() };
    Ok((model, report))
}

/// Zero-one and hinge risk of a linear model on a dataset.
pub fn evaluate(model: &LinearModel, data: &Dataset, rho: f64) -> Result<(f64, f64)> {
    let scores = data.linear_scores(&model.weights);
    Ok((zero_one_risk(&scores)?, hinge_risk(&scores, rho)?))
}
