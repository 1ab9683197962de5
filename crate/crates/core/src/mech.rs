//! Exponential mechanism, generalized exponential mechanism and Gaussian noise calibration.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::DpRng;

/// An `(epsilon, delta)` privacy budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::param(format!("delta must be in [0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    pub fn require_pure(&self) -> Result<()> {
        if self.delta != 0.0 {
            return Err(Error::param(format!("this learner is pure DP and needs delta = 0, got {}", self.delta)));
        }
        Ok(())
    }

    /// Preconditions of the sketched DP-ERM learners: `0 < delta < 1/m`, `epsilon <= ln(1/delta)`.
    pub fn require_approx(&self, m: usize) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0 / m as f64) {
            return Err(Error::param(format!("delta must lie in (0, 1/m) = (0, {}), got {}", 1.0 / m as f64, self.delta)));
        }
        if self.epsilon > (1.0 / self.delta).ln() {
            return Err(Error::param(format!(
                "epsilon {} exceeds ln(1/delta) = {}",
                self.epsilon,
                (1.0 / self.delta).ln()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sensitivity {
    Uniform(f64),
    PerCandidate(Vec<f64>),
}

/// Candidate scores (higher is better) with their sensitivities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    pub scores: Vec<f64>,
    pub sensitivity: Sensitivity,
}

impl ScoredCandidates {
    pub fn uniform(scores: Vec<f64>, sensitivity: f64) -> Self {
        Self { scores, sensitivity: Sensitivity::Uniform(sensitivity) }
    }

    pub fn per_candidate(scores: Vec<f64>, sensitivities: Vec<f64>) -> Self {
        Self { scores, sensitivity: Sensitivity::PerCandidate(sensitivities) }
    }

    fn validate(&self) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::param("need at least one candidate"));
        }
        if let Some(i) = self.scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::param(format!("score of candidate {i} is not finite")));
        }
        let ok = |d: f64| d > 0.0 && d.is_finite();
        match &self.sensitivity {
            Sensitivity::Uniform(d) if !ok(*d) => Err(Error::param(format!("sensitivity must be positive, got {d}"))),
            Sensitivity::PerCandidate(ds) if ds.len() != self.scores.len() => {
                Err(Error::param("one sensitivity per candidate is required"))
            }
            Sensitivity::PerCandidate(ds) => match ds.iter().position(|&d| !ok(d)) {
                Some(i) => Err(Error::param(format!("sensitivity of candidate {i} must be positive, got {}", ds[i]))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

fn gumbel(rng: &mut DpRng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return -(-u.ln()).ln();
        }
    }
}

/// Draws `argmax_i (logw_i + G_i)` with i.i.d. standard Gumbel `G_i`; lowest index wins ties.
/// Consumes exactly one uniform per candidate (plus rare rejections of 0).
pub fn gumbel_argmax(log_weights: &[f64], rng: &mut DpRng) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &lw) in log_weights.iter().enumerate() {
        let v = lw + gumbel(rng);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

fn em_log_weights(scores: &[f64], sensitivity: f64, eps: f64) -> Vec<f64> {
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().map(|s| eps * (s - top) / (2.0 * sensitivity)).collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && !eps.is_nan() {
        Ok(())
    } else {
        Err(Error::param(format!("epsilon must be positive, got {eps}")))
    }
}

/// Selects `i` with probability proportional to `exp(eps * score_i / (2 * sensitivity))`.
pub fn exponential_mechanism(cands: &ScoredCandidates, eps: f64, rng: &mut DpRng) -> Result<usize> {
    cands.validate()?;
    check_eps(eps)?;
    let Sensitivity::Uniform(delta) = cands.sensitivity else {
        return Err(Error::param("exponential mechanism needs a uniform sensitivity"));
    };
    Ok(gumbel_argmax(&em_log_weights(&cands.scores, delta, eps), rng))
}

/// Exact selection probabilities of [`exponential_mechanism`].
pub fn exponential_probabilities(scores: &[f64], sensitivity: f64, eps: f64) -> Result<Vec<f64>> {
    ScoredCandidates::uniform(scores.to_vec(), sensitivity).validate()?;
    check_eps(eps)?;
    Ok(softmax(&em_log_weights(scores, sensitivity, eps)))
}

fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let top = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Log-weights of the generalized exponential mechanism (Raskhodnikova and Smith, Algorithm 1).
///
/// With errors `q_i = -score_i` and `t = 2 ln(n/beta)/eps`, candidate `i` has normalized score
/// `s_i = max_j ((q_i + tΔ_i) - (q_j + tΔ_j)) / (Δ_i + Δ_j)` and weight `exp(-eps * s_i / 4)`.
pub fn generalized_log_weights(scores: &[f64], sensitivities: &[f64], eps: f64, beta: f64) -> Vec<f64> {
    let n = scores.len();
    let t = 2.0 * (n as f64 / beta).ln() / eps;
    let shifted: Vec<f64> = scores.iter().zip(sensitivities).map(|(s, d)| -s + t * d).collect();
    (0..n)
        .map(|i| {
            let s_i = (0..n)
                .map(|j| (shifted[i] - shifted[j]) / (sensitivities[i] + sensitivities[j]))
                .fold(f64::NEG_INFINITY, f64::max);
            -eps * s_i / 4.0
        })
        .collect()
}

/// Exact selection probabilities of [`generalized_exponential_mechanism`].
pub fn generalized_probabilities(cands: &ScoredCandidates, eps: f64, beta: f64) -> Result<Vec<f64>> {
    cands.validate()?;
    check_eps(eps)?;
    check_beta(beta)?;
    Ok(match &cands.sensitivity {
        Sensitivity::Uniform(d) => softmax(&em_log_weights(&cands.scores, *d, eps)),
        Sensitivity::PerCandidate(ds) => match uniform_value(ds) {
            Some(d) => softmax(&em_log_weights(&cands.scores, d, eps)),
            None => softmax(&generalized_log_weights(&cands.scores, ds, eps, beta)),
        },
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("beta must be in (0, 1), got {beta}")))
    }
}

fn uniform_value(ds: &[f64]) -> Option<f64> {
    ds.iter().all(|&d| d == ds[0]).then_some(ds[0])
}

/// Selection with per-candidate sensitivities. When all sensitivities are equal
/// this is exactly [`exponential_mechanism`] on the same rng stream.
pub fn generalized_exponential_mechanism(cands: &ScoredCandidates, eps: f64, beta: f64, rng: &mut DpRng) -> Result<usize> {
    cands.validate()?;
    check_eps(eps)?;
    check_beta(beta)?;
    let ds = match &cands.sensitivity {
        Sensitivity::Uniform(d) => return Ok(gumbel_argmax(&em_log_weights(&cands.scores, *d, eps), rng)),
        Sensitivity::PerCandidate(ds) => ds,
    };
    if let Some(d) = uniform_value(ds) {
        return Ok(gumbel_argmax(&em_log_weights(&cands.scores, d, eps), rng));
    }
    Ok(gumbel_argmax(&generalized_log_weights(&cands.scores, ds, eps, beta), rng))
}

/// Per-step noise scale for `compositions` adaptive Gaussian steps with total budget `(eps, delta)`:
/// `sigma = l2 * sqrt(2 T ln(1.25 T / delta)) / eps`.
///
/// For `T = 1, eps <= 1` this is the classical Gaussian mechanism. Otherwise the value is
/// checked through zero-concentrated DP (`rho = T l2² / (2 sigma²)`, converted to
/// `rho + 2 sqrt(rho ln(1/delta))`) and raised to the exact zCDP requirement if it falls short.
pub fn gaussian_sigma(eps: f64, delta: f64, l2_sensitivity: f64, compositions: usize) -> Result<f64> {
    check_eps(eps)?;
    if !eps.is_finite() {
        return Err(Error::param("epsilon must be finite"));
    }
    if delta == 0.0 {
        return Err(Error::param("the Gaussian mechanism needs delta > 0"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta must be in (0, 1), got {delta}")));
    }
    if !(l2_sensitivity >= 0.0 && l2_sensitivity.is_finite()) {
        return Err(Error::param("l2 sensitivity must be finite and nonnegative"));
    }
    if compositions == 0 {
        return Err(Error::param("compositions must be at least 1"));
    }
    let t = compositions as f64;
    let sigma = l2_sensitivity * (2.0 * t * (1.25 * t / delta).ln()).sqrt() / eps;
    if (compositions == 1 && eps <= 1.0) || l2_sensitivity == 0.0 {
        return Ok(sigma);
    }
    let log_inv_delta = (1.0 / delta).ln();
    let rho = t * l2_sensitivity * l2_sensitivity / (2.0 * sigma * sigma);
    if rho + 2.0 * (rho * log_inv_delta).sqrt() <= eps {
        return Ok(sigma);
    }
    let rho_needed = ((log_inv_delta + eps).sqrt() - log_inv_delta.sqrt()).powi(2);
    Ok(l2_sensitivity * (t / (2.0 * rho_needed)).sqrt())
}
