//! Label-private learning: the exponential mechanism over an empirical sup-norm cover.
//!
//! The cover depends on the features only, so changing one label moves each candidate's
//! score by at most `1/m`. Changing a feature may change the cover itself; the guarantee
//! is only with respect to label changes.

use rayon::prelude::*;

use crate::cover::{empirical_linf_cover, HypothesisFamily, DEFAULT_COVER_CAP};
use crate::data::{dot, Dataset};
use crate::error::{Error, Result};
use crate::losses::margin_risk;
use crate::mech::{exponential_mechanism, ScoredCandidates};
use crate::rng::{self, child_seed, tag};

/// Constant in the label-DP bound.
pub const BOUND_C: f64 = 17.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelDpConfig {
    pub rho: f64,
    pub epsilon: f64,
    pub family: HypothesisFamily,
    /// Fat-shattering dimension of the family at scale `ρ/32`.
    pub fat_dim: f64,
    pub cover_cap: usize,
}

impl LabelDpConfig {
    pub fn new(rho: f64, epsilon: f64, family: HypothesisFamily, fat_dim: f64) -> Result<Self> {
        let cfg = Self { rho, epsilon, family, fat_dim, cover_cap: DEFAULT_COVER_CAP };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::param(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.fat_dim >= 1.0) {
            return Err(Error::param(format!("fat-shattering dimension must be at least 1, got {}", self.fat_dim)));
        }
        Ok(())
    }
}

/// `(32 Λ r / ρ)²`: the fat-shattering bound of norm-bounded linear functions at scale `ρ/32`.
pub fn linear_fat_dim(lambda: f64, r: f64, rho: f64) -> f64 {
    (32.0 * lambda * r / rho).powi(2).max(1.0)
}

/// The cover and its outputs on the features; labels are supplied per fit.
#[derive(Debug, Clone)]
pub struct LabelDpLearner {
    pub cfg: LabelDpConfig,
    pub dim: usize,
    pub cover: Vec<Vec<f64>>,
    features: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LabelDpFit {
    pub weights: Vec<f64>,
    pub selected: usize,
    /// Empirical `ρ/2`-margin risk of every cover member.
    pub cover_risks: Vec<f64>,
}

impl LabelDpLearner {
    /// Builds the `ρ/2` cover of the `ρ`-truncated family on the rows of `features`.
    pub fn new(features: &[f64], dim: usize, cfg: LabelDpConfig) -> Result<Self> {
        cfg.validate()?;
        let cover = empirical_linf_cover(&cfg.family, features, dim, cfg.rho, cfg.cover_cap)?;
        Ok(Self { cfg, dim, cover, features: features.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.cover.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cover.is_empty()
    }

    pub fn cover_risks(&self, labels: &[i8]) -> Result<Vec<f64>> {
        let half = self.cfg.rho / 2.0;
        let rows = self.features.len() / self.dim;
        if rows != labels.len() {
            return Err(Error::param(format!("{} labels for {} feature rows", labels.len(), rows)));
        }
        self.cover
            .par_iter()
            .map(|w| {
                let scores: Vec<f64> =
                    self.features.chunks_exact(self.dim).zip(labels).map(|(x, &y)| f64::from(y) * dot(w, x)).collect();
                margin_risk(&scores, half)
            })
            .collect()
    }

    pub fn fit(&self, labels: &[i8], seed: u64) -> Result<LabelDpFit> {
        let cover_risks = self.cover_risks(labels)?;
        let scores = cover_risks.iter().map(|r| -r).collect();
        let mut r = rng::stream(child_seed(seed, tag::MECHANISM), 0);
        let selected = exponential_mechanism(&ScoredCandidates::uniform(scores, 1.0 / labels.len() as f64), self.cfg.epsilon, &mut r)?;
        Ok(LabelDpFit { weights: self.cover[selected].clone(), selected, cover_risks })
    }
}

/// epsilon-label-DP learner.
pub fn train_label_dp(data: &Dataset, cfg: LabelDpConfig, seed: u64) -> Result<LabelDpFit> {
    LabelDpLearner::new(data.features(), data.dim(), cfg)?.fit(data.labels(), seed)
}

/// Terms of the label-DP excess-risk bound at a given empirical margin risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelBound {
    /// `1 + d log₂(2c²m) log₂(2cem/d) + ln(2/β)`.
    pub complexity: f64,
    pub agnostic_term: f64,
    pub fast_term: f64,
    pub privacy_term: f64,
    pub total: f64,
}

/// `2√(M/m)√R + 2M/m + 64 M ln(2/β)/(εm)` with `R` the empirical margin risk.
pub fn label_bound(cfg: &LabelDpConfig, m: usize, beta: f64, margin_risk: f64) -> Result<LabelBound> {
    cfg.validate()?;
    if m == 0 {
        return Err(Error::param("m must be at least 1"));
    }
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::param(format!("beta must be in (0, 2), got {beta}")));
    }
    if !(0.0..=1.0).contains(&margin_risk) {
        return Err(Error::param(format!("margin risk must be in [0, 1], got {margin_risk}")));
    }
    let (mf, d, c) = (m as f64, cfg.fat_dim, BOUND_C);
    let log_b = (2.0 / beta).ln();
    let complexity = 1.0 + d * (2.0 * c * c * mf).log2() * (2.0 * c * std::f64::consts::E * mf / d).log2() + log_b;
    let agnostic_term = 2.0 * (complexity / mf).sqrt() * margin_risk.sqrt();
    let fast_term = 2.0 * complexity / mf;
    let privacy_term = 64.0 * complexity * log_b / (cfg.epsilon * mf);
    Ok(LabelBound { complexity, agnostic_term, fast_term, privacy_term, total: agnostic_term + fast_term + privacy_term })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mech::exponential_probabilities;

    fn cfg(rho: f64, eps: f64) -> LabelDpConfig {
        LabelDpConfig::new(rho, eps, HypothesisFamily::Linear { lambda: 1.0 }, 1.0).unwrap()
    }

    fn line(m: usize) -> Dataset {
        // Points in [-1, -0.4] labeled -1 and [0.4, 1] labeled +1: separable at margin 0.4 by w = 1.
        let xs: Vec<f64> = (0..m).map(|i| {
            let t = 0.4 + 0.6 * (i / 2) as f64 / (m / 2) as f64;
            if i % 2 == 0 { t } else { -t }
        }).collect();
        let ys = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        Dataset::new(xs, 1, ys, 1.0).unwrap()
    }

    #[test]
    fn one_label_moves_scores_by_at_most_one_over_m() {
        let data = line(40);
        let learner = LabelDpLearner::new(data.features(), 1, cfg(0.4, 1.0)).unwrap();
        let base = learner.cover_risks(data.labels()).unwrap();
        for i in 0..40 {
            let mut ys = data.labels().to_vec();
            ys[i] = -ys[i];
            let flipped = learner.cover_risks(&ys).unwrap();
            assert!(base.iter().zip(&flipped).all(|(a, b)| (a - b).abs() <= 1.0 / 40.0 + 1e-15));
        }
    }

    #[test]
    fn separable_line_with_large_epsilon() {
        let data = line(50);
        let fit = train_label_dp(&data, cfg(0.4, 1e9), 1).unwrap();
        assert_eq!(fit.cover_risks[fit.selected], 0.0);
        assert!(fit.weights[0] > 0.0);
    }

    #[test]
    fn utility_within_mechanism_slack() {
        let data = line(60);
        let (eps, beta) = (0.5, 0.1);
        let learner = LabelDpLearner::new(data.features(), 1, cfg(0.4, eps)).unwrap();
        let risks = learner.cover_risks(data.labels()).unwrap();
        let best = risks.iter().cloned().fold(f64::INFINITY, f64::min);
        let slack = 2.0 / (eps * 60.0) * (learner.len() as f64 / beta).ln();
        // Exact selection probabilities give the failure mass directly.
        let probs = exponential_probabilities(&risks.iter().map(|r| -r).collect::<Vec<_>>(), 1.0 / 60.0, eps).unwrap();
        let fail: f64 = probs.iter().zip(&risks).filter(|(_, &r)| r > best + slack).map(|(p, _)| p).sum();
        assert!(fail <= beta);
        let hits = (0..200)
            .filter(|&s| {
                let f = learner.fit(data.labels(), s).unwrap();
                f.cover_risks[f.selected] <= best + slack
            })
            .count();
        assert!(hits as f64 >= 200.0 * (1.0 - beta - 0.05));
    }

    #[test]
    fn neural_family_has_no_cover() {
        let c = LabelDpConfig::new(0.3, 1.0, HypothesisFamily::NeuralNet, 4.0).unwrap();
        let err = train_label_dp(&line(10), c, 0).unwrap_err();
        assert!(err.to_string().contains("cover unavailable"));
    }

    #[test]
    fn bound_arithmetic() {
        let e = std::f64::consts::E;
        let b = label_bound(&cfg(0.5, 1.0), 1024, 2.0 / e, 0.0).unwrap();
        let expect = 1.0 + (2.0f64 * 289.0 * 1024.0).log2() * (2.0 * 17.0 * e * 1024.0).log2() + 1.0;
        assert!((b.complexity - expect).abs() < 1e-9 * expect);
        assert_eq!(b.agnostic_term, 0.0);
        assert!((b.total - (2.0 * expect / 1024.0 + 64.0 * expect / 1024.0)).abs() < 1e-9);

        let loose = label_bound(&cfg(0.5, 1e300), 1024, 0.1, 0.2).unwrap();
        let tight = label_bound(&cfg(0.5, 1.0), 1024, 0.1, 0.2).unwrap();
        assert!(loose.privacy_term < 1e-290);
        assert_eq!(loose.agnostic_term, tight.agnostic_term);
        assert_eq!(loose.fast_term, tight.fast_term);
        assert!(label_bound(&cfg(0.5, 1.0), 0, 0.1, 0.0).is_err());
    }

    #[test]
    fn fat_dim_helper() {
        assert_eq!(linear_fat_dim(1.0, 1.0, 32.0), 1.0);
        assert_eq!(linear_fat_dim(1.0, 2.0, 0.5), 128.0 * 128.0);
    }
}
