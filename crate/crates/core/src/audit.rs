//! Monte-Carlo privacy audits.
//!
//! A mechanism is run many times on each of two neighboring inputs, its outputs are mapped to
//! buckets, and the largest log-ratio of bucket frequencies gives an empirical lower estimate of
//! epsilon. Any discretizer is valid since post-processing cannot increase privacy loss.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use rand::Rng;

use crate::cover::HypothesisFamily;
use crate::data::{dot, Dataset};
use crate::error::{Error, Result};
use crate::labeldp::{LabelDpConfig, LabelDpLearner};
use crate::linear::{PureDpConfig, PureDpLearner};
use crate::losses::MarginParams;
use crate::mech::{exponential_mechanism, PrivacyParams, ScoredCandidates};
use crate::nn::{Architecture, NnConfig, NnTrainer};
use crate::rng::{self, child_seed, tag};

/// Which datasets count as neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// One example replaced.
    Record,
    /// One label flipped, features unchanged.
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditPlan {
    pub relation: Relation,
    pub trials: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Buckets seen fewer times than this on either side are ignored.
    pub min_count: u64,
}

impl AuditPlan {
    pub fn new(relation: Relation, trials: usize, epsilon: f64, delta: f64) -> Result<Self> {
        if trials < 1000 {
            return Err(Error::param(format!("an audit needs at least 1000 trials, got {trials}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::param(format!("delta must be in [0, 1), got {delta}")));
        }
        Ok(Self { relation, trials, epsilon, delta, min_count: 20 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketRow {
    pub bucket: u64,
    pub count_a: u64,
    pub count_b: u64,
    /// `ln((p + δ)/(q + δ))` with smoothed frequencies; `None` below the count floor.
    pub log_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditResult {
    pub eps_hat: f64,
    /// Largest `ln(p/q)` over eligible buckets.
    pub forward: f64,
    /// Largest `ln(q/p)` over eligible buckets.
    pub backward: f64,
    pub rows: Vec<BucketRow>,
    pub warning: Option<String>,
    pub plan: AuditPlan,
}

impl AuditResult {
    /// Columns: `bucket,count_S,count_S',log_ratio` (empty ratio below the count floor).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bucket,count_S,count_S',log_ratio\n");
        for r in &self.rows {
            let ratio = r.log_ratio.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", r.bucket, r.count_a, r.count_b, ratio);
        }
        s
    }
}

/// Runs `runner(neighbor, trial_seed)` for every trial on both sides and estimates epsilon.
///
/// `neighbor = false` is the base input and `true` its neighbor. Each side of each trial gets
/// its own seed, so the result depends only on `seed` and the plan, not on thread count.
pub fn estimate_epsilon<F>(runner: F, plan: &AuditPlan, seed: u64) -> Result<AuditResult>
where
    F: Fn(bool, u64) -> Result<u64> + Sync,
{
    let base = child_seed(seed, tag::TRIAL);
    let partials: Vec<BTreeMap<u64, (u64, u64)>> = (0..plan.trials)
        .into_par_iter()
        .chunks(1024)
        .map(|trials| {
            let mut counts = BTreeMap::new();
            for t in trials {
                let a = runner(false, child_seed(base, 2 * t as u64))?;
                let b = runner(true, child_seed(base, 2 * t as u64 + 1))?;
                counts.entry(a).or_insert((0, 0)).0 += 1;
                counts.entry(b).or_insert((0, 0)).1 += 1;
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;
    let mut counts: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for p in partials {
        for (k, (a, b)) in p {
            let e = counts.entry(k).or_insert((0, 0));
            e.0 += a;
            e.1 += b;
        }
    }
    Ok(summarize(counts, plan))
}

fn summarize(counts: BTreeMap<u64, (u64, u64)>, plan: &AuditPlan) -> AuditResult {
    let n = plan.trials as f64;
    let mut forward = 0.0f64;
    let mut backward = 0.0f64;
    let rows: Vec<BucketRow> = counts
        .into_iter()
        .map(|(bucket, (count_a, count_b))| {
            let log_ratio = (count_a >= plan.min_count && count_b >= plan.min_count).then(|| {
                let p = (count_a as f64 + 1.0) / n;
                let q = (count_b as f64 + 1.0) / n;
                ((p + plan.delta) / (q + plan.delta)).ln()
            });
            if let Some(l) = log_ratio {
                forward = forward.max(l);
                backward = backward.max(-l);
            }
            BucketRow { bucket, count_a, count_b, log_ratio }
        })
        .collect();
    let warning = (rows.len() <= 1).then(|| "discretizer produced a single bucket; the audit is uninformative".to_string());
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let eps_hat = if warning.is_some() { 0.0 } else { forward.max(backward) };
    AuditResult { eps_hat, forward, backward, rows, warning, plan: *plan }
}

/// Bit `i` set when the score on probe `i` is positive (at most 64 probes).
pub fn sign_pattern(weights: &[f64], probes: &[Vec<f64>]) -> u64 {
    probes.iter().take(64).enumerate().fold(0, |acc, (i, p)| if dot(weights, p) > 0.0 { acc | 1 << i } else { acc })
}

/// Ten fixed probe points spread over the unit ball of `R^dim`.
pub fn default_probes(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = crate::rng::stream(seed, tag::TRIAL);
    (0..10).map(|_| crate::cover::uniform_in_ball(dim, 1.0, &mut r)).collect()
}

/// FNV-1a hash of `bytes` reduced to `buckets` values.
pub fn hash_bucket(bytes: &[u8], buckets: u64) -> u64 {
    let h = bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3));
    h % buckets.max(1)
}

/// Mechanisms with a built-in neighboring pair and discretizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    /// One bit, flipped with probability `1/(1 + e^ε)`.
    RandomizedResponse,
    /// Exponential mechanism over three candidates whose scores move by the sensitivity.
    ExpMech,
    PureLinear,
    Nn,
    LabelDp,
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "randomized-response" => Ok(Self::RandomizedResponse),
            "exp-mech" => Ok(Self::ExpMech),
            "pure-linear" => Ok(Self::PureLinear),
            "nn" => Ok(Self::Nn),
            "label-dp" => Ok(Self::LabelDp),
            other => Err(Error::param(format!(
                "unknown mechanism '{other}' (expected randomized-response, exp-mech, pure-linear, nn or label-dp)"
            ))),
        }
    }
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RandomizedResponse => "randomized-response",
            Self::ExpMech => "exp-mech",
            Self::PureLinear => "pure-linear",
            Self::Nn => "nn",
            Self::LabelDp => "label-dp",
        }
    }

    pub fn relation(&self) -> Relation {
        match self {
            Self::LabelDp => Relation::Label,
            _ => Relation::Record,
        }
    }
}

/// Eight points on the unit circle labeled by the sign of the first coordinate, and a neighbor.
///
/// Under [`Relation::Record`] the first point is replaced by its mirror image with the opposite
/// label; under [`Relation::Label`] only its label is flipped.
pub fn crafted_pair(relation: Relation) -> (Dataset, Dataset) {
    let mut features = Vec::with_capacity(16);
    let mut labels = Vec::with_capacity(8);
    for i in 0..8 {
        let t = std::f64::consts::PI * (2 * i + 1) as f64 / 8.0;
        features.extend([t.cos(), t.sin()]);
        labels.push(if t.cos() > 0.0 { 1 } else { -1 });
    }
    let base = Dataset::new(features, 2, labels, 1.0).expect("valid crafted dataset");
    let neighbor = match relation {
        Relation::Record => {
            let x: Vec<f64> = base.row(0).iter().map(|v| -v).collect();
            base.replace_row(0, &x, -base.labels()[0])
        }
        Relation::Label => base.replace_row(0, base.row(0), -base.labels()[0]),
    }
    .expect("valid neighbor");
    (base, neighbor)
}

/// Audits `mech` at claimed pure `epsilon` on its crafted neighboring pair.
///
/// Linear models and networks are discretized by their sign pattern on [`default_probes`];
/// finite mechanisms by the selected index.
pub fn audit_mechanism(mech: Mechanism, trials: usize, epsilon: f64, seed: u64) -> Result<AuditResult> {
    let plan = AuditPlan::new(mech.relation(), trials, epsilon, 0.0)?;
    let privacy = PrivacyParams::pure(epsilon)?;
    let probes = default_probes(2, 0);
    let (a, b) = crafted_pair(mech.relation());
    let pick = |nb: bool| if nb { &b } else { &a };
    match mech {
        Mechanism::RandomizedResponse => {
            let p_flip = 1.0 / (1.0 + epsilon.exp());
            estimate_epsilon(|nb, s| Ok(u64::from(nb ^ (rng::seeded(s).random::<f64>() < p_flip))), &plan, seed)
        }
        Mechanism::ExpMech => {
            let sa = ScoredCandidates::uniform(vec![0.0, 0.5, 1.0], 1.0);
            let sb = ScoredCandidates::uniform(vec![1.0, 0.5, 0.0], 1.0);
            let run = |nb: bool, s| exponential_mechanism(if nb { &sb } else { &sa }, epsilon, &mut rng::seeded(s)).map(|i| i as u64);
            estimate_epsilon(run, &plan, seed)
        }
        Mechanism::PureLinear => {
            let cfg = PureDpConfig { k_override: Some(2), ..PureDpConfig::default() };
            let learner = PureDpLearner::new(a.len(), 2, 1.0, privacy, MarginParams::new(0.5, 1.0)?, 0.1, &cfg)?;
            let run = |nb: bool, s| learner.fit(pick(nb), s).map(|f| sign_pattern(&f.model.weights, &probes));
            estimate_epsilon(run, &plan, seed)
        }
        Mechanism::Nn => {
            let arch = Architecture::new(2, 2, 4.0)?;
            let cfg = NnConfig { k_override: Some(2), gamma_override: Some(2.0), ..NnConfig::default() };
            let trainer = NnTrainer::new(a.len(), 2, 1.0, arch, privacy, MarginParams::new(0.2, 1.0)?, &cfg)?;
            let run = |nb: bool, s| {
                let fit = trainer.fit(pick(nb), s)?;
                probes.iter().enumerate().try_fold(0u64, |acc, (i, p)| {
                    fit.net.forward(p).map(|v| if v > 0.0 { acc | 1 << i } else { acc })
                })
            };
            estimate_epsilon(run, &plan, seed)
        }
        Mechanism::LabelDp => {
            let cfg = LabelDpConfig::new(0.5, epsilon, HypothesisFamily::Linear { lambda: 1.0 }, 1.0)?;
            let learner = LabelDpLearner::new(a.features(), 2, cfg)?;
            let run = |nb: bool, s| learner.fit(pick(nb).labels(), s).map(|f| f.selected as u64);
            estimate_epsilon(run, &plan, seed)
        }
    }
}
