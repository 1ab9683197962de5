//! Private choice of the confidence margin.
//!
//! Every margin on a geometric grid is scored by a generalization bound `F(ρ, g_ρ(S))`,
//! where `g_ρ(S)` is the best empirical loss of the class at margin `ρ`. The generalized
//! exponential mechanism picks a margin using per-margin sensitivities, and the learner is
//! then trained at that margin. Selection and training each spend `ε`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{Dataset, FeatureRows};
use crate::erm::{hinge_erm, hinge_value};
use crate::error::{Error, Result};
use crate::kernel::{train_kernel_dp, KernelConfig, KernelPredictor, KernelSpec, MappedRows, RffMap};
use crate::labeldp::{label_bound, linear_fat_dim, train_label_dp, LabelDpConfig, LabelDpFit, BOUND_C};
use crate::cover::HypothesisFamily;
use crate::linear::{train_efficient, train_pure_dp, EfficientConfig, LinearModel, PureDpConfig};
use crate::losses::{margin_risk, MarginParams};
use crate::mech::{generalized_exponential_mechanism, PrivacyParams, ScoredCandidates};
use crate::nn::{sample_projections, Architecture, NnConfig, NnFit, NnTrainer};
use crate::rng::{self, child_seed, tag};

/// `ρ_j = 2^{-j} h_max` for `j = 1..=J`, `J = max(1, ⌈½ log₂ m⌉)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginGrid {
    pub h_max: f64,
    pub values: Vec<f64>,
}

impl MarginGrid {
    pub fn new(h_max: f64, m: usize) -> Result<Self> {
        if !(h_max > 0.0 && h_max.is_finite()) {
            return Err(Error::param(format!("h_max must be positive, got {h_max}")));
        }
        if m == 0 {
            return Err(Error::param("m must be at least 1"));
        }
        let levels = ((0.5 * (m as f64).log2()).ceil() as usize).max(1);
        let values = (1..=levels).map(|j| h_max * 0.5f64.powi(j as i32)).collect();
        Ok(Self { h_max, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Pure-DP linear learner, margin zero-one risk.
    F1,
    /// Efficient linear learner, hinge risk.
    F2,
    /// Kernel learner, hinge risk in the feature space.
    F3,
    /// Label-DP learner, margin zero-one risk.
    F4,
    /// Network learner, margin zero-one risk.
    F5,
}

impl std::str::FromStr for BoundKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(Self::F1),
            "F2" => Ok(Self::F2),
            "F3" => Ok(Self::F3),
            "F4" => Ok(Self::F4),
            "F5" => Ok(Self::F5),
            _ => Err(Error::param(format!("unknown bound kind '{s}' (expected F1..F5)"))),
        }
    }
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::F1 => "F1_pure_linear",
            Self::F2 => "F2_eff_linear",
            Self::F3 => "F3_kernel",
            Self::F4 => "F4_label",
            Self::F5 => "F5_nn",
        }
    }
}

/// Fat-shattering dimension used by the label bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FatDim {
    Fixed(f64),
    /// `(32 Λ r / ρ)²` for norm-bounded linear functions.
    LinearBound,
}

/// Everything a bound needs besides `ρ` and `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundStats {
    pub m: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
    pub r: f64,
    pub arch: Option<Architecture>,
    pub fat_dim: Option<FatDim>,
}

/// Multipliers standing in for the unspecified constants of the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub bound: f64,
    pub sensitivity: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self { bound: 1.0, sensitivity: 1.0 }
    }
}

fn label_complexity(rho: f64, stats: &BoundStats) -> Result<f64> {
    let fat = match stats.fat_dim {
        Some(FatDim::Fixed(d)) => d,
        Some(FatDim::LinearBound) => linear_fat_dim(stats.lambda, stats.r, rho),
        None => return Err(Error::param("F4 needs a fat-shattering dimension")),
    };
    // Past 2cm the log factor of the label bound turns negative; the bound is vacuous there anyway.
    let fat = fat.min(2.0 * BOUND_C * stats.m as f64).max(1.0);
    let cfg = LabelDpConfig::new(rho, stats.epsilon, HypothesisFamily::Linear { lambda: stats.lambda }, fat)?;
    Ok(label_bound(&cfg, stats.m, stats.beta.min(0.999_999), 0.0)?.complexity)
}

fn nn_theta(rho: f64, stats: &BoundStats, arch: &Architecture) -> f64 {
    let m = stats.m as f64;
    let scale = stats.r * (arch.eta * stats.lambda).powi(arch.layers as i32) / rho;
    ((arch.layers as f64 * m / stats.beta).ln() * scale.ln()).max(0.0)
}

fn check_stats(rho: f64, t: f64, stats: &BoundStats) -> Result<()> {
    if !(rho > 0.0) {
        return Err(Error::param(format!("rho must be positive, got {rho}")));
    }
    if !(0.0..=f64::MAX).contains(&t) {
        return Err(Error::param(format!("empirical loss must be nonnegative, got {t}")));
    }
    if stats.m == 0 || !(stats.beta > 0.0 && stats.beta < 1.0) || !(stats.epsilon > 0.0) || !(stats.lambda > 0.0) || !(stats.r > 0.0) {
        return Err(Error::param("bound statistics need m >= 1, beta in (0, 1), and positive epsilon, lambda, r"));
    }
    Ok(())
}

/// `F(ρ, t)` with every unspecified constant replaced by `c.bound`.
pub fn bound_f(kind: BoundKind, rho: f64, t: f64, stats: &BoundStats, c: &BoundConstants) -> Result<f64> {
    check_stats(rho, t, stats)?;
    let m = stats.m as f64;
    let (beta, eps, lr) = (stats.beta, stats.epsilon, stats.lambda * stats.r);
    let log_mb = (m / beta).ln();
    Ok(match kind {
        BoundKind::F1 => {
            let a = lr * lr * log_mb * log_mb / (m * rho * rho) + (1.0 / beta).ln() / m;
            let gamma = lr * lr * log_mb * (lr / (beta * rho)).ln() / (rho * rho * eps * m) + a;
            t + c.bound * ((t * a).sqrt() + gamma)
        }
        BoundKind::F2 | BoundKind::F3 => {
            if !(stats.delta > 0.0 && stats.delta < 1.0) {
                return Err(Error::param("F2/F3 need delta in (0, 1)"));
            }
            let noise = (log_mb * (1.0 / beta).ln()).sqrt() * (1.0 / stats.delta).ln().powf(0.75) / (eps * m).sqrt();
            t + c.bound * (((1.0 / beta).ln() / m).sqrt() + lr / rho * (1.0 / m.sqrt() + noise))
        }
        BoundKind::F4 => {
            let big_m = label_complexity(rho, stats)?;
            t + 2.0 * t.sqrt() * (big_m / m).sqrt() + 2.0 * big_m / m + 64.0 * big_m * (2.0 / beta).ln() / (eps * m)
        }
        BoundKind::F5 => {
            let arch = stats.arch.ok_or_else(|| Error::param("F5 needs an architecture"))?;
            let theta = nn_theta(rho, stats, &arch);
            let growth = stats.r * (2.0 * arch.eta * stats.lambda).powi(arch.layers as i32);
            let n_theta = arch.width as f64 * theta;
            t + c.bound * (growth * n_theta.sqrt() / (rho * m.sqrt()) + growth * growth * n_theta / (rho * rho * eps * m))
        }
    })
}

/// Sensitivity of `S -> F(ρ, g_ρ(S))`, scaled by `c.sensitivity`.
///
/// Only `t` depends on the data. For F2/F3 one replaced row moves the best hinge risk by at
/// most `2Λr/(mρ)`; for F1 the square-root term moves by at most `√(a/m)`; for F4 the
/// `2√t √(M/m)` term moves by at most `2√M/m`.
pub fn sensitivity_bound(kind: BoundKind, rho: f64, stats: &BoundStats, c: &BoundConstants) -> Result<f64> {
    check_stats(rho, 0.0, stats)?;
    let m = stats.m as f64;
    let lr = stats.lambda * stats.r;
    let base = match kind {
        BoundKind::F1 => {
            let log_mb = (m / stats.beta).ln();
            1.0 / m + c.bound / m * (lr * lr * log_mb * log_mb / (rho * rho) + (1.0 / stats.beta).ln()).sqrt()
        }
        BoundKind::F2 | BoundKind::F3 => 2.0 * lr / (m * rho),
        BoundKind::F4 => (1.0 + 2.0 * label_complexity(rho, stats)?.sqrt()) / m,
        BoundKind::F5 => 1.0 / m,
    };
    Ok(c.sensitivity * base)
}

/// The learner trained at the selected margin.
#[derive(Debug, Clone)]
pub enum Learner {
    PureLinear { lambda: f64, cfg: PureDpConfig },
    EffLinear { lambda: f64, cfg: EfficientConfig },
    Kernel { lambda: f64, spec: KernelSpec, cfg: KernelConfig, oracle_features: usize },
    Label { lambda: f64, fat_dim: FatDim },
    Nn { lambda: f64, arch: Architecture, cfg: NnConfig },
}

impl Learner {
    pub fn kind(&self) -> BoundKind {
        match self {
            Learner::PureLinear { .. } => BoundKind::F1,
            Learner::EffLinear { .. } => BoundKind::F2,
            Learner::Kernel { .. } => BoundKind::F3,
            Learner::Label { .. } => BoundKind::F4,
            Learner::Nn { .. } => BoundKind::F5,
        }
    }

    fn lambda(&self) -> f64 {
        match *self {
            Learner::PureLinear { lambda, .. }
            | Learner::EffLinear { lambda, .. }
            | Learner::Kernel { lambda, .. }
            | Learner::Label { lambda, .. }
            | Learner::Nn { lambda, .. } => lambda,
        }
    }

    /// Radius of the inputs the hypotheses see.
    fn input_radius(&self, data: &Dataset) -> f64 {
        match self {
            Learner::Kernel { spec, .. } => spec.r,
            _ => data.radius(),
        }
    }

    /// Bound on `|h(x)|` over the class.
    pub fn h_max(&self, data: &Dataset) -> f64 {
        match self {
            Learner::Nn { lambda, arch, .. } if arch.layers > 1 => lambda * (arch.width as f64).sqrt(),
            _ => self.lambda() * self.input_radius(data),
        }
    }

    fn stats(&self, data: &Dataset, privacy: &PrivacyParams, beta: f64) -> BoundStats {
        BoundStats {
            m: data.len(),
            beta,
            epsilon: privacy.epsilon,
            delta: privacy.delta,
            lambda: self.lambda(),
            r: self.input_radius(data),
            arch: match self {
                Learner::Nn { arch, .. } => Some(*arch),
                _ => None,
            },
            fat_dim: match self {
                Learner::Label { fat_dim, .. } => Some(*fat_dim),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Linear(LinearModel),
    Kernel(KernelPredictor),
    Label(LabelDpFit),
    Nn(NnFit),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub rho: f64,
    /// Best empirical loss of the class at this margin.
    pub g: f64,
    pub f: f64,
    pub sensitivity: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub constants: BoundConstants,
    pub rows: Vec<BoundRow>,
    pub selection_epsilon: f64,
    pub learner_epsilon: f64,
    pub delta: f64,
    /// Non-private ERM loss at each margin minus the reported `g`; nonnegative up to solver error.
    pub oracle_gaps: Vec<f64>,
}

impl BoundReport {
    pub fn total_epsilon(&self) -> f64 {
        self.selection_epsilon + self.learner_epsilon
    }

    pub fn selected(&self) -> Option<&BoundRow> {
        self.rows.iter().find(|r| r.selected)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho,F,sensitivity,selected\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.rho, r.f, r.sensitivity, u8::from(r.selected));
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("## Margin selection ({})\n\n", self.kind.name());
        let _ = writeln!(s, "Bound constant {}, sensitivity constant {}.\n", self.constants.bound, self.constants.sensitivity);
        s.push_str("| rho | g | F | sensitivity | selected |\n|---|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(s, "| {:.6} | {:.6} | {:.6} | {:.6e} | {} |", r.rho, r.g, r.f, r.sensitivity, if r.selected { "yes" } else { "" });
        }
        let _ = writeln!(
            s,
            "\nBudget: selection eps {} + learner eps {} = {} (delta {}).",
            self.selection_epsilon,
            self.learner_epsilon,
            self.total_epsilon(),
            self.delta
        );
        s
    }
}

/// Best empirical loss per margin over one candidate set shared by all margins, so the
/// result is nondecreasing in the margin. Also returns each margin's own ERM loss.
fn best_losses(learner: &Learner, data: &Dataset, grid: &MarginGrid, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let lambda = learner.lambda();
    let iters = 300;
    match learner {
        Learner::EffLinear { .. } => Ok(hinge_losses(data, grid, lambda, iters)),
        Learner::Kernel { spec, oracle_features, .. } => {
            let map = RffMap::sample(*spec, (*oracle_features).max(1), data.dim(), child_seed(seed, tag::FEATURES))?;
            let rows = MappedRows { data, map: &map };
            let mut feats = vec![0.0; data.len() * rows.dim()];
            feats.par_chunks_mut(rows.dim()).enumerate().for_each(|(i, out)| rows.row_into(i, out));
            let lifted = Dataset::new(feats, rows.dim(), data.labels().to_vec(), spec.r)?;
            Ok(hinge_losses(&lifted, grid, lambda, iters))
        }
        Learner::PureLinear { .. } | Learner::Label { .. } => {
            let cands: Vec<Vec<f64>> = grid.values.par_iter().map(|&rho| hinge_erm(data, rho, lambda, iters).weights).collect();
            let scores: Vec<Vec<f64>> = cands.iter().map(|w| data.linear_scores(w)).collect();
            let g = grid
                .values
                .iter()
                .map(|&rho| scores.iter().map(|s| margin_risk(s, rho).expect("non-empty")).fold(f64::INFINITY, f64::min))
                .collect::<Vec<_>>();
            let own = grid.values.iter().zip(&scores).map(|(&rho, s)| margin_risk(s, rho).expect("non-empty")).collect();
            Ok((g, own))
        }
        Learner::Nn { arch, cfg, .. } => {
            // The largest margin gives the coarsest cover; it is shared by every margin.
            let margin = MarginParams::new(grid.values[0], lambda)?;
            let trainer = NnTrainer::new(data.len(), data.dim(), data.radius(), *arch, PrivacyParams::pure(1.0)?, margin, cfg)?;
            let projections = sample_projections(arch, data.dim(), trainer.k, child_seed(seed, tag::PROJECTION))?;
            let g: Vec<f64> = grid
                .values
                .iter()
                .map(|&rho| Ok(trainer.cover_margin_risks(data, &projections, rho)?.into_iter().fold(f64::INFINITY, f64::min)))
                .collect::<Result<_>>()?;
            Ok((g.clone(), g))
        }
    }
}

/// Hinge risk at margin `ρ` over `B(Λ)` equals unit-margin hinge risk over `B(Λ/ρ)`; candidates
/// rescaled by `1/ρ_j` are feasible exactly for margins up to `ρ_j`, so the minimum grows with `ρ`.
fn hinge_losses(data: &Dataset, grid: &MarginGrid, lambda: f64, iters: usize) -> (Vec<f64>, Vec<f64>) {
    let sols: Vec<(Vec<f64>, f64)> = grid
        .values
        .par_iter()
        .map(|&rho| {
            let e = hinge_erm(data, rho, lambda, iters);
            (e.weights.iter().map(|w| w / rho).collect(), e.risk)
        })
        .collect();
    let unit: Vec<f64> = sols.iter().map(|(v, _)| hinge_value(data, v, 1.0)).collect();
    let g = grid
        .values
        .iter()
        .map(|&rho| {
            let limit = lambda / rho * (1.0 + 1e-9);
            sols.iter()
                .zip(&unit)
                .filter(|((v, _), _)| crate::data::norm(v) <= limit)
                .map(|(_, &u)| u)
                .fold(1.0, f64::min)
        })
        .collect();
    (g, sols.into_iter().map(|(_, r)| r).collect())
}

/// Scores every grid margin without selecting. Fails if the monotonicity the selection
/// guarantee relies on does not hold.
pub fn margin_report(data: &Dataset, learner: &Learner, privacy: PrivacyParams, beta: f64, seed: u64, c: &BoundConstants) -> Result<BoundReport> {
    let kind = learner.kind();
    let grid = MarginGrid::new(learner.h_max(data), data.len())?;
    let stats = learner.stats(data, &privacy, beta);
    let (g, own) = best_losses(learner, data, &grid, seed)?;
    // Grid values decrease, so g must not increase along it.
    for j in 1..grid.len() {
        if g[j] > g[j - 1] + 1e-12 {
            return Err(Error::Monotonicity(format!(
                "best loss {} at rho={} exceeds {} at rho={}",
                g[j], grid.values[j], g[j - 1], grid.values[j - 1]
            )));
        }
    }
    for &t in &g {
        let fs: Vec<f64> = grid.values.iter().map(|&rho| bound_f(kind, rho, t, &stats, c)).collect::<Result<_>>()?;
        for j in 1..fs.len() {
            if fs[j] < fs[j - 1] - 1e-12 * fs[j - 1].abs() {
                return Err(Error::Monotonicity(format!("{} increases with rho between {} and {} at t={t}", kind.name(), grid.values[j], grid.values[j - 1])));
            }
        }
    }
    let rows = grid
        .values
        .iter()
        .zip(&g)
        .map(|(&rho, &t)| {
            Ok(BoundRow { rho, g: t, f: bound_f(kind, rho, t, &stats, c)?, sensitivity: sensitivity_bound(kind, rho, &stats, c)?, selected: false })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport {
        kind,
        constants: *c,
        rows,
        selection_epsilon: privacy.epsilon,
        learner_epsilon: privacy.epsilon,
        delta: privacy.delta,
        oracle_gaps: own.iter().zip(&g).map(|(o, t)| o - t).collect(),
    })
}

/// Draws the margin index with the generalized exponential mechanism and marks it in the report.
pub fn select_index(report: &mut BoundReport, beta: f64, seed: u64) -> Result<usize> {
    let scores = report.rows.iter().map(|r| -r.f).collect();
    let sens = report.rows.iter().map(|r| r.sensitivity).collect();
    let mut r = rng::stream(child_seed(seed, tag::SELECTION), 0);
    let idx = generalized_exponential_mechanism(&ScoredCandidates::per_candidate(scores, sens), report.selection_epsilon, beta, &mut r)?;
    for (i, row) in report.rows.iter_mut().enumerate() {
        row.selected = i == idx;
    }
    Ok(idx)
}

#[derive(Debug, Clone)]
pub struct MarginSelection {
    pub rho: f64,
    pub report: BoundReport,
    pub model: TrainedModel,
}

/// Selects a margin with budget `ε` and trains the learner there with `(ε, δ)`:
/// `(2ε, δ)` in total.
pub fn select_margin(data: &Dataset, learner: &Learner, privacy: PrivacyParams, beta: f64, seed: u64, c: &BoundConstants) -> Result<MarginSelection> {
    let mut report = margin_report(data, learner, privacy, beta, seed, c)?;
    let idx = select_index(&mut report, beta, seed)?;
    let rho = report.rows[idx].rho;
    let train_seed = child_seed(seed, tag::TRAIN);
    let lambda = learner.lambda();
    let margin = MarginParams::new(rho, lambda)?;
    let model = match learner {
        Learner::PureLinear { cfg, .. } => TrainedModel::Linear(train_pure_dp(data, privacy, margin, beta, train_seed, cfg)?),
        Learner::EffLinear { cfg, .. } => TrainedModel::Linear(train_efficient(data, privacy, margin, beta, train_seed, cfg)?.0),
        Learner::Kernel { spec, cfg, .. } => TrainedModel::Kernel(train_kernel_dp(data, *spec, privacy, margin, beta, train_seed, cfg)?.0),
        Learner::Label { fat_dim, .. } => {
            let fat = match fat_dim {
                FatDim::Fixed(d) => *d,
                FatDim::LinearBound => linear_fat_dim(lambda, data.radius(), rho),
            };
            let cfg = LabelDpConfig::new(rho, privacy.epsilon, HypothesisFamily::Linear { lambda }, fat)?;
            TrainedModel::Label(train_label_dp(data, cfg, train_seed)?)
        }
        Learner::Nn { arch, cfg, .. } => TrainedModel::Nn(crate::nn::train_nn_pure_dp(data, *arch, privacy, margin, train_seed, cfg)?),
    };
    Ok(MarginSelection { rho, report, model })
}

/// Non-private baseline: the grid margin with the smallest bound.
pub fn nonprivate_margin(report: &BoundReport) -> f64 {
    report.rows.iter().min_by(|a, b| a.f.total_cmp(&b.f)).map(|r| r.rho).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticKind, SyntheticSpec};
    use crate::mech::generalized_probabilities;

    fn stats() -> BoundStats {
        BoundStats { m: 1000, beta: 0.1, epsilon: 1.0, delta: 1e-6, lambda: 1.0, r: 1.0, arch: None, fat_dim: None }
    }

    #[test]
    fn grid_contents() {
        assert_eq!(MarginGrid::new(1.0, 256).unwrap().values, vec![0.5, 0.25, 0.125, 0.0625]);
        assert_eq!(MarginGrid::new(3.0, 4).unwrap().values, vec![1.5]);
        assert_eq!(MarginGrid::new(3.0, 1).unwrap().len(), 1);
        let g = MarginGrid::new(2.0, 1000).unwrap();
        assert!(*g.values.last().unwrap() >= 2.0 / 1000f64.sqrt() / 2.0);
    }

    #[test]
    fn f2_sensitivity_example() {
        let s = BoundStats { m: 100, ..stats() };
        let d = sensitivity_bound(BoundKind::F2, 0.5, &s, &BoundConstants::default()).unwrap();
        assert!((d - 0.04).abs() < 1e-15);
        let d2 = sensitivity_bound(BoundKind::F2, 0.5, &BoundStats { m: 200, ..s }, &BoundConstants::default()).unwrap();
        assert!((d2 - 0.02).abs() < 1e-15);
        let a = sensitivity_bound(BoundKind::F5, 0.1, &s, &BoundConstants::default()).unwrap();
        let b = sensitivity_bound(BoundKind::F5, 0.9, &s, &BoundConstants::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, 0.01);
    }

    #[test]
    fn f2_shape_and_monotonicity() {
        let s = stats();
        let c = BoundConstants::default();
        let m = 1000f64;
        let expect = (10f64.ln() / m).sqrt()
            + 1.0 / 0.5 * (1.0 / m.sqrt() + ((m / 0.1).ln() * 10f64.ln()).sqrt() * (1e6f64).ln().powf(0.75) / m.sqrt());
        assert!((bound_f(BoundKind::F2, 0.5, 0.0, &s, &c).unwrap() - expect).abs() < 1e-12);
        assert!(bound_f(BoundKind::F2, 1.0, 0.2, &s, &c).unwrap() < bound_f(BoundKind::F2, 0.5, 0.2, &s, &c).unwrap());
        assert!(bound_f(BoundKind::F2, 0.5, 0.0, &BoundStats { delta: 0.0, ..s }, &c).is_err());
    }

    #[test]
    fn f1_at_zero_risk_is_the_remainder() {
        let s = stats();
        let c = BoundConstants { bound: 2.0, sensitivity: 1.0 };
        let (m, rho, lmb) = (1000f64, 0.3f64, (1000f64 / 0.1).ln());
        let gamma = lmb * (1.0f64 / (0.1 * rho)).ln() / (rho * rho * m) + lmb * lmb / (m * rho * rho) + 10f64.ln() / m;
        assert!((bound_f(BoundKind::F1, rho, 0.0, &s, &c).unwrap() - 2.0 * gamma).abs() < 1e-12);
    }

    #[test]
    fn missing_stats_are_errors() {
        let c = BoundConstants::default();
        assert!(bound_f(BoundKind::F4, 0.3, 0.0, &stats(), &c).is_err());
        assert!(bound_f(BoundKind::F5, 0.3, 0.0, &stats(), &c).is_err());
    }

    #[test]
    fn bounds_are_nonincreasing_in_rho() {
        let arch = Architecture::new(2, 3, 2.0).unwrap();
        let s = BoundStats { arch: Some(arch), fat_dim: Some(FatDim::LinearBound), ..stats() };
        let c = BoundConstants::default();
        for kind in [BoundKind::F1, BoundKind::F2, BoundKind::F3, BoundKind::F4, BoundKind::F5] {
            for &t in &[0.0, 0.1, 0.7] {
                let fs: Vec<f64> = (1..200).map(|i| bound_f(kind, i as f64 * 0.005, t, &s, &c).unwrap()).collect();
                assert!(fs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{kind:?} t={t}");
            }
        }
    }

    fn noisy(m: usize, seed: u64) -> Dataset {
        let kind = SyntheticKind::NoisyMargin { dim: 5, margin: 0.3, flip_prob: 0.05 };
        generate_synthetic(&SyntheticSpec { kind, m, seed }).unwrap()
    }

    #[test]
    fn best_losses_are_monotone_for_every_family() {
        let data = noisy(300, 1);
        let learners = [
            Learner::EffLinear { lambda: 2.0, cfg: EfficientConfig::default() },
            Learner::PureLinear { lambda: 2.0, cfg: PureDpConfig::default() },
            Learner::Label { lambda: 2.0, fat_dim: FatDim::LinearBound },
            Learner::Kernel { lambda: 2.0, spec: KernelSpec::gaussian(1.0, 1.0).unwrap(), cfg: KernelConfig::default(), oracle_features: 200 },
        ];
        for l in &learners {
            let grid = MarginGrid::new(l.h_max(&data), data.len()).unwrap();
            let (g, _) = best_losses(l, &data, &grid, 3).unwrap();
            assert!(g.windows(2).all(|w| w[1] <= w[0]), "{:?}: {g:?}", l.kind());
        }
    }

    #[test]
    fn large_epsilon_selects_near_the_minimum() {
        let data = noisy(1000, 2);
        let learner = Learner::EffLinear { lambda: 2.0, cfg: EfficientConfig::default() };
        let (eps, beta) = (20.0, 0.1);
        let privacy = PrivacyParams::new(eps, 1e-6).unwrap();
        let base = margin_report(&data, &learner, privacy, beta, 1, &BoundConstants::default()).unwrap();
        let best = base.rows.iter().map(|r| r.f).fold(f64::INFINITY, f64::min);
        let max_sens = base.rows.iter().map(|r| r.sensitivity).fold(0.0, f64::max);
        let slack = max_sens / eps * ((data.len() as f64).log2() / beta).ln();
        let good = (0..50u64)
            .filter(|&s| {
                let mut rep = base.clone();
                let i = select_index(&mut rep, beta, s).unwrap();
                rep.rows[i].f <= best + slack
            })
            .count();
        assert!(good >= 48, "{good}/50");
    }

    #[test]
    fn single_margin_is_always_chosen() {
        let data = noisy(4, 3);
        let learner = Learner::EffLinear { lambda: 1.0, cfg: EfficientConfig::default() };
        let privacy = PrivacyParams::new(0.5, 1e-3).unwrap();
        let rep = margin_report(&data, &learner, privacy, 0.1, 0, &BoundConstants::default()).unwrap();
        assert_eq!(rep.rows.len(), 1);
        let cands = ScoredCandidates::per_candidate(vec![-rep.rows[0].f], vec![rep.rows[0].sensitivity]);
        assert_eq!(generalized_probabilities(&cands, 0.5, 0.1).unwrap(), vec![1.0]);
    }

    #[test]
    fn end_to_end_selection_and_budget() {
        let data = noisy(500, 4);
        let learner = Learner::EffLinear { lambda: 2.0, cfg: EfficientConfig::default() };
        let privacy = PrivacyParams::new(1.0, 1e-6).unwrap();
        let sel = select_margin(&data, &learner, privacy, 0.1, 7, &BoundConstants::default()).unwrap();
        assert_eq!(sel.report.total_epsilon(), 2.0);
        assert_eq!(sel.report.rows.iter().filter(|r| r.selected).count(), 1);
        assert_eq!(sel.report.selected().unwrap().rho, sel.rho);
        assert!(matches!(sel.model, TrainedModel::Linear(_)));
        let csv = sel.report.to_csv();
        assert!(csv.starts_with("rho,F,sensitivity,selected\n"));
        assert_eq!(csv.lines().count(), sel.report.rows.len() + 1);
        assert!(sel.report.to_markdown().contains("F2_eff_linear"));
        assert!(sel.report.oracle_gaps.iter().all(|g| *g >= -0.05));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("f3".parse::<BoundKind>().unwrap(), BoundKind::F3);
        assert!("F6".parse::<BoundKind>().is_err());
    }
}
