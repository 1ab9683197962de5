//! The `dpm` command-line driver.
//!
//! Every subcommand writes its artifacts under `--out` with fixed names and a `manifest.txt`
//! holding every resolved parameter as `key=value`. A manifest is itself a valid `--config`
//! file, so `dpm --config manifest.txt --out DIR` repeats a run.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::audit::{audit_mechanism, Mechanism};
use crate::cover::{HypothesisFamily, DEFAULT_COVER_CAP};
use crate::data::{generate_synthetic, load_dataset, to_csv, Dataset, Format, SyntheticKind, SyntheticSpec};
use crate::error::{Error, Result};
use crate::kernel::{train_kernel_dp, KernelConfig, KernelKind, KernelPredictor, KernelSpec};
use crate::labeldp::{label_bound, linear_fat_dim, train_label_dp, LabelDpConfig, LabelDpFit};
use crate::linear::{train_efficient, LinearModel, PureDpConfig, PureDpLearner, Provenance, SolverConfig, EfficientConfig};
use crate::losses::{hinge_risk, margin_risk, zero_one_risk, MarginParams};
use crate::mech::PrivacyParams;
use crate::modelselect::{nonprivate_margin, select_margin, BoundConstants, BoundKind, FatDim, Learner, TrainedModel};
use crate::nn::{train_nn_pure_dp, Architecture, NeuralNet, NnConfig, NnFit};

const SUBCOMMANDS: [&str; 5] = ["gen", "train", "select-margin", "audit", "report"];

#[derive(Debug, Parser)]
#[command(name = "dpm", version, about = "Differentially private margin learners", args_override_self = true)]
struct Cli {
    /// Directory for all artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Flat `key=value` file of defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train one learner.
    Train(TrainArgs),
    /// Privately select a margin and train at it.
    SelectMargin(SelectArgs),
    /// Monte-Carlo privacy audit of a built-in mechanism.
    Audit(AuditArgs),
    /// Evaluate a saved model on a dataset.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// two_cluster, noisy_margin, appendix_e or concentric.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// appendix_e: atom spacing.
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// appendix_e: outer atom position.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.3)]
    spread: f64,
    /// noisy_margin: minimum distance from the hidden hyperplane.
    #[arg(long, default_value_t = 0.1)]
    margin: f64,
    #[arg(long, default_value_t = 0.0)]
    flip_prob: f64,
    #[arg(long, default_value_t = 0.5)]
    inner: f64,
    #[arg(long, default_value_t = 1.0)]
    outer: f64,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// csv or libsvm.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Feature radius to assume instead of the largest row norm.
    #[arg(long)]
    radius: Option<f64>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let data = load_dataset(&self.data, self.format.parse::<Format>()?)?;
        match self.radius {
            Some(r) => data.with_radius(r),
            None => Ok(data),
        }
    }
}

#[derive(Debug, Args)]
struct PrivacyArgs {
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PrivacyArgs {
    fn privacy(&self) -> Result<PrivacyParams> {
        if self.delta == 0.0 {
            PrivacyParams::pure(self.eps)
        } else {
            PrivacyParams::new(self.eps, self.delta)
        }
    }
}

/// Per-learner knobs; each learner reads the ones it understands.
#[derive(Debug, Args)]
struct LearnerArgs {
    /// Multiplier in the sketch-dimension formula (pure-linear default 8, nn default 1).
    #[arg(long)]
    k_constant: Option<f64>,
    /// Fixed sketch dimension.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_COVER_CAP)]
    cover_cap: usize,
    /// eff-linear and kernel: upper limit on the sketch dimension.
    #[arg(long, default_value_t = 4096)]
    k_cap: usize,
    #[arg(long, default_value_t = 64)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    step_scale: f64,
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    #[arg(long, default_value_t = 1.0)]
    bandwidth: f64,
    /// Norm of the random feature map.
    #[arg(long, default_value_t = 1.0)]
    kernel_r: f64,
    /// Fixed number of random frequencies.
    #[arg(long)]
    features: Option<usize>,
    #[arg(long, default_value_t = 200_000)]
    feature_cap: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 2)]
    width: usize,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// nn: fixed cover radius.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    gamma_constant: f64,
    /// label-dp: fat-shattering dimension (default `(32Λr/ρ)²`).
    #[arg(long)]
    fat_dim: Option<f64>,
}

impl LearnerArgs {
    fn pure(&self) -> PureDpConfig {
        PureDpConfig { k_constant: self.k_constant.unwrap_or(8.0), k_override: self.k, cover_cap: self.cover_cap }
    }

    fn efficient(&self) -> EfficientConfig {
        EfficientConfig { k_cap: self.k_cap, solver: SolverConfig { steps: self.steps, step_scale: self.step_scale } }
    }

    fn kernel(&self) -> Result<(KernelSpec, KernelConfig)> {
        let kind: KernelKind = self.kernel.parse()?;
        let spec = match kind {
            KernelKind::Gaussian => KernelSpec::gaussian(self.bandwidth, self.kernel_r)?,
        };
        Ok((spec, KernelConfig { d_cap: self.feature_cap, d_override: self.features, efficient: self.efficient() }))
    }

    fn nn(&self) -> Result<(Architecture, NnConfig)> {
        let cfg = NnConfig {
            k_constant: self.k_constant.unwrap_or(1.0),
            gamma_constant: self.gamma_constant,
            k_override: self.k,
            gamma_override: self.gamma,
            cover_cap: self.cover_cap,
        };
        Ok((Architecture::new(self.layers, self.width, self.eta)?, cfg))
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// pure-linear, eff-linear, kernel, nn or label-dp.
    #[arg(long)]
    algo: String,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// F1 (pure-linear), F2 (eff-linear), F3 (kernel), F4 (label-dp) or F5 (nn).
    #[arg(long)]
    kind: String,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long, default_value_t = 1.0)]
    bound_constant: f64,
    #[arg(long, default_value_t = 1.0)]
    sensitivity_constant: f64,
    /// Also report the margin a non-private search would pick.
    #[arg(long)]
    nonprivate: bool,
    /// F3: random frequencies used by the non-private loss oracle.
    #[arg(long, default_value_t = 2000)]
    oracle_features: usize,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// randomized-response, exp-mech, pure-linear, nn or label-dp.
    #[arg(long)]
    mechanism: String,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Margin for the margin risk (default: the model's training margin).
    #[arg(long)]
    rho: Option<f64>,
    /// A `bounds.csv` from select-margin to include.
    #[arg(long)]
    bounds: Option<PathBuf>,
}

/// Runs the driver on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    match execute(&cli, &matches) {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("DPM_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Error::param(format!("DPM_THREADS must be a positive integer, got '{v}'")))?;
    // The global pool can only be built once per process; later calls keep the first size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Splices the `--config` file's flags in right after the subcommand, ahead of the
/// command-line flags so those win.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let (command, flags) = parse_config(&fs::read_to_string(&path)?)?;
    let pos = argv.iter().skip(1).position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref())).map(|p| p + 1);
    let mut out: Vec<OsString> = argv[..1].to_vec();
    let rest: Vec<OsString> = match pos {
        Some(p) => {
            out.push(argv[p].clone());
            argv[1..p].iter().chain(&argv[p + 1..]).cloned().collect()
        }
        None => {
            let cmd = command.ok_or_else(|| Error::param("no subcommand given and the config file has no 'command' key"))?;
            out.push(cmd.into());
            argv[1..].to_vec()
        }
    };
    out.extend(flags.into_iter().map(OsString::from));
    out.extend(rest);
    Ok(out)
}

/// Parses `key=value` lines (blank lines and `#` comments skipped) into a subcommand and flags.
fn parse_config(text: &str) -> Result<(Option<String>, Vec<String>)> {
    let mut command = None;
    let mut flags = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse { line: n + 1, msg: format!("expected key=value, got '{line}'") })?;
        let key = k.trim().replace('_', "-");
        let value = v.trim();
        match (key.as_str(), value) {
            ("command", _) => command = Some(value.to_string()),
            ("config", _) => {}
            (_, "true") => flags.push(format!("--{key}")),
            (_, "false") => {}
            _ => flags.push(format!("--{key}={value}")),
        }
    }
    Ok((command, flags))
}

/// Every resolved argument of the subcommand, sorted, with `command` first. `out` and
/// `config` are left out so a manifest can be replayed into any directory.
fn manifest(matches: &ArgMatches) -> String {
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let cmd = Cli::command();
    let args: Vec<String> = cmd.find_subcommand(name).expect("known subcommand").get_arguments().map(|a| a.get_id().to_string()).collect();
    let mut pairs: Vec<(String, String)> = args
        .iter()
        .map(String::as_str)
        .filter(|id| !matches!(*id, "out" | "config" | "help" | "version"))
        .filter_map(|id| {
            let raw = sub.get_raw(id)?;
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            Some((id.replace('_', "-"), vals.join(",")))
        })
        .collect();
    pairs.sort();
    let mut s = format!("command={name}\n");
    for (k, v) in pairs {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

fn write(out: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(out.join(name), contents)?;
    log::info!("wrote {}", out.join(name).display());
    Ok(())
}

fn execute(cli: &Cli, matches: &ArgMatches) -> Result<()> {
    fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Gen(a) => gen(a, out)?,
        Command::Train(a) => train(a, out)?,
        Command::SelectMargin(a) => select(a, out)?,
        Command::Audit(a) => audit(a, out)?,
        Command::Report(a) => report(a, out)?,
    }
    write(out, "manifest.txt", &manifest(matches))
}

fn gen(a: &GenArgs, out: &Path) -> Result<()> {
    let kind = match a.kind.as_str() {
        "two_cluster" => SyntheticKind::TwoClusterSeparable { dim: a.dim, separation: a.separation, spread: a.spread },
        "noisy_margin" => SyntheticKind::NoisyMargin { dim: a.dim, margin: a.margin, flip_prob: a.flip_prob },
        "appendix_e" => SyntheticKind::AppendixE { gamma: a.gamma, r: a.r },
        "concentric" => SyntheticKind::Concentric { dim: a.dim, inner: a.inner, outer: a.outer, noise: a.noise },
        other => {
            return Err(Error::param(format!("unknown dataset kind '{other}' (expected two_cluster, noisy_margin, appendix_e or concentric)")))
        }
    };
    let data = generate_synthetic(&SyntheticSpec { kind, m: a.m, seed: a.seed })?;
    write(out, "dataset.csv", &to_csv(&data))
}

/// Zero-one, `ρ`-margin and `ρ`-hinge risk of label-weighted scores.
fn metrics(scores: &[f64], rho: f64) -> Result<(f64, f64, f64)> {
    Ok((zero_one_risk(scores)?, margin_risk(scores, rho)?, hinge_risk(scores, rho)?))
}

fn metrics_md(scores: &[f64], rho: f64) -> Result<String> {
    let (z, m, h) = metrics(scores, rho)?;
    Ok(format!(
        "| metric | value |\n|---|---|\n| zero-one risk | {z} |\n| margin risk (rho={rho}) | {m} |\n| hinge risk (rho={rho}) | {h} |\n"
    ))
}

fn data_md(data: &Dataset) -> String {
    format!("Dataset: m={}, d={}, r={}.\n\n", data.len(), data.dim(), data.radius())
}

fn label_model(fit: &LabelDpFit, seed: u64, epsilon: f64, margin: MarginParams) -> LinearModel {
    LinearModel {
        weights: fit.weights.clone(),
        provenance: Provenance {
            algorithm: "label-dp".into(),
            projection: None,
            projection_seed: 0,
            k: fit.weights.len(),
            seed,
            epsilon,
            delta: 0.0,
            rho: margin.rho,
            lambda: margin.lambda,
            selected: fit.selected,
        },
    }
}

fn label_config(data: &Dataset, learner: &LearnerArgs, margin: MarginParams, epsilon: f64) -> Result<LabelDpConfig> {
    let fat = learner.fat_dim.unwrap_or_else(|| linear_fat_dim(margin.lambda, data.radius(), margin.rho));
    LabelDpConfig::new(margin.rho, epsilon, HypothesisFamily::Linear { lambda: margin.lambda }, fat)
}

fn train(a: &TrainArgs, out: &Path) -> Result<()> {
    let data = a.data.load()?;
    let privacy = a.privacy.privacy()?;
    let margin = MarginParams::new(a.rho, a.privacy.lambda)?;
    let (beta, seed) = (a.privacy.beta, a.privacy.seed);
    let mut md = format!("# Training report: {}\n\n", a.algo);
    md.push_str(&data_md(&data));
    let _ = writeln!(md, "Privacy: eps={}, delta={}; rho={}, lambda={}, beta={}, seed={}.\n", privacy.epsilon, privacy.delta, margin.rho, margin.lambda, beta, seed);
    let (model_text, scores) = match a.algo.as_str() {
        "pure-linear" => {
            let learner = PureDpLearner::new(data.len(), data.dim(), data.radius(), privacy, margin, beta, &a.learner.pure())?;
            let fit = learner.fit(&data, seed)?;
            let _ = writeln!(md, "Sketch dimension k={}, cover size {}, selected {}.\n", learner.k, learner.cover.len(), fit.model.provenance.selected);
            (fit.model.to_text(), data.linear_scores(&fit.model.weights))
        }
        "eff-linear" => {
            let (model, rep) = train_efficient(&data, privacy, margin, beta, seed, &a.learner.efficient())?;
            let _ = writeln!(md, "Sketch dimension k={} (formula {}, cap binds: {}), clipped rows {}.\n", rep.k, rep.k_formula, rep.cap_binds, rep.clipped_rows);
            (model.to_text(), data.linear_scores(&model.weights))
        }
        "kernel" => {
            let (spec, cfg) = a.learner.kernel()?;
            let (pred, rep) = train_kernel_dp(&data, spec, privacy, margin, beta, seed, &cfg)?;
            let _ = writeln!(
                md,
                "Random features D={} (formula {}, cap binds: {}), sketch dimension k={}.\n",
                rep.num_features, rep.d_formula, rep.cap_binds, rep.linear.k
            );
            (pred.to_text(), kernel_scores(&pred, &data)?)
        }
        "nn" => {
            let (arch, cfg) = a.learner.nn()?;
            let fit = train_nn_pure_dp(&data, arch, privacy, margin, seed, &cfg)?;
            let _ = writeln!(md, "Architecture L={}, N={}, eta={}; sketch dimension k={}, selected {}.\n", arch.layers, arch.width, arch.eta, fit.net.k, fit.provenance.selected);
            (fit.net.to_text(&fit.provenance), nn_scores(&fit.net, &data)?)
        }
        "label-dp" => {
            privacy.require_pure()?;
            let cfg = label_config(&data, &a.learner, margin, privacy.epsilon)?;
            let fit = train_label_dp(&data, cfg, seed)?;
            let model = label_model(&fit, seed, privacy.epsilon, margin);
            let risk = fit.cover_risks[fit.selected];
            let bound = label_bound(&cfg, data.len(), beta, risk)?;
            let _ = writeln!(md, "Cover size {}, selected {}, fat-shattering dimension {}.", fit.cover_risks.len(), fit.selected, cfg.fat_dim);
            let _ = writeln!(md, "Label-DP excess-risk bound {} (complexity {}).\n", bound.total, bound.complexity);
            (model.to_text(), data.linear_scores(&model.weights))
        }
        other => return Err(Error::param(format!("unknown algorithm '{other}' (expected pure-linear, eff-linear, kernel, nn or label-dp)"))),
    };
    md.push_str("## Training sample\n\n");
    md.push_str(&metrics_md(&scores, margin.rho)?);
    write(out, "model.txt", &model_text)?;
    write(out, "report.md", &md)
}

fn kernel_scores(pred: &KernelPredictor, data: &Dataset) -> Result<Vec<f64>> {
    (0..data.len()).map(|i| Ok(data.label(i) * pred.predict(data.row(i))?)).collect()
}

fn nn_scores(net: &NeuralNet, data: &Dataset) -> Result<Vec<f64>> {
    (0..data.len()).map(|i| Ok(data.label(i) * net.forward(data.row(i))?)).collect()
}

fn select(a: &SelectArgs, out: &Path) -> Result<()> {
    let data = a.data.load()?;
    let privacy = a.privacy.privacy()?;
    let lambda = a.privacy.lambda;
    let kind: BoundKind = a.kind.parse()?;
    let learner = match kind {
        BoundKind::F1 => Learner::PureLinear { lambda, cfg: a.learner.pure() },
        BoundKind::F2 => Learner::EffLinear { lambda, cfg: a.learner.efficient() },
        BoundKind::F3 => {
            let (spec, cfg) = a.learner.kernel()?;
            Learner::Kernel { lambda, spec, cfg, oracle_features: a.oracle_features }
        }
        BoundKind::F4 => Learner::Label { lambda, fat_dim: a.learner.fat_dim.map_or(FatDim::LinearBound, FatDim::Fixed) },
        BoundKind::F5 => {
            let (arch, cfg) = a.learner.nn()?;
            Learner::Nn { lambda, arch, cfg }
        }
    };
    let c = BoundConstants { bound: a.bound_constant, sensitivity: a.sensitivity_constant };
    let (beta, seed) = (a.privacy.beta, a.privacy.seed);
    let sel = select_margin(&data, &learner, privacy, beta, seed, &c)?;
    let margin = MarginParams::new(sel.rho, lambda)?;
    let (model_text, scores) = match &sel.model {
        TrainedModel::Linear(m) => (m.to_text(), data.linear_scores(&m.weights)),
        TrainedModel::Kernel(p) => (p.to_text(), kernel_scores(p, &data)?),
        TrainedModel::Label(fit) => {
            let m = label_model(fit, crate::rng::child_seed(seed, crate::rng::tag::TRAIN), privacy.epsilon, margin);
            (m.to_text(), data.linear_scores(&m.weights))
        }
        TrainedModel::Nn(NnFit { net, provenance, .. }) => (net.to_text(provenance), nn_scores(net, &data)?),
    };
    let mut md = format!("# Margin selection report: {}\n\n", kind.name());
    md.push_str(&data_md(&data));
    md.push_str(&sel.report.to_markdown());
    let _ = writeln!(md, "\nSelected rho = {}.", sel.rho);
    if a.nonprivate {
        let _ = writeln!(md, "\nNON-PRIVATE baseline (not differentially private): rho = {}.", nonprivate_margin(&sel.report));
    }
    md.push_str("\n## Model at the selected margin\n\n");
    md.push_str(&metrics_md(&scores, sel.rho)?);
    write(out, "model.txt", &model_text)?;
    write(out, "bounds.csv", &sel.report.to_csv())?;
    write(out, "report.md", &md)
}

fn audit(a: &AuditArgs, out: &Path) -> Result<()> {
    let mech: Mechanism = a.mechanism.parse()?;
    let res = audit_mechanism(mech, a.trials, a.eps, a.seed)?;
    let mut md = format!("# Privacy audit: {}\n\n", mech.name());
    let _ = writeln!(md, "Claimed eps = {}, trials = {}, seed = {}.\n", a.eps, a.trials, a.seed);
    let _ = writeln!(md, "| quantity | value |\n|---|---|\n| eps_hat | {} |\n| forward | {} |\n| backward | {} |\n| buckets | {} |", res.eps_hat, res.forward, res.backward, res.rows.len());
    let verdict = if res.eps_hat <= a.eps + 0.2 { "within" } else { "EXCEEDS" };
    let _ = writeln!(md, "\nThe estimate is {verdict} the claimed eps + 0.2.");
    if let Some(w) = &res.warning {
        let _ = writeln!(md, "\nWarning: {w}.");
    }
    write(out, "audit.csv", &res.to_csv())?;
    write(out, "report.md", &md)
}

/// A saved model of any kind, detected from its first line.
enum Saved {
    Linear(LinearModel),
    Kernel(KernelPredictor),
    Nn(NeuralNet, f64),
}

fn load_model(path: &Path) -> Result<Saved> {
    let text = fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or_default();
    if first.starts_with("dpm-linear ") {
        Ok(Saved::Linear(LinearModel::from_text(&text)?))
    } else if first.starts_with("dpm-kernel ") {
        Ok(Saved::Kernel(KernelPredictor::from_text(&text)?))
    } else if first.starts_with("dpm-nn ") {
        let (net, prov) = NeuralNet::from_text(&text)?;
        Ok(Saved::Nn(net, prov.rho))
    } else {
        Err(Error::Parse { line: 1, msg: "unrecognized model file".into() })
    }
}

fn report(a: &ReportArgs, out: &Path) -> Result<()> {
    let data = a.data.load()?;
    let (name, trained_rho, scores) = match load_model(&a.model)? {
        Saved::Linear(m) => (m.provenance.algorithm.clone(), m.provenance.rho, data.linear_scores(&m.weights)),
        Saved::Kernel(p) => ("kernel".to_string(), p.rho, kernel_scores(&p, &data)?),
        Saved::Nn(net, rho) => ("nn".to_string(), rho, nn_scores(&net, &data)?),
    };
    let rho = a.rho.unwrap_or(trained_rho);
    let mut md = format!("# Model report: {name}\n\n");
    md.push_str(&data_md(&data));
    md.push_str(&metrics_md(&scores, rho)?);
    if let Some(path) = &a.bounds {
        md.push_str("\n## Margin bounds\n\n");
        md.push_str(&bounds_md(&fs::read_to_string(path)?)?);
    }
    write(out, "report.md", &md)
}

fn bounds_md(csv: &str) -> Result<String> {
    let mut lines = csv.lines();
    if lines.next() != Some("rho,F,sensitivity,selected") {
        return Err(Error::Parse { line: 1, msg: "expected a bounds.csv header".into() });
    }
    let mut s = String::from("| rho | F | sensitivity | selected |\n|---|---|---|---|\n");
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Parse { line: i + 2, msg: format!("expected 4 columns, got {}", cols.len()) });
        }
        let _ = writeln!(s, "| {} | {} | {} | {} |", cols[0], cols[1], cols[2], if cols[3] == "1" { "yes" } else { "" });
    }
    Ok(s)
}
