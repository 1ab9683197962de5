//! Labeled datasets, synthetic generators and CSV / LIBSVM I/O.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

const NORM_TOL: f64 = 1e-9;

/// `m` examples in `R^d` with labels in {-1, +1}, all inside a ball of radius `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<i8>,
    dim: usize,
    radius: f64,
}

impl Dataset {
    /// Builds a dataset from row-major features and checks every invariant.
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<i8>, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        if labels.is_empty() {
            return Err(Error::param("dataset must contain at least one example"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::param(format!(
                "feature buffer has {} entries, expected {} x {}",
                features.len(),
                labels.len(),
                dim
            )));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::param(format!("radius must be finite and nonnegative, got {radius}")));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1 && y != -1) {
            return Err(Error::param(format!("label {} at row {i} is not +1 or -1", labels[i])));
        }
        for (i, row) in features.chunks_exact(dim).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!("row {i} contains a non-finite value")));
            }
            let n = norm(row);
            if n > radius * (1.0 + NORM_TOL) + f64::MIN_POSITIVE {
                return Err(Error::param(format!("row {i} has norm {n} above radius {radius}")));
            }
        }
        Ok(Self { features, labels, dim, radius })
    }

    /// Builds a dataset whose radius is the observed maximum row norm.
    pub fn from_rows(features: Vec<f64>, dim: usize, labels: Vec<i8>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        let radius = features.chunks_exact(dim).map(norm).fold(0.0, f64::max);
        Self::new(features, dim, labels, radius)
    }

    /// Same data with a different declared radius (must still bound every row).
    pub fn with_radius(self, radius: f64) -> Result<Self> {
        Self::new(self.features, self.dim, self.labels, radius)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.features.chunks_exact(self.dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        f64::from(self.labels[i])
    }

    /// Margins `y_i * <w, x_i>` of a linear predictor.
    pub fn linear_scores(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.dim, "weight length must match dimension");
        self.rows()
            .zip(&self.labels)
            .map(|(x, &y)| f64::from(y) * dot(w, x))
            .collect()
    }

    /// Margins `y_i * h(x_i)` of an arbitrary real-valued hypothesis.
    pub fn scores_with(&self, h: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.rows().zip(&self.labels).map(|(x, &y)| f64::from(y) * h(x)).collect()
    }

    /// Copy with row `i` replaced; the radius is kept.
    pub fn replace_row(&self, i: usize, x: &[f64], y: i8) -> Result<Self> {
        if x.len() != self.dim {
            return Err(Error::param("replacement row has the wrong dimension"));
        }
        let mut features = self.features.clone();
        features[i * self.dim..(i + 1) * self.dim].copy_from_slice(x);
        let mut labels = self.labels.clone();
        labels[i] = y;
        Self::new(features, self.dim, labels, self.radius)
    }
}

/// Read access to labeled rows, implemented by [`Dataset`] and by lazily mapped feature sets.
pub trait FeatureRows: Sync {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    /// Declared bound on every row norm.
    fn radius(&self) -> f64;
    fn label_sign(&self, i: usize) -> i8;
    /// Writes row `i` into `out` (length `dim()`).
    fn row_into(&self, i: usize, out: &mut [f64]);
}

impl FeatureRows for Dataset {
    fn len(&self) -> usize {
        self.labels.len()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn radius(&self) -> f64 {
        self.radius
    }
    fn label_sign(&self, i: usize) -> i8 {
        self.labels[i]
    }
    fn row_into(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(i));
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

// ===========================================================================
// Synthetic generators
// ===========================================================================

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticKind {
    /// Two balls of radius `spread` centred at `±(separation/2)·u` for a random unit `u`.
    TwoClusterSeparable { dim: usize, separation: f64, spread: f64 },
    /// Points whose projection on a hidden unit direction is at least `margin` in
    /// magnitude, with labels flipped independently with probability `flip_prob`.
    NoisyMargin { dim: usize, margin: f64, flip_prob: f64 },
    /// The one-dimensional four-atom distribution whose hinge minimizer is `1/gamma`.
    AppendixE { gamma: f64, r: f64 },
    /// Label `+1` on the sphere of radius `inner`, `-1` on the sphere of radius `outer`,
    /// each radius perturbed by uniform noise in `[-noise, noise]`.
    Concentric { dim: usize, inner: f64, outer: f64, noise: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub m: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn appendix_e(gamma: f64, m: usize, seed: u64) -> Self {
        Self { kind: SyntheticKind::AppendixE { gamma, r: 1.0 }, m, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::param("m must be at least 1"));
        }
        match self.kind {
            SyntheticKind::TwoClusterSeparable { dim, separation, spread } => {
                if dim == 0 || !(separation >= 0.0) || !(spread >= 0.0) {
                    return Err(Error::param("two_cluster_separable needs dim >= 1, separation >= 0, spread >= 0"));
                }
            }
            SyntheticKind::NoisyMargin { dim, margin, flip_prob } => {
                if dim < 2 || !(0.0..=0.5).contains(&margin) || !(0.0..=1.0).contains(&flip_prob) {
                    return Err(Error::param("noisy_margin needs dim >= 2, margin in [0, 0.5], flip_prob in [0, 1]"));
                }
            }
            SyntheticKind::Concentric { dim, inner, outer, noise } => {
                if dim == 0 || !(inner >= 0.0 && outer > inner && noise >= 0.0 && noise < inner.max(outer - inner)) {
                    return Err(Error::param("concentric needs dim >= 1, 0 <= inner < outer and a small noise"));
                }
            }
            SyntheticKind::AppendixE { gamma, r } => {
                if !(gamma > 0.0 && gamma < r && r.is_finite()) {
                    return Err(Error::param(format!("appendix_e requires 0 < gamma < r, got gamma={gamma}, r={r}")));
                }
            }
        }
        Ok(())
    }
}

/// The four atoms `(x, y, mass)` of the one-dimensional example.
pub fn appendix_e_atoms(gamma: f64, r: f64) -> [(f64, i8, f64); 4] {
    let alpha = gamma / 2.0;
    [
        (r, -1, alpha / 2.0),
        (-r, 1, alpha / 2.0),
        (gamma, 1, (1.0 - alpha) / 2.0),
        (-gamma, -1, (1.0 - alpha) / 2.0),
    ]
}

fn random_unit(dim: usize, rng: &mut rng::DpRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform draw from the unit ball in `R^dim`.
fn unit_ball_point(dim: usize, rng: &mut rng::DpRng) -> Vec<f64> {
    let dir = random_unit(dim, rng);
    let radius = rng.random::<f64>().powf(1.0 / dim as f64);
    dir.into_iter().map(|x| x * radius).collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, rng::tag::DATA);
    let m = spec.m;
    match spec.kind {
        SyntheticKind::AppendixE { gamma, r } => {
            let atoms = appendix_e_atoms(gamma, r);
            let mut features = Vec::with_capacity(m);
            let mut labels = Vec::with_capacity(m);
            for _ in 0..m {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = atoms[3];
                for atom in atoms {
                    acc += atom.2;
                    if u < acc {
                        pick = atom;
                        break;
                    }
                }
                features.push(pick.0);
                labels.push(pick.1);
            }
            Dataset::new(features, 1, labels, r)
        }
        SyntheticKind::TwoClusterSeparable { dim, separation, spread } => {
            let u = random_unit(dim, &mut rng);
            let mut features = Vec::with_capacity(m * dim);
            let mut labels = Vec::with_capacity(m);
            for _ in 0..m {
                let y: i8 = if rng.random::<bool>() { 1 } else { -1 };
                let z = unit_ball_point(dim, &mut rng);
                let c = f64::from(y) * separation / 2.0;
                features.extend(u.iter().zip(&z).map(|(ui, zi)| c * ui + spread * zi));
                labels.push(y);
            }
            Dataset::from_rows(features, dim, labels)
        }
        SyntheticKind::NoisyMargin { dim, margin, flip_prob } => {
            let u = random_unit(dim, &mut rng);
            let mut features = Vec::with_capacity(m * dim);
            let mut labels = Vec::with_capacity(m);
            for _ in 0..m {
                let y: i8 = if rng.random::<bool>() { 1 } else { -1 };
                let along = f64::from(y) * (margin + 0.5 * rng.random::<f64>());
                // Random direction orthogonal to u, scaled to length in [0, 0.8].
                let mut g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let proj = dot(&g, &u);
                g.iter_mut().zip(&u).for_each(|(gi, ui)| *gi -= proj * ui);
                let gn = norm(&g).max(1e-300);
                let len = 0.8 * rng.random::<f64>();
                features.extend(u.iter().zip(&g).map(|(ui, gi)| along * ui + len * gi / gn));
                let flip = rng.random::<f64>() < flip_prob;
                labels.push(if flip { -y } else { y });
            }
            Dataset::from_rows(features, dim, labels)
        }
        SyntheticKind::Concentric { dim, inner, outer, noise } => {
            let mut features = Vec::with_capacity(m * dim);
            let mut labels = Vec::with_capacity(m);
            for _ in 0..m {
                let y: i8 = if rng.random::<bool>() { 1 } else { -1 };
                let base = if y > 0 { inner } else { outer };
                let radius = (base + noise * (2.0 * rng.random::<f64>() - 1.0)).max(0.0);
                features.extend(random_unit(dim, &mut rng).into_iter().map(|x| x * radius));
                labels.push(y);
            }
            Dataset::from_rows(features, dim, labels)
        }
    }
}

// ===========================================================================
// File I/O
// ===========================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Libsvm,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "libsvm" => Ok(Format::Libsvm),
            other => Err(Error::param(format!("unknown dataset format '{other}'"))),
        }
    }
}

fn parse_label(tok: &str, line: usize) -> Result<i8> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("label '{tok}' is not numeric") })?;
    if v == 1.0 {
        Ok(1)
    } else if v == -1.0 {
        Ok(-1)
    } else {
        Err(Error::Parse { line, msg: format!("label {v} is not +1 or -1") })
    }
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("value '{tok}' is not numeric") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("value '{tok}' is not finite") });
    }
    Ok(v)
}

/// Parses CSV text: label in the first column, features after it.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim: Option<usize> = None;
    let mut first_content = true;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split(',').collect();
        if first_content {
            first_content = false;
            if toks.iter().any(|t| t.trim().parse::<f64>().is_err()) {
                continue; // header row
            }
        }
        if toks.len() < 2 {
            return Err(Error::Parse { line, msg: "row needs a label and at least one feature".into() });
        }
        match dim {
            None => dim = Some(toks.len() - 1),
            Some(d) if d != toks.len() - 1 => {
                return Err(Error::Parse {
                    line,
                    msg: format!("row has {} features, expected {d}", toks.len() - 1),
                })
            }
            _ => {}
        }
        labels.push(parse_label(toks[0], line)?);
        for t in &toks[1..] {
            features.push(parse_value(t, line)?);
        }
    }
    let dim = dim.ok_or_else(|| Error::param("dataset file contains no rows"))?;
    Dataset::from_rows(features, dim, labels)
}

/// Parses LIBSVM text (`label idx:value ...`, 1-based indices). The dimension is
/// `dim` when given, otherwise the largest index seen.
pub fn parse_libsvm(text: &str, dim: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.split('#').next().unwrap_or("").trim();
        if raw.is_empty() {
            continue;
        }
        let mut toks = raw.split_whitespace();
        labels.push(parse_label(toks.next().unwrap_or(""), line)?);
        let mut row = Vec::new();
        for tok in toks {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse { line, msg: format!("entry '{tok}' is not index:value") })?;
            let i: usize = i
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("index '{i}' is not a positive integer") })?;
            if i == 0 {
                return Err(Error::Parse { line, msg: "indices are 1-based".into() });
            }
            if let Some(d) = dim {
                if i > d {
                    return Err(Error::Parse { line, msg: format!("index {i} exceeds dimension {d}") });
                }
            }
            max_index = max_index.max(i);
            row.push((i - 1, parse_value(v, line)?));
        }
        rows.push(row);
    }
    let d = dim.unwrap_or(max_index).max(1);
    let mut features = vec![0.0; rows.len() * d];
    for (r, row) in rows.iter().enumerate() {
        for &(i, v) in row {
            features[r * d + i] = v;
        }
    }
    Dataset::from_rows(features, d, labels)
}

pub fn to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for (x, &y) in data.rows().zip(data.labels()) {
        let _ = write!(out, "{y}");
        for v in x {
            let _ = write!(out, ",{v:e}");
        }
        out.push('\n');
    }
    out
}

pub fn to_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for (x, &y) in data.rows().zip(data.labels()) {
        let _ = write!(out, "{y}");
        for (i, v) in x.iter().enumerate() {
            if *v != 0.0 {
                let _ = write!(out, " {}:{v:e}", i + 1);
            }
        }
        out.push('\n');
    }
    out
}

pub fn load_dataset(path: &Path, format: Format) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    match format {
        Format::Csv => parse_csv(&text),
        Format::Libsvm => parse_libsvm(&text, None),
    }
}

pub fn save_dataset(data: &Dataset, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(data),
        Format::Libsvm => to_libsvm(data),
    };
    std::fs::write(path, text)?;
    Ok(())
}
