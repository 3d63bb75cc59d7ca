//! Experiment harness: sample test trees, run every predictor over
//! fixed-length windows, and aggregate per-position log-loss curves.

mod verify;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::Command;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VomcError};
use crate::model::{
    generate_sequence, sample_leaf_distributions, sample_nonctw_leaf_distributions, sample_padding, seeded_rng,
    Alphabet, ContextTree, CtwPrior, Symbol, TreeShape,
};
use crate::predictor::{Episode, PredictorRegistry, PredictorSpec};

pub use verify::{verify, verify_with_golden, SuiteResult, VerifyLevel, VerifyReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    /// Branching-process shapes with Dirichlet leaves.
    Ctw,
    /// Maximum order uniform in 1..=3, one zero entry per leaf.
    NonCtw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateUnit {
    Nats,
    Bits,
}

impl RateUnit {
    pub fn scale(self) -> f64 {
        match self {
            RateUnit::Nats => 1.0,
            RateUnit::Bits => 1.0 / std::f64::consts::LN_2,
        }
    }
}

/// Maximum orders drawn for the non-CTW suite.
pub const NONCTW_DEPTHS: std::ops::RangeInclusive<usize> = 1..=3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub prior: PriorKind,
    /// Tree depth bound; also the depth the CTW-family predictors use.
    pub depth: usize,
    pub lambda: f64,
    /// Symmetric Dirichlet parameter.
    pub alpha: f64,
    pub alphabet: usize,
    pub trees: usize,
    pub tree_len: usize,
    pub window: usize,
    pub predictors: Vec<String>,
    pub seed: u64,
    pub unit: RateUnit,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            prior: PriorKind::Ctw,
            depth: 3,
            lambda: 0.15,
            alpha: 0.5,
            alphabet: 3,
            trees: 256,
            tree_len: 5120,
            window: 512,
            predictors: vec!["ctw".into()],
            seed: 0,
            unit: RateUnit::Nats,
        }
    }
}

impl ExperimentConfig {
    pub fn ctw_prior(&self) -> Result<CtwPrior> {
        let alphabet = Alphabet::new(self.alphabet)?;
        CtwPrior::new(alphabet, self.depth, self.lambda, vec![self.alpha; self.alphabet])
    }

    pub fn specs(&self) -> Result<Vec<PredictorSpec>> {
        self.predictors.iter().map(|p| p.parse()).collect()
    }

    pub fn validate(&self, registry: &PredictorRegistry) -> Result<()> {
        let prior = self.ctw_prior()?;
        if self.window == 0 || self.window > self.tree_len {
            return Err(VomcError::InvalidConfig(format!("window {} must be in 1..={}", self.window, self.tree_len)));
        }
        if self.trees == 0 {
            return Err(VomcError::InvalidConfig("no test trees".into()));
        }
        if self.predictors.is_empty() {
            return Err(VomcError::InvalidConfig("no predictors".into()));
        }
        if self.prior == PriorKind::NonCtw && self.depth < *NONCTW_DEPTHS.end() {
            return Err(VomcError::InvalidConfig(format!("non-CTW trees reach depth {}", NONCTW_DEPTHS.end())));
        }
        for spec in self.specs()? {
            registry.context_len(&spec, &prior)?;
        }
        Ok(())
    }

    /// Context length every predictor can start from.
    pub fn padding_len(&self, registry: &PredictorRegistry) -> Result<usize> {
        let prior = self.ctw_prior()?;
        let mut len = self.depth;
        for spec in self.specs()? {
            len = len.max(registry.context_len(&spec, &prior)?);
        }
        Ok(len)
    }

    /// Test tree `k`, its padding and its full sequence.
    pub fn sample_tree(&self, k: usize, padding_len: usize) -> Result<(ContextTree, Vec<Symbol>, Vec<Symbol>)> {
        let prior = self.ctw_prior()?;
        let alphabet = prior.alphabet();
        let mut rng = seeded_rng(self.seed, k as u64);
        let tree = match self.prior {
            PriorKind::Ctw => sample_leaf_distributions(prior.sample_tree(&mut rng), &prior.alpha, &mut rng)?,
            PriorKind::NonCtw => {
                let depth = rng.random_range(NONCTW_DEPTHS);
                let shape = TreeShape::sample(alphabet, depth, self.lambda, &mut rng);
                sample_nonctw_leaf_distributions(shape, &mut rng)?
            }
        };
        let padding = sample_padding(alphabet, padding_len, &mut rng);
        let seq = generate_sequence(&tree, self.tree_len, padding.clone(), &mut rng)?;
        Ok((tree, padding, seq.body))
    }
}

/// Mean per-position loss over every test window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub predictor: String,
    pub unit: RateUnit,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub window_average: f64,
    pub windows: usize,
    /// Node or table reads per prediction.
    pub touches_per_symbol: f64,
    /// Fingerprint of the configuration that produced the curve.
    pub config_id: String,
}

impl RateCurve {
    /// Mean over the first `fraction` of positions.
    pub fn early(&self, fraction: f64) -> f64 {
        let n = ((self.mean.len() as f64 * fraction).ceil() as usize).clamp(1, self.mean.len());
        self.mean[..n].iter().sum::<f64>() / n as f64
    }

    pub fn late(&self, fraction: f64) -> f64 {
        let n = ((self.mean.len() as f64 * fraction).ceil() as usize).clamp(1, self.mean.len());
        self.mean[self.mean.len() - n..].iter().sum::<f64>() / n as f64
    }

    /// Trailing mean over up to `width` positions.
    pub fn moving_average(&self, width: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.mean.len());
        let mut acc = 0.0;
        for (i, v) in self.mean.iter().enumerate() {
            acc += v;
            if i >= width {
                acc -= self.mean[i - width];
            }
            out.push(acc / (i + 1).min(width) as f64);
        }
        out
    }

    /// `position,mean,stderr,moving_average_16`, position counted from 1.
    pub fn to_csv(&self) -> String {
        let ma = self.moving_average(16);
        let mut out = String::from("position,mean,stderr,moving_average_16\n");
        for i in 0..self.mean.len() {
            let _ = writeln!(out, "{},{:.10},{:.10},{:.10}", i + 1, self.mean[i], self.stderr[i], ma[i]);
        }
        out
    }

    pub fn from_csv(predictor: &str, text: &str) -> Result<Self> {
        let mut mean = Vec::new();
        let mut stderr = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| VomcError::Parse(format!("line {}: `{s}`", i + 1)));
            if f.len() < 3 {
                return Err(VomcError::Parse(format!("line {}: expected position,mean,stderr", i + 1)));
            }
            mean.push(parse(f[1])?);
            stderr.push(parse(f[2])?);
        }
        if mean.is_empty() {
            return Err(VomcError::Parse("empty curve".into()));
        }
        let window_average = mean.iter().sum::<f64>() / mean.len() as f64;
        Ok(Self {
            predictor: predictor.to_string(),
            unit: RateUnit::Nats,
            mean,
            stderr,
            window_average,
            windows: 0,
            touches_per_symbol: 0.0,
            config_id: String::new(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub curves: Vec<RateCurve>,
    pub trees_completed: usize,
    /// Mean conditional entropy of the generating trees along the test
    /// windows, in the configured unit.
    pub source_entropy: f64,
    /// First failure, if the run stopped early; curves cover the trees
    /// completed before it.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Default)]
struct TreeTotals {
    sum: Vec<Vec<f64>>,
    sumsq: Vec<Vec<f64>>,
    touches: Vec<u64>,
    windows: usize,
    entropy: f64,
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

fn run_tree(config: &ExperimentConfig, registry: &PredictorRegistry, specs: &[PredictorSpec], k: usize) -> Result<TreeTotals> {
    let prior = config.ctw_prior()?;
    let pad_len = config.padding_len(registry)?;
    let (tree, padding, body) = config.sample_tree(k, pad_len)?;
    let full: Vec<Symbol> = padding.iter().chain(&body).copied().collect();
    let n = config.window;
    let mut t = TreeTotals {
        sum: vec![vec![0.0; n]; specs.len()],
        sumsq: vec![vec![0.0; n]; specs.len()],
        touches: vec![0; specs.len()],
        windows: config.tree_len / n,
        entropy: 0.0,
    };
    let depth = tree.shape().max_depth();
    for w in 0..t.windows {
        let start = pad_len + w * n;
        let window_pad = &full[start - pad_len..start];
        let symbols = &full[start..start + n];
        for (pi, spec) in specs.iter().enumerate() {
            let ep = Episode { prior: &prior, padding: window_pad, source: Some(&tree), window: n };
            let mut pred = registry.start(spec, ep)?;
            for (i, &x) in symbols.iter().enumerate() {
                let p = pred.predict();
                let px = p[x as usize];
                if !(px > 0.0 && px.is_finite()) {
                    return Err(VomcError::InvalidDistribution(format!("{spec} gave p={px} to an observed symbol")));
                }
                let loss = -px.ln();
                t.sum[pi][i] += loss;
                t.sumsq[pi][i] += loss * loss;
                pred.update(x)?;
            }
            t.touches[pi] += pred.node_touches();
        }
        for i in 0..n {
            let ctx: Vec<Symbol> = full[..start + i].iter().rev().take(depth).copied().collect();
            t.entropy += entropy(tree.next_distribution(&ctx)?);
        }
    }
    Ok(t)
}

/// Stable short fingerprint of everything but the predictor list.
fn config_id(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.predictors.clear();
    let text = serde_json::to_string(&c).expect("config serializes");
    // FNV-1a.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Run every predictor on every window of every test tree. Trees run in
/// parallel; totals are reduced in tree order so output is deterministic.
pub fn run_experiment(config: &ExperimentConfig, registry: &PredictorRegistry) -> Result<ExperimentOutput> {
    config.validate(registry)?;
    let specs = config.specs()?;
    let results: Vec<Result<TreeTotals>> =
        (0..config.trees).into_par_iter().map(|k| run_tree(config, registry, &specs, k)).collect();

    let n = config.window;
    let mut total = TreeTotals {
        sum: vec![vec![0.0; n]; specs.len()],
        sumsq: vec![vec![0.0; n]; specs.len()],
        touches: vec![0; specs.len()],
        ..Default::default()
    };
    let mut completed = 0;
    let mut failure = None;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => {
                for p in 0..specs.len() {
                    for i in 0..n {
                        total.sum[p][i] += t.sum[p][i];
                        total.sumsq[p][i] += t.sumsq[p][i];
                    }
                    total.touches[p] += t.touches[p];
                }
                total.windows += t.windows;
                total.entropy += t.entropy;
                completed += 1;
            }
            Err(e) => {
                failure = Some(format!("tree {k}: {e}"));
                break;
            }
        }
    }

    let scale = config.unit.scale();
    let id = config_id(config);
    let w = total.windows.max(1) as f64;
    let curves = specs
        .iter()
        .enumerate()
        .map(|(p, spec)| {
            let mean: Vec<f64> = total.sum[p].iter().map(|s| s / w).collect();
            let stderr = total.sum[p]
                .iter()
                .zip(&total.sumsq[p])
                .map(|(s, q)| {
                    if total.windows < 2 {
                        return 0.0;
                    }
                    let var = ((q - s * s / w) / (w - 1.0)).max(0.0);
                    (var / w).sqrt() * scale
                })
                .collect();
            let mean: Vec<f64> = mean.into_iter().map(|m| m * scale).collect();
            RateCurve {
                predictor: spec.to_string(),
                unit: config.unit,
                window_average: mean.iter().sum::<f64>() / n as f64,
                mean,
                stderr,
                windows: total.windows,
                touches_per_symbol: total.touches[p] as f64 / (w * n as f64),
                config_id: id.clone(),
            }
        })
        .collect();
    Ok(ExperimentOutput {
        config: config.clone(),
        curves,
        trees_completed: completed,
        source_entropy: total.entropy / (w * n as f64) * scale,
        failure,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub predictor: String,
    pub window_average: f64,
    pub early: f64,
    pub late: f64,
    pub touches_per_symbol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub claim: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub orderings: Vec<OrderingCheck>,
}

/// Fraction of positions counted as early or late.
pub const EDGE_FRACTION: f64 = 0.1;
/// Agreement required between the three exact-Bayes predictors.
pub const EQUIVALENCE_TOL: f64 = 1e-6;

/// Window-average and early/late rates per curve, plus the expected
/// orderings among the predictors present.
pub fn compare_predictors(curves: &[RateCurve]) -> Result<Summary> {
    if let Some(first) = curves.first() {
        for c in curves {
            if c.config_id != first.config_id || c.mean.len() != first.mean.len() || c.unit != first.unit {
                return Err(VomcError::ConfigMismatch(format!("`{}` vs `{}`", first.predictor, c.predictor)));
            }
        }
    }
    let rows: Vec<SummaryRow> = curves
        .iter()
        .map(|c| SummaryRow {
            predictor: c.predictor.clone(),
            window_average: c.window_average,
            early: c.early(EDGE_FRACTION),
            late: c.late(EDGE_FRACTION),
            touches_per_symbol: c.touches_per_symbol,
        })
        .collect();
    let find = |name: &str| rows.iter().find(|r| r.predictor == name);
    let mut orderings = Vec::new();
    if let Some(ctw) = find("ctw") {
        for other in ["blend", "syntf"] {
            if let Some(o) = find(other) {
                let pointwise = curves
                    .iter()
                    .find(|c| c.predictor == other)
                    .zip(curves.iter().find(|c| c.predictor == "ctw"))
                    .map(|(a, b)| a.mean.iter().zip(&b.mean).all(|(x, y)| (x - y).abs() <= EQUIVALENCE_TOL))
                    .unwrap_or(false);
                orderings.push(OrderingCheck {
                    claim: format!("{other} matches ctw pointwise within {EQUIVALENCE_TOL:e}"),
                    holds: pointwise && (o.window_average - ctw.window_average).abs() <= EQUIVALENCE_TOL,
                });
            }
        }
        for r in rows.iter().filter(|r| r.predictor.starts_with("ppm")) {
            orderings.push(OrderingCheck {
                claim: format!("{} is worse than ctw early", r.predictor),
                holds: r.early > ctw.early,
            });
            orderings.push(OrderingCheck {
                claim: format!("{} closes its gap to ctw late", r.predictor),
                holds: r.late - ctw.late < r.early - ctw.early,
            });
        }
    }
    if let Some(genie) = find("genie") {
        for r in rows.iter().filter(|r| r.predictor != "genie") {
            orderings.push(OrderingCheck {
                claim: format!("genie is below {}", r.predictor),
                holds: genie.window_average <= r.window_average,
            });
        }
        if let Some(ctw) = find("ctw") {
            orderings.push(OrderingCheck {
                claim: "ctw gap above genie shrinks late".into(),
                holds: ctw.late - genie.late < ctw.early - genie.early,
            });
        }
    }
    Ok(Summary { rows, orderings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonCtwReport {
    pub output: ExperimentOutput,
    /// CTW window-average minus genie window-average.
    pub ctw_gap: f64,
}

/// The mismatched-prior suite: CTW and the genie are always included.
pub fn non_ctw_experiment(config: &ExperimentConfig, registry: &PredictorRegistry) -> Result<NonCtwReport> {
    let mut config = config.clone();
    config.prior = PriorKind::NonCtw;
    config.depth = config.depth.max(*NONCTW_DEPTHS.end());
    for name in ["ctw", "genie"] {
        if !config.predictors.iter().any(|p| p == name) {
            config.predictors.push(name.into());
        }
    }
    let output = run_experiment(&config, registry)?;
    let avg = |name: &str| output.curves.iter().find(|c| c.predictor == name).map(|c| c.window_average);
    let ctw_gap = avg("ctw").zip(avg("genie")).map(|(c, g)| c - g).unwrap_or(f64::NAN);
    Ok(NonCtwReport { output, ctw_gap })
}

pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

/// File-system-safe curve file stem.
pub fn curve_file_name(predictor: &str) -> String {
    let stem: String = predictor.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    format!("curve_{stem}.csv")
}

/// Write curve CSVs, `summary.json` and `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    for c in &output.curves {
        fs::write(dir.join(curve_file_name(&c.predictor)), c.to_csv())?;
    }
    let summary = compare_predictors(&output.curves)?;
    let summary_json = serde_json::json!({
        "config": output.config,
        "unit": output.config.unit,
        "rows": summary.rows,
        "orderings": summary.orderings,
        "source_entropy": output.source_entropy,
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary_json)? + "\n")?;
    let manifest = serde_json::json!({
        "tool": concat!("vomc ", env!("CARGO_PKG_VERSION")),
        "git_describe": git_describe(),
        "seed": output.config.seed,
        "config": output.config,
        "trees_completed": output.trees_completed,
        "failure": output.failure,
        "curves": output.curves.iter().map(|c| curve_file_name(&c.predictor)).collect::<Vec<_>>(),
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(summary)
}
