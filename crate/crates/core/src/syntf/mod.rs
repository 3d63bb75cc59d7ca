//! Exact simulation of the hard-attention transformer that realizes the
//! path-blend predictor with D+2 attention layers.
//!
//! Layer 1 copies the last M = D symbols into every position. Layer 2
//! attaches forward and backward suffix statistics for M' = D+1 depths. A
//! feed-forward block turns those into counts, posterior means and
//! evidence values, and D induction layers walk the path from s_D up to the
//! root, each fetching sibling `ln p^w` values from the latest earlier
//! position whose path went through that sibling.
//!
//! A value fetched that way was computed before the symbol following that
//! position arrived, so it lags the true node state by one observation. The
//! simulator keeps a second, refreshed copy of every path (recomputed once
//! the next symbol is known) and predicts from those; the lagging values are
//! run through the same layers so the difference can be measured.

pub mod ablation;
pub mod layers;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VomcError};
use crate::model::{Alphabet, CtwPrior, SourceSequence, SuffixKey, Symbol};
use crate::stats::CountTable;

pub use ablation::{no_counts_predict, total_counts_predict};
pub use layers::{
    counts_from_statistics, ff_statistics_to_evidence, induction_layer, layer1_context_extension,
    layer2_statistics, output_layer, output_weights, positional, Hidden1, Hidden2, InductionState, Statistics2,
};

/// Which layer-2 features reach the rest of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureVariant {
    /// Forward and backward statistics plus position.
    Full,
    /// Forward statistics only.
    NoCounts,
    /// Forward statistics plus the total count.
    TotalCountsOnly,
    /// Counting vectors of every path suffix supplied directly.
    AllCounts,
}

impl FeatureVariant {
    pub const ALL: [FeatureVariant; 4] = [Self::Full, Self::NoCounts, Self::TotalCountsOnly, Self::AllCounts];

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoCounts => "no-counts",
            Self::TotalCountsOnly => "total-counts-only",
            Self::AllCounts => "all-counts",
        }
    }

    fn uses_induction(self) -> bool {
        matches!(self, Self::Full | Self::AllCounts)
    }
}

impl fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureVariant {
    type Err = VomcError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| VomcError::UnknownVariant(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionConfig {
    pub prior: CtwPrior,
    /// Sequence length the positional encoding is laid out for.
    pub window: usize,
    pub variant: FeatureVariant,
    /// Keep every layer's output for every position.
    pub record_trace: bool,
}

impl ConstructionConfig {
    pub fn new(prior: CtwPrior, window: usize) -> Self {
        Self { prior, window, variant: FeatureVariant::Full, record_trace: false }
    }

    pub fn with_variant(mut self, variant: FeatureVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    /// Heads in the context-extension layer.
    pub fn m(&self) -> usize {
        self.prior.depth
    }

    /// Heads in the statistics layer.
    pub fn m_prime(&self) -> usize {
        self.prior.depth + 1
    }

    pub fn layers(&self) -> usize {
        self.prior.depth + 2
    }
}

/// Every layer's output at one position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub position: usize,
    pub h1: Hidden1,
    pub h2: Hidden2,
    pub a2: Statistics2,
    pub counts: Vec<Vec<f64>>,
    pub unseen_from: Option<usize>,
    /// h3 followed by the output of each induction layer.
    pub hidden: Vec<InductionState>,
    pub prediction: Vec<f64>,
    /// Prediction when siblings carry their lagging values.
    pub stale_prediction: Vec<f64>,
}

/// Lagging-retrieval discrepancy over a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalGap {
    pub retrievals: u64,
    /// Retrievals whose lagging value differed from the current one.
    pub differing: u64,
    pub max_abs: f64,
    pub sum_abs: f64,
    /// Largest |p_stale(a) − p(a)| over positions and symbols.
    pub max_prediction_gap: f64,
}

impl RetrievalGap {
    pub fn mean_abs(&self) -> f64 {
        if self.retrievals == 0 {
            0.0
        } else {
            self.sum_abs / self.retrievals as f64
        }
    }

    fn record(&mut self, stale: f64, current: f64) {
        let d = (stale - current).abs();
        self.retrievals += 1;
        if d > 0.0 {
            self.differing += 1;
        }
        self.sum_abs += d;
        self.max_abs = self.max_abs.max(d);
    }
}

/// Work done for the current position before the next symbol is known.
#[derive(Clone, Debug)]
struct Pending {
    counts: Vec<Vec<f64>>,
    prediction: Vec<f64>,
    /// `ln p^w` of s_{n,0..D} at the time of prediction.
    path_log_pw: Vec<f64>,
    h3: Option<InductionState>,
}

/// Causal, position-by-position simulator.
#[derive(Clone, Debug)]
pub struct SyntfSimulator {
    config: ConstructionConfig,
    alphabet: Alphabet,
    /// Padding and observed symbols, oldest first.
    history: Vec<Symbol>,
    table: CountTable,
    /// Latest position whose path passed through each suffix.
    last_on_path: HashMap<SuffixKey, usize>,
    /// Per position, `ln p^w` along its path before / after the next symbol.
    stale: Vec<Vec<f64>>,
    current: Vec<Vec<f64>>,
    pending: Option<Pending>,
    traces: Vec<LayerTrace>,
    gap: RetrievalGap,
    touches: u64,
}

impl SyntfSimulator {
    pub fn new(config: ConstructionConfig, padding: &[Symbol]) -> Result<Self> {
        let depth = config.prior.depth;
        if padding.len() < depth {
            return Err(VomcError::InsufficientContext { have: padding.len(), need: depth });
        }
        let alphabet = config.prior.alphabet();
        for &s in padding {
            alphabet.check(s as usize)?;
        }
        Ok(Self {
            table: CountTable::new(alphabet, depth, padding)?,
            alphabet,
            history: padding.to_vec(),
            last_on_path: HashMap::new(),
            stale: Vec::new(),
            current: Vec::new(),
            pending: None,
            traces: Vec::new(),
            gap: RetrievalGap::default(),
            touches: 0,
            config,
        })
    }

    pub fn config(&self) -> &ConstructionConfig {
        &self.config
    }

    pub fn position(&self) -> usize {
        self.table.position()
    }

    pub fn traces(&self) -> &[LayerTrace] {
        &self.traces
    }

    pub fn gap(&self) -> &RetrievalGap {
        &self.gap
    }

    pub fn touches(&self) -> u64 {
        self.touches
    }

    fn recent_first(&self, len: usize) -> Vec<Symbol> {
        self.history.iter().rev().take(len).copied().collect()
    }

    fn sibling(&self, key: SuffixKey, len: usize, current: bool) -> f64 {
        match self.last_on_path.get(&key) {
            Some(&j) => {
                if current {
                    self.current[j][len]
                } else {
                    self.stale[j][len]
                }
            }
            None => 0.0,
        }
    }

    /// Run the induction layers from h3, returning every hidden state.
    fn induct(&self, h3: &InductionState, current: bool) -> Vec<InductionState> {
        let prior = &self.config.prior;
        let mut states = vec![h3.clone()];
        while states.last().map_or(0, |h| h.level) > 0 {
            let h = states.last().expect("nonempty");
            let len = h.level;
            states.push(induction_layer(h, prior, &|k| self.sibling(k, len, current)));
        }
        states
    }

    fn path_log_pw(states: &[InductionState]) -> Vec<f64> {
        let mut out = vec![0.0; states.len()];
        for h in states {
            out[h.level] = h.log_pw;
        }
        out
    }

    fn forward_pass(&mut self) -> Pending {
        let prior = self.config.prior.clone();
        let depth = prior.depth;
        let n = self.position();
        let pos = positional(n, self.config.window);
        let recent = self.recent_first(self.config.m() + 1);
        let symbol = match recent.first() {
            Some(&x) => layers::one_hot(self.alphabet, x),
            None => vec![0.0; self.alphabet.size()],
        };
        let h1 = Hidden1 { symbol, pos };
        let h2 = layer1_context_extension(self.alphabet, &recent, self.config.m(), pos);
        let a2 = layer2_statistics(&h2, &self.table, self.config.m_prime());
        self.touches += 2 * self.config.m_prime() as u64;

        let (counts, unseen_from) = match self.config.variant {
            FeatureVariant::AllCounts => {
                let path = self.table.context().path(self.alphabet, depth);
                let counts = path.iter().map(|&k| self.table.counts(k).iter().map(|&c| c as f64).collect()).collect();
                (counts, None)
            }
            _ => counts_from_statistics(&a2, n, depth),
        };

        if !self.config.variant.uses_induction() {
            let prediction = match self.config.variant {
                FeatureVariant::NoCounts => no_counts_predict(&a2, &prior),
                _ => total_counts_predict(&a2, n, &prior),
            };
            if self.config.record_trace {
                self.traces.push(LayerTrace {
                    position: n,
                    h1,
                    h2,
                    a2,
                    counts: counts.clone(),
                    unseen_from,
                    hidden: Vec::new(),
                    stale_prediction: prediction.clone(),
                    prediction: prediction.clone(),
                });
            }
            return Pending { counts, prediction, path_log_pw: Vec::new(), h3: None };
        }

        let h3 = ff_statistics_to_evidence(&a2, &counts, &prior);
        let exact = self.induct(&h3, true);
        let lagging = self.induct(&h3, false);
        self.touches += (depth * (self.alphabet.size() - 1)) as u64;
        let on_path = self.recent_first(depth);
        for l in (1..=depth).rev() {
            let parent = SuffixKey::from_recent_first(self.alphabet, &on_path[..l - 1]);
            for q in 0..self.alphabet.size() as Symbol {
                if q != on_path[l - 1] {
                    let k = parent.child(self.alphabet, q);
                    self.gap.record(self.sibling(k, l, false), self.sibling(k, l, true));
                }
            }
        }
        let last = exact.last().expect("h3 present");
        let prediction = output_layer(last);
        let stale_prediction = output_layer(lagging.last().expect("h3 present"));
        for (a, b) in prediction.iter().zip(&stale_prediction) {
            self.gap.max_prediction_gap = self.gap.max_prediction_gap.max((a - b).abs());
        }
        let path_log_pw = Self::path_log_pw(&exact);
        if self.config.record_trace {
            self.traces.push(LayerTrace {
                position: n,
                h1,
                h2,
                a2,
                counts: counts.clone(),
                unseen_from,
                hidden: exact,
                prediction: prediction.clone(),
                stale_prediction,
            });
        }
        Pending { counts, prediction, path_log_pw, h3: Some(h3) }
    }

    /// Next-symbol distribution at the current position.
    pub fn predict(&mut self) -> Vec<f64> {
        if self.pending.is_none() {
            self.pending = Some(self.forward_pass());
        }
        self.pending.as_ref().expect("just set").prediction.clone()
    }

    /// Observe the next symbol, refreshing the stored path values of the
    /// position it follows.
    pub fn update(&mut self, symbol: Symbol) -> Result<()> {
        self.alphabet.check(symbol as usize)?;
        let pending = match self.pending.take() {
            Some(p) => p,
            None => self.forward_pass(),
        };
        if let Some(h3) = pending.h3 {
            let prior = self.config.prior.clone();
            let counts: Vec<Vec<f64>> = pending
                .counts
                .iter()
                .map(|c| {
                    let mut c = c.clone();
                    c[symbol as usize] += 1.0;
                    c
                })
                .collect();
            let refreshed = ff_statistics_to_evidence(
                &Statistics2 { suffix: h3.suffix.clone(), forward: Vec::new(), backward: Vec::new(), pos: h3.pos },
                &counts,
                &prior,
            );
            let states = self.induct(&refreshed, true);
            self.touches += (prior.depth * (self.alphabet.size() - 1)) as u64;
            let n = self.position();
            for k in self.table.context().path(self.alphabet, prior.depth) {
                self.last_on_path.insert(k, n);
            }
            self.stale.push(pending.path_log_pw);
            self.current.push(Self::path_log_pw(&states));
        }
        self.table.update(symbol)?;
        self.history.push(symbol);
        Ok(())
    }

    pub fn trace_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.traces)?)
    }
}

/// Predictions for every position of a sequence (position n predicts
/// x_{n+1}, n = 0..N-1), plus the simulator for inspection.
pub fn simulate(config: ConstructionConfig, seq: &SourceSequence) -> Result<(Vec<Vec<f64>>, SyntfSimulator)> {
    let mut sim = SyntfSimulator::new(config, &seq.padding)?;
    let mut out = Vec::with_capacity(seq.body.len());
    for &s in &seq.body {
        out.push(sim.predict());
        sim.update(s)?;
    }
    Ok((out, sim))
}

/// Prediction of a reduced-feature network from layer-2 features alone.
/// The variants that keep counts need retrieval across positions and run
/// through [`SyntfSimulator`].
pub fn reduced_feature_predict(variant: FeatureVariant, a2: &Statistics2, position: usize, prior: &CtwPrior) -> Result<Vec<f64>> {
    match variant {
        FeatureVariant::NoCounts => Ok(no_counts_predict(a2, prior)),
        FeatureVariant::TotalCountsOnly => Ok(total_counts_predict(a2, position, prior)),
        v => Err(VomcError::InvalidConfig(format!("variant {v} needs the full simulator"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctw::CtwState;
    use crate::model::seeded_rng;
    use crate::pathblend::BlendPredictor;
    use crate::stats::PathStats;
    use rand::Rng as _;

    fn random_case(seed: u64) -> (CtwPrior, Vec<Symbol>, Vec<Symbol>) {
        let mut rng = seeded_rng(seed, 11);
        let a = 2 + (seed as usize % 3);
        let depth = 1 + (seed as usize / 3) % 4;
        let lambda = [0.05, 0.15, 0.5][seed as usize % 3];
        let prior = CtwPrior::jeffreys(Alphabet::new(a).unwrap(), depth, lambda).unwrap();
        let padding = (0..depth).map(|_| rng.random_range(0..a) as Symbol).collect();
        // Skewed symbols so deep contexts repeat.
        let body = (0..rng.random_range(1..120))
            .map(|_| if rng.random_bool(0.6) { 0 } else { rng.random_range(0..a) as Symbol })
            .collect();
        (prior, padding, body)
    }

    #[test]
    fn variant_names_round_trip() {
        for v in FeatureVariant::ALL {
            assert_eq!(v.name().parse::<FeatureVariant>().unwrap(), v);
        }
        assert!(matches!("half".parse::<FeatureVariant>(), Err(VomcError::UnknownVariant(_))));
    }

    #[test]
    fn matches_ctw_at_every_position() {
        for seed in 0..36 {
            let (prior, padding, body) = random_case(seed);
            let mut sim = SyntfSimulator::new(ConstructionConfig::new(prior.clone(), body.len()), &padding).unwrap();
            let mut ctw = CtwState::new(prior, &padding).unwrap();
            for &s in &body {
                let p = sim.predict();
                let c = ctw.predict();
                for (x, y) in p.iter().zip(&c) {
                    assert!((x - y).abs() < 1e-9, "seed {seed}: {p:?} vs {c:?}");
                }
                sim.update(s).unwrap();
                ctw.update(s).unwrap();
            }
        }
    }

    #[test]
    fn all_counts_variant_is_exact_too() {
        for seed in 0..12 {
            let (prior, padding, body) = random_case(seed);
            let cfg = ConstructionConfig::new(prior.clone(), body.len()).with_variant(FeatureVariant::AllCounts);
            let mut sim = SyntfSimulator::new(cfg, &padding).unwrap();
            let mut ctw = CtwState::new(prior, &padding).unwrap();
            for &s in &body {
                for (x, y) in sim.predict().iter().zip(ctw.predict()) {
                    assert!((x - y).abs() < 1e-9);
                }
                sim.update(s).unwrap();
                ctw.update(s).unwrap();
            }
        }
    }

    #[test]
    fn weights_match_blend_and_trace_layout() {
        for seed in 0..12 {
            let (prior, padding, body) = random_case(seed);
            let depth = prior.depth;
            let cfg = ConstructionConfig::new(prior.clone(), body.len()).with_trace();
            let mut sim = SyntfSimulator::new(cfg, &padding).unwrap();
            let mut blend = BlendPredictor::new(prior.clone(), &padding).unwrap();
            let mut table = CountTable::new(prior.alphabet(), depth, &padding).unwrap();
            for &s in &body {
                sim.predict();
                let t = sim.traces().last().unwrap();
                assert_eq!(t.hidden.len(), depth + 1);
                assert_eq!(t.h2.suffix.len(), depth + 1);
                assert_eq!(t.a2.forward.len(), depth + 1);
                let stats = PathStats::collect(&table, depth);
                assert_eq!(t.a2.forward, stats.forward);
                assert_eq!(t.a2.backward, stats.backward);
                let want: Vec<Vec<f64>> = table
                    .context()
                    .path(prior.alphabet(), depth)
                    .iter()
                    .map(|&k| table.counts(k).iter().map(|&c| c as f64).collect())
                    .collect();
                assert_eq!(t.counts, want);
                let w = output_weights(t.hidden.last().unwrap());
                for (x, y) in w.omega.iter().zip(blend.weights().omega) {
                    assert!((x - y).abs() < 1e-9);
                }
                for block in t.h2.suffix.iter().take(depth) {
                    assert_eq!(block.iter().filter(|&&v| v == 1.0).count(), 1);
                    assert_eq!(block.iter().sum::<f64>(), 1.0);
                }
                sim.update(s).unwrap();
                blend.update(s).unwrap();
                table.update(s).unwrap();
            }
        }
    }

    #[test]
    fn lagging_retrieval_differs_once_siblings_recur() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 2, 0.15).unwrap();
        let body: Vec<Symbol> = (0..200).map(|i| ((i * i + i / 3) % 3) as Symbol).collect();
        let seq = SourceSequence::new(prior.alphabet(), vec![0, 1], body).unwrap();
        let (_, sim) = simulate(ConstructionConfig::new(prior, 200), &seq).unwrap();
        let gap = sim.gap();
        assert!(gap.retrievals > 0);
        assert!(gap.differing > 0 && gap.max_abs > 0.0);
        assert!(gap.max_prediction_gap > 0.0);
    }

    #[test]
    fn reduced_variants_need_no_history() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 1, 0.15).unwrap();
        let table = CountTable::new(Alphabet::TERNARY, 1, &[1]).unwrap();
        let h2 = layer1_context_extension(Alphabet::TERNARY, &[1], 1, positional(0, 8));
        let a2 = layer2_statistics(&h2, &table, 2);
        assert!(reduced_feature_predict(FeatureVariant::NoCounts, &a2, 0, &prior).is_ok());
        assert!(reduced_feature_predict(FeatureVariant::Full, &a2, 0, &prior).is_err());
    }

    #[test]
    fn trace_serializes() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 1, 0.15).unwrap();
        let seq = SourceSequence::new(prior.alphabet(), vec![2], vec![0, 1, 1]).unwrap();
        let (_, sim) = simulate(ConstructionConfig::new(prior, 3).with_trace(), &seq).unwrap();
        let v: serde_json::Value = serde_json::from_str(&sim.trace_json().unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 3);
        assert!(v[0]["hidden"][1]["delta"].is_array());
    }
}
