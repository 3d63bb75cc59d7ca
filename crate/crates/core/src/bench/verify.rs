//! Cross-module equivalence and golden suites behind `vomc verify`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::coder::{self, CodeStream};
use crate::ctw::{bayes_oracle_logprob, ctw_sequence_logprob, posterior_leaf_mass, CtwState};
use crate::error::VomcError;
use crate::model::{seeded_rng, Alphabet, CtwPrior, Rng, SourceSequence, Symbol};
use crate::pathblend::BlendPredictor;
use crate::ppm::PpmPredictor;
use crate::predictor::{PredictorRegistry, PredictorSpec};
use crate::stats::{reconstruct_counts, CountTable, PathStats};
use crate::syntf::{ConstructionConfig, SyntfSimulator};

const GOLDEN_PPM: &str = include_str!("../../golden/ppm_counts.csv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyLevel {
    Quick,
    Full,
}

impl FromStr for VerifyLevel {
    type Err = VomcError;

    fn from_str(s: &str) -> Result<Self, VomcError> {
        match s {
            "quick" => Ok(Self::Quick),
            "full" => Ok(Self::Full),
            _ => Err(VomcError::Parse(format!("verify level `{s}` (quick|full)"))),
        }
    }
}

impl fmt::Display for VerifyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Quick => "quick",
            Self::Full => "full",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: VerifyLevel,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect()
    }
}

type SuiteOutcome = Result<String, String>;

fn random_symbols(rng: &mut Rng, a: usize, n: usize) -> Vec<Symbol> {
    (0..n).map(|_| rng.random_range(0..a) as Symbol).collect()
}

fn random_prior(rng: &mut Rng, alphabets: &[usize], max_depth: usize, lambdas: &[f64]) -> CtwPrior {
    let a = alphabets[rng.random_range(0..alphabets.len())];
    let depth = rng.random_range(1..=max_depth);
    let lambda = lambdas[rng.random_range(0..lambdas.len())];
    CtwPrior::jeffreys(Alphabet::new(a).expect("small alphabet"), depth, lambda).expect("valid prior")
}

fn ctw_oracle(cases: usize) -> SuiteOutcome {
    let mut worst = 0.0f64;
    for c in 0..cases {
        let mut rng = seeded_rng(101, c as u64);
        let prior = random_prior(&mut rng, &[2, 3], 2, &[0.05, 0.15, 0.5]);
        let a = prior.alphabet().size();
        let n = rng.random_range(0..=50);
        let seq = SourceSequence::new(prior.alphabet(), random_symbols(&mut rng, a, prior.depth), random_symbols(&mut rng, a, n))
            .map_err(|e| e.to_string())?;
        let got = ctw_sequence_logprob(&prior, &seq).map_err(|e| e.to_string())?;
        let want = bayes_oracle_logprob(&prior, &seq).map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs());
        if (got - want).abs() > 1e-9 {
            return Err(format!("case {c}: ctw {got} vs oracle {want}"));
        }
    }
    Ok(format!("{cases} cases, max |Δ log p| = {worst:.2e}"))
}

fn blend_identity(cases: usize, max_len: usize) -> SuiteOutcome {
    let mut worst = 0.0f64;
    let mut enumerated = 0;
    for c in 0..cases {
        let mut rng = seeded_rng(202, c as u64);
        let prior = random_prior(&mut rng, &[2, 3], 4, &[0.05, 0.15, 0.5, 0.9]);
        let a = prior.alphabet().size();
        let pad = random_symbols(&mut rng, a, prior.depth);
        let n = rng.random_range(0..=max_len);
        let body = random_symbols(&mut rng, a, n);
        let mut blend = BlendPredictor::new(prior.clone(), &pad).map_err(|e| e.to_string())?;
        let mut ctw = CtwState::new(prior.clone(), &pad).map_err(|e| e.to_string())?;
        for &s in &body {
            blend.update(s).map_err(|e| e.to_string())?;
            ctw.update(s).map_err(|e| e.to_string())?;
        }
        for (x, y) in blend.predict().iter().zip(ctw.predict()) {
            worst = worst.max((x - y).abs());
            if (x - y).abs() > 1e-9 {
                return Err(format!("case {c}: blend {x} vs ctw {y}"));
            }
        }
        if prior.depth <= 2 && n <= 60 {
            let seq = SourceSequence::new(prior.alphabet(), pad, body).map_err(|e| e.to_string())?;
            if let Ok(mass) = posterior_leaf_mass(&prior, &seq) {
                enumerated += 1;
                for (w, m) in blend.weights().omega.iter().zip(mass) {
                    if (w - m).abs() > 1e-9 {
                        return Err(format!("case {c}: ω {w} vs posterior mass {m}"));
                    }
                }
            }
        }
    }
    Ok(format!("{cases} cases ({enumerated} against enumeration), max |Δp| = {worst:.2e}"))
}

fn syntf_equivalence(sequences: usize, len: usize) -> SuiteOutcome {
    let mut worst = 0.0f64;
    for c in 0..sequences {
        let mut rng = seeded_rng(303, c as u64);
        let prior = random_prior(&mut rng, &[3], 3, &[0.15, 0.5]);
        let pad = random_symbols(&mut rng, 3, prior.depth);
        let tree = crate::model::sample_leaf_distributions(prior.sample_tree(&mut rng), &prior.alpha, &mut rng)
            .map_err(|e| e.to_string())?;
        let seq = crate::model::generate_sequence(&tree, len, pad.clone(), &mut rng).map_err(|e| e.to_string())?;
        let mut sim = SyntfSimulator::new(ConstructionConfig::new(prior.clone(), len), &pad).map_err(|e| e.to_string())?;
        let mut ctw = CtwState::new(prior, &pad).map_err(|e| e.to_string())?;
        for (i, &s) in seq.body.iter().enumerate() {
            for (x, y) in sim.predict().iter().zip(ctw.predict()) {
                worst = worst.max((x - y).abs());
                if (x - y).abs() > 1e-6 {
                    return Err(format!("sequence {c} position {i}: {x} vs {y}"));
                }
            }
            sim.update(s).map_err(|e| e.to_string())?;
            ctw.update(s).map_err(|e| e.to_string())?;
        }
    }
    Ok(format!("{sequences} sequences of {len}, max |Δp| = {worst:.2e}"))
}

fn count_reconstruction(triples: usize) -> SuiteOutcome {
    let mut checked = 0;
    for c in 0..triples {
        let mut rng = seeded_rng(404, c as u64);
        let a = rng.random_range(2..=4);
        let depth = rng.random_range(1..=4);
        let alphabet = Alphabet::new(a).expect("small alphabet");
        let pad = random_symbols(&mut rng, a, depth);
        let n = rng.random_range(0..=300);
        // Low-entropy sequences so deep paths are usually visited.
        let body: Vec<Symbol> =
            (0..n).map(|_| if rng.random_bool(0.7) { 0 } else { rng.random_range(0..a) as Symbol }).collect();
        let mut table = CountTable::new(alphabet, depth, &pad).map_err(|e| e.to_string())?;
        for &s in &body {
            table.update(s).map_err(|e| e.to_string())?;
        }
        let stats = PathStats::collect(&table, depth);
        let r = reconstruct_counts(&stats);
        let path = table.context().path(alphabet, depth);
        for (l, (&k, got)) in path.iter().zip(r.rounded()).enumerate() {
            let want: Vec<u64> = table.counts(k).iter().map(|&v| v as u64).collect();
            if got != want {
                return Err(format!("triple {c} depth {l}: {got:?} vs {want:?}"));
            }
        }
        if r.unseen_from.is_none() {
            checked += 1;
        }
    }
    Ok(format!("{triples} triples, {checked} with fully visited paths"))
}

fn ppm_golden(golden: &str) -> SuiteOutcome {
    let mut p = PpmPredictor::new(Alphabet::TERNARY, 2, &[]).map_err(|e| e.to_string())?;
    for s in [0, 1, 2, 0, 1, 1, 2] {
        p.update(s).map_err(|e| e.to_string())?;
    }
    let dump = p.model().dump_csv();
    if dump.trim_end() != golden.trim_end() {
        return Err("count table differs from golden file".into());
    }
    let ctx = [2, 1];
    let (pa, pb) = (p.model().predict(&ctx, 0), p.model().predict(&ctx, 1));
    if pa != 0.5 || pb != 3.0 / 32.0 {
        return Err(format!("p(a|b,c) = {pa}, p(b|b,c) = {pb}"));
    }
    Ok("counts and worked example exact".into())
}

fn coder_roundtrip(cases: usize) -> SuiteOutcome {
    let reg = PredictorRegistry::default();
    let mut worst_slack = f64::INFINITY;
    for c in 0..cases {
        let mut rng = seeded_rng(505, c as u64);
        let prior = random_prior(&mut rng, &[2, 3, 4], 3, &[0.15, 0.5]);
        let a = prior.alphabet().size();
        let pad = random_symbols(&mut rng, a, prior.depth);
        let n = rng.random_range(0..=400);
        let body: Vec<Symbol> =
            (0..n).map(|_| if rng.random_bool(0.5) { 0 } else { rng.random_range(0..a) as Symbol }).collect();
        let seq = SourceSequence::new(prior.alphabet(), pad.clone(), body).map_err(|e| e.to_string())?;
        let spec = PredictorSpec::new(["ctw", "ppm", "blend"][c % 3]);
        let stream = coder::encode(&seq, &spec, &prior, &reg).map_err(|e| e.to_string())?;
        let back = coder::decode(&CodeStream::from_bytes(&stream.to_bytes()).map_err(|e| e.to_string())?, &reg)
            .map_err(|e| e.to_string())?;
        if back.body != seq.body {
            return Err(format!("case {c}: round trip differs"));
        }
        let mut pred = reg
            .start(&spec, crate::predictor::Episode { prior: &prior, padding: &pad, source: None, window: n })
            .map_err(|e| e.to_string())?;
        let (_, quantized_bits) = coder::encode_with(&seq.body, pred.as_mut()).map_err(|e| e.to_string())?;
        let bound = quantized_bits.ceil() + 32.0;
        let bits = 8.0 * stream.payload.len() as f64;
        worst_slack = worst_slack.min(bound - bits);
        if bits > bound {
            return Err(format!("case {c}: {bits} bits > bound {bound}"));
        }
    }
    Ok(format!("{cases} round trips, min slack under bound = {worst_slack} bits"))
}

fn run(name: &str, suite: impl FnOnce() -> SuiteOutcome) -> SuiteResult {
    let t = Instant::now();
    let outcome = suite();
    let seconds = t.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => SuiteResult { name: name.into(), passed: true, detail, seconds },
        Err(detail) => SuiteResult { name: name.into(), passed: false, detail, seconds },
    }
}

/// Run every suite, comparing the PPM table against `golden` instead of the
/// bundled file when given.
pub fn verify_with_golden(level: VerifyLevel, golden: Option<&str>) -> VerifyReport {
    let full = level == VerifyLevel::Full;
    let golden = golden.unwrap_or(GOLDEN_PPM);
    let suites = vec![
        run("ctw-oracle", || ctw_oracle(if full { 100 } else { 30 })),
        run("blend-identity", || blend_identity(if full { 500 } else { 100 }, if full { 512 } else { 128 })),
        run("syntf-equivalence", || syntf_equivalence(if full { 64 } else { 8 }, if full { 512 } else { 128 })),
        run("count-reconstruction", || count_reconstruction(if full { 1000 } else { 200 })),
        run("ppm-golden", || ppm_golden(golden)),
        run("coder-roundtrip", || coder_roundtrip(if full { 1000 } else { 100 })),
    ];
    VerifyReport { level, suites }
}

pub fn verify(level: VerifyLevel) -> VerifyReport {
    verify_with_golden(level, None)
}
