//! Arithmetic coding driven by any sequential predictor, and a
//! self-describing container holding the predictor configuration.

pub mod container;
pub mod range;

use crate::error::{Result, VomcError};
use crate::model::{CtwPrior, SourceSequence, Symbol};
use crate::predictor::{Episode, PredictorRegistry, PredictorSpec, SequencePredictor};

pub use container::{CodeStream, Header};
pub use range::{RangeDecoder, RangeEncoder};

/// Frequency total used for every symbol.
pub const FREQ_BITS: u32 = 16;
pub const FREQ_TOTAL: u32 = 1 << FREQ_BITS;

/// Integer frequencies summing to [`FREQ_TOTAL`], each at least one.
/// Leftover units go to the largest fractional parts, lowest index first on
/// ties, so encoder and decoder agree bit for bit.
pub fn quantize(p: &[f64]) -> Result<Vec<u32>> {
    let a = p.len();
    if a < 2 || a > FREQ_TOTAL as usize / 2 {
        return Err(VomcError::InvalidDistribution(format!("{a} symbols")));
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(VomcError::InvalidDistribution(format!("{p:?}")));
    }
    let spare = (FREQ_TOTAL - a as u32) as f64;
    let scaled: Vec<f64> = p.iter().map(|v| v / sum * spare).collect();
    let mut freq: Vec<u32> = scaled.iter().map(|s| 1 + s.floor() as u32).collect();
    let assigned: u32 = freq.iter().sum();
    let mut left = FREQ_TOTAL.checked_sub(assigned).expect("floors never exceed the total");
    let mut order: Vec<usize> = (0..a).collect();
    order.sort_by(|&i, &j| {
        let (fi, fj) = (scaled[i] - scaled[i].floor(), scaled[j] - scaled[j].floor());
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        freq[i] += 1;
        left -= 1;
    }
    if let Some(z) = freq.iter().position(|&f| f == 0) {
        return Err(VomcError::ZeroFrequency(z));
    }
    Ok(freq)
}

fn cumulative(freq: &[u32], symbol: usize) -> u32 {
    freq[..symbol].iter().sum()
}

/// Bits implied by a log-probability in nats.
pub fn ideal_code_length(log_prob_nats: f64) -> f64 {
    -log_prob_nats / std::f64::consts::LN_2
}

/// Code `body` with a running predictor; returns the payload and the
/// quantized code length in bits.
pub fn encode_with(body: &[Symbol], predictor: &mut dyn SequencePredictor) -> Result<(Vec<u8>, f64)> {
    let mut enc = RangeEncoder::new();
    let mut bits = 0.0;
    for &s in body {
        let freq = quantize(&predictor.predict())?;
        let x = s as usize;
        if x >= freq.len() {
            return Err(VomcError::SymbolOutOfRange { symbol: x, alphabet: freq.len() });
        }
        enc.encode(cumulative(&freq, x), freq[x], FREQ_TOTAL);
        bits += (FREQ_TOTAL as f64 / freq[x] as f64).log2();
        predictor.update(s)?;
    }
    Ok((enc.finish(), bits))
}

pub fn decode_with(payload: &[u8], len: usize, predictor: &mut dyn SequencePredictor) -> Result<Vec<Symbol>> {
    let mut dec = RangeDecoder::new(payload);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let freq = quantize(&predictor.predict())?;
        let t = dec.target(FREQ_TOTAL);
        let mut cum = 0;
        let mut x = 0;
        while cum + freq[x] <= t {
            cum += freq[x];
            x += 1;
        }
        dec.consume(cum, freq[x], FREQ_TOTAL)?;
        predictor.update(x as Symbol)?;
        out.push(x as Symbol);
    }
    Ok(out)
}

/// Compress a sequence with a registered predictor. The padding stored is
/// the last `context_len` symbols of the sequence's padding.
pub fn encode(seq: &SourceSequence, spec: &PredictorSpec, prior: &CtwPrior, registry: &PredictorRegistry) -> Result<CodeStream> {
    let id = registry.container_id(spec)?;
    let need = registry.context_len(spec, prior)?;
    if seq.padding.len() < need {
        return Err(VomcError::InsufficientContext { have: seq.padding.len(), need });
    }
    // The depth field records the context length the predictor uses.
    let depth = u8::try_from(need).map_err(|_| VomcError::InvalidConfig(format!("depth {need} exceeds 255")))?;
    let len = u32::try_from(seq.len()).map_err(|_| VomcError::InvalidConfig("sequence longer than 2^32-1".into()))?;
    let padding = seq.padding[seq.padding.len() - need..].to_vec();
    let header = Header {
        version: container::VERSION,
        alphabet: seq.alphabet,
        predictor_id: id,
        depth,
        lambda: prior.lambda,
        alpha: prior.alpha.clone(),
        len,
        padding,
    };
    let stored_prior = header.prior()?;
    let mut predictor = registry.start(
        &registry.spec_for_id(id)?,
        Episode { prior: &stored_prior, padding: &header.padding, source: None, window: seq.len() },
    )?;
    let (payload, _) = encode_with(&seq.body, predictor.as_mut())?;
    Ok(CodeStream { header, payload })
}

/// Rebuild the predictor named in the header and decode.
pub fn decode(stream: &CodeStream, registry: &PredictorRegistry) -> Result<SourceSequence> {
    let h = &stream.header;
    let prior = h.prior()?;
    let spec = registry.spec_for_id(h.predictor_id)?;
    let len = h.len as usize;
    let mut predictor = registry.start(&spec, Episode { prior: &prior, padding: &h.padding, source: None, window: len })?;
    let body = decode_with(&stream.payload, len, predictor.as_mut())?;
    SourceSequence::new(h.alphabet, h.padding.clone(), body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctw::CtwState;
    use crate::model::{seeded_rng, Alphabet};
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn quantize_floors_and_sums() {
        let f = quantize(&[1.0 - 1e-12, 1e-12, 0.0]).unwrap();
        assert_eq!(f.iter().sum::<u32>(), FREQ_TOTAL);
        assert_eq!(&f[1..], &[1, 1]);
        assert_eq!(quantize(&[0.5, 0.5]).unwrap(), vec![1 << 15, 1 << 15]);
        assert!(quantize(&[0.5, 0.6]).is_err());
        assert!(quantize(&[f64::NAN, 1.0]).is_err());
        assert!(quantize(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn quantize_is_valid(raw in prop::collection::vec(0.0f64..1.0, 2..12)) {
            let s: f64 = raw.iter().sum();
            prop_assume!(s > 0.0);
            let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let f = quantize(&p).unwrap();
            prop_assert_eq!(f.iter().sum::<u32>(), FREQ_TOTAL);
            prop_assert!(f.iter().all(|&v| v >= 1));
            for (fi, pi) in f.iter().zip(&p) {
                prop_assert!((*fi as f64 / FREQ_TOTAL as f64 - pi).abs() < 2.0 * p.len() as f64 / FREQ_TOTAL as f64);
            }
        }

        #[test]
        fn ctw_round_trip(body in prop::collection::vec(0u8..3, 0..200), pad in prop::collection::vec(0u8..3, 3)) {
            let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 3, 0.15).unwrap();
            let seq = SourceSequence::new(Alphabet::TERNARY, pad, body).unwrap();
            let reg = PredictorRegistry::default();
            let stream = encode(&seq, &PredictorSpec::new("ctw"), &prior, &reg).unwrap();
            let bytes = stream.to_bytes();
            let back = decode(&CodeStream::from_bytes(&bytes).unwrap(), &reg).unwrap();
            prop_assert_eq!(back.body, seq.body);
            prop_assert_eq!(back.padding, seq.padding);
        }
    }

    #[test]
    fn uniform_binary_costs_one_bit_per_symbol() {
        let mut rng = seeded_rng(3, 0);
        let body: Vec<Symbol> = (0..1024).map(|_| rng.random_range(0..2)).collect();
        let prior = CtwPrior::jeffreys(Alphabet::new(2).unwrap(), 0, 0.5).unwrap();
        let seq = SourceSequence::new(prior.alphabet(), vec![], body).unwrap();
        let reg = PredictorRegistry::default();
        let stream = encode(&seq, &PredictorSpec::new("uniform"), &prior, &reg).unwrap();
        let bits = 8 * stream.payload.len();
        assert!((992..=1056).contains(&bits), "{bits}");
        assert_eq!(decode(&stream, &reg).unwrap().body, seq.body);
    }

    #[test]
    fn payload_within_32_bits_of_ctw_code_length() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 3, 0.15).unwrap();
        let reg = PredictorRegistry::default();
        for seed in 0..8 {
            let mut rng = seeded_rng(seed, 1);
            let tree = crate::model::sample_leaf_distributions(prior.sample_tree(&mut rng), &prior.alpha, &mut rng).unwrap();
            let pad = crate::model::sample_padding(prior.alphabet(), 3, &mut rng);
            let seq = crate::model::generate_sequence(&tree, 512, pad.clone(), &mut rng).unwrap();
            let mut ctw = CtwState::new(prior.clone(), &pad).unwrap();
            for &s in &seq.body {
                ctw.update(s).unwrap();
            }
            let ideal = ideal_code_length(ctw.sequence_logprob());
            let stream = encode(&seq, &PredictorSpec::new("ctw"), &prior, &reg).unwrap();
            let bits = (8 * stream.payload.len()) as f64;
            assert!(bits <= ideal + 32.0, "seed {seed}: {bits} vs {ideal}");
        }
    }

    #[test]
    fn mismatched_prior_decodes_differently() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 2, 0.15).unwrap();
        let body: Vec<Symbol> = (0..300).map(|i| ((i * i) % 3) as Symbol).collect();
        let seq = SourceSequence::new(Alphabet::TERNARY, vec![0, 0], body).unwrap();
        let reg = PredictorRegistry::default();
        let mut stream = encode(&seq, &PredictorSpec::new("ctw"), &prior, &reg).unwrap();
        stream.header.lambda = 0.6;
        // A diverging decoder either emits other symbols or runs off the payload.
        match decode(&stream, &reg) {
            Ok(back) => assert_ne!(back.body, seq.body),
            Err(e) => assert!(matches!(e, VomcError::Truncated(_))),
        }
        stream.header.lambda = 0.15;
        stream.header.alpha = vec![2.0; 3];
        let other = decode(&stream, &reg).map(|s| s.body).ok();
        assert_ne!(other, Some(seq.body.clone()));
    }

    #[test]
    fn empty_and_unstorable() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 1, 0.15).unwrap();
        let reg = PredictorRegistry::default();
        let seq = SourceSequence::new(Alphabet::TERNARY, vec![1], vec![]).unwrap();
        for name in ["uniform", "ctw", "blend", "ppm", "syntf"] {
            let stream = encode(&seq, &name.parse().unwrap(), &prior, &reg).unwrap();
            let back = decode(&CodeStream::from_bytes(&stream.to_bytes()).unwrap(), &reg).unwrap();
            assert!(back.body.is_empty());
        }
        assert!(encode(&seq, &PredictorSpec::new("genie"), &prior, &reg).is_err());
    }

    #[test]
    fn every_storable_predictor_round_trips() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 2, 0.15).unwrap();
        let reg = PredictorRegistry::default();
        let body: Vec<Symbol> = (0..400).map(|i| ((i / 3 + i % 5) % 3) as Symbol).collect();
        let seq = SourceSequence::new(Alphabet::TERNARY, vec![2, 1, 0, 0], body).unwrap();
        for name in ["uniform", "ctw", "blend", "ppm", "ppm:4", "syntf"] {
            let stream = encode(&seq, &name.parse().unwrap(), &prior, &reg).unwrap();
            let back = decode(&stream, &reg).unwrap();
            assert_eq!(back.body, seq.body, "{name}");
        }
    }
}
