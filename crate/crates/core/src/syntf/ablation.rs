//! Predictors restricted to reduced layer-2 features: what remains when the
//! backward statistics (and possibly the position index) are removed.

use crate::logmath::{dirichlet_log_evidence, log_add};
use crate::model::{CtwPrior, Symbol};
use crate::pathblend::{blend_predict, delta_increment, dirichlet_mean, weights_from_delta};

use super::layers::Statistics2;

fn path_symbols(a2: &Statistics2) -> Vec<Symbol> {
    a2.suffix
        .iter()
        .map_while(|b| b.iter().position(|&v| v == 1.0).map(|a| a as Symbol))
        .collect()
}

/// Forward statistics only. Weights fall back to the prior leaf-depth masses
/// and each depth's predictive treats its empirical conditional as a single
/// pseudo-observation.
pub fn no_counts_predict(a2: &Statistics2, prior: &CtwPrior) -> Vec<f64> {
    let depth = prior.depth;
    let lambda = prior.lambda;
    let mut omega: Vec<f64> = (0..depth).map(|l| lambda * (1.0 - lambda).powi(l as i32)).collect();
    omega.push((1.0 - lambda).powi(depth as i32));
    let predictives: Vec<Vec<f64>> = a2.forward[..=depth].iter().map(|g| dirichlet_mean(&prior.alpha, g)).collect();
    let weights = crate::pathblend::BlendWeights { omega, delta: Vec::new() };
    blend_predict(&weights, &predictives)
}

/// Forward statistics plus the total count `i`. Path counts are estimated
/// by assuming each context symbol was drawn from the unigram frequencies,
/// `n̂_l = g_l · i · Π_{k<l} g_root(x_{i-k})`. Off-path children of each
/// path node are pooled into one pseudo-leaf holding the count surplus, and
/// CTW mixing runs along the path with those leaves.
pub fn total_counts_predict(a2: &Statistics2, position: usize, prior: &CtwPrior) -> Vec<f64> {
    let depth = prior.depth;
    let context = path_symbols(a2);
    let unigram = &a2.forward[0];
    let mut total = position as f64;
    let mut est = Vec::with_capacity(depth + 1);
    for l in 0..=depth {
        if l > 0 {
            total *= unigram[context[l - 1] as usize];
        }
        est.push(a2.forward[l].iter().map(|g| g * total).collect::<Vec<f64>>());
    }
    let alpha = &prior.alpha;
    let log_pe: Vec<f64> = est.iter().map(|c| dirichlet_log_evidence(alpha, c)).collect();
    // Evidence of the pooled siblings below s_l.
    let pooled: Vec<f64> = (0..depth)
        .map(|l| {
            let surplus: Vec<f64> = est[l].iter().zip(&est[l + 1]).map(|(a, b)| (a - b).max(0.0)).collect();
            dirichlet_log_evidence(alpha, &surplus)
        })
        .collect();
    let ln_lambda = prior.lambda.ln();
    let ln_branch = (1.0 - prior.lambda).ln();
    let mut log_pw = vec![0.0; depth + 1];
    log_pw[depth] = log_pe[depth];
    for l in (0..depth).rev() {
        log_pw[l] = log_add(ln_lambda + log_pe[l], ln_branch + log_pw[l + 1] + pooled[l]);
    }
    let delta = (1..=depth)
        .map(|l| {
            let children = log_pw[l] + pooled[l - 1];
            delta_increment(ln_branch, ln_lambda, l == depth, (log_pe[l - 1], log_pe[l]), children, log_pw[l])
        })
        .collect();
    let predictives: Vec<Vec<f64>> = est.iter().map(|c| dirichlet_mean(alpha, c)).collect();
    blend_predict(&weights_from_delta(delta), &predictives)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Alphabet;
    use crate::syntf::layers::{layer1_context_extension, layer2_statistics, positional};
    use crate::stats::CountTable;

    fn features(seq: &[Symbol], padding: &[Symbol], depth: usize) -> (Statistics2, usize) {
        let a = Alphabet::TERNARY;
        let mut t = CountTable::new(a, depth, padding).unwrap();
        let mut hist: Vec<Symbol> = padding.to_vec();
        for &s in seq {
            t.update(s).unwrap();
            hist.push(s);
        }
        let recent: Vec<Symbol> = hist.iter().rev().copied().collect();
        let h2 = layer1_context_extension(a, &recent, depth, positional(seq.len(), 64));
        (layer2_statistics(&h2, &t, depth + 1), seq.len())
    }

    #[test]
    fn outputs_are_distributions() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 2, 0.15).unwrap();
        for n in 0..12 {
            let seq: Vec<Symbol> = (0..n).map(|i| ((i * 7 + 1) % 3) as Symbol).collect();
            let (a2, pos) = features(&seq, &[2, 0], 2);
            for p in [no_counts_predict(&a2, &prior), total_counts_predict(&a2, pos, &prior)] {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(p.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn fresh_state_is_uniform() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 3, 0.15).unwrap();
        let (a2, pos) = features(&[], &[0, 1, 2], 3);
        for p in [no_counts_predict(&a2, &prior), total_counts_predict(&a2, pos, &prior)] {
            for v in p {
                assert!((v - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn total_counts_exact_at_depth_zero() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 0, 0.15).unwrap();
        let (a2, pos) = features(&[0, 0, 1, 0], &[], 0);
        let p = total_counts_predict(&a2, pos, &prior);
        let want = dirichlet_mean(&prior.alpha, &[3.0, 1.0, 0.0]);
        for (g, w) in p.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}
