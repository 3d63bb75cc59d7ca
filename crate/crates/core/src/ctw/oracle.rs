//! Brute-force Bayes mixture over every bounded-depth tree.
//!
//! Independent of the sequential CTW recursion: counts come from classifying
//! each position directly in each enumerated tree and leaf evidence uses the
//! Gamma closed form.

use crate::error::{Result, VomcError};
use crate::logmath::{dirichlet_log_evidence, log_sum_exp};
use crate::model::{Alphabet, CtwPrior, SourceSequence, TreeShape};

pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Clone, Debug)]
pub struct EnumeratedTree {
    pub shape: TreeShape,
    pub log_prior: f64,
}

/// Number of full A-ary trees of depth at most `depth`: t(0) = 1, t(d) = 1 + t(d-1)^A.
/// Saturates at `u128::MAX`.
pub fn tree_count(alphabet: Alphabet, depth: usize) -> u128 {
    let mut t: u128 = 1;
    for _ in 0..depth {
        let mut p: u128 = 1;
        for _ in 0..alphabet.size() {
            p = p.saturating_mul(t);
        }
        t = p.saturating_add(1);
    }
    t
}

/// Every tree in T(D) with its branching-process prior mass.
pub fn enumerate_trees(alphabet: Alphabet, depth: usize, lambda: f64) -> Result<Vec<EnumeratedTree>> {
    let count = tree_count(alphabet, depth);
    if count > ENUMERATION_LIMIT {
        return Err(VomcError::EnumerationTooLarge { count, limit: ENUMERATION_LIMIT });
    }
    let masks = preorder_masks(alphabet.size(), depth);
    masks
        .into_iter()
        .map(|mask| {
            let shape = TreeShape::from_preorder(alphabet, depth, &mask)?;
            let log_prior = shape.prior_log_mass(lambda);
            Ok(EnumeratedTree { shape, log_prior })
        })
        .collect()
}

fn preorder_masks(a: usize, depth: usize) -> Vec<Vec<bool>> {
    if depth == 0 {
        return vec![vec![true]];
    }
    let sub = preorder_masks(a, depth - 1);
    let mut out = vec![vec![true]];
    let mut idx = vec![0usize; a];
    loop {
        let mut mask = vec![false];
        for &i in &idx {
            mask.extend_from_slice(&sub[i]);
        }
        out.push(mask);
        // odometer over A children
        let mut k = a;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sub.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Per-leaf counting vectors of `seq` under `shape`, found by classifying
/// every position's context.
fn leaf_log_evidence(shape: &TreeShape, alpha: &[f64], seq: &SourceSequence) -> Result<f64> {
    let a = shape.alphabet().size();
    let mut counts = vec![vec![0.0; a]; shape.nodes().len()];
    for i in 0..seq.len() {
        let ctx = seq.context_before(i, shape.max_depth());
        counts[shape.classify(&ctx)?][seq.body[i] as usize] += 1.0;
    }
    Ok(shape.leaves().map(|leaf| dirichlet_log_evidence(alpha, &counts[leaf])).sum())
}

/// ln Σ_T π_D(T) Π_{s ∈ L(T)} p^e_s.
pub fn bayes_oracle_logprob(prior: &CtwPrior, seq: &SourceSequence) -> Result<f64> {
    let trees = enumerate_trees(prior.alphabet(), prior.depth, prior.lambda)?;
    let terms = trees
        .iter()
        .map(|t| Ok(t.log_prior + leaf_log_evidence(&t.shape, &prior.alpha, seq)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_sum_exp(terms))
}

/// Posterior mass of the trees in which the depth-`l` suffix of the final
/// context is a leaf, for l = 0..=D.
pub fn posterior_leaf_mass(prior: &CtwPrior, seq: &SourceSequence) -> Result<Vec<f64>> {
    let trees = enumerate_trees(prior.alphabet(), prior.depth, prior.lambda)?;
    let ctx = seq.context_before(seq.len(), prior.depth);
    let mut terms = Vec::with_capacity(trees.len());
    for t in &trees {
        let joint = t.log_prior + leaf_log_evidence(&t.shape, &prior.alpha, seq)?;
        let leaf_depth = t.shape.nodes()[t.shape.classify(&ctx)?].depth;
        terms.push((leaf_depth, joint));
    }
    let evidence = log_sum_exp(terms.iter().map(|t| t.1));
    Ok((0..=prior.depth)
        .map(|l| log_sum_exp(terms.iter().filter(|t| t.0 == l).map(|t| t.1)) - evidence)
        .map(f64::exp)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_counts() {
        let bin = Alphabet::new(2).unwrap();
        let got: Vec<u128> = (0..4).map(|d| tree_count(bin, d)).collect();
        assert_eq!(got, vec![1, 2, 5, 26]);
        assert_eq!(tree_count(Alphabet::TERNARY, 2), 9);
        for d in 0..4 {
            assert_eq!(enumerate_trees(bin, d, 0.3).unwrap().len() as u128, tree_count(bin, d));
        }
        assert_eq!(enumerate_trees(Alphabet::TERNARY, 2, 0.3).unwrap().len(), 9);
    }

    #[test]
    fn enumeration_is_duplicate_free_and_normalized() {
        for (a, d) in [(2, 3), (3, 2), (4, 2), (2, 4)] {
            let alphabet = Alphabet::new(a).unwrap();
            for lambda in [0.05, 0.15, 0.5, 0.9] {
                let trees = enumerate_trees(alphabet, d, lambda).unwrap();
                let total: f64 = trees.iter().map(|t| t.log_prior.exp()).sum();
                assert!((total - 1.0).abs() < 1e-12, "A={a} D={d} λ={lambda}: {total}");
                for (i, t) in trees.iter().enumerate() {
                    assert!(t.shape.validate().is_ok());
                    assert!(trees[..i].iter().all(|u| u.shape != t.shape));
                }
            }
        }
    }

    #[test]
    fn size_guard_refuses() {
        assert!(matches!(
            enumerate_trees(Alphabet::TERNARY, 4, 0.5),
            Err(VomcError::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn single_tree_mixture_is_root_evidence() {
        // λ → 1 leaves only the root-only tree with non-negligible mass.
        let alphabet = Alphabet::TERNARY;
        let prior = CtwPrior::jeffreys(alphabet, 1, 1.0 - 1e-15).unwrap();
        let seq = SourceSequence::new(alphabet, vec![0], vec![0, 0, 1, 2, 2, 2]).unwrap();
        let want = dirichlet_log_evidence(&[0.5; 3], &[2.0, 1.0, 3.0]);
        assert!((bayes_oracle_logprob(&prior, &seq).unwrap() - want).abs() < 1e-9);
    }
}
