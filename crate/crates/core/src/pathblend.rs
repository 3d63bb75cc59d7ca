//! Bayesian next-symbol prediction as a convex blend of per-depth Dirichlet
//! posterior means along the current suffix path.
//!
//! For the path `s_0 = (), s_1, ..., s_D` the prediction is
//! `Σ_l ω_l p_{s_l}` where `p_{s_l}` is the Dirichlet posterior mean at
//! `s_l` and `ω_l` is the posterior mass of trees having `s_l` as a leaf.
//! The weights come from log increments
//!
//! ```text
//! δ_l = ln ω_l − ln ω_{l−1}
//!     = ln(1−λ) − [l = D] ln λ + le(s_l) − le(s_{l−1}) + Σ_q lw(q s_{l−1}) − lw(s_l)
//! ```
//!
//! read off a CTW snapshot of the path and its siblings.

use serde::{Deserialize, Serialize};

use crate::ctw::{CtwState, PathView};
use crate::error::Result;
use crate::logmath::log_sum_exp;
use crate::model::{CtwPrior, Symbol};
use crate::stats::CountTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendWeights {
    /// ω_0..ω_D, summing to one.
    pub omega: Vec<f64>,
    /// δ_1..δ_D (entry `l-1` holds δ_l).
    pub delta: Vec<f64>,
}

/// `(α(a) + n(a)) / Σ_q (α(q) + n(q))`.
pub fn dirichlet_mean(alpha: &[f64], counts: &[f64]) -> Vec<f64> {
    let denom: f64 = alpha.iter().zip(counts).map(|(a, n)| a + n).sum();
    alpha.iter().zip(counts).map(|(a, n)| (a + n) / denom).collect()
}

/// Posterior means at s_0..s_depth of the table's current context.
pub fn depth_predictives(table: &CountTable, alpha: &[f64], depth: usize) -> Vec<Vec<f64>> {
    table
        .context()
        .path(table.alphabet(), depth)
        .into_iter()
        .map(|k| {
            let counts: Vec<f64> = table.counts(k).iter().map(|&c| c as f64).collect();
            dirichlet_mean(alpha, &counts)
        })
        .collect()
}

/// δ_l from the evidence values along one path.
pub fn delta_increment(
    ln_branch: f64,
    ln_lambda: f64,
    at_bound: bool,
    log_pe: (f64, f64),
    children_log_pw: f64,
    log_pw_on_path: f64,
) -> f64 {
    let bound = if at_bound { ln_lambda } else { 0.0 };
    ln_branch - bound + log_pe.1 - log_pe.0 + children_log_pw - log_pw_on_path
}

/// Normalize cumulative sums of δ into ω.
pub fn weights_from_delta(delta: Vec<f64>) -> BlendWeights {
    let mut log_omega = Vec::with_capacity(delta.len() + 1);
    log_omega.push(0.0);
    for d in &delta {
        log_omega.push(log_omega.last().copied().unwrap_or(0.0) + d);
    }
    let norm = log_sum_exp(log_omega.iter().copied());
    let omega = log_omega.iter().map(|w| (w - norm).exp()).collect();
    BlendWeights { omega, delta }
}

pub fn blend_weights(view: &PathView, lambda: f64, depth: usize) -> BlendWeights {
    let ln_lambda = lambda.ln();
    let ln_branch = (1.0 - lambda).ln();
    let delta = (1..=depth)
        .map(|l| {
            delta_increment(
                ln_branch,
                ln_lambda,
                l == depth,
                (view.log_pe[l - 1], view.log_pe[l]),
                view.children_log_pw[l - 1],
                view.log_pw[l],
            )
        })
        .collect();
    weights_from_delta(delta)
}

pub fn blend_predict(weights: &BlendWeights, predictives: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(weights.omega.len(), predictives.len(), "one predictive per depth");
    let a = predictives.first().map_or(0, Vec::len);
    let mut out = vec![0.0; a];
    for (w, p) in weights.omega.iter().zip(predictives) {
        for (o, v) in out.iter_mut().zip(p) {
            *o += w * v;
        }
    }
    out
}

/// Sequential predictor built on the blend: a count table for the posterior
/// means and a CTW state for the evidence values feeding the weights.
#[derive(Clone, Debug)]
pub struct BlendPredictor {
    prior: CtwPrior,
    table: CountTable,
    ctw: CtwState,
    touches: u64,
}

impl BlendPredictor {
    pub fn new(prior: CtwPrior, padding: &[Symbol]) -> Result<Self> {
        Ok(Self {
            table: CountTable::new(prior.alphabet(), prior.depth, padding)?,
            ctw: CtwState::new(prior.clone(), padding)?,
            prior,
            touches: 0,
        })
    }

    pub fn weights(&self) -> BlendWeights {
        blend_weights(&self.ctw.path_view(), self.prior.lambda, self.prior.depth)
    }

    pub fn predictives(&self) -> Vec<Vec<f64>> {
        depth_predictives(&self.table, &self.prior.alpha, self.prior.depth)
    }

    pub fn predict(&mut self) -> Vec<f64> {
        let d = self.prior.depth;
        self.touches += (2 * (d + 1) + d * self.prior.alpha.len()) as u64;
        blend_predict(&self.weights(), &self.predictives())
    }

    pub fn update(&mut self, symbol: Symbol) -> Result<()> {
        self.table.update(symbol)?;
        self.ctw.update(symbol)
    }

    pub fn touches(&self) -> u64 {
        self.touches
    }

    pub fn ctw(&self) -> &CtwState {
        &self.ctw
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctw::posterior_leaf_mass;
    use crate::model::{seeded_rng, Alphabet, SourceSequence};
    use rand::Rng as _;

    #[test]
    fn prior_weights_without_data() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 2, 0.15).unwrap();
        let p = BlendPredictor::new(prior, &[0, 0]).unwrap();
        let w = p.weights();
        for (got, want) in w.omega.iter().zip([0.15, 0.1275, 0.7225]) {
            assert!((got - want).abs() < 1e-12);
        }
        for v in p.predictives() {
            assert_eq!(v, vec![1.0 / 3.0; 3]);
        }
    }

    #[test]
    fn lambda_near_one_puts_mass_at_root() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 3, 1.0 - 1e-12).unwrap();
        let w = BlendPredictor::new(prior, &[0, 1, 2]).unwrap().weights();
        assert!((w.omega[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn omega_increases_with_lambda_at_root() {
        let mut last = 0.0;
        for lambda in [0.05, 0.15, 0.5, 0.9] {
            let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 3, lambda).unwrap();
            let w = BlendPredictor::new(prior, &[0, 1, 2]).unwrap().weights();
            assert!(w.omega[0] > last);
            last = w.omega[0];
        }
    }

    #[test]
    fn dirichlet_mean_example() {
        let m = dirichlet_mean(&[0.5; 3], &[2.0, 0.0, 0.0]);
        assert_eq!(m, vec![2.5 / 3.5, 0.5 / 3.5, 0.5 / 3.5]);
    }

    #[test]
    fn constant_predictives_pass_through() {
        let w = weights_from_delta(vec![0.3, -1.2, 2.0]);
        let v = vec![0.1, 0.6, 0.3];
        let out = blend_predict(&w, &vec![v.clone(); 4]);
        for (o, e) in out.iter().zip(&v) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    #[test]
    fn log_omega_steps_equal_delta() {
        let w = weights_from_delta(vec![0.3, -1.2, 2.0]);
        for l in 1..4 {
            assert!(((w.omega[l] / w.omega[l - 1]).ln() - w.delta[l - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_zero_is_root_posterior_mean() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 0, 0.15).unwrap();
        let mut p = BlendPredictor::new(prior.clone(), &[]).unwrap();
        let mut c = CtwState::new(prior, &[]).unwrap();
        for s in [0u8, 0, 2, 1, 0] {
            p.update(s).unwrap();
            c.update(s).unwrap();
        }
        let got = p.predict();
        let want = dirichlet_mean(&[0.5; 3], &[3.0, 1.0, 1.0]);
        for ((g, w), r) in got.iter().zip(&want).zip(c.predict()) {
            assert!((g - w).abs() < 1e-12 && (g - r).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_ctw_and_posterior_oracle() {
        for seed in 0..40u64 {
            let mut rng = seeded_rng(seed, 5);
            let a = 2 + (seed as usize % 2);
            let depth = 1 + (seed as usize / 2) % 2;
            let lambda = [0.05, 0.15, 0.5, 0.9][seed as usize % 4];
            let alphabet = Alphabet::new(a).unwrap();
            let prior = CtwPrior::jeffreys(alphabet, depth, lambda).unwrap();
            let padding: Vec<Symbol> = (0..depth).map(|_| rng.random_range(0..a) as Symbol).collect();
            let n = rng.random_range(0..25);
            let body: Vec<Symbol> = (0..n).map(|_| rng.random_range(0..a) as Symbol).collect();
            let mut blend = BlendPredictor::new(prior.clone(), &padding).unwrap();
            let mut ctw = CtwState::new(prior.clone(), &padding).unwrap();
            for &s in &body {
                blend.update(s).unwrap();
                ctw.update(s).unwrap();
            }
            for (b, c) in blend.predict().iter().zip(ctw.predict()) {
                assert!((b - c).abs() < 1e-9);
            }
            let seq = SourceSequence::new(alphabet, padding, body).unwrap();
            let oracle = posterior_leaf_mass(&prior, &seq).unwrap();
            for (w, o) in blend.weights().omega.iter().zip(oracle) {
                assert!((w - o).abs() < 1e-9, "seed {seed}: {w} vs {o}");
            }
        }
    }
}
