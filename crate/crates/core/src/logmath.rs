//! Log-domain helpers.

/// ln(e^a + e^b) without overflow; handles `-inf` operands.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Closed-form Dirichlet evidence of a counting vector:
/// ln Γ(Σα) − ln Γ(Σ(n+α)) + Σ_a [ln Γ(n_a+α_a) − ln Γ(α_a)].
pub fn dirichlet_log_evidence(alpha: &[f64], counts: &[f64]) -> f64 {
    let a0: f64 = alpha.iter().sum();
    let n0: f64 = counts.iter().sum();
    let mut out = libm::lgamma(a0) - libm::lgamma(a0 + n0);
    for (&a, &n) in alpha.iter().zip(counts) {
        out += libm::lgamma(n + a) - libm::lgamma(a);
    }
    out
}
