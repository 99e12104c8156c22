//! Scalar helpers used throughout the scoring code.

use crate::error::{Error, Result};

/// Stable softmax of a logit vector. Max-subtracted so large logits do not
/// overflow; the output sums to one and preserves the argmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of empty vector"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    Ok(out)
}

/// Temperature-scaled log-sum-exp: `T * ln(sum_i exp(x_i / T))`, max-shifted.
pub fn logsumexp(logits: &[f64], temperature: f64) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::invalid("logsumexp of empty vector"));
    }
    if temperature <= 0.0 {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let max = logits
        .iter()
        .map(|v| v / temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&v| (v / temperature - max).exp()).sum();
    Ok(temperature * (sum.ln() + max))
}

/// Shannon entropy of a probability vector, in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum()
}

/// Index of the largest element (first one on ties).
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetric_pairs() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let q = softmax(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        for v in q {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_no_overflow_for_huge_logits() {
        // oracle: exp(x - max)/sum in extended precision; here exactly
        // [1/(1+e^-1000), e^-1000/(1+e^-1000)] = [~1, ~0]
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!(p[0] >= 1.0 - 1e-12);
        assert!(p[1] >= 0.0 && p[1] <= 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[3.0, -1.5, 0.2, 7.7]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn softmax_preserves_argmax() {
        let logits = [0.3, 2.7, -1.0, 2.69];
        let p = softmax(&logits).unwrap();
        assert_eq!(argmax(&logits), argmax(&p));
    }

    #[test]
    fn softmax_empty_is_error() {
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn logsumexp_known_values() {
        assert!((logsumexp(&[0.0, 0.0], 1.0).unwrap() - 2.0f64.ln()).abs() < 1e-12);
        assert!((logsumexp(&[5.0], 1.0).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_matches_direct_summation() {
        // direct summation oracle for ([3, 1, -2], T = 2)
        let direct =
            2.0 * ((3.0f64 / 2.0).exp() + (1.0f64 / 2.0).exp() + (-2.0f64 / 2.0).exp()).ln();
        let got = logsumexp(&[3.0, 1.0, -2.0], 2.0).unwrap();
        assert!((got - direct).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_rejects_nonpositive_temperature() {
        assert!(logsumexp(&[1.0], 0.0).is_err());
        assert!(logsumexp(&[1.0], -2.0).is_err());
    }

    #[test]
    fn logsumexp_dominates_max() {
        let v = [0.4, -0.3, 1.9];
        let lse = logsumexp(&v, 1.0).unwrap();
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lse > max);
        // equality only in the single-element case
        assert!((logsumexp(&[7.0], 1.0).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounds() {
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        let u = vec![0.25; 4];
        assert!((entropy(&u) - 4.0f64.ln()).abs() < 1e-12);
    }
}
