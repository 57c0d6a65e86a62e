//! Elementary neural functions.

use alloc::vec::Vec;

use libm::{exp, log};

use crate::error::{Error, Result};

/// Numerically stable log-softmax: subtracts the maximum before
/// exponentiating, so `[1000, 0]` maps to `[≈0, ≈-1000]` without overflow.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    let mut out = logits.to_vec();
    log_softmax_in_place(&mut out)?;
    Ok(out)
}

pub fn log_softmax_in_place(logits: &mut [f64]) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::EmptyInput("log_softmax"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter() {
        sum += exp(v - max);
    }
    let lse = max + log(sum);
    for v in logits.iter_mut() {
        *v -= lse;
    }
    Ok(())
}

/// Turns a row of logits into softmax probabilities.
pub fn softmax_in_place(logits: &mut [f64]) -> Result<()> {
    log_softmax_in_place(logits)?;
    for v in logits.iter_mut() {
        *v = exp(*v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn symmetric_two_way_case() {
        let out = log_softmax(&[0.0, 0.0]).unwrap();
        let half = 0.5f64.ln();
        assert!((out[0] - half).abs() < 1e-15);
        assert!((out[1] - half).abs() < 1e-15);
    }

    #[test]
    fn stays_stable_for_huge_gaps() {
        let out = log_softmax(&[1000.0, 0.0]).unwrap();
        assert!(out[0].abs() < 1e-12);
        assert!((out[1] + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn exp_sums_to_one() {
        let out = log_softmax(&[1.0, 2.0, 3.0]).unwrap();
        let sum: f64 = out.iter().map(|&v| v.exp()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shift_invariance() {
        let mut rng = Rng::new(5);
        for _ in 0..50 {
            let x: Vec<f64> = (0..6).map(|_| rng.normal() * 3.0).collect();
            let shifted: Vec<f64> = x.iter().map(|v| v + 17.25).collect();
            let a = log_softmax(&x).unwrap();
            let b = log_softmax(&shifted).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_input_errors() {
        assert!(matches!(log_softmax(&[]), Err(Error::EmptyInput(_))));
    }
}
