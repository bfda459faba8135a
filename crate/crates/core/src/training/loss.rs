//! Softplus link loss and uniform negative sampling.

use rand::Rng;

use crate::error::{Error, Result};

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `softplus(-s_pos) + sum_neg softplus(s_neg)` over one query's candidate
/// scores, where `label_index` marks the positive.
pub fn loss_one_query(scores: &[f64], label_index: usize) -> Result<f64> {
    if label_index >= scores.len() {
        return Err(Error::LabelOutOfRange { index: label_index, len: scores.len() });
    }
    Ok(scores
        .iter()
        .enumerate()
        .map(|(i, &s)| if i == label_index { softplus(-s) } else { softplus(s) })
        .sum())
}

/// d loss / d score for one candidate.
#[inline]
pub fn loss_grad(score: f64, positive: bool) -> f64 {
    if positive {
        -sigmoid(-score)
    } else {
        sigmoid(score)
    }
}

/// `n` entity ids drawn uniformly with replacement from every entity except
/// `positive_tail`.
pub fn sample_negatives<R: Rng>(
    rng: &mut R,
    positive_tail: u32,
    n: usize,
    n_entities: usize,
) -> Result<Vec<u32>> {
    if n_entities < 2 {
        return Err(Error::TooFewEntities(n_entities));
    }
    let upper = n_entities as u32 - 1;
    Ok((0..n)
        .map(|_| {
            let e = rng.random_range(0..upper);
            if e >= positive_tail {
                e + 1
            } else {
                e
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn loss_examples() {
        let l = loss_one_query(&[0.0, 0.0], 0).unwrap();
        assert!((l - 1.386_294_361_119_890_6).abs() < 1e-15);
        let saturated = loss_one_query(&[800.0, -800.0, -900.0], 0).unwrap();
        assert!(saturated < 1e-300);
        let a = loss_one_query(&[0.5, 0.2], 0).unwrap();
        let b = loss_one_query(&[1.5, 0.2], 0).unwrap();
        assert!(b < a);
        assert!(matches!(loss_one_query(&[0.0], 1), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert_eq!(softplus(-1000.0), 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-16);
    }

    #[test]
    fn negatives_skip_the_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_negatives(&mut rng, 0, 50, 2).unwrap(), vec![1; 50]);
        assert!(sample_negatives(&mut rng, 4, 500, 10).unwrap().iter().all(|&e| e != 4 && e < 10));
        assert!(matches!(sample_negatives(&mut rng, 0, 1, 1), Err(Error::TooFewEntities(1))));
    }

    #[test]
    fn negatives_are_seed_deterministic() {
        let a = sample_negatives(&mut ChaCha8Rng::seed_from_u64(9), 3, 100, 40).unwrap();
        let b = sample_negatives(&mut ChaCha8Rng::seed_from_u64(9), 3, 100, 40).unwrap();
        assert_eq!(a, b);
    }
}
