use crate::calibrate::DEFAULT_CLAMP;

/// Mean binomial deviance with scores clamped to `[1e-6, 1 - 1e-6]`.
pub fn log_loss(y: &[f64], scores: &[f64]) -> f64 {
    assert_eq!(y.len(), scores.len(), "labels and scores must have equal length");
    if y.is_empty() {
        return 0.0;
    }
    let total: f64 = y
        .iter()
        .zip(scores)
        .map(|(&t, &s)| {
            let s = s.clamp(DEFAULT_CLAMP, 1.0 - DEFAULT_CLAMP);
            -(t * s.ln() + (1.0 - t) * (1.0 - s).ln())
        })
        .sum();
    total / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_scores_give_log_two() {
        let y = [0.0, 1.0, 1.0, 0.0, 1.0];
        assert_eq!(log_loss(&y, &[0.5; 5]), std::f64::consts::LN_2);
    }

    #[test]
    fn perfect_scores_are_clamped() {
        let y = [0.0, 1.0, 1.0];
        let l = log_loss(&y, &y);
        assert!(l > 0.0 && l < 2e-6);
    }

    #[test]
    fn constant_score_recovers_bernoulli_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..1_000_000).map(|_| f64::from(u8::from(rng.random_bool(0.3)))).collect();
        let l = log_loss(&y, &vec![0.3; y.len()]);
        let entropy = -(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
        assert!((entropy - 0.6109).abs() < 1e-4);
        assert!((l - entropy).abs() < 0.002);
    }
}
