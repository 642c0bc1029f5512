//! Shapley values of cooperative games over at most 64 players.
//!
//! Coalitions are bitmasks: bit `i` set means player `i` is in the coalition.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

/// `w[s] = s! (n - s - 1)! / n!` for `s = 0..n`.
pub fn shapley_weights(n: usize) -> Vec<f64> {
    // 1 / (n * C(n-1, s)) with the binomial built multiplicatively
    let mut w = Vec::with_capacity(n);
    let mut binom = 1.0f64;
    for s in 0..n {
        w.push(1.0 / (n as f64 * binom));
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    w
}

/// Exact Shapley values of the game whose value on mask `S` is `values[S]`.
pub fn exact_shapley(n: usize, values: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), 1 << n, "game table must have 2^n entries");
    let w = shapley_weights(n);
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for s in 0..values.len() {
            if s & bit == 0 {
                acc += w[s.count_ones() as usize] * (values[s | bit] - values[s]);
            }
        }
        *p = acc;
    }
    phi
}

/// Permutation-sampling estimate using antithetic pairs: every sampled
/// ordering is followed by its reverse. `n_pairs` pairs are drawn.
///
/// Game values are memoised per coalition, so `value` is called at most once
/// per distinct mask.
pub fn sampled_shapley<R: Rng + ?Sized>(
    n: usize,
    n_pairs: usize,
    rng: &mut R,
    mut value: impl FnMut(u64) -> f64,
) -> Vec<f64> {
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut eval = |mask: u64, cache: &mut HashMap<u64, f64>| *cache.entry(mask).or_insert_with(|| value(mask));
    let mut phi = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..n_pairs {
        order.shuffle(rng);
        for pass in 0..2 {
            let mut mask = 0u64;
            let mut prev = eval(mask, &mut cache);
            let mut visit = |i: usize, phi: &mut [f64]| {
                mask |= 1 << i;
                let cur = eval(mask, &mut cache);
                phi[i] += cur - prev;
                prev = cur;
            };
            if pass == 0 {
                order.iter().for_each(|&i| visit(i, &mut phi));
            } else {
                order.iter().rev().for_each(|&i| visit(i, &mut phi));
            }
        }
    }
    let m = (2 * n_pairs).max(1) as f64;
    phi.iter_mut().for_each(|p| *p /= m);
    phi
}

#[cfg(test)]
mod tests {
    use super::{exact_shapley, sampled_shapley, shapley_weights};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Oracle: average marginal contribution over all n! orderings.
    fn permutation_oracle(n: usize, values: &[f64]) -> Vec<f64> {
        fn permute(k: usize, order: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k == order.len() {
                out.push(order.clone());
                return;
            }
            for j in k..order.len() {
                order.swap(k, j);
                permute(k + 1, order, out);
                order.swap(k, j);
            }
        }
        let mut perms = Vec::new();
        permute(0, &mut (0..n).collect(), &mut perms);
        let mut phi = vec![0.0; n];
        for p in &perms {
            let mut mask = 0usize;
            for &i in p {
                phi[i] += values[mask | (1 << i)] - values[mask];
                mask |= 1 << i;
            }
        }
        phi.iter().map(|v| v / perms.len() as f64).collect()
    }

    #[test]
    fn weights_sum_over_coalition_sizes() {
        for n in 1..12 {
            let w = shapley_weights(n);
            // Σ_s C(n-1, s) w[s] = 1
            let mut binom = 1.0;
            let mut total = 0.0;
            for (s, ws) in w.iter().enumerate() {
                total += binom * ws;
                binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn glove_game() {
        // players 0 and 1 own left gloves, player 2 a right glove
        let v = |s: usize| f64::from(u8::from(s & 4 != 0 && s & 3 != 0));
        let table: Vec<f64> = (0..8).map(v).collect();
        let phi = exact_shapley(3, &table);
        assert!((phi[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((phi[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((phi[2] - 2.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn exact_matches_permutation_oracle(n in 1usize..6, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut table: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
            table[0] = 0.0;
            let phi = exact_shapley(n, &table);
            let oracle = permutation_oracle(n, &table);
            for (a, b) in phi.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((phi.iter().sum::<f64>() - table[(1 << n) - 1]).abs() < 1e-12);
        }

        #[test]
        fn sampled_is_efficient(n in 1usize..8, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let table: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let phi = sampled_shapley(n, 5, &mut rng, |m| table[m as usize]);
            prop_assert!((phi.iter().sum::<f64>() - (table[(1 << n) - 1] - table[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_converges_to_exact() {
        let n = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table: Vec<f64> = (0..1 << n).map(|s: usize| (s.count_ones() as f64).powi(2) + rng.random_range(0.0..1.0)).collect();
        let exact = exact_shapley(n, &table);
        let approx = sampled_shapley(n, 4000, &mut rng, |m| table[m as usize]);
        for (a, b) in exact.iter().zip(&approx) {
            assert!((a - b).abs() < 0.05, "{a} vs {b}");
        }
    }
}
