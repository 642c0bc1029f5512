//! Nondominated filtering and the lower convex envelope of (bias, loss) points.

use std::cmp::Ordering;

fn by_bias_then_loss(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| points[i].0.is_finite() && points[i].1.is_finite()).collect();
    order.sort_by(|&a, &b| {
        points[a].0.total_cmp(&points[b].0).then(points[a].1.total_cmp(&points[b].1)).then(a.cmp(&b))
    });
    order
}

/// Indices of points not dominated under (minimise bias, minimise loss).
///
/// Point `p` is dominated when another point `q` has `q.bias <= p.bias` and
/// `q.loss <= p.loss` with at least one strict. Exact duplicates therefore
/// both survive. Points with a non-finite coordinate are never returned.
/// The result is ordered by increasing bias, ties by index.
pub fn pareto_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let order = by_bias_then_loss(points);
    let mut out = Vec::new();
    // smallest loss among points of strictly smaller bias
    let mut best_before = f64::INFINITY;
    let mut k = 0;
    while k < order.len() {
        let bias = points[order[k]].0;
        let group_min = points[order[k]].1;
        let mut end = k;
        while end < order.len() && points[order[end]].0 == bias {
            let i = order[end];
            if points[i].1 == group_min && group_min < best_before {
                out.push(i);
            }
            end += 1;
        }
        best_before = best_before.min(group_min);
        k = end;
    }
    out
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Vertices of the lower-left convex envelope of the nondominated set, by
/// Andrew's monotone chain. Collinear interior points are dropped and
/// duplicated coordinates keep their lowest index.
pub fn convex_envelope(points: &[(f64, f64)]) -> Vec<usize> {
    let mut front = pareto_indices(points);
    front.dedup_by(|b, a| points[*a] == points[*b]);
    let mut hull: Vec<usize> = Vec::with_capacity(front.len());
    for i in front {
        while hull.len() >= 2 {
            let (o, a) = (points[hull[hull.len() - 2]], points[hull[hull.len() - 1]]);
            if cross(o, a, points[i]) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// `true` when `a` dominates `b`.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// `true` when every point of `reference` is weakly dominated by some point
/// of `candidate` (bias and loss both no larger).
pub fn weakly_dominates_all(candidate: &[(f64, f64)], reference: &[(f64, f64)]) -> bool {
    reference.iter().all(|r| candidate.iter().any(|c| c.0 <= r.0 && c.1 <= r.1))
}

/// Smallest loss attained by a point with bias at most `bias`.
pub fn loss_at_bias(points: &[(f64, f64)], bias: f64) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.0 <= bias && p.1.is_finite())
        .map(|p| p.1)
        .min_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(points: &[(f64, f64)]) -> Vec<usize> {
        let mut out: Vec<usize> = (0..points.len())
            .filter(|&i| !(0..points.len()).any(|j| j != i && dominates(points[j], points[i])))
            .collect();
        out.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(a.cmp(&b)));
        out
    }

    #[test]
    fn strict_dominance() {
        assert_eq!(pareto_indices(&[(1.0, 1.0), (2.0, 2.0)]), vec![0]);
    }

    #[test]
    fn incomparable_points_both_survive() {
        assert_eq!(pareto_indices(&[(1.0, 2.0), (2.0, 1.0)]), vec![0, 1]);
    }

    #[test]
    fn thousand_random_points_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<(f64, f64)> = (0..1000).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
        assert_eq!(pareto_indices(&pts), brute_force(&pts));
    }

    #[test]
    fn envelope_drops_concave_points() {
        // (1, 1.9) lies above the chord from (0, 3) to (2, 0)
        let pts = [(0.0, 3.0), (1.0, 1.9), (2.0, 0.0), (1.0, 1.0), (3.0, 5.0)];
        assert_eq!(pareto_indices(&pts), vec![0, 3, 2]);
        assert_eq!(convex_envelope(&pts), vec![0, 3, 2]);
        let pts = [(0.0, 3.0), (1.0, 1.9), (2.0, 0.0)];
        assert_eq!(convex_envelope(&pts), vec![0, 2]);
    }

    proptest! {
        #[test]
        fn matches_oracle_with_ties(raw in proptest::collection::vec((0u8..6, 0u8..6), 1..80)) {
            let pts: Vec<(f64, f64)> = raw.iter().map(|&(a, b)| (f64::from(a), f64::from(b))).collect();
            prop_assert_eq!(pareto_indices(&pts), brute_force(&pts));
        }

        #[test]
        fn envelope_is_convex_subset(raw in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..60)) {
            let front = pareto_indices(&raw);
            let hull = convex_envelope(&raw);
            prop_assert!(hull.iter().all(|i| front.contains(i)));
            for w in hull.windows(3) {
                prop_assert!(cross(raw[w[0]], raw[w[1]], raw[w[2]]) > 0.0);
            }
            // no frontier point lies strictly below the envelope
            for &i in &front {
                for w in hull.windows(2) {
                    let (a, b) = (raw[w[0]], raw[w[1]]);
                    let p = raw[i];
                    if p.0 > a.0 && p.0 < b.0 {
                        let chord = a.1 + (b.1 - a.1) * (p.0 - a.0) / (b.0 - a.0);
                        prop_assert!(p.1 >= chord - 1e-12);
                    }
                }
            }
        }
    }
}
